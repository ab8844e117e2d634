use std::path::{Path, PathBuf};

use doakit::evaluate::aggregate;

use crate::output::{metrics_header, metrics_row, summary_table, write_csv, RecordingMetrics};
use crate::{CliError, ReportArgs};

/// `metrics.json` under `path`: the file itself, the one in the directory,
/// or those one level down (batch layouts).
fn collect(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(CliError::Data(format!("{} does not exist", path.display())));
    }
    let direct = path.join("metrics.json");
    if direct.is_file() {
        return Ok(vec![direct]);
    }
    let mut found: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .filter_map(|e| e.ok().map(|e| e.path().join("metrics.json")))
        .filter(|p| p.is_file())
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(CliError::Data(format!(
            "no metrics.json under {}",
            path.display()
        )));
    }
    Ok(found)
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let mut entries = Vec::new();
    for input in &args.inputs {
        for file in collect(input)? {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| CliError::Data(format!("{}: {e}", file.display())))?;
            let m: RecordingMetrics = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", file.display())))?;
            entries.push(m);
        }
    }
    let reports: Vec<_> = entries.iter().map(|m| m.report.clone()).collect();
    let mean = aggregate(&reports).expect("at least one input");
    if let Some(out) = &args.out {
        let mut rows: Vec<Vec<String>> = entries
            .iter()
            .map(|m| metrics_row(&m.recording_id, &m.report))
            .collect();
        rows.push(metrics_row("mean", &mean));
        write_csv(out, &metrics_header(&mean), &rows)?;
    }
    let mut table: Vec<(String, &_)> = entries
        .iter()
        .map(|m| (m.recording_id.clone(), &m.report))
        .collect();
    table.push(("mean".into(), &mean));
    print!("{}", summary_table(&table));
    Ok(())
}
