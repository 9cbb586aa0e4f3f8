//! Scenario loading, report writing and the scaling benchmark behind the
//! `keyfold` command-line tool.

pub mod bench;
pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use keyfold_core::ldpc::ParityCheckMatrix;
use keyfold_core::sim::SimReport;

/// Environment variable naming the default report directory.
pub const REPORT_DIR_ENV: &str = "KEYFOLD_REPORT_DIR";

/// Loads a parity-check matrix: the keyword `builtin-8x16`, an `.alist`
/// file, or the dense text format.
pub fn load_matrix(spec: &str) -> Result<ParityCheckMatrix> {
    if spec == "builtin-8x16" {
        return Ok(ParityCheckMatrix::builtin_8x16());
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).with_context(|| format!("reading matrix {spec}"))?;
    let parsed = if path.extension().is_some_and(|e| e == "alist") {
        ParityCheckMatrix::parse_alist(&text)
    } else {
        ParityCheckMatrix::parse_dense(&text)
    };
    parsed.with_context(|| format!("parsing matrix {spec}"))
}

/// Parses an ASCII 0/1 string into bits.
pub fn parse_bits(text: &str) -> Result<Vec<u8>> {
    text.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            other => anyhow::bail!("bit string may only contain 0 and 1, found {other:?}"),
        })
        .collect()
}

pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|b| if *b == 0 { '0' } else { '1' }).collect()
}

/// Where report files go: an explicit flag, the `KEYFOLD_REPORT_DIR`
/// environment variable, or the current directory.
pub fn report_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(dir) = explicit {
        return dir.to_path_buf();
    }
    if let Ok(dir) = std::env::var(REPORT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(".")
}

/// Writes the text and CSV renderings of a report next to each other,
/// returning the two paths.
pub fn write_report(
    report: &SimReport,
    scenario_path: &Path,
    dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).with_context(|| format!("creating report dir {}", dir.display()))?;
    let stem = scenario_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario");
    let text_path = dir.join(format!("{stem}.report.txt"));
    let csv_path = dir.join(format!("{stem}.report.csv"));
    fs::write(&text_path, report.render_text())
        .with_context(|| format!("writing {}", text_path.display()))?;
    fs::write(&csv_path, report.render_csv())
        .with_context(|| format!("writing {}", csv_path.display()))?;
    Ok((text_path, csv_path))
}
