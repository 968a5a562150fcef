//! Sample files: one finite number per line (blank lines skipped), or a
//! single-column CSV whose first line is a header.

use std::io::Read;
use std::path::Path;

use crate::{Error, Result};

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.contains(',') {
            return Err(Error::Input(format!("line {}: expected a single column, got {line:?}", i + 1)));
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => return Err(Error::Input(format!("line {}: non-finite value {v}", i + 1))),
            // header
            Err(_) if first => {}
            Err(_) => return Err(Error::Input(format!("line {}: not a number: {line:?}", i + 1))),
        }
        first = false;
    }
    Ok(values)
}

/// Read from `path`, or standard input when `path` is `-`.
pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let mut text = String::new();
    if path == Path::new("-") {
        std::io::stdin().read_to_string(&mut text).map_err(|e| Error::io(path, e))?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    }
    parse_values(&text)
}
