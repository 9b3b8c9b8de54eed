//! Observation file loading.
//!
//! `.txt` holds newline-delimited integers (one flat plate level);
//! `.json` holds nested arrays matching the observed variable's plate
//! nesting. The format is picked by extension.

use std::path::Path;

use vmpforge_core::bn::ObsData;

use crate::error::CliError;

pub fn load_observations(path: &Path) -> Result<ObsData, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_json(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        _ => parse_flat(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
    }
}

fn parse_flat(text: &str) -> Result<ObsData, String> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: u32 = line
            .parse()
            .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        values.push(v);
    }
    Ok(ObsData::Values(values))
}

fn parse_json(text: &str) -> Result<ObsData, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    from_value(&value)
}

fn from_value(value: &serde_json::Value) -> Result<ObsData, String> {
    let arr = value
        .as_array()
        .ok_or_else(|| "observations must be a JSON array".to_string())?;
    if arr.iter().all(|v| v.is_array()) {
        let groups = arr.iter().map(from_value).collect::<Result<_, _>>()?;
        Ok(ObsData::Groups(groups))
    } else if arr.iter().all(|v| v.is_u64()) {
        let values = arr
            .iter()
            .map(|v| {
                let n = v.as_u64().expect("checked u64");
                u32::try_from(n).map_err(|_| format!("category index {n} out of range"))
            })
            .collect::<Result<_, _>>()?;
        Ok(ObsData::Values(values))
    } else {
        Err("observation arrays must be homogeneous (all arrays or all integers)".into())
    }
}
