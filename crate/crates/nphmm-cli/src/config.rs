//! Flat key=value configuration files. Every key can also be set by a
//! command-line flag; flags win.

use crate::CliError;
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("config {}: {e}", path.display())))?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::validation(format!(
                        "config {}, line {}: expected key=value",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(ConfigFile { values })
    }

    /// Flag value if present, else config value parsed as `T`.
    pub fn merge<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::validation(format!("config key '{key}': cannot parse '{raw}'"))
            }),
        }
    }
}

/// Parse a sequence file: one whitespace-separated sequence per line,
/// values in [0, 1], `#` starts a comment line.
pub fn parse_sequences(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut sequences = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut seq = Vec::new();
        for token in line.split_whitespace() {
            let value: f64 = token.parse().map_err(|_| {
                CliError::validation(format!(
                    "{}, line {}: '{token}' is not a number",
                    path.display(),
                    lineno + 1
                ))
            })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(CliError::validation(format!(
                    "{}, line {}: observation {value} outside [0, 1]",
                    path.display(),
                    lineno + 1
                )));
            }
            seq.push(value);
        }
        sequences.push(seq);
    }
    if sequences.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no sequences found",
            path.display()
        )));
    }
    Ok(sequences)
}

pub fn write_sequences(path: &Path, sequences: &[Vec<f64>]) -> Result<(), CliError> {
    let mut out = String::new();
    for seq in sequences {
        let line: Vec<String> = seq.iter().map(|x| format!("{x}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}
