use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Everything a subcommand produces; written out by [`write`].
pub struct Outcome {
    /// The config after defaults are filled in.
    pub config: Value,
    pub seed: Option<u64>,
    pub results: Value,
    /// Extra files as `(name, bytes)`.
    pub files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct Header<'a> {
    command: &'a str,
    version: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp_unix: Option<u64>,
    seed: Option<u64>,
    config: Value,
    results: Value,
}

pub fn write(dir: &Path, command: &str, outcome: Outcome, timestamp: bool) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let header = Header {
        command,
        version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: timestamp.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        }),
        seed: outcome.seed,
        config: outcome.config,
        results: outcome.results,
    };
    let mut json = serde_json::to_string_pretty(&header).expect("report serializes");
    json.push('\n');
    let put = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))
    };
    put("report.json", json.as_bytes())?;
    for (name, bytes) in &outcome.files {
        put(name, bytes)?;
    }
    Ok(())
}
