use std::path::PathBuf;

use serde::Serialize;

/// Written as `manifest.json` next to every output set.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: PathBuf,
    pub seed: u64,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    /// Files written by the command, relative to the output directory.
    pub outputs: Vec<String>,
}
