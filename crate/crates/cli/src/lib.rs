//! Scenario runner for the `wavelab` library: TOML configuration, one
//! runner per scenario, and a checksummed artifact manifest.

pub mod config;
pub mod output;
pub mod scenarios;

use std::path::Path;

use config::ScenarioConfig;
use output::OutputDir;

/// Process exit status of a finished run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// The evolution stopped early; partial artifacts were written.
    Aborted,
    /// A library or I/O error; the manifest records it.
    Failed,
}

impl RunStatus {
    pub fn code(self) -> i32 {
        match self {
            RunStatus::Completed => 0,
            RunStatus::Aborted => 3,
            RunStatus::Failed => 4,
        }
    }
}

/// Runs `cfg` into `out_dir`, always leaving a `manifest.json` behind.
pub fn run_to_dir(cfg: &ScenarioConfig, out_dir: &Path) -> std::io::Result<(RunStatus, String)> {
    let mut out = OutputDir::create(out_dir)?;
    let toml_text = cfg.to_toml();
    out.write("config.toml", |w| w.write_all(toml_text.as_bytes()))?;
    let echo = serde_json::to_value(cfg).expect("config serializes");
    match scenarios::run(cfg, &mut out) {
        Ok(outcome) => {
            let status = if outcome.abort.is_some() { RunStatus::Aborted } else { RunStatus::Completed };
            out.finish(&echo, outcome.abort.as_ref(), None)?;
            let text = serde_json::to_string_pretty(&outcome.summary).expect("summary serializes");
            Ok((status, text))
        }
        Err(err) => {
            let msg = format!("{err:#}");
            out.finish(&echo, None, Some(&msg))?;
            Ok((RunStatus::Failed, msg))
        }
    }
}
