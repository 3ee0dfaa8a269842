//! Configuration, sweep execution and figure presets behind the `ddsym` command.

pub mod config;
pub mod figures;
pub mod run;

use std::fs;
use std::path::Path;

use figures::Figure;
use run::{run_config, RunError, RunOutcome};

/// Runs a bundled figure preset and writes `figure.json` next to the point results.
pub fn reproduce(fig: Figure, out: Option<&Path>) -> Result<(RunOutcome, serde_json::Value), RunError> {
    let cfg = fig.preset()?;
    let outcome = run_config(&cfg, out)?;
    let summary = figures::summarize(fig, &outcome);
    if let Some(dir) = out {
        fs::write(
            dir.join("figure.json"),
            serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
        )?;
    }
    Ok((outcome, summary))
}
