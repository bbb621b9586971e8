//! Batch front end for `hessfield-core`: TOML run configurations, actions and
//! CSV/JSON artifacts.

pub mod config;
pub mod run;

use std::path::{Path, PathBuf};

use anyhow::Result;

pub use config::{Action, RunConfig};
pub use run::{Outcome, Runner, SweepRow};

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Loads `path`, applies overrides and resolves the output directory
/// (`--out`, then `output_dir`, then `out/<config stem>`).
pub fn load(path: &Path, ov: &Overrides) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    let out = match (&ov.out, &cfg.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
            PathBuf::from("out").join(stem)
        }
    };
    Ok((cfg, out))
}
