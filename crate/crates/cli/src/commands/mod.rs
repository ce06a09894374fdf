pub mod gen;
pub mod run;
pub mod spectrogram;
pub mod train;

use crate::error::{CliError, CliResult};
use gaitlab_core::{load_dataset, Dataset};
use std::path::Path;

/// Loads a dataset, reporting unreadable files on stderr.
pub fn load(root: &Path) -> CliResult<Dataset> {
    let load = load_dataset(root).map_err(|e| CliError::Data(e.to_string()))?;
    for f in &load.failures {
        tracing::warn!(path = %f.path.display(), "skipped: {}", f.error);
    }
    Ok(load.dataset)
}
