use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::csv::{parse_recording_csv, write_recording_csv};
use crate::error::{CsvError, DatasetError};
use crate::label::GaitLabel;
use crate::recording::{GaitRecording, SessionId};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    recordings: Vec<GaitRecording>,
    class_counts: BTreeMap<GaitLabel, usize>,
}

impl Dataset {
    pub fn new(recordings: Vec<GaitRecording>) -> Self {
        let mut class_counts: BTreeMap<GaitLabel, usize> =
            GaitLabel::ALL.iter().map(|&l| (l, 0)).collect();
        for rec in &recordings {
            *class_counts.entry(rec.label).or_default() += 1;
        }
        Self {
            recordings,
            class_counts,
        }
    }

    pub fn recordings(&self) -> &[GaitRecording] {
        &self.recordings
    }

    pub fn into_recordings(self) -> Vec<GaitRecording> {
        self.recordings
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    pub fn class_counts(&self) -> &BTreeMap<GaitLabel, usize> {
        &self.class_counts
    }

    pub fn count(&self, label: GaitLabel) -> usize {
        self.class_counts.get(&label).copied().unwrap_or(0)
    }

    /// Equal, non-zero count for every one of the four classes.
    pub fn is_balanced(&self) -> bool {
        let first = self.count(GaitLabel::Walking);
        first > 0 && GaitLabel::ALL.iter().all(|&l| self.count(l) == first)
    }

    pub fn labels(&self) -> Vec<GaitLabel> {
        self.recordings.iter().map(|r| r.label).collect()
    }

    /// Sub-dataset of the given recording indices, in index order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset::new(indices.iter().map(|&i| self.recordings[i].clone()).collect())
    }
}

#[derive(Debug)]
pub struct LoadFailure {
    pub path: PathBuf,
    pub error: LoadFailureKind,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadFailureKind {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("file label {found} does not match directory {dir}")]
    LabelMismatch { dir: GaitLabel, found: GaitLabel },
}

/// Result of [`load_dataset`]: every successfully parsed recording plus one
/// entry per file that could not be loaded.
#[derive(Debug)]
pub struct DatasetLoad {
    pub dataset: Dataset,
    pub failures: Vec<LoadFailure>,
    /// Path of each loaded recording, parallel to `dataset.recordings()`.
    pub paths: Vec<PathBuf>,
}

pub fn label_dir(root: &Path, label: GaitLabel) -> PathBuf {
    root.join(label.code())
}

pub fn recording_path(root: &Path, rec: &GaitRecording) -> PathBuf {
    label_dir(root, rec.label).join(format!("{}.csv", rec.session_id))
}

/// Reads one recording file; the session id is taken from the file stem.
pub fn read_recording(path: &Path) -> Result<GaitRecording, LoadFailureKind> {
    let bytes = fs::read(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(parse_recording_csv(&bytes, SessionId::new(stem))?)
}

/// Loads `<root>/<label-code>/*.csv` for each of the four label directories.
///
/// Files are visited in sorted path order so the resulting recording order
/// is stable across runs. Corrupt files are reported in
/// [`DatasetLoad::failures`] rather than skipped silently.
pub fn load_dataset(root: &Path) -> Result<DatasetLoad, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let mut recordings = Vec::new();
    let mut paths = Vec::new();
    let mut failures = Vec::new();
    for label in GaitLabel::ALL {
        let dir = label_dir(root, label);
        if !dir.is_dir() {
            continue;
        }
        let entries = fs::read_dir(&dir).map_err(|source| DatasetError::Io {
            path: dir.clone(),
            source,
        })?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
            .collect();
        files.sort();
        for path in files {
            match read_recording(&path) {
                Ok(rec) if rec.label != label => failures.push(LoadFailure {
                    path,
                    error: LoadFailureKind::LabelMismatch {
                        dir: label,
                        found: rec.label,
                    },
                }),
                Ok(rec) => {
                    recordings.push(rec);
                    paths.push(path);
                }
                Err(error) => failures.push(LoadFailure { path, error }),
            }
        }
    }
    if recordings.is_empty() {
        return Err(DatasetError::EmptyDataset(root.to_path_buf()));
    }
    Ok(DatasetLoad {
        dataset: Dataset::new(recordings),
        failures,
        paths,
    })
}

/// Writes every recording of `ds` into the per-label layout under `root`.
pub fn write_dataset(root: &Path, ds: &Dataset) -> Result<Vec<PathBuf>, DatasetError> {
    let mut written = Vec::with_capacity(ds.len());
    for rec in ds.recordings() {
        let violations = rec.validate();
        if !violations.is_empty() {
            return Err(DatasetError::InvalidRecording {
                session_id: rec.session_id.to_string(),
                violations,
            });
        }
        let path = recording_path(root, rec);
        let io_err = |source| DatasetError::Io {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(path.parent().expect("label dir")).map_err(io_err)?;
        fs::write(&path, write_recording_csv(rec)).map_err(io_err)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::tests::zero_recording;

    fn rec(label: GaitLabel, id: &str) -> GaitRecording {
        let mut r = zero_recording();
        r.label = label;
        r.session_id = SessionId::new(id);
        r
    }

    #[test]
    fn counts_and_balance() {
        let ds = Dataset::new(
            GaitLabel::ALL
                .iter()
                .flat_map(|&l| [rec(l, "a"), rec(l, "b")])
                .collect(),
        );
        assert!(ds.is_balanced());
        assert_eq!(ds.count(GaitLabel::Feint), 2);
        let unbalanced = ds.subset(&[0, 1, 2]);
        assert!(!unbalanced.is_balanced());
        assert_eq!(unbalanced.count(GaitLabel::Walking), 2);
        assert_eq!(unbalanced.count(GaitLabel::Limping), 0);
    }

    #[test]
    fn empty_root_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DatasetError::EmptyDataset(_))));
    }

    #[test]
    fn corrupt_file_reported_alongside_valid_one() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &Dataset::new(vec![rec(GaitLabel::Limping, "good")])).unwrap();
        let bad = dir.path().join("MM").join("bad.csv");
        fs::write(&bad, "# name,x\n").unwrap();
        let load = load_dataset(dir.path()).unwrap();
        assert_eq!(load.dataset.len(), 1);
        assert_eq!(load.failures.len(), 1);
        assert_eq!(load.failures[0].path, bad);
        assert_eq!(load.dataset.recordings()[0].session_id.as_str(), "good");
    }

    #[test]
    fn label_mismatch_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &Dataset::new(vec![rec(GaitLabel::Limping, "x")])).unwrap();
        fs::create_dir_all(dir.path().join("MN")).unwrap();
        fs::rename(dir.path().join("MM/x.csv"), dir.path().join("MN/x.csv")).unwrap();
        fs::write(dir.path().join("MM/y.csv"), write_recording_csv(&rec(GaitLabel::Limping, "y")))
            .unwrap();
        let load = load_dataset(dir.path()).unwrap();
        assert!(matches!(
            load.failures[0].error,
            LoadFailureKind::LabelMismatch { dir: GaitLabel::Walking, found: GaitLabel::Limping }
        ));
    }

    #[test]
    fn write_refuses_invalid_recordings() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = rec(GaitLabel::Walking, "short");
        r.channels[2].pop();
        assert!(matches!(
            write_dataset(dir.path(), &Dataset::new(vec![r])),
            Err(DatasetError::InvalidRecording { .. })
        ));
    }
}
