use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{sha256_hex, DataError, Sample, SampleMeta, Split};
use crate::diff::io::read_tensor;
use crate::mesh::{load_mesh, TriMesh};
use crate::physics::APParams;
use crate::Scalar;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Failure {
    pub id: String,
    pub reason: String,
}

/// Everything needed to interpret and verify a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    /// relative to the dataset directory
    pub heart_mesh: PathBuf,
    pub torso_mesh: PathBuf,
    pub seed: u64,
    pub frames: usize,
    pub snr_db: f64,
    pub ap: APParams,
    /// stimulus vertex per origin index
    pub origins: Vec<usize>,
    /// scar vertex set per scar index
    pub scars: Vec<Vec<usize>>,
    #[serde(default)]
    pub samples: Vec<SampleMeta>,
    #[serde(default)]
    pub failures: Vec<Failure>,
}

impl DatasetManifest {
    pub const VERSION: u32 = 1;

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let text = toml::to_string(self).map_err(|e| DataError::Manifest(e.to_string()))?;
        fs::write(path, text).map_err(DataError::io(path))
    }

    /// Parses and checks version, id uniqueness and referenced files.
    pub fn load(dir: &Path) -> Result<Self, DataError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(DataError::io(&path))?;
        let m: Self = toml::from_str(&text).map_err(|e| DataError::Manifest(e.to_string()))?;
        if m.version != Self::VERSION {
            return Err(DataError::Manifest(format!("unsupported version {}", m.version)));
        }
        let mut ids = BTreeSet::new();
        for s in &m.samples {
            if !ids.insert(s.id.as_str()) {
                return Err(DataError::Manifest(format!("duplicate sample id {}", s.id)));
            }
            if s.origin >= m.origins.len() || s.scar >= m.scars.len() {
                return Err(DataError::Manifest(format!("sample {} references an unknown origin or scar", s.id)));
            }
        }
        for f in [&m.heart_mesh, &m.torso_mesh] {
            if !dir.join(f).is_file() {
                return Err(DataError::Manifest(format!("missing geometry file {}", f.display())));
            }
        }
        Ok(m)
    }

    pub fn heart(&self, dir: &Path) -> Result<TriMesh, DataError> {
        Ok(load_mesh(dir.join(&self.heart_mesh))?)
    }

    pub fn torso(&self, dir: &Path) -> Result<TriMesh, DataError> {
        Ok(load_mesh(dir.join(&self.torso_mesh))?)
    }

    pub fn split(&self, split: Option<Split>) -> impl Iterator<Item = &SampleMeta> {
        self.samples.iter().filter(move |s| split.is_none_or(|sp| s.split == sp))
    }
}

fn read_checked<T: Scalar>(
    dir: &Path,
    meta: &SampleMeta,
    field: &'static str,
    expected_sha: &str,
    expected_shape: [usize; 3],
) -> Result<ndarray::ArrayD<T>, DataError> {
    let path = dir.join(format!("{}.{field}", meta.id));
    let bytes = fs::read(&path).map_err(DataError::io(&path))?;
    if sha256_hex(&bytes) != expected_sha {
        return Err(DataError::Checksum { id: meta.id.clone(), field });
    }
    let t: ndarray::ArrayD<T> = read_tensor(&mut bytes.as_slice()).map_err(DataError::io(&path))?;
    if t.shape() != expected_shape {
        return Err(DataError::Shape {
            id: meta.id.clone(),
            field,
            expected: expected_shape.to_vec(),
            found: t.shape().to_vec(),
        });
    }
    Ok(t)
}

/// Loads one split (or all samples) in manifest order, verifying checksums
/// and shapes against the stored geometry.
pub fn load_samples<T: Scalar>(dir: &Path, split: Option<Split>) -> Result<Vec<Sample<T>>, DataError> {
    let m = DatasetManifest::load(dir)?;
    let heart = m.heart(dir)?.num_vertices();
    let torso = m.torso(dir)?.num_vertices();
    m.split(split)
        .map(|meta| {
            let x = read_checked(dir, meta, "X", &meta.x_sha256, [heart, 1, m.frames])?;
            let y = read_checked(dir, meta, "Y", &meta.y_sha256, [torso, 1, m.frames])?;
            Ok(Sample { meta: meta.clone(), x, y })
        })
        .collect()
}
