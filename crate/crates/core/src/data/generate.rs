use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, sha256_hex, DataError, DatasetManifest, Failure, Sample, SampleMeta, Split, MANIFEST_FILE};
use crate::diff::io::write_tensor;
use crate::mesh::{write_mesh, Axis, TriMesh};
use crate::physics::{add_noise, apply_forward, geodesic_distances, simulate_ap, APParams, ForwardOperator, ScarMap};

/// The origin x scar x rotation grid and the measurement model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub origins: usize,
    pub scars: usize,
    /// geodesic radius of each scar ball, in mesh units
    pub scar_radius: f64,
    pub axis: Axis,
    pub rotations: Vec<f64>,
    pub frames: usize,
    pub snr_db: f64,
    pub train_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            origins: 6,
            scars: 3,
            scar_radius: 0.6,
            axis: Axis::Z,
            rotations: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            frames: 60,
            snr_db: 20.0,
            train_fraction: 0.8,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidConfig(m.into()));
        if self.frames == 0 {
            return bad("frames must be positive");
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return bad("train_fraction must lie in [0, 1]");
        }
        if self.scar_radius < 0.0 || !self.scar_radius.is_finite() {
            return bad("scar_radius must be finite and non-negative");
        }
        if self.rotations.iter().any(|d| !d.is_finite()) || self.snr_db.is_nan() {
            return bad("rotations and snr_db must be numbers");
        }
        Ok(())
    }
}

/// Greedy farthest-point selection by geodesic distance, skipping `excluded`.
pub fn farthest_point_sampling(mesh: &TriMesh, count: usize, start: usize, excluded: &dyn Fn(usize) -> bool) -> Vec<usize> {
    let n = mesh.num_vertices();
    let Some(first) = (0..n).map(|k| (start + k) % n).find(|&v| !excluded(v)) else {
        return Vec::new();
    };
    let mut chosen = vec![first];
    let mut nearest = geodesic_distances(mesh, first);
    while chosen.len() < count {
        let next = (0..n)
            .filter(|&v| !excluded(v) && !chosen.contains(&v))
            .max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a)));
        let Some(next) = next else { break };
        chosen.push(next);
        for (d, e) in nearest.iter_mut().zip(geodesic_distances(mesh, next)) {
            *d = d.min(e);
        }
    }
    chosen
}

/// One point of the generation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub origin: usize,
    pub scar: usize,
    pub axis: Axis,
    pub degrees: f64,
}

impl SampleSpec {
    pub fn id(&self) -> String {
        format!("o{:02}_s{:02}_{}{:+}", self.origin, self.scar, self.axis, self.degrees)
    }
}

/// Simulates and projects samples for fixed meshes, origins and scars.
#[derive(Debug, Clone)]
pub struct Generator {
    pub heart: TriMesh,
    pub torso: TriMesh,
    pub origins: Vec<usize>,
    pub scars: Vec<ScarMap>,
    pub params: APParams,
    pub frames: usize,
    pub snr_db: f64,
    pub seed: u64,
}

impl Generator {
    /// Scar centers by farthest-point sampling from the middle vertex, then
    /// origins by farthest-point sampling outside every scar.
    pub fn new(heart: TriMesh, torso: TriMesh, config: &DataConfig, params: APParams, seed: u64) -> Result<Self, DataError> {
        config.validate()?;
        params.validate()?;
        let n = heart.num_vertices();
        let centers = farthest_point_sampling(&heart, config.scars, n / 2, &|_| false);
        let scars = centers
            .iter()
            .map(|&c| ScarMap::geodesic_ball(&heart, c, config.scar_radius))
            .collect::<Result<Vec<_>, _>>()?;
        let scarred = |v: usize| scars.iter().any(|s| s.contains(v));
        let origins = farthest_point_sampling(&heart, config.origins, 0, &scarred);
        if origins.len() < config.origins || scars.len() < config.scars {
            return Err(DataError::InvalidConfig(format!(
                "mesh with {n} vertices cannot host {} origins outside {} scars",
                config.origins, config.scars
            )));
        }
        Ok(Self {
            heart,
            torso,
            origins,
            scars,
            params,
            frames: config.frames,
            snr_db: config.snr_db,
            seed,
        })
    }

    /// Every `(origin, scar, rotation)` combination in grid order.
    pub fn grid(&self, axis: Axis, rotations: &[f64]) -> Vec<SampleSpec> {
        let mut specs = Vec::new();
        for origin in 0..self.origins.len() {
            for scar in 0..self.scars.len() {
                for &degrees in rotations {
                    specs.push(SampleSpec { origin, scar, axis, degrees });
                }
            }
        }
        specs
    }

    pub fn sample_seed(&self, spec: &SampleSpec) -> u64 {
        derive_seed(self.seed, &spec.id())
    }

    /// Simulate on the heart, rotate it, rebuild the forward operator,
    /// project onto the torso and add noise.
    pub fn generate(&self, spec: &SampleSpec) -> Result<Sample<f64>, DataError> {
        let scar = &self.scars[spec.scar];
        let x = simulate_ap(&self.heart, Some(self.origins[spec.origin]), scar, &self.params, self.frames)?;
        let heart = self.heart.rotated(spec.axis, spec.degrees);
        let h = ForwardOperator::<f64>::build(heart.vertices(), self.torso.vertices())?;
        let seed = self.sample_seed(spec);
        let y = add_noise(&apply_forward(&h, &x)?, self.snr_db, seed)?;
        Ok(Sample {
            meta: SampleMeta {
                id: spec.id(),
                origin: spec.origin,
                scar: spec.scar,
                axis: spec.axis,
                degrees: spec.degrees,
                seed,
                split: Split::Test,
                x_sha256: String::new(),
                y_sha256: String::new(),
            },
            x,
            y,
        })
    }
}

/// Per-origin shuffle; the first `round(fraction * n)` of each origin train.
fn assign_splits(samples: &mut [Sample<f64>], fraction: f64, seed: u64) {
    let mut origins: Vec<usize> = samples.iter().map(|s| s.meta.origin).collect();
    origins.sort_unstable();
    origins.dedup();
    for o in origins {
        let mut idx: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].meta.origin == o).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("split/{o}")));
        idx.shuffle(&mut rng);
        let train = (fraction * idx.len() as f64).round() as usize;
        for (rank, i) in idx.into_iter().enumerate() {
            samples[i].meta.split = if rank < train { Split::Train } else { Split::Test };
        }
    }
}

fn encode(a: &ndarray::ArrayD<f64>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_tensor(&mut buf, a).expect("writing to memory");
    buf
}

/// Generates the full grid into `out_dir`, writing `<id>.X`, `<id>.Y`, both
/// meshes and the manifest. Samples whose simulation fails are logged and
/// listed under failures.
pub fn generate_dataset(
    config: &DataConfig,
    heart: &TriMesh,
    torso: &TriMesh,
    params: &APParams,
    seed: u64,
    out_dir: &Path,
) -> Result<DatasetManifest, DataError> {
    let gen = Generator::new(heart.clone(), torso.clone(), config, *params, seed)?;
    fs::create_dir_all(out_dir).map_err(DataError::io(out_dir))?;
    let specs = gen.grid(config.axis, &config.rotations);
    let results: Vec<_> = specs.par_iter().map(|s| (s.id(), gen.generate(s))).collect();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => {
                log::warn!("sample {id} skipped: {e}");
                failures.push(Failure { id, reason: e.to_string() });
            }
        }
    }
    assign_splits(&mut samples, config.train_fraction, seed);
    samples
        .par_iter_mut()
        .map(|s| {
            let (xb, yb) = (encode(&s.x), encode(&s.y));
            s.meta.x_sha256 = sha256_hex(&xb);
            s.meta.y_sha256 = sha256_hex(&yb);
            for (ext, bytes) in [("X", xb), ("Y", yb)] {
                let path = out_dir.join(format!("{}.{ext}", s.meta.id));
                fs::write(&path, bytes).map_err(DataError::io(path))?;
            }
            Ok(())
        })
        .collect::<Result<Vec<()>, DataError>>()?;
    for (name, mesh) in [("heart.mesh", heart), ("torso.mesh", torso)] {
        write_mesh(out_dir.join(name), mesh)?;
    }
    let manifest = DatasetManifest {
        version: DatasetManifest::VERSION,
        heart_mesh: "heart.mesh".into(),
        torso_mesh: "torso.mesh".into(),
        seed,
        frames: config.frames,
        snr_db: config.snr_db,
        ap: *params,
        origins: gen.origins.clone(),
        scars: gen.scars.iter().map(|s| s.vertices().iter().copied().collect()).collect(),
        samples: samples.into_iter().map(|s| s.meta).collect(),
        failures,
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
