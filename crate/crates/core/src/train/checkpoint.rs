use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AdamConfig, AdamState, TrainError};
use crate::diff::io::{read_tensor, write_tensor};
use crate::network::{Model, ModelConfig, ModelParams};
use crate::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GICK";
const VERSION: u32 = 1;

/// Mean per-sample training loss of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
}

/// Complete training state: resuming from it reproduces the uninterrupted run.
///
/// File layout (little endian): magic, `u32` version, the model config as a
/// length-prefixed TOML string, the geometry hash, `u64` epoch and seed, the
/// Adam hyperparameters, named parameter tensors, Adam step and moments, and
/// the loss history.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub config: ModelConfig,
    pub geometry_hash: String,
    /// completed epochs
    pub epoch: usize,
    pub seed: u64,
    pub adam_config: AdamConfig,
    pub params: ModelParams<T>,
    pub adam: AdamState<T>,
    pub history: Vec<EpochRecord>,
}

fn put_u64(w: &mut impl Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    put_u64(w, s.len() as u64)?;
    w.write_all(s.as_bytes())
}

fn get_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> io::Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

fn get_str(r: &mut impl Read) -> io::Result<String> {
    let len = get_u64(r)?;
    if len > 1 << 24 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "string block too long"));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

impl<T: Scalar> Checkpoint<T> {
    /// Fresh state for `model` before any training.
    pub fn initial(model: &Model<T>, geometry_hash: &str, seed: u64, adam_config: AdamConfig) -> Self {
        Self {
            config: model.config().clone(),
            geometry_hash: geometry_hash.to_string(),
            epoch: 0,
            seed,
            adam_config,
            adam: AdamState::new(model.params()),
            params: model.params().clone(),
            history: Vec::new(),
        }
    }

    pub fn model(&self) -> Result<Model<T>, TrainError> {
        Ok(Model::from_params(self.config.clone(), self.params.clone())?)
    }

    pub fn write(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let config = toml::to_string(&self.config).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        put_str(w, &config)?;
        put_str(w, &self.geometry_hash)?;
        put_u64(w, self.epoch as u64)?;
        put_u64(w, self.seed)?;
        let a = &self.adam_config;
        for v in [a.lr, a.beta1, a.beta2, a.eps] {
            put_u64(w, v.to_bits())?;
        }
        put_u64(w, self.params.len() as u64)?;
        for (name, t) in self.params.tensors() {
            put_str(w, name)?;
            write_tensor(w, t)?;
        }
        put_u64(w, self.adam.step)?;
        for t in self.adam.m.iter().chain(&self.adam.v) {
            write_tensor(w, t)?;
        }
        put_u64(w, self.history.len() as u64)?;
        for h in &self.history {
            put_u64(w, h.epoch as u64)?;
            put_u64(w, h.loss.to_bits())?;
        }
        Ok(())
    }

    pub fn read(r: &mut impl Read) -> Result<Self, TrainError> {
        let corrupt = |e: io::Error| TrainError::Corrupt(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(corrupt)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(TrainError::Corrupt("bad magic".into()));
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v).map_err(corrupt)?;
        if u32::from_le_bytes(v) != VERSION {
            return Err(TrainError::Corrupt(format!("unsupported version {}", u32::from_le_bytes(v))));
        }
        let config: ModelConfig =
            toml::from_str(&get_str(r).map_err(corrupt)?).map_err(|e| TrainError::Corrupt(e.to_string()))?;
        let geometry_hash = get_str(r).map_err(corrupt)?;
        let epoch = get_u64(r).map_err(corrupt)? as usize;
        let seed = get_u64(r).map_err(corrupt)?;
        let adam_config = AdamConfig {
            lr: get_f64(r).map_err(corrupt)?,
            beta1: get_f64(r).map_err(corrupt)?,
            beta2: get_f64(r).map_err(corrupt)?,
            eps: get_f64(r).map_err(corrupt)?,
        };
        let count = get_u64(r).map_err(corrupt)? as usize;
        if count != config.param_specs().len() {
            return Err(TrainError::Corrupt(format!("{count} parameter blocks for this configuration")));
        }
        let mut named = Vec::with_capacity(count);
        for _ in 0..count {
            let name = get_str(r).map_err(corrupt)?;
            named.push((name, read_tensor(r).map_err(corrupt)?));
        }
        let params = ModelParams::from_named(&config, named)?;
        let step = get_u64(r).map_err(corrupt)?;
        let mut moments = Vec::with_capacity(2 * count);
        for (_, p) in params.tensors().iter().chain(params.tensors()) {
            let t: ndarray::ArrayD<T> = read_tensor(r).map_err(corrupt)?;
            if t.shape() != p.shape() {
                return Err(TrainError::Corrupt("optimizer moment shape mismatch".into()));
            }
            moments.push(t);
        }
        let v = moments.split_off(count);
        let n = get_u64(r).map_err(corrupt)? as usize;
        let mut history = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let epoch = get_u64(r).map_err(corrupt)? as usize;
            history.push(EpochRecord { epoch, loss: get_f64(r).map_err(corrupt)? });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(corrupt)? != 0 {
            return Err(TrainError::Corrupt("trailing bytes".into()));
        }
        Ok(Self {
            config,
            geometry_hash,
            epoch,
            seed,
            adam_config,
            params,
            adam: AdamState { step, m: moments, v },
            history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let io_err = |source| TrainError::Io { path: path.to_path_buf(), source };
        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        self.write(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let file = File::open(path).map_err(|source| TrainError::Io { path: path.to_path_buf(), source })?;
        Self::read(&mut BufReader::new(file))
    }

    /// Refuses to run on geometry other than the one trained on.
    pub fn check_geometry(&self, hash: &str) -> Result<(), TrainError> {
        if self.geometry_hash != hash {
            return Err(TrainError::GeometryMismatch {
                expected: self.geometry_hash.clone(),
                found: hash.to_string(),
            });
        }
        Ok(())
    }
}
