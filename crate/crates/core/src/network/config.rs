use serde::{Deserialize, Serialize};

use super::NetworkError;
use crate::diff::conv_output_len;
use crate::spline::SplineShape;

/// One spatial-temporal block: spline convolution with a width-1 residual
/// path, ELU, then a strided temporal convolution (or its transpose).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
    pub stride: usize,
    pub padding: usize,
}

impl BlockConfig {
    pub const fn new(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            width: 5,
            stride,
            padding: 2,
        }
    }
}

/// Stride-1, length-preserving temporal convolution over all nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixerConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
}

impl MixerConfig {
    pub const fn new(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            width: 3,
        }
    }

    pub fn padding(&self) -> usize {
        self.width / 2
    }
}

/// Architecture of the encoder, bipartite inverse map and decoder.
///
/// Encoder block `k` runs on torso level `k` and pools into `k + 1`; decoder
/// block `k` unpools from heart level `L - k` into `L - k - 1`, where `L` is
/// the number of decoder blocks. Mixers follow each block stack, with ELU
/// between consecutive mixers and none after the last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub time_len: usize,
    pub spline: SplineShape,
    pub inverse_spline: SplineShape,
    pub encoder: Vec<BlockConfig>,
    pub encoder_mixers: Vec<MixerConfig>,
    pub decoder: Vec<BlockConfig>,
    pub decoder_mixers: Vec<MixerConfig>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            time_len: 60,
            spline: SplineShape::default(),
            inverse_spline: SplineShape::default(),
            encoder: vec![BlockConfig::new(1, 16, 2), BlockConfig::new(16, 32, 2), BlockConfig::new(32, 64, 2)],
            encoder_mixers: vec![MixerConfig::new(64, 64), MixerConfig::new(64, 64)],
            decoder: vec![
                BlockConfig::new(64, 32, 2),
                BlockConfig::new(32, 16, 2),
                BlockConfig::new(16, 16, 2),
                BlockConfig::new(16, 16, 1),
            ],
            decoder_mixers: vec![MixerConfig::new(16, 16), MixerConfig::new(16, 1)],
        }
    }
}

/// Name and shape of one trainable tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// `fan_in * support` used for the initialization bound
    pub fan: usize,
}

impl ModelConfig {
    /// Same block layout with every hidden width replaced by `channels` and a
    /// shorter time axis; used for finite-difference checks and quick runs.
    pub fn narrow(channels: usize, time_len: usize) -> Self {
        let mut c = Self {
            time_len,
            ..Self::default()
        };
        for (k, b) in c.encoder.iter_mut().enumerate() {
            b.in_channels = if k == 0 { 1 } else { channels };
            b.out_channels = channels;
        }
        for m in &mut c.encoder_mixers {
            m.in_channels = channels;
            m.out_channels = channels;
        }
        for b in &mut c.decoder {
            b.in_channels = channels;
            b.out_channels = channels;
        }
        let n = c.decoder_mixers.len();
        for (k, m) in c.decoder_mixers.iter_mut().enumerate() {
            m.in_channels = channels;
            m.out_channels = if k + 1 == n { 1 } else { channels };
        }
        c
    }

    pub fn latent_channels(&self) -> usize {
        self.encoder_mixers
            .last()
            .map(|m| m.out_channels)
            .or_else(|| self.encoder.last().map(|b| b.out_channels))
            .unwrap_or(1)
    }

    /// Time lengths after each encoder block; the last is the latent length.
    pub fn encoder_lengths(&self) -> Result<Vec<usize>, NetworkError> {
        let mut lens = vec![self.time_len];
        for (k, b) in self.encoder.iter().enumerate() {
            let len = conv_output_len(*lens.last().unwrap(), b.width, b.stride, b.padding)
                .filter(|&l| l > 0)
                .ok_or_else(|| NetworkError::InvalidConfig(format!("encoder block {k} does not fit the time axis")))?;
            lens.push(len);
        }
        Ok(lens)
    }

    /// Time lengths entering each decoder block followed by the output length,
    /// derived backwards from `time_len` so every transposed convolution
    /// lands exactly.
    pub fn decoder_lengths(&self) -> Result<Vec<usize>, NetworkError> {
        let mut lens = vec![self.time_len];
        for (k, b) in self.decoder.iter().enumerate().rev() {
            let len = conv_output_len(lens[0], b.width, b.stride, b.padding)
                .filter(|&l| l > 0)
                .ok_or_else(|| NetworkError::InvalidConfig(format!("decoder block {k} does not fit the time axis")))?;
            lens.insert(0, len);
        }
        Ok(lens)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::InvalidConfig(m));
        if self.time_len == 0 {
            return bad("time_len must be positive".into());
        }
        self.spline.validate()?;
        self.inverse_spline.validate()?;
        if self.encoder.is_empty() || self.decoder.is_empty() {
            return bad("encoder and decoder need at least one block".into());
        }
        for (k, b) in self.encoder.iter().chain(&self.decoder).enumerate() {
            if b.in_channels == 0 || b.out_channels == 0 || b.stride == 0 || b.width == 0 {
                return bad(format!("block {k} has a zero channel count, width or stride"));
            }
        }
        for m in self.encoder_mixers.iter().chain(&self.decoder_mixers) {
            if m.in_channels == 0 || m.out_channels == 0 || m.width % 2 == 0 {
                return bad("mixers need positive channels and an odd width".into());
            }
        }
        let mut ch = 1;
        for (k, b) in self.encoder.iter().enumerate() {
            if b.in_channels != ch {
                return bad(format!("encoder block {k} expects {} channels, receives {ch}", b.in_channels));
            }
            ch = b.out_channels;
        }
        for (k, m) in self.encoder_mixers.iter().enumerate() {
            if m.in_channels != ch {
                return bad(format!("encoder mixer {k} expects {} channels, receives {ch}", m.in_channels));
            }
            ch = m.out_channels;
        }
        for (k, b) in self.decoder.iter().enumerate() {
            if b.in_channels != ch {
                return bad(format!("decoder block {k} expects {} channels, receives {ch}", b.in_channels));
            }
            ch = b.out_channels;
        }
        for (k, m) in self.decoder_mixers.iter().enumerate() {
            if m.in_channels != ch {
                return bad(format!("decoder mixer {k} expects {} channels, receives {ch}", m.in_channels));
            }
            ch = m.out_channels;
        }
        if ch != 1 {
            return bad(format!("decoder must end with one channel, ends with {ch}"));
        }
        let latent = *self.encoder_lengths()?.last().unwrap();
        let dec_in = self.decoder_lengths()?[0];
        if latent != dec_in {
            return bad(format!("encoder latent length {latent} differs from decoder input length {dec_in}"));
        }
        Ok(())
    }

    /// Every trainable tensor in a fixed order; depends on nothing but the config.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let spec = |name: String, shape: Vec<usize>, fan: usize| ParamSpec { name, shape, fan };
        let k = self.spline.num_bases();
        let support = self.spline.support();
        let mut out = Vec::new();
        for (prefix, blocks) in [("enc", &self.encoder), ("dec", &self.decoder)] {
            for (i, b) in blocks.iter().enumerate() {
                let (ci, co) = (b.in_channels, b.out_channels);
                out.push(spec(format!("{prefix}.block{i}.spline"), vec![k, ci, co], ci * support));
                out.push(spec(format!("{prefix}.block{i}.residual"), vec![co, ci, 1], ci));
                out.push(spec(format!("{prefix}.block{i}.temporal"), vec![co, co, b.width], co * b.width));
            }
            if prefix == "enc" {
                for (i, m) in self.encoder_mixers.iter().enumerate() {
                    out.push(spec(
                        format!("enc.mixer{i}"),
                        vec![m.out_channels, m.in_channels, m.width],
                        m.in_channels * m.width,
                    ));
                }
                let c = self.latent_channels();
                out.push(spec(
                    "inv.spline".into(),
                    vec![self.inverse_spline.num_bases(), c, c],
                    c * self.inverse_spline.support(),
                ));
            }
        }
        for (i, m) in self.decoder_mixers.iter().enumerate() {
            out.push(spec(
                format!("dec.mixer{i}"),
                vec![m.out_channels, m.in_channels, m.width],
                m.in_channels * m.width,
            ));
        }
        out
    }
}
