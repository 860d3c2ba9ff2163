use std::sync::Arc;

use ndarray::ArrayD;

use super::{BlockConfig, GeometryBundle, MixerConfig, ModelConfig, ModelParams, NetworkError};
use crate::diff::{Tape, Var};
use crate::mesh::PoolingMap;
use crate::spline::EdgeBasis;
use crate::Scalar;

/// Tape handles for one block's three kernels.
#[derive(Debug, Clone, Copy)]
pub struct BlockVars {
    pub spline: Var,
    pub residual: Var,
    pub temporal: Var,
}

/// What happens around the spatial convolution of a block.
#[derive(Debug, Clone, Copy)]
pub enum Stage<'a> {
    /// Strided temporal convolution, then optional pooling.
    Encode { pool: Option<&'a Arc<PoolingMap>> },
    /// Optional unpooling first, then a transposed temporal convolution to `out_len`.
    Decode {
        unpool: Option<&'a Arc<PoolingMap>>,
        out_len: usize,
    },
}

/// One spatial-temporal block on the graph described by `basis`:
/// `elu(spline_conv(x) + residual(x))` followed by the temporal convolution.
pub fn st_gcnn_block<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    config: &BlockConfig,
    stage: Stage<'_>,
    basis: &Arc<EdgeBasis<T>>,
    vars: BlockVars,
) -> Result<Var, NetworkError> {
    let x = match stage {
        Stage::Decode { unpool: Some(map), .. } => tape.unpool(x, map)?,
        _ => x,
    };
    let found = tape.shape(x)[0];
    if found != basis.num_sources {
        return Err(NetworkError::NodeMismatch {
            stage: "block input".into(),
            expected: basis.num_sources,
            found,
        });
    }
    let spatial = tape.spline_conv(basis, x, vars.spline)?;
    let skip = tape.temporal_conv(x, vars.residual, 1, 0)?;
    let h = tape.add(spatial, skip)?;
    let h = tape.elu(h);
    Ok(match stage {
        Stage::Encode { pool } => {
            let h = tape.temporal_conv(h, vars.temporal, config.stride, config.padding)?;
            match pool {
                Some(map) => tape.pool(h, map)?,
                None => h,
            }
        }
        Stage::Decode { out_len, .. } => {
            tape.temporal_conv_transpose(h, vars.temporal, config.stride, config.padding, out_len)?
        }
    })
}

fn mixers<T: Scalar>(
    tape: &mut Tape<T>,
    mut h: Var,
    configs: &[MixerConfig],
    params: &mut std::slice::Iter<'_, Var>,
) -> Result<Var, NetworkError> {
    for (k, m) in configs.iter().enumerate() {
        if k > 0 {
            h = tape.elu(h);
        }
        h = tape.temporal_conv(h, *params.next().expect("mixer parameter"), 1, m.padding())?;
    }
    Ok(h)
}

/// Parameters registered on a tape, in [`ModelConfig::param_specs`] order.
#[derive(Debug, Clone)]
pub struct BoundParams(pub Vec<Var>);

impl BoundParams {
    fn block(it: &mut std::slice::Iter<'_, Var>) -> BlockVars {
        let mut next = || *it.next().expect("block parameter");
        BlockVars {
            spline: next(),
            residual: next(),
            temporal: next(),
        }
    }
}

/// Encoder, bipartite inverse map and decoder with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    config: ModelConfig,
    params: ModelParams<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, NetworkError> {
        config.validate()?;
        let params = ModelParams::init(&config, seed);
        Ok(Self { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ModelParams<T>) -> Result<Self, NetworkError> {
        config.validate()?;
        let params = ModelParams::from_named(&config, params.tensors().to_vec())?;
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams<T> {
        &mut self.params
    }

    /// Puts every parameter on `tape`, as differentiable leaves when `trainable`.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> BoundParams {
        BoundParams(
            self.params
                .tensors()
                .iter()
                .map(|(_, t)| if trainable { tape.leaf(t.clone()) } else { tape.constant(t.clone()) })
                .collect(),
        )
    }

    fn check_input(&self, tape: &Tape<T>, y: Var, nodes: usize, stage: &str) -> Result<(), NetworkError> {
        let shape = tape.shape(y);
        if shape.len() != 3 || shape[0] != nodes {
            return Err(NetworkError::NodeMismatch {
                stage: stage.into(),
                expected: nodes,
                found: shape.first().copied().unwrap_or(0),
            });
        }
        Ok(())
    }

    /// Torso signals `(torso vertices, 1, T)` to the torso latent level.
    pub fn encode(
        &self,
        tape: &mut Tape<T>,
        params: &BoundParams,
        geometry: &GeometryBundle<T>,
        y: Var,
    ) -> Result<Var, NetworkError> {
        self.check_input(tape, y, geometry.num_torso_vertices(), "encoder input")?;
        let mut it = params.0.iter();
        let mut h = y;
        for (k, block) in self.config.encoder.iter().enumerate() {
            let vars = BoundParams::block(&mut it);
            let stage = Stage::Encode {
                pool: Some(&geometry.torso_pools[k]),
            };
            h = st_gcnn_block(tape, h, block, stage, &geometry.torso_bases[k], vars)?;
        }
        mixers(tape, h, &self.config.encoder_mixers, &mut it)
    }

    /// Bipartite spline map from the torso latent level to the heart latent level.
    pub fn inverse_map(
        &self,
        tape: &mut Tape<T>,
        params: &BoundParams,
        geometry: &GeometryBundle<T>,
        z_torso: Var,
    ) -> Result<Var, NetworkError> {
        let idx = self.config.encoder.len() * 3 + self.config.encoder_mixers.len();
        self.check_input(tape, z_torso, geometry.bipartite.num_sources, "inverse map input")?;
        Ok(tape.bipartite_spline_conv(&geometry.bipartite, z_torso, params.0[idx])?)
    }

    /// Heart latent level to `(heart vertices, 1, T)`.
    pub fn decode(
        &self,
        tape: &mut Tape<T>,
        params: &BoundParams,
        geometry: &GeometryBundle<T>,
        z_heart: Var,
    ) -> Result<Var, NetworkError> {
        let levels = self.config.decoder.len();
        self.check_input(tape, z_heart, geometry.heart_bases[levels].num_targets, "decoder input")?;
        let lens = self.config.decoder_lengths()?;
        let start = self.config.encoder.len() * 3 + self.config.encoder_mixers.len() + 1;
        let mut it = params.0[start..].iter();
        let mut h = z_heart;
        for (k, block) in self.config.decoder.iter().enumerate() {
            let fine = levels - k - 1;
            let vars = BoundParams::block(&mut it);
            let stage = Stage::Decode {
                unpool: Some(&geometry.heart_pools[fine]),
                out_len: lens[k + 1],
            };
            h = st_gcnn_block(tape, h, block, stage, &geometry.heart_bases[fine], vars)?;
        }
        let out = mixers(tape, h, &self.config.decoder_mixers, &mut it)?;
        self.check_input(tape, out, geometry.num_heart_vertices(), "decoder output")?;
        Ok(out)
    }

    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        params: &BoundParams,
        geometry: &GeometryBundle<T>,
        y: Var,
    ) -> Result<Var, NetworkError> {
        let z_torso = self.encode(tape, params, geometry, y)?;
        let z_heart = self.inverse_map(tape, params, geometry, z_torso)?;
        self.decode(tape, params, geometry, z_heart)
    }

    /// Reconstruction without gradient bookkeeping.
    pub fn predict(&self, geometry: &GeometryBundle<T>, y: &ArrayD<T>) -> Result<ArrayD<T>, NetworkError> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, false);
        let y = tape.constant(y.clone());
        let x = self.forward(&mut tape, &params, geometry, y)?;
        Ok(tape.value(x).clone())
    }

    /// Element-mean squared error of one sample and its gradient for every parameter.
    pub fn loss_and_gradients(
        &self,
        geometry: &GeometryBundle<T>,
        y: &ArrayD<T>,
        x: &ArrayD<T>,
    ) -> Result<(T, Vec<ArrayD<T>>), NetworkError> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape, true);
        let y = tape.constant(y.clone());
        let x_hat = self.forward(&mut tape, &params, geometry, y)?;
        let loss = tape.mse_loss(x_hat, x)?;
        let grads = tape.backward(loss)?;
        let value = tape.value(loss).iter().next().copied().unwrap_or_else(T::zero);
        let g = params
            .0
            .iter()
            .zip(self.params.tensors())
            .map(|(&v, (_, t))| grads.get_or_zeros(v, t.shape()))
            .collect();
        Ok((value, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::gradcheck::{check_gradients, random_projection};
    use crate::mesh::{build_bipartite, shapes, GeometryGraph, MeshHierarchy};
    use crate::network::toy_geometry;
    use crate::spline::{spline_weight, SplineKernel};
    use ndarray::Axis;

    fn tape_run(model: &Model<f64>, geo: &GeometryBundle<f64>, y: &ArrayD<f64>) -> ArrayD<f64> {
        model.predict(geo, y).unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let config = ModelConfig::narrow(3, 8);
        let geo = toy_geometry::<f64>(&config).unwrap();
        let model = Model::from_params(config.clone(), ModelParams::zeros(&config)).unwrap();
        let y = random_projection(&[12, 1, 8], 1);
        assert!(tape_run(&model, &geo, &y).iter().all(|&v| v == 0.0));
        let zero = ArrayD::zeros(vec![12, 1, 8]);
        let mut tape = Tape::new();
        let p = model.bind(&mut tape, false);
        let yv = tape.constant(zero);
        let z = model.encode(&mut tape, &p, &geo, yv).unwrap();
        assert!(tape.value(z).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_block_is_elu_of_input_combination() {
        let coords = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let graph = GeometryGraph::from_edges(&coords, &[]);
        let shape = crate::spline::SplineShape::default();
        let basis = Arc::new(EdgeBasis::for_graph(&graph, shape).unwrap());
        let block = BlockConfig {
            in_channels: 2,
            out_channels: 2,
            width: 1,
            stride: 1,
            padding: 0,
        };
        let eye = ndarray::Array2::<f64>::eye(2);
        let mut spline = ArrayD::zeros(vec![125, 2, 2]);
        for mut s in spline.axis_iter_mut(Axis(0)) {
            s.assign(&eye);
        }
        let unit = eye.clone().insert_axis(Axis(2)).into_dyn();
        let x = random_projection::<f64>(&[3, 2, 6], 2);
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let vars = BlockVars {
            spline: tape.constant(spline),
            residual: tape.constant(unit.clone()),
            temporal: tape.constant(unit),
        };
        let y = st_gcnn_block(&mut tape, xv, &block, Stage::Encode { pool: None }, &basis, vars).unwrap();
        let want = x.mapv(|v| crate::diff::elu_scalar(2.0 * v));
        for (a, b) in tape.value(y).iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn shape_contract_of_default_config() {
        let config = ModelConfig::default();
        let heart = shapes::geodesic_sphere(3).scaled([1.0, 0.8, 1.2]);
        let torso = shapes::uv_sphere(9, 16).scaled([3.0, 2.0, 4.0]);
        let geo =
            GeometryBundle::<f64>::build(&heart, &[64, 40, 24, 12], &torso, &[80, 40, 20], &config).unwrap();
        let model = Model::<f64>::new(config, 7).unwrap();
        let y = random_projection(&[146, 1, 60], 3);
        let mut tape = Tape::new();
        let p = model.bind(&mut tape, false);
        let yv = tape.constant(y);
        let zb = model.encode(&mut tape, &p, &geo, yv).unwrap();
        assert_eq!(tape.shape(zb), &[20, 64, 8]);
        let zh = model.inverse_map(&mut tape, &p, &geo, zb).unwrap();
        assert_eq!(tape.shape(zh), &[12, 64, 8]);
        let x = model.decode(&mut tape, &p, &geo, zh).unwrap();
        assert_eq!(tape.shape(x), &[92, 1, 60]);
        assert!(tape.value(x).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn encoder_is_continuous_in_its_input() {
        let config = ModelConfig::narrow(3, 8);
        let geo = toy_geometry::<f64>(&config).unwrap();
        let model = Model::<f64>::new(config, 5).unwrap();
        let y = random_projection::<f64>(&[12, 1, 8], 4);
        let d = random_projection::<f64>(&[12, 1, 8], 5);
        let encode = |y: &ArrayD<f64>| {
            let mut tape = Tape::new();
            let p = model.bind(&mut tape, false);
            let yv = tape.constant(y.clone());
            let z = model.encode(&mut tape, &p, &geo, yv).unwrap();
            tape.value(z).clone()
        };
        let base = encode(&y);
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6] {
            let diff = (&encode(&(&y + &(&d * eps))) - &base).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
            assert!(diff < prev && diff < 10.0 * eps, "{eps}: {diff}");
            prev = diff;
        }
    }

    #[test]
    fn inverse_map_linear_and_matches_dense_oracle() {
        let config = ModelConfig::narrow(2, 8);
        let geo = toy_geometry::<f64>(&config).unwrap();
        let model = Model::<f64>::new(config.clone(), 9).unwrap();
        let run = |z: &ArrayD<f64>| {
            let mut tape = Tape::new();
            let p = model.bind(&mut tape, false);
            let zv = tape.constant(z.clone());
            let out = model.inverse_map(&mut tape, &p, &geo, zv).unwrap();
            tape.value(out).clone()
        };
        let z1 = random_projection::<f64>(&[6, 2, 1], 10);
        let z2 = random_projection::<f64>(&[6, 2, 1], 11);
        let lhs = run(&(&z1 * 2.0 - &z2 * 0.5));
        let rhs = run(&z1) * 2.0 - run(&z2) * 0.5;
        assert!(lhs.iter().zip(rhs.iter()).all(|(a, b)| (a - b).abs() < 1e-12));

        // dense oracle: evaluate the kernel on every heart/torso latent pair
        let torso = geo.torso().coarsest().vertices();
        let heart = geo.heart().coarsest().vertices();
        let kernel = SplineKernel {
            shape: config.inverse_spline,
            weights: model.params().get("inv.spline").unwrap().clone(),
        };
        let got = run(&z1);
        for (i, &h) in heart.iter().enumerate() {
            let mut want = [0.0; 2];
            for (j, &t) in torso.iter().enumerate() {
                let g = spline_weight(crate::mesh::edge_attribute(h, t), &kernel).unwrap();
                for o in 0..2 {
                    want[o] += (0..2).map(|c| z1[[j, c, 0]] * g[[c, o]]).sum::<f64>();
                }
            }
            for o in 0..2 {
                assert!((got[[i, o, 0]] - want[o]).abs() < 1e-12);
            }
        }
        assert_eq!(build_bipartite(torso, heart).edges.len(), 24);
    }

    #[test]
    fn decoder_gradients() {
        let config = ModelConfig::narrow(2, 8);
        let geo = toy_geometry::<f64>(&config).unwrap();
        let model = Model::<f64>::new(config, 12).unwrap();
        let z = random_projection::<f64>(&[4, 2, 1], 13);
        let r = random_projection::<f64>(&[12, 1, 8], 14);
        let start = 3 * 3 + 2 + 1;
        let mut inputs = vec![z];
        inputs.extend(model.params().tensors()[start..].iter().map(|(_, t)| t.clone()));
        let reports = check_gradients(&inputs, 1e-5, |tape, v| {
            let mut all = model.bind(tape, false).0;
            all[start..].copy_from_slice(&v[1..]);
            let x = model.decode(tape, &BoundParams(all), &geo, v[0]).map_err(into_diff)?;
            tape.project(x, &r)
        })
        .unwrap();
        for rep in reports {
            assert!(rep.max_rel_error < 1e-4, "{rep:?}");
        }
    }

    fn into_diff(e: NetworkError) -> crate::diff::DiffError {
        match e {
            NetworkError::Diff(d) => d,
            other => panic!("{other}"),
        }
    }

    #[test]
    fn end_to_end_gradients_and_directional_derivative() {
        let config = ModelConfig::narrow(2, 8);
        let geo = toy_geometry::<f64>(&config).unwrap();
        let model = Model::<f64>::new(config, 15).unwrap();
        let y = random_projection::<f64>(&[12, 1, 8], 16);
        let x = random_projection::<f64>(&[12, 1, 8], 17).mapv(f64::abs);
        let inputs: Vec<_> = model.params().tensors().iter().map(|(_, t)| t.clone()).collect();
        let reports = check_gradients(&inputs, 1e-5, |tape, v| {
            let yv = tape.constant(y.clone());
            let out = model.forward(tape, &BoundParams(v.to_vec()), &geo, yv).map_err(into_diff)?;
            tape.mse_loss(out, &x)
        })
        .unwrap();
        for rep in &reports {
            assert!(rep.max_rel_error < 1e-4, "{rep:?}");
        }

        // <grad, d> against a directional central difference
        let (_, grads) = model.loss_and_gradients(&geo, &y, &x).unwrap();
        let dirs: Vec<ArrayD<f64>> =
            inputs.iter().enumerate().map(|(k, t)| random_projection(t.shape(), 100 + k as u64)).collect();
        let inner: f64 = grads.iter().zip(&dirs).map(|(g, d)| (g * d).sum()).sum();
        let h = 1e-5;
        let loss_at = |s: f64| {
            let mut m = model.clone();
            for (p, d) in m.params_mut().values_mut().zip(&dirs) {
                p.scaled_add(s, d);
            }
            m.loss_and_gradients(&geo, &y, &x).unwrap().0
        };
        let fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        assert!((inner - fd).abs() / fd.abs().max(1.0) < 1e-4, "{inner} vs {fd}");
    }

    #[test]
    fn same_parameters_run_on_another_geometry() {
        let config = ModelConfig::narrow(3, 8);
        let model = Model::<f64>::new(config.clone(), 18).unwrap();
        let a = toy_geometry::<f64>(&config).unwrap();
        let heart = shapes::geodesic_sphere(1).jittered(0.02, 9);
        let torso = shapes::geodesic_sphere(2).scaled([3.0, 3.0, 3.0]);
        let b = GeometryBundle::<f64>::build(&heart, &[10, 8, 6, 4], &torso, &[30, 20, 10], &config).unwrap();
        assert_ne!(a.hash(), b.hash());
        let out = model.predict(&b, &random_projection(&[42, 1, 8], 19)).unwrap();
        assert_eq!(out.shape(), &[12, 1, 8]);
        assert!(out.iter().all(|v| v.is_finite()));
        let specs = |c: &ModelConfig| c.param_specs().into_iter().map(|s| s.shape).collect::<Vec<_>>();
        assert_eq!(specs(&config), model.params().tensors().iter().map(|(_, t)| t.shape().to_vec()).collect::<Vec<_>>());
        let y = random_projection(&[12, 1, 8], 20);
        assert_eq!(model.predict(&a, &y).unwrap(), model.predict(&a, &y).unwrap());
    }

    #[test]
    fn hierarchy_depth_must_match_blocks() {
        let config = ModelConfig::narrow(2, 8);
        let mesh = shapes::icosahedron();
        let shallow = MeshHierarchy::build(&mesh, &[8]).unwrap();
        let err = GeometryBundle::<f64>::new(shallow.clone(), shallow, &config).unwrap_err();
        assert!(matches!(err, NetworkError::HierarchyMismatch { .. }));
    }
}
