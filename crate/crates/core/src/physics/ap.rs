use ndarray::{Array3, ArrayD};
use serde::{Deserialize, Serialize};

use super::{PhysicsError, ScarMap};
use crate::mesh::TriMesh;

/// Aliev-Panfilov constants plus the explicit-Euler discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct APParams {
    pub k: f64,
    pub a: f64,
    pub e0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub diffusion: f64,
    pub dt: f64,
    pub substeps: usize,
}

impl Default for APParams {
    fn default() -> Self {
        Self {
            k: 8.0,
            a: 0.15,
            e0: 0.002,
            mu1: 0.2,
            mu2: 0.3,
            diffusion: 0.2,
            dt: 0.05,
            substeps: 20,
        }
    }
}

impl APParams {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let values = [self.k, self.a, self.e0, self.mu1, self.mu2, self.diffusion, self.dt];
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) || self.dt == 0.0 || self.mu2 == 0.0 {
            return Err(PhysicsError::InvalidParams(format!("{self:?}")));
        }
        if self.substeps == 0 {
            return Err(PhysicsError::InvalidParams("substeps must be at least 1".into()));
        }
        Ok(())
    }

    /// Right-hand side of the local kinetics at one vertex, excluding diffusion.
    fn kinetics(&self, u: f64, v: f64) -> (f64, f64) {
        let eps = self.e0 + self.mu1 * v / (u + self.mu2);
        let du = self.k * u * (1.0 - u) * (u - self.a) - u * v;
        let dv = eps * (-v - self.k * u * (u - self.a - 1.0));
        (du, dv)
    }
}

/// Combinatorial graph Laplacian `L = D - A` stored as adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    neighbors: Vec<Vec<usize>>,
}

impl Laplacian {
    pub fn from_edges(num_vertices: usize, edges: &[[usize; 2]]) -> Result<Self, PhysicsError> {
        let mut neighbors = vec![Vec::new(); num_vertices];
        for &[a, b] in edges {
            for v in [a, b] {
                if v >= num_vertices {
                    return Err(PhysicsError::VertexOutOfRange { vertex: v, num_vertices });
                }
            }
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        Ok(Self { neighbors })
    }

    pub fn for_mesh(mesh: &TriMesh) -> Self {
        Self::from_edges(mesh.num_vertices(), &mesh.edges()).expect("mesh edges are in range")
    }

    pub fn num_vertices(&self) -> usize {
        self.neighbors.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    /// `(L x)_i = deg(i) x_i - sum_{j ~ i} x_j`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, nb) in self.neighbors.iter().enumerate() {
            out[i] = nb.len() as f64 * x[i] - nb.iter().map(|&j| x[j]).sum::<f64>();
        }
    }

    pub fn dense(&self) -> ndarray::Array2<f64> {
        let n = self.num_vertices();
        let mut l = ndarray::Array2::zeros((n, n));
        for (i, nb) in self.neighbors.iter().enumerate() {
            l[[i, i]] = nb.len() as f64;
            for &j in nb {
                l[[i, j]] = -1.0;
            }
        }
        l
    }
}

/// Simulates `frames` saved frames of the normalized potential `u` on `mesh`.
///
/// Frame 0 is the initial condition, `u = 1` at `origin` and rest elsewhere;
/// each later frame follows `substeps` Euler steps. Output shape `(V, 1, frames)`.
pub fn simulate_ap(
    mesh: &TriMesh,
    origin: Option<usize>,
    scar: &ScarMap,
    params: &APParams,
    frames: usize,
) -> Result<ArrayD<f64>, PhysicsError> {
    simulate_ap_graph(&Laplacian::for_mesh(mesh), origin, scar, params, frames)
}

pub fn simulate_ap_graph(
    laplacian: &Laplacian,
    origin: Option<usize>,
    scar: &ScarMap,
    params: &APParams,
    frames: usize,
) -> Result<ArrayD<f64>, PhysicsError> {
    params.validate()?;
    let n = laplacian.num_vertices();
    if let Some(&v) = scar.vertices().iter().find(|&&v| v >= n) {
        return Err(PhysicsError::VertexOutOfRange { vertex: v, num_vertices: n });
    }
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    if let Some(o) = origin {
        if o >= n {
            return Err(PhysicsError::VertexOutOfRange { vertex: o, num_vertices: n });
        }
        if scar.contains(o) {
            return Err(PhysicsError::OriginInScar { origin: o });
        }
        u[o] = 1.0;
    }
    let scarred: Vec<bool> = (0..n).map(|i| scar.contains(i)).collect();
    let mut lu = vec![0.0; n];
    let mut out = Array3::zeros((n, 1, frames));
    let mut step = 0;
    for frame in 0..frames {
        if frame > 0 {
            for _ in 0..params.substeps {
                laplacian.apply(&u, &mut lu);
                for i in 0..n {
                    if scarred[i] {
                        continue;
                    }
                    let (fu, fv) = params.kinetics(u[i], v[i]);
                    let du = params.dt * (fu - params.diffusion * lu[i]);
                    let next = u[i] + du;
                    if !next.is_finite() || du.abs() >= 0.5 {
                        return Err(PhysicsError::Unstable {
                            step,
                            vertex: i,
                            value: next,
                            params: format!("{params:?}"),
                        });
                    }
                    u[i] = next;
                    v[i] += params.dt * fv;
                }
                step += 1;
            }
        }
        for i in 0..n {
            out[[i, 0, frame]] = u[i];
        }
    }
    Ok(out.into_dyn())
}

/// Isolated-cell trace of `u` from `u(0) = 1`, sampled like [`simulate_ap`].
pub fn single_cell_trace(params: &APParams, frames: usize) -> Result<Vec<f64>, PhysicsError> {
    let lap = Laplacian::from_edges(1, &[])?;
    let x = simulate_ap_graph(&lap, Some(0), &ScarMap::empty(), params, frames)?;
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    /// Frames with `u >= 0.5`.
    fn plateau(trace: &[f64]) -> usize {
        trace.iter().filter(|&&u| u >= 0.5).count()
    }

    /// Independent integration of one cell with the textbook update written out.
    fn reference_cell(frames: usize) -> Vec<f64> {
        let (k, a, e0, mu1, mu2) = (8.0, 0.15, 0.002, 0.2, 0.3);
        let (dt, sub) = (0.05, 20);
        let (mut u, mut v) = (1.0f64, 0.0f64);
        let mut trace = vec![u];
        for _ in 1..frames {
            for _ in 0..sub {
                let eps = e0 + mu1 * v / (u + mu2);
                let du = k * u * (1.0 - u) * (u - a) - u * v;
                let dv = eps * (-v - k * u * (u - a - 1.0));
                u += dt * du;
                v += dt * dv;
            }
            trace.push(u);
        }
        trace
    }

    #[test]
    fn laplacian_examples() {
        let two = Laplacian::from_edges(2, &[[0, 1]]).unwrap();
        assert_eq!(two.dense(), ndarray::array![[1.0, -1.0], [-1.0, 1.0]]);
        let ico = Laplacian::for_mesh(&shapes::icosahedron());
        let l = ico.dense();
        assert!((0..12).all(|i| l[[i, i]] == 5.0));
        let mut out = vec![0.0; 12];
        ico.apply(&[2.5; 12], &mut out);
        assert!(out.iter().all(|&x| x == 0.0));
        assert!(l.rows().into_iter().all(|r| r.sum() == 0.0));
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let mesh = shapes::geodesic_sphere(2);
        let x = simulate_ap(&mesh, None, &ScarMap::empty(), &APParams::default(), 30).unwrap();
        assert!(x.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn single_cell_matches_reference() {
        let ours = single_cell_trace(&APParams::default(), 60).unwrap();
        let reference = reference_cell(60);
        for (a, b) in ours.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(reference.iter().cloned().fold(0.0, f64::max) > 0.9);
        assert!(*reference.last().unwrap() < 0.1);
    }

    #[test]
    fn two_vertex_cycle_matches_single_cell_plateau() {
        let lap = Laplacian::from_edges(2, &[[0, 1]]).unwrap();
        let x = simulate_ap_graph(&lap, Some(0), &ScarMap::empty(), &APParams::default(), 60).unwrap();
        let trace: Vec<f64> = (0..60).map(|t| x[[0, 0, t]]).collect();
        let peak = trace.iter().cloned().fold(0.0, f64::max);
        assert!(peak > 0.9);
        let peak_at = trace.iter().position(|&u| u == peak).unwrap();
        assert!(trace[peak_at..].iter().any(|&u| u < 0.1));
        let reference = reference_cell(60);
        let diff = plateau(&trace) as i64 - plateau(&reference) as i64;
        assert!(diff.abs() <= 2, "plateau {} vs {}", plateau(&trace), plateau(&reference));
    }

    #[test]
    fn scar_stays_at_rest_and_origin_checked() {
        let mesh = shapes::geodesic_sphere(3);
        let scar = ScarMap::geodesic_ball(&mesh, 50, 0.5).unwrap();
        assert!(!scar.is_empty());
        let x = simulate_ap(&mesh, Some(0), &scar, &APParams::default(), 40).unwrap();
        for &s in scar.vertices() {
            assert!((0..40).all(|t| x[[s, 0, t]] == 0.0));
        }
        assert!(matches!(
            simulate_ap(&mesh, Some(50), &scar, &APParams::default(), 5),
            Err(PhysicsError::OriginInScar { origin: 50 })
        ));
    }

    #[test]
    fn activation_time_monotone_along_path() {
        let n = 12;
        let edges: Vec<[usize; 2]> = (0..n - 1).map(|i| [i, i + 1]).collect();
        let lap = Laplacian::from_edges(n, &edges).unwrap();
        let params = APParams { diffusion: 1.0, ..APParams::default() };
        let x = simulate_ap_graph(&lap, Some(0), &ScarMap::empty(), &params, 60).unwrap();
        let times: Vec<usize> = (0..n)
            .map(|i| (0..60).find(|&t| x[[i, 0, t]] >= 0.5).unwrap_or(usize::MAX))
            .collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]), "{times:?}");
        assert!(times[n - 1] < usize::MAX);
    }

    #[test]
    fn heart_sphere_activates_and_recovers() {
        let mesh = shapes::geodesic_sphere(3);
        let x = simulate_ap(&mesh, Some(0), &ScarMap::empty(), &APParams::default(), 60).unwrap();
        for i in 0..mesh.num_vertices() {
            let trace: Vec<f64> = (0..60).map(|t| x[[i, 0, t]]).collect();
            assert!(trace.iter().any(|&u| u > 0.9), "vertex {i} never activates");
            assert!(trace[59] < 0.1);
        }
    }

    #[test]
    fn instability_is_reported() {
        let lap = Laplacian::from_edges(2, &[[0, 1]]).unwrap();
        let params = APParams { dt: 5.0, ..APParams::default() };
        let err = simulate_ap_graph(&lap, Some(0), &ScarMap::empty(), &params, 3).unwrap_err();
        assert!(matches!(err, PhysicsError::Unstable { .. }));
    }
}
