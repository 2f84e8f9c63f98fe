//! Uniform vertex grids in one or two dimensions, flux-form operators with
//! face coefficients, and a preconditioned conjugate gradient solver.

use serde::Serialize;

use crate::error::{Error, Result};

/// Sub-samples per axis used to average coefficients over a dual cell.
const SUBSAMPLES: usize = 4;

/// Relative floor for face coefficients of the assembled operator.
pub const FACE_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub dim: usize,
    /// Intervals per axis; there are n + 1 nodes per axis.
    pub n: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub h: [f64; 2],
}

impl Grid {
    pub fn new(dim: usize, n: usize, lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!(
                "dimension {dim} must be 1 or 2"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!("grid with {n} intervals")));
        }
        for a in 0..dim {
            if !(hi[a] > lo[a]) {
                return Err(Error::InvalidParameter(format!("empty box on axis {a}")));
            }
        }
        let mut h = [1.0; 2];
        for a in 0..dim {
            h[a] = (hi[a] - lo[a]) / n as f64;
        }
        Ok(Grid { dim, n, lo, hi, h })
    }

    /// The box [c − s, c + s]^dim.
    pub fn square(dim: usize, n: usize, center: [f64; 2], half: f64) -> Result<Self> {
        Grid::new(
            dim,
            n,
            [center[0] - half, center[1] - half],
            [center[0] + half, center[1] + half],
        )
    }

    pub fn per_axis(&self) -> usize {
        self.n + 1
    }

    pub fn len(&self) -> usize {
        self.per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element h^dim.
    pub fn volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.per_axis() + i
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.per_axis(), idx / self.per_axis())
    }

    pub fn coord(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.ij(idx);
        let x = self.lo[0] + i as f64 * self.h[0];
        let y = if self.dim == 2 {
            self.lo[1] + j as f64 * self.h[1]
        } else {
            0.0
        };
        [x, y]
    }

    pub fn on_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.ij(idx);
        i == 0 || i == self.n || (self.dim == 2 && (j == 0 || j == self.n))
    }

    pub fn distance(&self, idx: usize, center: [f64; 2]) -> f64 {
        let p = self.coord(idx);
        let dx = p[0] - center[0];
        let dy = if self.dim == 2 { p[1] - center[1] } else { 0.0 };
        dx.hypot(dy)
    }

    /// Nodes within distance `radius` of `center`.
    pub fn ball_mask(&self, center: [f64; 2], radius: f64) -> Vec<bool> {
        (0..self.len())
            .map(|i| self.distance(i, center) < radius)
            .collect()
    }

    pub fn contains_ball(&self, center: [f64; 2], radius: f64) -> bool {
        (0..self.dim).all(|a| {
            center[a] - radius >= self.lo[a] - 1e-12 && center[a] + radius <= self.hi[a] + 1e-12
        })
    }

    /// Average of `f` over the dual cell of node `idx`, clipped to the box,
    /// together with the clipped cell volume.
    fn cell_average(&self, idx: usize, f: &impl Fn([f64; 2]) -> f64) -> (f64, f64) {
        let c = self.coord(idx);
        let mut ranges = [(0.0, 0.0); 2];
        for a in 0..2 {
            if a < self.dim {
                let lo = (c[a] - 0.5 * self.h[a]).max(self.lo[a]);
                let hi = (c[a] + 0.5 * self.h[a]).min(self.hi[a]);
                ranges[a] = (lo, hi);
            } else {
                ranges[a] = (0.0, 0.0);
            }
        }
        let ny = if self.dim == 2 { SUBSAMPLES } else { 1 };
        let mut acc = 0.0;
        for sy in 0..ny {
            let y = if self.dim == 2 {
                ranges[1].0 + (sy as f64 + 0.5) / SUBSAMPLES as f64 * (ranges[1].1 - ranges[1].0)
            } else {
                0.0
            };
            for sx in 0..SUBSAMPLES {
                let x = ranges[0].0
                    + (sx as f64 + 0.5) / SUBSAMPLES as f64 * (ranges[0].1 - ranges[0].0);
                acc += f([x, y]);
            }
        }
        let vol: f64 = (0..self.dim).map(|a| ranges[a].1 - ranges[a].0).product();
        (acc / (SUBSAMPLES * ny) as f64, vol)
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else if a.is_infinite() {
        2.0 * b
    } else if b.is_infinite() {
        2.0 * a
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Diagonal coefficient field sampled on a grid: the face coefficients of
/// A's diagonal, the nodal weight, and the nodal masses ∫ w over each dual cell.
#[derive(Clone, Debug)]
pub struct FaceOperator {
    pub grid: Grid,
    /// x-face between node i and its +x neighbour, stored at i.
    pub fx: Vec<f64>,
    /// y-face between node i and its +y neighbour, stored at i (2D only).
    pub fy: Vec<f64>,
    /// Nodal average of w.
    pub w: Vec<f64>,
    /// ∫ w over each dual cell.
    pub mass: Vec<f64>,
    /// Floor applied to the face coefficients (0 if none).
    pub floor: f64,
}

impl FaceOperator {
    /// Build from the diagonal of A and the weight. Nodal values are dual
    /// cell averages and faces take their harmonic mean.
    pub fn new(
        grid: Grid,
        diag: impl Fn([f64; 2]) -> [f64; 2],
        weight: impl Fn([f64; 2]) -> f64,
    ) -> Self {
        let len = grid.len();
        let mut dx = vec![0.0; len];
        let mut dy = vec![0.0; len];
        let mut w = vec![0.0; len];
        let mut mass = vec![0.0; len];
        for idx in 0..len {
            dx[idx] = grid.cell_average(idx, &|p| diag(p)[0]).0;
            if grid.dim == 2 {
                dy[idx] = grid.cell_average(idx, &|p| diag(p)[1]).0;
            }
            let (avg, vol) = grid.cell_average(idx, &weight);
            w[idx] = avg;
            mass[idx] = avg * vol;
        }
        let mut fx = vec![0.0; len];
        let mut fy = vec![0.0; len];
        for idx in 0..len {
            let (i, j) = grid.ij(idx);
            if i < grid.n {
                fx[idx] = harmonic(dx[idx], dx[idx + 1]);
            }
            if grid.dim == 2 && j < grid.n {
                fy[idx] = harmonic(dy[idx], dy[idx + grid.per_axis()]);
            }
        }
        FaceOperator {
            grid,
            fx,
            fy,
            w,
            mass,
            floor: 0.0,
        }
    }

    /// Raise every face coefficient to at least `rel` times the largest one.
    pub fn apply_floor(&mut self, rel: f64) {
        let max = self
            .fx
            .iter()
            .chain(&self.fy)
            .cloned()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        let floor = rel * max;
        let g = &self.grid;
        for idx in 0..g.len() {
            let (i, j) = g.ij(idx);
            if i < g.n {
                self.fx[idx] = self.fx[idx].max(floor);
            }
            if g.dim == 2 && j < g.n {
                self.fy[idx] = self.fy[idx].max(floor);
            }
        }
        self.floor = floor;
    }

    /// Keep only the faces with both endpoints in `mask`.
    pub fn restrict(&mut self, mask: &[bool]) {
        let g = self.grid.clone();
        for idx in 0..g.len() {
            let (i, j) = g.ij(idx);
            if i < g.n && !(mask[idx] && mask[idx + 1]) {
                self.fx[idx] = 0.0;
            }
            if g.dim == 2 && j < g.n && !(mask[idx] && mask[idx + g.per_axis()]) {
                self.fy[idx] = 0.0;
            }
        }
    }

    fn stencil(&self) -> [f64; 2] {
        let vol = self.grid.volume();
        [
            vol / (self.grid.h[0] * self.grid.h[0]),
            vol / (self.grid.h[1] * self.grid.h[1]),
        ]
    }

    /// out = K u, with K the stiffness matrix of u ↦ Σ_faces a (Δu/h)² h^d.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let s = self.stencil();
        out.iter_mut().for_each(|v| *v = 0.0);
        for idx in 0..g.len() {
            let (i, j) = g.ij(idx);
            if i < g.n {
                let c = self.fx[idx] * s[0];
                let flux = c * (u[idx] - u[idx + 1]);
                out[idx] += flux;
                out[idx + 1] -= flux;
            }
            if g.dim == 2 && j < g.n {
                let up = idx + g.per_axis();
                let c = self.fy[idx] * s[1];
                let flux = c * (u[idx] - u[up]);
                out[idx] += flux;
                out[up] -= flux;
            }
        }
    }

    /// Diagonal of K.
    pub fn diagonal(&self) -> Vec<f64> {
        let g = &self.grid;
        let s = self.stencil();
        let mut d = vec![0.0; g.len()];
        for idx in 0..g.len() {
            let (i, j) = g.ij(idx);
            if i < g.n {
                d[idx] += self.fx[idx] * s[0];
                d[idx + 1] += self.fx[idx] * s[0];
            }
            if g.dim == 2 && j < g.n {
                d[idx] += self.fy[idx] * s[1];
                d[idx + g.per_axis()] += self.fy[idx] * s[1];
            }
        }
        d
    }

    /// Σ_faces a (Δu/h)² h^d.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let g = &self.grid;
        let s = self.stencil();
        let mut e = 0.0;
        for idx in 0..g.len() {
            let (i, j) = g.ij(idx);
            if i < g.n {
                let d = u[idx + 1] - u[idx];
                e += self.fx[idx] * s[0] * d * d;
            }
            if g.dim == 2 && j < g.n {
                let d = u[idx + g.per_axis()] - u[idx];
                e += self.fy[idx] * s[1] * d * d;
            }
        }
        e
    }

    /// Largest face value of a (Δψ/h)² / w, with w the harmonic face weight.
    pub fn max_face_gradient_over_weight(&self, psi: &[f64]) -> f64 {
        let g = &self.grid;
        let mut m: f64 = 0.0;
        for idx in 0..g.len() {
            let (i, j) = g.ij(idx);
            if i < g.n && self.fx[idx] > 0.0 {
                let d = (psi[idx + 1] - psi[idx]) / g.h[0];
                let wf = harmonic(self.w[idx], self.w[idx + 1]);
                if d != 0.0 {
                    m = m.max(self.fx[idx] * d * d / wf);
                }
            }
            if g.dim == 2 && j < g.n && self.fy[idx] > 0.0 {
                let up = idx + g.per_axis();
                let d = (psi[up] - psi[idx]) / g.h[1];
                let wf = harmonic(self.w[idx], self.w[up]);
                if d != 0.0 {
                    m = m.max(self.fy[idx] * d * d / wf);
                }
            }
        }
        m
    }

    /// ∫ |∇_A u| √w dx with the gradient taken per cell from edge averages
    /// and A, w from the corner averages.
    pub fn weighted_gradient_l1(&self, u: &[f64]) -> f64 {
        let g = &self.grid;
        let vol = g.volume();
        let mut acc = 0.0;
        if g.dim == 1 {
            for i in 0..g.n {
                let d = (u[i + 1] - u[i]) / g.h[0];
                let wf = 0.5 * (self.w[i] + self.w[i + 1]);
                acc += (self.fx[i] * wf).sqrt() * d.abs() * vol;
            }
            return acc;
        }
        let p = g.per_axis();
        for j in 0..g.n {
            for i in 0..g.n {
                let a = g.index(i, j);
                let (b, c, d) = (a + 1, a + p, a + p + 1);
                let gx = 0.5 * ((u[b] - u[a]) + (u[d] - u[c])) / g.h[0];
                let gy = 0.5 * ((u[c] - u[a]) + (u[d] - u[b])) / g.h[1];
                let ax = 0.5 * (self.fx[a] + self.fx[c]);
                let ay = 0.5 * (self.fy[a] + self.fy[b]);
                let wc = 0.25 * (self.w[a] + self.w[b] + self.w[c] + self.w[d]);
                acc += (wc * (ax * gx * gx + ay * gy * gy)).sqrt() * vol;
            }
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CgReport {
    pub iterations: usize,
    /// Final residual 2-norm.
    pub residual: f64,
    /// ‖b‖₂.
    pub rhs_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// (semi)definite operator. Stops once ‖r‖ ≤ tol·‖b‖.
pub fn cg(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    diag: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let n = b.len();
    let inv: Vec<f64> = diag
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            iterations: 0,
            residual: 0.0,
            rhs_norm: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let target = tol * b_norm;
    let mut res = dot(&r, &r).sqrt();
    for it in 0..max_iter {
        if res <= target {
            return Ok(CgReport {
                iterations: it,
                residual: res,
                rhs_norm: b_norm,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt();
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= target {
        return Ok(CgReport {
            iterations: max_iter,
            residual: res,
            rhs_norm: b_norm,
        });
    }
    Err(Error::SolverStalled {
        iterations: max_iter,
        residual: res / b_norm,
    })
}

/// Scatter/gather between full grid vectors and a subset of nodes.
#[derive(Clone, Debug)]
pub struct NodeSet {
    pub nodes: Vec<usize>,
    /// Position of each grid node in `nodes`, if present.
    pub position: Vec<Option<usize>>,
}

impl NodeSet {
    pub fn from_mask(mask: &[bool]) -> Self {
        let nodes: Vec<usize> = (0..mask.len()).filter(|i| mask[*i]).collect();
        let mut position = vec![None; mask.len()];
        for (k, &i) in nodes.iter().enumerate() {
            position[i] = Some(k);
        }
        NodeSet { nodes, position }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&i| full[i]).collect()
    }

    pub fn scatter(&self, sub: &[f64], full: &mut [f64]) {
        for (k, &i) in self.nodes.iter().enumerate() {
            full[i] = sub[k];
        }
    }
}
