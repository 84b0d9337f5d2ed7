//! The Brownian last-passage functional `Z` over Hasse paths, the GUE largest
//! eigenvalue, and distributional comparisons between them and slab samples.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_gen::sample_slab_window;
use crate::longest_path::slab_longest_free;
use crate::prob_model::SlabProbabilityModel;
use crate::slab_analysis::HasseDiagram;
use crate::stats::{self, KsResult};
use crate::stream::{Purpose, SeedTag};

pub const JACOBI_TOL: f64 = 1e-10;
pub const JACOBI_SWEEPS: usize = 100;

/// How the supremum over split times is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZScheme {
    /// Split times restricted to grid points.
    Grid,
    /// Two-level paths use the exact conditional maximum of the Brownian
    /// bridge between grid points; longer paths fall back to [`ZScheme::Grid`].
    BridgeRefined,
}

/// Partial sums of standard Brownian motions, one row per level, `steps` increments over `[0, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianGrid {
    pub t: f64,
    pub steps: usize,
    pub paths: Vec<Vec<f64>>,
}

impl BrownianGrid {
    pub fn sample<R: Rng + ?Sized>(levels: usize, t: f64, steps: usize, rng: &mut R) -> Self {
        let sd = (t / steps as f64).sqrt();
        let paths = (0..levels)
            .map(|_| {
                let mut p = Vec::with_capacity(steps + 1);
                p.push(0.0);
                let mut s = 0.0;
                for _ in 0..steps {
                    s += sd * rng.sample::<f64, _>(StandardNormal);
                    p.push(s);
                }
                p
            })
            .collect();
        Self { t, steps, paths }
    }

    fn dt(&self) -> f64 {
        self.t / self.steps as f64
    }
}

/// Grid supremum of `Σ_k [B_{ι_k}(t_k) - B_{ι_k}(t_{k-1})]` over `0 <= t_0 <= ... <= t_r = t`.
fn path_value_grid(grid: &BrownianGrid, path: &[usize]) -> f64 {
    let mut r: Vec<f64> = grid.paths[path[0]].clone();
    for &lvl in &path[1..] {
        let b = &grid.paths[lvl];
        let mut run = f64::NEG_INFINITY;
        for s in 0..r.len() {
            run = run.max(r[s] - b[s]);
            r[s] = run + b[s];
        }
    }
    *r.last().expect("grids are nonempty")
}

/// `B_1(t) + sup_u (B_0(u) - B_1(u))` with the exact bridge maximum inside each step.
fn path_value_bridge<R: Rng + ?Sized>(grid: &BrownianGrid, path: &[usize], rng: &mut R) -> f64 {
    let (b0, b1) = (&grid.paths[path[0]], &grid.paths[path[1]]);
    // the difference of two independent standard motions has variance rate 2
    let vh = 2.0 * grid.dt();
    let mut best = f64::NEG_INFINITY;
    for s in 0..grid.steps {
        let a = b0[s] - b1[s];
        let b = b0[s + 1] - b1[s + 1];
        let u: f64 = 1.0 - rng.random::<f64>();
        let m = 0.5 * (a + b + ((b - a).powi(2) - 2.0 * vh * u.ln()).sqrt());
        best = best.max(m);
    }
    b1[grid.steps] + best
}

/// `Z_t` on a shared grid: the maximum over Hasse paths.
pub fn z_from_grid<R: Rng + ?Sized>(h: &HasseDiagram, grid: &BrownianGrid, scheme: ZScheme, rng: &mut R) -> f64 {
    h.paths
        .iter()
        .map(|p| match (scheme, p.len()) {
            (_, 1) => grid.paths[p[0]][grid.steps],
            (ZScheme::BridgeRefined, 2) => path_value_bridge(grid, p, rng),
            _ => path_value_grid(grid, p),
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// One draw of `Z_t` with `per_unit` grid steps per unit time.
pub fn sample_z<R: Rng + ?Sized>(h: &HasseDiagram, levels: usize, t: f64, per_unit: usize, scheme: ZScheme, rng: &mut R) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::InvalidModel(format!("time {t} is not positive")));
    }
    let steps = ((per_unit as f64 * t).round() as usize).max(1);
    let grid = BrownianGrid::sample(levels, t, steps, rng);
    Ok(z_from_grid(h, &grid, scheme, rng))
}

/// `count` independent draws, draw `k` on its own substream.
pub fn z_samples(h: &HasseDiagram, levels: usize, t: f64, per_unit: usize, scheme: ZScheme, count: usize, seed: SeedTag) -> Result<Vec<f64>> {
    (0..count)
        .into_par_iter()
        .map(|k| sample_z(h, levels, t, per_unit, scheme, &mut seed.rng_at(Purpose::Gaussian, k as u64)))
        .collect()
}

/// A Hermitian matrix with unit-variance real diagonal and off-diagonal
/// entries whose real and imaginary parts have variance 1/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GueSample {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

impl GueSample {
    pub fn dim(&self) -> usize {
        self.re.len()
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("dimension is positive")
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.re[i][i]).sum()
    }

    pub fn is_hermitian(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| self.re[i][j] == self.re[j][i] && self.im[i][j] == -self.im[j][i]))
    }
}

pub fn sample_gue<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<GueSample> {
    if dim == 0 {
        return Err(Error::InvalidModel("GUE dimension must be positive".into()));
    }
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut re = vec![vec![0.0; dim]; dim];
    let mut im = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        re[i][i] = rng.sample(StandardNormal);
        for j in i + 1..dim {
            let (x, y): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            re[i][j] = half * x;
            re[j][i] = half * x;
            im[i][j] = half * y;
            im[j][i] = -half * y;
        }
    }
    let eigenvalues = hermitian_eigenvalues(&re, &im)?;
    Ok(GueSample { re, im, eigenvalues })
}

pub fn sample_gue_lambda_max<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<f64> {
    Ok(sample_gue(dim, rng)?.lambda_max())
}

pub fn gue_samples(dim: usize, count: usize, seed: SeedTag) -> Result<Vec<f64>> {
    (0..count)
        .into_par_iter()
        .map(|k| sample_gue_lambda_max(dim, &mut seed.rng_at(Purpose::Gaussian, k as u64)))
        .collect()
}

/// Eigenvalues of `A + iB` via the real symmetric embedding `[[A, -B], [B, A]]`,
/// whose spectrum is that of `A + iB` with every eigenvalue doubled.
pub fn hermitian_eigenvalues(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = re.len();
    let mut m = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = re[i][j];
            m[i + n][j + n] = re[i][j];
            m[i][j + n] = -im[i][j];
            m[i + n][j] = im[i][j];
        }
    }
    let all = jacobi_eigenvalues(m, JACOBI_TOL, JACOBI_SWEEPS)?;
    Ok(all.into_iter().step_by(2).collect())
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is below `tol`.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>, tol: f64, max_sweeps: usize) -> Result<Vec<f64>> {
    let n = a.len();
    let off = |a: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j] * a[i][j];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) > tol {
        if sweeps == max_sweeps {
            return Err(Error::EigenNoConvergence { sweeps, off_norm: off(&a) });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn compare_distributions(a: &[f64], b: &[f64]) -> Result<KsResult> {
    stats::ks_two_sample(a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabLimitReport {
    pub n: usize,
    pub ks: KsResult,
    pub critical_05: f64,
    pub c: f64,
    pub kappa: f64,
    pub normalized: Vec<f64>,
}

/// `(L_n - C n) / (κ √n)` for slab windows `[0, n]`.
pub fn normalized_slab_lengths(
    model: &SlabProbabilityModel,
    n: usize,
    replications: usize,
    seed: SeedTag,
    c: f64,
    kappa: f64,
) -> Result<Vec<f64>> {
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let g = sample_slab_window(model, 0, n as i64, seed.with_replication(r as u64))?;
            let l = slab_longest_free(&g, false).length as f64;
            Ok((l - c * n as f64) / (kappa * (n as f64).sqrt()))
        })
        .collect()
}

pub fn slab_vs_limit(
    model: &SlabProbabilityModel,
    h: &HasseDiagram,
    n: usize,
    replications: usize,
    c: f64,
    kappa: f64,
    z_count: usize,
    seed: SeedTag,
) -> Result<SlabLimitReport> {
    let normalized = normalized_slab_lengths(model, n, replications, seed, c, kappa)?;
    let z = z_samples(h, model.poset.len(), 1.0, 400, ZScheme::BridgeRefined, z_count, seed.with_replication(u64::MAX))?;
    let ks = compare_distributions(&normalized, &z)?;
    Ok(SlabLimitReport { n, critical_05: stats::ks_critical(0.05, ks.n_a, ks.n_b), ks, c, kappa, normalized })
}
