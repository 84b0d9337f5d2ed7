//! Regenerative estimation of the skeleton rate, the growth constant and the
//! cycle variance, with finite-dimensional checks of the line CLT.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_gen::sample_window;
use crate::longest_path::{pinned_from, prefix_lengths};
use crate::prob_model::EdgeProbabilityModel;
use crate::skeleton_scan::{buffer_for, scan_skeleton, Cycle, SkeletonReport};
use crate::stats::{self, batch_bounds, Estimate, KsResult};
use crate::stream::SeedTag;

pub const MIN_CYCLES: usize = 30;
pub const BATCHES: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenEstimate {
    pub lambda_hat: Estimate,
    pub c_hat: Estimate,
    pub sigma2_hat: Estimate,
    pub n_cycles: usize,
    pub n_points: usize,
    pub core_len: usize,
    pub model_hash: String,
}

impl RegenEstimate {
    /// `λ^{1/2} σ`, the diffusive scale of `L_n - C n`.
    pub fn scale(&self) -> f64 {
        (self.lambda_hat.value * self.sigma2_hat.value).sqrt()
    }
}

/// Pools the cycles of several reports. Cycle order is the report order.
pub fn estimate_from_reports(model_hash: String, reports: &[SkeletonReport]) -> Result<RegenEstimate> {
    let cycles: Vec<Cycle> = reports.iter().flat_map(|r| r.cycles.iter().copied()).collect();
    if cycles.len() < MIN_CYCLES {
        return Err(Error::TooFewCycles { found: cycles.len(), needed: MIN_CYCLES });
    }
    let n_points: usize = reports.iter().map(|r| r.points.len()).sum();
    let core_len: usize = reports.iter().map(SkeletonReport::core_len).sum();
    let lambda = n_points as f64 / core_len as f64;

    let sum = |f: &dyn Fn(&Cycle) -> f64, cs: &[Cycle]| cs.iter().map(f).sum::<f64>();
    let total_len = sum(&|c| c.length as f64, &cycles);
    let total_gap = sum(&|c| c.gap as f64, &cycles);
    let c = total_len / total_gap;

    let batches = if cycles.len() >= BATCHES * 2 { BATCHES } else { cycles.len() / 2 };
    let b = batches as f64;
    let per_batch: Vec<(f64, f64)> = batch_bounds(cycles.len(), batches)
        .map(|(lo, hi)| {
            let cs = &cycles[lo..hi];
            (sum(&|c| c.length as f64, cs), sum(&|c| c.gap as f64, cs))
        })
        .collect();
    let ratios: Vec<f64> = per_batch.iter().map(|(l, g)| l / g).collect();
    let c_se = (stats::variance(&ratios) / b).sqrt();

    let mean_gap = total_gap / cycles.len() as f64;
    let gap_means: Vec<f64> = batch_bounds(cycles.len(), batches)
        .zip(&per_batch)
        .map(|((lo, hi), (_, g))| g / (hi - lo) as f64)
        .collect();
    let lambda_se = (stats::variance(&gap_means) / b).sqrt() / (mean_gap * mean_gap);

    let resid: Vec<f64> = cycles.iter().map(|cy| (cy.length as f64 - c * cy.gap as f64).powi(2)).collect();
    let n = cycles.len() as f64;
    let sigma2 = stats::batch_means(&resid, batches)?;
    Ok(RegenEstimate {
        lambda_hat: Estimate { value: lambda, se: lambda_se },
        c_hat: Estimate { value: c, se: c_se },
        sigma2_hat: Estimate { value: sigma2.value * n / (n - 1.0), se: sigma2.se },
        n_cycles: cycles.len(),
        n_points,
        core_len,
        model_hash,
    })
}

/// Scans `replications` windows `[0, window_size)` with a buffer certified to `eps`.
pub fn skeleton_reports(
    model: &EdgeProbabilityModel,
    window_size: usize,
    replications: usize,
    seed: SeedTag,
    eps: f64,
) -> Result<Vec<SkeletonReport>> {
    let buffer = buffer_for(model, eps, window_size as u64)?;
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let g = sample_window(model, 0, window_size as i64 - 1, seed.with_replication(r as u64))?;
            scan_skeleton(&g, model, buffer)
        })
        .collect()
}

pub fn estimate(
    model: &EdgeProbabilityModel,
    window_size: usize,
    replications: usize,
    seed: SeedTag,
    eps: f64,
) -> Result<RegenEstimate> {
    model.check_conditions(crate::prob_model::DEFAULT_TOL)?.c2().then_some(()).ok_or_else(|| {
        Error::ConditionViolation("Σ Q(k) diverges".into())
    })?;
    let reports = skeleton_reports(model, window_size, replications, seed, eps)?;
    estimate_from_reports(model.model_hash(), &reports)
}

/// `L_{[nt]}` on `[0, n·max t]` for each replication and grid time.
pub fn prefix_samples(
    model: &EdgeProbabilityModel,
    n: usize,
    t_grid: &[f64],
    replications: usize,
    seed: SeedTag,
) -> Result<Vec<Vec<u32>>> {
    let steps: Vec<usize> = t_grid.iter().map(|t| (n as f64 * t).floor() as usize).collect();
    let top = steps.iter().copied().max().unwrap_or(0);
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let g = sample_window(model, 0, top as i64, seed.with_replication(r as u64))?;
            let pre = prefix_lengths(&g);
            Ok(steps.iter().map(|&s| pre[s]).collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: usize,
    pub t_grid: Vec<f64>,
    pub replications: usize,
    /// `ℓ_n(t)/√t` against the standard normal, per grid time.
    pub ks: Vec<KsResult>,
    /// Bonferroni level used for the per-time KS tests.
    pub ks_level: f64,
    pub ks_pass: bool,
    pub variances: Vec<Estimate>,
    /// `var ℓ_n(t_last) / var ℓ_n(t_first)` against `t_last / t_first`.
    pub variance_ratio: Estimate,
    pub expected_ratio: f64,
    pub ratio_pass: bool,
    /// `corr(ℓ_n(t_2) - ℓ_n(t_1), ℓ_n(t_1))` for the first two grid times.
    pub increment_correlation: Option<Estimate>,
    pub ell_at_zero: f64,
}

/// `ℓ_n(t) = (L_{[nt]} - Ĉnt) / (λ̂^{1/2} σ̂ √n)` for one sample row.
pub fn ell(row: &[u32], n: usize, t_grid: &[f64], est: &RegenEstimate) -> Vec<f64> {
    let denom = est.scale() * (n as f64).sqrt();
    row.iter()
        .zip(t_grid)
        .map(|(&l, &t)| (l as f64 - est.c_hat.value * (n as f64 * t).floor()) / denom)
        .collect()
}

fn variance_ratio(a: &[f64], b: &[f64]) -> Estimate {
    let (ma, mb) = (stats::mean(a), stats::mean(b));
    let sa: Vec<f64> = a.iter().map(|x| (x - ma).powi(2)).collect();
    let sb: Vec<f64> = b.iter().map(|x| (x - mb).powi(2)).collect();
    let r = stats::mean(&sb) / stats::mean(&sa);
    let lin: Vec<f64> = sa.iter().zip(&sb).map(|(x, y)| y - r * x).collect();
    Estimate { value: r, se: (stats::variance(&lin) / a.len() as f64).sqrt() / stats::mean(&sa) }
}

pub fn clt_check(
    model: &EdgeProbabilityModel,
    n: usize,
    t_grid: &[f64],
    replications: usize,
    est: &RegenEstimate,
    seed: SeedTag,
    alpha: f64,
) -> Result<CltReport> {
    if t_grid.is_empty() || t_grid.iter().any(|&t| t <= 0.0) {
        return Err(Error::InvalidModel("the time grid needs positive entries".into()));
    }
    if replications < 3 {
        return Err(Error::EmptySample);
    }
    let rows = prefix_samples(model, n, t_grid, replications, seed)?;
    let ells: Vec<Vec<f64>> = rows.iter().map(|r| ell(r, n, t_grid, est)).collect();
    let column = |k: usize| ells.iter().map(|e| e[k]).collect::<Vec<f64>>();
    let ks_level = alpha / t_grid.len() as f64;
    let ks = (0..t_grid.len())
        .map(|k| {
            let scaled: Vec<f64> = column(k).iter().map(|x| x / t_grid[k].sqrt()).collect();
            stats::ks_normal(&scaled, 0.0, 1.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let variances = (0..t_grid.len())
        .map(|k| {
            let c = column(k);
            let v = stats::variance(&c);
            let m = stats::mean(&c);
            let fourth = c.iter().map(|x| (x - m).powi(4)).sum::<f64>() / c.len() as f64;
            Estimate { value: v, se: ((fourth - v * v) / c.len() as f64).max(0.0).sqrt() }
        })
        .collect();
    let last = t_grid.len() - 1;
    let variance_ratio = variance_ratio(&column(0), &column(last));
    let expected_ratio = t_grid[last] / t_grid[0];
    let increment_correlation = (t_grid.len() >= 2).then(|| {
        let (a, b) = (column(0), column(1));
        let inc: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
        Estimate { value: stats::pearson(&inc, &a), se: 1.0 / (a.len() as f64).sqrt() }
    });
    Ok(CltReport {
        n,
        t_grid: t_grid.to_vec(),
        replications,
        ks_pass: ks.iter().all(|k| k.p_value > ks_level),
        ks,
        ks_level,
        variances,
        ratio_pass: variance_ratio.within(expected_ratio, 3.0) || last == 0,
        variance_ratio,
        expected_ratio,
        increment_correlation,
        ell_at_zero: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnRow {
    pub n: usize,
    /// Mean of `T[0,n]/n`.
    pub ratio: Estimate,
    pub zero_fraction: f64,
    /// `T[0,n] <= L_n` held on every sample.
    pub pinned_le_free: bool,
    /// `T[0,n] > 0` whenever a window-certified skeleton point lay in `[0, n]`.
    pub connected_past_skeleton: bool,
}

pub fn lln_check_t(
    model: &EdgeProbabilityModel,
    n_grid: &[usize],
    replications: usize,
    seed: SeedTag,
) -> Result<Vec<LlnRow>> {
    let top = n_grid.iter().copied().max().ok_or(Error::EmptySample)?;
    let per_rep: Vec<Vec<(u32, u32, bool)>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let g = sample_window(model, 0, top as i64, seed.with_replication(r as u64))?;
            let t = pinned_from(&g, 0)?;
            let l = prefix_lengths(&g);
            let (pts, _) = crate::skeleton_scan::window_points(&g, 0)?;
            Ok(n_grid
                .iter()
                .map(|&n| {
                    let has_point = pts.iter().any(|&p| (1..=n as i64).contains(&p) && p > 0);
                    (t[n].unwrap_or(0), l[n], has_point)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let ratios: Vec<f64> = per_rep.iter().map(|v| v[k].0 as f64 / n as f64).collect();
            Ok(LlnRow {
                n,
                ratio: stats::mean_se(&ratios)?,
                zero_fraction: per_rep.iter().filter(|v| v[k].0 == 0).count() as f64 / replications as f64,
                pinned_le_free: per_rep.iter().all(|v| v[k].0 <= v[k].1),
                connected_past_skeleton: per_rep.iter().all(|v| !v[k].2 || v[k].0 > 0),
            })
        })
        .collect()
}
