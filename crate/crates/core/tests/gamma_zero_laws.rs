use slablab::gamma_zero::{
    gamma0_moment_check, mu_tail_band, sample_mu, sample_nu, sample_record_m, GammaZeroSampler, DEFAULT_CEILING,
};
mod common;

use slablab::stats::{ks_two_sample, mean_se};
use slablab::*;

fn half() -> EdgeProbabilityModel {
    EdgeProbabilityModel::constant(0.5).unwrap()
}

fn opts() -> GammaOptions {
    GammaOptions::default()
}

#[test]
fn conditional_mu_tail_lies_in_the_integrated_tail_band() {
    let m = half();
    let runs = 100_000u64;
    let finite: Vec<u64> = (0..runs)
        .filter_map(|r| sample_mu(&m, SeedTag::new(3000, r).rng(Purpose::GammaZero), opts()).unwrap())
        .collect();
    let nf = finite.len() as f64;
    for n in 1..=6u64 {
        let (lo, hi) = mu_tail_band(&m, n).unwrap();
        let p = finite.iter().filter(|&&mu| mu > n).count() as f64 / nf;
        let se = (p * (1.0 - p) / nf).sqrt();
        assert!(p >= lo - 3.0 * se && p <= hi + 3.0 * se, "n={n}: {p} not in [{lo}, {hi}]");
    }
}

#[test]
fn record_tail_obeys_the_union_bound() {
    let m = half();
    let runs = 50_000u64;
    let ms: Vec<u64> = (0..runs)
        .map(|r| sample_record_m(&m, SeedTag::new(3001, r).rng(Purpose::GammaZero), opts()).unwrap())
        .collect();
    for level in 1..=10u64 {
        // P(M >= m) <= Σ_{i>=1} Q(i+m-1) = Σ_{k>=m} Q(k)
        let bound = m.tail_sum_after(level - 1).unwrap().value;
        let p = ms.iter().filter(|&&x| x >= level).count() as f64 / runs as f64;
        let se = (p * (1.0 - p) / runs as f64).sqrt().max(1.0 / runs as f64);
        assert!(p <= bound + 3.0 * se, "m={level}: {p} > {bound}");
    }
}

#[test]
fn silver_increments_follow_the_direct_oracle_and_shrink() {
    use rand::SeedableRng;
    let m = half();
    let n = 4000u64;
    let (mut first, mut second, mut o_first, mut o_second) = (vec![], vec![], vec![], vec![]);
    for r in 0..n {
        let mut s = GammaZeroSampler::from_seed(&m, SeedTag::new(3002, r), opts()).unwrap();
        let a = s.run_recursion(0).unwrap().silver();
        let b = s.run_recursion(-(a as i64)).unwrap().silver();
        first.push(a as f64);
        second.push(b as f64);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(r);
        let mut e = common::IidEdges::new(0.5, &mut rng);
        let oa = common::silver_from(&mut e, 0);
        o_first.push(oa as f64);
        o_second.push(common::silver_from(&mut e, -oa) as f64);
    }
    for (x, y) in [(&first, &o_first), (&second, &o_second)] {
        let ks = ks_two_sample(x, y).unwrap();
        assert!(ks.p_value > 0.01, "{ks:?}");
    }
    // the second run starts at a point every row to its left can reach,
    // so its increment is stochastically smaller than the first
    let (a, b) = (mean_se(&first).unwrap(), mean_se(&second).unwrap());
    assert!(b.value + 5.0 * b.se < a.value - 5.0 * a.se, "{a:?} vs {b:?}");
}

#[test]
fn nu_mean_is_stable_and_nu_dominates_xi() {
    let m = half();
    let mut rng = SeedTag::new(3003, 0).rng(Purpose::Oracle);
    let xs: Vec<f64> = (0..100_000).map(|_| sample_nu(&m, &mut rng, DEFAULT_CEILING).unwrap() as f64).collect();
    let (a, b) = xs.split_at(50_000);
    let ma = slablab::stats::mean_se(a).unwrap();
    let mb = slablab::stats::mean_se(b).unwrap();
    assert!((ma.value - mb.value).abs() < 4.0 * (ma.se.powi(2) + mb.se.powi(2)).sqrt());
    // the first draw of the chain is ξ(0), so ν >= 1 and ν = 1 exactly when ξ(0) = 1
    let ones = xs.iter().filter(|&&x| x == 1.0).count() as f64 / xs.len() as f64;
    assert!((ones - 0.5).abs() < 0.01);
}

#[test]
fn denser_graphs_have_a_nearer_gold_point() {
    let sample = |p: f64, stream: u64| -> Vec<i64> {
        let m = EdgeProbabilityModel::constant(p).unwrap();
        (0..4000).map(|r| construct_gamma0(&m, SeedTag::new(stream, r), opts()).unwrap().gamma0).collect()
    };
    let (g5, g9) = (sample(0.5, 3004), sample(0.9, 3005));
    let r5 = gamma0_moment_check(&half(), &g5).unwrap();
    let r9 = gamma0_moment_check(&EdgeProbabilityModel::constant(0.9).unwrap(), &g9).unwrap();
    assert!(r5.stable && r9.stable);
    assert!(r5.warning.is_none());
    assert!(r9.mean + 3.0 * r9.se < r5.mean - 3.0 * r5.se, "{r9:?} vs {r5:?}");
}

#[test]
fn first_run_has_k_one_exactly_when_mu_is_infinite() {
    let m = half();
    for r in 0..2000 {
        let mut a = GammaZeroSampler::from_seed(&m, SeedTag::new(3006, r), opts()).unwrap();
        let trace = a.run_recursion(0).unwrap();
        let first_mu = trace.nu_mu[0].1;
        assert_eq!(trace.k() == 1, first_mu.is_none());
    }
}

#[test]
fn heavy_tails_construct_under_a_loose_truncation_and_hit_the_ceiling_otherwise() {
    let m = EdgeProbabilityModel::power_decay(2.5).unwrap();
    let loose = GammaOptions { tol: 1e-6, ..opts() };
    for r in 0..200 {
        let t = construct_gamma0(&m, SeedTag::new(3007, r), loose).unwrap();
        assert!(t.gamma0 <= -1);
    }
    let tight = GammaOptions { ceiling: 100_000, ..opts() };
    let err = construct_gamma0(&m, SeedTag::new(3007, 0), tight).unwrap_err();
    assert!(matches!(err, Error::IterationCeiling { .. }), "{err:?}");
}
