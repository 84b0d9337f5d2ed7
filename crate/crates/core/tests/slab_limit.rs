use slablab::limit_process::{normalized_slab_lengths, slab_vs_limit};
use slablab::regen_stats::estimate;
use slablab::skeleton_scan::scan_slab_skeleton;
use slablab::slab_analysis::{kappa2, sandwich_check};
use slablab::stats::{ks_normal, variance};
use slablab::*;

fn half() -> EdgeProbabilityModel {
    EdgeProbabilityModel::constant(0.5).unwrap()
}

fn line_c() -> f64 {
    estimate(&half(), 100_000, 40, SeedTag::new(5000, 0), 1e-6).unwrap().c_hat.value
}

fn two_chain() -> SlabProbabilityModel {
    SlabProbabilityModel::new(half(), Poset::chain(1), 0.5, 0.0).unwrap()
}

fn slab_kappa(model: &SlabProbabilityModel, c: f64) -> Estimate {
    let reports: Vec<_> = (0..40)
        .map(|r| {
            let g = sample_slab_window(model, 0, 60_000, SeedTag::new(5001, r)).unwrap();
            scan_slab_skeleton(&g, 24).unwrap()
        })
        .collect();
    kappa2(&reports, c).unwrap()
}

#[test]
fn one_level_slab_is_gaussian_in_the_limit() {
    let model = SlabProbabilityModel::new(half(), Poset::chain(0), 0.5, 0.0).unwrap();
    let c = line_c();
    let kappa = slab_kappa(&model, c).value.sqrt();
    let h = build_hasse(&model.poset).unwrap();
    let rep = slab_vs_limit(&model, &h, 5000, 1000, c, kappa, 5000, SeedTag::new(5002, 0)).unwrap();
    assert!(rep.ks.statistic < rep.critical_05, "{:?}", rep.ks);
    let ks = ks_normal(&rep.normalized, 0.0, 1.0).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn two_chain_kappa_matches_the_level_scale() {
    let c = line_c();
    let k2 = slab_kappa(&two_chain(), c);
    let line = estimate(&half(), 100_000, 40, SeedTag::new(5003, 0), 1e-6).unwrap();
    let target = line.scale().powi(2);
    assert!((k2.value - target).abs() < 0.1 * target, "{k2:?} vs {target}");
}

#[test]
fn two_chain_fluctuation_variance_stabilises() {
    let model = two_chain();
    let c = line_c();
    let vars: Vec<f64> = [1000, 2000, 4000, 8000]
        .iter()
        .map(|&n| variance(&normalized_slab_lengths(&model, n, 600, SeedTag::new(5004, n as u64), c, 1.0).unwrap()))
        .collect();
    let (lo, hi) = vars.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi / lo < 1.35, "{vars:?}");
}

#[test]
fn two_chain_distance_to_the_limit_shrinks() {
    let model = two_chain();
    let c = line_c();
    let kappa = slab_kappa(&model, c).value.sqrt();
    let h = build_hasse(&model.poset).unwrap();
    let d: Vec<f64> = [1000, 3000, 10_000]
        .iter()
        .map(|&n| slab_vs_limit(&model, &h, n, 1000, c, kappa, 5000, SeedTag::new(5005, n as u64)).unwrap().ks.statistic)
        .collect();
    assert!(d[2] < d[0], "{d:?}");
}

#[test]
fn dense_slab_sandwich_holds() {
    let model = SlabProbabilityModel::new(EdgeProbabilityModel::constant(0.8).unwrap(), Poset::chain(2), 0.9, 0.3).unwrap();
    let h = build_hasse(&model.poset).unwrap();
    let mut checked = 0;
    for r in 0..300 {
        let g = sample_slab_window(&model, -400, 1400, SeedTag::new(5006, r)).unwrap();
        match sandwich_check(&g, (0, 1000), 16, &h) {
            Ok(v) => {
                assert!(v.holds(), "{v:?}");
                checked += 1;
            }
            Err(Error::TooFewSkeletonPoints { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(checked >= 290, "{checked}");
}
