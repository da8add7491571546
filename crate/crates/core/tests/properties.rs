use proptest::prelude::*;

use sde_asympt::brownian::{grid_time, sample_grid, RngStream, SiteLedger};
use sde_asympt::estimators::{clt_ci, estimate_errors, normalized_error, ErrorStudy, Reference, SchemeSpec, Z95};
use sde_asympt::model::{builtin, frobenius_norm, infty2_norm};
use sde_asympt::schemes::{adaptive_em, default_kn, equidistant_em, plan_adaptive};
use sde_asympt::taming::CoefficientFamily;

fn sorted_times(raw: Vec<f64>, horizon: f64) -> Vec<f64> {
    let mut t: Vec<f64> = raw.into_iter().map(|u| u * horizon).collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ledger_reobserve_is_idempotent(seed in any::<u64>(), raw in prop::collection::vec(0.0f64..=1.0, 1..40), dim in 1usize..3) {
        let times = sorted_times(raw, 2.0);
        let mut l = SiteLedger::new(RngStream::new(seed, 0), 2.0, dim).unwrap();
        let first = l.observe(&times).unwrap();
        let n = l.len();
        let again = l.observe(&times).unwrap();
        prop_assert_eq!(first, again);
        prop_assert_eq!(l.len(), n);
        prop_assert!(l.sites().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn refinement_keeps_recorded_values(seed in any::<u64>(), n in 1usize..64, raw in prop::collection::vec(0.0f64..=1.0, 1..30)) {
        let mut l = sample_grid(RngStream::new(seed, 1), n, 1.0, 1).unwrap();
        let before: Vec<(f64, f64)> = (0..l.len()).map(|i| (l.sites()[i], l.value(i)[0])).collect();
        l.observe(&sorted_times(raw, 1.0)).unwrap();
        for (t, w) in before {
            let i = l.find(t).unwrap();
            prop_assert_eq!(l.value(i)[0], w);
        }
    }

    #[test]
    fn row_norm_between_max_entry_and_frobenius(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        let mut x = seed;
        let a: Vec<f64> = (0..rows * cols).map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0
        }).collect();
        let n = infty2_norm(&a, cols);
        let max_abs = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(n <= frobenius_norm(&a) * (1.0 + 1e-15));
        prop_assert!(n >= max_abs * (1.0 - 1e-15));
    }

    #[test]
    fn taming_never_amplifies(x in -1e4f64..1e4, n in 1usize..1_000_000, r in 0.0f64..4.0) {
        let m = builtin("heston32", &[]).unwrap();
        let fam = CoefficientFamily::sabanis(m.clone(), r);
        let (mu, sig) = fam.evaluate(n, 0.5, &[x]).unwrap();
        prop_assert!(mu[0].abs() <= m.drift(0.5, &[x])[0].abs());
        prop_assert!(sig[0].abs() <= m.diffusion(0.5, &[x])[0].abs());
        let id = CoefficientFamily::identity(m.clone());
        prop_assert_eq!(id.evaluate(n, 0.5, &[x]).unwrap(), (m.drift(0.5, &[x]), m.diffusion(0.5, &[x])));
    }

    #[test]
    fn default_kn_is_monotone_and_bounded(n in 2usize..2_000_000) {
        let k = default_kn(n).unwrap();
        prop_assert!(k >= 1 && k <= n);
        prop_assert!(default_kn(n + 1).unwrap() >= k);
    }

    #[test]
    fn plan_respects_cost_envelope(norms in prop::collection::vec(0.0f64..50.0, 1..200), n in 1usize..100_000, q in 1.0f64..8.0) {
        let p = plan_adaptive(&norms, n, q, 1.0).unwrap();
        let (lower, upper) = p.cost_bounds();
        let nu = p.eval_count() as f64;
        prop_assert!(nu <= upper);
        prop_assert!(nu >= lower * (1.0 - 1e-12));
        p.check_cost_bounds().unwrap();
        let k = norms.len();
        for l in 0..k {
            let s = p.cell_sites(l);
            prop_assert_eq!(s[0], grid_time(l, k, 1.0));
            prop_assert_eq!(*s.last().unwrap(), grid_time(l + 1, k, 1.0));
        }
    }

    #[test]
    fn adaptive_matches_coarse_at_coarse_sites(seed in any::<u64>(), n in 16usize..2048) {
        let fam = CoefficientFamily::sabanis(builtin("heston32", &[]).unwrap(), 1.0);
        let k = default_kn(n).unwrap();
        let mut l = SiteLedger::new(RngStream::new(seed, 0), 1.0, 1).unwrap();
        let (tr, plan) = adaptive_em(&fam, n, 2.0, k, &mut l).unwrap();
        let plan = plan.unwrap();
        let coarse = equidistant_em(&fam, k, &mut l).unwrap();
        let mut idx = 0;
        for c in 0..k {
            let want = coarse.value(c)[0];
            prop_assert!((tr.value(idx)[0] - want).abs() <= 1e-9 * (1.0 + want.abs()));
            idx += plan.eta()[c] + 1;
        }
        prop_assert_eq!(idx, tr.sites().len() - 1);
        prop_assert_eq!(tr.eval_count(), plan.eval_count());
    }

    #[test]
    fn clt_interval_shape(samples in prop::collection::vec(-1e3f64..1e3, 2..200)) {
        let e = clt_ci(&samples).unwrap();
        prop_assert!(e.ci95.0 <= e.value && e.value <= e.ci95.1);
        prop_assert!(((e.ci95.1 - e.ci95.0) - 2.0 * Z95 * e.stderr).abs() <= 1e-9 * (1.0 + e.value.abs()));
        prop_assert!(e.stderr >= 0.0);
    }

    #[test]
    fn normalization_identity(c in 0.01f64..10.0, n in 2.0f64..1e9) {
        let row = normalized_error(n, c * (n.ln() / n).sqrt(), c).unwrap();
        prop_assert!((row.ratio.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_runs_are_bit_identical(seed in any::<u64>()) {
        let fam = CoefficientFamily::sabanis(builtin("heston32", &[]).unwrap(), 1.0);
        let mut a = SiteLedger::new(RngStream::new(seed, 3), 1.0, 1).unwrap();
        let mut b = SiteLedger::new(RngStream::new(seed, 3), 1.0, 1).unwrap();
        let (ta, _) = adaptive_em(&fam, 300, 2.0, 80, &mut a).unwrap();
        let (tb, _) = adaptive_em(&fam, 300, 2.0, 80, &mut b).unwrap();
        prop_assert_eq!(ta.values(), tb.values());
        prop_assert_eq!(ta.sites(), tb.sites());
    }
}

/// Coupled gbm errors against the closed form: quadrupling N lowers the
/// batch estimate in at least 95% of independent batches.
#[test]
fn gbm_monotone_coupling() {
    let fam = CoefficientFamily::identity(builtin("gbm", &[0.1, 0.2, 1.0, 1.0]).unwrap());
    let batches = 20;
    let mut wins = 0;
    for b in 0..batches {
        let study = ErrorStudy::new(fam.clone(), 2.0, 1000, 1024, 100 + b).with_reference(Reference::Exact);
        let r = estimate_errors(&study, &[SchemeSpec::Equidistant { n: 64 }, SchemeSpec::Equidistant { n: 256 }]).unwrap();
        if r.schemes[1].error.value < r.schemes[0].error.value {
            wins += 1;
        }
    }
    assert!(wins * 100 >= 95 * batches, "{wins}/{batches}");
}

#[test]
fn parallel_and_serial_estimates_agree() {
    let fam = CoefficientFamily::sabanis(builtin("heston32", &[]).unwrap(), 1.0);
    let study = ErrorStudy::new(fam, 2.0, 24, 1024, 9);
    let specs = [SchemeSpec::Equidistant { n: 64 }, SchemeSpec::Adaptive { n: 128, k: 50 }];
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| estimate_errors(&study, &specs).unwrap());
    let b = three.install(|| estimate_errors(&study, &specs).unwrap());
    assert_eq!(a, b);
}
