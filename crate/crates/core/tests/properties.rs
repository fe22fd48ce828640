use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use walklab_core::birkhoff::{run_birkhoff, run_occupation, OccupationPlan};
use walklab_core::chains::{exact_occupation_moments, ThreeStateChain};
use walklab_core::lattice_walk::{make_step_law, KernelPolicy, LatticeKernel, LawPreset, StepLaw, TableEntry};
use walklab_core::moments::{MomentPlan, PairMoments};
use walklab_core::observables::{
    cube_average, cube_average_direct, make_heaviside, make_ocean, make_periodic, make_quasiperiodic, make_scenery, ARule, CubeSpec,
    OceanSchedule, TrigTerm,
};
use walklab_core::statlab::{ks_distance, rho_exponent, run_ensemble, AffineReduction};

fn table_law() -> impl Strategy<Value = StepLaw> {
    prop::collection::btree_map(-3i64..=3, 1u32..10, 2..5).prop_filter_map("law rejected", |m| {
        let total: u32 = m.values().sum();
        let table = m
            .iter()
            .map(|(&s, &w)| TableEntry::new(vec![s], w as f64 / total as f64))
            .collect();
        make_step_law(&LawPreset::Table { table, alpha: 2.0 }).ok()
    })
}

/// `P(S_n = x)` by listing every path.
fn brute_kernel(law: &StepLaw, n: u32) -> std::collections::BTreeMap<i64, f64> {
    let mut dist = std::collections::BTreeMap::from([(0i64, 1.0)]);
    for _ in 0..n {
        let mut next = std::collections::BTreeMap::new();
        for (&x, &p) in &dist {
            for (s, q) in law.iter() {
                *next.entry(x + s[0]).or_insert(0.0) += p * q;
            }
        }
        dist = next;
    }
    dist
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_matches_enumeration(law in table_law(), n in 0u32..7) {
        let k = LatticeKernel::at_time(&law, n as u64, &KernelPolicy::exact()).unwrap();
        for (x, p) in brute_kernel(&law, n) {
            prop_assert!((k.get(&[x]) - p).abs() < 1e-12);
        }
        prop_assert!((k.total_mass() + k.truncated_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn symmetric_law_symmetric_kernel(hold in 0.05f64..0.95, n in 1u64..40) {
        let law = make_step_law(&LawPreset::LazySrw { d: 2, hold }).unwrap();
        let k = LatticeKernel::at_time(&law, n, &KernelPolicy::default()).unwrap();
        for (x, p) in k.iter() {
            let mirrored = k.get(&[-x[0], -x[1]]);
            prop_assert!((p - mirrored).abs() < 1e-14);
        }
    }

    #[test]
    fn observables_bounded(seed in any::<u64>(), sites in prop::collection::vec((-1_000_000_000i64..1_000_000_000, -1000i64..1000), 200)) {
        let scenery = make_scenery(2, seed).unwrap();
        let quasi = make_quasiperiodic(
            vec![TrigTerm { k: vec![1], cos: 0.7, sin: -0.2 }, TrigTerm { k: vec![3], cos: 0.0, sin: 0.4 }],
            vec![vec![0.7548776662466927], vec![0.5698402909980532]],
            vec![0.1],
            true,
        ).unwrap();
        let ocean = make_ocean(2.0, 16, ARule::Log2).unwrap();
        for (a, b) in sites {
            prop_assert!(scenery.eval(&[a, b]).abs() <= scenery.bound());
            prop_assert!(quasi.eval(&[a, b]).abs() <= quasi.bound() + 1e-12);
            prop_assert!(ocean.eval(&[a]).abs() <= ocean.bound());
            prop_assert_eq!(scenery.eval(&[a, b]), scenery.eval(&[a, b]));
        }
    }

    #[test]
    fn ocean_schedule_structure(b1 in 16u64..5000, half in any::<bool>()) {
        let rule = if half { ARule::HalfLog2 } else { ARule::Log2 };
        let s = OceanSchedule::new(2.0, b1, rule).unwrap();
        for c in s.check_bounds(s.len() as u64 - 2).unwrap() {
            prop_assert!(c.a_le_n && c.n_lt_b && c.b_increasing);
        }
    }

    #[test]
    fn cube_closed_form_matches_direct(lo in -3000i64..3000, len in 1i64..400, period in 2u64..7) {
        let values: Vec<f64> = (0..period).map(|k| (k as f64 * 0.37).sin()).collect();
        let cube = CubeSpec::from_ranges(&[(lo, lo + len)]).unwrap();
        for f in [make_periodic(&[period], values).unwrap(), make_heaviside(), make_ocean(2.0, 16, ARule::Log2).unwrap()] {
            let fast = cube_average(&f, &cube, u128::MAX).unwrap();
            let slow = cube_average_direct(&f, &cube, u128::MAX).unwrap();
            prop_assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn birkhoff_increments_bounded(seed in any::<u64>()) {
        let law = make_step_law(&LawPreset::LazySrw { d: 1, hold: 0.3 }).unwrap();
        let f = make_scenery(1, 3).unwrap();
        let cps: Vec<u64> = (0..=60).collect();
        let rec = run_birkhoff(&law, &f, seed, 0, &cps).unwrap();
        for w in rec.windows(2) {
            prop_assert!((w[1].t - w[0].t).abs() <= f.bound());
        }
    }

    #[test]
    fn occupation_totals_and_decomposition(seed in any::<u64>(), n in 50u64..400) {
        let law = make_step_law(&LawPreset::DriftPareto { v: 0.5, beta: 2.0, k_max: 1000 }).unwrap();
        let f = make_scenery(1, seed ^ 7).unwrap();
        let plan = OccupationPlan { n, eps: 0.2, window_lo: -200, horizon: 60, max_steps: 1_000_000 };
        let run = run_occupation(&law, &f, seed, 0, &plan).unwrap();
        prop_assert_eq!(run.tally.total(), run.tally.horizon);
        prop_assert!(run.decomposition_holds());
    }

    #[test]
    fn pair_symmetry_and_cauchy_schwarz(x0 in -4i64..5, hold in 0.1f64..0.9) {
        let law = make_step_law(&LawPreset::LazySrw { d: 1, hold }).unwrap();
        let f = make_periodic(&[5], vec![1.0, -0.3, 0.8, 0.8, -0.3]).unwrap();
        let a = PairMoments::new(&law, &f, &MomentPlan::new(vec![x0], 10)).unwrap();
        let b = PairMoments::new(&law, &f, &MomentPlan::new(vec![-x0], 10)).unwrap();
        for n1 in 1..=10 {
            for n2 in n1..=10 {
                let e = a.pair(n1, n2).unwrap().value;
                prop_assert!((e - b.pair(n1, n2).unwrap().value).abs() < 1e-12);
                let d1 = a.pair(n1, n1).unwrap().value;
                let d2 = a.pair(n2, n2).unwrap().value;
                prop_assert!(e * e <= d1 * d2 + 1e-12);
            }
        }
    }

    #[test]
    fn ks_permutation_invariant(mut xs in prop::collection::vec(0.0f64..1.0, 1..200), seed in any::<u64>()) {
        let cdf = |x: f64| x;
        let before = ks_distance(&xs, cdf).unwrap();
        xs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(before, ks_distance(&xs, cdf).unwrap());
    }

    #[test]
    fn affine_roundtrip(minus in -5.0f64..5.0, gap in 0.1f64..5.0, n in 1u64..100_000, t in -1e6f64..1e6) {
        let a = AffineReduction::new(minus, minus + gap).unwrap();
        let back = a.expand(n, a.reduce(n, t));
        prop_assert!((back - t).abs() <= 1e-12 * t.abs().max(1.0) * n as f64);
    }

    #[test]
    fn rho_continuous(d in 1usize..=10) {
        let b = (d as f64 - 1.0) / d as f64;
        let upper = d as f64 / 2.0 * (b - 1.0) + 1.0;
        prop_assert!((rho_exponent(d, b).unwrap() - upper).abs() <= 1e-15);
        prop_assert!((rho_exponent(d, b).unwrap() - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn geometric_family(p1 in 0.0f64..0.99, p2 in 0.0f64..0.9, q2 in 0.0f64..0.1) {
        let c = ThreeStateChain::new([p1, 0.0, 1.0 - p1], [q2, p2, 1.0 - p2 - q2], [1.0, 0.0, 0.0]).unwrap();
        let m = exact_occupation_moments(&c).unwrap();
        let mut series = 0.0;
        let mut term = 1.0;
        while term > 1e-18 {
            series += term;
            term *= p1;
        }
        prop_assert!((m.mean1 - series).abs() < 1e-12 * series.max(1.0));
        prop_assert_eq!(m.mean2, 0.0);
        prop_assert_eq!(m.cov, 0.0);
    }
}

#[test]
fn ensemble_merge_is_order_free() {
    let law = make_step_law(&LawPreset::LazySrw { d: 1, hold: 0.5 }).unwrap();
    let f = make_heaviside();
    let cps = [1, 10, 100];
    let whole = run_ensemble(&law, &f, 11, 0..30, &cps).unwrap();
    let a = run_ensemble(&law, &f, 11, 0..12, &cps).unwrap();
    let b = run_ensemble(&law, &f, 11, 12..30, &cps).unwrap();
    assert_eq!(a.clone().merge(b.clone()).unwrap(), whole);
    assert_eq!(b.merge(a.clone()).unwrap(), whole);
    assert!(a.clone().merge(a).is_err());
}

#[test]
fn ensemble_independent_of_thread_count() {
    let law = make_step_law(&LawPreset::LazySrw { d: 2, hold: 0.2 }).unwrap();
    let f = make_scenery(2, 5).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&law, &f, 3, 0..64, &[10, 1000]).unwrap())
    };
    assert_eq!(run(1), run(8));
}
