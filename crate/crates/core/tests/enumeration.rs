//! Exact moments checked against brute-force enumeration of every path.

use walklab_core::lattice_walk::{make_step_law, LawPreset, StepLaw, TableEntry};
use walklab_core::moments::{exact_mean_t, exact_pair_moment, exact_second_moment, MomentPlan, PairMoments, second_moment_by_pairs};
use walklab_core::observables::{make_heaviside, make_periodic, make_scenery, Observable};

/// For every path of `n` steps, `F(S_1), ..., F(S_n)` and its probability.
fn enumerate(law: &StepLaw, f: &Observable, x0: &[i64], n: usize) -> Vec<(f64, Vec<f64>)> {
    let steps: Vec<(Vec<i64>, f64)> = law.iter().map(|(s, p)| (s.to_vec(), p)).collect();
    let mut out = Vec::new();
    let mut stack = vec![(x0.to_vec(), 1.0, Vec::new())];
    while let Some((x, p, vals)) = stack.pop() {
        if vals.len() == n {
            out.push((p, vals));
            continue;
        }
        for (s, q) in &steps {
            let y: Vec<i64> = x.iter().zip(s).map(|(a, b)| a + b).collect();
            let mut v = vals.clone();
            v.push(f.eval(&y));
            stack.push((y, p * q, v));
        }
    }
    out
}

fn cases() -> Vec<(StepLaw, Observable, Vec<i64>, usize)> {
    let lazy1 = make_step_law(&LawPreset::LazySrw { d: 1, hold: 0.3 }).unwrap();
    let skew = make_step_law(&LawPreset::ZeroMeanFiniteVar {
        table: vec![
            TableEntry::new(vec![-1], 0.5),
            TableEntry::new(vec![0], 0.25),
            TableEntry::new(vec![2], 0.25),
        ],
    })
    .unwrap();
    let lazy2 = make_step_law(&LawPreset::LazySrw { d: 2, hold: 0.2 }).unwrap();
    vec![
        (lazy1.clone(), make_scenery(1, 9).unwrap(), vec![0], 7),
        (lazy1, make_heaviside(), vec![-1], 7),
        (skew, make_periodic(&[3], vec![1.0, -0.5, 2.0]).unwrap(), vec![1], 6),
        (lazy2, make_scenery(2, 4).unwrap(), vec![1, -1], 5),
    ]
}

#[test]
fn mean_second_moment_and_pairs_match_enumeration() {
    for (law, f, x0, n) in cases() {
        let paths = enumerate(&law, &f, &x0, n);
        let total: f64 = paths.iter().map(|p| p.0).sum();
        assert!((total - 1.0).abs() < 1e-12);

        let plan = MomentPlan::new(x0.clone(), n as u64);
        let mean = exact_mean_t(&law, &f, &plan).unwrap();
        let rows = exact_second_moment(&law, &f, &plan).unwrap();
        let pm = PairMoments::new(&law, &f, &plan).unwrap();
        for j in 1..=n {
            let (m1, m2) = paths.iter().fold((0.0, 0.0), |(a, b), (p, v)| {
                let t: f64 = v[..j].iter().sum();
                (a + p * t, b + p * t * t)
            });
            assert!((mean.cumulative[j] - m1).abs() < 1e-12, "{} mean at {j}", law.name());
            assert!((rows[j].mean - m1).abs() < 1e-12);
            assert!((rows[j].second - m2).abs() < 1e-11, "{} second at {j}", law.name());
            assert!((second_moment_by_pairs(&pm, j as u64).unwrap() - m2).abs() < 1e-11);
        }
        for a in 1..=n {
            for b in a..=n {
                let e: f64 = paths.iter().map(|(p, v)| p * v[a - 1] * v[b - 1]).sum();
                let got = exact_pair_moment(&law, &f, &plan, a as u64, b as u64).unwrap();
                assert!((got - e).abs() < 1e-12, "pair ({a}, {b})");
            }
        }
    }
}

#[test]
fn parity_moments_by_enumeration() {
    let law = make_step_law(&LawPreset::LazySrw { d: 1, hold: 0.5 }).unwrap();
    let f = make_periodic(&[2], vec![1.0, -1.0]).unwrap();
    let paths = enumerate(&law, &f, &[0], 8);
    let (m1, m2) = paths.iter().fold((0.0, 0.0), |(a, b), (p, v)| {
        let t: f64 = v.iter().sum();
        (a + p * t, b + p * t * t)
    });
    assert!(m1.abs() < 1e-12);
    assert!((m2 - 8.0).abs() < 1e-12);
    let rows = exact_second_moment(&law, &f, &MomentPlan::new(vec![0], 8)).unwrap();
    assert!(rows[8].mean.abs() < 1e-12);
    assert!((rows[8].var - 8.0).abs() < 1e-12);
}
