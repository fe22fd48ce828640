use rand::Rng;

use super::StepLaw;
use crate::rng::{stream_rng, streams};

/// Streaming walk S_0 = 0, S_n = S_{n-1} + X_n.
pub struct Walker<'a, R> {
    law: &'a StepLaw,
    rng: R,
    pos: Vec<i64>,
    time: u64,
}

impl<'a, R: Rng> Walker<'a, R> {
    pub fn new(law: &'a StepLaw, rng: R) -> Self {
        Self {
            law,
            rng,
            pos: vec![0; law.dim()],
            time: 0,
        }
    }

    /// Start from `x0` instead of the origin.
    pub fn starting_at(law: &'a StepLaw, rng: R, x0: &[i64]) -> Self {
        assert_eq!(x0.len(), law.dim());
        Self {
            law,
            rng,
            pos: x0.to_vec(),
            time: 0,
        }
    }

    /// Advance one step and return the new position.
    #[inline]
    pub fn step(&mut self) -> &[i64] {
        let i = self.law.sample_index(&mut self.rng);
        let s = self.law.site(i);
        for (p, c) in self.pos.iter_mut().zip(s) {
            *p += c;
        }
        self.time += 1;
        &self.pos
    }

    /// One-dimensional fast path.
    #[inline]
    pub fn step_1d(&mut self) -> i64 {
        self.pos[0] += self.law.sample_1d(&mut self.rng);
        self.time += 1;
        self.pos[0]
    }

    pub fn position(&self) -> &[i64] {
        &self.pos
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn law(&self) -> &StepLaw {
        self.law
    }
}

/// Summary of a sampled path, with the positions kept only on request.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub steps: u64,
    pub final_position: Vec<i64>,
    pub min: Vec<i64>,
    pub max: Vec<i64>,
    /// Flattened S_0..=S_N (stride d) when recording was requested.
    pub positions: Option<Vec<i64>>,
}

impl Trajectory {
    /// S_n from the recorded positions.
    pub fn position(&self, n: u64) -> Option<&[i64]> {
        let d = self.final_position.len();
        let n = n as usize;
        self.positions.as_ref().and_then(|p| p.get(n * d..(n + 1) * d))
    }
}

/// Sample N steps with the stream keyed by `seed`.
pub fn sample_path(law: &StepLaw, seed: u64, steps: u64, record: bool) -> Trajectory {
    let d = law.dim();
    let mut walker = Walker::new(law, stream_rng(seed, 0, streams::STEPS));
    let mut min = vec![0; d];
    let mut max = vec![0; d];
    let mut positions = record.then(|| {
        let mut v = Vec::with_capacity((steps as usize + 1) * d);
        v.extend(std::iter::repeat_n(0, d));
        v
    });
    for _ in 0..steps {
        let pos = walker.step();
        for i in 0..d {
            min[i] = min[i].min(pos[i]);
            max[i] = max[i].max(pos[i]);
        }
        if let Some(p) = positions.as_mut() {
            p.extend_from_slice(pos);
        }
    }
    Trajectory {
        seed,
        steps,
        final_position: walker.position().to_vec(),
        min,
        max,
        positions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_walk::{make_step_law, LawPreset};

    #[test]
    fn zero_steps_at_origin() {
        let law = make_step_law(&LawPreset::LazySrw { d: 2, hold: 0.5 }).unwrap();
        let t = sample_path(&law, 1, 0, true);
        assert_eq!(t.final_position, vec![0, 0]);
        assert_eq!((t.min.clone(), t.max.clone()), (vec![0, 0], vec![0, 0]));
        assert_eq!(t.position(0), Some(&[0i64, 0][..]));
    }

    #[test]
    fn increments_in_support_and_deterministic() {
        let law = make_step_law(&LawPreset::LazySrw { d: 2, hold: 0.25 }).unwrap();
        let a = sample_path(&law, 99, 500, true);
        let b = sample_path(&law, 99, 500, true);
        assert_eq!(a, b);
        let support: Vec<&[i64]> = law.iter().map(|(s, _)| s).collect();
        for n in 1..=500 {
            let (x, y) = (a.position(n - 1).unwrap(), a.position(n).unwrap());
            let inc: Vec<i64> = y.iter().zip(x).map(|(p, q)| p - q).collect();
            assert!(support.contains(&inc.as_slice()));
        }
    }

    #[test]
    fn lazy_mean_step_near_zero() {
        let law = make_step_law(&LawPreset::LazySrw { d: 1, hold: 0.5 }).unwrap();
        let n = 10_000u64;
        let t = sample_path(&law, 5, n, false);
        // mean step variance 1/2; 4 sigma of the empirical mean
        let sigma = (0.5 / n as f64).sqrt();
        assert!((t.final_position[0] as f64 / n as f64).abs() < 4.0 * sigma);
    }

    #[test]
    fn drift_pareto_law_of_large_numbers() {
        let law = make_step_law(&LawPreset::DriftPareto { v: 0.5, beta: 2.0, k_max: 100_000 }).unwrap();
        let var = law.covariance()[0];
        let n = 10_000u64;
        let t = sample_path(&law, 11, n, false);
        let stderr = (var / n as f64).sqrt();
        assert!((t.final_position[0] as f64 / n as f64 - 0.5).abs() < 5.0 * stderr);
    }
}
