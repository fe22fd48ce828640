//! Quasi-periodic observables `F(x) = profile(omega + sum_j x_j alpha_(j))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkError};

/// One term `cos_coef * cos(2 pi <k, theta>) + sin_coef * sin(2 pi <k, theta>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Finite trigonometric polynomial on a torus with zero constant term.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPeriodic {
    terms: Vec<TrigTerm>,
    rotations: Vec<Vec<f64>>,
    phase: Vec<f64>,
}

impl QuasiPeriodic {
    /// `rotations[j]` is `alpha_(j)`, one per lattice coordinate; all vectors
    /// and the phase live on the same torus.
    pub fn new(terms: Vec<TrigTerm>, rotations: Vec<Vec<f64>>, phase: Vec<f64>) -> Result<Self> {
        let k = phase.len();
        if k == 0 || rotations.is_empty() {
            return Err(WalkError::InvalidParameter("empty torus or rotation list".into()));
        }
        if terms.is_empty() {
            return Err(WalkError::InvalidParameter("profile has no terms".into()));
        }
        if let Some(r) = rotations.iter().find(|r| r.len() != k) {
            return Err(WalkError::DimensionMismatch {
                expected: k,
                got: r.len(),
            });
        }
        for t in &terms {
            if t.k.len() != k {
                return Err(WalkError::DimensionMismatch {
                    expected: k,
                    got: t.k.len(),
                });
            }
            if t.k.iter().all(|&c| c == 0) {
                return Err(WalkError::InvalidParameter("profile term with zero frequency".into()));
            }
        }
        Ok(Self {
            terms,
            rotations,
            phase,
        })
    }

    pub fn dim(&self) -> usize {
        self.rotations.len()
    }

    pub fn torus_dim(&self) -> usize {
        self.phase.len()
    }

    pub fn rotations(&self) -> &[Vec<f64>] {
        &self.rotations
    }

    /// Sum of absolute coefficients, an upper bound for |F|.
    pub fn bound(&self) -> f64 {
        self.terms.iter().map(|t| t.cos.abs() + t.sin.abs()).sum()
    }

    pub fn value(&self, x: &[i64]) -> f64 {
        let theta: Vec<f64> = (0..self.phase.len())
            .map(|l| {
                let mut s = self.phase[l].rem_euclid(1.0);
                for (j, &xj) in x.iter().enumerate() {
                    s += (xj as f64 * self.rotations[j][l]).rem_euclid(1.0);
                }
                s.rem_euclid(1.0)
            })
            .collect();
        self.terms
            .iter()
            .map(|t| {
                let arg: f64 = t.k.iter().zip(&theta).map(|(&k, &th)| k as f64 * th).sum();
                let arg = 2.0 * PI * arg.rem_euclid(1.0);
                t.cos * arg.cos() + t.sin * arg.sin()
            })
            .sum()
    }
}

/// Golden mean `(sqrt 5 - 1) / 2`.
pub fn golden_mean() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Scalar rotations `2^{j/(d+1)}`, `j = 1..=d`, on a one-dimensional torus.
///
/// The numbers `1, 2^{1/(d+1)}, ..., 2^{d/(d+1)}` are linearly independent
/// over Q, so the joint rotation is irrational in every direction.
pub fn radical_rotations(d: usize) -> Vec<Vec<f64>> {
    (1..=d).map(|j| vec![2f64.powf(j as f64 / (d as f64 + 1.0))]).collect()
}

/// `min over 0 < |m| <= m_max of |exp(2 pi i <m, alpha>) - 1| * |m|^sigma`.
///
/// The scan is exhaustive over the Euclidean ball (one of each pair `m, -m`).
/// Values that vanish up to rounding are reported as exactly zero.
pub fn diophantine_quality(alpha: &[f64], m_max: u64, sigma: f64) -> Result<f64> {
    if m_max == 0 {
        return Err(WalkError::InvalidParameter("M must be at least 1".into()));
    }
    if alpha.is_empty() {
        return Err(WalkError::InvalidParameter("empty rotation vector".into()));
    }
    let k = alpha.len();
    let r = m_max as i64;
    let r2 = u128::from(m_max) * u128::from(m_max);
    let frac: Vec<f64> = alpha.iter().map(|a| a.rem_euclid(1.0)).collect();
    let mut best = f64::INFINITY;
    let mut m = vec![-r; k];
    m[0] = 0;
    loop {
        let norm2: u128 = m.iter().map(|&c| (c as i128 * c as i128) as u128).sum();
        let first_nonzero = m.iter().find(|&&c| c != 0);
        if norm2 <= r2 && first_nonzero.is_some_and(|&c| c > 0) {
            let mut theta = 0.0;
            let mut scale = 0.0;
            for (&mi, &ai) in m.iter().zip(&frac) {
                theta += (mi as f64 * ai).rem_euclid(1.0);
                scale += (mi as f64 * ai).abs();
            }
            let dist = (theta - theta.round()).abs();
            let dist = if dist <= 8.0 * f64::EPSILON * (1.0 + scale) { 0.0 } else { dist };
            let q = 2.0 * (PI * dist).sin() * (norm2 as f64).sqrt().powf(sigma);
            best = best.min(q);
        }
        // Odometer over the first coordinate in [0, r], the rest in [-r, r].
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if m[i] < r {
                m[i] += 1;
                break;
            }
            m[i] = if i == 0 { 0 } else { -r };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_golden() -> QuasiPeriodic {
        QuasiPeriodic::new(
            vec![TrigTerm {
                k: vec![1],
                cos: 1.0,
                sin: 0.0,
            }],
            vec![vec![golden_mean()]],
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn cos_golden_values() {
        let f = cos_golden();
        assert_eq!(f.value(&[0]), 1.0);
        assert!((f.value(&[1]) - (-0.737_368_878_078_319_9)).abs() < 1e-12);
    }

    #[test]
    fn phase_shift_by_one_is_invisible() {
        let f = cos_golden();
        let g = QuasiPeriodic::new(f.terms.clone(), f.rotations.clone(), vec![1.0]).unwrap();
        for x in -50..50 {
            assert!((f.value(&[x]) - g.value(&[x])).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_constant_term() {
        let t = TrigTerm {
            k: vec![0],
            cos: 1.0,
            sin: 0.0,
        };
        assert!(QuasiPeriodic::new(vec![t], vec![vec![0.3]], vec![0.0]).is_err());
    }

    #[test]
    fn rational_rotation_has_zero_quality() {
        assert_eq!(diophantine_quality(&[3.0 / 7.0], 7, 1.0).unwrap(), 0.0);
        assert!(diophantine_quality(&[3.0 / 7.0], 6, 1.0).unwrap() > 0.0);
        assert_eq!(diophantine_quality(&[0.5, 0.25], 4, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn golden_quality_is_stable() {
        let g = golden_mean();
        let small = diophantine_quality(&[g], 100, 1.0).unwrap();
        let large = diophantine_quality(&[g], 10_000, 1.0).unwrap();
        assert!(large > 0.0);
        assert!(small / large < 2.0);
    }

    #[test]
    fn quality_invariant_under_integer_shift() {
        let g = golden_mean();
        let a = diophantine_quality(&[g], 500, 1.0).unwrap();
        let b = diophantine_quality(&[g + 1.0], 500, 1.0).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn radical_rotations_have_positive_quality() {
        let r: Vec<f64> = radical_rotations(2).into_iter().map(|v| v[0]).collect();
        assert!(diophantine_quality(&r, 30, 2.0).unwrap() > 0.0);
    }
}
