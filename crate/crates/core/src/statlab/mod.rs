//! Monte Carlo statistics: ensembles, the arcsine law, Kolmogorov-Smirnov
//! distances, affine reduction, growth exponents and exceedance tables.

mod ensemble;

pub use ensemble::{run_ensemble, EnsembleMeta, TrialEnsemble};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkError};
use crate::numeric::{fit_line, mean_var};
use crate::observables::Observable;

/// `(2/pi) arcsin(sqrt z)` on `[0, 1]`.
pub fn arcsine_cdf(z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(WalkError::Domain {
            value: z,
            domain: "[0, 1]",
        });
    }
    Ok(2.0 / PI * z.sqrt().asin())
}

/// Inverse of [`arcsine_cdf`]: `sin^2(pi u / 2)`.
pub fn arcsine_quantile(u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(WalkError::Domain {
            value: u,
            domain: "[0, 1]",
        });
    }
    Ok((PI * u / 2.0).sin().powi(2))
}

/// `sup_x |F_M(x) - cdf(x)|` for the right-continuous empirical CDF `F_M`.
///
/// The reference CDF is assumed continuous; it is evaluated only at sample points.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(WalkError::EmptySample);
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(WalkError::InvalidParameter("non-finite sample value".into()));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let c = cdf(x);
        d = d.max((i + 1) as f64 / m - c).max(c - i as f64 / m);
    }
    Ok(d)
}

/// KS distance of a sample against the arcsine law, values clamped to `[0, 1]`.
pub fn ks_arcsine(sample: &[f64]) -> Result<f64> {
    ks_distance(sample, |x| 2.0 / PI * x.clamp(0.0, 1.0).sqrt().asin())
}

/// The map `T -> (T - N F̄₋) / (N (F̄₊ - F̄₋))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineReduction {
    pub minus: f64,
    pub plus: f64,
}

impl AffineReduction {
    pub fn new(minus: f64, plus: f64) -> Result<Self> {
        if minus == plus || !minus.is_finite() || !plus.is_finite() {
            return Err(WalkError::Precondition(format!(
                "side means must differ (got {minus} and {plus}); use the weak law instead"
            )));
        }
        Ok(Self { minus, plus })
    }

    pub fn from_observable(f: &Observable) -> Result<Self> {
        let s = f
            .side_means()
            .ok_or_else(|| WalkError::Precondition(format!("{} observable has no side means", f.kind())))?;
        Self::new(s.minus, s.plus)
    }

    pub fn reduce(&self, n: u64, t: f64) -> f64 {
        let n = n as f64;
        (t - n * self.minus) / (n * (self.plus - self.minus))
    }

    pub fn expand(&self, n: u64, r: f64) -> f64 {
        let n = n as f64;
        r * n * (self.plus - self.minus) + n * self.minus
    }
}

/// Reduced values `T̃_N / N` of the normalized observable.
pub fn affine_reduce(f: &Observable, n: u64, values: &[f64]) -> Result<Vec<f64>> {
    let a = AffineReduction::from_observable(f)?;
    Ok(values.iter().map(|&t| a.reduce(n, t)).collect())
}

/// Summary statistic of `|T_N|` across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "q")]
pub enum Statistic {
    Rms,
    MeanAbs,
    Quantile(f64),
}

/// One checkpoint of a growth fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: u64,
    pub value: f64,
    pub stderr: f64,
}

/// Fit of `log statistic(T_N)` against `log N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub residuals: Vec<f64>,
    pub rows: Vec<GrowthRow>,
    pub weighted: bool,
    pub warnings: Vec<String>,
}

fn statistic(values: &[f64], stat: Statistic) -> Result<(f64, f64)> {
    let m = values.len();
    if m == 0 {
        return Err(WalkError::EmptySample);
    }
    let mf = m as f64;
    Ok(match stat {
        Statistic::Rms => {
            let sq: Vec<f64> = values.iter().map(|t| t * t).collect();
            let (mean, var) = mean_var(&sq);
            let rms = mean.sqrt();
            let se = if rms > 0.0 { (var / mf).sqrt() / (2.0 * rms) } else { 0.0 };
            (rms, se)
        }
        Statistic::MeanAbs => {
            let abs: Vec<f64> = values.iter().map(|t| t.abs()).collect();
            let (mean, var) = mean_var(&abs);
            (mean, (var / mf).sqrt())
        }
        Statistic::Quantile(q) => {
            if !(0.0..=1.0).contains(&q) {
                return Err(WalkError::Domain {
                    value: q,
                    domain: "[0, 1]",
                });
            }
            let mut abs: Vec<f64> = values.iter().map(|t| t.abs()).collect();
            abs.sort_by(f64::total_cmp);
            let at = |r: f64| abs[(r.round().max(0.0) as usize).min(m - 1)];
            let center = q * (mf - 1.0);
            let half = (mf * q * (1.0 - q)).sqrt();
            (at(center), (at(center + half) - at(center - half)) / 2.0)
        }
    })
}

/// Weighted least squares of `log statistic` against `log N` over checkpoint columns.
///
/// Weights are inverse variances of `log statistic` from the per-checkpoint
/// standard errors; with any zero standard error the fit is unweighted.
pub fn growth_exponent(columns: &[(u64, Vec<f64>)], stat: Statistic) -> Result<GrowthFit> {
    let cols: Vec<&(u64, Vec<f64>)> = columns.iter().filter(|(n, _)| *n > 0).collect();
    if cols.len() < 3 {
        return Err(WalkError::TooFewPoints {
            got: cols.len(),
            need: 3,
        });
    }
    let mut rows = Vec::with_capacity(cols.len());
    for (n, vals) in &cols {
        let (value, stderr) = statistic(vals, stat)?;
        if !(value > 0.0) {
            return Err(WalkError::Precondition(format!("statistic vanishes at N = {n}")));
        }
        rows.push(GrowthRow {
            n: *n,
            value,
            stderr,
        });
    }
    let mut warnings = Vec::new();
    let (n_min, n_max) = (rows[0].n as f64, rows[rows.len() - 1].n as f64);
    if rows.len() < 4 || n_max / n_min < 100.0 {
        warnings.push("fewer than 4 checkpoints or less than 2 decades spanned".to_string());
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.value.ln()).collect();
    let weighted = rows.iter().all(|r| r.stderr > 0.0);
    let w: Vec<f64> = rows.iter().map(|r| (r.value / r.stderr).powi(2)).collect();
    let fit = fit_line(&x, &y, weighted.then_some(w.as_slice()))
        .ok_or_else(|| WalkError::InvalidParameter("checkpoints must be distinct".into()))?;
    Ok(GrowthFit {
        slope: fit.slope,
        intercept: fit.intercept,
        slope_stderr: fit.slope_stderr,
        residuals: fit.residuals,
        rows,
        weighted,
        warnings,
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(WalkError::Domain {
            value: beta,
            domain: "[0, 1)",
        });
    }
    Ok(())
}

/// `rho_d(beta)`: 1/2 for `beta <= (d-1)/d`, else `(d/2)(beta - 1) + 1`.
pub fn rho_exponent(d: usize, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if d == 0 {
        return Err(WalkError::InvalidParameter("d must be at least 1".into()));
    }
    let df = d as f64;
    if beta <= (df - 1.0) / df {
        Ok(0.5)
    } else {
        Ok(df / 2.0 * (beta - 1.0) + 1.0)
    }
}

/// `gamma(d, beta, eps)`: `2 / beta` for d = 1 (infinite at beta = 0), `1 / eps` for d >= 2.
pub fn gamma_threshold(d: usize, beta: f64, eps: f64) -> Result<f64> {
    check_beta(beta)?;
    match d {
        0 => Err(WalkError::InvalidParameter("d must be at least 1".into())),
        1 => Ok(if beta == 0.0 { f64::INFINITY } else { 2.0 / beta }),
        _ => {
            if !(eps > 0.0) {
                return Err(WalkError::Domain {
                    value: eps,
                    domain: "(0, inf)",
                });
            }
            Ok(1.0 / eps)
        }
    }
}

/// Exceedance frequency `P(|T_N / N - F̄| > delta)` at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceRow {
    pub n: u64,
    pub frequency: f64,
    pub stderr: f64,
}

pub fn weak_lln_check(columns: &[(u64, Vec<f64>)], mean: f64, delta: f64) -> Result<Vec<ExceedanceRow>> {
    columns
        .iter()
        .filter(|(n, _)| *n > 0)
        .map(|(n, vals)| {
            if vals.len() < 100 {
                return Err(WalkError::Precondition(format!("need at least 100 trials, got {}", vals.len())));
            }
            let m = vals.len() as f64;
            let hits = vals.iter().filter(|&&t| (t / *n as f64 - mean).abs() > delta).count() as f64;
            let p = hits / m;
            Ok(ExceedanceRow {
                n: *n,
                frequency: p,
                stderr: (p * (1.0 - p) / m).sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{make_constant, make_heaviside};
    use crate::rng::{stream_rng, streams};
    use rand::Rng;

    #[test]
    fn arcsine_values() {
        assert_eq!(arcsine_cdf(0.0).unwrap(), 0.0);
        assert!((arcsine_cdf(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((arcsine_cdf(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((arcsine_cdf(0.25).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(arcsine_cdf(1.5).is_err());
        assert!(arcsine_cdf(-0.1).is_err());
    }

    #[test]
    fn ks_on_quantile_grid() {
        let m = 1000;
        let xs: Vec<f64> = (1..=m)
            .map(|i| arcsine_quantile((i as f64 - 0.5) / m as f64).unwrap())
            .collect();
        assert!(ks_arcsine(&xs).unwrap() <= 0.5 / m as f64 + 1e-12);
    }

    #[test]
    fn ks_point_mass() {
        assert!((ks_arcsine(&[0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!((ks_arcsine(&[0.5, 0.5, 0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ks_arcsine(&[]), Err(WalkError::EmptySample));
    }

    #[test]
    fn ks_inverse_transform_sample() {
        let mut rng = stream_rng(17, 0, streams::SAMPLING);
        let xs: Vec<f64> = (0..2000).map(|_| arcsine_quantile(rng.random::<f64>()).unwrap()).collect();
        assert!(ks_arcsine(&xs).unwrap() < 0.05);
    }

    #[test]
    fn affine_reduction() {
        let h = make_heaviside();
        let r = affine_reduce(&h, 10, &[0.0, 3.0, 10.0]).unwrap();
        assert_eq!(r, vec![0.0, 0.3, 1.0]);
        let g = make_heaviside().affine(2.0, 3.0);
        let r = affine_reduce(&g, 7, &[21.0, 35.0]).unwrap();
        assert_eq!(r, vec![0.0, 1.0]);
        assert!(affine_reduce(&make_constant(1, 1.0).unwrap(), 5, &[1.0]).is_err());
        let a = AffineReduction::from_observable(&g).unwrap();
        for t in [-3.0, 0.0, 12.5, 40.0] {
            assert!((a.expand(7, a.reduce(7, t)) - t).abs() < 1e-12);
        }
    }

    #[test]
    fn growth_of_exact_powers() {
        for sigma in [1.0, 0.75, 0.5] {
            let cols: Vec<(u64, Vec<f64>)> = (4..12)
                .map(|k| {
                    let n = 1u64 << k;
                    (n, vec![3.0 * (n as f64).powf(sigma); 5])
                })
                .collect();
            for stat in [Statistic::Rms, Statistic::MeanAbs, Statistic::Quantile(0.5)] {
                let fit = growth_exponent(&cols, stat).unwrap();
                assert!((fit.slope - sigma).abs() < 1e-9, "{stat:?} {}", fit.slope);
            }
        }
    }

    #[test]
    fn growth_needs_three_points() {
        let cols = vec![(4, vec![1.0]), (8, vec![2.0])];
        assert!(matches!(
            growth_exponent(&cols, Statistic::Rms),
            Err(WalkError::TooFewPoints { got: 2, need: 3 })
        ));
    }

    #[test]
    fn rho_and_gamma() {
        assert_eq!(rho_exponent(1, 0.5).unwrap(), 0.75);
        assert_eq!(rho_exponent(2, 0.5).unwrap(), 0.5);
        assert_eq!(rho_exponent(2, 0.75).unwrap(), 0.75);
        assert_eq!(gamma_threshold(1, 0.5, 0.1).unwrap(), 4.0);
        assert_eq!(gamma_threshold(2, 0.3, 0.1).unwrap(), 10.0);
        assert_eq!(gamma_threshold(1, 0.0, 0.1).unwrap(), f64::INFINITY);
        assert!(rho_exponent(1, 1.0).is_err());
        assert!(gamma_threshold(1, -0.1, 0.1).is_err());
        for d in 1..10 {
            let b = (d as f64 - 1.0) / d as f64;
            let upper = d as f64 / 2.0 * (b - 1.0) + 1.0;
            assert!((rho_exponent(d, b).unwrap() - upper).abs() <= 1e-15);
        }
    }

    #[test]
    fn weak_lln_table() {
        let cols = vec![(10, vec![5.0; 100]), (20, vec![10.0; 100])];
        let rows = weak_lln_check(&cols, 0.5, 0.2).unwrap();
        assert!(rows.iter().all(|r| r.frequency == 0.0));
        assert!(weak_lln_check(&[(10, vec![0.0; 99])], 0.5, 0.2).is_err());
    }
}
