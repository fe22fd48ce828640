//! Bounded observables on Z^d and cube-average diagnostics.
//!
//! An [`Observable`] is an immutable, deterministic map from lattice sites to
//! reals together with its sup bound and, when known, its mean F̄ and the
//! one-sided means F̄₋, F̄₊ (for observables on Z that settle to different
//! averages on the two half-lines). Observables are built from a serde
//! [`ObservableSpec`] or from the `make_*` constructors.

mod cube;
mod ocean;
mod quasi;

pub use cube::{beta_fit, cube_average, cube_average_direct, BetaFit, BetaFitPlan, BetaRow, CubeSpec};
pub use ocean::{settle_index, ARule, BoundCheck, OceanSchedule, TraceRow, MIN_B1};
pub use quasi::{diophantine_quality, golden_mean, radical_rotations, QuasiPeriodic, TrigTerm};

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkError};
use crate::rng::keyed_hash;

/// Kind tag of an observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    Periodic,
    Quasiperiodic,
    Scenery,
    Heaviside,
    Ocean,
    OceanMultidim,
    Table,
    Affine,
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ObservableKind::Periodic => "periodic",
            ObservableKind::Quasiperiodic => "quasiperiodic",
            ObservableKind::Scenery => "scenery",
            ObservableKind::Heaviside => "heaviside",
            ObservableKind::Ocean => "ocean",
            ObservableKind::OceanMultidim => "ocean_multidim",
            ObservableKind::Table => "table",
            ObservableKind::Affine => "affine",
        };
        f.write_str(s)
    }
}

/// Means over the negative and positive half-lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideMeans {
    pub minus: f64,
    pub plus: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum Repr {
    Periodic { period: Vec<u64>, values: Vec<f64> },
    Quasi(QuasiPeriodic),
    Scenery { seed: u64 },
    Heaviside,
    Ocean(Arc<OceanSchedule>),
    OceanMultidim(Arc<OceanSchedule>),
    Table { values: HashMap<Vec<i64>, f64>, default: f64 },
    Affine { inner: Box<Observable>, scale: f64, shift: f64 },
}

/// A bounded global observable.
#[derive(Debug, Clone)]
pub struct Observable {
    dim: usize,
    repr: Repr,
    bound: f64,
    nominal_mean: Option<f64>,
    side_means: Option<SideMeans>,
    warnings: Vec<String>,
}

/// Serializable summary of an observable for run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableInfo {
    pub kind: ObservableKind,
    pub dim: usize,
    pub bound: f64,
    pub nominal_mean: Option<f64>,
    pub side_means: Option<SideMeans>,
    pub detail: String,
}

impl Observable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ObservableKind {
        match &self.repr {
            Repr::Periodic { .. } => ObservableKind::Periodic,
            Repr::Quasi(_) => ObservableKind::Quasiperiodic,
            Repr::Scenery { .. } => ObservableKind::Scenery,
            Repr::Heaviside => ObservableKind::Heaviside,
            Repr::Ocean(_) => ObservableKind::Ocean,
            Repr::OceanMultidim(_) => ObservableKind::OceanMultidim,
            Repr::Table { .. } => ObservableKind::Table,
            Repr::Affine { .. } => ObservableKind::Affine,
        }
    }

    pub(crate) fn repr(&self) -> &Repr {
        &self.repr
    }

    /// Sup norm bound ‖F‖_∞.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn nominal_mean(&self) -> Option<f64> {
        self.nominal_mean
    }

    pub fn side_means(&self) -> Option<SideMeans> {
        self.side_means
    }

    /// Non-fatal notes collected at construction.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// The block schedule of an ocean observable.
    pub fn ocean_schedule(&self) -> Option<&OceanSchedule> {
        match &self.repr {
            Repr::Ocean(s) | Repr::OceanMultidim(s) => Some(s),
            Repr::Affine { inner, .. } => inner.ocean_schedule(),
            _ => None,
        }
    }

    /// Whether F is identically constant.
    pub fn is_constant(&self) -> bool {
        match &self.repr {
            Repr::Periodic { values, .. } => values.iter().all(|&v| v == values[0]),
            Repr::Affine { inner, scale, .. } => *scale == 0.0 || inner.is_constant(),
            _ => false,
        }
    }

    pub fn info(&self) -> ObservableInfo {
        let detail = match &self.repr {
            Repr::Periodic { period, values } => format!("period {period:?}, values {values:?}"),
            Repr::Quasi(q) => format!("rotations {:?}, torus dim {}", q.rotations(), q.torus_dim()),
            Repr::Scenery { seed } => format!("seed {seed}"),
            Repr::Heaviside => String::new(),
            Repr::Ocean(s) | Repr::OceanMultidim(s) => format!(
                "alpha {}, b1 {}, a_rule {}",
                s.alpha(),
                s.b1(),
                rule_name(s.rule())
            ),
            Repr::Table { values, default } => format!("{} sites, default {default}", values.len()),
            Repr::Affine { inner, scale, shift } => {
                format!("{scale} * [{}] + {shift}", inner.kind())
            }
        };
        ObservableInfo {
            kind: self.kind(),
            dim: self.dim,
            bound: self.bound,
            nominal_mean: self.nominal_mean,
            side_means: self.side_means,
            detail,
        }
    }

    /// F(x). The site must have `dim` coordinates.
    #[inline]
    pub fn eval(&self, x: &[i64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.repr {
            Repr::Periodic { period, values } => {
                let mut idx = 0usize;
                for (&xi, &p) in x.iter().zip(period) {
                    idx = idx * p as usize + xi.rem_euclid(p as i64) as usize;
                }
                values[idx]
            }
            Repr::Quasi(q) => q.value(x),
            Repr::Scenery { seed } => {
                let h = keyed_hash(*seed, x.iter().map(|&c| c as u64));
                if h >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            Repr::Heaviside => {
                if x[0] > 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Repr::Ocean(s) => s.value(x[0]),
            Repr::OceanMultidim(s) => {
                let r = x[0].unsigned_abs();
                if x[1..].iter().all(|c| c.unsigned_abs() <= r) {
                    s.value(x[0])
                } else {
                    0.5
                }
            }
            Repr::Table { values, default } => values.get(x).copied().unwrap_or(*default),
            Repr::Affine { inner, scale, shift } => scale * inner.eval(x) + shift,
        }
    }

    /// F at a site of Z.
    #[inline]
    pub fn eval_1d(&self, x: i64) -> f64 {
        self.eval(std::slice::from_ref(&x))
    }

    /// `scale * F + shift`.
    pub fn affine(self, scale: f64, shift: f64) -> Self {
        let dim = self.dim;
        let bound = scale.abs() * self.bound + shift.abs();
        let nominal_mean = self.nominal_mean.map(|m| scale * m + shift);
        let side_means = self.side_means.map(|s| SideMeans {
            minus: scale * s.minus + shift,
            plus: scale * s.plus + shift,
        });
        let warnings = self.warnings.clone();
        Self {
            dim,
            repr: Repr::Affine {
                inner: Box::new(self),
                scale,
                shift,
            },
            bound,
            nominal_mean,
            side_means,
            warnings,
        }
    }
}

fn rule_name(rule: ARule) -> &'static str {
    match rule {
        ARule::Log2 => "log2",
        ARule::HalfLog2 => "half_log2",
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(WalkError::InvalidParameter("dimension must be at least 1".into()));
    }
    Ok(())
}

fn symmetric_sides(dim: usize, mean: f64) -> Option<SideMeans> {
    (dim == 1).then_some(SideMeans {
        minus: mean,
        plus: mean,
    })
}

/// Periodic observable; `values` is row-major over one period box, last
/// coordinate fastest.
pub fn make_periodic(period: &[u64], values: Vec<f64>) -> Result<Observable> {
    if period.is_empty() || period.contains(&0) {
        return Err(WalkError::InvalidParameter("empty period".into()));
    }
    let cells = period
        .iter()
        .try_fold(1usize, |acc, &p| acc.checked_mul(p as usize))
        .ok_or_else(|| WalkError::Overflow("period box too large".into()))?;
    if values.len() != cells {
        return Err(WalkError::InvalidParameter(format!(
            "value table has {} entries, period box has {cells}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(WalkError::InvalidParameter("non-finite table value".into()));
    }
    let mean = crate::numeric::compensated_sum(values.iter().copied()) / cells as f64;
    let bound = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dim = period.len();
    Ok(Observable {
        dim,
        repr: Repr::Periodic {
            period: period.to_vec(),
            values,
        },
        bound,
        nominal_mean: Some(mean),
        side_means: symmetric_sides(dim, mean),
        warnings: Vec::new(),
    })
}

/// The constant observable.
pub fn make_constant(d: usize, value: f64) -> Result<Observable> {
    check_dim(d)?;
    make_periodic(&vec![1; d], vec![value])
}

/// Quasi-periodic observable. `rotations[j]` is `alpha_(j)`.
pub fn make_quasiperiodic(
    terms: Vec<TrigTerm>,
    rotations: Vec<Vec<f64>>,
    phase: Vec<f64>,
    custom: bool,
) -> Result<Observable> {
    let q = QuasiPeriodic::new(terms, rotations, phase)?;
    let dim = q.dim();
    let mut warnings = Vec::new();
    if custom {
        warnings.push("custom rotation: Diophantine quality is only probed empirically".to_string());
    }
    Ok(Observable {
        dim,
        bound: q.bound(),
        repr: Repr::Quasi(q),
        nominal_mean: Some(0.0),
        side_means: symmetric_sides(dim, 0.0),
        warnings,
    })
}

/// Random ±1 scenery from a stateless keyed hash.
pub fn make_scenery(d: usize, seed: u64) -> Result<Observable> {
    check_dim(d)?;
    Ok(Observable {
        dim: d,
        repr: Repr::Scenery { seed },
        bound: 1.0,
        nominal_mean: Some(0.0),
        side_means: symmetric_sides(d, 0.0),
        warnings: Vec::new(),
    })
}

/// Indicator of the positive half-line.
pub fn make_heaviside() -> Observable {
    Observable {
        dim: 1,
        repr: Repr::Heaviside,
        bound: 1.0,
        nominal_mean: None,
        side_means: Some(SideMeans { minus: 0.0, plus: 1.0 }),
        warnings: Vec::new(),
    }
}

/// Ocean observable on Z with its block schedule.
pub fn make_ocean(alpha: f64, b1: u64, rule: ARule) -> Result<Observable> {
    let s = OceanSchedule::new(alpha, b1, rule)?;
    Ok(Observable {
        dim: 1,
        repr: Repr::Ocean(Arc::new(s)),
        bound: 1.0,
        nominal_mean: Some(0.5),
        side_means: Some(SideMeans { minus: 0.5, plus: 0.5 }),
        warnings: Vec::new(),
    })
}

/// `F(x_1)` where `|x_i| <= |x_1|` for all i, 1/2 elsewhere.
pub fn make_ocean_multidim(d: usize, ocean: &Observable) -> Result<Observable> {
    if d < 2 {
        return Err(WalkError::InvalidParameter("multidimensional ocean needs d >= 2".into()));
    }
    let Repr::Ocean(s) = &ocean.repr else {
        return Err(WalkError::InvalidParameter("a one-dimensional ocean observable is required".into()));
    };
    Ok(Observable {
        dim: d,
        repr: Repr::OceanMultidim(Arc::clone(s)),
        bound: 1.0,
        nominal_mean: Some(0.5),
        side_means: None,
        warnings: Vec::new(),
    })
}

/// Finitely many explicit values on top of a constant background.
pub fn make_table(d: usize, rows: &[TableValue], default: f64) -> Result<Observable> {
    check_dim(d)?;
    let mut values = HashMap::with_capacity(rows.len());
    for r in rows {
        if r.site.len() != d {
            return Err(WalkError::DimensionMismatch {
                expected: d,
                got: r.site.len(),
            });
        }
        if !r.value.is_finite() {
            return Err(WalkError::InvalidParameter("non-finite table value".into()));
        }
        if values.insert(r.site.clone(), r.value).is_some() {
            return Err(WalkError::InvalidParameter(format!("duplicate table site {:?}", r.site)));
        }
    }
    let bound = values.values().fold(default.abs(), |m: f64, v| m.max(v.abs()));
    Ok(Observable {
        dim: d,
        repr: Repr::Table { values, default },
        bound,
        nominal_mean: Some(default),
        side_means: symmetric_sides(d, default),
        warnings: Vec::new(),
    })
}

/// One `(site, value)` row of a table observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableValue {
    pub site: Vec<i64>,
    pub value: f64,
}

/// Named trigonometric profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedProfile {
    /// `cos(2 pi theta_1)`.
    Cos,
    /// `sin(2 pi theta_1)`.
    Sin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Named(NamedProfile),
    Terms(Vec<TrigTerm>),
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Named(NamedProfile::Cos)
    }
}

/// Rotation presets: the golden mean (d = 1) and the radical family `2^{j/(d+1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedRotation {
    Golden,
    Radical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RotationSpec {
    Named(NamedRotation),
    Explicit(Vec<Vec<f64>>),
}

fn default_alpha() -> f64 {
    2.0
}

fn default_b1() -> u64 {
    16
}

fn default_scenery_seed() -> u64 {
    1
}

/// Observable declaration as it appears in a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Constant {
        d: usize,
        value: f64,
    },
    Periodic {
        period: Vec<u64>,
        values: Vec<f64>,
    },
    Quasiperiodic {
        d: usize,
        #[serde(default)]
        profile: ProfileSpec,
        #[serde(default)]
        rotation: Option<RotationSpec>,
        #[serde(default)]
        phase: Option<Vec<f64>>,
    },
    Scenery {
        d: usize,
        #[serde(default = "default_scenery_seed")]
        seed: u64,
    },
    Heaviside,
    Ocean {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_b1")]
        b1: u64,
        #[serde(default)]
        a_rule: ARule,
    },
    OceanMultidim {
        d: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_b1")]
        b1: u64,
        #[serde(default)]
        a_rule: ARule,
    },
    /// Explicit values; `csv` names a file of `x1,..,xd,value` rows that the
    /// caller must load into `rows` before building.
    Table {
        d: usize,
        #[serde(default)]
        rows: Vec<TableValue>,
        #[serde(default)]
        csv: Option<String>,
        #[serde(default)]
        default: f64,
    },
    Affine {
        scale: f64,
        shift: f64,
        inner: Box<ObservableSpec>,
    },
}

impl ObservableSpec {
    pub fn build(&self) -> Result<Observable> {
        match self {
            ObservableSpec::Constant { d, value } => make_constant(*d, *value),
            ObservableSpec::Periodic { period, values } => make_periodic(period, values.clone()),
            ObservableSpec::Quasiperiodic {
                d,
                profile,
                rotation,
                phase,
            } => {
                check_dim(*d)?;
                let (rotations, custom) = match rotation {
                    Some(RotationSpec::Explicit(r)) => (r.clone(), true),
                    Some(RotationSpec::Named(NamedRotation::Golden)) => {
                        if *d != 1 {
                            return Err(WalkError::InvalidParameter(
                                "golden rotation is one-dimensional; use radical for d >= 2".into(),
                            ));
                        }
                        (vec![vec![golden_mean()]], false)
                    }
                    Some(RotationSpec::Named(NamedRotation::Radical)) => (radical_rotations(*d), false),
                    None if *d == 1 => (vec![vec![golden_mean()]], false),
                    None => (radical_rotations(*d), false),
                };
                if rotations.len() != *d {
                    return Err(WalkError::DimensionMismatch {
                        expected: *d,
                        got: rotations.len(),
                    });
                }
                let k = rotations[0].len();
                let unit = |c: usize| {
                    let mut v = vec![0; k];
                    v[0] = 1;
                    vec![TrigTerm {
                        k: v,
                        cos: if c == 0 { 1.0 } else { 0.0 },
                        sin: if c == 1 { 1.0 } else { 0.0 },
                    }]
                };
                let terms = match profile {
                    ProfileSpec::Named(NamedProfile::Cos) => unit(0),
                    ProfileSpec::Named(NamedProfile::Sin) => unit(1),
                    ProfileSpec::Terms(t) => t.clone(),
                };
                let phase = phase.clone().unwrap_or_else(|| vec![0.0; k]);
                make_quasiperiodic(terms, rotations, phase, custom)
            }
            ObservableSpec::Scenery { d, seed } => make_scenery(*d, *seed),
            ObservableSpec::Heaviside => Ok(make_heaviside()),
            ObservableSpec::Ocean { alpha, b1, a_rule } => make_ocean(*alpha, *b1, *a_rule),
            ObservableSpec::OceanMultidim { d, alpha, b1, a_rule } => {
                make_ocean_multidim(*d, &make_ocean(*alpha, *b1, *a_rule)?)
            }
            ObservableSpec::Table { d, rows, csv, default } => {
                if let Some(path) = csv {
                    return Err(WalkError::Precondition(format!("table csv '{path}' not loaded")));
                }
                make_table(*d, rows, *default)
            }
            ObservableSpec::Affine { scale, shift, inner } => Ok(inner.build()?.affine(*scale, *shift)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_parity() {
        let f = make_periodic(&[2], vec![1.0, -1.0]).unwrap();
        assert_eq!(f.eval_1d(5), -1.0);
        assert_eq!(f.eval_1d(-4), 1.0);
        assert_eq!(f.nominal_mean(), Some(0.0));
        assert!(make_periodic(&[], vec![]).is_err());
        assert!(make_periodic(&[3], vec![1.0]).is_err());
    }

    #[test]
    fn periodic_is_periodic_2d() {
        let f = make_periodic(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(f.eval(&[0, 2]), 3.0);
        assert_eq!(f.eval(&[1, 0]), 4.0);
        for x in -4..4 {
            for y in -4..4 {
                assert_eq!(f.eval(&[x, y]), f.eval(&[x + 2 * 5, y - 3 * 7]));
            }
        }
    }

    #[test]
    fn scenery_is_pure_and_balanced() {
        let f = make_scenery(1, 7).unwrap();
        assert_eq!(f.eval_1d(123), f.eval_1d(123));
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|x| f.eval_1d(x)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4e-3, "mean {mean}");
    }

    #[test]
    fn scenery_seeds_decorrelate() {
        let f = make_scenery(1, 1).unwrap();
        let g = make_scenery(1, 2).unwrap();
        let n = 100_000;
        let corr: f64 = (0..n).map(|x| f.eval_1d(x) * g.eval_1d(x)).sum::<f64>() / n as f64;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn heaviside_values() {
        let h = make_heaviside();
        assert_eq!((h.eval_1d(1), h.eval_1d(0), h.eval_1d(-5)), (1.0, 0.0, 0.0));
        assert_eq!(h.side_means(), Some(SideMeans { minus: 0.0, plus: 1.0 }));
    }

    #[test]
    fn ocean_values() {
        let f = make_ocean(2.0, 16, ARule::Log2).unwrap();
        assert_eq!(f.eval_1d(0), 0.0);
        assert_eq!(f.eval_1d(5), 1.0);
        let v = f.eval_1d(20);
        assert!(v == 0.0 || v == 1.0);
        assert_eq!(v, f.eval_1d(-20));
        // [16, 32) is block 1, odd.
        assert_eq!(v, 0.0);
        assert_eq!(f.eval_1d(32), 1.0);
    }

    #[test]
    fn ocean_multidim_values() {
        let f = make_ocean(2.0, 16, ARule::Log2).unwrap();
        let g = make_ocean_multidim(3, &f).unwrap();
        assert_eq!(g.eval(&[5, 0, 0]), f.eval_1d(5));
        assert_eq!(g.eval(&[20, -20, 3]), f.eval_1d(20));
        let g2 = make_ocean_multidim(2, &f).unwrap();
        assert_eq!(g2.eval(&[1, 7]), 0.5);
        for x in -40..40 {
            for y in -40..40 {
                assert_eq!(g2.eval(&[x, y]), g2.eval(&[-x, y]));
            }
        }
        assert!(make_ocean_multidim(1, &f).is_err());
        assert!(make_ocean_multidim(2, &make_heaviside()).is_err());
    }

    #[test]
    fn affine_tracks_means() {
        let f = make_heaviside().affine(2.0, 3.0);
        assert_eq!(f.eval_1d(4), 5.0);
        assert_eq!(f.eval_1d(-4), 3.0);
        assert_eq!(f.side_means(), Some(SideMeans { minus: 3.0, plus: 5.0 }));
        assert_eq!(f.bound(), 5.0);
    }

    #[test]
    fn table_lookup() {
        let rows = vec![
            TableValue {
                site: vec![0, 1],
                value: 2.5,
            },
            TableValue {
                site: vec![-1, 0],
                value: -3.0,
            },
        ];
        let f = make_table(2, &rows, 0.25).unwrap();
        assert_eq!(f.eval(&[0, 1]), 2.5);
        assert_eq!(f.eval(&[7, 7]), 0.25);
        assert_eq!(f.bound(), 3.0);
        assert!(make_table(1, &rows, 0.0).is_err());
    }

    #[test]
    fn spec_builds() {
        let spec = ObservableSpec::Quasiperiodic {
            d: 2,
            profile: ProfileSpec::default(),
            rotation: None,
            phase: None,
        };
        let f = spec.build().unwrap();
        assert_eq!(f.dim(), 2);
        assert_eq!(f.eval(&[0, 0]), 1.0);
        let spec = ObservableSpec::Quasiperiodic {
            d: 1,
            profile: ProfileSpec::default(),
            rotation: Some(RotationSpec::Explicit(vec![vec![0.3]])),
            phase: None,
        };
        assert_eq!(spec.build().unwrap().warnings().len(), 1);
        let spec = ObservableSpec::Table {
            d: 1,
            rows: vec![],
            csv: Some("t.csv".into()),
            default: 0.0,
        };
        assert!(spec.build().is_err());
    }

    #[test]
    fn bound_holds_on_probes() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(3, 0, 0);
        let obs = [
            make_periodic(&[3], vec![0.5, -2.0, 1.0]).unwrap(),
            ObservableSpec::Quasiperiodic {
                d: 1,
                profile: ProfileSpec::default(),
                rotation: None,
                phase: Some(vec![0.1]),
            }
            .build()
            .unwrap(),
            make_scenery(1, 9).unwrap(),
            make_ocean(2.0, 16, ARule::Log2).unwrap().affine(-3.0, 1.0),
        ];
        for f in &obs {
            for _ in 0..100_000 {
                let x = rng.random_range(-1_000_000_000i64..1_000_000_000);
                assert!(f.eval_1d(x).abs() <= f.bound());
            }
        }
    }
}
