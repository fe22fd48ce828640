//! Block schedule for the ocean observable.
//!
//! F is 1 on `[b_{2k}, b_{2k+1})`, 0 on `[b_{2k+1}, b_{2k+2})`, mirrored to
//! negative sites, with F(0) = 0 and F = 1 on `(0, b_1)`. Blocks grow by the
//! factor `1 + 1/a_n`, so averages over `[0, v]` converge to 1/2 while a walk
//! can still linger inside a single block for a long time.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkError};

/// Smallest admissible `b_1`.
pub const MIN_B1: u64 = 16;

/// Named rules for the slowly growing sequence `a_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ARule {
    /// `1 + floor(log2(n + 1))`.
    #[default]
    Log2,
    /// `1 + floor(log2(n + 1) / 2)`.
    HalfLog2,
}

impl ARule {
    fn raw(self, n: u64) -> u64 {
        let lg = u64::from((n + 1).ilog2());
        match self {
            ARule::Log2 => 1 + lg,
            ARule::HalfLog2 => 1 + lg / 2,
        }
    }
}

/// One row of the literal bound check `a_n <= n < b_n < b_{n+1} < 2^{n+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub n: u64,
    pub a_n: u64,
    pub b_n: u128,
    pub b_next: u128,
    pub a_le_n: bool,
    pub n_lt_b: bool,
    pub b_increasing: bool,
    pub b_next_lt_pow2: bool,
}

impl BoundCheck {
    pub fn all(&self) -> bool {
        self.a_le_n && self.n_lt_b && self.b_increasing && self.b_next_lt_pow2
    }
}

/// Average of F over `[0, b_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: u64,
    pub b_n: u128,
    pub average: f64,
}

/// The sequences `a_n`, `b_n` and the quantities derived from them.
///
/// Blocks are materialized up to the first `b_n` beyond `i64::MAX`, which
/// covers every lattice site; this is a few hundred entries.
#[derive(Debug, Clone, PartialEq)]
pub struct OceanSchedule {
    alpha: f64,
    b1: u64,
    rule: ARule,
    a: Vec<u64>,
    b: Vec<u128>,
    /// Number of sites z in `[1, b_n - 1]` with F(z) = 1.
    ones_before: Vec<u128>,
}

impl OceanSchedule {
    pub fn new(alpha: f64, b1: u64, rule: ARule) -> Result<Self> {
        if b1 < MIN_B1 {
            return Err(WalkError::InvalidParameter(format!("ocean b1 = {b1} < {MIN_B1}")));
        }
        if !(alpha > 0.0 && alpha <= 2.0) || alpha == 1.0 {
            return Err(WalkError::InvalidParameter(format!(
                "ocean alpha = {alpha} must lie in (0, 1) or (1, 2]"
            )));
        }
        let limit = i64::MAX as u128;
        let mut a = vec![1u64];
        let mut b = vec![u128::from(b1)];
        let mut ones_before = vec![u128::from(b1) - 1];
        loop {
            let n = b.len() as u64;
            let (an, bn) = (a[n as usize - 1], b[n as usize - 1]);
            let next = bn + bn / u128::from(an);
            let ones = ones_before[n as usize - 1] + if n.is_multiple_of(2) { next - bn } else { 0 };
            let prev = an;
            let a_next = rule.raw(n + 1).clamp(prev, prev + 1).min(n + 1);
            a.push(a_next);
            b.push(next);
            ones_before.push(ones);
            if next > limit {
                break;
            }
        }
        Ok(Self {
            alpha,
            b1,
            rule,
            a,
            b,
            ones_before,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn b1(&self) -> u64 {
        self.b1
    }

    pub fn rule(&self) -> ARule {
        self.rule
    }

    /// Number of materialized blocks.
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    fn index(&self, n: u64) -> Result<usize> {
        if n == 0 {
            return Err(WalkError::InvalidParameter("block indices start at 1".into()));
        }
        let i = (n - 1) as usize;
        if i >= self.b.len() {
            return Err(WalkError::Overflow(format!("b_{n} exceeds the 64-bit lattice range")));
        }
        Ok(i)
    }

    pub fn a(&self, n: u64) -> Result<u64> {
        Ok(self.a[self.index(n)?])
    }

    pub fn b(&self, n: u64) -> Result<u128> {
        Ok(self.b[self.index(n)?])
    }

    /// `2 c_n = b_n + b_{n+1}`, kept integral.
    pub fn two_c(&self, n: u64) -> Result<u128> {
        Ok(self.b(n)? + self.b(n + 1)?)
    }

    pub fn c(&self, n: u64) -> Result<f64> {
        Ok(self.two_c(n)? as f64 / 2.0)
    }

    /// Half-width `floor(b_n / (4 a_n))` of `I_n`.
    pub fn half_width(&self, n: u64) -> Result<u128> {
        Ok(self.b(n)? / (4 * u128::from(self.a(n)?)))
    }

    /// Integer sites of `I_n = [c_n - w, c_n + w]`, inclusive.
    pub fn interval(&self, n: u64) -> Result<(i64, i64)> {
        let two_c = self.two_c(n)?;
        let w = self.half_width(n)?;
        let lo = (two_c - 2 * w).div_ceil(2);
        let hi = (two_c + 2 * w) / 2;
        let conv = |v: u128| i64::try_from(v).map_err(|_| WalkError::Overflow(format!("I_{n} beyond i64")));
        Ok((conv(lo)?, conv(hi)?))
    }

    /// `t_n = floor(c_n^alpha)`.
    pub fn t(&self, n: u64) -> Result<u64> {
        let two_c = self.two_c(n)?;
        let over = || WalkError::Overflow(format!("t_{n} exceeds u64"));
        if self.alpha == 2.0 {
            let sq = two_c.checked_mul(two_c).ok_or_else(over)? / 4;
            return u64::try_from(sq).map_err(|_| over());
        }
        let v = (two_c as f64 / 2.0).powf(self.alpha).floor();
        if v >= u64::MAX as f64 {
            return Err(over());
        }
        Ok(v as u64)
    }

    /// Value of F at a site of Z.
    #[inline]
    pub fn value(&self, x: i64) -> f64 {
        let y = u128::from(x.unsigned_abs());
        if y == 0 {
            return 0.0;
        }
        if y < self.b[0] {
            return 1.0;
        }
        let n = self.b.partition_point(|&bn| bn <= y);
        if n % 2 == 0 {
            1.0
        } else {
            0.0
        }
    }

    /// Number of z in `[1, y]` with F(z) = 1.
    pub fn ones_upto(&self, y: u64) -> u128 {
        let y = u128::from(y);
        if y < self.b[0] {
            return y;
        }
        let n = self.b.partition_point(|&bn| bn <= y);
        let base = self.ones_before[n - 1];
        if n % 2 == 0 {
            base + (y - self.b[n - 1] + 1)
        } else {
            base
        }
    }

    /// Number of z in `[lo, hi]` with F(z) = 1, in time logarithmic in the range.
    pub fn ones_in(&self, lo: i64, hi: i64) -> u128 {
        if lo > hi {
            return 0;
        }
        let mut total = 0;
        if hi >= 1 {
            let from = lo.max(1) as u64;
            total += self.ones_upto(hi as u64) - self.ones_upto(from - 1);
        }
        if lo <= -1 {
            let near = if hi <= -1 { hi.unsigned_abs() } else { 1 };
            total += self.ones_upto(lo.unsigned_abs()) - self.ones_upto(near - 1);
        }
        total
    }

    /// Literal check of `a_n <= n < b_n < b_{n+1} < 2^{n+1}` for `n = 1..=n_max`.
    pub fn check_bounds(&self, n_max: u64) -> Result<Vec<BoundCheck>> {
        (1..=n_max)
            .map(|n| {
                let (a_n, b_n, b_next) = (self.a(n)?, self.b(n)?, self.b(n + 1)?);
                Ok(BoundCheck {
                    n,
                    a_n,
                    b_n,
                    b_next,
                    a_le_n: a_n <= n,
                    n_lt_b: u128::from(n) < b_n,
                    b_increasing: b_n < b_next,
                    b_next_lt_pow2: n + 1 >= 128 || b_next < 1u128 << (n + 1),
                })
            })
            .collect()
    }

    /// Averages of F over `[0, b_n]` for `n = 1..=n_max`.
    pub fn trace(&self, n_max: u64) -> Result<Vec<TraceRow>> {
        (1..=n_max)
            .map(|n| {
                let b_n = self.b(n)?;
                let ones = self.ones_upto(b_n as u64);
                Ok(TraceRow {
                    n,
                    b_n,
                    average: ones as f64 / (b_n + 1) as f64,
                })
            })
            .collect()
    }
}

/// First index from which every traced average stays within `tol` of 1/2.
pub fn settle_index(trace: &[TraceRow], tol: f64) -> Option<u64> {
    let last_bad = trace.iter().rposition(|r| (r.average - 0.5).abs() >= tol);
    match last_bad {
        None => trace.first().map(|r| r.n),
        Some(i) => trace.get(i + 1).map(|r| r.n),
    }
}
