//! Small numeric helpers shared by the fitting and reduction code.

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().collect::<CompensatedSum>().value()
}

/// Result of a straight-line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    /// Standard error of the slope (NaN when fewer than three points).
    pub slope_stderr: f64,
}

/// Weighted least squares line fit. `weights` of `None` means unit weights.
///
/// Returns `None` when fewer than two points are given or all `x` coincide.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Option<LineFit> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw = compensated_sum((0..n).map(w));
    let mx = compensated_sum((0..n).map(|i| w(i) * x[i])) / sw;
    let my = compensated_sum((0..n).map(|i| w(i) * y[i])) / sw;
    let sxx = compensated_sum((0..n).map(|i| w(i) * (x[i] - mx) * (x[i] - mx)));
    if sxx <= 0.0 {
        return None;
    }
    let sxy = compensated_sum((0..n).map(|i| w(i) * (x[i] - mx) * (y[i] - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - intercept - slope * x[i]).collect();
    let slope_stderr = if n > 2 {
        let rss = compensated_sum((0..n).map(|i| w(i) * residuals[i] * residuals[i]));
        (rss / (n as f64 - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(LineFit {
        slope,
        intercept,
        residuals,
        slope_stderr,
    })
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
    (mean, ss / (n - 1.0))
}

/// Greatest common divisor of absolute values; `gcd(0, 0) = 0`.
pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

/// Whether the integer vectors generate all of Z^d as a group.
///
/// Runs a column-wise Euclidean reduction to Hermite form; the vectors
/// generate Z^d iff every pivot ends up being +-1.
pub fn generates_full_lattice(vectors: &[Vec<i64>], dim: usize) -> bool {
    let mut rows: Vec<Vec<i128>> = vectors
        .iter()
        .filter(|v| v.iter().any(|&c| c != 0))
        .map(|v| v.iter().map(|&c| c as i128).collect())
        .collect();
    // Column `col` is reduced among rows[col..]; its pivot lands in row `col`.
    for col in 0..dim {
        loop {
            let best = (col..rows.len())
                .filter(|&r| rows[r][col] != 0)
                .min_by_key(|&r| rows[r][col].abs());
            let Some(b) = best else { return false };
            rows.swap(col, b);
            let (head, tail) = rows.split_at_mut(col + 1);
            let pivot = &head[col];
            for row in tail.iter_mut() {
                let q = row[col] / pivot[col];
                if q != 0 {
                    for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                        *x -= q * p;
                    }
                }
            }
            if tail.iter().all(|r| r[col] == 0) {
                break;
            }
        }
        if rows[col][col].abs() != 1 {
            return false;
        }
    }
    true
}
