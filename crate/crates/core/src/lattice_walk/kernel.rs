use rayon::prelude::*;

use super::StepLaw;
use crate::error::{Result, WalkError};
use crate::numeric::compensated_sum;

/// Window management for [`LatticeKernel::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPolicy {
    /// Boundary slabs whose largest site mass is below this are trimmed.
    pub trim_threshold: f64,
    /// Trimming stops once the accumulated truncated mass would pass this.
    pub max_truncated: f64,
    /// Largest window (number of sites) allowed.
    pub max_sites: usize,
}

impl Default for KernelPolicy {
    fn default() -> Self {
        Self {
            trim_threshold: 1e-30,
            max_truncated: 1e-9,
            max_sites: 50_000_000,
        }
    }
}

impl KernelPolicy {
    /// Never trims: the window holds the full reachable support.
    pub fn exact() -> Self {
        Self {
            trim_threshold: 0.0,
            max_truncated: 0.0,
            ..Self::default()
        }
    }
}

/// The distribution H(n, .) of S_n on a box window.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeKernel {
    time: u64,
    lo: Vec<i64>,
    shape: Vec<usize>,
    /// Row-major, last coordinate fastest.
    values: Vec<f64>,
    truncated_mass: f64,
}

const PAR_MIN_SITES: usize = 1 << 15;

impl LatticeKernel {
    /// H(0, .) = delta at the origin.
    pub fn delta(dim: usize) -> Self {
        Self {
            time: 0,
            lo: vec![0; dim],
            shape: vec![1; dim],
            values: vec![1.0],
            truncated_mass: 0.0,
        }
    }

    /// H(n, .) by n successive convolutions.
    pub fn at_time(law: &StepLaw, n: u64, policy: &KernelPolicy) -> Result<Self> {
        let mut k = Self::delta(law.dim());
        for _ in 0..n {
            k = k.advance(law, policy)?;
        }
        Ok(k)
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Inclusive window corners.
    pub fn window(&self) -> (Vec<i64>, Vec<i64>) {
        let hi = self.lo.iter().zip(&self.shape).map(|(l, s)| l + *s as i64 - 1).collect();
        (self.lo.clone(), hi)
    }

    pub fn num_sites(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.values.iter().copied())
    }

    fn index_of(&self, site: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for ((&x, &l), &s) in site.iter().zip(&self.lo).zip(&self.shape) {
            let off = x - l;
            if off < 0 || off >= s as i64 {
                return None;
            }
            idx = idx * s + off as usize;
        }
        Some(idx)
    }

    /// Site coordinates of a flat index.
    pub fn site_of(&self, mut idx: usize) -> Vec<i64> {
        let mut site = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            site[k] = self.lo[k] + (idx % self.shape[k]) as i64;
            idx /= self.shape[k];
        }
        site
    }

    /// H(n, site); zero outside the window.
    pub fn get(&self, site: &[i64]) -> f64 {
        assert_eq!(site.len(), self.dim());
        self.index_of(site).map_or(0.0, |i| self.values[i])
    }

    /// All (site, mass) pairs of the window in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.site_of(i), v))
    }

    /// One convolution step: H(n+1, .) = H(n, .) * law.
    pub fn advance(&self, law: &StepLaw, policy: &KernelPolicy) -> Result<Self> {
        if law.is_heavy_tailed() {
            return Err(WalkError::HeavyTailKernel(law.name().to_string()));
        }
        if law.dim() != self.dim() {
            return Err(WalkError::DimensionMismatch {
                expected: self.dim(),
                got: law.dim(),
            });
        }
        let d = self.dim();
        let (smin, smax) = law.support_bounds();
        let new_lo: Vec<i64> = self.lo.iter().zip(&smin).map(|(l, s)| l + s).collect();
        let new_shape: Vec<usize> = (0..d).map(|k| self.shape[k] + (smax[k] - smin[k]) as usize).collect();
        let required = new_shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s)).unwrap_or(usize::MAX);
        if required > policy.max_sites {
            return Err(WalkError::WindowOverflow {
                required,
                limit: policy.max_sites,
            });
        }

        let row_len = new_shape[d - 1];
        let old_row_len = self.shape[d - 1];
        let prefix_shape_new = &new_shape[..d - 1];
        let prefix_shape_old = &self.shape[..d - 1];
        let mut values = vec![0.0; required];

        let fill_row = |row_idx: usize, out: &mut [f64]| {
            // decode the output row prefix
            let mut prefix = vec![0i64; d - 1];
            let mut r = row_idx;
            for k in (0..d - 1).rev() {
                prefix[k] = (r % prefix_shape_new[k]) as i64;
                r /= prefix_shape_new[k];
            }
            for (s, p) in law.iter() {
                // source row: ix = iy + smin - s per prefix coordinate
                let mut src_row = 0usize;
                let mut inside = true;
                for k in 0..d - 1 {
                    let ix = prefix[k] + smin[k] - s[k];
                    if ix < 0 || ix >= prefix_shape_old[k] as i64 {
                        inside = false;
                        break;
                    }
                    src_row = src_row * prefix_shape_old[k] + ix as usize;
                }
                if !inside {
                    continue;
                }
                let shift = (s[d - 1] - smin[d - 1]) as usize;
                let src = &self.values[src_row * old_row_len..(src_row + 1) * old_row_len];
                for (o, &v) in out[shift..shift + old_row_len].iter_mut().zip(src) {
                    *o += p * v;
                }
            }
        };

        if required >= PAR_MIN_SITES && d > 1 {
            values
                .par_chunks_mut(row_len)
                .enumerate()
                .for_each(|(row, out)| fill_row(row, out));
        } else {
            values
                .chunks_mut(row_len)
                .enumerate()
                .for_each(|(row, out)| fill_row(row, out));
        }

        let next = Self {
            time: self.time + 1,
            lo: new_lo,
            shape: new_shape,
            values,
            truncated_mass: self.truncated_mass,
        };
        Ok(next.trimmed(policy))
    }

    /// Drop boundary slabs that are negligible under `policy`.
    fn trimmed(self, policy: &KernelPolicy) -> Self {
        if policy.trim_threshold <= 0.0 {
            return self;
        }
        let d = self.dim();
        // per-dimension marginal maxima over the current box
        let mut marg_max: Vec<Vec<f64>> = self.shape.iter().map(|&s| vec![0.0; s]).collect();
        let mut idx = vec![0usize; d];
        for &v in &self.values {
            for k in 0..d {
                let m = &mut marg_max[k][idx[k]];
                if v > *m {
                    *m = v;
                }
            }
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < self.shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        let mut begin = vec![0usize; d];
        let mut end = self.shape.clone();
        for k in 0..d {
            while end[k] - begin[k] > 1 && marg_max[k][begin[k]] < policy.trim_threshold {
                begin[k] += 1;
            }
            while end[k] - begin[k] > 1 && marg_max[k][end[k] - 1] < policy.trim_threshold {
                end[k] -= 1;
            }
        }
        if begin.iter().all(|&b| b == 0) && end == self.shape {
            return self;
        }
        let new_shape: Vec<usize> = (0..d).map(|k| end[k] - begin[k]).collect();
        let total: usize = new_shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut sub = vec![0usize; d];
        for _ in 0..total {
            let mut flat = 0usize;
            for k in 0..d {
                flat = flat * self.shape[k] + begin[k] + sub[k];
            }
            values.push(self.values[flat]);
            for k in (0..d).rev() {
                sub[k] += 1;
                if sub[k] < new_shape[k] {
                    break;
                }
                sub[k] = 0;
            }
        }
        let removed = (compensated_sum(self.values.iter().copied()) - compensated_sum(values.iter().copied())).max(0.0);
        if self.truncated_mass + removed > policy.max_truncated {
            return self;
        }
        Self {
            time: self.time,
            lo: (0..d).map(|k| self.lo[k] + begin[k] as i64).collect(),
            shape: new_shape,
            values,
            truncated_mass: self.truncated_mass + removed,
        }
    }

    /// CSV snapshot: a `# n=.. truncated_mass=..` line, a header
    /// `x1,..,xd,mass`, then one row per site.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let d = self.dim();
        let mut out = String::new();
        writeln!(out, "# n={} truncated_mass={}", self.time, self.truncated_mass).unwrap();
        let header: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["mass".to_string()]).collect();
        writeln!(out, "{}", header.join(",")).unwrap();
        for (site, v) in self.iter() {
            for c in &site {
                write!(out, "{c},").unwrap();
            }
            writeln!(out, "{v}").unwrap();
        }
        out
    }
}
