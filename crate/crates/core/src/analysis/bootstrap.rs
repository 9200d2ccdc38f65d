//! Nonparametric bootstrap over seeds.
//!
//! Resampling with replacement is represented by a count matrix `C` (one row
//! of multinomial counts per resample), so resampled means of every cell at
//! once are the product `C·V/n` for a seed-by-cell value matrix `V`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Domain, NoiseKey};

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_SEED: u64 = 0x5eed_b007;
/// Columns per matrix-product task; fixed so results do not depend on the
/// worker count.
const COLUMN_BLOCK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            seed: DEFAULT_SEED,
            level: 0.95,
        }
    }
}

impl Bootstrap {
    pub fn validate(&self) -> Result<()> {
        if self.resamples < 2 {
            return Err(Error::Input("bootstrap needs at least 2 resamples".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Input("confidence level must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// `resamples × n` multinomial counts, row-major. `stream` separates
    /// independent count matrices drawn under the same seed.
    pub fn counts(&self, n: usize, stream: u64) -> Vec<f64> {
        let mut counts = vec![0.0; self.resamples * n];
        counts.par_chunks_mut(n).enumerate().for_each(|(b, row)| {
            let mut rng = NoiseKey::new(self.seed, stream, b as u64).stream(Domain::Bootstrap, 0);
            for _ in 0..n {
                row[rng.gen_range(0..n)] += 1.0;
            }
        });
        counts
    }

    /// Resampled means `C·V/n` for `V` with `n` rows and `cols` columns,
    /// returned as `resamples × cols`.
    pub fn resampled_means(&self, counts: &[f64], values: &[f64], n: usize, cols: usize) -> Vec<f64> {
        let b = self.resamples;
        assert_eq!(counts.len(), b * n);
        assert_eq!(values.len(), n * cols);
        let blocks: Vec<usize> = (0..cols).step_by(COLUMN_BLOCK).collect();
        let parts: Vec<Vec<f64>> = blocks
            .par_iter()
            .map(|&c0| {
                let w = COLUMN_BLOCK.min(cols - c0);
                let mut out = vec![0.0; b * w];
                // SAFETY: the pointers and strides describe in-bounds
                // row-major views of `counts` (b × n), columns c0..c0+w of
                // `values` (n × cols) and `out` (b × w).
                unsafe {
                    matrixmultiply::dgemm(
                        b,
                        n,
                        w,
                        1.0 / n as f64,
                        counts.as_ptr(),
                        n as isize,
                        1,
                        values.as_ptr().add(c0),
                        cols as isize,
                        1,
                        0.0,
                        out.as_mut_ptr(),
                        w as isize,
                        1,
                    );
                }
                out
            })
            .collect();
        let mut means = vec![0.0; b * cols];
        for (&c0, part) in blocks.iter().zip(&parts) {
            let w = COLUMN_BLOCK.min(cols - c0);
            for r in 0..b {
                means[r * cols + c0..r * cols + c0 + w].copy_from_slice(&part[r * w..(r + 1) * w]);
            }
        }
        means
    }

    /// Percentile interval of `samples` at the configured level.
    pub fn interval(&self, samples: &mut [f64]) -> (f64, f64) {
        samples.sort_by(|a, b| a.total_cmp(b));
        let tail = 0.5 * (1.0 - self.level);
        (quantile(samples, tail), quantile(samples, 1.0 - tail))
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Widens `(lo, hi)` to contain `point`. The percentile interval of a
/// nonlinear statistic such as a maximum need not cover the plug-in value.
pub fn cover(point: f64, (lo, hi): (f64, f64)) -> (f64, f64) {
    (lo.min(point), hi.max(point))
}
