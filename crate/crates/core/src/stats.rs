//! Monte Carlo estimates, order-independent reductions and the path executor.
//!
//! Every per-path sample is collected in path-index order before any sum is
//! formed, and sums are pairwise over that fixed order. Results are therefore
//! bitwise identical for any number of workers.

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

/// Pairwise (cascade) sum in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(f64::MIN_POSITIVE).ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Mean and standard error `sd/√N` (unbiased sample variance).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return (m, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

/// A Monte Carlo mean, or an exact value with `stderr = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64], seed: u64) -> Self {
        let (mean, stderr) = mean_stderr(xs);
        McEstimate { mean, stderr, n: xs.len(), seed }
    }

    /// Plug-in value `mean` whose uncertainty comes from the linearized
    /// per-path influence samples `influence`.
    pub fn with_influence(mean: f64, influence: &[f64], seed: u64) -> Self {
        McEstimate { mean, stderr: mean_stderr(influence).1, n: influence.len(), seed }
    }

    pub fn exact(value: f64) -> Self {
        McEstimate { mean: value, stderr: 0.0, n: 0, seed: 0 }
    }
}

/// Per-path sample rows, `cols` values each, in path order.
#[derive(Clone, Debug)]
pub struct Samples {
    cols: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged sample rows");
        Samples { cols, data: rows.into_iter().flatten().collect() }
    }

    pub fn len(&self) -> usize {
        if self.cols == 0 {
            0
        } else {
            self.data.len() / self.cols
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.cols).copied().collect()
    }

    /// `Σ_c w_c X_c` per row.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.cols);
        self.data.chunks(self.cols).map(|row| row.iter().zip(weights).map(|(x, w)| x * w).sum()).collect()
    }

    pub fn mean(&self, c: usize) -> f64 {
        mean(&self.column(c))
    }

    pub fn estimate(&self, c: usize, seed: u64) -> McEstimate {
        McEstimate::from_samples(&self.column(c), seed)
    }

    /// Row-wise map, e.g. to build influence samples.
    pub fn map(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.data.chunks(self.cols).map(f).collect()
    }
}

/// Runs per-path closures on a fixed-size pool and returns results in
/// path order.
pub struct Executor {
    pool: Option<ThreadPool>,
    workers: usize,
}

impl Executor {
    /// `workers = 0` means one worker per available core.
    pub fn new(workers: usize) -> Self {
        let workers = if workers == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { workers };
        let pool = if workers > 1 {
            rayon::ThreadPoolBuilder::new().num_threads(workers).build().ok()
        } else {
            None
        };
        Executor { pool, workers }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn map<T: Send>(&self, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        match &self.pool {
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            None => (0..n).map(f).collect(),
        }
    }
}

impl Default for Executor {
    fn default() -> Self {
        Executor::new(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn stderr_of_two_points() {
        let (m, se) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        // sample sd √2, divided by √2
        assert!((se - 1.0).abs() < 1e-15);
    }

    #[test]
    fn executor_preserves_order() {
        let a = Executor::new(3).map(100, |i| i * i);
        let b = Executor::new(1).map(100, |i| i * i);
        assert_eq!(a, b);
    }
}
