//! Timing sweeps over synthetic bitmap pairs.
//!
//! For each requested square size the sweep generates a seeded random
//! pair at a fixed black density, times the canvas, search, and merge
//! stages separately, and fits the log-log slope of median search time
//! against size. The exhaustive search visits (2s)^2 offsets of an s x s
//! window, so the naive kernel's slope sits near 4.

use std::hint::black_box;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::bitmap::Bitmap;
use crate::kernel::MatchKernel;
use crate::pipeline::{best_overlap_with, merge, new_space, ImagePair, MatchResult};

pub const STAGE_NEWSPACE: &str = "newspace";
pub const STAGE_SEARCH: &str = "search";
pub const STAGE_MERGE: &str = "merge";
pub const STAGE_TOTAL: &str = "total";

#[derive(Debug, Error, PartialEq)]
pub enum BenchConfigError {
    #[error("need at least 2 sizes (got {0})")]
    TooFewSizes(usize),
    #[error("size {0} is below the minimum of 8")]
    SizeTooSmall(usize),
    #[error("sizes must be strictly increasing")]
    SizesNotIncreasing,
    #[error("repeat must be at least 1")]
    ZeroRepeat,
    #[error("density must lie in 0.0..=1.0 (got {0})")]
    BadDensity(f64),
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub repeat: usize,
    pub density: f64,
    pub seed: u64,
    pub kernel: MatchKernel,
}

impl BenchConfig {
    fn validate(&self) -> Result<(), BenchConfigError> {
        if self.sizes.len() < 2 {
            return Err(BenchConfigError::TooFewSizes(self.sizes.len()));
        }
        if let Some(&size) = self.sizes.iter().find(|&&s| s < 8) {
            return Err(BenchConfigError::SizeTooSmall(size));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BenchConfigError::SizesNotIncreasing);
        }
        if self.repeat == 0 {
            return Err(BenchConfigError::ZeroRepeat);
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(BenchConfigError::BadDensity(self.density));
        }
        Ok(())
    }
}

/// One timed stage of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub stage: &'static str,
    pub size: usize,
    pub repeat: usize,
    pub seconds: f64,
}

/// Search outcome of one trial; identical across kernels for a given
/// seed, which makes kernel runs comparable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRun {
    pub size: usize,
    pub repeat: usize,
    pub best: MatchResult,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub runs: Vec<BenchRun>,
    /// Least-squares slope of ln(median search seconds) against ln(size).
    pub search_slope: f64,
}

/// Runs the sweep described by `cfg`.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, BenchConfigError> {
    cfg.validate()?;

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut medians = Vec::with_capacity(cfg.sizes.len());

    for &size in &cfg.sizes {
        let mut search_times = Vec::with_capacity(cfg.repeat);
        for repeat in 0..cfg.repeat {
            let pair = synthetic_pair(cfg.seed, size, repeat, cfg.density);

            let start = Instant::now();
            let space = new_space(&pair);
            let newspace_s = start.elapsed().as_secs_f64();

            let start = Instant::now();
            let best = best_overlap_with(pair.image1(), &space, cfg.kernel);
            let search_s = start.elapsed().as_secs_f64();

            let start = Instant::now();
            let merged = merge(pair.image1(), &space, best);
            let merge_s = start.elapsed().as_secs_f64();
            black_box(merged.black_count());

            rows.push(BenchRow { stage: STAGE_NEWSPACE, size, repeat, seconds: newspace_s });
            rows.push(BenchRow { stage: STAGE_SEARCH, size, repeat, seconds: search_s });
            rows.push(BenchRow { stage: STAGE_MERGE, size, repeat, seconds: merge_s });
            rows.push(BenchRow {
                stage: STAGE_TOTAL,
                size,
                repeat,
                seconds: newspace_s + search_s + merge_s,
            });
            runs.push(BenchRun { size, repeat, best });
            search_times.push(search_s);
        }
        medians.push((size as f64, median(&mut search_times)));
    }

    let points: Vec<(f64, f64)> = medians
        .iter()
        .map(|&(size, seconds)| (size.ln(), seconds.max(1e-9).ln()))
        .collect();
    Ok(BenchReport {
        rows,
        runs,
        search_slope: least_squares_slope(&points),
    })
}

/// The pair timed for (size, repeat); depends on the seed but never on
/// the kernel, so the same seed yields the same search problem for both.
fn synthetic_pair(seed: u64, size: usize, repeat: usize, density: f64) -> ImagePair {
    let trial_seed = seed ^ ((size as u64) << 24) ^ (repeat as u64);
    let mut rng = StdRng::seed_from_u64(trial_seed);
    let random_bitmap =
        |rng: &mut StdRng| Bitmap::from_fn(size, size, |_, _| rng.random_bool(density));
    let image1 = random_bitmap(&mut rng);
    let image2 = random_bitmap(&mut rng);
    ImagePair::new(image1, image2, format!("bench-{size}-{repeat}"))
        .expect("generated pair id is valid")
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite durations"));
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2.0
    }
}

/// Ordinary least squares through (x, y) points.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(x, y) in points {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    num / den
}

/// Renders rows as CSV: `stage,size,repeat,seconds` with `.` decimals.
/// Everything but the seconds column is deterministic for a given config.
pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("stage,size,repeat,seconds\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{:.9}\n",
            row.stage, row.size, row.repeat, row.seconds
        ));
    }
    out
}
