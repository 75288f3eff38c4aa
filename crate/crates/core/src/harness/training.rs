//! Training data and codebook preparation.
//!
//! Measurement codebooks are trained on pooled entries of Y = ΦX under the
//! experiment's (K, N). Only the K columns of Φ on the support contribute to
//! Y, and columns are drawn independently, so each training vector is
//! synthesized from K fresh normalized N(0, 1/N) columns and K standard
//! Gaussian coefficients; this has exactly the distribution of a full draw
//! without generating the M − K unused columns.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::linalg::norm_sq;
use crate::par;
use crate::quantization::{lloyd_train, LloydOutcome};
use crate::rng::{derive, Domain};
use crate::Result;

/// Instances synthesized per independently seeded chunk.
const CHUNK: usize = 512;

/// Lloyd settings shared by every codebook an experiment trains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodebookTraining {
    pub samples: usize,
    pub tol: f64,
    pub max_iter: usize,
}

fn measurement_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize, out: &mut Vec<f64>) {
    let normal = Normal::new(0.0, (1.0 / n as f64).sqrt()).expect("finite std");
    let mut y = vec![0.0; n];
    let mut column = vec![0.0; n];
    for _ in 0..k {
        column.iter_mut().for_each(|c| *c = normal.sample(rng));
        let norm = norm_sq(&column).sqrt();
        let coefficient: f64 = StandardNormal.sample(rng);
        for (yi, ci) in y.iter_mut().zip(&column) {
            *yi += ci / norm * coefficient;
        }
    }
    out.extend_from_slice(&y);
}

/// `count` pooled measurement entries for (N = `n`, K = `k`).
pub fn measurement_samples(seed: u64, n: usize, k: usize, count: usize) -> Vec<f64> {
    let vectors = count.div_ceil(n);
    let chunks = vectors.div_ceil(CHUNK);
    let parts = par::map_range(chunks, |c| {
        let mut rng = derive(seed, Domain::MeasurementTraining, &[n as u64, k as u64, c as u64]);
        let here = CHUNK.min(vectors - c * CHUNK);
        let mut out = Vec::with_capacity(here * n);
        for _ in 0..here {
            measurement_vector(&mut rng, n, k, &mut out);
        }
        out
    });
    let mut samples: Vec<f64> = parts.concat();
    samples.truncate(count);
    samples
}

/// `count` standard Gaussian samples.
pub fn gaussian_samples(seed: u64, count: usize) -> Vec<f64> {
    let per_chunk = CHUNK * 64;
    let parts = par::map_range(count.div_ceil(per_chunk), |c| {
        let mut rng = derive(seed, Domain::GaussianTraining, &[c as u64]);
        let here = per_chunk.min(count - c * per_chunk);
        (0..here).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>()
    });
    parts.concat()
}

/// Trains one measurement codebook of `bits` width for (N, K).
pub fn train_measurement_codebook(
    seed: u64,
    n: usize,
    k: usize,
    bits: u32,
    training: CodebookTraining,
) -> Result<LloydOutcome> {
    let samples = measurement_samples(seed, n, k, training.samples);
    lloyd_train(&samples, 1usize << bits, training.tol, training.max_iter)
}
