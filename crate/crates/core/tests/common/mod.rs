//! Oracles shared by the integration tests. None of these call into the
//! code paths they are used to check.

#![allow(dead_code)]

use abs_cs::harness::measurement_samples;
use abs_cs::quantization::{lloyd_train, Codebook};
use abs_cs::reconstruction::Reconstruct;
use abs_cs::rng::from_seed;
use abs_cs::signal::{gen_sensing_matrix, gen_sparse_signal, measure, SensingMatrix, SparseSignal};

/// Lloyd-Max quantizer for the standard Gaussian by numerical integration.
///
/// Cumulative integrals of φ(x), xφ(x) and x²φ(x) are tabulated with the
/// trapezoid rule on a 1e-4 grid over [-12, 12] and read off at the cell
/// boundaries by linear interpolation; the centroid/midpoint fixed point is
/// iterated to convergence. Returns (codepoints, distortion).
pub fn lloyd_max_gaussian(levels: usize) -> (Vec<f64>, f64) {
    let (lo, hi, h) = (-12.0f64, 12.0f64, 1e-4f64);
    let steps = ((hi - lo) / h).round() as usize;
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut f0 = vec![0.0; steps + 1];
    let mut f1 = vec![0.0; steps + 1];
    let mut f2 = vec![0.0; steps + 1];
    for i in 0..steps {
        let (a, b) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
        let (pa, pb) = (pdf(a), pdf(b));
        f0[i + 1] = f0[i] + 0.5 * h * (pa + pb);
        f1[i + 1] = f1[i] + 0.5 * h * (a * pa + b * pb);
        f2[i + 1] = f2[i] + 0.5 * h * (a * a * pa + b * b * pb);
    }
    let at = |table: &[f64], x: f64| -> f64 {
        let x = x.clamp(lo, hi);
        let pos = (x - lo) / h;
        let i = (pos.floor() as usize).min(steps - 1);
        let t = pos - i as f64;
        table[i] * (1.0 - t) + table[i + 1] * t
    };
    let mut c: Vec<f64> = (0..levels)
        .map(|i| -2.0 + 4.0 * (i as f64 + 0.5) / levels as f64)
        .collect();
    let bounds = |c: &[f64]| -> Vec<f64> {
        let mut b = vec![lo];
        b.extend(c.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        b.push(hi);
        b
    };
    for _ in 0..20_000 {
        let b = bounds(&c);
        let next: Vec<f64> = (0..levels)
            .map(|i| (at(&f1, b[i + 1]) - at(&f1, b[i])) / (at(&f0, b[i + 1]) - at(&f0, b[i])))
            .collect();
        let delta = next.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        c = next;
        if delta < 1e-13 {
            break;
        }
    }
    let b = bounds(&c);
    let distortion = (0..levels)
        .map(|i| {
            let d0 = at(&f0, b[i + 1]) - at(&f0, b[i]);
            let d1 = at(&f1, b[i + 1]) - at(&f1, b[i]);
            let d2 = at(&f2, b[i + 1]) - at(&f2, b[i]);
            d2 - 2.0 * c[i] * d1 + c[i] * c[i] * d0
        })
        .sum();
    (c, distortion)
}

/// Squared distance by explicit loop.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += (a[i] - b[i]) * (a[i] - b[i]);
    }
    acc
}

/// Independent replay of one coordinate pass: for each entry in order, try
/// every codepoint, reconstruct and keep the candidate closest to x̃ in full
/// squared distance (first index on ties). Returns the chosen indexes.
pub fn brute_force_pass<R: Reconstruct>(
    codebooks: &[Codebook],
    x_tilde: &[f64],
    start: &[usize],
    phi: &SensingMatrix,
    k: usize,
    recon: &R,
) -> Vec<usize> {
    let mut z: Vec<f64> = start
        .iter()
        .zip(codebooks)
        .map(|(&i, cb)| cb.codepoints()[i])
        .collect();
    let mut chosen = Vec::with_capacity(z.len());
    for n in 0..z.len() {
        let mut best = (0usize, f64::INFINITY);
        for (i, &c) in codebooks[n].codepoints().iter().enumerate() {
            let mut trial = z.clone();
            trial[n] = c;
            let x_hat = recon.reconstruct(phi, &trial, k).unwrap();
            let d = sq_dist(x_tilde, &x_hat);
            if d < best.1 {
                best = (i, d);
            }
        }
        z[n] = codebooks[n].codepoints()[best.0];
        chosen.push(best.0);
    }
    chosen
}

/// A noiseless instance drawn from a plain seeded stream.
pub fn instance(seed: u64, m: usize, n: usize, k: usize) -> (SparseSignal, SensingMatrix, Vec<f64>) {
    let mut rng = from_seed(seed);
    let x = gen_sparse_signal(&mut rng, m, k).unwrap();
    let phi = gen_sensing_matrix(&mut rng, n, m).unwrap();
    let y = measure(&phi, &x).unwrap();
    (x, phi, y)
}

/// Lloyd codebook of `bits` width trained on measurement entries for (n, k).
pub fn measurement_codebook(n: usize, k: usize, bits: u32) -> Codebook {
    let samples = measurement_samples(99, n, k, 100_000);
    lloyd_train(&samples, 1 << bits, 1e-9, 1000).unwrap().codebook
}
