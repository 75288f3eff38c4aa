//! Analysis-by-synthesis encoding of measurement vectors.
//!
//! Given fixed codebooks, a reconstruction function R and a local estimate
//! x̃ = R(y), the encoder picks indexes whose decoded vector ẑ makes R(ẑ)
//! close to x̃. The per-entry criterion is the surrogate
//!
//! ```text
//! ‖x̂‖² − 2 x̃ᵀ x̂
//! ```
//!
//! which differs from ‖x̃ − x̂‖² only by the constant ‖x̃‖². [`abs_sweep`]
//! visits entries in ascending order, tries every codepoint of the current
//! entry with the others held fixed, and keeps the best one before moving on.
//! [`abs_quantize`] repeats sweeps until the surrogate stops moving.
//! [`exhaustive_joint_encode`] is the brute-force joint optimum over all index
//! tuples, usable only on tiny instances.

use rand::Rng;

use crate::linalg::{dot, norm_sq};
use crate::par;
use crate::quantization::{decode_indexes, encode_nearest, Codebook, QuantizedVector};
use crate::reconstruction::Reconstruct;
use crate::signal::SensingMatrix;
use crate::{Error, Result};

/// Largest number of index tuples [`exhaustive_joint_encode`] will try.
pub const JOINT_MAX_COMBINATIONS: u64 = 1 << 20;

/// ‖x̂‖² − 2 x̃ᵀ x̂.
pub fn surrogate_objective(x_hat: &[f64], x_tilde: &[f64]) -> f64 {
    debug_assert_eq!(x_hat.len(), x_tilde.len());
    norm_sq(x_hat) - 2.0 * dot(x_tilde, x_hat)
}

/// How the synthesized vector is seeded before the first sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Uniformly random codepoint per entry.
    #[default]
    RandomCodepoint,
    /// Nearest-neighbor coding of y.
    NearestNeighbor,
}

impl InitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InitMode::RandomCodepoint => "random-codepoint",
            InitMode::NearestNeighbor => "nearest-neighbor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsConfig {
    /// Stop once |objective(l) − objective(l−1)| ≤ gamma.
    pub gamma: f64,
    pub max_outer_iters: usize,
    pub init_mode: InitMode,
}

impl Default for AbsConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-6,
            max_outer_iters: 20,
            init_mode: InitMode::RandomCodepoint,
        }
    }
}

impl AbsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!("gamma = {} must be positive", self.gamma)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidConfig("max_outer_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Encoder state between coordinate updates.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsState {
    /// Synthesized quantized measurements; z[n] is always a codepoint.
    pub z: Vec<f64>,
    pub indexes: Vec<usize>,
    /// Surrogate value of the reconstruction of `z`; NaN until first evaluated.
    pub objective: f64,
    pub recon_calls: u64,
}

impl AbsState {
    pub fn from_indexes(indexes: Vec<usize>, codebooks: &[Codebook]) -> Result<Self> {
        let z = decode_indexes(&indexes, codebooks)?;
        Ok(Self {
            z,
            indexes,
            objective: f64::NAN,
            recon_calls: 0,
        })
    }
}

/// One coordinate update inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateStep {
    pub entry: usize,
    /// Surrogate with the entry's codepoint before the update.
    pub incumbent: f64,
    /// Surrogate with the winning codepoint.
    pub winner: f64,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub state: AbsState,
    pub steps: Vec<CoordinateStep>,
}

/// Surrogate value of every codepoint of entry `n`, the other entries of `z`
/// held fixed. Candidates may be evaluated concurrently; results come back
/// in index order.
fn score_candidates<R: Reconstruct + ?Sized>(
    codebook: &Codebook,
    z: &[f64],
    n: usize,
    x_tilde: &[f64],
    recon: &R,
    phi: &SensingMatrix,
    k: usize,
) -> Result<Vec<f64>> {
    let evaluate = |i: usize| -> Result<f64> {
        let mut candidate = z.to_vec();
        candidate[n] = codebook.codepoints()[i];
        let x_hat = recon.reconstruct(phi, &candidate, k)?;
        Ok(surrogate_objective(&x_hat, x_tilde))
    };
    if codebook.len() >= 4 {
        par::map_range(codebook.len(), evaluate).into_iter().collect()
    } else {
        (0..codebook.len()).map(evaluate).collect()
    }
}

/// Lowest index among the minima.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

fn check_shapes(codebooks: &[Codebook], x_tilde: &[f64], z_len: usize, phi: &SensingMatrix) -> Result<()> {
    if codebooks.len() != phi.rows() || z_len != phi.rows() {
        return Err(Error::InvalidShape(format!(
            "{} codebooks and {} entries for {} measurements",
            codebooks.len(),
            z_len,
            phi.rows()
        )));
    }
    if x_tilde.len() != phi.cols() {
        return Err(Error::InvalidShape(format!(
            "local estimate has length {}, expected {}",
            x_tilde.len(),
            phi.cols()
        )));
    }
    Ok(())
}

/// One sequential pass over all entries.
///
/// Performs exactly Σ_n |codebooks[n]| reconstructions. The returned
/// objective is the surrogate of the reconstruction after the last entry
/// was updated.
pub fn abs_sweep<R: Reconstruct + ?Sized>(
    codebooks: &[Codebook],
    x_tilde: &[f64],
    state: AbsState,
    recon: &R,
    phi: &SensingMatrix,
    k: usize,
) -> Result<SweepOutcome> {
    check_shapes(codebooks, x_tilde, state.z.len(), phi)?;
    let AbsState {
        mut z,
        mut indexes,
        mut objective,
        mut recon_calls,
    } = state;
    let mut steps = Vec::with_capacity(codebooks.len());
    for (n, codebook) in codebooks.iter().enumerate() {
        let scores = score_candidates(codebook, &z, n, x_tilde, recon, phi, k)?;
        recon_calls += scores.len() as u64;
        let best = argmin(&scores);
        steps.push(CoordinateStep {
            entry: n,
            incumbent: scores[indexes[n]],
            winner: scores[best],
            index: best,
        });
        indexes[n] = best;
        z[n] = codebook.codepoints()[best];
        objective = scores[best];
    }
    Ok(SweepOutcome {
        state: AbsState {
            z,
            indexes,
            objective,
            recon_calls,
        },
        steps,
    })
}

/// Per-call record of an [`abs_quantize`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsDiagnostics {
    /// Sweeps performed.
    pub iterations: usize,
    /// Reconstructions, including the one computing x̃.
    pub recon_calls: u64,
    /// Surrogate of the initial vector followed by the value after each sweep.
    pub objective_trace: Vec<f64>,
    /// Coordinate updates of every sweep.
    pub sweeps: Vec<Vec<CoordinateStep>>,
    pub converged: bool,
}

impl AbsDiagnostics {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("non-empty trace")
    }
}

/// Output of [`abs_quantize`].
#[derive(Debug, Clone, PartialEq)]
pub struct AbsEncoding {
    pub quantized: QuantizedVector,
    /// Decoded measurements ŷ (the final synthesized vector).
    pub decoded: Vec<f64>,
    /// Local estimate x̃ = R(y) the encoder aimed at.
    pub x_tilde: Vec<f64>,
    pub diagnostics: AbsDiagnostics,
}

/// Closed-loop encoding of `y`.
///
/// Computes x̃ = R(y) once, seeds the synthesized vector per
/// `cfg.init_mode` (the random mode draws one codepoint per entry from
/// `rng`), then sweeps until two consecutive surrogate values differ by at
/// most `cfg.gamma` or `cfg.max_outer_iters` sweeps have run. The initial
/// surrogate is the incumbent score of entry 0 in the first sweep, so it
/// costs no extra reconstruction.
pub fn abs_quantize<R, G>(
    y: &[f64],
    phi: &SensingMatrix,
    k: usize,
    codebooks: &[Codebook],
    cfg: &AbsConfig,
    recon: &R,
    rng: &mut G,
) -> Result<AbsEncoding>
where
    R: Reconstruct + ?Sized,
    G: Rng + ?Sized,
{
    cfg.validate()?;
    if y.len() != phi.rows() || codebooks.len() != phi.rows() {
        return Err(Error::InvalidShape(format!(
            "{} measurements and {} codebooks for {} rows",
            y.len(),
            codebooks.len(),
            phi.rows()
        )));
    }
    let x_tilde = recon.reconstruct(phi, y, k)?;
    let initial = match cfg.init_mode {
        InitMode::RandomCodepoint => codebooks.iter().map(|cb| rng.gen_range(0..cb.len())).collect(),
        InitMode::NearestNeighbor => encode_nearest(y, codebooks)?.indexes().to_vec(),
    };
    let mut state = AbsState::from_indexes(initial, codebooks)?;
    state.recon_calls = 1;

    let mut trace = Vec::with_capacity(cfg.max_outer_iters + 1);
    let mut sweeps = Vec::new();
    let mut converged = false;
    while sweeps.len() < cfg.max_outer_iters {
        let outcome = abs_sweep(codebooks, &x_tilde, state, recon, phi, k)?;
        if trace.is_empty() {
            trace.push(outcome.steps[0].incumbent);
        }
        let previous = *trace.last().unwrap();
        trace.push(outcome.state.objective);
        state = outcome.state;
        sweeps.push(outcome.steps);
        if (state.objective - previous).abs() <= cfg.gamma {
            converged = true;
            break;
        }
    }

    let quantized = QuantizedVector::from_codebooks(state.indexes, codebooks);
    Ok(AbsEncoding {
        quantized,
        decoded: state.z,
        x_tilde,
        diagnostics: AbsDiagnostics {
            iterations: sweeps.len(),
            recon_calls: state.recon_calls,
            objective_trace: trace,
            sweeps,
            converged,
        },
    })
}

/// Result of [`exhaustive_joint_encode`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointEncoding {
    pub quantized: QuantizedVector,
    pub objective: f64,
    pub recon_calls: u64,
}

/// Tries every index tuple and keeps the surrogate minimum; ties go to the
/// lexicographically smallest tuple. `x_tilde` is the estimate the
/// surrogate is measured against (normally R(y)).
pub fn exhaustive_joint_encode<R: Reconstruct + ?Sized>(
    x_tilde: &[f64],
    phi: &SensingMatrix,
    k: usize,
    codebooks: &[Codebook],
    recon: &R,
) -> Result<JointEncoding> {
    check_shapes(codebooks, x_tilde, codebooks.len(), phi)?;
    let mut total: u64 = 1;
    for cb in codebooks {
        total = total.saturating_mul(cb.len() as u64);
    }
    if total > JOINT_MAX_COMBINATIONS {
        return Err(Error::InstanceTooLarge(format!(
            "{total} index combinations exceeds {JOINT_MAX_COMBINATIONS}"
        )));
    }
    // mixed radix with entry 0 most significant keeps tuple order lexicographic
    let tuple = |mut t: usize| -> Vec<usize> {
        let mut idx = vec![0; codebooks.len()];
        for (slot, cb) in idx.iter_mut().zip(codebooks).rev() {
            *slot = t % cb.len();
            t /= cb.len();
        }
        idx
    };
    let scores: Vec<Result<f64>> = par::map_range(total as usize, |t| {
        let z = decode_indexes(&tuple(t), codebooks)?;
        let x_hat = recon.reconstruct(phi, &z, k)?;
        Ok(surrogate_objective(&x_hat, x_tilde))
    });
    let scores: Vec<f64> = scores.into_iter().collect::<Result<_>>()?;
    let best = argmin(&scores);
    Ok(JointEncoding {
        quantized: QuantizedVector::from_codebooks(tuple(best), codebooks),
        objective: scores[best],
        recon_calls: total,
    })
}

/// Surrogate of an arbitrary index tuple: decode, reconstruct, score.
pub fn evaluate_indexes<R: Reconstruct + ?Sized>(
    indexes: &[usize],
    x_tilde: &[f64],
    phi: &SensingMatrix,
    k: usize,
    codebooks: &[Codebook],
    recon: &R,
) -> Result<f64> {
    let z = decode_indexes(indexes, codebooks)?;
    let x_hat = recon.reconstruct(phi, &z, k)?;
    Ok(surrogate_objective(&x_hat, x_tilde))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sq_distance;
    use crate::reconstruction::{BestSubset, Omp};
    use crate::rng::from_seed;
    use crate::signal::{gen_sensing_matrix, gen_sparse_signal, measure};

    fn books(widths: &[u32]) -> Vec<Codebook> {
        widths
            .iter()
            .map(|&b| {
                let l = 1usize << b;
                let pts = (0..l).map(|i| (i as f64 - (l as f64 - 1.0) / 2.0) * 0.6 / l as f64 * 2.0).collect();
                Codebook::new(pts).unwrap()
            })
            .collect()
    }

    fn instance(seed: u64, m: usize, n: usize, k: usize) -> (SensingMatrix, Vec<f64>) {
        let mut rng = from_seed(seed);
        let phi = gen_sensing_matrix(&mut rng, n, m).unwrap();
        let x = gen_sparse_signal(&mut rng, m, k).unwrap();
        let y = measure(&phi, &x).unwrap();
        (phi, y)
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(surrogate_objective(&[1.0, 2.0], &[1.0, 2.0]), -5.0);
        assert_eq!(surrogate_objective(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
        assert_eq!(surrogate_objective(&[1.0, 0.0], &[1.0, 2.0]), -1.0);
    }

    #[test]
    fn singleton_codebooks_leave_state_unchanged() {
        let (phi, y) = instance(3, 8, 4, 2);
        let singles: Vec<Codebook> = (0..4).map(|i| Codebook::new(vec![i as f64 * 0.1]).unwrap()).collect();
        let x_tilde = Omp.reconstruct(&phi, &y, 2).unwrap();
        let state = AbsState::from_indexes(vec![0; 4], &singles).unwrap();
        let out = abs_sweep(&singles, &x_tilde, state.clone(), &Omp, &phi, 2).unwrap();
        assert_eq!(out.state.indexes, vec![0; 4]);
        assert_eq!(out.state.z, state.z);
        assert_eq!(out.state.recon_calls, 4);
        let expected = surrogate_objective(&Omp.reconstruct(&phi, &state.z, 2).unwrap(), &x_tilde);
        assert_eq!(out.state.objective, expected);

        let joint = exhaustive_joint_encode(&x_tilde, &phi, 2, &singles, &Omp).unwrap();
        assert_eq!(joint.quantized.indexes(), &[0, 0, 0, 0]);
    }

    #[test]
    fn single_entry_matches_brute_force_and_joint() {
        let phi = SensingMatrix::normalized_from_rows(&[vec![1.0, 0.5, -0.3]]).unwrap();
        let cbs = books(&[3]);
        let x_tilde = vec![0.0, 0.4, 0.0];
        let state = AbsState::from_indexes(vec![5], &cbs).unwrap();
        let out = abs_sweep(&cbs, &x_tilde, state, &Omp, &phi, 1).unwrap();
        let brute = (0..8)
            .map(|i| {
                let x_hat = Omp.reconstruct(&phi, &[cbs[0].codepoints()[i]], 1).unwrap();
                sq_distance(&x_tilde, &x_hat)
            })
            .collect::<Vec<_>>();
        assert_eq!(out.state.indexes[0], argmin(&brute));
        let joint = exhaustive_joint_encode(&x_tilde, &phi, 1, &cbs, &Omp).unwrap();
        assert_eq!(joint.quantized.indexes()[0], out.state.indexes[0]);
    }

    #[test]
    fn one_outer_iteration_call_count() {
        let (phi, y) = instance(9, 16, 6, 2);
        let cbs = books(&[3, 3, 2, 2, 2, 1]);
        let cfg = AbsConfig {
            max_outer_iters: 1,
            ..AbsConfig::default()
        };
        let enc = abs_quantize(&y, &phi, 2, &cbs, &cfg, &Omp, &mut from_seed(1)).unwrap();
        assert_eq!(enc.diagnostics.iterations, 1);
        assert_eq!(enc.diagnostics.recon_calls, 1 + 8 + 8 + 4 + 4 + 4 + 2);
        assert_eq!(enc.diagnostics.objective_trace.len(), 2);
    }

    #[test]
    fn nearest_neighbor_start_never_loses() {
        for seed in 0..20 {
            let (phi, y) = instance(100 + seed, 8, 4, 2);
            let cbs = books(&[2; 4]);
            let cfg = AbsConfig {
                init_mode: InitMode::NearestNeighbor,
                ..AbsConfig::default()
            };
            let enc = abs_quantize(&y, &phi, 2, &cbs, &cfg, &Omp, &mut from_seed(0)).unwrap();
            let nn = encode_nearest(&y, &cbs).unwrap();
            let nn_obj = evaluate_indexes(nn.indexes(), &enc.x_tilde, &phi, 2, &cbs, &Omp).unwrap();
            let abs_obj = evaluate_indexes(enc.quantized.indexes(), &enc.x_tilde, &phi, 2, &cbs, &Omp).unwrap();
            assert_eq!(abs_obj, enc.diagnostics.final_objective());
            assert!(abs_obj <= nn_obj + 1e-9 * nn_obj.abs());
        }
    }

    #[test]
    fn decoded_matches_indexes() {
        let (phi, y) = instance(4, 12, 5, 2);
        let cbs = books(&[2; 5]);
        let enc = abs_quantize(&y, &phi, 2, &cbs, &AbsConfig::default(), &Omp, &mut from_seed(8)).unwrap();
        assert_eq!(decode_indexes(enc.quantized.indexes(), &cbs).unwrap(), enc.decoded);
        assert!(enc.diagnostics.iterations <= 20);
    }

    #[test]
    fn joint_guard_and_oracle_reconstruction() {
        let (phi, y) = instance(5, 8, 4, 2);
        let big = books(&[6, 6, 6, 6]);
        let x_tilde = Omp.reconstruct(&phi, &y, 2).unwrap();
        assert!(matches!(
            exhaustive_joint_encode(&x_tilde, &phi, 2, &big, &Omp),
            Err(Error::InstanceTooLarge(_))
        ));
        // the reconstruction contract accepts the exhaustive oracle as well
        let cbs = books(&[1; 4]);
        let joint = exhaustive_joint_encode(&x_tilde, &phi, 2, &cbs, &BestSubset).unwrap();
        assert_eq!(joint.recon_calls, 16);
    }

    #[test]
    fn invalid_config_rejected() {
        let (phi, y) = instance(5, 8, 4, 2);
        let cbs = books(&[1; 4]);
        for cfg in [
            AbsConfig { gamma: 0.0, ..AbsConfig::default() },
            AbsConfig { max_outer_iters: 0, ..AbsConfig::default() },
        ] {
            assert!(matches!(
                abs_quantize(&y, &phi, 2, &cbs, &cfg, &Omp, &mut from_seed(0)),
                Err(Error::InvalidConfig(_))
            ));
        }
        assert!(abs_quantize(&y[..3], &phi, 2, &cbs, &AbsConfig::default(), &Omp, &mut from_seed(0)).is_err());
    }
}
