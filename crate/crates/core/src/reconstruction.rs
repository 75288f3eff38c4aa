//! Sparse reconstruction R: (Φ, y, k) ↦ x̂.
//!
//! [`Omp`] is the default realization. [`BestSubset`] enumerates every
//! k-subset and is only usable on tiny instances; it exists to check OMP and
//! to serve as an exact reconstruction inside tests.

use crate::linalg::{dot, least_squares, norm_sq};
use crate::signal::SensingMatrix;
use crate::{Error, Result};

/// Early-exit threshold on ‖r‖ relative to ‖y‖.
pub const RESIDUAL_EXIT_TOL: f64 = 1e-12;

/// Guard on the number of supports [`oracle_best_ksparse`] will enumerate.
pub const ORACLE_MAX_SUPPORTS: u64 = 1_000_000;

/// A deterministic reconstruction function returning at most `k` nonzeros.
pub trait Reconstruct: Sync {
    fn reconstruct(&self, phi: &SensingMatrix, y: &[f64], k: usize) -> Result<Vec<f64>>;
}

impl<F> Reconstruct for F
where
    F: Fn(&SensingMatrix, &[f64], usize) -> Result<Vec<f64>> + Sync,
{
    fn reconstruct(&self, phi: &SensingMatrix, y: &[f64], k: usize) -> Result<Vec<f64>> {
        self(phi, y, k)
    }
}

/// Orthogonal matching pursuit.
#[derive(Debug, Clone, Copy, Default)]
pub struct Omp;

impl Reconstruct for Omp {
    fn reconstruct(&self, phi: &SensingMatrix, y: &[f64], k: usize) -> Result<Vec<f64>> {
        omp_reconstruct(phi, y, k)
    }
}

/// Exhaustive best k-sparse least-squares fit.
#[derive(Debug, Clone, Copy, Default)]
pub struct BestSubset;

impl Reconstruct for BestSubset {
    fn reconstruct(&self, phi: &SensingMatrix, y: &[f64], k: usize) -> Result<Vec<f64>> {
        oracle_best_ksparse(phi, y, k)
    }
}

/// Full OMP output, including per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpOutput {
    pub coefficients: Vec<f64>,
    /// Selected columns in selection order.
    pub support: Vec<usize>,
    /// ‖r‖ before the first iteration and after each one.
    pub residual_norms: Vec<f64>,
    /// Selected columns that were numerically dependent on earlier ones.
    pub rank_deficient: usize,
}

impl OmpOutput {
    pub fn iterations(&self) -> usize {
        self.support.len()
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_norms.last().expect("at least the initial residual")
    }
}

fn check_shapes(phi: &SensingMatrix, y: &[f64], k: usize) -> Result<()> {
    if y.len() != phi.rows() {
        return Err(Error::InvalidShape(format!(
            "measurement length {} does not match {} rows",
            y.len(),
            phi.rows()
        )));
    }
    if k == 0 || k > phi.rows() {
        return Err(Error::InvalidSparsity { k, m: phi.rows() });
    }
    Ok(())
}

/// OMP returning only the coefficient vector.
pub fn omp_reconstruct(phi: &SensingMatrix, y: &[f64], k: usize) -> Result<Vec<f64>> {
    omp_detailed(phi, y, k).map(|out| out.coefficients)
}

/// OMP with diagnostics.
///
/// Each iteration picks the unselected column with the largest |⟨φ_j, r⟩|
/// (lowest index on ties), extends an orthonormal basis of the selected
/// columns by two passes of modified Gram-Schmidt and projects the residual.
/// Coefficients come from back substitution on the resulting triangular
/// factor, which is the least-squares fit on the selected support.
pub fn omp_detailed(phi: &SensingMatrix, y: &[f64], k: usize) -> Result<OmpOutput> {
    check_shapes(phi, y, k)?;
    let n = phi.rows();
    let m = phi.cols();
    let y_norm = norm_sq(y).sqrt();

    let mut residual = y.to_vec();
    let mut residual_norms = vec![y_norm];
    let mut selected = vec![false; m];
    let mut support = Vec::with_capacity(k);
    // orthonormal basis vectors for the accepted (independent) columns
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut accepted: Vec<usize> = Vec::with_capacity(k);
    let mut rank_deficient = 0;

    for _ in 0..k {
        let r_norm = *residual_norms.last().unwrap();
        if y_norm == 0.0 || r_norm < RESIDUAL_EXIT_TOL * y_norm {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, &taken) in selected.iter().enumerate() {
            if taken {
                continue;
            }
            let c = dot(phi.column(j), &residual).abs();
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((j, c));
            }
        }
        let Some((j, _)) = best else { break };
        selected[j] = true;
        support.push(j);

        let mut q = phi.column(j).to_vec();
        for _ in 0..2 {
            for b in &basis {
                let proj = dot(b, &q);
                q.iter_mut().zip(b).for_each(|(qi, bi)| *qi -= proj * bi);
            }
        }
        let q_norm = norm_sq(&q).sqrt();
        if q_norm <= 1e-10 {
            rank_deficient += 1;
        } else {
            q.iter_mut().for_each(|v| *v /= q_norm);
            let proj = dot(&q, &residual);
            residual.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= proj * qi);
            basis.push(q);
            accepted.push(j);
        }
        residual_norms.push(norm_sq(&residual).sqrt());
        if basis.len() == n {
            break;
        }
    }

    // R c = Qᵀ y with R[i][l] = q_i · φ_{accepted[l]}
    let qty: Vec<f64> = basis.iter().map(|b| dot(b, y)).collect();
    let mut coeffs = vec![0.0; accepted.len()];
    for i in (0..accepted.len()).rev() {
        let mut acc = qty[i];
        for l in i + 1..accepted.len() {
            acc -= dot(&basis[i], phi.column(accepted[l])) * coeffs[l];
        }
        coeffs[i] = acc / dot(&basis[i], phi.column(accepted[i]));
    }
    let mut coefficients = vec![0.0; m];
    for (&j, &c) in accepted.iter().zip(&coeffs) {
        coefficients[j] = c;
    }

    Ok(OmpOutput {
        coefficients,
        support,
        residual_norms,
        rank_deficient,
    })
}

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Best k-sparse fit by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFit {
    pub coefficients: Vec<f64>,
    pub support: Vec<usize>,
    pub residual_norm: f64,
}

/// Enumerates all k-subsets in lexicographic order, solves least squares on
/// each and keeps the strictly smallest residual (so the lexicographically
/// first support wins ties).
pub fn oracle_best_ksparse_detailed(phi: &SensingMatrix, y: &[f64], k: usize) -> Result<OracleFit> {
    if y.len() != phi.rows() {
        return Err(Error::InvalidShape(format!(
            "measurement length {} does not match {} rows",
            y.len(),
            phi.rows()
        )));
    }
    let m = phi.cols();
    if k == 0 || k > m {
        return Err(Error::InvalidSparsity { k, m });
    }
    let count = binomial(m, k);
    if count > ORACLE_MAX_SUPPORTS {
        return Err(Error::InstanceTooLarge(format!(
            "C({m}, {k}) = {count} supports exceeds {ORACLE_MAX_SUPPORTS}"
        )));
    }

    let mut subset: Vec<usize> = (0..k).collect();
    let mut best: Option<OracleFit> = None;
    loop {
        let cols: Vec<&[f64]> = subset.iter().map(|&j| phi.column(j)).collect();
        let ls = least_squares(&cols, y);
        if best.as_ref().is_none_or(|b| ls.residual_norm < b.residual_norm) {
            let mut coefficients = vec![0.0; m];
            for (&j, &c) in subset.iter().zip(&ls.coefficients) {
                coefficients[j] = c;
            }
            best = Some(OracleFit {
                coefficients,
                support: subset.clone(),
                residual_norm: ls.residual_norm,
            });
        }
        // next combination in lexicographic order
        let mut i = k;
        while i > 0 && subset[i - 1] == m - k + (i - 1) {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        subset[i - 1] += 1;
        for l in i..k {
            subset[l] = subset[l - 1] + 1;
        }
    }
    Ok(best.expect("at least one subset"))
}

pub fn oracle_best_ksparse(phi: &SensingMatrix, y: &[f64], k: usize) -> Result<Vec<f64>> {
    oracle_best_ksparse_detailed(phi, y, k).map(|fit| fit.coefficients)
}

/// ‖y − Φ x̂‖₂.
pub fn residual_norm(phi: &SensingMatrix, y: &[f64], x_hat: &[f64]) -> Result<f64> {
    let fitted = phi.apply(x_hat)?;
    Ok(y.iter()
        .zip(&fitted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}
