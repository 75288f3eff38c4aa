//! Support-set coding: spend K·log₂M bits on the positions of the K largest
//! entries of the local estimate x̃ and the remainder on their signed
//! values, each quantized with a Gaussian-trained codebook.
//!
//! Nearest-neighbor coding of the measurements lives in
//! [`crate::quantization::encode_nearest`].

use std::collections::BTreeMap;

use crate::quantization::{Codebook, RateAllocation};
use crate::{Error, Result};

/// Codebooks for the coefficient values, keyed by bit width.
pub type GaussianCodebooks = BTreeMap<u32, Codebook>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSetCode {
    /// Strictly increasing positions.
    pub support_indexes: Vec<usize>,
    pub magnitude_indexes: Vec<usize>,
    pub magnitude_bits: Vec<u32>,
}

impl SupportSetCode {
    pub fn position_bits(&self, m: usize) -> u64 {
        self.support_indexes.len() as u64 * u64::from(m.trailing_zeros())
    }

    pub fn total_bits(&self, m: usize) -> u64 {
        self.position_bits(m) + self.magnitude_bits.iter().map(|&b| u64::from(b)).sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SupportSetOutcome {
    Coded(SupportSetCode),
    /// R_x cannot cover the positions plus one bit per value.
    InsufficientBudget,
}

/// Width of each coded value for a given budget, or `None` when the budget
/// cannot pay for positions plus one bit per value.
pub fn magnitude_allocation(m: usize, k: usize, total_bits: u64) -> Result<Option<Vec<u32>>> {
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::InvalidDimension(format!(
            "support-set coding needs M to be a power of two, got {m}"
        )));
    }
    if k == 0 || k > m {
        return Err(Error::InvalidSparsity { k, m });
    }
    let position_bits = k as u64 * u64::from(m.trailing_zeros());
    if total_bits < position_bits + k as u64 {
        return Ok(None);
    }
    Ok(Some(
        RateAllocation::split(total_bits - position_bits, k)?
            .per_entry()
            .to_vec(),
    ))
}

/// Positions of the `k` largest |x̃| entries (lower index on ties), ascending.
pub fn largest_support(x_tilde: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x_tilde.len()).collect();
    order.sort_by(|&a, &b| x_tilde[b].abs().total_cmp(&x_tilde[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

pub fn support_set_encode(
    x_tilde: &[f64],
    k: usize,
    total_bits: u64,
    gaussian_codebooks: &GaussianCodebooks,
) -> Result<SupportSetOutcome> {
    let m = x_tilde.len();
    let Some(magnitude_bits) = magnitude_allocation(m, k, total_bits)? else {
        return Ok(SupportSetOutcome::InsufficientBudget);
    };
    let support_indexes = largest_support(x_tilde, k);
    let magnitude_indexes = support_indexes
        .iter()
        .zip(&magnitude_bits)
        .map(|(&pos, &bits)| {
            let cb = gaussian_codebooks.get(&bits).ok_or(Error::MissingCodebook(bits))?;
            Ok(cb.nearest(x_tilde[pos]))
        })
        .collect::<Result<_>>()?;
    Ok(SupportSetOutcome::Coded(SupportSetCode {
        support_indexes,
        magnitude_indexes,
        magnitude_bits,
    }))
}

pub fn support_set_decode(code: &SupportSetCode, m: usize, gaussian_codebooks: &GaussianCodebooks) -> Result<Vec<f64>> {
    let k = code.support_indexes.len();
    if code.magnitude_indexes.len() != k || code.magnitude_bits.len() != k {
        return Err(Error::InvalidShape("support-set code fields differ in length".into()));
    }
    if code.support_indexes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("support positions must be strictly increasing".into()));
    }
    let mut x = vec![0.0; m];
    for (entry, ((&pos, &index), &bits)) in code
        .support_indexes
        .iter()
        .zip(&code.magnitude_indexes)
        .zip(&code.magnitude_bits)
        .enumerate()
    {
        if pos >= m {
            return Err(Error::CorruptIndex { entry, index: pos, size: m });
        }
        let cb = gaussian_codebooks.get(&bits).ok_or(Error::MissingCodebook(bits))?;
        x[pos] = cb.codepoint(index).ok_or(Error::CorruptIndex {
            entry,
            index,
            size: cb.len(),
        })?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantization::lloyd_train;
    use crate::rng::from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_books(widths: &[u32]) -> GaussianCodebooks {
        let mut rng = from_seed(77);
        let samples: Vec<f64> = (0..50_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        widths
            .iter()
            .map(|&b| (b, lloyd_train(&samples, 1 << b, 1e-7, 300).unwrap().codebook))
            .collect()
    }

    #[test]
    fn exact_position_budget_is_insufficient() {
        let x = vec![0.0; 512];
        let books = GaussianCodebooks::new();
        assert_eq!(support_set_encode(&x, 35, 315, &books).unwrap(), SupportSetOutcome::InsufficientBudget);
        assert_eq!(support_set_encode(&x, 35, 100, &books).unwrap(), SupportSetOutcome::InsufficientBudget);
        assert_eq!(magnitude_allocation(512, 35, 349).unwrap(), None);
        assert_eq!(magnitude_allocation(512, 35, 350).unwrap(), Some(vec![1; 35]));
    }

    #[test]
    fn non_power_of_two_dimension() {
        assert!(matches!(
            support_set_encode(&[0.0; 12], 2, 100, &GaussianCodebooks::new()),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn single_coefficient_sixteen_levels() {
        let books = gaussian_books(&[4]);
        let mut x = vec![0.0; 16];
        x[3] = 2.0;
        let SupportSetOutcome::Coded(code) = support_set_encode(&x, 1, 8, &books).unwrap() else {
            panic!("budget suffices");
        };
        assert_eq!(code.support_indexes, vec![3]);
        assert_eq!(code.magnitude_bits, vec![4]);
        assert_eq!(code.total_bits(16), 8);
        // nearest by linear scan over the trained codebook
        let pts = books[&4].codepoints();
        let scan = (0..pts.len())
            .min_by(|&a, &b| (pts[a] - 2.0).abs().total_cmp(&(pts[b] - 2.0).abs()))
            .unwrap();
        assert_eq!(code.magnitude_indexes, vec![scan]);
        let back = support_set_decode(&code, 16, &books).unwrap();
        assert_eq!(back[3], pts[scan]);
    }

    #[test]
    fn positions_are_lossless_and_errors_separate() {
        let books = gaussian_books(&[2, 3]);
        let mut rng = from_seed(5);
        for _ in 0..20 {
            let x: Vec<f64> = (0..32).map(|_| StandardNormal.sample(&mut rng)).collect();
            let SupportSetOutcome::Coded(code) = support_set_encode(&x, 4, 4 * 5 + 10, &books).unwrap() else {
                panic!()
            };
            assert_eq!(code.magnitude_bits, vec![3, 3, 2, 2]);
            let back = support_set_decode(&code, 32, &books).unwrap();
            let support: Vec<usize> = (0..32).filter(|&i| back[i] != 0.0).collect();
            assert_eq!(support, largest_support(&x, 4));
            // total error = Σ per-entry scalar errors + energy left off-support
            let total: f64 = x.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum();
            let per_entry: f64 = code
                .support_indexes
                .iter()
                .map(|&p| (x[p] - back[p]).powi(2))
                .sum::<f64>()
                + (0..32).filter(|i| !code.support_indexes.contains(i)).map(|i| x[i] * x[i]).sum::<f64>();
            assert!((total - per_entry).abs() < 1e-12);
        }
    }

    #[test]
    fn codepoint_value_is_reproduced() {
        let books = gaussian_books(&[2]);
        let c = books[&2].codepoints()[1];
        let mut x = vec![0.0; 8];
        x[6] = c;
        let SupportSetOutcome::Coded(code) = support_set_encode(&x, 1, 5, &books).unwrap() else { panic!() };
        assert_eq!(support_set_decode(&code, 8, &books).unwrap()[6], c);
    }

    #[test]
    fn corrupt_codes_rejected() {
        let books = gaussian_books(&[1]);
        let code = SupportSetCode {
            support_indexes: vec![9],
            magnitude_indexes: vec![0],
            magnitude_bits: vec![1],
        };
        assert!(matches!(support_set_decode(&code, 8, &books), Err(Error::CorruptIndex { .. })));
        let code = SupportSetCode {
            support_indexes: vec![1],
            magnitude_indexes: vec![2],
            magnitude_bits: vec![1],
        };
        assert!(matches!(support_set_decode(&code, 8, &books), Err(Error::CorruptIndex { .. })));
    }
}
