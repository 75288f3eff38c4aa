//! Scalar quantization of measurement entries.
//!
//! A [`Codebook`] is a strictly ascending list of 2^b codepoints; its encoder
//! regions are the implicit nearest-codepoint cells, with exact midpoint ties
//! resolved to the lower index. Codebooks are trained with the Lloyd
//! algorithm and the per-vector bit budget is spread over entries by
//! [`allocate_bits`].

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::harness::format_float;
use crate::{Error, Result};

/// Widest codebook this crate will build (2^20 codepoints).
pub const MAX_CODEBOOK_BITS: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    codepoints: Vec<f64>,
    bits: u32,
}

impl Codebook {
    pub fn new(codepoints: Vec<f64>) -> Result<Self> {
        let len = codepoints.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidCodebook(format!(
                "{len} codepoints is not a power of two"
            )));
        }
        let bits = len.trailing_zeros();
        if bits > MAX_CODEBOOK_BITS {
            return Err(Error::InvalidCodebook(format!(
                "{bits} bits exceeds the {MAX_CODEBOOK_BITS}-bit limit"
            )));
        }
        if codepoints.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCodebook("non-finite codepoint".into()));
        }
        if codepoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidCodebook(
                "codepoints must be strictly increasing".into(),
            ));
        }
        Ok(Self { codepoints, bits })
    }

    pub fn codepoints(&self) -> &[f64] {
        &self.codepoints
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.codepoints.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn codepoint(&self, index: usize) -> Option<f64> {
        self.codepoints.get(index).copied()
    }

    /// Index of the nearest codepoint, lower index on exact ties.
    pub fn nearest(&self, value: f64) -> usize {
        let c = &self.codepoints;
        let upper = c.partition_point(|&p| p < value);
        if upper == 0 {
            0
        } else if upper == c.len() {
            c.len() - 1
        } else if (value - c[upper - 1]).abs() <= (c[upper] - value).abs() {
            upper - 1
        } else {
            upper
        }
    }

    /// Largest gap between adjacent codepoints (0 for a single codepoint).
    pub fn max_gap(&self) -> f64 {
        self.codepoints
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Writes the text form: `bits = b` then a `codepoints = [...]` array,
    /// one value per line at 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# scalar quantizer codebook\n");
        out.push_str(&format!("bits = {}\n", self.bits));
        out.push_str("codepoints = [\n");
        for c in &self.codepoints {
            out.push_str(&format!("    {},\n", format_float(*c)));
        }
        out.push_str("]\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            bits: u32,
            codepoints: Vec<f64>,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Parse {
            line: toml_line(text, e.span()),
            message: e.message().to_string(),
        })?;
        let codebook = Self::new(raw.codepoints)?;
        if codebook.bits != raw.bits {
            return Err(Error::InvalidCodebook(format!(
                "header says {} bits but {} codepoints were listed",
                raw.bits,
                codebook.len()
            )));
        }
        Ok(codebook)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

pub(crate) fn toml_line(text: &str, span: Option<std::ops::Range<usize>>) -> u64 {
    span.map_or(0, |s| {
        text[..s.start.min(text.len())].matches('\n').count() as u64 + 1
    })
}

/// Per-entry bit widths for one measurement vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateAllocation {
    total_bits: u64,
    per_entry: Vec<u32>,
}

impl RateAllocation {
    /// Spreads `total_bits` over `entries`: every entry gets the floor share
    /// and the first `total mod entries` entries one extra bit.
    pub fn split(total_bits: u64, entries: usize) -> Result<Self> {
        if entries == 0 {
            return Err(Error::InvalidBudget("no entries to allocate to".into()));
        }
        if total_bits == 0 {
            return Err(Error::InvalidBudget("bit budget must be positive".into()));
        }
        let base = total_bits / entries as u64;
        let extra = (total_bits % entries as u64) as usize;
        if base == 0 {
            return Err(Error::BudgetTooSmall {
                total: total_bits,
                entries,
            });
        }
        let base = u32::try_from(base)
            .map_err(|_| Error::InvalidBudget(format!("{base} bits per entry")))?;
        let per_entry = (0..entries)
            .map(|i| if i < extra { base + 1 } else { base })
            .collect();
        Ok(Self {
            total_bits,
            per_entry,
        })
    }

    pub fn total_bits(&self) -> u64 {
        self.total_bits
    }

    pub fn per_entry(&self) -> &[u32] {
        &self.per_entry
    }

    pub fn entries(&self) -> usize {
        self.per_entry.len()
    }

    /// The floor share every entry receives.
    pub fn base_bits(&self) -> u32 {
        *self.per_entry.last().expect("non-empty allocation")
    }

    /// Distinct widths, ascending.
    pub fn widths(&self) -> Vec<u32> {
        let mut w = self.per_entry.clone();
        w.sort_unstable();
        w.dedup();
        w
    }
}

/// Converts a rate in bits per signal component to an integer budget
/// R_x = m·r_x, rejecting non-integer products.
pub fn total_budget(m: usize, r_x: f64) -> Result<u64> {
    let exact = m as f64 * r_x;
    let rounded = exact.round();
    if !exact.is_finite() || (exact - rounded).abs() > 1e-9 * exact.abs().max(1.0) {
        return Err(Error::InvalidBudget(format!(
            "m·r_x = {m}·{r_x} = {exact} is not an integer"
        )));
    }
    if rounded <= 0.0 {
        return Err(Error::InvalidBudget(format!("m·r_x = {rounded} must be positive")));
    }
    Ok(rounded as u64)
}

/// Allocation of R_x = m·r_x bits across n measurement entries.
pub fn allocate_bits(m: usize, r_x: f64, n: usize) -> Result<RateAllocation> {
    RateAllocation::split(total_budget(m, r_x)?, n)
}

/// Index list of an encoded measurement vector with the width of each entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedVector {
    indexes: Vec<usize>,
    bits: Vec<u32>,
}

impl QuantizedVector {
    pub fn new(indexes: Vec<usize>, bits: Vec<u32>) -> Result<Self> {
        if indexes.len() != bits.len() {
            return Err(Error::InvalidShape(format!(
                "{} indexes vs {} widths",
                indexes.len(),
                bits.len()
            )));
        }
        for (entry, (&index, &b)) in indexes.iter().zip(&bits).enumerate() {
            if b > MAX_CODEBOOK_BITS || index >= 1usize << b {
                return Err(Error::CorruptIndex {
                    entry,
                    index,
                    size: 1usize << b.min(MAX_CODEBOOK_BITS),
                });
            }
        }
        Ok(Self { indexes, bits })
    }

    pub(crate) fn from_codebooks(indexes: Vec<usize>, codebooks: &[Codebook]) -> Self {
        let bits = codebooks.iter().map(Codebook::bits).collect();
        Self { indexes, bits }
    }

    pub fn indexes(&self) -> &[usize] {
        &self.indexes
    }

    pub fn bits(&self) -> &[u32] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.indexes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indexes.is_empty()
    }

    pub fn total_bits(&self) -> u64 {
        self.bits.iter().map(|&b| u64::from(b)).sum()
    }
}

fn check_codebook_count(entries: usize, codebooks: &[Codebook]) -> Result<()> {
    if entries != codebooks.len() {
        return Err(Error::InvalidShape(format!(
            "{entries} entries but {} codebooks",
            codebooks.len()
        )));
    }
    Ok(())
}

/// Nearest-neighbor coding of every entry.
pub fn encode_nearest(y: &[f64], codebooks: &[Codebook]) -> Result<QuantizedVector> {
    check_codebook_count(y.len(), codebooks)?;
    let indexes = y
        .iter()
        .zip(codebooks)
        .map(|(&v, cb)| cb.nearest(v))
        .collect();
    Ok(QuantizedVector::from_codebooks(indexes, codebooks))
}

/// Table lookup ŷ[n] = codebooks[n][index[n]].
pub fn decode(q: &QuantizedVector, codebooks: &[Codebook]) -> Result<Vec<f64>> {
    decode_indexes(q.indexes(), codebooks)
}

pub fn decode_indexes(indexes: &[usize], codebooks: &[Codebook]) -> Result<Vec<f64>> {
    check_codebook_count(indexes.len(), codebooks)?;
    indexes
        .iter()
        .zip(codebooks)
        .enumerate()
        .map(|(entry, (&index, cb))| {
            cb.codepoint(index).ok_or(Error::CorruptIndex {
                entry,
                index,
                size: cb.len(),
            })
        })
        .collect()
}

/// Result of [`lloyd_train`].
#[derive(Debug, Clone, PartialEq)]
pub struct LloydOutcome {
    pub codebook: Codebook,
    /// Mean squared error of the training samples to the final codebook.
    pub distortion: f64,
    /// Distortion of the codebook entering each iteration, then the final one.
    pub trace: Vec<f64>,
    /// Centroid updates performed.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    mean: f64,
    /// Σ (x − mean)² over the cell.
    scatter: f64,
    count: usize,
}

/// Assigns sorted samples to strictly increasing codepoints. Returns the
/// cell statistics (in codepoint order) and the mean squared error.
fn partition(sorted: &[f64], codepoints: &[f64]) -> (Vec<Option<Cell>>, f64) {
    let mut cells = Vec::with_capacity(codepoints.len());
    let mut total = 0.0;
    let mut start = 0;
    for (i, &c) in codepoints.iter().enumerate() {
        // samples in cell i are those not strictly closer to codepoint i+1
        let end = match codepoints.get(i + 1) {
            Some(&next) => {
                start + sorted[start..].partition_point(|&s| (s - c).abs() <= (next - s).abs())
            }
            None => sorted.len(),
        };
        let slice = &sorted[start..end];
        if slice.is_empty() {
            cells.push(None);
        } else {
            let mean = slice.iter().sum::<f64>() / slice.len() as f64;
            let mut scatter = 0.0;
            for &s in slice {
                total += (s - c) * (s - c);
                scatter += (s - mean) * (s - mean);
            }
            cells.push(Some(Cell {
                mean,
                scatter,
                count: slice.len(),
            }));
        }
        start = end;
    }
    (cells, total / sorted.len() as f64)
}

/// Restores `levels` strictly increasing codepoints from the non-empty
/// cells: repeatedly splits the cell with the largest scatter at its mean ±
/// `offset` and re-partitions, so every split uses real cell statistics.
fn refill(sorted: &[f64], mut cells: Vec<Cell>, levels: usize, offset: f64, distinct: usize) -> Result<Vec<f64>> {
    let degenerate = Error::DegenerateTraining { distinct, levels };
    for _ in 0..4 * levels {
        let mut points: Vec<f64> = cells.iter().map(|c| c.mean).collect();
        if points.len() == levels {
            return Ok(points);
        }
        let worst = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.count > 1 && c.scatter > 0.0)
            .fold(None::<(usize, f64)>, |best, (i, c)| match best {
                Some((_, s)) if s >= c.scatter => best,
                _ => Some((i, c.scatter)),
            })
            .map(|(i, _)| i);
        let Some(worst) = worst else {
            return Err(degenerate);
        };
        let mean = cells[worst].mean;
        points[worst] = mean - offset;
        points.insert(worst + 1, mean + offset);
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(degenerate);
        }
        cells = partition(sorted, &points).0.into_iter().flatten().collect();
    }
    Err(degenerate)
}

/// Trains a `levels`-point scalar quantizer on `samples` with the Lloyd
/// algorithm.
///
/// Codepoints start at the (2i+1)/(2·levels) sample quantiles. Each
/// iteration measures the nearest-codepoint distortion, stops once the
/// relative decrease falls below `tol`, and otherwise moves every codepoint
/// to its cell mean. Empty cells are repaired by splitting the cell with the
/// largest scatter at its mean ± 1e-6·std(samples).
pub fn lloyd_train(samples: &[f64], levels: usize, tol: f64, max_iter: usize) -> Result<LloydOutcome> {
    if levels == 0 || !levels.is_power_of_two() || levels.trailing_zeros() > MAX_CODEBOOK_BITS {
        return Err(Error::InvalidLevels(levels));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite training sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    if sorted.is_empty() || distinct < levels {
        return Err(Error::DegenerateTraining {
            distinct: if sorted.is_empty() { 0 } else { distinct },
            levels,
        });
    }

    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let std = (sorted.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n).sqrt();
    let offset = 1e-6 * std;

    let mut codepoints: Vec<f64> = (0..levels)
        .map(|i| {
            let q = (2 * i + 1) as f64 / (2 * levels) as f64;
            sorted[((q * n) as usize).min(sorted.len() - 1)]
        })
        .collect();
    codepoints.dedup();
    if codepoints.len() < levels {
        let (cells, _) = partition(&sorted, &codepoints);
        codepoints = refill(&sorted, cells.into_iter().flatten().collect(), levels, offset, distinct)?;
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let (cells, distortion) = partition(&sorted, &codepoints);
        let converged = match trace.last() {
            Some(&prev) => prev - distortion < tol * prev,
            None => false,
        };
        trace.push(distortion);
        if converged || distortion == 0.0 || iterations == max_iter {
            let codebook = Codebook::new(codepoints)?;
            return Ok(LloydOutcome {
                codebook,
                distortion,
                trace,
                iterations,
            });
        }
        let filled: Vec<Cell> = cells.iter().flatten().copied().collect();
        codepoints = if filled.len() == levels {
            filled.iter().map(|c| c.mean).collect()
        } else {
            refill(&sorted, filled, levels, offset, distinct)?
        };
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cb(points: &[f64]) -> Codebook {
        Codebook::new(points.to_vec()).unwrap()
    }

    #[test]
    fn allocation_examples() {
        let a = allocate_bits(512, 0.75, 128).unwrap();
        assert!(a.per_entry().iter().all(|&b| b == 3));
        assert_eq!(a.total_bits(), 384);

        assert_eq!(allocate_bits(10, 1.0, 4).unwrap().per_entry(), &[3, 3, 2, 2]);

        let a = RateAllocation::split(384, 100).unwrap();
        assert_eq!(a.per_entry().iter().filter(|&&b| b == 4).count(), 84);
        assert_eq!(a.per_entry().iter().filter(|&&b| b == 3).count(), 16);
        assert_eq!(a.widths(), vec![3, 4]);
        assert_eq!(a.base_bits(), 3);
    }

    #[test]
    fn allocation_errors() {
        assert!(matches!(allocate_bits(10, 0.33, 4), Err(Error::InvalidBudget(_))));
        assert!(matches!(allocate_bits(10, 0.3, 4), Err(Error::BudgetTooSmall { .. })));
        assert!(matches!(allocate_bits(10, 0.0, 4), Err(Error::InvalidBudget(_))));
        assert!(allocate_bits(10, 1.0, 0).is_err());
    }

    #[test]
    fn codebook_validation() {
        assert!(Codebook::new(vec![]).is_err());
        assert!(Codebook::new(vec![0.0, 1.0, 2.0]).is_err());
        assert!(Codebook::new(vec![1.0, 0.0]).is_err());
        assert!(Codebook::new(vec![0.0, 0.0]).is_err());
        assert!(Codebook::new(vec![0.0, f64::NAN]).is_err());
        assert_eq!(cb(&[0.5]).bits(), 0);
        assert_eq!(cb(&[-1.0, 0.0, 1.0, 2.0]).bits(), 2);
    }

    #[test]
    fn nearest_examples() {
        let c = [cb(&[-0.8, 0.8])];
        assert_eq!(encode_nearest(&[0.3], &c).unwrap().indexes(), &[1]);
        assert_eq!(encode_nearest(&[0.0], &c).unwrap().indexes(), &[0]);
        assert_eq!(encode_nearest(&[-9.0], &c).unwrap().indexes(), &[0]);
        assert_eq!(encode_nearest(&[9.0], &c).unwrap().indexes(), &[1]);
        assert!(encode_nearest(&[0.0, 1.0], &c).is_err());
    }

    #[test]
    fn decode_examples() {
        let books = [cb(&[-1.0, 1.0]), cb(&[-2.0, 2.0])];
        let q = QuantizedVector::new(vec![1, 0], vec![1, 1]).unwrap();
        assert_eq!(decode(&q, &books).unwrap(), vec![1.0, -2.0]);

        let zeros = QuantizedVector::new(vec![0, 0], vec![1, 1]).unwrap();
        assert_eq!(decode(&zeros, &books).unwrap(), vec![-1.0, -2.0]);

        let y = [1.0, -2.0];
        assert_eq!(decode(&encode_nearest(&y, &books).unwrap(), &books).unwrap(), y);

        assert!(matches!(
            decode_indexes(&[2, 0], &books),
            Err(Error::CorruptIndex { entry: 0, index: 2, size: 2 })
        ));
        assert!(QuantizedVector::new(vec![4], vec![2]).is_err());
    }

    #[test]
    fn lloyd_two_clusters() {
        let out = lloyd_train(&[-1.0, -1.0, 1.0, 1.0], 2, 1e-9, 100).unwrap();
        assert_eq!(out.codebook.codepoints(), &[-1.0, 1.0]);
        assert_eq!(out.distortion, 0.0);
    }

    #[test]
    fn lloyd_single_level_is_mean() {
        let samples = [0.5, 1.5, -2.0, 4.0, 1.0];
        let out = lloyd_train(&samples, 1, 1e-9, 100).unwrap();
        let mean = samples.iter().sum::<f64>() / 5.0;
        assert!((out.codebook.codepoints()[0] - mean).abs() < 1e-15);
    }

    #[test]
    fn lloyd_errors() {
        assert!(matches!(lloyd_train(&[1.0, 2.0, 3.0], 3, 1e-6, 10), Err(Error::InvalidLevels(3))));
        assert!(matches!(
            lloyd_train(&[1.0, 1.0, 1.0, 2.0], 4, 1e-6, 10),
            Err(Error::DegenerateTraining { distinct: 2, levels: 4 })
        ));
        assert!(lloyd_train(&[1.0, 2.0], 2, 0.0, 10).is_err());
    }

    #[test]
    fn lloyd_repairs_duplicate_quantiles() {
        // quantile initialization lands twice on the repeated value
        let mut samples = vec![0.0; 60];
        samples.extend([1.0, 2.0, 3.0, 10.0]);
        let out = lloyd_train(&samples, 4, 1e-12, 200).unwrap();
        assert_eq!(out.codebook.len(), 4);
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn codebook_text_format() {
        let c = cb(&[-1.5, 0.1, 0.30000000000000004, 7.0]);
        let text = c.to_text();
        assert!(text.contains("bits = 2"));
        assert!(text.contains("1.0000000000000001e-1"));
        assert_eq!(Codebook::from_text(&text).unwrap(), c);

        let bad = "bits = 3\ncodepoints = [0.0, 1.0]\n";
        assert!(matches!(Codebook::from_text(bad), Err(Error::InvalidCodebook(_))));
        let err = Codebook::from_text("codepoints = [0.0, 1.0]\nbits = oops\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    proptest! {
        #[test]
        fn nearest_matches_linear_scan(
            mut points in proptest::collection::btree_set(-1000i32..1000, 8),
            values in proptest::collection::vec(-12.0f64..12.0, 1..20),
            scale in 0.01f64..1.0,
        ) {
            let pts: Vec<f64> = std::mem::take(&mut points).into_iter().map(|p| p as f64 * scale / 100.0).collect();
            let book = Codebook::new(pts.clone()).unwrap();
            for v in values {
                let mut best = 0;
                for i in 1..pts.len() {
                    if (v - pts[i]).abs() < (v - pts[best]).abs() {
                        best = i;
                    }
                }
                prop_assert_eq!(book.nearest(v), best);
                // round trip error bounded by half the largest gap, inside the hull
                if v >= pts[0] && v <= pts[pts.len() - 1] {
                    prop_assert!((pts[book.nearest(v)] - v).abs() <= book.max_gap() / 2.0 + 1e-12);
                }
            }
        }

        #[test]
        fn allocation_conserves_budget(m in 1usize..600, quarter_rates in 1u32..16, n in 1usize..300) {
            let r_x = quarter_rates as f64 / 4.0;
            let total = (m as u64 * quarter_rates as u64) as f64 / 4.0;
            match allocate_bits(m, r_x, n) {
                Ok(a) => {
                    prop_assert_eq!(a.per_entry().iter().map(|&b| b as u64).sum::<u64>() as f64, total);
                    let max = *a.per_entry().iter().max().unwrap();
                    let min = *a.per_entry().iter().min().unwrap();
                    prop_assert!(max - min <= 1 && min >= 1);
                    prop_assert!(a.per_entry().windows(2).all(|w| w[0] >= w[1]));
                }
                Err(Error::InvalidBudget(_)) => prop_assert!(total.fract() != 0.0),
                Err(Error::BudgetTooSmall { .. }) => prop_assert!(total < n as f64),
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }

        #[test]
        fn codebook_text_round_trip(raw in proptest::collection::btree_set(any::<i64>(), 4), shift in -1e6f64..1e6) {
            let pts: Vec<f64> = raw.into_iter().map(|v| v as f64 * 1.234e-9 + shift).collect();
            let mut pts = pts;
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            prop_assume!(pts.len() == 4);
            let c = Codebook::new(pts).unwrap();
            let back = Codebook::from_text(&c.to_text()).unwrap();
            for (a, b) in c.codepoints().iter().zip(back.codepoints()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn lloyd_trace_non_increasing(samples in proptest::collection::vec(-5.0f64..5.0, 16..200), bits in 0u32..3) {
            let levels = 1usize << bits;
            if let Ok(out) = lloyd_train(&samples, levels, 1e-12, 500) {
                for w in out.trace.windows(2) {
                    prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "{:?}", out.trace);
                }
                prop_assert_eq!(out.codebook.len(), levels);
            }
        }
    }
}
