//! Small dense kernels: dot products and a Householder least-squares solve
//! on a column subset.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Solution of a dense least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// ‖b − A·coefficients‖₂
    pub residual_norm: f64,
    /// Columns whose Householder pivot vanished; they get a zero coefficient.
    pub dropped_columns: usize,
}

/// Minimises ‖b − A c‖₂ where `columns` are the columns of A, via Householder
/// QR. Columns whose diagonal pivot falls below `1e-12` times the largest
/// column norm are treated as dependent and receive a zero coefficient.
pub fn least_squares(columns: &[&[f64]], b: &[f64]) -> LeastSquares {
    let rows = b.len();
    let cols = columns.len();
    // column-major working copy
    let mut a: Vec<Vec<f64>> = columns.iter().map(|c| c.to_vec()).collect();
    let mut rhs = b.to_vec();
    let scale = a
        .iter()
        .map(|c| norm_sq(c).sqrt())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);

    // row position each accepted column's pivot lives in
    let mut pivots: Vec<Option<usize>> = vec![None; cols];
    let mut row = 0;
    for j in 0..cols {
        if row >= rows {
            break;
        }
        let tail_norm = norm_sq(&a[j][row..]).sqrt();
        if tail_norm <= 1e-12 * scale {
            continue;
        }
        let alpha = if a[j][row] > 0.0 { -tail_norm } else { tail_norm };
        let mut v = a[j][row..].to_vec();
        v[0] -= alpha;
        let v_norm_sq = norm_sq(&v);
        if v_norm_sq > 0.0 {
            for col in a.iter_mut().skip(j) {
                let proj = 2.0 * dot(&v, &col[row..]) / v_norm_sq;
                for (ci, vi) in col[row..].iter_mut().zip(&v) {
                    *ci -= proj * vi;
                }
            }
            let proj = 2.0 * dot(&v, &rhs[row..]) / v_norm_sq;
            for (ri, vi) in rhs[row..].iter_mut().zip(&v) {
                *ri -= proj * vi;
            }
        }
        pivots[j] = Some(row);
        row += 1;
    }

    let mut coefficients = vec![0.0; cols];
    for j in (0..cols).rev() {
        let Some(r) = pivots[j] else { continue };
        let mut acc = rhs[r];
        for (l, piv) in pivots.iter().enumerate().skip(j + 1) {
            if piv.is_some() {
                acc -= a[l][r] * coefficients[l];
            }
        }
        coefficients[j] = acc / a[j][r];
    }
    let residual_norm = norm_sq(&rhs[row..]).sqrt();
    LeastSquares {
        coefficients,
        residual_norm,
        dropped_columns: pivots.iter().filter(|p| p.is_none()).count(),
    }
}
