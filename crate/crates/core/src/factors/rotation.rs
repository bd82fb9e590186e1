//! Varimax and promax rotations.
//!
//! Varimax follows the Kaiser-normalized SVD iteration; promax powers the
//! varimax solution into a target and fits an oblique transform to it by
//! least squares, rescaled so the factor correlation matrix has unit
//! diagonal.

use nalgebra::DMatrix;

use super::FactorError;

#[derive(Debug, Clone)]
pub struct Rotated {
    pub pattern: DMatrix<f64>,
    pub factor_correlations: DMatrix<f64>,
    /// Maps unrotated to rotated loadings: `pattern = unrotated * rotation`.
    pub rotation: DMatrix<f64>,
}

/// Kaiser-normalized varimax. Returns rotated loadings and the orthogonal
/// rotation matrix.
pub fn varimax(loadings: &DMatrix<f64>, tol: f64, max_iter: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (p, k) = loadings.shape();
    if k < 2 {
        return (loadings.clone(), DMatrix::identity(k, k));
    }
    let norms: Vec<f64> = loadings.row_iter().map(|r| r.norm().max(1e-300)).collect();
    let x = DMatrix::from_fn(p, k, |i, j| loadings[(i, j)] / norms[i]);
    let mut t = DMatrix::<f64>::identity(k, k);
    let mut d = 0.0;
    for _ in 0..max_iter {
        let z = &x * &t;
        let col_ss: Vec<f64> = z.column_iter().map(|c| c.norm_squared()).collect();
        let target = DMatrix::from_fn(p, k, |i, j| z[(i, j)].powi(3) - z[(i, j)] * col_ss[j] / p as f64);
        let b = x.transpose() * target;
        let svd = b.svd(true, true);
        let (Some(u), Some(vt)) = (svd.u, svd.v_t) else { break };
        t = u * vt;
        let d_prev = d;
        d = svd.singular_values.sum();
        if d < d_prev * (1.0 + tol) {
            break;
        }
    }
    let z = &x * &t;
    let rotated = DMatrix::from_fn(p, k, |i, j| z[(i, j)] * norms[i]);
    (rotated, t)
}

/// Reorder columns by decreasing sum of squared loadings and flip each so its
/// largest-magnitude entry is positive.
pub fn orient(pattern: &DMatrix<f64>, phi: &DMatrix<f64>, rotation: &DMatrix<f64>) -> Rotated {
    let (p, k) = pattern.shape();
    let ss: Vec<f64> = pattern.column_iter().map(|c| c.norm_squared()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| ss[b].total_cmp(&ss[a]).then(a.cmp(&b)));
    let sign: Vec<f64> = order
        .iter()
        .map(|&j| {
            let col = pattern.column(j);
            let imax = col.iamax();
            if col[imax] < 0.0 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    Rotated {
        pattern: DMatrix::from_fn(p, k, |i, c| pattern[(i, order[c])] * sign[c]),
        factor_correlations: DMatrix::from_fn(k, k, |a, b| phi[(order[a], order[b])] * sign[a] * sign[b]),
        rotation: DMatrix::from_fn(rotation.nrows(), k, |i, c| rotation[(i, order[c])] * sign[c]),
    }
}

/// Promax rotation of unrotated loadings (`p x k`) with the given power.
pub fn promax_rotate(unrotated: &DMatrix<f64>, power: u32) -> Result<Rotated, FactorError> {
    let k = unrotated.ncols();
    if k == 0 {
        return Err(FactorError::Shape("promax needs at least one factor".into()));
    }
    if power < 1 {
        return Err(FactorError::Shape("promax power must be at least 1".into()));
    }
    if k == 1 {
        let id = DMatrix::identity(1, 1);
        return Ok(orient(unrotated, &id, &id));
    }
    let (vm, t) = varimax(unrotated, 1e-12, 1000);
    let target = vm.map(|v| v * v.abs().powi(power as i32 - 1));
    let gram = vm.transpose() * &vm;
    let gram_inv =
        gram.try_inverse().ok_or_else(|| FactorError::Numerical("varimax loadings are rank deficient".into()))?;
    let mut u = gram_inv * vm.transpose() * target;
    let utu_inv = (u.transpose() * &u)
        .try_inverse()
        .ok_or_else(|| FactorError::Numerical("promax target is rank deficient".into()))?;
    for j in 0..k {
        let s = utu_inv[(j, j)].sqrt();
        u.column_mut(j).scale_mut(s);
    }
    let pattern = &vm * &u;
    let full = t * u;
    let full_inv =
        full.clone().try_inverse().ok_or_else(|| FactorError::Numerical("promax rotation is singular".into()))?;
    let phi = &full_inv * full_inv.transpose();
    Ok(orient(&pattern, &phi, &full))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_factor_is_identity() {
        let l = DMatrix::from_column_slice(3, 1, &[0.5, 0.6, 0.7]);
        let r = promax_rotate(&l, 4).unwrap();
        assert_eq!(r.pattern, l);
        assert_eq!(r.factor_correlations, DMatrix::identity(1, 1));
    }

    #[test]
    fn simple_structure_is_a_fixed_point() {
        let l = DMatrix::from_row_slice(4, 2, &[0.8, 0.0, 0.7, 0.0, 0.0, 0.6, 0.0, 0.5]);
        let r = promax_rotate(&l, 4).unwrap();
        assert!((r.pattern.clone() - &l).amax() < 1e-9, "{}", r.pattern);
        assert!((r.factor_correlations.clone() - DMatrix::identity(2, 2)).amax() < 1e-9);
    }

    #[test]
    fn sign_flip_only_changes_orientation() {
        let l = DMatrix::from_row_slice(4, 2, &[-0.8, 0.0, -0.7, 0.0, 0.0, 0.6, 0.0, 0.9]);
        let r = promax_rotate(&l, 4).unwrap();
        // column with the 0.9 entry has the larger sum of squares (1.17 vs 1.13)
        assert!((r.pattern[(3, 0)] - 0.9).abs() < 1e-9);
        assert!((r.pattern[(0, 1)] - 0.8).abs() < 1e-9);
    }
}
