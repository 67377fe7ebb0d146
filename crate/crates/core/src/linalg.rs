//! Dense helpers shared by the solver and the stiffness assembly.

use nalgebra::{DMatrix, DVector};

/// Singular values below this fraction of the largest are treated as zero.
pub(crate) const RANK_TOL: f64 = 1e-12;

/// Symmetric diagonal equilibration `D` with `D·A·D` having unit row maxima.
fn equilibration(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        a.nrows(),
        a.row_iter().map(|r| {
            let mx = r.amax();
            if mx > 0.0 && mx.is_finite() {
                1.0 / mx.sqrt()
            } else {
                1.0
            }
        }),
    )
}

#[derive(Debug, Clone)]
pub(crate) struct Factored {
    scale: DVector<f64>,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    cutoff: f64,
    pub condition: f64,
    pub rank: usize,
}

/// Equilibrated SVD of a square symmetric matrix.
pub(crate) fn factor(a: &DMatrix<f64>) -> Option<Factored> {
    if !a.iter().all(|v| v.is_finite()) {
        return None;
    }
    let scale = equilibration(a);
    let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| scale[i] * a[(i, j)] * scale[j]);
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cutoff = RANK_TOL * smax * (a.nrows().max(1) as f64);
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    Some(Factored {
        scale,
        svd,
        cutoff,
        condition,
        rank,
    })
}

impl Factored {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.scale.len()
    }

    /// Minimum-norm solution in the equilibrated variables and whether the
    /// system was consistent.
    pub fn solve(&self, b: &DVector<f64>) -> (DVector<f64>, bool) {
        let sb = b.component_mul(&self.scale);
        let y = self.svd.solve(&sb, self.cutoff).expect("svd computed with u and v");
        let consistent = if self.is_full_rank() {
            true
        } else {
            let u = self.svd.u.as_ref().expect("svd computed with u");
            let v_t = self.svd.v_t.as_ref().expect("svd computed with v");
            // residual of the least-squares solve in scaled space
            let recon = u * DMatrix::from_diagonal(&self.svd.singular_values) * (v_t * &y);
            let r = (recon - &sb).norm();
            r <= 1e-9 * sb.norm().max(f64::MIN_POSITIVE)
        };
        (y.component_mul(&self.scale), consistent)
    }

    /// `D·pinv(D·A·D)·D`; the true inverse when `A` is nonsingular.
    pub fn inverse(&self) -> DMatrix<f64> {
        let mut inv = self.svd.clone().pseudo_inverse(self.cutoff).expect("svd computed with u and v");
        for i in 0..inv.nrows() {
            for j in 0..inv.ncols() {
                inv[(i, j)] *= self.scale[i] * self.scale[j];
            }
        }
        inv
    }
}

/// Ascending eigenvalues of the symmetric part of `a`.
pub(crate) fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let s = (a + a.transpose()) * 0.5;
    let mut e: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Orthonormal basis (columns) of the null space of `c`.
pub(crate) fn null_space(c: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = c.ncols();
    if dim == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = c.transpose() * c;
    let eig = g.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let cutoff = 1e-20_f64.max(RANK_TOL * top);
    let cols: Vec<DVector<f64>> = (0..dim)
        .filter(|&i| eig.eigenvalues[i] <= cutoff)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_consistent_system_gives_min_norm() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1e-3, 0.0, 0.0]));
        let f = factor(&a).unwrap();
        assert_eq!(f.rank, 1);
        let (x, ok) = f.solve(&DVector::from_vec(vec![0.002, 0.0, 0.0]));
        assert!(ok);
        assert!((x[0] - 2.0).abs() < 1e-12 && x[1] == 0.0);
        let (_, ok) = f.solve(&DVector::from_vec(vec![0.0, 1.0, 0.0]));
        assert!(!ok);
    }

    #[test]
    fn badly_scaled_inverse() {
        let a = DMatrix::from_row_slice(3, 3, &[1e-8, 0.0, 1.0, 0.0, 1e4, 0.0, 1.0, 0.0, 0.0]);
        let f = factor(&a).unwrap();
        assert!(f.is_full_rank());
        let err = (&a * f.inverse() - DMatrix::identity(3, 3)).amax();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn null_space_of_row() {
        let c = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let z = null_space(&c);
        assert_eq!(z.ncols(), 2);
        assert!((c * z).amax() < 1e-14);
    }
}
