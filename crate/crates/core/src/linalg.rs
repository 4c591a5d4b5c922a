//! Small dense linear-algebra helpers for 4-dimensional phase-space work.

use crate::error::{Error, Result};
use crate::exterior::Vec4;
use nalgebra::{Matrix2, Matrix4, Vector4};

/// Singular value decomposition of a 4x4 matrix given by columns.
pub struct Svd4 {
    /// Singular values sorted descending.
    pub singular_values: [f64; 4],
    /// Right singular vectors matching `singular_values`.
    pub right_vectors: [Vec4; 4],
    /// Left singular vectors matching `singular_values`.
    pub left_vectors: [Vec4; 4],
}

pub fn svd4(cols: &[Vec4; 4]) -> Svd4 {
    let m = Matrix4::from_columns(&[
        Vector4::from_column_slice(&cols[0].0),
        Vector4::from_column_slice(&cols[1].0),
        Vector4::from_column_slice(&cols[2].0),
        Vector4::from_column_slice(&cols[3].0),
    ]);
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u requested");
    let vt = svd.v_t.expect("svd v_t requested");
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let mut sv = [0.0; 4];
    let mut rv = [Vec4::default(); 4];
    let mut lv = [Vec4::default(); 4];
    for (k, &i) in idx.iter().enumerate() {
        sv[k] = svd.singular_values[i];
        rv[k] = Vec4([vt[(i, 0)], vt[(i, 1)], vt[(i, 2)], vt[(i, 3)]]);
        lv[k] = Vec4([u[(0, i)], u[(1, i)], u[(2, i)], u[(3, i)]]);
    }
    Svd4 {
        singular_values: sv,
        right_vectors: rv,
        left_vectors: lv,
    }
}

/// Largest and smallest singular values of the 4x2 stack [a b], via the
/// eigenvalues of the 2x2 Gram matrix.
pub fn extreme_singular_values_4x2(a: &Vec4, b: &Vec4) -> (f64, f64) {
    let g11 = a.dot(a);
    let g12 = a.dot(b);
    let g22 = b.dot(b);
    let tr = g11 + g22;
    let disc = ((g11 - g22) * (g11 - g22) + 4.0 * g12 * g12).sqrt();
    let l1 = 0.5 * (tr + disc);
    let l2 = 0.5 * (tr - disc);
    (l1.max(0.0).sqrt(), l2.max(0.0).sqrt())
}

/// Orthonormal basis of the span of the given vectors, expected to have
/// dimension `dim`. Modified Gram-Schmidt with column pivoting.
pub fn orthonormal_span(vectors: &[Vec4], dim: usize) -> Result<Vec<Vec4>> {
    let mut pool: Vec<Vec4> = vectors.to_vec();
    let mut basis: Vec<Vec4> = Vec::with_capacity(dim);
    for _ in 0..dim {
        for q in &basis {
            for v in &mut pool {
                let proj = v.dot(q);
                *v = v.sub(&q.scale(proj));
            }
        }
        let (best, norm) = pool
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .ok_or_else(|| Error::Parameter("orthonormal_span: empty input".into()))?;
        if norm == 0.0 {
            return Err(Error::Parameter(
                "orthonormal_span: requested dimension exceeds span".into(),
            ));
        }
        let q = pool.remove(best).scale(1.0 / norm);
        basis.push(q);
    }
    Ok(basis)
}

/// Principal angles between two 2-planes given by (not necessarily
/// orthonormal) bases, returned ascending. Computed through sines, which
/// keeps small angles accurate.
pub fn principal_angles(p: &crate::exterior::PlaneBasis, q: &crate::exterior::PlaneBasis) -> [f64; 2] {
    let po = p.orthonormal();
    let qo = q.orthonormal();
    // residual r_j = (I - P_p) q_j
    let resid = |v: &Vec4| -> Vec4 {
        let c1 = v.dot(&po.b1);
        let c2 = v.dot(&po.b2);
        v.sub(&po.b1.scale(c1)).sub(&po.b2.scale(c2))
    };
    let r1 = resid(&qo.b1);
    let r2 = resid(&qo.b2);
    let (smax, smin) = extreme_singular_values_4x2(&r1, &r2);
    let clamp = |x: f64| x.clamp(-1.0, 1.0);
    let mut angles = [clamp(smin).asin(), clamp(smax).asin()];
    if angles[0] > angles[1] {
        angles.swap(0, 1);
    }
    angles
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn symmetric_eigen2(m: [[f64; 2]; 2]) -> [f64; 2] {
    let a = m[0][0];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let d = m[1][1];
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
    [0.5 * (tr - disc), 0.5 * (tr + disc)]
}

/// Complex eigenvalues of a real 4x4 matrix (oracle helper for tests and
/// the essential-spectrum scan).
pub fn eigenvalues4(m: &[[f64; 4]; 4]) -> Vec<num_complex::Complex64> {
    let mm = Matrix4::from_fn(|i, j| m[i][j]);
    mm.complex_eigenvalues()
        .iter()
        .map(|z| num_complex::Complex64::new(z.re, z.im))
        .collect()
}

/// Solve the dense 2x2 system a x = rhs.
pub fn solve2(a: [[f64; 2]; 2], rhs: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 {
        return None;
    }
    Some([
        (rhs[0] * a[1][1] - rhs[1] * a[0][1]) / det,
        (a[0][0] * rhs[1] - a[1][0] * rhs[0]) / det,
    ])
}

/// Determinant of a 2x2 matrix.
pub fn det2(m: &Matrix2<f64>) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::PlaneBasis;
    use approx::assert_abs_diff_eq;

    #[test]
    fn svd4_identity_and_rank_deficient() {
        let cols = [
            Vec4::basis(0),
            Vec4::basis(1),
            Vec4::basis(2),
            Vec4::basis(3),
        ];
        let s = svd4(&cols);
        for k in 0..4 {
            assert_abs_diff_eq!(s.singular_values[k], 1.0, epsilon = 1e-14);
        }
        let cols = [
            Vec4::new(1.0, 0.0, 0.0, 0.0),
            Vec4::new(2.0, 0.0, 0.0, 0.0),
            Vec4::new(0.0, 1.0, 0.0, 0.0),
            Vec4::new(0.0, 0.0, 1.0, 0.0),
        ];
        let s = svd4(&cols);
        assert!(s.singular_values[3] < 1e-14);
    }

    #[test]
    fn principal_angles_orthogonal_and_shared() {
        let p = PlaneBasis::new(Vec4::basis(0), Vec4::basis(1)).unwrap();
        let q = PlaneBasis::new(Vec4::basis(2), Vec4::basis(3)).unwrap();
        let ang = principal_angles(&p, &q);
        assert_abs_diff_eq!(ang[0], std::f64::consts::FRAC_PI_2, epsilon = 1e-12);

        let r = PlaneBasis::new(Vec4::basis(0), Vec4::basis(2)).unwrap();
        let ang = principal_angles(&p, &r);
        assert_abs_diff_eq!(ang[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ang[1], std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_eigen_basic() {
        let e = symmetric_eigen2([[2.0, 1.0], [1.0, 2.0]]);
        assert_abs_diff_eq!(e[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[1], 3.0, epsilon = 1e-14);
    }
}
