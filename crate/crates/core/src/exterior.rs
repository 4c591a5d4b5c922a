//! Exterior algebra on R^4 and the nonstandard symplectic structure.
//!
//! Two-planes in R^4 are tracked through their Plücker image in R^6 with
//! coordinate order (p12, p13, p14, p23, p24, p34). The symplectic form is
//! `omega = de1 ∧ de3 - de2 ∧ de4`, equivalently `omega(a, b) = <a, J b>`
//! with the complex structure [`J`]. A plane is omega-Lagrangian exactly
//! when p13 - p24 vanishes.

use crate::error::{Error, Result};
use crate::linalg;

/// Rank tolerance factor for plane computations: 1e-9 times the largest
/// singular value of the relevant stack.
pub const TOL_RANK: f64 = 1e-9;

/// A point or direction in the 4-dimensional phase space (p, q, r, s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec4(pub [f64; 4]);

impl Vec4 {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Vec4([a, b, c, d])
    }

    /// Standard basis vector e_i (i in 0..4).
    pub fn basis(i: usize) -> Self {
        let mut v = [0.0; 4];
        v[i] = 1.0;
        Vec4(v)
    }

    pub fn dot(&self, other: &Vec4) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, t: f64) -> Vec4 {
        Vec4([self.0[0] * t, self.0[1] * t, self.0[2] * t, self.0[3] * t])
    }

    pub fn add(&self, other: &Vec4) -> Vec4 {
        let mut v = [0.0; 4];
        for i in 0..4 {
            v[i] = self.0[i] + other.0[i];
        }
        Vec4(v)
    }

    pub fn sub(&self, other: &Vec4) -> Vec4 {
        let mut v = [0.0; 4];
        for i in 0..4 {
            v[i] = self.0[i] - other.0[i];
        }
        Vec4(v)
    }

    pub fn normalize(&self) -> Vec4 {
        self.scale(1.0 / self.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

/// Plücker coordinates of a 2-vector in ∧²R^4, ordered
/// (p12, p13, p14, p23, p24, p34).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TwoVector(pub [f64; 6]);

impl TwoVector {
    pub fn p12(&self) -> f64 {
        self.0[0]
    }
    pub fn p13(&self) -> f64 {
        self.0[1]
    }
    pub fn p14(&self) -> f64 {
        self.0[2]
    }
    pub fn p23(&self) -> f64 {
        self.0[3]
    }
    pub fn p24(&self) -> f64 {
        self.0[4]
    }
    pub fn p34(&self) -> f64 {
        self.0[5]
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Euclidean dot product on the six Plücker coordinates.
    pub fn dot(&self, other: &TwoVector) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, t: f64) -> TwoVector {
        let mut v = self.0;
        for x in &mut v {
            *x *= t;
        }
        TwoVector(v)
    }

    pub fn normalize(&self) -> TwoVector {
        self.scale(1.0 / self.norm())
    }

    /// The antisymmetric 4x4 matrix M with M[i][j] = p_ij. For a
    /// decomposable two-vector a ∧ b this is a b^T - b a^T, whose column
    /// space is the plane spanned by a and b.
    pub fn antisymmetric_matrix(&self) -> [[f64; 4]; 4] {
        let [p12, p13, p14, p23, p24, p34] = self.0;
        [
            [0.0, p12, p13, p14],
            [-p12, 0.0, p23, p24],
            [-p13, -p23, 0.0, p34],
            [-p14, -p24, -p34, 0.0],
        ]
    }

    /// Orthonormal basis of the plane represented by a decomposable
    /// two-vector. Fails when the two-vector is zero or numerically far
    /// from decomposable.
    pub fn plane_basis(&self) -> Result<PlaneBasis> {
        let m = self.antisymmetric_matrix();
        let cols: Vec<Vec4> = (0..4)
            .map(|j| Vec4([m[0][j], m[1][j], m[2][j], m[3][j]]))
            .collect();
        let basis = linalg::orthonormal_span(&cols, 2)?;
        PlaneBasis::new(basis[0], basis[1])
    }

    /// Scalar part of the 4-form T ∧ x in ∧³R^4 has four components; this
    /// returns them on the basis (e234, e134, e124, e123) up to sign. Used
    /// to measure containment of a vector in the plane of T.
    pub fn wedge_vector(&self, x: &Vec4) -> [f64; 4] {
        let [p12, p13, p14, p23, p24, p34] = self.0;
        let [x1, x2, x3, x4] = x.0;
        // coefficient of e_j∧e_k∧e_l is p_jk x_l - p_jl x_k + p_kl x_j
        [
            p12 * x3 - p13 * x2 + p23 * x1, // e123
            p12 * x4 - p14 * x2 + p24 * x1, // e124
            p13 * x4 - p14 * x3 + p34 * x1, // e134
            p23 * x4 - p24 * x3 + p34 * x2, // e234
        ]
    }

    /// Sine of the angle between the vector x and the plane of this
    /// (decomposable, nonzero) two-vector.
    pub fn containment_angle_sin(&self, x: &Vec4) -> f64 {
        let w = self.wedge_vector(x);
        let wn = w.iter().map(|t| t * t).sum::<f64>().sqrt();
        wn / (self.norm() * x.norm())
    }

    /// vol* coefficient of the 4-form self ∧ other.
    pub fn wedge_pairing(&self, other: &TwoVector) -> f64 {
        let s = &self.0;
        let u = &other.0;
        s[0] * u[5] - s[1] * u[4] + s[2] * u[3] + s[3] * u[2] - s[4] * u[1] + s[5] * u[0]
    }
}

/// A pair of linearly independent vectors spanning a 2-plane.
#[derive(Debug, Clone, Copy)]
pub struct PlaneBasis {
    pub b1: Vec4,
    pub b2: Vec4,
}

impl PlaneBasis {
    /// Validates linear independence: the smallest singular value of the
    /// 4x2 stack must exceed TOL_RANK times the largest.
    pub fn new(b1: Vec4, b2: Vec4) -> Result<Self> {
        let (smax, smin) = linalg::extreme_singular_values_4x2(&b1, &b2);
        if smin <= TOL_RANK * smax || smax == 0.0 {
            return Err(Error::Parameter(format!(
                "plane basis is numerically dependent (sigma_min/sigma_max = {:.3e})",
                if smax > 0.0 { smin / smax } else { 0.0 }
            )));
        }
        Ok(PlaneBasis { b1, b2 })
    }

    pub fn two_vector(&self) -> TwoVector {
        wedge(&self.b1, &self.b2)
    }

    /// Orthonormalized copy of the basis (modified Gram-Schmidt).
    pub fn orthonormal(&self) -> PlaneBasis {
        let q1 = self.b1.normalize();
        let proj = self.b2.dot(&q1);
        let q2 = self.b2.sub(&q1.scale(proj)).normalize();
        PlaneBasis { b1: q1, b2: q2 }
    }
}

/// The complex structure J with omega(a, b) = <a, J b>.
pub const J: [[f64; 4]; 4] = [
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
];

/// Apply J to a vector.
pub fn j_apply(b: &Vec4) -> Vec4 {
    let [b1, b2, b3, b4] = b.0;
    Vec4([b3, -b4, -b1, b2])
}

/// Wedge product a ∧ b with the minor convention p_ij = a_i b_j - a_j b_i.
pub fn wedge(a: &Vec4, b: &Vec4) -> TwoVector {
    let [a1, a2, a3, a4] = a.0;
    let [b1, b2, b3, b4] = b.0;
    TwoVector([
        a1 * b2 - a2 * b1,
        a1 * b3 - a3 * b1,
        a1 * b4 - a4 * b1,
        a2 * b3 - a3 * b2,
        a2 * b4 - a4 * b2,
        a3 * b4 - a4 * b3,
    ])
}

/// vol* coefficient of a1 ∧ a2 ∧ b1 ∧ b2, i.e. det[a1 a2 b1 b2].
pub fn quad_volume(a1: &Vec4, a2: &Vec4, b1: &Vec4, b2: &Vec4) -> f64 {
    wedge(a1, a2).wedge_pairing(&wedge(b1, b2))
}

/// The symplectic form omega(a, b) = a1 b3 - a3 b1 - (a2 b4 - a4 b2).
pub fn omega(a: &Vec4, b: &Vec4) -> f64 {
    let [a1, a2, a3, a4] = a.0;
    let [b1, b2, b3, b4] = b.0;
    a1 * b3 - a3 * b1 - (a2 * b4 - a4 * b2)
}

/// The z-weighted form Omega(a, b) = e^{cz} omega(a, b).
pub fn omega_weighted(z: f64, c: f64, a: &Vec4, b: &Vec4) -> Result<f64> {
    let w = c * z;
    if w.abs() > 700.0 {
        return Err(Error::WeightingRange(w.abs()));
    }
    Ok(w.exp() * omega(a, b))
}

/// Volume of the quadruple written through omega alone:
/// -det[[w(a1,b1), w(a1,b2)], [w(a2,b1), w(a2,b2)]] + w(a1,a2) w(b1,b2).
pub fn symplectic_det(a1: &Vec4, a2: &Vec4, b1: &Vec4, b2: &Vec4) -> f64 {
    let m11 = omega(a1, b1);
    let m12 = omega(a1, b2);
    let m21 = omega(a2, b1);
    let m22 = omega(a2, b2);
    -(m11 * m22 - m12 * m21) + omega(a1, a2) * omega(b1, b2)
}

/// Quadratic defect p12 p34 - p13 p24 + p14 p23; zero exactly on
/// decomposable two-vectors.
pub fn grassmann_residual(t: &TwoVector) -> f64 {
    t.p12() * t.p34() - t.p13() * t.p24() + t.p14() * t.p23()
}

/// Linear defect p13 - p24; zero exactly on omega-Lagrangian planes
/// (when the two-vector is decomposable). With the minor convention used
/// here, lagrangian_residual(wedge(a, b)) = omega(a, b).
pub fn lagrangian_residual(t: &TwoVector) -> f64 {
    t.p13() - t.p24()
}

/// Dimension and orthonormal basis of the intersection of two planes.
///
/// Decided by the singular values of the 4x4 stack [p1 p2 -q1 -q2]: null
/// vectors (x1, x2, y1, y2) give intersection vectors x1 p1 + x2 p2.
pub fn plane_intersection(p: &PlaneBasis, q: &PlaneBasis) -> Result<(usize, Vec<Vec4>)> {
    let m = [
        p.b1,
        p.b2,
        q.b1.scale(-1.0),
        q.b2.scale(-1.0),
    ];
    let svd = linalg::svd4(&m);
    let smax = svd.singular_values[0];
    let threshold = TOL_RANK * smax;
    for &s in &svd.singular_values {
        if s > threshold / 10.0 && s < threshold * 10.0 {
            return Err(Error::IrregularGeometry {
                sigma: s,
                threshold,
            });
        }
    }
    let mut vectors = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= threshold {
            let x = svd.right_vectors[k];
            let v = p.b1.scale(x.0[0]).add(&p.b2.scale(x.0[1]));
            vectors.push(v);
        }
    }
    let dim = vectors.len();
    let basis = if dim == 0 {
        Vec::new()
    } else {
        linalg::orthonormal_span(&vectors, dim)?
    };
    Ok((dim, basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn e(i: usize) -> Vec4 {
        Vec4::basis(i)
    }

    #[test]
    fn wedge_standard_basis() {
        let t = wedge(&e(0), &e(1));
        assert_eq!(t.0, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let a = Vec4::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(wedge(&a, &a).0, [0.0; 6]);
    }

    #[test]
    fn quad_volume_identity_and_repeats() {
        assert_abs_diff_eq!(quad_volume(&e(0), &e(1), &e(2), &e(3)), 1.0);
        let a = Vec4::new(0.3, -1.2, 0.7, 2.0);
        let b = Vec4::new(1.0, 0.5, -0.4, 0.9);
        let c = Vec4::new(-0.2, 0.8, 1.4, -1.1);
        assert_abs_diff_eq!(quad_volume(&a, &b, &a, &c), 0.0, epsilon = 1e-15);
    }

    /// Independent oracle: cofactor expansion of the 4x4 determinant.
    fn det4_cofactor(cols: [&Vec4; 4]) -> f64 {
        let m: Vec<[f64; 4]> = (0..4)
            .map(|i| [cols[0].0[i], cols[1].0[i], cols[2].0[i], cols[3].0[i]])
            .collect();
        let det3 = |r: [usize; 3], c: [usize; 3]| -> f64 {
            m[r[0]][c[0]] * (m[r[1]][c[1]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[1]])
                - m[r[0]][c[1]] * (m[r[1]][c[0]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[0]])
                + m[r[0]][c[2]] * (m[r[1]][c[0]] * m[r[2]][c[1]] - m[r[1]][c[1]] * m[r[2]][c[0]])
        };
        m[0][0] * det3([1, 2, 3], [1, 2, 3]) - m[0][1] * det3([1, 2, 3], [0, 2, 3])
            + m[0][2] * det3([1, 2, 3], [0, 1, 3])
            - m[0][3] * det3([1, 2, 3], [0, 1, 2])
    }

    #[test]
    fn omega_on_basis_pairs_matches_j() {
        assert_abs_diff_eq!(omega(&e(0), &e(2)), 1.0);
        assert_abs_diff_eq!(omega(&e(1), &e(3)), -1.0);
        for i in 0..4 {
            for j in 0..4 {
                let oij = omega(&e(i), &e(j));
                assert_abs_diff_eq!(oij, e(i).dot(&j_apply(&e(j))), epsilon = 0.0);
                assert_abs_diff_eq!(oij, J[i][j], epsilon = 0.0);
            }
        }
    }

    #[test]
    fn omega_weighted_unit_and_range() {
        let a = Vec4::new(0.1, 0.2, 0.3, 0.4);
        let b = Vec4::new(-1.0, 0.4, 2.0, 0.7);
        assert_abs_diff_eq!(omega_weighted(0.0, -0.5, &a, &b).unwrap(), omega(&a, &b));
        let w = omega_weighted(1.0, -1.0, &e(0), &e(2)).unwrap();
        assert_abs_diff_eq!(w, (-1.0f64).exp(), epsilon = 1e-16);
        assert!(omega_weighted(1500.0, -1.0, &a, &b).is_err());
    }

    #[test]
    fn symplectic_det_basis_example() {
        // -det[[1, 0], [0, -1]] + 0 = 1
        assert_abs_diff_eq!(symplectic_det(&e(0), &e(1), &e(2), &e(3)), 1.0);
        // Lagrangian first pair kills the second term: sp{e1, e2}
        let s = symplectic_det(&e(0), &e(1), &e(2), &e(3));
        assert_abs_diff_eq!(omega(&e(0), &e(1)), 0.0);
        assert_abs_diff_eq!(s, quad_volume(&e(0), &e(1), &e(2), &e(3)));
    }

    #[test]
    fn grassmann_examples() {
        assert_abs_diff_eq!(grassmann_residual(&TwoVector([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])), 0.0);
        assert_abs_diff_eq!(grassmann_residual(&TwoVector([1.0, 0.0, 0.0, 0.0, 0.0, 1.0])), 1.0);
    }

    #[test]
    fn lagrangian_examples_and_sign_relation() {
        assert_abs_diff_eq!(lagrangian_residual(&wedge(&e(0), &e(2))), 1.0);
        assert_abs_diff_eq!(lagrangian_residual(&wedge(&e(0), &e(1))), 0.0);
        // fixed sign convention: residual(wedge(a, b)) = +omega(a, b), all basis pairs
        for i in 0..4 {
            for j in 0..4 {
                let t = wedge(&e(i), &e(j));
                assert_abs_diff_eq!(lagrangian_residual(&t), omega(&e(i), &e(j)), epsilon = 0.0);
            }
        }
    }

    #[test]
    fn plane_intersection_cases() {
        let p = PlaneBasis::new(e(0), e(1)).unwrap();
        let q = PlaneBasis::new(e(2), e(3)).unwrap();
        let (dim, basis) = plane_intersection(&p, &q).unwrap();
        assert_eq!(dim, 0);
        assert!(basis.is_empty());

        let q2 = PlaneBasis::new(e(1), e(2)).unwrap();
        let (dim, basis) = plane_intersection(&p, &q2).unwrap();
        assert_eq!(dim, 1);
        assert_abs_diff_eq!(basis[0].0[1].abs(), 1.0, epsilon = 1e-12);

        let a = Vec4::new(0.3, -1.2, 0.7, 2.0);
        let b = Vec4::new(1.0, 0.5, -0.4, 0.9);
        let r = PlaneBasis::new(a, b).unwrap();
        let (dim, basis) = plane_intersection(&r, &r).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(basis.len(), 2);
    }

    #[test]
    fn plane_basis_from_two_vector_round_trip() {
        let a = Vec4::new(0.3, -1.2, 0.7, 2.0);
        let b = Vec4::new(1.0, 0.5, -0.4, 0.9);
        let t = wedge(&a, &b);
        let pb = t.plane_basis().unwrap();
        // same plane: wedge of recovered basis is parallel to t
        let t2 = pb.two_vector();
        let cosang = t.wedge_pairing(&TwoVector([0.0; 6])).abs(); // dummy to use api
        let _ = cosang;
        let dot: f64 = t.0.iter().zip(t2.0.iter()).map(|(x, y)| x * y).sum();
        let cross = t.norm() * t2.norm();
        assert!(dot.abs() / cross > 1.0 - 1e-12);
        // and both original vectors lie in the recovered plane
        assert!(t2.containment_angle_sin(&a) < 1e-12);
        assert!(t2.containment_angle_sin(&b) < 1e-12);
    }

    proptest! {
        #[test]
        fn wedge_is_decomposable(xs in proptest::array::uniform8(-10.0f64..10.0)) {
            let a = Vec4::new(xs[0], xs[1], xs[2], xs[3]);
            let b = Vec4::new(xs[4], xs[5], xs[6], xs[7]);
            let t = wedge(&a, &b);
            let scale = t.norm().max(1.0);
            prop_assert!(grassmann_residual(&t).abs() <= 1e-14 * scale * scale.max(1.0));
        }

        #[test]
        fn wedge_antisymmetric_bilinear(xs in proptest::array::uniform12(-5.0f64..5.0), t in -3.0f64..3.0) {
            let a = Vec4::new(xs[0], xs[1], xs[2], xs[3]);
            let b = Vec4::new(xs[4], xs[5], xs[6], xs[7]);
            let c = Vec4::new(xs[8], xs[9], xs[10], xs[11]);
            let ab = wedge(&a, &b);
            let ba = wedge(&b, &a);
            for k in 0..6 {
                prop_assert!((ab.0[k] + ba.0[k]).abs() < 1e-12);
            }
            let lin = wedge(&a.scale(t).add(&c), &b);
            let expect: Vec<f64> = (0..6).map(|k| t * ab.0[k] + wedge(&c, &b).0[k]).collect();
            for k in 0..6 {
                prop_assert!((lin.0[k] - expect[k]).abs() < 1e-10);
            }
        }

        #[test]
        fn symplectic_det_equals_quad_volume(xs in proptest::array::uniform16(-1.0f64..1.0)) {
            let a1 = Vec4::new(xs[0], xs[1], xs[2], xs[3]).normalize();
            let a2 = Vec4::new(xs[4] + 2.0, xs[5], xs[6], xs[7]).normalize();
            let b1 = Vec4::new(xs[8], xs[9] + 2.0, xs[10], xs[11]).normalize();
            let b2 = Vec4::new(xs[12], xs[13], xs[14] + 2.0, xs[15]).normalize();
            let lhs = symplectic_det(&a1, &a2, &b1, &b2);
            let rhs = quad_volume(&a1, &a2, &b1, &b2);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn quad_volume_matches_cofactor_oracle(xs in proptest::array::uniform16(-3.0f64..3.0)) {
            let a1 = Vec4::new(xs[0], xs[1], xs[2], xs[3]);
            let a2 = Vec4::new(xs[4], xs[5], xs[6], xs[7]);
            let b1 = Vec4::new(xs[8], xs[9], xs[10], xs[11]);
            let b2 = Vec4::new(xs[12], xs[13], xs[14], xs[15]);
            let lhs = quad_volume(&a1, &a2, &b1, &b2);
            let rhs = det4_cofactor([&a1, &a2, &b1, &b2]);
            prop_assert!((lhs - rhs).abs() < 1e-13 * (1.0 + rhs.abs()) * 100.0);
        }

        #[test]
        fn omega_skew(xs in proptest::array::uniform8(-10.0f64..10.0)) {
            let a = Vec4::new(xs[0], xs[1], xs[2], xs[3]);
            let b = Vec4::new(xs[4], xs[5], xs[6], xs[7]);
            prop_assert!((omega(&a, &b) + omega(&b, &a)).abs() < 1e-12);
        }
    }
}
