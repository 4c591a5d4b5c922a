//! The activator-inhibitor model: kinetics, the linearization matrices
//! A(lambda, z) and A_inf(lambda), their induced action on ∧²R^4 in Plücker
//! coordinates, asymptotic rates and frames, and essential-spectrum checks.

use crate::error::{Error, Result};
use crate::exterior::{quad_volume, Vec4};
use crate::wave::profile::WaveProfile;
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Reaction kinetics (f, g) with their derivatives, plus the coupling
/// constants sigma > 0 and alpha > 0 of the cross terms -sigma v and
/// +alpha u.
#[derive(Clone)]
pub struct Kinetics {
    f: ScalarFn,
    fp: ScalarFn,
    g: ScalarFn,
    gp: ScalarFn,
    pub sigma: f64,
    pub alpha: f64,
}

impl fmt::Debug for Kinetics {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("Kinetics")
            .field("sigma", &self.sigma)
            .field("alpha", &self.alpha)
            .finish()
    }
}

/// Evaluate a polynomial given by ascending coefficients.
fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn polyder(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

impl Kinetics {
    pub fn new(f: ScalarFn, fp: ScalarFn, g: ScalarFn, gp: ScalarFn, sigma: f64, alpha: f64) -> Result<Self> {
        if !(sigma > 0.0) || !(alpha > 0.0) {
            return Err(Error::Parameter(format!(
                "sigma and alpha must be positive (got sigma = {sigma}, alpha = {alpha})"
            )));
        }
        Ok(Kinetics { f, fp, g, gp, sigma, alpha })
    }

    /// Kinetics from polynomial coefficient lists (ascending powers).
    pub fn from_polynomials(f_coeffs: &[f64], g_coeffs: &[f64], sigma: f64, alpha: f64) -> Result<Self> {
        let fc = f_coeffs.to_vec();
        let gc = g_coeffs.to_vec();
        let fdc = polyder(&fc);
        let gdc = polyder(&gc);
        Kinetics::new(
            Arc::new(move |u| polyval(&fc, u)),
            Arc::new({
                let fdc = fdc.clone();
                move |u| polyval(&fdc, u)
            }),
            Arc::new(move |v| polyval(&gc, v)),
            Arc::new({
                let gdc = gdc.clone();
                move |v| polyval(&gdc, v)
            }),
            sigma,
            alpha,
        )
    }

    /// FitzHugh-Nagumo kinetics: f(u) = u(1-u)(u-a), g(v) = -eps*gamma*v,
    /// sigma = 1, alpha = eps.
    pub fn fhn(a: f64, eps: f64, gamma: f64) -> Result<Self> {
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::Parameter(format!("FHN threshold a must lie in (0, 1/2), got {a}")));
        }
        if !(eps > 0.0) {
            return Err(Error::Parameter(format!("FHN eps must be positive, got {eps}")));
        }
        if gamma < 0.0 {
            return Err(Error::Parameter(format!("FHN gamma must be nonnegative, got {gamma}")));
        }
        // f(u) = -u^3 + (1+a) u^2 - a u
        Kinetics::from_polynomials(&[0.0, -a, 1.0 + a, -1.0], &[0.0, -eps * gamma], 1.0, eps)
    }

    pub fn f(&self, u: f64) -> f64 {
        (self.f)(u)
    }
    pub fn fp(&self, u: f64) -> f64 {
        (self.fp)(u)
    }
    pub fn g(&self, v: f64) -> f64 {
        (self.g)(v)
    }
    pub fn gp(&self, v: f64) -> f64 {
        (self.gp)(v)
    }
}

/// The system together with the wave speed c < 0.
#[derive(Clone, Debug)]
pub struct SystemParams {
    pub kinetics: Kinetics,
    pub c: f64,
}

impl SystemParams {
    pub fn new(kinetics: Kinetics, c: f64) -> Result<Self> {
        if !(c < 0.0) {
            return Err(Error::Parameter(format!("wave speed must be negative, got c = {c}")));
        }
        let params = SystemParams { kinetics, c };
        if !turing_check(&params) {
            return Err(Error::Parameter(
                "kinetics violate the rest-state stability conditions trace DF(0) < 0, det DF(0) > 0".into(),
            ));
        }
        Ok(params)
    }

    /// Same system with a different speed (used while the speed is being
    /// refined by the wave solver).
    pub fn with_speed(&self, c: f64) -> Result<Self> {
        SystemParams::new(self.kinetics.clone(), c)
    }
}

/// true iff trace DF(0) < 0 and det DF(0) > 0 for
/// DF(0) = [[f'(0), -sigma], [alpha, g'(0)]].
pub fn turing_check(params: &SystemParams) -> bool {
    let k = &params.kinetics;
    let tr = k.fp(0.0) + k.gp(0.0);
    let det = k.fp(0.0) * k.gp(0.0) + k.sigma * k.alpha;
    tr < 0.0 && det > 0.0
}

/// Eigenvalues nu1 < nu2 < 0 of DF(0); errors when they are complex or
/// non-simple (oscillatory-tail regime is unsupported).
pub fn rest_state_eigenvalues(params: &SystemParams) -> Result<(f64, f64)> {
    let k = &params.kinetics;
    let tr = k.fp(0.0) + k.gp(0.0);
    let det = k.fp(0.0) * k.gp(0.0) + k.sigma * k.alpha;
    let disc = tr * tr - 4.0 * det;
    if disc <= 0.0 {
        return Err(Error::OscillatoryTails);
    }
    let root = disc.sqrt();
    Ok(((tr - root) / 2.0, (tr + root) / 2.0))
}

/// Asymptotic spectral data of A_inf on the real window I = [-delta, inf).
#[derive(Clone, Debug)]
pub struct AsymptoticData {
    pub nu1: f64,
    pub nu2: f64,
    pub delta: f64,
}

impl AsymptoticData {
    pub fn new(params: &SystemParams) -> Result<Self> {
        let (nu1, nu2) = rest_state_eigenvalues(params)?;
        let delta = lambda_window_from_nus(nu1, nu2)?;
        Ok(AsymptoticData { nu1, nu2, delta })
    }
}

fn lambda_window_from_nus(nu1: f64, nu2: f64) -> Result<f64> {
    if !(nu1 < nu2 && nu2 < 0.0) {
        return Err(Error::OscillatoryTails);
    }
    Ok(-nu2 / 2.0)
}

/// Width delta of the real spectral window I = [-delta, inf) on which all
/// four rates are real and simple; the default is half the gap to nu2.
pub fn lambda_window(params: &SystemParams) -> Result<f64> {
    let (nu1, nu2) = rest_state_eigenvalues(params)?;
    lambda_window_from_nus(nu1, nu2)
}

/// The matrix A(lambda, z) of the first-order eigenvalue system, rows
///   [0, 0, sigma, 0]
///   [0, 0, 0, alpha]
///   [(lambda - f'(u(z)))/sigma, 1, -c, 0]
///   [-1, (lambda - g'(v(z)))/alpha, 0, -c].
pub fn coefficient_matrix(
    params: &SystemParams,
    wave: &WaveProfile,
    lambda: f64,
    z: f64,
) -> Result<[[f64; 4]; 4]> {
    let pt = wave.sample(z)?;
    Ok(coefficient_matrix_at(params, lambda, pt.u, pt.v))
}

/// A(lambda, z) with the profile values supplied directly.
pub fn coefficient_matrix_at(params: &SystemParams, lambda: f64, u: f64, v: f64) -> [[f64; 4]; 4] {
    let k = &params.kinetics;
    let c = params.c;
    [
        [0.0, 0.0, k.sigma, 0.0],
        [0.0, 0.0, 0.0, k.alpha],
        [(lambda - k.fp(u)) / k.sigma, 1.0, -c, 0.0],
        [-1.0, (lambda - k.gp(v)) / k.alpha, 0.0, -c],
    ]
}

/// Limit A_inf(lambda) of the coefficient matrix at the rest state.
pub fn asymptotic_matrix(params: &SystemParams, lambda: f64) -> [[f64; 4]; 4] {
    coefficient_matrix_at(params, lambda, 0.0, 0.0)
}

/// Coefficients of the characteristic polynomial of A_inf(lambda), highest
/// power first: t^4 + 2c t^3 + (c^2+a+b-2L) t^2 + c(a+b-2L) t
/// + ab - L(a+b) + L^2 + sigma*alpha.
pub fn char_poly_coeffs(params: &SystemParams, lambda: f64) -> [f64; 5] {
    let k = &params.kinetics;
    let a = k.fp(0.0);
    let b = k.gp(0.0);
    let c = params.c;
    [
        1.0,
        2.0 * c,
        c * c + a + b - 2.0 * lambda,
        c * (a + b - 2.0 * lambda),
        a * b - lambda * (a + b) + lambda * lambda + k.sigma * k.alpha,
    ]
}

/// The four real rates mu1 < mu2 < 0 < mu3 < mu4 of A_inf(lambda),
/// mu = -c/2 ∓ (1/2) sqrt(c^2 + 4(lambda - nu_i)).
pub fn asymptotic_rates(params: &SystemParams, lambda: f64) -> Result<[f64; 4]> {
    let (nu1, nu2) = rest_state_eigenvalues(params)?;
    if lambda <= nu2 {
        return Err(Error::OutsideRateWindow { lambda, nu2 });
    }
    let c = params.c;
    let r1 = (c * c + 4.0 * (lambda - nu1)).sqrt();
    let r2 = (c * c + 4.0 * (lambda - nu2)).sqrt();
    Ok([
        -c / 2.0 - r1 / 2.0,
        -c / 2.0 - r2 / 2.0,
        -c / 2.0 + r2 / 2.0,
        -c / 2.0 + r1 / 2.0,
    ])
}

/// Unit eigenvectors eta_i of A_inf(lambda) for the rates mu_i, with a
/// deterministic sign convention (the first component of magnitude above
/// 1e-3 is made positive, then eta4 alone is flipped if needed), and the
/// resulting orientation rho = det[eta1 eta2 eta3 eta4] > 0.
pub fn asymptotic_frame(params: &SystemParams, lambda: f64) -> Result<([Vec4; 4], f64)> {
    let (nu1, nu2) = rest_state_eigenvalues(params)?;
    let mu = asymptotic_rates(params, lambda)?;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if (mu[i] - mu[j]).abs() < 1e-8 {
                return Err(Error::NonSimpleRates {
                    lambda,
                    i: i + 1,
                    j: j + 1,
                    gap: (mu[i] - mu[j]).abs(),
                });
            }
        }
    }
    let k = &params.kinetics;
    let a = k.fp(0.0);
    let nus = [nu1, nu2, nu2, nu1];
    let mut etas = [Vec4::default(); 4];
    for i in 0..4 {
        let m = mu[i];
        let nv = nus[i];
        // closed form: (1, (f'(0)-nu)/sigma, mu/sigma, mu (f'(0)-nu)/(sigma alpha))
        let raw = Vec4([
            1.0,
            (a - nv) / k.sigma,
            m / k.sigma,
            m * (a - nv) / (k.sigma * k.alpha),
        ]);
        let mut e = raw.normalize();
        for comp in e.0 {
            if comp.abs() > 1e-3 {
                if comp < 0.0 {
                    e = e.scale(-1.0);
                }
                break;
            }
        }
        etas[i] = e;
    }
    let mut rho = quad_volume(&etas[0], &etas[1], &etas[2], &etas[3]);
    if rho < 0.0 {
        etas[3] = etas[3].scale(-1.0);
        rho = -rho;
    }
    if rho == 0.0 {
        return Err(Error::ProjectionSetup("degenerate asymptotic frame".into()));
    }
    Ok((etas, rho))
}

/// Left (adjoint) unit eigenvector rows of A_inf(0), ordered by rate. Row i
/// annihilates every eta_j with j != i; rows 1,2 cut out V^u(0) and rows
/// 3,4 cut out V^s(0).
pub fn left_rows(params: &SystemParams) -> Result<[Vec4; 4]> {
    let (nu1, nu2) = rest_state_eigenvalues(params)?;
    let mu = asymptotic_rates(params, 0.0)?;
    let k = &params.kinetics;
    let a = k.fp(0.0);
    let c = params.c;
    let nus = [nu1, nu2, nu2, nu1];
    let mut rows = [Vec4::default(); 4];
    for i in 0..4 {
        let m = mu[i];
        let nv = nus[i];
        let w = Vec4([m + c, (m + c) * (nv - a) / k.alpha, k.sigma, nv - a]);
        rows[i] = w.normalize();
    }
    Ok(rows)
}

/// The 6x6 matrix of the induced equation on ∧²R^4 in the fixed Plücker
/// coordinate order (p12, p13, p14, p23, p24, p34).
pub fn induced_matrix(
    params: &SystemParams,
    wave: &WaveProfile,
    lambda: f64,
    z: f64,
) -> Result<[[f64; 6]; 6]> {
    let pt = wave.sample(z)?;
    Ok(induced_matrix_at(params, lambda, pt.u, pt.v))
}

/// Induced 6x6 matrix with the profile values supplied directly.
pub fn induced_matrix_at(params: &SystemParams, lambda: f64, u: f64, v: f64) -> [[f64; 6]; 6] {
    let k = &params.kinetics;
    let c = params.c;
    let fpu = k.fp(u);
    let gpv = k.gp(v);
    let sigma = k.sigma;
    let alpha = k.alpha;
    [
        [0.0, 0.0, alpha, -sigma, 0.0, 0.0],
        [1.0, -c, 0.0, 0.0, 0.0, 0.0],
        [(lambda - gpv) / alpha, 0.0, -c, 0.0, 0.0, sigma],
        [(fpu - lambda) / sigma, 0.0, 0.0, -c, 0.0, -alpha],
        [1.0, 0.0, 0.0, 0.0, -c, 0.0],
        [0.0, 1.0, (lambda - fpu) / sigma, (gpv - lambda) / alpha, 1.0, -2.0 * c],
    ]
}

/// Result of the sampled essential-spectrum clearance scan.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumClearance {
    pub clear: bool,
    /// Largest real part found along the sampled dispersion curves.
    pub k_estimate: f64,
}

/// Solve the dispersion relation chi_{A_inf(lambda)}(ik) = 0 for lambda at
/// each sampled wavenumber k and record the largest real part found. The
/// rest state is spectrally clear when that bound is negative.
pub fn essential_spectrum_clearance(params: &SystemParams, samples: &[f64]) -> SpectrumClearance {
    let k = &params.kinetics;
    let a = k.fp(0.0);
    let b = k.gp(0.0);
    let c = params.c;
    let sa = k.sigma * k.alpha;
    let mut worst = f64::NEG_INFINITY;
    for &kk in samples {
        // chi(ik) as a quadratic in lambda:
        // lambda^2 + lambda (2k^2 - 2ick - (a+b))
        //   + [k^4 - 2ick^3 - (c^2+a+b) k^2 + ick(a+b) + ab + sigma*alpha]
        let p = Complex64::new(2.0 * kk * kk - (a + b), -2.0 * c * kk);
        let q = Complex64::new(
            kk.powi(4) - (c * c + a + b) * kk * kk + a * b + sa,
            -2.0 * c * kk.powi(3) + c * kk * (a + b),
        );
        let disc = (p * p - 4.0 * q).sqrt();
        for root in [(-p + disc) / 2.0, (-p - disc) / 2.0] {
            if root.re > worst {
                worst = root.re;
            }
        }
    }
    SpectrumClearance {
        clear: worst < 0.0,
        k_estimate: worst,
    }
}

/// Default wavenumber grid for the clearance scan.
pub fn default_spectrum_samples(params: &SystemParams) -> Vec<f64> {
    let k = &params.kinetics;
    let a = k.fp(0.0);
    let b = k.gp(0.0);
    let c = params.c;
    let k_max = 10.0 * 1.0_f64.max((a.abs() + b.abs() + k.sigma * k.alpha + c * c).sqrt());
    let n = 2001;
    (0..n).map(|i| k_max * i as f64 / (n - 1) as f64).collect()
}

/// Real and imaginary parts of chi_{A_inf(x+iy)}(ik), used as an algebraic
/// cross-check of the dispersion scan.
pub fn char_poly_reim(params: &SystemParams, x: f64, y: f64, k: f64) -> (f64, f64) {
    let kin = &params.kinetics;
    let a = kin.fp(0.0);
    let b = kin.gp(0.0);
    let c = params.c;
    let sa = kin.sigma * kin.alpha;
    let re = (x + k * k - (a + b) / 2.0).powi(2) - (y - c * k).powi(2) - 0.25 * (a - b).powi(2) + sa;
    let im = (c * k - y) * (-2.0 * k * k + a + b - 2.0 * x);
    (re, im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::{j_apply, omega};
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn toy_params() -> SystemParams {
        // f'(0) = -3, g'(0) = 0, sigma = 1, alpha = 2 -> trace -3, det 2
        let kin = Kinetics::from_polynomials(&[0.0, -3.0], &[0.0, 0.0], 1.0, 2.0).unwrap();
        SystemParams::new(kin, -1.0).unwrap()
    }

    #[test]
    fn turing_examples() {
        assert!(turing_check(&toy_params()));
        let bad = Kinetics::from_polynomials(&[0.0, 1.0], &[0.0, 1.0], 1.0, 2.0).unwrap();
        let bad_params = SystemParams { kinetics: bad, c: -1.0 };
        assert!(!turing_check(&bad_params));
        // FHN satisfies the conditions for any a in (0, 1/2)
        for a in [0.1, 0.25, 0.4] {
            let kin = Kinetics::fhn(a, 0.002, 0.0).unwrap();
            let p = SystemParams { kinetics: kin, c: -0.3 };
            assert!(turing_check(&p));
        }
    }

    #[test]
    fn rates_closed_form_example() {
        // c = -1, nu1 = -2, nu2 = -1, lambda = 0
        // -> (-1, (1-sqrt5)/2, (1+sqrt5)/2, 2)
        let kin = Kinetics::from_polynomials(&[0.0, -3.0], &[0.0, 0.0], 1.0, 2.0).unwrap();
        let p = SystemParams::new(kin, -1.0).unwrap();
        let (nu1, nu2) = rest_state_eigenvalues(&p).unwrap();
        assert_abs_diff_eq!(nu1, -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(nu2, -1.0, epsilon = 1e-14);
        let mu = asymptotic_rates(&p, 0.0).unwrap();
        let s5 = 5.0_f64.sqrt();
        assert_abs_diff_eq!(mu[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[1], (1.0 - s5) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[2], (1.0 + s5) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[3], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[0] + mu[3], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[1] + mu[2], 1.0, epsilon = 1e-14);
        assert!(asymptotic_rates(&p, -1.5).is_err());
    }

    #[test]
    fn rates_match_eigensolver_oracle() {
        let p = toy_params();
        for lambda in [-0.4, 0.0, 0.3, 1.7, 5.0] {
            let mu = asymptotic_rates(&p, lambda).unwrap();
            let mut eig: Vec<f64> = crate::linalg::eigenvalues4(&asymptotic_matrix(&p, lambda))
                .iter()
                .map(|z| z.re)
                .collect();
            eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for i in 0..4 {
                assert_abs_diff_eq!(mu[i], eig[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn frame_eigen_residuals_and_orientation() {
        let p = toy_params();
        for lambda in [-0.4, 0.0, 2.0] {
            let (etas, rho) = asymptotic_frame(&p, lambda).unwrap();
            let mu = asymptotic_rates(&p, lambda).unwrap();
            let a = asymptotic_matrix(&p, lambda);
            for i in 0..4 {
                let av = Vec4([
                    a[0].iter().zip(etas[i].0.iter()).map(|(x, y)| x * y).sum(),
                    a[1].iter().zip(etas[i].0.iter()).map(|(x, y)| x * y).sum(),
                    a[2].iter().zip(etas[i].0.iter()).map(|(x, y)| x * y).sum(),
                    a[3].iter().zip(etas[i].0.iter()).map(|(x, y)| x * y).sum(),
                ]);
                let resid = av.sub(&etas[i].scale(mu[i])).norm();
                assert!(resid < 1e-11, "eigen residual {resid} at i={i}");
            }
            assert!(rho > 0.0);
            assert!(quad_volume(&etas[0], &etas[1], &etas[2], &etas[3]).abs() > 1e-8);
        }
    }

    #[test]
    fn left_rows_annihilate_cross_frames() {
        let p = toy_params();
        let rows = left_rows(&p).unwrap();
        let (etas, _) = asymptotic_frame(&p, 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let dot = rows[i].dot(&etas[j]);
                if i == j {
                    assert!(dot.abs() > 1e-3);
                } else {
                    assert!(dot.abs() < 1e-12, "row {i} vs eta {j}: {dot}");
                }
            }
        }
    }

    #[test]
    fn asymptotic_matrix_traces_and_char_poly() {
        let p = toy_params();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let lambda = rng.gen_range(-0.4..4.0);
            let m = asymptotic_matrix(&p, lambda);
            let tr = m[0][0] + m[1][1] + m[2][2] + m[3][3];
            assert_abs_diff_eq!(tr, -2.0 * p.c, epsilon = 1e-14);
            // char poly from eigenvalues (oracle) vs closed-form coefficients
            let coeffs = char_poly_coeffs(&p, lambda);
            let eig = crate::linalg::eigenvalues4(&m);
            // elementary symmetric functions of the eigenvalues
            let e1: Complex64 = eig.iter().sum();
            let mut e2 = Complex64::new(0.0, 0.0);
            let mut e3 = Complex64::new(0.0, 0.0);
            for i in 0..4 {
                for j in (i + 1)..4 {
                    e2 += eig[i] * eig[j];
                    for l in (j + 1)..4 {
                        e3 += eig[i] * eig[j] * eig[l];
                    }
                }
            }
            let e4: Complex64 = eig.iter().product();
            let scale = coeffs[4].abs().max(1.0);
            assert_abs_diff_eq!(-e1.re, coeffs[1], epsilon = 1e-10 * scale);
            assert_abs_diff_eq!(e2.re, coeffs[2], epsilon = 1e-10 * scale);
            assert_abs_diff_eq!(-e3.re, coeffs[3], epsilon = 1e-10 * scale);
            assert_abs_diff_eq!(e4.re, coeffs[4], epsilon = 1e-10 * scale);
        }
    }

    #[test]
    fn infinitesimal_symplectic_identity() {
        // A^T J + J A = -c J entrywise, with profile values replaced by
        // arbitrary (u, v) since the identity is pointwise
        let p = toy_params();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let lambda = rng.gen_range(-0.4..3.0);
            let u = rng.gen_range(-1.0..1.0);
            let v = rng.gen_range(-1.0..1.0);
            let a = coefficient_matrix_at(&p, lambda, u, v);
            for i in 0..4 {
                for j in 0..4 {
                    // (A^T J + J A)_{ij} = sum_k A_ki J_kj + J_ik A_kj
                    let mut s = 0.0;
                    for k in 0..4 {
                        s += a[k][i] * crate::exterior::J[k][j] + crate::exterior::J[i][k] * a[k][j];
                    }
                    assert_abs_diff_eq!(s, -p.c * crate::exterior::J[i][j], epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn induced_matrix_is_wedge_derivation() {
        let p = toy_params();
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..30 {
            let lambda = rng.gen_range(-0.4..3.0);
            let u = rng.gen_range(-1.0..1.0);
            let v = rng.gen_range(-1.0..1.0);
            let a = coefficient_matrix_at(&p, lambda, u, v);
            let a2 = induced_matrix_at(&p, lambda, u, v);
            let tr = (0..6).map(|i| a2[i][i]).sum::<f64>();
            assert_abs_diff_eq!(tr, -6.0 * p.c, epsilon = 1e-13);

            let y1 = Vec4([rng.gen(), rng.gen(), rng.gen(), rng.gen()]);
            let y2 = Vec4([rng.gen(), rng.gen(), rng.gen(), rng.gen()]);
            let ay1 = mat4_apply(&a, &y1);
            let ay2 = mat4_apply(&a, &y2);
            let lhs = mat6_apply(&a2, &crate::exterior::wedge(&y1, &y2).0);
            let rhs1 = crate::exterior::wedge(&ay1, &y2);
            let rhs2 = crate::exterior::wedge(&y1, &ay2);
            for k in 0..6 {
                assert_abs_diff_eq!(lhs[k], rhs1.0[k] + rhs2.0[k], epsilon = 1e-12 * (1.0 + lhs[k].abs()));
            }
            // p12' row: -sigma p23 + alpha p14
            assert_abs_diff_eq!(a2[0][3], -p.kinetics.sigma, epsilon = 0.0);
            assert_abs_diff_eq!(a2[0][2], p.kinetics.alpha, epsilon = 0.0);
        }
    }

    fn mat4_apply(m: &[[f64; 4]; 4], x: &Vec4) -> Vec4 {
        let mut out = [0.0; 4];
        for i in 0..4 {
            for k in 0..4 {
                out[i] += m[i][k] * x.0[k];
            }
        }
        Vec4(out)
    }

    fn mat6_apply(m: &[[f64; 6]; 6], x: &[f64; 6]) -> [f64; 6] {
        let mut out = [0.0; 6];
        for i in 0..6 {
            for k in 0..6 {
                out[i] += m[i][k] * x[k];
            }
        }
        out
    }

    #[test]
    fn spectrum_clearance_cases() {
        let p = toy_params();
        let samples = default_spectrum_samples(&p);
        let res = essential_spectrum_clearance(&p, &samples);
        assert!(res.clear);
        assert!(res.k_estimate < 0.0);

        // violate det condition: f'(0) g'(0) < 0 with small sigma*alpha
        let kin = Kinetics::from_polynomials(&[0.0, -3.0], &[0.0, 0.5], 0.1, 0.1).unwrap();
        let bad = SystemParams { kinetics: kin, c: -1.0 };
        assert!(!turing_check(&bad));
        let res = essential_spectrum_clearance(&bad, &default_spectrum_samples(&bad));
        assert!(!res.clear);
        assert!(res.k_estimate >= 0.0);
    }

    #[test]
    fn clearance_roots_satisfy_reim_formulas() {
        let p = toy_params();
        // at each sampled k the two dispersion roots must zero the closed-form
        // real/imaginary parts of the characteristic polynomial
        let k = 0.7;
        let a = p.kinetics.fp(0.0);
        let b = p.kinetics.gp(0.0);
        let sa = p.kinetics.sigma * p.kinetics.alpha;
        let c = p.c;
        let pq = Complex64::new(2.0 * k * k - (a + b), -2.0 * c * k);
        let q = Complex64::new(
            k.powi(4) - (c * c + a + b) * k * k + a * b + sa,
            -2.0 * c * k.powi(3) + c * k * (a + b),
        );
        let disc = (pq * pq - 4.0 * q).sqrt();
        for root in [(-pq + disc) / 2.0, (-pq - disc) / 2.0] {
            let (re, im) = char_poly_reim(&p, root.re, root.im, k);
            assert_abs_diff_eq!(re, 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn large_lambda_eigenvalue_split() {
        let p = toy_params();
        let eig = crate::linalg::eigenvalues4(&asymptotic_matrix(&p, 50.0));
        let pos = eig.iter().filter(|z| z.re > 0.0).count();
        assert_eq!(pos, 2);
    }

    #[test]
    fn lambda_window_rules() {
        let p = toy_params();
        assert_abs_diff_eq!(lambda_window(&p).unwrap(), 0.5, epsilon = 1e-14);
        let delta = lambda_window(&p).unwrap();
        assert!(asymptotic_rates(&p, -delta).is_ok());
        // nu1 = nu2 (disc = 0) must be rejected: trace^2 = 4 det
        let kin = Kinetics::from_polynomials(&[0.0, -1.0], &[0.0, -1.0], 1.0, 1.0).unwrap();
        // trace = -2, det = 1+1 = 2 -> disc = 4-8 < 0 -> complex, also rejected
        let p2 = SystemParams { kinetics: kin, c: -1.0 };
        assert!(matches!(lambda_window(&p2), Err(Error::OscillatoryTails)));
    }

    #[test]
    fn omega_j_relation_for_frames() {
        // frame vectors pair to zero under omega within the same stable or
        // unstable pair at lambda = 0 (Lagrangian asymptotic subspaces)
        let p = toy_params();
        let (etas, _) = asymptotic_frame(&p, 0.0).unwrap();
        assert_abs_diff_eq!(omega(&etas[0], &etas[1]), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(omega(&etas[2], &etas[3]), 0.0, epsilon = 1e-12);
        let _ = j_apply(&etas[0]);
    }
}
