//! Conjugate points, crossing forms, the Maslov index, and the parity
//! identity.
//!
//! The curve z -> E^u(0, z) of Lagrangian planes is intersected with the
//! train of the reference plane E^s(0, tau). Crossings are located as
//! zeros of the detection function beta(z), the 4-form pairing of the
//! (weighted) reference pair against the unstable two-vector; each
//! crossing is weighted by the crossing form omega(xi, A(0, z*) xi) on the
//! intersection, and the right endpoint at tau contributes its positive
//! inertia index.

use crate::bundle::{BundleTrajectory, SolutionTrajectory};
use crate::error::{Error, Result};
use crate::exterior::{omega, wedge, PlaneBasis, TwoVector, Vec4};
use crate::linalg;
use crate::system::{asymptotic_frame, asymptotic_rates, coefficient_matrix_at, SystemParams};
use crate::wave::profile::WaveProfile;

/// Smallest principal angle the validation sweep must keep between V^u(0)
/// and E^s(0, tau').
pub const ANGLE_TOL: f64 = 1e-6;

/// Relative noise gate on the unit-normalized detection pairing; sign
/// structure below this level is integration noise, not geometry.
pub const BETA_NOISE_GATE: f64 = 1e-9;

/// Regularity floor for the crossing form on unit intersection vectors.
pub const REGULARITY_FLOOR: f64 = 1e-6;

/// The pulled-back reference plane E^s(0, tau).
#[derive(Debug, Clone)]
pub struct ReferencePlane {
    pub tau: f64,
    /// weighted strong-stable solution at tau
    pub basis1: Vec4,
    /// phi'(tau)
    pub basis2: Vec4,
    pub validated: bool,
    /// unit two-vector of the zeta-normalized weighted reference pair
    ref_unit: TwoVector,
    /// log scale restoring the true weighted magnitude
    ref_log_scale: f64,
}

impl ReferencePlane {
    pub fn plane(&self) -> Result<PlaneBasis> {
        PlaneBasis::new(self.basis1, self.basis2)
    }
}

/// Build and validate the reference plane from the strong-stable solution
/// and the translation direction at tau. The validation sweep checks that
/// V^u(0) stays clear of E^s(0, tau') for every tau' in [tau, L].
pub fn reference_plane(
    params: &SystemParams,
    wave: &WaveProfile,
    u1: &SolutionTrajectory,
    tau_request: f64,
) -> Result<ReferencePlane> {
    let l = wave.half_length();
    if !(tau_request < l && tau_request > -l) {
        return Err(Error::Parameter(format!(
            "tau = {tau_request} must lie inside (-L, L) with L = {l}"
        )));
    }
    let tau = tau_request;
    let w1 = u1.value(tau, wave)?;
    let phi_tau = wave.phi_prime(tau)?;
    PlaneBasis::new(w1, phi_tau)?;

    // Lagrangian sanity of the reference pair
    let om = omega(&w1, &phi_tau).abs();
    if om > 1e-8 * w1.norm() * phi_tau.norm() {
        return Err(Error::Parameter(format!(
            "reference plane is not Lagrangian to tolerance (|omega| = {om:.3e})"
        )));
    }

    // validation sweep on [tau, L]
    let (etas, _) = asymptotic_frame(params, 0.0)?;
    let vu = PlaneBasis::new(etas[2], etas[3])?;
    let n_sweep = 200;
    for i in 0..=n_sweep {
        let tp = tau + (l - tau) * i as f64 / n_sweep as f64;
        let w1p = u1.value(tp.min(l), wave)?;
        let php = wave.phi_prime(tp.min(l))?;
        let es = PlaneBasis::new(w1p, php)?;
        let angles = linalg::principal_angles(&vu, &es);
        if angles[0] <= ANGLE_TOL {
            return Err(Error::TauTooSmall {
                tau_prime: tp,
                angle: angles[0],
            });
        }
    }

    // zeta-normalized weighted reference two-vector:
    // (W1(tau) / k2) ∧ (e^{-mu2 tau} phi'(tau))
    let mu = asymptotic_rates(params, 0.0)?;
    let (k2, _k3) = crate::bundle::phi_tail_coefficients(params, wave)?;
    let t = wedge(&w1, &phi_tau);
    let norm = t.norm();
    if norm == 0.0 {
        return Err(Error::Parameter("degenerate reference pair".into()));
    }
    let ref_unit = t.scale(1.0 / norm).scale(k2.signum());
    let ref_log_scale = norm.ln() - mu[1] * tau - k2.abs().ln();

    Ok(ReferencePlane {
        tau,
        basis1: w1,
        basis2: phi_tau,
        validated: true,
        ref_unit,
        ref_log_scale,
    })
}

/// The detection function beta(z): the vol* pairing of the weighted
/// reference pair at tau with the weighted unstable two-vector at z. The
/// rate weights are absorbed in the stored representatives.
pub fn detection_beta(ref_plane: &ReferencePlane, unstable: &BundleTrajectory, z: f64) -> Result<f64> {
    let (unit, ls) = beta_unit(ref_plane, unstable, z)?;
    Ok(unit * ls.exp())
}

/// Unit-scale pairing together with the log factor: beta = unit * e^{ls}.
pub fn beta_unit(ref_plane: &ReferencePlane, unstable: &BundleTrajectory, z: f64) -> Result<(f64, f64)> {
    let (tu, ls_u) = unstable.two_vector_scaled(z)?;
    let n = tu.norm();
    let unit = ref_plane.ref_unit.wedge_pairing(&tu.scale(1.0 / n));
    Ok((unit, ref_plane.ref_log_scale + ls_u + n.ln()))
}

/// A conjugate point with its crossing data.
#[derive(Debug, Clone)]
pub struct ConjugatePoint {
    pub z_star: f64,
    pub dim: usize,
    /// orthonormal basis of the intersection
    pub xi: Vec<Vec4>,
    /// eigenvalues of the crossing form on the intersection (dim entries)
    pub gamma: Vec<f64>,
    /// sign of the form: n+ - n-
    pub signature: i32,
    pub regular: bool,
}

/// Crossing-form value omega(xi, A(0, z*) xi).
pub fn crossing_form(params: &SystemParams, wave: &WaveProfile, z_star: f64, xi: &Vec4) -> Result<f64> {
    Ok(crossing_bilinear(params, wave, z_star, xi, xi)?)
}

fn crossing_bilinear(
    params: &SystemParams,
    wave: &WaveProfile,
    z_star: f64,
    x: &Vec4,
    y: &Vec4,
) -> Result<f64> {
    let pt = wave.sample(z_star)?;
    let a = coefficient_matrix_at(params, 0.0, pt.u, pt.v);
    let mut ay = [0.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            ay[i] += a[i][j] * y.0[j];
        }
    }
    Ok(omega(x, &Vec4(ay)))
}

/// Orthonormal basis of the intersection of the unstable plane at z with
/// the reference plane, taken from the null directions of the 4x4 stack.
fn intersection_basis(
    unstable: &BundleTrajectory,
    ref_plane: &ReferencePlane,
    z: f64,
    dim: usize,
) -> Result<Vec<Vec4>> {
    let pu = unstable.plane(z)?;
    let pr = ref_plane.plane()?.orthonormal();
    let stack = [pu.b1, pu.b2, pr.b1.scale(-1.0), pr.b2.scale(-1.0)];
    let svd = linalg::svd4(&stack);
    let mut vecs = Vec::new();
    for k in (4 - dim)..4 {
        let x = svd.right_vectors[k];
        let v = pu.b1.scale(x.0[0]).add(&pu.b2.scale(x.0[1]));
        vecs.push(v);
    }
    linalg::orthonormal_span(&vecs, dim)
}

fn classify_crossing(
    params: &SystemParams,
    wave: &WaveProfile,
    unstable: &BundleTrajectory,
    ref_plane: &ReferencePlane,
    z_star: f64,
    dim: usize,
) -> Result<ConjugatePoint> {
    let xi = intersection_basis(unstable, ref_plane, z_star, dim)?;
    let (gamma, signature, regular) = if dim == 1 {
        let g = crossing_form(params, wave, z_star, &xi[0])?;
        let reg = g.abs() > REGULARITY_FLOOR * xi[0].dot(&xi[0]);
        (vec![g], g.signum() as i32, reg)
    } else {
        let g11 = crossing_bilinear(params, wave, z_star, &xi[0], &xi[0])?;
        let g22 = crossing_bilinear(params, wave, z_star, &xi[1], &xi[1])?;
        let g12 = 0.5
            * (crossing_bilinear(params, wave, z_star, &xi[0], &xi[1])?
                + crossing_bilinear(params, wave, z_star, &xi[1], &xi[0])?);
        let eigs = linalg::symmetric_eigen2([[g11, g12], [g12, g22]]);
        let sig = eigs.iter().map(|e| e.signum() as i32).sum();
        let reg = eigs.iter().all(|e| e.abs() > REGULARITY_FLOOR);
        (eigs.to_vec(), sig, reg)
    };
    if !regular {
        return Err(Error::IrregularCrossing {
            z: z_star,
            gamma: gamma.iter().fold(f64::INFINITY, |m, g| m.min(g.abs())),
        });
    }
    Ok(ConjugatePoint {
        z_star,
        dim,
        xi,
        gamma,
        signature,
        regular,
    })
}

/// Scan beta over (-L, tau], refine its zeros, classify each crossing, and
/// return the interior crossings plus the forced endpoint crossing at tau.
pub fn find_conjugate_points(
    ref_plane: &ReferencePlane,
    params: &SystemParams,
    wave: &WaveProfile,
    unstable: &BundleTrajectory,
) -> Result<(Vec<ConjugatePoint>, ConjugatePoint)> {
    if !ref_plane.validated {
        return Err(Error::Parameter("reference plane was not validated".into()));
    }
    let l = wave.half_length();
    let tau = ref_plane.tau;
    let n = 2000usize.max(4 * unstable.dense.steps).min(400_000);
    let z0 = -l;
    let span = tau - z0;
    let endpoint_margin = 1e-7 * span;

    let mut zs = Vec::with_capacity(n + 1);
    let mut units = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let z = z0 + span * i as f64 / n as f64;
        let (u, _) = beta_unit(ref_plane, unstable, z)?;
        zs.push(z);
        units.push(u);
    }
    let unit_scale = units.iter().fold(0.0_f64, |m, u| m.max(u.abs()));
    let gate = BETA_NOISE_GATE * unit_scale;

    let mut interior = Vec::new();
    let half = |a: f64, b: f64| -> Result<f64> {
        // bisection on the unit pairing
        let mut lo = a;
        let mut hi = b;
        let (mut flo, _) = beta_unit(ref_plane, unstable, lo)?;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let (fm, _) = beta_unit(ref_plane, unstable, mid)?;
            if flo * fm <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
            if hi - lo < 1e-12 * (1.0 + mid.abs()) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    };

    for i in 0..n {
        let (ua, ub) = (units[i], units[i + 1]);
        if ua == 0.0 {
            continue;
        }
        if ua * ub < 0.0 && ua.abs().max(ub.abs()) > gate {
            let z_star = half(zs[i], zs[i + 1])?;
            if (tau - z_star).abs() <= endpoint_margin {
                continue;
            }
            // numerical slope for the 2-dimensional test
            let hstep = span / n as f64;
            let (up, _) = beta_unit(ref_plane, unstable, (z_star + hstep).min(tau))?;
            let (um, _) = beta_unit(ref_plane, unstable, z_star - hstep)?;
            let slope = (up - um) / (2.0 * hstep);
            let local_scale = unit_scale_near(&units, i);
            let dim = if slope.abs() < 1e-8 * local_scale.max(unit_scale * 1e-6) {
                2
            } else {
                1
            };
            interior.push(classify_crossing(params, wave, unstable, ref_plane, z_star, dim)?);
        }
    }

    // near-zero local minima without a sign change: two-dimensional
    // crossing candidates (beta and beta' both vanish there)
    for i in 1..n {
        let (um, u0, up) = (units[i - 1].abs(), units[i].abs(), units[i + 1].abs());
        if u0 < um && u0 < up && u0 < 1e-10 * unit_scale && units[i - 1] * units[i + 1] > 0.0 {
            let local = unit_scale_near(&units, i);
            if local > gate {
                let hstep = span / n as f64;
                let slope = (units[i + 1] - units[i - 1]) / (2.0 * hstep);
                if slope.abs() < 1e-8 * local {
                    if (tau - zs[i]).abs() <= endpoint_margin {
                        continue;
                    }
                    interior.push(classify_crossing(params, wave, unstable, ref_plane, zs[i], 2)?);
                }
            }
        }
    }
    interior.sort_by(|a, b| a.z_star.partial_cmp(&b.z_star).unwrap());
    interior.dedup_by(|a, b| (a.z_star - b.z_star).abs() < 1e-8 * (1.0 + a.z_star.abs()));

    // forced endpoint crossing at tau spanned by phi'(tau)
    let phi_tau = wave.phi_prime(tau)?;
    let xi = phi_tau.normalize();
    let g = crossing_form(params, wave, tau, &xi)?;
    if g.abs() <= REGULARITY_FLOOR * 1e-6 {
        return Err(Error::IrregularCrossing { z: tau, gamma: g });
    }
    let endpoint = ConjugatePoint {
        z_star: tau,
        dim: 1,
        xi: vec![xi],
        gamma: vec![g],
        signature: g.signum() as i32,
        regular: true,
    };
    Ok((interior, endpoint))
}

fn unit_scale_near(units: &[f64], i: usize) -> f64 {
    let lo = i.saturating_sub(50);
    let hi = (i + 50).min(units.len() - 1);
    units[lo..=hi].iter().fold(0.0_f64, |m, u| m.max(u.abs()))
}

/// The assembled index and its parity prediction.
#[derive(Debug, Clone)]
pub struct MaslovResult {
    pub crossings: Vec<ConjugatePoint>,
    pub endpoint: ConjugatePoint,
    pub index: i32,
    /// (-1)^index
    pub parity_prediction: i32,
}

/// Sum the interior signatures and add the endpoint's positive inertia
/// index n+ (right-endpoint convention keeps the index an integer).
pub fn maslov_index(crossings: Vec<ConjugatePoint>, endpoint: ConjugatePoint) -> Result<MaslovResult> {
    for c in crossings.iter().chain(std::iter::once(&endpoint)) {
        if !c.regular {
            return Err(Error::IrregularCrossing {
                z: c.z_star,
                gamma: c.gamma.iter().fold(f64::INFINITY, |m, g| m.min(g.abs())),
            });
        }
    }
    let interior_sum: i32 = crossings.iter().map(|c| c.signature).sum();
    let n_plus: i32 = endpoint.gamma.iter().filter(|&&g| g > 0.0).count() as i32;
    let index = interior_sum + n_plus;
    Ok(MaslovResult {
        crossings,
        endpoint,
        index,
        parity_prediction: if index % 2 == 0 { 1 } else { -1 },
    })
}

/// Parity verdict and the beta'(tau) slope cross-check.
#[derive(Debug, Clone, Copy)]
pub struct ParityReport {
    pub consistent: bool,
    pub index: i32,
    pub lt_sign: i32,
    /// unit-scale slope of the detection pairing at tau (its sign is the
    /// sign of beta'(tau))
    pub beta_slope_unit: f64,
    /// omega(phi'(tau), phi''(tau))
    pub endpoint_omega: f64,
    /// sign beta'(tau) == sign(lt * omega(phi', phi'')(tau))
    pub slope_sign_matches: bool,
}

/// Noise floor below which the invariant counts as numerically zero and
/// the transversality assumption as violated.
pub const LT_FLOOR: f64 = 1e-12;

/// Check (-1)^index against the sign of the Lazutkin-Treschev invariant,
/// with the beta'(tau) slope identity as an internal cross-check.
pub fn parity_check(
    result: &MaslovResult,
    lt: f64,
    ref_plane: &ReferencePlane,
    params: &SystemParams,
    wave: &WaveProfile,
    unstable: &BundleTrajectory,
) -> Result<ParityReport> {
    if !lt.is_finite() || lt.abs() < LT_FLOOR {
        return Err(Error::NonTransverse { lt });
    }
    let lt_sign = if lt > 0.0 { 1 } else { -1 };
    let consistent = result.parity_prediction == lt_sign;

    let tau = ref_plane.tau;
    let h = 1e-4 * (1.0 + tau.abs());
    let (up, _) = beta_unit(ref_plane, unstable, tau + h)?;
    let (um, _) = beta_unit(ref_plane, unstable, tau - h)?;
    let beta_slope_unit = (up - um) / (2.0 * h);
    let phi_tau = wave.phi_prime(tau)?;
    let endpoint_omega = crossing_form(params, wave, tau, &phi_tau)?;
    let slope_sign_matches = beta_slope_unit.signum() == (lt * endpoint_omega).signum();

    Ok(ParityReport {
        consistent,
        index: result.index,
        lt_sign,
        beta_slope_unit,
        endpoint_omega,
        slope_sign_matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maslov_arithmetic_examples() {
        let mk = |z: f64, g: f64| ConjugatePoint {
            z_star: z,
            dim: 1,
            xi: vec![Vec4::basis(0)],
            gamma: vec![g],
            signature: g.signum() as i32,
            regular: true,
        };
        // no interior crossings + positive endpoint -> 1
        let r = maslov_index(vec![], mk(5.0, 0.3)).unwrap();
        assert_eq!(r.index, 1);
        assert_eq!(r.parity_prediction, -1);
        // no interior crossings + negative endpoint -> 0
        let r = maslov_index(vec![], mk(5.0, -0.3)).unwrap();
        assert_eq!(r.index, 0);
        assert_eq!(r.parity_prediction, 1);
        // the FHN pattern -1 +1 -1 with positive endpoint -> 0
        let r = maslov_index(vec![mk(0.0, -1.0), mk(1.0, 1.0), mk(2.0, -1.0)], mk(5.0, 0.5)).unwrap();
        assert_eq!(r.index, 0);
        // irregular crossing refused
        let mut bad = mk(1.0, 1e-9);
        bad.regular = false;
        assert!(maslov_index(vec![bad], mk(5.0, 0.5)).is_err());
    }

    #[test]
    fn crossing_form_scales_quadratically() {
        let w = crate::wave::profile::tests_support::synthetic_wave();
        let kin = crate::system::Kinetics::from_polynomials(&[0.0, -3.0], &[0.0, 0.0], 1.0, 0.5).unwrap();
        let params = SystemParams::new(kin, -1.0).unwrap();
        let xi = Vec4::new(0.3, -0.2, 0.5, 0.1);
        let g1 = crossing_form(&params, &w, 0.4, &xi).unwrap();
        let g2 = crossing_form(&params, &w, 0.4, &xi.scale(2.0)).unwrap();
        assert!((g2 - 4.0 * g1).abs() < 1e-12 * g1.abs().max(1.0));
    }
}
