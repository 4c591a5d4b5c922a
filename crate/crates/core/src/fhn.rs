//! End-to-end FitzHugh-Nagumo pipeline: singular orbit, homoclinic solve,
//! bundle integrations, Evans derivative triangulation, conjugate-point
//! count, and the parity verdict, plus the singular-limit cross-checks on
//! the fast front.

use crate::bundle::{strong_stable_solution, unstable_bundle, BundleTrajectory, SolutionTrajectory};
use crate::error::{Error, Result};
use crate::evans::{evans_derivative_at_zero, DerivativeReport};
use crate::exterior::{PlaneBasis, Vec4};
use crate::linalg;
use crate::maslov::{
    find_conjugate_points, maslov_index, parity_check, reference_plane, MaslovResult, ParityReport,
    ReferencePlane,
};
use crate::system::SystemParams;
use crate::wave::bvp::{solve_homoclinic, HomoclinicGuess, SolverOpts};
use crate::wave::profile::WaveProfile;
use crate::wave::singular::{fhn_singular_orbit, FhnParams};

/// Everything the FHN run produces.
pub struct FhnReport {
    pub params: FhnParams,
    /// converged wave speed
    pub c: f64,
    pub wave: WaveProfile,
    pub maslov: MaslovResult,
    pub parity: ParityReport,
    pub derivative: DerivativeReport,
    pub melnikov: f64,
    pub lt: f64,
    pub d_prime0: f64,
    pub consistent: bool,
    pub reference: ReferencePlane,
    pub unstable: BundleTrajectory,
    pub u1: SolutionTrajectory,
    pub system: SystemParams,
    pub solver_iterations: usize,
}

/// Pipeline options.
#[derive(Debug, Clone, Copy)]
pub struct FhnOpts {
    pub solver: SolverOpts,
    /// explicit tau request overriding the default pull-back rule
    pub tau_request: Option<f64>,
}

impl Default for FhnOpts {
    fn default() -> Self {
        FhnOpts {
            solver: SolverOpts::default(),
            tau_request: None,
        }
    }
}

/// Default pull-back point for the reference plane. The fraction keeps
/// mu2 * tau fixed under the truncation rule for L, so the detection
/// slope and the endpoint crossing form stay above integration noise at
/// every eps while tau remains deep in the tail.
pub fn default_tau(wave: &WaveProfile) -> f64 {
    0.4 * wave.half_length()
}

fn stage<T>(r: Result<T>, name: &'static str) -> Result<T> {
    r.map_err(|e| e.at_stage(name))
}

/// Run the full chain at the given parameters.
pub fn run_fhn(p: &FhnParams, opts: &FhnOpts) -> Result<FhnReport> {
    let orbit = stage(fhn_singular_orbit(p), "singular orbit")?;
    let seed = stage(p.system(), "system setup")?;
    let sol = stage(
        solve_homoclinic(&seed, &HomoclinicGuess::Singular(&orbit), &opts.solver),
        "homoclinic solve",
    )?;
    let system = stage(seed.with_speed(sol.c), "system setup")?;
    let wave = sol.profile;

    let u1 = stage(strong_stable_solution(&system, &wave), "strong-stable run")?;
    let unstable = stage(unstable_bundle(&system, &wave, 0.0), "unstable bundle")?;

    let tau = opts.tau_request.unwrap_or_else(|| default_tau(&wave));
    let reference = stage(reference_plane(&system, &wave, &u1, tau), "reference plane")?;

    let (interior, endpoint) = stage(
        find_conjugate_points(&reference, &system, &wave, &unstable),
        "conjugate points",
    )?;
    let maslov = stage(maslov_index(interior, endpoint), "maslov index")?;

    let derivative = stage(evans_derivative_at_zero(&system, &wave), "evans derivative")?;
    let parity = stage(
        parity_check(&maslov, derivative.lt, &reference, &system, &wave, &unstable),
        "parity check",
    )?;

    let consistent = parity.consistent
        && derivative.rel_gap < crate::evans::DERIVATIVE_GATE
        && (derivative.d_prime0 > 0.0) == (derivative.fd_check > 0.0);

    Ok(FhnReport {
        params: *p,
        c: sol.c,
        maslov,
        parity,
        melnikov: derivative.integral,
        lt: derivative.lt,
        d_prime0: derivative.d_prime0,
        consistent,
        derivative,
        reference,
        unstable,
        u1,
        wave,
        system,
        solver_iterations: sol.newton_iterations,
    })
}

/// Singular-regime prediction of the fast-front conjugate point and the
/// sign of its crossing form.
#[derive(Debug, Clone, Copy)]
pub struct FastFrontCheck {
    /// stable rate of the planar front linearization at u_tau
    pub mu1_tau: f64,
    /// predicted u-level of the conjugate point, 1/2 - mu1(u_tau)/sqrt(2)
    pub u_star: f64,
    /// value of the crossing form expression at u_star
    pub gamma: f64,
    pub gamma_sign: i32,
}

/// Evaluate the closed-form fast-front crossing data at pin level u_tau.
///
/// mu1(u_tau) is the stable eigenvalue of the planar front linearization,
/// (-c - sqrt(c^2 - 4 f'(u_tau)))/2 with c = c*(a); the admissible window
/// -sqrt(2)/2 < mu1 <= -a sqrt(2) (the right end is u_tau = 0) puts
/// u_star = 1/2 - mu1/sqrt(2) inside (1/2, 1).
pub fn fast_front_crossing_check(p: &FhnParams, u_tau: f64) -> Result<FastFrontCheck> {
    let sqrt2 = std::f64::consts::SQRT_2;
    let c = sqrt2 * (p.a - 0.5);
    let fp_tau = p.fp(u_tau);
    let disc = c * c - 4.0 * fp_tau;
    if disc <= 0.0 {
        return Err(Error::Parameter(format!(
            "pin level u_tau = {u_tau} leaves the planar saddle regime"
        )));
    }
    let mu1 = (-c - disc.sqrt()) / 2.0;
    if !(mu1 > -sqrt2 / 2.0 && mu1 <= -p.a * sqrt2 + 1e-12) {
        return Err(Error::FrontBound { mu1 });
    }
    let u_star = 0.5 - mu1 / sqrt2;
    if !(u_star > 0.0 && u_star < 1.0) {
        return Err(Error::FrontBound { mu1 });
    }
    let gamma = -(fp_tau * fp_tau) * (mu1 * mu1 + c * mu1 + p.fp(u_star));
    Ok(FastFrontCheck {
        mu1_tau: mu1,
        u_star,
        gamma,
        gamma_sign: gamma.signum() as i32,
    })
}

/// Comparison of the full-system geometry against the singular predictions.
#[derive(Debug, Clone, Copy)]
pub struct SingularComparison {
    pub eps: f64,
    /// u-coordinate of the first (fast-front) conjugate point
    pub front_crossing_u: f64,
    /// singular prediction at the run's own pin level
    pub u_star: f64,
    /// |u(z*) - u_star|
    pub front_error: f64,
    /// principal angle between E^u(0, z) and the front-cylinder tangent at
    /// the front midpoint
    pub cylinder_angle: f64,
    /// angle between phi' and the left-branch slow tangent at the
    /// slow-piece crossing
    pub slow_parallel_angle: f64,
}

/// Run the pipeline and compare the fast-front crossing location and the
/// unstable-bundle orientation against the singular-limit formulas.
pub fn singular_vs_full_comparison(p: &FhnParams, opts: &FhnOpts) -> Result<(SingularComparison, FhnReport)> {
    let report = run_fhn(p, opts)?;
    let comparison = compare_report(p, &report)?;
    Ok((comparison, report))
}

/// Comparison data extracted from an existing run.
pub fn compare_report(p: &FhnParams, report: &FhnReport) -> Result<SingularComparison> {
    let wave = &report.wave;
    let first = report
        .maslov
        .crossings
        .first()
        .ok_or_else(|| Error::Parameter("run produced no interior crossings".into()))?;
    let u_at_crossing = wave.sample(first.z_star)?.u;
    let u_tau = wave.sample(report.reference.tau)?.u;
    let check = fast_front_crossing_check(p, u_tau)?;

    // cylinder tangent sp{(1, 0, sqrt2/2 - u sqrt2, 0), (0, 0, 0, 1)} at
    // the front midpoint u = 1/2
    let z_mid = front_midpoint(wave)?;
    let u_mid = wave.sample(z_mid)?.u;
    let sqrt2 = std::f64::consts::SQRT_2;
    let cyl = PlaneBasis::new(
        Vec4::new(1.0, 0.0, sqrt2 / 2.0 - u_mid * sqrt2, 0.0),
        Vec4::new(0.0, 0.0, 0.0, 1.0),
    )?;
    let eu = report.unstable.plane(z_mid)?;
    let cylinder_angle = linalg::principal_angles(&cyl, &eu)[0];

    // slow-piece crossing: second interior crossing; phi' there should be
    // nearly parallel to the left-branch tangent (1/f'(u_tau), 1, 0,
    // (1/c)(gamma - 1/f'(u_tau)))
    let slow_parallel_angle = if report.maslov.crossings.len() >= 2 {
        let z2 = report.maslov.crossings[1].z_star;
        let phi = wave.phi_prime(z2)?.normalize();
        let fpt = p.fp(u_tau);
        let tangent = Vec4::new(
            1.0 / fpt,
            1.0,
            0.0,
            (p.gamma - 1.0 / fpt) / report.c,
        )
        .normalize();
        phi.dot(&tangent).abs().clamp(0.0, 1.0).acos()
    } else {
        f64::NAN
    };

    Ok(SingularComparison {
        eps: p.eps,
        front_crossing_u: u_at_crossing,
        u_star: check.u_star,
        front_error: (u_at_crossing - check.u_star).abs(),
        cylinder_angle,
        slow_parallel_angle,
    })
}

/// z where the rising front passes u = 1/2 (near z = 0 by the phase
/// condition).
fn front_midpoint(wave: &WaveProfile) -> Result<f64> {
    let mut lo = -5.0;
    let mut hi = 5.0;
    let mid_val = |z: f64| -> Result<f64> { Ok(wave.sample(z)?.u - 0.5) };
    let mut flo = mid_val(lo)?;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let fm = mid_val(mid)?;
        if flo * fm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fast_front_closed_forms() {
        let p = FhnParams::new(0.25, 0.002, 0.0).unwrap();
        // at u_tau = 0: mu1 = -a sqrt2 exactly, u_star = 1/2 + a
        let chk = fast_front_crossing_check(&p, 0.0).unwrap();
        assert_abs_diff_eq!(chk.mu1_tau, -0.25 * std::f64::consts::SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(chk.u_star, 0.75, epsilon = 1e-12);
        assert!(chk.u_star > 0.5 && chk.u_star < 1.0);
        assert_eq!(chk.gamma_sign, -1);
    }

    #[test]
    fn fast_front_gamma_negative_across_a_grid() {
        for a in [0.1, 0.2, 0.3, 0.4] {
            let p = FhnParams::new(a, 0.002, 0.0).unwrap();
            for u_tau in [0.0, -0.01, -0.05] {
                let chk = fast_front_crossing_check(&p, u_tau).unwrap();
                assert_eq!(chk.gamma_sign, -1, "a = {a}, u_tau = {u_tau}");
                assert!(chk.u_star > 0.5 && chk.u_star < 1.0);
            }
        }
    }

    #[test]
    fn fast_front_bound_violation_rejected() {
        let p = FhnParams::new(0.25, 0.002, 0.0).unwrap();
        // far negative pin levels push mu1 below -sqrt2/2
        assert!(matches!(
            fast_front_crossing_check(&p, -0.6),
            Err(Error::FrontBound { .. })
        ));
    }
}
