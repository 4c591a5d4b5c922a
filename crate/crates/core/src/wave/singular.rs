//! The singular (fast-slow) homoclinic orbit of the FitzHugh-Nagumo
//! traveling-wave system: fast front at v = 0, slow passage up the right
//! branch of the critical manifold, fast back jump at the equal-speed
//! level v*, and slow return along the left branch.
//!
//! For solver seeding the pieces are made self-consistent in the slow
//! variable: at finite eps the recovery v already charges up across the
//! fast front (v' = eps y with y order one), which shifts the back-jump
//! position by many z units relative to the naive slow-flow clock. The
//! assembly therefore alternates a bounded-y backward pass with a forward
//! v integration until the jump placement settles.

use super::nagumo::{back_front_speed, cubic_levels, cubic_local_max, nagumo_front};
use crate::error::{Error, Result};
use crate::system::{Kinetics, SystemParams};

/// FitzHugh-Nagumo parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhnParams {
    pub a: f64,
    pub eps: f64,
    pub gamma: f64,
}

impl FhnParams {
    pub fn new(a: f64, eps: f64, gamma: f64) -> Result<Self> {
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::Parameter(format!("a must lie in (0, 1/2), got {a}")));
        }
        if !(eps > 0.0) {
            return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
        }
        if gamma < 0.0 || gamma * (1.0 - a) * (1.0 - a) >= 4.0 {
            return Err(Error::Parameter(format!(
                "gamma = {gamma} leaves the unique-fixed-point regime"
            )));
        }
        Ok(FhnParams { a, eps, gamma })
    }

    pub fn kinetics(&self) -> Kinetics {
        Kinetics::fhn(self.a, self.eps, self.gamma).expect("validated parameters")
    }

    /// System at the singular front speed c* (the solver refines c later).
    pub fn system(&self) -> Result<SystemParams> {
        SystemParams::new(self.kinetics(), std::f64::consts::SQRT_2 * (self.a - 0.5))
    }

    pub fn f(&self, u: f64) -> f64 {
        u * (1.0 - u) * (u - self.a)
    }

    pub fn fp(&self, u: f64) -> f64 {
        -3.0 * u * u + 2.0 * (1.0 + self.a) * u - self.a
    }
}

/// A slow segment sampled along the critical manifold: z offsets from the
/// segment start together with v values.
#[derive(Debug, Clone)]
pub struct SlowSegment {
    pub z: Vec<f64>,
    pub v: Vec<f64>,
    /// duration in z of the sampled segment
    pub span: f64,
}

/// The assembled singular orbit.
#[derive(Debug, Clone)]
pub struct SingularOrbit {
    pub params: FhnParams,
    /// Singular wave speed c* = sqrt(2)(a - 1/2).
    pub speed: f64,
    /// Landing point (1, 0, 0, -1/c) on the right branch.
    pub landing: [f64; 4],
    /// Back-jump level solving the equal-speed condition.
    pub v_star: f64,
    /// Branch roots of f(u) = v* (left, middle, right).
    pub roots_star: [f64; 3],
    /// Slow passage on the right branch in the singular clock, v = 0 up to v*.
    pub slow_right: SlowSegment,
    /// Slow return on the left branch, from v* down to the tail floor.
    pub slow_left: SlowSegment,
    /// Self-consistent sampled guess (u, v, w, y) on a uniform grid.
    guess: Vec<[f64; 4]>,
    guess_z0: f64,
    guess_h: f64,
    /// Translation applied so the u'-maximum of the seeded state sits at
    /// exactly z = 0 (the solver's phase condition).
    z_shift: f64,
    /// Picard-refined back-jump center in the seeded parametrization.
    jump_center: f64,
    /// Largest state mismatch at the three piece joints.
    pub endpoint_mismatch: f64,
}

/// Half-width of the fast-jump windows used when checking joint mismatch;
/// long enough that the layer transients are far below 1e-8.
const JOIN_HALF_WIDTH: f64 = 60.0;

fn u_right(p: &FhnParams, v: f64) -> f64 {
    if v <= 0.0 {
        // Newton from u = 1 (exact at v = 0)
        return newton_branch(p, v, 1.0);
    }
    cubic_levels(p.a, v)
        .map(|r| r[2])
        .unwrap_or_else(|_| newton_branch(p, v, 1.0))
}

fn u_left(p: &FhnParams, v: f64) -> f64 {
    if v <= 0.0 {
        return newton_branch(p, v, 0.0);
    }
    cubic_levels(p.a, v)
        .map(|r| r[0])
        .unwrap_or_else(|_| newton_branch(p, v, -0.1))
}

fn newton_branch(p: &FhnParams, v: f64, seed: f64) -> f64 {
    let mut u = seed;
    for _ in 0..80 {
        let step = (p.f(u) - v) / p.fp(u);
        u -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    u
}

/// Slaved slow-manifold value y = (gamma v - u) / c.
fn y_slaved(p: &FhnParams, c: f64, v: f64, u: f64) -> f64 {
    (p.gamma * v - u) / c
}

impl SingularOrbit {
    /// The slow-flow right-hand side dv/dz = (eps/c)(gamma v - u_branch(v)).
    fn slow_rhs(p: &FhnParams, c: f64, v: f64, right: bool) -> f64 {
        let u = if right { u_right(p, v) } else { u_left(p, v) };
        (p.eps / c) * (p.gamma * v - u)
    }

    /// Full 4-dimensional seeded state, with the fast front centered at
    /// z = 0. Coordinates are (u, v, w, y) with u' = w and v' = eps y.
    pub fn state(&self, z: f64) -> [f64; 4] {
        let z = z + self.z_shift;
        let n = self.guess.len();
        let z_end = self.guess_z0 + self.guess_h * (n - 1) as f64;
        if z < self.guess_z0 {
            // far left tail: everything still exponentially small; scale
            // the first sample down at the front's own rate
            let s = ((z - self.guess_z0) / std::f64::consts::SQRT_2).exp();
            let g = self.guess[0];
            return [g[0] * s, g[1] * s, g[2] * s, g[3] * s];
        }
        if z > z_end {
            // right tail: the whole state rides the slow return, which
            // decays at the common exponential rate v'/v
            let g = self.guess[n - 1];
            let rate = if g[1] > 1e-12 {
                (self.params.eps * g[3] / g[1]).clamp(-1.0, -1e-6)
            } else {
                -0.05
            };
            let s = (rate * (z - z_end)).exp();
            return [g[0] * s, g[1] * s, g[2] * s, g[3] * s];
        }
        let t = (z - self.guess_z0) / self.guess_h;
        let i = (t.floor() as usize).min(n - 2);
        let frac = t - i as f64;
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = self.guess[i][k] * (1.0 - frac) + self.guess[i + 1][k] * frac;
        }
        out
    }

    /// z at which the back jump is centered in the seeded parametrization.
    pub fn back_jump_center(&self) -> f64 {
        self.jump_center - self.z_shift
    }

    fn slow_value(seg: &SlowSegment, dz: f64) -> f64 {
        let dz = dz.clamp(0.0, seg.span);
        match seg.z.binary_search_by(|t| t.partial_cmp(&dz).unwrap()) {
            Ok(i) => seg.v[i],
            Err(i) => {
                let i = i.clamp(1, seg.z.len() - 1);
                let t = (dz - seg.z[i - 1]) / (seg.z[i] - seg.z[i - 1]);
                seg.v[i - 1] * (1.0 - t) + seg.v[i] * t
            }
        }
    }
}

/// Integrate a slow segment dv/dz = rhs(v) from v0 towards v1 with RK4 and
/// event-style clamping; returns sampled (z, v).
fn integrate_slow(p: &FhnParams, c: f64, v0: f64, v1: f64, right: bool) -> SlowSegment {
    let rhs = |v: f64| SingularOrbit::slow_rhs(p, c, v, right);
    let mut z = vec![0.0];
    let mut v = vec![v0];
    let dir = (v1 - v0).signum();
    let h = 0.02_f64;
    let mut cur = v0;
    let mut t = 0.0;
    for _ in 0..8_000_000 {
        let k1 = rhs(cur);
        let k2 = rhs(cur + 0.5 * h * k1);
        let k3 = rhs(cur + 0.5 * h * k2);
        let k4 = rhs(cur + h * k3);
        let mut next = cur + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let mut tn = t + h;
        if (next - v1) * dir >= 0.0 {
            let frac = (v1 - cur) / (next - cur);
            tn = t + h * frac.clamp(0.0, 1.0);
            next = v1;
            z.push(tn);
            v.push(next);
            break;
        }
        t = tn;
        cur = next;
        z.push(t);
        v.push(cur);
    }
    let span = *z.last().unwrap();
    SlowSegment { z, v, span }
}

/// u on the orbit as a function of z given the current v(z) samples and
/// jump placement. Uniform composite expansions: through the front,
/// u = front(z) + u3(v) - 1 (the outer branch drifts while the layer
/// rides it); through the back jump the layer profile itself weights the
/// two outer branches. The two composites agree to exponential accuracy
/// in the overlap and are switched there with a short blend.
fn u_of(p: &FhnParams, roots_star: &[f64; 3], v: f64, z: f64, jump_center: f64) -> f64 {
    let sqrt2 = std::f64::consts::SQRT_2;
    let front = 1.0 / (1.0 + (-z / sqrt2).exp());
    let [r1, _, r3] = *roots_star;
    let rate = (r3 - r1) / sqrt2;
    let jump = r1 + (r3 - r1) / (1.0 + (rate * (z - jump_center)).exp());
    let left_composite = front + u_right(p, v) - 1.0;
    let s = ((jump - r1) / (r3 - r1)).clamp(0.0, 1.0);
    let right_composite = jump + s * (u_right(p, v) - r3) + (1.0 - s) * (u_left(p, v) - r1);
    let z_switch = 0.5 * (10.0 + (jump_center - 7.0));
    let t = 1.0 / (1.0 + ((z - z_switch) * 3.0).exp());
    if z < z_switch - 4.0 {
        left_composite
    } else if z > z_switch + 4.0 {
        right_composite
    } else {
        t * left_composite + (1.0 - t) * right_composite
    }
}

/// Assemble the singular orbit: analytic front, landing point, slow
/// passage, equal-speed back jump, and slow return, then the
/// self-consistent guess arrays.
pub fn fhn_singular_orbit(p: &FhnParams) -> Result<SingularOrbit> {
    let front = nagumo_front(p.a)?;
    let c = front.speed;
    let system = p.system()?;
    if !crate::system::turing_check(&system) {
        return Err(Error::Parameter(
            "FHN linearization fails the rest-state conditions".into(),
        ));
    }

    // equal-speed level: back_front_speed(v*) = c*, bisection to 1e-12
    let vmax = cubic_local_max(p.a);
    let gap = |v: f64| back_front_speed(p.a, v).map(|s| s - c);
    let mut lo = 1e-9 * vmax;
    let mut hi = vmax * (1.0 - 1e-9);
    let mut flo = gap(lo)?;
    let fhi = gap(hi)?;
    if flo * fhi > 0.0 {
        return Err(Error::BackJumpNotFound { vmax });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = gap(mid)?;
        if flo * fm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let v_star = 0.5 * (lo + hi);
    let roots_star = cubic_levels(p.a, v_star)?;

    // singular-clock slow segments (exposed pieces of the orbit)
    let slow_right = integrate_slow(p, c, 0.0, v_star, true);
    let v_floor = 1e-12_f64.max(v_star * 1e-10);
    let slow_left = integrate_slow(p, c, v_star, v_floor, false);

    let landing = [1.0, 0.0, 0.0, -1.0 / c];

    // self-consistent guess: alternate the bounded-y backward pass with a
    // forward v integration and re-place the jump where v reaches v*; the
    // placement is under-relaxed and floored just past the front
    let h = 0.01_f64;
    let z0 = -80.0_f64;
    let naive_jc = 10.0 + slow_right.span + 7.0;
    let jc_floor = 14.0;
    let mut jump_center = naive_jc;
    let z_hi = naive_jc + 100.0;
    let n = ((z_hi - z0) / h).round() as usize + 1;
    // initial v: singular clock (0 on the front, slow ramp afterwards)
    let singular_v = |z: f64, jc: f64| -> f64 {
        if z <= 10.0 {
            0.0
        } else if z <= jc - 7.0 {
            SingularOrbit::slow_value(&slow_right, (z - 10.0) / (jc - 17.0) * slow_right.span)
        } else if z <= jc + 7.0 {
            v_star
        } else {
            SingularOrbit::slow_value(&slow_left, z - jc - 7.0)
        }
    };
    let mut v_cur: Vec<f64> = (0..n)
        .map(|i| singular_v(z0 + i as f64 * h, jump_center))
        .collect();

    let u_at = |i: usize, v: &[f64], jc: f64| -> f64 {
        u_of(p, &roots_star, v[i.min(v.len() - 1)], z0 + i as f64 * h, jc)
    };
    let backward_y = |v: &[f64], jc: f64| -> Vec<f64> {
        let mut ys = vec![0.0; n];
        ys[n - 1] = y_slaved(p, c, v[n - 1], u_at(n - 1, v, jc));
        for i in (0..n - 1).rev() {
            // RK4 on the linear equation with linearly interpolated forcing
            let g_hi = p.gamma * v[i + 1] - u_at(i + 1, v, jc);
            let g_lo = p.gamma * v[i] - u_at(i, v, jc);
            let g_mid = 0.5 * (g_hi + g_lo);
            let y = ys[i + 1];
            let f = |yv: f64, g: f64| -c * yv + g;
            let k1 = f(y, g_hi);
            let k2 = f(y - 0.5 * h * k1, g_mid);
            let k3 = f(y - 0.5 * h * k2, g_mid);
            let k4 = f(y - h * k3, g_lo);
            ys[i] = y - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        ys
    };

    let mut ys = backward_y(&v_cur, jump_center);
    for _pass in 0..12 {
        // forward v: v' = eps y, from the (tiny) left-tail value
        let mut v_next = vec![0.0; n];
        for i in 1..n {
            // the true recovery variable stays nonnegative on the pulse;
            // clipping keeps branch lookups on the correct outer sheet
            v_next[i] = (v_next[i - 1] + 0.5 * h * p.eps * (ys[i] + ys[i - 1])).max(0.0);
        }
        // re-place the jump where v crosses v*
        let mut crossed = None;
        for i in 1..n {
            if v_next[i] >= v_star && v_next[i - 1] < v_star {
                let frac = (v_star - v_next[i - 1]) / (v_next[i] - v_next[i - 1]);
                crossed = Some(z0 + (i as f64 - 1.0 + frac) * h);
                break;
            }
        }
        // no crossing means the jump cut the charge too early: push right
        let target = crossed.unwrap_or(jump_center + 4.0).max(jc_floor);
        let moved = target - jump_center;
        jump_center += 0.5 * moved;
        v_cur = v_next;
        ys = backward_y(&v_cur, jump_center);
        if moved.abs() < 0.05 {
            break;
        }
    }

    // splice a proper exponential slow-branch continuation onto the return
    // once v has dropped well under v* (the raw eps * y quadrature drifts
    // there, and a wrong tail excites the solver's soft speed mode)
    let v_switch = v_star / 8.0;
    let mut i_sw = None;
    let jc_idx = ((jump_center - z0) / h) as usize;
    for i in jc_idx..n {
        if v_cur[i] <= v_switch {
            i_sw = Some(i);
            break;
        }
    }
    if let Some(isw) = i_sw {
        let rate = (p.eps * ys[isw] / v_cur[isw]).clamp(-1.0, -1e-6);
        for i in isw + 1..n {
            v_cur[i] = v_cur[isw] * (rate * ((i - isw) as f64 * h)).exp();
        }
        ys = backward_y(&v_cur, jump_center);
    }

    // final guess arrays (y freshly consistent with the final placement)
    let mut guess = Vec::with_capacity(n);
    for i in 0..n {
        let z = z0 + i as f64 * h;
        let u = u_of(p, &roots_star, v_cur[i], z, jump_center);
        guess.push([u, v_cur[i], 0.0, ys[i]]);
    }
    // w as the centered z-derivative of u
    for i in 0..n {
        let (im, ip) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let dz = (ip - im) as f64 * h;
        let w = (guess[ip][0] - guess[im][0]) / dz;
        guess[i][2] = w;
    }

    let mut orbit = SingularOrbit {
        params: *p,
        speed: c,
        landing,
        v_star,
        roots_star,
        slow_right,
        slow_left,
        guess,
        guess_z0: z0,
        guess_h: h,
        z_shift: 0.0,
        jump_center,
        endpoint_mismatch: 0.0,
    };
    // translate so the solver's phase expression u''(0) =
    // sigma(-c w - f(u)/sigma + v) vanishes exactly at z = 0 on the seed
    let phase_of = |orb: &SingularOrbit, z: f64| -> f64 {
        let st = orb.state(z);
        -c * st[2] - p.f(st[0]) + st[1]
    };
    let mut lo = -6.0;
    let mut hi = 6.0;
    let mut glo = phase_of(&orbit, lo);
    if glo * phase_of(&orbit, hi) < 0.0 {
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let gm = phase_of(&orbit, mid);
            if glo * gm <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                glo = gm;
            }
        }
        orbit.z_shift = 0.5 * (lo + hi);
    }
    orbit.endpoint_mismatch = joint_mismatch(&orbit);
    Ok(orbit)
}

/// Largest endpoint mismatch between consecutive pieces of the singular
/// orbit proper (front, slow passage, back jump, slow return), each
/// evaluated a long way into its layer so the fast transients have died
/// out.
fn joint_mismatch(orb: &SingularOrbit) -> f64 {
    let p = &orb.params;
    let c = orb.speed;
    let sqrt2 = std::f64::consts::SQRT_2;
    let w = JOIN_HALF_WIDTH;
    let mut worst = 0.0_f64;

    // front limit vs landing point
    let u = 1.0 / (1.0 + (-w / sqrt2).exp());
    let front_end = [u, 0.0, sqrt2 / 2.0 * u * (1.0 - u), y_slaved(p, c, 0.0, u)];
    for k in 0..4 {
        worst = worst.max((front_end[k] - orb.landing[k]).abs());
    }

    // slow-right end vs back-jump start
    let [r1, _, r3] = orb.roots_star;
    let q = [
        u_right(p, orb.v_star),
        orb.v_star,
        0.0,
        y_slaved(p, c, orb.v_star, u_right(p, orb.v_star)),
    ];
    let rate = (r3 - r1) / sqrt2;
    let s = 1.0 / (1.0 + (rate * (-w)).exp());
    let ub = r1 + (r3 - r1) * s;
    let jump_start = [
        ub,
        orb.v_star,
        -(sqrt2 / 2.0) * (ub - r1) * (r3 - ub),
        y_slaved(p, c, orb.v_star, ub),
    ];
    for k in 0..4 {
        worst = worst.max((jump_start[k] - q[k]).abs());
    }

    // back-jump end vs slow-left start
    let s = 1.0 / (1.0 + (rate * w).exp());
    let ue = r1 + (r3 - r1) * s;
    let jump_end = [
        ue,
        orb.v_star,
        -(sqrt2 / 2.0) * (ue - r1) * (r3 - ue),
        y_slaved(p, c, orb.v_star, ue),
    ];
    let left_start = [
        u_left(p, orb.v_star),
        orb.v_star,
        0.0,
        y_slaved(p, c, orb.v_star, u_left(p, orb.v_star)),
    ];
    for k in 0..4 {
        worst = worst.max((jump_end[k] - left_start[k]).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn landing_point_y_coordinate() {
        let p = FhnParams::new(0.25, 0.002, 0.0).unwrap();
        let orb = fhn_singular_orbit(&p).unwrap();
        assert_abs_diff_eq!(orb.landing[3], 2.0 * std::f64::consts::SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn v_star_matches_equal_speed_closed_form() {
        // bisection result must agree with the analytic middle root
        // r2 = (2 - a)/3, v* = f(r2)
        let p = FhnParams::new(0.25, 0.002, 0.0).unwrap();
        let orb = fhn_singular_orbit(&p).unwrap();
        let r2 = (2.0 - p.a) / 3.0;
        let v_analytic = p.f(r2);
        assert_abs_diff_eq!(orb.v_star, v_analytic, epsilon = 1e-10);
        // frozen regression value for a = 1/4: v* = 35/432
        assert_abs_diff_eq!(orb.v_star, 35.0 / 432.0, epsilon = 1e-10);
    }

    #[test]
    fn joints_match_to_contract() {
        let p = FhnParams::new(0.25, 0.002, 0.0).unwrap();
        let orb = fhn_singular_orbit(&p).unwrap();
        assert!(
            orb.endpoint_mismatch < 1e-8,
            "mismatch {}",
            orb.endpoint_mismatch
        );
    }

    #[test]
    fn seeded_state_is_continuous() {
        let p = FhnParams::new(0.25, 0.002, 0.0).unwrap();
        let orb = fhn_singular_orbit(&p).unwrap();
        let mut prev = orb.state(-40.0);
        let mut z = -40.0;
        while z < orb.back_jump_center() + 120.0 {
            z += 0.05;
            let cur = orb.state(z);
            for k in 0..4 {
                assert!(
                    (cur[k] - prev[k]).abs() < 0.05,
                    "seed jump at z = {z}, comp {k}: {} -> {}",
                    prev[k],
                    cur[k]
                );
            }
            prev = cur;
        }
    }

    #[test]
    fn jump_lands_earlier_than_singular_clock() {
        // the recovery variable charges across the fast front, so the
        // consistent jump placement comes before the naive slow-clock one
        let p = FhnParams::new(0.25, 0.002, 0.0).unwrap();
        let orb = fhn_singular_orbit(&p).unwrap();
        let naive = 10.0 + orb.slow_right.span + 7.0;
        assert!(
            orb.back_jump_center() < naive - 2.0,
            "jump center {} vs naive {}",
            orb.back_jump_center(),
            naive
        );
    }

    #[test]
    fn gamma_regime_guard() {
        assert!(FhnParams::new(0.25, 0.002, 8.0).is_err());
        assert!(FhnParams::new(0.25, 0.002, 0.1).is_ok());
    }
}
