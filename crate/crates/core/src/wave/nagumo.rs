//! Closed-form bistable (Nagumo) front machinery for the cubic
//! f(u) = u(1-u)(u-a): the explicit traveling front, its speed, and the
//! equal-speed formulas for fronts between the outer roots of f(u) - v.

use crate::error::{Error, Result};

/// The explicit front of u'' + c u' + f(u) = 0 connecting 0 and 1 at the
/// unique speed c* = sqrt(2) (a - 1/2) < 0.
#[derive(Debug, Clone, Copy)]
pub struct NagumoFront {
    pub a: f64,
    /// c* = sqrt(2) (a - 1/2).
    pub speed: f64,
}

impl NagumoFront {
    pub fn u(&self, z: f64) -> f64 {
        1.0 / (1.0 + (-z / std::f64::consts::SQRT_2).exp())
    }

    /// u' = (sqrt(2)/2) u (1 - u).
    pub fn du(&self, z: f64) -> f64 {
        let u = self.u(z);
        std::f64::consts::SQRT_2 / 2.0 * u * (1.0 - u)
    }

    /// u'' = (1/2) u (1 - u) (1 - 2u).
    pub fn ddu(&self, z: f64) -> f64 {
        let u = self.u(z);
        0.5 * u * (1.0 - u) * (1.0 - 2.0 * u)
    }

    /// Residual of u'' + c* u' + f(u) at z (identically zero in exact
    /// arithmetic).
    pub fn residual(&self, z: f64) -> f64 {
        let u = self.u(z);
        self.ddu(z) + self.speed * self.du(z) + u * (1.0 - u) * (u - self.a)
    }
}

/// Construct the analytic front; a must lie in (0, 1/2).
pub fn nagumo_front(a: f64) -> Result<NagumoFront> {
    if !(a > 0.0 && a < 0.5) {
        return Err(Error::Parameter(format!(
            "front threshold a must lie in (0, 1/2), got {a}"
        )));
    }
    Ok(NagumoFront {
        a,
        speed: std::f64::consts::SQRT_2 * (a - 0.5),
    })
}

/// The three real roots of u^3 - (1+a) u^2 + a u + v = 0, ascending, i.e.
/// the solutions of f(u) = v for the FHN cubic. Errors when v is outside
/// the three-root window.
pub fn cubic_levels(a: f64, v: f64) -> Result<[f64; 3]> {
    let b = -(1.0 + a);
    let c = a;
    let d = v;
    // depressed form t^3 + p t + q with u = t - b/3
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    if !(p < 0.0) || disc < 0.0 {
        return Err(Error::Parameter(format!(
            "level v = {v} has no three real branch roots (disc = {disc:.3e})"
        )));
    }
    let m = 2.0 * (-p / 3.0).sqrt();
    let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
    let theta = arg.acos() / 3.0;
    let mut roots = [0.0; 3];
    for (k, r) in roots.iter_mut().enumerate() {
        *r = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - b / 3.0;
    }
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(roots)
}

/// Speed of the monotone front of u'' + c u' + (f(u) - v) = 0 that
/// decreases from the right root r3 to the left root r1:
/// c = sqrt(2) ((r1 + r3)/2 - r2).
pub fn back_front_speed(a: f64, v: f64) -> Result<f64> {
    let [r1, r2, r3] = cubic_levels(a, v)?;
    Ok(std::f64::consts::SQRT_2 * ((r1 + r3) / 2.0 - r2))
}

/// Local maximum value of f on (a, 1); levels v in (0, f_max) have three
/// distinct branch roots.
pub fn cubic_local_max(a: f64) -> f64 {
    let up = ((1.0 + a) + (1.0 - a + a * a).sqrt()) / 3.0;
    up * (1.0 - up) * (up - a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn speed_and_midpoint_values() {
        let fr = nagumo_front(0.25).unwrap();
        assert_abs_diff_eq!(fr.speed, -std::f64::consts::SQRT_2 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fr.u(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(fr.du(0.0), std::f64::consts::SQRT_2 / 8.0, epsilon = 1e-15);
        assert!(nagumo_front(0.7).is_err());
        assert!(nagumo_front(0.0).is_err());
    }

    #[test]
    fn front_satisfies_its_ode_on_grid() {
        let fr = nagumo_front(0.25).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..2001 {
            let z = -20.0 + 40.0 * i as f64 / 2000.0;
            worst = worst.max(fr.residual(z).abs());
        }
        assert!(worst < 1e-10, "front residual {worst}");
    }

    #[test]
    fn cubic_levels_match_known_roots() {
        // a = 1/4, v = 35/432 has roots -1/6, 7/12, 5/6
        let v = 35.0 / 432.0;
        let r = cubic_levels(0.25, v).unwrap();
        assert_abs_diff_eq!(r[0], -1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1], 7.0 / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[2], 5.0 / 6.0, epsilon = 1e-12);
        assert!(cubic_levels(0.25, 10.0).is_err());
    }

    #[test]
    fn back_speed_at_zero_level_is_front_speed_reflected() {
        let a = 0.3;
        let s = back_front_speed(a, 0.0).unwrap();
        assert_abs_diff_eq!(s, std::f64::consts::SQRT_2 * (0.5 - a), epsilon = 1e-12);
    }
}
