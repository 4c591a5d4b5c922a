//! Adaptive Dormand-Prince 5(4) integration with dense output and an
//! optional per-step renormalization hook for linear systems that span
//! many exponential orders.

use crate::error::{Error, Result};

/// Integration controls.
#[derive(Debug, Clone, Copy)]
pub struct OdeOpts {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; 0 picks one automatically.
    pub h0: f64,
    pub max_steps: usize,
    /// Renormalize the state to unit norm whenever its norm leaves
    /// [1/limit, limit]; the accumulated log scale is tracked per segment.
    /// Only valid for linear right-hand sides. None disables.
    pub renorm_limit: Option<f64>,
    /// Hard error when the state norm exceeds this (mode takeover guard).
    pub norm_guard: Option<f64>,
}

impl Default for OdeOpts {
    fn default() -> Self {
        OdeOpts {
            rtol: 1e-10,
            atol: 1e-12,
            h0: 0.0,
            max_steps: 50_000_000,
            renorm_limit: None,
            norm_guard: None,
        }
    }
}

/// One accepted step with its dense-output coefficients.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    cont: [Vec<f64>; 5],
    /// log of the true solution scale relative to the stored values
    log_scale: f64,
}

/// Dense trajectory over [t_start, t_end] (t_end may be below t_start).
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    segments: Vec<Segment>,
    t_start: f64,
    t_end: f64,
    pub steps: usize,
    dim: usize,
}

impl DenseTrajectory {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.t_start <= self.t_end {
            (self.t_start, self.t_end)
        } else {
            (self.t_end, self.t_start)
        };
        t >= lo - 1e-9 && t <= hi + 1e-9
    }

    /// Stored-value evaluation together with the segment log scale: the
    /// true solution is value * exp(log_scale).
    pub fn eval_scaled(&self, t: f64) -> (Vec<f64>, f64) {
        let seg = self.find_segment(t);
        let theta = ((t - seg.t0) / seg.h).clamp(0.0, 1.0);
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let c = [
                seg.cont[0][i],
                seg.cont[1][i],
                seg.cont[2][i],
                seg.cont[3][i],
                seg.cont[4][i],
            ];
            y[i] = c[0] + theta * (c[1] + (1.0 - theta) * (c[2] + theta * (c[3] + (1.0 - theta) * c[4])));
        }
        (y, seg.log_scale)
    }

    /// Evaluation with the scale folded back in (may overflow for long
    /// weighted runs; prefer eval_scaled there).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let (mut y, ls) = self.eval_scaled(t);
        let s = ls.exp();
        for x in &mut y {
            *x *= s;
        }
        y
    }

    fn find_segment(&self, t: f64) -> &Segment {
        let forward = self.t_end >= self.t_start;
        let cmp = |seg: &Segment| -> std::cmp::Ordering {
            let a = seg.t0;
            let b = seg.t0 + seg.h;
            if forward {
                if t < a {
                    std::cmp::Ordering::Greater
                } else if t > b {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Equal
                }
            } else if t > a {
                std::cmp::Ordering::Greater
            } else if t < b {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Equal
            }
        };
        match self.segments.binary_search_by(cmp) {
            Ok(i) => &self.segments[i],
            Err(i) => &self.segments[i.min(self.segments.len() - 1)],
        }
    }

    /// Endpoints of every accepted step, in integration order.
    pub fn step_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.segments.iter().map(|s| s.t0).collect();
        pts.push(self.t_end);
        pts
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Integrate y' = f(t, y) from t0 to t1 (either direction), returning a
/// dense trajectory.
pub fn integrate<F>(f: F, t0: f64, t1: f64, y0: &[f64], opts: &OdeOpts) -> Result<DenseTrajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Err(Error::Integration {
            z: t0,
            reason: "empty integration interval".into(),
        });
    }
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut log_scale = 0.0_f64;

    let mut k1 = vec![0.0; dim];
    f(t, &y, &mut k1);
    let mut h = if opts.h0 > 0.0 {
        opts.h0
    } else {
        initial_step(&f, t, &y, &k1, dir, span, opts)
    };

    let mut segments: Vec<Segment> = Vec::new();
    let mut steps = 0usize;
    let mut k = vec![vec![0.0; dim]; 7];
    k[0].copy_from_slice(&k1);

    while (t - t1) * dir < 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::Integration {
                z: t,
                reason: format!("step limit {} exhausted", opts.max_steps),
            });
        }
        if h > (t1 - t).abs() {
            h = (t1 - t).abs();
        }
        let hs = h * dir;

        let stage = |coefs: &[(f64, usize)], y: &[f64], k: &[Vec<f64>], out: &mut Vec<f64>| {
            for i in 0..dim {
                let mut acc = 0.0;
                for &(a, j) in coefs {
                    acc += a * k[j][i];
                }
                out[i] = y[i] + hs * acc;
            }
        };

        let mut yt = vec![0.0; dim];
        stage(&[(A21, 0)], &y, &k, &mut yt);
        f(t + C2 * hs, &yt, &mut k1);
        k[1].copy_from_slice(&k1);
        stage(&[(A31, 0), (A32, 1)], &y, &k, &mut yt);
        f(t + C3 * hs, &yt, &mut k1);
        k[2].copy_from_slice(&k1);
        stage(&[(A41, 0), (A42, 1), (A43, 2)], &y, &k, &mut yt);
        f(t + C4 * hs, &yt, &mut k1);
        k[3].copy_from_slice(&k1);
        stage(&[(A51, 0), (A52, 1), (A53, 2), (A54, 3)], &y, &k, &mut yt);
        f(t + C5 * hs, &yt, &mut k1);
        k[4].copy_from_slice(&k1);
        stage(&[(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)], &y, &k, &mut yt);
        f(t + hs, &yt, &mut k1);
        k[5].copy_from_slice(&k1);
        // 5th-order solution
        let mut ynew = vec![0.0; dim];
        for i in 0..dim {
            ynew[i] = y[i]
                + hs * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        f(t + hs, &ynew, &mut k1);
        k[6].copy_from_slice(&k1);

        // scaled error norm
        let mut err = 0.0_f64;
        for i in 0..dim {
            let e = hs
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / dim as f64).sqrt();

        if err <= 1.0 {
            // dense output coefficients (Hairer's contd5)
            let mut cont = [
                vec![0.0; dim],
                vec![0.0; dim],
                vec![0.0; dim],
                vec![0.0; dim],
                vec![0.0; dim],
            ];
            for i in 0..dim {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k[0][i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - hs * k[6][i] - bspl;
                cont[4][i] = hs
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                        + D7 * k[6][i]);
            }
            segments.push(Segment {
                t0: t,
                h: hs,
                cont,
                log_scale,
            });
            t += hs;
            y = ynew;
            k[0] = k[6].clone(); // FSAL
            steps += 1;

            let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
            if let Some(guard) = opts.norm_guard {
                if norm * log_scale.exp() > guard || log_scale > guard.ln() {
                    return Err(Error::ModeTakeover { z: t });
                }
            }
            if let Some(limit) = opts.renorm_limit {
                if norm > limit || norm < 1.0 / limit {
                    let ln = norm.ln();
                    log_scale += ln;
                    for x in &mut y {
                        *x /= norm;
                    }
                    for x in &mut k[0] {
                        *x /= norm;
                    }
                }
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            h *= fac;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
            if h < 1e-14 * span {
                return Err(Error::Integration {
                    z: t,
                    reason: format!("step size underflow (err = {err:.3e})"),
                });
            }
        }
    }

    Ok(DenseTrajectory {
        segments,
        t_start: t0,
        t_end: t1,
        steps,
        dim,
    })
}

fn initial_step<F>(f: &F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, span: f64, opts: &OdeOpts) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let sc: Vec<f64> = y0.iter().map(|y| opts.atol + opts.rtol * y.abs()).collect();
    let d0 = (y0.iter().zip(&sc).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / dim as f64).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(f, s)| (f / s).powi(2)).sum::<f64>() / dim as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let mut y1 = vec![0.0; dim];
    for i in 0..dim {
        y1[i] = y0[i] + dir * h0 * f0[i];
    }
    let mut f1 = vec![0.0; dim];
    f(t0 + dir * h0, &y1, &mut f1);
    let d2 = (f1
        .iter()
        .zip(f0)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        / dim as f64)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    h0.min(h1).min(span).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_forward_and_backward() {
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -0.7 * y[0];
        };
        let traj = integrate(f, 0.0, 5.0, &[2.0], &OdeOpts::default()).unwrap();
        assert_abs_diff_eq!(traj.eval(5.0)[0], 2.0 * (-3.5f64).exp(), epsilon = 1e-11);
        // dense output mid-interval
        assert_abs_diff_eq!(traj.eval(1.234)[0], 2.0 * (-0.7f64 * 1.234).exp(), epsilon = 1e-10);

        let b = integrate(f, 5.0, 0.0, &[2.0 * (-3.5f64).exp()], &OdeOpts::default()).unwrap();
        assert_abs_diff_eq!(b.eval(0.0)[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.eval(2.5)[0], 2.0 * (-0.7f64 * 2.5).exp(), epsilon = 1e-9);
    }

    #[test]
    fn rotation_preserves_norm() {
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[1];
            dy[1] = y[0];
        };
        let traj = integrate(f, 0.0, 20.0, &[1.0, 0.0], &OdeOpts::default()).unwrap();
        let y = traj.eval(20.0);
        assert_abs_diff_eq!(y[0], 20.0f64.cos(), epsilon = 1e-9);
        assert_abs_diff_eq!(y[1], 20.0f64.sin(), epsilon = 1e-9);
    }

    #[test]
    fn renormalization_tracks_scale() {
        // y' = y over [0, 100]: raw values overflow-ish, scaled stay O(1)
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0];
        };
        let opts = OdeOpts {
            renorm_limit: Some(1e3),
            ..OdeOpts::default()
        };
        let traj = integrate(f, 0.0, 100.0, &[1.0], &opts).unwrap();
        let (y, ls) = traj.eval_scaled(100.0);
        assert!(y[0].abs() <= 1e3);
        assert_abs_diff_eq!(y[0].ln() + ls, 100.0, epsilon = 1e-8);
    }

    #[test]
    fn norm_guard_triggers() {
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0];
        };
        let opts = OdeOpts {
            norm_guard: Some(1e8),
            ..OdeOpts::default()
        };
        assert!(matches!(
            integrate(f, 0.0, 100.0, &[1.0], &opts),
            Err(Error::ModeTakeover { .. })
        ));
    }
}
