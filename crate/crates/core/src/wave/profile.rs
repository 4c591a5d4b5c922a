//! Sampled homoclinic wave profiles with C^1 Hermite evaluation,
//! exponential tail extension, validation, and file I/O.
//!
//! The on-disk schema is a single JSON document
//! `{version: 1, params: {sigma, alpha, c}, L, grid, u, v, du, dv, ddu, ddv}`
//! with equal-length arrays, a strictly increasing grid on [-L, L], and
//! numbers written with 17 significant digits so that a load/save round
//! trip is bitwise exact.

use crate::error::{Error, Result};
use crate::exterior::Vec4;
use serde::Deserialize;
use std::io::Write;
use std::path::Path;

/// Tail smallness threshold relative to the peak amplitude.
pub const TAIL_TOL_REL: f64 = 1e-5;

/// Allowed relative mismatch between stored derivatives and centered
/// differences of the stored values.
pub const DERIV_CONSISTENCY_REL: f64 = 1e-6;

/// Profile values at one point.
#[derive(Debug, Clone, Copy)]
pub struct ProfilePoint {
    pub u: f64,
    pub v: f64,
    pub du: f64,
    pub dv: f64,
    pub ddu: f64,
    pub ddv: f64,
}

/// Exponential tail data derived from the boundary samples: decay rate and
/// unit direction of the 4-dimensional state at each end.
#[derive(Debug, Clone, Copy)]
pub struct TailData {
    /// Decay rate for z > L (negative; approximately mu2(0)).
    pub rate_fwd: f64,
    /// Growth rate for z < -L (positive; approximately mu3(0)).
    pub rate_bwd: f64,
    pub dir_fwd: Vec4,
    pub dir_bwd: Vec4,
}

/// A sampled traveling-wave profile (u, v) with first and second
/// derivatives on a strictly increasing grid over [-L, L].
#[derive(Debug, Clone)]
pub struct WaveProfile {
    grid: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    du: Vec<f64>,
    dv: Vec<f64>,
    ddu: Vec<f64>,
    ddv: Vec<f64>,
    // estimated third derivatives, for C^1 evaluation of ddu/ddv
    d3u: Vec<f64>,
    d3v: Vec<f64>,
    pub sigma: f64,
    pub alpha: f64,
    pub c: f64,
    half_length: f64,
    tails: TailData,
}

/// Second-order derivative estimate on a nonuniform grid (centered in the
/// interior, one-sided second-order at the ends).
pub fn nonuniform_gradient(z: &[f64], y: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let hm = z[i] - z[i - 1];
        let hp = z[i + 1] - z[i];
        out[i] = (y[i + 1] * hm * hm - y[i - 1] * hp * hp + y[i] * (hp * hp - hm * hm))
            / (hm * hp * (hm + hp));
    }
    // one-sided second-order stencils at the boundary
    let h0 = z[1] - z[0];
    let h1 = z[2] - z[1];
    out[0] = -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * y[0] + (h0 + h1) / (h0 * h1) * y[1]
        - h0 / (h1 * (h0 + h1)) * y[2];
    let hm = z[n - 2] - z[n - 3];
    let hl = z[n - 1] - z[n - 2];
    out[n - 1] = hl / (hm * (hm + hl)) * y[n - 3] - (hm + hl) / (hm * hl) * y[n - 2]
        + (2.0 * hl + hm) / (hl * (hm + hl)) * y[n - 1];
    out
}

impl WaveProfile {
    /// Build and validate a profile from raw sampled arrays.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Vec<f64>,
        u: Vec<f64>,
        v: Vec<f64>,
        du: Vec<f64>,
        dv: Vec<f64>,
        ddu: Vec<f64>,
        ddv: Vec<f64>,
        sigma: f64,
        alpha: f64,
        c: f64,
    ) -> Result<Self> {
        let n = grid.len();
        if n < 5 {
            return Err(Error::Schema(format!("grid needs at least 5 samples, got {n}")));
        }
        for (name, arr) in [("u", &u), ("v", &v), ("du", &du), ("dv", &dv), ("ddu", &ddu), ("ddv", &ddv)] {
            if arr.len() != n {
                return Err(Error::Schema(format!(
                    "array {name} has length {} but grid has {n}",
                    arr.len()
                )));
            }
        }
        for (i, w) in grid.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::NonMonotoneGrid(i));
            }
        }
        let all = grid
            .iter()
            .chain(&u)
            .chain(&v)
            .chain(&du)
            .chain(&dv)
            .chain(&ddu)
            .chain(&ddv);
        for x in all {
            if !x.is_finite() {
                return Err(Error::Schema("non-finite entry in profile arrays".into()));
            }
        }
        if !(sigma > 0.0 && alpha > 0.0) {
            return Err(Error::Schema("params.sigma and params.alpha must be positive".into()));
        }
        let half_length = grid[n - 1];
        if (grid[0] + half_length).abs() > 1e-9 * half_length.max(1.0) {
            return Err(Error::Schema(format!(
                "grid must span [-L, L]; endpoints are {} and {}",
                grid[0],
                grid[n - 1]
            )));
        }

        let amp = u
            .iter()
            .chain(&v)
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        let tol = TAIL_TOL_REL * amp;
        for idx in [0, n - 1] {
            let tail = u[idx].abs() + v[idx].abs();
            if tail >= tol {
                return Err(Error::TailTolerance {
                    z: grid[idx],
                    value: tail,
                    tol,
                });
            }
        }

        // stored first derivatives vs centered differences of the values
        let scale_du = du.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let scale_dv = dv.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let cd_u = nonuniform_gradient(&grid, &u);
        let cd_v = nonuniform_gradient(&grid, &v);
        for i in 1..n - 1 {
            let eu = (du[i] - cd_u[i]).abs() / scale_du;
            let ev = (dv[i] - cd_v[i]).abs() / scale_dv;
            if eu >= DERIV_CONSISTENCY_REL || ev >= DERIV_CONSISTENCY_REL {
                return Err(Error::DerivativeConsistency {
                    z: grid[i],
                    err: eu.max(ev),
                });
            }
        }

        let d3u = nonuniform_gradient(&grid, &ddu);
        let d3v = nonuniform_gradient(&grid, &ddv);

        let state_at = |i: usize| Vec4([u[i], v[i], du[i] / sigma, dv[i] / alpha]);
        let dstate_at = |i: usize| Vec4([du[i], dv[i], ddu[i] / sigma, ddv[i] / alpha]);
        let rate = |i: usize| -> f64 {
            let s = state_at(i);
            let d = dstate_at(i);
            s.dot(&d) / s.dot(&s)
        };
        let rate_fwd = rate(n - 1);
        let rate_bwd = rate(0);
        if !(rate_fwd < 0.0) || !(rate_bwd > 0.0) {
            return Err(Error::Schema(format!(
                "boundary decay rates have wrong signs (forward {rate_fwd}, backward {rate_bwd})"
            )));
        }
        let tails = TailData {
            rate_fwd,
            rate_bwd,
            dir_fwd: state_at(n - 1).normalize(),
            dir_bwd: state_at(0).normalize(),
        };

        Ok(WaveProfile {
            grid,
            u,
            v,
            du,
            dv,
            ddu,
            ddv,
            d3u,
            d3v,
            sigma,
            alpha,
            c,
            half_length,
            tails,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn tails(&self) -> &TailData {
        &self.tails
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Peak amplitude max(|u|, |v|).
    pub fn amplitude(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn node(&self, i: usize) -> ProfilePoint {
        ProfilePoint {
            u: self.u[i],
            v: self.v[i],
            du: self.du[i],
            dv: self.dv[i],
            ddu: self.ddu[i],
            ddv: self.ddv[i],
        }
    }

    fn interval_of(&self, z: f64) -> usize {
        match self
            .grid
            .binary_search_by(|g| g.partial_cmp(&z).unwrap())
        {
            Ok(i) => i.min(self.grid.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.grid.len() - 2),
        }
    }

    /// Profile values at any z in the extended domain. Inside [-L, L] this
    /// is piecewise-cubic Hermite interpolation from the stored arrays;
    /// beyond, an exponential continuation matched in value at the boundary.
    pub fn sample(&self, z: f64) -> Result<ProfilePoint> {
        if !z.is_finite() || z.abs() > 10.0 * self.half_length {
            return Err(Error::Domain(z));
        }
        if z > self.half_length || z < -self.half_length {
            return Ok(self.tail_extend(z));
        }
        let i = self.interval_of(z);
        let (z0, z1) = (self.grid[i], self.grid[i + 1]);
        let h = z1 - z0;
        let t = (z - z0) / h;
        let hermite = |y0: f64, y1: f64, d0: f64, d1: f64| -> f64 {
            let t2 = t * t;
            let t3 = t2 * t;
            y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
                + d0 * h * (t3 - 2.0 * t2 + t)
                + y1 * (-2.0 * t3 + 3.0 * t2)
                + d1 * h * (t3 - t2)
        };
        Ok(ProfilePoint {
            u: hermite(self.u[i], self.u[i + 1], self.du[i], self.du[i + 1]),
            v: hermite(self.v[i], self.v[i + 1], self.dv[i], self.dv[i + 1]),
            du: hermite(self.du[i], self.du[i + 1], self.ddu[i], self.ddu[i + 1]),
            dv: hermite(self.dv[i], self.dv[i + 1], self.ddv[i], self.ddv[i + 1]),
            ddu: hermite(self.ddu[i], self.ddu[i + 1], self.d3u[i], self.d3u[i + 1]),
            ddv: hermite(self.ddv[i], self.ddv[i + 1], self.d3v[i], self.d3v[i + 1]),
        })
    }

    /// Exponential continuation beyond the truncation boundary: the full
    /// boundary 6-tuple scaled by e^{rate (z ∓ L)}.
    pub fn tail_extend(&self, z: f64) -> ProfilePoint {
        let (idx, rate, dz) = if z > self.half_length {
            (self.grid.len() - 1, self.tails.rate_fwd, z - self.half_length)
        } else {
            (0, self.tails.rate_bwd, z + self.half_length)
        };
        let s = (rate * dz).exp();
        let p = self.node(idx);
        ProfilePoint {
            u: p.u * s,
            v: p.v * s,
            du: p.du * s,
            dv: p.dv * s,
            ddu: p.ddu * s,
            ddv: p.ddv * s,
        }
    }

    /// The 4-dimensional wave state (u, v, u'/sigma, v'/alpha) at z.
    pub fn state(&self, z: f64) -> Result<Vec4> {
        let p = self.sample(z)?;
        Ok(Vec4([p.u, p.v, p.du / self.sigma, p.dv / self.alpha]))
    }

    /// The translation eigenfunction phi'(z) = (u', v', u''/sigma, v''/alpha).
    pub fn phi_prime(&self, z: f64) -> Result<Vec4> {
        let p = self.sample(z)?;
        Ok(Vec4([p.du, p.dv, p.ddu / self.sigma, p.ddv / self.alpha]))
    }

    /// Serialize to the profile JSON schema with round-trip-exact numbers.
    pub fn to_json(&self) -> String {
        let mut s = String::with_capacity(64 * self.grid.len());
        s.push_str("{\n  \"version\": 1,\n  \"params\": {");
        s.push_str(&format!(
            "\"sigma\": {}, \"alpha\": {}, \"c\": {}",
            fmt_f64(self.sigma),
            fmt_f64(self.alpha),
            fmt_f64(self.c)
        ));
        s.push_str("},\n");
        s.push_str(&format!("  \"L\": {},\n", fmt_f64(self.half_length)));
        let arr = |name: &str, a: &[f64]| -> String {
            let body: Vec<String> = a.iter().map(|&x| fmt_f64(x)).collect();
            format!("  \"{}\": [{}]", name, body.join(", "))
        };
        let fields = [
            arr("grid", &self.grid),
            arr("u", &self.u),
            arr("v", &self.v),
            arr("du", &self.du),
            arr("dv", &self.dv),
            arr("ddu", &self.ddu),
            arr("ddv", &self.ddv),
        ];
        s.push_str(&fields.join(",\n"));
        s.push_str("\n}\n");
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProfileFile =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if file.version != 1 {
            return Err(Error::Schema(format!(
                "unsupported profile version {}",
                file.version
            )));
        }
        if let Some(&last) = file.grid.last() {
            if (last - file.l).abs() > 1e-9 * file.l.max(1.0) {
                return Err(Error::Schema(format!(
                    "declared L = {} disagrees with the grid endpoint {}",
                    file.l, last
                )));
            }
        }
        WaveProfile::new(
            file.grid,
            file.u,
            file.v,
            file.du,
            file.dv,
            file.ddu,
            file.ddv,
            file.params.sigma,
            file.params.alpha,
            file.params.c,
        )
    }

    pub fn arrays(&self) -> [&[f64]; 7] {
        [
            &self.grid, &self.u, &self.v, &self.du, &self.dv, &self.ddu, &self.ddv,
        ]
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    version: u32,
    params: ProfileParams,
    #[serde(rename = "L")]
    l: f64,
    grid: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    du: Vec<f64>,
    dv: Vec<f64>,
    ddu: Vec<f64>,
    ddv: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileParams {
    sigma: f64,
    alpha: f64,
    c: f64,
}

/// 17-significant-digit decimal form; parses back to the identical double.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Write a file through a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

#[cfg(test)]
pub mod tests_support {
    use super::WaveProfile;

    /// Synthetic profile built from exact exponentially decaying closed
    /// forms (sech^2 pulse) so every profile invariant holds.
    pub fn synthetic_profile(n: usize, l: f64) -> WaveProfile {
        let grid: Vec<f64> = (0..n).map(|i| -l + 2.0 * l * i as f64 / (n - 1) as f64).collect();
        let sech = |z: f64| 1.0 / z.cosh();
        let u: Vec<f64> = grid.iter().map(|&z| sech(z).powi(2)).collect();
        let du: Vec<f64> = grid
            .iter()
            .map(|&z| -2.0 * sech(z).powi(2) * z.tanh())
            .collect();
        let ddu: Vec<f64> = grid
            .iter()
            .map(|&z| 4.0 * sech(z).powi(2) * z.tanh().powi(2) - 2.0 * sech(z).powi(4))
            .collect();
        let v: Vec<f64> = u.iter().map(|x| 0.5 * x).collect();
        let dv: Vec<f64> = du.iter().map(|x| 0.5 * x).collect();
        let ddv: Vec<f64> = ddu.iter().map(|x| 0.5 * x).collect();
        WaveProfile::new(grid, u, v, du, dv, ddu, ddv, 1.0, 0.5, -1.0).unwrap()
    }

    pub fn synthetic_wave() -> WaveProfile {
        synthetic_profile(60_001, 12.0)
    }

    /// A numerically tiny pulse: the coefficient matrices built over it sit
    /// at the asymptotic limit, while every profile invariant still holds.
    pub fn tiny_profile(n: usize, l: f64, sigma: f64, alpha: f64, c: f64) -> WaveProfile {
        let grid: Vec<f64> = (0..n).map(|i| -l + 2.0 * l * i as f64 / (n - 1) as f64).collect();
        let s = 1e-25;
        let sech = |z: f64| 1.0 / z.cosh();
        let u: Vec<f64> = grid.iter().map(|&z| s * sech(z).powi(2)).collect();
        let du: Vec<f64> = grid
            .iter()
            .map(|&z| -2.0 * s * sech(z).powi(2) * z.tanh())
            .collect();
        let ddu: Vec<f64> = grid
            .iter()
            .map(|&z| s * (4.0 * sech(z).powi(2) * z.tanh().powi(2) - 2.0 * sech(z).powi(4)))
            .collect();
        let v = u.clone();
        let dv = du.clone();
        let ddv = ddu.clone();
        WaveProfile::new(grid, u, v, du, dv, ddu, ddv, sigma, alpha, c).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::synthetic_profile;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn build_and_sample_synthetic() {
        let w = synthetic_profile(60_001, 12.0);
        let p = w.sample(0.3333).unwrap();
        let sech = |z: f64| 1.0 / z.cosh();
        assert_abs_diff_eq!(p.u, sech(0.3333f64).powi(2), epsilon = 1e-10);
        assert_abs_diff_eq!(p.du, -2.0 * sech(0.3333f64).powi(2) * 0.3333f64.tanh(), epsilon = 1e-9);
    }

    #[test]
    fn tail_extension_matches_boundary_and_decays() {
        let w = synthetic_profile(60_001, 12.0);
        let l = w.half_length();
        let at_l = w.sample(l).unwrap();
        let beyond = w.sample(l + 1e-12).unwrap();
        assert_abs_diff_eq!(at_l.u, beyond.u, epsilon = 1e-20);
        let delta = 0.7;
        let ext = w.sample(l + delta).unwrap();
        let expected_ratio = (w.tails().rate_fwd * delta).exp();
        assert_abs_diff_eq!(ext.u / at_l.u, expected_ratio, epsilon = 1e-12);
        // sech^2 decays like e^{-2z}
        assert_abs_diff_eq!(w.tails().rate_fwd, -2.0, epsilon = 1e-3);
        assert_abs_diff_eq!(w.tails().rate_bwd, 2.0, epsilon = 1e-3);

        // finite-difference derivative of the extension matches its du output
        let h = 1e-5;
        let fd = (w.sample(l + delta + h).unwrap().u - w.sample(l + delta - h).unwrap().u) / (2.0 * h);
        assert!((fd - ext.du).abs() < 1e-8);
    }

    #[test]
    fn out_of_domain_rejected() {
        let w = synthetic_profile(60_001, 12.0);
        assert!(w.sample(web_sanity()).is_err());
        assert!(w.sample(12.0 * 10.0 + 1.0).is_err());
    }

    fn web_sanity() -> f64 {
        f64::NAN
    }

    #[test]
    fn fat_tail_rejected() {
        let n = 501;
        let l = 3.0;
        let grid: Vec<f64> = (0..n).map(|i| -l + 2.0 * l * i as f64 / (n - 1) as f64).collect();
        // |u| = 0.1 at the boundary: tail tolerance must reject
        let u: Vec<f64> = grid.iter().map(|&z| 0.1 + (-z * z).exp()).collect();
        let du: Vec<f64> = grid.iter().map(|&z| -2.0 * z * (-z * z).exp()).collect();
        let ddu: Vec<f64> = grid
            .iter()
            .map(|&z| (4.0 * z * z - 2.0) * (-z * z).exp())
            .collect();
        let zeros = vec![0.0; n];
        let err = WaveProfile::new(
            grid,
            u,
            zeros.clone(),
            du,
            zeros.clone(),
            ddu,
            zeros,
            1.0,
            1.0,
            -1.0,
        );
        assert!(matches!(err, Err(Error::TailTolerance { .. })));
    }

    #[test]
    fn derivative_inconsistency_rejected() {
        let w = synthetic_profile(60_001, 12.0);
        let [grid, u, v, _du, dv, ddu, ddv] = w.arrays();
        let bad_du: Vec<f64> = u.iter().map(|_| 0.123).collect();
        let err = WaveProfile::new(
            grid.to_vec(),
            u.to_vec(),
            v.to_vec(),
            bad_du,
            dv.to_vec(),
            ddu.to_vec(),
            ddv.to_vec(),
            1.0,
            0.5,
            -1.0,
        );
        assert!(matches!(err, Err(Error::DerivativeConsistency { .. })));
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let w = synthetic_profile(18_001, 7.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.json");
        w.save(&path).unwrap();
        let w2 = WaveProfile::load(&path).unwrap();
        for (a, b) in w.arrays().iter().zip(w2.arrays().iter()) {
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(w.c.to_bits(), w2.c.to_bits());
        // and a second save is byte-identical
        let path2 = dir.path().join("profile2.json");
        w2.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn truncated_file_names_missing_field() {
        let msg = WaveProfile::from_json(r#"{"version":1,"params":{"sigma":1.0,"alpha":1.0,"c":-1.0},"L":3.0,"grid":[0.0]}"#)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("missing field"), "got: {msg}");
        assert!(msg.contains('u'), "got: {msg}");
    }

    #[test]
    fn non_monotone_grid_rejected() {
        let w = synthetic_profile(18_001, 7.0);
        let [grid, u, v, du, dv, ddu, ddv] = w.arrays();
        let mut g2 = grid.to_vec();
        g2.swap(10, 11);
        let err = WaveProfile::new(
            g2,
            u.to_vec(),
            v.to_vec(),
            du.to_vec(),
            dv.to_vec(),
            ddu.to_vec(),
            ddv.to_vec(),
            1.0,
            0.5,
            -1.0,
        );
        assert!(matches!(err, Err(Error::NonMonotoneGrid(_))));
    }
}
