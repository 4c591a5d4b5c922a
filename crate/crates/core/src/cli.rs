//! Command-line entry points: configuration, wave acquisition, analysis,
//! and report/plot-data emission. The `wavestab` binary is a thin wrapper
//! over [`cmd_analyze`], [`cmd_evans_scan`], [`cmd_beta_trace`] and
//! [`cmd_wave`].

use crate::bundle::{strong_stable_solution, unstable_bundle};
use crate::error::{Error, Result};
use crate::evans::{evans_derivative_at_zero, evans_scan, lambda_grid, EvansScan};
use crate::fhn::default_tau;
use crate::maslov::{
    beta_unit, find_conjugate_points, maslov_index, parity_check, reference_plane, MaslovResult,
    ParityReport,
};
use crate::system::{Kinetics, SystemParams};
use crate::wave::bvp::{solve_homoclinic, HomoclinicGuess, SolverOpts};
use crate::wave::nagumo::nagumo_front;
use crate::wave::profile::{fmt_f64, write_atomic, WaveProfile};
use crate::wave::singular::{fhn_singular_orbit, FhnParams};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Exit code for a clean run.
pub const EXIT_OK: i32 = 0;
/// Operational failure (bad config, solver failure, I/O).
pub const EXIT_ERROR: i32 = 1;
/// Scientific alarm: the parity identity failed on a completed run.
pub const EXIT_PARITY: i32 = 2;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase")]
pub enum SystemConfig {
    Fhn {
        #[serde(default = "default_a")]
        a: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default)]
        gamma: f64,
    },
    Custom {
        f_coeffs: Vec<f64>,
        g_coeffs: Vec<f64>,
        sigma: f64,
        alpha: f64,
        c: f64,
    },
}

fn default_a() -> f64 {
    0.25
}
fn default_eps() -> f64 {
    0.002
}

#[derive(Debug, Clone, Deserialize)]
pub struct WaveConfig {
    /// "solve" (boundary-value solve, seeded by the FHN singular orbit or
    /// by `path`), "file" (load a stored profile), or "analytic" (the
    /// closed-form Nagumo front; `wave` subcommand only).
    pub source: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(default)]
pub struct SolverConfig {
    pub residual_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub half_length: Option<f64>,
}

impl SolverConfig {
    fn opts(&self) -> Result<SolverOpts> {
        let mut o = SolverOpts::default();
        if let Some(t) = self.residual_tol {
            if !(t > 0.0) {
                return Err(Error::Config("solver.residual_tol must be positive".into()));
            }
            o.residual_tol = t;
        }
        if let Some(m) = self.max_iter {
            o.max_iter = m;
        }
        if let Some(l) = self.half_length {
            if !(l > 0.0) {
                return Err(Error::Config("solver.half_length must be positive".into()));
            }
            o.half_length = Some(l);
        }
        Ok(o)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_steps: usize,
    pub tau: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            lambda_min: 0.0,
            lambda_max: 1.0,
            lambda_steps: 21,
            tau: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub directory: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_out_dir(),
        }
    }
}

/// One run's full configuration.
#[derive(Debug, Clone, Deserialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub wave: WaveConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Test hook: flips the sign of the Lazutkin-Treschev invariant before
    /// the parity check so the alarm path can be exercised.
    #[serde(default)]
    pub debug_flip_lt: bool,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.wave.source.as_str() {
            "solve" | "file" | "analytic" => {}
            other => {
                return Err(Error::Config(format!(
                    "wave.source must be solve|file|analytic, got {other}"
                )))
            }
        }
        if self.wave.source == "file" {
            match &self.wave.path {
                None => return Err(Error::Config("wave.source = file requires wave.path".into())),
                Some(p) if !p.exists() => {
                    return Err(Error::Config(format!(
                        "wave profile not found: {}",
                        p.display()
                    )))
                }
                _ => {}
            }
        }
        if self.analysis.lambda_steps == 0 {
            return Err(Error::Config("analysis.lambda_steps must be positive".into()));
        }
        if !(self.analysis.lambda_max >= self.analysis.lambda_min) {
            return Err(Error::Config("analysis.lambda_max must be >= lambda_min".into()));
        }
        Ok(())
    }

    fn fhn_params(&self) -> Option<Result<FhnParams>> {
        match &self.system {
            SystemConfig::Fhn { a, eps, gamma } => Some(FhnParams::new(*a, *eps, *gamma)),
            SystemConfig::Custom { .. } => None,
        }
    }

    fn kinetics(&self) -> Result<Kinetics> {
        match &self.system {
            SystemConfig::Fhn { a, eps, gamma } => Kinetics::fhn(*a, *eps, *gamma),
            SystemConfig::Custom {
                f_coeffs,
                g_coeffs,
                sigma,
                alpha,
                ..
            } => Kinetics::from_polynomials(f_coeffs, g_coeffs, *sigma, *alpha),
        }
    }

    fn seed_speed(&self) -> f64 {
        match &self.system {
            SystemConfig::Fhn { a, .. } => std::f64::consts::SQRT_2 * (a - 0.5),
            SystemConfig::Custom { c, .. } => *c,
        }
    }
}

/// Acquired inputs for the analysis stages.
pub struct Acquired {
    pub params: SystemParams,
    pub wave: WaveProfile,
}

/// Materialize the wave according to the config.
pub fn acquire_wave(cfg: &RunConfig) -> Result<Acquired> {
    let kinetics = cfg.kinetics()?;
    match cfg.wave.source.as_str() {
        "file" => {
            let path = cfg.wave.path.as_ref().expect("validated");
            let wave = WaveProfile::load(path)?;
            if (wave.sigma - kinetics.sigma).abs() > 1e-12 || (wave.alpha - kinetics.alpha).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "profile params (sigma = {}, alpha = {}) disagree with the configured system",
                    wave.sigma, wave.alpha
                )));
            }
            let params = SystemParams::new(kinetics, wave.c)?;
            Ok(Acquired { params, wave })
        }
        "solve" => {
            let seed = SystemParams::new(kinetics, cfg.seed_speed())?;
            let opts = cfg.wave.solver.opts()?;
            let sol = if let Some(path) = &cfg.wave.path {
                let guess = WaveProfile::load(path)?;
                let mut o = opts;
                o.half_length = Some(guess.half_length());
                solve_homoclinic(&seed, &HomoclinicGuess::Profile(&guess), &o)?
            } else {
                match cfg.fhn_params() {
                    Some(p) => {
                        let orbit = fhn_singular_orbit(&p?)?;
                        solve_homoclinic(&seed, &HomoclinicGuess::Singular(&orbit), &opts)?
                    }
                    None => {
                        return Err(Error::Config(
                            "custom systems need wave.path as the solve guess (no built-in seed)".into(),
                        ))
                    }
                }
            };
            let params = seed.with_speed(sol.c)?;
            Ok(Acquired {
                params,
                wave: sol.profile,
            })
        }
        "analytic" => Err(Error::Config(
            "the analytic Nagumo front is not a homoclinic wave; it is available through the `wave` subcommand only".into(),
        )),
        _ => unreachable!("validated"),
    }
}

struct MaslovArtifacts {
    result: MaslovResult,
    parity: ParityReport,
    derivative: crate::evans::DerivativeReport,
    tau: f64,
    beta_rows: Vec<(f64, f64)>,
}

fn run_maslov_stage(cfg: &RunConfig, acq: &Acquired) -> Result<MaslovArtifacts> {
    let params = &acq.params;
    let wave = &acq.wave;
    let u1 = strong_stable_solution(params, wave).map_err(|e| e.at_stage("strong-stable run"))?;
    let unstable = unstable_bundle(params, wave, 0.0).map_err(|e| e.at_stage("unstable bundle"))?;
    let tau = cfg.analysis.tau.unwrap_or_else(|| default_tau(wave));
    let reference =
        reference_plane(params, wave, &u1, tau).map_err(|e| e.at_stage("reference plane"))?;
    let (interior, endpoint) = find_conjugate_points(&reference, params, wave, &unstable)
        .map_err(|e| e.at_stage("conjugate points"))?;
    let result = maslov_index(interior, endpoint).map_err(|e| e.at_stage("maslov index"))?;
    let mut derivative =
        evans_derivative_at_zero(params, wave).map_err(|e| e.at_stage("evans derivative"))?;
    if cfg.debug_flip_lt {
        derivative.lt = -derivative.lt;
        derivative.d_prime0 = -derivative.d_prime0;
    }
    let parity = parity_check(&result, derivative.lt, &reference, params, wave, &unstable)
        .map_err(|e| e.at_stage("parity check"))?;

    // beta trace rows for plotting
    let l = wave.half_length();
    let n = 4000;
    let mut beta_rows = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let z = -l + (tau + l) * i as f64 / n as f64;
        let (unit, ls) = beta_unit(&reference, &unstable, z)?;
        beta_rows.push((z, unit * ls.exp()));
    }
    Ok(MaslovArtifacts {
        result,
        parity,
        derivative,
        tau,
        beta_rows,
    })
}

fn evans_csv(scan: &EvansScan) -> String {
    let mut s = String::from("lambda,D_wedge,D_symplectic,agreement\n");
    for r in &scan.samples {
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(r.lambda),
            fmt_f64(r.d_wedge),
            fmt_f64(r.d_symplectic),
            fmt_f64(r.agreement)
        ));
    }
    s
}

fn beta_csv(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("z,beta\n");
    for (z, b) in rows {
        s.push_str(&format!("{},{}\n", fmt_f64(*z), fmt_f64(*b)));
    }
    s
}

fn crossing_json(c: &crate::maslov::ConjugatePoint) -> String {
    let gammas: Vec<String> = c.gamma.iter().map(|g| fmt_f64(*g)).collect();
    format!(
        "{{\"z\": {}, \"dim\": {}, \"gamma\": [{}], \"signature\": {}, \"regular\": {}}}",
        fmt_f64(c.z_star),
        c.dim,
        gammas.join(", "),
        c.signature,
        c.regular
    )
}

#[allow(clippy::too_many_arguments)]
fn report_json(
    cfg: &RunConfig,
    acq: &Acquired,
    scan: &EvansScan,
    art: &MaslovArtifacts,
    consistent: bool,
    seconds: f64,
) -> String {
    let sys = match &cfg.system {
        SystemConfig::Fhn { a, eps, gamma } => format!(
            "{{\"preset\": \"fhn\", \"a\": {}, \"eps\": {}, \"gamma\": {}}}",
            fmt_f64(*a),
            fmt_f64(*eps),
            fmt_f64(*gamma)
        ),
        SystemConfig::Custom { sigma, alpha, c, .. } => format!(
            "{{\"preset\": \"custom\", \"sigma\": {}, \"alpha\": {}, \"c\": {}}}",
            fmt_f64(*sigma),
            fmt_f64(*alpha),
            fmt_f64(*c)
        ),
    };
    let crossings: Vec<String> = art.result.crossings.iter().map(crossing_json).collect();
    let candidates: Vec<String> = scan
        .candidates
        .iter()
        .map(|(a, b)| format!("[{}, {}]", fmt_f64(*a), fmt_f64(*b)))
        .collect();
    let d_max = scan.samples.last().map(|s| s.d_wedge).unwrap_or(f64::NAN);
    let max_gap = scan
        .samples
        .iter()
        .fold(0.0_f64, |m, s| m.max(s.agreement));
    format!(
        concat!(
            "{{\n",
            "  \"tool\": {{\"name\": \"wavestab\", \"version\": \"{version}\"}},\n",
            "  \"system\": {sys},\n",
            "  \"wave\": {{\"c\": {c}, \"L\": {l}, \"nodes\": {nodes}, \"amplitude\": {amp}}},\n",
            "  \"evans\": {{\"lambda_min\": {lmin}, \"lambda_max\": {lmax}, \"steps\": {steps}, \"d_at_lambda_max\": {dmax}, \"max_agreement_gap\": {gap}, \"candidates\": [{cands}]}},\n",
            "  \"maslov\": {{\"tau\": {tau}, \"crossings\": [{crossings}], \"endpoint\": {endpoint}, \"index\": {index}, \"parity\": {parity}, \"lt_sign\": {lt_sign}, \"consistent\": {pconsistent}}},\n",
            "  \"derivative\": {{\"lt\": {lt}, \"lt_drift\": {drift}, \"melnikov\": {mel}, \"d_prime0\": {dp}, \"fd_check\": {fd}, \"rel_gap\": {relgap}}},\n",
            "  \"consistent\": {consistent},\n",
            "  \"metadata\": {{\"elapsed_seconds\": {secs}}}\n",
            "}}\n"
        ),
        version = env!("CARGO_PKG_VERSION"),
        sys = sys,
        c = fmt_f64(acq.params.c),
        l = fmt_f64(acq.wave.half_length()),
        nodes = acq.wave.len(),
        amp = fmt_f64(acq.wave.amplitude()),
        lmin = fmt_f64(cfg.analysis.lambda_min),
        lmax = fmt_f64(cfg.analysis.lambda_max),
        steps = cfg.analysis.lambda_steps,
        dmax = fmt_f64(d_max),
        gap = fmt_f64(max_gap),
        cands = candidates.join(", "),
        tau = fmt_f64(art.tau),
        crossings = crossings.join(", "),
        endpoint = crossing_json(&art.result.endpoint),
        index = art.result.index,
        parity = art.result.parity_prediction,
        lt_sign = art.parity.lt_sign,
        pconsistent = art.parity.consistent,
        lt = fmt_f64(art.derivative.lt),
        drift = fmt_f64(art.derivative.lt_drift),
        mel = fmt_f64(art.derivative.integral),
        dp = fmt_f64(art.derivative.d_prime0),
        fd = fmt_f64(art.derivative.fd_check),
        relgap = fmt_f64(art.derivative.rel_gap),
        consistent = consistent,
        secs = format!("{:.3}", seconds),
    )
}

fn fail(err: &Error) -> i32 {
    eprintln!("error: {err}");
    let mut src = std::error::Error::source(err);
    while let Some(s) = src {
        eprintln!("  caused by: {s}");
        src = std::error::Error::source(s);
    }
    EXIT_ERROR
}

/// Full analysis: wave acquisition, Evans scan, Maslov pipeline, parity
/// check; writes report.json, evans.csv, beta.csv into the output
/// directory. Exit 0 on success, 2 on parity inconsistency, 1 on error.
pub fn cmd_analyze(cfg: &RunConfig) -> i32 {
    let started = std::time::Instant::now();
    let run = || -> Result<(Acquired, EvansScan, MaslovArtifacts)> {
        let acq = acquire_wave(cfg)?;
        let grid = lambda_grid(
            cfg.analysis.lambda_min,
            cfg.analysis.lambda_max,
            cfg.analysis.lambda_steps,
        );
        crate::evans::check_grid_in_window(&acq.params, &grid)?;
        let scan = evans_scan(&acq.params, &acq.wave, &grid).map_err(|e| e.at_stage("evans scan"))?;
        let art = run_maslov_stage(cfg, &acq)?;
        Ok((acq, scan, art))
    };
    match run() {
        Ok((acq, scan, art)) => {
            let consistent = art.parity.consistent;
            let dir = &cfg.output.directory;
            let report = report_json(cfg, &acq, &scan, &art, consistent, started.elapsed().as_secs_f64());
            let w = write_atomic(&dir.join("report.json"), report.as_bytes())
                .and_then(|_| write_atomic(&dir.join("evans.csv"), evans_csv(&scan).as_bytes()))
                .and_then(|_| write_atomic(&dir.join("beta.csv"), beta_csv(&art.beta_rows).as_bytes()));
            if let Err(e) = w {
                return fail(&e);
            }
            println!(
                "index = {}, lt sign = {}, D'(0) = {:.6e}, parity consistent = {}",
                art.result.index, art.parity.lt_sign, art.derivative.d_prime0, consistent
            );
            if consistent {
                EXIT_OK
            } else {
                eprintln!("parity inconsistency: (-1)^index != sign(lt)");
                EXIT_PARITY
            }
        }
        Err(e) => fail(&e),
    }
}

/// Evans scan only; writes evans.csv.
pub fn cmd_evans_scan(cfg: &RunConfig) -> i32 {
    let run = || -> Result<EvansScan> {
        let acq = acquire_wave(cfg)?;
        let grid = lambda_grid(
            cfg.analysis.lambda_min,
            cfg.analysis.lambda_max,
            cfg.analysis.lambda_steps,
        );
        crate::evans::check_grid_in_window(&acq.params, &grid)?;
        evans_scan(&acq.params, &acq.wave, &grid).map_err(|e| e.at_stage("evans scan"))
    };
    match run() {
        Ok(scan) => {
            if let Err(e) = write_atomic(
                &cfg.output.directory.join("evans.csv"),
                evans_csv(&scan).as_bytes(),
            ) {
                return fail(&e);
            }
            println!("{} samples, {} sign changes", scan.samples.len(), scan.candidates.len());
            EXIT_OK
        }
        Err(e) => fail(&e),
    }
}

/// Beta trace only; writes beta.csv.
pub fn cmd_beta_trace(cfg: &RunConfig) -> i32 {
    let run = || -> Result<MaslovArtifacts> {
        let acq = acquire_wave(cfg)?;
        run_maslov_stage(cfg, &acq)
    };
    match run() {
        Ok(art) => {
            if let Err(e) = write_atomic(
                &cfg.output.directory.join("beta.csv"),
                beta_csv(&art.beta_rows).as_bytes(),
            ) {
                return fail(&e);
            }
            println!(
                "{} interior crossings + endpoint at tau = {}",
                art.result.crossings.len(),
                art.tau
            );
            EXIT_OK
        }
        Err(e) => fail(&e),
    }
}

/// Wave acquisition only; writes profile.json (or the sampled analytic
/// front for source = "analytic").
pub fn cmd_wave(cfg: &RunConfig) -> i32 {
    if cfg.wave.source == "analytic" {
        let a = match &cfg.system {
            SystemConfig::Fhn { a, .. } => *a,
            SystemConfig::Custom { .. } => {
                return fail(&Error::Config(
                    "the analytic front is defined for the fhn preset only".into(),
                ))
            }
        };
        let front = match nagumo_front(a) {
            Ok(f) => f,
            Err(e) => return fail(&e),
        };
        let l = 25.0;
        let n = 2001;
        let mut grid = Vec::with_capacity(n);
        let mut u = Vec::with_capacity(n);
        let mut du = Vec::with_capacity(n);
        let mut ddu = Vec::with_capacity(n);
        for i in 0..n {
            let z = -l + 2.0 * l * i as f64 / (n - 1) as f64;
            grid.push(z);
            u.push(front.u(z));
            du.push(front.du(z));
            ddu.push(front.ddu(z));
        }
        let zeros = vec![0.0; n];
        let json = front_schema_json(front.speed, l, &grid, &u, &du, &ddu, &zeros);
        if let Err(e) = write_atomic(&cfg.output.directory.join("profile.json"), json.as_bytes()) {
            return fail(&e);
        }
        println!("front speed c* = {}", front.speed);
        return EXIT_OK;
    }
    match acquire_wave(cfg) {
        Ok(acq) => {
            if let Err(e) = acq.wave.save(&cfg.output.directory.join("profile.json")) {
                return fail(&e);
            }
            println!(
                "c = {}, L = {}, {} nodes",
                acq.params.c,
                acq.wave.half_length(),
                acq.wave.len()
            );
            EXIT_OK
        }
        Err(e) => fail(&e),
    }
}

/// The front written in the profile schema (v identically zero). The
/// result is plot data; it will not load as a homoclinic WaveProfile
/// since the front does not return to the rest state.
#[allow(clippy::too_many_arguments)]
fn front_schema_json(
    c: f64,
    l: f64,
    grid: &[f64],
    u: &[f64],
    du: &[f64],
    ddu: &[f64],
    zeros: &[f64],
) -> String {
    let arr = |name: &str, a: &[f64]| -> String {
        let body: Vec<String> = a.iter().map(|&x| fmt_f64(x)).collect();
        format!("  \"{}\": [{}]", name, body.join(", "))
    };
    let mut s = String::new();
    s.push_str("{\n  \"version\": 1,\n");
    s.push_str(&format!(
        "  \"params\": {{\"sigma\": {}, \"alpha\": {}, \"c\": {}}},\n",
        fmt_f64(1.0),
        fmt_f64(1.0),
        fmt_f64(c)
    ));
    s.push_str(&format!("  \"L\": {},\n", fmt_f64(l)));
    let fields = [
        arr("grid", grid),
        arr("u", u),
        arr("v", zeros),
        arr("du", du),
        arr("dv", zeros),
        arr("ddu", ddu),
        arr("ddv", zeros),
    ];
    s.push_str(&fields.join(",\n"));
    s.push_str("\n}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_and_validates() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "system": {"preset": "fhn", "a": 0.25, "eps": 0.002, "gamma": 0.0},
                "wave": {"source": "solve"},
                "analysis": {"lambda_min": 0.0, "lambda_max": 1.0, "lambda_steps": 5},
                "output": {"directory": "/tmp/x"}
            }"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert!(matches!(cfg.system, SystemConfig::Fhn { .. }));
        assert!(!cfg.debug_flip_lt);
    }

    #[test]
    fn missing_file_is_config_error() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "system": {"preset": "fhn"},
                "wave": {"source": "file", "path": "/nonexistent/profile.json"}
            }"#,
        )
        .unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("/nonexistent/profile.json"), "{err}");
    }

    #[test]
    fn custom_system_config_parses() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "system": {"preset": "custom", "f_coeffs": [0.0, -3.0], "g_coeffs": [0.0, 0.0],
                            "sigma": 1.0, "alpha": 2.0, "c": -1.0},
                "wave": {"source": "solve", "path": null}
            }"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let kin = cfg.kinetics().unwrap();
        assert_eq!(kin.sigma, 1.0);
    }
}
