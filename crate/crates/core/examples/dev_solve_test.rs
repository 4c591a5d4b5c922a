use wavestab::wave::bvp::{debug_newton_direction, solve_homoclinic, HomoclinicGuess, SolverOpts};
use wavestab::wave::singular::{fhn_singular_orbit, FhnParams};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("debug")).init();
    let t0 = std::time::Instant::now();
    let p = FhnParams::new(0.25, 0.002, 0.0).unwrap();
    let orbit = fhn_singular_orbit(&p).unwrap();
    eprintln!("jump center = {}", orbit.back_jump_center());
    let seed = p.system().unwrap();
    let opts = SolverOpts::default();
    if std::env::var("DIRECTION").is_ok() {
        debug_newton_direction(&seed, &orbit, &opts, 900.0).unwrap();
        return;
    }
    match solve_homoclinic(&seed, &HomoclinicGuess::Singular(&orbit), &opts) {
        Ok(sol) => {
            eprintln!("[{:.1?}] converged: c = {}, c-c* = {:.3e}, iters = {}, rounds = {}, nodes = {}, resid = {:.2e}, L = {}",
                t0.elapsed(), sol.c, sol.c - orbit.speed, sol.newton_iterations,
                sol.refine_rounds, sol.profile.len(), sol.final_residual, sol.profile.half_length());
        }
        Err(e) => eprintln!("[{:.1?}] SOLVER FAILED: {e}", t0.elapsed()),
    }
}
