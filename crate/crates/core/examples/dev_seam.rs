use wavestab::wave::bvp::{guess_residual_profile, SolverOpts};
use wavestab::wave::singular::{fhn_singular_orbit, FhnParams};

fn main() {
    let p = FhnParams::new(0.25, 0.002, 0.0).unwrap();
    let orbit = fhn_singular_orbit(&p).unwrap();
    eprintln!("jump center = {}", orbit.back_jump_center());
    let seed = p.system().unwrap();
    let prof = guess_residual_profile(&seed, &orbit, &SolverOpts::default(), 900.0).unwrap();
    let mut worst = prof.clone();
    worst.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    for (z, r) in worst.iter().take(10) {
        eprintln!("  z = {z:10.4}  |F| = {r:.3e}");
    }
    // guess states around the hotspots
    for z in [20.0_f64, 23.2, 26.0, 60.0, 79.9, 80.3, 91.0, 92.1, 107.0, 107.9, 108.4, 108.7, 109.0, 112.0, 127.0, 128.0, 130.0, 132.0, 132.4, 133.0, 135.0] {
        let s = orbit.state(z);
        eprintln!("z={z:6.2}: u={:11.7} v={:11.7} w={:12.5e} y={:11.7}", s[0], s[1], s[2], s[3]);
    }
}
