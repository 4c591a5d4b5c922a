//! Wave sources: the analytic Nagumo front, the FHN singular orbit, the
//! homoclinic boundary-value solver, and profile file I/O.

pub mod bvp;
pub mod nagumo;
pub mod profile;
pub mod singular;

pub use bvp::{solve_homoclinic, HomoclinicGuess, HomoclinicSolution, SolverOpts};
pub use nagumo::{nagumo_front, NagumoFront};
pub use profile::{TailData, WaveProfile};
pub use singular::{fhn_singular_orbit, FhnParams, SingularOrbit};
