//! Stability diagnostics for traveling waves in activator-inhibitor
//! reaction-diffusion systems.
//!
//! For a wave profile of
//!
//! ```text
//! u_t = u_xx + f(u) - sigma v
//! v_t = v_xx + g(v) + alpha u
//! ```
//!
//! this crate evaluates the Evans function D(lambda) on the real spectral
//! window through the induced equation on ∧²R^4 (Plücker coordinates), the
//! symplectic rewriting of the same determinant, the Lazutkin-Treschev
//! invariant e^{cz} omega(u1, u4), the Maslov index of the unstable bundle
//! counted at conjugate points of a detection function beta, and the
//! parity identity (-1)^Maslov = sign of the invariant that fixes the sign
//! of D'(0).
//!
//! The `fhn` module runs the whole chain end to end on the FitzHugh-Nagumo
//! fast traveling pulse; `cli` backs the thin `wavestab` binary.

pub mod bundle;
pub mod cli;
pub mod error;
pub mod evans;
pub mod exterior;
pub mod fhn;
pub mod linalg;
pub mod maslov;
pub mod ode;
pub mod system;
pub mod wave;

pub use error::{Error, Result};
