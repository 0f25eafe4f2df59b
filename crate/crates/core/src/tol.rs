//! Numerical tolerances shared across modules.
//!
//! The stability tolerance scales with the matrix norm. Its coefficient
//! (default `1e-8`) can be overridden through the `CTRED_TOL_STAB`
//! environment variable, read once per process.

use std::sync::OnceLock;

use crate::Matrix;

/// Relative threshold for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-9;
/// Hankel singular values below this fraction of the largest one mark a non-minimal system.
pub const HANKEL_MIN_RTOL: f64 = 1e-10;
/// Ties between Hankel singular values at the cut, relative to the largest one.
pub const HANKEL_TIE_RTOL: f64 = 1e-9;
/// Relative width of the final H-infinity level-set bracket.
pub const HINF_RTOL: f64 = 1e-8;
pub const HINF_MAX_ITER: usize = 200;
/// Imaginary-axis test for Hamiltonian eigenvalues, relative to the Hamiltonian norm.
pub const HAMILTONIAN_AXIS_RTOL: f64 = 1e-7;
/// Default clustering tolerance for modal blocks.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Antistable parts with peak gain below this fraction of the system gain are treated as cancelled.
pub const CANCELLATION_RTOL: f64 = 1e-9;
/// Peak gains below this fraction of `‖B‖‖C‖/‖A‖` are indistinguishable from zero.
pub const ROUNDOFF_GAIN_RTOL: f64 = 1e-13;

const DEFAULT_STAB_COEFF: f64 = 1e-8;

fn stab_coefficient() -> f64 {
    static COEFF: OnceLock<f64> = OnceLock::new();
    *COEFF.get_or_init(|| {
        std::env::var("CTRED_TOL_STAB")
            .ok()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite() && *v > 0.0)
            .unwrap_or(DEFAULT_STAB_COEFF)
    })
}

/// Maximum absolute row sum.
pub fn norm_inf(a: &Matrix) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Margin used to classify an eigenvalue of `a` as stable, unstable or on the axis.
pub fn tol_stab(a: &Matrix) -> f64 {
    stab_coefficient() * norm_inf(a).max(1.0)
}

/// Minimum spectral separation accepted by the Sylvester solver.
pub fn tol_sep(norm: f64) -> f64 {
    1e-6 * norm
}

/// Pole/zero matching tolerance.
pub fn tol_pz(root_modulus: f64) -> f64 {
    1e-7 * (1.0 + root_modulus)
}
