//! Balanced and modal truncation.

use serde::{Deserialize, Serialize};

use crate::decompose::{modal_form, split_stable_unstable, ModalDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{self, solve_lyapunov};
use crate::lti::{add, check_minimal, sub, StateSpace};
use crate::tol::{tol_stab, CLUSTER_TOL, HANKEL_MIN_RTOL, HANKEL_TIE_RTOL};
use crate::Matrix;

/// A balanced realization: both Gramians equal `diag(σ)`.
#[derive(Debug, Clone)]
pub struct BalancedRealization {
    pub system: StateSpace,
    /// Hankel singular values, descending.
    pub hankel_singular_values: Vec<f64>,
    /// `x_bal = T x`.
    pub transform: Matrix,
    pub transform_inv: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Balanced,
    Modal,
}

#[derive(Debug, Clone)]
pub struct TruncationResult {
    pub reduced: StateSpace,
    /// `K_r - K`.
    pub delta: StateSpace,
    pub method: Method,
    /// Removed Hankel singular values or modal importance indices.
    pub truncated_tail: Vec<f64>,
}

fn gramian_factor(w: &Matrix) -> Result<Matrix> {
    let (values, mut f) = linalg::symmetric_eigen(w)?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || values.iter().any(|&v| v < 1e-12 * max) {
        return Err(Error::NotMinimal);
    }
    for (j, v) in values.iter().enumerate() {
        f.column_mut(j).scale_mut(v.sqrt());
    }
    Ok(f)
}

/// Square-root balancing of a stable minimal system.
pub fn balance(s: &StateSpace) -> Result<BalancedRealization> {
    let n = s.order();
    if n == 0 {
        return Ok(BalancedRealization {
            system: s.clone(),
            hankel_singular_values: vec![],
            transform: Matrix::zeros(0, 0),
            transform_inv: Matrix::zeros(0, 0),
        });
    }
    let abscissa = linalg::spectral_abscissa(&s.a)?;
    if !(abscissa < -tol_stab(&s.a)) {
        return Err(Error::NotStable { abscissa });
    }
    let wc = solve_lyapunov(&s.a, &(&s.b * s.b.transpose()))?;
    let wo = solve_lyapunov(&s.a.transpose(), &(s.c.transpose() * &s.c))?;
    let q = gramian_factor(&wc)?;
    let l = gramian_factor(&wo)?;
    let m = l.transpose() * &q;
    let svd = linalg::svd(&m)?;
    let sigma = svd.s;
    if !(sigma[n - 1] >= HANKEL_MIN_RTOL * sigma[0]) {
        return Err(Error::NotMinimal);
    }
    let (u, v) = (svd.u, svd.v);
    let root = nalgebra::DVector::from_iterator(n, sigma.iter().map(|x| x.sqrt()));
    // T = Σ^{-1/2} Uᵀ Lᵀ, T⁻¹ = Q V N⁻¹ Σ^{1/2} with N = Uᵀ M V ≈ Σ, so T T⁻¹ = I to rounding.
    let mut t = u.transpose() * l.transpose();
    for k in 0..n {
        t.row_mut(k).scale_mut(1.0 / root[k]);
    }
    let nm = u.transpose() * &m * &v;
    let t_inv = &q * v * nm.lu().solve(&Matrix::from_diagonal(&root)).ok_or(Error::NotMinimal)?;
    Ok(BalancedRealization {
        system: s.transform(&t, &t_inv),
        hankel_singular_values: sigma,
        transform: t,
        transform_inv: t_inv,
    })
}

/// Hankel singular values of a stable minimal system.
pub fn hankel_singular_values(s: &StateSpace) -> Result<Vec<f64>> {
    Ok(balance(s)?.hankel_singular_values)
}

/// Keeps the `r` leading balanced states. `r = 0` leaves the feedthrough and
/// `r = n` returns the balanced realization itself.
pub fn balanced_truncate(s: &StateSpace, r: usize) -> Result<TruncationResult> {
    let n = s.order();
    if r > n {
        return Err(Error::InvalidOrder(format!("target order {r} exceeds system order {n}")));
    }
    let bal = balance(s)?;
    let sigma = &bal.hankel_singular_values;
    if r > 0 && r < n && sigma[r - 1] - sigma[r] < HANKEL_TIE_RTOL * sigma[0] {
        return Err(Error::PartitionTie);
    }
    let keep: Vec<usize> = (0..r).collect();
    let reduced = bal.system.select_states(&keep);
    let delta = sub(&reduced, s)?;
    Ok(TruncationResult { reduced, delta, method: Method::Balanced, truncated_tail: sigma[r..].to_vec() })
}

/// Balanced truncation of the stable part; the antistable part is kept.
pub fn balanced_truncate_unstable(k: &StateSpace, r: usize) -> Result<TruncationResult> {
    if !check_minimal(k).minimal {
        return Err(Error::NotMinimal);
    }
    let split = split_stable_unstable(k)?;
    let (n1, n2) = (split.stable.order(), split.unstable.order());
    if n1 == 0 {
        return Err(Error::InvalidOrder("controller has no stable poles to truncate".into()));
    }
    if r < n2 || r > n1 + n2 {
        return Err(Error::InvalidOrder(format!(
            "target order {r} must lie in [{n2}, {}] (antistable order {n2})",
            n1 + n2
        )));
    }
    let inner = balanced_truncate(&split.stable, r - n2)?;
    Ok(TruncationResult {
        reduced: add(&inner.reduced, &split.unstable)?,
        delta: inner.delta,
        method: Method::Balanced,
        truncated_tail: inner.truncated_tail,
    })
}

/// Blocks in removal order: smallest importance first, then smaller
/// `|Re λ|`, smaller `|Im λ|`, lower index. Unrankable blocks are excluded.
pub fn removal_order(md: &ModalDecomposition) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..md.blocks.len()).filter(|&i| md.blocks[i].importance.is_some()).collect();
    idx.sort_by(|&i, &j| {
        let (a, b) = (&md.blocks[i], &md.blocks[j]);
        a.importance
            .partial_cmp(&b.importance)
            .unwrap()
            .then(a.eigenvalue.re.abs().partial_cmp(&b.eigenvalue.re.abs()).unwrap())
            .then(a.eigenvalue.im.abs().partial_cmp(&b.eigenvalue.im.abs()).unwrap())
            .then(i.cmp(&j))
    });
    idx
}

fn truncate_modes(k: &StateSpace, r_red: usize, allow_all: bool) -> Result<TruncationResult> {
    let md = modal_form(k, CLUSTER_TOL)?;
    let count = md.blocks.len();
    let upper = if allow_all { count } else { count.saturating_sub(1) };
    if r_red < 1 || r_red > upper {
        return Err(Error::InvalidOrder(format!("cannot remove {r_red} of {count} modal blocks")));
    }
    let order = removal_order(&md);
    if order.len() < r_red {
        let blocked = md.blocks.iter().find(|b| b.importance.is_none()).unwrap();
        return Err(if blocked.eigenvalue.norm() <= tol_stab(&blocked.a) {
            Error::ZeroMode
        } else {
            Error::AxisPole(blocked.eigenvalue)
        });
    }
    let removed = &order[..r_red];
    let kept: Vec<usize> = (0..count).filter(|i| !removed.contains(i)).collect();
    let reduced = md.assemble(&kept, true);
    let delta = md.assemble(removed, false).neg();
    let tail = removed.iter().map(|&i| md.blocks[i].importance.unwrap()).collect();
    Ok(TruncationResult { reduced, delta, method: Method::Modal, truncated_tail: tail })
}

/// Removes the `r_red` least important modal blocks of `K`.
pub fn modal_truncate(k: &StateSpace, r_red: usize) -> Result<TruncationResult> {
    if !check_minimal(k).minimal {
        return Err(Error::NotMinimal);
    }
    truncate_modes(k, r_red, false)
}

/// Modal truncation restricted to the stable part; the antistable part is
/// kept, so `delta` is stable.
pub fn modal_truncate_stable(k: &StateSpace, r_red: usize) -> Result<TruncationResult> {
    if !check_minimal(k).minimal {
        return Err(Error::NotMinimal);
    }
    let split = split_stable_unstable(k)?;
    if split.unstable.order() == 0 {
        return truncate_modes(k, r_red, false);
    }
    if split.stable.order() == 0 {
        return Err(Error::InvalidOrder("controller has no stable poles to truncate".into()));
    }
    let inner = truncate_modes(&split.stable, r_red, true)?;
    Ok(TruncationResult { reduced: add(&inner.reduced, &split.unstable)?, ..inner })
}
