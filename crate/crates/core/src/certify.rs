//! LQG cost and the stability / performance certificates for reduced-order
//! controllers.
//!
//! Every check evaluates the closed-loop maps of the full-order pair
//! `Y = (I - GK)⁻¹`, `X = (I - GK)⁻¹G`, `KX`, `KY`, `XK` and combines them with
//! norms of `Δ = K_r - K`. Quantities that are undefined (an H∞ norm of an
//! unstable product, the H2 norm of a biproper map) are recorded as `+∞` and
//! make the condition fail instead of raising an error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decompose::{stable_projection, StabilityDecision};
use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::{
    four_block, inverse, is_internally_stable, minimal_realization, series, sub, LoopMaps, StateSpace,
};
use crate::norms::{h2_norm, h2_norm_squared, hinf_norm, l2_norm, linf_norm};
use crate::tol::tol_stab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    Lemma3,
    Thm1,
    Thm2,
    Cor1,
    Cor2,
    Thm3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionCertificate {
    pub theorem: Theorem,
    /// Named norms and intermediate sums; non-finite values serialize as `"inf"`.
    #[serde(with = "inf_serde::map")]
    pub quantities: BTreeMap<String, f64>,
    pub condition_satisfied: bool,
    #[serde(with = "inf_serde::option")]
    pub cost_bound: Option<f64>,
    /// Direct eigenvalue check of the closed loop with `K_r`.
    pub verified_stable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl ReductionCertificate {
    pub fn quantity(&self, name: &str) -> Option<f64> {
        self.quantities.get(name).copied()
    }
}

pub(crate) mod inf_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v.is_nan() {
            Repr::Str("nan".into())
        } else if v > 0.0 {
            Repr::Str("inf".into())
        } else {
            Repr::Str("-inf".into())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("invalid number {other:?}"))),
            },
        }
    }

    pub mod map {
        use super::*;
        use std::collections::BTreeMap;

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            let out: BTreeMap<&String, Repr> = m.iter().map(|(k, v)| (k, to_repr(*v))).collect();
            out.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
            let raw = BTreeMap::<String, Repr>::deserialize(d)?;
            raw.into_iter().map(|(k, r)| Ok((k, from_repr(r)?))).collect()
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.map(to_repr).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
        }
    }
}

/// Normalized LQG cost: squared H2 norm of the four-block closed-loop map.
pub fn lqg_cost(g: &StateSpace, k: &StateSpace) -> Result<f64> {
    let report = is_internally_stable(g, k)?;
    if !report.stable {
        return Err(Error::NotStabilizing { abscissa: report.abscissa });
    }
    h2_norm_squared(&four_block(g, k)?.realization)
}

/// The same cost as a sum over the four blocks, each evaluated separately.
pub fn lqg_cost_blocks(g: &StateSpace, k: &StateSpace) -> Result<f64> {
    let report = is_internally_stable(g, k)?;
    if !report.stable {
        return Err(Error::NotStabilizing { abscissa: report.abscissa });
    }
    let fb = four_block(g, k)?;
    let mut total = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            total += h2_norm_squared(&fb.block(i, j))?;
        }
    }
    Ok(total)
}

/// Product of two norms with `0 · ∞ = 0`.
fn mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// Norms of the full-order closed-loop maps.
#[derive(Debug, Clone, Copy)]
pub struct LoopNorms {
    pub x_hinf: f64,
    pub x_h2: f64,
    pub y_hinf: f64,
    pub y_h2: f64,
    pub kx_hinf: f64,
    pub kx_h2: f64,
    pub ky_h2: f64,
    pub xk_h2: f64,
}

impl LoopNorms {
    pub fn new(maps: &LoopMaps) -> Result<Self> {
        let y_h2 = if maps.y.is_strictly_proper() { h2_norm(&maps.y)? } else { f64::INFINITY };
        Ok(LoopNorms {
            x_hinf: hinf_norm(&maps.x)?,
            x_h2: h2_norm(&maps.x)?,
            y_hinf: hinf_norm(&maps.y)?,
            y_h2,
            kx_hinf: hinf_norm(&maps.kx)?,
            kx_h2: h2_norm(&maps.kx)?,
            ky_h2: h2_norm(&maps.ky)?,
            xk_h2: h2_norm(&maps.xk)?,
        })
    }

    fn record(&self, q: &mut BTreeMap<String, f64>) {
        for (name, v) in [
            ("x_hinf", self.x_hinf),
            ("x_h2", self.x_h2),
            ("y_hinf", self.y_hinf),
            ("y_h2", self.y_h2),
            ("kx_hinf", self.kx_hinf),
            ("kx_h2", self.kx_h2),
            ("ky_h2", self.ky_h2),
            ("xk_h2", self.xk_h2),
        ] {
            q.insert(name.to_string(), v);
        }
    }
}

/// Shared setup of every check.
struct Setup {
    maps: LoopMaps,
    delta: StateSpace,
    verified_stable: bool,
    quantities: BTreeMap<String, f64>,
}

fn setup(g: &StateSpace, k: &StateSpace, k_r: &StateSpace) -> Result<Setup> {
    let report = is_internally_stable(g, k)?;
    if !report.stable {
        return Err(Error::NotStabilizing { abscissa: report.abscissa });
    }
    let verified_stable = is_internally_stable(g, k_r)?.stable;
    Ok(Setup {
        maps: LoopMaps::new(g, k)?,
        delta: sub(k_r, k)?,
        verified_stable,
        quantities: BTreeMap::new(),
    })
}

/// H∞ norm of the transfer function realized by `s`, or `+∞` when it is
/// not stable after removing cancelled modes.
fn transfer_hinf(s: &StateSpace) -> Result<(f64, bool)> {
    match stable_projection(s)? {
        StabilityDecision::Stable(r) => Ok((hinf_norm(&r)?, true)),
        _ => Ok((f64::INFINITY, false)),
    }
}

fn transfer_linf(s: &StateSpace) -> Result<f64> {
    match linf_norm(&minimal_realization(s)?) {
        Err(Error::AxisPole(_)) => Ok(f64::INFINITY),
        other => other,
    }
}

fn transfer_l2(s: &StateSpace) -> Result<f64> {
    match stable_projection(s)? {
        StabilityDecision::Stable(r) => h2_norm(&r),
        StabilityDecision::AxisPole(_) => Ok(f64::INFINITY),
        StabilityDecision::Unstable { .. } => match l2_norm(&minimal_realization(s)?) {
            Err(Error::AxisPole(_)) | Err(Error::IllConditionedSplit) => Ok(f64::INFINITY),
            other => other,
        },
    }
}

fn count_unstable(k: &StateSpace) -> Result<std::result::Result<usize, String>> {
    let poles = k.poles()?;
    let tol = if k.order() == 0 { 0.0 } else { tol_stab(&k.a) };
    if let Some(p) = poles.iter().find(|p| p.re.abs() <= tol) {
        return Ok(Err(format!("pole {p} on the imaginary axis")));
    }
    Ok(Ok(poles.iter().filter(|p| p.re > 0.0).count()))
}

/// Classical small-gain condition with matching unstable-pole counts.
pub fn check_lemma3(g: &StateSpace, k: &StateSpace, k_r: &StateSpace) -> Result<ReductionCertificate> {
    let mut st = setup(g, k, k_r)?;
    let mut reason = None;
    let counts = (count_unstable(k)?, count_unstable(k_r)?);
    let counts_match = match counts {
        (Ok(a), Ok(b)) => {
            st.quantities.insert("unstable_poles_k".into(), a as f64);
            st.quantities.insert("unstable_poles_kr".into(), b as f64);
            if a != b {
                reason = Some(format!("unstable pole count changes from {a} to {b}"));
            }
            a == b
        }
        (Err(e), _) | (_, Err(e)) => {
            reason = Some(e);
            false
        }
    };
    let dx = transfer_linf(&series(&st.delta, &st.maps.x)?)?;
    let xd = transfer_linf(&series(&st.maps.x, &st.delta)?)?;
    st.quantities.insert("delta_x_linf".into(), dx);
    st.quantities.insert("x_delta_linf".into(), xd);
    let small_gain = dx.min(xd) < 1.0;
    if counts_match && !small_gain {
        reason = Some("loop gain is not below one".into());
    }
    Ok(ReductionCertificate {
        theorem: Theorem::Lemma3,
        quantities: st.quantities,
        condition_satisfied: counts_match && small_gain,
        cost_bound: None,
        verified_stable: st.verified_stable,
        reason,
    })
}

/// Stability of `ΔY` and a small-gain bound on `XΔ` and `ΔX`.
pub fn check_thm1(g: &StateSpace, k: &StateSpace, k_r: &StateSpace) -> Result<ReductionCertificate> {
    let mut st = setup(g, k, k_r)?;
    let mut reason = None;
    let delta_y_stable = matches!(
        stable_projection(&series(&st.delta, &st.maps.y)?)?,
        StabilityDecision::Stable(_)
    );
    if !delta_y_stable {
        reason = Some("ΔY is not stable".into());
    }
    let (xd, xd_stable) = transfer_hinf(&series(&st.maps.x, &st.delta)?)?;
    let (dx, dx_stable) = transfer_hinf(&series(&st.delta, &st.maps.x)?)?;
    st.quantities.insert("delta_y_stable".into(), if delta_y_stable { 1.0 } else { 0.0 });
    st.quantities.insert("x_delta_hinf".into(), xd);
    st.quantities.insert("delta_x_hinf".into(), dx);
    let gain = xd.max(dx);
    if reason.is_none() {
        if !(xd_stable && dx_stable) {
            reason = Some("XΔ or ΔX is not stable".into());
        } else if gain >= 1.0 {
            reason = Some("loop gain is not below one".into());
        }
    }
    Ok(ReductionCertificate {
        theorem: Theorem::Thm1,
        quantities: st.quantities,
        condition_satisfied: delta_y_stable && gain < 1.0,
        cost_bound: None,
        verified_stable: st.verified_stable,
        reason,
    })
}

/// Norms of a stable `Δ`; `None` when `Δ` is not stable.
fn stable_delta_norms(delta: &StateSpace) -> Result<Option<(f64, f64)>> {
    match stable_projection(delta)? {
        StabilityDecision::Stable(r) => Ok(Some((hinf_norm(&r)?, h2_norm(&r)?))),
        _ => Ok(None),
    }
}

/// `S1`, `S2` and the bound for a stable `Δ`; `coef` multiplies the `‖Δ‖_H2` term of `S1`.
fn stable_bound(j: f64, n: &LoopNorms, d_inf: f64, d_2: f64, coef: f64) -> (f64, f64, f64) {
    let gain = 1.0 + n.kx_hinf;
    let s1 = 2.0 * mul(d_inf, n.x_h2 * n.xk_h2)
        + coef * mul(d_2, n.ky_h2 * n.y_hinf + n.kx_h2 * n.x_hinf) * gain;
    let s2 = mul(d_inf * d_inf, n.x_h2 * n.x_h2)
        + mul(d_2 * d_2, n.y_hinf * n.y_hinf + n.x_hinf * n.x_hinf) * gain * gain;
    let margin = 1.0 - n.x_hinf * d_inf;
    let bound = if margin > 0.0 { (j + s1 + s2) / (margin * margin) } else { f64::INFINITY };
    (s1, s2, bound)
}

fn stable_delta_certificate(
    theorem: Theorem,
    g: &StateSpace,
    k: &StateSpace,
    k_r: &StateSpace,
    coef: f64,
    sigma_tail: Option<f64>,
) -> Result<ReductionCertificate> {
    let mut st = setup(g, k, k_r)?;
    let norms = LoopNorms::new(&st.maps)?;
    norms.record(&mut st.quantities);
    let j = lqg_cost(g, k)?;
    st.quantities.insert("j_k".into(), j);
    let Some((d_inf, d_2)) = stable_delta_norms(&st.delta)? else {
        if theorem == Theorem::Cor2 {
            return Err(Error::WrongCertificate);
        }
        st.quantities.insert("delta_hinf".into(), f64::INFINITY);
        st.quantities.insert("delta_h2".into(), f64::INFINITY);
        return Ok(ReductionCertificate {
            theorem,
            quantities: st.quantities,
            condition_satisfied: false,
            cost_bound: None,
            verified_stable: st.verified_stable,
            reason: Some("Δ is not stable".into()),
        });
    };
    st.quantities.insert("delta_hinf".into(), d_inf);
    st.quantities.insert("delta_h2".into(), d_2);
    let (s1, s2, bound) = stable_bound(j, &norms, d_inf, d_2, coef);
    st.quantities.insert("s1".into(), s1);
    st.quantities.insert("s2".into(), s2);
    let (ok, reason) = match sigma_tail {
        Some(tail) => {
            st.quantities.insert("sigma_tail".into(), tail);
            let ok = 2.0 * tail * norms.x_hinf < 1.0;
            (ok, (!ok).then(|| "Hankel tail is not below 1/(2‖X‖∞)".to_string()))
        }
        None => {
            let ok = norms.x_hinf * d_inf < 1.0;
            (ok, (!ok).then(|| "‖Δ‖∞ is not below 1/‖X‖∞".to_string()))
        }
    };
    Ok(ReductionCertificate {
        theorem,
        quantities: st.quantities,
        condition_satisfied: ok,
        cost_bound: ok.then_some(bound),
        verified_stable: st.verified_stable,
        reason,
    })
}

/// Stable-`Δ` LQG bound with the small-gain condition `‖X‖∞‖Δ‖∞ < 1`.
pub fn check_thm2_bound(g: &StateSpace, k: &StateSpace, k_r: &StateSpace) -> Result<ReductionCertificate> {
    stable_delta_certificate(Theorem::Thm2, g, k, k_r, 2.0, None)
}

/// Balanced-truncation bound; the condition uses the truncated Hankel
/// singular values of the stable part.
pub fn check_cor1(
    g: &StateSpace,
    k: &StateSpace,
    k_r: &StateSpace,
    sigma_tail: &[f64],
) -> Result<ReductionCertificate> {
    stable_delta_certificate(Theorem::Cor1, g, k, k_r, 2.0, Some(sigma_tail.iter().sum()))
}

/// Modal-truncation bound for a stable `Δ`.
pub fn check_cor2(g: &StateSpace, k: &StateSpace, k_r: &StateSpace) -> Result<ReductionCertificate> {
    stable_delta_certificate(Theorem::Cor2, g, k, k_r, 1.0, None)
}

/// SISO certificate allowing an unstable `Δ`: `(1 - XΔ)⁻¹` must be stable.
pub fn check_thm3(g: &StateSpace, k: &StateSpace, k_r: &StateSpace) -> Result<ReductionCertificate> {
    if !(g.is_siso() && k.is_siso() && k_r.is_siso()) {
        return Err(Error::NotSiso);
    }
    let mut st = setup(g, k, k_r)?;
    let delta_poles = st.delta.poles()?;
    let dtol = if st.delta.order() == 0 { 0.0 } else { tol_stab(&st.delta.a) };
    if delta_poles.iter().any(|p| p.norm() <= dtol) {
        return Err(Error::ZeroMode);
    }
    let norms = LoopNorms::new(&st.maps)?;
    norms.record(&mut st.quantities);
    let j = lqg_cost(g, k)?;
    st.quantities.insert("j_k".into(), j);
    let d_inf = transfer_linf(&st.delta)?;
    let d_2 = transfer_l2(&st.delta)?;
    st.quantities.insert("delta_linf".into(), d_inf);
    st.quantities.insert("delta_l2".into(), d_2);

    let xd = series(&st.maps.x, &st.delta)?;
    let one_minus = sub(&StateSpace::gain(nalgebra::dmatrix![1.0]), &xd)?;
    let inv = inverse(&one_minus)?;
    let (inv_hinf, stable) = transfer_hinf(&inv)?;
    st.quantities.insert("inv_one_minus_x_delta_hinf".into(), inv_hinf);

    let s1 = 2.0 * mul(d_inf, norms.x_h2 * norms.xk_h2)
        + 2.0 * norms.ky_h2 * mul(d_2, norms.y_hinf)
        + 2.0
            * norms.ky_h2
            * mul(d_inf, norms.y_h2 + norms.kx_h2 * norms.y_hinf + norms.kx_hinf * norms.x_h2);
    let s2 = mul(d_inf * d_inf, norms.x_h2 * norms.x_h2)
        + (norms.y_hinf * (mul(d_inf, norms.kx_h2) + d_2)).powi(2)
        + mul(norms.x_h2 * norms.x_h2, (mul(d_inf, norms.kx_hinf) + d_inf).powi(2));
    st.quantities.insert("s1".into(), s1);
    st.quantities.insert("s2".into(), s2);
    let bound = inv_hinf * inv_hinf * (j + s1 + s2);
    Ok(ReductionCertificate {
        theorem: Theorem::Thm3,
        quantities: st.quantities,
        condition_satisfied: stable,
        cost_bound: stable.then_some(bound),
        verified_stable: st.verified_stable,
        reason: (!stable).then(|| "(1 - XΔ)⁻¹ is not stable".to_string()),
    })
}

/// Closed-loop poles of the pair, for reporting.
pub fn closed_loop_poles(g: &StateSpace, k: &StateSpace) -> Result<Vec<crate::C64>> {
    linalg::eigenvalues(&crate::lti::closed_loop_matrix(g, k)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn pair() -> (StateSpace, StateSpace) {
        // G = 1/(s+1), K = -1/(s+2)
        let g = StateSpace::strictly_proper(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0]).unwrap();
        let k = StateSpace::strictly_proper(dmatrix![-2.0], dmatrix![1.0], dmatrix![-1.0]).unwrap();
        (g, k)
    }

    #[test]
    fn cost_matches_block_sum() {
        let (g, k) = pair();
        let a = lqg_cost(&g, &k).unwrap();
        let b = lqg_cost_blocks(&g, &k).unwrap();
        assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn destabilizing_controller_has_no_cost() {
        let (g, _) = pair();
        let k = StateSpace::strictly_proper(dmatrix![-2.0], dmatrix![1.0], dmatrix![10.0]).unwrap();
        assert!(matches!(lqg_cost(&g, &k), Err(Error::NotStabilizing { .. })));
    }

    #[test]
    fn zero_delta_collapses_bounds() {
        let (g, k) = pair();
        let j = lqg_cost(&g, &k).unwrap();
        for c in [check_thm2_bound(&g, &k, &k).unwrap(), check_cor2(&g, &k, &k).unwrap()] {
            assert!(c.condition_satisfied);
            assert!((c.cost_bound.unwrap() - j).abs() <= 1e-12 * j);
            assert_eq!(c.quantity("s1"), Some(0.0));
        }
        assert!(check_thm1(&g, &k, &k).unwrap().condition_satisfied);
        assert!(check_lemma3(&g, &k, &k).unwrap().condition_satisfied);
        let t3 = check_thm3(&g, &k, &k).unwrap();
        assert!(t3.condition_satisfied);
        assert!((t3.cost_bound.unwrap() - j).abs() <= 1e-6 * j);
        let c1 = check_cor1(&g, &k, &k, &[]).unwrap();
        assert!(c1.condition_satisfied);
    }

    #[test]
    fn infinite_quantities_serialize_as_strings() {
        let (g, k) = pair();
        let c = check_thm3(&g, &k, &k).unwrap();
        assert_eq!(c.quantity("y_h2"), Some(f64::INFINITY));
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"y_h2\":\"inf\""));
        let back: ReductionCertificate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unstable_delta_needs_other_certificate() {
        let (g, k) = pair();
        let k_r = crate::lti::add(
            &k,
            &StateSpace::strictly_proper(dmatrix![0.5], dmatrix![0.01], dmatrix![0.01]).unwrap(),
        )
        .unwrap();
        assert!(matches!(check_cor2(&g, &k, &k_r), Err(Error::WrongCertificate)));
        let t2 = check_thm2_bound(&g, &k, &k_r).unwrap();
        assert!(!t2.condition_satisfied && t2.cost_bound.is_none());
    }
}
