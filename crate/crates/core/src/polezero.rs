//! SISO pole-zero analysis: partial fractions, the residue factorization
//! near a pole-zero pair, and a probe for zero capture when the coefficients
//! at a pole are shrunk.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lti::RationalTransferFunction;
use crate::poly;
use crate::tol::tol_pz;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialFractionTerm {
    pub pole: C64,
    /// Power of `(s - pole)` in the denominator.
    pub order: usize,
    pub coefficient: C64,
}

/// `F(s) = Σ α / (s - p)^j + polynomial_part(s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialFraction {
    pub terms: Vec<PartialFractionTerm>,
    /// Ascending coefficients; empty for strictly proper inputs.
    pub polynomial_part: Vec<f64>,
}

/// Distinct poles with multiplicities, real poles snapped to the axis.
///
/// Roots within `tol_pz` are merged. A wider group of `m` roots is also
/// merged when its spread is below the roundoff radius of an `m`-fold root,
/// `(64 ε Σ|d_k||c|^k / |t_m|)^{1/m}` with `t` the Taylor coefficients at the
/// group mean `c`; numerically split multiple roots land there.
fn pole_clusters(den: &[f64]) -> Result<Vec<(C64, usize)>> {
    let roots = poly::roots(den)?;
    let den_c = to_complex(den);
    let mut groups: Vec<Vec<C64>> = Vec::new();
    for r in roots {
        match groups.iter_mut().find(|g| (r - g[0]).norm() <= LOOSE_CLUSTER_RTOL * (1.0 + g[0].norm())) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    let mut clusters: Vec<(C64, usize)> = Vec::new();
    for g in groups {
        let m = g.len();
        let c = g.iter().sum::<C64>() / m as f64;
        let spread = g.iter().map(|r| (r - c).norm()).fold(0.0, f64::max);
        if m > 1 && spread <= multiple_root_radius(&den_c, c, m) {
            clusters.push((refine_root(&den_c, c, m, spread), m));
            continue;
        }
        let mut tight: Vec<Vec<C64>> = Vec::new();
        for r in g {
            match tight.iter_mut().find(|t| (r - t[0]).norm() <= tol_pz(t[0].norm())) {
                Some(t) => t.push(r),
                None => tight.push(vec![r]),
            }
        }
        for t in tight {
            let k = t.len();
            let c = t.iter().sum::<C64>() / k as f64;
            let spread = t.iter().map(|r| (r - c).norm()).fold(0.0, f64::max);
            let spread = if k == 1 { 0.0 } else { spread.max(tol_pz(c.norm())) };
            clusters.push((refine_root(&den_c, c, k, spread), k));
        }
    }
    Ok(clusters
        .into_iter()
        .map(|(p, m)| {
            let p = if p.im.abs() <= tol_pz(p.norm()) { C64::new(p.re, 0.0) } else { p };
            (p, m)
        })
        .collect())
}

const LOOSE_CLUSTER_RTOL: f64 = 1e-3;

fn multiple_root_radius(p: &[C64], c: C64, m: usize) -> f64 {
    let t = taylor_shift(p, c);
    let scale: f64 = p.iter().enumerate().map(|(k, d)| d.norm() * c.norm().powi(k as i32)).sum();
    let tm = t.get(m).map_or(0.0, |x| x.norm());
    if tm == 0.0 {
        return 0.0;
    }
    (64.0 * f64::EPSILON * scale / tm).powf(1.0 / m as f64)
}

/// Newton on the `(m-1)`-th derivative, where an `m`-fold root is simple.
fn refine_root(p: &[C64], c: C64, m: usize, spread: f64) -> C64 {
    let reach = 4.0 * spread.max(multiple_root_radius(p, c, m));
    let mut x = c;
    for _ in 0..8 {
        let t = taylor_shift(p, x);
        if t[m] == C64::new(0.0, 0.0) {
            break;
        }
        let step = -t[m - 1] / (m as f64 * t[m]);
        if !step.re.is_finite() || (x + step - c).norm() > reach {
            break;
        }
        x += step;
        if step.norm() <= 4.0 * f64::EPSILON * x.norm() {
            break;
        }
    }
    x
}

/// Taylor coefficients of `p` about `a`, ascending.
fn taylor_shift(p: &[C64], a: C64) -> Vec<C64> {
    let mut c = p.to_vec();
    let n = c.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            let next = c[j + 1];
            c[j] += a * next;
        }
    }
    c
}

fn to_complex(p: &[f64]) -> Vec<C64> {
    p.iter().map(|&c| C64::new(c, 0.0)).collect()
}

/// Polynomial quotient and remainder of real polynomials.
fn divide(num: &[f64], den: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dn = poly::degree(den).expect("nonzero divisor");
    let Some(nn) = poly::degree(num) else {
        return (vec![], vec![]);
    };
    if nn < dn {
        return (vec![], num.to_vec());
    }
    let mut rem = num[..=nn].to_vec();
    let mut q = vec![0.0; nn - dn + 1];
    for k in (0..=nn - dn).rev() {
        let c = rem[k + dn] / den[dn];
        q[k] = c;
        for j in 0..=dn {
            rem[k + j] -= c * den[j];
        }
    }
    rem.truncate(dn);
    (q, rem)
}

/// Partial-fraction expansion with coefficients from Taylor-series division
/// at each pole cluster.
pub fn partial_fractions(f: &RationalTransferFunction) -> Result<PartialFraction> {
    let (polynomial_part, rem) = divide(&f.numerator, &f.denominator);
    let polynomial_part = poly::trim(polynomial_part, 0.0);
    let clusters = pole_clusters(&f.denominator)?;
    let lead = f.denominator[f.denominator.len() - 1];
    let mut terms = Vec::new();
    for (idx, &(p, m)) in clusters.iter().enumerate() {
        if p.im < 0.0 {
            continue;
        }
        let others: Vec<C64> = clusters
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != idx)
            .flat_map(|(_, &(q, mq))| std::iter::repeat(q).take(mq))
            .collect();
        let h: Vec<C64> = poly::from_roots_complex(&others).into_iter().map(|c| c * lead).collect();
        let tn = taylor_shift(&to_complex(&rem), p);
        let th = taylor_shift(&h, p);
        // series division tn / th, first m coefficients
        let mut c = vec![C64::new(0.0, 0.0); m];
        for k in 0..m {
            let mut acc = tn.get(k).copied().unwrap_or_default();
            for i in 0..k {
                acc -= c[i] * th.get(k - i).copied().unwrap_or_default();
            }
            c[k] = acc / th[0];
        }
        for (k, &ck) in c.iter().enumerate() {
            let order = m - k;
            if p.im == 0.0 {
                terms.push(PartialFractionTerm { pole: p, order, coefficient: C64::new(ck.re, 0.0) });
            } else {
                terms.push(PartialFractionTerm { pole: p, order, coefficient: ck });
                terms.push(PartialFractionTerm { pole: p.conj(), order, coefficient: ck.conj() });
            }
        }
    }
    Ok(PartialFraction { terms, polynomial_part })
}

impl PartialFraction {
    pub fn eval(&self, s: C64) -> C64 {
        self.terms
            .iter()
            .map(|t| t.coefficient / (s - t.pole).powu(t.order as u32))
            .sum::<C64>()
            + poly::eval(&self.polynomial_part, s)
    }

    fn poles_with_multiplicity(&self) -> Vec<(C64, usize)> {
        let mut out: Vec<(C64, usize)> = Vec::new();
        for t in &self.terms {
            match out.iter_mut().find(|(p, _)| *p == t.pole) {
                Some(e) => e.1 = e.1.max(t.order),
                None => out.push((t.pole, t.order)),
            }
        }
        out
    }

    /// Numerator over `Π (s - r)` for `r` in `den_roots`, each coefficient
    /// multiplied by `weight(term)`.
    fn numerator_over(&self, den_roots: &[C64], weight: impl Fn(&PartialFractionTerm) -> f64) -> Vec<f64> {
        let den = poly::from_roots_complex(den_roots);
        let mut num = poly::mul_complex(&to_complex(&self.polynomial_part), &den);
        for t in &self.terms {
            let w = weight(t);
            if w == 0.0 {
                continue;
            }
            let mut rest = den_roots.to_vec();
            for _ in 0..t.order {
                let pos = rest.iter().position(|r| *r == t.pole).expect("pole in denominator");
                rest.remove(pos);
            }
            let part: Vec<C64> = poly::from_roots_complex(&rest).into_iter().map(|c| c * t.coefficient * w).collect();
            if num.len() < part.len() {
                num.resize(part.len(), C64::new(0.0, 0.0));
            }
            for (k, c) in part.into_iter().enumerate() {
                num[k] += c;
            }
        }
        num.into_iter().map(|c| c.re).collect()
    }
}

/// Distance from `p` to the nearest zero of `f`; `+∞` without zeros.
pub fn nearest_zero_gap(f: &RationalTransferFunction, p: C64) -> Result<f64> {
    Ok(f.zeros()?.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
}

/// Residue at a simple pole `p` written as `(p - q)·r`, with `q` the zero
/// nearest to `p` and `r = n(p)/d(p)` for `F = ((s-q)/(s-p))·(n/d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidueFactorization {
    pub pole: C64,
    pub residue: C64,
    /// Nearest zero, `None` when `F` has none.
    pub zero: Option<C64>,
    /// `p - q`; `None` without zeros.
    pub gap_product: Option<C64>,
    /// `r`; `None` without zeros.
    pub remainder: Option<C64>,
    /// `|p - q|`, `+∞` without zeros.
    pub gap: f64,
}

pub fn residue_factorization(f: &RationalTransferFunction, p: C64) -> Result<ResidueFactorization> {
    let clusters = pole_clusters(&f.denominator)?;
    let (pole, mult) = clusters
        .iter()
        .copied()
        .min_by(|a, b| (a.0 - p).norm().partial_cmp(&(b.0 - p).norm()).unwrap())
        .ok_or(Error::NotSimplePole(p))?;
    if (pole - p).norm() > tol_pz(p.norm()) || mult != 1 {
        return Err(Error::NotSimplePole(p));
    }
    let den_c = to_complex(&f.denominator);
    let d = poly::deflate(&den_c, pole);
    let residue = poly::eval(&f.numerator, pole) / poly::eval_complex(&d, pole);
    let zeros = f.zeros()?;
    let Some(q) = zeros
        .iter()
        .copied()
        .min_by(|a, b| (a - pole).norm().partial_cmp(&(b - pole).norm()).unwrap())
    else {
        return Ok(ResidueFactorization {
            pole,
            residue,
            zero: None,
            gap_product: None,
            remainder: None,
            gap: f64::INFINITY,
        });
    };
    let n = poly::deflate(&to_complex(&f.numerator), q);
    let r = poly::eval_complex(&n, pole) / poly::eval_complex(&d, pole);
    let product = (pole - q) * r;
    let scale = residue.norm().max(product.norm());
    let tolerance = 1e-8 * scale;
    let residual = (residue - product).norm();
    if residual > tolerance && scale > 0.0 {
        return Err(Error::Convergence { residual, tolerance });
    }
    Ok(ResidueFactorization {
        pole,
        residue,
        zero: Some(q),
        gap_product: Some(pole - q),
        remainder: Some(r),
        gap: (pole - q).norm(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    /// Exactly `n_p` zeros lie in the disc of radius `epsilon` around `p`.
    pub captured: bool,
    /// Multiplicity of `p` in the expansion.
    pub multiplicity: usize,
    pub zeros_inside: Vec<C64>,
    pub all_zeros: Vec<C64>,
}

fn matches_pole(t: &PartialFractionTerm, p: C64) -> bool {
    let tol = tol_pz(p.norm());
    (t.pole - p).norm() <= tol || (t.pole - p.conj()).norm() <= tol
}

/// Multiplies every coefficient at `p` (and its conjugate) by `scale` and
/// counts the zeros of the rebuilt function within `epsilon` of `p`.
pub fn small_block_cancellation_probe(
    pf: &PartialFraction,
    p: C64,
    scale: f64,
    epsilon: f64,
) -> Result<ProbeResult> {
    let poles = pf.poles_with_multiplicity();
    let Some(&(pole, n_p)) = poles.iter().find(|(q, _)| (q - p).norm() <= tol_pz(p.norm())) else {
        return Err(Error::NotSimplePole(p));
    };
    let den_roots: Vec<C64> = poles
        .iter()
        .flat_map(|&(q, m)| std::iter::repeat(q).take(m))
        .collect();

    // roots of u(s): the rest of F over its own denominator
    let rest_roots: Vec<C64> = poles
        .iter()
        .filter(|(q, _)| !((q - pole).norm() <= tol_pz(pole.norm()) || (q - pole.conj()).norm() <= tol_pz(pole.norm())))
        .flat_map(|&(q, m)| std::iter::repeat(q).take(m))
        .collect();
    let u = pf.numerator_over(&rest_roots, |t| if matches_pole(t, pole) { 0.0 } else { 1.0 });
    let mut limit = poly::roots(&poly::trim(u, 0.0))?
        .iter()
        .map(|z| (z - pole).norm())
        .fold(f64::INFINITY, f64::min);
    if pole.im != 0.0 {
        limit = limit.min(2.0 * pole.im.abs());
    }
    if !(epsilon < limit) {
        return Err(Error::Radius { epsilon, limit });
    }

    let num = pf.numerator_over(&den_roots, |t| if matches_pole(t, pole) { scale } else { 1.0 });
    let all_zeros = poly::roots(&poly::trim(num, 0.0))?;
    let zeros_inside: Vec<C64> = all_zeros.iter().copied().filter(|z| (z - pole).norm() <= epsilon).collect();
    Ok(ProbeResult { captured: zeros_inside.len() == n_p, multiplicity: n_p, zeros_inside, all_zeros })
}

/// Largest coefficient scale (searched over `(0, 1]`) for which the probe
/// captures the zeros: decade steps down to the first capture, then
/// bisection in log scale. `None` if no capture down to `1e-30`.
pub fn cancellation_scale_search(pf: &PartialFraction, p: C64, epsilon: f64) -> Result<Option<f64>> {
    if small_block_cancellation_probe(pf, p, 1.0, epsilon)?.captured {
        return Ok(Some(1.0));
    }
    let mut hi = 1.0;
    let mut lo = None;
    for _ in 0..30 {
        let s = hi * 0.1;
        if small_block_cancellation_probe(pf, p, s, epsilon)?.captured {
            lo = Some(s);
            break;
        }
        hi = s;
    }
    let Some(mut lo) = lo else {
        return Ok(None);
    };
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if small_block_cancellation_probe(pf, p, mid, epsilon)?.captured {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-6 {
            break;
        }
    }
    Ok(Some(lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn rational(num: Vec<f64>, den: Vec<f64>) -> RationalTransferFunction {
        RationalTransferFunction::new(num, den).unwrap()
    }

    #[test]
    fn simple_poles() {
        // 1/((s+1)(s+2))
        let pf = partial_fractions(&rational(vec![1.0], vec![2.0, 3.0, 1.0])).unwrap();
        assert_eq!(pf.terms.len(), 2);
        for t in &pf.terms {
            let expect = if (t.pole.re + 1.0).abs() < 1e-9 { 1.0 } else { -1.0 };
            assert!((t.coefficient.re - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn repeated_pole() {
        let pf = partial_fractions(&rational(vec![1.0], vec![1.0, 2.0, 1.0])).unwrap();
        let top = pf.terms.iter().find(|t| t.order == 2).unwrap();
        assert!((top.coefficient.re - 1.0).abs() < 1e-6);
        let low = pf.terms.iter().find(|t| t.order == 1).unwrap();
        assert!(low.coefficient.norm() < 1e-6);
    }

    #[test]
    fn biproper_polynomial_part() {
        // (s+3)/(s+1) = 1 + 2/(s+1)
        let pf = partial_fractions(&rational(vec![3.0, 1.0], vec![1.0, 1.0])).unwrap();
        assert_eq!(pf.polynomial_part, vec![1.0]);
        assert!((pf.terms[0].coefficient.re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn residue_near_cancellation() {
        // (s-0.9)/((s-1)(s+2))
        let f = rational(vec![-0.9, 1.0], vec![-2.0, 1.0, 1.0]);
        let r = residue_factorization(&f, c(1.0)).unwrap();
        assert!((r.residue.re - 0.1 / 3.0).abs() < 1e-12);
        assert!((r.remainder.unwrap().re - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.gap - 0.1).abs() < 1e-12);
        assert!((nearest_zero_gap(&f, c(1.0)).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn residue_without_zeros() {
        let f = rational(vec![1.0], vec![1.0, 1.0]);
        let r = residue_factorization(&f, c(-1.0)).unwrap();
        assert_eq!(r.gap, f64::INFINITY);
        assert!((r.residue.re - 1.0).abs() < 1e-12);
        assert!(nearest_zero_gap(&f, c(-1.0)).unwrap().is_infinite());
    }

    #[test]
    fn repeated_pole_is_not_simple() {
        let f = rational(vec![1.0], vec![1.0, 2.0, 1.0]);
        assert!(matches!(residue_factorization(&f, c(-1.0)), Err(Error::NotSimplePole(_))));
    }

    #[test]
    fn probe_captures_as_scale_shrinks() {
        // α/(s-1) + 1/(s+2): zero at 1 - 3α/(1+α)
        let pf = PartialFraction {
            terms: vec![
                PartialFractionTerm { pole: c(1.0), order: 1, coefficient: c(1.0) },
                PartialFractionTerm { pole: c(-2.0), order: 1, coefficient: c(1.0) },
            ],
            polynomial_part: vec![],
        };
        let far = small_block_cancellation_probe(&pf, c(1.0), 1.0, 0.5).unwrap();
        assert!(!far.captured);
        let near = small_block_cancellation_probe(&pf, c(1.0), 1e-3, 0.5).unwrap();
        assert!(near.captured);
        let alpha: f64 = 1e-3;
        assert!((near.zeros_inside[0].re - (1.0 - 3.0 * alpha / (1.0 + alpha))).abs() < 1e-10);
        assert!(small_block_cancellation_probe(&pf, c(1.0), 1.0, 5.0).is_ok());
        // 1/(s+2) - 2/(s+3) vanishes at -1, two units from the pole
        let mut with_zero = pf.clone();
        with_zero.terms.push(PartialFractionTerm { pole: c(-3.0), order: 1, coefficient: c(-2.0) });
        match small_block_cancellation_probe(&with_zero, c(1.0), 1.0, 5.0) {
            Err(Error::Radius { limit, .. }) => assert!((limit - 2.0).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        // capture iff 3α/(1+α) <= 0.5, i.e. α <= 0.2
        let s = cancellation_scale_search(&pf, c(1.0), 0.5).unwrap().unwrap();
        assert!((s - 0.2).abs() < 1e-5);
    }
}
