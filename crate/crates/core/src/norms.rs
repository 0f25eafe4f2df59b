//! H2, H-infinity, L2 and L-infinity norms of state-space systems.

use crate::decompose::split_stable_unstable;
use crate::error::{Error, Result};
use crate::linalg::{self, solve_lyapunov};
use crate::lti::StateSpace;
use crate::tol::{
    norm_inf, tol_stab, HAMILTONIAN_AXIS_RTOL, HINF_MAX_ITER, HINF_RTOL, ROUNDOFF_GAIN_RTOL,
};
use crate::{Matrix, C64};

fn ensure_stable(s: &StateSpace) -> Result<()> {
    if s.order() == 0 {
        return Ok(());
    }
    let abscissa = linalg::spectral_abscissa(&s.a)?;
    if abscissa < -tol_stab(&s.a) {
        Ok(())
    } else {
        Err(Error::NotStable { abscissa })
    }
}

fn ensure_no_axis_poles(s: &StateSpace) -> Result<()> {
    let tol = tol_stab(&s.a);
    if let Some(p) = linalg::eigenvalues(&s.a)?.into_iter().find(|l| l.re.abs() <= tol) {
        return Err(Error::AxisPole(p));
    }
    Ok(())
}

/// Squared H2 norm `trace(C W_c Cᵀ)` of a stable strictly proper system.
pub fn h2_norm_squared(s: &StateSpace) -> Result<f64> {
    if !s.is_strictly_proper() {
        return Err(Error::NotStrictlyProper);
    }
    ensure_stable(s)?;
    if s.order() == 0 {
        return Ok(0.0);
    }
    let wc = solve_lyapunov(&s.a, &(&s.b * s.b.transpose()))?;
    Ok((&s.c * wc * s.c.transpose()).trace().max(0.0))
}

pub fn h2_norm(s: &StateSpace) -> Result<f64> {
    Ok(h2_norm_squared(s)?.sqrt())
}

/// Peak gain over the imaginary axis of a stable system.
pub fn hinf_norm(s: &StateSpace) -> Result<f64> {
    match ensure_stable(s) {
        Ok(()) => peak_gain(s),
        Err(Error::NotStable { .. }) => Err(Error::UseLinf),
        Err(e) => Err(e),
    }
}

/// Peak gain over the imaginary axis; the system may be unstable but must
/// not have poles on the axis.
pub fn linf_norm(s: &StateSpace) -> Result<f64> {
    ensure_no_axis_poles(s)?;
    peak_gain(s)
}

/// L2 norm: the stable part and the reflected antistable part are measured
/// separately in H2.
pub fn l2_norm(s: &StateSpace) -> Result<f64> {
    if !s.is_strictly_proper() {
        return Err(Error::NotStrictlyProper);
    }
    ensure_no_axis_poles(s)?;
    let split = split_stable_unstable(s)?;
    let stable = h2_norm_squared(&split.stable)?;
    let u = &split.unstable;
    let mirror = StateSpace {
        a: -u.a.transpose(),
        b: u.c.transpose(),
        c: u.b.transpose(),
        d: Matrix::zeros(u.inputs(), u.outputs()),
    };
    Ok((stable + h2_norm_squared(&mirror)?).sqrt())
}

fn max_singular(d: &Matrix) -> f64 {
    linalg::max_singular_value(d)
}

/// Log-spaced frequencies covering the pole magnitudes, plus the origin and
/// the imaginary parts of the poles.
pub(crate) fn frequency_grid(poles: &[C64], points: usize) -> Vec<f64> {
    let mags: Vec<f64> = poles.iter().map(|p| p.norm()).filter(|m| *m > 0.0).collect();
    let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().cloned().fold(0.0, f64::max);
    let (lo, hi) = if mags.is_empty() { (1e-3, 1e3) } else { (lo * 1e-2, hi * 1e2) };
    let (l0, l1) = (lo.log10(), hi.log10());
    let mut out = vec![0.0];
    out.extend(poles.iter().map(|p| p.im.abs()).filter(|w| *w > 0.0));
    out.extend((0..points).map(|i| 10f64.powf(l0 + (l1 - l0) * i as f64 / (points - 1) as f64)));
    out
}

/// Imaginary-axis eigenvalues of the Hamiltonian for level `gamma`, returned
/// as nonnegative frequencies. `None` when the Hamiltonian is undefined.
fn axis_crossings(s: &StateSpace, gamma: f64) -> Result<Option<Vec<f64>>> {
    let (n, m, p) = (s.order(), s.inputs(), s.outputs());
    let r = Matrix::identity(m, m) * (gamma * gamma) - s.d.transpose() * &s.d;
    let Some(r_inv) = r.try_inverse() else {
        return Ok(None);
    };
    let a_h = &s.a + &s.b * &r_inv * s.d.transpose() * &s.c;
    let g = &s.b * &r_inv * s.b.transpose();
    let q = s.c.transpose() * (Matrix::identity(p, p) + &s.d * &r_inv * s.d.transpose()) * &s.c;
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_h);
    h.view_mut((0, n), (n, n)).copy_from(&g);
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a_h.transpose()));
    let tol = HAMILTONIAN_AXIS_RTOL * norm_inf(&h);
    let eigs = linalg::eigenvalues(&h)?;
    Ok(Some(
        eigs.into_iter()
            .filter(|l| l.re.abs() <= tol)
            .map(|l| l.im.abs())
            .collect(),
    ))
}

/// Peak of `σ_max(S(jω))` by level-set iteration: each Hamiltonian at a
/// level just above the current lower bound either certifies it (no axis
/// eigenvalues) or yields crossing frequencies whose midpoints raise the
/// bound. Crossings that raise no gain above the level are numerical
/// artifacts and end the iteration.
fn peak_gain(s: &StateSpace) -> Result<f64> {
    let dnorm = max_singular(&s.d);
    if s.order() == 0 || s.b.norm() == 0.0 || s.c.norm() == 0.0 {
        return Ok(dnorm);
    }
    let poles = linalg::eigenvalues(&s.a)?;
    let (mut arg, mut lo) = frequency_grid(&poles, 200)
        .into_iter()
        .map(|w| (w, s.gain_at(w)))
        .fold((f64::NAN, dnorm), |best, p| if p.1 > best.1 { p } else { best });
    if !lo.is_finite() {
        return Err(Error::AxisPole(C64::new(0.0, 0.0)));
    }
    // gains at the roundoff level of the realization are not resolvable
    let an = s.a.norm();
    let structural = if an > 0.0 { s.b.norm() * s.c.norm() / an } else { s.b.norm() * s.c.norm() };
    if lo <= dnorm + ROUNDOFF_GAIN_RTOL * structural {
        return Ok(lo);
    }
    for _ in 0..HINF_MAX_ITER {
        let level = lo * (1.0 + 2.0 * HINF_RTOL);
        let mut w = match axis_crossings(s, level)? {
            Some(c) if !c.is_empty() => c,
            _ => return Ok(polish(s, arg, lo)),
        };
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mids: Vec<f64> = w.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        let (best_w, best) = w
            .iter()
            .chain(&mids)
            .map(|&x| (x, s.gain_at(x)))
            .fold((arg, lo), |b, p| if p.1 > b.1 { p } else { b });
        if best <= level {
            return Ok(polish(s, best_w, best));
        }
        (arg, lo) = (best_w, best);
    }
    Err(Error::Convergence { residual: lo, tolerance: HINF_RTOL })
}

/// Golden-section refinement of an attained gain within 1% of its frequency.
fn polish(s: &StateSpace, w: f64, gain: f64) -> f64 {
    if !(w > 0.0) {
        return gain;
    }
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (w * 0.99, w * 1.01);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (s.gain_at(c), s.gain_at(d));
    for _ in 0..60 {
        if fc > fd {
            (b, d, fd) = (d, c, fc);
            c = b - r * (b - a);
            fc = s.gain_at(c);
        } else {
            (a, c, fc) = (c, d, fd);
            d = a + r * (b - a);
            fd = s.gain_at(d);
        }
    }
    gain.max(fc).max(fd)
}
