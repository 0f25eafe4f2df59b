//! Dense univariate polynomials stored as ascending coefficient vectors.

use crate::error::Result;
use crate::linalg::eigenvalues;
use crate::{Matrix, C64};

/// Degree of `p`, `None` for the zero polynomial.
pub fn degree(p: &[f64]) -> Option<usize> {
    p.iter().rposition(|&c| c != 0.0)
}

/// Drops trailing (highest-degree) coefficients with magnitude `<= tol`.
pub fn trim(mut p: Vec<f64>, tol: f64) -> Vec<f64> {
    while let Some(&c) = p.last() {
        if c.abs() <= tol {
            p.pop();
        } else {
            break;
        }
    }
    p
}

pub fn eval(p: &[f64], s: C64) -> C64 {
    p.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

pub fn eval_complex(p: &[C64], s: C64) -> C64 {
    p.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

pub fn derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (k, &c) in a.iter().enumerate() {
        out[k] += c;
    }
    for (k, &c) in b.iter().enumerate() {
        out[k] += c;
    }
    out
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|c| c * k).collect()
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn mul_complex(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monic polynomial with the given roots; complex roots must come in conjugate pairs.
pub fn from_roots(roots: &[C64]) -> Vec<f64> {
    from_roots_complex(roots).into_iter().map(|c| c.re).collect()
}

pub fn from_roots_complex(roots: &[C64]) -> Vec<C64> {
    let mut p = vec![C64::new(1.0, 0.0)];
    for &r in roots {
        p = mul_complex(&p, &[-r, C64::new(1.0, 0.0)]);
    }
    p
}

/// Synthetic division by `(s - r)`; returns the quotient and drops the remainder.
pub fn deflate(p: &[C64], r: C64) -> Vec<C64> {
    let n = p.len();
    if n <= 1 {
        return vec![];
    }
    let mut q = vec![C64::new(0.0, 0.0); n - 1];
    let mut acc = C64::new(0.0, 0.0);
    for k in (1..n).rev() {
        acc = acc * r + p[k];
        q[k - 1] = acc;
    }
    q
}

/// Division of a real polynomial by the real quadratic or linear factor of `r`.
pub fn deflate_real(p: &[f64], r: C64) -> Vec<f64> {
    let pc: Vec<C64> = p.iter().map(|&c| C64::new(c, 0.0)).collect();
    let mut q = deflate(&pc, r);
    if r.im != 0.0 {
        q = deflate(&q, r.conj());
    }
    q.into_iter().map(|c| c.re).collect()
}

/// Characteristic polynomial `det(sI - A)`, monic.
pub fn charpoly(a: &Matrix) -> Result<Vec<f64>> {
    Ok(from_roots(&eigenvalues(a)?))
}

/// Roots via the eigenvalues of the companion matrix, polished by Newton steps.
pub fn roots(p: &[f64]) -> Result<Vec<C64>> {
    let Some(deg) = degree(p) else {
        return Ok(vec![]);
    };
    let low = p.iter().position(|&c| c != 0.0).unwrap_or(0);
    let mut out = vec![C64::new(0.0, 0.0); low];
    let core = &p[low..=deg];
    let d = core.len() - 1;
    if d == 0 {
        return Ok(out);
    }
    let lead = core[d];
    let mut comp = Matrix::zeros(d, d);
    for k in 0..d {
        comp[(0, k)] = -core[d - 1 - k] / lead;
    }
    for k in 1..d {
        comp[(k, k - 1)] = 1.0;
    }
    let dp = derivative(core);
    for z in eigenvalues(&comp)? {
        out.push(polish(core, &dp, z));
    }
    Ok(out)
}

fn polish(p: &[f64], dp: &[f64], z0: C64) -> C64 {
    let mut z = z0;
    let mut fz = eval(p, z).norm();
    for _ in 0..3 {
        let d = eval(dp, z);
        if d.norm() == 0.0 {
            break;
        }
        let cand = z - eval(p, z) / d;
        // keep real roots real
        let cand = if z0.im == 0.0 { C64::new(cand.re, 0.0) } else { cand };
        let fc = eval(p, cand).norm();
        if fc < fz && (cand - z).norm() <= 1e-3 * (1.0 + z.norm()) {
            z = cand;
            fz = fc;
        } else {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_quadratic() {
        let mut r = roots(&[2.0, -3.0, 1.0]).unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0].re - 1.0).abs() < 1e-14 && (r[1].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_roots_kept() {
        let r = roots(&[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
    }

    #[test]
    fn from_roots_round_trip() {
        let p = from_roots(&[C64::new(-1.0, 2.0), C64::new(-1.0, -2.0), C64::new(3.0, 0.0)]);
        // (s^2 + 2s + 5)(s - 3)
        let expect = [-15.0, -1.0, -1.0, 1.0];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn deflation_is_exact_on_roots() {
        let p = [-6.0, 11.0, -6.0, 1.0];
        let q = deflate_real(&p, C64::new(1.0, 0.0));
        assert_eq!(q, vec![6.0, -5.0, 1.0]);
    }
}
