//! Test-side oracles, written independently of the library's numerical kernels.
#![allow(dead_code)]

use ctred::lti::{RationalTransferFunction, StateSpace};
use ctred::{Matrix, C64};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// One diagonal block of a real modal form.
#[derive(Debug, Clone, Copy)]
pub enum Mode {
    Real(f64),
    /// `[[σ, ω], [-ω, σ]]`
    Pair(f64, f64),
}

impl Mode {
    pub fn size(&self) -> usize {
        match self {
            Mode::Real(_) => 1,
            Mode::Pair(..) => 2,
        }
    }
}

/// A system known in block-diagonal modal coordinates. The library only sees
/// `system`, a random similarity transform of the modal form.
#[derive(Debug, Clone)]
pub struct ModalSystem {
    pub modes: Vec<Mode>,
    pub b0: Matrix,
    pub c0: Matrix,
    pub d: Matrix,
    pub system: StateSpace,
}

impl ModalSystem {
    pub fn order(&self) -> usize {
        self.b0.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        let mut v = vec![];
        for m in &self.modes {
            match *m {
                Mode::Real(l) => v.push(C64::new(l, 0.0)),
                Mode::Pair(s, w) => {
                    v.push(C64::new(s, w));
                    v.push(C64::new(s, -w));
                }
            }
        }
        v
    }

    /// `C0 (sI - A0)⁻¹ B0 + D` using closed-form block inverses.
    pub fn eval(&self, s: C64) -> DMatrix<C64> {
        let (p, m) = (self.c0.nrows(), self.b0.ncols());
        let mut g = DMatrix::from_fn(p, m, |i, j| C64::new(self.d[(i, j)], 0.0));
        let mut k = 0;
        for mode in &self.modes {
            match *mode {
                Mode::Real(l) => {
                    let f = C64::new(1.0, 0.0) / (s - l);
                    for i in 0..p {
                        for j in 0..m {
                            g[(i, j)] += f * self.c0[(i, k)] * self.b0[(k, j)];
                        }
                    }
                }
                Mode::Pair(sigma, w) => {
                    let z = s - sigma;
                    let det = z * z + w * w;
                    let inv = [[z / det, C64::new(w, 0.0) / det], [C64::new(-w, 0.0) / det, z / det]];
                    for i in 0..p {
                        for j in 0..m {
                            for (u, row) in inv.iter().enumerate() {
                                for (v, x) in row.iter().enumerate() {
                                    g[(i, j)] += self.c0[(i, k + u)] * x * self.b0[(k + v, j)];
                                }
                            }
                        }
                    }
                }
            }
            k += mode.size();
        }
        g
    }

    pub fn gain(&self, w: f64) -> f64 {
        sigma_max(&self.eval(C64::new(0.0, w)))
    }

    pub fn frequency_scale(&self) -> (f64, f64) {
        let mags: Vec<f64> = self.eigenvalues().iter().map(|l| l.norm()).collect();
        (mags.iter().cloned().fold(f64::INFINITY, f64::min), mags.iter().cloned().fold(0.0, f64::max))
    }
}

/// Random stable system: real modes in `[-5, -0.1]`, pairs with `σ ∈ [-3, -0.05]`,
/// `ω ∈ [0.1, 5]`, and a random well-conditioned similarity.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> ModalSystem {
    let mut modes = vec![];
    let mut k = 0;
    while k < n {
        if n - k >= 2 && rng.gen_bool(0.4) {
            modes.push(Mode::Pair(rng.gen_range(-3.0..-0.05), rng.gen_range(0.1..5.0)));
            k += 2;
        } else {
            modes.push(Mode::Real(rng.gen_range(-5.0..-0.1)));
            k += 1;
        }
    }
    let mut a0 = Matrix::zeros(n, n);
    let mut k = 0;
    for mode in &modes {
        match *mode {
            Mode::Real(l) => a0[(k, k)] = l,
            Mode::Pair(s, w) => {
                a0[(k, k)] = s;
                a0[(k + 1, k + 1)] = s;
                a0[(k, k + 1)] = w;
                a0[(k + 1, k)] = -w;
            }
        }
        k += mode.size();
    }
    let b0 = normal(rng, n, m);
    let c0 = normal(rng, p, n);
    let t = Matrix::identity(n, n) + normal(rng, n, n) * (0.3 / (n as f64).sqrt());
    let t_inv = t.clone().try_inverse().expect("near-identity similarity is invertible");
    let system = StateSpace::new(&t * &a0 * &t_inv, &t * &b0, &c0 * &t_inv, Matrix::zeros(p, m)).unwrap();
    ModalSystem { modes, b0, c0, d: Matrix::zeros(p, m), system }
}

pub fn sigma_max(g: &DMatrix<C64>) -> f64 {
    if g.nrows() == 1 && g.ncols() == 1 {
        return g[(0, 0)].norm();
    }
    faer::Mat::<C64>::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)]).singular_values().unwrap()[0]
}

/// `C (sI - A)⁻¹ B + D` by dense complex LU, for systems without a known modal form.
pub fn response(s: &StateSpace, z: C64) -> DMatrix<C64> {
    let n = s.order();
    let to_c = |m: &Matrix| m.map(|x| C64::new(x, 0.0));
    let d = to_c(&s.d);
    if n == 0 {
        return d;
    }
    let m = DMatrix::<C64>::identity(n, n) * z - to_c(&s.a);
    let x = m.lu().solve(&to_c(&s.b)).expect("frequency off the spectrum");
    to_c(&s.c) * x + d
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * b.abs().max(1e-300) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Peak of `f` over `{0} ∪` a log grid on `[lo, hi]`, with golden-section
/// refinement around the `refine` largest local maxima.
pub fn grid_peak(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, points: usize, refine: usize) -> f64 {
    let ratio = (hi / lo).ln() / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo * (ratio * i as f64).exp()).collect();
    let vals: Vec<f64> = grid.iter().map(|&w| f(w)).collect();
    let mut best = f(0.0).max(vals.iter().cloned().fold(0.0, f64::max));
    let mut peaks: Vec<usize> = (1..points - 1).filter(|&i| vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1]).collect();
    peaks.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    for &i in peaks.iter().take(refine) {
        best = best.max(golden_max(f, grid[i - 1], grid[i + 1]));
    }
    best
}

/// H∞ norm of a modal system from a dense log grid.
pub fn hinf_oracle(s: &ModalSystem, points: usize) -> f64 {
    let (lo, hi) = s.frequency_scale();
    grid_peak(&|w| s.gain(w), lo * 1e-4, hi * 1e4, points, 8)
}

/// H∞ estimate of an arbitrary stable system from a log grid.
pub fn hinf_grid(s: &StateSpace, lo: f64, hi: f64, points: usize) -> f64 {
    grid_peak(&|w| sigma_max(&response(s, C64::new(0.0, w))), lo, hi, points, 8)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// `∫_a^b f` by adaptive Simpson on `pieces` equal panels, to relative accuracy `rtol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize, rtol: f64) -> f64 {
    let coarse = panels(f, a, b, pieces, f64::INFINITY);
    panels(f, a, b, pieces, rtol * coarse.abs())
}

fn panels(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (x0, x1) = (a + h * i as f64, a + h * (i + 1) as f64);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            simpson(f, x0, x1, f0, fm, f1, whole, tol / pieces as f64, 24)
        })
        .sum()
}

/// `(1/π) ∫₀^∞ ‖G(jω)‖_F² dω` for a strictly proper system, via `ω = c·tan θ`.
pub fn h2_squared_quadrature(eval: &dyn Fn(f64) -> DMatrix<C64>, scale: f64, tail: f64, rtol: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let f = |theta: f64| {
        if theta >= half_pi {
            return tail / scale;
        }
        let w = scale * theta.tan();
        let g = eval(w);
        let fro: f64 = g.iter().map(|z| z.norm_sqr()).sum();
        fro * scale / theta.cos().powi(2)
    };
    integrate(&f, 0.0, half_pi, 256, rtol) / std::f64::consts::PI
}

pub fn h2_squared_oracle(s: &ModalSystem) -> f64 {
    let cb = &s.c0 * &s.b0;
    let tail = cb.iter().map(|x| x * x).sum::<f64>();
    let (_, hi) = s.frequency_scale();
    h2_squared_quadrature(&|w| s.eval(C64::new(0.0, w)), hi.max(1e-3), tail, 1e-9)
}

/// `A X + X Aᵀ + Q = 0` by Kronecker vectorization.
pub fn lyapunov_kron(a: &Matrix, q: &Matrix) -> Matrix {
    let n = a.nrows();
    let eye = Matrix::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|x| -x));
    let x = k.lu().solve(&rhs).expect("stable A gives a nonsingular Kronecker sum");
    Matrix::from_column_slice(n, n, x.as_slice())
}

pub fn controllability_gramian(s: &StateSpace) -> Matrix {
    lyapunov_kron(&s.a, &(&s.b * s.b.transpose()))
}

pub fn observability_gramian(s: &StateSpace) -> Matrix {
    lyapunov_kron(&s.a.transpose(), &(s.c.transpose() * &s.c))
}

/// Positive-feedback closed-loop matrix, built here from the blocks.
pub fn closed_loop(g: &StateSpace, k: &StateSpace) -> Matrix {
    let (n, q) = (g.order(), k.order());
    let mut a = Matrix::zeros(n + q, n + q);
    a.view_mut((0, 0), (n, n)).copy_from(&g.a);
    a.view_mut((0, n), (n, q)).copy_from(&(&g.b * &k.c));
    a.view_mut((n, 0), (q, n)).copy_from(&(&k.b * &g.c));
    a.view_mut((n, n), (q, q)).copy_from(&k.a);
    a
}

/// Eigenvalues by `faer`, independent of the library's Schur path.
pub fn eigs(a: &Matrix) -> Vec<C64> {
    faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]).eigenvalues().unwrap()
}

pub fn closed_loop_eigs(g: &StateSpace, k: &StateSpace) -> Vec<C64> {
    eigs(&closed_loop(g, k))
}

/// LQG cost as `trace(C P Cᵀ)` of the closed loop driven by `(w, v)` and observed at `(ỹ, u)`.
pub fn cost_oracle(g: &StateSpace, k: &StateSpace) -> f64 {
    let a = closed_loop(g, k);
    let (n, q) = (g.order(), k.order());
    let mut b = Matrix::zeros(n + q, g.inputs() + k.inputs());
    b.view_mut((0, 0), (n, g.inputs())).copy_from(&g.b);
    b.view_mut((n, g.inputs()), (q, k.inputs())).copy_from(&k.b);
    let mut c = Matrix::zeros(g.outputs() + k.outputs(), n + q);
    c.view_mut((0, 0), (g.outputs(), n)).copy_from(&g.c);
    c.view_mut((g.outputs(), n), (k.outputs(), q)).copy_from(&k.c);
    let p = lyapunov_kron(&a, &(&b * b.transpose()));
    (&c * p * c.transpose()).trace()
}

pub fn max_real(v: &[C64]) -> f64 {
    v.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Largest relative deviation of two responses over a log grid.
pub fn response_gap(f: &dyn Fn(C64) -> DMatrix<C64>, g: &dyn Fn(C64) -> DMatrix<C64>, points: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..points {
        let w = 1e-3 * 1e6f64.powf(i as f64 / (points - 1) as f64);
        let (a, b) = (f(C64::new(0.0, w)), g(C64::new(0.0, w)));
        let scale = a.iter().chain(b.iter()).map(|z| z.norm()).fold(1e-300, f64::max);
        let diff = (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    worst
}

/// Polynomial with the given real or conjugate-paired roots, ascending.
pub fn poly_from_roots(roots: &[C64]) -> Vec<f64> {
    let mut p = vec![C64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![C64::new(0.0, 0.0); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        p = next;
    }
    p.iter().map(|c| c.re).collect()
}

pub fn poly_eval(p: &[f64], s: C64) -> C64 {
    p.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

pub fn poly_derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect()
}

/// `random_stable` with order in `lo..=hi` and one or two inputs and outputs.
pub fn random_system(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> ModalSystem {
    let n = rng.gen_range(lo..=hi);
    let (m, p) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
    random_stable(rng, n, m, p)
}

/// Random rational function with prescribed pole multiplicities.
pub fn random_rational(r: &mut ChaCha8Rng, repeated: bool) -> (RationalTransferFunction, Vec<C64>) {
    let mut poles = vec![];
    let count = r.gen_range(2..=5);
    // Distinct poles stay 0.05 apart; closer pairs make the expansion itself ill-conditioned.
    let apart = |poles: &[C64], p: C64| poles.iter().all(|q| (p - q).norm() >= 0.05);
    while poles.len() < count {
        if r.gen_bool(0.3) {
            let p = C64::new(r.gen_range(-3.0..1.0), r.gen_range(0.3..3.0));
            if apart(&poles, p) {
                poles.push(p);
                poles.push(p.conj());
            }
        } else {
            let p = C64::new(r.gen_range(-3.0..2.0), 0.0);
            if apart(&poles, p) {
                poles.push(p);
            }
        }
    }
    if repeated {
        let p = poles[0];
        poles.push(p);
        if p.im != 0.0 {
            poles.push(p.conj());
        }
    }
    let deg = r.gen_range(0..poles.len());
    let mut zeros = vec![];
    while zeros.len() < deg {
        if deg - zeros.len() >= 2 && r.gen_bool(0.3) {
            let z = C64::new(r.gen_range(-3.0..3.0), r.gen_range(0.3..3.0));
            zeros.push(z);
            zeros.push(z.conj());
        } else {
            zeros.push(C64::new(r.gen_range(-3.0..3.0), 0.0));
        }
    }
    let gain = r.gen_range(0.5..2.0);
    let num: Vec<f64> = poly_from_roots(&zeros).iter().map(|c| c * gain).collect();
    (RationalTransferFunction::new(num, poly_from_roots(&poles)).unwrap(), poles)
}
