//! State-space systems, interconnections and the closed-loop maps of a
//! plant/controller pair.
//!
//! Plants and controllers are strictly proper. Feedback is positive:
//! `u = K y`, so the closed-loop state matrix is
//! `[[A, B C_K], [B_K C, A_K]]`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, block2, block_diag, check_finite, hstack, vstack};
use crate::poly;
use crate::tol::{self, tol_stab, RANK_RTOL};
use crate::{Matrix, C64};

/// Continuous-time system `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
}

impl StateSpace {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        check_finite(&a, "A")?;
        check_finite(&b, "B")?;
        check_finite(&c, "C")?;
        check_finite(&d, "D")?;
        Ok(Self { a, b, c, d })
    }

    /// Strictly proper system with `D = 0`.
    pub fn strictly_proper(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let d = Matrix::zeros(c.nrows(), b.ncols());
        Self::new(a, b, c, d)
    }

    /// Memoryless gain.
    pub fn gain(d: Matrix) -> Self {
        Self {
            a: Matrix::zeros(0, 0),
            b: Matrix::zeros(0, d.ncols()),
            c: Matrix::zeros(d.nrows(), 0),
            d,
        }
    }

    pub fn zero(outputs: usize, inputs: usize) -> Self {
        Self::gain(Matrix::zeros(outputs, inputs))
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_siso(&self) -> bool {
        self.inputs() == 1 && self.outputs() == 1
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.d.iter().all(|&v| v == 0.0)
    }

    pub fn neg(&self) -> Self {
        Self { a: self.a.clone(), b: self.b.clone(), c: -&self.c, d: -&self.d }
    }

    /// Realization in new coordinates `x̃ = T x`, given `T` and its inverse.
    pub fn transform(&self, t: &Matrix, t_inv: &Matrix) -> Self {
        Self { a: t * &self.a * t_inv, b: t * &self.b, c: &self.c * t_inv, d: self.d.clone() }
    }

    /// Keeps the states in `idx`.
    pub fn select_states(&self, idx: &[usize]) -> Self {
        let a = self.a.select_rows(idx).select_columns(idx);
        Self { a, b: self.b.select_rows(idx), c: self.c.select_columns(idx), d: self.d.clone() }
    }

    /// Transfer matrix `C (sI - A)⁻¹ B + D` at a complex frequency.
    pub fn eval(&self, s: C64) -> DMatrix<C64> {
        let d = self.d.map(|v| C64::new(v, 0.0));
        let n = self.order();
        if n == 0 {
            return d;
        }
        let mut m = self.a.map(|v| C64::new(-v, 0.0));
        for i in 0..n {
            m[(i, i)] += s;
        }
        let b = self.b.map(|v| C64::new(v, 0.0));
        let c = self.c.map(|v| C64::new(v, 0.0));
        match m.lu().solve(&b) {
            Some(x) => c * x + d,
            None => DMatrix::from_element(d.nrows(), d.ncols(), C64::new(f64::INFINITY, 0.0)),
        }
    }

    /// Largest singular value of the frequency response at `jω`.
    pub fn gain_at(&self, omega: f64) -> f64 {
        let g = self.eval(C64::new(0.0, omega));
        if g.is_empty() {
            return 0.0;
        }
        if g.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return f64::INFINITY;
        }
        if g.nrows() == 1 || g.ncols() == 1 {
            return g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        }
        linalg::max_singular_value_complex(&g)
    }

    pub fn poles(&self) -> Result<Vec<C64>> {
        linalg::eigenvalues(&minimal_realization(self)?.a)
    }

    pub fn zeros(&self) -> Result<Vec<C64>> {
        to_rational(self)?.zeros()
    }
}

/// Parallel connection `S1 + S2`.
pub fn add(s1: &StateSpace, s2: &StateSpace) -> Result<StateSpace> {
    if s1.inputs() != s2.inputs() || s1.outputs() != s2.outputs() {
        return Err(Error::Dimension(format!(
            "cannot add {}x{} and {}x{} systems",
            s1.outputs(),
            s1.inputs(),
            s2.outputs(),
            s2.inputs()
        )));
    }
    Ok(StateSpace {
        a: block_diag(&s1.a, &s2.a),
        b: vstack(&s1.b, &s2.b),
        c: hstack(&s1.c, &s2.c),
        d: &s1.d + &s2.d,
    })
}

/// Difference `S1 - S2`.
pub fn sub(s1: &StateSpace, s2: &StateSpace) -> Result<StateSpace> {
    add(s1, &s2.neg())
}

/// Series product `S1 · S2`: the signal passes through `S2` first.
pub fn series(s1: &StateSpace, s2: &StateSpace) -> Result<StateSpace> {
    if s1.inputs() != s2.outputs() {
        return Err(Error::Dimension(format!(
            "product needs {} inputs on the left factor, found {}",
            s2.outputs(),
            s1.inputs()
        )));
    }
    let a = block2(
        &s1.a,
        &(&s1.b * &s2.c),
        &Matrix::zeros(s2.order(), s1.order()),
        &s2.a,
    );
    Ok(StateSpace {
        a,
        b: vstack(&(&s1.b * &s2.d), &s2.b),
        c: hstack(&s1.c, &(&s1.d * &s2.c)),
        d: &s1.d * &s2.d,
    })
}

/// Inverse system; requires a square invertible feedthrough.
pub fn inverse(s: &StateSpace) -> Result<StateSpace> {
    if s.inputs() != s.outputs() {
        return Err(Error::Dimension("only square systems can be inverted".into()));
    }
    let d_inv = s
        .d
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Dimension("feedthrough is singular".into()))?;
    Ok(StateSpace {
        a: &s.a - &s.b * &d_inv * &s.c,
        b: &s.b * &d_inv,
        c: -&d_inv * &s.c,
        d: d_inv,
    })
}

fn check_pair(g: &StateSpace, k: &StateSpace) -> Result<()> {
    if g.outputs() != k.inputs() || g.inputs() != k.outputs() {
        return Err(Error::Dimension(format!(
            "plant is {}x{} but controller is {}x{}",
            g.outputs(),
            g.inputs(),
            k.outputs(),
            k.inputs()
        )));
    }
    if !g.is_strictly_proper() || !k.is_strictly_proper() {
        return Err(Error::NotStrictlyProper);
    }
    Ok(())
}

/// Closed-loop state matrix of the positive-feedback interconnection.
pub fn closed_loop_matrix(g: &StateSpace, k: &StateSpace) -> Result<Matrix> {
    check_pair(g, k)?;
    Ok(block2(&g.a, &(&g.b * &k.c), &(&k.b * &g.c), &k.a))
}

/// Outcome of the closed-loop eigenvalue test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub abscissa: f64,
}

pub fn is_internally_stable(g: &StateSpace, k: &StateSpace) -> Result<StabilityReport> {
    let a_cl = closed_loop_matrix(g, k)?;
    let abscissa = linalg::spectral_abscissa(&a_cl)?;
    Ok(StabilityReport { stable: abscissa < -tol_stab(&a_cl), abscissa })
}

/// Closed-loop map from `(w, v)` to `(ỹ, u)` on the shared closed-loop state.
#[derive(Debug, Clone)]
pub struct FourBlock {
    pub realization: StateSpace,
    pub plant_order: usize,
    pub controller_order: usize,
    /// Plant inputs (disturbance `w` and control `u`).
    pub inputs: usize,
    /// Plant outputs (noise `v` and measurement `ỹ`).
    pub outputs: usize,
}

impl FourBlock {
    /// Block `(i, j)` with `i` indexing `(ỹ, u)` and `j` indexing `(w, v)`.
    pub fn block(&self, i: usize, j: usize) -> StateSpace {
        let (m, p) = (self.inputs, self.outputs);
        let rows = if i == 0 { 0..p } else { p..p + m };
        let cols = if j == 0 { 0..m } else { m..m + p };
        let r = &self.realization;
        StateSpace {
            a: r.a.clone(),
            b: r.b.columns(cols.start, cols.len()).clone_owned(),
            c: r.c.rows(rows.start, rows.len()).clone_owned(),
            d: r.d.view((rows.start, cols.start), (rows.len(), cols.len())).clone_owned(),
        }
    }
}

pub fn four_block(g: &StateSpace, k: &StateSpace) -> Result<FourBlock> {
    let a = closed_loop_matrix(g, k)?;
    let (m, p) = (g.inputs(), g.outputs());
    let b = block_diag(&g.b, &k.b);
    let c = block_diag(&g.c, &k.c);
    let d = Matrix::zeros(p + m, m + p);
    Ok(FourBlock {
        realization: StateSpace { a, b, c, d },
        plant_order: g.order(),
        controller_order: k.order(),
        inputs: m,
        outputs: p,
    })
}

/// Realizations of `Y = (I - GK)⁻¹` and `X = (I - GK)⁻¹ G` on the closed-loop state.
pub fn sensitivity_pair(g: &StateSpace, k: &StateSpace) -> Result<(StateSpace, StateSpace)> {
    let st = is_internally_stable(g, k)?;
    if !st.stable {
        return Err(Error::NotStabilizing { abscissa: st.abscissa });
    }
    let loops = LoopMaps::new(g, k)?;
    Ok((loops.y, loops.x))
}

/// Closed-loop transfer functions sharing the closed-loop state.
#[derive(Debug, Clone)]
pub struct LoopMaps {
    /// `(I - GK)⁻¹`
    pub y: StateSpace,
    /// `(I - GK)⁻¹ G`
    pub x: StateSpace,
    /// `K (I - GK)⁻¹ G`
    pub kx: StateSpace,
    /// `K (I - GK)⁻¹`
    pub ky: StateSpace,
    /// `(I - GK)⁻¹ G K`
    pub xk: StateSpace,
}

impl LoopMaps {
    pub fn new(g: &StateSpace, k: &StateSpace) -> Result<Self> {
        let a = closed_loop_matrix(g, k)?;
        let (n, q) = (g.order(), k.order());
        let (m, p) = (g.inputs(), g.outputs());
        let b_w = vstack(&g.b, &Matrix::zeros(q, m));
        let b_v = vstack(&Matrix::zeros(n, p), &k.b);
        let c_y = hstack(&g.c, &Matrix::zeros(p, q));
        let c_u = hstack(&Matrix::zeros(m, n), &k.c);
        let sys = |b: &Matrix, c: &Matrix, d: Matrix| StateSpace { a: a.clone(), b: b.clone(), c: c.clone(), d };
        Ok(Self {
            y: sys(&b_v, &c_y, Matrix::identity(p, p)),
            x: sys(&b_w, &c_y, Matrix::zeros(p, m)),
            kx: sys(&b_w, &c_u, Matrix::zeros(m, m)),
            ky: sys(&b_v, &c_u, Matrix::zeros(m, p)),
            xk: sys(&b_v, &c_y, Matrix::zeros(p, p)),
        })
    }
}

/// Controllability and observability ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Minimality {
    pub minimal: bool,
    pub controllable_rank: usize,
    pub observable_rank: usize,
}

/// Orthonormal basis of the Krylov space spanned by `(A, B)`.
///
/// Built block by block; each new block is orthogonalized against the basis
/// and its numerical rank is read off its singular values.
fn krylov_basis(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.nrows();
    let mut basis = Matrix::zeros(n, 0);
    if n == 0 {
        return basis;
    }
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        return basis;
    }
    let tol = RANK_RTOL * scale;
    let mut block = b.clone();
    for _ in 0..n {
        let mut w = block.clone();
        for _ in 0..2 {
            if basis.ncols() > 0 {
                let proj = &basis * (basis.transpose() * &w);
                w -= proj;
            }
        }
        if w.ncols() == 0 {
            break;
        }
        let Ok(svd) = linalg::svd(&w) else { break };
        let u = svd.u;
        let keep: Vec<usize> = (0..svd.s.len()).filter(|&i| svd.s[i] > tol).collect();
        if keep.is_empty() {
            break;
        }
        let fresh = u.select_columns(&keep);
        basis = hstack(&basis, &fresh);
        if basis.ncols() >= n {
            break;
        }
        block = a * fresh;
    }
    basis
}

pub fn check_minimal(s: &StateSpace) -> Minimality {
    let rc = krylov_basis(&s.a, &s.b).ncols();
    let ro = krylov_basis(&s.a.transpose(), &s.c.transpose()).ncols();
    let n = s.order();
    Minimality { minimal: rc == n && ro == n, controllable_rank: rc, observable_rank: ro }
}

/// Removes uncontrollable and unobservable states with orthogonal projections.
pub fn minimal_realization(s: &StateSpace) -> Result<StateSpace> {
    let qc = krylov_basis(&s.a, &s.b);
    let a1 = qc.transpose() * &s.a * &qc;
    let b1 = qc.transpose() * &s.b;
    let c1 = &s.c * &qc;
    let qo = krylov_basis(&a1.transpose(), &c1.transpose());
    Ok(StateSpace {
        a: qo.transpose() * &a1 * &qo,
        b: qo.transpose() * b1,
        c: c1 * &qo,
        d: s.d.clone(),
    })
}

/// SISO transfer function as a ratio of real polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTransferFunction {
    /// Ascending coefficients; empty for the zero function.
    pub numerator: Vec<f64>,
    /// Ascending coefficients, monic.
    pub denominator: Vec<f64>,
}

impl RationalTransferFunction {
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>) -> Result<Self> {
        let den = poly::trim(denominator, 0.0);
        let num = poly::trim(numerator, 0.0);
        let Some(dd) = poly::degree(&den) else {
            return Err(Error::Dimension("denominator is zero".into()));
        };
        if num.len() > dd + 1 {
            return Err(Error::Improper);
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("rational function"));
        }
        let lead = den[dd];
        Ok(Self {
            numerator: poly::scale(&num, 1.0 / lead),
            denominator: poly::scale(&den, 1.0 / lead),
        })
    }

    pub fn eval(&self, s: C64) -> C64 {
        poly::eval(&self.numerator, s) / poly::eval(&self.denominator, s)
    }

    pub fn poles(&self) -> Result<Vec<C64>> {
        poly::roots(&self.denominator)
    }

    pub fn zeros(&self) -> Result<Vec<C64>> {
        poly::roots(&self.numerator)
    }

    pub fn relative_degree(&self) -> usize {
        let dn = poly::degree(&self.numerator).map_or(0, |d| d);
        (self.denominator.len() - 1).saturating_sub(dn)
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.numerator.len() < self.denominator.len()
    }

    /// Controllable companion realization.
    pub fn to_state_space(&self) -> StateSpace {
        let n = self.denominator.len() - 1;
        let mut num = self.numerator.clone();
        num.resize(n + 1, 0.0);
        let d = num[n];
        let mut a = Matrix::zeros(n, n);
        for k in 0..n {
            a[(n - 1, k)] = -self.denominator[k];
        }
        for k in 0..n.saturating_sub(1) {
            a[(k, k + 1)] = 1.0;
        }
        let mut b = Matrix::zeros(n, 1);
        if n > 0 {
            b[(n - 1, 0)] = 1.0;
        }
        let c = Matrix::from_fn(1, n, |_, k| num[k] - d * self.denominator[k]);
        StateSpace { a, b, c, d: Matrix::from_element(1, 1, d) }
    }
}

/// SISO transfer function with matched pole/zero pairs cancelled.
pub fn to_rational(s: &StateSpace) -> Result<RationalTransferFunction> {
    if !s.is_siso() {
        return Err(Error::NotSiso);
    }
    let n = s.order();
    let den = poly::charpoly(&s.a)?;
    let d = s.d[(0, 0)];
    // det(sI - A + BC) = det(sI - A) (1 + C (sI - A)⁻¹ B)
    let closed = poly::charpoly(&(&s.a - &s.b * &s.c))?;
    let scale = closed.iter().chain(den.iter()).fold(0.0f64, |m, c| m.max(c.abs()));
    let mut num: Vec<f64> = closed.iter().zip(&den).map(|(x, y)| x - y).collect();
    num.truncate(n);
    let mut num = poly::trim(num, 64.0 * f64::EPSILON * scale);
    num = poly::add(&num, &poly::scale(&den, d));
    let mut num = poly::trim(num, 0.0);
    let mut den = den;

    loop {
        let zs = poly::roots(&num)?;
        let ps = poly::roots(&den)?;
        let hit = zs.iter().find_map(|z| {
            ps.iter()
                .find(|p| (*p - z).norm() <= tol::tol_pz(p.norm()) && (p.im == 0.0) == (z.im == 0.0))
                .map(|p| (*z, *p))
        });
        let Some((z, p)) = hit else { break };
        num = poly::deflate_real(&num, z);
        den = poly::deflate_real(&den, p);
    }
    RationalTransferFunction::new(num, den)
}
