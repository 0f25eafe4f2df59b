//! Dense kernels: real Schur forms with eigenvalue reordering, Sylvester and
//! Lyapunov equations, and the continuous algebraic Riccati equation.
//!
//! The unordered Schur iteration comes from `nalgebra` and singular value
//! decompositions from `faer`. Everything on top of them (2x2
//! standardization, adjacent block swaps, ordering, Bartels-Stewart
//! back-substitution and the Hamiltonian Riccati solver) lives here.

use nalgebra::linalg::{Schur};
use nalgebra::{Cholesky, DMatrix, DVector, LU, QR};

use crate::error::{Error, Result};
use crate::tol::{norm_inf, tol_sep, tol_stab};
use crate::{Matrix, C64};

/// Real Schur factorization `A = Z T Zᵀ`.
#[derive(Debug, Clone)]
pub struct SchurForm {
    /// Quasi-upper-triangular factor; 2x2 diagonal blocks hold complex pairs.
    pub t: Matrix,
    /// Orthogonal factor.
    pub z: Matrix,
    /// Eigenvalues in diagonal-block order.
    pub eigenvalues: Vec<C64>,
}

impl SchurForm {
    /// Diagonal blocks as `(start, size)` pairs.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        block_structure(&self.t)
    }
}

pub(crate) fn check_square(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_finite(a: &Matrix, what: &'static str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`, `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

pub fn svd(a: &Matrix) -> Result<Svd> {
    check_finite(a, "matrix")?;
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(Svd { u: Matrix::zeros(m, 0), s: vec![], v: Matrix::zeros(n, 0) });
    }
    let f = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let d = f.thin_svd().map_err(|_| Error::DecompositionFailed)?;
    let (u, s, v) = (d.U(), d.S(), d.V());
    Ok(Svd {
        u: Matrix::from_fn(m, k, |i, j| u[(i, j)]),
        s: (0..k).map(|i| s[i]).collect(),
        v: Matrix::from_fn(n, k, |i, j| v[(i, j)]),
    })
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_square(a, "matrix")?;
    check_finite(a, "matrix")?;
    let n = a.nrows();
    if n == 0 {
        return Ok((vec![], Matrix::zeros(0, 0)));
    }
    let f = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let e = f.self_adjoint_eigen(faer::Side::Lower).map_err(|_| Error::DecompositionFailed)?;
    let (s, u) = (e.S(), e.U());
    Ok(((0..n).map(|i| s[i]).collect(), Matrix::from_fn(n, n, |i, j| u[(i, j)])))
}

/// Largest singular value; zero for an empty matrix.
pub fn max_singular_value(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let f = faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    f.singular_values().map_or(f64::NAN, |s| s[0])
}

/// Largest singular value of a complex matrix; zero for an empty matrix.
pub fn max_singular_value_complex(a: &DMatrix<C64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let f = faer::Mat::<C64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    f.singular_values().map_or(f64::NAN, |s| s[0])
}

/// All eigenvalues of a square matrix, complex pairs adjacent.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<C64>> {
    check_square(a, "matrix")?;
    check_finite(a, "matrix")?;
    Ok(real_schur(a)?.eigenvalues)
}

/// Largest real part of the spectrum (`-inf` for an empty matrix).
pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Standardized real Schur form: 1x1 blocks for real eigenvalues and 2x2
/// blocks with equal diagonal entries for complex pairs.
pub fn real_schur(a: &Matrix) -> Result<SchurForm> {
    check_square(a, "matrix")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(SchurForm {
            t: Matrix::zeros(0, 0),
            z: Matrix::zeros(0, 0),
            eigenvalues: vec![],
        });
    }
    let (mut z, mut t) = schur_factors(a)?;

    let scale = t.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    for j in 0..n {
        for i in (j + 2)..n {
            if t[(i, j)].abs() > 1e-10 * scale {
                return Err(Error::SchurFailed);
            }
            t[(i, j)] = 0.0;
        }
    }
    for i in 0..n.saturating_sub(1) {
        let local = t[(i, i)].abs() + t[(i + 1, i + 1)].abs();
        if t[(i + 1, i)].abs() <= f64::EPSILON * local {
            t[(i + 1, i)] = 0.0;
        }
    }
    let mut i = 0;
    while i + 1 < n {
        if t[(i + 1, i)] != 0.0 {
            if i + 2 < n && t[(i + 2, i + 1)] != 0.0 {
                return Err(Error::SchurFailed);
            }
            standardize_block(&mut t, &mut z, i);
            i += if t[(i + 1, i)] != 0.0 { 2 } else { 1 };
        } else {
            i += 1;
        }
    }
    let eigenvalues = block_eigenvalues(&t);
    Ok(SchurForm { t, z, eigenvalues })
}

fn schur_factors(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = a.nrows();
    let iters = 1000 * n.max(10);
    let accurate = |z: &Matrix, t: &Matrix| (z * t * z.transpose() - a).norm() <= 1e-12 * a.norm().max(f64::MIN_POSITIVE);
    for eps in [1.0, 4.0, 16.0] {
        if let Some(s) = Schur::try_new(a.clone(), eps * f64::EPSILON, iters) {
            let (z, t) = s.unpack();
            if accurate(&z, &t) {
                return Ok((z, t));
            }
        }
    }
    // Orthogonal similarities break structure on which the shifted QR stalls.
    let reversal = Matrix::from_fn(n, n, |i, j| if i + j + 1 == n { 1.0 } else { 0.0 });
    let reflectors = (1..=3).map(|k| {
        let v = nalgebra::DVector::from_fn(n, |i, _| ((k * (i + 1)) as f64).sin() + 0.5);
        Matrix::identity(n, n) - &v * v.transpose() * (2.0 / v.norm_squared())
    });
    for q in std::iter::once(reversal).chain(reflectors) {
        if let Some(s) = Schur::try_new(&q * a * &q, 4.0 * f64::EPSILON, iters) {
            let (z, t) = s.unpack();
            let z = &q * z;
            if accurate(&z, &t) {
                return Ok((z, t));
            }
        }
    }
    Err(Error::SchurFailed)
}

/// Schur form whose leading blocks carry every eigenvalue accepted by `select`.
pub fn ordered_real_schur<F>(a: &Matrix, select: F) -> Result<SchurForm>
where
    F: Fn(C64) -> bool,
{
    let mut schur = real_schur(a)?;
    sort_schur_blocks(&mut schur, |l| if select(l) { 0 } else { 1 })?;
    Ok(schur)
}

/// Stable reordering of the diagonal blocks by ascending `key`, using
/// adjacent swaps only.
pub fn sort_schur_blocks<F>(schur: &mut SchurForm, key: F) -> Result<()>
where
    F: Fn(C64) -> usize,
{
    let block_key = |t: &Matrix, (s, k): (usize, usize)| -> usize {
        let l = block_eigs(t, s, k)[0];
        key(l)
    };
    loop {
        let blocks = block_structure(&schur.t);
        let mut swapped = false;
        for w in 0..blocks.len().saturating_sub(1) {
            let (b0, b1) = (blocks[w], blocks[w + 1]);
            if block_key(&schur.t, b0) > block_key(&schur.t, b1) {
                swap_blocks(&mut schur.t, &mut schur.z, b0.0, b0.1, b1.1)?;
                swapped = true;
                break;
            }
        }
        if !swapped {
            break;
        }
    }
    schur.eigenvalues = block_eigenvalues(&schur.t);
    Ok(())
}

pub(crate) fn block_structure(t: &Matrix) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            out.push((i, 2));
            i += 2;
        } else {
            out.push((i, 1));
            i += 1;
        }
    }
    out
}

fn block_eigs(t: &Matrix, s: usize, k: usize) -> Vec<C64> {
    if k == 1 {
        return vec![C64::new(t[(s, s)], 0.0)];
    }
    let (a, b, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
    let mean = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        vec![C64::new(mean + r, 0.0), C64::new(mean - r, 0.0)]
    } else {
        let im = (-disc).sqrt();
        vec![C64::new(mean, im), C64::new(mean, -im)]
    }
}

fn block_eigenvalues(t: &Matrix) -> Vec<C64> {
    block_structure(t)
        .into_iter()
        .flat_map(|(s, k)| block_eigs(t, s, k))
        .collect()
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Standardization of a real 2x2 block. Returns `(a, b, c, d, cs, sn)` with
/// `[[a0,b0],[c0,d0]] = Q [[a,b],[c,d]] Qᵀ`, `Q = [[cs,-sn],[sn,cs]]`.
fn lanv2(a0: f64, b0: f64, c0: f64, d0: f64) -> (f64, f64, f64, f64, f64, f64) {
    let (mut a, mut b, mut c, mut d) = (a0, b0, c0, d0);
    let (mut cs, mut sn);
    let eps = f64::EPSILON;
    if c == 0.0 {
        cs = 1.0;
        sn = 0.0;
    } else if b == 0.0 {
        cs = 0.0;
        sn = 1.0;
        std::mem::swap(&mut a, &mut d);
        b = -c;
        c = 0.0;
    } else if a - d == 0.0 && b.signum() != c.signum() {
        cs = 1.0;
        sn = 0.0;
    } else {
        let temp = a - d;
        let mut p = 0.5 * temp;
        let bcmax = b.abs().max(c.abs());
        let bcmis = b.abs().min(c.abs()) * sign(1.0, b) * sign(1.0, c);
        let scale = p.abs().max(bcmax);
        let mut z = (p / scale) * p + (bcmax / scale) * bcmis;
        if z >= 4.0 * eps {
            z = p + sign(scale.sqrt() * z.sqrt(), p);
            a = d + z;
            d -= (bcmax / z) * bcmis;
            let tau = c.hypot(z);
            cs = z / tau;
            sn = c / tau;
            b -= c;
            c = 0.0;
        } else {
            let sigma = b + c;
            let tau = sigma.hypot(temp);
            cs = (0.5 * (1.0 + sigma.abs() / tau)).sqrt();
            sn = -(p / (tau * cs)) * sign(1.0, sigma);
            let aa = a * cs + b * sn;
            let bb = -a * sn + b * cs;
            let cc = c * cs + d * sn;
            let dd = -c * sn + d * cs;
            a = aa * cs + cc * sn;
            b = bb * cs + dd * sn;
            c = -aa * sn + cc * cs;
            d = -bb * sn + dd * cs;
            let temp = 0.5 * (a + d);
            a = temp;
            d = temp;
            if c != 0.0 {
                if b != 0.0 {
                    if b.signum() == c.signum() {
                        let sab = b.abs().sqrt();
                        let sac = c.abs().sqrt();
                        p = sign(sab * sac, c);
                        let tau = 1.0 / (b + c).abs().sqrt();
                        a = temp + p;
                        d = temp - p;
                        b -= c;
                        c = 0.0;
                        let cs1 = sab * tau;
                        let sn1 = sac * tau;
                        let t2 = cs * cs1 - sn * sn1;
                        sn = cs * sn1 + sn * cs1;
                        cs = t2;
                    }
                } else {
                    b = -c;
                    c = 0.0;
                    let t2 = cs;
                    cs = -sn;
                    sn = t2;
                }
            }
        }
    }
    (a, b, c, d, cs, sn)
}

/// Applies `G = I` with `[[cs,-sn],[sn,cs]]` in rows/cols `i,i+1` as `T <- Gᵀ T G`, `Z <- Z G`.
fn apply_rotation(t: &mut Matrix, z: &mut Matrix, i: usize, cs: f64, sn: f64) {
    let n = t.nrows();
    for j in 0..n {
        let (x, y) = (t[(i, j)], t[(i + 1, j)]);
        t[(i, j)] = cs * x + sn * y;
        t[(i + 1, j)] = -sn * x + cs * y;
    }
    for r in 0..n {
        let (x, y) = (t[(r, i)], t[(r, i + 1)]);
        t[(r, i)] = cs * x + sn * y;
        t[(r, i + 1)] = -sn * x + cs * y;
    }
    for r in 0..z.nrows() {
        let (x, y) = (z[(r, i)], z[(r, i + 1)]);
        z[(r, i)] = cs * x + sn * y;
        z[(r, i + 1)] = -sn * x + cs * y;
    }
}

fn standardize_block(t: &mut Matrix, z: &mut Matrix, i: usize) {
    let (a, b, c, d, cs, sn) = lanv2(t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
    apply_rotation(t, z, i, cs, sn);
    t[(i, i)] = a;
    t[(i, i + 1)] = b;
    t[(i + 1, i)] = c;
    t[(i + 1, i + 1)] = d;
}

/// Swaps the adjacent diagonal blocks of sizes `n1` (at `j1`) and `n2`.
fn swap_blocks(t: &mut Matrix, z: &mut Matrix, j1: usize, n1: usize, n2: usize) -> Result<()> {
    let n = t.nrows();
    let j2 = j1 + 1;
    if n1 == 1 && n2 == 1 {
        let t11 = t[(j1, j1)];
        let t22 = t[(j2, j2)];
        let (f, g) = (t[(j1, j2)], t22 - t11);
        let r = f.hypot(g);
        let (cs, sn) = if r == 0.0 { (1.0, 0.0) } else { (f / r, g / r) };
        for j in (j2 + 1)..n {
            let (x, y) = (t[(j1, j)], t[(j2, j)]);
            t[(j1, j)] = cs * x + sn * y;
            t[(j2, j)] = cs * y - sn * x;
        }
        for r in 0..j1 {
            let (x, y) = (t[(r, j1)], t[(r, j2)]);
            t[(r, j1)] = cs * x + sn * y;
            t[(r, j2)] = cs * y - sn * x;
        }
        t[(j1, j1)] = t22;
        t[(j2, j2)] = t11;
        for r in 0..z.nrows() {
            let (x, y) = (z[(r, j1)], z[(r, j2)]);
            z[(r, j1)] = cs * x + sn * y;
            z[(r, j2)] = cs * y - sn * x;
        }
        return Ok(());
    }

    let m = n1 + n2;
    let d = t.view((j1, j1), (m, m)).clone_owned();
    let t11 = d.view((0, 0), (n1, n1)).clone_owned();
    let t12 = d.view((0, n1), (n1, n2)).clone_owned();
    let t22 = d.view((n1, n1), (n2, n2)).clone_owned();
    // T11 X - X T22 = T12
    let x = small_sylvester(&t11, &(-&t22), &(-&t12)).ok_or(Error::IllConditionedReordering)?;

    let mut basis = Matrix::zeros(m, m);
    basis.view_mut((0, 0), (n1, n2)).copy_from(&(-&x));
    for k in 0..n2 {
        basis[(n1 + k, k)] = 1.0;
    }
    for k in 0..n1 {
        basis[(k, n2 + k)] = 1.0;
    }
    let q = QR::new(basis).q();
    let mut dn = q.transpose() * &d * &q;
    let dnorm = d.norm();
    let lower = dn.view((n2, 0), (n1, n2)).norm();
    if lower > 100.0 * f64::EPSILON * dnorm.max(f64::MIN_POSITIVE) + f64::MIN_POSITIVE {
        return Err(Error::IllConditionedReordering);
    }
    // strong stability check: the swapped window must reproduce the original
    let recon = &q * &dn * q.transpose() - &d;
    if recon.norm() > 1e3 * f64::EPSILON * dnorm.max(f64::MIN_POSITIVE) {
        return Err(Error::IllConditionedReordering);
    }
    dn.view_mut((n2, 0), (n1, n2)).fill(0.0);

    let rest = n - (j1 + m);
    if rest > 0 {
        let right = t.view((j1, j1 + m), (m, rest)).clone_owned();
        t.view_mut((j1, j1 + m), (m, rest)).copy_from(&(q.transpose() * right));
    }
    if j1 > 0 {
        let above = t.view((0, j1), (j1, m)).clone_owned();
        t.view_mut((0, j1), (j1, m)).copy_from(&(above * &q));
    }
    t.view_mut((j1, j1), (m, m)).copy_from(&dn);
    let zc = z.view((0, j1), (z.nrows(), m)).clone_owned();
    z.view_mut((0, j1), (z.nrows(), m)).copy_from(&(zc * &q));

    if n2 == 2 {
        standardize_block(t, z, j1);
    } else if j1 + 1 < n {
        t[(j1 + 1, j1)] = 0.0;
    }
    if n1 == 2 {
        standardize_block(t, z, j1 + n2);
    }
    Ok(())
}

/// Solves `A X + X B + C = 0` for blocks of size at most 2 via the Kronecker form.
fn small_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Option<Matrix> {
    let (r, s) = (a.nrows(), b.nrows());
    let dim = r * s;
    let mut k = Matrix::zeros(dim, dim);
    // column-major vec: index = i + r*j
    for j in 0..s {
        for i in 0..r {
            let row = i + r * j;
            for l in 0..r {
                k[(row, l + r * j)] += a[(i, l)];
            }
            for l in 0..s {
                k[(row, i + r * l)] += b[(l, j)];
            }
        }
    }
    let rhs = DVector::from_iterator(dim, c.iter().map(|v| -v));
    let kn = k.norm();
    let lu = LU::new(k);
    let u = lu.u();
    let pivot_min = (0..dim).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(pivot_min > 1e-14 * kn) {
        return None;
    }
    let sol = lu.solve(&rhs)?;
    Some(Matrix::from_column_slice(r, s, sol.as_slice()))
}

/// Solves `A X + X B + C = 0` by Bartels-Stewart back-substitution.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    check_square(a, "A")?;
    check_square(b, "B")?;
    if c.nrows() != a.nrows() || c.ncols() != b.nrows() {
        return Err(Error::Dimension(format!(
            "C must be {}x{}, got {}x{}",
            a.nrows(),
            b.nrows(),
            c.nrows(),
            c.ncols()
        )));
    }
    check_finite(a, "A")?;
    check_finite(b, "B")?;
    check_finite(c, "C")?;
    let (m, n) = (a.nrows(), b.nrows());
    if m == 0 || n == 0 {
        return Ok(Matrix::zeros(m, n));
    }
    let sa = real_schur(a)?;
    let sb = real_schur(b)?;
    let tol = tol_sep(norm_inf(a).max(norm_inf(b)));
    let gap = sa
        .eigenvalues
        .iter()
        .flat_map(|l| sb.eigenvalues.iter().map(move |m| (l + m).norm()))
        .fold(f64::INFINITY, f64::min);
    if !(gap > tol) {
        return Err(Error::NearSingularSeparation { gap, tolerance: tol });
    }
    let x = sylvester_schur(&sa, &sb, c)?;
    let residual = (a * &x + &x * b + c).norm();
    let tolerance = 1e-9 * c.norm().max(1.0);
    if residual > tolerance {
        return Err(Error::Convergence { residual, tolerance });
    }
    Ok(x)
}

fn sylvester_schur(sa: &SchurForm, sb: &SchurForm, c: &Matrix) -> Result<Matrix> {
    let (ta, tb) = (&sa.t, &sb.t);
    let f = sa.z.transpose() * c * &sb.z;
    let (m, n) = (ta.nrows(), tb.nrows());
    let mut y = Matrix::zeros(m, n);
    let rows = block_structure(ta);
    let cols = block_structure(tb);
    for &(j0, js) in &cols {
        // right-hand side for this column block
        let mut rhs = -f.view((0, j0), (m, js)).clone_owned();
        if j0 > 0 {
            rhs -= y.view((0, 0), (m, j0)) * tb.view((0, j0), (j0, js));
        }
        let tbb = tb.view((j0, j0), (js, js)).clone_owned();
        for &(i0, is) in rows.iter().rev() {
            let mut r = rhs.view((i0, 0), (is, js)).clone_owned();
            let after = i0 + is;
            if after < m {
                r -= ta.view((i0, after), (is, m - after)) * y.view((after, j0), (m - after, js));
            }
            let taa = ta.view((i0, i0), (is, is)).clone_owned();
            // taa Y + Y tbb = r
            let blk = small_sylvester(&taa, &tbb, &(-r)).ok_or(Error::NearSingularSeparation {
                gap: 0.0,
                tolerance: 0.0,
            })?;
            y.view_mut((i0, j0), (is, js)).copy_from(&blk);
        }
    }
    Ok(&sa.z * y * sb.z.transpose())
}

/// Solves `A X + X Aᵀ + Q = 0` for stable `A`.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    check_square(a, "A")?;
    check_square(q, "Q")?;
    if q.nrows() != a.nrows() {
        return Err(Error::Dimension(format!(
            "Q must be {0}x{0}, got {1}x{1}",
            a.nrows(),
            q.nrows()
        )));
    }
    check_finite(a, "A")?;
    check_finite(q, "Q")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let sa = real_schur(a)?;
    let abscissa = sa.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if !(abscissa < -tol_stab(a)) {
        return Err(Error::NotStable { abscissa });
    }
    let sb = real_schur(&a.transpose())?;
    let x = sylvester_schur(&sa, &sb, q)?;
    let x = (&x + x.transpose()) * 0.5;
    let residual = (a * &x + &x * a.transpose() + q).norm();
    let tolerance = 1e-9 * q.norm().max(1.0);
    if residual > tolerance {
        return Err(Error::Convergence { residual, tolerance });
    }
    Ok(x)
}

/// Stabilizing solution of `AᵀP + PA - P B R⁻¹ Bᵀ P + Q = 0`.
pub fn solve_care(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    check_square(a, "A")?;
    check_square(q, "Q")?;
    check_square(r, "R")?;
    let n = a.nrows();
    if b.nrows() != n || q.nrows() != n || r.nrows() != b.ncols() {
        return Err(Error::Dimension("CARE operands are incompatible".into()));
    }
    check_finite(a, "A")?;
    check_finite(b, "B")?;
    check_finite(q, "Q")?;
    check_finite(r, "R")?;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let r_inv = Cholesky::new(r.clone())
        .ok_or(Error::NotPositiveDefinite)?
        .inverse();
    let g = b * r_inv * b.transpose();
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let axis_tol = tol_stab(&h);
    let schur = ordered_real_schur(&h, |l| l.re < 0.0)?;
    if schur.eigenvalues.iter().any(|l| l.re.abs() <= axis_tol) {
        return Err(Error::NoStabilizingSolution);
    }
    let stable = schur.eigenvalues.iter().filter(|l| l.re < 0.0).count();
    if stable != n {
        return Err(Error::NoStabilizingSolution);
    }
    let u11 = schur.z.view((0, 0), (n, n)).clone_owned();
    let u21 = schur.z.view((n, 0), (n, n)).clone_owned();
    let lu = LU::new(u11.transpose());
    let pt = lu.solve(&u21.transpose()).ok_or(Error::NoStabilizingSolution)?;
    let p = (&pt + pt.transpose()) * 0.5;
    check_finite(&p, "P").map_err(|_| Error::NoStabilizingSolution)?;

    let residual = (a.transpose() * &p + &p * a - &p * &g * &p + q).norm();
    let tolerance = 1e-8 * q.norm().max(1.0);
    if residual > tolerance {
        return Err(Error::Convergence { residual, tolerance });
    }
    let closed = a - &g * &p;
    let abscissa = spectral_abscissa(&closed)?;
    if !(abscissa < 0.0) {
        return Err(Error::NoStabilizingSolution);
    }
    Ok(p)
}

/// Block-diagonal concatenation.
pub fn block_diag(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// `[[a, b], [c, d]]` with compatible block shapes.
pub fn block2(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Matrix {
    let (r0, c0) = (a.nrows().max(b.nrows()), a.ncols().max(c.ncols()));
    let (r1, c1) = (c.nrows().max(d.nrows()), b.ncols().max(d.ncols()));
    let mut out = DMatrix::zeros(r0 + r1, c0 + c1);
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, c0), b.shape()).copy_from(b);
    out.view_mut((r0, 0), c.shape()).copy_from(c);
    out.view_mut((r0, c0), d.shape()).copy_from(d);
    out
}

pub fn hstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = Matrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}
