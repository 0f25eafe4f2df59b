//! Additive decompositions of a system: stable plus antistable parts, and a
//! sum of modal blocks. Both use an ordered real Schur form followed by
//! Sylvester decoupling, so every transformation is a similarity.

use crate::error::{Error, Result};
use crate::linalg::{self, ordered_real_schur, solve_sylvester, sort_schur_blocks, SchurForm};
use crate::lti::{add, minimal_realization, StateSpace};
use crate::norms::{frequency_grid, hinf_norm};
use crate::tol::{norm_inf, tol_sep, tol_stab, CANCELLATION_RTOL, CLUSTER_TOL};
use crate::{Matrix, C64};

/// `K = stable + unstable`; the feedthrough is carried by the stable part.
#[derive(Debug, Clone)]
pub struct StableUnstableSplit {
    pub stable: StateSpace,
    pub unstable: StateSpace,
}

impl StableUnstableSplit {
    pub fn recombine(&self) -> StateSpace {
        add(&self.stable, &self.unstable).expect("parts share dimensions")
    }
}

/// Block-diagonalizes the leading `k` states of a Schur-form system against
/// the rest. Returns `(A11, B1, C1)` and `(A22, B2, C2)`.
fn decouple(
    schur: &SchurForm,
    b: &Matrix,
    c: &Matrix,
    k: usize,
) -> Result<((Matrix, Matrix, Matrix), (Matrix, Matrix, Matrix))> {
    let n = schur.t.nrows();
    let t11 = schur.t.view((0, 0), (k, k)).clone_owned();
    let t12 = schur.t.view((0, k), (k, n - k)).clone_owned();
    let t22 = schur.t.view((k, k), (n - k, n - k)).clone_owned();
    let bz = schur.z.transpose() * b;
    let cz = c * &schur.z;
    let b1 = bz.rows(0, k).clone_owned();
    let b2 = bz.rows(k, n - k).clone_owned();
    let c1 = cz.columns(0, k).clone_owned();
    let c2 = cz.columns(k, n - k).clone_owned();
    // T11 X - X T22 + T12 = 0
    let x = solve_sylvester(&t11, &(-&t22), &t12)?;
    let first = (t11, &b1 - &x * &b2, c1.clone());
    let second = (t22, b2, &c1 * &x + c2);
    Ok((first, second))
}

/// Splits `K` into a part with poles in the open left half-plane and a part
/// with poles in the open right half-plane.
pub fn split_stable_unstable(k: &StateSpace) -> Result<StableUnstableSplit> {
    let n = k.order();
    let (m, p) = (k.inputs(), k.outputs());
    let empty = |d: Matrix| StateSpace {
        a: Matrix::zeros(0, 0),
        b: Matrix::zeros(0, m),
        c: Matrix::zeros(p, 0),
        d,
    };
    if n == 0 {
        return Ok(StableUnstableSplit { stable: k.clone(), unstable: empty(Matrix::zeros(p, m)) });
    }
    let tol = tol_stab(&k.a);
    let schur = ordered_real_schur(&k.a, |l| l.re < 0.0)?;
    if let Some(l) = schur.eigenvalues.iter().find(|l| l.re.abs() <= tol) {
        return Err(Error::AxisPole(*l));
    }
    let n1 = schur.eigenvalues.iter().filter(|l| l.re < 0.0).count();
    let to_sys = |(a, b, c): (Matrix, Matrix, Matrix), d: Matrix| StateSpace { a, b, c, d };
    if n1 == n {
        return Ok(StableUnstableSplit { stable: k.clone(), unstable: empty(Matrix::zeros(p, m)) });
    }
    if n1 == 0 {
        let unstable = StateSpace { d: Matrix::zeros(p, m), ..k.clone() };
        return Ok(StableUnstableSplit { stable: empty(k.d.clone()), unstable });
    }
    let (s, u) = decouple(&schur, &k.b, &k.c, n1).map_err(|e| match e {
        Error::NearSingularSeparation { .. } | Error::Convergence { .. } => Error::IllConditionedSplit,
        other => other,
    })?;
    Ok(StableUnstableSplit { stable: to_sys(s, k.d.clone()), unstable: to_sys(u, Matrix::zeros(p, m)) })
}

/// One diagonal block of a modal decomposition.
#[derive(Debug, Clone)]
pub struct ModalBlock {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    /// Representative eigenvalue (upper half-plane member of a conjugate pair).
    pub eigenvalue: C64,
    /// Importance index; `None` for modes on the imaginary axis.
    pub importance: Option<f64>,
}

impl ModalBlock {
    pub fn system(&self) -> StateSpace {
        StateSpace::strictly_proper(self.a.clone(), self.b.clone(), self.c.clone())
            .expect("block dimensions are consistent")
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct ModalDecomposition {
    /// Blocks sorted by ascending real part of the eigenvalue.
    pub blocks: Vec<ModalBlock>,
    pub feedthrough: Matrix,
}

impl ModalDecomposition {
    /// Sum of the selected blocks plus the feedthrough.
    pub fn assemble(&self, keep: &[usize], with_feedthrough: bool) -> StateSpace {
        let p = self.feedthrough.nrows();
        let m = self.feedthrough.ncols();
        let d = if with_feedthrough { self.feedthrough.clone() } else { Matrix::zeros(p, m) };
        let mut sys = StateSpace::gain(d);
        for &i in keep {
            sys = add(&sys, &self.blocks[i].system()).expect("blocks share dimensions");
        }
        sys
    }
}

/// Importance of a mode: its peak gain when stable, and `‖C A⁻¹ B‖₂` when
/// antistable.
pub fn mode_importance(block: &ModalBlock) -> Result<f64> {
    let tol = tol_stab(&block.a);
    let l = block.eigenvalue;
    if l.norm() <= tol {
        return Err(Error::ZeroMode);
    }
    if l.re.abs() <= tol {
        return Err(Error::AxisPole(l));
    }
    if block.c.norm() == 0.0 || block.b.norm() == 0.0 {
        return Ok(0.0);
    }
    if l.re < 0.0 {
        hinf_norm(&block.system())
    } else {
        let a_inv = block.a.clone().try_inverse().ok_or(Error::ZeroMode)?;
        let dc = &block.c * a_inv * &block.b;
        Ok(linalg::max_singular_value(&dc))
    }
}

fn cluster_eigenvalues(eigs: &[C64], cluster_tol: f64) -> Vec<usize> {
    // union-find over eigenvalues, conjugates always merged
    let n = eigs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let next = p[j];
            p[j] = r;
            j = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let close = |a: C64, b: C64| (a - b).norm() <= cluster_tol * (1.0 + a.norm());
            if close(eigs[i], eigs[j]) || close(eigs[i], eigs[j].conj()) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj] = ri;
                }
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

/// Decomposes `K` into real modal blocks, one per eigenvalue cluster.
pub fn modal_form(k: &StateSpace, cluster_tol: f64) -> Result<ModalDecomposition> {
    let n = k.order();
    if n == 0 {
        return Ok(ModalDecomposition { blocks: vec![], feedthrough: k.d.clone() });
    }
    let mut schur = linalg::real_schur(&k.a)?;
    let eigs = schur.eigenvalues.clone();
    let roots = cluster_eigenvalues(&eigs, cluster_tol);

    // cluster representatives, ordered by real part then imaginary part
    let mut reps: Vec<usize> = roots.clone();
    reps.sort();
    reps.dedup();
    let rep_value = |r: usize| -> C64 {
        let members: Vec<C64> = (0..n).filter(|&i| roots[i] == r).map(|i| eigs[i]).collect();
        let re = members.iter().map(|l| l.re).sum::<f64>() / members.len() as f64;
        let im = members.iter().map(|l| l.im.abs()).fold(0.0, f64::max);
        C64::new(re, im)
    };
    let mut order: Vec<(usize, C64)> = reps.iter().map(|&r| (r, rep_value(r))).collect();
    order.sort_by(|x, y| {
        x.1.re
            .partial_cmp(&y.1.re)
            .unwrap()
            .then(x.1.im.partial_cmp(&y.1.im).unwrap())
    });

    let sep = tol_sep(norm_inf(&k.a));
    for i in 0..order.len() {
        for j in (i + 1)..order.len() {
            let (a, b) = (order[i].1, order[j].1);
            if (a - b).norm() <= sep || (a - b.conj()).norm() <= sep {
                return Err(Error::Clustering { a, b });
            }
        }
    }

    let key_of = |l: C64| -> usize {
        let idx = (0..n)
            .min_by(|&i, &j| {
                (eigs[i] - l).norm().partial_cmp(&(eigs[j] - l).norm()).unwrap()
            })
            .unwrap();
        order.iter().position(|(r, _)| *r == roots[idx]).unwrap()
    };
    sort_schur_blocks(&mut schur, key_of)?;

    let mut sizes = vec![0usize; order.len()];
    for l in &schur.eigenvalues {
        sizes[key_of(*l)] += 1;
    }

    let mut b = k.b.clone();
    let mut c = k.c.clone();
    let mut t = schur.t.clone();
    let mut z = schur.z.clone();
    let mut blocks = Vec::with_capacity(order.len());
    for (ci, &(_, value)) in order.iter().enumerate() {
        let size = sizes[ci];
        let rest = t.nrows() - size;
        let (a_i, b_i, c_i) = if rest == 0 {
            let bz = z.transpose() * &b;
            let cz = &c * &z;
            (t.clone(), bz, cz)
        } else {
            let sf = SchurForm { t: t.clone(), z: z.clone(), eigenvalues: vec![] };
            let (first, second) = decouple(&sf, &b, &c, size).map_err(|e| match e {
                Error::NearSingularSeparation { .. } | Error::Convergence { .. } => {
                    Error::Clustering { a: value, b: order[ci + 1].1 }
                }
                other => other,
            })?;
            t = second.0;
            b = second.1;
            c = second.2;
            z = Matrix::identity(rest, rest);
            first
        };
        let mut block = ModalBlock { a: a_i, b: b_i, c: c_i, eigenvalue: value, importance: None };
        block.importance = match mode_importance(&block) {
            Ok(d) => Some(d),
            Err(Error::ZeroMode) | Err(Error::AxisPole(_)) => None,
            Err(e) => return Err(e),
        };
        blocks.push(block);
    }
    Ok(ModalDecomposition { blocks, feedthrough: k.d.clone() })
}

pub fn modal_form_default(k: &StateSpace) -> Result<ModalDecomposition> {
    modal_form(k, CLUSTER_TOL)
}

/// Result of deciding whether a transfer function is stable.
#[derive(Debug, Clone)]
pub enum StabilityDecision {
    /// Stable; carries a stable realization of the same transfer function.
    Stable(StateSpace),
    /// Antistable modes with non-negligible gain remain.
    Unstable { abscissa: f64 },
    /// A pole lies on the imaginary axis.
    AxisPole(C64),
}

/// Decides stability of a transfer function from a possibly non-minimal
/// realization. Uncontrollable and unobservable modes are removed first; an
/// antistable part whose gain is negligible against the whole system is
/// treated as cancelled.
pub fn stable_projection(s: &StateSpace) -> Result<StabilityDecision> {
    let m = minimal_realization(s)?;
    if m.order() == 0 {
        return Ok(StabilityDecision::Stable(m));
    }
    let eigs = linalg::eigenvalues(&m.a)?;
    let tol = tol_stab(&m.a);
    let abscissa = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if abscissa < -tol {
        return Ok(StabilityDecision::Stable(m));
    }
    if let Some(l) = eigs.iter().find(|l| l.re.abs() <= tol) {
        return Ok(StabilityDecision::AxisPole(*l));
    }
    let split = match split_stable_unstable(&m) {
        Ok(s) => s,
        Err(Error::IllConditionedSplit) => return Ok(StabilityDecision::Unstable { abscissa }),
        Err(e) => return Err(e),
    };
    let grid = frequency_grid(&eigs, 200);
    let whole = grid.iter().map(|w| m.gain_at(*w)).fold(0.0, f64::max);
    let an = m.a.norm();
    let structural = if an > 0.0 { m.b.norm() * m.c.norm() / an } else { 0.0 };
    let reference = whole.max(structural);
    let unstable_peak = grid.iter().map(|w| split.unstable.gain_at(*w)).fold(0.0, f64::max);
    if unstable_peak <= CANCELLATION_RTOL * reference {
        Ok(StabilityDecision::Stable(split.stable))
    } else {
        Ok(StabilityDecision::Unstable { abscissa })
    }
}
