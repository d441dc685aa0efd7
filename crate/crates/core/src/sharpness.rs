//! Polyhedral geometry: projections, empirical and exact Hoffman-type
//! sharpness constants, and the homogeneous-system bounds used for the
//! identification and local-rate constants.
//!
//! A [`PolyhedralSystem`] is `Fx = g, F̃x ≤ g̃`; its sharpness α is the
//! largest constant with `α·dist(x, X*) ≤ ‖(Fx − g; [F̃x − g̃]⁺)‖₂` for all x.
//!
//! Everything here is dense and meant for small diagnostic systems.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{
    column_space_basis, dist2, dot, gram_schmidt_rows, nnls, norm2, null_space_basis, orthonormal_completion, pos,
};
use crate::error::{Error, Result};
use crate::model::{GeneralLp, Partition, PrimalDualPoint, StandardLp};
use crate::pdhg::{solve, SolveStatus, SolverConfig};
use crate::sparse::SparseMatrix;

pub const DEFAULT_PROJECTION_TOL: f64 = 1e-9;
pub const DEFAULT_PROJECTION_MAX_ITER: usize = 100_000;
pub const DEFAULT_BRUTE_FORCE_LIMIT: usize = 10;
/// Largest row count handled by exact support enumeration.
pub const MAX_ENUMERATION_ROWS: usize = 12;
/// Largest row count for the three-way sign enumeration.
pub const MAX_PATTERN_ROWS: usize = 10;
/// `t* > STRICT_TOL` puts a row in Q.
pub const STRICT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralSystem {
    pub f: SparseMatrix,
    pub g: Vec<f64>,
    pub f_ineq: SparseMatrix,
    pub g_ineq: Vec<f64>,
}

impl PolyhedralSystem {
    pub fn new(f: SparseMatrix, g: Vec<f64>, f_ineq: SparseMatrix, g_ineq: Vec<f64>) -> Result<Self> {
        if f.n_cols() != f_ineq.n_cols() {
            return Err(Error::DimensionMismatch {
                context: "PolyhedralSystem columns",
                expected: f.n_cols(),
                actual: f_ineq.n_cols(),
            });
        }
        if f.n_rows() != g.len() || f_ineq.n_rows() != g_ineq.len() {
            return Err(Error::DimensionMismatch {
                context: "PolyhedralSystem right-hand side",
                expected: f.n_rows() + f_ineq.n_rows(),
                actual: g.len() + g_ineq.len(),
            });
        }
        if !f.is_finite() || !f_ineq.is_finite() || !g.iter().chain(&g_ineq).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("PolyhedralSystem"));
        }
        Ok(PolyhedralSystem { f, g, f_ineq, g_ineq })
    }

    /// `Fx = 0, F̃x ≤ 0`.
    pub fn homogeneous(f: SparseMatrix, f_ineq: SparseMatrix) -> Result<Self> {
        let (m, k) = (f.n_rows(), f_ineq.n_rows());
        Self::new(f, vec![0.0; m], f_ineq, vec![0.0; k])
    }

    pub fn n(&self) -> usize {
        self.f.n_cols()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.g.iter().chain(&self.g_ineq).all(|&v| v == 0.0)
    }

    /// `‖(Fx − g; [F̃x − g̃]⁺)‖₂`.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        let fx = self.f.matvec(x)?;
        let hx = self.f_ineq.matvec(x)?;
        let eq: f64 = fx.iter().zip(&self.g).map(|(a, b)| (a - b) * (a - b)).sum();
        let ineq: f64 = hx.iter().zip(&self.g_ineq).map(|(a, b)| pos(a - b).powi(2)).sum();
        Ok((eq + ineq).sqrt())
    }

    /// The same system with the inequality rows in `rows` only.
    pub fn with_ineq_rows(&self, rows: &[usize]) -> PolyhedralSystem {
        PolyhedralSystem {
            f: self.f.clone(),
            g: self.g.clone(),
            f_ineq: self.f_ineq.select_rows(rows),
            g_ineq: rows.iter().map(|&i| self.g_ineq[i]).collect(),
        }
    }

    /// Intersection of two systems over the same space.
    pub fn intersect(&self, other: &PolyhedralSystem) -> Result<PolyhedralSystem> {
        PolyhedralSystem::new(
            SparseMatrix::vstack(&[&self.f, &other.f])?,
            self.g.iter().chain(&other.g).copied().collect(),
            SparseMatrix::vstack(&[&self.f_ineq, &other.f_ineq])?,
            self.g_ineq.iter().chain(&other.g_ineq).copied().collect(),
        )
    }
}

fn to_dmatrix(a: &SparseMatrix) -> DMatrix<f64> {
    a.to_nalgebra()
}

/// Euclidean projection onto `{q : Mq = h}`: with an orthonormal row basis
/// Q and `Qt` a particular solution, `q = p − Q(Qᵀp − t)`.
struct AffineProjector {
    q: DMatrix<f64>,
    t: DVector<f64>,
}

impl AffineProjector {
    fn new(m: DMatrix<f64>, h: Vec<f64>) -> Self {
        let rb = gram_schmidt_rows(&m, 1e-12);
        let r = rb.kept.len();
        let mut t = DVector::zeros(r);
        for (j, &i) in rb.kept.iter().enumerate() {
            let partial: f64 = (0..j).map(|l| rb.coef[(i, l)] * t[l]).sum();
            t[j] = (h[i] - partial) / rb.coef[(i, j)];
        }
        AffineProjector { q: rb.q, t }
    }

    fn project(&self, p: &[f64]) -> Vec<f64> {
        if self.q.ncols() == 0 {
            return p.to_vec();
        }
        let pv = DVector::from_column_slice(p);
        let coords = self.q.transpose() * &pv - &self.t;
        (pv - &self.q * coords).as_slice().to_vec()
    }
}

struct Halfspace {
    row: Vec<f64>,
    rhs: f64,
    norm_sq: f64,
}

/// Euclidean projection of `p` onto `{Fx = g, F̃x ≤ g̃}`.
///
/// Runs Dykstra's alternating projections (affine set, then each halfspace
/// in order) and periodically tries to finish exactly: the rows that are
/// tight or carry a correction are taken as the active set, `p` is
/// projected onto that affine set, and the candidate is accepted when it is
/// feasible and `p − q` lies in the cone spanned by the active normals
/// (checked with nonnegative least squares).
pub fn project_polyhedron(p: &[f64], sys: &PolyhedralSystem, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = sys.n();
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            context: "project_polyhedron",
            expected: n,
            actual: p.len(),
        });
    }
    let f = to_dmatrix(&sys.f);
    let fi = to_dmatrix(&sys.f_ineq);
    let affine = AffineProjector::new(f.clone(), sys.g.clone());
    let halfspaces: Vec<Halfspace> = (0..fi.nrows())
        .map(|i| {
            let row: Vec<f64> = fi.row(i).iter().copied().collect();
            let norm_sq = dot(&row, &row);
            Halfspace {
                row,
                rhs: sys.g_ineq[i],
                norm_sq,
            }
        })
        .collect();
    let scale = 1.0 + norm2(p);
    let abs_tol = tol * scale;

    let start = affine.project(p);
    let eq_res = norm2(&sys.f.matvec(&start)?.iter().zip(&sys.g).map(|(a, b)| a - b).collect::<Vec<_>>());
    if eq_res > 1e-8 * scale {
        return Err(Error::Projection {
            iterations: 0,
            residual: eq_res,
            change: 0.0,
        });
    }
    if halfspaces.iter().all(|h| dot(&h.row, &start) <= h.rhs) {
        return Ok(start);
    }
    if let Some(q) = project_least_distance(p, &affine, &fi, &sys.g_ineq) {
        if sys.residual(&q)? <= abs_tol {
            return Ok(q);
        }
    }

    let mut x = start;
    let mut corrections = vec![vec![0.0; n]; halfspaces.len()];
    let mut next_polish = 8;
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iter {
        let prev = x.clone();
        x = affine.project(&x);
        for (h, e) in halfspaces.iter().zip(corrections.iter_mut()) {
            let y: Vec<f64> = x.iter().zip(e.iter()).map(|(a, b)| a + b).collect();
            let viol = dot(&h.row, &y) - h.rhs;
            x = if viol > 0.0 && h.norm_sq > 0.0 {
                y.iter().zip(&h.row).map(|(v, r)| v - viol / h.norm_sq * r).collect()
            } else {
                y.clone()
            };
            for k in 0..n {
                e[k] = y[k] - x[k];
            }
        }
        last_change = dist2(&x, &prev);
        let converged = last_change <= abs_tol && sys.residual(&x)? <= abs_tol;
        if it == next_polish || converged {
            next_polish *= 2;
            if let Some(q) = polish(p, &x, &corrections, sys, &f, &fi, &halfspaces, abs_tol) {
                return Ok(q);
            }
            if converged {
                return Ok(x);
            }
        }
    }
    Err(Error::Projection {
        iterations: max_iter,
        residual: sys.residual(&x)?,
        change: last_change,
    })
}

/// Exact projection through least-distance programming. In coordinates
/// `x = x₀ + Nw` of the affine set (`N` orthonormal), the projection is
/// `w_p + v` with `v` the shortest vector satisfying `−Gv ≥ Gw_p − h` for
/// `G = F̃N`, `h = g̃ − F̃x₀`; that vector comes from one NNLS solve on
/// `(−G | Gw_p − h)ᵀ` against the last unit vector. `None` when the
/// inequalities look infeasible.
fn project_least_distance(p: &[f64], affine: &AffineProjector, fi: &DMatrix<f64>, g_ineq: &[f64]) -> Option<Vec<f64>> {
    let n = p.len();
    let x0 = &affine.q * &affine.t;
    let null = orthonormal_completion(&affine.q);
    let d = null.ncols();
    let pv = DVector::from_column_slice(p);
    let wp = null.transpose() * (&pv - &x0);
    let g = fi * &null;
    let h = DVector::from_column_slice(g_ineq) - fi * &x0;
    let rhs = &g * &wp - h;
    let k = rhs.len();
    // rescale so the right-hand side has unit norm; v scales with it
    let gamma = rhs.norm();
    if gamma == 0.0 || k == 0 {
        return Some((x0 + &null * wp).as_slice().to_vec());
    }
    let mut e = DMatrix::zeros(d + 1, k);
    for i in 0..k {
        for j in 0..d {
            e[(j, i)] = -g[(i, j)];
        }
        e[(d, i)] = rhs[i] / gamma;
    }
    let mut target = DVector::zeros(d + 1);
    target[d] = 1.0;
    let (u, _) = nnls(&e, &target);
    let r = &e * u - target;
    if r[d].abs() <= 1e-12 {
        return None;
    }
    let v = DVector::from_iterator(d, (0..d).map(|j| -r[j] / r[d] * gamma));
    let x = x0 + &null * (wp + v);
    debug_assert_eq!(x.len(), n);
    Some(x.as_slice().to_vec())
}

#[allow(clippy::too_many_arguments)]
fn polish(
    p: &[f64],
    x: &[f64],
    corrections: &[Vec<f64>],
    sys: &PolyhedralSystem,
    f: &DMatrix<f64>,
    fi: &DMatrix<f64>,
    halfspaces: &[Halfspace],
    abs_tol: f64,
) -> Option<Vec<f64>> {
    let n = p.len();
    let active: Vec<usize> = (0..halfspaces.len())
        .filter(|&i| {
            let h = &halfspaces[i];
            let slack = h.rhs - dot(&h.row, x);
            slack <= 1e-7 * (1.0 + h.norm_sq.sqrt() * (1.0 + norm2(x))) || norm2(&corrections[i]) > 0.0
        })
        .collect();
    let rows_f = f.nrows();
    let mut m = DMatrix::zeros(rows_f + active.len(), n);
    let mut h = Vec::with_capacity(rows_f + active.len());
    for i in 0..rows_f {
        m.set_row(i, &f.row(i));
        h.push(sys.g[i]);
    }
    for (k, &i) in active.iter().enumerate() {
        m.set_row(rows_f + k, &fi.row(i));
        h.push(sys.g_ineq[i]);
    }
    let proj = AffineProjector::new(m.clone(), h);
    let q = proj.project(p);
    let feas_tol = 1e-12 * (1.0 + norm2(&q)) + 1e-3 * abs_tol;
    if sys.residual(&q).ok()? > feas_tol.max(1e-14) * (1.0 + fi.norm()) {
        return None;
    }
    // p − q = Fᵀμ + F̃_Wᵀλ with λ ≥ 0; μ free is split into two signs
    let d = DVector::from_iterator(n, p.iter().zip(&q).map(|(a, b)| a - b));
    if d.norm() == 0.0 {
        return Some(q);
    }
    let cols = 2 * rows_f + active.len();
    let mut a = DMatrix::zeros(n, cols);
    for i in 0..rows_f {
        a.set_column(i, &f.row(i).transpose());
        a.set_column(rows_f + i, &(-f.row(i).transpose()));
    }
    for (k, &i) in active.iter().enumerate() {
        a.set_column(2 * rows_f + k, &fi.row(i).transpose());
    }
    let (_, res) = nnls(&a, &d);
    (res <= 1e-9 * d.norm().max(abs_tol)).then_some(q)
}

pub fn distance_to_polyhedron(p: &[f64], sys: &PolyhedralSystem) -> Result<f64> {
    let q = project_polyhedron(p, sys, 1e-10, DEFAULT_PROJECTION_MAX_ITER)?;
    Ok(dist2(p, &q))
}

/// `min` over infeasible probes of `residual(p) / dist(p, X*)`: an upper
/// bound on the sharpness constant.
pub fn empirical_sharpness(sys: &PolyhedralSystem, probes: &[Vec<f64>]) -> Result<f64> {
    let mut best = f64::INFINITY;
    let mut any = false;
    for p in probes {
        let res = sys.residual(p)?;
        if res <= 1e-12 * (1.0 + norm2(p)) {
            continue;
        }
        let d = distance_to_polyhedron(p, sys)?;
        if d <= 0.0 {
            continue;
        }
        any = true;
        best = best.min(res / d);
    }
    if any {
        Ok(best)
    } else {
        Err(Error::NoInfeasibleProbe)
    }
}

/// For every subset `S` of the columns of `cols` (bit `i` ↔ column `i`),
/// `min ‖[cols_S, free]·(v; w)‖` over `v ≥ 0` supported on S and free `w`
/// with `‖(v, w)‖ = 1`, taken over minimizers that are strictly positive on
/// S (`+∞` if the smallest singular vector changes sign on S).
fn support_minima(cols: &DMatrix<f64>, free: &DMatrix<f64>) -> Vec<f64> {
    let mt = cols.ncols();
    let n = cols.nrows();
    let r = free.ncols();
    let mut out = vec![f64::INFINITY; 1 << mt];
    for (mask, slot) in out.iter_mut().enumerate() {
        let idx: Vec<usize> = (0..mt).filter(|i| mask >> i & 1 == 1).collect();
        let k = idx.len() + r;
        if k == 0 {
            continue;
        }
        let rows = n.max(k);
        let mut g = DMatrix::zeros(rows, k);
        for (c, &i) in idx.iter().enumerate() {
            g.view_mut((0, c), (n, 1)).copy_from(&cols.column(i));
        }
        for c in 0..r {
            g.view_mut((0, idx.len() + c), (n, 1)).copy_from(&free.column(c));
        }
        let svd = g.svd(false, true);
        let v_t = svd.v_t.expect("v_t requested");
        let (pos_min, smin) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        let vec: Vec<f64> = v_t.row(pos_min).iter().copied().collect();
        let sign_ok = |sgn: f64| vec[..idx.len()].iter().all(|&v| sgn * v > -1e-12);
        if idx.is_empty() || sign_ok(1.0) || sign_ok(-1.0) {
            *slot = smin;
        }
    }
    out
}

/// For every mask J: `min_{S ⊆ J} values[S]`.
fn subset_minimum(values: &[f64], bits: usize) -> Vec<f64> {
    let mut out = values.to_vec();
    for b in 0..bits {
        for mask in 0..out.len() {
            if mask >> b & 1 == 1 {
                out[mask] = out[mask].min(out[mask ^ (1 << b)]);
            }
        }
    }
    out
}

/// Hoffman constant of `(F, F̃)` by enumerating active sets J:
/// `α = min_{J∈S} min{‖F̃_Jᵀv + Fᵀz‖ : v ≥ 0, z ∈ range(F), ‖(v, z)‖ = 1}`.
///
/// J belongs to S exactly when no nonzero `(v ≥ 0, z)` has
/// `F̃_Jᵀv + Fᵀz = 0`, i.e. when the inner minimum is positive, so
/// membership is decided by that minimum exceeding a round-off threshold.
/// The constant holds for every right-hand side, so it is a lower bound on
/// the sharpness of the system at its own `(g, g̃)`, with equality in simple
/// cases. Returns `+∞` for a system without constraints.
pub fn hoffman_brute_force(sys: &PolyhedralSystem, dim_limit: usize) -> Result<f64> {
    let size = sys.n() + sys.f.n_rows() + sys.f_ineq.n_rows();
    if size > dim_limit || sys.f_ineq.n_rows() > MAX_ENUMERATION_ROWS + 4 {
        return Err(Error::TooLarge {
            size,
            limit: dim_limit,
        });
    }
    Ok(hoffman_enumerate(sys))
}

fn hoffman_enumerate(sys: &PolyhedralSystem) -> f64 {
    let f = to_dmatrix(&sys.f);
    let fi = to_dmatrix(&sys.f_ineq);
    // z = U w over an orthonormal basis U of range(F) ⊂ R^{rows(F)}
    let u = column_space_basis(&f, 1e-12);
    let free = f.transpose() * u;
    let minima = support_minima(&fi.transpose(), &free);
    let sigma = subset_minimum(&minima, fi.nrows());
    let scale = f.norm() + fi.norm();
    let threshold = 1e-12 * scale.max(1.0);
    sigma
        .iter()
        .copied()
        .filter(|&s| s > threshold && s.is_finite())
        .fold(f64::INFINITY, f64::min)
}

/// `min_{w ≥ 0, ‖w‖ = 1} ‖Mᵀw‖` by support enumeration, or a multi-start
/// projected-gradient estimate (never smaller than the true minimum) when
/// M has more than [`MAX_ENUMERATION_ROWS`] rows. The flag is true for the
/// exact branch.
pub fn gordan_minimum(m: &SparseMatrix, seed: u64) -> (f64, bool) {
    let rows = m.n_rows();
    if rows == 0 {
        return (f64::INFINITY, true);
    }
    let md = to_dmatrix(m);
    if rows <= MAX_ENUMERATION_ROWS {
        let minima = support_minima(&md.transpose(), &DMatrix::zeros(md.ncols(), 0));
        return (minima.iter().copied().fold(f64::INFINITY, f64::min), true);
    }
    let gram = &md * md.transpose();
    let step = 1.0 / gram.norm().max(1e-300);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..64 {
        let mut w = DVector::from_fn(rows, |_, _| rng.random::<f64>());
        w /= w.norm();
        for _ in 0..2000 {
            let grad = &gram * &w;
            w = (&w - grad * step).map(|v| v.max(0.0));
            let nw = w.norm();
            if nw == 0.0 {
                break;
            }
            w /= nw;
        }
        if w.norm() > 0.0 {
            best = best.min((md.transpose() * &w).norm());
        }
    }
    (best, false)
}

/// Splits the inequality rows of `Fv = 0, F̃v ≤ 0` into implicit equalities
/// P and rows Q that can be made strictly negative.
///
/// Row i goes to Q iff `max{t : Fv = 0, F̃v ≤ 0, F̃_i v + t ≤ 0, ‖v‖_∞ ≤ 1}`
/// exceeds [`STRICT_TOL`]; each of these problems is solved with PDHG.
pub fn homogeneous_partition(f: &SparseMatrix, f_ineq: &SparseMatrix) -> Result<(Vec<usize>, Vec<usize>)> {
    let k = f_ineq.n_rows();
    let (mut p, mut q) = (Vec::new(), Vec::new());
    for i in 0..k {
        let t = strict_margin(f, f_ineq, i)?;
        if t > STRICT_TOL {
            q.push(i);
        } else {
            p.push(i);
        }
    }
    Ok((p, q))
}

fn strict_margin(f: &SparseMatrix, f_ineq: &SparseMatrix, row: usize) -> Result<f64> {
    let n = f.n_cols();
    let k = f_ineq.n_rows();
    // variables (v⁺, v⁻, t), all nonnegative
    let split = |a: &SparseMatrix, extra: &[(usize, f64)]| -> Result<Vec<(usize, usize, f64)>> {
        let mut t = Vec::new();
        for (i, j, v) in a.triplets() {
            t.push((i, j, v));
            t.push((i, n + j, -v));
        }
        for &(i, v) in extra {
            t.push((i, 2 * n, v));
        }
        Ok(t)
    };
    let a_eq = SparseMatrix::from_triplets(f.n_rows(), 2 * n + 1, &split(f, &[])?)?;
    let mut t_ineq = split(f_ineq, &[])?;
    for (_, j, v) in f_ineq.triplets().into_iter().filter(|(i, _, _)| *i == row) {
        t_ineq.push((k, j, v));
        t_ineq.push((k, n + j, -v));
    }
    t_ineq.push((k, 2 * n, 1.0));
    for j in 0..2 * n {
        t_ineq.push((k + 1 + j, j, 1.0));
    }
    let m_ineq = k + 1 + 2 * n;
    let mut b_ineq = vec![0.0; m_ineq];
    b_ineq[k + 1..].iter_mut().for_each(|v| *v = 1.0);
    let mut c = vec![0.0; 2 * n + 1];
    c[2 * n] = -1.0;
    let gl = GeneralLp::new(
        a_eq,
        vec![0.0; f.n_rows()],
        SparseMatrix::from_triplets(m_ineq, 2 * n + 1, &t_ineq)?,
        b_ineq,
        c,
    )?;
    let cfg = SolverConfig {
        kkt_tol: 1e-9,
        max_iters: 2_000_000,
        log_every: 50,
        precondition: true,
        ..Default::default()
    };
    let res = solve(&gl, &cfg)?;
    if res.status != SolveStatus::OptimalTol {
        return Err(Error::Solver(format!(
            "strictness problem for row {row} ended with {}",
            res.status.as_str()
        )));
    }
    Ok(res.z_final.x[2 * n])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha0Bounds {
    pub alpha0_l_lower: f64,
    pub alpha0_l_certified: bool,
    pub alpha0_k_lower: f64,
    pub alpha0_k_certified: bool,
}

/// Sharpness of `Fv = 0, F̃v ≤ 0` when its solution set is the subspace
/// `L = null([F; F̃])` (every row of F̃ an implicit equality):
/// `min ‖(Fx; [F̃x]⁺)‖` over unit x in L⊥.
///
/// Each row is guessed positive, zero or negative; on the subspace where
/// the zero rows vanish the objective is a quadratic form whose smallest
/// eigenvector is kept if it has the guessed signs. A minimizer is an
/// eigenvector of this kind for its own sign pattern, so the minimum over
/// accepted patterns is the sharpness. With a repeated smallest eigenvalue
/// the whole eigenspace is tested against the sign pattern.
pub fn subspace_sharpness(f: &SparseMatrix, f_ineq: &SparseMatrix) -> Result<f64> {
    let k = f_ineq.n_rows();
    if k > MAX_PATTERN_ROWS {
        return Err(Error::TooLarge {
            size: k,
            limit: MAX_PATTERN_ROWS,
        });
    }
    let fd = to_dmatrix(f);
    let fi = to_dmatrix(f_ineq);
    let stacked = to_dmatrix(&SparseMatrix::vstack(&[f, f_ineq])?);
    // orthonormal basis of L⊥, the row space of [F; F̃]
    let perp = column_space_basis(&stacked.transpose(), 1e-12);
    if perp.ncols() == 0 {
        return Ok(f64::INFINITY);
    }
    let scale = stacked.norm().max(1.0);
    let mut best = f64::INFINITY;
    let mut pattern = vec![0u8; k];
    let total = 3usize.pow(k as u32);
    for code in 0..total {
        let mut c = code;
        for p in pattern.iter_mut() {
            *p = (c % 3) as u8;
            c /= 3;
        }
        // 0: negative, 1: zero, 2: positive
        let zero: Vec<usize> = (0..k).filter(|&i| pattern[i] == 1).collect();
        let positive: Vec<usize> = (0..k).filter(|&i| pattern[i] == 2).collect();
        let basis = if zero.is_empty() {
            perp.clone()
        } else {
            let t = fi.select_rows(&zero) * &perp;
            let null = null_space_basis(&t, 1e-12);
            &perp * null
        };
        let d = basis.ncols();
        if d == 0 {
            continue;
        }
        let mut m = DMatrix::zeros(fd.nrows() + positive.len(), fd.ncols());
        for i in 0..fd.nrows() {
            m.set_row(i, &fd.row(i));
        }
        for (r, &i) in positive.iter().enumerate() {
            m.set_row(fd.nrows() + r, &fi.row(i));
        }
        let mb = &m * &basis;
        let rows = mb.nrows().max(d);
        let mut padded = DMatrix::zeros(rows, d);
        padded.view_mut((0, 0), (mb.nrows(), d)).copy_from(&mb);
        let svd = padded.svd(false, true);
        let v_t = svd.v_t.expect("v_t requested");
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let smin = svd.singular_values[order[0]];
        if smin >= best {
            continue;
        }
        // eigenspace of the smallest value, as columns in R^n
        let cluster: Vec<usize> = order
            .iter()
            .copied()
            .take_while(|&i| svd.singular_values[i] - smin <= 1e-9 * scale)
            .collect();
        let mut space = DMatrix::zeros(fd.ncols(), cluster.len());
        for (c, &i) in cluster.iter().enumerate() {
            space.set_column(c, &(&basis * v_t.row(i).transpose()));
        }
        // sign rows as `row·x ≤ 0` restricted to the eigenspace
        let mut cone = DMatrix::zeros(k - zero.len(), cluster.len());
        let mut r = 0;
        for i in 0..k {
            let flip = match pattern[i] {
                0 => 1.0,
                2 => -1.0,
                _ => continue,
            };
            cone.set_row(r, &(fi.row(i) * &space * flip));
            r += 1;
        }
        if cone_has_nonzero_point(&cone, scale) {
            best = smin;
        }
    }
    Ok(best)
}

/// Whether `{y : Cy ≤ 0}` contains a nonzero point. By Stiemke's theorem
/// it does unless C has trivial null space and `Cᵀw = 0` for some `w > 0`;
/// the latter is tested as `min_{u ≥ 0} ‖Cᵀ(1 + u)‖ = 0`.
fn cone_has_nonzero_point(c: &DMatrix<f64>, scale: f64) -> bool {
    let dim = c.ncols();
    if c.nrows() == 0 || crate::dense::rank(c, 1e-12) < dim {
        return true;
    }
    let ct = c.transpose();
    let rhs = -(&ct * DVector::from_element(c.nrows(), 1.0));
    let (_, res) = nnls(&ct, &rhs);
    res > 1e-10 * scale * (c.nrows() as f64).sqrt()
}

/// Lower bounds on the sharpness of `L = {Fv = 0, F̃_P v = 0}` and
/// `K = {F̃_Q v ≤ 0}`.
///
/// α₀(K) is bounded by `min_{w≥0,‖w‖=1} ‖F̃_Qᵀw‖`. For L the system
/// `Fv = 0, F̃_P v ≤ 0` already has solution set L (the rows of P are
/// implicit equalities), and its sharpness is computed exactly by
/// [`subspace_sharpness`] when P is small enough; otherwise a probe
/// estimate is returned flagged as uncertified.
pub fn alpha0_bounds(f: &SparseMatrix, f_ineq: &SparseMatrix, p: &[usize], q: &[usize], seed: u64) -> Result<Alpha0Bounds> {
    let (k_val, k_cert) = gordan_minimum(&f_ineq.select_rows(q), seed);
    let f_p = f_ineq.select_rows(p);
    let (l_val, l_cert) = match subspace_sharpness(f, &f_p) {
        Ok(v) => (v, true),
        Err(Error::TooLarge { .. }) => {
            let l_sys = PolyhedralSystem::homogeneous(f.clone(), f_p)?;
            let probes = sample_probes(l_sys.n(), 200, seed);
            (empirical_sharpness(&l_sys, &probes).unwrap_or(f64::INFINITY), false)
        }
        Err(e) => return Err(e),
    };
    Ok(Alpha0Bounds {
        alpha0_l_lower: l_val,
        alpha0_l_certified: l_cert,
        alpha0_k_lower: k_val,
        alpha0_k_certified: k_cert,
    })
}

fn sample_probes(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

/// `max{dist(u, L), dist(u, K)} / dist(u, L ∩ K)`, or `None` for u in L ∩ K.
pub fn angle_ratio(u: &[f64], l: &PolyhedralSystem, k: &PolyhedralSystem) -> Result<Option<f64>> {
    let both = l.intersect(k)?;
    let d_both = distance_to_polyhedron(u, &both)?;
    if d_both <= 1e-12 * (1.0 + norm2(u)) {
        return Ok(None);
    }
    let d_l = distance_to_polyhedron(u, l)?;
    let d_k = distance_to_polyhedron(u, k)?;
    Ok(Some(d_l.max(d_k) / d_both))
}

/// Sampled estimate of `α(L, K) = inf_{u ∉ L∩K} max{dist(u,L), dist(u,K)}/dist(u, L∩K)`.
/// Probes are Gaussian points plus their projections onto L and onto K
/// (which land on the parts of L outside K and vice versa). The result is
/// an upper estimate of the infimum.
pub fn angle_estimate(l: &PolyhedralSystem, k: &PolyhedralSystem, samples: usize, seed: u64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for u in sample_probes(l.n(), samples, seed) {
        let pl = project_polyhedron(&u, l, 1e-10, DEFAULT_PROJECTION_MAX_ITER)?;
        let pk = project_polyhedron(&u, k, 1e-10, DEFAULT_PROJECTION_MAX_ITER)?;
        for probe in [u, pl, pk] {
            if let Some(r) = angle_ratio(&probe, l, k)? {
                best = best.min(r);
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::NoInfeasibleProbe)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousSharpnessReport {
    pub p: Vec<usize>,
    pub q: Vec<usize>,
    pub alpha0_k_lower: f64,
    pub alpha0_k_certified: bool,
    pub alpha0_l_lower: f64,
    pub alpha0_l_certified: bool,
    pub angle_lower_estimate: f64,
    /// True only when the angle is known exactly (L ⊆ K or K ⊆ L trivially).
    pub angle_certified: bool,
    /// `angle · min{α₀(L), α₀(K)}`.
    pub alpha_lower: f64,
    /// `min{α₀(L), probe estimate of α}`.
    pub alpha_upper: f64,
}

impl HomogeneousSharpnessReport {
    pub fn alpha_lower_certified(&self) -> bool {
        self.alpha0_k_certified && self.alpha0_l_certified && self.angle_certified
    }

    pub fn to_kv_text(&self, prefix: &str) -> String {
        let mut out = String::new();
        let fmt_set = |s: &[usize]| s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        writeln!(out, "{prefix}P: [{}]", fmt_set(&self.p)).unwrap();
        writeln!(out, "{prefix}Q: [{}]", fmt_set(&self.q)).unwrap();
        writeln!(out, "{prefix}alpha0_K_lower: {:e} certified: {}", self.alpha0_k_lower, self.alpha0_k_certified).unwrap();
        writeln!(out, "{prefix}alpha0_L_lower: {:e} certified: {}", self.alpha0_l_lower, self.alpha0_l_certified).unwrap();
        writeln!(out, "{prefix}angle_lower_estimate: {:e} certified: {}", self.angle_lower_estimate, self.angle_certified).unwrap();
        writeln!(out, "{prefix}alpha_lower: {:e} certified: {}", self.alpha_lower, self.alpha_lower_certified()).unwrap();
        writeln!(out, "{prefix}alpha_upper: {:e}", self.alpha_upper).unwrap();
        out
    }
}

/// Full homogeneous analysis of `Fv = 0, F̃v ≤ 0`.
pub fn homogeneous_report(sys: &PolyhedralSystem, samples: usize, seed: u64) -> Result<HomogeneousSharpnessReport> {
    if !sys.is_homogeneous() {
        return Err(Error::InvalidArgument("homogeneous_report needs a homogeneous system".into()));
    }
    let (p, q) = homogeneous_partition(&sys.f, &sys.f_ineq)?;
    let b = alpha0_bounds(&sys.f, &sys.f_ineq, &p, &q, seed)?;
    let n = sys.n();
    let l = PolyhedralSystem::homogeneous(
        SparseMatrix::vstack(&[&sys.f, &sys.f_ineq.select_rows(&p)])?,
        SparseMatrix::zeros(0, n),
    )?;
    let k = PolyhedralSystem::homogeneous(SparseMatrix::zeros(0, n), sys.f_ineq.select_rows(&q))?;
    let l_is_everything = l.f.nnz() == 0;
    let (angle, angle_certified) = if q.is_empty() || l_is_everything {
        (1.0, true)
    } else {
        match angle_estimate(&l, &k, samples, seed) {
            Ok(a) => (a.min(1.0), false),
            Err(Error::NoInfeasibleProbe) => (1.0, false),
            Err(e) => return Err(e),
        }
    };
    let alpha0_min = b.alpha0_l_lower.min(b.alpha0_k_lower);
    let probes = sample_probes(n, samples.max(20), seed ^ 0x5eed);
    let emp = match empirical_sharpness(sys, &probes) {
        Ok(v) => v,
        Err(Error::NoInfeasibleProbe) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let l_exact = if b.alpha0_l_certified { b.alpha0_l_lower } else { f64::INFINITY };
    let alpha_upper = emp.min(l_exact);
    Ok(HomogeneousSharpnessReport {
        p,
        q,
        alpha0_k_lower: b.alpha0_k_lower,
        alpha0_k_certified: b.alpha0_k_certified,
        alpha0_l_lower: b.alpha0_l_lower,
        alpha0_l_certified: b.alpha0_l_certified,
        angle_lower_estimate: angle,
        angle_certified,
        alpha_lower: angle * alpha0_min,
        alpha_upper,
    })
}

fn column_of(a: &SparseMatrix, j: usize) -> Vec<(usize, f64)> {
    a.triplets().into_iter().filter(|t| t.1 == j).map(|(i, _, v)| (i, v)).collect()
}

/// The homogeneous system in `(u, v) ∈ Rⁿ × Rᵐ`:
/// `Au = 0; A_Bᵀv ≤ 0; −u_{N∪B₂} ≤ 0; (cᵀu − bᵀv)/R ≤ 0`.
pub fn build_system_31(lp: &StandardLp, part: &Partition, r: f64) -> Result<PolyhedralSystem> {
    let (n, m) = (lp.n(), lp.m());
    let f = SparseMatrix::hstack(&[&lp.a, &SparseMatrix::zeros(m, m)])?;
    let mut t = Vec::new();
    let mut row = 0;
    for &i in &part.basic() {
        for (k, v) in column_of(&lp.a, i) {
            t.push((row, n + k, v));
        }
        row += 1;
    }
    for &i in &part.sign_constrained() {
        t.push((row, i, -1.0));
        row += 1;
    }
    for (j, &cj) in lp.c.iter().enumerate() {
        t.push((row, j, cj / r));
    }
    for (k, &bk) in lp.b.iter().enumerate() {
        t.push((row, n + k, -bk / r));
    }
    row += 1;
    PolyhedralSystem::homogeneous(f, SparseMatrix::from_triplets(row, n + m, &t)?)
}

/// The homogeneous system in `(u_B, v)`:
/// `A_B u_B = 0; A_Bᵀv ≤ 0; −u_{B₂} ≤ 0; (c_Bᵀu_B − bᵀv)/R₂ ≤ 0`.
pub fn build_system_44(lp: &StandardLp, part: &Partition, r2: f64) -> Result<PolyhedralSystem> {
    let m = lp.m();
    let basic = part.basic();
    let nb = basic.len();
    let a_b = lp.a.select_columns(&basic);
    let f = SparseMatrix::hstack(&[&a_b, &SparseMatrix::zeros(m, m)])?;
    let mut t = Vec::new();
    let mut row = 0;
    for &i in &basic {
        for (k, v) in column_of(&lp.a, i) {
            t.push((row, nb + k, v));
        }
        row += 1;
    }
    for &i in &part.basic_degenerate {
        let pos_b = basic.iter().position(|&b| b == i).expect("B₂ ⊆ B");
        t.push((row, pos_b, -1.0));
        row += 1;
    }
    for (pos_b, &i) in basic.iter().enumerate() {
        t.push((row, pos_b, lp.c[i] / r2));
    }
    for (k, &bk) in lp.b.iter().enumerate() {
        t.push((row, nb + k, -bk / r2));
    }
    row += 1;
    PolyhedralSystem::homogeneous(f, SparseMatrix::from_triplets(row, nb + m, &t)?)
}

/// The (non-homogeneous) system whose solution set is `z* + K`:
/// `Ax = b; A_Bᵀy ≤ c_B; −x_{N∪B₂} ≤ 0; (cᵀx − bᵀy)/R ≤ 0`.
pub fn build_active_system(lp: &StandardLp, part: &Partition, r: f64) -> Result<PolyhedralSystem> {
    let hom = build_system_31(lp, part, r)?;
    let basic = part.basic();
    let mut g_ineq = vec![0.0; hom.f_ineq.n_rows()];
    for (k, &i) in basic.iter().enumerate() {
        g_ineq[k] = lp.c[i];
    }
    PolyhedralSystem::new(hom.f, lp.b.clone(), hom.f_ineq, g_ineq)
}

/// The KKT system `Ax = b; Aᵀy ≤ c; −x ≤ 0; (cᵀx − bᵀy)/R ≤ 0` in `(x, y)`,
/// whose solution set is the optimal set.
pub fn build_kkt_system(lp: &StandardLp, r: f64) -> Result<PolyhedralSystem> {
    let (n, m) = (lp.n(), lp.m());
    let f = SparseMatrix::hstack(&[&lp.a, &SparseMatrix::zeros(m, m)])?;
    let mut t = Vec::new();
    for j in 0..n {
        for (k, v) in column_of(&lp.a, j) {
            t.push((j, n + k, v));
        }
        t.push((n + j, j, -1.0));
    }
    for (j, &cj) in lp.c.iter().enumerate() {
        t.push((2 * n, j, cj / r));
    }
    for (k, &bk) in lp.b.iter().enumerate() {
        t.push((2 * n, n + k, -bk / r));
    }
    let mut g_ineq = lp.c.clone();
    g_ineq.extend(std::iter::repeat_n(0.0, n + 1));
    PolyhedralSystem::new(f, lp.b.clone(), SparseMatrix::from_triplets(2 * n + 1, n + m, &t)?, g_ineq)
}

/// Concatenates `(x, y)` into a point of the `(x, y)` space used above.
pub fn stack_point(z: &PrimalDualPoint) -> Vec<f64> {
    z.concat()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::appendix_b;
    use crate::model::partition;
    use proptest::prelude::*;
    use rand::Rng;

    fn sys(f: &[Vec<f64>], g: &[f64], fi: &[Vec<f64>], gi: &[f64], n: usize) -> PolyhedralSystem {
        PolyhedralSystem::new(
            SparseMatrix::from_dense(n, f).unwrap(),
            g.to_vec(),
            SparseMatrix::from_dense(n, fi).unwrap(),
            gi.to_vec(),
        )
        .unwrap()
    }

    fn simplex_line() -> PolyhedralSystem {
        sys(&[vec![1.0, 1.0]], &[1.0], &[vec![-1.0, 0.0], vec![0.0, -1.0]], &[0.0, 0.0], 2)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        dist2(a, b) <= tol
    }

    #[test]
    fn project_feasible_point_is_fixed() {
        let s = simplex_line();
        let q = project_polyhedron(&[0.3, 0.7], &s, 1e-9, 1000).unwrap();
        assert!(close(&q, &[0.3, 0.7], 1e-14));
    }

    #[test]
    fn project_onto_halfspace() {
        let s = sys(&[], &[], &[vec![1.0, 0.0]], &[0.0], 2);
        let q = project_polyhedron(&[1.0, 1.0], &s, 1e-9, 1000).unwrap();
        assert!(close(&q, &[0.0, 1.0], 1e-14));
    }

    #[test]
    fn project_onto_simplex_line() {
        let s = simplex_line();
        let q = project_polyhedron(&[2.0, 2.0], &s, 1e-9, 1000).unwrap();
        assert!(close(&q, &[0.5, 0.5], 1e-12), "{q:?}");
        // corner case: the projection sits on a vertex
        let q = project_polyhedron(&[3.0, -1.0], &s, 1e-9, 1000).unwrap();
        assert!(close(&q, &[1.0, 0.0], 1e-12), "{q:?}");
    }

    #[test]
    fn project_reports_infeasible_equalities() {
        let s = sys(&[vec![1.0], vec![1.0]], &[0.0, 1.0], &[], &[], 1);
        assert!(matches!(project_polyhedron(&[0.0], &s, 1e-9, 100), Err(Error::Projection { .. })));
    }

    #[test]
    fn project_reports_empty_polyhedron() {
        let s = sys(&[], &[], &[vec![1.0], vec![-1.0]], &[-1.0, -1.0], 1);
        assert!(project_polyhedron(&[0.0], &s, 1e-9, 200).is_err());
    }

    #[test]
    fn empirical_one_dimensional() {
        let s = sys(&[], &[], &[vec![1.0]], &[0.0], 1);
        assert!((empirical_sharpness(&s, &[vec![1.0]]).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(empirical_sharpness(&s, &[vec![-1.0]]), Err(Error::NoInfeasibleProbe)));
    }

    #[test]
    fn empirical_lemma_b1_probe() {
        let kappa = 1e-3;
        let lp = appendix_b(kappa).unwrap();
        let kkt = build_kkt_system(&lp, 10.0).unwrap();
        let zeta = 1.0;
        let probe = vec![1.0, 0.0, 0.0, (1.0 + kappa) / kappa + zeta, 1.0];
        let ratio = empirical_sharpness(&kkt, &[probe]).unwrap();
        assert!(ratio <= kappa + 1e-12, "ratio {ratio:e}");
    }

    #[test]
    fn hoffman_hand_systems() {
        let two_sided = sys(&[], &[], &[vec![1.0], vec![-1.0]], &[1.0, 1.0], 1);
        assert!((hoffman_brute_force(&two_sided, 10).unwrap() - 1.0).abs() < 1e-9);
        let eq = sys(&[vec![1.0, 0.0]], &[0.0], &[], &[], 2);
        assert!((hoffman_brute_force(&eq, 10).unwrap() - 1.0).abs() < 1e-9);
        let scaled = sys(&[], &[], &[vec![2.0]], &[2.0], 1);
        assert!((hoffman_brute_force(&scaled, 10).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn hoffman_simplex_line() {
        // J = {x₁ ≥ 0}: min over the unit sphere of ‖(z − v, z)‖ with v ≥ 0 is
        // the smallest eigenvalue of [[1, −1], [−1, 2]], i.e. ((3 − √5)/2)^½;
        // J = ∅ gives √2 and J = both rows is not in S
        let a = hoffman_brute_force(&simplex_line(), 10).unwrap();
        let expected = (5f64.sqrt() - 1.0) / 2.0;
        assert!((a - expected).abs() < 1e-9, "{a} vs {expected}");
    }

    #[test]
    fn hoffman_guard() {
        let big = sys(&[], &[], &vec![vec![1.0; 6]; 6], &[0.0; 6], 6);
        assert!(matches!(hoffman_brute_force(&big, 10), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn partition_trivial_cases() {
        let neg_id = SparseMatrix::from_dense(2, &[vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let (p, q) = homogeneous_partition(&SparseMatrix::zeros(0, 2), &neg_id).unwrap();
        assert!(p.is_empty());
        assert_eq!(q, vec![0, 1]);
        let both = SparseMatrix::from_dense(2, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let (p, q) = homogeneous_partition(&SparseMatrix::zeros(0, 2), &both).unwrap();
        assert_eq!(p, vec![0, 1, 2, 3]);
        assert!(q.is_empty());
    }

    #[test]
    fn subspace_sharpness_cases() {
        // v = 0 from ±v₁ ≤ 0 in 1-D: residual is |v|
        let fi = SparseMatrix::from_dense(1, &[vec![1.0], vec![-1.0]]).unwrap();
        assert!((subspace_sharpness(&SparseMatrix::zeros(0, 1), &fi).unwrap() - 1.0).abs() < 1e-12);
        // scaling one side only: 2v ≤ 0, −v ≤ 0 gives min(2, 1)
        let fi = SparseMatrix::from_dense(1, &[vec![2.0], vec![-1.0]]).unwrap();
        assert!((subspace_sharpness(&SparseMatrix::zeros(0, 1), &fi).unwrap() - 1.0).abs() < 1e-12);
        // v₁ + v₂ ≤ 0, −v₁ ≤ 0, −v₂ ≤ 0 in 2-D: worst direction is (1, −1)/√2
        // with residual 1/√2 from one sign row, against (1, 1)/√2 with √2
        let fi = SparseMatrix::from_dense(2, &[vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let a = subspace_sharpness(&SparseMatrix::zeros(0, 2), &fi).unwrap();
        let probes: Vec<Vec<f64>> = (0..720)
            .map(|i| {
                let t = i as f64 * std::f64::consts::PI / 360.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let s = PolyhedralSystem::homogeneous(SparseMatrix::zeros(0, 2), fi).unwrap();
        let emp = empirical_sharpness(&s, &probes).unwrap();
        assert!(a <= emp + 1e-12 && emp - a < 1e-4, "{a} vs {emp}");
        // an equality row only
        let f = SparseMatrix::from_dense(2, &[vec![3.0, 4.0]]).unwrap();
        assert!((subspace_sharpness(&f, &SparseMatrix::zeros(0, 2)).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn gordan_examples() {
        let (v, exact) = gordan_minimum(&SparseMatrix::identity(3), 0);
        assert!(exact && (v - 1.0).abs() < 1e-12);
        let (v, _) = gordan_minimum(&SparseMatrix::diagonal(&[2.0, 3.0]), 0);
        assert!((v - 2.0).abs() < 1e-12);
        // opposite rows admit w with zero combination
        let (v, _) = gordan_minimum(&SparseMatrix::from_dense(1, &[vec![1.0], vec![-1.0]]).unwrap(), 0);
        assert!(v < 1e-12);
    }

    #[test]
    fn angle_examples() {
        let l = sys(&[vec![0.0, 1.0]], &[0.0], &[], &[], 2);
        let k = sys(&[], &[], &[vec![-1.0, 1.0]], &[0.0], 2);
        // u = (−1, 0): on L, 1/√2 from K, 1 from the ray L ∩ K
        let r = angle_ratio(&[-1.0, 0.0], &l, &k).unwrap().unwrap();
        assert!((r - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(angle_ratio(&[2.0, 0.0], &l, &k).unwrap(), None);

        let est = angle_estimate(&l, &l, 20, 1).unwrap();
        assert!((est - 1.0).abs() < 1e-9);

        let k_perp = sys(&[vec![1.0, 0.0]], &[0.0], &[], &[], 2);
        let est = angle_estimate(&l, &k_perp, 50, 2).unwrap();
        assert!(est >= 1.0 / 2f64.sqrt() - 1e-9, "{est}");
    }

    fn appendix_b_setup(kappa: f64) -> (StandardLp, Partition, PrimalDualPoint) {
        let lp = appendix_b(kappa).unwrap();
        let z = PrimalDualPoint::new(vec![1.0, 0.0, 0.0], vec![4.0, 1.0]);
        let part = partition(&lp, &z, 1e-9);
        (lp, part, z)
    }

    #[test]
    fn system_31_structure() {
        let (lp, part, _) = appendix_b_setup(1e-2);
        assert_eq!(part.basic(), vec![0]);
        let s = build_system_31(&lp, &part, 10.0).unwrap();
        assert_eq!(s.n(), 5);
        assert_eq!(s.f.n_rows(), 2);
        // A₁ᵀv ≤ 0, two sign rows for N, the gap row
        assert_eq!(s.f_ineq.n_rows(), 4);
        let a1: Vec<f64> = (0..2).map(|k| lp.a.get(k, 0)).collect();
        assert_eq!((0..2).map(|k| s.f_ineq.get(0, 3 + k)).collect::<Vec<_>>(), a1);
        assert_eq!(s.residual(&[0.0; 5]).unwrap(), 0.0);
    }

    #[test]
    fn system_44_structure() {
        let (lp, part, _) = appendix_b_setup(1e-2);
        let s = build_system_44(&lp, &part, 5.0).unwrap();
        assert_eq!(s.n(), 1 + 2);
        assert!(part.basic_degenerate.is_empty());
        assert_eq!(s.f_ineq.n_rows(), 1 + 1);
        assert_eq!(s.residual(&[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn active_system_is_shifted_cone() {
        let (lp, part, z) = appendix_b_setup(1e-2);
        let r = 12.0;
        let active = build_active_system(&lp, &part, r).unwrap();
        let cone = build_system_31(&lp, &part, r).unwrap();
        let zs = z.concat();
        assert!(active.residual(&zs).unwrap() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let p: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let shifted: Vec<f64> = p.iter().zip(&zs).map(|(a, b)| a - b).collect();
            let d1 = distance_to_polyhedron(&p, &active).unwrap();
            let d2 = distance_to_polyhedron(&shifted, &cone).unwrap();
            assert!((d1 - d2).abs() < 1e-8, "{d1} vs {d2}");
        }
    }

    #[test]
    fn report_on_appendix_b_systems() {
        let (lp, part, z) = appendix_b_setup(1e-10);
        let z0 = PrimalDualPoint::new(vec![0.0; 3], vec![4.0, 0.0]);
        let r = 2.0 * (z0.distance(&z) + z.norm()) + 1.0;
        let rep = homogeneous_report(&build_system_31(&lp, &part, r).unwrap(), 20, 0).unwrap();
        assert!(rep.q.is_empty());
        assert!(rep.alpha_lower_certified());
        assert!(rep.alpha_lower >= 0.004, "{rep:?}");
        assert!(rep.alpha_lower <= rep.alpha_upper);
        // u = (1, κ, 1) leaves L with only the gap row violated, by (1 + κ)/R;
        // the exact minimum trades a little of Au against it
        let kappa: f64 = 1e-10;
        let along = (1.0 + kappa) / (r * (2.0 + kappa * kappa).sqrt());
        assert!(rep.alpha0_l_lower <= along + 1e-12 && rep.alpha0_l_lower >= 0.99 * along, "{rep:?}");
        let text = rep.to_kv_text("");
        assert!(text.contains("alpha_lower:") && text.contains("certified: true"));
    }

    #[test]
    fn report_rejects_inhomogeneous() {
        assert!(homogeneous_report(&simplex_line(), 5, 0).is_err());
    }

    #[test]
    fn report_with_strict_rows() {
        // v₁ ≤ 0, v₂ ≤ 0 together with −v₁ ≤ 0: P = {0, 2}, Q = {1}
        let fi = SparseMatrix::from_dense(2, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let s = PolyhedralSystem::homogeneous(SparseMatrix::zeros(0, 2), fi).unwrap();
        let rep = homogeneous_report(&s, 30, 4).unwrap();
        assert_eq!(rep.p, vec![0, 2]);
        assert_eq!(rep.q, vec![1]);
        assert!(!rep.angle_certified);
        assert!((rep.alpha0_k_lower - 1.0).abs() < 1e-12);
        assert!((rep.alpha0_l_lower - 1.0).abs() < 1e-9);
        assert!(rep.alpha_lower <= rep.alpha_upper + 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn projection_is_obtuse(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 3;
            let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            // the origin is strictly feasible so the polyhedron is nonempty
            let rhs: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..1.0)).collect();
            let s = sys(&[], &[], &rows, &rhs, n);
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            let q = project_polyhedron(&p, &s, 1e-9, 100_000).unwrap();
            prop_assert!(s.residual(&q).unwrap() <= 1e-9);
            let d: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
            for _ in 0..100 {
                let w: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
                if s.residual(&w).unwrap() > 0.0 {
                    continue;
                }
                let wq: Vec<f64> = w.iter().zip(&q).map(|(a, b)| a - b).collect();
                prop_assert!(dot(&d, &wq) <= 1e-9 * norm2(&d).max(1.0));
            }
        }

        #[test]
        fn empirical_dominates_brute_force(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let rhs: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
            let s = sys(&[], &[], &rows, &rhs, 2);
            let exact = hoffman_brute_force(&s, 10).unwrap();
            let probes: Vec<Vec<f64>> = (0..20).map(|_| (0..2).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
            if let Ok(emp) = empirical_sharpness(&s, &probes) {
                prop_assert!(emp >= exact - 1e-8, "{emp} < {exact}");
            }
        }
    }
}
