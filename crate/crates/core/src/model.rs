//! LP representations, the optimality partition `(N, B₁, B₂)`, the
//! non-degeneracy metric δ and the KKT residual.

use nalgebra::{DMatrix, DVector};

use crate::dense::{dist2, dot, nnls, norm2, pos};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Default tolerance for classifying a quantity as zero when partitioning.
pub const DEFAULT_PARTITION_TOL: f64 = 1e-6;

/// `min cᵀx  s.t.  Ax = b, x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardLp {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// `min cᵀx  s.t.  A_E x = b_E, A_I x ≤ b_I, x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralLp {
    pub a_eq: SparseMatrix,
    pub b_eq: Vec<f64>,
    pub a_ineq: SparseMatrix,
    pub b_ineq: Vec<f64>,
    pub c: Vec<f64>,
}

/// A primal-dual pair `z = (x, y)`. For general-form problems `y` stacks the
/// equality multipliers first and the inequality multipliers (`y_I ≤ 0` at
/// feasibility) after them.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}

impl StandardLp {
    pub fn new(a: SparseMatrix, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        check_len("StandardLp b", a.n_rows(), b.len())?;
        check_len("StandardLp c", a.n_cols(), c.len())?;
        if !a.is_finite() {
            return Err(Error::NonFinite("StandardLp A"));
        }
        check_finite(&b, "StandardLp b")?;
        check_finite(&c, "StandardLp c")?;
        Ok(StandardLp { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.n_cols()
    }

    pub fn m(&self) -> usize {
        self.a.n_rows()
    }

    pub fn to_general(&self) -> GeneralLp {
        GeneralLp {
            a_eq: self.a.clone(),
            b_eq: self.b.clone(),
            a_ineq: SparseMatrix::zeros(0, self.n()),
            b_ineq: Vec::new(),
            c: self.c.clone(),
        }
    }

    /// Reduced costs `c − Aᵀy`.
    pub fn reduced_costs(&self, y: &[f64]) -> Vec<f64> {
        let aty = self.a.matvec_transpose(y).expect("dual length checked by caller");
        self.c.iter().zip(&aty).map(|(c, v)| c - v).collect()
    }

    pub fn kkt_residual(&self, z: &PrimalDualPoint) -> f64 {
        kkt_parts(&self.a, &self.b, None, &[], &self.c, z)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }
}

impl GeneralLp {
    pub fn new(
        a_eq: SparseMatrix,
        b_eq: Vec<f64>,
        a_ineq: SparseMatrix,
        b_ineq: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self> {
        check_len("GeneralLp b_eq", a_eq.n_rows(), b_eq.len())?;
        check_len("GeneralLp b_ineq", a_ineq.n_rows(), b_ineq.len())?;
        check_len("GeneralLp A_E columns", c.len(), a_eq.n_cols())?;
        check_len("GeneralLp A_I columns", c.len(), a_ineq.n_cols())?;
        if !a_eq.is_finite() || !a_ineq.is_finite() {
            return Err(Error::NonFinite("GeneralLp matrix"));
        }
        check_finite(&b_eq, "GeneralLp b_eq")?;
        check_finite(&b_ineq, "GeneralLp b_ineq")?;
        check_finite(&c, "GeneralLp c")?;
        Ok(GeneralLp {
            a_eq,
            b_eq,
            a_ineq,
            b_ineq,
            c,
        })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m_eq(&self) -> usize {
        self.b_eq.len()
    }

    pub fn m_ineq(&self) -> usize {
        self.b_ineq.len()
    }

    pub fn m(&self) -> usize {
        self.m_eq() + self.m_ineq()
    }

    /// `A = (A_E; A_I)`.
    pub fn stacked_matrix(&self) -> SparseMatrix {
        SparseMatrix::vstack(&[&self.a_eq, &self.a_ineq]).expect("column counts validated")
    }

    /// `b = (b_E; b_I)`.
    pub fn stacked_rhs(&self) -> Vec<f64> {
        self.b_eq.iter().chain(&self.b_ineq).copied().collect()
    }

    /// The equality-only view of a problem without inequality rows.
    pub fn as_standard(&self) -> Option<StandardLp> {
        (self.m_ineq() == 0).then(|| StandardLp {
            a: self.a_eq.clone(),
            b: self.b_eq.clone(),
            c: self.c.clone(),
        })
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    /// Whether `y_I ≤ 0` holds for the inequality multipliers of `z`.
    pub fn dual_sign_feasible(&self, z: &PrimalDualPoint) -> bool {
        z.y[self.m_eq()..].iter().all(|&v| v <= 0.0)
    }

    /// KKT residual of the general form: the Euclidean norm of
    /// `(A_E x − b_E; [A_I x − b_I]⁺; [−x]⁺; [Aᵀy − c]⁺; [y_I]⁺; [cᵀx − bᵀy]⁺)`.
    pub fn kkt_residual(&self, z: &PrimalDualPoint) -> f64 {
        kkt_parts(&self.a_eq, &self.b_eq, Some(&self.a_ineq), &self.b_ineq, &self.c, z)
    }
}

fn kkt_parts(
    a_eq: &SparseMatrix,
    b_eq: &[f64],
    a_ineq: Option<&SparseMatrix>,
    b_ineq: &[f64],
    c: &[f64],
    z: &PrimalDualPoint,
) -> f64 {
    let m_eq = b_eq.len();
    let (y_eq, y_ineq) = z.y.split_at(m_eq);
    let mut sq = 0.0;

    let ax = a_eq.matvec(&z.x).expect("primal length");
    sq += ax.iter().zip(b_eq).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let mut aty = a_eq.matvec_transpose(y_eq).expect("dual length");
    if let Some(ai) = a_ineq {
        let aix = ai.matvec(&z.x).expect("primal length");
        sq += aix.iter().zip(b_ineq).map(|(a, b)| pos(a - b).powi(2)).sum::<f64>();
        let t = ai.matvec_transpose(y_ineq).expect("dual length");
        aty.iter_mut().zip(&t).for_each(|(s, v)| *s += v);
    }
    sq += z.x.iter().map(|&v| pos(-v).powi(2)).sum::<f64>();
    sq += aty.iter().zip(c).map(|(a, c)| pos(a - c).powi(2)).sum::<f64>();
    sq += y_ineq.iter().map(|&v| pos(v).powi(2)).sum::<f64>();
    let gap = dot(c, &z.x) - dot(b_eq, y_eq) - dot(b_ineq, y_ineq);
    sq += pos(gap).powi(2);
    sq.sqrt()
}

impl PrimalDualPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        PrimalDualPoint { x, y }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        PrimalDualPoint {
            x: vec![0.0; n],
            y: vec![0.0; m],
        }
    }

    /// `(x, y)` as one vector.
    pub fn concat(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn from_concat(v: &[f64], n: usize) -> Self {
        PrimalDualPoint {
            x: v[..n].to_vec(),
            y: v[n..].to_vec(),
        }
    }

    pub fn norm(&self) -> f64 {
        (dot(&self.x, &self.x) + dot(&self.y, &self.y)).sqrt()
    }

    pub fn distance(&self, other: &PrimalDualPoint) -> f64 {
        let dx = dist2(&self.x, &other.x);
        let dy = dist2(&self.y, &other.y);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }
}

/// Maps between a general-form problem and its slack reformulation
/// `(A_E 0; A_I I)(x; s) = b`, `(x, s) ≥ 0`, `c' = (c; 0)`.
///
/// Multipliers carry over unchanged: the slack columns turn the standard-form
/// dual constraint into `y_I ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableMap {
    pub n: usize,
    pub m_eq: usize,
    pub m_ineq: usize,
}

impl VariableMap {
    /// Standard-form point → original point (slacks dropped).
    pub fn to_original(&self, z: &PrimalDualPoint) -> PrimalDualPoint {
        PrimalDualPoint {
            x: z.x[..self.n].to_vec(),
            y: z.y.clone(),
        }
    }

    /// Original point → standard-form point, with slacks `b_I − A_I x`.
    pub fn to_standard(&self, gl: &GeneralLp, z: &PrimalDualPoint) -> PrimalDualPoint {
        let aix = gl.a_ineq.matvec(&z.x).expect("primal length");
        let mut x = z.x.clone();
        x.extend(gl.b_ineq.iter().zip(&aix).map(|(b, a)| b - a));
        PrimalDualPoint { x, y: z.y.clone() }
    }
}

/// Slack-variable reformulation of a general-form LP.
pub fn to_standard(gl: &GeneralLp) -> (StandardLp, VariableMap) {
    let n = gl.n();
    let (m_eq, m_ineq) = (gl.m_eq(), gl.m_ineq());
    let top = gl.a_eq.with_extra_columns(m_ineq);
    let slack_triplets: Vec<_> = gl
        .a_ineq
        .triplets()
        .into_iter()
        .chain((0..m_ineq).map(|i| (i, n + i, 1.0)))
        .collect();
    let bottom = SparseMatrix::from_triplets(m_ineq, n + m_ineq, &slack_triplets).expect("indices in range");
    let a = SparseMatrix::vstack(&[&top, &bottom]).expect("matching columns");
    let mut c = gl.c.clone();
    c.extend(std::iter::repeat_n(0.0, m_ineq));
    let lp = StandardLp {
        a,
        b: gl.stacked_rhs(),
        c,
    };
    (lp, VariableMap { n, m_eq, m_ineq })
}

/// Index sets over the inequality rows of a general-form problem:
/// slack rows, tight rows with strictly negative multiplier, and the rest.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DualPartition {
    pub nonbasic: Vec<usize>,
    pub basic_nondegenerate: Vec<usize>,
    pub basic_degenerate: Vec<usize>,
}

/// The partition `(N, B₁, B₂)` of the primal coordinates at an optimum.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Partition {
    /// `N`: strictly positive reduced cost.
    pub nonbasic: Vec<usize>,
    /// `B₁`: zero reduced cost, strictly positive value.
    pub basic_nondegenerate: Vec<usize>,
    /// `B₂`: zero reduced cost, zero value.
    pub basic_degenerate: Vec<usize>,
    /// Present for general-form problems with inequality rows.
    pub dual: Option<DualPartition>,
}

impl Partition {
    pub fn n(&self) -> usize {
        self.nonbasic.len() + self.basic_nondegenerate.len() + self.basic_degenerate.len()
    }

    /// `B = B₁ ∪ B₂`, sorted.
    pub fn basic(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self
            .basic_nondegenerate
            .iter()
            .chain(&self.basic_degenerate)
            .copied()
            .collect();
        b.sort_unstable();
        b
    }

    /// `N ∪ B₂`, sorted.
    pub fn sign_constrained(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.nonbasic.iter().chain(&self.basic_degenerate).copied().collect();
        s.sort_unstable();
        s
    }

    pub fn is_valid(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in self.nonbasic.iter().chain(&self.basic_nondegenerate).chain(&self.basic_degenerate) {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

fn classify_primal(reduced: &[f64], x: &[f64], tol: f64, a_norm: f64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let (mut n, mut b1, mut b2) = (Vec::new(), Vec::new(), Vec::new());
    for (i, (&r, &xi)) in reduced.iter().zip(x).enumerate() {
        if r > tol * a_norm {
            n.push(i);
        } else if xi > tol {
            b1.push(i);
        } else {
            b2.push(i);
        }
    }
    (n, b1, b2)
}

/// Partition of a standard-form problem at `z_star`.
///
/// `i ∈ N` iff `c_i − A_iᵀy* > tol·‖A‖₂`; of the rest, `i ∈ B₁` iff `x*_i > tol`.
pub fn partition(lp: &StandardLp, z_star: &PrimalDualPoint, tol: f64) -> Partition {
    partition_with_norm(lp, z_star, tol, lp.a.spectral_norm())
}

pub fn partition_with_norm(lp: &StandardLp, z_star: &PrimalDualPoint, tol: f64, a_norm: f64) -> Partition {
    let reduced = lp.reduced_costs(&z_star.y);
    let (nonbasic, basic_nondegenerate, basic_degenerate) = classify_primal(&reduced, &z_star.x, tol, a_norm);
    Partition {
        nonbasic,
        basic_nondegenerate,
        basic_degenerate,
        dual: None,
    }
}

/// Partition of a general-form problem: primal sets from reduced costs of the
/// stacked matrix, dual sets over the inequality rows from slacks `b_I − A_I x*`
/// and multipliers `y*_I`.
pub fn partition_general(gl: &GeneralLp, z_star: &PrimalDualPoint, tol: f64, a_norm: f64) -> Partition {
    let a = gl.stacked_matrix();
    let aty = a.matvec_transpose(&z_star.y).expect("dual length");
    let reduced: Vec<f64> = gl.c.iter().zip(&aty).map(|(c, v)| c - v).collect();
    let (nonbasic, basic_nondegenerate, basic_degenerate) = classify_primal(&reduced, &z_star.x, tol, a_norm);
    let dual = (gl.m_ineq() > 0).then(|| {
        let aix = gl.a_ineq.matvec(&z_star.x).expect("primal length");
        let y_ineq = &z_star.y[gl.m_eq()..];
        let mut d = DualPartition::default();
        for j in 0..gl.m_ineq() {
            let slack = gl.b_ineq[j] - aix[j];
            if slack > tol * a_norm {
                d.nonbasic.push(j);
            } else if -y_ineq[j] > tol {
                d.basic_nondegenerate.push(j);
            } else {
                d.basic_degenerate.push(j);
            }
        }
        d
    });
    Partition {
        nonbasic,
        basic_nondegenerate,
        basic_degenerate,
        dual,
    }
}

/// Which term of δ attains the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaTerm {
    /// `(c_i − A_iᵀy*) / ‖A‖₂` for `i ∈ N`.
    ReducedCost,
    /// `x*_i` for `i ∈ B₁`.
    PrimalSlack,
    /// `(b − Ax*)_j / ‖A‖₂` for inequality row `j ∈ N^D`.
    DualSlackRow,
    /// `−y*_j` for inequality row `j ∈ B₁^D`.
    DualValue,
}

impl DeltaTerm {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeltaTerm::ReducedCost => "reduced_cost",
            DeltaTerm::PrimalSlack => "primal_slack",
            DeltaTerm::DualSlackRow => "dual_slack_row",
            DeltaTerm::DualValue => "dual_value",
        }
    }
}

/// The non-degeneracy metric δ with its provenance. `argmin` is `None` (and
/// `value` is `+∞`) when every contributing set is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaMetric {
    pub value: f64,
    pub argmin: Option<(DeltaTerm, usize)>,
}

impl DeltaMetric {
    fn empty() -> Self {
        DeltaMetric {
            value: f64::INFINITY,
            argmin: None,
        }
    }

    fn offer(&mut self, value: f64, term: DeltaTerm, index: usize) {
        if value < self.value {
            self.value = value;
            self.argmin = Some((term, index));
        }
    }
}

/// δ for a standard-form problem: `min{ min_N (c_i − A_iᵀy*)/‖A‖₂, min_{B₁} x*_i }`.
pub fn delta_metric(lp: &StandardLp, z_star: &PrimalDualPoint, part: &Partition, a_norm: f64) -> DeltaMetric {
    let reduced = lp.reduced_costs(&z_star.y);
    let mut d = DeltaMetric::empty();
    for &i in &part.nonbasic {
        d.offer(reduced[i] / a_norm, DeltaTerm::ReducedCost, i);
    }
    for &i in &part.basic_nondegenerate {
        d.offer(z_star.x[i], DeltaTerm::PrimalSlack, i);
    }
    d
}

/// δ for a general-form problem, using all four terms.
pub fn delta_metric_general(gl: &GeneralLp, z_star: &PrimalDualPoint, part: &Partition, a_norm: f64) -> DeltaMetric {
    let a = gl.stacked_matrix();
    let aty = a.matvec_transpose(&z_star.y).expect("dual length");
    let mut d = DeltaMetric::empty();
    for &i in &part.nonbasic {
        d.offer((gl.c[i] - aty[i]) / a_norm, DeltaTerm::ReducedCost, i);
    }
    for &i in &part.basic_nondegenerate {
        d.offer(z_star.x[i], DeltaTerm::PrimalSlack, i);
    }
    if let Some(dual) = &part.dual {
        let aix = gl.a_ineq.matvec(&z_star.x).expect("primal length");
        for &j in &dual.nonbasic {
            d.offer((gl.b_ineq[j] - aix[j]) / a_norm, DeltaTerm::DualSlackRow, j);
        }
        for &j in &dual.basic_nondegenerate {
            d.offer(-z_star.y[gl.m_eq() + j], DeltaTerm::DualValue, j);
        }
    }
    d
}

/// `R = 2(‖z⁰ − z*‖₂ + ‖z*‖₂) + 1`, the radius used by the identification bound.
pub fn identification_radius(z0: &PrimalDualPoint, z_star: &PrimalDualPoint) -> f64 {
    2.0 * (z0.distance(z_star) + z_star.norm()) + 1.0
}

/// Norm used for `dist(0, F(z))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubdifferentialMetric {
    L2,
    PsInverse,
}

/// Minimum-norm element of `F(z) = (c − Aᵀy + ∂ι_{x≥0}(x); Ax − b)` in the
/// Euclidean sense. Coordinates with `x_i > 0` keep the reduced cost; at
/// `x_i = 0` the normal cone absorbs any positive part.
pub fn subdifferential_min_norm_element(lp: &StandardLp, z: &PrimalDualPoint) -> Vec<f64> {
    let reduced = lp.reduced_costs(&z.y);
    let ax = lp.a.matvec(&z.x).expect("primal length");
    let primal = reduced
        .iter()
        .zip(&z.x)
        .map(|(&r, &x)| if x > 0.0 { r } else { r.min(0.0) });
    let dual = lp.b.iter().zip(&ax).map(|(b, a)| a - b);
    primal.chain(dual).collect()
}

/// `dist(0, F(z))` measured in the Euclidean norm, or `‖g‖_{P_s⁻¹}` of the
/// Euclidean minimum-norm selection `g` (an upper bound on the exact
/// `P_s⁻¹` distance).
pub fn subdifferential_distance(
    lp: &StandardLp,
    z: &PrimalDualPoint,
    s: f64,
    metric: SubdifferentialMetric,
) -> Result<f64> {
    let a_norm = lp.a.spectral_norm();
    if !(s > 0.0) || s * a_norm >= 1.0 {
        return Err(Error::StepTooLarge { step: s });
    }
    let x_clamped: Vec<f64> = z.x.iter().map(|&v| v.max(0.0)).collect();
    let zc = PrimalDualPoint::new(x_clamped, z.y.clone());
    let g = subdifferential_min_norm_element(lp, &zc);
    match metric {
        SubdifferentialMetric::L2 => Ok(norm2(&g)),
        SubdifferentialMetric::PsInverse => crate::pdhg::ps_inverse_norm(&lp.a, s, &g),
    }
}

/// Largest `n + m` accepted by [`subdifferential_distance_ps_inverse_exact`].
pub const EXACT_PS_INVERSE_LIMIT: usize = 400;

/// Exact `dist_{P_s⁻¹}(0, F(z))` for small problems: with `P_s = LLᵀ`, the
/// normal-cone freedom at `x_i = 0` makes this a nonnegative least-squares
/// problem in `L⁻¹`-coordinates. Dense, so limited to
/// [`EXACT_PS_INVERSE_LIMIT`] unknowns.
pub fn subdifferential_distance_ps_inverse_exact(lp: &StandardLp, z: &PrimalDualPoint, s: f64) -> Result<f64> {
    let (n, m) = (lp.n(), lp.m());
    if n + m > EXACT_PS_INVERSE_LIMIT {
        return Err(Error::TooLarge {
            size: n + m,
            limit: EXACT_PS_INVERSE_LIMIT,
        });
    }
    if z.x.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("F(z) is empty unless x ≥ 0".into()));
    }
    let a = lp.a.to_nalgebra();
    let mut p = DMatrix::zeros(n + m, n + m);
    p.view_mut((0, 0), (n, n)).fill_with_identity();
    p.view_mut((n, n), (m, m)).fill_with_identity();
    p /= s;
    p.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    p.view_mut((n, 0), (m, n)).copy_from(&a);
    let chol = p.cholesky().ok_or(Error::StepTooLarge { step: s })?;
    let l = chol.l();
    let reduced = lp.reduced_costs(&z.y);
    let ax = lp.a.matvec(&z.x)?;
    let g = DVector::from_iterator(n + m, reduced.iter().copied().chain(lp.b.iter().zip(&ax).map(|(b, v)| v - b)));
    let lg = l.solve_lower_triangular(&g).expect("cholesky factor is nonsingular");
    let zero: Vec<usize> = (0..n).filter(|&i| z.x[i] == 0.0).collect();
    if zero.is_empty() {
        return Ok(lg.norm());
    }
    let mut e = DMatrix::zeros(n + m, zero.len());
    for (c, &i) in zero.iter().enumerate() {
        e[(i, c)] = 1.0;
    }
    let le = l.solve_lower_triangular(&e).expect("cholesky factor is nonsingular");
    Ok(nnls(&le, &lg).1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix_b(kappa: f64) -> StandardLp {
        StandardLp::new(
            SparseMatrix::from_dense(3, &[vec![0.0, -1.0, kappa], vec![1.0, 0.0, -1.0]]).unwrap(),
            vec![0.0, 1.0],
            vec![1.0, 0.0, kappa],
        )
        .unwrap()
    }

    #[test]
    fn kkt_vanishes_at_appendix_b_optimum() {
        let lp = appendix_b(1e-3);
        let z = PrimalDualPoint::new(vec![1.0, 0.0, 0.0], vec![4.0, 1.0]);
        assert!(lp.kkt_residual(&z) <= 1e-12);
        assert!(lp.to_general().kkt_residual(&z) <= 1e-12);
    }

    #[test]
    fn kkt_matches_dense_reevaluation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (n, me, mi) = (4, 2, 3);
            let rand_mat = |rng: &mut rand_chacha::ChaCha8Rng, r: usize| -> Vec<Vec<f64>> {
                (0..r).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
            };
            let ae = rand_mat(&mut rng, me);
            let ai = rand_mat(&mut rng, mi);
            let be: Vec<f64> = (0..me).map(|_| rng.random_range(-1.0..1.0)).collect();
            let bi: Vec<f64> = (0..mi).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..me + mi).map(|_| rng.random_range(-1.0..1.0)).collect();
            let gl = GeneralLp::new(
                SparseMatrix::from_dense(n, &ae).unwrap(),
                be.clone(),
                SparseMatrix::from_dense(n, &ai).unwrap(),
                bi.clone(),
                c.clone(),
            )
            .unwrap();
            let got = gl.kkt_residual(&PrimalDualPoint::new(x.clone(), y.clone()));

            // dense oracle, written out block by block
            let mut blocks: Vec<f64> = Vec::new();
            for r in 0..me {
                blocks.push((0..n).map(|j| ae[r][j] * x[j]).sum::<f64>() - be[r]);
            }
            for r in 0..mi {
                blocks.push(((0..n).map(|j| ai[r][j] * x[j]).sum::<f64>() - bi[r]).max(0.0));
            }
            for j in 0..n {
                blocks.push((-x[j]).max(0.0));
            }
            for j in 0..n {
                let aty: f64 = (0..me).map(|r| ae[r][j] * y[r]).sum::<f64>()
                    + (0..mi).map(|r| ai[r][j] * y[me + r]).sum::<f64>();
                blocks.push((aty - c[j]).max(0.0));
            }
            for r in 0..mi {
                blocks.push(y[me + r].max(0.0));
            }
            let gap = (0..n).map(|j| c[j] * x[j]).sum::<f64>()
                - (0..me).map(|r| be[r] * y[r]).sum::<f64>()
                - (0..mi).map(|r| bi[r] * y[me + r]).sum::<f64>();
            blocks.push(gap.max(0.0));
            let expected = blocks.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((got - expected).abs() <= 1e-12 * (1.0 + expected));
        }
    }

    #[test]
    fn to_standard_without_inequalities_is_identity() {
        let lp = appendix_b(0.5);
        let (std, map) = to_standard(&lp.to_general());
        assert_eq!(std, lp);
        assert_eq!(map.m_ineq, 0);
    }

    #[test]
    fn to_standard_single_inequality() {
        let gl = GeneralLp::new(
            SparseMatrix::zeros(0, 1),
            vec![],
            SparseMatrix::from_dense(1, &[vec![1.0]]).unwrap(),
            vec![1.0],
            vec![2.0],
        )
        .unwrap();
        let (std, map) = to_standard(&gl);
        assert_eq!(std.a.to_dense(), vec![vec![1.0, 1.0]]);
        assert_eq!(std.b, vec![1.0]);
        assert_eq!(std.c, vec![2.0, 0.0]);
        let z = PrimalDualPoint::new(vec![0.25], vec![-0.5]);
        let lifted = map.to_standard(&gl, &z);
        assert_eq!(lifted.x, vec![0.25, 0.75]);
        assert_eq!(map.to_original(&lifted), z);
    }

    #[test]
    fn partition_appendix_b() {
        let lp = appendix_b(1e-3);
        for y1 in [1.0, 4.0, 7.0] {
            let z = PrimalDualPoint::new(vec![1.0, 0.0, 0.0], vec![y1, 1.0]);
            let p = partition(&lp, &z, DEFAULT_PARTITION_TOL);
            assert_eq!(p.nonbasic, vec![1, 2]);
            assert_eq!(p.basic_nondegenerate, vec![0]);
            assert!(p.basic_degenerate.is_empty());
            assert!(p.is_valid(3));
        }
    }

    #[test]
    fn partition_all_basic() {
        let lp = StandardLp::new(SparseMatrix::identity(2), vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let z = PrimalDualPoint::new(vec![1.0, 2.0], vec![0.0, 0.0]);
        let p = partition(&lp, &z, DEFAULT_PARTITION_TOL);
        assert!(p.nonbasic.is_empty());
        assert_eq!(p.basic_nondegenerate, vec![0, 1]);
        assert!(p.basic_degenerate.is_empty());
    }

    #[test]
    fn delta_single_primal_term() {
        let lp = StandardLp::new(SparseMatrix::identity(1), vec![0.5], vec![0.0]).unwrap();
        let z = PrimalDualPoint::new(vec![0.5], vec![0.0]);
        let p = partition(&lp, &z, DEFAULT_PARTITION_TOL);
        let d = delta_metric(&lp, &z, &p, 1.0);
        assert_eq!(d.value, 0.5);
        assert_eq!(d.argmin, Some((DeltaTerm::PrimalSlack, 0)));
    }

    #[test]
    fn delta_empty_sets_is_infinite() {
        let lp = StandardLp::new(SparseMatrix::identity(1), vec![0.0], vec![0.0]).unwrap();
        let z = PrimalDualPoint::new(vec![0.0], vec![0.0]);
        let p = partition(&lp, &z, DEFAULT_PARTITION_TOL);
        assert_eq!(p.basic_degenerate, vec![0]);
        let d = delta_metric(&lp, &z, &p, 1.0);
        assert!(d.value.is_infinite());
        assert!(d.argmin.is_none());
    }

    #[test]
    fn delta_appendix_b_lower_bound() {
        // y₁ ∈ [1, 7] only guarantees 2/11 after dividing by ‖A‖₂ ≤ 2;
        // the 4/11 figure holds near the reference point y₁ = 4
        let kappa = 0.1;
        let lp = appendix_b(kappa);
        let a_norm = lp.a.spectral_norm();
        assert!(a_norm <= 2.0);
        for y1 in [1.0, 2.5, 7.0] {
            let z = PrimalDualPoint::new(vec![1.0, 0.0, 0.0], vec![y1, 1.0]);
            let p = partition_with_norm(&lp, &z, DEFAULT_PARTITION_TOL, a_norm);
            let d = delta_metric(&lp, &z, &p, a_norm);
            assert!(d.value >= 2.0 / 11.0, "δ = {}", d.value);
            if y1 <= 4.0 {
                assert!(d.value >= 4.0 / 11.0, "δ = {}", d.value);
            }
        }
    }

    #[test]
    fn delta_general_uses_dual_terms() {
        // min -x s.t. x ≤ 1: optimum x = 1, y_I = -1
        let gl = GeneralLp::new(
            SparseMatrix::zeros(0, 1),
            vec![],
            SparseMatrix::from_dense(1, &[vec![1.0]]).unwrap(),
            vec![1.0],
            vec![-1.0],
        )
        .unwrap();
        let z = PrimalDualPoint::new(vec![1.0], vec![-0.25]);
        // dual infeasible point on purpose: reduced cost = -1 + 0.25 < 0 → basic
        let p = partition_general(&gl, &z, DEFAULT_PARTITION_TOL, 1.0);
        let dual = p.dual.as_ref().unwrap();
        assert_eq!(dual.basic_nondegenerate, vec![0]);
        let d = delta_metric_general(&gl, &z, &p, 1.0);
        assert_eq!(d.value, 0.25);
        assert_eq!(d.argmin, Some((DeltaTerm::DualValue, 0)));
    }

    #[test]
    fn subdifferential_one_dimensional() {
        let lp = StandardLp::new(SparseMatrix::identity(1), vec![1.0], vec![1.0]).unwrap();
        let z = PrimalDualPoint::new(vec![2.0], vec![0.0]);
        let d = subdifferential_distance(&lp, &z, 0.5, SubdifferentialMetric::L2).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        let opt = PrimalDualPoint::new(vec![1.0], vec![1.0]);
        assert_eq!(subdifferential_distance(&lp, &opt, 0.5, SubdifferentialMetric::L2).unwrap(), 0.0);
        assert!(subdifferential_distance(&lp, &opt, 0.5, SubdifferentialMetric::PsInverse).unwrap() < 1e-12);
        assert!(subdifferential_distance(&lp, &z, 1.5, SubdifferentialMetric::L2).is_err());
    }

    #[test]
    fn subdifferential_normal_cone_absorbs_positive_reduced_cost() {
        // x = 0 with reduced cost +3, dual residual zero
        let lp = StandardLp::new(SparseMatrix::zeros(1, 1), vec![0.0], vec![3.0]).unwrap();
        let z = PrimalDualPoint::new(vec![0.0], vec![0.0]);
        assert_eq!(subdifferential_min_norm_element(&lp, &z), vec![0.0, 0.0]);
    }

    #[test]
    fn identification_radius_formula() {
        let z0 = PrimalDualPoint::zeros(2, 1);
        let zs = PrimalDualPoint::new(vec![3.0, 0.0], vec![4.0]);
        assert_eq!(identification_radius(&z0, &zs), 21.0);
    }

    #[test]
    fn exact_ps_inverse_distance_interior() {
        let lp = appendix_b(1e-2);
        let z = PrimalDualPoint::new(vec![0.5, 0.2, 0.1], vec![1.0, -2.0]);
        let s = 0.3;
        let exact = subdifferential_distance_ps_inverse_exact(&lp, &z, s).unwrap();
        let cg = subdifferential_distance(&lp, &z, s, SubdifferentialMetric::PsInverse).unwrap();
        assert!((exact - cg).abs() < 1e-8 * cg, "{exact} vs {cg}");
    }

    #[test]
    fn exact_ps_inverse_distance_scans_normal_cone() {
        // one variable at zero: F(z) = {(r − w, ax − b) : w ≥ 0}
        let lp = StandardLp::new(SparseMatrix::from_dense(1, &[vec![1.0]]).unwrap(), vec![1.0], vec![2.0]).unwrap();
        let z = PrimalDualPoint::new(vec![0.0], vec![0.5]);
        let s = 0.4;
        let exact = subdifferential_distance_ps_inverse_exact(&lp, &z, s).unwrap();
        // P⁻¹ for P = [[1/s, 1], [1, 1/s]]
        let det = 1.0 / (s * s) - 1.0;
        let quad = |gx: f64, gy: f64| ((gx * gx + gy * gy) / s - 2.0 * gx * gy) / det;
        let scan = (0..=200_000)
            .map(|k| quad(1.5 - k as f64 * 1e-5, -1.0).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(exact <= scan + 1e-12 && scan - exact < 1e-6, "{exact} vs {scan}");
        let upper = subdifferential_distance(&lp, &z, s, SubdifferentialMetric::PsInverse).unwrap();
        assert!(exact <= upper + 1e-12);
    }
}
