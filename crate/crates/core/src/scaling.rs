//! Diagonal preconditioning: Ruiz equilibration followed by an l2
//! Pock–Chambolle pass, producing `Ã = D₁AD₂`, `b̃ = D₁b`, `c̃ = D₂c`.

use crate::model::{GeneralLp, PrimalDualPoint};
use crate::sparse::SparseMatrix;

pub const DEFAULT_RUIZ_ITERS: usize = 10;

/// Positive diagonal scalings: `row` is `D₁`, `col` is `D₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRecord {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

impl ScalingRecord {
    pub fn identity(n_rows: usize, n_cols: usize) -> Self {
        ScalingRecord {
            row: vec![1.0; n_rows],
            col: vec![1.0; n_cols],
        }
    }

    /// Scaling that applies `self` first and then `next`.
    pub fn then(&self, next: &ScalingRecord) -> ScalingRecord {
        ScalingRecord {
            row: self.row.iter().zip(&next.row).map(|(a, b)| a * b).collect(),
            col: self.col.iter().zip(&next.col).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn apply(&self, a: &SparseMatrix) -> SparseMatrix {
        a.scaled(&self.row, &self.col)
    }

    pub fn is_positive(&self) -> bool {
        self.row
            .iter()
            .chain(&self.col)
            .all(|&d| d > 0.0 && d.is_finite())
    }

    /// Scaled-space point → original point: `x = D₂x̃`, `y = D₁ỹ`.
    pub fn unscale(&self, z: &PrimalDualPoint) -> PrimalDualPoint {
        PrimalDualPoint {
            x: z.x.iter().zip(&self.col).map(|(v, d)| v * d).collect(),
            y: z.y.iter().zip(&self.row).map(|(v, d)| v * d).collect(),
        }
    }

    /// Original point → scaled-space point.
    pub fn scale(&self, z: &PrimalDualPoint) -> PrimalDualPoint {
        PrimalDualPoint {
            x: z.x.iter().zip(&self.col).map(|(v, d)| v / d).collect(),
            y: z.y.iter().zip(&self.row).map(|(v, d)| v / d).collect(),
        }
    }
}

fn inv_sqrt_or_one(norms: &[f64]) -> Vec<f64> {
    norms
        .iter()
        .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 })
        .collect()
}

/// `iters` rounds of Ruiz equilibration: every row and column is divided by
/// the square root of its current infinity norm.
pub fn ruiz_scale(a: &SparseMatrix, iters: usize) -> ScalingRecord {
    let mut rec = ScalingRecord::identity(a.n_rows(), a.n_cols());
    let mut current = a.clone();
    for _ in 0..iters {
        let step = ScalingRecord {
            row: inv_sqrt_or_one(&current.row_inf_norms()),
            col: inv_sqrt_or_one(&current.col_inf_norms()),
        };
        current = step.apply(&current);
        rec = rec.then(&step);
    }
    rec
}

/// Symmetric l2 Pock–Chambolle scaling: `D₁ᵢᵢ = 1/√‖rowᵢ‖₂`, `D₂ⱼⱼ = 1/√‖colⱼ‖₂`.
pub fn pock_chambolle_scale(a: &SparseMatrix) -> ScalingRecord {
    ScalingRecord {
        row: inv_sqrt_or_one(&a.row_l2_norms()),
        col: inv_sqrt_or_one(&a.col_l2_norms()),
    }
}

/// A scaled problem together with the scaling that produced it.
#[derive(Debug, Clone)]
pub struct Preconditioned {
    pub lp: GeneralLp,
    pub scaling: ScalingRecord,
}

impl Preconditioned {
    pub fn unscale(&self, z: &PrimalDualPoint) -> PrimalDualPoint {
        self.scaling.unscale(z)
    }
}

/// Ruiz(10) followed by Pock–Chambolle on the stacked matrix `(A_E; A_I)`.
pub fn precondition(gl: &GeneralLp) -> Preconditioned {
    let a = gl.stacked_matrix();
    let ruiz = ruiz_scale(&a, DEFAULT_RUIZ_ITERS);
    let pc = pock_chambolle_scale(&ruiz.apply(&a));
    let scaling = ruiz.then(&pc);
    Preconditioned {
        lp: apply_to_problem(gl, &scaling),
        scaling,
    }
}

/// Applies `D₁, D₂` to every piece of a general-form problem.
pub fn apply_to_problem(gl: &GeneralLp, scaling: &ScalingRecord) -> GeneralLp {
    let m_eq = gl.m_eq();
    let (row_eq, row_ineq) = scaling.row.split_at(m_eq);
    GeneralLp {
        a_eq: gl.a_eq.scaled(row_eq, &scaling.col),
        b_eq: gl.b_eq.iter().zip(row_eq).map(|(b, d)| b * d).collect(),
        a_ineq: gl.a_ineq.scaled(row_ineq, &scaling.col),
        b_ineq: gl.b_ineq.iter().zip(row_ineq).map(|(b, d)| b * d).collect(),
        c: gl.c.iter().zip(&scaling.col).map(|(c, d)| c * d).collect(),
    }
}
