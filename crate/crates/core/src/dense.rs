//! Small dense helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn pos(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Orthonormal basis of the row space of `m` (columns of the returned matrix),
/// computed from an SVD with a relative rank cutoff.
pub(crate) fn row_space_basis(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_cutoff * smax.max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cutoff)
        .map(|(i, _)| i)
        .collect();
    let mut basis = DMatrix::zeros(n, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        for j in 0..n {
            basis[(j, k)] = v_t[(i, j)];
        }
    }
    basis
}

/// Orthonormal basis of the column space of `m`.
pub(crate) fn column_space_basis(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    row_space_basis(&m.transpose(), rel_cutoff)
}

/// Orthonormal basis of the null space of `m`.
pub(crate) fn null_space_basis(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let row = row_space_basis(m, rel_cutoff);
    if row.ncols() == 0 {
        return DMatrix::identity(n, n);
    }
    if row.ncols() >= n {
        return DMatrix::zeros(n, 0);
    }
    let comp = DMatrix::identity(n, n) - &row * row.transpose();
    column_space_basis(&comp, 1e-10)
}

pub(crate) fn rank(m: &DMatrix<f64>, rel_cutoff: f64) -> usize {
    row_space_basis(m, rel_cutoff).ncols()
}

/// Orthonormal basis of the row space of `m` by Gram–Schmidt with one
/// reorthogonalization pass. Row `kept[j]` is the one that contributed
/// basis vector `j`; `coef[(i, j)] = ⟨row i, q_j⟩`.
pub(crate) struct RowBasis {
    pub q: DMatrix<f64>,
    pub coef: DMatrix<f64>,
    pub kept: Vec<usize>,
}

pub(crate) fn gram_schmidt_rows(m: &DMatrix<f64>, rel_tol: f64) -> RowBasis {
    let (rows, n) = m.shape();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut coef = DMatrix::zeros(rows, rows.min(n));
    let mut kept = Vec::new();
    for i in 0..rows {
        let a: Vec<f64> = m.row(i).iter().copied().collect();
        let a_norm = norm2(&a);
        let mut w = a.clone();
        let mut c = vec![0.0; basis.len()];
        for _ in 0..2 {
            for (j, q) in basis.iter().enumerate() {
                let d = dot(&w, q);
                c[j] += d;
                w.iter_mut().zip(q).for_each(|(wv, qv)| *wv -= d * qv);
            }
        }
        for (j, v) in c.iter().enumerate() {
            coef[(i, j)] = *v;
        }
        let w_norm = norm2(&w);
        if w_norm > rel_tol * a_norm && w_norm > 0.0 && basis.len() < n {
            coef[(i, basis.len())] = w_norm;
            basis.push(w.iter().map(|v| v / w_norm).collect());
            kept.push(i);
        }
    }
    let r = basis.len();
    let mut q = DMatrix::zeros(n, r);
    for (j, b) in basis.iter().enumerate() {
        for k in 0..n {
            q[(k, j)] = b[k];
        }
    }
    RowBasis {
        q,
        coef: coef.columns(0, r).into_owned(),
        kept,
    }
}

/// Columns completing the orthonormal columns of `q` to an orthonormal basis
/// of Rⁿ. Coordinate vectors are added greedily, always the one with the
/// largest component outside the current span.
pub(crate) fn orthonormal_completion(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let mut basis: Vec<Vec<f64>> = (0..q.ncols()).map(|j| q.column(j).iter().copied().collect()).collect();
    let start = basis.len();
    let residual = |basis: &[Vec<f64>], i: usize| -> Vec<f64> {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let d = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(wv, bv)| *wv -= d * bv);
            }
        }
        w
    };
    while basis.len() < n {
        let (w, w_norm) = (0..n)
            .map(|i| {
                let w = residual(&basis, i);
                let nrm = norm2(&w);
                (w, nrm)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("n > 0");
        if w_norm <= 1e-8 {
            break;
        }
        basis.push(w.iter().map(|v| v / w_norm).collect());
    }
    let mut out = DMatrix::zeros(n, basis.len() - start);
    for (j, b) in basis[start..].iter().enumerate() {
        for k in 0..n {
            out[(k, j)] = b[k];
        }
    }
    out
}

/// Lawson–Hanson nonnegative least squares for `min ‖Ax − b‖, x ≥ 0`.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.norm().max(1.0) * b.norm().max(1.0);
    let tol = 1e-14 * scale;
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut s = DVector::zeros(n);
        if idx.is_empty() {
            return s;
        }
        let sub = a.select_columns(&idx);
        let sol = sub
            .svd(true, true)
            .solve(b, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        for (k, &j) in idx.iter().enumerate() {
            s[j] = sol[k];
        }
        s
    };
    for _ in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = candidate else { break };
        passive[t] = true;
        loop {
            let s = solve_passive(&passive);
            if (0..n).filter(|&j| passive[j]).all(|j| s[j] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in (0..n).filter(|&j| passive[j] && s[j] <= 0.0) {
                alpha = alpha.min(x[j] / (x[j] - s[j]));
            }
            x = &x + (s - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    let res = (a * &x - b).norm();
    (x, res)
}
