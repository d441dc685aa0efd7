//! Built-in instances: the house LP, the ill-conditioned three-variable
//! family, Gaussian perturbations and random LPs with a planted optimum.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{GeneralLp, PrimalDualPoint, StandardLp};
use crate::sparse::SparseMatrix;

fn check_house(kappa: f64, delta: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa < 1.0 && delta >= 0.0 && delta <= kappa) {
        return Err(Error::InvalidArgument(format!(
            "house needs 0 ≤ delta ≤ kappa < 1 and kappa > 0, got kappa={kappa}, delta={delta}"
        )));
    }
    Ok(())
}

/// Constraint normals and right-hand sides of the house polytope in `y`:
/// `y₁ ≥ −1, y₁ ≤ 1, y₂ ≥ −1, y₂ ≤ κ−δ, y₁ + y₂/κ ≤ 1, −y₁ + y₂/κ ≤ 1`.
fn house_rows(kappa: f64, delta: f64) -> ([[f64; 2]; 6], [f64; 6]) {
    (
        [
            [-1.0, 0.0],
            [1.0, 0.0],
            [0.0, -1.0],
            [0.0, 1.0],
            [1.0, 1.0 / kappa],
            [-1.0, 1.0 / kappa],
        ],
        [1.0, 1.0, 1.0, kappa - delta, 1.0, 1.0],
    )
}

/// The house LP `max y₂` over the six constraints above, given as the
/// standard-form primal whose dual it is: one column per house constraint,
/// `b = (0, 1)` and `c` the constraint right-hand sides. The multiplier `y`
/// of a solve is therefore the house point, and the optimal value is `κ − δ`.
pub fn house(kappa: f64, delta: f64) -> Result<GeneralLp> {
    check_house(kappa, delta)?;
    let (normals, rhs) = house_rows(kappa, delta);
    let mut t = Vec::new();
    for (j, a) in normals.iter().enumerate() {
        for (i, &v) in a.iter().enumerate() {
            t.push((i, j, v));
        }
    }
    GeneralLp::new(
        SparseMatrix::from_triplets(2, 6, &t)?,
        vec![0.0, 1.0],
        SparseMatrix::zeros(0, 6),
        vec![],
        rhs.to_vec(),
    )
}

/// The house written directly in the `y` variables: `min −y₂` with the six
/// constraints as inequality rows and each free `y_i` split as `y_i⁺ − y_i⁻`
/// (columns `y₁⁺, y₂⁺, y₁⁻, y₂⁻`).
pub fn house_dual_form(kappa: f64, delta: f64) -> Result<GeneralLp> {
    check_house(kappa, delta)?;
    let (normals, rhs) = house_rows(kappa, delta);
    let mut t = Vec::new();
    for (i, a) in normals.iter().enumerate() {
        for (j, &v) in a.iter().enumerate() {
            t.push((i, j, v));
            t.push((i, j + 2, -v));
        }
    }
    GeneralLp::new(
        SparseMatrix::zeros(0, 4),
        vec![],
        SparseMatrix::from_triplets(6, 4, &t)?,
        rhs.to_vec(),
        vec![0.0, -1.0, 0.0, 1.0],
    )
}

/// `A = (0 −1 κ; 1 0 −1)`, `b = (0, 1)`, `c = (1, 0, κ)`.
pub fn appendix_b(kappa: f64) -> Result<StandardLp> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
    }
    StandardLp::new(
        SparseMatrix::from_dense(3, &[vec![0.0, -1.0, kappa], vec![1.0, 0.0, -1.0]])?,
        vec![0.0, 1.0],
        vec![1.0, 0.0, kappa],
    )
}

/// Adds independent `N(0, σ²)` noise to every stored entry of both
/// constraint matrices and to every entry of `b` and `c`.
pub fn perturb(gl: &GeneralLp, sigma: f64, seed: u64) -> Result<GeneralLp> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be non-negative, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut out = gl.clone();
    for v in out
        .a_eq
        .values_mut()
        .iter_mut()
        .chain(out.a_ineq.values_mut().iter_mut())
        .chain(out.b_eq.iter_mut())
        .chain(out.b_ineq.iter_mut())
        .chain(out.c.iter_mut())
    {
        *v += noise.sample(&mut rng);
    }
    Ok(out)
}

const PLANTED_RETRIES: usize = 200;

/// A random standard-form LP together with an optimal pair satisfying the
/// KKT conditions by construction.
///
/// A basis of `m` columns is chosen with a well-conditioned `A_B`;
/// `x*_B ∈ [0.5, 2]`, reduced costs `r_N ∈ [0.5, 2]` and `r_B = 0`.
/// With `degenerate`, one basic `x*` entry and (when `n > m`) one nonbasic
/// reduced cost are set to zero, so both land in `B₂`.
pub fn random_planted_lp(m: usize, n: usize, degenerate: bool, seed: u64) -> Result<(StandardLp, PrimalDualPoint)> {
    if m == 0 || n < m {
        return Err(Error::InvalidArgument(format!("need n ≥ m ≥ 1, got m={m}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = if m * n <= 4 { 1.0 } else { 0.3 };

    for _ in 0..PLANTED_RETRIES {
        let basis: Vec<usize> = {
            let mut b = sample(&mut rng, n, m).into_vec();
            b.sort_unstable();
            b
        };
        let mut dense = vec![vec![0.0; n]; m];
        for row in dense.iter_mut() {
            for v in row.iter_mut() {
                if rng.random_bool(density) {
                    *v = StandardNormal.sample(&mut rng);
                }
            }
        }
        // diagonal of A_B keeps the basis from collapsing at low density
        for (i, &j) in basis.iter().enumerate() {
            if dense[i][j] == 0.0 {
                dense[i][j] = StandardNormal.sample(&mut rng);
            }
        }
        let a_b = DMatrix::from_fn(m, m, |i, k| dense[i][basis[k]]);
        let sv = a_b.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 1e-2 * smax) {
            continue;
        }

        let mut x = vec![0.0; n];
        for &j in &basis {
            x[j] = rng.random_range(0.5..2.0);
        }
        let mut r = vec![0.0; n];
        let nonbasic: Vec<usize> = (0..n).filter(|j| !basis.contains(j)).collect();
        for &j in &nonbasic {
            r[j] = rng.random_range(0.5..2.0);
        }
        if degenerate {
            x[basis[rng.random_range(0..m)]] = 0.0;
            if !nonbasic.is_empty() {
                r[nonbasic[rng.random_range(0..nonbasic.len())]] = 0.0;
            }
        }
        let y: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();

        let a = SparseMatrix::from_dense(n, &dense)?;
        let b = a.matvec(&x)?;
        let aty = a.matvec_transpose(&y)?;
        let c: Vec<f64> = aty.iter().zip(&r).map(|(v, ri)| v + ri).collect();
        return Ok((StandardLp::new(a, b, c)?, PrimalDualPoint::new(x, y)));
    }
    Err(Error::Solver(format!(
        "no well-conditioned basis found after {PLANTED_RETRIES} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{partition, DEFAULT_PARTITION_TOL};

    #[test]
    fn house_optimal_value_by_vertex_enumeration() {
        // the optimum of a 2-D LP is at a vertex: intersect every pair of
        // constraints and keep the best feasible one
        for (kappa, delta) in [(0.5, 0.1), (0.9, 0.01), (0.3, 0.2)] {
            let (a, b) = house_rows(kappa, delta);
            let mut best = f64::NEG_INFINITY;
            for i in 0..6 {
                for j in i + 1..6 {
                    let det = a[i][0] * a[j][1] - a[i][1] * a[j][0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let y1 = (b[i] * a[j][1] - a[i][1] * b[j]) / det;
                    let y2 = (a[i][0] * b[j] - b[i] * a[j][0]) / det;
                    if (0..6).all(|k| a[k][0] * y1 + a[k][1] * y2 <= b[k] + 1e-12) {
                        best = best.max(y2);
                    }
                }
            }
            assert!((best - (kappa - delta)).abs() < 1e-12);
        }
    }

    #[test]
    fn house_dual_point_is_optimal() {
        let gl = house(0.5, 0.1).unwrap();
        let lp = gl.as_standard().unwrap();
        let z = PrimalDualPoint::new(vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0], vec![0.0, 0.4]);
        assert!(lp.kkt_residual(&z) < 1e-15);
        assert!((lp.objective(&z.x) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn house_degenerate_at_zero_delta() {
        let lp = house(0.5, 0.0).unwrap().as_standard().unwrap();
        let z = PrimalDualPoint::new(vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0], vec![0.0, 0.5]);
        assert!(lp.kkt_residual(&z) < 1e-15);
        let p = partition(&lp, &z, DEFAULT_PARTITION_TOL);
        assert_eq!(p.basic_degenerate, vec![4, 5]);
    }

    #[test]
    fn house_interior_point() {
        let gl = house_dual_form(0.5, 0.1).unwrap();
        let x = [0.0, 0.0, 0.0, 0.0];
        let ax = gl.a_ineq.matvec(&x).unwrap();
        assert!(ax.iter().zip(&gl.b_ineq).all(|(l, r)| l < r));
        assert_eq!(gl.objective(&x), 0.0);
    }

    #[test]
    fn house_rejects_bad_parameters() {
        assert!(house(0.5, 0.6).is_err());
        assert!(house(1.0, 0.1).is_err());
        assert!(house(0.0, 0.0).is_err());
        assert!(house(0.5, -0.1).is_err());
    }

    #[test]
    fn appendix_b_data() {
        let lp = appendix_b(1e-3).unwrap();
        assert_eq!(lp.a.to_dense(), vec![vec![0.0, -1.0, 1e-3], vec![1.0, 0.0, -1.0]]);
        assert_eq!(lp.a.matvec(&[1.0, 0.0, 0.0]).unwrap(), lp.b);
        for y1 in [0.0, 1.0, 500.0, 1001.0] {
            let z = PrimalDualPoint::new(vec![1.0, 0.0, 0.0], vec![y1, 1.0]);
            assert!(lp.kkt_residual(&z) < 1e-12, "y1 = {y1}");
        }
        let outside = PrimalDualPoint::new(vec![1.0, 0.0, 0.0], vec![1002.0, 1.0]);
        assert!(lp.kkt_residual(&outside) > 1e-4);
        assert!(appendix_b(0.0).is_err());
        assert!(lp.a.spectral_norm() <= 2.0);
    }

    #[test]
    fn perturb_properties() {
        let gl = house(0.5, 0.1).unwrap();
        assert_eq!(perturb(&gl, 0.0, 3).unwrap(), gl);
        let p1 = perturb(&gl, 1e-6, 7).unwrap();
        assert_eq!(p1, perturb(&gl, 1e-6, 7).unwrap());
        assert_ne!(p1, perturb(&gl, 1e-6, 8).unwrap());
        assert_eq!(p1.a_eq.col_indices(), gl.a_eq.col_indices());
        assert_eq!(p1.a_eq.row_offsets(), gl.a_eq.row_offsets());
        let diffs = p1
            .a_eq
            .values()
            .iter()
            .zip(gl.a_eq.values())
            .chain(p1.c.iter().zip(&gl.c))
            .chain(p1.b_eq.iter().zip(&gl.b_eq));
        for (p, o) in diffs {
            assert!((p - o).abs() < 1e-5);
        }
        assert!(perturb(&gl, -1.0, 0).is_err());
    }

    #[test]
    fn planted_lp_satisfies_kkt() {
        for seed in 0..10 {
            for degenerate in [false, true] {
                let (lp, z) = random_planted_lp(20, 40, degenerate, seed).unwrap();
                assert!(lp.kkt_residual(&z) < 1e-12);
                let p = partition(&lp, &z, DEFAULT_PARTITION_TOL);
                assert_eq!(!p.basic_degenerate.is_empty(), degenerate);
            }
        }
        let (lp, z) = random_planted_lp(1, 1, false, 0).unwrap();
        assert_eq!((lp.m(), lp.n()), (1, 1));
        assert!(lp.kkt_residual(&z) < 1e-12);
        assert!(random_planted_lp(3, 2, false, 0).is_err());
    }
}
