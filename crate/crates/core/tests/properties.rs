use pdhg_lp::instances::random_planted_lp;
use pdhg_lp::model::GeneralLp;
use pdhg_lp::mps::{parse_mps, write_mps};
use pdhg_lp::pdhg::{default_step_size, pdhg_step, ps_norm};
use pdhg_lp::scaling::{precondition, ruiz_scale};
use pdhg_lp::{PrimalDualPoint, SparseMatrix, StandardLp};
use proptest::prelude::*;

fn dense(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), -3.0..3.0f64], cols), rows)
}

fn small_lp() -> impl Strategy<Value = StandardLp> {
    (1usize..4, 1usize..6).prop_flat_map(|(m, n)| {
        (dense(m, n), prop::collection::vec(-2.0..2.0f64, m), prop::collection::vec(-2.0..2.0f64, n))
            .prop_map(move |(a, b, c)| StandardLp::new(SparseMatrix::from_dense(n, &a).unwrap(), b, c).unwrap())
    })
}

fn point(n: usize, m: usize) -> impl Strategy<Value = PrimalDualPoint> {
    (prop::collection::vec(0.0..3.0f64, n), prop::collection::vec(-3.0..3.0f64, m)).prop_map(|(x, y)| PrimalDualPoint::new(x, y))
}

fn diff(a: &PrimalDualPoint, b: &PrimalDualPoint) -> PrimalDualPoint {
    PrimalDualPoint::new(
        a.x.iter().zip(&b.x).map(|(p, q)| p - q).collect(),
        a.y.iter().zip(&b.y).map(|(p, q)| p - q).collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // one step of the iteration is non-expansive in the P_s metric
    #[test]
    fn step_is_nonexpansive(
        (lp, z1, z2) in small_lp().prop_flat_map(|lp| {
            let (n, m) = (lp.n(), lp.m());
            (Just(lp), point(n, m), point(n, m))
        })
    ) {
        let s = default_step_size(&lp.a, 0);
        let t1 = pdhg_step(&lp, &z1, s).unwrap();
        let t2 = pdhg_step(&lp, &z2, s).unwrap();
        let before = ps_norm(&diff(&z1, &z2), &lp.a, s).unwrap();
        let after = ps_norm(&diff(&t1, &t2), &lp.a, s).unwrap();
        prop_assert!(after <= before * (1.0 + 1e-12) + 1e-12, "{after} > {before}");
        prop_assert!(t1.x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn planted_optimum_is_fixed(seed in 0u64..200, degenerate in any::<bool>()) {
        let (lp, z) = random_planted_lp(3, 7, degenerate, seed).unwrap();
        prop_assert!(lp.kkt_residual(&z) < 1e-12);
        let s = default_step_size(&lp.a, seed);
        let t = pdhg_step(&lp, &z, s).unwrap();
        prop_assert!(t.distance(&z) < 1e-12);
    }

    #[test]
    fn mps_round_trip_preserves_problem(
        (a_eq, a_ineq, b_eq, b_ineq, c) in (1usize..5).prop_flat_map(|n| (
            dense(2, n),
            dense(2, n),
            prop::collection::vec(-1e3..1e3f64, 2),
            prop::collection::vec(-1e3..1e3f64, 2),
            prop::collection::vec(-1e3..1e3f64, n),
        ))
    ) {
        let n = c.len();
        let gl = GeneralLp::new(
            SparseMatrix::from_dense(n, &a_eq).unwrap(),
            b_eq,
            SparseMatrix::from_dense(n, &a_ineq).unwrap(),
            b_ineq,
            c,
        ).unwrap();
        let back = parse_mps(&write_mps(&gl, None)).unwrap();
        prop_assert_eq!(back, gl);
    }

    #[test]
    fn scaling_round_trip(lp in small_lp(), seed in 0u64..1000) {
        let rec = ruiz_scale(&lp.a, 10);
        let z = PrimalDualPoint::new(
            (0..lp.n()).map(|i| (i as f64 + seed as f64).sin()).collect(),
            (0..lp.m()).map(|i| (i as f64 * 0.7 + seed as f64).cos()).collect(),
        );
        let back = rec.unscale(&rec.scale(&z));
        prop_assert!(back.distance(&z) <= 1e-12 * (1.0 + z.norm()));
        prop_assert!(rec.row.iter().chain(&rec.col).all(|&d| d > 0.0 && d.is_finite()));
    }

    // preconditioning changes coordinates, not the problem
    #[test]
    fn preconditioned_kkt_maps_back(seed in 0u64..100) {
        let (lp, z) = random_planted_lp(4, 9, false, seed).unwrap();
        let gl = lp.to_general();
        let pre = precondition(&gl);
        let zs = pre.scaling.scale(&z);
        prop_assert!(pre.lp.kkt_residual(&zs) < 1e-10);
        prop_assert!(pre.scaling.unscale(&zs).distance(&z) < 1e-12 * (1.0 + z.norm()));
    }
}
