//! Post-processing for the two-stage picture: when the iterates settle on
//! the optimal partition, and the theoretical bounds on when that happens
//! and how fast the iterates contract afterwards.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{DeltaMetric, Partition, PrimalDualPoint};
use crate::pdhg::{IterateLog, IterateRecord};

fn matches_partition(r: &IterateRecord, part: &Partition) -> bool {
    part.nonbasic
        .iter()
        .all(|&i| !r.active_primal.get(i) && r.active_dualslack.get(i))
        && part.basic_nondegenerate.iter().all(|&i| r.active_primal.get(i))
}

/// Earliest logged iteration from which every later logged iterate has
/// `x_N = 0`, `x_{B₁} > 0` and `c_N − A_Nᵀy > tol·‖A‖₂`, scanning backwards
/// from the last record. `None` if the final record already fails.
pub fn identification_moment(log: &IterateLog, final_partition: &Partition) -> Result<Option<usize>> {
    let n = final_partition.n();
    if let Some(bad) = log
        .records
        .iter()
        .find(|r| r.active_primal.len() != n || r.active_dualslack.len() != n)
    {
        return Err(Error::DimensionMismatch {
            context: "identification masks",
            expected: n,
            actual: bad.active_primal.len(),
        });
    }
    let mut moment = None;
    for r in log.records.iter().rev() {
        if !matches_partition(r, final_partition) {
            break;
        }
        moment = Some(r.k);
    }
    Ok(moment)
}

fn check_positive(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(())
}

/// `K = max{4, 1/(s²α_{L1}²)}·256R²/δ² + 2/(s‖A‖₂)`.
pub fn identification_bound(r: f64, delta: f64, s: f64, alpha_l1: f64, a_norm: f64) -> Result<f64> {
    check_positive(&[("R", r), ("delta", delta), ("s", s), ("alpha_L1", alpha_l1), ("‖A‖", a_norm)])?;
    let floor = (1.0 / (s * s * alpha_l1 * alpha_l1)).max(4.0);
    Ok(floor * 256.0 * r * r / (delta * delta) + 2.0 / (s * a_norm))
}

/// Length of one e-fold of the local bound: `2⌈4e/(s²α_{L2}²)⌉`.
pub fn local_rate_period(s: f64, alpha_l2: f64) -> Result<f64> {
    check_positive(&[("s", s), ("alpha_L2", alpha_l2)])?;
    Ok(2.0 * (4.0 * std::f64::consts::E / (s * s * alpha_l2 * alpha_l2)).ceil())
}

/// `4δ·exp(−(k−K) / (2⌈4e/(s²α_{L2}²)⌉))`.
pub fn local_rate_bound(delta: f64, s: f64, alpha_l2: f64, k_minus_k: usize) -> Result<f64> {
    check_positive(&[("delta", delta)])?;
    let period = local_rate_period(s, alpha_l2)?;
    Ok(4.0 * delta * (-(k_minus_k as f64) / period).exp())
}

/// `(2‖z⁰ − z*‖₂ + 2‖z*‖₂ + 1)/δ`.
pub fn r_delta_metric(z0: &PrimalDualPoint, z_star: &PrimalDualPoint, delta: f64) -> Result<f64> {
    check_positive(&[("delta", delta)])?;
    Ok((2.0 * z0.distance(z_star) + 2.0 * z_star.norm() + 1.0) / delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationReport {
    pub empirical_iter: Option<usize>,
    pub theoretical_k: f64,
    pub r: f64,
    pub delta: DeltaMetric,
    pub alpha_l1_lower: f64,
    pub alpha_l2_lower: f64,
    /// Per-iteration contraction factor `exp(−1/(2⌈4e/(s²α_{L2}²)⌉))`.
    pub local_rate_per_iter: f64,
}

impl IdentificationReport {
    /// Assembles the report; bounds that need a positive sharpness constant
    /// are `+∞` (for K) or `1` (for the rate) when it is unavailable.
    pub fn new(
        empirical_iter: Option<usize>,
        r: f64,
        delta: DeltaMetric,
        alpha_l1_lower: f64,
        alpha_l2_lower: f64,
        s: f64,
        a_norm: f64,
    ) -> Self {
        let theoretical_k =
            identification_bound(r, delta.value, s, alpha_l1_lower, a_norm).unwrap_or(f64::INFINITY);
        let local_rate_per_iter = local_rate_period(s, alpha_l2_lower)
            .map(|p| (-1.0 / p).exp())
            .unwrap_or(1.0);
        IdentificationReport {
            empirical_iter,
            theoretical_k,
            r,
            delta,
            alpha_l1_lower,
            alpha_l2_lower,
            local_rate_per_iter,
        }
    }

    pub fn to_kv_text(&self) -> String {
        let mut out = String::new();
        let iter = self.empirical_iter.map_or("none".to_string(), |k| k.to_string());
        writeln!(out, "empirical_iter: {iter}").unwrap();
        writeln!(out, "theoretical_K: {:e}", self.theoretical_k).unwrap();
        writeln!(out, "R: {}", self.r).unwrap();
        writeln!(out, "delta: {}", self.delta.value).unwrap();
        if let Some((term, idx)) = self.delta.argmin {
            writeln!(out, "delta_argmin: {} {}", term.as_str(), idx).unwrap();
        }
        writeln!(out, "alpha_L1_lower: {:e}", self.alpha_l1_lower).unwrap();
        writeln!(out, "alpha_L2_lower: {:e}", self.alpha_l2_lower).unwrap();
        writeln!(out, "local_rate_per_iter: {}", self.local_rate_per_iter).unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdhg::ActiveMask;

    fn record(k: usize, primal: &[usize], slack: &[usize], n: usize) -> IterateRecord {
        IterateRecord {
            k,
            kkt: 1.0,
            ps_step_norm: 1.0,
            dist_to_final: 0.0,
            active_primal: ActiveMask::from_fn(n, |i| primal.contains(&i)),
            active_dualslack: ActiveMask::from_fn(n, |i| slack.contains(&i)),
            elapsed_secs: 0.0,
            iterate: None,
        }
    }

    fn part() -> Partition {
        Partition {
            nonbasic: vec![1, 2],
            basic_nondegenerate: vec![0],
            basic_degenerate: vec![3],
            dual: None,
        }
    }

    #[test]
    fn moment_from_start() {
        let log = IterateLog {
            records: (0..5).map(|k| record(k, &[0], &[1, 2], 4)).collect(),
        };
        assert_eq!(identification_moment(&log, &part()).unwrap(), Some(0));
    }

    #[test]
    fn moment_after_single_flip() {
        let mut records: Vec<IterateRecord> = (0..137).map(|k| record(k, &[0, 2], &[1], 4)).collect();
        // B₂ coordinates may come and go freely
        records.extend((137..300).map(|k| record(k, if k % 2 == 0 { &[0, 3] } else { &[0] }, &[1, 2], 4)));
        let log = IterateLog { records };
        assert_eq!(identification_moment(&log, &part()).unwrap(), Some(137));
    }

    #[test]
    fn moment_never() {
        let log = IterateLog {
            records: (0..5).map(|k| record(k, &[1], &[1, 2], 4)).collect(),
        };
        assert_eq!(identification_moment(&log, &part()).unwrap(), None);
        assert_eq!(identification_moment(&IterateLog::default(), &part()).unwrap(), None);
    }

    #[test]
    fn moment_rejects_mismatched_masks() {
        let log = IterateLog {
            records: vec![record(0, &[0], &[1, 2], 3)],
        };
        assert!(identification_moment(&log, &part()).is_err());
    }

    #[test]
    fn bound_with_floor_active() {
        // s‖A‖ = 1/2 with ‖A‖ = 1, α = 4 so 1/(s²α²) = 1/4 < 4
        let k = identification_bound(1.0, 1.0, 0.5, 4.0, 1.0).unwrap();
        assert_eq!(k, 4.0 * 256.0 + 4.0);
    }

    #[test]
    fn bound_table_inputs() {
        let (r, delta, a_norm, alpha) = (10.0, 0.363, 2.0, 0.00821);
        let s = 0.25 / a_norm;
        let expected = 1.0 / (s * s * alpha * alpha) * 256.0 * r * r / (delta * delta) + 2.0 / (s * a_norm);
        let k = identification_bound(r, delta, s, alpha, a_norm).unwrap();
        assert_eq!(k, expected);
        assert!((k / 1.844677e11 - 1.0).abs() < 1e-6, "K = {k:e}");
    }

    #[test]
    fn bound_delta_homogeneity() {
        let first = |d: f64| identification_bound(3.0, d, 0.1, 0.2, 2.0).unwrap() - 2.0 / (0.1 * 2.0);
        assert!((first(0.2) / first(0.4) - 4.0).abs() < 1e-12);
        assert!(identification_bound(1.0, 0.0, 0.1, 0.1, 1.0).is_err());
    }

    #[test]
    fn local_rate_cases() {
        assert_eq!(local_rate_bound(0.3, 0.1, 0.5, 0).unwrap(), 1.2);
        let period = local_rate_period(0.1, 0.5).unwrap();
        assert_eq!(period, 2.0 * (4.0 * std::f64::consts::E / 0.0025).ceil());
        let half = local_rate_bound(0.3, 0.1, 0.5, (period * 2f64.ln()).round() as usize).unwrap();
        assert!((half / 0.6 - 1.0).abs() < 1e-3);
        let table = local_rate_bound(0.363, 0.125, 0.0276, 1_000_000).unwrap();
        let expected = 4.0 * 0.363 * (-1e6 / (2.0 * (4.0 * std::f64::consts::E / (0.125f64.powi(2) * 0.0276f64.powi(2))).ceil())).exp();
        assert_eq!(table, expected);
    }

    #[test]
    fn r_delta_cases() {
        let zero = PrimalDualPoint::zeros(2, 1);
        assert_eq!(r_delta_metric(&zero, &zero, 1.0).unwrap(), 1.0);
        let z0 = PrimalDualPoint::new(vec![3.0, 4.0], vec![0.0]);
        assert_eq!(r_delta_metric(&z0, &zero, 0.5).unwrap(), 22.0);
        assert!(r_delta_metric(&zero, &zero, 0.0).is_err());
    }

    #[test]
    fn report_text_has_all_keys() {
        let rep = IdentificationReport::new(
            Some(12),
            5.0,
            DeltaMetric {
                value: 0.2,
                argmin: None,
            },
            0.1,
            0.0,
            0.25,
            2.0,
        );
        assert_eq!(rep.local_rate_per_iter, 1.0);
        let text = rep.to_kv_text();
        for key in ["empirical_iter: 12", "theoretical_K:", "R: 5", "delta: 0.2", "alpha_L1_lower:", "alpha_L2_lower:"] {
            assert!(text.contains(key), "{key} missing from\n{text}");
        }
    }
}
