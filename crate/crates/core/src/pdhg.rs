//! The PDHG iteration, the `P_s` geometry it lives in, the normalized
//! duality gap and the logged solve loop.
//!
//! One iteration for `min_{x≥0} max_{y_I≤0} cᵀx − yᵀAx + bᵀy` reads
//!
//! ```text
//! x⁺ = proj_{x≥0}(x − s(c − Aᵀy))
//! y⁺ = y − s(A(2x⁺ − x) − b),   then y⁺_I ← min(y⁺_I, 0)
//! ```
//!
//! and for a standard-form problem the dual projection is void.

use std::fmt::Write as _;
use std::time::Instant;

use crate::dense::{dot, norm2};
use crate::error::{Error, Result};
use crate::model::{GeneralLp, PrimalDualPoint, StandardLp, DEFAULT_PARTITION_TOL};
use crate::scaling::{precondition, ScalingRecord};
use crate::sparse::{SparseMatrix, DEFAULT_POWER_MAX_ITER, DEFAULT_POWER_REL_TOL};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// `None` picks `step_scale / (σ̂(1 + rel_tol))`; the default scale 0.5
    /// keeps `s ≤ 1/(2‖A‖₂)`.
    pub step_size: Option<f64>,
    pub step_scale: f64,
    pub max_iters: usize,
    pub kkt_tol: f64,
    pub log_every: usize,
    pub seed: u64,
    /// Keep the logged iterates (in original coordinates) in the log.
    pub record_iterates: bool,
    /// Run on the Ruiz + Pock–Chambolle scaled problem.
    pub precondition: bool,
    /// Threshold for the dual-slack mask: `(c − Aᵀy)_i > tol·‖A‖₂`.
    pub mask_tol: f64,
    /// Starting point in original coordinates; zero when absent.
    pub initial_point: Option<PrimalDualPoint>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step_size: None,
            step_scale: 0.5,
            max_iters: 300_000,
            kkt_tol: 1e-8,
            log_every: 1,
            seed: 0,
            record_iterates: false,
            precondition: false,
            mask_tol: DEFAULT_PARTITION_TOL,
            initial_point: None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if let Some(s) = self.step_size {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidArgument(format!("step size must be positive, got {s}")));
            }
        }
        if !(self.step_scale > 0.0 && self.step_scale < 1.0) {
            return Err(Error::InvalidArgument(format!("step scale must lie in (0, 1), got {}", self.step_scale)));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(Error::InvalidArgument("kkt_tol must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidArgument("log_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// A fixed-length bit set, serialized as a hexadecimal integer
/// (bit `i` has weight `2^i`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveMask {
    len: usize,
    words: Vec<u64>,
}

impl ActiveMask {
    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut words = vec![0u64; len.div_ceil(64)];
        for i in 0..len {
            if f(i) {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        ActiveMask { len, words }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn to_hex(&self) -> String {
        let digits = self.len.div_ceil(4).max(1);
        (0..digits)
            .rev()
            .map(|d| {
                let nibble = (0..4)
                    .filter(|b| {
                        let i = 4 * d + b;
                        i < self.len && self.get(i)
                    })
                    .fold(0u32, |acc, b| acc | 1 << b);
                char::from_digit(nibble, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(hex: &str, len: usize) -> Option<Self> {
        let chars: Vec<u32> = hex.chars().rev().map(|c| c.to_digit(16)).collect::<Option<_>>()?;
        Some(Self::from_fn(len, |i| chars.get(i / 4).is_some_and(|n| n >> (i % 4) & 1 == 1)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    /// KKT residual of the original problem at `z^k`.
    pub kkt: f64,
    /// `‖z^{k+1} − z^k‖_{P_s}` in the geometry of the iterated problem.
    pub ps_step_norm: f64,
    /// `‖z^k − z_final‖₂` in original coordinates.
    pub dist_to_final: f64,
    /// `x^k_i > 0`.
    pub active_primal: ActiveMask,
    /// `(c − Aᵀy^k)_i > mask_tol·‖A‖₂`.
    pub active_dualslack: ActiveMask,
    pub elapsed_secs: f64,
    pub iterate: Option<PrimalDualPoint>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateLog {
    pub records: Vec<IterateRecord>,
}

pub const CSV_HEADER: &str = "iter,kkt,ps_step_norm,dist_to_final,active_primal,active_dualslack";

impl IterateLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{},{}",
                r.k,
                r.kkt,
                r.ps_step_norm,
                r.dist_to_final,
                r.active_primal.to_hex(),
                r.active_dualslack.to_hex()
            )
            .unwrap();
        }
        out
    }

    pub fn last(&self) -> Option<&IterateRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    OptimalTol,
    IterLimit,
    NumericalError,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::OptimalTol => "optimal_tol",
            SolveStatus::IterLimit => "iter_limit",
            SolveStatus::NumericalError => "numerical_error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Final iterate in original coordinates.
    pub z_final: PrimalDualPoint,
    pub status: SolveStatus,
    pub iterations: usize,
    pub log: IterateLog,
    /// Step size used on the iterated (possibly scaled) problem.
    pub step_size: f64,
    /// Spectral norm estimate of the original stacked matrix.
    pub a_norm: f64,
    pub scaling: Option<ScalingRecord>,
}

/// Exactly one PDHG step on a standard-form problem.
pub fn pdhg_step(lp: &StandardLp, z: &PrimalDualPoint, s: f64) -> Result<PrimalDualPoint> {
    step_parts(&lp.a, &lp.b, &lp.c, lp.m(), z, s)
}

/// One PDHG step on a general-form problem; inequality multipliers are
/// projected onto `y_I ≤ 0`.
pub fn pdhg_step_general(gl: &GeneralLp, z: &PrimalDualPoint, s: f64) -> Result<PrimalDualPoint> {
    step_parts(&gl.stacked_matrix(), &gl.stacked_rhs(), &gl.c, gl.m_eq(), z, s)
}

fn step_parts(
    a: &SparseMatrix,
    b: &[f64],
    c: &[f64],
    m_eq: usize,
    z: &PrimalDualPoint,
    s: f64,
) -> Result<PrimalDualPoint> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {s}")));
    }
    if z.x.len() != a.n_cols() || z.y.len() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            context: "pdhg_step",
            expected: a.n_cols() + a.n_rows(),
            actual: z.x.len() + z.y.len(),
        });
    }
    let aty = a.matvec_transpose(&z.y)?;
    let x: Vec<f64> = (0..c.len())
        .map(|i| (z.x[i] - s * (c[i] - aty[i])).max(0.0))
        .collect();
    let extrapolated: Vec<f64> = x.iter().zip(&z.x).map(|(n, o)| 2.0 * n - o).collect();
    let ax = a.matvec(&extrapolated)?;
    let mut y: Vec<f64> = (0..b.len()).map(|j| z.y[j] - s * (ax[j] - b[j])).collect();
    y[m_eq..].iter_mut().for_each(|v| *v = v.min(0.0));
    let out = PrimalDualPoint { x, y };
    if !out.is_finite() {
        return Err(Error::NonFinite("pdhg_step"));
    }
    Ok(out)
}

fn ps_norm_sq(x: &[f64], y: &[f64], ax: &[f64], s: f64) -> f64 {
    (dot(x, x) + dot(y, y)) / s + 2.0 * dot(y, ax)
}

/// `‖z‖_{P_s} = √((‖x‖² + ‖y‖²)/s + 2yᵀAx)` for `P_s = (I/s, Aᵀ; A, I/s)`,
/// the metric in which the update above is a proximal-point step. Writing
/// the off-diagonal blocks as `−A` describes the same geometry with the sign
/// of y flipped.
pub fn ps_norm(z: &PrimalDualPoint, a: &SparseMatrix, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::StepTooLarge { step: s });
    }
    let ax = a.matvec(&z.x)?;
    let rad = ps_norm_sq(&z.x, &z.y, &ax, s);
    let scale = ((dot(&z.x, &z.x) + dot(&z.y, &z.y)) / s).max(1.0);
    if rad < -1e-12 * scale {
        return Err(Error::StepTooLarge { step: s });
    }
    Ok(rad.max(0.0).sqrt())
}

fn ps_apply(a: &SparseMatrix, s: f64, v: &[f64]) -> Vec<f64> {
    let n = a.n_cols();
    let (vx, vy) = v.split_at(n);
    let mut aty = vec![0.0; n];
    a.matvec_transpose_into(vy, &mut aty);
    let mut ax = vec![0.0; a.n_rows()];
    a.matvec_into(vx, &mut ax);
    vx.iter()
        .zip(&aty)
        .map(|(x, t)| x / s + t)
        .chain(vy.iter().zip(&ax).map(|(y, t)| y / s + t))
        .collect()
}

/// Solves `P_s w = g` by conjugate gradients (matvecs only).
pub fn ps_solve(a: &SparseMatrix, s: f64, g: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let dim = a.n_cols() + a.n_rows();
    if g.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "ps_solve",
            expected: dim,
            actual: g.len(),
        });
    }
    let mut w = vec![0.0; dim];
    let mut r = g.to_vec();
    let gnorm = norm2(g);
    if gnorm == 0.0 {
        return Ok(w);
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..(10 * dim + 100) {
        if rr.sqrt() <= rel_tol * gnorm {
            return Ok(w);
        }
        let pp = ps_apply(a, s, &p);
        let curv = dot(&p, &pp);
        if curv <= 0.0 {
            return Err(Error::StepTooLarge { step: s });
        }
        let alpha = rr / curv;
        w.iter_mut().zip(&p).for_each(|(wi, pi)| *wi += alpha * pi);
        r.iter_mut().zip(&pp).for_each(|(ri, qi)| *ri -= alpha * qi);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }
    if rr.sqrt() <= 1e3 * rel_tol * gnorm {
        Ok(w)
    } else {
        Err(Error::Solver("P_s conjugate gradient did not converge".into()))
    }
}

/// `‖g‖_{P_s⁻¹} = √(gᵀP_s⁻¹g)`.
pub fn ps_inverse_norm(a: &SparseMatrix, s: f64, g: &[f64]) -> Result<f64> {
    let w = ps_solve(a, s, g, 1e-10)?;
    Ok(dot(g, &w).max(0.0).sqrt())
}

/// Maximizer of the normalized duality gap and its value.
#[derive(Debug, Clone, PartialEq)]
pub struct GapMaximizer {
    pub rho: f64,
    /// Displacement `ẑ − z` attaining the maximum.
    pub direction: Vec<f64>,
    /// Whether the ball constraint is active at the maximizer.
    pub on_sphere: bool,
}

/// Normalized duality gap `ρ_r(z)` of a standard-form problem.
pub fn normalized_duality_gap(lp: &StandardLp, z: &PrimalDualPoint, r: f64) -> Result<f64> {
    Ok(duality_gap_maximizer(lp, z, r)?.rho)
}

/// Solves `max gᵀd  s.t. ‖d‖₂ ≤ r, x + d_x ≥ 0` with
/// `g = (−(c − Aᵀy), b − Ax)`, which is the Lagrangian gap
/// `L(x, ŷ) − L(x̂, y)` written in the displacement `d = ẑ − z`.
///
/// For a ball multiplier λ the maximizer is `d(λ) = (max(g_x/λ, −x), g_y/λ)`;
/// `‖d(λ)‖` is non-increasing, so λ is found by bisection and then polished
/// in closed form on the detected clipping pattern.
pub fn duality_gap_maximizer(lp: &StandardLp, z: &PrimalDualPoint, r: f64) -> Result<GapMaximizer> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if z.x.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("normalized duality gap needs x ≥ 0".into()));
    }
    let n = lp.n();
    let reduced = lp.reduced_costs(&z.y);
    let ax = lp.a.matvec(&z.x)?;
    let g: Vec<f64> = reduced
        .iter()
        .map(|v| -v)
        .chain(lp.b.iter().zip(&ax).map(|(b, a)| b - a))
        .collect();
    let gnorm = norm2(&g);
    if gnorm == 0.0 {
        return Ok(GapMaximizer {
            rho: 0.0,
            direction: vec![0.0; g.len()],
            on_sphere: false,
        });
    }

    let d_of = |lambda: f64| -> Vec<f64> {
        g.iter()
            .enumerate()
            .map(|(i, &gi)| if i < n { (gi / lambda).max(-z.x[i]) } else { gi / lambda })
            .collect()
    };

    // λ → 0⁺ limit: finite only when every unbounded direction is blocked.
    let unbounded = g[..n].iter().any(|&v| v > 0.0) || g[n..].iter().any(|&v| v != 0.0);
    if !unbounded {
        let d0: Vec<f64> = (0..g.len())
            .map(|i| if i < n && g[i] < 0.0 { -z.x[i] } else { 0.0 })
            .collect();
        if norm2(&d0) <= r {
            return Ok(GapMaximizer {
                rho: dot(&g, &d0) / r,
                direction: d0,
                on_sphere: false,
            });
        }
    }

    let (mut lo, mut hi) = (0.0f64, gnorm / r);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm2(&d_of(mid)) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // closed form on the clipping pattern found at λ = hi
    let clipped: Vec<bool> = (0..n).map(|i| g[i] / hi < -z.x[i]).collect();
    let clip_sq: f64 = (0..n).filter(|&i| clipped[i]).map(|i| z.x[i] * z.x[i]).sum();
    let free_sq: f64 = (0..g.len())
        .filter(|&i| i >= n || !clipped[i])
        .map(|i| g[i] * g[i])
        .sum();
    let mut lambda = hi;
    if r * r > clip_sq && free_sq > 0.0 {
        let exact = free_sq.sqrt() / (r * r - clip_sq).sqrt();
        let same_pattern = (0..n).all(|i| (g[i] / exact < -z.x[i]) == clipped[i]);
        if same_pattern {
            lambda = exact;
        }
    }
    let d = d_of(lambda);
    Ok(GapMaximizer {
        rho: dot(&g, &d) / r,
        direction: d,
        on_sphere: true,
    })
}

/// Default step `0.5 / (σ̂(1 + rel_tol))` for a matrix.
pub fn default_step_size(a: &SparseMatrix, seed: u64) -> f64 {
    scaled_step_size(a, 0.5, seed)
}

/// `scale / (σ̂(1 + rel_tol))`, or `1` for a zero matrix.
pub fn scaled_step_size(a: &SparseMatrix, scale: f64, seed: u64) -> f64 {
    let est = a.spectral_norm_estimate(DEFAULT_POWER_REL_TOL, DEFAULT_POWER_MAX_ITER, seed);
    if est.value > 0.0 {
        scale / (est.value * (1.0 + DEFAULT_POWER_REL_TOL))
    } else {
        1.0
    }
}

/// Hot-loop state for the iterated problem.
struct Iteration<'a> {
    a: &'a SparseMatrix,
    b: &'a [f64],
    c: &'a [f64],
    m_eq: usize,
    s: f64,
    aty: Vec<f64>,
    ax_next: Vec<f64>,
}

impl<'a> Iteration<'a> {
    fn new(a: &'a SparseMatrix, b: &'a [f64], c: &'a [f64], m_eq: usize, s: f64) -> Self {
        Iteration {
            a,
            b,
            c,
            m_eq,
            s,
            aty: vec![0.0; a.n_cols()],
            ax_next: vec![0.0; a.n_rows()],
        }
    }

    /// Advances `(x, y, ax)` in place and returns `‖z⁺ − z‖²_{P_s}`.
    fn advance(&mut self, x: &mut [f64], y: &mut [f64], ax: &mut [f64]) -> f64 {
        let s = self.s;
        self.a.matvec_transpose_into(y, &mut self.aty);
        let mut dx_sq = 0.0;
        let mut dx = vec![0.0; x.len()];
        for i in 0..x.len() {
            let nx = (x[i] - s * (self.c[i] - self.aty[i])).max(0.0);
            dx[i] = nx - x[i];
            dx_sq += dx[i] * dx[i];
            x[i] = nx;
        }
        self.a.matvec_into(x, &mut self.ax_next);
        let mut dy_sq = 0.0;
        let mut cross = 0.0;
        for j in 0..y.len() {
            let a_dx = self.ax_next[j] - ax[j];
            let mut ny = y[j] - s * (2.0 * self.ax_next[j] - ax[j] - self.b[j]);
            if j >= self.m_eq {
                ny = ny.min(0.0);
            }
            let dy = ny - y[j];
            dy_sq += dy * dy;
            cross += dy * a_dx;
            y[j] = ny;
            ax[j] = self.ax_next[j];
        }
        (dx_sq + dy_sq) / s + 2.0 * cross
    }
}

/// Runs PDHG on `gl` until the original-problem KKT residual drops to
/// `kkt_tol` (checked on the logging grid) or `max_iters` is reached.
pub fn solve(gl: &GeneralLp, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let n = gl.n();
    let m = gl.m();
    let a_orig = gl.stacked_matrix();
    let a_norm = a_orig
        .spectral_norm_estimate(DEFAULT_POWER_REL_TOL, DEFAULT_POWER_MAX_ITER, config.seed)
        .value;

    let (iterated, scaling) = if config.precondition {
        let pre = precondition(gl);
        (pre.lp, Some(pre.scaling))
    } else {
        (gl.clone(), None)
    };
    let a = iterated.stacked_matrix();
    let b = iterated.stacked_rhs();
    let s = match config.step_size {
        Some(s) => s,
        None => scaled_step_size(&a, config.step_scale, config.seed),
    };

    let z0 = match &config.initial_point {
        Some(z) => {
            if z.x.len() != n || z.y.len() != m {
                return Err(Error::DimensionMismatch {
                    context: "initial point",
                    expected: n + m,
                    actual: z.x.len() + z.y.len(),
                });
            }
            match &scaling {
                Some(sc) => sc.scale(z),
                None => z.clone(),
            }
        }
        None => PrimalDualPoint::zeros(n, m),
    };
    let to_original = |x: &[f64], y: &[f64]| -> PrimalDualPoint {
        let z = PrimalDualPoint::new(x.to_vec(), y.to_vec());
        match &scaling {
            Some(sc) => sc.unscale(&z),
            None => z,
        }
    };

    let start = Instant::now();
    let run = |observe: &mut dyn FnMut(usize, &PrimalDualPoint, f64) -> bool| -> (PrimalDualPoint, SolveStatus, usize) {
        let mut it = Iteration::new(&a, &b, &iterated.c, iterated.m_eq(), s);
        let (mut x, mut y) = (z0.x.clone(), z0.y.clone());
        let mut ax = a.matvec(&x).expect("dimensions checked");
        let mut k = 0;
        loop {
            let on_grid = k % config.log_every == 0 || k == config.max_iters;
            let z_orig = on_grid.then(|| to_original(&x, &y));
            let (x_prev, y_prev, ax_prev) = (x.clone(), y.clone(), ax.clone());
            let step_sq = it.advance(&mut x, &mut y, &mut ax);
            let finite = x.iter().chain(&y).all(|v| v.is_finite()) && step_sq.is_finite();
            if let Some(z) = &z_orig {
                let step = step_sq.max(0.0).sqrt();
                let stop = observe(k, z, if finite { step } else { f64::NAN });
                if stop || k == config.max_iters {
                    let status = if stop { SolveStatus::OptimalTol } else { SolveStatus::IterLimit };
                    return (z.clone(), status, k);
                }
            }
            if !finite {
                let _ = ax_prev;
                return (to_original(&x_prev, &y_prev), SolveStatus::NumericalError, k);
            }
            k += 1;
        }
    };

    let mut records: Vec<IterateRecord> = Vec::new();
    let mut observe = |k: usize, z: &PrimalDualPoint, step: f64| -> bool {
        let kkt = gl.kkt_residual(z);
        let reduced: Vec<f64> = {
            let aty = a_orig.matvec_transpose(&z.y).expect("dimensions");
            gl.c.iter().zip(&aty).map(|(c, v)| c - v).collect()
        };
        let thresh = config.mask_tol * a_norm;
        records.push(IterateRecord {
            k,
            kkt,
            ps_step_norm: step,
            dist_to_final: f64::NAN,
            active_primal: ActiveMask::from_fn(n, |i| z.x[i] > 0.0),
            active_dualslack: ActiveMask::from_fn(n, |i| reduced[i] > thresh),
            elapsed_secs: start.elapsed().as_secs_f64(),
            iterate: config.record_iterates.then(|| z.clone()),
        });
        kkt <= config.kkt_tol
    };
    let (z_final, status, iterations) = run(&mut observe);

    if config.record_iterates {
        for r in &mut records {
            r.dist_to_final = r.iterate.as_ref().map_or(f64::NAN, |z| z.distance(&z_final));
        }
    } else {
        // deterministic replay to fill distances without storing iterates
        let mut idx = 0;
        let mut fill = |_: usize, z: &PrimalDualPoint, _: f64| -> bool {
            if idx < records.len() {
                records[idx].dist_to_final = z.distance(&z_final);
            }
            idx += 1;
            idx >= records.len()
        };
        if status != SolveStatus::NumericalError {
            run(&mut fill);
        }
    }
    if let (SolveStatus::NumericalError, Some(last)) = (status, records.last_mut()) {
        last.dist_to_final = 0.0;
    }

    Ok(SolveResult {
        z_final,
        status,
        iterations,
        log: IterateLog { records },
        step_size: s,
        a_norm,
        scaling,
    })
}

/// Convenience wrapper for standard-form problems.
pub fn solve_standard(lp: &StandardLp, config: &SolverConfig) -> Result<SolveResult> {
    solve(&lp.to_general(), config)
}
