use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use pdhg_lp::identification::{identification_moment, IdentificationReport};
use pdhg_lp::instances::{house, perturb};
use pdhg_lp::model::{delta_metric, identification_radius, partition_with_norm, to_standard, DEFAULT_PARTITION_TOL};
use pdhg_lp::pdhg::{solve_standard, IterateLog};
use pdhg_lp::sharpness::{
    build_kkt_system, build_system_31, build_system_44, empirical_sharpness, homogeneous_report, hoffman_brute_force,
    HomogeneousSharpnessReport,
};
use pdhg_lp::{Error, GeneralLp, PrimalDualPoint, SolveResult, SolveStatus, StandardLp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance;
use crate::svg::{Plot, Series};
use crate::SolverArgs;

/// Homogeneous-system reports are skipped above this `n + m`.
const HOMOGENEOUS_LIMIT: usize = 40;
const ANGLE_SAMPLES: usize = 50;
/// Probe scales (times `1 + ‖z*‖`) for the empirical sharpness estimate.
const PROBE_SCALES: [f64; 5] = [1e-3, 1e-1, 10.0, 1e3, 1e5];
const MAX_PROBE_COORDS: usize = 40;
const RANDOM_PROBES: usize = 10;

fn exit_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::OptimalTol => 0,
        SolveStatus::IterLimit => 2,
        SolveStatus::NumericalError => 1,
    }
}

fn timestamp(disabled: bool) -> Option<u64> {
    if disabled {
        None
    } else {
        SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing '{}'", path.display()))
}

fn kkt_series(label: String, log: &IterateLog) -> Series {
    Series {
        label,
        points: log.records.iter().map(|r| (r.k as f64, r.kkt)).collect(),
    }
}

fn summary(res: &SolveResult, objective: f64) -> String {
    let kkt = res.log.last().map_or(f64::NAN, |r| r.kkt);
    format!(
        "status: {}\niterations: {}\nkkt: {:e}\nobjective: {}\n",
        res.status.as_str(),
        res.iterations,
        kkt,
        objective
    )
}

/// The standard form the diagnostics work on: the problem itself when it has
/// no inequality rows, otherwise its slack reformulation.
fn standard_form(gl: &GeneralLp) -> StandardLp {
    gl.as_standard().unwrap_or_else(|| to_standard(gl).0)
}

pub fn solve(spec: &str, args: &SolverArgs) -> Result<u8> {
    let inst = instance::load(spec)?;
    let cfg = args.config(1e-8)?;
    let res = pdhg_lp::solve(&inst.lp, &cfg)?;
    print!("instance: {}\n{}", inst.name, summary(&res, inst.lp.objective(&res.z_final.x)));
    if let Some(path) = &args.log {
        write_file(path, &res.log.to_csv())?;
    }
    if res.status == SolveStatus::NumericalError {
        eprintln!("error: iterates stopped being finite");
    }
    Ok(exit_code(res.status))
}

/// Homogeneous report or the reason it is missing.
fn try_report(
    build: impl FnOnce() -> pdhg_lp::Result<pdhg_lp::sharpness::PolyhedralSystem>,
    seed: u64,
) -> std::result::Result<HomogeneousSharpnessReport, String> {
    let sys = build().map_err(|e| e.to_string())?;
    homogeneous_report(&sys, ANGLE_SAMPLES, seed).map_err(|e| e.to_string())
}

fn certified_lower(rep: &std::result::Result<HomogeneousSharpnessReport, String>) -> f64 {
    match rep {
        Ok(r) if r.alpha_lower_certified() => r.alpha_lower,
        _ => 0.0,
    }
}

fn report_section(out: &mut String, prefix: &str, rep: &std::result::Result<HomogeneousSharpnessReport, String>) {
    match rep {
        Ok(r) => out.push_str(&r.to_kv_text(prefix)),
        Err(e) => writeln!(out, "{prefix}unavailable: {e}").unwrap(),
    }
}

pub fn two_stage(
    spec: &str,
    args: &SolverArgs,
    report_path: Option<&Path>,
    plot_path: Option<&Path>,
    no_timestamp: bool,
) -> Result<u8> {
    let inst = instance::load(spec)?;
    let cfg = args.config(1e-10)?;
    let lp = standard_form(&inst.lp);
    let res = solve_standard(&lp, &cfg)?;
    let z = &res.z_final;
    let part = partition_with_norm(&lp, z, DEFAULT_PARTITION_TOL, res.a_norm);
    let delta = delta_metric(&lp, z, &part, res.a_norm);
    let moment = identification_moment(&res.log, &part)?;
    let r = identification_radius(&PrimalDualPoint::zeros(lp.n(), lp.m()), z);
    let tight = lp
        .reduced_costs(&z.y)
        .iter()
        .filter(|&&v| v <= DEFAULT_PARTITION_TOL * res.a_norm)
        .count();

    let mut out = String::new();
    writeln!(out, "instance: {}", inst.name).unwrap();
    out.push_str(&summary(&res, lp.objective(&z.x)));
    writeln!(out, "preconditioned: {}", cfg.precondition).unwrap();
    writeln!(out, "step_size: {:e}", res.step_size).unwrap();
    writeln!(out, "a_norm: {:e}", res.a_norm).unwrap();
    writeln!(out, "N: {}", part.nonbasic.len()).unwrap();
    writeln!(out, "B1: {}", part.basic_nondegenerate.len()).unwrap();
    writeln!(out, "B2: {}", part.basic_degenerate.len()).unwrap();
    writeln!(out, "tight_dual_constraints: {tight}").unwrap();

    let (rep1, rep2) = if lp.n() + lp.m() <= HOMOGENEOUS_LIMIT {
        let r2 = delta.value + z.norm();
        (
            try_report(|| build_system_31(&lp, &part, r), args.seed),
            try_report(|| build_system_44(&lp, &part, r2), args.seed),
        )
    } else {
        let why = format!("n + m = {} exceeds {HOMOGENEOUS_LIMIT}", lp.n() + lp.m());
        (Err(why.clone()), Err(why))
    };
    // only certified constants feed the theoretical bounds
    let ident = IdentificationReport::new(
        moment,
        r,
        delta,
        certified_lower(&rep1),
        certified_lower(&rep2),
        res.step_size,
        res.a_norm,
    );
    out.push_str(&ident.to_kv_text());
    report_section(&mut out, "L1_", &rep1);
    report_section(&mut out, "L2_", &rep2);

    print!("{out}");
    if let Some(path) = report_path {
        write_file(path, &out)?;
    }
    if let Some(path) = &args.log {
        write_file(path, &res.log.to_csv())?;
    }
    if let Some(path) = plot_path {
        let plot = Plot {
            title: inst.name.clone(),
            x_label: "iteration".into(),
            y_label: "KKT residual".into(),
            series: vec![kkt_series("KKT".into(), &res.log)],
            markers: moment.map(|k| (k as f64, "identified".to_string())).into_iter().collect(),
        };
        write_file(path, &plot.render(timestamp(no_timestamp)))?;
    }
    Ok(exit_code(res.status))
}

pub fn house_sweep(kappas: &[f64], deltas: &[f64], out: &Path, args: &SolverArgs, no_timestamp: bool) -> Result<u8> {
    fs::create_dir_all(out).with_context(|| format!("creating '{}'", out.display()))?;
    let cfg = args.config(1e-8)?;
    let mut code = 0;
    for &kappa in kappas {
        let runs: Vec<Result<(f64, SolveResult, Option<usize>)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = deltas
                .iter()
                .map(|&delta| {
                    let cfg = &cfg;
                    scope.spawn(move || -> Result<(f64, SolveResult, Option<usize>)> {
                        let gl = house(kappa, delta)?;
                        let res = pdhg_lp::solve(&gl, cfg)?;
                        let lp = standard_form(&gl);
                        let part = partition_with_norm(&lp, &res.z_final, DEFAULT_PARTITION_TOL, res.a_norm);
                        let moment = identification_moment(&res.log, &part)?;
                        Ok((delta, res, moment))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
        });
        let mut series = Vec::new();
        for run in runs {
            let (delta, res, moment) = run?;
            let csv = out.join(format!("house_k{kappa}_d{delta}.csv"));
            write_file(&csv, &res.log.to_csv())?;
            let moment_text = moment.map_or("none".to_string(), |k| k.to_string());
            println!(
                "kappa={kappa} delta={delta} status={} iterations={} identification={moment_text}",
                res.status.as_str(),
                res.iterations
            );
            code = code.max(exit_code(res.status));
            series.push(kkt_series(format!("δ = {delta}"), &res.log));
        }
        let plot = Plot {
            title: format!("house, κ = {kappa}"),
            x_label: "iteration".into(),
            y_label: "KKT residual".into(),
            series,
            markers: Vec::new(),
        };
        write_file(&out.join(format!("house_k{kappa}.svg")), &plot.render(timestamp(no_timestamp)))?;
    }
    Ok(code)
}

/// A run that hit the iteration cap while its last tenth made no real
/// progress over the best residual seen before.
fn stagnated(res: &SolveResult) -> bool {
    if res.status != SolveStatus::IterLimit || res.log.records.len() < 20 {
        return false;
    }
    let split = res.log.records.len() * 9 / 10;
    let best = |rs: &[pdhg_lp::pdhg::IterateRecord]| rs.iter().map(|r| r.kkt).fold(f64::INFINITY, f64::min);
    best(&res.log.records[split..]) > 0.5 * best(&res.log.records[..split])
}

pub fn perturb_compare(spec: &str, sigma: f64, out: &Path, args: &SolverArgs, no_timestamp: bool) -> Result<u8> {
    let inst = instance::load(spec)?;
    let perturbed = perturb(&inst.lp, sigma, args.seed)?;
    fs::create_dir_all(out).with_context(|| format!("creating '{}'", out.display()))?;
    let cfg = args.config(1e-8)?;
    let (orig, pert) = std::thread::scope(|scope| {
        let a = scope.spawn(|| pdhg_lp::solve(&inst.lp, &cfg));
        let b = scope.spawn(|| pdhg_lp::solve(&perturbed, &cfg));
        (a.join().expect("solver thread panicked"), b.join().expect("solver thread panicked"))
    });
    let (orig, pert) = (orig?, pert?);
    write_file(&out.join("original.csv"), &orig.log.to_csv())?;
    write_file(&out.join("perturbed.csv"), &pert.log.to_csv())?;
    let plot = Plot {
        title: format!("{} vs perturbed (σ = {sigma:e})", inst.name),
        x_label: "iteration".into(),
        y_label: "KKT residual".into(),
        series: vec![
            kkt_series("original".into(), &orig.log),
            kkt_series("perturbed".into(), &pert.log),
        ],
        markers: Vec::new(),
    };
    write_file(&out.join("compare.svg"), &plot.render(timestamp(no_timestamp)))?;
    println!("original: {} iterations ({})", orig.iterations, orig.status.as_str());
    println!("perturbed: {} iterations ({})", pert.iterations, pert.status.as_str());
    if stagnated(&pert) {
        let kkt = pert.log.last().map_or(f64::NAN, |r| r.kkt);
        eprintln!("error: the perturbed instance looks infeasible: KKT residual stagnated at {kkt:e}");
        return Ok(3);
    }
    Ok(exit_code(orig.status).max(exit_code(pert.status)))
}

fn sharpness_probes(z: &PrimalDualPoint, seed: u64) -> Vec<Vec<f64>> {
    let center = z.concat();
    let dim = center.len();
    let scale = 1.0 + z.norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..dim.min(MAX_PROBE_COORDS) {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; dim];
            d[j] = sign;
            dirs.push(d);
        }
    }
    for _ in 0..RANDOM_PROBES {
        let d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            dirs.push(d.into_iter().map(|v| v / norm).collect());
        }
    }
    let mut probes = Vec::new();
    for d in &dirs {
        for t in PROBE_SCALES {
            probes.push(center.iter().zip(d).map(|(c, v)| c + t * scale * v).collect());
        }
    }
    probes
}

pub fn sharpness(spec: &str, brute_force_limit: usize, args: &SolverArgs) -> Result<u8> {
    let inst = instance::load(spec)?;
    let cfg = args.config(1e-8)?;
    let lp = standard_form(&inst.lp);
    let res = solve_standard(&lp, &cfg)?;
    let z = &res.z_final;
    let part = partition_with_norm(&lp, z, DEFAULT_PARTITION_TOL, res.a_norm);
    let delta = delta_metric(&lp, z, &part, res.a_norm);
    let r = identification_radius(&PrimalDualPoint::zeros(lp.n(), lp.m()), z);
    let kkt = build_kkt_system(&lp, r)?;

    println!("instance: {}", inst.name);
    print!("{}", summary(&res, lp.objective(&z.x)));
    println!("R: {r}");
    println!("delta: {}", delta.value);
    match empirical_sharpness(&kkt, &sharpness_probes(z, args.seed)) {
        Ok(a) => println!("alpha_empirical_upper: {a:e}"),
        Err(Error::NoInfeasibleProbe) => println!("alpha_empirical_upper: unavailable (every probe was feasible)"),
        Err(e) => return Err(e.into()),
    }
    match hoffman_brute_force(&kkt, brute_force_limit) {
        Ok(a) => println!("alpha_brute_force: {a:e}"),
        Err(Error::TooLarge { size, limit }) => println!("alpha_brute_force: skipped (size {size} exceeds limit {limit})"),
        Err(e) => return Err(e.into()),
    }
    let (rep1, rep2) = if lp.n() + lp.m() <= HOMOGENEOUS_LIMIT {
        let r2 = delta.value + z.norm();
        (
            try_report(|| build_system_31(&lp, &part, r), args.seed),
            try_report(|| build_system_44(&lp, &part, r2), args.seed),
        )
    } else {
        let why = format!("n + m = {} exceeds {HOMOGENEOUS_LIMIT}", lp.n() + lp.m());
        (Err(why.clone()), Err(why))
    };
    let mut out = String::new();
    report_section(&mut out, "L1_", &rep1);
    report_section(&mut out, "L2_", &rep2);
    print!("{out}");
    Ok(exit_code(res.status))
}
