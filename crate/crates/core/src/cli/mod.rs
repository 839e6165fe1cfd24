//! Batch front end: `hubbard-lab <command> --config <path> [--out <dir>]
//! [--workers N] [--seed S]`.
//!
//! Every command stages its outputs in memory and writes them atomically
//! once it has succeeded. Grid commands (`ed`, `dyson-certify`, `sweep`)
//! expand list-valued keys into a Cartesian product and run the points on
//! `workers` threads; a failed point is recorded and the others continue.
//! Each CSV starts with a `# hubbard-lab <version> config_hash=<hex>` line
//! and each JSON object carries `version` and `config_hash`.

pub mod config;
mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

pub use config::{parse_config, Command, RunConfig};
pub use output::{write_atomic, VERSION};

use crate::error::{Error, Result};
use crate::hubbard::{
    interaction_shift, lt_suite, trace_bound_check, SolveOptions, SHIFT_CSV_HEADER,
};
use crate::ideal_fermi::energy_density;
use crate::lattice::LatticePoint;
use crate::scattering::{
    equation_residual, identity_ap, identity_ap2, phi_table, verify_decay, watson_gamma, Coupling,
    PhiCache, ScatteringParams,
};
use crate::soft_potential::{
    build_filter, build_soft_set, certify_corollary, certify_lemma1, scaling_report, ses_margin,
    FilterPair,
};
use output::Staged;

/// Tolerance of the Green's-constant quadrature feeding `a`.
const GAMMA_TOL: f64 = 1e-10;

pub const CERTIFY_CSV_HEADER: &str = "g,R,s,eps,eta,C_V,Lambda,min_eig,pass";
pub const EOS_CSV_HEADER: &str = "rho,E_f,e,err_e";

/// Summary of a run, also written as `record.json`.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub command: String,
    pub version: &'static str,
    pub config_hash: String,
    pub parameters: BTreeMap<String, String>,
    pub seed: u64,
    pub workers: usize,
    pub outputs: Vec<String>,
    pub failed_points: usize,
    /// The only field that differs between identical runs.
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn success(&self) -> bool {
        self.failed_points == 0
    }
}

/// Runs a validated configuration and writes its artifacts under `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<ResultRecord> {
    let start = Instant::now();
    let mut staged = Staged::new(cfg.hash());
    let failed = match cfg.command {
        Command::Gamma => gamma(cfg, &mut staged).map(|_| 0)?,
        Command::Scatter => scatter(cfg, &mut staged).map(|_| 0)?,
        Command::Phi => phi(cfg, &mut staged).map(|_| 0)?,
        Command::Eos => eos(cfg, &mut staged).map(|_| 0)?,
        Command::Filter => filter(cfg, &mut staged).map(|_| 0)?,
        Command::LtCheck => lt(cfg, &mut staged).map(|_| 0)?,
        Command::TraceCheck => trace(cfg, &mut staged).map(|_| 0)?,
        Command::Ed | Command::DysonCertify | Command::Sweep => grid(cfg, &mut staged)?,
    };
    std::fs::create_dir_all(&cfg.out)?;
    let outputs = staged.commit(&cfg.out)?;
    let record = ResultRecord {
        command: cfg.command.name().to_string(),
        version: VERSION,
        config_hash: cfg.hash(),
        parameters: cfg.params.clone(),
        seed: cfg.seed,
        workers: cfg.workers,
        outputs,
        failed_points: failed,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_atomic(
        &cfg.out.join("record.json"),
        serde_json::to_string_pretty(&record)?.as_bytes(),
    )?;
    Ok(record)
}

fn gamma_value() -> Result<f64> {
    Ok(watson_gamma(GAMMA_TOL)?.gamma)
}

fn gamma(cfg: &RunConfig, out: &mut Staged) -> Result<()> {
    let est = watson_gamma(cfg.float("tol"))?;
    out.json(
        "gamma.json",
        json!({
            "gamma": est.gamma,
            "err": est.err,
            "method_a": est.method_a,
            "method_b": est.method_b,
            "a_infinity": 1.0 / (8.0 * std::f64::consts::PI * est.gamma),
        }),
    );
    Ok(())
}

fn scatter(cfg: &RunConfig, out: &mut Staged) -> Result<()> {
    let gamma = gamma_value()?;
    let (r_max, grid, tol) = (
        cfg.int("r_max") as u32,
        cfg.int("grid") as u32,
        cfg.float("tol"),
    );
    let mut entries = Vec::new();
    for g in cfg.couplings("g") {
        let params = ScatteringParams::new(g, gamma)?;
        let sol = phi_table(params, r_max, grid, tol)?;
        let surface: Vec<Value> = cfg
            .ints("radii")
            .iter()
            .map(|&r| -> Result<Value> {
                let sum = identity_ap2(&sol, r as u32)?;
                Ok(json!({"r": r, "surface_sum": sum, "four_pi_a": 4.0 * std::f64::consts::PI * params.a}))
            })
            .collect::<Result<_>>()?;
        let phi0 = sol.phi(LatticePoint::ORIGIN);
        entries.push(json!({
            "g": g,
            "a": params.a,
            "phi0": phi0,
            "phi0_expected": params.phi_at_origin(),
            "equation_residual": equation_residual(&sol),
            "max_quadrature_error": sol.max_error,
            "ball_identity": identity_ap(&sol),
            "surface_identity": surface,
            "decay": verify_decay(&sol),
        }));
    }
    out.json(
        "scatter.json",
        json!({"gamma": gamma, "r_max": r_max, "grid": grid, "couplings": entries}),
    );
    Ok(())
}

fn phi(cfg: &RunConfig, out: &mut Staged) -> Result<()> {
    let gamma = gamma_value()?;
    let g = cfg.coupling("g");
    let (r_max, grid, tol) = (
        cfg.int("r_max") as u32,
        cfg.int("grid") as u32,
        cfg.float("tol"),
    );
    let params = ScatteringParams::new(g, gamma)?;
    let cache = PhiCache::new(cfg.out.join("phi_cache"));
    let sol = cache.load_or_compute(params, r_max, grid, tol)?;
    let mut rows = Vec::new();
    let r = r_max as i64;
    for x in 0..=r {
        for y in x..=r {
            for z in y..=r {
                rows.push(format!(
                    "{x},{y},{z},{}",
                    sol.phi(LatticePoint::new(x, y, z))
                ));
            }
        }
    }
    out.csv("phi.csv", "x1,x2,x3,phi", rows);
    let table = cache.path_for(g, r_max, grid);
    out.json(
        "phi.json",
        json!({
            "g": g,
            "gamma": gamma,
            "a": params.a,
            "r_max": r_max,
            "grid": grid,
            "tail_coefficient": sol.tail_coefficient,
            "max_quadrature_error": sol.max_error,
            "equation_residual": equation_residual(&sol),
            "table": table.strip_prefix(&cfg.out).unwrap_or(&table),
        }),
    );
    Ok(())
}

fn eos(cfg: &RunConfig, out: &mut Staged) -> Result<()> {
    let rows = cfg
        .floats("rho")
        .into_iter()
        .map(|rho| {
            let p = energy_density(rho)?;
            // fixed 1e-10 absolute precision
            Ok(format!(
                "{:.10},{:.10},{:.10},{:.10}",
                p.rho, p.fermi_energy, p.energy_density, p.err
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    out.csv("eos.csv", EOS_CSV_HEADER, rows);
    Ok(())
}

fn lambda_for(s: f64, factor: u64) -> usize {
    ((factor as f64 * s).ceil() as usize).next_multiple_of(2)
}

fn filter(cfg: &RunConfig, out: &mut Staged) -> Result<()> {
    let factor = cfg.int("lambda_factor");
    let ss = cfg.floats("s");
    let rs: Vec<u32> = cfg.ints("R").iter().map(|&r| r as u32).collect();
    let mut filters = Vec::new();
    for &s in &ss {
        let pair = build_filter(s, lambda_for(s, factor))?;
        filters.push(json!({
            "s": s,
            "lambda": pair.lambda,
            "l1_norm": pair.l1_norm,
            "mass": pair.mass,
            "truncation": pair.truncation,
            "imag_residue": pair.imag_residue,
            "ses_margin": ses_margin(s, cfg.float("rho"))?,
        }));
    }
    let report = scaling_report(&rs, &ss, factor as usize)?;
    let rows = report
        .points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{},{},{}",
                p.r, p.s, p.lambda, p.w_max, p.w_sum, p.separated_max, p.spacing
            )
        })
        .collect();
    out.csv(
        "w_scaling.csv",
        "R,s,Lambda,w_max,w_sum,separated_max,spacing",
        rows,
    );
    out.json(
        "filter.json",
        json!({
            "filters": filters,
            "w_max_exponents": report.w_max_exponents,
            "w_sum_exponents": report.w_sum_exponents,
            "separated_exponents": report.separated_exponents,
            "within_20pct": report.within_20pct,
        }),
    );
    Ok(())
}

fn lt(cfg: &RunConfig, out: &mut Staged) -> Result<()> {
    let reports = lt_suite(cfg.int("L") as usize)?;
    let rows = reports
        .iter()
        .map(|r| {
            let (shape, height, range) = match r.shape {
                crate::hubbard::LtShape::Step { height, range } => ("step", height, range),
                crate::hubbard::LtShape::Exponential { height, length } => {
                    ("exponential", height, length)
                }
            };
            format!(
                "{shape},{height},{range},{},{},{},{},{}",
                r.l, r.min_eig, r.bound, r.slack, r.holds
            )
        })
        .collect();
    out.csv(
        "lt.csv",
        "shape,height,range,L,min_eig,bound,slack,holds",
        rows,
    );
    let violations = reports.iter().filter(|r| !r.holds).count();
    out.json(
        "lt.json",
        json!({"instances": reports.len(), "violations": violations}),
    );
    Ok(())
}

fn trace(cfg: &RunConfig, out: &mut Staged) -> Result<()> {
    let delta = match cfg.get("delta") {
        "random" => None,
        d => Some(d.parse::<f64>().expect("validated float")),
    };
    let report = trace_bound_check(cfg.seed, delta, cfg.int("instances") as usize)?;
    out.json("trace.json", serde_json::to_value(report)?);
    Ok(())
}

/// One point of a grid command.
#[derive(Clone, Debug)]
enum Job {
    Ed {
        l: usize,
        n_u: usize,
        n_d: usize,
        g: Coupling,
    },
    Certify {
        g: Coupling,
        r: u32,
        s: Option<f64>,
        eps: f64,
        eta: f64,
        lambda: usize,
    },
}

impl Job {
    fn label(&self) -> Value {
        match self {
            Job::Ed { l, n_u, n_d, g } => json!({"L": l, "N_u": n_u, "N_d": n_d, "g": g}),
            Job::Certify {
                g,
                r,
                s,
                eps,
                eta,
                lambda,
            } => {
                json!({"g": g, "R": r, "s": s, "eps": eps, "eta": eta, "Lambda": lambda})
            }
        }
    }
}

fn expand(cfg: &RunConfig) -> Result<Vec<Job>> {
    let mut jobs = Vec::new();
    match cfg.target() {
        Command::Ed => {
            for l in cfg.ints("L") {
                for n_u in cfg.ints("N_u") {
                    for n_d in cfg.ints("N_d") {
                        for g in cfg.couplings("g") {
                            jobs.push(Job::Ed {
                                l: l as usize,
                                n_u: n_u as usize,
                                n_d: n_d as usize,
                                g,
                            });
                        }
                    }
                }
            }
        }
        Command::DysonCertify => {
            for g in cfg.couplings("g") {
                for r in cfg.ints("R") {
                    for s in cfg.scales("s") {
                        for eps in cfg.floats("eps") {
                            for eta in cfg.floats("eta") {
                                for lambda in cfg.ints("lambda") {
                                    jobs.push(Job::Certify {
                                        g,
                                        r: r as u32,
                                        s,
                                        eps,
                                        eta,
                                        lambda: lambda as usize,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        other => {
            return Err(Error::Config(vec![format!(
                "`{other}` is not a grid command"
            )]))
        }
    }
    if jobs.is_empty() {
        return Err(Error::Config(vec!["empty grid".into()]));
    }
    Ok(jobs)
}

struct PointResult {
    rows: Vec<String>,
    detail: Value,
}

fn run_job(job: &Job, cfg: &RunConfig, gamma: f64) -> Result<PointResult> {
    match *job {
        Job::Ed { l, n_u, n_d, g } => {
            let opts = SolveOptions {
                tol: cfg.float("tol"),
                seed: cfg.seed,
            };
            let row = interaction_shift(l, n_u, n_d, g, gamma, &opts)?;
            Ok(PointResult {
                rows: vec![row.csv_record()],
                detail: serde_json::to_value(&row)?,
            })
        }
        Job::Certify {
            g,
            r,
            s,
            eps,
            eta,
            lambda,
        } => {
            let params = ScatteringParams::new(g, gamma)?;
            let pair = match s {
                None => FilterPair::trivial(lambda)?,
                Some(s) => build_filter(s, lambda)?,
            };
            let set = build_soft_set(&pair, r, eps, eta)?;
            let corollary = cfg.get("form") == "corollary";
            let centres: Vec<LatticePoint> = {
                let k = cfg.int("centres").max(1) as i64;
                let step = lambda as i64 / k;
                (0..k)
                    .map(|i| LatticePoint::new(i * step, i * step, i * step))
                    .collect()
            };
            let mut c_vs = cfg.floats("C_V");
            c_vs.sort_by(f64::total_cmp);
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            let mut threshold = None;
            // a larger C_V only weakens the right-hand side: stop at the first pass
            for c_v in c_vs {
                let rep = if corollary {
                    certify_corollary(&params, &pair, &set, &centres, c_v)?
                } else {
                    certify_lemma1(&params, &pair, &set, c_v)?
                };
                let s_text = s.map_or("none".to_string(), |s| s.to_string());
                rows.push(format!(
                    "{},{},{},{},{},{},{},{},{}",
                    g, r, s_text, eps, eta, c_v, lambda, rep.min_eig, rep.pass
                ));
                let pass = rep.pass;
                reports.push(rep);
                if pass {
                    threshold = Some(c_v);
                    break;
                }
            }
            Ok(PointResult {
                rows,
                detail: json!({"threshold_C_V": threshold, "reports": reports}),
            })
        }
    }
}

/// Runs every point on `cfg.workers` threads; results come back in grid
/// order whatever the scheduling.
fn run_points(jobs: &[Job], cfg: &RunConfig, gamma: f64) -> Vec<Result<PointResult>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<PointResult>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..cfg.workers.min(jobs.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let result = run_job(&jobs[i], cfg, gamma);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every point ran"))
        .collect()
}

fn grid(cfg: &RunConfig, out: &mut Staged) -> Result<usize> {
    let jobs = expand(cfg)?;
    let gamma = gamma_value()?;
    let results = run_points(&jobs, cfg, gamma);
    let (name, header) = match cfg.target() {
        Command::Ed => ("ed", SHIFT_CSV_HEADER),
        _ => ("certify", CERTIFY_CSV_HEADER),
    };
    let sweep = cfg.command == Command::Sweep;
    let mut rows = Vec::new();
    let mut details = Vec::new();
    let mut manifest = Vec::new();
    let mut failed = 0;
    for (i, (job, result)) in jobs.iter().zip(results).enumerate() {
        match result {
            Ok(p) => {
                if sweep {
                    let file = format!("points/{name}_{i:04}.csv");
                    out.csv(&file, header, p.rows.clone());
                    manifest.push(
                        json!({"index": i, "point": job.label(), "status": "ok", "file": file}),
                    );
                }
                rows.extend(p.rows);
                details.push(json!({"point": job.label(), "result": p.detail}));
            }
            Err(e) => {
                failed += 1;
                manifest.push(json!({"index": i, "point": job.label(), "status": "failed", "error": e.to_string()}));
                details.push(json!({"point": job.label(), "error": e.to_string()}));
            }
        }
    }
    out.csv(&format!("{name}.csv"), header, rows);
    out.json(
        &format!("{name}.json"),
        json!({"gamma": gamma, "points": details}),
    );
    if sweep {
        out.json(
            "manifest.json",
            json!({"target": cfg.target().name(), "points": manifest, "failed": failed}),
        );
    }
    Ok(failed)
}

/// Reads, validates and applies command-line overrides.
pub fn load_config(
    command: &str,
    path: &Path,
    out: Option<PathBuf>,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<RunConfig> {
    let command: Command = command.parse()?;
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    if cfg.command != command {
        return Err(Error::Config(vec![format!(
            "command `{command}` does not match the config section `[{}]`",
            cfg.command
        )]));
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Config(vec!["`--workers` must be >= 1".into()]));
        }
        cfg.workers = w;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}
