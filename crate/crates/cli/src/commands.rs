use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use smart_core::data::{
    gen_homography, gen_pca, gen_softmax, gen_trimmed_ls, load_csv, overestimated_keep,
    score_detection, write_csv, CsvData, CsvFormat, DetectionScore,
};
use smart_core::plan::default_batch;
use smart_core::problems::{
    dlt_homography_normalized, fit_homography, homography_error, Correspondence, Residual,
    TrimmedHomography, TrimmedLS, TrimmedPCA, TrimmedSoftmax,
};
use smart_core::solver::{initial_state, RunOutcome};
use smart_core::stepsize::{auto_schedule, tau_for_variant};
use smart_core::{
    run, DynProblem, Exec, LogEvery, Loss, Method, Problem, RateRegime, Regularizer,
    SamplingPlan, StepSizeSchedule, StopRule,
};

use crate::config::{Config, Kind, Setting, StopConfig};
use crate::CliError;

/// Loss of any supported kind, plus what is known about the ground truth.
pub struct Dataset {
    pub loss: AnyLoss,
    pub truth: Option<Vec<bool>>,
    pub truth_h: Option<[f64; 9]>,
}

pub enum AnyLoss {
    Ls(TrimmedLS),
    Softmax(TrimmedSoftmax),
    Pca(TrimmedPCA),
    Homography(TrimmedHomography),
}

impl AnyLoss {
    fn count(&self) -> usize {
        match self {
            AnyLoss::Ls(l) => l.count(),
            AnyLoss::Softmax(l) => l.count(),
            AnyLoss::Pca(l) => l.count(),
            AnyLoss::Homography(l) => l.count(),
        }
    }
}

fn require<T: Copy>(value: Option<T>, field: &str, why: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("missing field `{field}` ({why})")))
}

fn residual_of(cfg: &Config) -> Result<Residual, CliError> {
    match cfg.problem.residual.as_str() {
        "direct" => Ok(Residual::Direct),
        "algebraic" => Ok(Residual::Algebraic),
        other => Err(CliError::Config(format!(
            "problem.residual: expected \"direct\" or \"algebraic\", got \"{other}\""
        ))),
    }
}

pub fn load_dataset(cfg: &Config) -> Result<Dataset, CliError> {
    let p = &cfg.problem;
    let seed = cfg.data_seed();
    if let Some(path) = &p.data {
        let path = cfg.resolve(path);
        let loss = match p.kind {
            Kind::Ls => match load_csv(&path, CsvFormat::Regression, None)? {
                CsvData::Regression { features, targets, p } => {
                    AnyLoss::Ls(TrimmedLS::new(features, targets, p)?)
                }
                _ => unreachable!("regression format"),
            },
            Kind::Softmax => match load_csv(&path, CsvFormat::Classification, p.classes)? {
                CsvData::Classification { features, labels, p, classes } => {
                    AnyLoss::Softmax(TrimmedSoftmax::new(features, labels, p, classes)?)
                }
                _ => unreachable!("classification format"),
            },
            Kind::Pca => match load_csv(&path, CsvFormat::Matrix, None)? {
                // one example per row
                CsvData::Matrix { data, cols, .. } => {
                    let rank = require(p.rank, "problem.rank", "target rank of trimmed PCA")?;
                    AnyLoss::Pca(TrimmedPCA::new(data, cols, rank)?)
                }
                _ => unreachable!("matrix format"),
            },
            Kind::Homography => match load_csv(&path, CsvFormat::Correspondences, None)? {
                CsvData::Correspondences(pairs) => {
                    AnyLoss::Homography(TrimmedHomography::new(pairs)?.with_residual(residual_of(cfg)?))
                }
                _ => unreachable!("correspondence format"),
            },
        };
        let truth = match &p.truth {
            Some(t) => Some(load_mask(&cfg.resolve(t), loss.count())?),
            None => None,
        };
        return Ok(Dataset {
            loss,
            truth,
            truth_h: None,
        });
    }

    let why = "needed for synthetic data";
    let n = require(p.n, "problem.n", why)?;
    let ds = match p.kind {
        Kind::Ls => {
            let d = gen_trimmed_ls(n, require(p.p, "problem.p", why)?, p.outlier_frac, p.noise.unwrap_or(0.1), seed)?;
            Dataset {
                loss: AnyLoss::Ls(d.problem()),
                truth: Some(d.outliers),
                truth_h: None,
            }
        }
        Kind::Softmax => {
            let classes = require(p.classes, "problem.classes", why)?;
            let clean = gen_softmax(n, require(p.p, "problem.p", why)?, classes, p.separation, seed)?;
            let d = clean.contaminated(p.outlier_frac, seed.wrapping_add(1000));
            Dataset {
                loss: AnyLoss::Softmax(d.problem()),
                truth: Some(d.outliers),
                truth_h: None,
            }
        }
        Kind::Pca => {
            let rank = require(p.rank, "problem.rank", why)?;
            let m = require(p.p, "problem.p", "rows of the data matrix")?;
            let d = gen_pca(m, n, rank, p.outlier_frac, p.magnitude, p.noise.unwrap_or(0.05), seed)?;
            Dataset {
                loss: AnyLoss::Pca(d.problem(rank)?),
                truth: Some(d.outliers),
                truth_h: None,
            }
        }
        Kind::Homography => {
            let scene = gen_homography(n, p.outlier_frac, p.noise.unwrap_or(0.0), seed)?;
            Dataset {
                loss: AnyLoss::Homography(scene.problem().with_residual(residual_of(cfg)?)),
                truth: Some(scene.outliers),
                truth_h: Some(scene.truth),
            }
        }
    };
    Ok(ds)
}

fn load_mask(path: &Path, n: usize) -> Result<Vec<bool>, CliError> {
    let text = fs::read_to_string(path)?;
    let mut mask = Vec::with_capacity(n);
    for (i, line) in text.lines().enumerate() {
        match line.trim() {
            "" => continue,
            "0" => mask.push(false),
            "1" => mask.push(true),
            other if i == 0 && other.parse::<f64>().is_err() => continue,
            other => {
                return Err(CliError::Config(format!(
                    "{} line {}: expected 0 or 1, got \"{other}\"",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if mask.len() != n {
        return Err(CliError::Config(format!(
            "{}: mask has {} entries for {n} examples",
            path.display(),
            mask.len()
        )));
    }
    Ok(mask)
}

fn keep_count(cfg: &Config, n: usize) -> Result<f64, CliError> {
    match &cfg.problem.keep {
        Setting::Number(f) if *f > 0.0 && *f <= 1.0 => Ok(f * n as f64),
        Setting::Word(w) if w == "overestimate" => Ok(overestimated_keep(n, cfg.problem.outlier_frac)),
        other => Err(CliError::Config(format!(
            "problem.keep: expected a fraction in (0, 1] or \"overestimate\", got {other:?}"
        ))),
    }
}

fn exec_of(cfg: &Config) -> Result<Exec, CliError> {
    match cfg.solver.exec.as_str() {
        "parallel" => Ok(Exec::Parallel),
        "sequential" => Ok(Exec::Sequential),
        other => Err(CliError::Config(format!(
            "solver.exec: expected \"parallel\" or \"sequential\", got \"{other}\""
        ))),
    }
}

fn model_regularizer(cfg: &Config, loss: &AnyLoss) -> Regularizer {
    let n = loss.count();
    let ridge = |lambda: f64| {
        if lambda > 0.0 {
            Regularizer::ridge_per_example(lambda, n)
        } else {
            Regularizer::Zero
        }
    };
    match loss {
        AnyLoss::Ls(_) | AnyLoss::Softmax(_) => ridge(cfg.problem.ridge),
        AnyLoss::Pca(l) => Regularizer::Stiefel {
            rows: l.rows(),
            cols: l.rank(),
        },
        AnyLoss::Homography(_) => Regularizer::FrobeniusSphere,
    }
}

/// Problem ready to solve: type-erased loss, starting model, ground truth.
pub struct Prepared {
    pub problem: DynProblem,
    pub x0: Vec<f64>,
    pub truth: Option<Vec<bool>>,
}

pub fn prepare(cfg: &Config) -> Result<Prepared, CliError> {
    let ds = load_dataset(cfg)?;
    let n = ds.loss.count();
    let reg_w = Regularizer::CappedSimplex { h: keep_count(cfg, n)? };
    let reg_x = model_regularizer(cfg, &ds.loss);
    let (loss, x0): (Box<dyn Loss>, Vec<f64>) = match ds.loss {
        AnyLoss::Ls(l) => {
            let d = l.width();
            (Box::new(l), vec![0.0; d])
        }
        AnyLoss::Softmax(l) => {
            let d = l.width() * l.classes();
            (Box::new(l), vec![0.0; d])
        }
        AnyLoss::Pca(l) => {
            let (u0, _) = l.svd_start()?;
            (Box::new(l), u0)
        }
        AnyLoss::Homography(l) => {
            let r = 1.0 / 3f64.sqrt();
            (Box::new(l), vec![r, 0.0, 0.0, 0.0, r, 0.0, 0.0, 0.0, r])
        }
    };
    let problem = Problem::new(loss, reg_w, reg_x)?.with_exec(exec_of(cfg)?);
    Ok(Prepared {
        problem,
        x0,
        truth: ds.truth,
    })
}

/// The solver named `name` and the plan whose theorem-driven step sizes it
/// uses when the schedule says `"auto"`.
pub fn build_method(cfg: &Config, name: &str, n: usize) -> Result<(Method, SamplingPlan), CliError> {
    let seed = cfg.solver.seed;
    let batch = match cfg.plan.batch.number_or_auto("plan.batch")? {
        None => default_batch(n),
        Some(b) if b >= 1.0 && b.fract() == 0.0 && b as usize <= n => b as usize,
        Some(b) => {
            return Err(CliError::Config(format!(
                "plan.batch: expected an integer in 1..={n}, got {b}"
            )))
        }
    };
    let q = cfg.plan.q.number_or_auto("plan.q")?;
    if let Some(q) = q {
        if !(q > 0.0 && q < 1.0) {
            return Err(CliError::Config(format!("plan.q: expected 0 < q < 1, got {q}")));
        }
    }
    let with_q = |plan: SamplingPlan| match q {
        Some(q) => plan.with_q(q),
        None => plan,
    };
    let full = with_q(SamplingPlan::full(n, seed));
    Ok(match name {
        "saga" => {
            let plan = with_q(SamplingPlan::saga(n, batch, seed));
            (Method::Smart(plan.clone()), plan)
        }
        "svrg" => {
            let plan = with_q(SamplingPlan::svrg(n, batch, seed));
            (Method::Smart(plan.clone()), plan)
        }
        "full" => (Method::Smart(full.clone()), full),
        "palm" => (Method::Palm, full),
        "pspg" => (Method::Pspg { seed }, full),
        "sg" => {
            let q = q.unwrap_or(SamplingPlan::svrg(n, batch, seed).q);
            (Method::Sg { batch, q, seed }, full)
        }
        other => {
            return Err(CliError::Config(format!(
                "solver.method: unknown method \"{other}\" (expected saga, svrg, full, palm, pspg or sg)"
            )))
        }
    })
}

pub fn build_schedule<L: Loss>(
    cfg: &Config,
    plan: &SamplingPlan,
    problem: &Problem<L>,
) -> Result<StepSizeSchedule, CliError> {
    let s = &cfg.schedule;
    let regime = match s.regime.as_str() {
        "sublinear" => RateRegime::Sublinear,
        "linear" => RateRegime::Linear,
        other => {
            return Err(CliError::Config(format!(
                "schedule.regime: expected \"sublinear\" or \"linear\", got \"{other}\""
            )))
        }
    };
    let auto = auto_schedule(plan, problem, s.epsilon0, regime)?;
    let n = problem.n();
    let gamma = match s.gamma_per_l {
        Some(c) => c / problem.lipschitz_max(),
        None => s.gamma.number_or_auto("schedule.gamma")?.unwrap_or(auto.gamma),
    };
    let eta = s.eta.number_or_auto("schedule.eta")?.unwrap_or(auto.eta);
    let tau = match (s.tau_per_n, s.tau.number_or_auto("schedule.tau")?) {
        (Some(c), _) => c * n as f64,
        (None, Some(t)) => t,
        (None, None) if gamma == auto.gamma && eta == auto.eta => auto.tau,
        (None, None) => tau_for_variant(
            plan.policy,
            gamma,
            eta,
            n,
            plan.effective_batch(n),
            problem.reg_w.prox_guard(),
        )?,
    };
    Ok(StepSizeSchedule {
        gamma,
        tau,
        eta,
        epsilon0: s.epsilon0,
    })
}

pub fn stop_rule(stop: &StopConfig) -> StopRule {
    StopRule {
        max_epochs: stop.max_epochs,
        stationarity_tol: stop.stationarity_tol,
        log_every: match stop.log_every_iterations {
            Some(k) => LogEvery::Iterations(k),
            None => LogEvery::Epochs(stop.log_every_epochs.unwrap_or(1.0)),
        },
        max_iterations: stop.max_iterations,
    }
}

fn detection_json(score: Option<DetectionScore>) -> Value {
    match score {
        Some(s) => json!({
            "detection": s.detection,
            "false_positive": s.false_positive,
            "flagged": s.flagged,
        }),
        None => Value::Null,
    }
}

fn outcome_json(name: &str, method: &Method, sched: &StepSizeSchedule, out: &RunOutcome, truth: Option<&[bool]>) -> Value {
    let last = out.record.last();
    let plan = match method {
        Method::Smart(p) => json!({ "policy": p.policy.name(), "batch": p.batch, "q": p.q }),
        Method::Sg { batch, q, .. } => json!({ "batch": batch, "q": q }),
        _ => Value::Null,
    };
    json!({
        "method": name,
        "final_objective": last.map(|e| e.objective),
        "best_objective": out.record.best_objective,
        "stop_reason": format!("{:?}", out.record.stop_reason),
        "iterations": out.state.k,
        "epochs": last.map(|e| e.epoch),
        "counters": last.map(|e| json!({
            "grad_evals": e.counters.grad_evals,
            "fun_evals": e.counters.fun_evals,
            "prox1_evals": e.counters.prox_w_evals,
            "prox2_evals": e.counters.prox_x_evals,
        })),
        "kept": out.kept().len(),
        "wall_time_s": out.record.wall_time.as_secs_f64(),
        "schedule": { "gamma": sched.gamma, "tau": sched.tau, "eta": sched.eta, "epsilon0": sched.epsilon0 },
        "plan": plan,
        "detection": detection_json(truth.map(|t| score_detection(&out.state.w, t))),
    })
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn out_dir(cfg: &Config, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => cfg.resolve(&cfg.output.dir),
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Runs one solver; writes `trajectory.csv` and `summary.json`.
pub fn cmd_run(cfg: &Config, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let stop = stop_rule(cfg.stop()?);
    let prep = prepare(cfg)?;
    let n = prep.problem.n();
    let (method, plan) = build_method(cfg, &cfg.solver.method, n)?;
    let sched = build_schedule(cfg, &plan, &prep.problem)?;
    let init = initial_state(&prep.problem, prep.x0.clone())?;
    let outcome = run(&prep.problem, &method, &sched, init, &stop)?;

    let dir = out_dir(cfg, out)?;
    fs::write(dir.join("trajectory.csv"), outcome.record.to_csv())?;
    let mut summary = outcome_json(&cfg.solver.method, &method, &sched, &outcome, prep.truth.as_deref());
    summary["seed"] = json!(cfg.solver.seed);
    summary["config"] = serde_json::to_value(cfg)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(dir)
}

/// Runs every listed solver on the same problem; writes one trajectory per
/// solver and `comparison.csv` with the relative objective error
/// `(F - F*) / |F*|`, `F*` the best value seen by any run.
pub fn cmd_compare(cfg: &Config, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let stop = stop_rule(cfg.stop()?);
    let prep = prepare(cfg)?;
    let n = prep.problem.n();
    let names: Vec<String> = cfg
        .solver
        .methods
        .clone()
        .unwrap_or_else(|| ["saga", "svrg", "palm", "sg"].map(String::from).to_vec());
    for (i, a) in names.iter().enumerate() {
        if names[..i].contains(a) {
            return Err(CliError::Config(format!("solver.methods: \"{a}\" listed twice")));
        }
    }
    let mut jobs = Vec::new();
    for name in &names {
        let (method, plan) = build_method(cfg, name, n)?;
        let sched = build_schedule(cfg, &plan, &prep.problem)?;
        jobs.push((name.clone(), method, sched));
    }
    let problem = &prep.problem;
    let x0 = &prep.x0;
    let stop = &stop;
    // runs share nothing mutable; each is deterministic given its seed
    let results: Vec<Result<RunOutcome, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(_, method, sched)| {
                scope.spawn(move || -> Result<RunOutcome, CliError> {
                    let init = initial_state(problem, x0.clone())?;
                    Ok(run(problem, method, sched, init, stop)?)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let f_star = outcomes
        .iter()
        .map(|o| o.record.best_objective)
        .fold(f64::INFINITY, f64::min);
    let scale = if f_star != 0.0 { f_star.abs() } else { 1.0 };

    let dir = out_dir(cfg, out)?;
    let mut text = String::from("method,k,epoch,grad_evals,F,rel_error\n");
    let mut per_method = Vec::new();
    for ((name, method, sched), o) in jobs.iter().zip(&outcomes) {
        fs::write(dir.join(format!("trajectory_{name}.csv")), o.record.to_csv())?;
        for e in &o.record.entries {
            let rel = (e.objective - f_star) / scale;
            text.push_str(&format!(
                "{name},{},{},{},{},{}\n",
                e.k, e.epoch, e.counters.grad_evals, e.objective, rel
            ));
        }
        let reach = o
            .record
            .entries
            .iter()
            .find(|e| (e.objective - f_star) / scale <= 1e-3)
            .map(|e| e.counters.grad_evals);
        let mut v = outcome_json(name, method, sched, o, prep.truth.as_deref());
        v["grad_evals_to_1e-3"] = json!(reach);
        per_method.push(v);
    }
    fs::write(dir.join("comparison.csv"), text)?;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "f_star": f_star,
            "seed": cfg.solver.seed,
            "runs": per_method,
            "config": serde_json::to_value(cfg)?,
        }),
    )?;
    Ok(dir)
}

fn numbered(prefix: &str, count: usize) -> Vec<String> {
    (0..count).map(|j| format!("{prefix}{j}")).collect()
}

/// Writes the configured dataset as `data.csv` and the outlier mask as
/// `truth.csv` (one 0/1 per line); homography scenes also get
/// `homography_truth.csv`.
pub fn cmd_gen(cfg: &Config, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let ds = load_dataset(cfg)?;
    let dir = out_dir(cfg, out)?;
    let (header, rows): (Vec<String>, Vec<Vec<f64>>) = match &ds.loss {
        AnyLoss::Ls(l) => {
            let mut h = numbered("x", l.width());
            h.push("y".into());
            let rows = (0..l.count())
                .map(|i| {
                    let mut r = l.features(i).to_vec();
                    r.push(l.target(i));
                    r
                })
                .collect();
            (h, rows)
        }
        AnyLoss::Softmax(l) => {
            let mut h = numbered("x", l.width());
            h.push("label".into());
            let rows = (0..l.count())
                .map(|i| {
                    let mut r = l.features(i).to_vec();
                    r.push(l.labels()[i] as f64);
                    r
                })
                .collect();
            (h, rows)
        }
        AnyLoss::Pca(l) => (
            numbered("a", l.rows()),
            (0..l.count()).map(|i| l.column(i).to_vec()).collect(),
        ),
        AnyLoss::Homography(l) => (
            ["u1", "v1", "u2", "v2"].map(String::from).to_vec(),
            l.pairs().iter().map(pair_row).collect(),
        ),
    };
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(fs::File::create(dir.join("data.csv"))?, Some(&header), &rows)?;
    if let Some(t) = &ds.truth {
        let mut text: String = t.iter().map(|&o| if o { "1\n" } else { "0\n" }).collect();
        if text.is_empty() {
            text.push('\n');
        }
        fs::write(dir.join("truth.csv"), text)?;
    }
    if let Some(h) = &ds.truth_h {
        write_csv(fs::File::create(dir.join("homography_truth.csv"))?, None, &[h.to_vec()])?;
    }
    Ok(dir)
}

fn pair_row(p: &Correspondence) -> Vec<f64> {
    vec![p.src[0], p.src[1], p.dst[0], p.dst[1]]
}

/// Trimmed homography with restarts and DLT refinement; writes
/// `homography.csv` (9 numbers, row-major, unit norm), `kept.csv` and
/// `summary.json`.
pub fn cmd_homography(cfg: &Config, out: Option<&Path>) -> Result<PathBuf, CliError> {
    if cfg.problem.kind != Kind::Homography {
        return Err(CliError::Config("problem.kind: the homography command needs kind = \"homography\"".into()));
    }
    let stop = stop_rule(cfg.stop()?);
    let ds = load_dataset(cfg)?;
    let AnyLoss::Homography(loss) = ds.loss else {
        unreachable!("kind checked above")
    };
    let n = loss.count();
    let h = keep_count(cfg, n)?;
    let problem = Problem::new(loss, Regularizer::CappedSimplex { h }, Regularizer::FrobeniusSphere)?
        .with_exec(exec_of(cfg)?);
    let (method, plan) = build_method(cfg, &cfg.solver.method, n)?;
    let sched = build_schedule(cfg, &plan, &problem)?;
    let fit = fit_homography(&problem, &method, &sched, &stop, cfg.solver.restarts, cfg.solver.seed)?;
    let mut hmat = fit.h;
    if cfg.problem.hartley {
        let kept: Vec<Correspondence> = fit.kept.iter().map(|&i| problem.loss.pairs()[i]).collect();
        hmat = dlt_homography_normalized(&kept)?;
    }

    let dir = out_dir(cfg, out)?;
    write_csv(fs::File::create(dir.join("homography.csv"))?, None, &[hmat.to_vec()])?;
    let kept: String = fit.kept.iter().map(|i| format!("{i}\n")).collect();
    fs::write(dir.join("kept.csv"), kept)?;
    let mut summary = outcome_json(&cfg.solver.method, &method, &sched, &fit.outcome, ds.truth.as_deref());
    summary["h"] = json!(hmat);
    summary["restart"] = json!(fit.restart);
    summary["trimmed_algebraic_residual"] = json!(fit.score);
    summary["error"] = json!(ds.truth_h.map(|t| homography_error(&hmat, &t)));
    summary["seed"] = json!(cfg.solver.seed);
    summary["config"] = serde_json::to_value(cfg)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(dir)
}
