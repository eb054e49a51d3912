//! The SMART iteration, the PALM / PSPG / minibatch-SG baselines, and the
//! shared run loop.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::DualTable;
use crate::instance::{IterateState, Loss, Problem, Regularizer};
use crate::linalg::all_finite;
use crate::plan::{DualPolicy, SamplingPlan};
use crate::record::{Counters, LogEntry, RunRecord, StopReason};
use crate::prox::FEASIBILITY_TOL;
use crate::stationarity::stationarity_measure;
use crate::stepsize::StepSizeSchedule;

/// Weight below which an example counts as trimmed.
pub const TRIM_TOL: f64 = 1e-8;

/// Exponent of the PSPG step decay `gamma / (1 + k)^0.51`.
pub const PSPG_DECAY: f64 = 0.51;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    /// `j_k = 1`: weights updated.
    Weights,
    /// `j_k = 2`: model updated.
    Model,
}

/// Randomness of one SMART iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDraw {
    pub block: Block,
    /// `I_k`; ignored for weight steps and under the full policy.
    pub batch: Vec<usize>,
}

impl StepDraw {
    /// Draws `j_k`, then `I_k` (only for model steps), from `rng`.
    pub fn sample<R: Rng>(plan: &SamplingPlan, n: usize, rng: &mut R) -> Self {
        let block = if rng.random::<f64>() < plan.q {
            Block::Weights
        } else {
            Block::Model
        };
        let batch = match (block, plan.policy) {
            (Block::Model, DualPolicy::Saga | DualPolicy::Svrg) => {
                (0..plan.batch).map(|_| rng.random_range(0..n)).collect()
            }
            _ => Vec::new(),
        };
        StepDraw { block, batch }
    }
}

/// `prox_{tau r1}(w - (tau/n) f(x))`; `n` function evaluations and one prox.
fn weight_step<L: Loss>(
    problem: &Problem<L>,
    w: &[f64],
    x: &[f64],
    tau: f64,
    counters: &mut Counters,
) -> Result<Vec<f64>> {
    let f = problem.losses(x, counters);
    if !all_finite(&f) {
        return Err(Error::NonFinite("per-example loss".into()));
    }
    let scale = tau / problem.n() as f64;
    let arg: Vec<f64> = w.iter().zip(&f).map(|(wi, fi)| wi - scale * fi).collect();
    counters.prox_w_evals += 1;
    let w = problem.reg_w.prox(&arg, tau)?;
    // past 2^52 the projection cannot resolve unit-scale weights
    let scale = arg.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if scale * f64::EPSILON > 1.0 && problem.reg_w.residual(&w) > FEASIBILITY_TOL {
        return Err(Error::NonFinite("weight step argument overflowed precision".into()));
    }
    Ok(w)
}

/// `prox_{gamma r2}(x - gamma g)`; one prox.
fn model_step<L: Loss>(
    problem: &Problem<L>,
    x: &[f64],
    direction: &[f64],
    gamma: f64,
    counters: &mut Counters,
) -> Result<Vec<f64>> {
    if !all_finite(direction) {
        return Err(Error::NonFinite("gradient estimate".into()));
    }
    let arg: Vec<f64> = x.iter().zip(direction).map(|(xi, g)| xi - gamma * g).collect();
    counters.prox_x_evals += 1;
    problem.reg_x.prox(&arg, gamma)
}

/// One SMART iteration with the randomness supplied by `draw`.
///
/// Weight step: `w` moves, `x` stays, then every dual is refreshed with the
/// new `w`. Model step: `x` moves along the variance-reduced estimate, then
/// the duals in `D_k` are refreshed at the old iterate.
pub fn smart_step_with<L: Loss>(
    problem: &Problem<L>,
    state: &mut IterateState,
    duals: &mut DualTable,
    plan: &SamplingPlan,
    schedule: &StepSizeSchedule,
    draw: &StepDraw,
    counters: &mut Counters,
) -> Result<()> {
    let k = state.k;
    match draw.block {
        Block::Weights => {
            let w = weight_step(problem, &state.w, &state.x, schedule.tau, counters)
                .map_err(|e| e.at_iteration(k))?;
            state.w = w;
            state.k += 1;
            duals.refresh_all(problem, state, counters);
        }
        Block::Model => {
            let full: Vec<usize>;
            let batch: &[usize] = match plan.policy {
                DualPolicy::Full => {
                    full = (0..problem.n()).collect();
                    &full
                }
                _ => &draw.batch,
            };
            let rows = problem.weighted_gradients(&state.w, &state.x, batch, counters);
            let v = duals.estimate_from_rows(batch, &rows);
            let x = model_step(problem, &state.x, &v, schedule.gamma, counters)
                .map_err(|e| e.at_iteration(k))?;
            if !all_finite(&x) {
                return Err(Error::NonFinite("model iterate".into()).at_iteration(k));
            }
            match plan.policy {
                DualPolicy::Saga | DualPolicy::Full => duals.store_rows(batch, &rows, k),
                DualPolicy::Svrg => {}
            }
            state.x = x;
            state.k += 1;
        }
    }
    Ok(())
}

/// One SMART iteration drawing `j_k` and `I_k` from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn smart_step<L: Loss, R: Rng>(
    problem: &Problem<L>,
    state: &mut IterateState,
    duals: &mut DualTable,
    plan: &SamplingPlan,
    schedule: &StepSizeSchedule,
    rng: &mut R,
    counters: &mut Counters,
) -> Result<Block> {
    let draw = StepDraw::sample(plan, problem.n(), rng);
    smart_step_with(problem, state, duals, plan, schedule, &draw, counters)?;
    Ok(draw.block)
}

/// Deterministic PALM: weight step, then a full-gradient model step at the
/// new weights.
pub fn palm_step<L: Loss>(
    problem: &Problem<L>,
    state: &mut IterateState,
    schedule: &StepSizeSchedule,
    counters: &mut Counters,
) -> Result<()> {
    let k = state.k;
    let w = weight_step(problem, &state.w, &state.x, schedule.tau, counters)
        .map_err(|e| e.at_iteration(k))?;
    let g = problem.full_gradient(&w, &state.x, counters);
    let x = model_step(problem, &state.x, &g, schedule.gamma, counters)
        .map_err(|e| e.at_iteration(k))?;
    state.w = w;
    state.x = x;
    state.k += 1;
    Ok(())
}

/// `gamma_k = gamma / (1 + k)^0.51`.
pub fn pspg_gamma(gamma: f64, k: u64) -> f64 {
    gamma / (1.0 + k as f64).powf(PSPG_DECAY)
}

/// PSPG: weight step, then a model step along one sampled
/// `w_i grad f_i(x)` (at the old weights) with decaying step.
pub fn pspg_step<L: Loss, R: Rng>(
    problem: &Problem<L>,
    state: &mut IterateState,
    schedule: &StepSizeSchedule,
    rng: &mut R,
    counters: &mut Counters,
) -> Result<()> {
    let k = state.k;
    let i = rng.random_range(0..problem.n());
    let w = weight_step(problem, &state.w, &state.x, schedule.tau, counters)
        .map_err(|e| e.at_iteration(k))?;
    let g = problem.weighted_gradients(&state.w, &state.x, &[i], counters);
    let x = model_step(problem, &state.x, &g, pspg_gamma(schedule.gamma, k), counters)
        .map_err(|e| e.at_iteration(k))?;
    state.w = w;
    state.x = x;
    state.k += 1;
    Ok(())
}

/// Minibatch SG: same `j_k` cadence as SMART with block probability `q`; the
/// model step uses the plain estimate `(1/b) sum_{i in I} w_i grad f_i(x)`.
pub fn sg_minibatch_step<L: Loss, R: Rng>(
    problem: &Problem<L>,
    state: &mut IterateState,
    schedule: &StepSizeSchedule,
    batch: usize,
    q: f64,
    rng: &mut R,
    counters: &mut Counters,
) -> Result<Block> {
    let k = state.k;
    let n = problem.n();
    if rng.random::<f64>() < q {
        state.w = weight_step(problem, &state.w, &state.x, schedule.tau, counters)
            .map_err(|e| e.at_iteration(k))?;
        state.k += 1;
        return Ok(Block::Weights);
    }
    let idx: Vec<usize> = (0..batch).map(|_| rng.random_range(0..n)).collect();
    let d = problem.dim();
    let rows = problem.weighted_gradients(&state.w, &state.x, &idx, counters);
    let mut g = vec![0.0; d];
    for row in rows.chunks(d) {
        for (gj, rj) in g.iter_mut().zip(row) {
            *gj += rj;
        }
    }
    g.iter_mut().for_each(|v| *v /= batch as f64);
    state.x = model_step(problem, &state.x, &g, schedule.gamma, counters)
        .map_err(|e| e.at_iteration(k))?;
    state.k += 1;
    Ok(Block::Model)
}

/// Solver selection for [`run`].
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Smart(SamplingPlan),
    Palm,
    Pspg { seed: u64 },
    Sg { batch: usize, q: f64, seed: u64 },
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Smart(plan) => format!("smart-{}", plan.policy.name()),
            Method::Palm => "palm".into(),
            Method::Pspg { .. } => "pspg".into(),
            Method::Sg { .. } => "sg".into(),
        }
    }

    /// The same method with every seed shifted by `offset`.
    pub fn reseeded(&self, offset: u64) -> Method {
        match self {
            Method::Smart(plan) => Method::Smart(SamplingPlan {
                seed: plan.seed.wrapping_add(offset),
                ..plan.clone()
            }),
            Method::Palm => Method::Palm,
            Method::Pspg { seed } => Method::Pspg {
                seed: seed.wrapping_add(offset),
            },
            Method::Sg { batch, q, seed } => Method::Sg {
                batch: *batch,
                q: *q,
                seed: seed.wrapping_add(offset),
            },
        }
    }

    /// `q = P(j_k = 1)` used to weight the stationarity measure. The
    /// deterministic baselines use the randomized-PALM value 1/2.
    pub fn block_probability(&self) -> f64 {
        match self {
            Method::Smart(plan) => plan.q,
            Method::Sg { q, .. } => *q,
            Method::Palm | Method::Pspg { .. } => 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogEvery {
    Epochs(f64),
    Iterations(u64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    pub max_epochs: f64,
    pub stationarity_tol: f64,
    pub log_every: LogEvery,
    pub max_iterations: Option<u64>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            max_epochs: 20.0,
            stationarity_tol: 0.0,
            log_every: LogEvery::Epochs(1.0),
            max_iterations: None,
        }
    }
}

/// `(w0, x0)` with `w0` the uniform weights on the weight domain and `x0`
/// projected onto the model domain.
pub fn initial_state<L: Loss>(problem: &Problem<L>, x0: Vec<f64>) -> Result<IterateState> {
    if x0.len() != problem.dim() {
        return Err(Error::InvalidArgument(format!(
            "x0 has length {}, expected {}",
            x0.len(),
            problem.dim()
        )));
    }
    let w = problem.initial_weights()?;
    let x = if problem.reg_x.is_indicator() {
        problem.reg_x.prox(&x0, 1.0)?
    } else {
        x0
    };
    Ok(IterateState::new(w, x))
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub state: IterateState,
}

impl RunOutcome {
    /// Indices with `w_i <= 1e-8`.
    pub fn trimmed(&self) -> Vec<usize> {
        trimmed_set(&self.state.w)
    }

    /// Indices with `w_i > 1e-8`.
    pub fn kept(&self) -> Vec<usize> {
        (0..self.state.w.len())
            .filter(|&i| self.state.w[i] > TRIM_TOL)
            .collect()
    }
}

pub fn trimmed_set(w: &[f64]) -> Vec<usize> {
    w.iter()
        .enumerate()
        .filter(|(_, &v)| v <= TRIM_TOL)
        .map(|(i, _)| i)
        .collect()
}

enum Stepper {
    Smart {
        plan: SamplingPlan,
        duals: DualTable,
        rng: ChaCha8Rng,
    },
    Palm,
    Pspg {
        rng: ChaCha8Rng,
    },
    Sg {
        batch: usize,
        q: f64,
        rng: ChaCha8Rng,
    },
}

/// Runs `method` from `init` until the stop rule fires.
///
/// A non-finite objective ends the run with [`StopReason::NonFinite`]; the
/// record up to that point is returned.
pub fn run<L: Loss>(
    problem: &Problem<L>,
    method: &Method,
    schedule: &StepSizeSchedule,
    init: IterateState,
    stop: &StopRule,
) -> Result<RunOutcome> {
    let started = Instant::now();
    problem.check_state(&init)?;
    schedule.validate(problem.reg_w.prox_guard(), problem.reg_x.prox_guard())?;
    let n = problem.n();
    let mut state = init;
    let mut counters = Counters::default();

    let mut stepper = match method {
        Method::Smart(plan) => {
            plan.validate(n, problem.reg_w == Regularizer::AllOnes)?;
            let duals = DualTable::fresh(problem, &state, &mut counters);
            Stepper::Smart {
                plan: plan.clone(),
                duals,
                rng: ChaCha8Rng::seed_from_u64(plan.seed),
            }
        }
        Method::Palm => Stepper::Palm,
        Method::Pspg { seed } => Stepper::Pspg {
            rng: ChaCha8Rng::seed_from_u64(*seed),
        },
        Method::Sg { batch, q, seed } => {
            if *batch == 0 || !(0.0..1.0).contains(q) {
                return Err(Error::InvalidPlan(format!(
                    "SG needs batch >= 1 and 0 <= q < 1, got {batch}, {q}"
                )));
            }
            Stepper::Sg {
                batch: *batch,
                q: *q,
                rng: ChaCha8Rng::seed_from_u64(*seed),
            }
        }
    };

    let q = method.block_probability();
    let mut record = RunRecord {
        best_objective: f64::INFINITY,
        ..Default::default()
    };
    let epoch_of = |c: &Counters| c.grad_evals as f64 / n as f64;

    // Returns true when the logged point meets the stationarity tolerance.
    let log = |record: &mut RunRecord, state: &IterateState, counters: &Counters| -> Result<Option<bool>> {
        let objective = match problem.objective(state) {
            Ok(f) => f,
            Err(Error::NonFinite(_)) => return Ok(None),
            Err(e) => return Err(e.at_iteration(state.k)),
        };
        let mut diag = Counters::default();
        let stat = stationarity_measure(problem, state, schedule, q, &mut diag)
            .map_err(|e| e.at_iteration(state.k))?;
        record.best_objective = record.best_objective.min(objective);
        record.entries.push(LogEntry {
            k: state.k,
            epoch: epoch_of(counters),
            objective,
            stationarity: stat,
            counters: *counters,
        });
        Ok(Some(stat.weighted <= stop.stationarity_tol))
    };

    let finish = |mut record: RunRecord, reason: StopReason, state: IterateState| {
        record.stop_reason = reason;
        record.wall_time = started.elapsed();
        Ok(RunOutcome { record, state })
    };

    match log(&mut record, &state, &counters)? {
        None => return finish(record, StopReason::NonFinite, state),
        Some(true) => return finish(record, StopReason::Stationary, state),
        Some(false) => {}
    }

    let mut next_epoch_log = match stop.log_every {
        LogEvery::Epochs(e) => epoch_of(&counters) + e,
        LogEvery::Iterations(_) => f64::INFINITY,
    };
    let reason = loop {
        if epoch_of(&counters) >= stop.max_epochs {
            break StopReason::MaxEpochs;
        }
        if stop.max_iterations.is_some_and(|m| state.k >= m) {
            break StopReason::MaxIterations;
        }
        let stepped = match &mut stepper {
            Stepper::Smart { plan, duals, rng } => {
                smart_step(problem, &mut state, duals, plan, schedule, rng, &mut counters).map(|_| ())
            }
            Stepper::Palm => palm_step(problem, &mut state, schedule, &mut counters),
            Stepper::Pspg { rng } => pspg_step(problem, &mut state, schedule, rng, &mut counters),
            Stepper::Sg { batch, q, rng } => {
                sg_minibatch_step(problem, &mut state, schedule, *batch, *q, rng, &mut counters)
                    .map(|_| ())
            }
        };
        match stepped {
            Ok(()) => {}
            Err(Error::AtIteration { ref source, .. }) if matches!(**source, Error::NonFinite(_)) => {
                break StopReason::NonFinite;
            }
            Err(e) => return Err(e),
        }

        let due = match stop.log_every {
            LogEvery::Iterations(every) => every > 0 && state.k.is_multiple_of(every),
            LogEvery::Epochs(every) => {
                let e = epoch_of(&counters);
                if e >= next_epoch_log {
                    while next_epoch_log <= e {
                        next_epoch_log += every.max(f64::MIN_POSITIVE);
                    }
                    true
                } else {
                    false
                }
            }
        };
        if due {
            match log(&mut record, &state, &counters)? {
                None => break StopReason::NonFinite,
                Some(true) => break StopReason::Stationary,
                Some(false) => {}
            }
        }
    };

    if reason != StopReason::NonFinite
        && record.last().map(|e| e.k) != Some(state.k)
        && log(&mut record, &state, &counters)?.is_none()
    {
        return finish(record, StopReason::NonFinite, state);
    }
    finish(record, reason, state)
}
