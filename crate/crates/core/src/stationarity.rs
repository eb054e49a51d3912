//! Stationarity reference step, the normalized-step convergence measure, and
//! an empirical probe of the global error bound.

use crate::error::Result;
use crate::instance::{IterateState, Loss, Problem};
use crate::linalg::dist_sq;
use crate::record::{Counters, Stationarity};
use crate::stepsize::StepSizeSchedule;

/// `(w_bar, x_bar)`: a prox-gradient step in `w` with step `tau` and in `x`
/// with the shortened step `gamma / eta`, both from `(w, x)`.
/// Costs `n` function and `n` gradient evaluations.
pub fn reference_step<L: Loss>(
    problem: &Problem<L>,
    state: &IterateState,
    schedule: &StepSizeSchedule,
    counters: &mut Counters,
) -> Result<(Vec<f64>, Vec<f64>)> {
    problem.check_state(state)?;
    let n = problem.n() as f64;
    let f = problem.losses(&state.x, counters);
    let tau = schedule.tau;
    let w_arg: Vec<f64> = state
        .w
        .iter()
        .zip(&f)
        .map(|(w, fi)| w - tau / n * fi)
        .collect();
    let w_bar = problem.reg_w.prox(&w_arg, tau)?;

    let short = schedule.gamma / schedule.eta;
    let g = problem.full_gradient(&state.w, &state.x, counters);
    let x_arg: Vec<f64> = state.x.iter().zip(&g).map(|(x, gi)| x - short * gi).collect();
    let x_bar = problem.reg_x.prox(&x_arg, short)?;
    Ok((w_bar, x_bar))
}

/// `x_component = ||(eta/gamma)(x - x_bar)||^2`,
/// `w_component = ||(1/tau)(w - w_bar)||^2`,
/// `weighted = (q' gamma / 2 eta) x_component + (q tau / 2) w_component`.
pub fn stationarity_measure<L: Loss>(
    problem: &Problem<L>,
    state: &IterateState,
    schedule: &StepSizeSchedule,
    q: f64,
    counters: &mut Counters,
) -> Result<Stationarity> {
    let (w_bar, x_bar) = reference_step(problem, state, schedule, counters)?;
    Ok(measure_from_reference(state, &w_bar, &x_bar, schedule, q))
}

pub fn measure_from_reference(
    state: &IterateState,
    w_bar: &[f64],
    x_bar: &[f64],
    schedule: &StepSizeSchedule,
    q: f64,
) -> Stationarity {
    let ratio = schedule.eta / schedule.gamma;
    let x_component = ratio * ratio * dist_sq(&state.x, x_bar);
    let w_component = dist_sq(&state.w, w_bar) / (schedule.tau * schedule.tau);
    let weighted = (1.0 - q) * schedule.gamma / (2.0 * schedule.eta) * x_component
        + q * schedule.tau / 2.0 * w_component;
    Stationarity {
        weighted,
        w_component,
        x_component,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbeOutcome {
    /// Squared normalized steps divided by `F(w, x) - f_star`.
    Ratio(f64),
    /// `F(w, x)` is within `1e-15` of `f_star`; the ratio is not informative.
    AtReference,
    /// `F(w, x) < f_star - 1e-9`: the reference value is stale.
    StaleReference { objective: f64 },
}

/// Lower estimates of the error-bound modulus along a list of states.
pub fn error_bound_probe<L: Loss>(
    problem: &Problem<L>,
    states: &[IterateState],
    schedule: &StepSizeSchedule,
    f_star: f64,
) -> Result<Vec<ProbeOutcome>> {
    let mut scratch = Counters::default();
    states
        .iter()
        .map(|s| {
            let f = problem.objective(s)?;
            if f < f_star - 1e-9 {
                return Ok(ProbeOutcome::StaleReference { objective: f });
            }
            let gap = f - f_star;
            if gap <= 1e-15 {
                return Ok(ProbeOutcome::AtReference);
            }
            let m = stationarity_measure(problem, s, schedule, 0.5, &mut scratch)?;
            Ok(ProbeOutcome::Ratio((m.x_component + m.w_component) / gap))
        })
        .collect()
}
