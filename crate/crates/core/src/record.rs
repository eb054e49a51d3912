//! Evaluation counters and run trajectories.

use std::time::Duration;

/// Cumulative evaluation counts, in the units of the complexity table:
/// gradients, function values, and calls to each prox.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub grad_evals: u64,
    pub fun_evals: u64,
    pub prox_w_evals: u64,
    pub prox_x_evals: u64,
}

impl Counters {
    /// True if every counter in `self` is >= the matching one in `earlier`.
    pub fn dominates(&self, earlier: &Counters) -> bool {
        self.grad_evals >= earlier.grad_evals
            && self.fun_evals >= earlier.fun_evals
            && self.prox_w_evals >= earlier.prox_w_evals
            && self.prox_x_evals >= earlier.prox_x_evals
    }
}

/// Stationarity measure split into its two normalized step lengths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stationarity {
    pub weighted: f64,
    pub w_component: f64,
    pub x_component: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub k: u64,
    /// Gradient evaluations divided by `n`.
    pub epoch: f64,
    pub objective: f64,
    pub stationarity: Stationarity,
    pub counters: Counters,
}

#[derive(Clone, Debug, Default)]
pub struct RunRecord {
    pub entries: Vec<LogEntry>,
    pub best_objective: f64,
    pub wall_time: Duration,
    pub stop_reason: StopReason,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StopReason {
    #[default]
    MaxEpochs,
    Stationary,
    MaxIterations,
    /// The objective or an iterate became NaN or infinite.
    NonFinite,
}

impl RunRecord {
    pub fn last(&self) -> Option<&LogEntry> {
        self.entries.last()
    }

    pub fn counters_monotone(&self) -> bool {
        self.entries
            .windows(2)
            .all(|p| p[1].counters.dominates(&p[0].counters) && p[1].k >= p[0].k)
    }

    /// Trajectory as CSV text with the column layout
    /// `k,epoch,F,stat_weighted,stat_w,stat_x,grad_evals,fun_evals,prox1_evals,prox2_evals`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "k,epoch,F,stat_weighted,stat_w,stat_x,grad_evals,fun_evals,prox1_evals,prox2_evals\n",
        );
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                e.k,
                e.epoch,
                e.objective,
                e.stationarity.weighted,
                e.stationarity.w_component,
                e.stationarity.x_component,
                e.counters.grad_evals,
                e.counters.fun_evals,
                e.counters.prox_w_evals,
                e.counters.prox_x_evals
            ));
        }
        out
    }
}
