//! Step sizes `gamma` (x-step), `tau` (w-step) and the stationarity
//! shortening factor `eta` from the convergence theorems.
//!
//! The sublinear-rate constants are
//!
//! ```text
//! s_i   = q' (1 - rho_i)
//! eta   = 2 + 4 gamma [ sqrt( (1/n) sum q'(1+e0)(B_i L)^2 / (2b (1 - sqrt s_i)^2) ) + (4L/n) sum B_i ]
//! gamma = 1 / ( 4L sqrt( (1/n) sum q'(1+e0) B_i^2 / (2b (1 - sqrt s_i)^2) ) + (L/n) sum B_i )
//! ```
//!
//! and the linear-rate ones replace `(1 - sqrt s_i)^2` by
//! `sqrt(s_i) (1 - s_i^{1/4})^2` and use `(L/n) sum B_i` inside `eta`.

use crate::error::{Error, Result};
use crate::instance::{Loss, Problem};
use crate::plan::{DualPolicy, SamplingPlan};

/// Default `epsilon_0`.
pub const DEFAULT_EPSILON0: f64 = 0.5;

/// Fraction of a prox guard used when clipping a step.
const GUARD_FRACTION: f64 = 0.999;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizeSchedule {
    pub gamma: f64,
    pub tau: f64,
    pub eta: f64,
    pub epsilon0: f64,
}

impl StepSizeSchedule {
    pub fn validate(&self, guard_w: f64, guard_x: f64) -> Result<()> {
        let ok = self.gamma > 0.0
            && self.gamma.is_finite()
            && self.tau > 0.0
            && self.tau.is_finite()
            && self.eta > 1.0
            && self.eta.is_finite()
            && self.epsilon0 >= 0.0
            && self.epsilon0 < 1.0
            && self.gamma < guard_x
            && self.tau < guard_w;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid schedule: need 0 < gamma < guard, 0 < tau < guard, eta > 1, \
                 0 <= epsilon0 < 1; got {self:?}"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateRegime {
    Sublinear,
    Linear,
}

/// Everything the formulas read, detached from any particular loss.
#[derive(Clone, Debug, PartialEq)]
pub struct StepConstants {
    pub n: usize,
    pub batch: usize,
    pub q: f64,
    pub rho: Vec<f64>,
    pub weight_bounds: Vec<f64>,
    pub lipschitz: f64,
    pub guard_w: f64,
    pub guard_x: f64,
}

impl StepConstants {
    pub fn from_problem<L: Loss>(plan: &SamplingPlan, problem: &Problem<L>) -> Self {
        let n = problem.n();
        StepConstants {
            n,
            batch: plan.effective_batch(n),
            q: plan.q,
            rho: plan.rho(n),
            weight_bounds: problem.weight_bounds(),
            lipschitz: problem.lipschitz_max(),
            guard_w: problem.reg_w.prox_guard(),
            guard_x: problem.reg_x.prox_guard(),
        }
    }

    fn q_prime(&self) -> f64 {
        1.0 - self.q
    }

    fn mean_bound(&self) -> f64 {
        self.weight_bounds.iter().sum::<f64>() / self.n as f64
    }

    /// `(1/n) sum_i q'(1+e0) B_i^2 / (2 b D_i)` with `D_i` the regime's
    /// denominator factor.
    fn root_sum(&self, epsilon0: f64, regime: RateRegime) -> Result<f64> {
        let qp = self.q_prime();
        let b = self.batch as f64;
        let mut acc = 0.0;
        for (rho, bound) in self.rho.iter().zip(&self.weight_bounds) {
            let s = qp * (1.0 - rho);
            let denom = match regime {
                RateRegime::Sublinear => {
                    if !(0.0..1.0).contains(&s) {
                        return Err(Error::InvalidPlan(format!(
                            "q'(1 - rho_i) = {s} must lie in [0, 1) for the sublinear formulas"
                        )));
                    }
                    (1.0 - s.sqrt()).powi(2)
                }
                RateRegime::Linear => {
                    if !(s > 0.0 && s < 1.0) {
                        return Err(Error::InvalidPlan(format!(
                            "q'(1 - rho_i) = {s} must lie in (0, 1) for the linear-rate formulas"
                        )));
                    }
                    s.sqrt() * (1.0 - s.powf(0.25)).powi(2)
                }
            };
            acc += qp * (1.0 + epsilon0) * bound * bound / (2.0 * b * denom);
        }
        Ok(acc / self.n as f64)
    }

    fn check_epsilon(epsilon0: f64) -> Result<()> {
        if (0.0..1.0).contains(&epsilon0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "epsilon0 must lie in [0, 1), got {epsilon0}"
            )))
        }
    }

    fn eta(&self, epsilon0: f64, gamma: f64, regime: RateRegime, outer: f64) -> Result<f64> {
        Self::check_epsilon(epsilon0)?;
        let l = self.lipschitz;
        // (B_i L)^2 = L^2 B_i^2, so the root carries a factor L.
        let root = l * self.root_sum(epsilon0, regime)?.sqrt();
        Ok(2.0 + 4.0 * gamma * (root + outer * l * self.mean_bound()))
    }

    fn gamma(&self, epsilon0: f64, regime: RateRegime) -> Result<f64> {
        Self::check_epsilon(epsilon0)?;
        let l = self.lipschitz;
        let g = 1.0 / (4.0 * l * self.root_sum(epsilon0, regime)?.sqrt() + l * self.mean_bound());
        Ok(clip_to_guard(g, self.guard_x))
    }
}

fn clip_to_guard(step: f64, guard: f64) -> f64 {
    if guard.is_finite() && step >= guard {
        GUARD_FRACTION * guard
    } else {
        step
    }
}

/// `eta` for the sublinear-rate theorem (outer coefficient `4L/n sum B_i`).
pub fn eta_sublinear(c: &StepConstants, epsilon0: f64, gamma: f64) -> Result<f64> {
    c.eta(epsilon0, gamma, RateRegime::Sublinear, 4.0)
}

pub fn gamma_sublinear(c: &StepConstants, epsilon0: f64) -> Result<f64> {
    c.gamma(epsilon0, RateRegime::Sublinear)
}

/// `eta` for the linear-rate theorem (outer coefficient `L/n sum B_i`).
pub fn eta_linear(c: &StepConstants, epsilon0: f64, gamma: f64) -> Result<f64> {
    c.eta(epsilon0, gamma, RateRegime::Linear, 1.0)
}

pub fn gamma_linear(c: &StepConstants, epsilon0: f64) -> Result<f64> {
    c.gamma(epsilon0, RateRegime::Linear)
}

/// `tau` per variant: SAGA `(n-1) gamma/eta`, SVRG
/// `(1-(1-1/n)^b)(1-1/n)^b gamma/eta`, Full `gamma/eta`.
pub fn tau_for_variant(
    policy: DualPolicy,
    gamma: f64,
    eta: f64,
    n: usize,
    batch: usize,
    guard_w: f64,
) -> Result<f64> {
    let nf = n as f64;
    let tau = match policy {
        DualPolicy::Saga => (nf - 1.0) * gamma / eta,
        DualPolicy::Svrg => {
            let keep = (1.0 - 1.0 / nf).powi(batch as i32);
            (1.0 - keep) * keep * gamma / eta
        }
        DualPolicy::Full => gamma / eta,
    };
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidPlan(format!(
            "{} variant gives tau = {tau} for n = {n}, b = {batch}",
            policy.name()
        )));
    }
    Ok(clip_to_guard(tau, guard_w))
}

/// Theorem-driven schedule for `plan` on `problem`.
pub fn auto_schedule<L: Loss>(
    plan: &SamplingPlan,
    problem: &Problem<L>,
    epsilon0: f64,
    regime: RateRegime,
) -> Result<StepSizeSchedule> {
    let c = StepConstants::from_problem(plan, problem);
    schedule_from_constants(&c, plan.policy, epsilon0, regime)
}

pub fn schedule_from_constants(
    c: &StepConstants,
    policy: DualPolicy,
    epsilon0: f64,
    regime: RateRegime,
) -> Result<StepSizeSchedule> {
    let (gamma, eta) = match regime {
        RateRegime::Sublinear => {
            let g = gamma_sublinear(c, epsilon0)?;
            (g, eta_sublinear(c, epsilon0, g)?)
        }
        RateRegime::Linear => {
            let g = gamma_linear(c, epsilon0)?;
            (g, eta_linear(c, epsilon0, g)?)
        }
    };
    let tau = tau_for_variant(policy, gamma, eta, c.n, c.batch, c.guard_w)?;
    Ok(StepSizeSchedule {
        gamma,
        tau,
        eta,
        epsilon0,
    })
}
