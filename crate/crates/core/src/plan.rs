//! Sampling plans: batch size, block probability and dual-update policy.

use crate::error::{Error, Result};

/// Which dual variables are refreshed after an `x`-step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DualPolicy {
    /// Refresh the sampled batch (`D_k = I_k`).
    Saga,
    /// Never refresh on `x`-steps (`D_k` empty); duals only change on the
    /// full refresh that follows each `w`-step.
    Svrg,
    /// Full batches and full refresh (`I_k = D_k = {1..n}`).
    Full,
}

impl DualPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            DualPolicy::Saga => "saga",
            DualPolicy::Svrg => "svrg",
            DualPolicy::Full => "full",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan {
    pub batch: usize,
    /// Probability of a `w`-step; `1 - q` is the probability of an `x`-step.
    pub q: f64,
    pub policy: DualPolicy,
    pub seed: u64,
}

/// `ceil(n^{2/3})`, the batch size that balances the complexity terms.
pub fn default_batch(n: usize) -> usize {
    let b = (n as f64).powf(2.0 / 3.0).ceil() as usize;
    // guard against powf landing a hair above an exact cube
    let b = if b > 1 && ((b - 1) as f64).powi(3) >= (n as f64).powi(2) {
        b - 1
    } else {
        b
    };
    b.clamp(1, n.max(1))
}

impl SamplingPlan {
    /// SAGA variant with `q = 1/n`, so that `q' = 1 - 1/n`.
    pub fn saga(n: usize, batch: usize, seed: u64) -> Self {
        SamplingPlan {
            batch,
            q: 1.0 / n as f64,
            policy: DualPolicy::Saga,
            seed,
        }
    }

    /// SVRG variant with `q = 1/t`, `t = ceil(n/b)`: one full refresh per
    /// expected epoch.
    pub fn svrg(n: usize, batch: usize, seed: u64) -> Self {
        let t = n.div_ceil(batch.max(1)).max(2);
        SamplingPlan {
            batch,
            q: 1.0 / t as f64,
            policy: DualPolicy::Svrg,
            seed,
        }
    }

    /// Randomized PALM: full batches, `q = 1/2`.
    pub fn full(n: usize, seed: u64) -> Self {
        SamplingPlan {
            batch: n,
            q: 0.5,
            policy: DualPolicy::Full,
            seed,
        }
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    /// `q' = 1 - q`.
    pub fn q_prime(&self) -> f64 {
        1.0 - self.q
    }

    /// Effective batch size: `n` under the full policy.
    pub fn effective_batch(&self, n: usize) -> usize {
        match self.policy {
            DualPolicy::Full => n,
            _ => self.batch,
        }
    }

    /// `rho_i = P(i in D_k)`.
    pub fn rho(&self, n: usize) -> Vec<f64> {
        rho_for_policy(self.policy, n, self.effective_batch(n))
    }

    /// `allow_q_zero` is set when the weight regularizer pins `w = 1`.
    pub fn validate(&self, n: usize, allow_q_zero: bool) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::InvalidPlan("batch size must be >= 1".into()));
        }
        let q_ok = if allow_q_zero {
            self.q >= 0.0 && self.q < 1.0
        } else {
            self.q > 0.0 && self.q < 1.0
        };
        if !q_ok {
            return Err(Error::InvalidPlan(format!(
                "need 0 < q < 1 (q = 0 only without trimming), got {}",
                self.q
            )));
        }
        if n == 0 {
            return Err(Error::InvalidPlan("empty problem".into()));
        }
        Ok(())
    }
}

/// `rho_i` per policy: SAGA `1 - (1 - 1/n)^b`, SVRG `0`, Full `1`.
pub fn rho_for_policy(policy: DualPolicy, n: usize, batch: usize) -> Vec<f64> {
    let r = match policy {
        DualPolicy::Saga => 1.0 - (1.0 - 1.0 / n as f64).powi(batch as i32),
        DualPolicy::Svrg => 0.0,
        DualPolicy::Full => 1.0,
    };
    vec![r; n]
}
