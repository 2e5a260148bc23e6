//! Fixed-point and online learners that aggregate per-agent inverse solutions
//! into a shared prior.

mod batch;
mod export;
mod online;

pub use batch::{run_dual_fixed_point, run_msa_costs};
pub use export::{
    export_heterogeneity, write_agent_posteriors, write_final_prior, write_heterogeneity,
    write_heterogeneity_files, write_histogram, write_online_log, write_prior_trace, write_summary,
    write_trace_dir, Bin, LinkSummary,
};
pub use online::{online_update, LogEntry, OnlineState};

use serde::Serialize;

use crate::price::PriceVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Worker threads for per-agent solves; 1 runs everything on the caller.
    pub jobs: usize,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            tol: 1e-6,
            max_iter: 1000,
            jobs: 1,
        }
    }
}

impl LearnOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        LearnOptions {
            tol,
            max_iter,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentPosterior {
    pub agent_id: String,
    pub weight: f64,
    pub posterior: PriceVector,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointTrace {
    /// `priors[n]` is the prior entering iteration `n + 1`; the last entry is the result.
    pub priors: Vec<PriceVector>,
    /// Per-agent posteriors from the final iteration, in observation order.
    pub agents: Vec<AgentPosterior>,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity-norm of the last prior change.
    pub final_gap: f64,
    /// Agents dropped as inconsistent.
    pub skipped: Vec<String>,
}

impl FixedPointTrace {
    pub fn final_prior(&self) -> &PriceVector {
        self.priors
            .last()
            .expect("trace holds at least the initial prior")
    }

    /// Weighted mean of the final per-agent posteriors.
    pub fn posterior_mean(&self) -> Option<PriceVector> {
        PriceVector::weighted_mean(self.agents.iter().map(|a| (a.weight, &a.posterior)))
    }
}
