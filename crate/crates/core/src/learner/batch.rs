use std::borrow::Cow;
use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::{AgentPosterior, FixedPointTrace, LearnOptions};
use crate::data::{CapacitySpec, Observation};
use crate::error::{Error, Result};
use crate::graph::{LinkId, Network, Path};
use crate::inverse::{inverse_costs, inverse_duals, InverseResult};
use crate::price::PriceVector;

/// Observations grouped by (path, subnetwork): agents in one group face the
/// same inverse problem within an iteration, so it is solved once.
struct Groups<'a> {
    reps: Vec<(&'a Path, Cow<'a, Network>)>,
    of_obs: Vec<usize>,
}

impl<'a> Groups<'a> {
    fn new(obs: &'a [Observation], net: &'a Network) -> Result<Self> {
        let mut index: HashMap<(&Path, Option<&BTreeSet<LinkId>>), usize> = HashMap::new();
        let mut reps = Vec::new();
        let mut of_obs = Vec::with_capacity(obs.len());
        for ob in obs {
            ob.validate(net)?;
            let key = (&ob.path, ob.subnetwork.as_ref());
            let g = match index.get(&key) {
                Some(&g) => g,
                None => {
                    reps.push((&ob.path, ob.view(net)?));
                    index.insert(key, reps.len() - 1);
                    reps.len() - 1
                }
            };
            of_obs.push(g);
        }
        Ok(Groups { reps, of_obs })
    }

    fn solve<F>(&self, pool: Option<&rayon::ThreadPool>, f: F) -> Vec<Result<InverseResult>>
    where
        F: Fn(&Network, &Path) -> Result<InverseResult> + Sync,
    {
        match pool {
            Some(pool) => pool.install(|| self.reps.par_iter().map(|(p, n)| f(n, p)).collect()),
            None => self.reps.iter().map(|(p, n)| f(n, p)).collect(),
        }
    }
}

fn check_options(obs: &[Observation], opts: &LearnOptions) -> Result<Option<rayon::ThreadPool>> {
    if obs.is_empty() {
        return Err(Error::NoUsableObservations { skipped: 0 });
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::Invalid(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if opts.max_iter == 0 {
        return Err(Error::Invalid("max_iter must be at least 1".into()));
    }
    if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
        Ok(Some(pool))
    } else {
        Ok(None)
    }
}

/// Multi-agent cost inference by successive averages:
/// `c0[n+1] = n/(n+1) c0[n] + 1/(n+1) mu[n]`, where `mu[n]` is the weighted
/// mean of the agents' inverse posteriors at `c0[n]`.
pub fn run_msa_costs(
    obs: &[Observation],
    net: &Network,
    c0_init: &PriceVector,
    opts: &LearnOptions,
) -> Result<FixedPointTrace> {
    let pool = check_options(obs, opts)?;
    let groups = Groups::new(obs, net)?;
    let mut prior = PriceVector::new();
    for id in net.link_ids() {
        let v = c0_init.value(id)?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NegativeCost { link: id, value: v });
        }
        prior.set(id, v);
    }
    let mut priors = vec![prior.clone()];
    let mut agents = Vec::new();
    let mut gap = f64::INFINITY;
    let mut converged = false;
    for n in 1..=opts.max_iter {
        let solved = groups.solve(pool.as_ref(), |view, path| {
            inverse_costs(view, &prior, path)
        });
        let mut posteriors = Vec::with_capacity(solved.len());
        for r in solved {
            let r = r?;
            // Links outside a subnetwork keep the common prior.
            let mut full = prior.clone();
            for (l, v) in r.posterior.iter() {
                full.set(l, v);
            }
            posteriors.push((full, r.objective));
        }
        agents = obs
            .iter()
            .zip(&groups.of_obs)
            .map(|(ob, &g)| AgentPosterior {
                agent_id: ob.agent_id.clone(),
                weight: ob.weight,
                posterior: posteriors[g].0.clone(),
                objective: posteriors[g].1,
            })
            .collect();
        let mu = PriceVector::weighted_mean(agents.iter().map(|a| (a.weight, &a.posterior)))
            .expect("positive weights");
        let next = prior.blend(&mu, 1.0 / (n as f64 + 1.0));
        gap = next.max_abs_diff(&prior);
        log::debug!("msa iteration {n}: gap {gap:.3e}");
        prior = next;
        priors.push(prior.clone());
        if gap < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(FixedPointTrace {
        iterations: priors.len() - 1,
        priors,
        agents,
        converged,
        final_gap: gap,
        skipped: Vec::new(),
    })
}

/// Dual-price fixed point: `w0[n+1]` is the weighted mean of the agents'
/// inverse dual posteriors at `w0[n]`.
///
/// Converged means both the prior change and every agent's distance from the
/// new prior fall below `tol`. Inconsistent observations are dropped.
pub fn run_dual_fixed_point(
    obs: &[Observation],
    net: &Network,
    c: &PriceVector,
    priced: &CapacitySpec,
    w0_init: &PriceVector,
    opts: &LearnOptions,
) -> Result<FixedPointTrace> {
    let pool = check_options(obs, opts)?;
    priced.check_against(net)?;
    if priced.is_empty() {
        return Err(Error::Invalid("no priced links".into()));
    }
    let groups = Groups::new(obs, net)?;
    let mut prior = PriceVector::new();
    for id in priced.links() {
        let v = w0_init.value(id)?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Invalid(format!(
                "initial dual price on link {id} is negative ({v})"
            )));
        }
        prior.set(id, v);
    }
    let mut priors = vec![prior.clone()];
    let mut agents = Vec::new();
    let mut skipped = Vec::new();
    let mut gap = f64::INFINITY;
    let mut converged = false;
    for n in 1..=opts.max_iter {
        let solved = groups.solve(pool.as_ref(), |view, path| {
            // A subnetwork may exclude some priced links.
            let local = priced.iter().filter(|(l, _)| view.contains_link(*l));
            let local = CapacitySpec::new(local).expect("subset of a valid spec");
            inverse_duals(view, c, &local, &prior, path)
        });
        let mut results = Vec::with_capacity(solved.len());
        for r in solved {
            match r {
                Ok(r) => results.push(Some(r)),
                Err(Error::ObservationInconsistent(_)) => results.push(None),
                Err(e) => return Err(e),
            }
        }
        agents.clear();
        skipped.clear();
        for (ob, &g) in obs.iter().zip(&groups.of_obs) {
            match &results[g] {
                Some(r) => agents.push(AgentPosterior {
                    agent_id: ob.agent_id.clone(),
                    weight: ob.weight,
                    posterior: prior
                        .iter()
                        .map(|(l, v)| (l, r.posterior.get(l).unwrap_or(v)))
                        .collect(),
                    objective: r.objective,
                }),
                None => skipped.push(ob.agent_id.clone()),
            }
        }
        if agents.is_empty() {
            return Err(Error::NoUsableObservations {
                skipped: skipped.len(),
            });
        }
        if n == 1 && !skipped.is_empty() {
            log::warn!("{} inconsistent observations skipped", skipped.len());
        }
        let next = PriceVector::weighted_mean(agents.iter().map(|a| (a.weight, &a.posterior)))
            .expect("positive weights");
        gap = next.max_abs_diff(&prior);
        let spread = agents
            .iter()
            .map(|a| a.posterior.max_abs_diff(&next))
            .fold(0.0, f64::max);
        log::debug!("dual iteration {n}: gap {gap:.3e}, spread {spread:.3e}");
        prior = next;
        priors.push(prior.clone());
        if gap < opts.tol && spread < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(FixedPointTrace {
        iterations: priors.len() - 1,
        priors,
        agents,
        converged,
        final_gap: gap,
        skipped,
    })
}
