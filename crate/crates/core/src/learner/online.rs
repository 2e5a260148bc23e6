use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::data::{CapacitySpec, Observation};
use crate::error::{Error, Result};
use crate::graph::Network;
use crate::inverse::inverse_duals;
use crate::price::PriceVector;

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub update_index: usize,
    pub timestamp: Option<f64>,
    pub agent_id: String,
    /// `None` when the observation was skipped as inconsistent.
    pub objective: Option<f64>,
    pub prior_after: PriceVector,
}

/// Streaming dual-price monitor: each observation replaces the prior by that
/// agent's posterior. Only the prior and counters are persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineState {
    pub current_prior: PriceVector,
    pub update_count: usize,
    pub last_timestamp: Option<f64>,
    #[serde(skip)]
    pub log: Vec<LogEntry>,
}

impl OnlineState {
    pub fn new(prior: PriceVector) -> Result<Self> {
        if let Some((l, v)) = prior.iter().find(|(_, v)| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid(format!(
                "prior dual price on link {l} is negative ({v})"
            )));
        }
        Ok(OnlineState {
            current_prior: prior,
            update_count: 0,
            last_timestamp: None,
            log: Vec::new(),
        })
    }

    /// Processes one observation in place and returns its log entry.
    pub fn update(
        &mut self,
        ob: &Observation,
        net: &Network,
        c: &PriceVector,
        priced: &CapacitySpec,
    ) -> Result<&LogEntry> {
        ob.validate(net)?;
        let view = ob.view(net)?;
        let local = CapacitySpec::new(priced.iter().filter(|(l, _)| view.contains_link(*l)))?;
        let objective = match inverse_duals(&view, c, &local, &self.current_prior, &ob.path) {
            Ok(r) => {
                for (l, v) in r.posterior.iter() {
                    self.current_prior.set(l, v);
                }
                Some(r.objective)
            }
            Err(Error::ObservationInconsistent(_)) => {
                log::warn!("skipping inconsistent observation {}", ob.agent_id);
                None
            }
            Err(e) => return Err(e),
        };
        self.update_count += 1;
        if ob.timestamp.is_some() {
            self.last_timestamp = ob.timestamp;
        }
        self.log.push(LogEntry {
            update_index: self.update_count,
            timestamp: ob.timestamp,
            agent_id: ob.agent_id.clone(),
            objective,
            prior_after: self.current_prior.clone(),
        });
        Ok(self.log.last().unwrap())
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let state: OnlineState = serde_json::from_str(&text).map_err(|e| {
            Error::Invalid(format!("{}: malformed state file: {e}", path.display()))
        })?;
        OnlineState::new(state.current_prior.clone())?;
        Ok(state)
    }

    pub fn save(&self, path: &FsPath) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("state serializes");
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Functional form of [`OnlineState::update`].
pub fn online_update(
    mut state: OnlineState,
    ob: &Observation,
    net: &Network,
    c: &PriceVector,
    priced: &CapacitySpec,
) -> Result<OnlineState> {
    state.update(ob, net, c, priced)?;
    Ok(state)
}
