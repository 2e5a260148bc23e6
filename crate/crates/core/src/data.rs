//! Demand, capacity, and observation records that accompany a [`Network`].

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{validate_path, LinkId, Network, Path};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub origin: String,
    pub destination: String,
    pub flow: f64,
}

impl Demand {
    pub fn commodity(&self) -> String {
        format!("{}->{}", self.origin, self.destination)
    }
}

/// Origin-destination flows, one entry per commodity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemandTable {
    entries: Vec<Demand>,
}

impl DemandTable {
    pub fn new(entries: Vec<Demand>) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &entries {
            if d.origin == d.destination {
                return Err(Error::Invalid(format!(
                    "demand origin equals destination ({})",
                    d.origin
                )));
            }
            if !d.flow.is_finite() || d.flow < 0.0 {
                return Err(Error::Invalid(format!(
                    "demand {} has invalid flow {}",
                    d.commodity(),
                    d.flow
                )));
            }
            if !seen.insert((d.origin.clone(), d.destination.clone())) {
                return Err(Error::Invalid(format!(
                    "duplicate demand pair {}",
                    d.commodity()
                )));
            }
        }
        Ok(DemandTable { entries })
    }

    pub fn from_pairs(pairs: &[(&str, &str, f64)]) -> Result<Self> {
        DemandTable::new(
            pairs
                .iter()
                .map(|&(o, d, f)| Demand {
                    origin: o.into(),
                    destination: d.into(),
                    flow: f,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[Demand] {
        &self.entries
    }

    pub fn total_flow(&self) -> f64 {
        self.entries.iter().map(|d| d.flow).sum()
    }

    /// Checks that every referenced node exists in `net`.
    pub fn check_against(&self, net: &Network) -> Result<()> {
        for d in &self.entries {
            for n in [&d.origin, &d.destination] {
                if !net.contains_node(n) {
                    return Err(Error::Invalid(format!(
                        "demand references unknown node {n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Capacity {
    Limit(f64),
    /// The link carries a latent capacity whose dual price is inferred, value unknown.
    PricedOnly,
}

/// Capacitated (or priced) links.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CapacitySpec {
    entries: BTreeMap<LinkId, Capacity>,
}

impl CapacitySpec {
    pub fn new(entries: impl IntoIterator<Item = (LinkId, Capacity)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (l, c) in entries {
            if let Capacity::Limit(u) = c {
                if u.is_nan() || u <= 0.0 {
                    return Err(Error::Invalid(format!(
                        "capacity of link {l} must be positive, got {u}"
                    )));
                }
            }
            if map.insert(l, c).is_some() {
                return Err(Error::Invalid(format!(
                    "duplicate capacity entry for link {l}"
                )));
            }
        }
        Ok(CapacitySpec { entries: map })
    }

    pub fn limits(pairs: &[(u32, f64)]) -> Result<Self> {
        CapacitySpec::new(pairs.iter().map(|&(l, u)| (LinkId(l), Capacity::Limit(u))))
    }

    pub fn priced_only(links: impl IntoIterator<Item = LinkId>) -> Self {
        CapacitySpec {
            entries: links
                .into_iter()
                .map(|l| (l, Capacity::PricedOnly))
                .collect(),
        }
    }

    pub fn links(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LinkId, Capacity)> + '_ {
        self.entries.iter().map(|(&l, &c)| (l, c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, link: LinkId) -> bool {
        self.entries.contains_key(&link)
    }

    pub fn check_against(&self, net: &Network) -> Result<()> {
        for l in self.links() {
            if !net.contains_link(l) {
                return Err(Error::Invalid(format!(
                    "capacity references unknown link {l}"
                )));
            }
        }
        Ok(())
    }
}

/// One agent's revealed route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub agent_id: String,
    pub path: Path,
    pub weight: f64,
    pub timestamp: Option<f64>,
    pub subnetwork: Option<BTreeSet<LinkId>>,
}

impl Observation {
    pub fn new(agent_id: impl Into<String>, path: Path) -> Self {
        Observation {
            agent_id: agent_id.into(),
            path,
            weight: 1.0,
            timestamp: None,
            subnetwork: None,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_timestamp(mut self, t: f64) -> Self {
        self.timestamp = Some(t);
        self
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        if !self.weight.is_finite() || self.weight <= 0.0 {
            return Err(Error::Invalid(format!(
                "observation {} has non-positive weight {}",
                self.agent_id, self.weight
            )));
        }
        validate_path(net, &self.path)
            .map_err(|e| Error::Invalid(format!("observation {}: {e}", self.agent_id)))?;
        if let Some(sub) = &self.subnetwork {
            if let Some(l) = self.path.links.iter().find(|l| !sub.contains(l)) {
                return Err(Error::Invalid(format!(
                    "observation {}: path link {l} lies outside its subnetwork",
                    self.agent_id
                )));
            }
        }
        Ok(())
    }

    /// The network this agent optimizes over: its subnetwork if given, otherwise `net`.
    pub fn view<'a>(&self, net: &'a Network) -> Result<std::borrow::Cow<'a, Network>> {
        match &self.subnetwork {
            None => Ok(std::borrow::Cow::Borrowed(net)),
            Some(sub) => Ok(std::borrow::Cow::Owned(net.restrict(sub)?)),
        }
    }
}
