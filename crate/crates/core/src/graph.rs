//! Directed network model: links with base costs, node adjacency, and simple paths.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::price::PriceVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for LinkId {
    fn from(id: u32) -> Self {
        LinkId(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub tail: String,
    pub head: String,
    pub base_cost: f64,
}

impl Link {
    pub fn new(id: u32, tail: impl Into<String>, head: impl Into<String>, base_cost: f64) -> Self {
        Link {
            id: LinkId(id),
            tail: tail.into(),
            head: head.into(),
            base_cost,
        }
    }
}

/// An immutable directed network. Links are kept sorted by id; nodes are indexed
/// in order of first appearance along that ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<String>,
    node_index: HashMap<String, usize>,
    links: Vec<Link>,
    link_index: HashMap<LinkId, usize>,
    ends: Vec<(usize, usize)>,
    outgoing: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(mut links: Vec<Link>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::Network("no links".into()));
        }
        links.sort_by_key(|l| l.id);
        let mut nodes = Vec::new();
        let mut node_index = HashMap::new();
        let mut link_index = HashMap::new();
        let mut ends = Vec::with_capacity(links.len());
        for (pos, link) in links.iter().enumerate() {
            if link.id.0 == 0 {
                return Err(Error::Network("link ids must be positive".into()));
            }
            if link_index.insert(link.id, pos).is_some() {
                return Err(Error::Network(format!("duplicate link id {}", link.id)));
            }
            if link.tail == link.head {
                return Err(Error::Network(format!(
                    "link {} is a self-loop on node {}",
                    link.id, link.tail
                )));
            }
            if link.tail.is_empty() || link.head.is_empty() {
                return Err(Error::Network(format!(
                    "link {} has an empty node id",
                    link.id
                )));
            }
            if !link.base_cost.is_finite() || link.base_cost < 0.0 {
                return Err(Error::NegativeCost {
                    link: link.id,
                    value: link.base_cost,
                });
            }
            let mut intern = |name: &str| -> usize {
                if let Some(&ix) = node_index.get(name) {
                    return ix;
                }
                nodes.push(name.to_string());
                node_index.insert(name.to_string(), nodes.len() - 1);
                nodes.len() - 1
            };
            let t = intern(&link.tail);
            let h = intern(&link.head);
            ends.push((t, h));
        }
        let mut outgoing = vec![Vec::new(); nodes.len()];
        for (pos, &(t, _)) in ends.iter().enumerate() {
            outgoing[t].push(pos);
        }
        Ok(Network {
            nodes,
            node_index,
            links,
            link_index,
            ends,
            outgoing,
        })
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link_ids(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.links.iter().map(|l| l.id)
    }

    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.link_index.get(&id).map(|&p| &self.links[p])
    }

    pub fn contains_link(&self, id: LinkId) -> bool {
        self.link_index.contains_key(&id)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains_node(&self, name: &str) -> bool {
        self.node_index.contains_key(name)
    }

    pub fn base_costs(&self) -> PriceVector {
        self.links.iter().map(|l| (l.id, l.base_cost)).collect()
    }

    pub(crate) fn node_ix(&self, name: &str) -> Option<usize> {
        self.node_index.get(name).copied()
    }

    pub(crate) fn link_pos(&self, id: LinkId) -> Option<usize> {
        self.link_index.get(&id).copied()
    }

    pub(crate) fn ends(&self, pos: usize) -> (usize, usize) {
        self.ends[pos]
    }

    pub(crate) fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    /// The subnetwork made of the given links. Fails on unknown ids.
    pub fn restrict(&self, keep: &BTreeSet<LinkId>) -> Result<Network> {
        for id in keep {
            if !self.contains_link(*id) {
                return Err(Error::Network(format!(
                    "subnetwork references unknown link {id}"
                )));
            }
        }
        Network::new(
            self.links
                .iter()
                .filter(|l| keep.contains(&l.id))
                .cloned()
                .collect(),
        )
    }

    /// The network with the given links removed.
    pub fn without_links(&self, drop: &[LinkId]) -> Result<Network> {
        Network::new(
            self.links
                .iter()
                .filter(|l| !drop.contains(&l.id))
                .cloned()
                .collect(),
        )
    }

    /// Number of nodes whose label is not one of `gateways`.
    pub fn interior_node_count(&self, gateways: &[&str]) -> usize {
        self.nodes
            .iter()
            .filter(|n| !gateways.contains(&n.as_str()))
            .count()
    }
}

/// An observed or computed route: an ordered link sequence from origin to destination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path {
    pub origin: String,
    pub destination: String,
    pub links: Vec<LinkId>,
}

impl Path {
    pub fn new(origin: impl Into<String>, destination: impl Into<String>, links: &[u32]) -> Self {
        Path {
            origin: origin.into(),
            destination: destination.into(),
            links: links.iter().map(|&l| LinkId(l)).collect(),
        }
    }

    pub fn od(&self) -> (&str, &str) {
        (&self.origin, &self.destination)
    }

    pub fn contains(&self, link: LinkId) -> bool {
        self.links.contains(&link)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{} [", self.origin, self.destination)?;
        for (i, l) in self.links.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("]")
    }
}

pub fn validate_path(net: &Network, path: &Path) -> Result<()> {
    let Some(&first) = path.links.first() else {
        return Err(Error::Path("empty link sequence".into()));
    };
    let mut positions = Vec::with_capacity(path.links.len());
    for &id in &path.links {
        let pos = net
            .link_pos(id)
            .ok_or_else(|| Error::Path(format!("unknown link {id}")))?;
        positions.push(pos);
    }
    let first_tail = &net.links[positions[0]].tail;
    if *first_tail != path.origin {
        return Err(Error::Path(format!(
            "endpoint mismatch: link {first} starts at {first_tail}, origin is {}",
            path.origin
        )));
    }
    for w in positions.windows(2) {
        let (a, b) = (&net.links[w[0]], &net.links[w[1]]);
        if a.head != b.tail {
            return Err(Error::Path(format!(
                "disconnected: link {} ends at {} but link {} starts at {}",
                a.id, a.head, b.id, b.tail
            )));
        }
    }
    let last = &net.links[*positions.last().unwrap()];
    if last.head != path.destination {
        return Err(Error::Path(format!(
            "endpoint mismatch: link {} ends at {}, destination is {}",
            last.id, last.head, path.destination
        )));
    }
    let mut seen = HashSet::with_capacity(positions.len() + 1);
    seen.insert(net.ends[positions[0]].0);
    for &p in &positions {
        let head = net.ends[p].1;
        if !seen.insert(head) {
            return Err(Error::Path(format!("repeated node {}", net.nodes[head])));
        }
    }
    Ok(())
}

/// Sum of `costs` over the links of `path`.
pub fn path_cost(costs: &PriceVector, path: &Path) -> Result<f64> {
    path.links.iter().try_fold(0.0, |acc, &id| {
        costs
            .get(id)
            .map(|c| acc + c)
            .ok_or(Error::MissingValue(id))
    })
}

/// All simple paths between `origin` and `destination`, ascending by base cost
/// (ties by link sequence), truncated at `max_paths`. Exponential; for small networks.
pub fn enumerate_paths(
    net: &Network,
    origin: &str,
    destination: &str,
    max_paths: usize,
) -> Vec<Path> {
    let (Some(o), Some(d)) = (net.node_ix(origin), net.node_ix(destination)) else {
        return Vec::new();
    };
    if o == d || max_paths == 0 {
        return Vec::new();
    }
    let mut found: Vec<(f64, Vec<LinkId>)> = Vec::new();
    let mut on_path = vec![false; net.node_count()];
    let mut stack = Vec::new();
    on_path[o] = true;
    dfs(net, o, d, 0.0, &mut on_path, &mut stack, &mut found);
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    found.truncate(max_paths);
    found
        .into_iter()
        .map(|(_, links)| Path {
            origin: origin.to_string(),
            destination: destination.to_string(),
            links,
        })
        .collect()
}

fn dfs(
    net: &Network,
    at: usize,
    dest: usize,
    cost: f64,
    on_path: &mut [bool],
    stack: &mut Vec<LinkId>,
    found: &mut Vec<(f64, Vec<LinkId>)>,
) {
    for &pos in net.outgoing(at) {
        let (_, head) = net.ends(pos);
        if on_path[head] {
            continue;
        }
        let link = &net.links()[pos];
        stack.push(link.id);
        let c = cost + link.base_cost;
        if head == dest {
            found.push((c, stack.clone()));
        } else {
            on_path[head] = true;
            dfs(net, head, dest, c, on_path, stack, found);
            on_path[head] = false;
        }
        stack.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;

    #[test]
    fn rejects_duplicate_and_self_loop() {
        let dup = Network::new(vec![
            Link::new(1, "a", "b", 1.0),
            Link::new(1, "b", "c", 1.0),
        ]);
        assert!(matches!(dup, Err(Error::Network(m)) if m.contains("duplicate")));
        let lp = Network::new(vec![Link::new(1, "a", "a", 1.0)]);
        assert!(lp.is_err());
        let neg = Network::new(vec![Link::new(1, "a", "b", -1.0)]);
        assert!(matches!(neg, Err(Error::NegativeCost { .. })));
        assert!(Network::new(vec![]).is_err());
    }

    #[test]
    fn validate_path_cases() {
        let nd = datasets::nguyen_dupuis();
        validate_path(&nd, &Path::new("1", "2", &[2, 18, 11])).unwrap();
        let err = validate_path(&nd, &Path::new("1", "2", &[1, 7])).unwrap_err();
        assert!(err.to_string().contains("disconnected"), "{err}");
        let err = validate_path(&nd, &Path::new("1", "3", &[1, 5, 7, 9, 11])).unwrap_err();
        assert!(err.to_string().contains("endpoint mismatch"), "{err}");
        let err = validate_path(&nd, &Path::new("1", "2", &[99])).unwrap_err();
        assert!(err.to_string().contains("unknown link"), "{err}");
        assert!(validate_path(&nd, &Path::new("1", "2", &[])).is_err());
    }

    #[test]
    fn repeated_node_rejected() {
        let net = Network::new(vec![
            Link::new(1, "a", "b", 1.0),
            Link::new(2, "b", "a", 1.0),
            Link::new(3, "a", "c", 1.0),
        ])
        .unwrap();
        let err = validate_path(&net, &Path::new("a", "c", &[1, 2, 3])).unwrap_err();
        assert!(err.to_string().contains("repeated node"), "{err}");
    }

    #[test]
    fn nguyen_dupuis_path_lengths() {
        let nd = datasets::nguyen_dupuis();
        let c = nd.base_costs();
        assert_eq!(
            path_cost(&c, &Path::new("1", "2", &[1, 5, 7, 9, 11])).unwrap(),
            29.0
        );
        assert_eq!(
            path_cost(&c, &Path::new("1", "2", &[2, 18, 11])).unwrap(),
            32.0
        );
        let zero = PriceVector::uniform(nd.link_ids(), 0.0);
        assert_eq!(
            path_cost(&zero, &Path::new("1", "2", &[2, 18, 11])).unwrap(),
            0.0
        );
        let partial: PriceVector = [(LinkId(2), 1.0)].into_iter().collect();
        assert!(matches!(
            path_cost(&partial, &Path::new("1", "2", &[2, 18, 11])),
            Err(Error::MissingValue(LinkId(18)))
        ));
    }

    #[test]
    fn enumerate_small_cases() {
        let nd = datasets::nguyen_dupuis();
        let p12 = enumerate_paths(&nd, "1", "2", 100);
        assert_eq!(p12.len(), 8);
        let c = nd.base_costs();
        assert_eq!(path_cost(&c, &p12[0]).unwrap(), 29.0);
        assert_eq!(path_cost(&c, p12.last().unwrap()).unwrap(), 44.0);
        let p43: Vec<f64> = enumerate_paths(&nd, "4", "3", 100)
            .iter()
            .map(|p| path_cost(&c, p).unwrap())
            .collect();
        assert_eq!(p43, vec![32.0, 34.0, 36.0, 38.0, 39.0, 42.0]);
        assert_eq!(enumerate_paths(&nd, "1", "2", 3).len(), 3);
        assert!(enumerate_paths(&nd, "2", "1", 10).is_empty());

        let single = Network::new(vec![Link::new(1, "a", "b", 3.0)]).unwrap();
        assert_eq!(
            enumerate_paths(&single, "a", "b", 5),
            vec![Path::new("a", "b", &[1])]
        );
    }
}
