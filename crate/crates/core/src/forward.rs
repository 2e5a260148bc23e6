//! Forward solvers: agent shortest paths and the capacitated multicommodity flow LP.

use std::collections::BTreeMap;
use std::io::Write;

use crate::data::{Capacity, CapacitySpec, Demand, DemandTable};
use crate::error::{Error, Result};
use crate::graph::{path_cost, validate_path, LinkId, Network, Path};
use crate::lp::{self, LinearProgram, LpStatus, Relation};
use crate::price::PriceVector;

/// Costs within this (relative) distance count as tied.
pub const TIE_TOL: f64 = 1e-9;

/// A tentative route to a node: cost, link ids, visited nodes.
type Label = (f64, Vec<LinkId>, Vec<usize>);

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * (1.0 + a.abs().max(b.abs()))
}

/// Per-link costs in link-position order, checked for completeness and sign.
fn cost_table(net: &Network, costs: &PriceVector) -> Result<Vec<f64>> {
    net.links()
        .iter()
        .map(|l| {
            let c = costs.value(l.id)?;
            if !c.is_finite() || c < -TIE_TOL {
                return Err(Error::NegativeCost {
                    link: l.id,
                    value: c,
                });
            }
            Ok(c.max(0.0))
        })
        .collect()
}

/// Minimum-cost simple path from `origin` to `destination`.
///
/// Label-setting over `(cost, link sequence)` labels: among paths tied within
/// [`TIE_TOL`] the lexicographically smallest link-id sequence wins.
pub fn shortest_path(
    net: &Network,
    costs: &PriceVector,
    origin: &str,
    destination: &str,
) -> Result<(Path, f64)> {
    let unreachable = || Error::Unreachable {
        origin: origin.to_string(),
        destination: destination.to_string(),
    };
    let o = net
        .node_ix(origin)
        .ok_or_else(|| Error::Network(format!("unknown node {origin}")))?;
    let d = net
        .node_ix(destination)
        .ok_or_else(|| Error::Network(format!("unknown node {destination}")))?;
    if o == d {
        return Err(Error::Path("origin equals destination".into()));
    }
    let table = cost_table(net, costs)?;
    let n = net.node_count();
    let mut label: Vec<Option<Label>> = vec![None; n];
    let mut done = vec![false; n];
    label[o] = Some((0.0, Vec::new(), vec![o]));
    loop {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if done[v] {
                continue;
            }
            let Some((cv, sv, _)) = &label[v] else {
                continue;
            };
            pick = match pick {
                None => Some(v),
                Some(u) => {
                    let (cu, su, _) = label[u].as_ref().unwrap();
                    if (*cv < *cu && !ties(*cv, *cu)) || (ties(*cv, *cu) && sv < su) {
                        Some(v)
                    } else {
                        Some(u)
                    }
                }
            };
        }
        let Some(u) = pick else { break };
        done[u] = true;
        if u == d {
            break;
        }
        let (cu, su, nu) = label[u].clone().unwrap();
        for &pos in net.outgoing(u) {
            let (_, h) = net.ends(pos);
            if done[h] || nu.contains(&h) {
                continue;
            }
            let cand = cu + table[pos];
            let mut seq = su.clone();
            seq.push(net.links()[pos].id);
            let better = match &label[h] {
                None => true,
                Some((ch, sh, _)) => {
                    (cand < *ch && !ties(cand, *ch)) || (ties(cand, *ch) && seq < *sh)
                }
            };
            if better {
                let mut visited = nu.clone();
                visited.push(h);
                label[h] = Some((cand, seq, visited));
            }
        }
    }
    let (_, links, _) = label[d]
        .take()
        .filter(|_| done[d])
        .ok_or_else(unreachable)?;
    let path = Path {
        origin: origin.to_string(),
        destination: destination.to_string(),
        links,
    };
    let cost = path_cost(costs, &path)?;
    Ok((path, cost))
}

/// Assigns each agent to a shortest path under its own costs and returns the
/// fraction of agents per path, sorted by path.
///
/// When `incumbents` is given, an agent whose incumbent path is still valid and
/// still tied-shortest keeps it instead of taking the lexicographic tie-break.
pub fn assignment_shares(
    net: &Network,
    costs: &[PriceVector],
    ods: &[(String, String)],
    incumbents: Option<&[Path]>,
) -> Result<Vec<(Path, f64)>> {
    if costs.len() != ods.len() || incumbents.is_some_and(|p| p.len() != costs.len()) {
        return Err(Error::Invalid(
            "one cost vector, OD pair and incumbent per agent required".into(),
        ));
    }
    let mut counts: BTreeMap<Path, usize> = BTreeMap::new();
    for (i, (c, (o, d))) in costs.iter().zip(ods).enumerate() {
        let (best, best_cost) = shortest_path(net, c, o, d)?;
        let chosen = match incumbents.map(|p| &p[i]) {
            Some(inc) if validate_path(net, inc).is_ok() && ties(path_cost(c, inc)?, best_cost) => {
                inc.clone()
            }
            _ => best,
        };
        *counts.entry(chosen).or_default() += 1;
    }
    let total = costs.len().max(1) as f64;
    Ok(counts
        .into_iter()
        .map(|(p, k)| (p, k as f64 / total))
        .collect())
}

/// Optimal link flows and capacity duals of the multicommodity min-cost flow LP.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub commodities: Vec<Demand>,
    /// `flows[m][link]` for commodity index `m`; zero entries omitted.
    pub flows: Vec<BTreeMap<LinkId, f64>>,
    /// Nonnegative dual price per capacitated link.
    pub duals: PriceVector,
    pub total_cost: f64,
}

impl FlowSolution {
    pub fn link_flow(&self, link: LinkId) -> f64 {
        self.flows.iter().filter_map(|f| f.get(&link)).sum()
    }

    pub fn commodity_flow(&self, m: usize, link: LinkId) -> f64 {
        self.flows[m].get(&link).copied().unwrap_or(0.0)
    }
}

/// Below this a flow or dual is reported as zero.
const ZERO: f64 = 1e-9;

fn clean(v: f64) -> f64 {
    if v.abs() < ZERO {
        0.0
    } else {
        v
    }
}

/// Solves the node-arc multicommodity flow LP with bundled capacity rows
/// `sum_m x_m(a) <= u_a`. Duals are reported as `w_a = -d(cost)/d(u_a) >= 0`.
pub fn solve_multicommodity(
    net: &Network,
    demand: &DemandTable,
    caps: &CapacitySpec,
) -> Result<FlowSolution> {
    demand.check_against(net)?;
    caps.check_against(net)?;
    let mut lp = LinearProgram::new();
    let links = net.links();
    let mut vars = Vec::with_capacity(demand.entries().len());
    for (m, dm) in demand.entries().iter().enumerate() {
        let row: Vec<_> = links
            .iter()
            .map(|l| lp.add_nonneg(format!("x{m}_{}", l.id), l.base_cost))
            .collect();
        for node in net.nodes() {
            if *node == dm.destination {
                continue;
            }
            let supply = if *node == dm.origin { dm.flow } else { 0.0 };
            let mut terms = Vec::new();
            for (pos, l) in links.iter().enumerate() {
                if l.tail == *node {
                    terms.push((row[pos], 1.0));
                } else if l.head == *node {
                    terms.push((row[pos], -1.0));
                }
            }
            lp.add_constraint(terms, Relation::Eq, supply);
        }
        vars.push(row);
    }
    let mut cap_rows = Vec::new();
    for (id, cap) in caps.iter() {
        let Capacity::Limit(u) = cap else {
            return Err(Error::Invalid(format!("link {id} has no numeric capacity")));
        };
        let pos = net.link_pos(id).expect("checked above");
        let terms = vars.iter().map(|row| (row[pos], 1.0)).collect();
        cap_rows.push((id, lp.add_constraint(terms, Relation::Le, u)));
    }
    let sol = lp::solve(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(sol.status));
    }
    let flows = vars
        .iter()
        .map(|row| {
            links
                .iter()
                .zip(row)
                .filter_map(|(l, &v)| {
                    let x = clean(sol.value(v));
                    (x > 0.0).then_some((l.id, x))
                })
                .collect()
        })
        .collect();
    let duals = cap_rows
        .iter()
        .map(|&(id, r)| (id, clean(-sol.dual(r)).max(0.0)))
        .collect();
    Ok(FlowSolution {
        commodities: demand.entries().to_vec(),
        flows,
        duals,
        total_cost: sol.objective,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathFlow {
    pub commodity: usize,
    pub path: Path,
    pub flow: f64,
}

/// Splits each commodity's link flows into path flows by repeatedly stripping
/// the widest (max-bottleneck) simple path and subtracting its bottleneck.
pub fn decompose_paths(net: &Network, sol: &FlowSolution) -> Result<Vec<PathFlow>> {
    let mut out = Vec::new();
    for (m, dm) in sol.commodities.iter().enumerate() {
        let mut residual: BTreeMap<LinkId, f64> = sol.flows[m].clone();
        let mut remaining = dm.flow;
        let mut pieces = 0;
        while remaining > 1e-7 * (1.0 + dm.flow) {
            let Some((path, width)) = widest_path(net, &residual, &dm.origin, &dm.destination)
            else {
                return Err(Error::Decomposition(dm.commodity()));
            };
            let width = width.min(remaining);
            for l in &path.links {
                let r = residual.get_mut(l).unwrap();
                *r -= width;
                if *r <= ZERO {
                    residual.remove(l);
                }
            }
            remaining -= width;
            pieces += 1;
            out.push(PathFlow {
                commodity: m,
                path,
                flow: width,
            });
        }
        if pieces > 1 {
            log::debug!(
                "commodity {} splits over {pieces} paths; decomposition may not be unique",
                dm.commodity()
            );
        }
    }
    Ok(out)
}

/// Max-bottleneck simple path over links with positive residual; ties go to the
/// lexicographically smallest link sequence.
fn widest_path(
    net: &Network,
    residual: &BTreeMap<LinkId, f64>,
    origin: &str,
    destination: &str,
) -> Option<(Path, f64)> {
    let o = net.node_ix(origin)?;
    let d = net.node_ix(destination)?;
    let n = net.node_count();
    let mut label: Vec<Option<Label>> = vec![None; n];
    let mut done = vec![false; n];
    label[o] = Some((f64::INFINITY, Vec::new(), vec![o]));
    let wider = |a: f64, sa: &Vec<LinkId>, b: f64, sb: &Vec<LinkId>| {
        a > b + ZERO || ((a - b).abs() <= ZERO && sa < sb)
    };
    loop {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if done[v] || label[v].is_none() {
                continue;
            }
            pick = match pick {
                None => Some(v),
                Some(u) => {
                    let (wv, sv, _) = label[v].as_ref().unwrap();
                    let (wu, su, _) = label[u].as_ref().unwrap();
                    if wider(*wv, sv, *wu, su) {
                        Some(v)
                    } else {
                        Some(u)
                    }
                }
            };
        }
        let u = pick?;
        done[u] = true;
        if u == d {
            break;
        }
        let (wu, su, nu) = label[u].clone().unwrap();
        for &pos in net.outgoing(u) {
            let id = net.links()[pos].id;
            let Some(&r) = residual.get(&id) else {
                continue;
            };
            let (_, h) = net.ends(pos);
            if done[h] || nu.contains(&h) {
                continue;
            }
            let w = wu.min(r);
            let mut seq = su.clone();
            seq.push(id);
            let better = match &label[h] {
                None => true,
                Some((wh, sh, _)) => wider(w, &seq, *wh, sh),
            };
            if better {
                let mut visited = nu.clone();
                visited.push(h);
                label[h] = Some((w, seq, visited));
            }
        }
    }
    let (w, links, _) = label[d].take()?;
    Some((
        Path {
            origin: origin.to_string(),
            destination: destination.to_string(),
            links,
        },
        w,
    ))
}

/// `link_id,commodity,flow`, one row per positive commodity flow.
pub fn write_flows(sol: &FlowSolution, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "link_id,commodity,flow")?;
    for (m, flows) in sol.flows.iter().enumerate() {
        let name = sol.commodities[m].commodity();
        for (l, x) in flows {
            writeln!(out, "{l},{name},{x:.6}")?;
        }
    }
    Ok(())
}

/// `link_id,dual`.
pub fn write_duals(duals: &PriceVector, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "link_id,dual")?;
    for (l, w) in duals.iter() {
        writeln!(out, "{l},{w:.6}")?;
    }
    Ok(())
}
