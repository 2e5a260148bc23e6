//! Per-agent inverse shortest-path LPs.
//!
//! Both variants share one program. For every link `a` with prior cost `p_a`
//! the posterior is `p_a - e_a + f_a` (only links with a free parameter carry
//! `e`, `f`), and node potentials `y` with `y_origin = 0` must satisfy
//!
//! ```text
//! y_head - y_tail + e_a - f_a <= p_a      (dual feasibility)
//! y_dest + sum_{a in P} (e_a - f_a) = sum_{a in P} p_a   (strong duality, unit flow)
//! e_a - f_a <= nonneg_bound_a             (posterior parameter stays >= 0)
//! ```
//!
//! The L1 objective `sum(e + f)` rarely has a unique minimizer. A second stage
//! holds the L1 value at its optimum and minimizes `sum(e)`, so among equally
//! close posteriors the one that raises competing links is preferred over one
//! that discounts the observed route.

use std::collections::BTreeMap;

use crate::data::CapacitySpec;
use crate::error::{Error, Result};
use crate::graph::{validate_path, LinkId, Network, Path};
use crate::lp::{self, LinearProgram, LpStatus, Relation, VarId};
use crate::price::PriceVector;

#[derive(Debug, Clone, PartialEq)]
pub struct InverseResult {
    /// Posterior costs (cost variant) or dual prices (dual variant).
    pub posterior: PriceVector,
    /// L1 distance between prior and posterior.
    pub objective: f64,
    /// Shortest-path potentials, origin at 0.
    pub node_potentials: BTreeMap<String, f64>,
}

/// Snap values that differ from a reference by rounding noise.
fn snap(v: f64, reference: f64) -> f64 {
    if (v - reference).abs() <= 1e-11 * (1.0 + reference.abs()) {
        reference
    } else if v.abs() <= 1e-11 {
        0.0
    } else {
        v
    }
}

struct Adjustable {
    link: LinkId,
    /// The parameter's own prior value (`c0_a` or `w0_a`); the posterior is kept >= 0.
    prior: f64,
}

/// Builds and solves the two-stage program. `cost_prior[pos]` is the link's full
/// prior cost; `adjustable[pos]` marks the links whose parameter may move.
fn solve_inverse(
    net: &Network,
    observed: &Path,
    cost_prior: &[f64],
    adjustable: &[Option<Adjustable>],
) -> Result<Option<InverseResult>> {
    validate_path(net, observed)?;
    let origin = net.node_ix(&observed.origin).expect("validated path");
    let dest = net.node_ix(&observed.destination).expect("validated path");
    let mut lp = LinearProgram::new();
    let y: Vec<Option<VarId>> = net
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| (i != origin).then(|| lp.add_free(format!("y_{n}"), 0.0)))
        .collect();
    let ef: Vec<Option<(VarId, VarId)>> = adjustable
        .iter()
        .map(|a| {
            a.as_ref().map(|a| {
                (
                    lp.add_nonneg(format!("e_{}", a.link), 1.0),
                    lp.add_nonneg(format!("f_{}", a.link), 1.0),
                )
            })
        })
        .collect();

    for (pos, _) in net.links().iter().enumerate() {
        let (t, h) = net.ends(pos);
        let mut terms = Vec::with_capacity(4);
        if let Some(v) = y[h] {
            terms.push((v, 1.0));
        }
        if let Some(v) = y[t] {
            terms.push((v, -1.0));
        }
        if let Some((e, f)) = ef[pos] {
            terms.push((e, 1.0));
            terms.push((f, -1.0));
        }
        lp.add_constraint(terms, Relation::Le, cost_prior[pos]);
    }

    let mut terms = vec![(y[dest].expect("destination differs from origin"), 1.0)];
    let mut rhs = 0.0;
    for id in &observed.links {
        let pos = net.link_pos(*id).expect("validated path");
        rhs += cost_prior[pos];
        if let Some((e, f)) = ef[pos] {
            terms.push((e, 1.0));
            terms.push((f, -1.0));
        }
    }
    lp.add_constraint(terms, Relation::Eq, rhs);

    for (pos, a) in adjustable.iter().enumerate() {
        if let (Some(a), Some((e, f))) = (a, ef[pos]) {
            lp.add_constraint(vec![(e, 1.0), (f, -1.0)], Relation::Le, a.prior);
        }
    }

    let stage1 = lp::solve(&lp);
    match stage1.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(None),
        other => return Err(Error::Solver(other)),
    }
    let z = stage1.objective.max(0.0);

    let all: Vec<(VarId, VarId)> = ef.iter().flatten().copied().collect();
    let mut sol = stage1;
    if z > 0.0 && !all.is_empty() {
        let mut lp2 = lp.clone();
        lp2.add_constraint(
            all.iter()
                .flat_map(|&(e, f)| [(e, 1.0), (f, 1.0)])
                .collect(),
            Relation::Le,
            z,
        );
        for &(_, f) in &all {
            lp2.set_cost(f, 0.0);
        }
        let stage2 = lp::solve(&lp2);
        match stage2.status {
            LpStatus::Optimal => sol = stage2,
            other => {
                log::warn!("inverse tie-break stage returned {other}; keeping first-stage solution")
            }
        }
    }

    let mut posterior = PriceVector::new();
    let mut objective = 0.0;
    for (pos, a) in adjustable.iter().enumerate() {
        if let (Some(a), Some((e, f))) = (a, ef[pos]) {
            let v = snap(a.prior - sol.value(e) + sol.value(f), a.prior).max(0.0);
            objective += (v - a.prior).abs();
            posterior.set(a.link, v);
        }
    }
    let node_potentials = net
        .nodes()
        .iter()
        .zip(&y)
        .map(|(n, v)| (n.clone(), v.map_or(0.0, |v| sol.value(v))))
        .collect();
    Ok(Some(InverseResult {
        posterior,
        objective,
        node_potentials,
    }))
}

/// L1-nearest cost vector to `prior` under which `observed` is a shortest path
/// of `net`. Every link of `net` is adjustable and posteriors stay >= 0.
pub fn inverse_costs(net: &Network, prior: &PriceVector, observed: &Path) -> Result<InverseResult> {
    let mut cost_prior = Vec::with_capacity(net.links().len());
    let mut adjustable = Vec::with_capacity(net.links().len());
    for l in net.links() {
        let p = prior.value(l.id)?;
        if !p.is_finite() || p < 0.0 {
            return Err(Error::NegativeCost {
                link: l.id,
                value: p,
            });
        }
        cost_prior.push(p);
        adjustable.push(Some(Adjustable {
            link: l.id,
            prior: p,
        }));
    }
    solve_inverse(net, observed, &cost_prior, &adjustable)?.ok_or_else(|| {
        Error::Invalid(format!(
            "cost inverse for {observed} is infeasible; this is a bug"
        ))
    })
}

/// L1-nearest nonnegative dual prices on the `priced` links to `w0` under which
/// `observed` is a shortest path for costs `c + w`. Other links keep cost `c`.
///
/// Fails with [`Error::ObservationInconsistent`] when no such prices exist.
pub fn inverse_duals(
    net: &Network,
    c: &PriceVector,
    priced: &CapacitySpec,
    w0: &PriceVector,
    observed: &Path,
) -> Result<InverseResult> {
    let mut cost_prior = Vec::with_capacity(net.links().len());
    let mut adjustable = Vec::with_capacity(net.links().len());
    for l in net.links() {
        let base = c.value(l.id)?;
        if !base.is_finite() || base < 0.0 {
            return Err(Error::NegativeCost {
                link: l.id,
                value: base,
            });
        }
        if priced.contains(l.id) {
            let w = w0.value(l.id)?;
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Invalid(format!(
                    "prior dual price on link {} is negative ({w})",
                    l.id
                )));
            }
            cost_prior.push(base + w);
            adjustable.push(Some(Adjustable {
                link: l.id,
                prior: w,
            }));
        } else {
            cost_prior.push(base);
            adjustable.push(None);
        }
    }
    solve_inverse(net, observed, &cost_prior, &adjustable)?
        .ok_or_else(|| Error::ObservationInconsistent(observed.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::forward::shortest_path;
    use crate::graph::path_cost;

    fn assert_close(got: &PriceVector, want: &PriceVector) {
        assert!(got.max_abs_diff(want) < 1e-9, "{got:?} vs {want:?}");
    }

    fn toy_priced() -> CapacitySpec {
        CapacitySpec::priced_only([1, 2, 3].map(LinkId))
    }

    #[test]
    fn toy_single_agents_from_zero() {
        let toy = datasets::toy();
        let c = toy.base_costs();
        let w0 = PriceVector::from([(1, 0.0), (2, 0.0), (3, 0.0)]);
        let cases = [
            (1, [0.0, 0.0, 0.0], 0.0),
            (2, [1.0, 0.0, 0.0], 1.0),
            (3, [3.0, 2.0, 0.0], 5.0),
        ];
        for (link, want, obj) in cases {
            let r =
                inverse_duals(&toy, &c, &toy_priced(), &w0, &Path::new("O", "D", &[link])).unwrap();
            assert_close(
                &r.posterior,
                &PriceVector::from([(1, want[0]), (2, want[1]), (3, want[2])]),
            );
            assert!((r.objective - obj).abs() < 1e-9);
        }
    }

    #[test]
    fn tie_break_raises_competitors() {
        let toy = datasets::toy();
        let w0 = PriceVector::from([(1, 1.25), (2, 0.5), (3, 0.0)]);
        let r = inverse_duals(
            &toy,
            &toy.base_costs(),
            &toy_priced(),
            &w0,
            &Path::new("O", "D", &[2]),
        )
        .unwrap();
        assert_close(
            &r.posterior,
            &PriceVector::from([(1, 1.5), (2, 0.5), (3, 0.0)]),
        );
    }

    #[test]
    fn four_node_costs() {
        let four = datasets::four_node();
        let prior = four.base_costs();
        let r = inverse_costs(&four, &prior, &Path::new("1", "4", &[1, 4])).unwrap();
        assert_eq!(r.posterior, prior);
        assert_eq!(r.objective, 0.0);

        let r = inverse_costs(&four, &prior, &Path::new("1", "4", &[1, 3, 5])).unwrap();
        assert!((r.objective - 0.5).abs() < 1e-9);
        assert_close(
            &r.posterior,
            &PriceVector::from([(1, 0.5), (2, 0.5), (3, 0.0), (4, 0.5), (5, 0.5)]),
        );
    }

    #[test]
    fn nguyen_dupuis_path_8_duals() {
        let nd = datasets::nguyen_dupuis();
        let priced = CapacitySpec::priced_only([1, 7].map(LinkId));
        let w0 = PriceVector::from([(1, 0.0), (7, 0.0)]);
        let path8 = Path::new("1", "2", &[2, 18, 11]);
        let r = inverse_duals(&nd, &nd.base_costs(), &priced, &w0, &path8).unwrap();
        assert!((r.objective - 3.0).abs() < 1e-9);
        let w1 = r.posterior.get(LinkId(1)).unwrap();
        let w7 = r.posterior.get(LinkId(7)).unwrap();
        assert!((w1 + w7 - 3.0).abs() < 1e-9);
        let costs = nd.base_costs().plus(&r.posterior);
        let (_, best) = shortest_path(&nd, &costs, "1", "2").unwrap();
        assert!((best - path_cost(&costs, &path8).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn inconsistent_observation_is_reported() {
        let toy = datasets::toy();
        let priced = CapacitySpec::priced_only([LinkId(3)]);
        let w0 = PriceVector::from([(3, 0.0)]);
        let err = inverse_duals(
            &toy,
            &toy.base_costs(),
            &priced,
            &w0,
            &Path::new("O", "D", &[2]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ObservationInconsistent(_)));
    }
}
