use std::collections::BTreeSet;

use netlearn::data::CapacitySpec;
use netlearn::datasets;
use netlearn::forward::{
    assignment_shares, decompose_paths, shortest_path, solve_multicommodity, write_duals,
    write_flows, FlowSolution,
};
use netlearn::graph::{enumerate_paths, path_cost, LinkId, Network, Path};
use netlearn::price::PriceVector;
use proptest::prelude::*;

fn nd_solution(caps: &CapacitySpec) -> FlowSolution {
    solve_multicommodity(
        &datasets::nguyen_dupuis(),
        &datasets::nguyen_dupuis_demand(),
        caps,
    )
    .unwrap()
}

fn positive_paths(sol: &FlowSolution) -> BTreeSet<usize> {
    decompose_paths(&datasets::nguyen_dupuis(), sol)
        .unwrap()
        .iter()
        .map(|pf| datasets::nguyen_dupuis_path_number(&pf.path).unwrap())
        .collect()
}

#[test]
fn duals_and_costs_for_both_regimes() {
    let s800 = nd_solution(&datasets::nguyen_dupuis_caps_800());
    assert!((s800.duals.get(LinkId(1)).unwrap() - 7.0).abs() < 1e-6);
    assert!((s800.duals.get(LinkId(7)).unwrap() - 5.0).abs() < 1e-6);
    assert!((s800.total_cost - 68_400.0).abs() < 1e-6);

    let s500 = nd_solution(&datasets::nguyen_dupuis_caps_500());
    assert!((s500.duals.get(LinkId(1)).unwrap() - 7.0).abs() < 1e-6);
    assert!((s500.duals.get(LinkId(7)).unwrap() - 6.0).abs() < 1e-6);
    assert!((s500.total_cost - 70_000.0).abs() < 1e-6);
}

#[test]
fn flows_conserve_and_respect_capacity() {
    let nd = datasets::nguyen_dupuis();
    for caps in [
        datasets::nguyen_dupuis_caps_800(),
        datasets::nguyen_dupuis_caps_500(),
    ] {
        let sol = nd_solution(&caps);
        for (m, dm) in sol.commodities.iter().enumerate() {
            for node in nd.nodes() {
                let mut net_out = 0.0;
                for l in nd.links() {
                    let x = sol.commodity_flow(m, l.id);
                    assert!(x >= 0.0);
                    if l.tail == *node {
                        net_out += x;
                    }
                    if l.head == *node {
                        net_out -= x;
                    }
                }
                let want = if *node == dm.origin {
                    dm.flow
                } else if *node == dm.destination {
                    -dm.flow
                } else {
                    0.0
                };
                assert!((net_out - want).abs() < 1e-7, "commodity {m} node {node}");
            }
        }
        for (l, cap) in caps.iter() {
            let netlearn::data::Capacity::Limit(u) = cap else {
                unreachable!()
            };
            let flow = sol.link_flow(l);
            assert!(flow <= u + 1e-8);
            if sol.duals.get(l).unwrap() > 0.0 {
                assert!(
                    (flow - u).abs() < 1e-7,
                    "complementary slackness on link {l}"
                );
            }
        }
    }
}

#[test]
fn positive_flow_paths_are_shortest_under_priced_costs() {
    let nd = datasets::nguyen_dupuis();
    for caps in [
        datasets::nguyen_dupuis_caps_800(),
        datasets::nguyen_dupuis_caps_500(),
    ] {
        let sol = nd_solution(&caps);
        let costs = nd.base_costs().plus(&sol.duals);
        for pf in decompose_paths(&nd, &sol).unwrap() {
            let (o, d) = pf.path.od();
            let (_, best) = shortest_path(&nd, &costs, o, d).unwrap();
            assert!(
                (path_cost(&costs, &pf.path).unwrap() - best).abs() < 1e-7,
                "{}",
                pf.path
            );
        }
    }
}

#[test]
fn decomposition_reflects_regimes() {
    let p800 = positive_paths(&nd_solution(&datasets::nguyen_dupuis_caps_800()));
    let p500 = positive_paths(&nd_solution(&datasets::nguyen_dupuis_caps_500()));
    assert!(p800.contains(&18) && !p800.contains(&13), "{p800:?}");
    assert!(p500.contains(&13) && !p500.contains(&18), "{p500:?}");
    let s = nd_solution(&datasets::nguyen_dupuis_caps_800());
    let pieces = decompose_paths(&datasets::nguyen_dupuis(), &s).unwrap();
    for (m, dm) in s.commodities.iter().enumerate() {
        let total: f64 = pieces
            .iter()
            .filter(|p| p.commodity == m)
            .map(|p| p.flow)
            .sum();
        assert!((total - dm.flow).abs() < 1e-6);
    }
}

#[test]
fn infeasible_capacities_are_reported() {
    let caps = CapacitySpec::limits(&[(1, 1.0), (2, 1.0)]).unwrap();
    let err = solve_multicommodity(
        &datasets::nguyen_dupuis(),
        &datasets::nguyen_dupuis_demand(),
        &caps,
    )
    .unwrap_err();
    assert!(matches!(
        err,
        netlearn::Error::Solver(netlearn::lp::LpStatus::Infeasible)
    ));
    let priced = CapacitySpec::priced_only([LinkId(1)]);
    assert!(solve_multicommodity(
        &datasets::nguyen_dupuis(),
        &datasets::nguyen_dupuis_demand(),
        &priced
    )
    .is_err());
}

#[test]
fn flow_tables_have_headers() {
    let sol = nd_solution(&datasets::nguyen_dupuis_caps_800());
    let mut a = Vec::new();
    write_flows(&sol, &mut a).unwrap();
    let a = String::from_utf8(a).unwrap();
    assert!(a.starts_with("link_id,commodity,flow\n"));
    assert!(a.contains(",1->2,"));
    let mut b = Vec::new();
    write_duals(&sol.duals, &mut b).unwrap();
    assert_eq!(
        String::from_utf8(b).unwrap(),
        "link_id,dual\n1,7.000000\n7,5.000000\n"
    );
}

#[test]
fn shares_for_identical_agents() {
    let four = datasets::four_node();
    let costs = vec![four.base_costs(); 4];
    let ods = vec![("1".to_string(), "4".to_string()); 4];
    let shares = assignment_shares(&four, &costs, &ods, None).unwrap();
    assert_eq!(shares.len(), 1);
    assert_eq!(shares[0].1, 1.0);

    // Tied incumbents are kept.
    let inc = vec![Path::new("1", "4", &[2, 5]); 4];
    let shares = assignment_shares(&four, &costs, &ods, Some(&inc)).unwrap();
    assert_eq!(shares, vec![(Path::new("1", "4", &[2, 5]), 1.0)]);
}

fn networks() -> Vec<(Network, Vec<(&'static str, &'static str)>)> {
    vec![
        (
            datasets::nguyen_dupuis(),
            vec![("1", "2"), ("1", "3"), ("4", "2"), ("4", "3")],
        ),
        (
            datasets::four_node(),
            vec![("1", "4"), ("1", "3"), ("2", "4")],
        ),
        (datasets::toy(), vec![("O", "D")]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shortest_path_matches_enumeration(raw in prop::collection::vec(0u32..20, 19), halves in any::<bool>()) {
        for (net, ods) in networks() {
            let costs: PriceVector = net
                .link_ids()
                .zip(&raw)
                .map(|(l, &c)| (l, if halves { c as f64 / 2.0 } else { c as f64 }))
                .collect();
            for (o, d) in ods {
                let (p, c) = shortest_path(&net, &costs, o, d).unwrap();
                let best = enumerate_paths(&net, o, d, 1000)
                    .iter()
                    .map(|q| path_cost(&costs, q).unwrap())
                    .fold(f64::INFINITY, f64::min);
                prop_assert!((c - best).abs() < 1e-9);
                prop_assert_eq!(path_cost(&costs, &p).unwrap(), c);
                // The tie-break picks the smallest sequence among minimizers.
                let smallest = enumerate_paths(&net, o, d, 1000)
                    .into_iter()
                    .filter(|q| (path_cost(&costs, q).unwrap() - best).abs() < 1e-9)
                    .map(|q| q.links)
                    .min()
                    .unwrap();
                prop_assert_eq!(p.links, smallest);
            }
        }
    }
}
