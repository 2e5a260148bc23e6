mod common;

use common::oracle::brute_inverse;
use netlearn::data::CapacitySpec;
use netlearn::datasets;
use netlearn::forward::shortest_path;
use netlearn::graph::{enumerate_paths, path_cost, LinkId, Network, Path};
use netlearn::inverse::{inverse_costs, inverse_duals};
use netlearn::lp::{self, LinearProgram, Relation};
use netlearn::price::PriceVector;
use proptest::prelude::*;

/// Cost-inverse objectives for the 25 catalogue paths at the base costs,
/// computed once with an external LP solver on the path-comparison form.
const ND_COST_OBJECTIVES: [f64; 25] = [
    0.0, 4.0, 9.0, 12.0, 6.0, 10.0, 15.0, 3.0, 0.0, 4.0, 9.0, 12.0, 6.0, 0.0, 5.0, 8.0, 4.0, 6.0,
    11.0, 2.0, 7.0, 10.0, 6.0, 4.0, 0.0,
];

fn routes(net: &Network, p: &Path) -> Vec<Path> {
    let (o, d) = p.od();
    enumerate_paths(net, o, d, 1000)
}

fn check_certificate(net: &Network, costs: &PriceVector, p: &Path) {
    let (o, d) = p.od();
    let (_, best) = shortest_path(net, costs, o, d).unwrap();
    assert!(
        (path_cost(costs, p).unwrap() - best).abs() < 1e-7,
        "{p} not shortest"
    );
}

/// Path-comparison LP with explicit `e`, `f` splits, solved by the in-crate kernel.
fn path_form_objective(net: &Network, prior: &PriceVector, p: &Path) -> f64 {
    let mut lp = LinearProgram::new();
    let mut ef = Vec::new();
    for l in net.links() {
        let e = lp.add_nonneg(format!("e{}", l.id), 1.0);
        let f = lp.add_nonneg(format!("f{}", l.id), 1.0);
        lp.add_constraint(
            vec![(e, 1.0), (f, -1.0)],
            Relation::Le,
            prior.get(l.id).unwrap(),
        );
        ef.push((l.id, e, f));
    }
    for q in routes(net, p) {
        let mut terms = Vec::new();
        let mut rhs = 0.0;
        for &(l, e, f) in &ef {
            let coef = p.contains(l) as i32 as f64 - q.contains(l) as i32 as f64;
            if coef != 0.0 {
                terms.push((e, -coef));
                terms.push((f, coef));
                rhs -= coef * prior.get(l).unwrap();
            }
        }
        if !terms.is_empty() {
            lp.add_constraint(terms, Relation::Le, rhs);
        }
    }
    let sol = lp::solve(&lp);
    assert!(sol.is_optimal());
    sol.objective
}

#[test]
fn four_node_examples() {
    let four = datasets::four_node();
    let prior = PriceVector::uniform(four.link_ids(), 0.5);
    let r = inverse_costs(&four, &prior, &Path::new("1", "4", &[1, 4])).unwrap();
    assert_eq!(r.posterior, prior);
    assert_eq!(r.objective, 0.0);
    let p = Path::new("1", "4", &[1, 3, 5]);
    let r = inverse_costs(&four, &prior, &p).unwrap();
    assert!((r.objective - 0.5).abs() < 1e-9);
    assert!(r.posterior.get(LinkId(3)).unwrap().abs() < 1e-9);
    for q in routes(&four, &p) {
        assert!((path_cost(&r.posterior, &q).unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn single_link_network_keeps_prior() {
    let net = Network::new(vec![netlearn::graph::Link::new(1, "a", "b", 3.0)]).unwrap();
    let prior = PriceVector::from([(1, 2.5)]);
    let r = inverse_costs(&net, &prior, &Path::new("a", "b", &[1])).unwrap();
    assert_eq!(r.posterior, prior);
    assert_eq!(r.objective, 0.0);
}

#[test]
fn nguyen_dupuis_cost_objectives_match_reference() {
    let nd = datasets::nguyen_dupuis();
    let c0 = nd.base_costs();
    for (k, p) in datasets::nguyen_dupuis_paths().iter().enumerate() {
        let r = inverse_costs(&nd, &c0, p).unwrap();
        assert!(
            (r.objective - ND_COST_OBJECTIVES[k]).abs() < 1e-7,
            "path {}: {}",
            k + 1,
            r.objective
        );
        assert!((r.objective - r.posterior.l1_distance(&c0)).abs() < 1e-7);
        check_certificate(&nd, &r.posterior, p);
    }
}

#[test]
fn nguyen_dupuis_duals_match_brute_force() {
    let nd = datasets::nguyen_dupuis();
    let c = nd.base_costs();
    let priced = CapacitySpec::priced_only([1, 7].map(LinkId));
    let mut consistent = 0;
    for w0 in [
        PriceVector::from([(1, 0.0), (7, 0.0)]),
        PriceVector::from([(1, 7.0), (7, 5.0)]),
        PriceVector::from([(1, 2.0), (7, 9.0)]),
    ] {
        for p in datasets::nguyen_dupuis_paths() {
            let oracle = brute_inverse(&routes(&nd, &p), &p, &c, &w0);
            match (inverse_duals(&nd, &c, &priced, &w0, &p), oracle) {
                (Ok(r), Some(v)) => {
                    consistent += 1;
                    assert!(
                        (r.objective - v).abs() < 1e-7,
                        "{p}: {} vs {v}",
                        r.objective
                    );
                    check_certificate(&nd, &c.plus(&r.posterior), &p);
                    assert!(r.posterior.min_value().unwrap() >= 0.0);
                }
                (Err(netlearn::Error::ObservationInconsistent(_)), None) => {}
                (got, want) => panic!("{p}: {got:?} vs oracle {want:?}"),
            }
        }
    }
    assert!(consistent >= 18);
}

#[test]
fn path_eight_split_is_deterministic() {
    let nd = datasets::nguyen_dupuis();
    let priced = CapacitySpec::priced_only([1, 7].map(LinkId));
    let w0 = PriceVector::from([(1, 0.0), (7, 0.0)]);
    let p = &datasets::nguyen_dupuis_paths()[7];
    let a = inverse_duals(&nd, &nd.base_costs(), &priced, &w0, p).unwrap();
    let b = inverse_duals(&nd, &nd.base_costs(), &priced, &w0, p).unwrap();
    assert_eq!(a, b);
    let w = a.posterior.get(LinkId(1)).unwrap() + a.posterior.get(LinkId(7)).unwrap();
    assert!((w - 3.0).abs() < 1e-9 && (a.objective - 3.0).abs() < 1e-9);
}

fn small_costs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u32..16).prop_map(|v| v as f64 / 4.0), n)
}

fn vector(net: &Network, vals: &[f64]) -> PriceVector {
    net.link_ids().zip(vals).map(|(l, &v)| (l, v)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_inverse_matches_brute_force(vals in small_costs(5), pick in 0usize..3, toy in any::<bool>()) {
        let (net, o, d) = if toy { (datasets::toy(), "O", "D") } else { (datasets::four_node(), "1", "4") };
        let prior = vector(&net, &vals);
        let all = enumerate_paths(&net, o, d, 1000);
        let p = &all[pick % all.len()];
        let r = inverse_costs(&net, &prior, p).unwrap();
        let want = brute_inverse(&all, p, &PriceVector::new(), &prior).unwrap();
        prop_assert!((r.objective - want).abs() < 1e-7, "{} vs {}", r.objective, want);
        prop_assert!((r.objective - r.posterior.l1_distance(&prior)).abs() < 1e-7);
        check_certificate(&net, &r.posterior, p);
        // Feeding the posterior back changes nothing.
        let again = inverse_costs(&net, &r.posterior, p).unwrap();
        prop_assert!(again.objective.abs() < 1e-9);
        prop_assert!(again.posterior.max_abs_diff(&r.posterior) < 1e-9);
    }

    #[test]
    fn dual_inverse_matches_brute_force(c in small_costs(5), w in small_costs(5), pick in 0usize..3, toy in any::<bool>()) {
        let (net, o, d) = if toy { (datasets::toy(), "O", "D") } else { (datasets::four_node(), "1", "4") };
        let c = vector(&net, &c);
        let w0 = vector(&net, &w);
        let priced = CapacitySpec::priced_only(net.link_ids());
        let all = enumerate_paths(&net, o, d, 1000);
        let p = &all[pick % all.len()];
        let r = inverse_duals(&net, &c, &priced, &w0, p).unwrap();
        let want = brute_inverse(&all, p, &c, &w0).unwrap();
        prop_assert!((r.objective - want).abs() < 1e-7, "{} vs {}", r.objective, want);
        prop_assert!(r.posterior.min_value().unwrap() >= 0.0);
        check_certificate(&net, &c.plus(&r.posterior), p);
        let again = inverse_duals(&net, &c, &priced, &r.posterior, p).unwrap();
        prop_assert!(again.objective.abs() < 1e-9);
    }

    #[test]
    fn nguyen_dupuis_cost_inverse_matches_path_form(vals in small_costs(19), pick in 0usize..25) {
        let nd = datasets::nguyen_dupuis();
        let prior = vector(&nd, &vals.iter().map(|v| v * 4.0).collect::<Vec<_>>());
        let p = &datasets::nguyen_dupuis_paths()[pick];
        let r = inverse_costs(&nd, &prior, p).unwrap();
        let want = path_form_objective(&nd, &prior, p);
        prop_assert!((r.objective - want).abs() < 1e-7, "{} vs {}", r.objective, want);
        check_certificate(&nd, &r.posterior, p);
    }

    #[test]
    fn raising_off_route_prices_never_costs_more(w in small_costs(3), bump in small_costs(3), pick in 0usize..3) {
        let toy = datasets::toy();
        let priced = CapacitySpec::priced_only(toy.link_ids());
        let p = Path::new("O", "D", &[pick as u32 + 1]);
        let lo = vector(&toy, &w);
        let hi: PriceVector = lo
            .iter()
            .zip(&bump)
            .map(|((l, v), b)| (l, if p.contains(l) { v } else { v + b }))
            .collect();
        let a = inverse_duals(&toy, &toy.base_costs(), &priced, &lo, &p).unwrap();
        let b = inverse_duals(&toy, &toy.base_costs(), &priced, &hi, &p).unwrap();
        prop_assert!(b.objective <= a.objective + 1e-9, "{} > {}", b.objective, a.objective);
    }
}

#[test]
fn raising_an_on_route_price_can_cost_more() {
    let toy = datasets::toy();
    let priced = CapacitySpec::priced_only(toy.link_ids());
    let p = Path::new("O", "D", &[2]);
    let a = inverse_duals(
        &toy,
        &toy.base_costs(),
        &priced,
        &PriceVector::from([(1, 0.0), (2, 0.0), (3, 0.0)]),
        &p,
    );
    let b = inverse_duals(
        &toy,
        &toy.base_costs(),
        &priced,
        &PriceVector::from([(1, 0.0), (2, 0.25), (3, 0.0)]),
        &p,
    );
    assert!((a.unwrap().objective - 1.0).abs() < 1e-9);
    assert!((b.unwrap().objective - 1.25).abs() < 1e-9);
}
