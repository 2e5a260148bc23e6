//! Bundled benchmark networks.

use crate::data::{CapacitySpec, DemandTable};
use crate::graph::{enumerate_paths, Network, Path};
use crate::io;

pub const NGUYEN_DUPUIS_LINKS: &str = include_str!("../data/nguyen_dupuis_links.csv");
pub const NGUYEN_DUPUIS_DEMAND: &str = include_str!("../data/nguyen_dupuis_demand.csv");
pub const NGUYEN_DUPUIS_CAPS_800: &str = include_str!("../data/nguyen_dupuis_caps_800.csv");
pub const NGUYEN_DUPUIS_CAPS_500: &str = include_str!("../data/nguyen_dupuis_caps_500.csv");
pub const TOY_LINKS: &str = include_str!("../data/toy_links.csv");
pub const FOUR_NODE_LINKS: &str = include_str!("../data/four_node_links.csv");
pub const QUEENS_LINKS: &str = include_str!("../data/queens_links.csv");

/// Gateway labels of the Queens freeway network, grouped by cardinal direction.
pub const QUEENS_GATEWAYS: [(&str, [&str; 2]); 4] = [
    ("N", ["N1", "N2"]),
    ("E", ["E1", "E2"]),
    ("S", ["S1", "S2"]),
    ("W", ["W1", "W2"]),
];

fn bundled(name: &str, text: &str) -> Network {
    io::parse_network(name, text).expect("bundled network is valid")
}

/// 13 nodes, 19 links.
pub fn nguyen_dupuis() -> Network {
    bundled("nguyen_dupuis_links.csv", NGUYEN_DUPUIS_LINKS)
}

pub fn nguyen_dupuis_demand() -> DemandTable {
    io::parse_demand(
        "nguyen_dupuis_demand.csv",
        NGUYEN_DUPUIS_DEMAND,
        &nguyen_dupuis(),
    )
    .expect("bundled demand")
}

/// Capacity 400 on link 1 and 800 on link 7.
pub fn nguyen_dupuis_caps_800() -> CapacitySpec {
    io::parse_capacity(
        "nguyen_dupuis_caps_800.csv",
        NGUYEN_DUPUIS_CAPS_800,
        &nguyen_dupuis(),
    )
    .expect("bundled caps")
}

/// Capacity 400 on link 1 and 500 on link 7.
pub fn nguyen_dupuis_caps_500() -> CapacitySpec {
    io::parse_capacity(
        "nguyen_dupuis_caps_500.csv",
        NGUYEN_DUPUIS_CAPS_500,
        &nguyen_dupuis(),
    )
    .expect("bundled caps")
}

/// Three parallel links O->D with costs 1, 2, 4.
pub fn toy() -> Network {
    bundled("toy_links.csv", TOY_LINKS)
}

/// Four nodes, five links, three routes from 1 to 4: (1,4), (2,5), (1,3,5).
pub fn four_node() -> Network {
    bundled("four_node_links.csv", FOUR_NODE_LINKS)
}

/// 40-link freeway network with free-flow times in seconds.
pub fn queens() -> Network {
    bundled("queens_links.csv", QUEENS_LINKS)
}

/// OD pairs of the Nguyen-Dupuis demand, in catalogue order.
pub const NGUYEN_DUPUIS_ODS: [(&str, &str); 4] = [("1", "2"), ("4", "2"), ("1", "3"), ("4", "3")];

/// The 25 simple Nguyen-Dupuis paths in catalogue order: grouped by OD pair and
/// sorted by link sequence within a pair. Path number `k` is at index `k - 1`.
pub fn nguyen_dupuis_paths() -> Vec<Path> {
    let net = nguyen_dupuis();
    NGUYEN_DUPUIS_ODS
        .iter()
        .flat_map(|(o, d)| {
            let mut paths = enumerate_paths(&net, o, d, usize::MAX);
            paths.sort_by(|a, b| a.links.cmp(&b.links));
            paths
        })
        .collect()
}

/// Catalogue number (1-based) of a Nguyen-Dupuis path.
pub fn nguyen_dupuis_path_number(path: &Path) -> Option<usize> {
    nguyen_dupuis_paths()
        .iter()
        .position(|p| p == path)
        .map(|i| i + 1)
}
