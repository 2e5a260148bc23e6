//! Scenario files and the synthetic observation generators built on them.
//!
//! A scenario is a TOML document. Relative file paths resolve against the
//! directory holding the scenario file. See `data/scenarios/` for examples.

use std::path::{Path as FsPath, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::data::{CapacitySpec, Observation};
use crate::datasets::QUEENS_GATEWAYS;
use crate::error::{Error, Result};
use crate::forward::{decompose_paths, shortest_path, solve_multicommodity};
use crate::graph::{LinkId, Network, Path};
use crate::io;
use crate::price::PriceVector;

/// Name of the random generator recorded in output headers.
pub const RNG_NAME: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    CostHeterogeneity,
    FlowSampling,
    RegimeStream,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDistribution {
    pub id: u32,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Correlation {
    pub links: [u32; 2],
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub capacity: PathBuf,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gateway {
    pub direction: String,
    pub nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub network: PathBuf,
    pub demand: Option<PathBuf>,
    pub capacity: Option<PathBuf>,
    pub samples: Option<usize>,
    pub origin: Option<String>,
    pub destination: Option<String>,
    #[serde(default, rename = "link")]
    pub links: Vec<LinkDistribution>,
    #[serde(default, rename = "correlation")]
    pub correlations: Vec<Correlation>,
    #[serde(default, rename = "segment")]
    pub segments: Vec<Segment>,
    /// Replay: an observation file to replay instead of synthesizing one.
    pub source: Option<PathBuf>,
    pub start_minute: Option<f64>,
    pub end_minute: Option<f64>,
    pub interval_minutes: Option<f64>,
    /// Replay: extra travel time on a fully sensitive link at full load, as a multiple of free-flow time.
    pub congestion: Option<f64>,
    #[serde(default, rename = "gateway")]
    pub gateways: Vec<Gateway>,
}

impl ScenarioSpec {
    pub fn parse(text: &str, base: &FsPath) -> Result<Self> {
        let mut spec: ScenarioSpec =
            toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut spec.network);
        spec.demand.iter_mut().for_each(fix);
        spec.capacity.iter_mut().for_each(fix);
        spec.source.iter_mut().for_each(fix);
        spec.segments.iter_mut().for_each(|s| fix(&mut s.capacity));
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(FsPath::new("."));
        ScenarioSpec::parse(&text, base)
    }

    fn require<'a, T>(&self, field: &'a Option<T>, name: &str) -> Result<&'a T> {
        field
            .as_ref()
            .ok_or_else(|| Error::Scenario(format!("{:?} scenario requires `{name}`", self.kind)))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        let mut files = vec![&self.network];
        files.extend(self.demand.iter());
        files.extend(self.capacity.iter());
        files.extend(self.source.iter());
        files.extend(self.segments.iter().map(|s| &s.capacity));
        for f in files {
            if !f.is_file() {
                return bad(format!("referenced file {} does not exist", f.display()));
            }
        }
        if self.samples == Some(0) {
            return bad("samples must be positive".into());
        }
        for l in &self.links {
            if !l.mean.is_finite() || !l.sd.is_finite() || l.sd < 0.0 {
                return bad(format!(
                    "link {}: invalid mean/sd ({}, {})",
                    l.id, l.mean, l.sd
                ));
            }
        }
        for c in &self.correlations {
            if !(-1.0..=1.0).contains(&c.rho) {
                return bad(format!("correlation {} out of [-1, 1]", c.rho));
            }
        }
        match self.kind {
            ScenarioKind::CostHeterogeneity => {
                self.require(&self.samples, "samples")?;
                self.require(&self.origin, "origin")?;
                self.require(&self.destination, "destination")?;
            }
            ScenarioKind::FlowSampling => {
                self.require(&self.demand, "demand")?;
                self.require(&self.capacity, "capacity")?;
                self.require(&self.samples, "samples")?;
            }
            ScenarioKind::RegimeStream => {
                self.require(&self.demand, "demand")?;
                if self.segments.is_empty() {
                    return bad("regime_stream requires at least one [[segment]]".into());
                }
            }
            ScenarioKind::Replay => {}
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Drawn perceived costs and the routes they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub costs: Vec<PriceVector>,
    pub observations: Vec<Observation>,
}

/// Multivariate normal link costs truncated to the nonnegative orthant (whole
/// draws with a negative component are rejected) with optional pairwise
/// correlations; links without an entry keep their base cost.
struct CostSampler {
    links: Vec<LinkId>,
    mean: DVector<f64>,
    chol: DMatrix<f64>,
}

impl CostSampler {
    fn new(spec: &ScenarioSpec, net: &Network) -> Result<Self> {
        let links: Vec<LinkId> = net.link_ids().collect();
        let n = links.len();
        let mut mean = DVector::from_iterator(n, net.links().iter().map(|l| l.base_cost));
        let mut sd = DVector::zeros(n);
        for d in &spec.links {
            let k = links.iter().position(|l| l.0 == d.id).ok_or_else(|| {
                Error::Scenario(format!("distribution for unknown link {}", d.id))
            })?;
            if d.sd == 0.0 && d.mean < 0.0 {
                return Err(Error::Scenario(format!(
                    "link {} has a degenerate cost distribution (sd 0, mean {})",
                    d.id, d.mean
                )));
            }
            mean[k] = d.mean;
            sd[k] = d.sd;
        }
        let mut cov = DMatrix::from_diagonal(&sd.map(|s| s * s));
        for c in &spec.correlations {
            let ix = |id: u32| {
                links
                    .iter()
                    .position(|l| l.0 == id)
                    .ok_or_else(|| Error::Scenario(format!("correlation on unknown link {id}")))
            };
            let (i, j) = (ix(c.links[0])?, ix(c.links[1])?);
            cov[(i, j)] = c.rho * sd[i] * sd[j];
            cov[(j, i)] = cov[(i, j)];
        }
        // Zero-variance links get a unit placeholder so the factor exists; their
        // column of the factor is zeroed afterwards.
        let mut padded = cov.clone();
        for k in 0..n {
            if sd[k] == 0.0 {
                padded[(k, k)] = 1.0;
            }
        }
        let mut chol = padded
            .cholesky()
            .ok_or_else(|| Error::Scenario("cost covariance is not positive definite".into()))?
            .l();
        for k in 0..n {
            if sd[k] == 0.0 {
                chol.column_mut(k).fill(0.0);
                chol.row_mut(k).fill(0.0);
            }
        }
        Ok(CostSampler { links, mean, chol })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<PriceVector> {
        for _ in 0..MAX_REJECTIONS {
            let z = DVector::from_fn(self.links.len(), |_, _| {
                rng.sample::<f64, _>(StandardNormal)
            });
            let x = &self.mean + &self.chol * z;
            if x.iter().all(|&v| v >= 0.0) {
                return Ok(self.links.iter().copied().zip(x.iter().copied()).collect());
            }
        }
        Err(Error::Scenario(format!(
            "no nonnegative cost draw in {MAX_REJECTIONS} attempts; the distribution has too little mass above zero"
        )))
    }
}

const MAX_REJECTIONS: usize = 10_000;

/// Draws one perceived-cost vector per agent and records each agent's shortest path.
pub fn draw_population(spec: &ScenarioSpec) -> Result<Population> {
    if spec.kind != ScenarioKind::CostHeterogeneity {
        return Err(Error::Scenario(
            "draw_population needs a cost_heterogeneity scenario".into(),
        ));
    }
    let net = io::load_network(&spec.network)?;
    let origin = spec.require(&spec.origin, "origin")?;
    let destination = spec.require(&spec.destination, "destination")?;
    let sampler = CostSampler::new(spec, &net)?;
    let mut rng = spec.rng();
    let n = *spec.require(&spec.samples, "samples")?;
    let mut pop = Population {
        costs: Vec::with_capacity(n),
        observations: Vec::with_capacity(n),
    };
    for i in 0..n {
        let c = sampler.draw(&mut rng)?;
        let (path, _) = shortest_path(&net, &c, origin, destination)?;
        pop.observations
            .push(Observation::new(format!("a{}", i + 1), path));
        pop.costs.push(c);
    }
    Ok(pop)
}

pub fn simulate_population(spec: &ScenarioSpec) -> Result<Vec<Observation>> {
    Ok(draw_population(spec)?.observations)
}

fn sample_paths(
    net: &Network,
    demand: &PathBuf,
    caps: &CapacitySpec,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Path>> {
    let demand = io::load_demand(demand, net)?;
    let sol = solve_multicommodity(net, &demand, caps)?;
    let pieces = decompose_paths(net, &sol)?;
    if pieces.is_empty() {
        return Err(Error::Scenario("flow solution carries no flow".into()));
    }
    let dist = WeightedIndex::new(pieces.iter().map(|p| p.flow))
        .map_err(|e| Error::Scenario(format!("path flows are not a distribution: {e}")))?;
    Ok((0..n)
        .map(|_| pieces[dist.sample(rng)].path.clone())
        .collect())
}

/// Draws observations with probability proportional to path flow in the
/// capacitated multicommodity optimum.
pub fn sample_flow_observations(spec: &ScenarioSpec) -> Result<Vec<Observation>> {
    if spec.kind != ScenarioKind::FlowSampling {
        return Err(Error::Scenario(
            "sample_flow_observations needs a flow_sampling scenario".into(),
        ));
    }
    let net = io::load_network(&spec.network)?;
    let caps = io::load_capacity(spec.require(&spec.capacity, "capacity")?, &net)?;
    let n = *spec.require(&spec.samples, "samples")?;
    let mut rng = spec.rng();
    let paths = sample_paths(
        &net,
        spec.require(&spec.demand, "demand")?,
        &caps,
        n,
        &mut rng,
    )?;
    Ok(paths
        .into_iter()
        .enumerate()
        .map(|(i, p)| Observation::new(format!("a{}", i + 1), p))
        .collect())
}

/// Concatenates flow samples from consecutive capacity regimes, stamping
/// arrivals at unit intervals starting from 1.
pub fn build_regime_stream(segments: &[(ScenarioSpec, usize)]) -> Result<Vec<Observation>> {
    let mut out = Vec::new();
    for (spec, count) in segments {
        if *count == 0 {
            continue;
        }
        let mut seg = spec.clone();
        seg.kind = ScenarioKind::FlowSampling;
        seg.samples = Some(*count);
        for ob in sample_flow_observations(&seg)? {
            let t = out.len() + 1;
            out.push(Observation::new(format!("a{t}"), ob.path).with_timestamp(t as f64));
        }
    }
    Ok(out)
}

/// The per-segment specs of a regime_stream scenario; segment `k` uses seed `seed + k`.
pub fn regime_segments(spec: &ScenarioSpec) -> Vec<(ScenarioSpec, usize)> {
    spec.segments
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut seg = spec.clone();
            seg.kind = ScenarioKind::FlowSampling;
            seg.capacity = Some(s.capacity.clone());
            seg.samples = Some(s.samples);
            seg.segments.clear();
            seg.seed = spec.seed.wrapping_add(k as u64);
            (seg, s.samples)
        })
        .collect()
}

/// Synthetic gateway-to-gateway route stream. At every sampling instant a random
/// entry direction and a different exit direction are chosen; of the entry/exit
/// gateway pairs the one with the quickest route under time-varying congested
/// travel times is observed.
///
/// Travel time on link `a` at minute `t` is
/// `base_a * (1 + congestion * load(t) * s_a) * U(0.95, 1.05)`, where `load`
/// ramps from 0.25 to 1 over the window and `s_a` is fixed per link: about a
/// third of the links are bottlenecks with `s_a` in `[0.5, 1)`, the rest barely
/// react (`s_a < 0.1`).
pub fn synthesize_replay(spec: &ScenarioSpec) -> Result<Vec<Observation>> {
    let net = io::load_network(&spec.network)?;
    let gateways: Vec<(String, Vec<String>)> = if spec.gateways.is_empty() {
        QUEENS_GATEWAYS
            .iter()
            .map(|(d, n)| (d.to_string(), n.iter().map(|s| s.to_string()).collect()))
            .collect()
    } else {
        spec.gateways
            .iter()
            .map(|g| (g.direction.clone(), g.nodes.clone()))
            .collect()
    };
    if gateways.len() < 2 {
        return Err(Error::Scenario(
            "replay needs at least two gateway directions".into(),
        ));
    }
    for (_, nodes) in &gateways {
        if let Some(n) = nodes.iter().find(|n| !net.contains_node(n)) {
            return Err(Error::Scenario(format!(
                "gateway node {n} is not in the network"
            )));
        }
    }
    let start = spec.start_minute.unwrap_or(390.0);
    let end = spec.end_minute.unwrap_or(570.0);
    let step = spec.interval_minutes.unwrap_or(5.0);
    let congestion = spec.congestion.unwrap_or(1.5);
    if step.is_nan() || step <= 0.0 || end < start {
        return Err(Error::Scenario(
            "replay needs start <= end and a positive interval".into(),
        ));
    }
    let mut rng = spec.rng();
    let sensitivity: Vec<(LinkId, f64, f64)> = net
        .links()
        .iter()
        .map(|l| {
            let s = if rng.random_bool(1.0 / 3.0) {
                rng.random_range(0.5..1.0)
            } else {
                rng.random_range(0.0..0.1)
            };
            (l.id, l.base_cost, s)
        })
        .collect();
    let span = (end - start).max(step);
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = start + k as f64 * step;
        if t > end + 1e-9 {
            break;
        }
        k += 1;
        let load = 0.25 + 0.75 * (t - start) / span;
        let times: PriceVector = sensitivity
            .iter()
            .map(|&(l, base, s)| {
                (
                    l,
                    base * (1.0 + congestion * load * s) * rng.random_range(0.95..1.05),
                )
            })
            .collect();
        let mut chosen = None;
        for _attempt in 0..32 {
            let pair: Vec<_> = gateways.choose_multiple(&mut rng, 2).collect();
            let (from, to) = (&pair[0].1, &pair[1].1);
            let mut best: Option<(Path, f64)> = None;
            for o in from {
                for d in to {
                    if let Ok((p, c)) = shortest_path(&net, &times, o, d) {
                        if best.as_ref().is_none_or(|(_, bc)| c < *bc) {
                            best = Some((p, c));
                        }
                    }
                }
            }
            if let Some((p, _)) = best {
                chosen = Some(p);
                break;
            }
        }
        let path = chosen.ok_or_else(|| {
            Error::Scenario(format!("no gateway pair is connected at minute {t}"))
        })?;
        out.push(Observation::new(format!("q{k}"), path).with_timestamp(t));
    }
    Ok(out)
}

/// Observations plus header comments describing how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub observations: Vec<Observation>,
    pub comments: Vec<String>,
}

/// Runs the generator matching `spec.kind`.
pub fn generate(spec: &ScenarioSpec) -> Result<Generated> {
    let mut comments = vec![
        format!("rng={RNG_NAME} seed={}", spec.seed),
        format!("kind={:?}", spec.kind),
    ];
    let observations = match spec.kind {
        ScenarioKind::CostHeterogeneity => simulate_population(spec)?,
        ScenarioKind::FlowSampling => sample_flow_observations(spec)?,
        ScenarioKind::RegimeStream => build_regime_stream(&regime_segments(spec))?,
        ScenarioKind::Replay => match &spec.source {
            Some(src) => {
                let net = io::load_network(&spec.network)?;
                comments.push(format!("replayed from {}", src.display()));
                io::load_observations(src, &net)?
            }
            None => {
                comments.push("synthetic: generated stream, not field data".into());
                synthesize_replay(spec)?
            }
        },
    };
    Ok(Generated {
        observations,
        comments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data_dir() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
    }

    #[test]
    fn rejects_bad_specs() {
        let base = data_dir();
        let missing = "kind = \"flow_sampling\"\nseed = 1\nnetwork = \"nguyen_dupuis_links.csv\"\n";
        assert!(ScenarioSpec::parse(missing, &base).is_err());
        let nofile = "kind = \"replay\"\nseed = 1\nnetwork = \"nope.csv\"\n";
        assert!(ScenarioSpec::parse(nofile, &base).is_err());
        let rho = "kind = \"cost_heterogeneity\"\nseed = 1\nnetwork = \"four_node_links.csv\"\nsamples = 3\n\
                   origin = \"1\"\ndestination = \"4\"\n[[correlation]]\nlinks = [3, 5]\nrho = 1.5\n";
        assert!(ScenarioSpec::parse(rho, &base).is_err());
        let unknown = "kind = \"replay\"\nseed = 1\nnetwork = \"toy_links.csv\"\nbogus = 2\n";
        assert!(ScenarioSpec::parse(unknown, &base).is_err());
    }

    #[test]
    fn degenerate_distribution_is_an_error() {
        let text = "kind = \"cost_heterogeneity\"\nseed = 1\nnetwork = \"four_node_links.csv\"\nsamples = 3\n\
                    origin = \"1\"\ndestination = \"4\"\n[[link]]\nid = 2\nmean = -1.0\nsd = 0.0\n";
        let spec = ScenarioSpec::parse(text, &data_dir()).unwrap();
        assert!(matches!(
            simulate_population(&spec),
            Err(Error::Scenario(_))
        ));
    }
}
