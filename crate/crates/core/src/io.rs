//! Comma-separated file formats.
//!
//! | file         | header                                                  |
//! |--------------|---------------------------------------------------------|
//! | links        | `link_id,start_node,end_node,cost`                      |
//! | demand       | `origin,destination,flow`                               |
//! | capacity     | `link_id,capacity` (`priced` marks a priced-only link)  |
//! | prices       | `link_id,value`                                         |
//! | observations | `agent_id,timestamp,origin,destination,link_seq[,weight][,subnetwork]` |
//!
//! Fields are trimmed, lines starting with `#` are comments, and CRLF is accepted.
//! `link_seq` and `subnetwork` are `;`-separated link ids.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path as FsPath;

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::data::{Capacity, CapacitySpec, Demand, DemandTable, Observation};
use crate::error::{Error, Result};
use crate::graph::{Link, LinkId, Network, Path};
use crate::price::PriceVector;

pub const LINKS_HEADER: &str = "link_id,start_node,end_node,cost";
pub const DEMAND_HEADER: &str = "origin,destination,flow";
pub const CAPACITY_HEADER: &str = "link_id,capacity";
pub const PRICES_HEADER: &str = "link_id,value";
pub const OBSERVATION_HEADER: &str = "agent_id,timestamp,origin,destination,link_seq";

fn open(path: &FsPath) -> Result<(String, String)> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    Ok((path.display().to_string(), text))
}

struct Table {
    name: String,
    header: Vec<String>,
    rows: Vec<(u64, StringRecord)>,
}

impl Table {
    fn parse(name: &str, text: &str) -> Result<Table> {
        let mut rdr = ReaderBuilder::new()
            .has_headers(true)
            .trim(Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(text.as_bytes());
        let header = rdr
            .headers()
            .map_err(|e| Error::parse(name, 1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect::<Vec<_>>();
        if header.iter().all(|h| h.is_empty()) {
            return Err(Error::parse(name, 1, "missing header row"));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let line = rec
                .as_ref()
                .ok()
                .and_then(|r| r.position())
                .map(|p| p.line())
                .unwrap_or(0);
            let rec = rec.map_err(|e| Error::parse(name, line, e.to_string()))?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            if rec.len() != header.len() {
                return Err(Error::parse(
                    name,
                    line,
                    format!("expected {} fields, found {}", header.len(), rec.len()),
                ));
            }
            rows.push((line, rec));
        }
        Ok(Table {
            name: name.to_string(),
            header,
            rows,
        })
    }

    fn expect_header(&self, expected: &str) -> Result<()> {
        if self.header.join(",") != expected {
            return Err(Error::parse(
                &self.name,
                1,
                format!(
                    "expected header `{expected}`, found `{}`",
                    self.header.join(",")
                ),
            ));
        }
        Ok(())
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn err(&self, line: u64, msg: impl Into<String>) -> Error {
        Error::parse(&self.name, line, msg)
    }
}

fn parse_f64(t: &Table, line: u64, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| t.err(line, format!("invalid {what} `{field}`")))?;
    if v.is_nan() {
        return Err(t.err(line, format!("invalid {what} `{field}`")));
    }
    Ok(v)
}

fn parse_link_id(t: &Table, line: u64, field: &str) -> Result<LinkId> {
    field
        .parse::<u32>()
        .ok()
        .filter(|&v| v > 0)
        .map(LinkId)
        .ok_or_else(|| t.err(line, format!("invalid link id `{field}`")))
}

fn parse_link_seq(t: &Table, line: u64, field: &str) -> Result<Vec<LinkId>> {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_link_id(t, line, s))
        .collect()
}

pub fn parse_network(name: &str, text: &str) -> Result<Network> {
    let t = Table::parse(name, text)?;
    t.expect_header(LINKS_HEADER)?;
    if t.rows.is_empty() {
        return Err(Error::Network("no links".into()));
    }
    let mut links = Vec::with_capacity(t.rows.len());
    let mut seen = BTreeSet::new();
    for (line, r) in &t.rows {
        let id = parse_link_id(&t, *line, &r[0])?;
        if !seen.insert(id) {
            return Err(t.err(*line, format!("duplicate link id {id}")));
        }
        if r[1].is_empty() || r[2].is_empty() {
            return Err(t.err(*line, "empty node id"));
        }
        let cost = parse_f64(&t, *line, &r[3], "cost")?;
        if !cost.is_finite() || cost < 0.0 {
            return Err(t.err(
                *line,
                format!("cost must be finite and nonnegative, got {cost}"),
            ));
        }
        if r[1] == r[2] {
            return Err(t.err(*line, format!("self-loop on node {}", &r[1])));
        }
        links.push(Link {
            id,
            tail: r[1].to_string(),
            head: r[2].to_string(),
            base_cost: cost,
        });
    }
    Network::new(links)
}

pub fn load_network(path: impl AsRef<FsPath>) -> Result<Network> {
    let (name, text) = open(path.as_ref())?;
    parse_network(&name, &text)
}

pub fn write_network(net: &Network, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{LINKS_HEADER}")?;
    for l in net.links() {
        writeln!(out, "{},{},{},{}", l.id, l.tail, l.head, l.base_cost)?;
    }
    Ok(())
}

pub fn parse_demand(name: &str, text: &str, net: &Network) -> Result<DemandTable> {
    let t = Table::parse(name, text)?;
    t.expect_header(DEMAND_HEADER)?;
    let mut entries = Vec::new();
    for (line, r) in &t.rows {
        for node in [&r[0], &r[1]] {
            if !net.contains_node(node) {
                return Err(t.err(*line, format!("unknown node `{node}`")));
            }
        }
        let flow = parse_f64(&t, *line, &r[2], "flow")?;
        entries.push(Demand {
            origin: r[0].to_string(),
            destination: r[1].to_string(),
            flow,
        });
    }
    DemandTable::new(entries)
}

pub fn load_demand(path: impl AsRef<FsPath>, net: &Network) -> Result<DemandTable> {
    let (name, text) = open(path.as_ref())?;
    parse_demand(&name, &text, net)
}

pub fn parse_capacity(name: &str, text: &str, net: &Network) -> Result<CapacitySpec> {
    let t = Table::parse(name, text)?;
    t.expect_header(CAPACITY_HEADER)?;
    let mut entries = Vec::new();
    for (line, r) in &t.rows {
        let id = parse_link_id(&t, *line, &r[0])?;
        if !net.contains_link(id) {
            return Err(t.err(*line, format!("unknown link {id}")));
        }
        let cap = if r[1].eq_ignore_ascii_case("priced") {
            Capacity::PricedOnly
        } else {
            let u = parse_f64(&t, *line, &r[1], "capacity")?;
            if u.is_nan() || u <= 0.0 {
                return Err(t.err(*line, format!("capacity must be positive, got {u}")));
            }
            Capacity::Limit(u)
        };
        entries.push((id, cap));
    }
    CapacitySpec::new(entries)
}

pub fn load_capacity(path: impl AsRef<FsPath>, net: &Network) -> Result<CapacitySpec> {
    let (name, text) = open(path.as_ref())?;
    parse_capacity(&name, &text, net)
}

pub fn write_capacity(caps: &CapacitySpec, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CAPACITY_HEADER}")?;
    for (l, c) in caps.iter() {
        match c {
            Capacity::Limit(u) => writeln!(out, "{l},{u}")?,
            Capacity::PricedOnly => writeln!(out, "{l},priced")?,
        }
    }
    Ok(())
}

/// Per-link values such as a prior or a set of dual prices. Every link must exist in `net`.
pub fn parse_prices(name: &str, text: &str, net: &Network) -> Result<PriceVector> {
    let t = Table::parse(name, text)?;
    t.expect_header(PRICES_HEADER)?;
    let mut out = PriceVector::new();
    for (line, r) in &t.rows {
        let id = parse_link_id(&t, *line, &r[0])?;
        if !net.contains_link(id) {
            return Err(t.err(*line, format!("unknown link {id}")));
        }
        if out.get(id).is_some() {
            return Err(t.err(*line, format!("duplicate link id {id}")));
        }
        out.set(id, parse_f64(&t, *line, &r[1], "value")?);
    }
    Ok(out)
}

pub fn load_prices(path: impl AsRef<FsPath>, net: &Network) -> Result<PriceVector> {
    let (name, text) = open(path.as_ref())?;
    parse_prices(&name, &text, net)
}

/// Parses an observation file and validates every route against `net`.
pub fn parse_observations(name: &str, text: &str, net: &Network) -> Result<Vec<Observation>> {
    let t = Table::parse(name, text)?;
    let base: Vec<&str> = OBSERVATION_HEADER.split(',').collect();
    if t.header.len() < base.len() || t.header[..base.len()] != base[..] {
        t.expect_header(OBSERVATION_HEADER)?;
    }
    let weight_col = t.column("weight");
    let sub_col = t.column("subnetwork");
    if let Some(extra) = t.header[base.len()..]
        .iter()
        .find(|h| *h != "weight" && *h != "subnetwork")
    {
        return Err(t.err(1, format!("unknown column `{extra}`")));
    }
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, r) in &t.rows {
        let timestamp = match &r[1] {
            "" => None,
            s => Some(parse_f64(&t, *line, s, "timestamp")?),
        };
        let links = parse_link_seq(&t, *line, &r[4])?;
        let weight = match weight_col.map(|c| &r[c]) {
            None | Some("") => 1.0,
            Some(s) => parse_f64(&t, *line, s, "weight")?,
        };
        let subnetwork = match sub_col.map(|c| &r[c]) {
            None | Some("") => None,
            Some(s) => Some(parse_link_seq(&t, *line, s)?.into_iter().collect()),
        };
        let ob = Observation {
            agent_id: r[0].to_string(),
            path: Path {
                origin: r[2].to_string(),
                destination: r[3].to_string(),
                links,
            },
            weight,
            timestamp,
            subnetwork,
        };
        ob.validate(net).map_err(|e| t.err(*line, e.to_string()))?;
        out.push(ob);
    }
    Ok(out)
}

pub fn load_observations(path: impl AsRef<FsPath>, net: &Network) -> Result<Vec<Observation>> {
    let (name, text) = open(path.as_ref())?;
    parse_observations(&name, &text, net)
}

fn join_links<'a>(links: impl IntoIterator<Item = &'a LinkId>) -> String {
    links
        .into_iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes observations; `comments` become leading `# ` lines. Optional columns are
/// emitted only when some observation needs them.
pub fn write_observations(
    obs: &[Observation],
    comments: &[String],
    mut out: impl Write,
) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let weights = obs.iter().any(|o| o.weight != 1.0);
    let subs = obs.iter().any(|o| o.subnetwork.is_some());
    write!(out, "{OBSERVATION_HEADER}")?;
    if weights {
        write!(out, ",weight")?;
    }
    if subs {
        write!(out, ",subnetwork")?;
    }
    writeln!(out)?;
    for o in obs {
        let ts = o.timestamp.map(|t| t.to_string()).unwrap_or_default();
        write!(
            out,
            "{},{},{},{},{}",
            o.agent_id,
            ts,
            o.path.origin,
            o.path.destination,
            join_links(&o.path.links)
        )?;
        if weights {
            write!(out, ",{}", o.weight)?;
        }
        if subs {
            write!(
                out,
                ",{}",
                o.subnetwork.as_ref().map(join_links).unwrap_or_default()
            )?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn create_file(path: &FsPath) -> Result<std::io::BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}
