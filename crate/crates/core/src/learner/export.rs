use std::io::Write;
use std::path::Path as FsPath;

use super::{FixedPointTrace, LogEntry};
use crate::error::{Error, Result};
use crate::graph::LinkId;
use crate::io::create_file;
use crate::price::PriceVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Distribution of one link's per-agent posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSummary {
    pub link: LinkId,
    /// Weighted by observation weight, so it matches the fixed-point average.
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    /// Number of posterior values that differ by more than 1e-9.
    pub distinct: usize,
    pub histogram: Vec<Bin>,
}

pub fn export_heterogeneity(trace: &FixedPointTrace, bins: usize) -> Vec<LinkSummary> {
    let bins = bins.max(1);
    let links: Vec<LinkId> = trace.final_prior().links().collect();
    let total: f64 = trace.agents.iter().map(|a| a.weight).sum();
    links
        .into_iter()
        .map(|link| {
            let vals: Vec<(f64, f64)> = trace
                .agents
                .iter()
                .filter_map(|a| a.posterior.get(link).map(|v| (a.weight, v)))
                .collect();
            let mean = vals.iter().map(|(w, v)| w * v).sum::<f64>() / total;
            let var = vals
                .iter()
                .map(|(w, v)| w * (v - mean).powi(2))
                .sum::<f64>()
                / total;
            let mut sorted: Vec<f64> = vals.iter().map(|&(_, v)| v).collect();
            sorted.sort_by(f64::total_cmp);
            let min = sorted.first().copied().unwrap_or(0.0);
            let max = sorted.last().copied().unwrap_or(0.0);
            let mut distinct = 0;
            let mut last = f64::NEG_INFINITY;
            for &v in &sorted {
                if v - last > 1e-9 {
                    distinct += 1;
                    last = v;
                }
            }
            let width = (max - min) / bins as f64;
            let mut histogram: Vec<Bin> = (0..bins)
                .map(|k| Bin {
                    lo: min + k as f64 * width,
                    hi: if k + 1 == bins {
                        max
                    } else {
                        min + (k + 1) as f64 * width
                    },
                    count: 0,
                })
                .collect();
            for &v in &sorted {
                let k = if width > 0.0 {
                    (((v - min) / width) as usize).min(bins - 1)
                } else {
                    0
                };
                histogram[k].count += 1;
            }
            LinkSummary {
                link,
                mean,
                sd: var.max(0.0).sqrt(),
                min,
                max,
                distinct,
                histogram,
            }
        })
        .collect()
}

pub fn write_heterogeneity(summary: &[LinkSummary], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "link_id,mean,sd,min,max,distinct_values")?;
    for s in summary {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{}",
            s.link, s.mean, s.sd, s.min, s.max, s.distinct
        )?;
    }
    Ok(())
}

pub fn write_histogram(summary: &[LinkSummary], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "link_id,bin_lo,bin_hi,count")?;
    for s in summary {
        for b in &s.histogram {
            writeln!(out, "{},{:.6},{:.6},{}", s.link, b.lo, b.hi, b.count)?;
        }
    }
    Ok(())
}

pub fn write_prior_trace(trace: &FixedPointTrace, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "iteration,link_id,prior_value")?;
    for (n, p) in trace.priors.iter().enumerate() {
        for (l, v) in p.iter() {
            writeln!(out, "{n},{l},{v}")?;
        }
    }
    Ok(())
}

pub fn write_agent_posteriors(trace: &FixedPointTrace, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "agent_id,link_id,value")?;
    for a in &trace.agents {
        for (l, v) in a.posterior.iter() {
            writeln!(out, "{},{l},{v}", a.agent_id)?;
        }
    }
    Ok(())
}

pub fn write_summary(trace: &FixedPointTrace, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "iterations={}", trace.iterations)?;
    writeln!(out, "converged={}", trace.converged)?;
    writeln!(out, "final_gap={:e}", trace.final_gap)?;
    writeln!(out, "agents={}", trace.agents.len())?;
    writeln!(out, "skipped={}", trace.skipped.len())
}

pub fn write_final_prior(prior: &PriceVector, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "link_id,value")?;
    for (l, v) in prior.iter() {
        writeln!(out, "{l},{v:.6}")?;
    }
    Ok(())
}

/// `update_index,timestamp,agent_id,objective,link_id,prior_after`, one row per
/// priced link per update. Skipped updates carry `inconsistent` as objective.
pub fn write_online_log(entries: &[LogEntry], mut out: impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "update_index,timestamp,agent_id,objective,link_id,prior_after"
    )?;
    for e in entries {
        let ts = e.timestamp.map(|t| t.to_string()).unwrap_or_default();
        let obj = e
            .objective
            .map_or_else(|| "inconsistent".to_string(), |o| format!("{o:.6}"));
        for (l, v) in e.prior_after.iter() {
            writeln!(
                out,
                "{},{ts},{},{obj},{l},{v:.6}",
                e.update_index, e.agent_id
            )?;
        }
    }
    Ok(())
}

fn write_to(
    dir: &FsPath,
    name: &str,
    f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    let path = dir.join(name);
    let mut file = create_file(&path)?;
    f(&mut file)
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(&path, e))
}

/// Writes `prior_trace.csv`, `agent_posteriors.csv`, `final_prior.csv` and `summary.txt`.
pub fn write_trace_dir(dir: &FsPath, trace: &FixedPointTrace) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_to(dir, "prior_trace.csv", |w| write_prior_trace(trace, w))?;
    write_to(dir, "agent_posteriors.csv", |w| {
        write_agent_posteriors(trace, w)
    })?;
    write_to(dir, "final_prior.csv", |w| {
        write_final_prior(trace.final_prior(), w)
    })?;
    write_to(dir, "summary.txt", |w| write_summary(trace, w))?;
    Ok(())
}

/// Writes `heterogeneity.csv` and `histogram.csv` next to a trace.
pub fn write_heterogeneity_files(dir: &FsPath, summary: &[LinkSummary]) -> Result<()> {
    write_to(dir, "heterogeneity.csv", |w| {
        write_heterogeneity(summary, w)
    })?;
    write_to(dir, "histogram.csv", |w| write_histogram(summary, w))
}
