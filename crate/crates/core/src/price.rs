use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LinkId;

/// Per-link scalar values: link costs (priors and posteriors) or capacity dual prices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceVector {
    values: BTreeMap<LinkId, f64>,
}

impl PriceVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn uniform(links: impl IntoIterator<Item = LinkId>, value: f64) -> Self {
        links.into_iter().map(|l| (l, value)).collect()
    }

    pub fn zeros(links: impl IntoIterator<Item = LinkId>) -> Self {
        Self::uniform(links, 0.0)
    }

    pub fn get(&self, link: LinkId) -> Option<f64> {
        self.values.get(&link).copied()
    }

    pub fn value(&self, link: LinkId) -> Result<f64> {
        self.get(link).ok_or(Error::MissingValue(link))
    }

    pub fn set(&mut self, link: LinkId, value: f64) {
        self.values.insert(link, value);
    }

    pub fn remove(&mut self, link: LinkId) -> Option<f64> {
        self.values.remove(&link)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn links(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.values.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LinkId, f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    /// Entrywise sum; links missing from `other` are taken as zero.
    pub fn plus(&self, other: &PriceVector) -> PriceVector {
        let mut out = self.clone();
        for (l, v) in other.iter() {
            *out.values.entry(l).or_insert(0.0) += v;
        }
        out
    }

    /// Largest absolute entrywise difference over the union of both key sets.
    pub fn max_abs_diff(&self, other: &PriceVector) -> f64 {
        let mut gap: f64 = 0.0;
        for (l, v) in self.iter() {
            gap = gap.max((v - other.get(l).unwrap_or(0.0)).abs());
        }
        for (l, v) in other.iter() {
            if !self.values.contains_key(&l) {
                gap = gap.max(v.abs());
            }
        }
        gap
    }

    pub fn l1_distance(&self, other: &PriceVector) -> f64 {
        self.iter()
            .map(|(l, v)| (v - other.get(l).unwrap_or(0.0)).abs())
            .sum()
    }

    pub fn min_value(&self) -> Option<f64> {
        self.values.values().copied().reduce(f64::min)
    }

    pub fn restricted_to(&self, links: impl IntoIterator<Item = LinkId>) -> PriceVector {
        links
            .into_iter()
            .filter_map(|l| self.get(l).map(|v| (l, v)))
            .collect()
    }

    /// `a * (1 - t) + b * t` over the keys of `self`.
    pub fn blend(&self, other: &PriceVector, t: f64) -> PriceVector {
        self.iter()
            .map(|(l, v)| (l, (1.0 - t) * v + t * other.get(l).unwrap_or(0.0)))
            .collect()
    }

    /// Weighted mean of `vectors`, over the keys of the first vector.
    pub fn weighted_mean<'a>(
        vectors: impl IntoIterator<Item = (f64, &'a PriceVector)>,
    ) -> Option<PriceVector> {
        let mut total = 0.0;
        let mut acc: Option<PriceVector> = None;
        for (w, v) in vectors {
            total += w;
            match acc.as_mut() {
                None => acc = Some(v.iter().map(|(l, x)| (l, w * x)).collect()),
                Some(a) => {
                    for (l, x) in a.values.iter_mut() {
                        *x += w * v.get(*l).unwrap_or(0.0);
                    }
                }
            }
        }
        let mut acc = acc?;
        if total <= 0.0 {
            return None;
        }
        for x in acc.values.values_mut() {
            *x /= total;
        }
        Some(acc)
    }
}

impl FromIterator<(LinkId, f64)> for PriceVector {
    fn from_iter<I: IntoIterator<Item = (LinkId, f64)>>(iter: I) -> Self {
        PriceVector {
            values: iter.into_iter().collect(),
        }
    }
}

impl<const N: usize> From<[(u32, f64); N]> for PriceVector {
    fn from(entries: [(u32, f64); N]) -> Self {
        entries.into_iter().map(|(l, v)| (LinkId(l), v)).collect()
    }
}
