//! Multi-class ReliefF feature quality estimates.
//!
//! Instances with identical feature vectors and labels are merged and carry
//! their multiplicity, so a sample is never its own nearest hit.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Feature, FeatureCatalog, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleCount {
    All,
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliefOptions {
    pub k_neighbors: usize,
    pub sample_count: SampleCount,
    pub seed: u64,
}

impl Default for ReliefOptions {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            sample_count: SampleCount::All,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub weight: f64,
}

struct Instance<'a> {
    x: &'a [f64],
    label: usize,
    count: usize,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// The `k` closest instances of class `label` other than `me`, by Manhattan distance.
fn nearest(instances: &[Instance<'_>], me: usize, label: usize, k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = instances
        .iter()
        .enumerate()
        .filter(|(j, inst)| *j != me && inst.label == label)
        .map(|(j, inst)| (distance(instances[me].x, inst.x), j))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(k);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// ReliefF weights for each column of `features`, sorted in decreasing order.
pub fn relieff_rank(features: &FeatureMatrix, labels: &[usize], opts: &ReliefOptions) -> Result<Vec<RankedFeature>> {
    let n = features.n_rows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!("{} labels for {n} instances", labels.len())));
    }
    if opts.k_neighbors == 0 {
        return Err(Error::InvalidArgument("k_neighbors must be positive".into()));
    }
    let mut class_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *class_counts.entry(l).or_default() += 1;
    }
    if class_counts.len() < 2 {
        return Err(Error::SingleClass);
    }
    let smallest = *class_counts.values().min().unwrap_or(&0);
    if opts.k_neighbors >= smallest {
        return Err(Error::TooManyNeighbors {
            k: opts.k_neighbors,
            smallest,
        });
    }

    let p = features.n_features();
    let rows = features.rows();
    let ranges: Vec<f64> = (0..p)
        .map(|j| {
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
            hi - lo
        })
        .collect();

    // merge exact duplicates
    let mut instances: Vec<Instance<'_>> = Vec::new();
    let mut origin = vec![0usize; n];
    let mut index_of: BTreeMap<(Vec<u64>, usize), usize> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        let key = (row.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), labels[i]);
        let idx = *index_of.entry(key).or_insert_with(|| {
            instances.push(Instance {
                x: row,
                label: labels[i],
                count: 0,
            });
            instances.len() - 1
        });
        instances[idx].count += 1;
        origin[i] = idx;
    }

    let mut sampled: BTreeMap<usize, usize> = BTreeMap::new();
    match opts.sample_count {
        SampleCount::All => {
            for (u, inst) in instances.iter().enumerate() {
                sampled.insert(u, inst.count);
            }
        }
        SampleCount::Count(m) => {
            if m == 0 {
                return Err(Error::InvalidArgument("sample_count must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            for i in index::sample(&mut rng, n, m.min(n)) {
                *sampled.entry(origin[i]).or_default() += 1;
            }
        }
    }
    let mass: f64 = sampled.values().sum::<usize>() as f64;
    let prior = |c: usize| class_counts[&c] as f64 / n as f64;

    let mut weights = vec![0.0; p];
    for (&u, &multiplicity) in &sampled {
        let me = &instances[u];
        let mut delta = vec![0.0; p];
        let hits = nearest(&instances, u, me.label, opts.k_neighbors);
        if !hits.is_empty() {
            for &h in &hits {
                for j in 0..p {
                    if ranges[j] > 0.0 {
                        delta[j] -= (me.x[j] - instances[h].x[j]).abs() / ranges[j] / hits.len() as f64;
                    }
                }
            }
        }
        let own = prior(me.label);
        for &c in class_counts.keys().filter(|&&c| c != me.label) {
            let misses = nearest(&instances, u, c, opts.k_neighbors);
            if misses.is_empty() {
                continue;
            }
            let factor = prior(c) / (1.0 - own);
            for &m in &misses {
                for j in 0..p {
                    if ranges[j] > 0.0 {
                        delta[j] += factor * (me.x[j] - instances[m].x[j]).abs() / ranges[j] / misses.len() as f64;
                    }
                }
            }
        }
        for j in 0..p {
            weights[j] += multiplicity as f64 * delta[j];
        }
    }

    let mut ranked: Vec<RankedFeature> = features
        .names()
        .iter()
        .zip(weights)
        .map(|(name, w)| RankedFeature {
            name: name.clone(),
            weight: w / mass,
        })
        .collect();
    ranked.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    Ok(ranked)
}

/// The first `k` ranked features, in rank order.
pub fn select_top_k(ranked: &[RankedFeature], k: usize) -> Result<FeatureCatalog> {
    if k == 0 || k > ranked.len() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            ranked.len()
        )));
    }
    let feats = ranked[..k]
        .iter()
        .map(|r| r.name.parse::<Feature>())
        .collect::<Result<Vec<_>>>()?;
    FeatureCatalog::new(feats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranked(names: &[(&str, f64)]) -> Vec<RankedFeature> {
        names
            .iter()
            .map(|(n, w)| RankedFeature {
                name: n.to_string(),
                weight: *w,
            })
            .collect()
    }

    #[test]
    fn top_k() {
        let r = ranked(&[("trend", 0.5), ("entropy", 0.2), ("x_acf1", 0.1)]);
        assert_eq!(select_top_k(&r, 2).unwrap().names(), vec!["trend", "entropy"]);
        assert_eq!(select_top_k(&r, 3).unwrap().len(), 3);
        assert!(select_top_k(&r, 0).is_err());
        assert!(select_top_k(&r, 4).is_err());
    }

    #[test]
    fn constant_feature_has_zero_weight() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }, 0.5]).collect();
        let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let fm = FeatureMatrix::new(vec!["a".into(), "b".into()], (0..12).collect(), rows).unwrap();
        let r = relieff_rank(&fm, &labels, &ReliefOptions { k_neighbors: 2, ..Default::default() }).unwrap();
        let b = r.iter().find(|f| f.name == "b").unwrap();
        assert_eq!(b.weight, 0.0);
        assert_eq!(r[0].name, "a");
    }

    #[test]
    fn rejects_degenerate_labels() {
        let fm = FeatureMatrix::new(vec!["a".into()], (0..4).collect(), vec![vec![1.0]; 4]).unwrap();
        assert!(matches!(
            relieff_rank(&fm, &[0, 0, 0, 0], &ReliefOptions::default()),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            relieff_rank(&fm, &[0, 0, 1, 1], &ReliefOptions { k_neighbors: 2, ..Default::default() }),
            Err(Error::TooManyNeighbors { .. })
        ));
    }
}
