//! Posterior-mode estimation of the weight coefficients and Metropolis-within-Gibbs
//! selection of feature indicators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::models::DensityMatrix;
use crate::optim::{bfgs, BfgsOptions};
use crate::pool::{is_active, CoefficientMatrix, Posterior, PriorConfig, SelectionMatrix};

/// Optimizer and sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Extra random starts drawn from `N(0, 0.1^2)` besides `beta = 0`.
    pub restarts: usize,
    /// Number of indicator draws kept after burn-in.
    pub draws: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            restarts: 2,
            draws: 100,
            burn_in: 50,
            seed: 42,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be positive".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidArgument("gradient_tolerance must be positive".into()));
        }
        if self.draws == 0 {
            return Err(Error::InvalidArgument("draws (L) must be at least 1".into()));
        }
        Ok(())
    }
}

const RESTART_SD: f64 = 0.1;

/// A posterior mode.
#[derive(Debug, Clone)]
pub struct MapResult {
    pub beta: CoefficientMatrix,
    pub log_posterior: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Log posterior after each accepted optimizer step of the winning start.
    pub trace: Vec<f64>,
}

fn active_indices(beta: &CoefficientMatrix, selection: Option<&SelectionMatrix>) -> Vec<(usize, usize)> {
    (0..beta.n_rows())
        .flat_map(|i| (0..beta.n_cols()).map(move |j| (i, j)))
        .filter(|&(i, j)| is_active(selection, i, j))
        .collect()
}

fn unpack(template: &CoefficientMatrix, idx: &[(usize, usize)], v: &[f64]) -> CoefficientMatrix {
    let mut b = CoefficientMatrix::zeros(template.n_models(), template.n_features());
    for (&(i, j), &x) in idx.iter().zip(v) {
        b.set(i, j, x);
    }
    b
}

/// Maximizes the log posterior by BFGS from `beta = 0`, each of `warm_starts`,
/// and `config.restarts` seeded random starts; returns the best mode found.
pub fn map_estimate(
    density: &DensityMatrix,
    features: &FeatureMatrix,
    prior: &PriorConfig,
    selection: Option<&SelectionMatrix>,
    config: &InferenceConfig,
    warm_starts: &[CoefficientMatrix],
) -> Result<MapResult> {
    let post = Posterior::new(density, features, *prior, selection)?;
    let zero = post.zeros();
    let idx = active_indices(&zero, selection);

    let start_value = post.value(&zero)?;
    if !start_value.is_finite() {
        return Err(Error::MapFailed("non-finite log posterior at beta = 0".into()));
    }

    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; idx.len()]];
    for w in warm_starts {
        if w.n_rows() != zero.n_rows() || w.n_cols() != zero.n_cols() {
            return Err(Error::DimensionMismatch("warm start has the wrong shape".into()));
        }
        starts.push(idx.iter().map(|&(i, j)| w.get(i, j)).collect());
    }
    let normal = Normal::new(0.0, RESTART_SD).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for k in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1)));
        starts.push(idx.iter().map(|_| normal.sample(&mut rng)).collect());
    }

    let opts = BfgsOptions {
        max_iterations: config.max_iterations,
        gradient_tolerance: config.gradient_tolerance,
        ..BfgsOptions::default()
    };
    let runs: Vec<_> = starts
        .par_iter()
        .map(|x0| {
            bfgs(
                |v| {
                    let b = unpack(&zero, &idx, v);
                    match post.value_and_gradient(&b, true) {
                        Ok((val, g)) => (-val, idx.iter().map(|&(i, j)| -g.get(i, j)).collect()),
                        Err(_) => (f64::INFINITY, vec![f64::NAN; idx.len()]),
                    }
                },
                x0,
                &opts,
            )
        })
        .collect();

    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.value.is_finite())
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(k, _)| k)
        .ok_or_else(|| Error::MapFailed("every start diverged".into()))?;
    let run = &runs[best];
    let beta = unpack(&zero, &idx, &run.x);
    let value = post.value(&beta)?;
    Ok(MapResult {
        beta,
        log_posterior: value,
        converged: run.converged,
        iterations: run.iterations,
        trace: run.trace.iter().map(|v| -v).collect(),
    })
}

/// Indicator state with its conditional mode and joint log posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub selection: SelectionMatrix,
    pub beta: CoefficientMatrix,
    pub log_posterior: f64,
}

/// `min(1, exp(delta))` for a log-posterior difference.
pub fn acceptance_probability(delta: f64) -> f64 {
    if delta >= 0.0 {
        1.0
    } else {
        delta.exp()
    }
}

/// Accepts `proposal` iff `uniform < min(1, p(proposal) / p(current))`.
pub fn metropolis_accept(current: &PosteriorDraw, proposal: &PosteriorDraw, uniform: f64) -> bool {
    uniform < acceptance_probability(proposal.log_posterior - current.log_posterior)
}

/// Output of [`gibbs_select`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsOutput {
    pub draws: Vec<PosteriorDraw>,
    pub proposed: usize,
    pub accepted: usize,
    /// Proposals rejected because their conditional mode search failed.
    pub failed: usize,
}

impl GibbsOutput {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

fn draw_for(
    density: &DensityMatrix,
    features: &FeatureMatrix,
    prior: &PriorConfig,
    selection: SelectionMatrix,
    config: &InferenceConfig,
    warm: Option<&CoefficientMatrix>,
) -> Result<PosteriorDraw> {
    let warm: Vec<_> = warm.map(|w| w.masked(Some(&selection))).into_iter().collect();
    let map = map_estimate(density, features, prior, Some(&selection), config, &warm)?;
    Ok(PosteriorDraw {
        selection,
        beta: map.beta,
        log_posterior: map.log_posterior,
    })
}

/// Metropolis-within-Gibbs over the feature indicators.
///
/// Each sweep visits the model rows in order; in each row one uniformly chosen
/// indicator is flipped, the coefficients are re-maximized given the proposed
/// indicators, and the move is accepted with the Metropolis rule on the joint
/// log posterior. The chain starts with every feature selected; `burn_in`
/// sweeps are discarded and the state after each of the next `draws` sweeps is kept.
pub fn gibbs_select(
    density: &DensityMatrix,
    features: &FeatureMatrix,
    prior: &PriorConfig,
    config: &InferenceConfig,
) -> Result<GibbsOutput> {
    config.validate()?;
    let n = features.n_features();
    if n == 0 {
        return Err(Error::InvalidArgument("variable selection needs at least one feature".into()));
    }
    let m = density.n_models();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = draw_for(density, features, prior, SelectionMatrix::all(m, n), config, None)?;
    let mut draws = Vec::with_capacity(config.draws);
    let (mut proposed, mut accepted, mut failed) = (0, 0, 0);

    for sweep in 0..config.burn_in + config.draws {
        for i in 0..m - 1 {
            let j = rng.random_range(0..n);
            let u: f64 = rng.random();
            let mut sel = current.selection.clone();
            sel.flip(i, j);
            proposed += 1;
            match draw_for(density, features, prior, sel, config, Some(&current.beta)) {
                Ok(prop) if prop.log_posterior.is_finite() => {
                    if metropolis_accept(&current, &prop, u) {
                        current = prop;
                        accepted += 1;
                    }
                }
                _ => failed += 1,
            }
        }
        if sweep >= config.burn_in {
            draws.push(current.clone());
        }
    }
    Ok(GibbsOutput {
        draws,
        proposed,
        accepted,
        failed,
    })
}

/// Runs `chains` independent samplers (seeds `seed, seed + 1, ...`) in parallel
/// and concatenates their post-burn-in draws in chain order.
pub fn gibbs_select_chains(
    density: &DensityMatrix,
    features: &FeatureMatrix,
    prior: &PriorConfig,
    config: &InferenceConfig,
    chains: usize,
) -> Result<GibbsOutput> {
    let outs = (0..chains.max(1))
        .into_par_iter()
        .map(|c| {
            let cfg = InferenceConfig {
                seed: config.seed.wrapping_add(c as u64),
                ..*config
            };
            gibbs_select(density, features, prior, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut merged = GibbsOutput {
        draws: Vec::new(),
        proposed: 0,
        accepted: 0,
        failed: 0,
    };
    for o in outs {
        merged.draws.extend(o.draws);
        merged.proposed += o.proposed;
        merged.accepted += o.accepted;
        merged.failed += o.failed;
    }
    Ok(merged)
}

/// Fraction of draws in which each (model row, feature) indicator is on.
pub fn selection_frequencies(draws: &[PosteriorDraw]) -> Result<Vec<Vec<f64>>> {
    let first = draws.first().ok_or_else(|| Error::InvalidArgument("no draws".into()))?;
    let (rows, cols) = (first.selection.n_rows(), first.selection.n_features());
    let mut freq = vec![vec![0.0; cols]; rows];
    for d in draws {
        for (i, row) in freq.iter_mut().enumerate() {
            for (j, f) in row.iter_mut().enumerate() {
                if d.selection.get(i, j) {
                    *f += 1.0;
                }
            }
        }
    }
    let l = draws.len() as f64;
    freq.iter_mut().flatten().for_each(|f| *f /= l);
    Ok(freq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draw(value: f64) -> PosteriorDraw {
        PosteriorDraw {
            selection: SelectionMatrix::all(2, 1),
            beta: CoefficientMatrix::zeros(2, 1),
            log_posterior: value,
        }
    }

    #[test]
    fn metropolis_rule() {
        let cur = draw(0.0);
        assert!(metropolis_accept(&cur, &draw(2f64.ln()), 0.999_999));
        assert!((acceptance_probability(-(2f64.ln())) - 0.5).abs() < 1e-15);
        assert!(metropolis_accept(&cur, &draw(-(2f64.ln())), 0.49));
        assert!(!metropolis_accept(&cur, &draw(-(2f64.ln())), 0.51));
        assert_eq!(acceptance_probability(0.0), 1.0);
        assert!(metropolis_accept(&cur, &draw(0.0), 0.999_999));
    }

    #[test]
    fn frequencies() {
        let mut a = draw(0.0);
        let mut b = draw(0.0);
        a.selection = SelectionMatrix::from_rows(vec![vec![true, true]]).unwrap();
        b.selection = SelectionMatrix::from_rows(vec![vec![true, false]]).unwrap();
        let f = selection_frequencies(&[a, b]).unwrap();
        assert_eq!(f, vec![vec![1.0, 0.5]]);
        assert!(selection_frequencies(&[]).is_err());
    }
}
