use std::path::Path;

use featmix::eval::{average_log_score, dm_test, mase};
use featmix::features::compute_feature_matrix;
use featmix::models::{build_density_matrix, fit_predict};
use featmix::series::{load_long, load_series, LoadOptions};
use featmix::{
    forecast_h, recursive_oos_evaluate, train_pipeline, CombinationFit, Mode, ModelKind, OosOptions, TimeSeries,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, OutputDir};

/// Notes collected while a command runs, copied into the manifest.
pub type Notes = Vec<String>;

pub fn load_all(cfg: &RunConfig) -> Result<Vec<TimeSeries>, CliError> {
    let opts = LoadOptions {
        skip_invalid: cfg.skip_invalid,
        period: Some(cfg.period),
    };
    let mut out = Vec::new();
    for path in &cfg.series {
        let data = |e: featmix::Error| CliError::Data(format!("{}: {e}", path.display()));
        match &cfg.id_column {
            Some(id) => out.extend(load_long(path, id, &cfg.column, opts).map_err(data)?.into_iter().map(|l| l.series)),
            None => out.push(load_series(path, &cfg.column, opts).map_err(data)?.series),
        }
    }
    for (i, s) in out.iter().enumerate() {
        if out[..i].iter().any(|o| o.id() == s.id()) {
            return Err(CliError::Data(format!("duplicate series id '{}'", s.id())));
        }
    }
    Ok(out)
}

fn require_length(series: &TimeSeries, need: usize, what: &str) -> Result<(), CliError> {
    if series.len() < need {
        return Err(CliError::Data(format!(
            "series '{}' has {} observations, {what} needs at least {need}",
            series.id(),
            series.len()
        )));
    }
    Ok(())
}

fn in_series(id: &str) -> impl Fn(featmix::Error) -> CliError + '_ {
    move |e| {
        let numerical = e.is_numerical();
        let msg = format!("series '{id}': {e}");
        if numerical {
            CliError::Numerical(msg)
        } else {
            CliError::Data(msg)
        }
    }
}

pub fn features(cfg: &RunConfig, out: &mut OutputDir) -> Result<Notes, CliError> {
    let series = load_all(cfg)?;
    let pipeline = cfg.pipeline(cfg.model_kinds()?)?;
    let results = series
        .par_iter()
        .map(|s| compute_feature_matrix(s, &pipeline.spec, &pipeline.catalog).map_err(in_series(s.id())))
        .collect::<Result<Vec<_>, _>>()?;
    for (s, fm) in series.iter().zip(results) {
        let mut header = vec!["t"];
        header.extend(fm.names().iter().map(String::as_str));
        let rows: Vec<Vec<String>> = fm
            .targets()
            .iter()
            .zip(fm.rows())
            .map(|(t, r)| std::iter::once(t.to_string()).chain(r.iter().map(|&v| num(v))).collect())
            .collect();
        out.write_csv(&format!("features_{}.csv", s.id()), &header, &rows)?;
    }
    Ok(Vec::new())
}

#[derive(Serialize)]
struct FittedModel {
    model: String,
    parameters: Vec<(String, f64)>,
    flags: Vec<featmix::models::ModelFlag>,
}

pub fn fit_models(cfg: &RunConfig, out: &mut OutputDir) -> Result<Notes, CliError> {
    let series = load_all(cfg)?;
    let pipeline = cfg.pipeline(cfg.model_kinds()?)?;
    for s in &series {
        let dm = build_density_matrix(s, &pipeline.models, &pipeline.spec, &pipeline.model_options)
            .map_err(in_series(s.id()))?;
        let mut header = vec!["t"];
        header.extend(dm.model_names().iter().map(String::as_str));
        let rows: Vec<Vec<String>> = (0..dm.n_rows())
            .map(|r| std::iter::once(dm.targets()[r].to_string()).chain(dm.row(r).iter().map(|&v| num(v))).collect())
            .collect();
        out.write_csv(&format!("log_densities_{}.csv", s.id()), &header, &rows)?;

        let history = pipeline.spec.model_window.apply(s.values());
        let fits = pipeline
            .models
            .iter()
            .map(|&k| {
                let f = fit_predict(k, history, 1, &pipeline.model_options).map_err(in_series(s.id()))?;
                Ok(FittedModel {
                    model: k.name().to_string(),
                    parameters: f.fit.parameter_names().into_iter().zip(f.fit.parameters.clone()).collect(),
                    flags: f.flags,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        out.write_json(&format!("models_{}.json", s.id()), &fits)?;
    }
    Ok(Vec::new())
}

fn notes_of(id: &str, fit: &CombinationFit) -> Notes {
    fit.notes
        .iter()
        .map(|n| format!("{id}: {}", serde_json::to_string(n).unwrap_or_default()))
        .collect()
}

pub fn train(cfg: &RunConfig, out: &mut OutputDir) -> Result<Notes, CliError> {
    let series = load_all(cfg)?;
    let pipeline = cfg.pipeline(cfg.model_kinds()?)?;
    let mode = cfg.train_mode()?;
    for s in &series {
        require_length(s, pipeline.spec.min_length + 2, "training")?;
    }
    let fits = series
        .par_iter()
        .map(|s| train_pipeline(s, &pipeline, mode).map_err(in_series(s.id())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut notes = Vec::new();
    for (s, fit) in series.iter().zip(&fits) {
        out.write_json(&format!("fit_{}.json", s.id()), fit)?;
        notes.extend(notes_of(s.id(), fit));
    }
    Ok(notes)
}

fn read_fit(path: &Path) -> Result<CombinationFit, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read fit {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("fit {}: {e}", path.display())))
}

pub fn forecast(cfg: &RunConfig, out: &mut OutputDir) -> Result<Notes, CliError> {
    let series = load_all(cfg)?;
    if cfg.fit.is_some() && series.len() > 1 {
        return Err(CliError::Config("fit: a single fit file needs exactly one series".into()));
    }
    for s in &series {
        let fit_path = cfg.fit.clone().unwrap_or_else(|| out.path(&format!("fit_{}.json", s.id())));
        let fit = read_fit(&fit_path)?;
        let fc = forecast_h(&fit, s, cfg.horizon, cfg.frozen_models).map_err(in_series(s.id()))?;
        out.write_json(&format!("forecast_{}.json", s.id()), &fc)?;
        let rows: Vec<Vec<String>> = fc
            .steps
            .iter()
            .flat_map(|step| {
                fc.model_names
                    .iter()
                    .zip(&step.weights.0)
                    .map(move |(m, w)| vec![step.h.to_string(), m.clone(), num(*w)])
            })
            .collect();
        out.write_csv(&format!("weights_{}.csv", s.id()), &["t_or_h", "model", "weight"], &rows)?;
    }
    Ok(Vec::new())
}

pub fn evaluate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Notes, CliError> {
    let series = load_all(cfg)?;
    let pipeline = cfg.pipeline(cfg.model_kinds()?)?;
    let modes = cfg.mode_list()?;
    let s_min = pipeline.spec.min_length;
    let plans = series
        .iter()
        .map(|s| {
            let start_t = cfg.start_t.unwrap_or_else(|| (s.len() + 1).saturating_sub(cfg.horizon));
            if start_t < s_min + 3 || start_t > s.len() {
                return Err(CliError::Config(format!(
                    "start_t: {start_t} must lie in {}..={} for series '{}'",
                    s_min + 3,
                    s.len(),
                    s.id()
                )));
            }
            Ok(OosOptions {
                start_t,
                reselect_features: cfg.reselect_features,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let reports = series
        .par_iter()
        .zip(&plans)
        .map(|(s, opts)| recursive_oos_evaluate(s, &pipeline, &modes, opts).map_err(in_series(s.id())))
        .collect::<Result<Vec<_>, _>>()?;

    let mut scores = Vec::new();
    let mut dm_rows = Vec::new();
    for (s, rep) in series.iter().zip(&reports) {
        for m in &rep.scores {
            scores.push(vec![
                s.id().to_string(),
                m.mode.to_string(),
                num(m.average_log_score),
                m.mase.map_or_else(|| "NaN".into(), num),
            ]);
        }
        let mut wrows = Vec::new();
        for m in &rep.scores {
            for (t, w) in m.targets.iter().zip(&m.weights) {
                for (name, wi) in pipeline.models.iter().zip(&w.0) {
                    wrows.push(vec![m.mode.to_string(), t.to_string(), name.to_string(), num(*wi)]);
                }
            }
        }
        out.write_csv(&format!("oos_weights_{}.csv", s.id()), &["mode", "t_or_h", "model", "weight"], &wrows)?;
        for (i, a) in rep.scores.iter().enumerate() {
            for b in &rep.scores[i + 1..] {
                if a.log_scores.len() < 10 {
                    continue;
                }
                let dens_a: Vec<f64> = a.log_scores.iter().map(|v| -v).collect();
                let dens_b: Vec<f64> = b.log_scores.iter().map(|v| -v).collect();
                let pt_a: Vec<f64> = a.points.iter().zip(&a.actuals).map(|(p, y)| (p - y).abs()).collect();
                let pt_b: Vec<f64> = b.points.iter().zip(&b.actuals).map(|(p, y)| (p - y).abs()).collect();
                for (loss, la, lb) in [("neg_log_density", &dens_a, &dens_b), ("abs_error", &pt_a, &pt_b)] {
                    let r = dm_test(la, lb, 1)?;
                    dm_rows.push(vec![
                        s.id().to_string(),
                        a.mode.to_string(),
                        b.mode.to_string(),
                        loss.to_string(),
                        num(r.statistic),
                        num(r.p_value),
                        r.degenerate.to_string(),
                    ]);
                }
            }
        }
    }
    out.write_csv("scores.csv", &["series", "mode", "LS", "MASE"], &scores)?;
    out.write_csv(
        "dm_tests.csv",
        &["series", "mode_a", "mode_b", "loss", "statistic", "p_value", "degenerate"],
        &dm_rows,
    )?;
    Ok(Vec::new())
}

/// Every subset of `pool` with at least two models, smallest first, in pool order.
pub fn combinations(pool: &[ModelKind]) -> Vec<Vec<ModelKind>> {
    let m = pool.len();
    let mut out: Vec<Vec<ModelKind>> = (1u32..(1 << m))
        .filter(|mask| mask.count_ones() >= 2)
        .map(|mask| (0..m).filter(|i| mask & (1 << i) != 0).map(|i| pool[i]).collect())
        .collect();
    out.sort_by_key(|c| (c.len(), c.iter().map(|k| pool.iter().position(|p| p == k)).collect::<Vec<_>>()));
    out
}

fn holdout_scores(
    s: &TimeSeries,
    pipeline: &featmix::PipelineConfig,
    mode: Mode,
    horizon: usize,
    frozen: bool,
) -> featmix::Result<(f64, f64)> {
    let n_train = s.len() - horizon;
    let train = s.head(n_train)?;
    let fit = train_pipeline(&train, pipeline, mode)?;
    let fc = forecast_h(&fit, &train, horizon, frozen)?;
    let actuals = &s.values()[n_train..];
    let ls: Vec<f64> = fc.steps.iter().zip(actuals).map(|(st, &y)| st.log_density(y)).collect();
    Ok((average_log_score(&ls)?, mase(train.values(), actuals, &fc.points())?))
}

pub fn benchmark(cfg: &RunConfig, out: &mut OutputDir) -> Result<Notes, CliError> {
    let series = load_all(cfg)?;
    let pool = cfg.model_kinds()?;
    if pool.len() < 2 {
        return Err(CliError::Config("models: benchmark needs at least two models".into()));
    }
    let modes = cfg.mode_list()?;
    let combos = combinations(&pool);
    let pipelines = combos
        .iter()
        .map(|c| cfg.pipeline(c.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    for s in &series {
        require_length(s, cfg.min_length + 2 + cfg.horizon, "benchmark holdout")?;
    }

    let (n_series, n_modes) = (series.len(), modes.len());
    let tasks: Vec<(usize, usize, usize)> = (0..combos.len())
        .flat_map(|c| (0..n_series).flat_map(move |s| (0..n_modes).map(move |m| (c, s, m))))
        .collect();
    let results: Vec<featmix::Result<(f64, f64)>> = tasks
        .par_iter()
        .map(|&(c, s, m)| holdout_scores(&series[s], &pipelines[c], modes[m], cfg.horizon, cfg.frozen_models))
        .collect();

    let mut notes = Vec::new();
    let mut detail = Vec::new();
    let mut sums = vec![vec![(0.0, 0.0, 0usize); modes.len()]; combos.len()];
    for (&(c, s, m), r) in tasks.iter().zip(&results) {
        let name = combo_name(&combos[c]);
        match r {
            Ok((ls, ms)) => {
                let acc = &mut sums[c][m];
                acc.0 += ls;
                acc.1 += ms;
                acc.2 += 1;
                detail.push(vec![name, series[s].id().to_string(), modes[m].to_string(), num(*ls), num(*ms)]);
            }
            Err(e) => {
                notes.push(format!("{name} / {} / {}: {e}", series[s].id(), modes[m]));
                detail.push(vec![name, series[s].id().to_string(), modes[m].to_string(), "NaN".into(), "NaN".into()]);
            }
        }
    }
    let mut header = vec!["combination".to_string()];
    for m in &modes {
        header.push(format!("{m}_LS"));
        header.push(format!("{m}_MASE"));
    }
    header.push("failures".into());
    let rows: Vec<Vec<String>> = combos
        .iter()
        .enumerate()
        .map(|(c, combo)| {
            let mut row = vec![combo_name(combo)];
            let mut failures = 0;
            for acc in &sums[c] {
                failures += series.len() - acc.2;
                if acc.2 == 0 {
                    row.extend(["NaN".to_string(), "NaN".to_string()]);
                } else {
                    row.push(num(acc.0 / acc.2 as f64));
                    row.push(num(acc.1 / acc.2 as f64));
                }
            }
            row.push(failures.to_string());
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv("benchmark.csv", &header_refs, &rows)?;
    out.write_csv("benchmark_detail.csv", &["combination", "series", "mode", "LS", "MASE"], &detail)?;
    Ok(notes)
}

fn combo_name(c: &[ModelKind]) -> String {
    c.iter().map(|k| k.name()).collect::<Vec<_>>().join("+")
}
