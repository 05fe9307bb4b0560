//! The scenario × layout × mode × seed sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModeKind};
use crate::autoencoder::{default_norm_scale, train, AutoencoderModel};
use crate::ekf::{initial_state, run_filter, FilterMode};
use crate::error::{Error, Result};
use crate::geometry::{AnchorLayout, Arena, LayoutVariant, RangeSample};
use crate::metrics::{compute_metrics, ErrorSeries, MetricsReport};
use crate::scenarios::{builtin_scenario, training_dataset};
use crate::simulator::simulate_ranges;

/// One filter run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub scenario: u8,
    pub anchors: usize,
    pub mode: ModeKind,
    pub seed: u64,
    pub metrics: MetricsReport,
    /// Anchor- and sample-averaged novelty of the scenario under this seed's
    /// model; `None` when no mode needed a model.
    pub mean_novelty: Option<f64>,
}

/// Seed average of one (scenario, anchors, mode) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub scenario: u8,
    pub anchors: usize,
    pub mode: ModeKind,
    pub seeds: usize,
    pub metrics: MetricsReport,
    pub rmse_tot_std: f64,
    pub mean_novelty: Option<f64>,
}

/// Trains the default autoencoder for one layout and seed on the nominal
/// training set.
pub fn train_default_model(
    cfg: &ExperimentConfig,
    variant: LayoutVariant,
    seed: u64,
) -> Result<AutoencoderModel> {
    let layout = AnchorLayout::hexagonal(variant);
    let data = training_dataset(variant, seed, &cfg.channel)?;
    let scale = default_norm_scale(&layout, &Arena::default());
    train(
        &data,
        cfg.train.shape(layout.len()),
        &cfg.train.config(seed),
        scale,
        &layout,
    )
}

/// Runs one dataset through the filter in the given mode and scores it
/// against the attached truth.
pub fn evaluate_mode(
    cfg: &ExperimentConfig,
    data: &[RangeSample],
    layout: &AnchorLayout,
    mode: ModeKind,
    model: Option<&AutoencoderModel>,
) -> Result<MetricsReport> {
    let first = data.first().ok_or(Error::Empty("dataset"))?;
    let init = initial_state(first, None, layout, &cfg.ekf.initial)?;
    let filter_mode = filter_mode(cfg, mode, model)?;
    let trace = run_filter(
        data,
        None,
        filter_mode,
        layout,
        &cfg.ekf.process_noise,
        &init,
    )?;
    let series = ErrorSeries::from_trace(&trace, data).ok_or(Error::Empty("ground truth"))?;
    compute_metrics(&series)
}

pub(crate) fn filter_mode<'a>(
    cfg: &'a ExperimentConfig,
    mode: ModeKind,
    model: Option<&'a AutoencoderModel>,
) -> Result<FilterMode<'a>> {
    Ok(match mode {
        ModeKind::Static => FilterMode::Static {
            variance: cfg.ekf.static_variance,
        },
        ModeKind::AdaptiveNoBias | ModeKind::AdaptiveFull => FilterMode::Adaptive {
            model: model
                .ok_or_else(|| Error::InvalidSpec(format!("{} needs a model", mode.name())))?,
            covariance: &cfg.maps.covariance,
            bias: (mode == ModeKind::AdaptiveFull).then_some(&cfg.maps.bias),
        },
    })
}

fn run_job(cfg: &ExperimentConfig, variant: LayoutVariant, seed: u64) -> Result<Vec<AblationCell>> {
    let e = &cfg.experiment;
    let layout = AnchorLayout::hexagonal(variant);
    let model = if e.modes.iter().any(|m| m.needs_model()) {
        Some(train_default_model(cfg, variant, seed)?)
    } else {
        None
    };
    let params = cfg.scenario_params();
    let mut cells = Vec::new();
    for &id in &e.scenarios {
        let data = simulate_ranges(&builtin_scenario(id, variant, seed, &params)?)?;
        let mean_novelty = match &model {
            Some(m) => {
                let mut sum = 0.0;
                for s in &data {
                    sum += m.novelty_score(&s.ranges)?.mean();
                }
                Some(sum / data.len() as f64)
            }
            None => None,
        };
        for &mode in &e.modes {
            cells.push(AblationCell {
                scenario: id,
                anchors: layout.len(),
                mode,
                seed,
                metrics: evaluate_mode(cfg, &data, &layout, mode, model.as_ref())?,
                mean_novelty,
            });
        }
    }
    Ok(cells)
}

/// Every configured (layout, seed) pair trains its own model and runs all
/// scenarios and modes against it. Pairs run in parallel; the result is
/// ordered by scenario, then layout and mode in configuration order, then
/// seed.
pub fn run_ablation(cfg: &ExperimentConfig) -> Result<Vec<AblationCell>> {
    let e = &cfg.experiment;
    let seeds: Vec<u64> = (0..e.seeds).map(|k| e.seed + k).collect();
    let jobs: Vec<(LayoutVariant, u64)> = e
        .layouts
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(v, s)| run_job(cfg, v, s))
        .collect::<Result<Vec<_>>>()?;
    let rank = |c: &AblationCell| {
        let li = e.layouts.iter().position(|v| v.anchor_count() == c.anchors);
        let mi = e.modes.iter().position(|m| *m == c.mode);
        (c.scenario, li, mi, c.seed)
    };
    let mut cells: Vec<AblationCell> = per_job.into_iter().flatten().collect();
    cells.sort_by_key(rank);
    Ok(cells)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Groups consecutive cells sharing scenario, anchors and mode; expects the
/// ordering produced by [`run_ablation`].
pub fn summarize(cells: &[AblationCell]) -> Vec<AblationSummary> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < cells.len() {
        let key = (
            cells[start].scenario,
            cells[start].anchors,
            cells[start].mode,
        );
        let end = cells[start..]
            .iter()
            .position(|c| (c.scenario, c.anchors, c.mode) != key)
            .map_or(cells.len(), |k| start + k);
        let group = &cells[start..end];
        let m = |f: fn(&MetricsReport) -> f64| mean(group.iter().map(|c| f(&c.metrics)));
        let rmse = m(|r| r.rmse_tot);
        let var = mean(group.iter().map(|c| (c.metrics.rmse_tot - rmse).powi(2)));
        let novelty = group
            .iter()
            .map(|c| c.mean_novelty)
            .collect::<Option<Vec<f64>>>()
            .map(|v| mean(v.into_iter()));
        out.push(AblationSummary {
            scenario: key.0,
            anchors: key.1,
            mode: key.2,
            seeds: group.len(),
            metrics: MetricsReport {
                rmse_x: m(|r| r.rmse_x),
                rmse_y: m(|r| r.rmse_y),
                rmse_tot: rmse,
                mae_x: m(|r| r.mae_x),
                mae_y: m(|r| r.mae_y),
                mae_tot: m(|r| r.mae_tot),
            },
            rmse_tot_std: var.sqrt(),
            mean_novelty: novelty,
        });
        start = end;
    }
    out
}
