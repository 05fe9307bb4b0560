//! The five CLI commands.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ablation::{filter_mode, run_ablation, summarize, AblationCell, AblationSummary};
use super::config::ModeKind;
use super::dataset::DatasetFile;
use super::{
    opt, write_json, write_run_record, Context, Csv, HarnessError, HarnessResult, Provenance,
    SCHEMA_VERSION,
};
use crate::autoencoder::{
    default_norm_scale, grid_search, train_with_history, AutoencoderModel, NetworkShape,
    NoveltyVector, TrainConfig,
};
use crate::ekf::{initial_state, run_filter};
use crate::error::Error;
use crate::geometry::{true_range, AnchorLayout, Arena, RangeSample};
use crate::mapping::{fit_bias_map, BiasMap, BiasObservation};
use crate::metrics::{
    compute_metrics, empirical_cdf, error_pdf, novelty_heatmap, ErrorSeries, HeatmapSpec,
    MetricsReport,
};
use crate::scenarios::{
    builtin_scenario, mix_seed, training_scenarios, NlosLevel, SCENARIO_IDS, STREAM_CHANNEL,
    STREAM_TRAJECTORY,
};
use crate::simulator::{simulate_ranges, ChannelModel, ScenarioSpec};

const METRICS_SCHEMA: &str = "uwbnov-metrics";
const ABLATION_SCHEMA: &str = "uwbnov-ablation";
const REPORT_SCHEMA: &str = "uwbnov-report";

/// What `simulate` generates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulateTarget {
    /// A built-in scenario, 1-9.
    Scenario(u8),
    /// The nominal training runs, one file each.
    Training,
    /// The `[trajectory]` section of the configuration.
    Custom,
}

fn write_dataset(
    ctx: &Context,
    name: &str,
    spec: &ScenarioSpec,
    prov: &Provenance,
) -> HarnessResult<PathBuf> {
    let samples = simulate_ranges(spec)?;
    let mut headers = BTreeMap::new();
    headers.insert("provenance".to_string(), serde_json::to_value(prov)?);
    headers.insert("scenario".to_string(), serde_json::to_value(spec)?);
    let path = ctx.path(name);
    DatasetFile::from_samples(&spec.layout, headers, &samples).write(&path)?;
    log::info!("wrote {} ({} records)", path.display(), samples.len());
    Ok(path)
}

/// Writes one dataset file per generated run and returns their paths.
pub fn cmd_simulate(ctx: &Context, target: SimulateTarget) -> HarnessResult<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let seed = ctx.seed();
    let variant = cfg.layout.variant;
    let prov = Provenance::new("simulate", cfg, vec![seed]);
    ctx.ensure_out()?;
    let paths = match target {
        SimulateTarget::Scenario(id) => {
            if !SCENARIO_IDS.contains(&id) {
                return Err(HarnessError::Usage(format!("no built-in scenario {id}")));
            }
            let prov = prov.arg("scenario", id);
            let spec = builtin_scenario(id, variant, seed, &cfg.scenario_params())?;
            write_run_record(ctx, &prov)?;
            vec![write_dataset(
                ctx,
                &format!("scenario-{id}.csv"),
                &spec,
                &prov,
            )?]
        }
        SimulateTarget::Training => {
            let prov = prov.arg("training", true);
            write_run_record(ctx, &prov)?;
            training_scenarios(variant, seed, &cfg.channel)
                .iter()
                .map(|spec| write_dataset(ctx, &format!("{}.csv", spec.id), spec, &prov))
                .collect::<HarnessResult<_>>()?
        }
        SimulateTarget::Custom => {
            let custom = cfg.trajectory.as_ref().ok_or_else(|| {
                HarnessError::Config("--custom needs a [trajectory] section".into())
            })?;
            let mut trajectory = custom.spec.clone();
            trajectory.rng_seed = mix_seed(seed, 0, STREAM_TRAJECTORY);
            let spec = ScenarioSpec {
                id: "custom".to_string(),
                layout: AnchorLayout::hexagonal(variant),
                trajectory,
                obstacles: custom.obstacles.clone(),
                channel: ChannelModel {
                    rng_seed: mix_seed(seed, 0, STREAM_CHANNEL),
                    ..cfg.channel.clone()
                },
            };
            spec.validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let prov = prov.arg("custom", true);
            write_run_record(ctx, &prov)?;
            vec![write_dataset(ctx, "custom.csv", &spec, &prov)?]
        }
    };
    Ok(paths)
}

/// Reads datasets and checks they share one layout.
fn read_datasets(paths: &[PathBuf]) -> HarnessResult<Vec<DatasetFile>> {
    if paths.is_empty() {
        return Err(HarnessError::Usage("no dataset given".into()));
    }
    let files = paths
        .iter()
        .map(|p| {
            DatasetFile::read(p).map_err(|e| match e {
                Error::Format(m) => Error::Format(format!("{}: {m}", p.display())),
                other => other,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let first = files[0].layout.fingerprint();
    for f in &files[1..] {
        let other = f.layout.fingerprint();
        if other != first {
            return Err(Error::MixedLayouts { first, other }.into());
        }
    }
    Ok(files)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub shape: NetworkShape,
    pub config: TrainConfig,
    pub samples: usize,
    pub norm_scale: f64,
    pub epoch_losses: Vec<f64>,
    /// Novelty averaged over anchors and training samples.
    pub training_novelty_mean: f64,
    pub bias_fit: Option<BiasMap>,
}

/// Trains on the given datasets (or grid-searches first) and writes
/// `model.json`, `train_report.json` and, when truth is available,
/// `bias_fit.json`.
pub fn cmd_train(ctx: &Context, data: &[PathBuf], grid: bool) -> HarnessResult<TrainOutcome> {
    let cfg = &ctx.config;
    let files = read_datasets(data)?;
    let layout = files[0].layout.clone();

    let mut samples: Vec<RangeSample> = Vec::new();
    let mut dropped = 0;
    for f in &files {
        let replay = f.replay(cfg.experiment.staleness)?;
        match replay.masks {
            Some(masks) => {
                for (s, m) in replay.samples.into_iter().zip(masks) {
                    if m.iter().all(|a| *a) {
                        samples.push(s);
                    } else {
                        dropped += 1;
                    }
                }
            }
            None => samples.extend(replay.samples),
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} samples with masked anchors left out of training");
    }
    if samples.is_empty() {
        return Err(Error::Empty("training dataset").into());
    }

    let seed = ctx.seed();
    let mut prov = Provenance::new("train", cfg, vec![seed]).arg("grid", grid);
    for p in data {
        prov = prov.input(p)?;
    }
    ctx.ensure_out()?;

    let norm_scale = default_norm_scale(&layout, &Arena::default());
    let mut shape = cfg.train.shape(layout.len());
    let mut train_cfg = cfg.train.config(seed);
    if grid {
        let result = grid_search(&samples, &cfg.train.grid, &train_cfg, norm_scale, &layout)?;
        let mut csv = Csv::new(
            &prov,
            &[
                "e1",
                "e2",
                "d1",
                "batch_size",
                "learning_rate",
                "validation_loss",
                "best",
            ],
        );
        for e in &result.leaderboard {
            let best = e.shape == result.best_shape
                && e.batch_size == result.best_config.batch_size
                && e.learning_rate == result.best_config.learning_rate;
            csv.row([
                e.shape.n_e1.to_string(),
                e.shape.n_e2.to_string(),
                e.shape.n_d1.to_string(),
                e.batch_size.to_string(),
                e.learning_rate.to_string(),
                e.validation_loss.to_string(),
                u8::from(best).to_string(),
            ]);
        }
        csv.write(&ctx.path("leaderboard.csv"))?;
        shape = result.best_shape;
        train_cfg = result.best_config;
    }

    let (model, history) = train_with_history(&samples, shape, &train_cfg, norm_scale, &layout)?;
    let novelty: Vec<NoveltyVector> = samples
        .iter()
        .map(|s| model.novelty_score(&s.ranges))
        .collect::<crate::Result<_>>()?;
    let training_novelty_mean =
        novelty.iter().map(NoveltyVector::mean).sum::<f64>() / novelty.len() as f64;

    let bias_fit = if samples.iter().all(|s| s.truth.is_some()) {
        let mut obs = Vec::new();
        for (s, e) in samples.iter().zip(&novelty) {
            let truth = s.truth.expect("checked above");
            for (k, a) in layout.anchors.iter().enumerate() {
                obs.push(BiasObservation {
                    anchor: k,
                    novelty: e.scores[k],
                    range_error: s.ranges[k] - true_range(&truth, a, layout.tag_height),
                });
            }
        }
        match fit_bias_map(&obs, cfg.maps.bias.b_max) {
            Ok(fit) => Some(fit),
            Err(e) => {
                log::warn!("bias fit skipped: {e}");
                None
            }
        }
    } else {
        log::info!("datasets carry no ground truth; bias fit skipped");
        None
    };

    let outcome = TrainOutcome {
        shape,
        config: train_cfg,
        samples: samples.len(),
        norm_scale,
        epoch_losses: history.epoch_losses,
        training_novelty_mean,
        bias_fit,
    };
    let model_json = model.to_json_with(Some(serde_json::to_value(&prov)?))? + "\n";
    std::fs::write(ctx.path("model.json"), model_json)?;
    write_json(
        &ctx.path("train_report.json"),
        &json!({ "provenance": prov, "report": outcome }),
    )?;
    if let Some(fit) = &outcome.bias_fit {
        write_json(
            &ctx.path("bias_fit.json"),
            &json!({ "provenance": prov, "bias": fit }),
        )?;
    }
    write_run_record(ctx, &prov)?;
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub data: PathBuf,
    pub model: Option<PathBuf>,
    pub mode: ModeKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetricsFile {
    schema: String,
    version: u32,
    provenance: Provenance,
    label: String,
    anchors: usize,
    mode: ModeKind,
    samples: usize,
    imputed: usize,
    metrics: MetricsReport,
}

fn dataset_label(file: &DatasetFile, path: &Path) -> String {
    file.headers
        .get("scenario")
        .and_then(|s| s.get("id"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "dataset".to_string())
}

fn metrics_table(
    label: &str,
    mode: ModeKind,
    anchors: usize,
    n: usize,
    m: &MetricsReport,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dataset  {label}");
    let _ = writeln!(s, "mode     {}", mode.name());
    let _ = writeln!(s, "anchors  {anchors}");
    let _ = writeln!(s, "samples  {n}");
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<6} {:>10} {:>10} {:>10}", "[cm]", "x", "y", "total");
    let _ = writeln!(
        s,
        "{:<6} {:>10.2} {:>10.2} {:>10.2}",
        "RMSE", m.rmse_x, m.rmse_y, m.rmse_tot
    );
    let _ = writeln!(
        s,
        "{:<6} {:>10.2} {:>10.2} {:>10.2}",
        "MAE", m.mae_x, m.mae_y, m.mae_tot
    );
    s
}

/// Runs one filter mode over a dataset. Writes `trace.csv` always and,
/// when the dataset has ground truth, `metrics.json`, `metrics.txt`,
/// `cdf.csv`, `pdf.csv` plus `heatmap.csv` for adaptive modes. Returns the
/// metrics when they could be computed.
pub fn cmd_evaluate(ctx: &Context, args: &EvaluateArgs) -> HarnessResult<Option<MetricsReport>> {
    let cfg = &ctx.config;
    let file = DatasetFile::read(&args.data)?;
    let layout = &file.layout;
    let replay = file.replay(cfg.experiment.staleness)?;
    if replay.imputed > 0 {
        log::warn!("{} missing readings imputed", replay.imputed);
    }

    let mut prov = Provenance::new("evaluate", cfg, vec![ctx.seed()])
        .arg("mode", args.mode.name())
        .input(&args.data)?;
    let model = if args.mode.needs_model() {
        let path = args.model.as_ref().ok_or_else(|| {
            HarnessError::Usage(format!("mode {} needs --model", args.mode.name()))
        })?;
        let model = AutoencoderModel::load(path)?;
        let data_fp = layout.fingerprint();
        if model.layout_fingerprint != data_fp {
            let err = Error::LayoutMismatch {
                model: model.layout_fingerprint.clone(),
                data: data_fp,
            };
            if !ctx.force {
                return Err(err.into());
            }
            log::warn!("{err}; continuing because of --force");
            prov = prov.arg("forced", true);
        }
        prov = prov.input(path)?;
        Some(model)
    } else {
        if args.model.is_some() {
            log::info!("static mode ignores the model");
        }
        None
    };

    let samples = &replay.samples;
    let masks = replay.masks.as_deref();
    let init = initial_state(
        &samples[0],
        masks.map(|m| m[0].as_slice()),
        layout,
        &cfg.ekf.initial,
    )?;
    let mode = filter_mode(cfg, args.mode, model.as_ref())?;
    let trace = run_filter(samples, masks, mode, layout, &cfg.ekf.process_noise, &init)?;
    let novelty: Option<Vec<NoveltyVector>> = model
        .as_ref()
        .map(|m| samples.iter().map(|s| m.novelty_score(&s.ranges)).collect())
        .transpose()?;

    ctx.ensure_out()?;
    let has_truth = file.has_truth();
    let mut columns = vec!["t", "x", "y", "vx", "vy", "var_x", "var_y"];
    if has_truth {
        columns.extend(["truth_x", "truth_y"]);
    }
    let novelty_names: Vec<String> = layout
        .anchors
        .iter()
        .map(|a| format!("e{}", a.id))
        .collect();
    if novelty.is_some() {
        columns.extend(novelty_names.iter().map(String::as_str));
    }
    let mut csv = Csv::new(&prov, &columns);
    for (k, st) in trace.iter().enumerate() {
        let m = &st.mean;
        let mut row = vec![
            st.t,
            m[0],
            m[1],
            m[2],
            m[3],
            st.covariance[(0, 0)],
            st.covariance[(1, 1)],
        ];
        if let Some(p) = samples[k].truth {
            row.extend([p.x, p.y]);
        }
        if let Some(n) = &novelty {
            row.extend(&n[k].scores);
        }
        csv.row(row);
    }
    csv.write(&ctx.path("trace.csv"))?;
    write_run_record(ctx, &prov)?;

    let Some(series) = ErrorSeries::from_trace(&trace, samples) else {
        log::info!("dataset has no ground truth; metrics skipped");
        return Ok(None);
    };
    let metrics = compute_metrics(&series)?;
    let label = dataset_label(&file, &args.data);
    write_json(
        &ctx.path("metrics.json"),
        &MetricsFile {
            schema: METRICS_SCHEMA.to_string(),
            version: SCHEMA_VERSION,
            provenance: prov.clone(),
            label: label.clone(),
            anchors: layout.len(),
            mode: args.mode,
            samples: samples.len(),
            imputed: replay.imputed,
            metrics,
        },
    )?;
    std::fs::write(
        ctx.path("metrics.txt"),
        metrics_table(&label, args.mode, layout.len(), samples.len(), &metrics),
    )?;

    let mut cdf = Csv::new(&prov, &["error_cm", "probability"]);
    for (x, p) in empirical_cdf(&series) {
        cdf.row([x, p]);
    }
    cdf.write(&ctx.path("cdf.csv"))?;
    let mut pdf = Csv::new(&prov, &["bin_lo_cm", "bin_hi_cm", "count", "density"]);
    for b in error_pdf(&series) {
        pdf.row([
            b.lo.to_string(),
            b.hi.to_string(),
            b.count.to_string(),
            b.density.to_string(),
        ]);
    }
    pdf.write(&ctx.path("pdf.csv"))?;

    if let Some(n) = &novelty {
        let poses: Vec<_> = samples.iter().filter_map(|s| s.truth).collect();
        let [nx, ny] = cfg.experiment.heatmap_cells;
        let spec = HeatmapSpec {
            nx,
            ny,
            ..HeatmapSpec::default()
        };
        match novelty_heatmap(&poses, n, &spec) {
            Ok(grid) => {
                let mut csv = Csv::new(
                    &prov,
                    &[
                        "ix",
                        "iy",
                        "x_min",
                        "x_max",
                        "y_min",
                        "y_max",
                        "count",
                        "mean_novelty",
                    ],
                );
                let a = spec.arena;
                for (ix, iy, mean) in grid.cells() {
                    let x0 = a.x_min + ix as f64 * grid.cell_width;
                    let y0 = a.y_min + iy as f64 * grid.cell_height;
                    csv.row([
                        ix.to_string(),
                        iy.to_string(),
                        x0.to_string(),
                        (x0 + grid.cell_width).to_string(),
                        y0.to_string(),
                        (y0 + grid.cell_height).to_string(),
                        grid.counts[iy * nx + ix].to_string(),
                        opt(mean),
                    ]);
                }
                csv.write(&ctx.path("heatmap.csv"))?;
            }
            Err(e @ Error::OutsideGrid { .. }) => log::warn!("heatmap skipped: {e}"),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Some(metrics))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AblationFile {
    schema: String,
    version: u32,
    provenance: Provenance,
    summary: Vec<AblationSummary>,
}

fn metric_fields(m: &MetricsReport) -> [f64; 6] {
    [m.rmse_x, m.rmse_y, m.rmse_tot, m.mae_x, m.mae_y, m.mae_tot]
}

const METRIC_COLUMNS: [&str; 6] = ["rmse_x", "rmse_y", "rmse_tot", "mae_x", "mae_y", "mae_tot"];

fn level_name(scenario: u8) -> &'static str {
    match NlosLevel::of(scenario) {
        Some(NlosLevel::Low) => "low",
        Some(NlosLevel::Medium) => "medium",
        Some(NlosLevel::High) => "high",
        None => "",
    }
}

/// Seed-averaged total RMSE per scenario, one column per (anchors, mode).
fn ablation_table(summary: &[AblationSummary]) -> String {
    let mut columns: Vec<(usize, ModeKind)> = summary.iter().map(|s| (s.anchors, s.mode)).collect();
    columns.sort_by_key(|&(a, m)| (Reverse(a), m));
    columns.dedup();
    let mut s = String::from("mean total RMSE [cm]\n\n");
    let _ = write!(s, "{:<10}", "scenario");
    for (a, m) in &columns {
        let _ = write!(s, " {:>20}", format!("{a}a {}", m.name()));
    }
    s.push('\n');
    let mut scenarios: Vec<u8> = summary.iter().map(|r| r.scenario).collect();
    scenarios.dedup();
    for id in scenarios {
        let _ = write!(s, "{:<10}", format!("{id} ({})", level_name(id)));
        for (a, m) in &columns {
            let cell = summary
                .iter()
                .find(|r| r.scenario == id && r.anchors == *a && r.mode == *m);
            match cell {
                Some(r) => {
                    let _ = write!(s, " {:>20.2}", r.metrics.rmse_tot);
                }
                None => {
                    let _ = write!(s, " {:>20}", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

/// Runs the configured sweep. Per-seed results land in one private
/// directory per (scenario, anchors, mode) under `cells/`; the merged
/// outputs are `ablation.csv`, `ablation_summary.csv`, `ablation.txt` and
/// `ablation.json`.
pub fn cmd_ablate(ctx: &Context) -> HarnessResult<Vec<AblationSummary>> {
    let cfg = &ctx.config;
    let e = &cfg.experiment;
    let seeds: Vec<u64> = (0..e.seeds).map(|k| e.seed + k).collect();
    let prov = Provenance::new("ablate", cfg, seeds);
    let cells = run_ablation(cfg)?;
    let summary = summarize(&cells);
    ctx.ensure_out()?;

    let mut cell_columns = vec!["scenario", "anchors", "mode", "seed"];
    cell_columns.extend(METRIC_COLUMNS);
    cell_columns.push("mean_novelty");
    let cell_row = |c: &AblationCell| {
        let mut row = vec![
            c.scenario.to_string(),
            c.anchors.to_string(),
            c.mode.name().to_string(),
            c.seed.to_string(),
        ];
        row.extend(metric_fields(&c.metrics).iter().map(f64::to_string));
        row.push(opt(c.mean_novelty));
        row
    };
    for group in &summary {
        let dir = ctx.out.join("cells").join(format!(
            "s{}-{}a-{}",
            group.scenario,
            group.anchors,
            group.mode.name()
        ));
        std::fs::create_dir_all(&dir)?;
        let mut csv = Csv::new(&prov, &cell_columns);
        for c in cells.iter().filter(|c| {
            (c.scenario, c.anchors, c.mode) == (group.scenario, group.anchors, group.mode)
        }) {
            csv.row(cell_row(c));
        }
        csv.write(&dir.join("seeds.csv"))?;
    }

    let mut all = Csv::new(&prov, &cell_columns);
    for c in &cells {
        all.row(cell_row(c));
    }
    all.write(&ctx.path("ablation.csv"))?;

    let mut sum_columns = vec!["scenario", "level", "anchors", "mode", "seeds"];
    sum_columns.extend(METRIC_COLUMNS);
    sum_columns.extend(["rmse_tot_std", "mean_novelty"]);
    let mut csv = Csv::new(&prov, &sum_columns);
    for r in &summary {
        let mut row = vec![
            r.scenario.to_string(),
            level_name(r.scenario).to_string(),
            r.anchors.to_string(),
            r.mode.name().to_string(),
            r.seeds.to_string(),
        ];
        row.extend(metric_fields(&r.metrics).iter().map(f64::to_string));
        row.push(r.rmse_tot_std.to_string());
        row.push(opt(r.mean_novelty));
        csv.row(row);
    }
    csv.write(&ctx.path("ablation_summary.csv"))?;

    std::fs::write(ctx.path("ablation.txt"), ablation_table(&summary))?;
    write_json(
        &ctx.path("ablation.json"),
        &AblationFile {
            schema: ABLATION_SCHEMA.to_string(),
            version: SCHEMA_VERSION,
            provenance: prov.clone(),
            summary: summary.clone(),
        },
    )?;
    write_run_record(ctx, &prov)?;
    Ok(summary)
}

/// One (dataset, anchors) row of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub anchors: usize,
    pub static_metrics: MetricsReport,
    pub adaptive: Vec<AdaptiveResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveResult {
    pub mode: ModeKind,
    pub metrics: MetricsReport,
    /// `(static - adaptive) / static` on total RMSE, percent.
    pub rmse_improvement: f64,
    pub mae_improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    /// Mean total-RMSE improvement per adaptive mode over all rows.
    pub average_improvement: BTreeMap<ModeKind, f64>,
}

pub fn improvement(static_value: f64, adaptive_value: f64) -> f64 {
    (static_value - adaptive_value) / static_value * 100.0
}

type RunKey = (String, Reverse<usize>);

fn check_schema(doc: &Value, path: &Path) -> HarnessResult<String> {
    let schema = doc
        .get("schema")
        .and_then(Value::as_str)
        .unwrap_or_default();
    let version = doc.get("version").and_then(Value::as_u64);
    if ![METRICS_SCHEMA, ABLATION_SCHEMA].contains(&schema) {
        return Err(HarnessError::Usage(format!(
            "{} is not a metrics or ablation result",
            path.display()
        )));
    }
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(Error::Format(format!(
            "{}: schema version {}, this build reads version {SCHEMA_VERSION}",
            path.display(),
            version.map_or_else(|| "missing".to_string(), |v| v.to_string())
        ))
        .into());
    }
    Ok(schema.to_string())
}

fn result_files(run: &Path) -> HarnessResult<Vec<PathBuf>> {
    if run.is_file() {
        return Ok(vec![run.to_path_buf()]);
    }
    let found: Vec<PathBuf> = ["metrics.json", "ablation.json"]
        .iter()
        .map(|n| run.join(n))
        .filter(|p| p.is_file())
        .collect();
    if found.is_empty() {
        return Err(HarnessError::Usage(format!(
            "{} holds no metrics.json or ablation.json",
            run.display()
        )));
    }
    Ok(found)
}

/// Merges evaluation and ablation runs into a static versus adaptive
/// comparison and writes `report.txt`, `report.csv` and `report.json`.
pub fn cmd_report(ctx: &Context, runs: &[PathBuf]) -> HarnessResult<Report> {
    if runs.is_empty() {
        return Err(HarnessError::Usage(
            "report needs at least one run directory".into(),
        ));
    }
    let mut merged: BTreeMap<RunKey, BTreeMap<ModeKind, MetricsReport>> = BTreeMap::new();
    let mut seeds = Vec::new();
    let mut prov = Provenance::new("report", &ctx.config, vec![]);
    let mut insert = |key: RunKey, mode: ModeKind, m: MetricsReport| -> HarnessResult<()> {
        let slot = merged.entry(key.clone()).or_default();
        if slot.insert(mode, m).is_some() {
            return Err(HarnessError::Usage(format!(
                "{} with {} anchors in mode {} appears in more than one run",
                key.0,
                key.1 .0,
                mode.name()
            )));
        }
        Ok(())
    };
    for run in runs {
        for path in result_files(run)? {
            let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            let schema = check_schema(&doc, &path)?;
            prov = prov.input(&path)?;
            if schema == METRICS_SCHEMA {
                let f: MetricsFile = serde_json::from_value(doc)?;
                seeds.extend(f.provenance.seeds);
                insert((f.label, Reverse(f.anchors)), f.mode, f.metrics)?;
            } else {
                let f: AblationFile = serde_json::from_value(doc)?;
                seeds.extend(f.provenance.seeds);
                for s in f.summary {
                    insert(
                        (format!("scenario-{}", s.scenario), Reverse(s.anchors)),
                        s.mode,
                        s.metrics,
                    )?;
                }
            }
        }
    }
    seeds.sort_unstable();
    seeds.dedup();
    prov.seeds = seeds;

    let mut rows = Vec::new();
    for ((label, Reverse(anchors)), modes) in merged {
        let Some(st) = modes.get(&ModeKind::Static) else {
            log::warn!("{label} ({anchors} anchors) has no static run; left out");
            continue;
        };
        let adaptive: Vec<AdaptiveResult> = modes
            .iter()
            .filter(|(m, _)| m.needs_model())
            .map(|(&mode, m)| AdaptiveResult {
                mode,
                metrics: *m,
                rmse_improvement: improvement(st.rmse_tot, m.rmse_tot),
                mae_improvement: improvement(st.mae_tot, m.mae_tot),
            })
            .collect();
        if adaptive.is_empty() {
            log::warn!("{label} ({anchors} anchors) has no adaptive run; left out");
            continue;
        }
        rows.push(ReportRow {
            label,
            anchors,
            static_metrics: *st,
            adaptive,
        });
    }
    if rows.is_empty() {
        return Err(HarnessError::Usage(
            "no run pairs a static result with an adaptive one".into(),
        ));
    }
    let mut average_improvement = BTreeMap::new();
    for mode in [ModeKind::AdaptiveNoBias, ModeKind::AdaptiveFull] {
        let vals: Vec<f64> = rows
            .iter()
            .flat_map(|r| r.adaptive.iter())
            .filter(|a| a.mode == mode)
            .map(|a| a.rmse_improvement)
            .collect();
        if !vals.is_empty() {
            average_improvement.insert(mode, vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    let report = Report {
        rows,
        average_improvement,
    };

    ctx.ensure_out()?;
    let mut columns = vec!["dataset", "anchors", "mode"];
    columns.extend(METRIC_COLUMNS);
    columns.extend(["rmse_improvement_pct", "mae_improvement_pct"]);
    let mut csv = Csv::new(&prov, &columns);
    let mut txt = String::new();
    let _ = writeln!(
        txt,
        "{:<14} {:>3} {:<17} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>9}",
        "dataset",
        "n",
        "mode",
        "rmse_x",
        "rmse_y",
        "rmse",
        "mae_x",
        "mae_y",
        "mae",
        "d_rmse%",
        "d_mae%"
    );
    for r in &report.rows {
        let lines = std::iter::once((ModeKind::Static, &r.static_metrics, None))
            .chain(r.adaptive.iter().map(|a| (a.mode, &a.metrics, Some(a))));
        for (mode, m, a) in lines {
            let mut row = vec![
                r.label.clone(),
                r.anchors.to_string(),
                mode.name().to_string(),
            ];
            row.extend(metric_fields(m).iter().map(f64::to_string));
            row.push(opt(a.map(|a| a.rmse_improvement)));
            row.push(opt(a.map(|a| a.mae_improvement)));
            csv.row(row);
            let f = metric_fields(m);
            let pct = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.1}"));
            let _ = writeln!(
                txt,
                "{:<14} {:>3} {:<17} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>9} {:>9}",
                r.label,
                r.anchors,
                mode.name(),
                f[0],
                f[1],
                f[2],
                f[3],
                f[4],
                f[5],
                pct(a.map(|a| a.rmse_improvement)),
                pct(a.map(|a| a.mae_improvement)),
            );
        }
    }
    txt.push('\n');
    for (mode, v) in &report.average_improvement {
        let _ = writeln!(
            txt,
            "average total-RMSE improvement, {}: {v:.1}%",
            mode.name()
        );
    }
    csv.write(&ctx.path("report.csv"))?;
    std::fs::write(ctx.path("report.txt"), txt)?;
    write_json(
        &ctx.path("report.json"),
        &json!({
            "schema": REPORT_SCHEMA,
            "version": SCHEMA_VERSION,
            "provenance": prov,
            "report": report,
        }),
    )?;
    write_run_record(ctx, &prov)?;
    Ok(report)
}
