//! Positioning error statistics and novelty heatmaps.

use serde::{Deserialize, Serialize};

use crate::autoencoder::NoveltyVector;
use crate::ekf::FilterState;
use crate::error::{Error, Result};
use crate::geometry::{Arena, Pose2D, RangeSample};

/// Signed per-sample errors, meters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorSeries {
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,
}

impl ErrorSeries {
    pub fn new(ex: Vec<f64>, ey: Vec<f64>) -> Result<Self> {
        if ex.len() != ey.len() {
            return Err(Error::DimensionMismatch {
                expected: ex.len(),
                got: ey.len(),
            });
        }
        if ex.iter().chain(&ey).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite error sample".into()));
        }
        Ok(Self { ex, ey })
    }

    /// Estimate minus truth for every sample; `None` when any sample has no
    /// ground truth.
    pub fn from_trace(trace: &[FilterState], dataset: &[RangeSample]) -> Option<Self> {
        if trace.len() != dataset.len() {
            return None;
        }
        let mut ex = Vec::with_capacity(trace.len());
        let mut ey = Vec::with_capacity(trace.len());
        for (s, d) in trace.iter().zip(dataset) {
            let truth = d.truth?;
            ex.push(s.mean[0] - truth.x);
            ey.push(s.mean[1] - truth.y);
        }
        Some(Self { ex, ey })
    }

    pub fn len(&self) -> usize {
        self.ex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ex.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.ex
            .iter()
            .zip(&self.ey)
            .map(|(x, y)| x.hypot(*y))
            .collect()
    }
}

/// RMSE and MAE per axis and in the plane, centimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub rmse_tot: f64,
    pub mae_x: f64,
    pub mae_y: f64,
    pub mae_tot: f64,
}

/// `mae_tot` is the mean Euclidean error norm.
pub fn compute_metrics(series: &ErrorSeries) -> Result<MetricsReport> {
    if series.is_empty() {
        return Err(Error::Empty("error series"));
    }
    let n = series.len() as f64;
    let mean = |it: &mut dyn Iterator<Item = f64>| it.sum::<f64>() / n;
    let sx = mean(&mut series.ex.iter().map(|e| e * e));
    let sy = mean(&mut series.ey.iter().map(|e| e * e));
    let cm = 100.0;
    Ok(MetricsReport {
        rmse_x: sx.sqrt() * cm,
        rmse_y: sy.sqrt() * cm,
        rmse_tot: (sx + sy).sqrt() * cm,
        mae_x: mean(&mut series.ex.iter().map(|e| e.abs())) * cm,
        mae_y: mean(&mut series.ey.iter().map(|e| e.abs())) * cm,
        mae_tot: mean(&mut series.magnitudes().into_iter()) * cm,
    })
}

/// Sorted error magnitudes (cm) with `P(E <= e) = rank / n`; ties collapse
/// to their last rank so the steps are right-continuous.
pub fn empirical_cdf(series: &ErrorSeries) -> Vec<(f64, f64)> {
    let mut mags: Vec<f64> = series.magnitudes().iter().map(|m| m * 100.0).collect();
    mags.sort_by(f64::total_cmp);
    let n = mags.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(mags.len());
    for (i, m) in mags.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *m => last.1 = p,
            _ => out.push((*m, p)),
        }
    }
    out
}

/// Evaluates a step CDF from [`empirical_cdf`] at `x`.
pub fn cdf_at(cdf: &[(f64, f64)], x: f64) -> f64 {
    match cdf.partition_point(|(m, _)| *m <= x) {
        0 => 0.0,
        i => cdf[i - 1].1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub density: f64,
}

/// Density histogram of error magnitudes (cm) with Freedman-Diaconis bins.
pub fn error_pdf(series: &ErrorSeries) -> Vec<HistogramBin> {
    let mut mags: Vec<f64> = series.magnitudes().iter().map(|m| m * 100.0).collect();
    if mags.is_empty() {
        return Vec::new();
    }
    mags.sort_by(f64::total_cmp);
    let n = mags.len();
    let (lo, hi) = (mags[0], mags[n - 1]);
    let iqr = quantile(&mags, 0.75) - quantile(&mags, 0.25);
    let mut width = 2.0 * iqr / (n as f64).cbrt();
    if !(width > 0.0) {
        // no spread between the quartiles: square-root rule over the full range
        width = (hi - lo) / (n as f64).sqrt().ceil();
    }
    let bins = if width > 0.0 {
        (((hi - lo) / width).ceil() as usize).max(1)
    } else {
        1
    };
    let width = if width > 0.0 { width } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for m in &mags {
        let k = (((m - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lo: lo + k as f64 * width,
            hi: lo + (k + 1) as f64 * width,
            count,
            density: count as f64 / (n as f64 * width),
        })
        .collect()
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSpec {
    pub arena: Arena,
    pub nx: usize,
    pub ny: usize,
}

impl Default for HeatmapSpec {
    fn default() -> Self {
        Self {
            arena: Arena::default(),
            nx: 4,
            ny: 4,
        }
    }
}

/// Mean novelty per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub spec: HeatmapSpec,
    pub cell_width: f64,
    pub cell_height: f64,
    /// Row-major, `ny` rows of `nx` cells, row 0 at `y_min`.
    pub sums: Vec<f64>,
    pub counts: Vec<usize>,
}

impl HeatmapGrid {
    /// `None` for cells without samples.
    pub fn cell(&self, ix: usize, iy: usize) -> Option<f64> {
        let k = iy * self.spec.nx + ix;
        (self.counts[k] > 0).then(|| self.sums[k] / self.counts[k] as f64)
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, Option<f64>)> + '_ {
        (0..self.spec.ny)
            .flat_map(move |iy| (0..self.spec.nx).map(move |ix| (ix, iy, self.cell(ix, iy))))
    }

    /// Mean over non-empty cells.
    pub fn grand_mean(&self) -> Option<f64> {
        let vals: Vec<f64> = self.cells().filter_map(|c| c.2).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Bins every sample's anchor-averaged novelty by position.
pub fn novelty_heatmap(
    poses: &[Pose2D],
    novelty: &[NoveltyVector],
    spec: &HeatmapSpec,
) -> Result<HeatmapGrid> {
    if poses.len() != novelty.len() {
        return Err(Error::DimensionMismatch {
            expected: poses.len(),
            got: novelty.len(),
        });
    }
    if spec.nx == 0 || spec.ny == 0 {
        return Err(Error::InvalidSpec(
            "heatmap grid needs at least one cell".into(),
        ));
    }
    let a = spec.arena;
    let cw = a.width() / spec.nx as f64;
    let ch = a.height() / spec.ny as f64;
    let mut grid = HeatmapGrid {
        spec: *spec,
        cell_width: cw,
        cell_height: ch,
        sums: vec![0.0; spec.nx * spec.ny],
        counts: vec![0; spec.nx * spec.ny],
    };
    for (p, e) in poses.iter().zip(novelty) {
        if !a.contains(p.x, p.y) {
            return Err(Error::OutsideGrid { x: p.x, y: p.y });
        }
        let ix = (((p.x - a.x_min) / cw).floor().max(0.0) as usize).min(spec.nx - 1);
        let iy = (((p.y - a.y_min) / ch).floor().max(0.0) as usize).min(spec.ny - 1);
        let k = iy * spec.nx + ix;
        grid.sums[k] += e.mean();
        grid.counts[k] += 1;
    }
    Ok(grid)
}
