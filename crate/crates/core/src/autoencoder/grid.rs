use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{fit_vectors, mean_loss};
use super::{normalize, NetworkShape};
use crate::autoencoder::TrainConfig;
use crate::error::{Error, Result};
use crate::geometry::{AnchorLayout, RangeSample};

/// Candidate values; the search runs their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Shared width of the first encoder and the decoder hidden layer.
    pub e1_d1: Vec<usize>,
    pub e2: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            e1_d1: vec![15, 20],
            e2: vec![20, 30, 40],
            batch_sizes: vec![16, 32, 64],
            learning_rates: vec![0.001, 0.01],
        }
    }
}

impl GridSpec {
    pub fn combinations(&self, n_in: usize) -> Vec<(NetworkShape, usize, f64)> {
        let mut out = Vec::new();
        for &h in &self.e1_d1 {
            for &k in &self.e2 {
                for &b in &self.batch_sizes {
                    for &lr in &self.learning_rates {
                        let shape = NetworkShape {
                            n_in,
                            n_e1: h,
                            n_e2: k,
                            n_d1: h,
                        };
                        out.push((shape, b, lr));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub shape: NetworkShape,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_shape: NetworkShape,
    pub best_config: TrainConfig,
    /// Grid order, one entry per combination.
    pub leaderboard: Vec<GridEntry>,
}

/// Exhaustive search minimizing validation reconstruction loss on an 80/20
/// split. Ties go to the smaller network, then the lower learning rate.
pub fn grid_search(
    dataset: &[RangeSample],
    grid: &GridSpec,
    template: &TrainConfig,
    norm_scale: f64,
    layout: &AnchorLayout,
) -> Result<GridResult> {
    let combos = grid.combinations(layout.len());
    if combos.is_empty() {
        return Err(Error::Empty("grid"));
    }
    for (shape, b, lr) in &combos {
        shape.validate()?;
        TrainConfig {
            batch_size: *b,
            learning_rate: *lr,
            ..template.clone()
        }
        .validate()?;
    }
    if dataset.len() < 2 {
        return Err(Error::Empty("grid-search dataset needs at least 2 samples"));
    }

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(template.rng_seed));
    let n_train = ((dataset.len() as f64) * 0.8).round() as usize;
    let n_train = n_train.clamp(1, dataset.len() - 1);
    let vectors = |idx: &[usize]| -> Vec<Vec<f64>> {
        idx.iter()
            .map(|&i| normalize(&dataset[i].ranges, norm_scale))
            .collect()
    };
    let train_set = vectors(&order[..n_train]);
    let val_set = vectors(&order[n_train..]);

    let leaderboard = combos
        .par_iter()
        .map(|&(shape, batch_size, learning_rate)| {
            let cfg = TrainConfig {
                batch_size,
                learning_rate,
                ..template.clone()
            };
            let (model, _) = fit_vectors(&train_set, shape, &cfg, norm_scale, layout)?;
            Ok(GridEntry {
                shape,
                batch_size,
                learning_rate,
                validation_loss: mean_loss(&model, &val_set),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = leaderboard
        .iter()
        .min_by(|a, b| {
            a.validation_loss
                .total_cmp(&b.validation_loss)
                .then(a.shape.parameter_count().cmp(&b.shape.parameter_count()))
                .then(a.learning_rate.total_cmp(&b.learning_rate))
        })
        .expect("non-empty grid");

    Ok(GridResult {
        best_shape: best.shape,
        best_config: TrainConfig {
            batch_size: best.batch_size,
            learning_rate: best.learning_rate,
            ..template.clone()
        },
        leaderboard,
    })
}
