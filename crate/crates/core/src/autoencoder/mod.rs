//! Overcomplete fully-connected autoencoder over normalized anchor ranges.
//!
//! Four affine layers `n_in -> n_e1 -> n_e2 -> n_d1 -> n_in`; ReLU after the
//! first three, Leaky ReLU after the last. The per-anchor novelty score is the
//! absolute reconstruction error in normalized-range units.

mod grid;
mod train;

pub use grid::{grid_search, GridEntry, GridResult, GridSpec};
pub use train::{
    compare_gradients, gradient_check, loss_and_gradients, train, train_with_history, Gradients,
    TrainConfig, TrainReport,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnchorLayout, Arena};

pub const MODEL_FORMAT: &str = "uwb-novelty-autoencoder";
pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkShape {
    pub n_in: usize,
    pub n_e1: usize,
    pub n_e2: usize,
    pub n_d1: usize,
}

impl NetworkShape {
    pub fn new(n_in: usize, n_e1: usize, n_e2: usize, n_d1: usize) -> Result<Self> {
        let shape = Self {
            n_in,
            n_e1,
            n_e2,
            n_d1,
        };
        shape.validate()?;
        Ok(shape)
    }

    /// Hidden widths 15 / 30 / 15.
    pub fn default_for(n_in: usize) -> Self {
        Self {
            n_in,
            n_e1: 15,
            n_e2: 30,
            n_d1: 15,
        }
    }

    /// Encoder widths grow towards the latent layer, decoder widths shrink
    /// back; every hidden layer is wider than the input. Equal first-encoder
    /// and latent widths are accepted.
    pub fn validate(&self) -> Result<()> {
        let Self {
            n_in,
            n_e1,
            n_e2,
            n_d1,
        } = *self;
        if n_in == 0 {
            return Err(Error::InvalidSpec(
                "network input width must be >= 1".into(),
            ));
        }
        if !(n_in < n_e1 && n_e1 <= n_e2 && n_e2 >= n_d1 && n_d1 > n_in) {
            return Err(Error::InvalidSpec(format!(
                "shape {n_in}-{n_e1}-{n_e2}-{n_d1}-{n_in} is not overcomplete"
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each affine layer.
    pub fn layer_dims(&self) -> [(usize, usize); 4] {
        [
            (self.n_in, self.n_e1),
            (self.n_e1, self.n_e2),
            (self.n_e2, self.n_d1),
            (self.n_d1, self.n_in),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// Affine layer with row-major `out x in` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    #[inline]
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.n_in).zip(&self.bias))
        {
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub shape: NetworkShape,
    pub layers: Vec<Dense>,
    pub leaky_slope: f64,
    pub norm_scale: f64,
    pub layout_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
    #[serde(flatten)]
    model: AutoencoderModel,
}

/// Per-anchor reconstruction error, normalized-range units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyVector {
    pub scores: Vec<f64>,
}

impl NoveltyVector {
    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }
}

/// Ranges divided by `norm_scale`.
pub fn normalize(ranges: &[f64], norm_scale: f64) -> Vec<f64> {
    debug_assert!(norm_scale > 0.0);
    ranges.iter().map(|r| r / norm_scale).collect()
}

/// Whole meters above the largest anchor-to-tag distance in the arena.
pub fn default_norm_scale(layout: &AnchorLayout, arena: &Arena) -> f64 {
    layout.max_range(arena).ceil()
}

#[inline]
fn relu(v: f64) -> f64 {
    v.max(0.0)
}

impl AutoencoderModel {
    /// All-zero parameters.
    pub fn zeros(
        shape: NetworkShape,
        norm_scale: f64,
        layout_fingerprint: impl Into<String>,
    ) -> Self {
        Self {
            shape,
            layers: shape
                .layer_dims()
                .iter()
                .map(|&(i, o)| Dense::zeros(i, o))
                .collect(),
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            norm_scale,
            layout_fingerprint: layout_fingerprint.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if self.layers.len() != 4 {
            return Err(Error::Format(format!(
                "expected 4 layers, found {}",
                self.layers.len()
            )));
        }
        for (layer, (i, o)) in self.layers.iter().zip(self.shape.layer_dims()) {
            if layer.n_in != i
                || layer.n_out != o
                || layer.weights.len() != i * o
                || layer.bias.len() != o
            {
                return Err(Error::Format(format!(
                    "layer {}x{} does not match shape {i}x{o}",
                    layer.n_out, layer.n_in
                )));
            }
            if layer
                .weights
                .iter()
                .chain(&layer.bias)
                .any(|v| !v.is_finite())
            {
                return Err(Error::Format("non-finite parameter".into()));
            }
        }
        if !(self.norm_scale > 0.0 && self.norm_scale.is_finite()) {
            return Err(Error::Format("norm_scale must be positive".into()));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope.is_finite()) {
            return Err(Error::Format("leaky slope must be non-negative".into()));
        }
        Ok(())
    }

    /// Reconstruction of a normalized range vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.shape.n_in {
            return Err(Error::DimensionMismatch {
                expected: self.shape.n_in,
                got: x.len(),
            });
        }
        let mut h = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.n_out];
            layer.apply(&h, &mut out);
            if k < 3 {
                out.iter_mut().for_each(|v| *v = relu(*v));
            } else {
                let slope = self.leaky_slope;
                out.iter_mut().for_each(|v| {
                    if *v < 0.0 {
                        *v *= slope
                    }
                });
            }
            h = out;
        }
        Ok(h)
    }

    /// `|forward(x) - x|` elementwise on the normalized ranges.
    pub fn novelty_score(&self, ranges: &[f64]) -> Result<NoveltyVector> {
        let x = normalize(ranges, self.norm_scale);
        let recon = self.forward(&x)?;
        Ok(NoveltyVector {
            scores: recon.iter().zip(&x).map(|(r, v)| (r - v).abs()).collect(),
        })
    }

    /// Logs a warning and returns false when the model was trained against
    /// a different anchor layout.
    pub fn check_layout(&self, layout: &AnchorLayout) -> bool {
        let fp = layout.fingerprint();
        if fp != self.layout_fingerprint {
            log::warn!(
                "model trained on layout {} but data uses layout {}",
                self.layout_fingerprint,
                fp
            );
            return false;
        }
        true
    }

    pub fn to_json(&self) -> Result<String> {
        self.to_json_with(None)
    }

    /// Serialized model with an extra `provenance` object, which loading
    /// ignores.
    pub fn to_json_with(&self, provenance: Option<serde_json::Value>) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            provenance,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Format(format!(
                "unknown model format {:?}",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        file.model.validate()?;
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Copies the input through the widened hidden layers: the first `n`
    /// units of each hidden layer carry `x`, the rest stay zero.
    pub(crate) fn identity_model(n: usize) -> AutoencoderModel {
        let shape = NetworkShape::new(n, n + 2, n + 4, n + 1).unwrap();
        let mut model = AutoencoderModel::zeros(shape, 1.0, "test");
        for layer in &mut model.layers {
            for i in 0..n {
                layer.weights[i * layer.n_in + i] = 1.0;
            }
        }
        model
    }

    #[test]
    fn normalize_divides() {
        assert_eq!(normalize(&[3.5, 7.0], 7.0), vec![0.5, 1.0]);
        assert_eq!(normalize(&[0.0, 0.0, 0.0], 8.0), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn arena_diagonal_normalizes_to_one() {
        use crate::geometry::{LayoutVariant, Pose2D};
        let layout = AnchorLayout::hexagonal(LayoutVariant::Hexagon6);
        let arena = Arena::default();
        let far = layout.max_range(&arena);
        // the farthest pair is the right side anchor and the (0, 0) corner
        let r = layout.ranges_at(&Pose2D::new(0.0, 0.0))[2];
        assert!((r - far).abs() < 1e-12);
        assert_eq!(normalize(&[r], far), vec![1.0]);
        assert_eq!(default_norm_scale(&layout, &arena), 8.0);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let model = AutoencoderModel::zeros(NetworkShape::default_for(6), 8.0, "x");
        let y = model.forward(&[0.3, 0.9, 0.1, 0.5, 0.7, 0.2]).unwrap();
        assert_eq!(y, vec![0.0; 6]);
    }

    #[test]
    fn identity_embedding_reproduces_input() {
        let model = identity_model(4);
        let x = [0.1, 0.5, 0.0, 0.9];
        assert_eq!(model.forward(&x).unwrap(), x.to_vec());
        assert_eq!(model.novelty_score(&x).unwrap().scores, vec![0.0; 4]);
    }

    #[test]
    fn novelty_is_absolute_difference() {
        // bias-only output layer yields a fixed reconstruction
        let shape = NetworkShape::new(2, 3, 4, 3).unwrap();
        let mut model = AutoencoderModel::zeros(shape, 1.0, "x");
        model.layers[3].bias = vec![0.45, 0.38];
        let e = model.novelty_score(&[0.50, 0.30]).unwrap();
        assert!((e.scores[0] - 0.05).abs() < 1e-12);
        assert!((e.scores[1] - 0.08).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let model = identity_model(3);
        assert!(matches!(
            model.forward(&[0.1, 0.2]),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn shape_ordering() {
        assert!(NetworkShape::new(6, 15, 30, 15).is_ok());
        assert!(NetworkShape::new(6, 20, 20, 15).is_ok());
        assert!(NetworkShape::new(6, 4, 30, 15).is_err());
        assert!(NetworkShape::new(6, 30, 20, 15).is_err());
        assert!(NetworkShape::new(6, 15, 30, 6).is_err());
        assert!(NetworkShape::new(0, 1, 2, 1).is_err());
        assert_eq!(
            NetworkShape::default_for(6).parameter_count(),
            6 * 15 + 15 + 15 * 30 + 30 + 30 * 15 + 15 + 15 * 6 + 6
        );
    }

    #[test]
    fn json_round_trip_is_exact() {
        let layout = AnchorLayout::hexagonal(crate::geometry::LayoutVariant::Hexagon6);
        let model = train::init_model(NetworkShape::default_for(6), 8.0, &layout, 11);
        let back = AutoencoderModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model, back);
        let probe = [0.2, 0.4, 0.6, 0.8, 0.5, 0.3];
        assert_eq!(
            model.forward(&probe).unwrap(),
            back.forward(&probe).unwrap()
        );
    }

    #[test]
    fn rejects_bad_documents() {
        let model = identity_model(3);
        let text = model
            .to_json()
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        assert!(AutoencoderModel::from_json(&text).is_err());
        let mut broken = model.clone();
        broken.layers[1].bias.pop();
        assert!(AutoencoderModel::from_json(&broken.to_json().unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn forward_stays_finite(seed in 0u64..1000, xs in proptest::collection::vec(-10.0..10.0f64, 6)) {
            let layout = AnchorLayout::hexagonal(crate::geometry::LayoutVariant::Hexagon6);
            let model = train::init_model(NetworkShape::default_for(6), 8.0, &layout, seed);
            let y = model.forward(&xs).unwrap();
            prop_assert!(y.iter().all(|v| v.is_finite()));
            prop_assert_eq!(y.clone(), model.forward(&xs).unwrap());
        }
    }
}
