//! Planar poses, UWB anchors and range samples.
//!
//! The anchor order of an [`AnchorLayout`] is the index space shared by range
//! vectors, novelty vectors, covariance diagonals and network inputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Informational only; the filter does not estimate heading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
}

impl Pose2D {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            heading: None,
        }
    }

    pub fn with_heading(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: Some(wrap_angle(heading)),
        }
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub id: u32,
    pub position: [f64; 3],
}

impl Anchor {
    pub fn new(id: u32, x: f64, y: f64, z: f64) -> Self {
        Self {
            id,
            position: [x, y, z],
        }
    }

    pub fn x(&self) -> f64 {
        self.position[0]
    }

    pub fn y(&self) -> f64 {
        self.position[1]
    }

    pub fn z(&self) -> f64 {
        self.position[2]
    }
}

/// Euclidean distance between a tag at `pose` (height `tag_height`) and an anchor.
pub fn true_range(pose: &Pose2D, anchor: &Anchor, tag_height: f64) -> f64 {
    let dx = pose.x - anchor.x();
    let dy = pose.y - anchor.y();
    let dz = tag_height - anchor.z();
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Axis-aligned rectangle the robot moves in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Arena {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 6.0,
            y_min: 0.0,
            y_max: 3.0,
        }
    }
}

impl Arena {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        const EPS: f64 = 1e-9;
        x >= self.x_min - EPS
            && x <= self.x_max + EPS
            && y >= self.y_min - EPS
            && y <= self.y_max + EPS
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Pose2D {
        Pose2D::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn corners(&self) -> [Pose2D; 4] {
        [
            Pose2D::new(self.x_min, self.y_min),
            Pose2D::new(self.x_max, self.y_min),
            Pose2D::new(self.x_max, self.y_max),
            Pose2D::new(self.x_min, self.y_max),
        ]
    }
}

/// Number of anchors kept from the hexagonal layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LayoutVariant {
    #[serde(rename = "6")]
    Hexagon6,
    #[serde(rename = "5")]
    Pentagon5,
    #[serde(rename = "4")]
    Square4,
}

impl LayoutVariant {
    pub const ALL: [LayoutVariant; 3] = [Self::Hexagon6, Self::Pentagon5, Self::Square4];

    pub fn anchor_count(self) -> usize {
        match self {
            Self::Hexagon6 => 6,
            Self::Pentagon5 => 5,
            Self::Square4 => 4,
        }
    }

    pub fn from_count(n: usize) -> Option<Self> {
        match n {
            6 => Some(Self::Hexagon6),
            5 => Some(Self::Pentagon5),
            4 => Some(Self::Square4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorLayout {
    pub anchors: Vec<Anchor>,
    pub tag_height: f64,
}

/// Default anchor and tag heights (meters).
pub const DEFAULT_ANCHOR_Z: f64 = 1.8;
pub const DEFAULT_TAG_HEIGHT: f64 = 0.3;

impl AnchorLayout {
    pub fn new(anchors: Vec<Anchor>, tag_height: f64) -> Result<Self> {
        let layout = Self {
            anchors,
            tag_height,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.len() < 3 {
            return Err(Error::InvalidSpec(format!(
                "layout needs at least 3 anchors, got {}",
                self.anchors.len()
            )));
        }
        if !self.tag_height.is_finite() {
            return Err(Error::InvalidSpec("tag height must be finite".into()));
        }
        for (i, a) in self.anchors.iter().enumerate() {
            if a.position.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!("anchor {} is not finite", a.id)));
            }
            if a.z() < 0.0 {
                return Err(Error::InvalidSpec(format!("anchor {} has z < 0", a.id)));
            }
            if self.anchors[..i].iter().any(|b| b.id == a.id) {
                return Err(Error::InvalidSpec(format!("duplicate anchor id {}", a.id)));
            }
        }
        Ok(())
    }

    /// Six anchors in a hexagon around the default 6 m x 3 m arena. The four
    /// corner anchors stay in every variant; the two side anchors (left and
    /// right of the long axis) are dropped for the 5- and 4-anchor variants.
    pub fn hexagonal(variant: LayoutVariant) -> Self {
        let z = DEFAULT_ANCHOR_Z;
        let all = [
            Anchor::new(0, -0.3, -0.3, z),
            Anchor::new(1, 6.3, -0.3, z),
            Anchor::new(2, 7.0, 1.5, z),
            Anchor::new(3, 6.3, 3.3, z),
            Anchor::new(4, -0.3, 3.3, z),
            Anchor::new(5, -1.0, 1.5, z),
        ];
        let keep: &[u32] = match variant {
            LayoutVariant::Hexagon6 => &[0, 1, 2, 3, 4, 5],
            LayoutVariant::Pentagon5 => &[0, 1, 2, 3, 4],
            LayoutVariant::Square4 => &[0, 1, 3, 4],
        };
        Self {
            anchors: all
                .iter()
                .filter(|a| keep.contains(&a.id))
                .copied()
                .collect(),
            tag_height: DEFAULT_TAG_HEIGHT,
        }
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.anchors.iter().position(|a| a.id == id)
    }

    pub fn ranges_at(&self, pose: &Pose2D) -> Vec<f64> {
        self.anchors
            .iter()
            .map(|a| true_range(pose, a, self.tag_height))
            .collect()
    }

    /// Largest anchor-to-tag distance reachable anywhere in `arena`.
    pub fn max_range(&self, arena: &Arena) -> f64 {
        // distance to a fixed point is convex, so the max over a rectangle sits on a corner
        arena
            .corners()
            .iter()
            .flat_map(|c| {
                self.anchors
                    .iter()
                    .map(move |a| true_range(c, a, self.tag_height))
            })
            .fold(0.0, f64::max)
    }

    /// Stable hash of the anchor geometry, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for a in &self.anchors {
            hasher.update(a.id.to_le_bytes());
            for v in a.position {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hasher.update(self.tag_height.to_bits().to_le_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One timestamped range vector, ordered like the layout's anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSample {
    pub t: f64,
    pub ranges: Vec<f64>,
    pub truth: Option<Pose2D>,
}

impl RangeSample {
    pub fn validate(&self, n_anchors: usize) -> Result<()> {
        if self.ranges.len() != n_anchors {
            return Err(Error::DimensionMismatch {
                expected: n_anchors,
                got: self.ranges.len(),
            });
        }
        if !self.t.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "non-finite timestamp {}",
                self.t
            )));
        }
        if let Some(r) = self.ranges.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidSpec(format!(
                "range {r} at t = {} is not positive and finite",
                self.t
            )));
        }
        Ok(())
    }
}

/// Checks record widths, range validity and timestamp ordering.
pub fn validate_dataset(samples: &[RangeSample], n_anchors: usize) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for s in samples {
        s.validate(n_anchors)?;
        if s.t < last {
            return Err(Error::InvalidSpec(format!(
                "timestamps decrease at t = {}",
                s.t
            )));
        }
        last = s.t;
    }
    Ok(())
}
