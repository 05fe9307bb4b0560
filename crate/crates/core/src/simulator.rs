//! Synthetic trajectories and UWB ranges with LoS noise, NLoS occlusion and
//! sparse outliers.
//!
//! Every random draw comes from a seeded ChaCha stream, and the channel draws
//! the same number of variates per anchor and sample whatever the occlusion
//! state, so two scenarios that differ only by their obstacles share their
//! LoS noise realisation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{true_range, Anchor, AnchorLayout, Arena, Pose2D, RangeSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TrajectoryKind {
    /// Back-and-forth traversal of a segment, `passes` one-way trips.
    Line {
        start: [f64; 2],
        end: [f64; 2],
        #[serde(default = "one")]
        passes: u32,
    },
    /// Closed polygon through `corners`, walked `laps` times.
    Rectangle {
        corners: Vec<[f64; 2]>,
        #[serde(default = "one")]
        laps: u32,
    },
    /// Figure-eight (Gerono lemniscate) with lobes along X.
    Lemniscate {
        center: [f64; 2],
        radius_x: f64,
        radius_y: f64,
        #[serde(default = "one")]
        laps: u32,
    },
    /// Cyclic tour of `count` uniformly drawn waypoints at the speed cap.
    RandomWaypoints {
        count: usize,
        #[serde(default = "default_margin")]
        margin: f64,
    },
}

fn one() -> u32 {
    1
}

fn default_margin() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    #[serde(flatten)]
    pub kind: TrajectoryKind,
    pub duration: f64,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_speed_cap")]
    pub speed_cap: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub arena: Arena,
}

fn default_rate() -> f64 {
    10.0
}

fn default_speed_cap() -> f64 {
    1.0
}

impl TrajectorySpec {
    pub fn new(kind: TrajectoryKind, duration: f64) -> Self {
        Self {
            kind,
            duration,
            sample_rate: default_rate(),
            speed_cap: default_speed_cap(),
            rng_seed: 0,
            arena: Arena::default(),
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.duration) || !positive(self.sample_rate) || !positive(self.speed_cap) {
            return Err(Error::InvalidSpec(
                "duration, sample_rate and speed_cap must be positive".into(),
            ));
        }
        if self.arena.width() <= 0.0 || self.arena.height() <= 0.0 {
            return Err(Error::InvalidSpec("arena must have positive extent".into()));
        }
        Ok(())
    }
}

/// Poses sampled at `sample_rate` for `duration` seconds.
pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<Vec<(f64, Pose2D)>> {
    spec.validate()?;
    let n = spec.sample_count();
    let times: Vec<f64> = (0..n).map(|i| i as f64 / spec.sample_rate).collect();

    let poses: Vec<(f64, Pose2D)> = match &spec.kind {
        TrajectoryKind::Line { start, end, passes } => {
            if *passes == 0 {
                return Err(Error::InvalidSpec("line needs at least one pass".into()));
            }
            let path = Polyline::new(ping_pong(*start, *end, *passes))?;
            let speed = path.length / spec.duration;
            check_speed(speed, spec)?;
            times.iter().map(|&t| (t, path.at(speed * t))).collect()
        }
        TrajectoryKind::Rectangle { corners, laps } => {
            if corners.len() < 3 || *laps == 0 {
                return Err(Error::InvalidSpec(
                    "rectangle needs at least 3 corners and one lap".into(),
                ));
            }
            let mut pts = Vec::with_capacity(corners.len() * *laps as usize + 1);
            for _ in 0..*laps {
                pts.extend_from_slice(corners);
            }
            pts.push(corners[0]);
            let path = Polyline::new(pts)?;
            let speed = path.length / spec.duration;
            check_speed(speed, spec)?;
            times.iter().map(|&t| (t, path.at(speed * t))).collect()
        }
        TrajectoryKind::Lemniscate {
            center,
            radius_x,
            radius_y,
            laps,
        } => {
            if *laps == 0 || !(*radius_x > 0.0) || !(*radius_y > 0.0) {
                return Err(Error::InvalidSpec(
                    "lemniscate needs positive radii and one lap".into(),
                ));
            }
            let omega = 2.0 * std::f64::consts::PI * f64::from(*laps) / spec.duration;
            // peak speed is reached at the crossing point
            check_speed(omega * radius_x.hypot(*radius_y), spec)?;
            times
                .iter()
                .map(|&t| {
                    let th = omega * t;
                    let x = center[0] + radius_x * th.sin();
                    let y = center[1] + radius_y * th.sin() * th.cos();
                    let heading = (radius_y * (2.0 * th).cos()).atan2(radius_x * th.cos());
                    (t, Pose2D::with_heading(x, y, heading))
                })
                .collect()
        }
        TrajectoryKind::RandomWaypoints { count, margin } => {
            if *count < 2 {
                return Err(Error::InvalidSpec("need at least two waypoints".into()));
            }
            let a = &spec.arena;
            if 2.0 * margin >= a.width().min(a.height()) || *margin < 0.0 {
                return Err(Error::InvalidSpec("waypoint margin too large".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
            let mut wps: Vec<[f64; 2]> = (0..*count)
                .map(|_| {
                    [
                        rng.random_range(a.x_min + margin..=a.x_max - margin),
                        rng.random_range(a.y_min + margin..=a.y_max - margin),
                    ]
                })
                .collect();
            wps.push(wps[0]);
            let lap = Polyline::new(wps)?;
            let speed = spec.speed_cap;
            times
                .iter()
                .map(|&t| (t, lap.at((speed * t) % lap.length)))
                .collect()
        }
    };

    for (t, p) in &poses {
        if !spec.arena.contains(p.x, p.y) {
            return Err(Error::OutsideArena {
                t: *t,
                x: p.x,
                y: p.y,
            });
        }
    }
    Ok(poses)
}

fn check_speed(speed: f64, spec: &TrajectorySpec) -> Result<()> {
    if speed > spec.speed_cap * (1.0 + 1e-12) {
        return Err(Error::InvalidSpec(format!(
            "trajectory needs {speed:.3} m/s, above the {:.3} m/s cap",
            spec.speed_cap
        )));
    }
    Ok(())
}

fn ping_pong(start: [f64; 2], end: [f64; 2], passes: u32) -> Vec<[f64; 2]> {
    let mut pts = vec![start];
    for i in 0..passes {
        pts.push(if i % 2 == 0 { end } else { start });
    }
    pts
}

/// Arc-length parameterised piecewise-linear path.
struct Polyline {
    points: Vec<[f64; 2]>,
    cumulative: Vec<f64>,
    length: f64,
}

impl Polyline {
    fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            cumulative.push(cumulative.last().unwrap() + d);
        }
        let length = *cumulative.last().unwrap();
        if !(length > 0.0) {
            return Err(Error::InvalidSpec("path has zero length".into()));
        }
        Ok(Self {
            points,
            cumulative,
            length,
        })
    }

    fn at(&self, s: f64) -> Pose2D {
        let s = s.clamp(0.0, self.length);
        let k = match self.cumulative.partition_point(|&c| c <= s) {
            0 => 0,
            i => (i - 1).min(self.points.len() - 2),
        };
        let (a, b) = (self.points[k], self.points[k + 1]);
        let seg = self.cumulative[k + 1] - self.cumulative[k];
        let u = if seg > 0.0 {
            (s - self.cumulative[k]) / seg
        } else {
            0.0
        };
        Pose2D::with_heading(
            a[0] + u * (b[0] - a[0]),
            a[1] + u * (b[1] - a[1]),
            (b[1] - a[1]).atan2(b[0] - a[0]),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape")]
pub enum Footprint {
    Segment { a: [f64; 2], b: [f64; 2] },
    Rect { min: [f64; 2], max: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub footprint: Footprint,
    /// `[t_start, t_end]`; `None` means active for the whole run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_window: Option<[f64; 2]>,
    /// Falls back to the channel's `nlos_default_bias` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nlos_bias_mean: Option<f64>,
    /// Falls back to the channel's `nlos_noise_sigma` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nlos_noise_sigma: Option<f64>,
}

impl Obstacle {
    pub fn new(footprint: Footprint) -> Self {
        Self {
            footprint,
            active_window: None,
            nlos_bias_mean: None,
            nlos_noise_sigma: None,
        }
    }

    /// A flat plate `width` wide standing `distance` in front of `anchor`,
    /// facing `toward`.
    pub fn plate(anchor: &Anchor, toward: &Pose2D, distance: f64, width: f64) -> Self {
        let (dx, dy) = (toward.x - anchor.x(), toward.y - anchor.y());
        let norm = dx.hypot(dy);
        let (ux, uy) = (dx / norm, dy / norm);
        let (cx, cy) = (anchor.x() + ux * distance, anchor.y() + uy * distance);
        let h = 0.5 * width;
        Self::new(Footprint::Segment {
            a: [cx - uy * h, cy + ux * h],
            b: [cx + uy * h, cy - ux * h],
        })
    }

    pub fn active_between(mut self, t_start: f64, t_end: f64) -> Self {
        self.active_window = Some([t_start, t_end]);
        self
    }

    pub fn with_bias(mut self, mean: f64) -> Self {
        self.nlos_bias_mean = Some(mean);
        self
    }

    pub fn is_active(&self, t: f64) -> bool {
        match self.active_window {
            None => true,
            Some([t0, t1]) => t >= t0 && t <= t1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some([t0, t1]) = self.active_window {
            if !(t0 < t1) {
                return Err(Error::InvalidSpec(format!(
                    "obstacle window [{t0}, {t1}] is empty"
                )));
            }
        }
        if self.nlos_bias_mean.is_some_and(|b| !(b >= 0.0)) {
            return Err(Error::InvalidSpec("NLoS bias must be non-negative".into()));
        }
        if self.nlos_noise_sigma.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::InvalidSpec("NLoS sigma must be non-negative".into()));
        }
        if let Footprint::Rect { min, max } = self.footprint {
            if !(min[0] <= max[0] && min[1] <= max[1]) {
                return Err(Error::InvalidSpec("rectangle min exceeds max".into()));
            }
        }
        Ok(())
    }

    /// Closed-set test: touching an edge or a corner counts as crossing.
    pub fn blocks(&self, from: [f64; 2], to: [f64; 2]) -> bool {
        match self.footprint {
            Footprint::Segment { a, b } => segments_intersect(from, to, a, b),
            Footprint::Rect { min, max } => segment_hits_rect(from, to, min, max),
        }
    }
}

/// True iff the planar segment from `pose` to `anchor` crosses an obstacle
/// active at time `t`.
pub fn is_occluded(pose: &Pose2D, anchor: &Anchor, obstacles: &[Obstacle], t: f64) -> bool {
    let from = [pose.x, pose.y];
    let to = [anchor.x(), anchor.y()];
    obstacles
        .iter()
        .any(|o| o.is_active(t) && o.blocks(from, to))
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

/// Liang-Barsky clip against a closed rectangle.
fn segment_hits_rect(p: [f64; 2], q: [f64; 2], min: [f64; 2], max: [f64; 2]) -> bool {
    let d = [q[0] - p[0], q[1] - p[1]];
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for axis in 0..2 {
        if d[axis] == 0.0 {
            if p[axis] < min[axis] || p[axis] > max[axis] {
                return false;
            }
            continue;
        }
        let mut ta = (min[axis] - p[axis]) / d[axis];
        let mut tb = (max[axis] - p[axis]) / d[axis];
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModel {
    pub los_noise_sigma: f64,
    /// Constant range excess present even in nominal conditions
    /// (multipath off walls and furniture).
    pub los_bias: f64,
    pub nlos_default_bias: f64,
    pub nlos_noise_sigma: f64,
    pub outlier_prob: f64,
    pub outlier_magnitude: f64,
    pub rng_seed: u64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            los_noise_sigma: 0.05,
            los_bias: 0.1,
            nlos_default_bias: 0.4,
            nlos_noise_sigma: 0.1,
            outlier_prob: 0.01,
            outlier_magnitude: 1.0,
            rng_seed: 0,
        }
    }
}

impl ChannelModel {
    /// Noise-free, bias-free, outlier-free channel.
    pub fn ideal() -> Self {
        Self {
            los_noise_sigma: 0.0,
            los_bias: 0.0,
            nlos_default_bias: 0.0,
            nlos_noise_sigma: 0.0,
            outlier_prob: 0.0,
            outlier_magnitude: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.los_noise_sigma,
            self.los_bias,
            self.nlos_default_bias,
            self.nlos_noise_sigma,
            self.outlier_magnitude,
        ];
        if fields.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidSpec(
                "channel sigmas, biases and outlier magnitude must be finite and >= 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.outlier_prob) {
            return Err(Error::InvalidSpec("outlier_prob must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub layout: AnchorLayout,
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub channel: ChannelModel,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.channel.validate()?;
        self.obstacles.iter().try_for_each(Obstacle::validate)
    }
}

const MIN_RANGE: f64 = 1e-3;

/// Per-sample ranges for a scenario, with ground truth attached.
pub fn simulate_ranges(scenario: &ScenarioSpec) -> Result<Vec<RangeSample>> {
    scenario.validate()?;
    let poses = generate_trajectory(&scenario.trajectory)?;
    let ch = &scenario.channel;
    let layout = &scenario.layout;
    let mut rng = ChaCha8Rng::seed_from_u64(ch.rng_seed);

    let samples = poses
        .into_iter()
        .map(|(t, pose)| {
            let ranges = layout
                .anchors
                .iter()
                .map(|anchor| {
                    let z_los: f64 = StandardNormal.sample(&mut rng);
                    let u_outlier: f64 = rng.random();
                    let z_nlos: f64 = StandardNormal.sample(&mut rng);

                    let mut r = true_range(&pose, anchor, layout.tag_height)
                        + ch.los_bias
                        + ch.los_noise_sigma * z_los;
                    for o in &scenario.obstacles {
                        if o.is_active(t) && o.blocks([pose.x, pose.y], [anchor.x(), anchor.y()]) {
                            let mean = o.nlos_bias_mean.unwrap_or(ch.nlos_default_bias);
                            let sigma = o.nlos_noise_sigma.unwrap_or(ch.nlos_noise_sigma);
                            r += (mean + sigma * z_nlos).max(0.0);
                        }
                    }
                    if u_outlier < ch.outlier_prob {
                        r += ch.outlier_magnitude;
                    }
                    r.max(MIN_RANGE)
                })
                .collect();
            RangeSample {
                t,
                ranges,
                truth: Some(pose),
            }
        })
        .collect();
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LayoutVariant;

    fn line_spec() -> TrajectorySpec {
        TrajectorySpec::new(
            TrajectoryKind::Line {
                start: [0.0, 0.0],
                end: [5.0, 0.0],
                passes: 1,
            },
            10.0,
        )
    }

    fn max_step(poses: &[(f64, Pose2D)]) -> f64 {
        poses
            .windows(2)
            .map(|w| w[0].1.distance(&w[1].1))
            .fold(0.0, f64::max)
    }

    #[test]
    fn line_trajectory() {
        let poses = generate_trajectory(&line_spec()).unwrap();
        assert_eq!(poses.len(), 100);
        assert!(poses.iter().all(|(_, p)| p.y == 0.0));
        assert!(max_step(&poses) <= 0.1 + 1e-12);
        assert_eq!(poses[0].1.x, 0.0);
    }

    #[test]
    fn rectangle_closes_loop() {
        // 5 x 3 rectangle, perimeter 16 m
        let mut spec = TrajectorySpec::new(
            TrajectoryKind::Rectangle {
                corners: vec![[0.5, 0.0], [5.5, 0.0], [5.5, 3.0], [0.5, 3.0]],
                laps: 1,
            },
            50.0,
        );
        spec.sample_rate = 10.0;
        let poses = generate_trajectory(&spec).unwrap();
        assert_eq!(poses.len(), 500);
        let step = max_step(&poses);
        assert!(step <= 0.1);
        assert!(16.0 / spec.speed_cap <= spec.duration);
        assert!(poses.last().unwrap().1.distance(&poses[0].1) <= step + 1e-12);
    }

    #[test]
    fn random_waypoints_deterministic() {
        let mut spec = TrajectorySpec::new(
            TrajectoryKind::RandomWaypoints {
                count: 8,
                margin: 0.2,
            },
            50.0,
        );
        spec.rng_seed = 42;
        let a = generate_trajectory(&spec).unwrap();
        let b = generate_trajectory(&spec).unwrap();
        assert_eq!(a, b);
        spec.rng_seed = 43;
        assert_ne!(a, generate_trajectory(&spec).unwrap());
        assert!(max_step(&a) <= spec.speed_cap / spec.sample_rate + 1e-12);
    }

    #[test]
    fn lemniscate_respects_cap() {
        let spec = TrajectorySpec::new(
            TrajectoryKind::Lemniscate {
                center: [3.0, 1.5],
                radius_x: 2.5,
                radius_y: 2.4,
                laps: 2,
            },
            50.0,
        );
        let poses = generate_trajectory(&spec).unwrap();
        assert!(max_step(&poses) <= 0.1);
        let fast = TrajectorySpec {
            duration: 10.0,
            ..spec
        };
        assert!(generate_trajectory(&fast).is_err());
    }

    #[test]
    fn rejects_geometry_outside_arena() {
        let spec = TrajectorySpec::new(
            TrajectoryKind::Line {
                start: [1.0, 1.0],
                end: [8.0, 1.0],
                passes: 1,
            },
            20.0,
        );
        assert!(matches!(
            generate_trajectory(&spec),
            Err(Error::OutsideArena { .. })
        ));
    }

    #[test]
    fn rejects_invalid_timing() {
        let mut spec = line_spec();
        spec.sample_rate = 0.0;
        assert!(generate_trajectory(&spec).is_err());
        let mut spec = line_spec();
        spec.duration = -1.0;
        assert!(generate_trajectory(&spec).is_err());
    }

    #[test]
    fn occlusion_rect_crossing() {
        let anchor = Anchor::new(0, 0.0, 0.0, 1.0);
        let wall = Obstacle::new(Footprint::Rect {
            min: [0.9, -0.5],
            max: [1.1, 0.5],
        });
        assert!(is_occluded(
            &Pose2D::new(2.0, 0.0),
            &anchor,
            &[wall.clone()],
            0.0
        ));
        assert!(!is_occluded(&Pose2D::new(2.0, 3.0), &anchor, &[wall], 0.0));
    }

    #[test]
    fn occlusion_inactive_window() {
        let anchor = Anchor::new(0, 0.0, 0.0, 1.0);
        let wall = Obstacle::new(Footprint::Rect {
            min: [0.9, -0.5],
            max: [1.1, 0.5],
        })
        .active_between(20.0, 40.0);
        assert!(!is_occluded(
            &Pose2D::new(2.0, 0.0),
            &anchor,
            &[wall.clone()],
            10.0
        ));
        assert!(is_occluded(&Pose2D::new(2.0, 0.0), &anchor, &[wall], 20.0));
    }

    #[test]
    fn plate_covers_the_arena() {
        let layout = AnchorLayout::hexagonal(LayoutVariant::Hexagon6);
        let arena = Arena::default();
        for anchor in &layout.anchors {
            let plate = Obstacle::plate(anchor, &arena.center(), 0.15, 1.0);
            for c in arena.corners() {
                assert!(
                    is_occluded(&c, anchor, &[plate.clone()], 0.0),
                    "anchor {} corner {c:?}",
                    anchor.id
                );
            }
        }
    }

    #[test]
    fn noise_free_channel_is_exact() {
        let layout = AnchorLayout::hexagonal(LayoutVariant::Hexagon6);
        let scenario = ScenarioSpec {
            id: "ideal".into(),
            layout: layout.clone(),
            trajectory: line_spec(),
            obstacles: vec![],
            channel: ChannelModel::ideal(),
        };
        for s in simulate_ranges(&scenario).unwrap() {
            assert_eq!(s.ranges, layout.ranges_at(&s.truth.unwrap()));
        }
    }

    #[test]
    fn whole_run_occlusion_adds_bias() {
        let layout = AnchorLayout::hexagonal(LayoutVariant::Hexagon6);
        let anchor = layout.anchors[0];
        let scenario = ScenarioSpec {
            id: "plate".into(),
            layout: layout.clone(),
            trajectory: TrajectorySpec::new(
                TrajectoryKind::Line {
                    start: [1.0, 1.0],
                    end: [5.0, 2.0],
                    passes: 1,
                },
                10.0,
            ),
            obstacles: vec![
                Obstacle::plate(&anchor, &Arena::default().center(), 0.15, 1.0).with_bias(0.4),
            ],
            channel: ChannelModel::ideal(),
        };
        for s in simulate_ranges(&scenario).unwrap() {
            let exact = layout.ranges_at(&s.truth.unwrap());
            assert!((s.ranges[0] - exact[0] - 0.4).abs() < 1e-12);
            assert_eq!(&s.ranges[1..], &exact[1..]);
        }
    }

    #[test]
    fn channel_validation() {
        let mut ch = ChannelModel::default();
        ch.outlier_prob = 1.0;
        assert!(ch.validate().is_err());
        let mut ch = ChannelModel::default();
        ch.los_noise_sigma = -0.1;
        assert!(ch.validate().is_err());
        let o = Obstacle::new(Footprint::Segment {
            a: [0.0, 0.0],
            b: [1.0, 0.0],
        })
        .active_between(5.0, 5.0);
        assert!(o.validate().is_err());
    }
}
