//! The nine built-in evaluation scenarios and the nominal training set.
//!
//! Scenarios 1-3 are nominal. Scenario 4 adds a cabinet along the top edge of
//! the arena that shadows the two top corner anchors depending on where the
//! tag is. Scenarios 5-8 put a plate in front of one anchor for part of the
//! run, and scenario 9 combines a permanent plate with a dynamic one.
//! Occlusions only ever involve the four corner anchors, which every layout
//! variant keeps, so the same scenario stays comparable across layouts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnchorLayout, Arena, LayoutVariant, RangeSample};
use crate::simulator::{
    simulate_ranges, ChannelModel, Footprint, Obstacle, ScenarioSpec, TrajectoryKind,
    TrajectorySpec,
};

pub const SCENARIO_IDS: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NlosLevel {
    Low,
    Medium,
    High,
}

impl NlosLevel {
    pub fn of(scenario: u8) -> Option<Self> {
        match scenario {
            1..=3 => Some(Self::Low),
            5..=8 => Some(Self::Medium),
            4 | 9 => Some(Self::High),
            _ => None,
        }
    }

    pub fn is_nlos(self) -> bool {
        self != Self::Low
    }
}

/// Knobs shared by every built-in scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub channel: ChannelModel,
    /// Range excess added by a plate in front of an anchor, meters.
    pub plate_bias: f64,
    /// Range excess added by the cabinet, meters.
    pub cabinet_bias: f64,
    pub plate_distance: f64,
    pub plate_width: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            channel: ChannelModel::default(),
            plate_bias: 1.5,
            cabinet_bias: 1.5,
            plate_distance: 0.15,
            plate_width: 1.0,
        }
    }
}

/// Stream tags for [`mix_seed`].
pub const STREAM_TRAJECTORY: u64 = 1;
pub const STREAM_CHANNEL: u64 = 2;

/// SplitMix64 finalizer over the base seed, a scenario tag and a stream tag.
pub fn mix_seed(seed: u64, scenario: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(scenario.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn line() -> TrajectoryKind {
    TrajectoryKind::Line {
        start: [0.5, 1.0],
        end: [5.5, 2.0],
        passes: 6,
    }
}

fn rectangle() -> TrajectoryKind {
    TrajectoryKind::Rectangle {
        corners: vec![[1.0, 0.5], [5.0, 0.5], [5.0, 2.5], [1.0, 2.5]],
        laps: 3,
    }
}

fn figure_eight() -> TrajectoryKind {
    TrajectoryKind::Lemniscate {
        center: [3.0, 1.5],
        radius_x: 2.5,
        radius_y: 2.4,
        laps: 2,
    }
}

fn plate(layout: &AnchorLayout, id: u32, p: &ScenarioParams) -> Result<Obstacle> {
    let i = layout
        .index_of(id)
        .ok_or_else(|| Error::InvalidSpec(format!("layout has no anchor {id}")))?;
    let toward = Arena::default().center();
    Ok(
        Obstacle::plate(&layout.anchors[i], &toward, p.plate_distance, p.plate_width)
            .with_bias(p.plate_bias),
    )
}

/// Built-in scenario `id` (1-9) on the given layout. `seed` drives both the
/// trajectory and the channel noise.
pub fn builtin_scenario(
    id: u8,
    variant: LayoutVariant,
    seed: u64,
    params: &ScenarioParams,
) -> Result<ScenarioSpec> {
    let layout = AnchorLayout::hexagonal(variant);
    let (kind, duration, obstacles) = match id {
        1 => (line(), 50.0, vec![]),
        2 => (rectangle(), 50.0, vec![]),
        3 => (figure_eight(), 50.0, vec![]),
        4 => {
            let cabinet = Obstacle::new(Footprint::Rect {
                min: [0.3, 3.05],
                max: [1.8, 3.25],
            })
            .with_bias(params.cabinet_bias);
            let kind = TrajectoryKind::RandomWaypoints {
                count: 12,
                margin: 0.3,
            };
            (kind, 80.0, vec![cabinet])
        }
        5 => (
            rectangle(),
            50.0,
            vec![plate(&layout, 1, params)?.active_between(10.0, 40.0)],
        ),
        6 => (
            figure_eight(),
            50.0,
            vec![plate(&layout, 1, params)?.active_between(10.0, 40.0)],
        ),
        7 => (
            rectangle(),
            50.0,
            vec![plate(&layout, 4, params)?.active_between(10.0, 40.0)],
        ),
        8 => (
            figure_eight(),
            50.0,
            vec![plate(&layout, 4, params)?.active_between(10.0, 40.0)],
        ),
        9 => (
            figure_eight(),
            50.0,
            vec![
                plate(&layout, 0, params)?,
                plate(&layout, 3, params)?.active_between(20.0, 50.0),
            ],
        ),
        _ => return Err(Error::InvalidSpec(format!("no built-in scenario {id}"))),
    };
    let mut trajectory = TrajectorySpec::new(kind, duration);
    trajectory.rng_seed = mix_seed(seed, id as u64, STREAM_TRAJECTORY);
    if id == 4 {
        trajectory.speed_cap = 0.5;
    }
    let channel = ChannelModel {
        rng_seed: mix_seed(seed, id as u64, STREAM_CHANNEL),
        ..params.channel.clone()
    };
    Ok(ScenarioSpec {
        id: format!("scenario-{id}"),
        layout,
        trajectory,
        obstacles,
        channel,
    })
}

/// Number of nominal random-waypoint trajectories in the default training set.
pub const TRAINING_TRAJECTORIES: usize = 5;
pub const TRAINING_DURATION: f64 = 50.0;
/// Training runs are recorded at twice the evaluation rate.
pub const TRAINING_SAMPLE_RATE: f64 = 20.0;

/// Nominal random-waypoint runs covering the arena, no obstacles.
pub fn training_scenarios(
    variant: LayoutVariant,
    seed: u64,
    channel: &ChannelModel,
) -> Vec<ScenarioSpec> {
    (0..TRAINING_TRAJECTORIES)
        .map(|k| {
            let tag = 100 + k as u64;
            let mut trajectory = TrajectorySpec::new(
                TrajectoryKind::RandomWaypoints {
                    count: 16,
                    margin: 0.1,
                },
                TRAINING_DURATION,
            );
            trajectory.rng_seed = mix_seed(seed, tag, STREAM_TRAJECTORY);
            trajectory.sample_rate = TRAINING_SAMPLE_RATE;
            ScenarioSpec {
                id: format!("training-{k}"),
                layout: AnchorLayout::hexagonal(variant),
                trajectory,
                obstacles: vec![],
                channel: ChannelModel {
                    rng_seed: mix_seed(seed, tag, STREAM_CHANNEL),
                    ..channel.clone()
                },
            }
        })
        .collect()
}

/// All training runs concatenated in order.
pub fn training_dataset(
    variant: LayoutVariant,
    seed: u64,
    channel: &ChannelModel,
) -> Result<Vec<RangeSample>> {
    let mut out = Vec::new();
    for spec in training_scenarios(variant, seed, channel) {
        out.extend(simulate_ranges(&spec)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::is_occluded;

    fn params() -> ScenarioParams {
        ScenarioParams::default()
    }

    #[test]
    fn all_builtins_simulate() {
        for id in SCENARIO_IDS {
            for v in LayoutVariant::ALL {
                let spec = builtin_scenario(id, v, 1, &params()).unwrap();
                let data = simulate_ranges(&spec).unwrap();
                let expect = if id == 4 { 800 } else { 500 };
                assert_eq!(data.len(), expect, "scenario {id}");
            }
        }
        assert!(builtin_scenario(10, LayoutVariant::Hexagon6, 0, &params()).is_err());
    }

    #[test]
    fn levels() {
        assert_eq!(NlosLevel::of(2), Some(NlosLevel::Low));
        assert_eq!(NlosLevel::of(9), Some(NlosLevel::High));
        assert_eq!(NlosLevel::of(0), None);
    }

    #[test]
    fn plates_occlude_only_in_window() {
        let spec = builtin_scenario(5, LayoutVariant::Hexagon6, 0, &params()).unwrap();
        let anchor = &spec.layout.anchors[1];
        let poses = crate::simulator::generate_trajectory(&spec.trajectory).unwrap();
        for (t, p) in &poses {
            let inside = (10.0..=40.0).contains(t);
            assert_eq!(
                is_occluded(p, anchor, &spec.obstacles, *t),
                inside,
                "t = {t}"
            );
            for other in [0usize, 2, 3, 4, 5] {
                assert!(!is_occluded(
                    p,
                    &spec.layout.anchors[other],
                    &spec.obstacles,
                    *t
                ));
            }
        }
    }

    #[test]
    fn cabinet_is_positional() {
        let spec = builtin_scenario(4, LayoutVariant::Hexagon6, 3, &params()).unwrap();
        let poses = crate::simulator::generate_trajectory(&spec.trajectory).unwrap();
        let a4 = &spec.layout.anchors[4];
        let hits = poses
            .iter()
            .filter(|(t, p)| is_occluded(p, a4, &spec.obstacles, *t))
            .count();
        assert!(hits > 0 && hits < poses.len(), "{hits}");
    }

    #[test]
    fn seeds_are_mixed() {
        assert_ne!(mix_seed(0, 1, 1), mix_seed(0, 1, 2));
        assert_ne!(mix_seed(0, 1, 1), mix_seed(0, 2, 1));
        assert_ne!(mix_seed(0, 1, 1), mix_seed(1, 1, 1));
        let a = builtin_scenario(3, LayoutVariant::Square4, 7, &params()).unwrap();
        let b = builtin_scenario(3, LayoutVariant::Square4, 7, &params()).unwrap();
        assert_eq!(simulate_ranges(&a).unwrap(), simulate_ranges(&b).unwrap());
    }

    #[test]
    fn training_set_size() {
        let data = training_dataset(LayoutVariant::Hexagon6, 0, &ChannelModel::default()).unwrap();
        assert_eq!(data.len(), TRAINING_TRAJECTORIES * 1000);
    }
}
