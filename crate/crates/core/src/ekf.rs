//! Constant-velocity EKF over `(x, y, vx, vy)` with per-anchor range
//! variances and range biases supplied at every correction.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::autoencoder::AutoencoderModel;
use crate::error::{Error, Result};
use crate::geometry::{true_range, AnchorLayout, Pose2D, RangeSample};
use crate::mapping::{BiasMap, CovarianceMap};
use crate::trilateration::trilaterate_masked;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    pub t: f64,
}

impl FilterState {
    pub fn new(mean: Vector4<f64>, covariance: Matrix4<f64>, t: f64) -> Self {
        Self {
            mean,
            covariance,
            t,
        }
    }

    pub fn position(&self) -> Pose2D {
        Pose2D::new(self.mean[0], self.mean[1])
    }

    fn is_finite(&self) -> bool {
        self.mean
            .iter()
            .chain(self.covariance.iter())
            .all(|v| v.is_finite())
    }
}

fn symmetrize(m: &mut Matrix4<f64>) {
    *m = (*m + m.transpose()) * 0.5;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessNoise {
    /// m^2/s
    pub q_pos: f64,
    /// m^2/s^3
    pub q_vel: f64,
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self {
            q_pos: 0.01,
            q_vel: 0.1,
        }
    }
}

impl ProcessNoise {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_pos >= 0.0 && self.q_vel >= 0.0) || (self.q_pos == 0.0 && self.q_vel == 0.0) {
            return Err(Error::InvalidSpec(
                "process noise densities must be >= 0 and not both zero".into(),
            ));
        }
        Ok(())
    }

    /// Discrete covariance over `dt`, one independent white term per state.
    pub fn covariance(&self, dt: f64) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(
            self.q_pos * dt,
            self.q_pos * dt,
            self.q_vel * dt,
            self.q_vel * dt,
        ))
    }
}

/// Per-anchor variance, bias and participation for one correction.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementContext {
    pub variances: Vec<f64>,
    pub biases: Vec<f64>,
    pub active: Vec<bool>,
}

impl MeasurementContext {
    pub fn uniform(n: usize, variance: f64) -> Self {
        Self {
            variances: vec![variance; n],
            biases: vec![0.0; n],
            active: vec![true; n],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for len in [self.variances.len(), self.biases.len(), self.active.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        if self.variances.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidSpec(
                "measurement variances must be positive".into(),
            ));
        }
        Ok(())
    }
}

pub fn predict(state: &FilterState, dt: f64, noise: &ProcessNoise) -> Result<FilterState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "prediction step dt = {dt} must be positive"
        )));
    }
    if !state.is_finite() {
        return Err(Error::NonFiniteState);
    }
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    let mut covariance = f * state.covariance * f.transpose() + noise.covariance(dt);
    symmetrize(&mut covariance);
    Ok(FilterState {
        mean: f * state.mean,
        covariance,
        t: state.t + dt,
    })
}

/// Range Jacobian rows `[(x - x_i)/d_i, (y - y_i)/d_i, 0, 0]`. The returned
/// flags are false for anchors at zero distance, whose rows are left zero.
pub fn measurement_jacobian(
    mean: &Vector4<f64>,
    layout: &AnchorLayout,
) -> (DMatrix<f64>, Vec<bool>) {
    let pose = Pose2D::new(mean[0], mean[1]);
    let mut h = DMatrix::zeros(layout.len(), 4);
    let mut valid = vec![true; layout.len()];
    for (i, a) in layout.anchors.iter().enumerate() {
        let d = true_range(&pose, a, layout.tag_height);
        if d > 0.0 {
            h[(i, 0)] = (pose.x - a.x()) / d;
            h[(i, 1)] = (pose.y - a.y()) / d;
        } else {
            log::warn!("robot coincides with anchor {}; masking it", a.id);
            valid[i] = false;
        }
    }
    (h, valid)
}

/// EKF correction with `R = diag(ctx.variances)` and innovation
/// `(z - bias) - h(mean)`. If the innovation covariance cannot be
/// factorized the predicted state is returned unchanged.
pub fn correct(
    state: &FilterState,
    z: &RangeSample,
    ctx: &MeasurementContext,
    layout: &AnchorLayout,
) -> Result<FilterState> {
    let n = layout.len();
    ctx.validate(n)?;
    if z.ranges.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: z.ranges.len(),
        });
    }
    if !state.is_finite() {
        return Err(Error::NonFiniteState);
    }
    let (h_full, valid) = measurement_jacobian(&state.mean, layout);
    let rows: Vec<usize> = (0..n).filter(|&i| ctx.active[i] && valid[i]).collect();
    if rows.is_empty() {
        return Err(Error::NoActiveAnchors);
    }
    let m = rows.len();
    let pose = state.position();
    let h = DMatrix::from_fn(m, 4, |r, c| h_full[(rows[r], c)]);
    let innovation = DVector::from_fn(m, |r, _| {
        let i = rows[r];
        (z.ranges[i] - ctx.biases[i]) - true_range(&pose, &layout.anchors[i], layout.tag_height)
    });
    let r_mat = DMatrix::from_fn(
        m,
        m,
        |a, b| if a == b { ctx.variances[rows[a]] } else { 0.0 },
    );

    let sigma = DMatrix::from_iterator(4, 4, state.covariance.iter().copied());
    let s = &h * &sigma * h.transpose() + r_mat;
    let Some(chol) = s.clone().cholesky() else {
        log::warn!(
            "innovation covariance not positive definite at t = {}; skipping correction",
            z.t
        );
        return Ok(state.clone());
    };
    // K = Sigma H^T S^-1, computed as (S^-1 H Sigma)^T
    let gain = chol.solve(&(&h * &sigma)).transpose();
    let dx = &gain * innovation;
    let mut covariance = state.covariance;
    let kh = &gain * &h;
    let i_kh = DMatrix::<f64>::identity(4, 4) - kh;
    let updated = i_kh * sigma;
    for r in 0..4 {
        for c in 0..4 {
            covariance[(r, c)] = updated[(r, c)];
        }
    }
    symmetrize(&mut covariance);
    let next = FilterState {
        mean: state.mean + Vector4::new(dx[0], dx[1], dx[2], dx[3]),
        covariance,
        t: state.t,
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteState);
    }
    Ok(next)
}

/// Initial uncertainty of the trilaterated start state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialUncertainty {
    pub position_var: f64,
    pub velocity_var: f64,
}

impl Default for InitialUncertainty {
    fn default() -> Self {
        Self {
            position_var: 1.0,
            velocity_var: 1.0,
        }
    }
}

/// Trilaterated position, zero velocity, diagonal covariance.
pub fn initial_state(
    sample: &RangeSample,
    mask: Option<&[bool]>,
    layout: &AnchorLayout,
    unc: &InitialUncertainty,
) -> Result<FilterState> {
    let all = vec![true; layout.len()];
    let pose = trilaterate_masked(layout, &sample.ranges, mask.unwrap_or(&all))?;
    Ok(FilterState::new(
        Vector4::new(pose.x, pose.y, 0.0, 0.0),
        Matrix4::from_diagonal(&Vector4::new(
            unc.position_var,
            unc.position_var,
            unc.velocity_var,
            unc.velocity_var,
        )),
        sample.t,
    ))
}

/// How the measurement context is built at every step.
#[derive(Debug, Clone, Copy)]
pub enum FilterMode<'a> {
    /// Constant variance, no bias.
    Static { variance: f64 },
    /// Novelty-driven variances; bias correction only when `bias` is set.
    Adaptive {
        model: &'a AutoencoderModel,
        covariance: &'a CovarianceMap,
        bias: Option<&'a BiasMap>,
    },
}

impl FilterMode<'_> {
    fn context(&self, sample: &RangeSample, active: Vec<bool>) -> Result<MeasurementContext> {
        match *self {
            FilterMode::Static { variance } => Ok(MeasurementContext {
                variances: vec![variance; active.len()],
                biases: vec![0.0; active.len()],
                active,
            }),
            FilterMode::Adaptive {
                model,
                covariance,
                bias,
            } => {
                let novelty = model.novelty_score(&sample.ranges)?;
                Ok(MeasurementContext {
                    variances: novelty
                        .scores
                        .iter()
                        .map(|&e| covariance.covariance_of(e))
                        .collect(),
                    biases: novelty
                        .scores
                        .iter()
                        .map(|&e| bias.map_or(0.0, |b| b.bias_of(e)))
                        .collect(),
                    active,
                })
            }
        }
    }
}

/// Predict to each sample's timestamp, then correct with it. `masks`, when
/// given, marks which anchors of each sample take part.
pub fn run_filter(
    dataset: &[RangeSample],
    masks: Option<&[Vec<bool>]>,
    mode: FilterMode<'_>,
    layout: &AnchorLayout,
    noise: &ProcessNoise,
    initial: &FilterState,
) -> Result<Vec<FilterState>> {
    if let Some(m) = masks {
        if m.len() != dataset.len() {
            return Err(Error::DimensionMismatch {
                expected: dataset.len(),
                got: m.len(),
            });
        }
    }
    if let FilterMode::Adaptive { model, .. } = mode {
        model.check_layout(layout);
    }
    let mut state = initial.clone();
    let mut trace = Vec::with_capacity(dataset.len());
    for (k, sample) in dataset.iter().enumerate() {
        let dt = sample.t - state.t;
        if dt < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "dataset not ordered by time at t = {}",
                sample.t
            )));
        }
        if dt > 0.0 {
            state = predict(&state, dt, noise)?;
        }
        let active = masks.map_or_else(|| vec![true; layout.len()], |m| m[k].clone());
        let ctx = mode.context(sample, active)?;
        state = if ctx.active.iter().any(|a| *a) {
            correct(&state, sample, &ctx, layout)?
        } else {
            state
        };
        trace.push(state.clone());
    }
    Ok(trace)
}

pub fn run_adaptive(
    dataset: &[RangeSample],
    model: &AutoencoderModel,
    covariance: &CovarianceMap,
    bias: &BiasMap,
    layout: &AnchorLayout,
    noise: &ProcessNoise,
    initial: &FilterState,
) -> Result<Vec<FilterState>> {
    let mode = FilterMode::Adaptive {
        model,
        covariance,
        bias: Some(bias),
    };
    run_filter(dataset, None, mode, layout, noise, initial)
}

pub fn run_static(
    dataset: &[RangeSample],
    variance: f64,
    layout: &AnchorLayout,
    noise: &ProcessNoise,
    initial: &FilterState,
) -> Result<Vec<FilterState>> {
    run_filter(
        dataset,
        None,
        FilterMode::Static { variance },
        layout,
        noise,
        initial,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Anchor, LayoutVariant};
    use proptest::prelude::*;

    fn state(mean: [f64; 4]) -> FilterState {
        FilterState::new(Vector4::from(mean), Matrix4::identity() * 0.5, 0.0)
    }

    fn zero_noise() -> ProcessNoise {
        ProcessNoise {
            q_pos: 0.0,
            q_vel: 0.0,
        }
    }

    fn assert_spd(c: &Matrix4<f64>) {
        assert!((c - c.transpose()).abs().max() < 1e-9);
        let eig = c.symmetric_eigenvalues();
        assert!(eig.iter().all(|e| *e > 0.0), "{eig:?}");
    }

    #[test]
    fn unit_velocity_step() {
        let s = predict(&state([0.0, 0.0, 1.0, 0.0]), 1.0, &zero_noise()).unwrap();
        assert_eq!(s.mean, Vector4::new(1.0, 0.0, 1.0, 0.0));
        assert_eq!(s.t, 1.0);
    }

    #[test]
    fn zero_velocity_position_fixed() {
        let s0 = state([2.0, 3.0, 0.0, 0.0]);
        let s = predict(&s0, 0.7, &zero_noise()).unwrap();
        assert_eq!(s.mean, s0.mean);
        // position variance grows through the velocity coupling only
        assert!((s.covariance[(0, 0)] - (0.5 + 0.7 * 0.7 * 0.5)).abs() < 1e-12);
        assert_eq!(s.covariance[(2, 2)], 0.5);
    }

    #[test]
    fn noisy_prediction_trace_grows() {
        let mut s = state([0.0, 0.0, 0.3, -0.1]);
        let noise = ProcessNoise::default();
        for _ in 0..100 {
            let next = predict(&s, 0.1, &noise).unwrap();
            assert!(next.covariance.trace() > s.covariance.trace());
            assert_spd(&next.covariance);
            s = next;
        }
    }

    #[test]
    fn predict_rejects_bad_input() {
        assert!(predict(&state([0.0; 4]), 0.0, &zero_noise()).is_err());
        assert!(matches!(
            predict(&state([f64::NAN, 0.0, 0.0, 0.0]), 0.1, &zero_noise()),
            Err(Error::NonFiniteState)
        ));
    }

    #[test]
    fn jacobian_three_four_five() {
        let layout = AnchorLayout::new(
            vec![
                Anchor::new(0, 0.0, 0.0, 0.0),
                Anchor::new(1, 3.0, 4.0, 1.0),
                Anchor::new(2, 9.0, 0.0, 0.0),
            ],
            0.0,
        )
        .unwrap();
        let (h, valid) = measurement_jacobian(&Vector4::new(3.0, 4.0, 0.5, 0.5), &layout);
        assert!((h[(0, 0)] - 0.6).abs() < 1e-15 && (h[(0, 1)] - 0.8).abs() < 1e-15);
        assert_eq!((h[(0, 2)], h[(0, 3)]), (0.0, 0.0));
        // directly under anchor 1, one meter below
        assert_eq!((h[(1, 0)], h[(1, 1)]), (0.0, 0.0));
        assert!(valid.iter().all(|v| *v));
    }

    #[test]
    fn jacobian_masks_coincident_anchor() {
        let layout = AnchorLayout::new(
            vec![
                Anchor::new(0, 1.0, 1.0, 0.0),
                Anchor::new(1, 3.0, 0.0, 0.0),
                Anchor::new(2, 0.0, 3.0, 0.0),
            ],
            0.0,
        )
        .unwrap();
        let (_, valid) = measurement_jacobian(&Vector4::new(1.0, 1.0, 0.0, 0.0), &layout);
        assert_eq!(valid, vec![false, true, true]);
    }

    #[test]
    fn huge_variance_leaves_prediction() {
        let layout = AnchorLayout::hexagonal(LayoutVariant::Hexagon6);
        let s = state([2.0, 1.0, 0.5, 0.0]);
        let z = RangeSample {
            t: 0.0,
            ranges: layout.ranges_at(&Pose2D::new(2.5, 1.7)),
            truth: None,
        };
        let out = correct(&s, &z, &MeasurementContext::uniform(6, 1e9), &layout).unwrap();
        assert!((out.mean - s.mean).norm() < 1e-6);
        assert_spd(&out.covariance);
    }

    #[test]
    fn masked_anchor_contributes_nothing() {
        let layout = AnchorLayout::hexagonal(LayoutVariant::Hexagon6);
        let s = state([2.0, 1.0, 0.0, 0.0]);
        let mut z = RangeSample {
            t: 0.0,
            ranges: layout.ranges_at(&Pose2D::new(2.2, 1.1)),
            truth: None,
        };
        let mut ctx = MeasurementContext::uniform(6, 0.01);
        ctx.active[3] = false;
        let a = correct(&s, &z, &ctx, &layout).unwrap();
        z.ranges[3] += 10.0;
        let b = correct(&s, &z, &ctx, &layout).unwrap();
        assert_eq!(a, b);
        ctx.active = vec![false; 6];
        assert!(matches!(
            correct(&s, &z, &ctx, &layout),
            Err(Error::NoActiveAnchors)
        ));
    }

    #[test]
    fn bias_is_subtracted_from_measurement() {
        let layout = AnchorLayout::hexagonal(LayoutVariant::Hexagon6);
        let s = state([2.0, 1.0, 0.0, 0.0]);
        let truth = Pose2D::new(2.0, 1.0);
        let exact = RangeSample {
            t: 0.0,
            ranges: layout.ranges_at(&truth),
            truth: None,
        };
        let mut biased = exact.clone();
        biased.ranges[1] += 0.4;
        let mut ctx = MeasurementContext::uniform(6, 0.01);
        ctx.biases[1] = 0.4;
        let a = correct(&s, &exact, &MeasurementContext::uniform(6, 0.01), &layout).unwrap();
        let b = correct(&s, &biased, &ctx, &layout).unwrap();
        assert!((a.mean - b.mean).norm() < 1e-12);
    }

    #[test]
    fn ill_conditioned_innovation_skips() {
        let layout = AnchorLayout::hexagonal(LayoutVariant::Hexagon6);
        let mut s = state([2.0, 1.0, 0.0, 0.0]);
        // an indefinite prior makes H Sigma H^T + R indefinite
        s.covariance = -Matrix4::identity();
        let z = RangeSample {
            t: 0.0,
            ranges: layout.ranges_at(&Pose2D::new(2.3, 1.0)),
            truth: None,
        };
        let ctx = MeasurementContext::uniform(6, 1e-6);
        let out = correct(&s, &z, &ctx, &layout).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn empty_dataset_empty_trace() {
        let layout = AnchorLayout::hexagonal(LayoutVariant::Hexagon6);
        let trace = run_static(
            &[],
            0.01,
            &layout,
            &ProcessNoise::default(),
            &state([0.0; 4]),
        )
        .unwrap();
        assert!(trace.is_empty());
    }

    #[test]
    fn static_converges_on_exact_data() {
        let layout = AnchorLayout::hexagonal(LayoutVariant::Hexagon6);
        let data: Vec<RangeSample> = (0..300)
            .map(|k| {
                let t = k as f64 * 0.1;
                let p = Pose2D::new(1.0 + 0.1 * t, 1.0 + 0.05 * t);
                RangeSample {
                    t,
                    ranges: layout.ranges_at(&p),
                    truth: Some(p),
                }
            })
            .collect();
        let init = FilterState::new(Vector4::new(3.0, 2.0, 0.0, 0.0), Matrix4::identity(), 0.0);
        let trace = run_static(&data, 0.01, &layout, &ProcessNoise::default(), &init).unwrap();
        let last = trace.last().unwrap();
        assert!(
            last.position()
                .distance(&data.last().unwrap().truth.unwrap())
                < 0.01
        );
        for s in &trace {
            assert_spd(&s.covariance);
        }
        // a filter that never trusts the ranges coasts on its initial state
        let coast = run_static(&data, 1e12, &layout, &ProcessNoise::default(), &init).unwrap();
        assert!(coast.last().unwrap().position().distance(&init.position()) < 1e-3);
    }

    #[test]
    fn initial_state_from_trilateration() {
        let layout = AnchorLayout::hexagonal(LayoutVariant::Square4);
        let p = Pose2D::new(4.0, 2.0);
        let s = initial_state(
            &RangeSample {
                t: 3.0,
                ranges: layout.ranges_at(&p),
                truth: None,
            },
            None,
            &layout,
            &InitialUncertainty::default(),
        )
        .unwrap();
        assert!(s.position().distance(&p) < 1e-9);
        assert_eq!(s.t, 3.0);
        assert_eq!(s.covariance, Matrix4::identity());
    }

    proptest! {
        #[test]
        fn jacobian_rows_unit_norm(x in -2.0..8.0f64, y in -2.0..5.0f64) {
            let layout = AnchorLayout::new(
                vec![Anchor::new(0, 0.0, 0.0, 0.3), Anchor::new(1, 6.0, 0.0, 0.3), Anchor::new(2, 3.0, 3.0, 0.3)],
                0.3,
            ).unwrap();
            let (h, valid) = measurement_jacobian(&Vector4::new(x, y, 0.0, 0.0), &layout);
            for i in 0..3 {
                if valid[i] {
                    prop_assert!((h[(i, 0)].hypot(h[(i, 1)]) - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn permutation_invariance(x in 0.5..5.5f64, y in 0.5..2.5f64, seed in 0usize..720) {
            let layout = AnchorLayout::hexagonal(LayoutVariant::Hexagon6);
            let mut perm: Vec<usize> = (0..6).collect();
            let mut k = seed;
            for i in (1..6).rev() {
                perm.swap(i, k % (i + 1));
                k /= i + 1;
            }
            let z = RangeSample { t: 0.0, ranges: layout.ranges_at(&Pose2D::new(x + 0.2, y - 0.1)), truth: None };
            let ctx = MeasurementContext {
                variances: vec![0.01, 0.02, 0.05, 0.001, 0.1, 0.03],
                biases: vec![0.1, 0.0, 0.2, 0.05, 0.0, 0.3],
                active: vec![true, true, false, true, true, true],
            };
            let playout = AnchorLayout { anchors: perm.iter().map(|&i| layout.anchors[i]).collect(), tag_height: layout.tag_height };
            let pz = RangeSample { ranges: perm.iter().map(|&i| z.ranges[i]).collect(), ..z.clone() };
            let pctx = MeasurementContext {
                variances: perm.iter().map(|&i| ctx.variances[i]).collect(),
                biases: perm.iter().map(|&i| ctx.biases[i]).collect(),
                active: perm.iter().map(|&i| ctx.active[i]).collect(),
            };
            let s = state([x, y, 0.1, -0.2]);
            let a = correct(&s, &z, &ctx, &layout).unwrap();
            let b = correct(&s, &pz, &pctx, &playout).unwrap();
            prop_assert!((a.mean - b.mean).norm() < 1e-9);
            prop_assert!((a.covariance - b.covariance).norm() < 1e-9);
        }
    }
}
