//! Planar least-squares trilateration at a known tag height.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geometry::{true_range, Anchor, AnchorLayout, Pose2D};

const MAX_ITERATIONS: usize = 50;
const STEP_TOLERANCE: f64 = 1e-13;

/// Position from all anchors of the layout.
pub fn trilaterate(layout: &AnchorLayout, ranges: &[f64]) -> Result<Pose2D> {
    let mask = vec![true; layout.len()];
    trilaterate_masked(layout, ranges, &mask)
}

/// Linearized closed form followed by Gauss-Newton on the range residuals,
/// using only anchors whose mask entry is set.
pub fn trilaterate_masked(layout: &AnchorLayout, ranges: &[f64], mask: &[bool]) -> Result<Pose2D> {
    if ranges.len() != layout.len() || mask.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.len(),
            got: ranges.len().min(mask.len()),
        });
    }
    let used: Vec<(&Anchor, f64)> = layout
        .anchors
        .iter()
        .zip(ranges)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((a, &r), _)| (a, r))
        .collect();
    if used.len() < 3 {
        return Err(Error::InvalidSpec(format!(
            "trilateration needs 3 anchors, {} available",
            used.len()
        )));
    }
    let h = layout.tag_height;
    let mut p = linear_estimate(&used, h).unwrap_or_else(|| centroid(&used));

    for _ in 0..MAX_ITERATIONS {
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for (a, r) in &used {
            let d = true_range(&p, a, h);
            if d <= f64::EPSILON {
                continue;
            }
            let row = Vector2::new((p.x - a.x()) / d, (p.y - a.y()) / d);
            let residual = r - d;
            jtj += row * row.transpose();
            jtr += row * residual;
        }
        let Some(step) = jtj.lu().solve(&jtr) else {
            break;
        };
        p.x += step.x;
        p.y += step.y;
        if step.norm() < STEP_TOLERANCE {
            break;
        }
    }
    if p.x.is_finite() && p.y.is_finite() {
        Ok(p)
    } else {
        Err(Error::NonFiniteState)
    }
}

fn centroid(used: &[(&Anchor, f64)]) -> Pose2D {
    let n = used.len() as f64;
    Pose2D::new(
        used.iter().map(|(a, _)| a.x()).sum::<f64>() / n,
        used.iter().map(|(a, _)| a.y()).sum::<f64>() / n,
    )
}

fn linear_estimate(used: &[(&Anchor, f64)], h: f64) -> Option<Pose2D> {
    let (a0, r0) = used[0];
    let dz0 = h - a0.z();
    let mut ata = Matrix2::zeros();
    let mut atb = Vector2::zeros();
    for (a, r) in &used[1..] {
        let dz = h - a.z();
        let row = Vector2::new(2.0 * (a.x() - a0.x()), 2.0 * (a.y() - a0.y()));
        let rhs = r0 * r0 - r * r + a.x() * a.x() - a0.x() * a0.x() + a.y() * a.y()
            - a0.y() * a0.y()
            + dz * dz
            - dz0 * dz0;
        ata += row * row.transpose();
        atb += row * rhs;
    }
    let sol = ata.lu().solve(&atb)?;
    Some(Pose2D::new(sol.x, sol.y))
}
