//! Effectiveness and realism metrics.

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::plan::AdversarialPlan;
use crate::scenario::{Scenario, Track};
use crate::sim::RolloutResult;

pub const ACCEL_RANGE: (f64, f64) = (-8.0, 8.0);
pub const ACCEL_BINS: usize = 21;
pub const LAPLACE_ALPHA: f64 = 1.0;
pub const JERK_THRESHOLD: f64 = 10.0;

/// Fraction of rollouts that ended with an ego collision.
pub fn attack_success_rate(results: &[RolloutResult]) -> Result<f64, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyInput("rollout results"));
    }
    Ok(results.iter().filter(|r| r.collided).count() as f64 / results.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub laplace_alpha: f64,
}

impl Histogram {
    /// Fixed-range acceleration histogram; out-of-range values land in the end bins.
    pub fn accel(values: impl IntoIterator<Item = f64>) -> Self {
        let (lo, hi) = ACCEL_RANGE;
        let width = (hi - lo) / ACCEL_BINS as f64;
        let bin_edges = (0..=ACCEL_BINS).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0u64; ACCEL_BINS];
        for v in values {
            let i = ((v - lo) / width).floor().clamp(0.0, (ACCEL_BINS - 1) as f64) as usize;
            counts[i] += 1;
        }
        Self {
            bin_edges,
            counts,
            laplace_alpha: LAPLACE_ALPHA,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Laplace-smoothed bin probabilities.
    pub fn smoothed(&self) -> Vec<f64> {
        let z = self.total() as f64 + self.laplace_alpha * self.counts.len() as f64;
        self.counts
            .iter()
            .map(|c| (*c as f64 + self.laplace_alpha) / z)
            .collect()
    }
}

/// KL(p ‖ q) in nats over aligned probability vectors. Bins with p = 0 add nothing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

/// Longitudinal accelerations by forward difference of speed.
pub fn accelerations(tracks: &[Track], dt: f64) -> Vec<f64> {
    tracks
        .iter()
        .flat_map(|t| t.samples.windows(2).map(move |w| (w[1].speed - w[0].speed) / dt))
        .collect()
}

/// KL divergence of the generated acceleration distribution from the
/// reference one, both Laplace smoothed.
pub fn accel_kl(generated: &[Track], reference: &[Track], dt: f64) -> Result<f64, MetricsError> {
    let g = accelerations(generated, dt);
    let r = accelerations(reference, dt);
    if g.is_empty() {
        return Err(MetricsError::EmptyInput("generated accelerations"));
    }
    if r.is_empty() {
        return Err(MetricsError::EmptyInput("reference accelerations"));
    }
    let p = Histogram::accel(g).smoothed();
    let q = Histogram::accel(r).smoothed();
    Ok(kl_divergence(&p, &q).max(0.0))
}

/// Fraction of jerk samples (second difference of speed) above `threshold`.
pub fn abnormal_jerk_rate(tracks: &[Track], dt: f64, threshold: f64) -> Result<f64, MetricsError> {
    if tracks.is_empty() {
        return Err(MetricsError::EmptyInput("tracks"));
    }
    let mut total = 0usize;
    let mut abnormal = 0usize;
    for t in tracks {
        if t.samples.len() < 3 {
            return Err(MetricsError::TooShort {
                needed: 3,
                got: t.samples.len(),
            });
        }
        for w in t.samples.windows(3) {
            let jerk = (w[2].speed - 2.0 * w[1].speed + w[0].speed) / (dt * dt);
            total += 1;
            if jerk.abs() > threshold {
                abnormal += 1;
            }
        }
    }
    Ok(abnormal as f64 / total as f64)
}

/// Planned attacker trajectories as tracks, in plan order.
pub fn plan_tracks<'a>(plans: impl IntoIterator<Item = &'a AdversarialPlan>) -> Vec<Track> {
    plans
        .into_iter()
        .flat_map(|p| p.selections.iter().map(|(id, t)| Track::new(*id, t.states.clone(), Default::default())))
        .collect()
}

/// Acceleration KL and abnormal jerk rate of the planned trajectories,
/// measured against every logged background track of `scenarios`.
pub fn plan_realism(plans: &[AdversarialPlan], scenarios: &[Scenario]) -> Result<(f64, f64), MetricsError> {
    let dt = scenarios.first().ok_or(MetricsError::EmptyInput("scenarios"))?.dt;
    let generated = plan_tracks(plans);
    let reference: Vec<Track> = scenarios.iter().flat_map(|s| s.background.iter().cloned()).collect();
    let kl = accel_kl(&generated, &reference, dt)?;
    let jerk = abnormal_jerk_rate(&generated, dt, JERK_THRESHOLD)?;
    Ok((kl, jerk))
}

/// Mean and half of the sample variance; the spread is zero for one value.
pub fn mean_half_variance(values: &[f64]) -> Result<(f64, f64), MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput("values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::scenario::{Dims, VehicleState};

    fn track(speeds: &[f64]) -> Track {
        Track::new(
            1,
            speeds
                .iter()
                .map(|v| VehicleState::new(Vec2::ZERO, 0.0, *v, 0.0))
                .collect(),
            Dims::default(),
        )
    }

    #[test]
    fn two_bin_closed_form() {
        let v = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]);
        let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((v - want).abs() < 1e-15);
        assert!((v - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn identical_sets_zero_kl() {
        let a = vec![track(&[1.0, 1.2, 1.1, 2.0])];
        assert_eq!(accel_kl(&a, &a, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn jerk_examples() {
        let ramp = track(&[0.0, 0.1, 0.2, 0.3, 0.4]);
        assert_eq!(abnormal_jerk_rate(&[ramp], 0.1, JERK_THRESHOLD).unwrap(), 0.0);
        let step = track(&[0.0, 0.0, 2.0, 2.0, 2.0]);
        // Jerks: 200, -200, 0.
        let r = abnormal_jerk_rate(&[step], 0.1, JERK_THRESHOLD).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            abnormal_jerk_rate(&[track(&[1.0, 2.0])], 0.1, 10.0),
            Err(MetricsError::TooShort { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn half_variance() {
        let (m, h) = mean_half_variance(&[0.2, 0.3, 0.4]).unwrap();
        assert!((m - 0.3).abs() < 1e-15);
        assert!((h - 0.005).abs() < 1e-15);
        assert_eq!(mean_half_variance(&[0.7]).unwrap(), (0.7, 0.0));
    }

    #[test]
    fn histogram_shape() {
        let h = Histogram::accel([-100.0, 0.0, 100.0]);
        assert_eq!(h.bin_edges.len(), 22);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[10], 1);
        assert_eq!(h.counts[20], 1);
        assert!((h.smoothed().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
