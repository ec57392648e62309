//! Detection of the time after which the potential is in its monotone regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative change of `φ̄'` over the last fifth of a trajectory accepted as
/// settled.
pub const SETTLED_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcSample {
    pub t: f64,
    pub phibar_prime: f64,
    /// `max_x φ`.
    pub max_field: f64,
    /// `max_x ∂_t φ`.
    pub max_field_rate: f64,
}

/// First sample time with `φ̄' ≤ φ̄'(∞)/2`, `∂_tφ ≤ φ̄'(∞)/4` and
/// `e^{2φ} < 1/2` everywhere, where `φ̄'(∞)` is the last recorded `φ̄'`.
pub fn detect_tc(trajectory: &[TcSample]) -> Result<Option<f64>> {
    if trajectory.len() < 2 {
        return Err(Error::TooShort("need at least two samples".into()));
    }
    let last = trajectory[trajectory.len() - 1];
    let t_ref = 0.8 * last.t;
    let earlier = trajectory
        .iter()
        .min_by(|a, b| (a.t - t_ref).abs().total_cmp(&(b.t - t_ref).abs()))
        .expect("nonempty");
    let inf = last.phibar_prime;
    let change = (inf - earlier.phibar_prime).abs();
    if change > SETTLED_TOLERANCE * inf.abs() {
        return Err(Error::NotSettled {
            relative_change: if inf == 0.0 { f64::INFINITY } else { change / inf.abs() },
        });
    }
    let threshold = -(2f64.ln()) / 2.0;
    Ok(trajectory
        .iter()
        .find(|s| {
            s.phibar_prime <= inf / 2.0 && s.max_field_rate <= inf / 4.0 && s.max_field < threshold
        })
        .map(|s| s.t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(slope: f64, dt: f64, n: usize) -> Vec<TcSample> {
        (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                TcSample { t, phibar_prime: slope, max_field: slope * t, max_field_rate: slope }
            })
            .collect()
    }

    #[test]
    fn linear_potential_gives_half_log_two() {
        let dt = 1e-3;
        let tc = detect_tc(&synthetic(-1.0, dt, 2000)).unwrap().unwrap();
        assert!((tc - 2f64.ln() / 2.0).abs() <= dt);
    }

    #[test]
    fn flat_potential_never_qualifies() {
        assert_eq!(detect_tc(&synthetic(0.0, 1e-2, 100)).unwrap(), None);
    }

    #[test]
    fn unsettled_tail_is_reported() {
        let traj: Vec<TcSample> = (0..=100)
            .map(|k| {
                let t = k as f64 * 0.1;
                TcSample { t, phibar_prime: -t, max_field: -t * t / 2.0, max_field_rate: -t }
            })
            .collect();
        assert!(matches!(detect_tc(&traj), Err(Error::NotSettled { .. })));
    }
}
