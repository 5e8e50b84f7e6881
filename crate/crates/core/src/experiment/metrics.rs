//! Deviation metrics. dB conversions always floor the linear value so a
//! perfect estimate reports the floor instead of negative infinity.

use nalgebra::DVector;

use super::ExperimentError;

/// Linear floor applied before taking logarithms (-300 dB).
pub const DB_FLOOR_LINEAR: f64 = 1e-30;

/// `10 log10` with the linear floor.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.max(DB_FLOOR_LINEAR).log10()
}

/// Network mean square deviation of the estimates from `w_o`:
/// node-averaged squared error, returned as `(linear, dB)`.
pub fn network_msd(weights: &[DVector<f64>], w_o: &DVector<f64>) -> (f64, f64) {
    let linear = weights
        .iter()
        .map(|w| (w_o - w).norm_squared())
        .sum::<f64>()
        / weights.len() as f64;
    (linear, to_db(linear))
}

/// Mean of the last `window` linear values, in dB.
pub fn steady_state_msd(linear_trajectory: &[f64], window: usize) -> Result<f64, ExperimentError> {
    let len = linear_trajectory.len();
    if window == 0 || window > len {
        return Err(ExperimentError::WindowTooLong { window, len });
    }
    let mean = linear_trajectory[len - window..].iter().sum::<f64>() / window as f64;
    Ok(to_db(mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_estimates_report_the_floor() {
        let w = DVector::from_vec(vec![1.0, -2.0]);
        let (linear, db) = network_msd(&[w.clone(), w.clone()], &w);
        assert_eq!(linear, 0.0);
        assert_eq!(db, 10.0 * DB_FLOOR_LINEAR.log10());
    }

    #[test]
    fn unit_deviation_is_zero_db() {
        let w_o = DVector::from_vec(vec![1.0, 0.0]);
        let w = DVector::from_vec(vec![0.0, 0.0]);
        let (linear, db) = network_msd(&[w], &w_o);
        assert_eq!(linear, 1.0);
        assert_eq!(db, 0.0);
    }

    #[test]
    fn two_node_average_matches_hand_arithmetic() {
        let w_o = DVector::from_vec(vec![0.0]);
        let a = DVector::from_vec(vec![0.1]); // squared deviation 0.01
        let b = DVector::from_vec(vec![0.03_f64.sqrt()]); // squared deviation 0.03
        let (linear, db) = network_msd(&[a, b], &w_o);
        assert!((linear - 0.02).abs() < 1e-15);
        assert!((db - -16.989700043360187).abs() < 1e-9);
    }

    #[test]
    fn constant_trajectory_steady_state_is_its_value() {
        let traj = vec![0.5; 300];
        let db = steady_state_msd(&traj, 100).unwrap();
        assert!((db - to_db(0.5)).abs() < 1e-12);
    }

    #[test]
    fn full_window_is_the_overall_mean() {
        let traj = vec![0.1, 0.2, 0.3];
        let db = steady_state_msd(&traj, 3).unwrap();
        assert!((db - to_db(0.2)).abs() < 1e-12);
    }

    #[test]
    fn mixed_tail_matches_weighted_mean() {
        let mut traj = vec![1.0; 50];
        traj.extend(vec![0.01; 90]);
        traj.extend(vec![0.03; 10]);
        let db = steady_state_msd(&traj, 100).unwrap();
        assert!((db - -19.208187539523753).abs() < 1e-9);
    }

    #[test]
    fn oversized_window_errors() {
        assert!(matches!(
            steady_state_msd(&[0.1, 0.2], 3),
            Err(ExperimentError::WindowTooLong { window: 3, len: 2 })
        ));
    }
}
