//! Exploration and learning-rate decay.

/// `eps0 * (1 - decay)^t`.
pub fn epsilon_at(t: u64, initial: f64, decay: f64) -> f64 {
    initial * (1.0 - decay).powf(t as f64)
}

/// `lr0 * (1 - decay)^t`.
pub fn lr_at(t: u64, initial: f64, decay: f64) -> f64 {
    initial * (1.0 - decay).powf(t as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        assert_eq!(epsilon_at(0, 1.0, 1e-4), 1.0);
        assert!((epsilon_at(1000, 1.0, 1e-4) - 0.904_832).abs() < 1e-6);
        assert_eq!(epsilon_at(12_345, 0.7, 0.0), 0.7);
        assert_eq!(lr_at(0, 0.03, 1e-3), 0.03);
        assert!((lr_at(693, 0.03, 1e-3) / 0.015 - 1.0).abs() < 2e-3);
        assert_eq!(lr_at(99, 0.03, 0.0), 0.03);
    }
}
