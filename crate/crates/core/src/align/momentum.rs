/// Running global/local mixing weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumState {
    pub alpha: f64,
    pub beta: f64,
    pub alpha0: f64,
}

impl MomentumState {
    pub fn new(alpha0: f64, beta: f64) -> MomentumState {
        MomentumState {
            alpha: alpha0,
            beta,
            alpha0,
        }
    }

    /// α ← β·α + (1−β)·L_g/(L_g+L_l), held when both losses are zero.
    ///
    /// Evaluated as α + (1−β)(r − α); the result stays between α and r
    /// after rounding.
    pub fn update(&mut self, lg: f64, ll: f64) -> f64 {
        let sum = lg + ll;
        if sum > 0.0 {
            let r = lg / sum;
            self.alpha += (1.0 - self.beta) * (r - self.alpha);
        }
        self.alpha
    }
}

pub fn momentum_update(state: &mut MomentumState, lg: f64, ll: f64) -> f64 {
    state.update(lg, ll)
}

pub fn combined_loss(lg: f64, ll: f64, alpha: f64) -> f64 {
    alpha * lg + (1.0 - alpha) * ll
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let mut s = MomentumState::new(0.5, 0.9);
        assert_eq!(s.update(2.0, 2.0), 0.5);
        assert!((s.update(3.0, 1.0) - 0.525).abs() < 1e-15);
        let before = s.alpha;
        assert_eq!(s.update(0.0, 0.0), before);
    }

    #[test]
    fn combined() {
        assert_eq!(combined_loss(2.0, 1.0, 1.0), 2.0);
        assert_eq!(combined_loss(2.0, 1.0, 0.0), 1.0);
        assert_eq!(combined_loss(2.0, 1.0, 0.5), 1.5);
    }
}
