/// Plateau learning-rate decay and early stopping, both driven by the
/// validation loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    lr: f64,
    decay_factor: f64,
    plateau_patience: usize,
    early_stop_patience: usize,
    threshold: f64,
    best: f64,
    since_best: usize,
    since_decay: usize,
}

/// What happened after observing one validation loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Observation {
    pub improved: bool,
    pub decayed: bool,
    pub stop: bool,
}

impl Schedule {
    pub fn new(
        lr: f64,
        decay_factor: f64,
        plateau_patience: usize,
        early_stop_patience: usize,
        threshold: f64,
    ) -> Self {
        Self {
            lr,
            decay_factor,
            plateau_patience,
            early_stop_patience,
            threshold,
            best: f64::INFINITY,
            since_best: 0,
            since_decay: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// An improvement is a drop of more than `threshold` below the best loss
    /// so far. The decay counter restarts after each decay; the early-stop
    /// counter only restarts on improvement.
    pub fn observe(&mut self, val_loss: f64) -> Observation {
        let mut obs = Observation::default();
        if val_loss < self.best - self.threshold {
            self.best = val_loss;
            self.since_best = 0;
            self.since_decay = 0;
            obs.improved = true;
            return obs;
        }
        self.since_best += 1;
        self.since_decay += 1;
        if self.since_decay >= self.plateau_patience {
            self.lr /= self.decay_factor;
            self.since_decay = 0;
            obs.decayed = true;
        }
        obs.stop = self.since_best >= self.early_stop_patience;
        obs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_loss_decays_after_patience() {
        let mut s = Schedule::new(0.001, 10.0, 10, 30, 1e-5);
        assert!(s.observe(1.0).improved);
        for k in 1..10 {
            let o = s.observe(1.0 - 1e-6 * k as f64);
            assert!(!o.decayed && !o.improved);
            assert_eq!(s.lr(), 0.001);
        }
        assert!(s.observe(1.0).decayed);
        assert!((s.lr() - 0.0001).abs() < 1e-18);
    }

    #[test]
    fn stops_after_early_stop_patience() {
        let mut s = Schedule::new(1.0, 10.0, 10, 30, 1e-5);
        s.observe(0.5);
        let stops: usize = (0..30).filter(|_| s.observe(0.6).stop).count();
        assert_eq!(stops, 1);
        assert!((s.lr() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn improvement_resets_counters() {
        let mut s = Schedule::new(1.0, 2.0, 3, 5, 0.0);
        s.observe(1.0);
        s.observe(1.0);
        s.observe(1.0);
        assert!(s.observe(0.9).improved);
        assert!(!s.observe(1.0).decayed);
        assert_eq!(s.best(), 0.9);
    }
}
