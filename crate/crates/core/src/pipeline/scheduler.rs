/// Outcome of feeding one loss value to the scheduler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScheduleAction {
    Continue,
    Reduced,
    Stop,
}

/// Cuts the learning rate when the loss stops reaching new minima.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    patience: usize,
    stop_lr: f64,
    best: f64,
    since_best: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize, stop_lr: f64) -> Self {
        Self { lr, factor, patience, stop_lr, best: f64::INFINITY, since_best: 0 }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, loss: f64) -> ScheduleAction {
        if loss < self.best {
            self.best = loss;
            self.since_best = 0;
            return ScheduleAction::Continue;
        }
        self.since_best += 1;
        if self.since_best < self.patience {
            return ScheduleAction::Continue;
        }
        self.since_best = 0;
        self.lr *= self.factor;
        // Relative slack so that repeated decimal cuts landing on the stop value do not stop early.
        if self.lr < self.stop_lr * (1.0 - 1e-9) {
            ScheduleAction::Stop
        } else {
            ScheduleAction::Reduced
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_loss_keeps_lr() {
        let mut s = PlateauScheduler::new(1e-5, 0.1, 10, 1e-7);
        for i in 0..100 {
            assert_eq!(s.observe(1.0 - i as f64 * 1e-3), ScheduleAction::Continue);
        }
        assert_eq!(s.lr(), 1e-5);
    }

    #[test]
    fn flat_loss_reduces_then_stops() {
        let mut s = PlateauScheduler::new(1e-5, 0.1, 10, 1e-7);
        s.observe(1.0);
        let mut actions = Vec::new();
        for _ in 0..30 {
            actions.push(s.observe(1.0));
        }
        assert_eq!(actions[9], ScheduleAction::Reduced);
        assert_eq!(actions[19], ScheduleAction::Reduced);
        assert!(actions[..29].iter().all(|a| *a != ScheduleAction::Stop));
        assert_eq!(actions[29], ScheduleAction::Stop);
        assert!(s.lr() < 1e-7);
    }

    #[test]
    fn ten_flat_steps_cut_by_ten() {
        let mut s = PlateauScheduler::new(1e-5, 0.1, 10, 1e-7);
        s.observe(0.5);
        for _ in 0..10 {
            s.observe(0.5);
        }
        assert!((s.lr() - 1e-6).abs() < 1e-21);
    }
}
