/// What the trainer should do after an epoch's validation loss is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScheduleAction {
    /// Lowest validation loss so far; snapshot the parameters.
    pub checkpoint: bool,
    /// Multiply the learning rate by the plateau factor.
    pub reduce_lr: bool,
    pub stop: bool,
}

/// Plateau learning-rate schedule plus early stopping, both keyed on
/// validation loss.
///
/// An epoch counts as progress only if it beats the loss of the last
/// progress epoch by more than `min_delta`. The checkpoint tracks the
/// strict minimum, so the restored model is never worse than any earlier
/// epoch even when the gain is below `min_delta`.
#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    plateau_patience: usize,
    stop_patience: usize,
    min_delta: f64,
    reference: f64,
    best: f64,
    best_epoch: usize,
    plateau_wait: usize,
    stop_wait: usize,
}

impl PlateauSchedule {
    pub fn new(plateau_patience: usize, stop_patience: usize, min_delta: f64) -> Self {
        PlateauSchedule {
            plateau_patience,
            stop_patience,
            min_delta,
            reference: f64::INFINITY,
            best: f64::INFINITY,
            best_epoch: 0,
            plateau_wait: 0,
            stop_wait: 0,
        }
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }

    /// 1-indexed epoch of the lowest loss seen; 0 before any epoch.
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> ScheduleAction {
        let mut action = ScheduleAction::default();
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            action.checkpoint = true;
        }
        if val_loss < self.reference - self.min_delta {
            self.reference = val_loss;
            self.plateau_wait = 0;
            self.stop_wait = 0;
            return action;
        }
        self.plateau_wait += 1;
        self.stop_wait += 1;
        if self.plateau_wait >= self.plateau_patience {
            action.reduce_lr = true;
            self.plateau_wait = 0;
        }
        if self.stop_wait >= self.stop_patience {
            action.stop = true;
        }
        action
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(losses: &[f64], plateau: usize, stop: usize) -> Vec<ScheduleAction> {
        let mut s = PlateauSchedule::new(plateau, stop, 1e-4);
        let mut out = Vec::new();
        for (i, &l) in losses.iter().enumerate() {
            let a = s.observe(i + 1, l);
            out.push(a);
            if a.stop {
                break;
            }
        }
        out
    }

    #[test]
    fn increasing_loss_stops_after_patience() {
        let losses: Vec<f64> = (0..50).map(|i| 1.0 + i as f64).collect();
        let actions = run(&losses, 3, 10);
        assert_eq!(actions.len(), 11);
        assert!(actions[0].checkpoint);
        assert!(actions[1..].iter().all(|a| !a.checkpoint));
        let reductions: Vec<usize> = actions
            .iter()
            .enumerate()
            .filter(|(_, a)| a.reduce_lr)
            .map(|(i, _)| i + 1)
            .collect();
        assert_eq!(reductions, [4, 7, 10]);
    }

    #[test]
    fn sub_delta_gain_checkpoints_but_does_not_reset_patience() {
        let mut s = PlateauSchedule::new(2, 3, 0.1);
        assert!(s.observe(1, 1.0).checkpoint);
        let a = s.observe(2, 0.95);
        assert!(a.checkpoint && !a.reduce_lr);
        let a = s.observe(3, 0.94);
        assert!(a.checkpoint && a.reduce_lr);
        let a = s.observe(4, 0.93);
        assert!(a.stop);
        assert_eq!(s.best_epoch(), 4);
    }

    #[test]
    fn improvement_resets_both_counters() {
        let actions = run(&[1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5], 3, 4);
        assert!(actions[3].reduce_lr && !actions[3].stop);
        assert!(actions[4].checkpoint && !actions[4].reduce_lr);
        assert!(actions[7].reduce_lr);
        assert!(!actions[7].stop);
    }
}
