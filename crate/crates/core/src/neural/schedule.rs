//! Reduce-on-plateau learning-rate control.

/// Halves (by `factor`) the learning rate once the monitored loss stops
/// improving by a relative `min_delta` for `patience` consecutive epochs.
///
/// The rate is never clamped: the sequence is exactly `initial * factor^k`.
/// Once a reduction would fall below `min_lr` the schedule reports
/// exhaustion instead, and training is expected to stop.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauSchedule {
    lr: f64,
    factor: f64,
    patience: usize,
    min_delta: f64,
    min_lr: f64,
    best: f64,
    wait: usize,
    reductions: u32,
    exhausted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateauEvent {
    Improved,
    Waiting,
    Reduced,
    Exhausted,
}

impl PlateauSchedule {
    pub fn new(initial_lr: f64, factor: f64, patience: usize, min_delta: f64, min_lr: f64) -> Self {
        Self {
            lr: initial_lr,
            factor,
            patience,
            min_delta,
            min_lr,
            best: f64::INFINITY,
            wait: 0,
            reductions: 0,
            exhausted: false,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn reductions(&self) -> u32 {
        self.reductions
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn observe(&mut self, loss: f64) -> PlateauEvent {
        if self.exhausted {
            return PlateauEvent::Exhausted;
        }
        if loss < self.best * (1.0 - self.min_delta) {
            self.best = loss;
            self.wait = 0;
            return PlateauEvent::Improved;
        }
        self.wait += 1;
        if self.wait < self.patience {
            return PlateauEvent::Waiting;
        }
        self.wait = 0;
        let next = self.lr * self.factor;
        if next < self.min_lr {
            self.exhausted = true;
            return PlateauEvent::Exhausted;
        }
        self.lr = next;
        self.reductions += 1;
        PlateauEvent::Reduced
    }
}
