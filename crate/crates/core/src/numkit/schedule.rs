use core::f64::consts::PI;

/// Cosine annealing from `base_lr` at step 0 to `min_lr` at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineSchedule {
    pub base_lr: f64,
    pub total_steps: u64,
    pub min_lr: f64,
}

impl CosineSchedule {
    pub fn new(base_lr: f64, total_steps: u64, min_lr: f64) -> Self {
        Self {
            base_lr,
            total_steps,
            min_lr,
        }
    }

    /// Steps past the end clamp to `min_lr`. A zero-length schedule stays at
    /// `base_lr` for step 0.
    pub fn lr(&self, step: u64) -> f64 {
        if step > self.total_steps || (step == self.total_steps && self.total_steps > 0) {
            return self.min_lr;
        }
        if self.total_steps == 0 {
            return self.base_lr;
        }
        let frac = step as f64 / self.total_steps as f64;
        self.min_lr + 0.5 * (self.base_lr - self.min_lr) * (1.0 + libm::cos(PI * frac))
    }
}
