use serde::{Deserialize, Serialize};

pub const MAX_SCALE: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    pub high_water: f64,
    pub low_water: f64,
    pub tick_s: f64,
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.low_water < self.high_water) {
            return Err("low_water must be below high_water".into());
        }
        if !(self.tick_s > 0.0) {
            return Err("tick_s must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeedbackMetrics {
    pub fog_queue_len: f64,
    pub edge_cpu_proxy: f64,
}

/// The suspicion threshold is ATC-owned; feedback never touches it, and
/// `threshold_unchanged` is always true.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tuning {
    pub report_period_scale: u32,
    pub threshold_unchanged: bool,
}

/// Doubles the report period scale while the fog queue is above
/// `high_water` (capped at 8), resets it below `low_water`, and holds it
/// in between.
#[derive(Debug, Clone)]
pub struct FeedbackController {
    config: FeedbackConfig,
    scale: u32,
}

impl FeedbackController {
    pub fn new(config: FeedbackConfig) -> Self {
        FeedbackController { config, scale: 1 }
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn tick(&mut self, m: FeedbackMetrics) -> Tuning {
        if m.fog_queue_len > self.config.high_water {
            self.scale = (self.scale * 2).min(MAX_SCALE);
        } else if m.fog_queue_len < self.config.low_water {
            self.scale = 1;
        }
        Tuning { report_period_scale: self.scale, threshold_unchanged: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> FeedbackController {
        FeedbackController::new(FeedbackConfig { high_water: 100.0, low_water: 20.0, tick_s: 5.0 })
    }

    fn q(n: f64) -> FeedbackMetrics {
        FeedbackMetrics { fog_queue_len: n, edge_cpu_proxy: 0.0 }
    }

    #[test]
    fn doubles_then_caps_then_resets() {
        let mut c = ctl();
        assert_eq!(c.tick(q(5.0)).report_period_scale, 1);
        let seq: Vec<u32> = (0..5).map(|_| c.tick(q(150.0)).report_period_scale).collect();
        assert_eq!(seq, vec![2, 4, 8, 8, 8]);
        assert_eq!(c.tick(q(10.0)).report_period_scale, 1);
    }

    #[test]
    fn band_midpoint_oscillation_holds() {
        let mut c = ctl();
        c.tick(q(150.0));
        for n in [55.0, 65.0, 58.0, 62.0, 60.0] {
            let t = c.tick(q(n));
            assert_eq!(t.report_period_scale, 2);
            assert!(t.threshold_unchanged);
        }
    }
}
