//! Patience-based controllers for the entropy coefficient and `λ`.

use super::LambdaSchedule;

/// Counts consecutive non-improving observations of a monitored value.
#[derive(Clone, Debug)]
pub struct PatienceCounter {
    pub patience: usize,
    best: f64,
    stale: usize,
}

impl PatienceCounter {
    pub fn new(patience: usize) -> Self {
        PatienceCounter {
            patience,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    /// Records `value`; returns `true` once `patience` observations in a row
    /// failed to improve on the best seen, then starts counting afresh.
    pub fn observe(&mut self, value: f64) -> bool {
        if value < self.best {
            self.best = value;
            self.stale = 0;
            return false;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            self.stale = 0;
            return true;
        }
        false
    }
}

#[derive(Clone, Debug)]
pub struct LambdaController {
    schedule: LambdaSchedule,
    current: f64,
    counter: Option<PatienceCounter>,
}

impl LambdaController {
    pub fn new(schedule: &LambdaSchedule) -> Self {
        let counter = match *schedule {
            LambdaSchedule::Fixed(_) => None,
            LambdaSchedule::Decreasing { patience, .. } => Some(PatienceCounter::new(patience)),
        };
        LambdaController {
            schedule: schedule.clone(),
            current: schedule.initial(),
            counter,
        }
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    /// `λ` will not change any more.
    pub fn settled(&self) -> bool {
        match self.schedule {
            LambdaSchedule::Fixed(_) => true,
            LambdaSchedule::Decreasing { floor, .. } => self.current <= floor,
        }
    }

    /// Feeds the monitored objective; returns the new `λ` when it changed.
    pub fn observe(&mut self, objective: f64) -> Option<f64> {
        let LambdaSchedule::Decreasing { decrement, floor, .. } = self.schedule else {
            return None;
        };
        let counter = self.counter.as_mut()?;
        if counter.observe(objective) && self.current > floor {
            self.current = (self.current - decrement).max(floor);
            return Some(self.current);
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_fires_after_k_stale_steps() {
        let mut p = PatienceCounter::new(3);
        assert!(!p.observe(5.0));
        assert!(!p.observe(4.0));
        assert!(!p.observe(4.0));
        assert!(!p.observe(4.5));
        assert!(p.observe(4.0));
        assert!(!p.observe(4.0));
        assert!(!p.observe(3.0));
    }

    #[test]
    fn lambda_walks_down_to_floor() {
        let sched = LambdaSchedule::Decreasing {
            start: 30.0,
            decrement: 10.0,
            floor: 10.0,
            patience: 2,
        };
        let mut c = LambdaController::new(&sched);
        assert!(!c.settled());
        let mut seen = vec![c.current()];
        for _ in 0..20 {
            if let Some(l) = c.observe(1.0) {
                seen.push(l);
            }
        }
        assert_eq!(seen, vec![30.0, 20.0, 10.0]);
        assert!(c.settled());
        let mut f = LambdaController::new(&LambdaSchedule::Fixed(0.5));
        assert!((0..10).all(|_| f.observe(1.0).is_none()));
        assert_eq!(f.current(), 0.5);
        assert!(f.settled());
    }
}
