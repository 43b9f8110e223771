//! Per-subproblem wall-clock accounting.

use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Section {
    U,
    V,
    P,
    Z,
}

/// Cumulative time spent in each subproblem of one solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SubproblemTimers {
    pub u: Duration,
    pub v: Duration,
    pub p: Duration,
    pub z: Duration,
}

impl SubproblemTimers {
    pub fn get(&self, s: Section) -> Duration {
        match s {
            Section::U => self.u,
            Section::V => self.v,
            Section::P => self.p,
            Section::Z => self.z,
        }
    }

    fn slot(&mut self, s: Section) -> &mut Duration {
        match s {
            Section::U => &mut self.u,
            Section::V => &mut self.v,
            Section::P => &mut self.p,
            Section::Z => &mut self.z,
        }
    }

    /// Starts timing `s`; the elapsed time is added when the guard drops.
    pub fn scope(&mut self, s: Section) -> TimerGuard<'_> {
        TimerGuard {
            timers: self,
            section: s,
            start: Instant::now(),
        }
    }

    /// Runs `f` and charges its wall time to `s`.
    pub fn time<R>(&mut self, s: Section, f: impl FnOnce() -> R) -> R {
        let _g = self.scope(s);
        f()
    }

    pub fn total(&self) -> Duration {
        self.u + self.v + self.p + self.z
    }
}

impl std::ops::AddAssign for SubproblemTimers {
    fn add_assign(&mut self, o: Self) {
        self.u += o.u;
        self.v += o.v;
        self.p += o.p;
        self.z += o.z;
    }
}

pub struct TimerGuard<'a> {
    timers: &'a mut SubproblemTimers,
    section: Section,
    start: Instant,
}

impl Drop for TimerGuard<'_> {
    fn drop(&mut self) {
        *self.timers.slot(self.section) += self.start.elapsed();
    }
}
