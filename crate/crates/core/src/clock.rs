//! Time sources for fit caps and wall-time logging.

/// Monotonic seconds since an arbitrary origin.
pub trait Clock: Send + Sync {
    fn now(&self) -> f64;
}

/// A clock that never advances: caps bind only when they are zero, and all
/// logged wall times are zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Cooperative fit deadline, polled by training loops between steps.
#[derive(Clone, Copy)]
pub struct Deadline<'a> {
    clock: &'a dyn Clock,
    end: f64,
    zero: bool,
}

impl<'a> Deadline<'a> {
    pub fn after(clock: &'a dyn Clock, seconds: f64) -> Self {
        Self {
            clock,
            end: clock.now() + seconds,
            zero: !(seconds > 0.0),
        }
    }

    pub fn never() -> Deadline<'static> {
        Deadline {
            clock: &FrozenClock,
            end: f64::INFINITY,
            zero: false,
        }
    }

    pub fn expired(&self) -> bool {
        self.zero || self.clock.now() >= self.end
    }

    /// Seconds left, never negative.
    pub fn remaining(&self) -> f64 {
        if self.zero {
            0.0
        } else {
            (self.end - self.clock.now()).max(0.0)
        }
    }

    /// A deadline of `remaining() / parts` starting now.
    pub fn share(&self, parts: usize) -> Deadline<'a> {
        Deadline::after(self.clock, self.remaining() / parts.max(1) as f64)
    }
}

impl core::fmt::Debug for Deadline<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Deadline")
            .field("end", &self.end)
            .field("zero", &self.zero)
            .finish()
    }
}
