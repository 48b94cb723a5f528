//! Study clock and idle-aware task scheduling over a recorded session.

use thiserror::Error;

use crate::trace::{EventKind, Millis, Trace};

pub const DEFAULT_IDLE_THRESHOLD_MS: Millis = 15_000;

/// Clock synced to the system clock once at browser startup. Later
/// `SystemClockChange` events are ignored; time advances only with the
/// session's monotonic offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudyClock {
    base_system_ms: i64,
    base_offset: Millis,
}

impl StudyClock {
    /// Syncs at the trace's `BrowserStartup`. A trace without one syncs to 0.
    pub fn from_trace(trace: &Trace) -> Self {
        trace
            .events
            .iter()
            .find_map(|e| match e.kind {
                EventKind::BrowserStartup { system_clock_ms } => Some(StudyClock {
                    base_system_ms: system_clock_ms,
                    base_offset: e.t,
                }),
                _ => None,
            })
            .unwrap_or(StudyClock {
                base_system_ms: 0,
                base_offset: 0,
            })
    }

    pub fn base_system_ms(&self) -> i64 {
        self.base_system_ms
    }

    pub fn at(&self, t: Millis) -> i64 {
        self.base_system_ms + t.saturating_sub(self.base_offset) as i64
    }
}

/// Study timestamp of every event, by event index.
pub fn monotonic_timestamps(trace: &Trace) -> Vec<i64> {
    let clock = StudyClock::from_trace(trace);
    trace.events.iter().map(|e| clock.at(e.t)).collect()
}

/// What a naive reader of the system clock would have recorded: the startup
/// sync plus every clock shift seen so far. Used to show the corruption the
/// study clock avoids.
pub fn system_clock_timestamps(trace: &Trace) -> Vec<i64> {
    let clock = StudyClock::from_trace(trace);
    let mut shift = 0i64;
    trace
        .events
        .iter()
        .map(|e| {
            if let EventKind::SystemClockChange { delta_ms } = e.kind {
                shift += delta_ms;
            }
            clock.at(e.t) + shift
        })
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("scheduler parameter {0} must be positive")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleConfig {
    pub interval_ms: Millis,
    pub idle_threshold_ms: Millis,
    pub max_deferral_ms: Millis,
}

impl ScheduleConfig {
    /// Defaults: 15 s idle threshold and half an interval of deferral.
    pub fn with_interval(interval_ms: Millis) -> Self {
        Self {
            interval_ms,
            idle_threshold_ms: DEFAULT_IDLE_THRESHOLD_MS,
            max_deferral_ms: interval_ms / 2,
        }
    }

    fn check(&self) -> Result<(), ScheduleError> {
        if self.interval_ms == 0 {
            return Err(ScheduleError::BadConfig("intervalMs"));
        }
        if self.idle_threshold_ms == 0 {
            return Err(ScheduleError::BadConfig("idleThresholdMs"));
        }
        if self.max_deferral_ms == 0 {
            return Err(ScheduleError::BadConfig("maxDeferralMs"));
        }
        Ok(())
    }
}

/// Firing times (session offsets) of a periodic task that prefers idle
/// moments.
///
/// Each firing is due one interval after the previous firing (the first one
/// interval after session start). It runs at the first moment at or after
/// its due time with no `InputActivity` in the preceding idle threshold
/// window `(x - threshold, x]`, or at `due + max_deferral` if no such moment
/// comes first. Firings past the end of the session are dropped.
pub fn schedule_idle_tasks(trace: &Trace, config: ScheduleConfig) -> Result<Vec<Millis>, ScheduleError> {
    config.check()?;
    let (Some(first), Some(last)) = (trace.events.first(), trace.events.last()) else {
        return Ok(Vec::new());
    };
    let inputs: Vec<Millis> = trace
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::InputActivity {}))
        .map(|e| e.t)
        .collect();

    let mut firings = Vec::new();
    let mut previous = first.t;
    loop {
        let due = previous + config.interval_ms;
        let deadline = due + config.max_deferral_ms;
        let mut at = due;
        // Jump past the threshold window of the latest input at or before `at`
        // until no input falls inside the window.
        loop {
            let latest = match inputs.partition_point(|&s| s <= at) {
                0 => None,
                n => Some(inputs[n - 1]),
            };
            match latest {
                Some(s) if s + config.idle_threshold_ms > at => at = s + config.idle_threshold_ms,
                _ => break,
            }
            if at >= deadline {
                break;
            }
        }
        let fire = at.min(deadline);
        if fire > last.t {
            break;
        }
        firings.push(fire);
        previous = fire;
    }
    Ok(firings)
}
