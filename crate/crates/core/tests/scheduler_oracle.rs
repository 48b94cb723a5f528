use proptest::prelude::*;
use webmeter::chronology::{schedule_idle_tasks, ScheduleConfig, ScheduleError};
use webmeter::synth::random_trace;
use webmeter::trace::{EventKind, Millis, Trace};

/// Scans every millisecond from each due time.
fn brute_force(trace: &Trace, c: ScheduleConfig) -> Vec<Millis> {
    let inputs: Vec<Millis> = trace
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::InputActivity {}))
        .map(|e| e.t)
        .collect();
    let quiet = |x: Millis| !inputs.iter().any(|&s| s <= x && x < s + c.idle_threshold_ms);
    let end = trace.end();
    let mut out = Vec::new();
    let mut previous = 0;
    loop {
        let due = previous + c.interval_ms;
        let deadline = due + c.max_deferral_ms;
        let fire = (due..deadline).find(|&x| quiet(x)).unwrap_or(deadline);
        if fire > end {
            return out;
        }
        out.push(fire);
        previous = fire;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scheduler_matches_brute_force(
        seed in any::<u64>(),
        interval in 1u64..120_000,
        threshold in 1u64..30_000,
        deferral in 1u64..60_000,
    ) {
        let trace = random_trace(seed, 60);
        let c = ScheduleConfig { interval_ms: interval, idle_threshold_ms: threshold, max_deferral_ms: deferral };
        let firings = schedule_idle_tasks(&trace, c).unwrap();
        prop_assert_eq!(firings, brute_force(&trace, c));
    }
}

#[test]
fn zero_parameters_are_rejected() {
    let trace = random_trace(1, 10);
    let good = ScheduleConfig::with_interval(60_000);
    for bad in [
        ScheduleConfig { interval_ms: 0, ..good },
        ScheduleConfig { idle_threshold_ms: 0, ..good },
        ScheduleConfig { max_deferral_ms: 0, ..good },
    ] {
        assert!(matches!(schedule_idle_tasks(&trace, bad), Err(ScheduleError::BadConfig(_))));
    }
}
