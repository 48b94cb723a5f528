//! Hand-built reference sessions shared by tests, benches and the CLI.

use crate::trace::{parse_trace, AgeGroup, EventKind, Trace, TraceEvent};

/// Three pages across two tabs: `a.com` typed in tab 1, `b.com` opened from
/// it in a new tab, a switch back to tab 1 after 17 s, then `c.com` followed
/// from `a.com` in tab 1. Session starts 2021-01-15 16:21:29 UTC.
pub const THREE_SITE_TRACE: &str = include_str!("../fixtures/three_site.trace");

pub fn three_site_trace() -> Trace {
    parse_trace(THREE_SITE_TRACE).expect("fixture parses")
}

/// Startup at 0 and shutdown at 10 ms, nothing else.
pub fn minimal_trace() -> Trace {
    Trace {
        participant_id: "p1".into(),
        age_group: AgeGroup::Unknown,
        comment: None,
        events: vec![
            TraceEvent::new(0, EventKind::BrowserStartup { system_clock_ms: 0 }),
            TraceEvent::new(10, EventKind::BrowserShutdown {}),
        ],
    }
}

pub const MATCH_PATTERN_TABLE: &str = include_str!("../fixtures/match_patterns.tsv");

/// Expected outcome of one conformance case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternExpectation {
    Match,
    NoMatch,
    Invalid,
}

/// `(pattern, url, expectation)` rows of the match-pattern conformance table.
pub fn match_pattern_cases() -> Vec<(&'static str, &'static str, PatternExpectation)> {
    MATCH_PATTERN_TABLE
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut cols = l.split('\t');
            let (Some(p), Some(u), Some(e)) = (cols.next(), cols.next(), cols.next()) else {
                panic!("malformed conformance row {l:?}");
            };
            let e = match e {
                "match" => PatternExpectation::Match,
                "nomatch" => PatternExpectation::NoMatch,
                "invalid" => PatternExpectation::Invalid,
                other => panic!("unknown expectation {other:?}"),
            };
            (p, u, e)
        })
        .collect()
}
