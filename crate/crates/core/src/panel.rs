//! Whole-panel analysis. Sessions are independent, so they are processed
//! data-parallel with rayon when the `parallel` feature is on; results come
//! back in input order regardless of worker count.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::attention::{compare_attention, error_stats, measure_all, AttentionComparison, ErrorReport, VisitAttention};
use crate::chronology::DEFAULT_IDLE_THRESHOLD_MS;
use crate::exposure::{
    detect_exposures, study_summary, track_shares, DomainLists, ExposureConfig, ParticipantActivity, StudySummary,
};
use crate::navigation::{compare_referrers, track_visits, ComparisonCounts, PageVisit, ReferrerMethod};
use crate::patterns::MatchPattern;
use crate::trace::{AgeGroup, Trace};

/// Applies `f` to every item, on at most `workers` threads. `Some(1)` or a
/// build without the `parallel` feature runs on the calling thread.
pub fn map<T, R, F>(items: &[T], workers: Option<usize>, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match workers {
            Some(1) => items.iter().map(f).collect(),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool")
                .install(|| items.par_iter().map(&f).collect()),
            None => items.par_iter().map(f).collect(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        items.iter().map(f).collect()
    }
}

/// Everything measured on one session.
#[derive(Debug, Clone)]
pub struct SessionAnalysis {
    pub participant_id: String,
    pub age_group: AgeGroup,
    pub visits: Vec<PageVisit>,
    pub attention: Vec<VisitAttention>,
    pub comparisons: Vec<AttentionComparison>,
    pub zero_baseline_visits: usize,
    pub referrers: BTreeMap<ReferrerMethod, ComparisonCounts>,
    pub activity: ParticipantActivity,
}

pub fn analyze_session(trace: &Trace, scope: &[MatchPattern], lists: &DomainLists) -> SessionAnalysis {
    let mut visits = track_visits(trace, scope);
    let attention = measure_all(trace, &mut visits, DEFAULT_IDLE_THRESHOLD_MS);
    let (comparisons, zero_baseline_visits) = compare_attention(&trace.participant_id, trace.age_group, &attention);
    let referrers = ReferrerMethod::ALL
        .into_iter()
        .map(|m| (m, compare_referrers(&visits, m)))
        .collect();
    let activity = ParticipantActivity {
        participant_id: trace.participant_id.clone(),
        exposures: detect_exposures(trace, lists, ExposureConfig::default()),
        shares: track_shares(trace, lists),
        visit_urls: visits.iter().map(|v| v.url.clone()).collect(),
    };
    SessionAnalysis {
        participant_id: trace.participant_id.clone(),
        age_group: trace.age_group,
        visits,
        attention,
        comparisons,
        zero_baseline_visits,
        referrers,
        activity,
    }
}

/// Analyses of every session, sorted by participant id (stable for ties).
pub fn analyze_panel(
    traces: &[Trace],
    scope: &[MatchPattern],
    lists: &DomainLists,
    workers: Option<usize>,
) -> Vec<SessionAnalysis> {
    let mut out = map(traces, workers, |t| analyze_session(t, scope, lists));
    out.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PanelReport {
    pub sessions: usize,
    pub visits: usize,
    pub errors: ErrorReport,
    pub referrers: BTreeMap<ReferrerMethod, ComparisonCounts>,
    pub study: StudySummary,
}

pub fn panel_report(sessions: &[SessionAnalysis], thresholds: &[f64], lists: &DomainLists) -> PanelReport {
    let comparisons: Vec<AttentionComparison> = sessions.iter().flat_map(|s| s.comparisons.iter().cloned()).collect();
    let zero: usize = sessions.iter().map(|s| s.zero_baseline_visits).sum();
    let mut referrers: BTreeMap<ReferrerMethod, ComparisonCounts> = BTreeMap::new();
    for s in sessions {
        for (m, c) in &s.referrers {
            referrers.entry(*m).or_default().merge(c);
        }
    }
    let activities: Vec<ParticipantActivity> = sessions.iter().map(|s| s.activity.clone()).collect();
    PanelReport {
        sessions: sessions.len(),
        visits: sessions.iter().map(|s| s.visits.len()).sum(),
        errors: error_stats(&comparisons, thresholds, zero),
        referrers,
        study: study_summary(&activities, lists),
    }
}
