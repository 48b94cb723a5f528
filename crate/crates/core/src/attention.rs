//! Per-visit attention under the active-tab/idle-aware measure and three
//! conventional baselines, plus the error statistics comparing them.
//!
//! A visit's tab is in the foreground when it is the selected tab of the
//! focused window. The user is idle from `threshold` after an
//! `InputActivity` until the next one, whenever the gap between them is at
//! least `threshold`. Time before the first or after the last input never
//! counts as idle.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chronology::DEFAULT_IDLE_THRESHOLD_MS;
use crate::navigation::{PageId, PageVisit};
use crate::replay::BrowserState;
use crate::spans::Spans;
use crate::trace::{AgeGroup, EventKind, Millis, TabId, Trace};

/// Load-interval values are capped at 30 minutes.
pub const LOAD_INTERVAL_CAP_MS: Millis = 1_800_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMethod {
    /// Foreground and not idle.
    Webscience,
    /// Load to unload.
    Dwell,
    /// Load to the next page load in any tab.
    LoadInterval,
    /// Foreground, idleness ignored.
    Simple,
}

impl AttentionMethod {
    pub const ALL: [AttentionMethod; 4] = [
        AttentionMethod::Webscience,
        AttentionMethod::Dwell,
        AttentionMethod::LoadInterval,
        AttentionMethod::Simple,
    ];
    /// The methods compared against [`AttentionMethod::Webscience`].
    pub const BASELINES: [AttentionMethod; 3] = [
        AttentionMethod::Dwell,
        AttentionMethod::LoadInterval,
        AttentionMethod::Simple,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AttentionMethod::Webscience => "webscience",
            AttentionMethod::Dwell => "dwell",
            AttentionMethod::LoadInterval => "load_interval",
            AttentionMethod::Simple => "simple",
        }
    }
}

impl fmt::Display for AttentionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AttentionError {
    #[error("unknown attention method {0:?}")]
    UnknownMethod(String),
    #[error("reference attention is zero")]
    ZeroBaseline,
}

impl FromStr for AttentionMethod {
    type Err = AttentionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttentionMethod::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| AttentionError::UnknownMethod(s.to_string()))
    }
}

/// Time spans derived from a trace that all attention methods share.
#[derive(Debug, Clone)]
pub struct ActivityTimeline {
    foreground: HashMap<TabId, Spans>,
    idle: Spans,
    /// Times of every `PageLoad`, in event order.
    loads: Vec<(usize, Millis)>,
}

impl ActivityTimeline {
    pub fn new(trace: &Trace, idle_threshold_ms: Millis) -> Self {
        let mut state = BrowserState::default();
        let mut foreground: HashMap<TabId, Spans> = HashMap::new();
        let mut current: Option<(TabId, Millis)> = None;
        let mut loads = Vec::new();
        let mut idle = Spans::new();
        let mut last_input: Option<Millis> = None;

        for (index, event) in trace.events.iter().enumerate() {
            match event.kind {
                EventKind::InputActivity {} => {
                    if let Some(prev) = last_input {
                        if event.t - prev >= idle_threshold_ms {
                            idle.push(prev + idle_threshold_ms, event.t);
                        }
                    }
                    last_input = Some(event.t);
                }
                EventKind::PageLoad { .. } => loads.push((index, event.t)),
                _ => {}
            }
            let _ = state.apply(&event.kind);
            let now = state.foreground_tab();
            if now != current.map(|(tab, _)| tab) {
                if let Some((tab, since)) = current {
                    foreground.entry(tab).or_default().push(since, event.t);
                }
                current = now.map(|tab| (tab, event.t));
            }
        }
        if let Some((tab, since)) = current {
            foreground.entry(tab).or_default().push(since, trace.end());
        }
        Self { foreground, idle, loads }
    }

    pub fn idle(&self) -> &Spans {
        &self.idle
    }

    pub fn foreground(&self, tab: TabId) -> Spans {
        self.foreground.get(&tab).cloned().unwrap_or_default()
    }

    /// Session time with any foreground tab and an active user.
    pub fn engaged_total(&self) -> Millis {
        let mut all: Vec<(Millis, Millis)> = self
            .foreground
            .values()
            .flat_map(|s| s.as_slice().iter().copied())
            .collect();
        all.sort();
        let mut merged = Spans::new();
        for (s, e) in all {
            merged.push(s, e);
        }
        merged.subtract(&self.idle).total()
    }

    fn simple(&self, visit: &PageVisit) -> Millis {
        self.foreground
            .get(&visit.tab_id)
            .map_or(0, |s| s.clip(visit.start_time, visit.stop_time).total())
    }

    fn webscience(&self, visit: &PageVisit) -> Millis {
        self.foreground.get(&visit.tab_id).map_or(0, |s| {
            s.clip(visit.start_time, visit.stop_time)
                .subtract(&self.idle)
                .total()
        })
    }

    fn load_interval(&self, visit: &PageVisit) -> Option<Millis> {
        let next = self.loads.partition_point(|&(i, _)| i <= visit.start_event);
        self.loads
            .get(next)
            .map(|&(_, t)| (t - visit.start_time).min(LOAD_INTERVAL_CAP_MS))
    }

    /// Attention under one method; `None` when the method has no value.
    pub fn measure(&self, method: AttentionMethod, visit: &PageVisit) -> Option<Millis> {
        match method {
            AttentionMethod::Webscience => Some(self.webscience(visit)),
            AttentionMethod::Dwell => Some(visit.dwell_ms()),
            AttentionMethod::LoadInterval => self.load_interval(visit),
            AttentionMethod::Simple => Some(self.simple(visit)),
        }
    }
}

/// Attention of every visit under `method`. Visits without a value (load
/// interval of the last load) are absent from the map.
pub fn attention_measure(method: AttentionMethod, trace: &Trace, visits: &[PageVisit]) -> BTreeMap<PageId, Millis> {
    let timeline = ActivityTimeline::new(trace, DEFAULT_IDLE_THRESHOLD_MS);
    visits
        .iter()
        .filter_map(|v| timeline.measure(method, v).map(|a| (v.page_id, a)))
        .collect()
}

/// All four measures of one visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VisitAttention {
    pub page_id: PageId,
    pub webscience: Millis,
    pub dwell: Millis,
    pub load_interval: Option<Millis>,
    pub simple: Millis,
}

impl VisitAttention {
    pub fn get(&self, method: AttentionMethod) -> Option<Millis> {
        match method {
            AttentionMethod::Webscience => Some(self.webscience),
            AttentionMethod::Dwell => Some(self.dwell),
            AttentionMethod::LoadInterval => self.load_interval,
            AttentionMethod::Simple => Some(self.simple),
        }
    }
}

/// Measures every visit under all methods and fills `attention_duration_ms`.
pub fn measure_all(trace: &Trace, visits: &mut [PageVisit], idle_threshold_ms: Millis) -> Vec<VisitAttention> {
    let timeline = ActivityTimeline::new(trace, idle_threshold_ms);
    visits
        .iter_mut()
        .map(|v| {
            let webscience = timeline.webscience(v);
            v.attention_duration_ms = Some(webscience);
            VisitAttention {
                page_id: v.page_id,
                webscience,
                dwell: v.dwell_ms(),
                load_interval: timeline.load_interval(v),
                simple: timeline.simple(v),
            }
        })
        .collect()
}

/// Relative error of a method against the reference measure, in percent.
pub fn error_pct(reference_ms: Millis, method_ms: Millis) -> Result<f64, AttentionError> {
    Ok(signed_diff(reference_ms, method_ms)?.abs())
}

/// Signed percent difference; negative when the method underestimates.
pub fn signed_diff(reference_ms: Millis, method_ms: Millis) -> Result<f64, AttentionError> {
    if reference_ms == 0 {
        return Err(AttentionError::ZeroBaseline);
    }
    let numerator = (method_ms as i128 - reference_ms as i128) * 100;
    Ok(numerator as f64 / reference_ms as f64)
}

/// One baseline value of one visit against the reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AttentionComparison {
    pub participant_id: String,
    pub page_id: PageId,
    pub method: AttentionMethod,
    pub a_ms: Millis,
    pub e_pct: f64,
    pub d_pct: f64,
    pub age_group: AgeGroup,
}

/// Comparisons of every baseline for one session. Visits with zero reference
/// attention are left out and counted in the second return value; baselines
/// without a value are skipped.
pub fn compare_attention(
    participant_id: &str,
    age_group: AgeGroup,
    measures: &[VisitAttention],
) -> (Vec<AttentionComparison>, usize) {
    let mut out = Vec::new();
    let mut zero = 0;
    for m in measures {
        if m.webscience == 0 {
            zero += 1;
            continue;
        }
        for method in AttentionMethod::BASELINES {
            let Some(a_ms) = m.get(method) else { continue };
            let d_pct = signed_diff(m.webscience, a_ms).expect("nonzero reference");
            out.push(AttentionComparison {
                participant_id: participant_id.to_string(),
                page_id: m.page_id,
                method,
                a_ms,
                e_pct: d_pct.abs(),
                d_pct,
                age_group,
            });
        }
    }
    (out, zero)
}

pub const DEFAULT_THRESHOLDS: [f64; 3] = [1.0, 10.0, 25.0];
/// Lower edges of the signed-difference bins: -100, -90, ..., 140; a final
/// bin holds everything at or above 150.
pub const HISTOGRAM_LOWER: f64 = -100.0;
pub const HISTOGRAM_WIDTH: f64 = 10.0;
pub const HISTOGRAM_BINS: usize = 26;

/// Histogram bin of a signed difference.
pub fn histogram_bin(d_pct: f64) -> usize {
    if d_pct >= 150.0 {
        return HISTOGRAM_BINS - 1;
    }
    let bin = ((d_pct - HISTOGRAM_LOWER) / HISTOGRAM_WIDTH).floor();
    (bin.max(0.0) as usize).min(HISTOGRAM_BINS - 2)
}

pub fn histogram_label(bin: usize) -> String {
    if bin == HISTOGRAM_BINS - 1 {
        ">150".to_string()
    } else {
        let lo = HISTOGRAM_LOWER + HISTOGRAM_WIDTH * bin as f64;
        format!("[{lo},{})", lo + HISTOGRAM_WIDTH)
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 0 {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MethodStats {
    pub method: AttentionMethod,
    pub visits: usize,
    /// Share of visits with `e >= threshold`, one per threshold.
    pub proportions: Vec<f64>,
    pub median_error: Option<f64>,
    pub median_error_by_age: BTreeMap<AgeGroup, f64>,
    pub histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorReport {
    pub thresholds: Vec<f64>,
    pub zero_baseline_visits: usize,
    pub methods: Vec<MethodStats>,
}

impl ErrorReport {
    pub fn method(&self, method: AttentionMethod) -> Option<&MethodStats> {
        self.methods.iter().find(|m| m.method == method)
    }
}

pub fn error_stats(comparisons: &[AttentionComparison], thresholds: &[f64], zero_baseline_visits: usize) -> ErrorReport {
    let methods = AttentionMethod::BASELINES
        .into_iter()
        .map(|method| {
            let rows: Vec<&AttentionComparison> = comparisons.iter().filter(|c| c.method == method).collect();
            let n = rows.len();
            let proportions = thresholds
                .iter()
                .map(|&x| {
                    if n == 0 {
                        0.0
                    } else {
                        rows.iter().filter(|c| c.e_pct >= x).count() as f64 / n as f64
                    }
                })
                .collect();
            let mut errors: Vec<f64> = rows.iter().map(|c| c.e_pct).collect();
            let median_error = median(&mut errors);
            let mut by_age: BTreeMap<AgeGroup, Vec<f64>> = BTreeMap::new();
            for c in &rows {
                by_age.entry(c.age_group).or_default().push(c.e_pct);
            }
            let median_error_by_age = by_age
                .into_iter()
                .filter_map(|(g, mut v)| median(&mut v).map(|m| (g, m)))
                .collect();
            let mut histogram = vec![0u64; HISTOGRAM_BINS];
            for c in &rows {
                histogram[histogram_bin(c.d_pct)] += 1;
            }
            MethodStats {
                method,
                visits: n,
                proportions,
                median_error,
                median_error_by_age,
                histogram,
            }
        })
        .collect();
    ErrorReport {
        thresholds: thresholds.to_vec(),
        zero_baseline_visits,
        methods,
    }
}
