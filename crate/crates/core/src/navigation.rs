//! Page-visit reconstruction, the visit DAG built from logical referrers,
//! and the conventional referrer heuristics it is compared against.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patterns::{in_scope, normalize_parsed, normalize_url, parse_absolute, registrable_domain, MatchPattern};
use crate::replay::BrowserState;
use crate::trace::{Disposition, EventKind, Millis, TabId, Trace, WindowId};

/// A page load is attributed to a link click at most this long before it.
pub const LINK_CORRELATION_WINDOW_MS: Millis = 5_000;
/// An address-bar entry types the page loaded at most this long after it.
pub const TYPED_CORRELATION_WINDOW_MS: Millis = 5_000;
/// Baselines ignore predecessors loaded more than 30 minutes earlier.
pub const REFERRER_CAP_MS: Millis = 1_800_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PageId(pub u64);

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionType {
    Typed,
    LinkClick,
    HistoryState,
    Reload,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionQualifier {
    FromAddressBar,
}

impl TransitionType {
    pub fn label(self) -> &'static str {
        match self {
            TransitionType::Typed => "typed",
            TransitionType::LinkClick => "link_click",
            TransitionType::HistoryState => "history_state",
            TransitionType::Reload => "reload",
            TransitionType::Unknown => "unknown",
        }
    }
}

impl TransitionQualifier {
    pub fn label(self) -> &'static str {
        match self {
            TransitionQualifier::FromAddressBar => "from_address_bar",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PageVisit {
    pub page_id: PageId,
    pub tab_id: TabId,
    pub window_id: WindowId,
    /// Normalized.
    pub url: String,
    pub http_referrer: Option<String>,
    /// The visit on which the link leading here was clicked.
    pub prior_page_id: Option<PageId>,
    pub transition_type: TransitionType,
    pub transition_qualifier: Option<TransitionQualifier>,
    pub start_time: Millis,
    pub stop_time: Millis,
    pub max_scroll_depth: u8,
    pub attention_duration_ms: Option<Millis>,
    /// Index of the `PageLoad`/`HistoryStateUpdate` event that began the visit.
    #[serde(skip)]
    pub start_event: usize,
}

impl PageVisit {
    pub fn dwell_ms(&self) -> Millis {
        self.stop_time - self.start_time
    }
}

struct PendingClick {
    t: Millis,
    source_tab: TabId,
    source_window: WindowId,
    source_visit: Option<usize>,
    target: String,
    disposition: Disposition,
    consumed: bool,
}

#[derive(Default)]
struct TabCursor {
    /// Index into the visit list of the tab's current tracked visit.
    visit: Option<usize>,
    /// Normalized URL currently shown, tracked or not.
    url: Option<String>,
    opened_at: Millis,
    typed: Option<(Millis, String)>,
}

/// Reconstructs page visits, one per `PageLoad` or `HistoryStateUpdate`
/// whose URL matches `scope`.
///
/// A visit ends at the next navigation in its tab, when its tab or window
/// closes, or at shutdown. Page ids are assigned 1, 2, ... in start order.
pub fn track_visits(trace: &Trace, scope: &[MatchPattern]) -> Vec<PageVisit> {
    let mut visits: Vec<PageVisit> = Vec::new();
    let mut tabs: HashMap<TabId, TabCursor> = HashMap::new();
    let mut clicks: VecDeque<PendingClick> = VecDeque::new();
    let mut state = BrowserState::default();

    fn close(visits: &mut [PageVisit], cursor: &mut TabCursor, t: Millis) {
        if let Some(i) = cursor.visit.take() {
            visits[i].stop_time = t;
        }
    }

    for (index, event) in trace.events.iter().enumerate() {
        let t = event.t;
        while clicks
            .front()
            .is_some_and(|c| t.saturating_sub(c.t) > LINK_CORRELATION_WINDOW_MS)
        {
            clicks.pop_front();
        }
        match &event.kind {
            EventKind::TabOpened { tab_id, .. } => {
                tabs.insert(
                    *tab_id,
                    TabCursor {
                        opened_at: t,
                        ..TabCursor::default()
                    },
                );
            }
            EventKind::AddressBarEntry { tab_id, url } => {
                if let (Some(cursor), Ok(url)) = (tabs.get_mut(tab_id), normalize_url(url)) {
                    cursor.typed = Some((t, url));
                }
            }
            EventKind::LinkClick {
                source_tab_id,
                target_url,
                disposition,
            } => {
                if let (Some(window), Ok(target)) = (state.window_of(*source_tab_id), normalize_url(target_url)) {
                    clicks.push_back(PendingClick {
                        t,
                        source_tab: *source_tab_id,
                        source_window: window,
                        source_visit: tabs.get(source_tab_id).and_then(|c| c.visit),
                        target,
                        disposition: *disposition,
                        consumed: false,
                    });
                }
            }
            EventKind::PageLoad {
                tab_id,
                window_id,
                url,
                http_referrer,
            } => {
                let Some(cursor) = tabs.get_mut(tab_id) else {
                    continue;
                };
                close(&mut visits, cursor, t);
                let parsed = parse_absolute(url).ok();
                let normalized = parsed.clone().and_then(|u| normalize_parsed(u).ok());
                let previous_url = std::mem::replace(&mut cursor.url, normalized.clone());
                let (Some(parsed), Some(normalized)) = (parsed, normalized) else {
                    continue;
                };

                let click = attribute_click(&mut clicks, &normalized, *tab_id, *window_id, cursor.opened_at);
                let typed = cursor
                    .typed
                    .take()
                    .filter(|(at, u)| t.saturating_sub(*at) <= TYPED_CORRELATION_WINDOW_MS && *u == normalized);
                let (transition_type, transition_qualifier, prior) = match (click, typed) {
                    (Some(source), _) => (TransitionType::LinkClick, None, source),
                    (None, Some(_)) => (TransitionType::Typed, Some(TransitionQualifier::FromAddressBar), None),
                    (None, None) if previous_url.as_deref() == Some(normalized.as_str()) => {
                        (TransitionType::Reload, None, None)
                    }
                    (None, None) => (TransitionType::Unknown, None, None),
                };
                if !in_scope(scope, &parsed) {
                    continue;
                }
                cursor.visit = Some(visits.len());
                visits.push(PageVisit {
                    page_id: PageId(visits.len() as u64 + 1),
                    tab_id: *tab_id,
                    window_id: *window_id,
                    url: normalized,
                    http_referrer: http_referrer.as_deref().and_then(|r| normalize_url(r).ok()),
                    prior_page_id: prior.map(|i| visits[i].page_id),
                    transition_type,
                    transition_qualifier,
                    start_time: t,
                    stop_time: t,
                    max_scroll_depth: 0,
                    attention_duration_ms: None,
                    start_event: index,
                });
            }
            EventKind::HistoryStateUpdate { tab_id, new_url } => {
                let Some(window_id) = state.window_of(*tab_id) else {
                    continue;
                };
                let Some(cursor) = tabs.get_mut(tab_id) else {
                    continue;
                };
                close(&mut visits, cursor, t);
                let parsed = parse_absolute(new_url).ok();
                let normalized = parsed.clone().and_then(|u| normalize_parsed(u).ok());
                cursor.url = normalized.clone();
                let (Some(parsed), Some(normalized)) = (parsed, normalized) else {
                    continue;
                };
                // In-page navigations only take a logical referrer from a
                // same-tab click on the page itself.
                let prior = clicks
                    .iter_mut()
                    .rev()
                    .find(|c| {
                        !c.consumed
                            && c.target == normalized
                            && c.disposition == Disposition::SameTab
                            && c.source_tab == *tab_id
                    })
                    .and_then(|c| {
                        c.consumed = true;
                        c.source_visit
                    });
                if !in_scope(scope, &parsed) {
                    continue;
                }
                cursor.visit = Some(visits.len());
                visits.push(PageVisit {
                    page_id: PageId(visits.len() as u64 + 1),
                    tab_id: *tab_id,
                    window_id,
                    url: normalized,
                    http_referrer: None,
                    prior_page_id: prior.map(|i| visits[i].page_id),
                    transition_type: TransitionType::HistoryState,
                    transition_qualifier: None,
                    start_time: t,
                    stop_time: t,
                    max_scroll_depth: 0,
                    attention_duration_ms: None,
                    start_event: index,
                });
            }
            EventKind::ScrollPosition { tab_id, depth_percent } => {
                if let Some(i) = tabs.get(tab_id).and_then(|c| c.visit) {
                    let v = &mut visits[i];
                    v.max_scroll_depth = v.max_scroll_depth.max((*depth_percent).min(100));
                }
            }
            EventKind::TabClosed { tab_id } => {
                if let Some(mut cursor) = tabs.remove(tab_id) {
                    close(&mut visits, &mut cursor, t);
                }
            }
            EventKind::WindowClosed { window_id } => {
                for tab in state.tabs_in(*window_id).collect::<Vec<_>>() {
                    if let Some(mut cursor) = tabs.remove(&tab) {
                        close(&mut visits, &mut cursor, t);
                    }
                }
            }
            EventKind::BrowserShutdown {} => {
                for cursor in tabs.values_mut() {
                    close(&mut visits, cursor, t);
                }
            }
            _ => {}
        }
        let _ = state.apply(&event.kind);
    }

    // Sessions without a shutdown end at their last event.
    let end = trace.end();
    for cursor in tabs.values_mut() {
        close(&mut visits, cursor, end);
    }
    visits
}

/// Consumes and returns the source visit of the latest unconsumed click whose
/// target and disposition are consistent with this load. The outer `Option`
/// says whether a click matched; the inner one whether its source page was
/// itself a tracked visit.
fn attribute_click(
    clicks: &mut VecDeque<PendingClick>,
    url: &str,
    tab: TabId,
    window: WindowId,
    tab_opened_at: Millis,
) -> Option<Option<usize>> {
    let click = clicks.iter_mut().rev().find(|c| {
        !c.consumed
            && c.target == url
            && match c.disposition {
                Disposition::SameTab => c.source_tab == tab,
                Disposition::NewTab => {
                    c.source_tab != tab && c.source_window == window && tab_opened_at >= c.t
                }
                Disposition::NewWindow => c.source_window != window && tab_opened_at >= c.t,
            }
    })?;
    click.consumed = true;
    Some(click.source_visit)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("visit graph contains a cycle through {0}")]
    CycleDetected(PageId),
    #[error("{page} names unknown prior page {prior}")]
    UnknownPrior { page: PageId, prior: PageId },
}

/// Visits as nodes, with an edge from each visit to every visit it generated.
#[derive(Debug, Clone)]
pub struct VisitGraph {
    nodes: Vec<PageVisit>,
    index: HashMap<PageId, usize>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
}

impl VisitGraph {
    pub fn nodes(&self) -> &[PageVisit] {
        &self.nodes
    }

    pub fn edges(&self) -> Vec<(PageId, PageId)> {
        let mut edges: Vec<_> = self
            .children
            .iter()
            .enumerate()
            .flat_map(|(from, to)| to.iter().map(move |&to| (from, to)))
            .map(|(from, to)| (self.nodes[from].page_id, self.nodes[to].page_id))
            .collect();
        edges.sort();
        edges
    }

    pub fn children(&self, page: PageId) -> Vec<PageId> {
        self.index
            .get(&page)
            .map(|&i| self.children[i].iter().map(|&c| self.nodes[c].page_id).collect())
            .unwrap_or_default()
    }

    /// Page ids in a topological order (every visit after its prior).
    pub fn topological_order(&self) -> Vec<PageId> {
        self.order.iter().map(|&i| self.nodes[i].page_id).collect()
    }
}

pub fn build_dag(visits: &[PageVisit]) -> Result<VisitGraph, GraphError> {
    let index: HashMap<PageId, usize> = visits.iter().enumerate().map(|(i, v)| (v.page_id, i)).collect();
    let mut children = vec![Vec::new(); visits.len()];
    let mut indegree = vec![0usize; visits.len()];
    for (i, visit) in visits.iter().enumerate() {
        if let Some(prior) = visit.prior_page_id {
            let &from = index.get(&prior).ok_or(GraphError::UnknownPrior {
                page: visit.page_id,
                prior,
            })?;
            children[from].push(i);
            indegree[i] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..visits.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(visits.len());
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    if let Some(stuck) = (0..visits.len()).find(|&i| indegree[i] > 0) {
        return Err(GraphError::CycleDetected(visits[stuck].page_id));
    }
    Ok(VisitGraph {
        nodes: visits.to_vec(),
        index,
        children,
        order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferrerMethod {
    /// Chronologically previous page load in any tab.
    LoadOrder,
    /// The HTTP `Referer` header.
    HttpReferrer,
    /// Lookup of the header value in a deduplicated browsing history.
    History,
}

impl ReferrerMethod {
    pub const ALL: [ReferrerMethod; 3] = [
        ReferrerMethod::LoadOrder,
        ReferrerMethod::HttpReferrer,
        ReferrerMethod::History,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ReferrerMethod::LoadOrder => "load_order",
            ReferrerMethod::HttpReferrer => "http_referrer",
            ReferrerMethod::History => "history",
        }
    }
}

impl std::str::FromStr for ReferrerMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReferrerMethod::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| format!("unknown referrer method {s:?}"))
    }
}

/// The referrer URL each baseline method assigns to every visit.
///
/// `history` keeps only the most recent visit per normalized URL. It
/// returns the header's URL when that URL was visited earlier, otherwise the
/// most recent earlier visit on the header's host (a degraded, partial
/// match), otherwise nothing.
pub fn referrer_baseline(method: ReferrerMethod, visits: &[PageVisit], cap_ms: Millis) -> BTreeMap<PageId, Option<String>> {
    let mut ordered: Vec<&PageVisit> = visits.iter().collect();
    ordered.sort_by_key(|v| (v.start_time, v.page_id));
    match method {
        ReferrerMethod::LoadOrder => {
            let mut out = BTreeMap::new();
            let mut previous: Option<&PageVisit> = None;
            for v in ordered {
                let referrer = previous
                    .filter(|p| v.start_time - p.start_time <= cap_ms)
                    .map(|p| p.url.clone());
                out.insert(v.page_id, referrer);
                previous = Some(v);
            }
            out
        }
        ReferrerMethod::HttpReferrer => ordered
            .into_iter()
            .map(|v| (v.page_id, v.http_referrer.clone()))
            .collect(),
        ReferrerMethod::History => {
            let mut by_url: HashMap<&str, Millis> = HashMap::new();
            let mut by_host: HashMap<String, (&str, Millis)> = HashMap::new();
            let mut out = BTreeMap::new();
            for v in ordered {
                let referrer = v.http_referrer.as_deref().and_then(|r| {
                    if by_url.get(r).is_some_and(|&at| v.start_time - at <= cap_ms) {
                        return Some(r.to_string());
                    }
                    let host = crate::patterns::host_of(r)?;
                    by_host
                        .get(&host)
                        .filter(|(_, at)| v.start_time - at <= cap_ms)
                        .map(|(url, _)| url.to_string())
                });
                out.insert(v.page_id, referrer);
                by_url.insert(v.url.as_str(), v.start_time);
                if let Some(host) = crate::patterns::host_of(&v.url) {
                    by_host.insert(host, (v.url.as_str(), v.start_time));
                }
            }
            out
        }
    }
}

/// How a baseline's referrer relates to the logical referrer of one visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferrerAgreement {
    Neither,
    OnlyOther,
    OnlyWebScience,
    FullMatch,
    /// Both present, different URLs on the same registrable domain.
    Partial,
    /// Both present, different registrable domains.
    NoMatch,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonCounts {
    pub neither: usize,
    pub only_other: usize,
    pub only_web_science: usize,
    pub full_match: usize,
    pub partial: usize,
    pub no_match: usize,
}

impl ComparisonCounts {
    pub fn partial_or_no_match(&self) -> usize {
        self.partial + self.no_match
    }

    pub fn total(&self) -> usize {
        self.neither + self.only_other + self.only_web_science + self.full_match + self.partial_or_no_match()
    }

    pub fn record(&mut self, agreement: ReferrerAgreement) {
        match agreement {
            ReferrerAgreement::Neither => self.neither += 1,
            ReferrerAgreement::OnlyOther => self.only_other += 1,
            ReferrerAgreement::OnlyWebScience => self.only_web_science += 1,
            ReferrerAgreement::FullMatch => self.full_match += 1,
            ReferrerAgreement::Partial => self.partial += 1,
            ReferrerAgreement::NoMatch => self.no_match += 1,
        }
    }

    pub fn merge(&mut self, other: &ComparisonCounts) {
        self.neither += other.neither;
        self.only_other += other.only_other;
        self.only_web_science += other.only_web_science;
        self.full_match += other.full_match;
        self.partial += other.partial;
        self.no_match += other.no_match;
    }
}

pub fn classify_referrer(logical: Option<&str>, other: Option<&str>) -> ReferrerAgreement {
    match (logical, other) {
        (None, None) => ReferrerAgreement::Neither,
        (None, Some(_)) => ReferrerAgreement::OnlyOther,
        (Some(_), None) => ReferrerAgreement::OnlyWebScience,
        (Some(a), Some(b)) if a == b => ReferrerAgreement::FullMatch,
        (Some(a), Some(b)) => {
            let domain = |u: &str| crate::patterns::host_of(u).map(|h| registrable_domain(&h));
            match (domain(a), domain(b)) {
                (Some(x), Some(y)) if x == y => ReferrerAgreement::Partial,
                _ => ReferrerAgreement::NoMatch,
            }
        }
    }
}

/// Per-visit agreement between a baseline's referrers and the logical
/// referrers carried by the visits.
pub fn referrer_agreements(
    visits: &[PageVisit],
    baseline: &BTreeMap<PageId, Option<String>>,
) -> Vec<(PageId, ReferrerAgreement)> {
    let urls: HashMap<PageId, &str> = visits.iter().map(|v| (v.page_id, v.url.as_str())).collect();
    visits
        .iter()
        .map(|v| {
            let logical = v.prior_page_id.and_then(|p| urls.get(&p).copied());
            let other = baseline.get(&v.page_id).and_then(|r| r.as_deref());
            (v.page_id, classify_referrer(logical, other))
        })
        .collect()
}

pub fn compare_referrers(visits: &[PageVisit], method: ReferrerMethod) -> ComparisonCounts {
    let baseline = referrer_baseline(method, visits, REFERRER_CAP_MS);
    let mut counts = ComparisonCounts::default();
    for (_, agreement) in referrer_agreements(visits, &baseline) {
        counts.record(agreement);
    }
    counts
}
