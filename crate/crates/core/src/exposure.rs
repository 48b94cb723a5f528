//! Link exposure and social-share tracking against category domain lists.
//!
//! Only domains on a study's lists are ever named in output. Anything else is
//! reduced to an anonymous count.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::ActivityTimeline;
use crate::chronology::DEFAULT_IDLE_THRESHOLD_MS;
use crate::patterns::{host_of, normalize_url};
use crate::replay::BrowserState;
use crate::trace::{Audience, EventKind, Millis, Platform, ShareAction, TabId, Trace};

pub const DEFAULT_MIN_AREA_PX: u64 = 2_500;
pub const DEFAULT_MIN_VISIBLE_MS: Millis = 1_000;
pub const DEFAULT_MAX_REDIRECT_DEPTH: usize = 10;
pub const UNTRACKED: &str = "untracked";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    News,
    Health,
    Misinfo,
    Aggregator,
    Factcheck,
    Portal,
    Search,
    Social,
    Webmail,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::News,
        Category::Health,
        Category::Misinfo,
        Category::Aggregator,
        Category::Factcheck,
        Category::Portal,
        Category::Search,
        Category::Social,
        Category::Webmail,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::News => "news",
            Category::Health => "health",
            Category::Misinfo => "misinfo",
            Category::Aggregator => "aggregator",
            Category::Factcheck => "factcheck",
            Category::Portal => "portal",
            Category::Search => "search",
            Category::Social => "social",
            Category::Webmail => "webmail",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Category {
    type Err = ListError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| ListError::UnknownCategory(s.to_string()))
    }
}

/// A category label as it appears in records: a list category or
/// `untracked`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CategoryLabel {
    Tracked(Category),
    Untracked,
}

impl CategoryLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CategoryLabel::Tracked(c) => c.label(),
            CategoryLabel::Untracked => UNTRACKED,
        }
    }
}

impl From<CategoryLabel> for String {
    fn from(c: CategoryLabel) -> String {
        c.as_str().to_string()
    }
}

impl TryFrom<String> for CategoryLabel {
    type Error = ListError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s == UNTRACKED {
            Ok(CategoryLabel::Untracked)
        } else {
            s.parse().map(CategoryLabel::Tracked)
        }
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ListError {
    #[error("domain {domain} is listed under both {first} and {second}")]
    OverlappingLists {
        domain: String,
        first: Category,
        second: Category,
    },
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("line {line}: expected `category,domain`")]
    BadLine { line: usize },
}

/// Category → registrable domains. Categories are pairwise disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainLists {
    by_domain: BTreeMap<String, Category>,
}

impl DomainLists {
    pub fn new<I, S>(entries: I) -> Result<Self, ListError>
    where
        I: IntoIterator<Item = (Category, S)>,
        S: Into<String>,
    {
        let mut by_domain = BTreeMap::new();
        for (category, domain) in entries {
            let domain = domain.into().trim().trim_end_matches('.').to_ascii_lowercase();
            match by_domain.insert(domain.clone(), category) {
                Some(first) if first != category => {
                    return Err(ListError::OverlappingLists {
                        domain,
                        first,
                        second: category,
                    })
                }
                _ => {}
            }
        }
        Ok(Self { by_domain })
    }

    /// Parses `category,domain` lines. A header line `category,domain`,
    /// blank lines and `#` comments are skipped.
    pub fn from_csv(text: &str) -> Result<Self, ListError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "category,domain" {
                continue;
            }
            let (category, domain) = line.split_once(',').ok_or(ListError::BadLine { line: i + 1 })?;
            if domain.trim().is_empty() {
                return Err(ListError::BadLine { line: i + 1 });
            }
            entries.push((category.trim().parse::<Category>()?, domain.trim().to_string()));
        }
        Self::new(entries)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,domain\n");
        let mut rows: Vec<_> = self.by_domain.iter().map(|(d, c)| (*c, d)).collect();
        rows.sort();
        for (c, d) in rows {
            out.push_str(&format!("{c},{d}\n"));
        }
        out
    }

    pub fn domains(&self) -> impl Iterator<Item = (&str, Category)> {
        self.by_domain.iter().map(|(d, c)| (d.as_str(), *c))
    }

    /// The listed domain covering `host` (the host itself or its nearest
    /// listed parent) and its category.
    pub fn lookup_host(&self, host: &str) -> Option<(&str, Category)> {
        let host = host.trim_end_matches('.');
        let mut candidate = host;
        loop {
            if let Some((d, c)) = self.by_domain.get_key_value(candidate) {
                return Some((d.as_str(), *c));
            }
            candidate = candidate.split_once('.')?.1;
        }
    }

    pub fn lookup_url(&self, url: &str) -> Option<(&str, Category)> {
        self.lookup_host(&host_of(url)?)
    }

    /// The built-in demonstration lists, also used by the synthetic
    /// generator.
    pub fn builtin() -> Self {
        Self::new(
            BUILTIN_LISTS
                .iter()
                .flat_map(|(c, ds)| ds.iter().map(move |d| (*c, *d))),
        )
        .expect("built-in lists are disjoint")
    }
}

pub(crate) const BUILTIN_LISTS: &[(Category, &[&str])] = &[
    (Category::News, &["nytimes.com", "washingtonpost.com", "cnn.com", "foxnews.com", "bbc.co.uk"]),
    (Category::Health, &["webmd.com", "mayoclinic.org", "cdc.gov"]),
    (Category::Misinfo, &["infowars.com", "naturalnews.com", "breitbart.com"]),
    (Category::Aggregator, &["news.google.com", "news.yahoo.com"]),
    (Category::Factcheck, &["snopes.com", "politifact.com"]),
    (Category::Portal, &["yahoo.com", "msn.com", "aol.com"]),
    (Category::Search, &["google.com", "bing.com", "duckduckgo.com"]),
    (Category::Social, &["facebook.com", "twitter.com", "reddit.com"]),
    (Category::Webmail, &["mail.google.com", "outlook.live.com"]),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExposureRecord {
    pub t: Millis,
    /// Present only when the source page is on a list.
    pub source_domain: Option<String>,
    pub exposed_domain: Option<String>,
    pub source_category: CategoryLabel,
    pub exposed_category: CategoryLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExposureConfig {
    pub min_area_px: u64,
    pub min_visible_ms: Millis,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        Self {
            min_area_px: DEFAULT_MIN_AREA_PX,
            min_visible_ms: DEFAULT_MIN_VISIBLE_MS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exposures {
    pub records: Vec<ExposureRecord>,
    pub untracked: u64,
}

type EndedLink = (TabId, String, OpenLink, Millis);

struct OpenLink {
    since: Millis,
    area_px: u64,
    source_url: Option<String>,
}

/// Finds links that stayed in view long enough while their tab was in the
/// foreground.
///
/// A link's view span runs from `LinkVisible` to the matching `LinkHidden`,
/// or until its tab navigates, closes, or the session ends. It counts when
/// its largest reported area reaches `min_area_px` and the foreground time
/// inside the span reaches `min_visible_ms`. Links to unlisted domains only
/// increment `untracked`.
pub fn detect_exposures(trace: &Trace, lists: &DomainLists, config: ExposureConfig) -> Exposures {
    let timeline = ActivityTimeline::new(trace, DEFAULT_IDLE_THRESHOLD_MS);
    let mut open: HashMap<(TabId, String), OpenLink> = HashMap::new();
    let mut page_url: HashMap<TabId, String> = HashMap::new();
    let mut state = BrowserState::default();
    let mut ended: Vec<EndedLink> = Vec::new();

    fn close_tab(open: &mut HashMap<(TabId, String), OpenLink>, tab: TabId, t: Millis, ended: &mut Vec<EndedLink>) {
        let keys: Vec<_> = open.keys().filter(|(k, _)| *k == tab).cloned().collect();
        for key in keys {
            let link = open.remove(&key).expect("key present");
            ended.push((key.0, key.1, link, t));
        }
    }

    for event in &trace.events {
        let t = event.t;
        match &event.kind {
            EventKind::PageLoad { tab_id, url, .. } | EventKind::HistoryStateUpdate { tab_id, new_url: url } => {
                close_tab(&mut open, *tab_id, t, &mut ended);
                page_url.insert(*tab_id, url.clone());
            }
            EventKind::TabClosed { tab_id } => {
                close_tab(&mut open, *tab_id, t, &mut ended);
                page_url.remove(tab_id);
            }
            EventKind::WindowClosed { window_id } => {
                for tab in state.tabs_in(*window_id).collect::<Vec<_>>() {
                    close_tab(&mut open, tab, t, &mut ended);
                    page_url.remove(&tab);
                }
            }
            EventKind::LinkVisible { tab_id, url, area_px } => {
                let source_url = page_url.get(tab_id).cloned();
                open.entry((*tab_id, url.clone()))
                    .and_modify(|l| l.area_px = l.area_px.max(*area_px))
                    .or_insert(OpenLink {
                        since: t,
                        area_px: *area_px,
                        source_url,
                    });
            }
            EventKind::LinkHidden { tab_id, url } => {
                if let Some(link) = open.remove(&(*tab_id, url.clone())) {
                    ended.push((*tab_id, url.clone(), link, t));
                }
            }
            _ => {}
        }
        let _ = state.apply(&event.kind);
    }
    let end = trace.end();
    ended.extend(open.into_iter().map(|((tab, url), link)| (tab, url, link, end)));
    ended.sort_by(|a, b| (a.2.since, a.0, &a.1).cmp(&(b.2.since, b.0, &b.1)));

    let mut out = Exposures::default();
    for (tab, url, link, until) in ended {
        if link.area_px < config.min_area_px {
            continue;
        }
        let seen = timeline.foreground(tab).clip(link.since, until).total();
        if seen < config.min_visible_ms {
            continue;
        }
        let Some((exposed_domain, exposed)) = lists.lookup_url(&url) else {
            out.untracked += 1;
            continue;
        };
        let source = link.source_url.as_deref().and_then(|u| lists.lookup_url(u));
        out.records.push(ExposureRecord {
            t: link.since,
            source_domain: source.map(|(d, _)| d.to_string()),
            exposed_domain: Some(exposed_domain.to_string()),
            source_category: source.map_or(CategoryLabel::Untracked, |(_, c)| CategoryLabel::Tracked(c)),
            exposed_category: CategoryLabel::Tracked(exposed),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShareRecord {
    pub t: Millis,
    pub platform: Platform,
    pub action: ShareAction,
    pub audience: Audience,
    pub reshare: bool,
    pub shared_domain: String,
    pub shared_category: Category,
    pub visited_before: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Shares {
    pub records: Vec<ShareRecord>,
    pub untracked: u64,
}

/// Social shares that carry a link. Links on the lists yield full records;
/// other links are counted only. `visited_before` is set when the same
/// normalized URL was loaded earlier in the session.
pub fn track_shares(trace: &Trace, lists: &DomainLists) -> Shares {
    let mut visited: HashSet<String> = HashSet::new();
    let mut out = Shares::default();
    for event in &trace.events {
        match &event.kind {
            EventKind::PageLoad { url, .. } | EventKind::HistoryStateUpdate { new_url: url, .. } => {
                if let Ok(u) = normalize_url(url) {
                    visited.insert(u);
                }
            }
            EventKind::SocialShare {
                platform,
                action,
                url: Some(url),
                audience,
                reshare,
            } => match lists.lookup_url(url) {
                Some((domain, category)) => out.records.push(ShareRecord {
                    t: event.t,
                    platform: *platform,
                    action: *action,
                    audience: *audience,
                    reshare: *reshare,
                    shared_domain: domain.to_string(),
                    shared_category: category,
                    visited_before: normalize_url(url).is_ok_and(|u| visited.contains(&u)),
                }),
                None => out.untracked += 1,
            },
            _ => {}
        }
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResolveError {
    #[error("redirect cycle through {0}")]
    RedirectCycle(String),
    #[error("more than {0} redirects")]
    DepthExceeded(usize),
    #[error(transparent)]
    InvalidUrl(#[from] crate::patterns::InvalidUrl),
}

/// Shortener/redirect table keyed by normalized URL.
#[derive(Debug, Clone, Default)]
pub struct RedirectMap(HashMap<String, String>);

impl RedirectMap {
    pub fn new<I: IntoIterator<Item = (String, String)>>(pairs: I) -> Result<Self, crate::patterns::InvalidUrl> {
        pairs
            .into_iter()
            .map(|(from, to)| Ok((normalize_url(&from)?, to)))
            .collect::<Result<_, _>>()
            .map(RedirectMap)
    }
}

/// Follows redirects until a URL with no entry, giving up after `max_depth`
/// hops.
pub fn resolve_link(url: &str, redirects: &RedirectMap, max_depth: usize) -> Result<String, ResolveError> {
    let mut current = normalize_url(url)?;
    let mut seen = HashSet::from([current.clone()]);
    let mut hops = 0;
    while let Some(next) = redirects.0.get(&current) {
        let next = normalize_url(next)?;
        if !seen.insert(next.clone()) {
            return Err(ResolveError::RedirectCycle(next));
        }
        hops += 1;
        if hops > max_depth.max(1) {
            return Err(ResolveError::DepthExceeded(max_depth));
        }
        current = next;
    }
    Ok(current)
}

/// Per-session study inputs.
#[derive(Debug, Clone, Default)]
pub struct ParticipantActivity {
    pub participant_id: String,
    pub exposures: Exposures,
    pub shares: Shares,
    /// Visited URLs (normalized).
    pub visit_urls: Vec<String>,
}

pub type Matrix<T> = BTreeMap<CategoryLabel, BTreeMap<CategoryLabel, T>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StudySummary {
    pub participants: usize,
    /// Distinct participants with at least one exposure, by source and
    /// exposed category.
    pub users_exposed: Matrix<usize>,
    /// Exposure counts normalized per source category to percentages.
    pub exposure_share: Matrix<f64>,
    pub untracked_exposures: u64,
    pub visits_by_category: BTreeMap<CategoryLabel, u64>,
    pub shares_by_category: BTreeMap<CategoryLabel, u64>,
}

pub fn study_summary(panel: &[ParticipantActivity], lists: &DomainLists) -> StudySummary {
    let mut users: BTreeMap<(CategoryLabel, CategoryLabel), BTreeSet<&str>> = BTreeMap::new();
    let mut counts: BTreeMap<CategoryLabel, BTreeMap<CategoryLabel, u64>> = BTreeMap::new();
    let mut untracked_exposures = 0;
    let mut visits_by_category: BTreeMap<CategoryLabel, u64> = BTreeMap::new();
    let mut shares_by_category: BTreeMap<CategoryLabel, u64> = BTreeMap::new();

    for p in panel {
        for r in &p.exposures.records {
            users
                .entry((r.source_category, r.exposed_category))
                .or_default()
                .insert(p.participant_id.as_str());
            *counts
                .entry(r.source_category)
                .or_default()
                .entry(r.exposed_category)
                .or_default() += 1;
        }
        untracked_exposures += p.exposures.untracked;
        for url in &p.visit_urls {
            let label = lists
                .lookup_url(url)
                .map_or(CategoryLabel::Untracked, |(_, c)| CategoryLabel::Tracked(c));
            *visits_by_category.entry(label).or_default() += 1;
        }
        for s in &p.shares.records {
            *shares_by_category
                .entry(CategoryLabel::Tracked(s.shared_category))
                .or_default() += 1;
        }
        if p.shares.untracked > 0 {
            *shares_by_category.entry(CategoryLabel::Untracked).or_default() += p.shares.untracked;
        }
    }

    let mut users_exposed: Matrix<usize> = BTreeMap::new();
    for ((src, exp), who) in users {
        users_exposed.entry(src).or_default().insert(exp, who.len());
    }
    let exposure_share = counts
        .into_iter()
        .map(|(src, row)| {
            let total: u64 = row.values().sum();
            let row = row
                .into_iter()
                .map(|(exp, n)| (exp, n as f64 * 100.0 / total as f64))
                .collect();
            (src, row)
        })
        .collect();

    StudySummary {
        participants: panel.len(),
        users_exposed,
        exposure_share,
        untracked_exposures,
        visits_by_category,
        shares_by_category,
    }
}

/// Row labels: `untracked` then every category. Column labels: every
/// category.
fn matrix_axes() -> (Vec<CategoryLabel>, Vec<CategoryLabel>) {
    let cols: Vec<CategoryLabel> = Category::ALL.into_iter().map(CategoryLabel::Tracked).collect();
    let mut rows = cols.clone();
    rows.push(CategoryLabel::Untracked);
    (rows, cols)
}

/// CSV matrix with a `source` column then one column per exposed category.
/// Missing cells are written as 0.
pub fn matrix_to_csv<T: fmt::Display + Default + Clone>(matrix: &Matrix<T>) -> String {
    let (rows, cols) = matrix_axes();
    let mut out = String::from("source");
    for c in &cols {
        out.push(',');
        out.push_str(c.as_str());
    }
    out.push('\n');
    for r in rows {
        out.push_str(r.as_str());
        for c in &cols {
            let v = matrix.get(&r).and_then(|row| row.get(c)).cloned().unwrap_or_default();
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {reason}")]
pub struct MatrixParseError {
    pub line: usize,
    pub reason: String,
}

/// Inverse of [`matrix_to_csv`]; zero cells are dropped.
pub fn matrix_from_csv<T>(text: &str) -> Result<Matrix<T>, MatrixParseError>
where
    T: FromStr + Default + PartialEq,
{
    let err = |line, reason: &str| MatrixParseError {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(1, "empty"))?;
    let cols: Vec<CategoryLabel> = header
        .split(',')
        .skip(1)
        .map(|c| CategoryLabel::try_from(c.to_string()).map_err(|e| err(1, &e.to_string())))
        .collect::<Result<_, _>>()?;
    let mut matrix = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let mut cells = line.split(',');
        let row = cells.next().ok_or_else(|| err(i + 2, "empty row"))?;
        let row = CategoryLabel::try_from(row.to_string()).map_err(|e| err(i + 2, &e.to_string()))?;
        for (col, cell) in cols.iter().zip(cells) {
            let v: T = cell.parse().map_err(|_| err(i + 2, "bad cell"))?;
            if v != T::default() {
                matrix.entry(row).or_insert_with(BTreeMap::new).insert(*col, v);
            }
        }
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{AgeGroup, TraceEvent, WindowId};

    fn lists() -> DomainLists {
        DomainLists::new([
            (Category::News, "news.example"),
            (Category::Misinfo, "fake.example"),
        ])
        .unwrap()
    }

    fn page_trace(extra: Vec<TraceEvent>, end: Millis) -> Trace {
        let mut events = vec![
            TraceEvent::new(0, EventKind::BrowserStartup { system_clock_ms: 0 }),
            TraceEvent::new(0, EventKind::TabOpened { tab_id: TabId(1), window_id: WindowId(1) }),
            TraceEvent::new(0, EventKind::WindowFocusChanged { window_id: Some(WindowId(1)) }),
            TraceEvent::new(
                100,
                EventKind::PageLoad {
                    tab_id: TabId(1),
                    window_id: WindowId(1),
                    url: "https://www.news.example/story".into(),
                    http_referrer: None,
                },
            ),
        ];
        events.extend(extra);
        events.push(TraceEvent::new(end, EventKind::BrowserShutdown {}));
        Trace {
            participant_id: "p".into(),
            age_group: AgeGroup::Unknown,
            comment: None,
            events,
        }
    }

    fn visible(t: Millis, url: &str, area_px: u64) -> TraceEvent {
        TraceEvent::new(t, EventKind::LinkVisible { tab_id: TabId(1), url: url.into(), area_px })
    }

    fn hidden(t: Millis, url: &str) -> TraceEvent {
        TraceEvent::new(t, EventKind::LinkHidden { tab_id: TabId(1), url: url.into() })
    }

    #[test]
    fn visible_misinfo_link_on_news_page_is_recorded() {
        let url = "https://fake.example/a";
        let trace = page_trace(vec![visible(1000, url, 10_000), hidden(6000, url)], 10_000);
        let found = detect_exposures(&trace, &lists(), ExposureConfig::default());
        assert_eq!(
            found.records,
            vec![ExposureRecord {
                t: 1000,
                source_domain: Some("news.example".into()),
                exposed_domain: Some("fake.example".into()),
                source_category: CategoryLabel::Tracked(Category::News),
                exposed_category: CategoryLabel::Tracked(Category::Misinfo),
            }]
        );
        assert_eq!(found.untracked, 0);
    }

    #[test]
    fn short_or_small_links_are_ignored() {
        let url = "https://fake.example/a";
        let brief = page_trace(vec![visible(1000, url, 10_000), hidden(1999, url)], 10_000);
        assert!(detect_exposures(&brief, &lists(), ExposureConfig::default()).records.is_empty());
        let small = page_trace(vec![visible(1000, url, 2_499), hidden(9000, url)], 10_000);
        assert!(detect_exposures(&small, &lists(), ExposureConfig::default()).records.is_empty());
    }

    #[test]
    fn background_time_does_not_count() {
        let url = "https://fake.example/a";
        let trace = page_trace(
            vec![
                visible(1000, url, 10_000),
                TraceEvent::new(1100, EventKind::WindowFocusChanged { window_id: None }),
                hidden(9000, url),
            ],
            10_000,
        );
        assert!(detect_exposures(&trace, &lists(), ExposureConfig::default()).records.is_empty());
    }

    #[test]
    fn unlisted_links_are_only_counted() {
        let url = "https://secret-blog.example/post";
        let trace = page_trace(vec![visible(1000, url, 10_000), hidden(6000, url)], 10_000);
        let found = detect_exposures(&trace, &lists(), ExposureConfig::default());
        assert!(found.records.is_empty());
        assert_eq!(found.untracked, 1);
        let summary = study_summary(
            &[ParticipantActivity {
                participant_id: "p".into(),
                exposures: found,
                ..Default::default()
            }],
            &lists(),
        );
        let text = serde_json::to_string(&summary).unwrap() + &matrix_to_csv(&summary.exposure_share);
        assert!(!text.contains("secret-blog"));
        assert_eq!(summary.untracked_exposures, 1);
    }

    #[test]
    fn shares() {
        let share = |t, url: Option<&str>, action| {
            TraceEvent::new(
                t,
                EventKind::SocialShare {
                    platform: Platform::Twitter,
                    action,
                    url: url.map(str::to_string),
                    audience: Audience::Public,
                    reshare: false,
                },
            )
        };
        let trace = page_trace(
            vec![
                share(200, Some("https://www.news.example/story#top"), ShareAction::Post),
                share(300, Some("https://news.example/other"), ShareAction::Post),
                share(400, None, ShareAction::Favorite),
                share(500, Some("https://unlisted.example/"), ShareAction::Reshare),
            ],
            1000,
        );
        let shares = track_shares(&trace, &lists());
        assert_eq!(shares.records.len(), 2);
        assert!(shares.records[0].visited_before);
        assert!(!shares.records[1].visited_before);
        assert_eq!(shares.records[0].shared_domain, "news.example");
        assert_eq!(shares.untracked, 1);
    }

    #[test]
    fn redirects() {
        let map = RedirectMap::new([
            ("https://bit.ly/a".to_string(), "https://t.co/b".to_string()),
            ("https://t.co/b".to_string(), "https://news.example/c".to_string()),
            ("https://loop.example/1".to_string(), "https://loop.example/2".to_string()),
            ("https://loop.example/2".to_string(), "https://loop.example/1".to_string()),
        ])
        .unwrap();
        assert_eq!(resolve_link("https://x.example/", &map, 10).unwrap(), "https://x.example/");
        assert_eq!(resolve_link("https://bit.ly/a", &map, 10).unwrap(), "https://news.example/c");
        assert!(matches!(resolve_link("https://loop.example/1", &map, 10), Err(ResolveError::RedirectCycle(_))));
        assert_eq!(resolve_link("https://bit.ly/a", &map, 1), Err(ResolveError::DepthExceeded(1)));
    }

    #[test]
    fn overlapping_lists_rejected() {
        let err = DomainLists::new([(Category::News, "a.example"), (Category::Misinfo, "A.example")]).unwrap_err();
        assert!(matches!(err, ListError::OverlappingLists { .. }));
        assert!(DomainLists::from_csv("news,a.example\nmisinfo,a.example\n").is_err());
        assert_eq!(DomainLists::from_csv("bogus,a.example").unwrap_err(), ListError::UnknownCategory("bogus".into()));
    }

    #[test]
    fn lists_csv_round_trip_and_longest_suffix_lookup() {
        let lists = DomainLists::builtin();
        assert_eq!(DomainLists::from_csv(&lists.to_csv()).unwrap(), lists);
        assert_eq!(lists.lookup_host("mail.google.com"), Some(("mail.google.com", Category::Webmail)));
        assert_eq!(lists.lookup_host("www.google.com"), Some(("google.com", Category::Search)));
        assert_eq!(lists.lookup_host("google.com.evil.example"), None);
    }

    #[test]
    fn single_exposure_summary() {
        let url = "https://fake.example/a";
        let trace = page_trace(vec![visible(1000, url, 10_000), hidden(6000, url)], 10_000);
        let p = ParticipantActivity {
            participant_id: "p".into(),
            exposures: detect_exposures(&trace, &lists(), ExposureConfig::default()),
            ..Default::default()
        };
        let s = study_summary(&[p], &lists());
        let news = CategoryLabel::Tracked(Category::News);
        let misinfo = CategoryLabel::Tracked(Category::Misinfo);
        assert_eq!(s.users_exposed[&news][&misinfo], 1);
        assert_eq!(s.exposure_share[&news][&misinfo], 100.0);
    }

    #[test]
    fn share_matrix_fixture_round_trips() {
        let misinfo = CategoryLabel::Tracked(Category::Misinfo);
        let news = CategoryLabel::Tracked(Category::News);
        let mut m: Matrix<f64> = BTreeMap::new();
        m.entry(misinfo).or_default().insert(misinfo, 1.49);
        m.entry(misinfo).or_default().insert(news, 98.51);
        let text = matrix_to_csv(&m);
        let back: Matrix<f64> = matrix_from_csv(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back[&misinfo][&misinfo], 1.49);
    }
}
