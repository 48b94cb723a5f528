//! Acceptance gate: runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use webmeter::attention::{measure_all, LOAD_INTERVAL_CAP_MS};
use webmeter::chronology::{monotonic_timestamps, DEFAULT_IDLE_THRESHOLD_MS};
use webmeter::exposure::{study_summary, DomainLists, ParticipantActivity};
use webmeter::fixtures::{three_site_trace, match_pattern_cases, PatternExpectation};
use webmeter::navigation::{compare_referrers, referrer_baseline, track_visits, PageId, ReferrerMethod, REFERRER_CAP_MS};
use webmeter::panel::{analyze_panel, analyze_session, panel_report, SessionAnalysis};
use webmeter::patterns::{parse_pattern, MatchPattern};
use webmeter::privacy::{
    aggregate_windows, build_digest, counts_payload, exposure_observations, pseudo_id, DigestStore, StudySchema,
    DEFAULT_WINDOW_MS,
};
use webmeter::synth::{default_mix, generate_panel, random_trace, Persona, UNTRACKED_HOSTS};
use webmeter::trace::{AgeGroup, EventKind, Millis, TabId, Trace, TraceEvent, WindowId};

const THREE_SITE_RUNTIME: Duration = Duration::from_secs(1);
const ORDERING_TRACES: usize = 1_000;
const ORDERING_RUNTIME: Duration = Duration::from_secs(60);
const ORACLE_TRACES: u64 = 200;
const ORACLE_MAX_EVENTS: usize = 50;
const ORACLE_TICK_MS: Millis = 100;
const TREND_PANEL: usize = 600;
const TREND_RUNTIME: Duration = Duration::from_secs(120);
const SIMPLE_BAND_PP: f64 = 3.0;
const ROW_SUM_TOLERANCE: f64 = 0.01;
const SEED: u64 = 20_210_115;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn all_urls() -> [MatchPattern; 1] {
    [MatchPattern::AllUrls]
}

fn three_site_golden() -> Outcome {
    let start = Instant::now();
    let trace = three_site_trace();
    let mut visits = track_visits(&trace, &all_urls());
    let m = measure_all(&trace, &mut visits, DEFAULT_IDLE_THRESHOLD_MS);
    let urls: Vec<&str> = visits.iter().map(|v| v.url.as_str()).collect();
    check(urls == ["http://www.a.com/", "http://www.b.com/", "http://www.c.com/"], || format!("visits {urls:?}"))?;
    let ws: Vec<Millis> = m.iter().map(|a| a.webscience).collect();
    check(ws == [75_000, 17_000, 240_000], || format!("attention {ws:?}"))?;
    let li: Vec<Option<Millis>> = m.iter().map(|a| a.load_interval).collect();
    check(li[..2] == [Some(30_000), Some(62_000)], || format!("load interval {li:?}"))?;
    check(visits[2].prior_page_id == Some(PageId(1)), || "c.com prior is not a.com".into())?;
    check(visits[1].prior_page_id == Some(PageId(1)), || "b.com prior is not a.com".into())?;
    let load_order = referrer_baseline(ReferrerMethod::LoadOrder, &visits, REFERRER_CAP_MS);
    check(
        load_order[&PageId(3)].as_deref() == Some("http://www.b.com/"),
        || format!("load order for c.com {:?}", load_order[&PageId(3)]),
    )?;
    let elapsed = start.elapsed();
    check(elapsed < THREE_SITE_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!("exact, {elapsed:.1?}"))
}

fn ordering(panel: &[Trace]) -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut violations = 0usize;
    for trace in panel {
        let mut visits = track_visits(trace, &all_urls());
        for a in measure_all(trace, &mut visits, DEFAULT_IDLE_THRESHOLD_MS) {
            if a.load_interval.is_none() {
                continue;
            }
            checked += 1;
            let ordered = a.webscience <= a.simple && a.simple <= a.dwell;
            let errors_ordered = a.webscience == 0 || (a.simple - a.webscience) <= (a.dwell - a.webscience);
            if !(ordered && errors_ordered) {
                violations += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(panel.len() == ORDERING_TRACES, || format!("{} traces", panel.len()))?;
    check(violations == 0, || format!("{violations} violations in {checked} visits"))?;
    check(elapsed < ORDERING_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!("{checked} visits, 0 violations, {elapsed:.1?}"))
}

/// Foreground tab after every event at or before `x`, by direct replay.
fn foreground_at(trace: &Trace, x: Millis) -> Option<TabId> {
    let mut owner: HashMap<TabId, WindowId> = HashMap::new();
    let mut selected: HashMap<WindowId, Option<TabId>> = HashMap::new();
    let mut focused = None;
    for e in trace.events.iter().take_while(|e| e.t <= x) {
        match &e.kind {
            EventKind::TabOpened { tab_id, window_id } => {
                owner.insert(*tab_id, *window_id);
                selected.entry(*window_id).or_insert(None).get_or_insert(*tab_id);
            }
            EventKind::TabActivated { window_id, tab_id } => {
                selected.insert(*window_id, Some(*tab_id));
            }
            EventKind::TabClosed { tab_id } => {
                if let Some(w) = owner.remove(tab_id) {
                    if selected.get(&w) == Some(&Some(*tab_id)) {
                        selected.insert(w, None);
                    }
                }
            }
            EventKind::WindowFocusChanged { window_id } => focused = *window_id,
            EventKind::WindowClosed { window_id } => {
                selected.remove(window_id);
                owner.retain(|_, w| w != window_id);
                if focused == Some(*window_id) {
                    focused = None;
                }
            }
            _ => {}
        }
    }
    focused.and_then(|w| selected.get(&w).copied().flatten())
}

fn brute_force_oracle() -> Outcome {
    let mut mismatches = 0;
    let mut visits_checked = 0;
    for seed in 0..ORACLE_TRACES {
        let trace = random_trace(seed, ORACLE_MAX_EVENTS);
        check(trace.events.len() <= ORACLE_MAX_EVENTS, || "trace too long".into())?;
        let inputs: Vec<Millis> = trace
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::InputActivity {}))
            .map(|e| e.t)
            .collect();
        let idle_at = |x: Millis| {
            inputs.windows(2).any(|w| {
                w[1] - w[0] >= DEFAULT_IDLE_THRESHOLD_MS && w[0] + DEFAULT_IDLE_THRESHOLD_MS <= x && x < w[1]
            })
        };
        let mut visits = track_visits(&trace, &all_urls());
        let measured = measure_all(&trace, &mut visits, DEFAULT_IDLE_THRESHOLD_MS);
        for (v, m) in visits.iter().zip(&measured) {
            visits_checked += 1;
            let (mut ws, mut simple) = (0, 0);
            let mut x = v.start_time;
            while x < v.stop_time {
                if foreground_at(&trace, x) == Some(v.tab_id) {
                    simple += ORACLE_TICK_MS;
                    if !idle_at(x) {
                        ws += ORACLE_TICK_MS;
                    }
                }
                x += ORACLE_TICK_MS;
            }
            let next_load = trace.events[v.start_event + 1..]
                .iter()
                .find(|e| matches!(e.kind, EventKind::PageLoad { .. }))
                .map(|e| (e.t - v.start_time).min(LOAD_INTERVAL_CAP_MS));
            if (ws, v.stop_time - v.start_time, next_load, simple) != (m.webscience, m.dwell, m.load_interval, m.simple) {
                mismatches += 1;
            }
        }
    }
    check(mismatches == 0, || format!("{mismatches} mismatches in {visits_checked} visits"))?;
    Ok(format!("{ORACLE_TRACES} traces, {visits_checked} visits, 0 mismatches"))
}

fn linear_degeneracy() -> Outcome {
    let personas: Vec<(Persona, f64)> = AgeGroup::BUCKETS
        .iter()
        .map(|&g| (Persona::linear(g), 1.0 / AgeGroup::BUCKETS.len() as f64))
        .collect();
    let panel = generate_panel(&personas, 60, SEED).map_err(|e| e.to_string())?;
    let sessions = analyze_panel(&panel, &all_urls(), &DomainLists::builtin(), None);
    let (mut referred, mut full, mut errors, mut nonzero) = (0, 0, 0, 0);
    for s in &sessions {
        let c = compare_referrers(&s.visits, ReferrerMethod::LoadOrder);
        // The first page of a session has no referrer under either method.
        check(c.neither == 1, || format!("{}: {c:?}", s.participant_id))?;
        referred += c.total() - c.neither;
        full += c.full_match;
        for cmp in &s.comparisons {
            errors += 1;
            if cmp.e_pct != 0.0 {
                nonzero += 1;
            }
        }
    }
    check(referred > 0 && full == referred, || format!("fullMatch {full}/{referred}"))?;
    check(errors > 0 && nonzero == 0, || format!("{nonzero}/{errors} comparisons with error"))?;
    Ok(format!("fullMatch {full}/{referred}, 0/{errors} nonzero errors"))
}

fn trend(sessions: &[SessionAnalysis], elapsed: Duration) -> Outcome {
    let report = panel_report(sessions, &webmeter::attention::DEFAULT_THRESHOLDS, &DomainLists::builtin());
    let medians = |m| -> Result<Vec<f64>, String> {
        let stats = report.errors.method(m).ok_or("missing method")?;
        AgeGroup::BUCKETS
            .iter()
            .map(|g| stats.median_error_by_age.get(g).copied().ok_or(format!("no {g} median")))
            .collect()
    };
    use webmeter::attention::AttentionMethod::{Dwell, LoadInterval, Simple};
    let dwell = medians(Dwell)?;
    let load = medians(LoadInterval)?;
    let simple = medians(Simple)?;
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[0] > w[1]);
    check(decreasing(&dwell), || format!("dwell medians {dwell:.2?}"))?;
    check(decreasing(&load), || format!("load-interval medians {load:.2?}"))?;
    let band = simple.iter().cloned().fold(f64::MIN, f64::max) - simple.iter().cloned().fold(f64::MAX, f64::min);
    check(band <= SIMPLE_BAND_PP, || format!("simple band {band:.2} pp: {simple:.2?}"))?;
    check(elapsed < TREND_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "dwell {dwell:.1?}, load interval {load:.1?}, simple band {band:.2} pp, {elapsed:.1?}"
    ))
}

fn conformance() -> Outcome {
    let cases = match_pattern_cases();
    let mut failed = Vec::new();
    for (pattern, url, expected) in &cases {
        let got = match parse_pattern(pattern) {
            Err(_) => PatternExpectation::Invalid,
            Ok(p) => match p.matches(url) {
                Ok(true) => PatternExpectation::Match,
                Ok(false) => PatternExpectation::NoMatch,
                Err(_) => PatternExpectation::Invalid,
            },
        };
        if got != *expected {
            failed.push(format!("{pattern} {url}"));
        }
    }
    check(cases.len() >= 20, || format!("only {} cases", cases.len()))?;
    check(failed.is_empty(), || format!("failed: {failed:?}"))?;
    Ok(format!("{}/{} cases", cases.len(), cases.len()))
}

fn partition(panel: &[Trace], sessions: &[SessionAnalysis]) -> Outcome {
    let lists = DomainLists::builtin();
    for s in sessions {
        for (m, c) in &s.referrers {
            check(c.total() == s.visits.len(), || {
                format!("{} {}: {} != {}", s.participant_id, m.label(), c.total(), s.visits.len())
            })?;
        }
    }
    let by_id: HashMap<&str, &Trace> = panel.iter().map(|t| (t.participant_id.as_str(), t)).collect();
    let mut observations_total = 0usize;
    for s in sessions {
        let a = &s.activity;
        let obs = exposure_observations(by_id[s.participant_id.as_str()], &a.exposures, &a.shares, &a.visit_urls, &lists);
        let expected =
            a.exposures.records.len() + a.exposures.untracked as usize + a.visit_urls.len() + a.shares.records.len()
                + a.shares.untracked as usize;
        check(obs.len() == expected, || format!("{} observations, expected {expected}", obs.len()))?;
        let counted: u64 = aggregate_windows(&obs, DEFAULT_WINDOW_MS).values().flat_map(|c| c.values()).sum();
        check(counted as usize == obs.len(), || format!("aggregated {counted} of {}", obs.len()))?;
        observations_total += obs.len();
    }
    let activities: Vec<ParticipantActivity> = sessions.iter().map(|s| s.activity.clone()).collect();
    let summary = study_summary(&activities, &lists);
    for (row, cells) in &summary.exposure_share {
        let sum: f64 = cells.values().sum();
        check((sum - 100.0).abs() <= ROW_SUM_TOLERANCE, || format!("row {row} sums to {sum}"))?;
    }
    Ok(format!(
        "{} sessions, {observations_total} records conserved, {} share rows at 100",
        sessions.len(),
        summary.exposure_share.len()
    ))
}

fn count_in_tree(root: &Path, needle: &str) -> usize {
    let mut n = 0;
    for entry in fs::read_dir(root).into_iter().flatten().flatten() {
        let path = entry.path();
        n += path.file_name().unwrap().to_string_lossy().matches(needle).count();
        if path.is_dir() {
            n += count_in_tree(&path, needle);
        } else {
            n += fs::read_to_string(&path).unwrap_or_default().matches(needle).count();
        }
    }
    n
}

fn privacy_scans(panel: &[Trace], sessions: &[SessionAnalysis]) -> Outcome {
    let lists = DomainLists::builtin();
    let traces_text: String = panel.iter().map(webmeter::trace::serialize_trace).collect();
    let present = UNTRACKED_HOSTS.iter().filter(|h| traces_text.contains(*h)).count();
    check(present > 0, || "panel has no unlisted domains".into())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = DigestStore::new(dir.path());
    let schema = StudySchema::exposure_study("acceptance");
    let by_id: HashMap<&str, &Trace> = panel.iter().map(|t| (t.participant_id.as_str(), t)).collect();
    let mut pseudo_ids = Vec::new();
    for s in sessions {
        let pid = pseudo_id(&schema.study_id, &format!("secret-{}", s.participant_id)).map_err(|e| e.to_string())?;
        let a = &s.activity;
        let obs = exposure_observations(by_id[s.participant_id.as_str()], &a.exposures, &a.shares, &a.visit_urls, &lists);
        for (window, counts) in aggregate_windows(&obs, DEFAULT_WINDOW_MS) {
            let d = build_digest(&counts_payload(&counts), &schema, &pid, window, "k1").map_err(|e| e.to_string())?;
            store.write(&d).map_err(|e| e.to_string())?;
        }
        pseudo_ids.push(pid);
    }
    let activities: Vec<ParticipantActivity> = sessions.iter().map(|s| s.activity.clone()).collect();
    let summary_json = serde_json::to_string(&study_summary(&activities, &lists)).map_err(|e| e.to_string())?;
    for host in UNTRACKED_HOSTS {
        check(count_in_tree(dir.path(), host) == 0, || format!("{host} in digest store"))?;
        check(!summary_json.contains(host), || format!("{host} in study summary"))?;
    }

    let victim = &pseudo_ids[0];
    check(count_in_tree(dir.path(), victim) > 0, || "victim digests missing".into())?;
    let removed = store.delete_participant(victim).map_err(|e| e.to_string())?;
    let left = count_in_tree(dir.path(), victim);
    check(removed > 0 && left == 0, || format!("removed {removed}, {left} occurrences left"))?;

    let a = pseudo_id("study-a", "same-secret").map_err(|e| e.to_string())?;
    let b = pseudo_id("study-b", "same-secret").map_err(|e| e.to_string())?;
    check(a != b, || "pseudo ids equal across studies".into())?;
    Ok(format!("{} unlisted hosts in traces, 0 in outputs, deletion complete", present))
}

fn clock_immunity(panel: &[Trace]) -> Outcome {
    let lists = DomainLists::builtin();
    let mut twins = 0;
    for trace in panel.iter().take(50) {
        let base = Trace {
            events: trace
                .events
                .iter()
                .filter(|e| !matches!(e.kind, EventKind::SystemClockChange { .. }))
                .cloned()
                .collect(),
            ..trace.clone()
        };
        let mut events = Vec::new();
        let mut injected = Vec::new();
        for (i, e) in base.events.iter().enumerate() {
            events.push(e.clone());
            injected.push(false);
            if i > 0 && i % 23 == 0 && i + 1 < base.events.len() {
                let delta_ms = if i % 2 == 0 { 3_600_000 } else { -86_400_000 };
                events.push(TraceEvent::new(e.t, EventKind::SystemClockChange { delta_ms }));
                injected.push(true);
            }
        }
        let twin = Trace { events, ..base.clone() };
        let twin_times: Vec<i64> = monotonic_timestamps(&twin)
            .into_iter()
            .zip(&injected)
            .filter(|(_, i)| !**i)
            .map(|(t, _)| t)
            .collect();
        check(twin_times == monotonic_timestamps(&base), || format!("{}: timestamps differ", trace.participant_id))?;
        let x = analyze_session(&base, &all_urls(), &lists);
        let y = analyze_session(&twin, &all_urls(), &lists);
        let same = x.attention == y.attention
            && x.comparisons == y.comparisons
            && x.referrers == y.referrers
            && x.activity.exposures == y.activity.exposures
            && x.activity.shares == y.activity.shares;
        check(same, || format!("{}: measurements differ", trace.participant_id))?;
        twins += 1;
    }
    Ok(format!("{twins} twin pairs identical"))
}

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (i, workers) in ["1", "4"].iter().enumerate() {
        let root = dir.path().join(format!("run{i}"));
        let traces = root.join("traces");
        let s = |p: &Path| p.to_string_lossy().into_owned();
        let steps: [Vec<String>; 3] = [
            vec!["generate".into(), "--seed".into(), SEED.to_string(), "--n".into(), "40".into(), "--out".into(), s(&traces)],
            vec!["measure".into(), "--traces".into(), s(&traces), "--out".into(), s(&root.join("measure"))],
            vec!["compare".into(), "--traces".into(), s(&traces), "--out".into(), s(&root.join("compare"))],
        ];
        for step in steps {
            let mut err = Vec::new();
            let args = ["webmeter", "--workers", workers].into_iter().map(String::from).chain(step);
            let code = webmeter_cli::run(args, &mut err);
            check(code == 0, || format!("exit {code}: {}", String::from_utf8_lossy(&err)))?;
        }
        runs.push(tree_bytes(&root));
    }
    check(runs[0].len() > 40, || format!("only {} artifacts", runs[0].len()))?;
    let differing: Vec<&String> = runs[0].keys().filter(|k| runs[0].get(*k) != runs[1].get(*k)).collect();
    check(runs[0].keys().eq(runs[1].keys()) && differing.is_empty(), || format!("differ: {differing:?}"))?;
    Ok(format!("{} artifacts byte-identical", runs[0].len()))
}

fn main() {
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    results.push((1, "golden trace", three_site_golden()));

    let ordering_panel = generate_panel(&default_mix(), ORDERING_TRACES, SEED + 1);
    results.push((
        2,
        "attention ordering",
        ordering_panel.map_err(|e| e.to_string()).and_then(|p| ordering(&p)),
    ));
    results.push((3, "brute-force attention oracle", brute_force_oracle()));
    results.push((4, "linear-browsing degeneracy", linear_degeneracy()));

    let start = Instant::now();
    let panel = generate_panel(&default_mix(), TREND_PANEL, SEED).expect("default mix is valid");
    let sessions = analyze_panel(&panel, &all_urls(), &DomainLists::builtin(), None);
    results.push((5, "age trend", trend(&sessions, start.elapsed())));
    results.push((6, "match-pattern conformance", conformance()));
    results.push((7, "partition and conservation", partition(&panel, &sessions)));
    results.push((8, "privacy scans", privacy_scans(&panel, &sessions)));
    results.push((9, "clock immunity", clock_immunity(&panel)));
    results.push((10, "determinism", determinism()));

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n:>2} {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} {name}: FAIL ({why})");
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
