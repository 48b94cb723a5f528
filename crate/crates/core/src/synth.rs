//! Seeded synthetic sessions and panels.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), so a `(persona, seed)`
//! pair reproduces the same trace bytes everywhere. A session alternates
//! active segments, with input every 2 to 8 seconds, and idle episodes whose
//! input gaps exceed the idle threshold; the idle share of the session
//! therefore equals the persona's `idleFraction` up to rounding. Link
//! clicks and tab switches arrive as Poisson processes over active time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chronology::DEFAULT_IDLE_THRESHOLD_MS;
use crate::exposure::BUILTIN_LISTS;
use crate::trace::{
    AgeGroup, Audience, Disposition, EventKind, Millis, Platform, ShareAction, TabId, Trace, TraceEvent, WindowId,
};

pub const GENERATOR: &str = "chacha8";

/// Study-clock time of every synthetic session start (2021-01-04 00:00 UTC),
/// shifted by up to 4 weeks per seed.
const BASE_SYSTEM_MS: i64 = 1_609_718_400_000;
const MIN_ACTIVE_MS: Millis = 20_000;
const MEAN_IDLE_EPISODE_MS: Millis = 180_000;
/// Longer than the slowest action (typed navigation, 1.6 s).
const ACTION_SPACING_MS: Millis = 2_000;

/// Hosts outside the built-in category lists.
pub const UNTRACKED_HOSTS: &[&str] = &[
    "recipes-daily.net",
    "garden-notes.org",
    "citytransit.info",
    "retro-games.io",
    "localweather.example",
    "quiltersguild.org",
    "homebrewforum.net",
    "birdwatch.club",
];

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("bad persona: {0}")]
    BadPersona(String),
    #[error("bad persona mix: {0}")]
    BadMix(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Persona {
    pub age_group: AgeGroup,
    pub mean_tabs: f64,
    pub tab_switch_rate_per_min: f64,
    pub idle_fraction: f64,
    pub session_minutes: f64,
    pub link_click_rate_per_min: f64,
    pub new_tab_probability: f64,
    pub referrer_trim_probability: f64,
}

impl Persona {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: &str| Err(SynthError::BadPersona(msg.to_string()));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.mean_tabs.is_finite() && self.mean_tabs >= 1.0) {
            return bad("meanTabs must be at least 1");
        }
        if !(self.tab_switch_rate_per_min.is_finite() && self.tab_switch_rate_per_min >= 0.0) {
            return bad("tabSwitchRatePerMin must be non-negative");
        }
        if !(self.link_click_rate_per_min.is_finite() && self.link_click_rate_per_min >= 0.0) {
            return bad("linkClickRatePerMin must be non-negative");
        }
        if !unit(self.idle_fraction) {
            return bad("idleFraction must lie in [0, 1]");
        }
        if !unit(self.new_tab_probability) {
            return bad("newTabProbability must lie in [0, 1]");
        }
        if !unit(self.referrer_trim_probability) {
            return bad("referrerTrimProbability must lie in [0, 1]");
        }
        if !(self.session_minutes.is_finite() && self.session_minutes >= 1.0 && self.session_minutes <= 24.0 * 60.0) {
            return bad("sessionMinutes must lie in [1, 1440]");
        }
        Ok(())
    }

    /// Single-tab, idle-free browsing by same-tab link clicks.
    pub fn linear(age_group: AgeGroup) -> Self {
        Self {
            age_group,
            mean_tabs: 1.0,
            tab_switch_rate_per_min: 0.0,
            idle_fraction: 0.0,
            session_minutes: 60.0,
            link_click_rate_per_min: 2.0,
            new_tab_probability: 0.0,
            referrer_trim_probability: 0.0,
        }
    }

    fn tab_cap(&self) -> usize {
        self.mean_tabs.round().max(1.0) as usize
    }
}

/// One persona per age bucket, youngest first, with tab switching falling
/// from 6 to 1 per minute.
pub fn default_personas() -> Vec<Persona> {
    AgeGroup::BUCKETS
        .iter()
        .enumerate()
        .map(|(i, &age_group)| {
            let rank = (6 - i) as f64;
            Persona {
                age_group,
                mean_tabs: 1.0 + rank,
                tab_switch_rate_per_min: rank,
                idle_fraction: 0.2,
                session_minutes: 60.0,
                link_click_rate_per_min: 2.0,
                new_tab_probability: 0.1 * rank,
                referrer_trim_probability: 0.1,
            }
        })
        .collect()
}

/// Uniform mix over [`default_personas`].
pub fn default_mix() -> Vec<(Persona, f64)> {
    let personas = default_personas();
    let w = 1.0 / personas.len() as f64;
    personas.into_iter().map(|p| (p, w)).collect()
}

#[derive(Debug, Clone, Copy)]
enum Item {
    Refocus,
    Unfocus,
    Input,
    ClockChange(i64),
    Click,
    Switch,
}

struct OpenTab {
    id: TabId,
    url: String,
    depth: u8,
}

struct Session<'a> {
    persona: &'a Persona,
    rng: ChaCha8Rng,
    events: Vec<TraceEvent>,
    tabs: Vec<OpenTab>,
    active: usize,
    next_tab: u32,
    /// No events may be placed on the active tab before this time.
    busy_until: Millis,
}

const WINDOW: WindowId = WindowId(1);

impl Session<'_> {
    fn push(&mut self, t: Millis, kind: EventKind) {
        self.events.push(TraceEvent::new(t, kind));
    }

    fn uniform(&mut self, lo: Millis, hi: Millis) -> Millis {
        self.rng.random_range(lo..=hi)
    }

    fn pick_host(&mut self, current: Option<&str>) -> String {
        if let Some(host) = current.and_then(host_part) {
            if self.rng.random_bool(0.4) {
                return host.to_string();
            }
        }
        if self.rng.random_bool(0.7) {
            let (_, domains) = BUILTIN_LISTS[self.rng.random_range(0..BUILTIN_LISTS.len())];
            domains[self.rng.random_range(0..domains.len())].to_string()
        } else {
            UNTRACKED_HOSTS[self.rng.random_range(0..UNTRACKED_HOSTS.len())].to_string()
        }
    }

    fn pick_url(&mut self, current: Option<&str>) -> String {
        let host = self.pick_host(current);
        format!("https://{host}/page/{}", self.rng.random_range(0..40u32))
    }

    fn open_tab(&mut self, t: Millis) -> usize {
        let id = TabId(self.next_tab);
        self.next_tab += 1;
        self.push(t, EventKind::TabOpened { tab_id: id, window_id: WINDOW });
        self.tabs.push(OpenTab {
            id,
            url: String::new(),
            depth: 0,
        });
        self.tabs.len() - 1
    }

    fn activate(&mut self, t: Millis, index: usize) {
        self.active = index;
        let tab_id = self.tabs[index].id;
        self.push(t, EventKind::TabActivated { window_id: WINDOW, tab_id });
    }

    fn close_oldest_background(&mut self, t: Millis) {
        let victim = (0..self.tabs.len()).find(|&i| i != self.active).expect("a background tab exists");
        let tab = self.tabs.remove(victim);
        if victim < self.active {
            self.active -= 1;
        }
        self.push(t, EventKind::TabClosed { tab_id: tab.id });
    }

    fn load(&mut self, t: Millis, index: usize, url: String, referrer: Option<String>, next_action: Millis) {
        let tab_id = self.tabs[index].id;
        self.push(
            t,
            EventKind::PageLoad {
                tab_id,
                window_id: WINDOW,
                url: url.clone(),
                http_referrer: referrer,
            },
        );
        self.tabs[index].url = url.clone();
        self.tabs[index].depth = 0;
        self.busy_until = t;

        for _ in 0..self.rng.random_range(0..=3u32) {
            let shown = t + self.uniform(100, 1_500);
            let hidden = (shown + self.uniform(500, 30_000)).min(next_action.saturating_sub(1));
            if hidden <= shown {
                continue;
            }
            let link = self.pick_url(Some(&url));
            let area_px = self.uniform(500, 40_000);
            self.push(shown, EventKind::LinkVisible { tab_id, url: link.clone(), area_px });
            self.push(hidden, EventKind::LinkHidden { tab_id, url: link });
        }
        if self.rng.random_bool(0.03) && t + 50 < next_action {
            let platform = [Platform::Facebook, Platform::Twitter, Platform::Reddit][self.rng.random_range(0..3)];
            let action = [
                ShareAction::Post,
                ShareAction::Reshare,
                ShareAction::Favorite,
                ShareAction::Comment,
                ShareAction::Vote,
            ][self.rng.random_range(0..5)];
            let audience = [Audience::Public, Audience::Restricted, Audience::Unknown][self.rng.random_range(0..3)];
            self.push(
                t + 50,
                EventKind::SocialShare {
                    platform,
                    action,
                    url: Some(url),
                    audience,
                    reshare: action == ShareAction::Reshare,
                },
            );
        }
    }

    fn referrer(&mut self, source: &str) -> String {
        if self.rng.random_bool(self.persona.referrer_trim_probability) {
            host_part(source).map_or_else(|| source.to_string(), |h| format!("https://{h}/"))
        } else {
            source.to_string()
        }
    }

    fn click(&mut self, x: Millis, next_action: Millis) {
        let source = self.active;
        let source_url = self.tabs[source].url.clone();
        let target = self.pick_url(Some(&source_url));
        let referrer = Some(self.referrer(&source_url));
        let d1 = self.uniform(50, 300);
        let d2 = d1 + self.uniform(100, 600);
        let new_tab = self.persona.tab_cap() > 1 && self.rng.random_bool(self.persona.new_tab_probability);
        let source_tab_id = self.tabs[source].id;
        if new_tab {
            if self.tabs.len() >= self.persona.tab_cap() {
                self.close_oldest_background(x);
            }
            self.push(
                x,
                EventKind::LinkClick {
                    source_tab_id,
                    target_url: target.clone(),
                    disposition: Disposition::NewTab,
                },
            );
            let index = self.open_tab(x + d1);
            self.activate(x + d1, index);
            self.load(x + d2, index, target, referrer, next_action);
        } else {
            self.push(
                x,
                EventKind::LinkClick {
                    source_tab_id,
                    target_url: target.clone(),
                    disposition: Disposition::SameTab,
                },
            );
            self.load(x + d2, source, target, referrer, next_action);
        }
    }

    fn typed(&mut self, x: Millis, index: usize, next_action: Millis) {
        let current = self.tabs[index].url.clone();
        let url = self.pick_url((!current.is_empty()).then_some(current.as_str()));
        let d1 = self.uniform(200, 1_000);
        let d2 = d1 + self.uniform(100, 600);
        let tab_id = self.tabs[index].id;
        self.push(x + d1, EventKind::AddressBarEntry { tab_id, url: url.clone() });
        self.load(x + d2, index, url, None, next_action);
    }

    fn switch(&mut self, x: Millis, next_action: Millis) {
        let cap = self.persona.tab_cap();
        let n = self.tabs.len();
        if n > 1 && !(n < cap && self.rng.random_bool(0.25)) {
            let mut target = self.rng.random_range(0..n - 1);
            if target >= self.active {
                target += 1;
            }
            self.activate(x, target);
            self.busy_until = x;
        } else if n < cap {
            let index = self.open_tab(x);
            self.activate(x, index);
            self.typed(x, index, next_action);
        } else {
            let index = self.active;
            self.typed(x, index, next_action);
        }
    }
}

fn host_part(url: &str) -> Option<&str> {
    url.strip_prefix("https://")?.split('/').next()
}

/// Active segments `[start, end)` and idle episode lengths between them.
fn plan_segments(rng: &mut ChaCha8Rng, session_ms: Millis, idle_fraction: f64) -> Vec<(Millis, Millis)> {
    let threshold = DEFAULT_IDLE_THRESHOLD_MS;
    let mut idle_total = (idle_fraction * session_ms as f64).round() as Millis;
    let mut k = idle_total.div_ceil(MEAN_IDLE_EPISODE_MS);
    loop {
        let needed = k * threshold + (k + 1) * MIN_ACTIVE_MS;
        if k == 0 || needed < session_ms {
            idle_total = idle_total.min(session_ms.saturating_sub(needed));
            break;
        }
        k -= 1;
    }
    if idle_total == 0 {
        k = 0;
    }
    let active_total = session_ms - idle_total - k * threshold;
    let idle = split(rng, idle_total, k as usize, 0);
    let active = split(rng, active_total, k as usize + 1, MIN_ACTIVE_MS);

    let mut segments = Vec::with_capacity(active.len());
    let mut t = 0;
    for (i, a) in active.iter().enumerate() {
        segments.push((t, t + a));
        t += a;
        if let Some(l) = idle.get(i) {
            t += threshold + l;
        }
    }
    debug_assert_eq!(t, session_ms);
    segments
}

/// Splits `total` into `parts` random pieces of at least `min` each.
fn split(rng: &mut ChaCha8Rng, total: Millis, parts: usize, min: Millis) -> Vec<Millis> {
    if parts == 0 {
        return Vec::new();
    }
    let spare = total - min * parts as Millis;
    let weights: Vec<f64> = (0..parts).map(|_| 0.5 + rng.random::<f64>()).collect();
    let sum: f64 = weights.iter().sum();
    let mut out: Vec<Millis> = weights
        .iter()
        .map(|w| min + (spare as f64 * w / sum).floor() as Millis)
        .collect();
    let assigned: Millis = out.iter().sum();
    *out.last_mut().expect("parts > 0") += total - assigned;
    out
}

/// One synthetic session for `persona`.
pub fn generate_session(persona: &Persona, seed: u64) -> Result<Trace, SynthError> {
    persona.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let session_ms = (persona.session_minutes * 60_000.0).round() as Millis;
    let segments = plan_segments(&mut rng, session_ms, persona.idle_fraction);

    let mut items: Vec<(Millis, Item)> = Vec::new();
    for (i, &(start, end)) in segments.iter().enumerate() {
        if i > 0 {
            items.push((start, Item::Refocus));
        }
        let mut t = start;
        while t < end {
            items.push((t, Item::Input));
            t += rng.random_range(2_000..=8_000);
        }
        items.push((end, Item::Input));
        if let Some(&(next, _)) = segments.get(i + 1) {
            if rng.random_bool(0.5) {
                items.push((end + rng.random_range(1_000..=(next - end) / 2), Item::Unfocus));
            }
        }
    }

    let rate = (persona.link_click_rate_per_min + persona.tab_switch_rate_per_min) / 60_000.0;
    let click_share = if rate > 0.0 {
        persona.link_click_rate_per_min / 60_000.0 / rate
    } else {
        0.0
    };
    let mut actions = Vec::new();
    if rate > 0.0 {
        let gaps = Exp::new(rate).expect("positive rate");
        let mut last = 0;
        for &(start, end) in &segments {
            let latest = end.saturating_sub(ACTION_SPACING_MS);
            let mut t = start as f64;
            loop {
                t += gaps.sample(&mut rng);
                let x = (t as Millis).max(last + ACTION_SPACING_MS).max(2_000);
                if x > latest {
                    break;
                }
                let item = if rng.random_bool(click_share) { Item::Click } else { Item::Switch };
                actions.push((x, item));
                last = x;
            }
        }
    }
    let action_times: Vec<Millis> = actions.iter().map(|&(t, _)| t).collect();
    items.extend(actions);
    if rng.random_bool(0.1) {
        let at = rng.random_range(1..session_ms);
        let delta = if rng.random_bool(0.5) { 3_600_000 } else { -3_600_000 };
        items.push((at, Item::ClockChange(delta)));
    }
    items.sort_by_key(|&(t, item)| (t, matches!(item, Item::Input)));

    let shift = rng.random_range(0..28 * 86_400_000i64);
    let mut s = Session {
        persona,
        rng,
        events: Vec::new(),
        tabs: Vec::new(),
        active: 0,
        next_tab: 1,
        busy_until: 0,
    };
    s.push(0, EventKind::BrowserStartup { system_clock_ms: BASE_SYSTEM_MS + shift });
    let first = s.open_tab(0);
    s.push(0, EventKind::WindowFocusChanged { window_id: Some(WINDOW) });
    let next_action = action_times.first().copied().unwrap_or(session_ms);
    s.typed(0, first, next_action);

    let mut next_action_index = 0;
    for (t, item) in items {
        match item {
            Item::Input => {
                s.push(t, EventKind::InputActivity {});
                if t >= s.busy_until && s.rng.random_bool(0.15) {
                    let tab = &mut s.tabs[s.active];
                    if !tab.url.is_empty() && tab.depth < 100 {
                        let step = s.rng.random_range(5..=30u8);
                        let tab = &mut s.tabs[s.active];
                        tab.depth = tab.depth.saturating_add(step).min(100);
                        let (tab_id, depth_percent) = (tab.id, tab.depth);
                        s.push(t, EventKind::ScrollPosition { tab_id, depth_percent });
                    }
                }
            }
            Item::Unfocus => s.push(t, EventKind::WindowFocusChanged { window_id: None }),
            Item::Refocus => s.push(t, EventKind::WindowFocusChanged { window_id: Some(WINDOW) }),
            Item::ClockChange(delta_ms) => s.push(t, EventKind::SystemClockChange { delta_ms }),
            Item::Click | Item::Switch => {
                next_action_index += 1;
                let next = action_times.get(next_action_index).copied().unwrap_or(session_ms);
                s.push(t, EventKind::InputActivity {});
                if matches!(item, Item::Click) {
                    s.click(t, next);
                } else {
                    s.switch(t, next);
                }
            }
        }
    }
    s.push(session_ms, EventKind::BrowserShutdown {});
    let mut events = s.events;
    events.sort_by_key(|e| e.t);

    Ok(Trace {
        participant_id: "synthetic".to_string(),
        age_group: persona.age_group,
        comment: Some(format!("generator={GENERATOR} seed={seed}")),
        events,
    })
}

/// Generator stream for trace `index` of a panel seeded with `seed`.
pub fn panel_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Persona index and session seed of panel trace `index`.
pub fn panel_assignment(weights: &[f64], seed: u64, index: u64) -> (usize, u64) {
    let mut rng = panel_rng(seed, index);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = weights.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            chosen = i;
            break;
        }
    }
    (chosen, rng.random())
}

/// Client-side secret of panel participant `index`, 32 hex digits. Drawn
/// from a stream disjoint from the trace streams.
pub fn participant_secret(seed: u64, index: u64) -> String {
    let mut rng = panel_rng(seed ^ 0x5EC2_E75E_C2E7_5EC2, index);
    let bytes: [u8; 16] = rng.random();
    hex::encode(bytes)
}

pub fn participant_id(index: usize) -> String {
    format!("p{index:05}")
}

pub fn check_mix(mix: &[(Persona, f64)]) -> Result<(), SynthError> {
    if mix.is_empty() {
        return Err(SynthError::BadMix("empty persona mix".into()));
    }
    if mix.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
        return Err(SynthError::BadMix("weights must be finite and non-negative".into()));
    }
    let sum: f64 = mix.iter().map(|(_, w)| w).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SynthError::BadMix(format!("weights sum to {sum}, not 1")));
    }
    for (p, _) in mix {
        p.validate()?;
    }
    Ok(())
}

/// Panel trace `index`: persona drawn from the mix, session seeded from the
/// panel seed and index.
pub fn generate_panel_trace(mix: &[(Persona, f64)], seed: u64, index: usize) -> Result<Trace, SynthError> {
    let weights: Vec<f64> = mix.iter().map(|(_, w)| *w).collect();
    let (persona, session_seed) = panel_assignment(&weights, seed, index as u64);
    let mut trace = generate_session(&mix[persona].0, session_seed)?;
    trace.participant_id = participant_id(index);
    trace.comment = Some(format!(
        "generator={GENERATOR} seed={session_seed} panelSeed={seed} index={index} persona={persona}"
    ));
    Ok(trace)
}

/// `n` traces from `mix`, ordered by index.
pub fn generate_panel(mix: &[(Persona, f64)], n: usize, seed: u64) -> Result<Vec<Trace>, SynthError> {
    generate_panel_with(mix, n, seed, None)
}

/// [`generate_panel`] on at most `workers` threads.
pub fn generate_panel_with(
    mix: &[(Persona, f64)],
    n: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<Trace>, SynthError> {
    check_mix(mix)?;
    let indices: Vec<usize> = (0..n).collect();
    crate::panel::map(&indices, workers, |&i| generate_panel_trace(mix, seed, i))
        .into_iter()
        .collect()
}

/// An arbitrary structurally valid trace of at most `max_events` events
/// (at least 4), with timestamps on a 100 ms grid. Unlike
/// [`generate_session`] it follows no persona: tabs, windows, focus, loads
/// and input are mixed at random, which suits property tests.
pub fn random_trace(seed: u64, max_events: usize) -> Trace {
    const URLS: [&str; 6] = [
        "http://a.com/",
        "http://a.com/x",
        "https://b.org/p?q=1",
        "https://news.c.net/",
        "https://d.io/app#one",
        "https://d.io/app/two",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.random_range(4..=max_events.max(4));
    let mut state = crate::replay::BrowserState::default();
    let mut events = vec![
        TraceEvent::new(0, EventKind::BrowserStartup { system_clock_ms: BASE_SYSTEM_MS }),
        TraceEvent::new(0, EventKind::TabOpened { tab_id: TabId(1), window_id: WINDOW }),
        TraceEvent::new(0, EventKind::WindowFocusChanged { window_id: Some(WINDOW) }),
    ];
    for e in &events {
        state.apply(&e.kind).expect("opening events are valid");
    }
    let (mut next_tab, mut next_window) = (2u32, 2u32);
    let mut t: Millis = 0;
    let mut attempts = 0;
    while events.len() + 1 < target && attempts < 20 * max_events {
        attempts += 1;
        let tab = TabId(rng.random_range(1..next_tab));
        let window = WindowId(rng.random_range(1..next_window));
        let url = URLS[rng.random_range(0..URLS.len())].to_string();
        let kind = match rng.random_range(0..12) {
            0..=2 => EventKind::InputActivity {},
            3 => {
                let window_id = if rng.random_bool(0.2) {
                    next_window += 1;
                    WindowId(next_window - 1)
                } else {
                    window
                };
                next_tab += 1;
                EventKind::TabOpened { tab_id: TabId(next_tab - 1), window_id }
            }
            4 => match state.window_of(tab) {
                Some(window_id) => EventKind::TabActivated { window_id, tab_id: tab },
                None => continue,
            },
            5 => EventKind::TabClosed { tab_id: tab },
            6 => EventKind::WindowFocusChanged {
                window_id: rng.random_bool(0.8).then_some(window),
            },
            7 if rng.random_bool(0.2) => EventKind::WindowClosed { window_id: window },
            7 | 8 => match state.window_of(tab) {
                Some(window_id) => EventKind::PageLoad {
                    tab_id: tab,
                    window_id,
                    url,
                    http_referrer: rng.random_bool(0.5).then(|| URLS[0].to_string()),
                },
                None => continue,
            },
            9 => EventKind::LinkClick {
                source_tab_id: tab,
                target_url: url,
                disposition: [Disposition::SameTab, Disposition::NewTab, Disposition::NewWindow]
                    [rng.random_range(0..3)],
            },
            10 => EventKind::HistoryStateUpdate { tab_id: tab, new_url: url },
            _ => EventKind::ScrollPosition {
                tab_id: tab,
                depth_percent: rng.random_range(0..=100),
            },
        };
        if state.clone().apply(&kind).is_err() {
            continue;
        }
        state.apply(&kind).expect("checked on a copy");
        if rng.random_bool(0.7) {
            t += 100 * rng.random_range(0..=250u64);
        }
        events.push(TraceEvent::new(t, kind));
    }
    t += 100 * rng.random_range(0..=50u64);
    events.push(TraceEvent::new(t, EventKind::BrowserShutdown {}));
    Trace {
        participant_id: format!("r{seed}"),
        age_group: AgeGroup::Unknown,
        comment: Some(format!("generator={GENERATOR} seed={seed} random")),
        events,
    }
}
