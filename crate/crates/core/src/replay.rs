//! Browser tab/window/focus state reconstructed by replaying trace events.

use std::collections::BTreeMap;

use crate::trace::{EventKind, TabId, WindowId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateError {
    Dangling(String),
    DuplicateTab(String),
    TabNotInWindow { tab: TabId, window: WindowId },
}

#[derive(Debug, Clone, Default)]
struct WindowState {
    active_tab: Option<TabId>,
}

/// Open tabs and windows, the selected tab of each window, and the focused
/// window.
///
/// The first tab opened into a window with no selected tab becomes its
/// selected tab; closing the selected tab leaves the window without one until
/// the next `TabActivated`. Closing a window closes its tabs.
#[derive(Debug, Clone, Default)]
pub struct BrowserState {
    tabs: BTreeMap<TabId, WindowId>,
    windows: BTreeMap<WindowId, WindowState>,
    focused: Option<WindowId>,
}

impl BrowserState {
    pub fn window_of(&self, tab: TabId) -> Option<WindowId> {
        self.tabs.get(&tab).copied()
    }

    pub fn is_tab_open(&self, tab: TabId) -> bool {
        self.tabs.contains_key(&tab)
    }

    pub fn focused_window(&self) -> Option<WindowId> {
        self.focused
    }

    pub fn active_tab(&self, window: WindowId) -> Option<TabId> {
        self.windows.get(&window).and_then(|w| w.active_tab)
    }

    /// The selected tab of the focused window, if any.
    pub fn foreground_tab(&self) -> Option<TabId> {
        self.focused.and_then(|w| self.active_tab(w))
    }

    pub fn tabs_in(&self, window: WindowId) -> impl Iterator<Item = TabId> + '_ {
        self.tabs
            .iter()
            .filter(move |(_, w)| **w == window)
            .map(|(t, _)| *t)
    }

    fn require_tab(&self, tab: TabId) -> Result<WindowId, StateError> {
        self.window_of(tab)
            .ok_or_else(|| StateError::Dangling(tab.to_string()))
    }

    fn require_window(&self, window: WindowId) -> Result<(), StateError> {
        if self.windows.contains_key(&window) {
            Ok(())
        } else {
            Err(StateError::Dangling(window.to_string()))
        }
    }

    /// Applies one event. On a reference error the state is left unchanged
    /// for that event, so replay can continue past invalid records.
    pub fn apply(&mut self, kind: &EventKind) -> Result<(), StateError> {
        match kind {
            EventKind::TabOpened { tab_id, window_id } => {
                if self.tabs.contains_key(tab_id) {
                    return Err(StateError::DuplicateTab(tab_id.to_string()));
                }
                self.tabs.insert(*tab_id, *window_id);
                let window = self.windows.entry(*window_id).or_default();
                window.active_tab.get_or_insert(*tab_id);
            }
            EventKind::TabActivated { window_id, tab_id } => {
                self.require_window(*window_id)?;
                let owner = self.require_tab(*tab_id)?;
                if owner != *window_id {
                    return Err(StateError::TabNotInWindow {
                        tab: *tab_id,
                        window: *window_id,
                    });
                }
                if let Some(w) = self.windows.get_mut(window_id) {
                    w.active_tab = Some(*tab_id);
                }
            }
            EventKind::TabClosed { tab_id } => {
                let window = self.require_tab(*tab_id)?;
                self.tabs.remove(tab_id);
                if let Some(w) = self.windows.get_mut(&window) {
                    if w.active_tab == Some(*tab_id) {
                        w.active_tab = None;
                    }
                }
            }
            EventKind::WindowFocusChanged { window_id } => {
                if let Some(w) = window_id {
                    self.require_window(*w)?;
                }
                self.focused = *window_id;
            }
            EventKind::WindowClosed { window_id } => {
                self.require_window(*window_id)?;
                self.windows.remove(window_id);
                self.tabs.retain(|_, w| w != window_id);
                if self.focused == Some(*window_id) {
                    self.focused = None;
                }
            }
            EventKind::PageLoad {
                tab_id, window_id, ..
            } => {
                let owner = self.require_tab(*tab_id)?;
                if owner != *window_id {
                    return Err(StateError::TabNotInWindow {
                        tab: *tab_id,
                        window: *window_id,
                    });
                }
            }
            EventKind::AddressBarEntry { tab_id, .. }
            | EventKind::HistoryStateUpdate { tab_id, .. }
            | EventKind::ScrollPosition { tab_id, .. }
            | EventKind::LinkVisible { tab_id, .. }
            | EventKind::LinkHidden { tab_id, .. }
            | EventKind::LinkClick {
                source_tab_id: tab_id,
                ..
            } => {
                self.require_tab(*tab_id)?;
            }
            EventKind::BrowserStartup { .. }
            | EventKind::SystemClockChange { .. }
            | EventKind::InputActivity {}
            | EventKind::SocialShare { .. }
            | EventKind::BrowserShutdown {} => {}
        }
        Ok(())
    }
}
