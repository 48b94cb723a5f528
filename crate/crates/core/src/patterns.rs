//! URL match patterns (`<scheme>://<host><path>` globs and `<all_urls>`) and
//! URL canonicalization.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;
use url::Url;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("unsupported scheme in pattern {0:?}")]
    BadScheme(String),
    #[error("host wildcard must be `*` or a leading `*.` label in pattern {0:?}")]
    BadHostWildcard(String),
    #[error("pattern {0:?} has no host")]
    MissingHost(String),
    #[error("pattern {0:?} has no path")]
    MissingPath(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid absolute URL {0:?}")]
pub struct InvalidUrl(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemePattern {
    Http,
    Https,
    /// `*`: http or https.
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HostPattern {
    /// `*`
    Any,
    /// Exact host, optionally with a literal port.
    Exact { host: String, port: Option<u16> },
    /// `*.suffix`: the suffix host itself or any subdomain of it.
    Subdomains { suffix: String, port: Option<u16> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchPattern {
    AllUrls,
    Parts {
        scheme: SchemePattern,
        host: HostPattern,
        /// Glob over the path (query excluded); `*` matches any sequence.
        path: String,
    },
}

impl MatchPattern {
    pub fn all_urls() -> Self {
        MatchPattern::AllUrls
    }

    /// Whether `url` falls inside this pattern. Query string and fragment
    /// never take part in path matching.
    pub fn matches(&self, url: &str) -> Result<bool, InvalidUrl> {
        let parsed = parse_absolute(url)?;
        Ok(self.matches_url(&parsed))
    }

    pub fn matches_url(&self, url: &Url) -> bool {
        let scheme_ok = match self {
            MatchPattern::AllUrls | MatchPattern::Parts { scheme: SchemePattern::Any, .. } => {
                matches!(url.scheme(), "http" | "https")
            }
            MatchPattern::Parts { scheme: SchemePattern::Http, .. } => url.scheme() == "http",
            MatchPattern::Parts { scheme: SchemePattern::Https, .. } => url.scheme() == "https",
        };
        let MatchPattern::Parts { host, path, .. } = self else {
            return scheme_ok;
        };
        if !scheme_ok {
            return false;
        }
        let Some(url_host) = url.host_str() else {
            return false;
        };
        let url_port = url.port();
        let host_ok = match host {
            HostPattern::Any => url_port.is_none(),
            HostPattern::Exact { host, port } => url_host == host && url_port == *port,
            HostPattern::Subdomains { suffix, port } => {
                let subdomain = url_host
                    .strip_suffix(suffix.as_str())
                    .is_some_and(|rest| rest.ends_with('.'));
                (url_host == suffix || subdomain) && url_port == *port
            }
        };
        host_ok && glob_match(path, &canonical_path(url.path()))
    }
}

impl FromStr for MatchPattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_pattern(s)
    }
}

impl fmt::Display for MatchPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchPattern::AllUrls => f.write_str("<all_urls>"),
            MatchPattern::Parts { scheme, host, path } => {
                let scheme = match scheme {
                    SchemePattern::Http => "http",
                    SchemePattern::Https => "https",
                    SchemePattern::Any => "*",
                };
                write!(f, "{scheme}://")?;
                let port = match host {
                    HostPattern::Any => {
                        f.write_str("*")?;
                        None
                    }
                    HostPattern::Exact { host, port } => {
                        f.write_str(host)?;
                        *port
                    }
                    HostPattern::Subdomains { suffix, port } => {
                        write!(f, "*.{suffix}")?;
                        *port
                    }
                };
                if let Some(port) = port {
                    write!(f, ":{port}")?;
                }
                f.write_str(path)
            }
        }
    }
}

pub fn parse_pattern(text: &str) -> Result<MatchPattern, PatternError> {
    let text = text.trim();
    if text == "<all_urls>" {
        return Ok(MatchPattern::AllUrls);
    }
    let bad_scheme = || PatternError::BadScheme(text.to_string());
    let (scheme, rest) = text.split_once("://").ok_or_else(bad_scheme)?;
    let scheme = match scheme {
        "http" => SchemePattern::Http,
        "https" => SchemePattern::Https,
        "*" => SchemePattern::Any,
        _ => return Err(bad_scheme()),
    };

    let (authority, path) = match rest.find('/') {
        Some(i) => rest.split_at(i),
        None if rest.is_empty() => return Err(PatternError::MissingHost(text.to_string())),
        None => return Err(PatternError::MissingPath(text.to_string())),
    };
    if authority.is_empty() {
        return Err(PatternError::MissingHost(text.to_string()));
    }

    let (host, port) = match authority.rsplit_once(':') {
        Some((h, p)) if !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()) => {
            let port = p
                .parse::<u16>()
                .map_err(|_| PatternError::MissingHost(text.to_string()))?;
            (h, Some(port))
        }
        _ => (authority, None),
    };
    let host = host.to_ascii_lowercase();
    let bad_host = || PatternError::BadHostWildcard(text.to_string());
    let host = if host == "*" {
        if port.is_some() {
            return Err(bad_host());
        }
        HostPattern::Any
    } else if let Some(suffix) = host.strip_prefix("*.") {
        if suffix.is_empty() || suffix.contains('*') {
            return Err(bad_host());
        }
        HostPattern::Subdomains {
            suffix: suffix.to_string(),
            port: strip_default_port(scheme, port),
        }
    } else if host.contains('*') {
        return Err(bad_host());
    } else if host.is_empty() {
        return Err(PatternError::MissingHost(text.to_string()));
    } else {
        HostPattern::Exact {
            host,
            port: strip_default_port(scheme, port),
        }
    };

    Ok(MatchPattern::Parts {
        scheme,
        host,
        path: canonical_path(path),
    })
}

fn strip_default_port(scheme: SchemePattern, port: Option<u16>) -> Option<u16> {
    match (scheme, port) {
        (SchemePattern::Http, Some(80)) | (SchemePattern::Https, Some(443)) => None,
        _ => port,
    }
}

/// Newline-separated patterns; blank lines and `#` comments are skipped.
/// Errors carry the 1-based line number.
pub fn parse_pattern_list(text: &str) -> Result<Vec<MatchPattern>, (usize, PatternError)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or("").trim();
            (!line.is_empty()).then(|| parse_pattern(line).map_err(|e| (i + 1, e)))
        })
        .collect()
}

/// True when any pattern in `scope` matches.
pub fn in_scope(scope: &[MatchPattern], url: &Url) -> bool {
    scope.iter().any(|p| p.matches_url(url))
}

/// Glob with `*` as the only metacharacter, anchored at both ends.
fn glob_match(pattern: &str, text: &str) -> bool {
    let p = pattern.as_bytes();
    let t = text.as_bytes();
    let (mut pi, mut ti) = (0, 0);
    let mut backtrack: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && p[pi] == b'*' {
            backtrack = Some((pi, ti));
            pi += 1;
        } else if pi < p.len() && p[pi] == t[ti] {
            pi += 1;
            ti += 1;
        } else if let Some((star, matched)) = backtrack {
            pi = star + 1;
            ti = matched + 1;
            backtrack = Some((star, matched + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|b| *b == b'*')
}

pub(crate) fn parse_absolute(url: &str) -> Result<Url, InvalidUrl> {
    let parsed = Url::parse(url.trim()).map_err(|_| InvalidUrl(url.to_string()))?;
    if parsed.cannot_be_a_base() {
        return Err(InvalidUrl(url.to_string()));
    }
    Ok(parsed)
}

/// Uppercases the hex digits of every percent escape.
fn canonical_path(path: &str) -> String {
    let bytes = path.as_bytes();
    let mut out = String::with_capacity(path.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%'
            && i + 2 < bytes.len()
            && bytes[i + 1].is_ascii_hexdigit()
            && bytes[i + 2].is_ascii_hexdigit()
        {
            out.push('%');
            out.push(bytes[i + 1].to_ascii_uppercase() as char);
            out.push(bytes[i + 2].to_ascii_uppercase() as char);
            i += 3;
        } else {
            let ch = path[i..].chars().next().expect("in bounds");
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    out
}

/// Canonical text of an absolute URL: lowercase scheme and host, default
/// port, query and fragment removed, empty path as `/`, percent escapes
/// uppercased.
pub fn normalize_url(url: &str) -> Result<String, InvalidUrl> {
    normalize_parsed(parse_absolute(url)?)
}

pub(crate) fn normalize_parsed(mut url: Url) -> Result<String, InvalidUrl> {
    url.set_fragment(None);
    url.set_query(None);
    let path = canonical_path(url.path());
    let path = if path.is_empty() { "/".to_string() } else { path };
    url.set_path(&path);
    Ok(url.to_string())
}

/// Host of an absolute URL, lowercased.
pub fn host_of(url: &str) -> Option<String> {
    parse_absolute(url).ok()?.host_str().map(str::to_string)
}

/// Two-label public suffixes under which registrations sit one label deeper.
const MULTI_LABEL_SUFFIXES: &[&str] = &[
    "co.uk", "org.uk", "ac.uk", "gov.uk", "com.au", "net.au", "org.au", "co.nz", "co.jp",
    "com.br", "com.cn", "co.in", "co.za", "com.mx",
];

/// Registrable domain (eTLD+1) using a small built-in suffix table.
pub fn registrable_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    if host.parse::<std::net::IpAddr>().is_ok() {
        return host;
    }
    let labels: Vec<&str> = host.split('.').collect();
    let take = if labels.len() >= 3
        && MULTI_LABEL_SUFFIXES.contains(&labels[labels.len() - 2..].join(".").as_str())
    {
        3
    } else {
        2
    };
    labels[labels.len().saturating_sub(take)..].join(".")
}
