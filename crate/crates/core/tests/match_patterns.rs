use webmeter::fixtures::{match_pattern_cases, PatternExpectation};
use webmeter::patterns::parse_pattern;

#[test]
fn conformance_table_passes() {
    let cases = match_pattern_cases();
    assert!(cases.len() >= 20);
    let mut failures = Vec::new();
    for (pattern, url, expected) in cases {
        let got = match parse_pattern(pattern) {
            Err(_) => PatternExpectation::Invalid,
            Ok(p) => match p.matches(url) {
                Ok(true) => PatternExpectation::Match,
                Ok(false) => PatternExpectation::NoMatch,
                Err(e) => panic!("{url}: {e}"),
            },
        };
        if got != expected {
            failures.push(format!("{pattern} / {url}: expected {expected:?}, got {got:?}"));
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn patterns_display_round_trip() {
    for (pattern, _, expected) in match_pattern_cases() {
        if expected == PatternExpectation::Invalid {
            continue;
        }
        let parsed = parse_pattern(pattern).unwrap();
        assert_eq!(parse_pattern(&parsed.to_string()).unwrap(), parsed);
    }
}
