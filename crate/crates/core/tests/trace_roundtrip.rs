use proptest::prelude::*;
use webmeter::synth::{generate_session, random_trace, Persona};
use webmeter::trace::{parse_trace, serialize_trace, validate_trace, AgeGroup};

fn persona() -> impl Strategy<Value = Persona> {
    (1.0f64..6.0, 0.0f64..6.0, 0.0f64..0.6, 1.0f64..8.0, 0.0f64..4.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(
        |(mean_tabs, switch, idle, minutes, clicks, new_tab, trim)| Persona {
            age_group: AgeGroup::From35To44,
            mean_tabs,
            tab_switch_rate_per_min: switch,
            idle_fraction: idle,
            session_minutes: minutes,
            link_click_rate_per_min: clicks,
            new_tab_probability: new_tab,
            referrer_trim_probability: trim,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_traces_round_trip_byte_identical(seed in any::<u64>(), max in 4usize..80) {
        let trace = random_trace(seed, max);
        let text = serialize_trace(&trace);
        let parsed = parse_trace(&text).unwrap();
        prop_assert_eq!(&parsed, &trace);
        prop_assert_eq!(serialize_trace(&parsed), text);
    }

    #[test]
    fn persona_sessions_round_trip_and_validate(p in persona(), seed in any::<u64>()) {
        let trace = generate_session(&p, seed).unwrap();
        prop_assert!(validate_trace(&trace).is_empty());
        let text = serialize_trace(&trace);
        prop_assert_eq!(serialize_trace(&parse_trace(&text).unwrap()), text);
    }
}
