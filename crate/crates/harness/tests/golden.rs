use cutlab::config::{StudyConfig, StudyKind};
use cutlab::oracle::{cross_check, oracle_report};
use cutlab::report::ConvergenceReport;
use cutlab::run_study;

const FIXTURE: &str = include_str!("fixtures/lemma59-commuting-d32.csv");

fn parse(csv: &str) -> Vec<(String, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let (key, value) = l.rsplit_once(',').unwrap();
            (key.to_string(), value.parse().unwrap())
        })
        .collect()
}

#[test]
fn lemma59_commuting_matches_fixture_byte_for_byte() {
    let cfg = StudyConfig::quick(StudyKind::Lemma59, "commuting", 32);
    let r = run_study(&cfg).unwrap();
    assert_eq!(r.to_csv(), FIXTURE);
}

#[test]
fn fixture_agrees_with_oracle() {
    let cfg = StudyConfig::quick(StudyKind::Lemma59, "commuting", 32);
    let oracle = oracle_report(&cfg).unwrap();
    let fixture = parse(FIXTURE);
    let expected = parse(&oracle.to_csv());
    assert_eq!(fixture.len(), expected.len());
    for ((k1, v1), (k2, v2)) in fixture.iter().zip(&expected) {
        assert_eq!(k1, k2);
        assert!((v1 - v2).abs() <= 1e-9 * v2.abs().max(1.0), "{k1}: {v1} vs {v2}");
    }
}

#[test]
fn json_round_trip_keeps_verdicts() {
    let cfg = StudyConfig::quick(StudyKind::Lemma59, "commuting", 32);
    let r = run_study(&cfg).unwrap();
    let back = ConvergenceReport::from_json(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
    assert!(cross_check(&back, &oracle_report(&cfg).unwrap(), 1e-9).is_empty());
}
