mod support;

use tto_core::grid::{base_power_vector, GridModel};
use tto_core::Error;

#[test]
fn ieee14_shape() {
    let g = support::fixture("ieee14.json");
    assert_eq!(g.node_count(), 14);
    assert_eq!(g.branch_count(), 20);
    assert_eq!(g.contingencies.len(), 19);
    assert_eq!(g.substations.len(), 5);
    assert_eq!(g.busbar_outages.len(), 3);
    assert_eq!(g.node_id("1"), Some(g.slack));
}

#[test]
fn save_then_load_is_identity() {
    for name in ["ieee14.json", "ieee14_congested.json"] {
        let g = support::fixture(name);
        let text = g.to_json_string();
        let back = GridModel::from_json_str(&text).unwrap();
        assert_eq!(back.to_data(), g.to_data());
        assert_eq!(back.content_hash(), g.content_hash());
    }
}

#[test]
fn congested_fixture_only_tightens_limits() {
    let a = support::fixture("ieee14.json");
    let b = support::fixture("ieee14_congested.json");
    assert_ne!(a.content_hash(), b.content_hash());
    for (x, y) in a.branches.iter().zip(&b.branches) {
        assert!(y.limit_mw <= x.limit_mw, "{}", x.id);
        let relaxed = tto_core::grid::Branch {
            limit_mw: x.limit_mw,
            ..y.clone()
        };
        assert_eq!(&relaxed, x);
    }
    assert_eq!(a.injections, b.injections);
    assert_eq!(a.contingencies, b.contingencies);
}

#[test]
fn base_vector_balances_at_slack() {
    let g = support::fixture("ieee14.json");
    let p = base_power_vector(&g);
    assert!(p.iter().sum::<f64>().abs() < 1e-9);
    let loads: f64 = g.injections.iter().filter(|i| i.p_mw < 0.0).map(|i| -i.p_mw).sum();
    assert!((loads - 259.0).abs() < 1e-6, "total load {loads}");
}

#[test]
fn rejects_unknown_endpoint() {
    let text = support::fixture("ieee14.json").to_json_string().replacen("\"to\": \"2\"", "\"to\": \"99\"", 1);
    assert!(matches!(GridModel::from_json_str(&text), Err(Error::Validation(_))));
}

#[test]
fn rejects_unknown_field() {
    let text = support::fixture("ieee14.json").to_json_string().replacen("\"slack\"", "\"slak\"", 1);
    assert!(matches!(GridModel::from_json_str(&text), Err(Error::Parse(_))));
}
