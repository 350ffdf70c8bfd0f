use fracbvp_web::{constants, kernel_section, solve};

#[test]
fn section_matches_known_values() {
    let out = kernel_section(1.5, 0.2, 0.75, 0.775, 1.0, 5).unwrap();
    assert_eq!(out.len(), 10);
    // k(1, 1) = β, and Φ(0) = k(0, 0) = 0.2 + √0.75/Γ(1.5)
    assert_eq!(out[4], 0.2);
    assert!((out[5] - 1.177_205_023_805_84).abs() < 1e-12);
    assert!(kernel_section(1.5, 0.2, 0.75, 0.775, 1.5, 5).is_err());
    assert!(kernel_section(2.5, 0.2, 0.75, 0.775, 0.5, 5)
        .unwrap_err()
        .contains("alpha"));
}

#[test]
fn constants_as_json() {
    let json: serde_json::Value = serde_json::from_str(&constants(1.5, 0.2, 0.75, 0.775).unwrap()).unwrap();
    assert!((json["m_hat"].as_f64().unwrap() - 1.370_520_285_583_32).abs() < 1e-8);
    assert!((json["c"].as_f64().unwrap() - 0.018_338_002_258_036).abs() < 1e-12);
}

#[test]
fn solve_from_config_text() {
    let cfg = include_str!("../../../configs/example.json")
        .replace("1000*max(u,0)^2", "1")
        .replace("1000*max(v,0)^2", "1");
    let json: serde_json::Value = serde_json::from_str(&solve(&cfg, 32, 1e-12, 10, 1.0).unwrap()).unwrap();
    assert_eq!(json["converged"], true);
    assert!((json["u"][0].as_f64().unwrap() - 0.688_602_511_902_92).abs() < 1e-10);
    assert!(solve("{}", 32, 1e-12, 10, 1.0).unwrap_err().contains("/equations"));
}
