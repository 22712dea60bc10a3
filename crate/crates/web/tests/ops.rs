use phasewave_web::{divisors_json, solve_json, sweep_json};

#[test]
fn solve_returns_a_profile_grid() {
    let v = solve_json("toda", 0.9, &[0.01, 0.01], 6, 16).unwrap();
    assert_eq!(v["nu"], 2);
    assert_eq!(v["profile"].as_array().unwrap().len(), 256);
    assert!(v["p_residual"].as_f64().unwrap() < 1e-10);
    let (w, w0) = (v["omega"][0].as_f64().unwrap(), v["omega0"][0].as_f64().unwrap());
    assert!((w - w0).abs() < 1e-3);
}

#[test]
fn sweep_shift_grows_quadratically() {
    let v = sweep_json("quadratic", 0.9, &[1.0, 1.0], 1e-3, 1e-2, 3, 6).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let shift = |i: usize| rows[i]["shift"][0].as_f64().unwrap().abs();
    let slope = (shift(2) / shift(0)).ln() / 10f64.ln();
    assert!((slope - 2.0).abs() < 0.1, "{slope}");
}

#[test]
fn divisor_map_covers_the_square() {
    let v = divisors_json("cubic", 0.9, 5, 0.0).unwrap();
    let margin = v["margin"].as_array().unwrap();
    assert_eq!(margin.len(), 121);
    assert!(margin[60].is_null());
    assert_eq!(v["tau"], 3.0);
    assert_eq!(v["a4_ok"], true);
}

#[test]
fn bad_input_is_reported() {
    assert!(solve_json("morse", 0.9, &[0.01], 6, 16).is_err());
    assert!(solve_json("toda", 2.0 / 3.0, &[0.01, 0.01], 6, 16).unwrap_err().contains("A2"));
    assert!(sweep_json("toda", 0.9, &[1.0, 1.0], 0.0, 1e-2, 3, 6).is_err());
}
