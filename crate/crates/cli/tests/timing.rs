use std::fs;
use std::process::Command;

use mtsvm_cli::calibrate::{fit_calibration, Calibration};
use mtsvm::Problem;

#[test]
fn planted_delay_model_is_recovered() {
    let planted = [1.8e-9, 9.6e-9, 1.4e-9, 3.0e-7];
    let mut samples = Vec::new();
    for n in [50, 100, 200, 400] {
        for d in [25, 50, 100, 200] {
            let mu = planted[0] * (n * d) as f64 + planted[1] * n as f64 + planted[2] * d as f64 + planted[3];
            samples.push(((n, d), vec![mu; 5]));
        }
    }
    let c = fit_calibration(Problem::Classification, &samples).unwrap();
    let got = [c.delay.c_nd, c.delay.c_n, c.delay.c_d, c.delay.c_0];
    for (g, p) in got.iter().zip(planted) {
        assert!((g - p).abs() <= 0.01 * p, "{g} vs {p}");
    }
    assert!(c.delay.sigma_ratio < 1e-12);
}

// Wall-clock measurements share one test so they do not compete for cores.
#[test]
fn real_timings_follow_the_linear_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cal.toml");
    let o = Command::new(env!("CARGO_BIN_EXE_mtsvm"))
        .args(["calibrate-delays", "--repetitions", "5", "--output", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c: Calibration = toml::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(c.fit.points.len(), 16);
    assert!(c.fit.r_squared >= 0.95, "calibration fit R2 {}", c.fit.r_squared);
    assert!(c.delay.c_nd > 0.0);

    let report = tmp.path().join("bench.json");
    let o = Command::new(env!("CARGO_BIN_EXE_mtsvm"))
        .args(["bench", "--sizes", "8x3", "--repetitions", "1", "--output", report.to_str().unwrap()])
        .output()
        .unwrap();
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 3, "bench exit {code}");
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 1);
    assert_eq!(json["passed"].as_bool().unwrap(), code == 0);
}
