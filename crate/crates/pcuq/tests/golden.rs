//! Golden-file regression for the toy leakage model: the median-parameter
//! curve is frozen at 17 significant digits. Regenerate with
//! `UPDATE_GOLDEN=1 cargo test -p pcuq --test golden` after an intentional
//! formula change.

use std::path::Path;

use pcuq::models::{extract_qois, toy_leakage, ParameterSpec, DEFAULT_ARRIVAL_THRESHOLD};
use pcuq::util::fmt_g17;

fn golden_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/toy_median_curve.csv")
}

fn median_curve_csv() -> (Vec<f64>, Vec<f64>, String) {
    let spec = ParameterSpec::leakage_benchmark();
    let times: Vec<f64> = (0..=60).map(|i| 25.0 * i as f64).collect();
    let series = toy_leakage(&spec.medians(), &times).unwrap();
    let mut body = String::from("time,q_leak\n");
    for (t, v) in series.times().iter().zip(series.values()) {
        body.push_str(&fmt_g17(*t));
        body.push(',');
        body.push_str(&fmt_g17(*v));
        body.push('\n');
    }
    (times, series.values().to_vec(), body)
}

#[test]
fn toy_median_curve_matches_golden_file() {
    let (_, _, body) = median_curve_csv();
    let path = golden_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &body).unwrap();
        return;
    }
    let golden = std::fs::read_to_string(&path)
        .expect("golden file missing; regenerate with UPDATE_GOLDEN=1");
    assert_eq!(golden, body, "median curve drifted from the golden file");
}

#[test]
fn qois_are_consistent_with_the_golden_curve() {
    let path = golden_path();
    let golden = std::fs::read_to_string(&path)
        .expect("golden file missing; regenerate with UPDATE_GOLDEN=1");
    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in golden.lines().skip(1) {
        let mut fields = line.split(',');
        times.push(fields.next().unwrap().parse::<f64>().unwrap());
        values.push(fields.next().unwrap().parse::<f64>().unwrap());
    }
    let from_golden = extract_qois(
        &pcuq::models::TimeSeriesOutput::new(times, values).unwrap(),
        DEFAULT_ARRIVAL_THRESHOLD,
    );

    let (direct_times, direct_values, _) = median_curve_csv();
    let direct = extract_qois(
        &pcuq::models::TimeSeriesOutput::new(direct_times, direct_values).unwrap(),
        DEFAULT_ARRIVAL_THRESHOLD,
    );
    assert_eq!(from_golden.t_arrival.to_bits(), direct.t_arrival.to_bits());
    assert_eq!(from_golden.q_max.to_bits(), direct.q_max.to_bits());
    assert_eq!(from_golden.t_maxleak.to_bits(), direct.t_maxleak.to_bits());
    assert!(!direct.censored);
    // the median curve crosses the threshold early and peaks inside the horizon
    assert!(direct.t_arrival > 0.0 && direct.t_arrival < 300.0);
    assert!(direct.t_maxleak > direct.t_arrival);
}
