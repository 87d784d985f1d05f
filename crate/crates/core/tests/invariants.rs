use geobench::cli::{simulate, SimOptions};
use geobench::config::RunConfig;
use geobench::metrics::RunReport;
use geobench::protocols::Registry;

fn run(protocol: &str, rtt_ms: f64) -> RunReport {
    let json = format!(
        r#"{{"schema_version": 1, "protocol": "{protocol}", "seed": 11,
  "setup": {{"duration_s": 4, "warmup_s": 1, "client_timeout_s": 30, "mean_rtt_ms": {rtt_ms},
            "arrival": {{"mode": "open", "rate": 200}},
            "workload": {{"kind": "ycsb", "lsh_pct": 0.5, "fsh_pct": 0.0, "mh_pct": 0.5, "mp_pct": 1.0}}}}}}"#
    );
    let cfg = RunConfig::from_json(&json).unwrap();
    simulate(&cfg, &Registry::with_defaults(), SimOptions::default()).unwrap()
}

fn p50(r: &RunReport, class: &str) -> f64 {
    r.latency[class]
        .p50_ms
        .unwrap_or_else(|| panic!("no {class} commits"))
}

#[test]
fn wan_scaling_moves_multi_home_but_not_local_latency() {
    let near = run("home_aware", 111.0);
    let far = run("home_aware", 1110.0);
    let (lsh_near, lsh_far) = (p50(&near, "lsh"), p50(&far, "lsh"));
    let (mh_near, mh_far) = (p50(&near, "mh"), p50(&far, "mh"));
    assert!(
        (lsh_far - lsh_near).abs() < 0.05 * lsh_near,
        "LSH p50 {lsh_near:.3} -> {lsh_far:.3} ms"
    );
    assert!(
        mh_far >= 5.0 * mh_near,
        "MH p50 {mh_near:.1} -> {mh_far:.1} ms"
    );
}

#[test]
fn every_submission_is_accounted_for() {
    for protocol in Registry::with_defaults().names() {
        let r = run(protocol, 111.0);
        let t = r.totals;
        assert!(t.submitted > 0);
        assert_eq!(
            t.submitted,
            t.committed + t.aborted + t.rejected + r.in_flight,
            "{protocol}: {t:?} in flight {}",
            r.in_flight
        );
    }
}
