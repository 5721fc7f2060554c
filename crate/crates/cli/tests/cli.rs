use std::io::Write;
use std::process::{Command, Output, Stdio};

fn zerofreq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zerofreq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn json(args: &[&str]) -> serde_json::Value {
    let o = zerofreq(args);
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(&o)))
}

#[test]
fn estimate_scrapie_wlrm() {
    let o = zerofreq(&["estimate", "scrapie", "--method", "wlrm", "--m", "auto"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let row = out.lines().find(|l| l.starts_with("WLRM")).unwrap();
    let cols: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(cols[1], "8");
    assert_eq!(cols[2], "459");
    assert_eq!(cols[5], "0.298");
    let se: f64 = cols[4].parse().unwrap();
    assert!((se - 112.0).abs() <= 0.5);
}

#[test]
fn estimate_scrapie_chao() {
    let v = json(&["estimate", "scrapie", "--method", "chao", "--format", "json"]);
    let r = &v["results"][0];
    assert_eq!(r["method"], "Chao");
    assert_eq!(r["n_hat"].as_f64().unwrap().round(), 353.0);
}

#[test]
fn invalid_chao_bunge_reports_raw_value_and_exit_2() {
    let o = zerofreq(&["estimate", "meth", "--method", "chao-bunge"]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    let row = out.lines().find(|l| l.starts_with("ChaoBunge")).unwrap();
    assert!(row.contains('*') && row.contains("no ("), "{row}");
    let v = json(&["estimate", "meth", "--method", "chao-bunge", "--format", "json"]);
    assert_eq!(v["results"][0]["valid"], false);
    assert!(v["results"][0]["n_hat"].is_number());
}

#[test]
fn all_methods_on_every_dataset_never_abort() {
    for d in ["meth", "polyps_low", "polyps_high", "scrapie", "butterfly", "microbial"] {
        let o = zerofreq(&["estimate", d, "--method", "all", "--format", "json"]);
        assert!(matches!(o.status.code(), Some(0 | 2)), "{d}: {:?}", o.status);
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let results = v["results"].as_array().unwrap();
        assert_eq!(results.len(), 5, "{d}");
        for r in results {
            assert!(r["valid"].is_boolean());
            assert_eq!(r["valid"].as_bool().unwrap(), r["invalid_reason"].is_null(), "{d}: {r}");
        }
    }
}

/// Field names and types documented in docs/json.md.
#[test]
fn json_follows_documented_schema() {
    let v = json(&["estimate", "polyps_low", "--method", "all", "--format", "json", "--se", "bootstrap", "--bootstrap", "50"]);
    assert!(v["input"].is_string());
    assert!(v["n_observed"].is_number());
    assert!(v["weights"].is_string());
    assert_eq!(v["se_source"], "bootstrap");
    assert!(v["warnings"].is_array());
    let keys = [
        "method", "m", "valid", "invalid_reason", "n_hat", "f0_hat", "se", "se_unscaled", "gof", "fit",
        "implied_nb", "ztnb", "bootstrap",
    ];
    for r in v["results"].as_array().unwrap() {
        let obj = r.as_object().unwrap();
        let mut got: Vec<&str> = obj.keys().map(String::as_str).collect();
        got.sort_unstable();
        let mut want = keys.to_vec();
        want.sort_unstable();
        assert_eq!(got, want);
        assert!(r["m"].is_u64());
    }
    let w = &v["results"][0];
    assert_eq!(w["method"], "WLRM");
    for k in ["chisq", "df", "p_value", "gap_cells"] {
        assert!(!w["gof"][k].is_null(), "gof.{k}");
    }
    for k in ["gamma", "delta", "dispersion", "n_points", "xs"] {
        assert!(!w["fit"][k].is_null(), "fit.{k}");
    }
    for k in ["b", "seed", "se", "level", "ci_low", "ci_high", "failures", "flagged"] {
        assert!(!w["bootstrap"][k].is_null(), "bootstrap.{k}");
    }
    // Round trip: re-serialising the parsed document gives the same value.
    let again: serde_json::Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(again, v);
}

#[test]
fn estimate_is_deterministic_under_seed() {
    let args = ["estimate", "butterfly", "--m", "8", "--se", "bootstrap", "--bootstrap", "200", "--seed", "9", "--format", "csv"];
    assert_eq!(zerofreq(&args).stdout, zerofreq(&args).stdout);
}

#[test]
fn csv_estimate_has_header() {
    let o = zerofreq(&["estimate", "butterfly", "--method", "wlrm,chao", "--m", "8", "--format", "csv"]);
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["method", "m", "n_hat", "f0_hat", "se", "p_value", "valid", "reason"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][2].parse::<f64>().unwrap().round(), 746.0);
}

#[test]
fn ratio_meth_log_with_fit() {
    let o = zerofreq(&["ratio", "meth", "--log", "--with-fit"]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["x", "f_x", "f_next", "log_ratio", "fitted"]);
    assert_eq!(rows.len(), 9);
    let first: f64 = rows[0][3].parse().unwrap();
    assert!((first - (2.0f64 * 163.0 / 3114.0).ln()).abs() < 1e-12);
    let fitted: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    let step = fitted[1] - fitted[0];
    for w in fitted.windows(2) {
        assert!((w[1] - w[0] - step).abs() < 1e-9);
    }
}

#[test]
fn ratio_of_constant_table_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_zerofreq"))
        .args(["ratio", "-", "--m", "4"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"1 120\n2 60\n3 20\n4 5\n").unwrap();
    let o = child.wait_with_output().unwrap();
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!((r[3].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn ratio_butterfly_m8_has_seven_rows() {
    let (_, rows) = csv_rows(&stdout(&zerofreq(&["ratio", "butterfly", "--m", "8"])));
    assert_eq!(rows.len(), 7);
}

#[test]
fn gof_polyps() {
    let v = json(&["gof", "polyps_low", "--format", "json"]);
    assert_eq!(v["m"], 9);
    assert!((v["p_value"].as_f64().unwrap() - 0.340).abs() < 0.05);

    let o = zerofreq(&["gof", "polyps_high", "--m", "9", "--format", "csv"]);
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["x", "observed", "fitted", "residual", "gap"]);
    assert_eq!(rows.len(), 9);
    let v = json(&["gof", "polyps_high", "--m", "9", "--format", "json"]);
    assert!((v["p_value"].as_f64().unwrap() - 0.001).abs() < 0.05);
}

#[test]
fn gof_exact_fit() {
    let dir = std::env::temp_dir().join(format!("zerofreq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("exact.freq");
    std::fs::write(&path, "1 100\n2 50\n3 10\n").unwrap();
    let v = json(&["gof", path.to_str().unwrap(), "--m", "3", "--format", "json"]);
    assert!(v["chisq"].as_f64().unwrap().abs() < 1e-12);
    assert!((v["p_value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn sensitivity_sweep_rows() {
    let o = zerofreq(&["sensitivity", "polyps_low", "--methods", "wlrm", "--m-range", "3..10"]);
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["m", "wlrm", "wlrm_valid"]);
    let got: Vec<f64> = rows.iter().map(|r| r[1].parse::<f64>().unwrap().round()).collect();
    assert_eq!(got, [609.0, 525.0, 509.0, 523.0, 519.0, 503.0, 495.0, 495.0]);

    let o = zerofreq(&["sensitivity", "microbial", "--methods", "chao-bunge", "--m-range", "6"]);
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows[0][1].parse::<f64>().unwrap().round(), -240.0);
    assert_eq!(rows[0][2], "false");

    let o = zerofreq(&["sensitivity", "butterfly", "--m-range", "8"]);
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows[0][1].parse::<f64>().unwrap().round(), 746.0);
    assert_eq!(rows[0][3].parse::<f64>().unwrap().round(), 746.0);

    assert_eq!(zerofreq(&["sensitivity", "butterfly", "--m-range", "2..5"]).status.code(), Some(1));
}

#[test]
fn simulate_writes_report() {
    let dir = std::env::temp_dir().join(format!("zerofreq-sim-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let spec = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/weighting.toml");
    let out = dir.join("report.csv");
    let o = zerofreq(&["simulate", spec, "--replicates", "20", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let (header, rows) = csv_rows(&text);
    assert_eq!(header[0], "study");
    // Two population sizes times three weighting schemes.
    assert_eq!(rows.len(), 6);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn datasets_listing_and_source() {
    let out = stdout(&zerofreq(&["datasets"]));
    for (name, n) in [("meth", 3345), ("polyps_low", 299), ("polyps_high", 341), ("scrapie", 118), ("butterfly", 620), ("microbial", 84)] {
        let line = out.lines().find(|l| l.starts_with(name)).unwrap();
        assert_eq!(line.split_whitespace().nth(1).unwrap(), n.to_string());
    }
    assert!(stdout(&zerofreq(&["datasets", "butterfly"])).contains(">24 119"));
}

#[test]
fn input_errors_exit_1() {
    assert_eq!(zerofreq(&["estimate", "no_such_dataset"]).status.code(), Some(1));
    assert_eq!(zerofreq(&["estimate", "scrapie", "--m", "1"]).status.code(), Some(1));
    assert_eq!(zerofreq(&["estimate", "scrapie", "--method", "bogus"]).status.code(), Some(1));
    assert_eq!(zerofreq(&["estimate", "butterfly", "--m", "30"]).status.code(), Some(1));
}

#[test]
fn small_sample_warning() {
    let o = zerofreq(&["estimate", "microbial"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("below 100"));
}
