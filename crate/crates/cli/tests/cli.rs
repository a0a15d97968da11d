use std::path::PathBuf;
use std::process::{Command, Output};

fn roughcas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughcas"))
        .args(args)
        .output()
        .expect("failed to launch roughcas")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("roughcas-it-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

const ENERGY: &[&str] = &["energy", "--spec", "gaussian", "--sigma", "0.1", "--lc", "2", "--a", "3", "--tol-rel", "1e-4"];

#[test]
fn energy_csv_has_metadata_and_one_row() {
    let o = roughcas(ENERGY);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# version: roughcas "));
    assert!(text.contains("# tol_rel: 0.0001"));
    assert!(text.contains("flat,seagull,single_scatter,counterterm,double_scatter,total_correction,ratio,uv_tail_fraction"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert!(r[0] < 0.0, "flat energy is attractive");
    assert!((r[1] + r[2] + r[3] + r[4] - r[5]).abs() <= 1e-12 * r[5].abs());
}

#[test]
fn output_is_deterministic() {
    assert_eq!(stdout(&roughcas(ENERGY)), stdout(&roughcas(ENERGY)));
}

#[test]
fn json_output_parses() {
    let mut args = ENERGY.to_vec();
    args.extend(["--format", "json"]);
    let o = roughcas(&args);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["metadata"]["command"], "energy");
    assert_eq!(v["columns"][5], "total_correction");
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn config_file_with_flag_override() {
    let cfg = scratch("energy.cfg");
    std::fs::write(&cfg, "spec = gaussian\nsigma = 0.1\nlc = 2\na = 100\ntol_rel = 1e-4\n").unwrap();
    let o = roughcas(&["energy", "--config", cfg.to_str().unwrap(), "--a", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# a [1/wp]: 3\n"));
    assert_eq!(data_rows(&text), data_rows(&stdout(&roughcas(ENERGY))));
}

#[test]
fn out_flag_writes_file() {
    let path = scratch("energy.csv");
    let mut args = ENERGY.to_vec();
    let p = path.to_str().unwrap().to_string();
    args.extend(["--out", &p]);
    let o = roughcas(&args);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(&path).unwrap().contains("total_correction"));
}

#[test]
fn response_columns() {
    let o = roughcas(&["response", "--a", "2", "--q", "0,1,10", "--tol-rel", "1e-4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("q_over_wp,R_renormalized,R_unsubtracted,ratio_to_q0"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][3], 1.0);
    assert!(rows[2][3] < rows[1][3] && rows[1][3] < 1.0);
}

#[test]
fn scan_lc_axis_accepts_limits() {
    let o = roughcas(&[
        "scan", "--axis", "lc", "--grid", "0,1,inf", "--a", "2", "--sigma", "0.1", "--tol-rel", "1e-4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("lc,ratio,flat"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 3);
    assert!(rows[2][0].is_infinite());
    let r: Vec<f64> = rows.iter().map(|r| r[1].abs()).collect();
    assert!(r[0] < r[1] && r[1] < r[2], "{r:?}");
}

#[test]
fn experiment_with_dataset() {
    let data = scratch("forces.csv");
    std::fs::write(&data, "separation_nm,force_pN\n# synthetic\n80,100\n100,55\n120,33\n").unwrap();
    let o = roughcas(&["experiment", "--preset", "film-200nm", "--data", data.to_str().unwrap(), "--tol-rel", "1e-4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("separation_nm,rho_model,rho_data,residual"));
    assert!(text.contains("# delta_a_nm: "));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!((r[2] - r[1] - r[3]).abs() < 1e-12);
    }
}

#[test]
fn exit_codes() {
    let bad_model = roughcas(&["energy", "--model", "copper", "--a", "1"]);
    assert_eq!(bad_model.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_model.stderr).contains("unknown model"));
    let bad_flag = roughcas(&["energy", "--nonsense"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    let missing = roughcas(&["experiment", "--data", "/nonexistent/forces.csv"]);
    assert_eq!(missing.status.code(), Some(4));
    let missing_cfg = roughcas(&["energy", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(missing_cfg.status.code(), Some(4));
    let bad_data = scratch("bad.csv");
    std::fs::write(&bad_data, "separation_nm,force_pN\n100,1\n90,2\n").unwrap();
    let o = roughcas(&["experiment", "--data", bad_data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn profile_reports_sample_and_model() {
    let o = roughcas(&["profile", "--lc", "1", "--grid-size", "256", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# seed: 3"));
    let rows = data_rows(&text);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[0][2] - 1.0).abs() < 1e-12);
    let again = roughcas(&["profile", "--lc", "1", "--grid-size", "256", "--seed", "3"]);
    assert_eq!(stdout(&again), text);
}
