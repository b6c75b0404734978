use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
m_list = [2]
sigma_list = [1e-3, 5e-4]
horizon = 2.0
sample_dt = 0.1

[grid]
n1 = 16
n2_per_m = 16

[profile]
family = "kolmogorov"
amplitude = 1.0
wavenumber = 1.0
"#;

fn shear(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shear"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SHEAR_OUTPUT_DIR")
        .env_remove("SHEAR_THREADS")
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn shear")
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

fn swept_bundle() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let o = shear(&["sweep", "small.toml", "--output-dir", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    dir
}

#[test]
fn help_documents_environment() {
    let o = shear(&["--help"], Path::new("."));
    assert_eq!(o.status.code(), Some(0));
    let t = text(&o);
    for needle in [
        "SHEAR_OUTPUT_DIR",
        "SHEAR_THREADS",
        "run",
        "sweep",
        "check",
        "fit",
        "plot",
    ] {
        assert!(t.contains(needle), "help lacks {needle}:\n{t}");
    }
}

#[test]
fn unknown_flag_is_an_execution_error() {
    let o = shear(&["sweep", "x.toml", "--bogus"], Path::new("."));
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("--bogus"));
}

#[test]
fn bad_config_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        SMALL.replace("n1 = 16", "n1 = \"many\""),
    )
    .unwrap();
    let o = shear(&["run", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("grid.n1"), "{}", text(&o));

    std::fs::write(
        dir.path().join("typo.toml"),
        format!("horizn = 3.0\n{SMALL}"),
    )
    .unwrap();
    let o = shear(&["run", "typo.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("horizn"), "{}", text(&o));

    let o = shear(&["run", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_writes_a_single_cell_bundle_to_the_env_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_shear"))
        .args(["run", "small.toml", "--sigma", "2e-3"])
        .current_dir(dir.path())
        .env("SHEAR_OUTPUT_DIR", "from_env")
        .env("SHEAR_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let cell = dir.path().join("from_env/m2_s0.002");
    for f in ["series.csv", "checks.json", "meta.json"] {
        assert!(cell.join(f).exists(), "missing {f}");
    }
    assert!(!dir.path().join("from_env/m2_s0.001").exists());
}

#[test]
fn check_fit_and_plot_on_a_sweep() {
    let dir = swept_bundle();
    let out = dir.path().join("out");

    let o = shear(&["check", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = shear(&["check", "out", "--json"], dir.path());
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["cells"].as_array().unwrap().len(), 2);

    let o = shear(
        &["fit", "out", "--field", "dU2", "--window", "0.5,2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("m2_s0.0005"));
    let o = shear(
        &["fit", "out", "--field", "dU3", "--window", "0.5,2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = shear(
        &["fit", "out", "--field", "U2", "--window", "2,1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = shear(
        &[
            "fit", "out", "--field", "U2", "--window", "0.5,2", "--cell", "m9_s1",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));

    let o = shear(&["plot", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let plots = out.join("plots");
    for kind in ["U", "dU", "J", "integrals", "energy", "indicator"] {
        let svg = std::fs::read_to_string(plots.join(format!("{kind}.svg"))).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap_or_else(|e| panic!("{kind}.svg: {e}"));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let polylines = doc
            .descendants()
            .filter(|n| n.has_tag_name("polyline"))
            .count();
        assert!(polylines >= 2, "{kind}.svg has {polylines} lines");
    }
}

#[test]
fn check_flags_a_corrupted_series() {
    let dir = swept_bundle();
    let series = dir.path().join("out/m2_s0.001/series.csv");
    let csv = std::fs::read_to_string(&series).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap().to_string();
    let cols: Vec<&str> = header.split(',').collect();
    let j = ["J", "J1", "J2"].map(|c| cols.iter().position(|h| *h == c).unwrap());
    let mut out = vec![header.clone()];
    for line in lines {
        let mut f: Vec<String> = line.split(',').map(String::from).collect();
        for &k in &j {
            f[k] = (2.0 * f[k].parse::<f64>().unwrap()).to_string();
        }
        out.push(f.join(","));
    }
    std::fs::write(&series, out.join("\n") + "\n").unwrap();
    let o = shear(&["check", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    assert!(text(&o).contains("gronwall_a"));
}
