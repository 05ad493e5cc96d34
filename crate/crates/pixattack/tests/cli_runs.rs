use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pixattack::cli::{AE_IMAGE, ERROR_TXT, FRONT_CSV, HISTORY_CSV, MASK_PGM, PERTURBATION_CSV, REPORT_JSON};
use pixattack::export::{parse_front_csv, parse_perturbation_csv, ReportFile};
use pixattack::files::{load_attention, load_image, load_mask};
use pixattack::setup::SAMPLE_SHAPE;

fn sample() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/sample.ppm")
}

fn pixattack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pixattack")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn attack(out: &Path, budget: &str, extra: &[&str]) -> Output {
    let image = sample();
    let mut args = vec!["attack", s(&image), "--out", s(out), "--budget", budget, "--seed", "3"];
    args.extend_from_slice(extra);
    pixattack(&args)
}

#[test]
fn successful_attack_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = attack(&out, "3000", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in [AE_IMAGE, PERTURBATION_CSV, FRONT_CSV, REPORT_JSON, HISTORY_CSV, MASK_PGM] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    assert!(!out.join(ERROR_TXT).exists());

    let report = ReportFile::from_json(&std::fs::read_to_string(out.join(REPORT_JSON)).unwrap()).unwrap();
    assert_eq!(report.queries, 3001);
    let ae = load_image(&out.join(AE_IMAGE)).unwrap();
    assert_eq!(ae.shape(), SAMPLE_SHAPE);
    let deltas = parse_perturbation_csv(&std::fs::read_to_string(out.join(PERTURBATION_CSV)).unwrap()).unwrap();
    let l2 = deltas.iter().map(|d| d.value.powi(2)).sum::<f64>().sqrt();
    let fin = report.final_example.expect("successful run has a final example");
    assert!((l2 - fin.l2).abs() < 1e-9, "{l2} vs {}", fin.l2);
    assert_eq!(deltas.len(), fin.changed_values);
    // the mask keeps at most half the pixels
    assert!(load_mask(&out.join(MASK_PGM), Some((32, 32))).unwrap().count() <= 512);

    // export-front reproduces the front written by the run
    let exported = dir.path().join("front.csv");
    let plot = dir.path().join("front.dat");
    let o = pixattack(&["export-front", s(&out.join(REPORT_JSON)), "--out", s(&exported), "--plot", s(&plot)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&exported).unwrap();
    assert_eq!(text, std::fs::read_to_string(out.join(FRONT_CSV)).unwrap());
    let rows = parse_front_csv(&text).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.windows(2).all(|w| w[0].f2 <= w[1].f2));
    for a in &rows {
        for b in &rows {
            let dominates = a.f1 <= b.f1 && a.f2 <= b.f2 && (a.f1 < b.f1 || a.f2 < b.f2);
            assert!(!dominates, "{a:?} dominates {b:?}");
        }
    }
    let plot = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(plot.lines().filter(|l| !l.starts_with('#')).count(), rows.len());

    // visualize renders an image of the original size
    let pattern = dir.path().join("pattern.png");
    let o = pixattack(&[
        "visualize",
        s(&sample()),
        s(&out.join(PERTURBATION_CSV)),
        "--mask",
        s(&out.join(MASK_PGM)),
        "--out",
        s(&pattern),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(load_image(&pattern).unwrap().shape(), SAMPLE_SHAPE);
}

#[test]
fn invalid_budget_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = attack(&dir.path().join("run"), "0", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("invalid configuration"), "{}", stderr(&o));
}

#[test]
fn unreachable_oracle_fails_without_a_front() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let url = format!("http://127.0.0.1:{port}");
    let o = attack(&out, "100", &["--oracle", &url]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
    assert!(!out.join(FRONT_CSV).exists());
    assert!(out.join(ERROR_TXT).is_file());
}

#[test]
fn zero_delta_cap_cannot_flip_the_label() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = attack(&out, "100", &["--delta-max", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(out.join(FRONT_CSV).is_file());
    assert!(!out.join(AE_IMAGE).exists());
}

#[test]
fn usage_errors_exit_with_one() {
    let o = pixattack(&["attack", "--budget", "1", "--budget", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(pixattack(&["--help"]).status.code(), Some(0));
}

#[test]
fn gen_attention_writes_map_and_mask() {
    let dir = tempfile::tempdir().unwrap();
    let (map, mask) = (dir.path().join("a.pgm"), dir.path().join("m.pgm"));
    let o = pixattack(&["gen-attention", s(&sample()), "--out", s(&map), "--mask", s(&mask)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let map = load_attention(&map, Some((32, 32))).unwrap();
    let mask = load_mask(&mask, Some((32, 32))).unwrap();
    for (r, c) in mask.positions() {
        assert!(map.get(r, c) != 0 && (r + c) % 2 == 0);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# smoke config\nimage = {}\nbudget = 0\npop = 10\nseed = 4\nout = from-config\n",
            s(&sample())
        ),
    )
    .unwrap();
    // the file's budget alone is invalid
    let o = pixattack(&["attack", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let o = pixattack(&["attack", "--config", s(&cfg), "--budget", "200"]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("from-config").join(REPORT_JSON)).unwrap();
    let report = ReportFile::from_json(&report).unwrap();
    assert_eq!(report.queries, 201);
    assert_eq!(report.settings.population_size, 10);
}

#[test]
fn gen_model_output_is_usable_as_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("target.txt");
    let o = pixattack(&["gen-model", "linear", "--seed", "9", "--out", s(&model)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let spec = format!("toy:linear:{}", s(&model));
    let o = attack(&dir.path().join("run"), "100", &["--oracle", &spec]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
}
