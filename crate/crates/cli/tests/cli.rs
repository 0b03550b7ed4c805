use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn qcseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = qcseg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn value(stdout: &str, name: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{name},")))
        .unwrap_or_else(|| panic!("no {name} in {stdout}"))
        .parse()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_contour(dir: &Path, name: &str, pts: &[(f64, f64)]) -> PathBuf {
    let path = dir.join(name);
    let text: String = pts.iter().map(|(x, y)| format!("{x} {y}\n")).collect();
    fs::write(&path, text).unwrap();
    path
}

fn circle(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64;
            (2.0 + 3.0 * t.cos(), -1.0 + 3.0 * t.sin())
        })
        .collect()
}

fn ellipse(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64;
            (2.0 * t.cos(), 1.2 * t.sin())
        })
        .collect()
}

#[test]
fn hbs_of_a_circle_is_small_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let c = write_contour(dir.path(), "circle.txt", &circle(512));
    let (a, b) = (dir.path().join("a.hbs"), dir.path().join("b.hbs"));
    let out = ok(&["hbs", s(&c), "--grid", "64", "-o", s(&a)]);
    assert!(value(&out, "max_abs") <= 0.05);
    ok(&["hbs", s(&c), "--grid", "64", "-o", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(fs::read_to_string(&a).unwrap().starts_with("HBS 1 64\n"));
}

#[test]
fn hbs_rejects_a_self_intersecting_contour() {
    let dir = TempDir::new().unwrap();
    let bow: Vec<(f64, f64)> = (0..200)
        .map(|k| {
            let t = TAU * k as f64 / 200.0;
            (t.sin(), t.sin() * t.cos())
        })
        .collect();
    let c = write_contour(dir.path(), "bow.txt", &bow);
    let out = qcseg(&["hbs", s(&c), "-o", s(&dir.path().join("x.hbs"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("contour not simple"));
    assert!(!dir.path().join("x.hbs").exists());
}

#[test]
fn mean_of_signatures() {
    let dir = TempDir::new().unwrap();
    let c = write_contour(dir.path(), "e.txt", &ellipse(512));
    let b = dir.path().join("b.hbs");
    ok(&["hbs", s(&c), "--grid", "32", "-o", s(&b)]);

    let one = dir.path().join("one.hbs");
    ok(&["mean", "-o", s(&one), s(&b)]);
    assert_eq!(fs::read_to_string(&one).unwrap(), fs::read_to_string(&b).unwrap());

    let text = fs::read_to_string(&b).unwrap();
    let negated: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return format!("{l}\n");
            }
            let f: Vec<&str> = l.split_whitespace().collect();
            let neg = |v: &str| -> String {
                v.strip_prefix('-').map(str::to_string).unwrap_or_else(|| format!("-{v}"))
            };
            format!("{} {} {} {}\n", f[0], f[1], neg(f[2]), neg(f[3]))
        })
        .collect();
    let nb = dir.path().join("neg.hbs");
    fs::write(&nb, negated).unwrap();
    let zero = dir.path().join("zero.hbs");
    let out = ok(&["mean", "-o", s(&zero), s(&b), s(&nb)]);
    assert_eq!(value(&out, "max_abs"), 0.0);

    let other = dir.path().join("other.hbs");
    ok(&["hbs", s(&c), "--grid", "16", "-o", s(&other)]);
    assert!(!qcseg(&["mean", "-o", s(&zero), s(&b), s(&other)]).status.success());
}

#[test]
fn reconstruction_of_the_zero_signature_is_a_circle() {
    let dir = TempDir::new().unwrap();
    let zero = dir.path().join("zero.hbs");
    fs::write(&zero, "HBS 1 16\n").unwrap();
    let (c1, c2, png) = (dir.path().join("c1.txt"), dir.path().join("c2.txt"), dir.path().join("r.png"));
    ok(&["reconstruct", s(&zero), "--contour", s(&c1), "--png", s(&png)]);
    ok(&["reconstruct", s(&zero), "--contour", s(&c2)]);
    let text = fs::read_to_string(&c1).unwrap();
    assert_eq!(text, fs::read_to_string(&c2).unwrap());
    for l in text.lines() {
        let v: Vec<f64> = l.split_whitespace().map(|x| x.parse().unwrap()).collect();
        assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs() < 1e-6, "{l}");
    }
    assert!(png.exists());
}

#[test]
fn synth_writes_three_files_and_validates_kind() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("tc");
    ok(&["synth", "three_circles", "--size", "64", "--out", s(&out)]);
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["image.png", "prior.txt", "truth.png"]);

    let bad = qcseg(&["synth", "hexagon", "--out", s(&dir.path().join("x"))]);
    assert!(!bad.status.success());
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("rect_notch") && err.contains("three_circles"), "{err}");

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["synth", "ellipse", "--size", "64", "--noise", "0.08", "--seed", "5", "--out", s(d)]);
    }
    assert_eq!(fs::read(a.join("image.png")).unwrap(), fs::read(b.join("image.png")).unwrap());
}

#[test]
fn noise_is_seeded() {
    let dir = TempDir::new().unwrap();
    ok(&["synth", "ellipse", "--size", "48", "--out", s(dir.path())]);
    let img = dir.path().join("image.png");
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    let snr = value(&ok(&["noise", s(&img), "--var", "0.01", "--seed", "9", "-o", s(&a)]), "snr_db");
    ok(&["noise", s(&img), "--var", "0.01", "--seed", "9", "-o", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let louder = value(&ok(&["noise", s(&img), "--var", "0.04", "--seed", "9", "-o", s(&b)]), "snr_db");
    assert!(louder < snr);
}

#[test]
fn metrics_reports() {
    let dir = TempDir::new().unwrap();
    ok(&["synth", "ellipse", "--size", "48", "--out", s(&dir.path().join("e"))]);
    ok(&["synth", "ellipse", "--size", "64", "--out", s(&dir.path().join("f"))]);
    let truth = dir.path().join("e/truth.png");
    let same = ok(&["metrics", s(&truth), s(&truth)]);
    assert_eq!(value(&same, "dice"), 1.0);
    assert_eq!(value(&same, "jaccard"), 1.0);
    assert_eq!(value(&same, "hausdorff"), 0.0);

    let blank = dir.path().join("blank.pgm");
    let mut pgm = b"P5\n48 48\n255\n".to_vec();
    pgm.extend(std::iter::repeat_n(0u8, 48 * 48));
    fs::write(&blank, pgm).unwrap();
    let disjoint = ok(&["metrics", s(&blank), s(&truth)]);
    assert_eq!(value(&disjoint, "dice"), 0.0);

    let file = dir.path().join("m.csv");
    ok(&["metrics", s(&truth), s(&truth), "-o", s(&file)]);
    assert!(fs::read_to_string(&file).unwrap().starts_with("dice,1\n"));

    let other = dir.path().join("f/truth.png");
    assert!(!qcseg(&["metrics", s(&truth), s(&other)]).status.success());
}

#[test]
fn segment_disk_fixed_point() {
    let dir = TempDir::new().unwrap();
    let n = 64usize;
    let c = (n as f64 - 1.0) / 2.0;
    let mut pgm = format!("P5\n{n} {n}\n255\n").into_bytes();
    for r in 0..n {
        for col in 0..n {
            let inside = (col as f64 - c).powi(2) + (r as f64 - c).powi(2) <= 20.0 * 20.0;
            pgm.push(if inside { 255 } else { 0 });
        }
    }
    let img = dir.path().join("disk.pgm");
    fs::write(&img, pgm).unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, format!(r#"{{"init_center": [{c}, {c}], "init_radius": 20.0}}"#)).unwrap();
    let out = dir.path().join("seg");
    let stdout = ok(&[
        "segment", "--image", s(&img), "--config", s(&cfg), "--out", s(&out), "--truth", s(&img),
        "--no-prior",
    ]);
    assert!(value(&stdout, "dice") >= 0.99, "{stdout}");
    for f in ["overlay.png", "mask.png", "contour.txt", "log.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let log = fs::read_to_string(out.join("log.csv")).unwrap();
    assert!(log.starts_with(
        "iter,E_total,E_fit,E_alpha,E_beta,E_gamma,E_delta,E_lambda,E_eta,E_tau,c1,c2,max_abs_mu,map_change\n"
    ));
}

#[test]
fn segment_rejects_bad_configs() {
    let dir = TempDir::new().unwrap();
    ok(&["synth", "ellipse", "--size", "48", "--out", s(dir.path())]);
    let img = dir.path().join("image.png");
    let out = dir.path().join("seg");
    for (name, text) in [("typo.json", r#"{"lamda": 1.0}"#), ("neg.json", r#"{"alpha": -1.0}"#)] {
        let cfg = dir.path().join(name);
        fs::write(&cfg, text).unwrap();
        let res = qcseg(&["segment", "--image", s(&img), "--config", s(&cfg), "--out", s(&out), "--no-prior"]);
        assert!(!res.status.success(), "{name}");
    }
    let res = qcseg(&["segment", "--image", s(&img), "--out", s(&out)]);
    assert!(!res.status.success());
    assert!(!out.exists());
}

#[test]
fn rect_notch_recipe_with_and_without_prior() {
    let dir = TempDir::new().unwrap();
    let recipe = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes/rect_notch.json");
    let scene = dir.path().join("scene");
    ok(&["synth", "rect_notch", "--out", s(&scene)]);
    let prior = dir.path().join("prior.hbs");
    ok(&["hbs", s(&scene.join("prior.txt")), "-o", s(&prior)]);
    let (image, truth) = (scene.join("image.png"), scene.join("truth.png"));
    let base = ["segment", "--image", s(&image), "--config", s(&recipe), "--truth", s(&truth)];
    let run = |extra: &[&str]| -> f64 {
        let mut args = base.to_vec();
        args.extend_from_slice(extra);
        value(&ok(&args), "dice")
    };
    let with = run(&["--prior", s(&prior), "--out", s(&dir.path().join("with"))]);
    let without = run(&["--no-prior", "--out", s(&dir.path().join("without"))]);
    assert!(with >= 0.90, "{with}");
    assert!(without < with, "{without} vs {with}");
}
