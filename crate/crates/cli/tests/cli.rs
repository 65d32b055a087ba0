use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use specmatch::spmt::Tensor;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specmatch"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {line:?}"))
        .parse()
        .unwrap()
}

#[test]
fn synth_is_deterministic_and_requires_out() {
    let d = tempfile::tempdir().unwrap();
    for name in ["a.spmt", "b.spmt"] {
        let o = run(
            d.path(),
            &[
                "synth", "--alpha", "2.0", "--size", "128", "--seed", "7", "--out", name,
            ],
        );
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(
        fs::read(d.path().join("a.spmt")).unwrap(),
        fs::read(d.path().join("b.spmt")).unwrap()
    );
    let t = Tensor::decode(&fs::read(d.path().join("a.spmt")).unwrap()).unwrap();
    assert_eq!(t.dims, vec![1, 128, 128]);

    let o = run(
        d.path(),
        &["synth", "--alpha", "2.0", "--size", "128", "--seed", "7"],
    );
    assert_eq!(o.status.code(), Some(64));
    let o = run(d.path(), &["synth", "--alpha", "2.0", "--out", "c.spmt"]);
    assert_eq!(o.status.code(), Some(64), "seed is mandatory");
}

#[test]
fn white_noise_synthesis_fits_near_zero() {
    let d = tempfile::tempdir().unwrap();
    for seed in ["1", "2", "3", "4"] {
        let o = run(
            d.path(),
            &[
                "synth", "--alpha", "0", "--size", "128", "--seed", seed, "--out", "w.spmt",
            ],
        );
        let a = value(&stdout(&o), "alpha_fit");
        assert!((-0.15..=0.15).contains(&a), "seed {seed}: {a}");
    }
}

#[test]
fn esm_on_matching_spectra_is_zero() {
    let d = tempfile::tempdir().unwrap();
    run(
        d.path(),
        &[
            "synth",
            "--alpha",
            "1.5",
            "--size",
            "32",
            "--channels",
            "2",
            "--seed",
            "1",
            "--out",
            "z.spmt",
        ],
    );
    assert!(run(d.path(), &["psd", "z.spmt", "--out", "t.csv"])
        .status
        .success());
    let o = run(
        d.path(),
        &["esm", "--target", "t.csv", "--latent", "z.spmt"],
    );
    assert_eq!(stdout(&o), "esm_loss=0.000000000\n");

    run(
        d.path(),
        &[
            "synth", "--alpha", "3.0", "--size", "64", "--seed", "2", "--out", "x.spmt",
        ],
    );
    run(d.path(), &["psd", "x.spmt", "--out", "x.csv"]);
    let o = run(
        d.path(),
        &[
            "esm", "--target", "x.csv", "--latent", "z.spmt", "--delta", "1",
        ],
    );
    assert!(value(&stdout(&o), "esm_loss") > 0.0);
}

#[test]
fn empty_mask_filter_reproduces_input() {
    let d = tempfile::tempdir().unwrap();
    run(
        d.path(),
        &[
            "synth",
            "--alpha",
            "2.0",
            "--size",
            "32",
            "--channels",
            "3",
            "--seed",
            "5",
            "--out",
            "in.spmt",
        ],
    );
    let o = run(d.path(), &["filter", "--n", "0", "in.spmt", "out.spmt"]);
    assert_eq!(stdout(&o), "removed=0 kept=64\n");
    assert_eq!(
        fs::read(d.path().join("in.spmt")).unwrap(),
        fs::read(d.path().join("out.spmt")).unwrap()
    );

    let o = run(d.path(), &["filter", "--n", "15", "in.spmt", "out.spmt"]);
    assert_eq!(o.status.code(), Some(65));
}

#[test]
fn check_all_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["check", "--all"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l.starts_with("PASS ")));
    assert_eq!(run(d.path(), &["check"]).status.code(), Some(64));
    assert_eq!(
        run(d.path(), &["check", "--only", "nope"]).status.code(),
        Some(64)
    );
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("bad.spmt"), b"SPMT\x01\0\0\0\x02\0\0\0").unwrap();
    assert_eq!(
        run(d.path(), &["psd", "bad.spmt", "--out", "p.csv"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(d.path(), &["psd", "missing.spmt", "--out", "p.csv"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(d.path(), &["fit", "--rmax", "x"]).status.code(),
        Some(64)
    );
    assert_eq!(run(d.path(), &["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(d.path(), &["--help"]).status.code(), Some(0));

    run(
        d.path(),
        &[
            "synth", "--alpha", "2.0", "--size", "16", "--seed", "1", "--out", "x.spmt",
        ],
    );
    let o = run(
        d.path(),
        &[
            "synth",
            "--alpha",
            "2.0",
            "--size",
            "16",
            "--seed",
            "1",
            "--out",
            "no/such/dir/x.spmt",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = run(
        d.path(),
        &[
            "synth", "--alpha", "2.0", "--size", "24", "--seed", "1", "--out", "y.spmt",
        ],
    );
    assert_eq!(o.status.code(), Some(65));
    let o = run(
        d.path(),
        &["lmmse", "--power", "1", "--alpha-bar", "1.5", "--seed", "1"],
    );
    assert_eq!(o.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha_bar"));
    fs::write(
        d.path().join("tokens.spmt"),
        Tensor::new(vec![4, 2], vec![1.0; 8]).unwrap().encode(),
    )
    .unwrap();
    let o = run(d.path(), &["dog", "tokens.spmt", "--out", "o.spmt"]);
    assert_eq!(o.status.code(), Some(65), "DoG needs a token grid");
}

#[test]
fn psd_fit_flatten_pipeline() {
    let d = tempfile::tempdir().unwrap();
    run(
        d.path(),
        &[
            "synth", "--alpha", "2.0", "--size", "64", "--seed", "9", "--out", "x.spmt",
        ],
    );
    run(d.path(), &["psd", "x.spmt", "--out", "x.csv"]);
    let csv = fs::read_to_string(d.path().join("x.csv")).unwrap();
    assert!(csv.starts_with("radius,power,count\n"));
    assert_eq!(csv.lines().count(), 1 + 16);
    let before = value(&stdout(&run(d.path(), &["fit", "x.csv"])), "alpha");
    let o = run(
        d.path(),
        &["flatten", "x.csv", "--delta", "0.75", "--out", "f.csv"],
    );
    assert!(o.status.success());
    let after = value(&stdout(&run(d.path(), &["fit", "f.csv"])), "alpha");
    assert!((before - after - 0.75).abs() < 1e-6, "{before} {after}");
}

#[test]
fn pgm_input_is_accepted() {
    let d = tempfile::tempdir().unwrap();
    let mut pgm = b"P5\n16 16\n255\n".to_vec();
    pgm.extend((0..256u32).map(|i| ((i * 37) % 251) as u8));
    fs::write(d.path().join("img.pgm"), &pgm).unwrap();
    let o = run(d.path(), &["filter", "--n", "0", "img.pgm", "out.spmt"]);
    assert!(o.status.success());
    let t = Tensor::decode(&fs::read(d.path().join("out.spmt")).unwrap()).unwrap();
    assert_eq!(t.dims, vec![1, 16, 16]);
    assert_eq!(t.data[1], 37.0 / 255.0);
    fs::write(d.path().join("ascii.pgm"), b"P2\n1 1\n255\n0\n").unwrap();
    assert_eq!(
        run(d.path(), &["psd", "ascii.pgm", "--out", "p.csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn gcurve_csv_layout() {
    let d = tempfile::tempdir().unwrap();
    run(
        d.path(),
        &[
            "synth", "--alpha", "2.0", "--size", "32", "--seed", "3", "--out", "x.spmt",
        ],
    );
    run(d.path(), &["psd", "x.spmt", "--out", "x.csv"]);
    let o = run(
        d.path(),
        &[
            "gcurve",
            "--psd",
            "x.csv",
            "--timesteps",
            "1,500,1000",
            "--out",
            "g.csv",
        ],
    );
    assert_eq!(stdout(&o), "schedule=linear-beta timesteps=3 bins=8\n");
    let csv = fs::read_to_string(d.path().join("g.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "t,radius,snr,g");
    assert_eq!(rows.len(), 1 + 3 * 8);
    assert!(rows[1].starts_with("1,") && rows[24].starts_with("1000,"));
}

#[test]
fn train_with_config_file() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "objective = dsm\nsteps = 10\nsize = 32\npool = 4\neval_size = 2\neval_every = 5\nseed = 3\n";
    fs::write(d.path().join("run.cfg"), cfg).unwrap();
    let o = run(
        d.path(),
        &[
            "train", "--config", "run.cfg", "--trace", "t.csv", "--model", "m.spmt",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("objective=dsm steps=10 "));
    let trace = fs::read_to_string(d.path().join("t.csv")).unwrap();
    assert_eq!(
        trace.lines().next(),
        Some("step,recon_l1,spec_loss,latent_alpha_fit")
    );
    assert_eq!(trace.lines().count(), 1 + 3);
    let model = Tensor::decode(&fs::read(d.path().join("m.spmt")).unwrap()).unwrap();
    assert_eq!(model.dims, vec![2, 16, 1, 4, 4]);

    fs::write(d.path().join("bad.cfg"), "seed = 1\nlearning_rate = 0.1\n").unwrap();
    let o = run(
        d.path(),
        &["train", "--config", "bad.cfg", "--trace", "t.csv"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));

    let o = run(d.path(), &["train", "--steps", "5", "--trace", "t.csv"]);
    assert_eq!(o.status.code(), Some(64), "seed is mandatory");
}

#[test]
fn rmsc_and_dog_reports() {
    let d = tempfile::tempdir().unwrap();
    // Two orthogonal tokens: RMSC = 1/sqrt(2).
    fs::write(
        d.path().join("pair.spmt"),
        Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0])
            .unwrap()
            .encode(),
    )
    .unwrap();
    let line = stdout(&run(d.path(), &["rmsc", "pair.spmt"]));
    assert!((value(&line, "rmsc") - 0.5f64.sqrt()).abs() < 1e-9);
    assert!((value(&line, "directional_energy") - 0.5).abs() < 1e-9);

    let vals: Vec<f32> = (0..8 * 8 * 3)
        .map(|i| ((i * 7919) % 101) as f32 / 10.0 + 1.0)
        .collect();
    fs::write(
        d.path().join("grid.spmt"),
        Tensor::new(vec![8, 8, 3], vals).unwrap().encode(),
    )
    .unwrap();
    let o = run(
        d.path(),
        &[
            "dog",
            "grid.spmt",
            "--out",
            "g.spmt",
            "--kernel-out",
            "k.spmt",
            "--cosine-ref",
            "0",
            "--cosine-out",
            "c.spmt",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let k = Tensor::decode(&fs::read(d.path().join("k.spmt")).unwrap()).unwrap();
    assert_eq!(k.dims, vec![1, 13, 13]);
    assert!(k.data.iter().map(|&v| f64::from(v)).sum::<f64>().abs() < 1e-6);
    let c = Tensor::decode(&fs::read(d.path().join("c.spmt")).unwrap()).unwrap();
    assert_eq!(c.dims, vec![1, 8, 8]);
    assert_eq!(c.data[0], 1.0);
    assert_eq!(
        run(
            d.path(),
            &["dog", "grid.spmt", "--out", "g.spmt", "--sigma1", "3"]
        )
        .status
        .code(),
        Some(65)
    );
}
