use std::fs;
use std::path::Path;

use evsr::cli::{read_stream, run};

fn evsr(args: &[&str]) -> i32 {
    run(std::iter::once("evsr").chain(args.iter().copied()))
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn simulate_downsample_super_resolve_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (gt, lr, dict, hr) = (
        p(d, "gt.evsr"),
        p(d, "lr.evt"),
        p(d, "dict.bin"),
        p(d, "hr.evsr"),
    );
    let sim = [
        "simulate",
        "--scene",
        "moving-bar",
        "--width",
        "32",
        "--height",
        "32",
        "--duration",
        "100000",
        "--speed",
        "150",
        "--bar-width",
        "4",
        "--out",
        &gt,
    ];
    assert_eq!(evsr(&sim), 0);
    let gt_stream = read_stream(Path::new(&gt)).unwrap();
    assert!(!gt_stream.is_empty());
    assert_eq!(
        evsr(&["downsample", "--in", &gt, "--factor", "2", "--out", &lr]),
        0
    );
    assert!(fs::read_to_string(&lr).unwrap().starts_with("16 16 100000"));
    let train = [
        "train-dict",
        "--synthetic",
        "3",
        "--lr-size",
        "16",
        "--atoms",
        "64",
        "--out",
        &dict,
    ];
    assert_eq!(evsr(&train), 0);
    let sr = [
        "super-resolve",
        "--in",
        &lr,
        "--out",
        &hr,
        "--dict",
        &dict,
        "--window-length",
        "50000",
    ];
    assert_eq!(evsr(&sr), 0);
    let first = fs::read(&hr).unwrap();
    assert_eq!(evsr(&sr), 0);
    assert_eq!(
        fs::read(&hr).unwrap(),
        first,
        "same seed must give identical bytes"
    );
    let out = read_stream(Path::new(&hr)).unwrap();
    assert_eq!((out.width(), out.height()), (32, 32));

    let report = p(d, "report.txt");
    assert_eq!(
        evsr(&[
            "metrics",
            "--candidate",
            &hr,
            "--reference",
            &gt,
            "--out",
            &report
        ]),
        0
    );
    let text = fs::read_to_string(&report).unwrap();
    let rmse: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("rmse="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rmse.is_finite() && rmse >= 0.0);

    let frames = p(d, "frames");
    assert_eq!(
        evsr(&[
            "render",
            "--in",
            &hr,
            "--out-dir",
            &frames,
            "--frame-length",
            "50000",
            "--lr",
            &lr
        ]),
        0
    );
    assert!(Path::new(&frames).join("frame_0000.pgm").exists());
    assert!(fs::read_to_string(Path::new(&frames).join("curves.csv"))
        .unwrap()
        .starts_with("bin_start_us,f_lr,f_hr"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (lr, dict, conf) = (p(d, "lr.evsr"), p(d, "dict.bin"), p(d, "sr.conf"));
    let sim = [
        "simulate",
        "--scene",
        "sprites",
        "--width",
        "16",
        "--height",
        "16",
        "--duration",
        "60000",
        "--out",
        &lr,
    ];
    assert_eq!(evsr(&sim), 0);
    assert_eq!(
        evsr(&[
            "train-dict",
            "--synthetic",
            "2",
            "--lr-size",
            "16",
            "--atoms",
            "32",
            "--out",
            &dict
        ]),
        0
    );
    fs::write(&conf, "# test\nwindow-length = 30000\nseed = 5\n").unwrap();
    let (a, b) = (p(d, "a.evsr"), p(d, "b.evsr"));
    let base = [
        "super-resolve",
        "--in",
        &lr,
        "--dict",
        &dict,
        "--config",
        &conf,
    ];
    assert_eq!(evsr(&[&base[..], &["--out", &a]].concat()), 0);
    assert_eq!(
        evsr(&[&base[..], &["--out", &b, "--seed", "6"]].concat()),
        0
    );
    assert_ne!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    // a bad value is a usage error, an unreadable dictionary is not
    fs::write(&conf, "factor = \n").unwrap();
    assert_eq!(evsr(&[&base[..], &["--out", &a]].concat()), 1);
    fs::write(&conf, "").unwrap();
    fs::write(&dict, b"junk").unwrap();
    assert_eq!(evsr(&[&base[..], &["--out", &a]].concat()), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(evsr(&["no-such-command"]), 1);
    assert_eq!(evsr(&["simulate", "--out", &p(d, "x.evsr")]), 1);
    assert_eq!(
        evsr(&[
            "super-resolve",
            "--in",
            &p(d, "missing.evsr"),
            "--out",
            &p(d, "y.evsr")
        ]),
        1
    );
    assert_eq!(
        evsr(&[
            "downsample",
            "--in",
            &p(d, "missing.evsr"),
            "--factor",
            "2",
            "--out",
            &p(d, "y.evsr")
        ]),
        2
    );
    let bad = p(d, "bad.evsr");
    fs::write(&bad, b"XXXXjunk").unwrap();
    assert_eq!(
        evsr(&[
            "downsample",
            "--in",
            &bad,
            "--factor",
            "2",
            "--out",
            &p(d, "z.evsr")
        ]),
        2
    );
    let ok = p(d, "ok.evt");
    fs::write(&ok, "4 4 1000\n10,1,1,1\n").unwrap();
    assert_eq!(
        evsr(&[
            "downsample",
            "--in",
            &ok,
            "--factor",
            "3",
            "--out",
            &p(d, "z.evsr")
        ]),
        1
    );
    assert_eq!(evsr(&["train-dict", "--out", &p(d, "d.bin")]), 1);
    assert_eq!(evsr(&["--help"]), 0);
}
