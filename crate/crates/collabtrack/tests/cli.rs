use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use collabtrack::{formats, pgm, GROUND_TRUTH_FILE};
use collabtrack_core::network::NetworkParams;
use collabtrack_core::{TrackRng, ARCHITECTURE};
use rand::SeedableRng;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collabtrack"))
        .current_dir(dir)
        .env_remove("COLLABTRACK_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn random_model(dir: &Path) {
    let net = NetworkParams::random(&ARCHITECTURE, 0.01, &mut TrackRng::seed_from_u64(9)).unwrap();
    formats::write_model(&dir.join("model.bin"), &net).unwrap();
}

#[test]
fn synth_writes_frames_and_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--set", "sequence=a"]);
    let frames = pgm::frame_paths(&dir.path().join("a")).unwrap();
    assert_eq!(frames.len(), 100);
    let truth = formats::read_ground_truth(&dir.path().join("a").join(GROUND_TRUTH_FILE)).unwrap();
    assert_eq!(truth.len(), 100);

    ok(dir.path(), &["synth", "--set", "sequence=b"]);
    for (x, y) in frames.iter().zip(pgm::frame_paths(&dir.path().join("b")).unwrap()) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

#[test]
fn seed_comes_from_the_environment_unless_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let synth = |seq: &str, env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_collabtrack"));
        cmd.current_dir(dir.path()).env_remove("COLLABTRACK_SEED");
        if let Some(v) = env {
            cmd.env("COLLABTRACK_SEED", v);
        }
        let s = format!("sequence={seq}");
        let status = cmd
            .args(["synth", "--set", &s, "--set", "synth_frames=2"])
            .args(extra)
            .status()
            .unwrap();
        assert!(status.success());
        fs::read(dir.path().join(seq).join(GROUND_TRUTH_FILE)).unwrap()
    };
    let plain = synth("plain", None, &[]);
    let env = synth("env", Some("17"), &[]);
    let flag = synth("flag", None, &["--set", "seed=17"]);
    let both = synth("both", Some("17"), &["--set", "seed=0"]);
    assert_ne!(plain, env);
    assert_eq!(env, flag);
    assert_eq!(both, plain);

    let mut cmd = Command::new(env!("CARGO_BIN_EXE_collabtrack"));
    let out = cmd
        .current_dir(dir.path())
        .env("COLLABTRACK_SEED", "soon")
        .args(["synth", "--set", "sequence=x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("COLLABTRACK_SEED"));
}

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["synth", "--set", "particels=10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("particels"));

    fs::write(dir.path().join("run.cfg"), "# comment\nsequence = s\nwarp = 3\n").unwrap();
    let out = run(dir.path(), &["synth", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("warp"));
}

#[test]
fn one_frame_sequence_echoes_the_initial_box() {
    let dir = tempfile::tempdir().unwrap();
    random_model(dir.path());
    ok(dir.path(), &["synth", "--set", "sequence=s", "--set", "synth_frames=1"]);
    let stdout = ok(dir.path(), &["track", "--set", "model=model.bin", "--set", "sequence=s"]);
    assert!(stdout.contains("tracked 1 frames"), "{stdout}");
    let rows = formats::read_trajectory(&dir.path().join("trajectory.csv")).unwrap();
    let truth = formats::read_ground_truth(&dir.path().join("s").join(GROUND_TRUTH_FILE)).unwrap();
    assert_eq!(rows, truth);
}

#[test]
fn box_covering_a_tiny_frame() {
    let dir = tempfile::tempdir().unwrap();
    random_model(dir.path());
    let seq = dir.path().join("tiny");
    fs::create_dir(&seq).unwrap();
    for t in 0..3u8 {
        let px: Vec<u8> = (0..32 * 32).map(|i| ((i * 7 + usize::from(t)) % 251) as u8).collect();
        pgm::write(&seq.join(format!("{t:05}.pgm")), 32, 32, &px).unwrap();
    }
    ok(
        dir.path(),
        &[
            "track", "--set", "model=model.bin", "--set", "sequence=tiny", "--set", "init_box=0,0,32,32", "--set",
            "particles=50",
        ],
    );
    let rows = formats::read_trajectory(&dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.w.is_finite() && r.h.is_finite()));
}

#[test]
fn track_rejects_missing_and_mismatched_inputs() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--set", "sequence=s", "--set", "synth_frames=2"]);
    let out = run(dir.path(), &["track", "--set", "model=absent.bin", "--set", "sequence=s"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("absent.bin"));

    let small = NetworkParams::random(&[1024, 8, 1], 0.01, &mut TrackRng::seed_from_u64(1)).unwrap();
    formats::write_model(&dir.path().join("small.bin"), &small).unwrap();
    let out = run(dir.path(), &["track", "--set", "model=small.bin", "--set", "sequence=s"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn eval_reports_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--set", "sequence=s", "--set", "synth_frames=10"]);
    let truth = dir.path().join("s").join(GROUND_TRUTH_FILE);
    fs::copy(&truth, dir.path().join("gt.txt")).unwrap();

    // A trajectory that matches the ground truth exactly.
    let boxes = formats::read_ground_truth(&truth).unwrap();
    let mut csv = String::from("frame,x,y,w,h,score,occlusion_rate,finetuned\n");
    for (i, b) in boxes.iter().enumerate() {
        csv += &format!("{i},{},{},{},{},0.5,1,0\n", b.x, b.y, b.w, b.h);
    }
    fs::write(dir.path().join("t.csv"), &csv).unwrap();
    let stdout = ok(dir.path(), &["eval", "--set", "trajectory=t.csv", "--set", "ground_truth=gt.txt"]);
    assert!(stdout.contains("mean center error 0.0000 px, mean overlap 1.0000"), "{stdout}");
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.lines().last().unwrap().starts_with("average,"));

    let short: String = csv.lines().take(6).map(|l| format!("{l}\n")).collect();
    fs::write(dir.path().join("short.csv"), short).unwrap();
    let out = run(dir.path(), &["eval", "--set", "trajectory=short.csv", "--set", "ground_truth=gt.txt"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains('5') && msg.contains("10"), "{msg}");

    let mut lines: Vec<String> = fs::read_to_string(&truth).unwrap().lines().map(String::from).collect();
    lines[6] = "12,oops,3,4".into();
    fs::write(dir.path().join("gt.txt"), lines.join("\n")).unwrap();
    let out = run(dir.path(), &["eval", "--set", "trajectory=t.csv", "--set", "ground_truth=gt.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 7"), "{}", stderr(&out));
}

#[test]
fn dump_filters_writes_one_image_per_hidden_unit() {
    let dir = tempfile::tempdir().unwrap();
    random_model(dir.path());
    ok(dir.path(), &["dump-filters", "--set", "model=model.bin", "--set", "out_dir=f"]);
    let files = pgm::frame_paths(&dir.path().join("f")).unwrap();
    assert_eq!(files.len(), 256);
    let img = pgm::read(&files[0]).unwrap();
    assert_eq!((img.width, img.height), (32, 32));
    assert_eq!(img.pixels.iter().max(), Some(&255));
    assert_eq!(img.pixels.iter().min(), Some(&0));

    fs::write(dir.path().join("junk.bin"), b"not a model").unwrap();
    let out = run(dir.path(), &["dump-filters", "--set", "model=junk.bin"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn small_pretrain_produces_the_full_architecture() {
    let dir = tempfile::tempdir().unwrap();
    for (s, name) in [(1, "a"), (2, "b")] {
        let seed = format!("seed={s}");
        let seq = format!("sequence={name}");
        ok(dir.path(), &["synth", "--set", &seed, "--set", &seq, "--set", "synth_frames=5"]);
    }
    let args = [
        "pretrain", "--set", "train_sequences=a,b", "--set", "rbm_epochs=1", "--set", "train_epochs=2",
    ];
    let stdout = ok(dir.path(), &args);
    assert!(stdout.contains("accuracy"), "{stdout}");
    let first = fs::read(dir.path().join("model.bin")).unwrap();
    let net = formats::read_model(&dir.path().join("model.bin")).unwrap();
    let dims: Vec<(usize, usize)> = net.layers().iter().map(|l| l.weights.shape()).collect();
    assert_eq!(dims, [(1024, 256), (256, 64), (64, 16), (16, 1)]);

    ok(dir.path(), &args);
    assert_eq!(fs::read(dir.path().join("model.bin")).unwrap(), first);

    let out = run(dir.path(), &["pretrain"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn keys_lists_every_default() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["keys"]);
    for key in ["tau = 0.8", "chi = 0.8", "particles = 600", "momentum = 0.9"] {
        assert!(stdout.contains(key), "{key}");
    }
}
