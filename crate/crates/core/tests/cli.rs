use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use stabilitykit::media::write_y4m;
use stabilitykit::synth::{gen_trajectory, procedural_base, render_shaky, required_half_extent, Axis, ShakeComponent, ShakeSpec};
use stabilitykit::{Frame, FrameSequence};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stabilitykit"))
        .args(args)
        .current_dir(dir)
        .env_remove("STABILITYKIT_SEED")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn save(seq: &FrameSequence, path: PathBuf) -> String {
    let mut w = BufWriter::new(fs::File::create(&path).unwrap());
    write_y4m(seq, &mut w).unwrap();
    drop(w);
    path.to_string_lossy().into_owned()
}

fn jittered(amp: f64, len: usize) -> FrameSequence {
    let spec = ShakeSpec {
        components: vec![
            ShakeComponent { amplitude: amp, frequency: 13.0, phase: 0.3, axis: Axis::X },
            ShakeComponent { amplitude: amp, frequency: 17.0, phase: 1.1, axis: Axis::Y },
        ],
        noise_sigma: 0.0,
        length: len,
    };
    let traj = gen_trajectory(&spec, 0).unwrap();
    let half = required_half_extent(&traj, 96).ceil() as usize + 2;
    let base = procedural_base(2 * half + 1, 2 * half + 1, 0).unwrap();
    render_shaky(&base, &traj, 96).unwrap()
}

#[test]
fn static_video_is_perfectly_stable() {
    let dir = tempfile::tempdir().unwrap();
    let video = save(&jittered(0.0, 40), dir.path().join("still.y4m"));
    let v = json(&cli(dir.path(), &["score", &video]));
    assert_eq!(v["itf_db"], 100.0);
    assert_eq!(v["stability"]["score"], 1.0);
    assert!(v.get("prediction").is_none());
}

#[test]
fn stronger_jitter_scores_lower() {
    let dir = tempfile::tempdir().unwrap();
    let calm = save(&jittered(1.0, 48), dir.path().join("calm.y4m"));
    let shaky = save(&jittered(8.0, 48), dir.path().join("shaky.y4m"));
    let a = json(&cli(dir.path(), &["score", &calm]));
    let b = json(&cli(dir.path(), &["score", &shaky]));
    assert!(b["itf_db"].as_f64() < a["itf_db"].as_f64());
    assert!(b["stability"]["score"].as_f64() < a["stability"]["score"].as_f64());

    let csv = cli(dir.path(), &["trajectory", &shaky]);
    let text = String::from_utf8(json_ok(csv)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frame,x,y,theta"));
    assert_eq!(lines.count(), 48);
}

fn json_ok(out: Output) -> Vec<u8> {
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cli(d, &["score", "missing.y4m"]).status.code(), Some(2));
    assert_eq!(cli(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(cli(d, &["--help"]).status.code(), Some(0));

    let flat = FrameSequence::new(vec![Frame::new(64, 48, vec![128; 64 * 48 * 3]).unwrap(); 10], 30.0).unwrap();
    let flat = save(&flat, d.join("flat.y4m"));
    let out = cli(d, &["score", &flat]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    let video = save(&jittered(2.0, 40), d.join("v.y4m"));
    assert_eq!(cli(d, &["score", &video, "--model", "nope.ckpt"]).status.code(), Some(3));

    fs::write(d.join("bad.json"), r#"{"clips": 2, "colour": "blue"}"#).unwrap();
    assert_eq!(cli(d, &["score", &video, "--config", "bad.json"]).status.code(), Some(2));

    fs::write(d.join("m.csv"), "video_id,path,mos\na,a.y4m,10\nb,b.y4m,20\nc,c.y4m,30\n").unwrap();
    assert_eq!(cli(d, &["train", "m.csv", "--out", "x.ckpt"]).status.code(), Some(5));
}

#[test]
fn eval_reports_and_checks_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rows: String = (0..10).map(|i| format!("v{i},{}\n", 10.0 + 7.0 * i as f64)).collect();
    fs::write(d.join("pred.csv"), format!("video_id,prediction\n{rows}")).unwrap();
    fs::write(d.join("mos.csv"), format!("video_id,mos\n{rows}")).unwrap();
    let v = json(&cli(d, &["eval", "pred.csv", "mos.csv"]));
    assert_eq!(v["SROCC"], 1.0);
    assert_eq!(v["KRCC"], 1.0);
    assert_eq!(v["n"], 10);

    fs::write(d.join("short.csv"), "v0,1\nv1,2\nv2,3\n").unwrap();
    assert_eq!(cli(d, &["eval", "short.csv", "mos.csv"]).status.code(), Some(2));
}

#[test]
fn mos_drops_the_planted_rater() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("subject_id,video_id,score\n");
    for v in 0..20 {
        let consensus = 20.0 + 3.0 * v as f64;
        for s in 0..10 {
            let wobble = ((s * 7 + v * 3) % 5) as f64 - 2.0;
            csv += &format!("s{s},v{v},{}\n", consensus + wobble);
        }
        let off: f64 = if v < 19 { consensus + 50.0 } else { consensus };
        csv += &format!("planted,v{v},{}\n", off.min(100.0));
    }
    fs::write(d.join("ratings.csv"), csv).unwrap();
    let v = json(&cli(d, &["mos", "ratings.csv", "--out", "mos.csv"]));
    assert_eq!(v["rejected_subjects"], serde_json::json!(["planted"]));
    assert_eq!(v["videos"], 20);
    let table = fs::read_to_string(d.join("mos.csv")).unwrap();
    assert!(table.starts_with("video_id,mos,std,n\n"));
    assert_eq!(table.lines().count(), 21);
}

#[test]
fn synth_writes_a_labeled_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("synth.json"),
        r#"{"seed": 4, "dataset": {"count": 30, "amplitude_ladder": [0.0, 2.0, 5.0], "length": 32, "out_size": 64}}"#,
    )
    .unwrap();
    let v = json(&cli(d, &["synth", "--out", "ds", "--config", "synth.json"]));
    assert_eq!(v["videos"], 30);
    assert_eq!(v["seed"], 4);
    let y4m = fs::read_dir(d.join("ds"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "y4m"))
        .count();
    assert_eq!(y4m, 30);

    let manifest = fs::read_to_string(d.join("ds/manifest.csv")).unwrap();
    let labels: Vec<f64> = manifest
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(labels.len(), 30);
    // still videos carry the top label; the 5 px rung is the least stable
    let rung = |k: usize| labels.iter().skip(k).step_by(3).copied().collect::<Vec<_>>();
    assert!(rung(0).iter().all(|&l| l == 100.0));
    let worst = rung(2).iter().copied().fold(f64::MIN, f64::max);
    let middle = rung(1).iter().copied().fold(f64::MAX, f64::min);
    assert!(worst < middle, "{worst} vs {middle}");
}
