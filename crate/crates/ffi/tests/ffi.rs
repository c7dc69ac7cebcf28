use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use stabilitykit::model::{predict_video, write_checkpoint, Model, ModelParams, Pipeline};
use stabilitykit::synth::{gen_trajectory, procedural_base, render_shaky, required_half_extent, Axis, ShakeComponent, ShakeSpec};
use stabilitykit::FrameSequence;
use stabilitykit_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sk_last_error()) }.to_string_lossy().into_owned()
}

fn rgb_of(seq: &FrameSequence) -> Vec<u8> {
    seq.frames().iter().flat_map(|f| f.rgb().to_vec()).collect()
}

fn to_handle(seq: &FrameSequence) -> *mut SkSequence {
    let rgb = rgb_of(seq);
    let mut h = ptr::null_mut();
    let st = unsafe {
        sk_sequence_from_rgb(seq.width(), seq.height(), seq.len(), seq.fps(), rgb.as_ptr(), rgb.len(), &mut h)
    };
    assert_eq!(st, SkStatus::Ok, "{}", last_error());
    h
}

fn flat(frames: usize) -> Vec<u8> {
    vec![90u8; frames * 32 * 24 * 3]
}

fn shaky(len: usize, amp: f64) -> FrameSequence {
    let spec = ShakeSpec {
        components: vec![
            ShakeComponent { amplitude: amp, frequency: 7.0, phase: 0.4, axis: Axis::X },
            ShakeComponent { amplitude: amp, frequency: 5.0, phase: 1.3, axis: Axis::Y },
        ],
        noise_sigma: 0.0,
        length: len,
    };
    let traj = gen_trajectory(&spec, 1).unwrap();
    let half = required_half_extent(&traj, 64).ceil() as usize + 2;
    let base = procedural_base(2 * half + 1, 2 * half + 1, 4).unwrap();
    render_shaky(&base, &traj, 64).unwrap()
}

#[test]
fn null_arguments_are_reported() {
    let mut db = 0.0;
    assert_eq!(unsafe { sk_itf(ptr::null(), &mut db) }, SkStatus::NullArgument);
    assert!(last_error().contains("null"));
    let rgb = flat(3);
    let st = unsafe { sk_sequence_from_rgb(32, 24, 3, 30.0, rgb.as_ptr(), rgb.len(), ptr::null_mut()) };
    assert_eq!(st, SkStatus::NullArgument);
    assert_eq!(unsafe { sk_sequence_load(ptr::null(), &mut ptr::null_mut()) }, SkStatus::NullArgument);
    unsafe {
        sk_sequence_free(ptr::null_mut());
        sk_model_free(ptr::null_mut());
    }
}

#[test]
fn static_sequence_metrics() {
    let rgb = vec![90u8; 20 * 48 * 40 * 3];
    let mut h = ptr::null_mut();
    let st = unsafe { sk_sequence_from_rgb(48, 40, 20, 25.0, rgb.as_ptr(), rgb.len(), &mut h) };
    assert_eq!(st, SkStatus::Ok);
    assert_eq!(last_error(), "");
    let (mut n, mut w, mut hh) = (0, 0, 0);
    assert_eq!(unsafe { sk_sequence_info(h, &mut n, &mut w, &mut hh) }, SkStatus::Ok);
    assert_eq!((n, w, hh), (20, 48, 40));
    let mut db = 0.0;
    assert_eq!(unsafe { sk_itf(h, &mut db) }, SkStatus::Ok);
    assert_eq!(db, 100.0);
    // a flat image has no trackable structure
    let mut s = SkStability::default();
    assert_eq!(unsafe { sk_stability_score(h, &mut s) }, SkStatus::DegenerateContent, "{}", last_error());
    assert!(!last_error().is_empty());
    unsafe { sk_sequence_free(h) };
}

#[test]
fn size_mismatch_is_invalid() {
    let rgb = flat(3);
    let mut h = ptr::null_mut();
    let st = unsafe { sk_sequence_from_rgb(32, 24, 4, 30.0, rgb.as_ptr(), rgb.len(), &mut h) };
    assert_eq!(st, SkStatus::InvalidArgument);
    assert!(h.is_null());
}

#[test]
fn missing_files() {
    let path = CString::new("/nonexistent/clip.y4m").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { sk_sequence_load(path.as_ptr(), &mut h) }, SkStatus::Io);
    assert!(h.is_null());
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { sk_model_load(path.as_ptr(), &mut m) }, SkStatus::Io);
    assert!(m.is_null());
}

#[test]
fn trajectory_and_score_match_the_library() {
    let seq = shaky(32, 2.0);
    let h = to_handle(&seq);
    let mut len = 0;
    let mut small = [0.0; 4];
    let st = unsafe { sk_trajectory(h, small.as_mut_ptr(), small.as_mut_ptr(), small.as_mut_ptr(), 4, &mut len) };
    assert_eq!(st, SkStatus::BufferTooSmall);
    assert_eq!(len, 32);
    let (mut x, mut y, mut t) = (vec![0.0; 32], vec![0.0; 32], vec![0.0; 32]);
    let st = unsafe { sk_trajectory(h, x.as_mut_ptr(), y.as_mut_ptr(), t.as_mut_ptr(), 32, &mut len) };
    assert_eq!(st, SkStatus::Ok, "{}", last_error());
    let want = stabilitykit::motion::trajectory_from_sequence(
        &seq,
        stabilitykit::motion::MotionModel::Similarity,
        &Default::default(),
    )
    .unwrap();
    assert_eq!((x, y, t), (want.x.clone(), want.y.clone(), want.theta.clone()));
    let mut s = SkStability::default();
    assert_eq!(unsafe { sk_stability_score(h, &mut s) }, SkStatus::Ok);
    let r = stabilitykit::metrics::stability_score(&want).unwrap();
    assert_eq!(s.score, r.score);
    assert!(s.score <= s.x && s.score <= s.y && s.score <= s.theta);
    unsafe { sk_sequence_free(h) };
}

#[test]
fn model_round_trip_and_prediction() {
    let pipeline = Pipeline::default();
    let dims = pipeline.dims().unwrap();
    let model = Model {
        params: ModelParams::init(dims.fused_dim(), 3).quantized(),
        pipeline,
        dims,
        config_hash: 0xfeed,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &model).unwrap();
    std::fs::write(&path, buf).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { sk_model_load(cpath.as_ptr(), &mut m) }, SkStatus::Ok, "{}", last_error());
    let mut dim = 0;
    assert_eq!(unsafe { sk_model_input_dim(m, &mut dim) }, SkStatus::Ok);
    assert_eq!(dim, 288);

    let seq = shaky(70, 1.5);
    let h = to_handle(&seq);
    let mut p = f64::NAN;
    assert_eq!(unsafe { sk_predict(m, h, 2, 9, &mut p) }, SkStatus::Ok, "{}", last_error());
    assert_eq!(p, predict_video(&model, &seq, 2, 9).unwrap());
    assert_eq!(unsafe { sk_predict(m, h, 0, 9, &mut p) }, SkStatus::InvalidArgument);

    // too short for a 32-frame clip at interval 2
    let short = to_handle(&shaky(20, 1.0));
    assert_eq!(unsafe { sk_predict(m, short, 1, 0, &mut p) }, SkStatus::InsufficientData);
    unsafe {
        sk_sequence_free(short);
        sk_sequence_free(h);
        sk_model_free(m);
    }
}

#[test]
fn errors_are_per_thread() {
    let mut db = 0.0;
    assert_eq!(unsafe { sk_itf(ptr::null(), &mut db) }, SkStatus::NullArgument);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
    assert!(!last_error().is_empty());
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(manifest_dir().join("include/stabilitykit.h")).unwrap();
    for name in [
        "sk_sequence_load",
        "sk_sequence_from_rgb",
        "sk_sequence_free",
        "sk_itf",
        "sk_stability_score",
        "sk_trajectory",
        "sk_model_load",
        "sk_predict",
        "sk_last_error",
        "SK_STATUS_OK",
        "typedef struct SkSequence SkSequence",
        "typedef struct SkModel SkModel",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Directory holding the library artifacts of the current profile.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    // test builds link the rlib only; produce the archive of the same profile
    let mut build = Command::new(env!("CARGO"));
    build.args(["build", "--lib", "-p", "stabilitykit-ffi"]);
    if !cfg!(debug_assertions) {
        build.arg("--release");
    }
    assert!(build.status().expect("run cargo").success());
    let lib = artifact_dir().join("libstabilitykit_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest_dir().join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("run cc");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
