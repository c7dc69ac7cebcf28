//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit code, so every command can be driven
//! in-process by tests.

mod config;

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

pub use config::{MosRunConfig, ScoreConfig, SynthRunConfig, TrainRunConfig};

use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricReport};
use crate::features::{read_cache, write_cache};
use crate::media::{load_frame_dir, load_y4m, FrameSequence};
use crate::metrics::{itf, stability_score_with};
use crate::model::{
    fnv1a, predict_sample, predict_video, read_checkpoint, train, write_checkpoint, write_log_csv,
    Model, TrainOutcome, TrainSample,
};
use crate::mos::{compute_mos, reject_outlier_subjects, RatingsTable};
use crate::motion::{trajectory_from_sequence, MotionOptions};
use crate::numfmt::round_sig;
use crate::rng::{derive_seed, seeded};
use crate::synth::{gen_dataset, write_dataset};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MISSING_MODEL: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;
pub const EXIT_INSUFFICIENT: i32 = 5;

pub const SEED_ENV: &str = "STABILITYKIT_SEED";

#[derive(Debug, Parser)]
#[command(name = "stabilitykit", version, about = "No-reference video stability assessment")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed; falls back to the config file, then $STABILITYKIT_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ITF, Stability Score and optionally the learned prediction as JSON.
    Score {
        /// Y4M file or directory of PPM/PGM frames.
        video: PathBuf,
        /// Trained checkpoint; enables the learned prediction.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Clips averaged for the learned prediction.
        #[arg(long)]
        clips: Option<usize>,
    },
    /// Camera trajectory as CSV (frame,x,y,theta).
    Trajectory {
        video: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write gnuplot-ready columns here.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Extract features, train the regressor and save a checkpoint.
    Train {
        /// CSV with video_id, path and a label column (mos or gt_score).
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Per-epoch log CSV; defaults to <out>.log.csv.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Feature cache; defaults to <out>.<hash>.features.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Correlation report for predictions against subjective scores.
    Eval {
        /// CSV of video_id,prediction.
        pred: PathBuf,
        /// CSV of video_id,mos (extra columns ignored).
        mos: PathBuf,
    },
    /// Clean raw ratings into MOS; prints the rejection report.
    Mos {
        /// CSV of subject_id,video_id,score[,session].
        ratings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render a labeled synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
    },
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    MissingModel(PathBuf),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_degenerate_content() || matches!(e, Error::DegenerateInput(_)) {
        return EXIT_DEGENERATE;
    }
    match e {
        Error::InsufficientData(_)
        | Error::InsufficientRatings { .. }
        | Error::EmptyAfterCleaning
        | Error::DegenerateBatch(_) => EXIT_INSUFFICIENT,
        _ => EXIT_INPUT,
    }
}

/// Parse `args` (program name first) and run. Primary output goes to `out`,
/// diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: thread pool: {e}");
            return EXIT_INPUT;
        }
    };
    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(&cli, &mut buf));
    if out.write_all(&buf).and_then(|_| out.flush()).is_err() {
        return EXIT_INPUT;
    }
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::MissingModel(p)) => {
            let _ = writeln!(err, "error: model checkpoint not found: {}", p.display());
            EXIT_MISSING_MODEL
        }
        Err(Failure::Core(e)) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Process entry point.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let stderr = std::io::stderr();
    let mut err = stderr.lock();
    let code = run(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    code
}

fn dispatch(cli: &Cli, out: &mut Vec<u8>) -> CmdResult {
    match &cli.command {
        Command::Score {
            video,
            model,
            config,
            clips,
        } => {
            let mut cfg: ScoreConfig = config::load(config.as_deref())?;
            if let Some(c) = clips {
                cfg.clips = *c;
            }
            let seed = resolve_seed(cli.seed, cfg.seed)?;
            cmd_score(video, model.as_deref(), &cfg, seed, out)
        }
        Command::Trajectory {
            video,
            out: path,
            plot,
            config,
        } => {
            let cfg: ScoreConfig = config::load(config.as_deref())?;
            let seed = resolve_seed(cli.seed, cfg.seed)?;
            cmd_trajectory(video, path.as_deref(), plot.as_deref(), &cfg, seed, out)
        }
        Command::Train {
            manifest,
            out: path,
            config,
            log,
            cache,
            epochs,
        } => {
            let mut cfg: TrainRunConfig = config::load(config.as_deref())?;
            if let Some(e) = epochs {
                cfg.epochs = *e;
            }
            let seed = resolve_seed(cli.seed, cfg.seed)?;
            let log = log.clone().unwrap_or_else(|| with_suffix(path, ".log.csv"));
            cmd_train(manifest, path, &log, cache.as_deref(), &cfg, seed, out)
        }
        Command::Eval { pred, mos } => cmd_eval(pred, mos, out),
        Command::Mos {
            ratings,
            out: path,
            config,
        } => {
            let cfg: MosRunConfig = config::load(config.as_deref())?;
            cmd_mos(ratings, path, &cfg, out)
        }
        Command::Synth {
            out: path,
            config,
            count,
        } => {
            let mut cfg: SynthRunConfig = config::load(config.as_deref())?;
            if let Some(c) = count {
                cfg.dataset.count = *c;
            }
            let seed = resolve_seed(cli.seed, cfg.seed)?;
            cmd_synth(path, &cfg, seed, out)
        }
    }
}

fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Y4M file or a directory of PNM frames.
pub fn load_video(path: &Path) -> Result<FrameSequence> {
    if path.is_dir() {
        load_frame_dir(path)
    } else {
        load_y4m(path)
    }
}

/// JSON number rounded to six significant digits; non-finite becomes null.
fn num(x: f64) -> Value {
    serde_json::Number::from_f64(round_sig(x, 6)).map_or(Value::Null, Value::Number)
}

fn emit(out: &mut dyn Write, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn motion_options(cfg: &ScoreConfig, seed: u64) -> MotionOptions {
    let mut opts = MotionOptions {
        symmetric: cfg.symmetric,
        ..MotionOptions::default()
    };
    opts.ransac.seed = seed;
    opts
}

fn cmd_score(
    video: &Path,
    model: Option<&Path>,
    cfg: &ScoreConfig,
    seed: u64,
    out: &mut dyn Write,
) -> CmdResult {
    let model = match model {
        Some(p) if !p.is_file() => return Err(Failure::MissingModel(p.to_path_buf())),
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| Error::io(p, e))?;
            Some(read_checkpoint(BufReader::new(f))?)
        }
        None => None,
    };
    let seq = load_video(video)?;
    let itf_db = itf(&seq)?.score_db;
    let traj = trajectory_from_sequence(&seq, cfg.motion_model, &motion_options(cfg, seed))?;
    let s = stability_score_with(&traj, &cfg.stability)?;
    let mut report = Map::new();
    report.insert("itf_db".into(), num(itf_db));
    report.insert(
        "stability".into(),
        json!({
            "score": num(s.score),
            "x": num(s.component_scores.x),
            "y": num(s.component_scores.y),
            "theta": num(s.component_scores.theta),
        }),
    );
    if let Some(m) = &model {
        let p = predict_video(m, &seq, cfg.clips, seed)?;
        report.insert("prediction".into(), num(p));
    }
    emit(out, &Value::Object(report))?;
    Ok(())
}

fn cmd_trajectory(
    video: &Path,
    csv: Option<&Path>,
    plot: Option<&Path>,
    cfg: &ScoreConfig,
    seed: u64,
    out: &mut dyn Write,
) -> CmdResult {
    let seq = load_video(video)?;
    let traj = trajectory_from_sequence(&seq, cfg.motion_model, &motion_options(cfg, seed))?;
    match csv {
        Some(p) => write_file(p, |w| traj.write_csv(w))?,
        None => traj.write_csv(&mut *out).map_err(|e| Error::io("<stdout>", e))?,
    }
    if let Some(p) = plot {
        write_file(p, |w| traj.write_plot_data(seq.fps(), w))?;
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub label: f64,
}

/// Manifest CSV with a header naming `video_id`, `path` and a label column
/// (`mos`, else `gt_score`). Relative paths resolve against the manifest's
/// directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("manifest: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(path_col)) = (col("video_id"), col("path")) else {
        return Err(Error::Parse("manifest needs video_id and path columns".into()));
    };
    let label_col = col("mos")
        .or_else(|| col("gt_score"))
        .ok_or_else(|| Error::Parse("manifest needs a mos or gt_score column".into()))?;
    let root = path.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("manifest: {e}")))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let label: f64 = field(label_col).parse().map_err(|_| {
            Error::Parse(format!("manifest row {}: bad label {:?}", i + 1, field(label_col)))
        })?;
        if !label.is_finite() {
            return Err(Error::InvalidValue(format!("manifest row {}: non-finite label", i + 1)));
        }
        entries.push(ManifestEntry {
            id: field(id_col).to_string(),
            path: root.join(field(path_col)),
            label,
        });
    }
    Ok(entries)
}

fn cmd_train(
    manifest: &Path,
    ckpt: &Path,
    log: &Path,
    cache: Option<&Path>,
    cfg: &TrainRunConfig,
    seed: u64,
    out: &mut dyn Write,
) -> CmdResult {
    let tcfg = cfg.train_config(seed);
    tcfg.validate()?;
    let entries = read_manifest(manifest)?;
    let n_val = (entries.len() as f64 * cfg.val_fraction).round() as usize;
    let n_train = entries.len().saturating_sub(n_val);
    if n_train < 2 * tcfg.batch_size {
        return Err(Error::InsufficientData(format!(
            "{} videos leave {n_train} for training; need at least {}",
            entries.len(),
            2 * tcfg.batch_size
        ))
        .into());
    }
    if n_val > 0 && n_val < 5 {
        return Err(Error::InsufficientData(format!(
            "validation split of {n_val} videos is too small to evaluate"
        ))
        .into());
    }

    let manifest_bytes = fs::read(manifest).map_err(|e| Error::io(manifest, e))?;
    let hash = {
        let mut key = serde_json::to_vec(&cfg.pipeline).map_err(|e| Error::Parse(e.to_string()))?;
        key.extend_from_slice(&(cfg.clips_per_video as u64).to_le_bytes());
        key.extend_from_slice(&seed.to_le_bytes());
        key.extend_from_slice(&manifest_bytes);
        fnv1a(&key)
    };
    let cache = cache
        .map(Path::to_path_buf)
        .unwrap_or_else(|| with_suffix(ckpt, &format!(".{hash:016x}.features")));
    let rows = clip_rows(&entries, cfg, seed, &cache)?;
    let samples: Vec<TrainSample> = entries
        .iter()
        .zip(rows.chunks(cfg.clips_per_video))
        .map(|(e, clips)| TrainSample {
            clips: clips.to_vec(),
            mos: e.label,
        })
        .collect();

    let fitted = fit_split(&samples, cfg, seed)?;
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &fitted.model)?;
    write_file(ckpt, |w| w.write_all(&buf))?;
    write_file(log, |w| write_log_csv(w, &fitted.outcome.log))?;
    let (outcome, report) = (&fitted.outcome, &fitted.report);
    let final_loss = outcome.log.last().map_or(f64::NAN, |l| l.loss);
    emit(
        out,
        &json!({
            "checkpoint": ckpt.display().to_string(),
            "epochs": outcome.log.len(),
            "best_epoch": outcome.best_epoch,
            "final_loss": num(final_loss),
            "split": fitted.split,
            "n": fitted.n_eval,
            "report": report_json(report),
        }),
    )?;
    Ok(())
}

/// Fused clip features for every manifest entry, `clips_per_video` rows per
/// video in manifest order, through the f32 cache.
/// A trained model with its held-out evaluation.
pub struct Fitted {
    pub model: Model,
    pub outcome: TrainOutcome,
    /// `"validation"`, or `"train"` when no videos were held out.
    pub split: &'static str,
    pub n_eval: usize,
    pub report: MetricReport,
    pub val_indices: Vec<usize>,
}

/// Seeded train/validation split, training and evaluation of per-video
/// samples, as run by `train`.
pub fn fit_split(samples: &[TrainSample], cfg: &TrainRunConfig, seed: u64) -> Result<Fitted> {
    let tcfg = cfg.train_config(seed);
    let n_val = (samples.len() as f64 * cfg.val_fraction).round() as usize;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    rand::seq::SliceRandom::shuffle(&mut order[..], &mut seeded(derive_seed(seed, 2)));
    let (val_idx, train_idx) = order.split_at(n_val.min(samples.len()));
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    let (train_set, val_set) = (pick(train_idx), pick(val_idx));
    let outcome = train(&train_set, (!val_set.is_empty()).then_some(&val_set[..]), &tcfg)?;

    let config_hash = {
        let key = serde_json::to_vec(&json!({
            "train": tcfg,
            "pipeline": cfg.pipeline,
            "clips_per_video": cfg.clips_per_video,
            "val_fraction": cfg.val_fraction,
        }))
        .map_err(|e| Error::Parse(e.to_string()))?;
        fnv1a(&key)
    };
    let model = Model {
        params: outcome.params.quantized(),
        pipeline: cfg.pipeline,
        dims: cfg.pipeline.dims()?,
        config_hash,
    };
    let (split, eval_set) = if val_set.is_empty() {
        ("train", &train_set)
    } else {
        ("validation", &val_set)
    };
    let preds = eval_set
        .iter()
        .map(|s| predict_sample(&model.params, s))
        .collect::<Result<Vec<_>>>()?;
    let mos: Vec<f64> = eval_set.iter().map(|s| s.mos).collect();
    let report = evaluate(&preds, &mos)?;
    Ok(Fitted {
        model,
        outcome,
        split,
        n_eval: eval_set.len(),
        report,
        val_indices: val_idx.to_vec(),
    })
}

fn clip_rows(
    entries: &[ManifestEntry],
    cfg: &TrainRunConfig,
    seed: u64,
    cache: &Path,
) -> Result<Vec<Vec<f64>>> {
    let dims = cfg.pipeline.dims()?;
    let ids: Vec<String> = entries
        .iter()
        .flat_map(|e| (0..cfg.clips_per_video).map(move |k| format!("{}#{k}", e.id)))
        .collect();
    if let Ok(f) = fs::File::open(cache) {
        if let Ok((h, rows)) = read_cache(BufReader::new(f)) {
            if h.dims == dims && h.ids == ids {
                return Ok(rows);
            }
        }
    }
    let per_video = entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let seq = load_video(&e.path)?;
            cfg.pipeline
                .video_features(&seq, cfg.clips_per_video, derive_seed(derive_seed(seed, 3), i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = per_video.into_iter().flatten().collect();
    let mut buf = Vec::new();
    write_cache(&mut buf, dims, &ids, &rows)?;
    write_file(cache, |w| w.write_all(&buf))?;
    // train on exactly what a later cached run will read back
    Ok(read_cache(&buf[..])?.1)
}

fn report_json(r: &MetricReport) -> Value {
    json!({
        "SROCC": num(r.srocc),
        "PLCC": num(r.plcc),
        "KRCC": num(r.krcc),
        "RMSE": num(r.rmse),
        "plcc_raw": num(r.plcc_raw),
        "logistic_beta": r.logistic_beta.iter().map(|&b| num(b)).collect::<Vec<_>>(),
    })
}

/// Two-column CSV (id, value); a first row whose value does not parse is
/// treated as a header. Extra columns are ignored.
pub fn read_scores(path: &Path) -> Result<Vec<(String, f64)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if rec.len() < 2 {
            return Err(Error::Parse(format!(
                "{} line {}: expected id,value",
                path.display(),
                i + 1
            )));
        }
        match rec[1].parse::<f64>() {
            Ok(v) => rows.push((rec[0].to_string(), v)),
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(Error::Parse(format!(
                    "{} line {}: bad value {:?}",
                    path.display(),
                    i + 1,
                    &rec[1]
                )))
            }
        }
    }
    Ok(rows)
}

fn cmd_eval(pred: &Path, mos: &Path, out: &mut dyn Write) -> CmdResult {
    let preds = read_scores(pred)?;
    let mos = read_scores(mos)?;
    if preds.len() != mos.len() {
        return Err(Error::dims(format!("{} predictions", mos.len()), preds.len()).into());
    }
    let lookup: std::collections::HashMap<&str, f64> =
        preds.iter().map(|(id, v)| (id.as_str(), *v)).collect();
    if lookup.len() != preds.len() {
        return Err(Error::Parse("duplicate video id in predictions".into()).into());
    }
    let mut p = Vec::with_capacity(mos.len());
    for (id, _) in &mos {
        p.push(*lookup.get(id.as_str()).ok_or_else(|| {
            Error::dims(format!("a prediction for {id}"), "none")
        })?);
    }
    let m: Vec<f64> = mos.iter().map(|r| r.1).collect();
    let report = evaluate(&p, &m)?;
    let mut v = report_json(&report);
    v["n"] = json!(m.len());
    emit(out, &v)?;
    Ok(())
}

fn cmd_mos(ratings: &Path, csv: &Path, cfg: &MosRunConfig, out: &mut dyn Write) -> CmdResult {
    let file = fs::File::open(ratings).map_err(|e| Error::io(ratings, e))?;
    let table = RatingsTable::read_csv(BufReader::new(file))?;
    let result = if cfg.clean {
        reject_outlier_subjects(&table, &cfg.reject)?
    } else {
        compute_mos(&table)?
    };
    write_file(csv, |w| result.write_csv(w))?;
    emit(
        out,
        &json!({
            "subjects": table.subjects.len(),
            "videos": table.videos.len(),
            "rejected_subjects": result.rejected_subjects,
            "mos_csv": csv.display().to_string(),
        }),
    )?;
    Ok(())
}

fn cmd_synth(dir: &Path, cfg: &SynthRunConfig, seed: u64, out: &mut dyn Write) -> CmdResult {
    let videos = gen_dataset(&cfg.dataset, seed)?;
    write_dataset(&videos, dir)?;
    emit(
        out,
        &json!({
            "videos": videos.len(),
            "seed": seed,
            "manifest": dir.join("manifest.csv").display().to_string(),
        }),
    )?;
    Ok(())
}
