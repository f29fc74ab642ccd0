//! Command-line front end. [`run`] returns the process exit code:
//! 0 on success, 1 on usage errors, 2 on data or format errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::parse_config;
use crate::corpus::{evaluation_corpus, train_synthetic_dictionary, training_maps, SpriteScene};
use crate::count_map::{build_full_count_map, CountMap};
use crate::dvs_sim::{simulate, IntensityScene, SceneKind, SceneParams, SimConfig};
use crate::error::{Error, Result};
use crate::event_stream::{EventStream, Polarity};
use crate::metrics::{dfrf, rate_curves_csv, reconstruct_frame, rmse_psth, MetricReport};
use crate::pipeline::{
    experiment_bin_sweep, experiment_magnification, experiment_reconstruction,
    experiment_robustness, run_pipeline, window_bounds, CountUpscaler, ExperimentOutput, SrConfig,
    TimeModel,
};
use crate::sparse_sr::{train_dictionaries, DictionaryPair, DEFAULT_ATOMS};

#[derive(Debug, Parser)]
#[command(
    name = "evsr",
    version,
    about = "Super-resolution of DVS event streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a synthetic scene and write its event stream.
    Simulate(SimulateArgs),
    /// Train coupled dictionaries from high-resolution recordings or count maps.
    TrainDict(TrainDictArgs),
    /// Super-resolve an event stream.
    SuperResolve(SuperResolveArgs),
    /// Spatially downsample an event stream by an integer factor.
    Downsample(DownsampleArgs),
    /// Compare a candidate stream against a reference.
    Metrics(MetricsArgs),
    /// Write grey-scale frames and total-rate curves of a stream.
    Render(RenderArgs),
    /// Run one of the evaluation protocols and write a run directory.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SceneName {
    Uniform,
    ExpRamp,
    MovingBar,
    MovingDisk,
    /// Random moving sprites drawn from the seed.
    Sprites,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scene: SceneName,
    #[arg(long, default_value_t = 64)]
    width: u16,
    #[arg(long, default_value_t = 64)]
    height: u16,
    /// µs.
    #[arg(long, default_value_t = 200_000)]
    duration: u32,
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    /// Log-intensity sampling step, µs.
    #[arg(long, default_value_t = 100)]
    time_step: u32,
    /// Uniform timestamp jitter half-width, µs.
    #[arg(long, default_value_t = 0)]
    jitter: u32,
    /// Ramp rate for exp_ramp, 1/s.
    #[arg(long, default_value_t = 10.0)]
    k: f64,
    /// Pixels per second.
    #[arg(long, default_value_t = 64.0)]
    speed: f64,
    #[arg(long, default_value_t = 8.0)]
    bar_width: f64,
    #[arg(long, default_value_t = 8.0)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    contrast: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; `.evt` writes text, anything else binary.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainDictArgs {
    /// High-resolution event streams (`.evt`/`.evsr`) or count maps (`.csv`).
    #[arg(long = "input", num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Train on this many random synthetic recordings instead of (or in
    /// addition to) the inputs.
    #[arg(long, default_value_t = 0)]
    synthetic: usize,
    /// Low-resolution size of the synthetic recordings.
    #[arg(long, default_value_t = 32)]
    lr_size: u16,
    #[arg(long, default_value_t = 2)]
    factor: usize,
    #[arg(long, default_value_t = DEFAULT_ATOMS)]
    atoms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Pipeline settings; flags override the config file, which overrides defaults.
#[derive(Debug, Args, Default)]
struct SrFlags {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    factor: Option<usize>,
    /// µs.
    #[arg(long)]
    window_length: Option<u32>,
    /// µs.
    #[arg(long)]
    rate_bin: Option<u32>,
    /// µs.
    #[arg(long)]
    metric_bin: Option<u32>,
    /// Nine comma-separated weights, row-major.
    #[arg(long)]
    kernel: Option<String>,
    /// none, linear or quadratic.
    #[arg(long)]
    total_scale: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Dominating-rate headroom of the sampler.
    #[arg(long)]
    headroom: Option<f64>,
    #[arg(long = "dict")]
    dictionary: Option<PathBuf>,
}

impl SrFlags {
    fn resolve(&self) -> Result<SrConfig> {
        let mut cfg = SrConfig::default();
        if let Some(path) = &self.config {
            for (k, v) in parse_config(&read_text(path)?)? {
                cfg.set(&k, &v)?;
            }
        }
        let flags: [(&str, Option<String>); 13] = [
            ("factor", self.factor.map(|v| v.to_string())),
            ("window_length", self.window_length.map(|v| v.to_string())),
            ("rate_bin", self.rate_bin.map(|v| v.to_string())),
            ("metric_bin", self.metric_bin.map(|v| v.to_string())),
            ("kernel", self.kernel.clone()),
            ("total_scale", self.total_scale.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("beta", self.beta.map(|v| v.to_string())),
            ("max_iter", self.max_iter.map(|v| v.to_string())),
            ("tol", self.tol.map(|v| v.to_string())),
            ("headroom", self.headroom.map(|v| v.to_string())),
            (
                "dictionary",
                self.dictionary.as_ref().map(|p| p.display().to_string()),
            ),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SuperResolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    sr: SrFlags,
}

#[derive(Debug, Args)]
struct DownsampleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    factor: u16,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    candidate: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// PSTH bin, µs.
    #[arg(long, default_value_t = 100)]
    metric_bin: u32,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Frame integration time, µs; defaults to the whole stream.
    #[arg(long)]
    frame_length: Option<u32>,
    /// Low-resolution stream for the `f_lr` column of the curves; defaults
    /// to the input itself.
    #[arg(long)]
    lr: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    metric_bin: u32,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Reconstruction,
    Magnification,
    BinSweep,
    Robustness,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: ExperimentKind,
    /// Input stream; defaults to the synthetic moving-bar recording.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Comma-separated rate bins for bin-sweep, µs.
    #[arg(long, default_value = "20,1000,10000,80000", value_delimiter = ',')]
    bins: Vec<u32>,
    /// Number of seeds for robustness, starting at the configured seed.
    #[arg(long, default_value_t = 10)]
    repeats: u64,
    /// Synthetic recordings used when no dictionary is given.
    #[arg(long, default_value_t = 24)]
    train_recordings: usize,
    #[command(flatten)]
    sr: SrFlags,
}

/// Parse `args` (including the program name) and execute.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Argument(_)) {
                1
            } else {
                2
            }
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::TrainDict(a) => cmd_train_dict(a),
        Command::SuperResolve(a) => cmd_super_resolve(a),
        Command::Downsample(a) => cmd_downsample(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Render(a) => cmd_render(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_context(path, e))
}

fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

fn is_text(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "evt")
}

pub fn read_stream(path: &Path) -> Result<EventStream> {
    let bytes = fs::read(path).map_err(|e| io_context(path, e))?;
    if is_text(path) {
        EventStream::parse_text(&bytes)
    } else {
        EventStream::read_binary(&bytes)
    }
}

pub fn write_stream(path: &Path, stream: &EventStream) -> Result<()> {
    let bytes = if is_text(path) {
        stream.to_text().into_bytes()
    } else {
        stream.write_binary()
    };
    write_file(path, &bytes)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_context(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_context(path, e))
}

fn load_dictionary(cfg: &SrConfig) -> Result<DictionaryPair> {
    let path = cfg.dictionary.as_ref().ok_or_else(|| {
        Error::arg("no dictionary given (use --dict or `dictionary` in the config)")
    })?;
    let dict = DictionaryPair::from_bytes(&fs::read(path).map_err(|e| io_context(path, e))?)?;
    if dict.factor() != cfg.factor {
        return Err(Error::arg(format!(
            "dictionary {} is for factor {}, configured factor is {}",
            path.display(),
            dict.factor(),
            cfg.factor
        )));
    }
    Ok(dict)
}

fn print_config(cfg: &SrConfig) {
    println!("# effective configuration");
    print!("{cfg}");
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let sim = SimConfig {
        theta: a.theta,
        time_step: a.time_step,
        jitter_us: a.jitter,
    };
    let params = SceneParams {
        k: a.k,
        speed: a.speed,
        bar_width: a.bar_width,
        radius: a.radius,
        contrast: a.contrast,
    };
    println!("# effective configuration");
    println!(
        "width = {}\nheight = {}\nduration = {}",
        a.width, a.height, a.duration
    );
    println!(
        "theta = {}\ntime_step = {}\njitter = {}",
        sim.theta, sim.time_step, sim.jitter_us
    );
    println!("seed = {}", a.seed);
    let stream = match a.scene {
        SceneName::Sprites => {
            println!("scene = sprites");
            let scene = SpriteScene::random(a.width, a.height, a.duration, a.seed)?;
            simulate(&scene, &sim, a.seed)?
        }
        other => {
            let name = other
                .to_possible_value()
                .map(|v| v.get_name().replace('-', "_"))
                .unwrap_or_default();
            let kind = SceneKind::from_name(&name, &params)?;
            println!("scene = {name}");
            match kind {
                SceneKind::ExpRamp { k } => println!("k = {k}"),
                SceneKind::MovingBar {
                    speed,
                    bar_width,
                    contrast,
                } => {
                    println!("speed = {speed}\nbar_width = {bar_width}\ncontrast = {contrast}")
                }
                SceneKind::MovingDisk {
                    speed,
                    radius,
                    contrast,
                } => {
                    println!("speed = {speed}\nradius = {radius}\ncontrast = {contrast}")
                }
                SceneKind::Uniform => {}
            }
            simulate(
                &IntensityScene::new(kind, a.width, a.height, a.duration)?,
                &sim,
                a.seed,
            )?
        }
    };
    write_stream(&a.out, &stream)?;
    println!(
        "wrote {} events ({} ON, {} OFF) to {}",
        stream.len(),
        stream.count_polarity(Polarity::On),
        stream.count_polarity(Polarity::Off),
        a.out.display()
    );
    Ok(())
}

fn cmd_train_dict(a: TrainDictArgs) -> Result<()> {
    println!("# effective configuration");
    println!(
        "factor = {}\natoms = {}\nseed = {}",
        a.factor, a.atoms, a.seed
    );
    let mut maps: Vec<CountMap> = Vec::new();
    for path in &a.inputs {
        if path.extension().is_some_and(|e| e == "csv") {
            maps.push(CountMap::from_csv(&read_text(path)?, Polarity::On)?);
        } else {
            let s = read_stream(path)?;
            for p in Polarity::BOTH {
                maps.push(build_full_count_map(&s, p));
            }
        }
    }
    if a.synthetic > 0 {
        let f = u16::try_from(a.factor).map_err(|_| Error::arg("factor too large"))?;
        println!(
            "synthetic = {} recordings at {}x{}",
            a.synthetic,
            a.lr_size * f,
            a.lr_size * f
        );
        maps.extend(training_maps(
            a.lr_size * f,
            a.lr_size * f,
            200_000,
            a.synthetic,
            &SimConfig::default(),
        )?);
    }
    if maps.is_empty() {
        return Err(Error::arg(
            "no training data: pass --input files or --synthetic N",
        ));
    }
    let dict = train_dictionaries(&maps, a.factor, a.atoms, a.seed)?;
    write_file(&a.out, &dict.to_bytes())?;
    println!(
        "wrote {} atoms from {} maps to {}",
        dict.atom_count(),
        maps.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_super_resolve(a: SuperResolveArgs) -> Result<()> {
    let cfg = a.sr.resolve()?;
    print_config(&cfg);
    let dict = load_dictionary(&cfg)?;
    let input = read_stream(&a.input)?;
    let run = run_pipeline(
        &input,
        CountUpscaler::Sparse(&dict),
        TimeModel::Filtered,
        &cfg,
    )?;
    for w in &run.windows {
        println!(
            "window [{}, {}) {}: lr={} hr={} fallback_pixels={}",
            w.window.t0,
            w.window.t1,
            w.polarity.name(),
            w.lr_events,
            w.hr_events,
            w.fallback_pixels
        );
    }
    write_stream(&a.out, &run.stream)?;
    println!(
        "wrote {}x{} stream with {} events to {}",
        run.stream.width(),
        run.stream.height(),
        run.stream.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_downsample(a: DownsampleArgs) -> Result<()> {
    println!("# effective configuration\nfactor = {}", a.factor);
    let s = read_stream(&a.input)?.downsample_spatial(a.factor)?;
    write_stream(&a.out, &s)?;
    println!(
        "wrote {}x{} stream with {} events to {}",
        s.width(),
        s.height(),
        s.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> Result<()> {
    println!("# effective configuration\nmetric_bin = {}", a.metric_bin);
    let cand = read_stream(&a.candidate)?;
    let refr = read_stream(&a.reference)?;
    let same_geometry = cand.width() == refr.width() && cand.height() == refr.height();
    let rmse = if same_geometry {
        Some(rmse_psth(&cand, &refr, a.metric_bin)?)
    } else {
        None
    };
    let d = match dfrf(&cand, &refr, a.metric_bin) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    let factor = if refr.width() > 0 {
        (cand.width() / refr.width()) as usize
    } else {
        1
    };
    let report = MetricReport {
        rmse,
        dfrf: d,
        lr_events: refr.len(),
        hr_events: cand.len(),
        factor,
        rate_bin: 0,
        metric_bin: a.metric_bin,
        window_length: refr.duration(),
        windows: 1,
        seed: 0,
    };
    let text = report.to_key_value();
    print!("{text}");
    if let Some(out) = &a.out {
        write_file(out, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let s = read_stream(&a.input)?;
    let frame_length = a.frame_length.unwrap_or(s.duration().max(1));
    println!(
        "# effective configuration\nframe_length = {frame_length}\nmetric_bin = {}",
        a.metric_bin
    );
    let windows = window_bounds(s.duration(), frame_length)?;
    for (i, w) in windows.iter().enumerate() {
        let frame = reconstruct_frame(&s, *w);
        write_file(
            &a.out_dir.join(format!("frame_{i:04}.pgm")),
            &frame.to_pgm(),
        )?;
    }
    let lr = match &a.lr {
        Some(p) => read_stream(p)?,
        None => s.clone(),
    };
    write_file(
        &a.out_dir.join("curves.csv"),
        rate_curves_csv(&lr, &s, a.metric_bin).as_bytes(),
    )?;
    println!(
        "wrote {} frames and curves.csv to {}",
        windows.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn write_outputs(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    write_file(
        &dir.join("report.txt"),
        out.report.to_key_value().as_bytes(),
    )?;
    write_file(&dir.join("curves.csv"), out.curves_csv.as_bytes())?;
    for (name, frame) in &out.frames {
        write_file(&dir.join(format!("frame_{name}.pgm")), &frame.to_pgm())?;
    }
    write_stream(&dir.join("sr.evsr"), &out.hr)?;
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = a.sr.resolve()?;
    if matches!(a.kind, ExperimentKind::Magnification)
        && a.sr.factor.is_none()
        && cfg.dictionary.is_none()
    {
        cfg.factor = 3;
    }
    print_config(&cfg);
    let input = match &a.input {
        Some(p) => read_stream(p)?,
        None => {
            // ground truth at 64x64 for reconstruction, low resolution 32x32 for magnification
            let size = if matches!(a.kind, ExperimentKind::Magnification) {
                32
            } else {
                64
            };
            evaluation_corpus(size, size, 200_000, &SimConfig::default())?
                .swap_remove(0)
                .stream
        }
    };
    let dict = if cfg.dictionary.is_some() {
        load_dictionary(&cfg)?
    } else {
        let (lw, lh) = match a.kind {
            ExperimentKind::Magnification => (input.width(), input.height()),
            _ => (
                input.width() / cfg.factor as u16,
                input.height() / cfg.factor as u16,
            ),
        };
        println!(
            "training dictionary on {} synthetic recordings",
            a.train_recordings
        );
        train_synthetic_dictionary(cfg.factor, lw, lh, 200_000, a.train_recordings, cfg.seed)?
    };
    write_file(&a.out_dir.join("config.txt"), cfg.to_string().as_bytes())?;
    match a.kind {
        ExperimentKind::Reconstruction => {
            let out = experiment_reconstruction(&input, &dict, &cfg)?;
            write_outputs(&a.out_dir, &out)?;
            print!("{}", out.report.to_key_value());
        }
        ExperimentKind::Magnification => {
            let out = experiment_magnification(&input, &dict, &cfg)?;
            write_outputs(&a.out_dir, &out)?;
            print!("{}", out.report.to_key_value());
        }
        ExperimentKind::BinSweep => {
            let rows = experiment_bin_sweep(&input, &dict, &cfg, &a.bins)?;
            let mut csv = String::from("rate_bin_us,rmse\n");
            for (b, r) in &rows {
                csv.push_str(&format!("{b},{r}\n"));
            }
            write_file(&a.out_dir.join("bin_sweep.csv"), csv.as_bytes())?;
            print!("{csv}");
        }
        ExperimentKind::Robustness => {
            let seeds: Vec<u64> = (0..a.repeats).map(|i| cfg.seed + i).collect();
            let r = experiment_robustness(&input, &dict, &cfg, &seeds)?;
            let mut csv = String::from("seed,rmse\n");
            for (s, v) in r.seeds.iter().zip(&r.rmse) {
                csv.push_str(&format!("{s},{v}\n"));
            }
            write_file(&a.out_dir.join("robustness.csv"), csv.as_bytes())?;
            let summary = format!(
                "mean={:.6}\nstd={:.6}\nmin={:.6}\nmax={:.6}\nrelative_std={:.6}\n",
                r.mean,
                r.std,
                r.min,
                r.max,
                r.std / r.mean
            );
            write_file(&a.out_dir.join("report.txt"), summary.as_bytes())?;
            print!("{csv}{summary}");
        }
    }
    println!("run directory: {}", a.out_dir.display());
    Ok(())
}
