use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use sqcc::config::{FileConfig, OutputLock, Overrides, Settings, TmaxSetting};
use sqcc::harness::{self, Split, TrainingMode, MIN_FRAMES_PER_POINT};
use sqcc::model_file::ModelSet;
use sqcc::{dataset, frame_store, model_file, results, Error, Result};
use sqcc_core::features::{reference_values, theoretical_sqcs, SqcExtractor, FEATURE_NAMES};
use sqcc_core::{FilterConfig, Modulation, Pool};

#[derive(Parser, Debug)]
#[command(name = "sqcc", version, about = "Spectral-quotient cumulant modulation classifier for OFDM")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Frames per (class, SNR) point.
    #[arg(long, global = true, value_name = "N")]
    frames: Option<usize>,
    #[arg(long, global = true, value_name = "theta1|theta2")]
    pool: Option<Pool>,
    /// Restrict test data to one channel.
    #[arg(long, global = true, value_name = "NAME")]
    channel: Option<String>,
    #[arg(long, global = true, value_name = "NAME")]
    train_channel: Option<String>,
    /// Outlier threshold: a number, `auto` (validation sweep) or `off`.
    #[arg(long, global = true, allow_hyphen_values = true, value_name = "FLOAT|auto|off")]
    tmax: Option<String>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true, value_name = "DB,..")]
    snr: Option<Vec<f64>>,
    /// One classifier per SNR or one for all SNRs.
    #[arg(long, global = true, value_name = "per-snr|pooled")]
    mode: Option<TrainingMode>,
    /// 800 frames per point.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print theoretical spectral-quotient cumulants against the reference table.
    Oracle,
    /// Synthesize frames and write a labelled feature dataset.
    Generate {
        #[arg(long, default_value = "test")]
        split: Split,
        /// Also write the raw received frames, one file per (channel, class, SNR).
        #[arg(long)]
        raw: bool,
    },
    /// Extract feature vectors from a raw frame file.
    Features {
        #[arg(long, value_name = "PATH")]
        frame: PathBuf,
    },
    /// Train a classifier on a dataset file or on freshly generated training data.
    Train {
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Score a model on a dataset file or on freshly generated test data.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Train on the training channel and evaluate every test channel over the SNR grid.
    Sweep,
    /// Run the sweep with the outlier filter on and bypassed.
    Ablation,
    /// Choose the outlier threshold by validation Pcc.
    Tmax,
    /// Classify each frame of a raw frame file.
    Classify {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        frame: PathBuf,
    },
}

fn settings(g: &Global) -> Result<Settings> {
    let file = match &g.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let overrides = Overrides {
        seed: g.seed,
        out: g.out.clone(),
        frames: g.frames,
        pool: g.pool,
        channel: g.channel.clone(),
        train_channel: g.train_channel.clone(),
        t_max: g.tmax.as_deref().map(str::parse).transpose()?,
        snr: g.snr.clone(),
        mode: g.mode,
        paper_scale: g.paper_scale,
    };
    Settings::resolve(file, &overrides)
}

/// Turns `auto` into a fixed threshold by running the validation sweep.
fn resolve_tmax(s: &mut Settings) -> Result<Option<FilterConfig>> {
    let filter = match s.t_max {
        TmaxSetting::Fixed(t) => Some(FilterConfig::new(t)?),
        TmaxSetting::Off => None,
        TmaxSetting::Auto => {
            let mut plan = s.plan(None);
            plan.frames_per_point = plan.frames_per_point.max(MIN_FRAMES_PER_POINT);
            let report = harness::tmax_validation(&plan, &s.tmax_candidates, Some(&s.out))?;
            info!("validation chose T_max = {}", report.chosen);
            s.t_max = TmaxSetting::Fixed(report.chosen);
            Some(FilterConfig::new(report.chosen)?)
        }
    };
    Ok(filter)
}

fn explicit_tmax(s: &Settings, what: &str) -> Result<Option<FilterConfig>> {
    match s.t_max {
        TmaxSetting::Fixed(t) => Ok(Some(FilterConfig::new(t)?)),
        TmaxSetting::Off => Ok(None),
        TmaxSetting::Auto => Err(Error::Precondition(format!(
            "{what} needs an explicit --tmax (a number or off)"
        ))),
    }
}

fn cmd_oracle(pool: Option<Pool>, out: &mut impl Write) -> io::Result<()> {
    let members = pool.map_or(&Modulation::ALL[..], |p| p.members());
    write!(out, "{:<10}", "modulation")?;
    for name in FEATURE_NAMES {
        write!(out, " {:>26}", format!("{name} theory/table/delta"))?;
    }
    writeln!(out)?;
    for &m in members {
        write!(out, "{:<10}", m.name())?;
        let theory = theoretical_sqcs(m).values;
        for (t, r) in theory.iter().zip(reference_values(m)) {
            write!(out, " {:>8.4} {:>7.2} {:>+9.4}", t, r, t - r)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn raw_file_name(split: Split, channel: &str, m: Modulation, snr: f64) -> String {
    format!("frames_{split}_{channel}_{}_{snr}dB.bin", m.name())
}

fn cmd_generate(mut s: Settings, split: Split, raw: bool) -> Result<()> {
    let _lock = OutputLock::acquire(&s.out)?;
    let filter = resolve_tmax(&mut s)?;
    let plan = s.plan(filter);
    let channels = match split {
        Split::Test => plan.channels.clone(),
        Split::Train | Split::Validation => vec![plan.train_channel.clone()],
    };
    let mut records = Vec::new();
    for ch in &channels {
        records.extend(harness::generate_features(&plan, split, ch)?);
        if raw {
            for &snr in &plan.snr_grid_db {
                for &m in plan.pool.members() {
                    let frames = harness::synthesize_point(&plan, split, ch, m, snr)?;
                    let path = s.out.join(raw_file_name(split, &ch.name, m, snr));
                    frame_store::write_frames(&path, &plan.ofdm, frames.iter().map(Vec::as_slice))?;
                }
            }
        }
    }
    let path = s.out.join(format!("dataset_{split}.csv"));
    dataset::save(&path, &records)?;
    let bad = harness::inadmissible_count(&records);
    println!("{}: {} rows, {} inadmissible", path.display(), records.len(), bad);
    s.write_effective(&s.out)
}

fn cmd_features(s: Settings, frame: &Path) -> Result<()> {
    let filter = explicit_tmax(&s, "features")?;
    let (params, frames) = frame_store::read_frames(frame)?;
    let extractor = SqcExtractor::new(params, filter)?;
    let records = frames
        .iter()
        .map(|f| {
            Ok(dataset::FeatureRecord {
                label: None,
                snr_db: f64::NAN,
                channel: "unknown".into(),
                frame_seed: 0,
                features: extractor.extract(f)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    dataset::write_records(io::stdout().lock(), &records).map_err(|e| Error::io("<stdout>", io::Error::other(e)))
}

fn write_trained(out: &Path, trained: &harness::TrainedSet) -> Result<()> {
    let path = out.join("model.txt");
    model_file::save_set(&path, &trained.models)?;
    harness::write_training_log(&out.join("training_log.csv"), trained)?;
    println!(
        "{}: {} classifier(s) over {} classes, {} rows skipped",
        path.display(),
        trained.models.entries.len(),
        trained.models.classes().len(),
        trained.skipped
    );
    Ok(())
}

fn cmd_train(mut s: Settings, dataset_path: Option<&Path>) -> Result<()> {
    let _lock = OutputLock::acquire(&s.out)?;
    let (records, filter) = match dataset_path {
        Some(p) => (dataset::load(p)?, explicit_tmax(&s, "train --dataset")?),
        None => {
            let filter = resolve_tmax(&mut s)?;
            let plan = s.plan(filter);
            (harness::generate_features(&plan, Split::Train, &plan.train_channel)?, filter)
        }
    };
    let plan = s.plan(filter);
    let trained = harness::train_models(
        &records,
        plan.classes(),
        &plan.train_config(),
        plan.ofdm,
        filter,
        plan.mode,
    )?;
    write_trained(&s.out, &trained)?;
    s.write_effective(&s.out)
}

fn print_tables(tables: &[results::ResultTable]) -> Result<()> {
    results::write_summary(tables, io::stdout().lock()).map_err(|e| Error::io("<stdout>", io::Error::other(e)))
}

fn model_filter(models: &ModelSet, s: &Settings) -> Result<Option<FilterConfig>> {
    let used = models.t_max_used();
    let filter = used.map(FilterConfig::new).transpose()?;
    match s.t_max {
        TmaxSetting::Fixed(t) if used != Some(t) => Err(Error::ParamMismatch(format!(
            "--tmax {t} differs from the model's T_max {used:?}"
        ))),
        TmaxSetting::Off if used.is_some() => {
            Err(Error::ParamMismatch("--tmax off but the model was trained with a filter".into()))
        }
        _ => Ok(filter),
    }
}

fn cmd_evaluate(mut s: Settings, model_path: &Path, dataset_path: Option<&Path>) -> Result<()> {
    let model = model_file::load_set(model_path)?;
    let _lock = OutputLock::acquire(&s.out)?;
    let records = match dataset_path {
        Some(p) => dataset::load(p)?,
        None => {
            let filter = model_filter(&model, &s)?;
            if model.ofdm() != s.ofdm {
                return Err(Error::ParamMismatch(format!(
                    "model OFDM parameters {:?} differ from the configured {:?}",
                    model.ofdm(),
                    s.ofdm
                )));
            }
            s.t_max = filter.map_or(TmaxSetting::Off, |f| TmaxSetting::Fixed(f.t_max));
            s.pool = [Pool::Theta1, Pool::Theta2]
                .into_iter()
                .find(|p| p.members() == model.classes())
                .ok_or_else(|| Error::ClassMismatch("model classes do not form a known pool".into()))?;
            let plan = s.plan(filter);
            let mut recs = Vec::new();
            for ch in &plan.channels {
                recs.extend(harness::generate_features(&plan, Split::Test, ch)?);
            }
            recs
        }
    };
    let table = harness::evaluate(&model, &records)?;
    let mut tables = Vec::new();
    for ch in table.channels() {
        let t = table.for_channel(&ch);
        t.save(&s.out.join(harness::results_file_name(&ch, "")))?;
        tables.push(t);
    }
    results::save_summary(&s.out.join("summary.csv"), &tables)?;
    print_tables(&tables)?;
    s.write_effective(&s.out)
}

fn cmd_sweep(mut s: Settings) -> Result<()> {
    let _lock = OutputLock::acquire(&s.out)?;
    let filter = resolve_tmax(&mut s)?;
    let outcome = harness::run_sweep(&s.plan(filter), Some(&s.out))?;
    print_tables(&outcome.tables)?;
    s.write_effective(&s.out)
}

fn cmd_ablation(mut s: Settings) -> Result<()> {
    let _lock = OutputLock::acquire(&s.out)?;
    let filter = match resolve_tmax(&mut s)? {
        Some(f) => f,
        None => return Err(Error::Precondition("ablation needs a filter threshold, not --tmax off".into())),
    };
    let report = harness::run_ablation(&s.plan(Some(filter)), Some(&s.out))?;
    println!("channel,snr_db,pcc_filtered,pcc_unfiltered,gap");
    for r in &report.rows {
        println!(
            "{},{},{:.4},{:.4},{:+.4}",
            r.channel,
            r.snr_db,
            r.pcc_filtered,
            r.pcc_unfiltered,
            r.gap()
        );
    }
    s.write_effective(&s.out)
}

fn cmd_tmax(mut s: Settings) -> Result<()> {
    let _lock = OutputLock::acquire(&s.out)?;
    if s.tmax_candidates.len() < 2 {
        return Err(Error::Precondition("tmax needs at least two candidates".into()));
    }
    let report = harness::tmax_validation(&s.plan(None), &s.tmax_candidates, Some(&s.out))?;
    println!("t_max,validation_pcc");
    for c in &report.candidates {
        println!("{},{:.4}", c.t_max, c.validation_pcc);
    }
    println!("chosen,{}", report.chosen);
    s.t_max = TmaxSetting::Fixed(report.chosen);
    s.write_effective(&s.out)
}

fn cmd_classify(model_path: &Path, frame: &Path, snr: Option<&[f64]>) -> Result<()> {
    let set = model_file::load_set(model_path)?;
    let model = match (set.is_pooled(), snr) {
        (true, _) => &set.entries[0].1,
        (false, Some(&[s])) => set
            .for_snr(s)
            .ok_or_else(|| Error::Precondition(format!("model file has no classifier for {s} dB")))?,
        (false, _) => {
            return Err(Error::Precondition(
                "per-SNR model file: pass the frame SNR with a single --snr value".into(),
            ))
        }
    };
    let (params, frames) = frame_store::read_frames(frame)?;
    if params != model.ofdm {
        return Err(Error::ParamMismatch(format!(
            "frame file has OFDM parameters {params:?}, model expects {:?}",
            model.ofdm
        )));
    }
    let filter = model.t_max_used.map(FilterConfig::new).transpose()?;
    let extractor = SqcExtractor::new(params, filter)?;
    let mut out = io::stdout().lock();
    let names: Vec<&str> = model.classes.iter().map(|m| m.name()).collect();
    let _ = writeln!(out, "frame,prediction,{}", names.join(","));
    for (i, f) in frames.iter().enumerate() {
        let v = extractor.extract(f)?;
        if !v.is_admissible() {
            let _ = writeln!(out, "{i},rejected{}", ",".repeat(names.len()));
            continue;
        }
        let (m, post) = model.classify(&v.values);
        let post: Vec<String> = post.iter().map(|p| format!("{p:.6}")).collect();
        let _ = writeln!(out, "{i},{},{}", m.name(), post.join(","));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let s = settings(&cli.global)?;
    match cli.command {
        Command::Oracle => cmd_oracle(cli.global.pool, &mut io::stdout().lock()).map_err(|e| Error::io("<stdout>", e)),
        Command::Generate { split, raw } => cmd_generate(s, split, raw),
        Command::Features { frame } => cmd_features(s, &frame),
        Command::Train { dataset } => cmd_train(s, dataset.as_deref()),
        Command::Evaluate { model, dataset } => cmd_evaluate(s, &model, dataset.as_deref()),
        Command::Sweep => cmd_sweep(s),
        Command::Ablation => cmd_ablation(s),
        Command::Tmax => cmd_tmax(s),
        Command::Classify { model, frame } => cmd_classify(&model, &frame, cli.global.snr.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sqcc: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
