//! Run configuration: TOML file, CLI overrides and the output directory lock.
//!
//! Precedence is CLI flag, then config file, then built-in default. The
//! resolved settings are written back as `effective_config.toml` so a run
//! can be repeated from its output directory alone.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sqcc_core::channel::{ChannelSpec, DEFAULT_K_FACTOR};
use sqcc_core::{FilterConfig, OfdmParams, Pool, TrainConfig};

use crate::error::{Error, Result};
use crate::harness::{
    default_snr_grid, ExperimentPlan, TrainingMode, DEFAULT_TMAX_CANDIDATES, DESK_FRAMES_PER_POINT, PAPER_FRAMES_PER_POINT,
};

pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.toml";
pub const LOCK_FILE: &str = ".sqcc.lock";

/// How the outlier threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TmaxSetting {
    Fixed(f64),
    /// Pick from the candidate list by validation Pcc.
    Auto,
    /// Bypass the filter.
    Off,
}

impl Default for TmaxSetting {
    fn default() -> Self {
        TmaxSetting::Auto
    }
}

impl fmt::Display for TmaxSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TmaxSetting::Fixed(t) => write!(f, "{t}"),
            TmaxSetting::Auto => f.write_str("auto"),
            TmaxSetting::Off => f.write_str("off"),
        }
    }
}

impl FromStr for TmaxSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(TmaxSetting::Auto),
            "off" | "none" => Ok(TmaxSetting::Off),
            other => {
                let t: f64 = other
                    .parse()
                    .map_err(|_| Error::Config(format!("t_max must be a number, \"auto\" or \"off\", got {s:?}")))?;
                FilterConfig::new(t).map_err(|e| Error::Config(e.to_string()))?;
                Ok(TmaxSetting::Fixed(t))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
enum Scalar {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Scalar {
    fn into_tmax(self) -> Result<TmaxSetting> {
        match self {
            Scalar::Int(i) => format!("{i}").parse(),
            Scalar::Float(x) => format!("{x}").parse(),
            Scalar::Text(s) => s.parse(),
        }
    }

    /// Seeds may be written as integers or, above `i64::MAX`, as strings.
    fn into_seed(self) -> Result<u64> {
        match self {
            Scalar::Int(i) => u64::try_from(i).map_err(|_| Error::Config(format!("seed must be non-negative, got {i}"))),
            Scalar::Text(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("seed must be an unsigned integer, got {s:?}"))),
            Scalar::Float(x) => Err(Error::Config(format!("seed must be an integer, got {x}"))),
        }
    }

    fn from_seed(seed: u64) -> Self {
        i64::try_from(seed).map_or_else(|_| Scalar::Text(seed.to_string()), Scalar::Int)
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OfdmSection {
    pub n_subcarriers: Option<usize>,
    pub cp_len: Option<usize>,
    pub symbols_per_frame: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub validation_fraction: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub name: String,
    pub tap_powers: Vec<f64>,
    pub tap_delays: Vec<usize>,
    pub k_factor: Option<f64>,
}

/// Contents of a config file; every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pool: Option<String>,
    seed: Option<Scalar>,
    frames: Option<usize>,
    out: Option<PathBuf>,
    snr_grid: Option<Vec<f64>>,
    t_max: Option<Scalar>,
    tmax_candidates: Option<Vec<f64>>,
    train_channel: Option<String>,
    test_channels: Option<Vec<String>>,
    training_mode: Option<String>,
    /// Feature representation; only `magnitude` is implemented.
    features: Option<String>,
    #[serde(default)]
    ofdm: OfdmSection,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    channel: Vec<ChannelSection>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub frames: Option<usize>,
    pub pool: Option<Pool>,
    pub channel: Option<String>,
    pub train_channel: Option<String>,
    pub t_max: Option<TmaxSetting>,
    pub snr: Option<Vec<f64>>,
    pub mode: Option<TrainingMode>,
    pub paper_scale: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub pool: Pool,
    pub seed: u64,
    pub frames: usize,
    pub out: PathBuf,
    pub snr_grid: Vec<f64>,
    pub t_max: TmaxSetting,
    pub tmax_candidates: Vec<f64>,
    pub train_channel: ChannelSpec,
    pub test_channels: Vec<ChannelSpec>,
    pub custom_channels: Vec<ChannelSpec>,
    pub training_mode: TrainingMode,
    pub ofdm: OfdmParams,
    pub train: TrainConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Settings::resolve(FileConfig::default(), &Overrides::default()).expect("defaults are valid")
    }
}

fn lookup_channel(name: &str, custom: &[ChannelSpec]) -> Result<ChannelSpec> {
    custom
        .iter()
        .find(|c| c.name == name)
        .cloned()
        .or_else(|| ChannelSpec::builtin(name))
        .ok_or_else(|| Error::Config(format!("unknown channel {name:?}")))
}

impl Settings {
    pub fn resolve(file: FileConfig, cli: &Overrides) -> Result<Self> {
        let custom_channels = file
            .channel
            .iter()
            .map(|c| {
                let spec = ChannelSpec {
                    name: c.name.clone(),
                    tap_powers: c.tap_powers.clone(),
                    tap_delays: c.tap_delays.clone(),
                    k_factor: c.k_factor.unwrap_or(DEFAULT_K_FACTOR),
                };
                spec.validate().map_err(|e| Error::Config(e.to_string()))?;
                Ok(spec)
            })
            .collect::<Result<Vec<_>>>()?;

        let pool = match (cli.pool, file.pool) {
            (Some(p), _) => p,
            (None, Some(s)) => s.parse().map_err(|e: sqcc_core::Error| Error::Config(e.to_string()))?,
            (None, None) => Pool::Theta1,
        };
        let seed = match (cli.seed, file.seed) {
            (Some(s), _) => s,
            (None, Some(s)) => s.into_seed()?,
            (None, None) => 1,
        };
        let frames = cli
            .frames
            .or(cli.paper_scale.then_some(PAPER_FRAMES_PER_POINT))
            .or(file.frames)
            .unwrap_or(DESK_FRAMES_PER_POINT);
        let out = cli.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("sqcc-out"));
        let snr_grid = cli.snr.clone().or(file.snr_grid).unwrap_or_else(default_snr_grid);
        let t_max = match (cli.t_max, file.t_max) {
            (Some(t), _) => t,
            (None, Some(s)) => s.into_tmax()?,
            (None, None) => TmaxSetting::default(),
        };
        let tmax_candidates = file.tmax_candidates.unwrap_or_else(|| DEFAULT_TMAX_CANDIDATES.to_vec());
        for &t in &tmax_candidates {
            FilterConfig::new(t).map_err(|e| Error::Config(format!("tmax_candidates: {e}")))?;
        }

        let train_channel = lookup_channel(
            cli.train_channel.as_deref().or(file.train_channel.as_deref()).unwrap_or("H0"),
            &custom_channels,
        )?;
        let test_channels = match (&cli.channel, file.test_channels) {
            (Some(c), _) => vec![lookup_channel(c, &custom_channels)?],
            (None, Some(list)) => list
                .iter()
                .map(|c| lookup_channel(c, &custom_channels))
                .collect::<Result<_>>()?,
            (None, None) => vec![ChannelSpec::h0(), ChannelSpec::h1(), ChannelSpec::h2()],
        };
        if test_channels.is_empty() {
            return Err(Error::Config("test_channels must not be empty".into()));
        }

        match file.features.as_deref() {
            None | Some("magnitude") => {}
            Some("real-imag") => {
                return Err(Error::Config(
                    "features = \"real-imag\" is not implemented; use \"magnitude\"".into(),
                ))
            }
            Some(other) => return Err(Error::Config(format!("unknown feature representation `{other}`"))),
        }

        let training_mode = match (cli.mode, file.training_mode) {
            (Some(m), _) => m,
            (None, Some(m)) => m.parse()?,
            (None, None) => TrainingMode::default(),
        };

        let d = OfdmParams::default();
        let ofdm = OfdmParams {
            n_subcarriers: file.ofdm.n_subcarriers.unwrap_or(d.n_subcarriers),
            cp_len: file.ofdm.cp_len.unwrap_or(d.cp_len),
            symbols_per_frame: file.ofdm.symbols_per_frame.unwrap_or(d.symbols_per_frame),
        };
        ofdm.validate().map_err(|e| Error::Config(e.to_string()))?;
        for ch in test_channels.iter().chain([&train_channel]).chain(&custom_channels) {
            ch.validate_for(&ofdm).map_err(|e| Error::Config(e.to_string()))?;
        }

        let t = TrainConfig::default();
        let ts = file.train;
        let train = TrainConfig {
            learning_rate: ts.learning_rate.unwrap_or(t.learning_rate),
            batch_size: ts.batch_size.unwrap_or(t.batch_size),
            max_epochs: ts.max_epochs.unwrap_or(t.max_epochs),
            patience: ts.patience.unwrap_or(t.patience),
            validation_fraction: ts.validation_fraction.unwrap_or(t.validation_fraction),
            hidden: ts.hidden.unwrap_or(t.hidden),
            seed: ts.seed.unwrap_or(t.seed),
        };
        train.validate().map_err(|e| Error::Config(e.to_string()))?;

        Ok(Settings {
            pool,
            seed,
            frames,
            out,
            snr_grid,
            t_max,
            tmax_candidates,
            train_channel,
            test_channels,
            custom_channels,
            training_mode,
            ofdm,
            train,
        })
    }

    /// Plan with the given filter; `t_max` resolution is left to the caller.
    pub fn plan(&self, filter: Option<FilterConfig>) -> ExperimentPlan {
        ExperimentPlan {
            pool: self.pool,
            channels: self.test_channels.clone(),
            snr_grid_db: self.snr_grid.clone(),
            frames_per_point: self.frames,
            ofdm: self.ofdm,
            filter,
            train_channel: self.train_channel.clone(),
            train: self.train.clone(),
            mode: self.training_mode,
            master_seed: self.seed,
        }
    }

    pub fn lookup_channel(&self, name: &str) -> Result<ChannelSpec> {
        lookup_channel(name, &self.custom_channels)
    }

    /// The resolved settings as a config file that reproduces them.
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Effective<'a> {
            pool: &'a str,
            seed: Scalar,
            frames: usize,
            out: &'a Path,
            snr_grid: &'a [f64],
            t_max: Scalar,
            tmax_candidates: &'a [f64],
            train_channel: &'a str,
            test_channels: Vec<&'a str>,
            training_mode: &'a str,
            ofdm: OfdmSection,
            train: TrainSection,
            channel: Vec<ChannelSection>,
        }
        let t_max = match self.t_max {
            TmaxSetting::Fixed(t) => Scalar::Float(t),
            other => Scalar::Text(other.to_string()),
        };
        let eff = Effective {
            pool: self.pool.name(),
            seed: Scalar::from_seed(self.seed),
            frames: self.frames,
            out: &self.out,
            snr_grid: &self.snr_grid,
            t_max,
            tmax_candidates: &self.tmax_candidates,
            train_channel: &self.train_channel.name,
            test_channels: self.test_channels.iter().map(|c| c.name.as_str()).collect(),
            training_mode: self.training_mode.name(),
            ofdm: OfdmSection {
                n_subcarriers: Some(self.ofdm.n_subcarriers),
                cp_len: Some(self.ofdm.cp_len),
                symbols_per_frame: Some(self.ofdm.symbols_per_frame),
            },
            train: TrainSection {
                learning_rate: Some(self.train.learning_rate),
                batch_size: Some(self.train.batch_size),
                max_epochs: Some(self.train.max_epochs),
                patience: Some(self.train.patience),
                validation_fraction: Some(self.train.validation_fraction),
                hidden: Some(self.train.hidden.clone()),
                seed: Some(self.train.seed),
            },
            channel: self
                .custom_channels
                .iter()
                .map(|c| ChannelSection {
                    name: c.name.clone(),
                    tap_powers: c.tap_powers.clone(),
                    tap_delays: c.tap_delays.clone(),
                    k_factor: Some(c.k_factor),
                })
                .collect(),
        };
        toml::to_string(&eff).expect("settings serialize")
    }

    pub fn write_effective(&self, dir: &Path) -> Result<()> {
        let path = dir.join(EFFECTIVE_CONFIG_FILE);
        fs::write(&path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Busy(dir.to_path_buf())),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_setup() {
        let s = Settings::default();
        assert_eq!(s.ofdm, OfdmParams::default());
        assert_eq!(s.snr_grid, default_snr_grid());
        assert_eq!(s.frames, DESK_FRAMES_PER_POINT);
        assert_eq!(s.train_channel, ChannelSpec::h0());
        assert_eq!(s.test_channels.len(), 3);
        assert_eq!(s.tmax_candidates, DEFAULT_TMAX_CANDIDATES.to_vec());
    }

    #[test]
    fn cli_beats_file_beats_default() {
        let file = FileConfig::parse(
            r#"
            pool = "theta2"
            seed = 5
            frames = 60
            t_max = 2
            training_mode = "per-snr"
            [train]
            patience = 4
            "#,
        )
        .unwrap();
        let s = Settings::resolve(file.clone(), &Overrides::default()).unwrap();
        assert_eq!((s.pool, s.seed, s.frames, s.t_max), (Pool::Theta2, 5, 60, TmaxSetting::Fixed(2.0)));
        assert_eq!(s.train.patience, 4);
        assert_eq!(s.training_mode, TrainingMode::PerSnr);
        assert_eq!(s.train.max_epochs, TrainConfig::default().max_epochs);

        let cli = Overrides {
            seed: Some(9),
            frames: Some(70),
            pool: Some(Pool::Theta1),
            t_max: Some(TmaxSetting::Off),
            ..Overrides::default()
        };
        let s = Settings::resolve(file.clone(), &cli).unwrap();
        assert_eq!((s.pool, s.seed, s.frames, s.t_max), (Pool::Theta1, 9, 70, TmaxSetting::Off));

        let full_scale = Overrides {
            paper_scale: true,
            ..Overrides::default()
        };
        assert_eq!(Settings::resolve(file, &full_scale).unwrap().frames, PAPER_FRAMES_PER_POINT);
    }

    #[test]
    fn effective_config_round_trips() {
        let file = FileConfig::parse(
            r#"
            seed = "18446744073709551615"
            t_max = "off"
            test_channels = ["H1", "wide"]
            [[channel]]
            name = "wide"
            tap_powers = [0.5, 0.3, 0.2]
            tap_delays = [0, 2, 5]
            "#,
        )
        .unwrap();
        let s = Settings::resolve(file, &Overrides::default()).unwrap();
        assert_eq!(s.seed, u64::MAX);
        let again = Settings::resolve(FileConfig::parse(&s.to_toml()).unwrap(), &Overrides::default()).unwrap();
        assert_eq!(again, s);
        let h0 = Settings::default();
        let again = Settings::resolve(FileConfig::parse(&h0.to_toml()).unwrap(), &Overrides::default()).unwrap();
        assert_eq!(again, h0);
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            "bogus = 1",
            "pool = \"theta9\"",
            "t_max = -1",
            "seed = -3",
            "test_channels = [\"H7\"]",
            "test_channels = []",
            "training_mode = \"both\"",
            "features = \"real-imag\"",
            "[ofdm]\ncp_len = 400",
            "[[channel]]\nname = \"x\"\ntap_powers = [1.0]\ntap_delays = [100]",
            "[train]\nbatch_size = 0",
        ] {
            let r = FileConfig::parse(text).and_then(|f| Settings::resolve(f, &Overrides::default()));
            assert!(matches!(r, Err(Error::Config(_))), "{text}: {r:?}");
        }
    }

    #[test]
    fn tmax_parsing() {
        assert_eq!("auto".parse::<TmaxSetting>().unwrap(), TmaxSetting::Auto);
        assert_eq!("OFF".parse::<TmaxSetting>().unwrap(), TmaxSetting::Off);
        assert_eq!("2.5".parse::<TmaxSetting>().unwrap(), TmaxSetting::Fixed(2.5));
        assert!("0".parse::<TmaxSetting>().is_err());
        assert!("x".parse::<TmaxSetting>().is_err());
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = OutputLock::acquire(dir.path()).unwrap();
        assert!(matches!(OutputLock::acquire(dir.path()), Err(Error::Busy(_))));
        drop(lock);
        assert!(OutputLock::acquire(dir.path()).is_ok());
    }
}
