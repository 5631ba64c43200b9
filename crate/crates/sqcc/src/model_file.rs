//! Text model file.
//!
//! ```text
//! sqcc-model 1
//! layer_dims 6 64 64 5
//! classes BPSK QPSK 8PSK 8QAM 16QAM
//! t_max_used 2            (or "none" when the outlier filter was bypassed)
//! ofdm 256 64 80
//! norm_mean <6 values>
//! norm_std <6 values>
//! layer 0
//! <outputs rows of `inputs` weights>
//! <one row of `outputs` biases>
//! layer 1
//! ...
//! ```
//!
//! Values use shortest round-trip formatting, so load(save(m)) == m exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sqcc_core::mlp::{Layer, MlpModel};
use sqcc_core::{Modulation, OfdmParams};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

fn join<T: ToString>(vals: &[T]) -> String {
    vals.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

pub fn to_text(model: &MlpModel) -> String {
    let mut s = String::new();
    let names: Vec<&str> = model.classes.iter().map(|m| m.name()).collect();
    let _ = writeln!(s, "sqcc-model {FORMAT_VERSION}");
    let _ = writeln!(s, "layer_dims {}", join(&model.layer_dims()));
    let _ = writeln!(s, "classes {}", names.join(" "));
    let _ = writeln!(
        s,
        "t_max_used {}",
        model.t_max_used.map_or("none".to_string(), |t| t.to_string())
    );
    let o = &model.ofdm;
    let _ = writeln!(s, "ofdm {} {} {}", o.n_subcarriers, o.cp_len, o.symbols_per_frame);
    let _ = writeln!(s, "norm_mean {}", join(&model.norm_mean));
    let _ = writeln!(s, "norm_std {}", join(&model.norm_std));
    for (i, layer) in model.layers.iter().enumerate() {
        let _ = writeln!(s, "layer {i}");
        for row in layer.weights.chunks(layer.inputs) {
            let _ = writeln!(s, "{}", join(row));
        }
        let _ = writeln!(s, "{}", join(&layer.biases));
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> std::result::Result<&'a str, String> {
        let (i, l) = self.inner.next().ok_or("unexpected end of file")?;
        self.line = i + 1;
        Ok(l)
    }

    fn keyed(&mut self, key: &str) -> std::result::Result<&'a str, String> {
        let l = self.next()?;
        l.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' ').or(rest.is_empty().then_some("")))
            .ok_or_else(|| format!("line {}: expected `{key}`", self.line))
    }

    fn floats(&mut self, text: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
        let vals = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| format!("line {}: {e}", self.line)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if vals.len() != n {
            return Err(format!("line {}: expected {n} values, found {}", self.line, vals.len()));
        }
        Ok(vals)
    }

    fn usizes(&self, text: &str) -> std::result::Result<Vec<usize>, String> {
        text.split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| format!("line {}: {e}", self.line)))
            .collect()
    }
}

pub fn from_text(text: &str) -> std::result::Result<MlpModel, String> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let model = parse_model(&mut lines)?;
    expect_end(&mut lines)?;
    Ok(model)
}

fn expect_end(lines: &mut Lines) -> std::result::Result<(), String> {
    match lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        Some((i, _)) => Err(format!("line {}: unexpected trailing content", i + 1)),
        None => Ok(()),
    }
}

fn parse_model(lines: &mut Lines) -> std::result::Result<MlpModel, String> {
    let version = lines.keyed("sqcc-model")?;
    if version != FORMAT_VERSION.to_string() {
        return Err(format!("unsupported format version {version:?}"));
    }
    let dims = lines.keyed("layer_dims").and_then(|t| lines.usizes(t))?;
    if dims.len() < 2 {
        return Err("need at least two layer dimensions".into());
    }
    let classes = lines
        .keyed("classes")?
        .split_whitespace()
        .map(|n| n.parse::<Modulation>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let t_max_used = match lines.keyed("t_max_used")? {
        "none" => None,
        t => Some(t.parse::<f64>().map_err(|e| format!("t_max_used: {e}"))?),
    };
    let ofdm = lines.keyed("ofdm").and_then(|t| lines.usizes(t))?;
    let [n_subcarriers, cp_len, symbols_per_frame] = ofdm[..] else {
        return Err("ofdm needs three integers".into());
    };
    let t = lines.keyed("norm_mean")?;
    let norm_mean = lines.floats(t, dims[0])?;
    let t = lines.keyed("norm_std")?;
    let norm_std = lines.floats(t, dims[0])?;
    let mut layers = Vec::new();
    for (i, w) in dims.windows(2).enumerate() {
        let idx = lines.keyed("layer")?;
        if idx != i.to_string() {
            return Err(format!("line {}: expected layer {i}", lines.line));
        }
        let (inputs, outputs) = (w[0], w[1]);
        let mut weights = Vec::with_capacity(inputs * outputs);
        for _ in 0..outputs {
            let row = lines.next()?;
            weights.extend(lines.floats(row, inputs)?);
        }
        let row = lines.next()?;
        let biases = lines.floats(row, outputs)?;
        layers.push(Layer {
            inputs,
            outputs,
            weights,
            biases,
        });
    }
    let model = MlpModel {
        layers,
        norm_mean,
        norm_std,
        classes,
        t_max_used,
        ofdm: OfdmParams {
            n_subcarriers,
            cp_len,
            symbols_per_frame,
        },
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

/// One classifier per SNR, or a single one (`snr any`) for every SNR.
///
/// ```text
/// sqcc-model-set 1
/// count 2
/// snr -2
/// sqcc-model 1
/// ...
/// snr 0
/// sqcc-model 1
/// ...
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    pub entries: Vec<(Option<f64>, MlpModel)>,
}

impl ModelSet {
    pub fn pooled(model: MlpModel) -> Self {
        ModelSet {
            entries: vec![(None, model)],
        }
    }

    pub fn is_pooled(&self) -> bool {
        matches!(self.entries[..], [(None, _)])
    }

    /// The classifier for frames at `snr_db`.
    pub fn for_snr(&self, snr_db: f64) -> Option<&MlpModel> {
        self.entries
            .iter()
            .find(|(s, _)| s.is_none_or(|s| s == snr_db || (s - snr_db).abs() < 1e-9))
            .map(|(_, m)| m)
    }

    fn first(&self) -> &MlpModel {
        &self.entries[0].1
    }

    pub fn classes(&self) -> &[Modulation] {
        &self.first().classes
    }

    pub fn t_max_used(&self) -> Option<f64> {
        self.first().t_max_used
    }

    pub fn ofdm(&self) -> OfdmParams {
        self.first().ofdm
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let Some((_, head)) = self.entries.first() else {
            return Err("empty model set".into());
        };
        for (i, (snr, m)) in self.entries.iter().enumerate() {
            m.validate().map_err(|e| e.to_string())?;
            if m.classes != head.classes || m.t_max_used != head.t_max_used || m.ofdm != head.ofdm {
                return Err(format!("model {i} disagrees with model 0 on classes, t_max_used or ofdm"));
            }
            match snr {
                None if self.entries.len() > 1 => return Err("`snr any` must be the only entry".into()),
                Some(s) if s.is_nan() || *s == f64::NEG_INFINITY => {
                    return Err(format!("model {i}: bad snr {s}"))
                }
                Some(s) if self.entries[..i].iter().any(|(o, _)| *o == Some(*s)) => {
                    return Err(format!("duplicate snr {s}"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

pub fn set_to_text(set: &ModelSet) -> String {
    let mut s = format!("sqcc-model-set {FORMAT_VERSION}\ncount {}\n", set.entries.len());
    for (snr, m) in &set.entries {
        let _ = writeln!(s, "snr {}", snr.map_or("any".to_string(), |v| v.to_string()));
        s.push_str(&to_text(m));
    }
    s
}

/// Parses a model set; a bare single-model file loads as a pooled set.
pub fn set_from_text(text: &str) -> std::result::Result<ModelSet, String> {
    if text.starts_with("sqcc-model ") {
        return from_text(text).map(ModelSet::pooled);
    }
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let version = lines.keyed("sqcc-model-set")?;
    if version != FORMAT_VERSION.to_string() {
        return Err(format!("unsupported format version {version:?}"));
    }
    let count: usize = lines
        .keyed("count")?
        .parse()
        .map_err(|e| format!("line {}: {e}", lines.line))?;
    let mut entries = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let snr = match lines.keyed("snr")? {
            "any" => None,
            t => Some(t.parse::<f64>().map_err(|e| format!("line {}: {e}", lines.line))?),
        };
        entries.push((snr, parse_model(&mut lines)?));
    }
    expect_end(&mut lines)?;
    let set = ModelSet { entries };
    set.validate()?;
    Ok(set)
}

pub fn save_set(path: &Path, set: &ModelSet) -> Result<()> {
    fs::write(path, set_to_text(set)).map_err(|e| Error::io(path, e))
}

pub fn load_set(path: &Path) -> Result<ModelSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    set_from_text(&text).map_err(|msg| Error::format(path, "model file", msg))
}

pub fn save(path: &Path, model: &MlpModel) -> Result<()> {
    fs::write(path, to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<MlpModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text).map_err(|msg| Error::format(path, "model file", msg))
}
