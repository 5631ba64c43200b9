//! End-to-end synthesis of one received frame: random symbols, OFDM,
//! a fresh channel realization, then AWGN.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::channel::{add_awgn_in_place, apply_channel, draw_realization, ChannelRealization, ChannelSpec};
use crate::constellation::{alphabet, draw_symbol_indices, Modulation};
use crate::ofdm::{Ofdm, OfdmParams};
use crate::seed::rng_from_seed;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    pub modulation: Modulation,
    /// Per-subcarrier SNR in dB; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub channel: ChannelSpec,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub spec: FrameSpec,
    pub realization: ChannelRealization,
    pub samples: Vec<Complex64>,
}

/// Synthesizes frames for a fixed set of OFDM parameters.
///
/// The noise variance is referenced to the nominal transmitted sample power
/// `1/N` (unit-power subcarrier symbols through the `1/N` inverse transform),
/// so `snr_db` is the per-subcarrier symbol SNR seen after the receiver FFT.
/// The frame seed drives, in order: symbol indices, channel taps, noise.
#[derive(Debug, Clone)]
pub struct FrameSynth {
    ofdm: Ofdm,
}

impl FrameSynth {
    pub fn new(params: OfdmParams) -> Result<Self> {
        Ok(FrameSynth {
            ofdm: Ofdm::new(params)?,
        })
    }

    pub fn params(&self) -> &OfdmParams {
        self.ofdm.params()
    }

    /// Noise-free, channel-free transmitted frame plus its subcarrier symbols.
    pub fn transmit(&self, modulation: Modulation, rng: &mut crate::seed::SimRng) -> Result<Vec<Complex64>> {
        let params = self.ofdm.params();
        let points = alphabet(modulation).points;
        let mut out = Vec::with_capacity(params.frame_len());
        let mut symbol = Vec::with_capacity(params.n_subcarriers);
        for _ in 0..params.symbols_per_frame {
            symbol.clear();
            symbol.extend(
                draw_symbol_indices(modulation, params.n_subcarriers, rng)
                    .into_iter()
                    .map(|i| points[i]),
            );
            self.ofdm.modulate_symbol(&symbol, &mut out)?;
        }
        Ok(out)
    }

    pub fn synthesize(&self, spec: &FrameSpec) -> Result<Frame> {
        let params = *self.ofdm.params();
        spec.channel.validate_for(&params)?;
        let mut rng = rng_from_seed(spec.seed);
        let tx = self.transmit(spec.modulation, &mut rng)?;
        let realization = draw_realization(&spec.channel, &mut rng);
        let mut samples = apply_channel(&tx, &realization);
        add_awgn_in_place(&mut samples, spec.snr_db, params.sample_power(), &mut rng);
        Ok(Frame {
            spec: spec.clone(),
            realization,
            samples,
        })
    }
}

pub fn synthesize_frame(spec: &FrameSpec, params: &OfdmParams) -> Result<Frame> {
    FrameSynth::new(*params)?.synthesize(spec)
}
