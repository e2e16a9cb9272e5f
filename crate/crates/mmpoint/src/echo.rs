//! Complex baseband echo synthesis for one frame under TDM-MIMO scheduling.
//!
//! Fast-time samples within a chirp carry range as a beat frequency
//! f_b = 2 k_r R / c; the carrier phase -2π R_sum / λ across chirps carries
//! Doppler, and across channels carries angle. `R_sum` is the exact
//! TX-to-scatterer-to-RX path length, evaluated at the true transmit time of
//! each chirp, so TDM phase migration is simulated faithfully.

use ndarray::Array3;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::array::VirtualArray;
use crate::scene::Scatterer;
use crate::{Error, Result, C};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadarParams {
    /// Carrier frequency, Hz.
    pub fc: f64,
    /// Chirp slope, Hz/s.
    pub kr: f64,
    /// Chirp duration (also the chirp repetition interval), s.
    pub tp: f64,
    /// Fast-time sample rate, Hz.
    pub fs: f64,
    /// Samples per chirp; must equal round(fs * tp).
    pub n_samples: usize,
    /// Chirps per frame per TX.
    pub n_chirps: usize,
    /// Include the residual-video-phase term of the echo model.
    #[serde(default)]
    pub rvp: bool,
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fc", self.fc),
            ("kr", self.kr),
            ("tp", self.tp),
            ("fs", self.fs),
        ] {
            if !(v > 0.0) {
                return Err(Error::Validation(format!("{name} must be > 0")));
            }
        }
        if self.n_samples == 0 || self.n_chirps == 0 {
            return Err(Error::Validation("n_samples and n_chirps must be > 0".into()));
        }
        let expect = (self.fs * self.tp).round() as usize;
        if expect != self.n_samples {
            return Err(Error::Validation(format!(
                "n_samples = {} but fs*tp rounds to {expect}",
                self.n_samples
            )));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        C / self.fc
    }

    /// Coherent processing time per frame for `n_tx` time-multiplexed
    /// transmitters: n_chirps * n_tx * tp.
    pub fn coherent_time(&self, n_tx: usize) -> f64 {
        self.n_chirps as f64 * n_tx as f64 * self.tp
    }

    /// Range of one range-FFT bin, meters.
    pub fn range_bin_width(&self) -> f64 {
        self.fs / self.n_samples as f64 * C / (2.0 * self.kr)
    }

    /// Velocity of one Doppler bin, m/s.
    pub fn velocity_bin_width(&self, n_tx: usize) -> f64 {
        self.lambda() / (2.0 * self.coherent_time(n_tx))
    }

    /// Largest unambiguous beat frequency for complex baseband sampling.
    pub fn max_beat_frequency(&self) -> f64 {
        self.fs
    }
}

/// One frame of complex baseband samples, [virtual channel][chirp][sample].
#[derive(Debug, Clone)]
pub struct EchoCube {
    pub samples: Array3<Complex64>,
    pub params: RadarParams,
    pub array: VirtualArray,
    pub frame_index: usize,
    pub noise_seed: u64,
}

/// Doppler frequency of a closing velocity: f_q = 2 v_r / λ (signed).
pub fn doppler_frequency(v_radial: f64, lambda: f64) -> f64 {
    2.0 * v_radial / lambda
}

/// Synthesize the echo cube for one frame from sampled scene states.
///
/// Channel ordering is TX-major to match the virtual array. TX `m` transmits
/// on global chirps `a * n_tx + m`; after de-multiplexing each channel holds
/// `n_chirps` slow-time samples. Per-channel noise substreams are derived
/// from (seed, channel) so parallel and serial synthesis agree bit for bit.
pub fn synthesize_echo(
    scene_states: &[Scatterer],
    params: &RadarParams,
    array: &VirtualArray,
    noise_power: f64,
    seed: u64,
) -> Result<EchoCube> {
    synthesize_echo_frame(scene_states, params, array, noise_power, seed, 0)
}

/// Like [`synthesize_echo`] but tags the cube with a frame index and uses a
/// frame-distinct noise substream.
pub fn synthesize_echo_frame(
    scene_states: &[Scatterer],
    params: &RadarParams,
    array: &VirtualArray,
    noise_power: f64,
    seed: u64,
    frame_index: usize,
) -> Result<EchoCube> {
    params.validate()?;
    if noise_power < 0.0 {
        return Err(Error::Domain("noise_power must be >= 0".into()));
    }
    let lambda = params.lambda();
    for (q, s) in scene_states.iter().enumerate() {
        let r = s.range();
        if r <= 0.0 {
            return Err(Error::Domain(format!("scatterer {q} at range 0")));
        }
        let fb = 2.0 * params.kr * r / C;
        if fb >= params.max_beat_frequency() {
            return Err(Error::Domain(format!(
                "scatterer {q}: beat frequency {fb:.3e} Hz exceeds the sampled band {:.3e} Hz",
                params.max_beat_frequency()
            )));
        }
    }

    let n_ch = array.len();
    let n_tx = array.n_tx;
    let n_rx = array.n_rx;
    let half_lambda = lambda / 2.0;
    let mut samples = Array3::zeros((n_ch, params.n_chirps, params.n_samples));
    let dt = 1.0 / params.fs;

    for ch in 0..n_ch {
        let m = ch / n_rx;
        let n = ch % n_rx;
        let tx = array.tx[m];
        let rx = array.rx[n];
        // Physical element offsets: azimuth along x, elevation along z.
        let ptx = [tx[0] * half_lambda, 0.0, tx[1] * half_lambda];
        let prx = [rx[0] * half_lambda, 0.0, rx[1] * half_lambda];
        for s in scene_states {
            let amp = s.rcs.sqrt() / (s.range() * s.range());
            for a in 0..params.n_chirps {
                let t_chirp = (a * n_tx + m) as f64 * params.tp;
                let pos = [
                    s.position[0] + s.velocity[0] * t_chirp,
                    s.position[1] + s.velocity[1] * t_chirp,
                    s.position[2] + s.velocity[2] * t_chirp,
                ];
                let d_sum = dist(pos, ptx) + dist(pos, prx);
                let mut phase = -2.0 * std::f64::consts::PI * d_sum / lambda;
                if params.rvp {
                    phase += std::f64::consts::PI * params.kr * (d_sum / C) * (d_sum / C);
                }
                let start = amp * Complex64::new(phase.cos(), phase.sin());
                // Beat-tone rotation per fast-time sample; positive so the
                // forward range FFT puts the peak at bin f_b / fs * N.
                let w = 2.0 * std::f64::consts::PI * params.kr * (d_sum / C) * dt;
                let step = Complex64::new(w.cos(), w.sin());
                let mut tone = start;
                let mut row = samples.slice_mut(ndarray::s![ch, a, ..]);
                for i in 0..params.n_samples {
                    row[i] += tone;
                    tone *= step;
                }
            }
        }
        if noise_power > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((frame_index as u64) << 32) | ch as u64);
            let scale = (noise_power / 2.0).sqrt();
            let mut row = samples.slice_mut(ndarray::s![ch, .., ..]);
            for v in row.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *v += Complex64::new(scale * re, scale * im);
            }
        }
    }

    Ok(EchoCube {
        samples,
        params: params.clone(),
        array: array.clone(),
        frame_index,
        noise_seed: seed,
    })
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
