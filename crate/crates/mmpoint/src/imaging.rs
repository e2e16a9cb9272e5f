//! Range-Doppler and range-azimuth imaging.
//!
//! FFTs are unnormalized (energy convention: sum |X|^2 = N * sum |x|^2 per
//! axis). The Doppler axis is FFT-shifted so zero velocity sits at bin
//! n_chirps/2. Azimuth imaging runs a per-range-bin FFT across the uniform
//! virtual azimuth axis under the small-angle mapping sin θ = f / d, with d
//! the channel pitch in half-λ units.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::echo::EchoCube;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rect,
    Hann,
}

impl Window {
    /// Periodic window coefficients of length n.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
                .collect(),
        }
    }
}

/// Per-channel complex range-Doppler maps with labeled axes.
#[derive(Debug, Clone)]
pub struct RdMaps {
    /// [channel][range bin][Doppler bin], Doppler shifted to zero-center.
    pub data: Array3<Complex64>,
    /// Range of each range bin, meters.
    pub range_axis: Vec<f64>,
    /// Closing velocity of each Doppler bin, m/s (positive = approaching).
    pub velocity_axis: Vec<f64>,
    pub window: Window,
    pub n_tx: usize,
}

impl RdMaps {
    pub fn n_channels(&self) -> usize {
        self.data.shape()[0]
    }

    /// Zero-velocity Doppler bin index.
    pub fn zero_doppler_bin(&self) -> usize {
        self.velocity_axis.len() / 2
    }

    /// Noncoherent channel sum of squared magnitudes, [range][Doppler].
    pub fn power(&self) -> Array2<f64> {
        let shape = (self.data.shape()[1], self.data.shape()[2]);
        let mut out = Array2::zeros(shape);
        for ch in 0..self.n_channels() {
            for ((i, j), v) in self.data.index_axis(ndarray::Axis(0), ch).indexed_iter() {
                out[[i, j]] += v.norm_sqr();
            }
        }
        out
    }

    /// Per-channel complex values at one (range, Doppler) cell, channel order.
    pub fn snapshot(&self, range_bin: usize, doppler_bin: usize) -> Vec<Complex64> {
        (0..self.n_channels())
            .map(|ch| self.data[[ch, range_bin, doppler_bin]])
            .collect()
    }
}

fn fft_shift_len(n: usize) -> usize {
    n / 2
}

/// Windowed 2D FFT per channel: fast time -> range, slow time -> Doppler.
pub fn compute_rdm(cube: &EchoCube, window: Window) -> Result<RdMaps> {
    let (n_ch, n_chirps, n_samples) = {
        let s = cube.samples.shape();
        (s[0], s[1], s[2])
    };
    let mut planner = FftPlanner::new();
    let fft_r = planner.plan_fft_forward(n_samples);
    let fft_d = planner.plan_fft_forward(n_chirps);
    let w_fast = window.coefficients(n_samples);
    let w_slow = window.coefficients(n_chirps);

    let mut data = Array3::zeros((n_ch, n_samples, n_chirps));
    let mut row = vec![Complex64::default(); n_samples];
    let mut col = vec![Complex64::default(); n_chirps];
    for ch in 0..n_ch {
        // range FFT over fast time
        let mut stage = Array2::zeros((n_chirps, n_samples));
        for a in 0..n_chirps {
            for i in 0..n_samples {
                row[i] = cube.samples[[ch, a, i]] * w_fast[i];
            }
            fft_r.process(&mut row);
            for i in 0..n_samples {
                stage[[a, i]] = row[i];
            }
        }
        // Doppler FFT over slow time, then shift zero to the center
        let shift = fft_shift_len(n_chirps);
        for i in 0..n_samples {
            for a in 0..n_chirps {
                col[a] = stage[[a, i]] * w_slow[a];
            }
            fft_d.process(&mut col);
            for a in 0..n_chirps {
                data[[ch, i, (a + shift) % n_chirps]] = col[a];
            }
        }
    }

    let params = &cube.params;
    let n_tx = cube.array.n_tx;
    let range_axis = (0..n_samples)
        .map(|i| i as f64 * params.range_bin_width())
        .collect();
    let dv = params.velocity_bin_width(n_tx);
    let velocity_axis = (0..n_chirps)
        .map(|k| (k as f64 - fft_shift_len(n_chirps) as f64) * dv)
        .collect();
    Ok(RdMaps {
        data,
        range_axis,
        velocity_axis,
        window,
        n_tx,
    })
}

/// Magnitude map over a polar (range, azimuth) grid.
#[derive(Debug, Clone)]
pub struct PolarMap {
    /// [range bin][azimuth bin], all values >= 0.
    pub values: Array2<f64>,
    pub range_axis: Vec<f64>,
    /// Azimuth of each bin, radians, strictly increasing.
    pub az_axis: Vec<f64>,
}

/// Magnitude map over a Cartesian bird's-eye grid.
#[derive(Debug, Clone)]
pub struct CartMap {
    /// [y][x].
    pub values: Array2<f64>,
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    pub pitch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RamMode {
    /// Use the first chirp of each channel (valid for static scenes).
    StaticScene,
    /// Form RDMs first and take each channel's zero-Doppler column.
    ZeroDopplerSlice,
}

/// Range-azimuth map: per-range-bin FFT across the uniform virtual azimuth
/// axis, elevation rows summed coherently at zero elevation.
pub fn compute_ram(cube: &EchoCube, mode: RamMode, n_az_bins: usize) -> Result<PolarMap> {
    let (az_positions, d) = cube.array.uniform_azimuth_spacing()?;
    let (_, _, axis_map) = cube.array.factor_axes()?;
    let n_samples = cube.params.n_samples;
    let n_az = az_positions.len();
    if n_az_bins < n_az {
        return Err(Error::Domain(format!(
            "azimuth grid size {n_az_bins} smaller than channel count {n_az}"
        )));
    }

    // Per-channel complex range profile.
    let mut planner = FftPlanner::new();
    let fft_r = planner.plan_fft_forward(n_samples);
    let w_fast = Window::Hann.coefficients(n_samples);
    let n_ch = cube.array.len();
    let mut profiles = Array2::zeros((n_ch, n_samples));
    match mode {
        RamMode::StaticScene => {
            let mut row = vec![Complex64::default(); n_samples];
            for ch in 0..n_ch {
                for i in 0..n_samples {
                    row[i] = cube.samples[[ch, 0, i]] * w_fast[i];
                }
                fft_r.process(&mut row);
                for i in 0..n_samples {
                    profiles[[ch, i]] = row[i];
                }
            }
        }
        RamMode::ZeroDopplerSlice => {
            let rdm = compute_rdm(cube, Window::Hann)?;
            let zd = rdm.zero_doppler_bin();
            for ch in 0..n_ch {
                for i in 0..n_samples {
                    profiles[[ch, i]] = rdm.data[[ch, i, zd]];
                }
            }
        }
    }

    // Coherent sum over elevation rows per azimuth position.
    let mut by_az = Array2::zeros((n_az, n_samples));
    for ch in 0..n_ch {
        let (ia, _) = axis_map[ch];
        for i in 0..n_samples {
            by_az[[ia, i]] += profiles[[ch, i]];
        }
    }

    // Azimuth FFT with zero padding, shifted, mapped to angle via sin θ = f/d.
    let fft_az = planner.plan_fft_forward(n_az_bins);
    let shift = fft_shift_len(n_az_bins);
    let mut valid_bins = Vec::new();
    let mut az_axis = Vec::new();
    for k in 0..n_az_bins {
        let f = (k as f64 - shift as f64) / n_az_bins as f64;
        let s = f / d;
        if s.abs() <= 1.0 {
            valid_bins.push(k);
            az_axis.push(s.asin());
        }
    }
    let mut values = Array2::zeros((n_samples, valid_bins.len()));
    let mut buf = vec![Complex64::default(); n_az_bins];
    for i in 0..n_samples {
        for b in buf.iter_mut() {
            *b = Complex64::default();
        }
        for (ia, _) in az_positions.iter().enumerate() {
            buf[ia] = by_az[[ia, i]];
        }
        fft_az.process(&mut buf);
        for (out_j, &k) in valid_bins.iter().enumerate() {
            let src = (k + n_az_bins - shift) % n_az_bins;
            values[[i, out_j]] = buf[src].norm();
        }
    }

    Ok(PolarMap {
        values,
        range_axis: (0..n_samples)
            .map(|i| i as f64 * cube.params.range_bin_width())
            .collect(),
        az_axis,
    })
}

fn interp_axis(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    if axis.len() < 2 || x < axis[0] || x > axis[axis.len() - 1] {
        return None;
    }
    let mut i = match axis.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i,
        Err(i) => i.saturating_sub(1),
    };
    if i + 1 >= axis.len() {
        i = axis.len() - 2;
    }
    let f = (x - axis[i]) / (axis[i + 1] - axis[i]);
    Some((i, f))
}

/// Resample a polar map onto a Cartesian bird's-eye grid by bilinear
/// interpolation; cells outside the polar domain are 0.
pub fn polar_to_cartesian(map: &PolarMap, pixel_pitch: f64) -> Result<CartMap> {
    if !(pixel_pitch > 0.0) {
        return Err(Error::Domain("pixel pitch must be > 0".into()));
    }
    let r_max = *map.range_axis.last().unwrap();
    let (s_min, s_max) = (map.az_axis[0].sin(), map.az_axis[map.az_axis.len() - 1].sin());
    let x_min = (r_max * s_min).min(0.0);
    let x_max = (r_max * s_max).max(0.0);
    let nx = ((x_max - x_min) / pixel_pitch).ceil() as usize + 1;
    let ny = (r_max / pixel_pitch).ceil() as usize + 1;
    let x_axis: Vec<f64> = (0..nx).map(|i| x_min + i as f64 * pixel_pitch).collect();
    let y_axis: Vec<f64> = (0..ny).map(|i| i as f64 * pixel_pitch).collect();
    let mut values = Array2::zeros((ny, nx));
    for (iy, &y) in y_axis.iter().enumerate() {
        for (ix, &x) in x_axis.iter().enumerate() {
            let r = (x * x + y * y).sqrt();
            let th = x.atan2(y);
            if let (Some((ir, fr)), Some((ia, fa))) =
                (interp_axis(&map.range_axis, r), interp_axis(&map.az_axis, th))
            {
                let v00 = map.values[[ir, ia]];
                let v01 = map.values[[ir, ia + 1]];
                let v10 = map.values[[ir + 1, ia]];
                let v11 = map.values[[ir + 1, ia + 1]];
                values[[iy, ix]] =
                    (1.0 - fr) * ((1.0 - fa) * v00 + fa * v01) + fr * ((1.0 - fa) * v10 + fa * v11);
            }
        }
    }
    Ok(CartMap {
        values,
        x_axis,
        y_axis,
        pitch: pixel_pitch,
    })
}

/// Mirror of [`polar_to_cartesian`]: bilinear resampling from a Cartesian
/// grid onto a polar one.
pub fn cartesian_to_polar(map: &CartMap, r_bins: usize, az_bins: usize) -> Result<PolarMap> {
    if r_bins < 2 || az_bins < 2 {
        return Err(Error::Domain("polar grid needs at least 2x2 bins".into()));
    }
    let corners = [
        (map.x_axis[0], map.y_axis[0]),
        (map.x_axis[map.x_axis.len() - 1], map.y_axis[0]),
        (map.x_axis[0], map.y_axis[map.y_axis.len() - 1]),
        (
            map.x_axis[map.x_axis.len() - 1],
            map.y_axis[map.y_axis.len() - 1],
        ),
    ];
    let r_max = corners
        .iter()
        .map(|(x, y)| (x * x + y * y).sqrt())
        .fold(0.0f64, f64::max);
    let th_min = corners.iter().map(|(x, y)| x.atan2(*y)).fold(f64::MAX, f64::min);
    let th_max = corners.iter().map(|(x, y)| x.atan2(*y)).fold(f64::MIN, f64::max);
    let range_axis: Vec<f64> = (0..r_bins)
        .map(|i| i as f64 * r_max / (r_bins - 1) as f64)
        .collect();
    let az_axis: Vec<f64> = (0..az_bins)
        .map(|i| th_min + i as f64 * (th_max - th_min) / (az_bins - 1) as f64)
        .collect();
    let mut values = Array2::zeros((r_bins, az_bins));
    for (ir, &r) in range_axis.iter().enumerate() {
        for (ia, &th) in az_axis.iter().enumerate() {
            let x = r * th.sin();
            let y = r * th.cos();
            if let (Some((ix, fx)), Some((iy, fy))) =
                (interp_axis(&map.x_axis, x), interp_axis(&map.y_axis, y))
            {
                let v00 = map.values[[iy, ix]];
                let v01 = map.values[[iy, ix + 1]];
                let v10 = map.values[[iy + 1, ix]];
                let v11 = map.values[[iy + 1, ix + 1]];
                values[[ir, ia]] =
                    (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
            }
        }
    }
    Ok(PolarMap {
        values,
        range_axis,
        az_axis,
    })
}
