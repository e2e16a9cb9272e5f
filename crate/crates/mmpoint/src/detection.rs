//! CA-CFAR detection on the channel-summed RDM, per-detection angle
//! estimation over the virtual array, and 4D point cloud assembly.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::array::VirtualArray;
use crate::echo::EchoCube;
use crate::imaging::{compute_rdm, RdMaps, Window};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CfarConfig {
    /// Guard cells (range, Doppler) on each side of the cell under test.
    pub guard: (usize, usize),
    /// Training cells (range, Doppler) beyond the guards on each side.
    pub train: (usize, usize),
    /// Design false alarm probability per cell.
    pub pfa: f64,
    /// Absolute power floor added on top of the adaptive threshold.
    #[serde(default)]
    pub min_abs_power: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        CfarConfig {
            guard: (2, 2),
            train: (8, 4),
            pfa: 1e-4,
            min_abs_power: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub range_bin: usize,
    pub doppler_bin: usize,
    /// Summed channel power at the cell.
    pub power: f64,
}

/// 2D cell-averaging CFAR on a power map, with the extra requirement that a
/// reported cell is the maximum of its 3x3 neighborhood. Threshold scale is
/// the closed form α = N (pfa^(-1/N) - 1) on power. Cells whose training
/// window does not fit inside the map are not tested.
pub fn cfar_detect(power: &Array2<f64>, cfg: &CfarConfig) -> Result<Vec<Detection>> {
    if !(cfg.pfa > 0.0 && cfg.pfa < 1.0) {
        return Err(Error::Domain("pfa must be in (0, 1)".into()));
    }
    if cfg.train.0 == 0 && cfg.train.1 == 0 {
        return Err(Error::Domain("training band is empty".into()));
    }
    let (nr, nd) = power.dim();
    let (gr, gd) = cfg.guard;
    let (tr, td) = cfg.train;
    let (wr, wd) = (gr + tr, gd + td);
    if 2 * wr + 1 > nr || 2 * wd + 1 > nd {
        return Err(Error::Domain(format!(
            "training window {}x{} exceeds map {nr}x{nd}",
            2 * wr + 1,
            2 * wd + 1
        )));
    }

    // summed-area table for O(1) window sums
    let mut sat = Array2::<f64>::zeros((nr + 1, nd + 1));
    for i in 0..nr {
        for j in 0..nd {
            sat[[i + 1, j + 1]] =
                power[[i, j]] + sat[[i, j + 1]] + sat[[i + 1, j]] - sat[[i, j]];
        }
    }
    let rect = |r0: usize, r1: usize, d0: usize, d1: usize| -> f64 {
        // inclusive cell ranges
        sat[[r1 + 1, d1 + 1]] - sat[[r0, d1 + 1]] - sat[[r1 + 1, d0]] + sat[[r0, d0]]
    };

    let n_train = ((2 * wr + 1) * (2 * wd + 1) - (2 * gr + 1) * (2 * gd + 1)) as f64;
    let alpha = n_train * (cfg.pfa.powf(-1.0 / n_train) - 1.0);
    let mut out = Vec::new();
    for i in wr..nr - wr {
        for j in wd..nd - wd {
            let p = power[[i, j]];
            if p <= cfg.min_abs_power {
                continue;
            }
            let outer = rect(i - wr, i + wr, j - wd, j + wd);
            let inner = rect(i - gr, i + gr, j - gd, j + gd);
            let mean_train = (outer - inner) / n_train;
            if p <= alpha * mean_train + cfg.min_abs_power {
                continue;
            }
            // 3x3 peak condition; plateau ties broken toward the lowest index
            let mut is_peak = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ni = (i as i64 + di) as usize;
                    let nj = (j as i64 + dj) as usize;
                    let q = power[[ni, nj]];
                    if q > p || (q == p && (ni, nj) < (i, j)) {
                        is_peak = false;
                        break 'nb;
                    }
                }
            }
            if is_peak {
                out.push(Detection {
                    range_bin: i,
                    doppler_bin: j,
                    power: p,
                });
            }
        }
    }
    Ok(out)
}

/// One peak of the zoomed 2D angle spectrum.
#[derive(Debug, Clone, Copy)]
pub struct AnglePeak {
    pub azimuth: f64,
    pub elevation: f64,
    /// Peak magnitude relative to the spectrum maximum, in (0, 1].
    pub rel_magnitude: f64,
}

/// Zoomed 2D FFT across the virtual array's azimuth and elevation axes,
/// returning all local maxima within `rel_threshold` (amplitude ratio) of the
/// strongest, strongest first, at most `max_peaks`.
pub fn angle_peaks(
    snapshot: &[Complex64],
    array: &VirtualArray,
    zoom: usize,
    rel_threshold: f64,
    max_peaks: usize,
) -> Result<Vec<AnglePeak>> {
    if snapshot.len() != array.len() {
        return Err(Error::Domain(format!(
            "snapshot length {} != virtual element count {}",
            snapshot.len(),
            array.len()
        )));
    }
    let zoom = zoom.max(1);
    let (az_pos, el_pos, map) = array.factor_axes()?;
    let check_uniform = |axis: &[f64], name: &str| -> Result<f64> {
        if axis.len() < 2 {
            return Ok(1.0);
        }
        let d = axis[1] - axis[0];
        for w in axis.windows(2) {
            if ((w[1] - w[0]) - d).abs() > 1e-6 {
                return Err(Error::UnsupportedLayout(format!(
                    "non-uniform {name} axis"
                )));
            }
        }
        Ok(d)
    };
    let d_az = check_uniform(&az_pos, "azimuth")?;
    let d_el = check_uniform(&el_pos, "elevation")?;
    let n_az = if az_pos.len() > 1 { az_pos.len() * zoom } else { 1 };
    let n_el = if el_pos.len() > 1 { el_pos.len() * zoom } else { 1 };

    let mut grid = Array2::zeros((el_pos.len(), az_pos.len()));
    for (k, v) in snapshot.iter().enumerate() {
        let (ia, ie) = map[k];
        grid[[ie, ia]] += v;
    }
    // zero-padded 2D FFT
    let mut planner = FftPlanner::new();
    let fft_az = planner.plan_fft_forward(n_az);
    let fft_el = planner.plan_fft_forward(n_el);
    let mut stage = Array2::zeros((el_pos.len(), n_az));
    let mut buf = vec![Complex64::default(); n_az];
    for ie in 0..el_pos.len() {
        buf.iter_mut().for_each(|v| *v = Complex64::default());
        for ia in 0..az_pos.len() {
            buf[ia] = grid[[ie, ia]];
        }
        fft_az.process(&mut buf);
        for k in 0..n_az {
            stage[[ie, k]] = buf[k];
        }
    }
    let mut spec = Array2::zeros((n_el, n_az));
    let mut colbuf = vec![Complex64::default(); n_el];
    for k in 0..n_az {
        colbuf.iter_mut().for_each(|v| *v = Complex64::default());
        for ie in 0..el_pos.len() {
            colbuf[ie] = stage[[ie, k]];
        }
        fft_el.process(&mut colbuf);
        for ke in 0..n_el {
            spec[[ke, k]] = colbuf[ke];
        }
    }

    // magnitude with FFT shift on both axes
    let sh_az = n_az / 2;
    let sh_el = n_el / 2;
    let mut mag = Array2::zeros((n_el, n_az));
    for ke in 0..n_el {
        for ka in 0..n_az {
            mag[[(ke + sh_el) % n_el, (ka + sh_az) % n_az]] = spec[[ke, ka]].norm();
        }
    }
    let gmax = mag.iter().cloned().fold(0.0f64, f64::max);
    if gmax == 0.0 {
        return Ok(Vec::new());
    }
    let bin_to_angle = |k: usize, n: usize, shift: usize, d: f64| -> Option<f64> {
        let f = (k as f64 - shift as f64) / n as f64;
        let s = f / d;
        if s.abs() <= 1.0 {
            Some(s.asin())
        } else {
            None
        }
    };
    let mut peaks = Vec::new();
    for ke in 0..n_el {
        for ka in 0..n_az {
            let v = mag[[ke, ka]];
            if v < rel_threshold * gmax {
                continue;
            }
            // local max on the wrapped grid; singleton axes always qualify
            let mut is_peak = true;
            for (de, da) in [(0i64, -1i64), (0, 1), (-1, 0), (1, 0)] {
                let (ne, na) = (
                    ((ke as i64 + de).rem_euclid(n_el as i64)) as usize,
                    ((ka as i64 + da).rem_euclid(n_az as i64)) as usize,
                );
                if (ne, na) == (ke, ka) {
                    continue;
                }
                let q = mag[[ne, na]];
                if q > v || (q == v && (ne, na) < (ke, ka)) {
                    is_peak = false;
                    break;
                }
            }
            if !is_peak {
                continue;
            }
            let az = match bin_to_angle(ka, n_az, sh_az, d_az) {
                Some(a) => a,
                None => continue,
            };
            let el = if el_pos.len() > 1 {
                match bin_to_angle(ke, n_el, sh_el, d_el) {
                    Some(e) => e,
                    None => continue,
                }
            } else {
                0.0
            };
            peaks.push(AnglePeak {
                azimuth: az,
                elevation: el,
                rel_magnitude: v / gmax,
            });
        }
    }
    peaks.sort_by(|a, b| b.rel_magnitude.partial_cmp(&a.rel_magnitude).unwrap());
    peaks.truncate(max_peaks);
    Ok(peaks)
}

/// Azimuth/elevation of the strongest angle peak for one detected cell.
pub fn estimate_angles(
    snapshot: &[Complex64],
    array: &VirtualArray,
    zoom: usize,
) -> Result<(f64, f64)> {
    let peaks = angle_peaks(snapshot, array, zoom, 0.99, 1)?;
    peaks
        .first()
        .map(|p| (p.azimuth, p.elevation))
        .ok_or_else(|| Error::Analysis("empty snapshot".into()))
}

/// A detected 4D radar point. `v_radial` is the closing speed (positive =
/// approaching), and (x, y, z) always satisfy
/// (r cos φ sin θ, r cos φ cos θ, r sin φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub v_radial: f64,
    pub intensity: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub frame_index: usize,
}

impl RadarPoint {
    pub fn from_polar(
        range: f64,
        azimuth: f64,
        elevation: f64,
        v_radial: f64,
        intensity: f64,
        frame_index: usize,
    ) -> Self {
        RadarPoint {
            range,
            azimuth,
            elevation,
            v_radial,
            intensity,
            x: range * elevation.cos() * azimuth.sin(),
            y: range * elevation.cos() * azimuth.cos(),
            z: range * elevation.sin(),
            frame_index,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub points: Vec<RadarPoint>,
    pub frame_index: usize,
    /// Scene frame interval, seconds; used by multi-frame overlay.
    pub frame_interval: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub cfar: CfarConfig,
    /// Zero-padding factor for angle estimation FFTs.
    pub zoom: usize,
    /// Amplitude ratio below the strongest angle peak still emitted.
    pub angle_rel_threshold: f64,
    /// Maximum points emitted per detected RDM cell.
    pub max_angle_peaks: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            cfar: CfarConfig::default(),
            zoom: 8,
            angle_rel_threshold: 0.5,
            max_angle_peaks: 4,
        }
    }
}

/// Full per-frame pipeline: RDM -> channel sum -> CFAR -> angle estimation.
pub fn generate_point_cloud(cube: &EchoCube, cfg: &DetectionConfig) -> Result<PointCloud> {
    let rdm = compute_rdm(cube, Window::Hann)?;
    point_cloud_from_rdm(&rdm, cube, cfg)
}

/// Same as [`generate_point_cloud`] but reuses an already-computed RDM set.
pub fn point_cloud_from_rdm(
    rdm: &RdMaps,
    cube: &EchoCube,
    cfg: &DetectionConfig,
) -> Result<PointCloud> {
    let power = rdm.power();
    let detections = cfar_detect(&power, &cfg.cfar)?;
    let mut points = Vec::new();
    for det in &detections {
        let snapshot = rdm.snapshot(det.range_bin, det.doppler_bin);
        let peaks = angle_peaks(
            &snapshot,
            &cube.array,
            cfg.zoom,
            cfg.angle_rel_threshold,
            cfg.max_angle_peaks,
        )?;
        let r = rdm.range_axis[det.range_bin];
        let v = rdm.velocity_axis[det.doppler_bin];
        if r <= 0.0 {
            continue;
        }
        for p in peaks {
            points.push(RadarPoint::from_polar(
                r,
                p.azimuth,
                p.elevation,
                v,
                det.power.sqrt() * p.rel_magnitude,
                cube.frame_index,
            ));
        }
    }
    Ok(PointCloud {
        points,
        frame_index: cube.frame_index,
        frame_interval: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{build_virtual_array, ArrayLayout};
    use crate::echo::{synthesize_echo, RadarParams};
    use crate::scene::{Label, Scatterer};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn params() -> RadarParams {
        RadarParams {
            fc: 77e9,
            kr: 30e12,
            tp: 25.6e-6,
            fs: 20e6,
            n_samples: 512,
            n_chirps: 16,
            rvp: false,
        }
    }

    fn target(r: f64, closing_v: f64, az_deg: f64, el_deg: f64, rcs: f64) -> Scatterer {
        let th = az_deg.to_radians();
        let ph = el_deg.to_radians();
        let dir = [ph.cos() * th.sin(), ph.cos() * th.cos(), ph.sin()];
        Scatterer {
            position: [r * dir[0], r * dir[1], r * dir[2]],
            velocity: [
                -closing_v * dir[0],
                -closing_v * dir[1],
                -closing_v * dir[2],
            ],
            rcs,
            label: Label::Unlabeled,
        }
    }

    #[test]
    fn all_zero_map_no_detections() {
        let power = Array2::zeros((128, 64));
        let dets = cfar_detect(&power, &CfarConfig::default()).unwrap();
        assert!(dets.is_empty());
    }

    #[test]
    fn window_larger_than_map_rejected() {
        let power = Array2::zeros((8, 8));
        assert!(cfar_detect(&power, &CfarConfig::default()).is_err());
    }

    #[test]
    fn single_target_detected_at_analytic_bin() {
        let arr = build_virtual_array(&ArrayLayout {
            tx: vec![[0.0, 0.0]],
            rx: vec![[0.0, 0.0], [2.0, 0.0]],
        })
        .unwrap();
        let p = params();
        // noise set so the RDM peak sits ~30 dB above the post-FFT floor
        let cube = synthesize_echo(&[target(50.0, 0.0, 0.0, 0.0, 1.0)], &p, &arr, 6e-7, 5)
            .unwrap();
        let rdm = crate::imaging::compute_rdm(&cube, Window::Hann).unwrap();
        let mut cfg = CfarConfig::default();
        cfg.pfa = 1e-5;
        let dets = cfar_detect(&rdm.power(), &cfg).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].range_bin, 256);
        assert_eq!(dets[0].doppler_bin, rdm.zero_doppler_bin());
    }

    #[test]
    fn scale_invariance_of_detection_set() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut power = Array2::zeros((64, 48));
        for v in power.iter_mut() {
            *v = rng.gen_range(0.1..1.0);
        }
        power[[30, 20]] = 500.0;
        let cfg = CfarConfig::default();
        let a = cfar_detect(&power, &cfg).unwrap();
        let scaled = power.mapv(|v| v * 1234.5);
        let b = cfar_detect(&scaled, &cfg).unwrap();
        let abins: Vec<_> = a.iter().map(|d| (d.range_bin, d.doppler_bin)).collect();
        let bbins: Vec<_> = b.iter().map(|d| (d.range_bin, d.doppler_bin)).collect();
        assert_eq!(abins, bbins);
        assert!(abins.contains(&(30, 20)));
    }

    #[test]
    fn detections_shrink_with_pfa() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut power = Array2::zeros((200, 100));
        for v in power.iter_mut() {
            let u: f64 = rng.gen_range(1e-12..1.0);
            *v = -u.ln(); // exponential power
        }
        let mut loose = CfarConfig::default();
        loose.pfa = 1e-2;
        let mut tight = CfarConfig::default();
        tight.pfa = 1e-4;
        let a = cfar_detect(&power, &loose).unwrap();
        let b = cfar_detect(&power, &tight).unwrap();
        let aset: std::collections::HashSet<_> =
            a.iter().map(|d| (d.range_bin, d.doppler_bin)).collect();
        for d in &b {
            assert!(aset.contains(&(d.range_bin, d.doppler_bin)));
        }
        assert!(b.len() <= a.len());
    }

    #[test]
    fn broadside_angles_are_zero() {
        let arr = build_virtual_array(&ArrayLayout::default_12x16()).unwrap();
        // synthesize the snapshot directly from the steering model
        let snapshot: Vec<Complex64> = (0..arr.len())
            .map(|k| {
                let ph = arr.steering_phase(k, 0.0, 0.0);
                Complex64::new(ph.cos(), ph.sin())
            })
            .collect();
        let (az, el) = estimate_angles(&snapshot, &arr, 8).unwrap();
        assert!(az.abs() < 1e-6, "azimuth {az}");
        assert!(el.abs() < 1e-6, "elevation {el}");
    }

    #[test]
    fn steering_vector_synthesis_oracle() {
        let arr = build_virtual_array(&ArrayLayout::default_12x16()).unwrap();
        let truth_az = 10f64.to_radians();
        let truth_el = 2f64.to_radians();
        let snapshot: Vec<Complex64> = (0..arr.len())
            .map(|k| {
                let ph = arr.steering_phase(k, truth_az, truth_el);
                Complex64::new(ph.cos(), ph.sin())
            })
            .collect();
        let (az, el) = estimate_angles(&snapshot, &arr, 16).unwrap();
        assert!(
            (az - truth_az).abs().to_degrees() < 0.2,
            "azimuth {} vs {}",
            az.to_degrees(),
            truth_az.to_degrees()
        );
        assert!(
            (el - truth_el).abs().to_degrees() < 1.0,
            "elevation {} vs {}",
            el.to_degrees(),
            truth_el.to_degrees()
        );
    }

    #[test]
    fn two_element_ambiguity_returns_principal_value() {
        let layout = ArrayLayout {
            tx: vec![[0.0, 0.0]],
            rx: vec![[0.0, 0.0], [2.0, 0.0]],
        };
        let arr = build_virtual_array(&layout).unwrap();
        // half-cycle phase across the two virtual elements (spacing 1 half-λ)
        let snapshot = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let (az, _) = estimate_angles(&snapshot, &arr, 8).unwrap();
        assert!(az.abs() <= std::f64::consts::FRAC_PI_2);
        // sin az = ±0.5 are equally valid; the principal value is one of them
        assert_relative_eq!(az.sin().abs(), 0.5, epsilon = 0.05);
    }

    #[test]
    fn point_cloud_empty_scene() {
        let arr = build_virtual_array(&ArrayLayout {
            tx: vec![[0.0, 0.0]],
            rx: vec![[0.0, 0.0], [2.0, 0.0]],
        })
        .unwrap();
        let cube = synthesize_echo(&[], &params(), &arr, 0.0, 1).unwrap();
        let cloud = generate_point_cloud(&cube, &DetectionConfig::default()).unwrap();
        assert!(cloud.points.is_empty());
    }

    #[test]
    fn point_cloud_end_to_end_accuracy() {
        let arr = build_virtual_array(&ArrayLayout::default_12x16()).unwrap();
        let mut p = params();
        // enough Doppler bins that the target clears the CFAR training margin
        p.n_chirps = 32;
        let truth_r = 50.0;
        let truth_v = -1.5; // receding
        let truth_az = 5.0;
        let cube = synthesize_echo(
            &[target(truth_r, truth_v, truth_az, 0.0, 10.0)],
            &p,
            &arr,
            1e-12,
            9,
        )
        .unwrap();
        let cloud = generate_point_cloud(&cube, &DetectionConfig::default()).unwrap();
        assert!(!cloud.points.is_empty());
        let pt = cloud
            .points
            .iter()
            .max_by(|a, b| a.intensity.partial_cmp(&b.intensity).unwrap())
            .unwrap();
        assert!((pt.range - truth_r).abs() <= p.range_bin_width());
        assert!((pt.v_radial - truth_v).abs() <= p.velocity_bin_width(arr.n_tx));
        assert!((pt.azimuth.to_degrees() - truth_az).abs() <= 0.5);
    }

    #[test]
    fn cartesian_invariant_holds_exactly() {
        let pt = RadarPoint::from_polar(37.5, 0.21, -0.05, 3.0, 1.0, 0);
        assert_relative_eq!(pt.x, 37.5 * (-0.05f64).cos() * 0.21f64.sin(), epsilon = 1e-12);
        assert_relative_eq!(pt.y, 37.5 * (-0.05f64).cos() * 0.21f64.cos(), epsilon = 1e-12);
        assert_relative_eq!(pt.z, 37.5 * (-0.05f64).sin(), epsilon = 1e-12);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let arr = build_virtual_array(&ArrayLayout::default_12x16()).unwrap();
        let p = params();
        let cube = synthesize_echo(&[target(30.0, 2.0, -3.0, 0.0, 5.0)], &p, &arr, 1e-9, 21)
            .unwrap();
        let a = generate_point_cloud(&cube, &DetectionConfig::default()).unwrap();
        let b = generate_point_cloud(&cube, &DetectionConfig::default()).unwrap();
        assert_eq!(a.points, b.points);
    }
}
