//! Config-driven end-to-end runs: simulate, image, detect, cluster,
//! evaluate — with a manifest of content hashes so identical configs
//! produce byte-identical, diffable results.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array::{build_virtual_array, compute_afm, angular_resolution, ArrayLayout, VirtualArray};
use crate::clustering::{dynamic_dbscan, overlay_frames, Cluster, ClusteringConfig};
use crate::detection::{point_cloud_from_rdm, DetectionConfig, PointCloud};
use crate::echo::{synthesize_echo_frame, RadarParams};
use crate::imaging::{compute_ram, compute_rdm, RamMode, Window};
use crate::io;
use crate::metrics::{iou_masks, rasterize_region, MaskGrid, Region2D};
use crate::scene::{load_scene, sample_scene, Scene};
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Product {
    Rdm,
    Ram,
    Cloud,
    Clusters,
    Metrics,
}

impl std::str::FromStr for Product {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rdm" => Ok(Product::Rdm),
            "ram" => Ok(Product::Ram),
            "cloud" => Ok(Product::Cloud),
            "clusters" => Ok(Product::Clusters),
            "metrics" => Ok(Product::Metrics),
            other => Err(Error::Schema(format!("unknown product '{other}'"))),
        }
    }
}

fn default_overlay_window() -> usize {
    1
}

fn default_ram_bins() -> usize {
    256
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Scene description file; relative paths resolve against the config.
    pub scene: PathBuf,
    /// Antenna layout file; omitted means the shipped 12x16 layout.
    #[serde(default)]
    pub layout: Option<PathBuf>,
    /// Noise seed; runs with the same config are bit-identical.
    pub seed: u64,
    /// Complex noise power per fast-time sample.
    #[serde(default)]
    pub noise_power: f64,
    pub radar: RadarParams,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    /// Number of consecutive frames merged before clustering.
    #[serde(default = "default_overlay_window")]
    pub overlay_window: usize,
    /// Azimuth grid size of the range-azimuth product.
    #[serde(default = "default_ram_bins")]
    pub ram_az_bins: usize,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub products: Vec<Product>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Schema(format!("run config: {e}")))
    }

    /// Resolve relative paths against the directory the config lives in.
    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.scene);
        if let Some(l) = self.layout.as_mut() {
            fix(l);
        }
        fix(&mut self.out_dir);
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        if !self.scene.is_file() {
            return Err(Error::Validation(format!(
                "scene file not found: {}",
                self.scene.display()
            )));
        }
        if let Some(l) = &self.layout {
            if !l.is_file() {
                return Err(Error::Validation(format!(
                    "layout file not found: {}",
                    l.display()
                )));
            }
        }
        if self.overlay_window < 1 {
            return Err(Error::Validation("overlay_window must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let mut config = RunConfig::from_toml(&text)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    config.resolve(&base);
    Ok(config)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    /// "ok" or "failed".
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: RunConfig,
    /// Output file name -> sha256 of its bytes, sorted by name.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
struct MetricsReport {
    points_per_frame: Vec<usize>,
    clusters_per_frame: Vec<usize>,
    density_bin_edges_m: Vec<f64>,
    density_counts: Vec<usize>,
}

/// Thread cap: `MMPOINT_THREADS` if set, else the machine's parallelism.
pub fn thread_cap() -> usize {
    std::env::var("MMPOINT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

struct FrameResult {
    rdm_power: ndarray::Array2<f64>,
    range_axis: Vec<f64>,
    velocity_axis: Vec<f64>,
    cloud: PointCloud,
}

fn process_frame(
    scene: &Scene,
    array: &VirtualArray,
    config: &RunConfig,
    frame: usize,
) -> Result<FrameResult> {
    let states = sample_scene(scene, frame as f64 * scene.frame_interval)?;
    let cube = synthesize_echo_frame(
        &states,
        &config.radar,
        array,
        config.noise_power,
        config.seed,
        frame,
    )?;
    let rdm = compute_rdm(&cube, Window::Hann)?;
    let mut cloud = point_cloud_from_rdm(&rdm, &cube, &config.detection)?;
    cloud.frame_interval = scene.frame_interval;
    Ok(FrameResult {
        rdm_power: rdm.power(),
        range_axis: rdm.range_axis.clone(),
        velocity_axis: rdm.velocity_axis.clone(),
        cloud,
    })
}

/// Run every stage a config requests and write a manifest last. On a stage
/// failure, partial products are removed and the manifest records the
/// failing stage; the error is also returned.
pub fn run_pipeline(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    match run_stages(config, &mut written) {
        Ok(outputs) => {
            let manifest = Manifest {
                version: VERSION.to_string(),
                status: "ok".into(),
                failing_stage: None,
                error: None,
                config: config.clone(),
                outputs,
            };
            fs::write(
                config.out_dir.join("manifest.json"),
                serde_json::to_vec_pretty(&manifest)?,
            )?;
            Ok(manifest)
        }
        Err((stage, err)) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let manifest = Manifest {
                version: VERSION.to_string(),
                status: "failed".into(),
                failing_stage: Some(stage),
                error: Some(err.to_string()),
                config: config.clone(),
                outputs: BTreeMap::new(),
            };
            fs::write(
                config.out_dir.join("manifest.json"),
                serde_json::to_vec_pretty(&manifest)?,
            )?;
            Err(err)
        }
    }
}

type StageResult<T> = std::result::Result<T, (String, Error)>;

fn run_stages(config: &RunConfig, written: &mut Vec<PathBuf>) -> StageResult<BTreeMap<String, String>> {
    fn stage(name: &'static str) -> impl Fn(Error) -> (String, Error) {
        move |e| (name.to_string(), e)
    }

    let scene_text = fs::read_to_string(&config.scene).map_err(|e| ("scene".to_string(), e.into()))?;
    let scene = load_scene(&scene_text).map_err(stage("scene"))?;
    let layout = match &config.layout {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| ("layout".to_string(), e.into()))?;
            ArrayLayout::from_toml(&text).map_err(stage("layout"))?
        }
        None => ArrayLayout::default_12x16(),
    };
    let array = build_virtual_array(&layout).map_err(stage("layout"))?;

    // frame-parallel simulate + detect, results kept in frame order
    let n_frames = scene.n_frames;
    let threads = thread_cap().min(n_frames.max(1));
    let frames: Vec<FrameResult> = if threads <= 1 || n_frames <= 1 {
        (0..n_frames)
            .map(|f| process_frame(&scene, &array, config, f))
            .collect::<Result<_>>()
            .map_err(stage("frames"))?
    } else {
        let results: Vec<Result<FrameResult>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let scene = &scene;
                    let array = &array;
                    s.spawn(move || {
                        (t..n_frames)
                            .step_by(threads)
                            .map(|f| (f, process_frame(scene, array, config, f)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            let mut slots: Vec<Option<Result<FrameResult>>> = (0..n_frames).map(|_| None).collect();
            for h in handles {
                for (f, r) in h.join().expect("frame worker panicked") {
                    slots[f] = Some(r);
                }
            }
            slots.into_iter().map(|s| s.expect("frame missing")).collect()
        });
        results
            .into_iter()
            .collect::<Result<_>>()
            .map_err(stage("frames"))?
    };

    let record = |written: &mut Vec<PathBuf>, path: PathBuf| {
        written.push(path);
    };
    let out = &config.out_dir;

    if config.products.contains(&Product::Rdm) {
        for (f, fr) in frames.iter().enumerate() {
            let path = out.join(format!("rdm_{f:03}.pgm"));
            io::write_scalar_map(
                &path,
                &fr.rdm_power,
                &fr.velocity_axis,
                &fr.range_axis,
                "velocity_mps",
                "range_m",
            )
            .map_err(stage("rdm"))?;
            let meta = PathBuf::from(format!("{}.meta.json", path.display()));
            record(written, path);
            record(written, meta);
        }
    }

    if config.products.contains(&Product::Ram) {
        for f in 0..n_frames {
            let states = sample_scene(&scene, f as f64 * scene.frame_interval).map_err(stage("ram"))?;
            let cube = synthesize_echo_frame(
                &states,
                &config.radar,
                &array,
                config.noise_power,
                config.seed,
                f,
            )
            .map_err(stage("ram"))?;
            let ram = compute_ram(&cube, RamMode::ZeroDopplerSlice, config.ram_az_bins)
                .map_err(stage("ram"))?;
            let path = out.join(format!("ram_{f:03}.pgm"));
            io::write_scalar_map(
                &path,
                &ram.values,
                &ram.az_axis,
                &ram.range_axis,
                "azimuth_rad",
                "range_m",
            )
            .map_err(stage("ram"))?;
            let meta = PathBuf::from(format!("{}.meta.json", path.display()));
            record(written, path);
            record(written, meta);
        }
    }

    if config.products.contains(&Product::Cloud) {
        let merged = PointCloud {
            points: frames.iter().flat_map(|f| f.cloud.points.clone()).collect(),
            frame_index: n_frames.saturating_sub(1),
            frame_interval: scene.frame_interval,
        };
        let path = out.join("cloud.csv");
        io::write_point_cloud_csv(&path, &merged).map_err(stage("cloud"))?;
        record(written, path);
        let ply = out.join("cloud.ply");
        io::write_point_cloud_ply(&ply, &merged).map_err(stage("cloud"))?;
        record(written, ply);
    }

    let mut clusters_per_frame: Vec<Vec<Cluster>> = Vec::new();
    if config.products.contains(&Product::Clusters) || config.products.contains(&Product::Metrics) {
        let clouds: Vec<PointCloud> = frames.iter().map(|f| f.cloud.clone()).collect();
        for f in 0..n_frames {
            let window = config.overlay_window.min(f + 1);
            let merged = overlay_frames(&clouds[..=f], window).map_err(stage("clusters"))?;
            if merged.points.len() < config.clustering.min_cluster_size {
                clusters_per_frame.push(Vec::new());
                continue;
            }
            match dynamic_dbscan(&merged, &config.clustering) {
                Ok(cs) => clusters_per_frame.push(cs),
                // too few / too uniform points to pick a radius: no clusters
                Err(Error::Domain(_)) => clusters_per_frame.push(Vec::new()),
                Err(e) => return Err(("clusters".to_string(), e)),
            }
        }
    }

    if config.products.contains(&Product::Clusters) {
        let rows: Vec<(usize, Vec<Cluster>)> =
            clusters_per_frame.iter().cloned().enumerate().collect();
        let path = out.join("clusters.jsonl");
        io::write_clusters_jsonl(&path, &rows).map_err(stage("clusters"))?;
        record(written, path);
    }

    if config.products.contains(&Product::Metrics) {
        let max_r = frames
            .iter()
            .flat_map(|f| f.cloud.points.iter().map(|p| p.range))
            .fold(0.0_f64, f64::max);
        let n_bins = ((max_r / 10.0).ceil() as usize).max(1);
        let edges: Vec<f64> = (0..=n_bins).map(|i| i as f64 * 10.0).collect();
        let merged = PointCloud {
            points: frames.iter().flat_map(|f| f.cloud.points.clone()).collect(),
            frame_index: 0,
            frame_interval: scene.frame_interval,
        };
        let report = MetricsReport {
            points_per_frame: frames.iter().map(|f| f.cloud.points.len()).collect(),
            clusters_per_frame: clusters_per_frame.iter().map(|c| c.len()).collect(),
            density_counts: crate::metrics::density_profile(&merged, &edges)
                .map_err(stage("metrics"))?,
            density_bin_edges_m: edges,
        };
        let path = out.join("metrics.json");
        fs::write(&path, serde_json::to_vec_pretty(&report).map_err(|e| ("metrics".to_string(), e.into()))?)
            .map_err(|e| ("metrics".to_string(), e.into()))?;
        record(written, path);
    }

    let mut outputs = BTreeMap::new();
    for p in written.iter() {
        let name = p
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let hash = io::sha256_file(p).map_err(stage("manifest"))?;
        outputs.insert(name, hash);
    }
    Ok(outputs)
}

/// Ground truth for mask evaluation: a mask file on the same grid, or
/// regions rasterized onto the predicted mask's grid.
pub enum Truth {
    MaskPath(PathBuf),
    Regions(Vec<Region2D>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IouReport {
    pub overall: f64,
    /// Per-region IoU when the truth is a region list.
    pub per_region: Vec<f64>,
}

/// Compare a predicted segmentation mask against ground truth on the grid of
/// a range-azimuth product. The RAM sidecar fixes the expected grid.
pub fn evaluate_masks(ram_path: &Path, predicted_path: &Path, truth: &Truth) -> Result<IouReport> {
    let (_, ram_meta) = io::read_scalar_map(ram_path)?;
    let predicted = io::read_mask(predicted_path)?;
    let axes_match = |a: &[f64], b: &[f64]| {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9)
    };
    if !axes_match(&predicted.x_axis, &ram_meta.x_axis)
        || !axes_match(&predicted.y_axis, &ram_meta.y_axis)
    {
        return Err(Error::Domain(
            "predicted mask grid does not match the range-azimuth product".into(),
        ));
    }
    match truth {
        Truth::MaskPath(path) => {
            let truth_mask = io::read_mask(path)?;
            let overall = iou_masks(&predicted, &truth_mask)?;
            Ok(IouReport {
                overall,
                per_region: Vec::new(),
            })
        }
        Truth::Regions(regions) => {
            if regions.is_empty() {
                return Err(Error::Domain("no truth regions given".into()));
            }
            let mut union = MaskGrid::new(
                ndarray::Array2::zeros((predicted.y_axis.len(), predicted.x_axis.len())),
                predicted.x_axis.clone(),
                predicted.y_axis.clone(),
            )?;
            let mut per_region = Vec::new();
            for region in regions {
                let mask = rasterize_region(region, &predicted.x_axis, &predicted.y_axis)?;
                per_region.push(iou_masks(&predicted, &mask)?);
                for (u, &m) in union.values.iter_mut().zip(mask.values.iter()) {
                    *u = u.max(m);
                }
            }
            let overall = iou_masks(&predicted, &union)?;
            Ok(IouReport { overall, per_region })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AfmReport {
    pub n_virtual: usize,
    pub azimuth_resolution_deg: f64,
    pub elevation_resolution_deg: f64,
}

/// Broadside ambiguity function summary for a layout.
pub fn afm_report(layout: &ArrayLayout) -> Result<AfmReport> {
    let array = build_virtual_array(layout)?;
    let az_grid: Vec<f64> = (0..=2000)
        .map(|i| (-10.0 + i as f64 * 0.01).to_radians())
        .collect();
    let el_grid: Vec<f64> = (0..=1200)
        .map(|i| (-15.0 + i as f64 * 0.025).to_radians())
        .collect();
    let afm = compute_afm(&array, 0.0, 0.0, &az_grid, &el_grid)?;
    let (az, el) = angular_resolution(&afm)?;
    Ok(AfmReport {
        n_virtual: array.len(),
        azimuth_resolution_deg: az,
        elevation_resolution_deg: el,
    })
}
