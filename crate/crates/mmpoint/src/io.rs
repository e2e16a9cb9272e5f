//! File formats for pipeline products: 16-bit PGM scalar maps with JSON
//! sidecars, point-cloud CSV/PLY, cluster JSONL, and content hashing.
//! Everything here is byte-deterministic so runs can be diffed by hash.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::Cluster;
use crate::detection::PointCloud;
use crate::metrics::MaskGrid;
use crate::{Error, Result};

/// Sidecar metadata for a PGM scalar map: the value scaling and both axes,
/// so the float map can be reconstructed to quantization accuracy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapMeta {
    pub rows: usize,
    pub cols: usize,
    pub vmin: f64,
    pub vmax: f64,
    /// Axis along columns.
    pub x_axis: Vec<f64>,
    /// Axis along rows.
    pub y_axis: Vec<f64>,
    pub x_label: String,
    pub y_label: String,
}

fn meta_path(pgm: &Path) -> PathBuf {
    let mut s = pgm.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Write a float map as big-endian 16-bit binary PGM (P5, maxval 65535)
/// plus a `.meta.json` sidecar. Values are scaled linearly from
/// [vmin, vmax] to [0, 65535]; a constant map scales against vmin + 1.
pub fn write_scalar_map(
    path: &Path,
    values: &Array2<f64>,
    x_axis: &[f64],
    y_axis: &[f64],
    x_label: &str,
    y_label: &str,
) -> Result<()> {
    let (rows, cols) = values.dim();
    if rows != y_axis.len() || cols != x_axis.len() {
        return Err(Error::Validation(format!(
            "map shape ({rows}, {cols}) does not match axes ({}, {})",
            y_axis.len(),
            x_axis.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("map contains non-finite values".into()));
    }
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if vmax <= vmin {
        vmax = vmin + 1.0;
    }
    let mut buf = Vec::with_capacity(32 + rows * cols * 2);
    write!(buf, "P5\n{cols} {rows}\n65535\n")?;
    for v in values.iter() {
        let q = (((v - vmin) / (vmax - vmin)) * 65535.0).round() as u16;
        buf.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, &buf)?;
    let meta = MapMeta {
        rows,
        cols,
        vmin,
        vmax,
        x_axis: x_axis.to_vec(),
        y_axis: y_axis.to_vec(),
        x_label: x_label.to_string(),
        y_label: y_label.to_string(),
    };
    fs::write(meta_path(path), serde_json::to_vec_pretty(&meta)?)?;
    Ok(())
}

/// Read a scalar map written by [`write_scalar_map`].
pub fn read_scalar_map(path: &Path) -> Result<(Array2<f64>, MapMeta)> {
    let meta: MapMeta = serde_json::from_slice(&fs::read(meta_path(path))?)?;
    let bytes = fs::read(path)?;
    // header: magic, dims, maxval separated by single whitespace
    let header_end = {
        let mut fields = 0;
        let mut i = 0;
        while fields < 4 && i < bytes.len() {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            fields += 1;
        }
        i + 1
    };
    let header = std::str::from_utf8(&bytes[..header_end.min(bytes.len())])
        .map_err(|_| Error::Schema("invalid PGM header".into()))?;
    let mut it = header.split_ascii_whitespace();
    if it.next() != Some("P5") {
        return Err(Error::Schema("not a binary PGM".into()));
    }
    let cols: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| Error::Schema("bad PGM width".into()))?;
    let rows: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| Error::Schema("bad PGM height".into()))?;
    let maxval: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| Error::Schema("bad PGM maxval".into()))?;
    if maxval != 65535 || rows != meta.rows || cols != meta.cols {
        return Err(Error::Schema("PGM header disagrees with sidecar".into()));
    }
    let data = &bytes[header_end..];
    if data.len() != rows * cols * 2 {
        return Err(Error::Schema(format!(
            "PGM payload is {} bytes, expected {}",
            data.len(),
            rows * cols * 2
        )));
    }
    let values = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let o = (r * cols + c) * 2;
        let q = u16::from_be_bytes([data[o], data[o + 1]]) as f64;
        meta.vmin + q / 65535.0 * (meta.vmax - meta.vmin)
    });
    Ok((values, meta))
}

/// Load a PGM + sidecar pair as a probability mask in [0, 1]. The stored
/// value range must itself lie inside [0, 1].
pub fn read_mask(path: &Path) -> Result<MaskGrid> {
    let (values, meta) = read_scalar_map(path)?;
    if meta.vmin < -1e-9 || meta.vmax > 1.0 + 1e-9 {
        return Err(Error::Schema(format!(
            "mask values span [{}, {}], expected within [0, 1]",
            meta.vmin, meta.vmax
        )));
    }
    let values = values.mapv(|v| v.clamp(0.0, 1.0));
    MaskGrid::new(values, meta.x_axis, meta.y_axis)
}

pub fn write_mask(path: &Path, mask: &MaskGrid) -> Result<()> {
    write_scalar_map(path, &mask.values, &mask.x_axis, &mask.y_axis, "x_m", "y_m")
}

fn fmt(v: f64) -> String {
    // shortest round-trip float formatting; deterministic across runs
    format!("{v}")
}

/// CSV with header `frame,r,az,el,v,intensity,x,y,z`; angles in radians.
pub fn write_point_cloud_csv(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut out = String::from("frame,r,az,el,v,intensity,x,y,z\n");
    for p in &cloud.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            p.frame_index,
            fmt(p.range),
            fmt(p.azimuth),
            fmt(p.elevation),
            fmt(p.v_radial),
            fmt(p.intensity),
            fmt(p.x),
            fmt(p.y),
            fmt(p.z)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_point_cloud_csv(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Schema("empty CSV".into()))?;
    if header != "frame,r,az,el,v,intensity,x,y,z" {
        return Err(Error::Schema(format!("unexpected CSV header '{header}'")));
    }
    let mut points = Vec::new();
    let mut frame_index = 0;
    for (lineno, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Schema(format!("line {}: expected 9 fields", lineno + 2)));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Schema(format!("line {}: bad number '{s}'", lineno + 2)))
        };
        frame_index = f[0]
            .parse()
            .map_err(|_| Error::Schema(format!("line {}: bad frame index", lineno + 2)))?;
        let p = crate::detection::RadarPoint::from_polar(
            num(f[1])?,
            num(f[2])?,
            num(f[3])?,
            num(f[4])?,
            num(f[5])?,
            frame_index,
        );
        points.push(p);
    }
    Ok(PointCloud {
        points,
        frame_index,
        frame_interval: 0.0,
    })
}

/// ASCII PLY export (positions, radial velocity, intensity).
pub fn write_point_cloud_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.points.len()));
    out.push_str(
        "property double x\nproperty double y\nproperty double z\nproperty double v_radial\nproperty double intensity\nend_header\n",
    );
    for p in &cloud.points {
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            fmt(p.x),
            fmt(p.y),
            fmt(p.z),
            fmt(p.v_radial),
            fmt(p.intensity)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// One JSON object per line, one line per cluster.
pub fn write_clusters_jsonl(path: &Path, frames: &[(usize, Vec<Cluster>)]) -> Result<()> {
    let mut out = String::new();
    for (frame, clusters) in frames {
        for c in clusters {
            #[derive(Serialize)]
            struct Row<'a> {
                frame: usize,
                #[serde(flatten)]
                cluster: &'a Cluster,
            }
            out.push_str(&serde_json::to_string(&Row { frame: *frame, cluster: c })?);
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}
