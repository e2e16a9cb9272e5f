//! Two-pass dynamic DBSCAN over radar point clouds, k-distance radius
//! selection, cluster shape filtering, multi-frame overlay, normalization,
//! farthest point sampling and ball-query grouping.

use serde::{Deserialize, Serialize};

use crate::detection::{PointCloud, RadarPoint};
use crate::{Error, Result};

/// Points slower than this (radially) are treated as stationary by the
/// multi-frame overlay.
pub const STATIONARY_V_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusteringConfig {
    /// k for the velocity-pass k-distance graph (1D data -> 2).
    pub k_velocity: usize,
    /// k for the spatial-pass k-distance graph (2D data -> 4).
    pub k_spatial: usize,
    /// Density threshold per pass; defaults to the pass's k + 1.
    pub min_pts_velocity: usize,
    pub min_pts_spatial: usize,
    /// Radius overrides; when set, k-distance selection is skipped.
    pub velocity_eps: Option<f64>,
    pub spatial_eps: Option<f64>,
    /// Clusters with fewer members are dropped.
    pub min_cluster_size: usize,
    /// Largest allowed bbox extent along any axis, meters.
    pub max_extent: f64,
    /// Largest allowed horizontal aspect ratio (longest / shortest, with the
    /// shortest floored at `extent_floor`).
    pub max_aspect: f64,
    /// Floor for the shortest horizontal extent, typically one range bin.
    pub extent_floor: f64,
    /// Tag shape-violating clusters as roadside-like instead of dropping.
    pub tag_mode: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            k_velocity: 2,
            k_spatial: 4,
            min_pts_velocity: 3,
            min_pts_spatial: 5,
            velocity_eps: None,
            spatial_eps: None,
            min_cluster_size: 4,
            max_extent: 6.0,
            max_aspect: 8.0,
            extent_floor: 0.2,
            tag_mode: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Member indices into the source point cloud, ascending.
    pub members: Vec<usize>,
    pub centroid: [f64; 3],
    pub mean_v: f64,
    /// Axis-aligned bounding box: [min x, min y, min z], [max x, max y, max z].
    pub bbox_min: [f64; 3],
    pub bbox_max: [f64; 3],
    pub label: Option<crate::scene::Label>,
    /// (velocity-pass cluster id, spatial-pass cluster id).
    pub provenance: (usize, usize),
    /// Set by shape filtering in tag mode.
    pub roadside_like: bool,
}

impl Cluster {
    fn from_members(cloud: &PointCloud, mut members: Vec<usize>, provenance: (usize, usize)) -> Self {
        members.sort_unstable();
        let n = members.len() as f64;
        let mut centroid = [0.0; 3];
        let mut mean_v = 0.0;
        let mut bbox_min = [f64::MAX; 3];
        let mut bbox_max = [f64::MIN; 3];
        for &i in &members {
            let p = &cloud.points[i];
            let c = [p.x, p.y, p.z];
            for a in 0..3 {
                centroid[a] += c[a] / n;
                bbox_min[a] = bbox_min[a].min(c[a]);
                bbox_max[a] = bbox_max[a].max(c[a]);
            }
            mean_v += p.v_radial / n;
        }
        Cluster {
            members,
            centroid,
            mean_v,
            bbox_min,
            bbox_max,
            label: None,
            provenance,
            roadside_like: false,
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Select a DBSCAN radius from the sorted k-distance curve: the knee is the
/// point with the largest perpendicular distance to the chord joining the
/// curve's endpoints. A flat curve falls back to the common value; a zero
/// radius is an error.
pub fn k_distance_radius(points: &[Vec<f64>], k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    if points.len() <= k {
        return Err(Error::Domain(format!(
            "need more than k = {k} points, got {}",
            points.len()
        )));
    }
    let mut kdists: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| euclidean(p, q))
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d[k - 1]
        })
        .collect();
    kdists.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n = kdists.len();
    let (y0, y1) = (kdists[0], kdists[n - 1]);
    let eps = if (y0 - y1).abs() <= 1e-12 * y0.abs().max(1.0) {
        y0
    } else {
        // max distance to the chord from (0, y0) to (n-1, y1)
        let dx = (n - 1) as f64;
        let dy = y1 - y0;
        let norm = (dx * dx + dy * dy).sqrt();
        let mut best = (0.0, y0);
        for (i, &y) in kdists.iter().enumerate() {
            let d = (dy * i as f64 - dx * (y - y0)).abs() / norm;
            if d > best.0 {
                best = (d, y);
            }
        }
        best.1
    };
    if eps <= 0.0 {
        return Err(Error::Domain("k-distance knee gives a zero radius".into()));
    }
    Ok(eps)
}

/// Classic DBSCAN: core points have >= min_pts neighbors within eps
/// (inclusive boundary, self counted); clusters are maximal density-connected
/// sets; a border point joins the cluster of its lowest-index core neighbor.
/// Returns (clusters as ascending index lists, noise indices).
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
    if !(eps > 0.0) {
        return Err(Error::Domain("eps must be > 0".into()));
    }
    if min_pts < 1 {
        return Err(Error::Domain("min_pts must be >= 1".into()));
    }
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| euclidean(&points[i], &points[j]) <= eps)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    // phase 1: connect core points
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut n_clusters = 0;
    for i in 0..n {
        if assignment[i].is_some() || !core[i] {
            continue;
        }
        let cid = n_clusters;
        n_clusters += 1;
        let mut queue = std::collections::VecDeque::from([i]);
        assignment[i] = Some(cid);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if core[q] && assignment[q].is_none() {
                    assignment[q] = Some(cid);
                    queue.push_back(q);
                }
            }
        }
    }
    // phase 2: a border point joins the lowest-index adjacent core's cluster
    for i in 0..n {
        if assignment[i].is_none() {
            if let Some(&j) = neighbors[i].iter().find(|&&j| core[j]) {
                assignment[i] = assignment[j];
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    let mut noise = Vec::new();
    for i in 0..n {
        match assignment[i] {
            Some(cid) => clusters[cid].push(i),
            None => noise.push(i),
        }
    }
    Ok((clusters, noise))
}

/// Two-pass clustering: velocity DBSCAN first, then spatial DBSCAN inside
/// each velocity cluster, then shape filtering. Output order is
/// (velocity id, spatial id) so parallel and serial runs agree.
pub fn dynamic_dbscan(cloud: &PointCloud, config: &ClusteringConfig) -> Result<Vec<Cluster>> {
    if cloud.points.is_empty() {
        return Err(Error::Domain("point cloud is empty".into()));
    }
    let velocities: Vec<Vec<f64>> = cloud.points.iter().map(|p| vec![p.v_radial]).collect();
    let eps_v = match config.velocity_eps {
        Some(e) => e,
        None => k_distance_radius(&velocities, config.k_velocity)?,
    };
    let (v_clusters, v_noise) = dbscan(&velocities, eps_v, config.min_pts_velocity)?;
    let _ = v_noise;

    let mut clusters = Vec::new();
    for (vid, vmembers) in v_clusters.iter().enumerate() {
        let xy: Vec<Vec<f64>> = vmembers
            .iter()
            .map(|&i| vec![cloud.points[i].x, cloud.points[i].y])
            .collect();
        let eps_xy = match config.spatial_eps {
            Some(e) => Ok(e),
            None => k_distance_radius(&xy, config.k_spatial),
        };
        let eps_xy = match eps_xy {
            Ok(e) => e,
            // velocity cluster too small to pick a radius: keep it whole
            Err(_) => {
                clusters.push(Cluster::from_members(cloud, vmembers.clone(), (vid, 0)));
                continue;
            }
        };
        let (s_clusters, _) = dbscan(&xy, eps_xy, config.min_pts_spatial)?;
        for (sid, smembers) in s_clusters.iter().enumerate() {
            let members = smembers.iter().map(|&l| vmembers[l]).collect();
            clusters.push(Cluster::from_members(cloud, members, (vid, sid)));
        }
    }
    Ok(filter_clusters(clusters, config))
}

/// Drop clusters below `min_cluster_size`; drop (or tag, in tag mode)
/// clusters whose bbox violates the extent or horizontal aspect limits.
pub fn filter_clusters(clusters: Vec<Cluster>, config: &ClusteringConfig) -> Vec<Cluster> {
    let mut out = Vec::new();
    for mut c in clusters {
        if c.members.len() < config.min_cluster_size {
            continue;
        }
        let ext = [
            c.bbox_max[0] - c.bbox_min[0],
            c.bbox_max[1] - c.bbox_min[1],
            c.bbox_max[2] - c.bbox_min[2],
        ];
        let long = ext[0].max(ext[1]);
        let short = ext[0].min(ext[1]).max(config.extent_floor);
        let unreasonable =
            ext.iter().any(|&e| e > config.max_extent) || long / short > config.max_aspect;
        if unreasonable {
            if config.tag_mode {
                c.roadside_like = true;
            } else {
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// Union of the last `window` frames. Stationary points pass through;
/// moving points are dead-reckoned radially to the newest frame time:
/// r' = r - v * Δt along their own line of sight.
pub fn overlay_frames(clouds: &[PointCloud], window: usize) -> Result<PointCloud> {
    if clouds.is_empty() {
        return Err(Error::Domain("no frames to overlay".into()));
    }
    if window < 1 {
        return Err(Error::Domain("window must be >= 1".into()));
    }
    for pair in clouds.windows(2) {
        if pair[1].frame_index != pair[0].frame_index + 1 {
            return Err(Error::Domain(format!(
                "frames not consecutive: {} then {}",
                pair[0].frame_index, pair[1].frame_index
            )));
        }
    }
    let newest = clouds.last().unwrap();
    let start = clouds.len().saturating_sub(window);
    let mut points = Vec::new();
    for cloud in &clouds[start..] {
        let dt = (newest.frame_index - cloud.frame_index) as f64 * newest.frame_interval;
        for p in &cloud.points {
            if p.v_radial.abs() <= STATIONARY_V_THRESHOLD || dt == 0.0 {
                points.push(RadarPoint {
                    frame_index: newest.frame_index,
                    ..*p
                });
            } else {
                let r = (p.range - p.v_radial * dt).max(1e-6);
                points.push(RadarPoint::from_polar(
                    r,
                    p.azimuth,
                    p.elevation,
                    p.v_radial,
                    p.intensity,
                    newest.frame_index,
                ));
            }
        }
    }
    Ok(PointCloud {
        points,
        frame_index: newest.frame_index,
        frame_interval: newest.frame_interval,
    })
}

/// Column standardization parameters for (x, y, z, v) features.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl Normalization {
    pub fn invert(&self, rows: &[[f64; 4]]) -> Vec<[f64; 4]> {
        rows.iter()
            .map(|r| {
                let mut out = [0.0; 4];
                for c in 0..4 {
                    out[c] = r[c] * self.std[c] + self.mean[c];
                }
                out
            })
            .collect()
    }
}

/// Standardize (x, y, z, v) per column to zero mean and unit population
/// variance. Constant columns pass through as zeros.
pub fn normalize_points(cloud: &PointCloud) -> Result<(Vec<[f64; 4]>, Normalization)> {
    if cloud.points.is_empty() {
        return Err(Error::Domain("point cloud is empty".into()));
    }
    let n = cloud.points.len() as f64;
    let rows: Vec<[f64; 4]> = cloud
        .points
        .iter()
        .map(|p| [p.x, p.y, p.z, p.v_radial])
        .collect();
    let mut mean = [0.0; 4];
    for r in &rows {
        for c in 0..4 {
            mean[c] += r[c] / n;
        }
    }
    let mut std = [0.0; 4];
    for r in &rows {
        for c in 0..4 {
            std[c] += (r[c] - mean[c]).powi(2) / n;
        }
    }
    for s in std.iter_mut() {
        *s = s.sqrt();
    }
    let out = rows
        .iter()
        .map(|r| {
            let mut o = [0.0; 4];
            for c in 0..4 {
                o[c] = if std[c] > 0.0 { (r[c] - mean[c]) / std[c] } else { 0.0 };
            }
            o
        })
        .collect();
    // constant columns invert through std 1 so the round trip is exact
    let inv_std = std.map(|s| if s > 0.0 { s } else { 1.0 });
    Ok((out, Normalization { mean, std: inv_std }))
}

/// Farthest point sampling: greedy max-min selection of `m` indices starting
/// from `start_index`; ties broken toward the lowest index.
pub fn fps(points: &[Vec<f64>], m: usize, start_index: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m < 1 || m > n {
        return Err(Error::Domain(format!("m = {m} out of range 1..={n}")));
    }
    if start_index >= n {
        return Err(Error::Domain(format!("start_index {start_index} out of range")));
    }
    let mut picked = vec![start_index];
    let mut min_dist: Vec<f64> = points
        .iter()
        .map(|p| euclidean(p, &points[start_index]))
        .collect();
    while picked.len() < m {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &d) in min_dist.iter().enumerate() {
            if d > best.1 {
                best = (i, d);
            }
        }
        picked.push(best.0);
        for (i, d) in min_dist.iter_mut().enumerate() {
            let nd = euclidean(&points[i], &points[best.0]);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(picked)
}

/// Fixed-radius grouping: per center, indices of points within `radius`
/// (ascending, truncated to `max_k`). A center with no point in range gets
/// its nearest point so groups are never empty.
pub fn ball_query(
    points: &[Vec<f64>],
    centers: &[Vec<f64>],
    radius: f64,
    max_k: usize,
) -> Result<Vec<Vec<usize>>> {
    if points.is_empty() {
        return Err(Error::Domain("empty point set".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain("radius must be > 0".into()));
    }
    if max_k < 1 {
        return Err(Error::Domain("max_k must be >= 1".into()));
    }
    Ok(centers
        .iter()
        .map(|c| {
            let mut hits: Vec<usize> = (0..points.len())
                .filter(|&i| euclidean(&points[i], c) <= radius)
                .collect();
            if hits.is_empty() {
                let nearest = (0..points.len())
                    .min_by(|&a, &b| {
                        euclidean(&points[a], c)
                            .partial_cmp(&euclidean(&points[b], c))
                            .unwrap()
                    })
                    .unwrap();
                hits.push(nearest);
            }
            hits.truncate(max_k);
            hits
        })
        .collect())
}
