//! Evaluation primitives: IoU over regions and masks, positioning error,
//! dice / focal / cross-entropy losses with analytic gradients, confusion
//! matrices and range density profiles.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::detection::PointCloud;
use crate::{Error, Result};

/// Probabilities are clamped away from 0 and 1 by this much before any log.
pub const CLAMP_EPSILON: f64 = 1e-7;

/// A planar region: axis-aligned box or convex quadrilateral, meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region2D {
    Box { min: [f64; 2], max: [f64; 2] },
    Quad { vertices: [[f64; 2]; 4] },
}

fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        s += poly[i][0] * poly[j][1] - poly[j][0] * poly[i][1];
    }
    s / 2.0
}

impl Region2D {
    /// Vertices in counter-clockwise order.
    pub fn polygon(&self) -> Vec<[f64; 2]> {
        match self {
            Region2D::Box { min, max } => vec![
                [min[0], min[1]],
                [max[0], min[1]],
                [max[0], max[1]],
                [min[0], max[1]],
            ],
            Region2D::Quad { vertices } => {
                let mut v = vertices.to_vec();
                if shoelace(&v) < 0.0 {
                    v.reverse();
                }
                v
            }
        }
    }

    pub fn area(&self) -> f64 {
        shoelace(&self.polygon())
    }

    pub fn validate(&self) -> Result<()> {
        if let Region2D::Box { min, max } = self {
            if !(max[0] > min[0] && max[1] > min[1]) {
                return Err(Error::Validation("box must have positive extent".into()));
            }
        }
        let poly = self.polygon();
        if !(shoelace(&poly) > 0.0) {
            return Err(Error::Validation("region must have positive area".into()));
        }
        // convexity: all cross products of consecutive edges share one sign
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let c = poly[(i + 2) % poly.len()];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross < 0.0 {
                return Err(Error::Validation(
                    "quadrilateral must be convex with consistent winding".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let poly = self.polygon();
        poly.iter().enumerate().all(|(i, a)| {
            let b = poly[(i + 1) % poly.len()];
            (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) >= 0.0
        })
    }
}

/// Sutherland–Hodgman clip of a convex subject polygon by a convex
/// counter-clockwise clip polygon.
fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let inside =
            |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0;
        let intersect = |p: [f64; 2], q: [f64; 2]| -> [f64; 2] {
            let d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            let d2 = (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0]);
            let t = d1 / (d1 - d2);
            [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
        };
        let input = output;
        output = Vec::with_capacity(input.len() + 4);
        for j in 0..input.len() {
            let p = input[j];
            let q = input[(j + 1) % input.len()];
            match (inside(p), inside(q)) {
                (true, true) => output.push(q),
                (true, false) => output.push(intersect(p, q)),
                (false, true) => {
                    output.push(intersect(p, q));
                    output.push(q);
                }
                (false, false) => {}
            }
        }
        if output.is_empty() {
            break;
        }
    }
    output
}

/// Area-based intersection over union of two convex regions.
pub fn iou_regions(a: &Region2D, b: &Region2D) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let pa = a.polygon();
    let pb = b.polygon();
    let inter = shoelace(&clip_convex(&pa, &pb)).max(0.0);
    let union = a.area() + b.area() - inter;
    Ok(inter / union)
}

/// Per-cell values over a Cartesian grid: predictions in [0, 1], ground
/// truth in {0, 1}. Grids are compared only when their axes coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    /// values[[iy, ix]]
    pub values: Array2<f64>,
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
}

impl MaskGrid {
    pub fn new(values: Array2<f64>, x_axis: Vec<f64>, y_axis: Vec<f64>) -> Result<Self> {
        if values.nrows() != y_axis.len() || values.ncols() != x_axis.len() {
            return Err(Error::Validation(format!(
                "mask shape {:?} does not match axes ({}, {})",
                values.dim(),
                y_axis.len(),
                x_axis.len()
            )));
        }
        if values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Validation("mask values must lie in [0, 1]".into()));
        }
        Ok(MaskGrid { values, x_axis, y_axis })
    }

    pub fn same_grid(&self, other: &MaskGrid) -> bool {
        self.x_axis.len() == other.x_axis.len()
            && self.y_axis.len() == other.y_axis.len()
            && self
                .x_axis
                .iter()
                .zip(&other.x_axis)
                .chain(self.y_axis.iter().zip(&other.y_axis))
                .all(|(a, b)| (a - b).abs() <= 1e-9)
    }

    /// Cells at or above 0.5 count as occupied.
    pub fn binarize(&self) -> Array2<bool> {
        self.values.mapv(|v| v >= 0.5)
    }
}

/// Cell-count intersection over union of two binarized masks. Two empty
/// masks are identical and score 1.
pub fn iou_masks(a: &MaskGrid, b: &MaskGrid) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::Domain("mask grids do not match".into()));
    }
    let (ba, bb) = (a.binarize(), b.binarize());
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in ba.iter().zip(bb.iter()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Paint a region onto a grid: cells whose centers fall inside get 1.
pub fn rasterize_region(region: &Region2D, x_axis: &[f64], y_axis: &[f64]) -> Result<MaskGrid> {
    region.validate()?;
    let mut values = Array2::zeros((y_axis.len(), x_axis.len()));
    for (iy, &y) in y_axis.iter().enumerate() {
        for (ix, &x) in x_axis.iter().enumerate() {
            if region.contains(x, y) {
                values[[iy, ix]] = 1.0;
            }
        }
    }
    MaskGrid::new(values, x_axis.to_vec(), y_axis.to_vec())
}

/// Signed relative error of an extracted distance against its reference.
pub fn positioning_error(extracted: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::Domain("reference distance must be > 0".into()));
    }
    Ok((extracted - reference) / reference)
}

/// One measured-vs-reference distance table: per-row signed errors plus the
/// column mean of the extracted values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositioningTable {
    pub extracted: Vec<f64>,
    pub reference: f64,
    pub errors: Vec<f64>,
    pub mean_extracted: f64,
}

pub fn positioning_table(extracted: &[f64], reference: f64) -> Result<PositioningTable> {
    if extracted.is_empty() {
        return Err(Error::Domain("empty measurement list".into()));
    }
    let errors = extracted
        .iter()
        .map(|&e| positioning_error(e, reference))
        .collect::<Result<Vec<_>>>()?;
    Ok(PositioningTable {
        extracted: extracted.to_vec(),
        reference,
        errors,
        mean_extracted: extracted.iter().sum::<f64>() / extracted.len() as f64,
    })
}

/// A loss value plus a flag raised when any probability had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub value: f64,
    pub clamped: bool,
}

/// Soft overlap loss: 1 − (2 Σ p·g + s) / (Σ p² + Σ g² + s).
pub fn dice_loss(pred: &MaskGrid, gt: &MaskGrid, smooth: f64) -> Result<f64> {
    if !pred.same_grid(gt) {
        return Err(Error::Domain("mask grids do not match".into()));
    }
    if smooth < 0.0 {
        return Err(Error::Domain("smooth must be >= 0".into()));
    }
    let num: f64 = pred
        .values
        .iter()
        .zip(gt.values.iter())
        .map(|(p, g)| p * g)
        .sum::<f64>()
        * 2.0
        + smooth;
    let den: f64 = pred.values.iter().map(|p| p * p).sum::<f64>()
        + gt.values.iter().map(|g| g * g).sum::<f64>()
        + smooth;
    if den == 0.0 {
        return Err(Error::Domain(
            "dice loss undefined for two empty masks with smooth = 0".into(),
        ));
    }
    Ok(1.0 - num / den)
}

/// d(dice)/d(pred_i), same layout as the prediction mask.
pub fn dice_gradient(pred: &MaskGrid, gt: &MaskGrid, smooth: f64) -> Result<Array2<f64>> {
    if !pred.same_grid(gt) {
        return Err(Error::Domain("mask grids do not match".into()));
    }
    let num: f64 = pred
        .values
        .iter()
        .zip(gt.values.iter())
        .map(|(p, g)| p * g)
        .sum::<f64>()
        * 2.0
        + smooth;
    let den: f64 = pred.values.iter().map(|p| p * p).sum::<f64>()
        + gt.values.iter().map(|g| g * g).sum::<f64>()
        + smooth;
    if den == 0.0 {
        return Err(Error::Domain("dice gradient undefined for empty masks".into()));
    }
    let mut grad = Array2::zeros(pred.values.dim());
    for ((gout, &p), &g) in grad.iter_mut().zip(pred.values.iter()).zip(gt.values.iter()) {
        *gout = -2.0 * g / den + num * 2.0 * p / (den * den);
    }
    Ok(grad)
}

/// Mean of −α (1 − p)^γ ln p over positive samples. Optional per-sample
/// weights scale each term before averaging.
pub fn focal_loss(pred: &[f64], alpha: f64, gamma: f64, weights: Option<&[f64]>) -> Result<LossValue> {
    if pred.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    if !(alpha > 0.0) || gamma < 0.0 {
        return Err(Error::Domain("require alpha > 0 and gamma >= 0".into()));
    }
    if let Some(w) = weights {
        if w.len() != pred.len() {
            return Err(Error::Domain("weight length mismatch".into()));
        }
    }
    let mut clamped = false;
    let mut total = 0.0;
    for (i, &p) in pred.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        let pc = if p < CLAMP_EPSILON {
            clamped = true;
            CLAMP_EPSILON
        } else {
            p
        };
        let w = weights.map_or(1.0, |w| w[i]);
        total += w * (-alpha * (1.0 - pc).powf(gamma) * pc.ln());
    }
    Ok(LossValue {
        value: total / pred.len() as f64,
        clamped,
    })
}

/// d(focal)/d(pred_i) for the averaged positive-branch loss.
pub fn focal_gradient(pred: &[f64], alpha: f64, gamma: f64) -> Result<Vec<f64>> {
    if pred.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let n = pred.len() as f64;
    pred.iter()
        .map(|&p| {
            let pc = p.clamp(CLAMP_EPSILON, 1.0);
            let g = if gamma == 0.0 {
                -alpha / pc
            } else {
                alpha * gamma * (1.0 - pc).powf(gamma - 1.0) * pc.ln()
                    - alpha * (1.0 - pc).powf(gamma) / pc
            };
            Ok(g / n)
        })
        .collect()
}

/// Binary cross entropy: −Σ [y ln p + (1 − y) ln(1 − p)], natural log.
pub fn cross_entropy(y: &[bool], p: &[f64]) -> Result<LossValue> {
    if y.len() != p.len() {
        return Err(Error::Domain(format!(
            "label/probability length mismatch: {} vs {}",
            y.len(),
            p.len()
        )));
    }
    let mut clamped = false;
    let mut total = 0.0;
    for (&yi, &pi) in y.iter().zip(p.iter()) {
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::Domain(format!("probability {pi} outside [0, 1]")));
        }
        let pc = pi.clamp(CLAMP_EPSILON, 1.0 - CLAMP_EPSILON);
        if pc != pi {
            clamped = true;
        }
        total -= if yi { pc.ln() } else { (1.0 - pc).ln() };
    }
    Ok(LossValue { value: total, clamped })
}

/// d(cross_entropy)/d(p_i) = −y/p + (1 − y)/(1 − p).
pub fn cross_entropy_gradient(y: &[bool], p: &[f64]) -> Result<Vec<f64>> {
    if y.len() != p.len() {
        return Err(Error::Domain("label/probability length mismatch".into()));
    }
    Ok(y.iter()
        .zip(p.iter())
        .map(|(&yi, &pi)| {
            let pc = pi.clamp(CLAMP_EPSILON, 1.0 - CLAMP_EPSILON);
            if yi {
                -1.0 / pc
            } else {
                1.0 / (1.0 - pc)
            }
        })
        .collect())
}

/// Softmax-style multiclass variant: −Σ y ln p over one-hot labels.
pub fn cross_entropy_multiclass(y: &[bool], p: &[f64]) -> Result<LossValue> {
    if y.len() != p.len() {
        return Err(Error::Domain("label/probability length mismatch".into()));
    }
    let mut clamped = false;
    let mut total = 0.0;
    for (&yi, &pi) in y.iter().zip(p.iter()) {
        if yi {
            let pc = pi.clamp(CLAMP_EPSILON, 1.0);
            if pc != pi {
                clamped = true;
            }
            total -= pc.ln();
        }
    }
    Ok(LossValue { value: total, clamped })
}

/// Weighted sum of dice and focal terms; the focal term runs over the
/// prediction values at ground-truth-positive cells.
pub fn dice_focal_loss(
    pred: &MaskGrid,
    gt: &MaskGrid,
    smooth: f64,
    alpha: f64,
    gamma: f64,
    w_dice: f64,
    w_focal: f64,
) -> Result<f64> {
    let dice = dice_loss(pred, gt, smooth)?;
    let positives: Vec<f64> = pred
        .values
        .iter()
        .zip(gt.values.iter())
        .filter(|(_, &g)| g >= 0.5)
        .map(|(&p, _)| p)
        .collect();
    let focal = if positives.is_empty() {
        0.0
    } else {
        focal_loss(&positives, alpha, gamma, None)?.value
    };
    Ok(w_dice * dice + w_focal * focal)
}

/// Row-normalized confusion matrix; rows are truth classes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
    /// Row-normalized rates; an all-zero row stays zero and is flagged.
    pub rates: Vec<Vec<f64>>,
    pub empty_rows: Vec<bool>,
}

pub fn confusion_matrix(
    truth: &[&str],
    predicted: &[&str],
    classes: &[&str],
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Domain("label list length mismatch".into()));
    }
    let index = |label: &str| -> Result<usize> {
        classes
            .iter()
            .position(|&c| c == label)
            .ok_or_else(|| Error::Domain(format!("unknown label '{label}'")))
    };
    let k = classes.len();
    let mut counts = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(predicted.iter()) {
        counts[index(t)?][index(p)?] += 1;
    }
    let mut rates = vec![vec![0.0; k]; k];
    let mut empty_rows = vec![false; k];
    for r in 0..k {
        let total: usize = counts[r].iter().sum();
        if total == 0 {
            empty_rows[r] = true;
        } else {
            for c in 0..k {
                rates[r][c] = counts[r][c] as f64 / total as f64;
            }
        }
    }
    Ok(ConfusionMatrix {
        classes: classes.iter().map(|s| s.to_string()).collect(),
        counts,
        rates,
        empty_rows,
    })
}

/// Histogram of point ranges over monotone bin edges.
pub fn density_profile(cloud: &PointCloud, range_bin_edges: &[f64]) -> Result<Vec<usize>> {
    if range_bin_edges.len() < 2 {
        return Err(Error::Domain("need at least two bin edges".into()));
    }
    if range_bin_edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("bin edges must be strictly increasing".into()));
    }
    let mut counts = vec![0usize; range_bin_edges.len() - 1];
    for p in &cloud.points {
        for (b, w) in range_bin_edges.windows(2).enumerate() {
            let last = b == counts.len() - 1;
            if p.range >= w[0] && (p.range < w[1] || (last && p.range <= w[1])) {
                counts[b] += 1;
                break;
            }
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn unit_box(x0: f64, y0: f64) -> Region2D {
        Region2D::Box {
            min: [x0, y0],
            max: [x0 + 1.0, y0 + 1.0],
        }
    }

    #[test]
    fn iou_identical_disjoint_offset() {
        let a = unit_box(0.0, 0.0);
        assert_relative_eq!(iou_regions(&a, &a).unwrap(), 1.0);
        assert_relative_eq!(iou_regions(&a, &unit_box(5.0, 5.0)).unwrap(), 0.0);
        // overlap 0.5, union 1.5
        assert_relative_eq!(
            iou_regions(&a, &unit_box(0.5, 0.0)).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn iou_quad_matches_equivalent_box() {
        let a = unit_box(0.0, 0.0);
        // same square, clockwise winding gets normalized
        let q = Region2D::Quad {
            vertices: [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]],
        };
        assert_relative_eq!(iou_regions(&a, &q).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_rotated_square_analytic() {
        // unit square vs the same square rotated 45 degrees about its center:
        // intersection is a regular octagon with area 2(sqrt(2) - 1)
        let a = unit_box(0.0, 0.0);
        let h = 0.5;
        let r = std::f64::consts::SQRT_2 / 2.0;
        let q = Region2D::Quad {
            vertices: [[h + r, h], [h, h + r], [h - r, h], [h, h - r]],
        };
        let inter = 2.0 * (std::f64::consts::SQRT_2 - 1.0);
        let expected = inter / (2.0 - inter);
        assert_relative_eq!(iou_regions(&a, &q).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn iou_symmetric_random_quads() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut mk = || {
                let cx: f64 = rng.gen_range(-2.0..2.0);
                let cy: f64 = rng.gen_range(-2.0..2.0);
                let w: f64 = rng.gen_range(0.5..2.0);
                let h: f64 = rng.gen_range(0.5..2.0);
                Region2D::Box {
                    min: [cx - w, cy - h],
                    max: [cx + w, cy + h],
                }
            };
            let (a, b) = (mk(), mk());
            let ab = iou_regions(&a, &b).unwrap();
            let ba = iou_regions(&b, &a).unwrap();
            assert_relative_eq!(ab, ba, epsilon = 1e-12);
            assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn region_validation_rejects_degenerate_and_nonconvex() {
        assert!(Region2D::Box {
            min: [0.0, 0.0],
            max: [0.0, 1.0]
        }
        .validate()
        .is_err());
        // chevron (non-convex)
        assert!(Region2D::Quad {
            vertices: [[0.0, 0.0], [2.0, 0.0], [1.0, 0.2], [0.0, 2.0]]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn mask_iou_and_grid_mismatch() {
        let x = vec![0.0, 1.0, 2.0];
        let y = vec![0.0, 1.0];
        let a = MaskGrid::new(array![[1.0, 1.0, 0.0], [0.0, 0.0, 0.0]], x.clone(), y.clone()).unwrap();
        let b = MaskGrid::new(array![[0.0, 1.0, 1.0], [0.0, 0.0, 0.0]], x.clone(), y.clone()).unwrap();
        assert_relative_eq!(iou_masks(&a, &b).unwrap(), 1.0 / 3.0);
        assert_relative_eq!(iou_masks(&a, &a).unwrap(), 1.0);
        let other = MaskGrid::new(array![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], vec![0.0, 1.0, 5.0], y).unwrap();
        assert!(iou_masks(&a, &other).is_err());
    }

    #[test]
    fn mask_binarize_threshold() {
        let m = MaskGrid::new(array![[0.49, 0.5, 0.51]], vec![0.0, 1.0, 2.0], vec![0.0]).unwrap();
        let b = m.binarize();
        assert_eq!(b[[0, 0]], false);
        assert_eq!(b[[0, 1]], true);
        assert_eq!(b[[0, 2]], true);
    }

    #[test]
    fn rasterize_box_and_shifted_overlap() {
        let axis: Vec<f64> = (0..100).map(|i| -5.0 + 0.1 * i as f64 + 0.05).collect();
        let a = rasterize_region(
            &Region2D::Box {
                min: [-2.0, -2.0],
                max: [2.0, 2.0],
            },
            &axis,
            &axis,
        )
        .unwrap();
        let b = rasterize_region(
            &Region2D::Box {
                min: [-1.0, -2.0],
                max: [3.0, 2.0],
            },
            &axis,
            &axis,
        )
        .unwrap();
        // analytic overlap: 3x4 over union 5x4 = 0.6; half-cell rasterization slack
        let v = iou_masks(&a, &b).unwrap();
        assert!((v - 0.6).abs() < 0.02, "iou {v}");
    }

    #[test]
    fn positioning_error_spot_values() {
        let e = positioning_error(2.56, 2.275).unwrap();
        assert!((e - 0.1253).abs() < 1e-4, "error {e}");
        assert_relative_eq!(positioning_error(2.275, 2.275).unwrap(), 0.0);
        assert!(positioning_error(1.0, 0.0).is_err());
    }

    #[test]
    fn positioning_table_mean() {
        let a = [
            2.56, 2.275, 2.285, 2.22, 2.52, 2.2, 2.5, 2.55, 2.31, 2.245, 2.565, 2.5, 2.26, 1.975,
            1.925, 2.13,
        ];
        let t = positioning_table(&a, 2.275).unwrap();
        assert_relative_eq!(t.mean_extracted, 2.31375, epsilon = 1e-12);
        assert_eq!(t.errors.len(), 16);
    }

    #[test]
    fn dice_spot_values() {
        let x = vec![0.0, 1.0];
        let y = vec![0.0];
        let gt = MaskGrid::new(array![[1.0, 0.0]], x.clone(), y.clone()).unwrap();
        let pred = MaskGrid::new(array![[0.5, 0.5]], x.clone(), y.clone()).unwrap();
        assert_relative_eq!(dice_loss(&pred, &gt, 0.0).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(dice_loss(&gt, &gt, 0.0).unwrap(), 0.0);
        let zero = MaskGrid::new(array![[0.0, 0.0]], x.clone(), y.clone()).unwrap();
        assert_relative_eq!(dice_loss(&zero, &gt, 0.0).unwrap(), 1.0);
        assert!(dice_loss(&zero, &zero, 0.0).is_err());
        assert_relative_eq!(dice_loss(&zero, &zero, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn focal_spot_values() {
        assert_relative_eq!(focal_loss(&[1.0], 1.0, 2.0, None).unwrap().value, 0.0);
        let v = focal_loss(&[0.5], 1.0, 2.0, None).unwrap().value;
        assert_relative_eq!(v, 0.25 * 2.0_f64.ln(), epsilon = 1e-12);
        // gamma = 0, alpha = 1 reduces to mean negative log likelihood
        let p = [0.3, 0.8];
        let v0 = focal_loss(&p, 1.0, 0.0, None).unwrap().value;
        assert_relative_eq!(v0, -(0.3_f64.ln() + 0.8_f64.ln()) / 2.0, epsilon = 1e-12);
        let clamped = focal_loss(&[0.0], 1.0, 2.0, None).unwrap();
        assert!(clamped.clamped && clamped.value.is_finite());
        assert!(focal_loss(&[1.5], 1.0, 2.0, None).is_err());
    }

    #[test]
    fn focal_weights_scale_terms() {
        let unweighted = focal_loss(&[0.4, 0.4], 1.0, 2.0, None).unwrap().value;
        let weighted = focal_loss(&[0.4, 0.4], 1.0, 2.0, Some(&[2.0, 2.0])).unwrap().value;
        assert_relative_eq!(weighted, 2.0 * unweighted, epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_spot_values() {
        let v = cross_entropy(&[true], &[0.5]).unwrap().value;
        assert_relative_eq!(v, 2.0_f64.ln(), epsilon = 1e-12);
        let v2 = cross_entropy(&[true, false], &[0.9, 0.1]).unwrap().value;
        assert_relative_eq!(v2, -2.0 * 0.9_f64.ln(), epsilon = 1e-12);
        let near = cross_entropy(&[true, false], &[1.0, 0.0]).unwrap();
        assert!(near.clamped);
        assert!(near.value.abs() < 1e-6);
        assert!(cross_entropy(&[true], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn cross_entropy_multiclass_ignores_negatives() {
        let v = cross_entropy_multiclass(&[true, false, false], &[0.5, 0.9, 0.9])
            .unwrap()
            .value;
        assert_relative_eq!(v, 2.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_gradient_spot() {
        let g = cross_entropy_gradient(&[true], &[0.5]).unwrap();
        assert_relative_eq!(g[0], -2.0, epsilon = 1e-12);
        let g2 = cross_entropy_gradient(&[false], &[0.25]).unwrap();
        assert_relative_eq!(g2[0], 1.0 / 0.75, epsilon = 1e-12);
    }

    fn finite_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn cross_entropy_gradient_finite_difference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let n = rng.gen_range(1..8);
            let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
            let grad = cross_entropy_gradient(&y, &p).unwrap();
            for i in 0..n {
                let fd = finite_diff(
                    |x| {
                        let mut q = p.clone();
                        q[i] = x;
                        cross_entropy(&y, &q).unwrap().value
                    },
                    p[i],
                    1e-5,
                );
                assert_relative_eq!(grad[i], fd, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn focal_gradient_finite_difference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let n = rng.gen_range(1..8);
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
            let alpha = rng.gen_range(0.25..2.0);
            let gamma = rng.gen_range(0.0..4.0);
            let grad = focal_gradient(&p, alpha, gamma).unwrap();
            for i in 0..n {
                let fd = finite_diff(
                    |x| {
                        let mut q = p.clone();
                        q[i] = x;
                        focal_loss(&q, alpha, gamma, None).unwrap().value
                    },
                    p[i],
                    1e-5,
                );
                assert_relative_eq!(grad[i], fd, max_relative = 1e-4, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn focal_gradient_zero_at_perfect_prediction() {
        let g = focal_gradient(&[1.0], 1.0, 2.0).unwrap();
        assert_relative_eq!(g[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dice_gradient_finite_difference_and_sign() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let x: Vec<f64> = (0..4).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..3).map(|i| i as f64).collect();
        for _ in 0..100 {
            let gt_vals = Array2::from_shape_fn((3, 4), |_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 });
            let pred_vals = Array2::from_shape_fn((3, 4), |_| rng.gen_range(0.05..0.95));
            let gt = MaskGrid::new(gt_vals, x.clone(), y.clone()).unwrap();
            let pred = MaskGrid::new(pred_vals, x.clone(), y.clone()).unwrap();
            if gt.values.sum() == 0.0 {
                continue;
            }
            let grad = dice_gradient(&pred, &gt, 0.0).unwrap();
            for iy in 0..3 {
                for ix in 0..4 {
                    let fd = finite_diff(
                        |v| {
                            let mut q = pred.clone();
                            q.values[[iy, ix]] = v;
                            dice_loss(&q, &gt, 0.0).unwrap()
                        },
                        pred.values[[iy, ix]],
                        1e-5,
                    );
                    assert_relative_eq!(grad[[iy, ix]], fd, max_relative = 1e-4, epsilon = 1e-8);
                }
            }
        }
        // at pred = gt, raising an off-mask prediction cannot decrease loss
        let gt = MaskGrid::new(array![[1.0, 0.0], [0.0, 0.0]], vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let grad = dice_gradient(&gt.clone(), &gt, 0.0).unwrap();
        for ((iy, ix), &g) in gt.values.indexed_iter() {
            if g == 0.0 {
                assert!(grad[[iy, ix]] >= 0.0);
            }
        }
    }

    #[test]
    fn dice_focal_combination() {
        let x = vec![0.0, 1.0];
        let y = vec![0.0];
        let gt = MaskGrid::new(array![[1.0, 0.0]], x.clone(), y.clone()).unwrap();
        let pred = MaskGrid::new(array![[0.5, 0.5]], x, y).unwrap();
        let d = dice_loss(&pred, &gt, 0.0).unwrap();
        let f = focal_loss(&[0.5], 1.0, 2.0, None).unwrap().value;
        let combined = dice_focal_loss(&pred, &gt, 0.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(combined, d + f, epsilon = 1e-12);
        let weighted = dice_focal_loss(&pred, &gt, 0.0, 1.0, 2.0, 2.0, 0.5).unwrap();
        assert_relative_eq!(weighted, 2.0 * d + 0.5 * f, epsilon = 1e-12);
    }

    #[test]
    fn confusion_identity_and_engineered_rows() {
        let classes = ["car", "roadside", "bicycle", "pedestrian"];
        let truth = ["car", "roadside", "bicycle", "pedestrian"];
        let cm = confusion_matrix(&truth, &truth, &classes).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_relative_eq!(cm.rates[r][c], if r == c { 1.0 } else { 0.0 });
            }
        }
        // 10 bicycle truths: 1 -> car, 8 -> bicycle, 1 -> pedestrian
        let truth: Vec<&str> = std::iter::repeat("bicycle").take(10).collect();
        let pred = [
            "car", "bicycle", "bicycle", "bicycle", "bicycle", "bicycle", "bicycle", "bicycle",
            "bicycle", "pedestrian",
        ];
        let cm = confusion_matrix(&truth, &pred, &classes).unwrap();
        let row = &cm.rates[2];
        assert_relative_eq!(row[0], 0.10, epsilon = 1e-12);
        assert_relative_eq!(row[1], 0.0);
        assert_relative_eq!(row[2], 0.80, epsilon = 1e-12);
        assert_relative_eq!(row[3], 0.10, epsilon = 1e-12);
        assert_relative_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn confusion_empty_row_flag_and_unknown_label() {
        let classes = ["car", "bicycle"];
        let cm = confusion_matrix(&["car"], &["car"], &classes).unwrap();
        assert!(!cm.empty_rows[0]);
        assert!(cm.empty_rows[1]);
        assert!(cm.rates[1].iter().all(|&v| v == 0.0));
        assert!(confusion_matrix(&["truck"], &["car"], &classes).is_err());
    }

    #[test]
    fn density_profile_cases() {
        let empty = PointCloud {
            points: Vec::new(),
            frame_index: 0,
            frame_interval: 0.05,
        };
        assert_eq!(density_profile(&empty, &[0.0, 10.0, 20.0]).unwrap(), vec![0, 0]);

        let points = (0..5)
            .map(|_| crate::detection::RadarPoint::from_polar(15.0, 0.0, 0.0, 0.0, 1.0, 0))
            .collect();
        let cloud = PointCloud {
            points,
            frame_index: 0,
            frame_interval: 0.05,
        };
        assert_eq!(density_profile(&cloud, &[0.0, 10.0, 20.0]).unwrap(), vec![0, 5]);
        assert!(density_profile(&cloud, &[5.0, 5.0]).is_err());
        // inclusive top edge
        assert_eq!(density_profile(&cloud, &[0.0, 15.0]).unwrap(), vec![5]);
    }
}
