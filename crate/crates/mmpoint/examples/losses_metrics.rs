//! Evaluation primitives: IoU of regions and masks, a positioning-error
//! table, the three segmentation losses with analytic gradients, and a
//! confusion matrix.
//!
//!     cargo run --example losses_metrics

use mmpoint::metrics::{
    confusion_matrix, cross_entropy, cross_entropy_gradient, dice_gradient, dice_loss,
    focal_gradient, focal_loss, iou_masks, iou_regions, positioning_table, rasterize_region,
    MaskGrid, Region2D,
};
use ndarray::array;

fn main() -> mmpoint::Result<()> {
    // region IoU: two unit squares offset by half a side
    let a = Region2D::Box { min: [0.0, 0.0], max: [1.0, 1.0] };
    let b = Region2D::Box { min: [0.5, 0.0], max: [1.5, 1.0] };
    println!("IoU of half-overlapping unit squares: {:.4}", iou_regions(&a, &b)?);

    // mask IoU after rasterization
    let axis: Vec<f64> = (0..60).map(|i| i as f64 * 0.05).collect();
    let ma = rasterize_region(&a, &axis, &axis)?;
    let mb = rasterize_region(&b, &axis, &axis)?;
    println!("same IoU on a 5 cm raster:              {:.4}", iou_masks(&ma, &mb)?);

    // positioning-error table against a tape-measured reference
    let measured = [2.56, 2.275, 2.285, 2.22, 2.52, 2.2];
    let table = positioning_table(&measured, 2.275)?;
    println!("\npositioning errors vs 2.275 m reference:");
    for (m, e) in table.extracted.iter().zip(&table.errors) {
        println!("  {m:5.3} m -> {:+6.2}%", e * 100.0);
    }
    println!("  mean extracted: {:.5} m", table.mean_extracted);

    // losses and gradients
    let gt = MaskGrid::new(array![[1.0, 0.0]], vec![0.0, 1.0], vec![0.0])?;
    let pred = MaskGrid::new(array![[0.5, 0.5]], vec![0.0, 1.0], vec![0.0])?;
    println!("\ndice(pred=[0.5,0.5], gt=[1,0])   = {:.6}", dice_loss(&pred, &gt, 0.0)?);
    println!("dice gradient                    = {:?}", dice_gradient(&pred, &gt, 0.0)?.as_slice().unwrap());
    let f = focal_loss(&[0.5], 1.0, 2.0, None)?;
    println!("focal(p=0.5, alpha=1, gamma=2)   = {:.6}", f.value);
    println!("focal gradient                   = {:?}", focal_gradient(&[0.5], 1.0, 2.0)?);
    let ce = cross_entropy(&[true, false], &[0.9, 0.1])?;
    println!("cross-entropy(y=[1,0], p=[.9,.1])= {:.6}", ce.value);
    println!("cross-entropy gradient           = {:?}", cross_entropy_gradient(&[true, false], &[0.9, 0.1])?);

    // confusion matrix over four classes
    let classes = ["car", "roadside", "bicycle", "pedestrian"];
    let truth = ["car", "car", "bicycle", "bicycle", "bicycle", "pedestrian"];
    let pred_labels = ["car", "car", "bicycle", "bicycle", "car", "pedestrian"];
    let cm = confusion_matrix(&truth, &pred_labels, &classes)?;
    println!("\nconfusion matrix (rows = truth):");
    for (c, row) in classes.iter().zip(&cm.rates) {
        let cells: Vec<String> = row.iter().map(|v| format!("{:5.0}%", v * 100.0)).collect();
        println!("  {c:>10}: {}", cells.join(" "));
    }
    Ok(())
}
