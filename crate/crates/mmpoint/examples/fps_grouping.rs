//! Farthest point sampling and fixed-radius ball-query grouping on a
//! normalized radar point cloud — the downsampling front end of point-based
//! networks.
//!
//!     cargo run --example fps_grouping

use mmpoint::clustering::{ball_query, fps, normalize_points};
use mmpoint::detection::{PointCloud, RadarPoint};
use rand::{Rng, SeedableRng};

fn main() -> mmpoint::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut points = Vec::new();
    for _ in 0..200 {
        let x = rng.gen_range(-15.0..15.0);
        let y = rng.gen_range(5.0..45.0);
        let v = rng.gen_range(-3.0..3.0);
        let r = (x * x + y * y as f64).sqrt();
        points.push(RadarPoint::from_polar(r, x.atan2(y), 0.0, v, 1.0, 0));
    }
    let cloud = PointCloud {
        points,
        frame_index: 0,
        frame_interval: 0.05,
    };

    let (rows, norm) = normalize_points(&cloud)?;
    println!("normalized {} points; per-column std {:?}", rows.len(), norm.std);

    let features: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let centers_idx = fps(&features, 16, 0)?;
    println!("FPS picked centers: {centers_idx:?}");

    let centers: Vec<Vec<f64>> = centers_idx.iter().map(|&i| features[i].clone()).collect();
    let groups = ball_query(&features, &centers, 0.8, 32)?;
    for (c, g) in centers_idx.iter().zip(&groups) {
        println!("  center {c:3}: {:3} neighbors within radius", g.len());
    }
    let smallest = groups.iter().map(|g| g.len()).min().unwrap();
    println!("smallest group: {smallest} (never empty by construction)");
    Ok(())
}
