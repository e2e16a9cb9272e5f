//! Simulate a three-target scene and print the detected 4D point cloud.
//!
//!     cargo run --example point_cloud

use mmpoint::array::{build_virtual_array, ArrayLayout};
use mmpoint::detection::{generate_point_cloud, DetectionConfig};
use mmpoint::echo::{synthesize_echo, RadarParams};
use mmpoint::scene::{Label, Scatterer};

fn main() -> mmpoint::Result<()> {
    let params = RadarParams {
        fc: 77e9,
        kr: 30e12,
        tp: 25.6e-6,
        fs: 10e6,
        n_samples: 256,
        n_chirps: 32,
        rvp: false,
    };
    let array = build_virtual_array(&ArrayLayout::default_12x16())?;

    let scene = [
        Scatterer {
            position: [2.0, 30.0, 0.0],
            velocity: [0.0, -1.5, 0.0], // approaching car
            rcs: 10.0,
            label: Label::Car,
        },
        Scatterer {
            position: [-3.0, 15.0, 0.0],
            velocity: [0.0, 1.0, 0.0], // receding pedestrian
            rcs: 1.0,
            label: Label::Pedestrian,
        },
        Scatterer {
            position: [-6.0, 20.0, 0.0],
            velocity: [0.0, 0.0, 0.0], // stationary pole
            rcs: 5.0,
            label: Label::Roadside,
        },
    ];

    let cube = synthesize_echo(&scene, &params, &array, 1e-5, 7)?;
    let cloud = generate_point_cloud(&cube, &DetectionConfig::default())?;

    println!(
        "{} channels, {} chirps, {} samples -> {} points",
        array.len(),
        params.n_chirps,
        params.n_samples,
        cloud.points.len()
    );
    println!(
        "{:>8} {:>8} {:>8} {:>8} {:>10} | {:>8} {:>8} {:>8}",
        "r (m)", "az (deg)", "el (deg)", "v (m/s)", "intensity", "x", "y", "z"
    );
    for p in &cloud.points {
        println!(
            "{:8.2} {:8.2} {:8.2} {:8.2} {:10.3} | {:8.2} {:8.2} {:8.2}",
            p.range,
            p.azimuth.to_degrees(),
            p.elevation.to_degrees(),
            p.v_radial,
            p.intensity,
            p.x,
            p.y,
            p.z
        );
    }
    Ok(())
}
