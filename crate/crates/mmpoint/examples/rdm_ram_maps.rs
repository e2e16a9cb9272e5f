//! Compute range-Doppler and range-azimuth maps for a static two-target
//! scene and export them as 16-bit PGM images with JSON sidecars.
//!
//!     cargo run --example rdm_ram_maps [out_dir]

use std::path::PathBuf;

use mmpoint::array::{build_virtual_array, ArrayLayout};
use mmpoint::echo::{synthesize_echo, RadarParams};
use mmpoint::imaging::{compute_ram, compute_rdm, polar_to_cartesian, RamMode, Window};
use mmpoint::io::write_scalar_map;
use mmpoint::scene::{Label, Scatterer};

fn main() -> mmpoint::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "maps_out".into()).into();
    std::fs::create_dir_all(&out)?;

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
            position: [20.0f64.to_radians().sin() * 25.0, 20.0f64.to_radians().cos() * 25.0, 0.0],
            velocity: [0.0; 3],
            rcs: 10.0,
            label: Label::Car,
        },
        Scatterer {
            position: [-8.0, 35.0, 0.0],
            velocity: [0.0, -2.0, 0.0],
            rcs: 10.0,
            label: Label::Car,
        },
    ];
    let cube = synthesize_echo(&scene, &params, &array, 1e-5, 11)?;

    let rdm = compute_rdm(&cube, Window::Hann)?;
    let power = rdm.power();
    let db = power.mapv(|p| 10.0 * (p + 1e-30).log10());
    write_scalar_map(
        &out.join("rdm.pgm"),
        &db,
        &rdm.velocity_axis,
        &rdm.range_axis,
        "velocity_mps",
        "range_m",
    )?;

    let ram = compute_ram(&cube, RamMode::ZeroDopplerSlice, 256)?;
    write_scalar_map(
        &out.join("ram.pgm"),
        &ram.values,
        &ram.az_axis,
        &ram.range_axis,
        "azimuth_rad",
        "range_m",
    )?;

    let cart = polar_to_cartesian(&ram, 0.25)?;
    write_scalar_map(
        &out.join("ram_cartesian.pgm"),
        &cart.values,
        &cart.x_axis,
        &cart.y_axis,
        "x_m",
        "y_m",
    )?;

    println!("wrote rdm.pgm, ram.pgm, ram_cartesian.pgm to {}", out.display());
    println!(
        "range axis: 0..{:.1} m in {} bins; velocity axis: {:.2}..{:.2} m/s",
        rdm.range_axis.last().unwrap(),
        rdm.range_axis.len(),
        rdm.velocity_axis.first().unwrap(),
        rdm.velocity_axis.last().unwrap()
    );
    Ok(())
}
