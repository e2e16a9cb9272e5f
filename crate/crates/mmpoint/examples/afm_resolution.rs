//! Angular resolution of the shipped 12x16 layout from its ambiguity
//! function, plus a radar-equation maximum-range estimate.
//!
//!     cargo run --example afm_resolution

use mmpoint::array::{
    build_virtual_array, compute_afm, angular_resolution, max_range, ArrayLayout, LinkBudget,
};

fn main() -> mmpoint::Result<()> {
    let layout = ArrayLayout::default_12x16();
    let array = build_virtual_array(&layout)?;
    println!(
        "{} TX x {} RX -> {} virtual elements",
        layout.tx.len(),
        layout.rx.len(),
        array.len()
    );

    let az_grid: Vec<f64> = (0..=2000).map(|i| (-10.0 + i as f64 * 0.01).to_radians()).collect();
    let el_grid: Vec<f64> = (0..=1200).map(|i| (-15.0 + i as f64 * 0.025).to_radians()).collect();
    let afm = compute_afm(&array, 0.0, 0.0, &az_grid, &el_grid)?;
    let (az_res, el_res) = angular_resolution(&afm)?;
    println!("azimuth   -3 dB width: {az_res:.3} deg");
    println!("elevation -3 dB width: {el_res:.3} deg");

    let budget = LinkBudget {
        pt: 1.0,
        g: 100.0,
        lambda: mmpoint::C / 77e9,
        sigma: 10.0,
        k_boltzmann: mmpoint::K_BOLTZMANN,
        b0: 10e6,
        t0: 290.0,
        f0: 10.0,
        snr_min: 10.0,
        l: 2.0,
    };
    println!("max range for a 10 m^2 target: {:.1} m", max_range(&budget)?);
    Ok(())
}
