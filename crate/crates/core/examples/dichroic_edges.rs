//! Prints T_H and T_V of the default dichroic around its edge.

use pdc_entangle::dichroic::{edge_response, Polarization, SplitterResponse};
use pdc_entangle::units::{wavelength_to_omega, NANOMETRE};

fn main() -> pdc_entangle::Result<()> {
    let resp = SplitterResponse::default();
    println!("{:>9} {:>8} {:>8}", "nm", "T_H", "T_V");
    for k in -10..=10 {
        let lambda = (1535.2 + 1.5 * k as f64) * NANOMETRE;
        let om = wavelength_to_omega(lambda);
        let (th, _) = edge_response(&resp, om, Polarization::H)?;
        let (tv, _) = edge_response(&resp, om, Polarization::V)?;
        println!("{:>9.2} {th:>8.4} {tv:>8.4}", lambda / NANOMETRE);
    }
    Ok(())
}
