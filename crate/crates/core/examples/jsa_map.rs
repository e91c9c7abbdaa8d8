//! Builds the default joint spectral amplitude, band-passes it and prints
//! where the norm went.

use pdc_entangle::spectral::{apply_bandpass, build_jsa, FrequencyGrid, PdcModel};
use pdc_entangle::units::{omega_to_wavelength, NANOMETRE};

fn main() -> pdc_entangle::Result<()> {
    let model = PdcModel::default();
    let grid = FrequencyGrid::window(1535.2 * NANOMETRE, 40.0 * NANOMETRE, 256)?;
    let jsa = build_jsa(&model, &grid)?;
    let (ws, wi) = jsa.argmax();
    println!(
        "peak at ({:.2} nm, {:.2} nm)",
        omega_to_wavelength(ws) / NANOMETRE,
        omega_to_wavelength(wi) / NANOMETRE
    );
    if let Some(c) = jsa.clipped_fraction() {
        println!("clipped by the window: {c:.3e}");
    }

    let filtered = apply_bandpass(&jsa, 1535.2 * NANOMETRE, 40.0 * NANOMETRE)?;
    println!("band-pass discards {:.3e}, norm after {:.12}", filtered.discarded_fraction, filtered.jsa.norm());

    // pump profile along ω_s + ω_i, lines above 1% of the peak
    let marginal = filtered.jsa.antidiagonal_marginal()?;
    let top = marginal.iter().map(|m| m.1).fold(0.0, f64::max);
    for (sum, w) in marginal.iter().filter(|m| m.1 > 0.01 * top).step_by(4) {
        let bar = "#".repeat((40.0 * w / top).round() as usize);
        println!("{:.5e} {bar}", sum);
    }
    Ok(())
}
