//! Fits an amplitude scale and time offset to three measured 𝒟 values.

use pdc_entangle::dichroic::SplitterResponse;
use pdc_entangle::jointstate::{delay_sweep, fit_degradation, post_select};
use pdc_entangle::spectral::{build_jsa, FrequencyGrid, PdcModel};
use pdc_entangle::units::{FEMTOSECOND, NANOMETRE};
use pdc_entangle::Complex64;

fn main() -> pdc_entangle::Result<()> {
    let grid = FrequencyGrid::window(1535.2 * NANOMETRE, 40.0 * NANOMETRE, 256)?;
    let jsa = build_jsa(&PdcModel::default(), &grid)?;
    let amps = post_select(&jsa, &SplitterResponse::default())?;
    let sweep = delay_sweep(&amps, -400.0 * FEMTOSECOND, 400.0 * FEMTOSECOND, 1601)?;

    let obs = [
        (0.0, Complex64::new(0.243, 0.259)),
        (25.9 * FEMTOSECOND, Complex64::new(0.361, 0.132)),
        (-25.9 * FEMTOSECOND, Complex64::new(0.097, 0.242)),
    ];
    let fit = fit_degradation(&sweep, &obs)?;
    println!(
        "scale {:.4}  offset {:.2} fs  cost {:.3e}",
        fit.model.amplitude_scale(),
        fit.model.time_offset() / FEMTOSECOND,
        fit.cost
    );
    for ((t, d), r) in obs.iter().zip(&fit.residuals) {
        println!("{:>6.1} fs  measured {:.3}{:+.3}i  residual {:.3}{:+.3}i", t / FEMTOSECOND, d.re, d.im, r.re, r.im);
    }
    Ok(())
}
