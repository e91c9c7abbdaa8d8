//! Sweeps 𝒟(τ) for the default source and splitter.

use pdc_entangle::dichroic::SplitterResponse;
use pdc_entangle::jointstate::{delay_sweep, post_select};
use pdc_entangle::spectral::{build_jsa, FrequencyGrid, PdcModel};
use pdc_entangle::units::{FEMTOSECOND, NANOMETRE};

fn main() -> pdc_entangle::Result<()> {
    let grid = FrequencyGrid::window(1535.2 * NANOMETRE, 40.0 * NANOMETRE, 256)?;
    let jsa = build_jsa(&PdcModel::default(), &grid)?;
    let amps = post_select(&jsa, &SplitterResponse::default())?;
    let sweep = delay_sweep(&amps, -200.0 * FEMTOSECOND, 200.0 * FEMTOSECOND, 41)?;
    println!("{:>8} {:>8} {:>8} {:>8}", "tau_fs", "|D|", "arg", "purity");
    for s in sweep.samples() {
        println!("{:>8.1} {:>8.4} {:>8.3} {:>8.4}", s.tau / FEMTOSECOND, s.d.norm(), s.phase, s.purity);
    }
    let p = sweep.peak();
    println!("peak |D| = {:.4} at {:.1} fs (alpha {:.4}, beta {:.4})", p.d.norm(), p.tau / FEMTOSECOND, p.alpha, p.beta);
    Ok(())
}
