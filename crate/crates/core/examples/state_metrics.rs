//! Purity, concurrence and fidelity for a few textbook two-qubit states.

use pdc_entangle::jointstate::density_matrix;
use pdc_entangle::metrics::{concurrence, fidelity, purity};
use pdc_entangle::{Complex64, DensityMatrix};

fn main() -> pdc_entangle::Result<()> {
    let bell = density_matrix(0.5, 0.5, Complex64::new(0.5, 0.0))?;
    let states = [
        ("psi+", bell.clone()),
        ("psi+ with b = 0.05", bell.with_background(0.05)?),
        ("dephased", density_matrix(0.5, 0.5, Complex64::new(0.1, 0.1))?),
        ("unbalanced", density_matrix(0.8, 0.2, Complex64::new(0.0, 0.4))?),
        ("I/4", DensityMatrix::maximally_mixed()),
    ];
    println!("{:<20} {:>7} {:>7} {:>7}", "state", "P", "C", "F");
    for (name, rho) in &states {
        println!(
            "{name:<20} {:>7.4} {:>7.4} {:>7.4}",
            purity(rho),
            concurrence(rho)?,
            fidelity(&bell, rho)?
        );
    }
    Ok(())
}
