//! Simulates one 36-projection run on a two-term state and reconstructs it.

use pdc_entangle::jointstate::density_matrix;
use pdc_entangle::metrics::fidelity;
use pdc_entangle::tomography::{
    linear_inversion, mle_reconstruct, sample_counts, subtract_accidentals, visibility, CountModel, Family,
    MleOptions,
};
use pdc_entangle::Complex64;

fn main() -> pdc_entangle::Result<()> {
    let truth = density_matrix(0.547, 0.453, Complex64::new(0.361, 0.132))?.with_background(0.0125)?;
    let model = CountModel {
        pair_rate: CountModel::calibrated_pair_rate(&truth, 4.0)?,
        ..CountModel::default()
    };
    let table = sample_counts(&model.expected_counts(&truth), &model, 1)?;
    let corrected = subtract_accidentals(&table);

    let lin = linear_inversion(&corrected)?;
    println!("linear inversion: min eigenvalue {:.4} (non-physical: {})", lin.min_eigenvalue, lin.nonphysical);
    let mle = mle_reconstruct(&corrected, None, &MleOptions::default())?;
    println!("mle: {} iterations, fidelity {:.4}", mle.iterations, fidelity(&truth, &mle.state)?);

    let raw = table.coincidences();
    for f in Family::ALL {
        println!("V_{} raw {:.3} corrected {:.3}", f.label(), visibility(&raw, f)?, visibility(&corrected, f)?);
    }
    Ok(())
}
