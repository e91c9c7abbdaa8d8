//! Scalar figures of merit for two-qubit states and count tables.

use std::io::Write;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use crate::density::{psd_factor, DensityMatrix, HV, VH};
use crate::error::{Error, Result};
use crate::tomography::{Basis, CountTable};

/// Tr(ρ²).
pub fn purity(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    (m * m).trace().re
}

/// σ_y ⊗ σ_y.
fn spin_flip() -> Matrix4<Complex64> {
    let (o, i) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0));
    let sy = Matrix2::new(o, -i, i, o);
    sy.kronecker(&sy)
}

/// `W = V·diag(d)` with ρ = W W†.
fn factor(rho: &DensityMatrix) -> Result<Matrix4<Complex64>> {
    let (v, d) = psd_factor(rho.matrix())?;
    Ok(v * Matrix4::from_diagonal(&d.map(|x| Complex64::new(x, 0.0))))
}

/// Wootters concurrence `max(0, λ₁ − λ₂ − λ₃ − λ₄)`, λᵢ the square roots of
/// the eigenvalues of ρρ̃ with ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y).
///
/// With ρ = W W†, ρρ̃ is similar to B†B for `B = Wᵀ (σ_y⊗σ_y) W`, so the λᵢ
/// are the singular values of B.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    let w = factor(rho)?;
    let b = w.transpose() * spin_flip() * w;
    let mut lambda: Vec<f64> = b.singular_values().iter().copied().collect();
    lambda.sort_by(|a, b| b.total_cmp(a));
    Ok((lambda[0] - lambda[1] - lambda[2] - lambda[3]).max(0.0))
}

/// Uhlmann fidelity `Tr √(√a · b · √a)`, not squared.
///
/// Evaluated as the sum of singular values of `W_a† W_b`, which equals the
/// trace norm of √a·√b and is symmetric in its arguments.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    let m = factor(a)?.adjoint() * factor(b)?;
    Ok(m.singular_values().sum().min(1.0))
}

/// 𝒟 = ⟨VH|ρ|HV⟩ and its principal argument in (−π, π].
pub fn extract_d(rho: &DensityMatrix) -> (Complex64, f64) {
    let d = rho.get(VH, HV);
    let phase = d.arg();
    let phase = if phase <= -std::f64::consts::PI { std::f64::consts::PI } else { phase };
    (d, phase)
}

/// Coincidences-to-accidentals ratio: the larger of the (H, V) and (V, H)
/// records' coincidences over their estimated accidentals.
pub fn car(table: &CountTable) -> Result<f64> {
    [(Basis::H, Basis::V), (Basis::V, Basis::H)]
        .into_iter()
        .map(|(a, b)| table.record(a, b))
        .filter(|r| r.accidentals > 0.0)
        .map(|r| r.coincidences as f64 / r.accidentals)
        .reduce(f64::max)
        .ok_or_else(|| Error::Precondition("CAR needs a cross-polarized record with non-zero accidentals".into()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateMetrics {
    pub purity: f64,
    pub concurrence: f64,
    pub fidelity: Option<f64>,
    pub d: Complex64,
    pub phase: f64,
    pub car: Option<f64>,
}

impl StateMetrics {
    pub fn compute(
        rho: &DensityMatrix,
        reference: Option<&DensityMatrix>,
        table: Option<&CountTable>,
    ) -> Result<Self> {
        let (d, phase) = extract_d(rho);
        Ok(Self {
            purity: purity(rho),
            concurrence: concurrence(rho)?,
            fidelity: reference.map(|r| fidelity(r, rho)).transpose()?,
            d,
            phase,
            car: table.and_then(|t| car(t).ok()),
        })
    }

    /// `key value` lines; fidelity and CAR only when available.
    ///
    /// CAR is left out when the table has no accidentals to divide by.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "purity {:.10}", self.purity)?;
        writeln!(out, "concurrence {:.10}", self.concurrence)?;
        if let Some(f) = self.fidelity {
            writeln!(out, "fidelity {f:.10}")?;
        }
        writeln!(out, "re_D {:.10}", self.d.re)?;
        writeln!(out, "im_D {:.10}", self.d.im)?;
        writeln!(out, "abs_D {:.10}", self.d.norm())?;
        writeln!(out, "phase_rad {:.10}", self.phase)?;
        if let Some(c) = self.car {
            writeln!(out, "car {c:.10}")?;
        }
        Ok(())
    }
}
