//! Two-qubit polarization density matrices in the ordered basis
//! HH, HV, VH, VV (path A first, index `2·a + b` with H = 0, V = 1).

use std::io::{BufRead, Write};

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

/// Basis labels in storage order.
pub const BASIS_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];

pub const HH: usize = 0;
pub const HV: usize = 1;
pub const VH: usize = 2;
pub const VV: usize = 3;

/// A Hermitian, unit-trace, positive-semidefinite 4×4 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Matrix4<Complex64>);

impl DensityMatrix {
    /// Validates `m` against the Hermiticity, trace and PSD tolerances.
    pub fn new(m: Matrix4<Complex64>) -> Result<Self> {
        let skew = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if skew > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("matrix is not Hermitian (max |ρ − ρ†| = {skew:e})")));
        }
        let trace = m.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {trace}, expected 1")));
        }
        let min = hermitian_eigenvalues(&m).iter().copied().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(m))
    }

    /// Symmetrises and trace-normalises an almost-valid matrix before
    /// validating it. Meant for outputs of PSD-by-construction algorithms.
    pub fn from_psd(m: Matrix4<Complex64>) -> Result<Self> {
        let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let trace = h.trace().re;
        if !(trace > 0.0) {
            return Err(Error::InvalidState(format!("trace {trace} is not positive")));
        }
        Self::new(h / Complex64::new(trace, 0.0))
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalised) state vector.
    pub fn pure(psi: &Vector4<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi = psi / Complex64::new(norm, 0.0);
        Self::from_psd(psi * psi.adjoint())
    }

    pub fn maximally_mixed() -> Self {
        Self(Matrix4::identity() * Complex64::new(0.25, 0.0))
    }

    /// ρ_A ⊗ ρ_B from two single-qubit density matrices.
    pub fn product(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Result<Self> {
        Self::from_psd(a.kronecker(b))
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix4<Complex64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    /// `(1 − 4b)·ρ + b·I`, a uniform diagonal background of weight `b` per
    /// basis state.
    pub fn with_background(&self, b: f64) -> Result<Self> {
        if !(0.0..=0.25).contains(&b) {
            return Err(Error::InvalidParameter(format!("background must lie in [0, 0.25], got {b}")));
        }
        let m = self.0 * Complex64::new(1.0 - 4.0 * b, 0.0) + Matrix4::identity() * Complex64::new(b, 0.0);
        Self::from_psd(m)
    }

    /// U ρ U†.
    pub fn transform(&self, u: &Matrix4<Complex64>) -> Result<Self> {
        Self::from_psd(u * self.0 * u.adjoint())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        hermitian_eigenvalues(&self.0)
    }

    /// Writes 16 `row col re im` lines.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for r in 0..4 {
            for c in 0..4 {
                let z = self.0[(r, c)];
                writeln!(out, "{r} {c} {:.16e} {:.16e}", z.re, z.im)?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut m = Matrix4::zeros();
        let mut seen = [[false; 4]; 4];
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = t.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(Error::format(n + 1, "expected `row col re im`"));
            }
            let index = |v: &str| -> Result<usize> {
                match v.parse::<usize>() {
                    Ok(i) if i < 4 => Ok(i),
                    _ => Err(Error::format(n + 1, format!("index `{v}` must be 0..3"))),
                }
            };
            let real = |v: &str| v.parse::<f64>().map_err(|e| Error::format(n + 1, format!("`{v}`: {e}")));
            let (r, c) = (index(cols[0])?, index(cols[1])?);
            if seen[r][c] {
                return Err(Error::format(n + 1, format!("element ({r}, {c}) given twice")));
            }
            seen[r][c] = true;
            m[(r, c)] = Complex64::new(real(cols[2])?, real(cols[3])?);
        }
        for (r, row) in seen.iter().enumerate() {
            for (c, &ok) in row.iter().enumerate() {
                if !ok {
                    return Err(Error::format(0, format!("element ({r}, {c}) missing")));
                }
            }
        }
        Self::new(m)
    }
}

pub(crate) fn hermitian_eigenvalues(m: &Matrix4<Complex64>) -> [f64; 4] {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: [f64; 4] = h.symmetric_eigenvalues().as_slice().try_into().expect("4 eigenvalues");
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Eigenvalues at or below this are treated as exact zeros by [`psd_factor`].
pub(crate) const RANK_CUTOFF: f64 = 1e-13;

/// `(V, d)` with `m ≈ V·diag(d)²·V†`, V unitary and d ≥ 0.
///
/// Eigenvalues down to −[`PSD_TOL`] are accepted; those at or below
/// [`RANK_CUTOFF`] get `d = 0` so that rounding noise in the null space does
/// not reappear as O(1e-8) square roots.
pub(crate) fn psd_factor(m: &Matrix4<Complex64>) -> Result<(Matrix4<Complex64>, Vector4<f64>)> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut d = Vector4::zeros();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l < -PSD_TOL {
            return Err(Error::InvalidState(format!("matrix has eigenvalue {l:e}")));
        }
        if l > RANK_CUTOFF {
            d[k] = l.sqrt();
        }
    }
    Ok((eig.eigenvectors, d))
}
