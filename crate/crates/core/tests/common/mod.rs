//! Random instances and independent reference implementations shared by the
//! integration suites.
#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix4, Vector4};
use pdc_entangle::dichroic::{SplitterResponse, TransmitSide};
use pdc_entangle::jointstate::{post_select, PostSelectedAmplitudes};
use pdc_entangle::spectral::{Axis, FrequencyGrid, JsaGrid};
use pdc_entangle::units::omega_to_wavelength;
use pdc_entangle::{Complex64, DensityMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn gaussian_complex<R: Rng>(rng: &mut R) -> Complex64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Density matrix `G G†/Tr` from a 4 × rank complex Ginibre matrix.
pub fn random_state<R: Rng>(rng: &mut R, rank: usize) -> DensityMatrix {
    let mut m = Matrix4::zeros();
    for _ in 0..rank {
        let v = Vector4::from_fn(|_, _| gaussian_complex(rng));
        m += v * v.adjoint();
    }
    DensityMatrix::from_psd(m).unwrap()
}

pub fn random_qubit<R: Rng>(rng: &mut R) -> Matrix2<Complex64> {
    let mut m = Matrix2::zeros();
    for _ in 0..rng.random_range(1..=2) {
        let v = nalgebra::Vector2::from_fn(|_, _| gaussian_complex(rng));
        m += v * v.adjoint();
    }
    m / m.trace()
}

/// Haar-distributed 4×4 unitary from the QR factor of a Ginibre matrix,
/// with the phases of R's diagonal divided out.
pub fn random_unitary<R: Rng>(rng: &mut R) -> Matrix4<Complex64> {
    let g = Matrix4::from_fn(|_, _| gaussian_complex(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = Matrix4::from_diagonal(&Vector4::from_fn(|i, _| {
        let d = r[(i, i)];
        if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) }
    }));
    q * phases
}

/// Symmetric grid of `n` points with random near-infrared placement.
pub fn random_grid<R: Rng>(rng: &mut R, n: usize) -> FrequencyGrid {
    let start = rng.random_range(1.1e15..1.3e15);
    let step = rng.random_range(2e11..2e12);
    let axis = Axis::new(start, step, n).unwrap();
    FrequencyGrid::new(axis, axis)
}

pub fn random_jsa<R: Rng>(rng: &mut R, grid: FrequencyGrid) -> JsaGrid {
    let (ns, ni) = grid.shape();
    let amp = (0..ns * ni).map(|_| gaussian_complex(rng)).collect();
    JsaGrid::new(grid, amp).unwrap()
}

/// Logistic splitter with both edges inside the grid's wavelength range, or
/// occasionally a constant splitter.
pub fn random_splitter<R: Rng>(rng: &mut R, grid: &FrequencyGrid) -> SplitterResponse {
    if rng.random_bool(0.1) {
        return SplitterResponse::constant(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
    }
    let lo = omega_to_wavelength(grid.signal().last());
    let hi = omega_to_wavelength(grid.signal().start());
    let span = hi - lo;
    let side = if rng.random_bool(0.5) {
        TransmitSide::LongWavelengths
    } else {
        TransmitSide::ShortWavelengths
    };
    SplitterResponse::logistic(
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
        rng.random_range(0.05 * span..2.0 * span),
        side,
    )
}

pub fn random_amplitudes<R: Rng>(rng: &mut R, n: usize) -> PostSelectedAmplitudes {
    let grid = random_grid(rng, n);
    let jsa = random_jsa(rng, grid);
    let splitter = random_splitter(rng, &grid);
    post_select(&jsa, &splitter).unwrap()
}

/// α, β and 𝒟(τ) by a literal sum over all pairs of discrete modes.
///
/// The g term puts the signal (frequency ω′) in path A and the idler (ω″)
/// in B; the h term puts the idler (ω‴) in A and the signal (ω⁗) in B. The
/// partial trace over frequency keeps pairs whose path-A and path-B
/// frequencies coincide, and the signal delay contributes exp(−iω_s τ) to
/// each term.
pub fn brute_force(amps: &PostSelectedAmplitudes, tau: f64) -> (f64, f64, Complex64) {
    let grid = amps.grid();
    let (ns, ni) = grid.shape();
    let ws: Vec<f64> = (0..ns).map(|j| grid.signal().value(j)).collect();
    let wi: Vec<f64> = (0..ni).map(|k| grid.idler().value(k)).collect();
    let area = grid.d_omega_s() * grid.d_omega_i();
    let (g, h) = (amps.g(), amps.h());
    let mut sg = 0.0;
    let mut sh = 0.0;
    for idx in 0..ns * ni {
        sg += g[idx].norm_sqr() * area;
        sh += h[idx].norm_sqr() * area;
    }
    let norm = sg + sh;
    let mut d = c(0.0, 0.0);
    for j in 0..ns {
        for k in 0..ni {
            for jp in 0..ns {
                for kp in 0..ni {
                    // path A: signal ω_s,j (g) vs idler ω_i,kp (h)
                    // path B: idler ω_i,k (g) vs signal ω_s,jp (h)
                    if ws[j] != wi[kp] || wi[k] != ws[jp] {
                        continue;
                    }
                    let g_term = g[j * ni + k] * Complex64::cis(-ws[j] * tau);
                    let h_term = h[jp * ni + kp] * Complex64::cis(-ws[jp] * tau);
                    d += h_term * g_term.conj() * area;
                }
            }
        }
    }
    (sg / norm, sh / norm, d / norm)
}

/// Wootters concurrence from the eigenvalues of the non-Hermitian ρρ̃,
/// read off the diagonal of its complex Schur form.
pub fn concurrence_oracle(rho: &Matrix4<Complex64>) -> f64 {
    let (o, i) = (c(0.0, 0.0), c(0.0, 1.0));
    let sy = Matrix2::new(o, -i, i, o);
    let yy = sy.kronecker(&sy);
    let tilde = yy * rho.conjugate() * yy;
    let prod = rho * tilde;
    let t = prod.schur().unpack().1;
    let mut l: Vec<f64> = (0..4).map(|k| t[(k, k)].re.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

/// Two-term state built entry by entry.
pub fn two_term_matrix(alpha: f64, beta: f64, d: Complex64) -> Matrix4<Complex64> {
    let mut m = Matrix4::zeros();
    m[(1, 1)] = c(alpha, 0.0);
    m[(2, 2)] = c(beta, 0.0);
    m[(2, 1)] = d;
    m[(1, 2)] = d.conj();
    m
}

pub fn assert_physical(rho: &DensityMatrix) {
    let m = rho.matrix();
    assert!((m - m.adjoint()).norm() <= 1e-12 * 4.0);
    assert!((m.trace().re - 1.0).abs() < 1e-12 && m.trace().im.abs() < 1e-12);
    assert!(rho.eigenvalues()[0] >= -1e-10);
}
