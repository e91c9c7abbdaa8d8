//! Post-selected two-photon polarization state.
//!
//! After the splitter, path A holds the transmitted photon and path B the
//! reflected one. Keeping only one photon per path leaves two amplitudes:
//!
//! * `g(ω_s, ω_i) = f·√(T_H(ω_s)·R_V(ω_i))`, H signal in A and V idler in B,
//! * `h(ω_s, ω_i) = f·√(R_H(ω_s)·T_V(ω_i))`, V idler in A and H signal in B.
//!
//! Their weights α and β fill the HV and VH diagonal of ρ, and the frequency
//! trace
//!
//! ```text
//! 𝒟(τ) = (1/𝒩) Σ_jk exp(i(ω_s,j − ω_i,k)τ) · h(ω_i,k, ω_s,j) · conj(g(ω_s,j, ω_i,k)) · dω_s dω_i
//! ```
//!
//! is the HV/VH coherence. A positive τ delays the signal (H) photon.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Matrix4;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::density::{DensityMatrix, HV, VH};
use crate::dichroic::{sample_on_grid, SplitterResponse, TransmitSide};
use crate::error::{Error, Result};
use crate::spectral::{FrequencyGrid, JsaGrid};
use crate::units::FEMTOSECOND;

/// 𝒩 below this counts as no cross-path coincidences at all.
const DEGENERATE_NORM: f64 = 1e-14;

/// |𝒟| below this leaves the sweep phase undetermined; it is carried over
/// from the neighbouring sample instead.
const PHASE_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct PostSelectedAmplitudes {
    grid: FrequencyGrid,
    g: Vec<Complex64>,
    h: Vec<Complex64>,
    norm_constant: f64,
    neglected_fraction: Option<f64>,
}

impl PostSelectedAmplitudes {
    /// Builds amplitudes directly from `g` and `h` (signal-major).
    pub fn from_parts(grid: FrequencyGrid, g: Vec<Complex64>, h: Vec<Complex64>) -> Result<Self> {
        let (ns, ni) = grid.shape();
        if g.len() != ns * ni || h.len() != ns * ni {
            return Err(Error::InvalidParameter(format!(
                "amplitudes need {} entries, got g: {}, h: {}",
                ns * ni,
                g.len(),
                h.len()
            )));
        }
        let sg: f64 = g.iter().map(|z| z.norm_sqr()).sum();
        let sh: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        let norm_constant = (sg + sh) * grid.cell_area();
        if !(norm_constant > DEGENERATE_NORM) {
            return Err(Error::DegeneratePostSelection { norm: norm_constant });
        }
        Ok(Self {
            grid,
            g,
            h,
            norm_constant,
            neglected_fraction: None,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn g(&self) -> &[Complex64] {
        &self.g
    }

    pub fn h(&self) -> &[Complex64] {
        &self.h
    }

    /// 𝒩 = Σ(|g|² + |h|²)·dω_s·dω_i.
    pub fn norm_constant(&self) -> f64 {
        self.norm_constant
    }

    /// Norm fraction of the JSA in same-path (HH/VV) terms dropped by the
    /// post-selection. Known only when built by [`post_select`].
    pub fn neglected_fraction(&self) -> Option<f64> {
        self.neglected_fraction
    }
}

pub fn post_select(jsa: &JsaGrid, splitter: &SplitterResponse) -> Result<PostSelectedAmplitudes> {
    let grid = *jsa.grid();
    let s = sample_on_grid(splitter, &grid)?;
    let (ns, ni) = grid.shape();
    let mut g = Vec::with_capacity(ns * ni);
    let mut h = Vec::with_capacity(ns * ni);
    let mut same_path = 0.0;
    for j in 0..ns {
        for k in 0..ni {
            let f = jsa.at(j, k);
            g.push(f * (s.t_h[j] * s.r_v[k]).sqrt());
            h.push(f * (s.r_h[j] * s.t_v[k]).sqrt());
            same_path += f.norm_sqr() * (s.t_h[j] * s.t_v[k] + s.r_h[j] * s.r_v[k]);
        }
    }
    let mut amps = PostSelectedAmplitudes::from_parts(grid, g, h)?;
    amps.neglected_fraction = Some(same_path * grid.cell_area() / jsa.norm());
    Ok(amps)
}

/// `(α, β)` with α + β = 1.
pub fn diagonal_weights(amps: &PostSelectedAmplitudes) -> (f64, f64) {
    let sg: f64 = amps.g.iter().map(|z| z.norm_sqr()).sum();
    let sh: f64 = amps.h.iter().map(|z| z.norm_sqr()).sum();
    (sg / (sg + sh), sh / (sg + sh))
}

/// The τ-independent part of the 𝒟 trace, precomputed once per set of
/// amplitudes: `K_jk = h(ω_i,k, ω_s,j)·conj(g_jk)·dω_s·dω_i/𝒩`.
///
/// Evaluating 𝒟(τ) is then a phase-weighted double sum that factorises into
/// a matrix–vector product. Phases are taken relative to a reference
/// frequency inside the grid to keep their arguments small.
#[derive(Clone, Debug)]
pub struct ExchangeKernel {
    kernel: Vec<Complex64>,
    signal_offsets: Vec<f64>,
    idler_offsets: Vec<f64>,
}

impl ExchangeKernel {
    pub fn new(amps: &PostSelectedAmplitudes) -> Result<Self> {
        let grid = amps.grid;
        let (ns, ni) = grid.shape();
        let weight = grid.cell_area() / amps.norm_constant;
        let swapped = swapped_h(amps)?;
        let kernel = (0..ns * ni).map(|idx| swapped[idx] * amps.g[idx].conj() * weight).collect();
        let (ws, wi) = (grid.signal().values(), grid.idler().values());
        let reference = 0.5 * (ws[ns / 2] + wi[ni / 2]);
        Ok(Self {
            kernel,
            signal_offsets: ws.iter().map(|w| w - reference).collect(),
            idler_offsets: wi.iter().map(|w| w - reference).collect(),
        })
    }

    /// 𝒟(τ), τ in seconds.
    pub fn evaluate(&self, tau: f64) -> Complex64 {
        let ni = self.idler_offsets.len();
        let idler_phase: Vec<Complex64> = self.idler_offsets.iter().map(|w| Complex64::cis(-w * tau)).collect();
        self.signal_offsets
            .iter()
            .zip(self.kernel.chunks_exact(ni))
            .map(|(w, row)| {
                let inner: Complex64 = row.iter().zip(&idler_phase).map(|(k, p)| k * p).sum();
                Complex64::cis(w * tau) * inner
            })
            .sum()
    }
}

/// `h` evaluated at (signal = ω_i,k, idler = ω_s,j) for every grid point
/// (j, k). A transpose on symmetric grids, bilinear interpolation otherwise,
/// with zero outside the grid.
fn swapped_h(amps: &PostSelectedAmplitudes) -> Result<Vec<Complex64>> {
    let grid = amps.grid;
    let (ns, ni) = grid.shape();
    if grid.is_symmetric() {
        return Ok((0..ns)
            .flat_map(|j| (0..ni).map(move |k| (j, k)))
            .map(|(j, k)| amps.h[grid_index(&grid, k, j)])
            .collect());
    }
    let (sa, ia) = (*grid.signal(), *grid.idler());
    let mut out = Vec::with_capacity(ns * ni);
    let mut inside = 0usize;
    for j in 0..ns {
        let x = ia.fractional_index(sa.value(j));
        for k in 0..ni {
            let y = sa.fractional_index(ia.value(k));
            let value = match (y, x) {
                (Some(y), Some(x)) => {
                    inside += 1;
                    bilinear(&amps.h, ns, ni, y, x)
                }
                _ => Complex64::new(0.0, 0.0),
            };
            out.push(value);
        }
    }
    if inside == 0 {
        return Err(Error::InterpolationDomain(
            "signal and idler axes do not overlap, h(ω_i, ω_s) is undefined".into(),
        ));
    }
    Ok(out)
}

fn grid_index(grid: &FrequencyGrid, j: usize, k: usize) -> usize {
    j * grid.idler().len() + k
}

/// Bilinear interpolation of a signal-major table at fractional indices
/// (row `y`, column `x`).
fn bilinear(table: &[Complex64], rows: usize, cols: usize, y: f64, x: f64) -> Complex64 {
    let j0 = (y.floor() as usize).min(rows - 2);
    let k0 = (x.floor() as usize).min(cols - 2);
    let (ty, tx) = (y - j0 as f64, x - k0 as f64);
    let at = |j: usize, k: usize| table[j * cols + k];
    at(j0, k0) * ((1.0 - ty) * (1.0 - tx))
        + at(j0, k0 + 1) * ((1.0 - ty) * tx)
        + at(j0 + 1, k0) * (ty * (1.0 - tx))
        + at(j0 + 1, k0 + 1) * (ty * tx)
}

/// 𝒟(τ) for a single delay. Use [`ExchangeKernel`] for repeated delays.
pub fn d_parameter(amps: &PostSelectedAmplitudes, tau: f64) -> Result<Complex64> {
    Ok(ExchangeKernel::new(amps)?.evaluate(tau))
}

/// ρ with α, β on the HV/VH diagonal and 𝒟 = ⟨VH|ρ|HV⟩.
pub fn density_matrix(alpha: f64, beta: f64, d: Complex64) -> Result<DensityMatrix> {
    if !(alpha >= 0.0 && beta >= 0.0) || (alpha + beta - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "weights must be non-negative and sum to 1, got α = {alpha}, β = {beta}"
        )));
    }
    let (alpha, beta) = (alpha / (alpha + beta), beta / (alpha + beta));
    let bound = (alpha * beta).sqrt();
    let magnitude = d.norm();
    if magnitude > bound + 1e-9 {
        return Err(Error::NonphysicalCoherence { magnitude, bound });
    }
    // within tolerance of the bound: pull back onto it so ρ stays PSD
    let d = if magnitude > bound { d * (bound / magnitude) } else { d };
    let mut m = Matrix4::zeros();
    m[(HV, HV)] = Complex64::new(alpha, 0.0);
    m[(VH, VH)] = Complex64::new(beta, 0.0);
    m[(VH, HV)] = d;
    m[(HV, VH)] = d.conj();
    DensityMatrix::new(m)
}

/// α² + β² + 2|𝒟|², the purity of the two-term state.
pub fn two_term_purity(alpha: f64, beta: f64, d: Complex64) -> f64 {
    alpha * alpha + beta * beta + 2.0 * d.norm_sqr()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSample {
    /// Delay in seconds.
    pub tau: f64,
    pub d: Complex64,
    pub alpha: f64,
    pub beta: f64,
    pub purity: f64,
    /// arg 𝒟, unwrapped along the sweep.
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelaySweep {
    samples: Vec<SweepSample>,
}

impl DelaySweep {
    /// Assembles a sweep from `(τ, 𝒟)` pairs with strictly increasing τ.
    pub fn from_values(alpha: f64, beta: f64, values: &[(f64, Complex64)]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("sweep needs at least one delay".into()));
        }
        if values.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter("sweep delays must be strictly increasing".into()));
        }
        let d: Vec<Complex64> = values.iter().map(|v| v.1).collect();
        let phase = unwrapped_phase(&d);
        let samples = values
            .iter()
            .zip(phase)
            .map(|(&(tau, d), phase)| SweepSample {
                tau,
                d,
                alpha,
                beta,
                purity: two_term_purity(alpha, beta, d),
                phase,
            })
            .collect();
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[SweepSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample with the largest |𝒟|, which is also the purity maximum.
    pub fn peak(&self) -> &SweepSample {
        self.samples
            .iter()
            .max_by(|a, b| a.d.norm().total_cmp(&b.d.norm()))
            .expect("sweeps are never empty")
    }

    /// Linear interpolation of 𝒟 in the complex plane, `None` outside the
    /// sampled delay range.
    pub fn interpolate(&self, tau: f64) -> Option<Complex64> {
        let s = &self.samples;
        let (first, last) = (s[0].tau, s[s.len() - 1].tau);
        let slack = 1e-9 * (last - first).abs().max(FEMTOSECOND);
        if tau < first - slack || tau > last + slack {
            return None;
        }
        let k = s.partition_point(|x| x.tau <= tau);
        if k == 0 {
            return Some(s[0].d);
        }
        if k == s.len() {
            return Some(s[s.len() - 1].d);
        }
        let (a, b) = (&s[k - 1], &s[k]);
        if tau == a.tau {
            return Some(a.d);
        }
        let t = (tau - a.tau) / (b.tau - a.tau);
        Some(a.d + (b.d - a.d) * t)
    }

    /// Writes `tau_fs Re_D Im_D abs_D alpha beta purity phase_rad` rows
    /// under a commented header.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# tau_fs Re_D Im_D abs_D alpha beta purity phase_rad")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.6} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
                s.tau / FEMTOSECOND,
                s.d.re,
                s.d.im,
                s.d.norm(),
                s.alpha,
                s.beta,
                s.purity,
                s.phase
            )?;
        }
        Ok(())
    }
}

/// arg of each value, continued onto the nearest branch outward from the
/// largest-magnitude sample.
fn unwrapped_phase(values: &[Complex64]) -> Vec<f64> {
    let anchor = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut phase = vec![0.0; values.len()];
    if values.is_empty() {
        return phase;
    }
    phase[anchor] = values[anchor].arg();
    let step = |prev: f64, z: Complex64| -> f64 {
        if z.norm() <= PHASE_FLOOR {
            return prev;
        }
        let mut delta = z.arg() - prev;
        delta -= 2.0 * PI * (delta / (2.0 * PI)).round();
        prev + delta
    };
    for i in anchor + 1..values.len() {
        phase[i] = step(phase[i - 1], values[i]);
    }
    for i in (0..anchor).rev() {
        phase[i] = step(phase[i + 1], values[i]);
    }
    phase
}

/// `n` evenly spaced delays from `tau_min` to `tau_max`, both included.
pub fn delay_grid(tau_min: f64, tau_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(tau_min < tau_max) || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "sweep needs tau_min < tau_max and n >= 2, got [{tau_min}, {tau_max}], n = {n}"
        )));
    }
    let step = (tau_max - tau_min) / (n - 1) as f64;
    Ok((0..n)
        .map(|k| if k == n - 1 { tau_max } else { tau_min + k as f64 * step })
        .collect())
}

/// Evaluates 𝒟 on an evenly spaced delay grid, in parallel over τ.
pub fn delay_sweep(amps: &PostSelectedAmplitudes, tau_min: f64, tau_max: f64, n: usize) -> Result<DelaySweep> {
    sweep_at(amps, &delay_grid(tau_min, tau_max, n)?)
}

/// Evaluates 𝒟 at arbitrary strictly increasing delays.
pub fn sweep_at(amps: &PostSelectedAmplitudes, taus: &[f64]) -> Result<DelaySweep> {
    let kernel = ExchangeKernel::new(amps)?;
    let (alpha, beta) = diagonal_weights(amps);
    let values: Vec<(f64, Complex64)> = taus.par_iter().map(|&t| (t, kernel.evaluate(t))).collect();
    DelaySweep::from_values(alpha, beta, &values)
}

/// Empirical correction `𝒟_deg(τ) = scale·𝒟(τ − offset)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegradationModel {
    amplitude_scale: f64,
    time_offset: f64,
}

impl DegradationModel {
    pub fn new(amplitude_scale: f64, time_offset: f64) -> Result<Self> {
        if !(amplitude_scale > 0.0 && amplitude_scale <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude scale must lie in (0, 1], got {amplitude_scale}"
            )));
        }
        if !time_offset.is_finite() {
            return Err(Error::InvalidParameter(format!("time offset must be finite, got {time_offset}")));
        }
        Ok(Self {
            amplitude_scale,
            time_offset,
        })
    }

    pub fn identity() -> Self {
        Self {
            amplitude_scale: 1.0,
            time_offset: 0.0,
        }
    }

    pub fn amplitude_scale(&self) -> f64 {
        self.amplitude_scale
    }

    pub fn time_offset(&self) -> f64 {
        self.time_offset
    }

    /// Degraded 𝒟 at `tau`, `None` if `tau − offset` leaves the sweep.
    pub fn evaluate(&self, sweep: &DelaySweep, tau: f64) -> Option<Complex64> {
        sweep.interpolate(tau - self.time_offset).map(|d| d * self.amplitude_scale)
    }
}

/// A degraded sweep plus the number of samples whose shifted delay fell
/// outside the original sweep (their 𝒟 is set to zero).
#[derive(Clone, Debug)]
pub struct Degraded {
    pub sweep: DelaySweep,
    pub uncovered: usize,
}

impl Degraded {
    /// The shift moved every sample outside the computed window.
    pub fn coverage_lost(&self) -> bool {
        self.uncovered == self.sweep.len()
    }
}

pub fn apply_degradation(sweep: &DelaySweep, model: &DegradationModel) -> Result<Degraded> {
    let mut uncovered = 0;
    let values: Vec<(f64, Complex64)> = sweep
        .samples
        .iter()
        .map(|s| {
            let d = model.evaluate(sweep, s.tau).unwrap_or_else(|| {
                uncovered += 1;
                Complex64::new(0.0, 0.0)
            });
            (s.tau, d)
        })
        .collect();
    let first = &sweep.samples[0];
    Ok(Degraded {
        sweep: DelaySweep::from_values(first.alpha, first.beta, &values)?,
        uncovered,
    })
}

/// Offset grid spacing of the global scan.
pub const FIT_SCAN_STEP: f64 = 0.25 * FEMTOSECOND;

#[derive(Clone, Debug)]
pub struct DegradationFit {
    pub model: DegradationModel,
    /// `measured − model` per observation.
    pub residuals: Vec<Complex64>,
    /// Σ|residual|².
    pub cost: f64,
}

/// Least-squares fit of `(scale, offset)` to measured `(τ, 𝒟)` pairs.
///
/// The offset is scanned over every value that keeps all observation delays
/// inside the sweep; the scale has a closed form at each offset. The best
/// scan point is refined by golden-section search within one scan step.
pub fn fit_degradation(sweep: &DelaySweep, observations: &[(f64, Complex64)]) -> Result<DegradationFit> {
    if observations.len() < 2 {
        return Err(Error::Precondition(format!(
            "degradation fit needs at least 2 observations, got {}",
            observations.len()
        )));
    }
    if observations.iter().all(|o| o.1.norm() == 0.0) {
        return Err(Error::UnidentifiableFit("all observed 𝒟 values are zero".into()));
    }
    let s = sweep.samples();
    let (first, last) = (s[0].tau, s[s.len() - 1].tau);
    let tmin = observations.iter().map(|o| o.0).fold(f64::INFINITY, f64::min);
    let tmax = observations.iter().map(|o| o.0).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = (tmax - last, tmin - first);
    if lo > hi {
        return Err(Error::UnidentifiableFit(
            "observations span more delay than the sweep covers".into(),
        ));
    }

    let cost_at = |offset: f64| -> Option<(f64, f64)> {
        let model: Vec<Complex64> = observations
            .iter()
            .map(|o| sweep.interpolate(o.0 - offset))
            .collect::<Option<_>>()?;
        let mm: f64 = model.iter().map(|m| m.norm_sqr()).sum();
        if mm == 0.0 {
            return None;
        }
        let overlap: f64 = model.iter().zip(observations).map(|(m, o)| (m.conj() * o.1).re).sum();
        let scale = (overlap / mm).clamp(1e-12, 1.0);
        let cost = model.iter().zip(observations).map(|(m, o)| (o.1 - m * scale).norm_sqr()).sum();
        Some((cost, scale))
    };

    let steps = ((hi - lo) / FIT_SCAN_STEP).floor() as usize;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..=steps {
        let offset = if k == steps { hi } else { lo + k as f64 * FIT_SCAN_STEP };
        if let Some((c, _)) = cost_at(offset) {
            if best.is_none_or(|(bc, _)| c < bc) {
                best = Some((c, offset));
            }
        }
    }
    let (_, coarse) = best.ok_or_else(|| Error::UnidentifiableFit("model 𝒟 vanishes at every offset".into()))?;

    let (mut a, mut b) = ((coarse - FIT_SCAN_STEP).max(lo), (coarse + FIT_SCAN_STEP).min(hi));
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let eval = |x: f64| cost_at(x).map_or(f64::INFINITY, |c| c.0);
    let (mut x1, mut x2) = (b - golden * (b - a), a + golden * (b - a));
    let (mut f1, mut f2) = (eval(x1), eval(x2));
    while b - a > 1e-9 * FEMTOSECOND {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = eval(x2);
        }
    }
    let mut offset = 0.5 * (a + b);
    if eval(offset) > eval(coarse) {
        offset = coarse;
    }
    let (cost, scale) = cost_at(offset).expect("refined offset stays inside the scanned range");
    let model = DegradationModel::new(scale, offset)?;
    let residuals = observations
        .iter()
        .map(|o| o.1 - model.evaluate(sweep, o.0).expect("offset keeps observations covered"))
        .collect();
    Ok(DegradationFit { model, residuals, cost })
}

/// Finds the symmetric edge split δ (H edge at `center + δ`, V edge at
/// `center − δ`) for which post-selection gives `α = target_alpha`.
///
/// α grows monotonically as the H edge moves to shorter wavelengths, so the
/// root is bracketed on `[-max_split, max_split]` and found by bisection.
pub fn calibrate_edge_split(
    jsa: &JsaGrid,
    center: f64,
    step_width: f64,
    side: TransmitSide,
    target_alpha: f64,
    max_split: f64,
) -> Result<f64> {
    if !(0.0 < target_alpha && target_alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("target α must lie in (0, 1), got {target_alpha}")));
    }
    let alpha_at = |split: f64| -> Result<f64> {
        let resp = SplitterResponse::logistic(center + split, center - split, step_width, side);
        Ok(diagonal_weights(&post_select(jsa, &resp)?).0 - target_alpha)
    };
    let (mut a, mut b) = (-max_split, max_split);
    let (fa, fb) = (alpha_at(a)?, alpha_at(b)?);
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidParameter(format!(
            "target α = {target_alpha} not reachable with edge splits up to ±{max_split} m"
        )));
    }
    let rising = fb > fa;
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let fm = alpha_at(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == rising {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(0.5 * (a + b))
}
