//! Joint spectral amplitude of the down-converted pair on a discrete
//! signal × idler frequency grid.
//!
//! The analytic model is the usual low-gain product of a Gaussian pump
//! envelope in ω_s + ω_i and a sinc phase-matching function with first-order
//! (group-index) dispersion. Grids can also be imported from a text table so
//! measured or externally computed spectra go through the same pipeline.

use std::f64::consts::LN_2;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::{bandwidth_to_omega, omega_to_wavelength, wavelength_to_omega, NANOMETRE, SPEED_OF_LIGHT};

/// Minimum number of grid steps across the pump intensity FWHM.
pub const MIN_POINTS_ACROSS_PUMP: f64 = 8.0;

/// Default signal–idler group delay that a signal delay of this size
/// compensates (quartz-plate retardance).
pub const DEFAULT_INTRINSIC_DELAY: f64 = 25.9e-15;

/// Uniformly spaced frequency axis `start + k·step`, `k = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    start: f64,
    step: f64,
    len: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidParameter(format!("axis needs at least 2 points, got {len}")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!("axis step must be positive, got {step}")));
        }
        if !(start.is_finite() && start > 0.0) {
            return Err(Error::InvalidParameter(format!("axis must start at a positive frequency, got {start}")));
        }
        Ok(Self { start, step, len })
    }

    /// Cell-centred axis covering `[lo, hi]` with `len` cells.
    pub fn cell_centred(lo: f64, hi: f64, len: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidParameter(format!("empty frequency interval [{lo}, {hi}]")));
        }
        let step = (hi - lo) / len as f64;
        Self::new(lo + 0.5 * step, step, len)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.value(self.len - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.value(k)).collect()
    }

    /// Fractional index of `omega`, `None` outside `[first, last]`.
    pub fn fractional_index(&self, omega: f64) -> Option<f64> {
        let x = (omega - self.start) / self.step;
        let top = (self.len - 1) as f64;
        let slack = 1e-9;
        if x < -slack || x > top + slack {
            None
        } else {
            Some(x.clamp(0.0, top))
        }
    }
}

/// Signal × idler angular-frequency grid (rad/s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyGrid {
    signal: Axis,
    idler: Axis,
}

impl FrequencyGrid {
    pub fn new(signal: Axis, idler: Axis) -> Self {
        Self { signal, idler }
    }

    /// Square grid with identical, cell-centred axes spanning the wavelength
    /// window `center ± width/2`.
    pub fn window(center_wavelength: f64, width: f64, points: usize) -> Result<Self> {
        if !(center_wavelength > 0.0 && width > 0.0 && width < 2.0 * center_wavelength) {
            return Err(Error::InvalidParameter(format!(
                "invalid grid window: center {center_wavelength} m, width {width} m"
            )));
        }
        let lo = wavelength_to_omega(center_wavelength + width / 2.0);
        let hi = wavelength_to_omega(center_wavelength - width / 2.0);
        let axis = Axis::cell_centred(lo, hi, points)?;
        Ok(Self::new(axis, axis))
    }

    pub fn signal(&self) -> &Axis {
        &self.signal
    }

    pub fn idler(&self) -> &Axis {
        &self.idler
    }

    pub fn d_omega_s(&self) -> f64 {
        self.signal.step
    }

    pub fn d_omega_i(&self) -> f64 {
        self.idler.step
    }

    /// Area element of the Riemann sum.
    pub fn cell_area(&self) -> f64 {
        self.signal.step * self.idler.step
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.signal.len, self.idler.len)
    }

    /// Both axes identical, so swapping ω_s and ω_i maps grid points onto
    /// grid points.
    pub fn is_symmetric(&self) -> bool {
        self.signal == self.idler
    }

    pub(crate) fn index(&self, j: usize, k: usize) -> usize {
        j * self.idler.len + k
    }
}

/// Parameters of the analytic down-conversion model.
#[derive(Clone, Debug, PartialEq)]
pub struct PdcModel {
    pub pump_center_wavelength: f64,
    /// Intensity FWHM of the pump spectrum, in wavelength.
    pub pump_bandwidth_fwhm: f64,
    pub degeneracy_wavelength: f64,
    pub crystal_length: f64,
    pub group_index_signal: f64,
    pub group_index_idler: f64,
    pub group_index_pump: f64,
}

impl Default for PdcModel {
    fn default() -> Self {
        Self {
            pump_center_wavelength: 767.6 * NANOMETRE,
            pump_bandwidth_fwhm: 0.8 * NANOMETRE,
            degeneracy_wavelength: 1535.2 * NANOMETRE,
            crystal_length: 1.87e-3,
            group_index_signal: 3.30,
            group_index_idler: 3.30,
            group_index_pump: 3.32,
        }
        .with_intrinsic_delay(DEFAULT_INTRINSIC_DELAY)
    }
}

impl PdcModel {
    /// Sets the idler group index so that the crystal-average signal–idler
    /// group delay `(L/2)(n_g,i − n_g,s)/c` equals `delay`. A positive delay
    /// means the idler lags; delaying the signal by `delay` compensates it.
    pub fn with_intrinsic_delay(mut self, delay: f64) -> Self {
        self.group_index_idler = self.group_index_signal + 2.0 * SPEED_OF_LIGHT * delay / self.crystal_length;
        self
    }

    pub fn intrinsic_delay(&self) -> f64 {
        self.crystal_length * (self.group_index_idler - self.group_index_signal) / (2.0 * SPEED_OF_LIGHT)
    }

    pub fn pump_center_omega(&self) -> f64 {
        wavelength_to_omega(self.pump_center_wavelength)
    }

    pub fn degeneracy_omega(&self) -> f64 {
        wavelength_to_omega(self.degeneracy_wavelength)
    }

    /// Pump intensity FWHM in rad/s.
    pub fn pump_bandwidth_omega(&self) -> f64 {
        bandwidth_to_omega(self.pump_center_wavelength, self.pump_bandwidth_fwhm)
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("pump_center_wavelength", self.pump_center_wavelength),
            ("pump_bandwidth_fwhm", self.pump_bandwidth_fwhm),
            ("degeneracy_wavelength", self.degeneracy_wavelength),
            ("crystal_length", self.crystal_length),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        let indices = [
            ("group_index_signal", self.group_index_signal),
            ("group_index_idler", self.group_index_idler),
            ("group_index_pump", self.group_index_pump),
        ];
        for (name, v) in indices {
            if !(v.is_finite() && v >= 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 1, got {v}")));
            }
        }
        Ok(())
    }

    /// Phase mismatch Δk (rad/m) from the group-index expansion around
    /// degeneracy.
    pub fn phase_mismatch(&self, omega_s: f64, omega_i: f64) -> f64 {
        let wp0 = self.pump_center_omega();
        let wdeg = self.degeneracy_omega();
        (self.group_index_pump * (omega_s + omega_i - wp0)
            - self.group_index_signal * (omega_s - wdeg)
            - self.group_index_idler * (omega_i - wdeg))
            / SPEED_OF_LIGHT
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Gaussian pump amplitude with unit peak at ω_p0. Its squared magnitude has
/// the configured intensity FWHM.
pub fn pump_envelope(model: &PdcModel, omega_sum: f64) -> Result<Complex64> {
    if !(omega_sum > 0.0) {
        return Err(Error::Domain(format!("pump frequency must be positive, got {omega_sum}")));
    }
    let detuning = omega_sum - model.pump_center_omega();
    let fwhm = model.pump_bandwidth_omega();
    Ok(Complex64::new((-2.0 * LN_2 * detuning * detuning / (fwhm * fwhm)).exp(), 0.0))
}

/// `sinc(ΔkL/2)·exp(iΔkL/2)`.
pub fn phase_matching(model: &PdcModel, omega_s: f64, omega_i: f64) -> Result<Complex64> {
    if !(omega_s > 0.0 && omega_i > 0.0) {
        return Err(Error::Domain(format!(
            "phase matching needs positive frequencies, got ({omega_s}, {omega_i})"
        )));
    }
    let half = model.phase_mismatch(omega_s, omega_i) * model.crystal_length / 2.0;
    let s = sinc(half);
    Ok(Complex64::new(s * half.cos(), s * half.sin()))
}

/// Normalised joint spectral amplitude on a grid: `Σ|f|²·dω_s·dω_i = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct JsaGrid {
    grid: FrequencyGrid,
    amplitude: Vec<Complex64>,
    clipped_fraction: Option<f64>,
}

impl JsaGrid {
    /// Wraps raw amplitudes (signal-major). They are rescaled only when their
    /// norm is off by more than 1e-12, so already-normalised data stays
    /// bit-identical.
    pub fn new(grid: FrequencyGrid, amplitude: Vec<Complex64>) -> Result<Self> {
        let (ns, ni) = grid.shape();
        if amplitude.len() != ns * ni {
            return Err(Error::InvalidParameter(format!(
                "amplitude has {} entries, grid needs {}",
                amplitude.len(),
                ns * ni
            )));
        }
        if amplitude.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::InvalidParameter("amplitude contains non-finite values".into()));
        }
        let mut jsa = Self {
            grid,
            amplitude,
            clipped_fraction: None,
        };
        let norm = jsa.norm();
        if norm <= 0.0 {
            return Err(Error::EmptySupport);
        }
        if (norm - 1.0).abs() > 1e-12 {
            let scale = 1.0 / norm.sqrt();
            jsa.amplitude.iter_mut().for_each(|a| *a *= scale);
        }
        Ok(jsa)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    pub fn at(&self, j: usize, k: usize) -> Complex64 {
        self.amplitude[self.grid.index(j, k)]
    }

    /// Riemann-sum norm `Σ|f|²·dω_s·dω_i`.
    pub fn norm(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    /// Estimated fraction of the analytic JSA norm lying outside the grid,
    /// if this grid came from [`build_jsa`].
    pub fn clipped_fraction(&self) -> Option<f64> {
        self.clipped_fraction
    }

    /// Grid point with the largest |f|, as (ω_s, ω_i).
    pub fn argmax(&self) -> (f64, f64) {
        let (best, _) = self
            .amplitude
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, a)| {
                let v = a.norm_sqr();
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        let ni = self.grid.idler.len;
        (self.grid.signal.value(best / ni), self.grid.idler.value(best % ni))
    }

    /// Mean |f|² along each anti-diagonal line ω_s + ω_i = const, as
    /// `(ω_s + ω_i, mean)` pairs. Needs equal axis steps so the lines pass
    /// through grid points.
    pub fn antidiagonal_marginal(&self) -> Result<Vec<(f64, f64)>> {
        let (s, i) = (self.grid.signal, self.grid.idler);
        if ((s.step - i.step) / s.step).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "anti-diagonal marginal needs equal signal and idler steps".into(),
            ));
        }
        let lines = s.len + i.len - 1;
        let mut sum = vec![0.0; lines];
        let mut count = vec![0usize; lines];
        for j in 0..s.len {
            for k in 0..i.len {
                sum[j + k] += self.at(j, k).norm_sqr();
                count[j + k] += 1;
            }
        }
        Ok((0..lines)
            .map(|m| (s.start + i.start + m as f64 * s.step, sum[m] / count[m] as f64))
            .collect())
    }
}

/// Evaluates pump envelope × phase matching on the grid and normalises.
pub fn build_jsa(model: &PdcModel, grid: &FrequencyGrid) -> Result<JsaGrid> {
    model.validate()?;
    let points = model.pump_bandwidth_omega() / grid.d_omega_s().max(grid.d_omega_i());
    if points < MIN_POINTS_ACROSS_PUMP {
        return Err(Error::Resolution { points });
    }
    let amplitude = evaluate(model, grid)?;
    let mut jsa = JsaGrid::new(*grid, amplitude)?;
    jsa.clipped_fraction = Some(clipped_fraction(model, grid)?);
    Ok(jsa)
}

fn evaluate(model: &PdcModel, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
    let (ns, ni) = grid.shape();
    let mut out = Vec::with_capacity(ns * ni);
    for j in 0..ns {
        let ws = grid.signal.value(j);
        for k in 0..ni {
            let wi = grid.idler.value(k);
            out.push(pump_envelope(model, ws + wi)? * phase_matching(model, ws, wi)?);
        }
    }
    Ok(out)
}

/// Norm fraction outside `grid`, relative to a window three times wider per
/// axis sampled with the same number of points.
fn clipped_fraction(model: &PdcModel, grid: &FrequencyGrid) -> Result<f64> {
    let widen = |a: &Axis| -> Result<(Axis, f64, f64)> {
        let lo = a.start - 0.5 * a.step;
        let hi = a.last() + 0.5 * a.step;
        let span = hi - lo;
        let wide_lo = (lo - span).max(0.5 * lo);
        Ok((Axis::cell_centred(wide_lo, hi + span, a.len)?, lo, hi))
    };
    let (ws, s_lo, s_hi) = widen(&grid.signal)?;
    let (wi, i_lo, i_hi) = widen(&grid.idler)?;
    let (mut inside, mut total) = (0.0, 0.0);
    for j in 0..ws.len {
        let a = ws.value(j);
        for k in 0..wi.len {
            let b = wi.value(k);
            let p = (pump_envelope(model, a + b)? * phase_matching(model, a, b)?).norm_sqr();
            total += p;
            if (s_lo..=s_hi).contains(&a) && (i_lo..=i_hi).contains(&b) {
                inside += p;
            }
        }
    }
    Ok(if total > 0.0 { (1.0 - inside / total).max(0.0) } else { 0.0 })
}

/// Result of a band-pass: the renormalised JSA and the norm fraction removed.
#[derive(Clone, Debug)]
pub struct Bandpassed {
    pub jsa: JsaGrid,
    pub discarded_fraction: f64,
}

/// Ideal top-hat band-pass `center ± width/2` (wavelength) applied to both
/// axes, then renormalised.
pub fn apply_bandpass(jsa: &JsaGrid, center_wavelength: f64, width: f64) -> Result<Bandpassed> {
    if !(width > 0.0 && center_wavelength > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "band-pass needs positive center and width, got {center_wavelength}, {width}"
        )));
    }
    let lo = (center_wavelength - width / 2.0) * (1.0 - 1e-12);
    let hi = (center_wavelength + width / 2.0) * (1.0 + 1e-12);
    let pass = |axis: &Axis| -> Vec<bool> {
        axis.values()
            .into_iter()
            .map(|w| (lo..=hi).contains(&omega_to_wavelength(w)))
            .collect()
    };
    let grid = jsa.grid;
    let (ps, pi) = (pass(&grid.signal), pass(&grid.idler));
    let mut kept = jsa.amplitude.clone();
    let mut removed = 0.0;
    for j in 0..grid.signal.len {
        for k in 0..grid.idler.len {
            if !(ps[j] && pi[k]) {
                let a = &mut kept[grid.index(j, k)];
                removed += a.norm_sqr();
                *a = Complex64::new(0.0, 0.0);
            }
        }
    }
    let total: f64 = jsa.amplitude.iter().map(|a| a.norm_sqr()).sum();
    if removed >= total || !ps.iter().any(|&p| p) || !pi.iter().any(|&p| p) {
        return Err(Error::EmptySupport);
    }
    let discarded_fraction = removed / total;
    let mut out = JsaGrid::new(grid, kept)?;
    out.clipped_fraction = jsa.clipped_fraction;
    Ok(Bandpassed {
        jsa: out,
        discarded_fraction,
    })
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the JSA table: a `# n_s n_i ω_s,min dω_s ω_i,min dω_i` header and
/// then one `re im` row per grid point, signal-major.
pub fn write_jsa<W: Write>(mut out: W, jsa: &JsaGrid) -> Result<()> {
    let (s, i) = (jsa.grid.signal, jsa.grid.idler);
    writeln!(
        out,
        "# {} {} {} {} {} {}",
        s.len,
        i.len,
        fmt_f64(s.start),
        fmt_f64(s.step),
        fmt_f64(i.start),
        fmt_f64(i.step)
    )?;
    for a in &jsa.amplitude {
        writeln!(out, "{} {}", fmt_f64(a.re), fmt_f64(a.im))?;
    }
    Ok(())
}

pub fn read_jsa<R: BufRead>(input: R) -> Result<JsaGrid> {
    let mut lines = input.lines().enumerate();
    let (header_no, header) = loop {
        match lines.next() {
            Some((n, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break (n + 1, line);
                }
            }
            None => return Err(Error::format(0, "empty JSA file")),
        }
    };
    let fields: Vec<&str> = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::format(header_no, "JSA header must start with `#`"))?
        .split_whitespace()
        .collect();
    if fields.len() != 6 {
        return Err(Error::format(
            header_no,
            "JSA header needs `# n_s n_i omega_s_min omega_s_step omega_i_min omega_i_step`",
        ));
    }
    let count = |t: &str| t.parse::<usize>().map_err(|e| Error::format(header_no, format!("`{t}`: {e}")));
    let real = |t: &str| t.parse::<f64>().map_err(|e| Error::format(header_no, format!("`{t}`: {e}")));
    let signal = Axis::new(real(fields[2])?, real(fields[3])?, count(fields[0])?)
        .map_err(|e| Error::format(header_no, e.to_string()))?;
    let idler = Axis::new(real(fields[4])?, real(fields[5])?, count(fields[1])?)
        .map_err(|e| Error::format(header_no, e.to_string()))?;
    let grid = FrequencyGrid::new(signal, idler);
    let expected = signal.len * idler.len;
    let mut amplitude = Vec::with_capacity(expected);
    for (n, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut parts = t.split_whitespace();
        let (Some(re), Some(im), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::format(n + 1, "expected `re im`"));
        };
        let parse = |v: &str| v.parse::<f64>().map_err(|e| Error::format(n + 1, format!("`{v}`: {e}")));
        amplitude.push(Complex64::new(parse(re)?, parse(im)?));
    }
    if amplitude.len() != expected {
        return Err(Error::format(
            0,
            format!("JSA table has {} rows, header promises {expected}", amplitude.len()),
        ));
    }
    JsaGrid::new(grid, amplitude)
}
