//! End-to-end commands behind the CLI. Each takes a validated
//! [`RunConfig`], writes its tables into the output directory and returns a
//! short report.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::config::{JsaSource, RunConfig};
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::jointstate::{
    apply_degradation, delay_sweep, density_matrix, diagonal_weights, fit_degradation, post_select, sweep_at,
    DegradationModel, ExchangeKernel, PostSelectedAmplitudes,
};
use crate::metrics::StateMetrics;
use crate::spectral::{apply_bandpass, build_jsa, read_jsa, write_jsa, FrequencyGrid, JsaGrid};
use crate::tomography::{
    mle_reconstruct, sample_counts, subtract_accidentals, visibility, CountModel, CountTable, Family, MleOptions,
    DEFAULT_PEAK_COINCIDENCE_RATE,
};
use crate::units::{omega_to_wavelength, FEMTOSECOND, NANOMETRE};

/// Command-line values that take precedence over the configuration file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub delays: Option<Vec<f64>>,
    pub degradation: Option<DegradationModel>,
    pub background: Option<f64>,
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = &o.delays {
            self.delays = Some(v.clone());
        }
        if let Some(v) = o.degradation {
            self.degradation = Some(v);
        }
        if let Some(v) = o.background {
            self.background = v;
        }
        self.validate()
    }
}

/// Files written and human-readable summary lines.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::from(e).in_file(path))
}

fn create(cfg: &RunConfig, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::from(e).in_file(&cfg.out_dir))?;
    let path = cfg.out_dir.join(name);
    let file = File::create(&path).map_err(|e| Error::from(e).in_file(&path))?;
    Ok((path, BufWriter::new(file)))
}

fn write_file(cfg: &RunConfig, report: &mut Report, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let (path, mut out) = create(cfg, name)?;
    body(&mut out).map_err(|e| e.in_file(&path))?;
    out.flush().map_err(|e| Error::from(e).in_file(&path))?;
    report.files.push(path);
    Ok(())
}

/// The JSA the run works on and, for model JSAs, the band-pass loss.
pub struct Spectrum {
    pub jsa: JsaGrid,
    pub discarded_fraction: Option<f64>,
}

/// Model JSA on the configured window after the band-pass, or the imported
/// grid unchanged.
pub fn spectrum(cfg: &RunConfig) -> Result<Spectrum> {
    match &cfg.jsa_source {
        JsaSource::File(path) => Ok(Spectrum {
            jsa: read_jsa(open(path)?).map_err(|e| e.in_file(path))?,
            discarded_fraction: None,
        }),
        JsaSource::Model => {
            let grid = FrequencyGrid::window(cfg.grid_center, cfg.grid_span, cfg.grid_points)?;
            let raw = build_jsa(&cfg.model, &grid)?;
            let filtered = apply_bandpass(&raw, cfg.bandpass_center, cfg.bandpass_width)?;
            Ok(Spectrum {
                jsa: filtered.jsa,
                discarded_fraction: Some(filtered.discarded_fraction),
            })
        }
    }
}

pub fn amplitudes(cfg: &RunConfig) -> Result<PostSelectedAmplitudes> {
    post_select(&spectrum(cfg)?.jsa, &cfg.splitter)
}

/// Model state at `delay`: the two-term ρ, optionally degraded, mixed with
/// the configured background.
pub fn model_state(
    cfg: &RunConfig,
    kernel: &ExchangeKernel,
    weights: (f64, f64),
    delay: f64,
    degradation: Option<&DegradationModel>,
) -> Result<DensityMatrix> {
    let d = match degradation {
        Some(m) => kernel.evaluate(delay - m.time_offset()) * m.amplitude_scale(),
        None => kernel.evaluate(delay),
    };
    density_matrix(weights.0, weights.1, d)?.with_background(cfg.background)
}

pub fn cmd_jsa(cfg: &RunConfig) -> Result<Report> {
    let mut report = Report::default();
    let filtered = spectrum(cfg)?;
    let amps = post_select(&filtered.jsa, &cfg.splitter)?;
    let (alpha, beta) = diagonal_weights(&amps);

    write_file(cfg, &mut report, "jsa.txt", |out| write_jsa(out, &filtered.jsa))?;
    write_file(cfg, &mut report, "jsa_abs.txt", |out| {
        let grid = filtered.jsa.grid();
        writeln!(out, "# lambda_s_nm lambda_i_nm abs_f")?;
        for j in 0..grid.signal().len() {
            let ls = omega_to_wavelength(grid.signal().value(j)) / NANOMETRE;
            for k in 0..grid.idler().len() {
                let li = omega_to_wavelength(grid.idler().value(k)) / NANOMETRE;
                writeln!(out, "{ls:.6} {li:.6} {:.10e}", filtered.jsa.at(j, k).norm())?;
            }
        }
        Ok(())
    })?;

    let mut summary = Vec::new();
    if let Some(d) = filtered.discarded_fraction {
        summary.push(format!("discarded_fraction {d:.6e}"));
    }
    if let Some(c) = filtered.jsa.clipped_fraction() {
        summary.push(format!("clipped_fraction {c:.6e}"));
    }
    if let Some(n) = amps.neglected_fraction() {
        summary.push(format!("neglected_fraction {n:.6e}"));
    }
    summary.push(format!("alpha {alpha:.10}"));
    summary.push(format!("beta {beta:.10}"));
    write_file(cfg, &mut report, "jsa_report.txt", |out| {
        for l in &summary {
            writeln!(out, "{l}")?;
        }
        Ok(())
    })?;
    report.lines = summary;
    Ok(report)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Report> {
    let mut report = Report::default();
    let amps = amplitudes(cfg)?;
    let mut sweep = delay_sweep(&amps, cfg.sweep_min, cfg.sweep_max, cfg.sweep_points)?;
    if let Some(model) = &cfg.degradation {
        let degraded = apply_degradation(&sweep, model)?;
        if degraded.uncovered > 0 {
            report.warnings.push(format!(
                "{} of {} delays shifted outside the computed sweep; their 𝒟 is set to 0{}",
                degraded.uncovered,
                degraded.sweep.len(),
                if degraded.coverage_lost() { " (no coverage left)" } else { "" }
            ));
        }
        sweep = degraded.sweep;
    }
    write_file(cfg, &mut report, "sweep.txt", |out| sweep.write(out))?;
    let peak = sweep.peak();
    report.lines.push(format!(
        "peak tau_fs {:.3} abs_D {:.6} purity {:.6}",
        peak.tau / FEMTOSECOND,
        peak.d.norm(),
        peak.purity
    ));

    if let Some(delays) = &cfg.delays {
        let mut sorted = delays.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        sorted.dedup();
        // shift the evaluation points rather than interpolating the sweep
        let shift = cfg.degradation.map_or(0.0, |m| m.time_offset());
        let scale = cfg.degradation.map_or(1.0, |m| m.amplitude_scale());
        let shifted: Vec<f64> = sorted.iter().map(|t| t - shift).collect();
        let base = sweep_at(&amps, &shifted)?;
        let values: Vec<(f64, Complex64)> = sorted.iter().zip(base.samples()).map(|(&t, s)| (t, s.d * scale)).collect();
        let (alpha, beta) = diagonal_weights(&amps);
        let at = crate::jointstate::DelaySweep::from_values(alpha, beta, &values)?;
        write_file(cfg, &mut report, "delays.txt", |out| at.write(out))?;
        for s in at.samples() {
            report.lines.push(format!(
                "tau_fs {:.3} D {:.4}{:+.4}i purity {:.4}",
                s.tau / FEMTOSECOND,
                s.d.re,
                s.d.im,
                s.purity
            ));
        }
    }
    Ok(report)
}

fn model_count_setup(cfg: &RunConfig) -> Result<(DensityMatrix, CountModel)> {
    let amps = amplitudes(cfg)?;
    let kernel = ExchangeKernel::new(&amps)?;
    let rho = model_state(cfg, &kernel, diagonal_weights(&amps), cfg.state_delay, cfg.degradation.as_ref())?;
    let mut counts = cfg.counts;
    if cfg.pair_rate.is_none() {
        counts.pair_rate = CountModel::calibrated_pair_rate(&rho, DEFAULT_PEAK_COINCIDENCE_RATE)?;
    }
    Ok((rho, counts))
}

pub fn cmd_tomo_simulate(cfg: &RunConfig) -> Result<Report> {
    let mut report = Report::default();
    let (rho, model) = model_count_setup(cfg)?;
    let table = sample_counts(&model.expected_counts(&rho), &model, cfg.seed)?;
    write_file(cfg, &mut report, "counts.txt", |out| table.write(out))?;
    write_file(cfg, &mut report, "state_true.txt", |out| rho.write(out))?;
    report.lines.push(format!("pair_rate_hz {:.6}", model.pair_rate));
    report.lines.push(format!("accidental_rate_hz {:.6}", model.accidental_rate()));
    Ok(report)
}

pub fn cmd_tomo_reconstruct(cfg: &RunConfig, counts_path: Option<&Path>) -> Result<Report> {
    let mut report = Report::default();
    let path = counts_path
        .map(Path::to_path_buf)
        .or_else(|| cfg.counts_file.clone())
        .ok_or_else(|| Error::Config("missing key `counts_file` (or a counts file argument)".into()))?;
    let table = CountTable::read(open(&path)?).map_err(|e| e.in_file(&path))?;
    let corrected = subtract_accidentals(&table);
    let mle = mle_reconstruct(&corrected, None, &MleOptions::default())?;
    write_file(cfg, &mut report, "rho.txt", |out| mle.state.write(out))?;

    let (reference, offset_reference) = match &cfg.reference_file {
        Some(p) => (DensityMatrix::read(open(p)?).map_err(|e| e.in_file(p))?, None),
        None => {
            let amps = amplitudes(cfg)?;
            let kernel = ExchangeKernel::new(&amps)?;
            let w = diagonal_weights(&amps);
            let nominal = model_state(cfg, &kernel, w, cfg.state_delay, None)?;
            let offset = cfg
                .degradation
                .as_ref()
                .map(|m| model_state(cfg, &kernel, w, cfg.state_delay, Some(m)))
                .transpose()?;
            (nominal, offset)
        }
    };
    let metrics = StateMetrics::compute(&mle.state, Some(&reference), Some(&table))?;
    let fidelity_offset = offset_reference
        .as_ref()
        .map(|r| crate::metrics::fidelity(r, &mle.state))
        .transpose()?;
    write_file(cfg, &mut report, "metrics.txt", |out| {
        metrics.write(&mut *out)?;
        if let Some(f) = fidelity_offset {
            writeln!(out, "fidelity_offset {f:.10}")?;
        }
        Ok(())
    })?;
    let raw = table.coincidences();
    write_file(cfg, &mut report, "visibility.txt", |out| {
        writeln!(out, "# family raw corrected")?;
        for f in Family::ALL {
            writeln!(out, "{} {:.6} {:.6}", f.label(), visibility(&raw, f)?, visibility(&corrected, f)?)?;
        }
        Ok(())
    })?;
    report.lines.push(format!(
        "purity {:.4} concurrence {:.2}% fidelity {:.2}%",
        metrics.purity,
        100.0 * metrics.concurrence,
        100.0 * metrics.fidelity.unwrap_or(f64::NAN)
    ));
    if let Some(f) = fidelity_offset {
        report.lines.push(format!("fidelity (offset delay) {:.2}%", 100.0 * f));
    }
    report.lines.push(format!("mle iterations {} objective {:.6e}", mle.iterations, mle.objective));
    Ok(report)
}

pub fn cmd_metrics(cfg: &RunConfig, matrix_path: Option<&Path>) -> Result<Report> {
    let mut report = Report::default();
    let path = matrix_path
        .map(Path::to_path_buf)
        .or_else(|| cfg.matrix_file.clone())
        .ok_or_else(|| Error::Config("missing key `matrix_file` (or a matrix file argument)".into()))?;
    let rho = DensityMatrix::read(open(&path)?).map_err(|e| e.in_file(&path))?;
    let reference = cfg
        .reference_file
        .as_ref()
        .map(|p| DensityMatrix::read(open(p)?).map_err(|e| e.in_file(p)))
        .transpose()?;
    let table = cfg
        .counts_file
        .as_ref()
        .map(|p| CountTable::read(open(p)?).map_err(|e| e.in_file(p)))
        .transpose()?;
    let metrics = StateMetrics::compute(&rho, reference.as_ref(), table.as_ref())?;
    write_file(cfg, &mut report, "metrics.txt", |out| metrics.write(out))?;
    let mut buf = Vec::new();
    metrics.write(&mut buf)?;
    report.lines = String::from_utf8_lossy(&buf).lines().map(str::to_string).collect();
    Ok(report)
}

/// Reads `tau_fs re_D im_D` rows.
pub fn read_observations<R: BufRead>(input: R) -> Result<Vec<(f64, Complex64)>> {
    let mut rows = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let cols: Vec<&str> = t.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(Error::format(n + 1, "expected `tau_fs re_D im_D`"));
        }
        let v = |s: &str| s.parse::<f64>().map_err(|e| Error::format(n + 1, format!("`{s}`: {e}")));
        rows.push((v(cols[0])? * FEMTOSECOND, Complex64::new(v(cols[1])?, v(cols[2])?)));
    }
    Ok(rows)
}

pub fn cmd_fit(cfg: &RunConfig, observations_path: Option<&Path>) -> Result<Report> {
    let mut report = Report::default();
    let path = observations_path
        .map(Path::to_path_buf)
        .or_else(|| cfg.observations_file.clone())
        .ok_or_else(|| Error::Config("missing key `observations_file` (or an observations file argument)".into()))?;
    let obs = read_observations(open(&path)?).map_err(|e| e.in_file(&path))?;
    if obs.len() < 2 {
        return Err(Error::Config(format!(
            "usage: `fit` needs at least 2 observation rows, {} has {}",
            path.display(),
            obs.len()
        )));
    }
    let amps = amplitudes(cfg)?;
    let sweep = delay_sweep(&amps, cfg.sweep_min, cfg.sweep_max, cfg.sweep_points)?;
    let fit = fit_degradation(&sweep, &obs)?;
    write_file(cfg, &mut report, "fit.txt", |out| {
        writeln!(out, "scale {:.10}", fit.model.amplitude_scale())?;
        writeln!(out, "offset_fs {:.6}", fit.model.time_offset() / FEMTOSECOND)?;
        writeln!(out, "cost {:.6e}", fit.cost)?;
        writeln!(out, "# tau_fs re_residual im_residual")?;
        for ((t, _), r) in obs.iter().zip(&fit.residuals) {
            writeln!(out, "{:.6} {:.6e} {:.6e}", t / FEMTOSECOND, r.re, r.im)?;
        }
        Ok(())
    })?;
    report.lines.push(format!(
        "scale {:.4} offset_fs {:.2} cost {:.3e}",
        fit.model.amplitude_scale(),
        fit.model.time_offset() / FEMTOSECOND,
        fit.cost
    ));
    Ok(report)
}
