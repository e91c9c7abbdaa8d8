//! Two-qubit polarization tomography from 36 coincidence measurements.
//!
//! Each path is projected onto one of six states {H, V, D+, D−, R, L}. The
//! count model is `T·(pair_rate·Tr(P_ν ρ) + accidental_rate)` with Poisson
//! noise, accidentals are estimated from singles as `s_A·s_B/(gate·T)`, and
//! reconstruction runs a linear inversion followed by a weighted
//! least-squares maximum-likelihood fit over `M = T†T`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SMatrix, SVector, Vector2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::density::{hermitian_eigenvalues, DensityMatrix};
use crate::error::{Error, Result};

/// Number of ordered basis pairs.
pub const PROJECTIONS: usize = 36;

/// One value per projection, indexed `6·a + b` in [`Basis::ALL`] order.
pub type ProjectionValues = [f64; PROJECTIONS];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    H,
    V,
    Dp,
    Dm,
    R,
    L,
}

impl Basis {
    pub const ALL: [Basis; 6] = [Basis::H, Basis::V, Basis::Dp, Basis::Dm, Basis::R, Basis::L];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn token(self) -> &'static str {
        match self {
            Basis::H => "H",
            Basis::V => "V",
            Basis::Dp => "Dp",
            Basis::Dm => "Dm",
            Basis::R => "R",
            Basis::L => "L",
        }
    }

    /// Unit ket in the (H, V) basis.
    pub fn ket(self) -> Vector2<Complex64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = match self {
            Basis::H => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            Basis::V => (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
            Basis::Dp => (Complex64::new(s, 0.0), Complex64::new(s, 0.0)),
            Basis::Dm => (Complex64::new(s, 0.0), Complex64::new(-s, 0.0)),
            Basis::R => (Complex64::new(s, 0.0), Complex64::new(0.0, s)),
            Basis::L => (Complex64::new(s, 0.0), Complex64::new(0.0, -s)),
        };
        Vector2::new(a, b)
    }

    pub fn projector(self) -> Matrix2<Complex64> {
        let k = self.ket();
        k * k.adjoint()
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" => Ok(Basis::H),
            "V" => Ok(Basis::V),
            "Dp" | "D+" => Ok(Basis::Dp),
            "Dm" | "D-" => Ok(Basis::Dm),
            "R" => Ok(Basis::R),
            "L" => Ok(Basis::L),
            other => Err(Error::UnknownBasis(other.to_string())),
        }
    }
}

/// Index of the ordered pair (a, b) in projection order.
pub fn projection_index(a: Basis, b: Basis) -> usize {
    6 * a.index() + b.index()
}

/// All ordered pairs in projection order.
pub fn projection_pairs() -> impl Iterator<Item = (Basis, Basis)> {
    Basis::ALL.into_iter().flat_map(|a| Basis::ALL.into_iter().map(move |b| (a, b)))
}

/// `|a⟩⟨a| ⊗ |b⟩⟨b|` in the HH, HV, VH, VV ordering.
pub fn projector(a: Basis, b: Basis) -> Matrix4<Complex64> {
    a.projector().kronecker(&b.projector())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountRecord {
    pub basis_a: Basis,
    pub basis_b: Basis,
    pub coincidences: u64,
    pub singles_a: u64,
    pub singles_b: u64,
    /// Estimated accidental coincidences; filled in by [`CountTable::new`].
    pub accidentals: f64,
}

impl CountRecord {
    pub fn new(basis_a: Basis, basis_b: Basis, coincidences: u64, singles_a: u64, singles_b: u64) -> Self {
        Self {
            basis_a,
            basis_b,
            coincidences,
            singles_a,
            singles_b,
            accidentals: 0.0,
        }
    }
}

/// All 36 records of one tomography run, in projection order.
#[derive(Clone, Debug, PartialEq)]
pub struct CountTable {
    records: Vec<CountRecord>,
    acquisition_time: f64,
    gate_rate: f64,
}

impl CountTable {
    /// Sorts the records into projection order and estimates accidentals.
    /// Every ordered basis pair must appear exactly once.
    pub fn new(records: Vec<CountRecord>, acquisition_time: f64, gate_rate: f64) -> Result<Self> {
        if !(acquisition_time > 0.0 && gate_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "acquisition time and gate rate must be positive, got {acquisition_time} s, {gate_rate} Hz"
            )));
        }
        let mut slots: Vec<Option<CountRecord>> = vec![None; PROJECTIONS];
        for r in records {
            let slot = &mut slots[projection_index(r.basis_a, r.basis_b)];
            if slot.is_some() {
                return Err(Error::format(
                    0,
                    format!("duplicate record for basis pair ({}, {})", r.basis_a, r.basis_b),
                ));
            }
            *slot = Some(r);
        }
        let mut out = Vec::with_capacity(PROJECTIONS);
        for ((a, b), slot) in projection_pairs().zip(slots) {
            let mut r = slot.ok_or_else(|| Error::format(0, format!("missing record for basis pair ({a}, {b})")))?;
            r.accidentals = estimate_accidentals(&r, gate_rate, acquisition_time)?;
            out.push(r);
        }
        Ok(Self {
            records: out,
            acquisition_time,
            gate_rate,
        })
    }

    pub fn records(&self) -> &[CountRecord] {
        &self.records
    }

    pub fn record(&self, a: Basis, b: Basis) -> &CountRecord {
        &self.records[projection_index(a, b)]
    }

    pub fn acquisition_time(&self) -> f64 {
        self.acquisition_time
    }

    pub fn gate_rate(&self) -> f64 {
        self.gate_rate
    }

    /// Raw coincidence counts as reals.
    pub fn coincidences(&self) -> ProjectionValues {
        std::array::from_fn(|i| self.records[i].coincidences as f64)
    }

    /// Writes the `# acquisition_s gate_rate_hz` header and 36
    /// `basisA basisB coincidences singlesA singlesB` rows.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {} {}", self.acquisition_time, self.gate_rate)?;
        for r in &self.records {
            writeln!(
                out,
                "{} {} {} {} {}",
                r.basis_a, r.basis_b, r.coincidences, r.singles_a, r.singles_b
            )?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut header: Option<(f64, f64)> = None;
        let mut records = Vec::with_capacity(PROJECTIONS);
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let line_no = n + 1;
            if let Some(rest) = t.strip_prefix('#') {
                if header.is_none() {
                    let cols: Vec<&str> = rest.split_whitespace().collect();
                    if cols.len() != 2 {
                        return Err(Error::format(line_no, "header must be `# acquisition_s gate_rate_hz`"));
                    }
                    let parse =
                        |v: &str| v.parse::<f64>().map_err(|e| Error::format(line_no, format!("`{v}`: {e}")));
                    header = Some((parse(cols[0])?, parse(cols[1])?));
                }
                continue;
            }
            if header.is_none() {
                return Err(Error::format(line_no, "count table must start with `# acquisition_s gate_rate_hz`"));
            }
            let cols: Vec<&str> = t.split_whitespace().collect();
            if cols.len() != 5 {
                return Err(Error::format(
                    line_no,
                    "expected `basisA basisB coincidences singlesA singlesB`",
                ));
            }
            let count = |v: &str| v.parse::<u64>().map_err(|e| Error::format(line_no, format!("`{v}`: {e}")));
            let basis = |v: &str| {
                v.parse::<Basis>()
                    .map_err(|e| Error::format(line_no, e.to_string()))
            };
            records.push(CountRecord::new(
                basis(cols[0])?,
                basis(cols[1])?,
                count(cols[2])?,
                count(cols[3])?,
                count(cols[4])?,
            ));
        }
        let (time, gate) = header.ok_or_else(|| Error::format(0, "empty count table"))?;
        Self::new(records, time, gate)
    }
}

/// Source and detection rates for simulated tomography.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountModel {
    /// Detected pairs per second at unit projection probability.
    pub pair_rate: f64,
    /// Singles per second per arm.
    pub singles_rate: f64,
    pub gate_rate: f64,
    pub acquisition_time: f64,
}

/// Target coincidence rate of the brightest cross-polarized projection.
pub const DEFAULT_PEAK_COINCIDENCE_RATE: f64 = 4.0;

impl Default for CountModel {
    fn default() -> Self {
        Self {
            // 4/s on (H, V) for a state with half its weight there
            pair_rate: 2.0 * DEFAULT_PEAK_COINCIDENCE_RATE,
            singles_rate: 870.0,
            gate_rate: 1.9e6,
            acquisition_time: 120.0,
        }
    }
}

impl CountModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate >= 0.0 && self.singles_rate >= 0.0) {
            return Err(Error::InvalidParameter("rates must be non-negative".into()));
        }
        if !(self.gate_rate > 0.0 && self.acquisition_time > 0.0) {
            return Err(Error::InvalidParameter(
                "gate rate and acquisition time must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Accidental coincidence rate `s_A·s_B/gate` (Hz).
    pub fn accidental_rate(&self) -> f64 {
        self.singles_rate * self.singles_rate / self.gate_rate
    }

    /// Pair rate such that the larger of the (H, V) and (V, H) projections
    /// of `rho` yields `peak_rate` coincidences per second, accidentals
    /// excluded.
    pub fn calibrated_pair_rate(rho: &DensityMatrix, peak_rate: f64) -> Result<f64> {
        let p = projection_probabilities(rho);
        let peak = p[projection_index(Basis::H, Basis::V)].max(p[projection_index(Basis::V, Basis::H)]);
        if !(peak > 0.0) {
            return Err(Error::InvalidParameter(
                "state has no (H, V) or (V, H) weight to calibrate against".into(),
            ));
        }
        Ok(peak_rate / peak)
    }

    pub fn expected_counts(&self, rho: &DensityMatrix) -> ProjectionValues {
        expected_rates(rho, self.pair_rate, self.accidental_rate(), self.acquisition_time)
    }
}

/// Tr(P_ν ρ) for every projection.
pub fn projection_probabilities(rho: &DensityMatrix) -> ProjectionValues {
    let mut out = [0.0; PROJECTIONS];
    for (a, b) in projection_pairs() {
        out[projection_index(a, b)] = (projector(a, b) * rho.matrix()).trace().re;
    }
    out
}

/// Mean coincidence counts `T·(pair_rate·Tr(P_ν ρ) + accidental_rate)`.
pub fn expected_rates(
    rho: &DensityMatrix,
    pair_rate: f64,
    accidental_rate: f64,
    acquisition_time: f64,
) -> ProjectionValues {
    projection_probabilities(rho).map(|p| acquisition_time * (pair_rate * p.max(0.0) + accidental_rate))
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> Result<u64> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::InvalidParameter(format!("Poisson mean must be finite and >= 0, got {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::InvalidParameter(format!("Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Independent Poisson draws for coincidences and singles, deterministic in
/// `seed`.
pub fn sample_counts(means: &ProjectionValues, model: &CountModel, seed: u64) -> Result<CountTable> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let singles_mean = model.singles_rate * model.acquisition_time;
    let mut records = Vec::with_capacity(PROJECTIONS);
    for ((a, b), &mean) in projection_pairs().zip(means) {
        let coincidences = poisson(&mut rng, mean)?;
        let singles_a = poisson(&mut rng, singles_mean)?;
        let singles_b = poisson(&mut rng, singles_mean)?;
        records.push(CountRecord::new(a, b, coincidences, singles_a, singles_b));
    }
    CountTable::new(records, model.acquisition_time, model.gate_rate)
}

/// Expected accidental coincidences `s_A·s_B/(gate·T)` from total singles.
pub fn estimate_accidentals(record: &CountRecord, gate_rate: f64, acquisition_time: f64) -> Result<f64> {
    if !(gate_rate > 0.0 && acquisition_time > 0.0) {
        return Err(Error::InvalidParameter(
            "gate rate and acquisition time must be positive".into(),
        ));
    }
    Ok(record.singles_a as f64 * record.singles_b as f64 / (gate_rate * acquisition_time))
}

/// `max(0, coincidences − accidentals)` per projection.
pub fn subtract_accidentals(table: &CountTable) -> ProjectionValues {
    std::array::from_fn(|i| {
        let r = &table.records[i];
        (r.coincidences as f64 - r.accidentals).max(0.0)
    })
}

fn pauli(k: usize) -> Matrix2<Complex64> {
    let (o, l, i) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    match k {
        0 => Matrix2::new(l, o, o, l),
        1 => Matrix2::new(o, l, l, o),
        2 => Matrix2::new(o, -i, i, o),
        _ => Matrix2::new(l, o, o, -l),
    }
}

/// σ_a ⊗ σ_b for `k = 4a + b`.
fn pauli_pair(k: usize) -> Matrix4<Complex64> {
    pauli(k / 4).kronecker(&pauli(k % 4))
}

/// 36 × 16 real matrix `A_νk = Tr(P_ν σ_k)/4`, mapping Pauli coefficients
/// `ρ = Σ_k r_k σ_k/4` to projection probabilities.
pub fn design_matrix() -> DMatrix<f64> {
    let sigmas: Vec<Matrix4<Complex64>> = (0..16).map(pauli_pair).collect();
    let mut a = DMatrix::zeros(PROJECTIONS, 16);
    for (nu, (x, y)) in projection_pairs().enumerate() {
        let p = projector(x, y);
        for (k, s) in sigmas.iter().enumerate() {
            a[(nu, k)] = 0.25 * (p * s).trace().re;
        }
    }
    a
}

/// Linear-inversion estimate: Hermitian and unit-trace, not necessarily PSD.
#[derive(Clone, Debug)]
pub struct LinearEstimate {
    pub matrix: Matrix4<Complex64>,
    /// `I = Σn/9`, the counts a unit-trace state would give per unit
    /// projection probability.
    pub intensity: f64,
    pub min_eigenvalue: f64,
    /// Set when the smallest eigenvalue is below −1e-10.
    pub nonphysical: bool,
}

pub fn linear_inversion(counts: &ProjectionValues) -> Result<LinearEstimate> {
    if counts.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("counts must be finite".into()));
    }
    // the six kets resolve the identity three times per qubit, so Σ_ν P_ν = 9·1
    let intensity = counts.iter().sum::<f64>() / 9.0;
    if !(intensity > 0.0) {
        return Err(Error::Precondition("linear inversion needs a positive total count".into()));
    }
    let a = design_matrix();
    let n = DVector::from_iterator(PROJECTIONS, counts.iter().map(|c| c / intensity));
    let svd = a.svd(true, true);
    assert_eq!(svd.rank(1e-10), 16, "36 projections always span the Hermitian operators");
    let r = svd.solve(&n, 1e-12).expect("SVD was computed with both factors");
    let mut m = Matrix4::zeros();
    for k in 0..16 {
        m += pauli_pair(k) * Complex64::new(0.25 * r[k], 0.0);
    }
    let m = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let min_eigenvalue = hermitian_eigenvalues(&m)[0];
    Ok(LinearEstimate {
        matrix: m,
        intensity,
        min_eigenvalue,
        nonphysical: min_eigenvalue < -crate::density::PSD_TOL,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop when one iteration improves the objective by less than this
    /// fraction.
    pub relative_tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            relative_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MleResult {
    pub state: DensityMatrix,
    /// Fitted `I = Tr(T†T)`.
    pub intensity: f64,
    pub objective: f64,
    pub iterations: usize,
}

const NPAR: usize = 16;
type Params = SVector<f64, NPAR>;
type Hessian = SMatrix<f64, NPAR, NPAR>;

/// Lower-triangular T from the 16 parameters: the real diagonal first, then
/// (re, im) of each strictly lower entry, row by row.
fn unpack(t: &Params) -> Matrix4<Complex64> {
    let mut m = Matrix4::zeros();
    for d in 0..4 {
        m[(d, d)] = Complex64::new(t[d], 0.0);
    }
    let mut p = 4;
    for r in 1..4 {
        for c in 0..r {
            m[(r, c)] = Complex64::new(t[p], t[p + 1]);
            p += 2;
        }
    }
    m
}

fn pack(m: &Matrix4<Complex64>) -> Params {
    let mut t = Params::zeros();
    for d in 0..4 {
        t[d] = m[(d, d)].re;
    }
    let mut p = 4;
    for r in 1..4 {
        for c in 0..r {
            t[p] = m[(r, c)].re;
            t[p + 1] = m[(r, c)].im;
            p += 2;
        }
    }
    t
}

/// Weighted least-squares objective over M = T†T and its gradient.
struct Objective {
    projectors: Vec<Matrix4<Complex64>>,
    counts: ProjectionValues,
}

impl Objective {
    fn new(counts: &ProjectionValues) -> Self {
        Self {
            projectors: projection_pairs().map(|(a, b)| projector(a, b)).collect(),
            counts: counts.map(|c| c.max(0.0)),
        }
    }

    fn value(&self, t: &Params) -> f64 {
        let tm = unpack(t);
        let m = tm.adjoint() * tm;
        self.projectors
            .iter()
            .zip(&self.counts)
            .map(|(p, &n)| {
                let x = (p * m).trace().re;
                (x - n) * (x - n) / (2.0 * x.max(1.0))
            })
            .sum()
    }

    fn value_and_gradient(&self, t: &Params) -> (f64, Params) {
        let tm = unpack(t);
        let m = tm.adjoint() * tm;
        let mut value = 0.0;
        let mut g = Matrix4::<Complex64>::zeros();
        for (p, &n) in self.projectors.iter().zip(&self.counts) {
            let x = (p * m).trace().re;
            let dldx = if x > 1.0 {
                value += (x - n) * (x - n) / (2.0 * x);
                (x * x - n * n) / (2.0 * x * x)
            } else {
                value += 0.5 * (x - n) * (x - n);
                x - n
            };
            g += p * Complex64::new(dldx, 0.0);
        }
        // dL = 2 Re Tr(G T† dT), so ∂/∂Re T_rc = 2 Re (G T†)_cr and
        // ∂/∂Im T_rc = −2 Im (G T†)_cr
        let gt = g * tm.adjoint();
        let mut grad = Params::zeros();
        for d in 0..4 {
            grad[d] = 2.0 * gt[(d, d)].re;
        }
        let mut k = 4;
        for r in 1..4 {
            for c in 0..r {
                grad[k] = 2.0 * gt[(c, r)].re;
                grad[k + 1] = -2.0 * gt[(c, r)].im;
                k += 2;
            }
        }
        (value, grad)
    }
}

/// Starting point: linear inversion with eigenvalues clamped at 1e-6,
/// renormalised and scaled to the total intensity.
fn physical_start(estimate: &LinearEstimate) -> Matrix4<Complex64> {
    let h = estimate.matrix;
    let eig = h.symmetric_eigen();
    let clamped = eig.eigenvalues.map(|l| l.max(1e-6));
    let total: f64 = clamped.iter().sum();
    let d = Matrix4::from_diagonal(&clamped.map(|l| Complex64::new(estimate.intensity * l / total, 0.0)));
    eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Lower-triangular T with T†T = M, via the Cholesky factor of the
/// index-reversed matrix: if J M J = L L† then T = J L† J.
fn lower_factor(m: &Matrix4<Complex64>) -> Result<Matrix4<Complex64>> {
    let mut j = Matrix4::zeros();
    for k in 0..4 {
        j[(k, 3 - k)] = Complex64::new(1.0, 0.0);
    }
    let reversed = j * m * j;
    let reversed = (reversed + reversed.adjoint()) * Complex64::new(0.5, 0.0);
    let l = reversed
        .cholesky()
        .ok_or_else(|| Error::InvalidState("starting matrix is not positive definite".into()))?
        .l();
    Ok(j * l.adjoint() * j)
}

/// Maximum-likelihood state from (accidental-corrected) counts.
///
/// Minimises `Σ_ν (x_ν − n_ν)²/(2·max(x_ν, 1))` with `x_ν = Tr(P_ν T†T)` by
/// BFGS with backtracking. The fitted intensity is `Tr(T†T)` and the state
/// `T†T/Tr(T†T)`. Negative counts are treated as zero.
pub fn mle_reconstruct(
    counts: &ProjectionValues,
    init: Option<&DensityMatrix>,
    options: &MleOptions,
) -> Result<MleResult> {
    if counts.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("counts must be finite".into()));
    }
    if !counts.iter().any(|&c| c > 0.0) {
        return Err(Error::Precondition("maximum likelihood needs at least one positive count".into()));
    }
    let clamped = counts.map(|c| c.max(0.0));
    let estimate = linear_inversion(&clamped)?;
    let start = match init {
        Some(rho) => rho.matrix() * Complex64::new(estimate.intensity, 0.0),
        None => physical_start(&estimate),
    };
    let objective = Objective::new(&clamped);
    let start = pack(&lower_factor(&start).or_else(|_| {
        // a rank-deficient `init`: nudge it into the interior
        let eps = Matrix4::identity() * Complex64::new(1e-6 * estimate.intensity, 0.0);
        lower_factor(&(start + eps))
    })?);

    let finish = |t: &Params, value: f64, iterations: usize| -> Result<MleResult> {
        let tm = unpack(t);
        let m = tm.adjoint() * tm;
        Ok(MleResult {
            intensity: m.trace().re,
            state: DensityMatrix::from_psd(m)?,
            objective: value,
            iterations,
        })
    };

    let mut t = start;
    let (mut f, mut g) = objective.value_and_gradient(&t);
    let mut hinv = Hessian::identity();
    let mut fresh = true;
    for iteration in 1..=options.max_iterations {
        let mut dir = -(hinv * g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            hinv = Hessian::identity();
            dir = -g;
            slope = -g.norm_squared();
        }
        if slope == 0.0 {
            return finish(&t, f, iteration);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = t + dir * step;
            let ft = objective.value(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let improved = accepted.filter(|&(_, ft)| f - ft > options.relative_tolerance * f.abs().max(f64::MIN_POSITIVE));
        let Some((trial, ft)) = improved else {
            // stalled: retry once along the plain gradient before stopping
            if fresh {
                return finish(&accepted.map_or(t, |a| a.0), accepted.map_or(f, |a| a.1), iteration);
            }
            hinv = Hessian::identity();
            fresh = true;
            if let Some((trial, ft)) = accepted {
                t = trial;
                f = ft;
                g = objective.value_and_gradient(&t).1;
            }
            continue;
        };
        fresh = false;
        let (_, gn) = objective.value_and_gradient(&trial);
        let s = trial - t;
        let y = gn - g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy = hinv * y;
            let yhy = y.dot(&hy);
            hinv += (s * s.transpose()) * (rho * rho * yhy + rho) - (hy * s.transpose() + s * hy.transpose()) * rho;
        }
        t = trial;
        f = ft;
        g = gn;
    }
    let best = finish(&t, f, options.max_iterations)?;
    Err(Error::NonConvergence {
        iterations: options.max_iterations,
        objective: f,
        best: Box::new(best.state),
    })
}

/// Pair of mutually orthogonal analysis states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    HV,
    DD,
    RL,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::HV, Family::DD, Family::RL];

    pub fn bases(self) -> (Basis, Basis) {
        match self {
            Family::HV => (Basis::H, Basis::V),
            Family::DD => (Basis::Dp, Basis::Dm),
            Family::RL => (Basis::R, Basis::L),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::HV => "H/V",
            Family::DD => "D/D",
            Family::RL => "R/L",
        }
    }
}

/// Two-photon interference visibility within one family.
///
/// For each setting `A ∈ {a, a⊥}` of path A, path B is switched between
/// `a` and `a⊥`, giving `|n(A, a) − n(A, a⊥)| / (n(A, a) + n(A, a⊥))`; the
/// larger of the two settings is returned.
pub fn visibility(counts: &ProjectionValues, family: Family) -> Result<f64> {
    let (a, ap) = family.bases();
    let n = |x: Basis, y: Basis| counts[projection_index(x, y)].max(0.0);
    let mut best: Option<f64> = None;
    for setting in [a, ap] {
        let (n1, n2) = (n(setting, a), n(setting, ap));
        if n1 + n2 > 0.0 {
            let v = (n1 - n2).abs() / (n1 + n2);
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best.ok_or_else(|| Error::UndefinedVisibility(format!("all {} counts are zero", family.label())))
}
