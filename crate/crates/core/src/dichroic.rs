//! Polarization-dependent transmission edge of the dichroic splitter.
//!
//! Transmission is real and R = 1 − T. Path A receives the transmitted
//! photon, path B the reflected one. The default edge is a logistic in
//! wavelength whose 10–90 % width is the configured step width.

use std::io::BufRead;

use crate::error::{Error, Result};
use crate::spectral::{Axis, FrequencyGrid};
use crate::units::{omega_to_wavelength, NANOMETRE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
}

/// Which side of the edge is transmitted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TransmitSide {
    #[default]
    LongWavelengths,
    ShortWavelengths,
}

impl std::str::FromStr for TransmitSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "long" => Ok(Self::LongWavelengths),
            "short" => Ok(Self::ShortWavelengths),
            other => Err(Error::InvalidParameter(format!(
                "transmit side must be `long` or `short`, got `{other}`"
            ))),
        }
    }
}

/// Piecewise-linear T(λ), held constant beyond the first and last entries.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionTable {
    wavelength: Vec<f64>,
    transmission: Vec<f64>,
}

impl TransmissionTable {
    pub fn new(wavelength: Vec<f64>, transmission: Vec<f64>) -> Result<Self> {
        if wavelength.len() != transmission.len() || wavelength.len() < 2 {
            return Err(Error::InvalidParameter(
                "transmission table needs at least two (wavelength, T) rows".into(),
            ));
        }
        if wavelength.windows(2).any(|w| !(w[1] > w[0])) || wavelength[0] <= 0.0 {
            return Err(Error::InvalidParameter(
                "transmission table wavelengths must be positive and strictly increasing".into(),
            ));
        }
        if let Some(t) = transmission.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidParameter(format!("transmission {t} outside [0, 1]")));
        }
        Ok(Self {
            wavelength,
            transmission,
        })
    }

    pub fn transmission_at(&self, wavelength: f64) -> f64 {
        let (x, y) = (&self.wavelength, &self.transmission);
        if wavelength <= x[0] {
            return y[0];
        }
        if wavelength >= x[x.len() - 1] {
            return y[y.len() - 1];
        }
        let k = x.partition_point(|&v| v <= wavelength) - 1;
        let t = (wavelength - x[k]) / (x[k + 1] - x[k]);
        y[k] + t * (y[k + 1] - y[k])
    }

    /// Reads two-column `lambda_nm T` rows; `#` starts a comment.
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut wavelength = Vec::new();
        let mut transmission = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let t = line.split('#').next().unwrap_or("").trim();
            if t.is_empty() {
                continue;
            }
            let cols: Vec<&str> = t.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::format(n + 1, "expected `lambda_nm T`"));
            }
            let parse = |v: &str| v.parse::<f64>().map_err(|e| Error::format(n + 1, format!("`{v}`: {e}")));
            wavelength.push(parse(cols[0])? * NANOMETRE);
            transmission.push(parse(cols[1])?);
        }
        Self::new(wavelength, transmission).map_err(|e| Error::format(0, e.to_string()))
    }
}

/// Transmission curve for one polarization.
#[derive(Clone, Debug, PartialEq)]
pub enum EdgeProfile {
    Logistic {
        edge_wavelength: f64,
        /// 10 %–90 % transition width.
        step_width: f64,
        side: TransmitSide,
    },
    Tabulated(TransmissionTable),
    /// Frequency-independent transmission.
    Constant(f64),
}

impl EdgeProfile {
    pub fn logistic(edge_wavelength: f64, step_width: f64) -> Self {
        Self::Logistic {
            edge_wavelength,
            step_width,
            side: TransmitSide::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Logistic {
                edge_wavelength,
                step_width,
                ..
            } => {
                if !(edge_wavelength.is_finite() && *edge_wavelength > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "edge wavelength must be positive, got {edge_wavelength}"
                    )));
                }
                if !(step_width.is_finite() && *step_width > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "step width must be positive, got {step_width}"
                    )));
                }
            }
            Self::Tabulated(_) => {}
            Self::Constant(t) => {
                if !(0.0..=1.0).contains(t) {
                    return Err(Error::InvalidParameter(format!("transmission {t} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// T at a wavelength (m).
    pub fn transmission_at(&self, wavelength: f64) -> f64 {
        match self {
            Self::Logistic {
                edge_wavelength,
                step_width,
                side,
            } => {
                // the 10–90 % width of σ(x/s) is 2 s ln 9
                let s = step_width / (2.0 * 9f64.ln());
                let x = (wavelength - edge_wavelength) / s;
                let x = match side {
                    TransmitSide::LongWavelengths => x,
                    TransmitSide::ShortWavelengths => -x,
                };
                logistic(x)
            }
            Self::Tabulated(table) => table.transmission_at(wavelength),
            Self::Constant(t) => *t,
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Transmission profiles for both polarizations.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitterResponse {
    pub h: EdgeProfile,
    pub v: EdgeProfile,
}

impl Default for SplitterResponse {
    fn default() -> Self {
        let edge = 1535.2 * NANOMETRE;
        Self::logistic(edge, edge, 7.0 * NANOMETRE, TransmitSide::default())
    }
}

impl SplitterResponse {
    pub fn logistic(edge_h: f64, edge_v: f64, step_width: f64, side: TransmitSide) -> Self {
        let profile = |edge_wavelength| EdgeProfile::Logistic {
            edge_wavelength,
            step_width,
            side,
        };
        Self {
            h: profile(edge_h),
            v: profile(edge_v),
        }
    }

    /// Same T for both polarizations at every frequency.
    pub fn constant(t_h: f64, t_v: f64) -> Self {
        Self {
            h: EdgeProfile::Constant(t_h),
            v: EdgeProfile::Constant(t_v),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.h.validate()?;
        self.v.validate()
    }

    pub fn profile(&self, polarization: Polarization) -> &EdgeProfile {
        match polarization {
            Polarization::H => &self.h,
            Polarization::V => &self.v,
        }
    }
}

/// `(T, R)` for one polarization at angular frequency `omega`.
pub fn edge_response(resp: &SplitterResponse, omega: f64, polarization: Polarization) -> Result<(f64, f64)> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("splitter frequency must be positive, got {omega}")));
    }
    let t = resp.profile(polarization).transmission_at(omega_to_wavelength(omega));
    Ok((t, 1.0 - t))
}

/// T/R curves sampled on the grid axes: H on the signal axis, V on the idler
/// axis.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSplitter {
    pub t_h: Vec<f64>,
    pub r_h: Vec<f64>,
    pub t_v: Vec<f64>,
    pub r_v: Vec<f64>,
}

pub fn sample_on_grid(resp: &SplitterResponse, grid: &FrequencyGrid) -> Result<SampledSplitter> {
    resp.validate()?;
    let curve = |axis: &Axis, pol| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut t = Vec::with_capacity(axis.len());
        let mut r = Vec::with_capacity(axis.len());
        for w in axis.values() {
            let (tt, rr) = edge_response(resp, w, pol)?;
            t.push(tt);
            r.push(rr);
        }
        Ok((t, r))
    };
    let (t_h, r_h) = curve(grid.signal(), Polarization::H)?;
    let (t_v, r_v) = curve(grid.idler(), Polarization::V)?;
    Ok(SampledSplitter { t_h, r_h, t_v, r_v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::wavelength_to_omega;

    #[test]
    fn midpoint_is_one_half() {
        let resp = SplitterResponse::default();
        let w = wavelength_to_omega(1535.2 * NANOMETRE);
        for pol in [Polarization::H, Polarization::V] {
            let (t, r) = edge_response(&resp, w, pol).unwrap();
            assert!((t - 0.5).abs() < 1e-12);
            assert_eq!(t + r, 1.0);
        }
    }

    #[test]
    fn ten_ninety_width() {
        let p = EdgeProfile::logistic(1535.2 * NANOMETRE, 7.0 * NANOMETRE);
        let lo = p.transmission_at((1535.2 - 3.5) * NANOMETRE);
        let hi = p.transmission_at((1535.2 + 3.5) * NANOMETRE);
        assert!((lo - 0.1).abs() < 1e-12);
        assert!((hi - 0.9).abs() < 1e-12);
    }

    #[test]
    fn deep_transmission_band() {
        let p = EdgeProfile::logistic(1535.2 * NANOMETRE, 7.0 * NANOMETRE);
        // five step widths out: σ(5·2 ln 9) = 1/(1 + 9^-10)
        assert!(p.transmission_at((1535.2 + 35.0) * NANOMETRE) > 0.999);
        let short = EdgeProfile::Logistic {
            edge_wavelength: 1535.2 * NANOMETRE,
            step_width: 7.0 * NANOMETRE,
            side: TransmitSide::ShortWavelengths,
        };
        assert!(short.transmission_at((1535.2 - 35.0) * NANOMETRE) > 0.999);
        assert!(short.transmission_at((1535.2 + 35.0) * NANOMETRE) < 0.001);
    }

    #[test]
    fn non_positive_frequency_is_rejected() {
        let resp = SplitterResponse::default();
        assert!(matches!(edge_response(&resp, 0.0, Polarization::H), Err(Error::Domain(_))));
    }

    #[test]
    fn wide_step_is_flat() {
        let resp = SplitterResponse::logistic(1535.2 * NANOMETRE, 1535.2 * NANOMETRE, 1.0, TransmitSide::default());
        let grid = FrequencyGrid::window(1535.2 * NANOMETRE, 40.0 * NANOMETRE, 32).unwrap();
        let s = sample_on_grid(&resp, &grid).unwrap();
        for t in s.t_h.iter().chain(&s.t_v).chain(&s.r_h).chain(&s.r_v) {
            assert!((t - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn sampled_curves_are_monotone_and_cross_at_the_edge() {
        let grid = FrequencyGrid::window(1535.2 * NANOMETRE, 40.0 * NANOMETRE, 64).unwrap();
        let s = sample_on_grid(&SplitterResponse::default(), &grid).unwrap();
        // frequency increases along the axis, so T (long-pass) decreases
        assert!(s.t_h.windows(2).all(|w| w[1] < w[0]));
        assert!(s.t_v.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(s.t_h, s.t_v);
        let crossing = s.t_h.iter().position(|&t| t < 0.5).unwrap();
        let w0 = grid.signal().value(crossing - 1);
        let w1 = grid.signal().value(crossing);
        let lam0 = omega_to_wavelength(w0);
        let lam1 = omega_to_wavelength(w1);
        assert!(lam1 < 1535.2 * NANOMETRE && 1535.2 * NANOMETRE < lam0);
    }

    #[test]
    fn table_interpolates_and_clamps() {
        let table = TransmissionTable::read("# lambda T\n1500 0.0\n1520 0.2\n1560 1.0\n".as_bytes()).unwrap();
        assert!((table.transmission_at(1510.0 * NANOMETRE) - 0.1).abs() < 1e-12);
        assert!((table.transmission_at(1540.0 * NANOMETRE) - 0.6).abs() < 1e-12);
        assert_eq!(table.transmission_at(1400.0 * NANOMETRE), 0.0);
        assert_eq!(table.transmission_at(1700.0 * NANOMETRE), 1.0);
    }

    #[test]
    fn table_errors() {
        assert!(matches!(
            TransmissionTable::read("1500 0.1 3\n".as_bytes()),
            Err(Error::Format { line: 1, .. })
        ));
        assert!(TransmissionTable::read("1500 0.1\n1400 0.2\n".as_bytes()).is_err());
        assert!(TransmissionTable::read("1500 0.1\n1600 1.2\n".as_bytes()).is_err());
    }

    #[test]
    fn transmit_side_parsing() {
        assert_eq!("long".parse::<TransmitSide>().unwrap(), TransmitSide::LongWavelengths);
        assert_eq!("Short".parse::<TransmitSide>().unwrap(), TransmitSide::ShortWavelengths);
        assert!("both".parse::<TransmitSide>().is_err());
    }
}
