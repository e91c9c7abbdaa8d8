//! Flat `key = value` run configuration.
//!
//! Lengths are in nm (crystal length in mm), delays in fs, rates in Hz.
//! Every key is optional and falls back to the built-in defaults; unknown
//! keys, duplicates and malformed values are errors. Paths are resolved
//! relative to the configuration file and must exist at load time.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dichroic::{EdgeProfile, SplitterResponse, TransmissionTable, TransmitSide};
use crate::error::{Error, Result};
use crate::jointstate::DegradationModel;
use crate::spectral::PdcModel;
use crate::tomography::CountModel;
use crate::units::{FEMTOSECOND, NANOMETRE};

pub const KEYS: &[&str] = &[
    "pump_center_nm",
    "pump_bandwidth_nm",
    "degeneracy_nm",
    "crystal_length_mm",
    "group_index_signal",
    "group_index_idler",
    "group_index_pump",
    "intrinsic_delay_fs",
    "grid_points",
    "grid_center_nm",
    "grid_span_nm",
    "bandpass_center_nm",
    "bandpass_width_nm",
    "jsa_source",
    "jsa_file",
    "edge_h_nm",
    "edge_v_nm",
    "step_width_nm",
    "transmit_side",
    "t_table_h",
    "t_table_v",
    "sweep_min_fs",
    "sweep_max_fs",
    "sweep_points",
    "delays_fs",
    "degrade_scale",
    "degrade_offset_fs",
    "state_delay_fs",
    "pair_rate_hz",
    "singles_rate_hz",
    "gate_rate_hz",
    "acquisition_s",
    "background",
    "seed",
    "counts_file",
    "matrix_file",
    "reference_file",
    "observations_file",
    "out_dir",
];

#[derive(Clone, Debug, PartialEq)]
pub enum JsaSource {
    Model,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: PdcModel,
    pub grid_points: usize,
    /// Window centre and full width, m.
    pub grid_center: f64,
    pub grid_span: f64,
    pub bandpass_center: f64,
    pub bandpass_width: f64,
    pub jsa_source: JsaSource,
    pub splitter: SplitterResponse,
    /// Sweep range and sample count, s.
    pub sweep_min: f64,
    pub sweep_max: f64,
    pub sweep_points: usize,
    /// Extra delays evaluated individually, s.
    pub delays: Option<Vec<f64>>,
    pub degradation: Option<DegradationModel>,
    /// Delay at which the model state for tomography is evaluated, s.
    pub state_delay: f64,
    pub counts: CountModel,
    /// `None` calibrates the pair rate so the brighter of (H, V) and (V, H)
    /// gives 4 coincidences per second.
    pub pair_rate: Option<f64>,
    pub background: f64,
    pub seed: u64,
    pub counts_file: Option<PathBuf>,
    pub matrix_file: Option<PathBuf>,
    pub reference_file: Option<PathBuf>,
    pub observations_file: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let degeneracy = 1535.2 * NANOMETRE;
        Self {
            model: PdcModel::default(),
            grid_points: 512,
            grid_center: degeneracy,
            grid_span: 40.0 * NANOMETRE,
            bandpass_center: degeneracy,
            bandpass_width: 40.0 * NANOMETRE,
            jsa_source: JsaSource::Model,
            splitter: SplitterResponse::default(),
            sweep_min: -400.0 * FEMTOSECOND,
            sweep_max: 400.0 * FEMTOSECOND,
            sweep_points: 801,
            delays: None,
            degradation: None,
            state_delay: 0.0,
            counts: CountModel::default(),
            pair_rate: None,
            background: 0.0,
            seed: 0,
            counts_file: None,
            matrix_file: None,
            reference_file: None,
            observations_file: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Raw `key → (line, value)` entries of a configuration file.
#[derive(Debug, Default)]
struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key `{key}`", n + 1)));
            }
            if map.insert(key.to_string(), (n + 1, value.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
        }
        Ok(Self(map))
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.0.get(key)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|(line, v)| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("line {line}: `{key}`: cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    fn scaled(&self, key: &str, unit: f64) -> Result<Option<f64>> {
        Ok(self.parsed::<f64>(key)?.map(|v| v * unit))
    }

    fn path(&self, key: &str, base: &Path) -> Result<Option<PathBuf>> {
        let Some((line, v)) = self.raw(key) else {
            return Ok(None);
        };
        let p = base.join(v);
        if !p.exists() {
            return Err(Error::Config(format!(
                "line {line}: `{key}`: file {} does not exist",
                p.display()
            )));
        }
        Ok(Some(p))
    }
}

/// Parses a comma-separated list of delays in fs into seconds.
pub fn parse_delay_list(text: &str) -> Result<Vec<f64>> {
    let delays = text
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map(|v| v * FEMTOSECOND)
                .map_err(|e| Error::Config(format!("delay `{t}`: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if delays.is_empty() {
        return Err(Error::Config("empty delay list".into()));
    }
    Ok(delays)
}

/// Parses `SCALE,OFFSET_FS`.
pub fn parse_degradation(text: &str) -> Result<DegradationModel> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [scale, offset] = parts.as_slice() else {
        return Err(Error::Config(format!("degradation must be `SCALE,OFFSET_FS`, got `{text}`")));
    };
    let num = |v: &str| v.parse::<f64>().map_err(|e| Error::Config(format!("degradation `{v}`: {e}")));
    DegradationModel::new(num(scale)?, num(offset)? * FEMTOSECOND).map_err(|e| Error::Config(e.to_string()))
}

impl RunConfig {
    /// Loads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str_with_base(&text, &base)
    }

    /// Parses configuration text, resolving paths against `base`.
    pub fn from_str_with_base(text: &str, base: &Path) -> Result<Self> {
        let e = Entries::parse(text)?;
        let mut cfg = Self::default();

        let m = &mut cfg.model;
        if let Some(v) = e.scaled("pump_center_nm", NANOMETRE)? {
            m.pump_center_wavelength = v;
        }
        if let Some(v) = e.scaled("pump_bandwidth_nm", NANOMETRE)? {
            m.pump_bandwidth_fwhm = v;
        }
        if let Some(v) = e.scaled("degeneracy_nm", NANOMETRE)? {
            m.degeneracy_wavelength = v;
        }
        if let Some(v) = e.scaled("crystal_length_mm", 1e-3)? {
            m.crystal_length = v;
        }
        if let Some(v) = e.parsed("group_index_signal")? {
            m.group_index_signal = v;
        }
        if let Some(v) = e.parsed("group_index_pump")? {
            m.group_index_pump = v;
        }
        let delay = e.scaled("intrinsic_delay_fs", FEMTOSECOND)?;
        match (e.parsed::<f64>("group_index_idler")?, delay) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "`group_index_idler` and `intrinsic_delay_fs` both set the idler group index; give one".into(),
                ))
            }
            (Some(v), None) => m.group_index_idler = v,
            (None, d) => *m = m.clone().with_intrinsic_delay(d.unwrap_or(crate::spectral::DEFAULT_INTRINSIC_DELAY)),
        }

        if let Some(v) = e.parsed("grid_points")? {
            cfg.grid_points = v;
        }
        if let Some(v) = e.scaled("grid_center_nm", NANOMETRE)? {
            cfg.grid_center = v;
        }
        if let Some(v) = e.scaled("grid_span_nm", NANOMETRE)? {
            cfg.grid_span = v;
        }
        if let Some(v) = e.scaled("bandpass_center_nm", NANOMETRE)? {
            cfg.bandpass_center = v;
        }
        if let Some(v) = e.scaled("bandpass_width_nm", NANOMETRE)? {
            cfg.bandpass_width = v;
        }

        match e.raw("jsa_source").map(|(l, v)| (*l, v.as_str())) {
            None | Some((_, "model")) => {
                if e.raw("jsa_file").is_some() {
                    return Err(Error::Config("`jsa_file` given but `jsa_source` is not `file`".into()));
                }
            }
            Some((_, "file")) => {
                let p = e
                    .path("jsa_file", base)?
                    .ok_or_else(|| Error::Config("missing key `jsa_file` (required by `jsa_source = file`)".into()))?;
                cfg.jsa_source = JsaSource::File(p);
            }
            Some((l, other)) => {
                return Err(Error::Config(format!(
                    "line {l}: `jsa_source` must be `model` or `file`, got `{other}`"
                )))
            }
        }

        let default_edge = cfg.model.degeneracy_wavelength;
        let edge_h = e.scaled("edge_h_nm", NANOMETRE)?.unwrap_or(default_edge);
        let edge_v = e.scaled("edge_v_nm", NANOMETRE)?.unwrap_or(default_edge);
        let step = e.scaled("step_width_nm", NANOMETRE)?.unwrap_or(7.0 * NANOMETRE);
        let side = match e.raw("transmit_side") {
            Some((l, v)) => v
                .parse::<TransmitSide>()
                .map_err(|err| Error::Config(format!("line {l}: `transmit_side`: {err}")))?,
            None => TransmitSide::default(),
        };
        cfg.splitter = SplitterResponse::logistic(edge_h, edge_v, step, side);
        for (key, slot) in [("t_table_h", &mut cfg.splitter.h), ("t_table_v", &mut cfg.splitter.v)] {
            if let Some(p) = e.path(key, base)? {
                let file = fs::File::open(&p).map_err(|err| Error::from(err).in_file(&p))?;
                let table = TransmissionTable::read(std::io::BufReader::new(file)).map_err(|err| err.in_file(&p))?;
                *slot = EdgeProfile::Tabulated(table);
            }
        }

        if let Some(v) = e.scaled("sweep_min_fs", FEMTOSECOND)? {
            cfg.sweep_min = v;
        }
        if let Some(v) = e.scaled("sweep_max_fs", FEMTOSECOND)? {
            cfg.sweep_max = v;
        }
        if let Some(v) = e.parsed("sweep_points")? {
            cfg.sweep_points = v;
        }
        if let Some((line, v)) = e.raw("delays_fs") {
            cfg.delays = Some(parse_delay_list(v).map_err(|err| Error::Config(format!("line {line}: {err}")))?);
        }
        match (e.parsed::<f64>("degrade_scale")?, e.scaled("degrade_offset_fs", FEMTOSECOND)?) {
            (None, None) => {}
            (Some(s), Some(o)) => {
                cfg.degradation = Some(DegradationModel::new(s, o).map_err(|err| Error::Config(err.to_string()))?)
            }
            (Some(_), None) => return Err(Error::Config("missing key `degrade_offset_fs` (required by `degrade_scale`)".into())),
            (None, Some(_)) => return Err(Error::Config("missing key `degrade_scale` (required by `degrade_offset_fs`)".into())),
        }
        if let Some(v) = e.scaled("state_delay_fs", FEMTOSECOND)? {
            cfg.state_delay = v;
        }

        cfg.pair_rate = e.parsed("pair_rate_hz")?;
        if let Some(v) = cfg.pair_rate {
            cfg.counts.pair_rate = v;
        }
        if let Some(v) = e.parsed("singles_rate_hz")? {
            cfg.counts.singles_rate = v;
        }
        if let Some(v) = e.parsed("gate_rate_hz")? {
            cfg.counts.gate_rate = v;
        }
        if let Some(v) = e.parsed("acquisition_s")? {
            cfg.counts.acquisition_time = v;
        }
        if let Some(v) = e.parsed("background")? {
            cfg.background = v;
        }
        if let Some(v) = e.parsed("seed")? {
            cfg.seed = v;
        }

        cfg.counts_file = e.path("counts_file", base)?;
        cfg.matrix_file = e.path("matrix_file", base)?;
        cfg.reference_file = e.path("reference_file", base)?;
        cfg.observations_file = e.path("observations_file", base)?;
        if let Some((_, v)) = e.raw("out_dir") {
            cfg.out_dir = base.join(v);
        }

        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every physical parameter before any computation starts.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.model.validate().map_err(wrap)?;
        self.splitter.validate().map_err(wrap)?;
        self.counts.validate().map_err(wrap)?;
        if self.grid_points < 2 {
            return Err(Error::Config(format!("`grid_points` must be >= 2, got {}", self.grid_points)));
        }
        if !(self.grid_span > 0.0 && self.grid_center > self.grid_span / 2.0) {
            return Err(Error::Config("grid window must have positive span inside positive wavelengths".into()));
        }
        if !(self.bandpass_width > 0.0 && self.bandpass_center > 0.0) {
            return Err(Error::Config("band-pass center and width must be positive".into()));
        }
        if !(self.sweep_min < self.sweep_max) || self.sweep_points < 2 {
            return Err(Error::Config(
                "sweep needs `sweep_min_fs` < `sweep_max_fs` and `sweep_points` >= 2".into(),
            ));
        }
        if !(0.0..=0.25).contains(&self.background) {
            return Err(Error::Config(format!("`background` must lie in [0, 0.25], got {}", self.background)));
        }
        if let Some(r) = self.pair_rate {
            if !(r >= 0.0) {
                return Err(Error::Config(format!("`pair_rate_hz` must be non-negative, got {r}")));
            }
        }
        Ok(())
    }
}
