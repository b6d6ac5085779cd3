//! Parameter sweeps: one-file configuration, per-point pipelines, result
//! tables and their CSV/JSON forms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::{chaotic_area_ratio, AreaSamplerConfig, ClassicalMapSpec, MapFamily, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::otoc::{normalize_sweep, sigma_otoc, xi_otoc, NormalizeMode, OtocSeries, Taper, XiOptions};
use crate::qmap::{build_floquet, build_schwinger_pair, map_otoc_series, map_spectral_sectors};
use crate::spectral::{spectral_summary, SpectrumSample, Unfolding};
use crate::spin::{build_hamiltonian, spin_otoc_series, spin_spectral_sectors, SpinChainSpec, SpinModel, SpinOtocRequest, TimeGrid};
use crate::symmetry::Parity;

/// Model family of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Standard,
    Harper,
    Xxz,
    Ising,
    Heisenberg,
}

impl Family {
    /// Model parameters that may be swept or set.
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            Family::Standard | Family::Harper => &["k"],
            Family::Xxz => &["lambda", "mu"],
            Family::Ising => &["theta", "j", "b"],
            Family::Heisenberg => &["h"],
        }
    }

    pub fn is_map(self) -> bool {
        matches!(self, Family::Standard | Family::Harper)
    }

    fn map_family(self) -> Option<MapFamily> {
        match self {
            Family::Standard => Some(MapFamily::Standard),
            Family::Harper => Some(MapFamily::Harper),
            _ => None,
        }
    }
}

/// Quantities a sweep can report at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Beta,
    Rho2,
    Eta,
    XiE,
    SigmaOtoc,
    XiOtoc,
    RCh,
    RReg,
}

impl Indicator {
    pub fn name(self) -> &'static str {
        match self {
            Indicator::Beta => "beta",
            Indicator::Rho2 => "rho2",
            Indicator::Eta => "eta",
            Indicator::XiE => "xi_e",
            Indicator::SigmaOtoc => "sigma_otoc",
            Indicator::XiOtoc => "xi_otoc",
            Indicator::RCh => "r_ch",
            Indicator::RReg => "r_reg",
        }
    }

    fn is_spectral(self) -> bool {
        matches!(self, Indicator::Beta | Indicator::Rho2 | Indicator::Eta | Indicator::XiE)
    }

    fn is_otoc(self) -> bool {
        matches!(self, Indicator::SigmaOtoc | Indicator::XiOtoc)
    }

    fn is_classical(self) -> bool {
        matches!(self, Indicator::RCh | Indicator::RReg)
    }
}

/// Row names of the within-sweep normalized OTOC indicators.
pub const SIGMA_INV_BAR: &str = "sigma_inv_bar";
pub const XI_OTOC_BAR: &str = "xi_otoc_bar";
/// Indicator name of the row recorded for a failed grid point.
pub const ERROR_ROW: &str = "error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_name() -> String {
    "sweep".into()
}
fn default_workers() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Model template; the swept parameter overrides its own entry. Keys other
/// than `family` are parameters and are checked by [`SweepConfig::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub family: Family,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty", flatten)]
    pub params: BTreeMap<String, f64>,
}

/// Value grid, either listed or as `start..=stop` in steps of `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub parameter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl GridSection {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(s)) => {
                if !(s > 0.0) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::Config(format!("range {a}..{b} step {s} is not a valid grid")));
                }
                let n = ((b - a) / s + 1e-9).floor();
                if n < 0.0 {
                    Vec::new()
                } else {
                    (0..=n as usize).map(|i| a + i as f64 * s).collect()
                }
            }
            _ => return Err(Error::Config("grid needs either `values` or all of `start`, `stop`, `step`".into())),
        };
        if v.is_empty() {
            return Err(Error::Config("the sweep grid is empty".into()));
        }
        if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid values must be finite and strictly increasing".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSection {
    pub otoc_dim: usize,
    pub steps: usize,
    pub spectral_dim: usize,
    /// Fraction of the series treated as transient.
    pub cutoff_fraction: f64,
}

impl Default for MapSection {
    fn default() -> Self {
        MapSection { otoc_dim: 600, steps: 6000, spectral_dim: 1000, cutoff_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpinSection {
    pub otoc_sites: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub otoc_up_spins: Option<usize>,
    pub separation: usize,
    pub spectral_sites: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_up_spins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parity: Option<Parity>,
    pub t_end: f64,
    pub dt: f64,
    pub t0: f64,
    /// Disorder realizations averaged per point (Heisenberg only).
    pub realizations: u64,
}

impl Default for SpinSection {
    fn default() -> Self {
        SpinSection {
            otoc_sites: 10,
            otoc_up_spins: None,
            separation: 1,
            spectral_sites: 13,
            spectral_up_spins: None,
            parity: None,
            t_end: 1100.0,
            dt: 0.1,
            t0: 100.0,
            realizations: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OtocSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detrend_window: Option<usize>,
    pub taper: Taper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalSection {
    pub n_tot: usize,
    /// First of twenty contiguous return-time caps; family default if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max_start: Option<usize>,
    pub delta: f64,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        ClassicalSection { n_tot: 35_000, t_max_start: None, delta: DEFAULT_DELTA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSection {
    pub trim: f64,
    pub degree: usize,
    /// Central fraction of eigenstates entering `ξ_E`; all if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_fraction: Option<f64>,
}

impl Default for SpectralSection {
    fn default() -> Self {
        let u = Unfolding::default();
        SpectralSection { trim: u.trim, degree: u.degree, center_fraction: None }
    }
}

/// A complete sweep description, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    pub sweep: GridSection,
    /// Empty selects the spectral and OTOC indicators.
    #[serde(default)]
    pub indicators: Vec<Indicator>,
    #[serde(default)]
    pub map: MapSection,
    #[serde(default)]
    pub spin: SpinSection,
    #[serde(default)]
    pub otoc: OtocSection,
    #[serde(default)]
    pub classical: ClassicalSection,
    #[serde(default)]
    pub spectral: SpectralSection,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        toml::from_str(&text).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })
    }

    /// Canonical text: the config re-serialized with every default filled in.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_toml().as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn indicators(&self) -> Vec<Indicator> {
        if self.indicators.is_empty() {
            vec![Indicator::Beta, Indicator::Rho2, Indicator::Eta, Indicator::XiE, Indicator::SigmaOtoc, Indicator::XiOtoc]
        } else {
            let mut v = self.indicators.clone();
            v.sort();
            v.dedup();
            v
        }
    }

    fn uses_randomness(&self) -> bool {
        self.model.family == Family::Heisenberg || self.indicators().iter().any(|i| i.is_classical())
    }

    pub fn validate(&self) -> Result<()> {
        let family = self.model.family;
        let allowed = family.parameters();
        if !allowed.contains(&self.sweep.parameter.as_str()) {
            return Err(Error::Config(format!(
                "parameter `{}` does not exist on the {family:?} model (expected one of {allowed:?})",
                self.sweep.parameter
            )));
        }
        if let Some(k) = self.model.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("model parameter `{k}` does not exist on the {family:?} model")));
        }
        self.sweep.values()?;
        if self.uses_randomness() && self.experiment.seed.is_none() {
            return Err(Error::Config("this sweep draws random numbers and needs experiment.seed".into()));
        }
        if self.experiment.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !family.is_map() && self.indicators().iter().any(|i| i.is_classical()) {
            return Err(Error::Config("r_ch and r_reg exist only for the maps".into()));
        }
        if family == Family::Heisenberg && self.spin.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.map.cutoff_fraction) {
            return Err(Error::Config("map.cutoff_fraction must lie in [0, 1)".into()));
        }
        TimeGrid::new(0.0, self.spin.t_end, self.spin.dt)?;
        Ok(())
    }

    fn param(&self, name: &str, value: f64, default: f64) -> f64 {
        if self.sweep.parameter == name {
            value
        } else {
            self.model.params.get(name).copied().unwrap_or(default)
        }
    }

    /// Spin model at grid value `value` for disorder realization `r`.
    pub fn spin_model(&self, value: f64, realization: u64) -> Option<SpinModel> {
        match self.model.family {
            Family::Xxz => Some(SpinModel::PerturbedXxz {
                lambda: self.param("lambda", value, 0.0),
                mu: self.param("mu", value, SpinModel::XXZ_MU),
            }),
            Family::Ising => Some(SpinModel::TiltedIsing {
                j: self.param("j", value, SpinModel::ISING_J),
                b: self.param("b", value, SpinModel::ISING_B),
                theta: self.param("theta", value, 0.0),
            }),
            Family::Heisenberg => {
                Some(SpinModel::heisenberg(self.param("h", value, 0.0), self.experiment.seed.unwrap_or(0), realization))
            }
            _ => None,
        }
    }
}

/// One reported number with its indicator-specific diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Measured {
    indicator: &'static str,
    value: f64,
    diag: f64,
}

/// One table row. `diag_residual` is a per-indicator diagnostic: the mean
/// negative log-likelihood per spacing for `beta` and `rho2`, the excluded
/// ratio fraction for `eta`, the state count for `xi_e`, the window mean for
/// `sigma_otoc`, the bin count for `xi_otoc`, the binomial standard error for
/// `r_ch`/`r_reg`, and zero for normalized and error rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub parameter: f64,
    pub indicator: String,
    pub value: f64,
    pub diag_residual: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub parameter: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub config_hash: String,
    pub rows: Vec<ResultRow>,
    pub errors: Vec<PointError>,
}

impl ResultTable {
    pub fn all_succeeded(&self) -> bool {
        self.errors.is_empty()
    }

    /// Values of one indicator in parameter order, with their parameters.
    pub fn column(&self, indicator: &str) -> (Vec<f64>, Vec<f64>) {
        self.rows.iter().filter(|r| r.indicator == indicator).map(|r| (r.parameter, r.value)).unzip()
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.carry
    }
}

fn otoc_indicators(cfg: &SweepConfig, series: &OtocSeries, t0: f64, wanted: &[Indicator], out: &mut Vec<Measured>) -> Result<()> {
    if wanted.contains(&Indicator::SigmaOtoc) {
        let w = series.after(t0);
        let mean = w.iter().sum::<f64>() / w.len().max(1) as f64;
        out.push(Measured { indicator: "sigma_otoc", value: sigma_otoc(series, t0)?, diag: mean });
    }
    if wanted.contains(&Indicator::XiOtoc) {
        let opts = XiOptions { detrend_window: cfg.otoc.detrend_window, taper: cfg.otoc.taper };
        let xi = xi_otoc(series, t0, &opts)?;
        out.push(Measured { indicator: "xi_otoc", value: xi.xi, diag: xi.n_bins as f64 });
    }
    Ok(())
}

fn spectral_indicators(cfg: &SweepConfig, sectors: &[SpectrumSample], wanted: &[Indicator], out: &mut Vec<Measured>) -> Result<()> {
    let unfolding = Unfolding { trim: cfg.spectral.trim, degree: cfg.spectral.degree };
    let s = spectral_summary(sectors, &unfolding, cfg.spectral.center_fraction)?;
    let n = crate::spectral::pooled_spacings(sectors, &unfolding)?.len().max(1) as f64;
    for &ind in wanted {
        let m = match ind {
            Indicator::Beta => Measured { indicator: "beta", value: s.beta.value, diag: -s.beta.log_likelihood / n },
            Indicator::Rho2 => Measured { indicator: "rho2", value: s.rho2.value, diag: -s.rho2.log_likelihood / n },
            Indicator::Eta => Measured {
                indicator: "eta",
                value: s.eta.eta,
                diag: s.eta.excluded as f64 / (s.eta.n_ratios + s.eta.excluded).max(1) as f64,
            },
            Indicator::XiE => {
                let p = s.participation.as_ref().ok_or_else(|| Error::invalid("eigenvectors missing for xi_e"))?;
                Measured { indicator: "xi_e", value: p.normalized, diag: p.n_states as f64 }
            }
            _ => continue,
        };
        out.push(m);
    }
    Ok(())
}

fn map_point(cfg: &SweepConfig, family: MapFamily, k: f64, wanted: &[Indicator]) -> Result<Vec<Measured>> {
    let mut out = Vec::new();
    if wanted.iter().any(|i| i.is_spectral()) {
        let u = build_floquet(family, cfg.map.spectral_dim, k)?;
        let sectors = map_spectral_sectors(&u, wanted.contains(&Indicator::XiE))?;
        spectral_indicators(cfg, &sectors, wanted, &mut out)?;
    }
    if wanted.iter().any(|i| i.is_otoc()) {
        let u = build_floquet(family, cfg.map.otoc_dim, k)?;
        let pair = build_schwinger_pair(cfg.map.otoc_dim)?;
        let series = map_otoc_series(&u, &pair, cfg.map.steps)?;
        let t0 = (cfg.map.cutoff_fraction * cfg.map.steps as f64).floor();
        otoc_indicators(cfg, &series, t0, wanted, &mut out)?;
    }
    if wanted.iter().any(|i| i.is_classical()) {
        let start = cfg.classical.t_max_start.unwrap_or(match family {
            MapFamily::Standard => 490,
            MapFamily::Harper => 90,
        });
        let seed = cfg.experiment.seed.expect("validated");
        let area = chaotic_area_ratio(
            &ClassicalMapSpec::new(family, k),
            &AreaSamplerConfig::contiguous(cfg.classical.n_tot, start, cfg.classical.delta, seed),
        )?;
        if wanted.contains(&Indicator::RCh) {
            out.push(Measured { indicator: "r_ch", value: area.r_ch, diag: area.stderr });
        }
        if wanted.contains(&Indicator::RReg) {
            out.push(Measured { indicator: "r_reg", value: area.r_reg(), diag: area.stderr });
        }
    }
    Ok(out)
}

fn spin_realization(cfg: &SweepConfig, value: f64, realization: u64, wanted: &[Indicator]) -> Result<Vec<Measured>> {
    let model = cfg.spin_model(value, realization).expect("spin family");
    let mut out = Vec::new();
    if wanted.iter().any(|i| i.is_spectral()) {
        let mut spec = SpinChainSpec::new(cfg.spin.spectral_sites, model.clone());
        spec.up_spins = cfg.spin.spectral_up_spins;
        spec.parity = cfg.spin.parity;
        let sectors = spin_spectral_sectors(&spec, wanted.contains(&Indicator::XiE))?;
        spectral_indicators(cfg, &sectors, wanted, &mut out)?;
    }
    if wanted.iter().any(|i| i.is_otoc()) {
        let mut spec = SpinChainSpec::new(cfg.spin.otoc_sites, model);
        spec.up_spins = cfg.spin.otoc_up_spins;
        let (h, basis) = build_hamiltonian(&spec)?;
        let grid = TimeGrid::new(0.0, cfg.spin.t_end, cfg.spin.dt)?;
        let series = spin_otoc_series(h.view(), &basis, &SpinOtocRequest::zz(cfg.spin.separation, grid))?;
        otoc_indicators(cfg, &series, cfg.spin.t0, wanted, &mut out)?;
    }
    Ok(out)
}

/// Every requested indicator at one grid value.
fn evaluate_point(cfg: &SweepConfig, value: f64) -> Result<Vec<Measured>> {
    let wanted = cfg.indicators();
    if let Some(family) = cfg.model.family.map_family() {
        return map_point(cfg, family, value, &wanted);
    }
    let n = if cfg.model.family == Family::Heisenberg { cfg.spin.realizations } else { 1 };
    let mut sums: Vec<(&'static str, CompensatedSum, CompensatedSum)> = Vec::new();
    for r in 0..n {
        let got = spin_realization(cfg, value, r, &wanted)?;
        if sums.is_empty() {
            sums = got.iter().map(|m| (m.indicator, CompensatedSum::default(), CompensatedSum::default())).collect();
        }
        for (slot, m) in sums.iter_mut().zip(&got) {
            slot.1.add(m.value);
            slot.2.add(m.diag);
        }
    }
    Ok(sums
        .into_iter()
        .map(|(indicator, v, d)| Measured { indicator, value: v.total() / n as f64, diag: d.total() / n as f64 })
        .collect())
}

/// Runs every grid point on a pool of `experiment.workers` threads, then
/// normalizes `σ_OTOC` and `ξ_OTOC` within the sweep.
///
/// A failing point contributes an error row and the sweep continues.
pub fn run_sweep(cfg: &SweepConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let grid = cfg.sweep.values()?;
    let hash = cfg.hash();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.experiment.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(f64, Result<Vec<Measured>>)> = pool.install(|| {
        grid.par_iter()
            .map(|&v| {
                log::info!("{} = {v}", cfg.sweep.parameter);
                (v, evaluate_point(cfg, v))
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let row = |parameter: f64, indicator: &str, value: f64, diag: f64| ResultRow {
        parameter,
        indicator: indicator.to_string(),
        value,
        diag_residual: diag,
        config_hash: hash.clone(),
    };
    for (v, res) in &results {
        match res {
            Ok(ms) => rows.extend(ms.iter().map(|m| row(*v, m.indicator, m.value, m.diag))),
            Err(e) => {
                log::warn!("{} = {v} failed: {e}", cfg.sweep.parameter);
                errors.push(PointError { parameter: *v, message: e.to_string() });
                rows.push(row(*v, ERROR_ROW, f64::NAN, 0.0));
            }
        }
    }

    for (source, target, mode) in [("sigma_otoc", SIGMA_INV_BAR, NormalizeMode::InvMin), ("xi_otoc", XI_OTOC_BAR, NormalizeMode::Max)] {
        let (params, values): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.indicator == source).map(|r| (r.parameter, r.value)).unzip();
        if values.is_empty() {
            continue;
        }
        match normalize_sweep(&values, mode) {
            Ok(norm) => rows.extend(params.iter().zip(norm).map(|(&p, x)| row(p, target, x, 0.0))),
            Err(e) => log::warn!("{target} skipped: {e}"),
        }
    }
    // Stable sort keeps the per-point indicator order.
    rows.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    Ok(ResultTable { config_hash: hash, rows, errors })
}

pub const CSV_HEADER: &str = "parameter,indicator,value,diag_residual,config_hash";

/// Seventeen significant digits, enough to parse back bit for bit.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::invalid(format!("`{s}` is not a number")))
}

pub fn to_csv(table: &ResultTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.parameter),
            r.indicator,
            fmt_f64(r.value),
            fmt_f64(r.diag_residual),
            r.config_hash
        );
    }
    out
}

/// Parses the CSV form; error messages are not part of it.
pub fn from_csv(text: &str) -> Result<ResultTable> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::invalid(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::invalid(format!("unexpected CSV header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::invalid(e.to_string()))?;
        let row = ResultRow {
            parameter: parse_f64(&rec[0])?,
            indicator: rec[1].to_string(),
            value: parse_f64(&rec[2])?,
            diag_residual: parse_f64(&rec[3])?,
            config_hash: rec[4].to_string(),
        };
        if row.indicator == ERROR_ROW {
            errors.push(PointError { parameter: row.parameter, message: String::new() });
        }
        rows.push(row);
    }
    let config_hash = rows.first().map(|r| r.config_hash.clone()).unwrap_or_default();
    if rows.iter().any(|r| r.config_hash != config_hash) {
        return Err(Error::invalid("rows carry different config hashes"));
    }
    Ok(ResultTable { config_hash, rows, errors })
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    parameter: f64,
    indicator: String,
    /// `null` for non-finite values.
    value: Option<f64>,
    diag_residual: Option<f64>,
    config_hash: String,
}

#[derive(Serialize, Deserialize)]
struct JsonDoc {
    config: SweepConfig,
    config_hash: String,
    rows: Vec<JsonRow>,
    errors: Vec<PointError>,
}

/// JSON form: the rows, the point errors and the full config.
pub fn to_json(table: &ResultTable, cfg: &SweepConfig) -> String {
    let doc = JsonDoc {
        config: cfg.clone(),
        config_hash: table.config_hash.clone(),
        rows: table
            .rows
            .iter()
            .map(|r| JsonRow {
                parameter: r.parameter,
                indicator: r.indicator.clone(),
                value: r.value.is_finite().then_some(r.value),
                diag_residual: r.diag_residual.is_finite().then_some(r.diag_residual),
                config_hash: r.config_hash.clone(),
            })
            .collect(),
        errors: table.errors.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("table serializes")
}

pub fn from_json(text: &str) -> Result<(ResultTable, SweepConfig)> {
    let doc: JsonDoc = serde_json::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
    let rows = doc
        .rows
        .into_iter()
        .map(|r| ResultRow {
            parameter: r.parameter,
            indicator: r.indicator,
            value: r.value.unwrap_or(f64::NAN),
            diag_residual: r.diag_residual.unwrap_or(f64::NAN),
            config_hash: r.config_hash,
        })
        .collect();
    Ok((ResultTable { config_hash: doc.config_hash, rows, errors: doc.errors }, doc.config))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Writes `<dir>/<name>.csv` or `.json` and returns its path.
pub fn write_table(table: &ResultTable, cfg: &SweepConfig, dir: &Path, format: Format) -> Result<PathBuf> {
    if table.rows.is_empty() {
        return Err(Error::invalid("refusing to write an empty table"));
    }
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.into(), source })?;
    let (path, text) = match format {
        Format::Csv => (dir.join(format!("{}.csv", cfg.experiment.name)), to_csv(table)),
        Format::Json => (dir.join(format!("{}.json", cfg.experiment.name)), to_json(table, cfg)),
    };
    std::fs::write(&path, text).map_err(|source| Error::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Spearman rank correlation, ties given their average rank.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::invalid("spearman needs two equal-length samples of at least 3 values"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("spearman needs finite values"));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let m = (n + 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - m) * (b - m)).sum();
    let vx: f64 = rx.iter().map(|a| (a - m).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - m).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Degenerate("a sample is constant".into()));
    }
    Ok(cov / (vx * vy).sqrt())
}

/// 1-based ranks with ties sharing their mean rank.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}
