//! TOML run configuration with CSV time series.
//!
//! Series are given as a CSV path (relative to the config file), a constant,
//! or an inline list. CSV files need a header row and two columns: a
//! consecutive integer index and a value. Every series is tiled cyclically to
//! the horizon.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{
    validate_instance, AffineScaling, BiomassLink, DemandSet, NexusInstance, NominalPoint, PowerCurve, RoPlantParams,
    SolveMode, StageAffineMap, StorageTech, TechnologySurrogate, TechnologyUnitModel, TimeGrid, TimeSeries, Violation,
    WaterBasis, WaterTank,
};
use crate::surrogates::{fit_technology_surrogate, per_unit_surrogate, FitOptions, FitReport, ReluNetwork, SurrogateError};

/// Position of a problem inside an input file, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}:{}:{}: {message}", at.map_or(0, |p| p.line), at.map_or(0, |p| p.column))]
    Parse { path: PathBuf, at: Option<Position>, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("invalid instance: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Instance(Vec<Violation>),
    #[error("technology {name}: {source}")]
    Surrogate { name: String, source: SurrogateError },
}

impl ConfigError {
    pub fn position(&self) -> Option<Position> {
        match self {
            ConfigError::Parse { at, .. } => *at,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeriesSource {
    Constant(f64),
    Values(Vec<f64>),
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PowerCurveSpec {
    Linear { slope: f64 },
    WindTurbine { rated_kw: f64, cut_in: f64, rated_speed: f64, cut_out: f64 },
    Points { points: Vec<(f64, f64)> },
}

impl PowerCurveSpec {
    pub fn curve(&self) -> PowerCurve {
        match *self {
            PowerCurveSpec::Linear { slope } => PowerCurve::linear(slope),
            PowerCurveSpec::WindTurbine { rated_kw, cut_in, rated_speed, cut_out } => {
                PowerCurve::wind_turbine(rated_kw, cut_in, rated_speed, cut_out)
            }
            PowerCurveSpec::Points { ref points } => PowerCurve { points: points.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSpec {
    pub k_tech: f64,
    pub k_land: f64,
    pub area_tech: f64,
    pub area_spacing: f64,
    pub power_curve: PowerCurveSpec,
    /// Number of identical candidate sites; ignored when `site_factors` is set.
    #[serde(default)]
    pub sites: Option<usize>,
    #[serde(default)]
    pub site_factors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateMethod {
    /// Least-squares lines over sub-model optima.
    Fit,
    /// Closed-form lines for identical units.
    PerUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateLines {
    pub cost_slope: f64,
    pub cost_intercept: f64,
    pub land_slope: f64,
    #[serde(default)]
    pub land_intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurrogateSpec {
    Method(SurrogateMethod),
    Lines(SurrogateLines),
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        SurrogateSpec::Method(SurrogateMethod::Fit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologySpec {
    pub name: String,
    /// Resource series (wind speed, DNI, ...) fed through the unit power curve.
    #[serde(default)]
    pub resource: Option<SeriesSource>,
    /// Per-unit output [kW]; replaces `resource` and `unit` for the profile.
    #[serde(default)]
    pub profile: Option<SeriesSource>,
    #[serde(default)]
    pub unit: Option<UnitSpec>,
    #[serde(default)]
    pub surrogate: SurrogateSpec,
    /// Horizon energy targets [kWh] for fitting; defaults to ten even steps
    /// up to the full fleet.
    #[serde(default)]
    pub fit_targets: Option<Vec<f64>>,
    /// Fixed cost for per-unit lines [$/yr].
    #[serde(default)]
    pub fixed_cost: f64,
    #[serde(default)]
    pub max_units: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub power: SeriesSource,
    /// Horizon energy target [kWh]; defaults to the summed load.
    #[serde(default)]
    pub power_total_target: Option<f64>,
    pub water: SeriesSource,
    #[serde(default)]
    pub greenhouse_count: u32,
    #[serde(default)]
    pub greenhouse_power: Option<SeriesSource>,
    #[serde(default)]
    pub greenhouse_water: Option<SeriesSource>,
}

/// Overrides applied on top of the reference RO plant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoSpec {
    pub nominal_point: Option<NominalPoint>,
    pub wr_limit: Option<f64>,
    pub qf_bounds: Option<(f64, f64)>,
    pub wr_stage_bounds: Option<[(f64, f64); 3]>,
    pub stage_affine_maps: Option<Vec<StageAffineMap>>,
    pub ec_network: Option<ReluNetwork>,
    pub ec_input_scaling: Option<[AffineScaling; 4]>,
    pub ec_output_scaling: Option<AffineScaling>,
    pub inv_cost_slope: Option<f64>,
    pub inv_cost_intercept: Option<f64>,
    pub op_cost_per_m3: Option<f64>,
    pub plant_life_years: Option<f64>,
}

impl RoSpec {
    pub fn plant(&self) -> RoPlantParams {
        let mut ro = RoPlantParams::reference();
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = &self.$f { ro.$f = v.clone(); })* };
        }
        set!(
            nominal_point,
            wr_limit,
            qf_bounds,
            wr_stage_bounds,
            stage_affine_maps,
            ec_network,
            ec_input_scaling,
            ec_output_scaling,
            inv_cost_slope,
            inv_cost_intercept,
            op_cost_per_m3,
            plant_life_years
        );
        ro
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiomassSpec {
    pub technology: String,
    pub water_per_unit: SeriesSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub mode: Option<SolveMode>,
    /// Defaults to the length of the power demand series.
    #[serde(default)]
    pub horizon_steps: Option<usize>,
    #[serde(default = "one_hour")]
    pub dt_hours: f64,
    #[serde(default)]
    pub epsilon_land: Option<f64>,
    #[serde(default)]
    pub epsilon_water: Option<f64>,
    #[serde(default)]
    pub epsilon_water_basis: WaterBasis,
    pub demands: DemandSpec,
    #[serde(default)]
    pub ro: RoSpec,
    #[serde(default)]
    pub water_tank: WaterTank,
    #[serde(default, rename = "storage")]
    pub storage: Vec<StorageTech>,
    #[serde(rename = "technology")]
    pub technologies: Vec<TechnologySpec>,
    #[serde(default)]
    pub biomass: Option<BiomassSpec>,
}

fn one_hour() -> f64 {
    1.0
}

/// Run-time overrides, typically from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub horizon_steps: Option<usize>,
    pub mode: Option<SolveMode>,
    pub epsilon_water_basis: Option<WaterBasis>,
    pub epsilon_land: Option<f64>,
    pub epsilon_water: Option<f64>,
    /// Fit every technology that has a unit model and a resource, whatever
    /// its configured surrogate.
    pub force_fit: bool,
}

/// A resolved instance plus the surrogate fits performed while loading.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub instance: NexusInstance,
    pub fits: Vec<FitReport>,
}

fn position_of(text: &str, offset: usize) -> Position {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Position { line, column }
}

pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        at: e.span().map(|s| position_of(text, s.start)),
        message: e.message().to_string(),
    })
}

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse { path: path.to_path_buf(), at: Some(Position { line, column }), message: message.into() }
}

/// Reads an `index,value` CSV. Indices must be consecutive integers.
pub fn parse_series_csv(text: &str, path: &Path) -> Result<TimeSeries, ConfigError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(parse_error(path, 1, 1, "missing header row"));
    }
    if header.len() != 2 {
        return Err(parse_error(path, 1, 1, format!("expected 2 columns (index,value), found {}", header.len())));
    }
    if header.get(0).is_some_and(|h| h.parse::<f64>().is_ok()) {
        return Err(parse_error(path, 1, 1, "missing header row"));
    }
    let mut values = Vec::new();
    let mut expected: Option<i64> = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(parse_error(path, line, 1, format!("expected 2 fields, found {}", record.len())));
        }
        let index: i64 = record[0]
            .parse()
            .map_err(|_| parse_error(path, line, 1, format!("index {:?} is not an integer", &record[0])))?;
        if let Some(e) = expected {
            if index != e {
                return Err(parse_error(path, line, 1, format!("index {index} out of sequence, expected {e}")));
            }
        }
        expected = Some(index + 1);
        let column = record[0].len() + 2;
        let value: f64 = record[1]
            .parse()
            .map_err(|_| parse_error(path, line, column, format!("value {:?} is not a number", &record[1])))?;
        if !value.is_finite() {
            return Err(parse_error(path, line, column, "value must be finite"));
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(parse_error(path, 2, 1, "series has no rows"));
    }
    Ok(TimeSeries(values))
}

fn csv_error(path: &Path, e: csv::Error) -> ConfigError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_error(path, line, 1, e.to_string())
}

/// Writes an `index,value` CSV with shortest round-trip formatting.
pub fn write_series_csv(series: &TimeSeries, header: &str) -> String {
    let mut out = format!("index,{header}\n");
    for (t, v) in series.values().iter().enumerate() {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), message: e.to_string() })
}

struct Loader<'a> {
    base: &'a Path,
}

impl Loader<'_> {
    fn raw(&self, src: &SeriesSource) -> Result<Option<TimeSeries>, ConfigError> {
        match src {
            SeriesSource::Constant(_) => Ok(None),
            SeriesSource::Values(v) if v.is_empty() => Err(ConfigError::Invalid("inline series is empty".into())),
            SeriesSource::Values(v) => Ok(Some(TimeSeries(v.clone()))),
            SeriesSource::Path(p) => {
                let full = self.base.join(p);
                parse_series_csv(&read(&full)?, &full).map(Some)
            }
        }
    }

    fn series(&self, src: &SeriesSource, steps: usize) -> Result<TimeSeries, ConfigError> {
        Ok(match (src, self.raw(src)?) {
            (SeriesSource::Constant(c), _) => TimeSeries::constant(steps, *c),
            (_, Some(s)) => s.tiled(steps),
            (_, None) => unreachable!("non-constant sources carry values"),
        })
    }
}

fn unit_model(spec: &TechnologySpec, unit: &UnitSpec) -> Result<TechnologyUnitModel, ConfigError> {
    let site_factors = match (&unit.site_factors, unit.sites) {
        (Some(f), _) => f.clone(),
        (None, Some(n)) => vec![1.0; n],
        (None, None) => {
            return Err(ConfigError::Invalid(format!("technology {}: unit needs `sites` or `site_factors`", spec.name)))
        }
    };
    Ok(TechnologyUnitModel {
        name: spec.name.clone(),
        k_tech: unit.k_tech,
        k_land: unit.k_land,
        area_tech: unit.area_tech,
        area_spacing: unit.area_spacing,
        power_curve: unit.power_curve.curve(),
        site_factors,
    })
}

/// Default fitting targets: ten evenly spaced horizon energies up to the
/// whole fleet's potential.
pub fn default_fit_targets(unit: &TechnologyUnitModel, resource: &TimeSeries, dt: f64) -> Vec<f64> {
    let fleet: f64 = unit.site_factors.iter().map(|&f| unit.unit_profile(resource, f).sum() * dt).sum();
    (1..=10).map(|i| fleet * i as f64 / 10.0).collect()
}

fn technology(
    spec: &TechnologySpec,
    loader: &Loader,
    grid: TimeGrid,
    fit: &FitOptions,
    force_fit: bool,
) -> Result<(TechnologySurrogate, Option<FitReport>), ConfigError> {
    let steps = grid.horizon_steps;
    let surrogate_err = |source| ConfigError::Surrogate { name: spec.name.clone(), source };
    let unit = spec.unit.as_ref().map(|u| unit_model(spec, u)).transpose()?;
    let resource = spec.resource.as_ref().map(|r| loader.series(r, steps)).transpose()?;
    let mut fitted = None;
    let method = match &spec.surrogate {
        _ if force_fit && unit.is_some() && resource.is_some() => &SurrogateSpec::Method(SurrogateMethod::Fit),
        m => m,
    };
    let mut surrogate = match (method, &unit, &resource) {
        (SurrogateSpec::Method(SurrogateMethod::Fit), Some(u), Some(r)) => {
            let targets = spec.fit_targets.clone().unwrap_or_else(|| default_fit_targets(u, r, grid.dt_hours));
            let report = fit_technology_surrogate(u, r, grid, &targets, fit).map_err(surrogate_err)?;
            let s = report.surrogate.clone();
            fitted = Some(report);
            s
        }
        (SurrogateSpec::Method(SurrogateMethod::PerUnit), Some(u), Some(r)) => {
            per_unit_surrogate(u, r, grid, spec.fixed_cost).map_err(surrogate_err)?
        }
        (SurrogateSpec::Method(m), _, _) => {
            return Err(ConfigError::Invalid(format!(
                "technology {}: surrogate method {m:?} needs both `unit` and `resource`",
                spec.name
            )))
        }
        (SurrogateSpec::Lines(l), _, _) => {
            let profile = match (&spec.profile, &unit, &resource) {
                (Some(p), _, _) => loader.series(p, steps)?,
                (None, Some(u), Some(r)) => u.unit_profile(r, 1.0),
                _ => {
                    return Err(ConfigError::Invalid(format!(
                        "technology {}: explicit lines need `profile` or `unit` with `resource`",
                        spec.name
                    )))
                }
            };
            let max_units = spec.max_units.or(unit.as_ref().map(|u| u.site_factors.len() as u32)).ok_or_else(|| {
                ConfigError::Invalid(format!("technology {}: `max_units` is required without a unit model", spec.name))
            })?;
            TechnologySurrogate {
                name: spec.name.clone(),
                cost_slope: l.cost_slope,
                cost_intercept: l.cost_intercept,
                land_slope: l.land_slope,
                land_intercept: l.land_intercept,
                r_squared_cost: 1.0,
                r_squared_land: 1.0,
                per_unit_energy: profile.sum() * grid.dt_hours * grid.annualization(),
                per_unit_profile: profile,
                max_units,
            }
        }
    };
    if let Some(m) = spec.max_units {
        surrogate.max_units = m;
    }
    Ok((surrogate, fitted))
}

/// Resolves a parsed config into an instance, fitting surrogates as needed.
pub fn resolve(config: RunConfig, base: &Path, overrides: &Overrides, fit: &FitOptions) -> Result<LoadedConfig, ConfigError> {
    let loader = Loader { base };
    let power_raw = loader.raw(&config.demands.power)?;
    let steps = overrides
        .horizon_steps
        .or(config.horizon_steps)
        .or(power_raw.as_ref().map(TimeSeries::len))
        .ok_or_else(|| ConfigError::Invalid("set `horizon_steps` when the power demand is a constant".into()))?;
    if steps == 0 {
        return Err(ConfigError::Invalid("horizon must have at least one step".into()));
    }
    let grid = TimeGrid::new(steps, config.dt_hours);
    let d = &config.demands;
    let zeros = SeriesSource::Constant(0.0);
    let mut demands = DemandSet {
        power_demand: loader.series(&d.power, steps)?,
        power_total_target: 0.0,
        water_demand: loader.series(&d.water, steps)?,
        greenhouse_count: d.greenhouse_count,
        greenhouse_power_profile: loader.series(d.greenhouse_power.as_ref().unwrap_or(&zeros), steps)?,
        greenhouse_water_profile: loader.series(d.greenhouse_water.as_ref().unwrap_or(&zeros), steps)?,
    };
    demands.power_total_target =
        d.power_total_target.unwrap_or_else(|| (0..steps).map(|t| demands.power_at(t) * grid.dt_hours).sum());

    let mut technologies = Vec::new();
    let mut fits = Vec::new();
    for spec in &config.technologies {
        let (s, f) = technology(spec, &loader, grid, fit, overrides.force_fit)?;
        technologies.push(s);
        fits.extend(f);
    }
    let biomass = config
        .biomass
        .as_ref()
        .map(|b| -> Result<_, ConfigError> {
            Ok(BiomassLink { technology: b.technology.clone(), water_per_unit: loader.series(&b.water_per_unit, steps)? })
        })
        .transpose()?;

    let instance = NexusInstance {
        name: config.name.clone(),
        grid,
        technologies,
        storage_techs: config.storage.clone(),
        ro: config.ro.plant(),
        demands,
        biomass,
        epsilon_land: overrides.epsilon_land.or(config.epsilon_land),
        epsilon_water: overrides.epsilon_water.or(config.epsilon_water),
        epsilon_water_basis: overrides.epsilon_water_basis.unwrap_or(config.epsilon_water_basis),
        water_tank: config.water_tank,
        mode: overrides.mode.or(config.mode).unwrap_or(SolveMode::Full),
    };
    validate_instance(&instance).map_err(ConfigError::Instance)?;
    Ok(LoadedConfig { config, instance, fits })
}

/// Reads, parses and resolves the config at `path`.
pub fn load_config(path: &Path, overrides: &Overrides, fit: &FitOptions) -> Result<LoadedConfig, ConfigError> {
    let text = read(path)?;
    let config = parse_config(&text, path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(config, base, overrides, fit)
}
