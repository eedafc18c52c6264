//! Domain types for the energy-water nexus and the instance validator.
//!
//! Units throughout: power kW, energy kWh, water flow m³/h, volume m³,
//! land ha, cost $/yr.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::surrogates::relu::ReluNetwork;
use crate::surrogates::taylor::wr_sys_exact;

/// Hours in a year; used to annualize horizon quantities.
pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon_steps: usize,
    pub dt_hours: f64,
}

impl TimeGrid {
    pub fn new(horizon_steps: usize, dt_hours: f64) -> Self {
        Self { horizon_steps, dt_hours }
    }

    pub fn hourly(horizon_steps: usize) -> Self {
        Self::new(horizon_steps, 1.0)
    }

    pub fn total_hours(&self) -> f64 {
        self.horizon_steps as f64 * self.dt_hours
    }

    /// Factor turning a horizon total into a yearly total.
    pub fn annualization(&self) -> f64 {
        HOURS_PER_YEAR / self.total_hours()
    }
}

/// Values on a uniform grid; the step length lives on the owning [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeSeries(pub Vec<f64>);

impl TimeSeries {
    pub fn constant(steps: usize, value: f64) -> Self {
        Self(vec![value; steps])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Repeats (or truncates) the series to exactly `steps` values.
    pub fn tiled(&self, steps: usize) -> Self {
        if self.0.is_empty() {
            return Self(Vec::new());
        }
        Self((0..steps).map(|t| self.0[t % self.0.len()]).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }
}

impl std::ops::Index<usize> for TimeSeries {
    type Output = f64;
    fn index(&self, t: usize) -> &f64 {
        &self.0[t]
    }
}

/// Piecewise-linear map from a resource value to per-unit output, flat
/// outside the breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    /// `(resource, kW)` breakpoints with strictly increasing resource values.
    pub points: Vec<(f64, f64)>,
}

impl PowerCurve {
    pub fn linear(slope: f64) -> Self {
        Self { points: vec![(0.0, 0.0), (1.0, slope)] }.extended(1e9)
    }

    fn extended(mut self, to: f64) -> Self {
        let &(x1, y1) = self.points.last().unwrap();
        let &(x0, y0) = &self.points[self.points.len() - 2];
        let slope = (y1 - y0) / (x1 - x0);
        self.points.push((to, y1 + slope * (to - x1)));
        self
    }

    /// Cubic-between-cut-in-and-rated wind turbine curve, sampled at 1 m/s.
    pub fn wind_turbine(rated_kw: f64, cut_in: f64, rated_speed: f64, cut_out: f64) -> Self {
        let mut points = vec![(0.0, 0.0), (cut_in, 0.0)];
        let mut v = cut_in.floor() + 1.0;
        while v < rated_speed {
            let frac = (v.powi(3) - cut_in.powi(3)) / (rated_speed.powi(3) - cut_in.powi(3));
            points.push((v, rated_kw * frac));
            v += 1.0;
        }
        points.push((rated_speed, rated_kw));
        points.push((cut_out, rated_kw));
        points.push((cut_out + 1e-6, 0.0));
        Self { points }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return 0.0;
        }
        if x <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x <= x1 {
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        pts[pts.len() - 1].1
    }

    pub fn min_output(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    fn is_sorted(&self) -> bool {
        self.points.windows(2).all(|w| w[0].0 < w[1].0)
    }
}

/// Detailed description of one technology unit, input to surrogate fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologyUnitModel {
    pub name: String,
    /// Annualized cost per unit [$/unit/yr].
    pub k_tech: f64,
    /// Annualized land cost [$/ha/yr].
    pub k_land: f64,
    pub area_tech: f64,
    pub area_spacing: f64,
    pub power_curve: PowerCurve,
    /// Per-site resource multipliers; one candidate unit per entry. All
    /// equal means homogeneous units.
    pub site_factors: Vec<f64>,
}

impl TechnologyUnitModel {
    /// Land per unit, `A = A_tech + A_spacing`.
    pub fn area_per_unit(&self) -> f64 {
        self.area_tech + self.area_spacing
    }

    pub fn unit_profile(&self, resource: &TimeSeries, site_factor: f64) -> TimeSeries {
        resource.map(|r| self.power_curve.evaluate(site_factor * r))
    }

    pub fn is_homogeneous(&self) -> bool {
        self.site_factors.windows(2).all(|w| w[0] == w[1])
    }
}

/// Linear cost and land lines in annual energy output, plus the per-unit
/// profile used in the hourly energy balance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologySurrogate {
    pub name: String,
    /// $/yr per kWh/yr.
    pub cost_slope: f64,
    pub cost_intercept: f64,
    /// ha per kWh/yr.
    pub land_slope: f64,
    pub land_intercept: f64,
    pub r_squared_cost: f64,
    pub r_squared_land: f64,
    /// Annual energy of one unit [kWh/yr].
    pub per_unit_energy: f64,
    /// Output of one unit per step [kW].
    pub per_unit_profile: TimeSeries,
    pub max_units: u32,
}

impl TechnologySurrogate {
    pub fn cost(&self, annual_energy: f64) -> f64 {
        self.cost_slope * annual_energy + self.cost_intercept
    }

    pub fn land(&self, annual_energy: f64) -> f64 {
        self.land_slope * annual_energy + self.land_intercept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageTech {
    pub name: String,
    /// Charge efficiency applied to stored energy.
    pub efficiency: f64,
    /// $/kWh of capacity.
    pub capex_per_capacity: f64,
    /// $/kWh released.
    pub opex_per_throughput: f64,
    pub lifespan_years: f64,
    /// Optional cap on installed capacity [kWh].
    #[serde(default)]
    pub max_capacity: Option<f64>,
    /// Whether the state of charge before the first step is a decision.
    #[serde(default = "yes")]
    pub initial_level_free: bool,
    /// With a free initial level, also require the final level to be at
    /// least the initial one, so the horizon cannot run down a free stock.
    #[serde(default)]
    pub cyclic_initial_level: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalPoint {
    pub wr1: f64,
    pub wr2: f64,
    pub wr3: f64,
    pub wr_sys: f64,
    pub qp: f64,
}

impl NominalPoint {
    /// Operating point measured on the reference plant.
    pub const REFERENCE: NominalPoint = NominalPoint { wr1: 0.3113, wr2: 0.2935, wr3: 0.1860, wr_sys: 0.6039, qp: 975.0 };

    pub fn stages(&self) -> [f64; 3] {
        [self.wr1, self.wr2, self.wr3]
    }

    /// Feed flow implied by the nominal permeate and recovery.
    pub fn qf(&self) -> f64 {
        self.qp / self.wr_sys
    }
}

/// `WR_i = recovery_offset + recovery_slope·p_feed`, `p_ret = retentate_offset
/// + retentate_slope·p_feed`, with the feed pressure boxed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageAffineMap {
    pub feed_pressure_bounds: (f64, f64),
    pub recovery_offset: f64,
    pub recovery_slope: f64,
    pub retentate_offset: f64,
    pub retentate_slope: f64,
}

/// `scaled = scale·raw + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineScaling {
    pub scale: f64,
    pub offset: f64,
}

impl AffineScaling {
    pub const IDENTITY: AffineScaling = AffineScaling { scale: 1.0, offset: 0.0 };

    pub fn apply(&self, raw: f64) -> f64 {
        self.scale * raw + self.offset
    }
}

impl Default for AffineScaling {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoPlantParams {
    pub nominal_point: NominalPoint,
    /// Minimum system recovery, WR^Lim.
    pub wr_limit: f64,
    /// Feed flow bounds [m³/h].
    pub qf_bounds: (f64, f64),
    pub wr_stage_bounds: [(f64, f64); 3],
    /// Empty, or one map per stage.
    #[serde(default)]
    pub stage_affine_maps: Vec<StageAffineMap>,
    pub ec_network: ReluNetwork,
    /// One record per network input (WR_1, WR_2, WR_3, Q_f).
    pub ec_input_scaling: [AffineScaling; 4],
    /// Maps network output to EC [kW].
    pub ec_output_scaling: AffineScaling,
    /// $·h/m³ per m³/h of permeate capacity.
    pub inv_cost_slope: f64,
    pub inv_cost_intercept: f64,
    pub op_cost_per_m3: f64,
    pub plant_life_years: f64,
}

impl RoPlantParams {
    pub const INV_COST_SLOPE: f64 = 1.25e-5;
    pub const INV_COST_INTERCEPT: f64 = 10.429e6;
    pub const OP_COST_PER_M3: f64 = 0.45;
    pub const PLANT_LIFE_YEARS: f64 = 20.0;

    /// Reference plant with the published cost data and EC network, identity
    /// EC scaling and wide operating boxes.
    pub fn reference() -> Self {
        Self {
            nominal_point: NominalPoint::REFERENCE,
            wr_limit: 0.6,
            qf_bounds: (400.0, 2400.0),
            wr_stage_bounds: [(0.16, 0.46), (0.14, 0.44), (0.04, 0.34)],
            stage_affine_maps: Vec::new(),
            ec_network: ReluNetwork::ec_reference(),
            ec_input_scaling: [AffineScaling::IDENTITY; 4],
            ec_output_scaling: AffineScaling::IDENTITY,
            inv_cost_slope: Self::INV_COST_SLOPE,
            inv_cost_intercept: Self::INV_COST_INTERCEPT,
            op_cost_per_m3: Self::OP_COST_PER_M3,
            plant_life_years: Self::PLANT_LIFE_YEARS,
        }
    }

    /// Box of the raw EC inputs (WR_1, WR_2, WR_3, Q_f).
    pub fn raw_input_bounds(&self) -> [(f64, f64); 4] {
        let s = &self.wr_stage_bounds;
        [s[0], s[1], s[2], self.qf_bounds]
    }

    /// EC [kW] for raw inputs, by forward pass through the network.
    pub fn ec_kw(&self, wr: [f64; 3], qf: f64) -> f64 {
        let raw = [wr[0], wr[1], wr[2], qf];
        let x: Vec<f64> = raw.iter().zip(&self.ec_input_scaling).map(|(v, s)| s.apply(*v)).collect();
        let out = self.ec_network.forward(&x).unwrap_or(f64::NAN);
        self.ec_output_scaling.apply(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSet {
    /// P^D(t) [kW].
    pub power_demand: TimeSeries,
    /// P_T^D over the horizon [kWh].
    pub power_total_target: f64,
    /// Q_W^D(t) [m³/h].
    pub water_demand: TimeSeries,
    pub greenhouse_count: u32,
    pub greenhouse_power_profile: TimeSeries,
    pub greenhouse_water_profile: TimeSeries,
}

impl DemandSet {
    /// Electric load at `t` excluding the RO plant.
    pub fn power_at(&self, t: usize) -> f64 {
        self.power_demand[t] + self.greenhouse_count as f64 * self.greenhouse_power_profile[t]
    }

    /// Water demand at `t` excluding the energy system's own use.
    pub fn water_at(&self, t: usize) -> f64 {
        self.water_demand[t] + self.greenhouse_count as f64 * self.greenhouse_water_profile[t]
    }
}

/// Water drawn per unit of the biomass technology; contributes Q_En^D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiomassLink {
    pub technology: String,
    pub water_per_unit: TimeSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaterTank {
    /// $ per m³ of volume.
    pub cost_slope: f64,
    pub cost_intercept: f64,
    pub life_years: f64,
    /// When false, the tank starts empty.
    pub initial_level_free: bool,
    /// See [`StorageTech::cyclic_initial_level`].
    pub cyclic_initial_level: bool,
}

impl Default for WaterTank {
    fn default() -> Self {
        Self { cost_slope: 0.75, cost_intercept: 5000.0, life_years: 30.0, initial_level_free: true, cyclic_initial_level: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    /// One RO operating point for the whole horizon.
    #[serde(alias = "steady-state-water")]
    Steady,
    #[serde(alias = "full-time-dependent")]
    Full,
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMode::Steady => "steady",
            SolveMode::Full => "full",
        })
    }
}

/// Which flow the water ε-constraint limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaterBasis {
    /// Σ Q_f·Δt, raw water withdrawn.
    #[default]
    Feed,
    /// Σ Q_p·Δt, desalinated water produced.
    Permeate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NexusInstance {
    pub name: String,
    pub grid: TimeGrid,
    pub technologies: Vec<TechnologySurrogate>,
    pub storage_techs: Vec<StorageTech>,
    pub ro: RoPlantParams,
    pub demands: DemandSet,
    #[serde(default)]
    pub biomass: Option<BiomassLink>,
    #[serde(default)]
    pub epsilon_land: Option<f64>,
    #[serde(default)]
    pub epsilon_water: Option<f64>,
    #[serde(default)]
    pub epsilon_water_basis: WaterBasis,
    pub water_tank: WaterTank,
    pub mode: SolveMode,
}

impl NexusInstance {
    /// Annual energy-system water use per biomass unit at `t`, if any.
    pub fn biomass_index(&self) -> Option<usize> {
        let link = self.biomass.as_ref()?;
        self.technologies.iter().position(|k| k.name == link.technology)
    }
}

/// One broken invariant, addressed by field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Tolerance on the nominal point's cascade consistency.
pub const NOMINAL_CONSISTENCY_TOL: f64 = 1e-3;

struct Checker(Vec<Violation>);

impl Checker {
    fn fail(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation { field: field.into(), message: message.into() });
    }

    fn check(&mut self, ok: bool, field: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.fail(field, message);
        }
    }

    fn nonneg(&mut self, value: f64, field: &str) {
        self.check(value >= 0.0 && value.is_finite(), field, format!("must be finite and ≥ 0, got {value}"));
    }

    fn series(&mut self, s: &TimeSeries, steps: usize, field: &str, nonneg: bool) {
        if s.len() != steps {
            self.fail(field, format!("has {} values but the grid has {} steps", s.len(), steps));
        }
        if let Some(t) = s.0.iter().position(|v| !v.is_finite() || (nonneg && *v < 0.0)) {
            self.fail(field, format!("value at step {} is {} (must be finite{})", t, s.0[t], if nonneg { " and ≥ 0" } else { "" }));
        }
    }
}

/// Checks every type invariant, returning the complete list of violations.
pub fn validate_instance(inst: &NexusInstance) -> Result<&NexusInstance, Vec<Violation>> {
    let mut c = Checker(Vec::new());
    let g = inst.grid;
    c.check(g.horizon_steps >= 1, "grid.horizon_steps", "must be ≥ 1");
    c.check(g.dt_hours > 0.0 && g.dt_hours.is_finite(), "grid.dt_hours", "must be > 0");
    let steps = g.horizon_steps;

    c.check(!inst.technologies.is_empty(), "technologies", "at least one technology is required");
    let mut names = std::collections::BTreeSet::new();
    for (i, k) in inst.technologies.iter().enumerate() {
        let f = |s: &str| format!("technologies[{i}].{s}");
        c.check(names.insert(k.name.clone()), f("name"), format!("duplicate technology `{}`", k.name));
        c.check(k.cost_slope >= 0.0, f("cost_slope"), "cost must be nondecreasing in output");
        c.check(k.land_slope >= 0.0, f("land_slope"), "land must be nondecreasing in output");
        c.nonneg(k.cost_intercept, &f("cost_intercept"));
        c.nonneg(k.land_intercept, &f("land_intercept"));
        for (v, n) in [(k.r_squared_cost, "r_squared_cost"), (k.r_squared_land, "r_squared_land")] {
            c.check((0.0..=1.0).contains(&v), f(n), format!("must lie in [0, 1], got {v}"));
        }
        c.nonneg(k.per_unit_energy, &f("per_unit_energy"));
        c.series(&k.per_unit_profile, steps, &f("per_unit_profile"), true);
    }
    for (i, s) in inst.storage_techs.iter().enumerate() {
        let f = |n: &str| format!("storage_techs[{i}].{n}");
        c.check(s.efficiency > 0.0 && s.efficiency <= 1.0, f("efficiency"), "must lie in (0, 1]");
        c.check(s.lifespan_years > 0.0, f("lifespan_years"), "must be > 0");
        c.nonneg(s.capex_per_capacity, &f("capex_per_capacity"));
        c.nonneg(s.opex_per_throughput, &f("opex_per_throughput"));
        if let Some(cap) = s.max_capacity {
            c.nonneg(cap, &f("max_capacity"));
        }
    }

    let ro = &inst.ro;
    c.check((0.0..1.0).contains(&ro.wr_limit), "ro.wr_limit", "must lie in [0, 1)");
    c.check(ro.qf_bounds.0 > 0.0, "ro.qf_bounds", "minimum feed must be > 0");
    c.check(ro.qf_bounds.0 <= ro.qf_bounds.1 && ro.qf_bounds.1.is_finite(), "ro.qf_bounds", "must be a finite [min, max]");
    for (i, &(lo, hi)) in ro.wr_stage_bounds.iter().enumerate() {
        c.check(0.0 <= lo && lo <= hi && hi < 1.0, format!("ro.wr_stage_bounds[{i}]"), "must satisfy 0 ≤ min ≤ max < 1");
    }
    let np = ro.nominal_point;
    match wr_sys_exact(np.wr1, np.wr2, np.wr3) {
        Ok(exact) => c.check(
            (exact - np.wr_sys).abs() <= NOMINAL_CONSISTENCY_TOL,
            "ro.nominal_point",
            format!("wr_sys {} is inconsistent with the stage recoveries (cascade gives {exact:.5})", np.wr_sys),
        ),
        Err(e) => c.fail("ro.nominal_point", e.to_string()),
    }
    c.check(np.wr_sys > 0.0 && np.qp > 0.0, "ro.nominal_point", "nominal recovery and permeate must be > 0");
    c.check(
        ro.stage_affine_maps.is_empty() || ro.stage_affine_maps.len() == 3,
        "ro.stage_affine_maps",
        "must be empty or hold one map per stage",
    );
    for (i, m) in ro.stage_affine_maps.iter().enumerate() {
        let (lo, hi) = m.feed_pressure_bounds;
        c.check(lo <= hi && lo.is_finite() && hi.is_finite(), format!("ro.stage_affine_maps[{i}]"), "feed pressure bounds must be finite");
    }
    if let Err(e) = ro.ec_network.check() {
        c.fail("ro.ec_network", e.to_string());
    } else {
        c.check(ro.ec_network.input_dim() == 4, "ro.ec_network", "EC network takes 4 inputs");
        c.check(ro.ec_network.output_dim() == 1, "ro.ec_network", "EC network has one output");
    }
    c.nonneg(ro.inv_cost_slope, "ro.inv_cost_slope");
    c.nonneg(ro.inv_cost_intercept, "ro.inv_cost_intercept");
    c.nonneg(ro.op_cost_per_m3, "ro.op_cost_per_m3");
    c.check(ro.plant_life_years > 0.0, "ro.plant_life_years", "must be > 0");

    let d = &inst.demands;
    c.series(&d.power_demand, steps, "demands.power_demand", true);
    c.series(&d.water_demand, steps, "demands.water_demand", true);
    c.series(&d.greenhouse_power_profile, steps, "demands.greenhouse_power_profile", true);
    c.series(&d.greenhouse_water_profile, steps, "demands.greenhouse_water_profile", true);
    c.nonneg(d.power_total_target, "demands.power_total_target");

    if let Some(b) = &inst.biomass {
        c.series(&b.water_per_unit, steps, "biomass.water_per_unit", true);
        c.check(inst.biomass_index().is_some(), "biomass.technology", format!("no technology named `{}`", b.technology));
    }
    for (v, n) in [(inst.epsilon_land, "epsilon_land"), (inst.epsilon_water, "epsilon_water")] {
        if let Some(e) = v {
            c.check(e > 0.0, n, format!("must be > 0, got {e}"));
        }
    }
    let tank = inst.water_tank;
    c.nonneg(tank.cost_slope, "water_tank.cost_slope");
    c.nonneg(tank.cost_intercept, "water_tank.cost_intercept");
    c.check(tank.life_years > 0.0, "water_tank.life_years", "must be > 0");

    if c.0.is_empty() {
        Ok(inst)
    } else {
        Err(c.0)
    }
}

/// Checks a unit model used for fitting.
pub fn validate_unit_model(unit: &TechnologyUnitModel) -> Vec<Violation> {
    let mut c = Checker(Vec::new());
    for (v, n) in [
        (unit.k_tech, "k_tech"),
        (unit.k_land, "k_land"),
        (unit.area_tech, "area_tech"),
        (unit.area_spacing, "area_spacing"),
    ] {
        c.nonneg(v, n);
    }
    c.check(unit.power_curve.points.len() >= 2 && unit.power_curve.is_sorted(), "power_curve", "needs ≥ 2 strictly increasing breakpoints");
    c.check(unit.power_curve.min_output() >= 0.0, "power_curve", "output must be ≥ 0");
    c.check(!unit.site_factors.is_empty(), "site_factors", "at least one candidate unit is required");
    c.check(unit.site_factors.iter().all(|f| *f >= 0.0 && f.is_finite()), "site_factors", "must be finite and ≥ 0");
    c.0
}
