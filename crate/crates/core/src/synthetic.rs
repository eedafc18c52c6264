//! Synthetic instances with case-study magnitudes: 570 m³/h base water
//! demand, 100 kW base load, one greenhouse, wind and solar supply.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{
    AffineScaling, DemandSet, NexusInstance, PowerCurve, RoPlantParams, SolveMode, StorageTech, TechnologySurrogate,
    TechnologyUnitModel, TimeGrid, TimeSeries, WaterBasis, WaterTank,
};
use crate::surrogates::per_unit_surrogate;

pub const WATER_DEMAND: f64 = 570.0;
pub const POWER_DEMAND: f64 = 100.0;
pub const GREENHOUSE_WATER: f64 = 20.0;

/// Reference plant with the EC scaling used by the bundled instances:
/// recoveries enter unscaled, feed enters as `(Q_f − 400)/2000`, and the
/// network output maps to `EC = 300·out + 250` kW.
pub fn reference_ro() -> RoPlantParams {
    let mut ro = RoPlantParams::reference();
    ro.ec_input_scaling[3] = AffineScaling { scale: 1.0 / 2000.0, offset: -0.2 };
    ro.ec_output_scaling = AffineScaling { scale: 300.0, offset: 250.0 };
    ro
}

pub fn wind_unit() -> TechnologyUnitModel {
    TechnologyUnitModel {
        name: "wind".into(),
        k_tech: 52_000.0,
        k_land: 400.0,
        area_tech: 0.5,
        area_spacing: 15.0,
        power_curve: PowerCurve::wind_turbine(500.0, 3.0, 12.0, 25.0),
        site_factors: vec![1.0; 8],
    }
}

pub fn solar_unit() -> TechnologyUnitModel {
    TechnologyUnitModel {
        name: "solar".into(),
        k_tech: 11_000.0,
        k_land: 400.0,
        area_tech: 0.6,
        area_spacing: 0.4,
        // 100 kW block at 1000 W/m² DNI.
        power_curve: PowerCurve::linear(0.1),
        site_factors: vec![1.0; 30],
    }
}

/// Deterministic diurnal wind speed [m/s] with a calm spell.
pub fn diurnal_wind(steps: usize) -> TimeSeries {
    TimeSeries(
        (0..steps)
            .map(|t| {
                let h = (t % 24) as f64;
                let base = 8.0 + 4.0 * (std::f64::consts::TAU * (h - 3.0) / 24.0).cos();
                if (9..14).contains(&(t % 24)) {
                    base * 0.35
                } else {
                    base
                }
            })
            .collect(),
    )
}

/// Direct normal irradiance [W/m²], zero at night.
pub fn diurnal_dni(steps: usize, peak: f64) -> TimeSeries {
    TimeSeries(
        (0..steps)
            .map(|t| {
                let h = (t % 24) as f64;
                let s = (std::f64::consts::PI * (h - 6.0) / 13.0).sin();
                if (6.0..19.0).contains(&h) {
                    peak * s.max(0.0)
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

/// Wind speed as a seeded AR(1) process around a diurnal mean.
pub fn random_wind(steps: usize, rng: &mut impl Rng) -> TimeSeries {
    let mean = rng.gen_range(6.0..9.0);
    let amp = rng.gen_range(1.0..4.0);
    let phase = rng.gen_range(0.0..24.0);
    let mut noise = 0.0;
    TimeSeries(
        (0..steps)
            .map(|t| {
                noise = 0.8 * noise + rng.gen_range(-1.5..1.5);
                let h = (t % 24) as f64;
                (mean + amp * (std::f64::consts::TAU * (h - phase) / 24.0).cos() + noise).max(0.0)
            })
            .collect(),
    )
}

/// Per-unit surrogate with a fixed cost of 2% of one unit.
pub fn surrogate_from_unit(unit: &TechnologyUnitModel, resource: &TimeSeries, grid: TimeGrid) -> TechnologySurrogate {
    let fixed = 0.02 * (unit.k_tech + unit.k_land * unit.area_per_unit());
    per_unit_surrogate(unit, resource, grid, fixed).expect("bundled unit models are valid")
}

pub fn battery() -> StorageTech {
    StorageTech {
        name: "battery".into(),
        efficiency: 1.0,
        capex_per_capacity: 300.0,
        opex_per_throughput: 0.005,
        lifespan_years: 15.0,
        max_capacity: None,
        initial_level_free: true,
        cyclic_initial_level: true,
    }
}

fn greenhouse_power(steps: usize) -> TimeSeries {
    TimeSeries((0..steps).map(|t| if (8..18).contains(&(t % 24)) { 35.0 } else { 15.0 }).collect())
}

fn base_load(steps: usize) -> TimeSeries {
    TimeSeries(
        (0..steps)
            .map(|t| POWER_DEMAND * (1.0 + 0.15 * (std::f64::consts::TAU * ((t % 24) as f64 - 15.0) / 24.0).cos()))
            .collect(),
    )
}

fn demands(steps: usize, power: TimeSeries, dt: f64) -> DemandSet {
    let gh_power = greenhouse_power(steps);
    let total: f64 = power.values().iter().zip(gh_power.values()).map(|(p, g)| (p + g) * dt).sum();
    DemandSet {
        power_total_target: total,
        power_demand: power,
        water_demand: TimeSeries::constant(steps, WATER_DEMAND),
        greenhouse_count: 1,
        greenhouse_power_profile: gh_power,
        greenhouse_water_profile: TimeSeries::constant(steps, GREENHOUSE_WATER),
    }
}

fn assemble(name: &str, grid: TimeGrid, wind: &TimeSeries, dni: &TimeSeries, power: TimeSeries) -> NexusInstance {
    let steps = grid.horizon_steps;
    NexusInstance {
        name: name.into(),
        grid,
        technologies: vec![surrogate_from_unit(&wind_unit(), wind, grid), surrogate_from_unit(&solar_unit(), dni, grid)],
        storage_techs: vec![battery()],
        ro: reference_ro(),
        demands: demands(steps, power, grid.dt_hours),
        biomass: None,
        epsilon_land: None,
        epsilon_water: None,
        epsilon_water_basis: WaterBasis::Feed,
        water_tank: WaterTank { cyclic_initial_level: true, ..WaterTank::default() },
        mode: SolveMode::Full,
    }
}

/// The bundled 24-step example: wind, solar, one battery, full mode.
pub fn bundled_day() -> NexusInstance {
    bundled(24)
}

/// The bundled example on an arbitrary horizon; profiles repeat daily.
pub fn bundled(steps: usize) -> NexusInstance {
    let grid = TimeGrid::hourly(steps);
    assemble("day", grid, &diurnal_wind(steps), &diurnal_dni(steps, 900.0), base_load(steps))
}

/// Storage study instance: 48 steps of seeded variable wind and a weak sun.
pub fn tight_water() -> NexusInstance {
    let steps = 48;
    let grid = TimeGrid::hourly(steps);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let wind = random_wind(steps, &mut rng);
    let mut inst = assemble("tight_water", grid, &wind, &diurnal_dni(steps, 500.0), base_load(steps));
    inst.name = "tight_water".into();
    inst
}

/// Seeded member of the regression family: random wind, sun and load.
pub fn random_instance(seed: u64, steps: usize) -> NexusInstance {
    let grid = TimeGrid::hourly(steps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wind = random_wind(steps, &mut rng);
    let peak = rng.gen_range(400.0..1000.0);
    let dni = diurnal_dni(steps, peak);
    let scale = rng.gen_range(0.8..1.2);
    let power = base_load(steps).map(|p| p * scale);
    let mut inst = assemble(&format!("random_{seed}"), grid, &wind, &dni, power);
    inst.storage_techs[0].capex_per_capacity = rng.gen_range(150.0..450.0);
    inst
}

/// Zero water demand, no greenhouse and no recovery floor.
pub fn zero_water_demand(steps: usize) -> NexusInstance {
    let mut inst = bundled(steps);
    inst.demands.water_demand = TimeSeries::constant(steps, 0.0);
    inst.demands.greenhouse_count = 0;
    inst.demands.power_total_target = inst.demands.power_demand.sum() * inst.grid.dt_hours;
    inst.ro.wr_limit = 0.0;
    inst
}
