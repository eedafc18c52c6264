//! Independent re-evaluation of a [`Solution`] against its instance.
//!
//! Nothing here reads the MILP: every balance, surrogate and cost is
//! recomputed from instance data and the solution's named quantities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{NexusInstance, SolveMode, WaterBasis};
use crate::solution::Solution;
use crate::surrogates::taylor::{build_qp_taylor, build_wr_sys_taylor};

/// Residuals below this are never flagged, whatever their scale.
pub const ABSOLUTE_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("{series} has {got} values, expected {expected}")]
    GridMismatch { series: String, expected: usize, got: usize },
    #[error("solution has no values (status {0:?})")]
    NoValues(nexus_milp::SolveStatus),
    #[error("solution fails validation: {}", .0.join(", "))]
    Failed(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    /// Violation amount (≥ 0).
    pub value: f64,
    /// Magnitude the tolerance is relative to.
    pub scale: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub tolerance: f64,
    pub residuals: Vec<Residual>,
    pub recomputed_objective: f64,
    pub reported_objective: f64,
    /// Largest |forward pass − EC(t)| in kW.
    pub max_ec_deviation: f64,
}

impl ValidationReport {
    pub fn flagged(&self) -> impl Iterator<Item = &Residual> {
        self.residuals.iter().filter(|r| r.flagged)
    }

    pub fn flagged_names(&self) -> Vec<String> {
        self.flagged().map(|r| r.name.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name)
    }
}

struct Audit {
    tol: f64,
    out: Vec<Residual>,
}

impl Audit {
    fn push(&mut self, name: String, value: f64, scale: f64) {
        let flagged = !(value <= (self.tol * scale).max(ABSOLUTE_FLOOR));
        self.out.push(Residual { name, value, scale, flagged });
    }

    fn scale(terms: &[f64], rhs: f64) -> f64 {
        terms.iter().fold(rhs.abs(), |m, v| m.max(v.abs()))
    }

    /// `Σ terms = rhs`
    fn eq(&mut self, name: impl Into<String>, terms: &[f64], rhs: f64) {
        let lhs: f64 = terms.iter().sum();
        self.push(name.into(), (lhs - rhs).abs(), Self::scale(terms, rhs));
    }

    /// `Σ terms ≤ rhs`
    fn le(&mut self, name: impl Into<String>, terms: &[f64], rhs: f64) {
        let lhs: f64 = terms.iter().sum();
        self.push(name.into(), (lhs - rhs).max(0.0), Self::scale(terms, rhs));
    }

    /// `Σ terms ≥ rhs`
    fn ge(&mut self, name: impl Into<String>, terms: &[f64], rhs: f64) {
        let lhs: f64 = terms.iter().sum();
        self.push(name.into(), (rhs - lhs).max(0.0), Self::scale(terms, rhs));
    }

    fn within(&mut self, name: &str, v: f64, lo: f64, hi: f64) {
        self.ge(format!("{name}_lo"), &[v], lo);
        self.le(format!("{name}_hi"), &[v], hi);
    }
}

fn check_len(series: &str, v: &[f64], expected: usize) -> Result<(), ValidationError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(ValidationError::GridMismatch { series: series.into(), expected, got: v.len() })
    }
}

/// Re-evaluates every balance, bound and cost of `sol` with relative
/// tolerance `tol` (absolute floor [`ABSOLUTE_FLOOR`]).
pub fn check_solution(inst: &NexusInstance, sol: &Solution, tol: f64) -> Result<ValidationReport, ValidationError> {
    if !sol.has_values() {
        return Err(ValidationError::NoValues(sol.status));
    }
    let steps = inst.grid.horizon_steps;
    let dt = inst.grid.dt_hours;
    let af = inst.grid.annualization();
    let s = &sol.series;
    for (name, v) in [
        ("power", &s.power),
        ("ec", &s.ec),
        ("qf", &s.qf),
        ("qp", &s.qp),
        ("wr1", &s.wr1),
        ("wr2", &s.wr2),
        ("wr3", &s.wr3),
        ("wr_sys", &s.wr_sys),
        ("q_stor", &s.q_stor),
        ("q_rel", &s.q_rel),
    ] {
        check_len(name, v, steps)?;
    }
    check_len("tank_level", &s.tank_level, steps + 1)?;
    if sol.unit_counts.len() != inst.technologies.len() {
        return Err(ValidationError::GridMismatch { series: "unit_counts".into(), expected: inst.technologies.len(), got: sol.unit_counts.len() });
    }
    if sol.storage.len() != inst.storage_techs.len() {
        return Err(ValidationError::GridMismatch { series: "storage".into(), expected: inst.storage_techs.len(), got: sol.storage.len() });
    }
    for st in &sol.storage {
        check_len(&format!("{}.soc", st.name), &st.soc, steps + 1)?;
        check_len(&format!("{}.charge", st.name), &st.charge, steps)?;
        check_len(&format!("{}.discharge", st.name), &st.discharge, steps)?;
    }

    let mut a = Audit { tol, out: Vec::new() };
    let ro = &inst.ro;

    // Unit counts.
    let n: Vec<f64> = sol.unit_counts.iter().map(|u| u.value).collect();
    for (k, tech) in inst.technologies.iter().enumerate() {
        let name = format!("units[{}]", tech.name);
        a.push(format!("{name}_integral"), (n[k] - n[k].round()).abs(), 1.0);
        a.within(&name, n[k], 0.0, tech.max_units as f64);
    }

    // Generation.
    for t in 0..steps {
        let mut terms = vec![s.power[t]];
        terms.extend(inst.technologies.iter().zip(&n).map(|(k, &nk)| -nk * k.per_unit_profile[t]));
        a.eq(format!("generation[{}]", t + 1), &terms, 0.0);
    }

    // RO surrogates and bounds.
    let wr_s = build_wr_sys_taylor(ro.nominal_point.stages()).expect("validated nominal point");
    let qp_s = build_qp_taylor(ro.nominal_point.qp, ro.nominal_point.wr_sys).expect("validated nominal point");
    let mut max_ec_dev: f64 = 0.0;
    for t in 0..steps {
        let tag = t + 1;
        let wr = [s.wr1[t], s.wr2[t], s.wr3[t]];
        for (i, &w) in wr.iter().enumerate() {
            let (lo, hi) = ro.wr_stage_bounds[i];
            a.within(&format!("wr{}[{tag}]", i + 1), w, lo, hi);
        }
        a.within(&format!("qf[{tag}]"), s.qf[t], ro.qf_bounds.0, ro.qf_bounds.1);
        let wr_sys = wr_s.evaluate(&wr);
        a.eq(format!("wr_sys_surrogate[{tag}]"), &[s.wr_sys[t], -wr_sys], 0.0);
        a.ge(format!("recovery_floor[{tag}]"), &[s.wr_sys[t]], ro.wr_limit);
        let qp = qp_s.evaluate(&[s.wr_sys[t], s.qf[t]]);
        a.eq(format!("permeate_surrogate[{tag}]"), &[s.qp[t], -qp], 0.0);
        a.ge(format!("permeate_nonneg[{tag}]"), &[s.qp[t]], 0.0);
        let ec = ro.ec_kw(wr, s.qf[t]);
        max_ec_dev = max_ec_dev.max((ec - s.ec[t]).abs());
        a.eq(format!("ec_network[{tag}]"), &[s.ec[t], -ec], 0.0);
        a.ge(format!("permeate_capacity[{tag}]"), &[sol.qp_capacity, -s.qp[t]], 0.0);
        if inst.mode == SolveMode::Steady && t > 0 {
            for (name, v) in [("qf", &s.qf), ("wr1", &s.wr1), ("wr2", &s.wr2), ("wr3", &s.wr3), ("ec", &s.ec)] {
                a.eq(format!("steady_{name}[{tag}]"), &[v[t], -v[0]], 0.0);
            }
        }
    }

    // Energy balances.
    let mut energy_terms = Vec::new();
    for t in 0..steps {
        let mut terms = vec![s.power[t], -s.ec[t]];
        for st in &sol.storage {
            terms.push(st.discharge[t]);
            terms.push(-st.charge[t]);
        }
        a.ge(format!("energy_adequacy[{}]", t + 1), &terms, inst.demands.power_at(t));
        energy_terms.extend(terms.iter().map(|v| v * dt));
    }
    energy_terms.push(-sol.energy_sum);
    a.eq("energy_sum", &energy_terms, 0.0);
    a.ge("energy_target", &[sol.energy_sum], inst.demands.power_total_target);

    // Energy storage.
    for (st, tech) in sol.storage.iter().zip(&inst.storage_techs) {
        let nm = &tech.name;
        a.ge(format!("capacity[{nm}]_lo"), &[st.capacity], 0.0);
        if let Some(cap) = tech.max_capacity {
            a.le(format!("capacity[{nm}]_hi"), &[st.capacity], cap);
        }
        if tech.initial_level_free {
            a.within(&format!("soc[{nm}][0]"), st.soc[0], 0.0, st.capacity);
        } else {
            a.eq(format!("soc[{nm}][0]"), &[st.soc[0]], 0.0);
        }
        for t in 0..steps {
            let tag = t + 1;
            a.eq(
                format!("soc_dynamics[{nm}][{tag}]"),
                &[st.soc[tag], -st.soc[t], -tech.efficiency * st.charge[t] * dt, st.discharge[t] * dt],
                0.0,
            );
            a.within(&format!("soc[{nm}][{tag}]"), st.soc[tag], 0.0, st.capacity);
            a.ge(format!("charge[{nm}][{tag}]"), &[st.charge[t]], 0.0);
            a.ge(format!("discharge[{nm}][{tag}]"), &[st.discharge[t]], 0.0);
        }
        a.le(format!("soc_first_release[{nm}]"), &[st.discharge[0] * dt, -st.soc[1]], 0.0);
        a.le(format!("soc_cycle[{nm}]"), &[st.soc[1], -st.soc[steps]], 0.0);
        if tech.initial_level_free && tech.cyclic_initial_level {
            a.le(format!("soc_wrap[{nm}]"), &[st.soc[0], -st.soc[steps]], 0.0);
        }
    }

    // Water balance and tank.
    let v = &s.tank_level;
    let biomass = inst.biomass_index().map(|k| (n[k], &inst.biomass.as_ref().unwrap().water_per_unit));
    for t in 0..steps {
        let tag = t + 1;
        let mut terms = vec![s.qp[t], -s.q_stor[t], s.q_rel[t]];
        if let Some((nb, w)) = biomass {
            terms.push(-nb * w[t]);
        }
        a.eq(format!("water_balance[{tag}]"), &terms, inst.demands.water_at(t));
        a.eq(format!("tank_dynamics[{tag}]"), &[v[tag], -v[t], -s.q_stor[t] * dt, s.q_rel[t] * dt], 0.0);
        a.within(&format!("tank_level[{tag}]"), v[tag], 0.0, sol.tank_volume);
        a.ge(format!("q_stor[{tag}]"), &[s.q_stor[t]], 0.0);
        a.ge(format!("q_rel[{tag}]"), &[s.q_rel[t]], 0.0);
    }
    if inst.water_tank.initial_level_free {
        a.within("tank_level[0]", v[0], 0.0, sol.tank_volume);
    } else {
        a.eq("tank_level[0]", &[v[0]], 0.0);
    }
    a.le("tank_first_release", &[s.q_rel[0] * dt, -v[1]], 0.0);
    a.le("tank_cycle", &[v[1], -v[steps]], 0.0);
    if inst.water_tank.initial_level_free && inst.water_tank.cyclic_initial_level {
        a.le("tank_wrap", &[v[0], -v[steps]], 0.0);
    }

    // Land and water use.
    let mut land_terms = vec![-sol.land_use];
    for (k, &nk) in inst.technologies.iter().zip(&n) {
        land_terms.push(k.land_slope * k.per_unit_energy * nk);
        if nk > 0.5 {
            land_terms.push(k.land_intercept);
        }
    }
    a.eq("land_use", &land_terms, 0.0);
    let flow = match inst.epsilon_water_basis {
        WaterBasis::Feed => &s.qf,
        WaterBasis::Permeate => &s.qp,
    };
    let mut water_terms: Vec<f64> = flow.iter().map(|q| q * dt).collect();
    water_terms.push(-sol.water_use);
    a.eq("water_use", &water_terms, 0.0);
    if let Some(e) = inst.epsilon_land {
        a.le("epsilon_land", &[sol.land_use], e);
    }
    if let Some(e) = inst.epsilon_water {
        a.le("epsilon_water", &[sol.water_use], e);
    }

    // Costs.
    let mut recomputed = Vec::new();
    for ((k, &nk), c) in inst.technologies.iter().zip(&n).zip(&sol.costs.technology) {
        let mut terms = vec![k.cost_slope * k.per_unit_energy * nk];
        if nk > 0.5 {
            terms.push(k.cost_intercept);
        }
        let total: f64 = terms.iter().sum();
        terms.push(-c.value);
        a.eq(format!("cost_technology[{}]", k.name), &terms, 0.0);
        recomputed.push(total);
    }
    for ((tech, st), c) in inst.storage_techs.iter().zip(&sol.storage).zip(&sol.costs.storage) {
        let capex = tech.capex_per_capacity * st.capacity / tech.lifespan_years;
        let opex = tech.opex_per_throughput * af * dt * st.discharge.iter().sum::<f64>();
        a.eq(format!("cost_storage[{}]", tech.name), &[capex, opex, -c.value], 0.0);
        recomputed.push(capex + opex);
    }
    let life = ro.plant_life_years;
    let inv = [ro.inv_cost_slope * sol.qp_capacity / life, ro.inv_cost_intercept / life];
    a.eq("cost_ro_investment", &[inv[0], inv[1], -sol.costs.ro_investment], 0.0);
    let op = ro.op_cost_per_m3 * af * dt * s.qp.iter().sum::<f64>();
    a.eq("cost_ro_operation", &[op, -sol.costs.ro_operation], 0.0);
    let tank = inst.water_tank;
    let tank_cost = [tank.cost_slope * sol.tank_volume / tank.life_years, tank.cost_intercept / tank.life_years];
    a.eq("cost_tank", &[tank_cost[0], tank_cost[1], -sol.costs.tank], 0.0);
    recomputed.extend(inv);
    recomputed.push(op);
    recomputed.extend(tank_cost);
    let recomputed_objective: f64 = recomputed.iter().sum();
    let mut obj_terms = recomputed.clone();
    obj_terms.push(-sol.objective);
    a.eq("objective", &obj_terms, 0.0);

    let pass = a.out.iter().all(|r| !r.flagged);
    Ok(ValidationReport {
        pass,
        tolerance: tol,
        residuals: a.out,
        recomputed_objective,
        reported_objective: sol.objective,
        max_ec_deviation: max_ec_dev,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologyEnergy {
    pub name: String,
    pub units: f64,
    /// n·Σ p(t)·Δt over the horizon [kWh].
    pub horizon_energy: f64,
    pub annual_energy: f64,
    pub energy_share: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostShare {
    pub component: String,
    pub cost: f64,
    /// Percent of the total.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyMix {
    pub technologies: Vec<TechnologyEnergy>,
    pub costs: Vec<CostShare>,
    pub total_cost: f64,
    pub total_annual_energy: f64,
}

/// Per-technology energy and cost shares (percent). Refuses solutions that
/// fail [`check_solution`] at `tol`.
pub fn energy_mix_report(inst: &NexusInstance, sol: &Solution, tol: f64) -> Result<EnergyMix, ValidationError> {
    let report = check_solution(inst, sol, tol)?;
    if !report.pass {
        return Err(ValidationError::Failed(report.flagged_names()));
    }
    let af = inst.grid.annualization();
    let dt = inst.grid.dt_hours;
    let mut techs: Vec<TechnologyEnergy> = inst
        .technologies
        .iter()
        .zip(&sol.unit_counts)
        .zip(&sol.costs.technology)
        .map(|((k, u), c)| {
            let horizon_energy = u.value * k.per_unit_profile.sum() * dt;
            TechnologyEnergy {
                name: k.name.clone(),
                units: u.value,
                horizon_energy,
                annual_energy: horizon_energy * af,
                energy_share: 0.0,
                cost: c.value,
            }
        })
        .collect();
    let total_energy: f64 = techs.iter().map(|t| t.annual_energy).sum();
    for t in &mut techs {
        t.energy_share = if total_energy > 0.0 { 100.0 * t.annual_energy / total_energy } else { 0.0 };
    }
    let c = &sol.costs;
    let mut costs: Vec<CostShare> = c
        .technology
        .iter()
        .chain(&c.storage)
        .map(|v| CostShare { component: v.name.clone(), cost: v.value, share: 0.0 })
        .collect();
    for (name, v) in [("ro_investment", c.ro_investment), ("ro_operation", c.ro_operation), ("water_tank", c.tank)] {
        costs.push(CostShare { component: name.into(), cost: v, share: 0.0 });
    }
    let total_cost: f64 = costs.iter().map(|c| c.cost).sum();
    for s in &mut costs {
        s.share = if total_cost != 0.0 { 100.0 * s.cost / total_cost } else { 0.0 };
    }
    Ok(EnergyMix { technologies: techs, costs, total_cost, total_annual_energy: total_energy })
}
