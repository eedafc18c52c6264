//! Assembles a [`NexusInstance`] into a [`MilpModel`].
//!
//! Row families per step: unit output `P(t)`, energy adequacy, water balance,
//! tank dynamics and sizing, storage state of charge, and (per RO copy) the
//! recovery and permeate surrogates, the EC network and the capacity row.
//! In steady mode there is a single RO copy shared by every step.

use nexus_milp::{LinExpr, MilpModel, ModelError, ObjSense, RowId, Sense, SizeReport, VarId, VarSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{validate_instance, NexusInstance, SolveMode, Violation, WaterBasis};
use crate::surrogates::relu::{encode_relu_milp, ReluFragment};
use crate::surrogates::taylor::{build_qp_taylor, build_wr_sys_taylor, TaylorSurrogate};
use crate::surrogates::SurrogateError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("invalid instance: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("EC network inputs need finite bounds: {0}")]
    ReluBounds(SurrogateError),
    #[error("surrogate construction failed: {0}")]
    Surrogate(SurrogateError),
    #[error("{what} limit {limit} is below the analytic minimum {minimum}; the model is guaranteed infeasible")]
    GuaranteedInfeasible { what: &'static str, limit: f64, minimum: f64 },
    #[error("{0} limit must be > 0, got {1}")]
    NonPositiveEpsilon(&'static str, f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageHandles {
    pub capacity: VarId,
    /// `soc[0]` is the level before the first step.
    pub soc: Vec<VarId>,
    pub charge: Vec<VarId>,
    pub discharge: Vec<VarId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostHandles {
    pub technology: Vec<VarId>,
    pub storage: Vec<VarId>,
    pub ro_investment: VarId,
    pub ro_operation: VarId,
    pub tank: VarId,
}

impl CostHandles {
    pub fn all(&self) -> impl Iterator<Item = VarId> + '_ {
        self.technology
            .iter()
            .chain(&self.storage)
            .copied()
            .chain([self.ro_investment, self.ro_operation, self.tank])
    }
}

/// Variable handles of every modelled quantity.
///
/// RO vectors (`qf`, `wr`, `wr_sys`, `qp`, `ec`, pressures, fragments) hold
/// one entry per RO copy: one per step in full mode, one in steady mode. Use
/// [`Registry::ro`] to map a step to its copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub mode: SolveMode,
    pub steps: usize,
    pub power: Vec<VarId>,
    pub units: Vec<VarId>,
    pub exists: Vec<VarId>,
    pub storage: Vec<StorageHandles>,
    pub qf: Vec<VarId>,
    pub wr: Vec<[VarId; 3]>,
    pub wr_sys: Vec<VarId>,
    pub qp: Vec<VarId>,
    pub ec: Vec<VarId>,
    pub feed_pressure: Vec<[VarId; 3]>,
    pub retentate_pressure: Vec<[VarId; 3]>,
    #[serde(skip)]
    pub ec_fragments: Vec<ReluFragment>,
    pub q_stor: Vec<VarId>,
    pub q_rel: Vec<VarId>,
    /// `tank_level[0]` is V(0).
    pub tank_level: Vec<VarId>,
    pub tank_volume: VarId,
    pub qp_capacity: VarId,
    pub energy_sum: VarId,
    pub land_total: VarId,
    pub water_total: VarId,
    pub cost: CostHandles,
}

impl Registry {
    /// RO copy used at step `t`.
    pub fn ro(&self, t: usize) -> usize {
        match self.mode {
            SolveMode::Steady => 0,
            SolveMode::Full => t,
        }
    }

    /// Every handle in the registry, for liveness audits.
    pub fn all_handles(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = Vec::new();
        v.extend(&self.power);
        v.extend(&self.units);
        v.extend(&self.exists);
        for s in &self.storage {
            v.push(s.capacity);
            v.extend(&s.soc);
            v.extend(&s.charge);
            v.extend(&s.discharge);
        }
        v.extend(&self.qf);
        v.extend(self.wr.iter().flatten());
        v.extend(&self.wr_sys);
        v.extend(&self.qp);
        v.extend(&self.ec);
        v.extend(self.feed_pressure.iter().flatten());
        v.extend(self.retentate_pressure.iter().flatten());
        for f in &self.ec_fragments {
            v.extend(&f.hidden);
            v.extend(&f.binaries);
            v.extend(&f.outputs);
        }
        v.extend(&self.q_stor);
        v.extend(&self.q_rel);
        v.extend(&self.tank_level);
        v.extend([self.tank_volume, self.qp_capacity, self.energy_sum, self.land_total, self.water_total]);
        v.extend(self.cost.all());
        v
    }
}

#[derive(Debug, Clone)]
pub struct BuildArtifacts {
    pub model: MilpModel,
    pub registry: Registry,
    pub size: SizeReport,
    pub wr_sys_surrogate: TaylorSurrogate,
    pub qp_surrogate: TaylorSurrogate,
    /// Row holding `land ≤ ε_L`, when present.
    pub land_row: Option<RowId>,
    /// Row holding `water ≤ ε_W`, when present.
    pub water_row: Option<RowId>,
    /// Analytic lower bound of the water use in the current basis.
    pub min_water_use: f64,
    pub epsilon_land: Option<f64>,
    pub epsilon_water: Option<f64>,
}

fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

struct Builder<'a> {
    inst: &'a NexusInstance,
    m: MilpModel,
}

impl Builder<'_> {
    fn var(&mut self, spec: VarSpec) -> Result<VarId, BuildError> {
        Ok(self.m.add_variable(spec)?)
    }

    fn cont(&mut self, name: String, lo: f64, hi: f64) -> Result<VarId, BuildError> {
        self.var(VarSpec::continuous(name, lo, hi))
    }

    fn row(&mut self, e: LinExpr, sense: Sense, rhs: f64, name: String) -> Result<RowId, BuildError> {
        Ok(self.m.add_constraint(&e, sense, rhs, name)?)
    }
}

/// Builds the planning model for `inst`, including any ε limits it carries.
pub fn build(inst: &NexusInstance) -> Result<BuildArtifacts, BuildError> {
    validate_instance(inst).map_err(BuildError::Invalid)?;
    let steps = inst.grid.horizon_steps;
    let dt = inst.grid.dt_hours;
    let af = inst.grid.annualization();
    let ro = &inst.ro;
    let copies = match inst.mode {
        SolveMode::Steady => 1,
        SolveMode::Full => steps,
    };
    let mut b = Builder { inst, m: MilpModel::new(format!("nexus_{}", slug(&inst.name))) };

    // Technologies: unit counts and existence.
    let mut units = Vec::new();
    let mut exists = Vec::new();
    for k in &b.inst.technologies {
        let s = slug(&k.name);
        let n = b.var(VarSpec::integer(format!("n_{s}"), 0.0, k.max_units as f64))?;
        let y = b.var(VarSpec::binary(format!("y_{s}")))?;
        b.row(LinExpr::term(n, 1.0).add(y, -(k.max_units as f64)), Sense::Le, 0.0, format!("buy_{s}"))?;
        b.row(LinExpr::term(y, 1.0).add(n, -1.0), Sense::Le, 0.0, format!("exist_{s}"))?;
        // Investment decisions first: once they are integral the convex EC
        // network is usually exact in the relaxation and the rest is a dive.
        b.m.set_priority(y, 2)?;
        b.m.set_priority(n, 1)?;
        units.push(n);
        exists.push(y);
    }

    // RO operating copies.
    let wr_s = build_wr_sys_taylor(ro.nominal_point.stages()).map_err(BuildError::Surrogate)?;
    let qp_s = build_qp_taylor(ro.nominal_point.qp, ro.nominal_point.wr_sys).map_err(BuildError::Surrogate)?;
    let raw_bounds = ro.raw_input_bounds();
    let scaled_bounds: Vec<(f64, f64)> = raw_bounds
        .iter()
        .zip(&ro.ec_input_scaling)
        .map(|(&(lo, hi), s)| {
            let (a, c) = (s.apply(lo), s.apply(hi));
            (a.min(c), a.max(c))
        })
        .collect();
    let out_bounds = ro.ec_network.interval_bounds(&scaled_bounds).map_err(BuildError::ReluBounds)?;
    let (olo, ohi) = out_bounds.last().unwrap()[0];
    let (e1, e2) = (ro.ec_output_scaling.apply(olo), ro.ec_output_scaling.apply(ohi));
    let ec_bounds = (e1.min(e2), e1.max(e2));

    let mut reg_qf = Vec::new();
    let mut reg_wr = Vec::new();
    let mut reg_wrsys = Vec::new();
    let mut reg_qp = Vec::new();
    let mut reg_ec = Vec::new();
    let mut reg_pf = Vec::new();
    let mut reg_pr = Vec::new();
    let mut frags = Vec::new();
    for c in 0..copies {
        let tag = match inst.mode {
            SolveMode::Steady => "ss".to_string(),
            SolveMode::Full => format!("t{}", c + 1),
        };
        let qf = b.cont(format!("qf_{tag}"), ro.qf_bounds.0, ro.qf_bounds.1)?;
        let mut wr = [VarId(0); 3];
        for i in 0..3 {
            let (lo, hi) = ro.wr_stage_bounds[i];
            wr[i] = b.cont(format!("wr{}_{tag}", i + 1), lo, hi)?;
        }
        if ro.stage_affine_maps.len() == 3 {
            let mut pf = [VarId(0); 3];
            let mut pr = [VarId(0); 3];
            for (i, map) in ro.stage_affine_maps.iter().enumerate() {
                let (lo, hi) = map.feed_pressure_bounds;
                pf[i] = b.cont(format!("pfeed{}_{tag}", i + 1), lo, hi)?;
                pr[i] = b.cont(format!("pret{}_{tag}", i + 1), f64::NEG_INFINITY, f64::INFINITY)?;
                b.row(LinExpr::term(wr[i], 1.0).add(pf[i], -map.recovery_slope), Sense::Eq, map.recovery_offset, format!("stagewr{}_{tag}", i + 1))?;
                b.row(LinExpr::term(pr[i], 1.0).add(pf[i], -map.retentate_slope), Sense::Eq, map.retentate_offset, format!("stagepr{}_{tag}", i + 1))?;
            }
            reg_pf.push(pf);
            reg_pr.push(pr);
        }
        // Recovery floor as a bound.
        let wrsys = b.cont(format!("wrsys_{tag}"), ro.wr_limit, 1.0)?;
        let mut e = LinExpr::term(wrsys, 1.0);
        for i in 0..3 {
            e.push(wr[i], -wr_s.gradient[i]);
        }
        b.row(e, Sense::Eq, wr_s.intercept(), format!("wrsys_def_{tag}"))?;
        let qp = b.cont(format!("qp_{tag}"), 0.0, f64::INFINITY)?;
        b.row(
            LinExpr::term(qp, 1.0).add(wrsys, -qp_s.gradient[0]).add(qf, -qp_s.gradient[1]),
            Sense::Eq,
            qp_s.intercept(),
            format!("qp_def_{tag}"),
        )?;
        let raw = [wr[0], wr[1], wr[2], qf];
        let inputs: Vec<LinExpr> = raw
            .iter()
            .zip(&ro.ec_input_scaling)
            .map(|(&v, s)| LinExpr::term(v, s.scale).add_constant(s.offset))
            .collect();
        let frag = encode_relu_milp(&mut b.m, &ro.ec_network, &inputs, &scaled_bounds, &format!("ec_{tag}"))
            .map_err(BuildError::ReluBounds)?;
        let ec = b.cont(format!("ec_{tag}"), ec_bounds.0, ec_bounds.1)?;
        b.row(
            LinExpr::term(ec, 1.0).add(frag.output(), -ro.ec_output_scaling.scale),
            Sense::Eq,
            ro.ec_output_scaling.offset,
            format!("ec_def_{tag}"),
        )?;
        reg_qf.push(qf);
        reg_wr.push(wr);
        reg_wrsys.push(wrsys);
        reg_qp.push(qp);
        reg_ec.push(ec);
        frags.push(frag);
    }
    let ro_of = |t: usize| if copies == 1 { 0 } else { t };

    // Energy storage.
    let mut storage = Vec::new();
    for s in &inst.storage_techs {
        let sl = slug(&s.name);
        let cap = b.cont(format!("cap_{sl}"), 0.0, s.max_capacity.unwrap_or(f64::INFINITY))?;
        let soc0 = b.cont(format!("soc_{sl}_t0"), 0.0, if s.initial_level_free { f64::INFINITY } else { 0.0 })?;
        if s.initial_level_free {
            b.row(LinExpr::term(soc0, 1.0).add(cap, -1.0), Sense::Le, 0.0, format!("socmax_{sl}_t0"))?;
        }
        let mut h = StorageHandles { capacity: cap, soc: vec![soc0], charge: Vec::new(), discharge: Vec::new() };
        for t in 1..=steps {
            h.charge.push(b.cont(format!("pstor_{sl}_t{t}"), 0.0, f64::INFINITY)?);
            h.discharge.push(b.cont(format!("prel_{sl}_t{t}"), 0.0, f64::INFINITY)?);
            h.soc.push(b.cont(format!("soc_{sl}_t{t}"), 0.0, f64::INFINITY)?);
            let (soc, prev, ch, dis) = (h.soc[t], h.soc[t - 1], h.charge[t - 1], h.discharge[t - 1]);
            b.row(
                LinExpr::term(soc, 1.0).add(prev, -1.0).add(ch, -s.efficiency * dt).add(dis, dt),
                Sense::Eq,
                0.0,
                format!("soc_{sl}_t{t}"),
            )?;
            b.row(LinExpr::term(soc, 1.0).add(cap, -1.0), Sense::Le, 0.0, format!("socmax_{sl}_t{t}"))?;
        }
        b.row(LinExpr::term(h.discharge[0], dt).add(h.soc[1], -1.0), Sense::Le, 0.0, format!("socfirst_{sl}"))?;
        b.row(LinExpr::term(h.soc[1], 1.0).add(h.soc[steps], -1.0), Sense::Le, 0.0, format!("soccycle_{sl}"))?;
        if s.initial_level_free && s.cyclic_initial_level {
            b.row(LinExpr::term(h.soc[0], 1.0).add(h.soc[steps], -1.0), Sense::Le, 0.0, format!("socwrap_{sl}"))?;
        }
        storage.push(h);
    }

    // Generation and energy balances.
    let mut power = Vec::new();
    let mut net_sum = LinExpr::new();
    for t in 0..steps {
        let p = b.cont(format!("p_t{}", t + 1), 0.0, f64::INFINITY)?;
        let mut def = LinExpr::term(p, 1.0);
        for (k, &n) in inst.technologies.iter().zip(&units) {
            def.push(n, -k.per_unit_profile[t]);
        }
        b.row(def, Sense::Eq, 0.0, format!("gen_t{}", t + 1))?;
        let mut net = LinExpr::term(p, 1.0).add(reg_ec[ro_of(t)], -1.0);
        for h in &storage {
            net.push(h.discharge[t], 1.0);
            net.push(h.charge[t], -1.0);
        }
        net_sum = net_sum.add_scaled(&net, dt);
        b.row(net, Sense::Ge, inst.demands.power_at(t), format!("energy_t{}", t + 1))?;
        power.push(p);
    }
    let energy_sum = b.cont("energy_sum".into(), f64::NEG_INFINITY, f64::INFINITY)?;
    b.row(LinExpr::term(energy_sum, 1.0).add_scaled(&net_sum, -1.0), Sense::Eq, 0.0, "energy_sum_def".into())?;
    b.row(LinExpr::term(energy_sum, 1.0), Sense::Ge, inst.demands.power_total_target, "energy_target".into())?;

    // Water balance and tank.
    let tank = inst.water_tank;
    let vt = b.cont("tank_volume".into(), 0.0, f64::INFINITY)?;
    let v0 = b.cont("v_t0".into(), 0.0, if tank.initial_level_free { f64::INFINITY } else { 0.0 })?;
    if tank.initial_level_free {
        b.row(LinExpr::term(v0, 1.0).add(vt, -1.0), Sense::Le, 0.0, "vmax_t0".into())?;
    }
    let biomass = inst.biomass_index().map(|k| (units[k], &inst.biomass.as_ref().unwrap().water_per_unit));
    let mut q_stor = Vec::new();
    let mut q_rel = Vec::new();
    let mut level = vec![v0];
    for t in 0..steps {
        let tag = t + 1;
        let qs = b.cont(format!("qstor_t{tag}"), 0.0, f64::INFINITY)?;
        let qr = b.cont(format!("qrel_t{tag}"), 0.0, f64::INFINITY)?;
        let v = b.cont(format!("v_t{tag}"), 0.0, f64::INFINITY)?;
        // Permeate covers demand plus net inflow to the tank.
        let mut bal = LinExpr::term(reg_qp[ro_of(t)], 1.0).add(qs, -1.0).add(qr, 1.0);
        if let Some((n, w)) = biomass {
            bal.push(n, -w[t]);
        }
        b.row(bal, Sense::Eq, inst.demands.water_at(t), format!("water_t{tag}"))?;
        b.row(LinExpr::term(v, 1.0).add(level[t], -1.0).add(qs, -dt).add(qr, dt), Sense::Eq, 0.0, format!("tank_t{tag}"))?;
        b.row(LinExpr::term(v, 1.0).add(vt, -1.0), Sense::Le, 0.0, format!("vmax_t{tag}"))?;
        q_stor.push(qs);
        q_rel.push(qr);
        level.push(v);
    }
    b.row(LinExpr::term(q_rel[0], dt).add(level[1], -1.0), Sense::Le, 0.0, "tank_first".into())?;
    b.row(LinExpr::term(level[1], 1.0).add(level[steps], -1.0), Sense::Le, 0.0, "tank_cycle".into())?;
    if tank.initial_level_free && tank.cyclic_initial_level {
        b.row(LinExpr::term(level[0], 1.0).add(level[steps], -1.0), Sense::Le, 0.0, "tank_wrap".into())?;
    }

    let qcap = b.cont("qp_capacity".into(), 0.0, f64::INFINITY)?;
    for (c, &qp) in reg_qp.iter().enumerate() {
        b.row(LinExpr::term(qcap, 1.0).add(qp, -1.0), Sense::Ge, 0.0, format!("qpcap_{}", c + 1))?;
    }

    // Land and water totals.
    let land_total = b.cont("land_total".into(), f64::NEG_INFINITY, f64::INFINITY)?;
    let mut land = LinExpr::term(land_total, 1.0);
    for ((k, &n), &y) in inst.technologies.iter().zip(&units).zip(&exists) {
        land.push(n, -k.land_slope * k.per_unit_energy);
        land.push(y, -k.land_intercept);
    }
    b.row(land, Sense::Eq, 0.0, "land_def".into())?;
    let water_total = b.cont("water_total".into(), f64::NEG_INFINITY, f64::INFINITY)?;
    let flows = match inst.epsilon_water_basis {
        WaterBasis::Feed => &reg_qf,
        WaterBasis::Permeate => &reg_qp,
    };
    let per_copy = dt * (steps / copies) as f64;
    let mut water = LinExpr::term(water_total, 1.0);
    for &q in flows {
        water.push(q, -per_copy);
    }
    b.row(water, Sense::Eq, 0.0, "water_def".into())?;

    // Annualized cost components.
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let mut tech_cost = Vec::new();
    for ((k, &n), &y) in inst.technologies.iter().zip(&units).zip(&exists) {
        let c = b.cont(format!("cost_tech_{}", slug(&k.name)), free.0, free.1)?;
        b.row(
            LinExpr::term(c, 1.0).add(n, -k.cost_slope * k.per_unit_energy).add(y, -k.cost_intercept),
            Sense::Eq,
            0.0,
            format!("cost_tech_{}_def", slug(&k.name)),
        )?;
        tech_cost.push(c);
    }
    let mut stor_cost = Vec::new();
    for (s, h) in inst.storage_techs.iter().zip(&storage) {
        let c = b.cont(format!("cost_stor_{}", slug(&s.name)), free.0, free.1)?;
        let mut e = LinExpr::term(c, 1.0).add(h.capacity, -s.capex_per_capacity / s.lifespan_years);
        for &d in &h.discharge {
            e.push(d, -s.opex_per_throughput * af * dt);
        }
        b.row(e, Sense::Eq, 0.0, format!("cost_stor_{}_def", slug(&s.name)))?;
        stor_cost.push(c);
    }
    let life = ro.plant_life_years;
    let ro_inv = b.cont("cost_ro_inv".into(), free.0, free.1)?;
    b.row(LinExpr::term(ro_inv, 1.0).add(qcap, -ro.inv_cost_slope / life), Sense::Eq, ro.inv_cost_intercept / life, "cost_ro_inv_def".into())?;
    let ro_op = b.cont("cost_ro_op".into(), free.0, free.1)?;
    let mut e = LinExpr::term(ro_op, 1.0);
    for &qp in &reg_qp {
        e.push(qp, -ro.op_cost_per_m3 * af * per_copy);
    }
    b.row(e, Sense::Eq, 0.0, "cost_ro_op_def".into())?;
    let tank_cost = b.cont("cost_tank".into(), free.0, free.1)?;
    b.row(
        LinExpr::term(tank_cost, 1.0).add(vt, -tank.cost_slope / tank.life_years),
        Sense::Eq,
        tank.cost_intercept / tank.life_years,
        "cost_tank_def".into(),
    )?;
    let cost = CostHandles { technology: tech_cost, storage: stor_cost, ro_investment: ro_inv, ro_operation: ro_op, tank: tank_cost };
    let obj = LinExpr::from_terms(cost.all().map(|v| (v, 1.0)));
    b.m.set_objective(ObjSense::Minimize, &obj)?;

    let registry = Registry {
        mode: inst.mode,
        steps,
        power,
        units,
        exists,
        storage,
        qf: reg_qf,
        wr: reg_wr,
        wr_sys: reg_wrsys,
        qp: reg_qp,
        ec: reg_ec,
        feed_pressure: reg_pf,
        retentate_pressure: reg_pr,
        ec_fragments: frags,
        q_stor,
        q_rel,
        tank_level: level,
        tank_volume: vt,
        qp_capacity: qcap,
        energy_sum,
        land_total,
        water_total,
        cost,
    };
    let min_water_use = minimum_water_use(inst, &wr_s, &qp_s);
    let size = b.m.size_report();
    let mut art = BuildArtifacts {
        model: b.m,
        registry,
        size,
        wr_sys_surrogate: wr_s,
        qp_surrogate: qp_s,
        land_row: None,
        water_row: None,
        min_water_use,
        epsilon_land: None,
        epsilon_water: None,
    };
    apply_epsilon(&mut art, inst.epsilon_land, inst.epsilon_water)?;
    Ok(art)
}

/// Lower bound on the water use in the instance's basis, from the permeate
/// surrogate, the recovery box and the water balance. A free initial tank
/// level can cover at most the first step's demand, and nothing when the
/// tank must end at least as full as it started.
pub fn minimum_water_use(inst: &NexusInstance, wr_s: &TaylorSurrogate, qp_s: &TaylorSurrogate) -> f64 {
    let steps = inst.grid.horizon_steps;
    let dt = inst.grid.dt_hours;
    let copies = if inst.mode == SolveMode::Steady { 1.0 } else { steps as f64 };
    let per_copy = dt * steps as f64 / copies;
    let ro = &inst.ro;
    let demand: f64 = (0..steps).map(|t| inst.demands.water_at(t) * dt).sum();
    let tank = &inst.water_tank;
    let drain = if tank.initial_level_free && !tank.cyclic_initial_level { inst.demands.water_at(0) * dt } else { 0.0 };
    let permeate_needed = (demand - drain).max(0.0);
    // Recovery range the surrogate allows inside the stage box.
    let (mut wr_min, mut wr_max) = (wr_s.value_at_point, wr_s.value_at_point);
    for i in 0..3 {
        let g = wr_s.gradient[i];
        let (lo, hi) = ro.wr_stage_bounds[i];
        let (d_lo, d_hi) = (g * (lo - wr_s.expansion_point[i]), g * (hi - wr_s.expansion_point[i]));
        wr_min += d_lo.min(d_hi);
        wr_max += d_lo.max(d_hi);
    }
    let wr_min = wr_min.max(ro.wr_limit);
    let wr_max = wr_max.min(1.0);
    let (a, bq, c) = (qp_s.gradient[0], qp_s.gradient[1], qp_s.intercept());
    let qp_floor = (a * wr_min + bq * ro.qf_bounds.0 + c).max(0.0);
    match inst.epsilon_water_basis {
        WaterBasis::Permeate => permeate_needed.max(qp_floor * per_copy * copies),
        WaterBasis::Feed => {
            let total_hours = dt * steps as f64;
            let by_balance = (permeate_needed - total_hours * (a * wr_max + c)) / bq;
            (ro.qf_bounds.0 * total_hours).max(by_balance)
        }
    }
}

/// Sets the ε limits, replacing any previous ones. `None` or `+∞` removes the
/// corresponding row.
pub fn apply_epsilon(art: &mut BuildArtifacts, epsilon_land: Option<f64>, epsilon_water: Option<f64>) -> Result<(), BuildError> {
    let land = epsilon_land.filter(|e| *e != f64::INFINITY);
    let water = epsilon_water.filter(|e| *e != f64::INFINITY);
    if let Some(e) = land {
        if !(e > 0.0) {
            return Err(BuildError::NonPositiveEpsilon("land", e));
        }
    }
    if let Some(e) = water {
        if !(e > 0.0) {
            return Err(BuildError::NonPositiveEpsilon("water", e));
        }
        if e < art.min_water_use * (1.0 - 1e-9) {
            return Err(BuildError::GuaranteedInfeasible { what: "water", limit: e, minimum: art.min_water_use });
        }
    }
    let land_var = art.registry.land_total;
    let water_var = art.registry.water_total;
    set_limit(&mut art.model, &mut art.land_row, land_var, land, "eps_land")?;
    set_limit(&mut art.model, &mut art.water_row, water_var, water, "eps_water")?;
    art.epsilon_land = land;
    art.epsilon_water = water;
    art.size = art.model.size_report();
    Ok(())
}

fn set_limit(model: &mut MilpModel, row: &mut Option<RowId>, var: VarId, limit: Option<f64>, name: &str) -> Result<(), BuildError> {
    match (limit, *row) {
        (Some(e), Some(r)) => model.replace_constraint(r, &LinExpr::term(var, 1.0), Sense::Le, e)?,
        (Some(e), None) => *row = Some(model.add_constraint(&LinExpr::term(var, 1.0), Sense::Le, e, name)?),
        (None, Some(r)) => {
            model.remove_constraint(r)?;
            *row = None;
        }
        (None, None) => {}
    }
    Ok(())
}
