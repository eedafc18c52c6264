//! Result files: JSON documents, one CSV per series, and plot tables.

use std::io;
use std::path::Path;

use nexus_core::config::write_series_csv;
use nexus_core::instance::TimeSeries;
use nexus_core::solution::Solution;
use nexus_core::surrogates::FitReport;
use nexus_core::sweep::SweepTable;
use nexus_core::validator::EnergyMix;
use serde::Serialize;

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()
}

/// `series/<name>.csv` for every trajectory. Step series are indexed from 1,
/// level series (tank, state of charge) from 0.
pub fn write_series(out: &Path, sol: &Solution) -> io::Result<()> {
    let dir = out.join("series");
    std::fs::create_dir_all(&dir)?;
    let s = &sol.series;
    let mut files: Vec<(String, &[f64], usize)> = vec![
        ("power".into(), &s.power, 1),
        ("ec".into(), &s.ec, 1),
        ("qf".into(), &s.qf, 1),
        ("qp".into(), &s.qp, 1),
        ("wr1".into(), &s.wr1, 1),
        ("wr2".into(), &s.wr2, 1),
        ("wr3".into(), &s.wr3, 1),
        ("wr_sys".into(), &s.wr_sys, 1),
        ("q_stor".into(), &s.q_stor, 1),
        ("q_rel".into(), &s.q_rel, 1),
        ("tank_level".into(), &s.tank_level, 0),
    ];
    for st in &sol.storage {
        files.push((format!("soc_{}", st.name), &st.soc, 0));
        files.push((format!("charge_{}", st.name), &st.charge, 1));
        files.push((format!("discharge_{}", st.name), &st.discharge, 1));
    }
    for (name, values, first) in files {
        let text = if first == 0 {
            write_series_csv(&TimeSeries(values.to_vec()), &name)
        } else {
            let mut t = format!("index,{name}\n");
            for (i, v) in values.iter().enumerate() {
                t.push_str(&format!("{},{v}\n", i + first));
            }
            t
        };
        std::fs::write(dir.join(format!("{name}.csv")), text)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MixRow<'a> {
    category: &'a str,
    name: &'a str,
    value: f64,
    share_percent: f64,
}

/// Per-technology annual energy and per-component annual cost with shares,
/// plus `costs.csv` with the cost rows alone.
pub fn write_mix(out: &Path, mix: &EnergyMix) -> io::Result<()> {
    let energy = mix.technologies.iter().map(|t| MixRow {
        category: "energy_kwh_per_year",
        name: &t.name,
        value: t.annual_energy,
        share_percent: t.energy_share,
    });
    let cost = mix.costs.iter().map(|c| MixRow {
        category: "cost_usd_per_year",
        name: &c.component,
        value: c.cost,
        share_percent: c.share,
    });
    write_rows(&out.join("energy_mix_plot.csv"), energy.chain(cost))?;
    write_rows(
        &out.join("costs.csv"),
        mix.costs.iter().map(|c| MixRow { category: "cost_usd_per_year", name: &c.component, value: c.cost, share_percent: c.share }),
    )
}

/// Tank level per hour, one column per labelled solution.
pub fn write_tank_plot(path: &Path, dt_hours: f64, columns: &[(&str, &Solution)]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["hour".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    let len = columns.iter().map(|(_, s)| s.series.tank_level.len()).max().unwrap_or(0);
    for t in 0..len {
        let mut rec = vec![(t as f64 * dt_hours).to_string()];
        rec.extend(columns.iter().map(|(_, s)| s.series.tank_level.get(t).map_or(String::new(), f64::to_string)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()
}

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    land_fraction: f64,
    water_fraction: f64,
    epsilon_land: f64,
    epsilon_water: f64,
    status: String,
    objective: Option<f64>,
    validator_pass: Option<bool>,
    note: Option<&'a str>,
}

pub fn write_sweep(path: &Path, table: &SweepTable) -> io::Result<()> {
    write_rows(
        path,
        table.rows.iter().map(|r| SweepCsvRow {
            land_fraction: r.land_fraction,
            water_fraction: r.water_fraction,
            epsilon_land: r.epsilon_land,
            epsilon_water: r.epsilon_water,
            status: format!("{:?}", r.status).to_lowercase(),
            objective: r.objective.is_finite().then_some(r.objective),
            validator_pass: r.validator_pass,
            note: r.note.as_deref(),
        }),
    )
}

#[derive(Serialize)]
struct LineRow<'a> {
    technology: &'a str,
    cost_slope: f64,
    cost_intercept: f64,
    land_slope: f64,
    land_intercept: f64,
    r_squared_cost: f64,
    r_squared_land: f64,
    per_unit_energy: f64,
}

#[derive(Serialize)]
struct PointRow<'a> {
    technology: &'a str,
    target_kwh: f64,
    units: u32,
    cost: f64,
    land: f64,
    fleet_energy_kwh: f64,
}

pub fn write_fits(out: &Path, fits: &[FitReport]) -> io::Result<()> {
    write_json(&out.join("surrogates.json"), &fits)?;
    write_rows(
        &out.join("surrogates.csv"),
        fits.iter().map(|f| {
            let s = &f.surrogate;
            LineRow {
                technology: &s.name,
                cost_slope: s.cost_slope,
                cost_intercept: s.cost_intercept,
                land_slope: s.land_slope,
                land_intercept: s.land_intercept,
                r_squared_cost: s.r_squared_cost,
                r_squared_land: s.r_squared_land,
                per_unit_energy: s.per_unit_energy,
            }
        }),
    )?;
    write_rows(
        &out.join("fit_points.csv"),
        fits.iter().flat_map(|f| {
            f.points.iter().map(move |p| PointRow {
                technology: &f.surrogate.name,
                target_kwh: p.target,
                units: p.units,
                cost: p.cost,
                land: p.land,
                fleet_energy_kwh: p.fleet_energy,
            })
        }),
    )
}
