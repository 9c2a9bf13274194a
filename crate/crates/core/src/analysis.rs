//! Post-solve evaluation: transformer loading, reverse power flow, charging
//! cost, and side-by-side comparisons of work arrangements.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hosting::{
    build_problem, hosting_capacity_with, scenario_seed, FleetKind, HostingCapacityResult,
    HostingConfig, ScenarioPool, SearchConfig,
};
use crate::model::{CoordinationProblem, EvProfile, Formulation, ModelParams, TransformerCase};
use crate::solver::{solve_with, ChargingSchedule, SolveLimits, SolveStatus};
use crate::timegrid::{Day, ScheduleConfig, TimeGrid, WorkArrangement};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayBreakdown {
    pub day: Day,
    /// Energy drawn from the transformer by EV chargers (kWh).
    pub charging_energy_kwh: f64,
    pub reverse_flow_energy_kwh: f64,
    pub reverse_flow_slot_count: usize,
    pub peak_kw: f64,
    pub tariff_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadingReport {
    pub transformer_id: String,
    pub rated_kva: f64,
    pub ev_count: usize,
    pub household_load_kw: Vec<f64>,
    /// Household load plus every active charger.
    pub net_load_kw: Vec<f64>,
    pub peak_kw: f64,
    pub peak_slot: usize,
    pub peak_utilization: f64,
    /// Energy pushed back through the transformer (kWh).
    pub reverse_flow_energy_kwh: f64,
    pub reverse_flow_slot_count: usize,
    /// Tariff value of the delivered battery energy, without priority weights.
    pub tariff_cost: f64,
    /// Weighted objective the coordinator minimised.
    pub steered_objective: f64,
    pub per_day: Vec<DayBreakdown>,
}

impl LoadingReport {
    pub fn day(&self, day: Day) -> &DayBreakdown {
        &self.per_day[day.index()]
    }

    pub fn weekday_reverse_flow_kwh(&self) -> f64 {
        self.per_day
            .iter()
            .filter(|d| d.day.is_weekday())
            .map(|d| d.reverse_flow_energy_kwh)
            .sum()
    }

    pub fn weekend_reverse_flow_kwh(&self) -> f64 {
        self.per_day
            .iter()
            .filter(|d| d.day.is_weekend())
            .map(|d| d.reverse_flow_energy_kwh)
            .sum()
    }
}

/// Loading report of a charge matrix on a transformer.
pub fn evaluate(
    b: &[Vec<bool>],
    evs: &[EvProfile],
    case: &TransformerCase,
    grid: &TimeGrid,
    params: &ModelParams,
) -> Result<LoadingReport> {
    let nt = grid.slot_count();
    case.validate(nt)?;
    if b.len() != evs.len() {
        return Err(Error::Dimension(format!(
            "{} charge rows for {} EVs",
            b.len(),
            evs.len()
        )));
    }
    if let Some((v, row)) = b.iter().enumerate().find(|(_, r)| r.len() != nt) {
        return Err(Error::Dimension(format!(
            "charge row {v} has {} slots, expected {nt}",
            row.len()
        )));
    }
    if let Some(v) = evs.iter().position(|e| e.slot_count() != nt) {
        return Err(Error::Dimension(format!(
            "EV {v} profile does not span {nt} slots"
        )));
    }
    let u = params.charge_power_kw;
    let dt = grid.slot_duration_h;
    let e = params.slot_energy_kwh(grid);

    let active: Vec<usize> = (0..nt).map(|t| b.iter().filter(|r| r[t]).count()).collect();
    let net: Vec<f64> = (0..nt)
        .map(|t| case.household_load_kw[t] + u * active[t] as f64)
        .collect();
    let (peak_slot, peak_kw) =
        net.iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (t, x)| {
                if x > best.1 {
                    (t, x)
                } else {
                    best
                }
            });
    let mut tariff = vec![0.0; nt];
    let mut steered = 0.0;
    for (row, ev) in b.iter().zip(evs) {
        for t in (0..nt).filter(|&t| row[t]) {
            tariff[t] += e * ev.cost[t];
            steered += e * ev.cost[t] / ev.weight[t];
        }
    }
    let backfeed = |t: usize| (-net[t]).max(0.0) * dt;

    let per_day = Day::ALL
        .iter()
        .map(|&day| {
            let slots = grid.day_slots(day);
            DayBreakdown {
                day,
                charging_energy_kwh: slots.clone().map(|t| u * active[t] as f64 * dt).sum(),
                reverse_flow_energy_kwh: slots.clone().map(backfeed).sum(),
                reverse_flow_slot_count: slots.clone().filter(|&t| net[t] < 0.0).count(),
                peak_kw: slots
                    .clone()
                    .map(|t| net[t])
                    .fold(f64::NEG_INFINITY, f64::max),
                tariff_cost: slots.map(|t| tariff[t]).sum(),
            }
        })
        .collect();

    Ok(LoadingReport {
        transformer_id: case.transformer_id.clone(),
        rated_kva: case.rated_kva,
        ev_count: b.len(),
        household_load_kw: case.household_load_kw.clone(),
        peak_kw,
        peak_slot,
        peak_utilization: peak_kw / case.rated_kva,
        reverse_flow_energy_kwh: (0..nt).map(backfeed).sum(),
        reverse_flow_slot_count: net.iter().filter(|x| **x < 0.0).count(),
        tariff_cost: tariff.iter().sum(),
        steered_objective: steered,
        net_load_kw: net,
        per_day,
    })
}

/// Report of the transformer with no EVs connected.
pub fn base_report(
    case: &TransformerCase,
    grid: &TimeGrid,
    params: &ModelParams,
) -> Result<LoadingReport> {
    evaluate(&[], &[], case, grid, params)
}

/// Self-contained record of a solved schedule, enough to rebuild its report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub transformer_id: String,
    pub fleet: FleetKind,
    pub formulation: Formulation,
    pub status: SolveStatus,
    pub objective_value: f64,
    pub schedule_config: ScheduleConfig,
    pub params: ModelParams,
    pub arrangements: Vec<WorkArrangement>,
    /// One string per EV, `1` where the EV charges.
    pub charge: Vec<String>,
    pub drive: Vec<String>,
    /// Kept scenarios, `1` where kept; empty for the robust formulation.
    pub keep: String,
}

fn bits(row: &[bool]) -> String {
    row.iter().map(|x| if *x { '1' } else { '0' }).collect()
}

fn unbits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '1' => Ok(true),
            '0' => Ok(false),
            other => Err(Error::config(format!(
                "schedule strings hold only 0 and 1, found `{other}`"
            ))),
        })
        .collect()
}

impl ScheduleRecord {
    pub fn new(
        problem: &CoordinationProblem,
        schedule: &ChargingSchedule,
        fleet: FleetKind,
        status: SolveStatus,
        objective_value: f64,
        schedule_config: &ScheduleConfig,
    ) -> Self {
        ScheduleRecord {
            transformer_id: problem
                .transformer
                .as_ref()
                .map_or_else(String::new, |c| c.transformer_id.clone()),
            fleet,
            formulation: problem.formulation,
            status,
            objective_value,
            schedule_config: schedule_config.clone(),
            params: problem.params.clone(),
            arrangements: problem.evs.iter().map(|e| e.arrangement.clone()).collect(),
            charge: schedule.b.iter().map(|r| bits(r)).collect(),
            drive: schedule.d.iter().map(|r| bits(r)).collect(),
            keep: bits(&schedule.z),
        }
    }

    pub fn charge_matrix(&self) -> Result<Vec<Vec<bool>>> {
        self.charge.iter().map(|s| unbits(s)).collect()
    }

    pub fn drive_matrix(&self) -> Result<Vec<Vec<bool>>> {
        self.drive.iter().map(|s| unbits(s)).collect()
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        self.schedule_config.build_grid()
    }

    pub fn profiles(&self, grid: &TimeGrid) -> Result<Vec<EvProfile>> {
        self.arrangements
            .iter()
            .map(|a| EvProfile::new(grid, a, &self.schedule_config.weights))
            .collect()
    }

    /// Recomputes the loading report on `case`.
    pub fn evaluate(&self, case: &TransformerCase) -> Result<LoadingReport> {
        if !self.transformer_id.is_empty() && self.transformer_id != case.transformer_id {
            return Err(Error::config(format!(
                "schedule belongs to transformer {} but {} was given",
                self.transformer_id, case.transformer_id
            )));
        }
        let grid = self.grid()?;
        let evs = self.profiles(&grid)?;
        evaluate(&self.charge_matrix()?, &evs, case, &grid, &self.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub hosting: HostingConfig,
    pub ev_count: usize,
    pub formulation: Formulation,
    /// Limits of the cost-minimising solves.
    pub limits: SolveLimits,
    /// Also runs a hosting-capacity search per fleet when set.
    pub hc_search: Option<SearchConfig>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            hosting: HostingConfig::default(),
            ev_count: 4,
            formulation: Formulation::Robust,
            limits: SolveLimits {
                time_limit_s: 60.0,
                gap_tol: 1e-3,
                ..SolveLimits::default()
            },
            hc_search: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub fleet: FleetKind,
    pub status: Option<SolveStatus>,
    pub error: Option<String>,
    pub report: Option<LoadingReport>,
    pub record: Option<ScheduleRecord>,
    pub hc: Option<HostingCapacityResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub transformer_id: String,
    pub has_pv: bool,
    pub formulation: Formulation,
    pub ev_count: usize,
    pub base: LoadingReport,
    pub cells: Vec<ComparisonCell>,
}

impl Comparison {
    pub fn cell(&self, fleet: FleetKind) -> Option<&ComparisonCell> {
        self.cells.iter().find(|c| c.fleet == fleet)
    }

    pub fn report(&self, fleet: FleetKind) -> Option<&LoadingReport> {
        self.cell(fleet).and_then(|c| c.report.as_ref())
    }
}

/// Solves every fleet at a fixed EV count and lines the results up against
/// the no-EV base case. A cell that fails is marked and the rest continue.
pub fn compare_arrangements(case: &TransformerCase, cfg: &CompareConfig) -> Result<Comparison> {
    cfg.hosting.validate()?;
    if cfg.ev_count == 0 {
        return Err(Error::config("comparison needs at least one EV"));
    }
    let grid = Arc::new(cfg.hosting.schedule.build_grid()?);
    let base = base_report(case, &grid, &cfg.hosting.params)?;
    let max_ev = cfg
        .hc_search
        .map_or(cfg.ev_count, |s| s.max_ev.max(cfg.ev_count));
    let seed = scenario_seed(cfg.hosting.master_seed, &case.transformer_id);
    let pool = ScenarioPool::new(&cfg.hosting, cfg.formulation, max_ev, seed);
    let cells = FleetKind::ALL
        .iter()
        .map(|&fleet| compare_cell(&grid, case, fleet, &pool, cfg))
        .collect();
    Ok(Comparison {
        transformer_id: case.transformer_id.clone(),
        has_pv: case.has_pv,
        formulation: cfg.formulation,
        ev_count: cfg.ev_count,
        base,
        cells,
    })
}

fn compare_cell(
    grid: &Arc<TimeGrid>,
    case: &TransformerCase,
    fleet: FleetKind,
    pool: &ScenarioPool,
    cfg: &CompareConfig,
) -> ComparisonCell {
    let mut cell = ComparisonCell {
        fleet,
        status: None,
        error: None,
        report: None,
        record: None,
        hc: None,
    };
    let solved = (|| -> Result<()> {
        let problem = build_problem(grid, case, fleet, pool, cfg.ev_count, &cfg.hosting)?;
        let out = solve_with(cfg.hosting.backend, &problem, &cfg.limits)?;
        cell.status = Some(out.status);
        if let Some(schedule) = &out.schedule {
            cell.report = Some(evaluate(
                &schedule.b,
                &problem.evs,
                case,
                grid,
                &problem.params,
            )?);
            cell.record = Some(ScheduleRecord::new(
                &problem,
                schedule,
                fleet,
                out.status,
                out.objective_value,
                &cfg.hosting.schedule,
            ));
        }
        if let Some(search) = &cfg.hc_search {
            cell.hc = Some(hosting_capacity_with(
                grid,
                case,
                fleet,
                pool,
                &cfg.hosting,
                search,
            )?);
        }
        Ok(())
    })();
    if let Err(e) = solved {
        cell.error = Some(e.to_string());
    }
    cell
}

/// File stem `{transformer}_{arrangement}_{formulation}`.
pub fn artifact_stem(transformer_id: &str, arrangement: &str, formulation: Formulation) -> String {
    format!("{transformer_id}_{arrangement}_{}", formulation.label())
}

/// Delimited weekly series of one report.
pub fn series_csv(report: &LoadingReport, grid: &TimeGrid) -> String {
    let mut s = String::from("slot,day,hour,household_kw,net_load_kw\n");
    for t in 0..report.net_load_kw.len() {
        let _ = writeln!(
            s,
            "{t},{},{:.2},{:?},{:?}",
            grid.day_of(t),
            grid.hour_of(t),
            report.household_load_kw[t],
            report.net_load_kw[t]
        );
    }
    s
}

/// One row of metrics per curve in a comparison.
pub fn comparison_csv(cmp: &Comparison) -> String {
    let mut s = String::from(
        "arrangement,status,peak_kw,peak_utilization,reverse_flow_kwh,weekday_reverse_flow_kwh,reverse_flow_slots,tariff_cost,steered_objective\n",
    );
    let mut row = |name: &str, status: &str, r: Option<&LoadingReport>| match r {
        Some(r) => {
            let _ = writeln!(
                s,
                "{name},{status},{:.4},{:.4},{:.4},{:.4},{},{:.4},{:.6}",
                r.peak_kw,
                r.peak_utilization,
                r.reverse_flow_energy_kwh,
                r.weekday_reverse_flow_kwh(),
                r.reverse_flow_slot_count,
                r.tariff_cost,
                r.steered_objective
            );
        }
        None => {
            let _ = writeln!(s, "{name},{status},,,,,,,");
        }
    };
    row("base", "base", Some(&cmp.base));
    for c in &cmp.cells {
        let status = match (&c.error, c.status) {
            (Some(_), _) => "error",
            (None, Some(st)) => st.label(),
            (None, None) => "not_run",
        };
        row(c.fleet.label(), status, c.report.as_ref());
    }
    s
}

const CURVE_COLORS: [RGBColor; 5] = [
    RGBColor(90, 90, 90),
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
];

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Weekly load curves with the transformer rating as a dashed line.
pub fn plot_load_curves(
    path: &Path,
    title: &str,
    rated_kva: f64,
    dt_h: f64,
    curves: &[(&str, &[f64])],
) -> Result<()> {
    let lo = curves
        .iter()
        .flat_map(|(_, c)| c.iter())
        .copied()
        .fold(0.0, f64::min);
    let hi = curves
        .iter()
        .flat_map(|(_, c)| c.iter())
        .copied()
        .fold(rated_kva, f64::max);
    let len = curves.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    let hours = len as f64 * dt_h;
    let root = SVGBackend::new(path, (1200, 480)).into_drawing_area();
    let draw = || -> std::result::Result<(), Box<dyn std::error::Error + '_>> {
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(56)
            .build_cartesian_2d(0.0..hours.max(1.0), (lo * 1.1 - 1.0)..(hi * 1.1))?;
        chart
            .configure_mesh()
            .x_desc("hour of week")
            .y_desc("kW")
            .x_labels(15)
            .disable_x_mesh()
            .draw()?;
        chart.draw_series(DashedLineSeries::new(
            [(0.0, rated_kva), (hours, rated_kva)],
            6,
            4,
            BLACK.stroke_width(1),
        ))?;
        chart.draw_series(LineSeries::new([(0.0, 0.0), (hours, 0.0)], BLACK.mix(0.4)))?;
        for (k, (name, curve)) in curves.iter().enumerate() {
            let color = CURVE_COLORS[k % CURVE_COLORS.len()];
            chart
                .draw_series(LineSeries::new(
                    curve.iter().enumerate().map(|(t, y)| (t as f64 * dt_h, *y)),
                    color.stroke_width(1),
                ))?
                .label(*name)
                .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], color));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| plot_err(path, e))
}

/// Grouped bar chart of hosting capacity per transformer and fleet.
pub fn plot_hc_bars(path: &Path, title: &str, results: &[HostingCapacityResult]) -> Result<()> {
    let mut transformers: Vec<&str> = results.iter().map(|r| r.transformer_id.as_str()).collect();
    transformers.dedup();
    let fleets: Vec<FleetKind> = FleetKind::ALL
        .iter()
        .copied()
        .filter(|f| results.iter().any(|r| r.arrangement == *f))
        .collect();
    let top = results.iter().map(|r| r.hc).max().unwrap_or(0).max(1) as f64;
    let groups = transformers.len().max(1) as f64;
    let width = 1.0 / (fleets.len().max(1) as f64 + 1.0);
    let root = SVGBackend::new(path, (1000, 420)).into_drawing_area();
    let draw = || -> std::result::Result<(), Box<dyn std::error::Error + '_>> {
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(44)
            .build_cartesian_2d(0.0..groups, 0.0..top * 1.15)?;
        let names = transformers.clone();
        chart
            .configure_mesh()
            .disable_x_mesh()
            .x_labels(transformers.len() * 2 + 1)
            .x_label_formatter(&move |x| {
                let i = x.floor() as usize;
                if (x - i as f64 - 0.5).abs() < 1e-6 {
                    names.get(i).map_or_else(String::new, |s| s.to_string())
                } else {
                    String::new()
                }
            })
            .y_desc("EV hosting capacity")
            .draw()?;
        for (k, fleet) in fleets.iter().enumerate() {
            let color = CURVE_COLORS[(k + 1) % CURVE_COLORS.len()];
            let bars = transformers.iter().enumerate().filter_map(|(i, tid)| {
                let r = results
                    .iter()
                    .find(|r| r.transformer_id == *tid && r.arrangement == *fleet)?;
                let x0 = i as f64 + width * (k as f64 + 0.5);
                Some(Rectangle::new(
                    [(x0, 0.0), (x0 + width, r.hc as f64)],
                    color.filled(),
                ))
            });
            chart
                .draw_series(bars)?
                .label(fleet.label())
                .legend(move |(x, y)| {
                    Rectangle::new([(x, y - 5), (x + 12, y + 5)], color.filled())
                });
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| plot_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes one report as `.json`, `.csv`, and `.svg` under `stem`.
pub fn write_report(
    dir: &Path,
    stem: &str,
    report: &LoadingReport,
    grid: &TimeGrid,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(format!("{stem}.json"));
    let csv = dir.join(format!("{stem}.csv"));
    let svg = dir.join(format!("{stem}.svg"));
    write_text(&json, &serde_json::to_string_pretty(report)?)?;
    write_text(&csv, &series_csv(report, grid))?;
    let curves: Vec<(&str, &[f64])> = vec![
        ("household", report.household_load_kw.as_slice()),
        ("with EVs", report.net_load_kw.as_slice()),
    ];
    plot_load_curves(&svg, stem, report.rated_kva, grid.slot_duration_h, &curves)?;
    Ok(vec![json, csv, svg])
}

/// Writes every artifact of a comparison into `dir` and returns the paths.
pub fn write_comparison(dir: &Path, cmp: &Comparison, grid: &TimeGrid) -> Result<Vec<PathBuf>> {
    let mut written = write_report(
        dir,
        &artifact_stem(&cmp.transformer_id, "base", cmp.formulation),
        &cmp.base,
        grid,
    )?;
    for cell in &cmp.cells {
        let stem = artifact_stem(&cmp.transformer_id, cell.fleet.label(), cmp.formulation);
        if let Some(report) = &cell.report {
            written.extend(write_report(dir, &stem, report, grid)?);
        }
        if let Some(record) = &cell.record {
            let path = dir.join(format!("{stem}.schedule.json"));
            record.save(&path)?;
            written.push(path);
        }
    }
    let stem = artifact_stem(&cmp.transformer_id, "compare", cmp.formulation);
    let table = dir.join(format!("{stem}.csv"));
    write_text(&table, &comparison_csv(cmp))?;
    let mut curves: Vec<(&str, &[f64])> = vec![("base", cmp.base.net_load_kw.as_slice())];
    for cell in &cmp.cells {
        if let Some(r) = &cell.report {
            curves.push((cell.fleet.label(), r.net_load_kw.as_slice()));
        }
    }
    let svg = dir.join(format!("{stem}.svg"));
    let title = format!(
        "{} at {} EVs ({})",
        cmp.transformer_id,
        cmp.ev_count,
        cmp.formulation.label()
    );
    plot_load_curves(
        &svg,
        &title,
        cmp.base.rated_kva,
        grid.slot_duration_h,
        &curves,
    )?;
    let json = dir.join(format!("{stem}.json"));
    write_text(&json, &serde_json::to_string_pretty(cmp)?)?;
    written.extend([table, svg, json]);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::*;
    use crate::timegrid::WorkArrangement;

    fn pv_case(grid: &TimeGrid) -> TransformerCase {
        let mut case = flat_case(grid, 10.0);
        for t in 0..grid.slot_count() {
            if grid.slots[t].pv_window {
                case.household_load_kw[t] = -6.0;
            }
        }
        case.has_pv = true;
        case
    }

    #[test]
    fn base_report_counts_backfeed() {
        let grid = week_grid();
        let case = pv_case(&grid);
        let params = ModelParams::default();
        let r = base_report(&case, &grid, &params).unwrap();
        let pv_slots = grid.slots.iter().filter(|s| s.pv_window).count();
        assert_eq!(r.reverse_flow_slot_count, pv_slots);
        assert!((r.reverse_flow_energy_kwh - 6.0 * 0.25 * pv_slots as f64).abs() < 1e-9);
        assert_eq!(r.ev_count, 0);
        assert_eq!(r.tariff_cost, 0.0);
        assert!((r.peak_kw - 10.0).abs() < 1e-12);
        let daily: f64 = r.per_day.iter().map(|d| d.reverse_flow_energy_kwh).sum();
        assert!((daily - r.reverse_flow_energy_kwh).abs() < 1e-9);
    }

    #[test]
    fn charging_in_the_valley_reduces_backfeed() {
        let grid = week_grid();
        let case = pv_case(&grid);
        let params = ModelParams::default();
        let ev = EvProfile::new(&grid, &WorkArrangement::remote(), &Default::default()).unwrap();
        let row: Vec<bool> = (0..grid.slot_count())
            .map(|t| grid.slots[t].pv_window && ev.available[t])
            .collect();
        let r = evaluate(std::slice::from_ref(&row), std::slice::from_ref(&ev), &case, &grid, &params).unwrap();
        let base = base_report(&case, &grid, &params).unwrap();
        assert!(r.reverse_flow_energy_kwh < base.reverse_flow_energy_kwh);
        let e = params.slot_energy_kwh(&grid);
        let expect: f64 = (0..grid.slot_count())
            .filter(|&t| row[t])
            .map(|t| e * ev.cost[t])
            .sum();
        assert!((r.tariff_cost - expect).abs() < 1e-9);
        assert!(r.steered_objective < r.tariff_cost);
    }

    #[test]
    fn mismatched_rows_are_rejected() {
        let grid = week_grid();
        let case = flat_case(&grid, 10.0);
        let params = ModelParams::default();
        let ev = EvProfile::new(&grid, &WorkArrangement::remote(), &Default::default()).unwrap();
        assert!(matches!(
            evaluate(&[vec![false; 3]], std::slice::from_ref(&ev), &case, &grid, &params),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            evaluate(&[], &[ev], &case, &grid, &params),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn bit_strings_round_trip() {
        let row = vec![true, false, false, true];
        assert_eq!(unbits(&bits(&row)).unwrap(), row);
        assert!(unbits("01x").is_err());
    }
}
