//! Weekly EV charging coordination problems.
//!
//! A [`CoordinationProblem`] is assembled family by family: each `add_*`
//! operation registers one group of constraints. The full MILP over charge
//! (`b`), drive (`d`), session-start (`f`), scenario-keep (`z`), and SoC
//! trajectory variables is materialized on demand by [`CoordinationProblem::milp`];
//! solvers work on the equivalent reduced form from [`compact`].

pub mod compact;
pub mod lp;
pub mod milp;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Scenario, UncertaintyConfig};
use crate::timegrid::{
    assign_priorities_with, availability_mask, ArrangementKind, Day, PriorityClass,
    PriorityWeights, TimeGrid, WorkArrangement,
};

pub use milp::{Milp, Row, RowKind, Sense, VarKind, VarRole, Variable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    Robust,
    ChanceConstrained,
}

impl Formulation {
    pub const ALL: [Formulation; 2] = [Formulation::Robust, Formulation::ChanceConstrained];

    pub fn label(self) -> &'static str {
        match self {
            Formulation::Robust => "robust",
            Formulation::ChanceConstrained => "cc",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "robust" => Ok(Formulation::Robust),
            "cc" | "chance" | "chance-constrained" => Ok(Formulation::ChanceConstrained),
            other => Err(Error::config(format!("unknown formulation `{other}`"))),
        }
    }
}

/// Charger, battery-rule, and session-structure constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub charge_power_kw: f64,
    pub efficiency: f64,
    pub soc_floor_frac: f64,
    pub min_charge_slots: usize,
    pub min_drive_slots: usize,
    pub max_daily_drive_slots: usize,
    pub max_daily_charge_starts: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::from_uncertainty(&UncertaintyConfig::default())
    }
}

impl ModelParams {
    pub fn from_uncertainty(cfg: &UncertaintyConfig) -> Self {
        ModelParams {
            charge_power_kw: cfg.charge_power_kw,
            efficiency: cfg.efficiency,
            soc_floor_frac: cfg.soc_floor_frac,
            min_charge_slots: 4,
            min_drive_slots: 4,
            max_daily_drive_slots: 8,
            max_daily_charge_starts: 3,
        }
    }

    /// Battery energy gained from one slot of charging.
    pub fn slot_energy_kwh(&self, grid: &TimeGrid) -> f64 {
        self.charge_power_kw * self.efficiency * grid.slot_duration_h
    }
}

/// Per-EV slot data derived from its work arrangement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvProfile {
    pub arrangement: WorkArrangement,
    pub class: Vec<PriorityClass>,
    pub weight: Vec<f64>,
    pub cost: Vec<f64>,
    pub available: Vec<bool>,
    pub driving: Vec<bool>,
}

impl EvProfile {
    pub fn new(
        grid: &TimeGrid,
        arrangement: &WorkArrangement,
        weights: &PriorityWeights,
    ) -> Result<Self> {
        arrangement.validate()?;
        let tagged = assign_priorities_with(grid, arrangement, weights);
        Ok(EvProfile {
            arrangement: arrangement.clone(),
            class: tagged.slots.iter().map(|s| s.priority_class).collect(),
            weight: tagged.slots.iter().map(|s| s.weight).collect(),
            cost: tagged.slots.iter().map(|s| s.cost_per_kwh).collect(),
            available: availability_mask(grid, arrangement),
            driving: arrangement.driving_mask(grid),
        })
    }

    pub fn kind(&self) -> ArrangementKind {
        self.arrangement.kind
    }

    pub fn slot_count(&self) -> usize {
        self.class.len()
    }

    pub fn drive_slots(&self) -> usize {
        self.driving.iter().filter(|d| **d).count()
    }
}

/// One distribution transformer and its aggregated household net load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformerCase {
    pub transformer_id: String,
    pub rated_kva: f64,
    pub household_load_kw: Vec<f64>,
    pub has_pv: bool,
    pub customer_count: usize,
}

impl TransformerCase {
    pub fn validate(&self, slot_count: usize) -> Result<()> {
        if self.household_load_kw.len() != slot_count {
            return Err(Error::Dimension(format!(
                "transformer {} has {} load points, grid has {slot_count}",
                self.transformer_id,
                self.household_load_kw.len()
            )));
        }
        if !self.has_pv {
            if let Some(t) = self.household_load_kw.iter().position(|h| *h < 0.0) {
                return Err(Error::config(format!(
                    "transformer {} has negative load at slot {t} but no PV",
                    self.transformer_id
                )));
            }
        }
        if !(self.rated_kva >= 0.0) {
            return Err(Error::config(format!(
                "transformer {} has invalid rating {}",
                self.transformer_id, self.rated_kva
            )));
        }
        Ok(())
    }

    /// First slot whose household load alone exceeds the rating.
    pub fn base_overload(&self) -> Option<usize> {
        self.household_load_kw
            .iter()
            .position(|h| *h > self.rated_kva + 1e-9)
    }
}

/// Scenario data attached by one of the energy-constraint operations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBlock {
    pub scenarios: Vec<Scenario>,
    /// Allowed violation probability; zero for the robust formulation.
    pub epsilon: f64,
    pub big_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinationProblem {
    pub grid: Arc<TimeGrid>,
    pub params: ModelParams,
    pub evs: Vec<EvProfile>,
    pub formulation: Formulation,
    pub transformer: Option<TransformerCase>,
    pub energy: Option<EnergyBlock>,
    pub has_objective: bool,
    pub has_priority: bool,
    pub has_duration_switch: bool,
    pub driving_fixed: bool,
}

impl CoordinationProblem {
    pub fn new(
        grid: Arc<TimeGrid>,
        params: ModelParams,
        evs: Vec<EvProfile>,
        formulation: Formulation,
    ) -> Result<Self> {
        let n = grid.slot_count();
        for (v, ev) in evs.iter().enumerate() {
            let lens = [
                ev.class.len(),
                ev.weight.len(),
                ev.cost.len(),
                ev.available.len(),
                ev.driving.len(),
            ];
            if lens.iter().any(|&l| l != n) {
                return Err(Error::Dimension(format!(
                    "EV {v} profile lengths {lens:?} do not match {n} slots"
                )));
            }
            if ev.weight.iter().any(|w| !(*w > 0.0)) {
                return Err(Error::config(format!(
                    "EV {v} has a non-positive slot weight"
                )));
            }
        }
        if params.min_charge_slots == 0 || params.min_drive_slots == 0 {
            return Err(Error::config(
                "minimum run lengths must be at least one slot",
            ));
        }
        Ok(CoordinationProblem {
            grid,
            params,
            evs,
            formulation,
            transformer: None,
            energy: None,
            has_objective: false,
            has_priority: false,
            has_duration_switch: false,
            driving_fixed: false,
        })
    }

    pub fn ev_count(&self) -> usize {
        self.evs.len()
    }

    pub fn slot_count(&self) -> usize {
        self.grid.slot_count()
    }

    pub fn scenarios(&self) -> &[Scenario] {
        self.energy.as_ref().map_or(&[], |e| e.scenarios.as_slice())
    }

    pub fn scenario_count(&self) -> usize {
        self.scenarios().len()
    }

    pub fn epsilon(&self) -> f64 {
        self.energy.as_ref().map_or(0.0, |e| e.epsilon)
    }

    pub fn slot_energy_kwh(&self) -> f64 {
        self.params.slot_energy_kwh(&self.grid)
    }

    /// Minimum number of scenarios that must be kept.
    pub fn required_scenarios(&self) -> usize {
        match self.formulation {
            Formulation::Robust => self.scenario_count(),
            Formulation::ChanceConstrained => {
                let need = (1.0 - self.epsilon()) * self.scenario_count() as f64;
                (need - 1e-9).ceil().max(0.0) as usize
            }
        }
    }

    /// Steering coefficient of `b[v,t]` in the objective.
    pub fn objective_coef(&self, v: usize, t: usize) -> f64 {
        let ev = &self.evs[v];
        self.slot_energy_kwh() * ev.cost[t] / ev.weight[t]
    }

    pub fn build_objective(&mut self) {
        self.has_objective = true;
    }

    pub fn add_priority_constraints(&mut self) {
        self.has_priority = true;
    }

    pub fn add_energy_constraints_robust(&mut self, scenario: Scenario) -> Result<()> {
        if self.formulation != Formulation::Robust {
            return Err(Error::config(
                "robust energy constraints need the robust formulation",
            ));
        }
        self.attach_scenarios(vec![scenario], 0.0)
    }

    pub fn add_energy_constraints_cc(
        &mut self,
        scenarios: Vec<Scenario>,
        epsilon: f64,
    ) -> Result<()> {
        if self.formulation != Formulation::ChanceConstrained {
            return Err(Error::config(
                "chance constraints need the chance-constrained formulation",
            ));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::config(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if scenarios.is_empty() {
            return Err(Error::config(
                "chance constraints need at least one scenario",
            ));
        }
        self.attach_scenarios(scenarios, epsilon)
    }

    fn attach_scenarios(&mut self, scenarios: Vec<Scenario>, epsilon: f64) -> Result<()> {
        for s in &scenarios {
            if s.ev_count() != self.ev_count() {
                return Err(Error::Dimension(format!(
                    "scenario {} has {} EVs, problem has {}",
                    s.scenario_id,
                    s.ev_count(),
                    self.ev_count()
                )));
            }
        }
        let big_m = self.big_m_for(&scenarios);
        self.energy = Some(EnergyBlock {
            scenarios,
            epsilon,
            big_m,
        });
        Ok(())
    }

    /// Largest battery plus the largest weekly driving depletion.
    fn big_m_for(&self, scenarios: &[Scenario]) -> f64 {
        let mut battery: f64 = 0.0;
        let mut depletion: f64 = 0.0;
        for s in scenarios {
            for (d, ev) in s.evs.iter().zip(&self.evs) {
                battery = battery.max(d.battery_kwh);
                depletion = depletion.max(d.delta_kwh_per_drive_slot * ev.drive_slots() as f64);
            }
        }
        battery + depletion
    }

    pub fn add_transformer_constraint(&mut self, case: TransformerCase) -> Result<()> {
        case.validate(self.slot_count())?;
        self.transformer = Some(case);
        Ok(())
    }

    pub fn add_duration_and_switch_constraints(&mut self) {
        self.has_duration_switch = true;
    }

    pub fn fix_driving_pattern(&mut self) {
        self.driving_fixed = true;
    }

    /// `SoC[v, t, ξ]` for every slot given charge and drive rows.
    pub fn trajectory(&self, v: usize, scenario: usize, b: &[bool], d: &[bool]) -> Vec<f64> {
        let draw = &self.scenarios()[scenario].evs[v];
        let e = self.slot_energy_kwh();
        let mut soc = draw.soc_init_kwh;
        b.iter()
            .zip(d)
            .map(|(&bt, &dt)| {
                if bt {
                    soc += e;
                }
                if dt {
                    soc -= draw.delta_kwh_per_drive_slot;
                }
                soc
            })
            .collect()
    }

    /// Steered objective of a charge matrix.
    pub fn objective_value(&self, b: &[Vec<bool>]) -> f64 {
        b.iter()
            .enumerate()
            .map(|(v, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, on)| **on)
                    .map(|(t, _)| self.objective_coef(v, t))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Column layout of the full MILP.
    pub fn layout(&self) -> VarLayout {
        VarLayout {
            evs: self.ev_count(),
            slots: self.slot_count(),
            scenarios: self.scenario_count(),
            has_keep: self.formulation == Formulation::ChanceConstrained && self.energy.is_some(),
        }
    }

    /// Materializes every registered constraint family as explicit rows.
    pub fn milp(&self) -> Milp {
        let lay = self.layout();
        let (nv, nt) = (lay.evs, lay.slots);
        let t_max = nt - 1;
        let e = self.slot_energy_kwh();
        let mut m = Milp::default();

        for v in 0..nv {
            for t in 0..nt {
                let ub = if self.evs[v].available[t] { 1.0 } else { 0.0 };
                m.add_var(VarRole::Charge { ev: v, slot: t }, VarKind::Binary, 0.0, ub);
            }
        }
        for v in 0..nv {
            for t in 0..nt {
                let ub = if self.evs[v].driving[t] { 1.0 } else { 0.0 };
                m.add_var(VarRole::Drive { ev: v, slot: t }, VarKind::Binary, 0.0, ub);
            }
        }
        for v in 0..nv {
            for t in 0..nt {
                m.add_var(VarRole::Start { ev: v, slot: t }, VarKind::Binary, 0.0, 1.0);
            }
        }
        if lay.has_keep {
            for xi in 0..lay.scenarios {
                m.add_var(VarRole::Keep { scenario: xi }, VarKind::Binary, 0.0, 1.0);
            }
        }
        if self.energy.is_some() {
            for v in 0..nv {
                for xi in 0..lay.scenarios {
                    for t in 0..nt {
                        m.add_var(
                            VarRole::Soc {
                                ev: v,
                                slot: t,
                                scenario: xi,
                            },
                            VarKind::Continuous,
                            f64::NEG_INFINITY,
                            f64::INFINITY,
                        );
                    }
                }
            }
        }
        debug_assert_eq!(m.vars.len(), lay.total());

        if self.has_objective {
            for v in 0..nv {
                for t in 0..nt {
                    let c = self.objective_coef(v, t);
                    if c != 0.0 {
                        m.objective.push((lay.b(v, t), c));
                    }
                }
            }
        }

        if self.has_priority {
            for (v, ev) in self.evs.iter().enumerate() {
                for (k, (hi, lo)) in [
                    (PriorityClass::P1, PriorityClass::P2),
                    (PriorityClass::P2, PriorityClass::P3),
                ]
                .into_iter()
                .enumerate()
                {
                    let terms = (0..nt)
                        .filter_map(|t| {
                            if ev.class[t] == hi {
                                Some((lay.b(v, t), ev.weight[t]))
                            } else if ev.class[t] == lo {
                                Some((lay.b(v, t), -ev.weight[t]))
                            } else {
                                None
                            }
                        })
                        .collect();
                    m.add_row(RowKind::Priority, vec![v, k], terms, Sense::Ge, 0.0);
                }
            }
        }

        if let Some(block) = &self.energy {
            let big_m = block.big_m;
            let relaxed = lay.has_keep;
            for v in 0..nv {
                for (xi, s) in block.scenarios.iter().enumerate() {
                    let draw = &s.evs[v];
                    let delta = draw.delta_kwh_per_drive_slot;
                    // Weekly balance against the final SoC.
                    let mut terms: Vec<(usize, f64)> = Vec::with_capacity(2 * nt + 1);
                    for t in 0..nt {
                        terms.push((lay.b(v, t), e));
                        terms.push((lay.d(v, t), -delta));
                    }
                    let mut rhs = draw.soc_final_kwh - draw.soc_init_kwh;
                    if relaxed {
                        terms.push((lay.z(xi), big_m));
                        rhs += big_m;
                    }
                    m.add_row(RowKind::Demand, vec![v, xi], terms, Sense::Ge, rhs);

                    m.add_row(
                        RowKind::SocAnchor,
                        vec![v, xi],
                        vec![
                            (lay.soc(v, 0, xi), 1.0),
                            (lay.b(v, 0), -e),
                            (lay.d(v, 0), delta),
                        ],
                        Sense::Eq,
                        draw.soc_init_kwh,
                    );
                    for t in 1..=t_max {
                        m.add_row(
                            RowKind::SocRecursion,
                            vec![v, t, xi],
                            vec![
                                (lay.soc(v, t, xi), 1.0),
                                (lay.soc(v, t - 1, xi), -1.0),
                                (lay.b(v, t), -e),
                                (lay.d(v, t), delta),
                            ],
                            Sense::Eq,
                            0.0,
                        );
                    }
                    let floor = self.params.soc_floor_frac * draw.battery_kwh;
                    for t in 1..=t_max {
                        let mut lo = vec![(lay.soc(v, t, xi), 1.0)];
                        let mut hi = vec![(lay.soc(v, t, xi), 1.0)];
                        let (mut lo_rhs, mut hi_rhs) = (floor, draw.battery_kwh);
                        if relaxed {
                            lo.push((lay.z(xi), -big_m));
                            lo_rhs -= big_m;
                            hi.push((lay.z(xi), big_m));
                            hi_rhs += big_m;
                        }
                        m.add_row(RowKind::SocFloor, vec![v, t, xi], lo, Sense::Ge, lo_rhs);
                        m.add_row(RowKind::SocCeiling, vec![v, t, xi], hi, Sense::Le, hi_rhs);
                    }
                }
            }
            if relaxed {
                let terms = (0..lay.scenarios).map(|xi| (lay.z(xi), 1.0)).collect();
                m.add_row(
                    RowKind::Cardinality,
                    vec![],
                    terms,
                    Sense::Ge,
                    (1.0 - block.epsilon) * lay.scenarios as f64,
                );
            }
        }

        if let Some(case) = &self.transformer {
            let u = self.params.charge_power_kw;
            for t in 0..nt {
                let terms = (0..nv).map(|v| (lay.b(v, t), u)).collect();
                m.add_row(
                    RowKind::Transformer,
                    vec![t],
                    terms,
                    Sense::Le,
                    case.rated_kva - case.household_load_kw[t],
                );
            }
        }

        if self.has_duration_switch {
            let tc = self.params.min_charge_slots;
            let td = self.params.min_drive_slots;
            for v in 0..nv {
                min_run_rows(&mut m, RowKind::MinChargeRun, v, tc, t_max, |t| lay.b(v, t));
                for t in t_max.saturating_sub(tc)..t_max {
                    m.add_row(
                        RowKind::EndOfWeek,
                        vec![v, t],
                        vec![(lay.b(v, t + 1), 1.0), (lay.b(v, t), -1.0)],
                        Sense::Le,
                        0.0,
                    );
                }
                min_run_rows(&mut m, RowKind::MinDriveRun, v, td, t_max, |t| lay.d(v, t));
                for day in Day::ALL.into_iter().filter(|d| d.is_weekday()) {
                    let terms = self
                        .grid
                        .day_slots(day)
                        .map(|t| (lay.d(v, t), 1.0))
                        .collect();
                    m.add_row(
                        RowKind::DailyDriving,
                        vec![v, day.index()],
                        terms,
                        Sense::Le,
                        self.params.max_daily_drive_slots as f64,
                    );
                }
                m.add_row(
                    RowKind::StartTracking,
                    vec![v, 0],
                    vec![(lay.f(v, 0), 1.0), (lay.b(v, 0), -1.0)],
                    Sense::Ge,
                    0.0,
                );
                for t in 1..=t_max {
                    m.add_row(
                        RowKind::StartTracking,
                        vec![v, t],
                        vec![
                            (lay.f(v, t), 1.0),
                            (lay.b(v, t), -1.0),
                            (lay.b(v, t - 1), 1.0),
                        ],
                        Sense::Ge,
                        0.0,
                    );
                }
                for day in Day::ALL {
                    let terms = self
                        .grid
                        .day_slots(day)
                        .map(|t| (lay.f(v, t), 1.0))
                        .collect();
                    m.add_row(
                        RowKind::DailyStarts,
                        vec![v, day.index()],
                        terms,
                        Sense::Le,
                        self.params.max_daily_charge_starts as f64,
                    );
                }
            }
        }

        if self.driving_fixed {
            for (v, ev) in self.evs.iter().enumerate() {
                for t in 0..nt {
                    if ev.driving[t] {
                        m.add_row(
                            RowKind::DrivingPattern,
                            vec![v, t],
                            vec![(lay.d(v, t), 1.0)],
                            Sense::Eq,
                            1.0,
                        );
                        m.add_row(
                            RowKind::ChargeDriveExclusive,
                            vec![v, t],
                            vec![(lay.b(v, t), 1.0), (lay.d(v, t), 1.0)],
                            Sense::Le,
                            1.0,
                        );
                    }
                }
            }
        }
        m
    }

    /// Full-MILP column vector for a schedule (f derived from session starts).
    pub fn milp_point(&self, b: &[Vec<bool>], d: &[Vec<bool>], z: &[bool]) -> Vec<f64> {
        let lay = self.layout();
        let mut x = vec![0.0; lay.total()];
        let one = |on: bool| if on { 1.0 } else { 0.0 };
        for v in 0..lay.evs {
            for t in 0..lay.slots {
                x[lay.b(v, t)] = one(b[v][t]);
                x[lay.d(v, t)] = one(d[v][t]);
                let prev = t > 0 && b[v][t - 1];
                x[lay.f(v, t)] = one(b[v][t] && !prev);
            }
            for xi in 0..lay.scenarios {
                for (t, s) in self.trajectory(v, xi, &b[v], &d[v]).into_iter().enumerate() {
                    x[lay.soc(v, t, xi)] = s;
                }
            }
        }
        if lay.has_keep {
            for xi in 0..lay.scenarios {
                x[lay.z(xi)] = one(z[xi]);
            }
        }
        x
    }
}

/// `x[t] - x[t-1] <= x[t+i]` for `i` in `1..len`, with `x[-1] = 0`.
fn min_run_rows(
    m: &mut Milp,
    kind: RowKind,
    v: usize,
    len: usize,
    t_max: usize,
    col: impl Fn(usize) -> usize,
) {
    if t_max + 1 < len {
        return;
    }
    for t in 0..=(t_max + 1 - len) {
        for i in 1..len {
            let mut terms = vec![(col(t), 1.0), (col(t + i), -1.0)];
            if t > 0 {
                terms.push((col(t - 1), -1.0));
            }
            m.add_row(kind, vec![v, t, i], terms, Sense::Le, 0.0);
        }
    }
}

/// Index arithmetic for the full MILP columns: `b`, `d`, `f` blocks of
/// `evs * slots` each, then `z`, then SoC in `(ev, scenario, slot)` order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarLayout {
    pub evs: usize,
    pub slots: usize,
    pub scenarios: usize,
    pub has_keep: bool,
}

impl VarLayout {
    fn block(&self) -> usize {
        self.evs * self.slots
    }

    pub fn b(&self, v: usize, t: usize) -> usize {
        v * self.slots + t
    }

    pub fn d(&self, v: usize, t: usize) -> usize {
        self.block() + v * self.slots + t
    }

    pub fn f(&self, v: usize, t: usize) -> usize {
        2 * self.block() + v * self.slots + t
    }

    fn keep_count(&self) -> usize {
        if self.has_keep {
            self.scenarios
        } else {
            0
        }
    }

    pub fn z(&self, xi: usize) -> usize {
        3 * self.block() + xi
    }

    pub fn soc(&self, v: usize, t: usize, xi: usize) -> usize {
        3 * self.block() + self.keep_count() + (v * self.scenarios + xi) * self.slots + t
    }

    pub fn total(&self) -> usize {
        3 * self.block() + self.keep_count() + self.evs * self.scenarios * self.slots
    }
}

/// Everything needed to assemble a complete problem in one call.
#[derive(Clone, Debug)]
pub struct ProblemInputs {
    pub grid: Arc<TimeGrid>,
    pub params: ModelParams,
    pub evs: Vec<EvProfile>,
    pub case: TransformerCase,
    pub formulation: Formulation,
    /// One scenario for robust, the sample set for chance-constrained.
    pub scenarios: Vec<Scenario>,
    pub epsilon: f64,
}

/// Registers the objective and every constraint family.
pub fn assemble(inputs: ProblemInputs) -> Result<CoordinationProblem> {
    let mut p =
        CoordinationProblem::new(inputs.grid, inputs.params, inputs.evs, inputs.formulation)?;
    p.build_objective();
    p.add_priority_constraints();
    match inputs.formulation {
        Formulation::Robust => {
            let mut scenarios = inputs.scenarios;
            if scenarios.len() != 1 {
                return Err(Error::config(format!(
                    "robust formulation uses exactly one scenario, got {}",
                    scenarios.len()
                )));
            }
            p.add_energy_constraints_robust(scenarios.remove(0))?;
        }
        Formulation::ChanceConstrained => {
            p.add_energy_constraints_cc(inputs.scenarios, inputs.epsilon)?
        }
    }
    p.add_transformer_constraint(inputs.case)?;
    p.add_duration_and_switch_constraints();
    p.fix_driving_pattern();
    Ok(p)
}
