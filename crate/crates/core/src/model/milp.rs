//! Solver-independent MILP description: variables, sparse rows, objective.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

/// What a column stands for in the coordination model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarRole {
    Charge {
        ev: usize,
        slot: usize,
    },
    Drive {
        ev: usize,
        slot: usize,
    },
    Start {
        ev: usize,
        slot: usize,
    },
    Keep {
        scenario: usize,
    },
    Soc {
        ev: usize,
        slot: usize,
        scenario: usize,
    },
    /// Number of charging slots up to and including `slot`.
    Charged {
        ev: usize,
        slot: usize,
    },
    Aux(usize),
}

impl fmt::Display for VarRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarRole::Charge { ev, slot } => write!(f, "b_{ev}_{slot}"),
            VarRole::Drive { ev, slot } => write!(f, "d_{ev}_{slot}"),
            VarRole::Start { ev, slot } => write!(f, "f_{ev}_{slot}"),
            VarRole::Keep { scenario } => write!(f, "z_{scenario}"),
            VarRole::Soc { ev, slot, scenario } => write!(f, "soc_{ev}_{slot}_{scenario}"),
            VarRole::Charged { ev, slot } => write!(f, "c_{ev}_{slot}"),
            VarRole::Aux(i) => write!(f, "x_{i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub role: VarRole,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

impl Variable {
    pub fn name(&self) -> String {
        self.role.to_string()
    }

    pub fn is_fixed(&self) -> bool {
        self.lower == self.upper
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Sense::Le => lhs <= rhs + tol,
            Sense::Ge => lhs >= rhs - tol,
            Sense::Eq => (lhs - rhs).abs() <= tol,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// Constraint family a row belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RowKind {
    /// Higher-priority weighted charging dominates the next class.
    Priority,
    /// Weekly energy balance reaches the final SoC.
    Demand,
    /// SoC trajectory at slot 0.
    SocAnchor,
    /// SoC trajectory recursion for slots 1..=T_max.
    SocRecursion,
    SocFloor,
    SocCeiling,
    /// Enough scenarios are kept.
    Cardinality,
    Transformer,
    MinChargeRun,
    /// No new sessions in the closing slots of the week.
    EndOfWeek,
    MinDriveRun,
    DailyDriving,
    StartTracking,
    DailyStarts,
    DrivingPattern,
    ChargeDriveExclusive,
    /// Defines a cumulative charge-count column.
    Cumulative,
}

impl RowKind {
    pub const ALL: [RowKind; 17] = [
        RowKind::Priority,
        RowKind::Demand,
        RowKind::SocAnchor,
        RowKind::SocRecursion,
        RowKind::SocFloor,
        RowKind::SocCeiling,
        RowKind::Cardinality,
        RowKind::Transformer,
        RowKind::MinChargeRun,
        RowKind::EndOfWeek,
        RowKind::MinDriveRun,
        RowKind::DailyDriving,
        RowKind::StartTracking,
        RowKind::DailyStarts,
        RowKind::DrivingPattern,
        RowKind::ChargeDriveExclusive,
        RowKind::Cumulative,
    ];

    pub fn from_name(name: &str) -> Option<RowKind> {
        RowKind::ALL.into_iter().find(|k| format!("{k:?}") == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub kind: RowKind,
    /// Family-local identifiers (EV, slot, scenario, ...), used for naming.
    pub tag: Vec<usize>,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn name(&self) -> String {
        let mut s = format!("{:?}", self.kind);
        for t in &self.tag {
            s.push('_');
            s.push_str(&t.to_string());
        }
        s
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Milp {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Sparse minimization objective.
    pub objective: Vec<(usize, f64)>,
}

impl Milp {
    pub fn add_var(&mut self, role: VarRole, kind: VarKind, lower: f64, upper: f64) -> usize {
        self.vars.push(Variable {
            role,
            kind,
            lower,
            upper,
        });
        self.vars.len() - 1
    }

    pub fn add_row(
        &mut self,
        kind: RowKind,
        tag: Vec<usize>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.rows.push(Row {
            kind,
            tag,
            terms,
            sense,
            rhs,
        });
    }

    pub fn count_rows(&self, kind: RowKind) -> usize {
        self.rows.iter().filter(|r| r.kind == kind).count()
    }

    pub fn binary_count(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Rows (by index) that `x` violates beyond `tol`, including bounds and
    /// integrality reported as `usize::MAX`-tagged pseudo rows.
    pub fn violations(&self, x: &[f64], tol: f64) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.sense.holds(r.activity(x), r.rhs, tol))
            .map(|(i, _)| i)
            .collect();
        let bad_var = self.vars.iter().zip(x).any(|(v, &xv)| {
            xv < v.lower - tol
                || xv > v.upper + tol
                || (v.kind == VarKind::Binary && (xv - xv.round()).abs() > tol)
        });
        if bad_var {
            out.push(usize::MAX);
        }
        out
    }
}
