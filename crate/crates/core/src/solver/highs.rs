//! HiGHS adapter.

use std::num::NonZeroU32;

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense as HSense};

use crate::error::{Error, Result};
use crate::model::{Milp, Sense, VarKind};
use crate::solver::{MipBackend, RawSolution, SolveLimits, SolveStatus};

#[derive(Clone, Copy, Debug, Default)]
pub struct HighsBackend;

impl MipBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve_milp(
        &self,
        milp: &Milp,
        limits: &SolveLimits,
        start: Option<&[f64]>,
    ) -> Result<RawSolution> {
        if milp.vars.is_empty() {
            let ok = milp.rows.iter().all(|r| r.sense.holds(0.0, r.rhs, 1e-9));
            return Ok(RawSolution {
                status: if ok {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::Infeasible
                },
                x: ok.then(Vec::new),
                gap: 0.0,
            });
        }
        let mut pb = RowProblem::default();
        let mut cost = vec![0.0; milp.vars.len()];
        for &(j, c) in &milp.objective {
            cost[j] += c;
        }
        let cols: Vec<_> = milp
            .vars
            .iter()
            .zip(&cost)
            .map(|(v, &c)| match v.kind {
                VarKind::Binary => pb.add_integer_column(c, v.lower..=v.upper),
                VarKind::Continuous => pb.add_column(c, v.lower..=v.upper),
            })
            .collect();
        for row in &milp.rows {
            let terms: Vec<_> = row.terms.iter().map(|&(j, a)| (cols[j], a)).collect();
            match row.sense {
                Sense::Le => pb.add_row(..=row.rhs, &terms),
                Sense::Ge => pb.add_row(row.rhs.., &terms),
                Sense::Eq => pb.add_row(row.rhs..=row.rhs, &terms),
            }
        }
        let mut model = pb.optimise(HSense::Minimise);
        model.make_quiet();
        model.set_option("time_limit", limits.time_limit_s.max(0.01));
        model.set_option("mip_rel_gap", limits.gap_tol);
        model.set_option("random_seed", limits.random_seed as i32);
        if limits.feasibility_only {
            model.set_option("mip_max_improving_sols", 1);
        }
        model.set_threads(NonZeroU32::new(limits.threads.max(1) as u32).unwrap_or(NonZeroU32::MIN));
        if let Some(x) = start.filter(|x| x.len() == milp.vars.len()) {
            // A rejected start only costs the warm start, never correctness.
            let _ = model.try_set_solution(Some(x), None, None, None);
        }
        let solved = model
            .try_solve()
            .map_err(|s| Error::Solver(format!("HiGHS failed to run: {s:?}")))?;
        let has_point = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit => SolveStatus::TimedOut,
            HighsModelStatus::ReachedSolutionLimit | HighsModelStatus::ObjectiveTarget
                if has_point =>
            {
                SolveStatus::Feasible
            }
            HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Infeasible,
            other => return Err(Error::Solver(format!("HiGHS ended with status {other:?}"))),
        };
        let x = (has_point && status != SolveStatus::Infeasible)
            .then(|| solved.get_solution().columns().to_vec());
        let gap = if status == SolveStatus::Optimal {
            let g = solved.mip_gap();
            if g.is_finite() {
                g
            } else {
                0.0
            }
        } else {
            f64::INFINITY
        };
        Ok(RawSolution { status, x, gap })
    }
}
