//! CPLEX LP text format export and import.
//!
//! The writer emits every row, bound, and integrality marker. The reader
//! accepts the subset of the format the writer produces (plus the common
//! section keyword aliases) so exported models can be round-tripped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::milp::{Milp, RowKind, Sense, VarKind, VarRole};

const WRAP: usize = 200;

pub fn to_lp_string(m: &Milp) -> String {
    let names: Vec<String> = m.vars.iter().map(|v| v.name()).collect();
    let mut out = String::new();
    out.push_str("\\ EV charging coordination model\n");
    out.push_str("Minimize\n obj:");
    write_expr(&mut out, &m.objective, &names);
    out.push_str("\nSubject To\n");
    for row in &m.rows {
        let _ = write!(out, " {}:", row.name());
        write_expr(&mut out, &row.terms, &names);
        let _ = writeln!(out, " {} {}", row.sense.symbol(), fmt_num(row.rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in m.vars.iter().zip(&names) {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else {
            let _ = writeln!(
                out,
                " {} <= {name} <= {}",
                fmt_num(v.lower),
                fmt_num(v.upper)
            );
        }
    }
    let binaries: Vec<&String> = m
        .vars
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        let mut line = String::new();
        for n in binaries {
            if line.len() + n.len() + 1 > WRAP {
                let _ = writeln!(out, "{line}");
                line.clear();
            }
            line.push(' ');
            line.push_str(n);
        }
        let _ = writeln!(out, "{line}");
    }
    out.push_str("End\n");
    out
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

fn write_expr(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(names.first().map_or("x_0", |s| s.as_str()));
        return;
    }
    let mut width = 0;
    for &(j, a) in terms {
        let piece = if a < 0.0 {
            format!(" - {} {}", fmt_num(-a), names[j])
        } else {
            format!(" + {} {}", fmt_num(a), names[j])
        };
        if width + piece.len() > WRAP {
            out.push_str("\n  ");
            width = 0;
        }
        width += piece.len();
        out.push_str(&piece);
    }
}

pub fn write_lp(path: &Path, m: &Milp) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(to_lp_string(m).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_lp(path: &Path) -> Result<Milp> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lp(&text)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
}

fn section_of(line: &str) -> Option<Section> {
    match line.trim().to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "generals" | "general" | "gen" => Some(Section::Generals),
        "end" => Some(Section::None),
        _ => None,
    }
}

fn lp_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: "<lp>".into(),
        row: line,
        column: String::new(),
        message: message.into(),
    }
}

struct VarTable {
    index: HashMap<String, usize>,
    m: Milp,
}

impl VarTable {
    fn get(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let role = parse_role(name).unwrap_or(VarRole::Aux(self.m.vars.len()));
        let j = self
            .m
            .add_var(role, VarKind::Continuous, 0.0, f64::INFINITY);
        self.index.insert(name.to_string(), j);
        j
    }
}

pub fn parse_lp(text: &str) -> Result<Milp> {
    let mut table = VarTable {
        index: HashMap::new(),
        m: Milp::default(),
    };
    // Statements may wrap; join continuation lines until a complete one.
    let mut statements: Vec<(Section, String, usize)> = Vec::new();
    let mut section = Section::None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('\\').next().unwrap_or("").trim_end();
        if let Some(s) = section_of(line) {
            section = s;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match statements.last_mut() {
            Some((s, body, _)) if line.starts_with("  ") && *s == section => {
                body.push(' ');
                body.push_str(line.trim());
            }
            _ => statements.push((section, line.trim().to_string(), i + 1)),
        }
    }
    // Bounds list every column in order, so registering them first keeps
    // the column order of the exported model.
    for (s, body, line) in statements.iter().filter(|(s, _, _)| *s == Section::Bounds) {
        statement(&mut table, *s, body, *line)?;
    }
    for (s, body, line) in statements.iter().filter(|(s, _, _)| *s != Section::Bounds) {
        statement(&mut table, *s, body, *line)?;
    }
    Ok(table.m)
}

fn statement(table: &mut VarTable, section: Section, text: &str, line: usize) -> Result<()> {
    match section {
        Section::Objective => {
            let body = strip_label(text).1;
            let terms = parse_terms(table, body, line)?;
            table.m.objective = if terms.iter().all(|t| t.1 == 0.0) {
                vec![]
            } else {
                terms
            };
        }
        Section::Constraints => {
            let (label, body) = strip_label(text);
            let (lhs, sense, rhs) =
                split_relation(body).ok_or_else(|| lp_err(line, "constraint without relation"))?;
            let terms = parse_terms(table, lhs, line)?;
            let rhs: f64 = parse_num(rhs.trim())
                .ok_or_else(|| lp_err(line, format!("bad right-hand side `{rhs}`")))?;
            let (kind, tag) = label
                .and_then(parse_row_name)
                .unwrap_or((RowKind::Priority, vec![table.m.rows.len()]));
            let terms = if terms.len() == 1 && terms[0].1 == 0.0 {
                vec![]
            } else {
                terms
            };
            table.m.add_row(kind, tag, terms, sense, rhs);
        }
        Section::Bounds => parse_bound(table, text.trim(), line)?,
        Section::Binaries => {
            for name in text.split_whitespace() {
                let j = table.get(name);
                table.m.vars[j].kind = VarKind::Binary;
            }
        }
        Section::Generals => return Err(lp_err(line, "general integer columns are not supported")),
        Section::None => return Err(lp_err(line, "content outside any section")),
    }
    Ok(())
}

fn strip_label(text: &str) -> (Option<&str>, &str) {
    match text.find(':') {
        Some(k) => (Some(text[..k].trim()), &text[k + 1..]),
        None => (None, text),
    }
}

fn split_relation(body: &str) -> Option<(&str, Sense, &str)> {
    for (pat, sense) in [
        ("<=", Sense::Le),
        (">=", Sense::Ge),
        ("=<", Sense::Le),
        ("=>", Sense::Ge),
    ] {
        if let Some(k) = body.find(pat) {
            return Some((&body[..k], sense, &body[k + 2..]));
        }
    }
    for (pat, sense) in [('<', Sense::Le), ('>', Sense::Ge), ('=', Sense::Eq)] {
        if let Some(k) = body.find(pat) {
            return Some((&body[..k], sense, &body[k + 1..]));
        }
    }
    None
}

fn parse_num(s: &str) -> Option<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        other => other.parse().ok(),
    }
}

fn parse_terms(table: &mut VarTable, body: &str, line: usize) -> Result<Vec<(usize, f64)>> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for tok in body.split_whitespace() {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Some(x) = parse_num(tok).filter(|x| x.is_finite()) {
                    coef = Some(x);
                } else {
                    let j = table.get(tok);
                    terms.push((j, sign * coef.take().unwrap_or(1.0)));
                    sign = 1.0;
                }
            }
        }
    }
    if coef.is_some() {
        return Err(lp_err(
            line,
            "constant terms in expressions are not supported",
        ));
    }
    Ok(terms)
}

fn parse_bound(table: &mut VarTable, text: &str, line: usize) -> Result<()> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    match toks.as_slice() {
        [name, free] if free.eq_ignore_ascii_case("free") => {
            let j = table.get(name);
            table.m.vars[j].lower = f64::NEG_INFINITY;
            table.m.vars[j].upper = f64::INFINITY;
        }
        [lo, "<=", name, "<=", hi] => {
            let (lo, hi) = (parse_num(lo), parse_num(hi));
            let (Some(lo), Some(hi)) = (lo, hi) else {
                return Err(lp_err(line, format!("bad bound `{text}`")));
            };
            let j = table.get(name);
            table.m.vars[j].lower = lo;
            table.m.vars[j].upper = hi;
        }
        [name, op, val] => {
            let val = parse_num(val).ok_or_else(|| lp_err(line, format!("bad bound `{text}`")))?;
            let j = table.get(name);
            match *op {
                "<=" => table.m.vars[j].upper = val,
                ">=" => table.m.vars[j].lower = val,
                "=" => {
                    table.m.vars[j].lower = val;
                    table.m.vars[j].upper = val;
                }
                _ => return Err(lp_err(line, format!("bad bound `{text}`"))),
            }
        }
        _ => return Err(lp_err(line, format!("bad bound `{text}`"))),
    }
    Ok(())
}

fn parse_role(name: &str) -> Option<VarRole> {
    let mut parts = name.split('_');
    let head = parts.next()?;
    let nums: Vec<usize> = parts.map(|p| p.parse().ok()).collect::<Option<_>>()?;
    Some(match (head, nums.as_slice()) {
        ("b", [ev, slot]) => VarRole::Charge {
            ev: *ev,
            slot: *slot,
        },
        ("d", [ev, slot]) => VarRole::Drive {
            ev: *ev,
            slot: *slot,
        },
        ("f", [ev, slot]) => VarRole::Start {
            ev: *ev,
            slot: *slot,
        },
        ("c", [ev, slot]) => VarRole::Charged {
            ev: *ev,
            slot: *slot,
        },
        ("z", [scenario]) => VarRole::Keep {
            scenario: *scenario,
        },
        ("soc", [ev, slot, scenario]) => VarRole::Soc {
            ev: *ev,
            slot: *slot,
            scenario: *scenario,
        },
        ("x", [i]) => VarRole::Aux(*i),
        _ => return None,
    })
}

fn parse_row_name(name: &str) -> Option<(RowKind, Vec<usize>)> {
    let mut parts = name.split('_');
    let kind = RowKind::from_name(parts.next()?)?;
    let tag = parts.map(|p| p.parse().ok()).collect::<Option<_>>()?;
    Some((kind, tag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::*;
    use crate::model::Formulation;
    use crate::timegrid::WorkArrangement;

    #[test]
    fn small_model_round_trips() {
        let mut m = Milp::default();
        let x = m.add_var(
            VarRole::Charge { ev: 0, slot: 0 },
            VarKind::Binary,
            0.0,
            1.0,
        );
        let y = m.add_var(
            VarRole::Soc {
                ev: 0,
                slot: 1,
                scenario: 2,
            },
            VarKind::Continuous,
            f64::NEG_INFINITY,
            f64::INFINITY,
        );
        let z = m.add_var(VarRole::Keep { scenario: 0 }, VarKind::Binary, 0.0, 0.0);
        m.objective = vec![(x, 0.144), (z, -1.5)];
        m.add_row(
            RowKind::SocAnchor,
            vec![0, 2],
            vec![(y, 1.0), (x, -1.44)],
            Sense::Eq,
            61.6,
        );
        m.add_row(
            RowKind::Cardinality,
            vec![],
            vec![(z, 1.0)],
            Sense::Ge,
            0.95,
        );
        m.add_row(
            RowKind::Transformer,
            vec![7],
            vec![(x, 7.2)],
            Sense::Le,
            1e-3,
        );
        let text = to_lp_string(&m);
        assert!(text.contains("soc_0_1_2 free"));
        assert_eq!(parse_lp(&text).unwrap(), m);
    }

    #[test]
    fn coordination_model_round_trips() {
        let p = problem(
            WorkArrangement::in_person(),
            1,
            Formulation::ChanceConstrained,
            2,
        );
        let m = p.milp();
        let back = parse_lp(&to_lp_string(&m)).unwrap();
        assert_eq!(back.vars.len(), m.vars.len());
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_constants_and_generals() {
        assert!(parse_lp("Minimize\n obj: 3\nEnd\n").is_err());
        assert!(parse_lp("Minimize\n obj: x\nGenerals\n x\nEnd\n").is_err());
    }
}
