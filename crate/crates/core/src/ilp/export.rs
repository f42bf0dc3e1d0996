//! Text exports readable by common MILP solvers: CPLEX LP and free MPS.

use std::fmt::Write;
use std::str::FromStr;

use super::model::{IlpModel, Sense};

const LP_WIDTH: usize = 78;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Lp,
    Mps,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Lp => "lp",
            ExportFormat::Mps => "mps",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lp" => Ok(ExportFormat::Lp),
            "mps" => Ok(ExportFormat::Mps),
            other => Err(format!("unknown export format `{other}` (expected lp or mps)")),
        }
    }
}

pub fn export(model: &IlpModel, format: ExportFormat) -> String {
    match format {
        ExportFormat::Lp => to_lp(model),
        ExportFormat::Mps => to_mps(model),
    }
}

/// Appends `piece` to `out`, starting a continuation line when the current
/// one would grow past the width limit.
fn push_wrapped(out: &mut String, line_len: &mut usize, piece: &str) {
    if *line_len + piece.len() > LP_WIDTH && *line_len > 0 {
        out.push_str("\n   ");
        *line_len = 3;
    }
    out.push_str(piece);
    *line_len += piece.len();
}

fn lp_expression(model: &IlpModel, out: &mut String, line_len: &mut usize, terms: &[(usize, i64)]) {
    for (k, &(v, c)) in terms.iter().enumerate() {
        let name = &model.vars[v].name;
        let piece = match (k, c < 0) {
            (0, false) => format!("{c} {name}"),
            (0, true) => format!("- {} {name}", c.unsigned_abs()),
            (_, false) => format!(" + {c} {name}"),
            (_, true) => format!(" - {} {name}", c.unsigned_abs()),
        };
        push_wrapped(out, line_len, &piece);
    }
}

fn to_lp(model: &IlpModel) -> String {
    let mut out = String::from("Maximize\n");
    let mut line_len = 0;
    push_wrapped(&mut out, &mut line_len, " obj: ");
    if model.objective.is_empty() {
        push_wrapped(&mut out, &mut line_len, "0");
    } else {
        lp_expression(model, &mut out, &mut line_len, &model.objective);
    }
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        if row.terms.is_empty() {
            continue;
        }
        let mut line_len = 0;
        push_wrapped(&mut out, &mut line_len, &format!(" {}: ", row.name));
        lp_expression(model, &mut out, &mut line_len, &row.terms);
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
        };
        push_wrapped(&mut out, &mut line_len, &format!(" {op} {}", row.rhs));
        out.push('\n');
    }
    out.push_str("Binary\n");
    let mut line_len = 0;
    for v in &model.vars {
        push_wrapped(&mut out, &mut line_len, &format!(" {}", v.name));
    }
    if !model.vars.is_empty() {
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

fn to_mps(model: &IlpModel) -> String {
    let rows: Vec<_> = model.rows.iter().filter(|r| !r.terms.is_empty()).collect();
    let mut columns: Vec<Vec<(&str, i64)>> = vec![Vec::new(); model.vars.len()];
    for &(v, c) in &model.objective {
        columns[v].push(("obj", c));
    }
    for row in &rows {
        for &(v, c) in &row.terms {
            columns[v].push((row.name.as_str(), c));
        }
    }

    let mut out = String::from("NAME upfplace\nOBJSENSE\n    MAX\nROWS\n N obj\n");
    for row in &rows {
        let kind = match row.sense {
            Sense::Le => 'L',
            Sense::Eq => 'E',
        };
        writeln!(out, " {kind} {}", row.name).unwrap();
    }
    out.push_str("COLUMNS\n    MARKER 'MARKER' 'INTORG'\n");
    for (v, entries) in columns.iter().enumerate() {
        let name = &model.vars[v].name;
        if entries.is_empty() {
            writeln!(out, "    {name} obj 0").unwrap();
        }
        for (row, c) in entries {
            writeln!(out, "    {name} {row} {c}").unwrap();
        }
    }
    out.push_str("    MARKER 'MARKER' 'INTEND'\nRHS\n");
    for row in &rows {
        if row.rhs != 0 {
            writeln!(out, "    RHS {} {}", row.name, row.rhs).unwrap();
        }
    }
    out.push_str("BOUNDS\n");
    for v in &model.vars {
        writeln!(out, " UP BND {} 1", v.name).unwrap();
    }
    out.push_str("ENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::model::{build_model, ModelOptions};
    use crate::pathing::enumerate_paths;
    use crate::scenario::{make_scenario, PresetSize};

    #[test]
    fn empty_demand_objective_has_only_switch_on_costs() {
        let mut s = make_scenario(PresetSize::Small, 30, 1);
        s.demands.clear();
        let p = enumerate_paths(&s.topology, s.path_cutoff).unwrap();
        let m = build_model(&s, &p, ModelOptions::default()).unwrap();
        let lp = export(&m, ExportFormat::Lp);
        let objective = lp.split("Subject To").next().unwrap();
        assert!(objective.contains("- 200 z_e0 - 200 z_e1"), "{objective}");
        assert!(!objective.contains("w_r"));
        assert!(lp.ends_with("End\n"));
    }

    #[test]
    fn exports_are_deterministic_and_wrapped() {
        let s = make_scenario(PresetSize::Small, 30, 7);
        let p = enumerate_paths(&s.topology, s.path_cutoff).unwrap();
        let a = build_model(&s, &p, ModelOptions::default()).unwrap();
        let b = build_model(&s, &p, ModelOptions::default()).unwrap();
        for f in [ExportFormat::Lp, ExportFormat::Mps] {
            assert_eq!(export(&a, f), export(&b, f));
        }
        let lp = export(&a, ExportFormat::Lp);
        assert!(lp.lines().all(|l| l.len() <= LP_WIDTH + 40));
    }

    #[test]
    fn mps_lists_every_row_and_bound() {
        let s = make_scenario(PresetSize::Small, 30, 3);
        let p = enumerate_paths(&s.topology, s.path_cutoff).unwrap();
        let m = build_model(&s, &p, ModelOptions::default()).unwrap();
        let mps = export(&m, ExportFormat::Mps);
        let nonempty = m.rows.iter().filter(|r| !r.terms.is_empty()).count();
        let rows_section = mps.split("COLUMNS").next().unwrap();
        assert_eq!(
            rows_section
                .lines()
                .filter(|l| l.starts_with(" L ") || l.starts_with(" E "))
                .count(),
            nonempty
        );
        assert_eq!(mps.lines().filter(|l| l.starts_with(" UP BND")).count(), m.var_count());
        assert!(mps.ends_with("ENDATA\n"));
    }

    #[test]
    fn format_parses() {
        assert_eq!("lp".parse::<ExportFormat>(), Ok(ExportFormat::Lp));
        assert_eq!("mps".parse::<ExportFormat>(), Ok(ExportFormat::Mps));
        assert!("csv".parse::<ExportFormat>().is_err());
    }
}
