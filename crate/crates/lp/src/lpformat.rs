//! Canonical LP-format text export.

use std::fmt::Write;

use crate::model::{ProgramModel, Relation, Sense, VarKind};

/// Formats `v` like C's `%.17g`: 17 significant digits, trailing zeros removed.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "+inf".to_string() } else { "-inf".to_string() };
    }
    let sci = format!("{:.16e}", v);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..17).contains(&exp) {
        let mant = trim_fraction(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        trim_fraction(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_terms(out: &mut String, model: &ProgramModel, terms: &[(usize, f64)]) {
    if terms.is_empty() {
        if let Some(v) = model.vars().first() {
            let _ = write!(out, " 0 {}", v.name);
        }
        return;
    }
    for (k, &(j, c)) in terms.iter().enumerate() {
        let name = &model.var(j).name;
        let mag = format_number(c.abs());
        match (k, c < 0.0) {
            (0, false) => {
                let _ = write!(out, " {mag} {name}");
            }
            (_, true) => {
                let _ = write!(out, " - {mag} {name}");
            }
            (_, false) => {
                let _ = write!(out, " + {mag} {name}");
            }
        }
    }
}

/// Deterministic LP text: objective, rows, bounds for every variable in
/// table order, and the binary section.
pub fn export_lp_text(model: &ProgramModel) -> String {
    let mut out = String::new();
    out.push_str(match model.objective().sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    write_terms(&mut out, model, &model.objective().terms);
    out.push_str("\nSubject To\n");
    for row in model.constraints() {
        let _ = write!(out, " {}:", row.name);
        write_terms(&mut out, model, &row.terms);
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {rel} {}", format_number(row.rhs));
    }
    out.push_str("Bounds\n");
    for v in model.vars() {
        let (lo, hi) = (v.lower, v.upper);
        let _ = match (lo.is_finite(), hi.is_finite()) {
            (false, false) => writeln!(out, " {} free", v.name),
            (true, false) => writeln!(out, " {} >= {}", v.name, format_number(lo)),
            (true, true) if lo == hi => writeln!(out, " {} = {}", v.name, format_number(lo)),
            _ => writeln!(out, " {} <= {} <= {}", format_number(lo), v.name, format_number(hi)),
        };
    }
    let binaries: Vec<&str> =
        model.vars().iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for b in binaries {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_use_seventeen_significant_digits() {
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(0.1), "0.10000000000000001");
        assert_eq!(format_number(-2.5), "-2.5");
        assert_eq!(format_number(1e7), "10000000");
        assert_eq!(format_number(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_number(1e20), "1e+20");
        assert_eq!(format_number(0.75), "0.75");
        assert_eq!(format_number(1.0 / 3.0), "0.33333333333333331");
    }
}
