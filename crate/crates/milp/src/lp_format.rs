//! LP-format export and plain-text solution import.
//!
//! The dialect is the common CPLEX/Gurobi LP subset: `Minimize`/`Maximize`,
//! `Subject To`, `Bounds`, `General`, `Binary`, `End`. Every coefficient is
//! written with 17 significant digits (C `%.17g`), so a reader recovers the
//! exact `f64`.

use std::fmt::Write as _;

use crate::error::{ExportError, ImportError};
use crate::model::{MilpModel, ObjSense, VarId, VarKind};

const TERMS_PER_LINE: usize = 8;

/// Formats `value` like C's `%.17g`.
pub fn format_g17(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if value.is_nan() {
        return "nan".into();
    }
    let sci = format!("{:.16e}", value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", mantissa, sign, exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        strip_zeros(&format!("{:.*}", decimals, value)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_terms(out: &mut String, terms: &[(VarId, f64)], model: &MilpModel) {
    if terms.is_empty() {
        match model.variables().first() {
            Some(v) => {
                let _ = write!(out, " 0 {}", v.name);
            }
            None => out.push_str(" 0"),
        }
        return;
    }
    for (i, &(v, c)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {} {} {}", sign, format_g17(c.abs()), model.variable(v).name);
    }
}

fn write_name_list(out: &mut String, names: &[&str]) {
    for chunk in names.chunks(TERMS_PER_LINE) {
        out.push(' ');
        out.push_str(&chunk.join(" "));
        out.push('\n');
    }
}

/// Renders the model as LP text. Output depends only on insertion order.
pub fn export_lp(model: &MilpModel) -> Result<String, ExportError> {
    for v in model.variables() {
        if v.kind.is_integral() && !(v.lower.is_finite() && v.upper.is_finite()) {
            return Err(ExportError::UnboundedInteger(v.name.clone()));
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "\\ Model: {}", model.name());
    let obj = model.objective();
    out.push_str(match obj.sense {
        ObjSense::Minimize => "Minimize\n",
        ObjSense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    write_terms(&mut out, &obj.terms, model);
    if obj.constant != 0.0 {
        let sign = if obj.constant < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {} {}", sign, format_g17(obj.constant.abs()));
    }
    out.push('\n');

    out.push_str("Subject To\n");
    for (_, c) in model.constraints() {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, &c.terms, model);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), format_g17(c.rhs));
    }

    out.push_str("Bounds\n");
    for v in model.variables() {
        let (lo, hi) = (v.lower, v.upper);
        if v.kind == VarKind::Binary && lo == 0.0 && hi == 1.0 {
            continue;
        }
        let line = if lo == hi {
            format!(" {} = {}", v.name, format_g17(lo))
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            format!(" {} free", v.name)
        } else if hi == f64::INFINITY {
            format!(" {} >= {}", v.name, format_g17(lo))
        } else if lo == f64::NEG_INFINITY {
            format!(" -inf <= {} <= {}", v.name, format_g17(hi))
        } else {
            format!(" {} <= {} <= {}", format_g17(lo), v.name, format_g17(hi))
        };
        out.push_str(&line);
        out.push('\n');
    }

    let generals: Vec<&str> =
        model.variables().iter().filter(|v| v.kind == VarKind::Integer).map(|v| v.name.as_str()).collect();
    if !generals.is_empty() {
        out.push_str("General\n");
        write_name_list(&mut out, &generals);
    }
    let binaries: Vec<&str> =
        model.variables().iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        write_name_list(&mut out, &binaries);
    }
    out.push_str("End\n");
    Ok(out)
}

/// Reads `name value` lines into a full assignment indexed by [`VarId`].
///
/// Blank lines and `#` comments are skipped. Variables that are not mentioned
/// take their lower bound (or 0 when the lower bound is infinite).
pub fn import_solution(model: &MilpModel, text: &str) -> Result<Vec<f64>, ImportError> {
    let mut values: Vec<f64> = model
        .variables()
        .iter()
        .map(|v| {
            if v.lower.is_finite() {
                v.lower
            } else if v.upper.is_finite() {
                v.upper.min(0.0)
            } else {
                0.0
            }
        })
        .collect();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(num), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(ImportError::Malformed { line: line_no });
        };
        let id = model
            .var_by_name(name)
            .ok_or_else(|| ImportError::UnknownVariable { line: line_no, name: name.to_string() })?;
        let value: f64 = num
            .parse()
            .map_err(|_| ImportError::BadNumber { line: line_no, text: num.to_string() })?;
        values[id.0] = value;
    }
    Ok(values)
}

/// Writes an assignment in the `name value` format accepted by [`import_solution`].
pub fn write_solution(model: &MilpModel, values: &[f64]) -> String {
    let mut out = String::new();
    for (v, x) in model.variables().iter().zip(values) {
        let _ = writeln!(out, "{} {}", v.name, format_g17(*x));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinExpr, Sense, VarSpec};

    #[test]
    fn g17_matches_printf() {
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(-2.5), "-2.5");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(1.25e-5), "1.2500000000000001e-05");
        assert_eq!(format_g17(10.429e6), "10429000");
        assert_eq!(format_g17(1e17), "1e+17");
        assert_eq!(format_g17(123456789012345678.0), "1.2345678901234568e+17");
        assert_eq!(format_g17(0.0001), "0.0001");
        assert_eq!(format_g17(-0.0), "0");
    }

    fn one_var() -> MilpModel {
        let mut m = MilpModel::new("golden");
        let x = m.add_variable(VarSpec::continuous("x", 0.0, f64::INFINITY)).unwrap();
        m.add_constraint(&LinExpr::term(x, 1.0), Sense::Ge, 1.0, "c1").unwrap();
        m.set_objective(ObjSense::Minimize, &LinExpr::term(x, 1.0)).unwrap();
        m
    }

    #[test]
    fn golden_single_variable() {
        let text = export_lp(&one_var()).unwrap();
        let expected = "\\ Model: golden\nMinimize\n obj: + 1 x\nSubject To\n c1: + 1 x >= 1\nBounds\n x >= 0\nEnd\n";
        assert_eq!(text, expected);
        assert_eq!(export_lp(&one_var()).unwrap(), text);
    }

    #[test]
    fn binary_section() {
        let mut m = one_var();
        let y = m.add_variable(VarSpec::binary("y")).unwrap();
        let n = m.add_variable(VarSpec::integer("n", 0.0, 5.0)).unwrap();
        m.add_constraint(&LinExpr::term(y, 2.0).add(n, -1.0), Sense::Le, 0.0, "link").unwrap();
        let text = export_lp(&m).unwrap();
        assert!(text.contains("Binary\n y\n"));
        assert!(text.contains("General\n n\n"));
        assert!(text.contains(" link: + 2 y - 1 n <= 0\n"));
        assert!(text.contains(" 0 <= n <= 5\n"));
        assert!(!text.contains("<= y <="));
    }

    #[test]
    fn unbounded_integer_is_rejected() {
        let mut m = MilpModel::new("u");
        m.add_variable(VarSpec::integer("n", 0.0, f64::INFINITY)).unwrap();
        assert!(matches!(export_lp(&m), Err(ExportError::UnboundedInteger(_))));
    }

    #[test]
    fn import_examples() {
        let m = one_var();
        assert_eq!(import_solution(&m, "x 1.0").unwrap(), vec![1.0]);
        assert_eq!(import_solution(&m, "").unwrap(), vec![0.0]);
        assert!(matches!(import_solution(&m, "q 3.0"), Err(ImportError::UnknownVariable { line: 1, .. })));
        assert!(matches!(import_solution(&m, "\nx abc"), Err(ImportError::BadNumber { line: 2, .. })));
        assert!(matches!(import_solution(&m, "x"), Err(ImportError::Malformed { line: 1 })));
        assert_eq!(import_solution(&m, "# Objective value = 3\nx 2").unwrap(), vec![2.0]);
    }

    #[test]
    fn written_solution_reads_back() {
        let m = one_var();
        let text = write_solution(&m, &[0.1]);
        assert_eq!(import_solution(&m, &text).unwrap(), vec![0.1]);
    }
}
