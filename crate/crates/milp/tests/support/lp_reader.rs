//! Minimal reader for the LP dialect written by `export_lp`, used to check
//! that exported files reproduce the in-memory coefficients exactly.

use std::collections::BTreeMap;

#[derive(Debug, Default, PartialEq)]
pub struct ParsedLp {
    pub maximize: bool,
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<(String, Vec<(String, f64)>, String, f64)>,
    pub bounds: BTreeMap<String, (f64, f64)>,
    pub generals: Vec<String>,
    pub binaries: Vec<String>,
}

fn num(tok: &str) -> f64 {
    match tok {
        "inf" | "+inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => tok.parse().unwrap_or_else(|_| panic!("bad number {tok}")),
    }
}

fn parse_terms(tokens: &[&str]) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let sign = match tokens[i] {
            "+" => 1.0,
            "-" => -1.0,
            t => panic!("expected sign, got {t}"),
        };
        out.push((tokens[i + 2].to_string(), sign * num(tokens[i + 1])));
        i += 3;
    }
    out
}

pub fn parse(text: &str) -> ParsedLp {
    let mut lp = ParsedLp::default();
    let mut section = "";
    let mut stmt: Vec<String> = Vec::new();
    let mut statements: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        if line.starts_with('\\') {
            continue;
        }
        let trimmed = line.trim();
        match trimmed {
            "Minimize" | "Maximize" | "Subject To" | "Bounds" | "General" | "Binary" | "End" => {
                if !stmt.is_empty() {
                    statements.push((section.to_string(), stmt.join(" ")));
                    stmt.clear();
                }
                if trimmed == "Maximize" {
                    lp.maximize = true;
                }
                section = match trimmed {
                    "Minimize" | "Maximize" => "obj",
                    "Subject To" => "rows",
                    "Bounds" => "bounds",
                    "General" => "gen",
                    "Binary" => "bin",
                    _ => "end",
                };
                continue;
            }
            _ => {}
        }
        // continuation lines of a statement are indented by three spaces
        if line.starts_with("   ") && !stmt.is_empty() {
            stmt.push(trimmed.to_string());
        } else {
            if !stmt.is_empty() {
                statements.push((section.to_string(), stmt.join(" ")));
                stmt.clear();
            }
            stmt.push(trimmed.to_string());
        }
    }
    for (section, s) in statements {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        match section.as_str() {
            "obj" => {
                let body = &tokens[1..];
                if body.len() >= 2 && body[0] == "0" {
                    continue;
                }
                lp.objective = parse_terms(body);
            }
            "rows" => {
                let name = tokens[0].trim_end_matches(':').to_string();
                let n = tokens.len();
                let (sense, rhs) = (tokens[n - 2].to_string(), num(tokens[n - 1]));
                let body = &tokens[1..n - 2];
                let terms = if body.len() == 2 && body[0] == "0" { Vec::new() } else { parse_terms(body) };
                lp.rows.push((name, terms, sense, rhs));
            }
            "bounds" => {
                let b = match tokens.as_slice() {
                    [v, "=", x] => (v.to_string(), (num(x), num(x))),
                    [v, "free"] => (v.to_string(), (f64::NEG_INFINITY, f64::INFINITY)),
                    [v, ">=", x] => (v.to_string(), (num(x), f64::INFINITY)),
                    [l, "<=", v, "<=", u] => (v.to_string(), (num(l), num(u))),
                    other => panic!("bad bound {other:?}"),
                };
                lp.bounds.insert(b.0, b.1);
            }
            "gen" => lp.generals.extend(tokens.iter().map(|t| t.to_string())),
            "bin" => lp.binaries.extend(tokens.iter().map(|t| t.to_string())),
            _ => {}
        }
    }
    lp
}
