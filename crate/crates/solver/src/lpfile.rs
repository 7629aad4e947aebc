//! CPLEX LP text format: writer and a reader for the subset it emits.
//!
//! The objective lists every column (zeros included) in index order, so a
//! reader that registers columns on first sight rebuilds the same order and
//! a write, read, write cycle reproduces the file byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{SolverError, SolverResult};
use crate::model::{ConstraintSense, LinearModel, VarId};

const TERMS_PER_LINE: usize = 8;
const RESERVED: &[&str] = &[
    "inf", "infinity", "free", "end", "bounds", "bound", "binaries", "binary", "bin", "generals", "general", "gen",
    "st", "minimize", "minimise", "minimum", "min", "maximize", "maximise", "maximum", "max", "subject",
];

/// Formats with 15 significant digits in the shortest form that reads back
/// to the same double.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "+inf".into() } else { "-inf".into() };
    }
    let r: f64 = format!("{v:.14e}").parse().expect("formatted float parses");
    let a = r.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn check_name(name: &str) -> SolverResult<()> {
    let mut chars = name.chars();
    let ok = match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        _ => false,
    };
    if !ok || RESERVED.contains(&name.to_ascii_lowercase().as_str()) {
        return Err(SolverError::InvalidName(name.to_string()));
    }
    Ok(())
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) -> usize {
    let mut count = 0;
    for (c, name) in terms {
        if count > 0 && count % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        if count == 0 {
            if c < 0.0 {
                let _ = write!(out, " - {} {}", format_number(-c), name);
            } else {
                let _ = write!(out, " {} {}", format_number(c), name);
            }
        } else if c < 0.0 {
            let _ = write!(out, " - {} {}", format_number(-c), name);
        } else {
            let _ = write!(out, " + {} {}", format_number(c), name);
        }
        count += 1;
    }
    count
}

/// Renders `model` as LP text.
pub fn write_lp_string(model: &LinearModel) -> SolverResult<String> {
    model.validate()?;
    let mut row_names = std::collections::HashSet::new();
    for v in model.variables() {
        check_name(&v.name)?;
    }
    for c in model.constraints() {
        check_name(&c.name)?;
        if model.var_by_name(&c.name).is_some() || !row_names.insert(c.name.as_str()) {
            return Err(SolverError::DuplicateName(c.name.clone()));
        }
        if c.terms.iter().any(|&(_, a)| !a.is_finite()) {
            return Err(SolverError::NonFinite(format!("row {}", c.name)));
        }
    }
    let vars = model.variables();
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let n = write_terms(
        &mut out,
        model.objective().iter().zip(vars).map(|(&c, v)| (c, v.name.clone())),
    );
    let k = model.objective_constant();
    if k != 0.0 || n == 0 {
        if n == 0 {
            let _ = write!(out, " {}", format_number(k));
        } else if k < 0.0 {
            let _ = write!(out, " - {}", format_number(-k));
        } else {
            let _ = write!(out, " + {}", format_number(k));
        }
    }
    out.push_str("\nSubject To\n");
    for c in model.constraints() {
        let _ = write!(out, " {}:", c.name);
        let n = write_terms(&mut out, c.terms.iter().map(|&(v, a)| (a, vars[v.0].name.clone())));
        if n == 0 {
            out.push_str(" 0");
        }
        let _ = writeln!(out, " {} {}", c.sense, format_number(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in vars {
        if v.is_binary() && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        if v.lower == 0.0 && v.upper == f64::INFINITY {
            continue;
        }
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, format_number(v.lower));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", format_number(v.lower), v.name, format_number(v.upper));
        }
    }
    out.push_str("Binaries\n");
    let binaries: Vec<&str> = vars
        .iter()
        .filter(|v| v.is_binary() && v.lower == 0.0 && v.upper == 1.0)
        .map(|v| v.name.as_str())
        .collect();
    for chunk in binaries.chunks(TERMS_PER_LINE) {
        let _ = writeln!(out, " {}", chunk.join(" "));
    }
    let generals: Vec<&str> = vars
        .iter()
        .filter(|v| v.integer && !(v.is_binary() && v.lower == 0.0 && v.upper == 1.0))
        .map(|v| v.name.as_str())
        .collect();
    if !generals.is_empty() {
        out.push_str("Generals\n");
        for chunk in generals.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    Ok(out)
}

/// Writes `model` to `path` as LP text.
pub fn export_lp_file(model: &LinearModel, path: impl AsRef<Path>) -> SolverResult<()> {
    let text = write_lp_string(model)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_lp_file(path: impl AsRef<Path>) -> SolverResult<LinearModel> {
    let text = std::fs::read_to_string(path)?;
    parse_lp_str(&text)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Label(String),
    Sense(ConstraintSense),
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective { maximize: bool },
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_header(line: &str) -> Option<(Section, &str)> {
    let lower = line.to_ascii_lowercase();
    let trimmed = lower.trim_start();
    let offset = line.len() - trimmed.len();
    let first = trimmed.split_whitespace().next()?;
    let rest_at = |n: usize| &line[offset + n..];
    match first {
        "minimize" | "minimise" | "minimum" | "min" => Some((Section::Objective { maximize: false }, rest_at(first.len()))),
        "maximize" | "maximise" | "maximum" | "max" => Some((Section::Objective { maximize: true }, rest_at(first.len()))),
        "st" | "s.t." | "st:" => Some((Section::Constraints, rest_at(first.len()))),
        "subject" | "such" => {
            let mut words = trimmed.split_whitespace();
            words.next();
            if words.next() == Some("to") || words.next() == Some("that") {
                let idx = trimmed.find(" to").or_else(|| trimmed.find(" that")).unwrap();
                let len = if trimmed[idx..].starts_with(" to") { 3 } else { 5 };
                Some((Section::Constraints, rest_at(idx + len)))
            } else {
                None
            }
        }
        "bounds" | "bound" => Some((Section::Bounds, rest_at(first.len()))),
        "binaries" | "binary" | "bin" => Some((Section::Binaries, rest_at(first.len()))),
        "generals" | "general" | "gen" => Some((Section::Generals, rest_at(first.len()))),
        "end" => Some((Section::End, rest_at(first.len()))),
        _ => None,
    }
}

fn tokenize(line: &str, lineno: usize, out: &mut Vec<(Tok, usize)>) -> SolverResult<()> {
    let b = line.as_bytes();
    let mut i = 0;
    let err = |msg: String| SolverError::Parse { line: lineno, msg };
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' {
            out.push((Tok::Plus, lineno));
            i += 1;
        } else if c == '-' {
            out.push((Tok::Minus, lineno));
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let two = line.get(i..i + 2).unwrap_or("");
            let (sense, len) = match two {
                "<=" | "=<" => (ConstraintSense::Le, 2),
                ">=" | "=>" => (ConstraintSense::Ge, 2),
                _ => match c {
                    '<' => (ConstraintSense::Le, 1),
                    '>' => (ConstraintSense::Ge, 1),
                    _ => (ConstraintSense::Eq, 1),
                },
            };
            out.push((Tok::Sense(sense), lineno));
            i += len;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut k = i + 1;
                if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                    k += 1;
                }
                if k < b.len() && (b[k] as char).is_ascii_digit() {
                    while k < b.len() && (b[k] as char).is_ascii_digit() {
                        k += 1;
                    }
                    i = k;
                }
            }
            let s = &line[start..i];
            let v: f64 = s.parse().map_err(|_| err(format!("bad number {s:?}")))?;
            out.push((Tok::Num(v), lineno));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'.') {
                i += 1;
            }
            let word = &line[start..i];
            let mut k = i;
            while k < b.len() && b[k] == b' ' {
                k += 1;
            }
            if k < b.len() && b[k] == b':' {
                out.push((Tok::Label(word.to_string()), lineno));
                i = k + 1;
            } else {
                let lw = word.to_ascii_lowercase();
                if lw == "inf" || lw == "infinity" {
                    out.push((Tok::Num(f64::INFINITY), lineno));
                } else {
                    out.push((Tok::Ident(word.to_string()), lineno));
                }
            }
        } else {
            return Err(err(format!("unexpected character {c:?}")));
        }
    }
    Ok(())
}

struct Reader {
    model: LinearModel,
}

impl Reader {
    fn var(&mut self, name: &str, line: usize) -> SolverResult<VarId> {
        if let Some(v) = self.model.var_by_name(name) {
            return Ok(v);
        }
        self.model
            .add_var(name, 0.0, f64::INFINITY)
            .map_err(|e| SolverError::Parse { line, msg: e.to_string() })
    }

    /// Parses `[sign] [number] [ident]` terms until a sense, label or the end.
    /// Returns the terms and the sum of constant terms.
    fn expression(&mut self, toks: &[(Tok, usize)], pos: &mut usize) -> SolverResult<(Vec<(VarId, f64)>, f64)> {
        let mut terms = Vec::new();
        let mut constant = 0.0;
        while *pos < toks.len() {
            let mut sign = 1.0;
            let mut saw_any = false;
            while let Some((t, _)) = toks.get(*pos) {
                match t {
                    Tok::Plus => {}
                    Tok::Minus => sign = -sign,
                    _ => break,
                }
                saw_any = true;
                *pos += 1;
            }
            let mut coef = None;
            if let Some((Tok::Num(v), _)) = toks.get(*pos) {
                coef = Some(*v);
                *pos += 1;
            }
            match toks.get(*pos) {
                Some((Tok::Ident(name), line)) => {
                    let line = *line;
                    let name = name.clone();
                    *pos += 1;
                    let v = self.var(&name, line)?;
                    terms.push((v, sign * coef.unwrap_or(1.0)));
                }
                _ => match coef {
                    Some(c) => constant += sign * c,
                    None if saw_any => {
                        let line = toks.get(*pos).or(toks.last()).map_or(0, |t| t.1);
                        return Err(SolverError::Parse { line, msg: "dangling sign".into() });
                    }
                    None => break,
                },
            }
        }
        Ok((terms, constant))
    }
}

/// Parses LP text produced by [`write_lp_string`] (and the common subset of
/// the CPLEX format around it).
pub fn parse_lp_str(text: &str) -> SolverResult<LinearModel> {
    let mut section = Section::None;
    let mut objective: Vec<(Tok, usize)> = Vec::new();
    let mut maximize = false;
    let mut rows: Vec<(Tok, usize)> = Vec::new();
    let mut bounds: Vec<Vec<(Tok, usize)>> = Vec::new();
    let mut binaries: Vec<(Tok, usize)> = Vec::new();
    let mut generals: Vec<(Tok, usize)> = Vec::new();
    let mut seen_objective = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if section == Section::End {
            return Err(SolverError::Parse { line: lineno, msg: "content after End".into() });
        }
        let body = match section_header(line) {
            Some((s, rest)) => {
                if let Section::Objective { maximize: m } = s {
                    if seen_objective {
                        return Err(SolverError::Parse { line: lineno, msg: "second objective section".into() });
                    }
                    seen_objective = true;
                    maximize = m;
                }
                section = s;
                rest
            }
            None => line,
        };
        let target = match section {
            Section::None => {
                return Err(SolverError::Parse { line: lineno, msg: "expected an objective section".into() })
            }
            Section::Objective { .. } => &mut objective,
            Section::Constraints => &mut rows,
            Section::Bounds => {
                let mut v = Vec::new();
                tokenize(body, lineno, &mut v)?;
                if !v.is_empty() {
                    bounds.push(v);
                }
                continue;
            }
            Section::Binaries => &mut binaries,
            Section::Generals => &mut generals,
            Section::End => {
                if !body.trim().is_empty() {
                    return Err(SolverError::Parse { line: lineno, msg: "content after End".into() });
                }
                continue;
            }
        };
        tokenize(body, lineno, target)?;
    }
    if section != Section::End {
        return Err(SolverError::Parse { line: text.lines().count(), msg: "missing End".into() });
    }

    let mut r = Reader { model: LinearModel::new() };

    // Objective.
    let mut pos = 0;
    if let Some((Tok::Label(_), _)) = objective.first() {
        pos = 1;
    }
    let (terms, constant) = r.expression(&objective, &mut pos)?;
    if let Some((t, line)) = objective.get(pos) {
        return Err(SolverError::Parse { line: *line, msg: format!("unexpected {t:?} in objective") });
    }
    let flip = if maximize { -1.0 } else { 1.0 };
    for (v, c) in terms {
        r.model.add_objective(v, flip * c);
    }
    r.model.set_objective_constant(flip * constant);

    // Constraints.
    let mut pos = 0;
    while pos < rows.len() {
        let name = match &rows[pos] {
            (Tok::Label(l), _) => {
                pos += 1;
                l.clone()
            }
            _ => format!("R{}", r.model.num_constraints() + 1),
        };
        let line = rows.get(pos.saturating_sub(1)).map_or(0, |t| t.1);
        let (terms, lhs_const) = r.expression(&rows, &mut pos)?;
        let sense = match rows.get(pos) {
            Some((Tok::Sense(s), _)) => *s,
            other => {
                let line = other.map_or(line, |t| t.1);
                return Err(SolverError::Parse { line, msg: format!("row {name}: expected a comparison") });
            }
        };
        pos += 1;
        let mut sign = 1.0;
        while let Some((Tok::Minus | Tok::Plus, _)) = rows.get(pos) {
            if rows[pos].0 == Tok::Minus {
                sign = -sign;
            }
            pos += 1;
        }
        let rhs = match rows.get(pos) {
            Some((Tok::Num(v), _)) if v.is_finite() => sign * v,
            other => {
                let line = other.map_or(line, |t| t.1);
                return Err(SolverError::Parse { line, msg: format!("row {name}: expected a finite right-hand side") });
            }
        };
        pos += 1;
        if r.model.constraints().iter().any(|c| c.name == name) {
            return Err(SolverError::Parse { line, msg: format!("duplicate row name {name}") });
        }
        r.model
            .add_constraint(name, terms, sense, rhs - lhs_const)
            .map_err(|e| SolverError::Parse { line, msg: e.to_string() })?;
    }

    // Bounds, one statement per line.
    for toks in &bounds {
        let line = toks[0].1;
        let perr = |msg: &str| SolverError::Parse { line, msg: msg.to_string() };
        let mut items: Vec<Tok> = Vec::new();
        let mut sign = 1.0;
        for (t, _) in toks {
            match t {
                Tok::Minus => sign = -sign,
                Tok::Plus => {}
                Tok::Num(v) => {
                    items.push(Tok::Num(sign * v));
                    sign = 1.0;
                }
                other => items.push(other.clone()),
            }
        }
        let (var, lo, hi) = match items.as_slice() {
            [Tok::Ident(n), Tok::Ident(f)] if f.eq_ignore_ascii_case("free") => {
                (n.clone(), Some(f64::NEG_INFINITY), Some(f64::INFINITY))
            }
            [Tok::Num(a), Tok::Sense(ConstraintSense::Le), Tok::Ident(n), Tok::Sense(ConstraintSense::Le), Tok::Num(b)] => {
                (n.clone(), Some(*a), Some(*b))
            }
            [Tok::Ident(n), Tok::Sense(s), Tok::Num(v)] => match s {
                ConstraintSense::Le => (n.clone(), None, Some(*v)),
                ConstraintSense::Ge => (n.clone(), Some(*v), None),
                ConstraintSense::Eq => (n.clone(), Some(*v), Some(*v)),
            },
            [Tok::Num(v), Tok::Sense(s), Tok::Ident(n)] => match s {
                ConstraintSense::Le => (n.clone(), Some(*v), None),
                ConstraintSense::Ge => (n.clone(), None, Some(*v)),
                ConstraintSense::Eq => (n.clone(), Some(*v), Some(*v)),
            },
            _ => return Err(perr("unrecognised bound statement")),
        };
        let id = r.var(&var, line)?;
        let cur = r.model.variable(id).clone();
        let lo = lo.unwrap_or(cur.lower);
        let hi = hi.unwrap_or(cur.upper);
        r.model.set_bounds(id, lo, hi).map_err(|e| perr(&e.to_string()))?;
    }

    for (toks, binary) in [(&binaries, true), (&generals, false)] {
        for (t, line) in toks {
            let Tok::Ident(name) = t else {
                return Err(SolverError::Parse { line: *line, msg: format!("expected a column name, got {t:?}") });
            };
            let id = r.var(name, *line)?;
            r.model.set_integer(id, true);
            if binary {
                r.model
                    .set_bounds(id, 0.0, 1.0)
                    .map_err(|e| SolverError::Parse { line: *line, msg: e.to_string() })?;
            }
        }
    }
    Ok(r.model)
}
