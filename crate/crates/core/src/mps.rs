//! Free-format MPS reader and writer.
//!
//! Parsing happens in two steps: [`parse_document`] collects the sections
//! into an [`MpsDocument`] and [`MpsDocument::to_general`] lowers it into a
//! [`GeneralLp`] (`min cᵀx, A_E x = b_E, A_I x ≤ b_I, x ≥ 0`).
//!
//! Lowering rules:
//! * `G` rows are negated into `≤` rows.
//! * A finite positive lower bound becomes a row `−x ≤ −l`; a negative or
//!   missing lower bound splits the column into `x⁺ − x⁻`, with the `x⁻`
//!   columns appended after all declared columns.
//! * Finite upper bounds become rows `x ≤ u`; `FX` becomes an equality row.
//! * Bound rows are appended after the declared rows of the same kind.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::GeneralLp;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowType {
    N,
    L,
    G,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundType {
    Lo,
    Up,
    Fx,
    Fr,
    Mi,
    Pl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpsDocument {
    pub name: String,
    pub rows: Vec<(RowType, String)>,
    /// Declared columns in order of first appearance.
    pub column_names: Vec<String>,
    /// `(column, row, value)` entries as read, duplicates included.
    pub entries: Vec<(String, String, f64)>,
    pub rhs: Vec<(String, f64)>,
    pub bounds: Vec<(BoundType, String, f64)>,
    pub objective_row: Option<String>,
    pub maximize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Name,
    Rows,
    Columns,
    Rhs,
    Bounds,
    ObjSense,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("malformed number '{tok}'")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(line, format!("non-finite number '{tok}'")))
    }
}

/// Name/value pairs trailing a data line, with an optional leading set name.
fn pairs<'a>(toks: &[&'a str], line: usize) -> Result<Vec<(&'a str, &'a str)>> {
    let body = match toks.len() {
        2 | 4 => toks,
        3 | 5 => &toks[1..],
        _ => return Err(parse_err(line, "expected name/value pairs")),
    };
    Ok(body.chunks(2).map(|p| (p[0], p[1])).collect())
}

pub fn parse_document(text: &str) -> Result<MpsDocument> {
    let mut doc = MpsDocument {
        name: String::new(),
        rows: Vec::new(),
        column_names: Vec::new(),
        entries: Vec::new(),
        rhs: Vec::new(),
        bounds: Vec::new(),
        objective_row: None,
        maximize: false,
    };
    let mut row_kind: HashMap<String, RowType> = HashMap::new();
    let mut col_seen: HashMap<String, ()> = HashMap::new();
    let mut section: Option<Section> = None;
    let mut ended = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let indented = raw.starts_with(' ') || raw.starts_with('\t');

        if !indented {
            let rest = &toks[1..];
            section = Some(match toks[0] {
                "NAME" => {
                    doc.name = rest.join(" ");
                    Section::Name
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "OBJSENSE" => {
                    if let Some(sense) = rest.first() {
                        doc.maximize = parse_sense(sense, line)?;
                    }
                    Section::ObjSense
                }
                "RANGES" => return Err(parse_err(line, "RANGES section is not supported")),
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(parse_err(line, format!("unknown section '{other}'"))),
            });
            continue;
        }

        match section {
            None | Some(Section::Name) => return Err(parse_err(line, "data line outside of a section")),
            Some(Section::ObjSense) => doc.maximize = parse_sense(toks[0], line)?,
            Some(Section::Rows) => {
                if toks.len() != 2 {
                    return Err(parse_err(line, "ROWS lines need a type and a name"));
                }
                let kind = match toks[0] {
                    "N" => RowType::N,
                    "L" => RowType::L,
                    "G" => RowType::G,
                    "E" => RowType::E,
                    t => return Err(parse_err(line, format!("unknown row type '{t}'"))),
                };
                let name = toks[1].to_string();
                if row_kind.insert(name.clone(), kind).is_some() {
                    return Err(parse_err(line, format!("duplicate row '{name}'")));
                }
                if kind == RowType::N {
                    if doc.objective_row.is_none() {
                        doc.objective_row = Some(name.clone());
                    } else {
                        log::warn!("line {line}: extra objective row '{name}' ignored");
                    }
                }
                doc.rows.push((kind, name));
            }
            Some(Section::Columns) => {
                if toks.len() >= 3 && toks[1].trim_matches('\'') == "MARKER" {
                    let marker = toks[2].trim_matches('\'');
                    if marker != "INTORG" && marker != "INTEND" {
                        return Err(parse_err(line, format!("unknown marker '{marker}'")));
                    }
                    log::warn!("line {line}: integer marker ignored, reading the LP relaxation");
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(parse_err(line, "COLUMNS lines need a column and row/value pairs"));
                }
                let col = toks[0].to_string();
                if col_seen.insert(col.clone(), ()).is_none() {
                    doc.column_names.push(col.clone());
                }
                for pair in toks[1..].chunks(2) {
                    if !row_kind.contains_key(pair[0]) {
                        return Err(parse_err(line, format!("undeclared row '{}'", pair[0])));
                    }
                    doc.entries.push((col.clone(), pair[0].to_string(), number(pair[1], line)?));
                }
            }
            Some(Section::Rhs) => {
                for (row, val) in pairs(&toks, line)? {
                    if !row_kind.contains_key(row) {
                        return Err(parse_err(line, format!("undeclared row '{row}'")));
                    }
                    doc.rhs.push((row.to_string(), number(val, line)?));
                }
            }
            Some(Section::Bounds) => {
                let kind = match toks[0] {
                    "LO" => BoundType::Lo,
                    "UP" => BoundType::Up,
                    "FX" => BoundType::Fx,
                    "FR" => BoundType::Fr,
                    "MI" => BoundType::Mi,
                    "PL" => BoundType::Pl,
                    t => return Err(parse_err(line, format!("unsupported bound type '{t}'"))),
                };
                let valued = matches!(kind, BoundType::Lo | BoundType::Up | BoundType::Fx);
                let (col, value) = match (valued, toks.len()) {
                    (true, 4) => (toks[2], number(toks[3], line)?),
                    (true, 3) => (toks[1], number(toks[2], line)?),
                    (false, 3) => (toks[2], 0.0),
                    (false, 2) => (toks[1], 0.0),
                    _ => return Err(parse_err(line, "malformed BOUNDS line")),
                };
                if !col_seen.contains_key(col) {
                    return Err(parse_err(line, format!("undeclared column '{col}'")));
                }
                doc.bounds.push((kind, col.to_string(), value));
            }
        }
    }
    if !ended {
        return Err(parse_err(text.lines().count(), "missing ENDATA"));
    }
    Ok(doc)
}

fn parse_sense(tok: &str, line: usize) -> Result<bool> {
    match tok {
        "MAX" | "MAXIMIZE" => Ok(true),
        "MIN" | "MINIMIZE" => Ok(false),
        t => Err(parse_err(line, format!("unknown objective sense '{t}'"))),
    }
}

/// Column bounds after all BOUNDS lines have been applied.
#[derive(Debug, Clone, Copy)]
struct Bounds {
    lower: f64,
    upper: f64,
    fixed: Option<f64>,
}

impl MpsDocument {
    pub fn to_general(&self) -> Result<GeneralLp> {
        let n0 = self.column_names.len();
        let col_index: HashMap<&str, usize> = self
            .column_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();

        let mut bounds = vec![
            Bounds {
                lower: 0.0,
                upper: f64::INFINITY,
                fixed: None,
            };
            n0
        ];
        for (kind, col, v) in &self.bounds {
            let b = &mut bounds[col_index[col.as_str()]];
            match kind {
                BoundType::Lo => b.lower = *v,
                BoundType::Up => {
                    if *v < 0.0 && b.lower == 0.0 {
                        log::warn!("negative upper bound on '{col}' with default lower bound; lower bound set to -inf");
                        b.lower = f64::NEG_INFINITY;
                    }
                    b.upper = *v
                }
                BoundType::Fx => b.fixed = Some(*v),
                BoundType::Fr => {
                    b.lower = f64::NEG_INFINITY;
                    b.upper = f64::INFINITY;
                }
                BoundType::Mi => b.lower = f64::NEG_INFINITY,
                BoundType::Pl => b.upper = f64::INFINITY,
            }
        }

        // column j of the file → (plus column, optional minus column)
        let mut split: Vec<Option<usize>> = vec![None; n0];
        let mut n = n0;
        for (j, b) in bounds.iter().enumerate() {
            let lower = b.fixed.unwrap_or(b.lower);
            if lower < 0.0 {
                split[j] = Some(n);
                n += 1;
            }
        }
        let obj = self.objective_row.as_deref();
        let sign = if self.maximize { -1.0 } else { 1.0 };

        let mut eq_rows: HashMap<&str, usize> = HashMap::new();
        let mut ineq_rows: HashMap<&str, (usize, f64)> = HashMap::new();
        for (kind, name) in &self.rows {
            match kind {
                RowType::E => {
                    let k = eq_rows.len();
                    eq_rows.insert(name, k);
                }
                RowType::L | RowType::G => {
                    let k = ineq_rows.len();
                    ineq_rows.insert(name, (k, if *kind == RowType::G { -1.0 } else { 1.0 }));
                }
                RowType::N => {}
            }
        }
        let (mut m_eq, mut m_ineq) = (eq_rows.len(), ineq_rows.len());
        let mut b_eq = vec![0.0; m_eq];
        let mut b_ineq = vec![0.0; m_ineq];
        let mut t_eq = Vec::new();
        let mut t_ineq = Vec::new();
        let mut c = vec![0.0; n];

        let push = |triplets: &mut Vec<(usize, usize, f64)>, row: usize, j: usize, v: f64| {
            triplets.push((row, j, v));
            if let Some(neg) = split[j] {
                triplets.push((row, neg, -v));
            }
        };

        for (col, row, v) in &self.entries {
            let j = col_index[col.as_str()];
            if Some(row.as_str()) == obj {
                c[j] += sign * v;
                if let Some(neg) = split[j] {
                    c[neg] -= sign * v;
                }
            } else if let Some(&k) = eq_rows.get(row.as_str()) {
                push(&mut t_eq, k, j, *v);
            } else if let Some(&(k, s)) = ineq_rows.get(row.as_str()) {
                push(&mut t_ineq, k, j, s * v);
            }
        }
        for (row, v) in &self.rhs {
            if Some(row.as_str()) == obj {
                log::warn!("objective constant on row '{row}' ignored");
            } else if let Some(&k) = eq_rows.get(row.as_str()) {
                b_eq[k] += v;
            } else if let Some(&(k, s)) = ineq_rows.get(row.as_str()) {
                b_ineq[k] += s * v;
            }
        }

        for (j, b) in bounds.iter().enumerate() {
            if let Some(v) = b.fixed {
                push(&mut t_eq, m_eq, j, 1.0);
                b_eq.push(v);
                m_eq += 1;
                continue;
            }
            if b.lower != 0.0 && b.lower.is_finite() {
                push(&mut t_ineq, m_ineq, j, -1.0);
                b_ineq.push(-b.lower);
                m_ineq += 1;
            }
            if b.upper.is_finite() {
                push(&mut t_ineq, m_ineq, j, 1.0);
                b_ineq.push(b.upper);
                m_ineq += 1;
            }
        }

        GeneralLp::new(
            SparseMatrix::from_triplets(m_eq, n, &t_eq)?,
            b_eq,
            SparseMatrix::from_triplets(m_ineq, n, &t_ineq)?,
            b_ineq,
            c,
        )
    }
}

/// Parses free-format MPS text into a minimization problem in general form.
pub fn parse_mps(text: &str) -> Result<GeneralLp> {
    parse_document(text)?.to_general()
}

pub fn read_mps_file(path: impl AsRef<std::path::Path>) -> Result<GeneralLp> {
    parse_mps(&std::fs::read_to_string(path)?)
}

/// Optional names for [`write_mps`]; missing names fall back to `E{i}`,
/// `L{i}` and `X{j}`.
#[derive(Debug, Clone, Default)]
pub struct MpsNames {
    pub problem: Option<String>,
    pub eq_rows: Option<Vec<String>>,
    pub ineq_rows: Option<Vec<String>>,
    pub columns: Option<Vec<String>>,
}

fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn pick(names: &Option<Vec<String>>, i: usize, prefix: &str) -> String {
    names
        .as_ref()
        .and_then(|v| v.get(i).cloned())
        .unwrap_or_else(|| format!("{prefix}{i}"))
}

/// Writes `gl` as free-format MPS. Every column is written, with an explicit
/// zero objective entry when it has no other coefficients, so the reparsed
/// problem has exactly the same shape.
pub fn write_mps(gl: &GeneralLp, names: Option<&MpsNames>) -> String {
    let default = MpsNames::default();
    let names = names.unwrap_or(&default);
    let eq: Vec<String> = (0..gl.m_eq()).map(|i| pick(&names.eq_rows, i, "E")).collect();
    let ineq: Vec<String> = (0..gl.m_ineq()).map(|i| pick(&names.ineq_rows, i, "L")).collect();
    let cols: Vec<String> = (0..gl.n()).map(|j| pick(&names.columns, j, "X")).collect();

    let mut per_col: Vec<Vec<(&str, f64)>> = vec![Vec::new(); gl.n()];
    for (j, &v) in gl.c.iter().enumerate() {
        if v != 0.0 {
            per_col[j].push(("OBJ", v));
        }
    }
    for (i, j, v) in gl.a_eq.triplets() {
        per_col[j].push((&eq[i], v));
    }
    for (i, j, v) in gl.a_ineq.triplets() {
        per_col[j].push((&ineq[i], v));
    }

    let mut out = String::new();
    writeln!(out, "NAME {}", names.problem.as_deref().unwrap_or("PDHG")).unwrap();
    out.push_str("ROWS\n N OBJ\n");
    for r in &eq {
        writeln!(out, " E {r}").unwrap();
    }
    for r in &ineq {
        writeln!(out, " L {r}").unwrap();
    }
    out.push_str("COLUMNS\n");
    for (j, entries) in per_col.iter().enumerate() {
        if entries.is_empty() {
            writeln!(out, " {} OBJ 0", cols[j]).unwrap();
        }
        for (row, v) in entries {
            writeln!(out, " {} {} {}", cols[j], row, fmt_num(*v)).unwrap();
        }
    }
    out.push_str("RHS\n");
    for (r, &v) in eq.iter().zip(&gl.b_eq).chain(ineq.iter().zip(&gl.b_ineq)) {
        if v != 0.0 {
            writeln!(out, " RHS {} {}", r, fmt_num(v)).unwrap();
        }
    }
    out.push_str("ENDATA\n");
    out
}
