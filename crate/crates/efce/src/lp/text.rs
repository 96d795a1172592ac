//! Human-readable LP text format (`Maximize / Subject To / Bounds / End`)
//! for handing problems to external solvers, plus a loader for solution
//! files so external answers can be audited in place.

use super::{LinearProgram, Relation, VarId};
use crate::error::{invalid, Error, Result};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

pub fn write_lp<W: Write>(lp: &LinearProgram, mut w: W) -> Result<()> {
    writeln!(w, "{}", if lp.maximize { "Maximize" } else { "Minimize" })?;
    write!(w, " obj:")?;
    let mut any = false;
    for v in lp.vars().iter() {
        if v.obj != 0.0 {
            write!(w, " {} {}", coeff(v.obj, any), v.name)?;
            any = true;
        }
    }
    if !any {
        write!(
            w,
            " 0 {}",
            lp.vars().first().map(|v| v.name.as_str()).unwrap_or("x0")
        )?;
    }
    writeln!(w)?;
    writeln!(w, "Subject To")?;
    for row in lp.rows() {
        write!(w, " {}:", row.name)?;
        let mut first = true;
        for &(v, c) in &row.terms {
            if c != 0.0 {
                write!(w, " {} {}", coeff(c, !first), lp.vars()[v as usize].name)?;
                first = false;
            }
        }
        if first {
            write!(
                w,
                " 0 {}",
                lp.vars().first().map(|v| v.name.as_str()).unwrap_or("x0")
            )?;
        }
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        writeln!(w, " {} {}", rel, num(row.rhs))?;
    }
    writeln!(w, "Bounds")?;
    for v in lp.vars() {
        match (v.lo.is_finite(), v.hi.is_finite()) {
            (false, false) => writeln!(w, " {} free", v.name)?,
            (true, false) => {
                // `0 <= x` is the format's default; spell out the rest.
                if v.lo != 0.0 {
                    writeln!(w, " {} <= {}", num(v.lo), v.name)?;
                }
            }
            (true, true) => {
                if v.lo == v.hi {
                    writeln!(w, " {} = {}", v.name, num(v.lo))?;
                } else {
                    writeln!(w, " {} <= {} <= {}", num(v.lo), v.name, num(v.hi))?;
                }
            }
            (false, true) => writeln!(w, " -inf <= {} <= {}", v.name, num(v.hi))?,
        }
    }
    writeln!(w, "End")?;
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn coeff(c: f64, with_sign: bool) -> String {
    if with_sign {
        if c >= 0.0 {
            format!("+ {}", num(c))
        } else {
            format!("- {}", num(-c))
        }
    } else {
        num(c)
    }
}

pub fn parse_lp<R: Read>(r: R) -> Result<LinearProgram> {
    #[derive(PartialEq)]
    enum Section {
        Start,
        Objective,
        Rows,
        Bounds,
        Done,
    }
    let reader = BufReader::new(r);
    let mut section = Section::Start;
    let mut maximize = true;
    let mut obj_line = String::new();
    let mut row_lines: Vec<(usize, String)> = Vec::new();
    let mut bound_lines: Vec<(usize, String)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('\\') {
            continue;
        }
        match trimmed {
            "Maximize" => {
                maximize = true;
                section = Section::Objective;
                continue;
            }
            "Minimize" => {
                maximize = false;
                section = Section::Objective;
                continue;
            }
            "Subject To" => {
                section = Section::Rows;
                continue;
            }
            "Bounds" => {
                section = Section::Bounds;
                continue;
            }
            "End" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Objective => {
                obj_line.push(' ');
                obj_line.push_str(trimmed);
            }
            Section::Rows => row_lines.push((lineno, trimmed.to_string())),
            Section::Bounds => bound_lines.push((lineno, trimmed.to_string())),
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unexpected content `{trimmed}`"),
                })
            }
        }
    }
    if section != Section::Done {
        return Err(invalid("LP file missing End marker"));
    }

    let mut lp = LinearProgram::new(maximize);
    let mut var_ids: HashMap<String, VarId> = HashMap::new();

    fn intern(
        lp: &mut LinearProgram,
        var_ids: &mut HashMap<String, VarId>,
        name: &str,
    ) -> VarId {
        if let Some(&id) = var_ids.get(name) {
            return id;
        }
        let id = lp.add_nonneg(name.to_string(), 0.0);
        var_ids.insert(name.to_string(), id);
        id
    }

    // Objective: `obj: c x [+ c x ...]`.
    let body = obj_line
        .split_once(':')
        .map(|(_, b)| b.to_string())
        .unwrap_or(obj_line);
    for (name, c) in parse_terms(&body, 0)? {
        let id = intern(&mut lp, &mut var_ids, &name);
        lp.set_objective(id, c);
    }

    for (lineno, line) in row_lines {
        let (name, body) = line.split_once(':').ok_or(Error::Parse {
            line: lineno,
            message: "row missing name".to_string(),
        })?;
        let (rel, pos, skip) = if let Some(p) = body.find("<=") {
            (Relation::Le, p, 2)
        } else if let Some(p) = body.find(">=") {
            (Relation::Ge, p, 2)
        } else if let Some(p) = body.find('=') {
            (Relation::Eq, p, 1)
        } else {
            return Err(Error::Parse {
                line: lineno,
                message: "row missing relation".to_string(),
            });
        };
        let lhs = &body[..pos];
        let rhs_str = body[pos + skip..].trim();
        let rhs: f64 = rhs_str.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad rhs `{rhs_str}`"),
        })?;
        let mut terms = Vec::new();
        for (vname, c) in parse_terms(lhs, lineno)? {
            let id = intern(&mut lp, &mut var_ids, &vname);
            terms.push((id, c));
        }
        lp.add_row(name.trim().to_string(), rel, rhs, terms)?;
    }

    for (lineno, line) in bound_lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |m: &str| Error::Parse {
            line: lineno,
            message: m.to_string(),
        };
        match toks.as_slice() {
            [name, "free"] => {
                let id = intern(&mut lp, &mut var_ids, name);
                lp.set_bounds(id, f64::NEG_INFINITY, f64::INFINITY);
            }
            [name, "=", v] => {
                let id = intern(&mut lp, &mut var_ids, name);
                let x: f64 = v.parse().map_err(|_| bad("bad bound"))?;
                lp.set_bounds(id, x, x);
            }
            [lo, "<=", name, "<=", hi] => {
                let id = intern(&mut lp, &mut var_ids, name);
                let lo = if *lo == "-inf" {
                    f64::NEG_INFINITY
                } else {
                    lo.parse().map_err(|_| bad("bad bound"))?
                };
                let hi = hi.parse().map_err(|_| bad("bad bound"))?;
                lp.set_bounds(id, lo, hi);
            }
            [lo, "<=", name] => {
                let id = intern(&mut lp, &mut var_ids, name);
                let lo = lo.parse().map_err(|_| bad("bad bound"))?;
                let hi = lp.vars()[id as usize].hi;
                lp.set_bounds(id, lo, hi);
            }
            [name, "<=", hi] => {
                let id = intern(&mut lp, &mut var_ids, name);
                let lo = lp.vars()[id as usize].lo;
                lp.set_bounds(id, lo, hi.parse().map_err(|_| bad("bad bound"))?);
            }
            _ => return Err(bad("unrecognized bound line")),
        }
    }
    Ok(lp)
}

/// Parses `c x + c x - x ...` into (name, coefficient) pairs.
fn parse_terms(s: &str, lineno: usize) -> Result<Vec<(String, f64)>> {
    let mut out: Vec<(String, f64)> = Vec::new();
    let mut sign = 1.0;
    let mut pending: Option<f64> = None;
    for tok in s.split_whitespace() {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    if pending.is_some() {
                        return Err(Error::Parse {
                            line: lineno,
                            message: format!("two consecutive numbers near `{tok}`"),
                        });
                    }
                    pending = Some(v);
                } else {
                    let c = pending.take().unwrap_or(1.0) * sign;
                    out.push((tok.to_string(), c));
                    sign = 1.0;
                }
            }
        }
    }
    if pending.is_some() {
        return Err(Error::Parse {
            line: lineno,
            message: "dangling coefficient".to_string(),
        });
    }
    Ok(out)
}

/// FNV-1a over a canonical rendering of the constraint matrix, objective,
/// and bounds. Stable across exports and re-imports.
pub fn matrix_hash(lp: &LinearProgram) -> u64 {
    let mut rows: Vec<String> = lp
        .rows()
        .iter()
        .map(|r| {
            let mut terms: Vec<(String, f64)> = r
                .terms
                .iter()
                .filter(|&&(_, c)| c != 0.0)
                .map(|&(v, c)| (lp.vars()[v as usize].name.clone(), c))
                .collect();
            terms.sort_by(|a, b| a.0.cmp(&b.0));
            let rel = match r.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let terms: Vec<String> = terms
                .into_iter()
                .map(|(n, c)| format!("{c:?}*{n}"))
                .collect();
            format!("{}|{}|{:?}", terms.join("+"), rel, r.rhs)
        })
        .collect();
    rows.sort();
    let mut vars: Vec<String> = lp
        .vars()
        .iter()
        .map(|v| format!("{}|{:?}|{:?}|{:?}", v.name, v.lo, v.hi, v.obj))
        .collect();
    vars.sort();

    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |s: &str| {
        for b in s.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x100000001b3);
    };
    eat(if lp.maximize { "max" } else { "min" });
    for r in &rows {
        eat(r);
    }
    for v in &vars {
        eat(v);
    }
    h
}

/// Reads `name value` lines into a vector aligned with the program's
/// variables; unknown names are rejected, missing ones default to 0.
pub fn read_solution<R: Read>(lp: &LinearProgram, r: R) -> Result<Vec<f64>> {
    let name_to_id: HashMap<&str, usize> = lp
        .vars()
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    let mut values = vec![0.0; lp.num_vars()];
    let reader = BufReader::new(r);
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let name = it.next().unwrap();
        let val: f64 = it.next().and_then(|t| t.parse().ok()).ok_or(Error::Parse {
            line: lineno,
            message: "expected `name value`".to_string(),
        })?;
        let &id = name_to_id.get(name).ok_or(Error::Parse {
            line: lineno,
            message: format!("unknown variable `{name}`"),
        })?;
        values[id] = val;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_lp() -> LinearProgram {
        let mut lp = LinearProgram::new(true);
        let x = lp.add_nonneg("x1", 3.0);
        let y = lp.add_var("y", -1.0, 2.5, -0.5);
        let z = lp.add_free("z", 0.0);
        let f = lp.add_var("fixed", 1.0, 1.0, 0.0);
        lp.add_row("c0", Relation::Le, 5.0, vec![(x, 1.0), (y, 2.0)])
            .unwrap();
        lp.add_row("c1", Relation::Eq, 0.0, vec![(z, 1.0), (x, -1.0), (f, 0.25)])
            .unwrap();
        lp.add_row("c2", Relation::Ge, -1.0, vec![(y, -1.5), (z, 1.0)])
            .unwrap();
        lp
    }

    #[test]
    fn export_import_identical_hash() {
        let lp = sample_lp();
        let mut buf = Vec::new();
        write_lp(&lp, &mut buf).unwrap();
        let lp2 = parse_lp(&buf[..]).unwrap();
        assert_eq!(matrix_hash(&lp), matrix_hash(&lp2));
        let mut buf2 = Vec::new();
        write_lp(&lp2, &mut buf2).unwrap();
        let lp3 = parse_lp(&buf2[..]).unwrap();
        assert_eq!(matrix_hash(&lp2), matrix_hash(&lp3));
    }

    #[test]
    fn solution_file_audits() {
        let lp = sample_lp();
        let text = "x1 2.0\ny 1.5\nz 1.75\nfixed 1.0\n";
        let values = read_solution(&lp, text.as_bytes()).unwrap();
        assert_eq!(values, vec![2.0, 1.5, 1.75, 1.0]);
        assert!(lp.residual(&values) < 1e-12);
        assert!((lp.objective_value(&values) - (6.0 - 0.75)).abs() < 1e-12);
    }
}
