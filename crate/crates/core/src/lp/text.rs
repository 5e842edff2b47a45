//! Text format, one item per line:
//!
//! ```text
//! vars theta x_0_0 x_0_1
//! max 1 0 0
//! <= 0.5 1 0 -1
//! bound theta 1
//! ```
//!
//! Constraint lines give the sense, the right-hand side, then one dense
//! coefficient per variable. Lines starting with `#` are comments.

use super::{Direction, LinearProgram, Sense};
use crate::error::{Error, Result};

pub(super) fn to_text(lp: &LinearProgram) -> String {
    let mut out = String::new();
    out.push_str("vars");
    for n in lp.names() {
        out.push(' ');
        out.push_str(n);
    }
    out.push('\n');
    out.push_str(match lp.direction() {
        Direction::Max => "max",
        Direction::Min => "min",
    });
    for c in lp.objective() {
        out.push_str(&format!(" {:?}", c));
    }
    out.push('\n');
    for i in 0..lp.num_rows() {
        let r = &lp.rows()[i];
        out.push_str(&format!("{} {:?}", r.sense.symbol(), r.rhs));
        for a in lp.dense_row(i) {
            out.push_str(&format!(" {:?}", a));
        }
        out.push('\n');
    }
    for (name, u) in lp.names().iter().zip(lp.upper_bounds()) {
        if let Some(u) = u {
            out.push_str(&format!("bound {} {:?}\n", name, u));
        }
    }
    out
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Lp(format!("line {}: bad number {:?}", line, tok)))
}

pub(super) fn from_text(s: &str) -> Result<LinearProgram> {
    let mut lines = s
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, vars) = lines
        .next()
        .ok_or_else(|| Error::Lp("empty program".into()))?;
    let mut toks = vars.split_whitespace();
    if toks.next() != Some("vars") {
        return Err(Error::Lp(format!("line {}: expected 'vars'", ln)));
    }
    let names: Vec<&str> = toks.collect();
    let (ln, obj) = lines
        .next()
        .ok_or_else(|| Error::Lp("missing objective".into()))?;
    let mut toks = obj.split_whitespace();
    let direction = match toks.next() {
        Some("max") => Direction::Max,
        Some("min") => Direction::Min,
        _ => return Err(Error::Lp(format!("line {}: expected 'max' or 'min'", ln))),
    };
    let costs = toks.map(|t| parse_f64(t, ln)).collect::<Result<Vec<_>>>()?;
    if costs.len() != names.len() {
        return Err(Error::Lp(format!(
            "line {}: {} costs for {} variables",
            ln,
            costs.len(),
            names.len()
        )));
    }
    let mut lp = LinearProgram::new(direction);
    for (n, c) in names.iter().zip(&costs) {
        lp.add_var(*n, *c)?;
    }
    for (ln, line) in lines {
        let mut toks = line.split_whitespace();
        let head = toks.next().unwrap_or_default();
        if head == "bound" {
            let name = toks
                .next()
                .ok_or_else(|| Error::Lp(format!("line {}: missing bound name", ln)))?;
            let v = lp
                .var(name)
                .ok_or_else(|| Error::Lp(format!("line {}: unknown variable {}", ln, name)))?;
            let u = parse_f64(toks.next().unwrap_or_default(), ln)?;
            lp.set_upper(v, u);
            continue;
        }
        let sense = match head {
            "<=" => Sense::Le,
            ">=" => Sense::Ge,
            "=" => Sense::Eq,
            other => {
                return Err(Error::Lp(format!(
                    "line {}: unknown row sense {:?}",
                    ln, other
                )))
            }
        };
        let rhs = parse_f64(toks.next().unwrap_or_default(), ln)?;
        let coeffs = toks.map(|t| parse_f64(t, ln)).collect::<Result<Vec<_>>>()?;
        if coeffs.len() != names.len() {
            return Err(Error::Lp(format!(
                "line {}: {} coefficients for {} variables",
                ln,
                coeffs.len(),
                names.len()
            )));
        }
        lp.add_row(coeffs.into_iter().enumerate().collect(), sense, rhs)?;
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut lp = LinearProgram::new(Direction::Min);
        let x = lp.add_var("x", 1.5).unwrap();
        let y = lp.add_var("y", -0.1).unwrap();
        lp.add_row(vec![(x, 1.0), (y, 1.0 / 3.0)], Sense::Ge, 0.25)
            .unwrap();
        lp.add_row(vec![(y, 2.0)], Sense::Eq, 1.0).unwrap();
        lp.set_upper(x, 4.0);
        let back = LinearProgram::from_text(&lp.to_text()).unwrap();
        assert_eq!(back, lp);
    }

    #[test]
    fn rejects_wrong_width() {
        assert!(LinearProgram::from_text("vars a b\nmax 1 2\n<= 1 1\n").is_err());
        assert!(LinearProgram::from_text("vars a\nfoo 1\n").is_err());
    }
}
