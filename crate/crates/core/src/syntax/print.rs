use std::fmt;

use super::formula::{Formula, Kind};

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(self, f)
    }
}

fn needs_parens(f: &Formula) -> bool {
    matches!(f.kind(), Kind::And(_) | Kind::Or(_))
}

fn write_child(c: &Formula, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if needs_parens(c) {
        f.write_str("(")?;
        write_formula(c, f)?;
        f.write_str(")")
    } else {
        write_formula(c, f)
    }
}

fn write_formula(phi: &Formula, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match phi.kind() {
        Kind::True => f.write_str("true"),
        Kind::False => f.write_str("false"),
        Kind::Letter(c, t) => write!(f, "'{c}'({t})"),
        Kind::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
        Kind::Cong(q, a, b) => write!(f, "{a} =mod {q} {b}"),
        Kind::Not(g) => {
            f.write_str("!")?;
            write_child(g, f)
        }
        Kind::And(gs) | Kind::Or(gs) => {
            let sep = if matches!(phi.kind(), Kind::And(_)) { " & " } else { " | " };
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                write_child(g, f)?;
            }
            Ok(())
        }
        Kind::Quant(q) => {
            write!(f, "Q{{{},{}}} {}", q.monoid.name(), q.monoid.elem_name(q.target), q.var)?;
            if let Some(g) = &q.guard {
                f.write_str(" [")?;
                write_formula(g, f)?;
                f.write_str("]")?;
            }
            f.write_str(" . <")?;
            for (i, b) in q.bodies.iter().enumerate() {
                f.write_str(if i > 0 { ", " } else { " " })?;
                write_formula(b, f)?;
            }
            f.write_str(" >")
        }
    }
}
