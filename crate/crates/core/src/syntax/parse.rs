use thiserror::Error;

use crate::algebra::{AlgebraError, MonoidRegistry};

use super::formula::{CmpOp, Formula, Kind, Quant};
use super::term::{LinearTerm, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    SyntaxError { pos: usize, msg: String },
    #[error("unknown monoid `{0}`")]
    UnknownMonoid(String),
    #[error("monoid {monoid} needs {expected} bodies, got {got}")]
    ArityMismatch { monoid: String, expected: usize, got: usize },
    #[error("monoid {0} has no element `{1}`")]
    UnknownElement(String, String),
}

/// Parses with the builtin monoids only.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    parse_with(text, &MonoidRegistry::new())
}

pub fn parse_with(text: &str, registry: &MonoidRegistry) -> Result<Formula, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, registry };
    let f = p.formula()?;
    p.ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(f)
}

/// Parses a bare linear term such as `2*x + y + -3`.
pub fn parse_term(text: &str) -> Result<LinearTerm, ParseError> {
    let registry = MonoidRegistry::new();
    let mut p = Parser { src: text.as_bytes(), pos: 0, registry: &registry };
    let t = p.term()?;
    p.ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(t)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    registry: &'a MonoidRegistry,
}

const KEYWORDS: [&str; 3] = ["true", "false", "E"];

impl Parser<'_> {
    fn err(&self, msg: &str) -> ParseError {
        ParseError::SyntaxError { pos: self.pos, msg: msg.to_string() }
    }

    fn ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.src.get(self.pos).copied()
    }

    fn rest(&mut self) -> &[u8] {
        self.ws();
        &self.src[self.pos..]
    }

    fn eat(&mut self, tok: &str) -> bool {
        if self.rest().starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{tok}`")))
        }
    }

    fn peek_ident(&mut self) -> Option<&str> {
        let rest = self.rest();
        let first = *rest.first()?;
        if !(first.is_ascii_alphabetic() || first == b'_') {
            return None;
        }
        let len = rest.iter().take_while(|c| c.is_ascii_alphanumeric() || **c == b'_').count();
        std::str::from_utf8(&rest[..len]).ok()
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let Some(id) = self.peek_ident().map(str::to_string) else {
            return Err(self.err("expected identifier"));
        };
        self.pos += id.len();
        Ok(id)
    }

    fn var(&mut self) -> Result<Var, ParseError> {
        let start = self.pos;
        let id = self.ident()?;
        if KEYWORDS.contains(&id.as_str()) {
            self.pos = start;
            return Err(self.err("keyword used as variable"));
        }
        Ok(Var::named(&id))
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.conj()?];
        while self.eat("|") {
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::new(Kind::Or(parts)) })
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.unary()?];
        while self.eat("&") {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::new(Kind::And(parts)) })
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'!') => {
                self.pos += 1;
                Ok(Formula::new(Kind::Not(self.unary()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(")")?;
                Ok(f)
            }
            Some(b'\'') => self.letter(),
            _ if self.rest().starts_with(b"Q{") => self.quant(),
            _ => match self.peek_ident().map(str::to_string).as_deref() {
                Some("true") => {
                    self.pos += 4;
                    Ok(Formula::new(Kind::True))
                }
                Some("false") => {
                    self.pos += 5;
                    Ok(Formula::new(Kind::False))
                }
                Some("E") => {
                    self.pos += 1;
                    self.exists()
                }
                _ => self.comparison(),
            },
        }
    }

    fn letter(&mut self) -> Result<Formula, ParseError> {
        self.expect("'")?;
        let rest = std::str::from_utf8(&self.src[self.pos..]).map_err(|_| self.err("invalid utf-8"))?;
        let c = rest.chars().next().ok_or_else(|| self.err("expected letter"))?;
        self.pos += c.len_utf8();
        if self.src.get(self.pos) != Some(&b'\'') {
            return Err(self.err("expected closing `'`"));
        }
        self.pos += 1;
        self.expect("(")?;
        let t = self.term()?;
        self.expect(")")?;
        Ok(Formula::new(Kind::Letter(c, t)))
    }

    fn exists(&mut self) -> Result<Formula, ParseError> {
        let var = self.var()?;
        let guard = self.guard()?;
        self.expect(".")?;
        let body = self.formula()?;
        let monoid = self.registry.get("U1").map_err(|_| ParseError::UnknownMonoid("U1".into()))?;
        let target = monoid.body_element(1);
        Ok(Formula::new(Kind::Quant(Quant { monoid, target, var, guard, bodies: vec![body] })))
    }

    fn guard(&mut self) -> Result<Option<Formula>, ParseError> {
        if !self.eat("[") {
            return Ok(None);
        }
        let g = self.formula()?;
        self.expect("]")?;
        Ok(Some(g))
    }

    fn quant(&mut self) -> Result<Formula, ParseError> {
        self.expect("Q{")?;
        self.ws();
        let name_len = self.src[self.pos..].iter().take_while(|&&c| c != b',' && c != b'}').count();
        let name = String::from_utf8_lossy(&self.src[self.pos..self.pos + name_len]).trim().to_string();
        self.pos += name_len;
        self.expect(",")?;
        let elem_len = self.src[self.pos..].iter().take_while(|&&c| c != b'}').count();
        let elem = String::from_utf8_lossy(&self.src[self.pos..self.pos + elem_len]).trim().to_string();
        self.pos += elem_len;
        self.expect("}")?;
        let monoid = self.registry.get(&name).map_err(|e| match e {
            AlgebraError::UnknownMonoid(n) => ParseError::UnknownMonoid(n),
            other => ParseError::UnknownMonoid(format!("{name}: {other}")),
        })?;
        let target = monoid
            .elem_by_name(&elem)
            .ok_or_else(|| ParseError::UnknownElement(name.clone(), elem.clone()))?;
        let var = self.var()?;
        let guard = self.guard()?;
        self.expect(".")?;
        self.expect("<")?;
        let mut bodies = Vec::new();
        if !self.eat(">") {
            bodies.push(self.formula()?);
            while self.eat(",") {
                bodies.push(self.formula()?);
            }
            self.expect(">")?;
        }
        if bodies.len() != monoid.arity() {
            return Err(ParseError::ArityMismatch { monoid: name, expected: monoid.arity(), got: bodies.len() });
        }
        Ok(Formula::new(Kind::Quant(Quant { monoid, target, var, guard, bodies })))
    }

    fn comparison(&mut self) -> Result<Formula, ParseError> {
        let a = self.term()?;
        let kind = if self.eat("=mod") {
            let q = self.int()?;
            if q < 1 {
                return Err(self.err("modulus must be positive"));
            }
            let b = self.term()?;
            Kind::Cong(q as u64, a, b)
        } else {
            let op = if self.eat("<") {
                CmpOp::Lt
            } else if self.eat(">") {
                CmpOp::Gt
            } else if self.eat("=") {
                CmpOp::Eq
            } else {
                return Err(self.err("expected comparison operator"));
            };
            Kind::Cmp(op, a, self.term()?)
        };
        Ok(Formula::new(kind))
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let rest = self.rest();
        let neg = rest.first() == Some(&b'-');
        let digits = rest[neg as usize..].iter().take_while(|c| c.is_ascii_digit()).count();
        if digits == 0 {
            return Err(self.err("expected integer"));
        }
        let len = neg as usize + digits;
        let s = std::str::from_utf8(&rest[..len]).unwrap();
        let v = s.parse().map_err(|_| self.err("integer out of range"))?;
        self.pos += len;
        Ok(v)
    }

    fn summand(&mut self) -> Result<LinearTerm, ParseError> {
        match self.peek() {
            Some(c) if c == b'-' || c.is_ascii_digit() => {
                let k = self.int()?;
                if self.eat("*") {
                    Ok(LinearTerm::scaled_var(k, self.var()?))
                } else {
                    Ok(LinearTerm::constant(k))
                }
            }
            _ => Ok(LinearTerm::var(self.var()?)),
        }
    }

    fn term(&mut self) -> Result<LinearTerm, ParseError> {
        let mut t = self.summand()?;
        while self.eat("+") {
            t = t.add(&self.summand()?);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_quantifier() {
        let f = parse("Q{C2,1} z . < '1'(z) >").unwrap();
        let q = f.as_quant().unwrap();
        assert_eq!(q.monoid.name(), "C2");
        assert_eq!(q.target, q.monoid.identity());
        assert_eq!(q.bodies.len(), 1);
    }

    #[test]
    fn exists_sugar() {
        let a = parse("E z . 'a'(z)").unwrap();
        let b = parse("Q{U1,0} z . < 'a'(z) >").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn arity_mismatch() {
        assert!(matches!(
            parse("Q{C3,g} z . < 'a'(z) >"),
            Err(ParseError::ArityMismatch { expected: 2, got: 1, .. })
        ));
    }

    #[test]
    fn unknown_monoid_and_element() {
        assert!(matches!(parse("Q{X9,1} z . < true >"), Err(ParseError::UnknownMonoid(_))));
        assert!(matches!(parse("Q{C2,h} z . < true >"), Err(ParseError::UnknownElement(..))));
    }

    #[test]
    fn syntax_error_has_position() {
        match parse("x < ") {
            Err(ParseError::SyntaxError { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn symmetric_group_elements() {
        let f = parse("Q{S3,(123)} x . < true, true, true, true, true >").unwrap();
        assert_eq!(f.to_string(), "Q{S3,(123)} x . < true, true, true, true, true >");
    }

    #[test]
    fn canonical_round_trip() {
        for s in [
            "x < y + 3",
            "2*x + -1*y = 0",
            "x =mod 3 y + 1",
            "!('a'(x) | x > 2) & true",
            "(x < y & y < z) | false",
            "Q{U1,0} x [!'_'(x)] . < 'a'(x) & x > y >",
            "!!x = x",
        ] {
            let f = parse(s).unwrap();
            assert_eq!(f.to_string(), s);
            assert_eq!(parse(&f.to_string()).unwrap(), f);
        }
    }
}
