//! Complex scalar expressions for parameterized matrix entries, e.g.
//! `"1-a"`, `"-2i"`, `"sqrt(3)/2"`, `"a*(1+i)"`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::CliError;

pub type Params = BTreeMap<String, Complex64>;

pub fn eval(text: &str, params: &Params) -> Result<Complex64, CliError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        params,
        text,
    };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(v)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    params: &'a Params,
    text: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> CliError {
        CliError::Input(format!(
            "expression {:?}, column {}: {msg}",
            self.text,
            self.pos + 1
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Complex64, CliError> {
        let mut acc = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == b'+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Complex64, CliError> {
        let mut acc = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            if op == b'/' && rhs.norm() == 0.0 {
                return Err(self.error("division by zero"));
            }
            acc = if op == b'*' { acc * rhs } else { acc / rhs };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Complex64, CliError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Complex64, CliError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            if exp.im == 0.0 && exp.re.fract() == 0.0 && exp.re.abs() < 64.0 {
                return Ok(base.powi(exp.re as i32));
            }
            return Ok(base.powc(exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Complex64, CliError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(b) if b.is_ascii_digit() || b == b'.' => {
                let x = self.number()?;
                if self.src.get(self.pos) == Some(&b'i') && !self.ident_continues(self.pos + 1) {
                    self.pos += 1;
                    return Ok(Complex64::new(0.0, x));
                }
                Ok(Complex64::new(x, 0.0))
            }
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => {
                let name = self.ident();
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(b')') {
                        return Err(self.error("expected ')'"));
                    }
                    self.pos += 1;
                    return match name.as_str() {
                        "sqrt" => Ok(arg.sqrt()),
                        "conj" => Ok(arg.conj()),
                        "exp" => Ok(arg.exp()),
                        _ => Err(self.error(&format!("unknown function {name}"))),
                    };
                }
                if let Some(v) = self.params.get(&name) {
                    return Ok(*v);
                }
                match name.as_str() {
                    "i" => Ok(Complex64::new(0.0, 1.0)),
                    "pi" => Ok(Complex64::new(std::f64::consts::PI, 0.0)),
                    _ => Err(self.error(&format!("unknown parameter {name}"))),
                }
            }
            _ => Err(self.error("expected a number, parameter or '('")),
        }
    }

    fn ident_continues(&self, at: usize) -> bool {
        self.src
            .get(at)
            .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.ident_continues(self.pos) {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<f64, CliError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // exponent only when digits follow
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mut k = self.pos + 1;
            if matches!(self.src.get(k), Some(b'+' | b'-')) {
                k += 1;
            }
            if self.src.get(k).is_some_and(u8::is_ascii_digit) {
                self.pos = k;
                while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                    self.pos += 1;
                }
            }
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.error("malformed number"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str) -> Complex64 {
        let mut p = Params::new();
        p.insert("a".into(), Complex64::new(0.0, 2.0));
        eval(s, &p).unwrap()
    }

    #[test]
    fn arithmetic_and_parameters() {
        assert_eq!(ev("1-a"), Complex64::new(1.0, -2.0));
        assert_eq!(ev("-2i"), Complex64::new(0.0, -2.0));
        assert_eq!(ev("2*(1+i)"), Complex64::new(2.0, 2.0));
        assert_eq!(ev("1e-3"), Complex64::new(1e-3, 0.0));
        assert!((ev("sqrt(3)/2").re - 0.75f64.sqrt()).abs() < 1e-16);
        assert_eq!(ev("2^3"), Complex64::new(8.0, 0.0));
        assert_eq!(ev("-a"), Complex64::new(0.0, -2.0));
    }

    #[test]
    fn rejects_garbage() {
        let p = Params::new();
        assert!(eval("b", &p).is_err());
        assert!(eval("1+", &p).is_err());
        assert!(eval("(1", &p).is_err());
        assert!(eval("1/0", &p).is_err());
        assert!(eval("2 3", &p).is_err());
    }
}
