//! Recursive-descent parser for polynomial expressions, plus the matching
//! printer.
//!
//! Grammar:
//!
//! ```text
//! expr   := ['+'|'-'] term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := base ('^' uint)?
//! base   := number | var | '(' expr ')'
//! ```
//!
//! Implicit multiplication is not allowed. Numbers are decimal floats with
//! an optional exponent part.

use crate::poly::{Monomial, Polynomial};
use crate::scalar::{real, Scalar};

/// Syntax error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    /// Offending token text; empty at end of input.
    pub token: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
    text: String,
}

fn err(line: usize, column: usize, token: &str, message: impl Into<String>) -> ParseError {
    ParseError { line, column, message: message.into(), token: token.to_string() }
}

/// Tokenizes one source string. `line` is the 1-based line number the
/// string came from, so positions in errors refer to the original file.
fn tokenize(src: &str, line: usize) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
            }
            '+' => {
                out.push(Spanned { tok: Tok::Plus, line, column, text: "+".into() });
                i += 1;
            }
            '-' => {
                out.push(Spanned { tok: Tok::Minus, line, column, text: "-".into() });
                i += 1;
            }
            '*' => {
                out.push(Spanned { tok: Tok::Star, line, column, text: "*".into() });
                i += 1;
            }
            '^' => {
                out.push(Spanned { tok: Tok::Caret, line, column, text: "^".into() });
                i += 1;
            }
            '(' => {
                out.push(Spanned { tok: Tok::LParen, line, column, text: "(".into() });
                i += 1;
            }
            ')' => {
                out.push(Spanned { tok: Tok::RParen, line, column, text: ")".into() });
                i += 1;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| err(line, column, &text, format!("malformed number `{text}`")))?;
                out.push(Spanned { tok: Tok::Number(value), line, column, text });
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Spanned { tok: Tok::Ident(text.clone()), line, column, text });
            }
            _ => {
                return Err(err(line, column, &c.to_string(), format!("unexpected character `{c}`")));
            }
        }
    }
    Ok(out)
}

struct Parser<'a, T> {
    toks: Vec<Spanned>,
    pos: usize,
    vars: &'a [String],
    line: usize,
    end_column: usize,
    _marker: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar> Parser<'a, T> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eof_error(&self, message: &str) -> ParseError {
        err(self.line, self.end_column, "", message)
    }

    fn expr(&mut self) -> Result<Polynomial<T>, ParseError> {
        let arity = self.vars.len();
        let mut negate = false;
        if let Some(s) = self.peek() {
            match s.tok {
                Tok::Minus => {
                    negate = true;
                    self.pos += 1;
                }
                Tok::Plus => {
                    self.pos += 1;
                }
                _ => {}
            }
        }
        let mut acc = self.term()?;
        if negate {
            acc = acc.neg();
        }
        while let Some(s) = self.peek() {
            match s.tok {
                Tok::Plus => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = acc.add(&t).expect("same arity");
                }
                Tok::Minus => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = acc.sub(&t).expect("same arity");
                }
                _ => break,
            }
        }
        let _ = arity;
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial<T>, ParseError> {
        let mut acc = self.factor()?;
        while matches!(self.peek().map(|s| &s.tok), Some(Tok::Star)) {
            self.pos += 1;
            let f = self.factor()?;
            acc = acc.mul(&f).expect("same arity");
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Polynomial<T>, ParseError> {
        let base = self.base()?;
        if matches!(self.peek().map(|s| &s.tok), Some(Tok::Caret)) {
            self.pos += 1;
            let s = self
                .next()
                .ok_or_else(|| self.eof_error("expected exponent after `^`"))?;
            let e = match s.tok {
                Tok::Number(v) if v >= 0.0 && v.fract() == 0.0 => v as u32,
                _ => {
                    return Err(err(s.line, s.column, &s.text, "exponent must be a non-negative integer"));
                }
            };
            let mut acc = Polynomial::one(self.vars.len());
            for _ in 0..e {
                acc = acc.mul(&base).expect("same arity");
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Polynomial<T>, ParseError> {
        let arity = self.vars.len();
        let s = self
            .next()
            .ok_or_else(|| self.eof_error("unexpected end of expression"))?;
        match s.tok {
            Tok::Number(v) => Ok(Polynomial::constant(arity, real::<T>(v))),
            Tok::Ident(name) => {
                if let Some(idx) = self.vars.iter().position(|v| v == &name) {
                    Ok(Polynomial::var(arity, idx))
                } else {
                    Err(err(s.line, s.column, &name, format!("unknown identifier `{name}`")))
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                match self.next() {
                    Some(t) if t.tok == Tok::RParen => Ok(inner),
                    Some(t) => Err(err(t.line, t.column, &t.text, "expected `)`")),
                    None => Err(self.eof_error("unbalanced parenthesis: expected `)`")),
                }
            }
            _ => Err(err(s.line, s.column, &s.text, format!("unexpected token `{}`", s.text))),
        }
    }
}

/// Parses an expression over the named variables into a polynomial.
pub fn parse_polynomial<T: Scalar>(src: &str, vars: &[String]) -> Result<Polynomial<T>, ParseError> {
    parse_polynomial_at(src, vars, 1)
}

/// Like [`parse_polynomial`], with error positions reported on `line`.
pub fn parse_polynomial_at<T: Scalar>(
    src: &str,
    vars: &[String],
    line: usize,
) -> Result<Polynomial<T>, ParseError> {
    assert!(!vars.is_empty(), "variable list must be non-empty");
    {
        let mut seen = std::collections::HashSet::new();
        for v in vars {
            assert!(seen.insert(v), "variable names must be distinct");
        }
    }
    let toks = tokenize(src, line)?;
    let end_column = src.chars().count() + 1;
    let mut parser = Parser::<T> {
        toks,
        pos: 0,
        vars,
        line,
        end_column,
        _marker: std::marker::PhantomData,
    };
    let p = parser.expr()?;
    if let Some(s) = parser.peek() {
        return Err(err(s.line, s.column, &s.text, format!("unexpected trailing token `{}`", s.text)));
    }
    Ok(p)
}

fn format_monomial(m: &Monomial, vars: &[String]) -> String {
    let mut parts = Vec::new();
    for (i, &e) in m.exponents().iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(vars[i].clone()),
            _ => parts.push(format!("{}^{}", vars[i], e)),
        }
    }
    parts.join("*")
}

/// Prints a polynomial in the expression grammar. `Display` coefficient
/// formatting is shortest-roundtrip, so parse(print(p)) == p term for term.
pub fn print_polynomial<T: Scalar>(p: &Polynomial<T>, vars: &[String]) -> String {
    print_polynomial_with(p, vars, |c| format!("{c}"))
}

/// Prints with 17 significant digits, for bit-exact file round-trips.
pub fn print_polynomial_exact<T: Scalar>(p: &Polynomial<T>, vars: &[String]) -> String {
    print_polynomial_with(p, vars, |c| format!("{c:.16e}"))
}

fn print_polynomial_with<T: Scalar>(
    p: &Polynomial<T>,
    vars: &[String],
    fmt: impl Fn(T) -> String,
) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    // Descending graded-lex reads most-significant-first.
    let mut out = String::new();
    for (i, (m, &c)) in p.terms().collect::<Vec<_>>().into_iter().rev().enumerate() {
        let neg = c < T::zero();
        let mag = c.abs();
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let mono = format_monomial(m, vars);
        if mono.is_empty() {
            out.push_str(&fmt(mag));
        } else {
            out.push_str(&fmt(mag));
            out.push('*');
            out.push_str(&mono);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn m(exps: &[u32]) -> Monomial {
        Monomial::new(exps.to_vec())
    }

    #[test]
    fn parses_two_terms() {
        let p: Polynomial<f64> = parse_polynomial("x^2 - 0.5*y", &vars(&["x", "y"])).unwrap();
        assert_eq!(p.num_terms(), 2);
        assert_eq!(p.coefficient(&m(&[2, 0])), 1.0);
        assert_eq!(p.coefficient(&m(&[0, 1])), -0.5);
    }

    #[test]
    fn parses_limit_cycle_component() {
        let p: Polynomial<f64> =
            parse_polynomial("x*(1 - x^2 - y^2)*(x + 0.5) - y", &vars(&["x", "y"])).unwrap();
        assert_eq!(p.total_degree(), 4);
        assert_eq!(p.num_terms(), 7);
        assert_eq!(p.coefficient(&m(&[4, 0])), -1.0);
        assert_eq!(p.coefficient(&m(&[1, 2])), -0.5);
        assert_eq!(p.coefficient(&m(&[0, 1])), -1.0);
    }

    #[test]
    fn unknown_identifier_points_at_token() {
        let src = "x + q";
        let e = parse_polynomial::<f64>(src, &vars(&["x", "y"])).unwrap_err();
        assert_eq!(e.token, "q");
        assert_eq!(e.line, 1);
        assert_eq!(e.column, 5);
        assert!(src[e.column - 1..].starts_with(&e.token));
    }

    #[test]
    fn error_positions_contain_token_text() {
        let cases = ["x + ", "x * * y", "(x + y", "x ^ y", "x $ y", "1.2e*x"];
        for src in cases {
            let e = parse_polynomial::<f64>(src, &vars(&["x", "y"])).unwrap_err();
            let tail = &src[src
                .char_indices()
                .nth(e.column - 1)
                .map(|(b, _)| b)
                .unwrap_or(src.len())..];
            assert!(
                tail.starts_with(e.token.as_str()),
                "src={src:?} err={e:?} tail={tail:?}"
            );
        }
    }

    #[test]
    fn unary_minus_and_parens() {
        let p: Polynomial<f64> = parse_polynomial("-x^2 + (-y + x)*2", &vars(&["x", "y"])).unwrap();
        assert_eq!(p.coefficient(&m(&[2, 0])), -1.0);
        assert_eq!(p.coefficient(&m(&[0, 1])), -2.0);
        assert_eq!(p.coefficient(&m(&[1, 0])), 2.0);
    }

    #[test]
    fn no_implicit_multiplication() {
        assert!(parse_polynomial::<f64>("2 x", &vars(&["x"])).is_err());
        assert!(parse_polynomial::<f64>("x y", &vars(&["x", "y"])).is_err());
    }

    #[test]
    fn scientific_notation() {
        let p: Polynomial<f64> = parse_polynomial("1.5e-3*x + 2E2", &vars(&["x"])).unwrap();
        assert_eq!(p.coefficient(&m(&[1])), 1.5e-3);
        assert_eq!(p.coefficient(&m(&[0])), 200.0);
    }

    #[test]
    fn print_parse_roundtrip() {
        let names = vars(&["x", "y", "z"]);
        let p: Polynomial<f64> = parse_polynomial(
            "3*x^2*y - 0.125*z^4 + x - 7 + 1e-7*y*z",
            &names,
        )
        .unwrap();
        let printed = print_polynomial(&p, &names);
        let q: Polynomial<f64> = parse_polynomial(&printed, &names).unwrap();
        assert_eq!(p, q);
        let exact = print_polynomial_exact(&p, &names);
        let r: Polynomial<f64> = parse_polynomial(&exact, &names).unwrap();
        assert_eq!(p, r);
    }
}
