//! Arithmetic formulas used in experiment configs, e.g. `c*log(n)/n^2`,
//! `n^2*log(n)` or `1/(5n)`.
//!
//! Grammar: numbers, variables, `+ - * / ^`, parentheses, implicit
//! multiplication (`5n`, `2(n+1)`), and the functions `log` (base 2), `ln`,
//! `sqrt`, `min`, `max`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A number or a formula to be evaluated against per-cell variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Value(f64),
    Formula(String),
}

impl Quantity {
    pub fn eval(&self, vars: &Vars) -> Result<f64> {
        match self {
            Quantity::Value(v) => Ok(*v),
            Quantity::Formula(f) => eval(f, vars),
        }
    }

    /// Evaluates and rounds to the nearest integer, clamped to at least 1.
    pub fn eval_count(&self, vars: &Vars) -> Result<u64> {
        let v = self.eval(vars)?;
        if !v.is_finite() {
            return Err(Error::Formula {
                formula: self.to_string(),
                reason: format!("evaluates to {v}"),
            });
        }
        Ok(v.round().max(1.0) as u64)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Value(v) => write!(f, "{v}"),
            Quantity::Formula(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Value(v)
    }
}

impl From<&str> for Quantity {
    fn from(s: &str) -> Self {
        match s.trim().parse::<f64>() {
            Ok(v) => Quantity::Value(v),
            Err(_) => Quantity::Formula(s.trim().to_string()),
        }
    }
}

/// Variable bindings for formula evaluation.
#[derive(Debug, Clone, Default)]
pub struct Vars(BTreeMap<String, f64>);

impl Vars {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> std::result::Result<Vec<Token>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-6
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| format!("bad number {text:?}"))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else {
            out.push(match c {
                '+' | '-' | '*' | '/' | '^' => Token::Op(c),
                '(' => Token::LParen,
                ')' => Token::RParen,
                ',' => Token::Comma,
                other => return Err(format!("unexpected character {other:?}")),
            });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a Vars,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Token) -> std::result::Result<(), String> {
        match self.next() {
            Some(t) if t == tok => Ok(()),
            other => Err(format!("expected {tok:?}, found {other:?}")),
        }
    }

    fn expr(&mut self) -> std::result::Result<f64, String> {
        let mut acc = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == '+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> std::result::Result<f64, String> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Op('*')) => {
                    self.pos += 1;
                    acc *= self.unary()?;
                }
                Some(Token::Op('/')) => {
                    self.pos += 1;
                    acc /= self.unary()?;
                }
                // implicit multiplication: `5n`, `2(n+1)`, `n log(n)`
                Some(Token::Num(_) | Token::Ident(_) | Token::LParen) => {
                    acc *= self.power()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> std::result::Result<f64, String> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> std::result::Result<f64, String> {
        let base = self.primary()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(base.powf(exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> std::result::Result<f64, String> {
        match self.next() {
            Some(Token::Num(v)) => Ok(v),
            Some(Token::LParen) => {
                let v = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(v)
            }
            Some(Token::Ident(name)) => {
                if let Some(Token::LParen) = self.peek() {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while let Some(Token::Comma) = self.peek() {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Token::RParen)?;
                    call(&name, &args)
                } else {
                    self.vars
                        .get(&name)
                        .ok_or_else(|| format!("unknown variable {name:?}"))
                }
            }
            other => Err(format!("unexpected token {other:?}")),
        }
    }
}

fn call(name: &str, args: &[f64]) -> std::result::Result<f64, String> {
    let unary = |f: fn(f64) -> f64| {
        if args.len() == 1 {
            Ok(f(args[0]))
        } else {
            Err(format!("{name} takes one argument"))
        }
    };
    match name {
        "log" | "log2" => unary(f64::log2),
        "ln" => unary(f64::ln),
        "sqrt" => unary(f64::sqrt),
        "min" if !args.is_empty() => Ok(args.iter().copied().fold(f64::INFINITY, f64::min)),
        "max" if !args.is_empty() => Ok(args.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        _ => Err(format!("unknown function {name:?}")),
    }
}

/// Evaluates a formula with the given bindings.
pub fn eval(formula: &str, vars: &Vars) -> Result<f64> {
    let wrap = |reason: String| Error::Formula {
        formula: formula.to_string(),
        reason,
    };
    let tokens = tokenize(formula).map_err(wrap)?;
    if tokens.is_empty() {
        return Err(wrap("empty formula".into()));
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        vars,
    };
    let v = p.expr().map_err(wrap)?;
    if p.pos != p.tokens.len() {
        return Err(wrap(format!("trailing input at token {}", p.pos)));
    }
    Ok(v)
}
