//! Tiny arithmetic expression grammar for coefficient and kernel
//! declarations in operator spec files.
//!
//! Supported: `+ - * / ^`, parentheses, the functions `sin cos tan exp log
//! atan abs sqrt sinh cosh tanh`, the constants `pi` and `e`, and free
//! variables bound at evaluation time.

use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum ExprError {
    UnexpectedChar(char, usize),
    UnexpectedEnd,
    UnexpectedToken(String),
    UnknownFunction(String),
    UnknownVariable(String),
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprError::UnexpectedChar(c, pos) => write!(f, "unexpected character {c:?} at {pos}"),
            ExprError::UnexpectedEnd => write!(f, "unexpected end of expression"),
            ExprError::UnexpectedToken(t) => write!(f, "unexpected token {t:?}"),
            ExprError::UnknownFunction(name) => write!(f, "unknown function {name:?}"),
            ExprError::UnknownVariable(name) => write!(f, "unknown variable {name:?}"),
        }
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Atan,
    Abs,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "atan" => Func::Atan,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Atan => x.atan(),
            Func::Abs => x.abs(),
            Func::Sqrt => x.sqrt(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
        }
    }
}

/// A parsed expression together with its variable binding order.
#[derive(Debug, Clone)]
pub struct Compiled {
    expr: Expr,
    pub vars: Vec<String>,
}

impl Compiled {
    /// Parse `src` with the given variable names; any other identifier is an
    /// error (apart from function names and `pi`/`e`).
    pub fn parse(src: &str, vars: &[&str]) -> Result<Compiled, ExprError> {
        let tokens = tokenize(src)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            vars,
        };
        let expr = parser.expression()?;
        if parser.pos != parser.tokens.len() {
            return Err(ExprError::UnexpectedToken(format!(
                "{:?}",
                parser.tokens[parser.pos]
            )));
        }
        Ok(Compiled {
            expr,
            vars: vars.iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Evaluate with variable values in the binding order of `vars`.
    pub fn eval(&self, values: &[f64]) -> f64 {
        eval(&self.expr, values)
    }

    /// Evaluate from a name -> value map (slow path for CLI use).
    pub fn eval_map(&self, map: &HashMap<String, f64>) -> f64 {
        let values: Vec<f64> = self.vars.iter().map(|v| map[v]).collect();
        self.eval(&values)
    }
}

fn eval(e: &Expr, vals: &[f64]) -> f64 {
    match e {
        Expr::Const(c) => *c,
        Expr::Var(i) => vals[*i],
        Expr::Neg(a) => -eval(a, vals),
        Expr::Add(a, b) => eval(a, vals) + eval(b, vals),
        Expr::Sub(a, b) => eval(a, vals) - eval(b, vals),
        Expr::Mul(a, b) => eval(a, vals) * eval(b, vals),
        Expr::Div(a, b) => eval(a, vals) / eval(b, vals),
        Expr::Pow(a, b) => eval(a, vals).powf(eval(b, vals)),
        Expr::Call(f, a) => f.apply(eval(a, vals)),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.') {
                i += 1;
            }
            // scientific notation
            if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == '+' || bytes[j] == '-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = bytes[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| ExprError::UnexpectedToken(text.clone()))?;
            out.push(Token::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_alphanumeric() || bytes[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(bytes[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(ExprError::UnexpectedChar(c, i));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<Token, ExprError> {
        let t = self.tokens.get(self.pos).cloned().ok_or(ExprError::UnexpectedEnd)?;
        self.pos += 1;
        Ok(t)
    }

    fn expression(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if let Some(Token::Op('+')) = self.peek() {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            // right associative
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.next()? {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::Op('(') => {
                let e = self.expression()?;
                match self.next()? {
                    Token::Op(')') => Ok(e),
                    t => Err(ExprError::UnexpectedToken(format!("{t:?}"))),
                }
            }
            Token::Ident(name) => {
                if let Some(Token::Op('(')) = self.peek() {
                    self.pos += 1;
                    let func =
                        Func::from_name(&name).ok_or(ExprError::UnknownFunction(name.clone()))?;
                    let arg = self.expression()?;
                    match self.next()? {
                        Token::Op(')') => Ok(Expr::Call(func, Box::new(arg))),
                        t => Err(ExprError::UnexpectedToken(format!("{t:?}"))),
                    }
                } else {
                    match name.as_str() {
                        "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                        "e" => Ok(Expr::Const(std::f64::consts::E)),
                        _ => {
                            let idx = self
                                .vars
                                .iter()
                                .position(|v| *v == name)
                                .ok_or(ExprError::UnknownVariable(name.clone()))?;
                            Ok(Expr::Var(idx))
                        }
                    }
                }
            }
            t => Err(ExprError::UnexpectedToken(format!("{t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_precedence() {
        let e = Compiled::parse("2 + 3 * 4 - 6 / 2", &[]).unwrap();
        assert_eq!(e.eval(&[]), 11.0);
        let e = Compiled::parse("2 ^ 3 ^ 2", &[]).unwrap();
        assert_eq!(e.eval(&[]), 512.0); // right associative
        let e = Compiled::parse("-(1 + 2) * 2", &[]).unwrap();
        assert_eq!(e.eval(&[]), -6.0);
    }

    #[test]
    fn functions_and_variables() {
        let e = Compiled::parse("2 + sin(2 * pi * x)", &["x"]).unwrap();
        assert!((e.eval(&[0.25]) - 3.0).abs() < 1e-14);
        let e = Compiled::parse("exp(-(z1 ^ 2 + z2 ^ 2))", &["z1", "z2"]).unwrap();
        assert!((e.eval(&[1.0, 1.0]) - (-2.0f64).exp()).abs() < 1e-15);
        let e = Compiled::parse("3 + atan(x1)", &["x1"]).unwrap();
        assert!((e.eval(&[1e9]) - (3.0 + std::f64::consts::FRAC_PI_2)).abs() < 1e-8);
    }

    #[test]
    fn parse_errors() {
        assert!(Compiled::parse("2 +", &[]).is_err());
        assert!(Compiled::parse("foo(1)", &[]).is_err());
        assert!(Compiled::parse("y + 1", &["x"]).is_err());
        assert!(Compiled::parse("1 # 2", &[]).is_err());
    }
}
