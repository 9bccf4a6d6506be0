//! A small arithmetic expression language for coefficient functions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right-associative
//! atom    := number | ident | ident '(' args ')' | '(' sum ')'
//! ```
//!
//! `-2^2` therefore parses as `-(2^2)` and `2^3^2` as `2^(3^2)`.
//! Evaluation never returns NaN or an infinity: every non-finite
//! intermediate is reported as an [`EvalError`] carrying the point.

use std::fmt;

use thiserror::Error;

/// The two variable names the language knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Ln,
    Exp,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "ln" => Func::Ln,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Ln => "ln",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Abstract syntax tree of a parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdent { offset: usize, name: String },
    #[error("variable `{name}` at byte {offset} is not allowed here")]
    VarNotAllowed { offset: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at x={x}{}", .y.map(|y| format!(", y={y}")).unwrap_or_default())]
pub struct EvalError {
    pub message: String,
    pub x: f64,
    pub y: Option<f64>,
}

/// Variable bindings for evaluation. Unbound variables are an error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Env {
    pub x: Option<f64>,
    pub y: Option<f64>,
}

impl Env {
    pub fn x(x: f64) -> Self {
        Env {
            x: Some(x),
            y: None,
        }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Env {
            x: Some(x),
            y: Some(y),
        }
    }

    fn fail(&self, message: impl Into<String>) -> EvalError {
        EvalError {
            message: message.into(),
            x: self.x.unwrap_or(f64::NAN),
            y: self.y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part: e.g. 1e-5, 2.5E+3
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{lit}`"),
            })?;
            if !v.is_finite() {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("number `{lit}` is out of range"),
                });
            }
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push((start, tok));
            i += c.len_utf8();
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    allowed: &'a [Var],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(format!("expected {what}")))
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                    let mut args = vec![self.sum()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        args.push(self.sum()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    if args.len() != func.arity() {
                        return Err(ParseError::Syntax {
                            offset,
                            message: format!(
                                "`{name}` takes {} argument(s), got {}",
                                func.arity(),
                                args.len()
                            ),
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                let var = match name.as_str() {
                    "x" => Var::X,
                    "y" => Var::Y,
                    _ => return Err(ParseError::UnknownIdent { offset, name }),
                };
                if !self.allowed.contains(&var) {
                    return Err(ParseError::VarNotAllowed { offset, name });
                }
                Ok(Expr::Var(var))
            }
            Some(_) => Err(self.syntax("expected a number, variable, function or `(`")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }
}

/// Parses `text`, accepting only the variables in `allowed`.
pub fn parse(text: &str, allowed: &[Var]) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        allowed,
    };
    let e = p.sum()?;
    if p.pos != p.toks.len() {
        return Err(p.syntax("trailing input"));
    }
    Ok(e)
}

fn checked(v: f64, env: &Env, what: &str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(env.fail(format!("non-finite result in {what}")))
    }
}

impl Expr {
    pub fn eval(&self, env: &Env) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(var) => {
                let v = match var {
                    Var::X => env.x,
                    Var::Y => env.y,
                };
                v.ok_or_else(|| env.fail(format!("unbound variable `{}`", var.name())))
            }
            Expr::Neg(inner) => Ok(-inner.eval(env)?),
            Expr::Bin(op, a, b) => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                match op {
                    BinOp::Add => checked(a + b, env, "addition"),
                    BinOp::Sub => checked(a - b, env, "subtraction"),
                    BinOp::Mul => checked(a * b, env, "multiplication"),
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(env.fail("division by zero"));
                        }
                        checked(a / b, env, "division")
                    }
                    BinOp::Pow => {
                        if a == 0.0 && b < 0.0 {
                            return Err(env.fail("zero raised to a negative power"));
                        }
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(env.fail("negative base with non-integer exponent"));
                        }
                        checked(a.powf(b), env, "power")
                    }
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(env)?;
                match func {
                    Func::Ln => {
                        if a <= 0.0 {
                            return Err(env.fail("ln of a non-positive argument"));
                        }
                        Ok(a.ln())
                    }
                    Func::Exp => checked(a.exp(), env, "exp"),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(env.fail("sqrt of a negative argument"));
                        }
                        Ok(a.sqrt())
                    }
                    Func::Abs => Ok(a.abs()),
                    Func::Min => Ok(a.min(args[1].eval(env)?)),
                    Func::Max => Ok(a.max(args[1].eval(env)?)),
                }
            }
        }
    }

    /// True when the tree mentions `var` anywhere.
    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) => e.uses(var),
            Expr::Bin(_, a, b) => a.uses(var) || b.uses(var),
            Expr::Call(_, args) => args.iter().any(|a| a.uses(var)),
        }
    }

    /// Literal value when the expression is a constant (possibly negated).
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(e) => e.as_constant().map(|v| -v),
            _ => None,
        }
    }
}

/// Fully parenthesized rendering that re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, env: Env) -> f64 {
        parse(text, &[Var::X, Var::Y]).unwrap().eval(&env).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(ev("x*(1001-x)/10", Env::x(1.0)), 100.0);
        assert_eq!(ev("ln(x)", Env::x(1.0)), 0.0);
        assert_eq!(ev("(x-1)^1.17/1000", Env::x(1.0)), 0.0);
        assert_eq!(ev("2^3", Env::default()), 8.0);
        assert_eq!(ev("ln(x)", Env::x(std::f64::consts::E)), 1.0);
        assert_eq!(ev("x*(1001-x)/10", Env::x(1000.0)), 100.0);
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("2+3*4", Env::default()), 14.0);
        assert_eq!(ev("2^3^2", Env::default()), 512.0);
        assert_eq!(ev("-2^2", Env::default()), -4.0);
        assert_eq!(ev("2^-1", Env::default()), 0.5);
        assert_eq!(ev("10-4-3", Env::default()), 3.0);
        assert_eq!(ev("min(x, y) + max(x, 3)", Env::xy(2.0, 5.0)), 5.0);
        assert_eq!(ev("1e-3*2.5E+2", Env::default()), 0.25);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse("x +", &[Var::X]),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            parse("foo(x)", &[Var::X]),
            Err(ParseError::UnknownIdent { offset: 0, .. })
        ));
        assert!(matches!(
            parse("x*y", &[Var::X]),
            Err(ParseError::VarNotAllowed { offset: 2, .. })
        ));
        assert!(matches!(
            parse("  ", &[Var::X]),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse("(x", &[Var::X]),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse("min(x)", &[Var::X]),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse("x $ 2", &[Var::X]),
            Err(ParseError::Syntax { offset: 2, .. })
        ));
    }

    #[test]
    fn domain_errors_carry_the_point() {
        let e = parse("ln(x)", &[Var::X]).unwrap();
        let err = e.eval(&Env::x(-1.0)).unwrap_err();
        assert_eq!(err.x, -1.0);
        assert!(parse("sqrt(x)", &[Var::X])
            .unwrap()
            .eval(&Env::x(-2.0))
            .is_err());
        assert!(parse("x^-1", &[Var::X])
            .unwrap()
            .eval(&Env::x(0.0))
            .is_err());
        assert!(parse("1/x", &[Var::X]).unwrap().eval(&Env::x(0.0)).is_err());
        assert!(parse("x^0.5", &[Var::X])
            .unwrap()
            .eval(&Env::x(-4.0))
            .is_err());
        assert_eq!(
            parse("x^2", &[Var::X])
                .unwrap()
                .eval(&Env::x(-3.0))
                .unwrap(),
            9.0
        );
        assert!(parse("exp(x)", &[Var::X])
            .unwrap()
            .eval(&Env::x(1e4))
            .is_err());
        assert!(parse("x", &[Var::X])
            .unwrap()
            .eval(&Env::default())
            .is_err());
    }

    #[test]
    fn display_reparses() {
        for s in [
            "-2^2",
            "x*(1001-x)/10",
            "(x-1)^1.17/1000",
            "min(x,y)-1e-7",
            "2^3^2",
        ] {
            let e = parse(s, &[Var::X, Var::Y]).unwrap();
            let again = parse(&e.to_string(), &[Var::X, Var::Y]).unwrap();
            assert_eq!(e, again, "{s}");
        }
    }
}
