//! Coefficient functions of the aggregation-growth model and their
//! standing assumptions.
//!
//! The model lives on sizes `x0 <= x <= x1` with growth rate `g`,
//! removal rate `w`, fecundity `q` and aggregation kernel `beta`.
//! Required: `0 < x0 < x1 < inf`, `g > 0`, `w >= 0`, `q >= 0`, and a
//! symmetric kernel that vanishes once `x + y > x1`. Smoothness of `g`
//! is a user obligation and is not checked.

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{self, Env, EvalError, Expr, Var};

/// Relative asymmetry of the raw kernel above which validation adds a note.
const ASYMMETRY_NOTE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CoefficientSet {
    x0: f64,
    x1: f64,
    g: Expr,
    w: Expr,
    q: Expr,
    beta: Expr,
    g_scale: f64,
    q_scale: f64,
    w_scale: f64,
}

fn parse_field(field: &str, text: &str, vars: &[Var]) -> Result<Expr> {
    expr::parse(text, vars).map_err(|source| Error::Parse {
        field: field.to_string(),
        source,
    })
}

impl CoefficientSet {
    /// Parses the four coefficient expressions. `beta` may use `x` and `y`.
    pub fn parse(x0: f64, x1: f64, g: &str, w: &str, q: &str, beta: &str) -> Result<Self> {
        let x = [Var::X];
        Self::from_exprs(
            x0,
            x1,
            parse_field("g", g, &x)?,
            parse_field("w", w, &x)?,
            parse_field("q", q, &x)?,
            parse_field("beta", beta, &[Var::X, Var::Y])?,
        )
    }

    pub fn from_exprs(x0: f64, x1: f64, g: Expr, w: Expr, q: Expr, beta: Expr) -> Result<Self> {
        if !(x0 > 0.0 && x1 > x0 && x1.is_finite()) {
            return Err(Error::Domain { x0, x1 });
        }
        for (name, e) in [("g", &g), ("w", &w), ("q", &q)] {
            if e.uses(Var::Y) {
                return Err(Error::InvalidCoefficients(format!(
                    "`{name}` may only depend on x"
                )));
            }
        }
        Ok(CoefficientSet {
            x0,
            x1,
            g,
            w,
            q,
            beta,
            g_scale: 1.0,
            q_scale: 1.0,
            w_scale: 1.0,
        })
    }

    /// Scalar multipliers applied on top of the expressions.
    pub fn with_scales(mut self, g_scale: f64, q_scale: f64, w_scale: f64) -> Result<Self> {
        for (name, s) in [
            ("g_scale", g_scale),
            ("q_scale", q_scale),
            ("w_scale", w_scale),
        ] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidCoefficients(format!(
                    "{name} must be finite and positive, got {s}"
                )));
            }
        }
        self.g_scale = g_scale;
        self.q_scale = q_scale;
        self.w_scale = w_scale;
        Ok(self)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn scales(&self) -> (f64, f64, f64) {
        (self.g_scale, self.q_scale, self.w_scale)
    }

    pub fn g_expr(&self) -> &Expr {
        &self.g
    }

    pub fn w_expr(&self) -> &Expr {
        &self.w
    }

    pub fn q_expr(&self) -> &Expr {
        &self.q
    }

    pub fn beta_expr(&self) -> &Expr {
        &self.beta
    }

    pub fn g(&self, x: f64) -> Result<f64, EvalError> {
        Ok(self.g_scale * self.g.eval(&Env::x(x))?)
    }

    pub fn w(&self, x: f64) -> Result<f64, EvalError> {
        Ok(self.w_scale * self.w.eval(&Env::x(x))?)
    }

    pub fn q(&self, x: f64) -> Result<f64, EvalError> {
        Ok(self.q_scale * self.q.eval(&Env::x(x))?)
    }

    /// The kernel exactly as written, before symmetrization and truncation.
    pub fn beta_raw(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        self.beta.eval(&Env::xy(x, y))
    }

    /// Effective kernel: symmetrized, and zero once `x + y > x1`.
    pub fn beta_eval(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        if x + y > self.x1 {
            return Ok(0.0);
        }
        let a = self.beta_raw(x, y)?;
        let b = self.beta_raw(y, x)?;
        Ok(0.5 * (a + b))
    }

    /// Samples every coefficient on `n_check` uniform points (the kernel on
    /// the tensor grid) and lists each violated assumption.
    pub fn validate(&self, n_check: usize) -> Result<ValidationReport> {
        if n_check < 2 {
            return Err(Error::Argument("n_check must be at least 2".into()));
        }
        let h = (self.x1 - self.x0) / (n_check - 1) as f64;
        let xs: Vec<f64> = (0..n_check)
            .map(|i| {
                if i + 1 == n_check {
                    self.x1
                } else {
                    self.x0 + i as f64 * h
                }
            })
            .collect();
        let mut report = ValidationReport::default();

        for &x in &xs {
            match self.g(x) {
                Ok(v) if v > 0.0 => {}
                Ok(v) => report.push(Assumption::Growth, x, None, format!("g <= 0 (g = {v})")),
                Err(e) => report.push(Assumption::Growth, x, None, e.message),
            }
            match self.w(x) {
                Ok(v) if v >= 0.0 => {}
                Ok(v) => report.push(Assumption::Removal, x, None, format!("w < 0 (w = {v})")),
                Err(e) => report.push(Assumption::Removal, x, None, e.message),
            }
            match self.q(x) {
                Ok(v) if v >= 0.0 => {}
                Ok(v) => report.push(Assumption::Fecundity, x, None, format!("q < 0 (q = {v})")),
                Err(e) => report.push(Assumption::Fecundity, x, None, e.message),
            }
        }

        let mut worst_asym: f64 = 0.0;
        let mut negative_kernel = None;
        for &x in &xs {
            for &y in &xs {
                if x + y > self.x1 {
                    continue;
                }
                let (a, b) = match (self.beta_raw(x, y), self.beta_raw(y, x)) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(e), _) | (_, Err(e)) => {
                        report.push(Assumption::Kernel, x, Some(y), e.message);
                        continue;
                    }
                };
                let scale = a.abs().max(b.abs());
                if scale > 0.0 {
                    worst_asym = worst_asym.max((a - b).abs() / scale);
                }
                if a < 0.0 && negative_kernel.is_none() {
                    negative_kernel = Some((x, y, a));
                }
            }
        }
        if worst_asym > ASYMMETRY_NOTE {
            report.notes.push(format!(
                "beta is not symmetric (max relative asymmetry {worst_asym:.3e}); \
                 the symmetrized kernel is used"
            ));
        }
        if let Some((x, y, v)) = negative_kernel {
            report.notes.push(format!(
                "beta is negative at x={x}, y={y} (beta = {v}); positivity of the \
                 coagulation term is not guaranteed"
            ));
        }
        report
            .notes
            .push("smoothness of g (C^1) is not checked".into());
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// g > 0 on [x0, x1]
    Growth,
    /// w >= 0
    Removal,
    /// q >= 0
    Fecundity,
    /// kernel evaluates
    Kernel,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Assumption::Growth => "A_g",
            Assumption::Removal => "A_w",
            Assumption::Fecundity => "A_q",
            Assumption::Kernel => "A_beta",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub assumption: Assumption,
    pub x: f64,
    pub y: Option<f64>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} at x={}", self.assumption, self.message, self.x)?;
        if let Some(y) = self.y {
            write!(f, ", y={y}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    fn push(&mut self, assumption: Assumption, x: f64, y: Option<f64>, message: String) {
        self.violations.push(Violation {
            assumption,
            x,
            y,
            message,
        });
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}
