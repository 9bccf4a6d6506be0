//! The characteristic function of the linearized operator and what follows
//! from it.
//!
//! For real `lambda`,
//!
//! ```text
//! xi(lambda) = int_{x0}^{x1} q(x)/g(x) exp(-lambda*Gamma(x) - W(x)) dx - 1
//! Gamma(x)   = int_{x0}^{x} 1/g,     W(x) = int_{x0}^{x} w/g
//! ```
//!
//! `xi` is strictly decreasing on the reals, tends to `-1` as
//! `lambda -> +inf` and blows up as `lambda -> -inf` unless `q` vanishes, so
//! it has exactly one real root `lambda0`, which is the spectral bound. The
//! zero solution is stable when `xi(0) < 0` and unstable when `xi(0) > 0`.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::CoefficientSet;
use crate::operators::StateVector;
use crate::quad::{self, CumulativeTable, GaussLegendre, Mesh};

/// Default half-width of the marginal band on `xi(0)`.
pub const DEFAULT_MARGINAL_TOL: f64 = 1e-9;

/// Root bracket width used by [`SpectralContext::classify`], relative to
/// the natural rate scale `1/Gamma(x1)`.
pub const ROOT_TOL_REL: f64 = 1e-13;

/// `|xi(lambda)|` below which `lambda` counts as an eigenvalue.
pub const EIGEN_ROOT_TOL: f64 = 1e-6;

/// `|xi(lambda)|` below which the resolvent is treated as singular.
pub const RESOLVENT_SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Stable,
    Unstable,
    Marginal,
    NoRoot,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Stable => "Stable",
            Classification::Unstable => "Unstable",
            Classification::Marginal => "Marginal",
            Classification::NoRoot => "NoRoot",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralBound {
    Root(f64),
    /// `q` vanishes, so `xi == -1` everywhere.
    NoRoot,
}

impl SpectralBound {
    pub fn root(self) -> Option<f64> {
        match self {
            SpectralBound::Root(l) => Some(l),
            SpectralBound::NoRoot => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub xi_at_zero: f64,
    pub lambda0: Option<f64>,
    pub classification: Classification,
    pub gamma_x1: f64,
    pub compactness_time: f64,
    pub tolerance_used: f64,
    pub note: Option<String>,
}

impl SpectralReport {
    /// The alpha-growth bound of the linear semigroup is minus infinity
    /// for every admissible coefficient set; it is reported, not computed.
    pub const ALPHA_GROWTH_BOUND: f64 = f64::NEG_INFINITY;
}

/// Bracket options for [`SpectralContext::find_spectral_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Final bracket width.
    pub tol: f64,
    /// Bracket expansion gives up beyond `|lambda| > max_abs_lambda`.
    pub max_abs_lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenfunction {
    pub lambda: f64,
    /// `phi(x0) g(x0)`, fixed by `||phi||_1 = 1`.
    pub boundary_flux: f64,
    /// Samples at the mesh nodes.
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

/// Quadrature data for `xi` and friends on one mesh: the transit-time table
/// `Gamma`, the removal table `W`, and both evaluated at every Gauss
/// abscissa of the composite rule.
#[derive(Debug, Clone)]
pub struct SpectralContext {
    cs: CoefficientSet,
    mesh: Mesh,
    rule: GaussLegendre,
    gamma: CumulativeTable,
    removal: CumulativeTable,
    /// quadrature weight times q/g at each abscissa
    renewal_weight: Vec<f64>,
    /// quadrature weight times 1/g at each abscissa
    density_weight: Vec<f64>,
    gamma_at: Vec<f64>,
    removal_at: Vec<f64>,
    g_centers: Vec<f64>,
    q_centers: Vec<f64>,
    q_vanishes: bool,
}

impl SpectralContext {
    pub fn new(cs: &CoefficientSet, mesh: &Mesh, quad_order: usize) -> Result<Self> {
        let rule = GaussLegendre::new(quad_order)?;
        let inv_g = |x: f64| -> Result<f64> {
            let g = cs.g(x)?;
            if !(g > 0.0) {
                return Err(Error::InvalidCoefficients(format!(
                    "g(x) = {g} <= 0 at x = {x}"
                )));
            }
            Ok(1.0 / g)
        };
        let w_over_g = |x: f64| -> Result<f64> { Ok(cs.w(x)? * inv_g(x)?) };
        let gamma = quad::try_cumulative(inv_g, mesh, &rule)?;
        let removal = quad::try_cumulative(w_over_g, mesh, &rule)?;

        let cap = mesh.n() * rule.order();
        let mut renewal_weight = Vec::with_capacity(cap);
        let mut density_weight = Vec::with_capacity(cap);
        let mut gamma_at = Vec::with_capacity(cap);
        let mut removal_at = Vec::with_capacity(cap);
        let mut q_vanishes = true;
        for (k, cell) in mesh.nodes().windows(2).enumerate() {
            let (a, b) = (cell[0], cell[1]);
            for (x, wt) in rule.mapped(a, b) {
                let ig = inv_g(x)?;
                let q = cs.q(x)?;
                if q != 0.0 {
                    q_vanishes = false;
                }
                renewal_weight.push(wt * q * ig);
                density_weight.push(wt * ig);
                // accurate partial-cell integrals rather than table interpolation
                gamma_at.push(gamma.values()[k] + rule.try_integrate(a, x, inv_g)?);
                removal_at.push(removal.values()[k] + rule.try_integrate(a, x, w_over_g)?);
            }
        }
        let g_centers = mesh
            .centers()
            .iter()
            .map(|&x| cs.g(x))
            .collect::<Result<_, _>>()?;
        let q_centers = mesh
            .centers()
            .iter()
            .map(|&x| cs.q(x))
            .collect::<Result<_, _>>()?;
        Ok(SpectralContext {
            cs: cs.clone(),
            mesh: mesh.clone(),
            rule,
            gamma,
            removal,
            renewal_weight,
            density_weight,
            gamma_at,
            removal_at,
            g_centers,
            q_centers,
            q_vanishes,
        })
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.cs
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    /// Cumulative table of `Gamma(x) = int 1/g`.
    pub fn gamma_table(&self) -> &CumulativeTable {
        &self.gamma
    }

    /// Cumulative table of `W(x) = int w/g`.
    pub fn removal_table(&self) -> &CumulativeTable {
        &self.removal
    }

    /// `Gamma(x1)`, the transit time across the whole domain.
    pub fn gamma_x1(&self) -> f64 {
        self.gamma.total()
    }

    /// Natural rate scale `1/Gamma(x1)`.
    pub fn rate_scale(&self) -> f64 {
        1.0 / self.gamma_x1()
    }

    pub fn q_vanishes(&self) -> bool {
        self.q_vanishes
    }

    fn weighted_exp_sum(&self, weights: &[f64], lambda: f64) -> f64 {
        let terms: Vec<f64> = weights
            .iter()
            .zip(self.gamma_at.iter().zip(&self.removal_at))
            .map(|(&c, (&gam, &rem))| {
                if c == 0.0 {
                    0.0
                } else {
                    c * (-lambda * gam - rem).exp()
                }
            })
            .collect();
        quad::pairwise_sum(&terms)
    }

    /// `xi(lambda)`; may be `+inf` for very negative `lambda`.
    pub fn xi(&self, lambda: f64) -> f64 {
        self.weighted_exp_sum(&self.renewal_weight, lambda) - 1.0
    }

    /// The unique real root of `xi`: sign of `xi(0)` picks the direction,
    /// the bracket doubles from `1/Gamma(x1)`, then Brent's method.
    pub fn find_spectral_bound(&self, opts: RootOptions) -> Result<SpectralBound> {
        if !(opts.tol > 0.0) {
            return Err(Error::Argument(format!(
                "root tolerance must be positive, got {}",
                opts.tol
            )));
        }
        if self.q_vanishes {
            return Ok(SpectralBound::NoRoot);
        }
        let xi0 = self.xi(0.0);
        if xi0 == 0.0 {
            return Ok(SpectralBound::Root(0.0));
        }
        let dir = xi0.signum();
        let mut a = 0.0;
        let mut fa = xi0;
        let mut step = self.rate_scale();
        loop {
            let b = dir * step;
            let fb = self.xi(b);
            if fb.is_nan() {
                return Err(Error::BracketExpansion { bound: step });
            }
            if fb == 0.0 {
                return Ok(SpectralBound::Root(b));
            }
            if fb.signum() != dir {
                let root = brent(|l| self.xi(l), a, b, fa, fb, opts.tol);
                return Ok(SpectralBound::Root(root));
            }
            a = b;
            fa = fb;
            step *= 2.0;
            if step > opts.max_abs_lambda {
                return Err(Error::BracketExpansion {
                    bound: opts.max_abs_lambda,
                });
            }
        }
    }

    pub fn default_root_options(&self) -> RootOptions {
        RootOptions {
            tol: ROOT_TOL_REL * self.rate_scale(),
            max_abs_lambda: 1e15 * self.rate_scale(),
        }
    }

    /// Stability verdict from the sign of `xi(0)` with a marginal band of
    /// half-width `tol`.
    pub fn classify(&self, tol: f64) -> Result<SpectralReport> {
        if !(tol >= 0.0) {
            return Err(Error::Argument(format!(
                "marginal tolerance must be >= 0, got {tol}"
            )));
        }
        let xi0 = self.xi(0.0);
        let bound = self.find_spectral_bound(self.default_root_options())?;
        let gamma_x1 = self.gamma_x1();
        let (classification, note) = match bound {
            SpectralBound::NoRoot => (
                Classification::NoRoot,
                Some(
                    "q vanishes: xi = -1 everywhere; the zero solution is stable (no renewal)"
                        .to_string(),
                ),
            ),
            SpectralBound::Root(_) if xi0 < -tol => (Classification::Stable, None),
            SpectralBound::Root(_) if xi0 > tol => (Classification::Unstable, None),
            SpectralBound::Root(_) => (
                Classification::Marginal,
                Some(format!("|xi(0)| <= {tol}: linearization is inconclusive")),
            ),
        };
        Ok(SpectralReport {
            xi_at_zero: xi0,
            lambda0: bound.root(),
            classification,
            gamma_x1,
            compactness_time: 2.0 * gamma_x1,
            tolerance_used: tol,
            note,
        })
    }

    /// `phi(x) = C/g(x) exp(-lambda Gamma(x) - W(x))` with `||phi||_1 = 1`.
    pub fn eigenfunction(&self, lambda: f64) -> Result<Eigenfunction> {
        let xi = self.xi(lambda);
        if !(xi.abs() < EIGEN_ROOT_TOL) {
            return Err(Error::NotARoot { lambda, xi });
        }
        let norm = self.weighted_exp_sum(&self.density_weight, lambda);
        let boundary_flux = 1.0 / norm;
        let nodes = self.mesh.nodes().to_vec();
        let values = nodes
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let e = (-lambda * self.gamma.values()[k] - self.removal.values()[k]).exp();
                Ok(boundary_flux * e / self.cs.g(x)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Eigenfunction {
            lambda,
            boundary_flux,
            nodes,
            values,
        })
    }

    /// The eigenfunction evaluated anywhere in `[x0, x1]` (transit tables
    /// interpolated).
    pub fn eigenfunction_at(&self, ef: &Eigenfunction, x: f64) -> Result<f64> {
        let e = (-ef.lambda * self.gamma.eval(x) - self.removal.eval(x)).exp();
        Ok(ef.boundary_flux * e / self.cs.g(x)?)
    }

    /// Samples the eigenfunction at the cell centres.
    pub fn eigenfunction_state(&self, ef: &Eigenfunction) -> Result<StateVector> {
        StateVector::try_sample(&self.mesh, |x| self.eigenfunction_at(ef, x))
    }

    /// `K[phi] = int q phi` for the eigenfunction, by the Gauss rule.
    pub fn eigen_inflow(&self, ef: &Eigenfunction) -> f64 {
        ef.boundary_flux * self.weighted_exp_sum(&self.renewal_weight, ef.lambda)
    }

    /// `u = R(lambda, L) phi` on the cell centres.
    ///
    /// With `v = g u` and `Phi = lambda Gamma + W`, `(lambda - L) u = phi`
    /// reads `v' + Phi' v = phi`, so
    /// `v(x) = v(x0) e^{-Phi(x)} + int_{x0}^{x} phi(y) e^{-(Phi(x) - Phi(y))} dy`.
    /// The boundary condition `v(x0) = K[u]` is affine in `v(x0)` with
    /// coefficient `xi(lambda) + 1`, which closes it.
    pub fn resolvent_apply(&self, lambda: f64, phi: &StateVector) -> Result<StateVector> {
        let n = self.mesh.n();
        if phi.len() != n {
            return Err(Error::MeshMismatch {
                left: phi.len(),
                right: n,
            });
        }
        let xi = self.xi(lambda);
        if !(xi.abs() >= RESOLVENT_SINGULAR_TOL) {
            return Err(Error::SingularResolvent { lambda, xi });
        }
        let exponent = |x: f64| lambda * self.gamma.eval(x) + self.removal.eval(x);
        let node_exponent = |k: usize| lambda * self.gamma.values()[k] + self.removal.values()[k];

        // particular solution v_p (v_p(x0) = 0) at nodes and centres
        let mut vp_node = 0.0;
        let mut vp_center = Vec::with_capacity(n);
        let mut homog_center = Vec::with_capacity(n);
        for k in 0..n {
            let (a, b) = (self.mesh.nodes()[k], self.mesh.nodes()[k + 1]);
            let c = self.mesh.centers()[k];
            let (pa, pc, pb) = (node_exponent(k), exponent(c), node_exponent(k + 1));
            let f = phi.values()[k];
            vp_center.push(vp_node * (-(pc - pa)).exp() + f * (c - a) * relaxation(pc - pa));
            homog_center.push((-pc).exp());
            vp_node = vp_node * (-(pb - pa)).exp() + f * (b - a) * relaxation(pb - pa);
        }

        let dx = self.mesh.widths();
        let particular_inflow: f64 = (0..n)
            .map(|k| self.q_centers[k] * vp_center[k] / self.g_centers[k] * dx[k])
            .sum();
        // v0 = (xi + 1) v0 + K[v_p / g]
        let v0 = -particular_inflow / xi;
        let values = (0..n)
            .map(|k| (v0 * homog_center[k] + vp_center[k]) / self.g_centers[k])
            .collect();
        Ok(StateVector::signed(values))
    }
}

/// `(1 - e^{-d}) / d`, the exact average of `e^{-(d - s d)}` over `s in [0,1]`.
fn relaxation(d: f64) -> f64 {
    if d.abs() < 1e-8 {
        1.0 - 0.5 * d
    } else {
        -(-d).exp_m1() / d
    }
}

/// Brent's method on a bracket with `fa`, `fb` of opposite sign.
fn brent<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, fa: f64, fb: f64, tol: f64) -> f64 {
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..500 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f(b);
    }
    b
}
