//! Explicit evolution of the linear problem `u_t = L u`.
//!
//! Along characteristics the solution is known in closed form. A point `x`
//! with `t <= Gamma(x)` is reached from the foot point
//! `y = Gamma^{-1}(Gamma(x) - t)`:
//!
//! ```text
//! u(t, x) = u0(y) g(y)/g(x) exp(-(W(x) - W(y)))
//! ```
//!
//! and for `Gamma(x) < t` it entered through `x0` at time `t - Gamma(x)`:
//!
//! ```text
//! u(t, x) = b(t - Gamma(x)) exp(-W(x)) / g(x),     b(t) = K[u(t)]
//! ```
//!
//! Substituting both branches into `b = K[u]` and changing variables to the
//! transit time `tau = Gamma(x)` gives a renewal equation
//!
//! ```text
//! b(t) = f(t) + int_0^{min(t, Gamma(x1))} k(tau) b(t - tau) dtau
//! k(tau) = q(X(tau)) exp(-W(X(tau))),   X = Gamma^{-1}
//! ```
//!
//! with `f` the contribution of the initial data. It is marched on a
//! uniform `tau` grid with the trapezoidal rule; the `tau = 0` term is
//! moved to the left-hand side, so each step is a scalar division.

use crate::error::{Error, Result};
use crate::fit;
use crate::operators::{l1_norm, StateVector};
use crate::quad::Mesh;
use crate::spectral::SpectralContext;

/// Default number of boundary-flux steps per transit time `Gamma(x1)`.
pub const DEFAULT_STEPS_PER_TRANSIT: usize = 2000;

/// Samples used by [`decay_rate_linear`].
pub const DEFAULT_RATE_SAMPLES: usize = 40;

/// Norm below which a decay fit reports `-inf`.
const UNDERFLOW_NORM: f64 = 1e-300;

/// Samples of the boundary flux `b(t_k)`, `t_k = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFluxHistory {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl BoundaryFluxHistory {
    /// Linear interpolation in time.
    pub fn at(&self, t: f64) -> f64 {
        let s = t / self.dt;
        let k = s.floor();
        let i = k as usize;
        if i + 1 >= self.values.len() {
            return self.values[self.values.len() - 1];
        }
        let frac = s - k;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }
}

/// Precomputed characteristic data for one coefficient set and mesh.
#[derive(Debug, Clone)]
pub struct LinearSemigroup {
    ctx: SpectralContext,
    dt: f64,
    /// `tau` grid points per transit time; `Gamma(x1) = steps * dt`
    steps: usize,
    /// `X(tau_m)`
    foot: Vec<f64>,
    foot_g: Vec<f64>,
    foot_q: Vec<f64>,
    foot_removal: Vec<f64>,
    center_gamma: Vec<f64>,
    center_removal: Vec<f64>,
    center_g: Vec<f64>,
}

impl LinearSemigroup {
    /// `dt_b` is rounded down so that `Gamma(x1)` is a whole number of steps.
    pub fn new(ctx: &SpectralContext, dt_b: f64) -> Result<Self> {
        if !(dt_b > 0.0 && dt_b.is_finite()) {
            return Err(Error::Argument(format!(
                "dt_b must be positive, got {dt_b}"
            )));
        }
        let mesh = ctx.mesh();
        let gamma = ctx.gamma_table();
        let first_interior = gamma.values()[1];
        if dt_b > first_interior {
            return Err(Error::Causality {
                dt_b,
                suggested: first_interior,
            });
        }
        let gamma_x1 = ctx.gamma_x1();
        let steps = (gamma_x1 / dt_b).ceil().max(1.0) as usize;
        let dt = gamma_x1 / steps as f64;
        let cs = ctx.coefficients();

        let mut foot = Vec::with_capacity(steps + 1);
        for m in 0..=steps {
            let tau = if m == steps { gamma_x1 } else { m as f64 * dt };
            foot.push(gamma.inverse(tau)?);
        }
        let foot_g = foot
            .iter()
            .map(|&x| cs.g(x))
            .collect::<Result<Vec<_>, _>>()?;
        let foot_q = foot
            .iter()
            .map(|&x| cs.q(x))
            .collect::<Result<Vec<_>, _>>()?;
        let foot_removal = foot.iter().map(|&x| ctx.removal_table().eval(x)).collect();
        let center_gamma = mesh.centers().iter().map(|&x| gamma.eval(x)).collect();
        let center_removal = mesh
            .centers()
            .iter()
            .map(|&x| ctx.removal_table().eval(x))
            .collect();
        let center_g = mesh
            .centers()
            .iter()
            .map(|&x| cs.g(x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LinearSemigroup {
            ctx: ctx.clone(),
            dt,
            steps,
            foot,
            foot_g,
            foot_q,
            foot_removal,
            center_gamma,
            center_removal,
            center_g,
        })
    }

    /// Uses `Gamma(x1) / DEFAULT_STEPS_PER_TRANSIT` as the boundary step.
    pub fn with_default_step(ctx: &SpectralContext) -> Result<Self> {
        Self::new(ctx, ctx.gamma_x1() / DEFAULT_STEPS_PER_TRANSIT as f64)
    }

    pub fn mesh(&self) -> &Mesh {
        self.ctx.mesh()
    }

    pub fn context(&self) -> &SpectralContext {
        &self.ctx
    }

    /// Effective boundary time step.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Marches `b` on the `tau` grid up to `horizon`.
    pub fn boundary_flux<F>(&self, p0: F, horizon: f64) -> Result<BoundaryFluxHistory>
    where
        F: Fn(f64) -> f64,
    {
        let big_m = self.steps;
        let dt = self.dt;
        let kmax = (horizon / dt).ceil().max(1.0) as usize;
        let p0g: Vec<f64> = self
            .foot
            .iter()
            .zip(&self.foot_g)
            .map(|(&x, g)| p0(x) * g)
            .collect();
        let kernel: Vec<f64> = self
            .foot_q
            .iter()
            .zip(&self.foot_removal)
            .map(|(q, w)| q * (-w).exp())
            .collect();

        // initial-data forcing f(t_k) = int_0^{Gamma1 - t_k} ... d sigma
        let forcing = |k: usize| -> f64 {
            if k >= big_m {
                return 0.0;
            }
            let top = big_m - k;
            let mut acc = 0.0;
            for (m, &pm) in p0g[..=top].iter().enumerate() {
                let wt = if m == 0 || m == top { 0.5 } else { 1.0 };
                let decay = (-(self.foot_removal[m + k] - self.foot_removal[m])).exp();
                acc += wt * self.foot_q[m + k] * pm * decay;
            }
            dt * acc
        };

        let mut b = Vec::with_capacity(kmax + 1);
        b.push(forcing(0));
        let diag = 1.0 - 0.5 * dt * kernel[0];
        for k in 1..=kmax {
            let top = k.min(big_m);
            let mut acc = 0.5 * kernel[top] * b[k - top];
            for m in 1..top {
                acc += kernel[m] * b[k - m];
            }
            let bk = (forcing(k) + dt * acc) / diag;
            if !bk.is_finite() {
                return Err(Error::BlowUp {
                    last_good_time: (k - 1) as f64 * dt,
                });
            }
            b.push(bk);
        }
        Ok(BoundaryFluxHistory { dt, values: b })
    }

    fn assemble<F>(&self, p0: &F, history: &BoundaryFluxHistory, t: f64) -> Result<StateVector>
    where
        F: Fn(f64) -> f64,
    {
        let cs = self.ctx.coefficients();
        let gamma = self.ctx.gamma_table();
        let x0 = self.mesh().x0();
        let mut out = Vec::with_capacity(self.center_g.len());
        for i in 0..self.center_g.len() {
            let (gam, rem, g) = (
                self.center_gamma[i],
                self.center_removal[i],
                self.center_g[i],
            );
            let mut value = None;
            if t < gam {
                let y = gamma.inverse(gam - t)?;
                // a foot point that rounds onto x0 sits on the seam: use renewal
                if y > x0 {
                    let decay = (-(rem - self.ctx.removal_table().eval(y))).exp();
                    value = Some(p0(y) * cs.g(y)? / g * decay);
                }
            }
            let v = match value {
                Some(v) => v,
                None => history.at((t - gam).max(0.0)) * (-rem).exp() / g,
            };
            out.push(v);
        }
        Ok(StateVector::new(out))
    }

    /// `T(t) p0` at the cell centres for an initial profile given as a
    /// function of size.
    pub fn evolve<F>(&self, p0: F, t: f64) -> Result<StateVector>
    where
        F: Fn(f64) -> f64,
    {
        Ok(self.trajectory(p0, &[t])?.remove(0))
    }

    /// `T(t) p0` for a cell-centred state, interpolated piecewise linearly
    /// between centres. `t = 0` returns the state unchanged.
    pub fn evolve_state(&self, p0: &StateVector, t: f64) -> Result<StateVector> {
        if p0.len() != self.mesh().n() {
            return Err(Error::MeshMismatch {
                left: p0.len(),
                right: self.mesh().n(),
            });
        }
        if t == 0.0 {
            return Ok(p0.clone());
        }
        let mesh = self.mesh();
        self.evolve(|x| p0.interpolate(mesh, x), t)
    }

    /// States at several times from one march of the boundary flux.
    pub fn trajectory<F>(&self, p0: F, times: &[f64]) -> Result<Vec<StateVector>>
    where
        F: Fn(f64) -> f64,
    {
        if let Some(&t) = times.iter().find(|&&t| !(t >= 0.0 && t.is_finite())) {
            return Err(Error::Argument(format!(
                "evolution time must be >= 0, got {t}"
            )));
        }
        let horizon = times.iter().copied().fold(0.0, f64::max);
        let history = self.boundary_flux(&p0, horizon)?;
        times
            .iter()
            .map(|&t| self.assemble(&p0, &history, t))
            .collect()
    }

    /// Slope of `ln ||u(t)||_1` over `samples` equally spaced times in the
    /// window, which must start after the compactness time `2 Gamma(x1)`.
    /// Returns `-inf` if the state underflows.
    pub fn decay_rate<F>(&self, p0: F, window: (f64, f64), samples: usize) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        let (a, b) = window;
        let compact = 2.0 * self.ctx.gamma_x1();
        if !(a >= compact * (1.0 - 1e-12) && b > a) {
            return Err(Error::Argument(format!(
                "rate window [{a}, {b}] must start at or after 2 Gamma(x1) = {compact}"
            )));
        }
        if samples < fit::MIN_RATE_SAMPLES {
            return Err(Error::InsufficientSamples {
                found: samples,
                required: fit::MIN_RATE_SAMPLES,
            });
        }
        let times: Vec<f64> = (0..samples)
            .map(|k| a + (b - a) * k as f64 / (samples - 1) as f64)
            .collect();
        let states = self.trajectory(p0, &times)?;
        let norms: Vec<f64> = states.iter().map(|s| l1_norm(self.mesh(), s)).collect();
        if norms.iter().any(|&v| v < UNDERFLOW_NORM) {
            return Ok(f64::NEG_INFINITY);
        }
        fit::log_linear_slope(&times, &norms)
    }
}

/// One-shot convenience wrapper around [`LinearSemigroup`].
pub fn evolve_linear(
    ctx: &SpectralContext,
    p0: &StateVector,
    t: f64,
    dt_b: f64,
) -> Result<StateVector> {
    LinearSemigroup::new(ctx, dt_b)?.evolve_state(p0, t)
}

/// Decay rate of a cell-centred initial state over `window` with the
/// default boundary step.
pub fn decay_rate_linear(
    ctx: &SpectralContext,
    p0: &StateVector,
    window: (f64, f64),
) -> Result<f64> {
    let sg = LinearSemigroup::with_default_step(ctx)?;
    let mesh = ctx.mesh();
    sg.decay_rate(|x| p0.interpolate(mesh, x), window, DEFAULT_RATE_SAMPLES)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoefficientSet;
    use crate::quad::Grading;

    fn translation_setup() -> LinearSemigroup {
        let cs = CoefficientSet::parse(1.0, 2.0, "1", "0", "0", "0").unwrap();
        let mesh = Mesh::new(1.0, 2.0, 200, Grading::Uniform).unwrap();
        let ctx = SpectralContext::new(&cs, &mesh, 4).unwrap();
        LinearSemigroup::new(&ctx, 1e-3).unwrap()
    }

    fn bump(x: f64) -> f64 {
        (-((x - 1.4) / 0.08).powi(2)).exp()
    }

    #[test]
    fn time_zero_is_identity() {
        let sg = translation_setup();
        let p0 = StateVector::sample(sg.mesh(), bump);
        assert_eq!(sg.evolve_state(&p0, 0.0).unwrap(), p0);
    }

    #[test]
    fn pure_translation_without_renewal() {
        let sg = translation_setup();
        let t = 0.3;
        let u = sg.evolve(bump, t).unwrap();
        for (c, v) in sg.mesh().centers().iter().zip(u.values()) {
            let exact = if c - t >= 1.0 { bump(c - t) } else { 0.0 };
            assert!((v - exact).abs() < 1e-6, "x={c}: {v} vs {exact}");
        }
    }

    #[test]
    fn history_interpolates_linearly() {
        let h = BoundaryFluxHistory {
            dt: 0.5,
            values: vec![0.0, 1.0, 3.0],
        };
        assert_eq!(h.at(0.25), 0.5);
        assert_eq!(h.at(0.75), 2.0);
        assert_eq!(h.at(5.0), 3.0);
        assert_eq!(h.horizon(), 1.0);
    }

    #[test]
    fn oversized_boundary_step_is_rejected() {
        let cs = CoefficientSet::parse(1.0, 2.0, "1", "0", "1", "0").unwrap();
        let mesh = Mesh::new(1.0, 2.0, 100, Grading::Uniform).unwrap();
        let ctx = SpectralContext::new(&cs, &mesh, 4).unwrap();
        match LinearSemigroup::new(&ctx, 0.05) {
            Err(Error::Causality { suggested, .. }) => assert!((suggested - 0.01).abs() < 1e-12),
            other => panic!("expected causality error, got {other:?}"),
        }
    }

    #[test]
    fn window_must_follow_compactness_time() {
        let sg = translation_setup();
        assert!(sg.decay_rate(bump, (0.5, 3.0), 10).is_err());
        assert!(sg.decay_rate(bump, (2.0, 3.0), 5).is_err());
    }
}
