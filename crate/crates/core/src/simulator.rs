//! Explicit time stepping of the full equation `p_t = L p + N[p]` on the
//! finite-volume discretization, with conservation diagnostics.

use std::io::Write;

use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::fit;
use crate::model::CoefficientSet;
use crate::operators::{l1_norm, moments, Discretization, StateVector};
use crate::quad::{self, GaussLegendre, Grading, Mesh};

/// Target number of trace rows when no record stride is given.
const AUTO_RECORD_ROWS: usize = 800;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    /// Heun's method, the two-stage strong-stability-preserving RK2.
    Rk2,
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Integrator::Euler),
            "rk2" | "heun" => Ok(Integrator::Rk2),
            _ => Err(Error::Argument(format!("unknown integrator '{s}'"))),
        }
    }
}

impl std::fmt::Display for Integrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Integrator::Euler => "euler",
            Integrator::Rk2 => "rk2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    /// `dt = cfl * min(dx / g)`
    Cfl(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    /// Gaussian centred mid-domain with width `(x1 - x0) / 20`.
    Bump,
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub profile: InitialProfile,
    pub epsilon: f64,
}

impl InitialCondition {
    pub fn bump(epsilon: f64) -> Self {
        InitialCondition {
            profile: InitialProfile::Bump,
            epsilon,
        }
    }

    pub fn eval(&self, x0: f64, x1: f64, x: f64) -> Result<f64> {
        let shape = match &self.profile {
            InitialProfile::Bump => {
                let center = 0.5 * (x0 + x1);
                let width = (x1 - x0) / 20.0;
                (-((x - center) / width).powi(2)).exp()
            }
            InitialProfile::Expr(e) => e.eval(&Env::x(x))?,
        };
        Ok(self.epsilon * shape)
    }

    pub fn sample(&self, mesh: &Mesh) -> Result<StateVector> {
        let values = mesh
            .centers()
            .iter()
            .map(|&x| self.eval(mesh.x0(), mesh.x1(), x))
            .collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| *v < 0.0) {
            return Err(Error::Argument(
                "initial condition must be non-negative".into(),
            ));
        }
        Ok(StateVector::new(values))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n: usize,
    pub grading: Grading,
    pub time_step: TimeStep,
    /// `None` runs to `4 Gamma(x1)`.
    pub t_end: Option<f64>,
    pub initial: InitialCondition,
    pub integrator: Integrator,
    /// Steps between trace rows; `None` picks about 800 rows.
    pub record_stride: Option<usize>,
    /// Trace rows between stored snapshots; 0 keeps none.
    pub snapshot_stride: usize,
    /// Stop once `||p||_1` exceeds this multiple of epsilon.
    pub amplitude_cap: Option<f64>,
    /// Rate fitting window in units of `Gamma(x1)`.
    pub rate_window: (f64, f64),
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: 1000,
            grading: Grading::Uniform,
            time_step: TimeStep::Cfl(0.9),
            t_end: None,
            initial: InitialCondition::bump(1e-4),
            integrator: Integrator::Euler,
            record_stride: None,
            snapshot_stride: 0,
            amplitude_cap: None,
            rate_window: (2.0, 4.0),
        }
    }
}

/// Diagnostics at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub l1_norm: f64,
    pub number: f64,
    pub mass: f64,
    pub inflow: f64,
    pub outflow: f64,
    /// `dN/dt` minus the number budget `K - out - int w p - pair rate`.
    pub number_residual: f64,
    /// `dM/dt` minus the mass budget `x0 K + int g p - x1 out - int x w p`.
    pub mass_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Completed,
    AmplitudeCap { t: f64 },
    BlowUp { last_good_time: f64 },
}

#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<(f64, StateVector)>,
    pub final_time: f64,
    pub final_state: StateVector,
    pub dt: f64,
    pub steps: usize,
    pub gamma_x1: f64,
    pub stop: StopReason,
    /// Largest pre-clip negative mass relative to `||p||_1` over all steps.
    pub max_negativity: f64,
    pub clipped_mass: f64,
}

impl SimulationTrace {
    /// Fitted exponential rate of `||p||_1` over the rows in `[a, b]`.
    pub fn estimate_rate(&self, window: (f64, f64)) -> Result<f64> {
        let rows: Vec<&TraceRow> = self
            .rows
            .iter()
            .filter(|r| r.t >= window.0 && r.t <= window.1)
            .collect();
        let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
        let v: Vec<f64> = rows.iter().map(|r| r.l1_norm).collect();
        fit::log_linear_slope(&t, &v)
    }

    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "t,l1_norm,number,mass,inflow,outflow,number_residual,mass_residual"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t,
                r.l1_norm,
                r.number,
                r.mass,
                r.inflow,
                r.outflow,
                r.number_residual,
                r.mass_residual
            )?;
        }
        Ok(())
    }

    /// Long format: one `t,x,p` line per cell per snapshot.
    pub fn write_snapshots_csv<W: Write>(&self, mesh: &Mesh, mut out: W) -> Result<()> {
        writeln!(out, "t,x,p")?;
        for (t, s) in &self.snapshots {
            for (x, v) in mesh.centers().iter().zip(s.values()) {
                writeln!(out, "{t:.16e},{x:.16e},{v:.16e}")?;
            }
        }
        Ok(())
    }
}

/// Result of one explicit step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: StateVector,
    /// Negative mass removed by clipping, relative to the input norm.
    pub negativity: f64,
    pub clipped_mass: f64,
}

/// Fixed-step integrator over a discretization.
#[derive(Debug)]
pub struct Simulator<'a> {
    disc: &'a Discretization,
    integrator: Integrator,
    max_w: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(disc: &'a Discretization, integrator: Integrator) -> Self {
        let max_w = disc.removal().iter().copied().fold(0.0, f64::max);
        Simulator {
            disc,
            integrator,
            max_w,
        }
    }

    /// `dt * max(g / dx)`.
    pub fn courant(&self, dt: f64) -> f64 {
        let mesh = self.disc.mesh();
        dt * self
            .disc
            .growth()
            .iter()
            .zip(mesh.widths())
            .map(|(g, dx)| g / dx)
            .fold(0.0, f64::max)
    }

    /// Step size for a target Courant number.
    pub fn cfl_step(&self, cfl: f64) -> f64 {
        cfl / self.courant(1.0)
    }

    fn check_bounds(&self, p: &StateVector, dt: f64) -> Result<()> {
        let c = self.courant(dt);
        if c > 1.0 {
            return Err(Error::StepBound {
                which: "CFL",
                dt,
                limit: dt / c,
            });
        }
        let loss = self.max_w + self.disc.kernel_sup() * l1_norm(self.disc.mesh(), p);
        if dt * loss > 1.0 {
            return Err(Error::StepBound {
                which: "loss positivity",
                dt,
                limit: 1.0 / loss,
            });
        }
        Ok(())
    }

    fn rhs(&self, p: &StateVector) -> Result<StateVector> {
        if !self.disc.has_kernel() {
            return self.disc.linear_apply(p);
        }
        let (lin, coag) = rayon::join(|| self.disc.linear_apply(p), || self.disc.coagulation(p));
        Ok(lin?.axpy(1.0, &coag?))
    }

    /// One step of size `dt`. Negative values are clipped to zero and the
    /// clipped amount reported; non-finite values are a blow-up.
    pub fn step(&self, p: &StateVector, dt: f64) -> Result<StepOutcome> {
        self.check_bounds(p, dt)?;
        let k1 = self.rhs(p)?;
        let next = match self.integrator {
            Integrator::Euler => p.axpy(dt, &k1),
            Integrator::Rk2 => {
                let stage = p.axpy(dt, &k1);
                let k2 = self.rhs(&stage)?;
                p.axpy(0.5 * dt, &k1).axpy(0.5 * dt, &k2)
            }
        };
        if !next.is_finite() {
            return Err(Error::BlowUp {
                last_good_time: 0.0,
            });
        }
        let dx = self.disc.mesh().widths();
        let mut values = next.into_values();
        let mut clipped = 0.0;
        for (v, w) in values.iter_mut().zip(dx) {
            if *v < 0.0 {
                clipped -= *v * w;
                *v = 0.0;
            }
        }
        let norm = l1_norm(self.disc.mesh(), p);
        let negativity = if norm > 0.0 { clipped / norm } else { 0.0 };
        Ok(StepOutcome {
            state: StateVector::new(values),
            negativity,
            clipped_mass: clipped,
        })
    }
}

/// `Gamma(x1) = int 1/g` on the mesh.
pub fn transit_time(cs: &CoefficientSet, mesh: &Mesh) -> Result<f64> {
    let rule = GaussLegendre::new(quad::DEFAULT_ORDER)?;
    Ok(quad::try_integrate(
        |x| cs.g(x).map(|g| 1.0 / g),
        mesh,
        &rule,
    )?)
}

struct Budget {
    number: f64,
    mass: f64,
}

fn budget(disc: &Discretization, p: &StateVector, inflow: f64, outflow: f64) -> Result<Budget> {
    let mesh = disc.mesh();
    let mut growth = 0.0;
    let mut removal = 0.0;
    let mut mass_removal = 0.0;
    for i in 0..mesh.n() {
        let m = p.values()[i] * mesh.widths()[i];
        growth += disc.growth()[i] * m;
        removal += disc.removal()[i] * m;
        mass_removal += mesh.centers()[i] * disc.removal()[i] * m;
    }
    Ok(Budget {
        number: inflow - outflow - removal - disc.pair_rate(p)?,
        mass: mesh.x0() * inflow + growth - mesh.x1() * outflow - mass_removal,
    })
}

fn fill_residuals(rows: &mut [TraceRow], budgets: &[Budget]) {
    let k = rows.len();
    if k < 2 {
        return;
    }
    for i in 0..k {
        let (a, b) = match i {
            0 => (0, 1),
            _ if i == k - 1 => (k - 2, k - 1),
            _ => (i - 1, i + 1),
        };
        let span = rows[b].t - rows[a].t;
        let dn = (rows[b].number - rows[a].number) / span;
        let dm = (rows[b].mass - rows[a].mass) / span;
        rows[i].number_residual = dn - budgets[i].number;
        rows[i].mass_residual = dm - budgets[i].mass;
    }
}

/// Runs the configured simulation on an existing discretization.
pub fn run(
    disc: &Discretization,
    cs: &CoefficientSet,
    cfg: &SimulationConfig,
) -> Result<SimulationTrace> {
    let mesh = disc.mesh();
    let gamma_x1 = transit_time(cs, mesh)?;
    let t_end = cfg.t_end.unwrap_or(4.0 * gamma_x1);
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Argument(format!("t_end must be >= 0, got {t_end}")));
    }
    let sim = Simulator::new(disc, cfg.integrator);
    let dt = match cfg.time_step {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Cfl(c) => sim.cfl_step(c),
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Argument(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let mut p = cfg.initial.sample(mesh)?;
    sim.check_bounds(&p, dt)?;
    let total_steps = (t_end / dt).ceil() as usize;
    let stride = cfg
        .record_stride
        .unwrap_or_else(|| (total_steps / AUTO_RECORD_ROWS).max(1))
        .max(1);
    let cap = cfg.amplitude_cap.map(|c| c * cfg.initial.epsilon);

    let mut rows = Vec::new();
    let mut budgets = Vec::new();
    let mut snapshots = Vec::new();
    let mut record = |t: f64, p: &StateVector, rows: &mut Vec<TraceRow>| -> Result<f64> {
        let (number, mass) = moments(mesh, p);
        let inflow = disc.boundary_inflow(p)?;
        let outflow = disc.outflow(p);
        budgets.push(budget(disc, p, inflow, outflow)?);
        let l1 = l1_norm(mesh, p);
        rows.push(TraceRow {
            t,
            l1_norm: l1,
            number,
            mass,
            inflow,
            outflow,
            number_residual: 0.0,
            mass_residual: 0.0,
        });
        if cfg.snapshot_stride > 0 && (rows.len() - 1).is_multiple_of(cfg.snapshot_stride) {
            snapshots.push((t, p.clone()));
        }
        Ok(l1)
    };

    let mut t = 0.0;
    let mut steps = 0;
    let mut stop = StopReason::Completed;
    let mut max_negativity: f64 = 0.0;
    let mut clipped_mass = 0.0;
    record(t, &p, &mut rows)?;
    while steps < total_steps {
        let h = if steps + 1 == total_steps {
            t_end - t
        } else {
            dt
        };
        let outcome = match sim.step(&p, h) {
            Ok(o) => o,
            Err(Error::BlowUp { .. }) | Err(Error::StepBound { .. }) if steps > 0 => {
                stop = StopReason::BlowUp { last_good_time: t };
                break;
            }
            Err(e) => return Err(e),
        };
        p = outcome.state;
        max_negativity = max_negativity.max(outcome.negativity);
        clipped_mass += outcome.clipped_mass;
        steps += 1;
        t = if steps == total_steps {
            t_end
        } else {
            steps as f64 * dt
        };
        if steps % stride == 0 || steps == total_steps {
            let l1 = record(t, &p, &mut rows)?;
            if cap.is_some_and(|c| l1 > c) {
                stop = StopReason::AmplitudeCap { t };
                break;
            }
        }
    }
    if matches!(stop, StopReason::BlowUp { .. }) && rows.last().map(|r| r.t) != Some(t) {
        record(t, &p, &mut rows)?;
    }
    fill_residuals(&mut rows, &budgets);
    Ok(SimulationTrace {
        rows,
        snapshots,
        final_time: t,
        final_state: p,
        dt,
        steps,
        gamma_x1,
        stop,
        max_negativity,
        clipped_mass,
    })
}

/// Builds the mesh and discretization from the config, then runs.
pub fn simulate(
    cs: &CoefficientSet,
    cfg: &SimulationConfig,
) -> Result<(Discretization, SimulationTrace)> {
    let mesh = Mesh::for_coefficients(cs, cfg.n, cfg.grading)?;
    let disc = Discretization::new(cs, &mesh)?;
    let trace = run(&disc, cs, cfg)?;
    Ok((disc, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(beta: &str) -> CoefficientSet {
        CoefficientSet::parse(1.0, 2.0, "1 + x", "0.5", "1", beta).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let cs = set("x*y");
        let mesh = Mesh::new(1.0, 2.0, 50, Grading::Uniform).unwrap();
        let disc = Discretization::new(&cs, &mesh).unwrap();
        let sim = Simulator::new(&disc, Integrator::Rk2);
        let zero = StateVector::zeros(50);
        let out = sim.step(&zero, sim.cfl_step(0.9)).unwrap();
        assert!(out.state.values().iter().all(|v| v.to_bits() == 0));
    }

    #[test]
    fn cfl_violation_is_an_error() {
        let cs = set("0");
        let mesh = Mesh::new(1.0, 2.0, 50, Grading::Uniform).unwrap();
        let disc = Discretization::new(&cs, &mesh).unwrap();
        let sim = Simulator::new(&disc, Integrator::Euler);
        let p = StateVector::sample(&mesh, |x| x);
        let dt = sim.cfl_step(1.5);
        assert!(matches!(
            sim.step(&p, dt),
            Err(Error::StepBound { which: "CFL", .. })
        ));
    }

    #[test]
    fn run_lands_on_t_end() {
        let cs = set("x + y");
        let cfg = SimulationConfig {
            n: 40,
            t_end: Some(0.37),
            snapshot_stride: 5,
            ..SimulationConfig::default()
        };
        let (_, trace) = simulate(&cs, &cfg).unwrap();
        assert_eq!(trace.final_time, 0.37);
        assert_eq!(trace.rows.last().unwrap().t, 0.37);
        assert_eq!(trace.stop, StopReason::Completed);
        assert!(!trace.snapshots.is_empty());
    }

    #[test]
    fn number_residual_is_first_order_in_dt() {
        // the scheme balances number exactly per step; what remains is the
        // centred-difference error in time
        let worst = |n| {
            let cfg = SimulationConfig {
                n,
                t_end: Some(0.37),
                record_stride: Some(1),
                ..SimulationConfig::default()
            };
            let (_, trace) = simulate(&set("0"), &cfg).unwrap();
            trace
                .rows
                .iter()
                .map(|r| r.number_residual.abs())
                .fold(0.0, f64::max)
        };
        let ratio = worst(400) / worst(200);
        assert!((0.35..0.65).contains(&ratio), "{ratio}");
    }

    #[test]
    fn amplitude_cap_stops_growth() {
        let cs = CoefficientSet::parse(1.0, 2.0, "1", "0", "5", "0").unwrap();
        let cfg = SimulationConfig {
            n: 40,
            t_end: Some(50.0),
            amplitude_cap: Some(100.0),
            initial: InitialCondition::bump(1.0),
            ..SimulationConfig::default()
        };
        let (_, trace) = simulate(&cs, &cfg).unwrap();
        assert!(matches!(trace.stop, StopReason::AmplitudeCap { .. }));
        assert!(trace.final_time < 50.0);
    }

    #[test]
    fn integrator_names_round_trip() {
        for i in [Integrator::Euler, Integrator::Rk2] {
            assert_eq!(i.to_string().parse::<Integrator>().unwrap(), i);
        }
        assert!("leapfrog".parse::<Integrator>().is_err());
    }
}
