use phytoagg::operators::{l1_norm, moments};
use phytoagg::simulator::{
    run, simulate, InitialCondition, Integrator, SimulationConfig, Simulator, StopReason, TimeStep,
};
use phytoagg::{CoefficientSet, Discretization, Grading, Mesh, SpectralContext, StateVector};

fn small(beta: &str, q: &str) -> CoefficientSet {
    CoefficientSet::parse(1.0, 3.0, "1 + x", "0.2", q, beta).unwrap()
}

fn short_cfg(n: usize, t_end: f64) -> SimulationConfig {
    SimulationConfig {
        n,
        t_end: Some(t_end),
        record_stride: Some(1),
        ..SimulationConfig::default()
    }
}

#[test]
fn euler_step_is_consistent_to_second_order_locally() {
    let cs = small("0.5", "2 + x");
    let mesh = Mesh::new(1.0, 3.0, 100, Grading::Uniform).unwrap();
    let d = Discretization::new(&cs, &mesh).unwrap();
    let sim = Simulator::new(&d, Integrator::Euler);
    let p = StateVector::sample(&mesh, |x| 1.0 + (3.0 * x).sin().powi(2));
    let dt0 = sim.cfl_step(0.5);
    let diffs: Vec<f64> = [1.0, 0.5, 0.25, 0.125]
        .iter()
        .map(|f| {
            let dt = dt0 * f;
            let one = sim.step(&p, dt).unwrap().state;
            let half = sim
                .step(&sim.step(&p, 0.5 * dt).unwrap().state, 0.5 * dt)
                .unwrap()
                .state;
            l1_norm(
                &mesh,
                &StateVector::new(
                    one.values()
                        .iter()
                        .zip(half.values())
                        .map(|(a, b)| (a - b).abs())
                        .collect(),
                ),
            )
        })
        .collect();
    for w in diffs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }
}

#[test]
fn indicator_shifts_by_face_fluxes() {
    let cs = CoefficientSet::parse(1.0, 2.0, "1", "0", "0", "0").unwrap();
    let mesh = Mesh::new(1.0, 2.0, 10, Grading::Uniform).unwrap();
    let d = Discretization::new(&cs, &mesh).unwrap();
    let sim = Simulator::new(&d, Integrator::Euler);
    let p = StateVector::sample(&mesh, |x| if x < 1.5 { 1.0 } else { 0.0 });
    let dt = 0.05;
    let next = sim.step(&p, dt).unwrap().state;
    let dx = 0.1;
    let expected: Vec<f64> = (0..10)
        .map(|i| {
            let inflow = if i == 0 { 0.0 } else { p.values()[i - 1] };
            p.values()[i] + dt / dx * (inflow - p.values()[i])
        })
        .collect();
    for (a, b) in next.values().iter().zip(&expected) {
        assert!((a - b).abs() < 1e-14);
    }
    let (n0, _) = moments(&mesh, &p);
    let (n1, _) = moments(&mesh, &next);
    assert!((n1 - n0 + dt * d.outflow(&p)).abs() < 1e-15);
}

#[test]
fn zero_initial_data_stays_zero() {
    let cfg = SimulationConfig {
        initial: InitialCondition::bump(0.0),
        integrator: Integrator::Rk2,
        ..short_cfg(80, 2.0)
    };
    let (_, trace) = simulate(&small("1", "2 + x"), &cfg).unwrap();
    assert!(trace.final_state.values().iter().all(|v| v.to_bits() == 0));
    assert!(trace
        .rows
        .iter()
        .all(|r| r.l1_norm == 0.0 && r.number_residual == 0.0));
}

#[test]
fn runs_are_positive_and_reproducible() {
    for integrator in [Integrator::Euler, Integrator::Rk2] {
        let cfg = SimulationConfig {
            integrator,
            snapshot_stride: 10,
            initial: InitialCondition::bump(0.1),
            ..short_cfg(120, 3.0)
        };
        let cs = small("1 + x*y", "2 + x");
        let (_, a) = simulate(&cs, &cfg).unwrap();
        let (_, b) = simulate(&cs, &cfg).unwrap();
        assert!(
            a.max_negativity < 1e-12,
            "{integrator}: {}",
            a.max_negativity
        );
        assert!(a.snapshots.iter().all(|(_, s)| s.is_nonnegative()));
        assert!(a.rows.windows(2).all(|w| w[1].t > w[0].t));
        let bits = |t: &phytoagg::SimulationTrace| -> Vec<u64> {
            t.rows
                .iter()
                .flat_map(|r| [r.t, r.l1_norm, r.mass, r.mass_residual])
                .map(f64::to_bits)
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }
}

#[test]
fn mass_residual_shrinks_under_refinement() {
    let worst = |n| {
        let (_, tr) = simulate(&small("0.5", "2 + x"), &short_cfg(n, 1.0)).unwrap();
        let scale = tr.rows.iter().map(|r| r.mass).fold(0.0, f64::max);
        tr.rows[1..tr.rows.len() - 1]
            .iter()
            .map(|r| r.mass_residual.abs())
            .fold(0.0, f64::max)
            / scale
    };
    let (a, b, c) = (worst(100), worst(200), worst(400));
    assert!(b < 0.65 * a && c < 0.65 * b, "{a} {b} {c}");
}

#[test]
fn linear_regime_rate_is_beta_independent() {
    let cs_lin = small("0", "2 + x");
    let mesh = Mesh::new(1.0, 3.0, 200, Grading::Uniform).unwrap();
    let ctx = SpectralContext::new(&cs_lin, &mesh, 4).unwrap();
    let g1 = ctx.gamma_x1();
    let window = (2.0 * g1, 4.0 * g1);
    let rate = |beta: &str, eps: f64| {
        let cfg = SimulationConfig {
            n: 200,
            t_end: Some(window.1),
            initial: InitialCondition::bump(eps),
            ..SimulationConfig::default()
        };
        simulate(&small(beta, "2 + x"), &cfg)
            .unwrap()
            .1
            .estimate_rate(window)
            .unwrap()
    };
    let base = rate("0", 1.0);
    let gaps: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&e| (rate("2", e) - base).abs())
        .collect();
    for w in gaps.windows(2) {
        assert!(w[1] < 0.2 * w[0], "{gaps:?}");
    }
}

#[test]
fn unstable_growth_passes_ten_times_the_initial_norm() {
    let cs = small("1", "2 + x");
    let mesh = Mesh::new(1.0, 3.0, 150, Grading::Uniform).unwrap();
    let ctx = SpectralContext::new(&cs, &mesh, 4).unwrap();
    assert!(ctx.xi(0.0) > 0.0);
    let cfg = SimulationConfig {
        amplitude_cap: Some(10.0),
        initial: InitialCondition::bump(1e-4),
        ..short_cfg(150, 10.0 * ctx.gamma_x1())
    };
    let (_, tr) = simulate(&cs, &cfg).unwrap();
    match tr.stop {
        StopReason::AmplitudeCap { t } => assert!(t < 10.0 * ctx.gamma_x1()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn growing_loss_term_aborts_with_last_good_time() {
    // the loss bound dt (max w + |beta| ||p||) <= 1 eventually fails as p grows
    let cs = small("50", "20");
    let mesh = Mesh::new(1.0, 3.0, 40, Grading::Uniform).unwrap();
    let d = Discretization::new(&cs, &mesh).unwrap();
    let cfg = SimulationConfig {
        time_step: TimeStep::Cfl(0.9),
        initial: InitialCondition::bump(1e-3),
        ..short_cfg(40, 50.0)
    };
    let tr = run(&d, &cs, &cfg).unwrap();
    match tr.stop {
        StopReason::BlowUp { last_good_time } => {
            assert!(last_good_time > 0.0 && last_good_time < 50.0);
            assert_eq!(tr.final_time, last_good_time);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn oversized_fixed_step_is_rejected_up_front() {
    let cfg = SimulationConfig {
        time_step: TimeStep::Fixed(1.0),
        ..short_cfg(50, 1.0)
    };
    assert!(simulate(&small("0", "1"), &cfg).is_err());
}
