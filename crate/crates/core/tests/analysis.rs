use dynlab::analysis::{
    classify, equilibrium_stability, linspace, lyapunov_spectrum, parameter_scan, Classification, ScanConfig,
    SeedPolicy, SystemSpec,
};
use dynlab::integrator::{integrate, IntegratorConfig, Trajectory};
use dynlab::model::{
    equilibrium, full_jacobian_raw, lift, reduced_jacobian, FullState, KRatio, ParamName, Params, ReducedState,
};
use dynlab::system::LinearSystem;

fn trace_average(traj: &Trajectory, p: &Params) -> f64 {
    // trapezoid rule over the samples
    let tr = |y: &[f64]| {
        let mut j = [0.0; 25];
        full_jacobian_raw(y.try_into().unwrap(), p, &mut j);
        (0..5).map(|i| j[i * 6]).sum::<f64>()
    };
    let mut acc = 0.0;
    for i in 1..traj.len() {
        let dt = traj.times[i] - traj.times[i - 1];
        acc += 0.5 * dt * (tr(traj.state(i - 1)) + tr(traj.state(i)));
    }
    acc / (traj.times[traj.len() - 1] - traj.times[0])
}

#[test]
fn stable_equilibrium_spectrum_matches_eigenvalues() {
    let p = Params::new(-3.0, -1.0, -1.0, 0.0);
    let mut y0 = equilibrium(&p).unwrap();
    for (i, d) in [1e-3, -2e-3, 1e-3, 5e-4, -1e-3].iter().enumerate() {
        y0.0[i] += d;
    }
    let spec = SystemSpec::Full { params: p };
    let rep = lyapunov_spectrum(&spec, &y0.0, 200.0, 2200.0, 1.0, &IntegratorConfig::default()).unwrap();
    assert!(!rep.diverged());
    assert!(rep.exponents.iter().all(|l| *l < 0.0), "{:?}", rep.exponents);
    let mut expected: Vec<f64> = equilibrium_stability(&p).unwrap().iter().map(|l| l.re).collect();
    expected.sort_by(|a, b| b.total_cmp(a));
    for (got, want) in rep.exponents.iter().zip(&expected) {
        assert!((got - want).abs() <= 1e-2, "{:?} vs {expected:?}", rep.exponents);
    }

    let traj = spec.integrate(&y0.0, 0.0, 200.0, 0.5, &IntegratorConfig::default()).unwrap();
    assert_eq!(classify(&rep, &traj, 1e-3), Classification::Equilibrium);
}

#[test]
fn reduced_spectrum_at_stable_equilibrium() {
    let p = Params::new(-2.5, -1.0, -2.0, 1.0);
    let k = 0.7;
    let z_eq = ReducedState([0.0, 0.0, -p.f / p.e]);
    let spec = SystemSpec::Reduced { params: p, k };
    let rep =
        lyapunov_spectrum(&spec, &[1e-3, -1e-3, 0.5 + 1e-3], 200.0, 2200.0, 1.0, &IntegratorConfig::default()).unwrap();
    let mut expected: Vec<f64> =
        reduced_jacobian(&z_eq, k, &p).unwrap().complex_eigenvalues().iter().map(|l| l.re).collect();
    expected.sort_by(|a, b| b.total_cmp(a));
    for (got, want) in rep.exponents.iter().zip(&expected) {
        assert!((got - want).abs() <= 1e-2, "{:?} vs {expected:?}", rep.exponents);
    }
}

#[test]
fn spectrum_sum_tracks_trace_average() {
    let cfg = IntegratorConfig::default();
    for p in [Params::new(-3.0, -1.0, -1.0, 0.0), Params::new(-0.6, -1.0, -1.0, 0.4), Params::new(-1.0, 0.5, -2.0, 1.0)]
    {
        let y0 = [0.8, -0.3, 0.2, 0.5, 1.1];
        let spec = SystemSpec::Full { params: p };
        let rep = lyapunov_spectrum(&spec, &y0, 0.0, 100.0, 0.5, &cfg).unwrap();
        let traj = integrate(&dynlab::model::FullSystem::new(p), &y0, 0.0, 100.0, 0.01, &cfg).unwrap();
        let avg = trace_average(&traj, &p);
        assert!((rep.sum() - avg).abs() <= 1e-2 * (1.0 + rep.sum().abs()), "{} vs {avg}", rep.sum());
    }
}

#[test]
fn reduced_spectrum_is_part_of_full_spectrum() {
    let p = Params::new(-2.5, -1.0, -1.0, 0.5);
    let k = 1.5;
    let z0 = ReducedState([0.4, -0.2, 0.3]);
    let y0: FullState = lift(&z0, KRatio::Standard(k)).unwrap();
    let cfg = IntegratorConfig::default();
    let full = lyapunov_spectrum(&SystemSpec::Full { params: p }, &y0.0, 200.0, 2200.0, 1.0, &cfg).unwrap();
    let red = lyapunov_spectrum(&SystemSpec::Reduced { params: p, k }, &z0.0, 200.0, 2200.0, 1.0, &cfg).unwrap();
    for l in &red.exponents {
        let nearest = full.exponents.iter().map(|f| (f - l).abs()).fold(f64::INFINITY, f64::min);
        assert!(nearest <= 5e-3, "{:?} not within {:?}", red.exponents, full.exponents);
    }
}

#[test]
fn linear_oracle_is_periodic() {
    // a neutral direction plus two contracting ones
    let sys = LinearSystem::diagonal(&[0.0, -1.0, -2.0]);
    let bundle = dynlab::integrator::TangentBundle::identity(vec![1.0, 1.0, 1.0]);
    let run = dynlab::integrator::integrate_with_tangents(&sys, &bundle, 0.0, 100.0, 1.0, &IntegratorConfig::default())
        .unwrap();
    let mut sums = [0.0; 3];
    for r in &run.records {
        for (s, l) in sums.iter_mut().zip(&r.log_stretch) {
            *s += l;
        }
    }
    let exps: Vec<f64> = sums.iter().map(|s| s / 100.0).collect();
    for (g, w) in exps.iter().zip([0.0, -1.0, -2.0]) {
        assert!((g - w).abs() <= 1e-6, "{exps:?}");
    }
}

#[test]
fn damped_scan_is_all_equilibrium_under_both_policies() {
    let base = SystemSpec::Full { params: Params::new(-3.0, -1.0, -1.0, 0.0) };
    let y0 = [0.5, -0.4, 0.3, 0.2, 0.1];
    let values = linspace(-3.0, -2.2, 5);
    let cfg = ScanConfig { t_transient: 100.0, t_total: 300.0, out_stride: 0.1, ..ScanConfig::default() };
    let fixed = parameter_scan(&base, &y0, ParamName::C, &values, SeedPolicy::Fixed, &cfg).unwrap();
    let follow = parameter_scan(&base, &y0, ParamName::C, &values, SeedPolicy::Follow, &cfg).unwrap();
    for (a, b) in fixed.iter().zip(&follow) {
        assert_eq!(a.classification, Classification::Equilibrium, "{a:?}");
        assert_eq!(a.classification, b.classification);
        let norm = a.terminal_state.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1e-6, "{a:?}");
    }
}

#[test]
fn stability_grid_settles_on_equilibrium() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let cfg = IntegratorConfig::default();
    // a thinned version of the full grid; the acceptance suite runs the dense one
    for c in linspace(-4.0, -2.5, 4) {
        for e in linspace(-2.0, -0.5, 4) {
            for f in [0.0, 1.0] {
                let p = Params::new(c, -1.0, e, f);
                let eq = equilibrium(&p).unwrap();
                for _ in 0..3 {
                    let mut y0 = [0.0; 5];
                    loop {
                        y0.iter_mut().for_each(|v| *v = rng.gen_range(-5.0..5.0));
                        if y0.iter().map(|v| v * v).sum::<f64>() <= 25.0 {
                            break;
                        }
                    }
                    let spec = SystemSpec::Full { params: p };
                    let traj = spec.integrate(&y0, 0.0, 400.0, 1.0, &cfg).unwrap();
                    let last = traj.last().unwrap();
                    let gap = last.iter().zip(&eq.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    assert!(gap <= 1e-6, "C={c} E={e} F={f}: {last:?}");
                }
            }
        }
    }
}

#[test]
fn boundary_damping_has_a_circle_of_equilibria() {
    // at C = -2 the points y1 = y2 = a, y4 = y5 = b with a^2 + b^2 = F / (E/4 - D),
    // y3 = -(a^2 + b^2)/4 are at rest, so the trivial equilibrium is not global there
    let p = Params::new(-2.0, -1.0, -2.0, 1.0);
    let q = p.f / (p.e / 4.0 - p.d);
    for theta in [0.0_f64, 0.7, 2.0] {
        let (a, b) = ((q / 2.0).sqrt() * (theta.cos() + theta.sin()), (q / 2.0).sqrt() * (theta.cos() - theta.sin()));
        let y = FullState([a, a, -(a * a + b * b) / 4.0, b, b]);
        let f = dynlab::model::full_vector_field(&y, &p).unwrap();
        assert!(f.0.iter().all(|v| v.abs() < 1e-14), "{f:?}");
        assert!((dynlab::invariants::quadratic_norm(&y) - 2.0 * q).abs() < 1e-14);
    }
}
