use faer::Mat;
use kerrsync::evolve::*;
use kerrsync::qspace::*;
use kerrsync::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_model(space: &FockSpace, seed: u64) -> LindbladModel {
    let d = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = |s: f64| c(s * (rng.random::<f64>() - 0.5), s * (rng.random::<f64>() - 0.5));
    let a = Mat::<C64>::from_fn(d, d, |_, _| g(2.0));
    let h = Mat::from_fn(d, d, |i, j| a[(i, j)] + a[(j, i)].conj());
    let l1 = Mat::from_fn(d, d, |_, _| g(1.0));
    let l2 = destroy(space, 0).unwrap();
    LindbladModel::new(
        Operator::from_dense(space, &h).unwrap(),
        vec![(0.7, Operator::from_dense(space, &l1).unwrap()), (1.3, l2)],
    )
    .unwrap()
}

#[test]
fn evolution_matches_dense_exponential() {
    for (dims, seed) in [(vec![2], 1), (vec![4], 2), (vec![2, 2], 3), (vec![3], 4)] {
        let s = FockSpace::new(&dims).unwrap();
        let m = random_model(&s, seed);
        let rho0 = DensityMatrix::basis(&s, &vec![1; dims.len()]).unwrap();
        let t = [0.0, 0.4, 0.8, 1.2];
        let out = evolve_me(&m, &rho0, &t).unwrap();
        let l = m.liouvillian().matrix().to_dense();
        let v0 = rho0.to_vec();
        for (k, &tk) in t.iter().enumerate() {
            let e = expm_dense(&Mat::from_fn(l.nrows(), l.ncols(), |i, j| l[(i, j)] * tk));
            let v = out[k].to_vec();
            for i in 0..v.len() {
                let expect: C64 = (0..v0.len()).map(|j| e[(i, j)] * v0[j]).sum();
                assert!((v[i] - expect).norm() < 1e-8);
            }
            assert!((out[k].trace().re - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn damped_excitation_decays_exponentially() {
    let s = FockSpace::new(&[3]).unwrap();
    let a = destroy(&s, 0).unwrap();
    let m = LindbladModel::new(Operator::zero(&s), vec![(1.0, a)]).unwrap();
    let rho0 = DensityMatrix::basis(&s, &[1]).unwrap();
    let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.3).collect();
    let out = evolve_me(&m, &rho0, &t).unwrap();
    for (r, &tk) in out.iter().zip(&t) {
        assert!((r.get(1, 1).re - (-tk).exp()).abs() < 1e-10);
    }
}

#[test]
fn free_rotation_of_a_coherence() {
    let s = FockSpace::new(&[2]).unwrap();
    let omega = 2.3;
    let h = number(&s, 0).unwrap().scale(c(omega, 0.0));
    let m = LindbladModel::new(h, vec![]).unwrap();
    let psi = [c(1.0, 0.0), c(1.0, 0.0)];
    let rho0 = DensityMatrix::pure(&s, &psi).unwrap();
    let t = [0.0, 0.5, 1.0, 1.5];
    let out = evolve_me(&m, &rho0, &t).unwrap();
    for (r, &tk) in out.iter().zip(&t) {
        // ρ₁₀ = ½ e^{−iωt}
        assert!((r.get(1, 0) - 0.5 * C64::from_polar(1.0, -omega * tk)).norm() < 1e-10);
    }
}

#[test]
fn driven_damped_mode_settles_to_coherent_state() {
    let s = FockSpace::new(&[16]).unwrap();
    let (delta, eps, kappa) = (1.5, 0.4, 2.0);
    let a = destroy(&s, 0).unwrap();
    let x = &a + &a.dag();
    let h = Operator::linear_combination(&s, &[(c(delta, 0.0), &number(&s, 0).unwrap()), (c(eps, 0.0), &x)]);
    let m = LindbladModel::new(h, vec![(kappa, a.clone())]).unwrap();
    let ss = steady_state_direct(&m).unwrap();
    let alpha = -eps / c(delta, -0.5 * kappa);
    assert!((ss.rho.expect(&a) - alpha).norm() < 1e-10);
    assert!(ss.residual < 1e-10);
    // stationarity under evolution
    let out = evolve_me(&m, &ss.rho, &[0.0, 1.0]).unwrap();
    let drift = out[1]
        .to_vec()
        .iter()
        .zip(ss.rho.to_vec())
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max);
    assert!(drift < 1e-7);
}

#[test]
fn degenerate_steady_state_is_rejected() {
    // no dissipation: every diagonal state is stationary
    let s = FockSpace::new(&[3]).unwrap();
    let m = LindbladModel::new(number(&s, 0).unwrap(), vec![]).unwrap();
    assert!(steady_state_direct(&m).is_err());
}

#[test]
fn model_rejects_non_hermitian_hamiltonian_and_negative_rates() {
    let s = FockSpace::new(&[3]).unwrap();
    let a = destroy(&s, 0).unwrap();
    assert!(LindbladModel::new(a.clone(), vec![]).is_err());
    assert!(LindbladModel::new(Operator::zero(&s), vec![(-1.0, a)]).is_err());
}

fn driven_qubit_like() -> LindbladModel {
    let s = FockSpace::new(&[4]).unwrap();
    let a = destroy(&s, 0).unwrap();
    let ad = a.dag();
    let kerr = &(&ad * &ad) * &(&a * &a);
    let x = &a + &ad;
    let h = Operator::linear_combination(
        &s,
        &[
            (c(0.3, 0.0), &number(&s, 0).unwrap()),
            (c(-0.5, 0.0), &kerr),
            (c(0.6, 0.0), &x),
        ],
    );
    LindbladModel::new(h, vec![(1.0, a)]).unwrap()
}

#[test]
fn trajectory_average_approaches_direct_solution() {
    let m = driven_qubit_like();
    let direct = steady_state_direct(&m).unwrap();
    let mut opts = TrajectoryAverage::new(8, 5.0, 200.0, 17);
    opts.control.rate_factor = 20.0;
    let avg = steady_state_trajectory_average_with(&m, &opts).unwrap();
    let dist = direct.rho.trace_distance(&avg.rho).unwrap();
    assert!(dist < 0.05, "trace distance {dist}");
    assert_eq!(avg.method, SteadyMethod::TrajectoryAverage);
}

#[test]
fn trajectory_average_is_independent_of_thread_count() {
    let m = driven_qubit_like();
    let opts = TrajectoryAverage::new(4, 1.0, 5.0, 99);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| steady_state_trajectory_average_with(&m, &opts).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.rho.to_vec(), b.rho.to_vec());
}

#[test]
fn sme_trajectories_are_reproducible() {
    let m = driven_qubit_like();
    let s = m.space().clone();
    let ch = [MeasuredChannel {
        rate: 1.0,
        op: destroy(&s, 0).unwrap(),
        phase: 0.0,
    }];
    let rho0 = DensityMatrix::basis(&s, &[0]).unwrap();
    let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.05).collect();
    let a = sme_homodyne_trajectory(&m, &ch, &rho0, &t, 5).unwrap();
    let b = sme_homodyne_trajectory(&m, &ch, &rho0, &t, 5).unwrap();
    let d = sme_homodyne_trajectory(&m, &ch, &rho0, &t, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.currents, d.currents);
    a.validate().unwrap();
}

#[test]
fn unmeasured_sme_follows_master_equation() {
    let m = driven_qubit_like();
    let s = m.space().clone();
    let ch = [MeasuredChannel {
        rate: 0.0,
        op: destroy(&s, 0).unwrap(),
        phase: 0.0,
    }];
    let rho0 = DensityMatrix::basis(&s, &[0]).unwrap();
    let t: Vec<f64> = (0..21).map(|k| k as f64 * 0.1).collect();
    let sys = SmeSystem::new(&m, &ch).unwrap();
    let control = StepControl {
        rate_factor: 400.0,
        dt_max: None,
    };
    let mut states = Vec::new();
    sme_homodyne_trajectory_with(&sys, &rho0, &t, 1, 0, &control, |_, v| states.push(v.to_vec())).unwrap();
    let exact = evolve_me(&m, &rho0, &t).unwrap();
    for (v, r) in states.iter().zip(&exact) {
        let err = v
            .iter()
            .zip(r.to_vec())
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }
}

#[test]
fn vacuum_homodyne_current_is_shot_noise() {
    let s = FockSpace::new(&[3]).unwrap();
    let a = destroy(&s, 0).unwrap();
    let kappa = 2.0;
    let m = LindbladModel::new(Operator::zero(&s), vec![(kappa, a.clone())]).unwrap();
    let ch = [MeasuredChannel {
        rate: kappa,
        op: a,
        phase: 0.3,
    }];
    let rho0 = DensityMatrix::basis(&s, &[0]).unwrap();
    let dt = 0.01;
    let t: Vec<f64> = (0..20000).map(|k| k as f64 * dt).collect();
    let rec = sme_homodyne_trajectory(&m, &ch, &rho0, &t, 8).unwrap();
    let j = &rec.currents[0];
    let n = j.len() as f64;
    let mean = j.iter().sum::<f64>() / n;
    let var = j.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    // J dt = √κ dW  ⇒  Var J = κ/dt
    assert!(mean.abs() < 4.0 * (kappa / dt / n).sqrt());
    assert!((var / (kappa / dt) - 1.0).abs() < 0.05, "{var}");
    assert!(rec.x_expect[0].iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn measured_channel_must_exist_in_model() {
    let s = FockSpace::new(&[3]).unwrap();
    let a = destroy(&s, 0).unwrap();
    let m = LindbladModel::new(Operator::zero(&s), vec![(1.0, a.clone())]).unwrap();
    let too_fast = [MeasuredChannel {
        rate: 2.0,
        op: a,
        phase: 0.0,
    }];
    assert!(SmeSystem::new(&m, &too_fast).is_err());
    let other = [MeasuredChannel {
        rate: 0.5,
        op: number(&s, 0).unwrap(),
        phase: 0.0,
    }];
    assert!(SmeSystem::new(&m, &other).is_err());
}

#[test]
fn ensemble_helpers_keep_order_and_enforce_success_rate() {
    let out = run_ensemble(10, |i| {
        if i == 3 {
            Err(kerrsync::Error::Solver("x".into()))
        } else {
            Ok(i * 2)
        }
    });
    assert_eq!(out.len(), 10);
    assert_eq!(*out[4].as_ref().unwrap(), 8);
    let ok = collect_successes(out, 0.9).unwrap();
    assert_eq!(ok, vec![0, 2, 4, 8, 10, 12, 14, 16, 18]);
    let out = run_ensemble(10, |i| {
        if i < 2 {
            Err(kerrsync::Error::Solver("x".into()))
        } else {
            Ok(i)
        }
    });
    assert!(matches!(
        collect_successes(out, 0.9),
        Err(kerrsync::Error::FailureRate { .. })
    ));
}
