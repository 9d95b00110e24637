use std::f64::consts::PI;

use faer::Mat;
use kerrsync::measures::*;
use kerrsync::qspace::{DensityMatrix, FockSpace};
use kerrsync::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_state(space: &FockSpace, seed: u64) -> DensityMatrix {
    let d = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Mat::<C64>::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &a * a.adjoint();
    let tr: C64 = (0..d).map(|i| m[(i, i)]).sum();
    let m = Mat::from_fn(d, d, |i, j| m[(i, j)] / tr);
    DensityMatrix::new(space, m).unwrap()
}

/// Brute-force `P(φ)` from the joint phase distribution
/// `p(φ₁, φ₂) = ⟨φ₁φ₂|ρ|φ₁φ₂⟩` integrated along `φ₁ − φ₂ = φ`.
fn brute_force_phase(rho: &DensityMatrix, n: usize, grid: usize) -> Vec<f64> {
    let h = 2.0 * PI / grid as f64;
    let phase_ket = |phi: f64| -> Vec<C64> { (0..n).map(|k| C64::from_polar(1.0, k as f64 * phi)).collect() };
    let mut out = vec![0.0; grid];
    for i in 0..grid {
        let mut acc = 0.0;
        for j in 0..grid {
            let p1 = phase_ket((i + j) as f64 * h);
            let p2 = phase_ket(j as f64 * h);
            let v: Vec<C64> = (0..n * n).map(|idx| p1[idx / n] * p2[idx % n]).collect();
            let mut s = c(0.0, 0.0);
            for r in 0..n * n {
                for q in 0..n * n {
                    s += v[r].conj() * rho.get(r, q) * v[q];
                }
            }
            acc += s.re;
        }
        out[i] = acc;
    }
    let norm: f64 = out.iter().sum::<f64>() * h;
    out.iter().map(|v| v / norm).collect()
}

#[test]
fn phase_distribution_matches_brute_force() {
    let s = FockSpace::new(&[3, 3]).unwrap();
    let rho = random_state(&s, 7);
    let grid = 32;
    let pd = relative_phase_distribution_on(&rho, grid).unwrap();
    let bf = brute_force_phase(&rho, 3, grid);
    for (a, b) in pd.values.iter().zip(&bf) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn phase_distribution_is_not_mirrored() {
    // |0,1⟩ + e^{iθ}|1,0⟩ has P(φ) ∝ 1 + cos(φ − θ), peaked at φ = +θ
    let s = FockSpace::new(&[2, 2]).unwrap();
    let theta = 1.0;
    let mut psi = vec![c(0.0, 0.0); 4];
    psi[s.index(&[0, 1])] = c(1.0, 0.0);
    psi[s.index(&[1, 0])] = C64::from_polar(1.0, theta);
    let rho = DensityMatrix::pure(&s, &psi).unwrap();
    let pd = relative_phase_distribution(&rho).unwrap();
    let (_, arg) = pd.max();
    let bf = brute_force_phase(&rho, 2, 64);
    let (ib, _) = bf
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    let bf_arg = ib as f64 * 2.0 * PI / 64.0;
    let dist = |a: f64, b: f64| ((a - b + PI).rem_euclid(2.0 * PI) - PI).abs();
    assert!(dist(arg, bf_arg) < 2.0 * PI / 64.0);
    assert!(dist(arg, theta) < 1e-9);
}

#[test]
fn two_photon_superposition_example() {
    // (|1,1⟩ + |0,2⟩)/√2 → P(φ) = (1 + cos φ)/2π, S = 1
    let s = FockSpace::new(&[3, 3]).unwrap();
    let mut psi = vec![c(0.0, 0.0); 9];
    psi[s.index(&[1, 1])] = c(1.0, 0.0);
    psi[s.index(&[0, 2])] = c(1.0, 0.0);
    let rho = DensityMatrix::pure(&s, &psi).unwrap();
    let pd = relative_phase_distribution(&rho).unwrap();
    for (&phi, &v) in pd.phis.iter().zip(&pd.values) {
        assert!((v - (1.0 + phi.cos()) / (2.0 * PI)).abs() < 1e-12);
    }
    let integral: f64 = pd.values.iter().sum::<f64>() * pd.step();
    assert!((integral - 1.0).abs() < 1e-12);
    assert!((sync_measure(&rho).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn product_fock_states_are_unsynchronized() {
    let s = FockSpace::new(&[4, 4]).unwrap();
    for occ in [[1, 1], [0, 2], [3, 1]] {
        let rho = DensityMatrix::basis(&s, &occ).unwrap();
        assert!(sync_measure(&rho).unwrap().abs() < 1e-12);
    }
}

#[test]
fn sync_maximum_refines_between_grid_points() {
    let s = FockSpace::new(&[2, 2]).unwrap();
    let mut psi = vec![c(0.0, 0.0); 4];
    psi[1] = c(1.0, 0.0);
    psi[2] = C64::from_polar(1.0, 0.123456);
    let rho = DensityMatrix::pure(&s, &psi).unwrap();
    let pd = relative_phase_distribution_on(&rho, 16).unwrap();
    let (m, _) = pd.max();
    // P = (1 + cos(φ + θ))/2π has maximum 1/π
    assert!((m - 1.0 / PI).abs() < 1e-12);
}

/// Quadrature wavefunction of `|n⟩` for `x = (a + a†)/√2`.
fn hermite_function(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    let hn = if n == 0 {
        h0
    } else {
        for k in 1..n {
            let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
            h0 = h1;
            h1 = h2;
        }
        h1
    };
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    hn * (-x * x / 2.0).exp() / (PI.sqrt() * 2f64.powi(n as i32) * fact).sqrt()
}

#[test]
fn wigner_marginal_matches_hermite_functions() {
    let s = FockSpace::new(&[5]).unwrap();
    let mut psi = vec![c(0.0, 0.0); 5];
    psi[0] = c(0.6, 0.0);
    psi[1] = c(0.0, 0.48);
    psi[3] = c(0.64, 0.0);
    let rho = DensityMatrix::pure(&s, &psi).unwrap();
    let xs: Vec<f64> = (-16..=16).map(|i| i as f64 * 0.25).collect();
    let dp = 0.05;
    let ps: Vec<f64> = (-160..=160).map(|i| i as f64 * dp).collect();
    let w = wigner(&rho, &xs, &ps).unwrap();
    for (j, &x) in xs.iter().enumerate() {
        let marg: f64 = (0..ps.len()).map(|i| w[(i, j)]).sum::<f64>() * dp;
        let amp: C64 = (0..5).map(|n| psi[n] * hermite_function(n, x)).sum::<C64>() / 0.6f64.hypot(0.48).hypot(0.64);
        assert!(
            (marg - amp.norm_sqr()).abs() < 1e-8,
            "x={x}: {marg} vs {}",
            amp.norm_sqr()
        );
    }
}

#[test]
fn wigner_fock_and_coherent_values() {
    let s = FockSpace::new(&[20]).unwrap();
    let one = DensityMatrix::basis(&s, &[1]).unwrap();
    let w = wigner(&one, &[0.0], &[0.0]).unwrap();
    assert!((w[(0, 0)] + 1.0 / PI).abs() < 1e-14);

    // coherent state: W = e^{−(x−x₀)²−(p−p₀)²}/π with β = (x₀ + ip₀)/√2
    let beta = c(0.8, -0.5);
    let mut psi = vec![c(0.0, 0.0); 20];
    let mut term = c((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for (n, p) in psi.iter_mut().enumerate() {
        if n > 0 {
            term *= beta / (n as f64).sqrt();
        }
        *p = term;
    }
    let rho = DensityMatrix::pure(&s, &psi).unwrap();
    let (x0, p0) = (beta.re * 2f64.sqrt(), beta.im * 2f64.sqrt());
    let xs = [x0 - 0.7, x0, x0 + 0.3];
    let ps = [p0 - 0.2, p0, p0 + 0.9];
    let w = wigner(&rho, &xs, &ps).unwrap();
    for (i, &p) in ps.iter().enumerate() {
        for (j, &x) in xs.iter().enumerate() {
            let expect = (-(x - x0).powi(2) - (p - p0).powi(2)).exp() / PI;
            assert!((w[(i, j)] - expect).abs() < 1e-10);
        }
    }
}

#[test]
fn negativity_of_bell_and_product_states() {
    let s = FockSpace::new(&[2, 2]).unwrap();
    let mut psi = vec![c(0.0, 0.0); 4];
    psi[0] = c(1.0, 0.0);
    psi[3] = c(1.0, 0.0);
    let bell = DensityMatrix::pure(&s, &psi).unwrap();
    assert!((log_negativity(&bell, (2, 2)).unwrap() - 1.0).abs() < 1e-12);
    let prod = DensityMatrix::basis(&s, &[1, 0]).unwrap();
    assert!(log_negativity(&prod, (2, 2)).unwrap().abs() < 1e-12);
}

#[test]
fn hinton_round_trip_is_lossless() {
    let s = FockSpace::new(&[3, 3]).unwrap();
    let rho = random_state(&s, 11);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("h.csv");
    hinton_export(&rho, &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("k,l,m,n,abs,re,im\n"));
    let back = hinton_import(&p).unwrap();
    let direct = hinton_entries(&rho, HINTON_THRESHOLD).unwrap();
    assert_eq!(back, direct);
    for e in &back {
        assert_eq!(e.value, rho.get(e.k * 3 + e.l, e.m * 3 + e.n));
    }
}

#[test]
fn hinton_drops_small_entries() {
    let s = FockSpace::new(&[2, 2]).unwrap();
    let rho = DensityMatrix::basis(&s, &[1, 0]).unwrap();
    let e = hinton_entries(&rho, HINTON_THRESHOLD).unwrap();
    assert_eq!(e.len(), 1);
    assert_eq!((e[0].k, e[0].l, e[0].m, e[0].n), (1, 0, 1, 0));
}

#[test]
fn xcorr_lag_convention() {
    // y is x delayed by 3 samples, so ∫x(t) y(t−τ) peaks at τ = −3dt
    let n = 200;
    let dt = 0.01;
    let x: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin()).collect();
    let y: Vec<f64> = (0..n).map(|i| if i >= 3 { x[i - 3] } else { 0.0 }).collect();
    let c = cross_correlation(&x, &y, dt, 0.1).unwrap();
    assert!((c.argmax_tau + 3.0 * dt).abs() < 1e-12);
    let r = cross_correlation(&y, &x, dt, 0.1).unwrap();
    for (a, b) in c.values.iter().zip(r.values.iter().rev()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn xcorr_of_independent_noise_vanishes() {
    // Monte Carlo: white noise of variance 1/dt has E[C_τ] = 0 and
    // Var[C_τ] = n·dt²/dt² = n for each lag
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dt: f64 = 0.01;
    let n = 1000;
    let trials = 400;
    let mut mean = 0.0;
    let mut var = 0.0;
    for _ in 0..trials {
        let x: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) / dt.sqrt())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) / dt.sqrt())
            .collect();
        let c = cross_correlation(&x, &y, dt, 0.0).unwrap();
        mean += c.values[0];
        var += c.values[0] * c.values[0];
    }
    mean /= trials as f64;
    var = var / trials as f64 - mean * mean;
    assert!(mean.abs() < 4.0 * (n as f64 / trials as f64).sqrt());
    assert!((var / n as f64 - 1.0).abs() < 0.25);
}

#[test]
fn centered_xcorr_removes_offsets() {
    let x: Vec<f64> = (0..100).map(|i| 5.0 + (i as f64 * 0.2).sin()).collect();
    let raw = cross_correlation(&x, &x, 0.1, 0.0).unwrap();
    let cen = cross_correlation_centered(&x, &x, 0.1, 0.0).unwrap();
    assert!(raw.values[0] > 200.0);
    assert!(cen.values[0] < 6.0);
}

#[test]
fn pearson_limits() {
    let a = [1.0, 2.0, 3.0, 4.0];
    assert!((pearson(&a, &[2.0, 4.0, 6.0, 8.0]) - 1.0).abs() < 1e-14);
    assert!((pearson(&a, &[-1.0, -2.0, -3.0, -4.0]) + 1.0).abs() < 1e-14);
}

#[test]
fn phase_distribution_matches_brute_force_on_a_fine_grid() {
    let s = FockSpace::new(&[4, 4]).unwrap();
    let rho = random_state(&s, 11);
    let pd = relative_phase_distribution_on(&rho, 256).unwrap();
    let bf = brute_force_phase(&rho, 4, 256);
    for (a, b) in pd.values.iter().zip(&bf) {
        assert!((a - b).abs() < 1e-6);
    }
}

/// `ρ → U ρ U†` with `U = u₁ ⊗ u₂` given as dense per-mode unitaries.
fn local_unitary(rho: &DensityMatrix, u1: &Mat<C64>, u2: &Mat<C64>) -> DensityMatrix {
    let (n1, n2) = (u1.nrows(), u2.nrows());
    let u = Mat::from_fn(n1 * n2, n1 * n2, |r, q| u1[(r / n2, q / n2)] * u2[(r % n2, q % n2)]);
    let out = &u * rho.data() * u.adjoint();
    DensityMatrix::new(rho.space(), out).unwrap()
}

fn phase_shift(n: usize, theta: f64) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            C64::from_polar(1.0, theta * i as f64)
        } else {
            c(0.0, 0.0)
        }
    })
}

#[test]
fn sync_measure_ignores_local_phase_rotations() {
    let s = FockSpace::new(&[3, 3]).unwrap();
    let rho = random_state(&s, 5);
    let s0 = sync_measure(&rho).unwrap();
    for (t1, t2) in [(0.3, 0.0), (1.1, -2.0), (2.5, 2.5)] {
        let r = local_unitary(&rho, &phase_shift(3, t1), &phase_shift(3, t2));
        assert!((sync_measure(&r).unwrap() - s0).abs() < 1e-9);
    }
}

#[test]
fn negativity_ignores_local_unitaries() {
    let s = FockSpace::new(&[3, 3]).unwrap();
    let rho = random_state(&s, 9);
    let e0 = log_negativity(&rho, (3, 3)).unwrap();
    // a real rotation mixing |0⟩ and |2⟩ on the first mode, phases on the second
    let (cs, sn) = (0.4f64.cos(), 0.4f64.sin());
    let mut u1 = phase_shift(3, 0.0);
    u1[(0, 0)] = c(cs, 0.0);
    u1[(0, 2)] = c(-sn, 0.0);
    u1[(2, 0)] = c(sn, 0.0);
    u1[(2, 2)] = c(cs, 0.0);
    let r = local_unitary(&rho, &u1, &phase_shift(3, 0.8));
    assert!((log_negativity(&r, (3, 3)).unwrap() - e0).abs() < 1e-8);
}

#[test]
fn negativity_of_a_partially_entangled_pure_state() {
    // cos θ|00⟩ + sin θ|11⟩ has E_N = log₂(1 + sin 2θ)
    let s = FockSpace::new(&[2, 2]).unwrap();
    for theta in [0.1, 0.4, 0.7] {
        let mut psi = vec![c(0.0, 0.0); 4];
        psi[0] = c(f64::cos(theta), 0.0);
        psi[3] = c(f64::sin(theta), 0.0);
        let rho = DensityMatrix::pure(&s, &psi).unwrap();
        let expect = (1.0 + (2.0 * theta).sin()).log2();
        assert!((log_negativity(&rho, (2, 2)).unwrap() - expect).abs() < 1e-8);
    }
}

#[test]
fn xcorr_of_cosine_and_sine() {
    // over whole periods ∫cos(ωt) sin(ω(t−τ)) dt = −(T/2) sin ωτ
    let omega = 2.0 * PI;
    let dt = 1e-3;
    let n = 4000;
    let x: Vec<f64> = (0..n).map(|i| (omega * i as f64 * dt).cos()).collect();
    let y: Vec<f64> = (0..n).map(|i| (omega * i as f64 * dt).sin()).collect();
    let r = cross_correlation(&x, &y, dt, 0.25).unwrap();
    for (&tau, &v) in r.taus.iter().zip(&r.values) {
        let overlap = (n as f64) * dt - tau.abs();
        let expect = -0.5 * overlap * (omega * tau).sin();
        // the overlap window is not a whole number of periods
        assert!((v - expect).abs() < 0.1, "τ={tau}: {v} vs {expect}");
    }
    // extremum at π/(2ω), pulled in by the shrinking overlap:
    // tan ωτ = ω(T − τ)
    let t = n as f64 * dt;
    let star = (0.5 * PI - (1.0 / (omega * (t - 0.25))).atan()) / omega;
    assert!(
        (r.argmax_tau.abs() - star).abs() < 1.5 * dt,
        "{} vs {star}",
        r.argmax_tau
    );
}

#[test]
fn wigner_integrates_to_one() {
    let s = FockSpace::new(&[6]).unwrap();
    let rho = random_state(&s, 2);
    let h = 0.05;
    let xs: Vec<f64> = (-160..=160).map(|i| i as f64 * h).collect();
    let w = wigner(&rho, &xs, &xs).unwrap();
    let mut total = 0.0;
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            total += w[(i, j)];
        }
    }
    assert!((total * h * h - 1.0).abs() < 1e-8);
}
