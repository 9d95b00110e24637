use faer::Mat;
use kerrsync::evolve::{expm_dense, steady_state_direct, SectorSolver};
use kerrsync::models::*;
use kerrsync::qspace::*;
use kerrsync::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Single-mode `D(β) = exp(βa† − β*a)` on `n` levels.
fn displacement_op(n: usize, beta: C64) -> Mat<C64> {
    let s = FockSpace::new(&[n]).unwrap();
    let a = destroy(&s, 0).unwrap().to_dense();
    let gen = Mat::from_fn(n, n, |i, j| beta * a[(j, i)].conj() - beta.conj() * a[(i, j)]);
    expm_dense(&gen)
}

#[test]
fn displacement_shifts_ladder_operator() {
    // D†aD = a + β on the low-lying block of a large truncation
    let n = 60;
    let beta = c(0.6, -0.9);
    let d = displacement_op(n, beta);
    let s = FockSpace::new(&[n]).unwrap();
    let a = destroy(&s, 0).unwrap().to_dense();
    let t = d.adjoint() * &a * &d;
    for i in 0..8 {
        for j in 0..8 {
            let expect = a[(i, j)] + if i == j { beta } else { c(0.0, 0.0) };
            assert!((t[(i, j)] - expect).norm() < 1e-10, "({i},{j})");
        }
    }
}

/// `(op + β·I)` on `space`.
fn shifted(op: &Operator, beta: C64) -> Operator {
    let id = Operator::identity(op.space());
    Operator::linear_combination(op.space(), &[(c(1.0, 0.0), op), (beta, &id)])
}

/// Substitute `a → a + α` etc. into the lab-frame Hamiltonian, add the
/// Hamiltonian part generated by the shifted loss channels, and compare with
/// the displaced-frame model up to a multiple of the identity.
#[test]
fn displaced_model_is_substituted_full_model() {
    let space = FockSpace::new(&[5, 4, 4]).unwrap();
    let p = OscillatorParams::reference(1500.0);
    let f = compute_displacements(&p).unwrap();
    let (a, cc, d) = (
        destroy(&space, 0).unwrap(),
        destroy(&space, 1).unwrap(),
        destroy(&space, 2).unwrap(),
    );
    let (sa, sc, sd) = (shifted(&a, f.alpha), shifted(&cc, f.gamma), shifted(&d, f.delta));
    let (sad, scd, sdd) = (sa.dag(), sc.dag(), sd.dag());
    let na = &sad * &sa;
    let nc = &scd * &sc;
    let nd = &sdd * &sd;
    let kerr = &(&sad * &sad) * &(&sa * &sa);
    let xa = &sa + &sad;
    let xc = &sc + &scd;
    let xd = &sd + &sdd;
    let r = |x: f64| c(x, 0.0);
    let h_sub = Operator::linear_combination(
        &space,
        &[
            (r(p.delta_a), &na),
            (r(p.delta_c), &nc),
            (r(p.delta_d), &nd),
            (r(-p.k), &kerr),
            (r(-p.chi_ac), &(&na * &nc)),
            (r(-p.chi_ad), &(&na * &nd)),
            (r(p.eps_a), &xa),
            (r(p.eps_c), &xc),
            (r(p.eps_d), &xd),
        ],
    );
    let diss = [
        displaced_loss_term(&space, 0, p.kappa_a, f.alpha).unwrap(),
        displaced_loss_term(&space, 1, p.kappa_c, f.gamma).unwrap(),
        displaced_loss_term(&space, 2, p.kappa_d, f.delta).unwrap(),
    ];
    let h_sub = &(&(&h_sub + &diss[0]) + &diss[1]) + &diss[2];
    let model = build_displaced_model(&p, &f, DisplacedTerms::all(), &space).unwrap();
    let diff = (&h_sub - model.hamiltonian()).to_dense();
    let dim = space.dim();
    let shift = diff[(0, 0)];
    let scale = h_sub.matrix().max_abs();
    for i in 0..dim {
        for j in 0..dim {
            let expect = if i == j { shift } else { c(0.0, 0.0) };
            assert!(
                (diff[(i, j)] - expect).norm() < 1e-10 * scale,
                "({i},{j}): {}",
                diff[(i, j)]
            );
        }
    }
}

#[test]
fn shifted_loss_channel_splits_into_dissipator_and_hamiltonian() {
    let space = FockSpace::new(&[4, 3]).unwrap();
    let a = destroy(&space, 1).unwrap();
    let alpha = c(0.3, 0.7);
    let rate = 2.5;
    let lhs = dissipator(&shifted(&a, alpha)).unwrap();
    let h = displaced_loss_term(&space, 1, rate, alpha).unwrap();
    let rhs = dissipator(&a)
        .unwrap()
        .matrix()
        .scale(c(rate, 0.0))
        .add(hamiltonian_generator(&h).matrix());
    let lhs = lhs.matrix().scale(c(rate, 0.0));
    assert!(lhs.max_abs_diff(&rhs) < 1e-12);
}

#[test]
fn hopping_splits_resonant_doublet() {
    // at Δ̂₁ − Δ̂₂ = 2K, |1,1⟩ and |2,0⟩ are degenerate and split by
    // 2√2|J_lin|; |0,2⟩ sits 4K away and only shifts them by O(|J|²/K)
    let space = FockSpace::new(&[4, 4]).unwrap();
    let k = 1e4;
    let mk = |dh: f64| EffectiveKerrParams::new(dh, k, 0.1, 10.0, 0.0, 0.0, 1).unwrap();
    let jl = c(0.3, -0.4);
    let model = build_coupled_effective_model(
        &mk(2.0 * k + 5.0),
        &mk(5.0),
        &EffectiveCoupling::hopping_only(jl),
        &space,
    )
    .unwrap();
    let h = model.hamiltonian().to_dense();
    let idx = [space.index(&[2, 0]), space.index(&[1, 1]), space.index(&[0, 2])];
    assert!((h[(idx[0], idx[0])] - h[(idx[1], idx[1])]).norm() < 1e-9);
    assert!((h[(idx[0], idx[1])] - 2f64.sqrt() * jl).norm() < 1e-12);
    let block = Mat::from_fn(3, 3, |r, s| h[(idx[r], idx[s])]);
    let mut ev = hermitian_eigenvalues(&block).unwrap();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let split = ev[2] - ev[1];
    assert!((split - 2.0 * 2f64.sqrt() * jl.norm()).abs() < 1e-4, "{split}");
}

#[test]
fn uncoupled_oscillators_form_a_product_steady_state() {
    let s1 = FockSpace::new(&[5]).unwrap();
    let s2 = FockSpace::new(&[5, 5]).unwrap();
    let pa = EffectiveKerrParams::new(12.0, 30.0, 0.1, 10.0, 1.5, 2.0, 1).unwrap();
    let pb = EffectiveKerrParams::new(-7.0, 30.0, 0.2, 10.0, 3.0, 1.0, 1).unwrap();
    let ra = steady_state_direct(&build_effective_model(&pa, &s1).unwrap())
        .unwrap()
        .rho;
    let rb = steady_state_direct(&build_effective_model(&pb, &s1).unwrap())
        .unwrap()
        .rho;
    let coupled = build_coupled_effective_model(&pa, &pb, &EffectiveCoupling::hopping_only(c(0.0, 0.0)), &s2).unwrap();
    let r = steady_state_direct(&coupled).unwrap().rho;
    let d = s2.dim();
    for i in 0..d {
        for j in 0..d {
            let expect = ra.get(i / 5, j / 5) * rb.get(i % 5, j % 5);
            assert!((r.get(i, j) - expect).norm() < 1e-10);
        }
    }
    // the generator itself is the Kronecker sum
    let l1 = build_effective_model(&pa, &s1).unwrap().liouvillian();
    let l2 = build_effective_model(&pb, &s1).unwrap().liouvillian();
    let lc = coupled.liouvillian();
    // column stacking: vec(ρ₁ ⊗ ρ₂) is a permutation of vec ρ₁ ⊗ vec ρ₂,
    // so compare actions on product states instead
    let x = DensityMatrix::basis(&s1, &[2]).unwrap();
    let y = DensityMatrix::basis(&s1, &[1]).unwrap();
    let lx = l1.apply(&x);
    let ly = l2.apply(&y);
    let prod = Mat::from_fn(d, d, |i, j| x.get(i / 5, j / 5) * y.get(i % 5, j % 5));
    let out = lc.apply(&DensityMatrix::new_unchecked(&s2, prod).unwrap());
    for i in 0..d {
        for j in 0..d {
            let expect = lx[(i / 5, j / 5)] * y.get(i % 5, j % 5) + x.get(i / 5, j / 5) * ly[(i % 5, j % 5)];
            assert!((out[(i, j)] - expect).norm() < 1e-12);
        }
    }
}

#[test]
fn built_hamiltonians_are_hermitian() {
    let p = OscillatorParams::reference(2000.0);
    let f = compute_displacements(&p).unwrap();
    let s3 = FockSpace::new(&[4, 3, 3]).unwrap();
    for m in [
        build_full_oscillator_model(&p, &s3).unwrap(),
        build_displaced_model(&p, &f, DisplacedTerms::all(), &s3).unwrap(),
        build_displaced_model(&p, &f, DisplacedTerms::rwa(), &s3).unwrap(),
    ] {
        assert!(m.hamiltonian().hermitian_deviation() < 1e-12);
    }
    let cp = CircuitParams {
        osc: [p.clone(), OscillatorParams::reference(2010.0)],
        j: -6.0,
    };
    let f2 = compute_displacements(&cp.osc[1]).unwrap();
    let s6 = FockSpace::new(&[3, 2, 2, 3, 2, 2]).unwrap();
    let m = build_displaced_pair_model(&cp, &[f, f2], DisplacedTerms::all(), &s6).unwrap();
    assert!(m.hamiltonian().hermitian_deviation() < 1e-12);
    let m = build_full_model(&cp, &s6).unwrap();
    assert!(m.hamiltonian().hermitian_deviation() < 1e-12);
}

#[test]
fn sector_solver_matches_direct_solver() {
    let p = OscillatorParams::reference(1500.0);
    let f = compute_displacements(&p).unwrap();
    let s3 = FockSpace::new(&[5, 3, 3]).unwrap();
    for terms in [DisplacedTerms::all(), DisplacedTerms::rwa()] {
        let m = build_displaced_model(&p, &f, terms, &s3).unwrap();
        let a = steady_state_direct(&m).unwrap();
        let b = SectorSolver::new(vec![1, 1, -1]).solve(&m).unwrap();
        assert!(a.rho.trace_distance(&b.rho).unwrap() < 1e-10);
        assert!(b.residual < 1e-10);
    }
    let pe = EffectiveKerrParams::new(0.0, 30.0, 0.1, 10.0, 1.6, 1.7, 1).unwrap();
    let s2 = FockSpace::new(&[4, 4]).unwrap();
    let coupled = build_coupled_effective_model(&pe, &pe, &EffectiveCoupling::hopping_only(c(-1.5, 0.0)), &s2).unwrap();
    let a = steady_state_direct(&coupled).unwrap();
    let b = SectorSolver::new(vec![1, 1]).solve(&coupled).unwrap();
    assert!(a.rho.trace_distance(&b.rho).unwrap() < 1e-10);
}

#[test]
fn fixed_point_detunings_satisfy_sideband_conditions() {
    let p = OscillatorParams::reference(1800.0);
    let f = compute_displacements(&p).unwrap();
    let (tc, td) = sideband_conditions(1, &f, p.k);
    assert!((f.delta_c_tilde - tc).abs() < 1e-6 * tc.abs());
    assert!((f.delta_d_tilde - td).abs() < 1e-6 * td.abs());
}
