//! Randomized invariants of the doubled space, the generators, the Gauss
//! factors, the closed-form propagator and the exact evolver.

use kerr_tfd::algebra::{build_su2, damped_su2_generator, damped_su2_generator_on};
use kerr_tfd::disentangle::{fundamental_rep_defect, gauss_factorize, sector_coefficients};
use kerr_tfd::fock::{identity_vector, ladder_operators, LadderSet};
use kerr_tfd::oracle::{evolve_damped_kerr_exact, BlockStrategy, ExactEvolver};
use kerr_tfd::{
    evolve_exact, evolve_ode, propagate_closed_form, Complex64, DoubledIndex, FockCutoff,
    LiouvilleState, OracleOptions, PropagationOptions, SparseOperator, Su2Coefficients,
    SystemConfig,
};
use proptest::prelude::*;

fn cut(n: usize) -> FockCutoff {
    FockCutoff::new(n).unwrap()
}

fn complex(bound: f64) -> impl Strategy<Value = Complex64> {
    (-bound..bound, -bound..bound).prop_map(|(re, im)| Complex64::new(re, im))
}

fn monomial(l: &LadderSet, word: &[bool]) -> SparseOperator {
    word.iter()
        .fold(SparseOperator::identity(l.a.space()), |acc, &up| {
            let f = if up { &l.a_dag } else { &l.a };
            &acc * f
        })
}

fn single_mode_state(cutoff: usize, entries: &[(usize, usize, Complex64)]) -> LiouvilleState {
    let space = kerr_tfd::Space::single(cut(cutoff));
    LiouvilleState::from_entries(
        space,
        entries
            .iter()
            .map(|&(m, n, v)| (DoubledIndex::single(m % cutoff, n % cutoff), v)),
    )
    .unwrap()
}

fn entries() -> impl Strategy<Value = Vec<(usize, usize, Complex64)>> {
    prop::collection::vec((0usize..7, 0usize..7, complex(1.0)), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identity_vector_reproduces_tilde_adjoint(cutoff in 2usize..=10, word in prop::collection::vec(any::<bool>(), 0..4)) {
        let space = kerr_tfd::Space::single(cut(cutoff));
        let l = &ladder_operators(&space)[0];
        let a = monomial(l, &word);
        let id = identity_vector(cut(cutoff), 1).unwrap();
        let lhs = a.apply(&id).unwrap();
        let rhs = a.tilde().adjoint().apply(&id).unwrap();
        let margin = word.len();
        for i in 0..space.dim() {
            if space.is_interior(i, margin) {
                prop_assert!((lhs.amplitude(i) - rhs.amplitude(i)).norm() <= 1e-13);
            }
        }
    }

    #[test]
    fn tilde_is_an_involution_and_multiplicative(cutoff in 2usize..=6, w1 in prop::collection::vec(any::<bool>(), 0..3), w2 in prop::collection::vec(any::<bool>(), 0..3), z in complex(2.0)) {
        let space = kerr_tfd::Space::single(cut(cutoff));
        let l = &ladder_operators(&space)[0];
        let x = monomial(l, &w1).scale(z);
        let y = monomial(l, &w2);
        prop_assert!(x.tilde().tilde().max_abs_diff(&x) == 0.0);
        prop_assert!((&x * &y).tilde().max_abs_diff(&(&x.tilde() * &y.tilde())) <= 1e-13);
    }

    #[test]
    fn gauss_identity_holds(gp in complex(2.0), g3 in complex(2.0), gm in complex(2.0)) {
        let co = Su2Coefficients::new(gp, g3, gm);
        if let Ok(f) = gauss_factorize(&co) {
            prop_assert!(fundamental_rep_defect(&co, &f) <= 1e-12);
        }
    }

    #[test]
    fn closed_form_is_linear(e1 in entries(), e2 in entries(), z in complex(1.5), t in 0.0f64..3.0) {
        let cfg = SystemConfig::single_mode(0.7, 0.4, 0.3, cut(7)).unwrap();
        // a common sector-closed space, so every output shares it
        let (a, b) = (single_mode_state(7, &e1).embed(cut(13)).unwrap(), single_mode_state(7, &e2).embed(cut(13)).unwrap());
        let opts = PropagationOptions::strict();
        let sum = propagate_closed_form(&a.add_scaled(z, &b).unwrap(), &cfg, t, &opts).unwrap();
        let pa = propagate_closed_form(&a, &cfg, t, &opts).unwrap();
        let pb = propagate_closed_form(&b, &cfg, t, &opts).unwrap();
        let parts = pa.add_scaled(z, &pb).unwrap();
        prop_assert!(sum.max_abs_diff(&parts).unwrap() <= 1e-12 * parts.max_abs().max(1.0));
    }

    #[test]
    fn closed_form_semigroup(m in 0usize..=12, k in 0usize..=12, t1 in 0.0f64..1.5, t2 in 0.0f64..1.5, omega in 0.0f64..2.0, chi in 0.0f64..2.0, gamma in 0.0f64..1.0) {
        let n = k.min(m);
        let cfg = SystemConfig::single_mode(omega, chi, gamma, cut(13)).unwrap();
        let x = single_mode_state(13, &[(m - n, n, Complex64::new(1.0, 0.0))]);
        let opts = PropagationOptions::strict();
        let once = propagate_closed_form(&x, &cfg, t1 + t2, &opts).unwrap();
        let mid = propagate_closed_form(&x, &cfg, t1, &opts).unwrap();
        let twice = propagate_closed_form(&mid, &cfg, t2, &opts).unwrap();
        prop_assert!(once.max_abs_diff(&twice).unwrap() <= 1e-9 * once.max_abs().max(1.0));
    }

    #[test]
    fn zero_damping_preserves_moduli(e in entries(), omega in 0.0f64..2.0, chi in 0.0f64..2.0, t in 0.0f64..5.0) {
        let cfg = SystemConfig::single_mode(omega, chi, 0.0, cut(7)).unwrap();
        let x = single_mode_state(7, &e);
        let out = propagate_closed_form(&x, &cfg, t, &PropagationOptions::strict()).unwrap();
        for (label, v) in x.iter() {
            prop_assert!((out.get(&label).norm() - v.norm()).abs() <= 1e-12);
        }
        prop_assert_eq!(out.len(), x.len());
    }

    #[test]
    fn exact_evolution_composes(e in entries(), t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
        let cfg = SystemConfig::single_mode(1.1, 0.3, 0.4, cut(7)).unwrap();
        let x = single_mode_state(7, &e);
        let g = damped_su2_generator_on(&cfg, x.closure_cutoff()).unwrap();
        let x = x.embed(x.closure_cutoff()).unwrap();
        let ev = ExactEvolver::new(&g, &x, OracleOptions::default()).unwrap();
        let a = ev.evolve(&ev.evolve(&x, t1).unwrap(), t2).unwrap();
        let b = ev.evolve(&x, t1 + t2).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() <= 1e-10 * b.max_abs().max(1.0));
    }
}

#[test]
fn gauss_factors_are_continuous_in_time() {
    let cfg = SystemConfig::single_mode(1.3, 0.6, 0.8, cut(12)).unwrap();
    for sector in [1usize, 5, 11] {
        let at = |t: f64| gauss_factorize(&sector_coefficients(&cfg, 0, &[sector], t)).unwrap();
        let h = 1e-3;
        let mut prev = at(0.0);
        let mut prev_step = None::<f64>;
        for k in 1..=3000 {
            let f = at(k as f64 * h);
            let step = [
                f.gamma_plus - prev.gamma_plus,
                f.gamma_minus - prev.gamma_minus,
                f.gamma_3_half_exp - prev.gamma_3_half_exp,
            ]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
            if let Some(p) = prev_step {
                assert!(
                    step <= 10.0 * p + 1e-12,
                    "sector {sector}, step {k}: {step} after {p}"
                );
            }
            prev_step = Some(step);
            prev = f;
        }
    }
}

#[test]
fn generators_conserve_sectors_exhaustively() {
    let cfg = SystemConfig::single_mode(1.0, 0.5, 0.3, cut(10)).unwrap();
    let s = cfg.space();
    let su2 = build_su2(&cfg, 0).unwrap();
    for op in [
        &su2.s0,
        &su2.s3,
        &su2.s_plus,
        &su2.s_minus,
        &damped_su2_generator(&cfg),
    ] {
        for (row, col, _) in op.iter() {
            assert_eq!(s.excitations(row), s.excitations(col));
        }
    }
}

#[test]
fn propagator_sector_conservation_exhaustive() {
    let cfg = SystemConfig::single_mode(0.9, 0.4, 0.5, cut(8)).unwrap();
    let s = cfg.space();
    for i in 0..s.dim() {
        let x = LiouvilleState::from_entries(s, [(s.decode(i), Complex64::new(1.0, 0.0))]).unwrap();
        let out = propagate_closed_form(&x, &cfg, 0.8, &PropagationOptions::strict()).unwrap();
        let want = s.excitations(i);
        for (label, _) in out.iter() {
            assert_eq!(label.excitations(), want);
        }
    }
}

#[test]
fn sector_blocks_agree_with_dense_exponential() {
    let cfg = SystemConfig::single_mode(0.8, 0.35, 0.45, cut(12)).unwrap();
    let g = damped_su2_generator(&cfg);
    let s = cfg.space();
    // a state touching every sector that is complete at this cutoff
    let x = LiouvilleState::from_entries(
        s,
        (0..12).flat_map(|m| {
            [(
                DoubledIndex::single(m, 0),
                Complex64::new(1.0, 0.1 * m as f64),
            )]
        }),
    )
    .unwrap();
    let sectors = evolve_exact(&x, &g, 1.4, OracleOptions::default())
        .unwrap()
        .state;
    let dense = evolve_exact(
        &x,
        &g,
        1.4,
        OracleOptions::with_strategy(BlockStrategy::Dense),
    )
    .unwrap()
    .state;
    assert!(sectors.max_abs_diff(&dense).unwrap() <= 1e-11 * dense.max_abs().max(1.0));
}

#[test]
fn integrator_agrees_with_exponential() {
    let cfg = SystemConfig::single_mode(0.6, 0.2, 0.3, cut(4)).unwrap();
    let x = LiouvilleState::from_entries(
        cfg.space(),
        [
            (DoubledIndex::single(3, 0), Complex64::new(0.4, 0.2)),
            (DoubledIndex::single(1, 2), Complex64::new(-0.3, 0.5)),
            (DoubledIndex::single(2, 1), Complex64::new(0.7, 0.0)),
        ],
    )
    .unwrap();
    let exact = &evolve_damped_kerr_exact(&cfg, &x, &[1.0], OracleOptions::default()).unwrap()[0];
    let g = damped_su2_generator(&cfg);
    let ode = evolve_ode(&x, &g, 1.0, 1e-3).unwrap();
    assert!(ode.state.max_abs_diff(exact).unwrap() <= 1e-8);
    assert_eq!(ode.diagnostics.len(), 1001);
}
