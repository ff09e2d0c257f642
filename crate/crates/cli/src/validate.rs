//! Property suites with measured defects against fixed tolerances.
//!
//! Every random draw comes from a seeded ChaCha stream, so a suite reports
//! the same numbers on every run.

use std::f64::consts::PI;
use std::fmt;

use kerr_tfd::algebra::{
    damped_oscillator_su11_form, kerr_generator_su2_form, LieRelations, Su11Generators,
    Su2Generators,
};
use kerr_tfd::disentangle::{fundamental_rep_defect, sigma_z_normalized_factors};
use kerr_tfd::fock::{
    coherent_amplitudes, coherent_state_rho, number_state_rho, thermal_state_rho, LadderSet,
};
use kerr_tfd::oracle::{damped_oscillator_relaxation, evolve_damped_kerr_exact, ExactEvolver};
use kerr_tfd::{
    damped_oscillator_liouvillian, damped_su2_generator, gauss_factorize, kerr_generator,
    propagate_closed_form, propagate_closed_form_multimode, BlockStrategy, Complex64, Convention,
    DoubledIndex, FockCutoff, LiouvilleState, OracleOptions, PropagationOptions, Space,
    SparseOperator, Su2Coefficients, SystemConfig, SystemParams, TildeOrdering,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::runspec::{Engine, Entry, Initial, RunSpec, SystemKind, TimeGrid};

/// Label attached to trace and hermiticity defects of the damped Kerr
/// dynamics, whose generator is not tilde-invariant.
pub const NOT_CONSERVED: &str = "measured, not conserved";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Suite {
    Algebra,
    Gauss,
    Propagator,
    Multimode,
    Baseline,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Gauss => "gauss",
            Suite::Propagator => "propagator",
            Suite::Multimode => "multimode",
            Suite::Baseline => "baseline",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    /// `None` for values that are reported but not gated.
    pub tolerance: Option<f64>,
    pub note: Option<String>,
}

impl Check {
    fn gate(suite: &'static str, name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            measured,
            tolerance: Some(tolerance),
            note: None,
        }
    }

    fn info(
        suite: &'static str,
        name: impl Into<String>,
        measured: f64,
        note: impl Into<String>,
    ) -> Self {
        Self {
            suite,
            name: name.into(),
            measured,
            tolerance: None,
            note: Some(note.into()),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// NaN never passes.
    pub fn passed(&self) -> bool {
        match self.tolerance {
            Some(tol) => self.measured <= tol,
            None => true,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.tolerance, self.passed()) {
            (None, _) => "INFO",
            (Some(_), true) => "PASS",
            (Some(_), false) => "FAIL",
        };
        write!(
            f,
            "{status}  [{}] {}  measured {:.3e}",
            self.suite, self.name, self.measured
        )?;
        if let Some(tol) = self.tolerance {
            write!(f, "  tol {tol:.1e}")?;
        }
        if let Some(note) = &self.note {
            write!(f, "  ({note})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed()).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        let gated = self.checks.iter().filter(|c| c.tolerance.is_some()).count();
        out.push_str(&format!(
            "{} checks ({gated} gated), {} failed\n",
            self.checks.len(),
            self.failures()
        ));
        out
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run(suite: Suite) -> Report {
    let checks = match suite {
        Suite::Algebra => algebra_checks(),
        Suite::Gauss => gauss_checks(),
        Suite::Propagator => {
            let mut v = closed_form_vs_oracle_checks();
            v.extend(kerr_physics_checks());
            v.extend(diagnostics_checks());
            v
        }
        Suite::Multimode => multimode_checks(),
        Suite::Baseline => baseline_checks(),
        Suite::All => [
            Suite::Algebra,
            Suite::Gauss,
            Suite::Propagator,
            Suite::Multimode,
            Suite::Baseline,
        ]
        .into_iter()
        .flat_map(|s| run(s).checks)
        .collect(),
    };
    Report { checks }
}

fn cut(n: usize) -> FockCutoff {
    FockCutoff::new(n).expect("positive cutoff")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in the closed disc of radius `r`.
fn disc(rng: &mut ChaCha8Rng, r: f64) -> Complex64 {
    Complex64::from_polar(r * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI))
}

fn unit_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn fmax(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter()
        .fold(0.0, |a, b| if b.is_nan() || b > a { b } else { a })
}

// ---------------------------------------------------------------- algebra

fn cross_mode_defect(a: &[&SparseOperator], b: &[&SparseOperator]) -> f64 {
    fmax(
        a.iter()
            .flat_map(|x| b.iter().map(move |y| x.commutator(y).max_abs())),
    )
}

fn sector_violations(space: &Space, ops: &[&SparseOperator]) -> usize {
    ops.iter()
        .map(|op| {
            op.iter()
                .filter(|&(r, c, _)| space.excitations(r) != space.excitations(c))
                .count()
        })
        .sum()
}

pub fn algebra_checks() -> Vec<Check> {
    const S: &str = "algebra";
    let mut out = Vec::new();
    let space30 = Space::single(cut(30));
    let su2 = Su2Generators::new(&space30, 0).expect("mode 0");
    let su11 = Su11Generators::new(&space30, 0).expect("mode 0");
    for (family, relations) in [("su2", su2.relations()), ("su11", su11.relations())] {
        for r in relations {
            out.push(Check::gate(
                S,
                format!(
                    "{family} {} @ cutoff 30, defect / max(1, max|AB|, max|BA|)",
                    r.name
                ),
                r.scaled_defect(),
                1e-13,
            ));
            out.push(Check::info(
                S,
                format!("{family} {} @ cutoff 30, absolute defect", r.name),
                r.defect(),
                "AB and BA have entries in the hundreds to thousands here, so f64 rounding alone reaches 1e-13",
            ));
        }
    }
    for r in su11.sign_variant_relations() {
        out.push(Check::info(
            S,
            format!("su11 {}", r.name),
            r.defect(),
            "expected to fail for this realization",
        ));
    }

    // two modes at cutoff 10, exhaustive
    let space = Space::new(cut(10), 2).expect("two modes");
    let ladders: Vec<LadderSet> = (0..2).map(|i| LadderSet::new(&space, i).unwrap()).collect();
    let gens: Vec<Su2Generators> = (0..2)
        .map(|i| Su2Generators::new(&space, i).unwrap())
        .collect();
    let ops = |l: &LadderSet, g: &Su2Generators| -> Vec<SparseOperator> {
        vec![
            l.a.clone(),
            l.a_dag.clone(),
            l.a_tilde.clone(),
            l.a_tilde_dag.clone(),
            g.s0.clone(),
            g.s3.clone(),
            g.s_plus.clone(),
            g.s_minus.clone(),
        ]
    };
    let (o0, o1) = (ops(&ladders[0], &gens[0]), ops(&ladders[1], &gens[1]));
    let r0: Vec<&SparseOperator> = o0.iter().collect();
    let r1: Vec<&SparseOperator> = o1.iter().collect();
    out.push(Check::gate(
        S,
        "generators of different modes commute @ cutoff 10",
        cross_mode_defect(&r0, &r1),
        0.0,
    ));
    let l = &ladders[0];
    out.push(Check::gate(
        S,
        "[a, a~] and [a, a~+] vanish @ cutoff 10",
        cross_mode_defect(&[&l.a], &[&l.a_tilde, &l.a_tilde_dag]),
        0.0,
    ));
    let cfg2 = SystemConfig::new(SystemParams {
        omega: vec![1.0, 0.7],
        chi: vec![vec![0.4, 0.2], vec![0.2, 0.3]],
        gamma: vec![0.5, 0.25],
        kappa: 0.0,
        nbar: 0.0,
        cutoff: cut(10),
        convention: Convention::Spin,
    })
    .expect("valid config");
    let hd2 = damped_su2_generator(&cfg2);
    let g0 = &gens[0];
    let violations = sector_violations(&space, &[&g0.s0, &g0.s3, &g0.s_plus, &g0.s_minus, &hd2]);
    out.push(Check::gate(
        S,
        "sector conservation (entries crossing m+n sectors) @ cutoff 10",
        violations as f64,
        0.0,
    ));

    let cfg = SystemConfig::single_mode(1.3, 0.45, 0.35, cut(30)).expect("valid config");
    let kerr = kerr_generator(&cfg);
    out.push(Check::gate(
        S,
        "Kerr generator is tilde-invariant",
        kerr.tilde().max_abs_diff(&kerr),
        1e-13,
    ));
    let kerr_number = cfg.clone().with_convention(Convention::Number);
    out.push(Check::gate(
        S,
        "Kerr ladder form equals generator form (number convention)",
        kerr_generator_su2_form(&kerr_number).max_abs_diff(&kerr),
        1e-13,
    ));
    let hd = damped_su2_generator(&cfg);
    out.push(Check::info(
        S,
        "damped Kerr generator tilde defect",
        hd.tilde().max_abs_diff(&hd),
        NOT_CONSERVED,
    ));

    for nbar in [0.0, 0.5, 2.0] {
        let osc = SystemConfig::oscillator(1.0, 1.0, nbar, cut(40)).expect("valid config");
        let l = damped_oscillator_liouvillian(&osc, TildeOrdering::Normal).unwrap();
        out.push(Check::gate(
            S,
            format!("<I|L = 0 @ cutoff 40, nbar {nbar}"),
            fmax(l.trace_row().iter().map(|z| z.norm())),
            1e-12,
        ));
        let swapped = damped_oscillator_liouvillian(&osc, TildeOrdering::Swapped).unwrap();
        out.push(Check::info(
            S,
            format!("<I|L with swapped tilde ordering, nbar {nbar}"),
            fmax(swapped.trace_row().iter().map(|z| z.norm())),
            "not trace preserving",
        ));
        let form = damped_oscillator_su11_form(&osc, Complex64::new(1.0 / 2.0, 0.0)).unwrap();
        let interior = |c| osc.space().is_interior(c, 1);
        out.push(Check::gate(
            S,
            format!("oscillator generator equals su11 form + kappa/2, nbar {nbar}"),
            l.max_abs_diff_where(&form, interior),
            1e-12,
        ));
    }
    out
}

// ---------------------------------------------------------------- gauss

/// 980 generic triples plus 20 with `|λ²| ≤ 1e−12`, all with `|γ·| ≤ 2`.
pub fn gauss_samples(seed: u64) -> Vec<Su2Coefficients> {
    let mut r = rng(seed);
    let mut out: Vec<Su2Coefficients> = (0..980)
        .map(|_| Su2Coefficients::new(disc(&mut r, 2.0), disc(&mut r, 2.0), disc(&mut r, 2.0)))
        .collect();
    while out.len() < 1000 {
        let g3 = disc(&mut r, 2.0);
        let gp = disc(&mut r, 2.0);
        let eps = disc(&mut r, 1e-12);
        let gm = (eps - g3 * g3 / 4.0) / gp;
        let c = Su2Coefficients::new(gp, g3, gm);
        if gm.norm() <= 2.0 && c.lambda_squared().norm() <= 1e-12 {
            out.push(c);
        }
    }
    out
}

pub fn gauss_checks() -> Vec<Check> {
    const S: &str = "gauss";
    let samples = gauss_samples(0x6a55);
    let mut worst = 0.0f64;
    let mut worst_degenerate = 0.0f64;
    let mut singular = 0usize;
    let mut flipped = 0.0f64;
    let mut sigma = 0.0f64;
    for (i, c) in samples.iter().enumerate() {
        match gauss_factorize(c) {
            Ok(f) => {
                let d = fundamental_rep_defect(c, &f);
                worst = fmax([worst, d]);
                if i >= 980 {
                    worst_degenerate = fmax([worst_degenerate, d]);
                }
                let mut g = f;
                g.lambda = -g.lambda;
                flipped = fmax([flipped, fundamental_rep_defect(c, &g)]);
            }
            Err(_) => singular += 1,
        }
        if let Ok(f) = sigma_z_normalized_factors(c) {
            sigma = fmax([sigma, fundamental_rep_defect(c, &f)]);
        }
    }
    vec![
        Check::gate(S, "group identity, 1000 triples |gamma| <= 2", worst, 1e-12),
        Check::gate(
            S,
            "group identity, 20 triples |lambda^2| <= 1e-12",
            worst_degenerate,
            1e-12,
        ),
        Check::gate(S, "singular samples", singular as f64, 0.0),
        Check::gate(
            S,
            "identity with the sign of lambda flipped",
            flipped,
            1e-12,
        ),
        Check::info(
            S,
            "identity with sigma_z-normalized coefficients",
            sigma,
            "those factors belong to the doubled generator",
        ),
    ]
}

// ---------------------------------------------------------------- propagator

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormCase {
    pub config: SystemConfig,
    pub initial: Initial,
    pub t: f64,
}

impl ClosedFormCase {
    pub fn state(&self) -> LiouvilleState {
        self.run_spec(Engine::ClosedForm)
            .initial_state()
            .expect("valid case")
            .0
    }

    /// A strict single-time run of this case with the given engine.
    pub fn run_spec(&self, engine: Engine) -> RunSpec {
        RunSpec {
            system: if self.config.modes() == 1 {
                SystemKind::KerrSu2Damped
            } else {
                SystemKind::CoupledKerr
            },
            engine,
            strict: true,
            ode_step: 1e-3,
            dense_cap: kerr_tfd::oracle::DEFAULT_DENSE_CAP,
            config: self.config.clone(),
            initial: self.initial.clone(),
            times: TimeGrid {
                start: 0.0,
                end: self.t,
                steps: 1,
            },
            output: None,
        }
    }
}

/// `ρ = BB†/Tr(BB†)` for a random complex `B` on the first `levels` states.
fn random_density(r: &mut ChaCha8Rng, levels: usize) -> Vec<Entry> {
    let b: Vec<Vec<Complex64>> = (0..levels)
        .map(|_| (0..levels).map(|_| unit_complex(r)).collect())
        .collect();
    let mut rho = vec![vec![Complex64::new(0.0, 0.0); levels]; levels];
    for i in 0..levels {
        for j in 0..levels {
            rho[i][j] = (0..levels).map(|k| b[i][k] * b[j][k].conj()).sum();
        }
    }
    let tr: f64 = (0..levels).map(|i| rho[i][i].re).sum();
    let mut out = Vec::with_capacity(levels * levels);
    for (m, row) in rho.iter().enumerate() {
        for (n, v) in row.iter().enumerate() {
            out.push(Entry {
                m: vec![m],
                n: vec![n],
                re: v.re / tr,
                im: v.im / tr,
            });
        }
    }
    out
}

/// Fifty single-mode cases at cutoff 40: `ω, χ ∈ [0,2]`, `γ ∈ [0,1]`,
/// `t ∈ [0,5]`, initial states cycling through number, coherent
/// (`|α| ≤ 2`) and random density matrices.
pub fn closed_form_cases() -> Vec<ClosedFormCase> {
    let mut r = rng(0xc3);
    (0..50)
        .map(|k| {
            let config = SystemConfig::single_mode(
                r.gen_range(0.0..=2.0),
                r.gen_range(0.0..=2.0),
                r.gen_range(0.0..=1.0),
                cut(40),
            )
            .expect("valid config");
            let t = r.gen_range(0.0..=5.0);
            let initial = match k % 3 {
                0 => Initial::Number {
                    k: vec![r.gen_range(0..40)],
                },
                1 => {
                    let a = disc(&mut r, 2.0);
                    Initial::Coherent {
                        alpha: vec![[a.re, a.im]],
                    }
                }
                _ => Initial::Explicit {
                    entries: random_density(&mut r, 40),
                },
            };
            ClosedFormCase { config, initial, t }
        })
        .collect()
}

/// Largest gap between closed form and oracle over `cases`: absolute, and
/// scaled by `max(1, max|ρ_oracle|)`; plus the largest oracle entry.
#[derive(Debug, Clone, Copy)]
pub struct Agreement {
    pub absolute: f64,
    pub scaled: f64,
    pub largest_entry: f64,
    pub over_absolute: usize,
}

pub fn agreement(cases: &[ClosedFormCase]) -> Agreement {
    let mut a = Agreement {
        absolute: 0.0,
        scaled: 0.0,
        largest_entry: 0.0,
        over_absolute: 0,
    };
    for case in cases {
        let state = case.state();
        let closed = propagate_closed_form_multimode(
            &state,
            &case.config,
            case.t,
            &PropagationOptions::strict(),
        )
        .expect("closed form");
        let exact =
            evolve_damped_kerr_exact(&case.config, &state, &[case.t], OracleOptions::default())
                .expect("oracle")
                .pop()
                .expect("one time");
        let gap = closed.max_abs_diff(&exact).expect("same modes");
        let scale = exact.max_abs().max(1.0);
        a.absolute = fmax([a.absolute, gap]);
        a.scaled = fmax([a.scaled, gap / scale]);
        a.largest_entry = fmax([a.largest_entry, exact.max_abs()]);
        if !(gap <= 1e-8) {
            a.over_absolute += 1;
        }
    }
    a
}

fn agreement_checks(suite: &'static str, label: &str, cases: &[ClosedFormCase]) -> Vec<Check> {
    let a = agreement(cases);
    vec![
        Check::gate(
            suite,
            format!("{label}: closed form vs oracle, max|diff| / max(1, max|rho|)"),
            a.scaled,
            1e-8,
        ),
        Check::info(
            suite,
            format!("{label}: closed form vs oracle, max|diff| absolute"),
            a.absolute,
            format!(
                "{} of {} cases above 1e-8; largest entry {:.3e}, so double precision cannot resolve 1e-8 there",
                a.over_absolute,
                cases.len(),
                a.largest_entry
            ),
        ),
    ]
}

pub fn closed_form_vs_oracle_checks() -> Vec<Check> {
    agreement_checks(
        "propagator",
        "50 single-mode cases @ cutoff 40",
        &closed_form_cases(),
    )
}

/// `max_{m,n} ||ρ_{m,n}(t)| − |ρ_{m,n}(0)||` with `γ = 0` over random cases.
pub fn modulus_defect() -> f64 {
    let mut r = rng(0x30d);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let cfg =
            SystemConfig::single_mode(r.gen_range(0.0..=2.0), r.gen_range(0.0..=2.0), 0.0, cut(12))
                .unwrap();
        let entries: Vec<(DoubledIndex, Complex64)> = (0..12)
            .map(|_| {
                (
                    DoubledIndex::single(r.gen_range(0..12), r.gen_range(0..12)),
                    unit_complex(&mut r),
                )
            })
            .collect();
        let x = LiouvilleState::from_entries(cfg.space(), entries).unwrap();
        let y = propagate_closed_form(
            &x,
            &cfg,
            r.gen_range(0.0..=5.0),
            &PropagationOptions::strict(),
        )
        .unwrap();
        let s = y.space();
        for i in 0..s.dim() {
            let before = s
                .reindex(i, &x.space())
                .map_or(0.0, |j| x.amplitude(j).norm());
            worst = fmax([worst, (y.amplitude(i).norm() - before).abs()]);
        }
    }
    worst
}

/// Distance from the initial state after one Kerr revival period `2π/χ`
/// (`ω = 0`, `γ = 0`), for the closed form and for the oracle.
pub fn revival_defects() -> (f64, f64) {
    let chi = 0.7;
    let cfg = SystemConfig::single_mode(0.0, chi, 0.0, cut(12))
        .unwrap()
        .with_convention(Convention::Number);
    let mut r = rng(0x2e7);
    let entries: Vec<(DoubledIndex, Complex64)> = (0..30)
        .map(|_| {
            (
                DoubledIndex::single(r.gen_range(0..12), r.gen_range(0..12)),
                unit_complex(&mut r),
            )
        })
        .collect();
    let x = LiouvilleState::from_entries(cfg.space(), entries).unwrap();
    let t = 2.0 * PI / chi;
    let closed = propagate_closed_form(&x, &cfg, t, &PropagationOptions::strict()).unwrap();
    let exact = evolve_damped_kerr_exact(&cfg, &x, &[t], OracleOptions::default())
        .unwrap()
        .remove(0);
    (
        closed.max_abs_diff(&x).unwrap(),
        exact.max_abs_diff(&x).unwrap(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatCheck {
    /// `1 − ⟨φ|ρ|φ⟩` for the closed-form state `ρ` and the two-component
    /// superposition `φ`.
    pub infidelity: f64,
    /// Superposition weights `(A, B)` of `|α⟩` and `|−α⟩`, fitted to the
    /// diagonal-phase state.
    pub weights: (Complex64, Complex64),
    /// `‖ψ − φ‖` for the diagonal-phase state `ψ`.
    pub fit_residual: f64,
}

/// Coherent `α = 2` under pure Kerr phases to `χt = π/2`.
pub fn yurke_stoler_check() -> CatCheck {
    let (alpha, chi, levels) = (Complex64::new(2.0, 0.0), 1.0, 40);
    let t = PI / (2.0 * chi);
    let cfg = SystemConfig::single_mode(0.0, chi, 0.0, cut(levels))
        .unwrap()
        .with_convention(Convention::Number);
    let plus = coherent_amplitudes(alpha, cut(levels));
    let minus = coherent_amplitudes(-alpha, cut(levels));
    // diagonal-phase oracle: ψ_n = c_n e^{−iχn²t}
    let psi: Vec<Complex64> = plus
        .iter()
        .enumerate()
        .map(|(n, c)| c * Complex64::from_polar(1.0, -chi * (n * n) as f64 * t))
        .collect();
    let dot = |u: &[Complex64], v: &[Complex64]| -> Complex64 {
        u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
    };
    let (g11, g12, g22) = (dot(&plus, &plus), dot(&plus, &minus), dot(&minus, &minus));
    let g21 = g12.conj();
    let (b1, b2) = (dot(&plus, &psi), dot(&minus, &psi));
    let det = g11 * g22 - g12 * g21;
    let wa = (g22 * b1 - g12 * b2) / det;
    let wb = (g11 * b2 - g21 * b1) / det;
    let mut phi: Vec<Complex64> = plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| wa * p + wb * m)
        .collect();
    let fit_residual = psi
        .iter()
        .zip(&phi)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let norm = dot(&phi, &phi).re.sqrt();
    phi.iter_mut().for_each(|z| *z /= norm);

    let rho0 = coherent_state_rho(alpha, cut(levels)).unwrap().state;
    let rho = propagate_closed_form(&rho0, &cfg, t, &PropagationOptions::strict()).unwrap();
    let mut fidelity = Complex64::new(0.0, 0.0);
    for (label, v) in rho.iter() {
        let (m, n) = (label.m[0], label.n[0]);
        if m < levels && n < levels {
            fidelity += phi[m].conj() * v * phi[n];
        }
    }
    CatCheck {
        infidelity: (1.0 - fidelity.re).abs().max(fidelity.im.abs()),
        weights: (wa, wb),
        fit_residual,
    }
}

pub fn kerr_physics_checks() -> Vec<Check> {
    const S: &str = "propagator";
    let (closed, exact) = revival_defects();
    let cat = yurke_stoler_check();
    vec![
        Check::gate(
            S,
            "gamma = 0 preserves every |rho_mn|",
            modulus_defect(),
            1e-12,
        ),
        Check::gate(S, "revival at t = 2 pi / chi, closed form", closed, 1e-10),
        Check::gate(S, "revival at t = 2 pi / chi, oracle", exact, 1e-10),
        Check::gate(
            S,
            "cat state at chi t = pi/2: 1 - fidelity",
            cat.infidelity,
            1e-10,
        )
        .with_note(format!(
            "weights {:.6}, {:.6}",
            cat.weights.0, cat.weights.1
        )),
        Check::info(
            S,
            "cat state: diagonal-phase state minus its two-component fit",
            cat.fit_residual,
            "residual norm",
        ),
    ]
}

/// Trace and hermiticity defects of a damped Kerr run, both recorded and
/// labelled as not conserved.
pub fn diagnostics_checks() -> Vec<Check> {
    const S: &str = "propagator";
    let cfg = SystemConfig::single_mode(1.0, 0.3, 0.2, cut(20)).unwrap();
    let rho = coherent_state_rho(Complex64::new(1.0, 0.5), cut(20))
        .unwrap()
        .state;
    let t = 2.0;
    let out = propagate_closed_form(&rho, &cfg, t, &PropagationOptions::strict()).unwrap();
    vec![
        Check::info(
            S,
            "damped Kerr |trace - 1| at t = 2",
            (out.trace() - 1.0).norm(),
            NOT_CONSERVED,
        ),
        Check::info(
            S,
            "damped Kerr hermiticity defect at t = 2",
            out.hermiticity_defect(),
            NOT_CONSERVED,
        ),
    ]
}

// ---------------------------------------------------------------- multimode

fn two_mode_config(r: &mut ChaCha8Rng, chi12: f64) -> SystemConfig {
    let omega = vec![r.gen_range(0.0..=2.0), r.gen_range(0.0..=2.0)];
    let (chi11, chi22) = (r.gen_range(0.0..=2.0), r.gen_range(0.0..=2.0));
    let gamma = vec![r.gen_range(0.0..=1.0), r.gen_range(0.0..=1.0)];
    SystemConfig::new(SystemParams {
        omega,
        chi: vec![vec![chi11, chi12], vec![chi12, chi22]],
        gamma,
        kappa: 0.0,
        nbar: 0.0,
        cutoff: cut(12),
        convention: Convention::Spin,
    })
    .expect("valid config")
}

fn sparse_entries(r: &mut ChaCha8Rng, modes: usize, count: usize, max_occ: usize) -> Vec<Entry> {
    (0..count)
        .map(|_| {
            let z = unit_complex(r);
            Entry {
                m: (0..modes).map(|_| r.gen_range(0..=max_occ)).collect(),
                n: (0..modes).map(|_| r.gen_range(0..=max_occ)).collect(),
                re: z.re,
                im: z.im,
            }
        })
        .collect()
}

/// Twenty two-mode cases at cutoff 12 with `χ₁₂` cycling through
/// `{0, 0.2, 0.5}`; occupations stay at most 5 so every sector is complete.
pub fn multimode_cases() -> Vec<ClosedFormCase> {
    let mut r = rng(0x4d);
    (0..20)
        .map(|k| {
            let config = two_mode_config(&mut r, [0.0, 0.2, 0.5][k % 3]);
            let t = r.gen_range(0.0..=5.0);
            ClosedFormCase {
                config,
                initial: Initial::Explicit {
                    entries: sparse_entries(&mut r, 2, 8, 5),
                },
                t,
            }
        })
        .collect()
}

/// Joint propagation of a product state versus the product of single-mode
/// propagations, for uncoupled modes. Returns `(absolute, scaled)` gaps.
pub fn factorization_defect() -> (f64, f64) {
    let mut r = rng(0xfac);
    let (mut abs, mut scaled) = (0.0f64, 0.0f64);
    for _ in 0..7 {
        let joint = two_mode_config(&mut r, 0.0);
        let t = r.gen_range(0.0..=5.0);
        let single = |i: usize| {
            SystemConfig::single_mode(joint.omega(i), joint.chi(i, i), joint.gamma(i), cut(12))
                .expect("valid config")
        };
        let part = |r: &mut ChaCha8Rng| {
            let entries: Vec<(DoubledIndex, Complex64)> = (0..4)
                .map(|_| {
                    (
                        DoubledIndex::single(r.gen_range(0..=5), r.gen_range(0..=5)),
                        unit_complex(r),
                    )
                })
                .collect();
            LiouvilleState::from_entries(Space::single(cut(12)), entries).unwrap()
        };
        let (x0, x1) = (part(&mut r), part(&mut r));
        let opts = PropagationOptions::strict();
        let y0 = propagate_closed_form(&x0, &single(0), t, &opts).unwrap();
        let y1 = propagate_closed_form(&x1, &single(1), t, &opts).unwrap();
        let joint_out =
            propagate_closed_form_multimode(&x0.tensor(&x1).unwrap(), &joint, t, &opts).unwrap();
        let product = y0.tensor(&y1).unwrap();
        let gap = joint_out.max_abs_diff(&product).unwrap();
        abs = fmax([abs, gap]);
        scaled = fmax([scaled, gap / product.max_abs().max(1.0)]);
    }
    (abs, scaled)
}

pub fn multimode_checks() -> Vec<Check> {
    const S: &str = "multimode";
    let mut out = agreement_checks(S, "20 two-mode cases @ cutoff 12", &multimode_cases());
    let (abs, scaled) = factorization_defect();
    out.push(Check::gate(
        S,
        "uncoupled modes factorize, scaled gap",
        scaled,
        1e-12,
    ));
    out.push(Check::info(
        S,
        "uncoupled modes factorize, absolute gap",
        abs,
        "reported",
    ));
    // a single basis example that stays at unit scale
    let cfg = SystemConfig::new(SystemParams {
        omega: vec![1.0, 0.6],
        chi: vec![vec![0.3, 0.2], vec![0.2, 0.1]],
        gamma: vec![0.2, 0.3],
        kappa: 0.0,
        nbar: 0.0,
        cutoff: cut(4),
        convention: Convention::Spin,
    })
    .unwrap();
    let x = LiouvilleState::basis(cfg.space(), &DoubledIndex::new(vec![1, 0], vec![0, 1])).unwrap();
    let closed =
        propagate_closed_form_multimode(&x, &cfg, 0.5, &PropagationOptions::strict()).unwrap();
    let exact = evolve_damped_kerr_exact(&cfg, &x, &[0.5], OracleOptions::default())
        .unwrap()
        .remove(0);
    out.push(Check::gate(
        S,
        "basis example |1,0> x |0,1>, chi12 = 0.2, t = 0.5",
        closed.max_abs_diff(&exact).unwrap(),
        1e-10,
    ));
    out
}

// ---------------------------------------------------------------- baseline

pub struct RelaxationSummary {
    pub times: Vec<f64>,
    pub mean_number: Vec<f64>,
    pub non_decreasing_steps: usize,
    pub trace_defect: f64,
    pub hermiticity_defect: f64,
    pub fit_rate: Option<f64>,
    pub fit_residual: Option<f64>,
}

/// `⟨n⟩(t)` from `|5⟩⟨5|` with `n̄ = 0`, `κ = 1` on 100 points up to `t = 5`.
pub fn number_state_relaxation() -> RelaxationSummary {
    let cfg = SystemConfig::oscillator(1.0, 1.0, 0.0, cut(40)).unwrap();
    let rho = number_state_rho(5, cut(40)).unwrap().state;
    let times: Vec<f64> = (0..100).map(|k| 5.0 * k as f64 / 99.0).collect();
    let r = damped_oscillator_relaxation(
        &cfg,
        &rho,
        &times,
        OracleOptions::with_strategy(BlockStrategy::Connected),
    )
    .expect("relaxation");
    RelaxationSummary {
        non_decreasing_steps: r.mean_number.windows(2).filter(|w| !(w[1] < w[0])).count(),
        trace_defect: fmax(r.trace.iter().map(|z| (z - 1.0).norm())),
        hermiticity_defect: fmax(r.hermiticity_defect.iter().copied()),
        fit_rate: r.fit.map(|f| f.rate),
        fit_residual: r.fit.map(|f| f.rms_residual),
        times: r.times,
        mean_number: r.mean_number,
    }
}

pub fn baseline_checks() -> Vec<Check> {
    const S: &str = "baseline";
    let mut out = Vec::new();
    for nbar in [0.0, 0.5, 2.0] {
        let cfg = SystemConfig::oscillator(1.0, 1.0, nbar, cut(40)).unwrap();
        let l = damped_oscillator_liouvillian(&cfg, TildeOrdering::Normal).unwrap();
        out.push(Check::gate(
            S,
            format!("<I|L = 0 @ cutoff 40, nbar {nbar}"),
            fmax(l.trace_row().iter().map(|z| z.norm())),
            1e-12,
        ));
        let th = thermal_state_rho(nbar, cut(40)).unwrap().state;
        out.push(Check::gate(
            S,
            format!("|| L |rho_thermal> ||, nbar {nbar}"),
            l.apply(&th).unwrap().norm(),
            1e-10,
        ));
        let ev = ExactEvolver::new(
            &l,
            &th,
            OracleOptions::with_strategy(BlockStrategy::Connected),
        )
        .unwrap();
        let later = ev.evolve(&th, 3.0).unwrap();
        out.push(Check::gate(
            S,
            format!("thermal state unchanged at t = 3, nbar {nbar}"),
            later.max_abs_diff(&th).unwrap(),
            1e-9,
        ));
    }
    let r = number_state_relaxation();
    out.push(Check::gate(
        S,
        "<n>(t) from |5><5|: non-decreasing steps on 100 points",
        r.non_decreasing_steps as f64,
        0.0,
    ));
    out.push(Check::gate(
        S,
        "<n>(5) from |5><5|",
        *r.mean_number.last().unwrap(),
        0.05,
    ));
    out.push(Check::gate(
        S,
        "trace along relaxation, max |tr - 1|",
        r.trace_defect,
        1e-9,
    ));
    out.push(Check::gate(
        S,
        "hermiticity defect along relaxation",
        r.hermiticity_defect,
        1e-9,
    ));
    out.push(Check::info(
        S,
        "exponential fit rate of <n>(t)",
        r.fit_rate.unwrap_or(f64::NAN),
        "not asserted",
    ));
    out.push(Check::info(
        S,
        "exponential fit rms residual",
        r.fit_residual.unwrap_or(f64::NAN),
        "not asserted",
    ));
    out
}
