//! Engine results against the dense 1D matrix oracle.

mod common;

use common::{max_abs, Oracle, V};
use gqk_core::dynamics::{harmonic_witness, HamiltonianSpec};
use gqk_core::galilei::{multiplier_extract, GalileiRep, GroupElement};
use gqk_core::grid::ONE;
use gqk_core::propagate::{evolve, PropagatorConfig};
use gqk_core::{
    commutator_apply, gaussian_packet, momentum_op, position_op, standard_states, FieldSpec,
    FieldTerm, GridSpec, Profile, SpinSpec, State,
};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 32;
const L: f64 = 16.0;

fn grid() -> GridSpec {
    GridSpec::new(N, L).unwrap()
}

fn index(x: f64) -> usize {
    let h = L / N as f64;
    ((x + 0.5 * L) / h).round() as usize % N
}

/// `f(x1) g(x2) g(x3)` as an engine state.
fn product(f: &V, g: &V) -> State {
    State::from_fn(grid(), SpinSpec::new(0), |x, _| {
        f[index(x[0])] * g[index(x[1])] * g[index(x[2])]
    })
}

fn diff(a: &State, b: &State) -> f64 {
    (a - b).norm()
}

#[test]
fn oracle_is_self_consistent() {
    let o = Oracle::new(N, L);
    let id = &o.f.adjoint() * &o.f - common::M::identity(N, N);
    assert!(max_abs(&id) < 1e-13);
    // lattice translation by one step is a cyclic shift
    let t = o.translation(L / N as f64);
    for j in 0..N {
        assert!((t[((j + 1) % N, j)] - ONE).norm() < 1e-12);
    }
}

#[test]
fn boost_translation_multiplier_matches_oracle() {
    let o = Oracle::new(N, L);
    let mu = 1.5;
    let rep = GalileiRep::new(grid(), SpinSpec::new(0), mu).unwrap();
    let refs = standard_states(grid(), SpinSpec::new(0), 11, 2);
    let psi1 = o.packet(0.5, 0.3, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = L / N as f64;
    for _ in 0..50 {
        let u = rep.quantized_boost([rng.random_range(-3..=3), 0, 0])[0];
        let a = rng.random_range(-16i64..=16) as f64 * h;
        let oracle = o.boost_translation_multiplier(mu, u, a, &psi1);
        let exact = C64::from_polar(1.0, -mu * u * a);
        assert!((oracle - exact).norm() < 1e-10, "oracle {oracle} vs {exact}");
        let m = multiplier_extract(
            &rep,
            &GroupElement::boost([u, 0.0, 0.0]),
            &GroupElement::translation([a, 0.0, 0.0]),
            &refs[0],
            &refs[1],
        )
        .unwrap();
        assert!((m.value() - oracle).norm() < 1e-10, "engine {} vs oracle {oracle}", m.value());
    }
}

#[test]
fn spectral_translation_matches_oracle() {
    let o = Oracle::new(N, L);
    let rep = GalileiRep::new(grid(), SpinSpec::new(0), 1.0).unwrap();
    let f = o.packet(-0.5, 0.7, 0.9);
    let g = o.packet(0.0, 0.0, 1.0);
    let psi = product(&f, &g);
    for a in [0.3, -1.27, 2.0] {
        let expected = product(&(o.translation(a) * &f), &g);
        let got = rep.translate([a, 0.0, 0.0], &psi);
        assert!(diff(&got, &expected) < 1e-10);
    }
}

#[test]
fn momentum_and_canonical_commutator_match_oracle() {
    let o = Oracle::new(N, L);
    let f = o.packet(0.25, -0.4, 0.8);
    let g = o.packet(0.0, 0.2, 1.0);
    let psi = product(&f, &g);
    let p = momentum_op(grid(), SpinSpec::new(0), 0);
    let q = position_op(grid(), SpinSpec::new(0), 0);
    let expected = product(&(o.p() * &f), &g);
    assert!(diff(&p.apply(&psi).unwrap(), &expected) < 1e-10);
    let comm = &o.q() * o.p() - o.p() * o.q();
    let expected = product(&(comm * &f), &g);
    assert!(diff(&commutator_apply(&q, &p, &psi).unwrap(), &expected) < 1e-10);
}

#[test]
fn free_evolution_matches_oracle() {
    let o = Oracle::new(N, L);
    let mu = 1.0;
    let (f, g) = (o.packet(-1.0, 0.5, 1.0), o.packet(0.0, 0.0, 1.0));
    let psi = product(&f, &g);
    let h = HamiltonianSpec::free(mu).unwrap();
    let u1 = o.evolution(&o.hamiltonian(mu, |_| 0.0), 1.5);
    let expected = product(&(&u1 * &f), &(&u1 * &g));
    for cfg in [PropagatorConfig::split(0.1), PropagatorConfig::krylov(0.1, 1e-12)] {
        let got = evolve(&h, &psi, 1.5, &cfg).unwrap();
        assert!(diff(&got, &expected) < 1e-9, "{:?}", cfg.method);
    }
}

#[test]
fn harmonic_witness_matches_oracle_and_closed_form() {
    let o = Oracle::new(N, L);
    let (mu, omega) = (1.0, 1.0);
    let half = 0.5 * mu * omega * omega;
    let f = o.packet(0.5, 0.0, 1.0);
    let g = o.packet(0.0, 0.0, 1.0);
    let psi = product(&f, &g);
    let phi = FieldSpec {
        terms: (0..3)
            .map(|a| {
                let mut powers = [0; 3];
                powers[a] = 2;
                FieldTerm::new(Profile::Poly { powers }, half)
            })
            .collect(),
    };
    let h = HamiltonianSpec::scalar(mu, phi.sample(grid(), SpinSpec::new(0)).unwrap()).unwrap();
    let h1 = o.hamiltonian(mu, |x| half * x * x);
    let cfg = PropagatorConfig::krylov(0.1, 1e-11);
    let q = o.q();
    for t in [0.3, 0.9, std::f64::consts::FRAC_PI_2] {
        let u = o.evolution(&h1, t);
        let qt = u.adjoint() * &q * &u;
        let comm = (&q * &qt - &qt * &q) * C64::new(mu, 0.0);
        let oracle = o.expect(&comm, &f);
        let engine = harmonic_witness(&h, 0, t, &psi, &cfg).unwrap();
        assert!((engine - oracle).norm() < 1e-8, "t = {t}: {engine} vs {oracle}");
        let closed = C64::new(0.0, (omega * t).sin() / omega);
        assert!((engine - closed).norm() < 1e-5, "t = {t}: {engine} vs {closed}");
    }
}

#[test]
fn packet_constructor_matches_oracle_profile() {
    let o = Oracle::new(N, L);
    let f = o.packet(0.5, -0.25, 1.2);
    let g = o.packet(0.0, 0.0, 1.2);
    let engine = gaussian_packet(grid(), SpinSpec::new(0), [0.5, 0.0, 0.0], [-0.25, 0.0, 0.0], 1.2, &[ONE]).unwrap();
    // equal up to a global phase
    let expected = product(&f, &g);
    let overlap = gqk_core::inner_product(&expected, &engine).unwrap();
    assert!((overlap.norm() - 1.0).abs() < 1e-12);
}
