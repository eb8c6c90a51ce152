//! Time evolution `e^{-iHt} ψ` by Strang splitting or Lanczos/Krylov.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{constant_vector_kinetic_fn, HamiltonianSpec, KineticForm};
use crate::error::{GqkError, Result};
use crate::field::{hermitian_exp_i, CMatrix, LatticeField};
use crate::grid::{raw_inner, State, ONE, ZERO};
use crate::spectral;

/// Relative norm change beyond which a propagation is rejected.
pub const NORM_DRIFT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Split,
    Krylov,
    /// Split for separable Hamiltonians, Krylov otherwise.
    #[default]
    Auto,
}

fn default_dt() -> f64 {
    0.05
}

fn default_krylov_dim() -> usize {
    24
}

fn default_tol() -> f64 {
    1e-9
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorConfig {
    #[serde(default)]
    pub method: Method,
    /// Split step, and the largest Krylov step.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    /// Krylov error-estimate bound per step.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            dt: default_dt(),
            krylov_dim: default_krylov_dim(),
            tol: default_tol(),
        }
    }
}

impl PropagatorConfig {
    pub fn split(dt: f64) -> Self {
        Self {
            method: Method::Split,
            dt,
            ..Self::default()
        }
    }

    pub fn krylov(dt: f64, tol: f64) -> Self {
        Self {
            method: Method::Krylov,
            dt,
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(GqkError::Config(format!("propagator dt = {} must be positive", self.dt)));
        }
        if self.krylov_dim < 2 {
            return Err(GqkError::Config("krylov_dim must be at least 2".into()));
        }
        if !(self.tol > 0.0) {
            return Err(GqkError::Config("propagator tol must be positive".into()));
        }
        Ok(())
    }

    fn resolved(&self, h: &HamiltonianSpec) -> Result<Method> {
        match self.method {
            Method::Auto if h.is_separable() => Ok(Method::Split),
            Method::Auto => Ok(Method::Krylov),
            Method::Split if !h.is_separable() => Err(GqkError::Precondition(format!(
                "{} Hamiltonian cannot be split into kinetic and potential parts",
                h.tag()
            ))),
            m => Ok(m),
        }
    }
}

/// `e^{-iHt} ψ`.
pub fn evolve(h: &HamiltonianSpec, psi: &State, t: f64, cfg: &PropagatorConfig) -> Result<State> {
    cfg.validate()?;
    h.check_state(psi)?;
    if t == 0.0 || psi.norm_sqr() == 0.0 {
        return Ok(psi.clone());
    }
    match cfg.resolved(h)? {
        Method::Split => {
            let steps = (t.abs() / cfg.dt).ceil().max(1.0) as usize;
            let stepper = SplitStepper::new(h, psi, t / steps as f64);
            let n0 = psi.norm();
            let mut cur = psi.clone();
            for step in 1..=steps {
                cur = stepper.step(&cur);
                check_drift(step, n0, &cur)?;
            }
            Ok(cur)
        }
        Method::Krylov => krylov_evolve(h, psi, t, cfg),
        Method::Auto => unreachable!(),
    }
}

fn check_drift(step: usize, n0: f64, cur: &State) -> Result<()> {
    let drift = (cur.norm() / n0 - 1.0).abs();
    if drift > NORM_DRIFT_TOL || !drift.is_finite() {
        return Err(GqkError::NormDrift { step, drift });
    }
    Ok(())
}

/// Calls `visit(k, t_k, ψ(t_k))` for `t_k = k · dt_out`, `k = 0..=steps`.
pub fn trajectory(
    h: &HamiltonianSpec,
    psi: &State,
    dt_out: f64,
    steps: usize,
    cfg: &PropagatorConfig,
    mut visit: impl FnMut(usize, f64, &State) -> Result<()>,
) -> Result<State> {
    let mut cur = psi.clone();
    visit(0, 0.0, &cur)?;
    for k in 1..=steps {
        cur = evolve(h, &cur, dt_out, cfg)?;
        visit(k, k as f64 * dt_out, &cur)?;
    }
    Ok(cur)
}

enum KineticTable {
    Scalar(Vec<C64>),
    Matrix(Vec<CMatrix>),
}

/// Precomputed factors of one Strang step `e^{-iVτ/2} e^{-iTτ} e^{-iVτ/2}`.
struct SplitStepper {
    half_potential: Option<LatticeField>,
    kinetic: KineticTable,
    n: usize,
    dim: usize,
}

impl SplitStepper {
    fn new(h: &HamiltonianSpec, psi: &State, tau: f64) -> Self {
        let grid = psi.grid();
        let hs = grid.spacing();
        let phases = |f: KineticForm| {
            KineticTable::Scalar(
                (0..grid.points())
                    .map(|p| C64::from_polar(1.0, -f.value(grid.momenta_fft(p), hs) * tau))
                    .collect(),
            )
        };
        let kinetic = match h {
            HamiltonianSpec::Free { mu } | HamiltonianSpec::Scalar { mu, .. } => {
                phases(KineticForm::Quadratic { mu: *mu })
            }
            HamiltonianSpec::KineticFunction { f, .. } => phases(*f),
            HamiltonianSpec::ConstantVector { mu, a_hat, .. } => {
                let k = constant_vector_kinetic_fn(*mu, a_hat);
                KineticTable::Matrix(
                    (0..grid.points())
                        .map(|p| hermitian_exp_i(&k(grid.momenta_fft(p)), -tau))
                        .collect(),
                )
            }
            HamiltonianSpec::MinimalCoupling { .. } => unreachable!("not separable"),
        };
        let half_potential = h
            .potential()
            .filter(|v| v.max_norm() > 0.0)
            .map(|v| v.exp_i(-tau / 2.0));
        Self {
            half_potential,
            kinetic,
            n: grid.n(),
            dim: psi.dim(),
        }
    }

    fn step(&self, psi: &State) -> State {
        let mut cur = match &self.half_potential {
            Some(u) => u.apply_unchecked(psi),
            None => psi.clone(),
        };
        let d = self.dim;
        let amps = match &self.kinetic {
            KineticTable::Scalar(ph) => spectral::momentum_map(cur.amplitudes(), self.n, d, |p, c| {
                for v in c.iter_mut() {
                    *v *= ph[p];
                }
            }),
            KineticTable::Matrix(ms) => {
                let mut scratch = vec![ZERO; d];
                spectral::momentum_map(cur.amplitudes(), self.n, d, |p, c| {
                    let m = &ms[p];
                    for r in 0..d {
                        scratch[r] = (0..d).map(|k| m[(r, k)] * c[k]).sum();
                    }
                    c.copy_from_slice(&scratch);
                })
            }
        };
        cur.amplitudes_mut().copy_from_slice(&amps);
        match &self.half_potential {
            Some(u) => u.apply_unchecked(&cur),
            None => cur,
        }
    }
}

fn krylov_evolve(h: &HamiltonianSpec, psi: &State, t: f64, cfg: &PropagatorConfig) -> Result<State> {
    let n0 = psi.norm();
    let sign = t.signum();
    let mut remaining = t.abs();
    let mut tau = cfg.dt.min(remaining);
    let min_tau = remaining * 1e-10;
    let mut cur = psi.clone();
    let mut step = 0;
    while remaining > 0.0 {
        step += 1;
        let basis = lanczos(h, &cur, cfg.krylov_dim);
        loop {
            let this = tau.min(remaining);
            let (next, estimate) = basis.exp_apply(sign * this, &cur);
            if estimate <= cfg.tol {
                cur = next;
                remaining -= this;
                if remaining < 1e-14 * t.abs() {
                    remaining = 0.0;
                }
                if estimate < cfg.tol * 1e-2 {
                    tau = (tau * 2.0).min(cfg.dt);
                }
                break;
            }
            tau = this / 2.0;
            if tau < min_tau {
                return Err(GqkError::KrylovNonConvergence { step, estimate });
            }
        }
        check_drift(step, n0, &cur)?;
    }
    Ok(cur)
}

struct Lanczos {
    vectors: Vec<State>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// `β_m`, coupling the last basis vector to the discarded direction.
    residual: f64,
}

fn lanczos(h: &HamiltonianSpec, psi: &State, m: usize) -> Lanczos {
    let nrm = psi.norm();
    let mut vectors = vec![psi * (1.0 / nrm)];
    let mut alpha = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let mut residual = 0.0;
    let breakdown = 1e-12;
    for j in 0..m {
        let mut w = h.apply_unchecked(&vectors[j]);
        let a = raw_inner(&vectors[j], &w).re;
        alpha.push(a);
        // full reorthogonalization, applied twice
        for _ in 0..2 {
            for v in &vectors {
                let c = raw_inner(v, &w);
                w.axpy(-c, v);
            }
        }
        let b = w.norm();
        if j + 1 == m {
            residual = b;
            break;
        }
        if b < breakdown * (1.0 + a.abs()) {
            break;
        }
        beta.push(b);
        vectors.push(&w * (1.0 / b));
    }
    Lanczos {
        vectors,
        alpha,
        beta,
        residual,
    }
}

impl Lanczos {
    /// `e^{-iHτ} ψ` from the basis built at `ψ`, with its error estimate.
    fn exp_apply(&self, tau: f64, psi: &State) -> (State, f64) {
        let m = self.alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = self.alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let coeffs: Vec<C64> = (0..m)
            .map(|r| {
                (0..m)
                    .map(|k| {
                        let v = eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)];
                        C64::from_polar(v, -eig.eigenvalues[k] * tau)
                    })
                    .sum()
            })
            .collect();
        let nrm = psi.norm();
        let mut out = psi * ZERO;
        for (v, c) in self.vectors.iter().zip(&coeffs) {
            out.axpy(c * nrm, v);
        }
        let estimate = self.residual * coeffs[m - 1].norm();
        (out, estimate)
    }
}

/// Evolves with both the explicit split and Krylov engines and returns the
/// relative difference; a consistency probe for separable Hamiltonians.
pub fn engine_gap(h: &HamiltonianSpec, psi: &State, t: f64, dt: f64) -> Result<f64> {
    let a = evolve(h, psi, t, &PropagatorConfig::split(dt))?;
    let b = evolve(h, psi, t, &PropagatorConfig::krylov(dt.max(0.1), 1e-11))?;
    let mut d = a;
    d.axpy(-ONE, &b);
    Ok(d.norm() / psi.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use crate::grid::{gaussian_packet, GridSpec, SpinSpec};
    use crate::Profile;

    fn packet(g: GridSpec) -> State {
        gaussian_packet(g, SpinSpec::new(0), [0.3, 0.0, -0.2], [0.5, 0.0, 0.25], 1.0, &[ONE]).unwrap()
    }

    #[test]
    fn free_evolution_is_exact_in_both_engines() {
        let g = GridSpec::new(32, 16.0).unwrap();
        let psi = packet(g);
        let h = HamiltonianSpec::free(1.0).unwrap();
        let t = 0.7;
        // exact: phases in momentum space
        let exact = State::from_amplitudes(
            g,
            psi.spin(),
            psi.representation(),
            spectral::momentum_map(psi.amplitudes(), g.n(), 1, |p, c| {
                let k = g.momenta_fft(p);
                c[0] *= C64::from_polar(1.0, -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) / 2.0 * t);
            }),
        )
        .unwrap();
        for cfg in [PropagatorConfig::split(0.1), PropagatorConfig::krylov(0.1, 1e-11)] {
            let out = evolve(&h, &psi, t, &cfg).unwrap();
            assert!((&out - &exact).norm() < 1e-8, "{:?}: {}", cfg.method, (&out - &exact).norm());
        }
    }

    #[test]
    fn forward_then_backward_is_identity() {
        let g = GridSpec::new(32, 16.0).unwrap();
        let s = SpinSpec::new(0);
        let phi = FieldSpec::term(Profile::Poly { powers: [2, 0, 0] }, 0.1).sample(g, s).unwrap();
        let h = HamiltonianSpec::scalar(1.0, phi).unwrap();
        let psi = packet(g);
        for cfg in [PropagatorConfig::split(0.05), PropagatorConfig::krylov(0.1, 1e-11)] {
            let there = evolve(&h, &psi, 0.5, &cfg).unwrap();
            let back = evolve(&h, &there, -0.5, &cfg).unwrap();
            assert!((&back - &psi).norm() < 1e-8);
        }
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg: PropagatorConfig = toml::from_str("dt = 0.02").unwrap();
        assert_eq!(cfg.method, Method::Auto);
        assert_eq!(cfg.krylov_dim, 24);
        assert!(PropagatorConfig::split(0.0).validate().is_err());
        assert!(toml::from_str::<PropagatorConfig>("bogus = 1").is_err());
    }
}
