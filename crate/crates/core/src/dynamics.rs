//! Hamiltonian families, the Heisenberg position `Q^(t)`, and residual
//! checks of the dynamical identities built on them.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{GqkError, Result};
use crate::field::{CMatrix, FieldSpec, LatticeField, Profile};
use crate::grid::{raw_inner, GridSpec, SpinSpec, State, I, ONE, ZERO};
use crate::operators::{apply_momentum, apply_spin_matrix, multiply_coordinate};
use crate::propagate::{evolve, PropagatorConfig};
use crate::spectral;

/// A scalar kinetic energy `F(p)`, evaluated on the momentum lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KineticForm {
    /// `|p|² / (2μ)`.
    Quadratic { mu: f64 },
    /// `Σ p_α² / (2 m_α)`.
    Anisotropic { masses: [f64; 3] },
    /// `Σ (1 - cos(p_α h)) / (μ h²)` with `h` the lattice spacing.
    CosineBand { mu: f64 },
    Constant { value: f64 },
}

impl KineticForm {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            KineticForm::Quadratic { mu } | KineticForm::CosineBand { mu } => *mu > 0.0,
            KineticForm::Anisotropic { masses } => masses.iter().all(|m| *m > 0.0),
            KineticForm::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(GqkError::Precondition(format!("invalid kinetic form {self:?}")))
        }
    }

    pub fn value(&self, p: [f64; 3], h: f64) -> f64 {
        match *self {
            KineticForm::Quadratic { mu } => (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (2.0 * mu),
            KineticForm::Anisotropic { masses } => {
                (0..3).map(|a| p[a] * p[a] / (2.0 * masses[a])).sum()
            }
            KineticForm::CosineBand { mu } => {
                (0..3).map(|a| (1.0 - (p[a] * h).cos()) / (mu * h * h)).sum()
            }
            KineticForm::Constant { value } => value,
        }
    }

    /// `∂F/∂p_α`.
    pub fn gradient(&self, p: [f64; 3], h: f64, axis: usize) -> f64 {
        match *self {
            KineticForm::Quadratic { mu } => p[axis] / mu,
            KineticForm::Anisotropic { masses } => p[axis] / masses[axis],
            KineticForm::CosineBand { mu } => (p[axis] * h).sin() / (mu * h),
            KineticForm::Constant { .. } => 0.0,
        }
    }

    /// The mass when `F` is the isotropic free kinetic energy.
    pub fn quadratic_mass(&self) -> Option<f64> {
        match *self {
            KineticForm::Quadratic { mu } => Some(mu),
            _ => None,
        }
    }
}

/// A time-independent Hamiltonian with its fields sampled on the lattice.
#[derive(Clone, Debug)]
pub enum HamiltonianSpec {
    /// `P² / 2μ`.
    Free { mu: f64 },
    /// `P² / 2μ + Φ(Q)`.
    Scalar { mu: f64, phi: LatticeField },
    /// `Σ (P_γ + a_γ(Q))² / 2μ + Φ(Q)`.
    MinimalCoupling {
        mu: f64,
        a: Box<[LatticeField; 3]>,
        phi: LatticeField,
    },
    /// `F(P) + Ψ(Q)`.
    KineticFunction { f: KineticForm, psi: LatticeField },
    /// `Σ (P_γ + â_γ)² / 2μ + Φ(Q)` with constant spin matrices `â`.
    ConstantVector {
        mu: f64,
        a_hat: Box<[CMatrix; 3]>,
        phi: LatticeField,
    },
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(GqkError::Precondition(format!("mass μ = {mu} must be positive")));
    }
    Ok(())
}

impl HamiltonianSpec {
    pub fn free(mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Ok(HamiltonianSpec::Free { mu })
    }

    pub fn scalar(mu: f64, phi: LatticeField) -> Result<Self> {
        check_mu(mu)?;
        phi.ensure_hermitian("Φ")?;
        Ok(HamiltonianSpec::Scalar { mu, phi })
    }

    pub fn minimal_coupling(mu: f64, a: [LatticeField; 3], phi: LatticeField) -> Result<Self> {
        check_mu(mu)?;
        for (k, f) in a.iter().enumerate() {
            f.ensure_hermitian(&format!("a{}", k + 1))?;
            if f.grid() != phi.grid() || f.dim() != phi.dim() {
                return Err(GqkError::SpecMismatch("a and Φ live on different spaces".into()));
            }
        }
        phi.ensure_hermitian("Φ")?;
        Ok(HamiltonianSpec::MinimalCoupling {
            mu,
            a: Box::new(a),
            phi,
        })
    }

    pub fn kinetic_function(f: KineticForm, psi: LatticeField) -> Result<Self> {
        f.validate()?;
        psi.ensure_hermitian("Ψ")?;
        Ok(HamiltonianSpec::KineticFunction { f, psi })
    }

    pub fn constant_vector(mu: f64, a_hat: [CMatrix; 3], phi: LatticeField) -> Result<Self> {
        check_mu(mu)?;
        for (k, m) in a_hat.iter().enumerate() {
            if m.nrows() != phi.dim() || m.ncols() != phi.dim() {
                return Err(GqkError::SpecMismatch(format!("â{} has the wrong dimension", k + 1)));
            }
            if (m - m.adjoint()).norm() > 1e-12 {
                return Err(GqkError::NonHermitian(format!("â{}", k + 1)));
            }
        }
        phi.ensure_hermitian("Φ")?;
        Ok(HamiltonianSpec::ConstantVector {
            mu,
            a_hat: Box::new(a_hat),
            phi,
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            HamiltonianSpec::Free { .. } => "free",
            HamiltonianSpec::Scalar { .. } => "scalar",
            HamiltonianSpec::MinimalCoupling { .. } => "minimal_coupling",
            HamiltonianSpec::KineticFunction { .. } => "kinetic_function",
            HamiltonianSpec::ConstantVector { .. } => "constant_vector",
        }
    }

    /// The mass `μ`, when the kinetic term is `P²/2μ`-like.
    pub fn mu(&self) -> Option<f64> {
        match self {
            HamiltonianSpec::Free { mu }
            | HamiltonianSpec::Scalar { mu, .. }
            | HamiltonianSpec::MinimalCoupling { mu, .. }
            | HamiltonianSpec::ConstantVector { mu, .. } => Some(*mu),
            HamiltonianSpec::KineticFunction { f, .. } => f.quadratic_mass(),
        }
    }

    /// Whether the kinetic and potential parts can be split exactly.
    pub fn is_separable(&self) -> bool {
        !matches!(self, HamiltonianSpec::MinimalCoupling { .. })
    }

    /// The position-space potential part (`Φ` or `Ψ`), if any.
    pub fn potential(&self) -> Option<&LatticeField> {
        match self {
            HamiltonianSpec::Free { .. } => None,
            HamiltonianSpec::Scalar { phi, .. }
            | HamiltonianSpec::MinimalCoupling { phi, .. }
            | HamiltonianSpec::ConstantVector { phi, .. } => Some(phi),
            HamiltonianSpec::KineticFunction { psi, .. } => Some(psi),
        }
    }

    pub(crate) fn check_state(&self, psi: &State) -> Result<()> {
        psi.ensure_position()?;
        if let Some(f) = self.potential() {
            if f.grid() != psi.grid() || f.dim() != psi.dim() {
                return Err(GqkError::SpecMismatch(
                    "Hamiltonian fields and state live on different spaces".into(),
                ));
            }
        }
        if let HamiltonianSpec::ConstantVector { a_hat, .. } = self {
            if a_hat[0].nrows() != psi.dim() {
                return Err(GqkError::SpecMismatch("â and state spin dimension differ".into()));
            }
        }
        Ok(())
    }

    /// Applies the kinetic part only.
    pub(crate) fn kinetic(&self, psi: &State) -> State {
        let grid = psi.grid();
        let d = psi.dim();
        let h = grid.spacing();
        let amps = match self {
            HamiltonianSpec::Free { mu } | HamiltonianSpec::Scalar { mu, .. } => {
                let f = KineticForm::Quadratic { mu: *mu };
                scalar_momentum_map(psi, |k| f.value(k, h))
            }
            HamiltonianSpec::KineticFunction { f, .. } => scalar_momentum_map(psi, |k| f.value(k, h)),
            HamiltonianSpec::ConstantVector { mu, a_hat, .. } => {
                let blocks = constant_vector_kinetic_fn(*mu, a_hat);
                let mut scratch = vec![ZERO; d];
                spectral::momentum_map(psi.amplitudes(), grid.n(), d, |p, chunk| {
                    let m = blocks(grid.momenta_fft(p));
                    for r in 0..d {
                        scratch[r] = (0..d).map(|c| m[(r, c)] * chunk[c]).sum();
                    }
                    chunk.copy_from_slice(&scratch);
                })
            }
            HamiltonianSpec::MinimalCoupling { mu, a, .. } => {
                let f = KineticForm::Quadratic { mu: *mu };
                let mut out = State::from_amplitudes(
                    grid,
                    psi.spin(),
                    psi.representation(),
                    scalar_momentum_map(psi, |k| f.value(k, h)),
                )
                .expect("shape preserved");
                let c = C64::new(0.5 / mu, 0.0);
                for (axis, field) in a.iter().enumerate() {
                    let a_psi = field.apply_unchecked(psi);
                    let p_psi = apply_momentum(psi, axis);
                    out.axpy(c, &apply_momentum(&a_psi, axis));
                    out.axpy(c, &field.apply_unchecked(&p_psi));
                    out.axpy(c, &field.apply_unchecked(&a_psi));
                }
                return out;
            }
        };
        State::from_amplitudes(grid, psi.spin(), psi.representation(), amps).expect("shape preserved")
    }

    pub(crate) fn apply_unchecked(&self, psi: &State) -> State {
        let mut out = self.kinetic(psi);
        if let Some(v) = self.potential() {
            out.axpy(ONE, &v.apply_unchecked(psi));
        }
        out
    }

    /// The coupling field `a_β` entering the velocity `μ Q̇_β = P_β + a_β`.
    fn velocity_shift(&self, beta: usize, psi: &State) -> Result<State> {
        Ok(match self {
            HamiltonianSpec::Free { .. } | HamiltonianSpec::Scalar { .. } => psi * ZERO,
            HamiltonianSpec::MinimalCoupling { a, .. } => a[beta].apply_unchecked(psi),
            HamiltonianSpec::ConstantVector { a_hat, .. } => apply_spin_matrix(psi, &a_hat[beta]),
            HamiltonianSpec::KineticFunction { .. } => {
                return Err(GqkError::Precondition(
                    "velocity identity needs a P²/2μ kinetic term".into(),
                ))
            }
        })
    }
}

fn scalar_momentum_map(psi: &State, f: impl Fn([f64; 3]) -> f64) -> Vec<C64> {
    let grid = psi.grid();
    spectral::momentum_map(psi.amplitudes(), grid.n(), psi.dim(), |p, chunk| {
        let v = f(grid.momenta_fft(p));
        for c in chunk.iter_mut() {
            *c *= v;
        }
    })
}

/// `k ↦ Σ (k_γ + â_γ)² / 2μ` as a `d × d` matrix.
pub(crate) fn constant_vector_kinetic_fn(
    mu: f64,
    a_hat: &[CMatrix; 3],
) -> impl Fn([f64; 3]) -> CMatrix + '_ {
    let d = a_hat[0].nrows();
    let sq: CMatrix = a_hat.iter().map(|m| m * m).sum::<CMatrix>();
    move |k| {
        let mut m = sq.clone();
        let k2: f64 = k.iter().map(|x| x * x).sum();
        for i in 0..d {
            m[(i, i)] += k2;
        }
        for g in 0..3 {
            m += &a_hat[g] * C64::new(2.0 * k[g], 0.0);
        }
        m * C64::new(0.5 / mu, 0.0)
    }
}

/// `H ψ`.
pub fn apply_hamiltonian(h: &HamiltonianSpec, psi: &State) -> Result<State> {
    h.check_state(psi)?;
    Ok(h.apply_unchecked(psi))
}

/// `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn energy(h: &HamiltonianSpec, psi: &State) -> Result<f64> {
    let h_psi = apply_hamiltonian(h, psi)?;
    Ok(raw_inner(psi, &h_psi).re / psi.norm_sqr())
}

/// Serializable description of a Hamiltonian; fields are closed forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    Free {
        #[serde(default)]
        mu: Option<f64>,
    },
    Scalar {
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default)]
        phi: FieldSpec,
    },
    MinimalCoupling {
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default)]
        a: [FieldSpec; 3],
        #[serde(default)]
        phi: FieldSpec,
    },
    KineticFunction {
        f: KineticForm,
        #[serde(default)]
        psi: FieldSpec,
    },
    ConstantVector {
        #[serde(default)]
        mu: Option<f64>,
        a_hat: [FieldSpec; 3],
        #[serde(default)]
        phi: FieldSpec,
    },
}

impl HamiltonianConfig {
    /// Samples the fields; `mu` fills in for an omitted mass.
    pub fn build(&self, grid: GridSpec, spin: SpinSpec, mu: f64) -> Result<HamiltonianSpec> {
        match self {
            HamiltonianConfig::Free { mu: m } => HamiltonianSpec::free(m.unwrap_or(mu)),
            HamiltonianConfig::Scalar { mu: m, phi } => {
                HamiltonianSpec::scalar(m.unwrap_or(mu), phi.sample(grid, spin)?)
            }
            HamiltonianConfig::MinimalCoupling { mu: m, a, phi } => HamiltonianSpec::minimal_coupling(
                m.unwrap_or(mu),
                [
                    a[0].sample(grid, spin)?,
                    a[1].sample(grid, spin)?,
                    a[2].sample(grid, spin)?,
                ],
                phi.sample(grid, spin)?,
            ),
            HamiltonianConfig::KineticFunction { f, psi } => {
                HamiltonianSpec::kinetic_function(*f, psi.sample(grid, spin)?)
            }
            HamiltonianConfig::ConstantVector { mu: m, a_hat, phi } => {
                let mut mats = Vec::with_capacity(3);
                for (k, spec) in a_hat.iter().enumerate() {
                    if spec.terms.iter().any(|t| t.profile != Profile::Const) {
                        return Err(GqkError::Config(format!(
                            "a_hat[{k}] must be built from constant terms only"
                        )));
                    }
                    mats.push(spec.sample(GridSpec::new(4, 1.0)?, spin)?.at(0));
                }
                let mats: [CMatrix; 3] = mats.try_into().expect("three components");
                HamiltonianSpec::constant_vector(m.unwrap_or(mu), mats, phi.sample(grid, spin)?)
            }
        }
    }
}

fn max_over<T>(states: &[State], mut f: impl FnMut(&State) -> Result<T>) -> Result<Vec<T>> {
    if states.is_empty() {
        return Err(GqkError::EmptyStateList);
    }
    states.iter().map(|s| f(s)).collect()
}

fn rel(v: &State, psi: &State) -> f64 {
    v.norm() / psi.norm()
}

/// `i[H, Q_β] ψ`.
pub fn velocity_apply(h: &HamiltonianSpec, beta: usize, psi: &State) -> Result<State> {
    h.check_state(psi)?;
    Ok(velocity_unchecked(h, beta, psi))
}

fn velocity_unchecked(h: &HamiltonianSpec, beta: usize, psi: &State) -> State {
    let hq = h.apply_unchecked(&multiply_coordinate(psi, beta, 1.0));
    let qh = multiply_coordinate(&h.apply_unchecked(psi), beta, 1.0);
    &(&hq - &qh) * I
}

/// `Q_α^(t) ψ = e^{iHt} Q_α e^{-iHt} ψ`.
pub fn heisenberg_q(
    h: &HamiltonianSpec,
    alpha: usize,
    t: f64,
    psi: &State,
    cfg: &PropagatorConfig,
) -> Result<State> {
    h.check_state(psi)?;
    if t == 0.0 {
        return Ok(multiply_coordinate(psi, alpha, 1.0));
    }
    let forward = evolve(h, psi, t, cfg)?;
    let moved = multiply_coordinate(&forward, alpha, 1.0);
    evolve(h, &moved, -t, cfg)
}

/// Per-axis `max_ψ ‖(i μ [H, Q_β] - P_β - a_β) ψ‖ / ‖ψ‖`.
pub fn velocity_residual(h: &HamiltonianSpec, states: &[State]) -> Result<[f64; 3]> {
    let mu = h.mu().ok_or_else(|| {
        GqkError::Precondition("velocity identity needs a P²/2μ kinetic term".into())
    })?;
    let mut worst = [0.0f64; 3];
    max_over(states, |psi| {
        h.check_state(psi)?;
        for beta in 0..3 {
            let mut r = &velocity_unchecked(h, beta, psi) * mu;
            r.axpy(-ONE, &apply_momentum(psi, beta));
            r.axpy(-ONE, &h.velocity_shift(beta, psi)?);
            worst[beta] = worst[beta].max(rel(&r, psi));
        }
        Ok(())
    })?;
    Ok(worst)
}

/// `max_{α,ψ} ‖(i[H, μQ_α - η_α] - P_α + f_α) ψ‖ / ‖ψ‖`.
pub fn law27_residual(
    h: &HamiltonianSpec,
    eta: &[LatticeField; 3],
    f: &[LatticeField; 3],
    states: &[State],
) -> Result<f64> {
    let mu = h.mu().ok_or_else(|| {
        GqkError::Precondition("law (27) needs the mass of a P²/2μ kinetic term".into())
    })?;
    let mut worst: f64 = 0.0;
    max_over(states, |psi| {
        h.check_state(psi)?;
        for alpha in 0..3 {
            // i[H, X] with X = μ Q_α - η_α
            let x = |s: &State| {
                let mut out = multiply_coordinate(s, alpha, mu);
                out.axpy(-ONE, &eta[alpha].apply_unchecked(s));
                out
            };
            let hx = h.apply_unchecked(&x(psi));
            let xh = x(&h.apply_unchecked(psi));
            let mut r = &(&hx - &xh) * I;
            r.axpy(-ONE, &apply_momentum(psi, alpha));
            r.axpy(ONE, &f[alpha].apply(psi)?);
            worst = worst.max(rel(&r, psi));
        }
        Ok(())
    })?;
    Ok(worst)
}

/// The two sign readings of the minimal-coupling law with constant `η`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignPair {
    /// Residual with `f = -a`.
    pub f_minus_a: f64,
    /// Residual with `f = +a`.
    pub f_plus_a: f64,
}

/// Evaluates law (27) for a minimal-coupling `H` under `f = -a` and `f = +a`.
pub fn law27_sign_pair(h: &HamiltonianSpec, eta: &[LatticeField; 3], states: &[State]) -> Result<SignPair> {
    let HamiltonianSpec::MinimalCoupling { a, .. } = h else {
        return Err(GqkError::Precondition("sign comparison needs a minimal-coupling H".into()));
    };
    let minus: [LatticeField; 3] = std::array::from_fn(|k| a[k].scaled(-ONE));
    Ok(SignPair {
        f_minus_a: law27_residual(h, eta, &minus, states)?,
        f_plus_a: law27_residual(h, eta, a, states)?,
    })
}

/// Pointwise residuals of the field relations
/// `∂_β η_α = c [η_α, a_β]` and `f_α = i[Φ, η_α] - a_α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fields36 {
    /// First relation with the printed coefficient `c = i/2`.
    pub first_printed: f64,
    /// First relation with `c = i`, the coefficient that makes `[H, η_α]`
    /// reduce to `[Φ, η_α]` for minimal coupling.
    pub first_alternative: f64,
    pub second: f64,
}

pub fn fields36_check(
    phi: &LatticeField,
    a: &[LatticeField; 3],
    eta: &[LatticeField; 3],
    f: &[LatticeField; 3],
) -> Result<Fields36> {
    let mut printed: f64 = 0.0;
    let mut alternative: f64 = 0.0;
    let mut second: f64 = 0.0;
    for alpha in 0..3 {
        for beta in 0..3 {
            let d = eta[alpha].derivative(beta);
            let comm = eta[alpha].commutator(&a[beta])?;
            printed = printed.max(d.sub(&comm.scaled(0.5 * I))?.max_norm());
            alternative = alternative.max(d.sub(&comm.scaled(I))?.max_norm());
        }
        let expected = phi.commutator(&eta[alpha])?.scaled(I).sub(&a[alpha])?;
        second = second.max(f[alpha].sub(&expected)?.max_norm());
    }
    Ok(Fields36 {
        first_printed: printed,
        first_alternative: alternative,
        second,
    })
}

/// `F(P) ψ` on the momentum lattice.
pub fn kinetic_apply(f: &KineticForm, psi: &State) -> State {
    let h = psi.grid().spacing();
    let amps = scalar_momentum_map(psi, |k| f.value(k, h));
    State::from_amplitudes(psi.grid(), psi.spin(), psi.representation(), amps).expect("shape")
}

fn kinetic_gradient_apply(f: &KineticForm, axis: usize, psi: &State) -> State {
    let h = psi.grid().spacing();
    let amps = scalar_momentum_map(psi, |k| f.gradient(k, h, axis));
    State::from_amplitudes(psi.grid(), psi.spin(), psi.representation(), amps).expect("shape")
}

/// `max_ψ ‖(i[F(P), Q_α] - ∂F/∂p_α(P)) ψ‖ / ‖ψ‖`.
pub fn gradf_identity(f: &KineticForm, alpha: usize, states: &[State]) -> Result<f64> {
    f.validate()?;
    let mut worst: f64 = 0.0;
    max_over(states, |psi| {
        psi.ensure_position()?;
        let fq = kinetic_apply(f, &multiply_coordinate(psi, alpha, 1.0));
        let qf = multiply_coordinate(&kinetic_apply(f, psi), alpha, 1.0);
        let mut r = &(&fq - &qf) * I;
        r.axpy(-ONE, &kinetic_gradient_apply(f, alpha, psi));
        worst = worst.max(rel(&r, psi));
        Ok(())
    })?;
    Ok(worst)
}

/// Where the velocity field `v(P)` of the symmetry check comes from.
#[derive(Clone, Debug)]
pub enum VelocitySource {
    /// `v_β = i[H, Q_β]`, which must commute with `P`.
    Hamiltonian(Box<HamiltonianSpec>),
    /// `v_β(p) = Σ_γ M_βγ p_γ`, built by hand.
    Linear([[f64; 3]; 3]),
}

impl VelocitySource {
    fn apply(&self, beta: usize, psi: &State) -> State {
        match self {
            VelocitySource::Hamiltonian(h) => velocity_unchecked(h, beta, psi),
            VelocitySource::Linear(m) => {
                let row = m[beta];
                let grid = psi.grid();
                let amps = scalar_momentum_map(psi, |k| row[0] * k[0] + row[1] * k[1] + row[2] * k[2]);
                State::from_amplitudes(grid, psi.spin(), psi.representation(), amps).expect("shape")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrrotReport {
    /// `max ‖[v_β, P_α] ψ‖ / ‖ψ‖`, the momentum-function precondition.
    pub precondition: f64,
    /// `max ‖([Q_α, v_β] - [Q_β, v_α]) ψ‖ / ‖ψ‖`.
    pub residual: f64,
}

/// Checks that `v(p)` is a gradient field through `[Q_α, v_β] = [Q_β, v_α]`.
pub fn irrotational_check(
    source: &VelocitySource,
    states: &[State],
    precondition_tol: f64,
) -> Result<IrrotReport> {
    let mut pre: f64 = 0.0;
    let mut worst: f64 = 0.0;
    max_over(states, |psi| {
        psi.ensure_position()?;
        if let VelocitySource::Hamiltonian(h) = source {
            h.check_state(psi)?;
        }
        for beta in 0..3 {
            let v_psi = source.apply(beta, psi);
            for alpha in 0..3 {
                let vp = source.apply(beta, &apply_momentum(psi, alpha));
                let pv = apply_momentum(&v_psi, alpha);
                pre = pre.max(rel(&(&vp - &pv), psi));
            }
        }
        for alpha in 0..3 {
            for beta in 0..3 {
                if alpha == beta {
                    continue;
                }
                let comm = |x: usize, y: usize| {
                    let qv = multiply_coordinate(&source.apply(y, psi), x, 1.0);
                    let vq = source.apply(y, &multiply_coordinate(psi, x, 1.0));
                    &qv - &vq
                };
                worst = worst.max(rel(&(&comm(alpha, beta) - &comm(beta, alpha)), psi));
            }
        }
        Ok(())
    })?;
    if pre > precondition_tol {
        return Err(GqkError::Precondition(format!(
            "velocity does not commute with P (residual {pre:.3e}); not a momentum function"
        )));
    }
    Ok(IrrotReport {
        precondition: pre,
        residual: worst,
    })
}

/// Residuals of the scalar-potential chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat16 {
    /// `max ‖([μQ_α, Q̇_β] - i δ_αβ) ψ‖ / ‖ψ‖`.
    pub r14: f64,
    /// `max ‖(μ Q̇_β - P_β) ψ‖ / ‖ψ‖`.
    pub r15: f64,
    /// `(u, max ‖(e^{iG_α u} Q̇_β e^{-iG_α u} - Q̇_β + δ_αβ u) ψ‖ / ‖ψ‖)`.
    pub r13: Vec<(f64, f64)>,
}

pub fn stat16_suite(h: &HamiltonianSpec, states: &[State], us: &[f64]) -> Result<Stat16> {
    let mu = match h {
        HamiltonianSpec::Scalar { mu, .. } | HamiltonianSpec::Free { mu } => *mu,
        _ => return Err(GqkError::Precondition("the scalar chain needs a Scalar or Free H".into())),
    };
    let mut r14: f64 = 0.0;
    let mut r15: f64 = 0.0;
    let mut r13 = vec![0.0f64; us.len()];
    max_over(states, |psi| {
        h.check_state(psi)?;
        for beta in 0..3 {
            let qdot = |s: &State| velocity_unchecked(h, beta, s);
            let qd_psi = qdot(psi);
            let mut r = &qd_psi * mu;
            r.axpy(-ONE, &apply_momentum(psi, beta));
            r15 = r15.max(rel(&r, psi));
            for alpha in 0..3 {
                let a = multiply_coordinate(&qd_psi, alpha, mu);
                let b = qdot(&multiply_coordinate(psi, alpha, mu));
                let mut r = &a - &b;
                if alpha == beta {
                    r.axpy(-I, psi);
                }
                r14 = r14.max(rel(&r, psi));
                for (k, &u) in us.iter().enumerate() {
                    let phase = |s: &State, sign: f64| {
                        s.map_position(|x| C64::from_polar(1.0, sign * mu * u * x[alpha]))
                    };
                    let conj = phase(&qdot(&phase(psi, -1.0)), 1.0);
                    let mut r = &conj - &qd_psi;
                    if alpha == beta {
                        r.axpy(C64::new(u, 0.0), psi);
                    }
                    r13[k] = r13[k].max(rel(&r, psi));
                }
            }
        }
        Ok(())
    })?;
    Ok(Stat16 {
        r14,
        r15,
        r13: us.iter().copied().zip(r13).collect(),
    })
}

/// Residuals of the constant-vector family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H43 {
    /// `max ‖(μ i[H, Q_β] - P_β - â_β) ψ‖ / ‖ψ‖`.
    pub velocity: f64,
    /// `max ‖[â_β, P_γ] ψ‖, ‖[â_β, Q_γ] ψ‖` relative to `‖ψ‖`.
    pub commutes: f64,
}

pub fn h43_check(h: &HamiltonianSpec, states: &[State]) -> Result<H43> {
    let HamiltonianSpec::ConstantVector { a_hat, .. } = h else {
        return Err(GqkError::Precondition("needs a constant-vector H".into()));
    };
    let velocity = velocity_residual(h, states)?.into_iter().fold(0.0, f64::max);
    let mut commutes: f64 = 0.0;
    for psi in states {
        for beta in 0..3 {
            for gamma in 0..3 {
                let ap = apply_spin_matrix(&apply_momentum(psi, gamma), &a_hat[beta]);
                let pa = apply_momentum(&apply_spin_matrix(psi, &a_hat[beta]), gamma);
                commutes = commutes.max(rel(&(&ap - &pa), psi));
                let aq = apply_spin_matrix(&multiply_coordinate(psi, gamma, 1.0), &a_hat[beta]);
                let qa = multiply_coordinate(&apply_spin_matrix(psi, &a_hat[beta]), gamma, 1.0);
                commutes = commutes.max(rel(&(&aq - &qa), psi));
            }
        }
    }
    Ok(H43 { velocity, commutes })
}

/// Expectation values recorded along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub q: [f64; 3],
    pub p: [f64; 3],
    pub norm: f64,
    pub energy: f64,
}

pub fn observables(h: &HamiltonianSpec, psi: &State) -> Result<Observables> {
    h.check_state(psi)?;
    let n2 = psi.norm_sqr();
    let q = std::array::from_fn(|a| raw_inner(psi, &multiply_coordinate(psi, a, 1.0)).re / n2);
    let p = std::array::from_fn(|a| raw_inner(psi, &apply_momentum(psi, a)).re / n2);
    Ok(Observables {
        q,
        p,
        norm: n2.sqrt(),
        energy: raw_inner(psi, &h.apply_unchecked(psi)).re / n2,
    })
}

/// `max_{β} |d⟨Q_β⟩/dt - ⟨P_β + a_β⟩/μ|` at the sample times, with the time
/// derivative taken by a central difference of step `dt_fd`.
pub fn ehrenfest_residual(
    h: &HamiltonianSpec,
    psi0: &State,
    times: &[f64],
    dt_fd: f64,
    cfg: &PropagatorConfig,
) -> Result<f64> {
    let mu = h.mu().ok_or_else(|| GqkError::Precondition("Ehrenfest check needs μ".into()))?;
    let mut worst: f64 = 0.0;
    for &t in times {
        let at = evolve(h, psi0, t, cfg)?;
        let plus = evolve(h, &at, dt_fd, cfg)?;
        let minus = evolve(h, &at, -dt_fd, cfg)?;
        let n2 = at.norm_sqr();
        for beta in 0..3 {
            let qp = raw_inner(&plus, &multiply_coordinate(&plus, beta, 1.0)).re / plus.norm_sqr();
            let qm = raw_inner(&minus, &multiply_coordinate(&minus, beta, 1.0)).re / minus.norm_sqr();
            let mut v = apply_momentum(&at, beta);
            v.axpy(ONE, &h.velocity_shift(beta, &at)?);
            let rhs = raw_inner(&at, &v).re / (n2 * mu);
            worst = worst.max(((qp - qm) / (2.0 * dt_fd) - rhs).abs());
        }
    }
    Ok(worst)
}

/// `⟨ψ|[μQ_α, Q_α^(t)]|ψ⟩` for a normalized `ψ`.
pub fn harmonic_witness(
    h: &HamiltonianSpec,
    alpha: usize,
    t: f64,
    psi: &State,
    cfg: &PropagatorConfig,
) -> Result<C64> {
    psi.ensure_normalized()?;
    let mu = h.mu().ok_or_else(|| GqkError::Precondition("witness needs μ".into()))?;
    let a = multiply_coordinate(&heisenberg_q(h, alpha, t, psi, cfg)?, alpha, mu);
    let b = heisenberg_q(h, alpha, t, &multiply_coordinate(psi, alpha, mu), cfg)?;
    Ok(raw_inner(psi, &(&a - &b)))
}

/// `max_ψ ‖([G_α, Q_β^(t)] - i δ_αβ t) ψ‖ / ‖ψ‖` with `G = μ Q`.
pub fn boost_heisenberg_residual(
    h: &HamiltonianSpec,
    alpha: usize,
    beta: usize,
    t: f64,
    states: &[State],
    cfg: &PropagatorConfig,
) -> Result<f64> {
    let mu = h.mu().ok_or_else(|| GqkError::Precondition("needs μ".into()))?;
    let mut worst: f64 = 0.0;
    max_over(states, |psi| {
        let a = multiply_coordinate(&heisenberg_q(h, beta, t, psi, cfg)?, alpha, mu);
        let b = heisenberg_q(h, beta, t, &multiply_coordinate(psi, alpha, mu), cfg)?;
        let mut r = &a - &b;
        if alpha == beta {
            r.axpy(-I * t, psi);
        }
        worst = worst.max(rel(&r, psi));
        Ok(())
    })?;
    Ok(worst)
}

/// `max_ψ ‖[η_α(Q), Q_β^(t)] ψ‖ / ‖ψ‖`.
pub fn eta_heisenberg_residual(
    h: &HamiltonianSpec,
    eta: &LatticeField,
    beta: usize,
    t: f64,
    states: &[State],
    cfg: &PropagatorConfig,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    max_over(states, |psi| {
        let a = eta.apply(&heisenberg_q(h, beta, t, psi, cfg)?)?;
        let b = heisenberg_q(h, beta, t, &eta.apply(psi)?, cfg)?;
        worst = worst.max(rel(&(&a - &b), psi));
        Ok(())
    })?;
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldTerm;
    use crate::grid::standard_states;
    use crate::operators::SpinMatrices;

    fn setup(two_s: u32) -> (GridSpec, SpinSpec) {
        (GridSpec::new(32, 16.0).unwrap(), SpinSpec::new(two_s))
    }

    #[test]
    fn free_plane_wave_eigenvalue() {
        let g = GridSpec::new(16, 8.0).unwrap();
        let s = SpinSpec::new(0);
        let k = [2.0 * g.dk(), -g.dk(), 0.0];
        let psi = State::from_fn(g, s, |x, _| C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1]));
        let h = HamiltonianSpec::free(1.5).unwrap();
        let e = (k[0] * k[0] + k[1] * k[1]) / 3.0;
        let r = &apply_hamiltonian(&h, &psi).unwrap() - &(&psi * e);
        assert!(r.norm() < 1e-12 * psi.norm());
    }

    #[test]
    fn constant_potential_shifts_energy() {
        let (g, s) = setup(1);
        let psi = standard_states(g, s, 1, 1).remove(0);
        let h0 = HamiltonianSpec::free(1.0).unwrap();
        let h1 = HamiltonianSpec::scalar(1.0, FieldSpec::constant(0.7).sample(g, s).unwrap()).unwrap();
        let mut diff = apply_hamiltonian(&h1, &psi).unwrap();
        diff.axpy(-ONE, &apply_hamiltonian(&h0, &psi).unwrap());
        diff.axpy(C64::new(-0.7, 0.0), &psi);
        assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn constant_vector_matches_minimal_coupling_with_constant_field() {
        let (g, s) = setup(1);
        let mats = SpinMatrices::new(1);
        let a_hat = [mats.s(0) * C64::new(0.3, 0.0), mats.s(2) * C64::new(-0.2, 0.0), CMatrix::zeros(2, 2)];
        let phi = LatticeField::zeros(g, 2);
        let hc = HamiltonianSpec::constant_vector(1.0, a_hat.clone(), phi.clone()).unwrap();
        let fields = a_hat.map(|m| LatticeField::constant(g, &m));
        let hm = HamiltonianSpec::minimal_coupling(1.0, fields, phi).unwrap();
        let psi = standard_states(g, s, 2, 1).remove(0);
        let d = &apply_hamiltonian(&hc, &psi).unwrap() - &apply_hamiltonian(&hm, &psi).unwrap();
        assert!(d.norm() < 1e-10, "{}", d.norm());
    }

    #[test]
    fn config_round_trip() {
        let text = r#"
            kind = "minimal_coupling"
            mu = 2.0
            a = [[{ profile = "sin", axis = 2, mode = 1 }], [], []]
            phi = [{ profile = "const", coef = 0.5, spin = "s3" }]
        "#;
        let cfg: HamiltonianConfig = toml::from_str(text).unwrap();
        let (g, s) = setup(1);
        let h = cfg.build(g, s, 1.0).unwrap();
        assert_eq!(h.tag(), "minimal_coupling");
        assert_eq!(h.mu(), Some(2.0));
        let back: HamiltonianConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let _ = FieldTerm::new(Profile::Const, 1.0);
    }

    #[test]
    fn velocity_of_free_and_scalar() {
        let (g, s) = setup(0);
        let states = standard_states(g, s, 3, 2);
        let h = HamiltonianSpec::free(1.0).unwrap();
        let r = velocity_residual(&h, &states).unwrap();
        assert!(r.iter().all(|r| *r < 1e-7), "{r:?}");
        let phi = FieldSpec::term(Profile::Gaussian { center: [0.5, 0.0, 0.0], width: 1.0 }, 2.0)
            .sample(g, s)
            .unwrap();
        let h = HamiltonianSpec::scalar(1.5, phi).unwrap();
        let r = velocity_residual(&h, &states).unwrap();
        assert!(r.iter().all(|r| *r < 1e-7), "{r:?}");
    }

    #[test]
    fn curl_velocity_is_flagged() {
        let (g, s) = setup(0);
        let states = standard_states(g, s, 3, 1);
        let curl = VelocitySource::Linear([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0; 3]]);
        let r = irrotational_check(&curl, &states, 1e-8).unwrap();
        assert!((r.residual - 2.0).abs() < 1e-8, "{}", r.residual);
    }
}
