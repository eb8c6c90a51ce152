//! Generators of the Galilei algebra on the grid: multiplication positions,
//! spectral momenta, boosts `μ Q`, and total angular momentum with spin.
//!
//! Operators are matrix-free handles; nothing here stores an `n³ × n³`
//! matrix.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{GqkError, Result};
use crate::grid::{raw_inner, GridSpec, SpinSpec, State, I, ONE, ZERO};
use crate::spectral;

/// Standard spin-`s` matrices with `s3 = diag(s, s-1, ..., -s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinMatrices {
    two_s: u32,
    s: [DMatrix<C64>; 3],
}

impl SpinMatrices {
    pub fn new(two_s: u32) -> Self {
        let d = two_s as usize + 1;
        let s = two_s as f64 / 2.0;
        let mut raise = DMatrix::<C64>::zeros(d, d);
        let mut s3 = DMatrix::<C64>::zeros(d, d);
        for i in 0..d {
            let m = s - i as f64;
            s3[(i, i)] = C64::new(m, 0.0);
            if i > 0 {
                // s+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>, and |m+1> sits at row i-1.
                raise[(i - 1, i)] = C64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
            }
        }
        let lower = raise.adjoint();
        let s1 = (&raise + &lower) * C64::new(0.5, 0.0);
        let s2 = (&raise - &lower) * C64::new(0.0, -0.5);
        Self {
            two_s,
            s: [s1, s2, s3],
        }
    }

    pub fn two_s(&self) -> u32 {
        self.two_s
    }

    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }

    pub fn s(&self, axis: usize) -> &DMatrix<C64> {
        &self.s[axis]
    }

    /// Largest `‖[s_a, s_b] - i ε_abc s_c‖_F` over ordered pairs.
    pub fn algebra_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let comm = &self.s[a] * &self.s[b] - &self.s[b] * &self.s[a];
                let mut expected = DMatrix::<C64>::zeros(self.dim(), self.dim());
                for c in 0..3 {
                    let e = levi_civita(a, b, c);
                    if e != 0.0 {
                        expected += &self.s[c] * (I * e);
                    }
                }
                worst = worst.max((comm - expected).norm());
            }
        }
        worst
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.s
            .iter()
            .map(|m| (m - m.adjoint()).norm())
            .fold(0.0, f64::max)
    }
}

/// `ε_abc` on 0-based indices.
pub fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Remaining index of a pair of distinct axes.
pub fn third_axis(a: usize, b: usize) -> usize {
    3 - a - b
}

type ApplyFn = dyn Fn(&State) -> State + Send + Sync;

/// A named linear map on position-space states of one grid and spin space.
#[derive(Clone)]
pub struct OperatorHandle {
    name: String,
    hermitian: bool,
    grid: GridSpec,
    spin: SpinSpec,
    apply: Arc<ApplyFn>,
}

impl fmt::Debug for OperatorHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorHandle")
            .field("name", &self.name)
            .field("hermitian", &self.hermitian)
            .finish()
    }
}

impl OperatorHandle {
    pub fn new(
        name: impl Into<String>,
        hermitian: bool,
        grid: GridSpec,
        spin: SpinSpec,
        apply: impl Fn(&State) -> State + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            hermitian,
            grid,
            spin,
            apply: Arc::new(apply),
        }
    }

    pub fn identity(grid: GridSpec, spin: SpinSpec) -> Self {
        Self::new("1", true, grid, spin, |psi| psi.clone())
    }

    pub fn zero(grid: GridSpec, spin: SpinSpec) -> Self {
        Self::new("0", true, grid, spin, |psi| psi * ZERO)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn spin(&self) -> SpinSpec {
        self.spin
    }

    fn check(&self, psi: &State) -> Result<()> {
        psi.ensure_position()?;
        if psi.grid() != self.grid || psi.spin() != self.spin {
            return Err(GqkError::SpecMismatch(format!(
                "operator `{}` does not act on this state's grid/spin space",
                self.name
            )));
        }
        Ok(())
    }

    pub fn apply(&self, psi: &State) -> Result<State> {
        self.check(psi)?;
        Ok((self.apply)(psi))
    }

    pub(crate) fn apply_unchecked(&self, psi: &State) -> State {
        (self.apply)(psi)
    }

    fn ensure_same_space(&self, other: &OperatorHandle) -> Result<()> {
        if self.grid != other.grid || self.spin != other.spin {
            return Err(GqkError::SpecMismatch(format!(
                "operators `{}` and `{}` act on different spaces",
                self.name, other.name
            )));
        }
        Ok(())
    }

    /// `self ∘ other`.
    pub fn then_after(&self, other: &OperatorHandle) -> Result<OperatorHandle> {
        self.ensure_same_space(other)?;
        let (a, b) = (self.apply.clone(), other.apply.clone());
        Ok(Self {
            name: format!("{}·{}", self.name, other.name),
            hermitian: false,
            grid: self.grid,
            spin: self.spin,
            apply: Arc::new(move |psi| a(&b(psi))),
        })
    }

    pub fn plus(&self, other: &OperatorHandle) -> Result<OperatorHandle> {
        self.ensure_same_space(other)?;
        let (a, b) = (self.apply.clone(), other.apply.clone());
        Ok(Self {
            name: format!("({} + {})", self.name, other.name),
            hermitian: self.hermitian && other.hermitian,
            grid: self.grid,
            spin: self.spin,
            apply: Arc::new(move |psi| &a(psi) + &b(psi)),
        })
    }

    pub fn scaled(&self, c: C64) -> OperatorHandle {
        let a = self.apply.clone();
        Self {
            name: format!("({c})·{}", self.name),
            hermitian: self.hermitian && c.im == 0.0,
            grid: self.grid,
            spin: self.spin,
            apply: Arc::new(move |psi| &a(psi) * c),
        }
    }

    /// Unitary conjugation `U A U⁻¹` given `U` and `U⁻¹` as handles.
    pub fn conjugated_by(&self, u: &OperatorHandle, u_inv: &OperatorHandle) -> Result<OperatorHandle> {
        u.then_after(self)?.then_after(u_inv)
    }
}

fn check_axis(axis: usize) {
    assert!(axis < 3, "axis index {axis} out of range 0..3");
}

/// `(Q_α ψ)(x) = x_α ψ(x)`; `axis` is 0-based.
pub fn position_op(grid: GridSpec, spin: SpinSpec, axis: usize) -> OperatorHandle {
    check_axis(axis);
    OperatorHandle::new(format!("Q{}", axis + 1), true, grid, spin, move |psi| {
        multiply_coordinate(psi, axis, 1.0)
    })
}

pub(crate) fn multiply_coordinate(psi: &State, axis: usize, scale: f64) -> State {
    let grid = psi.grid();
    let d = psi.dim();
    let xs: Vec<f64> = (0..grid.n()).map(|i| scale * grid.position(i)).collect();
    let mut out = psi.clone();
    let amps = out.amplitudes_mut();
    for p in 0..grid.points() {
        let x = xs[grid.unflatten(p)[axis]];
        for v in &mut amps[p * d..(p + 1) * d] {
            *v *= x;
        }
    }
    out
}

/// `P_α = -i ∂/∂x_α` as a spectral derivative.
pub fn momentum_op(grid: GridSpec, spin: SpinSpec, axis: usize) -> OperatorHandle {
    check_axis(axis);
    OperatorHandle::new(format!("P{}", axis + 1), true, grid, spin, move |psi| {
        apply_momentum(psi, axis)
    })
}

pub(crate) fn apply_momentum(psi: &State, axis: usize) -> State {
    apply_momentum_fn(psi, axis, |k| C64::new(k, 0.0))
}

/// `f(P_α) ψ` for a function of a single momentum component.
pub(crate) fn apply_momentum_fn(psi: &State, axis: usize, f: impl Fn(f64) -> C64) -> State {
    let grid = psi.grid();
    let amps = spectral::axis_multiplier(psi.amplitudes(), grid.n(), psi.dim(), axis, |j| {
        f(grid.wavenumber(j))
    });
    State::from_amplitudes(grid, psi.spin(), psi.representation(), amps)
        .expect("shape preserved")
}

/// `G_α = μ Q_α`.
pub fn boost_generator(grid: GridSpec, spin: SpinSpec, axis: usize, mu: f64) -> Result<OperatorHandle> {
    check_axis(axis);
    if !(mu > 0.0) {
        return Err(GqkError::Precondition(format!("mass μ = {mu} must be positive")));
    }
    Ok(OperatorHandle::new(
        format!("G{}", axis + 1),
        true,
        grid,
        spin,
        move |psi| multiply_coordinate(psi, axis, mu),
    ))
}

/// Spin operator `S_α` acting on the internal index only.
pub fn spin_op(grid: GridSpec, spin: SpinSpec, axis: usize, mats: &SpinMatrices) -> Result<OperatorHandle> {
    check_axis(axis);
    if mats.dim() != spin.dim() {
        return Err(GqkError::SpecMismatch(format!(
            "spin matrices of dimension {} for spin space of dimension {}",
            mats.dim(),
            spin.dim()
        )));
    }
    let m = mats.s(axis).clone();
    Ok(OperatorHandle::new(
        format!("S{}", axis + 1),
        true,
        grid,
        spin,
        move |psi| apply_spin_matrix(psi, &m),
    ))
}

pub(crate) fn apply_spin_matrix(psi: &State, m: &DMatrix<C64>) -> State {
    let d = psi.dim();
    let mut out = psi.clone();
    let src = psi.amplitudes();
    let dst = out.amplitudes_mut();
    for p in 0..psi.grid().points() {
        for r in 0..d {
            let mut acc = ZERO;
            for c in 0..d {
                acc += m[(r, c)] * src[p * d + c];
            }
            dst[p * d + r] = acc;
        }
    }
    out
}

/// `J_α = Q_β P_γ - Q_γ P_β + S_α` for cyclic `(α, β, γ)`.
pub fn angular_momentum_op(
    grid: GridSpec,
    spin: SpinSpec,
    axis: usize,
    mats: &SpinMatrices,
) -> Result<OperatorHandle> {
    let s_op = spin_op(grid, spin, axis, mats)?;
    let beta = (axis + 1) % 3;
    let gamma = (axis + 2) % 3;
    Ok(OperatorHandle::new(
        format!("J{}", axis + 1),
        true,
        grid,
        spin,
        move |psi| {
            let mut out = multiply_coordinate(&apply_momentum(psi, gamma), beta, 1.0);
            out.axpy(-ONE, &multiply_coordinate(&apply_momentum(psi, beta), gamma, 1.0));
            out.axpy(ONE, &s_op.apply_unchecked(psi));
            out
        },
    ))
}

/// `(AB - BA) ψ`.
pub fn commutator_apply(a: &OperatorHandle, b: &OperatorHandle, psi: &State) -> Result<State> {
    let ab = a.apply(&b.apply(psi)?)?;
    let ba = b.apply(&a.apply(psi)?)?;
    Ok(&ab - &ba)
}

/// `⟨ψ|Aψ⟩` for a normalized `ψ`.
pub fn expectation(a: &OperatorHandle, psi: &State) -> Result<C64> {
    psi.ensure_normalized()?;
    let a_psi = a.apply(psi)?;
    Ok(raw_inner(psi, &a_psi))
}

/// Right-hand side of a commutator identity.
#[derive(Clone, Debug)]
pub enum Expected {
    Scalar(C64),
    Operator(OperatorHandle),
}

impl Expected {
    pub fn zero() -> Self {
        Expected::Scalar(ZERO)
    }

    pub(crate) fn apply(&self, psi: &State) -> Result<State> {
        match self {
            Expected::Scalar(c) => Ok(psi * *c),
            Expected::Operator(op) => op.apply(psi),
        }
    }
}

/// `max_ψ ‖[A,B]ψ - Eψ‖ / ‖ψ‖` over the given states.
pub fn commutator_residual(
    a: &OperatorHandle,
    b: &OperatorHandle,
    expected: &Expected,
    states: &[State],
) -> Result<f64> {
    if states.is_empty() {
        return Err(GqkError::EmptyStateList);
    }
    let mut worst: f64 = 0.0;
    for psi in states {
        let lhs = commutator_apply(a, b, psi)?;
        let rhs = expected.apply(psi)?;
        worst = worst.max((&lhs - &rhs).norm() / psi.norm());
    }
    Ok(worst)
}

/// `|⟨ψ|Aφ⟩ - ⟨Aψ|φ⟩|` normalized by `‖ψ‖‖φ‖`.
pub fn symmetry_residual(a: &OperatorHandle, psi: &State, phi: &State) -> Result<f64> {
    let lhs = raw_inner(psi, &a.apply(phi)?);
    let rhs = raw_inner(&a.apply(psi)?, phi);
    Ok((lhs - rhs).norm() / (psi.norm() * phi.norm()))
}

/// The nine generators `(Q, P, J)` plus boosts for one grid, spin and mass.
#[derive(Clone, Debug)]
pub struct Generators {
    pub q: [OperatorHandle; 3],
    pub p: [OperatorHandle; 3],
    pub g: [OperatorHandle; 3],
    pub j: [OperatorHandle; 3],
    pub mu: f64,
}

impl Generators {
    pub fn new(grid: GridSpec, spin: SpinSpec, mu: f64) -> Result<Self> {
        let mats = SpinMatrices::new(spin.two_s());
        Ok(Self {
            q: std::array::from_fn(|a| position_op(grid, spin, a)),
            p: std::array::from_fn(|a| momentum_op(grid, spin, a)),
            g: [
                boost_generator(grid, spin, 0, mu)?,
                boost_generator(grid, spin, 1, mu)?,
                boost_generator(grid, spin, 2, mu)?,
            ],
            j: [
                angular_momentum_op(grid, spin, 0, &mats)?,
                angular_momentum_op(grid, spin, 1, &mats)?,
                angular_momentum_op(grid, spin, 2, &mats)?,
            ],
            mu,
        })
    }
}

/// The six relation families `[X_α, Y_β] = i ε̂_αβγ Z_γ` / `i δ_αβ μ` of the
/// Galilei algebra, as residuals maximized over all ordered axis pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgebraFamily {
    /// `[P_α, P_β] = 0`
    MomentumMomentum,
    /// `[J_α, P_β] = i ε̂ P_γ`
    AngularMomentum,
    /// `[J_α, J_β] = i ε̂ J_γ`
    AngularAngular,
    /// `[J_α, G_β] = i ε̂ G_γ`
    AngularBoost,
    /// `[G_α, G_β] = 0`
    BoostBoost,
    /// `[G_α, P_β] = i δ μ`
    BoostMomentum,
}

impl AlgebraFamily {
    pub const ALL: [AlgebraFamily; 6] = [
        AlgebraFamily::MomentumMomentum,
        AlgebraFamily::AngularMomentum,
        AlgebraFamily::AngularAngular,
        AlgebraFamily::AngularBoost,
        AlgebraFamily::BoostBoost,
        AlgebraFamily::BoostMomentum,
    ];

    pub fn residual(self, gens: &Generators, states: &[State]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let (lhs, rhs, expected) = match self {
                    AlgebraFamily::MomentumMomentum => (&gens.p[a], &gens.p[b], Expected::zero()),
                    AlgebraFamily::BoostBoost => (&gens.g[a], &gens.g[b], Expected::zero()),
                    AlgebraFamily::BoostMomentum => {
                        let c = if a == b { I * gens.mu } else { ZERO };
                        (&gens.g[a], &gens.p[b], Expected::Scalar(c))
                    }
                    AlgebraFamily::AngularMomentum => {
                        (&gens.j[a], &gens.p[b], cyclic_rhs(a, b, &gens.p))
                    }
                    AlgebraFamily::AngularAngular => {
                        (&gens.j[a], &gens.j[b], cyclic_rhs(a, b, &gens.j))
                    }
                    AlgebraFamily::AngularBoost => {
                        (&gens.j[a], &gens.g[b], cyclic_rhs(a, b, &gens.g))
                    }
                };
                worst = worst.max(commutator_residual(lhs, rhs, &expected, states)?);
            }
        }
        Ok(worst)
    }
}

fn cyclic_rhs(a: usize, b: usize, ops: &[OperatorHandle; 3]) -> Expected {
    if a == b {
        return Expected::zero();
    }
    let c = third_axis(a, b);
    Expected::Operator(ops[c].scaled(I * levi_civita(a, b, c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{gaussian_packet, standard_states};

    fn setup(two_s: u32) -> (GridSpec, SpinSpec) {
        (GridSpec::new(32, 16.0).unwrap(), SpinSpec::new(two_s))
    }

    #[test]
    fn spin_algebra_holds() {
        for two_s in 0..=3 {
            let m = SpinMatrices::new(two_s);
            assert!(m.algebra_residual() < 1e-12, "2s = {two_s}");
            assert!(m.hermitian_residual() < 1e-15);
            let casimir: DMatrix<C64> =
                m.s(0) * m.s(0) + m.s(1) * m.s(1) + m.s(2) * m.s(2);
            let s = two_s as f64 / 2.0;
            let expected = DMatrix::<C64>::identity(m.dim(), m.dim()) * C64::new(s * (s + 1.0), 0.0);
            assert!((casimir - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn positions_commute_exactly() {
        let (g, s) = setup(1);
        let states = standard_states(g, s, 1, 2);
        let r = commutator_residual(
            &position_op(g, s, 0),
            &position_op(g, s, 1),
            &Expected::zero(),
            &states,
        )
        .unwrap();
        // diagonal multiplications commute up to rounding of the products
        assert!(r < 1e-15, "{r}");
    }

    #[test]
    fn hermitian_flags_pass_symmetry() {
        let (g, s) = setup(1);
        let gens = Generators::new(g, s, 1.5).unwrap();
        let states = standard_states(g, s, 5, 4);
        for op in gens.q.iter().chain(&gens.p).chain(&gens.g).chain(&gens.j) {
            assert!(op.is_hermitian());
            for w in states.windows(2) {
                let r = symmetry_residual(op, &w[0], &w[1]).unwrap();
                assert!(r < 1e-10, "{} symmetry {r}", op.name());
            }
        }
    }

    #[test]
    fn plane_wave_momentum_eigenvalue() {
        let g = GridSpec::new(16, 8.0).unwrap();
        let s = SpinSpec::new(0);
        let k = 3.0 * g.dk();
        let psi = State::from_fn(g, s, |x, _| C64::from_polar(1.0, k * x[1]));
        let p = momentum_op(g, s, 1).apply(&psi).unwrap();
        let diff = &p - &(&psi * k);
        assert!(diff.norm() < 1e-12 * psi.norm() * k);
    }

    #[test]
    fn canonical_pair_on_localized_states() {
        let (g, s) = setup(0);
        let states = standard_states(g, s, 9, 3);
        let q1 = position_op(g, s, 0);
        let r = commutator_residual(&q1, &momentum_op(g, s, 0), &Expected::Scalar(I), &states).unwrap();
        assert!(r < 1e-8, "[Q1,P1] residual {r}");
        let r = commutator_residual(&q1, &momentum_op(g, s, 1), &Expected::zero(), &states).unwrap();
        assert!(r < 1e-8);
        let r = commutator_residual(&q1, &q1, &Expected::zero(), &states).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn spin_zero_angular_momentum_annihilates_symmetric_gaussian() {
        let g = GridSpec::new(64, 24.0).unwrap();
        let s = SpinSpec::new(0);
        let psi = gaussian_packet(g, s, [0.0; 3], [0.0; 3], 1.0, &[ONE]).unwrap();
        let mats = SpinMatrices::new(0);
        for a in 0..3 {
            let j = angular_momentum_op(g, s, a, &mats).unwrap();
            let r = j.apply(&psi).unwrap().norm();
            assert!(r < 1e-8, "J{} residual {r}", a + 1);
        }
    }

    #[test]
    fn expectation_requires_normalization() {
        let (g, s) = setup(0);
        let psi = gaussian_packet(g, s, [0.5, 0.0, 0.0], [0.0; 3], 1.0, &[ONE]).unwrap();
        let id = OperatorHandle::identity(g, s);
        assert!((expectation(&id, &psi).unwrap() - ONE).norm() < 1e-12);
        let q = expectation(&position_op(g, s, 0), &psi).unwrap();
        assert!((q.re - 0.5).abs() < 1e-8 && q.im.abs() < 1e-10);
        assert!(matches!(
            expectation(&id, &(&psi * 2.0)),
            Err(GqkError::NotNormalized(_))
        ));
    }

    #[test]
    fn empty_state_list_is_an_error() {
        let (g, s) = setup(0);
        let q = position_op(g, s, 0);
        assert!(matches!(
            commutator_residual(&q, &q, &Expected::zero(), &[]),
            Err(GqkError::EmptyStateList)
        ));
    }
}
