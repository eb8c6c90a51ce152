//! Phase-field conversions `Û_g = V_g U_g`, Q-covariance, extraction of the
//! `η` fields, and first-order covariance probes of the Heisenberg position.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{heisenberg_q, HamiltonianSpec};
use crate::error::{GqkError, Result};
use crate::field::{CMatrix, LatticeField};
use crate::fit::{log_log_fit, LineFit};
use crate::galilei::{GalileiRep, GroupElement};
use crate::grid::{GridSpec, SpinSpec, State, ZERO};
use crate::operators::{apply_momentum_fn, multiply_coordinate, OperatorHandle};
use crate::propagate::PropagatorConfig;
use crate::snapshot::read_field;

type ThetaFn = dyn Fn(&GroupElement, [f64; 3]) -> CMatrix + Send + Sync;

#[derive(Clone)]
enum PhaseKind {
    Zero,
    /// `θ(g, x) = Σ_α u_α η_α(x)`.
    LinearInU(Arc<[LatticeField; 3]>),
    Custom(Arc<ThetaFn>),
}

/// `θ(g, x)`, a Hermitian matrix per group element and lattice point.
#[derive(Clone)]
pub struct PhaseField {
    grid: GridSpec,
    spin: SpinSpec,
    kind: PhaseKind,
}

impl fmt::Debug for PhaseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            PhaseKind::Zero => "zero",
            PhaseKind::LinearInU(_) => "linear_in_u",
            PhaseKind::Custom(_) => "custom",
        };
        f.debug_struct("PhaseField")
            .field("grid", &self.grid)
            .field("spin", &self.spin)
            .field("kind", &kind)
            .finish()
    }
}

impl PhaseField {
    pub fn zero(grid: GridSpec, spin: SpinSpec) -> Self {
        Self {
            grid,
            spin,
            kind: PhaseKind::Zero,
        }
    }

    pub fn linear_in_u(eta: [LatticeField; 3]) -> Result<Self> {
        let grid = eta[0].grid();
        let d = eta[0].dim();
        for (k, e) in eta.iter().enumerate() {
            if e.grid() != grid || e.dim() != d {
                return Err(GqkError::SpecMismatch("η components on different spaces".into()));
            }
            e.ensure_hermitian(&format!("η{}", k + 1))?;
        }
        Ok(Self {
            grid,
            spin: SpinSpec::new(d as u32 - 1),
            kind: PhaseKind::LinearInU(Arc::new(eta)),
        })
    }

    /// Loads `η_α` tables (`GQKF`); a missing axis is zero.
    pub fn from_tables(grid: GridSpec, spin: SpinSpec, paths: [Option<&Path>; 3]) -> Result<Self> {
        let mut eta = Vec::with_capacity(3);
        for p in paths {
            eta.push(match p {
                Some(p) => {
                    let (field, s) = read_field(p)?;
                    if field.grid() != grid || s != spin {
                        return Err(GqkError::SpecMismatch(format!(
                            "table {} does not match the configured grid and spin",
                            p.display()
                        )));
                    }
                    field
                }
                None => LatticeField::zeros(grid, spin.dim()),
            });
        }
        Self::linear_in_u(eta.try_into().expect("three tables"))
    }

    /// An arbitrary evaluator; `θ(e, ·) = 0` and Hermiticity are checked here
    /// and on every evaluation.
    pub fn custom(
        grid: GridSpec,
        spin: SpinSpec,
        theta: impl Fn(&GroupElement, [f64; 3]) -> CMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        let pf = Self {
            grid,
            spin,
            kind: PhaseKind::Custom(Arc::new(theta)),
        };
        let at_e = pf.theta(&GroupElement::identity())?;
        if at_e.max_norm() > 1e-12 {
            return Err(GqkError::Precondition(format!(
                "θ(e, x) must vanish (max {:.3e})",
                at_e.max_norm()
            )));
        }
        Ok(pf)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn spin(&self) -> SpinSpec {
        self.spin
    }

    /// `θ(g, ·)` sampled on the lattice.
    pub fn theta(&self, g: &GroupElement) -> Result<LatticeField> {
        let d = self.spin.dim();
        match &self.kind {
            PhaseKind::Zero => Ok(LatticeField::zeros(self.grid, d)),
            PhaseKind::LinearInU(eta) => {
                let mut out = LatticeField::zeros(self.grid, d);
                for (a, e) in eta.iter().enumerate() {
                    if g.u[a] != 0.0 {
                        out = out.add(&e.scaled(C64::new(g.u[a], 0.0)))?;
                    }
                }
                Ok(out)
            }
            PhaseKind::Custom(f) => {
                let field = LatticeField::from_fn(self.grid, d, |x| f(g, x));
                field.ensure_hermitian("θ")?;
                Ok(field)
            }
        }
    }

    /// `V_g = e^{iθ(g, Q)}` as a pointwise unitary field.
    pub fn v_field(&self, g: &GroupElement) -> Result<LatticeField> {
        Ok(self.theta(g)?.exp_i(1.0))
    }
}

/// A family of unitaries `V_g` applied after the base representation.
pub trait Conversion: Send + Sync {
    fn name(&self) -> &str;
    fn apply(&self, g: &GroupElement, psi: &State) -> Result<State>;
    fn apply_inverse(&self, g: &GroupElement, psi: &State) -> Result<State>;
}

impl Conversion for PhaseField {
    fn name(&self) -> &str {
        "phase_field"
    }

    fn apply(&self, g: &GroupElement, psi: &State) -> Result<State> {
        if matches!(self.kind, PhaseKind::Zero) {
            return Ok(psi.clone());
        }
        self.v_field(g)?.apply(psi)
    }

    fn apply_inverse(&self, g: &GroupElement, psi: &State) -> Result<State> {
        if matches!(self.kind, PhaseKind::Zero) {
            return Ok(psi.clone());
        }
        self.theta(g)?.exp_i(-1.0).apply(psi)
    }
}

/// `V_g = e^{-iκ a·P}`, a conversion that is not a multiplication operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumKick {
    pub kappa: f64,
}

impl MomentumKick {
    fn shift(&self, a: [f64; 3], sign: f64, psi: &State) -> State {
        let mut out = psi.clone();
        for (axis, &ax) in a.iter().enumerate() {
            let s = sign * self.kappa * ax;
            if s != 0.0 {
                out = apply_momentum_fn(&out, axis, |k| C64::from_polar(1.0, -k * s));
            }
        }
        out
    }
}

impl Conversion for MomentumKick {
    fn name(&self) -> &str {
        "momentum_kick"
    }

    fn apply(&self, g: &GroupElement, psi: &State) -> Result<State> {
        psi.ensure_position()?;
        Ok(self.shift(g.a, 1.0, psi))
    }

    fn apply_inverse(&self, g: &GroupElement, psi: &State) -> Result<State> {
        psi.ensure_position()?;
        Ok(self.shift(g.a, -1.0, psi))
    }
}

/// `Û_g = V_g U_g` over a base representation.
#[derive(Clone)]
pub struct ConvertedFamily {
    rep: GalileiRep,
    conv: Arc<dyn Conversion>,
}

impl fmt::Debug for ConvertedFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvertedFamily")
            .field("rep", &self.rep)
            .field("conversion", &self.conv.name())
            .finish()
    }
}

impl ConvertedFamily {
    pub fn new(rep: GalileiRep, conv: impl Conversion + 'static) -> Result<Self> {
        Ok(Self {
            rep,
            conv: Arc::new(conv),
        })
    }

    pub fn with_phase(rep: GalileiRep, phase: PhaseField) -> Result<Self> {
        if phase.grid() != rep.grid() || phase.spin() != rep.spin() {
            return Err(GqkError::SpecMismatch(
                "phase field and representation live on different spaces".into(),
            ));
        }
        Self::new(rep, phase)
    }

    pub fn rep(&self) -> &GalileiRep {
        &self.rep
    }

    /// `Û_g ψ`.
    pub fn apply(&self, g: &GroupElement, psi: &State) -> Result<State> {
        self.conv.apply(g, &self.rep.apply(g, psi)?)
    }

    /// `Û_g⁻¹ ψ`.
    pub fn apply_inverse(&self, g: &GroupElement, psi: &State) -> Result<State> {
        self.rep.apply_inverse(g, &self.conv.apply_inverse(g, psi)?)
    }

    /// The de-converted family `U_g = V_g⁻¹ Û_g`.
    pub fn raw_apply(&self, g: &GroupElement, psi: &State) -> Result<State> {
        self.conv.apply_inverse(g, &self.apply(g, psi)?)
    }
}

/// `Û_g = V_g U_g` as an operator handle.
pub fn convert(phase: &PhaseField, rep: &GalileiRep, g: &GroupElement) -> Result<OperatorHandle> {
    if phase.grid() != rep.grid() || phase.spin() != rep.spin() {
        return Err(GqkError::SpecMismatch(
            "phase field and representation live on different spaces".into(),
        ));
    }
    rep.unitary(g)?;
    let v = phase.v_field(g)?;
    let (g, rep) = (*g, rep.clone());
    Ok(OperatorHandle::new("V_g U_g", false, rep.grid(), rep.spin(), move |psi| {
        v.apply(&rep.apply(&g, psi).expect("checked state")).expect("checked state")
    }))
}

/// `max_{α, ψ} ‖(Û_g Q_α Û_g⁻¹ - [g(Q)]_α) ψ‖ / ‖ψ‖` with `g(Q) = R⁻¹(Q - a)`.
pub fn q_covariance_residual(fam: &ConvertedFamily, g: &GroupElement, states: &[State]) -> Result<f64> {
    if states.is_empty() {
        return Err(GqkError::EmptyStateList);
    }
    let rinv = g.rot.inverse().matrix();
    let mut worst: f64 = 0.0;
    for psi in states {
        let back = fam.apply_inverse(g, psi)?;
        for alpha in 0..3 {
            let lhs = fam.apply(g, &multiply_coordinate(&back, alpha, 1.0))?;
            let mut rhs = psi * ZERO;
            for b in 0..3 {
                let c = rinv[alpha][b];
                if c != 0.0 {
                    rhs.axpy(C64::new(c, 0.0), &multiply_coordinate(psi, b, 1.0));
                    rhs.axpy(C64::new(-c * g.a[b], 0.0), psi);
                }
            }
            worst = worst.max((&lhs - &rhs).norm() / psi.norm());
        }
    }
    Ok(worst)
}

/// Largest step inconsistency accepted by [`eta_extract`].
pub const ETA_STEP_TOL: f64 = 1e-6;

/// `η_α(x) = ∂θ/∂u_α (boost, x)` at `u = 0`.
///
/// Central differences at `u₀ = 2π/(μL)` and `u₀/2` are Richardson-combined.
/// The field is rejected as non-differentiable when the two central
/// differences, or the extrapolated one-sided derivatives, disagree by more
/// than [`ETA_STEP_TOL`].
pub fn eta_extract(phase: &PhaseField, mu: f64, alpha: usize) -> Result<LatticeField> {
    if !(mu > 0.0) {
        return Err(GqkError::Precondition(format!("mass μ = {mu} must be positive")));
    }
    let u0 = 2.0 * PI / (mu * phase.grid().box_length());
    let theta = |u: f64| {
        let mut v = [0.0; 3];
        v[alpha] = u;
        phase.theta(&GroupElement::boost(v))
    };
    let t0 = theta(0.0)?;
    let (tp1, tm1) = (theta(u0)?, theta(-u0)?);
    let (tp2, tm2) = (theta(u0 / 2.0)?, theta(-u0 / 2.0)?);
    let central = |p: &LatticeField, m: &LatticeField, h: f64| -> Result<LatticeField> {
        Ok(p.sub(m)?.scaled(C64::new(0.5 / h, 0.0)))
    };
    let d1 = central(&tp1, &tm1, u0)?;
    let d2 = central(&tp2, &tm2, u0 / 2.0)?;
    let mut defect = d1.sub(&d2)?.max_norm();
    // one-sided derivatives, each extrapolated to first order
    let forward = |a: &LatticeField, b: &LatticeField| -> Result<LatticeField> {
        let f1 = a.sub(&t0)?.scaled(C64::new(1.0 / u0, 0.0));
        let f2 = b.sub(&t0)?.scaled(C64::new(2.0 / u0, 0.0));
        Ok(f2.scaled(C64::new(2.0, 0.0)).sub(&f1)?)
    };
    let right = forward(&tp1, &tp2)?;
    let left = forward(&tm1, &tm2)?.scaled(C64::new(-1.0, 0.0));
    defect = defect.max(right.sub(&left)?.max_norm());
    if defect > ETA_STEP_TOL {
        return Err(GqkError::NonDifferentiable(defect));
    }
    d2.scaled(C64::new(4.0 / 3.0, 0.0)).sub(&d1.scaled(C64::new(1.0 / 3.0, 0.0)))
}

/// Residual table of a first-order probe and its log-log fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    /// `(parameter, residual)` rows.
    pub table: Vec<(f64, f64)>,
    pub fit: Option<LineFit>,
    pub max_residual: f64,
    /// Largest `residual / parameter` over the table.
    pub max_ratio: f64,
}

impl OrderFit {
    fn from_table(table: Vec<(f64, f64)>) -> Self {
        let xs: Vec<f64> = table.iter().map(|r| r.0).collect();
        let ys: Vec<f64> = table.iter().map(|r| r.1).collect();
        Self {
            fit: log_log_fit(&xs, &ys),
            max_residual: ys.iter().copied().fold(0.0, f64::max),
            max_ratio: table.iter().map(|(x, y)| y / x.abs()).fold(0.0, f64::max),
            table,
        }
    }

    /// Whether every residual is at most `tol`, i.e. the relation is exact.
    pub fn is_exact(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

fn require(states: &[State]) -> Result<()> {
    if states.is_empty() {
        return Err(GqkError::EmptyStateList);
    }
    Ok(())
}

fn boost_phase(psi: &State, alpha: usize, k: f64) -> State {
    psi.map_position(|x| C64::from_polar(1.0, k * x[alpha]))
}

/// `R(u) = max_ψ ‖(e^{iG_α u} Q_β^(t) e^{-iG_α u} - Q_β^(t) + δ_αβ u t) ψ‖ / ‖ψ‖`
/// with `G = μQ`, for each `u` in `us`.
#[allow(clippy::too_many_arguments)]
pub fn boost_order_probe(
    h: &HamiltonianSpec,
    mu: f64,
    alpha: usize,
    beta: usize,
    t: f64,
    us: &[f64],
    states: &[State],
    cfg: &PropagatorConfig,
) -> Result<OrderFit> {
    require(states)?;
    let qts = states
        .iter()
        .map(|psi| heisenberg_q(h, beta, t, psi, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Vec::with_capacity(us.len());
    for &u in us {
        let mut worst: f64 = 0.0;
        for (psi, qt) in states.iter().zip(&qts) {
            let conj = boost_phase(
                &heisenberg_q(h, beta, t, &boost_phase(psi, alpha, -mu * u), cfg)?,
                alpha,
                mu * u,
            );
            let mut r = &conj - qt;
            if alpha == beta {
                r.axpy(C64::new(u * t, 0.0), psi);
            }
            worst = worst.max(r.norm() / psi.norm());
        }
        table.push((u, worst));
    }
    Ok(OrderFit::from_table(table))
}

fn translate(psi: &State, alpha: usize, a: f64) -> State {
    apply_momentum_fn(psi, alpha, |k| C64::from_polar(1.0, -k * a))
}

fn translation_defect(
    h: &HamiltonianSpec,
    alpha: usize,
    beta: usize,
    t: f64,
    a: f64,
    psi: &State,
    cfg: &PropagatorConfig,
) -> Result<f64> {
    let qt = heisenberg_q(h, beta, t, psi, cfg)?;
    let conj = translate(&heisenberg_q(h, beta, t, &translate(psi, alpha, -a), cfg)?, alpha, a);
    let mut r = &conj - &qt;
    if alpha == beta {
        r.axpy(C64::new(a, 0.0), psi);
    }
    Ok(r.norm() / psi.norm())
}

/// Residual `e^{-iP_α a} Q_β^(t) e^{iP_α a} - Q_β^(t) + δ_αβ a` for each `a`;
/// the `a`-proportional reading of the identity term.
pub fn translation_order_probe(
    h: &HamiltonianSpec,
    alpha: usize,
    beta: usize,
    t: f64,
    shifts: &[f64],
    states: &[State],
    cfg: &PropagatorConfig,
) -> Result<OrderFit> {
    require(states)?;
    let grid = states[0].grid();
    if let Some(a) = shifts.iter().find(|a| !grid.is_lattice_offset(**a)) {
        return Err(GqkError::NonLattice(format!("translation {a} is not a lattice offset")));
    }
    let mut table = Vec::with_capacity(shifts.len());
    for &a in shifts {
        let mut worst: f64 = 0.0;
        for psi in states {
            worst = worst.max(translation_defect(h, alpha, beta, t, a, psi, cfg)?);
        }
        table.push((a, worst));
    }
    Ok(OrderFit::from_table(table))
}

/// The same residual at fixed `a` as a function of `t`.
pub fn translation_time_probe(
    h: &HamiltonianSpec,
    alpha: usize,
    beta: usize,
    a: f64,
    ts: &[f64],
    states: &[State],
    cfg: &PropagatorConfig,
) -> Result<OrderFit> {
    require(states)?;
    let mut table = Vec::with_capacity(ts.len());
    for &t in ts {
        let mut worst: f64 = 0.0;
        for psi in states {
            worst = worst.max(translation_defect(h, alpha, beta, t, a, psi, cfg)?);
        }
        table.push((t, worst));
    }
    Ok(OrderFit::from_table(table))
}

/// `‖([G_α, Q_β^(t)] - i δ_αβ t) ψ‖ / ‖ψ‖` over a range of `t`.
pub fn small_t_probe(
    h: &HamiltonianSpec,
    alpha: usize,
    beta: usize,
    ts: &[f64],
    states: &[State],
    cfg: &PropagatorConfig,
) -> Result<OrderFit> {
    require(states)?;
    let mut table = Vec::with_capacity(ts.len());
    for &t in ts {
        let r = crate::dynamics::boost_heisenberg_residual(h, alpha, beta, t, states, cfg)?;
        table.push((t, r));
    }
    Ok(OrderFit::from_table(table))
}

/// `max_{β, ψ} ‖(Û Q_β^(t) Û⁻¹ - Q_β^(t) + δ_αβ u t) ψ‖ / ‖ψ‖` for a pure boost
/// `u ê_α` of the base representation.
pub fn free_covariance_residual(
    rep: &GalileiRep,
    h: &HamiltonianSpec,
    alpha: usize,
    u: f64,
    t: f64,
    states: &[State],
    cfg: &PropagatorConfig,
) -> Result<f64> {
    require(states)?;
    let mut v = [0.0; 3];
    v[alpha] = u;
    let g = GroupElement::boost(v);
    let mut worst: f64 = 0.0;
    for psi in states {
        let back = rep.apply_inverse(&g, psi)?;
        for beta in 0..3 {
            let lhs = rep.apply(&g, &heisenberg_q(h, beta, t, &back, cfg)?)?;
            let mut r = &lhs - &heisenberg_q(h, beta, t, psi, cfg)?;
            if alpha == beta {
                r.axpy(C64::new(u * t, 0.0), psi);
            }
            worst = worst.max(r.norm() / psi.norm());
        }
    }
    Ok(worst)
}

/// `max_{α, ψ} ‖[V_g, Q_α] ψ‖`, zero for any multiplication conversion.
pub fn v_commutes_with_q(conv: &dyn Conversion, g: &GroupElement, states: &[State]) -> Result<f64> {
    require(states)?;
    let mut worst: f64 = 0.0;
    for psi in states {
        for alpha in 0..3 {
            let vq = conv.apply(g, &multiply_coordinate(psi, alpha, 1.0))?;
            let qv = multiply_coordinate(&conv.apply(g, psi)?, alpha, 1.0);
            worst = worst.max((&vq - &qv).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldSpec, Profile};
    use crate::grid::standard_states;

    fn setup() -> (GridSpec, SpinSpec) {
        (GridSpec::new(16, 8.0).unwrap(), SpinSpec::new(0))
    }

    #[test]
    fn zero_field_is_identity() {
        let (g, s) = setup();
        let pf = PhaseField::zero(g, s);
        let rep = GalileiRep::new(g, s, 1.0).unwrap();
        let el = GroupElement::new([0.5, 0.0, 0.0], crate::galilei::Rotation::identity(), [0.0, 0.3, 0.0]);
        let psi = standard_states(g, s, 1, 1).remove(0);
        let a = convert(&pf, &rep, &el).unwrap().apply(&psi).unwrap();
        let b = rep.apply(&el, &psi).unwrap();
        assert_eq!((&a - &b).norm(), 0.0);
    }

    #[test]
    fn eta_from_linear_field() {
        let (g, s) = setup();
        let sin = FieldSpec::term(Profile::Sin { axis: 1, mode: 1 }, 1.0).sample(g, s).unwrap();
        let pf = PhaseField::linear_in_u([sin.clone(), LatticeField::zeros(g, 1), LatticeField::zeros(g, 1)]).unwrap();
        let eta = eta_extract(&pf, 1.0, 0).unwrap();
        assert!(eta.sub(&sin).unwrap().max_norm() < 1e-8);
        assert!(eta_extract(&pf, 1.0, 1).unwrap().max_norm() < 1e-14);
    }

    #[test]
    fn kink_is_not_differentiable() {
        let (g, s) = setup();
        let pf = PhaseField::custom(g, s, |el, _| CMatrix::from_element(1, 1, C64::new(el.u[0].abs(), 0.0))).unwrap();
        assert!(matches!(eta_extract(&pf, 1.0, 0), Err(GqkError::NonDifferentiable(_))));
    }

    #[test]
    fn custom_must_vanish_at_identity() {
        let (g, s) = setup();
        let bad = PhaseField::custom(g, s, |_, x| CMatrix::from_element(1, 1, C64::new(x[0], 0.0)));
        assert!(bad.is_err());
    }
}
