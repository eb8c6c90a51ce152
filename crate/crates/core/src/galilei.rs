//! The Galilei group without time translations, its passive action on space,
//! and the projective unitary representation on grid states.
//!
//! Group elements are triples `(a, R, u)` with the composition law
//! `(a, R, u)(a', R', u') = (a + R a', R R', u + R u')`. The representation
//! is `U_g = T(a) B(u) Λ(R)`: the rotation acts first, then the boost phase,
//! then the translation, with
//!
//! * `(T(a) ψ)(x) = ψ(x - a)`,
//! * `(B(u) ψ)(x) = e^{i μ u·x} ψ(x)`,
//! * `(Λ(R) ψ)(x) = L_R ψ(R⁻¹ x)`, `L_R = exp(-i θ n̂·ŝ)`.
//!
//! With this order `U_g Q U_g⁻¹ = R⁻¹(Q - a)` and the multiplier is
//! `σ(g1, g2) = exp(-i μ u1·R1 a2)`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{GqkError, Result};
use crate::field::{hermitian_exp_i, CMatrix};
use crate::fit::{log_log_fit, LineFit};
use crate::grid::{raw_inner, ray_distance, GridSpec, RayProjector, SpinSpec, State, ZERO};
use crate::operators::{apply_momentum, apply_spin_matrix, multiply_coordinate, OperatorHandle, SpinMatrices};
use crate::spectral;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Human-readable statement of the factor-order convention, echoed in reports.
pub const FACTOR_ORDER_NOTE: &str =
    "U_g = T(a) B(u) Λ(R); σ(g1,g2) = exp(-i μ u1·R1 a2); boost u then translation a gives arg σ = -μ u·a";

const QUAT_TOL: f64 = 1e-12;

fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    std::array::from_fn(|i| (0..3).map(|j| m[i][j] * v[j]).sum())
}

fn transpose(m: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| m[j][i]))
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    std::array::from_fn(|i| a[i] + b[i])
}

fn neg(a: Vec3) -> Vec3 {
    a.map(|x| -x)
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    (0..3).map(|i| a[i] * b[i]).sum()
}

/// A rotation stored as a unit quaternion `[w, x, y, z]`.
///
/// The quaternion sign is kept: it selects the spin rotor for half-integer
/// spin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    q: [f64; 4],
    m: Mat3,
    lattice: Option<[[i8; 3]; 3]>,
}

impl Rotation {
    pub fn identity() -> Self {
        Self::from_unit([1.0, 0.0, 0.0, 0.0])
    }

    pub fn from_quaternion(q: [f64; 4]) -> Result<Self> {
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > QUAT_TOL {
            return Err(GqkError::Precondition(format!(
                "quaternion norm {norm} is not 1 within {QUAT_TOL:e}"
            )));
        }
        Ok(Self::from_unit(q))
    }

    /// Rotation by `angle` (radians, right-handed) about `axis`.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self> {
        let len = dot(axis, axis).sqrt();
        if len == 0.0 {
            return Err(GqkError::Precondition("zero rotation axis".into()));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let q = [c, s * axis[0] / len, s * axis[1] / len, s * axis[2] / len];
        Ok(Self::from_unit(q))
    }

    fn from_unit(q: [f64; 4]) -> Self {
        let [w, x, y, z] = q;
        let m = [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ];
        let lattice = snap_signed_permutation(&m);
        let m = match lattice {
            Some(p) => p.map(|row| row.map(|v| v as f64)),
            None => m,
        };
        Self { q, m, lattice }
    }

    pub fn quaternion(&self) -> [f64; 4] {
        self.q
    }

    pub fn matrix(&self) -> Mat3 {
        self.m
    }

    pub fn is_lattice(&self) -> bool {
        self.lattice.is_some()
    }

    /// The rotation matrix as a signed permutation, when it is one.
    pub fn lattice_matrix(&self) -> Option<[[i8; 3]; 3]> {
        self.lattice
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        mat_vec(&self.m, v)
    }

    pub fn apply_inverse(&self, v: Vec3) -> Vec3 {
        mat_vec(&transpose(&self.m), v)
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        let [a1, b1, c1, d1] = self.q;
        let [a2, b2, c2, d2] = other.q;
        let q = [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ];
        let mut r = Self::from_unit(q);
        if let (Some(p1), Some(p2)) = (self.lattice, other.lattice) {
            // keep lattice products exact rather than round-tripping through q
            let p: [[i8; 3]; 3] = std::array::from_fn(|i| {
                std::array::from_fn(|j| (0..3).map(|k| p1[i][k] * p2[k][j]).sum())
            });
            r.lattice = Some(p);
            r.m = p.map(|row| row.map(|v| v as f64));
        }
        r
    }

    pub fn inverse(&self) -> Rotation {
        let [w, x, y, z] = self.q;
        let mut r = Self::from_unit([w, -x, -y, -z]);
        if let Some(p) = self.lattice {
            let t: [[i8; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| p[j][i]));
            r.lattice = Some(t);
            r.m = t.map(|row| row.map(|v| v as f64));
        }
        r
    }

    /// Rotation angle in `[0, 4π)` and unit axis, read off the quaternion.
    pub fn angle_axis(&self) -> (f64, Vec3) {
        let [w, x, y, z] = self.q;
        let s = (x * x + y * y + z * z).sqrt();
        if s == 0.0 {
            let theta = if w >= 0.0 { 0.0 } else { 2.0 * PI };
            return (theta, [0.0, 0.0, 1.0]);
        }
        (2.0 * s.atan2(w), [x / s, y / s, z / s])
    }

    /// Spin rotor `L_R = exp(-i θ n̂·ŝ)`.
    pub fn spin_rotor(&self, mats: &SpinMatrices) -> CMatrix {
        let (theta, n) = self.angle_axis();
        let d = mats.dim();
        if theta == 0.0 {
            return CMatrix::identity(d, d);
        }
        let mut gen = CMatrix::zeros(d, d);
        for a in 0..3 {
            gen += mats.s(a) * C64::new(n[a], 0.0);
        }
        hermitian_exp_i(&gen, -theta)
    }

    /// Largest deviation of this rotation's quaternion from `other`'s.
    pub fn distance(&self, other: &Rotation) -> f64 {
        (0..4).map(|i| (self.q[i] - other.q[i]).abs()).fold(0.0, f64::max)
    }
}

fn snap_signed_permutation(m: &Mat3) -> Option<[[i8; 3]; 3]> {
    let mut p = [[0i8; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let r = m[i][j].round();
            if (m[i][j] - r).abs() > 1e-12 || r.abs() > 1.0 {
                return None;
            }
            p[i][j] = r as i8;
        }
    }
    Some(p)
}

/// The 24 proper rotations mapping the cubic lattice to itself, by name.
///
/// Names: `id`; `x90`, `x180`, `x270` (and `y…`, `z…`) about coordinate
/// axes; `xy+180`, `xy-180`, `yz+180`, `yz-180`, `zx+180`, `zx-180` about
/// face diagonals such as `(1, ±1, 0)`; `d+++120`, `d+++240`, `d++-…`,
/// `d+-+…`, `d-++…` about body diagonals with the given signs.
pub fn lattice_rotations() -> Vec<(String, Rotation)> {
    let mut out = vec![("id".to_string(), Rotation::identity())];
    let axes = [("x", [1.0, 0.0, 0.0]), ("y", [0.0, 1.0, 0.0]), ("z", [0.0, 0.0, 1.0])];
    for (name, axis) in axes {
        for deg in [90, 180, 270] {
            out.push((
                format!("{name}{deg}"),
                Rotation::from_axis_angle(axis, deg as f64 * PI / 180.0).unwrap(),
            ));
        }
    }
    let faces = [
        ("xy+", [1.0, 1.0, 0.0]),
        ("xy-", [1.0, -1.0, 0.0]),
        ("yz+", [0.0, 1.0, 1.0]),
        ("yz-", [0.0, 1.0, -1.0]),
        ("zx+", [1.0, 0.0, 1.0]),
        ("zx-", [-1.0, 0.0, 1.0]),
    ];
    for (name, axis) in faces {
        out.push((format!("{name}180"), Rotation::from_axis_angle(axis, PI).unwrap()));
    }
    let bodies = [
        ("d+++", [1.0, 1.0, 1.0]),
        ("d++-", [1.0, 1.0, -1.0]),
        ("d+-+", [1.0, -1.0, 1.0]),
        ("d-++", [-1.0, 1.0, 1.0]),
    ];
    for (name, axis) in bodies {
        for deg in [120, 240] {
            out.push((
                format!("{name}{deg}"),
                Rotation::from_axis_angle(axis, deg as f64 * PI / 180.0).unwrap(),
            ));
        }
    }
    out
}

pub fn lattice_rotation(name: &str) -> Option<Rotation> {
    lattice_rotations()
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, r)| r)
}

fn lattice_rotation_name(r: &Rotation) -> Option<String> {
    lattice_rotations()
        .into_iter()
        .find(|(_, l)| l.distance(r) < 1e-12)
        .map(|(n, _)| n)
}

/// A Galilei transformation `(a, R, u)` without time translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GroupElementRepr", into = "GroupElementRepr")]
pub struct GroupElement {
    pub a: Vec3,
    pub rot: Rotation,
    pub u: Vec3,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupElementRepr {
    #[serde(default)]
    a: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quat: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lattice_rot: Option<String>,
    #[serde(default)]
    u: Vec3,
}

impl TryFrom<GroupElementRepr> for GroupElement {
    type Error = GqkError;

    fn try_from(r: GroupElementRepr) -> Result<Self> {
        let rot = match (r.quat, r.lattice_rot) {
            (Some(_), Some(_)) => {
                return Err(GqkError::Config(
                    "group element gives both `quat` and `lattice_rot`".into(),
                ))
            }
            (Some(q), None) => Rotation::from_quaternion(q)?,
            (None, Some(name)) => lattice_rotation(&name)
                .ok_or_else(|| GqkError::Config(format!("unknown lattice rotation `{name}`")))?,
            (None, None) => Rotation::identity(),
        };
        Ok(GroupElement { a: r.a, rot, u: r.u })
    }
}

impl From<GroupElement> for GroupElementRepr {
    fn from(g: GroupElement) -> Self {
        let name = lattice_rotation_name(&g.rot);
        GroupElementRepr {
            a: g.a,
            quat: if name.is_none() { Some(g.rot.quaternion()) } else { None },
            lattice_rot: name,
            u: g.u,
        }
    }
}

impl GroupElement {
    pub fn identity() -> Self {
        Self {
            a: [0.0; 3],
            rot: Rotation::identity(),
            u: [0.0; 3],
        }
    }

    pub fn new(a: Vec3, rot: Rotation, u: Vec3) -> Self {
        Self { a, rot, u }
    }

    pub fn translation(a: Vec3) -> Self {
        Self {
            a,
            ..Self::identity()
        }
    }

    pub fn boost(u: Vec3) -> Self {
        Self {
            u,
            ..Self::identity()
        }
    }

    pub fn rotation(rot: Rotation) -> Self {
        Self {
            rot,
            ..Self::identity()
        }
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            a: add(self.a, self.rot.apply(other.a)),
            rot: self.rot.compose(&other.rot),
            u: add(self.u, self.rot.apply(other.u)),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        let rot = self.rot.inverse();
        GroupElement {
            a: neg(rot.apply(self.a)),
            rot,
            u: neg(rot.apply(self.u)),
        }
    }

    /// Largest componentwise distance to `other` (quaternions compared directly).
    pub fn distance(&self, other: &GroupElement) -> f64 {
        let da = (0..3).map(|i| (self.a[i] - other.a[i]).abs()).fold(0.0, f64::max);
        let du = (0..3).map(|i| (self.u[i] - other.u[i]).abs()).fold(0.0, f64::max);
        da.max(du).max(self.rot.distance(&other.rot))
    }

    pub fn is_euclidean(&self) -> bool {
        self.u == [0.0; 3]
    }

    /// Passive action `R⁻¹ x - R⁻¹ a`; the boost does not move positions.
    pub fn act_on_point(&self, x: Vec3) -> Vec3 {
        self.rot.apply_inverse(add(x, neg(self.a)))
    }

    /// Passive action at delay `t`: `R⁻¹ (x - a - u t)`.
    pub fn act_on_point_t(&self, x: Vec3, t: f64) -> Vec3 {
        let shifted: Vec3 = std::array::from_fn(|i| x[i] - self.a[i] - self.u[i] * t);
        self.rot.apply_inverse(shifted)
    }
}

pub fn compose(g1: &GroupElement, g2: &GroupElement) -> GroupElement {
    g1.compose(g2)
}

pub fn inverse(g: &GroupElement) -> GroupElement {
    g.inverse()
}

pub fn act_on_point(g: &GroupElement, x: Vec3) -> Vec3 {
    g.act_on_point(x)
}

pub fn act_on_point_t(g: &GroupElement, x: Vec3, t: f64) -> Vec3 {
    g.act_on_point_t(x, t)
}

/// The representation `g ↦ U_g` on one grid, spin space and mass.
#[derive(Clone, Debug)]
pub struct GalileiRep {
    grid: GridSpec,
    spin: SpinSpec,
    mu: f64,
    mats: SpinMatrices,
    interpolate: bool,
}

impl GalileiRep {
    pub fn new(grid: GridSpec, spin: SpinSpec, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(GqkError::Precondition(format!("mass μ = {mu} must be positive")));
        }
        Ok(Self {
            grid,
            spin,
            mu,
            mats: SpinMatrices::new(spin.two_s()),
            interpolate: false,
        })
    }

    /// Admits non-lattice rotations through trilinear interpolation.
    pub fn with_interpolation(mut self, on: bool) -> Self {
        self.interpolate = on;
        self
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn spin(&self) -> SpinSpec {
        self.spin
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn spin_matrices(&self) -> &SpinMatrices {
        &self.mats
    }

    /// Boost velocity with `μ u_α L / 2π = k_α`, for which `B(u)` is torus periodic.
    pub fn quantized_boost(&self, k: [i64; 3]) -> Vec3 {
        k.map(|m| 2.0 * PI * m as f64 / (self.mu * self.grid.box_length()))
    }

    pub fn boost_is_periodic(&self, u: Vec3) -> bool {
        u.iter().all(|&v| {
            let r = v * self.mu * self.grid.box_length() / (2.0 * PI);
            (r - r.round()).abs() < 1e-9
        })
    }

    fn check(&self, psi: &State) -> Result<()> {
        psi.ensure_position()?;
        if psi.grid() != self.grid || psi.spin() != self.spin {
            return Err(GqkError::SpecMismatch(
                "state does not live on this representation's grid/spin space".into(),
            ));
        }
        Ok(())
    }

    fn check_rotation(&self, g: &GroupElement) -> Result<()> {
        if !g.rot.is_lattice() && !self.interpolate {
            return Err(GqkError::NonLatticeRotation);
        }
        Ok(())
    }

    /// `U_g ψ`.
    pub fn apply(&self, g: &GroupElement, psi: &State) -> Result<State> {
        self.check(psi)?;
        self.check_rotation(g)?;
        let r = self.rotate(&g.rot, psi);
        let b = self.boost_phase(g.u, &r);
        Ok(self.translate(g.a, &b))
    }

    /// `U_g⁻¹ ψ = Λ(R⁻¹) B(-u) T(-a) ψ`.
    pub fn apply_inverse(&self, g: &GroupElement, psi: &State) -> Result<State> {
        self.check(psi)?;
        self.check_rotation(g)?;
        let t = self.translate(neg(g.a), psi);
        let b = self.boost_phase(neg(g.u), &t);
        Ok(self.rotate(&g.rot.inverse(), &b))
    }

    pub fn unitary(&self, g: &GroupElement) -> Result<OperatorHandle> {
        self.check_rotation(g)?;
        let (rep, g) = (self.clone(), *g);
        Ok(OperatorHandle::new("U_g", false, self.grid, self.spin, move |psi| {
            rep.apply(&g, psi).expect("checked by handle")
        }))
    }

    pub fn unitary_inverse(&self, g: &GroupElement) -> Result<OperatorHandle> {
        self.check_rotation(g)?;
        let (rep, g) = (self.clone(), *g);
        Ok(OperatorHandle::new("U_g⁻¹", false, self.grid, self.spin, move |psi| {
            rep.apply_inverse(&g, psi).expect("checked by handle")
        }))
    }

    /// `(T(a)ψ)(x) = ψ(x - a)`: an index roll when `a` is on the lattice,
    /// the spectral phase `e^{-i k·a}` otherwise.
    pub fn translate(&self, a: Vec3, psi: &State) -> State {
        if a == [0.0; 3] {
            return psi.clone();
        }
        if a.iter().all(|&c| self.grid.is_lattice_offset(c)) {
            roll(psi, a.map(|c| self.grid.lattice_steps(c)))
        } else {
            translate_spectral(psi, a)
        }
    }

    /// `e^{i μ u·x} ψ`.
    pub fn boost_phase(&self, u: Vec3, psi: &State) -> State {
        if u == [0.0; 3] {
            return psi.clone();
        }
        let mu = self.mu;
        psi.map_position(|x| C64::from_polar(1.0, mu * dot(u, x)))
    }

    /// `(Λ(R)ψ)(x) = L_R ψ(R⁻¹ x)`.
    pub fn rotate(&self, rot: &Rotation, psi: &State) -> State {
        if rot.q == [1.0, 0.0, 0.0, 0.0] {
            return psi.clone();
        }
        let remapped = match rot.lattice_matrix() {
            Some(p) => permute_lattice(psi, &p),
            None => interpolate_rotated(psi, rot),
        };
        if self.spin.dim() == 1 {
            return remapped;
        }
        apply_spin_matrix(&remapped, &rot.spin_rotor(&self.mats))
    }
}

/// `(roll ψ)(i) = ψ(i - steps)` with periodic wrap.
fn roll(psi: &State, steps: [i64; 3]) -> State {
    let grid = psi.grid();
    let n = grid.n() as i64;
    let d = psi.dim();
    let mut out = psi.clone();
    let src = psi.amplitudes();
    let dst = out.amplitudes_mut();
    for p in 0..grid.points() {
        let idx = grid.unflatten(p);
        let from: [usize; 3] =
            std::array::from_fn(|a| (idx[a] as i64 - steps[a]).rem_euclid(n) as usize);
        let q = grid.flatten(from);
        dst[p * d..(p + 1) * d].copy_from_slice(&src[q * d..(q + 1) * d]);
    }
    out
}

pub(crate) fn translate_spectral(psi: &State, a: Vec3) -> State {
    let grid = psi.grid();
    let mut amps = psi.amplitudes().to_vec();
    for (axis, &shift) in a.iter().enumerate() {
        if shift == 0.0 {
            continue;
        }
        amps = spectral::axis_multiplier(&amps, grid.n(), psi.dim(), axis, |j| {
            C64::from_polar(1.0, -grid.wavenumber(j) * shift)
        });
    }
    State::from_amplitudes(grid, psi.spin(), psi.representation(), amps).expect("shape preserved")
}

/// Index of the lattice point `sign · x_i` (negation maps `i` to `n - i`).
fn signed_index(i: usize, sign: i8, n: usize) -> usize {
    if sign > 0 {
        i
    } else {
        (n - i) % n
    }
}

/// `ψ(R⁻¹ x)` for a signed-permutation `R`; `R⁻¹ = Rᵀ`.
fn permute_lattice(psi: &State, r: &[[i8; 3]; 3]) -> State {
    let grid = psi.grid();
    let n = grid.n();
    let d = psi.dim();
    // (R⁻¹ x)_a = Σ_b R_ba x_b, a single signed entry per row of Rᵀ
    let src_axis: [(usize, i8); 3] = std::array::from_fn(|a| {
        let b = (0..3).find(|&b| r[b][a] != 0).expect("permutation");
        (b, r[b][a])
    });
    let mut out = psi.clone();
    let src = psi.amplitudes();
    let dst = out.amplitudes_mut();
    for p in 0..grid.points() {
        let idx = grid.unflatten(p);
        let from: [usize; 3] =
            std::array::from_fn(|a| signed_index(idx[src_axis[a].0], src_axis[a].1, n));
        let q = grid.flatten(from);
        dst[p * d..(p + 1) * d].copy_from_slice(&src[q * d..(q + 1) * d]);
    }
    out
}

/// `ψ(R⁻¹ x)` by periodic trilinear interpolation. Not unitary.
fn interpolate_rotated(psi: &State, rot: &Rotation) -> State {
    let grid = psi.grid();
    let n = grid.n();
    let h = grid.spacing();
    let half = 0.5 * grid.box_length();
    let d = psi.dim();
    let src = psi.amplitudes();
    let mut out = State::zeros(grid, psi.spin());
    let dst = out.amplitudes_mut();
    for p in 0..grid.points() {
        let y = rot.apply_inverse(grid.coords(p));
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let s = (y[a] + half) / h;
            let f = s.floor();
            base[a] = (f as i64).rem_euclid(n as i64) as usize;
            frac[a] = s - f;
        }
        for corner in 0..8 {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let up = (corner >> a) & 1 == 1;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                idx[a] = if up { (base[a] + 1) % n } else { base[a] };
            }
            if w == 0.0 {
                continue;
            }
            let q = grid.flatten(idx);
            for s in 0..d {
                dst[p * d + s] += src[q * d + s] * w;
            }
        }
    }
    out
}

/// An extracted multiplier value with its diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub re: f64,
    pub im: f64,
    /// `|1 - |σ||`.
    pub modulus_defect: f64,
    /// `|σ - σ'|` with `σ'` extracted from the cross-check state.
    pub cross_check: f64,
}

impl Multiplier {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }

    pub fn phase(&self) -> f64 {
        self.value().arg()
    }
}

/// Closed-form multiplier `exp(-i μ u1·R1 a2)` of the chosen factor order.
pub fn predicted_multiplier(mu: f64, g1: &GroupElement, g2: &GroupElement) -> C64 {
    C64::from_polar(1.0, -mu * dot(g1.u, g1.rot.apply(g2.a)))
}

fn sigma_on(rep: &GalileiRep, g1: &GroupElement, g2: &GroupElement, psi: &State) -> Result<C64> {
    let lhs = rep.apply(g1, &rep.apply(g2, psi)?)?;
    let rhs = rep.apply(&g1.compose(g2), psi)?;
    Ok(raw_inner(&lhs, &rhs) / psi.norm_sqr())
}

/// `σ(g1, g2) = ⟨U_{g1} U_{g2} ψ | U_{g1 g2} ψ⟩`, cross-checked on `check`.
pub fn multiplier_extract(
    rep: &GalileiRep,
    g1: &GroupElement,
    g2: &GroupElement,
    psi_ref: &State,
    check: &State,
) -> Result<Multiplier> {
    psi_ref.ensure_normalized()?;
    check.ensure_normalized()?;
    let sigma = sigma_on(rep, g1, g2, psi_ref)?;
    let defect = (1.0 - sigma.norm()).abs();
    if defect > 1e-6 {
        return Err(GqkError::MultiplierDefect(defect));
    }
    let other = sigma_on(rep, g1, g2, check)?;
    let spread = (sigma - other).norm();
    if spread > 1e-6 {
        return Err(GqkError::StateDependentMultiplier(spread));
    }
    Ok(Multiplier {
        re: sigma.re,
        im: sigma.im,
        modulus_defect: defect,
        cross_check: spread,
    })
}

/// `|σ(g1,g2) σ(g1g2,g3) - σ(g1,g2g3) σ(g2,g3)|`.
pub fn cocycle_defect(
    rep: &GalileiRep,
    g: [&GroupElement; 3],
    psi_ref: &State,
    check: &State,
) -> Result<f64> {
    let [g1, g2, g3] = g;
    let s12 = multiplier_extract(rep, g1, g2, psi_ref, check)?.value();
    let s12_3 = multiplier_extract(rep, &g1.compose(g2), g3, psi_ref, check)?.value();
    let s1_23 = multiplier_extract(rep, g1, &g2.compose(g3), psi_ref, check)?.value();
    let s23 = multiplier_extract(rep, g2, g3, psi_ref, check)?.value();
    Ok((s12 * s12_3 - s1_23 * s23).norm())
}

/// A finite union of lattice-aligned boxes on the torus.
///
/// Each box stores per-axis `(start index, length)`; an axis interval may
/// wrap across the seam.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    grid: GridSpec,
    boxes: Vec<[(usize, usize); 3]>,
}

impl BoxRegion {
    pub fn empty(grid: GridSpec) -> Self {
        Self {
            grid,
            boxes: Vec::new(),
        }
    }

    pub fn whole(grid: GridSpec) -> Self {
        Self {
            grid,
            boxes: vec![[(0, grid.n()); 3]],
        }
    }

    /// Adds the box with lattice index ranges `start[a] .. start[a] + len[a]` (mod n).
    pub fn with_index_box(mut self, start: [usize; 3], len: [usize; 3]) -> Result<Self> {
        let n = self.grid.n();
        if len.iter().any(|&l| l == 0 || l > n) {
            return Err(GqkError::Precondition(format!(
                "box lengths {len:?} must lie in 1..={n}"
            )));
        }
        self.boxes
            .push(std::array::from_fn(|a| (start[a] % n, len[a])));
        Ok(self)
    }

    /// Adds the half-open box `[lo, hi)`; edges must sit on lattice points.
    pub fn with_box(self, lo: Vec3, hi: Vec3) -> Result<Self> {
        let grid = self.grid;
        let half = 0.5 * grid.box_length();
        let mut start = [0usize; 3];
        let mut len = [0usize; 3];
        for a in 0..3 {
            if !(lo[a] < hi[a]) || lo[a] < -half || hi[a] > half {
                return Err(GqkError::Precondition(format!(
                    "box axis {} interval [{}, {}) is empty or leaves the box",
                    a + 1,
                    lo[a],
                    hi[a]
                )));
            }
            if !grid.is_lattice_offset(lo[a] + half) || !grid.is_lattice_offset(hi[a] + half) {
                return Err(GqkError::NonLattice(format!(
                    "box edges on axis {} are not lattice points",
                    a + 1
                )));
            }
            start[a] = grid.lattice_steps(lo[a] + half) as usize;
            len[a] = grid.lattice_steps(hi[a] - lo[a]) as usize;
        }
        self.with_index_box(start, len)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn boxes(&self) -> &[[(usize, usize); 3]] {
        &self.boxes
    }

    pub fn contains_index(&self, idx: [usize; 3]) -> bool {
        let n = self.grid.n();
        self.boxes.iter().any(|b| {
            (0..3).all(|a| (idx[a] + n - b[a].0) % n < b[a].1)
        })
    }

    /// `R(Δ) + a` for a lattice rotation and lattice translation.
    pub fn transformed(&self, g: &GroupElement) -> Result<BoxRegion> {
        let p = g.rot.lattice_matrix().ok_or_else(|| {
            GqkError::NonLattice("rotation is not a lattice rotation".into())
        })?;
        if !g.a.iter().all(|&c| self.grid.is_lattice_offset(c)) {
            return Err(GqkError::NonLattice(format!(
                "translation {:?} is not a lattice vector",
                g.a
            )));
        }
        let n = self.grid.n() as i64;
        let steps = g.a.map(|c| self.grid.lattice_steps(c));
        let boxes = self
            .boxes
            .iter()
            .map(|b| {
                std::array::from_fn(|out_axis| {
                    // (R x)_out = sign · x_in
                    let in_axis = (0..3).find(|&k| p[out_axis][k] != 0).expect("permutation");
                    let (start, len) = b[in_axis];
                    let start = if p[out_axis][in_axis] > 0 {
                        start as i64
                    } else {
                        n - (start + len - 1) as i64
                    };
                    (((start + steps[out_axis]).rem_euclid(n)) as usize, len)
                })
            })
            .collect();
        Ok(BoxRegion {
            grid: self.grid,
            boxes,
        })
    }
}

/// `E(Δ)`: multiplication by the indicator of `Δ`.
pub fn projection_e(region: &BoxRegion, spin: SpinSpec) -> OperatorHandle {
    let grid = region.grid();
    let mask: Vec<bool> = (0..grid.points())
        .map(|p| region.contains_index(grid.unflatten(p)))
        .collect();
    OperatorHandle::new("E(Δ)", true, grid, spin, move |psi| {
        let d = psi.dim();
        let mut out = psi.clone();
        for (p, &inside) in mask.iter().enumerate() {
            if !inside {
                out.amplitudes_mut()[p * d..(p + 1) * d].fill(ZERO);
            }
        }
        out
    })
}

/// `max_ψ ‖(U_g E(Δ) U_g⁻¹ - E(R(Δ) + a)) ψ‖ / ‖ψ‖`.
pub fn imprimitivity_residual(
    rep: &GalileiRep,
    g: &GroupElement,
    region: &BoxRegion,
    states: &[State],
) -> Result<f64> {
    if states.is_empty() {
        return Err(GqkError::EmptyStateList);
    }
    if !g.rot.is_lattice() {
        return Err(GqkError::NonLattice("rotation is not a lattice rotation".into()));
    }
    let image = region.transformed(g)?;
    let e = projection_e(region, rep.spin());
    let e_image = projection_e(&image, rep.spin());
    let mut worst: f64 = 0.0;
    for psi in states {
        let lhs = rep.apply(g, &e.apply(&rep.apply_inverse(g, psi)?)?)?;
        let rhs = e_image.apply(psi)?;
        worst = worst.max((&lhs - &rhs).norm() / psi.norm());
    }
    Ok(worst)
}

/// `max_{α, ψ} ‖(U_g Q_α U_g⁻¹ - [g(Q)]_α) ψ‖ / ‖ψ‖` with `g(Q) = R⁻¹(Q - a)`.
pub fn covariance_residual(rep: &GalileiRep, g: &GroupElement, states: &[State]) -> Result<f64> {
    if states.is_empty() {
        return Err(GqkError::EmptyStateList);
    }
    let rinv = transpose(&g.rot.matrix());
    let mut worst: f64 = 0.0;
    for psi in states {
        let back = rep.apply_inverse(g, psi)?;
        for alpha in 0..3 {
            let lhs = rep.apply(g, &multiply_coordinate(&back, alpha, 1.0))?;
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

/// `max_{α, ψ} ‖(U_g P_α U_g⁻¹ - [g(P)]_α) ψ‖ / ‖ψ‖` with `g(P) = R⁻¹(P - μu)`.
pub fn momentum_covariance_residual(
    rep: &GalileiRep,
    g: &GroupElement,
    states: &[State],
) -> Result<f64> {
    if states.is_empty() {
        return Err(GqkError::EmptyStateList);
    }
    let rinv = transpose(&g.rot.matrix());
    let mu = rep.mu();
    let mut worst: f64 = 0.0;
    for psi in states {
        let back = rep.apply_inverse(g, psi)?;
        for alpha in 0..3 {
            let lhs = rep.apply(g, &apply_momentum(&back, alpha))?;
            let mut rhs = psi * ZERO;
            for b in 0..3 {
                let c = rinv[alpha][b];
                if c != 0.0 {
                    rhs.axpy(C64::new(c, 0.0), &apply_momentum(psi, b));
                    rhs.axpy(C64::new(-c * mu * g.u[b], 0.0), psi);
                }
            }
            worst = worst.max((&lhs - &rhs).norm() / psi.norm());
        }
    }
    Ok(worst)
}

/// `f(A) ψ` for the polynomial `f(x) = Σ c_k x^k` (Horner order).
pub fn polynomial_apply(a: &OperatorHandle, coeffs: &[f64], psi: &State) -> Result<State> {
    let mut acc = psi * ZERO;
    for &c in coeffs.iter().rev() {
        acc = a.apply(&acc)?;
        acc.axpy(C64::new(c, 0.0), psi);
    }
    Ok(acc)
}

/// `max_ψ ‖(S[f(A)] - f(S[A])) ψ‖ / ‖ψ‖` for `S[X] = U_g X U_g⁻¹`.
pub fn functional_residual(
    rep: &GalileiRep,
    g: &GroupElement,
    a: &OperatorHandle,
    coeffs: &[f64],
    states: &[State],
) -> Result<f64> {
    if states.is_empty() {
        return Err(GqkError::EmptyStateList);
    }
    let conj = a.conjugated_by(&rep.unitary(g)?, &rep.unitary_inverse(g)?)?;
    let mut worst: f64 = 0.0;
    for psi in states {
        let lhs = rep.apply(g, &polynomial_apply(a, coeffs, &rep.apply_inverse(g, psi)?)?)?;
        let rhs = polynomial_apply(&conj, coeffs, psi)?;
        worst = worst.max((&lhs - &rhs).norm() / psi.norm());
    }
    Ok(worst)
}

/// Samples of `d(S_{g(τ)}[D], S_{g(τ0)}[D])` along a path of group elements.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuityTable {
    pub tau0: f64,
    pub rows: Vec<(f64, f64)>,
    /// Fit of `log d` against `log |τ - τ0|` (absent when all distances vanish).
    pub fit: Option<LineFit>,
    /// `d` shrinks toward zero as `τ → τ0`.
    pub converges: bool,
}

pub fn continuity_probe(
    rep: &GalileiRep,
    path: impl Fn(f64) -> GroupElement,
    tau0: f64,
    taus: &[f64],
    ray: &RayProjector,
) -> Result<ContinuityTable> {
    let psi = ray.state();
    let base = RayProjector::new(rep.apply(&path(tau0), psi)?.normalized()?)?;
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let moved = RayProjector::new(rep.apply(&path(tau), psi)?.normalized()?)?;
        rows.push((tau, ray_distance(&base, &moved)?));
    }
    let offsets: Vec<f64> = rows.iter().map(|r| (r.0 - tau0).abs()).collect();
    let dists: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fit = log_log_fit(&offsets, &dists);
    let all_zero = dists.iter().all(|&d| d <= 1e-12);
    let converges = all_zero || fit.map_or(false, |f| f.slope > 0.5 && f.r2 >= 0.9);
    Ok(ContinuityTable {
        tau0,
        rows,
        fit,
        converges,
    })
}

/// `U_g Ψ = ψ` up to phase for the identity element (used by sanity checks).
pub fn identity_defect(rep: &GalileiRep, psi: &State) -> Result<f64> {
    let out = rep.apply(&GroupElement::identity(), psi)?;
    Ok((&out - psi).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{gaussian_packet, standard_states, ONE};

    fn rep(two_s: u32) -> GalileiRep {
        GalileiRep::new(GridSpec::new(32, 16.0).unwrap(), SpinSpec::new(two_s), 1.0).unwrap()
    }

    #[test]
    fn twenty_four_distinct_lattice_rotations() {
        let rots = lattice_rotations();
        assert_eq!(rots.len(), 24);
        for (i, (ni, ri)) in rots.iter().enumerate() {
            assert!(ri.is_lattice(), "{ni}");
            for (nj, rj) in &rots[i + 1..] {
                assert_ne!(ri.lattice_matrix(), rj.lattice_matrix(), "{ni} == {nj}");
            }
        }
    }

    #[test]
    fn group_axioms() {
        let r = Rotation::from_axis_angle([0.3, -1.0, 0.5], 0.7).unwrap();
        let g = GroupElement::new([0.5, -1.0, 2.0], r, [0.1, 0.2, -0.3]);
        let e = GroupElement::identity();
        assert!(e.compose(&g).distance(&g) < 1e-15);
        assert!(g.compose(&g.inverse()).distance(&e) < 1e-12);
        let t = GroupElement::translation([1.0, 2.0, 3.0])
            .compose(&GroupElement::translation([0.5, 0.0, -1.0]));
        assert_eq!(t.a, [1.5, 2.0, 2.0]);
    }

    #[test]
    fn quarter_turn_about_x3() {
        let g = GroupElement::rotation(lattice_rotation("z90").unwrap());
        // passive action with R⁻¹: (1, 0, 0) ↦ (0, -1, 0)
        let y = g.act_on_point([1.0, 0.0, 0.0]);
        assert!((y[0]).abs() < 1e-15 && (y[1] + 1.0).abs() < 1e-15);
        let b = GroupElement::boost([0.5, 0.0, 0.0]);
        assert_eq!(b.act_on_point([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0]);
        assert_eq!(b.act_on_point_t([1.0, 2.0, 3.0], 2.0), [0.0, 2.0, 3.0]);
    }

    #[test]
    fn identity_acts_trivially() {
        let rep = rep(1);
        let psi = standard_states(rep.grid(), rep.spin(), 1, 1).remove(0);
        assert_eq!(identity_defect(&rep, &psi).unwrap(), 0.0);
    }

    #[test]
    fn index_roll_matches_spectral_translation() {
        let rep = rep(0);
        let psi = standard_states(rep.grid(), rep.spin(), 2, 1).remove(0);
        let a = [0.5, -1.0, 1.5];
        let rolled = rep.translate(a, &psi);
        let spectral = translate_spectral(&psi, a);
        assert!((&rolled - &spectral).norm() < 1e-12);
    }

    #[test]
    fn spin_rotor_is_a_double_cover() {
        let mats = SpinMatrices::new(1);
        let full = Rotation::from_axis_angle([0.0, 0.0, 1.0], 2.0 * PI).unwrap();
        let rotor = full.spin_rotor(&mats);
        let minus = CMatrix::identity(2, 2) * C64::new(-1.0, 0.0);
        assert!((rotor - minus).norm() < 1e-12);
    }

    #[test]
    fn non_lattice_rotation_needs_interpolation() {
        let rep = rep(0);
        let psi = standard_states(rep.grid(), rep.spin(), 2, 1).remove(0);
        let g = GroupElement::rotation(Rotation::from_axis_angle([0.0, 0.0, 1.0], 0.3).unwrap());
        assert!(matches!(rep.apply(&g, &psi), Err(GqkError::NonLatticeRotation)));
        let rep = rep.with_interpolation(true);
        let out = rep.apply(&g, &psi).unwrap();
        assert!((out.norm() - 1.0).abs() < 0.05);
    }

    #[test]
    fn multiplier_of_boost_then_translation() {
        let rep = rep(1);
        let states = standard_states(rep.grid(), rep.spin(), 4, 2);
        let u = rep.quantized_boost([1, 0, 0]);
        let g1 = GroupElement::boost(u);
        let g2 = GroupElement::translation([1.5, 0.0, 0.0]);
        let m = multiplier_extract(&rep, &g1, &g2, &states[0], &states[1]).unwrap();
        assert!(m.modulus_defect < 1e-12);
        assert!((m.value() - predicted_multiplier(1.0, &g1, &g2)).norm() < 1e-12);
        assert!((m.phase() + u[0] * 1.5).abs() < 1e-12);
    }

    #[test]
    fn box_transform_tracks_rotation() {
        let g = GridSpec::new(8, 8.0).unwrap();
        let region = BoxRegion::empty(g).with_box([0.0, -2.0, -1.0], [3.0, 1.0, 2.0]).unwrap();
        let rot = GroupElement::rotation(lattice_rotation("z90").unwrap());
        let image = region.transformed(&rot).unwrap();
        for p in 0..g.points() {
            let x = g.coords(p);
            // point x is in R(Δ) iff R⁻¹x ∈ Δ
            let back = rot.act_on_point(x);
            let idx: [usize; 3] = std::array::from_fn(|a| {
                ((back[a] + 4.0) / g.spacing()).round().rem_euclid(8.0) as usize
            });
            assert_eq!(image.contains_index(g.unflatten(p)), region.contains_index(idx));
        }
    }

    #[test]
    fn packet_translation_shifts_mean_position() {
        let rep = rep(0);
        let psi = gaussian_packet(rep.grid(), rep.spin(), [0.0; 3], [0.0; 3], 1.0, &[ONE]).unwrap();
        let h = rep.grid().spacing();
        let moved = rep.apply(&GroupElement::translation([h, 0.0, 0.0]), &psi).unwrap();
        let q = crate::operators::expectation(&crate::operators::position_op(rep.grid(), rep.spin(), 0), &moved)
            .unwrap();
        assert!((q.re - h).abs() < 1e-8);
    }
}
