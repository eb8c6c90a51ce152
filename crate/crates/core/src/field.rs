//! Hermitian-matrix-valued fields on the position lattice.
//!
//! [`LatticeField`] is the sampled form used by every operator; [`FieldSpec`]
//! is the closed-form description read from config files.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{GqkError, Result};
use crate::grid::{GridSpec, SpinSpec, State, I, ZERO};
use crate::operators::SpinMatrices;
use crate::spectral;

pub type CMatrix = DMatrix<C64>;

/// A `dim × dim` complex matrix per lattice point, row-major per point.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    grid: GridSpec,
    dim: usize,
    data: Vec<C64>,
}

impl LatticeField {
    pub fn zeros(grid: GridSpec, dim: usize) -> Self {
        Self {
            grid,
            dim,
            data: vec![ZERO; grid.points() * dim * dim],
        }
    }

    pub fn from_raw(grid: GridSpec, dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != grid.points() * dim * dim {
            return Err(GqkError::SpecMismatch(format!(
                "field table has {} entries, expected {}",
                data.len(),
                grid.points() * dim * dim
            )));
        }
        Ok(Self { grid, dim, data })
    }

    pub fn from_fn(grid: GridSpec, dim: usize, f: impl Fn([f64; 3]) -> CMatrix) -> Self {
        let mut data = Vec::with_capacity(grid.points() * dim * dim);
        for p in 0..grid.points() {
            let m = f(grid.coords(p));
            assert_eq!(m.nrows(), dim, "field value has wrong dimension");
            for r in 0..dim {
                for c in 0..dim {
                    data.push(m[(r, c)]);
                }
            }
        }
        Self { grid, dim, data }
    }

    /// `f(x)` times the identity.
    pub fn scalar_fn(grid: GridSpec, dim: usize, f: impl Fn([f64; 3]) -> f64) -> Self {
        let mut out = Self::zeros(grid, dim);
        for p in 0..grid.points() {
            let v = C64::new(f(grid.coords(p)), 0.0);
            for r in 0..dim {
                out.data[(p * dim + r) * dim + r] = v;
            }
        }
        out
    }

    pub fn constant(grid: GridSpec, m: &CMatrix) -> Self {
        Self::from_fn(grid, m.nrows(), |_| m.clone())
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn raw(&self) -> &[C64] {
        &self.data
    }

    fn block(&self, p: usize) -> &[C64] {
        let dd = self.dim * self.dim;
        &self.data[p * dd..(p + 1) * dd]
    }

    pub fn at(&self, p: usize) -> CMatrix {
        CMatrix::from_row_slice(self.dim, self.dim, self.block(p))
    }

    fn check_state(&self, psi: &State) -> Result<()> {
        psi.ensure_position()?;
        if psi.grid() != self.grid || psi.dim() != self.dim {
            return Err(GqkError::SpecMismatch(format!(
                "field (n = {}, dim {}) applied to state (n = {}, dim {})",
                self.grid.n(),
                self.dim,
                psi.grid().n(),
                psi.dim()
            )));
        }
        Ok(())
    }

    /// Pointwise `(M ψ)(x) = M(x) ψ(x)`.
    pub fn apply(&self, psi: &State) -> Result<State> {
        self.check_state(psi)?;
        Ok(self.apply_unchecked(psi))
    }

    pub(crate) fn apply_unchecked(&self, psi: &State) -> State {
        let d = self.dim;
        let mut out = psi.clone();
        let src = psi.amplitudes();
        let dst = out.amplitudes_mut();
        for p in 0..self.grid.points() {
            let m = self.block(p);
            for r in 0..d {
                let mut acc = ZERO;
                for c in 0..d {
                    acc += m[r * d + c] * src[p * d + c];
                }
                dst[p * d + r] = acc;
            }
        }
        out
    }

    fn zip_with(&self, other: &LatticeField, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.ensure_same_shape(other)?;
        Ok(Self {
            grid: self.grid,
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    fn ensure_same_shape(&self, other: &LatticeField) -> Result<()> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(GqkError::SpecMismatch(
                "fields live on different grids or spin spaces".to_string(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &LatticeField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &LatticeField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            grid: self.grid,
            dim: self.dim,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    /// Pointwise matrix product `A(x) B(x)`.
    pub fn product(&self, other: &LatticeField) -> Result<Self> {
        self.ensure_same_shape(other)?;
        let d = self.dim;
        let mut out = Self::zeros(self.grid, d);
        for p in 0..self.grid.points() {
            let (a, b) = (self.block(p), other.block(p));
            let base = p * d * d;
            for r in 0..d {
                for c in 0..d {
                    let mut acc = ZERO;
                    for k in 0..d {
                        acc += a[r * d + k] * b[k * d + c];
                    }
                    out.data[base + r * d + c] = acc;
                }
            }
        }
        Ok(out)
    }

    /// Pointwise commutator `[A(x), B(x)]`.
    pub fn commutator(&self, other: &LatticeField) -> Result<Self> {
        self.product(other)?.sub(&other.product(self)?)
    }

    /// Spectral derivative `∂/∂x_axis`, entrywise (`axis` is 0-based).
    pub fn derivative(&self, axis: usize) -> Self {
        let grid = self.grid;
        let n = grid.n();
        let data = spectral::axis_multiplier(&self.data, n, self.dim * self.dim, axis, |j| {
            // The Nyquist mode has no antisymmetric partner; drop it.
            if j == n / 2 {
                ZERO
            } else {
                I * grid.wavenumber(j)
            }
        });
        Self {
            grid,
            dim: self.dim,
            data,
        }
    }

    /// Largest Frobenius norm over the lattice.
    pub fn max_norm(&self) -> f64 {
        let dd = self.dim * self.dim;
        self.data
            .chunks(dd)
            .map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest `‖M(x) - M(x)†‖_F` over the lattice.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for p in 0..self.grid.points() {
            let b = self.block(p);
            let mut acc = 0.0;
            for r in 0..d {
                for c in 0..d {
                    acc += (b[r * d + c] - b[c * d + r].conj()).norm_sqr();
                }
            }
            worst = worst.max(acc.sqrt());
        }
        worst
    }

    pub fn ensure_hermitian(&self, what: &str) -> Result<()> {
        let defect = self.hermitian_defect();
        if defect > 1e-12 {
            return Err(GqkError::NonHermitian(format!(
                "{what}: defect {defect:.3e}"
            )));
        }
        Ok(())
    }

    /// Largest deviation from the value at the first lattice point.
    pub fn variation(&self) -> f64 {
        let first = self.block(0).to_vec();
        let dd = self.dim * self.dim;
        self.data
            .chunks(dd)
            .map(|b| {
                b.iter()
                    .zip(&first)
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Pointwise unitary `exp(i c M(x))` of a Hermitian field.
    pub fn exp_i(&self, c: f64) -> Self {
        let d = self.dim;
        if d == 1 {
            return Self {
                grid: self.grid,
                dim: 1,
                data: self.data.iter().map(|z| (I * c * z.re).exp()).collect(),
            };
        }
        let mut out = Self::zeros(self.grid, d);
        for p in 0..self.grid.points() {
            let u = hermitian_exp_i(&self.at(p), c);
            for r in 0..d {
                for col in 0..d {
                    out.data[(p * d + r) * d + col] = u[(r, col)];
                }
            }
        }
        out
    }
}

/// `exp(i c H)` for a Hermitian matrix `H`.
pub fn hermitian_exp_i(h: &CMatrix, c: f64) -> CMatrix {
    let d = h.nrows();
    if d == 1 {
        return CMatrix::from_element(1, 1, (I * c * h[(0, 0)].re).exp());
    }
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let phases = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        eig.eigenvalues.iter().map(|&l| (I * c * l).exp()),
    ));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// Spatial profile of one closed-form field term. Axes are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    Const,
    /// `x1^p1 x2^p2 x3^p3` in lattice coordinates.
    Poly { powers: [u32; 3] },
    /// `sin(2π m x_axis / L)`.
    Sin { axis: usize, mode: i32 },
    /// `cos(2π m x_axis / L)`.
    Cos { axis: usize, mode: i32 },
    /// `exp(-|x - c|² / (2 w²))`.
    Gaussian { center: [f64; 3], width: f64 },
}

impl Profile {
    pub fn eval(&self, grid: &GridSpec, x: [f64; 3]) -> f64 {
        match self {
            Profile::Const => 1.0,
            Profile::Poly { powers } => (0..3).map(|a| x[a].powi(powers[a] as i32)).product(),
            Profile::Sin { axis, mode } => {
                (2.0 * PI * *mode as f64 * x[axis - 1] / grid.box_length()).sin()
            }
            Profile::Cos { axis, mode } => {
                (2.0 * PI * *mode as f64 * x[axis - 1] / grid.box_length()).cos()
            }
            Profile::Gaussian { center, width } => {
                let r2: f64 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum();
                (-r2 / (2.0 * width * width)).exp()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Profile::Sin { axis, .. } | Profile::Cos { axis, .. } if !(1..=3).contains(axis) => {
                Err(GqkError::Config(format!("profile axis {axis} not in 1..=3")))
            }
            Profile::Gaussian { width, .. } if *width <= 0.0 => {
                Err(GqkError::Config("gaussian width must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Spin-space coefficient of a field term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinCoefficient {
    #[default]
    Id,
    S1,
    S2,
    S3,
}

impl SpinCoefficient {
    pub fn matrix(self, spin: &SpinMatrices) -> CMatrix {
        match self {
            SpinCoefficient::Id => CMatrix::identity(spin.dim(), spin.dim()),
            SpinCoefficient::S1 => spin.s(0).clone(),
            SpinCoefficient::S2 => spin.s(1).clone(),
            SpinCoefficient::S3 => spin.s(2).clone(),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldTerm {
    #[serde(flatten)]
    pub profile: Profile,
    #[serde(default = "one")]
    pub coef: f64,
    #[serde(default)]
    pub spin: SpinCoefficient,
}

impl FieldTerm {
    pub fn new(profile: Profile, coef: f64) -> Self {
        Self {
            profile,
            coef,
            spin: SpinCoefficient::Id,
        }
    }

    pub fn with_spin(mut self, spin: SpinCoefficient) -> Self {
        self.spin = spin;
        self
    }
}

/// Sum of closed-form terms `coef · profile(x) · spin-matrix`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldSpec {
    pub terms: Vec<FieldTerm>,
}

impl FieldSpec {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn term(profile: Profile, coef: f64) -> Self {
        Self {
            terms: vec![FieldTerm::new(profile, coef)],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::term(Profile::Const, c)
    }

    pub fn plus(mut self, term: FieldTerm) -> Self {
        self.terms.push(term);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coef == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.profile.validate())
    }

    pub fn sample(&self, grid: GridSpec, spin: SpinSpec) -> Result<LatticeField> {
        self.validate()?;
        let mats = SpinMatrices::new(spin.two_s());
        let coefs: Vec<(f64, CMatrix)> = self
            .terms
            .iter()
            .map(|t| (t.coef, t.spin.matrix(&mats)))
            .collect();
        let d = spin.dim();
        Ok(LatticeField::from_fn(grid, d, |x| {
            let mut m = CMatrix::zeros(d, d);
            for (t, (coef, s)) in self.terms.iter().zip(&coefs) {
                let v = coef * t.profile.eval(&grid, x);
                if v != 0.0 {
                    m += s * C64::new(v, 0.0);
                }
            }
            m
        }))
    }
}

/// Samples three field specs (one per axis).
pub fn sample_triple(
    specs: &[FieldSpec; 3],
    grid: GridSpec,
    spin: SpinSpec,
) -> Result<[LatticeField; 3]> {
    Ok([
        specs[0].sample(grid, spin)?,
        specs[1].sample(grid, spin)?,
        specs[2].sample(grid, spin)?,
    ])
}
