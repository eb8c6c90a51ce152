//! Periodic-grid model of square-integrable spinor fields on three-space.
//!
//! A [`GridSpec`] fixes the torus (`n` points per axis, side `L`); a
//! [`SpinSpec`] fixes the internal space `C^(2s+1)`. A [`State`] carries
//! amplitudes on both in either the position or the momentum
//! representation. Units have `ħ = 1`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GqkError, Result};
use crate::spectral;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Tolerance used for the "is this state normalized" contract.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    box_length: f64,
}

impl GridSpec {
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(GqkError::InvalidGrid(format!(
                "n = {n} is not a power of two >= 4"
            )));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(GqkError::InvalidGrid(format!(
                "box length {box_length} must be positive"
            )));
        }
        Ok(Self { n, box_length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Largest representable momentum, `π n / L`.
    pub fn k_max(&self) -> f64 {
        PI * self.n as f64 / self.box_length
    }

    /// Momentum lattice spacing `2π / L`.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    pub fn points(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Position lattice coordinate `-L/2 + i h`.
    pub fn position(&self, i: usize) -> f64 {
        -0.5 * self.box_length + i as f64 * self.spacing()
    }

    /// Momentum of FFT-ordered index `j` along one axis.
    pub fn wavenumber(&self, j: usize) -> f64 {
        self.dk() * spectral::mode_number(j, self.n) as f64
    }

    /// Momentum of the centered index `j`, i.e. `k_(j - n/2)`.
    pub fn centered_wavenumber(&self, j: usize) -> f64 {
        self.dk() * (j as f64 - (self.n / 2) as f64)
    }

    /// Splits a point index into its `(i1, i2, i3)` lattice coordinates.
    pub fn unflatten(&self, p: usize) -> [usize; 3] {
        let n = self.n;
        [p % n, (p / n) % n, p / (n * n)]
    }

    pub fn flatten(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.n + idx[1]) * self.n + idx[0]
    }

    /// Cartesian coordinates of point `p`.
    pub fn coords(&self, p: usize) -> [f64; 3] {
        let [i1, i2, i3] = self.unflatten(p);
        [self.position(i1), self.position(i2), self.position(i3)]
    }

    /// Momenta of point `p` interpreted in FFT order.
    pub fn momenta_fft(&self, p: usize) -> [f64; 3] {
        let [j1, j2, j3] = self.unflatten(p);
        [self.wavenumber(j1), self.wavenumber(j2), self.wavenumber(j3)]
    }

    /// Whether `x` is an integer multiple of the spacing (to 1e-9 relative).
    pub fn is_lattice_offset(&self, x: f64) -> bool {
        let r = x / self.spacing();
        (r - r.round()).abs() < 1e-9
    }

    pub fn lattice_steps(&self, x: f64) -> i64 {
        (x / self.spacing()).round() as i64
    }
}

/// Checks and returns the grid for `n` points per axis on a box of side `box_length`.
pub fn make_grid(n: usize, box_length: f64) -> Result<GridSpec> {
    GridSpec::new(n, box_length)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinSpec {
    two_s: u32,
}

impl SpinSpec {
    pub fn new(two_s: u32) -> Self {
        Self { two_s }
    }

    pub fn two_s(&self) -> u32 {
        self.two_s
    }

    pub fn spin(&self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    Position,
    Momentum,
}

impl Representation {
    pub fn tag(self) -> u8 {
        match self {
            Representation::Position => 0,
            Representation::Momentum => 1,
        }
    }
}

/// Amplitudes over grid × spin.
///
/// In the momentum representation the grid index `j` along each axis is
/// centered: it labels `k_(j - n/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    grid: GridSpec,
    spin: SpinSpec,
    rep: Representation,
    amps: Vec<C64>,
}

impl State {
    pub fn zeros(grid: GridSpec, spin: SpinSpec) -> Self {
        Self {
            grid,
            spin,
            rep: Representation::Position,
            amps: vec![ZERO; grid.points() * spin.dim()],
        }
    }

    pub fn from_amplitudes(
        grid: GridSpec,
        spin: SpinSpec,
        rep: Representation,
        amps: Vec<C64>,
    ) -> Result<Self> {
        let expected = grid.points() * spin.dim();
        if amps.len() != expected {
            return Err(GqkError::SpecMismatch(format!(
                "amplitude array has length {}, expected {expected}",
                amps.len()
            )));
        }
        Ok(Self {
            grid,
            spin,
            rep,
            amps,
        })
    }

    /// Position-space state sampled from `f(x, spin_index)`.
    pub fn from_fn(grid: GridSpec, spin: SpinSpec, f: impl Fn([f64; 3], usize) -> C64) -> Self {
        let d = spin.dim();
        let mut amps = Vec::with_capacity(grid.points() * d);
        for p in 0..grid.points() {
            let x = grid.coords(p);
            for s in 0..d {
                amps.push(f(x, s));
            }
        }
        Self {
            grid,
            spin,
            rep: Representation::Position,
            amps,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn spin(&self) -> SpinSpec {
        self.spin
    }

    pub fn representation(&self) -> Representation {
        self.rep
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    /// Spinor at grid point `p`.
    pub fn spinor(&self, p: usize) -> &[C64] {
        let d = self.dim();
        &self.amps[p * d..(p + 1) * d]
    }

    pub fn spinor_mut(&mut self, p: usize) -> &mut [C64] {
        let d = self.dim();
        &mut self.amps[p * d..(p + 1) * d]
    }

    /// Integration weight per sample of the current representation.
    pub fn measure(&self) -> f64 {
        match self.rep {
            Representation::Position => self.grid.cell_volume(),
            Representation::Momentum => self.grid.dk().powi(3),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.measure()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let nrm = self.norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(GqkError::NotNormalized(nrm));
        }
        Ok(self * C64::new(1.0 / nrm, 0.0))
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORM_TOL
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(GqkError::NotNormalized(self.norm()))
        }
    }

    /// Errors unless `other` lives on the same grid, spin space and representation.
    pub fn ensure_compatible(&self, other: &State) -> Result<()> {
        if self.grid != other.grid {
            return Err(GqkError::SpecMismatch(format!(
                "grids differ: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        if self.spin != other.spin {
            return Err(GqkError::SpecMismatch(format!(
                "spin spaces differ: 2s = {} vs {}",
                self.spin.two_s, other.spin.two_s
            )));
        }
        if self.rep != other.rep {
            return Err(GqkError::SpecMismatch(
                "representation tags differ".to_string(),
            ));
        }
        Ok(())
    }

    pub fn ensure_position(&self) -> Result<()> {
        match self.rep {
            Representation::Position => Ok(()),
            Representation::Momentum => Err(GqkError::SpecMismatch(
                "operator expects a position-space state".to_string(),
            )),
        }
    }

    /// Multiplies every spinor by the scalar `f(x)`.
    pub fn map_position(&self, f: impl Fn([f64; 3]) -> C64) -> Self {
        let mut out = self.clone();
        let d = self.dim();
        for p in 0..self.grid.points() {
            let c = f(self.grid.coords(p));
            for v in &mut out.amps[p * d..(p + 1) * d] {
                *v *= c;
            }
        }
        out
    }

    /// `self + c * other`, in place.
    pub fn axpy(&mut self, c: C64, other: &State) {
        assert_eq!(self.amps.len(), other.amps.len(), "state shape mismatch");
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += c * b;
        }
    }

    /// Largest spinor norm among samples within `margin` lattice sites of the box faces.
    pub fn boundary_weight(&self, margin: usize) -> f64 {
        let n = self.grid.n;
        let near = |i: usize| i < margin || i + margin >= n;
        (0..self.grid.points())
            .filter(|&p| {
                let [i1, i2, i3] = self.grid.unflatten(p);
                near(i1) || near(i2) || near(i3)
            })
            .map(|p| self.spinor(p).iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

impl Add for &State {
    type Output = State;
    fn add(self, rhs: &State) -> State {
        let mut out = self.clone();
        out.axpy(ONE, rhs);
        out
    }
}

impl Sub for &State {
    type Output = State;
    fn sub(self, rhs: &State) -> State {
        let mut out = self.clone();
        out.axpy(-ONE, rhs);
        out
    }
}

impl Mul<C64> for &State {
    type Output = State;
    fn mul(self, c: C64) -> State {
        let mut out = self.clone();
        for a in &mut out.amps {
            *a *= c;
        }
        out
    }
}

impl Mul<f64> for &State {
    type Output = State;
    fn mul(self, c: f64) -> State {
        self * C64::new(c, 0.0)
    }
}

/// `⟨ψ|φ⟩` with the representation's measure; conjugate-linear in `psi`.
pub fn inner_product(psi: &State, phi: &State) -> Result<C64> {
    psi.ensure_compatible(phi)?;
    Ok(raw_inner(psi, phi))
}

pub(crate) fn raw_inner(psi: &State, phi: &State) -> C64 {
    let sum: C64 = psi
        .amps
        .iter()
        .zip(&phi.amps)
        .map(|(a, b)| a.conj() * b)
        .sum();
    sum * psi.measure()
}

/// `(h / sqrt(2π))^3`, the factor that makes the DFT approximate the
/// continuum unitary Fourier transform.
fn fourier_scale(grid: &GridSpec) -> f64 {
    (grid.spacing() / (2.0 * PI).sqrt()).powi(3)
}

/// Unitary transform to the momentum representation.
///
/// `ψ̂(k) = (h/√(2π))³ Σ_x ψ(x) e^{-i k·x}`, which approximates the
/// continuum Fourier amplitude and preserves the norm exactly.
pub fn to_momentum(psi: &State) -> Result<State> {
    psi.ensure_position()?;
    let grid = psi.grid;
    let n = grid.n;
    let d = psi.dim();
    let mut raw = psi.amps.clone();
    spectral::fft3(&mut raw, n, d, false);
    let scale = fourier_scale(&grid);
    let mut out = vec![ZERO; raw.len()];
    for p in 0..grid.points() {
        let jf = grid.unflatten(p);
        let mut parity = 0i64;
        let mut jc = [0usize; 3];
        for a in 0..3 {
            let m = spectral::mode_number(jf[a], n);
            parity += m;
            jc[a] = (m + (n / 2) as i64) as usize;
        }
        let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let q = grid.flatten(jc);
        for s in 0..d {
            out[q * d + s] = raw[p * d + s] * (sign * scale);
        }
    }
    Ok(State {
        grid,
        spin: psi.spin,
        rep: Representation::Momentum,
        amps: out,
    })
}

/// Inverse of [`to_momentum`].
pub fn to_position(psi: &State) -> Result<State> {
    if psi.rep != Representation::Momentum {
        return Err(GqkError::SpecMismatch(
            "to_position expects a momentum-space state".to_string(),
        ));
    }
    let grid = psi.grid;
    let n = grid.n;
    let d = psi.dim();
    let scale = 1.0 / (fourier_scale(&grid) * grid.points() as f64);
    let mut raw = vec![ZERO; psi.amps.len()];
    for q in 0..grid.points() {
        let jc = grid.unflatten(q);
        let mut parity = 0i64;
        let mut jf = [0usize; 3];
        for a in 0..3 {
            let m = jc[a] as i64 - (n / 2) as i64;
            parity += m;
            jf[a] = m.rem_euclid(n as i64) as usize;
        }
        let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let p = grid.flatten(jf);
        for s in 0..d {
            raw[p * d + s] = psi.amps[q * d + s] * (sign * scale);
        }
    }
    spectral::fft3(&mut raw, n, d, true);
    Ok(State {
        grid,
        spin: psi.spin,
        rep: Representation::Position,
        amps: raw,
    })
}

/// Normalized Gaussian packet `∝ exp(-|x-x0|²/(4w²)) exp(i p0·x) χ`.
pub fn gaussian_packet(
    grid: GridSpec,
    spin: SpinSpec,
    x0: [f64; 3],
    p0: [f64; 3],
    width: f64,
    spinor: &[C64],
) -> Result<State> {
    if spinor.len() != spin.dim() {
        return Err(GqkError::SpecMismatch(format!(
            "spinor has {} components, spin space has {}",
            spinor.len(),
            spin.dim()
        )));
    }
    if width < 2.0 * grid.spacing() {
        return Err(GqkError::InvalidPacket(format!(
            "width {width} is below two lattice spacings ({})",
            2.0 * grid.spacing()
        )));
    }
    let p_abs = p0.iter().map(|p| p * p).sum::<f64>().sqrt();
    if p_abs > 0.5 * grid.k_max() {
        return Err(GqkError::InvalidPacket(format!(
            "|p0| = {p_abs} exceeds k_max/2 = {}",
            0.5 * grid.k_max()
        )));
    }
    let half = 0.5 * grid.box_length();
    for (a, &c) in x0.iter().enumerate() {
        if c - 4.0 * width < -half || c + 4.0 * width > half {
            return Err(GqkError::InvalidPacket(format!(
                "x0[{a}] = {c} ± 4·width leaves the box [-{half}, {half}]"
            )));
        }
    }
    let chi_norm = spinor.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if chi_norm == 0.0 {
        return Err(GqkError::InvalidPacket("zero spinor".to_string()));
    }
    let psi = State::from_fn(grid, spin, |x, s| {
        spinor[s] * gaussian_profile(x, x0, p0, width)
    });
    psi.normalized()
}

pub(crate) fn gaussian_profile(x: [f64; 3], x0: [f64; 3], p0: [f64; 3], width: f64) -> C64 {
    let mut r2 = 0.0;
    let mut phase = 0.0;
    for a in 0..3 {
        r2 += (x[a] - x0[a]).powi(2);
        phase += p0[a] * x[a];
    }
    C64::from_polar((-r2 / (4.0 * width * width)).exp(), phase)
}

/// Seeded generator of localized, band-limited test states.
///
/// Each state is a superposition of three Gaussian packets with random
/// complex weights and spinors. The envelope width balances position decay
/// at the box faces against momentum decay at the Nyquist edge, so both
/// tails sit near `exp(-π n / 4)`; centres and mean momenta are drawn
/// from small neighbourhoods of the origin.
#[derive(Clone, Debug)]
pub struct StateSampler {
    grid: GridSpec,
    spin: SpinSpec,
    rng: ChaCha8Rng,
}

impl StateSampler {
    pub fn new(grid: GridSpec, spin: SpinSpec, seed: u64) -> Self {
        Self {
            grid,
            spin,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Envelope width of the sampled packets.
    pub fn envelope_width(&self) -> f64 {
        self.grid.box_length() / (4.0 * PI * self.grid.n() as f64).sqrt()
    }

    pub fn sample(&mut self) -> State {
        let w = self.envelope_width();
        let x_span = 0.025 * self.grid.box_length();
        let p_span = 0.05 * self.grid.k_max();
        let d = self.spin.dim();
        let mut terms = Vec::new();
        for _ in 0..3 {
            let x0: [f64; 3] = std::array::from_fn(|_| self.rng.random_range(-x_span..x_span));
            let p0: [f64; 3] = std::array::from_fn(|_| self.rng.random_range(-p_span..p_span));
            let chi: Vec<C64> = (0..d)
                .map(|_| {
                    C64::new(
                        self.rng.random_range(-1.0..1.0),
                        self.rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            terms.push((x0, p0, chi));
        }
        let psi = State::from_fn(self.grid, self.spin, |x, s| {
            terms
                .iter()
                .map(|(x0, p0, chi)| chi[s] * gaussian_profile(x, *x0, *p0, w))
                .sum()
        });
        psi.normalized().expect("sampled state has nonzero norm")
    }

    pub fn sample_many(&mut self, count: usize) -> Vec<State> {
        (0..count).map(|_| self.sample()).collect()
    }
}

/// The standard localized test-state set for `(grid, spin, seed)`.
pub fn standard_states(grid: GridSpec, spin: SpinSpec, seed: u64, count: usize) -> Vec<State> {
    StateSampler::new(grid, spin, seed).sample_many(count)
}

/// The ray `|ψ⟩⟨ψ|` of a unit state.
#[derive(Clone, Debug)]
pub struct RayProjector {
    state: State,
}

impl RayProjector {
    pub fn new(state: State) -> Result<Self> {
        state.ensure_normalized()?;
        Ok(Self { state })
    }

    pub fn state(&self) -> &State {
        &self.state
    }
}

/// Ray distance `sqrt(2 (1 - |⟨ψ1|ψ2⟩|))`.
///
/// Evaluated as `min_λ ‖ψ1 - e^{iλ} ψ2‖`, which equals the formula for unit
/// states but does not lose half the digits to cancellation near zero.
pub fn ray_distance(d1: &RayProjector, d2: &RayProjector) -> Result<f64> {
    let overlap = inner_product(&d1.state, &d2.state)?;
    let phase = if overlap.norm() > 0.0 {
        overlap.conj() / overlap.norm()
    } else {
        ONE
    };
    let mut diff = d1.state.clone();
    diff.axpy(-phase, &d2.state);
    Ok(diff.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid32() -> GridSpec {
        make_grid(32, 16.0).unwrap()
    }

    #[test]
    fn grid_arithmetic() {
        let g = make_grid(8, 16.0).unwrap();
        assert_eq!(g.spacing(), 2.0);
        assert!((g.k_max() - PI / 2.0).abs() < 1e-15);
        let g = make_grid(4, 4.0).unwrap();
        let xs: Vec<f64> = (0..4).map(|i| g.position(i)).collect();
        assert_eq!(xs, vec![-2.0, -1.0, 0.0, 1.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(make_grid(6, 8.0), Err(GqkError::InvalidGrid(_))));
        assert!(matches!(make_grid(2, 8.0), Err(GqkError::InvalidGrid(_))));
        assert!(matches!(make_grid(8, 0.0), Err(GqkError::InvalidGrid(_))));
        assert!(matches!(make_grid(8, -1.0), Err(GqkError::InvalidGrid(_))));
    }

    #[test]
    fn packet_is_normalized() {
        let g = grid32();
        let s = SpinSpec::new(1);
        let chi = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let psi = gaussian_packet(g, s, [1.0, -0.5, 0.0], [0.3, 0.0, -0.2], 1.0, &chi).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn packet_preconditions() {
        let g = grid32();
        let s = SpinSpec::new(0);
        let one = [ONE];
        // width below two spacings
        assert!(gaussian_packet(g, s, [0.0; 3], [0.0; 3], 0.9, &one).is_err());
        // momentum beyond k_max / 2
        assert!(gaussian_packet(g, s, [0.0; 3], [3.3, 0.0, 0.0], 1.0, &one).is_err());
        // does not fit the box
        assert!(gaussian_packet(g, s, [5.0, 0.0, 0.0], [0.0; 3], 1.0, &one).is_err());
        // wrong spinor length
        assert!(gaussian_packet(g, s, [0.0; 3], [0.0; 3], 1.0, &[ONE, ONE]).is_err());
    }

    #[test]
    fn inner_product_basics() {
        let g = grid32();
        let s = SpinSpec::new(1);
        let mut sampler = StateSampler::new(g, s, 3);
        let a = sampler.sample();
        let b = sampler.sample();
        let aa = inner_product(&a, &a).unwrap();
        assert!(aa.im.abs() < 1e-15 && aa.re > 0.0);
        assert!((aa.re - a.norm_sqr()).abs() < 1e-14);
        let ab = inner_product(&a, &b).unwrap();
        let ba = inner_product(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-15);
        let other = State::zeros(g, SpinSpec::new(0));
        assert!(inner_product(&a, &other).is_err());
    }

    #[test]
    fn separated_packets_overlap_matches_closed_form() {
        // wide box so neither packet is clipped at the faces
        let g = make_grid(64, 32.0).unwrap();
        let s = SpinSpec::new(0);
        let w = 1.0;
        let a = gaussian_packet(g, s, [-4.0, 0.0, 0.0], [0.0; 3], w, &[ONE]).unwrap();
        let b = gaussian_packet(g, s, [4.0, 0.0, 0.0], [0.0; 3], w, &[ONE]).unwrap();
        let overlap = inner_product(&a, &b).unwrap().norm();
        // e^{-d²/(8w²)} with d = 8w
        let expected = (-8.0f64).exp();
        assert!((overlap - expected).abs() < 1e-12, "{overlap} vs {expected}");
    }

    #[test]
    fn fourier_round_trip_and_parseval() {
        let g = grid32();
        let s = SpinSpec::new(1);
        let psi = StateSampler::new(g, s, 11).sample();
        let k = to_momentum(&psi).unwrap();
        assert_eq!(k.representation(), Representation::Momentum);
        assert!((k.norm() - psi.norm()).abs() < 1e-12);
        let back = to_position(&k).unwrap();
        let diff = (&back - &psi).norm();
        assert!(diff < 1e-12, "round trip {diff}");
        assert!(to_position(&psi).is_err());
        assert!(to_momentum(&k).is_err());
    }

    #[test]
    fn plane_wave_concentrates_on_one_mode() {
        let g = make_grid(16, 8.0).unwrap();
        let s = SpinSpec::new(0);
        let m = [3i64, -2, 0];
        let kv: [f64; 3] = std::array::from_fn(|a| g.dk() * m[a] as f64);
        let psi = State::from_fn(g, s, |x, _| {
            C64::from_polar(1.0, kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2])
        });
        let k = to_momentum(&psi).unwrap();
        let target = g.flatten(std::array::from_fn(|a| (m[a] + 8) as usize));
        let total = k.norm_sqr();
        let peak = k.amplitudes()[target].norm_sqr() * k.measure();
        assert!((peak - total).abs() < 1e-10 * total);
    }

    #[test]
    fn gaussian_maps_to_gaussian_in_momentum() {
        let g = grid32();
        let s = SpinSpec::new(0);
        let w = 1.0;
        let p0 = [0.5, 0.0, -0.25];
        let psi = gaussian_packet(g, s, [0.0; 3], p0, w, &[ONE]).unwrap();
        let k = to_momentum(&psi).unwrap();
        // continuum pair: (2w²/π)^{3/4} exp(-w² |k - p0|²)
        let amp = (2.0 * w * w / PI).powf(0.75);
        let mut worst: f64 = 0.0;
        for q in 0..g.points() {
            let jc = g.unflatten(q);
            let kk: [f64; 3] = std::array::from_fn(|a| g.centered_wavenumber(jc[a]));
            let r2: f64 = (0..3).map(|a| (kk[a] - p0[a]).powi(2)).sum();
            let expected = amp * (-w * w * r2).exp();
            worst = worst.max((k.amplitudes()[q] - C64::new(expected, 0.0)).norm());
        }
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn ray_distance_values() {
        let g = grid32();
        let s = SpinSpec::new(1);
        let up = gaussian_packet(g, s, [0.0; 3], [0.0; 3], 1.0, &[ONE, ZERO]).unwrap();
        let down = gaussian_packet(g, s, [0.0; 3], [0.0; 3], 1.0, &[ZERO, ONE]).unwrap();
        let d_up = RayProjector::new(up.clone()).unwrap();
        let phased = RayProjector::new(&up * C64::from_polar(1.0, 0.7)).unwrap();
        assert!(ray_distance(&d_up, &phased).unwrap() < 1e-14);
        let d_down = RayProjector::new(down.clone()).unwrap();
        assert!((ray_distance(&d_up, &d_down).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        // overlap modulus 1/2
        let mix = &(&up * C64::new(0.5, 0.0)) + &(&down * C64::new(0.0, 0.75f64.sqrt()));
        let d_mix = RayProjector::new(mix).unwrap();
        assert!((ray_distance(&d_up, &d_mix).unwrap() - 1.0).abs() < 1e-12);
        assert!(RayProjector::new(&up * 2.0).is_err());
    }

    #[test]
    fn sampler_is_deterministic_and_localized() {
        let g = grid32();
        let s = SpinSpec::new(1);
        let a = standard_states(g, s, 42, 3);
        let b = standard_states(g, s, 42, 3);
        assert_eq!(a, b);
        for psi in &a {
            assert!((psi.norm() - 1.0).abs() < 1e-12);
            assert!(psi.boundary_weight(1) < 1e-8);
        }
    }
}
