//! Dense 1D matrix oracle on the periodic lattice `x_j = -L/2 + j h`.
//!
//! Everything here is built from explicit `N × N` matrices, independent of
//! the FFT-based operators in the engine.

#![allow(dead_code)]

use std::f64::consts::PI;

use gqk_core::GridSpec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

pub type M = DMatrix<C64>;
pub type V = DVector<C64>;

pub struct Oracle {
    pub n: usize,
    pub l: f64,
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    /// Unitary DFT, `F_{jm} = e^{-i k_j x_m} / √N`.
    pub f: M,
}

impl Oracle {
    pub fn new(n: usize, l: f64) -> Self {
        let grid = GridSpec::new(n, l).unwrap();
        let x: Vec<f64> = (0..n).map(|j| grid.position(j)).collect();
        let k: Vec<f64> = (0..n).map(|j| grid.wavenumber(j)).collect();
        let s = 1.0 / (n as f64).sqrt();
        let f = M::from_fn(n, n, |j, m| C64::from_polar(s, -k[j] * x[m]));
        Self { n, l, x, k, f }
    }

    pub fn diag(&self, d: impl Fn(usize) -> C64) -> M {
        M::from_diagonal(&V::from_fn(self.n, |j, _| d(j)))
    }

    /// `F⁻¹ diag(g(k)) F`.
    pub fn momentum_fn(&self, g: impl Fn(f64) -> C64) -> M {
        self.f.adjoint() * self.diag(|j| g(self.k[j])) * &self.f
    }

    pub fn q(&self) -> M {
        self.diag(|j| C64::new(self.x[j], 0.0))
    }

    pub fn p(&self) -> M {
        self.momentum_fn(|k| C64::new(k, 0.0))
    }

    /// `(Tψ)(x) = ψ(x - a)`.
    pub fn translation(&self, a: f64) -> M {
        self.momentum_fn(|k| C64::from_polar(1.0, -k * a))
    }

    /// `e^{iμux}`.
    pub fn boost(&self, mu: f64, u: f64) -> M {
        self.diag(|j| C64::from_polar(1.0, mu * u * self.x[j]))
    }

    /// `e^{-iHt}` for Hermitian `h`, by eigendecomposition.
    pub fn evolution(&self, h: &M, t: f64) -> M {
        let eig = SymmetricEigen::new(h.clone());
        let phases = M::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
        &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
    }

    /// `P²/(2μ) + Φ(x)`.
    pub fn hamiltonian(&self, mu: f64, phi: impl Fn(f64) -> f64) -> M {
        let kin = self.momentum_fn(|k| C64::new(k * k / (2.0 * mu), 0.0));
        kin + self.diag(|j| C64::new(phi(self.x[j]), 0.0))
    }

    /// Normalized Gaussian `exp(-(x-x0)²/(4w²) + i p0 x)` with unit `Σ|ψ|² h`.
    pub fn packet(&self, x0: f64, p0: f64, w: f64) -> V {
        let v = V::from_fn(self.n, |j, _| {
            let x = self.x[j];
            C64::from_polar((-(x - x0).powi(2) / (4.0 * w * w)).exp(), p0 * x)
        });
        let h = self.l / self.n as f64;
        let norm = (v.iter().map(|c| c.norm_sqr()).sum::<f64>() * h).sqrt();
        v / C64::new(norm, 0.0)
    }

    pub fn inner(&self, a: &V, b: &V) -> C64 {
        let h = self.l / self.n as f64;
        a.dotc(b) * h
    }

    pub fn expect(&self, op: &M, v: &V) -> C64 {
        self.inner(v, &(op * v))
    }

    /// `σ` from `U_{g1 g2} = σ U_{g1} U_{g2}` for `g1` a boost and `g2` a
    /// translation, extracted as `⟨U_{g1}U_{g2}ψ | U_{g1g2}ψ⟩`.
    pub fn boost_translation_multiplier(&self, mu: f64, u: f64, a: f64, psi: &V) -> C64 {
        let b = self.boost(mu, u);
        let t = self.translation(a);
        let lhs = &b * (&t * psi);
        let rhs = &t * (&b * psi);
        self.inner(&lhs, &rhs) / self.inner(psi, psi)
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.l
    }
}

pub fn max_abs(m: &M) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}
