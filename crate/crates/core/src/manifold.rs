//! The product-of-circles manifold `{x ∈ C^N : |x_i| = 1}`.
//!
//! Points are [`UnitModulusSequence`]s and tangent vectors are
//! [`TangentVector`]s that remember the point they are anchored at. The
//! metric is the real part of the complex Euclidean inner product, which makes
//! the manifold a Riemannian submanifold of `C^N ≅ R^{2N}`. The tangent space
//! at `x` is `{ξ : Re(ξ_i conj(x_i)) = 0}`, projection removes the radial
//! component entry by entry, the retraction normalizes every entry back onto
//! its circle, and vector transport is projection onto the target tangent
//! space.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Accepted deviation of `|x_i|` from one for a manifold point.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;
/// Accepted tangency residual `|Re(ξ_i conj(x_i))|`, relative to `max(1, |ξ_i|)`.
pub const TANGENT_TOL: f64 = 1e-10;
/// Two anchors are the same point when they agree entrywise to this tolerance.
pub const ANCHOR_TOL: f64 = 1e-12;
/// Below this modulus an entry of `x + ξ` cannot be normalized.
pub const DEGENERATE_MODULUS: f64 = 1e-14;

/// `Re(a^H b)`, the real inner product on `C^N`.
#[inline]
pub fn real_inner(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// `a^H b`.
#[inline]
pub fn conj_dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// A point on the manifold: a length-N complex vector with unit-modulus entries.
///
/// Cloning is cheap; the entries are shared.
#[derive(Clone, Debug)]
pub struct UnitModulusSequence {
    entries: Arc<[C64]>,
}

impl UnitModulusSequence {
    /// Wraps `entries` after checking every modulus is one to within
    /// [`UNIT_MODULUS_TOL`]. The values are kept bit for bit.
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("sequence length must be at least 1"));
        }
        for (index, z) in entries.iter().enumerate() {
            let modulus = z.norm();
            if !modulus.is_finite() || (modulus - 1.0).abs() > UNIT_MODULUS_TOL {
                return Err(Error::NotUnitModulus { index, modulus });
            }
        }
        Ok(Self {
            entries: entries.into(),
        })
    }

    /// Projects arbitrary nonzero entries onto their circles.
    pub fn normalized(entries: Vec<C64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("sequence length must be at least 1"));
        }
        let mut out = entries;
        for (index, z) in out.iter_mut().enumerate() {
            let modulus = z.norm();
            if !(modulus >= DEGENERATE_MODULUS) {
                return Err(Error::DegenerateRetraction { index, modulus });
            }
            *z /= modulus;
        }
        Ok(Self {
            entries: out.into(),
        })
    }

    pub fn from_phases(phases: &[f64]) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::invalid("sequence length must be at least 1"));
        }
        Ok(Self {
            entries: phases.iter().map(|&p| C64::from_polar(1.0, p)).collect(),
        })
    }

    /// The all-ones sequence of length `n`.
    pub fn ones(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sequence length must be at least 1"));
        }
        Ok(Self {
            entries: vec![C64::new(1.0, 0.0); n].into(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.entries.iter()
    }

    pub fn to_vec(&self) -> Vec<C64> {
        self.entries.to_vec()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.entries.iter().map(|z| z.arg()).collect()
    }

    /// `self^H other`.
    pub fn conj_dot(&self, other: &[C64]) -> C64 {
        conj_dot(&self.entries, other)
    }

    /// Entrywise product with another unit-modulus vector, e.g. a Doppler
    /// steering vector.
    pub fn modulate(&self, factors: &[C64]) -> Result<Self> {
        check_len(self.len(), factors.len())?;
        Self::new(
            self.entries
                .iter()
                .zip(factors)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// Multiplies every entry by `e^{jφ}`.
    pub fn rotated(&self, phi: f64) -> Self {
        let w = C64::from_polar(1.0, phi);
        Self {
            entries: self.entries.iter().map(|z| z * w).collect(),
        }
    }

    /// Same point up to [`ANCHOR_TOL`] per entry.
    pub fn same_point(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.entries, &other.entries)
            || (self.len() == other.len()
                && self
                    .entries
                    .iter()
                    .zip(other.entries.iter())
                    .all(|(a, b)| (a - b).norm() <= ANCHOR_TOL))
    }
}

impl PartialEq for UnitModulusSequence {
    fn eq(&self, other: &Self) -> bool {
        self.entries[..] == other.entries[..]
    }
}

impl AsRef<[C64]> for UnitModulusSequence {
    fn as_ref(&self) -> &[C64] {
        &self.entries
    }
}

/// A vector in the tangent space at its anchor point.
#[derive(Clone, Debug)]
pub struct TangentVector {
    anchor: UnitModulusSequence,
    entries: Vec<C64>,
}

impl TangentVector {
    /// Checks the tangent condition `Re(ξ_i conj(x_i)) = 0` entry by entry.
    pub fn new(anchor: &UnitModulusSequence, entries: Vec<C64>) -> Result<Self> {
        check_len(anchor.len(), entries.len())?;
        for (index, (v, x)) in entries.iter().zip(anchor.iter()).enumerate() {
            let residual = (v * x.conj()).re;
            if !residual.is_finite() || residual.abs() > TANGENT_TOL * v.norm().max(1.0) {
                return Err(Error::NotTangent { index, residual });
            }
        }
        Ok(Self {
            anchor: anchor.clone(),
            entries,
        })
    }

    pub fn zero(anchor: &UnitModulusSequence) -> Self {
        Self {
            anchor: anchor.clone(),
            entries: vec![C64::new(0.0, 0.0); anchor.len()],
        }
    }

    /// The tangent vector `j·t_i·x_i` for real coordinates `t`.
    pub fn from_coordinates(anchor: &UnitModulusSequence, coords: &[f64]) -> Result<Self> {
        check_len(anchor.len(), coords.len())?;
        Ok(Self {
            anchor: anchor.clone(),
            entries: anchor
                .iter()
                .zip(coords)
                .map(|(x, &t)| C64::new(0.0, t) * x)
                .collect(),
        })
    }

    /// Real coordinates in the orthonormal basis `{j·x_i·e_i}`.
    pub fn coordinates(&self) -> Vec<f64> {
        self.entries
            .iter()
            .zip(self.anchor.iter())
            .map(|(v, x)| (v * x.conj()).im)
            .collect()
    }

    pub(crate) fn from_raw_unchecked(anchor: &UnitModulusSequence, entries: Vec<C64>) -> Self {
        debug_assert_eq!(anchor.len(), entries.len());
        Self {
            anchor: anchor.clone(),
            entries,
        }
    }

    pub fn anchor(&self) -> &UnitModulusSequence {
        &self.anchor
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn check_anchor(&self, other: &TangentVector) -> Result<()> {
        if self.anchor.same_point(&other.anchor) {
            Ok(())
        } else {
            Err(Error::AnchorMismatch)
        }
    }

    /// The Riemannian metric `Re(ξ^H η)`.
    pub fn inner(&self, other: &TangentVector) -> Result<f64> {
        self.check_anchor(other)?;
        Ok(real_inner(&self.entries, &other.entries))
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.entries).sqrt()
    }

    pub fn scaled(&self, a: f64) -> TangentVector {
        TangentVector {
            anchor: self.anchor.clone(),
            entries: self.entries.iter().map(|z| z * a).collect(),
        }
    }

    pub fn add(&self, other: &TangentVector) -> Result<TangentVector> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &TangentVector) -> Result<TangentVector> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: f64, other: &TangentVector) -> Result<()> {
        self.check_anchor(other)?;
        for (y, x) in self.entries.iter_mut().zip(&other.entries) {
            *y += x * a;
        }
        Ok(())
    }
}

/// Riemannian metric between two tangent vectors at the same point.
pub fn inner(xi: &TangentVector, eta: &TangentVector) -> Result<f64> {
    xi.inner(eta)
}

/// Orthogonal projection `v − Re(v ⊙ conj(x)) ⊙ x` onto the tangent space at `x`.
pub fn project_tangent(x: &UnitModulusSequence, v: &[C64]) -> Result<TangentVector> {
    check_len(x.len(), v.len())?;
    let entries = v
        .iter()
        .zip(x.iter())
        .map(|(vi, xi)| vi - xi * (vi * xi.conj()).re)
        .collect();
    Ok(TangentVector::from_raw_unchecked(x, entries))
}

/// Entrywise normalization `(x_i + ξ_i) / |x_i + ξ_i|`.
pub fn retract(x: &UnitModulusSequence, xi: &TangentVector) -> Result<UnitModulusSequence> {
    check_len(x.len(), xi.len())?;
    if !xi.anchor().same_point(x) {
        return Err(Error::AnchorMismatch);
    }
    UnitModulusSequence::normalized(x.iter().zip(xi.as_slice()).map(|(a, b)| a + b).collect())
}

/// Moves a tangent vector into the tangent space at `target` by projection.
pub fn transport(target: &UnitModulusSequence, xi: &TangentVector) -> Result<TangentVector> {
    project_tangent(target, xi.as_slice())
}

/// Entries `e^{jθ_i}` with `θ_i` i.i.d. uniform on `[0, 2π)`.
pub fn random_point(n: usize, seed: u64) -> Result<UnitModulusSequence> {
    if n == 0 {
        return Err(Error::invalid("sequence length must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    UnitModulusSequence::from_phases(&phases)
}

/// A tangent vector at `x` with i.i.d. standard-normal-ish coordinates,
/// rescaled to `norm`. Deterministic in `seed`.
pub fn random_tangent(x: &UnitModulusSequence, norm: f64, seed: u64) -> TangentVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Sum of uniforms: cheap, symmetric and has no preferred axis after scaling.
    let coords: Vec<f64> = (0..x.len())
        .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).sum::<f64>())
        .collect();
    let len = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
    let scale = if len > 0.0 { norm / len } else { 0.0 };
    let coords: Vec<f64> = coords.iter().map(|c| c * scale).collect();
    TangentVector::from_coordinates(x, &coords).expect("coordinate length matches anchor")
}
