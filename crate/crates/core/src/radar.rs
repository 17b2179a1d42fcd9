//! Slow-time signal model: Doppler steering vectors, range-lag shift
//! operators, the per-scatterer clutter operators `Ψ_k`, and the figures of
//! merit built on them (clutter energy, SCR/SCNR, slow-time ambiguity function).
//!
//! Doppler is normalized (cycles per pulse) and centered on the nominal target
//! Doppler, so the target steering vector defaults to all ones.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{UnitModulusSequence, C64};

/// STAF values are floored here instead of returning `-inf` for exact zeros.
pub const STAF_FLOOR_DB: f64 = -320.0;

/// `p(v)_m = e^{j2π m v}` for `m = 0..n`.
pub fn steering_vector(v: f64, n: usize) -> Vec<C64> {
    (0..n)
        .map(|m| {
            // reduce the cycle count first so large m keeps full phase accuracy
            let cycles = (m as f64 * v).rem_euclid(1.0);
            C64::from_polar(1.0, TAU * cycles)
        })
        .collect()
}

/// Down-shift by `r` pulses: `out[m] = x[m − r]` for `m ≥ r`, zero otherwise.
pub fn apply_shift(r: usize, x: &[C64]) -> Result<Vec<C64>> {
    let n = x.len();
    if r >= n {
        return Err(Error::invalid(format!(
            "range shift {r} out of range for length {n}"
        )));
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    out[r..].copy_from_slice(&x[..n - r]);
    Ok(out)
}

/// Adjoint of [`apply_shift`]: `out[m] = x[m + r]` for `m + r < n`.
pub fn apply_shift_adjoint(r: usize, x: &[C64]) -> Result<Vec<C64>> {
    let n = x.len();
    if r >= n {
        return Err(Error::invalid(format!(
            "range shift {r} out of range for length {n}"
        )));
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    out[..n - r].copy_from_slice(&x[r..]);
    Ok(out)
}

/// One interfering scatterer: range lag, normalized Doppler, linear power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutterScatterer {
    pub range_shift: usize,
    pub doppler: f64,
    pub power: f64,
}

impl ClutterScatterer {
    pub fn new(range_shift: usize, doppler: f64, power: f64) -> Result<Self> {
        if !(power >= 0.0) || !power.is_finite() {
            return Err(Error::invalid(format!(
                "scatterer power must be finite and nonnegative, got {power}"
            )));
        }
        if !doppler.is_finite() {
            return Err(Error::invalid("scatterer Doppler must be finite"));
        }
        Ok(Self {
            range_shift,
            doppler,
            power,
        })
    }
}

/// The interference environment seen by a length-`n` sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutterScene {
    n: usize,
    scatterers: Vec<ClutterScatterer>,
    target_doppler: f64,
}

impl ClutterScene {
    pub fn new(n: usize, scatterers: Vec<ClutterScatterer>) -> Result<Self> {
        Self::with_target_doppler(n, scatterers, 0.0)
    }

    pub fn with_target_doppler(
        n: usize,
        scatterers: Vec<ClutterScatterer>,
        target_doppler: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("code length must be at least 1"));
        }
        if let Some(bad) = scatterers.iter().find(|s| s.range_shift >= n) {
            return Err(Error::invalid(format!(
                "scatterer range shift {} out of range for length {n}",
                bad.range_shift
            )));
        }
        if !target_doppler.is_finite() {
            return Err(Error::invalid("target Doppler must be finite"));
        }
        Ok(Self {
            n,
            scatterers,
            target_doppler,
        })
    }

    /// Rectangular block of unit-spaced Doppler bins `h ↦ h/n` repeated over
    /// every range shift in `ranges`.
    pub fn block(
        n: usize,
        ranges: impl IntoIterator<Item = usize> + Clone,
        doppler_bins: impl IntoIterator<Item = i64> + Clone,
        power: f64,
    ) -> Result<Vec<ClutterScatterer>> {
        let mut out = Vec::new();
        for r in ranges {
            for h in doppler_bins.clone() {
                out.push(ClutterScatterer::new(r, h as f64 / n as f64, power)?);
            }
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scatterers(&self) -> &[ClutterScatterer] {
        &self.scatterers
    }

    pub fn target_doppler(&self) -> f64 {
        self.target_doppler
    }

    pub fn operators(&self) -> Vec<ClutterOperator> {
        let left = steering_vector(self.target_doppler, self.n);
        self.scatterers
            .iter()
            .map(|s| ClutterOperator {
                range_shift: s.range_shift,
                left_phase: left.clone(),
                right_phase: steering_vector(s.doppler, self.n),
                amplitude: s.power.sqrt(),
            })
            .collect()
    }

    pub fn total_power(&self) -> f64 {
        self.scatterers.iter().map(|s| s.power).sum()
    }
}

/// `Ψ = σ·diag(left)·J^r·diag(right)`, kept factored.
#[derive(Clone, Debug, PartialEq)]
pub struct ClutterOperator {
    pub range_shift: usize,
    pub left_phase: Vec<C64>,
    pub right_phase: Vec<C64>,
    pub amplitude: f64,
}

impl ClutterOperator {
    pub fn len(&self) -> usize {
        self.left_phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left_phase.is_empty()
    }

    /// `Ψ x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.len();
        let r = self.range_shift;
        let mut out = vec![C64::new(0.0, 0.0); n];
        for m in r..n {
            out[m] = self.left_phase[m] * self.right_phase[m - r] * x[m - r] * self.amplitude;
        }
        out
    }

    /// `Ψ^H x`.
    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let n = self.len();
        let r = self.range_shift;
        let mut out = vec![C64::new(0.0, 0.0); n];
        for m in r..n {
            out[m - r] =
                (self.left_phase[m] * self.right_phase[m - r]).conj() * x[m] * self.amplitude;
        }
        out
    }

    /// `a^H Ψ b` without forming `Ψ b`.
    pub fn bilinear(&self, a: &[C64], b: &[C64]) -> C64 {
        let n = self.len();
        let r = self.range_shift;
        let mut acc = C64::new(0.0, 0.0);
        for m in r..n {
            acc += a[m].conj() * self.left_phase[m] * self.right_phase[m - r] * b[m - r];
        }
        acc * self.amplitude
    }
}

/// `s^H Ψ s`.
pub fn quadratic_form(s: &UnitModulusSequence, op: &ClutterOperator) -> Result<C64> {
    if s.len() != op.len() {
        return Err(Error::DimensionMismatch {
            expected: op.len(),
            got: s.len(),
        });
    }
    Ok(op.bilinear(s.as_slice(), s.as_slice()))
}

fn check_scene(s: &UnitModulusSequence, scene: &ClutterScene) -> Result<()> {
    if s.len() != scene.n() {
        return Err(Error::DimensionMismatch {
            expected: scene.n(),
            got: s.len(),
        });
    }
    Ok(())
}

/// Disturbance power from clutter, `Σ_k |s^H Ψ_k s|²`.
pub fn clutter_energy(s: &UnitModulusSequence, scene: &ClutterScene) -> Result<f64> {
    check_scene(s, scene)?;
    Ok(scene
        .operators()
        .iter()
        .map(|op| op.bilinear(s.as_slice(), s.as_slice()).norm_sqr())
        .sum())
}

fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Output SCNR in dB for transmit sequence `s` when the target actually
/// returns `s_tilde`:
/// `σ_t²|s^H s̃|² / (σ_n²‖s‖² + Σ_k |s^H Ψ_k s|²)`.
///
/// An orthogonal target return gives `-inf`; a zero denominator is an error.
pub fn scnr(
    s: &UnitModulusSequence,
    s_tilde: &UnitModulusSequence,
    scene: &ClutterScene,
    noise_power: f64,
    target_power: f64,
) -> Result<f64> {
    check_scene(s, scene)?;
    check_scene(s_tilde, scene)?;
    if !(noise_power >= 0.0) {
        return Err(Error::invalid("noise power must be nonnegative"));
    }
    if !(target_power > 0.0) {
        return Err(Error::invalid("target power must be positive"));
    }
    let signal = target_power * s.conj_dot(s_tilde.as_slice()).norm_sqr();
    let denom = noise_power * s.len() as f64 + clutter_energy(s, scene)?;
    if !(denom > 0.0) {
        return Err(Error::DegenerateScene(
            "clutter-plus-noise power is zero".into(),
        ));
    }
    if signal == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(to_db(signal / denom))
}

/// Nominal SCR in dB: `|s^H s|² / Σ_k |s^H Ψ_k s|² = N² / clutter`.
pub fn scr(s: &UnitModulusSequence, scene: &ClutterScene) -> Result<f64> {
    scnr(s, s, scene, 0.0, 1.0)
}

/// Realized SCR in dB when the target return is `s_tilde` and noise is ignored.
pub fn realized_scr(
    s: &UnitModulusSequence,
    s_tilde: &UnitModulusSequence,
    scene: &ClutterScene,
) -> Result<f64> {
    scnr(s, s_tilde, scene, 0.0, 1.0)
}

/// Slow-time ambiguity function sampled on a range × Doppler grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Staf {
    pub range_bins: Vec<usize>,
    pub dopplers: Vec<f64>,
    /// `values_db[i][j]` is the response at `range_bins[i]`, `dopplers[j]`.
    pub values_db: Vec<Vec<f64>>,
}

impl Staf {
    /// Mean over the cells matching `(range, doppler)` pairs, in dB.
    pub fn mean_over(&self, cells: &[(usize, f64)]) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for &(r, v) in cells {
            let i = self.range_bins.iter().position(|&x| x == r)?;
            let j = self.dopplers.iter().position(|&x| (x - v).abs() < 1e-12)?;
            sum += self.values_db[i][j];
            count += 1;
        }
        (count > 0).then(|| sum / count as f64)
    }

    pub fn row(&self, range_bin: usize) -> Option<&[f64]> {
        let i = self.range_bins.iter().position(|&x| x == range_bin)?;
        Some(&self.values_db[i])
    }
}

/// `|s^H J^r (s ⊙ p(v))|` normalized by its value `N` at the
/// matched cell `(0, 0)`, then `20·log10`. The matched cell is the global
/// maximum, so the grid peak is 0 dB whenever it contains `(0, 0)`.
pub fn staf(s: &UnitModulusSequence, range_bins: &[usize], doppler_grid: &[f64]) -> Result<Staf> {
    let n = s.len();
    if let Some(&bad) = range_bins.iter().find(|&&r| r >= n) {
        return Err(Error::invalid(format!(
            "range bin {bad} out of range for length {n}"
        )));
    }
    let peak = n as f64;
    let x = s.as_slice();
    let values_db = range_bins
        .iter()
        .map(|&r| {
            doppler_grid
                .iter()
                .map(|&v| {
                    let p = steering_vector(v, n);
                    let mut acc = C64::new(0.0, 0.0);
                    for m in r..n {
                        acc += x[m].conj() * x[m - r] * p[m - r];
                    }
                    let rel = acc.norm() / peak;
                    (20.0 * rel.log10()).max(STAF_FLOOR_DB)
                })
                .collect()
        })
        .collect();
    Ok(Staf {
        range_bins: range_bins.to_vec(),
        dopplers: doppler_grid.to_vec(),
        values_db,
    })
}

/// The `n` Doppler bins `h/n`, `h = 0..n`.
pub fn doppler_bins(n: usize) -> Vec<f64> {
    (0..n).map(|h| h as f64 / n as f64).collect()
}

/// `‖p(v) − p(v_t)‖²`.
pub fn steering_error_sqr(v: f64, v_t: f64, n: usize) -> f64 {
    let a = steering_vector(v, n);
    let b = steering_vector(v_t, n);
    a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

#[cfg(test)]
pub(crate) mod dense {
    //! Dense reference operators for tests.
    use super::*;

    pub type Dense = Vec<Vec<C64>>;

    pub fn shift_matrix(r: usize, n: usize) -> Dense {
        let mut j = vec![vec![C64::new(0.0, 0.0); n]; n];
        for k in 0..n.saturating_sub(r) {
            j[k + r][k] = C64::new(1.0, 0.0);
        }
        j
    }

    pub fn diag(d: &[C64]) -> Dense {
        let n = d.len();
        let mut out = vec![vec![C64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            out[i][i] = d[i];
        }
        out
    }

    pub fn matmul(a: &Dense, b: &Dense) -> Dense {
        let n = a.len();
        let mut out = vec![vec![C64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    }

    pub fn matvec(a: &Dense, x: &[C64]) -> Vec<C64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
            .collect()
    }

    pub fn psi(sc: &ClutterScatterer, v_t: f64, n: usize) -> Dense {
        let left = diag(&steering_vector(v_t, n));
        let right = diag(&steering_vector(sc.doppler, n));
        let mut m = matmul(&matmul(&left, &shift_matrix(sc.range_shift, n)), &right);
        for row in m.iter_mut() {
            for z in row.iter_mut() {
                *z *= sc.power.sqrt();
            }
        }
        m
    }
}
