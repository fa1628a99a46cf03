//! Scattering keys under the Gaussian-statistics model, SLM phase masks and
//! the wavefront-shaped field in the target mode.
//!
//! A key is represented by one row of its reflection matrix: the complex
//! field reflection coefficients `R_{s,j}` from each of the `N` incoming
//! modes into the target mode `s`. The field delivered to the target mode by
//! a coherent probe of amplitude `alpha` is
//!
//! ```text
//! <b_s> = alpha * sum_j R_{s,j} g_j exp(i phi_j)
//! ```
//!
//! where `g_j` couples the input fiber to incoming mode `j` and `phi_j` is
//! the SLM phase applied to that mode.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::float17;

/// One row of a key's reflection matrix together with its generating statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringKey {
    coefficients: Vec<Complex64>,
    l_over_l: f64,
    variance: f64,
    target_mode: usize,
}

/// Per-coefficient variance `(1 - l/L) / N` of the reflection coefficients.
pub fn coefficient_variance(mode_count: usize, l_over_l: f64) -> f64 {
    (1.0 - l_over_l) / mode_count as f64
}

impl ScatteringKey {
    /// Wraps explicit coefficients. `l_over_l` may equal 1, the zero-variance limit.
    pub fn new(coefficients: Vec<Complex64>, l_over_l: f64, target_mode: usize) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(param("a key needs at least one mode"));
        }
        if !(0.0..=1.0).contains(&l_over_l) {
            return Err(param(format!("l/L must lie in [0, 1], got {l_over_l}")));
        }
        if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(param("reflection coefficients must be finite"));
        }
        let variance = coefficient_variance(coefficients.len(), l_over_l);
        Ok(Self { coefficients, l_over_l, variance, target_mode })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn mode_count(&self) -> usize {
        self.coefficients.len()
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn l_over_l(&self) -> f64 {
        self.l_over_l
    }

    pub fn target_mode(&self) -> usize {
        self.target_mode
    }

    pub(crate) fn with_coefficients(&self, coefficients: Vec<Complex64>) -> Self {
        debug_assert_eq!(coefficients.len(), self.coefficients.len());
        Self { coefficients, ..self.clone() }
    }
}

/// Draws `count` i.i.d. circularly-symmetric complex Gaussians with total variance `variance`.
pub fn draw_coefficients<R: Rng + ?Sized>(count: usize, variance: f64, rng: &mut R) -> Vec<Complex64> {
    let scale = (variance / 2.0).sqrt();
    (0..count).map(|_| draw_one(scale, rng)).collect()
}

pub(crate) fn draw_one<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Generates a random key with `mode_count` modes for a slab with mean-free-path ratio `l_over_l`.
pub fn generate_key<R: Rng + ?Sized>(mode_count: usize, l_over_l: f64, rng: &mut R) -> Result<ScatteringKey> {
    if mode_count == 0 {
        return Err(param("mode_count must be at least 1"));
    }
    if !(0.0..1.0).contains(&l_over_l) {
        return Err(param(format!("l/L must lie in [0, 1), got {l_over_l}")));
    }
    let variance = coefficient_variance(mode_count, l_over_l);
    ScatteringKey::new(draw_coefficients(mode_count, variance, rng), l_over_l, 0)
}

/// Fiber-to-SLM coupling coefficients `g_j`; their squared norms sum to the loss `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingProfile {
    coefficients: Vec<Complex64>,
    loss: f64,
}

impl CouplingProfile {
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(param("coupling profile needs at least one mode"));
        }
        let loss: f64 = coefficients.iter().map(|g| g.norm_sqr()).sum();
        if !(loss > 0.0 && loss <= 1.0 + 1e-12) {
            return Err(param(format!("total coupling must lie in (0, 1], got {loss}")));
        }
        Ok(Self { coefficients, loss })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn mode_count(&self) -> usize {
        self.coefficients.len()
    }
}

/// Uniform illumination of the SLM: every `g_j = sqrt(loss / N)`.
pub fn uniform_coupling(mode_count: usize, loss: f64) -> Result<CouplingProfile> {
    if mode_count == 0 {
        return Err(param("mode_count must be at least 1"));
    }
    if !(loss > 0.0 && loss <= 1.0) {
        return Err(param(format!("loss must lie in (0, 1], got {loss}")));
    }
    let g = (loss / mode_count as f64).sqrt();
    Ok(CouplingProfile { coefficients: vec![Complex64::new(g, 0.0); mode_count], loss })
}

/// Maps an angle onto its representative in `[-pi, pi)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi - TAU * ((phi + PI) / TAU).floor();
    if w >= PI {
        w - TAU
    } else if w < -PI {
        -PI
    } else {
        w
    }
}

/// SLM phase mask, one phase per incoming mode, stored in `[-pi, pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaskDoc", into = "MaskDoc")]
pub struct PhaseMask {
    phases: Vec<f64>,
}

impl PhaseMask {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(param("phase mask entries must be finite"));
        }
        Ok(Self { phases: phases.into_iter().map(wrap_phase).collect() })
    }

    /// The non-optimized SLM: every phase zero.
    pub fn flat(mode_count: usize) -> Self {
        Self { phases: vec![0.0; mode_count] }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct MaskDoc {
    #[serde(serialize_with = "float17::vec::serialize")]
    phases: Vec<f64>,
}

impl TryFrom<MaskDoc> for PhaseMask {
    type Error = Error;
    fn try_from(doc: MaskDoc) -> Result<Self> {
        PhaseMask::new(doc.phases)
    }
}

impl From<PhaseMask> for MaskDoc {
    fn from(mask: PhaseMask) -> Self {
        MaskDoc { phases: mask.phases }
    }
}

fn check_shapes(key: &ScatteringKey, coupling: &CouplingProfile, mask: Option<&PhaseMask>) -> Result<()> {
    let expected = key.mode_count();
    if coupling.mode_count() != expected {
        return Err(Error::Shape { expected, found: coupling.mode_count() });
    }
    if let Some(mask) = mask {
        if mask.len() != expected {
            return Err(Error::Shape { expected, found: mask.len() });
        }
    }
    Ok(())
}

/// `sum_j R_{s,j} g_j exp(i phi_j)`: the target-mode field per unit probe amplitude.
pub fn transfer(key: &ScatteringKey, coupling: &CouplingProfile, mask: &PhaseMask) -> Result<Complex64> {
    check_shapes(key, coupling, Some(mask))?;
    Ok(key
        .coefficients
        .iter()
        .zip(&coupling.coefficients)
        .zip(&mask.phases)
        .map(|((r, g), &phi)| r * g * Complex64::cis(phi))
        .sum())
}

/// Expected target-mode field `<b_s>` for a coherent probe of amplitude `probe_amplitude`.
pub fn scattered_amplitude(
    key: &ScatteringKey,
    coupling: &CouplingProfile,
    mask: &PhaseMask,
    probe_amplitude: Complex64,
) -> Result<Complex64> {
    Ok(transfer(key, coupling, mask)? * probe_amplitude)
}

/// Mean photon number in the target mode. For coherent light this is `|<b_s>|^2`.
pub fn photon_number(amplitude: Complex64) -> f64 {
    amplitude.norm_sqr()
}

/// Phase conjugation `phi_j = -arg(R_{s,j} g_j)`: every term of the field sum
/// becomes real and non-negative, which is the global optimum for phase-only control.
pub fn optimal_mask(key: &ScatteringKey, coupling: &CouplingProfile) -> Result<PhaseMask> {
    check_shapes(key, coupling, None)?;
    let products: Vec<Complex64> =
        key.coefficients.iter().zip(&coupling.coefficients).map(|(r, g)| r * g).collect();
    if products.iter().all(|p| p.norm_sqr() == 0.0) {
        return Err(Error::DegenerateKey);
    }
    PhaseMask::new(products.iter().map(|p| if p.norm_sqr() == 0.0 { 0.0 } else { -p.arg() }).collect())
}

/// Stepwise-sequential feedback optimization.
///
/// Starting from the flat mask, each mode in turn is cycled through
/// `phase_levels` equally spaced phases and left at the one giving the largest
/// target intensity; the new phase takes effect before the next mode is tried.
/// `sweeps` passes are made over all modes.
pub fn iterative_mask(
    key: &ScatteringKey,
    coupling: &CouplingProfile,
    phase_levels: usize,
    sweeps: usize,
) -> Result<PhaseMask> {
    if phase_levels < 2 {
        return Err(param("phase_levels must be at least 2"));
    }
    if sweeps == 0 {
        return Err(param("sweeps must be at least 1"));
    }
    check_shapes(key, coupling, None)?;
    let terms: Vec<Complex64> = key.coefficients.iter().zip(&coupling.coefficients).map(|(r, g)| r * g).collect();
    if terms.iter().all(|t| t.norm_sqr() == 0.0) {
        return Err(Error::DegenerateKey);
    }
    let levels: Vec<(f64, Complex64)> = (0..phase_levels)
        .map(|l| {
            let phi = -PI + TAU * l as f64 / phase_levels as f64;
            (phi, Complex64::cis(phi))
        })
        .collect();

    let mut phases = vec![0.0; terms.len()];
    let mut total: Complex64 = terms.iter().sum();
    for _ in 0..sweeps {
        for (j, term) in terms.iter().enumerate() {
            let current = term * Complex64::cis(phases[j]);
            let rest = total - current;
            let mut best = (phases[j], (rest + current).norm_sqr());
            for &(phi, rot) in &levels {
                let intensity = (rest + term * rot).norm_sqr();
                if intensity > best.1 {
                    best = (phi, intensity);
                }
            }
            phases[j] = best.0;
            total = rest + term * Complex64::cis(best.0);
        }
    }
    PhaseMask::new(phases)
}

/// Intensity enhancement: target-mode photons with `mask` over the
/// non-optimized ensemble mean `V * mu_c`. Independent of `mean_challenge_photons`.
pub fn enhancement(
    key: &ScatteringKey,
    coupling: &CouplingProfile,
    mask: &PhaseMask,
    mean_challenge_photons: f64,
) -> Result<f64> {
    if !(mean_challenge_photons > 0.0 && mean_challenge_photons.is_finite()) {
        return Err(param(format!("mean challenge photons must be positive, got {mean_challenge_photons}")));
    }
    if key.variance() <= 0.0 {
        return Err(param("enhancement is undefined for a zero-variance key"));
    }
    let probe = Complex64::new((mean_challenge_photons / coupling.loss()).sqrt(), 0.0);
    let photons = photon_number(scattered_amplitude(key, coupling, mask, probe)?);
    Ok(photons / (key.variance() * mean_challenge_photons))
}

/// JSON document for a key: `{"mode_count", "l_over_L", "target_mode", "coefficients": [[re, im], ...]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyDoc {
    pub mode_count: usize,
    #[serde(rename = "l_over_L", serialize_with = "float17::serialize")]
    pub l_over_l: f64,
    pub target_mode: usize,
    #[serde(serialize_with = "float17::pairs::serialize")]
    pub coefficients: Vec<[f64; 2]>,
}

impl From<&ScatteringKey> for KeyDoc {
    fn from(key: &ScatteringKey) -> Self {
        KeyDoc {
            mode_count: key.mode_count(),
            l_over_l: key.l_over_l,
            target_mode: key.target_mode,
            coefficients: key.coefficients.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

impl TryFrom<KeyDoc> for ScatteringKey {
    type Error = Error;
    fn try_from(doc: KeyDoc) -> Result<Self> {
        if doc.coefficients.len() != doc.mode_count {
            return Err(Error::Shape { expected: doc.mode_count, found: doc.coefficients.len() });
        }
        ScatteringKey::new(
            doc.coefficients.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
            doc.l_over_l,
            doc.target_mode,
        )
    }
}

impl Serialize for ScatteringKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KeyDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScatteringKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = KeyDoc::deserialize(d)?;
        ScatteringKey::try_from(doc).map_err(serde::de::Error::custom)
    }
}
