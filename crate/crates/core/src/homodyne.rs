//! Coherent probe states, homodyne readout and the in-bin statistics used by
//! the verifier.
//!
//! The local oscillator is taken to be strong enough that a quadrature
//! measurement returns a Gaussian outcome centred at the quadrature
//! expectation value with standard deviation `sigma = 1 / sqrt(2 eta)`.

use std::f64::consts::{FRAC_PI_2, SQRT_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::float17;

/// A coherent state `|sqrt(mu) e^{i phi}>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeState {
    pub mean_photons: f64,
    pub phase: f64,
    pub index: Option<usize>,
}

impl ProbeState {
    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.mean_photons.sqrt(), self.phase)
    }
}

/// The public probe set `{ |sqrt(mu) e^{2 pi i k / N}> : k = 0..N }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProbeSetDoc", into = "ProbeSetDoc")]
pub struct ProbeSet {
    size: usize,
    mean_photons: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeSetDoc {
    size: usize,
    #[serde(serialize_with = "float17::serialize")]
    mean_photons: f64,
}

impl TryFrom<ProbeSetDoc> for ProbeSet {
    type Error = Error;
    fn try_from(doc: ProbeSetDoc) -> Result<Self> {
        ProbeSet::new(doc.size, doc.mean_photons)
    }
}

impl From<ProbeSet> for ProbeSetDoc {
    fn from(p: ProbeSet) -> Self {
        ProbeSetDoc { size: p.size, mean_photons: p.mean_photons }
    }
}

impl ProbeSet {
    pub fn new(size: usize, mean_photons: f64) -> Result<Self> {
        if size <= 2 {
            return Err(param(format!("probe set needs more than 2 states, got {size}")));
        }
        if !(mean_photons > 0.0 && mean_photons.is_finite()) {
            return Err(param(format!("probe mean photon number must be positive, got {mean_photons}")));
        }
        Ok(Self { size, mean_photons })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mean_photons(&self) -> f64 {
        self.mean_photons
    }

    /// State `k`, or `None` when `k >= size`.
    pub fn state(&self, k: usize) -> Option<ProbeState> {
        (k < self.size).then(|| ProbeState {
            mean_photons: self.mean_photons,
            phase: TAU * k as f64 / self.size as f64,
            index: Some(k),
        })
    }

    pub fn states(&self) -> impl Iterator<Item = ProbeState> + '_ {
        (0..self.size).filter_map(|k| self.state(k))
    }
}

/// The key's response `<X> + i <Y>` in units where the vacuum quadrature variance is 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Response {
    pub x: f64,
    pub y: f64,
}

impl Response {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// `sqrt(2) * <b_s>`.
    pub fn from_amplitude(amplitude: Complex64) -> Self {
        Self { x: SQRT_2 * amplitude.re, y: SQRT_2 * amplitude.im }
    }

    pub fn magnitude(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn phase(&self) -> f64 {
        self.y.atan2(self.x)
    }

    /// `|R| cos(phi - theta)`, evaluated exactly at the two protocol angles.
    pub fn project(&self, lo_phase: f64) -> f64 {
        project(self.x, self.y, lo_phase)
    }
}

fn project(x: f64, y: f64, lo_phase: f64) -> f64 {
    if lo_phase == 0.0 {
        x
    } else if lo_phase == FRAC_PI_2 {
        y
    } else {
        x * lo_phase.cos() + y * lo_phase.sin()
    }
}

/// The two quadratures measured by the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrature {
    X,
    Y,
}

impl Quadrature {
    pub fn lo_phase(self) -> f64 {
        match self {
            Quadrature::X => 0.0,
            Quadrature::Y => FRAC_PI_2,
        }
    }
}

/// Public homodyne detector constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelDoc", into = "ChannelDoc")]
pub struct HomodyneChannel {
    efficiency: f64,
    shot_noise: f64,
    bin_width: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelDoc {
    #[serde(serialize_with = "float17::serialize")]
    efficiency: f64,
    #[serde(serialize_with = "float17::serialize")]
    bin_width: f64,
}

impl TryFrom<ChannelDoc> for HomodyneChannel {
    type Error = Error;
    fn try_from(doc: ChannelDoc) -> Result<Self> {
        HomodyneChannel::new(doc.efficiency, doc.bin_width)
    }
}

impl From<HomodyneChannel> for ChannelDoc {
    fn from(c: HomodyneChannel) -> Self {
        ChannelDoc { efficiency: c.efficiency, bin_width: c.bin_width }
    }
}

pub const DEFAULT_EFFICIENCY: f64 = 0.55;

/// `1 / sqrt(2 eta)`.
pub fn shot_noise(efficiency: f64) -> f64 {
    1.0 / (2.0 * efficiency).sqrt()
}

impl HomodyneChannel {
    /// Bin widths outside `[2 sigma, 4 sigma)` are accepted with a warning.
    pub fn new(efficiency: f64, bin_width: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(param(format!("detection efficiency must lie in (0, 1], got {efficiency}")));
        }
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(param(format!("bin width must be positive, got {bin_width}")));
        }
        let sigma = shot_noise(efficiency);
        if !(2.0 * sigma..4.0 * sigma).contains(&bin_width) {
            log::warn!(
                "bin width {bin_width} is outside the recommended range [{}, {}) for sigma = {sigma}",
                2.0 * sigma,
                4.0 * sigma
            );
        }
        Ok(Self { efficiency, shot_noise: sigma, bin_width })
    }

    /// Channel whose bin width is `delta_over_sigma` shot-noise units.
    pub fn with_bin_ratio(efficiency: f64, delta_over_sigma: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(param(format!("detection efficiency must lie in (0, 1], got {efficiency}")));
        }
        Self::new(efficiency, delta_over_sigma * shot_noise(efficiency))
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn shot_noise(&self) -> f64 {
        self.shot_noise
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }
}

/// `<Q(theta)> = sqrt(2) Re(<b> e^{-i theta})`.
pub fn quadrature_mean(amplitude: Complex64, lo_phase: f64) -> f64 {
    project(SQRT_2 * amplitude.re, SQRT_2 * amplitude.im, lo_phase)
}

/// One homodyne outcome for a quadrature with expectation `mean`.
pub fn sample_quadrature<R: Rng + ?Sized>(mean: f64, channel: &HomodyneChannel, rng: &mut R) -> f64 {
    sample_gaussian(mean, channel.shot_noise, rng)
}

pub(crate) fn sample_gaussian<R: Rng + ?Sized>(mean: f64, sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + sigma * z
}

/// The closed bin of width `bin_width` centred at the response's projection on `lo_phase`.
pub fn bin_interval(response: &Response, lo_phase: f64, bin_width: f64) -> (f64, f64) {
    let centre = response.project(lo_phase);
    (centre - bin_width / 2.0, centre + bin_width / 2.0)
}

pub fn in_bin(outcome: f64, response: &Response, lo_phase: f64, bin_width: f64) -> bool {
    let (lo, hi) = bin_interval(response, lo_phase, bin_width);
    lo <= outcome && outcome <= hi
}

/// Probability that an outcome lands in a bin centred on its own distribution:
/// `erf(delta / (2 sqrt(2) sigma))`.
pub fn p_in_theoretical(channel: &HomodyneChannel) -> f64 {
    erf(channel.bin_width / (2.0 * SQRT_2 * channel.shot_noise))
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}
