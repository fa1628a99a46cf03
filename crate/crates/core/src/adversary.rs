//! False keys and D-close clones, and their fate under verification.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{param, Result};
use crate::homodyne::{HomodyneChannel, ProbeSet, Response};
use crate::protocol::{enroll_exact, verify, CrpDatabase, VerificationConfig, VerificationReport};
use crate::rng::{purpose, Streams};
use crate::scattering::{draw_one, generate_key, transfer, CouplingProfile, ScatteringKey};

/// A randomly chosen key, statistically identical to but independent of the true one.
pub fn false_key<R: Rng + ?Sized>(mode_count: usize, l_over_l: f64, rng: &mut R) -> Result<ScatteringKey> {
    generate_key(mode_count, l_over_l, rng)
}

/// Which coefficients a clone had redrawn.
#[derive(Debug, Clone, PartialEq)]
pub struct CloneSpec {
    pub fraction: f64,
    pub replaced_indices: Vec<usize>,
}

/// Number of coefficients replaced in a `fraction`-close clone of an `n`-mode key.
/// Rounds half away from zero.
pub fn replaced_count(fraction: f64, mode_count: usize) -> usize {
    (fraction * mode_count as f64).round() as usize
}

/// Copies `true_key` and redraws `round(D N)` distinct, uniformly chosen
/// coefficients from the key's own Gaussian law.
pub fn clone_key<R: Rng + ?Sized>(
    true_key: &ScatteringKey,
    fraction: f64,
    rng: &mut R,
) -> Result<(ScatteringKey, CloneSpec)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(param(format!("clone fraction must lie in [0, 1], got {fraction}")));
    }
    let n = true_key.mode_count();
    let mut replaced = index::sample(rng, n, replaced_count(fraction, n)).into_vec();
    replaced.sort_unstable();
    let scale = (true_key.variance() / 2.0).sqrt();
    let mut coefficients = true_key.coefficients().to_vec();
    for &j in &replaced {
        coefficients[j] = draw_one(scale, rng);
    }
    Ok((true_key.with_coefficients(coefficients), CloneSpec { fraction, replaced_indices: replaced }))
}

/// Outcome of one clone trial.
#[derive(Debug, Clone, PartialEq)]
pub struct CloneTrial {
    pub fraction: f64,
    pub trial: usize,
    /// Response to probe state `k = 0` under the true key's mask.
    pub response: Response,
    pub report: VerificationReport,
}

/// Builds `trials` independent clones at `fraction` and verifies each against `database`.
///
/// Trial `i` uses its own streams, so the result does not depend on thread scheduling.
pub fn clone_trials(
    true_key: &ScatteringKey,
    database: &CrpDatabase,
    coupling: &CouplingProfile,
    config: &VerificationConfig,
    fraction: f64,
    trials: usize,
    streams: &Streams,
) -> Result<Vec<CloneTrial>> {
    let streams = streams.child(fraction.to_bits());
    let alpha0 = database.probe_set().state(0).expect("probe sets are never empty").amplitude();
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let (clone, _) = clone_key(true_key, fraction, &mut streams.rng(purpose::CLONE, trial as u64))?;
            let response = Response::from_amplitude(transfer(&clone, coupling, database.mask())? * alpha0);
            let report =
                verify(&clone, database, coupling, config, &mut streams.rng(purpose::CLONE_VERIFY, trial as u64))?;
            Ok(CloneTrial { fraction, trial, response, report })
        })
        .collect()
}

/// Verification reports of `trials` independent false keys.
pub fn false_key_trials(
    database: &CrpDatabase,
    coupling: &CouplingProfile,
    config: &VerificationConfig,
    l_over_l: f64,
    trials: usize,
    streams: &Streams,
) -> Result<Vec<(Response, VerificationReport)>> {
    let n = database.mode_count();
    let alpha0 = database.probe_set().state(0).expect("probe sets are never empty").amplitude();
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let key = false_key(n, l_over_l, &mut streams.rng(purpose::FALSE_KEY, trial as u64))?;
            let response = Response::from_amplitude(transfer(&key, coupling, database.mask())? * alpha0);
            let report =
                verify(&key, database, coupling, config, &mut streams.rng(purpose::FALSE_VERIFY, trial as u64))?;
            Ok((response, report))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudSummary {
    pub fraction: f64,
    pub mean: Response,
    /// Root-mean-square distance of the clone responses from their mean.
    pub std_radius: f64,
    /// Mean distance of the clone responses from the true-key response.
    pub mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloneCloud {
    pub true_response: Response,
    /// `(fraction, trial, response)` for every clone.
    pub points: Vec<(f64, usize, Response)>,
    pub summaries: Vec<CloudSummary>,
}

pub fn summarize_cloud(fraction: f64, true_response: Response, points: &[Response]) -> CloudSummary {
    let n = points.len().max(1) as f64;
    let mean = Response::new(
        points.iter().map(|p| p.x).sum::<f64>() / n,
        points.iter().map(|p| p.y).sum::<f64>() / n,
    );
    let var = points.iter().map(|p| (p.x - mean.x).powi(2) + (p.y - mean.y).powi(2)).sum::<f64>() / n;
    let mean_distance =
        points.iter().map(|p| (p.x - true_response.x).hypot(p.y - true_response.y)).sum::<f64>() / n;
    CloudSummary { fraction, mean, std_radius: var.sqrt(), mean_distance }
}

/// Phase-space responses (probe `k = 0`, true-key mask) of `trials` clones for each fraction.
pub fn clone_response_cloud(
    true_key: &ScatteringKey,
    coupling: &CouplingProfile,
    probes: &ProbeSet,
    fractions: &[f64],
    trials: usize,
    streams: &Streams,
) -> Result<CloneCloud> {
    if trials == 0 {
        return Err(param("clone cloud needs at least one trial"));
    }
    let mask = crate::scattering::optimal_mask(true_key, coupling)?;
    let alpha0 = probes.state(0).expect("probe sets are never empty").amplitude();
    let true_response = Response::from_amplitude(transfer(true_key, coupling, &mask)? * alpha0);
    let mut points = Vec::with_capacity(fractions.len() * trials);
    let mut summaries = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let child = streams.child(fraction.to_bits());
        let responses: Vec<Response> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let (clone, _) = clone_key(true_key, fraction, &mut child.rng(purpose::CLONE, trial as u64))?;
                Ok(Response::from_amplitude(transfer(&clone, coupling, &mask)? * alpha0))
            })
            .collect::<Result<_>>()?;
        summaries.push(summarize_cloud(fraction, true_response, &responses));
        points.extend(responses.into_iter().enumerate().map(|(t, r)| (fraction, t, r)));
    }
    Ok(CloneCloud { true_response, points, summaries })
}

/// Fraction of `trials` independent `fraction`-close clones accepted by the verifier.
#[allow(clippy::too_many_arguments)]
pub fn cheating_probability(
    true_key: &ScatteringKey,
    coupling: &CouplingProfile,
    probes: &ProbeSet,
    channel: &HomodyneChannel,
    config: &VerificationConfig,
    fraction: f64,
    trials: usize,
    streams: &Streams,
) -> Result<f64> {
    if trials == 0 {
        return Err(param("cheating probability needs at least one trial"));
    }
    let database = enroll_exact(true_key, coupling, probes, channel)?;
    let results = clone_trials(true_key, &database, coupling, config, fraction, trials, streams)?;
    Ok(results.iter().filter(|t| t.report.accepted).count() as f64 / trials as f64)
}
