//! Enrollment of a key into a challenge-response database and the
//! repeated-session verification test.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::float17;
use crate::homodyne::{
    in_bin, p_in_theoretical, quadrature_mean, sample_quadrature, HomodyneChannel, ProbeSet, Quadrature, Response,
};
use crate::scattering::{optimal_mask, transfer, CouplingProfile, PhaseMask, ScatteringKey};

/// Enrolled response to probe state `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrpRecord {
    pub k: usize,
    #[serde(serialize_with = "float17::serialize")]
    pub x: f64,
    #[serde(serialize_with = "float17::serialize")]
    pub y: f64,
    /// Bound on the per-quadrature estimation error; zero for exact enrollment.
    #[serde(serialize_with = "float17::serialize")]
    pub xi: f64,
}

impl CrpRecord {
    pub fn response(&self) -> Response {
        Response::new(self.x, self.y)
    }
}

/// Everything the verifier needs for one key: the optimal mask for its
/// target mode and one enrolled response per public probe state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatabaseDoc", into = "DatabaseDoc")]
pub struct CrpDatabase {
    target_mode: usize,
    probe_set: ProbeSet,
    channel: HomodyneChannel,
    setup_loss: f64,
    mask: PhaseMask,
    records: Vec<CrpRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatabaseDoc {
    target_mode: usize,
    probe_set: ProbeSet,
    channel: HomodyneChannel,
    #[serde(serialize_with = "float17::serialize")]
    setup_loss: f64,
    #[serde(serialize_with = "float17::vec::serialize")]
    mask: Vec<f64>,
    records: Vec<CrpRecord>,
}

impl TryFrom<DatabaseDoc> for CrpDatabase {
    type Error = Error;
    fn try_from(doc: DatabaseDoc) -> Result<Self> {
        CrpDatabase::new(
            doc.target_mode,
            doc.probe_set,
            doc.channel,
            doc.setup_loss,
            PhaseMask::new(doc.mask)?,
            doc.records,
        )
    }
}

impl From<CrpDatabase> for DatabaseDoc {
    fn from(db: CrpDatabase) -> Self {
        DatabaseDoc {
            target_mode: db.target_mode,
            probe_set: db.probe_set,
            channel: db.channel,
            setup_loss: db.setup_loss,
            mask: db.mask.phases().to_vec(),
            records: db.records,
        }
    }
}

impl CrpDatabase {
    /// Records may arrive in any order; they are stored sorted by `k` and
    /// must cover every probe state exactly once.
    pub fn new(
        target_mode: usize,
        probe_set: ProbeSet,
        channel: HomodyneChannel,
        setup_loss: f64,
        mask: PhaseMask,
        mut records: Vec<CrpRecord>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        if !(setup_loss > 0.0 && setup_loss <= 1.0) {
            return Err(param(format!("setup loss must lie in (0, 1], got {setup_loss}")));
        }
        if mask.is_empty() {
            return Err(param("database mask is empty"));
        }
        records.sort_by_key(|r| r.k);
        if records.len() != probe_set.size() || records.iter().enumerate().any(|(i, r)| r.k != i) {
            return Err(param(format!(
                "database must hold exactly one record for each of the {} probe states",
                probe_set.size()
            )));
        }
        if records.iter().any(|r| !(r.x.is_finite() && r.y.is_finite() && r.xi >= 0.0)) {
            return Err(param("database records must be finite with non-negative error"));
        }
        Ok(Self { target_mode, probe_set, channel, setup_loss, mask, records })
    }

    pub fn target_mode(&self) -> usize {
        self.target_mode
    }

    pub fn probe_set(&self) -> &ProbeSet {
        &self.probe_set
    }

    pub fn channel(&self) -> &HomodyneChannel {
        &self.channel
    }

    pub fn setup_loss(&self) -> f64 {
        self.setup_loss
    }

    pub fn mask(&self) -> &PhaseMask {
        &self.mask
    }

    pub fn records(&self) -> &[CrpRecord] {
        &self.records
    }

    pub fn mode_count(&self) -> usize {
        self.mask.len()
    }

    /// Largest estimation error over all records.
    pub fn enrollment_error(&self) -> f64 {
        self.records.iter().map(|r| r.xi).fold(0.0, f64::max)
    }
}

fn probe_amplitudes(probes: &ProbeSet) -> Vec<Complex64> {
    probes.states().map(|s| s.amplitude()).collect()
}

/// Enrollment with the responses written exactly from the model.
pub fn enroll_exact(
    key: &ScatteringKey,
    coupling: &CouplingProfile,
    probes: &ProbeSet,
    channel: &HomodyneChannel,
) -> Result<CrpDatabase> {
    let mask = optimal_mask(key, coupling)?;
    let t = transfer(key, coupling, &mask)?;
    let records = probe_amplitudes(probes)
        .into_iter()
        .enumerate()
        .map(|(k, alpha)| {
            let r = Response::from_amplitude(t * alpha);
            CrpRecord { k, x: r.x, y: r.y, xi: 0.0 }
        })
        .collect();
    CrpDatabase::new(key.target_mode(), *probes, *channel, coupling.loss(), mask, records)
}

/// Error bound `5 / sqrt(M_e)` on a quadrature estimated from `M_e` samples.
pub fn estimation_error(per_quadrature_samples: u64) -> f64 {
    5.0 / (per_quadrature_samples as f64).sqrt()
}

/// Total homodyne samples taken by sampled enrollment: `2 N M_e`.
pub fn enrollment_sample_total(probe_states: usize, per_quadrature_samples: u64) -> u64 {
    2 * probe_states as u64 * per_quadrature_samples
}

/// Enrollment where each quadrature of each response is the mean of
/// `per_quadrature_samples` homodyne outcomes.
pub fn enroll_sampled<R: Rng + ?Sized>(
    key: &ScatteringKey,
    coupling: &CouplingProfile,
    probes: &ProbeSet,
    channel: &HomodyneChannel,
    per_quadrature_samples: u64,
    rng: &mut R,
) -> Result<CrpDatabase> {
    if per_quadrature_samples == 0 {
        return Err(param("enrollment needs at least one sample per quadrature"));
    }
    let mask = optimal_mask(key, coupling)?;
    let t = transfer(key, coupling, &mask)?;
    let xi = estimation_error(per_quadrature_samples);
    let mut estimate = |mean: f64| {
        let sum: f64 = (0..per_quadrature_samples).map(|_| sample_quadrature(mean, channel, rng)).sum();
        sum / per_quadrature_samples as f64
    };
    let records = probe_amplitudes(probes)
        .into_iter()
        .enumerate()
        .map(|(k, alpha)| {
            let b = t * alpha;
            let x = estimate(quadrature_mean(b, Quadrature::X.lo_phase()));
            let y = estimate(quadrature_mean(b, Quadrature::Y.lo_phase()));
            CrpRecord { k, x, y, xi }
        })
        .collect();
    CrpDatabase::new(key.target_mode(), *probes, *channel, coupling.loss(), mask, records)
}

/// `ceil(3 ln(2 / zeta) / epsilon^2)`, bumped by one when the bound is hit
/// exactly so that `M > M_th` holds strictly.
pub fn m_threshold(epsilon: f64, zeta: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(param(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(param(format!("zeta must lie in (0, 1), got {zeta}")));
    }
    let bound = 3.0 * (2.0 / zeta).ln() / (epsilon * epsilon);
    let ceil = bound.ceil();
    Ok(if ceil == bound { ceil as u64 + 1 } else { ceil as u64 })
}

/// Minimum enhancement for which a false key's quadrature distribution
/// misses the true-key bin by at least three shot-noise units:
/// `16 {1 + 3/4 [(mu_c / N)(1 - l/L)]^{-1/2}}^2`.
pub fn e_threshold(mean_challenge_photons: f64, mode_count: usize, l_over_l: f64) -> Result<f64> {
    if !(mean_challenge_photons > 0.0 && mean_challenge_photons.is_finite()) {
        return Err(param(format!("mean challenge photons must be positive, got {mean_challenge_photons}")));
    }
    if mode_count == 0 {
        return Err(param("mode_count must be at least 1"));
    }
    if !(0.0..1.0).contains(&l_over_l) {
        return Err(param(format!("l/L must lie in [0, 1), got {l_over_l}")));
    }
    let photons_per_mode = mean_challenge_photons / mode_count as f64;
    let root = (photons_per_mode * (1.0 - l_over_l)).sqrt();
    let factor = 1.0 + 0.75 / root;
    Ok(16.0 * factor * factor)
}

/// Characteristic phase-space radii of false-key and true-key responses:
/// `rho_f = 4 sqrt(mu_c V)` and `rho_t = sqrt(E) rho_f / 4`.
pub fn radii(mean_challenge_photons: f64, variance: f64, enhancement: f64) -> (f64, f64) {
    let rho_f = 4.0 * (mean_challenge_photons * variance).sqrt();
    (rho_f, enhancement.sqrt() * rho_f / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationConfig {
    pub sessions: u64,
    pub epsilon: f64,
    pub zeta: f64,
}

impl VerificationConfig {
    pub fn new(sessions: u64, epsilon: f64, zeta: f64) -> Result<Self> {
        if sessions == 0 {
            return Err(param("verification needs at least one session"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(param(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(param(format!("zeta must lie in (0, 1), got {zeta}")));
        }
        Ok(Self { sessions, epsilon, zeta })
    }

    /// Sessions set to the Chernoff threshold for this error and confidence.
    pub fn at_threshold(epsilon: f64, zeta: f64) -> Result<Self> {
        Self::new(m_threshold(epsilon, zeta)?, epsilon, zeta)
    }
}

/// One verification session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub k: usize,
    pub theta: f64,
    pub outcome: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub sessions: u64,
    pub hits: u64,
    pub p_in: f64,
    pub p_in_expected: f64,
    pub epsilon: f64,
    pub accepted: bool,
    pub enrollment_error: f64,
    #[serde(skip)]
    pub session_trace: Option<Vec<Session>>,
}

impl VerificationReport {
    pub fn deviation(&self) -> f64 {
        (self.p_in - self.p_in_expected).abs()
    }

    /// Writes the session trace as CSV with columns `k,theta,outcome,hit`.
    pub fn write_trace<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "theta", "outcome", "hit"])?;
        for s in self.session_trace.iter().flatten() {
            w.write_record([
                s.k.to_string(),
                s.theta.to_string(),
                s.outcome.to_string(),
                u8::from(s.hit).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the verification test of `key_under_test` against `database`.
///
/// Every session draws a probe state uniformly from the public set and a
/// quadrature uniformly from {X, Y}, samples one homodyne outcome from the
/// key under test, and counts a hit when the outcome lands in the bin built
/// from the enrolled response. The key is accepted when the hit frequency is
/// within `epsilon` of the theoretical in-bin probability.
pub fn verify<R: Rng + ?Sized>(
    key_under_test: &ScatteringKey,
    database: &CrpDatabase,
    coupling: &CouplingProfile,
    config: &VerificationConfig,
    rng: &mut R,
) -> Result<VerificationReport> {
    run_verification(key_under_test, database, coupling, config, false, rng)
}

/// As [`verify`], also recording every session.
pub fn verify_traced<R: Rng + ?Sized>(
    key_under_test: &ScatteringKey,
    database: &CrpDatabase,
    coupling: &CouplingProfile,
    config: &VerificationConfig,
    rng: &mut R,
) -> Result<VerificationReport> {
    run_verification(key_under_test, database, coupling, config, true, rng)
}

fn run_verification<R: Rng + ?Sized>(
    key: &ScatteringKey,
    database: &CrpDatabase,
    coupling: &CouplingProfile,
    config: &VerificationConfig,
    trace: bool,
    rng: &mut R,
) -> Result<VerificationReport> {
    if database.records.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if key.mode_count() != database.mode_count() {
        return Err(Error::ModeMismatch { database: database.mode_count(), key: key.mode_count() });
    }
    let channel = &database.channel;
    let p_expected = p_in_theoretical(channel);
    if config.epsilon >= p_expected / 2.0 {
        log::warn!("epsilon {} is not small compared with P_in = {p_expected}", config.epsilon);
    }

    // Step 1: the SLM is set to the enrolled mask for every session.
    let t = transfer(key, coupling, &database.mask)?;
    let means: Vec<[f64; 2]> = probe_amplitudes(&database.probe_set)
        .into_iter()
        .map(|alpha| {
            let b = t * alpha;
            [quadrature_mean(b, Quadrature::X.lo_phase()), quadrature_mean(b, Quadrature::Y.lo_phase())]
        })
        .collect();

    let n = database.records.len();
    let delta = channel.bin_width();
    let mut hits = 0u64;
    let mut sessions = trace.then(|| Vec::with_capacity(config.sessions as usize));
    for _ in 0..config.sessions {
        let k = rng.random_range(0..n);
        let quadrature = if rng.random::<bool>() { Quadrature::Y } else { Quadrature::X };
        let theta = quadrature.lo_phase();
        let mean = means[k][quadrature as usize];
        let outcome = sample_quadrature(mean, channel, rng);
        let hit = in_bin(outcome, &database.records[k].response(), theta, delta);
        hits += u64::from(hit);
        if let Some(s) = sessions.as_mut() {
            s.push(Session { k, theta, outcome, hit });
        }
    }

    let p_in = hits as f64 / config.sessions as f64;
    Ok(VerificationReport {
        sessions: config.sessions,
        hits,
        p_in,
        p_in_expected: p_expected,
        epsilon: config.epsilon,
        accepted: (p_in - p_expected).abs() < config.epsilon,
        enrollment_error: database.enrollment_error(),
        session_trace: sessions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;
    use crate::scattering::{enhancement, generate_key, uniform_coupling};
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    struct Fixture {
        key: ScatteringKey,
        coupling: CouplingProfile,
        probes: ProbeSet,
        channel: HomodyneChannel,
    }

    fn fig4(seed: u64) -> Fixture {
        let key = generate_key(121, 0.2, &mut Streams::new(seed).rng(0, 0)).unwrap();
        Fixture {
            key,
            coupling: uniform_coupling(121, 0.8).unwrap(),
            probes: ProbeSet::new(11, 2500.0).unwrap(),
            channel: HomodyneChannel::with_bin_ratio(0.55, 2.0).unwrap(),
        }
    }

    #[test]
    fn exact_enrollment_rotates_response_rigidly() {
        let f = fig4(1);
        let db = enroll_exact(&f.key, &f.coupling, &f.probes, &f.channel).unwrap();
        assert_eq!(db.records().len(), 11);
        let first = db.records()[0].response();
        for (k, r) in db.records().iter().enumerate() {
            assert_eq!(r.k, k);
            assert_eq!(r.xi, 0.0);
            let resp = r.response();
            assert_relative_eq!(resp.magnitude(), first.magnitude(), max_relative = 1e-12);
            let step = (resp.phase() - first.phase() - TAU * k as f64 / 11.0).rem_euclid(TAU);
            assert!(step.min(TAU - step) < 1e-10, "k={k}");
        }
    }

    #[test]
    fn exact_records_satisfy_optimized_quadrature_identity() {
        let f = fig4(2);
        let db = enroll_exact(&f.key, &f.coupling, &f.probes, &f.channel).unwrap();
        let mu_c = f.coupling.loss() * f.probes.mean_photons();
        let e = enhancement(&f.key, &f.coupling, db.mask(), mu_c).unwrap();
        let want = 2.0 * e * f.key.variance() * mu_c;
        for r in db.records() {
            assert_relative_eq!(r.x * r.x + r.y * r.y, want, max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_key_cannot_be_enrolled() {
        let key = ScatteringKey::new(vec![Complex64::new(0.0, 0.0); 4], 0.2, 0).unwrap();
        let f = fig4(3);
        let g = uniform_coupling(4, 0.8).unwrap();
        assert!(matches!(enroll_exact(&key, &g, &f.probes, &f.channel), Err(Error::DegenerateKey)));
    }

    #[test]
    fn sampled_enrollment_error_bound() {
        assert_eq!(estimation_error(25), 1.0);
        assert_eq!(enrollment_sample_total(11, 25), 550);
        // N = 10, xi = 0.1 * epsilon with epsilon = 1e-3 needs M_e = (5 / 1e-4)^2 = 2.5e9 per quadrature.
        let m_e = (5.0f64 / 1e-4).powi(2) as u64;
        assert_eq!(enrollment_sample_total(10, m_e), 50_000_000_000);
    }

    #[test]
    fn sampled_enrollment_records_error() {
        let f = fig4(4);
        let mut r = Streams::new(4).rng(1, 0);
        let db = enroll_sampled(&f.key, &f.coupling, &f.probes, &f.channel, 25, &mut r).unwrap();
        assert!(db.records().iter().all(|r| r.xi == 1.0));
        assert_eq!(db.enrollment_error(), 1.0);
        assert!(enroll_sampled(&f.key, &f.coupling, &f.probes, &f.channel, 0, &mut r).is_err());
    }

    #[test]
    fn sampled_enrollment_converges_to_exact() {
        let f = fig4(5);
        let probes = ProbeSet::new(3, 2500.0).unwrap();
        let exact = enroll_exact(&f.key, &f.coupling, &probes, &f.channel).unwrap();
        let mut r = Streams::new(5).rng(1, 0);
        let sampled = enroll_sampled(&f.key, &f.coupling, &probes, &f.channel, 10_000_000, &mut r).unwrap();
        for (a, b) in exact.records().iter().zip(sampled.records()) {
            assert!((a.x - b.x).abs() < 1e-2 && (a.y - b.y).abs() < 1e-2);
        }
        assert_eq!(sampled.mask(), exact.mask());
    }

    #[test]
    fn m_threshold_values() {
        let m = m_threshold(1e-3, 1e-3).unwrap();
        assert!((2.2e7..=2.4e7).contains(&(m as f64)));
        assert_eq!(m, 22_802_708);
        assert_eq!(m_threshold(0.05, 0.05).unwrap(), 4427);
        assert!(m_threshold(0.05, 2.0).is_err());
        assert!(m_threshold(0.0, 0.5).is_err());
    }

    #[test]
    fn e_threshold_values() {
        let e = e_threshold(2000.0, 121, 0.2).unwrap();
        assert!((e - 23.280_625).abs() < 1e-9, "{e}");
        assert_relative_eq!(e_threshold(2000.0, 256, 0.2).unwrap(), 27.04, max_relative = 1e-12);
        assert_relative_eq!(e_threshold(1e30, 1, 0.2).unwrap(), 16.0, max_relative = 1e-12);
        assert!(e_threshold(0.0, 1, 0.2).is_err());
    }

    #[test]
    fn radii_values() {
        let (rho_f, rho_t) = radii(2000.0, 0.8 / 256.0, 201.0);
        assert_eq!(rho_f, 10.0);
        assert!((rho_t - 35.443_617_196_894_563).abs() < 1e-12);
        let (rho_f, rho_t) = radii(3.0, 1.0 / 3.0, 16.0);
        assert_eq!(rho_f, 4.0);
        assert_eq!(rho_t, rho_f);
    }

    #[test]
    fn true_key_accepted_false_key_rejected() {
        let f = fig4(6);
        let db = enroll_exact(&f.key, &f.coupling, &f.probes, &f.channel).unwrap();
        let cfg = VerificationConfig::new(1000, 0.05, 0.05).unwrap();
        let s = Streams::new(6);
        let report = verify(&f.key, &db, &f.coupling, &cfg, &mut s.rng(2, 0)).unwrap();
        assert!(report.accepted, "{report:?}");
        assert!(report.deviation() < 0.05);

        let false_key = generate_key(121, 0.2, &mut s.rng(3, 0)).unwrap();
        let report = verify(&false_key, &db, &f.coupling, &cfg, &mut s.rng(2, 1)).unwrap();
        assert!(!report.accepted, "{report:?}");
        assert!(report.p_in < report.p_in_expected / 2.0);
    }

    #[test]
    fn single_session_report() {
        let f = fig4(7);
        let db = enroll_exact(&f.key, &f.coupling, &f.probes, &f.channel).unwrap();
        let cfg = VerificationConfig::new(1, 0.05, 0.05).unwrap();
        let report = verify_traced(&f.key, &db, &f.coupling, &cfg, &mut Streams::new(7).rng(2, 0)).unwrap();
        assert!(report.hits <= 1);
        assert!(report.p_in == 0.0 || report.p_in == 1.0);
        assert_eq!(report.session_trace.unwrap().len(), 1);
    }

    #[test]
    fn mode_count_mismatch_is_rejected() {
        let f = fig4(8);
        let db = enroll_exact(&f.key, &f.coupling, &f.probes, &f.channel).unwrap();
        let other = generate_key(64, 0.2, &mut Streams::new(8).rng(0, 1)).unwrap();
        let g = uniform_coupling(64, 0.8).unwrap();
        let cfg = VerificationConfig::new(10, 0.05, 0.05).unwrap();
        let err = verify(&other, &db, &g, &cfg, &mut Streams::new(8).rng(2, 0)).unwrap_err();
        assert!(matches!(err, Error::ModeMismatch { database: 121, key: 64 }));
    }

    #[test]
    fn bins_depend_only_on_database() {
        // Same stream, different keys: k and theta sequences coincide and every
        // recorded hit is explained by the enrolled response alone.
        let f = fig4(9);
        let db = enroll_exact(&f.key, &f.coupling, &f.probes, &f.channel).unwrap();
        let cfg = VerificationConfig::new(500, 0.05, 0.05).unwrap();
        let s = Streams::new(9);
        let other = generate_key(121, 0.2, &mut s.rng(3, 0)).unwrap();
        let a = verify_traced(&f.key, &db, &f.coupling, &cfg, &mut s.rng(2, 0)).unwrap();
        let b = verify_traced(&other, &db, &f.coupling, &cfg, &mut s.rng(2, 0)).unwrap();
        for (x, y) in a.session_trace.iter().flatten().zip(b.session_trace.iter().flatten()) {
            assert_eq!((x.k, x.theta), (y.k, y.theta));
        }
        for t in a.session_trace.iter().chain(b.session_trace.iter()).flatten() {
            let r = db.records()[t.k].response();
            assert_eq!(t.hit, in_bin(t.outcome, &r, t.theta, db.channel().bin_width()));
        }
    }

    #[test]
    fn hit_indicators_are_uncorrelated() {
        let f = fig4(10);
        let db = enroll_exact(&f.key, &f.coupling, &f.probes, &f.channel).unwrap();
        let cfg = VerificationConfig::new(20_000, 0.05, 0.05).unwrap();
        let report = verify_traced(&f.key, &db, &f.coupling, &cfg, &mut Streams::new(10).rng(2, 0)).unwrap();
        let hits: Vec<f64> = report.session_trace.unwrap().iter().map(|s| f64::from(u8::from(s.hit))).collect();
        let m = hits.len() as f64;
        let mean = hits.iter().sum::<f64>() / m;
        let var: f64 = hits.iter().map(|h| (h - mean).powi(2)).sum();
        let cov: f64 = hits.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let r1 = cov / var;
        assert!(r1.abs() < 4.0 / m.sqrt(), "lag-1 autocorrelation {r1}");
    }

    #[test]
    fn database_json_round_trip() {
        let f = fig4(11);
        let db = enroll_exact(&f.key, &f.coupling, &f.probes, &f.channel).unwrap();
        let s = serde_json::to_string(&db).unwrap();
        for field in ["target_mode", "probe_set", "channel", "setup_loss", "mask", "records", "\"xi\""] {
            assert!(s.contains(field), "missing {field}");
        }
        let back: CrpDatabase = serde_json::from_str(&s).unwrap();
        assert_eq!(back, db);
    }

    #[test]
    fn database_rejects_missing_records() {
        let f = fig4(12);
        let db = enroll_exact(&f.key, &f.coupling, &f.probes, &f.channel).unwrap();
        let mut records = db.records().to_vec();
        records.pop();
        let err = CrpDatabase::new(0, f.probes, f.channel, 0.8, db.mask().clone(), records);
        assert!(err.is_err());
        assert!(matches!(
            CrpDatabase::new(0, f.probes, f.channel, 0.8, db.mask().clone(), vec![]),
            Err(Error::EmptyDatabase)
        ));
    }

    #[test]
    fn trace_csv_header() {
        let f = fig4(13);
        let db = enroll_exact(&f.key, &f.coupling, &f.probes, &f.channel).unwrap();
        let cfg = VerificationConfig::new(3, 0.05, 0.05).unwrap();
        let report = verify_traced(&f.key, &db, &f.coupling, &cfg, &mut Streams::new(13).rng(2, 0)).unwrap();
        let mut buf = Vec::new();
        report.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,theta,outcome,hit\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
