//! Monte Carlo campaigns: the false-key response cloud, the enhancement
//! threshold table, the collision histogram and the clone experiments.
//!
//! Each campaign is a pure function of its [`CampaignConfig`]; every trial
//! draws from its own stream, so outputs are identical for any thread count.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::adversary::{clone_trials, false_key_trials, summarize_cloud, CloneTrial, CloudSummary};
use crate::error::{param, Result};
use crate::homodyne::{p_in_theoretical, HomodyneChannel, ProbeSet, Response};
use crate::protocol::{
    e_threshold, enroll_exact, m_threshold, radii, verify, CrpDatabase, VerificationConfig, VerificationReport,
};
use crate::rng::{purpose, Streams};
use crate::scattering::{enhancement, generate_key, transfer, uniform_coupling, CouplingProfile, ScatteringKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    ResponseCloud,
    EnhancementCondition,
    CollisionHistogram,
    CloneCloud,
    CloneHistograms,
    CheatingCurve,
}

/// Simulation parameters shared by the CLI and the campaign runner.
/// Every field has a default, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub experiment_id: Option<ExperimentId>,
    pub n_modes: usize,
    #[serde(rename = "l_over_L")]
    pub l_over_l: f64,
    pub mu_p: f64,
    pub tau: f64,
    pub eta: f64,
    pub delta_over_sigma: f64,
    pub n_probe_states: usize,
    pub m_sessions: u64,
    pub epsilon: f64,
    pub zeta: f64,
    pub trials: usize,
    pub histogram_bin: f64,
    pub seed: u64,
    pub target_mode: usize,
    /// Clone fractions `D` for the clone experiments.
    pub d_values: Vec<f64>,
    /// Mode counts compared by the clone experiments.
    pub clone_mode_counts: Vec<usize>,
    /// Mean photons per incoming mode `mu_c / N` for the enhancement table.
    pub photons_per_mode: Vec<f64>,
    /// Mode counts tabulated by the enhancement table.
    pub mode_grid: Vec<usize>,
    /// Per-quadrature samples for sampled enrollment; `None` enrolls exactly.
    pub enrollment_samples: Option<u64>,
    /// Load the key from this file instead of generating one.
    pub key_path: Option<PathBuf>,
    /// Worker threads; `Some(1)` runs single-threaded. Does not affect
    /// results, so it is left out of the echoed config.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            experiment_id: None,
            n_modes: 121,
            l_over_l: 0.2,
            mu_p: 2500.0,
            tau: 0.8,
            eta: crate::homodyne::DEFAULT_EFFICIENCY,
            delta_over_sigma: 2.0,
            n_probe_states: 11,
            m_sessions: 1000,
            epsilon: 0.05,
            zeta: 0.05,
            trials: 500,
            histogram_bin: 0.01,
            seed: 1,
            target_mode: 0,
            d_values: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            clone_mode_counts: vec![121, 256, 625],
            photons_per_mode: vec![1.0, 2.0, 5.0, 2000.0 / 121.0, 50.0, 100.0],
            mode_grid: vec![16, 64, 121, 256, 625, 1024],
            enrollment_samples: None,
            key_path: None,
            threads: None,
        }
    }
}

/// Physical and protocol objects resolved from a config for one mode count.
#[derive(Debug, Clone)]
pub struct Setup {
    pub coupling: CouplingProfile,
    pub probes: ProbeSet,
    pub channel: HomodyneChannel,
    pub verification: VerificationConfig,
}

impl CampaignConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// `mu_c = tau mu_P`.
    pub fn mean_challenge_photons(&self) -> f64 {
        self.tau * self.mu_p
    }

    pub fn validate(&self) -> Result<()> {
        if self.histogram_bin <= 0.0 || self.histogram_bin > 1.0 {
            return Err(param(format!("histogram_bin must lie in (0, 1], got {}", self.histogram_bin)));
        }
        if self.d_values.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(param("d_values must lie in [0, 1]"));
        }
        if self.photons_per_mode.iter().any(|p| p.is_nan() || *p <= 0.0) {
            return Err(param("photons_per_mode values must be positive"));
        }
        if self.threads == Some(0) {
            return Err(param("threads must be at least 1"));
        }
        self.setup(self.n_modes).map(|_| ())
    }

    pub fn setup(&self, mode_count: usize) -> Result<Setup> {
        Ok(Setup {
            coupling: uniform_coupling(mode_count, self.tau)?,
            probes: ProbeSet::new(self.n_probe_states, self.mu_p)?,
            channel: HomodyneChannel::with_bin_ratio(self.eta, self.delta_over_sigma)?,
            verification: VerificationConfig::new(self.m_sessions, self.epsilon, self.zeta)?,
        })
    }

    fn require(&self, id: ExperimentId) -> Result<()> {
        match self.experiment_id {
            Some(found) if found == id => Ok(()),
            other => Err(param(format!("config is for experiment {other:?}, expected {id:?}"))),
        }
    }

    /// Runs `f` on a pool of `threads` workers, or the global pool when unset.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| param(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Histogram over `[0, 1]` with bins `[p, p + dp)`; the value 1 lands in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub normalization: u64,
}

impl Histogram {
    pub fn unit_interval(bin_width: f64) -> Self {
        let bins = ((1.0 / bin_width) - 1e-9).ceil().max(1.0) as usize;
        let edges = (0..=bins).map(|i| (i as f64 * bin_width).min(1.0)).collect();
        Self { edges, counts: vec![0; bins], normalization: 0 }
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn add(&mut self, value: f64) {
        self.normalization += 1;
        if !(0.0..=1.0).contains(&value) {
            return;
        }
        let bins = self.counts.len();
        let i = ((value / self.bin_width()).floor() as usize).min(bins - 1);
        // guard against edge rounding
        let i = if value < self.edges[i] { i.saturating_sub(1) } else { i };
        self.counts[i] += 1;
    }

    pub fn from_values(bin_width: f64, values: impl IntoIterator<Item = f64>) -> Self {
        let mut h = Self::unit_interval(bin_width);
        for v in values {
            h.add(v);
        }
        h
    }

    /// Centre of the fullest bin (the lowest one on ties).
    pub fn mode(&self) -> Option<f64> {
        let (i, &c) = self.counts.iter().enumerate().max_by_key(|(i, c)| (**c, std::cmp::Reverse(*i)))?;
        (c > 0).then(|| 0.5 * (self.edges[i] + self.edges[i + 1]))
    }
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn true_key(config: &CampaignConfig, mode_count: usize, streams: &Streams) -> Result<ScatteringKey> {
    let key = generate_key(mode_count, config.l_over_l, &mut streams.rng(purpose::TRUE_KEY, 0))?;
    ScatteringKey::new(key.coefficients().to_vec(), key.l_over_l(), config.target_mode)
}

#[derive(Debug, Clone)]
pub struct CollisionResult {
    pub histogram: Histogram,
    pub false_reports: Vec<VerificationReport>,
    pub true_report: VerificationReport,
    pub p_in_expected: f64,
    pub enhancement: f64,
}

impl CollisionResult {
    pub fn false_p_in(&self) -> Vec<f64> {
        self.false_reports.iter().map(|r| r.p_in).collect()
    }

    pub fn false_acceptance_rate(&self) -> f64 {
        if self.false_reports.is_empty() {
            return 0.0;
        }
        self.false_reports.iter().filter(|r| r.accepted).count() as f64 / self.false_reports.len() as f64
    }

    pub fn false_median_p_in(&self) -> Option<f64> {
        median(&self.false_p_in())
    }
}

/// One true key enrolled exactly, `trials` false keys and the true key each
/// verified with `m_sessions` sessions; false-key `p_in` binned with width `histogram_bin`.
pub fn run_collision_histogram(config: &CampaignConfig) -> Result<CollisionResult> {
    config.require(ExperimentId::CollisionHistogram)?;
    config.validate()?;
    let streams = Streams::new(config.seed);
    let setup = config.setup(config.n_modes)?;
    let key = true_key(config, config.n_modes, &streams)?;
    let database = enroll_exact(&key, &setup.coupling, &setup.probes, &setup.channel)?;
    let e = enhancement(&key, &setup.coupling, database.mask(), config.mean_challenge_photons())?;
    let true_report = verify(&key, &database, &setup.coupling, &setup.verification, &mut streams.rng(purpose::VERIFY, 0))?;
    let false_reports: Vec<VerificationReport> = config
        .install(|| {
            false_key_trials(&database, &setup.coupling, &setup.verification, config.l_over_l, config.trials, &streams)
        })??
        .into_iter()
        .map(|(_, r)| r)
        .collect();
    let histogram = Histogram::from_values(config.histogram_bin, false_reports.iter().map(|r| r.p_in));
    Ok(CollisionResult {
        histogram,
        false_reports,
        true_report,
        p_in_expected: p_in_theoretical(&setup.channel),
        enhancement: e,
    })
}

/// Lower and upper edge of the range of reported experimental enhancements.
pub const REPORTED_ENHANCEMENT_BAND: (f64, f64) = (50.0, 1000.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub photons_per_mode: f64,
    pub n_modes: usize,
    pub e_threshold: f64,
    /// Ensemble-mean optimal enhancement `pi N / 4` for comparison.
    pub mean_enhancement: f64,
    pub band_low: f64,
    pub band_high: f64,
}

/// Enhancement threshold for each photon number per mode, tabulated over `config.mode_grid`.
pub fn run_enhancement_condition(config: &CampaignConfig, photons_per_mode: &[f64]) -> Result<Vec<ThresholdRow>> {
    let mut rows = Vec::with_capacity(photons_per_mode.len() * config.mode_grid.len());
    for &ppm in photons_per_mode {
        if ppm.is_nan() || ppm <= 0.0 {
            return Err(param(format!("photons per mode must be positive, got {ppm}")));
        }
        for &n in &config.mode_grid {
            rows.push(ThresholdRow {
                photons_per_mode: ppm,
                n_modes: n,
                e_threshold: e_threshold(ppm * n as f64, n, config.l_over_l)?,
                mean_enhancement: std::f64::consts::PI * n as f64 / 4.0,
                band_low: REPORTED_ENHANCEMENT_BAND.0,
                band_high: REPORTED_ENHANCEMENT_BAND.1,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct ResponseCloud {
    pub true_response: Response,
    pub false_responses: Vec<Response>,
    pub enhancement: f64,
    pub rho_f: f64,
    pub rho_t: f64,
}

impl ResponseCloud {
    pub fn fraction_within(&self, radius: f64) -> f64 {
        if self.false_responses.is_empty() {
            return 1.0;
        }
        self.false_responses.iter().filter(|r| r.magnitude() <= radius).count() as f64
            / self.false_responses.len() as f64
    }
}

/// Single-session responses (probe `k = 0`) of the true key and `trials` false keys under the true key's mask.
pub fn run_response_cloud(config: &CampaignConfig) -> Result<ResponseCloud> {
    config.require(ExperimentId::ResponseCloud)?;
    config.validate()?;
    let streams = Streams::new(config.seed);
    let setup = config.setup(config.n_modes)?;
    let key = true_key(config, config.n_modes, &streams)?;
    let database = enroll_exact(&key, &setup.coupling, &setup.probes, &setup.channel)?;
    let mu_c = config.mean_challenge_photons();
    let e = enhancement(&key, &setup.coupling, database.mask(), mu_c)?;
    let (rho_f, rho_t) = radii(mu_c, key.variance(), e);
    let alpha0 = setup.probes.state(0).expect("probe set is non-empty").amplitude();
    let true_response = Response::from_amplitude(transfer(&key, &setup.coupling, database.mask())? * alpha0);
    let false_responses = config
        .install(|| {
            false_key_trials(&database, &setup.coupling, &setup.verification, config.l_over_l, config.trials, &streams)
        })??
        .into_iter()
        .map(|(r, _)| r)
        .collect();
    Ok(ResponseCloud { true_response, false_responses, enhancement: e, rho_f, rho_t })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheatingRow {
    #[serde(rename = "D")]
    pub d: f64,
    pub n_modes: usize,
    pub accept_rate: f64,
    pub trials: usize,
}

/// Clone trials for one mode count.
#[derive(Debug, Clone)]
pub struct CloneSeries {
    pub n_modes: usize,
    pub true_response: Response,
    pub true_report: VerificationReport,
    pub p_in_expected: f64,
    /// Trials grouped by fraction, in `d_values` order.
    pub trials: Vec<Vec<CloneTrial>>,
}

impl CloneSeries {
    pub fn cloud_summaries(&self) -> Vec<CloudSummary> {
        self.trials
            .iter()
            .filter(|t| !t.is_empty())
            .map(|t| {
                let pts: Vec<Response> = t.iter().map(|c| c.response).collect();
                summarize_cloud(t[0].fraction, self.true_response, &pts)
            })
            .collect()
    }

    pub fn cheating_rows(&self, d_values: &[f64]) -> Vec<CheatingRow> {
        d_values
            .iter()
            .zip(&self.trials)
            .map(|(&d, t)| CheatingRow {
                d,
                n_modes: self.n_modes,
                accept_rate: if t.is_empty() {
                    0.0
                } else {
                    t.iter().filter(|c| c.report.accepted).count() as f64 / t.len() as f64
                },
                trials: t.len(),
            })
            .collect()
    }

    pub fn histograms(&self, d_values: &[f64], bin_width: f64) -> Vec<(f64, Histogram)> {
        d_values
            .iter()
            .zip(&self.trials)
            .map(|(&d, t)| (d, Histogram::from_values(bin_width, t.iter().map(|c| c.report.p_in))))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CloneExperiments {
    pub d_values: Vec<f64>,
    pub series: Vec<CloneSeries>,
}

impl CloneExperiments {
    pub fn cheating_table(&self) -> Vec<CheatingRow> {
        self.series.iter().flat_map(|s| s.cheating_rows(&self.d_values)).collect()
    }
}

/// Clone clouds, `p_in` histograms and acceptance rates for every
/// `(N, D)` with `N` in `config.clone_mode_counts`.
pub fn run_clone_experiments(config: &CampaignConfig, d_values: &[f64]) -> Result<CloneExperiments> {
    config.validate()?;
    if d_values.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(param("clone fractions must lie in [0, 1]"));
    }
    let root = Streams::new(config.seed);
    let mut series = Vec::with_capacity(config.clone_mode_counts.len());
    for &n in &config.clone_mode_counts {
        let streams = root.child(n as u64);
        let setup = config.setup(n)?;
        let key = true_key(config, n, &streams)?;
        let database: CrpDatabase = enroll_exact(&key, &setup.coupling, &setup.probes, &setup.channel)?;
        let alpha0 = setup.probes.state(0).expect("probe set is non-empty").amplitude();
        let true_response = Response::from_amplitude(transfer(&key, &setup.coupling, database.mask())? * alpha0);
        let true_report =
            verify(&key, &database, &setup.coupling, &setup.verification, &mut streams.rng(purpose::VERIFY, 0))?;
        let trials = d_values
            .iter()
            .map(|&d| {
                config.install(|| {
                    clone_trials(&key, &database, &setup.coupling, &setup.verification, d, config.trials, &streams)
                })?
            })
            .collect::<Result<Vec<_>>>()?;
        series.push(CloneSeries {
            n_modes: n,
            true_response,
            true_report,
            p_in_expected: p_in_theoretical(&setup.channel),
            trials,
        });
    }
    Ok(CloneExperiments { d_values: d_values.to_vec(), series })
}

/// `runs` independent verifications of one true key at `m_sessions` sessions each.
pub fn true_key_coverage(config: &CampaignConfig, runs: usize) -> Result<Vec<VerificationReport>> {
    use rayon::prelude::*;
    config.validate()?;
    let streams = Streams::new(config.seed);
    let setup = config.setup(config.n_modes)?;
    let key = true_key(config, config.n_modes, &streams)?;
    let database = enroll_exact(&key, &setup.coupling, &setup.probes, &setup.channel)?;
    config.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                verify(&key, &database, &setup.coupling, &setup.verification, &mut streams.rng(purpose::COVERAGE, i as u64))
            })
            .collect()
    })?
}

// ---------------------------------------------------------------------------
// Output

/// Files written by a campaign.
#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }
}

fn histogram_rows(label: Vec<String>, h: &Histogram) -> impl Iterator<Item = Vec<String>> + '_ {
    h.counts.iter().enumerate().map(move |(i, c)| {
        let mut row = label.clone();
        row.extend([
            h.edges[i].to_string(),
            h.edges[i + 1].to_string(),
            c.to_string(),
            (*c as f64 / h.normalization.max(1) as f64).to_string(),
        ]);
        row
    })
}

/// Runs the experiment named in `config` and writes `config.json`, its CSV
/// tables and `summary.json` into `out_dir`.
pub fn run_campaign(config: &CampaignConfig, out_dir: &Path) -> Result<CampaignOutput> {
    let id = config.experiment_id.ok_or_else(|| param("config has no experiment_id"))?;
    config.validate()?;
    let mut w = Writer::new(out_dir)?;
    w.json("config.json", config)?;

    let summary = match id {
        ExperimentId::CollisionHistogram => {
            let r = run_collision_histogram(config)?;
            w.csv(
                "histogram.csv",
                &["p_low", "p_high", "count", "probability"],
                histogram_rows(vec![], &r.histogram),
            )?;
            w.csv(
                "false_keys.csv",
                &["trial", "p_in", "accepted"],
                r.false_reports.iter().enumerate().map(|(i, rep)| {
                    vec![i.to_string(), rep.p_in.to_string(), u8::from(rep.accepted).to_string()]
                }),
            )?;
            json!({
                "experiment_id": id,
                "P_in": r.p_in_expected,
                "true_key_p_in": r.true_report.p_in,
                "true_key_accepted": r.true_report.accepted,
                "false_key_acceptance_rate": r.false_acceptance_rate(),
                "false_key_median_p_in": r.false_median_p_in(),
                "histogram_mode": r.histogram.mode(),
                "enhancement": r.enhancement,
                "e_threshold": e_threshold(config.mean_challenge_photons(), config.n_modes, config.l_over_l)?,
                "m_threshold": m_threshold(config.epsilon, config.zeta)?,
                "trials": config.trials,
                "m_sessions": config.m_sessions,
            })
        }
        ExperimentId::EnhancementCondition => {
            let rows = run_enhancement_condition(config, &config.photons_per_mode)?;
            w.csv(
                "enhancement_threshold.csv",
                &["photons_per_mode", "n_modes", "e_threshold", "mean_enhancement", "band_low", "band_high"],
                rows.iter().map(|r| {
                    vec![
                        r.photons_per_mode.to_string(),
                        r.n_modes.to_string(),
                        r.e_threshold.to_string(),
                        r.mean_enhancement.to_string(),
                        r.band_low.to_string(),
                        r.band_high.to_string(),
                    ]
                }),
            )?;
            json!({
                "experiment_id": id,
                "band": [REPORTED_ENHANCEMENT_BAND.0, REPORTED_ENHANCEMENT_BAND.1],
                "rows": rows.len(),
            })
        }
        ExperimentId::ResponseCloud => {
            let c = run_response_cloud(config)?;
            let rows = std::iter::once(vec!["true".into(), "0".into(), c.true_response.x.to_string(), c.true_response.y.to_string()])
                .chain(c.false_responses.iter().enumerate().map(|(i, r)| {
                    vec!["false".into(), i.to_string(), r.x.to_string(), r.y.to_string()]
                }));
            w.csv("response_cloud.csv", &["role", "trial", "x", "y"], rows)?;
            json!({
                "experiment_id": id,
                "rho_f": c.rho_f,
                "rho_t": c.rho_t,
                "enhancement": c.enhancement,
                "true_response": c.true_response,
                "true_response_magnitude": c.true_response.magnitude(),
                "false_fraction_within_1.5_rho_f": c.fraction_within(1.5 * c.rho_f),
                "trials": config.trials,
            })
        }
        ExperimentId::CloneCloud | ExperimentId::CloneHistograms | ExperimentId::CheatingCurve => {
            let exp = config.install(|| run_clone_experiments(config, &config.d_values))??;
            clone_outputs(id, config, &exp, &mut w)?
        }
    };
    w.json("summary.json", &summary)?;
    Ok(CampaignOutput { dir: out_dir.to_path_buf(), files: w.files, summary })
}

fn clone_outputs(
    id: ExperimentId,
    config: &CampaignConfig,
    exp: &CloneExperiments,
    w: &mut Writer,
) -> Result<serde_json::Value> {
    let mut per_modes = Vec::new();
    for s in &exp.series {
        let n = s.n_modes;
        match id {
            ExperimentId::CloneCloud => {
                w.csv(
                    &format!("clone_cloud_N{n}.csv"),
                    &["D", "trial", "x", "y"],
                    s.trials.iter().flatten().map(|t| {
                        vec![t.fraction.to_string(), t.trial.to_string(), t.response.x.to_string(), t.response.y.to_string()]
                    }),
                )?;
                let summaries = s.cloud_summaries();
                w.csv(
                    &format!("clone_cloud_summary_N{n}.csv"),
                    &["D", "mean_x", "mean_y", "std_radius", "mean_distance"],
                    summaries.iter().map(|c| {
                        vec![
                            c.fraction.to_string(),
                            c.mean.x.to_string(),
                            c.mean.y.to_string(),
                            c.std_radius.to_string(),
                            c.mean_distance.to_string(),
                        ]
                    }),
                )?;
                per_modes.push(json!({
                    "n_modes": n,
                    "true_response": s.true_response,
                    "mean_distance": summaries.iter().map(|c| c.mean_distance).collect::<Vec<_>>(),
                }));
            }
            ExperimentId::CloneHistograms => {
                let hists = s.histograms(&exp.d_values, config.histogram_bin);
                w.csv(
                    &format!("clone_histograms_N{n}.csv"),
                    &["D", "p_low", "p_high", "count", "probability"],
                    hists.iter().flat_map(|(d, h)| histogram_rows(vec![d.to_string()], h)),
                )?;
                per_modes.push(json!({
                    "n_modes": n,
                    "true_key_p_in": s.true_report.p_in,
                    "true_key_accepted": s.true_report.accepted,
                }));
            }
            _ => {
                per_modes.push(json!({
                    "n_modes": n,
                    "true_key_p_in": s.true_report.p_in,
                    "true_key_accepted": s.true_report.accepted,
                    "accept_rate": s.cheating_rows(&exp.d_values).iter().map(|r| r.accept_rate).collect::<Vec<_>>(),
                }));
            }
        }
    }
    if id == ExperimentId::CheatingCurve {
        let table = exp.cheating_table();
        w.csv(
            "cheating.csv",
            &["D", "n_modes", "accept_rate", "trials"],
            table.iter().map(|r| vec![r.d.to_string(), r.n_modes.to_string(), r.accept_rate.to_string(), r.trials.to_string()]),
        )?;
    }
    Ok(json!({
        "experiment_id": id,
        "P_in": exp.series.first().map(|s| s.p_in_expected),
        "d_values": exp.d_values,
        "series": per_modes,
        "trials": config.trials,
        "m_sessions": config.m_sessions,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(id: ExperimentId) -> CampaignConfig {
        CampaignConfig { experiment_id: Some(id), ..Default::default() }
    }

    #[test]
    fn empty_json_is_default_config() {
        let c: CampaignConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, CampaignConfig::default());
        assert!(serde_json::from_str::<CampaignConfig>(r#"{"experiment_id": "nope"}"#).is_err());
        assert!(serde_json::from_str::<CampaignConfig>(r#"{"bogus": 1}"#).is_err());
        let c: CampaignConfig = serde_json::from_str(r#"{"experiment_id": "cheating_curve", "l_over_L": 0.3}"#).unwrap();
        assert_eq!(c.experiment_id, Some(ExperimentId::CheatingCurve));
        assert_eq!(c.l_over_l, 0.3);
    }

    #[test]
    fn histogram_binning() {
        let h = Histogram::from_values(0.01, [0.0, 0.005, 0.01, 0.683, 0.999, 1.0]);
        assert_eq!(h.counts.len(), 100);
        assert_eq!(h.edges.len(), 101);
        assert_eq!(h.edges[100], 1.0);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[68], 1);
        assert_eq!(h.counts[99], 2);
        assert_eq!(h.normalization, 6);
        assert_eq!(h.counts.iter().sum::<u64>(), 6);
        assert_eq!(h.mode(), Some(0.005));
        assert_eq!(Histogram::unit_interval(0.01).mode(), None);
    }

    #[test]
    fn zero_trials_still_verifies_true_key() {
        let c = CampaignConfig { trials: 0, ..cfg(ExperimentId::CollisionHistogram) };
        let r = run_collision_histogram(&c).unwrap();
        assert_eq!(r.histogram.normalization, 0);
        assert!(r.histogram.counts.iter().all(|&c| c == 0));
        assert_eq!(r.true_report.sessions, 1000);
        assert!((r.p_in_expected - 0.682_689_492_137_085_9).abs() < 1e-10);
    }

    #[test]
    fn wrong_experiment_is_rejected() {
        assert!(run_collision_histogram(&cfg(ExperimentId::ResponseCloud)).is_err());
        assert!(run_response_cloud(&CampaignConfig::default()).is_err());
    }

    #[test]
    fn threshold_table_values() {
        let c = CampaignConfig { mode_grid: vec![121, 256], ..cfg(ExperimentId::EnhancementCondition) };
        let rows = run_enhancement_condition(&c, &[2000.0 / 121.0, 7.8125, 1e12]).unwrap();
        assert_eq!(rows.len(), 6);
        assert!((rows[0].e_threshold - 23.280_625).abs() < 1e-9);
        assert!((rows[2].e_threshold - 27.04).abs() < 1e-9);
        assert!((rows[5].e_threshold - 16.0).abs() < 1e-3);
        assert!(rows.iter().all(|r| r.band_low == 50.0 && r.band_high == 1000.0));
        assert!(run_enhancement_condition(&c, &[0.0]).is_err());
    }

    #[test]
    fn response_cloud_geometry() {
        let c = CampaignConfig { n_modes: 256, ..cfg(ExperimentId::ResponseCloud) };
        let cloud = run_response_cloud(&c).unwrap();
        assert_eq!(cloud.rho_f, 10.0);
        assert!(cloud.fraction_within(1.5 * cloud.rho_f) >= 0.95);
        let mu_c = c.mean_challenge_photons();
        let v = 0.8 / 256.0;
        let want = (2.0 * cloud.enhancement * v * mu_c).sqrt();
        assert!((cloud.true_response.magnitude() / want - 1.0).abs() < 1e-12);

        let c4 = CampaignConfig { mu_p: 4.0 * c.mu_p, ..c.clone() };
        let cloud4 = run_response_cloud(&c4).unwrap();
        assert!((cloud4.rho_f / cloud.rho_f - 2.0).abs() < 1e-12);
        assert!((cloud4.rho_t / cloud.rho_t - 2.0).abs() < 1e-12);
        assert!((cloud4.true_response.magnitude() / cloud.true_response.magnitude() - 2.0).abs() < 1e-12);
        for (a, b) in cloud4.false_responses.iter().zip(&cloud.false_responses) {
            assert!((a.magnitude() - 2.0 * b.magnitude()).abs() < 1e-9);
        }
    }

    #[test]
    fn clone_experiment_shape() {
        let c = CampaignConfig {
            clone_mode_counts: vec![121],
            trials: 20,
            m_sessions: 200,
            ..cfg(ExperimentId::CheatingCurve)
        };
        let exp = run_clone_experiments(&c, &[0.0, 0.05]).unwrap();
        let table = exp.cheating_table();
        assert_eq!(table.len(), 2);
        assert_eq!(table[0].trials, 20);
        assert!(table[0].accept_rate >= table[1].accept_rate);
        let hists = exp.series[0].histograms(&exp.d_values, 0.01);
        assert_eq!(hists[0].1.normalization, 20);
    }
}
