//! Command-line front end. Exit status: 0 on success or acceptance, 1 when
//! verification rejects the key, 2 on any error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::error::Result;
use crate::experiments::{run_campaign, true_key, CampaignConfig};
use crate::homodyne::p_in_theoretical;
use crate::protocol::{
    e_threshold, enroll_exact, enroll_sampled, m_threshold, radii, verify_traced, CrpDatabase,
};
use crate::rng::{purpose, Streams};
use crate::scattering::{enhancement, uniform_coupling, ScatteringKey};

pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cvpuf", version, about = "Quantum authentication of optical physical unclonable keys")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// JSON config; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the session-count and enhancement thresholds for a config.
    Thresholds {
        #[command(flatten)]
        common: Common,
    },
    /// Generate (or load) a key and enroll it; writes key.json, database.json and config.json.
    Enroll {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify a key against an enrolled database; writes the report as JSON.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        database: PathBuf,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-session CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the experiment named by `experiment_id` in the config.
    Campaign {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; overrides the config.
        #[arg(long)]
        threads: Option<usize>,
    },
}

pub fn load_config(common: &Common) -> Result<CampaignConfig> {
    let mut config = match &common.config {
        Some(path) => CampaignConfig::from_json_file(path)?,
        None => CampaignConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_key(path: &Path) -> Result<ScatteringKey> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_database(path: &Path) -> Result<CrpDatabase> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Key and database produced by `enroll` for a config.
pub fn enroll(config: &CampaignConfig) -> Result<(ScatteringKey, CrpDatabase)> {
    let streams = Streams::new(config.seed);
    let key = match &config.key_path {
        Some(path) => read_key(path)?,
        None => true_key(config, config.n_modes, &streams)?,
    };
    let setup = config.setup(key.mode_count())?;
    let database = match config.enrollment_samples {
        None => enroll_exact(&key, &setup.coupling, &setup.probes, &setup.channel)?,
        Some(m) => enroll_sampled(
            &key,
            &setup.coupling,
            &setup.probes,
            &setup.channel,
            m,
            &mut streams.rng(purpose::ENROLL, 0),
        )?,
    };
    Ok((key, database))
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Thresholds { common } => {
            let c = load_config(&common)?;
            let setup = c.setup(c.n_modes)?;
            let mu_c = c.mean_challenge_photons();
            let variance = crate::scattering::coefficient_variance(c.n_modes, c.l_over_l);
            let e_mean = std::f64::consts::PI * c.n_modes as f64 / 4.0;
            let (rho_f, rho_t) = radii(mu_c, variance, e_mean);
            let out = json!({
                "m_threshold": m_threshold(c.epsilon, c.zeta)?,
                "e_threshold": e_threshold(mu_c, c.n_modes, c.l_over_l)?,
                "P_in": p_in_theoretical(&setup.channel),
                "shot_noise": setup.channel.shot_noise(),
                "bin_width": setup.channel.bin_width(),
                "mean_enhancement": e_mean,
                "rho_f": rho_f,
                "rho_t_at_mean_enhancement": rho_t,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(EXIT_ACCEPT)
        }
        Command::Enroll { common, out } => {
            let c = load_config(&common)?;
            let (key, database) = enroll(&c)?;
            fs::create_dir_all(&out)?;
            write_json(&out.join("key.json"), &key)?;
            write_json(&out.join("database.json"), &database)?;
            write_json(&out.join("config.json"), &c)?;
            let coupling = uniform_coupling(key.mode_count(), database.setup_loss())?;
            let e = enhancement(&key, &coupling, database.mask(), c.mean_challenge_photons())?;
            log::info!("enrolled {} modes, enhancement {e:.3}", key.mode_count());
            Ok(EXIT_ACCEPT)
        }
        Command::Verify { common, key, database, out, trace } => {
            let c = load_config(&common)?;
            let key = read_key(&key)?;
            let database = read_database(&database)?;
            let coupling = uniform_coupling(database.mode_count(), database.setup_loss())?;
            let setup = c.setup(database.mode_count())?;
            let report = verify_traced(
                &key,
                &database,
                &coupling,
                &setup.verification,
                &mut Streams::new(c.seed).rng(purpose::VERIFY, 0),
            )?;
            match out {
                Some(path) => write_json(&path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            if let Some(path) = trace {
                report.write_trace(fs::File::create(path)?)?;
            }
            Ok(if report.accepted { EXIT_ACCEPT } else { EXIT_REJECT })
        }
        Command::Campaign { common, out, threads } => {
            let mut c = load_config(&common)?;
            if threads.is_some() {
                c.threads = threads;
            }
            let output = run_campaign(&c, &out)?;
            log::info!("wrote {} files to {}", output.files.len(), output.dir.display());
            Ok(EXIT_ACCEPT)
        }
    }
}
