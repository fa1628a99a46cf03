//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use cvpuf::experiments::{
    run_campaign, run_clone_experiments, run_collision_histogram, true_key_coverage, CampaignConfig, ExperimentId,
};
use cvpuf::homodyne::{p_in_theoretical, HomodyneChannel, ProbeSet, Response};
use cvpuf::protocol::{e_threshold, enroll_exact, m_threshold, radii};
use cvpuf::rng::{purpose, Streams};
use cvpuf::scattering::{enhancement, generate_key, optimal_mask, transfer, uniform_coupling, PhaseMask};
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn constants() -> Outcome {
    let channel = HomodyneChannel::with_bin_ratio(0.55, 2.0).map_err(|e| e.to_string())?;
    let p_in = p_in_theoretical(&channel);
    let m = m_threshold(1e-3, 1e-3).map_err(|e| e.to_string())?;
    let e_th = e_threshold(2000.0, 121, 0.2).map_err(|e| e.to_string())?;
    let (rho_f, rho_t) = radii(2000.0, 0.8 / 256.0, 201.0);
    let ok = (p_in - 0.682_689_492_137_085_9).abs() < 1e-9
        && (2.2e7..=2.4e7).contains(&(m as f64))
        && (22.0..=24.0).contains(&e_th)
        && rho_f == 10.0
        && (35.0..=36.0).contains(&rho_t);
    check(ok, format!("P_in={p_in:.12} M_th={m} E_th={e_th:.4} rho_f={rho_f} rho_t={rho_t:.4}"))
}

fn mean_enhancement(n: usize, keys: u64, seed: u64) -> Result<f64, String> {
    let coupling = uniform_coupling(n, 0.8).map_err(|e| e.to_string())?;
    let streams = Streams::new(seed).child(n as u64);
    let total: f64 = (0..keys)
        .into_par_iter()
        .map(|i| {
            let key = generate_key(n, 0.2, &mut streams.rng(purpose::TRUE_KEY, i)).unwrap();
            let mask = optimal_mask(&key, &coupling).unwrap();
            enhancement(&key, &coupling, &mask, 2000.0).unwrap()
        })
        .sum();
    Ok(total / keys as f64)
}

fn enhancement_scaling() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for n in [121usize, 256] {
        let mean = mean_enhancement(n, 400, 2)?;
        let target = std::f64::consts::PI * n as f64 / 4.0;
        ok &= (mean / target - 1.0).abs() < 0.10;
        detail.push(format!("N={n}: mean E={mean:.2} vs pi N/4={target:.2}"));
    }
    check(ok, detail.join("; "))
}

fn collision_resistance() -> Outcome {
    let config = CampaignConfig { experiment_id: Some(ExperimentId::CollisionHistogram), ..Default::default() };
    let r = run_collision_histogram(&config).map_err(|e| e.to_string())?;
    let rejected = 1.0 - r.false_acceptance_rate();
    let mode = r.histogram.mode().unwrap_or(f64::NAN);
    let median = r.false_median_p_in().unwrap_or(f64::NAN);
    let ok = r.true_report.accepted
        && rejected >= 0.99
        && mode < r.p_in_expected / 2.0
        && median <= 0.2 * r.p_in_expected;
    check(
        ok,
        format!(
            "true p_in={:.3} accepted={} false rejected={:.3} mode={mode:.3} median={median:.3} P_in={:.4}",
            r.true_report.p_in, r.true_report.accepted, rejected, r.p_in_expected
        ),
    )
}

fn ensemble_statistics() -> Outcome {
    let (n, l_over_l, tau, mu_p) = (121usize, 0.2, 0.8, 2500.0);
    let keys = 10_000u64;
    let coupling = uniform_coupling(n, tau).map_err(|e| e.to_string())?;
    let probes = ProbeSet::new(11, mu_p).map_err(|e| e.to_string())?;
    let alpha0 = probes.state(0).unwrap().amplitude();
    let mask = PhaseMask::flat(n);
    let streams = Streams::new(4);
    let samples: Vec<f64> = (0..keys)
        .into_par_iter()
        .map(|i| {
            let key = generate_key(n, l_over_l, &mut streams.rng(purpose::TRUE_KEY, i)).unwrap();
            Response::from_amplitude(transfer(&key, &coupling, &mask).unwrap() * alpha0).magnitude().powi(2)
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / keys as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (keys - 1) as f64;
    let se = (var / keys as f64).sqrt();
    let target = 2.0 * (1.0 - l_over_l) / n as f64 * tau * mu_p;
    let z = (mean - target) / se;

    // every exact-enrollment record: |R_k|^2 = 2 E V mu_c
    let channel = HomodyneChannel::with_bin_ratio(0.55, 2.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..200 {
        let key = generate_key(n, l_over_l, &mut streams.rng(purpose::ENROLL, i)).unwrap();
        let db = enroll_exact(&key, &coupling, &probes, &channel).map_err(|e| e.to_string())?;
        let e = enhancement(&key, &coupling, db.mask(), tau * mu_p).map_err(|e| e.to_string())?;
        let want = 2.0 * e * key.variance() * tau * mu_p;
        for r in db.records() {
            worst = worst.max((r.response().magnitude().powi(2) / want - 1.0).abs());
        }
    }
    check(
        z.abs() <= 3.0 && worst <= 1e-9,
        format!("mean |R|^2={mean:.4} vs 2 V mu_c={target:.4} ({z:+.2} SE); worst record error {worst:.1e}"),
    )
}

fn chernoff_coverage() -> Outcome {
    let (epsilon, zeta, runs) = (0.05, 0.05, 200usize);
    let m = m_threshold(epsilon, zeta).map_err(|e| e.to_string())?;
    let config = CampaignConfig { m_sessions: m, epsilon, zeta, seed: 5, ..Default::default() };
    let reports = true_key_coverage(&config, runs).map_err(|e| e.to_string())?;
    let failures = reports.iter().filter(|r| r.deviation() >= epsilon).count();
    let rate = failures as f64 / runs as f64;
    let bound = zeta + 3.0 * (zeta * (1.0 - zeta) / runs as f64).sqrt();
    check(
        m == 4427 && rate <= bound,
        format!("M={m}: {failures}/{runs} runs with |p_in-P_in|>=eps (rate {rate:.3}, bound {bound:.3})"),
    )
}

fn clone_detectability() -> Outcome {
    let d_values = [0.0, 0.01, 0.02, 0.03, 0.05];
    let config = CampaignConfig {
        experiment_id: Some(ExperimentId::CheatingCurve),
        clone_mode_counts: vec![121, 256, 625],
        trials: 500,
        m_sessions: 1000,
        epsilon: 0.05,
        ..Default::default()
    };
    let exp = run_clone_experiments(&config, &d_values).map_err(|e| e.to_string())?;
    let table = exp.cheating_table();
    let rate = |d: f64, n: usize| table.iter().find(|r| r.d == d && r.n_modes == n).map(|r| r.accept_rate).unwrap();
    let se = |p: f64| (p * (1.0 - p) / 500.0).sqrt();

    let mut ok = true;
    let mut detail = Vec::new();
    for &n in &config.clone_mode_counts {
        let rates: Vec<f64> = d_values.iter().map(|&d| rate(d, n)).collect();
        ok &= rates[0] >= 1.0 - config.zeta;
        let mut inversions = 0;
        for w in rates.windows(2) {
            if w[1] > w[0] {
                inversions += 1;
                let tol = 2.0 * (se(w[0]).powi(2) + se(w[1]).powi(2)).sqrt();
                ok &= w[1] - w[0] <= tol;
            }
        }
        ok &= inversions <= 1;
        detail.push(format!("N={n} {rates:?}"));
    }
    let at3: Vec<f64> = config.clone_mode_counts.iter().map(|&n| rate(0.03, n)).collect();
    ok &= at3.windows(2).all(|w| w[1] <= w[0]);
    detail.push(format!("D=0.03 by N {at3:?}"));
    check(ok, detail.join("; "))
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ids = [
        ExperimentId::ResponseCloud,
        ExperimentId::EnhancementCondition,
        ExperimentId::CollisionHistogram,
        ExperimentId::CloneCloud,
        ExperimentId::CloneHistograms,
        ExperimentId::CheatingCurve,
    ];
    let mut compared = 0;
    for (i, id) in ids.into_iter().enumerate() {
        let base = CampaignConfig { experiment_id: Some(id), trials: 100, seed: 7, ..Default::default() };
        let runs = [None, None, Some(1)].map(|threads| {
            let dir = tmp.path().join(format!("{i}-{threads:?}-{}", rand_suffix()));
            run_campaign(&CampaignConfig { threads, ..base.clone() }, &dir).map(|_| read_dir(&dir))
        });
        let [a, b, c] = runs;
        let (a, b, c) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?, c.map_err(|e| e.to_string())?);
        if a != b || a != c {
            return Err(format!("{id:?}: outputs differ between identical runs"));
        }
        compared += a.len();
    }
    Ok(format!("{compared} files byte-identical across repeated and single-threaded runs"))
}

fn rand_suffix() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static NEXT: AtomicU64 = AtomicU64::new(0);
    NEXT.fetch_add(1, Ordering::Relaxed)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("theoretical constants", constants),
        ("enhancement scaling", enhancement_scaling),
        ("collision resistance", collision_resistance),
        ("ensemble statistics", ensemble_statistics),
        ("chernoff coverage", chernoff_coverage),
        ("clone detectability", clone_detectability),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
