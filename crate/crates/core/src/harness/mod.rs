//! Experiment orchestration: BLER sweeps, LLR statistics and bandit runs.
//!
//! Every experiment is a pure function of its [`ScenarioConfig`]. Sweep
//! points and replications draw from their own seeded streams and run in
//! parallel; results are collected in input order, so output files are
//! byte-identical between runs with the same configuration.

pub mod config;
pub mod ofdm_link;
pub mod stats;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{Experiment, LinkKind, LlrSource, NoiseModel, ScenarioConfig};
use ofdm_link::CodedOfdmLink;
pub use stats::{box_summary, cumulative_average, BoxSummary};

use crate::bandit::{enumerate_actions, Agent, CostParams};
use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::fec::LdpcCode;
use crate::feedback::{observe_bler, FeedbackConfig};
use crate::grid::ModulationScheme;
use crate::jammer::{JammerAction, JammingMethod};
use crate::rng::{indexed_stream, Stream};
use crate::victim5g::{SlotConfig, VictimLink};

/// One BLER sweep point. `method` is `none` for the unjammed reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub jnr_db: f64,
    pub method: String,
    pub scheme: String,
    pub rho: f64,
    pub blocks: usize,
    pub errors: usize,
    pub bler: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlrRow {
    pub snr_db: f64,
    pub jnr_db: f64,
    pub method: String,
    pub rho: f64,
    pub source: String,
    pub samples: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: usize,
}

/// One agent step. Column order is the bandit CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub replication: usize,
    pub scheme: ModulationScheme,
    pub rho: f64,
    pub method: JammingMethod,
    pub true_bler: f64,
    pub observed_bler: f64,
    pub cost: f64,
    pub cum_true_bler: f64,
    pub cum_observed_bler: f64,
}

/// All replications for one (JNR, lambda) pair plus the averaged curves.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditRun {
    pub jnr_db: f64,
    pub lambda: f64,
    pub replications: Vec<Vec<StepRecord>>,
    /// Mean over replications of the cumulative true BLER.
    pub curve_true: Vec<f64>,
    pub curve_observed: Vec<f64>,
}

impl BanditRun {
    pub fn final_true(&self) -> f64 {
        *self.curve_true.last().expect("runs have at least one step")
    }

    pub fn final_observed(&self) -> f64 {
        *self.curve_observed.last().expect("runs have at least one step")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CurveRow {
    jnr_db: f64,
    lambda: f64,
    t: usize,
    true_bler: f64,
    observed_bler: f64,
}

fn load_code(cfg: &ScenarioConfig, default: fn() -> LdpcCode) -> Result<Arc<LdpcCode>> {
    Ok(Arc::new(match &cfg.decoder.code_file {
        Some(path) => LdpcCode::from_alist(&fs::read_to_string(path)?)?,
        None => default(),
    }))
}

fn coded_ofdm_link(cfg: &ScenarioConfig) -> Result<CodedOfdmLink> {
    CodedOfdmLink::new(
        load_code(cfg, LdpcCode::coded_ofdm_default)?,
        cfg.decoder.max_iters,
        cfg.noise_model,
    )
}

fn slot_link(cfg: &ScenarioConfig) -> Result<VictimLink> {
    let slot = SlotConfig {
        max_iters: cfg.decoder.max_iters,
        ..cfg.slot.clone()
    };
    VictimLink::new(slot, load_code(cfg, LdpcCode::nr_default)?)
}

#[derive(Debug, Clone, Copy)]
struct Point {
    snr_db: f64,
    jnr_db: f64,
    action: Option<JammerAction>,
}

fn sweep_points(cfg: &ScenarioConfig) -> Result<Vec<Point>> {
    let mut points = Vec::new();
    for &snr_db in &cfg.snr_db {
        for &jnr_db in &cfg.jnr_db {
            if cfg.include_unjammed {
                points.push(Point {
                    snr_db,
                    jnr_db,
                    action: None,
                });
            }
            for &method in &cfg.methods {
                for &scheme in &cfg.schemes {
                    for &rho in &cfg.rho {
                        let action = Some(JammerAction::new(scheme, rho, method)?);
                        points.push(Point {
                            snr_db,
                            jnr_db,
                            action,
                        });
                    }
                }
            }
        }
    }
    Ok(points)
}

fn point_channel(cfg: &ScenarioConfig, p: &Point) -> ChannelConfig {
    ChannelConfig::new(p.snr_db, p.jnr_db).coherent(cfg.is_coherent())
}

fn method_label(p: &Point) -> (String, String, f64) {
    match p.action {
        Some(a) => (a.method.to_string(), a.scheme.to_string(), a.rho),
        None => ("none".into(), "none".into(), 0.0),
    }
}

/// Mean BLER per (SNR, JNR, method, scheme, rho) with a binomial standard
/// error, `blocks_per_point` codewords each.
pub fn run_bler_sweep(cfg: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let points = sweep_points(cfg)?;
    let ofdm = match cfg.link {
        LinkKind::CodedOfdm => Some(coded_ofdm_link(cfg)?),
        LinkKind::NrSlot => None,
    };
    let slot = match cfg.link {
        LinkKind::NrSlot => Some(slot_link(cfg)?),
        LinkKind::CodedOfdm => None,
    };
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = indexed_stream(cfg.seed, Stream::Sweep, i as u32);
            let chan = point_channel(cfg, p);
            let mut outcomes: Vec<bool> = Vec::with_capacity(cfg.blocks_per_point);
            while outcomes.len() < cfg.blocks_per_point {
                match (&ofdm, &slot) {
                    (Some(link), _) => {
                        let f = link.run_frame(p.action.as_ref(), &chan, None, &mut rng)?;
                        outcomes.extend(f.success);
                    }
                    (_, Some(link)) => {
                        let r = link.run_link_step(p.action.as_ref(), &chan, &mut rng)?;
                        outcomes.extend(r.acks);
                    }
                    _ => unreachable!("one link is always built"),
                }
            }
            outcomes.truncate(cfg.blocks_per_point);
            let errors = outcomes.iter().filter(|&&ok| !ok).count();
            let bler = errors as f64 / outcomes.len() as f64;
            let (method, scheme, rho) = method_label(p);
            Ok(SweepRow {
                snr_db: p.snr_db,
                jnr_db: p.jnr_db,
                method,
                scheme,
                rho,
                blocks: outcomes.len(),
                errors,
                bler,
                std_err: stats::binomial_se(bler, outcomes.len()),
            })
        })
        .collect()
}

/// Box-plot statistics of sign-corrected LLRs on the coded-OFDM link.
pub fn run_llr_stats(cfg: &ScenarioConfig) -> Result<Vec<LlrRow>> {
    cfg.validate()?;
    let link = coded_ofdm_link(cfg)?;
    let points = sweep_points(cfg)?;
    let source = match cfg.llr_source {
        LlrSource::Channel => "channel",
        LlrSource::Decoded => "decoded",
    };
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = indexed_stream(cfg.seed, Stream::Sweep, i as u32);
            let chan = point_channel(cfg, p);
            let mut llrs = Vec::new();
            let mut blocks = 0;
            while blocks < cfg.blocks_per_point {
                let f = link.run_frame(p.action.as_ref(), &chan, Some(cfg.llr_source), &mut rng)?;
                blocks += f.success.len();
                llrs.extend(f.llrs);
            }
            let b = box_summary(&llrs)?;
            let (method, _, rho) = method_label(p);
            Ok(LlrRow {
                snr_db: p.snr_db,
                jnr_db: p.jnr_db,
                method,
                rho,
                source: source.into(),
                samples: b.samples,
                min: b.min,
                q1: b.q1,
                median: b.median,
                q3: b.q3,
                max: b.max,
                iqr: b.iqr,
                lower_whisker: b.lower_whisker,
                upper_whisker: b.upper_whisker,
                outliers: b.outliers,
            })
        })
        .collect()
}

/// Lambdas actually run: the perfect-feedback baseline first when enabled.
pub fn bandit_lambdas(cfg: &ScenarioConfig) -> Vec<f64> {
    let mut out = Vec::new();
    if cfg.bandit.baseline && !cfg.lambda.contains(&0.0) {
        out.push(0.0);
    }
    out.extend(cfg.lambda.iter().copied());
    out
}

/// One replication of the learning loop against the slot link.
pub fn run_bandit_replication(
    cfg: &ScenarioConfig,
    link: &VictimLink,
    jnr_db: f64,
    lambda: f64,
    replication: usize,
) -> Result<Vec<StepRecord>> {
    let seed = cfg.seed.wrapping_add(replication as u64);
    let mut agent_rng = indexed_stream(seed, Stream::Agent, 0);
    let mut env_rng = indexed_stream(seed, Stream::Environment, 0);
    let mut fb_rng = indexed_stream(seed, Stream::Feedback, 0);
    let space = enumerate_actions(&cfg.schemes, cfg.m, &cfg.methods)?;
    let params = CostParams {
        bler_target: cfg.bandit.bler_target,
        jnr_db,
        tau: cfg.tau,
    };
    let mut agent = Agent::new(space, params, cfg.bandit.obs_noise_var)?;
    let chan = ChannelConfig::new(cfg.snr_db[0], jnr_db).coherent(cfg.is_coherent());
    let feedback = FeedbackConfig {
        model: cfg.bandit.feedback_model,
        ..FeedbackConfig::symmetric(lambda)
    };

    let mut records: Vec<StepRecord> = Vec::with_capacity(cfg.steps);
    let (mut sum_true, mut sum_obs, mut n_obs) = (0.0, 0.0, 0usize);
    for t in 1..=cfg.steps {
        let idx = agent.choose(&mut agent_rng)?;
        let action = *agent.space().get(idx);
        let step = link.run_link_step(Some(&action), &chan, &mut env_rng)?;
        let observed = observe_bler(&step.acks, &feedback, &mut fb_rng)?;
        let cost = match observed {
            Some(b) => agent.learn(idx, b)?,
            None => f64::NAN,
        };
        sum_true += step.true_bler;
        if let Some(b) = observed {
            sum_obs += b;
            n_obs += 1;
        }
        records.push(StepRecord {
            t,
            replication,
            scheme: action.scheme,
            rho: action.rho,
            method: action.method,
            true_bler: step.true_bler,
            observed_bler: observed.unwrap_or(f64::NAN),
            cost,
            cum_true_bler: sum_true / t as f64,
            cum_observed_bler: if n_obs > 0 {
                sum_obs / n_obs as f64
            } else {
                f64::NAN
            },
        });
    }
    Ok(records)
}

fn mean_curve(reps: &[Vec<StepRecord>], pick: fn(&StepRecord) -> f64) -> Vec<f64> {
    let steps = reps[0].len();
    (0..steps)
        .map(|t| reps.iter().map(|r| pick(&r[t])).sum::<f64>() / reps.len() as f64)
        .collect()
}

/// Learning runs for every configured JNR and lambda (plus the lambda = 0
/// baseline). Replication `r` uses seed `seed + r` for every lambda, so
/// runs differing only in lambda share their environment streams.
pub fn run_bandit_experiment(cfg: &ScenarioConfig) -> Result<Vec<BanditRun>> {
    cfg.validate()?;
    let link = slot_link(cfg)?;
    let mut runs = Vec::new();
    for &jnr_db in &cfg.jnr_db {
        for lambda in bandit_lambdas(cfg) {
            let replications: Vec<Vec<StepRecord>> = (0..cfg.replications)
                .into_par_iter()
                .map(|r| run_bandit_replication(cfg, &link, jnr_db, lambda, r))
                .collect::<Result<_>>()?;
            runs.push(BanditRun {
                jnr_db,
                lambda,
                curve_true: mean_curve(&replications, |s| s.cum_true_bler),
                curve_observed: mean_curve(&replications, |s| s.cum_observed_bler),
                replications,
            });
        }
    }
    Ok(runs)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// File name of the per-step CSV for one bandit run.
pub fn bandit_file_name(jnr_db: f64, lambda: f64) -> String {
    format!("bandit_jnr{jnr_db}_lambda{lambda}.csv")
}

/// Run the configured experiment and write its CSV files into `out`.
/// Returns the files written.
pub fn run_experiment(cfg: &ScenarioConfig, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    match cfg.experiment {
        Experiment::BlerSweep => {
            let path = out.join("bler_sweep.csv");
            write_csv(&path, &run_bler_sweep(cfg)?)?;
            written.push(path);
        }
        Experiment::LlrStats => {
            let path = out.join("llr_stats.csv");
            write_csv(&path, &run_llr_stats(cfg)?)?;
            written.push(path);
        }
        Experiment::Bandit => {
            let runs = run_bandit_experiment(cfg)?;
            let mut curves = Vec::new();
            for run in &runs {
                let path = out.join(bandit_file_name(run.jnr_db, run.lambda));
                let flat: Vec<&StepRecord> = run.replications.iter().flatten().collect();
                write_csv(&path, &flat)?;
                written.push(path);
                curves.extend(run.curve_true.iter().zip(&run.curve_observed).enumerate().map(
                    |(t, (&tr, &ob))| CurveRow {
                        jnr_db: run.jnr_db,
                        lambda: run.lambda,
                        t: t + 1,
                        true_bler: tr,
                        observed_bler: ob,
                    },
                ));
            }
            let path = out.join("bandit_curves.csv");
            write_csv(&path, &curves)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Load a config file for `experiment`: keys missing from the file take
/// that experiment's defaults. A conflicting `experiment` key is an error.
pub fn load_config(path: Option<&Path>, experiment: Experiment) -> Result<ScenarioConfig> {
    let defaults = ScenarioConfig::for_experiment(experiment);
    let Some(path) = path else {
        return Ok(defaults);
    };
    let text = fs::read_to_string(path)?;
    let user: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    if let Some(v) = user.get("experiment") {
        if v.as_str() != Some(experiment.name()) {
            return Err(Error::Config(format!(
                "config is for experiment {v}, not {}",
                experiment.name()
            )));
        }
    }
    let mut merged: toml::Table =
        toml::from_str(&defaults.to_toml()?).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut merged, user);
    let cfg: ScenarioConfig = toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_sweep() -> ScenarioConfig {
        ScenarioConfig {
            snr_db: vec![12.0],
            rho: vec![0.5, 1.0],
            methods: vec![JammingMethod::Symbol],
            blocks_per_point: 30,
            ..ScenarioConfig::for_experiment(Experiment::BlerSweep)
        }
    }

    #[test]
    fn sweep_rows_are_consistent() {
        let rows = run_bler_sweep(&tiny_sweep()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].method, "none");
        for r in &rows {
            assert_eq!(r.blocks, 30);
            assert_eq!(r.bler, r.errors as f64 / 30.0);
        }
        assert_eq!(rows, run_bler_sweep(&tiny_sweep()).unwrap());
    }

    #[test]
    fn llr_rows_cover_points() {
        let cfg = ScenarioConfig {
            blocks_per_point: 20,
            ..ScenarioConfig::for_experiment(Experiment::LlrStats)
        };
        let rows = run_llr_stats(&cfg).unwrap();
        assert_eq!(rows.len(), 1 + 2 * 3);
        assert!(rows.iter().all(|r| r.samples >= 20 * 162 && r.q1 <= r.q3));
    }

    #[test]
    fn bandit_records_are_recomputable() {
        let cfg = ScenarioConfig {
            steps: 6,
            replications: 2,
            lambda: vec![0.1],
            m: 2,
            slot: SlotConfig {
                frames_per_step: 1,
                slots_per_frame: 1,
                ..SlotConfig::default()
            },
            ..ScenarioConfig::for_experiment(Experiment::Bandit)
        };
        let runs = run_bandit_experiment(&cfg).unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].lambda, 0.0);
        for run in &runs {
            for rep in &run.replications {
                let cum = cumulative_average(&rep.iter().map(|s| s.true_bler).collect::<Vec<_>>()).unwrap();
                for (s, c) in rep.iter().zip(cum) {
                    assert!((s.cum_true_bler - c).abs() < 1e-12);
                }
            }
        }
        let base = &runs[0];
        for rep in &base.replications {
            for s in rep {
                assert_eq!(s.true_bler, s.observed_bler);
            }
        }
    }

    #[test]
    fn experiment_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "experiment = \"llr_stats\"\n").unwrap();
        assert!(load_config(Some(&path), Experiment::Bandit).is_err());
        fs::write(&path, "steps = 7\n[slot]\nslots_per_frame = 2\n").unwrap();
        let cfg = load_config(Some(&path), Experiment::Bandit).unwrap();
        assert_eq!(cfg.steps, 7);
        assert_eq!(cfg.link, LinkKind::NrSlot);
        assert_eq!(cfg.slot.slots_per_frame, 2);
        assert_eq!(cfg.slot.frames_per_step, 4);
    }
}
