//! The seven-metric suite over episode traces, and multi-seed evaluation
//! campaigns across scenario variants.

use crate::geom::Vec2;
use crate::trace::EpisodeTrace;
use crate::world::Event;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Aggregate metrics over a set of episodes.
///
/// SR/CR/TR are exact count ratios; NT averages over successful episodes only
/// (None when there were no successes); PL averages over all episodes; ITR is
/// the mean per-episode fraction of danger steps; SD is the mean of the
/// minimal distances logged at danger steps (None when no danger occurred).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub episodes: usize,
    pub sr: f64,
    pub cr: f64,
    pub tr: f64,
    pub nt: Option<f64>,
    pub pl: f64,
    pub itr: f64,
    pub sd: Option<f64>,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot compute metrics over an empty trace set")]
    Empty,
    #[error("trace {0} has no terminal event")]
    NonTerminal(usize),
}

/// Checks whether the robot center is within r_ego + r_h of any human
/// ground-truth position over the lookahead window; returns the minimal
/// distance to the window's positions when flagged.
pub fn danger_check(
    robot_pos: Vec2,
    future: &[&[Vec2]],
    r_ego: f64,
    radii: &[f64],
) -> (bool, Option<f64>) {
    let mut flagged = false;
    let mut min_dist = f64::INFINITY;
    for frame in future {
        for (h, &p) in frame.iter().enumerate() {
            let d = robot_pos.distance(p);
            if d < r_ego + radii[h] {
                flagged = true;
            }
            min_dist = min_dist.min(d);
        }
    }
    if flagged {
        (true, Some(min_dist))
    } else {
        (false, None)
    }
}

/// Computes the metric table from a set of terminated episode traces.
pub fn compute_metrics(traces: &[EpisodeTrace]) -> Result<MetricsTable, MetricsError> {
    if traces.is_empty() {
        return Err(MetricsError::Empty);
    }
    let total = traces.len();
    let mut successes = 0usize;
    let mut collisions = 0usize;
    let mut timeouts = 0usize;
    let mut success_time = 0.0;
    let mut path_total = 0.0;
    let mut itr_total = 0.0;
    let mut sd_sum = 0.0;
    let mut sd_count = 0usize;

    for (i, trace) in traces.iter().enumerate() {
        match trace.outcome() {
            Event::ReachedGoal => {
                successes += 1;
                success_time += trace.sim_seconds();
            }
            Event::Collision => collisions += 1,
            Event::Timeout => timeouts += 1,
            Event::Running => return Err(MetricsError::NonTerminal(i)),
        }
        path_total += trace.path_length();

        let steps = trace.steps.len().max(1);
        let danger_steps = trace.steps.iter().filter(|s| s.danger).count();
        itr_total += danger_steps as f64 / steps as f64;
        for s in &trace.steps {
            if let Some(d) = s.min_distance {
                sd_sum += d;
                sd_count += 1;
            }
        }
    }

    Ok(MetricsTable {
        episodes: total,
        sr: successes as f64 / total as f64,
        cr: collisions as f64 / total as f64,
        tr: timeouts as f64 / total as f64,
        nt: (successes > 0).then(|| success_time / successes as f64),
        pl: path_total / total as f64,
        itr: itr_total / total as f64,
        sd: (sd_count > 0).then(|| sd_sum / sd_count as f64),
    })
}

/// Mean and standard deviation of each metric across per-seed tables
/// (population std over the provided tables).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregatedMetrics {
    pub variant: String,
    pub mean: MetricsTable,
    pub std: MetricsTable,
}

fn mean_std<I: Iterator<Item = f64> + Clone>(values: I) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
    (mean, var.sqrt())
}

pub fn aggregate(variant: &str, tables: &[MetricsTable]) -> AggregatedMetrics {
    let get = |f: fn(&MetricsTable) -> f64| mean_std(tables.iter().map(f));
    let opt = |f: fn(&MetricsTable) -> Option<f64>| {
        let present: Vec<f64> = tables.iter().filter_map(f).collect();
        if present.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_std(present.iter().copied());
            (Some(m), Some(s))
        }
    };
    let (sr, sr_s) = get(|t| t.sr);
    let (cr, cr_s) = get(|t| t.cr);
    let (tr, tr_s) = get(|t| t.tr);
    let (pl, pl_s) = get(|t| t.pl);
    let (itr, itr_s) = get(|t| t.itr);
    let (nt, nt_s) = opt(|t| t.nt);
    let (sd, sd_s) = opt(|t| t.sd);
    let episodes = tables.iter().map(|t| t.episodes).sum();
    AggregatedMetrics {
        variant: variant.to_string(),
        mean: MetricsTable { episodes, sr, cr, tr, nt, pl, itr, sd },
        std: MetricsTable {
            episodes,
            sr: sr_s,
            cr: cr_s,
            tr: tr_s,
            nt: nt_s,
            pl: pl_s,
            itr: itr_s,
            sd: sd_s,
        },
    }
}

/// Per-seed evaluation protocol: for each test seed, a batch of episodes with
/// derived spawn seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub episodes_per_seed: usize,
    pub test_seeds: Vec<u64>,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            episodes_per_seed: 50,
            test_seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

/// Runs every episode of the protocol and returns the annotated traces in a
/// deterministic order.
pub fn evaluate_policy(
    policy: &crate::runner::RobotPolicy,
    scenario: &crate::crowd::scenario::ScenarioConfig,
    runner_cfg: &crate::runner::RunnerConfig,
    protocol: &EvalProtocol,
) -> Result<Vec<EpisodeTrace>, crate::crowd::scenario::ScenarioError> {
    use crate::runner::derive_seed;
    use rayon::prelude::*;
    let jobs: Vec<u64> = protocol
        .test_seeds
        .iter()
        .flat_map(|&s| {
            (0..protocol.episodes_per_seed).map(move |i| derive_seed(s, 0x5eed_0000 + i as u64))
        })
        .collect();
    jobs.par_iter()
        .map(|&seed| {
            let mut p = policy.clone();
            crate::runner::run_episode(scenario, runner_cfg, &mut p, seed)
        })
        .collect()
}

/// Full campaign: evaluates each (train-seed) policy on each scenario variant
/// and aggregates mean +- std across the policies.
pub fn run_campaign(
    policies: &[crate::runner::RobotPolicy],
    variants: &[(String, crate::crowd::scenario::ScenarioConfig)],
    runner_cfg: &crate::runner::RunnerConfig,
    protocol: &EvalProtocol,
) -> Result<Vec<AggregatedMetrics>, CampaignError> {
    let mut rows = Vec::with_capacity(variants.len());
    for (name, scenario) in variants {
        let mut tables = Vec::with_capacity(policies.len());
        for policy in policies {
            let traces = evaluate_policy(policy, scenario, runner_cfg, protocol)?;
            tables.push(compute_metrics(&traces)?);
        }
        rows.push(aggregate(name, &tables));
    }
    Ok(rows)
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Scenario(#[from] crate::crowd::scenario::ScenarioError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

/// CSV with one row per variant: mean columns then std columns.
pub fn campaign_csv(rows: &[AggregatedMetrics]) -> String {
    let mut out = String::from(
        "variant,episodes,SR,CR,TR,NT,PL,ITR,SD,std_SR,std_CR,std_TR,std_NT,std_PL,std_ITR,std_SD\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{}\n",
            r.variant,
            r.mean.episodes,
            r.mean.sr,
            r.mean.cr,
            r.mean.tr,
            fmt_opt(r.mean.nt),
            r.mean.pl,
            r.mean.itr,
            fmt_opt(r.mean.sd),
            r.std.sr,
            r.std.cr,
            r.std.tr,
            fmt_opt(r.std.nt),
            r.std.pl,
            r.std.itr,
            fmt_opt(r.std.sd),
        ));
    }
    out
}
