//! Replicates, confidence intervals and parameter sweeps.
//!
//! Replicate `k` of grid point `g` in a sweep with base seed `s` always runs
//! on [`RunSeed`]`(s, g, k)`, whatever the execution strategy.

use log::info;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::{run_to_steady_state, SimParams};
use crate::error::{invalid, Result};
use crate::metrics::{
    amplification_exponent, ks_statistic, popularity_distribution_of, top_decile_mean, MemeLedger,
    MetricsReport, PopularitySamples,
};
use crate::netgen::{build_network, Generator, Wiring};
use crate::par::Execution;
use crate::seed::{Purpose, RunSeed};

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: RunSeed,
    pub report: MetricsReport,
    pub ledger: MemeLedger,
    /// All memes created during the measurement window.
    pub population: MemeLedger,
}

/// Builds a fresh network and runs the diffusion to steady state.
pub fn run_single(params: &SimParams, seed: RunSeed) -> Result<RunResult> {
    let network = build_network(&params.net, seed)?;
    let mut rng = seed.rng(Purpose::Diffusion);
    let out = run_to_steady_state(params, network, &mut rng)?;
    let report = MetricsReport::from_run(&out.state, &out.ledger, out.converged);
    let population = out.state.population_ledger(out.measure_start);
    Ok(RunResult {
        seed,
        report,
        ledger: out.ledger,
        population,
    })
}

/// Runs `replicates` independent replicates of grid point `grid_index`.
pub fn run_replicate_set(
    params: &SimParams,
    replicates: u32,
    base_seed: u64,
    grid_index: u32,
    exec: Execution,
) -> Result<Vec<RunResult>> {
    if replicates < 1 {
        return invalid("replicates must be >= 1");
    }
    params.validate()?;
    exec.map(replicates as usize, |k| {
        run_single(params, RunSeed::new(base_seed, grid_index, k as u32))
    })
    .into_iter()
    .collect()
}

pub fn run_replicates(
    params: &SimParams,
    replicates: u32,
    base_seed: u64,
    exec: Execution,
) -> Result<Vec<MetricsReport>> {
    Ok(run_replicate_set(params, replicates, base_seed, 0, exec)?
        .into_iter()
        .map(|r| r.report)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    /// t-based 95% half-width; `None` with a single value.
    pub half_width: Option<f64>,
}

impl Interval {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width.unwrap_or(f64::INFINITY)
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width.unwrap_or(f64::INFINITY)
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }
}

/// Mean and 95% Student-t half-width with `n - 1` degrees of freedom.
pub fn confidence_interval(values: &[f64]) -> Option<Interval> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Some(Interval {
            mean,
            half_width: None,
        });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.975);
    Some(Interval {
        mean,
        half_width: Some(t * var.sqrt() / (n as f64).sqrt()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PhaseMap,
    Targeting,
    Popularity,
    Amplification,
    AlphaMuTau,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::PhaseMap => "phase-map",
            ExperimentKind::Targeting => "targeting",
            ExperimentKind::Popularity => "popularity",
            ExperimentKind::Amplification => "amplification",
            ExperimentKind::AlphaMuTau => "alpha-mu-tau",
        }
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub kind: ExperimentKind,
    pub gamma_grid: Vec<f64>,
    pub phi_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub alpha_grid: Vec<usize>,
    pub replicates: u32,
    pub base_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            kind: ExperimentKind::PhaseMap,
            gamma_grid: log_grid(1e-3, 1.0, 12),
            phi_grid: (1..=10).map(f64::from).collect(),
            mu_grid: vec![0.25, 0.75],
            alpha_grid: vec![2, 5, 10, 15, 20, 30, 50],
            replicates: 20,
            base_seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return invalid("sweeps need at least 2 replicates for confidence intervals");
        }
        let need = |name: &str, empty: bool| {
            if empty {
                invalid(format!("{name} must not be empty"))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::PhaseMap
            | ExperimentKind::Popularity
            | ExperimentKind::Amplification => {
                need("gamma_grid", self.gamma_grid.is_empty())?;
                need("phi_grid", self.phi_grid.is_empty())?;
            }
            ExperimentKind::Targeting => {
                need("gamma_grid", self.gamma_grid.is_empty())?;
                need("mu_grid", self.mu_grid.is_empty())?;
            }
            ExperimentKind::AlphaMuTau => {
                need("mu_grid", self.mu_grid.is_empty())?;
                need("alpha_grid", self.alpha_grid.is_empty())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub phi: f64,
    pub mu: f64,
    pub alpha: usize,
    pub wiring: Wiring,
}

impl GridPoint {
    pub fn apply(&self, base: &SimParams) -> SimParams {
        let mut p = base.clone();
        p.net.gamma = self.gamma;
        p.net.wiring = self.wiring;
        p.phi = self.phi;
        p.mu = self.mu;
        p.alpha = self.alpha;
        p
    }
}

/// Parameters a sweep actually runs with: the no-bot undirected variant is
/// forced for the α–μ map.
pub fn effective_base(base: &SimParams, spec: &SweepSpec) -> SimParams {
    let mut p = base.clone();
    if spec.kind == ExperimentKind::AlphaMuTau {
        p.net.beta = 0.0;
        p.net.gamma = 0.0;
        p.net.generator = Generator::UndirectedPA;
    }
    p
}

/// Grid points in row-major order of the kind's two axes.
pub fn grid_points(base: &SimParams, spec: &SweepSpec) -> Vec<GridPoint> {
    let at = |gamma, phi, mu, alpha| GridPoint {
        gamma,
        phi,
        mu,
        alpha,
        wiring: base.net.wiring,
    };
    let mut out = Vec::new();
    match spec.kind {
        ExperimentKind::PhaseMap | ExperimentKind::Popularity | ExperimentKind::Amplification => {
            for &g in &spec.gamma_grid {
                for &phi in &spec.phi_grid {
                    out.push(at(g, phi, base.mu, base.alpha));
                }
            }
        }
        ExperimentKind::Targeting => {
            for &mu in &spec.mu_grid {
                for &g in &spec.gamma_grid {
                    out.push(at(g, base.phi, mu, base.alpha));
                }
            }
        }
        ExperimentKind::AlphaMuTau => {
            for &mu in &spec.mu_grid {
                for &alpha in &spec.alpha_grid {
                    out.push(at(0.0, base.phi, mu, alpha));
                }
            }
        }
    }
    out
}

/// Replicate values of one metric and their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub values: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub half_width: Option<f64>,
    /// Replicates where the metric was defined.
    pub n: usize,
}

impl MetricSummary {
    pub fn from_values(name: &str, values: Vec<Option<f64>>) -> Self {
        let present: Vec<f64> = values.iter().flatten().copied().collect();
        let ci = confidence_interval(&present);
        MetricSummary {
            name: name.to_string(),
            mean: ci.map(|c| c.mean),
            half_width: ci.and_then(|c| c.half_width),
            n: present.len(),
            values,
        }
    }

    pub fn interval(&self) -> Option<Interval> {
        self.mean.map(|mean| Interval {
            mean,
            half_width: self.half_width,
        })
    }

    pub fn present(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }
}

/// A point on a curve attached to a grid point (CCDF, binned exponent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub index: u32,
    pub point: GridPoint,
    pub runs: u32,
    pub nonconverged: u32,
    pub seeds: Vec<RunSeed>,
    pub metrics: Vec<MetricSummary>,
    pub series: Vec<SeriesPoint>,
}

impl SweepRecord {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }

    /// Recomputes every summary from its stored replicate values.
    pub fn reaggregate(&self) -> SweepRecord {
        let mut r = self.clone();
        r.metrics = self
            .metrics
            .iter()
            .map(|m| MetricSummary::from_values(&m.name, m.values.clone()))
            .collect();
        r
    }
}

fn summary<F: Fn(&RunResult) -> Option<f64>>(
    name: &str,
    runs: &[RunResult],
    f: F,
) -> MetricSummary {
    MetricSummary::from_values(name, runs.iter().map(f).collect())
}

fn nonconverged(runs: &[RunResult]) -> u32 {
    runs.iter().filter(|r| !r.report.converged).count() as u32
}

/// Runs the replicates of one grid point and aggregates them according to
/// the experiment kind.
pub fn evaluate_point(
    base: &SimParams,
    spec: &SweepSpec,
    index: u32,
    point: &GridPoint,
    exec: Execution,
) -> Result<SweepRecord> {
    let base = effective_base(base, spec);
    let params = point.apply(&base);
    let reps = spec.replicates;
    let seeds: Vec<RunSeed> = (0..reps)
        .map(|k| RunSeed::new(spec.base_seed, index, k))
        .collect();
    let mut record = SweepRecord {
        index,
        point: *point,
        runs: reps,
        nonconverged: 0,
        seeds,
        metrics: Vec::new(),
        series: Vec::new(),
    };
    match spec.kind {
        ExperimentKind::PhaseMap | ExperimentKind::AlphaMuTau => {
            let runs = run_replicate_set(&params, reps, spec.base_seed, index, exec)?;
            record.nonconverged = nonconverged(&runs);
            record.metrics = vec![
                summary("Q", &runs, |r| Some(r.report.quality)),
                summary("D", &runs, |r| Some(r.report.diversity)),
                summary("tau", &runs, |r| r.report.tau),
            ];
        }
        ExperimentKind::Targeting => {
            let mut pref = params.clone();
            pref.net.wiring = Wiring::Preferential;
            let mut rand = params.clone();
            rand.net.wiring = Wiring::Random;
            let pairs: Vec<Result<(RunResult, RunResult)>> = exec.map(reps as usize, |k| {
                let seed = RunSeed::new(spec.base_seed, index, k as u32);
                Ok((run_single(&pref, seed)?, run_single(&rand, seed)?))
            });
            let pairs: Vec<(RunResult, RunResult)> = pairs.into_iter().collect::<Result<_>>()?;
            let (p, r): (Vec<RunResult>, Vec<RunResult>) = pairs.into_iter().unzip();
            record.runs = 2 * reps;
            record.nonconverged = nonconverged(&p) + nonconverged(&r);
            let ratio: Vec<Option<f64>> = p
                .iter()
                .zip(&r)
                .map(|(a, b)| (b.report.quality > 0.0).then(|| a.report.quality / b.report.quality))
                .collect();
            record.metrics = vec![
                summary("Q_pref", &p, |x| Some(x.report.quality)),
                summary("Q_rand", &r, |x| Some(x.report.quality)),
                MetricSummary::from_values("ratio", ratio),
                summary("gini_pref", &p, |x| x.report.gini_hub),
                summary("gini_rand", &r, |x| x.report.gini_hub),
            ];
        }
        ExperimentKind::Popularity => {
            let runs = run_replicate_set(&params, reps, spec.base_seed, index, exec)?;
            record.nonconverged = nonconverged(&runs);
            let samples: Vec<PopularitySamples> = runs
                .iter()
                .map(|r| PopularitySamples::from_ledger(&r.population))
                .collect();
            let ks: Vec<Option<f64>> = samples
                .iter()
                .map(|s| ks_statistic(&s.low, &s.high))
                .collect();
            let top_low: Vec<Option<f64>> =
                samples.iter().map(|s| top_decile_mean(&s.low)).collect();
            let top_high: Vec<Option<f64>> =
                samples.iter().map(|s| top_decile_mean(&s.high)).collect();
            let mut pooled = PopularitySamples::default();
            for s in samples {
                pooled.extend(s);
            }
            let dist = popularity_distribution_of(&pooled);
            record.metrics = vec![
                MetricSummary::from_values("ks", ks),
                MetricSummary::from_values("ks_pooled", vec![dist.ks]),
                MetricSummary::from_values("top_decile_low", top_low),
                MetricSummary::from_values("top_decile_high", top_high),
            ];
            for (name, c) in [("low", &dist.low), ("high", &dist.high)] {
                record
                    .series
                    .extend(c.points.iter().map(|&(x, y)| SeriesPoint {
                        series: name.to_string(),
                        x,
                        y,
                        count: c.samples,
                    }));
            }
        }
        ExperimentKind::Amplification => {
            let runs = run_replicate_set(&params, reps, spec.base_seed, index, exec)?;
            record.nonconverged = nonconverged(&runs);
            record.metrics = vec![summary("eta_hat", &runs, |r| r.report.eta)];
            let pooled = MemeLedger {
                rows: runs
                    .iter()
                    .flat_map(|r| r.ledger.rows.iter().copied())
                    .collect(),
            };
            if let Some(a) = amplification_exponent(&pooled) {
                for b in &a.bins {
                    record.series.push(SeriesPoint {
                        series: "eta".into(),
                        x: b.mean_bot_posts,
                        y: b.eta,
                        count: b.count,
                    });
                    record.series.push(SeriesPoint {
                        series: "human_posts".into(),
                        x: b.mean_bot_posts,
                        y: b.mean_human_posts,
                        count: b.count,
                    });
                }
            }
        }
    }
    info!(
        "{} point {index}: gamma={} phi={} mu={} alpha={} done ({} non-converged)",
        spec.kind.as_str(),
        point.gamma,
        point.phi,
        point.mu,
        point.alpha,
        record.nonconverged
    );
    Ok(record)
}

/// Evaluates every grid point of `spec` in order.
pub fn run_sweep(base: &SimParams, spec: &SweepSpec, exec: Execution) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    effective_base(base, spec).validate()?;
    grid_points(base, spec)
        .iter()
        .enumerate()
        .map(|(i, p)| evaluate_point(base, spec, i as u32, p, exec))
        .collect()
}

fn with_kind(spec: &SweepSpec, kind: ExperimentKind) -> SweepSpec {
    SweepSpec {
        kind,
        ..spec.clone()
    }
}

/// Q, D and τ over the (γ, φ) grid.
pub fn phase_map_sweep(
    base: &SimParams,
    spec: &SweepSpec,
    exec: Execution,
) -> Result<Vec<SweepRecord>> {
    run_sweep(base, &with_kind(spec, ExperimentKind::PhaseMap), exec)
}

/// Preferential vs. random wiring at matched seeds over (μ, γ).
pub fn targeting_experiment(
    base: &SimParams,
    spec: &SweepSpec,
    exec: Execution,
) -> Result<Vec<SweepRecord>> {
    run_sweep(base, &with_kind(spec, ExperimentKind::Targeting), exec)
}

pub fn popularity_experiment(
    base: &SimParams,
    spec: &SweepSpec,
    exec: Execution,
) -> Result<Vec<SweepRecord>> {
    run_sweep(base, &with_kind(spec, ExperimentKind::Popularity), exec)
}

pub fn amplification_experiment(
    base: &SimParams,
    spec: &SweepSpec,
    exec: Execution,
) -> Result<Vec<SweepRecord>> {
    run_sweep(base, &with_kind(spec, ExperimentKind::Amplification), exec)
}

/// τ over (μ, α) on the no-bot undirected preferential-attachment network.
pub fn alpha_mu_tau_map(
    base: &SimParams,
    spec: &SweepSpec,
    exec: Execution,
) -> Result<Vec<SweepRecord>> {
    run_sweep(base, &with_kind(spec, ExperimentKind::AlphaMuTau), exec)
}

/// Ratio of mean preferential to mean random quality for a targeting record.
pub fn targeting_ratio(record: &SweepRecord) -> Option<f64> {
    let p = record.metric("Q_pref")?.mean?;
    let r = record.metric("Q_rand")?.mean?;
    (r > 0.0).then(|| p / r)
}
