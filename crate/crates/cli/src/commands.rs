use std::collections::BTreeSet;
use std::fmt;

use anyhow::{Context, Result};
use log::info;
use memesim::experiment::{
    effective_base, evaluate_point, grid_points, run_replicate_set, SweepRecord,
};
use memesim::netgen::build_network;
use memesim::{Execution, MemeLedger, RunSeed};

use crate::config::Settings;
use crate::output::{num, opt, Manifest, OutDir, Table};

/// Marks an error as caused by the configuration rather than by the run.
#[derive(Debug)]
pub struct ConfigError;

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("configuration error")
    }
}

fn execution(s: &Settings) -> Execution {
    s.workers.map(Execution::from_workers).unwrap_or_default()
}

pub fn generate(s: &Settings) -> Result<()> {
    let sim = &s.config.sim;
    let seed = RunSeed::new(s.config.sweep.base_seed, 0, 0);
    let network = build_network(&sim.net, seed)?;
    let mut edges = Vec::new();
    network.write_edge_list(&mut edges)?;

    let mut out = OutDir::create(&s.out)?;
    out.write("network.tsv", &edges)?;
    let mut manifest = Manifest::new("generate", sim, &s.config.sweep);
    manifest.seeds = vec![seed];
    manifest.complete = true;
    manifest.artifacts = out.hashes();
    out.write_manifest(&manifest)?;
    println!(
        "nodes={} humans={} bots={} links={} infiltration_links={}",
        network.len(),
        network.n_humans(),
        network.n_bots(),
        network.link_count(),
        network.infiltration_links()
    );
    Ok(())
}

pub const METRICS_HEADER: [&str; 14] = [
    "replicate",
    "gamma",
    "phi",
    "mu",
    "alpha",
    "wiring",
    "seed",
    "Q",
    "D",
    "tau",
    "gini_hub",
    "eta",
    "n_memes",
    "converged",
];

fn ledger_csv(ledger: &MemeLedger) -> Result<Vec<u8>> {
    let header: Vec<&str> = MemeLedger::CSV_HEADER.split(',').collect();
    let mut t = Table::new(&header)?;
    for r in &ledger.rows {
        t.row([
            r.meme_id.to_string(),
            r.origin.as_str().to_string(),
            num(r.quality),
            num(r.fitness),
            r.human_posts.to_string(),
            r.bot_posts.to_string(),
            r.feed_occurrences_at_end.to_string(),
        ])?;
    }
    t.into_bytes()
}

pub fn run(s: &Settings) -> Result<()> {
    let sim = &s.config.sim;
    let spec = &s.config.sweep;
    let runs = run_replicate_set(sim, spec.replicates, spec.base_seed, 0, execution(s))?;

    let mut out = OutDir::create(&s.out)?;
    let mut metrics = Table::new(&METRICS_HEADER)?;
    for r in &runs {
        let m = &r.report;
        metrics.row([
            r.seed.replicate.to_string(),
            num(sim.net.gamma),
            num(sim.phi),
            num(sim.mu),
            sim.alpha.to_string(),
            sim.net.wiring.as_str().to_string(),
            spec.base_seed.to_string(),
            num(m.quality),
            num(m.diversity),
            opt(m.tau),
            opt(m.gini_hub),
            opt(m.eta),
            m.n_memes.to_string(),
            m.converged.to_string(),
        ])?;
    }
    out.write("metrics.csv", &metrics.into_bytes()?)?;
    for r in &runs {
        out.write(
            &format!("ledger_{:03}.csv", r.seed.replicate),
            &ledger_csv(&r.ledger)?,
        )?;
    }

    let mut manifest = Manifest::new("run", sim, spec);
    manifest.seeds = runs.iter().map(|r| r.seed).collect();
    manifest.complete = true;
    manifest.nonconverged_fraction =
        Some(runs.iter().filter(|r| !r.report.converged).count() as f64 / runs.len() as f64);
    manifest.artifacts = out.hashes();
    out.write_manifest(&manifest)?;

    for r in &runs {
        let m = &r.report;
        println!(
            "replicate {}: Q={:.4} D={:.4} tau={} eta={} memes={}{}",
            r.seed.replicate,
            m.quality,
            m.diversity,
            m.tau.map_or("-".into(), |v| format!("{v:.4}")),
            m.eta.map_or("-".into(), |v| format!("{v:.4}")),
            m.n_memes,
            if m.converged { "" } else { " (not converged)" }
        );
    }
    Ok(())
}

pub fn sweep(s: &Settings, resume: bool, stop_after: Option<usize>) -> Result<()> {
    let sim = &s.config.sim;
    let spec = &s.config.sweep;
    spec.validate().context(ConfigError)?;
    effective_base(sim, spec).validate().context(ConfigError)?;
    let points = grid_points(sim, spec);

    let mut out = OutDir::create(&s.out)?;
    let mut manifest = Manifest::new("sweep", sim, spec);
    if resume {
        let prev = out.read_manifest().context(ConfigError)?;
        if prev.command != "sweep" || prev.sim != *sim || prev.sweep != *spec {
            return Err(anyhow::anyhow!(
                "manifest in {} was produced by a different configuration",
                s.out.display()
            ))
            .context(ConfigError);
        }
        for r in &prev.records {
            if points.get(r.index as usize) != Some(&r.point) {
                return Err(anyhow::anyhow!(
                    "manifest record {} does not match the grid",
                    r.index
                ))
                .context(ConfigError);
            }
        }
        manifest.records = prev.records;
        info!(
            "resuming with {} of {} grid points done",
            manifest.records.len(),
            points.len()
        );
    }
    out.write_manifest(&manifest)?;

    let done: BTreeSet<u32> = manifest.records.iter().map(|r| r.index).collect();
    let mut computed = 0;
    for (i, point) in points.iter().enumerate() {
        if done.contains(&(i as u32)) {
            continue;
        }
        if stop_after == Some(computed) {
            println!("stopped after {computed} grid points; rerun with --resume to finish");
            return Ok(());
        }
        let record = evaluate_point(sim, spec, i as u32, point, execution(s))?;
        manifest.records.push(record);
        manifest.records.sort_by_key(|r| r.index);
        out.write_manifest(&manifest)?;
        computed += 1;
    }

    let kind = spec.kind.as_str();
    let (summary, replicates, series) = sweep_tables(&manifest.records)?;
    out.write(&format!("{kind}.csv"), &summary)?;
    out.write(&format!("{kind}_replicates.csv"), &replicates)?;
    if let Some(series) = series {
        out.write(&format!("{kind}_series.csv"), &series)?;
    }
    let runs: u32 = manifest.records.iter().map(|r| r.runs).sum();
    let nonconverged: u32 = manifest.records.iter().map(|r| r.nonconverged).sum();
    manifest.nonconverged_fraction = Some(f64::from(nonconverged) / f64::from(runs.max(1)));
    manifest.complete = true;
    manifest.artifacts = out.hashes();
    out.write_manifest(&manifest)?;
    println!(
        "{kind}: {} grid points, {runs} runs ({nonconverged} not converged) written to {}",
        manifest.records.len(),
        s.out.display()
    );
    Ok(())
}

type Tables = (Vec<u8>, Vec<u8>, Option<Vec<u8>>);

fn sweep_tables(records: &[SweepRecord]) -> Result<Tables> {
    let mut summary = Table::new(&[
        "index",
        "gamma",
        "phi",
        "mu",
        "alpha",
        "wiring",
        "metric",
        "mean",
        "half_width",
        "n",
        "runs",
        "nonconverged",
    ])?;
    let mut replicates = Table::new(&["index", "metric", "replicate", "value"])?;
    let mut series = Table::new(&[
        "index", "gamma", "phi", "mu", "alpha", "series", "x", "y", "count",
    ])?;
    let mut has_series = false;
    for r in records {
        let p = &r.point;
        let coords = [num(p.gamma), num(p.phi), num(p.mu), p.alpha.to_string()];
        for m in &r.metrics {
            let mut row = vec![r.index.to_string()];
            row.extend(coords.iter().cloned());
            row.extend([
                p.wiring.as_str().to_string(),
                m.name.clone(),
                opt(m.mean),
                opt(m.half_width),
                m.n.to_string(),
                r.runs.to_string(),
                r.nonconverged.to_string(),
            ]);
            summary.row(row)?;
            for (k, v) in m.values.iter().enumerate() {
                replicates.row([r.index.to_string(), m.name.clone(), k.to_string(), opt(*v)])?;
            }
        }
        for sp in &r.series {
            has_series = true;
            let mut row = vec![r.index.to_string()];
            row.extend(coords.iter().cloned());
            row.extend([
                sp.series.clone(),
                num(sp.x),
                num(sp.y),
                sp.count.to_string(),
            ]);
            series.row(row)?;
        }
    }
    let series = if has_series {
        Some(series.into_bytes()?)
    } else {
        None
    };
    Ok((summary.into_bytes()?, replicates.into_bytes()?, series))
}
