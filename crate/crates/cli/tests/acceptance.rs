//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails.
//!
//! Pass a criterion id prefix (e.g. `3` or `5b`) to run a subset.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use memesim::engine::{sample_bot_fitness, sample_human_fitness};
use memesim::experiment::{
    alpha_mu_tau_map, amplification_experiment, log_grid, phase_map_sweep, popularity_experiment,
    run_replicate_set, targeting_experiment, targeting_ratio, Interval, MetricSummary, SweepRecord,
};
use memesim::metrics::{amplification_from_points, kendall_tau_b, ks_statistic};
use memesim::{Execution, ExperimentKind, Generator, SimParams, SweepSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const N: usize = 1000;
const REPLICATES: u32 = 20;

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        pass,
        detail,
    }
}

fn desk_params() -> SimParams {
    let mut p = SimParams::default();
    p.net.n_humans = N;
    p
}

fn spec(kind: ExperimentKind, seed: u64) -> SweepSpec {
    SweepSpec {
        kind,
        replicates: REPLICATES,
        base_seed: seed,
        ..SweepSpec::default()
    }
}

fn metric<'a>(r: &'a SweepRecord, name: &str) -> &'a MetricSummary {
    r.metric(name)
        .unwrap_or_else(|| panic!("missing metric {name}"))
}

fn ci(r: &SweepRecord, name: &str) -> Interval {
    metric(r, name)
        .interval()
        .unwrap_or_else(|| panic!("metric {name} undefined"))
}

fn fmt_ci(i: Interval) -> String {
    format!("{:.4}±{:.4}", i.mean, i.half_width.unwrap_or(f64::NAN))
}

fn mean(r: &SweepRecord, name: &str) -> f64 {
    ci(r, name).mean
}

fn sampler_means() -> Vec<Outcome> {
    let draws = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut all = true;
    let mut detail = Vec::new();
    for phi in [1.0, 3.0, 10.0] {
        for (label, expected) in [
            ("human", 1.0 / (phi + 2.0)),
            ("bot", phi / (2.0 * phi + 1.0)),
        ] {
            let xs: Vec<f64> = (0..draws)
                .map(|_| {
                    if label == "human" {
                        sample_human_fitness(phi, &mut rng).unwrap()
                    } else {
                        sample_bot_fitness(phi, &mut rng).unwrap()
                    }
                })
                .collect();
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let z = (m - expected) / (sd / n.sqrt());
            all &= z.abs() <= 3.0;
            detail.push(format!("{label}(φ={phi}) z={z:.2}"));
        }
    }
    let m = 100_000;
    let h: Vec<f64> = (0..m)
        .map(|_| sample_human_fitness(1.0, &mut rng).unwrap())
        .collect();
    let b: Vec<f64> = (0..m)
        .map(|_| sample_bot_fitness(1.0, &mut rng).unwrap())
        .collect();
    let d = ks_statistic(&h, &b).unwrap();
    let critical = (-(0.01f64 / 2.0).ln() / 2.0).sqrt() * (2.0 / m as f64).sqrt();
    vec![
        outcome(
            "1a",
            "fitness sampler means within 3 standard errors",
            all,
            detail.join(" "),
        ),
        outcome(
            "1b",
            "human and bot samplers agree at φ=1 (two-sample KS, α=0.01)",
            d < critical,
            format!("D={d:.5} critical={critical:.5}"),
        ),
    ]
}

fn brute_tau(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as i64;
    let (mut s, mut tx, mut ty) = (0i64, 0i64, 0i64);
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let dx = pairs[i].0.total_cmp(&pairs[j].0) as i64;
            let dy = pairs[i].1.total_cmp(&pairs[j].1) as i64;
            s += dx * dy;
            tx += i64::from(dx == 0);
            ty += i64::from(dy == 0);
        }
    }
    let n0 = n * (n - 1) / 2;
    let (a, b) = ((n0 - tx) as u64, (n0 - ty) as u64);
    if n < 2 || a == 0 || b == 0 {
        return None;
    }
    Some(s as f64 / ((a as f64) * (b as f64)).sqrt())
}

fn kendall() -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut mismatches = 0;
    let mut defined = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=100);
        let kx = rng.random_range(1..=12);
        let ky = rng.random_range(1..=12);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                (
                    f64::from(rng.random_range(0..kx)) / 4.0,
                    f64::from(rng.random_range(0..ky)) * 1.5,
                )
            })
            .collect();
        let fast = kendall_tau_b(&pairs);
        defined += usize::from(fast.is_some());
        if fast != brute_tau(&pairs) {
            mismatches += 1;
        }
    }
    let up: Vec<(f64, f64)> = (0..50).map(|i| (f64::from(i), f64::from(i * i))).collect();
    let down: Vec<(f64, f64)> = (0..50).map(|i| (f64::from(i), -f64::from(i))).collect();
    let (t_up, t_down) = (kendall_tau_b(&up), kendall_tau_b(&down));
    vec![
        outcome(
            "2a",
            "tau-b equals the O(n²) oracle on 1,000 tied instances",
            mismatches == 0,
            format!("{mismatches} mismatches ({defined} defined)"),
        ),
        outcome(
            "2b",
            "tau-b is ±1 on monotone instances",
            t_up == Some(1.0) && t_down == Some(-1.0),
            format!("{t_up:?} {t_down:?}"),
        ),
    ]
}

/// γ values used for the threshold checks: the baseline, every default grid
/// point inside [0.005, 0.05], and 0.1.
fn threshold_gammas() -> Vec<f64> {
    let mut g = vec![1e-3];
    g.extend(
        log_grid(1e-3, 1.0, 12)
            .into_iter()
            .filter(|&x| (0.005..=0.05).contains(&x)),
    );
    g.push(0.1);
    g
}

struct Threshold {
    quality: (bool, String),
    collapse: (bool, String),
}

fn threshold_study(base: &SimParams, seed: u64) -> Threshold {
    let gammas = threshold_gammas();
    let s = SweepSpec {
        gamma_grid: gammas.clone(),
        phi_grid: vec![1.0],
        ..spec(ExperimentKind::PhaseMap, seed)
    };
    let recs = phase_map_sweep(base, &s, Execution::default()).unwrap();
    let (first, last) = (&recs[0], &recs[recs.len() - 1]);
    let (q_lo, q_hi) = (ci(first, "Q"), ci(last, "Q"));
    let quality = (
        q_lo.mean > q_hi.mean && !q_lo.overlaps(&q_hi),
        format!("Q(γ=0.001)={} Q(γ=0.1)={}", fmt_ci(q_lo), fmt_ci(q_hi)),
    );
    let bracket = &recs[1..recs.len() - 1];
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["tau", "D"] {
        let base_mean = mean(first, name);
        let best = bracket
            .iter()
            .map(|r| mean(r, name) / base_mean)
            .fold(f64::INFINITY, f64::min);
        ok &= best <= 0.5;
        let curve: Vec<String> = recs
            .iter()
            .map(|r| format!("{:.3}", mean(r, name)))
            .collect();
        detail.push(format!(
            "{name}: lowest bracket ratio {best:.3} over [{}]",
            curve.join(", ")
        ));
    }
    Threshold {
        quality,
        collapse: (ok, format!("γ={gammas:.4?}; {}", detail.join("; "))),
    }
}

fn suppression() -> Vec<Outcome> {
    let t = threshold_study(&desk_params(), 3);
    vec![
        outcome(
            "3a",
            "quality falls from γ=0.001 to γ=0.1 (non-overlapping CIs)",
            t.quality.0,
            t.quality.1,
        ),
        outcome(
            "3b",
            "τ and D halve somewhere in γ ∈ [0.005, 0.05]",
            t.collapse.0,
            t.collapse.1,
        ),
    ]
}

fn deception() -> Vec<Outcome> {
    let s = SweepSpec {
        gamma_grid: vec![1e-3, 0.5],
        phi_grid: vec![1.0, 10.0],
        ..spec(ExperimentKind::PhaseMap, 4)
    };
    let recs = phase_map_sweep(&desk_params(), &s, Execution::default()).unwrap();
    let (a1, a10, b1, b10) = (
        ci(&recs[0], "Q"),
        ci(&recs[1], "Q"),
        ci(&recs[2], "Q"),
        ci(&recs[3], "Q"),
    );
    let (gap_low, gap_high) = (a1.mean - a10.mean, b1.mean - b10.mean);
    vec![
        outcome(
            "4a",
            "deception lowers quality at γ=0.001 (non-overlapping CIs)",
            a10.mean < a1.mean && !a10.overlaps(&a1),
            format!("φ=1 {} φ=10 {}", fmt_ci(a1), fmt_ci(a10)),
        ),
        outcome(
            "4b",
            "deception effect is attenuated at γ=0.5",
            gap_high.abs() < gap_low.abs(),
            format!(
                "φ=1 {} φ=10 {}; gap {gap_high:.4} vs {gap_low:.4}",
                fmt_ci(b1),
                fmt_ci(b10)
            ),
        ),
    ]
}

fn targeting() -> Vec<Outcome> {
    let run = |mu: f64, gamma: f64, seed: u64| {
        let s = SweepSpec {
            gamma_grid: vec![gamma],
            mu_grid: vec![mu],
            ..spec(ExperimentKind::Targeting, seed)
        };
        targeting_experiment(&desk_params(), &s, Execution::default())
            .unwrap()
            .remove(0)
    };
    let low = run(0.25, 0.005, 5);
    let high = run(0.75, 0.5, 6);
    let full = run(0.75, 1.0, 7);
    let ratio = |r: &SweepRecord| targeting_ratio(r).unwrap();
    let (gp, gr) = (ci(&high, "gini_pref"), ci(&high, "gini_rand"));
    let identical = metric(&full, "Q_pref").values == metric(&full, "Q_rand").values;
    vec![
        outcome(
            "5a",
            "preferential targeting helps quality at (μ=0.25, γ=0.005)",
            ratio(&low) < 1.0,
            format!("ratio={:.4}", ratio(&low)),
        ),
        outcome(
            "5b",
            "preferential targeting hurts quality at (μ=0.75, γ=0.5)",
            ratio(&high) > 1.0,
            format!("ratio={:.4}", ratio(&high)),
        ),
        outcome(
            "5c",
            "targeting strategies coincide at γ=1",
            ratio(&full) == 1.0 && identical,
            format!("ratio={}", ratio(&full)),
        ),
        outcome(
            "5d",
            "low quality concentrates on hubs under preferential targeting",
            gp.mean > gr.mean && !gp.overlaps(&gr),
            format!("gini preferential {} random {}", fmt_ci(gp), fmt_ci(gr)),
        ),
    ]
}

fn sign_test_p(wins: usize, n: usize) -> f64 {
    let mut c = 1.0f64;
    let mut p = 0.0;
    for k in 0..=n {
        if k >= wins {
            p += c;
        }
        c = c * (n - k) as f64 / (k + 1) as f64;
    }
    p / 2f64.powi(n as i32)
}

fn popularity() -> Vec<Outcome> {
    let s = SweepSpec {
        gamma_grid: vec![1e-3],
        phi_grid: vec![1.0],
        ..spec(ExperimentKind::Popularity, 8)
    };
    let equal = popularity_experiment(&desk_params(), &s, Execution::default())
        .unwrap()
        .remove(0);
    let ks = mean(&equal, "ks_pooled");
    let s = SweepSpec {
        gamma_grid: vec![1e-2],
        phi_grid: vec![10.0],
        ..spec(ExperimentKind::Popularity, 9)
    };
    let deceived = popularity_experiment(&desk_params(), &s, Execution::default())
        .unwrap()
        .remove(0);
    let low = &metric(&deceived, "top_decile_low").values;
    let high = &metric(&deceived, "top_decile_high").values;
    let (mut wins, mut n) = (0, 0);
    for (l, h) in low.iter().zip(high) {
        if let (Some(l), Some(h)) = (l, h) {
            n += 1;
            wins += usize::from(l > h);
        }
    }
    let p = sign_test_p(wins, n);
    vec![
        outcome(
            "6a",
            "q=0 and q>0 popularity distributions match at (γ=0.001, φ=1)",
            ks < 0.1,
            format!(
                "pooled KS={ks:.4}, per-replicate {}",
                fmt_ci(ci(&equal, "ks"))
            ),
        ),
        outcome(
            "6b",
            "q=0 memes dominate the upper tail at (γ=0.01, φ=10)",
            p < 0.05,
            format!("{wins}/{n} replicates, sign test p={p:.2e}"),
        ),
    ]
}

fn amplification() -> Vec<Outcome> {
    let s = SweepSpec {
        gamma_grid: vec![0.5],
        phi_grid: vec![1.0],
        ..spec(ExperimentKind::Amplification, 10)
    };
    let rec = amplification_experiment(&desk_params(), &s, Execution::default())
        .unwrap()
        .remove(0);
    let eta = ci(&rec, "eta_hat");
    let linear: Vec<(f64, f64)> = (2..=2000).map(|v| (f64::from(v), f64::from(v))).collect();
    let square: Vec<(f64, f64)> = (2..=2000)
        .map(|v| (f64::from(v), f64::from(v * v)))
        .collect();
    let e1 = amplification_from_points(&linear).unwrap();
    let e2 = amplification_from_points(&square).unwrap();
    let bins_ok = e1.bins.iter().all(|b| (b.eta - 1.0).abs() <= 0.01)
        && e2.bins.iter().all(|b| (b.eta - 2.0).abs() <= 0.01);
    vec![
        outcome(
            "7a",
            "bots amplify low-quality memes at (γ=0.5, φ=1): η̂ > 1, CI excludes 1",
            eta.mean > 1.0 && eta.lower() > 1.0,
            format!("η̂={}", fmt_ci(eta)),
        ),
        outcome(
            "7b",
            "exponent oracles V_h=V_b and V_h=V_b² recover 1 and 2",
            (e1.eta_hat - 1.0).abs() <= 0.01 && (e2.eta_hat - 2.0).abs() <= 0.01 && bins_ok,
            format!("η̂={:.4}, {:.4}", e1.eta_hat, e2.eta_hat),
        ),
    ]
}

type Extract = fn(&memesim::experiment::RunResult) -> Option<f64>;

fn no_bots() -> Vec<Outcome> {
    let mut isolated = desk_params();
    isolated.net.gamma = 0.0;
    let mut absent = isolated.clone();
    absent.net.beta = 0.0;
    let a = run_replicate_set(&isolated, REPLICATES, 12, 0, Execution::default()).unwrap();
    let b = run_replicate_set(&absent, REPLICATES, 12, 0, Execution::default()).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    let metrics: [(&str, Extract); 3] = [
        ("Q", |r| Some(r.report.quality)),
        ("D", |r| Some(r.report.diversity)),
        ("tau", |r| r.report.tau),
    ];
    for (name, f) in metrics {
        let ia = MetricSummary::from_values(name, a.iter().map(f).collect())
            .interval()
            .unwrap();
        let ib = MetricSummary::from_values(name, b.iter().map(f).collect())
            .interval()
            .unwrap();
        ok &= ia.overlaps(&ib);
        detail.push(format!("{name} {} vs {}", fmt_ci(ia), fmt_ci(ib)));
    }
    let bot_rows: usize = a.iter().chain(&b).map(|r| r.ledger.bot_origin()).sum();
    ok &= bot_rows == 0;
    vec![outcome(
        "8",
        "isolated bots (γ=0) match no bots (β=0)",
        ok,
        format!("{}; bot-origin ledger rows {bot_rows}", detail.join("; ")),
    )]
}

fn alpha_mu() -> Vec<Outcome> {
    let base = desk_params();
    let s = SweepSpec {
        mu_grid: vec![0.2, 0.5, 0.9],
        alpha_grid: vec![15],
        ..spec(ExperimentKind::AlphaMuTau, 13)
    };
    let by_mu: Vec<f64> = alpha_mu_tau_map(&base, &s, Execution::default())
        .unwrap()
        .iter()
        .map(|r| mean(r, "tau"))
        .collect();
    let s = SweepSpec {
        mu_grid: vec![0.75],
        alpha_grid: vec![2, 15, 50],
        ..spec(ExperimentKind::AlphaMuTau, 14)
    };
    let by_alpha: Vec<f64> = alpha_mu_tau_map(&base, &s, Execution::default())
        .unwrap()
        .iter()
        .map(|r| mean(r, "tau"))
        .collect();
    vec![
        outcome(
            "9a",
            "τ decreases with μ at α=15",
            by_mu.windows(2).all(|w| w[1] < w[0]),
            format!("μ=0.2,0.5,0.9 → {by_mu:.4?}"),
        ),
        outcome(
            "9b",
            "τ increases with α at μ=0.75",
            by_alpha.windows(2).all(|w| w[1] > w[0]),
            format!("α=2,15,50 → {by_alpha:.4?}"),
        ),
    ]
}

fn robustness() -> Vec<Outcome> {
    let mut rewired = desk_params();
    rewired.net.rewire_dead_ends = true;
    let mut pa = desk_params();
    pa.net.generator = Generator::PreferentialAttachment;
    let r = threshold_study(&rewired, 15);
    let p = threshold_study(&pa, 16);
    vec![
        outcome(
            "10a",
            "3a holds with dead ends rewired",
            r.quality.0,
            r.quality.1,
        ),
        outcome(
            "10b",
            "3b holds with dead ends rewired",
            r.collapse.0,
            r.collapse.1,
        ),
        outcome(
            "10c",
            "3a holds on the preferential-attachment generator",
            p.quality.0,
            p.quality.1,
        ),
        outcome(
            "10d",
            "3b holds on the preferential-attachment generator",
            p.collapse.0,
            p.collapse.1,
        ),
    ]
}

/// Index of the first default-grid γ where mean Q falls below half its value
/// at γ=0.001, with the Q curve up to that point.
fn halving_index(n: usize, replicates: u32) -> (Option<usize>, Vec<f64>) {
    let mut qs = Vec::new();
    for (i, gamma) in log_grid(1e-3, 1.0, 12).into_iter().enumerate() {
        let mut p = desk_params();
        p.net.n_humans = n;
        p.net.gamma = gamma;
        let runs = run_replicate_set(&p, replicates, 17, 0, Execution::default()).unwrap();
        qs.push(runs.iter().map(|r| r.report.quality).sum::<f64>() / runs.len() as f64);
        if qs[i] < qs[0] / 2.0 {
            return (Some(i), qs);
        }
    }
    (None, qs)
}

fn scaling() -> Vec<Outcome> {
    let (small, q_small) = halving_index(N, REPLICATES);
    let (large, q_large) = halving_index(10 * N, 10);
    let pass = matches!((small, large), (Some(a), Some(b)) if a.abs_diff(b) <= 1);
    vec![outcome(
        "S",
        "γ where Q halves agrees within one grid step for N=10³ and N=10⁴",
        pass,
        format!("grid index {small:?} vs {large:?}; Q {q_small:.3?} vs {q_large:.3?}"),
    )]
}

fn hash_dir(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let bytes = std::fs::read(e.path()).unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                hex_digest(&bytes),
            )
        })
        .collect()
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn reproducibility() -> Vec<Outcome> {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    std::fs::write(&config, r#"{"sim": {"net": {"n_humans": 300, "gamma": 0.05}, "phi": 2.0}, "sweep": {"replicates": 2}}"#)
        .unwrap();
    let commands: [&[&str]; 3] = [
        &["generate"],
        &["run"],
        &[
            "sweep",
            "--kind",
            "phase-map",
            "--gamma-grid",
            "0.01,0.5",
            "--phi-grid",
            "1,10",
        ],
    ];
    let mut ok = true;
    let mut files = 0;
    for (i, args) in commands.iter().enumerate() {
        let mut hashes = Vec::new();
        for (attempt, workers) in ["1", "2"].iter().enumerate() {
            let out = tmp.path().join(format!("{i}-{attempt}"));
            let status = Command::new(env!("CARGO_BIN_EXE_memesim"))
                .args(*args)
                .arg("--config")
                .arg(&config)
                .args(["--seed", "77", "--workers", workers, "--out"])
                .arg(&out)
                .output()
                .unwrap();
            ok &= status.status.success();
            hashes.push(hash_dir(&out));
        }
        files += hashes[0].len();
        ok &= !hashes[0].is_empty() && hashes[0] == hashes[1];
    }
    vec![outcome(
        "11",
        "CLI reruns with the same config and seed are byte-identical",
        ok,
        format!("{files} files compared across generate, run and sweep"),
    )]
}

type Check = fn() -> Vec<Outcome>;

fn main() {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let groups: [(&str, Check); 12] = [
        ("1", sampler_means),
        ("2", kendall),
        ("3", suppression),
        ("4", deception),
        ("5", targeting),
        ("6", popularity),
        ("7", amplification),
        ("8", no_bots),
        ("9", alpha_mu),
        ("10", robustness),
        ("11", reproducibility),
        ("S", scaling),
    ];
    let wanted = |id: &str| {
        filters.is_empty()
            || filters
                .iter()
                .any(|f| id.starts_with(f.as_str()) || f.starts_with(id))
    };
    let mut failed = Vec::new();
    let mut total = 0;
    for (id, check) in groups {
        if !wanted(id) {
            continue;
        }
        let start = Instant::now();
        let outcomes = check();
        let secs = start.elapsed().as_secs_f64();
        for o in outcomes.iter().filter(|o| wanted(o.id)) {
            total += 1;
            let tag = if o.pass { "PASS" } else { "FAIL" };
            println!("{:<4} {tag}  {}  [{}] ({secs:.1}s)", o.id, o.name, o.detail);
            if !o.pass {
                failed.push(o.id);
            }
        }
    }
    println!(
        "\nchecks: {} passed, {} failed",
        total - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
