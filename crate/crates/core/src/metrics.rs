//! Ecosystem health metrics and analysis statistics.

use serde::{Deserialize, Serialize};

use crate::engine::SimState;
use crate::netgen::{NodeId, NodeKind};

/// One meme seen in the human subnetwork during measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub meme_id: u32,
    pub origin: NodeKind,
    pub quality: f64,
    pub fitness: f64,
    /// Post and repost events by humans (`V_h`).
    pub human_posts: u32,
    /// Post and repost events by bots (`V_b`).
    pub bot_posts: u32,
    /// Entries carrying the meme in human feeds when the run ended.
    pub feed_occurrences_at_end: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemeLedger {
    pub rows: Vec<LedgerRow>,
}

impl MemeLedger {
    pub const CSV_HEADER: &'static str =
        "meme_id,origin,quality,fitness,human_posts,bot_posts,feed_occurrences_at_end";

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn bot_origin(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.origin == NodeKind::Bot)
            .count()
    }

    /// `(quality, human_posts)` for human-origin memes.
    pub fn quality_popularity(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.origin == NodeKind::Human)
            .map(|r| (r.quality, f64::from(r.human_posts)))
            .collect()
    }
}

/// Mean quality over all entries of the given feeds. Normalizes by the
/// actual entry count, which equals `alpha * N` once feeds are full.
pub fn average_quality<I, J>(feeds: I) -> Option<f64>
where
    I: IntoIterator<Item = J>,
    J: IntoIterator<Item = f64>,
{
    let (mut sum, mut count) = (0.0, 0usize);
    for feed in feeds {
        for q in feed {
            sum += q;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Shannon entropy (natural log) of the entry distribution given per-meme
/// entry counts. Zero counts are ignored.
pub fn diversity<I: IntoIterator<Item = u64>>(counts: I) -> Option<f64> {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let total = total as f64;
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    Some(h.max(0.0))
}

/// Kendall tau-b in O(n log n) (Knight's algorithm). `None` when fewer than
/// two pairs or when either variable is constant.
pub fn kendall_tau_b(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len();
    if n < 2 {
        return None;
    }
    let mut v: Vec<(f64, f64)> = pairs.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let tie_pairs = |len: u64| len * len.saturating_sub(1) / 2;
    let (mut n1, mut n3) = (0u64, 0u64);
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for w in v.windows(2) {
        if w[0].0 == w[1].0 {
            run_x += 1;
            if w[0].1 == w[1].1 {
                run_xy += 1;
            } else {
                n3 += tie_pairs(run_xy);
                run_xy = 1;
            }
        } else {
            n1 += tie_pairs(run_x);
            n3 += tie_pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    n1 += tie_pairs(run_x);
    n3 += tie_pairs(run_xy);

    let mut ys: Vec<f64> = v.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut n2 = 0u64;
    let mut run_y = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            n2 += tie_pairs(run_y);
            run_y = 1;
        }
    }
    n2 += tie_pairs(run_y);

    let dx = n0 - n1;
    let dy = n0 - n2;
    if dx == 0 || dy == 0 {
        return None;
    }
    let s = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    Some(s as f64 / ((dx as f64) * (dy as f64)).sqrt())
}

/// Stable merge sort counting pairs `i < j` with `v[i] > v[j]`.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps =
        merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Concentration of low-quality entries among high in-degree nodes.
///
/// Nodes are ordered by in-degree (ascending, input order breaks ties) and
/// the Lorenz curve of cumulative low-quality share against node share is
/// integrated with the trapezoid rule; the result is `1 - 2·area`. Positive
/// values mean the mass sits with the hubs, negative values with the
/// periphery. `None` with fewer than two nodes or no low-quality entries.
pub fn gini_hub_concentration(nodes: &[(u32, u64)]) -> Option<f64> {
    let n = nodes.len();
    if n < 2 {
        return None;
    }
    let total: u64 = nodes.iter().map(|&(_, c)| c).sum();
    if total == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| nodes[i].0);
    // twice the area times n·total, accumulated exactly
    let (mut cum, mut twice_area) = (0u128, 0u128);
    for &i in &order {
        let next = cum + u128::from(nodes[i].1);
        twice_area += cum + next;
        cum = next;
    }
    Some(1.0 - twice_area as f64 / (n as f64 * total as f64))
}

/// Complementary cumulative distribution sampled at log-spaced integer
/// thresholds: `(t, P(X >= t))`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ccdf {
    pub samples: usize,
    pub points: Vec<(f64, f64)>,
}

/// Integer thresholds `ceil(10^(k/10))` for `k = 0, 1, ...`, deduplicated,
/// up to the largest one not exceeding `max`.
fn log_thresholds(max: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for k in 0.. {
        let t = (10f64.powf(k as f64 / 10.0) - 1e-9).ceil();
        if t > max {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    out
}

pub fn ccdf(values: &[f64]) -> Ccdf {
    if values.is_empty() {
        return Ccdf::default();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = *sorted.last().unwrap();
    let n = sorted.len() as f64;
    let points = log_thresholds(max)
        .into_iter()
        .map(|t| {
            let below = sorted.partition_point(|&x| x < t);
            (t, (sorted.len() - below) as f64 / n)
        })
        .collect();
    Ccdf {
        samples: sorted.len(),
        points,
    }
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Some(d)
}

/// Popularity samples split by quality class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PopularitySamples {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl PopularitySamples {
    /// Total post counts (human and bot) of ledger memes, split into
    /// `q = 0` and `q > 0`.
    pub fn from_ledger(ledger: &MemeLedger) -> Self {
        let mut s = PopularitySamples::default();
        for r in &ledger.rows {
            let pop = f64::from(r.human_posts + r.bot_posts);
            if r.quality == 0.0 {
                s.low.push(pop);
            } else {
                s.high.push(pop);
            }
        }
        s
    }

    pub fn extend(&mut self, other: PopularitySamples) {
        self.low.extend(other.low);
        self.high.extend(other.high);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopularityDistributions {
    /// `q = 0` memes.
    pub low: Ccdf,
    /// `q > 0` memes.
    pub high: Ccdf,
    pub ks: Option<f64>,
}

pub fn popularity_distribution(ledger: &MemeLedger) -> PopularityDistributions {
    popularity_distribution_of(&PopularitySamples::from_ledger(ledger))
}

pub fn popularity_distribution_of(s: &PopularitySamples) -> PopularityDistributions {
    PopularityDistributions {
        low: ccdf(&s.low),
        high: ccdf(&s.high),
        ks: ks_statistic(&s.low, &s.high),
    }
}

/// Mean of the top decile (at least one value) of `values`.
pub fn top_decile_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let k = (v.len() / 10).max(1);
    Some(v[..k].iter().sum::<f64>() / k as f64)
}

pub const AMPLIFICATION_BINS_PER_DECADE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplificationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_bot_posts: f64,
    pub mean_human_posts: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Amplification {
    pub bins: Vec<AmplificationBin>,
    /// Least-squares fit of `ln V_h = eta · ln V_b` over individual memes.
    pub eta_hat: f64,
}

/// Amplification of low-quality memes by bots. Uses `q = 0` memes with
/// `V_b >= 2` and `V_h >= 1`, binned on `V_b` with ten log bins per decade.
/// Each bin reports `ln(mean V_h) / ln(mean V_b)`.
pub fn amplification_exponent(ledger: &MemeLedger) -> Option<Amplification> {
    let points: Vec<(f64, f64)> = ledger
        .rows
        .iter()
        .filter(|r| r.quality == 0.0 && r.bot_posts >= 2 && r.human_posts >= 1)
        .map(|r| (f64::from(r.bot_posts), f64::from(r.human_posts)))
        .collect();
    amplification_from_points(&points)
}

/// As [`amplification_exponent`], on raw `(V_b, V_h)` pairs that already
/// satisfy the filter.
pub fn amplification_from_points(points: &[(f64, f64)]) -> Option<Amplification> {
    use std::collections::BTreeMap;
    let mut bins: BTreeMap<i64, (usize, f64, f64)> = BTreeMap::new();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(vb, vh) in points {
        let k = (vb.log10() * AMPLIFICATION_BINS_PER_DECADE + 1e-9).floor() as i64;
        let e = bins.entry(k).or_insert((0, 0.0, 0.0));
        e.0 += 1;
        e.1 += vb;
        e.2 += vh;
        let (x, y) = (vb.ln(), vh.ln());
        sxy += x * y;
        sxx += x * x;
    }
    if bins.len() < 2 || sxx == 0.0 {
        return None;
    }
    let bins = bins
        .into_iter()
        .map(|(k, (count, sb, sh))| {
            let mean_bot_posts = sb / count as f64;
            let mean_human_posts = sh / count as f64;
            AmplificationBin {
                lower: 10f64.powf(k as f64 / AMPLIFICATION_BINS_PER_DECADE),
                upper: 10f64.powf((k + 1) as f64 / AMPLIFICATION_BINS_PER_DECADE),
                count,
                mean_bot_posts,
                mean_human_posts,
                eta: mean_human_posts.ln() / mean_bot_posts.ln(),
            }
        })
        .collect();
    Some(Amplification {
        bins,
        eta_hat: sxy / sxx,
    })
}

/// Per-run metric bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub quality: f64,
    pub diversity: f64,
    pub tau: Option<f64>,
    pub gini_hub: Option<f64>,
    pub eta: Option<f64>,
    pub n_memes: usize,
    pub converged: bool,
}

impl MetricsReport {
    /// Metrics over the human subnetwork at the end of a run.
    pub fn from_run(state: &SimState, ledger: &MemeLedger, converged: bool) -> Self {
        let memes = state.memes();
        let human_feeds = state.human_feeds();
        let quality = average_quality(
            human_feeds
                .iter()
                .map(|f| f.iter().map(|m| memes.quality(m.meme))),
        )
        .unwrap_or(0.0);
        let diversity = diversity(
            memes
                .iter()
                .map(|m| u64::from(memes.human_feed_count(m.id))),
        )
        .unwrap_or(0.0);
        let tau = kendall_tau_b(&ledger.quality_popularity());
        let net = state.network();
        let nodes: Vec<(u32, u64)> = human_feeds
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let low = f.iter().filter(|m| memes.quality(m.meme) == 0.0).count() as u64;
                (net.in_degree(NodeId(i as u32)), low)
            })
            .collect();
        let gini_hub = gini_hub_concentration(&nodes);
        let eta = amplification_exponent(ledger).map(|a| a.eta_hat);
        MetricsReport {
            quality,
            diversity,
            tau,
            gini_hub,
            eta,
            n_memes: ledger.len(),
            converged,
        }
    }
}
