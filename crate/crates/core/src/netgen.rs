//! Follower network generation.
//!
//! Links point from follower to friend; content flows the other way. Humans
//! occupy ids `0..N` and bots `N..N+B`.

use std::collections::HashSet;
use std::io::{self, Write};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::seed::{Purpose, RunSeed};

/// Size of the fully connected seed every directed growth model starts from.
pub const SEED_NODES: usize = 4;

/// Attempts at drawing a fresh (non-duplicate) friend before falling back to
/// an explicit scan of the remaining candidates.
const MAX_RESAMPLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Human,
    Bot,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Human => "human",
            NodeKind::Bot => "bot",
        }
    }
}

/// How humans are chosen to follow bots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wiring {
    Random,
    Preferential,
}

impl Wiring {
    pub fn as_str(self) -> &'static str {
        match self {
            Wiring::Random => "random",
            Wiring::Preferential => "preferential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    /// Directed random-walk growth with link copying (hubs and clustering).
    #[serde(rename = "rw")]
    RandomWalk,
    /// Directed preferential attachment, negligible clustering.
    #[serde(rename = "pa")]
    PreferentialAttachment,
    /// Undirected preferential attachment stored as reciprocal links.
    #[serde(rename = "undirected-pa")]
    UndirectedPA,
}

impl Generator {
    pub fn as_str(self) -> &'static str {
        match self {
            Generator::RandomWalk => "rw",
            Generator::PreferentialAttachment => "pa",
            Generator::UndirectedPA => "undirected-pa",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetGenParams {
    pub n_humans: usize,
    pub beta: f64,
    pub k_out: usize,
    pub p: f64,
    pub gamma: f64,
    pub wiring: Wiring,
    pub generator: Generator,
    pub rewire_dead_ends: bool,
    /// Mean degree of the undirected preferential-attachment variant.
    pub mean_degree: usize,
}

impl Default for NetGenParams {
    fn default() -> Self {
        NetGenParams {
            n_humans: 10_000,
            beta: 0.1,
            k_out: 3,
            p: 0.5,
            gamma: 0.1,
            wiring: Wiring::Random,
            generator: Generator::RandomWalk,
            rewire_dead_ends: false,
            mean_degree: 20,
        }
    }
}

impl NetGenParams {
    pub fn n_bots(&self) -> usize {
        (self.beta * self.n_humans as f64).round() as usize
    }

    pub fn total_nodes(&self) -> usize {
        self.n_humans + self.n_bots()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return invalid(format!("beta must be >= 0, got {}", self.beta));
        }
        check_probability("gamma", self.gamma)?;
        check_probability("p", self.p)?;
        if self.k_out < 1 {
            return invalid("k_out must be >= 1");
        }
        Ok(())
    }
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        invalid(format!("{name} must lie in [0, 1], got {v}"))
    }
}

/// Directed follower graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    out_adj: Vec<Vec<NodeId>>,
    in_degree: Vec<u32>,
    kinds: Vec<NodeKind>,
    n_humans: usize,
}

impl Network {
    /// An edgeless network of `n_humans` humans followed by `n_bots` bots.
    pub fn empty(n_humans: usize, n_bots: usize) -> Self {
        let n = n_humans + n_bots;
        let mut kinds = vec![NodeKind::Human; n];
        kinds[n_humans..].fill(NodeKind::Bot);
        Network {
            out_adj: vec![Vec::new(); n],
            in_degree: vec![0; n],
            kinds,
            n_humans,
        }
    }

    fn with_humans(n: usize) -> Self {
        Self::empty(n, 0)
    }

    /// Places `bots` after `humans`, relabelling its nodes as bots.
    pub fn compose(humans: Network, bots: Network) -> Network {
        let n_humans = humans.len();
        let mut net = Network::empty(n_humans, bots.len());
        for (i, friends) in humans.out_adj.into_iter().enumerate() {
            net.out_adj[i] = friends;
        }
        net.in_degree[..n_humans].copy_from_slice(&humans.in_degree);
        let offset = n_humans as u32;
        for (i, friends) in bots.out_adj.into_iter().enumerate() {
            net.out_adj[n_humans + i] = friends.into_iter().map(|f| NodeId(f.0 + offset)).collect();
        }
        net.in_degree[n_humans..].copy_from_slice(&bots.in_degree);
        net
    }

    pub fn len(&self) -> usize {
        self.out_adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out_adj.is_empty()
    }

    pub fn n_humans(&self) -> usize {
        self.n_humans
    }

    pub fn n_bots(&self) -> usize {
        self.len() - self.n_humans
    }

    pub fn kind(&self, node: NodeId) -> NodeKind {
        self.kinds[node.index()]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    /// Accounts `node` follows.
    pub fn friends(&self, node: NodeId) -> &[NodeId] {
        &self.out_adj[node.index()]
    }

    pub fn in_degree(&self, node: NodeId) -> u32 {
        self.in_degree[node.index()]
    }

    pub fn in_degrees(&self) -> &[u32] {
        &self.in_degree
    }

    pub fn out_degree(&self, node: NodeId) -> usize {
        self.out_adj[node.index()].len()
    }

    pub fn link_count(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    pub fn has_link(&self, follower: NodeId, friend: NodeId) -> bool {
        self.out_adj[follower.index()].contains(&friend)
    }

    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(i, fs)| fs.iter().map(move |&f| (NodeId(i as u32), f)))
    }

    fn add_link(&mut self, follower: NodeId, friend: NodeId) {
        debug_assert_ne!(follower, friend);
        debug_assert!(!self.has_link(follower, friend));
        self.out_adj[follower.index()].push(friend);
        self.in_degree[friend.index()] += 1;
    }

    /// Follower lists per node, in ascending follower id order.
    pub fn followers(&self) -> Vec<Vec<NodeId>> {
        let mut followers: Vec<Vec<NodeId>> = self
            .in_degree
            .iter()
            .map(|&d| Vec::with_capacity(d as usize))
            .collect();
        for (follower, friend) in self.links() {
            followers[friend.index()].push(follower);
        }
        followers
    }

    /// Number of human→bot links.
    pub fn infiltration_links(&self) -> usize {
        self.out_adj[..self.n_humans]
            .iter()
            .flatten()
            .filter(|f| f.index() >= self.n_humans)
            .count()
    }

    /// Checks the structural invariants: no self-links, no duplicate links,
    /// cached in-degrees consistent with the adjacency.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut recomputed = vec![0u32; self.len()];
        for (i, friends) in self.out_adj.iter().enumerate() {
            let mut seen = HashSet::with_capacity(friends.len());
            for f in friends {
                if f.index() == i {
                    return Err(format!("self-link at node {i}"));
                }
                if f.index() >= self.len() {
                    return Err(format!("dangling link {i} -> {}", f.0));
                }
                if !seen.insert(*f) {
                    return Err(format!("duplicate link {i} -> {}", f.0));
                }
                recomputed[f.index()] += 1;
            }
        }
        if recomputed != self.in_degree {
            return Err("cached in-degree mismatch".into());
        }
        Ok(())
    }

    /// Fraction of directed two-paths `i→j→k` (k ≠ i) closed by a link `i→k`.
    pub fn clustering(&self) -> f64 {
        let sets: Vec<HashSet<NodeId>> = self
            .out_adj
            .iter()
            .map(|fs| fs.iter().copied().collect())
            .collect();
        let (mut paths, mut closed) = (0u64, 0u64);
        for (i, friends) in self.out_adj.iter().enumerate() {
            for &j in friends {
                for &k in &self.out_adj[j.index()] {
                    if k.index() == i {
                        continue;
                    }
                    paths += 1;
                    if sets[i].contains(&k) {
                        closed += 1;
                    }
                }
            }
        }
        if paths == 0 {
            0.0
        } else {
            closed as f64 / paths as f64
        }
    }

    /// Tab-separated edge list preceded by a `# nodes=.. humans=.. bots=..`
    /// header.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# nodes={} humans={} bots={}",
            self.len(),
            self.n_humans,
            self.n_bots()
        )?;
        for (follower, friend) in self.links() {
            writeln!(w, "{}\t{}", follower.0, friend.0)?;
        }
        Ok(())
    }
}

fn seed_clique(n: usize) -> Network {
    let mut net = Network::with_humans(n);
    for i in 0..SEED_NODES {
        for j in 0..SEED_NODES {
            if i != j {
                net.add_link(NodeId(i as u32), NodeId(j as u32));
            }
        }
    }
    net
}

fn check_growth(n: usize, k_out: usize) -> Result<()> {
    if n < SEED_NODES {
        return invalid(format!(
            "network needs at least {SEED_NODES} nodes, got {n}"
        ));
    }
    if k_out < 1 || k_out >= n {
        return invalid(format!(
            "k_out must satisfy 1 <= k_out < n, got k_out={k_out} n={n}"
        ));
    }
    Ok(())
}

/// Uniform node in `0..upper` not in `taken`: rejection sampling first, then
/// an explicit scan of what's left.
fn fresh_uniform<R: Rng + ?Sized>(upper: usize, taken: &[NodeId], rng: &mut R) -> NodeId {
    for _ in 0..MAX_RESAMPLE {
        let c = NodeId(rng.random_range(0..upper) as u32);
        if !taken.contains(&c) {
            return c;
        }
    }
    let rest: Vec<NodeId> = (0..upper as u32)
        .map(NodeId)
        .filter(|c| !taken.contains(c))
        .collect();
    *rest
        .choose(rng)
        .expect("caller guarantees a free candidate")
}

/// Directed random-walk growth: each new node follows a uniformly random
/// node `j`, then for each remaining link copies a random friend of `j`
/// with probability `p`, otherwise follows another uniform node.
pub fn grow_rw_subnetwork<R: Rng + ?Sized>(
    n: usize,
    k_out: usize,
    p: f64,
    rng: &mut R,
) -> Result<Network> {
    check_growth(n, k_out)?;
    check_probability("p", p)?;
    let mut net = seed_clique(n);
    let mut chosen: Vec<NodeId> = Vec::with_capacity(k_out);
    for i in SEED_NODES..n {
        chosen.clear();
        let links = k_out.min(i);
        let j = NodeId(rng.random_range(0..i) as u32);
        chosen.push(j);
        while chosen.len() < links {
            let copy = rng.random_bool(p);
            let target = if copy {
                let unused: Vec<NodeId> = net
                    .friends(j)
                    .iter()
                    .copied()
                    .filter(|f| !chosen.contains(f))
                    .collect();
                match unused.choose(rng) {
                    Some(&f) => f,
                    None => fresh_uniform(i, &chosen, rng),
                }
            } else {
                fresh_uniform(i, &chosen, rng)
            };
            chosen.push(target);
        }
        for &f in &chosen {
            net.add_link(NodeId(i as u32), f);
        }
    }
    Ok(net)
}

/// Directed preferential attachment: friends drawn with probability
/// proportional to `in_degree + 1` among existing nodes.
pub fn grow_pa_subnetwork<R: Rng + ?Sized>(n: usize, k_out: usize, rng: &mut R) -> Result<Network> {
    check_growth(n, k_out)?;
    let mut net = seed_clique(n);
    // Each node appears once for itself plus once per follower, so a uniform
    // draw from this urn is proportional to in_degree + 1.
    let mut urn: Vec<NodeId> = Vec::with_capacity(n * (k_out + 1));
    for i in 0..SEED_NODES {
        for _ in 0..=net.in_degree[i] {
            urn.push(NodeId(i as u32));
        }
    }
    let mut chosen: Vec<NodeId> = Vec::with_capacity(k_out);
    for i in SEED_NODES..n {
        chosen.clear();
        let links = k_out.min(i);
        while chosen.len() < links {
            let mut pick = None;
            for _ in 0..MAX_RESAMPLE {
                let c = *urn.choose(rng).expect("urn is never empty");
                if !chosen.contains(&c) {
                    pick = Some(c);
                    break;
                }
            }
            let target = match pick {
                Some(c) => c,
                None => fresh_uniform(i, &chosen, rng),
            };
            chosen.push(target);
        }
        for &f in &chosen {
            net.add_link(NodeId(i as u32), f);
            urn.push(f);
        }
        urn.push(NodeId(i as u32));
    }
    Ok(net)
}

/// Undirected Barabási–Albert growth with `mean_degree / 2` edges per new
/// node, starting from a clique of `m + 1` nodes. Every edge is stored as a
/// pair of reciprocal links.
pub fn grow_undirected_pa<R: Rng + ?Sized>(
    n: usize,
    mean_degree: usize,
    rng: &mut R,
) -> Result<Network> {
    if mean_degree < 2 || !mean_degree.is_multiple_of(2) {
        return invalid(format!(
            "mean_degree must be even and >= 2, got {mean_degree}"
        ));
    }
    let m = mean_degree / 2;
    if n <= m {
        return invalid(format!("undirected PA needs n > m = {m}, got n = {n}"));
    }
    let mut net = Network::with_humans(n);
    let mut urn: Vec<NodeId> = Vec::with_capacity(2 * n * m);
    let start = m + 1;
    for a in 0..start.min(n) {
        for b in (a + 1)..start.min(n) {
            let (a, b) = (NodeId(a as u32), NodeId(b as u32));
            net.add_link(a, b);
            net.add_link(b, a);
            urn.push(a);
            urn.push(b);
        }
    }
    let mut chosen: Vec<NodeId> = Vec::with_capacity(m);
    for i in start..n {
        chosen.clear();
        while chosen.len() < m {
            let c = *urn.choose(rng).expect("seed clique has edges");
            if !chosen.contains(&c) {
                chosen.push(c);
            }
        }
        let node = NodeId(i as u32);
        for &t in &chosen {
            net.add_link(node, t);
            net.add_link(t, node);
            urn.push(node);
            urn.push(t);
        }
    }
    Ok(net)
}

/// Gives every node without followers one follower, by redirecting a link
/// that currently points at a node with more than two followers.
///
/// For each dead end `i` (in id order) a random `j` with `in_degree > 2` is
/// drawn, then a random follower `m` of `j` that does not already follow
/// `i`; the link `m→j` becomes `m→i`. Degree sums are unchanged.
pub fn rewire_dead_ends<R: Rng + ?Sized>(mut net: Network, rng: &mut R) -> Result<Network> {
    let n = net.len();
    if net.in_degree.iter().all(|&d| d >= 1) {
        return Ok(net);
    }
    let mut followers = net.followers();
    for i in 0..n {
        if net.in_degree[i] > 0 {
            continue;
        }
        let target = NodeId(i as u32);
        let donors: Vec<usize> = (0..n).filter(|&j| net.in_degree[j] > 2).collect();
        if donors.is_empty() {
            return Err(SimError::RewiringInfeasible);
        }
        let eligible =
            |net: &Network, j: usize, m: NodeId| m != target && !net.has_link(m, target) && j != i;
        let mut found = None;
        for _ in 0..MAX_RESAMPLE {
            let j = *donors.choose(rng).expect("non-empty");
            let cands: Vec<NodeId> = followers[j]
                .iter()
                .copied()
                .filter(|&m| eligible(&net, j, m))
                .collect();
            if let Some(&m) = cands.choose(rng) {
                found = Some((j, m));
                break;
            }
        }
        if found.is_none() {
            let all: Vec<(usize, NodeId)> = donors
                .iter()
                .flat_map(|&j| followers[j].iter().map(move |&m| (j, m)))
                .filter(|&(j, m)| eligible(&net, j, m))
                .collect();
            found = all.choose(rng).copied();
        }
        let (j, m) = found.ok_or(SimError::RewiringInfeasible)?;
        let slot = net.out_adj[m.index()]
            .iter()
            .position(|&f| f.index() == j)
            .expect("m follows j");
        net.out_adj[m.index()][slot] = target;
        net.in_degree[j] -= 1;
        net.in_degree[i] += 1;
        let pos = followers[j]
            .iter()
            .position(|&f| f == m)
            .expect("m follows j");
        followers[j].remove(pos);
        followers[i].push(m);
    }
    Ok(net)
}

/// Each human follows each bot independently with probability `gamma`.
pub fn infiltrate_random<R: Rng + ?Sized>(
    mut net: Network,
    gamma: f64,
    rng: &mut R,
) -> Result<Network> {
    check_probability("gamma", gamma)?;
    if gamma == 0.0 {
        return Ok(net);
    }
    let (n, total) = (net.n_humans, net.len());
    for h in 0..n {
        for b in n..total {
            if rng.random_bool(gamma) {
                net.add_link(NodeId(h as u32), NodeId(b as u32));
            }
        }
    }
    Ok(net)
}

/// Each bot gains exactly `round(gamma·N)` distinct human followers, drawn
/// without replacement with weight equal to the human's in-degree before
/// infiltration. Humans without followers are only used, uniformly, once
/// every positively weighted human has been taken.
pub fn infiltrate_preferential<R: Rng + ?Sized>(
    mut net: Network,
    gamma: f64,
    rng: &mut R,
) -> Result<Network> {
    check_probability("gamma", gamma)?;
    let n = net.n_humans;
    let slots = (gamma * n as f64).round() as usize;
    if slots > n {
        return invalid(format!("round(gamma*N) = {slots} exceeds N = {n}"));
    }
    if slots == 0 || net.n_bots() == 0 {
        return Ok(net);
    }
    let weights: Vec<f64> = net.in_degree[..n].iter().map(|&d| f64::from(d)).collect();
    let mut keyed: Vec<(f64, u32)> = Vec::with_capacity(n);
    let mut picked: Vec<u32> = Vec::with_capacity(slots);
    for b in n..net.len() {
        keyed.clear();
        for (h, &w) in weights.iter().enumerate() {
            let key = if w > 0.0 {
                // Efraimidis–Spirakis: keep the largest ln(u)/w.
                let u = 1.0 - rng.random::<f64>();
                u.ln() / w
            } else {
                f64::NEG_INFINITY
            };
            keyed.push((key, h as u32));
        }
        let positive = weights.iter().filter(|&&w| w > 0.0).count();
        picked.clear();
        if slots < positive {
            keyed.select_nth_unstable_by(slots, |a, b| b.0.total_cmp(&a.0));
            picked.extend(keyed[..slots].iter().map(|&(_, h)| h));
        } else {
            picked.extend(
                keyed
                    .iter()
                    .filter(|k| k.0 > f64::NEG_INFINITY)
                    .map(|&(_, h)| h),
            );
            let zero: Vec<u32> = keyed
                .iter()
                .filter(|k| k.0 == f64::NEG_INFINITY)
                .map(|&(_, h)| h)
                .collect();
            picked.extend(zero.choose_multiple(rng, slots - positive).copied());
        }
        picked.sort_unstable();
        for &h in &picked {
            net.add_link(NodeId(h), NodeId(b as u32));
        }
    }
    Ok(net)
}

fn grow_subnetwork<R: Rng + ?Sized>(
    params: &NetGenParams,
    n: usize,
    rng: &mut R,
) -> Result<Network> {
    let net = match params.generator {
        Generator::RandomWalk => grow_rw_subnetwork(n, params.k_out, params.p, rng)?,
        Generator::PreferentialAttachment => grow_pa_subnetwork(n, params.k_out, rng)?,
        Generator::UndirectedPA => grow_undirected_pa(n, params.mean_degree, rng)?,
    };
    if params.rewire_dead_ends {
        rewire_dead_ends(net, rng)
    } else {
        Ok(net)
    }
}

/// Builds the full human + bot network for one run. The two subnetworks and
/// the infiltration links draw from separate streams of `seed`.
pub fn build_network(params: &NetGenParams, seed: RunSeed) -> Result<Network> {
    params.validate()?;
    let humans = grow_subnetwork(
        params,
        params.n_humans,
        &mut seed.rng(Purpose::HumanNetwork),
    )?;
    let n_bots = params.n_bots();
    let bots = if n_bots == 0 {
        Network::with_humans(0)
    } else {
        grow_subnetwork(params, n_bots, &mut seed.rng(Purpose::BotNetwork))?
    };
    let net = Network::compose(humans, bots);
    let mut rng = seed.rng(Purpose::Infiltration);
    match params.wiring {
        Wiring::Random => infiltrate_random(net, params.gamma, &mut rng),
        Wiring::Preferential => infiltrate_preferential(net, params.gamma, &mut rng),
    }
}
