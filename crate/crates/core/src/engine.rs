//! Meme diffusion dynamics on a follower network.
//!
//! One step activates one agent chosen uniformly over humans and bots. The
//! agent either posts a new meme (probability `mu`, or always when its feed
//! is empty) or reposts an entry of its feed picked with probability
//! proportional to fitness. The message lands at the head of every
//! follower's bounded feed.

use std::collections::VecDeque;

use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metrics::{LedgerRow, MemeLedger};
use crate::netgen::{NetGenParams, Network, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MemeId(pub u32);

impl MemeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Meme {
    pub id: MemeId,
    pub quality: f64,
    pub fitness: f64,
    pub origin: NodeKind,
}

fn check_phi(phi: f64) -> Result<()> {
    if phi >= 1.0 && phi.is_finite() {
        Ok(())
    } else {
        invalid(format!("deception phi must be >= 1, got {phi}"))
    }
}

/// Inverse CDF of the human fitness density `(1+phi)(1-f)^phi`.
pub fn human_fitness_quantile(phi: f64, u: f64) -> f64 {
    1.0 - (1.0 - u).powf(1.0 / (phi + 1.0))
}

/// Inverse CDF of the bot fitness density `(1+1/phi)(1-f)^(1/phi)`.
pub fn bot_fitness_quantile(phi: f64, u: f64) -> f64 {
    1.0 - (1.0 - u).powf(phi / (phi + 1.0))
}

pub fn sample_human_fitness<R: Rng + ?Sized>(phi: f64, rng: &mut R) -> Result<f64> {
    check_phi(phi)?;
    Ok(human_fitness_quantile(phi, rng.random::<f64>()))
}

pub fn sample_bot_fitness<R: Rng + ?Sized>(phi: f64, rng: &mut R) -> Result<f64> {
    check_phi(phi)?;
    Ok(bot_fitness_quantile(phi, rng.random::<f64>()))
}

/// All memes created during a run plus their per-meme counters.
#[derive(Debug, Clone, Default)]
pub struct MemeRegistry {
    memes: Vec<Meme>,
    human_posts: Vec<u32>,
    bot_posts: Vec<u32>,
    /// Occurrences across every feed.
    feed_count: Vec<u32>,
    /// Occurrences across human feeds only.
    human_feed_count: Vec<u32>,
    observed: Vec<bool>,
}

impl MemeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates a meme: human memes have `q = f`, bot memes `q = 0` with the
    /// deceptive fitness distribution.
    pub fn make_meme<R: Rng + ?Sized>(
        &mut self,
        origin: NodeKind,
        phi: f64,
        rng: &mut R,
    ) -> Result<Meme> {
        check_phi(phi)?;
        Ok(self.create(origin, phi, rng))
    }

    fn create<R: Rng + ?Sized>(&mut self, origin: NodeKind, phi: f64, rng: &mut R) -> Meme {
        let u = rng.random::<f64>();
        let (quality, fitness) = match origin {
            NodeKind::Human => {
                let f = human_fitness_quantile(phi, u);
                (f, f)
            }
            NodeKind::Bot => (0.0, bot_fitness_quantile(phi, u)),
        };
        let meme = Meme {
            id: MemeId(self.memes.len() as u32),
            quality,
            fitness,
            origin,
        };
        self.memes.push(meme);
        self.human_posts.push(0);
        self.bot_posts.push(0);
        self.feed_count.push(0);
        self.human_feed_count.push(0);
        self.observed.push(false);
        meme
    }

    pub fn len(&self) -> usize {
        self.memes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memes.is_empty()
    }

    pub fn get(&self, id: MemeId) -> &Meme {
        &self.memes[id.index()]
    }

    #[inline]
    pub fn fitness(&self, id: MemeId) -> f64 {
        self.memes[id.index()].fitness
    }

    #[inline]
    pub fn quality(&self, id: MemeId) -> f64 {
        self.memes[id.index()].quality
    }

    pub fn human_posts(&self, id: MemeId) -> u32 {
        self.human_posts[id.index()]
    }

    pub fn bot_posts(&self, id: MemeId) -> u32 {
        self.bot_posts[id.index()]
    }

    pub fn human_feed_count(&self, id: MemeId) -> u32 {
        self.human_feed_count[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Meme> {
        self.memes.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub meme: MemeId,
    /// Agent whose post or repost produced this entry.
    pub poster: NodeId,
}

/// Reverse-chronological feed holding at most `capacity` messages. The
/// newest entry is at the front.
#[derive(Debug, Clone)]
pub struct Feed {
    entries: VecDeque<Message>,
    capacity: usize,
}

impl Feed {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "feed capacity must be positive");
        Feed {
            entries: VecDeque::with_capacity(capacity + 1),
            capacity,
        }
    }

    /// Adds `msg` as the newest entry, returning the evicted oldest entry if
    /// the feed overflowed.
    pub fn push(&mut self, msg: Message) -> Option<Message> {
        self.entries.push_front(msg);
        if self.entries.len() > self.capacity {
            self.entries.pop_back()
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Newest first.
    pub fn iter(&self) -> impl Iterator<Item = &Message> {
        self.entries.iter()
    }

    /// Picks an entry with probability proportional to its meme's fitness,
    /// uniformly if every fitness is zero. `None` on an empty feed.
    pub fn select<R, F>(&self, fitness: F, rng: &mut R) -> Option<&Message>
    where
        R: Rng + ?Sized,
        F: Fn(MemeId) -> f64,
    {
        if self.entries.is_empty() {
            return None;
        }
        let total: f64 = self.entries.iter().map(|m| fitness(m.meme)).sum();
        if total <= 0.0 {
            let k = rng.random_range(0..self.entries.len());
            return self.entries.get(k);
        }
        let mut target = rng.random::<f64>() * total;
        for m in &self.entries {
            let f = fitness(m.meme);
            if target < f {
                return Some(m);
            }
            target -= f;
        }
        // Rounding left `target` just past the last positive weight.
        self.entries.iter().rev().find(|m| fitness(m.meme) > 0.0)
    }
}

/// Operational steady-state test. Step counts are multiples of the total
/// node count so defaults scale with network size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadyConfig {
    pub window_per_node: u64,
    /// Relative tolerance on the alive-meme window mean.
    pub rel_tol: f64,
    /// Absolute tolerance on the window mean of human feed quality.
    pub quality_tol: f64,
    pub consecutive: u32,
    pub max_steps_per_node: u64,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        SteadyConfig {
            window_per_node: 10,
            rel_tol: 0.01,
            quality_tol: 0.02,
            consecutive: 3,
            max_steps_per_node: 500,
        }
    }
}

impl SteadyConfig {
    pub fn window(&self, nodes: usize) -> u64 {
        self.window_per_node * nodes as u64
    }

    pub fn max_steps(&self, nodes: usize) -> u64 {
        self.max_steps_per_node * nodes as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub net: NetGenParams,
    pub mu: f64,
    pub alpha: usize,
    pub phi: f64,
    pub steady: SteadyConfig,
    /// Measurement window after steady state, in steps per node.
    pub measure_per_node: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            net: NetGenParams::default(),
            mu: 0.75,
            alpha: 15,
            phi: 1.0,
            steady: SteadyConfig::default(),
            measure_per_node: 50,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if !(0.0..=1.0).contains(&self.mu) {
            return invalid(format!("mu must lie in [0, 1], got {}", self.mu));
        }
        if self.alpha < 1 {
            return invalid("alpha must be >= 1");
        }
        check_phi(self.phi)?;
        let s = &self.steady;
        if s.window_per_node < 1 {
            return invalid("steady-state window must be at least one step per node");
        }
        if !(s.rel_tol > 0.0 && s.rel_tol < 1.0) {
            return invalid(format!("rel_tol must lie in (0, 1), got {}", s.rel_tol));
        }
        if !(s.quality_tol > 0.0 && s.quality_tol < 1.0) {
            return invalid(format!(
                "quality_tol must lie in (0, 1), got {}",
                s.quality_tol
            ));
        }
        if s.consecutive < 1 {
            return invalid("consecutive must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub agent: NodeId,
    pub meme: MemeId,
    pub created: bool,
    pub delivered: usize,
}

/// Evolving state of one run.
#[derive(Debug, Clone)]
pub struct SimState {
    network: Network,
    follower_start: Vec<u32>,
    follower_list: Vec<NodeId>,
    feeds: Vec<Feed>,
    memes: MemeRegistry,
    alive: usize,
    human_quality_sum: f64,
    human_entries: usize,
    measuring: bool,
    step: u64,
}

impl SimState {
    pub fn new(network: Network, alpha: usize) -> Self {
        let followers = network.followers();
        let mut follower_start = Vec::with_capacity(network.len() + 1);
        let mut follower_list = Vec::with_capacity(network.link_count());
        follower_start.push(0);
        for fs in &followers {
            follower_list.extend_from_slice(fs);
            follower_start.push(follower_list.len() as u32);
        }
        let feeds = (0..network.len()).map(|_| Feed::new(alpha)).collect();
        SimState {
            network,
            follower_start,
            follower_list,
            feeds,
            memes: MemeRegistry::new(),
            alive: 0,
            human_quality_sum: 0.0,
            human_entries: 0,
            measuring: false,
            step: 0,
        }
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn memes(&self) -> &MemeRegistry {
        &self.memes
    }

    pub fn feeds(&self) -> &[Feed] {
        &self.feeds
    }

    pub fn human_feeds(&self) -> &[Feed] {
        &self.feeds[..self.network.n_humans()]
    }

    pub fn feed(&self, node: NodeId) -> &Feed {
        &self.feeds[node.index()]
    }

    pub fn followers(&self, node: NodeId) -> &[NodeId] {
        let (a, b) = (
            self.follower_start[node.index()],
            self.follower_start[node.index() + 1],
        );
        &self.follower_list[a as usize..b as usize]
    }

    /// Memes present in at least one feed.
    pub fn alive_memes(&self) -> usize {
        self.alive
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Mean quality over current human feed entries (0 with no entries).
    pub fn instantaneous_quality(&self) -> f64 {
        if self.human_entries == 0 {
            0.0
        } else {
            self.human_quality_sum / self.human_entries as f64
        }
    }

    fn resync_quality_sum(&mut self) {
        let memes = &self.memes;
        self.human_quality_sum = self.feeds[..self.network.n_humans()]
            .iter()
            .flat_map(|f| f.iter())
            .map(|m| memes.quality(m.meme))
            .sum();
    }

    fn begin_measurement(&mut self) {
        self.measuring = true;
        for feed in &self.feeds[..self.network.n_humans()] {
            for m in feed.iter() {
                self.memes.observed[m.meme.index()] = true;
            }
        }
    }

    /// Activates one uniformly chosen agent.
    pub fn step<R: Rng + ?Sized>(&mut self, mu: f64, phi: f64, rng: &mut R) -> StepEvent {
        let n = self.network.len();
        let n_humans = self.network.n_humans();
        let agent = NodeId(rng.random_range(0..n) as u32);
        let kind = self.network.kind(agent);
        let wants_new = rng.random::<f64>() < mu;
        let feed = &self.feeds[agent.index()];
        let (meme, created) = if wants_new || feed.is_empty() {
            (self.memes.create(kind, phi, rng).id, true)
        } else {
            let memes = &self.memes;
            let pick = feed
                .select(|id| memes.fitness(id), rng)
                .expect("non-empty feed");
            (pick.meme, false)
        };
        let mi = meme.index();
        match kind {
            NodeKind::Human => {
                self.memes.human_posts[mi] += 1;
                if self.measuring {
                    self.memes.observed[mi] = true;
                }
            }
            NodeKind::Bot => self.memes.bot_posts[mi] += 1,
        }

        let msg = Message {
            meme,
            poster: agent,
        };
        let q = self.memes.quality(meme);
        let (a, b) = (
            self.follower_start[agent.index()] as usize,
            self.follower_start[agent.index() + 1] as usize,
        );
        for k in a..b {
            let follower = self.follower_list[k];
            let human = follower.index() < n_humans;
            let evicted = self.feeds[follower.index()].push(msg);
            if self.memes.feed_count[mi] == 0 {
                self.alive += 1;
            }
            self.memes.feed_count[mi] += 1;
            if human {
                self.memes.human_feed_count[mi] += 1;
                self.human_quality_sum += q;
                self.human_entries += 1;
                if self.measuring {
                    self.memes.observed[mi] = true;
                }
            }
            if let Some(old) = evicted {
                let oi = old.meme.index();
                self.memes.feed_count[oi] -= 1;
                if self.memes.feed_count[oi] == 0 {
                    self.alive -= 1;
                }
                if human {
                    self.memes.human_feed_count[oi] -= 1;
                    self.human_quality_sum -= self.memes.quality(old.meme);
                    self.human_entries -= 1;
                }
            }
            debug_assert!(
                self.feeds[follower.index()].len() <= self.feeds[follower.index()].capacity()
            );
        }
        self.step += 1;
        StepEvent {
            agent,
            meme,
            created,
            delivered: b - a,
        }
    }

    /// Ledger of memes seen in the human subnetwork during measurement.
    pub fn ledger(&self) -> MemeLedger {
        self.rows_where(|i| self.memes.observed[i])
    }

    /// Every meme created at or after `since`, whether or not it reached a
    /// human.
    pub fn population_ledger(&self, since: MemeId) -> MemeLedger {
        self.rows_where(|i| i >= since.index())
    }

    fn rows_where<P: Fn(usize) -> bool>(&self, keep: P) -> MemeLedger {
        let rows = self
            .memes
            .iter()
            .filter(|m| keep(m.id.index()))
            .map(|m| {
                let i = m.id.index();
                debug_assert!(match m.origin {
                    NodeKind::Human => m.quality == m.fitness,
                    NodeKind::Bot => m.quality == 0.0,
                });
                LedgerRow {
                    meme_id: m.id.0,
                    origin: m.origin,
                    quality: m.quality,
                    fitness: m.fitness,
                    human_posts: self.memes.human_posts[i],
                    bot_posts: self.memes.bot_posts[i],
                    feed_occurrences_at_end: self.memes.human_feed_count[i],
                }
            })
            .collect();
        MemeLedger { rows }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: SimState,
    pub ledger: MemeLedger,
    pub converged: bool,
    /// First meme created during the measurement window.
    pub measure_start: MemeId,
    /// Steps spent reaching (or failing to reach) steady state.
    pub warmup_steps: u64,
}

/// Runs until the window means of the alive-meme count and of the human
/// feed quality both settle, then for the measurement window.
pub fn run_to_steady_state<R: Rng + ?Sized>(
    params: &SimParams,
    network: Network,
    rng: &mut R,
) -> Result<RunOutput> {
    params.validate()?;
    let nodes = network.len();
    if nodes == 0 {
        return invalid("network has no nodes");
    }
    let mut state = SimState::new(network, params.alpha);
    let steady = &params.steady;
    let window = steady.window(nodes);
    let max_steps = steady.max_steps(nodes);
    let mut prev: Option<(f64, f64)> = None;
    let mut streak = 0;
    let mut converged = false;
    while state.step < max_steps {
        let len = window.min(max_steps - state.step);
        let (mut alive_sum, mut q_sum) = (0.0, 0.0);
        for _ in 0..len {
            state.step(params.mu, params.phi, rng);
            alive_sum += state.alive as f64;
            q_sum += state.instantaneous_quality();
        }
        state.resync_quality_sum();
        let cur = (alive_sum / len as f64, q_sum / len as f64);
        if let Some(p) = prev {
            let alive_ok = (cur.0 - p.0).abs() <= steady.rel_tol * p.0.abs();
            let quality_ok = (cur.1 - p.1).abs() <= steady.quality_tol;
            if alive_ok && quality_ok {
                streak += 1;
            } else {
                streak = 0;
            }
        }
        prev = Some(cur);
        if streak >= steady.consecutive {
            converged = true;
            break;
        }
    }
    let warmup_steps = state.step;
    debug!("warmup finished after {warmup_steps} steps, converged={converged}");
    state.begin_measurement();
    let measure_start = MemeId(state.memes.len() as u32);
    for _ in 0..params.measure_per_node * nodes as u64 {
        state.step(params.mu, params.phi, rng);
    }
    state.resync_quality_sum();
    let ledger = state.ledger();
    Ok(RunOutput {
        state,
        ledger,
        converged,
        measure_start,
        warmup_steps,
    })
}
