//! Executable semantics: sampling plays, truncated value iteration,
//! qualitative checks on the truncated arena, best responses and the
//! bounded-path search.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::game::{fmt_rational, BpaGame, Config, Owner, Sym};
use crate::strategy::{RegularStrategy, SmdStrategy};

pub const DEFAULT_STATE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlayError {
    #[error("truncated state space exceeds the cap of {0} configurations")]
    StateCap(usize),
    #[error("strategy undefined at `{0}`")]
    Undefined(String),
    #[error("start configuration `{0}` is longer than the height bound {1}")]
    StartTooLong(String, usize),
}

/// What counts as reaching the goal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Goal {
    T,
    /// T or the empty stack.
    TEps,
}

impl Goal {
    pub fn reached(self, game: &BpaGame, config: &[Sym]) -> bool {
        match config.first() {
            Some(&x) => game.is_target(x),
            None => self == Goal::TEps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Pessimistic,
    Optimistic,
    Both,
}

impl Mode {
    pub fn keyword(self) -> &'static str {
        match self {
            Mode::Pessimistic => "pess",
            Mode::Optimistic => "opt",
            Mode::Both => "both",
        }
    }
}

fn sample(rng: &mut ChaCha8Rng, weights: &[(usize, BigRational)]) -> usize {
    let total: f64 = weights.iter().map(|(_, w)| w.to_f64().unwrap_or(0.0)).sum();
    let mut u = rng.random::<f64>() * total;
    for (r, w) in weights {
        u -= w.to_f64().unwrap_or(0.0);
        if u < 0.0 {
            return *r;
        }
    }
    weights.last().expect("non-empty distribution").0
}

fn circle_weights(game: &BpaGame, x: Sym) -> Vec<(usize, BigRational)> {
    game.rules_of(x)
        .iter()
        .map(|&r| (r, game.rule(r).prob.clone().expect("circle rules carry probabilities")))
        .collect()
}

/// The two strategies driving a play.
pub struct Players<'a> {
    pub sigma: &'a RegularStrategy,
    pub pi: &'a RegularStrategy,
}

/// One sampled step.
pub fn step(game: &BpaGame, config: &[Sym], players: &Players, rng: &mut ChaCha8Rng) -> Result<Config, PlayError> {
    let Some(&x) = config.first() else {
        return Ok(Vec::new());
    };
    let weights = match game.owner(x) {
        Owner::Circle => circle_weights(game, x),
        owner => {
            let s = if owner == Owner::Box { players.sigma } else { players.pi };
            s.decide(config)
                .ok_or_else(|| PlayError::Undefined(game.fmt_config(config)))?
                .support
                .clone()
        }
    };
    Ok(game.apply(sample(rng, &weights), config))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimStats {
    pub runs: u64,
    pub hits: u64,
    /// Runs that can no longer reach the goal.
    pub misses: u64,
    pub capped_runs: u64,
    pub mean_steps_to_hit: f64,
    pub seed: u64,
}

impl SimStats {
    pub fn hit_rate(&self) -> BigRational {
        BigRational::new(self.hits.into(), self.runs.max(1).into())
    }
}

impl fmt::Display for SimStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "runs={} hits={} misses={} capped={} hit_rate={} mean_steps_to_hit={:.3} seed={}",
            self.runs,
            self.hits,
            self.misses,
            self.capped_runs,
            fmt_rational(&self.hit_rate()),
            self.mean_steps_to_hit,
            self.seed
        )
    }
}

/// Stack with per-position memory of both strategies, bottom first.
struct Runner<'a> {
    game: &'a BpaGame,
    players: &'a Players<'a>,
    stack: Vec<Sym>,
    /// `mem[k]`: memories after reading `stack[..k]`.
    mem: Vec<(usize, usize)>,
}

impl<'a> Runner<'a> {
    fn new(game: &'a BpaGame, players: &'a Players<'a>, start: &[Sym]) -> Runner<'a> {
        let mut r = Runner {
            game,
            players,
            stack: Vec::new(),
            mem: vec![(players.sigma.initial, players.pi.initial)],
        };
        r.push(start);
        r
    }

    /// Pushes `word` (top first).
    fn push(&mut self, word: &[Sym]) {
        for &x in word.iter().rev() {
            let (ms, mp) = *self.mem.last().unwrap();
            self.stack.push(x);
            self.mem
                .push((self.players.sigma.update[ms][x], self.players.pi.update[mp][x]));
        }
    }

    fn pop(&mut self) -> Option<Sym> {
        self.mem.pop();
        self.stack.pop()
    }

    fn weights(&self, x: Sym) -> Vec<(usize, BigRational)> {
        let (ms, mp) = self.mem[self.stack.len() - 1];
        match self.game.owner(x) {
            Owner::Circle => circle_weights(self.game, x),
            Owner::Box => self.players.sigma.choose[ms][x].clone().expect("owned").support,
            Owner::Diamond => self.players.pi.choose[mp][x].clone().expect("owned").support,
        }
    }
}

/// Independent runs; run `i` draws from stream `i` of the seeded generator.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    game: &BpaGame,
    players: &Players,
    start: &[Sym],
    runs: u64,
    max_steps: u64,
    seed: u64,
    goal: Goal,
) -> SimStats {
    let mut hits = 0;
    let mut misses = 0;
    let mut capped = 0;
    let mut steps_sum = 0u64;
    for i in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i);
        let mut run = Runner::new(game, players, start);
        let mut outcome = None;
        for t in 0..=max_steps {
            let top = run.stack.last().copied();
            match top {
                Some(x) if game.is_target(x) => outcome = Some(Some(t)),
                None if goal == Goal::TEps => outcome = Some(Some(t)),
                None => outcome = Some(None),
                Some(x) => {
                    if t == max_steps {
                        break;
                    }
                    let w = run.weights(x);
                    if w.iter().all(|(r, _)| game.rule(*r).rhs == [x]) {
                        outcome = Some(None);
                    } else {
                        let r = sample(&mut rng, &w);
                        run.pop();
                        let rhs = game.rule(r).rhs.clone();
                        run.push(&rhs);
                    }
                }
            }
            if outcome.is_some() {
                break;
            }
        }
        match outcome {
            Some(Some(t)) => {
                hits += 1;
                steps_sum += t;
            }
            Some(None) => misses += 1,
            None => capped += 1,
        }
    }
    SimStats {
        runs,
        hits,
        misses,
        capped_runs: capped,
        mean_steps_to_hit: if hits == 0 { 0.0 } else { steps_sum as f64 / hits as f64 },
        seed,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Target,
    /// The empty stack when it is not a goal.
    Dead,
    Overflow,
    /// A player node; successors with the rule taken.
    Choice {
        owner: Owner,
        succ: Vec<(usize, usize)>,
    },
    Random {
        succ: Vec<(usize, BigRational)>,
    },
}

/// The truncated game graph: configurations of length at most `height`
/// reachable from the starts. Node 0 stands for every longer configuration.
#[derive(Clone, Debug)]
pub struct Arena {
    pub configs: Vec<Config>,
    pub index: HashMap<Config, usize>,
    pub nodes: Vec<Node>,
    pub height: usize,
}

pub const OVERFLOW: usize = 0;

impl Arena {
    /// Builds the arena; a supplied strategy turns its player's nodes into
    /// random nodes.
    pub fn build(
        game: &BpaGame,
        starts: &[Config],
        height: usize,
        goal: Goal,
        sigma: Option<&RegularStrategy>,
        pi: Option<&RegularStrategy>,
        cap: usize,
    ) -> Result<Arena, PlayError> {
        let mut a = Arena {
            configs: vec![Vec::new()],
            index: HashMap::new(),
            nodes: vec![Node::Overflow],
            height,
        };
        let mut queue = VecDeque::new();
        for s in starts {
            if s.len() > height {
                return Err(PlayError::StartTooLong(game.fmt_config(s), height));
            }
            a.intern(s.clone(), &mut queue, cap)?;
        }
        while let Some(i) = queue.pop_front() {
            let c = a.configs[i].clone();
            let node = match c.first() {
                _ if goal.reached(game, &c) => Node::Target,
                None => Node::Dead,
                Some(&x) => {
                    let fixed = match game.owner(x) {
                        Owner::Circle => Some(circle_weights(game, x)),
                        Owner::Box => sigma
                            .map(|s| s.decide(&c).map(|d| d.support.clone()))
                            .map(|d| d.ok_or_else(|| PlayError::Undefined(game.fmt_config(&c))))
                            .transpose()?,
                        Owner::Diamond => pi
                            .map(|s| s.decide(&c).map(|d| d.support.clone()))
                            .map(|d| d.ok_or_else(|| PlayError::Undefined(game.fmt_config(&c))))
                            .transpose()?,
                    };
                    match fixed {
                        Some(ws) => {
                            let mut succ: Vec<(usize, BigRational)> = Vec::new();
                            for (r, w) in ws {
                                let j = a.successor(game, r, &c, &mut queue, cap)?;
                                match succ.iter_mut().find(|(k, _)| *k == j) {
                                    Some((_, acc)) => *acc += w,
                                    None => succ.push((j, w)),
                                }
                            }
                            Node::Random { succ }
                        }
                        None => {
                            let mut succ = Vec::new();
                            for &r in game.rules_of(x) {
                                succ.push((a.successor(game, r, &c, &mut queue, cap)?, r));
                            }
                            Node::Choice {
                                owner: game.owner(x),
                                succ,
                            }
                        }
                    }
                }
            };
            a.nodes[i] = node;
        }
        Ok(a)
    }

    fn intern(&mut self, c: Config, queue: &mut VecDeque<usize>, cap: usize) -> Result<usize, PlayError> {
        if let Some(&i) = self.index.get(&c) {
            return Ok(i);
        }
        if self.configs.len() >= cap {
            return Err(PlayError::StateCap(cap));
        }
        let i = self.configs.len();
        self.configs.push(c.clone());
        self.nodes.push(Node::Dead);
        self.index.insert(c, i);
        queue.push_back(i);
        Ok(i)
    }

    fn successor(
        &mut self,
        game: &BpaGame,
        r: usize,
        c: &[Sym],
        queue: &mut VecDeque<usize>,
        cap: usize,
    ) -> Result<usize, PlayError> {
        let next = game.apply(r, c);
        if next.len() > self.height {
            Ok(OVERFLOW)
        } else {
            self.intern(next, queue, cap)
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn node_of(&self, c: &[Sym]) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Values after `iters` Jacobi sweeps of the Bellman operator.
    pub fn values_f64(&self, iters: usize, overflow: bool) -> Vec<f64> {
        let ov = if overflow { 1.0 } else { 0.0 };
        let mut v: Vec<f64> = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Target => 1.0,
                Node::Overflow => ov,
                _ => 0.0,
            })
            .collect();
        for _ in 0..iters {
            let next: Vec<f64> = self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| match n {
                    Node::Choice { owner, succ } => {
                        let it = succ.iter().map(|&(j, _)| v[j]);
                        if *owner == Owner::Box {
                            it.fold(0.0, f64::max)
                        } else {
                            it.fold(1.0, f64::min)
                        }
                    }
                    Node::Random { succ } => succ
                        .iter()
                        .map(|(j, w)| w.to_f64().unwrap_or(0.0) * v[*j])
                        .sum::<f64>()
                        .min(1.0),
                    _ => v[i],
                })
                .collect();
            debug_assert!(next.iter().zip(&v).all(|(a, b)| *a >= *b - 1e-12 && *a <= 1.0));
            v = next;
        }
        v
    }

    pub fn values_exact(&self, iters: usize, overflow: bool) -> Vec<BigRational> {
        let ov = if overflow {
            BigRational::one()
        } else {
            BigRational::zero()
        };
        let mut v: Vec<BigRational> = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Target => BigRational::one(),
                Node::Overflow => ov.clone(),
                _ => BigRational::zero(),
            })
            .collect();
        for _ in 0..iters {
            let next: Vec<BigRational> = self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| match n {
                    Node::Choice { owner, succ } => {
                        let it = succ.iter().map(|&(j, _)| &v[j]);
                        if *owner == Owner::Box {
                            it.max().cloned().unwrap_or_else(BigRational::zero)
                        } else {
                            it.min().cloned().unwrap_or_else(BigRational::zero)
                        }
                    }
                    Node::Random { succ } => succ.iter().fold(BigRational::zero(), |acc, (j, w)| acc + w * &v[*j]),
                    _ => v[i].clone(),
                })
                .collect();
            debug_assert!(next.iter().zip(&v).all(|(a, b)| a >= b && *a <= BigRational::one()));
            if next == v {
                break;
            }
            v = next;
        }
        v
    }

    /// Nodes whose value after `steps` sweeps (or in the limit) is positive,
    /// with overflow losing.
    ///
    /// Every weight is positive, so a node has a positive `i`-th iterate
    /// iff it lies in the `i`-step attractor computed here.
    pub fn positive(&self, steps: Option<usize>) -> Vec<bool> {
        let mut win: Vec<bool> = self.nodes.iter().map(|n| *n == Node::Target).collect();
        let mut round = 0;
        loop {
            if steps.is_some_and(|s| round >= s) {
                return win;
            }
            let next: Vec<bool> = self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| match n {
                    Node::Choice {
                        owner: Owner::Diamond,
                        succ,
                    } => succ.iter().all(|&(j, _)| win[j]),
                    Node::Choice { succ, .. } => succ.iter().any(|&(j, _)| win[j]),
                    Node::Random { succ } => succ.iter().any(|(j, _)| win[*j]),
                    _ => win[i],
                })
                .collect();
            if next == win {
                return win;
            }
            win = next;
            round += 1;
        }
    }

    /// Nodes from which □ reaches the goal (or overflow, when `overflow`
    /// wins) with probability one.
    ///
    /// In a finite game this is exactly where the limit value is 1.
    pub fn almost_sure(&self, overflow: bool) -> Vec<bool> {
        let goal = |i: usize| match self.nodes[i] {
            Node::Target => true,
            Node::Overflow => overflow,
            _ => false,
        };
        let mut y = vec![true; self.len()];
        loop {
            let mut z: Vec<bool> = (0..self.len()).map(goal).collect();
            loop {
                let next: Vec<bool> = (0..self.len())
                    .map(|i| {
                        z[i] || match &self.nodes[i] {
                            Node::Choice {
                                owner: Owner::Box,
                                succ,
                            } => succ.iter().any(|&(j, _)| y[j] && z[j]),
                            Node::Choice { succ, .. } => succ.iter().all(|&(j, _)| z[j]),
                            Node::Random { succ } => succ.iter().all(|(j, _)| y[*j]) && succ.iter().any(|(j, _)| z[*j]),
                            _ => false,
                        }
                    })
                    .collect();
                if next == z {
                    break;
                }
                z = next;
            }
            if z == y {
                return y;
            }
            y = z;
        }
    }

    /// A greedy per-configuration choice for `owner` against values `v`.
    pub fn greedy_policy(&self, game: &BpaGame, owner: Owner, v: &[f64]) -> Policy {
        let mut pick = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Choice { owner: o, succ } = n {
                if *o != owner {
                    continue;
                }
                let better = |a: f64, b: f64| if owner == Owner::Box { a > b } else { a < b };
                let mut best = succ[0];
                for &s in &succ[1..] {
                    if better(v[s.0], v[best.0]) {
                        best = s;
                    }
                }
                pick.insert(self.configs[i].clone(), best.1);
            }
        }
        Policy {
            owner,
            pick,
            fallback: SmdStrategy::first_rules(game, owner).pick,
        }
    }
}

/// A strategy given per configuration, for configurations of a truncated
/// arena; elsewhere the first rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Policy {
    pub owner: Owner,
    pub pick: BTreeMap<Config, usize>,
    pub fallback: BTreeMap<Sym, usize>,
}

impl Policy {
    pub fn decide(&self, config: &[Sym]) -> usize {
        self.pick
            .get(config)
            .copied()
            .unwrap_or_else(|| self.fallback[&config[0]])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Num {
    Float(f64),
    Exact(BigRational),
}

impl Num {
    pub fn to_f64(&self) -> f64 {
        match self {
            Num::Float(x) => *x,
            Num::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
        }
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Float(x) => write!(f, "{x:.6}"),
            Num::Exact(q) => f.write_str(&fmt_rational(q)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueBounds {
    /// Per start configuration: (lower, upper); absent sides were not asked for.
    pub per_config: BTreeMap<Config, (Option<Num>, Option<Num>)>,
    pub height: usize,
    pub iters: usize,
    pub mode: Mode,
}

impl ValueBounds {
    pub fn render(&self, game: &BpaGame) -> String {
        let mut out = String::new();
        for (c, (lo, hi)) in &self.per_config {
            let shown = if c.is_empty() {
                "eps".to_string()
            } else {
                game.fmt_config(c)
            };
            out.push_str(&format!("config={shown}"));
            if let Some(lo) = lo {
                out.push_str(&format!(" lower={lo}"));
            }
            if let Some(hi) = hi {
                out.push_str(&format!(" upper={hi}"));
            }
            out.push_str(&format!(
                " height={} iters={} mode={}\n",
                self.height,
                self.iters,
                self.mode.keyword()
            ));
        }
        out
    }
}

/// Settings for the truncated oracle.
#[derive(Clone, Copy, Debug)]
pub struct Truncation {
    pub height: usize,
    pub iters: usize,
    pub mode: Mode,
    pub exact: bool,
    pub goal: Goal,
    pub cap: usize,
}

pub fn truncated_value_iteration(game: &BpaGame, starts: &[Config], t: Truncation) -> Result<ValueBounds, PlayError> {
    fixed_value_iteration(game, starts, t, None, None)
}

/// Value iteration with optional fixed strategies.
pub fn fixed_value_iteration(
    game: &BpaGame,
    starts: &[Config],
    t: Truncation,
    sigma: Option<&RegularStrategy>,
    pi: Option<&RegularStrategy>,
) -> Result<ValueBounds, PlayError> {
    let arena = Arena::build(game, starts, t.height, t.goal, sigma, pi, t.cap)?;
    let side = |overflow: bool| -> Vec<Num> {
        if t.exact {
            arena
                .values_exact(t.iters, overflow)
                .into_iter()
                .map(Num::Exact)
                .collect()
        } else {
            arena
                .values_f64(t.iters, overflow)
                .into_iter()
                .map(Num::Float)
                .collect()
        }
    };
    let lower = (t.mode != Mode::Optimistic).then(|| side(false));
    let upper = (t.mode != Mode::Pessimistic).then(|| side(true));
    let per_config = starts
        .iter()
        .map(|s| {
            let i = arena.node_of(s).expect("starts are interned");
            (
                s.clone(),
                (
                    lower.as_ref().map(|v| v[i].clone()),
                    upper.as_ref().map(|v| v[i].clone()),
                ),
            )
        })
        .collect();
    Ok(ValueBounds {
        per_config,
        height: t.height,
        iters: t.iters,
        mode: t.mode,
    })
}

/// Best response of the free player against one fixed strategy.
pub fn best_response_search(
    game: &BpaGame,
    fixed: &RegularStrategy,
    starts: &[Config],
    t: Truncation,
) -> Result<(Policy, ValueBounds), PlayError> {
    let (sigma, pi) = match fixed.player {
        Owner::Box => (Some(fixed), None),
        _ => (None, Some(fixed)),
    };
    let free = match fixed.player {
        Owner::Box => Owner::Diamond,
        _ => Owner::Box,
    };
    let arena = Arena::build(game, starts, t.height, t.goal, sigma, pi, t.cap)?;
    let overflow = t.mode == Mode::Optimistic;
    let v = arena.values_f64(t.iters, overflow);
    let policy = arena.greedy_policy(game, free, &v);
    let bounds = fixed_value_iteration(game, starts, t, sigma, pi)?;
    Ok((policy, bounds))
}

/// Whether the optimistic truncated value against a fixed ◇ strategy is
/// below one, decided exactly on the finite arena.
pub fn optimistic_below_one(
    game: &BpaGame,
    pi: &RegularStrategy,
    start: &[Sym],
    height: usize,
    goal: Goal,
    cap: usize,
) -> Result<bool, PlayError> {
    let arena = Arena::build(game, &[start.to_vec()], height, goal, None, Some(pi), cap)?;
    let i = arena.node_of(start).unwrap();
    Ok(!arena.almost_sure(true)[i])
}

/// Shortest path to T with box and circle symbols free to take any rule,
/// ◇ fixed to `pi`, and every configuration of length at most `max_len`.
pub fn bounded_path_to_target(game: &BpaGame, start: &[Sym], pi: &SmdStrategy, max_len: usize) -> Option<usize> {
    let mut dist: HashMap<Config, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    if start.len() > max_len {
        return None;
    }
    dist.insert(start.to_vec(), 0);
    queue.push_back(start.to_vec());
    while let Some(c) = queue.pop_front() {
        let d = dist[&c];
        let Some(&x) = c.first() else { continue };
        if game.is_target(x) {
            return Some(d);
        }
        let rules: Vec<usize> = match game.owner(x) {
            Owner::Diamond => vec![pi.pick[&x]],
            _ => game.rules_of(x).to_vec(),
        };
        for r in rules {
            let next = game.apply(r, &c);
            if next.len() <= max_len && !dist.contains_key(&next) {
                dist.insert(next.clone(), d + 1);
                queue.push_back(next);
            }
        }
    }
    None
}
