//! Stackless and regular strategies.
//!
//! A regular strategy carries a memory automaton that reads the stack
//! below the top bottom-up; the decision at `Xα` is `choose(m, X)` where
//! `m` is the memory state after reading the reverse of `α`.

use std::collections::{BTreeMap, VecDeque};

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::game::{fmt_rational, parse_rational, BpaGame, Owner, Sym};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("strategy undefined for `{0}`")]
    Undefined(String),
    #[error("{0}")]
    Invalid(String),
}

/// Positive weights over rule indices of one symbol, summing to one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Distribution {
    pub support: Vec<(usize, BigRational)>,
}

impl Distribution {
    pub fn dirac(rule: usize) -> Distribution {
        Distribution {
            support: vec![(rule, BigRational::one())],
        }
    }

    pub fn uniform(rules: &[usize]) -> Distribution {
        let w = BigRational::new(1.into(), rules.len().into());
        Distribution {
            support: rules.iter().map(|&r| (r, w.clone())).collect(),
        }
    }

    pub fn is_valid_for(&self, game: &BpaGame, x: Sym) -> bool {
        !self.support.is_empty()
            && self
                .support
                .iter()
                .all(|(r, w)| game.rule(*r).lhs == x && *w > BigRational::zero())
            && self.support.iter().map(|(_, w)| w.clone()).sum::<BigRational>() == BigRational::one()
    }
}

/// One rule per owned symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmdStrategy {
    pub player: Owner,
    /// Symbol → rule index, for every symbol owned by `player`.
    pub pick: BTreeMap<Sym, usize>,
}

impl SmdStrategy {
    /// The strategy playing each symbol's first rule.
    pub fn first_rules(game: &BpaGame, player: Owner) -> SmdStrategy {
        SmdStrategy {
            player,
            pick: game
                .symbols_owned_by(player)
                .map(|x| (x, game.rules_of(x)[0]))
                .collect(),
        }
    }

    pub fn to_regular(&self, game: &BpaGame) -> RegularStrategy {
        RegularStrategy::build(
            game,
            self.player,
            (),
            |_, _| (),
            |_, x| (Distribution::dirac(self.pick[&x]), false),
        )
    }

    pub fn serialize(&self, game: &BpaGame) -> String {
        let mut out = format!("smd {}\n", self.player);
        for &r in self.pick.values() {
            out.push_str(&format!("pick {}\n", game.rule_text(r)));
        }
        out
    }
}

/// Enumerates every stackless strategy of `player` in lexicographic rule
/// order (the first symbol varies slowest).
pub fn all_smd(game: &BpaGame, player: Owner) -> impl Iterator<Item = SmdStrategy> + '_ {
    let syms: Vec<Sym> = game.symbols_owned_by(player).collect();
    let mut digits = vec![0usize; syms.len()];
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let s = SmdStrategy {
            player,
            pick: syms
                .iter()
                .zip(&digits)
                .map(|(&x, &d)| (x, game.rules_of(x)[d]))
                .collect(),
        };
        done = true;
        for k in (0..syms.len()).rev() {
            digits[k] += 1;
            if digits[k] < game.rules_of(syms[k]).len() {
                done = false;
                break;
            }
            digits[k] = 0;
        }
        Some(s)
    })
}

/// Number of stackless strategies of `player`, saturating at `u128::MAX`.
pub fn smd_count(game: &BpaGame, player: Owner) -> u128 {
    game.symbols_owned_by(player)
        .map(|x| game.rules_of(x).len() as u128)
        .fold(1u128, |a, b| a.saturating_mul(b))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularStrategy {
    pub player: Owner,
    pub initial: usize,
    /// `update[m][x]`.
    pub update: Vec<Vec<usize>>,
    /// `choose[m][x]`, present for every symbol owned by `player`.
    pub choose: Vec<Vec<Option<Distribution>>>,
    /// `outside[m][x]`: the choice is an arbitrary fallback because the
    /// configuration lies outside the region the strategy wins on.
    pub outside: Vec<Vec<bool>>,
}

impl RegularStrategy {
    /// Builds the reachable part of a strategy given abstract memory.
    ///
    /// Memory values are numbered in breadth-first order from `init`,
    /// symbols in alphabet order, so the result is deterministic.
    pub fn build<S, U, C>(game: &BpaGame, player: Owner, init: S, update: U, act: C) -> RegularStrategy
    where
        S: Ord + Clone,
        U: Fn(&S, Sym) -> S,
        C: Fn(&S, Sym) -> (Distribution, bool),
    {
        let mut ids: BTreeMap<S, usize> = BTreeMap::new();
        let mut states = vec![init.clone()];
        ids.insert(init, 0);
        let mut queue = VecDeque::from([0usize]);
        let mut upd: Vec<Vec<usize>> = Vec::new();
        while let Some(i) = queue.pop_front() {
            let mut row = Vec::with_capacity(game.len());
            for x in 0..game.len() {
                let next = update(&states[i], x);
                let id = match ids.get(&next) {
                    Some(&id) => id,
                    None => {
                        let id = states.len();
                        ids.insert(next.clone(), id);
                        states.push(next);
                        queue.push_back(id);
                        id
                    }
                };
                row.push(id);
            }
            if upd.len() <= i {
                upd.resize(i + 1, Vec::new());
            }
            upd[i] = row;
        }
        let mut choose = Vec::with_capacity(states.len());
        let mut outside = Vec::with_capacity(states.len());
        for s in &states {
            let mut crow = Vec::with_capacity(game.len());
            let mut orow = Vec::with_capacity(game.len());
            for x in 0..game.len() {
                if game.owner(x) == player {
                    let (d, out) = act(s, x);
                    debug_assert!(d.is_valid_for(game, x));
                    crow.push(Some(d));
                    orow.push(out);
                } else {
                    crow.push(None);
                    orow.push(false);
                }
            }
            choose.push(crow);
            outside.push(orow);
        }
        RegularStrategy {
            player,
            initial: 0,
            update: upd,
            choose,
            outside,
        }
    }

    /// Plays every rule of an owned symbol with equal probability.
    pub fn uniform(game: &BpaGame, player: Owner) -> RegularStrategy {
        RegularStrategy::build(
            game,
            player,
            (),
            |_, _| (),
            |_, x| (Distribution::uniform(game.rules_of(x)), false),
        )
    }

    pub fn num_memory(&self) -> usize {
        self.update.len()
    }

    /// Memory state after reading `below` bottom-up.
    pub fn memory(&self, below: &[Sym]) -> usize {
        below.iter().rev().fold(self.initial, |m, &x| self.update[m][x])
    }

    /// Decision at a non-empty configuration whose top `player` owns.
    pub fn decide(&self, config: &[Sym]) -> Option<&Distribution> {
        let (&x, below) = config.split_first()?;
        self.choose[self.memory(below)][x].as_ref()
    }

    pub fn is_outside(&self, config: &[Sym]) -> bool {
        match config.split_first() {
            Some((&x, below)) => self.outside[self.memory(below)][x],
            None => false,
        }
    }

    /// Checks totality and that every distribution fits its symbol.
    pub fn validate(&self, game: &BpaGame) -> Result<(), StrategyError> {
        let n = self.num_memory();
        if self.initial >= n || self.choose.len() != n || self.outside.len() != n {
            return Err(StrategyError::Invalid("memory tables disagree".into()));
        }
        for m in 0..n {
            if self.update[m].len() != game.len() || self.update[m].iter().any(|&k| k >= n) {
                return Err(StrategyError::Invalid(format!("update row m{m} is not total")));
            }
            for x in 0..game.len() {
                match (&self.choose[m][x], game.owner(x) == self.player) {
                    (Some(d), true) if d.is_valid_for(game, x) => {}
                    (None, false) => {}
                    _ => {
                        return Err(StrategyError::Invalid(format!(
                            "bad choice at m{m} {}",
                            game.sym_name(x)
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn serialize(&self, game: &BpaGame) -> String {
        let mut out = format!(
            "strategy {}\nmemory {}\ninitial m{}\n",
            self.player,
            self.num_memory(),
            self.initial
        );
        for (m, row) in self.update.iter().enumerate() {
            for (x, &k) in row.iter().enumerate() {
                out.push_str(&format!("update m{m} {} m{k}\n", game.sym_name(x)));
            }
        }
        for (m, row) in self.choose.iter().enumerate() {
            for (x, d) in row.iter().enumerate() {
                let Some(d) = d else { continue };
                let parts: Vec<String> = d
                    .support
                    .iter()
                    .map(|(r, w)| format!("{} @ {}", rhs_text(game, *r), fmt_rational(w)))
                    .collect();
                let flag = if self.outside[m][x] { " outside" } else { "" };
                out.push_str(&format!(
                    "choose m{m} {} = {}{flag}\n",
                    game.sym_name(x),
                    parts.join(" ; ")
                ));
            }
        }
        out
    }

    pub fn parse(text: &str, game: &BpaGame) -> Result<RegularStrategy, StrategyError> {
        let mut player = None;
        let mut n = None;
        let mut initial = None;
        let mut update: Vec<Vec<Option<usize>>> = Vec::new();
        let mut choose: Vec<Vec<Option<Distribution>>> = Vec::new();
        let mut outside: Vec<Vec<bool>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: &str| StrategyError::Syntax {
                line,
                msg: msg.to_string(),
            };
            let mem = |s: &str, n: usize| -> Result<usize, StrategyError> {
                s.strip_prefix('m')
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k < n)
                    .ok_or_else(|| err(&format!("bad memory state `{s}`")))
            };
            let sym = |s: &str| game.lookup(s).ok_or_else(|| err(&format!("unknown symbol `{s}`")));
            let words: Vec<&str> = content.split_whitespace().collect();
            match words[0] {
                "strategy" => {
                    player = Some(
                        words
                            .get(1)
                            .and_then(|w| Owner::from_keyword(w))
                            .ok_or_else(|| err("expected `strategy <box|diamond>`"))?,
                    )
                }
                "memory" => {
                    let k: usize = words
                        .get(1)
                        .and_then(|w| w.parse().ok())
                        .filter(|&k| k > 0)
                        .ok_or_else(|| err("expected `memory <n>`"))?;
                    n = Some(k);
                    update = vec![vec![None; game.len()]; k];
                    choose = vec![vec![None; game.len()]; k];
                    outside = vec![vec![false; game.len()]; k];
                }
                "initial" => {
                    let k = n.ok_or_else(|| err("`memory` must come first"))?;
                    initial = Some(mem(words.get(1).copied().unwrap_or(""), k)?);
                }
                "update" => {
                    let k = n.ok_or_else(|| err("`memory` must come first"))?;
                    if words.len() != 4 {
                        return Err(err("expected `update m<i> <symbol> m<j>`"));
                    }
                    let (a, x, b) = (mem(words[1], k)?, sym(words[2])?, mem(words[3], k)?);
                    update[a][x] = Some(b);
                }
                "choose" => {
                    let k = n.ok_or_else(|| err("`memory` must come first"))?;
                    let (head, body) = content
                        .split_once('=')
                        .ok_or_else(|| err("expected `choose m<i> <symbol> = ...`"))?;
                    let hw: Vec<&str> = head.split_whitespace().collect();
                    if hw.len() != 3 {
                        return Err(err("expected `choose m<i> <symbol> = ...`"));
                    }
                    let (m, x) = (mem(hw[1], k)?, sym(hw[2])?);
                    let mut body = body.trim();
                    if let Some(b) = body.strip_suffix("outside") {
                        outside[m][x] = true;
                        body = b.trim();
                    }
                    let mut support = Vec::new();
                    for part in body.split(';') {
                        let (rhs, w) = part.split_once('@').ok_or_else(|| err("expected `<rhs> @ <weight>`"))?;
                        let rhs: Vec<Sym> = match rhs.trim() {
                            "eps" => Vec::new(),
                            t => t.split_whitespace().map(sym).collect::<Result<_, _>>()?,
                        };
                        let r = game.find_rule(x, &rhs).ok_or_else(|| err("no such rule"))?;
                        let w = parse_rational(w).ok_or_else(|| err("bad weight"))?;
                        support.push((r, w));
                    }
                    choose[m][x] = Some(Distribution { support });
                }
                other => return Err(err(&format!("unknown directive `{other}`"))),
            }
        }
        let player = player.ok_or_else(|| StrategyError::Invalid("missing header".into()))?;
        let initial = initial.ok_or_else(|| StrategyError::Invalid("missing `initial`".into()))?;
        let update = update
            .into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| StrategyError::Invalid("update table is not total".into()))?;
        let s = RegularStrategy {
            player,
            initial,
            update,
            choose,
            outside,
        };
        s.validate(game)?;
        Ok(s)
    }
}

fn rhs_text(game: &BpaGame, r: usize) -> String {
    let rhs = &game.rule(r).rhs;
    if rhs.is_empty() {
        "eps".into()
    } else {
        rhs.iter().map(|&y| game.sym_name(y)).collect::<Vec<_>>().join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_game;

    fn game() -> BpaGame {
        parse_game(
            "symbol X box\nsymbol V diamond\nsymbol R circle\nrule X -> X\nrule X -> V R\n\
             rule V -> R\nrule V -> eps\nrule R -> R : 1\ntarget R\n",
        )
        .unwrap()
    }

    #[test]
    fn smd_enumeration_order() {
        let g = game();
        let all: Vec<SmdStrategy> = all_smd(&g, Owner::Box).collect();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].pick[&0], 0);
        assert_eq!(all[1].pick[&0], 1);
        assert_eq!(smd_count(&g, Owner::Diamond), 2);
    }

    #[test]
    fn regular_round_trip() {
        let g = game();
        // Memory: whether R occurs below the top.
        let s = RegularStrategy::build(
            &g,
            Owner::Box,
            false,
            |&seen, x| seen || x == 2,
            |&seen, x| {
                let rs = g.rules_of(x);
                (Distribution::dirac(if seen { rs[0] } else { rs[1] }), seen)
            },
        );
        s.validate(&g).unwrap();
        assert_eq!(s.num_memory(), 2);
        assert_eq!(s.decide(&[0]).unwrap().support[0].0, 1);
        assert_eq!(s.decide(&[0, 2]).unwrap().support[0].0, 0);
        assert!(s.is_outside(&[0, 2]));
        let text = s.serialize(&g);
        assert_eq!(RegularStrategy::parse(&text, &g).unwrap(), s);
    }

    #[test]
    fn uniform_weights() {
        let g = game();
        let u = RegularStrategy::uniform(&g, Owner::Diamond);
        let d = u.decide(&[1]).unwrap();
        assert_eq!(d.support.len(), 2);
        assert_eq!(d.support[0].1, BigRational::new(1.into(), 2.into()));
    }
}
