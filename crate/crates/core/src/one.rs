//! The `=1` / `<1` solver.
//!
//! Runs the cut-off loop on the twin extension of the special normal form:
//! repeatedly compute witnesses of the residual game, close them under the
//! attractor, and cut the attractor away. Twins of `x < n` sit at `x + n`.

use std::collections::BTreeMap;

use num_rational::BigRational;

use crate::dfa::{Dfa, Objective, RegionAutomaton, RegionLabel, Shape, Variant};
use crate::game::{BpaGame, Owner, Rule, Sym, SymSet};
use crate::strategy::{Distribution, RegularStrategy, SmdStrategy};
use crate::termination::{game_termination_sets, greatest_terminal_set, restrict_to_terminal, witnesses, TermError};
use crate::transform::{box_class, freeze_targets, to_snf, twin_extension, BoxClass, SymbolMap};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OneError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("the game has witnesses: {0}")]
    NonEmptyWitnessSet(String),
}

/// W◇(T_ε,<1), W□(T_ε,=1), W◇(T,<1) and W□(T,=1) restricted to single symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionQuadruple {
    pub a: SymSet,
    pub b: SymSet,
    pub c: SymSet,
    pub d: SymSet,
}

/// A residual game Θ over a subset of the twin game's symbols.
#[derive(Clone, Debug)]
pub struct Residual {
    pub alive: Vec<bool>,
    /// Current rules in twin-game symbols; rewritten push rules become units.
    pub rules: Vec<Rule>,
}

impl Residual {
    pub fn full(bar: &BpaGame) -> Residual {
        Residual {
            alive: vec![true; bar.len()],
            rules: bar.rules().to_vec(),
        }
    }

    pub fn alphabet(&self) -> SymSet {
        (0..self.alive.len()).filter(|&x| self.alive[x]).collect()
    }

    pub fn rules_of(&self, x: Sym) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(move |r| r.lhs == x)
    }

    /// The residual as a stand-alone game, with the twin symbol of each
    /// local symbol.
    pub fn to_game(&self, bar: &BpaGame) -> (BpaGame, Vec<Sym>) {
        let map: Vec<Sym> = self.alphabet().into_iter().collect();
        let mut back = vec![usize::MAX; bar.len()];
        for (i, &x) in map.iter().enumerate() {
            back[x] = i;
        }
        let symbols = map.iter().map(|&x| bar.symbols()[x].clone()).collect();
        let rules = self
            .rules
            .iter()
            .map(|r| Rule {
                lhs: back[r.lhs],
                rhs: r.rhs.iter().map(|&y| back[y]).collect(),
                prob: r.prob.clone(),
            })
            .collect();
        let targets = map
            .iter()
            .enumerate()
            .filter(|(_, &x)| bar.is_target(x))
            .map(|(i, _)| i)
            .collect();
        let g = BpaGame::new(bar.name(), symbols, rules, targets).expect("residual games stay total");
        (g, map)
    }
}

fn prime(n: usize, x: Sym) -> Sym {
    if x < n {
        x + n
    } else {
        x
    }
}

fn unprime(n: usize, x: Sym) -> Sym {
    x % n
}

/// Least fixed point of the attractor clauses, with the rule that pulled
/// each ◇ symbol outside `w` in.
pub fn attractor(bar: &BpaGame, theta: &Residual, w: &SymSet) -> (SymSet, BTreeMap<Sym, Vec<Sym>>) {
    let n = bar.len() / 2;
    let mut s = w.clone();
    let mut via = BTreeMap::new();
    loop {
        let mut grew = false;
        for x in theta.alphabet() {
            if s.contains(&x) {
                continue;
            }
            let into = |r: &Rule| r.rhs.len() == 1 && s.contains(&r.rhs[0]);
            let enters = match bar.owner(x) {
                Owner::Circle => theta.rules_of(x).any(into),
                Owner::Diamond => match theta.rules_of(x).find(|r| into(r)) {
                    Some(r) => {
                        via.insert(x, r.rhs.clone());
                        true
                    }
                    None => false,
                },
                Owner::Box => {
                    let rules: Vec<&Rule> = theta.rules_of(x).collect();
                    match rules.as_slice() {
                        [r] if r.rhs.len() == 2 => {
                            let (y, c) = (r.rhs[0], r.rhs[1]);
                            s.contains(&y) || (s.contains(&prime(n, y)) && s.contains(&c))
                        }
                        [r] if r.rhs.is_empty() => false,
                        rs => rs.iter().all(|r| into(r)),
                    }
                }
            };
            if enters {
                s.insert(x);
                grew = true;
            }
        }
        if !grew {
            return (s, via);
        }
    }
}

/// Removes `m` from the residual. Returns the removed box rules and the
/// rewritten push rules (old, new).
pub fn cut_off(bar: &BpaGame, theta: &mut Residual, m: &SymSet) -> (Vec<Rule>, Vec<(Rule, Rule)>) {
    let n = bar.len() / 2;
    let mut removed = Vec::new();
    let mut rewritten = Vec::new();
    let mut kept = Vec::new();
    for r in std::mem::take(&mut theta.rules) {
        if m.contains(&r.lhs) {
            continue;
        }
        match r.rhs.as_slice() {
            [y] if m.contains(y) => {
                debug_assert_eq!(bar.owner(r.lhs), Owner::Box);
                removed.push(r);
            }
            [y, c] if m.contains(c) => {
                let new = Rule {
                    lhs: r.lhs,
                    rhs: vec![prime(n, *y)],
                    prob: r.prob.clone(),
                };
                rewritten.push((r, new.clone()));
                kept.push(new);
            }
            _ => kept.push(r),
        }
    }
    theta.rules = kept;
    for &x in m {
        theta.alive[x] = false;
    }
    (removed, rewritten)
}

/// One round of the cut-off loop.
#[derive(Clone, Debug)]
pub struct Iteration {
    pub alphabet: SymSet,
    /// Greatest terminal set of the residual.
    pub terminal: SymSet,
    pub witnesses: SymSet,
    pub attractor: SymSet,
    /// ◇ choices on the attractor, as twin-game rule indices.
    pub pi: BTreeMap<Sym, usize>,
    pub removed: Vec<Rule>,
    pub rewritten: Vec<(Rule, Rule)>,
}

#[derive(Clone, Debug)]
pub struct MainTrace {
    pub iterations: Vec<Iteration>,
    pub final_w: SymSet,
    pub final_u: SymSet,
    /// First round (from 1) in which a symbol joined 𝒲 / 𝒰.
    pub i_w: Vec<Option<usize>>,
    pub i_u: Vec<Option<usize>>,
    /// π[𝒲_K] and π[𝒰_K] as twin-game rule indices.
    pub pi_w: BTreeMap<Sym, usize>,
    pub pi_u: BTreeMap<Sym, usize>,
    pub residual: Residual,
}

impl MainTrace {
    /// Text dump of the loop, one block per round.
    pub fn render(&self, bar: &BpaGame) -> String {
        let set = |s: &SymSet| {
            let v: Vec<&str> = s.iter().map(|&x| bar.sym_name(x)).collect();
            if v.is_empty() {
                "-".to_string()
            } else {
                v.join(" ")
            }
        };
        let rule = |r: &Rule| {
            let rhs = if r.rhs.is_empty() {
                "eps".to_string()
            } else {
                bar.fmt_config(&r.rhs)
            };
            format!("{} -> {}", bar.sym_name(r.lhs), rhs)
        };
        let mut out = String::new();
        for (i, it) in self.iterations.iter().enumerate() {
            out.push_str(&format!("iteration {}\n", i + 1));
            out.push_str(&format!("  alphabet {}\n", set(&it.alphabet)));
            out.push_str(&format!("  terminal {}\n", set(&it.terminal)));
            out.push_str(&format!("  witnesses {}\n", set(&it.witnesses)));
            out.push_str(&format!("  attractor {}\n", set(&it.attractor)));
            for (&x, &r) in &it.pi {
                out.push_str(&format!("  pick {} (for {})\n", bar.rule_text(r), bar.sym_name(x)));
            }
            for r in &it.removed {
                out.push_str(&format!("  removed {}\n", rule(r)));
            }
            for (old, new) in &it.rewritten {
                out.push_str(&format!("  rewritten {} => {}\n", rule(old), rule(new)));
            }
        }
        out.push_str(&format!("final W {}\n", set(&self.final_w)));
        out.push_str(&format!("final U {}\n", set(&self.final_u)));
        out
    }
}

/// Rule of `y` at the same position as rule `r` of the twin or original of `y`.
fn counterpart(bar: &BpaGame, r: usize, y: Sym) -> usize {
    let from = bar.rule(r).lhs;
    let pos = bar.rules_of(from).iter().position(|&i| i == r).unwrap();
    bar.rules_of(y)[pos]
}

pub fn main_loop(bar: &BpaGame, cap: u128) -> Result<MainTrace, TermError> {
    let n = bar.len() / 2;
    let mut theta = Residual::full(bar);
    let mut trace = MainTrace {
        iterations: Vec::new(),
        final_w: SymSet::new(),
        final_u: SymSet::new(),
        i_w: vec![None; bar.len()],
        i_u: vec![None; bar.len()],
        pi_w: BTreeMap::new(),
        pi_u: BTreeMap::new(),
        residual: theta.clone(),
    };
    loop {
        let (g, map) = theta.to_game(bar);
        let rep = witnesses(&g, cap)?;
        if rep.witnesses.is_empty() {
            break;
        }
        let w: SymSet = rep.witnesses.iter().map(|&x| map[x]).collect();
        let (m, via) = attractor(bar, &theta, &w);
        let mut pi = BTreeMap::new();
        for &x in &m {
            if bar.owner(x) != Owner::Diamond {
                continue;
            }
            let rhs: Vec<Sym> = match via.get(&x) {
                Some(rhs) => rhs.clone(),
                None => {
                    let local = map.iter().position(|&y| y == x).unwrap();
                    let r = g.rule(rep.punish.pick[&local]);
                    r.rhs.iter().map(|&y| map[y]).collect()
                }
            };
            pi.insert(x, bar.find_rule(x, &rhs).expect("◇ rules are never rewritten"));
        }
        let alphabet = theta.alphabet();
        let (removed, rewritten) = cut_off(bar, &mut theta, &m);
        let round = trace.iterations.len() + 1;
        for &x in &m {
            trace.final_w.insert(x);
            trace.i_w[x] = Some(round);
            if let Some(&r) = pi.get(&x) {
                trace.pi_w.insert(x, r);
            }
        }
        for &yp in m.iter().filter(|&&y| y >= n) {
            for y in [unprime(n, yp), yp] {
                if trace.final_u.insert(y) {
                    trace.i_u[y] = Some(round);
                    if let Some(&r) = pi.get(&yp) {
                        trace.pi_u.insert(y, counterpart(bar, r, y));
                    }
                }
            }
        }
        trace.iterations.push(Iteration {
            alphabet,
            terminal: rep.terminal.iter().map(|&x| map[x]).collect(),
            witnesses: w,
            attractor: m,
            pi,
            removed,
            rewritten,
        });
    }
    trace.residual = theta;
    Ok(trace)
}

/// Everything the `=1` solver derives from a game.
#[derive(Clone, Debug)]
pub struct OneSolution {
    /// The game with targets frozen; its symbols are the user's symbols.
    pub input: BpaGame,
    pub snf: BpaGame,
    pub bar: BpaGame,
    pub trace: MainTrace,
    pub quad: RegionQuadruple,
    /// Plan for the no-witness strategy on the final residual.
    pub plan: NoWitnessPlan,
}

pub fn solve_one(game: &BpaGame, cap: u128) -> Result<OneSolution, TermError> {
    let input = freeze_targets(game);
    let (snf, _) = to_snf(&input);
    let (bar, _): (BpaGame, SymbolMap) = twin_extension(&snf);
    let trace = main_loop(&bar, cap)?;
    let n_in = input.len();
    let gamma: SymSet = (0..n_in).collect();
    let a: SymSet = trace.final_w.iter().copied().filter(|&x| x < n_in).collect();
    let c: SymSet = trace.final_u.iter().copied().filter(|&x| x < n_in).collect();
    let quad = RegionQuadruple {
        b: gamma.difference(&a).copied().collect(),
        d: gamma.difference(&c).copied().collect(),
        a,
        c,
    };
    let plan = no_witness_plan(&bar, &trace.residual, cap)?;
    Ok(OneSolution {
        input,
        snf,
        bar,
        trace,
        quad,
        plan,
    })
}

fn names(game: &BpaGame) -> Vec<String> {
    game.symbols().iter().map(|s| s.name.clone()).collect()
}

/// Region automata `(=1 for □, <1 for ◇)` for the given variant.
pub fn regions_one(game: &BpaGame, quad: &RegionQuadruple, variant: Variant) -> (RegionAutomaton, RegionAutomaton) {
    let label = |objective, player| {
        Some(RegionLabel {
            objective,
            variant,
            player,
        })
    };
    let none = SymSet::new();
    match variant {
        Variant::T => (
            Dfa::from_shape(
                Shape::StarHead,
                names(game),
                &quad.b,
                &quad.d,
                label(Objective::One, Owner::Box),
            ),
            Dfa::from_shape(
                Shape::StarHeadOrStar,
                names(game),
                &quad.c,
                &quad.a,
                label(Objective::Less1, Owner::Diamond),
            ),
        ),
        Variant::TEps => (
            Dfa::from_shape(
                Shape::StarHeadOrStar,
                names(game),
                &quad.b,
                &none,
                label(Objective::One, Owner::Box),
            ),
            Dfa::from_shape(
                Shape::StarHead,
                names(game),
                &quad.b,
                &quad.a,
                label(Objective::Less1, Owner::Diamond),
            ),
        ),
    }
}

/// Data for the strategy that wins a witness-free game almost surely.
#[derive(Clone, Debug)]
pub struct NoWitnessPlan {
    /// Greatest terminal set of the residual.
    pub c: SymSet,
    /// σ_T on `c`: the right-hand side to play.
    pub sigma_t: BTreeMap<Sym, Vec<Sym>>,
    /// Residual rules per box symbol, as right-hand sides.
    pub choices: BTreeMap<Sym, Vec<Vec<Sym>>>,
    /// Run lengths above this play σ_T.
    pub threshold: usize,
}

impl NoWitnessPlan {
    pub fn push(&self, x: Sym, run: usize) -> usize {
        if self.c.contains(&x) {
            (run + 1).min(self.threshold + 1)
        } else {
            0
        }
    }

    /// Right-hand sides with weights at a box symbol whose C-run (including
    /// itself) is `run`.
    pub fn act(&self, x: Sym, run: usize) -> Vec<Vec<Sym>> {
        match self.sigma_t.get(&x) {
            Some(rhs) if run > self.threshold => vec![rhs.clone()],
            _ => self.choices[&x].clone(),
        }
    }
}

fn no_witness_plan(bar: &BpaGame, theta: &Residual, cap: u128) -> Result<NoWitnessPlan, TermError> {
    let (g, map) = theta.to_game(bar);
    let c_local = greatest_terminal_set(&g);
    let (gc, cmap) = restrict_to_terminal(&g, &c_local)?;
    let sets = game_termination_sets(&gc, cap)?;
    let sigma_t = sets
        .sigma_t
        .pick
        .iter()
        .map(|(&x, &r)| (map[cmap[x]], gc.rule(r).rhs.iter().map(|&y| map[cmap[y]]).collect()))
        .collect();
    let choices = g
        .symbols_owned_by(Owner::Box)
        .map(|x| {
            let rhss = g
                .rules_of(x)
                .iter()
                .map(|&r| g.rule(r).rhs.iter().map(|&y| map[y]).collect())
                .collect();
            (map[x], rhss)
        })
        .collect();
    Ok(NoWitnessPlan {
        c: c_local.iter().map(|&x| map[x]).collect(),
        sigma_t,
        choices,
        threshold: 2 * g.len(),
    })
}

fn dist_of(game: &BpaGame, x: Sym, rhss: &[Vec<Sym>]) -> Distribution {
    let rules: Vec<usize> = rhss
        .iter()
        .map(|rhs| game.find_rule(x, rhs).expect("plan rules exist"))
        .collect();
    Distribution::uniform(&rules)
}

/// The almost-surely winning □ strategy of a game without witnesses.
pub fn sigma_no_witness(game: &BpaGame, cap: u128) -> Result<RegularStrategy, OneError> {
    let rep = witnesses(game, cap)?;
    if !rep.witnesses.is_empty() {
        let names: Vec<&str> = rep.witnesses.iter().map(|&x| game.sym_name(x)).collect();
        return Err(OneError::NonEmptyWitnessSet(names.join(" ")));
    }
    let plan = no_witness_plan(game, &Residual::full(game), cap)?;
    Ok(RegularStrategy::build(
        game,
        Owner::Box,
        0usize,
        |&r, x| plan.push(x, r),
        |&r, x| (dist_of(game, x, &plan.act(x, plan.push(x, r))), false),
    ))
}

/// σ̂₀ on the twin game.
pub fn synth_sigma_one(sol: &OneSolution) -> RegularStrategy {
    let bar = &sol.bar;
    let n = bar.len() / 2;
    let in_b = |x: Sym| !sol.trace.final_w.contains(&x);
    let in_d = |x: Sym| !sol.trace.final_u.contains(&x);
    let plan = &sol.plan;
    type Mem = (bool, Option<usize>, Option<usize>);
    let update = |&(in_l, g, h): &Mem, y: Sym| -> Mem {
        let yp = prime(n, y);
        let g2 = if in_b(y) && in_l {
            g.map(|r| plan.push(y, r))
        } else if in_b(y) && in_b(yp) && !in_l {
            h.map(|r| plan.push(yp, r))
        } else {
            None
        };
        let h2 = if in_b(y) { g2 } else { h };
        (in_d(y) || (in_b(y) && in_l), g2, h2)
    };
    let act = |&(in_l, g, h): &Mem, x: Sym| -> (Distribution, bool) {
        let rules = bar.rules_of(x);
        let xp = prime(n, x);
        let image = if in_b(x) && in_l {
            g.map(|r| (x, r))
        } else if in_b(x) && in_b(xp) && !in_l {
            h.map(|r| (xp, r))
        } else {
            None
        };
        let Some((top, mem)) = image else {
            return (Distribution::dirac(rules[0]), true);
        };
        if box_class(bar, x) != Some(BoxClass::Unit) || rules.len() == 1 {
            return (Distribution::dirac(rules[0]), false);
        }
        let rhss: Vec<Vec<Sym>> = plan
            .act(top, plan.push(top, mem))
            .into_iter()
            .map(|rhs| {
                if top != x {
                    rhs.iter().map(|&y| unprime(n, y)).collect()
                } else {
                    rhs
                }
            })
            .collect();
        (dist_of(bar, x, &rhss), false)
    };
    RegularStrategy::build(bar, Owner::Box, (false, None, Some(0)), update, act)
}

/// The price-ordered ◇ strategy on the twin game.
pub fn synth_pi_less1(sol: &OneSolution) -> RegularStrategy {
    let bar = &sol.bar;
    let t = &sol.trace;
    let inf = t.iterations.len() + 1;
    let ia = |x: Sym| t.i_w[x].unwrap_or(inf);
    let ic = |x: Sym| t.i_u[x].unwrap_or(inf);
    let step = |&(pc, pca): &(usize, usize), y: Sym| {
        let in_c = t.final_u.contains(&y);
        let pc2 = if in_c { ic(y).max(pc) } else { inf };
        let pca2 = ia(y).min(if in_c { ic(y).max(pca) } else { inf });
        (pc2, pca2)
    };
    let act = |m: &(usize, usize), x: Sym| {
        let first = bar.rules_of(x)[0];
        let (pc, pca) = step(m, x);
        let price = pc.min(pca);
        if price >= inf {
            return (Distribution::dirac(first), true);
        }
        let pick = if t.final_w.contains(&x) && ia(x) <= price {
            t.pi_w.get(&x)
        } else {
            t.pi_u.get(&x)
        };
        match pick {
            Some(&r) => (Distribution::dirac(r), false),
            None => (Distribution::dirac(first), true),
        }
    };
    RegularStrategy::build(bar, Owner::Diamond, (0, inf), step, act)
}

/// Restricts a twin-game strategy to the user's symbols.
///
/// A rule X → F through a normal-form relay F maps back to X → (F's body).
pub fn project_to_input(sol: &OneSolution, s: &RegularStrategy) -> RegularStrategy {
    let input = &sol.input;
    let n_in = input.len();
    let map_rule = |r: usize| {
        let rule = sol.bar.rule(r);
        let rhs = match rule.rhs.as_slice() {
            [f] if *f >= n_in => sol.snf.rule(sol.snf.rules_of(*f)[0]).rhs.clone(),
            rhs => rhs.to_vec(),
        };
        input
            .find_rule(rule.lhs, &rhs)
            .expect("relayed rules come from the input")
    };
    RegularStrategy::build(
        input,
        s.player,
        s.initial,
        |&m, x| s.update[m][x],
        |&m, x| {
            if input.is_target(x) {
                return (Distribution::dirac(input.rules_of(x)[0]), false);
            }
            let d = s.choose[m][x].as_ref().expect("owned symbol");
            let mut support: Vec<(usize, BigRational)> = Vec::new();
            for (r, w) in &d.support {
                support.push((map_rule(*r), w.clone()));
            }
            (Distribution { support }, s.outside[m][x])
        },
    )
}

/// Convenience: the SMD part of a trace as a strategy on the twin game.
pub fn smd_from_picks(player: Owner, pick: &BTreeMap<Sym, usize>) -> SmdStrategy {
    SmdStrategy {
        player,
        pick: pick.clone(),
    }
}
