//! Qualitative termination: the greatest terminal set, almost-sure
//! termination of probabilistic BPA, game-level termination sets by
//! stackless strategy enumeration, and witnesses.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::dfa::Variant;
use crate::game::{BpaGame, Owner, Rule, Sym, SymSet};
use crate::linalg::{all_strictly_positive, identity, inverse, kernel, Matrix};
use crate::strategy::{all_smd, smd_count, SmdStrategy};
use crate::zero::{fixpoint_ab, region_zero, synth_pi_zero};

pub const DEFAULT_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TermError {
    #[error("strategy space too large: {size} stackless strategy pairs exceed the cap of {cap}")]
    StrategySpaceTooLarge { size: u128, cap: u128 },
    #[error("set is not terminal: {0}")]
    NotTerminal(String),
    #[error("symbol `{0}` is not stochastic")]
    NotAChain(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    /// Terminates with probability one.
    AsOne,
    /// Terminates with probability strictly between zero and one.
    LessOne,
    /// Never terminates.
    Zero,
}

/// Per symbol, its weighted right-hand sides.
type ChainRules<'a> = [Vec<(&'a [Sym], BigRational)>];

pub fn is_terminal(game: &BpaGame, m: &SymSet) -> Result<(), String> {
    let inside = |r: &Rule| r.rhs.iter().all(|y| m.contains(y));
    for &x in m {
        if game.is_target(x) {
            return Err(format!("{} is a target", game.sym_name(x)));
        }
        let mut rules = game.rules_of(x).iter().map(|&r| game.rule(r));
        let ok = match game.owner(x) {
            Owner::Diamond => rules.any(inside),
            _ => rules.all(inside),
        };
        if !ok {
            return Err(format!("{} can leave the set", game.sym_name(x)));
        }
    }
    Ok(())
}

pub fn greatest_terminal_set(game: &BpaGame) -> SymSet {
    let mut m: SymSet = (0..game.len()).filter(|&x| !game.is_target(x)).collect();
    loop {
        let bad: Vec<Sym> = m.iter().copied().filter(|&x| violates(game, &m, x)).collect();
        if bad.is_empty() {
            return m;
        }
        for x in bad {
            m.remove(&x);
        }
    }
}

fn violates(game: &BpaGame, m: &SymSet, x: Sym) -> bool {
    let inside = |&r: &usize| game.rule(r).rhs.iter().all(|y| m.contains(y));
    match game.owner(x) {
        Owner::Diamond => !game.rules_of(x).iter().any(inside),
        _ => !game.rules_of(x).iter().all(inside),
    }
}

/// The subgame on `c` with the rules staying inside `c*`.
///
/// Returns the game and, per new symbol, the symbol of `game` it came from.
pub fn restrict_to_terminal(game: &BpaGame, c: &SymSet) -> Result<(BpaGame, Vec<Sym>), TermError> {
    is_terminal(game, c).map_err(TermError::NotTerminal)?;
    let map: Vec<Sym> = c.iter().copied().collect();
    let mut back = vec![None; game.len()];
    for (i, &x) in map.iter().enumerate() {
        back[x] = Some(i);
    }
    let symbols = map.iter().map(|&x| game.symbols()[x].clone()).collect();
    let rules = game
        .rules()
        .iter()
        .filter(|r| back[r.lhs].is_some() && r.rhs.iter().all(|y| back[*y].is_some()))
        .map(|r| Rule {
            lhs: back[r.lhs].unwrap(),
            rhs: r.rhs.iter().map(|y| back[*y].unwrap()).collect(),
            prob: r.prob.clone(),
        })
        .collect();
    let g = BpaGame::new(game.name().to_string(), symbols, rules, SymSet::new())
        .expect("a terminal set induces a valid game");
    Ok((g, map))
}

/// Almost-sure termination verdicts of a game whose symbols are all stochastic.
pub fn pbpa_almost_sure_termination(chain: &BpaGame) -> Result<Vec<Verdict>, TermError> {
    let mut rules: Vec<Vec<(&[Sym], BigRational)>> = vec![Vec::new(); chain.len()];
    for r in chain.rules() {
        let p = r
            .prob
            .clone()
            .ok_or_else(|| TermError::NotAChain(chain.sym_name(r.lhs).to_string()))?;
        rules[r.lhs].push((&r.rhs, p));
    }
    Ok(chain_verdicts(&rules))
}

fn chain_verdicts(rules: &ChainRules) -> Vec<Verdict> {
    let n = rules.len();
    // Symbols that can reach the empty stack.
    let mut term = vec![false; n];
    loop {
        let mut changed = false;
        for x in 0..n {
            if !term[x] && rules[x].iter().any(|(rhs, _)| rhs.iter().all(|&y| term[y])) {
                term[x] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // Edges to the symbols that can become the top of the stack.
    let succ: Vec<Vec<Sym>> = (0..n)
        .map(|x| {
            let mut s: Vec<Sym> = Vec::new();
            for (rhs, _) in &rules[x] {
                if let Some(&y) = rhs.first() {
                    s.push(y);
                    if term[y] {
                        s.extend(rhs.get(1));
                    }
                }
            }
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect();
    let mut verdict: Vec<Option<Verdict>> = term.iter().map(|&t| (!t).then_some(Verdict::Zero)).collect();
    for x in 0..n {
        if verdict[x].is_none() && reaches(&succ, x, |y| !term[y]) {
            verdict[x] = Some(Verdict::LessOne);
        }
    }
    for scc in tarjan(&succ) {
        if scc.iter().any(|&x| verdict[x].is_some()) {
            continue;
        }
        let lower_bad = scc.iter().any(|&x| {
            succ[x]
                .iter()
                .any(|&y| !scc.contains(&y) && verdict[y] != Some(Verdict::AsOne))
        });
        let v = if !lower_bad && subcritical_or_critical(rules, &scc) {
            Verdict::AsOne
        } else {
            Verdict::LessOne
        };
        for &x in &scc {
            verdict[x] = Some(v);
        }
    }
    verdict.into_iter().map(|v| v.expect("every SCC is decided")).collect()
}

fn reaches(succ: &[Vec<Sym>], from: Sym, goal: impl Fn(Sym) -> bool) -> bool {
    let mut seen = vec![false; succ.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(x) = stack.pop() {
        if goal(x) {
            return true;
        }
        for &y in &succ[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    false
}

/// Spectral radius of the mean matrix is at most one.
///
/// Every member can terminate, so the component is not singular and the
/// branching-process extinction criterion applies.
fn subcritical_or_critical(rules: &ChainRules, scc: &[Sym]) -> bool {
    let k = scc.len();
    let pos = |y: Sym| scc.iter().position(|&z| z == y);
    let mut b: Matrix = vec![vec![BigRational::zero(); k]; k];
    for (i, &x) in scc.iter().enumerate() {
        for (rhs, p) in &rules[x] {
            for &y in rhs.iter() {
                if let Some(j) = pos(y) {
                    b[i][j] += p;
                }
            }
        }
    }
    let mut m = identity(k);
    for i in 0..k {
        for j in 0..k {
            m[i][j] -= &b[i][j];
        }
    }
    match inverse(&m) {
        // ρ < 1 exactly when (I - B)^-1 = Σ B^k converges, i.e. is nonnegative.
        Some(inv) => inv.iter().flatten().all(|v| !v.is_negative()),
        // 1 is an eigenvalue; it is the Perron root iff its eigenvector is positive.
        None => {
            let ker = kernel(&m);
            if ker.len() != 1 {
                return false;
            }
            let v = &ker[0];
            let neg: Vec<BigRational> = v.iter().map(|c| -c).collect();
            all_strictly_positive(v) || all_strictly_positive(&neg)
        }
    }
}

/// Strongly connected components, successors before predecessors.
fn tarjan(succ: &[Vec<Sym>]) -> Vec<Vec<Sym>> {
    struct State<'a> {
        succ: &'a [Vec<Sym>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<Sym>,
        next: usize,
        out: Vec<Vec<Sym>>,
    }
    fn visit(s: &mut State, v: Sym) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for i in 0..s.succ[v].len() {
            let w = s.succ[v][i];
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = s.stack.pop().unwrap();
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            s.out.push(comp);
        }
    }
    let n = succ.len();
    let mut s = State {
        succ,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

/// Termination sets of a game, with strategies realising them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminationSets {
    /// Symbols from which □ can force termination with probability one.
    pub as_one: SymSet,
    pub less_one: SymSet,
    pub sigma_t: SmdStrategy,
    pub pi_prime: SmdStrategy,
}

fn fixed_chain<'a>(game: &'a BpaGame, sigma: &SmdStrategy, pi: &SmdStrategy) -> Vec<Vec<(&'a [Sym], BigRational)>> {
    (0..game.len())
        .map(|x| match game.owner(x) {
            Owner::Circle => game
                .rules_of(x)
                .iter()
                .map(|&r| {
                    let rule = game.rule(r);
                    (rule.rhs.as_slice(), rule.prob.clone().unwrap())
                })
                .collect(),
            owner => {
                let s = if owner == Owner::Box { sigma } else { pi };
                vec![(game.rule(s.pick[&x]).rhs.as_slice(), BigRational::one())]
            }
        })
        .collect()
}

/// Decides termination under a fixed pair of stackless strategies.
pub fn pair_verdicts(game: &BpaGame, sigma: &SmdStrategy, pi: &SmdStrategy) -> Vec<Verdict> {
    chain_verdicts(&fixed_chain(game, sigma, pi))
}

pub fn game_termination_sets(game: &BpaGame, cap: u128) -> Result<TerminationSets, TermError> {
    let n_sigma = smd_count(game, Owner::Box);
    let n_pi = smd_count(game, Owner::Diamond);
    let size = n_sigma.saturating_mul(n_pi);
    if size > cap {
        return Err(TermError::StrategySpaceTooLarge { size, cap });
    }
    let sigmas: Vec<SmdStrategy> = all_smd(game, Owner::Box).collect();
    let pis: Vec<SmdStrategy> = all_smd(game, Owner::Diamond).collect();
    let all: SymSet = (0..game.len()).collect();
    // Per σ: symbols terminating almost surely against every π.
    let mut s_sigma: Vec<SymSet> = Vec::with_capacity(sigmas.len());
    // Per π: symbols failing to terminate almost surely against every σ.
    let mut l_pi: Vec<SymSet> = vec![all.clone(); pis.len()];
    for sigma in &sigmas {
        let mut s = all.clone();
        for (j, pi) in pis.iter().enumerate() {
            let v = pair_verdicts(game, sigma, pi);
            s.retain(|&x| v[x] == Verdict::AsOne);
            l_pi[j].retain(|&x| v[x] != Verdict::AsOne);
        }
        s_sigma.push(s);
    }
    let as_one: SymSet = s_sigma.iter().flatten().copied().collect();
    let less_one: SymSet = all.difference(&as_one).copied().collect();
    let best = |sets: &[SymSet], want: &SymSet| {
        sets.iter()
            .position(|s| want.is_subset(s))
            .or_else(|| {
                let max = sets.iter().map(SymSet::len).max()?;
                sets.iter().position(|s| s.len() == max)
            })
            .unwrap_or(0)
    };
    let sigma_t = sigmas[best(&s_sigma, &as_one)].clone();
    let pi_prime = pis[best(&l_pi, &less_one)].clone();
    Ok(TerminationSets {
        as_one,
        less_one,
        sigma_t,
        pi_prime,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessReport {
    pub witnesses: SymSet,
    /// Symbols in the `=0` region of `T_eps`.
    pub type1: SymSet,
    /// Terminal symbols that ◇ can keep from terminating almost surely.
    pub type2: SymSet,
    pub punish: SmdStrategy,
    pub terminal: SymSet,
    /// Termination sets of the terminal subgame, in `game`'s symbols.
    pub as_one: SymSet,
    pub less_one: SymSet,
}

pub fn witnesses(game: &BpaGame, cap: u128) -> Result<WitnessReport, TermError> {
    let sol = fixpoint_ab(game);
    let zero_eps = region_zero(game, &sol, Variant::TEps);
    let type1: SymSet = (0..game.len()).filter(|&x| zero_eps.member(&[x])).collect();
    let terminal = greatest_terminal_set(game);
    let (gc, map) = restrict_to_terminal(game, &terminal)?;
    let sets = game_termination_sets(&gc, cap)?;
    let lift = |s: &SymSet| s.iter().map(|&x| map[x]).collect::<SymSet>();
    let type2 = lift(&sets.less_one);
    let pi_dd = synth_pi_zero(game, &sol, Variant::TEps);
    let from_c = |x: Sym| {
        let local = map.iter().position(|&y| y == x).unwrap();
        let rhs: Vec<Sym> = gc
            .rule(sets.pi_prime.pick[&local])
            .rhs
            .iter()
            .map(|&y| map[y])
            .collect();
        game.find_rule(x, &rhs).expect("restricted rules exist in the parent")
    };
    let pick = game
        .symbols_owned_by(Owner::Diamond)
        .map(|x| {
            let r = if type2.contains(&x) {
                from_c(x)
            } else if type1.contains(&x) {
                pi_dd.pick[&x]
            } else if terminal.contains(&x) {
                from_c(x)
            } else {
                pi_dd.pick[&x]
            };
            (x, r)
        })
        .collect();
    Ok(WitnessReport {
        witnesses: type1.union(&type2).copied().collect(),
        type1,
        type2,
        punish: SmdStrategy {
            player: Owner::Diamond,
            pick,
        },
        terminal,
        as_one: lift(&sets.as_one),
        less_one: lift(&sets.less_one),
    })
}
