//! Game transformations: target freezing, bottom marker, product with a
//! target automaton, special normal form, twins and the tilde extension.

use num_rational::BigRational;
use num_traits::One;

use crate::dfa::Dfa;
use crate::game::{BpaGame, Owner, Rule, Sym, SymSet, SymbolDecl};

/// Tracks how symbols of a transformed game relate to the original.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolMap {
    /// `forward[x]`: symbols derived from original symbol `x`.
    pub forward: Vec<Vec<Sym>>,
    /// `backward[y]`: the original symbol behind `y`, `None` if auxiliary.
    pub backward: Vec<Option<Sym>>,
}

impl SymbolMap {
    pub fn identity(n: usize) -> SymbolMap {
        SymbolMap {
            forward: (0..n).map(|x| vec![x]).collect(),
            backward: (0..n).map(Some).collect(),
        }
    }

    /// Map of `self` followed by `next`.
    pub fn then(&self, next: &SymbolMap) -> SymbolMap {
        SymbolMap {
            forward: self
                .forward
                .iter()
                .map(|ys| ys.iter().flat_map(|&y| next.forward[y].clone()).collect())
                .collect(),
            backward: next.backward.iter().map(|y| y.and_then(|y| self.backward[y])).collect(),
        }
    }
}

fn unit_prob(owner: Owner) -> Option<BigRational> {
    (owner == Owner::Circle).then(BigRational::one)
}

fn fresh_name(game_names: &[SymbolDecl], extra: &[SymbolDecl], candidate: String) -> String {
    let taken = |n: &str| game_names.iter().chain(extra).any(|d| d.name == n);
    if !taken(&candidate) {
        return candidate;
    }
    (2..)
        .map(|k| format!("{candidate}{k}"))
        .find(|n| !taken(n))
        .expect("unbounded")
}

/// Gives every target R the single rule R → R.
pub fn freeze_targets(game: &BpaGame) -> BpaGame {
    let mut rules: Vec<Rule> = Vec::new();
    let mut done = SymSet::new();
    for r in game.rules() {
        if game.is_target(r.lhs) {
            if done.insert(r.lhs) {
                rules.push(Rule {
                    lhs: r.lhs,
                    rhs: vec![r.lhs],
                    prob: unit_prob(game.owner(r.lhs)),
                });
            }
        } else {
            rules.push(r.clone());
        }
    }
    BpaGame::new(game.name(), game.symbols().to_vec(), rules, game.targets().clone())
        .expect("freezing keeps a valid game valid")
}

/// Appends a fresh circle symbol ⊥ with ⊥ → ⊥ : 1.
pub fn add_bottom_symbol(game: &BpaGame) -> (BpaGame, SymbolMap, Sym) {
    let mut symbols = game.symbols().to_vec();
    let bot = symbols.len();
    let name = fresh_name(&symbols, &[], "__bot".into());
    symbols.push(SymbolDecl {
        name,
        owner: Owner::Circle,
    });
    let mut rules = game.rules().to_vec();
    rules.push(Rule {
        lhs: bot,
        rhs: vec![bot],
        prob: Some(BigRational::one()),
    });
    let g =
        BpaGame::new(game.name(), symbols, rules, game.targets().clone()).expect("bottom symbol keeps the game valid");
    let mut map = SymbolMap::identity(game.len());
    map.backward.push(None);
    (g, map, bot)
}

/// Product of a game with an automaton recognising the reverse of a
/// regular target set.
///
/// Symbol `(X, q)` stands for X with the automaton in state `q` after
/// reading everything below X. Game symbols absent from the automaton's
/// alphabet (such as the bottom marker) leave the state unchanged. With
/// `prune`, only automaton states reachable from the initial state are
/// paired.
pub fn product_with_target_dfa(game: &BpaGame, dfa: &Dfa, prune: bool) -> (BpaGame, SymbolMap) {
    let letter: Vec<Option<usize>> = (0..game.len())
        .map(|x| dfa.alphabet.iter().position(|a| a == game.sym_name(x)))
        .collect();
    let step = |q: usize, x: Sym| match letter[x] {
        Some(a) => dfa.delta[q][a],
        None => q,
    };
    let mut live = vec![!prune; dfa.num_states()];
    if prune {
        let mut stack = vec![dfa.initial];
        live[dfa.initial] = true;
        while let Some(q) = stack.pop() {
            for x in 0..game.len() {
                let r = step(q, x);
                if !live[r] {
                    live[r] = true;
                    stack.push(r);
                }
            }
        }
    }
    let states: Vec<usize> = (0..dfa.num_states()).filter(|&q| live[q]).collect();
    let slot = |x: Sym, q: usize| x * states.len() + states.iter().position(|&s| s == q).unwrap();

    let mut symbols = Vec::new();
    let mut forward = vec![Vec::new(); game.len()];
    let mut backward = Vec::new();
    let mut targets = SymSet::new();
    for x in 0..game.len() {
        for &q in &states {
            let id = symbols.len();
            symbols.push(SymbolDecl {
                name: format!("{}@{}", game.sym_name(x), dfa.states[q]),
                owner: game.owner(x),
            });
            forward[x].push(id);
            backward.push(Some(x));
            if dfa.accepting[step(q, x)] {
                targets.insert(id);
            }
        }
    }
    let mut rules = Vec::new();
    for x in 0..game.len() {
        for &q in &states {
            for &i in game.rules_of(x) {
                let r = game.rule(i);
                let rhs = match r.rhs.as_slice() {
                    [] => vec![],
                    [y] => vec![slot(*y, q)],
                    [y, z] => vec![slot(*y, step(q, *z)), slot(*z, q)],
                    _ => unreachable!(),
                };
                rules.push(Rule {
                    lhs: slot(x, q),
                    rhs,
                    prob: r.prob.clone(),
                });
            }
        }
    }
    let g = BpaGame::new(game.name(), symbols, rules, targets).expect("product of a valid game is valid");
    (g, SymbolMap { forward, backward })
}

/// Lifts a configuration of the original game into the product.
pub fn lift_config(product: &BpaGame, map: &SymbolMap, dfa: &Dfa, original: &BpaGame, config: &[Sym]) -> Vec<Sym> {
    let mut out = vec![0; config.len()];
    let mut q = dfa.initial;
    for (pos, &x) in config.iter().enumerate().rev() {
        let name = format!("{}@{}", original.sym_name(x), dfa.states[q]);
        out[pos] = product
            .lookup(&name)
            .or_else(|| map.forward[x].first().copied())
            .expect("pruned products keep reachable states");
        if let Some(a) = dfa.alphabet.iter().position(|a| a == original.sym_name(x)) {
            q = dfa.delta[q][a];
        }
    }
    out
}

/// Classes of box symbols in special normal form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoxClass {
    /// Every rule has a one-symbol right-hand side.
    Unit,
    /// A single rule X → ε.
    Pop,
    /// A single rule X → YZ.
    Push,
}

pub fn box_class(game: &BpaGame, x: Sym) -> Option<BoxClass> {
    let rs = game.rules_of(x);
    if rs.iter().all(|&i| game.rule(i).rhs.len() == 1) {
        return Some(BoxClass::Unit);
    }
    if rs.len() == 1 {
        return match game.rule(rs[0]).rhs.len() {
            0 => Some(BoxClass::Pop),
            2 => Some(BoxClass::Push),
            _ => None,
        };
    }
    None
}

/// Checks the special normal form; the error names the first offender.
pub fn check_snf(game: &BpaGame) -> Result<(), String> {
    for &r in game.targets() {
        let rs = game.rules_of(r);
        if game.owner(r) != Owner::Circle || rs.len() != 1 || game.rule(rs[0]).rhs != [r] {
            return Err(format!("target {} is not a frozen circle", game.sym_name(r)));
        }
    }
    for x in 0..game.len() {
        match game.owner(x) {
            Owner::Box => {
                if box_class(game, x).is_none() {
                    return Err(format!("box symbol {} mixes rule shapes", game.sym_name(x)));
                }
            }
            _ => {
                if game.rules_of(x).iter().any(|&i| game.rule(i).rhs.len() != 1) {
                    return Err(format!("{} has a non-unit rule", game.sym_name(x)));
                }
            }
        }
    }
    Ok(())
}

/// Special normal form.
///
/// Targets become circle symbols with R → R : 1. Every rule X → α with
/// |α| ≠ 1 whose owner is not already a single-rule box symbol is relayed
/// through a fresh box symbol F (named `X__snf<k>`): X → F keeps the
/// rule's probability and F → α is F's only rule. Unit rules stay put.
pub fn to_snf(game: &BpaGame) -> (BpaGame, SymbolMap) {
    debug_assert!(game.is_frozen());
    let mut symbols = game.symbols().to_vec();
    for &r in game.targets() {
        symbols[r].owner = Owner::Circle;
    }
    let mut fresh: Vec<SymbolDecl> = Vec::new();
    let mut rules: Vec<Rule> = Vec::new();
    let mut relays: Vec<Rule> = Vec::new();
    for x in 0..game.len() {
        if game.is_target(x) {
            rules.push(Rule {
                lhs: x,
                rhs: vec![x],
                prob: Some(BigRational::one()),
            });
            continue;
        }
        let rs = game.rules_of(x);
        let single_box = game.owner(x) == Owner::Box && rs.len() == 1;
        let mut k = 0;
        for &i in rs {
            let r = game.rule(i);
            if r.rhs.len() == 1 || single_box {
                rules.push(r.clone());
                continue;
            }
            let f = game.len() + fresh.len();
            let name = fresh_name(&symbols, &fresh, format!("{}__snf{k}", game.sym_name(x)));
            k += 1;
            fresh.push(SymbolDecl {
                name,
                owner: Owner::Box,
            });
            rules.push(Rule {
                lhs: x,
                rhs: vec![f],
                prob: r.prob.clone(),
            });
            relays.push(Rule {
                lhs: f,
                rhs: r.rhs.clone(),
                prob: None,
            });
        }
    }
    let n_fresh = fresh.len();
    symbols.extend(fresh);
    rules.extend(relays);
    let g = BpaGame::new(game.name(), symbols, rules, game.targets().clone())
        .expect("normal form of a valid game is valid");
    let mut map = SymbolMap::identity(game.len());
    map.backward.extend(std::iter::repeat_n(None, n_fresh));
    (g, map)
}

/// Twin extension of an SNF game over Γ (symbols `0..n`).
///
/// Twins occupy indices `n..2n` in the same order, so the twin of `x < n`
/// is `x + n`. X → ε yields X′ → X′, X → Y yields X′ → Y′ and X → YZ
/// yields X′ → Y Z′. Targets become {R, R′}.
pub fn twin_extension(game: &BpaGame) -> (BpaGame, SymbolMap) {
    let n = game.len();
    let mut symbols = game.symbols().to_vec();
    let mut extra: Vec<SymbolDecl> = Vec::new();
    for s in game.symbols() {
        let name = fresh_name(&symbols, &extra, format!("{}'", s.name));
        extra.push(SymbolDecl { name, owner: s.owner });
    }
    symbols.extend(extra);
    let mut rules = game.rules().to_vec();
    for r in game.rules() {
        let x = r.lhs + n;
        let rhs = match r.rhs.as_slice() {
            [] => vec![x],
            [y] => vec![y + n],
            [y, z] => vec![*y, z + n],
            _ => unreachable!(),
        };
        rules.push(Rule {
            lhs: x,
            rhs,
            prob: r.prob.clone(),
        });
    }
    let targets = game.targets().iter().flat_map(|&r| [r, r + n]).collect();
    let g = BpaGame::new(game.name(), symbols, rules, targets).expect("twin extension of a valid game is valid");
    let map = SymbolMap {
        forward: (0..n).map(|x| vec![x, x + n]).collect(),
        backward: (0..2 * n).map(|y| Some(y % n)).collect(),
    };
    (g, map)
}

/// Adds circle symbols X̃ and Z with X̃ → X Z : 1 and Z → Z : 1.
///
/// X lies in the region where the minimizer keeps the probability of
/// reaching T below one iff X̃ lies in the region where it keeps the
/// probability of reaching T ∪ {ε} below one.
pub fn tilde_extension(game: &BpaGame, x: Sym) -> (BpaGame, Sym) {
    let mut symbols = game.symbols().to_vec();
    let xt = symbols.len();
    let z = xt + 1;
    let base = game.sym_name(x).to_string();
    let xt_name = fresh_name(&symbols, &[], format!("{base}__tilde"));
    symbols.push(SymbolDecl {
        name: xt_name,
        owner: Owner::Circle,
    });
    let z_name = fresh_name(&symbols, &[], format!("{base}__tilde_sink"));
    symbols.push(SymbolDecl {
        name: z_name,
        owner: Owner::Circle,
    });
    let mut rules = game.rules().to_vec();
    rules.push(Rule {
        lhs: xt,
        rhs: vec![x, z],
        prob: Some(BigRational::one()),
    });
    rules.push(Rule {
        lhs: z,
        rhs: vec![z],
        prob: Some(BigRational::one()),
    });
    let g = BpaGame::new(game.name(), symbols, rules, game.targets().clone())
        .expect("tilde extension keeps the game valid");
    (g, xt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_game;

    fn four_symbols() -> BpaGame {
        parse_game(
            "symbol X box\nsymbol Y circle\nsymbol Z circle\nsymbol R circle\n\
             rule X -> X\nrule X -> Y\nrule X -> Z\nrule Y -> Y : 1\n\
             rule Z -> Y : 1/2\nrule Z -> R : 1/2\nrule R -> R : 1\ntarget R\n",
        )
        .unwrap()
    }

    #[test]
    fn freezing() {
        let g = four_symbols();
        assert_eq!(freeze_targets(&g), g);
        let h = parse_game(
            "symbol R circle\nsymbol X box\nrule R -> eps : 1/2\nrule R -> R : 1/2\n\
             rule X -> R\ntarget R\n",
        )
        .unwrap();
        let f = freeze_targets(&h);
        assert_eq!(f.rules_of(0).len(), 1);
        assert_eq!(f.rule_text(f.rules_of(0)[0]), "R -> R : 1");
        assert_eq!(freeze_targets(&f), f);
        let none = parse_game("symbol X box\nrule X -> eps\n").unwrap();
        assert_eq!(freeze_targets(&none), none);
    }

    #[test]
    fn bottom_symbol() {
        let (g, map, bot) = add_bottom_symbol(&four_symbols());
        assert_eq!(g.len(), 5);
        assert_eq!(map.backward[bot], None);
        let (g2, _, bot2) = add_bottom_symbol(&g);
        assert_ne!(g2.sym_name(bot), g2.sym_name(bot2));
    }

    #[test]
    fn snf_of_box_with_pop_and_push() {
        let g = parse_game(
            "symbol X box\nsymbol Y box\nsymbol Z box\nrule X -> eps\nrule X -> Y Z\n\
             rule Y -> eps\nrule Z -> eps\n",
        )
        .unwrap();
        let (s, map) = to_snf(&g);
        check_snf(&s).unwrap();
        let texts: Vec<String> = (0..s.rules().len()).map(|i| s.rule_text(i)).collect();
        assert_eq!(
            texts,
            [
                "X -> X__snf0",
                "X -> X__snf1",
                "Y -> eps",
                "Z -> eps",
                "X__snf0 -> eps",
                "X__snf1 -> Y Z"
            ]
        );
        assert_eq!(box_class(&s, 3), Some(BoxClass::Pop));
        assert_eq!(box_class(&s, 4), Some(BoxClass::Push));
        assert_eq!(map.backward[3], None);
    }

    #[test]
    fn snf_of_circle() {
        let g = parse_game(
            "symbol Z circle\nsymbol Y box\nsymbol W box\nrule Z -> eps : 1/2\n\
             rule Z -> Y W : 1/2\nrule Y -> eps\nrule W -> eps\n",
        )
        .unwrap();
        let (s, _) = to_snf(&g);
        check_snf(&s).unwrap();
        assert_eq!(s.rule_text(0), "Z -> Z__snf0 : 1/2");
        assert_eq!(s.rule_text(1), "Z -> Z__snf1 : 1/2");
    }

    #[test]
    fn snf_is_idempotent_on_snf_games() {
        let g = four_symbols();
        let (s, map) = to_snf(&g);
        assert_eq!(s, g);
        assert_eq!(map, SymbolMap::identity(4));
    }

    #[test]
    fn twins() {
        let g = parse_game(
            "symbol E box\nsymbol P box\nsymbol Y box\nsymbol Z box\nrule E -> eps\n\
             rule P -> Y Z\nrule Y -> Y\nrule Z -> E\n",
        )
        .unwrap();
        let (t, map) = twin_extension(&g);
        assert_eq!(t.len(), 8);
        let texts: Vec<String> = (4..8).map(|i| t.rule_text(i)).collect();
        assert_eq!(texts, ["E' -> E'", "P' -> Y Z'", "Y' -> Y'", "Z' -> E'"]);
        for r in t.rules() {
            if r.lhs < 4 {
                assert!(r.rhs.iter().all(|&y| y < 4));
            }
        }
        assert_eq!(map.backward[5], Some(1));
    }

    #[test]
    fn tilde() {
        let (g, xt) = tilde_extension(&four_symbols(), 0);
        assert_eq!(g.rule_text(g.rules_of(xt)[0]), "X__tilde -> X X__tilde_sink : 1");
        assert_eq!(g.targets(), four_symbols().targets());
    }
}
