//! The `>0` and `=0` regions.
//!
//! `(A, B)` is the least fixed point of the one-step operator below; the
//! `>0` region for a simple target is `B*AΓ*` (plus `B*` when reaching the
//! empty stack also counts) and the `=0` region is its complement.

use crate::dfa::{Dfa, Objective, RegionAutomaton, RegionLabel, Shape, Variant};
use crate::game::{BpaGame, Owner, Sym, SymSet};
use crate::strategy::{Distribution, RegularStrategy, SmdStrategy};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetPairAB {
    pub a: SymSet,
    pub b: SymSet,
}

/// First Kleene round in which each symbol entered `A` (resp. `B`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriceIndex {
    pub i_a: Vec<Option<usize>>,
    pub i_b: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZeroSolution {
    pub ab: SetPairAB,
    pub index: PriceIndex,
    /// `(A_i, B_i)` for `i = 1..`, up to and including the fixed point.
    pub rounds: Vec<SetPairAB>,
}

/// `β ∈ B*AΓ*`, scanning from the top.
pub fn in_bstar_a(beta: &[Sym], a: &SymSet, b: &SymSet) -> bool {
    for x in beta {
        if a.contains(x) {
            return true;
        }
        if !b.contains(x) {
            return false;
        }
    }
    false
}

/// `β ∈ B*AΓ* ∪ B*`.
pub fn in_bstar_a_or_bstar(beta: &[Sym], a: &SymSet, b: &SymSet) -> bool {
    for x in beta {
        if a.contains(x) {
            return true;
        }
        if !b.contains(x) {
            return false;
        }
    }
    true
}

fn step(game: &BpaGame, cur: &SetPairAB) -> SetPairAB {
    let mut next = cur.clone();
    for x in 0..game.len() {
        if game.is_target(x) {
            next.a.insert(x);
            next.b.insert(x);
            continue;
        }
        let rhss = game.rules_of(x).iter().map(|&r| &game.rule(r).rhs);
        let (in_a, in_b): (Vec<bool>, Vec<bool>) = rhss
            .map(|rhs| {
                (
                    in_bstar_a(rhs, &cur.a, &cur.b),
                    in_bstar_a_or_bstar(rhs, &cur.a, &cur.b),
                )
            })
            .unzip();
        let (ok_a, ok_b) = match game.owner(x) {
            Owner::Diamond => (in_a.iter().all(|&v| v), in_b.iter().all(|&v| v)),
            _ => (in_a.iter().any(|&v| v), in_b.iter().any(|&v| v)),
        };
        if ok_a {
            next.a.insert(x);
        }
        if ok_b {
            next.b.insert(x);
        }
    }
    next
}

/// Kleene iteration from `(∅, ∅)`.
pub fn fixpoint_ab(game: &BpaGame) -> ZeroSolution {
    let n = game.len();
    let mut cur = SetPairAB {
        a: SymSet::new(),
        b: SymSet::new(),
    };
    let mut index = PriceIndex {
        i_a: vec![None; n],
        i_b: vec![None; n],
    };
    let mut rounds = Vec::new();
    for i in 1.. {
        let next = step(game, &cur);
        debug_assert!(cur.a.is_subset(&next.a) && cur.b.is_subset(&next.b));
        debug_assert!(next.a.is_subset(&next.b));
        for &x in next.a.difference(&cur.a) {
            index.i_a[x] = Some(i);
        }
        for &x in next.b.difference(&cur.b) {
            index.i_b[x] = Some(i);
        }
        let stable = next == cur;
        rounds.push(next.clone());
        cur = next;
        if stable {
            break;
        }
    }
    debug_assert!(rounds.len() <= 2 * n + 2);
    ZeroSolution { ab: cur, index, rounds }
}

fn names(game: &BpaGame) -> Vec<String> {
    game.symbols().iter().map(|s| s.name.clone()).collect()
}

pub fn region_pos(game: &BpaGame, sol: &ZeroSolution, variant: Variant) -> RegionAutomaton {
    let shape = match variant {
        Variant::T => Shape::StarHead,
        Variant::TEps => Shape::StarHeadOrStar,
    };
    Dfa::from_shape(
        shape,
        names(game),
        &sol.ab.b,
        &sol.ab.a,
        Some(RegionLabel {
            objective: Objective::Pos,
            variant,
            player: Owner::Box,
        }),
    )
}

pub fn region_zero(game: &BpaGame, sol: &ZeroSolution, variant: Variant) -> RegionAutomaton {
    let (b_minus_a, not_b) = zero_sets(game, &sol.ab);
    let shape = match variant {
        Variant::T => Shape::StarHeadOrStar,
        Variant::TEps => Shape::StarHead,
    };
    Dfa::from_shape(
        shape,
        names(game),
        &b_minus_a,
        &not_b,
        Some(RegionLabel {
            objective: Objective::Zero,
            variant,
            player: Owner::Diamond,
        }),
    )
}

/// `(B∖A, Γ∖B)`.
fn zero_sets(game: &BpaGame, ab: &SetPairAB) -> (SymSet, SymSet) {
    let b_minus_a = ab.b.difference(&ab.a).copied().collect();
    let not_b = (0..game.len()).filter(|x| !ab.b.contains(x)).collect();
    (b_minus_a, not_b)
}

/// Price arithmetic for the `>0` strategy.
#[derive(Clone, Debug)]
pub struct Pricer<'a> {
    sol: &'a ZeroSolution,
    /// Sentinel for "no prefix in `B*A`".
    pub inf: usize,
}

impl<'a> Pricer<'a> {
    pub fn new(game: &BpaGame, sol: &'a ZeroSolution) -> Pricer<'a> {
        Pricer {
            sol,
            inf: 2 * game.len() + 2,
        }
    }

    /// `price(Xβ)` from `price(β)`.
    pub fn push(&self, x: Sym, below: usize) -> usize {
        let via_a = self.sol.index.i_a[x].unwrap_or(self.inf);
        let via_b = match self.sol.index.i_b[x] {
            Some(ib) if below < self.inf => ib.max(below),
            _ => self.inf,
        };
        via_a.min(via_b)
    }

    pub fn price(&self, beta: &[Sym]) -> usize {
        beta.iter().rev().fold(self.inf, |p, &x| self.push(x, p))
    }

    /// First rule whose right-hand side is cheaper than `I_A(x)`.
    pub fn a_rule(&self, game: &BpaGame, x: Sym) -> Option<usize> {
        let ia = self.sol.index.i_a[x]?;
        game.rules_of(x)
            .iter()
            .copied()
            .find(|&r| self.price(&game.rule(r).rhs) < ia)
    }

    pub fn b_rule(&self, game: &BpaGame, x: Sym) -> Option<usize> {
        let ib = self.sol.index.i_b[x]?;
        game.rules_of(x).iter().copied().find(|&r| {
            let rhs = &game.rule(r).rhs;
            self.price(rhs) < ib || rhs.iter().all(|&y| self.sol.index.i_b[y].is_some_and(|j| j < ib))
        })
    }
}

/// The price-driven `>0` strategy for □.
///
/// Memory is the price of the stack below the top.
pub fn synth_sigma_pos(game: &BpaGame, sol: &ZeroSolution) -> RegularStrategy {
    let pricer = Pricer::new(game, sol);
    RegularStrategy::build(
        game,
        Owner::Box,
        pricer.inf,
        |&p, x| pricer.push(x, p),
        |&p, x| {
            let first = game.rules_of(x)[0];
            let price = pricer.push(x, p);
            if price >= pricer.inf {
                return (Distribution::dirac(first), true);
            }
            if game.is_target(x) {
                return (Distribution::dirac(first), false);
            }
            let pick = if sol.index.i_a[x] == Some(price) {
                pricer.a_rule(game, x)
            } else {
                pricer.b_rule(game, x)
            };
            match pick {
                Some(r) => (Distribution::dirac(r), false),
                None => (Distribution::dirac(first), true),
            }
        },
    )
}

/// The stackless `=0` strategy for ◇.
///
/// Under `T_eps` a symbol of `B∖A` prefers a rule that buries a `Γ∖B`
/// symbol; when it has none, the `T` choice is used, which still never
/// exposes the empty stack inside the `T_eps` region.
pub fn synth_pi_zero(game: &BpaGame, sol: &ZeroSolution, variant: Variant) -> SmdStrategy {
    let (b_minus_a, not_b) = zero_sets(game, &sol.ab);
    // β ∈ (B∖A)*(Γ∖B)Γ*
    let strict = |beta: &[Sym]| {
        for y in beta {
            if not_b.contains(y) {
                return true;
            }
            if !b_minus_a.contains(y) {
                return false;
            }
        }
        false
    };
    let loose = |beta: &[Sym]| strict(beta) || beta.iter().all(|y| b_minus_a.contains(y));
    let find = |x: Sym, ok: &dyn Fn(&[Sym]) -> bool| game.rules_of(x).iter().copied().find(|&r| ok(&game.rule(r).rhs));
    let pick = game
        .symbols_owned_by(Owner::Diamond)
        .map(|x| {
            let chosen = if b_minus_a.contains(&x) {
                match variant {
                    Variant::T => find(x, &loose),
                    Variant::TEps => find(x, &strict).or_else(|| find(x, &loose)),
                }
            } else if not_b.contains(&x) {
                find(x, &strict)
            } else {
                None
            };
            (x, chosen.unwrap_or(game.rules_of(x)[0]))
        })
        .collect();
    SmdStrategy {
        player: Owner::Diamond,
        pick,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_game;

    pub(crate) const FOUR_SYMBOLS: &str = "symbol X box\nsymbol Y circle\nsymbol Z circle\nsymbol R circle\n\
        rule X -> X\nrule X -> Y\nrule X -> Z\nrule Y -> Y : 1\nrule Z -> Y : 1/2\n\
        rule Z -> R : 1/2\nrule R -> R : 1\ntarget R\n";

    fn set(g: &BpaGame, names: &[&str]) -> SymSet {
        names.iter().map(|n| g.lookup(n).unwrap()).collect()
    }

    #[test]
    fn four_symbol_fixpoint() {
        let g = parse_game(FOUR_SYMBOLS).unwrap();
        let sol = fixpoint_ab(&g);
        assert_eq!(sol.ab.a, set(&g, &["X", "Z", "R"]));
        assert_eq!(sol.ab.b, set(&g, &["X", "Z", "R"]));
        assert_eq!(sol.index.i_a[g.lookup("R").unwrap()], Some(1));
        assert_eq!(sol.index.i_a[g.lookup("Z").unwrap()], Some(2));
        assert_eq!(sol.index.i_a[g.lookup("X").unwrap()], Some(3));
    }

    #[test]
    fn trivial_fixpoints() {
        let g = parse_game("symbol R circle\nrule R -> R : 1\ntarget R\n").unwrap();
        let sol = fixpoint_ab(&g);
        assert_eq!(sol.ab.a.len(), 1);
        assert_eq!(sol.rounds.len(), 2);
        let g = parse_game("symbol D circle\nrule D -> D : 1\n").unwrap();
        let sol = fixpoint_ab(&g);
        assert!(sol.ab.a.is_empty() && sol.ab.b.is_empty());
    }

    #[test]
    fn regions_on_small_words() {
        let g = parse_game(FOUR_SYMBOLS).unwrap();
        let sol = fixpoint_ab(&g);
        let pos = region_pos(&g, &sol, Variant::T);
        let zero = region_zero(&g, &sol, Variant::T);
        let c = |s: &str| g.parse_config(s).unwrap();
        assert!(pos.member(&c("Z Y")));
        assert!(!pos.member(&[]));
        assert!(region_pos(&g, &sol, Variant::TEps).member(&[]));
        assert!(zero.member(&c("Y")));
        assert!(zero.member(&[]));
        assert!(!region_zero(&g, &sol, Variant::TEps).member(&[]));
    }

    #[test]
    fn sigma_picks_the_a_rule() {
        let g = parse_game(FOUR_SYMBOLS).unwrap();
        let sol = fixpoint_ab(&g);
        let s = synth_sigma_pos(&g, &sol);
        let x = g.lookup("X").unwrap();
        let d = s.decide(&[x]).unwrap();
        assert_eq!(g.rule_text(d.support[0].0), "X -> Z");
        assert!(!s.is_outside(&[x]));
        let y = g.lookup("Y").unwrap();
        assert!(s.is_outside(&[x, y]) == !pos_member(&g, &sol, &[x, y]));
    }

    fn pos_member(g: &BpaGame, sol: &ZeroSolution, c: &[Sym]) -> bool {
        region_pos(g, sol, Variant::T).member(c)
    }

    #[test]
    fn pi_avoids_the_target() {
        let g = parse_game(
            "symbol V diamond\nsymbol R circle\nsymbol D circle\nrule V -> R\nrule V -> D\n\
             rule R -> R : 1\nrule D -> D : 1\ntarget R\n",
        )
        .unwrap();
        let sol = fixpoint_ab(&g);
        let pi = synth_pi_zero(&g, &sol, Variant::T);
        assert_eq!(g.rule_text(pi.pick[&0]), "V -> D");
        let pi = synth_pi_zero(&g, &sol, Variant::TEps);
        assert_eq!(g.rule_text(pi.pick[&0]), "V -> D");
        let four = parse_game(FOUR_SYMBOLS).unwrap();
        assert!(synth_pi_zero(&four, &fixpoint_ab(&four), Variant::T).pick.is_empty());
    }

    #[test]
    fn price_is_bottom_up() {
        let g = parse_game(FOUR_SYMBOLS).unwrap();
        let sol = fixpoint_ab(&g);
        let p = Pricer::new(&g, &sol);
        let c = |s: &str| g.parse_config(s).unwrap();
        assert_eq!(p.price(&c("X Z")), 3);
        assert_eq!(p.price(&c("Z X")), 2);
        assert_eq!(p.price(&c("Y Z")), p.inf);
        assert_eq!(p.price(&c("R")), 1);
    }
}
