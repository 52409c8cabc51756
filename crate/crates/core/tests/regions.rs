mod common;

use proptest::prelude::*;

use stochbpa::dfa::{Dfa, Objective, Shape, Variant};
use stochbpa::game::{BpaGame, Sym, SymSet};
use stochbpa::gen::{corpus_game, GenParams};
use stochbpa::one::solve_one;
use stochbpa::pipeline::solve;
use stochbpa::termination::DEFAULT_CAP;
use stochbpa::transform::tilde_extension;
use stochbpa::zero::fixpoint_ab;

/// Top-down reading of the two region shapes.
fn scan(shape: Shape, star: &SymSet, head: &SymSet, config: &[Sym]) -> bool {
    for x in config {
        if head.contains(x) {
            return true;
        }
        if !star.contains(x) {
            return false;
        }
    }
    shape == Shape::StarHeadOrStar
}

fn sym_set(bits: u8, n: usize) -> SymSet {
    (0..n).filter(|i| bits >> i & 1 == 1).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shapes_match_the_scan(star in any::<u8>(), head in any::<u8>(), or_star in any::<bool>()) {
        let n = 3;
        let (star, head) = (sym_set(star, n), sym_set(head, n));
        let shape = if or_star { Shape::StarHeadOrStar } else { Shape::StarHead };
        let names = vec!["a".into(), "b".into(), "c".into()];
        let d = Dfa::from_shape(shape, names, &star, &head, None);
        for c in common::configs(n, 5) {
            prop_assert_eq!(d.member(&c), scan(shape, &star, &head, &c));
        }
    }

    #[test]
    fn regions_partition(seed in any::<u64>(), eps in any::<bool>()) {
        let g = corpus_game(seed, 0, GenParams::default());
        let variant = if eps { Variant::TEps } else { Variant::T };
        let s = |o| solve(&g, None, o, variant, DEFAULT_CAP).unwrap();
        for (a, b) in [(Objective::Pos, Objective::Zero), (Objective::One, Objective::Less1)] {
            let (a, b) = (s(a), s(b));
            prop_assert!(a.region.complement().equal(&b.region).unwrap());
            for c in common::configs(g.len(), 4) {
                prop_assert_ne!(a.member(&c), b.member(&c));
                prop_assert_eq!(a.region.member(&c), a.member(&c));
            }
        }
    }

    #[test]
    fn one_within_pos_and_zero_within_less1(seed in any::<u64>()) {
        let g = corpus_game(seed, 0, GenParams::default());
        let sol = solve_one(&g, DEFAULT_CAP).unwrap();
        let ab = fixpoint_ab(&g).ab;
        prop_assert!(sol.quad.d.is_subset(&ab.a));
        let zero: SymSet = (0..g.len()).filter(|x| !ab.a.contains(x)).collect();
        prop_assert!(zero.is_subset(&sol.quad.c));
        prop_assert!(sol.quad.a.is_subset(&sol.quad.c));
    }

    #[test]
    fn twins_of_losing_symbols_lose(seed in any::<u64>()) {
        let g = corpus_game(seed, 0, GenParams::default());
        let sol = solve_one(&g, DEFAULT_CAP).unwrap();
        let n = sol.bar.len() / 2;
        for &x in sol.trace.final_w.iter().filter(|&&x| x < n) {
            prop_assert!(sol.trace.final_u.contains(&(x + n)));
        }
        prop_assert!(sol.trace.iterations.len() <= sol.bar.len());
        for w in sol.trace.iterations.windows(2) {
            prop_assert!(w[1].alphabet.len() < w[0].alphabet.len());
        }
    }

    #[test]
    fn losing_sets_agree_with_the_tilde_game(seed in any::<u64>()) {
        let g = corpus_game(seed, 0, GenParams::default());
        let sol = solve_one(&g, DEFAULT_CAP).unwrap();
        for x in 0..g.len() {
            let (ext, xt) = tilde_extension(&g, x);
            let ext_sol = solve_one(&ext, DEFAULT_CAP).unwrap();
            prop_assert_eq!(ext_sol.quad.a.contains(&xt), sol.quad.c.contains(&x));
        }
    }

    #[test]
    fn simple_targets_as_automata(seed in any::<u64>(), o in 0usize..4) {
        let g = corpus_game(seed, 0, GenParams::default());
        let objective = [Objective::Pos, Objective::Zero, Objective::One, Objective::Less1][o];
        let dfa = top_in_targets(&g);
        let plain = solve(&g, None, objective, Variant::T, DEFAULT_CAP).unwrap();
        let regular = solve(&g, Some(&dfa), objective, Variant::T, DEFAULT_CAP).unwrap();
        for c in common::configs(g.len(), 3) {
            prop_assert_eq!(plain.member(&c), regular.member(&c), "{:?}", c);
        }
    }
}

/// Automaton for "the top symbol is a target", read bottom-up.
fn top_in_targets(g: &BpaGame) -> Dfa {
    let names: Vec<String> = g.symbols().iter().map(|d| d.name.clone()).collect();
    let delta = (0..2)
        .map(|_| (0..g.len()).map(|x| usize::from(g.is_target(x))).collect())
        .collect();
    Dfa {
        alphabet: names,
        states: vec!["n".into(), "t".into()],
        initial: 0,
        accepting: vec![false, true],
        delta,
        label: None,
    }
}

#[test]
fn golden_regions_of_the_four_symbol_game() {
    let g = common::game(common::FOUR_SYMBOLS);
    let names = |s: &SymSet| s.iter().map(|&x| g.sym_name(x).to_string()).collect::<Vec<_>>();
    let sol = solve_one(&g, DEFAULT_CAP).unwrap();
    assert_eq!(names(&sol.quad.a), ["X", "Y", "Z"]);
    assert_eq!(names(&sol.quad.c), ["X", "Y", "Z"]);
    let pos = solve(&g, None, Objective::Pos, Variant::T, DEFAULT_CAP).unwrap();
    let y = g.lookup("Y").unwrap();
    let x = g.lookup("X").unwrap();
    assert!(!pos.member(&[y, x]));
    assert!(pos.member(&[x, y]));
}

#[test]
fn golden_regions_of_the_pushing_game() {
    let g = common::game(common::PUSHING);
    let one = solve(&g, None, Objective::One, Variant::T, DEFAULT_CAP).unwrap();
    let names: Vec<&str> = one.single_symbol_members().iter().map(|&x| g.sym_name(x)).collect();
    assert_eq!(names, ["X", "Z", "R"]);
    let less = solve(&g, None, Objective::Less1, Variant::T, DEFAULT_CAP).unwrap();
    assert!(less.member(&[]) && !one.member(&[]));
}
