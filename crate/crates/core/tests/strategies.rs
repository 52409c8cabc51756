mod common;

use proptest::prelude::*;

use stochbpa::dfa::{Objective, Variant};
use stochbpa::game::Owner;
use stochbpa::gen::{corpus_game, GenParams};
use stochbpa::one::{sigma_no_witness, solve_one};
use stochbpa::pipeline::solve;
use stochbpa::play::{simulate, Arena, Goal, Players};
use stochbpa::strategy::{all_smd, RegularStrategy};
use stochbpa::termination::DEFAULT_CAP;

const HEIGHTS: [usize; 4] = [2, 4, 8, 12];
const STATES: usize = 500_000;

fn goal(v: Variant) -> Goal {
    match v {
        Variant::T => Goal::T,
        Variant::TEps => Goal::TEps,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// On a truncated arena, ◇ avoiding T and overflow with positive
    /// probability against σ would be a real counterexample.
    #[test]
    fn one_strategy_survives_attack(seed in any::<u64>(), eps in any::<bool>()) {
        let g = corpus_game(seed, 0, GenParams::default());
        let v = if eps { Variant::TEps } else { Variant::T };
        let s = solve(&g, None, Objective::One, v, DEFAULT_CAP).unwrap();
        let ig = &s.pipeline.internal;
        for x in s.single_symbol_members() {
            let start = s.pipeline.lift(&[x]);
            for h in HEIGHTS {
                let a = Arena::build(ig, std::slice::from_ref(&start), h + 1, Goal::T, Some(&s.internal_strategy), None, STATES).unwrap();
                prop_assert!(a.almost_sure(true)[a.node_of(&start).unwrap()], "{} at height {}", g.sym_name(x), h);
            }
        }
    }

    #[test]
    fn less1_strategy_survives_attack(seed in any::<u64>(), eps in any::<bool>()) {
        let g = corpus_game(seed, 0, GenParams::default());
        let v = if eps { Variant::TEps } else { Variant::T };
        let s = solve(&g, None, Objective::Less1, v, DEFAULT_CAP).unwrap();
        let ig = &s.pipeline.internal;
        for x in s.single_symbol_members() {
            let start = s.pipeline.lift(&[x]);
            for h in HEIGHTS {
                let a = Arena::build(ig, std::slice::from_ref(&start), h + 1, Goal::T, None, Some(&s.internal_strategy), STATES).unwrap();
                prop_assert!(!a.almost_sure(false)[a.node_of(&start).unwrap()]);
            }
        }
    }

    #[test]
    fn zero_strategy_survives_attack(seed in any::<u64>(), eps in any::<bool>()) {
        let g = corpus_game(seed, 0, GenParams::default());
        let v = if eps { Variant::TEps } else { Variant::T };
        let s = solve(&g, None, Objective::Zero, v, DEFAULT_CAP).unwrap();
        let ig = &s.pipeline.internal;
        for x in s.single_symbol_members() {
            let a = Arena::build(ig, &[vec![x]], 12, goal(v), None, Some(&s.internal_strategy), STATES).unwrap();
            prop_assert!(!a.positive(None)[a.node_of(&[x]).unwrap()]);
        }
    }

    #[test]
    fn pos_strategy_reaches_with_positive_probability(seed in any::<u64>()) {
        let g = corpus_game(seed, 0, GenParams::default());
        let s = solve(&g, None, Objective::Pos, Variant::T, DEFAULT_CAP).unwrap();
        let ig = &s.pipeline.internal;
        for x in s.single_symbol_members() {
            let a = Arena::build(ig, &[vec![x]], 2 * g.len() + 2, Goal::T, Some(&s.internal_strategy), None, STATES).unwrap();
            prop_assert!(a.positive(None)[a.node_of(&[x]).unwrap()]);
        }
    }
}

#[test]
fn pushing_game_strategy_reaches_the_target() {
    let g = common::game(common::PUSHING);
    let s = solve(&g, None, Objective::One, Variant::T, DEFAULT_CAP).unwrap();
    let pi = RegularStrategy::uniform(&s.pipeline.internal, Owner::Diamond);
    let players = Players {
        sigma: &s.internal_strategy,
        pi: &pi,
    };
    let x = g.lookup("X").unwrap();
    let stats = simulate(&s.pipeline.internal, &players, &[x], 10_000, 100_000, 42, Goal::T);
    assert!(stats.hits * 100 >= stats.runs * 99, "{stats}");
}

#[test]
fn witness_free_residuals_are_won_by_the_counting_strategy() {
    let mut checked = 0;
    for i in 0..40 {
        let g = corpus_game(77, i, GenParams::default());
        let sol = solve_one(&g, DEFAULT_CAP).unwrap();
        let (theta, _) = sol.trace.residual.to_game(&sol.bar);
        let sigma = sigma_no_witness(&theta, DEFAULT_CAP).unwrap();
        sigma.validate(&theta).unwrap();
        for pi in all_smd(&theta, Owner::Diamond).take(5) {
            let pi = pi.to_regular(&theta);
            let players = Players { sigma: &sigma, pi: &pi };
            for x in 0..theta.len() {
                let st = simulate(&theta, &players, &[x], 200, 10_000, i, Goal::TEps);
                assert_eq!(st.misses, 0, "{}", theta.sym_name(x));
                assert!(st.hits * 100 >= st.runs * 99, "{st}");
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}
