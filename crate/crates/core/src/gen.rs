//! Random games in special normal form, for property tests and the
//! acceptance corpus.

use num_rational::BigRational;
use num_traits::One;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::game::{BpaGame, Owner, Rule, SymSet, SymbolDecl};

#[derive(Clone, Copy, Debug)]
pub struct GenParams {
    pub min_symbols: usize,
    pub max_symbols: usize,
    pub max_rules: usize,
    pub max_targets: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            min_symbols: 2,
            max_symbols: 6,
            max_rules: 3,
            max_targets: 2,
        }
    }
}

const NAMES: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];

pub fn random_snf_game(rng: &mut impl Rng, p: GenParams) -> BpaGame {
    let n = rng.random_range(p.min_symbols..=p.max_symbols.min(NAMES.len()));
    let n_targets = rng.random_range(0..=p.max_targets.min(n - 1));
    let targets: SymSet = (n - n_targets..n).collect();
    let mut symbols = Vec::with_capacity(n);
    let mut rules = Vec::new();
    let all: Vec<usize> = (0..n).collect();
    for x in 0..n {
        if targets.contains(&x) {
            symbols.push(SymbolDecl {
                name: NAMES[x].into(),
                owner: Owner::Circle,
            });
            rules.push(Rule {
                lhs: x,
                rhs: vec![x],
                prob: Some(BigRational::one()),
            });
            continue;
        }
        let owner = [Owner::Box, Owner::Diamond, Owner::Circle][rng.random_range(0..3)];
        symbols.push(SymbolDecl {
            name: NAMES[x].into(),
            owner,
        });
        let k = rng.random_range(1..=p.max_rules);
        let units: Vec<Vec<usize>> = all.choose_multiple(rng, k).map(|&y| vec![y]).collect();
        match owner {
            Owner::Box => match rng.random_range(0..10) {
                0..=4 => rules.extend(units.into_iter().map(|rhs| Rule {
                    lhs: x,
                    rhs,
                    prob: None,
                })),
                5..=6 => rules.push(Rule {
                    lhs: x,
                    rhs: vec![],
                    prob: None,
                }),
                _ => rules.push(Rule {
                    lhs: x,
                    rhs: vec![rng.random_range(0..n), rng.random_range(0..n)],
                    prob: None,
                }),
            },
            Owner::Diamond => {
                rules.extend(units.into_iter().map(|rhs| Rule {
                    lhs: x,
                    rhs,
                    prob: None,
                }));
            }
            Owner::Circle => {
                let weights: Vec<i64> = units.iter().map(|_| rng.random_range(1..=4)).collect();
                let total: i64 = weights.iter().sum();
                for (rhs, w) in units.into_iter().zip(weights) {
                    rules.push(Rule {
                        lhs: x,
                        rhs,
                        prob: Some(BigRational::new(w.into(), total.into())),
                    });
                }
            }
        }
    }
    BpaGame::new("random", symbols, rules, targets).expect("generated games are valid")
}

/// Game `i` of the corpus drawn from `seed`.
pub fn corpus_game(seed: u64, i: u64, p: GenParams) -> BpaGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    random_snf_game(&mut rng, p)
}

pub fn corpus(seed: u64, count: u64, p: GenParams) -> Vec<BpaGame> {
    (0..count).map(|i| corpus_game(seed, i, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::check_snf;

    #[test]
    fn generated_games_are_in_normal_form() {
        for g in corpus(11, 100, GenParams::default()) {
            check_snf(&g).unwrap();
            assert!(g.is_frozen());
            assert!((2..=6).contains(&g.len()));
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        let p = GenParams::default();
        assert_eq!(corpus(5, 10, p), corpus(5, 10, p));
    }
}
