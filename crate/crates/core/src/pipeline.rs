//! From a user game (simple or regular target) to region automata and
//! strategies over the user's own alphabet.
//!
//! Regular targets, and the `T_eps` variants of `one`/`less1`, go through a
//! bottom marker ⊥: the internal game runs on configurations ending in ⊥
//! (paired with automaton states for regular targets), and answers are
//! projected back by tracking the automaton state bottom-up.

use crate::dfa::{Dfa, DfaError, Objective, RegionAutomaton, Variant};
use crate::game::{BpaGame, Config, GameError, Owner, Sym, SymSet};
use crate::one::{project_to_input, regions_one, solve_one, synth_pi_less1, synth_sigma_one, OneSolution};
use crate::strategy::{Distribution, RegularStrategy};
use crate::termination::TermError;
use crate::transform::{add_bottom_symbol, freeze_targets, product_with_target_dfa};
use crate::zero::{fixpoint_ab, region_pos, region_zero, synth_pi_zero, synth_sigma_pos, ZeroSolution};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Dfa(#[from] DfaError),
    #[error(transparent)]
    Term(#[from] TermError),
}

/// How user configurations map into the internal game.
#[derive(Clone, Debug)]
struct Bottom {
    /// `slot[x][q]`: internal symbol for user symbol `x` in automaton state `q`.
    slot: Vec<Vec<Option<Sym>>>,
    /// Internal ⊥ per automaton state.
    bot: Vec<Option<Sym>>,
    /// Automaton over user symbols; `None` means a single state.
    dfa: Option<Dfa>,
}

impl Bottom {
    fn initial(&self) -> usize {
        self.dfa.as_ref().map_or(0, |d| d.initial)
    }

    fn step(&self, q: usize, x: Sym) -> usize {
        self.dfa.as_ref().map_or(0, |d| d.step(q, x))
    }

    fn num_states(&self) -> usize {
        self.dfa.as_ref().map_or(1, Dfa::num_states)
    }
}

#[derive(Clone, Debug)]
pub struct Pipeline {
    pub user: BpaGame,
    /// Frozen internal game.
    pub internal: BpaGame,
    bottom: Option<Bottom>,
}

impl Pipeline {
    /// `eps_goal` makes the empty user stack a target (only meaningful
    /// with a bottom marker).
    pub fn new(user: &BpaGame, dfa: Option<&Dfa>, eps_goal: bool) -> Pipeline {
        if dfa.is_none() && !eps_goal {
            return Pipeline {
                user: user.clone(),
                internal: freeze_targets(user),
                bottom: None,
            };
        }
        let (with_bot, _, bot) = add_bottom_symbol(user);
        let n = user.len();
        let (internal, bottom) = match dfa {
            None => {
                let mut targets = with_bot.targets().clone();
                if eps_goal {
                    targets.insert(bot);
                }
                let g = BpaGame::new(
                    with_bot.name(),
                    with_bot.symbols().to_vec(),
                    with_bot.rules().to_vec(),
                    targets,
                )
                .expect("marking the bottom keeps the game valid");
                let bottom = Bottom {
                    slot: (0..n).map(|x| vec![Some(x)]).collect(),
                    bot: vec![Some(bot)],
                    dfa: None,
                };
                (freeze_targets(&g), bottom)
            }
            Some(dfa) => {
                let (p, map) = product_with_target_dfa(&with_bot, dfa, true);
                let find = |x: Sym, q: usize| {
                    let name = format!("{}@{}", with_bot.sym_name(x), dfa.states[q]);
                    p.lookup(&name).filter(|&y| map.backward[y] == Some(x))
                };
                let slot = (0..n)
                    .map(|x| (0..dfa.num_states()).map(|q| find(x, q)).collect())
                    .collect();
                let bots: Vec<Option<Sym>> = (0..dfa.num_states()).map(|q| find(bot, q)).collect();
                let mut targets = p.targets().clone();
                if eps_goal {
                    targets.extend(bots.iter().flatten());
                }
                let g = BpaGame::new(p.name(), p.symbols().to_vec(), p.rules().to_vec(), targets)
                    .expect("marking the bottom keeps the game valid");
                let bottom = Bottom {
                    slot,
                    bot: bots,
                    dfa: Some(dfa.clone()),
                };
                (freeze_targets(&g), bottom)
            }
        };
        Pipeline {
            user: user.clone(),
            internal,
            bottom: Some(bottom),
        }
    }

    pub fn has_bottom(&self) -> bool {
        self.bottom.is_some()
    }

    /// The internal configuration standing for a user configuration.
    pub fn lift(&self, config: &[Sym]) -> Config {
        let Some(b) = &self.bottom else {
            return config.to_vec();
        };
        let mut q = b.initial();
        let mut out = vec![b.bot[q].expect("initial state is live")];
        for &x in config.iter().rev() {
            out.push(b.slot[x][q].expect("reachable states are paired"));
            q = b.step(q, x);
        }
        out.reverse();
        out
    }

    /// A region automaton over the user's alphabet.
    pub fn project_region(&self, region: &RegionAutomaton) -> RegionAutomaton {
        let Some(b) = &self.bottom else {
            return region.minimize();
        };
        let n = self.user.len();
        let nq = b.num_states();
        let nr = region.num_states();
        let id = |q: usize, r: usize| q * nr + r;
        let q0 = b.initial();
        let start = region.step(region.initial, b.bot[q0].unwrap());
        let mut delta = vec![vec![0; n]; nq * nr];
        for q in 0..nq {
            for r in 0..nr {
                for (x, row) in b.slot.iter().enumerate() {
                    // Unreachable automaton states are never read; park them.
                    delta[id(q, r)][x] = match row[q] {
                        Some(s) => id(b.step(q, x), region.step(r, s)),
                        None => id(q, r),
                    };
                }
            }
        }
        let d = Dfa {
            alphabet: self.user.symbols().iter().map(|s| s.name.clone()).collect(),
            states: (0..nq * nr).map(|i| format!("s{i}")).collect(),
            initial: id(q0, start),
            accepting: (0..nq * nr).map(|i| region.accepting[i % nr]).collect(),
            delta,
            label: region.label,
        };
        d.minimize()
    }

    /// A strategy over the internal game, as a strategy over the user game.
    /// At user targets the first rule is played.
    pub fn project_strategy(&self, s: &RegularStrategy) -> RegularStrategy {
        let user = &self.user;
        let internal = &self.internal;
        let map_rule = |x: Sym, r: usize| -> usize {
            let rhs: Vec<Sym> = internal.rule(r).rhs.iter().map(|&y| self.user_symbol(y)).collect();
            user.find_rule(x, &rhs).unwrap_or(user.rules_of(x)[0])
        };
        let act = |m: usize, x: Sym, ix: Option<Sym>| -> (Distribution, bool) {
            let Some(ix) = ix.filter(|&ix| !internal.is_target(ix)) else {
                return (Distribution::dirac(user.rules_of(x)[0]), false);
            };
            let d = s.choose[m][ix].as_ref().expect("owned symbol");
            let support = d.support.iter().map(|(r, w)| (map_rule(x, *r), w.clone())).collect();
            (Distribution { support }, s.outside[m][ix])
        };
        match &self.bottom {
            None => RegularStrategy::build(
                user,
                s.player,
                s.initial,
                |&m, x| s.update[m][x],
                |&m, x| act(m, x, Some(x)),
            ),
            Some(b) => {
                let q0 = b.initial();
                let m0 = s.update[s.initial][b.bot[q0].unwrap()];
                RegularStrategy::build(
                    user,
                    s.player,
                    (q0, m0),
                    |&(q, m), x| match b.slot[x][q] {
                        Some(ix) => (b.step(q, x), s.update[m][ix]),
                        None => (q, m),
                    },
                    |&(q, m), x| act(m, x, b.slot[x][q]),
                )
            }
        }
    }

    fn user_symbol(&self, y: Sym) -> Sym {
        match &self.bottom {
            None => y,
            Some(b) => b
                .slot
                .iter()
                .position(|row| row.contains(&Some(y)))
                .unwrap_or(usize::MAX),
        }
    }
}

/// The owner of the strategy for an objective.
pub fn owner_of(objective: Objective) -> Owner {
    match objective {
        Objective::Pos | Objective::One => Owner::Box,
        Objective::Zero | Objective::Less1 => Owner::Diamond,
    }
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub pipeline: Pipeline,
    pub objective: Objective,
    pub variant: Variant,
    /// Region over the internal game.
    pub internal_region: RegionAutomaton,
    /// Region over the user's alphabet, minimized.
    pub region: RegionAutomaton,
    pub internal_strategy: RegularStrategy,
    pub strategy: RegularStrategy,
    pub zero: Option<ZeroSolution>,
    pub one: Option<OneSolution>,
}

impl Solved {
    pub fn member(&self, config: &[Sym]) -> bool {
        self.internal_region.member(&self.pipeline.lift(config))
    }

    /// User symbols `x` whose one-symbol configuration lies in the region.
    pub fn single_symbol_members(&self) -> SymSet {
        (0..self.pipeline.user.len()).filter(|&x| self.member(&[x])).collect()
    }
}

pub fn solve(
    user: &BpaGame,
    dfa: Option<&Dfa>,
    objective: Objective,
    variant: Variant,
    cap: u128,
) -> Result<Solved, SolveError> {
    let via_bottom = variant == Variant::TEps && matches!(objective, Objective::One | Objective::Less1);
    let pipeline = Pipeline::new(user, dfa, via_bottom || (dfa.is_some() && variant == Variant::TEps));
    let inner_variant = if pipeline.has_bottom() { Variant::T } else { variant };
    let g = &pipeline.internal;
    let (internal_region, internal_strategy, zero, one) = match objective {
        Objective::Pos | Objective::Zero => {
            let sol = fixpoint_ab(g);
            let (region, strategy) = if objective == Objective::Pos {
                (region_pos(g, &sol, inner_variant), synth_sigma_pos(g, &sol))
            } else {
                (
                    region_zero(g, &sol, inner_variant),
                    synth_pi_zero(g, &sol, inner_variant).to_regular(g),
                )
            };
            (region, strategy, Some(sol), None)
        }
        Objective::One | Objective::Less1 => {
            let sol = solve_one(g, cap)?;
            let (one_region, less_region) = regions_one(g, &sol.quad, inner_variant);
            let (region, strategy) = if objective == Objective::One {
                (one_region, project_to_input(&sol, &synth_sigma_one(&sol)))
            } else {
                (less_region, project_to_input(&sol, &synth_pi_less1(&sol)))
            };
            (region, strategy, None, Some(sol))
        }
    };
    let mut region = pipeline.project_region(&internal_region);
    region.label = internal_region.label.map(|mut l| {
        l.variant = variant;
        l
    });
    let strategy = pipeline.project_strategy(&internal_strategy);
    Ok(Solved {
        pipeline,
        objective,
        variant,
        internal_region,
        region,
        internal_strategy,
        strategy,
        zero,
        one,
    })
}
