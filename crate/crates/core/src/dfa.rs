//! Total deterministic automata over a game alphabet.
//!
//! Automata read a configuration bottom-up, i.e. the reverse of the word
//! with the top of the stack first. Target automata and winning-region
//! automata share this type.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use crate::game::{Sym, SymSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Objective {
    /// Reach with probability > 0.
    Pos,
    /// Reach with probability = 0.
    Zero,
    /// Reach with probability = 1.
    One,
    /// Reach with probability < 1.
    Less1,
}

impl Objective {
    pub fn relation(self) -> &'static str {
        match self {
            Objective::Pos => ">0",
            Objective::Zero => "=0",
            Objective::One => "=1",
            Objective::Less1 => "<1",
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Objective::Pos => "pos",
            Objective::Zero => "zero",
            Objective::One => "one",
            Objective::Less1 => "less1",
        }
    }

    pub fn from_relation(s: &str) -> Option<Objective> {
        [Objective::Pos, Objective::Zero, Objective::One, Objective::Less1]
            .into_iter()
            .find(|o| o.relation() == s || o.keyword() == s)
    }
}

/// Whether reaching the empty stack counts as reaching the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    T,
    TEps,
}

impl Variant {
    pub fn keyword(self) -> &'static str {
        match self {
            Variant::T => "T",
            Variant::TEps => "T_eps",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Variant> {
        match s {
            "T" | "t" => Some(Variant::T),
            "T_eps" | "teps" | "T_EPS" => Some(Variant::TEps),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RegionLabel {
    pub objective: Objective,
    pub variant: Variant,
    pub player: crate::game::Owner,
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.objective.relation(),
            self.variant.keyword(),
            self.player
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DfaError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("no transition from state `{state}` on `{symbol}`")]
    NotTotal { state: String, symbol: String },
    #[error("alphabets differ")]
    AlphabetMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    pub alphabet: Vec<String>,
    pub states: Vec<String>,
    pub initial: usize,
    pub accepting: Vec<bool>,
    /// `delta[state][symbol]`.
    pub delta: Vec<Vec<usize>>,
    pub label: Option<RegionLabel>,
}

pub type TargetDfa = Dfa;
pub type RegionAutomaton = Dfa;

/// The region shapes produced by the solvers, read top-down.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// `S1* S2 Σ*`
    StarHead,
    /// `S1* S2 Σ* ∪ S1*`
    StarHeadOrStar,
}

impl Dfa {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn step(&self, q: usize, x: Sym) -> usize {
        self.delta[q][x]
    }

    /// State reached after reading `config` bottom-up.
    pub fn run(&self, config: &[Sym]) -> usize {
        config.iter().rev().fold(self.initial, |q, &x| self.delta[q][x])
    }

    pub fn member(&self, config: &[Sym]) -> bool {
        self.accepting[self.run(config)]
    }

    /// Builds the two-state automaton of a region shape.
    ///
    /// Bottom-up, `w ∈ S1* S2 Σ*` satisfies `f(Xβ) = X∈S2 ∨ (X∈S1 ∧ f(β))`,
    /// so one bit of memory suffices; the shapes differ only in `f(ε)`.
    pub fn from_shape(
        shape: Shape,
        alphabet: Vec<String>,
        star: &SymSet,
        head: &SymSet,
        label: Option<RegionLabel>,
    ) -> Dfa {
        let k = alphabet.len();
        let delta = (0..2)
            .map(|q| {
                (0..k)
                    .map(|x| {
                        if head.contains(&x) {
                            1
                        } else if star.contains(&x) {
                            q
                        } else {
                            0
                        }
                    })
                    .collect()
            })
            .collect();
        let initial = match shape {
            Shape::StarHead => 0,
            Shape::StarHeadOrStar => 1,
        };
        Dfa {
            alphabet,
            states: vec!["q0".into(), "q1".into()],
            initial,
            accepting: vec![false, true],
            delta,
            label,
        }
    }

    pub fn complement(&self) -> Dfa {
        let mut d = self.clone();
        for a in d.accepting.iter_mut() {
            *a = !*a;
        }
        d.label = None;
        d
    }

    fn product(&self, other: &Dfa, accept: impl Fn(bool, bool) -> bool) -> Result<Dfa, DfaError> {
        if self.alphabet != other.alphabet {
            return Err(DfaError::AlphabetMismatch);
        }
        let k = self.alphabet.len();
        let mut ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut pairs = vec![(self.initial, other.initial)];
        ids.insert(pairs[0], 0);
        let mut delta: Vec<Vec<usize>> = Vec::new();
        let mut i = 0;
        while i < pairs.len() {
            let (p, q) = pairs[i];
            let mut row = Vec::with_capacity(k);
            for x in 0..k {
                let next = (self.delta[p][x], other.delta[q][x]);
                let id = *ids.entry(next).or_insert_with(|| {
                    pairs.push(next);
                    pairs.len() - 1
                });
                row.push(id);
            }
            delta.push(row);
            i += 1;
        }
        Ok(Dfa {
            alphabet: self.alphabet.clone(),
            states: (0..pairs.len()).map(|i| format!("q{i}")).collect(),
            initial: 0,
            accepting: pairs
                .iter()
                .map(|&(p, q)| accept(self.accepting[p], other.accepting[q]))
                .collect(),
            delta,
            label: None,
        })
    }

    pub fn intersect(&self, other: &Dfa) -> Result<Dfa, DfaError> {
        self.product(other, |a, b| a && b)
    }

    pub fn union(&self, other: &Dfa) -> Result<Dfa, DfaError> {
        self.product(other, |a, b| a || b)
    }

    /// Shortest accepted configuration (top first), if any.
    pub fn witness(&self) -> Option<Vec<Sym>> {
        let mut prev: Vec<Option<(usize, Sym)>> = vec![None; self.num_states()];
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial] = true;
        while let Some(q) = queue.pop_front() {
            if self.accepting[q] {
                let mut word = Vec::new();
                let mut cur = q;
                while let Some((p, x)) = prev[cur] {
                    word.push(x);
                    cur = p;
                }
                // `word` holds the bottom-up reading reversed, i.e. top first.
                return Some(word);
            }
            for (x, &r) in self.delta[q].iter().enumerate() {
                if !seen[r] {
                    seen[r] = true;
                    prev[r] = Some((q, x));
                    queue.push_back(r);
                }
            }
        }
        None
    }

    pub fn is_empty(&self) -> bool {
        self.witness().is_none()
    }

    /// Language equality via emptiness of the symmetric difference.
    pub fn equal(&self, other: &Dfa) -> Result<bool, DfaError> {
        Ok(self.product(other, |a, b| a != b)?.is_empty())
    }

    /// Keeps only the listed symbols (in that order) as the new alphabet.
    pub fn restrict_alphabet(&self, keep: &[Sym]) -> Dfa {
        let mut d = Dfa {
            alphabet: keep.iter().map(|&x| self.alphabet[x].clone()).collect(),
            states: self.states.clone(),
            initial: self.initial,
            accepting: self.accepting.clone(),
            delta: self
                .delta
                .iter()
                .map(|row| keep.iter().map(|&x| row[x]).collect())
                .collect(),
            label: self.label,
        };
        d = d.minimize();
        d
    }

    /// Minimal equivalent automaton in canonical numbering.
    ///
    /// Unreachable states are dropped, then the partition into
    /// accepting/rejecting states is refined until stable. States are
    /// renumbered in breadth-first order from the initial state, so equal
    /// languages give identical automata.
    pub fn minimize(&self) -> Dfa {
        let k = self.alphabet.len();
        let mut reach = vec![false; self.num_states()];
        let mut order = vec![self.initial];
        reach[self.initial] = true;
        let mut i = 0;
        while i < order.len() {
            for &r in &self.delta[order[i]] {
                if !reach[r] {
                    reach[r] = true;
                    order.push(r);
                }
            }
            i += 1;
        }

        let mut class: Vec<usize> = (0..self.num_states()).map(|q| usize::from(self.accepting[q])).collect();
        loop {
            let mut sig_ids: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
            let mut next = vec![0; self.num_states()];
            for &q in &order {
                let sig = (class[q], self.delta[q].iter().map(|&r| class[r]).collect::<Vec<_>>());
                let n = sig_ids.len();
                next[q] = *sig_ids.entry(sig).or_insert(n);
            }
            let before: std::collections::BTreeSet<usize> = order.iter().map(|&q| class[q]).collect();
            let stable = sig_ids.len() == before.len();
            class = next;
            if stable {
                break;
            }
        }

        let mut canon: BTreeMap<usize, usize> = BTreeMap::new();
        let mut reps: Vec<usize> = Vec::new();
        let mut queue = VecDeque::from([self.initial]);
        canon.insert(class[self.initial], 0);
        reps.push(self.initial);
        while let Some(q) = queue.pop_front() {
            for x in 0..k {
                let r = self.delta[q][x];
                if let std::collections::btree_map::Entry::Vacant(e) = canon.entry(class[r]) {
                    e.insert(reps.len());
                    reps.push(r);
                    queue.push_back(r);
                }
            }
        }
        Dfa {
            alphabet: self.alphabet.clone(),
            states: (0..reps.len()).map(|i| format!("q{i}")).collect(),
            initial: 0,
            accepting: reps.iter().map(|&q| self.accepting[q]).collect(),
            delta: reps
                .iter()
                .map(|&q| (0..k).map(|x| canon[&class[self.delta[q][x]]]).collect())
                .collect(),
            label: self.label,
        }
    }

    /// Writes the automaton in the `dfa` text format with explicit rows.
    pub fn serialize(&self) -> String {
        let mut out = String::from("dfa\n");
        if let Some(l) = &self.label {
            out.push_str(&format!("label {l}\ndirection: bottom-up\n"));
        }
        out.push_str(&format!("states {}\n", self.states.join(" ")));
        out.push_str(&format!("initial {}\n", self.states[self.initial]));
        let acc: Vec<&str> = (0..self.num_states())
            .filter(|&q| self.accepting[q])
            .map(|q| self.states[q].as_str())
            .collect();
        if acc.is_empty() {
            out.push_str("accept\n");
        } else {
            out.push_str(&format!("accept {}\n", acc.join(" ")));
        }
        for (q, row) in self.delta.iter().enumerate() {
            for (x, &r) in row.iter().enumerate() {
                out.push_str(&format!(
                    "trans {} {} {}\n",
                    self.states[q], self.alphabet[x], self.states[r]
                ));
            }
        }
        out
    }

    /// Parses the `dfa` text format against a known alphabet.
    ///
    /// `trans s * s'` covers every symbol without an explicit row from `s`.
    pub fn parse(text: &str, alphabet: &[String]) -> Result<Dfa, DfaError> {
        let sym_index: BTreeMap<&str, usize> = alphabet.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut states: Vec<String> = Vec::new();
        let mut initial: Option<String> = None;
        let mut accept: Vec<(usize, String)> = Vec::new();
        let mut trans: Vec<(usize, String, String, String)> = Vec::new();
        let mut label = None;
        let mut header = false;

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let syntax = |msg: &str| DfaError::Syntax {
                line,
                msg: msg.to_string(),
            };
            let words: Vec<&str> = content.split_whitespace().collect();
            match words[0] {
                "dfa" => header = true,
                "direction:" | "direction" => {
                    if words.get(1) != Some(&"bottom-up") {
                        return Err(syntax("only bottom-up reading is supported"));
                    }
                }
                "label" => {
                    if words.len() != 4 {
                        return Err(syntax("expected `label <rel> <variant> <player>`"));
                    }
                    let objective = Objective::from_relation(words[1]).ok_or_else(|| syntax("unknown objective"))?;
                    let variant = Variant::from_keyword(words[2]).ok_or_else(|| syntax("unknown variant"))?;
                    let player = crate::game::Owner::from_keyword(words[3]).ok_or_else(|| syntax("unknown player"))?;
                    label = Some(RegionLabel {
                        objective,
                        variant,
                        player,
                    });
                }
                "states" => states.extend(words[1..].iter().map(|s| s.to_string())),
                "initial" => {
                    if words.len() != 2 {
                        return Err(syntax("expected `initial <state>`"));
                    }
                    initial = Some(words[1].to_string());
                }
                "accept" => accept.extend(words[1..].iter().map(|s| (line, s.to_string()))),
                "trans" => {
                    if words.len() != 4 {
                        return Err(syntax("expected `trans <state> <symbol|*> <state>`"));
                    }
                    if words[2] != "*" && !sym_index.contains_key(words[2]) {
                        return Err(DfaError::UnknownSymbol(words[2].to_string()));
                    }
                    trans.push((line, words[1].to_string(), words[2].to_string(), words[3].to_string()));
                }
                other => return Err(syntax(&format!("unknown directive `{other}`"))),
            }
        }
        if !header {
            return Err(DfaError::Syntax {
                line: 1,
                msg: "missing `dfa` header".into(),
            });
        }
        let state_index: BTreeMap<&str, usize> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let st = |s: &str| {
            state_index
                .get(s)
                .copied()
                .ok_or_else(|| DfaError::UnknownState(s.to_string()))
        };
        let initial = st(initial.as_deref().ok_or(DfaError::Syntax {
            line: 1,
            msg: "missing `initial`".into(),
        })?)?;
        let mut accepting = vec![false; states.len()];
        for (_, s) in &accept {
            accepting[st(s)?] = true;
        }
        let k = alphabet.len();
        let mut explicit: Vec<Vec<Option<usize>>> = vec![vec![None; k]; states.len()];
        let mut wildcard: Vec<Option<usize>> = vec![None; states.len()];
        for (_, from, sym, to) in &trans {
            let (p, r) = (st(from)?, st(to)?);
            if sym == "*" {
                wildcard[p] = Some(r);
            } else {
                explicit[p][sym_index[sym.as_str()]] = Some(r);
            }
        }
        let mut delta = vec![vec![0; k]; states.len()];
        for q in 0..states.len() {
            for x in 0..k {
                delta[q][x] = match explicit[q][x].or(wildcard[q]) {
                    Some(r) => r,
                    None => {
                        return Err(DfaError::NotTotal {
                            state: states[q].clone(),
                            symbol: alphabet[x].clone(),
                        })
                    }
                };
            }
        }
        Ok(Dfa {
            alphabet: alphabet.to_vec(),
            states,
            initial,
            accepting,
            delta,
            label,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> Vec<String> {
        vec!["a".into(), "b".into(), "c".into()]
    }

    fn set(xs: &[Sym]) -> SymSet {
        xs.iter().copied().collect()
    }

    #[test]
    fn star_head_membership() {
        // S1 = {b}, S2 = {a}; configurations written top first.
        let d = Dfa::from_shape(Shape::StarHead, abc(), &set(&[1]), &set(&[0]), None);
        assert!(d.member(&[0, 2]));
        assert!(!d.member(&[1, 1]));
        assert!(d.member(&[1, 0]));
        assert!(!d.member(&[]));
        let e = Dfa::from_shape(Shape::StarHeadOrStar, abc(), &set(&[1]), &set(&[0]), None);
        assert!(e.member(&[]));
        assert!(e.member(&[1, 1]));
        assert!(!e.member(&[2]));
    }

    #[test]
    fn complement_is_an_involution() {
        let d = Dfa::from_shape(Shape::StarHead, abc(), &set(&[1]), &set(&[0]), None);
        assert!(d.complement().complement().equal(&d).unwrap());
        assert!(d.intersect(&d.complement()).unwrap().is_empty());
    }

    #[test]
    fn minimization_is_canonical() {
        let d = Dfa::from_shape(Shape::StarHead, abc(), &set(&[1]), &set(&[0]), None);
        let u = d.union(&d).unwrap().minimize();
        assert_eq!(u, d.minimize());
        assert_eq!(u.num_states(), 2);
    }

    #[test]
    fn text_round_trip_with_wildcard() {
        let text = "dfa\nstates s t\ninitial s\naccept t\ntrans s a t\ntrans s * s\ntrans t * t\n";
        let d = Dfa::parse(text, &abc()).unwrap();
        assert!(d.member(&[2, 0]));
        assert!(!d.member(&[1, 2]));
        let again = Dfa::parse(&d.serialize(), &abc()).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn partial_rows_are_rejected() {
        let text = "dfa\nstates s\ninitial s\naccept\ntrans s a s\n";
        assert!(matches!(Dfa::parse(text, &abc()), Err(DfaError::NotTotal { .. })));
    }

    #[test]
    fn witness_is_top_first() {
        let d = Dfa::from_shape(Shape::StarHead, abc(), &set(&[1]), &set(&[0]), None);
        let w = d.witness().unwrap();
        assert!(d.member(&w));
    }
}
