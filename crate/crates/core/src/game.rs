//! Stochastic BPA games: alphabet with ownership, rules, targets.
//!
//! A configuration is a word over the alphabet with the top of the stack
//! at index 0. Symbols are referred to by their index in the alphabet.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Index of a symbol in a game's alphabet.
pub type Sym = usize;

/// Stack content, top of stack first. The empty vector is ε.
pub type Config = Vec<Sym>;

pub type SymSet = BTreeSet<Sym>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Owner {
    /// Maximizer.
    Box,
    /// Minimizer.
    Diamond,
    /// Probabilistic.
    Circle,
}

impl Owner {
    pub fn keyword(self) -> &'static str {
        match self {
            Owner::Box => "box",
            Owner::Diamond => "diamond",
            Owner::Circle => "circle",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Owner> {
        match s {
            "box" => Some(Owner::Box),
            "diamond" => Some(Owner::Diamond),
            "circle" => Some(Owner::Circle),
            _ => None,
        }
    }
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub lhs: Sym,
    /// At most two symbols; `rhs[0]` ends up on top.
    pub rhs: Vec<Sym>,
    /// Present iff the lhs is a circle symbol.
    pub prob: Option<BigRational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolDecl {
    pub name: String,
    pub owner: Owner,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GameError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    At {
        line: usize,
        #[source]
        source: Box<GameError>,
    },
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("symbol name `{0}` is reserved or malformed")]
    ReservedName(String),
    #[error("rule `{0}` needs a probability")]
    MissingProb(String),
    #[error("rule `{0}` must not carry a probability")]
    ExtraProb(String),
    #[error("rule `{0}` has a probability outside (0,1]")]
    BadProb(String),
    #[error("rule `{0}` has more than two symbols on the right")]
    LongRhs(String),
    #[error("symbol {symbol}: probabilities sum to {sum} ≠ 1")]
    ProbSum { symbol: String, sum: String },
    #[error("symbol `{0}` has no rule")]
    NoRule(String),
    #[error("the alphabet is empty")]
    EmptyAlphabet,
}

impl GameError {
    /// True for errors in the text itself, as opposed to an ill-formed game.
    pub fn is_syntax(&self) -> bool {
        match self {
            GameError::Syntax { .. }
            | GameError::DuplicateSymbol(_)
            | GameError::UnknownSymbol(_)
            | GameError::ReservedName(_) => true,
            GameError::At { source, .. } => source.is_syntax(),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BpaGame {
    name: String,
    symbols: Vec<SymbolDecl>,
    rules: Vec<Rule>,
    targets: SymSet,
    by_lhs: Vec<Vec<usize>>,
    index: HashMap<String, Sym>,
}

impl BpaGame {
    /// Builds a game and checks every invariant except target freezing.
    ///
    /// Duplicate `(lhs, rhs)` pairs are merged: circle probabilities are
    /// summed, player duplicates collapse to the first occurrence.
    pub fn new(
        name: impl Into<String>,
        symbols: Vec<SymbolDecl>,
        rules: Vec<Rule>,
        targets: SymSet,
    ) -> Result<BpaGame, GameError> {
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s.name.is_empty() {
                return Err(GameError::ReservedName(String::new()));
            }
            if index.insert(s.name.clone(), i).is_some() {
                return Err(GameError::DuplicateSymbol(s.name.clone()));
            }
        }
        let n = symbols.len();
        let show = |r: &Rule| rule_text(&symbols, r);

        let mut merged: Vec<Rule> = Vec::with_capacity(rules.len());
        let mut seen: HashMap<(Sym, Vec<Sym>), usize> = HashMap::new();
        for r in rules {
            if r.lhs >= n || r.rhs.iter().any(|&s| s >= n) {
                return Err(GameError::UnknownSymbol(format!("#{}", r.lhs.max(n))));
            }
            if r.rhs.len() > 2 {
                return Err(GameError::LongRhs(show(&r)));
            }
            let circle = symbols[r.lhs].owner == Owner::Circle;
            match (&r.prob, circle) {
                (None, true) => return Err(GameError::MissingProb(show(&r))),
                (Some(_), false) => return Err(GameError::ExtraProb(show(&r))),
                (Some(p), true) if !p.is_positive() || *p > BigRational::one() => {
                    return Err(GameError::BadProb(show(&r)))
                }
                _ => {}
            }
            match seen.get(&(r.lhs, r.rhs.clone())) {
                Some(&k) => {
                    if let (Some(acc), Some(p)) = (merged[k].prob.as_mut(), r.prob.as_ref()) {
                        *acc += p;
                    }
                }
                None => {
                    seen.insert((r.lhs, r.rhs.clone()), merged.len());
                    merged.push(r);
                }
            }
        }

        let mut by_lhs = vec![Vec::new(); n];
        for (i, r) in merged.iter().enumerate() {
            by_lhs[r.lhs].push(i);
        }
        for (x, decl) in symbols.iter().enumerate() {
            if by_lhs[x].is_empty() {
                return Err(GameError::NoRule(decl.name.clone()));
            }
            if decl.owner == Owner::Circle {
                let sum: BigRational = by_lhs[x]
                    .iter()
                    .map(|&i| merged[i].prob.clone().unwrap_or_else(BigRational::zero))
                    .sum();
                if !sum.is_one() {
                    return Err(GameError::ProbSum {
                        symbol: decl.name.clone(),
                        sum: fmt_rational(&sum),
                    });
                }
            }
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= n) {
            return Err(GameError::UnknownSymbol(format!("#{t}")));
        }
        Ok(BpaGame {
            name: name.into(),
            symbols,
            rules: merged,
            targets,
            by_lhs,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbols(&self) -> &[SymbolDecl] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, i: usize) -> &Rule {
        &self.rules[i]
    }

    /// Indices of the rules with lhs `x`, in file order.
    pub fn rules_of(&self, x: Sym) -> &[usize] {
        &self.by_lhs[x]
    }

    pub fn targets(&self) -> &SymSet {
        &self.targets
    }

    pub fn is_target(&self, x: Sym) -> bool {
        self.targets.contains(&x)
    }

    pub fn owner(&self, x: Sym) -> Owner {
        self.symbols[x].owner
    }

    pub fn sym_name(&self, x: Sym) -> &str {
        &self.symbols[x].name
    }

    pub fn lookup(&self, name: &str) -> Option<Sym> {
        self.index.get(name).copied()
    }

    pub fn find_rule(&self, lhs: Sym, rhs: &[Sym]) -> Option<usize> {
        self.by_lhs[lhs].iter().copied().find(|&i| self.rules[i].rhs == rhs)
    }

    pub fn symbols_owned_by(&self, owner: Owner) -> impl Iterator<Item = Sym> + '_ {
        (0..self.len()).filter(move |&x| self.owner(x) == owner)
    }

    /// True when every target R has the single rule R → R.
    pub fn is_frozen(&self) -> bool {
        self.targets.iter().all(|&r| {
            let rs = self.rules_of(r);
            rs.len() == 1 && self.rules[rs[0]].rhs == [r]
        })
    }

    pub fn rule_text(&self, i: usize) -> String {
        rule_text(&self.symbols, &self.rules[i])
    }

    /// Renders a configuration as space-separated names, `eps` for ε.
    pub fn fmt_config(&self, config: &[Sym]) -> String {
        if config.is_empty() {
            return "eps".to_string();
        }
        let names: Vec<&str> = config.iter().map(|&x| self.sym_name(x)).collect();
        names.join(" ")
    }

    /// Parses a space-separated configuration; `eps` or an empty string is ε.
    pub fn parse_config(&self, text: &str) -> Result<Config, GameError> {
        let text = text.trim();
        if text.is_empty() || text == "eps" {
            return Ok(Vec::new());
        }
        text.split_whitespace()
            .map(|w| self.lookup(w).ok_or_else(|| GameError::UnknownSymbol(w.to_string())))
            .collect()
    }

    /// Applies rule `i` to a configuration whose top is the rule's lhs.
    pub fn apply(&self, i: usize, config: &[Sym]) -> Config {
        let r = &self.rules[i];
        debug_assert_eq!(config.first(), Some(&r.lhs));
        let mut out = Vec::with_capacity(config.len() + 1);
        out.extend_from_slice(&r.rhs);
        out.extend_from_slice(&config[1..]);
        out
    }
}

pub(crate) fn rule_text(symbols: &[SymbolDecl], r: &Rule) -> String {
    let name = |x: Sym| symbols.get(x).map(|d| d.name.as_str()).unwrap_or("?").to_string();
    let rhs = if r.rhs.is_empty() {
        "eps".to_string()
    } else {
        r.rhs.iter().map(|&x| name(x)).collect::<Vec<_>>().join(" ")
    };
    match &r.prob {
        Some(p) => format!("{} -> {} : {}", name(r.lhs), rhs, fmt_rational(p)),
        None => format!("{} -> {}", name(r.lhs), rhs),
    }
}

/// `p/q` in lowest terms; integers print without a denominator.
pub fn fmt_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Accepts `p/q`, an integer, or a finite decimal such as `0.25`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    use num_bigint::BigInt;
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let digits: BigInt = format!("{int}{frac}").parse().ok()?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        return Some(BigRational::new(digits, scale));
    }
    let p: BigInt = s.parse().ok()?;
    Some(BigRational::from_integer(p))
}
