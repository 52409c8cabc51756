//! Line-oriented game files.
//!
//! ```text
//! game ex
//! symbol X box
//! symbol R circle
//! rule X -> R
//! rule X -> eps
//! rule R -> R : 1
//! target R
//! ```

use crate::game::{parse_rational, BpaGame, GameError, Owner, Rule, SymSet, SymbolDecl};

/// A parsed game file. `target_dfa` holds the path of a `target-dfa` line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameSource {
    pub game: BpaGame,
    pub target_dfa: Option<String>,
}

/// Suffixes and names the transformations use for fresh symbols.
const RESERVED_INFIXES: [&str; 3] = ["__snf", "__tilde", "__bot"];

fn valid_user_name(name: &str) -> bool {
    !name.is_empty()
        && name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '\'')
        && !RESERVED_INFIXES.iter().any(|r| name.contains(r))
}

pub fn parse_game(text: &str) -> Result<BpaGame, GameError> {
    let src = parse_game_source(text)?;
    if src.target_dfa.is_some() {
        return Err(GameError::Syntax {
            line: 0,
            msg: "regular targets need parse_game_source".into(),
        });
    }
    Ok(src.game)
}

pub fn parse_game_source(text: &str) -> Result<GameSource, GameError> {
    let mut name = String::from("unnamed");
    let mut symbols: Vec<SymbolDecl> = Vec::new();
    let mut raw_rules: Vec<(usize, String, Vec<String>, Option<String>)> = Vec::new();
    let mut raw_targets: Vec<(usize, String)> = Vec::new();
    let mut target_dfa = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |msg: String| GameError::Syntax { line, msg };
        let (head, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let rest = rest.trim();
        match head {
            "game" => {
                if rest.is_empty() {
                    return Err(syntax("expected `game <name>`".into()));
                }
                name = rest.to_string();
            }
            "symbol" => {
                let words: Vec<&str> = rest.split_whitespace().collect();
                if words.len() != 2 {
                    return Err(syntax("expected `symbol <name> <box|diamond|circle>`".into()));
                }
                if !valid_user_name(words[0]) {
                    return Err(at(line, GameError::ReservedName(words[0].into())));
                }
                let owner =
                    Owner::from_keyword(words[1]).ok_or_else(|| syntax(format!("unknown owner `{}`", words[1])))?;
                if symbols.iter().any(|s| s.name == words[0]) {
                    return Err(at(line, GameError::DuplicateSymbol(words[0].into())));
                }
                symbols.push(SymbolDecl {
                    name: words[0].to_string(),
                    owner,
                });
            }
            "rule" => {
                let (body, prob) = match rest.split_once(':') {
                    Some((b, p)) => (b.trim(), Some(p.trim().to_string())),
                    None => (rest, None),
                };
                let (lhs, rhs) = body
                    .split_once("->")
                    .ok_or_else(|| syntax("expected `rule X -> ...`".into()))?;
                let lhs = lhs.trim();
                if lhs.is_empty() || lhs.contains(char::is_whitespace) {
                    return Err(syntax("the left-hand side must be one symbol".into()));
                }
                let rhs: Vec<String> = rhs.split_whitespace().map(String::from).collect();
                let rhs = match rhs.as_slice() {
                    [] => return Err(syntax("empty right-hand side; write `eps`".into())),
                    [e] if e == "eps" => Vec::new(),
                    _ if rhs.len() > 2 => return Err(at(line, GameError::LongRhs(body.to_string()))),
                    _ => rhs,
                };
                raw_rules.push((line, lhs.to_string(), rhs, prob));
            }
            "target" => {
                for t in rest.split_whitespace() {
                    raw_targets.push((line, t.to_string()));
                }
            }
            "target-dfa" => {
                if rest.is_empty() {
                    return Err(syntax("expected `target-dfa <path>`".into()));
                }
                target_dfa = Some(rest.to_string());
            }
            other => return Err(syntax(format!("unknown directive `{other}`"))),
        }
    }

    if symbols.is_empty() {
        return Err(GameError::EmptyAlphabet);
    }
    // A twin is named by appending a prime, so `X` and `X'` cannot coexist.
    for s in &symbols {
        if let Some(base) = s.name.strip_suffix('\'') {
            if symbols.iter().any(|t| t.name == base) {
                return Err(GameError::ReservedName(s.name.clone()));
            }
        }
    }
    let find = |line: usize, n: &str| {
        symbols
            .iter()
            .position(|s| s.name == n)
            .ok_or_else(|| at(line, GameError::UnknownSymbol(n.to_string())))
    };

    let mut rules = Vec::with_capacity(raw_rules.len());
    for (line, lhs, rhs, prob) in &raw_rules {
        let l = find(*line, lhs)?;
        let r = rhs.iter().map(|s| find(*line, s)).collect::<Result<Vec<_>, _>>()?;
        let p = match prob {
            None => None,
            Some(p) => Some(parse_rational(p).ok_or_else(|| GameError::Syntax {
                line: *line,
                msg: format!("malformed probability `{p}`"),
            })?),
        };
        rules.push(Rule {
            lhs: l,
            rhs: r,
            prob: p,
        });
    }
    let mut targets = SymSet::new();
    for (line, t) in &raw_targets {
        targets.insert(find(*line, t)?);
    }
    let game = BpaGame::new(name, symbols, rules, targets)?;
    Ok(GameSource { game, target_dfa })
}

fn at(line: usize, err: GameError) -> GameError {
    GameError::At {
        line,
        source: Box::new(err),
    }
}

/// Canonical text; `parse_game(serialize_game(g)) == g`.
pub fn serialize_game(game: &BpaGame) -> String {
    let mut out = format!("game {}\n", game.name());
    for s in game.symbols() {
        out.push_str(&format!("symbol {} {}\n", s.name, s.owner));
    }
    for i in 0..game.rules().len() {
        out.push_str(&format!("rule {}\n", game.rule_text(i)));
    }
    if !game.targets().is_empty() {
        let names: Vec<&str> = game.targets().iter().map(|&t| game.sym_name(t)).collect();
        out.push_str(&format!("target {}\n", names.join(" ")));
    }
    out
}
