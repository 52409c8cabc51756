#![allow(dead_code)]

use stochbpa::format::parse_game;
use stochbpa::game::{BpaGame, Config};

pub const FOUR_SYMBOLS: &str = "symbol X box\nsymbol Y circle\nsymbol Z circle\nsymbol R circle\n\
    rule X -> X\nrule X -> Y\nrule X -> Z\nrule Y -> Y : 1\nrule Z -> Y : 1/2\n\
    rule Z -> R : 1/2\nrule R -> R : 1\ntarget R\n";

pub const PUSHING: &str = "symbol X box\nsymbol Y circle\nsymbol Z circle\nsymbol R circle\n\
    rule X -> X\nrule X -> Y\nrule X -> Z Y\nrule Y -> Y : 1\nrule Z -> X : 1/2\n\
    rule Z -> R : 1/2\nrule R -> R : 1\ntarget R\n";

pub fn game(text: &str) -> BpaGame {
    parse_game(text).unwrap()
}

/// Every configuration over `n` symbols of length at most `max_len`.
pub fn configs(n: usize, max_len: usize) -> Vec<Config> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|c: &Config| (0..n).map(move |x| [vec![x], c.clone()].concat()))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}
