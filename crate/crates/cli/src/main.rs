use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stochbpa::dfa::{Dfa, DfaError, Objective, Variant};
use stochbpa::format::parse_game_source;
use stochbpa::game::{BpaGame, Config, GameError, Owner, SymSet};
use stochbpa::pipeline::{owner_of, solve, Pipeline, SolveError, Solved};
use stochbpa::play::{
    bounded_path_to_target, optimistic_below_one, simulate, truncated_value_iteration, Arena, Goal, Mode, Num,
    PlayError, Players, Truncation, DEFAULT_STATE_CAP,
};
use stochbpa::strategy::{all_smd, smd_count, RegularStrategy, StrategyError};
use stochbpa::termination::{TermError, DEFAULT_CAP};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Semantic(String),
    #[error("{0}")]
    Cap(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Semantic(_) => 3,
            CliError::Cap(_) => 4,
            CliError::Validation(_) => 5,
        }
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        if e.is_syntax() {
            CliError::Parse(e.to_string())
        } else {
            CliError::Semantic(e.to_string())
        }
    }
}

impl From<DfaError> for CliError {
    fn from(e: DfaError) -> Self {
        match e {
            DfaError::Syntax { .. } => CliError::Parse(e.to_string()),
            _ => CliError::Semantic(e.to_string()),
        }
    }
}

impl From<TermError> for CliError {
    fn from(e: TermError) -> Self {
        match e {
            TermError::StrategySpaceTooLarge { .. } => CliError::Cap(e.to_string()),
            _ => CliError::Semantic(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Game(e) => e.into(),
            SolveError::Dfa(e) => e.into(),
            SolveError::Term(e) => e.into(),
        }
    }
}

impl From<PlayError> for CliError {
    fn from(e: PlayError) -> Self {
        match e {
            PlayError::StateCap(_) => CliError::Cap(e.to_string()),
            _ => CliError::Semantic(e.to_string()),
        }
    }
}

impl From<StrategyError> for CliError {
    fn from(e: StrategyError) -> Self {
        match e {
            StrategyError::Syntax { .. } => CliError::Parse(e.to_string()),
            _ => CliError::Semantic(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "stochbpa",
    version,
    about = "Qualitative reachability for stochastic BPA games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Pos,
    Zero,
    One,
    Less1,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Pos => Objective::Pos,
            ObjectiveArg::Zero => Objective::Zero,
            ObjectiveArg::One => Objective::One,
            ObjectiveArg::Less1 => Objective::Less1,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    #[value(name = "T")]
    T,
    #[value(name = "T_eps")]
    TEps,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::T => Variant::T,
            VariantArg::TEps => Variant::TEps,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pess,
    Opt,
    Both,
}

#[derive(Args)]
struct GameArgs {
    /// Game file.
    game: PathBuf,
    #[arg(long, value_enum, default_value = "T")]
    variant: VariantArg,
    /// Cap on stackless strategy pairs enumerated per termination query.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a winning region and a winning strategy.
    Solve {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        /// Write the region and strategy files here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dump the solver's intermediate sets.
        #[arg(long)]
        explain: bool,
    },
    /// Decide whether a configuration lies in a winning region.
    Member {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        /// Configuration, top first, symbols separated by spaces.
        config: Option<String>,
        /// Ask about the empty configuration.
        #[arg(long, conflicts_with = "config")]
        eps: bool,
    },
    /// Check a stored strategy against a game and print it back.
    Strategy { game: PathBuf, file: PathBuf },
    /// Play the synthesized strategy against a uniformly random opponent.
    Simulate {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        #[arg(long)]
        start: String,
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        #[arg(long, default_value_t = 10_000)]
        max_steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Bounds on the game value from truncated value iteration.
    Oracle {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        start: String,
        #[arg(long, default_value_t = 8)]
        height: usize,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        /// Exact rational arithmetic.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        state_cap: usize,
    },
    /// Run the consistency checks on a game.
    Validate {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

struct Loaded {
    game: BpaGame,
    dfa: Option<Dfa>,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let src = parse_game_source(&text)?;
    let dfa = match &src.target_dfa {
        None => None,
        Some(rel) => {
            let p = path.parent().unwrap_or(Path::new(".")).join(rel);
            let t = fs::read_to_string(&p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            let alphabet: Vec<String> = src.game.symbols().iter().map(|s| s.name.clone()).collect();
            Some(Dfa::parse(&t, &alphabet)?)
        }
    };
    Ok(Loaded { game: src.game, dfa })
}

fn config_of(game: &BpaGame, text: &str) -> Result<Config, CliError> {
    game.parse_config(text).map_err(|e| CliError::Semantic(e.to_string()))
}

fn names(game: &BpaGame, s: &SymSet) -> String {
    let v: Vec<&str> = s.iter().map(|&x| game.sym_name(x)).collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(" ")
    }
}

fn solve_args(g: &GameArgs, objective: ObjectiveArg) -> Result<(Loaded, Solved), CliError> {
    let loaded = load(&g.game)?;
    let solved = solve(
        &loaded.game,
        loaded.dfa.as_ref(),
        objective.into(),
        g.variant.into(),
        g.cap,
    )?;
    Ok((loaded, solved))
}

fn explain(s: &Solved) -> String {
    let g = &s.pipeline.internal;
    let mut out = String::new();
    if let Some(z) = &s.zero {
        for (i, r) in z.rounds.iter().enumerate() {
            out.push_str(&format!("round {} A {} B {}\n", i + 1, names(g, &r.a), names(g, &r.b)));
        }
        out.push_str(&format!(
            "final A {}\nfinal B {}\n",
            names(g, &z.ab.a),
            names(g, &z.ab.b)
        ));
    }
    if let Some(one) = &s.one {
        out.push_str(&one.trace.render(&one.bar));
        out.push_str(&format!(
            "A {}\nC {}\n",
            names(&one.input, &one.quad.a),
            names(&one.input, &one.quad.c)
        ));
    }
    out
}

fn cmd_solve(
    g: &GameArgs,
    objective: ObjectiveArg,
    out: Option<&Path>,
    explain_flag: bool,
) -> Result<String, CliError> {
    let (loaded, s) = solve_args(g, objective)?;
    let o: Objective = objective.into();
    let mut text = format!(
        "objective {} variant {} player {}\n",
        o.keyword(),
        s.variant.keyword(),
        owner_of(o)
    );
    text.push_str(&format!(
        "members {}\n",
        names(&loaded.game, &s.single_symbol_members())
    ));
    text.push_str(&format!("eps {}\n", if s.member(&[]) { "inside" } else { "outside" }));
    let region = s.region.serialize();
    let strategy = s.strategy.serialize(&loaded.game);
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
            let rp = dir.join(format!("{}.region.dfa", o.keyword()));
            let sp = dir.join(format!("{}.strategy", o.keyword()));
            for (p, body) in [(&rp, &region), (&sp, &strategy)] {
                fs::write(p, body).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            }
            text.push_str(&format!("region {}\nstrategy {}\n", rp.display(), sp.display()));
        }
        None => {
            text.push_str("--- region\n");
            text.push_str(&region);
            text.push_str("--- strategy\n");
            text.push_str(&strategy);
        }
    }
    if explain_flag {
        text.push_str("--- explain\n");
        text.push_str(&explain(&s));
    }
    Ok(text)
}

fn cmd_member(g: &GameArgs, objective: ObjectiveArg, config: Option<&str>, eps: bool) -> Result<String, CliError> {
    let (loaded, s) = solve_args(g, objective)?;
    let c = match (config, eps) {
        (_, true) => Vec::new(),
        (Some(t), false) => config_of(&loaded.game, t)?,
        (None, false) => return Err(CliError::Usage("give a configuration or --eps".into())),
    };
    Ok(if s.member(&c) { "inside\n" } else { "outside\n" }.into())
}

fn cmd_strategy(game: &Path, file: &Path) -> Result<String, CliError> {
    let loaded = load(game)?;
    let text = fs::read_to_string(file).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", file.display())))?;
    let s = RegularStrategy::parse(&text, &loaded.game)?;
    s.validate(&loaded.game)?;
    Ok(s.serialize(&loaded.game))
}

fn internal_goal(s: &Solved) -> Goal {
    if s.pipeline.has_bottom() || s.variant == Variant::T {
        Goal::T
    } else {
        Goal::TEps
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    g: &GameArgs,
    objective: ObjectiveArg,
    start: &str,
    runs: u64,
    max_steps: u64,
    seed: u64,
) -> Result<String, CliError> {
    let (loaded, s) = solve_args(g, objective)?;
    let start = s.pipeline.lift(&config_of(&loaded.game, start)?);
    let ig = &s.pipeline.internal;
    let other = match s.internal_strategy.player {
        Owner::Box => Owner::Diamond,
        _ => Owner::Box,
    };
    let uniform = RegularStrategy::uniform(ig, other);
    let players = match other {
        Owner::Diamond => Players {
            sigma: &s.internal_strategy,
            pi: &uniform,
        },
        _ => Players {
            sigma: &uniform,
            pi: &s.internal_strategy,
        },
    };
    let stats = simulate(ig, &players, &start, runs, max_steps, seed, internal_goal(&s));
    Ok(format!("{stats}\n"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_oracle(
    g: &GameArgs,
    start: &str,
    height: usize,
    iters: usize,
    mode: ModeArg,
    exact: bool,
    state_cap: usize,
) -> Result<String, CliError> {
    let loaded = load(&g.game)?;
    let variant: Variant = g.variant.into();
    let eps_goal = loaded.dfa.is_some() && variant == Variant::TEps;
    let p = Pipeline::new(&loaded.game, loaded.dfa.as_ref(), eps_goal);
    let user_start = config_of(&loaded.game, start)?;
    let c = p.lift(&user_start);
    let goal = if p.has_bottom() || variant == Variant::T {
        Goal::T
    } else {
        Goal::TEps
    };
    let extra = usize::from(p.has_bottom());
    let mode = match mode {
        ModeArg::Pess => Mode::Pessimistic,
        ModeArg::Opt => Mode::Optimistic,
        ModeArg::Both => Mode::Both,
    };
    let t = Truncation {
        height: height + extra,
        iters,
        mode,
        exact,
        goal,
        cap: state_cap,
    };
    let b = truncated_value_iteration(&p.internal, std::slice::from_ref(&c), t)?;
    let (lo, hi) = &b.per_config[&c];
    let mut line = format!(
        "config={}",
        if user_start.is_empty() {
            "eps".to_string()
        } else {
            loaded.game.fmt_config(&user_start)
        }
    );
    let show = |n: &Num| n.to_string();
    if let Some(lo) = lo {
        line.push_str(&format!(" lower={}", show(lo)));
    }
    if let Some(hi) = hi {
        line.push_str(&format!(" upper={}", show(hi)));
    }
    line.push_str(&format!(" height={height} iters={iters} mode={}\n", mode.keyword()));
    Ok(line)
}

/// Configurations over `n` symbols up to the longest length keeping the
/// total below `budget`.
fn all_configs(n: usize, max_len: usize, budget: usize) -> Vec<Config> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Config> = vec![Vec::new()];
    for _ in 0..max_len {
        if out.len() + layer.len() * n > budget {
            break;
        }
        layer = layer
            .iter()
            .flat_map(|c| (0..n).map(move |x| [vec![x], c.clone()].concat()))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn cmd_validate(g: &GameArgs, seed: u64) -> Result<String, CliError> {
    let loaded = load(&g.game)?;
    let game = &loaded.game;
    let variant: Variant = g.variant.into();
    let solve_o = |o: Objective| solve(game, loaded.dfa.as_ref(), o, variant, g.cap);
    let pos = solve_o(Objective::Pos)?;
    let zero = solve_o(Objective::Zero)?;
    let one = solve_o(Objective::One)?;
    let less = solve_o(Objective::Less1)?;
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| {
        if ok {
            lines.push(format!("PASS {name}"));
        } else {
            lines.push(format!("FAIL {name}: {detail}"));
            failed.push(name.to_string());
        }
    };

    let configs = all_configs(game.len(), 6, 200_000);
    for (name, a, b) in [
        ("partition-pos-zero", &pos, &zero),
        ("partition-one-less1", &one, &less),
    ] {
        let auto = a.region.complement().equal(&b.region).unwrap_or(false);
        let bad = configs.iter().find(|c| a.member(c) == b.member(c));
        check(
            name,
            auto && bad.is_none(),
            match bad {
                Some(c) => format!("configuration `{}`", game.fmt_config(c)),
                None => "automata are not complements".into(),
            },
        );
    }
    let d = one.single_symbol_members();
    let a0 = pos.single_symbol_members();
    check(
        "one-within-pos",
        d.is_subset(&a0),
        names(game, &d.difference(&a0).copied().collect()),
    );
    let z = zero.single_symbol_members();
    let c = less.single_symbol_members();
    check(
        "zero-within-less1",
        z.is_subset(&c),
        names(game, &z.difference(&c).copied().collect()),
    );

    if let Some(sol) = &one.one {
        let n = sol.bar.len() / 2;
        let bad: SymSet = sol
            .trace
            .final_w
            .iter()
            .copied()
            .filter(|&x| x < n && !sol.trace.final_u.contains(&(x + n)))
            .collect();
        check("twin-coherence", bad.is_empty(), names(&sol.bar, &bad));
    }

    for s in [&pos, &zero, &one, &less] {
        let name = format!("strategy-{}", s.objective.keyword());
        let r = s.strategy.validate(game);
        check(&name, r.is_ok(), r.err().map(|e| e.to_string()).unwrap_or_default());
    }

    if loaded.dfa.is_none() && variant == Variant::T {
        let ig = &pos.pipeline.internal;
        let sol = pos.zero.as_ref().unwrap();
        let h = 2 * ig.len() + 2;
        let mut bad = Vec::new();
        for x in 0..ig.len() {
            let arena = Arena::build(ig, &[vec![x]], h, Goal::T, None, None, DEFAULT_STATE_CAP)?;
            let positive = arena.positive(Some(500))[arena.node_of(&[x]).unwrap()];
            if positive != sol.ab.a.contains(&x) {
                bad.push(ig.sym_name(x).to_string());
            }
        }
        check("pos-oracle", bad.is_empty(), bad.join(" "));

        let mut bad = Vec::new();
        if smd_count(ig, Owner::Diamond) <= 10_000 {
            for &x in &sol.ab.a {
                for pi in all_smd(ig, Owner::Diamond) {
                    let n = ig.len();
                    match bounded_path_to_target(ig, &[x], &pi, 2 * n) {
                        Some(d) if d <= 1usize << (2 * n).min(60) => {}
                        _ => bad.push(ig.sym_name(x).to_string()),
                    }
                }
            }
            bad.dedup();
        }
        check("pos-short-paths", bad.is_empty(), bad.join(" "));

        let ig = &less.pipeline.internal;
        let mut refuted = Vec::new();
        for &x in &less.single_symbol_members() {
            for h in 1..=20 {
                match optimistic_below_one(ig, &less.internal_strategy, &[x], h, Goal::T, 200_000) {
                    Ok(true) => break,
                    Ok(false) => {
                        let arena =
                            Arena::build(ig, &[vec![x]], h, Goal::T, None, Some(&less.internal_strategy), 200_000)?;
                        if arena.almost_sure(false)[arena.node_of(&[x]).unwrap()] {
                            refuted.push(ig.sym_name(x).to_string());
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        }
        check("less1-attack", refuted.is_empty(), refuted.join(" "));

        let ig = &one.pipeline.internal;
        let uniform = RegularStrategy::uniform(ig, Owner::Diamond);
        let players = Players {
            sigma: &one.internal_strategy,
            pi: &uniform,
        };
        let mut lost = Vec::new();
        for &x in &one.single_symbol_members() {
            let st = simulate(ig, &players, &[x], 500, 10_000, seed, Goal::T);
            if st.misses > 0 {
                lost.push(ig.sym_name(x).to_string());
            }
        }
        check("one-simulation", lost.is_empty(), lost.join(" "));
    }

    let mut text = lines.join("\n");
    text.push('\n');
    if failed.is_empty() {
        Ok(text)
    } else {
        print!("{text}");
        Err(CliError::Validation(failed.join(", ")))
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Solve {
            game,
            objective,
            out,
            explain,
        } => cmd_solve(game, *objective, out.as_deref(), *explain),
        Command::Member {
            game,
            objective,
            config,
            eps,
        } => cmd_member(game, *objective, config.as_deref(), *eps),
        Command::Strategy { game, file } => cmd_strategy(game, file),
        Command::Simulate {
            game,
            objective,
            start,
            runs,
            max_steps,
            seed,
        } => cmd_simulate(game, *objective, start, *runs, *max_steps, *seed),
        Command::Oracle {
            game,
            start,
            height,
            iters,
            mode,
            exact,
            state_cap,
        } => cmd_oracle(game, start, *height, *iters, *mode, *exact, *state_cap),
        Command::Validate { game, seed } => cmd_validate(game, *seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
