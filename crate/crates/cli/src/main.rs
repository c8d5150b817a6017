use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use negotiation::domain::{
    generate_random_linear_domain_sizes, generate_split_the_pie, opposition, pareto_set,
    NegotiationDomain, OppositionMeasure,
};
use negotiation::game::{
    backward_induction, induced_normal_form, pure_nash_equilibria, select_symmetric_equilibrium,
    GameFile, MixedProfile, NormalFormGame, TurnTakingGame,
};
use negotiation::io::{domain_to_json, load_domain};
use negotiation::protocol::{DelayModel, HistoryEntry, SessionConfig};
use negotiation::strategy::StrategySpec;
use negotiation::tournament::{
    compute_metrics, emit, load_domains, play_session, run_tournament, OutputFormat,
    TournamentConfig,
};

#[derive(Parser)]
#[command(
    name = "negotiate",
    version,
    about = "Bilateral negotiation simulator and game analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a domain file.
    GenDomain {
        #[command(subcommand)]
        kind: DomainKind,
        /// Output file; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        reservation1: f64,
        #[arg(long, default_value_t = 0.0)]
        reservation2: f64,
        #[arg(long, default_value_t = 1.0)]
        discount1: f64,
        #[arg(long, default_value_t = 1.0)]
        discount2: f64,
    },
    /// Play one session and print the transcript.
    Run {
        /// Domain JSON file.
        domain: PathBuf,
        /// Strategy of agent 1, e.g. "timebased(beta=0.5)".
        agent1: String,
        /// Strategy of agent 2.
        agent2: String,
        /// Deadline in seconds; "inf" for none.
        #[arg(long, default_value = "10")]
        deadline: f64,
        #[arg(long)]
        max_rounds: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        starting_agent: usize,
        /// Fixed delay between actions instead of the default uniform one.
        #[arg(long)]
        delay: Option<f64>,
        /// Write the actions as CSV.
        #[arg(long)]
        history_csv: Option<PathBuf>,
        /// Only print the outcome line.
        #[arg(short, long)]
        quiet: bool,
    },
    /// Run a round-robin tournament from a JSON config.
    Tournament {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Skip writing `<output>.summary.json`.
        #[arg(long)]
        no_summary: bool,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the Pareto frontier and opposition of a domain.
    Analyze {
        domain: PathBuf,
        /// Print every offer instead of only the frontier.
        #[arg(long)]
        all: bool,
    },
    /// Equilibrium analysis of a game file.
    Nash { game: PathBuf },
}

#[derive(Subcommand)]
enum DomainKind {
    /// Single issue where agent 1 gets k/(n-1) of the pie.
    SplitThePie { offers: usize },
    /// Linear utilities with random weights and evaluations.
    Random {
        /// Options per issue, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// 0 aligned, 0.5 independent, 1 mirrored.
        #[arg(long, default_value_t = 0.5)]
        opposition: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

fn main() -> ExitCode {
    // exit quietly when piped into `head` and the like
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.chain().any(|c| {
                c.downcast_ref::<negotiation::Error>()
                    .is_some_and(negotiation::Error::is_config)
            });
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::GenDomain {
            kind,
            output,
            reservation1,
            reservation2,
            discount1,
            discount2,
        } => {
            let d = match kind {
                DomainKind::SplitThePie { offers } => generate_split_the_pie(offers)?,
                DomainKind::Random {
                    sizes,
                    seed,
                    opposition,
                } => generate_random_linear_domain_sizes(&sizes, seed, opposition)?,
            };
            let d = d
                .with_reservations(reservation1, reservation2)
                .with_discounts(discount1, discount2)?;
            let json = domain_to_json(&d);
            match output {
                Some(p) => {
                    fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?
                }
                None => print!("{json}"),
            }
        }
        Command::Run {
            domain,
            agent1,
            agent2,
            deadline,
            max_rounds,
            seed,
            starting_agent,
            delay,
            history_csv,
            quiet,
        } => {
            let d = read_domain(&domain)?;
            let a = StrategySpec::parse(&agent1)?;
            let b = StrategySpec::parse(&agent2)?;
            let mut config = SessionConfig {
                deadline,
                max_rounds,
                starting_agent,
                seed,
                ..Default::default()
            };
            if let Some(value) = delay {
                config.delay = DelayModel::Constant { value };
            }
            let r = play_session(&d, &a, &b, &config, seed)?;
            if !quiet {
                print_transcript(&d, &r.history.entries);
            }
            let o = &r.outcome;
            match o.accepted_offer {
                Some(id) => println!(
                    "agreement on {id} [{}] at t={:.4} after {} actions, payoffs {:.4} / {:.4}",
                    d.space().describe(id),
                    o.agreement_time.unwrap_or(0.0),
                    r.rounds(),
                    o.payoffs[0],
                    o.payoffs[1]
                ),
                None => println!(
                    "no agreement after {} actions, payoffs {:.4} / {:.4}",
                    r.rounds(),
                    o.payoffs[0],
                    o.payoffs[1]
                ),
            }
            if let Some(agent) = o.violator {
                println!("agent {agent} broke the protocol");
            }
            if let Some(path) = history_csv {
                write_history(&d, &r.history.entries, &path)?;
            }
        }
        Command::Tournament {
            config,
            output,
            format,
            no_summary,
            threads,
        } => {
            let cfg = TournamentConfig::load(&config)?;
            cfg.check()?;
            let pool = rayon_pool(threads)?;
            let records = pool.install(|| run_tournament(&cfg))?;
            let summary = if no_summary {
                None
            } else {
                Some(compute_metrics(&records, &load_domains(&cfg)?)?)
            };
            let format = match format {
                Format::Csv => OutputFormat::Csv,
                Format::Jsonl => OutputFormat::Jsonl,
            };
            emit(&records, summary.as_ref(), format, &output)?;
            let agreements = records.iter().filter(|r| r.utilities.is_some()).count();
            println!(
                "{} sessions, {agreements} agreements, written to {}",
                records.len(),
                output.display()
            );
            if let Some(s) = summary {
                println!(
                    "{:<48} {:>8} {:>10} {:>10}",
                    "strategy", "sessions", "agree", "payoff"
                );
                for (name, st) in &s.strategies {
                    println!(
                        "{name:<48} {:>8} {:>10.3} {:>10.4}",
                        st.sessions, st.agreement_rate, st.mean_payoff
                    );
                }
            }
        }
        Command::Analyze { domain, all } => {
            let d = read_domain(&domain)?;
            let front = pareto_set(&d);
            println!(
                "{} offers, {} on the Pareto frontier",
                d.size(),
                front.len()
            );
            println!(
                "reservation values {} / {}",
                d.reservation(1),
                d.reservation(2)
            );
            let shown: Vec<usize> = if all {
                (0..d.size()).collect()
            } else {
                front.clone()
            };
            println!(
                "{:>6}  {:>8}  {:>8}  {:>6}  offer",
                "id", "u1", "u2", "pareto"
            );
            for id in shown {
                let [u1, u2] = d.vector(id);
                let mark = if front.contains(&id) { "*" } else { "" };
                println!(
                    "{id:>6}  {u1:>8.4}  {u2:>8.4}  {mark:>6}  {}",
                    d.space().describe(id)
                );
            }
            for m in OppositionMeasure::ALL {
                match opposition(&d, m) {
                    Ok(v) => println!("opposition {:<16} {v:.4}", m.name()),
                    Err(e) => println!("opposition {:<16} n/a ({e})", m.name()),
                }
            }
        }
        Command::Nash { game } => {
            let text =
                fs::read_to_string(&game).with_context(|| format!("reading {}", game.display()))?;
            let parsed: GameFile = serde_json::from_str(&text).map_err(negotiation::Error::from)?;
            match parsed {
                GameFile::NormalForm(g) => print_normal_form(&g)?,
                GameFile::TurnTaking { root } => print_tree(&root)?,
            }
        }
    }
    Ok(())
}

fn read_domain(path: &Path) -> anyhow::Result<NegotiationDomain> {
    load_domain(path).with_context(|| format!("loading {}", path.display()))
}

fn rayon_pool(threads: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            bail!(negotiation::Error::Config(
                "--threads must be at least 1".into()
            ));
        }
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn print_transcript(d: &NegotiationDomain, entries: &[HistoryEntry]) {
    for e in entries {
        if let HistoryEntry::Action(a) = e {
            let [u1, u2] = d.vector(a.offer);
            println!(
                "t={:>9.4}  agent {}  {:<7}  {:>5} [{}]  u=({u1:.3}, {u2:.3})",
                a.time,
                a.agent,
                a.kind.as_str(),
                a.offer,
                d.space().describe(a.offer)
            );
        }
    }
}

fn write_history(
    d: &NegotiationDomain,
    entries: &[HistoryEntry],
    path: &Path,
) -> anyhow::Result<()> {
    let mut out = String::from("time,agent,action,offer,u1,u2\n");
    for e in entries {
        if let HistoryEntry::Action(a) = e {
            let [u1, u2] = d.vector(a.offer);
            out.push_str(&format!(
                "{},{},{},{},{u1},{u2}\n",
                a.time,
                a.agent,
                a.kind.as_str(),
                a.offer
            ));
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn print_normal_form(g: &NormalFormGame) -> anyhow::Result<()> {
    let cols = g.num_actions(2);
    print!("{:>12}", "");
    for c in 0..cols {
        print!(" {:>14}", g.label(2, c));
    }
    println!();
    for r in 0..g.num_actions(1) {
        print!("{:>12}", g.label(1, r));
        for c in 0..cols {
            let [a, b] = g.payoff(r, c);
            print!(" {:>14}", format!("{a}, {b}"));
        }
        println!();
    }
    let ne = pure_nash_equilibria(g);
    println!("pure Nash equilibria: {}", ne.len());
    for &(r, c) in &ne {
        let [a, b] = g.payoff(r, c);
        println!("  ({}, {}) -> ({a}, {b})", g.label(1, r), g.label(2, c));
    }
    let profiles: Vec<MixedProfile> = ne
        .iter()
        .map(|&(r, c)| MixedProfile::pure(g, r, c))
        .collect();
    if let Ok(sel) = select_symmetric_equilibrium(g, &profiles) {
        match (sel.strategy, sel.value) {
            (Some(s), Some(v)) => {
                let action = s.iter().position(|&p| p == 1.0).unwrap_or(0);
                println!(
                    "best symmetric pure equilibrium: both play {} with value {v}",
                    g.label(1, action)
                );
            }
            _ => println!("no symmetric pure equilibrium"),
        }
    }
    Ok(())
}

fn print_tree(t: &TurnTakingGame) -> anyhow::Result<()> {
    let spe = backward_induction(t);
    println!(
        "subgame perfect: player 1 {}, player 2 {}, payoff ({}, {})",
        spe.profile.label(t, 1),
        spe.profile.label(t, 2),
        spe.payoff[0],
        spe.payoff[1]
    );
    if spe.ties > 0 {
        println!("  {} ties broken toward the first action", spe.ties);
    }
    let (nf, _) = induced_normal_form(t)?;
    println!(
        "induced normal form ({} x {}):",
        nf.num_actions(1),
        nf.num_actions(2)
    );
    print_normal_form(&nf)
}
