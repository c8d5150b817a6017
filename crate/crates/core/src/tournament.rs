//! Seeded round-robin tournaments, summary metrics and output files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    generate_random_linear_domain_sizes, generate_split_the_pie, opposition, pareto_set,
    NegotiationDomain, OppositionMeasure,
};
use crate::error::{Error, Result};
use crate::io::load_domain;
use crate::protocol::{run_session, SessionConfig, SessionResult, Status};
use crate::seed::mix;
use crate::strategy::StrategySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSource {
    File {
        path: PathBuf,
    },
    SplitThePie {
        offers: usize,
    },
    RandomLinear {
        issue_sizes: Vec<usize>,
        seed: u64,
        opposition_hint: f64,
    },
}

impl DomainSource {
    pub fn name(&self) -> String {
        match self {
            DomainSource::File { path } => path.file_stem().map_or_else(
                || path.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            ),
            DomainSource::SplitThePie { offers } => format!("split_the_pie_{offers}"),
            DomainSource::RandomLinear {
                issue_sizes, seed, ..
            } => {
                let sizes: Vec<String> = issue_sizes.iter().map(|s| s.to_string()).collect();
                format!("random_{}_{seed}", sizes.join("x"))
            }
        }
    }

    pub fn load(&self) -> Result<NegotiationDomain> {
        match self {
            DomainSource::File { path } => load_domain(path),
            DomainSource::SplitThePie { offers } => generate_split_the_pie(*offers),
            DomainSource::RandomLinear {
                issue_sizes,
                seed,
                opposition_hint,
            } => generate_random_linear_domain_sizes(issue_sizes, *seed, *opposition_hint),
        }
    }
}

fn default_sessions() -> usize {
    1
}

fn default_swap() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TournamentConfig {
    pub domains: Vec<DomainSource>,
    pub strategies: Vec<String>,
    #[serde(default = "default_sessions")]
    pub sessions_per_pairing: usize,
    /// Deadline, round cap, delays and think time; its seed is ignored.
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default)]
    pub base_seed: u64,
    /// Run every pairing in both seat orders.
    #[serde(default = "default_swap")]
    pub swap_sides: bool,
}

impl TournamentConfig {
    /// Reads a JSON config; relative domain paths are taken relative to the
    /// config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config: TournamentConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut config.domains {
            if let DomainSource::File { path } = d {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Ok(config)
    }

    pub fn check(&self) -> Result<Vec<StrategySpec>> {
        if self.domains.is_empty() || self.strategies.is_empty() || self.sessions_per_pairing == 0 {
            return Err(Error::Config(
                "need at least one domain, one strategy and one session".into(),
            ));
        }
        self.session.check()?;
        self.strategies
            .iter()
            .map(|s| StrategySpec::parse(s))
            .collect()
    }
}

/// One session of a tournament.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub domain: String,
    pub domain_index: usize,
    /// Spec of the agent in seat 1.
    pub strategy_a: String,
    pub strategy_b: String,
    pub seed: u64,
    pub status: Status,
    pub payoffs: [f64; 2],
    /// Undiscounted utilities of the agreement.
    pub utilities: Option<[f64; 2]>,
    pub time: Option<f64>,
    pub rounds: usize,
    pub pareto: bool,
    pub violator: Option<usize>,
}

/// Seed of one session: the base seed mixed with the domain, the pairing,
/// the repetition and the seat order.
pub fn session_seed(
    base: u64,
    domain: usize,
    pairing: usize,
    session: usize,
    swapped: bool,
) -> u64 {
    mix(
        base,
        &[
            domain as u64,
            pairing as u64,
            session as u64,
            swapped as u64,
        ],
    )
}

struct Job {
    domain: usize,
    seats: [usize; 2],
    seed: u64,
}

fn jobs(config: &TournamentConfig) -> Vec<Job> {
    let n = config.strategies.len();
    let mut out = Vec::new();
    for domain in 0..config.domains.len() {
        let mut pairing = 0;
        for i in 0..n {
            for j in i..n {
                for session in 0..config.sessions_per_pairing {
                    let orders: &[bool] = if config.swap_sides {
                        &[false, true]
                    } else {
                        &[false]
                    };
                    for &swapped in orders {
                        let seats = if swapped { [j, i] } else { [i, j] };
                        let seed =
                            session_seed(config.base_seed, domain, pairing, session, swapped);
                        out.push(Job {
                            domain,
                            seats,
                            seed,
                        });
                    }
                }
                pairing += 1;
            }
        }
    }
    out
}

/// Plays one session between two specs with a derived seed.
pub fn play_session(
    domain: &NegotiationDomain,
    a: &StrategySpec,
    b: &StrategySpec,
    session: &SessionConfig,
    seed: u64,
) -> Result<SessionResult> {
    let config = SessionConfig {
        seed,
        ..session.clone()
    };
    let mut agent1 = a.build(domain, 1, config.deadline, seed)?;
    let mut agent2 = b.build(domain, 2, config.deadline, seed)?;
    run_session(domain, agent1.as_mut(), agent2.as_mut(), &config)
}

fn record(
    name: &str,
    index: usize,
    domain: &NegotiationDomain,
    pareto: &[usize],
    a: &str,
    b: &str,
    seed: u64,
    r: &SessionResult,
) -> MatchRecord {
    let o = &r.outcome;
    MatchRecord {
        domain: name.to_string(),
        domain_index: index,
        strategy_a: a.to_string(),
        strategy_b: b.to_string(),
        seed,
        status: o.status,
        payoffs: o.payoffs,
        utilities: o.accepted_offer.map(|id| domain.vector(id)),
        time: o.agreement_time,
        rounds: r.rounds(),
        pareto: o
            .accepted_offer
            .is_some_and(|id| pareto.binary_search(&id).is_ok()),
        violator: o.violator,
    }
}

/// Loads every domain with its display name.
pub fn load_domains(config: &TournamentConfig) -> Result<Vec<(String, NegotiationDomain)>> {
    config
        .domains
        .iter()
        .map(|d| Ok((d.name(), d.load()?)))
        .collect()
}

/// Round robin over all strategy pairs, self-play included. Sessions run in
/// parallel; records come back sorted by seed, then by enumeration order.
pub fn run_tournament(config: &TournamentConfig) -> Result<Vec<MatchRecord>> {
    let specs = config.check()?;
    let domains = load_domains(config)?;
    let fronts: Vec<Vec<usize>> = domains
        .iter()
        .map(|(_, d)| {
            let mut p = pareto_set(d);
            p.sort_unstable();
            p
        })
        .collect();
    let jobs = jobs(config);
    let mut records = jobs
        .par_iter()
        .map(|job| {
            let (name, domain) = &domains[job.domain];
            let [i, j] = job.seats;
            let result = play_session(domain, &specs[i], &specs[j], &config.session, job.seed)?;
            Ok(record(
                name,
                job.domain,
                domain,
                &fronts[job.domain],
                &specs[i].text,
                &specs[j].text,
                job.seed,
                &result,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    // stable: equal seeds keep enumeration order
    records.sort_by_key(|r| r.seed);
    Ok(records)
}

/// Re-runs the session behind `record`.
pub fn replay(
    config: &TournamentConfig,
    domains: &[(String, NegotiationDomain)],
    record: &MatchRecord,
) -> Result<SessionResult> {
    let a = StrategySpec::parse(&record.strategy_a)?;
    let b = StrategySpec::parse(&record.strategy_b)?;
    play_session(
        &domains[record.domain_index].1,
        &a,
        &b,
        &config.session,
        record.seed,
    )
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub sessions: usize,
    pub agreements: usize,
    pub agreement_rate: f64,
    pub mean_payoff: f64,
    /// Population standard deviation.
    pub std_payoff: f64,
    pub mean_agreement_time: Option<f64>,
    pub pareto_agreements: usize,
}

#[derive(Default)]
struct Acc {
    n: usize,
    agreements: usize,
    pareto: usize,
    sum: f64,
    sum_sq: f64,
    time: f64,
}

impl Acc {
    fn add(&mut self, payoff: f64, r: &MatchRecord, pareto: bool) {
        self.n += 1;
        self.sum += payoff;
        self.sum_sq += payoff * payoff;
        if r.status == Status::Agreement {
            self.agreements += 1;
            self.time += r.time.unwrap_or(0.0);
            self.pareto += pareto as usize;
        }
    }

    fn finish(&self) -> Stats {
        let n = self.n as f64;
        let mean = self.sum / n;
        Stats {
            sessions: self.n,
            agreements: self.agreements,
            agreement_rate: self.agreements as f64 / n,
            mean_payoff: mean,
            std_payoff: (self.sum_sq / n - mean * mean).max(0.0).sqrt(),
            mean_agreement_time: (self.agreements > 0).then(|| self.time / self.agreements as f64),
            pareto_agreements: self.pareto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingStats {
    pub strategy_a: String,
    pub strategy_b: String,
    /// Payoff statistics for each seat.
    pub seat_a: Stats,
    pub seat_b: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainStats {
    pub name: String,
    pub size: usize,
    /// Opposition under each measure, when the domain is normalized.
    pub opposition: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// Per strategy over both seats; self-play counts both agents.
    pub strategies: BTreeMap<String, Stats>,
    pub pairings: Vec<PairingStats>,
    pub domains: Vec<DomainStats>,
    /// Records whose stored Pareto flag disagrees with recomputation.
    pub inconsistent_pareto_flags: usize,
}

/// Aggregates `records`. Pareto flags are recomputed from the domains.
pub fn compute_metrics(
    records: &[MatchRecord],
    domains: &[(String, NegotiationDomain)],
) -> Result<MetricsSummary> {
    if records.is_empty() {
        return Err(Error::Precondition("no records to summarize".into()));
    }
    let fronts: Vec<Vec<usize>> = domains.iter().map(|(_, d)| pareto_set(d)).collect();
    let mut per_strategy: BTreeMap<String, Acc> = BTreeMap::new();
    let mut per_pair: BTreeMap<(String, String), [Acc; 2]> = BTreeMap::new();
    let mut inconsistent = 0;
    for r in records {
        let (_, domain) = domains.get(r.domain_index).ok_or_else(|| {
            Error::Precondition(format!(
                "record refers to unknown domain {}",
                r.domain_index
            ))
        })?;
        let pareto = match r.utilities {
            Some(u) => fronts[r.domain_index]
                .iter()
                .any(|&id| domain.vector(id) == u),
            None => false,
        };
        inconsistent += (pareto != r.pareto) as usize;
        per_strategy
            .entry(r.strategy_a.clone())
            .or_default()
            .add(r.payoffs[0], r, pareto);
        per_strategy
            .entry(r.strategy_b.clone())
            .or_default()
            .add(r.payoffs[1], r, pareto);
        let pair = per_pair
            .entry((r.strategy_a.clone(), r.strategy_b.clone()))
            .or_default();
        pair[0].add(r.payoffs[0], r, pareto);
        pair[1].add(r.payoffs[1], r, pareto);
    }
    let domains = domains
        .iter()
        .map(|(name, d)| DomainStats {
            name: name.clone(),
            size: d.size(),
            opposition: OppositionMeasure::ALL
                .iter()
                .map(|&m| opposition(d, m).map(|v| (m.name().to_string(), v)))
                .collect::<Result<BTreeMap<_, _>>>()
                .ok(),
        })
        .collect();
    Ok(MetricsSummary {
        strategies: per_strategy
            .into_iter()
            .map(|(k, v)| (k, v.finish()))
            .collect(),
        pairings: per_pair
            .into_iter()
            .map(|((a, b), [sa, sb])| PairingStats {
                strategy_a: a,
                strategy_b: b,
                seat_a: sa.finish(),
                seat_b: sb.finish(),
            })
            .collect(),
        domains,
        inconsistent_pareto_flags: inconsistent,
    })
}

pub const CSV_HEADER: [&str; 12] = [
    "domain",
    "strategy_a",
    "strategy_b",
    "seed",
    "status",
    "payoff_a",
    "payoff_b",
    "u_a",
    "u_b",
    "time",
    "rounds",
    "pareto",
];

pub fn write_csv<W: Write>(records: &[MatchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    for r in records {
        w.write_record([
            r.domain.clone(),
            r.strategy_a.clone(),
            r.strategy_b.clone(),
            r.seed.to_string(),
            r.status.as_str().to_string(),
            r.payoffs[0].to_string(),
            r.payoffs[1].to_string(),
            opt(r.utilities.map(|u| u[0])),
            opt(r.utilities.map(|u| u[1])),
            opt(r.time),
            r.rounds.to_string(),
            r.pareto.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<W: Write>(records: &[MatchRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<MatchRecord>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

/// Writes the records to `path` and, if given, the summary as JSON next to
/// it (`<path>.summary.json`).
pub fn emit(
    records: &[MatchRecord],
    summary: Option<&MetricsSummary>,
    format: OutputFormat,
    path: &Path,
) -> Result<()> {
    let file = std::io::BufWriter::new(fs::File::create(path)?);
    match format {
        OutputFormat::Csv => write_csv(records, file)?,
        OutputFormat::Jsonl => write_jsonl(records, file)?,
    }
    if let Some(s) = summary {
        let mut p = path.as_os_str().to_owned();
        p.push(".summary.json");
        fs::write(PathBuf::from(p), serde_json::to_string_pretty(s)? + "\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{outcome_of, DelayModel};

    fn config(strategies: &[&str]) -> TournamentConfig {
        TournamentConfig {
            domains: vec![DomainSource::SplitThePie { offers: 11 }],
            strategies: strategies.iter().map(|s| s.to_string()).collect(),
            sessions_per_pairing: 1,
            session: SessionConfig {
                deadline: 2.0,
                ..Default::default()
            },
            base_seed: 42,
            swap_sides: true,
        }
    }

    #[test]
    fn round_robin_counts() {
        let c = config(&["micro()", "timebased()"]);
        let records = run_tournament(&c).unwrap();
        assert_eq!(records.len(), 6);
        for s in ["micro()", "timebased()"] {
            assert!(records
                .iter()
                .any(|r| r.strategy_a == s && r.strategy_b == s));
        }
        let no_swap = TournamentConfig {
            swap_sides: false,
            ..c
        };
        assert_eq!(run_tournament(&no_swap).unwrap().len(), 3);
    }

    #[test]
    fn deterministic_output() {
        let c = config(&["micro()", "random(threshold=0.6)", "tft()"]);
        let csv = |records: &[MatchRecord]| {
            let mut buf = Vec::new();
            write_csv(records, &mut buf).unwrap();
            buf
        };
        assert_eq!(
            csv(&run_tournament(&c).unwrap()),
            csv(&run_tournament(&c).unwrap())
        );
    }

    #[test]
    fn records_replay_to_the_same_payoffs() {
        let c = config(&["micro()", "timebased(gamma=2)", "random(threshold=0.5)"]);
        let domains = load_domains(&c).unwrap();
        for r in run_tournament(&c).unwrap() {
            let replayed = replay(&c, &domains, &r).unwrap();
            let o = outcome_of(&replayed.history, &domains[0].1, &c.session).unwrap();
            assert_eq!(o.payoffs, r.payoffs);
            assert_eq!(replayed.rounds(), r.rounds);
        }
    }

    #[test]
    fn bad_spec_names_token() {
        let c = config(&["micro()", "timebased(betta=0.3)"]);
        let err = run_tournament(&c).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("betta"));
    }

    #[test]
    fn metrics_for_failures_and_single_agreement() {
        let domains = vec![(
            "pie".to_string(),
            generate_split_the_pie(11)
                .unwrap()
                .with_reservations(0.2, 0.3),
        )];
        let fail = MatchRecord {
            domain: "pie".into(),
            domain_index: 0,
            strategy_a: "x".into(),
            strategy_b: "y".into(),
            seed: 1,
            status: Status::Failure,
            payoffs: [0.2, 0.3],
            utilities: None,
            time: None,
            rounds: 4,
            pareto: false,
            violator: None,
        };
        let m = compute_metrics(&[fail.clone(), fail.clone()], &domains).unwrap();
        assert_eq!(m.strategies["x"].agreement_rate, 0.0);
        assert_eq!(m.strategies["x"].mean_payoff, 0.2);
        assert_eq!(m.strategies["y"].mean_payoff, 0.3);
        assert_eq!(m.inconsistent_pareto_flags, 0);

        let deal = MatchRecord {
            status: Status::Agreement,
            payoffs: [0.6, 0.4],
            utilities: Some([0.6, 0.4]),
            time: Some(1.5),
            pareto: true,
            ..fail
        };
        let m = compute_metrics(&[deal], &domains).unwrap();
        let x = &m.strategies["x"];
        assert_eq!(
            (x.mean_payoff, x.std_payoff, x.mean_agreement_time),
            (0.6, 0.0, Some(1.5))
        );
        assert_eq!(m.pairings[0].seat_b.mean_payoff, 0.4);
        assert_eq!(m.domains[0].opposition.as_ref().unwrap().len(), 3);
        assert!(compute_metrics(&[], &domains).is_err());
    }

    #[test]
    fn metrics_match_a_second_pass() {
        let c = config(&["micro()", "timebased(gamma=2)", "random(threshold=0.5)"]);
        let records = run_tournament(&c).unwrap();
        let domains = load_domains(&c).unwrap();
        let m = compute_metrics(&records, &domains).unwrap();
        assert_eq!(m.inconsistent_pareto_flags, 0);
        for (name, stats) in &m.strategies {
            let payoffs: Vec<f64> = records
                .iter()
                .flat_map(|r| {
                    let mut v = Vec::new();
                    if &r.strategy_a == name {
                        v.push(r.payoffs[0]);
                    }
                    if &r.strategy_b == name {
                        v.push(r.payoffs[1]);
                    }
                    v
                })
                .collect();
            let mean = payoffs.iter().sum::<f64>() / payoffs.len() as f64;
            let var =
                payoffs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / payoffs.len() as f64;
            assert_eq!(stats.sessions, payoffs.len());
            assert!((stats.mean_payoff - mean).abs() < 1e-12);
            assert!((stats.std_payoff - var.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn outputs() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");

        let mut c = config(&["micro()", "tft()"]);
        c.session.delay = DelayModel::Constant { value: 0.005 };
        let records = run_tournament(&c).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&records, &mut buf).unwrap();
        assert_eq!(read_jsonl(&buf[..]).unwrap(), records);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let summary = compute_metrics(&records, &load_domains(&c).unwrap()).unwrap();
        emit(&records, Some(&summary), OutputFormat::Csv, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("domain,strategy_a,strategy_b,seed,status,payoff_a,payoff_b,u_a,u_b,time,rounds,pareto\n"));
        assert!(dir.path().join("out.csv.summary.json").exists());
    }

    #[test]
    fn config_json() {
        let text = r#"{"domains":[{"kind":"split_the_pie","offers":5},{"kind":"random_linear","issue_sizes":[3,3],"seed":1,"opposition_hint":0.5}],
                       "strategies":["micro()"],"session":{"deadline":null,"max_rounds":50}}"#;
        let c: TournamentConfig = serde_json::from_str(text).unwrap();
        assert!(c.swap_sides);
        assert_eq!(c.sessions_per_pairing, 1);
        assert_eq!(run_tournament(&c).unwrap().len(), 4);
        assert!(serde_json::from_str::<TournamentConfig>(
            r#"{"domains":[],"strategies":[],"bogus":1}"#
        )
        .is_err());
    }
}
