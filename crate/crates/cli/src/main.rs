//! `cloudtrust` command-line front end.
//!
//! Exit codes: 0 on success, 1 for bad input (arguments, configs, fixtures,
//! unknown entities), 2 for filesystem failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cloudtrust::chain::{discover_chains, resolve_in_graph, TrustGraph};
use cloudtrust::render::decimal4;
use cloudtrust::sim::{run_with, trace_to_csv, RunOptions, ScenarioConfig};
use cloudtrust::store::TrustTables;
use cloudtrust::trust::{
    chain_trust, classify_level, DecayParams, ReputationFactor, TrustDegree,
    DEFAULT_MAX_CHAIN_LENGTH,
};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Io { .. } => 2,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "cloudtrust",
    version,
    about = "Trust evaluation for cloud federations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write the trace and per-entity table snapshots.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        max_len: Option<usize>,
        /// Also write the graph behind every trace row to graphs/event_<n>.json.
        #[arg(long)]
        graphs: bool,
    },
    /// Resolve the trust degree of TARGET from SOURCE over a graph fixture.
    Trust {
        graph: PathBuf,
        source: String,
        target: String,
        service: String,
        #[arg(long, default_value_t = DEFAULT_MAX_CHAIN_LENGTH)]
        max_len: usize,
    },
    /// List every trust chain from SOURCE to TARGET with its weight and value.
    Chains {
        graph: PathBuf,
        source: String,
        target: String,
        service: String,
        #[arg(long, default_value_t = DEFAULT_MAX_CHAIN_LENGTH)]
        max_len: usize,
    },
    /// Map a trust degree to its level.
    Classify { td: f64 },
    /// Summarise a table snapshot.
    Inspect {
        snapshot: PathBuf,
        /// Also show decayed direct trust at this time (no reputation bonus).
        #[arg(long)]
        t_now: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        k: u32,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cloudtrust: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            tau,
            k,
            max_len,
            graphs,
        } => {
            let mut cfg = ScenarioConfig::from_json(&read(&config)?).map_err(input)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if tau.is_some() || k.is_some() {
                cfg.decay =
                    DecayParams::new(k.unwrap_or(cfg.decay.k()), tau.unwrap_or(cfg.decay.tau()))
                        .map_err(input)?;
            }
            if let Some(max_len) = max_len {
                cfg.max_chain_length = max_len;
            }
            cmd_run(&cfg, &out, graphs)
        }
        Command::Trust {
            graph,
            source,
            target,
            service,
            max_len,
        } => {
            let graph = load_graph(&graph)?;
            let r = resolve_in_graph(&graph, &source, &target, &service, max_len).map_err(input)?;
            println!(
                "td={} level={} path={}",
                decimal4(r.td.value()),
                classify_level(r.td).numeral(),
                r.path.as_str()
            );
            Ok(())
        }
        Command::Chains {
            graph,
            source,
            target,
            service,
            max_len,
        } => {
            let graph = load_graph(&graph)?;
            for id in [&source, &target] {
                if !graph.contains_node(id) {
                    return Err(input(format!("unknown entity: {id}")));
                }
            }
            for chain in
                discover_chains(&graph, &source, &target, &service, max_len).map_err(input)?
            {
                let rt = chain_trust(&chain).map_err(input)?;
                println!(
                    "{} w={} rt={}",
                    chain.nodes().join(">"),
                    decimal4(chain.total_weight()),
                    decimal4(rt.value())
                );
            }
            Ok(())
        }
        Command::Classify { td } => {
            let level = classify_level(TrustDegree::new(td).map_err(input)?);
            println!("level={} label={}", level.numeral(), level.label());
            Ok(())
        }
        Command::Inspect {
            snapshot,
            t_now,
            tau,
            k,
        } => {
            let tables = TrustTables::restore(&read(&snapshot)?).map_err(input)?;
            let params = DecayParams::new(k, tau).map_err(input)?;
            cmd_inspect(&tables, t_now.map(|t| (t, params)))
        }
    }
}

fn cmd_run(cfg: &ScenarioConfig, out: &Path, graphs: bool) -> Result<()> {
    // Entity ids become file names; refuse anything that could escape `out`.
    if let Some(bad) = cfg.entities.iter().find(|e| !safe_file_stem(&e.id)) {
        return Err(input(format!(
            "entity id {:?} is not usable as a file name",
            bad.id
        )));
    }
    let output = run_with(
        cfg,
        RunOptions {
            record_graphs: graphs,
        },
    )
    .map_err(input)?;
    let csv = trace_to_csv(&output.trace).map_err(input)?;

    create_dir(out)?;
    write(&out.join("trace.csv"), &csv)?;
    let tables_dir = out.join("tables");
    create_dir(&tables_dir)?;
    for (id, tables) in &output.tables {
        write(&tables_dir.join(format!("{id}.json")), &tables.snapshot())?;
    }
    if graphs {
        let graphs_dir = out.join("graphs");
        create_dir(&graphs_dir)?;
        for snap in &output.graphs {
            write(
                &graphs_dir.join(format!("event_{}.json", snap.event)),
                &snap.graph.to_json(),
            )?;
        }
    }
    eprintln!(
        "wrote {} trace rows to {}",
        output.trace.len(),
        out.display()
    );
    Ok(())
}

fn cmd_inspect(tables: &TrustTables, decayed: Option<(f64, DecayParams)>) -> Result<()> {
    println!("owner={}", tables.owner());
    for ((trustee, service), entry) in tables.direct.entries() {
        let mut line = format!(
            "direct {trustee} {service} n={} n_p={} mean={} last={}",
            entry.n_total(),
            entry.n_positive(),
            entry.mean_score().map_or("-".into(), decimal4),
            entry.last_time().map_or("-".into(), decimal4),
        );
        if let Some((t_now, params)) = decayed {
            let td = tables
                .direct
                .direct_trust_at(trustee, service, t_now, params, ReputationFactor::NONE)
                .map_err(input)?;
            if let Some(td) = td {
                line.push_str(&format!(" dt={}", decimal4(td.value())));
            }
        }
        println!("{line}");
    }
    for (service, peer, entry) in tables.recommended.entries() {
        println!(
            "recommended {service} {peer} td={} updated_at={}",
            entry.td.map_or("-".into(), |td| decimal4(td.value())),
            decimal4(entry.updated_at)
        );
    }
    Ok(())
}

fn safe_file_stem(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn load_graph(path: &Path) -> Result<TrustGraph> {
    TrustGraph::from_json(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}
