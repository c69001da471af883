use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use risklab::agents::{AgentDescriptor, AgentSpec, LlmSettings};
use risklab::estimation::ModelId;
use risklab::pipeline::{self, GroupInput, RunConfig};
use risklab::{par, Error};

#[derive(Parser)]
#[command(
    name = "risklab",
    version,
    about = "Gambling-and-happiness task runner and model-fitting pipeline"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; 1 runs every loop sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Stop at the first failed session or fit.
    #[arg(long, global = true)]
    fail_fast: bool,
    /// Chat-completions base URL for llm agents.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true)]
    max_retries: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the 90-trial task file.
    GenTask {
        /// Output path; defaults to task.json in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configured agent through the task.
    Run {
        #[arg(long)]
        task: Option<PathBuf>,
        #[arg(long)]
        sessions: Option<usize>,
        /// Extra agent as JSON, e.g. '{"label":"ev","kind":"ev_max"}'.
        #[arg(long = "agent")]
        agents: Vec<String>,
        /// Keep the task file's probe schedule in every session.
        #[arg(long)]
        fixed_probes: bool,
    },
    /// Fit the choice and affect models to every transcript.
    Fit {
        #[arg(long)]
        starts: Option<usize>,
        /// Comma-separated model list, e.g. cM1,cM3,mM1.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
    },
    /// Summed-BIC comparison tables per model space.
    Compare,
    /// Group statistics over behaviour and fitted parameters.
    Stats {
        #[arg(long)]
        human_group: Option<String>,
        /// Extra group values as LABEL:MEASURE=PATH, from an agent_id,value CSV.
        #[arg(long = "group-csv")]
        group_csv: Vec<String>,
        #[arg(long)]
        bootstrap_iters: Option<usize>,
        #[arg(long)]
        welch: bool,
    },
    /// Markdown report assembled from the CSV outputs.
    Report,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation { .. } | Error::InvalidArgument(_) | Error::Json(_) | Error::Csv(_) => 1,
        Error::SessionAborted { source, .. } if source.is_remote() => 3,
        _ => 2,
    }
}

fn parse_group_csv(s: &str) -> Result<GroupInput, Error> {
    let bad = || Error::InvalidArgument(format!("expected LABEL:MEASURE=PATH, got {s:?}"));
    let (head, path) = s.split_once('=').ok_or_else(bad)?;
    let (label, measure) = head.split_once(':').ok_or_else(bad)?;
    Ok(GroupInput {
        label: label.to_string(),
        measure: measure.to_string(),
        path: path.into(),
    })
}

fn build_config(g: &Global, command: &Command) -> Result<RunConfig, Error> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(d) = &g.out_dir {
        cfg.out_dir = d.clone();
    }
    if g.jobs.is_some() {
        cfg.jobs = g.jobs;
    }
    cfg.fail_fast |= g.fail_fast;

    match command {
        Command::GenTask { out } => {
            if out.is_some() {
                cfg.task = out.clone();
            }
        }
        Command::Run {
            task,
            sessions,
            agents,
            fixed_probes,
        } => {
            if task.is_some() {
                cfg.task = task.clone();
            }
            if let Some(n) = sessions {
                cfg.sessions_per_agent = *n;
            }
            cfg.fixed_probes |= fixed_probes;
            for a in agents {
                let spec: AgentSpec = serde_json::from_str(a)
                    .map_err(|e| Error::InvalidArgument(format!("--agent {a:?}: {e}")))?;
                cfg.agents.push(spec);
            }
            let has_llm = cfg
                .agents
                .iter()
                .any(|a| matches!(a.descriptor, AgentDescriptor::Llm(_)));
            if !has_llm {
                if let (Some(endpoint), Some(model)) = (&g.endpoint, &g.model) {
                    cfg.agents.push(AgentSpec {
                        label: model.replace(['/', '\\', '|'], "_"),
                        descriptor: AgentDescriptor::Llm(LlmSettings::new(
                            endpoint.clone(),
                            model.clone(),
                        )),
                    });
                }
            }
        }
        Command::Fit { starts, models } => {
            if let Some(n) = starts {
                cfg.n_starts = *n;
            }
            if let Some(list) = models {
                let parsed = list
                    .iter()
                    .map(|m| m.parse::<ModelId>())
                    .collect::<Result<Vec<_>, _>>()?;
                cfg.choice_models = parsed
                    .iter()
                    .filter_map(|m| match m {
                        ModelId::Choice(c) => Some(*c),
                        ModelId::Affect(_) => None,
                    })
                    .collect();
                cfg.affect_models = parsed
                    .iter()
                    .filter_map(|m| match m {
                        ModelId::Affect(a) => Some(*a),
                        ModelId::Choice(_) => None,
                    })
                    .collect();
            }
        }
        Command::Stats {
            human_group,
            group_csv,
            bootstrap_iters,
            welch,
        } => {
            if human_group.is_some() {
                cfg.human_group = human_group.clone();
            }
            for s in group_csv {
                cfg.group_inputs.push(parse_group_csv(s)?);
            }
            if let Some(n) = bootstrap_iters {
                cfg.bootstrap_iters = *n;
            }
            cfg.welch |= welch;
        }
        Command::Compare | Command::Report => {}
    }

    for a in &mut cfg.agents {
        if let AgentDescriptor::Llm(s) = &mut a.descriptor {
            if let Some(e) = &g.endpoint {
                s.endpoint = e.clone();
            }
            if let Some(m) = &g.model {
                s.model_name = m.clone();
            }
            if let Some(t) = g.temperature {
                s.temperature = t;
            }
            if let Some(r) = g.max_retries {
                s.max_retries = r;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<u8, Error> {
    let cfg = build_config(&cli.global, &cli.command)?;
    if let Some(n) = cfg.jobs {
        par::configure_threads(n);
    }
    match &cli.command {
        Command::GenTask { .. } => {
            let r = pipeline::cmd_gen_task(&cfg)?;
            let counts: Vec<String> = r
                .per_type
                .iter()
                .map(|(t, n)| format!("{} {n}", t.as_str()))
                .collect();
            println!(
                "wrote {} ({}; {} probes)",
                r.path.display(),
                counts.join(", "),
                r.probes
            );
        }
        Command::Run { .. } => {
            let r = pipeline::cmd_run(&cfg)?;
            println!("wrote {} sessions to {}", r.written, r.path.display());
            for a in &r.aborted {
                eprintln!("aborted {} session {}: {}", a.label, a.session, a.error);
            }
            if r.aborted.iter().any(|a| a.is_remote()) {
                return Ok(3);
            }
            if !r.aborted.is_empty() {
                return Ok(2);
            }
        }
        Command::Fit { .. } => {
            let r = pipeline::cmd_fit(&cfg)?;
            println!("wrote {} fits to {}", r.fits.len(), r.path.display());
            for s in &r.skipped {
                eprintln!(
                    "skipped {} session {} {}: {}",
                    s.group, s.session, s.model, s.reason
                );
            }
        }
        Command::Compare => {
            let r = pipeline::cmd_compare(&cfg)?;
            for (space, t) in [("choice", &r.choice), ("affect", &r.affect)] {
                if let Some(t) = t {
                    println!("{space} winner: {}", t.winner);
                }
            }
        }
        Command::Stats { .. } => {
            let r = pipeline::cmd_stats(&cfg)?;
            println!("wrote {} statistics rows", r.rows.len());
            for n in &r.notes {
                eprintln!("note: {n}");
            }
        }
        Command::Report => {
            let p = pipeline::cmd_report(&cfg)?;
            println!("wrote {}", p.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
