//! Command-line front end over the structuring pipelines.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bpstruct::equivalence::run_set;
use bpstruct::error::Error;
use bpstruct::mdt::mdt;
use bpstruct::model::{ProcessModel, END_LABEL, START_LABEL};
use bpstruct::net::model_to_wfnet;
use bpstruct::org::{build_org, Org};
use bpstruct::restructure::{lift_deepest_rigid, structure_model, StructuringOptions};
use bpstruct::rpst::compute_rpst;
use bpstruct::synthesis::{folded_to_wfnet, synthesize};
use bpstruct::unfold::{unfold, UnfoldOptions};

#[derive(Parser)]
#[command(name = "bpstruct", version, about = "Maximal structuring of acyclic process models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
}

#[derive(Args)]
struct Guards {
    /// Cap on explicit state-space exploration.
    #[arg(long, default_value_t = bpstruct::net::DEFAULT_STATE_CAP)]
    max_states: usize,
    /// Cap on unfolding size.
    #[arg(long, default_value_t = bpstruct::unfold::DEFAULT_EVENT_CAP)]
    max_events: usize,
}

#[derive(Args)]
struct Dumps {
    /// Write the complete prefix of the deepest rigid (DOT).
    #[arg(long, value_name = "PATH")]
    dump_prefix: Option<PathBuf>,
    /// Write the ordering relations graph of the deepest rigid (DOT).
    #[arg(long, value_name = "PATH")]
    dump_org: Option<PathBuf>,
    /// Write the modular decomposition tree of the deepest rigid (DOT).
    #[arg(long, value_name = "PATH")]
    dump_mdt: Option<PathBuf>,
    /// Write the synthesized event structure (DOT).
    #[arg(long, value_name = "PATH")]
    dump_es: Option<PathBuf>,
    /// Write the simplified occurrence net (DOT).
    #[arg(long, value_name = "PATH")]
    dump_onet: Option<PathBuf>,
    /// Write the folded net (DOT).
    #[arg(long, value_name = "PATH")]
    dump_folded: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite the model into its maximally structured equivalent.
    Structure {
        input: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Write a JSON structuring report to this path.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        #[command(flatten)]
        guards: Guards,
        #[command(flatten)]
        dumps: Dumps,
    },
    /// Print the refined process structure tree with classifications.
    Analyze {
        input: PathBuf,
        #[command(flatten)]
        guards: Guards,
    },
    /// Print the complete prefix of the model's unfolding.
    Unfold {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        guards: Guards,
    },
    /// Print the ordering relations graph of the model's observable events.
    Org {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        guards: Guards,
    },
    /// Print the modular decomposition tree of the ordering relations graph.
    Mdt {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        guards: Guards,
    },
    /// Synthesize a process model from an ordering relations graph (JSON).
    Synth {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        dumps: Dumps,
    },
    /// Compare two models by their run sets; exit 1 when they differ.
    CheckEq {
        left: PathBuf,
        right: PathBuf,
        #[command(flatten)]
        guards: Guards,
    },
    /// Check model invariants and workflow-net soundness.
    Validate {
        input: PathBuf,
        #[command(flatten)]
        guards: Guards,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("BPSTRUCT_LOG")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Guard { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn read_model(path: &PathBuf) -> bpstruct::Result<ProcessModel> {
    let text = fs::read_to_string(path)?;
    ProcessModel::parse(&text)
}

fn emit(output: Option<&PathBuf>, text: &str) -> bpstruct::Result<()> {
    match output {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn write_rigid_dumps(m: &ProcessModel, guards: &Guards, dumps: &Dumps) -> bpstruct::Result<()> {
    let wanted = dumps.dump_prefix.is_some()
        || dumps.dump_org.is_some()
        || dumps.dump_mdt.is_some()
        || dumps.dump_es.is_some()
        || dumps.dump_onet.is_some()
        || dumps.dump_folded.is_some();
    if !wanted {
        return Ok(());
    }
    let Some(lifted) = lift_deepest_rigid(m)? else {
        return Err(Error::NotMappable(
            "model is well-structured; no rigid to dump intermediates for".into(),
        ));
    };
    let prefix = unfold(
        &model_to_wfnet(&lifted),
        UnfoldOptions { use_cutoffs: true, max_events: guards.max_events },
    )?;
    if let Some(p) = &dumps.dump_prefix {
        fs::write(p, prefix.to_dot())?;
    }
    let org = build_org(&prefix, &[START_LABEL, END_LABEL]);
    if let Some(p) = &dumps.dump_org {
        fs::write(p, org.to_dot())?;
    }
    if let Some(p) = &dumps.dump_mdt {
        let tree = mdt(&org.digraph());
        let labels = |v: usize| org.vertices[v].label.clone();
        fs::write(p, tree.to_dot(&labels))?;
    }
    write_synth_dumps(&org, dumps)
}

fn write_synth_dumps(org: &Org, dumps: &Dumps) -> bpstruct::Result<()> {
    if dumps.dump_es.is_none() && dumps.dump_onet.is_none() && dumps.dump_folded.is_none() {
        return Ok(());
    }
    let syn = synthesize(org, bpstruct::synthesis::DEFAULT_HISTORY_CAP)?;
    if let Some(p) = &dumps.dump_es {
        fs::write(p, syn.es.to_dot())?;
    }
    if let Some(p) = &dumps.dump_onet {
        fs::write(p, syn.simplified.to_dot())?;
    }
    if let Some(p) = &dumps.dump_folded {
        fs::write(p, folded_to_wfnet(&syn.folded)?.to_dot())?;
    }
    Ok(())
}

fn run(cmd: Command) -> bpstruct::Result<ExitCode> {
    match cmd {
        Command::Structure { input, output, format, report, guards, dumps } => {
            let m = read_model(&input)?;
            write_rigid_dumps(&m, &guards, &dumps)?;
            let opts = StructuringOptions {
                max_states: guards.max_states,
                max_events: guards.max_events,
                ..Default::default()
            };
            let (out, rep) = structure_model(&m, opts)?;
            let text = match format {
                Format::Json => out.to_json(),
                Format::Dot => out.to_dot(),
            };
            emit(output.as_ref(), &text)?;
            if let Some(p) = report {
                fs::write(p, rep.to_json())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { input, guards } => {
            let m = read_model(&input)?;
            let rpst = compute_rpst(&m);
            let sound = model_to_wfnet(&m).check_soundness(guards.max_states);
            print!("{}", rpst.render_indented());
            println!(
                "well-structured: {}; rigids: {}; sound: {}",
                bpstruct::rpst::is_well_structured(&rpst),
                rpst.rigid_count(),
                match &sound {
                    Ok(()) => "yes".to_string(),
                    Err(e) => format!("no ({e})"),
                }
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Unfold { input, format, guards } => {
            let m = read_model(&input)?;
            let prefix = unfold(
                &model_to_wfnet(&m),
                UnfoldOptions { use_cutoffs: true, max_events: guards.max_events },
            )?;
            let text = match format {
                Format::Json => prefix.to_json(),
                Format::Dot => prefix.to_dot(),
            };
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Org { input, format, guards } => {
            let m = read_model(&input)?;
            let prefix = unfold(
                &model_to_wfnet(&m),
                UnfoldOptions { use_cutoffs: true, max_events: guards.max_events },
            )?;
            let org = build_org(&prefix, &[]);
            let text = match format {
                Format::Json => org.to_json(),
                Format::Dot => org.to_dot(),
            };
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Mdt { input, format, guards } => {
            let m = read_model(&input)?;
            let prefix = unfold(
                &model_to_wfnet(&m),
                UnfoldOptions { use_cutoffs: true, max_events: guards.max_events },
            )?;
            let org = build_org(&prefix, &[]);
            if org.n() == 0 {
                return Err(Error::NotMappable("model has no observable events".into()));
            }
            let tree = mdt(&org.digraph());
            let labels = |v: usize| org.vertices[v].label.clone();
            let text = match format {
                Format::Json => tree.to_json(&labels),
                Format::Dot => tree.to_dot(&labels),
            };
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { input, format, dumps } => {
            let text = fs::read_to_string(&input)?;
            let org = Org::parse(&text)?;
            write_synth_dumps(&org, &dumps)?;
            let syn = synthesize(&org, bpstruct::synthesis::DEFAULT_HISTORY_CAP)?;
            let text = match format {
                Format::Json => syn.model.to_json(),
                Format::Dot => syn.model.to_dot(),
            };
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckEq { left, right, guards } => {
            let a = read_model(&left)?;
            let b = read_model(&right)?;
            let ra = run_set(&a, guards.max_events)?;
            let rb = run_set(&b, guards.max_events)?;
            if ra == rb {
                println!("equivalent: {} runs", ra.len());
                Ok(ExitCode::SUCCESS)
            } else {
                if let Some(w) = ra.difference(&rb).next() {
                    println!("not equivalent: run only in {}: {w}", left.display());
                } else if let Some(w) = rb.difference(&ra).next() {
                    println!("not equivalent: run only in {}: {w}", right.display());
                }
                Ok(ExitCode::from(1))
            }
        }
        Command::Validate { input, guards } => {
            let m = read_model(&input)?;
            m.validate()?;
            model_to_wfnet(&m).check_soundness(guards.max_states)?;
            println!("valid: {} nodes, {} arcs", m.nodes().len(), m.arcs().len());
            Ok(ExitCode::SUCCESS)
        }
    }
}
