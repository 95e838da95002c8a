//! `tabver`: execute programs over tables, synthesize and retrieve
//! logic-level evidence, and train/evaluate the graph verifier.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tabver::dsl::parse_program;
use tabver::exec::execute;
use tabver::graph::build_graph_from_programs;
use tabver::harness::{
    evaluate, gen_synthetic, load_dataset, load_tables, prepare_inputs, write_manifest,
    EvalOptions, Pipeline, PipelineConfig, Sample, SyntheticSpec,
};
use tabver::retrieval::retrieve;
use tabver::synth::{synthesize, ProgramSet};
use tabver::table::{load_table_file, Table};
use tabver::verifier::{
    load_checkpoint, save_checkpoint, train, EncoderStamp, Label, VerifierParams,
};

#[derive(Parser)]
#[command(name = "tabver", version, about = "Table-based fact verification with logic-level evidence")]
struct Cli {
    /// Configuration file (TOML); defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the seed of whatever the command randomizes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; defaults to stdout where applicable.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one program against a table and print its value.
    Exec {
        #[arg(long)]
        table: PathBuf,
        /// Program text, e.g. "count { all_rows }".
        #[arg(long)]
        program: String,
    },
    /// Enumerate labeled programs for a statement over a table.
    Synthesize {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        statement: String,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Apply the evidence rules to synthesize output.
    Retrieve {
        /// `label<TAB>program` lines; stdin when omitted.
        #[arg(long, name = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<usize>,
        #[arg(long)]
        max_evidence: Option<usize>,
    },
    /// Build the evidence graph and dump its adjacency.
    Graph {
        /// One program per line; stdin when omitted.
        #[arg(long, name = "in")]
        input: Option<PathBuf>,
    },
    /// Generate a balanced synthetic corpus with provable labels.
    GenSynthetic {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        /// Also emit a held-out manifest of this size.
        #[arg(long, default_value_t = 0)]
        heldout: usize,
    },
    /// Train the verifier on a manifest and write a checkpoint.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        tables: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Verify one statement against one table with a trained model.
    Verify {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        statement: String,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Evaluate a manifest and print the accuracy report.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        tables: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Machine-readable report JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    max_programs: Option<usize>,
    #[arg(long)]
    max_intermediates: Option<usize>,
    #[arg(long)]
    time_limit_ms: Option<u64>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Exec { table, program } => cmd_exec(&config, &table, &program),
        Command::Synthesize {
            table,
            statement,
            budget,
        } => cmd_synthesize(&config, &table, &statement, budget, cli.out.as_deref()),
        Command::Retrieve {
            input,
            threshold,
            max_evidence,
        } => cmd_retrieve(&config, input.as_deref(), threshold, max_evidence, cli.out.as_deref()),
        Command::Graph { input } => cmd_graph(input.as_deref(), cli.out.as_deref()),
        Command::GenSynthetic {
            out_dir,
            samples,
            heldout,
        } => cmd_gen_synthetic(&config, &out_dir, samples, heldout, cli.seed),
        Command::Train {
            manifest,
            tables,
            checkpoint,
            epochs,
        } => cmd_train(&config, &manifest, &tables, &checkpoint, epochs, cli.seed),
        Command::Verify {
            table,
            statement,
            checkpoint,
        } => cmd_verify(&config, &table, &statement, &checkpoint),
        Command::Eval {
            manifest,
            tables,
            checkpoint,
            report,
        } => cmd_eval(
            &config,
            &manifest,
            &tables,
            &checkpoint,
            cli.out.as_deref(),
            report.as_deref(),
        ),
    }
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
        }
        None => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            Ok(buf)
        }
    }
}

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, content).with_context(|| format!("writing {}", p.display()))?
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn load_one_table(config: &PipelineConfig, path: &Path) -> Result<Table> {
    load_table_file(path, config.runtime.delimiter)
        .with_context(|| format!("loading table {}", path.display()))
}

fn cmd_exec(config: &PipelineConfig, table: &Path, program: &str) -> Result<()> {
    let t = load_one_table(config, table)?;
    let p = parse_program(program)?;
    // executor errors are hard failures here, not discard signals
    let value = execute(&p, &t)?;
    println!("{value}");
    Ok(())
}

fn cmd_synthesize(
    config: &PipelineConfig,
    table: &Path,
    statement: &str,
    budget_args: BudgetArgs,
    out: Option<&Path>,
) -> Result<()> {
    let t = load_one_table(config, table)?;
    let mut budget = config.search_budget();
    if let Some(v) = budget_args.max_depth {
        budget.max_depth = v;
    }
    if let Some(v) = budget_args.max_programs {
        budget.max_programs = v;
    }
    if let Some(v) = budget_args.max_intermediates {
        budget.max_intermediates = v;
    }
    if let Some(v) = budget_args.time_limit_ms {
        budget.time_limit = std::time::Duration::from_millis(v);
    }
    let ps = synthesize(statement, &t, &budget);
    let mut text = String::new();
    for (p, label) in &ps.items {
        text.push_str(&format!("{label}\t{}\n", p.render()));
    }
    if ps.truncated {
        eprintln!("note: search budget exhausted; program set truncated");
    }
    write_output(out, &text)
}

fn parse_labeled_programs(text: &str) -> Result<ProgramSet> {
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, program) = line
            .split_once('\t')
            .ok_or_else(|| anyhow!("line {}: expected `label<TAB>program`", i + 1))?;
        let label = match label.trim() {
            "true" => true,
            "false" => false,
            other => bail!("line {}: bad label {other:?}", i + 1),
        };
        items.push((parse_program(program)?, label));
    }
    Ok(ProgramSet {
        items,
        statement: String::new(),
        table_id: String::new(),
        truncated: false,
    })
}

fn cmd_retrieve(
    config: &PipelineConfig,
    input: Option<&Path>,
    threshold: Option<usize>,
    max_evidence: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let ps = parse_labeled_programs(&read_input(input)?)?;
    let mut rc = config.retrieval_config();
    if let Some(v) = threshold {
        rc.negative_threshold = v;
    }
    if let Some(v) = max_evidence {
        rc.max_evidence = v;
    }
    let ev = retrieve(&ps, &rc);
    let c = ev.source_counts;
    let mut text = format!(
        "# selected={} after_decompose={} after_filter={}\n",
        c.selected, c.after_decompose, c.after_filter
    );
    for p in &ev.items {
        text.push_str(&p.render());
        text.push('\n');
    }
    write_output(out, &text)
}

fn cmd_graph(input: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let text = read_input(input)?;
    let mut programs = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        programs.push(parse_program(line)?);
    }
    let g = build_graph_from_programs(&programs)?;
    write_output(out, &g.dump())
}

fn cmd_gen_synthetic(
    config: &PipelineConfig,
    out_dir: &Path,
    samples: usize,
    heldout: usize,
    seed: Option<u64>,
) -> Result<()> {
    let seed = seed.unwrap_or(11);
    let tables_dir = out_dir.join("tables");
    std::fs::create_dir_all(&tables_dir)?;
    let mut emit = |name: &str, spec_samples: usize, spec_seed: u64| -> Result<usize> {
        let (samples, tables) = gen_synthetic(&SyntheticSpec {
            samples: spec_samples,
            seed: spec_seed,
            ..SyntheticSpec::default()
        });
        // distinct table namespaces per split
        let prefix = format!("{name}-");
        let samples: Vec<Sample> = samples
            .into_iter()
            .map(|mut s| {
                s.table_id = format!("{prefix}{}", s.table_id);
                s
            })
            .collect();
        for (id, table) in &tables {
            let path = tables_dir.join(format!("{prefix}{id}.csv"));
            std::fs::write(&path, table.to_delimited(config.runtime.delimiter))?;
        }
        write_manifest(&samples, &out_dir.join(format!("{name}.jsonl")))?;
        Ok(samples.len())
    };
    let n_train = emit("train", samples, seed)?;
    println!("wrote {n_train} training samples under {}", out_dir.display());
    if heldout > 0 {
        let n_held = emit("heldout", heldout, seed.wrapping_add(1200))?;
        println!("wrote {n_held} held-out samples");
    }
    Ok(())
}

fn load_split(
    config: &PipelineConfig,
    manifest: &Path,
    tables_dir: &Path,
) -> Result<(Vec<Sample>, HashMap<String, Table>)> {
    let samples = load_dataset(manifest, tables_dir)?;
    let tables = load_tables(&samples, tables_dir, config.runtime.delimiter)?;
    Ok((samples, tables))
}

fn cmd_train(
    config: &PipelineConfig,
    manifest: &Path,
    tables_dir: &Path,
    checkpoint: &Path,
    epochs: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let (samples, tables) = load_split(config, manifest, tables_dir)?;
    if samples.is_empty() {
        bail!("manifest {} is empty", manifest.display());
    }
    let pipeline = Pipeline::from_config(config);
    eprintln!("preparing {} inputs...", samples.len());
    let inputs: Vec<_> = prepare_inputs(&samples, &tables, &pipeline, config.runtime.parallel)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut params = match seed {
        Some(s) => VerifierParams::init(
            config.encoder.dim,
            config.verifier.layers,
            config.verifier.theta,
            s,
        ),
        None => config.init_params(),
    };
    let mut schedule = config.train_schedule();
    if let Some(e) = epochs {
        schedule.epochs = e;
    }
    if let Some(s) = seed {
        schedule.seed = s;
    }
    let report = train(&inputs, &mut params, &schedule)?;
    for (e, (loss, acc)) in report
        .epoch_loss
        .iter()
        .zip(&report.epoch_accuracy)
        .enumerate()
    {
        println!("epoch {e:>3}  loss {loss:.4}  accuracy {acc:.4}");
    }
    save_checkpoint(
        &params,
        EncoderStamp {
            seed: config.encoder.seed,
            dim: config.encoder.dim,
        },
        checkpoint,
    )?;
    println!("checkpoint written to {}", checkpoint.display());
    Ok(())
}

/// Rebuild the pipeline so the encoder matches what the checkpoint was
/// trained with.
fn pipeline_for_checkpoint(
    config: &PipelineConfig,
    checkpoint: &Path,
) -> Result<(Pipeline, VerifierParams)> {
    let (params, stamp) = load_checkpoint(checkpoint)?;
    let mut config = config.clone();
    if stamp.dim != config.encoder.dim || stamp.seed != config.encoder.seed {
        eprintln!(
            "note: checkpoint encoder (dim {}, seed {}) overrides config",
            stamp.dim, stamp.seed
        );
        config.encoder.dim = stamp.dim;
        config.encoder.seed = stamp.seed;
    }
    Ok((Pipeline::from_config(&config), params))
}

fn cmd_verify(
    config: &PipelineConfig,
    table: &Path,
    statement: &str,
    checkpoint: &Path,
) -> Result<()> {
    let t = load_one_table(config, table)?;
    let (pipeline, params) = pipeline_for_checkpoint(config, checkpoint)?;
    let verdict = pipeline.verify_one(statement, &t, &params)?;
    println!(
        "{}  p_entailed={:.4} p_refuted={:.4}",
        verdict.label.as_str(),
        verdict.p_entailed,
        verdict.p_refuted
    );
    let c = verdict.evidence.counts;
    println!(
        "# evidence selected={} after_decompose={} after_filter={}",
        c.selected, c.after_decompose, c.after_filter
    );
    for e in &verdict.evidence.rendered {
        println!("{e}");
    }
    if !verdict.forward.pruned.is_empty() {
        let pruned: Vec<String> = verdict
            .forward
            .pruned
            .iter()
            .map(|id| id.to_string())
            .collect();
        println!("# pruned nodes: {}", pruned.join(","));
    }
    Ok(())
}

fn cmd_eval(
    config: &PipelineConfig,
    manifest: &Path,
    tables_dir: &Path,
    checkpoint: &Path,
    out: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<()> {
    let (samples, tables) = load_split(config, manifest, tables_dir)?;
    let (pipeline, params) = pipeline_for_checkpoint(config, checkpoint)?;
    let report = evaluate(
        &samples,
        &tables,
        &pipeline,
        &params,
        EvalOptions {
            parallel: config.runtime.parallel,
        },
    );
    print!("{}", report.text_table());
    if let Some(path) = out {
        let mut lines = String::new();
        for p in &report.predictions {
            lines.push_str(&serde_json::to_string(p)?);
            lines.push('\n');
        }
        std::fs::write(path, lines)?;
        println!("predictions written to {}", path.display());
    }
    if let Some(path) = report_path {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
        println!("report written to {}", path.display());
    }
    // gold labels were known: echo mistakes for quick inspection
    let wrong = report
        .predictions
        .iter()
        .filter(|p| p.gold != p.predicted)
        .count();
    let _ = Label::parse("ENTAILED");
    eprintln!("{} of {} misclassified", wrong, report.total);
    Ok(())
}
