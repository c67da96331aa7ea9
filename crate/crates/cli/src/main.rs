mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use obs_impact::context::{Corpus, Normalizer};
use obs_impact::explain::{ExplanationMethod, ImpactReport};
use obs_impact::fidelity::{evaluate_fidelity, FidelityResult, Ranking};
use obs_impact::neuralcore::{
    finetune, load_checkpoint, pretrain, save_checkpoint, ModelConfig, ModelWeights,
};
use obs_impact::pipeline::{evaluate, prepare, Prepared};
use obs_impact::report;
use obs_impact::synthdata::{dataset_to_string, generate_split, load_dataset, Dataset};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "obs-impact",
    version,
    about = "Graph state estimation and observation impact"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// `key = value` config file; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Restrict `explain` or `fidelity` to one method.
    #[arg(long, global = true)]
    method: Option<ExplanationMethod>,
    /// Replace the fidelity fractions with a single value.
    #[arg(long, global = true)]
    fraction: Option<f64>,
    /// Train from a fresh initialization instead of the pretrained encoder.
    #[arg(long, global = true)]
    no_pretrain: bool,
    /// Directory for every input and output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate train and test datasets.
    Gen,
    /// Reconstruction pretraining of the encoder.
    Pretrain,
    /// Regression fine-tuning.
    Train,
    /// Per-variable metrics on the test split.
    Eval,
    /// Observation impact tables and charts.
    Explain,
    /// Fidelity+ and Fidelity- of each method against a random ranking.
    Fidelity,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        c.set_seed(seed);
    }
    if let Some(f) = cli.fraction {
        c.pipeline.fractions = vec![f];
    }
    if let Some(out) = &cli.out {
        c.out = out.clone();
    }
    c.validate()?;
    Ok(c)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_csv(c: &RunConfig, name: &str, body: &str) -> Result<()> {
    write(&c.out.join(name), report::with_seed_header(c.seed(), body))
}

fn ensure_finite(what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        bail!("{what} contains non-finite values")
    }
}

/// The seed line goes after the magic line, which readers expect first.
fn dataset_file(seed: u64, d: &Dataset) -> String {
    let text = dataset_to_string(d);
    let (magic, rest) = text.split_once('\n').expect("dataset text has a header");
    format!("{magic}\n# seed = {seed}\n{rest}")
}

fn load_data(c: &RunConfig) -> Result<(Dataset, Dataset)> {
    let read = |p: PathBuf| {
        load_dataset(&p).with_context(|| format!("loading {} (run `gen` first?)", p.display()))
    };
    Ok((read(c.train_path())?, read(c.test_path())?))
}

fn train_corpus(c: &RunConfig, train: &Dataset, k: usize) -> Result<Corpus> {
    let normalizer = Normalizer::fit(train)?;
    Ok(Corpus::build(train, &normalizer, c.pipeline.radius_km, k)?)
}

fn load_model(c: &RunConfig) -> Result<(ModelWeights, ModelConfig)> {
    let path = c.checkpoint_path();
    load_checkpoint(&path)
        .with_context(|| format!("loading {} (run `train` first?)", path.display()))
}

/// Model and test corpus built with the checkpoint's hop radius.
fn model_and_data(c: &RunConfig) -> Result<(ModelWeights, Prepared)> {
    let (weights, model) = load_model(c)?;
    let (train, test) = load_data(c)?;
    Ok((
        weights,
        prepare(&train, &test, c.pipeline.radius_km, model.k)?,
    ))
}

fn loss_csv(losses: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        out.push_str(&format!("{},{l:.9}\n", i + 1));
    }
    out
}

fn cmd_gen(c: &RunConfig) -> Result<()> {
    let p = &c.pipeline;
    let (train, test) = generate_split(&p.field, &p.counts, p.train_steps, p.test_steps)?;
    write(&c.train_path(), dataset_file(c.seed(), &train))?;
    write(&c.test_path(), dataset_file(c.seed(), &test))?;
    let prepared = prepare(&train, &test, p.radius_km, p.model.k)?;
    for corpus in [&prepared.train, &prepared.test] {
        println!(
            "{}: {} steps, {} nodes, {} edges, {} subgraphs",
            corpus.split.name(),
            corpus.steps.len(),
            corpus.node_count(),
            corpus.edge_count(),
            corpus.samples.len()
        );
    }
    Ok(())
}

fn cmd_pretrain(c: &RunConfig) -> Result<()> {
    let (train, _) = load_data(c)?;
    let model = &c.pipeline.model;
    let outcome = pretrain(&train_corpus(c, &train, model.k)?, model)?;
    ensure_finite("pretraining loss", outcome.epoch_losses.iter().copied())?;
    save_checkpoint(c.pretrained_path(), &outcome.weights, model)?;
    println!("wrote {}", c.pretrained_path().display());
    write_csv(c, "pretrain_loss.csv", &loss_csv(&outcome.epoch_losses))
}

fn cmd_train(c: &RunConfig, no_pretrain: bool) -> Result<()> {
    let (train, _) = load_data(c)?;
    let model = &c.pipeline.model;
    let encoder = if no_pretrain {
        None
    } else {
        let path = c.pretrained_path();
        let (weights, _) = load_checkpoint(&path).with_context(|| {
            format!(
                "loading {} (run `pretrain` first or pass --no-pretrain)",
                path.display()
            )
        })?;
        Some(weights)
    };
    let outcome = finetune(&train_corpus(c, &train, model.k)?, encoder.as_ref(), model)?;
    ensure_finite("training loss", outcome.epoch_losses.iter().copied())?;
    save_checkpoint(c.checkpoint_path(), &outcome.weights, model)?;
    println!("wrote {}", c.checkpoint_path().display());
    write_csv(c, "train_loss.csv", &loss_csv(&outcome.epoch_losses))
}

fn cmd_eval(c: &RunConfig) -> Result<()> {
    let (weights, prepared) = model_and_data(c)?;
    let metrics = evaluate(&weights, &prepared.test)?;
    ensure_finite(
        "metrics",
        metrics
            .per_variable
            .iter()
            .flat_map(|m| [m.rmse, m.mae, m.r2.unwrap_or(0.0)]),
    )?;
    match metrics.mean_r2() {
        Some(r2) => println!("mean R2 {r2:.4}"),
        None => println!("mean R2 undefined"),
    }
    write_csv(c, "metrics.csv", &metrics.to_csv())
}

fn methods(choice: Option<ExplanationMethod>) -> Vec<ExplanationMethod> {
    choice.map_or_else(|| ExplanationMethod::ALL.to_vec(), |m| vec![m])
}

fn cmd_explain(c: &RunConfig, method: Option<ExplanationMethod>) -> Result<()> {
    let (weights, prepared) = model_and_data(c)?;
    for m in methods(method) {
        let r = ImpactReport::compute(m, &weights, &prepared.test)?;
        ensure_finite("impact", r.by_kind.iter().map(|(_, v)| *v))?;
        let key = m.key();
        write_csv(
            c,
            &format!("impact_{key}.csv"),
            &report::impact_by_kind_csv(&r),
        )?;
        write_csv(
            c,
            &format!("impact_{key}_series.csv"),
            &report::impact_series_csv(&r),
        )?;
        write(
            &c.out.join(format!("impact_{key}.svg")),
            report::impact_bar_svg(&r),
        )?;
        write(
            &c.out.join(format!("impact_{key}_series.svg")),
            report::impact_series_svg(&r),
        )?;
    }
    Ok(())
}

fn cmd_fidelity(c: &RunConfig, method: Option<ExplanationMethod>) -> Result<()> {
    let (weights, prepared) = model_and_data(c)?;
    let fractions = &c.pipeline.fractions;
    let rankings: Vec<Ranking> = methods(method).into_iter().map(Ranking::Method).collect();
    let results = evaluate_fidelity(&weights, &prepared.test, &rankings, fractions)?;
    let random = Ranking::Random {
        seed: c.pipeline.baseline_seed(),
    };
    let baseline = evaluate_fidelity(&weights, &prepared.test, &[random], fractions)?;
    let values = |rs: &[FidelityResult]| {
        rs.iter()
            .flat_map(|r| [r.fidelity_plus, r.fidelity_minus])
            .collect::<Vec<_>>()
    };
    ensure_finite(
        "fidelity",
        values(&results).into_iter().chain(values(&baseline)),
    )?;
    write_csv(c, "fidelity.csv", &report::fidelity_csv(&results))?;
    write_csv(c, "fidelity_random.csv", &report::fidelity_csv(&baseline))
}

fn run(cli: &Cli) -> Result<()> {
    if let Ok(v) = std::env::var("OBS_IMPACT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("OBS_IMPACT_THREADS={v:?} is not a thread count"))?;
        obs_impact::set_max_threads(n);
    }
    let c = load_config(cli)?;
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    match cli.command {
        Command::Gen => cmd_gen(&c),
        Command::Pretrain => cmd_pretrain(&c),
        Command::Train => cmd_train(&c, cli.no_pretrain),
        Command::Eval => cmd_eval(&c),
        Command::Explain => cmd_explain(&c, cli.method),
        Command::Fidelity => cmd_fidelity(&c, cli.method),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
