//! `e2s`: eventify a parsed corpus, train the realizers, tune the cascade,
//! realize and fill events, and score the output.

mod error;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use e2s_core::decoders::mc_beam_decode;
use e2s_core::ensemble::{
    event_seed, members_of, render_utilization_table, tune_thresholds, utilization, EnsembleConfig, Member, Realizer, RunRecord,
    ThresholdGrid,
};
use e2s_core::eventify::{eventify_corpus, read_stories, EventRecord};
use e2s_core::lexicon::{gender_table_from_census, GENDER_THRESHOLD};
use e2s_core::metrics::{render_metric_csv, render_metric_table, MetricReport};
use e2s_core::pipeline::{
    fill_all, read_json, read_jsonl, realize_all, write_json, write_jsonl, Header, PipelineConfig, TrainedModels,
};
use e2s_core::retedit::RetrievalIndex;
use e2s_core::seq_model::NGramModel;
use e2s_core::slotfill::EntityPool;
use e2s_core::Lexicon;

use error::{require, require_input, CliError, UserContext};

#[derive(Parser)]
#[command(name = "e2s", version, about = "Event-to-sentence realization pipeline")]
struct Cli {
    /// Pipeline config JSON; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parsed stories (interchange JSONL) to event records, split 8:1:1 by story.
    Eventify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        split_seed: Option<u64>,
    },
    /// Forward and backward n-gram models from training events.
    Train {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        copy_bias: Option<f64>,
    },
    /// Retrieval index over training pairs.
    BuildIndex {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        embed_seed: Option<u64>,
    },
    /// Grid-search cascade thresholds on validation events.
    Tune {
        #[arg(long)]
        events: PathBuf,
        #[command(flatten)]
        artifacts: Artifacts,
        #[arg(long)]
        grid_file: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Frozen ensemble config.
        #[arg(long)]
        out: PathBuf,
    },
    /// Realize events with one decoder or the cascade; writes a run log.
    Realize {
        #[arg(long)]
        events: PathBuf,
        #[command(flatten)]
        artifacts: Artifacts,
        #[arg(long, value_enum, default_value = "ensemble")]
        decoder: Decoder,
        #[arg(long)]
        ensemble_config: Option<PathBuf>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        playouts: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-step Monte Carlo beams and scores (mc decoder only).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Slot-fill a run log into surface sentences.
    Fill {
        #[arg(long)]
        run: PathBuf,
        /// Events the run was realized from; supplies story ids.
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        /// CSV `name,gender,count` overriding the lexicon's gender table.
        #[arg(long)]
        gender: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Perplexity, BLEU-4, ROUGE-4 and length of predictions against gold.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "model")]
        name: String,
        #[arg(long)]
        csv: bool,
    },
    /// Percentage of events realized by each cascade member.
    ReportUtilization {
        #[arg(long, required = true)]
        run: Vec<PathBuf>,
        /// Model combination of each run; defaults to the file stem.
        #[arg(long)]
        label: Vec<String>,
        /// Event source of each run (`test` or `pipeline`); one value applies to all.
        #[arg(long)]
        source: Vec<String>,
    },
}

#[derive(clap::Args)]
struct Artifacts {
    /// Directory written by `train`.
    #[arg(long)]
    models: PathBuf,
    /// File written by `build-index`.
    #[arg(long)]
    index: PathBuf,
    /// Enables per-verb-class frames for templates.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Decoder {
    Beam,
    Mc,
    Fsm,
    Template,
    Retedit,
    Ensemble,
}

impl Decoder {
    fn member(self) -> Option<Member> {
        match self {
            Decoder::Beam => Some(Member::Beam),
            Decoder::Mc => Some(Member::McBeam),
            Decoder::Fsm => Some(Member::Fsm),
            Decoder::Template => Some(Member::Templates),
            Decoder::Retedit => Some(Member::Retedit),
            Decoder::Ensemble => None,
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            std::process::exit(0);
        }
        Err(e) => {
            eprint!("{e}");
            let err = CliError::user(e.kind().to_string());
            eprintln!("{}", err.record());
            std::process::exit(err.exit_code());
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("{}", err.record());
        std::process::exit(err.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            require_input(path)?;
            read_json::<PipelineConfig>(path).user_err()?
        }
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Eventify {
            input,
            lexicon,
            out_dir,
            split_seed,
        } => {
            set(&mut cfg.split_seed, split_seed);
            eventify(&cfg, &input, &lexicon, &out_dir)
        }
        Command::Train {
            events,
            out_dir,
            order,
            copy_bias,
        } => {
            set(&mut cfg.order, order);
            set(&mut cfg.copy_bias, copy_bias);
            train(&cfg, &events, &out_dir)
        }
        Command::BuildIndex {
            events,
            out,
            dim,
            embed_seed,
        } => {
            set(&mut cfg.embedding.dim, dim);
            set(&mut cfg.embedding.seed, embed_seed);
            build_index(&cfg, &events, &out)
        }
        Command::Tune {
            events,
            artifacts,
            grid_file,
            seed,
            out,
        } => {
            set(&mut cfg.decode_seed, seed);
            tune(&cfg, &events, &artifacts, grid_file.as_deref(), &out)
        }
        Command::Realize {
            events,
            artifacts,
            decoder,
            ensemble_config,
            width,
            alpha,
            playouts,
            horizon,
            top_k,
            seed,
            trace,
            out,
        } => {
            set(&mut cfg.beam_width, width);
            set(&mut cfg.mc.beam_width, width);
            set(&mut cfg.mc.alpha, alpha);
            set(&mut cfg.mc.playouts, playouts);
            set(&mut cfg.fsm.horizon, horizon);
            set(&mut cfg.template.top_k, top_k);
            set(&mut cfg.decode_seed, seed);
            if let Some(path) = &ensemble_config {
                require(path, "tune")?;
                cfg.ensemble = read_json(path).user_err()?;
            }
            realize(&cfg, &events, &artifacts, decoder, trace.as_deref(), &out)
        }
        Command::Fill {
            run,
            events,
            pool,
            lexicon,
            gender,
            seed,
            out,
        } => {
            set(&mut cfg.fill_seed, seed);
            fill(&cfg, &run, &events, &pool, &lexicon, gender.as_deref(), &out)
        }
        Command::Evaluate { pred, gold, name, csv } => evaluate(&pred, &gold, &name, csv),
        Command::ReportUtilization { run, label, source } => report_utilization(&run, &label, &source),
    }
}

fn set<T>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}

fn load_lexicon(path: &Path) -> Result<Lexicon, CliError> {
    require_input(path)?;
    Lexicon::load(path).user_err()
}

fn load_events(path: &Path, produced_by: &'static str) -> Result<Vec<EventRecord>, CliError> {
    require(path, produced_by)?;
    Ok(read_jsonl::<EventRecord>(path).user_err()?.1)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::user(format!("{}: {e}", dir.display())))
}

fn eventify(cfg: &PipelineConfig, input: &Path, lexicon: &Path, out_dir: &Path) -> Result<(), CliError> {
    let lexicon = load_lexicon(lexicon)?;
    require_input(input)?;
    let file = File::open(input).user_err()?;
    let stories = read_stories(BufReader::new(file)).user_err()?;
    let corpus = eventify_corpus(&stories, &lexicon, cfg.split_seed);
    create_dir(out_dir)?;
    let header = Header::new("e2s-events", cfg, &[("split_seed", cfg.split_seed)]);
    write_jsonl(out_dir.join("events.jsonl"), &header, &corpus.records).user_err()?;
    for (name, ids) in [
        ("train", &corpus.split.train),
        ("validation", &corpus.split.validation),
        ("test", &corpus.split.test),
    ] {
        write_jsonl(out_dir.join(format!("{name}.jsonl")), &header, &corpus.partition(ids)).user_err()?;
    }
    write_json(out_dir.join("split.json"), &corpus.split).user_err()?;
    println!(
        "{} stories, {} events; split {}/{}/{} stories",
        stories.len(),
        corpus.records.len(),
        corpus.split.train.len(),
        corpus.split.validation.len(),
        corpus.split.test.len()
    );
    Ok(())
}

fn train(cfg: &PipelineConfig, events: &Path, out_dir: &Path) -> Result<(), CliError> {
    let records = load_events(events, "eventify")?;
    let pairs = e2s_core::pipeline::pairs_of(&records);
    create_dir(out_dir)?;
    for (name, direction) in [
        ("forward", e2s_core::seq_model::Direction::Forward),
        ("backward", e2s_core::seq_model::Direction::Backward),
    ] {
        let model = NGramModel::train(&pairs, &cfg.ngram(direction)).user_err()?;
        model
            .save(out_dir.join(format!("{name}.json")))
            .map_err(|e| CliError::Internal(e.into()))?;
    }
    println!("trained order-{} models on {} pairs", cfg.order, pairs.len());
    Ok(())
}

fn build_index(cfg: &PipelineConfig, events: &Path, out: &Path) -> Result<(), CliError> {
    let records = load_events(events, "eventify")?;
    let index = RetrievalIndex::build(e2s_core::pipeline::pairs_of(&records), &cfg.embedding_config()).user_err()?;
    index.save(out).map_err(|e| CliError::Internal(e.into()))?;
    println!("indexed {} pairs", index.len());
    Ok(())
}

fn load_models(artifacts: &Artifacts) -> Result<(TrainedModels, Option<Arc<Lexicon>>), CliError> {
    let forward = artifacts.models.join("forward.json");
    let backward = artifacts.models.join("backward.json");
    require(&forward, "train")?;
    require(&backward, "train")?;
    require(&artifacts.index, "build-index")?;
    let models = TrainedModels {
        forward: Arc::new(NGramModel::load(&forward).user_err()?),
        backward: Arc::new(NGramModel::load(&backward).user_err()?),
        index: Arc::new(RetrievalIndex::load(&artifacts.index).user_err()?),
    };
    let lexicon = match &artifacts.lexicon {
        Some(p) => Some(Arc::new(load_lexicon(p)?)),
        None => None,
    };
    Ok((models, lexicon))
}

fn tune(
    cfg: &PipelineConfig,
    events: &Path,
    artifacts: &Artifacts,
    grid_file: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let records = load_events(events, "eventify")?;
    let (models, lexicon) = load_models(artifacts)?;
    let grid = match grid_file {
        Some(p) => {
            require_input(p)?;
            read_json::<ThresholdGrid>(p).user_err()?
        }
        None => ThresholdGrid::default_for(&cfg.ensemble),
    };
    let realizers = models.realizers(cfg, lexicon);
    let refs: Vec<&dyn Realizer> = realizers.iter().map(|r| r.as_ref()).collect();
    let validation = e2s_core::pipeline::pairs_of(&records);
    let result = tune_thresholds(&validation, &refs, &cfg.ensemble.members, &grid, cfg.decode_seed).user_err()?;
    let frozen = EnsembleConfig::new(cfg.ensemble.members.clone(), result.thresholds.clone()).user_err()?;
    write_json(out, &frozen).user_err()?;
    println!(
        "best of {} tuples: {} (BLEU-4 {:.4})",
        result.evaluated.len(),
        serde_json::to_string(&result.thresholds).expect("thresholds serialize"),
        result.bleu4
    );
    Ok(())
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    index: usize,
    steps: &'a e2s_core::decoders::McTrace,
}

fn realize(
    cfg: &PipelineConfig,
    events: &Path,
    artifacts: &Artifacts,
    decoder: Decoder,
    trace: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let records = load_events(events, "eventify")?;
    let (models, lexicon) = load_models(artifacts)?;
    let realizers = models.realizers(cfg, lexicon);
    let header = Header::new("e2s-run", cfg, &[("decode_seed", cfg.decode_seed)]);

    let run: Vec<RunRecord> = match decoder.member() {
        None => realize_all(&records, &realizers, &cfg.ensemble, cfg.decode_seed).user_err()?,
        Some(member) => {
            let realizer = realizers
                .iter()
                .find(|r| r.member() == member)
                .expect("every member has a realizer");
            records
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let out = realizer.realize(&r.event, event_seed(cfg.decode_seed, i));
                    if out.is_none() {
                        log::warn!("event {i}: {member} produced no sentence");
                    }
                    let out = out.unwrap_or_default();
                    RunRecord {
                        event: r.event.clone(),
                        member_used: member,
                        confidence: out.confidence,
                        sentence: out.tokens,
                        invoked: vec![member],
                    }
                })
                .collect()
        }
    };
    write_jsonl(out, &header, &run).user_err()?;

    if let Some(trace_path) = trace {
        if decoder != Decoder::Mc {
            return Err(CliError::user("--trace is only available with --decoder mc"));
        }
        let mut traces = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let mc = e2s_core::decoders::McBeamConfig {
                seed: event_seed(cfg.decode_seed, i),
                ..cfg.mc_config()
            };
            traces.push(mc_beam_decode(models.forward.as_ref(), &r.event, &mc).trace);
        }
        let lines: Vec<TraceRecord> = traces
            .iter()
            .enumerate()
            .map(|(index, steps)| TraceRecord { index, steps })
            .collect();
        write_jsonl(trace_path, &header, &lines).user_err()?;
    }
    println!("realized {} events", run.len());
    Ok(())
}

fn fill(
    cfg: &PipelineConfig,
    run: &Path,
    events: &Path,
    pool: &Path,
    lexicon: &Path,
    gender: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    require(run, "realize")?;
    let (_, log) = read_jsonl::<RunRecord>(run).user_err()?;
    let records = load_events(events, "eventify")?;
    if records.len() != log.len() {
        return Err(CliError::user(format!(
            "{} has {} records but {} has {}",
            run.display(),
            log.len(),
            events.display(),
            records.len()
        )));
    }
    let mut lexicon = load_lexicon(lexicon)?;
    if let Some(path) = gender {
        require_input(path)?;
        let table = gender_table_from_census(BufReader::new(File::open(path).user_err()?), GENDER_THRESHOLD).user_err()?;
        lexicon.set_gender_table(table);
    }
    require_input(pool)?;
    let pool = EntityPool::load(pool).user_err()?;
    let filled = fill_all(&records, &log, &pool, &lexicon, cfg.fill_seed);
    let header = Header::new("e2s-filled", cfg, &[("fill_seed", cfg.fill_seed)]);
    write_jsonl(out, &header, &filled).user_err()?;
    println!("filled {} sentences", filled.len());
    Ok(())
}

/// Token sequences from run logs, event files or filled files.
fn sentences_of(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    require_input(path)?;
    let (_, rows) = read_jsonl::<serde_json::Value>(path).user_err()?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            if let Some(tokens) = row.get("sentence").or_else(|| row.get("generalized")) {
                return serde_json::from_value(tokens.clone()).user_err();
            }
            if let Some(text) = row.get("filled").and_then(|v| v.as_str()) {
                return Ok(text.split_whitespace().map(str::to_string).collect());
            }
            Err(CliError::user(format!(
                "{} record {}: no sentence, generalized or filled field",
                path.display(),
                i + 1
            )))
        })
        .collect()
}

fn evaluate(pred: &Path, gold: &Path, name: &str, csv: bool) -> Result<(), CliError> {
    let p = sentences_of(pred)?;
    let g = sentences_of(gold)?;
    if p.len() != g.len() {
        return Err(CliError::user(format!(
            "{} has {} sentences but {} has {}",
            pred.display(),
            p.len(),
            gold.display(),
            g.len()
        )));
    }
    if p.is_empty() {
        return Err(CliError::user("nothing to evaluate"));
    }
    let report = MetricReport::evaluate(name, &p, &g);
    if csv {
        print!("{}", render_metric_csv(&[report]));
    } else {
        print!("{}", render_metric_table(&[report]));
    }
    Ok(())
}

fn report_utilization(runs: &[PathBuf], labels: &[String], sources: &[String]) -> Result<(), CliError> {
    if !labels.is_empty() && labels.len() != runs.len() {
        return Err(CliError::user("give one --label per --run"));
    }
    if sources.len() > 1 && sources.len() != runs.len() {
        return Err(CliError::user("give one --source per --run, or a single one for all"));
    }
    let mut reports = Vec::new();
    for (i, path) in runs.iter().enumerate() {
        require(path, "realize")?;
        let (_, log) = read_jsonl::<RunRecord>(path).user_err()?;
        let label = labels.get(i).cloned().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
        let source = match sources {
            [] => "test",
            [one] => one.as_str(),
            many => many[i].as_str(),
        };
        reports.push(utilization(&label, source, &members_of(&log), &log));
    }
    print!("{}", render_utilization_table(&reports));
    Ok(())
}
