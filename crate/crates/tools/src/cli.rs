//! Subcommands of the `adsage` binary.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use adsage_core::adsage::AdsageModel;
use adsage_core::eval::{Aggregation, ScoredEvent};
use adsage_core::event::schema::FieldKind;
use adsage_core::event::{presets, FeatureSchema, RawEvent, SampleOptions, Vocabularies, WordVectorTable};
use adsage_core::model::{component_rng, streams, EventLayout, TrainEvent};
use adsage_core::nn::gradcheck;
use adsage_core::rules::{RuleKind, RuleModel};
use adsage_core::seq2one::Seq2oneModel;
use adsage_core::synthgen::{self, AnomalyKind, PlannedAnomaly};
use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{Checkpoint, Detector};
use crate::config::{FileConfig, ModelOverrides, Profile, SynthOverrides};
use crate::error::{ToolError, ToolResult};
use crate::ingest::{self, ParseOptions, DEFAULT_MAX_REJECT_FRACTION};
use crate::report::{self, EvalSettings};
use crate::{labels, scores, wordvec};

#[derive(Debug, Parser)]
#[command(name = "adsage", version, about = "Anomaly detection on sequences of attributed graph edges")]
pub struct Cli {
    /// Key-value run configuration (TOML); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic train/test log pair and its label file.
    Generate(GenerateArgs),
    /// Train a learned detector and write its checkpoint.
    Train(TrainArgs),
    /// Score events with a checkpoint or a rule baseline.
    Score(ScoreArgs),
    /// Recall curve and cumulative-recall summary from score files.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients of every layer.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Directory receiving train.csv, test.csv and labels.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub destinations: Option<usize>,
    #[arg(long)]
    pub train_days: Option<usize>,
    #[arg(long)]
    pub test_days: Option<usize>,
    #[arg(long)]
    pub events_per_day: Option<f64>,
    #[arg(long)]
    pub affinity: Option<f64>,
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Email-shaped events (to/cc/bcc, size, content).
    #[arg(long)]
    pub email: bool,
    /// Planted anomaly `user:day:kind:events[:scenario]`, with kind one of
    /// unseen_destination, off_hours, burst. Repeatable; replaces the
    /// default plan.
    #[arg(long = "anomaly", value_parser = parse_anomaly)]
    pub anomalies: Vec<PlannedAnomaly>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub timesteps: Option<usize>,
    #[arg(long)]
    pub hidden_units: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Embedding width of every entity space.
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub negatives_per_positive: Option<f64>,
    /// Hidden widths of the classifier, e.g. `50,30,10`.
    #[arg(long, value_delimiter = ',')]
    pub ffnn_layers: Option<Vec<usize>>,
    /// Gradient norm cap; 0 disables clipping.
    #[arg(long)]
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct InputArgs {
    /// Preset name or TOML schema file.
    #[arg(long)]
    pub schema: Option<String>,
    /// Pretrained word vectors for text fields.
    #[arg(long)]
    pub word_vectors: Option<PathBuf>,
    #[arg(long)]
    pub word_vector_limit: Option<usize>,
    /// Fraction of users kept, in (0, 1].
    #[arg(long)]
    pub user_sample_rate: Option<f64>,
    /// Sample only among users without malicious events.
    #[arg(long)]
    pub exclude_malicious: bool,
    /// Rejected-row share above which a file is refused.
    #[arg(long)]
    pub max_reject_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `adsage` or `seq2one`.
    #[arg(long, default_value = "adsage")]
    pub detector: String,
    #[arg(long)]
    pub train: PathBuf,
    /// Checkpoint path; with several runs, `-run<i>` is added to the stem.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent runs with seeds `seed, seed+1, …`.
    #[arg(long)]
    pub runs: Option<usize>,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Checkpoint of a learned detector.
    #[arg(long, conflicts_with = "detector")]
    pub checkpoint: Option<PathBuf>,
    /// Rule baseline `rule:<kind>`; needs `--train`.
    #[arg(long)]
    pub detector: Option<String>,
    /// Destination fields used by a rule (names, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub rule_fields: Option<Vec<String>>,
    /// Training events: fitted by rules, replayed by learned detectors to
    /// warm up user states.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub data: InputArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One score file per run.
    #[arg(long, num_args = 1.., required = true)]
    pub scores: Vec<PathBuf>,
    /// Malicious user-days from every source, `user,date,scenario`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub step: Option<usize>,
    /// Budgets listed in the summary, e.g. `10,25,50`.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_aggregation)]
    pub aggregation: Option<Aggregation>,
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long)]
    pub summary: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random configurations per component.
    #[arg(long, default_value_t = 20)]
    pub configs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

fn parse_anomaly(text: &str) -> Result<PlannedAnomaly, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if !(4..=5).contains(&parts.len()) {
        return Err("expected user:day:kind:events[:scenario]".into());
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what} `{s}`"));
    let kind = match parts[2] {
        "unseen_destination" => AnomalyKind::UnseenDestination,
        "off_hours" => AnomalyKind::OffHours,
        "burst" => AnomalyKind::Burst,
        other => return Err(format!("unknown anomaly kind `{other}`")),
    };
    Ok(PlannedAnomaly {
        user: num(parts[0], "user")?,
        day: num(parts[1], "day")?,
        kind,
        events: num(parts[3], "event count")?,
        scenario: parts.get(4).map_or(kind.name(), |s| s).to_string(),
    })
}

fn parse_aggregation(text: &str) -> Result<Aggregation, String> {
    match text {
        "max" => Ok(Aggregation::Max),
        "mean" => Ok(Aggregation::Mean),
        _ => Err("expected max or mean".into()),
    }
}

pub fn run(cli: Cli) -> ToolResult<()> {
    let file = match &cli.config {
        Some(p) => {
            require_file(p)?;
            FileConfig::load(p)?
        }
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Generate(a) => generate(a, &file),
        Command::Train(a) => train(a, &file),
        Command::Score(a) => score(a, &file),
        Command::Eval(a) => eval(a, &file),
        Command::Gradcheck(a) => gradcheck(a, &file),
    }
}

fn require_file(path: &Path) -> ToolResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(ToolError::Config(format!("{}: no such file", path.display())))
    }
}

fn require_output_dir(path: &Path) -> ToolResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(ToolError::Config(format!(
            "{}: output directory does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn require_seed(flag: Option<u64>, file: &FileConfig) -> ToolResult<u64> {
    flag.or(file.seed)
        .ok_or_else(|| ToolError::Config("a seed is required (--seed or `seed` in the config file)".into()))
}

fn generate(a: GenerateArgs, file: &FileConfig) -> ToolResult<()> {
    let seed = require_seed(a.seed, file)?;
    let overrides = SynthOverrides {
        users: a.users,
        destinations: a.destinations,
        train_days: a.train_days,
        test_days: a.test_days,
        events_per_day: a.events_per_day,
        affinity: a.affinity,
        pool_size: a.pool_size,
        email: a.email.then_some(true),
        anomalies: (!a.anomalies.is_empty()).then_some(a.anomalies),
    }
    .or_file(file);
    let cfg = overrides.build(seed);
    cfg.validate()?;
    if !a.out_dir.is_dir() {
        return Err(ToolError::Config(format!("{}: output directory does not exist", a.out_dir.display())));
    }
    let out = synthgen::generate(&cfg)?;
    let schema = if cfg.email {
        presets::synthetic_email()
    } else {
        presets::synthetic_logon()
    };
    ingest::write_events_file(&a.out_dir.join("train.csv"), &out.train, &schema)?;
    ingest::write_events_file(&a.out_dir.join("test.csv"), &out.test, &schema)?;
    labels::write_labels_file(&a.out_dir.join("labels.csv"), &out.labels)?;
    log::info!(
        "wrote {} train and {} test events, {} labelled user-days (schema {})",
        out.train.len(),
        out.test.len(),
        out.labels.len(),
        schema.name
    );
    Ok(())
}

/// Inputs resolved from flags and file before any work starts.
struct Inputs {
    schema: FeatureSchema,
    options: ParseOptions,
    word_vectors: Option<PathBuf>,
    word_vector_limit: Option<usize>,
}

impl Inputs {
    fn resolve(a: &InputArgs, file: &FileConfig, seed: u64, embedding_dim: Option<usize>) -> ToolResult<Self> {
        let spec = a
            .schema
            .as_deref()
            .ok_or_else(|| ToolError::Config("--schema is required".into()))?;
        let mut schema = ingest::load_schema(spec)?;
        if let Some(d) = embedding_dim {
            if d == 0 {
                return Err(ToolError::Config("embedding dim must be positive".into()));
            }
            for f in schema.fields.iter_mut().filter(|f| f.is_entity()) {
                f.dim = Some(d);
            }
        }
        let options = ParseOptions {
            sample: SampleOptions {
                user_sample_rate: a.user_sample_rate.or(file.user_sample_rate).unwrap_or(1.0),
                exclude_malicious: a.exclude_malicious || file.exclude_malicious.unwrap_or(false),
            },
            seed,
            max_reject_fraction: a
                .max_reject_fraction
                .or(file.max_reject_fraction)
                .unwrap_or(DEFAULT_MAX_REJECT_FRACTION),
        };
        let rate = options.sample.user_sample_rate;
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(ToolError::Config(format!("user sample rate must lie in (0, 1], got {rate}")));
        }
        if let Some(p) = &a.word_vectors {
            require_file(p)?;
        }
        let has_text = schema.fields_of(FieldKind::Text).next().is_some();
        if has_text && a.word_vectors.is_none() {
            log::warn!("schema `{}` has text fields but no word vectors were given; text is ignored", schema.name);
        }
        Ok(Self {
            schema,
            options,
            word_vectors: a.word_vectors.clone(),
            word_vector_limit: a.word_vector_limit.or(file.word_vector_limit),
        })
    }

    fn word_vectors(&self) -> ToolResult<Option<WordVectorTable>> {
        self.word_vectors
            .as_deref()
            .map(|p| wordvec::load_word_vectors(p, self.word_vector_limit))
            .transpose()
    }

    fn parse(&self, path: &Path, options: &ParseOptions) -> ToolResult<Vec<RawEvent>> {
        let parsed = ingest::parse_events(path, &self.schema, options)?;
        log::info!(
            "{}: {} events ({} rows, {} filtered, {} rejected)",
            path.display(),
            parsed.events.len(),
            parsed.rows,
            parsed.filtered,
            parsed.rejects.len()
        );
        Ok(parsed.events)
    }

    fn sampling(&self) -> bool {
        self.options.sample.user_sample_rate < 1.0 || self.options.sample.exclude_malicious
    }
}

fn run_path(out: &Path, run: usize, runs: usize) -> PathBuf {
    if runs == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}-run{run}.{}", ext.to_string_lossy()),
        None => format!("{stem}-run{run}"),
    };
    out.with_file_name(name)
}

fn log_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".log");
    PathBuf::from(s)
}

fn train(a: TrainArgs, file: &FileConfig) -> ToolResult<()> {
    let seed = require_seed(a.seed, file)?;
    let runs = a.runs.or(file.runs).unwrap_or(1);
    if runs == 0 {
        return Err(ToolError::Config("runs must be positive".into()));
    }
    let overrides = ModelOverrides {
        profile: a.model.profile,
        timesteps: a.model.timesteps,
        hidden_units: a.model.hidden_units,
        batch_size: a.model.batch_size,
        epochs: a.model.epochs,
        learning_rate: a.model.learning_rate,
        dropout: a.model.dropout,
        negatives_per_positive: a.model.negatives_per_positive,
        ffnn_layers: a.model.ffnn_layers.clone(),
        clip_norm: a.model.clip_norm,
    }
    .or_file(file);
    match a.detector.as_str() {
        "adsage" => overrides.adsage(seed).validate()?,
        "seq2one" => overrides.seq2one(seed).validate()?,
        d if d.starts_with("rule:") => {
            return Err(ToolError::Config(
                "rule detectors are fitted while scoring: use `score --detector rule:<kind> --train FILE`".into(),
            ))
        }
        d => return Err(ToolError::Config(format!("unknown detector `{d}` (adsage, seq2one, rule:<kind>)"))),
    }
    let inputs = Inputs::resolve(&a.input, file, seed, a.model.embedding_dim.or(file.embedding_dim))?;
    require_file(&a.train)?;
    require_output_dir(&a.out)?;

    let wv = inputs.word_vectors()?;
    let raw = inputs.parse(&a.train, &inputs.options)?;
    let users = inputs
        .sampling()
        .then(|| raw.iter().map(|e| e.user.clone()).collect::<BTreeSet<_>>());
    let vocabs = Vocabularies::build(&raw, &inputs.schema, wv.as_ref())?;
    let events = vocabs.index_all(&raw, &inputs.schema, wv.as_ref())?;
    let layout = EventLayout::new(&inputs.schema, &vocabs);

    for run in 0..runs {
        let run_seed = seed.wrapping_add(run as u64);
        let mut progress = String::from("epoch,ffnn_loss,rnn_loss,ffnn_learning_rate,rnn_learning_rate,negatives,skipped_negatives\n");
        let mut observer = |e: TrainEvent| {
            if let TrainEvent::EpochEnd(s) = e {
                let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
                let _ = writeln!(
                    progress,
                    "{},{},{},{},{},{},{}",
                    s.epoch,
                    opt(s.ffnn_loss),
                    opt(s.rnn_loss),
                    opt(s.ffnn_learning_rate),
                    s.rnn_learning_rate,
                    s.negatives,
                    s.skipped_negatives
                );
            }
        };
        let detector = if a.detector == "adsage" {
            Detector::Adsage(AdsageModel::train(&events, layout.clone(), overrides.adsage(run_seed), &mut observer)?)
        } else {
            Detector::Seq2one(Seq2oneModel::train(&events, layout.clone(), overrides.seq2one(run_seed), &mut observer)?)
        };
        let ckpt = Checkpoint {
            schema: inputs.schema.clone(),
            vocabs: vocabs.clone(),
            users: users.clone(),
            detector,
        };
        let path = run_path(&a.out, run, runs);
        ckpt.save(&path)?;
        let log = log_path(&path);
        std::fs::write(&log, progress).map_err(|e| ToolError::io(&log, e))?;
        log::info!("run {run}: wrote {}", path.display());
    }
    Ok(())
}

fn score(a: ScoreArgs, file: &FileConfig) -> ToolResult<()> {
    require_file(&a.input)?;
    if let Some(t) = &a.train {
        require_file(t)?;
    }
    require_output_dir(&a.out)?;
    let scored = match (&a.checkpoint, a.detector.as_deref()) {
        (Some(ckpt), _) => score_checkpoint(&a, ckpt, file)?,
        (None, Some(d)) => {
            let kind = d
                .strip_prefix("rule:")
                .and_then(RuleKind::parse)
                .ok_or_else(|| {
                    let kinds: Vec<&str> = RuleKind::ALL.iter().map(|k| k.name()).collect();
                    ToolError::Config(format!("unknown detector `{d}`; expected rule:<{}>", kinds.join("|")))
                })?;
            score_rule(&a, kind, file)?
        }
        (None, None) => return Err(ToolError::Config("give --checkpoint or --detector rule:<kind>".into())),
    };
    scores::write_scores_file(&a.out, &scored)?;
    log::info!("wrote {} scores to {}", scored.len(), a.out.display());
    Ok(())
}

fn score_checkpoint(a: &ScoreArgs, path: &Path, file: &FileConfig) -> ToolResult<Vec<ScoredEvent>> {
    require_file(path)?;
    let ckpt = Checkpoint::load(path)?;
    if let Some(spec) = &a.data.schema {
        // Entity widths come from the checkpoint; everything else must match.
        let mut given = ingest::load_schema(spec)?;
        for (g, c) in given.fields.iter_mut().zip(&ckpt.schema.fields) {
            g.dim = c.dim;
        }
        ckpt.check_schema(&given, path)?;
    }
    if let Some(p) = &a.data.word_vectors {
        require_file(p)?;
    }
    let options = ParseOptions {
        max_reject_fraction: a
            .data
            .max_reject_fraction
            .or(file.max_reject_fraction)
            .unwrap_or(DEFAULT_MAX_REJECT_FRACTION),
        ..ParseOptions::default()
    };
    let inputs = Inputs {
        schema: ckpt.schema.clone(),
        options: options.clone(),
        word_vectors: a.data.word_vectors.clone(),
        word_vector_limit: a.data.word_vector_limit.or(file.word_vector_limit),
    };
    let wv = inputs.word_vectors()?;
    let index = |p: &Path| -> ToolResult<_> {
        let mut raw = inputs.parse(p, &options)?;
        if let Some(users) = &ckpt.users {
            adsage_core::event::retain_users(&mut raw, users);
        }
        Ok(ckpt.vocabs.index_all(&raw, &ckpt.schema, wv.as_ref())?)
    };
    let history = a.train.as_deref().map(index).transpose()?;
    let events = index(&a.input)?;
    Ok(match &ckpt.detector {
        Detector::Adsage(m) => {
            let mut store = m.new_store();
            if let Some(h) = &history {
                m.warm_up(h, &mut store)?;
            }
            m.score(&events, &mut store)?
        }
        Detector::Seq2one(m) => {
            let mut store = m.new_store();
            if let Some(h) = &history {
                m.warm_up(h, &mut store)?;
            }
            m.score(&events, &mut store)?
        }
    })
}

fn score_rule(a: &ScoreArgs, kind: RuleKind, file: &FileConfig) -> ToolResult<Vec<ScoredEvent>> {
    let train_path = a
        .train
        .as_deref()
        .ok_or_else(|| ToolError::Config("rule detectors need --train".into()))?;
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let inputs = Inputs::resolve(&a.data, file, seed, None)?;
    let dest_names: Vec<&str> = inputs.schema.fields_of(FieldKind::Destination).map(|f| f.name.as_str()).collect();
    let fields = a
        .rule_fields
        .as_ref()
        .map(|names| {
            names
                .iter()
                .map(|n| {
                    dest_names
                        .iter()
                        .position(|d| d == n)
                        .ok_or_else(|| ToolError::Config(format!("`{n}` is not a destination field")))
                })
                .collect::<ToolResult<Vec<usize>>>()
        })
        .transpose()?;
    let wv = inputs.word_vectors()?;
    let train_raw = inputs.parse(train_path, &inputs.options)?;
    let mut test_raw = inputs.parse(
        &a.input,
        &ParseOptions {
            sample: SampleOptions::default(),
            ..inputs.options.clone()
        },
    )?;
    if inputs.sampling() {
        let users: BTreeSet<String> = train_raw.iter().map(|e| e.user.clone()).collect();
        adsage_core::event::retain_users(&mut test_raw, &users);
    }
    let vocabs = Vocabularies::build(&train_raw, &inputs.schema, wv.as_ref())?;
    let train = vocabs.index_all(&train_raw, &inputs.schema, wv.as_ref())?;
    let test = vocabs.index_all(&test_raw, &inputs.schema, wv.as_ref())?;
    let model = RuleModel::fit(&train, kind, &inputs.schema.destination_spaces(), fields.as_deref())?;
    Ok(model.score_all(&test))
}

fn eval(a: EvalArgs, file: &FileConfig) -> ToolResult<()> {
    let settings = EvalSettings {
        k_max: a.k_max.or(file.k_max).unwrap_or(50),
        step: a.step.or(file.step).unwrap_or(1),
        budgets: a.budgets.clone().or_else(|| file.budgets.clone()).unwrap_or_default(),
        aggregation: a.aggregation.or(file.aggregation).unwrap_or_default(),
    };
    settings.validate()?;
    for p in &a.scores {
        require_file(p)?;
    }
    if let Some(p) = &a.labels {
        require_file(p)?;
    }
    require_output_dir(&a.curve)?;
    require_output_dir(&a.summary)?;
    let labels = a.labels.as_deref().map(labels::read_labels_file).transpose()?.unwrap_or_default();
    let runs = a
        .scores
        .iter()
        .map(|p| report::evaluate_run(&scores::read_scores_file(p)?, &labels, &settings))
        .collect::<ToolResult<Vec<_>>>()?;
    let rows = report::summarize(&runs, &settings);
    let mut curve = Vec::new();
    report::write_curve(&mut curve, &runs)?;
    let mut summary = Vec::new();
    report::write_summary(&mut summary, &rows)?;
    std::fs::write(&a.curve, curve).map_err(|e| ToolError::io(&a.curve, e))?;
    std::fs::write(&a.summary, &summary).map_err(|e| ToolError::io(&a.summary, e))?;
    for r in rows.iter().filter(|r| r.scope == "all") {
        match (r.mean, r.ci95) {
            (Some(m), Some(ci)) => println!("CR-{} = {m:.4} ± {ci:.4} over {} run(s)", r.budget, r.runs),
            _ => println!("CR-{}: no malicious user-day", r.budget),
        }
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs, file: &FileConfig) -> ToolResult<()> {
    let seed = require_seed(a.seed, file)?;
    if a.configs == 0 || !(a.tolerance > 0.0) {
        return Err(ToolError::Config("configs and tolerance must be positive".into()));
    }
    let mut rng = component_rng(seed, streams::GRADCHECK);
    let reports = gradcheck::run_suite(a.configs, &mut rng);
    let mut failed = Vec::new();
    for r in &reports {
        let ok = r.passes(a.tolerance);
        println!(
            "{:<22} {:>6} gradients  max rel err {:.3e}  {}",
            r.name,
            r.checked,
            r.max_relative_error,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(ToolError::Data(format!("gradient check failed for {}", failed.join(", "))))
    }
}
