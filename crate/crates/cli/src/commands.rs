use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fusecat::bench::{bench, BenchConfig};
use fusecat::classifier::{
    evaluate, evaluate_predictions, select_c, train_traced, EvalReport, FeatureMatrix, ScoreMatrix,
    SvmModel, TrainConfig, DEFAULT_C_GRID,
};
use fusecat::descriptor::{DescriptorSet, Normalization, RecordInfo, TapSpec};
use fusecat::fusion::{
    best_single_tap, early_fuse_sets, late_fuse, layer_fusion_taps, majority_vote, Combiner,
    FusionMode, FusionPlan,
};
use fusecat::io::{read_manifest, save_model, ResizeMode, Split};
use fusecat::nn::{infer_shapes, model_catalog, preset, Preset};
use fusecat::synthetic::write_synth_dataset;
use fusecat::video::{
    aggregate_set, read_frame_manifest, sample_timestamps, vote_video, Aggregation, KeyframePlan,
};

use crate::extract::{extract_images, load_model_ref, ExtractJob};

/// Feature extraction, descriptor fusion and linear SVM classification.
#[derive(Debug, Parser)]
#[command(name = "fusecat", version)]
pub struct Cli {
    /// Seed for every random choice (weights, shuffles, synthetic data).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for extraction and benchmarking.
    #[arg(long, global = true, env = "FUSECAT_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print per-layer output shapes with flattened and pooled sizes.
    Shapes(ShapesArgs),
    /// Write a model file with seeded random weights.
    Init(InitArgs),
    /// Write a procedurally generated 3-class image set and its manifest.
    Synth(SynthArgs),
    /// Turn the images of a manifest into a descriptor file.
    Extract(ExtractArgs),
    /// Train a one-vs-rest linear SVM on a descriptor file.
    Train(TrainArgs),
    /// Evaluate an SVM on a descriptor file.
    Eval(EvalArgs),
    /// Fuse layers, descriptor files or classifier scores.
    Fuse(FuseArgs),
    /// Plan keyframe timestamps for videos.
    Keyframes(KeyframesArgs),
    /// Measure end-to-end throughput.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ShapesArgs {
    /// Preset name (alexnet, vgg16, vgg19, googlenet, tiny) or model code (M1..M7).
    #[arg(long)]
    pub preset: String,
    /// Input scale; defaults to the preset's native scale.
    #[arg(long)]
    pub scale: Option<usize>,
    /// Only print these layers.
    #[arg(long = "layer")]
    pub layers: Vec<String>,
    /// Only print the layers used for layer fusion.
    #[arg(long)]
    pub top: bool,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Model code, preset name or preset@scale.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 50)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 32)]
    pub size: u32,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ResizeArg {
    Warp,
    Crop,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    Whole,
    PerBlock,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregateArg {
    Mean,
    Max,
    /// Keep one row per frame (for per-frame voting at evaluation).
    None,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Image manifest (`path<TAB>label<TAB>split`), or a frame manifest with --frames.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Model file, model code, preset name or preset@scale.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated `layer:max|sum|flatten` taps.
    #[arg(long, value_delimiter = ',', conflicts_with = "layers")]
    pub taps: Vec<TapSpec>,
    /// Fuse the k lowest layers of the model's top-layer list.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Directory image paths are relative to; defaults to the manifest's.
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ResizeArg::Warp)]
    pub resize: ResizeArg,
    #[arg(long, value_enum, default_value_t = NormArg::Whole)]
    pub normalize: NormArg,
    /// Treat the manifest as `video-id<TAB>frame-path<TAB>timestamp` lines.
    #[arg(long)]
    pub frames: bool,
    /// How frame rows are combined into one row per video.
    #[arg(long, value_enum, default_value_t = AggregateArg::Mean, requires = "frames")]
    pub aggregate: AggregateArg,
    /// Labels and splits per video, as an image manifest keyed by video id.
    #[arg(long, requires = "frames")]
    pub videos: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    fn apply(self, set: DescriptorSet) -> DescriptorSet {
        match self {
            SplitArg::Train => set.filter_split(Split::Train),
            SplitArg::Test => set.filter_split(Split::Test),
            SplitArg::All => set,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Choose C from {0.01, 0.1, 1, 10} by cross-validation.
    #[arg(long)]
    pub grid: bool,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    pub split: SplitArg,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Rows sharing an id are frames of one video; classify each and vote.
    #[arg(long)]
    pub vote: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// `layer`, `early`, `late`, or a fusion plan file.
    #[arg(long)]
    pub plan: String,
    /// Descriptor files to fuse (early and late modes).
    #[arg(long = "in", num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// SVM files scoring each input (late mode over descriptor files).
    #[arg(long = "models", num_args = 1..)]
    pub svms: Vec<PathBuf>,
    /// Network models to extract with (instead of --in); needs --manifest.
    #[arg(long = "model", num_args = 1..)]
    pub networks: Vec<String>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Layer count for layer mode; in early and late modes, fuse this many
    /// layers per member instead of using its best single layer.
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Late-fusion weights, one per member, summing to 1.
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
    #[arg(long)]
    pub vote: bool,
    /// SVM C when late fusion trains its member classifiers.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct KeyframesArgs {
    /// Clip durations in seconds.
    #[arg(long = "duration", value_delimiter = ',')]
    pub durations: Vec<f64>,
    /// File of `video-id<TAB>seconds` lines.
    #[arg(long)]
    pub list: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub interval: f64,
    #[arg(long, default_value_t = 0.0)]
    pub offset: f64,
    #[arg(long)]
    pub max_frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Models to time; model files, codes, preset names or preset@scale.
    #[arg(long = "model", num_args = 1.., default_values_t = ["M1".to_string(), "M3".to_string()])]
    pub models: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    #[arg(long, default_value_t = 256)]
    pub source_size: u32,
    #[arg(long)]
    pub json: bool,
}

pub fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    if cli.threads == 0 {
        bail!("--threads must be at least 1");
    }
    match cli.command {
        Command::Shapes(a) => shapes(a, out),
        Command::Init(a) => init(a, cli.seed, out),
        Command::Synth(a) => synth(a, cli.seed, out),
        Command::Extract(a) => extract(a, cli.seed, cli.threads, out),
        Command::Train(a) => train(a, cli.seed, out),
        Command::Eval(a) => eval(a, out),
        Command::Fuse(a) => fuse(a, cli.seed, cli.threads, out),
        Command::Keyframes(a) => keyframes(a, out),
        Command::Bench(a) => bench_cmd(a, cli.seed, cli.threads, out),
    }
}

fn shapes(a: ShapesArgs, out: &mut impl Write) -> Result<()> {
    let (which, default_scale) = match model_catalog()
        .iter()
        .find(|e| e.code.eq_ignore_ascii_case(&a.preset))
    {
        Some(e) => (e.preset, e.scale),
        None => {
            let p: Preset = a.preset.parse()?;
            (p, p.native_scale())
        }
    };
    let net = preset(which, a.scale.unwrap_or(default_scale))?;
    let shapes = infer_shapes(&net)?;
    if let Some(name) = a.layers.iter().find(|l| !shapes.contains_key(l.as_str())) {
        bail!("no layer named `{name}` in {}", net.code_name);
    }
    for (name, shape) in &shapes {
        if (!a.layers.is_empty() && !a.layers.contains(name)) || (a.top && !net.top_taps.contains(name)) {
            continue;
        }
        writeln!(
            out,
            "{name} {}x{}x{} linear={} pooled={}",
            shape.channels,
            shape.height,
            shape.width,
            shape.len(),
            shape.channels
        )?;
    }
    Ok(())
}

fn init(a: InitArgs, seed: u64, out: &mut impl Write) -> Result<()> {
    let (net, weights) = load_model_ref(&a.model, seed)?;
    save_model(&a.out, &net, &weights)?;
    writeln!(
        out,
        "wrote {} ({} parameters) to {}",
        net.code_name,
        weights.parameter_count(),
        a.out.display()
    )?;
    Ok(())
}

fn synth(a: SynthArgs, seed: u64, out: &mut impl Write) -> Result<()> {
    let records = write_synth_dataset(&a.out, a.train_per_class, a.test_per_class, a.size, seed)?;
    writeln!(
        out,
        "wrote {} images and {}",
        records.len(),
        a.out.join("manifest.tsv").display()
    )?;
    Ok(())
}

fn base_dir(manifest: &Path, root: Option<&Path>) -> PathBuf {
    root.map(Path::to_path_buf)
        .unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default())
}

/// Image paths and record identities from an image manifest.
fn manifest_items(manifest: &Path, root: Option<&Path>) -> Result<Vec<(PathBuf, RecordInfo)>> {
    let base = base_dir(manifest, root);
    let records = read_manifest(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    Ok(records
        .into_iter()
        .map(|r| {
            let info = RecordInfo {
                id: r.path.clone(),
                label: Some(r.label),
                split: Some(r.split),
            };
            (base.join(&r.path), info)
        })
        .collect())
}

fn extract(a: ExtractArgs, seed: u64, threads: usize, out: &mut impl Write) -> Result<()> {
    let (net, weights) = load_model_ref(&a.model, seed)?;
    let taps = match (a.layers, a.taps.is_empty()) {
        (Some(k), _) => layer_fusion_taps(&net, k)?,
        (None, false) => a.taps.clone(),
        (None, true) => vec![best_single_tap(&net)?],
    };
    let items = if a.frames {
        frame_items(&a)?
    } else {
        manifest_items(&a.manifest, a.root.as_deref())?
    };
    let job = ExtractJob {
        net: &net,
        weights: &weights,
        taps: &taps,
        norm: match a.normalize {
            NormArg::Whole => Normalization::Whole,
            NormArg::PerBlock => Normalization::PerBlock,
            NormArg::None => Normalization::None,
        },
        resize: match a.resize {
            ResizeArg::Warp => ResizeMode::Warp,
            ResizeArg::Crop => ResizeMode::ShorterSideCenterCrop,
        },
        threads,
    };
    let mut set = extract_images(&job, &items)?;
    if a.frames {
        set = match a.aggregate {
            AggregateArg::Mean => aggregate_set(&set, Aggregation::Mean)?,
            AggregateArg::Max => aggregate_set(&set, Aggregation::Max)?,
            AggregateArg::None => set,
        };
    }
    set.save(&a.out)?;
    writeln!(
        out,
        "extracted {} descriptors of dim {} with {} to {}",
        set.len(),
        set.dim,
        net.code_name,
        a.out.display()
    )?;
    Ok(())
}

/// Frame paths keyed by video id, with labels from the optional video list.
fn frame_items(a: &ExtractArgs) -> Result<Vec<(PathBuf, RecordInfo)>> {
    let base = base_dir(&a.manifest, a.root.as_deref());
    let frames = read_frame_manifest(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let videos = match &a.videos {
        Some(p) => read_manifest(p).with_context(|| format!("reading {}", p.display()))?,
        None => vec![],
    };
    frames
        .into_iter()
        .map(|f| {
            let video = videos.iter().find(|v| v.path == f.video_id);
            if !videos.is_empty() && video.is_none() {
                bail!("video `{}` has no entry in the video list", f.video_id);
            }
            let info = RecordInfo {
                id: f.video_id,
                label: video.map(|v| v.label.clone()),
                split: video.map(|v| v.split),
            };
            Ok((base.join(&f.path), info))
        })
        .collect()
}

fn labels_of(set: &DescriptorSet) -> Result<Vec<String>> {
    set.records
        .iter()
        .map(|r| {
            r.label
                .clone()
                .ok_or_else(|| anyhow!("record `{}` has no label", r.id))
        })
        .collect()
}

fn load_set(path: &Path, split: SplitArg) -> Result<DescriptorSet> {
    let set = DescriptorSet::load(path).with_context(|| format!("reading {}", path.display()))?;
    let set = split.apply(set);
    if set.is_empty() {
        bail!("{} has no records in the requested split", path.display());
    }
    Ok(set)
}

fn train_set(
    set: &DescriptorSet,
    cfg: &TrainConfig,
    grid: Option<usize>,
) -> Result<(SvmModel, usize, f64)> {
    let x = FeatureMatrix::from(set);
    let y = labels_of(set)?;
    let cfg = match grid {
        Some(folds) => TrainConfig {
            c: select_c(&x, &y, &DEFAULT_C_GRID, folds, cfg)?.0,
            ..*cfg
        },
        None => *cfg,
    };
    let (model, traces) = train_traced(&x, &y, &cfg)?;
    let converged = traces.iter().filter(|t| t.converged).count();
    Ok((model, converged, cfg.c))
}

fn train(a: TrainArgs, seed: u64, out: &mut impl Write) -> Result<()> {
    let set = load_set(&a.input, a.split)?;
    let cfg = TrainConfig {
        c: a.c,
        tolerance: a.tolerance,
        max_epochs: a.max_epochs,
        seed,
        ..Default::default()
    };
    let (model, converged, c) = train_set(&set, &cfg, a.grid.then_some(a.folds))?;
    model.save(&a.out)?;
    writeln!(
        out,
        "trained {} classes on {} samples of dim {} with C={c}; {converged}/{} converged",
        model.num_classes(),
        set.len(),
        set.dim,
        model.num_classes()
    )?;
    Ok(())
}

fn write_report(report: &EvalReport, json: bool, out: &mut impl Write) -> Result<()> {
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(report)?)?;
        return Ok(());
    }
    writeln!(out, "accuracy {:.4}", report.accuracy)?;
    writeln!(out, "sample_accuracy {:.4}", report.sample_accuracy)?;
    for (label, acc) in report.labels.iter().zip(&report.per_class_accuracy) {
        match acc {
            Some(acc) => writeln!(out, "class {label} {acc:.4}")?,
            None => writeln!(out, "class {label} -")?,
        }
    }
    Ok(())
}

fn eval(a: EvalArgs, out: &mut impl Write) -> Result<()> {
    let model = SvmModel::load(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let set = load_set(&a.input, a.split)?;
    let labels = labels_of(&set)?;
    let report = if a.vote {
        let predicted = model.predict(&FeatureMatrix::from(&set))?;
        let (votes, truth) = vote_by_id(&set, &predicted, &labels, &model)?;
        evaluate_predictions(&votes, &truth, &model.labels)?
    } else {
        evaluate(&model, &FeatureMatrix::from(&set), &labels)?
    };
    write_report(&report, a.json, out)
}

/// Per-video majority votes and truths, in order of first appearance.
fn vote_by_id(
    set: &DescriptorSet,
    predicted: &[usize],
    labels: &[String],
    model: &SvmModel,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut ids: Vec<&str> = Vec::new();
    for r in &set.records {
        if !ids.contains(&r.id.as_str()) {
            ids.push(&r.id);
        }
    }
    let mut votes = Vec::with_capacity(ids.len());
    let mut truth = Vec::with_capacity(ids.len());
    for id in ids {
        let rows: Vec<usize> = (0..set.len()).filter(|&i| set.records[i].id == id).collect();
        let frame_votes: Vec<usize> = rows.iter().map(|&i| predicted[i]).collect();
        votes.push(vote_video(&frame_votes, model.num_classes())?);
        truth.push(model.class_index(&labels[rows[0]])?);
    }
    Ok((votes, truth))
}

fn fusion_plan(a: &FuseArgs) -> Result<FusionPlan> {
    let plan = match a.plan.as_str() {
        "layer" => {
            let [model] = a.networks.as_slice() else {
                bail!("layer fusion takes exactly one --model");
            };
            FusionPlan::layer(model.clone(), a.layers.unwrap_or(8))
        }
        "early" | "late" => {
            let mode: FusionMode = a.plan.parse()?;
            let mut plan = FusionPlan::models(mode, a.networks.iter().cloned());
            if !a.inputs.is_empty() {
                plan = FusionPlan::models(mode, a.inputs.iter().map(|p| p.display().to_string()));
            }
            plan
        }
        path => FusionPlan::load(path).with_context(|| format!("reading fusion plan {path}"))?,
    };
    let mut plan = plan;
    if a.vote {
        plan.combiner = Combiner::Vote;
    }
    if !a.weights.is_empty() {
        plan.weights = Some(a.weights.clone());
    }
    plan.validate()?;
    Ok(plan)
}

fn fuse(a: FuseArgs, seed: u64, threads: usize, out: &mut impl Write) -> Result<()> {
    let plan = fusion_plan(&a)?;
    let sets: Vec<DescriptorSet> = match (&a.manifest, a.inputs.is_empty()) {
        (Some(_), false) => bail!("give either --in or --manifest, not both"),
        (None, false) => {
            if plan.mode == FusionMode::Layer {
                bail!("layer fusion extracts from images; give --manifest");
            }
            if a.inputs.len() != plan.members.len() {
                bail!("{} inputs for {} plan members", a.inputs.len(), plan.members.len());
            }
            a.inputs
                .iter()
                .map(|p| DescriptorSet::load(p).with_context(|| format!("reading {}", p.display())))
                .collect::<Result<_>>()?
        }
        (Some(manifest), true) => {
            let items = manifest_items(manifest, a.root.as_deref())?;
            plan.members
                .iter()
                .map(|m| {
                    let (net, weights) = load_model_ref(&m.model, seed)?;
                    let taps = match plan.mode {
                        FusionMode::Layer => layer_fusion_taps(&net, plan.layer_count.unwrap_or(8))?,
                        _ if !m.taps.is_empty() => m.taps.clone(),
                        _ => match a.layers {
                            Some(k) => layer_fusion_taps(&net, k)?,
                            None => vec![best_single_tap(&net)?],
                        },
                    };
                    let job = ExtractJob {
                        net: &net,
                        weights: &weights,
                        taps: &taps,
                        norm: Normalization::Whole,
                        resize: ResizeMode::Warp,
                        threads,
                    };
                    extract_images(&job, &items)
                })
                .collect::<Result<_>>()?
        }
        (None, true) => bail!("nothing to fuse; give --in or --manifest"),
    };

    match plan.mode {
        FusionMode::Layer | FusionMode::Early => {
            let fused = early_fuse_sets(&sets)?;
            let path = a.out.as_ref().ok_or_else(|| anyhow!("{} fusion needs --out", plan.mode))?;
            fused.save(path)?;
            writeln!(
                out,
                "fused {} records of dim {} ({}) to {}",
                fused.len(),
                fused.dim,
                fused.meta.model_code,
                path.display()
            )?;
            Ok(())
        }
        FusionMode::Late => late(&a, &plan, sets, seed, out),
    }
}

fn late(
    a: &FuseArgs,
    plan: &FusionPlan,
    sets: Vec<DescriptorSet>,
    seed: u64,
    out: &mut impl Write,
) -> Result<()> {
    let models: Vec<SvmModel> = if a.svms.is_empty() {
        if a.manifest.is_none() {
            bail!("late fusion over descriptor files needs one --models SVM per input");
        }
        let cfg = TrainConfig {
            c: a.c,
            seed,
            ..Default::default()
        };
        sets.iter()
            .map(|s| Ok(train_set(&s.filter_split(Split::Train), &cfg, None)?.0))
            .collect::<Result<_>>()?
    } else {
        if a.svms.len() != sets.len() {
            bail!("{} SVMs for {} inputs", a.svms.len(), sets.len());
        }
        a.svms
            .iter()
            .map(|p| SvmModel::load(p).with_context(|| format!("reading {}", p.display())))
            .collect::<Result<_>>()?
    };
    if models.windows(2).any(|w| w[0].labels != w[1].labels) {
        bail!("member classifiers disagree on the label set");
    }
    let sets: Vec<DescriptorSet> = sets.into_iter().map(|s| a.split.apply(s)).collect();
    let first = &sets[0];
    if first.is_empty() {
        bail!("no records in the requested split");
    }
    if sets
        .iter()
        .any(|s| s.len() != first.len() || s.records.iter().zip(&first.records).any(|(x, y)| x.id != y.id))
    {
        bail!("member descriptor files do not describe the same records");
    }
    let scores: Vec<ScoreMatrix> = models
        .iter()
        .zip(&sets)
        .map(|(m, s)| Ok(m.decision_scores(&FeatureMatrix::from(s))?))
        .collect::<Result<_>>()?;
    let predicted = match plan.combiner {
        Combiner::Mean => late_fuse(&scores, plan.weights.as_deref())?.labels,
        Combiner::Vote => majority_vote(&scores)?,
    };
    if let Some(path) = &a.out {
        let mut text = String::new();
        for (r, &p) in first.records.iter().zip(&predicted) {
            text.push_str(&format!("{}\t{}\n", r.id, models[0].labels[p]));
        }
        std::fs::write(path, text)?;
    }
    let labels = labels_of(first)?;
    let truth = models[0].encode_labels(&labels)?;
    let report = evaluate_predictions(&predicted, &truth, &models[0].labels)?;
    write_report(&report, a.json, out)
}

fn keyframes(a: KeyframesArgs, out: &mut impl Write) -> Result<()> {
    let plan = KeyframePlan::new(a.interval, a.offset, a.max_frames)?;
    let mut clips: Vec<(String, f64)> = a
        .durations
        .iter()
        .enumerate()
        .map(|(i, &d)| (format!("clip{i}"), d))
        .collect();
    if let Some(list) = &a.list {
        let text = std::fs::read_to_string(list).with_context(|| format!("reading {}", list.display()))?;
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, secs) = line
                .split_once('\t')
                .ok_or_else(|| anyhow!("{} line {}: expected id<TAB>seconds", list.display(), n + 1))?;
            let secs: f64 = secs
                .trim()
                .parse()
                .with_context(|| format!("{} line {}", list.display(), n + 1))?;
            clips.push((id.to_string(), secs));
        }
    }
    if clips.is_empty() {
        bail!("give --duration or --list");
    }
    for (id, duration) in clips {
        if duration.is_nan() || duration < 0.0 {
            bail!("clip {id}: duration must be nonnegative, got {duration}");
        }
        for (i, t) in sample_timestamps(duration, &plan).into_iter().enumerate() {
            writeln!(out, "{id}\t{i}\t{t:.3}")?;
        }
    }
    Ok(())
}

fn bench_cmd(a: BenchArgs, seed: u64, threads: usize, out: &mut impl Write) -> Result<()> {
    let models = a
        .models
        .iter()
        .map(|m| load_model_ref(m, seed))
        .collect::<Result<Vec<_>>>()?;
    let cfg = BenchConfig {
        iterations: a.iterations,
        warmup: a.warmup,
        threads,
        seed,
        source_size: a.source_size,
    };
    let report = bench(&models, &cfg)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        write!(out, "{}", report.to_table())?;
    }
    Ok(())
}
