//! Command-line driver for the parcel-level land-use mapping pipeline.
//!
//! Subcommands: `synth` (generate a synthetic city), `parcels`, `features`,
//! `train-pixel`, `train-parcel`, `run` (two-stage pipeline or one-stage
//! baseline), `eval`, and `importance`.
//!
//! All randomness flows from one `--seed`; stage sub-seeds derive from it, so
//! reruns with the same inputs and seed overwrite outputs byte for byte
//! regardless of `--workers`. Wall-clock timings go to `timings.json`, which
//! is the one output file excluded from that determinism contract.
//!
//! Exit codes: 0 success, 2 usage, 3 input parse failure, 4 pipeline failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use parcelmap_core::error::Error as CoreError;
use parcelmap_core::eval::{build_confusion, ConfusionMatrix};
use parcelmap_core::features::feature_categories;
use parcelmap_core::forest::{ForestModel, TrainConfig};
use parcelmap_core::geom::{repair_topology, DEFAULT_EXTEND_MAX, DEFAULT_TRIM_MIN};
use parcelmap_core::io::{bandfile, geojson, sha256_file, tables};
use parcelmap_core::parcels::generate_parcels;
use parcelmap_core::pipeline::{
    build_all_parcel_features, run_one_stage_baseline, run_two_stage, PipelineConfig, RunOutput,
};
use parcelmap_core::scheme::{ClassId, Level};
use parcelmap_core::synth::{self, SynthConfig};

#[derive(Parser)]
#[command(
    name = "parcelmap",
    version,
    about = "Parcel-level urban land-use mapping from imagery, POIs, and AOIs"
)]
struct Cli {
    /// Worker threads (0 = one per core). Outputs are identical for any value.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LevelArg {
    L0,
    L1,
    L2,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::L0 => Level::L0,
            LevelArg::L1 => Level::L1,
            LevelArg::L2 => Level::L2,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic city dataset with ground truth
    Synth(SynthArgs),
    /// Generate land parcels from the input layers
    Parcels(ParcelsArgs),
    /// Compute per-parcel feature vectors
    Features(FeaturesArgs),
    /// Train the pixel-level spectral forest
    TrainPixel(TrainPixelArgs),
    /// Train the built-up parcel-level forest
    TrainParcel(TrainParcelArgs),
    /// Run the two-stage pipeline (or the one-stage baseline)
    Run(RunArgs),
    /// Evaluate predicted labels against reference labels
    Eval(EvalArgs),
    /// Report the feature importance of a trained model
    Importance(ImportanceArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator config TOML (flags override its values)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    grid_cells: Option<usize>,
    #[arg(long)]
    pitch_cells: Option<usize>,
    /// Minimum margin between the road grid and the admin edge, meters
    #[arg(long)]
    min_margin: Option<f64>,
    #[arg(long)]
    noise_multiplier: Option<f64>,
    #[arg(long)]
    train_per_class: Option<usize>,
}

#[derive(Args)]
struct ParcelsArgs {
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Drop parcels smaller than this many cells
    #[arg(long, default_value_t = 1)]
    min_cells: usize,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_aoi: bool,
    /// POI kernel bandwidth in meters
    #[arg(long)]
    bandwidth: Option<f64>,
    /// POI/AOI category granularity
    #[arg(long, value_enum)]
    category_level: Option<LevelArg>,
    /// Also write the normalized POI density surfaces into this directory
    #[arg(long)]
    dump_densities: Option<PathBuf>,
}

#[derive(Args)]
struct TrainPixelArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output model JSON path
    #[arg(long)]
    out: PathBuf,
    /// Label level for the pixel model
    #[arg(long, value_enum, default_value = "l2")]
    level: LevelArg,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainParcelArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_aoi: bool,
    /// Train on all training samples instead of built-up ones only
    #[arg(long)]
    all_classes: bool,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Run the one-stage baseline instead of the two-stage pipeline
    #[arg(long)]
    baseline: bool,
    /// Drop AOI features from the parcel model
    #[arg(long)]
    no_aoi: bool,
    /// Pipeline config TOML (flags override its values)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Built-up area proportion threshold
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    trees: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted labels: either a run's labels.csv or a parcel_id,code table
    #[arg(long)]
    pred: PathBuf,
    /// Reference labels: parcel_id,code table (level-2 codes roll up)
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum, default_value = "l1")]
    level: LevelArg,
    /// Output directory for the confusion matrix (JSON and text)
    #[arg(long)]
    out: PathBuf,
    /// Optional file of parcel ids (one per line) to restrict the evaluation
    #[arg(long)]
    ids: Option<PathBuf>,
}

#[derive(Args)]
struct ImportanceArgs {
    /// Trained model JSON
    #[arg(long)]
    model: PathBuf,
    /// Optional JSON output path (table prints to stdout regardless)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .format_timestamp(None)
        .init();
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .expect("worker pool set once at startup");
    }
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Parcels(args) => cmd_parcels(args),
        Command::Features(args) => cmd_features(args),
        Command::TrainPixel(args) => cmd_train_pixel(args),
        Command::TrainParcel(args) => cmd_train_parcel(args),
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Importance(args) => cmd_importance(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

/// 3 for input parsing problems, 4 for pipeline-stage failures.
fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<CoreError>() {
        Some(
            CoreError::Parse { .. }
            | CoreError::Io(_)
            | CoreError::Json(_)
            | CoreError::InvalidScheme(_),
        ) => 3,
        Some(_) => 4,
        None => 3, // toml/config/argument-shape problems
    }
}

fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| anyhow::anyhow!("parsing {}: {e}", path.display()))
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let mut config: SynthConfig = match &args.config {
        Some(path) => load_toml(path)?,
        None => SynthConfig::default(),
    };
    config.seed = args.seed;
    if let Some(v) = args.grid_cells {
        config.grid_side_cells = v;
    }
    if let Some(v) = args.pitch_cells {
        config.road_pitch_cells = v;
    }
    if let Some(v) = args.min_margin {
        config.min_margin_m = v;
    }
    if let Some(v) = args.noise_multiplier {
        config.noise_multiplier = v;
    }
    if let Some(v) = args.train_per_class {
        config.train_per_class = v;
    }
    let t0 = Instant::now();
    let dataset = synth::generate(&config)?;
    info!("generated {} parcels in {:.2}s", dataset.parcels.len(), t0.elapsed().as_secs_f32());
    dataset.write_to_dir(&args.out)?;
    println!(
        "dataset: {} parcels ({} expected), {} POIs, {} AOIs -> {}",
        dataset.parcels.len(),
        dataset.expected_parcel_count,
        dataset.inputs.pois.len(),
        dataset.inputs.aois.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_parcels(args: ParcelsArgs) -> anyhow::Result<()> {
    let data = synth::load_dataset(&args.data)?;
    let inputs = &data.inputs;
    let roads = repair_topology(&inputs.roads, DEFAULT_EXTEND_MAX, DEFAULT_TRIM_MIN);
    let parcels = generate_parcels(
        &inputs.admin,
        &roads,
        &inputs.water,
        inputs.raster.grid(),
        args.min_cells,
    )?;
    std::fs::create_dir_all(&args.out)?;
    geojson::write_parcels(&args.out.join("parcels.geojson"), &parcels, &inputs.scheme)?;
    println!("{} parcels -> {}", parcels.len(), args.out.join("parcels.geojson").display());
    Ok(())
}

fn cmd_features(args: FeaturesArgs) -> anyhow::Result<()> {
    let data = synth::load_dataset(&args.data)?;
    let mut config = PipelineConfig { include_aoi: !args.no_aoi, ..Default::default() };
    if let Some(b) = args.bandwidth {
        config.poi_bandwidth = b;
    }
    if let Some(l) = args.category_level {
        config.category_level = l.into();
    }
    if let Some(dir) = &args.dump_densities {
        std::fs::create_dir_all(dir)?;
        let scheme = &data.inputs.scheme;
        let categories = feature_categories(scheme, config.category_level);
        let maps = parcelmap_core::pipeline::poi_density_maps(
            &data.inputs.pois,
            &categories,
            data.inputs.raster.grid(),
            config.poi_bandwidth,
        )?;
        for (class, band) in &maps {
            let code = &scheme.class(*class)?.code;
            bandfile::write_band(&dir.join(format!("poi_density_{code}.asc")), band)?;
        }
    }
    let (parcels, features) = build_all_parcel_features(&data.inputs, &config)?;
    let rows: Vec<(u32, &parcelmap_core::features::FeatureVector)> = parcels
        .iter()
        .map(|p| (p.id, features.get(&p.id).expect("features built for every parcel")))
        .collect();
    tables::write_features(&args.out, &rows)?;
    println!("{} parcels x {} features -> {}", rows.len(),
        rows.first().map_or(0, |(_, f)| f.values.len()), args.out.display());
    Ok(())
}

fn cmd_train_pixel(args: TrainPixelArgs) -> anyhow::Result<()> {
    let data = synth::load_dataset(&args.data)?;
    let mut raster = data.inputs.raster.clone();
    raster.derive_indices()?;
    let mut forest_cfg = TrainConfig { seed: args.seed, ..Default::default() };
    if let Some(t) = args.trees {
        forest_cfg.n_trees = t;
    }
    let model = parcelmap_core::pipeline::train_pixel_model(
        &raster,
        &data.inputs.pixel_blocks,
        &data.inputs.scheme,
        args.level.into(),
        &forest_cfg,
    )?;
    std::fs::write(&args.out, model.to_json()?)?;
    println!("pixel model: {} classes, {} trees -> {}",
        model.classes.len(), model.trees.len(), args.out.display());
    Ok(())
}

fn cmd_train_parcel(args: TrainParcelArgs) -> anyhow::Result<()> {
    let data = synth::load_dataset(&args.data)?;
    let config = PipelineConfig { include_aoi: !args.no_aoi, ..Default::default() };
    let mut forest_cfg = TrainConfig { seed: args.seed, ..Default::default() };
    if let Some(t) = args.trees {
        forest_cfg.n_trees = t;
    }
    let scheme = &data.inputs.scheme;
    let (parcels, features) = build_all_parcel_features(&data.inputs, &config)?;
    let by_id: BTreeMap<u32, _> = parcels.iter().map(|p| (p.id, p)).collect();
    let mut samples = Vec::new();
    for s in &data.inputs.parcel_training {
        if !args.all_classes && !scheme.is_builtup(s.label)? {
            continue;
        }
        anyhow::ensure!(
            by_id.contains_key(&s.parcel_id),
            "training sample names unknown parcel {}",
            s.parcel_id
        );
        let fv = features.get(&s.parcel_id).expect("features built for every parcel");
        samples.push(parcelmap_core::forest::TrainingSample {
            id: s.parcel_id as u64,
            features: fv.values.clone(),
            label: s.label,
        });
    }
    let schema = features
        .values()
        .next()
        .map(|fv| (*fv.schema).clone())
        .ok_or_else(|| anyhow::anyhow!("no parcels to train on"))?;
    let model = parcelmap_core::forest::train(&samples, &schema, &forest_cfg)?;
    std::fs::write(&args.out, model.to_json()?)?;
    println!("parcel model: {} classes, {} samples -> {}",
        model.classes.len(), samples.len(), args.out.display());
    Ok(())
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let mut config: PipelineConfig = match &args.config {
        Some(path) => load_toml(path)?,
        None => PipelineConfig::default(),
    };
    if args.no_aoi {
        config.include_aoi = false;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(t) = args.threshold {
        config.builtup_threshold = t;
    }
    if let Some(b) = args.bandwidth {
        config.poi_bandwidth = b;
    }
    if let Some(t) = args.trees {
        config.pixel_forest.n_trees = t;
        config.parcel_forest.n_trees = t;
    }

    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    let t0 = Instant::now();
    let data = synth::load_dataset(&args.data)?;
    timings.insert("load_s".into(), t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let output = if args.baseline {
        run_one_stage_baseline(&data.inputs, &config)?
    } else {
        run_two_stage(&data.inputs, &config)?
    };
    timings.insert("pipeline_s".into(), t1.elapsed().as_secs_f64());
    info!(
        "{} parcels labeled ({} built-up / {} non-built-up)",
        output.stats.parcels, output.stats.builtup_parcels, output.stats.nonbuiltup_parcels
    );

    let t2 = Instant::now();
    let scheme = &data.inputs.scheme;
    std::fs::create_dir_all(&args.out)?;
    let map_path = args.out.join("map.geojson");
    output.map.write_geojson(&map_path, scheme)?;
    let label_rows = output.map.label_rows(scheme)?;
    write_label_table(&args.out.join("labels.csv"), &label_rows)?;
    let grid = data.inputs.raster.grid();
    for (level, name) in [(Level::L1, "parcel_class_l1.asc"), (Level::L2, "parcel_class_l2.asc")] {
        let band = output.map.rendered_class_band(grid, level)?;
        bandfile::write_band(&args.out.join(name), &band.to_band())?;
    }
    if let Some(pixel) = &output.map.pixel_class {
        bandfile::write_band(&args.out.join("pixel_class.asc"), &pixel.to_band())?;
    }
    if let Some(model) = &output.pixel_model {
        std::fs::write(args.out.join("model_pixel.json"), model.to_json()?)?;
    }
    if let Some(model) = &output.parcel_model {
        std::fs::write(args.out.join("model_parcel.json"), model.to_json()?)?;
    }

    // confusion matrices against ground truth when the dataset ships it
    let mut metrics = serde_json::Map::new();
    if !data.truth_l2.is_empty() {
        for level in [Level::L0, Level::L1, Level::L2] {
            if let Some(matrix) = confusion_against_truth(&output, &data.truth_l2, scheme, level)? {
                let tag = level.name().to_ascii_lowercase();
                std::fs::write(
                    args.out.join(format!("confusion_{tag}.json")),
                    serde_json::to_string_pretty(&matrix)?,
                )?;
                std::fs::write(
                    args.out.join(format!("confusion_{tag}.txt")),
                    matrix.to_text(scheme),
                )?;
                metrics.insert(
                    format!("oa_{tag}"),
                    serde_json::json!(matrix.overall_accuracy().ok()),
                );
                metrics.insert(format!("kappa_{tag}"), serde_json::json!(matrix.kappa().ok()));
            }
        }
    }
    timings.insert("write_s".into(), t2.elapsed().as_secs_f64());

    // deterministic run report; wall-clock goes to timings.json instead
    let mut hashes = BTreeMap::new();
    for entry in std::fs::read_dir(&args.out)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().to_string();
        if entry.path().is_file() && name != "report.json" && name != "timings.json" {
            hashes.insert(name, sha256_file(&entry.path())?);
        }
    }
    let report = serde_json::json!({
        "command": if args.baseline { "run --baseline" } else { "run" },
        "data": args.data.display().to_string(),
        "config": config,
        "stats": output.stats,
        "metrics": metrics,
        "outputs": hashes,
    });
    std::fs::write(args.out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    std::fs::write(
        args.out.join("timings.json"),
        serde_json::to_string_pretty(&serde_json::json!(timings))? + "\n",
    )?;
    println!(
        "map: {} parcels ({} BUR / {} NBUR) -> {}",
        output.stats.parcels,
        output.stats.builtup_parcels,
        output.stats.nonbuiltup_parcels,
        args.out.display()
    );
    Ok(())
}

fn confusion_against_truth(
    output: &RunOutput,
    truth_l2: &[(u32, ClassId)],
    scheme: &parcelmap_core::scheme::CategoryScheme,
    level: Level,
) -> anyhow::Result<Option<ConfusionMatrix>> {
    let truth: BTreeMap<u32, ClassId> = truth_l2.iter().copied().collect();
    let mut pairs = Vec::new();
    for r in &output.map.records {
        let Some(&t) = truth.get(&r.id) else {
            continue;
        };
        let reference = scheme.ancestor_at(t, level)?.id;
        let predicted = match level {
            Level::L0 => r.level0,
            Level::L1 => r.level1,
            Level::L2 => match r.level2 {
                Some(c) => c,
                None => return Ok(None),
            },
        };
        pairs.push((predicted, reference));
    }
    if pairs.is_empty() {
        return Ok(None);
    }
    let classes: Vec<ClassId> = scheme.classes_at(level).iter().map(|c| c.id).collect();
    Ok(Some(build_confusion(&pairs, &classes)?))
}

fn write_label_table(path: &Path, rows: &[(u32, String, String, String)]) -> anyhow::Result<()> {
    let mut out = String::from("parcel_id,l0,l1,l2\n");
    for (id, l0, l1, l2) in rows {
        out.push_str(&format!("{id},{l0},{l1},{l2}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let scheme = parcelmap_core::scheme::default_scheme();
    let level: Level = args.level.into();
    let predicted = read_predictions(&args.pred, &scheme, level)?;
    let truth = read_reference(&args.truth, &scheme, level)?;
    let keep: Option<std::collections::BTreeSet<u32>> = match &args.ids {
        Some(path) => Some(
            std::fs::read_to_string(path)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.trim().parse::<u32>())
                .collect::<Result<_, _>>()
                .map_err(|e| anyhow::anyhow!("parsing {}: {e}", path.display()))?,
        ),
        None => None,
    };

    let truth_ids: BTreeMap<u32, ClassId> = truth.into_iter().collect();
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for (id, pred) in &predicted {
        if keep.as_ref().is_some_and(|k| !k.contains(id)) {
            continue;
        }
        match truth_ids.get(id) {
            Some(&reference) => pairs.push((*pred, reference)),
            None => missing.push(*id),
        }
    }
    if !missing.is_empty() {
        let head: Vec<String> = missing.iter().take(10).map(|i| i.to_string()).collect();
        anyhow::bail!(
            "{} predicted parcels missing from the reference (first {}: {})",
            missing.len(),
            head.len(),
            head.join(", ")
        );
    }
    if pairs.is_empty() {
        anyhow::bail!("no overlapping parcel ids between prediction and reference");
    }
    let classes: Vec<ClassId> = scheme.classes_at(level).iter().map(|c| c.id).collect();
    let matrix = build_confusion(&pairs, &classes)?;
    std::fs::create_dir_all(&args.out)?;
    let tag = level.name().to_ascii_lowercase();
    std::fs::write(
        args.out.join(format!("confusion_{tag}.json")),
        serde_json::to_string_pretty(&matrix)?,
    )?;
    let text = matrix.to_text(&scheme);
    std::fs::write(args.out.join(format!("confusion_{tag}.txt")), &text)?;
    print!("{text}");
    Ok(())
}

/// Accepts either a run's labels.csv (parcel_id,l0,l1,l2) or a two-column
/// parcel_id,code table with codes at the requested level (level-2 codes also
/// accepted, rolled up).
fn read_predictions(
    path: &Path,
    scheme: &parcelmap_core::scheme::CategoryScheme,
    level: Level,
) -> anyhow::Result<Vec<(u32, ClassId)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let cols: Vec<&str> = header.split(',').collect();
    let code_column = if cols == ["parcel_id", "l0", "l1", "l2"] {
        match level {
            Level::L0 => 1,
            Level::L1 => 2,
            Level::L2 => 3,
        }
    } else {
        1
    };
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        anyhow::ensure!(
            fields.len() > code_column,
            "{}: line {}: missing column {}",
            path.display(),
            lineno + 2,
            code_column + 1
        );
        let id: u32 = fields[0]
            .trim()
            .parse()
            .map_err(|e| anyhow::anyhow!("{}: line {}: bad id: {e}", path.display(), lineno + 2))?;
        let class = parse_code_at(fields[code_column].trim(), scheme, level).ok_or_else(|| {
            anyhow::anyhow!(
                "{}: line {}: unknown {} code {:?}",
                path.display(),
                lineno + 2,
                level.name(),
                fields[code_column].trim()
            )
        })?;
        out.push((id, class));
    }
    Ok(out)
}

fn read_reference(
    path: &Path,
    scheme: &parcelmap_core::scheme::CategoryScheme,
    level: Level,
) -> anyhow::Result<Vec<(u32, ClassId)>> {
    read_predictions(path, scheme, level)
}

/// Resolve a code at `level`, also accepting level-2 codes rolled up.
fn parse_code_at(
    code: &str,
    scheme: &parcelmap_core::scheme::CategoryScheme,
    level: Level,
) -> Option<ClassId> {
    if let Some(c) = scheme.by_code(level, code) {
        return Some(c.id);
    }
    let l2 = scheme.by_code(Level::L2, code)?;
    scheme.ancestor_at(l2.id, level).ok().map(|c| c.id)
}

fn cmd_importance(args: ImportanceArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.model)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", args.model.display()))?;
    let model = ForestModel::from_json(&text)?;
    let importance = model.feature_importance();
    let width = importance.iter().map(|(n, _)| n.len()).max().unwrap_or(8);
    let mut ranked = importance.clone();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for (name, value) in &ranked {
        println!("{name:<width$}  {value:.6}");
    }
    if let Some(out) = &args.out {
        let doc: BTreeMap<&str, f64> =
            importance.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        std::fs::write(out, serde_json::to_string_pretty(&doc)? + "\n")?;
    }
    Ok(())
}
