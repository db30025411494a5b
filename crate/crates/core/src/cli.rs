//! Command-line front end. Exit codes: 0 success, 1 runtime or file error,
//! 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::classifier::{
    classifier_channels, preselect_classes, prototype_projection, ClsNetWeights, DEFAULT_CLS_BLOCKS, DEFAULT_HIDDEN,
};
use crate::error::{Error, Result};
use crate::feature_io::{
    decode_bank, load_bank, load_feature_map, peek_feature_header, read_file, roi_align,
    save_bank, write_file, BANK_MAGIC, FEATURE_MAGIC,
};
use crate::localizer::{
    box_to_heatmap, expansion_frame, localizer_channels, propagate, spatial_integral, to_absolute,
    Heatmap, IntegralParams, LocNetWeights, DEFAULT_LOC_BLOCKS,
};
use crate::nn::{peek_weights_header, Branch, WEIGHTS_MAGIC};
use crate::pipeline::{read_proposals, write_detections, Detector, PipelineConfig};
use crate::prototype::{build_bank, read_instance_list, BuildConfig, ClusterConfig, PrototypeMode, SinkhornConfig};

#[derive(Debug, Parser)]
#[command(name = "protohead", version, about = "Prototype-based open-set detection head")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a PHB1 prototype bank from an instance list.
    BuildPrototypes(BuildArgs),
    /// Detect objects from a feature file and a proposals file.
    Detect(DetectArgs),
    /// Write initial and propagated heatmaps per proposal as numeric grids.
    DumpHeatmaps(DumpArgs),
    /// Print the headers of PHF1 / PHB1 / PHW1 files.
    Inspect {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Mean,
    Cluster,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "mean")]
    mode: ModeArg,
    #[arg(long, default_value_t = 10)]
    centroids: usize,
    #[arg(long, default_value_t = 0.002)]
    beta: f32,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f32,
    #[arg(long, default_value_t = 1000)]
    sinkhorn_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    proposals: PathBuf,
    #[arg(long)]
    bank: PathBuf,
    #[arg(long)]
    loc_weights: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    grid: usize,
    /// Seed for networks initialized without a weight file.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hidden width for networks initialized without a weight file.
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    cls_weights: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 128)]
    t: usize,
    #[arg(long, default_value_t = 0.5)]
    nms_iou: f32,
    #[arg(long, default_value_t = 0.05)]
    score_thr: f32,
    #[arg(long, default_value_t = 100.0)]
    min_area: f32,
    #[arg(long)]
    per_class_nms: bool,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    /// Class to localize; defaults to each proposal's top pre-selected class.
    #[arg(long)]
    class: Option<String>,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::BuildPrototypes(args) => build_prototypes(args),
        Command::Detect(args) => detect(args),
        Command::DumpHeatmaps(args) => dump_heatmaps(args),
        Command::Inspect { files } => {
            for f in files {
                print!("{}", inspect(&f)?);
            }
            Ok(())
        }
    }
}

fn build_prototypes(args: BuildArgs) -> Result<()> {
    let records = read_instance_list(&args.instances)?;
    let base = args.instances.parent().unwrap_or(Path::new("."));
    let cfg = BuildConfig {
        mode: match args.mode {
            ModeArg::Mean => PrototypeMode::Mean,
            ModeArg::Cluster => PrototypeMode::Cluster,
        },
        cluster: ClusterConfig {
            centroids: args.centroids,
            beta: args.beta,
            steps: args.steps,
            batch_size: args.batch_size,
            sinkhorn: SinkhornConfig {
                epsilon: args.epsilon,
                iters: args.sinkhorn_iters,
            },
            seed: args.seed,
        },
        normalize: !args.no_normalize,
    };
    let bank = build_bank(&records, base, &cfg)?;
    save_bank(&bank, &args.out)?;
    eprintln!(
        "wrote {} classes and {} background prototypes (dim {}) to {}",
        bank.class_count(),
        bank.background_count(),
        bank.dim(),
        args.out.display()
    );
    Ok(())
}

fn load_localizer(model: &ModelArgs, backgrounds: usize) -> Result<(LocNetWeights, IntegralParams)> {
    match &model.loc_weights {
        Some(p) => LocNetWeights::load(p),
        None => Ok((
            LocNetWeights::seeded(
                localizer_channels(backgrounds),
                model.hidden,
                DEFAULT_LOC_BLOCKS,
                model.seed.wrapping_add(1),
            ),
            IntegralParams::uniform(model.grid),
        )),
    }
}

fn detect(args: DetectArgs) -> Result<()> {
    let m = &args.model;
    let fm = load_feature_map(&m.features)?;
    let bank = load_bank(&m.bank)?;
    let proposals: Vec<_> = read_proposals(&m.proposals)?.into_iter().map(|p| p.bbox).collect();
    let classifier = match &args.cls_weights {
        Some(p) => ClsNetWeights::load(p)?,
        None => ClsNetWeights::seeded(
            classifier_channels(args.t, bank.background_count()),
            m.hidden,
            DEFAULT_CLS_BLOCKS,
            m.seed,
        ),
    };
    let (loc, params) = load_localizer(m, bank.background_count())?;
    let config = PipelineConfig {
        top_k: args.k,
        rearrange_width: args.t,
        grid: m.grid,
        nms_iou: args.nms_iou,
        score_threshold: args.score_thr,
        min_box_area: args.min_area,
        normalize: !m.no_normalize,
        class_agnostic_nms: !args.per_class_nms,
        threads: None,
        bank_path: Some(m.bank.clone()),
        cls_weights_path: args.cls_weights.clone(),
        loc_weights_path: m.loc_weights.clone(),
    };
    let detector = Detector::new(bank, classifier, Box::new(loc), params, config)?;
    let run = detector.detect(&fm, &proposals)?;
    write_detections(&run.detections, &args.out)?;
    eprintln!(
        "{} detections from {} scored candidates ({} proposals)",
        run.detections.len(),
        run.candidates_scored,
        proposals.len()
    );
    Ok(())
}

fn write_grid(out: &mut String, map: &Heatmap) {
    for r in 0..map.grid() {
        let row: Vec<String> = (0..map.grid()).map(|c| format!("{:.6}", map.get(r, c))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

fn dump_heatmaps(args: DumpArgs) -> Result<()> {
    let m = &args.model;
    let mut fm = load_feature_map(&m.features)?;
    if !m.no_normalize {
        fm = fm.l2_normalized();
    }
    let bank = load_bank(&m.bank)?;
    let proposals = read_proposals(&m.proposals)?;
    let (loc, params) = load_localizer(m, bank.background_count())?;
    let fixed_class = match &args.class {
        Some(name) => Some(
            bank.class_index(name)
                .ok_or_else(|| Error::validation(format!("class {name:?} is not in the bank")))?,
        ),
        None => None,
    };
    let mut out = String::new();
    for (idx, p) in proposals.iter().enumerate() {
        let class_id = match fixed_class {
            Some(c) => c,
            None => preselect_classes(&roi_align(&fm, &p.bbox, m.grid)?, &bank, 1)?[0],
        };
        let (clipped, expanded) = expansion_frame(&p.bbox, &fm)?;
        let sim = prototype_projection(&roi_align(&fm, &expanded, m.grid)?, &bank)?;
        let initial = box_to_heatmap(&clipped, &expanded, m.grid)?;
        let logits = propagate(&initial, &sim.class_with_backgrounds(class_id)?, &loc)?;
        let refined = spatial_integral(&logits, &params)
            .and_then(|rel| to_absolute(&rel, &expanded))
            .map(|b| {
                let [x0, y0, x1, y1] = b.corners();
                format!("{x0} {y0} {x1} {y1}")
            })
            .unwrap_or_else(|_| "none".into());
        let [x0, y0, x1, y1] = expanded.corners();
        let _ = writeln!(
            out,
            "# proposal {idx} class {} expanded {x0} {y0} {x1} {y1} refined {refined}",
            bank.class_name(class_id)
        );
        out.push_str("initial\n");
        write_grid(&mut out, &initial);
        out.push_str("propagated\n");
        write_grid(&mut out, &logits);
    }
    write_file(&args.out, out.as_bytes())
}

/// Human-readable header summary of a protohead binary file.
pub fn inspect(path: &Path) -> Result<String> {
    let bytes = read_file(path)?;
    let magic = bytes.get(..4).unwrap_or(&[]);
    let mut s = String::new();
    if magic == FEATURE_MAGIC {
        let h = peek_feature_header(&bytes)?;
        let _ = writeln!(
            s,
            "{}: PHF1 feature map\n  H={} W={} D={}\n  image={}x{}px stride={}px",
            path.display(),
            h.height,
            h.width,
            h.dim,
            h.image_width_px,
            h.image_height_px,
            h.patch_stride_px
        );
    } else if magic == BANK_MAGIC {
        let bank = decode_bank(&bytes)?;
        let _ = writeln!(
            s,
            "{}: PHB1 prototype bank\n  C={} B={} D={} normalized={}\n  classes: {}",
            path.display(),
            bank.class_count(),
            bank.background_count(),
            bank.dim(),
            bank.is_normalized(),
            bank.class_names().join(", ")
        );
    } else if magic == WEIGHTS_MAGIC {
        let h = peek_weights_header(&bytes)?;
        let branch = match h.branch {
            Branch::Classification => "classification",
            Branch::Localization => "localization",
        };
        let _ = writeln!(
            s,
            "{}: PHW1 {branch} weights\n  blocks={} in_channels={} tensors={}",
            path.display(),
            h.block_count,
            h.in_channels,
            h.shapes.len()
        );
        for shape in &h.shapes {
            let _ = writeln!(s, "  {shape:?}");
        }
    } else {
        return Err(Error::Format(format!(
            "{}: unknown magic {:?}",
            path.display(),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(s)
}
