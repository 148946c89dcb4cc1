mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sugar_core::dataset::{
    detect_header, gen_circle, gen_gaussian_mixture, gen_sphere, gen_swiss_roll, load_csv, load_labels, save_csv,
    save_labels, MixtureComponent, SwissRollSpec,
};
use sugar_core::eval::{
    default_bins, mutual_information, write_metrics_csv, write_metrics_json, write_table_csv,
    MetricMap,
};
use sugar_core::experiment::{classify_experiment, cluster_experiment, ClassifyConfig, ClusterConfig};
use sugar_core::{sugar_iterate, sugar_iterate_with, AugmentedDataset, BandwidthSpec, DataMatrix, KsProbe, LabeledDataset, SugarConfig, SugarError};

use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "sugar", version, about = "Density-equalizing data generation along a point cloud's manifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// One generation pass (or `--max-iters` passes) over a CSV.
    Generate(GenerateArgs),
    /// Iterate generation until a K-S test on one coordinate passes.
    Equalize(EqualizeArgs),
    /// Evaluation harness.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Rerun the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SynthKind {
    Circle,
    Swiss,
    Sphere,
    Mixture,
}

#[derive(Args, Debug)]
struct SynthArgs {
    kind: SynthKind,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Sampling bias exponent (circle, sphere and Swiss roll angle).
    #[arg(long, default_value_t = 0.0)]
    bias: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mixture means, points separated by `;`, coordinates by `,`.
    #[arg(long, default_value = "0,0;2.5,0")]
    means: String,
    /// Mixture weights, one per mean.
    #[arg(long, default_value = "10,1")]
    weights: String,
    /// Per-axis variance of every mixture component.
    #[arg(long, default_value_t = 1.0)]
    var: f64,
    /// Output CSV; mixtures also write `<stem>_labels.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SugarFlags {
    /// JSON config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    degree_bw: Option<BandwidthSpec>,
    #[arg(long)]
    diffusion_bw: Option<BandwidthSpec>,
    #[arg(long)]
    k_cov: Option<usize>,
    #[arg(long)]
    t: Option<u32>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    max_rows: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_rescale: bool,
}

impl SugarFlags {
    fn resolve(&self) -> Result<SugarConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => SugarConfig::from_json(&read_text(p)?)?,
            None => SugarConfig::default(),
        };
        if let Some(b) = self.degree_bw {
            cfg.degree_bandwidth = b;
        }
        if let Some(b) = self.diffusion_bw {
            cfg.diffusion_bandwidth = b;
        }
        if let Some(k) = self.k_cov {
            cfg.k_cov = k;
        }
        if let Some(t) = self.t {
            cfg.t = t;
        }
        if let Some(m) = self.max_iters {
            cfg.max_iters = m;
        }
        if let Some(m) = self.max_rows {
            cfg.max_rows = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.no_rescale {
            cfg.rescale = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// First row is a header. Detected from the file when neither flag is given.
    #[arg(long, conflicts_with = "no_header")]
    header: bool,
    #[arg(long)]
    no_header: bool,
}

impl InputArgs {
    fn load(&self) -> Result<DataMatrix, Failure> {
        let header = if self.header {
            true
        } else if self.no_header {
            false
        } else {
            detect_header(&self.input)?
        };
        Ok(load_csv(&self.input, header)?)
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    sugar: SugarFlags,
    /// Outputs go to `<prefix>_generated.csv`, `<prefix>_combined.csv`, ...
    #[arg(long)]
    out_prefix: String,
}

#[derive(Args, Debug)]
struct EqualizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    sugar: SugarFlags,
    #[command(flatten)]
    coord: CoordArgs,
    /// Stop once the K-S p-value exceeds this.
    #[arg(long, default_value_t = 0.05)]
    ks_target: f64,
    #[arg(long)]
    out_prefix: String,
}

#[derive(Args, Debug, Clone)]
struct CoordArgs {
    /// `angle` (atan2 of the first two columns) or `col:<j>`.
    #[arg(long, default_value = "angle")]
    coord: String,
    /// Support of the uniform null as `lo,hi`; defaults to [-π, π] for the
    /// angle and to the original data's range for a column.
    #[arg(long)]
    range: Option<String>,
}

impl CoordArgs {
    fn probe(&self, x: &DataMatrix) -> Result<KsProbe, Failure> {
        let range = self.range.as_deref().map(parse_pair).transpose()?;
        if self.coord == "angle" {
            if x.cols() < 2 {
                return Err(Failure::usage("--coord angle needs at least two columns"));
            }
            let (lo, hi) = range.unwrap_or((-std::f64::consts::PI, std::f64::consts::PI));
            return Ok(KsProbe::new((lo, hi), |m| {
                m.values().outer_iter().map(|r| r[1].atan2(r[0])).collect()
            }));
        }
        let j: usize = self
            .coord
            .strip_prefix("col:")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Failure::usage(format!("--coord must be `angle` or `col:<j>`, got `{}`", self.coord)))?;
        if j >= x.cols() {
            return Err(Failure::usage(format!("column {j} out of range for {} columns", x.cols())));
        }
        let range = range.unwrap_or_else(|| {
            let col = x.values().column(j).to_vec();
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        });
        Ok(KsProbe::new(range, move |m| m.values().column(j).to_vec()))
    }
}

#[derive(Subcommand, Debug)]
enum EvalCommand {
    /// K-S test of one coordinate against a uniform law.
    Ks {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        coord: CoordArgs,
        #[arg(long)]
        out_prefix: String,
    },
    /// k-fold k-NN on original, SMOTE- and SUGAR-augmented training folds.
    Classify {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 5)]
        k_nn: usize,
        #[arg(long, default_value_t = 5)]
        smote_k: usize,
        #[arg(long, default_value_t = 1.0)]
        smote_ratio: f64,
        /// Seed for fold assignment and SMOTE.
        #[arg(long = "eval-seed", default_value_t = 0)]
        eval_seed: u64,
        #[command(flatten)]
        sugar: SugarFlags,
        #[arg(long)]
        out_prefix: String,
    },
    /// k-means Rand Index and graph components with and without SUGAR.
    Cluster {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long = "eval-seed", default_value_t = 0)]
        eval_seed: u64,
        #[arg(long, default_value = "maxmin:2")]
        graph_bw: BandwidthSpec,
        /// Minimum affinity for a graph edge; default e^-1.
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        sugar: SugarFlags,
        #[arg(long)]
        out_prefix: String,
    },
    /// Mutual information between two columns.
    Mi {
        #[command(flatten)]
        input: InputArgs,
        /// Column pair as `i,j`.
        #[arg(long, default_value = "0,1")]
        cols: String,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        out_prefix: String,
    },
}

/// An error reported as one JSON line on stderr.
#[derive(Debug)]
struct Failure {
    kind: String,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            kind: "usage".into(),
            message: message.into(),
        }
    }
}

impl From<SugarError> for Failure {
    fn from(e: SugarError) -> Self {
        let kind = match &e {
            SugarError::Step { name, .. } => format!("step:{name}"),
            other => other.kind().to_string(),
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        kind: "io".into(),
        message: format!("{}: {e}", path.display()),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn parse_pair(s: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::usage(format!("expected `lo,hi`, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn parse_list(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| Failure::usage(format!("`{v}` is not a number"))))
        .collect()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn out(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{suffix}"))
}

fn load_truth(input: &InputArgs, labels: &Option<PathBuf>) -> Result<LabeledDataset, Failure> {
    let x = input.load()?;
    let path = labels
        .as_ref()
        .ok_or_else(|| Failure::usage("this task needs --labels"))?;
    Ok(LabeledDataset::new(x, load_labels(path)?)?)
}

fn main() -> ExitCode {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if f.kind == "usage" || f.kind == "invalid_parameter" {
                eprintln!("{}", Cli::command().render_usage());
            }
            // last stderr line is always the JSON record
            eprintln!("{}", json!({"error": f.kind, "message": f.message}));
            ExitCode::from(if f.kind == "usage" { 2 } else { 1 })
        }
    }
}

fn run(args: Vec<String>) -> Result<(), Failure> {
    let cli = match Cli::try_parse_from(std::iter::once("sugar".to_string()).chain(args.iter().cloned())) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            eprint!("{}", e.render());
            return Err(Failure::usage(e.kind().to_string()));
        }
    };
    if let Ok(v) = std::env::var("SUGAR_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Failure::usage(format!("SUGAR_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let start = Instant::now();
    let mut manifest = RunManifest::new(args);
    let manifest_path = match cli.command {
        Command::Replay { manifest: path } => {
            let recorded = RunManifest::load(&path)?;
            return run(recorded.args);
        }
        Command::Synth(a) => synth(&a, &mut manifest)?,
        Command::Generate(a) => generate(&a, &mut manifest)?,
        Command::Equalize(a) => equalize(&a, &mut manifest)?,
        Command::Eval(e) => eval(&e, &mut manifest)?,
    };
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    manifest.save(&manifest_path)
}

fn synth(a: &SynthArgs, m: &mut RunManifest) -> Result<PathBuf, Failure> {
    m.command = "synth".into();
    m.seed = Some(a.seed);
    let x = match a.kind {
        SynthKind::Circle => gen_circle(a.n, a.bias, a.seed)?,
        SynthKind::Sphere => gen_sphere(a.n, a.bias, a.seed)?,
        SynthKind::Swiss => gen_swiss_roll(&SwissRollSpec {
            n: a.n,
            theta_bias: a.bias,
            seed: a.seed,
            ..Default::default()
        })?,
        SynthKind::Mixture => {
            let weights = parse_list(&a.weights)?;
            let means: Vec<Vec<f64>> = a.means.split(';').map(parse_list).collect::<Result<_, _>>()?;
            if means.len() != weights.len() {
                return Err(Failure::usage(format!(
                    "{} means but {} weights",
                    means.len(),
                    weights.len()
                )));
            }
            let comps: Vec<MixtureComponent> = means
                .into_iter()
                .zip(weights)
                .enumerate()
                .map(|(label, (mean, w))| MixtureComponent::spherical(mean, a.var, w, label))
                .collect();
            let ds = gen_gaussian_mixture(&comps, a.n, a.seed)?;
            let labels_path = sibling(&a.out, "_labels.csv");
            save_labels(ds.labels(), &labels_path)?;
            m.outputs.push(labels_path);
            ds.into_parts().0
        }
    };
    save_csv(&x, &a.out)?;
    m.outputs.insert(0, a.out.clone());
    m.metrics.insert("rows".into(), x.rows() as f64);
    m.metrics.insert("cols".into(), x.cols() as f64);
    Ok(sibling(&a.out, "_manifest.json"))
}

/// Column names of the input, or `x0, x1, ...` when it had no header.
fn named(m: &DataMatrix, like: &DataMatrix) -> Result<DataMatrix, Failure> {
    let names = match like.col_names() {
        Some(n) => n.to_vec(),
        None => (0..like.cols()).map(|j| format!("x{j}")).collect(),
    };
    Ok(m.clone().with_col_names(names)?)
}

fn write_augmented(out: &AugmentedDataset, prefix: &str, m: &mut RunManifest) -> Result<(), Failure> {
    let gen_path = out_path(prefix, "_generated.csv", m);
    save_csv(&named(&out.generated, &out.original)?, gen_path)?;
    let comb_path = out_path(prefix, "_combined.csv", m);
    save_csv(&named(&out.combined, &out.original)?, comb_path)?;

    let rows: Vec<Vec<String>> = out
        .history
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                r.input_rows.to_string(),
                r.generated.to_string(),
                r.degree_variance_before.to_string(),
                r.degree_variance_after.to_string(),
                r.ks_p_value.map(|p| p.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    let hist_path = out_path(prefix, "_history.csv", m);
    write_table_csv(
        &["iteration", "input_rows", "generated", "variance_before", "variance_after", "ks_p_value"],
        &rows,
        hist_path,
    )?;

    let origin: Vec<Vec<String>> = out.origin.iter().map(|o| vec![o.to_string()]).collect();
    let origin_path = out_path(prefix, "_origin.csv", m);
    write_table_csv(&["origin"], &origin, origin_path)?;

    if let (Some(first), Some(last)) = (out.history.first(), out.history.last()) {
        m.metrics.insert("degree_variance_before".into(), first.degree_variance_before);
        m.metrics.insert("degree_variance_after".into(), last.degree_variance_after);
        if let Some(p) = last.ks_p_value {
            m.metrics.insert("ks_p_value".into(), p);
        }
    }
    m.metrics.insert("generated".into(), out.generated.rows() as f64);
    m.metrics.insert("iterations".into(), out.history.len() as f64);
    if out.generated.rows() == 0 {
        m.notes.push("every generation level is zero; nothing generated".into());
    }
    if let Some(s) = &out.stop_reason {
        m.notes.push(s.clone());
    }
    Ok(())
}

fn out_path(prefix: &str, suffix: &str, m: &mut RunManifest) -> PathBuf {
    let p = out(prefix, suffix);
    m.outputs.push(p.clone());
    p
}

fn generate(a: &GenerateArgs, m: &mut RunManifest) -> Result<PathBuf, Failure> {
    m.command = "generate".into();
    let x = a.input.load()?;
    let cfg = a.sugar.resolve()?;
    m.inputs.push(a.input.input.clone());
    m.seed = Some(cfg.seed);
    let aug = sugar_iterate(&x, &cfg)?;
    m.config = Some(cfg);
    write_augmented(&aug, &a.out_prefix, m)?;
    Ok(out(&a.out_prefix, "_manifest.json"))
}

fn equalize(a: &EqualizeArgs, m: &mut RunManifest) -> Result<PathBuf, Failure> {
    m.command = "equalize".into();
    let x = a.input.load()?;
    let mut cfg = a.sugar.resolve()?;
    if a.sugar.max_iters.is_none() && a.sugar.config.is_none() {
        cfg.max_iters = 5;
    }
    cfg.ks_target_p = Some(a.ks_target);
    cfg.validate()?;
    m.inputs.push(a.input.input.clone());
    m.seed = Some(cfg.seed);
    let probe = a.coord.probe(&x)?;
    m.metrics.insert("ks_p_value_input".into(), probe.p_value(&x)?);
    let aug = sugar_iterate_with(&x, &cfg, &probe)?;
    m.config = Some(cfg);
    write_augmented(&aug, &a.out_prefix, m)?;
    Ok(out(&a.out_prefix, "_manifest.json"))
}

fn write_report(metrics: &MetricMap, prefix: &str, m: &mut RunManifest) -> Result<PathBuf, Failure> {
    let json_path = out_path(prefix, "_report.json", m);
    write_metrics_json(metrics, json_path)?;
    let csv_path = out_path(prefix, "_report.csv", m);
    write_metrics_csv(metrics, csv_path)?;
    m.metrics.extend(metrics.clone());
    Ok(out(prefix, "_manifest.json"))
}

fn eval(e: &EvalCommand, m: &mut RunManifest) -> Result<PathBuf, Failure> {
    match e {
        EvalCommand::Ks {
            input,
            coord,
            out_prefix,
        } => {
            m.command = "eval ks".into();
            m.inputs.push(input.input.clone());
            let x = input.load()?;
            let r = coord.probe(&x)?.test(&x)?;
            let metrics = MetricMap::from([
                ("statistic".to_string(), r.statistic),
                ("p_value".to_string(), r.p_value),
                ("n".to_string(), r.n as f64),
            ]);
            write_report(&metrics, out_prefix, m)
        }
        EvalCommand::Classify {
            input,
            labels,
            folds,
            k_nn,
            smote_k,
            smote_ratio,
            eval_seed,
            sugar,
            out_prefix,
        } => {
            m.command = "eval classify".into();
            let ds = load_truth(input, labels)?;
            m.inputs.push(input.input.clone());
            m.inputs.extend(labels.clone());
            let cfg = ClassifyConfig {
                folds: *folds,
                k_nn: *k_nn,
                smote_k: *smote_k,
                smote_ratio: *smote_ratio,
                seed: *eval_seed,
                sugar: sugar.resolve()?,
            };
            m.seed = Some(cfg.seed);
            let r = classify_experiment(&ds, &cfg)?;
            m.config = Some(cfg.sugar);
            write_report(&r.metrics(), out_prefix, m)
        }
        EvalCommand::Cluster {
            input,
            labels,
            k,
            restarts,
            eval_seed,
            graph_bw,
            threshold,
            sugar,
            out_prefix,
        } => {
            m.command = "eval cluster".into();
            let ds = load_truth(input, labels)?;
            m.inputs.push(input.input.clone());
            m.inputs.extend(labels.clone());
            let cfg = ClusterConfig {
                k: *k,
                restarts: *restarts,
                seed: *eval_seed,
                graph_bandwidth: *graph_bw,
                threshold: threshold.unwrap_or_else(|| (-1.0f64).exp()),
                sugar: sugar.resolve()?,
            };
            m.seed = Some(cfg.seed);
            let r = cluster_experiment(ds.data(), ds.labels(), &cfg)?;
            m.config = Some(cfg.sugar);
            write_report(&r.metrics(), out_prefix, m)
        }
        EvalCommand::Mi {
            input,
            cols,
            bins,
            out_prefix,
        } => {
            m.command = "eval mi".into();
            m.inputs.push(input.input.clone());
            let x = input.load()?;
            let (i, j) = parse_pair(cols)?;
            let (i, j) = (i as usize, j as usize);
            if i >= x.cols() || j >= x.cols() {
                return Err(Failure::usage(format!("--cols {cols} out of range for {} columns", x.cols())));
            }
            let bins = bins.unwrap_or_else(|| default_bins(x.rows()));
            let u = x.values().column(i).to_vec();
            let v = x.values().column(j).to_vec();
            let metrics = MetricMap::from([
                ("mutual_information".to_string(), mutual_information(&u, &v, bins)?),
                ("bins".to_string(), bins as f64),
            ]);
            write_report(&metrics, out_prefix, m)
        }
    }
}
