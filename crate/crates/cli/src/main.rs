//! Command-line front end: end-to-end detection runs, catalog listing,
//! synthetic data generation, density sampling, and spectrum dumps.
//!
//! Exit codes: 0 success verdict, 2 fail verdict, 3 configuration error,
//! 4 numerical error.

use clap::{Args, Parser, Subcommand};
use liedetect::algebra_fit::{FitMode, OptimizerConfig};
use liedetect::lie_pca::{build_lie_pca, spectrum_report, LocalPcaConfig, Neighborhood};
use liedetect::orbit_verify::{BasePointMode, Verdict};
use liedetect::orbit_verify::sample_fitted_orbit;
use liedetect::pipeline::{run_pipeline_with_artifacts, PipelineConfig};
use liedetect::preprocess::{orthonormalize_auto, PointCloud};
use liedetect::rep_catalog::{
    enumerate_partition_types, enumerate_so2_types, enumerate_torus_types, Group,
    RepresentationType,
};
use liedetect::synth::{
    density_sample, sample_orbit_uniform, DensityFrames, OrbitSpec, SamplerMode, SamplerParadigm,
};
use liedetect::Error;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

const EXIT_OK: u8 = 0;
const EXIT_FAIL_VERDICT: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "liedetect", version, about = "Detect compact Lie group representation orbits in point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detection pipeline for a single group.
    Detect(DetectArgs),
    /// Run the pipeline for a list of candidate groups and select one.
    DetectMulti(DetectMultiArgs),
    /// List the representation catalog for a group and ambient dimension.
    ListReps(ListRepsArgs),
    /// Generate a synthetic orbit sample from a JSON spec.
    Synth(SynthArgs),
    /// Draw new points along the estimated symmetry directions.
    DensitySample(DensitySampleArgs),
    /// Emit the operator spectrum of the input cloud as CSV.
    Spectrum(SpectrumArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV point cloud, one comma-separated point per row.
    #[arg(long)]
    input: PathBuf,
    /// Skip one header line.
    #[arg(long, default_value_t = false)]
    header: bool,
    /// Subtract the mean point before processing.
    #[arg(long, default_value_t = false)]
    center: bool,
}

#[derive(Args)]
struct CommonPipelineArgs {
    /// Maximal weight magnitude for the Abelian catalogs.
    #[arg(long, default_value_t = 4)]
    wmax: i64,
    /// PCA gate: keep covariance eigenvalues above this value.
    #[arg(long, conflicts_with = "target_dim")]
    epsilon: Option<f64>,
    /// PCA gate: keep exactly this many top directions.
    #[arg(long, conflicts_with = "epsilon")]
    target_dim: Option<usize>,
    /// Intrinsic dimension of the sampled manifold.
    #[arg(long)]
    intrinsic_dim: usize,
    /// Local PCA neighborhood radius.
    #[arg(long, conflicts_with = "k_neighbors")]
    radius: Option<f64>,
    /// Local PCA neighbor count (default 12 when no radius is given).
    #[arg(long, conflicts_with = "radius")]
    k_neighbors: Option<usize>,
    /// Matching route: stiefel, grassmann, or auto.
    #[arg(long, default_value = "auto")]
    mode: String,
    /// Points sampled on each reconstructed orbit.
    #[arg(long, default_value_t = 500)]
    orbit_samples: usize,
    /// Base point for reconstruction: first or best.
    #[arg(long, default_value = "first")]
    base_point: String,
    /// Also compute the Wasserstein-2 distance.
    #[arg(long, default_value_t = false)]
    w2: bool,
    /// Allow zero weights in the SO(2) catalog.
    #[arg(long, default_value_t = false)]
    allow_zero: bool,
    /// Allow repeated weights in the SO(2) catalog.
    #[arg(long, default_value_t = false)]
    allow_repeats: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cap the rayon thread pool.
    #[arg(long)]
    threads: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dump the reconstructed orbit of the selected group as CSV.
    #[arg(long)]
    dump_orbit: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Group: so2, t2, t3, su2, so3.
    #[arg(long)]
    group: String,
    #[command(flatten)]
    common: CommonPipelineArgs,
}

#[derive(Args)]
struct DetectMultiArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated candidate groups among so2, t2, t3, su2, so3.
    #[arg(long)]
    groups: String,
    #[command(flatten)]
    common: CommonPipelineArgs,
}

#[derive(Args)]
struct ListRepsArgs {
    #[arg(long)]
    group: String,
    /// Ambient dimension.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    wmax: i64,
    #[arg(long, default_value_t = false)]
    allow_zero: bool,
    #[arg(long, default_value_t = false)]
    allow_repeats: bool,
    /// Emit JSON instead of one label per line.
    #[arg(long, default_value_t = false)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON orbit spec (rep, n_points, noise_sigma, outliers, seed, ...).
    #[arg(long)]
    spec: PathBuf,
    /// Output CSV path; a .json sidecar with the spec is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DensitySampleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    group: String,
    /// multi-source-lie-pca, multi-source-lie-detect, single-source-lie-detect
    #[arg(long)]
    sampler: String,
    /// Number of generated points.
    #[arg(long, default_value_t = 500)]
    samples: usize,
    /// Resampling acceptance distance (defaults to the largest
    /// nearest-neighbor distance).
    #[arg(long)]
    tau: Option<f64>,
    #[command(flatten)]
    common: CommonPipelineArgs,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    intrinsic_dim: usize,
    #[arg(long, conflicts_with = "k_neighbors")]
    radius: Option<f64>,
    #[arg(long, conflicts_with = "radius")]
    k_neighbors: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Restrict the operator to the skew-symmetric subspace.
    #[arg(long, default_value_t = false)]
    restrict_skew: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("LIEDETECT_LOG")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Detect(args) => detect(args, None),
        Command::DetectMulti(args) => {
            let groups = args.groups.clone();
            detect_multi(args, groups)
        }
        Command::ListReps(args) => list_reps(args),
        Command::Synth(args) => synth(args),
        Command::DensitySample(args) => density(args),
        Command::Spectrum(args) => spectrum(args),
    };
    ExitCode::from(code)
}

fn classify(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn read_cloud(input: &InputArgs) -> Result<PointCloud, (u8, String)> {
    let text = std::fs::read_to_string(&input.input)
        .map_err(|e| (EXIT_CONFIG, format!("cannot read {}: {e}", input.input.display())))?;
    let cloud = PointCloud::from_csv_str(&text, input.header)
        .map_err(|e| (classify(&e), e.to_string()))?;
    Ok(if input.center { cloud.centered() } else { cloud })
}

fn neighborhood(radius: Option<f64>, k: Option<usize>) -> Neighborhood {
    match (radius, k) {
        (Some(r), _) => Neighborhood::Radius(r),
        (None, Some(k)) => Neighborhood::KNeighbors(k),
        (None, None) => Neighborhood::KNeighbors(12),
    }
}

fn build_config(groups: Vec<Group>, common: &CommonPipelineArgs) -> Result<PipelineConfig, (u8, String)> {
    let fit_mode = match common.mode.as_str() {
        "stiefel" => FitMode::Stiefel,
        "grassmann" => FitMode::Grassmann,
        "auto" => FitMode::Auto,
        other => return Err((EXIT_CONFIG, format!("unknown mode '{other}'"))),
    };
    let base_point_mode = match common.base_point.as_str() {
        "first" => BasePointMode::First,
        "best" => BasePointMode::Best,
        other => return Err((EXIT_CONFIG, format!("unknown base-point mode '{other}'"))),
    };
    let mut config = PipelineConfig::new(groups, common.wmax, common.intrinsic_dim);
    config.epsilon = common.epsilon;
    config.target_dim = common.target_dim;
    config.neighborhood = neighborhood(common.radius, common.k_neighbors);
    config.fit_mode = fit_mode;
    config.orbit_samples = common.orbit_samples;
    config.base_point_mode = base_point_mode;
    config.compute_w2 = common.w2;
    config.so2_allow_zero = common.allow_zero;
    config.so2_distinct_only = !common.allow_repeats;
    config.seed = common.seed;
    config.optimizer = OptimizerConfig {
        seed: common.seed,
        ..OptimizerConfig::default()
    };
    Ok(config)
}

fn install_thread_cap(threads: Option<usize>) {
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), (u8, String)> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| (EXIT_CONFIG, format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_detect_report(
    input: &InputArgs,
    groups: Vec<Group>,
    common: &CommonPipelineArgs,
) -> Result<(String, u8), (u8, String)> {
    install_thread_cap(common.threads);
    let cloud = read_cloud(input)?;
    let config = build_config(groups, common)?;
    let (report, artifacts) = run_pipeline_with_artifacts(&cloud, &config);
    if let Some(path) = &common.dump_orbit {
        dump_selected_orbit(&report, &artifacts, common.orbit_samples, path)?;
    }
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| (EXIT_NUMERICAL, format!("report serialization: {e}")))?;
    if let Some(err) = &report.error {
        let code = if err.starts_with("config") { EXIT_CONFIG } else { EXIT_NUMERICAL };
        return Ok((json, code));
    }
    let mut any_success = false;
    let mut any_result = false;
    for g in &report.groups {
        if let Some(v) = &g.verification {
            any_result = true;
            if v.verdict == Verdict::Success {
                any_success = true;
            }
        }
    }
    let code = if any_success {
        EXIT_OK
    } else if any_result {
        EXIT_FAIL_VERDICT
    } else {
        EXIT_NUMERICAL
    };
    Ok((json, code))
}

/// Resample the orbit of the selected group (the first group otherwise)
/// through the verification base point and write it as CSV rows.
fn dump_selected_orbit(
    report: &liedetect::pipeline::PipelineReport,
    artifacts: &liedetect::pipeline::PipelineArtifacts,
    orbit_samples: usize,
    path: &PathBuf,
) -> Result<(), (u8, String)> {
    let cloud = artifacts
        .normalized_cloud
        .as_ref()
        .ok_or((EXIT_NUMERICAL, "no normalized cloud available".to_string()))?;
    let index = report
        .selected_group
        .as_ref()
        .and_then(|name| report.groups.iter().position(|g| &g.group == name))
        .unwrap_or(0);
    let fit = artifacts
        .fits
        .get(index)
        .and_then(|f| f.as_ref())
        .ok_or((EXIT_NUMERICAL, "no fitted representation to sample".to_string()))?;
    let base = report.groups[index]
        .verification
        .as_ref()
        .map(|v| v.base_point_index)
        .unwrap_or(0);
    let sample = sample_fitted_orbit(fit, &cloud.point(base), orbit_samples.max(1))
        .map_err(|e| (EXIT_NUMERICAL, e.to_string()))?;
    let mut text = String::new();
    for i in 0..sample.points.nrows() {
        let row: Vec<String> = (0..sample.points.ncols())
            .map(|j| format!("{}", sample.points[(i, j)]))
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)
        .map_err(|e| (EXIT_CONFIG, format!("cannot write {}: {e}", path.display())))
}

fn detect(args: DetectArgs, _unused: Option<()>) -> u8 {
    let group = match Group::from_str(&args.group) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match run_detect_report(&args.input, vec![group], &args.common) {
        Ok((json, code)) => {
            if emit(&args.common.out, &json).is_err() {
                return EXIT_CONFIG;
            }
            code
        }
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn detect_multi(args: DetectMultiArgs, groups_arg: String) -> u8 {
    let mut groups = Vec::new();
    for tok in groups_arg.split(',') {
        match Group::from_str(tok.trim()) {
            Ok(g @ (Group::So2 | Group::Su2 | Group::So3)) => groups.push(g),
            Ok(g @ Group::Torus(d)) if d == 2 || d == 3 => groups.push(g),
            Ok(_) => {
                eprintln!("error: group list is restricted to so2, t2, t3, su2, so3");
                return EXIT_CONFIG;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    }
    match run_detect_report(&args.input, groups, &args.common) {
        Ok((json, code)) => {
            if emit(&args.common.out, &json).is_err() {
                return EXIT_CONFIG;
            }
            code
        }
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn list_reps(args: ListRepsArgs) -> u8 {
    let group = match Group::from_str(&args.group) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let types: Result<Vec<RepresentationType>, Error> = match group {
        Group::So2 => enumerate_so2_types(args.n / 2, args.wmax, args.allow_zero, !args.allow_repeats),
        Group::Torus(d) => enumerate_torus_types(args.n / 2, d, args.wmax),
        Group::Su2 => enumerate_partition_types(Group::Su2, args.n, true),
        Group::So3 => enumerate_partition_types(Group::So3, args.n, true),
    };
    match types {
        Ok(list) => {
            let text = if args.json {
                #[derive(serde::Serialize)]
                struct Row<'a> {
                    group: String,
                    ambient: usize,
                    label: String,
                    payload: &'a RepresentationType,
                }
                let rows: Vec<Row> = list
                    .iter()
                    .map(|t| Row {
                        group: group.name(),
                        ambient: args.n,
                        label: t.label(),
                        payload: t,
                    })
                    .collect();
                serde_json::to_string_pretty(&rows).unwrap()
            } else {
                list.iter().map(|t| t.label()).collect::<Vec<_>>().join("\n")
            };
            if emit(&args.out, &text).is_err() {
                return EXIT_CONFIG;
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}

fn synth(args: SynthArgs) -> u8 {
    let text = match std::fs::read_to_string(&args.spec) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.spec.display());
            return EXIT_CONFIG;
        }
    };
    let spec: OrbitSpec = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: invalid spec: {e}");
            return EXIT_CONFIG;
        }
    };
    match sample_orbit_uniform(&spec) {
        Ok(cloud) => {
            if let Err(e) = std::fs::write(&args.out, cloud.to_csv_string()) {
                eprintln!("error: cannot write {}: {e}", args.out.display());
                return EXIT_CONFIG;
            }
            let sidecar = args.out.with_extension("json");
            let truth = serde_json::to_string_pretty(&spec).unwrap();
            if let Err(e) = std::fs::write(&sidecar, truth) {
                eprintln!("error: cannot write {}: {e}", sidecar.display());
                return EXIT_CONFIG;
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}

fn density(args: DensitySampleArgs) -> u8 {
    install_thread_cap(args.common.threads);
    let group = match Group::from_str(&args.group) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let paradigm = match args.sampler.as_str() {
        "multi-source-lie-pca" => SamplerParadigm::MultiSourceLiePca,
        "multi-source-lie-detect" => SamplerParadigm::MultiSourceLieDetect,
        "single-source-lie-detect" => SamplerParadigm::SingleSourceLieDetect,
        other => {
            eprintln!("error: unknown sampler '{other}'");
            return EXIT_CONFIG;
        }
    };
    let cloud = match read_cloud(&args.input) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let run = || -> Result<PointCloud, Error> {
        let pre = orthonormalize_auto(&cloud, args.common.epsilon)?;
        let ortho = pre.normalized_cloud();
        let lpca = LocalPcaConfig {
            intrinsic_dim: args.common.intrinsic_dim,
            neighborhood: neighborhood(args.common.radius, args.common.k_neighbors),
        };
        let op = build_lie_pca(&ortho, &lpca, None)?;
        let mode = SamplerMode {
            paradigm,
            tau: args.tau,
            intrinsic_dim: args.common.intrinsic_dim,
        };
        match paradigm {
            SamplerParadigm::MultiSourceLiePca => {
                let frame = op.bottom_frame_skew(group.lie_dimension())?;
                density_sample(&ortho, &DensityFrames::Raw(&frame), &mode, args.samples, args.common.seed)
            }
            _ => {
                let opts = liedetect::algebra_fit::FitOptions {
                    mode: FitMode::Auto,
                    w_max: args.common.wmax,
                    so2_allow_zero: args.common.allow_zero,
                    so2_distinct_only: !args.common.allow_repeats,
                };
                let optimizer = OptimizerConfig {
                    seed: args.common.seed,
                    ..OptimizerConfig::default()
                };
                let fit = liedetect::algebra_fit::fit(
                    liedetect::algebra_fit::FitInput::Operator(&op),
                    group,
                    ortho.ambient(),
                    &opts,
                    &optimizer,
                )?;
                density_sample(&ortho, &DensityFrames::Fitted(&fit), &mode, args.samples, args.common.seed)
            }
        }
    };
    match run() {
        Ok(points) => {
            let text = points.to_csv_string();
            match &args.common.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return EXIT_CONFIG;
                    }
                }
                None => print!("{text}"),
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}

fn spectrum(args: SpectrumArgs) -> u8 {
    let cloud = match read_cloud(&args.input) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let run = || -> Result<Vec<f64>, Error> {
        let pre = orthonormalize_auto(&cloud, args.epsilon)?;
        let ortho = pre.normalized_cloud();
        let lpca = LocalPcaConfig {
            intrinsic_dim: args.intrinsic_dim,
            neighborhood: neighborhood(args.radius, args.k_neighbors),
        };
        let op = build_lie_pca(&ortho, &lpca, None)?;
        Ok(spectrum_report(&op, args.restrict_skew))
    };
    match run() {
        Ok(values) => {
            let text = values
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join("\n");
            if emit(&args.out, &text).is_err() {
                return EXIT_CONFIG;
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}
