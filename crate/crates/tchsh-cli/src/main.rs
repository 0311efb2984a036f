//! Command-line front end: temporal CHSH sweeps over the damping family,
//! channel classification, and emulated experiment points.
//!
//! Exit codes: 0 success, 1 usage/parse errors, 2 validation errors
//! (non-CPTP input, bad configuration), 3 runtime failures (degenerate
//! filters, no feasible search point). Every command is deterministic given
//! its full flag set, including the seed, and writes byte-identical files
//! across runs.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use tchsh::expsim::NoiseModel;
use tchsh::filters::SearchFamily;
use tchsh::quantum::{KrausChannel, MeasurementScenario};
use tchsh::temporal::{chsh_evaluate, filtered_two_time_distribution, two_time_distribution};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tchsh",
    about = "Temporal CHSH statistics of qubit channels: sweeps, classification, experiment emulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the amplitude-damping family and emit theory curves (unfiltered
    /// and filtered CHSH values, success probabilities, violation flags).
    Sweep(SweepArgs),
    /// Classify a channel document: temporal CHSH report, hidden
    /// nonmacrorealism activation, and the Choi-state nonlocality verdict.
    Classify(ClassifyArgs),
    /// Emulate one measured data point with finite shots and the
    /// instrumental noise model.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start of the visibility range.
    #[arg(long)]
    v_start: Option<f64>,
    /// End of the visibility range.
    #[arg(long)]
    v_stop: Option<f64>,
    /// Number of grid points (>= 2).
    #[arg(long)]
    v_steps: Option<usize>,
    /// Filter loss values, one filtered curve per value. Repeatable.
    #[arg(long = "d", value_name = "D")]
    d_values: Vec<f64>,
    /// Apply the filter pair in the filtered columns (with --filtered=false
    /// they degenerate to the unfiltered curve).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    filtered: Option<bool>,
    /// Measurement scenario: "canonical" or a path to a scenario JSON file
    /// holding two Bloch 3-vectors per time slot under keys "t0" and "t1".
    #[arg(long)]
    scenario: Option<String>,
    /// Output file path (defaults to stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Debug)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Csv,
    Json,
}

/// JSON mirror of the sweep configuration; any field may be omitted.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SweepConfigFile {
    v_range: Option<(f64, f64, usize)>,
    d_values: Option<Vec<f64>>,
    filtered: Option<bool>,
    scenario: Option<String>,
    output_path: Option<PathBuf>,
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Channel document: {"dim": d, "kind": "tp"|"tni", "kraus": [...]}.
    #[arg(long)]
    channel: PathBuf,
    /// Grid resolution per loss axis for the searches.
    #[arg(long, default_value_t = 21)]
    resolution: usize,
    /// Filter family for the activation search. The matched pair (one loss
    /// knob, as realized with equal Brewster-window attenuation) is the
    /// default; "sppo" frees the two losses and "generic" adds basis
    /// rotations, both of which activate strictly more channels.
    #[arg(long, value_enum, default_value_t = SearchArg::EqualD)]
    search: SearchArg,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Debug)]
enum SearchArg {
    EqualD,
    Sppo,
    Generic,
}

impl From<SearchArg> for SearchFamily {
    fn from(value: SearchArg) -> Self {
        match value {
            SearchArg::EqualD => SearchFamily::EqualLoss,
            SearchArg::Sppo => SearchFamily::SppoGrid,
            SearchArg::Generic => SearchFamily::GenericGrid,
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// Damping visibility v.
    #[arg(long)]
    v: f64,
    /// Filter power loss D.
    #[arg(long, default_value_t = 0.45)]
    d: f64,
    /// Apply the filter pair.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    filtered: bool,
    #[arg(long, default_value_t = 10_000)]
    shots: u64,
    #[arg(long, default_value_t = 100)]
    replicates: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disable all instrumental noise.
    #[arg(long, default_value_t = false)]
    ideal: bool,
    /// Waveplate angle accuracy, degrees (half-width of a uniform draw).
    #[arg(long)]
    waveplate_sigma_deg: Option<f64>,
    /// Relative Brewster-window loss accuracy (e.g. 0.02 for +-2%).
    #[arg(long)]
    d_rel_sigma: Option<f64>,
    /// Incident polarization misalignment, degrees.
    #[arg(long)]
    polarization_sigma_deg: Option<f64>,
    /// Lower end of the interferometer visibility range.
    #[arg(long)]
    visibility_min: Option<f64>,
    /// Upper end of the interferometer visibility range.
    #[arg(long)]
    visibility_max: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is a
            // usage error (exit 1 by this tool's convention).
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Sweep(args) => cmd_sweep(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

fn usage_err(message: impl Into<String>) -> CliError {
    CliError { code: EXIT_USAGE, message: message.into() }
}

fn validation_err(message: impl Into<String>) -> CliError {
    CliError { code: EXIT_VALIDATION, message: message.into() }
}

fn runtime_err(message: impl Into<String>) -> CliError {
    CliError { code: EXIT_RUNTIME, message: message.into() }
}

fn write_output(path: Option<&PathBuf>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| runtime_err(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| runtime_err(format!("cannot write to stdout: {e}")))
        }
    }
}

fn load_scenario(spec: Option<&str>) -> Result<MeasurementScenario, CliError> {
    match spec {
        None => Ok(MeasurementScenario::canonical()),
        Some("canonical") => Ok(MeasurementScenario::canonical()),
        Some(path) => {
            #[derive(Deserialize)]
            struct ScenarioDoc {
                t0: [[f64; 3]; 2],
                t1: [[f64; 3]; 2],
            }
            let text = fs::read_to_string(path)
                .map_err(|e| usage_err(format!("cannot read scenario {path}: {e}")))?;
            let doc: ScenarioDoc = serde_json::from_str(&text)
                .map_err(|e| usage_err(format!("cannot parse scenario {path}: {e}")))?;
            MeasurementScenario::from_bloch(doc.t0, doc.t1)
                .map_err(|e| validation_err(format!("invalid scenario: {e}")))
        }
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let file_config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage_err(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<SweepConfigFile>(&text)
                .map_err(|e| usage_err(format!("cannot parse config {}: {e}", path.display())))?
        }
        None => SweepConfigFile::default(),
    };

    // Precedence: explicit flags, then config file, then defaults.
    let (cfg_start, cfg_stop, cfg_steps) = file_config
        .v_range
        .map(|(a, b, n)| (Some(a), Some(b), Some(n)))
        .unwrap_or((None, None, None));
    let v_start = args.v_start.or(cfg_start).unwrap_or(0.0);
    let v_stop = args.v_stop.or(cfg_stop).unwrap_or(1.0);
    let v_steps = args.v_steps.or(cfg_steps).unwrap_or(101);
    let d_values = if args.d_values.is_empty() {
        file_config.d_values.unwrap_or_else(|| vec![0.45])
    } else {
        args.d_values.clone()
    };
    let filtered = args.filtered.or(file_config.filtered).unwrap_or(true);
    let scenario_spec = args.scenario.clone().or(file_config.scenario);
    let output = args.output.clone().or(file_config.output_path);
    let format = args.format.or(file_config.format).unwrap_or(OutputFormat::Csv);

    if !(0.0..=1.0).contains(&v_start) || !(0.0..=1.0).contains(&v_stop) || v_start > v_stop {
        return Err(validation_err(format!(
            "visibility range [{v_start}, {v_stop}] must satisfy 0 <= start <= stop <= 1"
        )));
    }
    if v_steps < 2 {
        return Err(validation_err("v_steps must be >= 2"));
    }
    for &d in &d_values {
        if !(0.0..=1.0).contains(&d) {
            return Err(validation_err(format!("filter loss D = {d} out of [0, 1]")));
        }
    }
    let scen = load_scenario(scenario_spec.as_deref())?;

    struct Row {
        v: f64,
        d: f64,
        b_unfiltered: f64,
        b_filtered: f64,
        n: f64,
        violated_unfiltered: bool,
        violated_filtered: bool,
    }

    let mut rows = Vec::new();
    for &d in &d_values {
        for i in 0..v_steps {
            let v = v_start + (v_stop - v_start) * i as f64 / (v_steps - 1) as f64;
            let ch = tchsh::quantum::amplitude_damping(v)
                .map_err(|e| validation_err(e.to_string()))?;
            let plain = two_time_distribution(&ch, &scen)
                .map_err(|e| runtime_err(e.to_string()))?;
            let plain_report = chsh_evaluate(&plain);
            let loss = if filtered { d } else { 0.0 };
            let (pre, post) =
                tchsh::filters::sppo_pair(loss).map_err(|e| validation_err(e.to_string()))?;
            let f_stats = filtered_two_time_distribution(&ch, &pre, &post, &scen)
                .map_err(|e| runtime_err(e.to_string()))?;
            let f_report = chsh_evaluate(&f_stats);
            rows.push(Row {
                v,
                d,
                b_unfiltered: plain_report.value,
                b_filtered: f_report.value,
                n: f_stats.success(0, 0),
                violated_unfiltered: plain_report.violated,
                violated_filtered: f_report.violated,
            });
        }
    }

    let content = match format {
        OutputFormat::Csv => {
            let mut out =
                String::from("v,D,B_unfiltered,B_filtered,N,violated_unfiltered,violated_filtered\n");
            for r in &rows {
                out.push_str(&format!(
                    "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}\n",
                    r.v, r.d, r.b_unfiltered, r.b_filtered, r.n, r.violated_unfiltered, r.violated_filtered
                ));
            }
            out
        }
        OutputFormat::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "v": r.v,
                        "D": r.d,
                        "B_unfiltered": r.b_unfiltered,
                        "B_filtered": r.b_filtered,
                        "N": r.n,
                        "violated_unfiltered": r.violated_unfiltered,
                        "violated_filtered": r.violated_filtered,
                    })
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&json!({ "rows": rows })).expect("serializes");
            text.push('\n');
            text
        }
    };
    write_output(output.as_ref(), &content)
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

fn cmd_classify(args: ClassifyArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.channel)
        .map_err(|e| usage_err(format!("cannot read {}: {e}", args.channel.display())))?;
    let ch = match KrausChannel::from_json(&text) {
        Ok(ch) => ch,
        Err(tchsh::quantum::QuantumError::Parse(e)) => {
            return Err(usage_err(format!("cannot parse channel document: {e}")))
        }
        Err(e) => return Err(validation_err(format!("invalid channel: {e}"))),
    };
    if !ch.is_trace_preserving() || ch.input_dim() != 2 {
        return Err(validation_err(
            "classification expects a trace-preserving qubit channel (kind \"tp\", dim 2)",
        ));
    }
    if args.resolution < 2 {
        return Err(validation_err("resolution must be >= 2"));
    }

    let scen = MeasurementScenario::canonical();
    let stats = two_time_distribution(&ch, &scen).map_err(|e| runtime_err(e.to_string()))?;
    let report = chsh_evaluate(&stats);

    let family: SearchFamily = args.search.into();
    let activation = tchsh::filters::activate(&ch, &scen, family, args.resolution)
        .map_err(|e| runtime_err(e.to_string()))?;
    let verdict = tchsh::nonlocality::strongly_breaking_assessment(&ch, args.resolution)
        .map_err(|e| runtime_err(e.to_string()))?;

    let doc = json!({
        "temporal_chsh": {
            "correlators": report.correlators,
            "value": report.value,
            "violated": report.violated,
            "nsit_deviation": report.nsit_deviation,
        },
        "activation": serde_json::from_str::<serde_json::Value>(&activation.to_json()).unwrap(),
        "activation_search_family": family.name(),
        "resolution": args.resolution,
        "nonlocality": serde_json::from_str::<serde_json::Value>(&verdict.to_json()).unwrap(),
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("serializes");
    text.push('\n');
    write_output(args.output.as_ref(), &text)
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let mut noise = if args.ideal { NoiseModel::ideal() } else { NoiseModel::default() };
    let deg = std::f64::consts::PI / 180.0;
    if let Some(w) = args.waveplate_sigma_deg {
        noise.waveplate_angle_sigma = w * deg;
    }
    if let Some(d) = args.d_rel_sigma {
        noise.d_relative_sigma = d;
    }
    if let Some(p) = args.polarization_sigma_deg {
        noise.incident_polarization_sigma = p * deg;
    }
    if let Some(lo) = args.visibility_min {
        noise.visibility_range.0 = lo;
    }
    if let Some(hi) = args.visibility_max {
        noise.visibility_range.1 = hi;
    }
    noise.validate().map_err(|e| validation_err(e.to_string()))?;
    if !(0.0..=1.0).contains(&args.v) {
        return Err(validation_err(format!("v = {} out of [0, 1]", args.v)));
    }
    if !(0.0..=1.0).contains(&args.d) {
        return Err(validation_err(format!("D = {} out of [0, 1]", args.d)));
    }
    if args.shots < 1 || args.replicates < 1 {
        return Err(validation_err("shots and replicates must be >= 1"));
    }

    let (mean, err) = tchsh::expsim::experiment_point(
        args.v,
        args.d,
        args.filtered,
        args.shots,
        args.replicates,
        &noise,
        args.seed,
    )
    .map_err(|e| runtime_err(e.to_string()))?;

    let mut out = String::from("v,D,filtered,shots,replicates,mean_B,err_B,seed\n");
    out.push_str(&format!(
        "{:.12e},{:.12e},{},{},{},{:.12e},{:.12e},{}\n",
        args.v, args.d, args.filtered, args.shots, args.replicates, mean, err, args.seed
    ));
    write_output(args.output.as_ref(), &out)
}
