//! `certnorm`: run certifications, audits and partition dumps from a JSON
//! configuration.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 budget
//! exhausted (partial results are still written).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use certnorm::adaquad::{RunOutcome, StopReason};
use certnorm::audit::{audit, AuditOptions, AuditReport, KindStats};
use certnorm::certify::{certify_norm, certify_residual, CertifiedReport, CertifyOptions, Target};
use certnorm::config::RunConfig;
use certnorm::enclosure::Encloser;
use certnorm::interval::Rounding;
use certnorm::network::Network;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "certnorm", version, about = "Certified bounds on integrals and Sobolev norms of neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the configured norm; writes the report, history and partition.
    Certify(RunArgs),
    /// Check the enclosures against sampled point values on random sub-boxes.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        boxes: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// Collapse every enclosure to its midpoint (negative control).
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Rerun the configuration and write only the final partition.
    DumpPartition {
        #[command(flatten)]
        run: RunArgs,
        /// Output format; defaults to the extension of `output.partition`.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Print a summary of a network file.
    Info {
        /// Weight file; taken from `--config` if omitted.
        network: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for relative output names.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// At most this many concurrent cell evaluations.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    rounding: Option<RoundingArg>,
    /// Overrides `stop.max_steps`.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundingArg {
    Exact,
    Outward,
}

impl From<RoundingArg> for Rounding {
    fn from(r: RoundingArg) -> Self {
        match r {
            RoundingArg::Exact => Rounding::Exact,
            RoundingArg::Outward => Rounding::Outward,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

#[derive(PartialEq)]
enum Status {
    Done,
    Budget,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Certify(run) => certify(run),
        Command::Verify { run, boxes, samples, corrupt } => verify(run, *boxes, *samples, *corrupt),
        Command::DumpPartition { run, format } => dump_partition(run, *format),
        Command::Info { network, config } => info(network.as_deref(), config.as_deref()),
    };
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Budget) => {
            eprintln!("warning: budget exhausted, partial results written");
            ExitCode::from(4)
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// Reads and validates the config, applies flag overrides and resolves the
/// network path against the config's directory.
fn load_config(path: &Path, run: Option<&RunArgs>) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_json_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(run) = run {
        if let Some(s) = run.seed {
            cfg.seed = s;
        }
        if let Some(r) = run.rounding {
            cfg.rounding = r.into();
        }
        if let Some(n) = run.steps {
            cfg.stop.max_steps = Some(n);
        }
        cfg.validate().map_err(config_err)?;
    }
    if cfg.network.is_relative() {
        let dir = path.parent().unwrap_or(Path::new("."));
        cfg.network = dir.join(&cfg.network);
    }
    Ok(cfg)
}

fn load_network(cfg: &RunConfig) -> Result<Network, Failure> {
    let net =
        Network::load(&cfg.network).map_err(|e| Failure::Config(format!("network {}: {e}", cfg.network.display())))?;
    if net.input_dim() != cfg.domain.len() {
        return Err(Failure::Config(format!(
            "invalid value for `domain`: {} axes given, the network takes {} inputs",
            cfg.domain.len(),
            net.input_dim()
        )));
    }
    Ok(net)
}

fn setup_threads(n: Option<usize>) -> Result<(), Failure> {
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(Failure::Config("invalid value for `--threads`: must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(runtime_err)
}

fn out_path(out: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out.join(p)
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn run_config(cfg: &RunConfig, net: &Network) -> Result<(CertifiedReport, RunOutcome), Failure> {
    let omega = cfg.domain_box().map_err(config_err)?;
    let alg = cfg.algorithm().map_err(config_err)?;
    match cfg.target {
        Target::Residual => {
            let op = cfg.operator().map_err(config_err)?.expect("validated");
            certify_residual(net, &op, &omega, cfg.p, &alg, &cfg.stop)
        }
        t => {
            let opts = CertifyOptions {
                exact_affine: cfg.exact_affine,
                vertex_cap: cfg.vertex_cap,
            };
            certify_norm(net, &omega, t.order(), cfg.p, &alg, &cfg.stop, opts)
        }
    }
    .map_err(runtime_err)
}

fn target_name(t: Target) -> String {
    serde_json::to_value(t).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn partition_text(out: &RunOutcome, format: Format) -> String {
    match format {
        Format::Csv => out.state.partition_csv(),
        Format::Json => out.state.partition_json(),
    }
}

fn format_of(name: &str) -> Format {
    if name.ends_with(".json") {
        Format::Json
    } else {
        Format::Csv
    }
}

fn status_of(out: &RunOutcome) -> Status {
    if out.stop == StopReason::BudgetExhausted {
        Status::Budget
    } else {
        Status::Done
    }
}

fn certify(run: &RunArgs) -> Result<Status, Failure> {
    let cfg = load_config(&run.config, Some(run))?;
    setup_threads(run.threads)?;
    let net = load_network(&cfg)?;
    let t = Instant::now();
    let (mut rep, out) = run_config(&cfg, &net)?;
    if let Some(name) = &cfg.output.partition {
        write(&out_path(&run.out, name), &partition_text(&out, format_of(name)))?;
        rep.partition = Some(name.clone());
    }
    let report = out_path(&run.out, &cfg.output.report);
    write(&report, &rep.to_json())?;
    write(&out_path(&run.out, &cfg.output.history), &rep.history_csv())?;
    println!("target      {} (p = {})", target_name(rep.target), rep.p);
    println!("norm        [{:.12e}, {:.12e}]", rep.norm_lower, rep.norm_upper);
    println!("integral    [{:.12e}, {:.12e}]", rep.integral_lower, rep.integral_upper);
    println!("gap         {:.6e} (normalized {:.6e})", rep.gap(), rep.history.last().map_or(0.0, |h| h.normalized_gap));
    println!("steps       {} ({:?}), {} cells, {:.2?}", rep.steps, rep.stop, rep.cells, t.elapsed());
    println!("report      {}", report.display());
    Ok(status_of(&out))
}

fn print_stats(name: &str, s: &KindStats) {
    println!(
        "{name:<9} {:>10} {:>10} {:>12.3e} {:>10.3} {:>10.3} {:>10.3}",
        s.checks, s.violations, s.worst_excess, s.tightness_mean, s.tightness_median, s.tightness_max
    );
}

fn verify(run: &RunArgs, boxes: Option<usize>, samples: Option<usize>, corrupt: bool) -> Result<Status, Failure> {
    let mut cfg = load_config(&run.config, Some(run))?;
    if let Some(b) = boxes {
        cfg.verify.boxes = b;
    }
    if let Some(s) = samples {
        cfg.verify.samples = s;
    }
    cfg.validate().map_err(config_err)?;
    setup_threads(run.threads)?;
    let net = load_network(&cfg)?;
    let omega = cfg.domain_box().map_err(config_err)?;
    let order = net.activation().max_order().min(2);
    let op = if order == 2 && net.output_dim() == 1 {
        cfg.operator().map_err(config_err)?
    } else {
        None
    };
    let opts = AuditOptions {
        boxes: cfg.verify.boxes,
        samples: cfg.verify.samples,
        max_box_fraction: cfg.verify.max_box_fraction,
        order,
        seed: cfg.seed,
        corrupt,
    };
    let enc = Encloser::new(&net, cfg.rounding).with_vertex_cap(cfg.vertex_cap);
    let rep: AuditReport = audit(&enc, &omega, op.as_ref(), &opts).map_err(runtime_err)?;
    let path = out_path(&run.out, "verify.json");
    write(&path, &serde_json::to_string_pretty(&rep).map_err(runtime_err)?)?;
    println!("{} boxes x {} points, derivative order {order}", rep.boxes, rep.points_per_box);
    println!("{:<9} {:>10} {:>10} {:>12} {:>10} {:>10} {:>10}", "kind", "checks", "violations", "worst", "t_mean", "t_median", "t_max");
    print_stats("value", &rep.value);
    if order >= 1 {
        print_stats("jacobian", &rep.jac);
    }
    if order >= 2 {
        print_stats("hessian", &rep.hess);
    }
    if let Some(r) = &rep.residual {
        print_stats("residual", r);
    }
    println!("report    {}", path.display());
    if rep.passed() {
        Ok(Status::Done)
    } else {
        Err(Failure::Runtime(format!("{} containment violations", rep.violations())))
    }
}

fn dump_partition(run: &RunArgs, format: Option<Format>) -> Result<Status, Failure> {
    let cfg = load_config(&run.config, Some(run))?;
    setup_threads(run.threads)?;
    let net = load_network(&cfg)?;
    let (_, out) = run_config(&cfg, &net)?;
    let configured = cfg.output.partition.clone().unwrap_or_else(|| "partition.csv".into());
    let (name, format) = match format {
        Some(f) if f != format_of(&configured) => {
            (if f == Format::Json { "partition.json" } else { "partition.csv" }.to_string(), f)
        }
        _ => (configured.clone(), format_of(&configured)),
    };
    let path = out_path(&run.out, &name);
    write(&path, &partition_text(&out, format))?;
    println!("{} cells after {} steps -> {}", out.state.len(), out.state.step, path.display());
    Ok(status_of(&out))
}

fn info(network: Option<&Path>, config: Option<&Path>) -> Result<Status, Failure> {
    let cfg = config.map(|c| load_config(c, None)).transpose()?;
    let path = match (network, &cfg) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(c)) => c.network.clone(),
        (None, None) => return Err(Failure::Config("give a network file or --config".into())),
    };
    let net = Network::load(&path).map_err(|e| Failure::Config(format!("network {}: {e}", path.display())))?;
    let widths: Vec<String> = net.widths().iter().map(usize::to_string).collect();
    println!("network      {}", path.display());
    println!("activation   {}", net.activation().name());
    println!("widths       {}", widths.join(" -> "));
    println!("hidden       {}", net.depth());
    println!("parameters   {}", net.parameter_count());
    println!("max order    {}", net.activation().max_order().min(2));
    let norms: Vec<String> = net.layers().iter().map(|l| format!("{:.4}", l.norm())).collect();
    println!("layer norms  {}", norms.join(", "));
    if let Some(c) = &cfg {
        let axes: Vec<String> = c.domain.iter().map(|[lo, hi]| format!("[{lo}, {hi}]")).collect();
        println!("domain       {}", axes.join(" x "));
        println!("target       {}, p = {}", target_name(c.target), c.p);
    }
    Ok(Status::Done)
}
