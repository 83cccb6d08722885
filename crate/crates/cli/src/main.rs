use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use bellkey::polytope::{min_nonlocal_decomposition_with, vertices};
use bellkey::rates::{self, advantage, intrinsic, IntrinsicConfig};
use bellkey::simulate;
use bellkey::{NsBox, Visibility};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "bellkey",
    version,
    about = "No-signaling key distribution toolkit"
)]
struct Cli {
    /// Machine-readable format used with --out.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,

    /// Write machine-readable output to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for randomized steps.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,

    /// Probability tolerance for validating input boxes.
    #[arg(long, default_value_t = bellkey::tolerance::PROB, global = true)]
    tolerance: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the 24 extremal boxes with their CHSH values.
    Vertices,
    /// Minimal-nonlocal decomposition of a box read from a JSON or CSV file.
    Decompose { file: PathBuf },
    /// Key rates along the disturbance axis.
    Rates {
        /// Number of disturbance intervals.
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
        grid: u32,
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
        restarts: u32,
    },
    /// Monte Carlo run of the protocol against the optimal attack.
    Simulate {
        /// Visibility of the isotropic box.
        #[arg(long)]
        v: f64,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
    },
    /// Intrinsic information of the sifted joint.
    Intrinsic {
        #[arg(long)]
        p_nl: f64,
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
        restarts: u32,
        /// Use the variant where Alice announces her input as well.
        #[arg(long)]
        announced: bool,
    },
    /// Advantage-distillation threshold.
    Ad {
        #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(2..))]
        n_max: u32,
        /// Also scan pre-processing noise up to this value (step 0.01).
        #[arg(long)]
        q_max: Option<f64>,
    },
    /// Sifted joint distribution P(a, b, e) of the optimal attack.
    Attack {
        #[arg(long)]
        v: f64,
        /// Print the full tripartite distribution instead of the sifted one.
        #[arg(long)]
        full: bool,
    },
}

/// Failure writing results, as opposed to bad input.
#[derive(Debug)]
struct OutputFailure;

impl std::fmt::Display for OutputFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("could not write output")
    }
}

impl std::error::Error for OutputFailure {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let broken_pipe = e
                .chain()
                .filter_map(|c| c.downcast_ref::<std::io::Error>())
                .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe);
            if broken_pipe {
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {e:#}");
            if e.downcast_ref::<OutputFailure>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn emit(
    cli: &Cli,
    csv: impl FnOnce() -> anyhow::Result<String>,
    json: impl FnOnce() -> anyhow::Result<String>,
) -> anyhow::Result<()> {
    let Some(path) = &cli.out else {
        return Ok(());
    };
    let body = match cli.format {
        Format::Csv => csv()?,
        Format::Json => json()?,
    };
    fs::write(path, body)
        .with_context(|| format!("writing {}", path.display()))
        .context(OutputFailure)
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn csv_rows<T: Serialize>(rows: &[T]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if !(cli.tolerance.is_finite() && cli.tolerance > 0.0) {
        bail!("--tolerance must be positive");
    }
    let mut stdout = std::io::stdout().lock();
    match &cli.command {
        Command::Vertices => cmd_vertices(cli, &mut stdout),
        Command::Decompose { file } => cmd_decompose(cli, file, &mut stdout),
        Command::Rates { grid, restarts } => cmd_rates(cli, *grid, *restarts, &mut stdout),
        Command::Simulate { v, n } => cmd_simulate(cli, *v, *n, &mut stdout),
        Command::Intrinsic {
            p_nl,
            restarts,
            announced,
        } => cmd_intrinsic(cli, *p_nl, *restarts, *announced, &mut stdout),
        Command::Ad { n_max, q_max } => cmd_ad(cli, *n_max as usize, *q_max, &mut stdout),
        Command::Attack { v, full } => cmd_attack(cli, *v, *full, &mut stdout),
    }
}

#[derive(Serialize)]
struct VertexRow {
    label: String,
    local: bool,
    chsh: f64,
    flag: &'static str,
}

fn cmd_vertices(cli: &Cli, w: &mut impl Write) -> anyhow::Result<()> {
    let rows: Vec<VertexRow> = vertices()
        .iter()
        .map(|v| VertexRow {
            label: v.kind().to_string(),
            local: v.is_local(),
            chsh: v.ns_box().chsh(),
            flag: if v.is_pr() {
                "PR"
            } else if v.on_chsh_facet() {
                "facet"
            } else {
                ""
            },
        })
        .collect();
    writeln!(w, "{:<8} {:<9} {:>5}  flag", "vertex", "kind", "chsh")?;
    for r in &rows {
        let kind = if r.local { "local" } else { "nonlocal" };
        writeln!(w, "{:<8} {:<9} {:>5}  {}", r.label, kind, r.chsh, r.flag)?;
    }
    emit(cli, || csv_rows(&rows), || to_json(&rows))
}

fn read_box(path: &Path, tol: f64) -> anyhow::Result<NsBox> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        || text.trim_start().starts_with('{');
    let parsed = if is_json {
        NsBox::from_json(&text, tol)
    } else {
        NsBox::from_csv(&text, tol)
    };
    parsed.with_context(|| format!("invalid box in {}", path.display()))
}

#[derive(Serialize)]
struct WeightRow {
    vertex: String,
    w: f64,
}

fn cmd_decompose(cli: &Cli, file: &Path, w: &mut impl Write) -> anyhow::Result<()> {
    let target = read_box(file, cli.tolerance)?;
    let lp_tol = bellkey::tolerance::LP.max(cli.tolerance);
    let d = min_nonlocal_decomposition_with(&target, lp_tol)?;
    writeln!(w, "chsh            {}", target.chsh())?;
    writeln!(w, "nonlocal weight {}", d.nonlocal_weight())?;
    writeln!(w, "residual        {:e}", d.residual())?;
    for (v, wt) in d.iter().filter(|(_, wt)| *wt > 0.0) {
        writeln!(w, "  {:<8} {}", v.kind().to_string(), wt)?;
    }
    let rows: Vec<WeightRow> = d
        .iter()
        .map(|(v, wt)| WeightRow {
            vertex: v.kind().to_string(),
            w: wt,
        })
        .collect();
    emit(cli, || csv_rows(&rows), || Ok(d.to_json()))
}

fn cmd_rates(cli: &Cli, grid: u32, restarts: u32, w: &mut impl Write) -> anyhow::Result<()> {
    let cfg = IntrinsicConfig {
        restarts: restarts as usize,
        seed: cli.seed,
        ..Default::default()
    };
    let rows = rates::curve(grid as usize, &cfg)?;
    writeln!(
        w,
        "{:>8} {:>8} {:>9} {:>9} {:>7} {:>9} {:>9}",
        "D", "p_nl", "rate_q0", "rate_opt", "q_opt", "I_closed", "I_num"
    )?;
    for r in &rows {
        writeln!(
            w,
            "{:>8.5} {:>8.5} {:>9.5} {:>9.5} {:>7.4} {:>9.5} {:>9.5}",
            r.d, r.p_nl, r.rate_q0, r.rate_opt, r.q_opt, r.intrinsic_closed, r.intrinsic_numeric
        )?;
    }
    emit(cli, || Ok(rates::curve_to_csv(&rows)?), || to_json(&rows))
}

fn cmd_simulate(cli: &Cli, v: f64, n: usize, w: &mut impl Write) -> anyhow::Result<()> {
    let vis = Visibility::new(v)?;
    let (report, records_csv) = if cli.out.is_some() && cli.format == Format::Csv {
        let records = simulate::run_sharded(vis, n, cli.seed)?;
        (
            simulate::estimate(&records)?,
            simulate::records_to_csv(&records),
        )
    } else {
        let tally = simulate::run_tally(vis, n, cli.seed)?;
        (simulate::estimate_tally(&tally)?, String::new())
    };
    print_estimate(&report, w)?;
    emit(cli, || Ok(records_csv), || Ok(report.to_json()))
}

fn print_estimate(r: &simulate::EstimateReport, w: &mut impl Write) -> anyhow::Result<()> {
    writeln!(w, "rounds   {}", r.n_rounds)?;
    writeln!(w, "chsh     {} ± {}", r.chsh_hat, r.chsh_stderr)?;
    writeln!(w, "qber     {} ± {}", r.qber_hat, r.qber_stderr)?;
    writeln!(w, "p_nl     {}", r.p_nl_hat)?;
    Ok(())
}

#[derive(Serialize)]
struct IntrinsicReport {
    p_nl: f64,
    announced: bool,
    intrinsic_numeric: f64,
    intrinsic_closed: f64,
    conditional: f64,
    mutual: f64,
    channel: Vec<Vec<f64>>,
}

fn cmd_intrinsic(
    cli: &Cli,
    p_nl: f64,
    restarts: u32,
    announced: bool,
    w: &mut impl Write,
) -> anyhow::Result<()> {
    let cfg = IntrinsicConfig {
        restarts: restarts as usize,
        seed: cli.seed,
        ..Default::default()
    };
    let (labels, blocks): (Vec<String>, Vec<bellkey::Block>) = if announced {
        let j = rates::alice_announces(p_nl)?;
        j.cells().iter().map(|(s, b)| (s.to_string(), *b)).unzip()
    } else {
        let j = rates::table_one(p_nl)?;
        j.cells().iter().map(|(s, b)| (s.to_string(), *b)).unzip()
    };
    let res = intrinsic::intrinsic_numeric(&blocks, &cfg)?;
    let report = IntrinsicReport {
        p_nl,
        announced,
        intrinsic_numeric: res.value,
        intrinsic_closed: rates::intrinsic_closed(p_nl)?,
        conditional: res.conditional,
        mutual: res.mutual,
        channel: res.channel.rows().to_vec(),
    };
    writeln!(w, "intrinsic (numeric)  {}", report.intrinsic_numeric)?;
    writeln!(w, "closed-form curve    {}", report.intrinsic_closed)?;
    writeln!(w, "I(A:B|E)             {}", report.conditional)?;
    writeln!(w, "I(A:B)               {}", report.mutual)?;
    writeln!(w, "channel:")?;
    for (label, row) in labels.iter().zip(&report.channel) {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:.4}")).collect();
        writeln!(w, "  {label:<12} {}", cells.join(" "))?;
    }
    emit(
        cli,
        || {
            Ok(format!(
                "p_nl,announced,intrinsic_numeric,intrinsic_closed,conditional,mutual\n{},{},{},{},{},{}\n",
                report.p_nl,
                report.announced,
                report.intrinsic_numeric,
                report.intrinsic_closed,
                report.conditional,
                report.mutual
            ))
        },
        || to_json(&report),
    )
}

#[derive(Serialize)]
struct AdRow {
    n: usize,
    zero: f64,
    q: f64,
    party: String,
}

fn cmd_ad(cli: &Cli, n_max: usize, q_max: Option<f64>, w: &mut impl Write) -> anyhow::Result<()> {
    let result = match q_max {
        None => advantage::ad_threshold(n_max)?,
        Some(q_max) => {
            if !(0.0..=0.5).contains(&q_max) {
                bail!("--q-max must lie in [0, 0.5]");
            }
            let steps = (q_max / 0.01).round() as usize;
            let grid: Vec<f64> = (0..=steps).map(|k| (k as f64 * 0.01).min(q_max)).collect();
            advantage::ad_preprocessed_threshold(n_max, &grid)?
        }
    };
    writeln!(w, "{:>4} {:>12} {:>6} party", "N", "zero", "q")?;
    let rows: Vec<AdRow> = result
        .per_n
        .iter()
        .map(|z| AdRow {
            n: z.n,
            zero: z.zero,
            q: z.q,
            party: z.party.map(|p| p.to_string()).unwrap_or_default(),
        })
        .collect();
    for r in &rows {
        writeln!(w, "{:>4} {:>12.8} {:>6.3} {}", r.n, r.zero, r.q, r.party)?;
    }
    writeln!(
        w,
        "threshold estimate {} (1/N fit over N = {}..={})",
        result.threshold_estimate, result.fit_range.0, result.fit_range.1
    )?;
    emit(cli, || csv_rows(&rows), || to_json(&result))
}

fn cmd_attack(cli: &Cli, v: f64, full: bool, w: &mut impl Write) -> anyhow::Result<()> {
    let attack = bellkey::optimal_attack(Visibility::new(v)?);
    if full {
        let json = attack.to_json();
        writeln!(w, "{json}")?;
        return emit(
            cli,
            || bail!("the full attack is only available as JSON"),
            || Ok(json),
        );
    }
    let joint = bellkey::sift(&attack)?;
    let csv = joint.to_csv();
    write!(w, "{csv}")?;
    let stats = bellkey::alice_bob_stats(&joint);
    writeln!(
        w,
        "qber {}  I(A:B) {}  I(A:E) {}  I(B:E) {}",
        stats.qber, stats.i_ab, stats.i_ae, stats.i_be
    )?;
    emit(cli, || Ok(csv), || to_json(&stats))
}
