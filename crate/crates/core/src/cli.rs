//! Command-line front end. Every command is a thin adapter over library
//! calls and writes a CSV or `.report.txt` file; the console only carries
//! diagnostics.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::lab::{count_solutions, run_trials, TrialConfig, DEFAULT_SOLUTION_CAP, REPORT_SCHEMA};
use crate::measures::{
    measure_coprime_exact, measure_coprime_quadrature, measure_mc, measure_non_coprime,
    measure_star_partition, star_cells, write_star_cells_csv, MeasureResult, SetDescriptor, Variant,
};
use crate::overlap::{pair_correlation, quasi_independence_ratio_with, write_pair_stats_csv, BumpFamily, PairStats};
use crate::psi::PsiSpec;
use crate::series::{partial_sum, CriterionKind};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "MDAPPROX_THREADS";

pub const PSI_GRAMMAR: &str = "\
PSI EXPRESSIONS
  const:<c>                     ψ(q) = c
  power:c=<c>,s=<s>             ψ(q) = c·q^(-s)
  powlog:t=<t>[,c=<c>]          ψ(q) = c/(q·log(q)^t), zero for q <= 2
  eps_over_q:<eps>              ψ(q) = eps/q
  divisible:c=<c>[,ratio=<r>]   ψ(q) = c/φ(q) where q/φ(q) >= r (default 3), else 0
  table:<path>                  CSV rows q,value; missing q read as 0
  restrict:<support>;<psi>      ψ on the support, 0 elsewhere

SUPPORTS (join with '+' to intersect)
  all | primes | powers:<b> | arith:m=<m>,r=<r> | list:<q1>,<q2>,...
  density:<loglog|invlogsq|invlog>[,c=<c>]   deterministic sampler of that density
  totient_le:<x> | totient_gt:<x>            φ(q)/q <= x  |  φ(q)/q > x

Values must lie in [0, 1/2]: out-of-range parameters are usage errors (exit 2),
out-of-range values met during a computation abort with exit code 1.

CONFIG FILE
  --config <path> reads key=value lines using the long flag names
  (e.g. psi=const:0.1, Q=1000, coprime=true, command=series); '#' starts a
  comment. Flags given on the command line override the file.
  MDAPPROX_THREADS sets the default thread count (--threads overrides).

EXIT CODES
  0 success, 1 computation error (structured line on stderr), 2 usage error";

#[derive(Parser, Debug)]
#[command(
    name = "mdapprox",
    version,
    about = "Measures, series and counting experiments for multiplicative coprime approximation",
    after_help = PSI_GRAMMAR
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key=value file with default flag values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads (default: MDAPPROX_THREADS or all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output file (default: <command>.csv or <command>.report.txt)
    #[arg(long, short, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Report,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure of one approximation set, with a Monte-Carlo cross-check
    Measure(MeasureArgs),
    /// Star-cell geometry of the q-th planar set
    Geometry(GeometryArgs),
    /// Partial sums of a divergence criterion at dyadic checkpoints
    Series(SeriesArgs),
    /// Pair correlations of the bump families and the quasi-independence ratio
    Correlate(CorrelateArgs),
    /// Seeded counting experiment against the expectation curve
    Experiment(ExperimentArgs),
    /// Solutions q <= Q for one α
    Count(CountArgs),
}

fn parse_psi(s: &str) -> std::result::Result<PsiSpec, String> {
    PsiSpec::parse(s).map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long)]
    q: u64,
    /// ψ expression (see PSI EXPRESSIONS)
    #[arg(long, value_parser = parse_psi)]
    psi: PsiSpec,
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// coprime | non-coprime | star-partition
    #[arg(long, default_value = "coprime")]
    variant: String,
    /// Monte-Carlo samples for the cross-check (0 disables it)
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: u64,
    /// Quadrature tolerance for coprime k >= 3
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args, Debug)]
struct GeometryArgs {
    #[arg(long)]
    q: u64,
    /// ψ expression; validated only, arms are clipped by the cell geometry
    #[arg(long, value_parser = parse_psi)]
    psi: Option<PsiSpec>,
    /// Only stars centred at coprime fractions, arms reaching half-way to the
    /// next coprime fraction
    #[arg(long)]
    coprime: bool,
}

#[derive(Args, Debug)]
struct SeriesArgs {
    /// main | bhv | gallagher | khintchine | km | km_pow | extra
    #[arg(long, default_value = "main")]
    kind: String,
    #[arg(long, value_parser = parse_psi)]
    psi: PsiSpec,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long = "Q")]
    q_max: u64,
}

#[derive(Args, Debug)]
struct CorrelateArgs {
    #[arg(long, value_parser = parse_psi)]
    psi: PsiSpec,
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Horizon for the all-pairs scan and the ratio
    #[arg(long = "Q")]
    q_max: Option<u64>,
    /// Single pair: first modulus
    #[arg(long, requires = "r")]
    q: Option<u64>,
    /// Single pair: second modulus
    #[arg(long, requires = "q")]
    r: Option<u64>,
    /// Step resolution K
    #[arg(long, default_value_t = 16)]
    steps: usize,
    #[arg(long, default_value_t = crate::overlap::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    mc_samples: u64,
    /// Accept moduli with φ(q)/q > 1/4^(k-1) in the ratio
    #[arg(long)]
    ignore_rho: bool,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long, value_parser = parse_psi)]
    psi: PsiSpec,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long = "Q")]
    q_max: u64,
    #[arg(long, default_value_t = 100)]
    n_alphas: usize,
    /// Count with the plain distance ‖·‖ instead of ‖·‖′
    #[arg(long)]
    non_coprime: bool,
    #[arg(long, default_value_t = crate::lab::DEFAULT_QUADRATURE_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct CountArgs {
    /// Comma-separated coordinates of α
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    alpha: Vec<f64>,
    #[arg(long, value_parser = parse_psi)]
    psi: PsiSpec,
    #[arg(long = "Q")]
    q_max: u64,
    #[arg(long)]
    non_coprime: bool,
    #[arg(long, default_value_t = DEFAULT_SOLUTION_CAP)]
    cap: usize,
}

const COMMANDS: [&str; 6] = ["measure", "geometry", "series", "correlate", "experiment", "count"];

/// Inserts `--key value` pairs from the config file after the subcommand,
/// skipping keys already present on the command line.
fn merge_config(argv: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config `{path}`: {e}"))?;
    let mut command = None;
    let mut extra = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected key=value", n + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "command" {
            command = Some(value.to_string());
            continue;
        }
        let flag = format!("--{key}");
        let given = argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        match value {
            "true" => extra.push(flag),
            "false" => {}
            _ => {
                extra.push(flag);
                extra.push(value.to_string());
            }
        }
    }
    let mut out = argv;
    let pos = match out.iter().position(|a| COMMANDS.contains(&a.as_str())) {
        Some(p) => p + 1,
        None => match command {
            Some(c) => {
                out.insert(1, c);
                2
            }
            None => return Ok(out),
        },
    };
    out.splice(pos..pos, extra);
    Ok(out)
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let argv: Vec<String> = argv
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    let outcome = match threads.filter(|&n| n > 0) {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Error::InvalidArgument(format!("cannot start {n} threads: {e}"))),
        },
        None => execute(&cli),
    };
    match outcome {
        Ok(path) => {
            eprintln!("wrote {}", path.display());
            0
        }
        Err(e) if e.is_usage() => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            1
        }
    }
}

fn execute(cli: &Cli) -> Result<PathBuf> {
    let (name, default_format) = match &cli.command {
        Command::Measure(_) => ("measure", Format::Csv),
        Command::Geometry(_) => ("geometry", Format::Csv),
        Command::Series(_) => ("series", Format::Csv),
        Command::Correlate(_) => ("correlate", Format::Csv),
        Command::Experiment(_) => ("experiment", Format::Report),
        Command::Count(_) => ("count", Format::Csv),
    };
    let format = cli.format.unwrap_or(default_format);
    let doc = match &cli.command {
        Command::Measure(a) => measure_doc(a, cli.seed)?,
        Command::Geometry(a) => geometry_doc(a)?,
        Command::Series(a) => series_doc(a)?,
        Command::Correlate(a) => correlate_doc(a, cli.seed)?,
        Command::Experiment(a) => experiment_doc(a, cli.seed)?,
        Command::Count(a) => count_doc(a)?,
    };
    let path = cli.output.clone().unwrap_or_else(|| {
        PathBuf::from(match format {
            Format::Csv => format!("{name}.csv"),
            Format::Report => format!("{name}.report.txt"),
        })
    });
    let text = match format {
        Format::Csv => doc.blocks.first().map(|b| b.1.clone()).unwrap_or_default(),
        Format::Report => doc.render(name),
    };
    fs::write(&path, text)?;
    Ok(path)
}

/// Header key/values plus named CSV blocks; the first block is the CSV output.
struct Document {
    header: Vec<(String, String)>,
    blocks: Vec<(String, String)>,
}

impl Document {
    fn render(&self, kind: &str) -> String {
        if let Some(raw) = self.header.iter().find(|(k, _)| k == "__raw") {
            return raw.1.clone();
        }
        let mut s = format!("schema={REPORT_SCHEMA}\nkind={kind}\ncode_version={}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.header {
            let _ = writeln!(s, "{k}={v}");
        }
        for (name, csv) in &self.blocks {
            let _ = write!(s, "\n[{name}]\n{csv}");
        }
        s
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    bytes_to_string(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
}

fn bytes_to_string(bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
}

/// The measure the `measure` command reports for one set.
pub fn primary_measure(desc: &SetDescriptor<f64>, tol: f64) -> Result<MeasureResult<f64>> {
    match (desc.variant, desc.k) {
        (Variant::Coprime, 2) => measure_coprime_exact(desc.q, desc.psi),
        (Variant::Coprime, k) => measure_coprime_quadrature(desc.q, desc.psi, k, tol),
        (Variant::NonCoprime, k) => measure_non_coprime(desc.q, desc.psi, k),
        (Variant::StarPartition, k) => measure_star_partition(desc.q, desc.psi, k),
    }
}

fn measure_doc(a: &MeasureArgs, seed: u64) -> Result<Document> {
    let variant: Variant = a.variant.parse()?;
    let psi = a.psi.eval(a.q)?;
    let desc = SetDescriptor::new(a.q, psi, variant, a.k)?;
    let m = primary_measure(&desc, a.tol)?;
    let mc = if a.mc_samples > 0 {
        Some(measure_mc(&desc, a.mc_samples, seed)?)
    } else {
        None
    };
    let row = vec![
        a.q.to_string(),
        a.k.to_string(),
        a.psi.to_string(),
        variant.to_string(),
        psi.to_string(),
        m.value.to_string(),
        m.method.to_string(),
        m.error_bound.to_string(),
        mc.map_or(String::new(), |r| r.value.to_string()),
        mc.map_or(String::new(), |r| r.error_bound.to_string()),
        mc.map_or(0, |r| r.samples).to_string(),
    ];
    let csv = csv_string(
        &[
            "q", "k", "psi", "variant", "psi_value", "value", "method", "error_bound", "mc_value",
            "mc_stderr", "mc_samples",
        ],
        [row],
    )?;
    Ok(Document {
        header: vec![("seed".into(), seed.to_string())],
        blocks: vec![("measure".into(), csv)],
    })
}

fn geometry_doc(a: &GeometryArgs) -> Result<Document> {
    if a.q == 0 {
        return Err(Error::InvalidArgument("q must be at least 1".into()));
    }
    if let Some(psi) = &a.psi {
        psi.eval(a.q)?;
    }
    let cells = star_cells(a.q, a.coprime);
    let mut buf = Vec::new();
    write_star_cells_csv(&cells, &mut buf)?;
    Ok(Document {
        header: vec![
            ("q".into(), a.q.to_string()),
            ("coprime".into(), a.coprime.to_string()),
            ("cells".into(), cells.len().to_string()),
        ],
        blocks: vec![("cells".into(), bytes_to_string(buf)?)],
    })
}

fn series_doc(a: &SeriesArgs) -> Result<Document> {
    let kind: CriterionKind = a.kind.parse()?;
    let trace = partial_sum(kind, &a.psi, a.k, a.q_max, &[])?;
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    Ok(Document {
        header: vec![
            ("psi".into(), a.psi.to_string()),
            ("kind".into(), kind.to_string()),
            ("k".into(), a.k.to_string()),
            ("Q".into(), a.q_max.to_string()),
            ("growth".into(), trace.growth.to_string()),
            ("growth_note".into(), trace.growth_note.clone()),
        ],
        blocks: vec![("trace".into(), bytes_to_string(buf)?)],
    })
}

fn correlate_doc(a: &CorrelateArgs, seed: u64) -> Result<Document> {
    let mut header = vec![
        ("psi".into(), a.psi.to_string()),
        ("k".into(), a.k.to_string()),
        ("steps".into(), a.steps.to_string()),
        ("epsilon".into(), a.epsilon.to_string()),
    ];
    let fam = |q| BumpFamily::<f64>::from_spec(&a.psi, q, a.k, a.epsilon);
    let mut rows: Vec<PairStats<f64>> = Vec::new();
    let mut blocks = Vec::new();
    if let (Some(q), Some(r)) = (a.q, a.r) {
        if q == 0 || r == 0 {
            return Err(Error::InvalidArgument("q and r must be at least 1".into()));
        }
        let s = pair_correlation(&fam(q)?, &fam(r)?, a.steps, a.mc_samples, seed)?;
        header.push(("refinement_bias".into(), s.refinement_bias.to_string()));
        if let Some((m, se)) = s.mc_estimate {
            header.push(("mc_estimate".into(), m.to_string()));
            header.push(("mc_stderr".into(), se.to_string()));
        }
        rows.push(s);
    } else {
        let q_max = a
            .q_max
            .ok_or_else(|| Error::InvalidArgument("correlate needs --Q or both --q and --r".into()))?;
        let qi = quasi_independence_ratio_with(&a.psi, a.k, q_max, a.steps, a.epsilon, !a.ignore_rho)?;
        header.push(("Q".into(), q_max.to_string()));
        header.push(("ratio".into(), qi.ratio.to_string()));
        header.push(("numerator".into(), qi.numerator.to_string()));
        header.push(("denominator".into(), qi.denominator.to_string()));
        header.push(("max_step_increase".into(), qi.max_step_increase().to_string()));
        let fams = qi.support.iter().map(|&q| fam(q)).collect::<Result<Vec<_>>>()?;
        use rayon::prelude::*;
        let pairs: Vec<(usize, usize)> = (0..fams.len()).flat_map(|i| (i..fams.len()).map(move |j| (i, j))).collect();
        rows = pairs
            .par_iter()
            .map(|&(i, j)| pair_correlation(&fams[i], &fams[j], a.steps, a.mc_samples, seed))
            .collect::<Result<Vec<_>>>()?;
        blocks.push((
            "trajectory".to_string(),
            csv_string(
                &["Q", "ratio"],
                qi.trajectory.iter().map(|(q, r)| vec![q.to_string(), r.to_string()]),
            )?,
        ));
    }
    let mut buf = Vec::new();
    write_pair_stats_csv(&rows, &mut buf)?;
    blocks.insert(0, ("pairs".into(), bytes_to_string(buf)?));
    Ok(Document { header, blocks })
}

fn experiment_doc(a: &ExperimentArgs, seed: u64) -> Result<Document> {
    let mut cfg = TrialConfig::new(a.psi.clone(), a.k, a.q_max, !a.non_coprime, a.n_alphas, seed);
    cfg.quadrature_tol = a.tol;
    let rep = run_trials(&cfg)?;
    let csv = csv_string(
        &["Q", "expectation", "mean", "variance", "deviation_fraction"],
        rep.rows.iter().map(|r| {
            vec![
                r.q.to_string(),
                r.expectation.to_string(),
                r.mean.to_string(),
                r.variance.to_string(),
                r.deviation_fraction.to_string(),
            ]
        }),
    )?;
    Ok(Document {
        header: vec![("__raw".into(), rep.render())],
        blocks: vec![("checkpoints".into(), csv)],
    })
}

fn count_doc(a: &CountArgs) -> Result<Document> {
    let s = count_solutions(&a.alpha, &a.psi, a.q_max, !a.non_coprime, a.cap)?;
    let list: Vec<String> = s.solutions.iter().map(|q| q.to_string()).collect();
    let csv = csv_string(
        &["Q", "count", "truncated", "solutions"],
        [vec![a.q_max.to_string(), s.count.to_string(), s.truncated.to_string(), list.join(" ")]],
    )?;
    Ok(Document {
        header: vec![
            ("psi".into(), a.psi.to_string()),
            ("coprime".into(), (!a.non_coprime).to_string()),
        ],
        blocks: vec![("solutions".into(), csv)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn config_merging() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "# defaults\ncommand=series\npsi=const:0.1\nQ=64\nk=3\n").unwrap();
        let merged = merge_config(args(&format!("mdapprox --config {} --k 2", cfg.display()))).unwrap();
        assert_eq!(merged[1], "series");
        assert!(merged.windows(2).any(|w| w[0] == "--psi" && w[1] == "const:0.1"));
        assert!(!merged.iter().any(|a| a == "3"));
        let merged = merge_config(args(&format!("mdapprox geometry --config {} --q 4", cfg.display()))).unwrap();
        assert_eq!(merged[1], "geometry");
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(args("mdapprox measure --q 4")), 2);
        assert_eq!(run(args("mdapprox measure --q 4 --psi wat:1")), 2);
        assert_eq!(run(args("mdapprox frobnicate")), 2);
        assert_eq!(run(args("mdapprox --help")), 0);
        assert_eq!(run(args("mdapprox series --psi const:0.1 --Q 10 --kind nope -o /dev/null")), 2);
    }

    #[test]
    fn computation_errors_exit_one() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o.csv");
        let code = run(args(&format!(
            "mdapprox measure --q 30 --psi const:0.01 --k 3 --tol 1e-300 --mc-samples 0 -o {}",
            out.display()
        )));
        assert_eq!(code, 1);
        assert!(!out.exists());
    }
}
