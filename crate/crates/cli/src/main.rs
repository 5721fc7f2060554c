use std::fmt::Write as _;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use zerofreq::datasets::Dataset;
use zerofreq::estimators::{default_cutoff, estimate, Method};
use zerofreq::inference::{bootstrap_method, gof_chisq, GofResult};
use zerofreq::simulation::{parse_study_specs, reports_to_csv, run_study, truncation_sweep};
use zerofreq::{parse_frequency_table, BootstrapResult, EstimateResult, FrequencyTable, WeightScheme};

#[derive(Parser)]
#[command(name = "zerofreq", version, about = "Population size from zero-truncated frequency counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the population size with one or more methods.
    Estimate(EstimateArgs),
    /// Ratio-plot data: (x, (x+1) f_{x+1} / f_x) and optionally the fitted line.
    Ratio(RatioArgs),
    /// Goodness of fit of the WLRM model, with residuals per count.
    Gof(GofArgs),
    /// Estimates across a range of truncation points.
    Sensitivity(SensitivityArgs),
    /// Run a simulation study described by a TOML file.
    Simulate(SimulateArgs),
    /// List the built-in datasets, or print one.
    Datasets {
        name: Option<String>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Built-in dataset name, path to a frequency file, or `-` for stdin.
    input: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SeSource {
    Formula,
    Bootstrap,
}

/// `auto` or a fixed truncation point.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Cutoff {
    Auto,
    Fixed(u32),
}

impl FromStr for Cutoff {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Cutoff::Auto);
        }
        s.parse()
            .map(Cutoff::Fixed)
            .map_err(|_| format!("expected `auto` or an integer, got `{s}`"))
    }
}

impl Cutoff {
    /// Regression methods use the first-gap rule, Chao-Bunge 10, Chao 2 and
    /// ML the largest count.
    fn resolve(self, method: Method, table: &FrequencyTable<f64>) -> u32 {
        match (self, method) {
            (_, Method::Chao) => 2,
            (Cutoff::Fixed(m), _) => m,
            (Cutoff::Auto, Method::Wlrm | Method::Hm) => default_cutoff(table),
            (Cutoff::Auto, Method::ChaoBunge) => 10,
            (Cutoff::Auto, Method::ZtnbMl) => table.max_count(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum MethodArg {
    All,
    One(Method),
}

impl FromStr for MethodArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            Ok(MethodArg::All)
        } else {
            s.parse().map(MethodArg::One)
        }
    }
}

fn expand_methods(args: &[MethodArg]) -> Vec<Method> {
    let mut out = Vec::new();
    for a in args {
        let add: Vec<Method> = match a {
            MethodArg::All => Method::ALL.to_vec(),
            MethodArg::One(m) => vec![*m],
        };
        for m in add {
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    out
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// wlrm, hm, chao, chao-bunge, ztnb-ml or all; comma separated or repeated.
    #[arg(long, value_delimiter = ',', default_value = "wlrm")]
    method: Vec<MethodArg>,
    /// Truncation point: `auto` or an integer.
    #[arg(long, default_value = "auto")]
    m: Cutoff,
    #[arg(long, default_value = "diag")]
    weights: WeightScheme,
    #[arg(long, value_enum, default_value = "formula")]
    se: SeSource,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Percentile interval level for the bootstrap.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Also print fit coefficients, unscaled SE and implied parameters.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Args)]
struct RatioArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "auto")]
    m: Cutoff,
    /// Print log ratios instead of ratios.
    #[arg(long)]
    log: bool,
    /// Add the WLRM fitted value at each x.
    #[arg(long)]
    with_fit: bool,
    #[arg(long, default_value = "diag")]
    weights: WeightScheme,
}

#[derive(Args)]
struct GofArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "auto")]
    m: Cutoff,
    #[arg(long, default_value = "diag")]
    weights: WeightScheme,
    /// `table` prints a summary and residual table, `csv` the residuals only.
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_delimiter = ',', default_value = "wlrm,chao-bunge")]
    methods: Vec<MethodArg>,
    /// `3..24`, `3-24` or a comma-separated list; defaults to 3 up to the largest count.
    #[arg(long)]
    m_range: Option<String>,
    #[arg(long, default_value = "diag")]
    weights: WeightScheme,
}

#[derive(Args)]
struct SimulateArgs {
    spec: PathBuf,
    /// Write the CSV report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the replicate count in the file.
    #[arg(long)]
    replicates: Option<usize>,
}

enum Failure {
    Input(String),
    NoValid,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Ratio(a) => cmd_ratio(a),
        Command::Gof(a) => cmd_gof(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Datasets { name } => cmd_datasets(name),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::NoValid) => ExitCode::from(2),
    }
}

fn load(input: &str) -> Result<FrequencyTable<f64>, Failure> {
    if let Some(d) = Dataset::from_name(input) {
        return Ok(d.table());
    }
    let text = if input == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        let path = Path::new(input);
        if !path.exists() {
            let names: Vec<&str> = Dataset::ALL.iter().map(|d| d.name()).collect();
            return Err(Failure::Input(format!(
                "`{input}` is neither a built-in dataset ({}) nor a file",
                names.join(", ")
            )));
        }
        std::fs::read_to_string(path).map_err(|e| format!("{input}: {e}"))?
    };
    let table: FrequencyTable<f64> = parse_frequency_table(&text).map_err(|e| format!("{input}: {e}"))?;
    Ok(table.with_name(input))
}

fn warn_skipped(table: &FrequencyTable<f64>, m: u32, warnings: &mut Vec<String>) {
    let skipped = table.ratio_points(m).skipped;
    if !skipped.is_empty() {
        let xs: Vec<String> = skipped.iter().map(u32::to_string).collect();
        let msg = format!("m = {m}: ratio points skipped at x = {} (zero frequencies)", xs.join(", "));
        if !warnings.contains(&msg) {
            warnings.push(msg);
        }
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> CmdResult {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_csv(header: &[&str], rows: &[Vec<String>]) -> CmdResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    emit(&String::from_utf8(bytes)?)
}

fn emit_json<S: Serialize>(value: &S) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(&text)
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

// estimate ------------------------------------------------------------------

#[derive(Serialize)]
struct EstimateReport {
    input: String,
    n_observed: f64,
    weights: WeightScheme,
    se_source: &'static str,
    results: Vec<MethodReport>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct MethodReport {
    method: Method,
    m: u32,
    valid: bool,
    invalid_reason: Option<String>,
    n_hat: Option<f64>,
    f0_hat: Option<f64>,
    se: Option<f64>,
    se_unscaled: Option<f64>,
    gof: Option<GofSummary>,
    fit: Option<FitSummary>,
    implied_nb: Option<NbSummary>,
    ztnb: Option<ZtnbSummary>,
    bootstrap: Option<BootSummary>,
}

#[derive(Serialize)]
struct GofSummary {
    chisq: f64,
    df: u32,
    p_value: Option<f64>,
    gap_cells: Vec<u32>,
}

#[derive(Serialize)]
struct FitSummary {
    gamma: f64,
    delta: f64,
    dispersion: f64,
    n_points: usize,
    xs: Vec<u32>,
}

#[derive(Serialize)]
struct NbSummary {
    k: f64,
    p: f64,
}

#[derive(Serialize)]
struct ZtnbSummary {
    k: f64,
    p: f64,
    log_likelihood: f64,
    converged: bool,
    on_boundary: bool,
}

#[derive(Serialize)]
struct BootSummary {
    b: usize,
    seed: u64,
    se: f64,
    level: f64,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    failures: usize,
    flagged: bool,
}

impl From<&BootstrapResult> for BootSummary {
    fn from(r: &BootstrapResult) -> Self {
        Self {
            b: r.b,
            seed: r.seed,
            se: r.se,
            level: r.level,
            ci_low: r.percentile_ci.map(|c| c.0),
            ci_high: r.percentile_ci.map(|c| c.1),
            failures: r.failures,
            flagged: r.flagged,
        }
    }
}

fn method_report(
    table: &FrequencyTable<f64>,
    e: EstimateResult<f64>,
    boot: Option<BootstrapResult>,
) -> Result<MethodReport, Failure> {
    let gof = match (&e.fit, e.method) {
        (Some(fit), Method::Wlrm) => {
            let g: GofResult<f64> = gof_chisq(table, fit, e.m_used)?;
            Some(GofSummary {
                chisq: g.chisq,
                df: g.df,
                p_value: g.p_value,
                gap_cells: g.gap_cells,
            })
        }
        _ => None,
    };
    let se = match &boot {
        Some(b) => (!b.replicates.is_empty()).then_some(b.se),
        None => e.se,
    };
    Ok(MethodReport {
        method: e.method,
        m: e.m_used,
        valid: e.is_valid(),
        invalid_reason: e.invalid.map(|r| r.describe().to_string()),
        n_hat: e.n_hat,
        f0_hat: e.f0_hat,
        se,
        se_unscaled: e.se_unscaled,
        gof,
        fit: e.fit.as_ref().map(|f| FitSummary {
            gamma: f.gamma_hat,
            delta: f.delta_hat,
            dispersion: f.dispersion,
            n_points: f.n_points,
            xs: f.xs.clone(),
        }),
        implied_nb: e.implied_nb.map(|nb| NbSummary { k: nb.k, p: nb.p }),
        ztnb: e.ztnb.map(|z| ZtnbSummary {
            k: z.k,
            p: z.p,
            log_likelihood: z.log_likelihood,
            converged: z.converged,
            on_boundary: z.on_boundary,
        }),
        bootstrap: boot.as_ref().map(BootSummary::from),
    })
}

fn cmd_estimate(a: EstimateArgs) -> CmdResult {
    let table = load(&a.input.input)?;
    let methods = expand_methods(&a.method);
    let mut warnings = Vec::new();
    if table.n() < 100.0 {
        warnings.push(format!(
            "n = {} is below 100; the plug-in SE may be unreliable, consider --se bootstrap",
            table.n()
        ));
    }
    let mut results = Vec::new();
    for &method in &methods {
        let m = a.m.resolve(method, &table);
        let e = estimate(&table, method, m, a.weights)?;
        if matches!(method, Method::Wlrm | Method::Hm) {
            warn_skipped(&table, e.m_used, &mut warnings);
        }
        let boot = if a.se == SeSource::Bootstrap && e.is_valid() {
            let model_m = a.m.resolve(Method::Wlrm, &table);
            match bootstrap_method(&table, model_m, a.weights, method, m, a.bootstrap, a.seed, a.level) {
                Ok(b) => {
                    if b.flagged {
                        warnings.push(format!(
                            "{method}: {} of {} bootstrap replicates failed",
                            b.failures, b.b
                        ));
                    }
                    Some(b)
                }
                Err(err) => {
                    warnings.push(format!("{method}: bootstrap unavailable: {err}"));
                    None
                }
            }
        } else {
            None
        };
        results.push(method_report(&table, e, boot)?);
    }
    let report = EstimateReport {
        input: a.input.input.clone(),
        n_observed: table.n(),
        weights: a.weights,
        se_source: match a.se {
            SeSource::Formula => "formula",
            SeSource::Bootstrap => "bootstrap",
        },
        results,
        warnings,
    };
    if a.format != Format::Json {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    match a.format {
        Format::Json => emit_json(&report)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .results
                .iter()
                .map(|r| {
                    vec![
                        r.method.cli_name().to_string(),
                        r.m.to_string(),
                        opt(r.n_hat),
                        opt(r.f0_hat),
                        opt(r.se),
                        opt(r.gof.as_ref().and_then(|g| g.p_value)),
                        r.valid.to_string(),
                        r.invalid_reason.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            print_csv(&["method", "m", "n_hat", "f0_hat", "se", "p_value", "valid", "reason"], &rows)?;
        }
        Format::Table => emit(&render_estimates(&report, a.verbose))?,
    }
    if report.results.iter().any(|r| r.valid) {
        Ok(())
    } else {
        Err(Failure::NoValid)
    }
}

fn fmt_round(x: Option<f64>) -> String {
    // f64::round rounds half away from zero.
    x.map_or("-".into(), |v| format!("{}", v.round()))
}

fn fmt_dec(x: Option<f64>, digits: usize) -> String {
    x.map_or("-".into(), |v| format!("{v:.digits$}"))
}

fn render_estimates(r: &EstimateReport, verbose: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}: n = {}, weights = {}, SE = {}", r.input, r.n_observed, r.weights, r.se_source);
    let _ = writeln!(
        s,
        "{:<11} {:>4} {:>10} {:>10} {:>9} {:>6}  valid",
        "method", "m", "N_hat", "f0_hat", "SE", "p"
    );
    for m in &r.results {
        let mark = if m.valid { "" } else { "*" };
        let _ = writeln!(
            s,
            "{:<11} {:>4} {:>10} {:>10} {:>9} {:>6}  {}",
            m.method.label(),
            m.m,
            format!("{}{mark}", fmt_round(m.n_hat)),
            fmt_dec(m.f0_hat, 1),
            fmt_dec(m.se, 1),
            fmt_dec(m.gof.as_ref().and_then(|g| g.p_value), 3),
            match &m.invalid_reason {
                None => "yes".to_string(),
                Some(reason) => format!("no ({reason})"),
            }
        );
        if let Some(b) = &m.bootstrap {
            let _ = writeln!(
                s,
                "    bootstrap: B = {}, seed = {}, {:.0}% interval [{}, {}], failures = {}",
                b.b,
                b.seed,
                100.0 * b.level,
                fmt_round(b.ci_low),
                fmt_round(b.ci_high),
                b.failures
            );
        }
        if verbose {
            if let Some(f) = &m.fit {
                let _ = writeln!(
                    s,
                    "    intercept = {:.6}, slope = {:.6}, dispersion = {:.4}, points = {}, SE unscaled = {}",
                    f.gamma,
                    f.delta,
                    f.dispersion,
                    f.n_points,
                    fmt_dec(m.se_unscaled, 1)
                );
            }
            if let Some(g) = &m.gof {
                let _ = writeln!(s, "    chi2 = {:.3}, df = {}", g.chisq, g.df);
                if !g.gap_cells.is_empty() {
                    let _ = writeln!(s, "    gap cells in chi2: {:?}", g.gap_cells);
                }
            }
            if let Some(nb) = &m.implied_nb {
                let _ = writeln!(s, "    implied NB: k = {:.4}, p = {:.4}", nb.k, nb.p);
            }
            if let Some(z) = &m.ztnb {
                let _ = writeln!(
                    s,
                    "    ZTNB: k = {:.4}, p = {:.4}, loglik = {:.4}, converged = {}, on boundary = {}",
                    z.k, z.p, z.log_likelihood, z.converged, z.on_boundary
                );
            }
        }
    }
    if r.results.iter().any(|m| !m.valid) {
        let _ = writeln!(s, "* estimation failed; raw value shown where one exists");
    }
    s
}

// ratio ---------------------------------------------------------------------

fn cmd_ratio(a: RatioArgs) -> CmdResult {
    let table = load(&a.input.input)?;
    let m = a.m.resolve(Method::Wlrm, &table);
    table.check_truncation(m)?;
    let m = m.min(table.max_count());
    let pts = table.ratio_points(m);
    let mut warnings = Vec::new();
    warn_skipped(&table, m, &mut warnings);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let fit = if a.with_fit {
        let e = estimate(&table, Method::Wlrm, m, a.weights)?;
        match e.fit {
            Some(f) => Some(f),
            None => {
                eprintln!(
                    "error: no regression line: {}",
                    e.invalid.map_or("fit failed", |r| r.describe())
                );
                return Err(Failure::NoValid);
            }
        }
    } else {
        None
    };
    let value_col = if a.log { "log_ratio" } else { "ratio" };
    let mut header = vec!["x", "f_x", "f_next", value_col];
    if fit.is_some() {
        header.push("fitted");
    }
    let rows: Vec<Vec<String>> = pts
        .points
        .iter()
        .map(|p| {
            let mut row = vec![
                p.x.to_string(),
                table.freq(p.x).to_string(),
                table.freq(p.x + 1).to_string(),
                if a.log { p.y } else { p.ratio() }.to_string(),
            ];
            if let Some(f) = &fit {
                let line = f.gamma_hat + f.delta_hat * p.x as f64;
                row.push(if a.log { line } else { line.exp() }.to_string());
            }
            row
        })
        .collect();
    print_csv(&header, &rows)
}

// gof -----------------------------------------------------------------------

#[derive(Serialize)]
struct GofReport {
    input: String,
    m: u32,
    weights: WeightScheme,
    chisq: f64,
    df: u32,
    p_value: Option<f64>,
    f0_hat: f64,
    gap_cells: Vec<u32>,
    cells: Vec<GofCell>,
}

#[derive(Serialize)]
struct GofCell {
    x: u32,
    observed: f64,
    fitted: f64,
    residual: Option<f64>,
}

fn cmd_gof(a: GofArgs) -> CmdResult {
    let table = load(&a.input.input)?;
    let m = a.m.resolve(Method::Wlrm, &table);
    let e = estimate(&table, Method::Wlrm, m, a.weights)?;
    let Some(fit) = e.fit.as_ref() else {
        eprintln!(
            "error: WLRM fit failed: {}",
            e.invalid.map_or("unknown", |r| r.describe())
        );
        return Err(Failure::NoValid);
    };
    let g = gof_chisq(&table, fit, e.m_used)?;
    let cells: Vec<GofCell> = g
        .fitted
        .iter()
        .map(|(&x, &fitted)| GofCell {
            x,
            observed: if x == 0 { 0.0 } else { table.freq(x) },
            fitted,
            residual: g.residuals.get(&x).copied(),
        })
        .collect();
    let report = GofReport {
        input: a.input.input.clone(),
        m: e.m_used,
        weights: a.weights,
        chisq: g.chisq,
        df: g.df,
        p_value: g.p_value,
        f0_hat: g.f0_hat(),
        gap_cells: g.gap_cells.clone(),
        cells,
    };
    if !report.gap_cells.is_empty() && a.format != Format::Json {
        eprintln!("warning: zero cells inside 1..m contribute to chi2: {:?}", report.gap_cells);
    }
    let residual_rows = || -> Vec<Vec<String>> {
        report
            .cells
            .iter()
            .filter(|c| c.x >= 1)
            .map(|c| {
                vec![
                    c.x.to_string(),
                    c.observed.to_string(),
                    c.fitted.to_string(),
                    opt(c.residual),
                    report.gap_cells.contains(&c.x).to_string(),
                ]
            })
            .collect()
    };
    match a.format {
        Format::Json => emit_json(&report)?,
        Format::Csv => print_csv(&["x", "observed", "fitted", "residual", "gap"], &residual_rows())?,
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{}: m = {}, weights = {}, chi2 = {:.3}, df = {}, p = {}",
                report.input,
                report.m,
                report.weights,
                report.chisq,
                report.df,
                fmt_dec(report.p_value, 3)
            );
            let _ = writeln!(s, "{:>4} {:>10} {:>10} {:>9}", "x", "observed", "fitted", "residual");
            for c in &report.cells {
                let _ = writeln!(
                    s,
                    "{:>4} {:>10} {:>10.2} {:>9}",
                    c.x,
                    if c.x == 0 { "-".to_string() } else { c.observed.to_string() },
                    c.fitted,
                    fmt_dec(c.residual, 3)
                );
            }
            emit(&s)?;
        }
    }
    Ok(())
}

// sensitivity ---------------------------------------------------------------

fn parse_m_range(spec: &str) -> Result<Vec<u32>, Failure> {
    let bad = || Failure::Input(format!("invalid --m-range `{spec}`"));
    let bounds = spec
        .split_once("..")
        .map(|(a, b)| (a, b.strip_prefix('=').unwrap_or(b)))
        .or_else(|| spec.split_once('-'));
    if let Some((lo, hi)) = bounds {
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|v| v.trim().parse().map_err(|_| bad()))
        .collect()
}

fn cmd_sensitivity(a: SensitivityArgs) -> CmdResult {
    let table = load(&a.input.input)?;
    let methods = expand_methods(&a.methods);
    let ms = match &a.m_range {
        Some(r) => parse_m_range(r)?,
        None => (3..=table.max_count().max(3)).collect(),
    };
    let rows = truncation_sweep(&table, &methods, &ms, a.weights)?;
    let mut header = vec!["m".to_string()];
    for m in &methods {
        header.push(m.cli_name().to_string());
        header.push(format!("{}_valid", m.cli_name()));
    }
    let out: Vec<Vec<String>> = ms
        .iter()
        .map(|&m| {
            let mut row = vec![m.to_string()];
            for &method in &methods {
                let r = rows.iter().find(|r| r.m == m && r.method == method);
                row.push(opt(r.and_then(|r| r.n_hat)));
                row.push(r.is_some_and(|r| r.valid).to_string());
            }
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    print_csv(&header, &out)
}

// simulate ------------------------------------------------------------------

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| format!("{}: {e}", a.spec.display()))?;
    let mut specs = parse_study_specs(&text)?;
    let mut reports = Vec::with_capacity(specs.len());
    for spec in &mut specs {
        if let Some(r) = a.replicates {
            spec.replicates = r;
        }
        eprintln!("running {} ({} replicates)", spec.name, spec.replicates);
        reports.push(run_study(spec)?);
    }
    let csv = reports_to_csv(&reports);
    match &a.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display()))?,
        None => emit(&csv)?,
    }
    Ok(())
}

// datasets ------------------------------------------------------------------

fn cmd_datasets(name: Option<String>) -> CmdResult {
    match name {
        Some(n) => {
            let d = Dataset::from_name(&n).ok_or_else(|| format!("unknown dataset `{n}`"))?;
            emit(d.source_text())
        }
        None => {
            let mut s = format!("{:<12} {:>5} {:>5}  description\n", "name", "n", "max");
            for d in Dataset::ALL {
                let t = d.table::<f64>();
                let _ = writeln!(s, "{:<12} {:>5} {:>5}  {}", d.name(), t.n(), t.max_count(), d.description());
            }
            emit(&s)
        }
    }
}
