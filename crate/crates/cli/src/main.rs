//! Command-line front end: fixed-point measures, relation verification,
//! vector-measure extraction, chaos-game sampling, and generator application
//! on coefficient tables.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ifs_cuntz::coding::Address;
use ifs_cuntz::io::{self, SCHEMA};
use ifs_cuntz::measure::{chaos_game, hutchinson_fixed_point, hutchinson_iterate};
use ifs_cuntz::rational::{format_rational, to_f64};
use ifs_cuntz::{cuntz, l2};
use ifs_cuntz::{IfsSystem, L2Vector, Measure, RepVector, Word};
use ifs_cuntz::{Rational, C64};

#[derive(Parser)]
#[command(name = "ifs-cuntz", version, about = "Cylinder measures and Cuntz relations on iterated function systems")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the weighted fixed-point measure at a cylinder depth.
    Hutchinson(HutchinsonArgs),
    /// Check the isometry relations, completeness, intertwining, and
    /// covariance properties; exit 1 if any residual exceeds the tolerance.
    Verify(VerifyArgs),
    /// Compute the cylinder measure of a vector under a permutative
    /// representation and flag atom candidates.
    Extract(ExtractArgs),
    /// Sample the fixed-point measure empirically and compare against the
    /// exact masses.
    Chaos(ChaosArgs),
    /// Apply a word in the generators S_i / S_i* to a coefficient table.
    Apply(ApplyArgs),
}

#[derive(Args)]
struct HutchinsonArgs {
    /// System spec: dyadic | cantor | symbolic:<n> | affine:<slope>,<offset>;...
    #[arg(long, default_value = "dyadic")]
    system: String,
    /// Branch weights (positive rationals summing to 1), e.g. 1/2,1/2.
    #[arg(long)]
    weights: String,
    /// Cylinder depth of the output table.
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Iterate from the uniform start and report the L1 convergence trace.
    #[arg(long)]
    iterate: bool,
    /// Iteration budget for --iterate.
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Geometric system spec: dyadic | cantor | bernoulli:<weights> | symbolic:<n>.
    #[arg(long, conflicts_with = "rep", required_unless_present = "rep")]
    system: Option<String>,
    /// Permutative representation spec: torus | maps:<scale>,<offset>;...
    #[arg(long)]
    rep: Option<String>,
    /// Base-measure weights, overriding the system default.
    #[arg(long)]
    weights: Option<String>,
    /// Restrict to these branches, e.g. 1 or 1,3.
    #[arg(long)]
    branches: Option<String>,
    /// Largest cylinder depth exercised.
    #[arg(long, default_value_t = 4)]
    depth: usize,
    /// Residual tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Also check covariance of the vector measures (representation mode).
    #[arg(long)]
    covariance: bool,
}

#[derive(Args)]
struct ExtractArgs {
    /// Permutative representation spec: torus | maps:<scale>,<offset>;...
    #[arg(long, default_value = "torus")]
    rep: String,
    /// Inline vector: <index>:<re>[:<im>];... e.g. 0:1 or 0:0.7;2:0.7
    #[arg(long, conflicts_with = "vector_file", required_unless_present = "vector_file")]
    vector: Option<String>,
    /// CSV vector file with rows index,re,im.
    #[arg(long)]
    vector_file: Option<PathBuf>,
    /// Cylinder depth of the extracted table.
    #[arg(long, default_value_t = 6)]
    depth: usize,
}

#[derive(Args)]
struct ChaosArgs {
    /// System spec: dyadic | cantor | symbolic:<n> | affine:...
    #[arg(long, default_value = "dyadic")]
    system: String,
    /// Branch weights (positive rationals summing to 1).
    #[arg(long)]
    weights: String,
    /// Number of sampled words.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// RNG seed; runs are reproducible per seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cylinder depth of the empirical table.
    #[arg(long, default_value_t = 3)]
    depth: usize,
}

#[derive(Args)]
struct ApplyArgs {
    /// System with its base measure: dyadic | cantor | bernoulli:<weights>.
    #[arg(long, default_value = "dyadic")]
    system: String,
    /// Generator word, rightmost factor applied first: e.g. "1" or "1,2*,1".
    #[arg(long)]
    ops: String,
    /// Inline coefficients: <digits>:<re>[:<im>];... e.g. 01:1;10:0.5:-2
    #[arg(long, conflicts_with = "vector_file", required_unless_present = "vector_file")]
    vector: Option<String>,
    /// CSV coefficient file with rows word,re,im (0-based digit words).
    #[arg(long)]
    vector_file: Option<PathBuf>,
    /// Expected depth of the input table; defaults to the word length found.
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Serialize, Clone)]
struct RelationRow {
    vector_id: usize,
    relation: String,
    residual: f64,
    ok: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    schema: &'static str,
    command: &'static str,
    system: Option<String>,
    rep: Option<String>,
    depth: usize,
    tol: f64,
    vectors: usize,
    checks: Vec<RelationRow>,
    ok: bool,
    worst: Option<RelationRow>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IFS_CUNTZ_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            let doc = serde_json::json!({
                "schema": SCHEMA,
                "error": format!("{err:#}"),
                "code": 2,
            });
            eprintln!("{doc}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let text = match &cli.command {
        Command::Hutchinson(args) => cmd_hutchinson(args, cli.format)?,
        Command::Verify(args) => {
            let (text, ok) = cmd_verify(args, cli.format)?;
            emit(&cli.out, &text)?;
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Extract(args) => cmd_extract(args, cli.format)?,
        Command::Chaos(args) => cmd_chaos(args, cli.format)?,
        Command::Apply(args) => cmd_apply(args, cli.format)?,
    };
    emit(&cli.out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => other.context("writing stdout"),
            }
        }
    }
}

/// Resolve a system spec together with the base measure it implies:
/// `dyadic` carries Lebesgue measure, `cantor` the balanced coding measure,
/// `bernoulli:<weights>` a symbolic space with those branch weights.
fn system_with_measure(spec: &str, weights: Option<&str>) -> Result<(IfsSystem, Measure)> {
    let (sys, default): (IfsSystem, Measure) = if let Some(list) = spec.strip_prefix("bernoulli:") {
        let w = io::parse_weights(list)?;
        let sys = IfsSystem::symbolic(w.len() as u32)?;
        let mu = Measure::bernoulli(sys.alphabet(), w)?;
        (sys, mu)
    } else {
        let sys = io::parse_system(spec)?;
        let mu = match spec {
            "cantor" => Measure::bernoulli(
                sys.alphabet(),
                io::parse_weights("1/2,1/2")?,
            )?,
            _ => Measure::uniform(sys.alphabet()),
        };
        (sys, mu)
    };
    match weights {
        Some(list) => {
            let w = io::parse_weights(list)?;
            Ok((sys.clone(), Measure::bernoulli(sys.alphabet(), w)?))
        }
        None => Ok((sys, default)),
    }
}

fn parse_branches(sys: IfsSystem, spec: Option<&str>) -> Result<IfsSystem> {
    match spec {
        None => Ok(sys),
        Some(list) => {
            let labels: Vec<u32> = list
                .split(',')
                .map(|t| t.trim().parse::<u32>().map_err(|e| anyhow!("branch {t:?}: {e}")))
                .collect::<Result<_>>()?;
            Ok(sys.with_branches(&labels)?)
        }
    }
}

fn measure_csv(m: &Measure) -> Result<String> {
    let mut out = String::from("word,mass\n");
    for (w, mass) in m.cylinder_part().masses() {
        out.push_str(&format!("{},{}\n", io::format_finite_word(w)?, format_rational(mass)));
    }
    for (u, mass) in m.atomic_part().atoms() {
        let (prefix, period) = io::format_point(u);
        out.push_str(&format!("atom {prefix}({period}),{}\n", format_rational(mass)));
    }
    Ok(out)
}

fn cmd_hutchinson(args: &HutchinsonArgs, format: Format) -> Result<String> {
    let sys = io::parse_system(&args.system)?;
    let weights = io::parse_weights(&args.weights)?;
    if !args.iterate {
        let fixed = hutchinson_fixed_point(&sys, &weights, args.depth)?;
        return Ok(match format {
            Format::Json => io::measure_to_json(&fixed),
            Format::Csv => measure_csv(&fixed)?,
        });
    }

    let start = Measure::uniform(sys.alphabet());
    let (fixed, trace) = hutchinson_iterate(&sys, &weights, args.depth, &start, args.max_iters)?;
    log::info!("converged in {} iterations", trace.len());
    match format {
        Format::Json => {
            let measure: serde_json::Value = serde_json::from_str(&io::measure_to_json(&fixed))?;
            let doc = serde_json::json!({
                "schema": SCHEMA,
                "command": "hutchinson",
                "system": args.system,
                "depth": args.depth,
                "iterations": trace.len(),
                "trace": trace.iter().map(format_rational).collect::<Vec<_>>(),
                "measure": measure,
            });
            Ok(serde_json::to_string_pretty(&doc)?)
        }
        Format::Csv => {
            let mut out = measure_csv(&fixed)?;
            out.push_str("\niteration,l1_distance\n");
            for (i, d) in trace.iter().enumerate() {
                out.push_str(&format!("{},{}\n", i + 1, format_rational(d)));
            }
            Ok(out)
        }
    }
}

/// Deterministic test vectors over `mu`: per depth, one indicator, one
/// alternating sign pattern, one complex ramp.
fn l2_battery(mu: &Measure, depth: usize) -> Result<Vec<L2Vector>> {
    let alphabet = mu.alphabet();
    let mut out = Vec::new();
    for d in 1..=depth.max(1) {
        let base = mu.at_depth(d)?;
        let words = alphabet.words(d);
        out.push(L2Vector::new(
            base.clone(),
            vec![(words[0].clone(), C64::new(1.0, 0.0))],
            vec![],
        )?);
        let alt = words
            .iter()
            .enumerate()
            .map(|(k, w)| (w.clone(), C64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0)))
            .collect();
        out.push(L2Vector::new(base.clone(), alt, vec![])?);
        let ramp = words
            .iter()
            .enumerate()
            .map(|(k, w)| {
                (
                    w.clone(),
                    C64::new(1.0 + k as f64 / 4.0, (k % 3) as f64 / 2.0 - 0.5),
                )
            })
            .collect();
        out.push(L2Vector::new(base, ramp, vec![])?);
    }
    Ok(out)
}

fn rep_battery() -> Vec<RepVector> {
    let ramp = (-8i64..=8)
        .map(|n| {
            (
                n,
                C64::new(1.0 / (n as f64 + 9.0), n.rem_euclid(3) as f64 / 4.0),
            )
        })
        .collect();
    vec![
        RepVector::basis(0),
        RepVector::basis(1),
        RepVector::basis(-1),
        RepVector::basis(5),
        RepVector::from_coeffs(ramp),
    ]
}

fn cmd_verify(args: &VerifyArgs, format: Format) -> Result<(String, bool)> {
    let tol = args.tol;
    if tol <= 0.0 {
        bail!("tolerance must be positive");
    }
    let mut rows: Vec<RelationRow> = Vec::new();
    let mut vectors = 0usize;

    if let Some(spec) = &args.system {
        let (sys, mu) = system_with_measure(spec, args.weights.as_deref())?;
        let sys = parse_branches(sys, args.branches.as_deref())?;
        let battery = l2_battery(&mu, args.depth)?;
        vectors = battery.len();
        log::info!("verifying {vectors} vectors over {spec}");
        let report = l2::verify_l2_relations(&sys, &battery, tol)?;
        for check in &report.checks {
            rows.push(RelationRow {
                vector_id: check.vector,
                relation: check.relation.to_string(),
                residual: check.residual,
                ok: check.residual <= tol,
            });
        }
        for (vid, phi) in battery.iter().enumerate() {
            for c in l2::check_intertwining(&sys, phi)? {
                rows.push(RelationRow {
                    vector_id: vid,
                    relation: format!("W S{} - S{} W", c.branch, c.branch),
                    residual: c.forward_residual,
                    ok: c.forward_residual <= tol,
                });
                rows.push(RelationRow {
                    vector_id: vid,
                    relation: format!("W S{}* - S{}* W", c.branch, c.branch),
                    residual: c.adjoint_residual,
                    ok: c.adjoint_residual <= tol,
                });
            }
        }
    }

    if let Some(spec) = &args.rep {
        let rep = io::parse_rep(spec)?;
        let battery = rep_battery();
        vectors = battery.len();
        log::info!("verifying {vectors} vectors under {spec}");
        let report = cuntz::verify_rep_relations(&rep, &battery, tol)?;
        for check in &report.checks {
            rows.push(RelationRow {
                vector_id: check.vector,
                relation: check.relation.to_string(),
                residual: check.residual,
                ok: check.residual <= tol,
            });
        }
        // The binary torus action lives over the dyadic realization, which
        // gives the intertwiner a geometric target.
        if rep.alphabet().size() == 2 {
            let sys = IfsSystem::dyadic();
            for (vid, f) in battery.iter().enumerate() {
                let report = cuntz::check_intertwiner(&sys, &rep, f, args.depth)?;
                let defect = to_f64(&report.isometry_defect).abs();
                rows.push(RelationRow {
                    vector_id: vid,
                    relation: "W isometry defect".into(),
                    residual: defect,
                    ok: defect <= tol,
                });
                for (branch, residual) in &report.branch_residuals {
                    rows.push(RelationRow {
                        vector_id: vid,
                        relation: format!("W S{branch} - S{branch} W"),
                        residual: *residual,
                        ok: *residual <= tol,
                    });
                }
            }
        }
        if args.covariance {
            for (vid, f) in battery.iter().enumerate() {
                let report = cuntz::check_covariance(&rep, f, args.depth)?;
                // Exact table comparisons: residual 0 for equal, 1 for not.
                let dec = if report.decomposition_ok { 0.0 } else { 1.0 };
                rows.push(RelationRow {
                    vector_id: vid,
                    relation: format!("covariance decomposition depth {}", report.depth),
                    residual: dec,
                    ok: report.decomposition_ok,
                });
                for (branch, ok) in &report.branch_ok {
                    rows.push(RelationRow {
                        vector_id: vid,
                        relation: format!("covariance branch {branch}"),
                        residual: if *ok { 0.0 } else { 1.0 },
                        ok: *ok,
                    });
                }
            }
        }
    }

    let ok = rows.iter().all(|r| r.ok);
    let worst = rows
        .iter()
        .max_by(|a, b| a.residual.total_cmp(&b.residual))
        .cloned();
    if !ok {
        let w = worst.clone().unwrap();
        eprintln!(
            "verification failed: vector {} relation \"{}\" residual {:.3e} > tol {:.3e}",
            w.vector_id, w.relation, w.residual, tol
        );
    }

    let text = match format {
        Format::Json => {
            let report = VerifyReport {
                schema: SCHEMA,
                command: "verify",
                system: args.system.clone(),
                rep: args.rep.clone(),
                depth: args.depth,
                tol,
                vectors,
                checks: rows,
                ok,
                worst,
            };
            serde_json::to_string_pretty(&report)?
        }
        Format::Csv => {
            let mut out = String::from("vector_id,relation,residual,ok\n");
            for r in &rows {
                out.push_str(&format!(
                    "{},{},{:e},{}\n",
                    r.vector_id, r.relation, r.residual, r.ok
                ));
            }
            out
        }
    };
    Ok((text, ok))
}

fn parse_index_file(text: &str) -> Result<RepVector> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("index,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 || fields.len() > 3 {
            bail!("line {}: expected index,re[,im], got {line:?}", lineno + 1);
        }
        let n: i64 = fields[0]
            .parse()
            .map_err(|e| anyhow!("line {}: index {:?}: {e}", lineno + 1, fields[0]))?;
        let re: f64 = fields[1]
            .parse()
            .map_err(|e| anyhow!("line {}: re {:?}: {e}", lineno + 1, fields[1]))?;
        let im: f64 = match fields.get(2) {
            Some(t) => t
                .parse()
                .map_err(|e| anyhow!("line {}: im {:?}: {e}", lineno + 1, t))?,
            None => 0.0,
        };
        entries.push((n, C64::new(re, im)));
    }
    if entries.is_empty() {
        bail!("vector file holds no coefficients");
    }
    Ok(RepVector::from_coeffs(entries))
}

/// Leaf cells whose last refinement did not split their mass. Chain masses
/// only decrease with depth, so this is the weakest visible sign of a point
/// mass at finite resolution; diffuse measures split every cell every level
/// and are never flagged.
fn atom_candidates(mu: &Measure, depth: usize) -> Result<Vec<(Word, Rational)>> {
    if depth == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (w, mass) in mu.cylinder_part().masses() {
        let labels: Vec<u32> = w.prefix()[..depth - 1].iter().map(|s| s.label()).collect();
        let parent = Word::finite(mu.alphabet(), &labels)?;
        if mu.cylinder_mass(&parent)? == *mass {
            out.push((w.clone(), mass.clone()));
        }
    }
    Ok(out)
}

fn cmd_extract(args: &ExtractArgs, format: Format) -> Result<String> {
    let rep = io::parse_rep(&args.rep)?;
    let f = match (&args.vector, &args.vector_file) {
        (Some(inline), None) => io::parse_rep_vector(inline)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_index_file(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        _ => bail!("exactly one of --vector and --vector-file is required"),
    };
    let mu = cuntz::vector_measure(&rep, &f, args.depth)?;
    let atoms = atom_candidates(&mu, args.depth)?;
    // The torus representation peels binary digits, so its cylinder words
    // have dyadic addresses worth reporting.
    let geometry = (args.rep == "torus").then(IfsSystem::dyadic);

    match format {
        Format::Json => {
            let measure: serde_json::Value = serde_json::from_str(&io::measure_to_json(&mu))?;
            let atoms: Vec<serde_json::Value> = atoms
                .iter()
                .map(|(w, m)| -> Result<serde_json::Value> {
                    let mut entry = serde_json::json!({
                        "word": io::format_finite_word(w)?,
                        "mass": format_rational(m),
                    });
                    if let Some(sys) = &geometry {
                        if let Address::Interval { lo, hi } = sys.address(w)? {
                            entry["interval"] = serde_json::json!([
                                format_rational(&lo),
                                format_rational(&hi)
                            ]);
                        }
                    }
                    Ok(entry)
                })
                .collect::<Result<_>>()?;
            let doc = serde_json::json!({
                "schema": SCHEMA,
                "command": "extract",
                "rep": args.rep,
                "depth": args.depth,
                "total_mass": format_rational(&mu.total_mass()),
                "measure": measure,
                "atoms": atoms,
            });
            Ok(serde_json::to_string_pretty(&doc)?)
        }
        Format::Csv => {
            let mut out = measure_csv(&mu)?;
            out.push_str("\natom_word,mass,lo,hi\n");
            for (w, m) in &atoms {
                let interval = match &geometry {
                    Some(sys) => match sys.address(w)? {
                        Address::Interval { lo, hi } => {
                            format!("{},{}", format_rational(&lo), format_rational(&hi))
                        }
                        Address::Point(x) => format!("{},", format_rational(&x)),
                    },
                    None => ",".into(),
                };
                out.push_str(&format!(
                    "{},{},{interval}\n",
                    io::format_finite_word(w)?,
                    format_rational(m)
                ));
            }
            Ok(out)
        }
    }
}

fn cmd_chaos(args: &ChaosArgs, format: Format) -> Result<String> {
    let sys = io::parse_system(&args.system)?;
    let weights = io::parse_weights(&args.weights)?;
    let empirical = chaos_game(&sys, &weights, args.samples, args.seed, args.depth)?;
    let exact = hutchinson_fixed_point(&sys, &weights, args.depth)?;

    struct Cell {
        word: String,
        empirical: Rational,
        exact: Rational,
        deviation: f64,
        three_sigma: f64,
    }
    let mut cells = Vec::new();
    let mut max_dev = 0.0f64;
    let mut bound_at_max = 0.0f64;
    let mut within = true;
    for w in sys.alphabet().words(args.depth) {
        let e = empirical.cylinder_mass(&w)?;
        let p = exact.cylinder_mass(&w)?;
        let pf = to_f64(&p);
        let deviation = (to_f64(&e) - pf).abs();
        let three_sigma = 3.0 * (pf * (1.0 - pf) / args.samples as f64).sqrt();
        if deviation > three_sigma {
            within = false;
        }
        if deviation > max_dev {
            max_dev = deviation;
            bound_at_max = three_sigma;
        }
        cells.push(Cell {
            word: io::format_finite_word(&w)?,
            empirical: e,
            exact: p,
            deviation,
            three_sigma,
        });
    }

    match format {
        Format::Json => {
            let measure: serde_json::Value =
                serde_json::from_str(&io::measure_to_json(&empirical))?;
            let rows: Vec<serde_json::Value> = cells
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "word": c.word,
                        "empirical": format_rational(&c.empirical),
                        "exact": format_rational(&c.exact),
                        "deviation": c.deviation,
                        "three_sigma": c.three_sigma,
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "schema": SCHEMA,
                "command": "chaos",
                "system": args.system,
                "samples": args.samples,
                "seed": args.seed,
                "depth": args.depth,
                "measure": measure,
                "cells": rows,
                "max_abs_deviation": max_dev,
                "three_sigma_at_max": bound_at_max,
                "within_bound": within,
            });
            Ok(serde_json::to_string_pretty(&doc)?)
        }
        Format::Csv => {
            let mut out = String::from("word,empirical,exact,deviation,three_sigma\n");
            for c in &cells {
                out.push_str(&format!(
                    "{},{},{},{:e},{:e}\n",
                    c.word,
                    format_rational(&c.empirical),
                    format_rational(&c.exact),
                    c.deviation,
                    c.three_sigma
                ));
            }
            out.push_str(&format!(
                "# max_abs_deviation={max_dev:e} three_sigma_at_max={bound_at_max:e} within_bound={within}\n"
            ));
            Ok(out)
        }
    }
}

fn parse_ops(s: &str) -> Result<Vec<(u32, bool)>> {
    let mut ops = Vec::new();
    for token in s.split([',', ' ']).filter(|t| !t.is_empty()) {
        let (digits, star) = match token.strip_suffix('*') {
            Some(head) => (head, true),
            None => (token, false),
        };
        let branch: u32 = digits
            .parse()
            .map_err(|e| anyhow!("generator token {token:?}: {e}"))?;
        ops.push((branch, star));
    }
    if ops.is_empty() {
        bail!("no generator tokens in {s:?}");
    }
    Ok(ops)
}

fn parse_word_coeffs(
    alphabet: ifs_cuntz::Alphabet,
    inline: &Option<String>,
    file: &Option<PathBuf>,
) -> Result<Vec<(Word, C64)>> {
    let mut entries = Vec::new();
    match (inline, file) {
        (Some(spec), None) => {
            for part in spec.split(';').filter(|p| !p.is_empty()) {
                let fields: Vec<&str> = part.split(':').collect();
                if fields.len() < 2 || fields.len() > 3 {
                    bail!("expected <digits>:<re>[:<im>], got {part:?}");
                }
                let w = io::parse_finite_word(alphabet, fields[0])?;
                let re: f64 = fields[1].parse().map_err(|e| anyhow!("re {:?}: {e}", fields[1]))?;
                let im: f64 = match fields.get(2) {
                    Some(t) => t.parse().map_err(|e| anyhow!("im {t:?}: {e}"))?,
                    None => 0.0,
                };
                entries.push((w, C64::new(re, im)));
            }
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with("word,") {
                    continue;
                }
                let fields: Vec<&str> = line.split(',').map(str::trim).collect();
                if fields.len() < 2 || fields.len() > 3 {
                    bail!("line {}: expected word,re[,im], got {line:?}", lineno + 1);
                }
                let w = io::parse_finite_word(alphabet, fields[0])
                    .with_context(|| format!("line {}", lineno + 1))?;
                let re: f64 = fields[1]
                    .parse()
                    .map_err(|e| anyhow!("line {}: re {:?}: {e}", lineno + 1, fields[1]))?;
                let im: f64 = match fields.get(2) {
                    Some(t) => t
                        .parse()
                        .map_err(|e| anyhow!("line {}: im {:?}: {e}", lineno + 1, t))?,
                    None => 0.0,
                };
                entries.push((w, C64::new(re, im)));
            }
        }
        _ => bail!("exactly one of --vector and --vector-file is required"),
    }
    if entries.is_empty() {
        bail!("no coefficients given");
    }
    Ok(entries)
}

fn cmd_apply(args: &ApplyArgs, format: Format) -> Result<String> {
    let (sys, mu) = system_with_measure(&args.system, None)?;
    let ops = parse_ops(&args.ops)?;
    let entries = parse_word_coeffs(sys.alphabet(), &args.vector, &args.vector_file)?;
    let depth_in = args.depth.unwrap_or_else(|| entries[0].0.len());
    let base = mu.at_depth(depth_in)?;
    let mut phi = L2Vector::new(base, entries, vec![])?;
    for (branch, star) in ops.iter().rev() {
        phi = if *star {
            l2::apply_s_mu_star(&sys, *branch, &phi)?
        } else {
            l2::apply_s_mu(&sys, *branch, &phi)?
        };
    }

    let values: Vec<(String, C64)> = phi
        .values()
        .map(|(w, v)| Ok((io::format_finite_word(w)?, *v)))
        .collect::<Result<_>>()?;
    match format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = values
                .iter()
                .map(|(w, v)| serde_json::json!({ "word": w, "re": v.re, "im": v.im }))
                .collect();
            let doc = serde_json::json!({
                "schema": SCHEMA,
                "command": "apply",
                "system": args.system,
                "ops": args.ops,
                "depth_in": depth_in,
                "depth_out": phi.depth(),
                "values": rows,
            });
            Ok(serde_json::to_string_pretty(&doc)?)
        }
        Format::Csv => {
            let mut out = String::from("word,re,im\n");
            for (w, v) in &values {
                out.push_str(&format!("{w},{},{}\n", v.re, v.im));
            }
            Ok(out)
        }
    }
}
