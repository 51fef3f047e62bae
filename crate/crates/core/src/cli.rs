//! Command-line surface: `generate`, `analyze`, `identify`, `order`,
//! `render`, `verify`, `perturb`.
//!
//! Exit codes: 0 success, 2 usage, 3 numeric or degeneracy, 4 I/O. Errors
//! are printed to stderr as one JSON object.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::generator::{plant, recouple, GeneratorParams};
use crate::identify::{identify_families, LambdaChoice};
use crate::io::{self, SCHEMA_VERSION};
use crate::model::{Permutation, PoliticsMatrix};
use crate::ordering::seriate;
use crate::perturbation::{compare_with_exact, perturbation_report};
use crate::render::{self, ColorScale, RenderKind, RenderSpec};
use crate::spectra::{self, QMethod};
use crate::verify::{verify_society, VerifyOptions};

#[derive(Debug, Parser)]
#[command(name = "famspec", version, about = "Families in nearly uncoupled stochastic matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plant a society and write it to a directory.
    Generate(GenerateArgs),
    /// Spectrum, q and main eigen-data of a matrix.
    Analyze(AnalyzeArgs),
    /// Recover families from a matrix.
    Identify(IdentifyArgs),
    /// Seriate people from a recovered J-check and assignment.
    Order(OrderArgs),
    /// Render a heatmap, spectrum, J-check columns or power bars.
    Render(RenderArgs),
    /// Check every invariant of a generated society.
    Verify(VerifyArgs),
    /// Compare perturbation predictions with exact eigen-data over several epsilons.
    Perturb(PerturbArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    q: usize,
    /// Comma-separated family sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long)]
    low: usize,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    gamma_min: Option<f64>,
    #[arg(long)]
    low_alpha: Option<f64>,
    #[arg(long)]
    coupling_alpha: Option<f64>,
    /// Keep the family normal form labeling.
    #[arg(long)]
    no_hide: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// A number or `auto`.
    #[arg(long, default_value = "auto")]
    q: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "auto")]
    q: String,
    /// `vu` for diag(VU*) weighting, or `v2`, `v3`, ... for diag(v_k).
    #[arg(long, default_value = "vu")]
    lambda: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OrderArgs {
    #[arg(long)]
    jhat: PathBuf,
    #[arg(long)]
    assign: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// heatmap, spectrum, columns or power.
    #[arg(long)]
    kind: String,
    /// Matrix CSV (A for heatmap, spectrum and power; J-check for columns).
    #[arg(long = "in")]
    input: PathBuf,
    /// `.svg`, or `.pgm` for heatmaps.
    #[arg(long)]
    out: PathBuf,
    /// order.json whose person order is applied.
    #[arg(long)]
    perm: Option<PathBuf>,
    /// `auto` or `MIN,MAX`.
    #[arg(long, default_value = "auto")]
    scale: String,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    society: PathBuf,
    /// Tolerance replacing every per-check tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    #[arg(long)]
    society: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    epsilon_list: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_q(text: &str) -> Result<QMethod> {
    if text == "auto" {
        return Ok(QMethod::Gap);
    }
    text.parse::<usize>()
        .map(QMethod::Fixed)
        .map_err(|_| Error::Parameter(format!("--q expects a number or `auto`, got {text:?}")))
}

fn parse_lambda(text: &str) -> Result<LambdaChoice> {
    if text == "vu" {
        return Ok(LambdaChoice::Projector);
    }
    text.strip_prefix('v')
        .map(|k| k.trim_start_matches('_'))
        .and_then(|k| k.parse::<usize>().ok())
        .map(LambdaChoice::RightVector)
        .ok_or_else(|| Error::Parameter(format!("--lambda expects `vu` or `v<k>`, got {text:?}")))
}

fn parse_scale(text: &str) -> Result<ColorScale> {
    if text == "auto" {
        return Ok(ColorScale::Auto);
    }
    let parts: Vec<&str> = text.split(',').collect();
    match parts.as_slice() {
        [lo, hi] => match (lo.trim().parse::<f64>(), hi.trim().parse::<f64>()) {
            (Ok(min), Ok(max)) if max > min => Ok(ColorScale::Range { min, max }),
            _ => Err(Error::Parameter(format!("--scale expects MIN,MAX with MIN < MAX, got {text:?}"))),
        },
        _ => Err(Error::Parameter(format!("--scale expects `auto` or MIN,MAX, got {text:?}"))),
    }
}

/// Missing inputs are usage errors.
fn input(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Parameter(format!("input not found: {}", path.display())))
    }
}

fn read_politics(path: &Path) -> Result<PoliticsMatrix> {
    PoliticsMatrix::new(io::read_matrix(input(path)?)?, false)
}

fn generate(args: &GenerateArgs) -> Result<()> {
    if args.q != args.sizes.len() {
        return Err(Error::Parameter(format!(
            "--q {} but --sizes lists {} families",
            args.q,
            args.sizes.len()
        )));
    }
    let mut params = GeneratorParams::new(&args.sizes, args.low, args.epsilon, args.seed).hidden(!args.no_hide);
    if let Some(g) = args.gamma_min {
        params.gamma_min = g;
    }
    if let Some(a) = args.low_alpha {
        params.low_alpha = a;
    }
    if let Some(a) = args.coupling_alpha {
        params.coupling_alpha = a;
    }
    let planted = plant(&params)?;
    io::write_society(&args.out, &planted.society, Some(&planted))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Analysis {
    schema_version: u32,
    n: usize,
    q: usize,
    q_method: String,
    /// `[re, im]` sorted by distance to 1.
    eigenvalues: Vec<[f64; 2]>,
    distances: Vec<f64>,
    main_eigenvalues: Vec<f64>,
    omega_star: Vec<f64>,
    residual_right: f64,
    residual_left: f64,
    biorthogonality: f64,
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let method = parse_q(&args.q)?;
    let a = read_politics(&args.input)?;
    let (eigs, eig) = spectra::analyze(&a, method)?;
    let (right, left) = eig.residuals(a.matrix());
    let q = eig.q();
    let bi = crate::linalg::inf_norm(&(&eig.u_star * &eig.v - DMatrix::identity(q, q)));
    let analysis = Analysis {
        schema_version: SCHEMA_VERSION,
        n: a.n(),
        q,
        q_method: match method {
            QMethod::Gap => "gap".into(),
            _ => "fixed".into(),
        },
        eigenvalues: eigs.iter().map(|z| [z.re, z.im]).collect(),
        distances: eigs.iter().map(|z| (1.0 - z).norm()).collect(),
        main_eigenvalues: eig.lambda.clone(),
        omega_star: eig.omega_star.iter().copied().collect(),
        residual_right: right,
        residual_left: left,
        biorthogonality: bi,
    };
    io::write_json(&args.out, &analysis)
}

/// Contents of `assign.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct AssignFile {
    pub schema_version: u32,
    pub n: usize,
    pub q: usize,
    pub lambda_choice: String,
    /// 1-based family per person.
    pub assignment: Vec<usize>,
    /// 1-based members per family.
    pub families: Vec<Vec<usize>>,
    pub ties: Vec<usize>,
    pub empty_families: Vec<usize>,
    pub main_eigenvalues: Vec<f64>,
    pub z_eigenvalues: Vec<f64>,
    pub lambda_diag: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    pub beta_check: Vec<Vec<f64>>,
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

fn identify(args: &IdentifyArgs) -> Result<()> {
    let method = parse_q(&args.q)?;
    let choice = parse_lambda(&args.lambda)?;
    let a = read_politics(&args.input)?;
    let result = identify_families(&a, method, choice)?;
    let r = &result.recovery;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    io::write_matrix(&args.out.join("jhat.csv"), &r.j_check)?;
    io::write_matrix(&args.out.join("v.csv"), &result.eig.v)?;
    io::write_matrix(&args.out.join("u_star.csv"), &result.eig.u_star)?;
    let file = AssignFile {
        schema_version: SCHEMA_VERSION,
        n: a.n(),
        q: r.q(),
        lambda_choice: args.lambda.clone(),
        assignment: one_based(&r.assignment),
        families: r.families().iter().map(|f| one_based(f)).collect(),
        ties: one_based(&r.ties),
        empty_families: one_based(&r.empty_families),
        main_eigenvalues: result.eig.lambda.clone(),
        z_eigenvalues: r.z_eigenvalues.clone(),
        lambda_diag: r.lambda_diag.iter().copied().collect(),
        z: io::rows(&r.z),
        beta_check: io::rows(&r.beta_check),
    };
    io::write_json(&args.out.join("assign.json"), &file)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SplitRecord {
    pub family: usize,
    pub left_neighbor: usize,
    pub right_neighbor: usize,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Contents of `order.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct OrderFile {
    pub schema_version: u32,
    pub n: usize,
    pub family_chain: Vec<usize>,
    pub person_order: Vec<usize>,
    pub splits: Vec<SplitRecord>,
    pub linking: Vec<Vec<f64>>,
}

fn order(args: &OrderArgs) -> Result<()> {
    let j_check = io::read_matrix(input(&args.jhat)?)?;
    let path = input(&args.assign)?;
    let assign: AssignFile = io::read_json(path)?;
    if assign.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unsupported schema_version {}", assign.schema_version),
        });
    }
    let q = j_check.ncols();
    let assignment: Vec<usize> = assign
        .assignment
        .iter()
        .map(|&f| {
            if f == 0 || f > q {
                Err(Error::Shape(format!("family {f} outside 1..={q}")))
            } else {
                Ok(f - 1)
            }
        })
        .collect::<Result<_>>()?;
    let plan = seriate(&j_check, &assignment)?;
    let file = OrderFile {
        schema_version: SCHEMA_VERSION,
        n: j_check.nrows(),
        family_chain: one_based(&plan.family_chain),
        person_order: plan.person_order.to_one_based(),
        splits: plan
            .splits
            .iter()
            .map(|s| SplitRecord {
                family: s.family + 1,
                left_neighbor: s.left_neighbor + 1,
                right_neighbor: s.right_neighbor + 1,
                left: one_based(&s.left),
                right: one_based(&s.right),
            })
            .collect(),
        linking: io::rows(&plan.linking),
    };
    io::write_json(&args.out, &file)
}

fn render_cmd(args: &RenderArgs) -> Result<()> {
    let kind: RenderKind = args.kind.parse()?;
    let scale = parse_scale(&args.scale)?;
    let permutation = match &args.perm {
        Some(p) => {
            let file: OrderFile = io::read_json(input(p)?)?;
            Some(Permutation::from_one_based(&file.person_order)?)
        }
        None => None,
    };
    let spec = RenderSpec {
        scale,
        permutation,
        blocks: Vec::new(),
    };
    let pgm = args.out.extension().is_some_and(|e| e == "pgm");
    if pgm && kind != RenderKind::Heatmap {
        return Err(Error::Parameter("PGM output is only available for heatmaps".into()));
    }
    let m = io::read_matrix(input(&args.input)?)?;
    let bytes = match kind {
        RenderKind::Heatmap if pgm => render::heatmap_pgm(&m, &spec)?,
        RenderKind::Heatmap => render::heatmap_svg(&m, &spec)?.into_bytes(),
        RenderKind::Spectrum => render::spectrum_svg(&spectra::full_spectrum(&PoliticsMatrix::new(m, false)?)?)?.into_bytes(),
        RenderKind::Columns => render::columns_svg(&m, &spec)?.into_bytes(),
        RenderKind::Power => {
            let omega = spectra::power_vector(&PoliticsMatrix::new(m, false)?)?;
            render::power_svg(&omega, &spec)?.into_bytes()
        }
    };
    std::fs::write(&args.out, bytes).map_err(|e| Error::io(&args.out, e))
}

/// Verification outcome; a failed report still writes its JSON.
fn verify_cmd(args: &VerifyArgs, stdout: &mut dyn Write) -> Result<bool> {
    let (society, manifest) = io::read_society(input(&args.society)?)?;
    let opts = VerifyOptions {
        tolerance: args.tol,
        gamma_min: manifest.gamma_min,
    };
    let report = verify_society(&society, &opts)?;
    match &args.out {
        Some(path) => io::write_json(path, &report)?,
        None => {
            let text = serde_json::to_string_pretty(&report)?;
            writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(report.passed)
}

#[derive(Debug, Serialize)]
struct PerturbEntry {
    epsilon: f64,
    lambda_exact: Vec<f64>,
    lambda_first: Vec<f64>,
    lambda_second: Vec<f64>,
    lambda_err_first: f64,
    lambda_err_second: f64,
    v_err: f64,
    u_err: f64,
}

#[derive(Debug, Serialize)]
struct PerturbReport {
    schema_version: u32,
    n: usize,
    q: usize,
    lambda_dot: Vec<f64>,
    lambda_ddot: Vec<f64>,
    beta: Vec<Vec<f64>>,
    entries: Vec<PerturbEntry>,
    /// Successive error ratios `err(eps_k) / err(eps_{k+1})`.
    lambda_ratios: Vec<f64>,
    v_ratios: Vec<f64>,
}

fn perturb(args: &PerturbArgs) -> Result<()> {
    let (society, _) = io::read_society(input(&args.society)?)?;
    let gt = society
        .ground_truth
        .clone()
        .ok_or_else(|| Error::Parameter("perturb needs a society with ground truth".into()))?;
    let q = gt.q();
    let entries: Vec<Result<PerturbEntry>> = std::thread::scope(|scope| {
        let handles: Vec<_> = args
            .epsilon_list
            .iter()
            .map(|&eps| {
                let society = &society;
                scope.spawn(move || -> Result<PerturbEntry> {
                    let s = recouple(society, eps)?;
                    let truth = s.ground_truth.as_ref().expect("recouple keeps ground truth");
                    let report = perturbation_report(truth, eps)?;
                    let exact = spectra::main_eigensystem(&s.a, q)?;
                    let cmp = compare_with_exact(&report.prediction, &exact)?;
                    Ok(PerturbEntry {
                        epsilon: eps,
                        lambda_exact: cmp.lambda_exact.clone(),
                        lambda_first: report.prediction.lambda_first.clone(),
                        lambda_second: report.prediction.lambda_second.clone(),
                        lambda_err_first: cmp.lambda_err_first,
                        lambda_err_second: cmp.lambda_err_second,
                        v_err: cmp.v_err,
                        u_err: cmp.u_err,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("perturb worker panicked")).collect()
    });
    let entries: Vec<PerturbEntry> = entries.into_iter().collect::<Result<_>>()?;
    let base = perturbation_report(&gt, args.epsilon_list[0])?;
    let ratios = |f: fn(&PerturbEntry) -> f64| -> Vec<f64> { entries.windows(2).map(|w| f(&w[0]) / f(&w[1])).collect() };
    let report = PerturbReport {
        schema_version: SCHEMA_VERSION,
        n: gt.n(),
        q,
        lambda_dot: base.eig.lambda_dot.clone(),
        lambda_ddot: base.second.lambda_ddot.clone(),
        beta: io::rows(&base.eig.beta),
        lambda_ratios: ratios(|e| e.lambda_err_first),
        v_ratios: ratios(|e| e.v_err),
        entries,
    };
    io::write_json(&args.out, &report)
}

fn error_json(kind: &str, message: &str, code: i32) -> String {
    json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "kind": kind, "message": message, "exit_code": code }
    })
    .to_string()
}

/// Runs one command; returns the process exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = writeln!(stderr, "{}", error_json("usage", e.to_string().trim(), 2));
            return 2;
        }
    };
    let outcome = match &cli.command {
        Command::Generate(a) => generate(a).map(|_| true),
        Command::Analyze(a) => analyze(a).map(|_| true),
        Command::Identify(a) => identify(a).map(|_| true),
        Command::Order(a) => order(a).map(|_| true),
        Command::Render(a) => render_cmd(a).map(|_| true),
        Command::Verify(a) => verify_cmd(a, stdout),
        Command::Perturb(a) => perturb(a).map(|_| true),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => {
            let _ = writeln!(stderr, "{}", error_json("verification", "one or more invariants failed", 3));
            3
        }
        Err(e) => {
            let kind = if e.exit_code() == 2 { "usage" } else { e.kind() };
            let _ = writeln!(stderr, "{}", error_json(kind, &e.to_string(), e.exit_code()));
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn option_parsers() {
        assert_eq!(parse_q("auto").unwrap(), QMethod::Gap);
        assert_eq!(parse_q("4").unwrap(), QMethod::Fixed(4));
        assert!(parse_q("four").is_err());
        assert_eq!(parse_lambda("vu").unwrap(), LambdaChoice::Projector);
        assert_eq!(parse_lambda("v2").unwrap(), LambdaChoice::RightVector(2));
        assert_eq!(parse_lambda("v_3").unwrap(), LambdaChoice::RightVector(3));
        assert!(parse_lambda("w").is_err());
        assert_eq!(parse_scale("0,2").unwrap(), ColorScale::Range { min: 0.0, max: 2.0 });
        assert!(parse_scale("2,0").is_err());
    }

    #[test]
    fn unknown_flag_is_usage() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(["famspec", "analyze", "--bogus"], &mut out, &mut err);
        assert_eq!(code, 2);
        let v: serde_json::Value = serde_json::from_slice(&err).unwrap();
        assert_eq!(v["error"]["kind"], "usage");
        assert_eq!(v["schema_version"], 1);
    }
}
