mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use stable_exit::analysis::{
    self, fmt_full, fmt_short, parse_grid, ConcavityOptions, ConeHuntOptions, Probe, Quantity,
    ScanRegion, CONE_APERTURES,
};
use stable_exit::closedform::{Point3, StableParams};
use stable_exit::extension::{ExtensionContext, Which};
use stable_exit::geom::{parse_builtin, parse_domain_file, DomainSpec, SupportDomain};
use stable_exit::phi::{BallPhi, PhiEval};
use stable_exit::quad::QuadSpec;
use stable_exit::wos::{
    build_field, estimate_phi, field_domain_ref, FieldConfig, PhiField, WalkConfig,
};
use stable_exit::{Error, Result};

const USAGE_EXIT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "stable-exit",
    version,
    about = "Exit times of stable processes and the convexity of their harmonic extensions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo estimate of the mean exit time from a point.
    Solve(SolveArgs),
    /// Tabulate the mean exit time on a lattice and write a field file.
    FieldBuild(FieldArgs),
    /// Hessian determinant and signature of the extension over a point set.
    HessianScan(ScanArgs),
    /// Determinant of the blended Hessian over a grid of weights.
    PsiBScan(PsiArgs),
    /// Log-log slope of a boundary quantity against the probe scale.
    ExponentFit(FitArgs),
    /// Curvature and continuity checks along the deformation to the unit disk.
    DeformSweep(DeformArgs),
    /// Search narrow cones for concavity violations along the axis.
    ConeHunt(ConeArgs),
    /// Concavity of the exit time (or its square root) on random triples.
    Concavity(ConcavityArgs),
    /// Both scaling inequalities for the exit time on random cases.
    ScalingInequalities(ScalingArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    /// Builtin domain: disk, disk:r, ellipse:a,b or cone:theta,d.
    #[arg(long, conflicts_with = "domain")]
    builtin: Option<String>,
    /// Domain file (support-fourier v1 or cone v1).
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; data goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Settings file with `key = value` lines and `[command]` sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct WalkArgs {
    /// Number of walks (accepts forms like 1e6).
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    walks: u64,
    #[arg(long, default_value_t = 0.5)]
    ball_fraction: f64,
    #[arg(long, default_value_t = 10_000)]
    max_steps: u32,
}

#[derive(Args, Clone)]
struct QuadArgs {
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_cells: usize,
}

#[derive(Args, Clone)]
struct PhiArgs {
    #[arg(long)]
    alpha: Option<f64>,
    /// Field file for domains without a closed-form exit time.
    #[arg(long)]
    field: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    walk: WalkArgs,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Starting point, comma separated.
    #[arg(long)]
    at: Option<String>,
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    walk: WalkArgs,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    spacing: f64,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    quad: QuadArgs,
    #[command(flatten)]
    phi: PhiArgs,
    /// cylinder:M=<m>, lower-cylinder:M=<m>, slab or collar:W=<w>.
    #[arg(long, default_value = "cylinder:M=3")]
    region: String,
    /// halton:<n>, or file:<path> with one x1,x2,x3 per line.
    #[arg(long, default_value = "halton:500")]
    points: String,
    /// u, veps:<eps> or psib:<b>.
    #[arg(long, default_value = "u")]
    which: String,
}

#[derive(Args)]
struct PsiArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    quad: QuadArgs,
    #[command(flatten)]
    phi: PhiArgs,
    /// Grid of weights, lo:hi:n.
    #[arg(long, default_value = "0:1:11")]
    b: String,
    #[arg(long, default_value = "collar:W=0.2")]
    region: String,
    #[arg(long, default_value = "halton:200")]
    points: String,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    quad: QuadArgs,
    #[command(flatten)]
    phi: PhiArgs,
    /// normal-slab, S1, S2, S3 or S4.
    #[arg(long)]
    probe: Option<String>,
    /// phi_n, phi_nn, phi_TT, u11, u13, u22, u23, u33 or ext_half_lap.
    #[arg(long)]
    quantity: Option<String>,
    /// Probe scales, lo:hi:geometric:n or lo:hi:n.
    #[arg(long, default_value = "0.02:0.2:geometric:6")]
    h: String,
    /// Outward normal angle of the anchoring boundary point.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
}

#[derive(Args)]
struct DeformArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "0:1:11")]
    t: String,
}

#[derive(Args)]
struct ConeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    walk: WalkArgs,
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    /// Half-apertures, comma separated (default: the standard sweep).
    #[arg(long)]
    theta: Option<String>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 15)]
    axis_points: usize,
    #[arg(long, default_value_t = 5.0)]
    sigmas: f64,
}

#[derive(Args)]
struct ConcavityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    phi: PhiArgs,
    #[arg(long, default_value_t = 10_000)]
    triples: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 3.0)]
    sigmas: f64,
    /// Fixed weight; random when absent.
    #[arg(long)]
    lambda: Option<f64>,
    /// Test the square root of the exit time.
    #[arg(long)]
    sqrt: bool,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    phi: PhiArgs,
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 3.0)]
    sigmas: f64,
}

fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let v: f64 = s.parse().map_err(|_| format!("not a count: {s:?}"))?;
    if v >= 1.0 && v.fract() == 0.0 && v < 1.8e19 {
        Ok(v as u64)
    } else {
        Err(format!("not a count: {s:?}"))
    }
}

fn main() -> ExitCode {
    let raw: Vec<OsString> = std::env::args_os().collect();
    let root = Cli::command();
    let args = match config::apply_config_file(&root, raw) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE_EXIT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if e.exit_code() == USAGE_EXIT as i32 {
        eprintln!("see --help for usage");
    }
    ExitCode::from(e.exit_code() as u8)
}

fn run(cli: Cli) -> Result<()> {
    let common = match &cli.cmd {
        Cmd::Solve(a) => &a.common,
        Cmd::FieldBuild(a) => &a.common,
        Cmd::HessianScan(a) => &a.common,
        Cmd::PsiBScan(a) => &a.common,
        Cmd::ExponentFit(a) => &a.common,
        Cmd::DeformSweep(a) => &a.common,
        Cmd::ConeHunt(a) => &a.common,
        Cmd::Concavity(a) => &a.common,
        Cmd::ScalingInequalities(a) => &a.common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Solve(a) => solve(a),
        Cmd::FieldBuild(a) => field_build(a),
        Cmd::HessianScan(a) => hessian_scan(a),
        Cmd::PsiBScan(a) => psi_b_scan(a),
        Cmd::ExponentFit(a) => exponent_fit(a),
        Cmd::DeformSweep(a) => deform_sweep(a),
        Cmd::ConeHunt(a) => cone_hunt(a),
        Cmd::Concavity(a) => concavity(a),
        Cmd::ScalingInequalities(a) => scaling_inequalities(a),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// The domain and the reference string recorded in outputs.
fn load_domain(c: &Common) -> Result<Option<(DomainSpec, String)>> {
    if let Some(b) = &c.builtin {
        return Ok(Some((parse_builtin(b)?, b.clone())));
    }
    if let Some(p) = &c.domain {
        let spec = parse_domain_file(&read(p)?)?;
        return Ok(Some((spec, p.display().to_string())));
    }
    Ok(None)
}

fn require_domain(c: &Common) -> Result<(DomainSpec, String)> {
    load_domain(c)?
        .ok_or_else(|| Error::InvalidParameter("one of --builtin or --domain is required".into()))
}

fn planar(spec: DomainSpec) -> Result<SupportDomain> {
    match spec {
        DomainSpec::Support(d) => Ok(d),
        DomainSpec::Cone(_) => Err(Error::InvalidParameter(
            "this command needs a planar support-function domain".into(),
        )),
    }
}

/// Domain and exit-time source: a field file, or the closed form on disks.
fn phi_setup(c: &Common, a: &PhiArgs) -> Result<(SupportDomain, Box<dyn PhiEval>, f64)> {
    if let Some(path) = &a.field {
        let text = read(path)?;
        let dom = match load_domain(c)? {
            Some((spec, _)) => planar(spec)?,
            None => {
                let r = field_domain_ref(&text)?;
                let spec = match parse_builtin(&r) {
                    Ok(s) => s,
                    Err(_) => parse_domain_file(&read(Path::new(&r))?)?,
                };
                planar(spec)?
            }
        };
        let field = PhiField::from_file_string(&text, dom.clone())?;
        let alpha = field.params().alpha();
        if a.alpha.is_some_and(|x| x != alpha) {
            return Err(Error::InvalidParameter(format!(
                "--alpha differs from the field's alpha = {alpha}"
            )));
        }
        return Ok((dom, Box::new(field), alpha));
    }
    let dom = planar(require_domain(c)?.0)?;
    let alpha = a.alpha.unwrap_or(1.0);
    let r = dom.disk_radius().ok_or_else(|| {
        Error::InvalidParameter(
            "no closed form for this domain; build a field with field-build and pass --field"
                .into(),
        )
    })?;
    let phi = BallPhi::new(StableParams::new(alpha, 2)?, r)?;
    Ok((dom, Box::new(phi), alpha))
}

fn quad_spec(q: &QuadArgs) -> QuadSpec {
    QuadSpec {
        rel_tol: q.rel_tol,
        abs_tol: q.abs_tol,
        max_cells: q.max_cells,
        ..QuadSpec::default()
    }
}

fn walk_config(w: &WalkArgs, seed: u64) -> WalkConfig {
    WalkConfig {
        n_walks: w.walks,
        ball_fraction: w.ball_fraction,
        max_steps: w.max_steps,
        seed,
    }
}

/// Writes machine-readable data to `--out` (summary on stdout) or to stdout
/// (summary on stderr).
fn emit(c: &Common, json: String, csv: String, summary: String) -> Result<()> {
    let data = match c.format {
        Format::Json => json,
        Format::Csv => csv,
    };
    match &c.out {
        Some(p) => {
            std::fs::write(p, data).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            println!("{summary}");
        }
        None => {
            print!("{data}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad {what} {s:?}")))
        })
        .collect()
}

fn solve(a: SolveArgs) -> Result<()> {
    let (spec, _) = require_domain(&a.common)?;
    let at =
        a.at.as_deref()
            .ok_or_else(|| Error::InvalidParameter("--at is required".into()))?;
    let x = parse_list(at, "point")?;
    let cfg = walk_config(&a.walk, a.common.seed);
    let est = match &spec {
        DomainSpec::Support(d) => estimate_phi(d, &StableParams::new(a.alpha, 2)?, &x, &cfg)?,
        DomainSpec::Cone(c) => estimate_phi(c, &StableParams::new(a.alpha, c.dim())?, &x, &cfg)?,
    };
    let mut obj = serde_json::Map::new();
    obj.insert("alpha".into(), a.alpha.into());
    obj.insert("x".into(), x.clone().into());
    obj.insert(
        "estimate".into(),
        serde_json::to_value(est).expect("serialises"),
    );
    let mut json = serde_json::to_string_pretty(&obj).expect("serialises");
    json.push('\n');
    let coords: Vec<String> = (1..=x.len()).map(|k| format!("x{k}")).collect();
    let mut csv = format!(
        "{},mean,std_error,n_walks,truncated,mean_steps\n",
        coords.join(",")
    );
    for v in &x {
        csv.push_str(&fmt_full(*v));
        csv.push(',');
    }
    csv.push_str(&format!(
        "{},{},{},{},{}\n",
        fmt_full(est.mean),
        fmt_full(est.std_error),
        est.n_walks,
        est.truncated,
        fmt_full(est.mean_steps)
    ));
    let summary = format!(
        "mean {} stderr {} walks {} truncated {} steps {}",
        fmt_short(est.mean),
        fmt_short(est.std_error),
        est.n_walks,
        est.truncated,
        fmt_short(est.mean_steps)
    );
    if a.common.out.is_some() {
        emit(&a.common, json, csv, summary)
    } else {
        println!("{summary}");
        Ok(())
    }
}

fn field_build(a: FieldArgs) -> Result<()> {
    let (spec, name) = require_domain(&a.common)?;
    let dom = planar(spec)?;
    let out = a
        .common
        .out
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("field-build needs --out".into()))?;
    let cfg = FieldConfig {
        spacing: a.spacing,
        walks: walk_config(&a.walk, a.common.seed),
    };
    let field = build_field(&dom, &StableParams::new(a.alpha, 2)?, &cfg, &name)?;
    std::fs::write(out, field.to_file_string())
        .map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    println!(
        "field: {} nodes, spacing {}, max node stderr {}",
        field.n_nodes(),
        fmt_short(a.spacing),
        fmt_short(field.max_node_stderr())
    );
    Ok(())
}

fn read_points(path: &Path) -> Result<Vec<Point3>> {
    read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let v: Vec<f64> = l
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("point line {l:?}")))?;
            match v.as_slice() {
                [a, b, c] => Ok([*a, *b, *c]),
                _ => Err(Error::Parse(format!(
                    "point line {l:?} needs 3 coordinates"
                ))),
            }
        })
        .collect()
}

/// Region and count from `--region` and `--points`.
fn point_set(region: &str, points: &str) -> Result<(ScanRegion, usize)> {
    let bad = || Error::InvalidParameter(format!("bad point set {points:?}"));
    match points.split_once(':') {
        Some(("halton", n)) => Ok((ScanRegion::parse(region)?, n.parse().map_err(|_| bad())?)),
        Some(("file", p)) => {
            let pts = read_points(Path::new(p))?;
            let n = pts.len();
            Ok((ScanRegion::Points(pts), n))
        }
        _ => Err(bad()),
    }
}

fn hessian_scan(a: ScanArgs) -> Result<()> {
    let which = Which::parse(&a.which)?;
    let (region, n) = point_set(&a.region, &a.points)?;
    let (dom, phi, _) = phi_setup(&a.common, &a.phi)?;
    let ctx = ExtensionContext::new(&dom, phi.as_ref(), quad_spec(&a.quad))?;
    let r = analysis::hessian_scan(&ctx, &region, n, which)?;
    emit(&a.common, r.to_json(), r.to_csv(), r.summary())
}

fn psi_b_scan(a: PsiArgs) -> Result<()> {
    let grid = parse_grid(&a.b)?;
    let (region, n) = point_set(&a.region, &a.points)?;
    let (dom, phi, _) = phi_setup(&a.common, &a.phi)?;
    if dom.disk_radius().is_none() {
        return Err(Error::InvalidParameter(
            "psi-b-scan is defined on disks".into(),
        ));
    }
    let ctx = ExtensionContext::new(&dom, phi.as_ref(), quad_spec(&a.quad))?;
    let r = analysis::psi_b_scan(&ctx, &grid, &region, n)?;
    emit(&a.common, r.to_json(), r.to_csv(), r.summary())
}

fn exponent_fit(a: FitArgs) -> Result<()> {
    let need = |v: &Option<String>, f: &str| {
        v.clone()
            .ok_or_else(|| Error::InvalidParameter(format!("--{f} is required")))
    };
    let probe = Probe::parse(&need(&a.probe, "probe")?)?;
    let quantity = Quantity::parse(&need(&a.quantity, "quantity")?)?;
    let hs = parse_grid(&a.h)?;
    let (dom, phi, _) = phi_setup(&a.common, &a.phi)?;
    let ctx = ExtensionContext::new(&dom, phi.as_ref(), quad_spec(&a.quad))?;
    let f = analysis::boundary_exponent_fit(&ctx, probe, quantity, &hs, a.theta)?;
    emit(&a.common, f.to_json(), f.to_csv(), f.summary())
}

fn deform_sweep(a: DeformArgs) -> Result<()> {
    let grid = parse_grid(&a.t)?;
    let dom = planar(require_domain(&a.common)?.0)?;
    let r = analysis::deformation_sweep(&dom, &grid, None)?;
    emit(&a.common, r.to_json(), r.to_csv(), r.summary())
}

fn cone_hunt(a: ConeArgs) -> Result<()> {
    let (thetas, dim) = match (load_domain(&a.common)?, &a.theta) {
        (Some((DomainSpec::Cone(c), _)), None) => (vec![c.theta()], c.dim()),
        (Some(_), _) => {
            return Err(Error::InvalidParameter(
                "cone-hunt takes --theta or a cone domain, not both".into(),
            ))
        }
        (None, Some(t)) => (parse_list(t, "aperture list")?, a.dim),
        (None, None) => (CONE_APERTURES.to_vec(), a.dim),
    };
    let p = StableParams::new(a.alpha, dim)?;
    let o = ConeHuntOptions {
        thetas,
        dim,
        axis_points: a.axis_points,
        sigmas: a.sigmas,
    };
    let r = analysis::cone_nonconcavity_hunt(&p, &walk_config(&a.walk, a.common.seed), &o)?;
    let summary = format!(
        "{}; strongest witness: {}",
        r.summary(),
        r.config["strongest"]
    );
    emit(&a.common, r.to_json(), r.to_csv(), summary)
}

fn concavity(a: ConcavityArgs) -> Result<()> {
    let (dom, phi, _) = phi_setup(&a.common, &a.phi)?;
    let o = ConcavityOptions {
        n_cases: a.triples,
        tol: a.tol,
        sigmas: a.sigmas,
        lambda: a.lambda,
        sqrt: a.sqrt,
        seed: a.common.seed,
    };
    let r = analysis::concavity_check(phi.as_ref(), &dom, &o)?;
    emit(&a.common, r.to_json(), r.to_csv(), r.summary())
}

fn scaling_inequalities(a: ScalingArgs) -> Result<()> {
    let (dom, phi, alpha) = phi_setup(&a.common, &a.phi)?;
    let o = ConcavityOptions {
        n_cases: a.cases,
        tol: a.tol,
        sigmas: a.sigmas,
        seed: a.common.seed,
        ..ConcavityOptions::default()
    };
    let r = analysis::theorem14_check(&dom, &StableParams::new(alpha, 2)?, phi.as_ref(), &o)?;
    emit(&a.common, r.to_json(), r.to_csv(), r.summary())
}
