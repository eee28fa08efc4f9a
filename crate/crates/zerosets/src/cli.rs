//! `zerosets` command line: argument grammar, config loading and dispatch.
//!
//! Usage errors exit with 2, numerical failures with 1.

use crate::boundary::BoundaryGrid;
use crate::dbar::{self, support_linear, KernelParams, KnownPrimitive};
use crate::domain::{Domain, DomainFile, DomainKind};
use crate::error::Error;
use crate::forms::{self, CarlesonBudget, CellBudget, DiscreteMeasure, DivisorModel, LocalizedLelong};
use crate::geometry;
use crate::homotopy::{Homotopy, RetractParams};
use crate::matrix::{self, ContourSpec, HermitianPd, JsonMatrix};
use crate::metric::MetricModel;
use crate::num::{self, C64};
use crate::pipeline::{self, PipelineConfig};
use crate::selftest;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ZEROSETS_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "zerosets", version, about = "Zero sets of Hardy-space functions on convex domains of finite type")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for relative output paths.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Non-isotropic geometry queries.
    #[command(subcommand)]
    Geom(GeomCmd),
    /// Matrix solvers.
    #[command(subcommand)]
    Matrix(MatrixCmd),
    /// Bergman metric models.
    #[command(subcommand)]
    Metric(MetricCmd),
    /// Carleson norms of measures and smoothed Lelong currents.
    #[command(subcommand)]
    Carleson(CarlesonCmd),
    /// Homotopy operator `H theta`.
    #[command(subcommand)]
    Homotopy(HomotopyCmd),
    /// Integral-kernel dbar solver.
    #[command(subcommand)]
    Dbar(DbarCmd),
    /// End-to-end pipeline.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
    /// Invariant suite with a pass/fail table.
    Selftest {
        /// Skip the slow sweeps and the pipeline.
        #[arg(long)]
        fast: bool,
    },
}

#[derive(Debug, Clone, clap::Args)]
struct DomainArg {
    /// `ball`, `ellipsoid:m1,m2,...` or a JSON domain file.
    #[arg(long)]
    domain: Option<String>,
}

#[derive(Debug, Subcommand)]
enum GeomCmd {
    /// `tau(z, v, eps)`.
    Tau {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, allow_hyphen_values = true)]
        v: String,
        #[arg(long)]
        eps: f64,
    },
    /// Extremal basis and radii at `(z, eps)`.
    Basis {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long)]
        eps: f64,
        /// Also write the frame as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Pseudodistance `delta(z, zeta)`.
    Delta {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, allow_hyphen_values = true)]
        zeta: String,
    },
    /// Contact order along `v` at a boundary point.
    Order {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, allow_hyphen_values = true)]
        v: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SylvesterMethod {
    Direct,
    Contour,
}

#[derive(Debug, Subcommand)]
enum MatrixCmd {
    /// Solve `MH + HM = C`; matrices are JSON arrays of `[re, im]` rows.
    Sylvester {
        #[arg(long, value_enum, default_value = "direct")]
        method: SylvesterMethod,
        #[arg(long)]
        m: PathBuf,
        #[arg(long)]
        c: PathBuf,
        /// Relative contour radius.
        #[arg(long, default_value_t = 0.25)]
        scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Ball,
    Surrogate,
}

#[derive(Debug, Clone, clap::Args)]
struct MetricArgs {
    #[arg(long, value_enum)]
    model: Option<ModelChoice>,
    #[command(flatten)]
    domain: DomainArg,
    #[arg(long, allow_hyphen_values = true)]
    z: String,
}

#[derive(Debug, Subcommand)]
enum MetricCmd {
    /// `B(zeta)`.
    Eval(MetricArgs),
    /// `A(zeta) = B^{-1/2}`, its columns and the eigenvalues of `B`.
    Frame(MetricArgs),
    /// `dA_zeta[u]` by the contour solver.
    Da {
        #[command(flatten)]
        args: MetricArgs,
        #[arg(long, allow_hyphen_values = true)]
        u: String,
    },
}

#[derive(Debug, Subcommand)]
enum CarlesonCmd {
    /// Measure from CSV (`z1_re, ..., zn_im, weight`).
    Measure {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        domain: DomainArg,
    },
    /// Smoothed Lelong current of a divisor file.
    Current {
        #[arg(long)]
        divisor: PathBuf,
        #[command(flatten)]
        domain: DomainArg,
        /// Drop the `d(z)` weight.
        #[arg(long)]
        unweighted: bool,
    },
}

#[derive(Debug, Subcommand)]
enum HomotopyCmd {
    /// `omega = H theta` for the localized current of a divisor, sampled on
    /// `directions x radii`.
    Solve {
        #[arg(long)]
        theta: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.85, 0.9, 0.95])]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 16)]
        directions: usize,
    },
}

#[derive(Debug, Subcommand)]
enum DbarCmd {
    /// `u` with `dbar u = omega` on boundary and interior probes.
    Solve {
        /// Only `known` (the bump-localized known primitive) is built in.
        #[arg(long, default_value = "known")]
        omega: String,
        /// Grid level; each level doubles every node count.
        #[arg(long, default_value_t = 0)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        boundary_points: usize,
    },
}

#[derive(Debug, Subcommand)]
enum PipelineCmd {
    /// Run every stage and write the report.
    Run {
        /// Divisor file `{"polynomial": "z1", "dimension": 2, ...}`.
        #[arg(long)]
        divisor: Option<PathBuf>,
        /// Domain file; only the ball in C^2 is supported.
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long)]
        level: Option<usize>,
    },
}

/// Contents of `--config`; every field is optional.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Option<DomainFile>,
    pub metric: Option<ModelChoice>,
    pub retract: RetractParams,
    pub kernel: Option<KernelParams>,
    pub carleson: CarlesonBudget,
    pub cells: CellBudget,
    pub pipeline: PipelineConfig,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(m) => Failure::Usage(m),
            Error::ZeroDirection => Failure::Usage(Error::ZeroDirection.to_string()),
            other => Failure::Numeric(other),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage<T>(msg: impl Into<String>) -> std::result::Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

struct Ctx<'a> {
    config: RunConfig,
    output_dir: Option<PathBuf>,
    report: Option<PathBuf>,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn output_path(&self, p: &Path) -> PathBuf {
        match &self.output_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn prepare(&self, p: &Path) -> std::result::Result<PathBuf, Failure> {
        let path = self.output_path(p);
        if let Some(parent) = path.parent().filter(|q| !q.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Failure::Numeric(e.into()))?;
        }
        Ok(path)
    }

    fn emit_json<T: Serialize>(&mut self, value: &T) -> Outcome {
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numeric(e.into()))?;
        match self.report.clone() {
            Some(p) => {
                let path = self.prepare(&p)?;
                std::fs::write(&path, text + "\n").map_err(|e| Failure::Numeric(e.into()))?;
                writeln!(self.out, "{}", path.display()).map_err(|e| Failure::Numeric(e.into()))
            }
            None => writeln!(self.out, "{text}").map_err(|e| Failure::Numeric(e.into())),
        }
    }

    fn line(&mut self, s: &str) -> Outcome {
        writeln!(self.out, "{s}").map_err(|e| Failure::Numeric(e.into()))
    }

    fn domain(&self, arg: &DomainArg, dim_hint: Option<usize>) -> std::result::Result<Domain, Failure> {
        match &arg.domain {
            Some(spec) => parse_domain(spec, dim_hint.unwrap_or(2)),
            None => match &self.config.domain {
                Some(f) => Ok(Domain::from_file(f)?),
                None => Ok(Domain::unit_ball(dim_hint.unwrap_or(2))),
            },
        }
    }

    fn metric(&self, choice: Option<ModelChoice>, domain: &Domain) -> std::result::Result<MetricModel, Failure> {
        let ball = domain.kind() == DomainKind::UnitBall;
        match choice.or(self.config.metric) {
            Some(ModelChoice::Ball) if !ball => usage("the exact model needs --domain ball"),
            Some(ModelChoice::Ball) => Ok(MetricModel::exact_ball(domain.dim())),
            Some(ModelChoice::Surrogate) => Ok(MetricModel::surrogate(domain.clone())),
            None if ball => Ok(MetricModel::exact_ball(domain.dim())),
            None => Ok(MetricModel::surrogate(domain.clone())),
        }
    }
}

fn parse_domain(spec: &str, dim: usize) -> std::result::Result<Domain, Failure> {
    if spec == "ball" {
        return Ok(Domain::unit_ball(dim));
    }
    if let Some(rest) = spec.strip_prefix("ellipsoid:") {
        let m: std::result::Result<Vec<u32>, _> = rest.split(',').map(|s| s.trim().parse::<u32>()).collect();
        return match m {
            Ok(m) => Ok(Domain::ellipsoid(&m)?),
            Err(_) => usage(format!("bad ellipsoid exponents `{rest}`")),
        };
    }
    let path = Path::new(spec);
    if !path.exists() {
        return usage(format!("unknown domain `{spec}` (expected ball, ellipsoid:m1,.. or a JSON file)"));
    }
    let f: DomainFile = read_json(path)?;
    Ok(Domain::from_file(&f)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn vector(s: &str, name: &str) -> std::result::Result<Vec<C64>, Failure> {
    num::parse_cvec(s).ok_or_else(|| Failure::Usage(format!("cannot parse --{name} `{s}` as comma-separated complex numbers")))
}

fn point_in(domain: &Domain, s: &str, name: &str) -> std::result::Result<Vec<C64>, Failure> {
    let z = vector(s, name)?;
    if z.len() != domain.dim() {
        return usage(format!("--{name} has {} components, the domain has dimension {}", z.len(), domain.dim()));
    }
    Ok(z)
}

/// Shortest decimal that agrees with `x` to 10 significant digits, the
/// accuracy of the `tau` bisection.
fn show(x: f64) -> String {
    format!("{:.9e}", x).parse::<f64>().unwrap_or(x).to_string()
}

fn geom(ctx: &mut Ctx, cmd: GeomCmd) -> Outcome {
    match cmd {
        GeomCmd::Tau { domain, z, v, eps } => {
            let hint = vector(&z, "z")?.len();
            let d = ctx.domain(&domain, Some(hint))?;
            let (z, v) = (point_in(&d, &z, "z")?, point_in(&d, &v, "v")?);
            let t = geometry::tau(&d, &z, &v, eps)?;
            ctx.line(&show(t))
        }
        GeomCmd::Basis { domain, z, eps, csv } => {
            let hint = vector(&z, "z")?.len();
            let d = ctx.domain(&domain, Some(hint))?;
            let z = point_in(&d, &z, "z")?;
            let frame = geometry::extremal_basis(&d, &z, eps)?;
            if let Some(p) = csv {
                let path = ctx.prepare(&p)?;
                let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::Numeric(e.into()))?;
                w.write_record(geometry::frame_csv_header(d.dim())).map_err(|e| Failure::Numeric(e.into()))?;
                for row in geometry::frame_csv_rows(&frame) {
                    w.write_record(row).map_err(|e| Failure::Numeric(e.into()))?;
                }
                w.flush().map_err(|e| Failure::Numeric(e.into()))?;
            }
            ctx.emit_json(&frame)
        }
        GeomCmd::Delta { domain, z, zeta } => {
            let hint = vector(&z, "z")?.len();
            let d = ctx.domain(&domain, Some(hint))?;
            let (z, zeta) = (point_in(&d, &z, "z")?, point_in(&d, &zeta, "zeta")?);
            let v = geometry::pseudodistance(&d, &z, &zeta)?;
            ctx.line(&show(v))
        }
        GeomCmd::Order { domain, z, v } => {
            let hint = vector(&z, "z")?.len();
            let d = ctx.domain(&domain, Some(hint))?;
            let (z, v) = (point_in(&d, &z, "z")?, point_in(&d, &v, "v")?);
            let m = geometry::contact_order_estimate(&d, &z, &v)?;
            ctx.line(&show(m))
        }
    }
}

fn matrix_cmd(ctx: &mut Ctx, cmd: MatrixCmd) -> Outcome {
    let MatrixCmd::Sylvester { method, m, c, scale } = cmd;
    let m: JsonMatrix = read_json(&m)?;
    let c: JsonMatrix = read_json(&c)?;
    let m = HermitianPd::new(matrix::matrix_from_json(&m)?)?;
    let c = matrix::matrix_from_json(&c)?;
    if c.nrows() != m.dim() || c.ncols() != m.dim() {
        return usage("M and C must have the same size");
    }
    let h = match method {
        SylvesterMethod::Direct => matrix::sylvester_direct(&m, &c),
        SylvesterMethod::Contour => matrix::sylvester_contour(&m, &c, &ContourSpec::relative(&m, scale)?)?,
    };
    ctx.emit_json(&matrix::matrix_to_json(&h))
}

fn metric_cmd(ctx: &mut Ctx, cmd: MetricCmd) -> Outcome {
    let args = match &cmd {
        MetricCmd::Eval(a) | MetricCmd::Frame(a) => a.clone(),
        MetricCmd::Da { args, .. } => args.clone(),
    };
    let hint = vector(&args.z, "z")?.len();
    let d = ctx.domain(&args.domain, Some(hint))?;
    let model = ctx.metric(args.model, &d)?;
    let z = point_in(&d, &args.z, "z")?;
    match cmd {
        MetricCmd::Eval(_) => {
            let b = model.bergman_matrix(&z)?;
            ctx.emit_json(&matrix::matrix_to_json(b.matrix()))
        }
        MetricCmd::Frame(_) => {
            let f = model.frame(&z)?;
            ctx.emit_json(&f)
        }
        MetricCmd::Da { u, .. } => {
            let u = point_in(&d, &u, "u")?;
            let da = model.da(&z, &u)?;
            ctx.emit_json(&matrix::matrix_to_json(&da))
        }
    }
}

fn load_divisor(path: &Path) -> std::result::Result<DivisorModel, Failure> {
    let f: forms::DivisorFile = read_json(path)?;
    Ok(DivisorModel::from_file(&f)?)
}

fn carleson_cmd(ctx: &mut Ctx, cmd: CarlesonCmd) -> Outcome {
    let budget = ctx.config.carleson.clone();
    match cmd {
        CarlesonCmd::Measure { input, domain } => {
            let mu = DiscreteMeasure::read_csv(&input).map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?;
            let hint = mu.points.first().map(|p| p.len());
            let d = ctx.domain(&domain, hint)?;
            if mu.points.iter().any(|p| p.len() != d.dim()) {
                return usage("measure points do not match the domain dimension");
            }
            let r = forms::carleson_norm_measure(&mu, &d, &budget)?;
            ctx.emit_json(&r)
        }
        CarlesonCmd::Current { divisor, domain, unweighted } => {
            let div = load_divisor(&divisor)?;
            let d = ctx.domain(&domain, Some(div.dim()))?;
            if d.dim() != div.dim() {
                return usage("divisor and domain dimensions differ");
            }
            let metric = ctx.metric(None, &d)?;
            let theta = forms::lelong_smoothed(&div);
            let r = forms::carleson_norm_current(&theta, &d, &metric, !unweighted, &budget, &ctx.config.cells)
                .map_err(|e| e.in_stage("carleson"))?;
            ctx.emit_json(&r)
        }
    }
}

fn complex_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).flat_map(|j| [format!("{prefix}{j}_re"), format!("{prefix}{j}_im")]).collect()
}

fn complex_cells(v: &[C64]) -> Vec<String> {
    v.iter().flat_map(|x| [x.re.to_string(), x.im.to_string()]).collect()
}

fn homotopy_cmd(ctx: &mut Ctx, cmd: HomotopyCmd) -> Outcome {
    let HomotopyCmd::Solve { theta, out, radii, directions } = cmd;
    let div = load_divisor(&theta)?;
    let d = ctx.domain(&DomainArg { domain: None }, Some(div.dim()))?;
    if d.dim() != div.dim() {
        return usage("divisor and domain dimensions differ");
    }
    if radii.iter().any(|r| !(*r > 0.0 && *r < 1.0)) || directions == 0 {
        return usage("radii must lie in (0, 1) and directions must be positive");
    }
    let params = ctx.config.retract.clone();
    let field = Arc::new(LocalizedLelong::new(&div, &d, params.eps0));
    let metric = ctx.metric(None, &d)?;
    let h = Homotopy::new(params, metric, field).map_err(|e| e.in_stage("homotopy"))?;
    let n = d.dim();
    let path = ctx.prepare(&out)?;
    let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::Numeric(e.into()))?;
    let mut header = complex_header("z", n);
    header.extend(complex_header("a", n));
    w.write_record(&header).map_err(|e| Failure::Numeric(e.into()))?;
    let seed = ctx.config.seed.unwrap_or(1) as u32;
    let mut rows = 0usize;
    for dir in num::sphere_points(directions, n, seed) {
        for &r in &radii {
            // gauge ray so every point sits at the same gauge level
            let p = d.gauge(&dir)?;
            let z = num::scale_re(&dir, r / p);
            let a = h.omega(&z).map_err(|e| e.in_stage("homotopy"))?;
            let mut row = complex_cells(&z);
            row.extend(complex_cells(&a));
            w.write_record(&row).map_err(|e| Failure::Numeric(e.into()))?;
            rows += 1;
        }
    }
    w.flush().map_err(|e| Failure::Numeric(e.into()))?;
    ctx.emit_json(&serde_json::json!({ "out": path, "rows": rows, "eps0": h.params.eps0 }))
}

fn dbar_cmd(ctx: &mut Ctx, cmd: DbarCmd) -> Outcome {
    let DbarCmd::Solve { omega, grid, out, boundary_points } = cmd;
    if omega != "known" {
        return usage(format!("unknown --omega `{omega}` (only `known` is built in)"));
    }
    if grid > 3 {
        return usage("--grid must be at most 3");
    }
    let d = Domain::unit_ball(2);
    let mut params = ctx.config.kernel.clone().unwrap_or_else(|| KernelParams::calibrated(2));
    for _ in 0..grid {
        params = params.refined();
    }
    let support = support_linear(&d);
    let form = KnownPrimitive { dim: 2 };
    let path = ctx.prepare(&out)?;
    let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::Numeric(e.into()))?;
    let mut header = vec!["set".to_string()];
    header.extend(complex_header("z", 2));
    header.extend(["u_re", "u_im"].map(String::from));
    w.write_record(&header).map_err(|e| Failure::Numeric(e.into()))?;
    let boundary = BoundaryGrid::sobol(&d, boundary_points, ctx.config.seed.unwrap_or(1) as u32)?;
    let sets = [("boundary", boundary.points), ("interior", dbar::residual_probes(2))];
    for (name, pts) in sets {
        for z in pts {
            let u = dbar::solve_dbar(&params, &support, &form, &z).map_err(|e| e.in_stage("dbar"))?;
            let mut row = vec![name.to_string()];
            row.extend(complex_cells(&z));
            row.extend([u.re.to_string(), u.im.to_string()]);
            w.write_record(&row).map_err(|e| Failure::Numeric(e.into()))?;
        }
    }
    w.flush().map_err(|e| Failure::Numeric(e.into()))?;
    let residual = dbar::known_primitive_residual(&params, &support).map_err(|e| e.in_stage("dbar"))?;
    ctx.emit_json(&serde_json::json!({ "out": path, "grid": params, "residual": residual }))
}

fn pipeline_cmd(ctx: &mut Ctx, cmd: PipelineCmd) -> Outcome {
    let PipelineCmd::Run { divisor, domain, level } = cmd;
    let mut config = ctx.config.pipeline.clone();
    if let Some(p) = divisor {
        let f: forms::DivisorFile = read_json(&p)?;
        if f.dimension != 2 {
            return Err(Failure::Numeric(Error::Unsupported("the pipeline runs in dimension 2".into()).in_stage("divisor")));
        }
        config.polynomial = f.polynomial;
        config.weight = f.weight;
        config.s = f.s;
    }
    let dom = match domain {
        Some(p) => Some(read_json::<DomainFile>(&p)?),
        None => ctx.config.domain.clone(),
    };
    if let Some(f) = dom {
        if f.kind != DomainKind::UnitBall || f.dimension != 2 {
            return Err(Failure::Numeric(Error::Unsupported("the pipeline runs on the unit ball in C^2".into()).in_stage("domain")));
        }
    }
    if let Some(l) = level {
        config.level = l;
    }
    if let Some(s) = ctx.config.seed {
        config.seed = s;
    }
    let dir = ctx.output_dir.clone();
    let report = pipeline::run(&config, dir.as_deref())?;
    ctx.emit_json(&report)
}

fn selftest_cmd(ctx: &mut Ctx, fast: bool) -> Outcome {
    let checks = selftest::run(fast);
    ctx.line(selftest::table(&checks).trim_end())?;
    if ctx.report.is_some() {
        ctx.emit_json(&checks)?;
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::Numeric(Error::Evaluation(format!(
            "{} of {} checks failed",
            checks.iter().filter(|c| !c.passed).count(),
            checks.len()
        ))))
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let config = match &cli.config {
        Some(p) => match read_json::<RunConfig>(p) {
            Ok(c) => c,
            Err(f) => return report_failure(f, err),
        },
        None => RunConfig::default(),
    };
    let output_dir = cli.output_dir.clone().or_else(|| config.output_dir.clone());
    let mut ctx = Ctx { config, output_dir, report: cli.report.clone(), out };
    let res = match cli.command {
        Command::Geom(c) => geom(&mut ctx, c),
        Command::Matrix(c) => matrix_cmd(&mut ctx, c),
        Command::Metric(c) => metric_cmd(&mut ctx, c),
        Command::Carleson(c) => carleson_cmd(&mut ctx, c),
        Command::Homotopy(c) => homotopy_cmd(&mut ctx, c),
        Command::Dbar(c) => dbar_cmd(&mut ctx, c),
        Command::Pipeline(c) => pipeline_cmd(&mut ctx, c),
        Command::Selftest { fast } => selftest_cmd(&mut ctx, fast),
    };
    match res {
        Ok(()) => 0,
        Err(f) => report_failure(f, err),
    }
}

fn report_failure(f: Failure, err: &mut dyn Write) -> i32 {
    match f {
        Failure::Usage(m) => {
            let _ = writeln!(err, "error: {m}\n\nFor more information, try '--help'.");
            2
        }
        Failure::Numeric(e) => {
            let _ = writeln!(err, "error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                let _ = writeln!(err, "  caused by: {s}");
                src = s.source();
            }
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = dispatch(std::iter::once("zerosets").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn tau_prints_one_half() {
        let (code, out, _) = run(&["geom", "tau", "--domain", "ball", "--z", "0,0", "--v", "1,0", "--eps", "0.25"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "0.5");
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(&["geom", "tau", "--bogus"]).0, 2);
        assert_eq!(run(&["nosuch"]).0, 2);
        assert_eq!(run(&["geom", "tau", "--domain", "ball", "--z", "x", "--v", "1,0", "--eps", "0.1"]).0, 2);
        assert_eq!(run(&["geom", "tau", "--domain", "torus", "--z", "0,0", "--v", "1,0", "--eps", "0.1"]).0, 2);
    }

    #[test]
    fn numerical_failures_exit_one() {
        let (code, _, err) = run(&["metric", "eval", "--domain", "ball", "--z", "2,0"]);
        assert_eq!(code, 1, "{err}");
        assert!(err.contains("outside"));
    }

    #[test]
    fn show_rounds_to_ten_digits() {
        assert_eq!(show(0.499999999998), "0.5");
        assert_eq!(show(0.123456789012), "0.123456789");
        assert_eq!(show(0.1), "0.1");
    }
}
