//! Command-line driver: solve, invert, nrep, example and verify
//! workflows with deterministic JSON/CSV/SVG artifacts.
//!
//! Exit codes: 0 success, 2 validation or configuration failure,
//! 3 non-convergence. With a fixed seed the emitted JSON is
//! byte-identical between runs (floats are written with 17 significant
//! digits and object fields keep a fixed order).

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{Space, TorusFunction, OVERSAMPLE};
use crate::groundstate::{self, SolveOptions};
use crate::inversion::{self, InitialGuess, InversionOptions};
use crate::io::{self, Json};
use crate::manybody::{Interaction, ModelSpec, Spin};
use crate::nrep;
use crate::spaces::{self, DensityField, PotentialClass};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "vrep",
    about = "Few-fermion ground states, N-representability witnesses and \
             density-to-potential inversion on the unit torus",
    version
)]
struct Cli {
    /// Key-value configuration file (`key = value` lines, long option
    /// names as keys). Explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// RNG seed for sampling-based checks.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for block-parallel sections (deterministic output
    /// regardless of the count).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Also emit SVG line plots next to the CSV profiles.
    #[arg(long, global = true)]
    svg: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpinArg {
    Spinless,
    Spinful,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PotentialKind {
    Zero,
    Delta,
    Cos,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InteractionKind {
    None,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Auto,
    Zero,
    Analytic,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Particle count N.
    #[arg(long = "n")]
    n_particles: Option<usize>,

    /// One-particle momentum cutoff K.
    #[arg(long)]
    cutoff: Option<usize>,

    #[arg(long, value_enum)]
    spin: Option<SpinArg>,

    #[arg(long, value_enum)]
    interaction: Option<InteractionKind>,

    /// Contact-interaction strength for --interaction delta.
    #[arg(long)]
    w_gamma: Option<f64>,
}

#[derive(Debug, Args)]
struct PotentialArgs {
    #[arg(long, value_enum)]
    potential: Option<PotentialKind>,

    /// Strength of the delta potential.
    #[arg(long)]
    gamma: Option<f64>,

    /// Amplitude of the cosine potential.
    #[arg(long)]
    amplitude: Option<f64>,

    /// Mode of the cosine potential.
    #[arg(long)]
    mode: Option<i64>,

    /// Potential file (schema JSON) for --potential file.
    #[arg(long)]
    potential_file: Option<PathBuf>,

    /// Cutoff of the constructed potential (default 2K).
    #[arg(long)]
    potential_cutoff: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ground state of H = -Δ/2 + W + V.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        potential: PotentialArgs,
        /// Run the cutoff-convergence scan (K, K+4, ...) and report it.
        #[arg(long)]
        check_convergence: bool,
        /// Artifact name prefix.
        #[arg(long)]
        prefix: Option<String>,
    },
    /// Density-to-potential inversion by Lieb maximization.
    Invert {
        /// Density file (schema JSON), or `-` for stdin.
        #[arg(long)]
        density: String,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        tol_rho: Option<f64>,
        #[arg(long)]
        tol_cert: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long, value_enum)]
        init: Option<InitArg>,
        /// Optional proximal damping -(μ/2)‖v‖²_{H⁻¹} in the ascent.
        #[arg(long)]
        proximal_mu: Option<f64>,
        /// Cutoff of the optimized potential (default 2K).
        #[arg(long)]
        potential_cutoff: Option<usize>,
        #[arg(long)]
        prefix: Option<String>,
    },
    /// Determinant witness with prescribed density.
    Nrep {
        /// Density file (schema JSON), or `-` for stdin.
        #[arg(long)]
        density: String,
        #[arg(long)]
        prefix: Option<String>,
    },
    /// Emit example densities and potentials (schema JSON).
    Example {
        #[command(subcommand)]
        which: ExampleCommand,
    },
    /// Sampled-state verification workflows.
    Verify {
        #[command(subcommand)]
        which: VerifyCommand,
    },
}

#[derive(Debug, Subcommand)]
enum ExampleCommand {
    /// Squared-cusp density (a + b·d(x)^{α+1/2})², normalized to N.
    Englisch {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "n")]
        n_particles: Option<usize>,
        #[arg(long)]
        cutoff: Option<usize>,
        /// Output path, or `-` for stdout (default).
        #[arg(long)]
        out: Option<String>,
    },
    /// Density 1 + amplitude·cos(2π·mode·x), normalized to N.
    Cosine {
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        mode: Option<usize>,
        #[arg(long = "n")]
        n_particles: Option<usize>,
        #[arg(long)]
        cutoff: Option<usize>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Constant density N.
    Constant {
        #[arg(long = "n")]
        n_particles: Option<usize>,
        #[arg(long)]
        cutoff: Option<usize>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Truncated delta-comb potential of strength γ.
    Delta {
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        cutoff: Option<usize>,
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum VerifyCommand {
    /// KLMN pair (ε, b_ε) for a potential, validated on sampled states.
    KineticBounds {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        potential: PotentialArgs,
        /// Comma-separated ε values.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        prefix: Option<String>,
    },
    /// Shifted-coercivity bounds with estimated (a, b).
    Coercivity {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        prefix: Option<String>,
    },
    /// ‖f‖_∞ ≤ C_emb ‖f‖_{H¹} on random band-limited functions.
    Embedding {
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        prefix: Option<String>,
    },
}

/// Flat key=value configuration file; `#` starts a comment.
#[derive(Debug, Default, Clone)]
struct ConfigFile {
    entries: std::collections::BTreeMap<String, String>,
}

impl ConfigFile {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut entries = std::collections::BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!(
                    "config line {} is not `key = value`: {raw:?}",
                    lineno + 1
                ))
            })?;
            entries.insert(
                key.trim().replace('_', "-"),
                value.trim().to_string(),
            );
        }
        Ok(ConfigFile { entries })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::parameter(key, format!("cannot parse config value {raw:?}"))
            }),
        }
    }
}

/// Resolve flag → config → default, flags first.
macro_rules! resolve {
    ($flag:expr, $cfg:expr, $key:literal, $default:expr) => {
        match $flag {
            Some(v) => v,
            None => $cfg.get($key)?.unwrap_or($default),
        }
    };
}

struct Ctx {
    cfg: ConfigFile,
    out_dir: PathBuf,
    seed: u64,
    svg: bool,
}

impl Ctx {
    fn artifact(&self, prefix: &str, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{prefix}{suffix}"))
    }

    fn write_json(&self, prefix: &str, doc: &Json) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)?;
        let path = self.artifact(prefix, ".json");
        fs::write(&path, doc.to_string_pretty_enough())?;
        Ok(path)
    }
}

pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own exit semantics: usage errors are validation
            // failures, --help/--version are success.
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::EigensolverFailure(_) => EXIT_NONCONVERGENCE,
                _ => EXIT_VALIDATION,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let out_dir = match cli.out_dir {
        Some(d) => d,
        None => cfg
            .get::<PathBuf>("out-dir")?
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let seed = resolve!(cli.seed, cfg, "seed", 0u64);
    if let Some(workers) = cli.workers.or(cfg.get("workers")?) {
        if workers == 0 {
            return Err(Error::parameter("workers", "must be positive"));
        }
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let ctx = Ctx {
        out_dir,
        seed,
        svg: cli.svg,
        cfg,
    };

    match cli.command {
        Command::Solve {
            model,
            potential,
            check_convergence,
            prefix,
        } => cmd_solve(&ctx, model, potential, check_convergence, prefix),
        Command::Invert {
            density,
            model,
            tol_rho,
            tol_cert,
            max_iter,
            init,
            proximal_mu,
            potential_cutoff,
            prefix,
        } => cmd_invert(
            &ctx,
            density,
            model,
            tol_rho,
            tol_cert,
            max_iter,
            init,
            proximal_mu,
            potential_cutoff,
            prefix,
        ),
        Command::Nrep { density, prefix } => cmd_nrep(&ctx, density, prefix),
        Command::Example { which } => cmd_example(&ctx, which),
        Command::Verify { which } => cmd_verify(&ctx, which),
    }
}

fn build_spec(ctx: &Ctx, model: &ModelArgs) -> Result<ModelSpec> {
    let n = resolve!(model.n_particles, ctx.cfg, "n", 1usize);
    let cutoff = resolve!(model.cutoff, ctx.cfg, "cutoff", 8usize);
    if n == 0 {
        return Err(Error::parameter("n", "particle count must be positive"));
    }
    let spin = match model.spin {
        Some(SpinArg::Spinful) => Spin::Spinful,
        Some(SpinArg::Spinless) => Spin::Spinless,
        None => match ctx.cfg.get::<String>("spin")?.as_deref() {
            Some("spinful") => Spin::Spinful,
            Some("spinless") | None => Spin::Spinless,
            Some(other) => {
                return Err(Error::parameter("spin", format!("unknown value {other:?}")))
            }
        },
    };
    let interaction = match model.interaction.unwrap_or(InteractionKind::None) {
        InteractionKind::None => Interaction::None,
        InteractionKind::Delta => {
            let gamma = resolve!(model.w_gamma, ctx.cfg, "w-gamma", 1.0f64);
            Interaction::Delta { gamma }
        }
    };
    Ok(ModelSpec::new(n, cutoff, spin, interaction))
}

fn build_potential(ctx: &Ctx, spec: &ModelSpec, args: &PotentialArgs) -> Result<PotentialClass> {
    let default_cutoff = 2 * spec.cutoff;
    let cutoff = resolve!(args.potential_cutoff, ctx.cfg, "potential-cutoff", default_cutoff);
    match args.potential.unwrap_or(PotentialKind::Zero) {
        PotentialKind::Zero => Ok(PotentialClass::zero(cutoff.max(1))),
        PotentialKind::Delta => {
            let gamma = resolve!(args.gamma, ctx.cfg, "gamma", 1.0f64);
            PotentialClass::delta(gamma, cutoff.max(1))
        }
        PotentialKind::Cos => {
            let amplitude = resolve!(args.amplitude, ctx.cfg, "amplitude", 1.0f64);
            let mode = resolve!(args.mode, ctx.cfg, "mode", 1i64);
            if mode == 0 || mode.unsigned_abs() as usize > cutoff {
                return Err(Error::parameter(
                    "mode",
                    format!("must satisfy 1 ≤ |mode| ≤ potential cutoff {cutoff}"),
                ));
            }
            let mut coeffs = vec![Complex64::default(); 2 * cutoff + 1];
            coeffs[(cutoff as i64 + mode) as usize] = Complex64::new(amplitude / 2.0, 0.0);
            coeffs[(cutoff as i64 - mode) as usize] = Complex64::new(amplitude / 2.0, 0.0);
            Ok(PotentialClass::from_coeffs(coeffs))
        }
        PotentialKind::File => {
            let path = args
                .potential_file
                .as_ref()
                .ok_or_else(|| Error::parameter("potential-file", "required for --potential file"))?;
            io::read_potential(&fs::read_to_string(path)?)
        }
    }
}

fn read_density_arg(arg: &str) -> Result<DensityField> {
    let text = if arg == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        buf
    } else {
        fs::read_to_string(arg)?
    };
    io::read_density(&text)
}

fn spec_json(spec: &ModelSpec) -> Json {
    let interaction = match &spec.interaction {
        Interaction::None => Json::obj().field("type", Json::Str("none".into())),
        Interaction::Delta { gamma } => Json::obj()
            .field("type", Json::Str("delta".into()))
            .field("gamma", Json::Num(*gamma)),
        Interaction::Multiplicative { .. } => {
            Json::obj().field("type", Json::Str("multiplicative".into()))
        }
        Interaction::GradientPair { .. } => {
            Json::obj().field("type", Json::Str("gradient-pair".into()))
        }
    };
    Json::obj()
        .field("n_particles", Json::Int(spec.n_particles as i64))
        .field("cutoff", Json::Int(spec.cutoff as i64))
        .field(
            "spin",
            Json::Str(
                match spec.spin {
                    Spin::Spinless => "spinless",
                    Spin::Spinful => "spinful",
                }
                .into(),
            ),
        )
        .field("interaction", interaction)
}

fn header(command: &str, ctx: &Ctx) -> Json {
    Json::obj()
        .field("schema", Json::Str(io::SCHEMA.into()))
        .field("command", Json::Str(command.into()))
        .field("seed", Json::Int(ctx.seed as i64))
        .field("oversample", Json::Int(OVERSAMPLE as i64))
}

fn warnings_json(warnings: &[String]) -> Json {
    Json::Arr(warnings.iter().map(|w| Json::Str(w.clone())).collect())
}

fn profile_grid(fs: &[&TorusFunction]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = fs.iter().map(|f| f.grid_len()).max().unwrap_or(64);
    let xs: Vec<f64> = (0..m).map(|i| i as f64 / m as f64).collect();
    let cols = fs
        .iter()
        .map(|f| f.synthesize(m).iter().map(|c| c.re).collect())
        .collect();
    (xs, cols)
}

fn cmd_solve(
    ctx: &Ctx,
    model: ModelArgs,
    potential: PotentialArgs,
    check_convergence: bool,
    prefix: Option<String>,
) -> Result<i32> {
    let spec = build_spec(ctx, &model)?;
    let v = build_potential(ctx, &spec, &potential)?;
    let prefix = prefix.unwrap_or_else(|| "solve".to_string());
    let result = groundstate::solve(&spec, &v, &SolveOptions::default())?;

    let mut doc = header("solve", ctx)
        .field("spec", spec_json(&spec))
        .field(
            "potential",
            Json::obj()
                .field("cutoff", Json::Int(v.cutoff() as i64))
                .field("l2_norm", Json::Num(v.norm(Space::L2)))
                .field("hminus1_norm", Json::Num(v.norm(Space::HMinus1))),
        )
        .field("energy", Json::Num(result.energy))
        .field("degeneracy", Json::Int(result.degeneracy() as i64))
        .field(
            "gap",
            result.gap.map_or(Json::Null, Json::Num),
        )
        .field(
            "densities_eta",
            Json::floats(result.densities.iter().map(|d| d.eta())),
        )
        .field(
            "diagnostics",
            Json::obj()
                .field("blocks_total", Json::Int(result.diagnostics.blocks_total as i64))
                .field("blocks_solved", Json::Int(result.diagnostics.blocks_solved as i64))
                .field("blocks_pruned", Json::Int(result.diagnostics.blocks_pruned as i64))
                .field("max_residual", Json::Num(result.diagnostics.max_residual))
                .field("dense_blocks", Json::Int(result.diagnostics.dense_blocks as i64))
                .field(
                    "iterative_blocks",
                    Json::Int(result.diagnostics.iterative_blocks as i64),
                ),
        )
        .field("warnings", warnings_json(&result.diagnostics.warnings));

    if check_convergence {
        let scan = groundstate::cutoff_scan(&spec, &v, 4, 1e-7, spec.cutoff + 24)?;
        doc = doc.field(
            "cutoff_scan",
            Json::obj()
                .field("converged", Json::Bool(scan.converged))
                .field(
                    "energies",
                    Json::Arr(
                        scan.energies
                            .iter()
                            .map(|(k, e)| {
                                Json::obj()
                                    .field("cutoff", Json::Int(*k as i64))
                                    .field("energy", Json::Num(*e))
                            })
                            .collect(),
                    ),
                ),
        );
    }
    let json_path = ctx.write_json(&prefix, &doc)?;

    // Ground density and potential profiles.
    if let Some(rho) = result.densities.first() {
        let (xs, cols) = profile_grid(&[rho.profile(), &v.as_function()]);
        let csv_path = ctx.artifact(&prefix, "_profile.csv");
        let mut f = fs::File::create(&csv_path)?;
        io::write_csv(&mut f, &["x", "rho", "v"], &[xs.clone(), cols[0].clone(), cols[1].clone()])?;
        if ctx.svg {
            let mut f = fs::File::create(ctx.artifact(&prefix, "_profile.svg"))?;
            io::write_svg(
                &mut f,
                "ground density and potential",
                &[("rho", &xs, &cols[0]), ("v", &xs, &cols[1])],
            )?;
        }
    }
    println!("E0 = {:.12e}  (degeneracy {})", result.energy, result.degeneracy());
    println!("wrote {}", json_path.display());
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_invert(
    ctx: &Ctx,
    density: String,
    model: ModelArgs,
    tol_rho: Option<f64>,
    tol_cert: Option<f64>,
    max_iter: Option<usize>,
    init: Option<InitArg>,
    proximal_mu: Option<f64>,
    potential_cutoff: Option<usize>,
    prefix: Option<String>,
) -> Result<i32> {
    let rho = read_density_arg(&density)?;
    let n = model.n_particles.unwrap_or(rho.n_particles());
    if n != rho.n_particles() {
        return Err(Error::parameter(
            "n",
            format!(
                "flag value {n} disagrees with the density file ({} particles)",
                rho.n_particles()
            ),
        ));
    }
    let cutoff = resolve!(model.cutoff, ctx.cfg, "cutoff", rho.cutoff());
    let spec = build_spec(
        ctx,
        &ModelArgs {
            n_particles: Some(n),
            cutoff: Some(cutoff),
            ..model
        },
    )?;
    let tol_rho = resolve!(tol_rho, ctx.cfg, "tol-rho", 1e-5f64);
    let tol_cert = resolve!(tol_cert, ctx.cfg, "tol-cert", 1e-5f64);
    let max_iter = resolve!(max_iter, ctx.cfg, "max-iter", 500usize);
    if tol_rho <= 0.0 || tol_cert <= 0.0 {
        return Err(Error::parameter("tol-rho/tol-cert", "tolerances must be positive"));
    }
    let opts = InversionOptions {
        tol_rho,
        tol_cert,
        max_iter,
        potential_cutoff,
        init: match init.unwrap_or(InitArg::Auto) {
            InitArg::Auto => InitialGuess::Auto,
            InitArg::Zero => InitialGuess::Zero,
            InitArg::Analytic => InitialGuess::Analytic,
        },
        proximal_mu,
        ..Default::default()
    };
    let prefix = prefix.unwrap_or_else(|| "invert".to_string());
    let result = inversion::lieb_maximize(&rho, &spec, &opts)?;

    let doc = header("invert", ctx)
        .field("spec", spec_json(&spec))
        .field(
            "options",
            Json::obj()
                .field("tol_rho", Json::Num(tol_rho))
                .field("tol_cert", Json::Num(tol_cert))
                .field("max_iter", Json::Int(max_iter as i64))
                .field(
                    "proximal_mu",
                    result.proximal_mu.map_or(Json::Null, Json::Num),
                ),
        )
        .field("converged", Json::Bool(result.converged))
        .field("iterations", Json::Int(result.iterations as i64))
        .field("mismatch", Json::Num(result.mismatch))
        .field("dual_value", Json::Num(result.dual_value))
        .field("primal_value", Json::Num(result.primal_value))
        .field("gap", Json::Num(result.gap))
        .field("degeneracy", Json::Int(result.degeneracy as i64))
        .field("weights", Json::floats(result.weights.iter().copied()))
        .field(
            "potential",
            Json::obj()
                .field("cutoff", Json::Int(result.potential.cutoff() as i64))
                .field("l2_norm", Json::Num(result.potential.norm(Space::L2)))
                .field(
                    "hminus1_norm",
                    Json::Num(result.potential.norm(Space::HMinus1)),
                ),
        )
        .field("warnings", warnings_json(&result.warnings));
    let json_path = ctx.write_json(&prefix, &doc)?;

    let mut f = fs::File::create(ctx.artifact(&prefix, "_potential.json"))?;
    io::write_potential(&mut f, &result.potential)?;

    let trace_path = ctx.artifact(&prefix, "_trace.csv");
    let mut f = fs::File::create(&trace_path)?;
    io::write_csv(
        &mut f,
        &["iter", "G", "mismatch", "step"],
        &[
            result.trace.iter().map(|t| t.iter as f64).collect(),
            result.trace.iter().map(|t| t.g_value).collect(),
            result.trace.iter().map(|t| t.mismatch).collect(),
            result.trace.iter().map(|t| t.step).collect(),
        ],
    )?;

    let v_fun = result.potential.as_function();
    let (xs, cols) = profile_grid(&[rho.profile(), &v_fun]);
    let mut f = fs::File::create(ctx.artifact(&prefix, "_profile.csv"))?;
    io::write_csv(
        &mut f,
        &["x", "rho", "v"],
        &[xs.clone(), cols[0].clone(), cols[1].clone()],
    )?;
    if ctx.svg {
        let mut f = fs::File::create(ctx.artifact(&prefix, "_profile.svg"))?;
        io::write_svg(
            &mut f,
            "target density and representing potential",
            &[("rho", &xs, &cols[0]), ("v", &xs, &cols[1])],
        )?;
    }

    println!(
        "mismatch = {:.3e}, bracket [D, P] = [{:.9e}, {:.9e}], gap = {:.3e}",
        result.mismatch, result.dual_value, result.primal_value, result.gap
    );
    println!("wrote {}", json_path.display());
    Ok(if result.converged {
        EXIT_OK
    } else {
        EXIT_NONCONVERGENCE
    })
}

fn cmd_nrep(ctx: &Ctx, density: String, prefix: Option<String>) -> Result<i32> {
    let rho = read_density_arg(&density)?;
    let prefix = prefix.unwrap_or_else(|| "nrep".to_string());
    let construction = nrep::construct(&rho)?;
    let (c1, c2) = construction.bound_constants;

    let doc = header("nrep", ctx)
        .field("n_particles", Json::Int(rho.n_particles() as i64))
        .field("cutoff", Json::Int(rho.cutoff() as i64))
        .field("kinetic_energy", Json::Num(construction.kinetic_energy))
        .field("vw_integral", Json::Num(construction.vw_integral))
        .field(
            "bound",
            Json::obj()
                .field("c1", Json::Num(c1))
                .field("c2", Json::Num(c2))
                .field("value", Json::Num(c1 + c2 * construction.vw_integral))
                .field("holds", Json::Bool(construction.bound_holds())),
        )
        .field(
            "reconstruction_error",
            Json::Num(construction.reconstruction_error),
        )
        .field(
            "orthonormality_error",
            Json::Num(construction.orthonormality_error),
        );
    let json_path = ctx.write_json(&prefix, &doc)?;

    // CSV: x, input, reconstruction, |φ_k| columns.
    let m = construction.orbitals[0].len();
    let xs: Vec<f64> = (0..m).map(|i| i as f64 / m as f64).collect();
    let rho_in: Vec<f64> = rho.profile().samples().iter().map(|c| c.re).collect();
    let mut headers = vec!["x".to_string(), "rho_in".to_string(), "rho_reconstructed".to_string()];
    let mut columns = vec![xs, rho_in, construction.reconstructed.clone()];
    for (k, orbital) in construction.orbitals.iter().enumerate() {
        headers.push(format!("abs_phi_{k}"));
        columns.push(orbital.iter().map(|c| c.norm()).collect());
    }
    let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
    let mut f = fs::File::create(ctx.artifact(&prefix, "_orbitals.csv"))?;
    io::write_csv(&mut f, &header_refs, &columns)?;
    if ctx.svg {
        let series: Vec<(&str, &[f64], &[f64])> = headers[1..]
            .iter()
            .zip(&columns[1..])
            .map(|(h, c)| (h.as_str(), columns[0].as_slice(), c.as_slice()))
            .collect();
        let mut f = fs::File::create(ctx.artifact(&prefix, "_orbitals.svg"))?;
        io::write_svg(&mut f, "witness orbitals", &series)?;
    }

    println!(
        "T = {:.9e} ≤ {:.9e} = C1 + C2·A  ({})",
        construction.kinetic_energy,
        c1 + c2 * construction.vw_integral,
        if construction.bound_holds() { "ok" } else { "VIOLATED" }
    );
    println!("wrote {}", json_path.display());
    Ok(EXIT_OK)
}

fn write_example(out: Option<String>, doc: Json) -> Result<i32> {
    let text = doc.to_string_pretty_enough();
    match out.as_deref() {
        None | Some("-") => {
            print!("{text}");
        }
        Some(path) => fs::write(path, text)?,
    }
    Ok(EXIT_OK)
}

fn cmd_example(ctx: &Ctx, which: ExampleCommand) -> Result<i32> {
    match which {
        ExampleCommand::Englisch {
            a,
            b,
            alpha,
            n_particles,
            cutoff,
            out,
        } => {
            let a = resolve!(a, ctx.cfg, "a", 1.0f64);
            let b = resolve!(b, ctx.cfg, "b", 0.5f64);
            let alpha = resolve!(alpha, ctx.cfg, "alpha", 0.25f64);
            let n = resolve!(n_particles, ctx.cfg, "n", 1usize);
            let cutoff = resolve!(cutoff, ctx.cfg, "cutoff", 32usize);
            let rho = spaces::englisch_density(a, b, alpha, n, cutoff)?;
            write_example(out, io::density_to_json(&rho))
        }
        ExampleCommand::Cosine {
            amplitude,
            mode,
            n_particles,
            cutoff,
            out,
        } => {
            let amplitude = resolve!(amplitude, ctx.cfg, "amplitude", 0.5f64);
            let mode = resolve!(mode, ctx.cfg, "mode", 1usize);
            let n = resolve!(n_particles, ctx.cfg, "n", 1usize);
            let cutoff = resolve!(cutoff, ctx.cfg, "cutoff", 16usize);
            if amplitude.abs() > 1.0 {
                return Err(Error::parameter("amplitude", "|amplitude| > 1 is not a density"));
            }
            if mode == 0 || mode > cutoff {
                return Err(Error::parameter("mode", "need 1 ≤ mode ≤ cutoff"));
            }
            let m = TorusFunction::canonical_grid(cutoff);
            let samples: Vec<f64> = (0..m)
                .map(|i| {
                    let x = i as f64 / m as f64;
                    1.0 + amplitude * (2.0 * std::f64::consts::PI * mode as f64 * x).cos()
                })
                .collect();
            let rho = DensityField::from_samples(&samples, cutoff, n)?;
            write_example(out, io::density_to_json(&rho))
        }
        ExampleCommand::Constant {
            n_particles,
            cutoff,
            out,
        } => {
            let n = resolve!(n_particles, ctx.cfg, "n", 1usize);
            let cutoff = resolve!(cutoff, ctx.cfg, "cutoff", 16usize);
            let rho = DensityField::from_samples(&vec![1.0; 2 * cutoff + 1], cutoff, n)?;
            write_example(out, io::density_to_json(&rho))
        }
        ExampleCommand::Delta { gamma, cutoff, out } => {
            let gamma = resolve!(gamma, ctx.cfg, "gamma", 1.0f64);
            let cutoff = resolve!(cutoff, ctx.cfg, "cutoff", 32usize);
            let v = PotentialClass::delta(gamma, cutoff)?;
            write_example(out, io::potential_to_json(&v))
        }
    }
}

fn cmd_verify(ctx: &Ctx, which: VerifyCommand) -> Result<i32> {
    match which {
        VerifyCommand::KineticBounds {
            model,
            potential,
            eps,
            samples,
            prefix,
        } => {
            let spec = build_spec(ctx, &model)?;
            let v = build_potential(ctx, &spec, &potential)?;
            let samples = resolve!(samples, ctx.cfg, "samples", 500usize);
            let eps_list = if eps.is_empty() { vec![0.1] } else { eps };
            let prefix = prefix.unwrap_or_else(|| "kinetic_bounds".to_string());

            let mut rows = Vec::new();
            let mut all_valid = true;
            for (i, &e) in eps_list.iter().enumerate() {
                let kb = groundstate::kinetic_bound_estimate(
                    &v,
                    e,
                    &spec,
                    samples,
                    ctx.seed.wrapping_add(i as u64),
                )?;
                println!(
                    "ε = {:8.3e}: b_ε = {:.6e} (n = {}), {} states checked, {} violations",
                    kb.a, kb.b, kb.n, kb.checked_states, kb.violations
                );
                all_valid &= kb.violations == 0;
                rows.push(
                    Json::obj()
                        .field("eps", Json::Num(kb.a))
                        .field("achieved_prefactor", Json::Num(kb.achieved_prefactor))
                        .field("b", Json::Num(kb.b))
                        .field("n", Json::Int(kb.n as i64))
                        .field("checked_states", Json::Int(kb.checked_states as i64))
                        .field("violations", Json::Int(kb.violations as i64))
                        .field("max_slack", Json::Num(kb.max_slack)),
                );
            }
            let doc = header("verify-kinetic-bounds", ctx)
                .field("spec", spec_json(&spec))
                .field("bounds", Json::Arr(rows))
                .field("all_valid", Json::Bool(all_valid));
            let path = ctx.write_json(&prefix, &doc)?;
            println!("wrote {}", path.display());
            Ok(if all_valid { EXIT_OK } else { EXIT_NONCONVERGENCE })
        }
        VerifyCommand::Coercivity {
            model,
            potential,
            eps,
            samples,
            prefix,
        } => {
            let spec = build_spec(ctx, &model)?;
            let v = build_potential(ctx, &spec, &potential)?;
            let eps = resolve!(eps, ctx.cfg, "eps", 0.1f64);
            let samples = resolve!(samples, ctx.cfg, "samples", 500usize);
            let prefix = prefix.unwrap_or_else(|| "coercivity".to_string());
            let kb = groundstate::kinetic_bound_estimate(&v, eps, &spec, samples, ctx.seed)?;
            let rep = groundstate::shifted_coercivity_check(
                &spec,
                &v,
                kb.a,
                kb.b,
                samples,
                ctx.seed.wrapping_add(1),
            )?;
            println!(
                "a = {:.3e}, b = {:.6e}: lower margin {:.3e}, upper margin {:.3e} → {}",
                kb.a,
                kb.b,
                rep.min_lower_margin,
                rep.min_upper_margin,
                if rep.passed { "pass" } else { "FAIL" }
            );
            let doc = header("verify-coercivity", ctx)
                .field("spec", spec_json(&spec))
                .field("a", Json::Num(kb.a))
                .field("b", Json::Num(kb.b))
                .field("passed", Json::Bool(rep.passed))
                .field("checked_states", Json::Int(rep.checked_states as i64))
                .field("min_lower_margin", Json::Num(rep.min_lower_margin))
                .field("min_upper_margin", Json::Num(rep.min_upper_margin));
            let path = ctx.write_json(&prefix, &doc)?;
            println!("wrote {}", path.display());
            Ok(if rep.passed { EXIT_OK } else { EXIT_NONCONVERGENCE })
        }
        VerifyCommand::Embedding { count, prefix } => {
            use rand::prelude::*;
            use rand_chacha::ChaCha8Rng;
            let count = resolve!(count, ctx.cfg, "count", 1000usize);
            let prefix = prefix.unwrap_or_else(|| "embedding".to_string());
            let c_emb = crate::fourier::embedding_constant();
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let mut worst_ratio = 0.0f64;
            for _ in 0..count {
                let cutoff = rng.gen_range(1..16);
                let mut coeffs = vec![Complex64::default(); 2 * cutoff + 1];
                coeffs[cutoff] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
                for k in 1..=cutoff {
                    let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    coeffs[cutoff + k] = c;
                    coeffs[cutoff - k] = c.conj();
                }
                let f = TorusFunction::from_coeffs(coeffs);
                let h1 = f.norm(Space::H1);
                if h1 > 0.0 {
                    worst_ratio = worst_ratio.max(f.norm(Space::LInf) / h1);
                }
            }
            let passed = worst_ratio <= c_emb + 1e-12;
            println!(
                "sup ‖f‖_∞/‖f‖_H¹ over {count} samples: {worst_ratio:.12} ≤ C_emb = {c_emb:.12} → {}",
                if passed { "pass" } else { "FAIL" }
            );
            let doc = header("verify-embedding", ctx)
                .field("count", Json::Int(count as i64))
                .field("worst_ratio", Json::Num(worst_ratio))
                .field("embedding_constant", Json::Num(c_emb))
                .field("passed", Json::Bool(passed));
            let path = ctx.write_json(&prefix, &doc)?;
            println!("wrote {}", path.display());
            Ok(if passed { EXIT_OK } else { EXIT_NONCONVERGENCE })
        }
    }
}
