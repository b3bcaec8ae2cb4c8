//! `tomokit`: file-based driver for the reconstruction pipelines.
//!
//! Every subcommand reads artifacts by stem (`--input`) and writes one
//! (`--out`); see the `io` module of the core crate for the file layout.

mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tomokit::fractional::build_projector_kernel;
use tomokit::io::{read_artifact, with_suffix, write_artifact, write_pgm, Artifact};
use tomokit::mub_continuous::{reconstruct_density_matrix, DmReconstructionOptions, Provenance, QuadratureDataset};
use tomokit::numerics::Grid1D;
use tomokit::qudit::{
    measurement_probabilities, mub_family, reconstruct_qudit, sample_measurements, PrimeDim, QuditState,
};
use tomokit::radon::{forward_radon, inverse_radon, uniform_angles, FilterMethod, InverseRadonOptions, Sinogram};
use tomokit::states::{
    exact_quadratures, realize_kernel, realize_phantom, realize_qudit, sample_quadratures, test_library, StateSpec,
};
use tomokit::verify::{verify_all, verify_module, Module};
use tomokit::wigner::{quadrature_sinogram, reconstruct_wigner, wigner_transform};
use tomokit::{Result, TomoError};

#[derive(Parser)]
#[command(name = "tomokit", version, about = "Tomographic reconstruction of classical densities and quantum states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy, Default)]
struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    grid_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    grid_max: Option<f64>,
    #[arg(long)]
    grid_n: Option<usize>,
}

impl GridArgs {
    fn resolve(&self, min: f64, max: f64, n: usize) -> Result<Grid1D> {
        Grid1D::new(self.grid_min.unwrap_or(min), self.grid_max.unwrap_or(max), self.grid_n.unwrap_or(n))
            .map_err(|e| TomoError::InvalidArgument(e.to_string()))
    }
}

#[derive(Args, Clone, Copy, Default)]
struct AngleArgs {
    /// Number of angles θ_j = (j + s)π/N.
    #[arg(long)]
    angles: Option<usize>,
    /// The shift s in the angle formula.
    #[arg(long, default_value_t = 0.5)]
    angle_shift: f64,
    /// Number of offsets x′.
    #[arg(long)]
    offsets: Option<usize>,
    /// Offsets span [−max, max].
    #[arg(long)]
    offset_max: Option<f64>,
}

impl AngleArgs {
    fn resolve(&self, angles: usize, offsets: usize, offset_max: f64) -> Result<(Vec<f64>, Grid1D)> {
        let n = self.angles.unwrap_or(angles);
        if n == 0 {
            return Err(TomoError::InvalidArgument("--angles must be positive".into()));
        }
        let grid = Grid1D::symmetric(self.offset_max.unwrap_or(offset_max), self.offsets.unwrap_or(offsets))
            .map_err(|e| TomoError::InvalidArgument(e.to_string()))?;
        Ok((uniform_angles(n, self.angle_shift), grid))
    }
}

#[derive(Args, Clone, Default)]
struct StateArgs {
    /// A named state: vacuum, fock<n>, coherent, thermal, even_cat, mixed01, two_blob.
    #[arg(long, conflicts_with = "state")]
    kind: Option<String>,
    /// JSON state specification.
    #[arg(long)]
    state: Option<PathBuf>,
}

impl StateArgs {
    fn resolve(&self) -> Result<Option<StateSpec>> {
        if let Some(path) = &self.state {
            return StateSpec::from_json(&std::fs::read_to_string(path)?).map(Some);
        }
        self.kind.as_deref().map(named_state).transpose()
    }
}

fn named_state(name: &str) -> Result<StateSpec> {
    if name == "two_blob" {
        return Ok(StateSpec::two_blob_phantom());
    }
    if let Some(n) = name.strip_prefix("fock").and_then(|n| n.parse().ok()) {
        return Ok(StateSpec::Fock { n });
    }
    test_library()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
        .ok_or_else(|| TomoError::InvalidArgument(format!("unknown state kind {name:?}")))
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Pv,
    Ramp,
}

impl From<Method> for FilterMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Pv => FilterMethod::Pv,
            Method::Ramp => FilterMethod::Ramp,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Shots {
    Exact,
    Count(u64),
}

impl FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "exact" {
            return Ok(Shots::Exact);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or \"exact\", got {s:?}")),
            Ok(n) => Ok(Shots::Count(n)),
        }
    }
}

#[derive(Args, Clone, Copy)]
struct FilterArgs {
    #[arg(long, value_enum, default_value = "pv")]
    method: Method,
    /// Width of the principal-value regularization; defaults to 1% of the offset spacing.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl FilterArgs {
    fn options(&self) -> Result<InverseRadonOptions> {
        check_epsilon(self.epsilon)?;
        Ok(InverseRadonOptions {
            epsilon: self.epsilon,
            ..InverseRadonOptions::with_method(self.method.into())
        })
    }
}

fn check_epsilon(epsilon: Option<f64>) -> Result<()> {
    match epsilon {
        Some(e) if !(e.is_finite() && e > 0.0) => {
            Err(TomoError::InvalidArgument(format!("--epsilon must be positive, got {e}")))
        }
        _ => Ok(()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ground truth: a classical phantom density or a quantum state kernel.
    Phantom {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Also write an 8- or 16-bit PGM image of a classical phantom.
        #[arg(long)]
        pgm: Option<u8>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward Radon transform of a density.
    Radon {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        angles: AngleArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Filtered back-projection of a sinogram.
    Iradon {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        filter: FilterArgs,
        /// Replace negative values with zero.
        #[arg(long)]
        clip_negative: bool,
        #[arg(long)]
        pgm: Option<u8>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Projector kernel |x′,θ⟩⟨x′,θ| on a coordinate grid.
    Kernel {
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, allow_hyphen_values = true)]
        xprime: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wigner function of a kernel.
    Wigner {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact quadrature distributions, from a Wigner artifact or a state.
    Quadratures {
        #[arg(long, conflicts_with_all = ["kind", "state"])]
        input: Option<PathBuf>,
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        angles: AngleArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sampled quadrature histograms.
    Sample {
        /// Kernel artifact written by `phantom`.
        #[arg(long, conflicts_with_all = ["kind", "state"])]
        input: Option<PathBuf>,
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        angles: AngleArgs,
        #[arg(long)]
        shots: Shots,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wigner function from quadrature distributions.
    ReconstructWigner {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Density-matrix kernel from quadrature distributions.
    ReconstructDm {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Clip negative eigenvalues after symmetrization.
        #[arg(long)]
        floor_eigenvalues: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// The d + 1 mutually unbiased bases of a prime dimension.
    QuditMub {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measurement probabilities in all bases; also writes the state to `<out>.truth`.
    QuditSim {
        #[arg(long)]
        d: u32,
        /// e<k>, mixed, random, random-pure, or a JSON state file.
        #[arg(long)]
        state: String,
        #[arg(long)]
        shots: Shots,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Density matrix from measurement probabilities.
    QuditRecon {
        #[arg(long)]
        input: PathBuf,
        /// Clip negative eigenvalues and renormalize.
        #[arg(long)]
        project_psd: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suites.
    Verify {
        /// One of numerics, radon, wigner, fractional, mub-continuous, qudit-mub, states, all.
        #[arg(long, default_value = "all")]
        module: String,
        /// Qudit dimensions to check; repeatable.
        #[arg(long)]
        d: Vec<u32>,
    },
    /// Compare a reconstruction with ground truth; prints JSON.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also write the JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Error(TomoError),
    Verification(usize),
}

impl From<TomoError> for Failure {
    fn from(e: TomoError) -> Self {
        Failure::Error(e)
    }
}

fn wrong_input(path: &Path, got: &Artifact, expected: &str) -> TomoError {
    TomoError::InvalidArgument(format!(
        "{} holds a {} artifact, expected {expected}",
        path.display(),
        got.kind_name()
    ))
}

/// Quadrature data as a probability dataset; classical sinograms count as exact.
fn read_dataset(path: &Path) -> Result<QuadratureDataset> {
    match read_artifact(path)? {
        Artifact::Quadratures(d) => Ok(d),
        Artifact::Sinogram(s) => QuadratureDataset::new(s, Provenance::Exact),
        other => Err(wrong_input(path, &other, "quadratures")),
    }
}

fn read_sinogram(path: &Path) -> Result<Sinogram> {
    match read_artifact(path)? {
        Artifact::Quadratures(d) => Ok(d.sinogram().clone()),
        Artifact::Sinogram(s) => Ok(s),
        other => Err(wrong_input(path, &other, "sinogram")),
    }
}

fn maybe_pgm(out: &Path, density: &tomokit::radon::Density2D, pgm: Option<u8>) -> Result<()> {
    if let Some(bits) = pgm {
        write_pgm(out, density, bits)?;
    }
    Ok(())
}

/// A non-prime `--d` is a bad argument rather than a numerical failure.
fn prime(d: u32) -> Result<PrimeDim> {
    PrimeDim::new(d).map_err(|e| TomoError::InvalidArgument(e.to_string()))
}

fn qudit_state(d: PrimeDim, name: &str, seed: u64) -> Result<QuditState> {
    match name {
        "mixed" => Ok(QuditState::maximally_mixed(d)),
        "random" => Ok(QuditState::random_mixed(d, seed)),
        "random-pure" => Ok(QuditState::random_pure(d, seed)),
        _ => {
            if let Some(k) = name.strip_prefix('e').and_then(|k| k.parse::<usize>().ok()) {
                return QuditState::basis_state(d, k);
            }
            let path = Path::new(name);
            if path.exists() {
                let state = realize_qudit(&StateSpec::from_json(&std::fs::read_to_string(path)?)?)?;
                if state.dim() != d {
                    return Err(TomoError::InvalidArgument(format!(
                        "state file has d = {}, but --d is {}",
                        state.dim().get(),
                        d.get()
                    )));
                }
                return Ok(state);
            }
            Err(TomoError::InvalidArgument(format!("unknown qudit state {name:?}")))
        }
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Phantom { state, grid, pgm, out } => {
            let spec = state
                .resolve()?
                .ok_or_else(|| TomoError::InvalidArgument("phantom needs --kind or --state".into()))?;
            match spec {
                StateSpec::Phantom { .. } => {
                    let g = grid.resolve(-1.0, 1.0, 128)?;
                    let density = realize_phantom(&spec, &g, &g)?;
                    write_artifact(&out, &Artifact::Density(density.clone()))?;
                    maybe_pgm(&out, &density, pgm)?;
                }
                StateSpec::QuditPure { .. } | StateSpec::QuditRandomMixed { .. } => {
                    write_artifact(&out, &Artifact::QuditState(realize_qudit(&spec)?))?;
                }
                _ => {
                    let g = grid.resolve(-8.0, 8.0, 129)?;
                    let kernel = realize_kernel(&spec, &g)?.into_kernel();
                    write_artifact(
                        &out,
                        &Artifact::Kernel {
                            kernel,
                            spec: Some(spec),
                            diagnostics: None,
                        },
                    )?;
                }
            }
        }
        Command::Radon { input, angles, out } => {
            let density = match read_artifact(&input)? {
                Artifact::Density(d) => d,
                other => return Err(wrong_input(&input, &other, "density2d").into()),
            };
            let reach = density.x_grid().max_abs().hypot(density.y_grid().max_abs());
            let (theta, offsets) = angles.resolve(180, 257, reach)?;
            let sino = forward_radon(&density, &theta, &offsets)?;
            write_artifact(&out, &Artifact::Sinogram(sino))?;
        }
        Command::Iradon {
            input,
            grid,
            filter,
            clip_negative,
            pgm,
            out,
        } => {
            let sino = read_sinogram(&input)?;
            let g = grid.resolve(-1.0, 1.0, 128)?;
            let opts = InverseRadonOptions {
                clip_negative,
                ..filter.options()?
            };
            let density = inverse_radon(&sino, &g, &g, &opts)?;
            write_artifact(&out, &Artifact::Density(density.clone()))?;
            maybe_pgm(&out, &density, pgm)?;
        }
        Command::Kernel {
            theta,
            xprime,
            grid,
            out,
        } => {
            let g = grid.resolve(-8.0, 8.0, 129)?;
            let kernel = build_projector_kernel(theta, xprime, &g)?;
            write_artifact(
                &out,
                &Artifact::Kernel {
                    kernel,
                    spec: None,
                    diagnostics: None,
                },
            )?;
        }
        Command::Wigner { input, grid, out } => {
            let kernel = match read_artifact(&input)? {
                Artifact::Kernel { kernel, .. } => kernel,
                other => return Err(wrong_input(&input, &other, "kernel").into()),
            };
            let g = grid.resolve(-6.0, 6.0, 97)?;
            write_artifact(&out, &Artifact::Wigner(wigner_transform(&kernel, &g, &g)?))?;
        }
        Command::Quadratures {
            input,
            state,
            angles,
            out,
        } => {
            let (theta, offsets) = angles.resolve(90, 141, 7.0)?;
            let data = match (input, state.resolve()?) {
                (Some(path), _) => match read_artifact(&path)? {
                    Artifact::Wigner(w) => {
                        QuadratureDataset::new(quadrature_sinogram(&w, &theta, &offsets)?, Provenance::Exact)?
                    }
                    Artifact::Kernel { spec: Some(spec), .. } => exact_quadratures(&spec, &theta, &offsets)?,
                    other => return Err(wrong_input(&path, &other, "wigner").into()),
                },
                (None, Some(spec)) => exact_quadratures(&spec, &theta, &offsets)?,
                (None, None) => {
                    return Err(TomoError::InvalidArgument("quadratures needs --input, --kind or --state".into()).into())
                }
            };
            write_artifact(&out, &Artifact::Quadratures(data))?;
        }
        Command::Sample {
            input,
            state,
            angles,
            shots,
            seed,
            out,
        } => {
            let spec = match (input, state.resolve()?) {
                (Some(path), _) => match read_artifact(&path)? {
                    Artifact::Kernel { spec: Some(spec), .. } => spec,
                    other => return Err(wrong_input(&path, &other, "kernel with a state spec").into()),
                },
                (None, Some(spec)) => spec,
                (None, None) => return Err(TomoError::InvalidArgument("sample needs --input, --kind or --state".into()).into()),
            };
            let (theta, offsets) = angles.resolve(90, 141, 7.0)?;
            let data = match shots {
                Shots::Exact => exact_quadratures(&spec, &theta, &offsets)?,
                Shots::Count(n) => sample_quadratures(&spec, &theta, &offsets, n, seed)?,
            };
            write_artifact(&out, &Artifact::Quadratures(data))?;
        }
        Command::ReconstructWigner {
            input,
            grid,
            filter,
            out,
        } => {
            let sino = read_sinogram(&input)?;
            let g = grid.resolve(-6.0, 6.0, 97)?;
            write_artifact(&out, &Artifact::Wigner(reconstruct_wigner(&sino, &g, &g, &filter.options()?)?))?;
        }
        Command::ReconstructDm {
            input,
            grid,
            epsilon,
            floor_eigenvalues,
            out,
        } => {
            check_epsilon(epsilon)?;
            let data = read_dataset(&input)?;
            let g = grid.resolve(-6.0, 6.0, 97)?;
            let opts = DmReconstructionOptions {
                epsilon,
                floor_eigenvalues,
                ..Default::default()
            };
            let rec = reconstruct_density_matrix(&data, &g, &opts)?;
            write_artifact(
                &out,
                &Artifact::Kernel {
                    kernel: rec.kernel.into_kernel(),
                    spec: None,
                    diagnostics: Some(rec.diagnostics),
                },
            )?;
        }
        Command::QuditMub { d, out } => {
            write_artifact(&out, &Artifact::MubFamily(mub_family(prime(d)?)))?;
        }
        Command::QuditSim {
            d,
            state,
            shots,
            seed,
            out,
        } => {
            let dim = prime(d)?;
            let rho = qudit_state(dim, &state, seed)?;
            let fam = mub_family(dim);
            let (probs, provenance) = match shots {
                Shots::Exact => (measurement_probabilities(&rho, &fam), Provenance::Exact),
                Shots::Count(n) => (sample_measurements(&rho, &fam, n, seed)?, Provenance::Sampled { shots: n }),
            };
            let truth = with_suffix(&out, ".truth");
            write_artifact(&truth, &Artifact::QuditState(rho))?;
            write_artifact(
                &out,
                &Artifact::QuditProbabilities {
                    probs,
                    provenance,
                    seed: matches!(shots, Shots::Count(_)).then_some(seed),
                    truth: truth.file_name().map(|n| n.to_string_lossy().into_owned()),
                },
            )?;
        }
        Command::QuditRecon {
            input,
            project_psd,
            out,
        } => {
            let probs = match read_artifact(&input)? {
                Artifact::QuditProbabilities { probs, .. } => probs,
                other => return Err(wrong_input(&input, &other, "qudit_probabilities").into()),
            };
            let mut rho = reconstruct_qudit(&probs, &mub_family(probs.dim()))?;
            if project_psd {
                rho = rho.project_psd();
            }
            write_artifact(&out, &Artifact::QuditState(rho))?;
        }
        Command::Verify { module, d } => {
            let checks = if module == "all" {
                verify_all(&d)
            } else {
                verify_module(module.parse::<Module>()?, &d)
            };
            let failed = checks.iter().filter(|c| !c.passed).count();
            let mut text: String = checks.iter().map(|c| format!("{c}\n")).collect();
            text += &format!("{} checks, {failed} failed\n", checks.len());
            emit(&text)?;
            if failed > 0 {
                return Err(Failure::Verification(failed));
            }
        }
        Command::Report { input, truth, out } => {
            let report = report::compare(&read_artifact(&input)?, &read_artifact(&truth)?)?;
            let text = serde_json::to_string_pretty(&report).map_err(TomoError::from)?;
            emit(&format!("{text}\n"))?;
            if let Some(path) = out {
                std::fs::write(path, text + "\n").map_err(TomoError::from)?;
            }
        }
    }
    Ok(())
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("TOMOKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| TomoError::InvalidArgument(format!("TOMOKIT_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| TomoError::InvalidArgument(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(n)) => {
            eprintln!("verification failed: {n} check(s)");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
