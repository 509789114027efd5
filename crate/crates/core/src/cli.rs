//! Batch front end: read a TOML run configuration, dispatch a subcommand, write artifacts.
//!
//! Every subcommand writes its outputs plus a `manifest.json` into the output directory.
//! Exit codes: 0 success, 2 configuration error, 3 precondition violation (for example a
//! non-resonant configuration handed to `verify-theorem1`), 4 numerical failure, 1 I/O failure
//! while writing outputs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::analysis::{
    compare_coupled_decoupled, fit_decay_rate, nearest_odd_ratio, resonance_scan, DecayFit,
    RESONANCE_TOL,
};
use crate::dynamics::{random_smooth_state, simulate, State, Trajectory};
use crate::error::AclError;
use crate::fem::{assemble, Mesh, SystemMatrices};
use crate::params::{
    derive_constants, derive_resonant_constants, validate_config, BeamConfig, CoreLayer,
    DerivedConstants, FeedbackGains, LayerParams, Model, PiezoConstants,
};
use crate::spectral::{
    build_resonant_mode, generator_spectrum, low_mode_state, strong_form_residual,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "acl-beam",
    version,
    about = "Simulation and spectral analysis of ACL sandwich beams"
)]
pub struct Cli {
    /// TOML run configuration; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Number of elements (overrides `[numerics] n_elems`).
    #[arg(long, global = true)]
    pub n_elems: Option<usize>,
    /// Time step (overrides `[numerics] dt`).
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Seed for random initial data (overrides `[numerics] seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Print the derived constants as JSON.
    Derive,
    /// Integrate the closed loop and write the energy trajectory.
    Simulate,
    /// Closed-loop spectrum with axis classification.
    Spectrum,
    /// Scan the piezoelectric coefficient for odd wave-speed ratios.
    Resonance,
    /// Check the undamped resonant eigenmode analytically and spectrally.
    #[command(name = "verify-theorem1")]
    VerifyResonance,
    /// Pair coupled and decoupled electrostatic eigenvalues.
    Compare,
    /// Simulate and fit the exponential energy decay rate.
    Decay,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Derive => "derive",
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::Resonance => "resonance",
            Command::VerifyResonance => "verify-theorem1",
            Command::Compare => "compare",
            Command::Decay => "decay",
        }
    }
}

/// `[beam]`: model and length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSection {
    /// `magnetic` (default), `electrostatic` or `decoupled`.
    pub model: Model,
    /// Beam length, default 1.
    pub length: f64,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self {
            model: Model::Magnetic,
            length: 1.0,
        }
    }
}

/// `[layer1]` / `[layer3]`: every constant defaults to 1 except `gamma = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaceSection {
    pub rho: f64,
    pub h: f64,
    pub alpha1: f64,
    pub gamma: f64,
    pub beta: f64,
    pub mu: f64,
}

impl Default for FaceSection {
    fn default() -> Self {
        Self {
            rho: 1.0,
            h: 1.0,
            alpha1: 1.0,
            gamma: 0.0,
            beta: 1.0,
            mu: 1.0,
        }
    }
}

impl FaceSection {
    fn to_params(&self) -> LayerParams {
        LayerParams {
            rho: self.rho,
            h: self.h,
            alpha1: self.alpha1,
            gamma: self.gamma,
            beta: self.beta,
            mu: Some(self.mu),
        }
    }
}

/// `[layer2]`: the core; `rho`, `h`, `g2` all default to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoreSection {
    pub rho: f64,
    pub h: f64,
    pub g2: f64,
}

impl Default for CoreSection {
    fn default() -> Self {
        Self {
            rho: 1.0,
            h: 1.0,
            g2: 1.0,
        }
    }
}

/// `[gains]`: each gain defaults to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsSection {
    pub k1: f64,
    pub k2: f64,
    pub s1: f64,
    pub s3: f64,
}

impl Default for GainsSection {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 1.0,
            s1: 1.0,
            s3: 1.0,
        }
    }
}

/// Initial data for `simulate` and `decay`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialData {
    /// Seeded sums of clamped-free sine shapes on every field.
    Smooth,
    /// Seeded combination of the lowest closed-loop modes.
    LowModes,
    /// Real part of the analytic resonant eigenmode (magnetic, resonant configs only).
    Resonant,
}

/// `[numerics]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    /// Elements of the uniform mesh, default 32.
    pub n_elems: usize,
    /// Time step, default 1e-3.
    pub dt: f64,
    /// Simulated time, default 10.
    pub horizon: f64,
    /// Steps between recorded samples, default 10.
    pub sample_every: usize,
    /// PRNG seed (xorshift), default 1.
    pub seed: u64,
    /// Initial data kind, default `smooth`.
    pub initial: InitialData,
    /// Number of sine shapes or modes in the initial data, default 4.
    pub initial_modes: usize,
    /// Decay-fit window as fractions of the horizon, default `[0.2, 0.9]`.
    pub fit_window: [f64; 2],
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            n_elems: 32,
            dt: 1e-3,
            horizon: 10.0,
            sample_every: 10,
            seed: 1,
            initial: InitialData::Smooth,
            initial_modes: 4,
            fit_window: [0.2, 0.9],
        }
    }
}

/// `[resonance]`: scan grid and odd-ratio search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceSection {
    /// Scan grid `gamma_min..=gamma_max` with `gamma_steps` points, default `0..=2`, 401 points.
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_steps: usize,
    /// Largest odd-ratio index, default 9.
    pub n_max: u32,
    /// Exact-resonance tolerance on the ratio, default 1e-6.
    pub tol: f64,
}

impl Default for ResonanceSection {
    fn default() -> Self {
        Self {
            gamma_min: 0.0,
            gamma_max: 2.0,
            gamma_steps: 401,
            n_max: 9,
            tol: RESONANCE_TOL,
        }
    }
}

/// `[compare]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    /// Number of oscillatory modes to pair; 0 (default) pairs all of them.
    pub k_modes: usize,
    /// Pairs averaged at each end of the table, default 5.
    pub summary_pairs: usize,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            k_modes: 0,
            summary_pairs: 5,
        }
    }
}

/// `[output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Output directory, default `acl-out`.
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("acl-out"),
        }
    }
}

/// Complete run configuration. Every key has a default; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub beam: BeamSection,
    pub layer1: FaceSection,
    pub layer2: CoreSection,
    pub layer3: FaceSection,
    pub gains: GainsSection,
    pub numerics: NumericsSection,
    pub resonance: ResonanceSection,
    pub compare: CompareSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn beam_config(&self) -> BeamConfig {
        BeamConfig {
            length: self.beam.length,
            layer1: self.layer1.to_params(),
            core: CoreLayer {
                rho: self.layer2.rho,
                h: self.layer2.h,
                g2: self.layer2.g2,
            },
            layer3: self.layer3.to_params(),
            gains: FeedbackGains {
                k1: self.gains.k1,
                k2: self.gains.k2,
                s1: self.gains.s1,
                s3: self.gains.s3,
            },
            model: self.beam.model,
        }
    }

    /// Collects every numerics violation.
    fn validate_numerics(&self) -> Vec<String> {
        let n = &self.numerics;
        let mut errors = Vec::new();
        if n.n_elems == 0 {
            errors.push("numerics.n_elems must be at least 1".to_string());
        }
        if !(n.dt.is_finite() && n.dt > 0.0) {
            errors.push(format!("numerics.dt must be positive (got {})", n.dt));
        }
        if !(n.horizon.is_finite() && n.horizon >= 0.0) {
            errors.push(format!(
                "numerics.horizon must be nonnegative (got {})",
                n.horizon
            ));
        }
        if n.sample_every == 0 {
            errors.push("numerics.sample_every must be at least 1".to_string());
        }
        if n.initial_modes == 0 {
            errors.push("numerics.initial_modes must be at least 1".to_string());
        }
        let [a, b] = n.fit_window;
        if !(0.0 <= a && a < b && b <= 1.0) {
            errors.push(format!(
                "numerics.fit_window must satisfy 0 <= start < end <= 1 (got [{a}, {b}])"
            ));
        }
        let r = &self.resonance;
        if r.gamma_steps == 0
            || !(r.gamma_min.is_finite() && r.gamma_max.is_finite() && r.gamma_max >= r.gamma_min)
        {
            errors.push(format!(
                "resonance grid needs gamma_steps >= 1 and finite gamma_min <= gamma_max (got {}..{} with {} steps)",
                r.gamma_min, r.gamma_max, r.gamma_steps
            ));
        }
        if r.n_max == 0 {
            errors.push("resonance.n_max must be at least 1".to_string());
        }
        if !(r.tol.is_finite() && r.tol > 0.0) {
            errors.push(format!("resonance.tol must be positive (got {})", r.tol));
        }
        errors
    }

    fn apply_overrides(&mut self, cli: &Cli) {
        if let Some(out) = &cli.out {
            self.output.dir = out.clone();
        }
        if let Some(n) = cli.n_elems {
            self.numerics.n_elems = n;
        }
        if let Some(dt) = cli.dt {
            self.numerics.dt = dt;
        }
        if let Some(seed) = cli.seed {
            self.numerics.seed = seed;
        }
    }

    /// SHA-256 of the canonical JSON form of the effective configuration. The output
    /// directory is left out so the same run written to two places hashes the same.
    pub fn digest(&self) -> String {
        let mut inputs = self.clone();
        inputs.output = OutputSection::default();
        let canonical = serde_json::to_vec(&inputs).expect("configuration serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn precondition(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_PRECONDITION,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl From<AclError> for CliError {
    fn from(err: AclError) -> Self {
        let code = match &err {
            AclError::InvalidConfig(_)
            | AclError::NonPositiveParameter { .. }
            | AclError::MissingMagneticParams(_) => EXIT_CONFIG,
            AclError::DegenerateWaveSpeeds { .. }
            | AclError::InvalidRatio(_)
            | AclError::NoRealSolution { .. }
            | AclError::NotResonant(_)
            | AclError::DimensionMismatch { .. }
            | AclError::TooLargeForDense { .. }
            | AclError::InvalidArgument(_) => EXIT_PRECONDITION,
            AclError::SingularStepMatrix(_)
            | AclError::ConvergenceFailure(_)
            | AclError::InsufficientSamples { .. }
            | AclError::NonpositiveEnergy(_) => EXIT_NUMERICAL,
            AclError::Io(_) => EXIT_IO,
        };
        let prefix = match &err {
            AclError::NotResonant(_) => "NotResonant: ",
            _ => "",
        };
        Self {
            code,
            message: format!("{prefix}{err}"),
        }
    }
}

/// Loads the configuration file (or defaults) and applies command line overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            RunConfig::from_toml(&text).map_err(|e| {
                CliError::config(format!("invalid config file {}: {e}", path.display()))
            })?
        }
        None => RunConfig::default(),
    };
    cfg.apply_overrides(cli);
    let mut errors = match validate_config(&cfg.beam_config()) {
        Ok(_) => Vec::new(),
        Err(AclError::InvalidConfig(list)) => list,
        Err(other) => vec![other.to_string()],
    };
    errors.extend(cfg.validate_numerics());
    if !errors.is_empty() {
        return Err(AclError::InvalidConfig(errors).into());
    }
    Ok(cfg)
}

/// Collects output files in a fixed order and writes the manifest last.
struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write_with(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    fn finish(mut self, command: Command, cfg: &RunConfig) -> Result<(), CliError> {
        let manifest = json!({
            "tool": "acl-beam",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command.name(),
            "config_sha256": cfg.digest(),
            "outputs": self.files.clone(),
        });
        self.write_json("manifest.json", &manifest)
    }
}

fn print_json(value: &impl Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serializes")
    );
}

fn piezo_json(c: &PiezoConstants) -> serde_json::Value {
    json!({
        "alpha": c.alpha,
        "zeta_plus": c.zeta_plus,
        "zeta_minus": c.zeta_minus,
        "b_plus": c.b_plus,
        "b_minus": c.b_minus,
        "ratio": c.ratio(),
    })
}

fn derived_json(model: Model, d: &DerivedConstants) -> serde_json::Value {
    json!({
        "model": model.name(),
        "m": d.m,
        "k1": d.k1,
        "k2": d.k2,
        "lever_arm": d.lever_arm,
        "shear_coef": d.shear_coef,
        "zeta_plus": d.layer1.zeta_plus,
        "zeta_minus": d.layer1.zeta_minus,
        "ratio": d.layer1.ratio(),
        "layer1": piezo_json(&d.layer1),
        "layer3": piezo_json(&d.layer3),
    })
}

fn system(cfg: &RunConfig) -> Result<SystemMatrices, CliError> {
    let mesh = Mesh::uniform(cfg.beam.length, cfg.numerics.n_elems);
    Ok(assemble(&cfg.beam_config(), &mesh)?)
}

/// Resonant `(n, m)` of the configuration, or `NotResonant`.
fn detect_resonance(cfg: &RunConfig) -> Result<(DerivedConstants, u32, u32), CliError> {
    let beam = cfg.beam_config();
    if beam.model != Model::Magnetic {
        return Err(AclError::NotResonant(format!(
            "the resonant construction needs the magnetic model (got {})",
            beam.model
        ))
        .into());
    }
    let constants = derive_resonant_constants(&beam).map_err(|e| match e {
        AclError::DegenerateWaveSpeeds { .. } => AclError::NotResonant(e.to_string()),
        other => other,
    })?;
    let ratio = constants.layer1.ratio();
    match nearest_odd_ratio(ratio, cfg.resonance.n_max) {
        Some((n, m, d)) if d <= cfg.resonance.tol => Ok((constants, n, m)),
        _ => Err(AclError::NotResonant(format!(
            "zeta+/zeta- = {ratio} is not within {} of an odd ratio with indices <= {}",
            cfg.resonance.tol, cfg.resonance.n_max
        ))
        .into()),
    }
}

fn initial_state(cfg: &RunConfig, sys: &SystemMatrices) -> Result<State, CliError> {
    let n = &cfg.numerics;
    match n.initial {
        InitialData::Smooth => Ok(random_smooth_state(sys, n.seed, n.initial_modes)),
        InitialData::LowModes => Ok(low_mode_state(sys, n.seed, n.initial_modes)?),
        InitialData::Resonant => {
            let (constants, nn, m) = detect_resonance(cfg)?;
            let mode = build_resonant_mode(&constants, nn, m, cfg.beam.length)?;
            Ok(mode.to_state(sys)?)
        }
    }
}

fn run_simulation(cfg: &RunConfig) -> Result<(SystemMatrices, Trajectory), CliError> {
    let sys = system(cfg)?;
    let s0 = initial_state(cfg, &sys)?;
    let n = &cfg.numerics;
    let traj = simulate(&sys, &s0, n.dt, n.horizon, n.sample_every)?;
    Ok((sys, traj))
}

fn fit_window(cfg: &RunConfig) -> (f64, f64) {
    let [a, b] = cfg.numerics.fit_window;
    (a * cfg.numerics.horizon, b * cfg.numerics.horizon)
}

fn cmd_derive(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let beam = cfg.beam_config();
    let derived = derived_json(beam.model, &derive_constants(&beam)?);
    print_json(&derived);
    out.write_json("derived.json", &derived)
}

fn cmd_simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let (_, traj) = run_simulation(cfg)?;
    out.write_with("trajectory.csv", |w| traj.write_csv(w))?;
    let (e0, e1) = (traj.initial_energy(), traj.final_energy());
    let dissipative = cfg.beam_config().gains.as_array().iter().any(|&g| g > 0.0);
    // A fit is only meaningful for a dissipative closed loop with enough samples.
    let fit: Option<DecayFit> = if dissipative {
        fit_decay_rate(&traj, fit_window(cfg)).ok()
    } else {
        None
    };
    let rel = if e0 > 0.0 { (e1 - e0) / e0 } else { 0.0 };
    let summary = json!({
        "model": cfg.beam.model.name(),
        "n_elems": cfg.numerics.n_elems,
        "dt": cfg.numerics.dt,
        "horizon": cfg.numerics.horizon,
        "samples": traj.samples.len(),
        "initial_energy": e0,
        "final_energy": e1,
        "relative_change": rel,
        "fit": fit,
    });
    match &fit {
        Some(f) => println!(
            "E0={e0:.16e} E_final={e1:.16e} rel_change={rel:.6e} omega={:.16e}",
            f.omega
        ),
        None => println!("E0={e0:.16e} E_final={e1:.16e} rel_change={rel:.6e}"),
    }
    out.write_json("summary.json", &summary)
}

fn cmd_spectrum(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let sys = system(cfg)?;
    let spectrum = generator_spectrum(&sys)?;
    let tol = spectrum.default_tol_axis();
    let class = spectrum.classify(tol);
    let report = spectrum.report(tol);
    println!(
        "{} eigenvalues: {} imaginary-axis, {} strictly stable, {} unstable; abscissa {:.6e}",
        report.eigenvalues.len(),
        class.imaginary_axis,
        class.strictly_stable,
        class.unstable,
        spectrum.abscissa()
    );
    out.write_json("spectrum.json", &report)
}

fn cmd_resonance(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let r = &cfg.resonance;
    let gammas: Vec<f64> = if r.gamma_steps == 1 {
        vec![r.gamma_min]
    } else {
        (0..r.gamma_steps)
            .map(|i| {
                r.gamma_min + (r.gamma_max - r.gamma_min) * i as f64 / (r.gamma_steps - 1) as f64
            })
            .collect()
    };
    let scan = resonance_scan(&cfg.layer1.to_params(), &gammas, r.n_max, r.tol)?;
    out.write_with("resonance.csv", |w| scan.write_csv(w))?;
    let flagged: Vec<_> = scan.flagged().collect();
    println!(
        "{} of {} grid points flagged resonant",
        flagged.len(),
        scan.points.len()
    );
    out.write_json(
        "resonance.json",
        &json!({ "n_max": scan.n_max, "tol": scan.tol, "points": scan.points.len(), "flagged": flagged }),
    )
}

fn cmd_verify_resonance(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let (constants, n, m) = detect_resonance(cfg)?;
    let mode = build_resonant_mode(&constants, n, m, cfg.beam.length)?;
    let boundary = mode.boundary_values();
    let boundary_max = boundary.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let residual = strong_form_residual(&mode, &cfg.layer1.to_params(), &constants);

    let sys = system(cfg)?;
    let spectrum = generator_spectrum(&sys)?;
    let target = mode.eigenvalue();
    let matched = spectrum.nearest(target).ok_or_else(|| CliError {
        code: EXIT_NUMERICAL,
        message: "empty spectrum".into(),
    })?;
    let report = json!({
        "n": n,
        "m": m,
        "tau": mode.tau,
        "boundary_values": boundary,
        "boundary_max": boundary_max,
        "strong_form_residual": residual,
        "n_elems": cfg.numerics.n_elems,
        "matched_eigenvalue": { "re": matched.lambda.re, "im": matched.lambda.im },
        "distance": (matched.lambda - target).norm(),
        "eigen_residual": matched.residual,
    });
    println!(
        "resonant (n, m) = ({n}, {m}), tau = {:.16e}; residual {residual:.3e}; matched eigenvalue {:.6e} + {:.16e}i",
        mode.tau, matched.lambda.re, matched.lambda.im
    );
    out.write_json("resonant_mode.json", &report)
}

fn cmd_compare(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let beam = cfg.beam_config();
    if beam.model != Model::Electrostatic {
        return Err(CliError::precondition(format!(
            "compare needs the electrostatic model (got {})",
            beam.model
        )));
    }
    let k = if cfg.compare.k_modes == 0 {
        usize::MAX
    } else {
        cfg.compare.k_modes
    };
    let mesh = Mesh::uniform(beam.length, cfg.numerics.n_elems);
    let cmp = compare_coupled_decoupled(&beam, &mesh, k)?;
    out.write_with("compare.csv", |w| cmp.write_csv(w))?;
    let (low, high) = cmp.low_high_means(cfg.compare.summary_pairs);
    println!(
        "{} pairs; mean |difference| lowest {}: {low:.6e}, highest {}: {high:.6e}",
        cmp.pairs.len(),
        cfg.compare.summary_pairs,
        cfg.compare.summary_pairs
    );
    out.write_json(
        "compare.json",
        &json!({
            "pairs": cmp.pairs.len(),
            "summary_pairs": cfg.compare.summary_pairs,
            "low_mean": low,
            "high_mean": high,
            "abscissa_coupled": cmp.abscissa_coupled,
            "abscissa_decoupled": cmp.abscissa_decoupled,
        }),
    )
}

fn cmd_decay(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let (_, traj) = run_simulation(cfg)?;
    out.write_with("trajectory.csv", |w| traj.write_csv(w))?;
    let fit = fit_decay_rate(&traj, fit_window(cfg))?;
    println!(
        "omega={:.16e} over [{}, {}] ({} samples)",
        fit.omega, fit.t0, fit.t1, fit.samples
    );
    out.write_json("decay.json", &fit)
}

/// Runs a parsed command line, returning the exit code.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let mut out = OutputDir::create(&cfg.output.dir)?;
    match cli.command {
        Command::Derive => cmd_derive(&cfg, &mut out)?,
        Command::Simulate => cmd_simulate(&cfg, &mut out)?,
        Command::Spectrum => cmd_spectrum(&cfg, &mut out)?,
        Command::Resonance => cmd_resonance(&cfg, &mut out)?,
        Command::VerifyResonance => cmd_verify_resonance(&cfg, &mut out)?,
        Command::Compare => cmd_compare(&cfg, &mut out)?,
        Command::Decay => cmd_decay(&cfg, &mut out)?,
    }
    out.finish(cli.command, &cfg)
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
