//! Physical inputs of the three-layer beam and the composite constants derived from them.
//!
//! Layer 1 is the bottom piezoelectric layer, layer 2 the compliant core and layer 3 the top
//! piezoelectric layer. Every quantity is taken in consistent (usually normalized) units.

use serde::{Deserialize, Serialize};

use crate::error::{AclError, Result};

/// Constants of one piezoelectric face layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerParams {
    /// Volumetric density.
    pub rho: f64,
    /// Thickness.
    pub h: f64,
    /// Elastic stiffness `c11`.
    pub alpha1: f64,
    /// Piezoelectric coefficient `gamma31`.
    #[serde(default)]
    pub gamma: f64,
    /// Impermittivity `1 / eps33`.
    pub beta: f64,
    /// Magnetic permeability; only the magnetic model reads it.
    #[serde(default)]
    pub mu: Option<f64>,
}

impl LayerParams {
    /// All constants equal to one, no piezoelectric coupling.
    pub fn normalized() -> Self {
        Self {
            rho: 1.0,
            h: 1.0,
            alpha1: 1.0,
            gamma: 0.0,
            beta: 1.0,
            mu: Some(1.0),
        }
    }

    /// Stiffness seen by the stretching equation once the charge is eliminated:
    /// `alpha = alpha1 + gamma^2 beta`.
    pub fn alpha(&self) -> f64 {
        self.alpha1 + self.gamma * self.gamma * self.beta
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    fn mu_or_nan(&self) -> f64 {
        self.mu.unwrap_or(f64::NAN)
    }
}

/// The compliant middle layer. Only its thickness, density and shear modulus enter the
/// thin-core model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreLayer {
    #[serde(default)]
    pub rho: f64,
    pub h: f64,
    /// Shear modulus `G2`.
    pub g2: f64,
}

impl CoreLayer {
    pub fn normalized() -> Self {
        Self {
            rho: 1.0,
            h: 1.0,
            g2: 1.0,
        }
    }
}

/// Boundary feedback gains at the free end `x = L`.
///
/// `k1` multiplies the rotational velocity, `k2` the transverse velocity. `s1`, `s3` act on the
/// longitudinal velocities (electrostatic model) or on the electrode currents (magnetic model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackGains {
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
    #[serde(default)]
    pub s1: f64,
    #[serde(default)]
    pub s3: f64,
}

impl FeedbackGains {
    pub fn zero() -> Self {
        Self::uniform(0.0)
    }

    pub fn uniform(gain: f64) -> Self {
        Self {
            k1: gain,
            k2: gain,
            s1: gain,
            s3: gain,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.k1, self.k2, self.s1, self.s3]
    }
}

impl Default for FeedbackGains {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

/// Which closed-loop model to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Charge fields retained as dynamic unknowns (magnetic energy kept).
    Magnetic,
    /// Classical electrostatic model: longitudinal and bending motion coupled through core shear.
    Electrostatic,
    /// Electrostatic model with the core shear coupling removed.
    Decoupled,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Magnetic => "magnetic",
            Model::Electrostatic => "electrostatic",
            Model::Decoupled => "decoupled",
        }
    }

    pub fn has_charge(&self) -> bool {
        matches!(self, Model::Magnetic)
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    pub length: f64,
    pub layer1: LayerParams,
    pub core: CoreLayer,
    pub layer3: LayerParams,
    pub gains: FeedbackGains,
    pub model: Model,
}

impl BeamConfig {
    /// Unit constants everywhere, `L = 1`, unit gains.
    pub fn normalized(model: Model) -> Self {
        Self {
            length: 1.0,
            layer1: LayerParams::normalized(),
            core: CoreLayer::normalized(),
            layer3: LayerParams::normalized(),
            gains: FeedbackGains::default(),
            model,
        }
    }

    pub fn with_gains(mut self, gains: FeedbackGains) -> Self {
        self.gains = gains;
        self
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    /// Sets the same piezoelectric coefficient on both face layers.
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.layer1.gamma = gamma;
        self.layer3.gamma = gamma;
        self
    }

    pub fn with_g2(mut self, g2: f64) -> Self {
        self.core.g2 = g2;
        self
    }

    pub fn face_layer(&self, which: FaceLayer) -> &LayerParams {
        match which {
            FaceLayer::Bottom => &self.layer1,
            FaceLayer::Top => &self.layer3,
        }
    }
}

/// Selects one of the two piezoelectric layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceLayer {
    Bottom,
    Top,
}

impl FaceLayer {
    pub const BOTH: [FaceLayer; 2] = [FaceLayer::Bottom, FaceLayer::Top];

    pub fn index(&self) -> u8 {
        match self {
            FaceLayer::Bottom => 1,
            FaceLayer::Top => 3,
        }
    }
}

fn check_positive(errors: &mut Vec<String>, name: &str, value: f64) {
    if !(value.is_finite() && value > 0.0) {
        errors.push(format!("{name} must be positive (got {value})"));
    }
}

fn check_nonnegative(errors: &mut Vec<String>, name: &str, value: f64) {
    if !(value.is_finite() && value >= 0.0) {
        errors.push(format!("{name} must be nonnegative (got {value})"));
    }
}

/// Checks every positivity and consistency constraint, collecting all violations.
pub fn validate_config(config: &BeamConfig) -> Result<BeamConfig> {
    let mut errors = Vec::new();
    check_positive(&mut errors, "beam length", config.length);

    for (name, layer) in [("layer1", &config.layer1), ("layer3", &config.layer3)] {
        check_positive(&mut errors, &format!("{name}.rho"), layer.rho);
        check_positive(&mut errors, &format!("{name}.h"), layer.h);
        check_positive(&mut errors, &format!("{name}.alpha1"), layer.alpha1);
        check_positive(&mut errors, &format!("{name}.beta"), layer.beta);
        if !layer.gamma.is_finite() {
            errors.push(format!("{name}.gamma must be finite (got {})", layer.gamma));
        }
        match (config.model, layer.mu) {
            (Model::Magnetic, None) => errors.push(format!(
                "{name}.mu (magnetic permeability) is required for the magnetic model"
            )),
            (_, Some(mu)) => check_positive(&mut errors, &format!("{name}.mu"), mu),
            _ => {}
        }
    }

    if !(config.core.h.is_finite() && config.core.h > 0.0) {
        errors.push(format!(
            "middle layer thickness must be positive (got {})",
            config.core.h
        ));
    }
    check_nonnegative(&mut errors, "layer2.rho", config.core.rho);
    check_nonnegative(&mut errors, "layer2.g2", config.core.g2);

    for (name, gain) in ["k1", "k2", "s1", "s3"].iter().zip(config.gains.as_array()) {
        check_nonnegative(&mut errors, &format!("gains.{name}"), gain);
    }

    if errors.is_empty() {
        Ok(*config)
    } else {
        Err(AclError::InvalidConfig(errors))
    }
}

/// Constants attached to one piezoelectric layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiezoConstants {
    /// `alpha1 + gamma^2 beta`.
    pub alpha: f64,
    pub zeta_plus: f64,
    pub zeta_minus: f64,
    /// Charge-to-displacement amplitude ratio of the fast/slow characteristic family.
    /// Undefined without piezoelectric coupling.
    pub b_plus: Option<f64>,
    pub b_minus: Option<f64>,
}

impl PiezoConstants {
    pub fn ratio(&self) -> f64 {
        self.zeta_plus / self.zeta_minus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// Total line density `sum rho_i h_i`.
    pub m: f64,
    /// Rotary inertia `K1`.
    pub k1: f64,
    /// Bending stiffness `K2`.
    pub k2: f64,
    /// Lever arm `H = (h1 + 2 h2 + h3) / 2`.
    pub lever_arm: f64,
    /// Shear coupling coefficient `G2 / h2`.
    pub shear_coef: f64,
    pub layer1: PiezoConstants,
    pub layer3: PiezoConstants,
}

impl DerivedConstants {
    pub fn face(&self, which: FaceLayer) -> &PiezoConstants {
        match which {
            FaceLayer::Bottom => &self.layer1,
            FaceLayer::Top => &self.layer3,
        }
    }
}

/// Slowness factors `(zeta_plus, zeta_minus)` of the coupled stretching/charge wave pair.
///
/// They are the square roots of the roots of `z^2 - S z + P`, with
/// `S = gamma^2 mu / alpha1 + mu / beta + rho / alpha1` and `P = rho mu / (beta alpha1)`.
/// The small root is taken as `P / z_plus` to avoid cancellation.
pub fn wave_slowness(layer: &LayerParams) -> (f64, f64) {
    let mu = layer.mu_or_nan();
    let electric = mu / layer.beta;
    let elastic = layer.rho / layer.alpha1;
    let coupling = layer.gamma * layer.gamma * mu / layer.alpha1;
    let s = coupling + electric + elastic;
    let p = electric * elastic;
    // S^2 - 4P written as a sum of nonnegative terms.
    let disc = (electric - elastic).powi(2) + coupling * (coupling + 2.0 * (electric + elastic));
    let big = 0.5 * (s + disc.sqrt());
    let small = p / big;
    (big.sqrt(), small.sqrt())
}

/// Roots `(b_plus, b_minus)` of `x^2 - A x - rho/mu` with
/// `A = gamma + alpha1/(gamma beta) - rho/(gamma mu)`; `None` when `gamma = 0`.
pub fn amplitude_ratios(layer: &LayerParams) -> Option<(f64, f64)> {
    if layer.gamma == 0.0 {
        return None;
    }
    let mu = layer.mu_or_nan();
    let g = layer.gamma;
    let a = g + layer.alpha1 / (g * layer.beta) - layer.rho / (g * mu);
    let c = layer.rho / mu;
    let root = (a * a + 4.0 * c).sqrt();
    // The root of larger magnitude is computed directly; the other from the product -c.
    if a >= 0.0 {
        let plus = 0.5 * (a + root);
        Some((plus, -c / plus))
    } else {
        let minus = 0.5 * (a - root);
        Some((-c / minus, minus))
    }
}

fn piezo_constants(layer: &LayerParams) -> PiezoConstants {
    let (zeta_plus, zeta_minus) = if layer.mu.is_some() {
        wave_slowness(layer)
    } else {
        (f64::NAN, f64::NAN)
    };
    let (b_plus, b_minus) = match layer.mu.and_then(|_| amplitude_ratios(layer)) {
        Some((p, m)) => (Some(p), Some(m)),
        None => (None, None),
    };
    PiezoConstants {
        alpha: layer.alpha(),
        zeta_plus,
        zeta_minus,
        b_plus,
        b_minus,
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(AclError::NonPositiveParameter { name, value })
    }
}

/// Computes all composite scalars used by the beam equations.
///
/// The wave-speed factors need `mu`; without it they are reported as NaN.
pub fn derive_constants(config: &BeamConfig) -> Result<DerivedConstants> {
    let l1 = &config.layer1;
    let l3 = &config.layer3;
    let core = &config.core;
    for (name, v) in [
        ("layer1.rho", l1.rho),
        ("layer1.h", l1.h),
        ("layer1.alpha1", l1.alpha1),
        ("layer1.beta", l1.beta),
        ("layer3.rho", l3.rho),
        ("layer3.h", l3.h),
        ("layer3.alpha1", l3.alpha1),
        ("layer3.beta", l3.beta),
        ("layer2.h", core.h),
    ] {
        require_positive(name, v)?;
    }
    for (name, mu) in [("layer1.mu", l1.mu), ("layer3.mu", l3.mu)] {
        if let Some(mu) = mu {
            require_positive(name, mu)?;
        }
    }

    let cube = |h: f64| h * h * h / 12.0;
    Ok(DerivedConstants {
        m: l1.rho * l1.h + core.rho * core.h + l3.rho * l3.h,
        k1: l1.rho * cube(l1.h) + l3.rho * cube(l3.h),
        k2: l1.alpha() * cube(l1.h) + l3.alpha() * cube(l3.h),
        lever_arm: 0.5 * (l1.h + 2.0 * core.h + l3.h),
        shear_coef: core.g2 / core.h,
        layer1: piezo_constants(l1),
        layer3: piezo_constants(l3),
    })
}

/// Derived constants for a resonance scenario: identical face layers with distinct wave speeds.
pub fn derive_resonant_constants(config: &BeamConfig) -> Result<DerivedConstants> {
    if config.layer1 != config.layer3 {
        return Err(AclError::NotResonant(
            "the two piezoelectric layers must have identical material properties".into(),
        ));
    }
    if config.layer1.mu.is_none() {
        return Err(AclError::MissingMagneticParams("layer1"));
    }
    let constants = derive_constants(config)?;
    for face in FaceLayer::BOTH {
        let c = constants.face(face);
        if (c.zeta_plus - c.zeta_minus).abs() <= 1e-14 * c.zeta_plus {
            return Err(AclError::DegenerateWaveSpeeds {
                layer: face.index(),
                zeta: c.zeta_plus,
            });
        }
    }
    Ok(constants)
}

/// A ratio `(2n - 1) / (2m - 1)` of odd integers with `n, m >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct OddRatio {
    pub n: u32,
    pub m: u32,
}

impl OddRatio {
    pub fn new(n: u32, m: u32) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(AclError::InvalidArgument(format!(
                "odd ratio indices must be >= 1 (got n = {n}, m = {m})"
            )));
        }
        Ok(Self { n, m })
    }

    pub fn value(&self) -> f64 {
        (2.0 * self.n as f64 - 1.0) / (2.0 * self.m as f64 - 1.0)
    }
}

/// Piezoelectric coefficient making `zeta_plus / zeta_minus` equal to `ratio`.
///
/// Since `zeta+^2 zeta-^2 = P` and `zeta+^2 + zeta-^2 = S`, a ratio `r` requires
/// `S = sqrt(P) (r + 1/r)`, which is linear in `gamma^2`. For a normalized base
/// (`rho = mu = beta = alpha1`) this reduces to `gamma^2 = r + 1/r - 2`.
/// The nonnegative root is returned; `gamma` and `-gamma` give the same ratio.
pub fn solve_resonant_gamma(ratio: f64, base: &LayerParams) -> Result<f64> {
    if !(ratio.is_finite() && ratio >= 1.0) {
        return Err(AclError::InvalidRatio(ratio));
    }
    let mu = base
        .mu
        .ok_or(AclError::MissingMagneticParams("base layer"))?;
    for (name, v) in [
        ("rho", base.rho),
        ("alpha1", base.alpha1),
        ("beta", base.beta),
        ("mu", mu),
    ] {
        require_positive(name, v)?;
    }
    let sqrt_p = (base.rho * mu / (base.beta * base.alpha1)).sqrt();
    let target_s = sqrt_p * (ratio + 1.0 / ratio);
    let gamma_sq = (base.alpha1 / mu) * (target_s - mu / base.beta - base.rho / base.alpha1);
    // Roundoff can leave a tiny negative value at ratio 1 for normalized bases.
    let tol = 1e-14 * (target_s * base.alpha1 / mu).abs();
    if gamma_sq < -tol {
        return Err(AclError::NoRealSolution { ratio, gamma_sq });
    }
    Ok(gamma_sq.max(0.0).sqrt())
}

/// Resonant coefficient for an odd ratio.
pub fn solve_resonant_gamma_odd(ratio: OddRatio, base: &LayerParams) -> Result<f64> {
    if ratio.n < ratio.m {
        return Err(AclError::InvalidRatio(ratio.value()));
    }
    solve_resonant_gamma(ratio.value(), base)
}
