//! Closed-loop spectra and the analytic resonant eigenfunctions of the magnetic model.
//!
//! The quadratic pencil `lambda^2 M + lambda D + K` is linearized in energy coordinates (see
//! [`EnergyGenerator`]) and solved densely.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_xorshift::XorShiftRng;
use serde::Serialize;

use crate::dynamics::{interpolate_field, State};
use crate::error::{AclError, Result};
use crate::fem::{Field, SystemMatrices};
use crate::linalg::{eig, inf_norm, real_mul, C64};
use crate::params::{DerivedConstants, LayerParams, Model, PiezoConstants};

/// Largest system accepted by the dense eigensolver.
pub const DENSE_SPECTRUM_LIMIT: usize = 2000;

/// Default axis tolerance factor: `tol_axis = 1e-8 * max |lambda|`.
pub const DEFAULT_AXIS_FACTOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ModeClass {
    ImaginaryAxis,
    StrictlyStable,
    Unstable,
}

impl ModeClass {
    pub fn of(lambda: C64, tol_axis: f64) -> Self {
        if lambda.re.abs() <= tol_axis {
            ModeClass::ImaginaryAxis
        } else if lambda.re > tol_axis {
            ModeClass::Unstable
        } else {
            ModeClass::StrictlyStable
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigMode {
    pub lambda: C64,
    /// Position part of the eigenvector.
    pub shape: DVector<C64>,
    /// Backward error `||(l^2 M + l D + K) x|| / ((|l|^2 ||M|| + |l| ||D|| + ||K||) ||x||)`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub model: Model,
    pub n_elems: usize,
    /// Sorted by imaginary part, then real part.
    pub modes: Vec<EigMode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub tol_axis: f64,
    pub imaginary_axis: usize,
    pub strictly_stable: usize,
    pub unstable: usize,
    pub axis_modes: Vec<C64>,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    pub fn max_modulus(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.lambda.norm())
            .fold(0.0, f64::max)
    }

    pub fn default_tol_axis(&self) -> f64 {
        DEFAULT_AXIS_FACTOR * self.max_modulus()
    }

    /// Largest real part.
    pub fn abscissa(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.lambda.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.modes.iter().map(|m| m.residual).fold(0.0, f64::max)
    }

    /// Mode closest to `target` in the complex plane.
    pub fn nearest(&self, target: C64) -> Option<&EigMode> {
        self.modes.iter().min_by(|a, b| {
            (a.lambda - target)
                .norm()
                .total_cmp(&(b.lambda - target).norm())
        })
    }

    pub fn classify(&self, tol_axis: f64) -> Classification {
        let mut c = Classification {
            tol_axis,
            imaginary_axis: 0,
            strictly_stable: 0,
            unstable: 0,
            axis_modes: Vec::new(),
        };
        for m in &self.modes {
            match ModeClass::of(m.lambda, tol_axis) {
                ModeClass::ImaginaryAxis => {
                    c.imaginary_axis += 1;
                    c.axis_modes.push(m.lambda);
                }
                ModeClass::StrictlyStable => c.strictly_stable += 1,
                ModeClass::Unstable => c.unstable += 1,
            }
        }
        c
    }

    /// Report document: `{model, n_elems, tol_axis, eigenvalues: [{re, im, residual, class}]}`.
    pub fn report(&self, tol_axis: f64) -> SpectrumReport {
        SpectrumReport {
            model: self.model.name().to_string(),
            n_elems: self.n_elems,
            tol_axis,
            eigenvalues: self
                .modes
                .iter()
                .map(|m| EigenvalueEntry {
                    re: m.lambda.re,
                    im: m.lambda.im,
                    residual: m.residual,
                    class: ModeClass::of(m.lambda, tol_axis),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenvalueEntry {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub class: ModeClass,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub model: String,
    pub n_elems: usize,
    pub tol_axis: f64,
    pub eigenvalues: Vec<EigenvalueEntry>,
}

/// Generator in energy coordinates.
///
/// With `M = L L^T`, `K~ = L^-1 K L^-T`, `D~ = L^-1 D L^-T` and `S = K~^(1/2)`, the state
/// `z = (S L^T q, L^T q')` evolves by `z' = [[0, S], [-S, -D~]] z`. The Euclidean norm of `z`
/// is the energy norm, the matrix is skew-symmetric when `D = 0`, and its eigenvalues are
/// those of `lambda^2 M + lambda D + K`.
pub struct EnergyGenerator {
    pub matrix: DMatrix<f64>,
    chol_l: DMatrix<f64>,
}

impl EnergyGenerator {
    pub fn new(sys: &SystemMatrices) -> Result<Self> {
        let n = sys.dofs();
        let chol = sys.mass.clone().cholesky().ok_or_else(|| {
            AclError::ConvergenceFailure("mass matrix is not positive definite".into())
        })?;
        let l = chol.l();
        let congruence = |m: &DMatrix<f64>| -> DMatrix<f64> {
            let half = l
                .solve_lower_triangular(m)
                .expect("nonsingular Cholesky factor");
            let full = l
                .solve_lower_triangular(&half.transpose())
                .expect("nonsingular Cholesky factor");
            // Symmetrize away roundoff.
            (&full + full.transpose()) * 0.5
        };
        let k = congruence(&sys.stiffness);
        let d = congruence(&sys.damping);
        let eig = SymmetricEigen::new(k);
        let roots = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
        let s = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        let s = (&s + s.transpose()) * 0.5;

        let mut a = DMatrix::zeros(2 * n, 2 * n);
        a.view_mut((0, n), (n, n)).copy_from(&s);
        a.view_mut((n, 0), (n, n)).copy_from(&(-&s));
        a.view_mut((n, n), (n, n)).copy_from(&(-d));
        Ok(Self {
            matrix: a,
            chol_l: l,
        })
    }

    /// Position part `q = L^-T (z_2 / lambda)` of an eigenvector `z`.
    fn position(&self, lambda: C64, z: &DVector<C64>) -> DVector<C64> {
        let n = self.chol_l.nrows();
        let lt = self.chol_l.transpose();
        let y = z.rows(n, n).map(|c| c / lambda);
        let re = lt
            .solve_upper_triangular(&y.map(|c| c.re))
            .expect("nonsingular Cholesky factor");
        let im = lt
            .solve_upper_triangular(&y.map(|c| c.im))
            .expect("nonsingular Cholesky factor");
        DVector::from_iterator(n, re.iter().zip(im.iter()).map(|(&r, &i)| C64::new(r, i)))
    }
}

/// All `2 * dofs` eigenvalues of the closed-loop generator, with residuals.
pub fn generator_spectrum(sys: &SystemMatrices) -> Result<Spectrum> {
    let n = sys.dofs();
    if n > DENSE_SPECTRUM_LIMIT {
        return Err(AclError::TooLargeForDense {
            dofs: n,
            limit: DENSE_SPECTRUM_LIMIT,
        });
    }
    let generator = EnergyGenerator::new(sys)?;

    let norm_m = inf_norm(&sys.mass);
    let norm_d = inf_norm(&sys.damping);
    let norm_k = inf_norm(&sys.stiffness);

    let mut modes: Vec<EigMode> = eig(&generator.matrix)?
        .into_iter()
        .map(|(lambda, z)| {
            let x = generator.position(lambda, &z);
            let r = real_mul(&sys.mass, &x) * (lambda * lambda)
                + real_mul(&sys.damping, &x) * lambda
                + real_mul(&sys.stiffness, &x);
            let lm = lambda.norm();
            let scale = (lm * lm * norm_m + lm * norm_d + norm_k) * x.norm();
            EigMode {
                lambda,
                residual: r.norm() / scale,
                shape: x,
            }
        })
        .collect();
    if let Some(bad) = modes
        .iter()
        .find(|m| !(m.lambda.re.is_finite() && m.lambda.im.is_finite()))
    {
        return Err(AclError::ConvergenceFailure(format!(
            "non-finite eigenvalue {}",
            bad.lambda
        )));
    }
    modes.sort_by(|a, b| {
        a.lambda
            .im
            .total_cmp(&b.lambda.im)
            .then(a.lambda.re.total_cmp(&b.lambda.re))
    });
    Ok(Spectrum {
        model: sys.model,
        n_elems: sys.mesh.n_elems,
        modes,
    })
}

/// Seeded real solution built from the `count` closed-loop modes of smallest `|lambda|`
/// (one per conjugate pair, `Im lambda >= 0`): `q = Re sum c_j x_j`, `q' = Re sum c_j lambda_j x_j`
/// with random complex weights `c_j`.
///
/// The data lies in an invariant subspace of resolved frequencies, so it is the natural input
/// for comparing time steppers against the exact flow. The generator is `XorShiftRng`.
pub fn low_mode_state(sys: &SystemMatrices, seed: u64, count: usize) -> Result<State> {
    let spectrum = generator_spectrum(sys)?;
    let mut low: Vec<&EigMode> = spectrum
        .modes
        .iter()
        .filter(|m| m.lambda.im >= 0.0)
        .collect();
    low.sort_by(|a, b| a.lambda.norm().total_cmp(&b.lambda.norm()));
    let mut rng = XorShiftRng::seed_from_u64(seed);
    let mut state = State::zeros(sys.dofs());
    for mode in low.into_iter().take(count) {
        // Unit scale in the largest entry keeps the weights meaningful across modes.
        let peak = mode.shape.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) / peak;
        for (i, z) in mode.shape.iter().enumerate() {
            state.q[i] += (c * z).re;
            state.qdot[i] += (c * mode.lambda * z).re;
        }
    }
    Ok(state)
}

/// Closed-form undamped eigenfunction of the magnetic model at a resonant ratio
/// `zeta+ / zeta- = (2n - 1) / (2m - 1)`.
///
/// Both face layers carry the same `(v, p)` and `w = 0`, so the core shear vanishes. At
/// `x = L` the profile satisfies `v_x = p_x = p = 0` and is therefore invisible to current
/// feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticResonantMode {
    pub n: u32,
    pub m: u32,
    pub length: f64,
    pub tau: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    pub k1_coef: f64,
    pub k2_coef: f64,
}

impl AnalyticResonantMode {
    fn denom(&self) -> f64 {
        self.a_plus * self.a_minus * (self.b_plus - self.b_minus)
    }

    /// `(v, v_x, v_xx)` at `x`.
    pub fn v(&self, x: f64) -> [f64; 3] {
        let (ap, am, bp, bm) = (self.a_plus, self.a_minus, self.b_plus, self.b_minus);
        // v = c_minus sin(am x) + c_plus sin(ap x)
        let c_minus = (self.k1_coef * ap * bp - self.k2_coef * ap) / self.denom();
        let c_plus = (-self.k1_coef * am * bm + self.k2_coef * am) / self.denom();
        sine_pair(c_minus, am, c_plus, ap, x)
    }

    /// `(p, p_x, p_xx)` at `x`.
    pub fn p(&self, x: f64) -> [f64; 3] {
        let (ap, am, bp, bm) = (self.a_plus, self.a_minus, self.b_plus, self.b_minus);
        let c_minus = (self.k1_coef * ap * bp * bm - self.k2_coef * ap * bm) / self.denom();
        let c_plus = (-self.k1_coef * am * bp * bm + self.k2_coef * am * bp) / self.denom();
        sine_pair(c_minus, am, c_plus, ap, x)
    }

    pub fn eigenvalue(&self) -> C64 {
        C64::new(0.0, self.tau)
    }

    /// Boundary values that must vanish: `v(0), p(0), v_x(L), p_x(L), p(L)`.
    pub fn boundary_values(&self) -> [f64; 5] {
        let (v0, p0) = (self.v(0.0), self.p(0.0));
        let (vl, pl) = (self.v(self.length), self.p(self.length));
        [v0[0], p0[0], vl[1], pl[1], pl[0]]
    }

    /// Interpolates the mode into the magnetic layout (both layers, `w = 0`) as a position
    /// vector; the paired velocity is zero, i.e. the real part of the eigen-solution at `t = 0`.
    pub fn to_state(&self, sys: &SystemMatrices) -> Result<State> {
        if !sys.layout.has_charge {
            return Err(AclError::InvalidArgument(
                "resonant mode lives in the magnetic layout".into(),
            ));
        }
        let mut state = State::zeros(sys.dofs());
        for field in [Field::V1, Field::V3] {
            interpolate_field(sys, field, |x| self.v(x)[0], |_| 0.0, &mut state.q);
        }
        for field in [Field::P1, Field::P3] {
            interpolate_field(sys, field, |x| self.p(x)[0], |_| 0.0, &mut state.q);
        }
        Ok(state)
    }
}

fn sine_pair(c1: f64, a1: f64, c2: f64, a2: f64, x: f64) -> [f64; 3] {
    let (s1, co1) = (a1 * x).sin_cos();
    let (s2, co2) = (a2 * x).sin_cos();
    [
        c1 * s1 + c2 * s2,
        c1 * a1 * co1 + c2 * a2 * co2,
        -(c1 * a1 * a1 * s1 + c2 * a2 * a2 * s2),
    ]
}

/// Builds the resonant eigenfunction for identical face layers.
pub fn build_resonant_mode(
    constants: &DerivedConstants,
    n: u32,
    m: u32,
    length: f64,
) -> Result<AnalyticResonantMode> {
    if n == 0 || m == 0 {
        return Err(AclError::InvalidArgument(
            "resonance indices start at 1".into(),
        ));
    }
    if constants.layer1 != constants.layer3 {
        return Err(AclError::NotResonant("face layers differ".into()));
    }
    let c: &PiezoConstants = &constants.layer1;
    let target = (2.0 * n as f64 - 1.0) / (2.0 * m as f64 - 1.0);
    if !((c.ratio() - target).abs() <= 1e-10 * target) {
        return Err(AclError::NotResonant(format!(
            "zeta+/zeta- = {} differs from (2n-1)/(2m-1) = {target}",
            c.ratio()
        )));
    }
    let (b_plus, b_minus) = match (c.b_plus, c.b_minus) {
        (Some(p), Some(m)) => (p, m),
        _ => {
            return Err(AclError::NotResonant(
                "no piezoelectric coupling (gamma = 0)".into(),
            ))
        }
    };
    let a_plus = (2.0 * n as f64 - 1.0) * PI / (2.0 * length);
    let tau = a_plus / c.zeta_plus;
    let a_minus = (2.0 * m as f64 - 1.0) * PI / (2.0 * length);
    let d = a_plus * a_minus * (b_plus - b_minus);
    let (sp, sm) = ((a_plus * length).sin(), (a_minus * length).sin());
    let k1_coef = (a_minus * b_plus * sp - a_plus * b_minus * sm) / d;
    let k2_coef = -(a_plus * sm - a_minus * sp) * b_plus * b_minus / d;
    Ok(AnalyticResonantMode {
        n,
        m,
        length,
        tau,
        a_plus,
        a_minus,
        b_plus,
        b_minus,
        k1_coef,
        k2_coef,
    })
}

/// Number of grid intervals used by [`strong_form_residual`].
pub const RESIDUAL_GRID: usize = 2000;

/// Maximum pointwise residual of the two strong-form eigen-equations of one face layer,
///
/// `alpha h v_xx - gamma beta h p_xx - kappa G2 phi + tau^2 rho h v = 0`,
/// `beta h p_xx - gamma beta h v_xx + tau^2 mu h p = 0`,
///
/// relative to `tau^2 h (rho max|v| + mu max|p|)`. The shear angle is evaluated from the
/// mode itself (`v1 = v3`, `w = 0`), so it vanishes identically.
pub fn strong_form_residual(
    mode: &AnalyticResonantMode,
    layer: &LayerParams,
    constants: &DerivedConstants,
) -> f64 {
    let mu = layer.mu.unwrap_or(f64::NAN);
    let (h, g, beta) = (layer.h, layer.gamma, layer.beta);
    let alpha = layer.alpha();
    let tau2 = mode.tau * mode.tau;
    let grid: Vec<f64> = (0..=RESIDUAL_GRID)
        .map(|i| mode.length * i as f64 / RESIDUAL_GRID as f64)
        .collect();
    let vmax = grid.iter().map(|&x| mode.v(x)[0].abs()).fold(0.0, f64::max);
    let pmax = grid.iter().map(|&x| mode.p(x)[0].abs()).fold(0.0, f64::max);
    let scale = tau2 * h * (layer.rho * vmax + mu * pmax);
    let mut worst = 0.0f64;
    for &x in &grid {
        let [v, _, vxx] = mode.v(x);
        let [p, _, pxx] = mode.p(x);
        let phi = constants.shear_coef * (-v + v);
        let r1 = alpha * h * vxx - g * beta * h * pxx + phi + tau2 * layer.rho * h * v;
        let r2 = beta * h * pxx - g * beta * h * vxx + tau2 * mu * h * p;
        worst = worst.max(r1.abs()).max(r2.abs());
    }
    worst / scale
}
