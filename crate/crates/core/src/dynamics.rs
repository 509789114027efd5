//! Time integration of `M q'' + D q' + K q = 0` and the energy audit.
//!
//! The integrator is the implicit midpoint rule on `z = (q, q')`. It preserves the discrete
//! energy `E = (q'^T M q' + q^T K q) / 2` exactly when `D = 0`, and in general satisfies
//! `E_{k+1} - E_k = -dt * vm^T D vm` with `vm` the midpoint velocity.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_xorshift::XorShiftRng;
use serde::Serialize;

use crate::error::{AclError, Result};
use crate::fem::{Field, SystemMatrices};

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub t: f64,
}

impl State {
    pub fn zeros(dofs: usize) -> Self {
        Self {
            q: DVector::zeros(dofs),
            qdot: DVector::zeros(dofs),
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|x| x.is_finite())
    }

    fn check(&self, sys: &SystemMatrices) -> Result<()> {
        let n = sys.dofs();
        for len in [self.q.len(), self.qdot.len()] {
            if len != n {
                return Err(AclError::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(())
    }
}

/// Interpolates `value` (and `slope` for the Hermite field) at the free nodes into `out`.
pub fn interpolate_field(
    sys: &SystemMatrices,
    field: Field,
    value: impl Fn(f64) -> f64,
    slope: impl Fn(f64) -> f64,
    out: &mut DVector<f64>,
) {
    let layout = &sys.layout;
    if layout.count(field) == 0 {
        return;
    }
    for node in 1..=sys.mesh.n_elems {
        let x = sys.mesh.node(node);
        if field.is_hermite() {
            out[layout.w_value_dof(node).unwrap()] = value(x);
            out[layout.w_slope_dof(node).unwrap()] = slope(x);
        } else {
            out[layout.linear_dof(field, node).unwrap()] = value(x);
        }
    }
}

/// Seeded smooth random initial data: every field (displacement and velocity) is a random
/// combination of the first `modes` clamped-free sine shapes `sin((k - 1/2) pi x / L)`.
///
/// The same seed yields the same continuous data on every mesh, so runs on different
/// refinements start from the same functions. The generator is `XorShiftRng`.
pub fn random_smooth_state(sys: &SystemMatrices, seed: u64, modes: usize) -> State {
    let mut rng = XorShiftRng::seed_from_u64(seed);
    let length = sys.mesh.length;
    let mut state = State::zeros(sys.dofs());
    for target in 0..2 {
        for &field in [Field::V1, Field::V3, Field::W, Field::P1, Field::P3].iter() {
            let coefs: Vec<f64> = (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect();
            let wavenumber = |k: usize| (k as f64 + 0.5) * std::f64::consts::PI / length;
            let value = |x: f64| {
                coefs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * (wavenumber(k) * x).sin())
                    .sum::<f64>()
                    / modes as f64
            };
            let slope = |x: f64| {
                coefs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * wavenumber(k) * (wavenumber(k) * x).cos())
                    .sum::<f64>()
                    / modes as f64
            };
            let out = if target == 0 {
                &mut state.q
            } else {
                &mut state.qdot
            };
            interpolate_field(sys, field, value, slope, out);
        }
    }
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyBreakdown {
    /// Translational kinetic energy (plus magnetic energy of the charge fields).
    pub kinetic: f64,
    pub stretching: f64,
    pub bending: f64,
    pub shear: f64,
    /// `beta h (gamma v_x - p_x)^2` terms of the magnetic model.
    pub electric: f64,
    /// Rotary inertia term `K1 |w_x'|^2`.
    pub rotational: f64,
    pub total: f64,
}

fn quad(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    0.5 * x.dot(&(m * x))
}

pub fn energy(sys: &SystemMatrices, state: &State) -> Result<EnergyBreakdown> {
    state.check(sys)?;
    let f = &sys.forms;
    let mut e = EnergyBreakdown {
        kinetic: quad(&f.translational, &state.qdot),
        rotational: quad(&f.rotational, &state.qdot),
        stretching: quad(&f.stretching, &state.q),
        bending: quad(&f.bending, &state.q),
        shear: quad(&f.shear, &state.q),
        electric: quad(&f.electric, &state.q),
        total: 0.0,
    };
    e.total = e.kinetic + e.rotational + e.stretching + e.bending + e.shear + e.electric;
    Ok(e)
}

/// `(q'^T M q' + q^T K q) / 2` computed directly from the assembled matrices.
pub fn total_energy(sys: &SystemMatrices, q: &DVector<f64>, qdot: &DVector<f64>) -> f64 {
    quad(&sys.mass, qdot) + quad(&sys.stiffness, q)
}

/// Implicit midpoint stepper with the step matrix `M + dt/2 D + dt^2/4 K` factored once.
pub struct Stepper<'a> {
    sys: &'a SystemMatrices,
    dt: f64,
    factor: Cholesky<f64, Dyn>,
    explicit: DMatrix<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(sys: &'a SystemMatrices, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(AclError::InvalidArgument(format!(
                "time step must be positive (got {dt})"
            )));
        }
        let half = 0.5 * dt;
        let quarter = 0.25 * dt * dt;
        let implicit = &sys.mass + &sys.damping * half + &sys.stiffness * quarter;
        let explicit = &sys.mass - &sys.damping * half - &sys.stiffness * quarter;
        let factor = Cholesky::new(implicit).ok_or(AclError::SingularStepMatrix(dt))?;
        Ok(Self {
            sys,
            dt,
            factor,
            explicit,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step. With `q1 = q0 + dt/2 (v0 + v1)` eliminated, the new velocity solves
    /// `(M + dt/2 D + dt^2/4 K) v1 = (M - dt/2 D - dt^2/4 K) v0 - dt K q0`.
    pub fn advance(&self, state: &State) -> State {
        let mut rhs = &self.explicit * &state.qdot;
        rhs.gemv(-self.dt, &self.sys.stiffness, &state.q, 1.0);
        let qdot = self.factor.solve(&rhs);
        let mut q = state.q.clone();
        q.axpy(0.5 * self.dt, &state.qdot, 1.0);
        q.axpy(0.5 * self.dt, &qdot, 1.0);
        State {
            q,
            qdot,
            t: state.t + self.dt,
        }
    }
}

/// Single midpoint step. Loops should build a [`Stepper`] once instead.
pub fn step(sys: &SystemMatrices, state: &State, dt: f64) -> Result<State> {
    state.check(sys)?;
    Ok(Stepper::new(sys, dt)?.advance(state))
}

/// Velocities at the free end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryObservables {
    pub w_dot: f64,
    pub wx_dot: f64,
    pub v1_dot: f64,
    pub v3_dot: f64,
    pub p1_dot: Option<f64>,
    pub p3_dot: Option<f64>,
}

impl BoundaryObservables {
    pub fn at_tip(sys: &SystemMatrices, state: &State) -> Self {
        let l = &sys.layout;
        let tip = sys.mesh.n_elems;
        let v = |dof: Option<usize>| state.qdot[dof.unwrap()];
        let (p1_dot, p3_dot) = if l.has_charge {
            (
                Some(v(l.linear_dof(Field::P1, tip))),
                Some(v(l.linear_dof(Field::P3, tip))),
            )
        } else {
            (None, None)
        };
        Self {
            w_dot: v(l.w_value_dof(tip)),
            wx_dot: v(l.w_slope_dof(tip)),
            v1_dot: v(l.linear_dof(Field::V1, tip)),
            v3_dot: v(l.linear_dof(Field::V3, tip)),
            p1_dot,
            p3_dot,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub boundary: BoundaryObservables,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub has_charge: bool,
    pub samples: Vec<Sample>,
    pub final_state: State,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy.total).collect()
    }

    pub fn initial_energy(&self) -> f64 {
        self.samples[0].energy.total
    }

    pub fn final_energy(&self) -> f64 {
        self.samples
            .last()
            .expect("trajectory has a first sample")
            .energy
            .total
    }

    /// Writes the trajectory CSV (17 significant digits).
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(
            out,
            "t,E_total,E_kinetic,E_stretch,E_bend,E_shear,E_electric,E_rot,w_dot_L,wx_dot_L,v1_dot_L,v3_dot_L"
        )?;
        if self.has_charge {
            write!(out, ",p1_dot_L,p3_dot_L")?;
        }
        writeln!(out)?;
        for s in &self.samples {
            let e = &s.energy;
            let b = &s.boundary;
            let mut row = vec![
                s.t,
                e.total,
                e.kinetic,
                e.stretching,
                e.bending,
                e.shear,
                e.electric,
                e.rotational,
                b.w_dot,
                b.wx_dot,
                b.v1_dot,
                b.v3_dot,
            ];
            if self.has_charge {
                row.push(b.p1_dot.unwrap_or(f64::NAN));
                row.push(b.p3_dot.unwrap_or(f64::NAN));
            }
            let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Integrates from `initial` up to `initial.t + horizon`, recording a sample every
/// `sample_every` steps and at the end.
///
/// The number of steps is `round(horizon / dt)`.
pub fn simulate(
    sys: &SystemMatrices,
    initial: &State,
    dt: f64,
    horizon: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    initial.check(sys)?;
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(AclError::InvalidArgument(format!(
            "horizon must be nonnegative (got {horizon})"
        )));
    }
    if sample_every == 0 {
        return Err(AclError::InvalidArgument(
            "sample_every must be at least 1".into(),
        ));
    }
    let stepper = Stepper::new(sys, dt)?;
    let n_steps = (horizon / dt).round() as usize;
    let t0 = initial.t;
    let record = |state: &State| -> Result<Sample> {
        Ok(Sample {
            t: state.t,
            energy: energy(sys, state)?,
            boundary: BoundaryObservables::at_tip(sys, state),
        })
    };

    let mut samples = vec![record(initial)?];
    let mut state = initial.clone();
    for k in 1..=n_steps {
        state = stepper.advance(&state);
        // Accumulating dt drifts; the clock is recomputed from the step index.
        state.t = t0 + k as f64 * dt;
        if k % sample_every == 0 || k == n_steps {
            if !state.is_finite() {
                return Err(AclError::InvalidArgument(format!(
                    "state became non-finite at t = {}",
                    state.t
                )));
            }
            samples.push(record(&state)?);
        }
    }
    Ok(Trajectory {
        has_charge: sys.layout.has_charge,
        samples,
        final_state: state,
    })
}

/// Dense-oracle size limit (dofs).
pub const DENSE_ORACLE_LIMIT: usize = 400;

/// First-order generator `[[0, I], [-M^{-1} K, -M^{-1} D]]`.
pub fn first_order_generator(sys: &SystemMatrices) -> Result<DMatrix<f64>> {
    let n = sys.dofs();
    let chol =
        sys.mass.clone().cholesky().ok_or_else(|| {
            AclError::InvalidArgument("mass matrix is not positive definite".into())
        })?;
    let mk = chol.solve(&sys.stiffness);
    let md = chol.solve(&sys.damping);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-mk));
    a.view_mut((n, n), (n, n)).copy_from(&(-md));
    Ok(a)
}

/// Reference solution `z(t) = exp(t A) z0` by dense scaling and squaring.
pub fn expm_oracle(sys: &SystemMatrices, initial: &State, t: f64) -> Result<State> {
    initial.check(sys)?;
    let n = sys.dofs();
    if n > DENSE_ORACLE_LIMIT {
        return Err(AclError::TooLargeForDense {
            dofs: n,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    let a = first_order_generator(sys)? * t;
    let propagator = a.exp();
    let mut z0 = DVector::zeros(2 * n);
    z0.rows_mut(0, n).copy_from(&initial.q);
    z0.rows_mut(n, n).copy_from(&initial.qdot);
    let z = propagator * z0;
    Ok(State {
        q: z.rows(0, n).into_owned(),
        qdot: z.rows(n, n).into_owned(),
        t: initial.t + t,
    })
}

/// Energy norm of the difference of two states.
pub fn energy_distance(sys: &SystemMatrices, a: &State, b: &State) -> f64 {
    (2.0 * total_energy(sys, &(&a.q - &b.q), &(&a.qdot - &b.qdot))).sqrt()
}

pub fn energy_norm(sys: &SystemMatrices, s: &State) -> f64 {
    (2.0 * total_energy(sys, &s.q, &s.qdot)).sqrt()
}
