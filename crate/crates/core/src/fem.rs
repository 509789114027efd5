//! Finite element discretization of the beam models on a uniform mesh.
//!
//! Longitudinal displacements `v1`, `v3` and charges `p1`, `p3` use piecewise-linear elements;
//! the transverse displacement `w` uses Hermite cubics with value and slope degrees of freedom.
//! The clamped end `x = 0` is eliminated, so every field starts at node 1.
//!
//! The assembled system is `M q'' + D q' + K q = 0`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::params::{derive_constants, validate_config, BeamConfig, DerivedConstants, Model};

/// Uniform mesh of `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub n_elems: usize,
    pub length: f64,
}

impl Mesh {
    pub fn uniform(length: f64, n_elems: usize) -> Self {
        assert!(n_elems > 0, "mesh needs at least one element");
        Self { n_elems, length }
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_elems as f64
    }

    /// Node coordinate; the last node sits exactly at `L`.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_elems {
            self.length
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_elems).map(|i| self.node(i)).collect()
    }
}

/// Discretized unknown fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    V1,
    V3,
    W,
    P1,
    P3,
}

impl Field {
    pub fn is_hermite(&self) -> bool {
        matches!(self, Field::W)
    }
}

/// Placement of each field in the global dof vector: `v1 | v3 | w | p1 | p3`.
///
/// Linear fields own one dof per free node; `w` owns `(value, slope)` pairs per free node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub n_elems: usize,
    pub has_charge: bool,
}

impl DofLayout {
    pub fn new(n_elems: usize, has_charge: bool) -> Self {
        Self {
            n_elems,
            has_charge,
        }
    }

    pub fn fields(&self) -> &'static [Field] {
        if self.has_charge {
            &[Field::V1, Field::V3, Field::W, Field::P1, Field::P3]
        } else {
            &[Field::V1, Field::V3, Field::W]
        }
    }

    pub fn count(&self, field: Field) -> usize {
        match field {
            Field::W => 2 * self.n_elems,
            Field::P1 | Field::P3 if !self.has_charge => 0,
            _ => self.n_elems,
        }
    }

    pub fn offset(&self, field: Field) -> usize {
        let n = self.n_elems;
        match field {
            Field::V1 => 0,
            Field::V3 => n,
            Field::W => 2 * n,
            Field::P1 => 4 * n,
            Field::P3 => 5 * n,
        }
    }

    pub fn total(&self) -> usize {
        if self.has_charge {
            6 * self.n_elems
        } else {
            4 * self.n_elems
        }
    }

    /// Dof of a linear field at `node`; `None` for the clamped node.
    pub fn linear_dof(&self, field: Field, node: usize) -> Option<usize> {
        debug_assert!(!field.is_hermite());
        (node > 0).then(|| self.offset(field) + node - 1)
    }

    pub fn w_value_dof(&self, node: usize) -> Option<usize> {
        (node > 0).then(|| self.offset(Field::W) + 2 * (node - 1))
    }

    pub fn w_slope_dof(&self, node: usize) -> Option<usize> {
        (node > 0).then(|| self.offset(Field::W) + 2 * (node - 1) + 1)
    }
}

/// The quadratic forms making up the energy, assembled separately so the energy can be
/// split by mechanism. Magnetic kinetic energy of the charge fields is part of `translational`.
#[derive(Debug, Clone)]
pub struct EnergyForms {
    pub translational: DMatrix<f64>,
    pub rotational: DMatrix<f64>,
    pub stretching: DMatrix<f64>,
    pub bending: DMatrix<f64>,
    pub shear: DMatrix<f64>,
    pub electric: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub model: Model,
    pub mesh: Mesh,
    pub layout: DofLayout,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub forms: EnergyForms,
}

impl SystemMatrices {
    pub fn dofs(&self) -> usize {
        self.layout.total()
    }
}

// 4-point Gauss-Legendre rule on [0, 1]; exact up to degree 7.
const GAUSS_POINTS: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_87,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

/// Values of the two linear shape functions and their x-derivatives at `xi`.
fn linear_basis(xi: f64, h: f64) -> ([f64; 2], [f64; 2]) {
    ([1.0 - xi, xi], [-1.0 / h, 1.0 / h])
}

/// Hermite cubic basis ordered `(w_a, w_a', w_b, w_b')`: values, first and second x-derivatives.
fn hermite_basis(xi: f64, h: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let xi2 = xi * xi;
    let xi3 = xi2 * xi;
    let val = [
        1.0 - 3.0 * xi2 + 2.0 * xi3,
        h * (xi - 2.0 * xi2 + xi3),
        3.0 * xi2 - 2.0 * xi3,
        h * (-xi2 + xi3),
    ];
    let d1 = [
        (-6.0 * xi + 6.0 * xi2) / h,
        1.0 - 4.0 * xi + 3.0 * xi2,
        (6.0 * xi - 6.0 * xi2) / h,
        -2.0 * xi + 3.0 * xi2,
    ];
    let d2 = [
        (-6.0 + 12.0 * xi) / (h * h),
        (-4.0 + 6.0 * xi) / h,
        (6.0 - 12.0 * xi) / (h * h),
        (-2.0 + 6.0 * xi) / h,
    ];
    (val, d1, d2)
}

/// A linear functional of the dof vector at one quadrature point, as `(dof, coefficient)` terms.
type PointFunctional = Vec<(usize, f64)>;

/// Adds `coef * f g^T + coef * g f^T` (or `coef f f^T` when both are the same functional).
fn add_gram(mat: &mut DMatrix<f64>, coef: f64, f: &PointFunctional) {
    for &(i, a) in f {
        for &(j, b) in f {
            mat[(i, j)] += coef * a * b;
        }
    }
}

struct ElementPoint {
    weight: f64,
    lin_val: [f64; 2],
    lin_dx: [f64; 2],
    herm_val: [f64; 4],
    herm_dx: [f64; 4],
    herm_dxx: [f64; 4],
}

fn element_points(h: f64) -> impl Iterator<Item = ElementPoint> {
    GAUSS_POINTS
        .iter()
        .zip(GAUSS_WEIGHTS)
        .map(move |(&xi, wt)| {
            let (lin_val, lin_dx) = linear_basis(xi, h);
            let (herm_val, herm_dx, herm_dxx) = hermite_basis(xi, h);
            ElementPoint {
                weight: wt * h,
                lin_val,
                lin_dx,
                herm_val,
                herm_dx,
                herm_dxx,
            }
        })
}

/// Accumulates functionals of linear fields (`field` sampled with `basis` on element `e`).
fn linear_terms(
    layout: &DofLayout,
    field: Field,
    e: usize,
    basis: &[f64; 2],
    scale: f64,
    out: &mut PointFunctional,
) {
    for (a, &phi) in basis.iter().enumerate() {
        if let Some(dof) = layout.linear_dof(field, e + a) {
            out.push((dof, scale * phi));
        }
    }
}

fn hermite_terms(
    layout: &DofLayout,
    e: usize,
    basis: &[f64; 4],
    scale: f64,
    out: &mut PointFunctional,
) {
    let dofs = [
        layout.w_value_dof(e),
        layout.w_slope_dof(e),
        layout.w_value_dof(e + 1),
        layout.w_slope_dof(e + 1),
    ];
    for (dof, &phi) in dofs.iter().zip(basis) {
        if let Some(dof) = dof {
            out.push((*dof, scale * phi));
        }
    }
}

/// Which pieces of the model to assemble.
#[derive(Debug, Clone, Copy)]
struct AssemblyPlan {
    shear: bool,
    charge: bool,
}

fn assemble_with(config: &BeamConfig, mesh: &Mesh, plan: AssemblyPlan) -> Result<SystemMatrices> {
    let config = validate_config(config)?;
    let constants = derive_constants(&config)?;
    let layout = DofLayout::new(mesh.n_elems, plan.charge);
    let n = layout.total();
    let zeros = || DMatrix::<f64>::zeros(n, n);
    let mut forms = EnergyForms {
        translational: zeros(),
        rotational: zeros(),
        stretching: zeros(),
        bending: zeros(),
        shear: zeros(),
        electric: zeros(),
    };

    let layers = [
        (Field::V1, Field::P1, &config.layer1),
        (Field::V3, Field::P3, &config.layer3),
    ];
    let h = mesh.spacing();
    let mut f = PointFunctional::with_capacity(12);

    for e in 0..mesh.n_elems {
        for pt in element_points(h) {
            let wt = pt.weight;
            for &(v_field, p_field, layer) in &layers {
                f.clear();
                linear_terms(&layout, v_field, e, &pt.lin_val, 1.0, &mut f);
                add_gram(&mut forms.translational, wt * layer.rho * layer.h, &f);

                f.clear();
                linear_terms(&layout, v_field, e, &pt.lin_dx, 1.0, &mut f);
                add_gram(&mut forms.stretching, wt * layer.alpha1 * layer.h, &f);

                if plan.charge {
                    let mu = layer.mu.expect("validated magnetic layer");
                    f.clear();
                    linear_terms(&layout, p_field, e, &pt.lin_val, 1.0, &mut f);
                    add_gram(&mut forms.translational, wt * mu * layer.h, &f);

                    // beta h (gamma v_x - p_x)^2
                    f.clear();
                    linear_terms(&layout, v_field, e, &pt.lin_dx, layer.gamma, &mut f);
                    linear_terms(&layout, p_field, e, &pt.lin_dx, -1.0, &mut f);
                    add_gram(&mut forms.electric, wt * layer.beta * layer.h, &f);
                }
            }

            f.clear();
            hermite_terms(&layout, e, &pt.herm_val, 1.0, &mut f);
            add_gram(&mut forms.translational, wt * constants.m, &f);

            f.clear();
            hermite_terms(&layout, e, &pt.herm_dx, 1.0, &mut f);
            add_gram(&mut forms.rotational, wt * constants.k1, &f);

            f.clear();
            hermite_terms(&layout, e, &pt.herm_dxx, 1.0, &mut f);
            add_gram(&mut forms.bending, wt * constants.k2, &f);

            if plan.shear {
                shear_functional(&layout, &constants, e, &pt, &mut f);
                add_gram(&mut forms.shear, wt * constants.shear_coef, &f);
            }
        }
    }

    let damping = boundary_damping(&config, &layout, mesh.n_elems);
    let mass = &forms.translational + &forms.rotational;
    let stiffness = &forms.stretching + &forms.bending + &forms.shear + &forms.electric;
    Ok(SystemMatrices {
        model: config.model,
        mesh: *mesh,
        layout,
        mass,
        stiffness,
        damping,
        forms,
    })
}

/// `-v1 + v3 + H w_x`, the core shear angle times `h2`.
fn shear_functional(
    layout: &DofLayout,
    constants: &DerivedConstants,
    e: usize,
    pt: &ElementPoint,
    f: &mut PointFunctional,
) {
    f.clear();
    linear_terms(layout, Field::V1, e, &pt.lin_val, -1.0, f);
    linear_terms(layout, Field::V3, e, &pt.lin_val, 1.0, f);
    hermite_terms(layout, e, &pt.herm_dx, constants.lever_arm, f);
}

fn boundary_damping(config: &BeamConfig, layout: &DofLayout, tip: usize) -> DMatrix<f64> {
    let n = layout.total();
    let mut d = DMatrix::zeros(n, n);
    let g = &config.gains;
    let mut put = |dof: Option<usize>, value: f64| {
        let dof = dof.expect("tip node is never clamped");
        d[(dof, dof)] += value;
    };
    put(layout.w_slope_dof(tip), g.k1);
    put(layout.w_value_dof(tip), g.k2);
    if layout.has_charge {
        // Voltage feedback on the electrode currents: V = s p'(L) / (2 h).
        put(
            layout.linear_dof(Field::P1, tip),
            g.s1 / (2.0 * config.layer1.h),
        );
        put(
            layout.linear_dof(Field::P3, tip),
            g.s3 / (2.0 * config.layer3.h),
        );
    } else {
        put(layout.linear_dof(Field::V1, tip), g.s1);
        put(layout.linear_dof(Field::V3, tip), g.s3);
    }
    d
}

/// Electrostatic model: stretching, Rayleigh bending and core shear coupling.
pub fn assemble_electrostatic(config: &BeamConfig, mesh: &Mesh) -> Result<SystemMatrices> {
    let config = config.with_model(Model::Electrostatic);
    assemble_with(
        &config,
        mesh,
        AssemblyPlan {
            shear: true,
            charge: false,
        },
    )
}

/// Magnetic model: adds the two charge fields, their magnetic inertia and the piezoelectric
/// coupling; the feedback acts on the electrode currents and on the bending end.
pub fn assemble_magnetic(config: &BeamConfig, mesh: &Mesh) -> Result<SystemMatrices> {
    let config = config.with_model(Model::Magnetic);
    assemble_with(
        &config,
        mesh,
        AssemblyPlan {
            shear: true,
            charge: true,
        },
    )
}

/// Electrostatic model with the shear coupling dropped entirely.
pub fn assemble_decoupled(config: &BeamConfig, mesh: &Mesh) -> Result<SystemMatrices> {
    let config = config.with_model(Model::Decoupled);
    assemble_with(
        &config,
        mesh,
        AssemblyPlan {
            shear: false,
            charge: false,
        },
    )
}

/// Assembles whichever model `config.model` names.
pub fn assemble(config: &BeamConfig, mesh: &Mesh) -> Result<SystemMatrices> {
    match config.model {
        Model::Electrostatic => assemble_electrostatic(config, mesh),
        Model::Magnetic => assemble_magnetic(config, mesh),
        Model::Decoupled => assemble_decoupled(config, mesh),
    }
}

/// Gram matrix of `(G2/h2) int (-v1 + v3 + H w_x)(.)` on the electrostatic layout, so that
/// the coupled stiffness equals the decoupled stiffness plus this matrix.
pub fn coupling_matrix(config: &BeamConfig, mesh: &Mesh) -> Result<DMatrix<f64>> {
    let config = validate_config(config)?;
    let constants = derive_constants(&config)?;
    let layout = DofLayout::new(mesh.n_elems, false);
    let n = layout.total();
    let mut out = DMatrix::zeros(n, n);
    let mut f = PointFunctional::new();
    for e in 0..mesh.n_elems {
        for pt in element_points(mesh.spacing()) {
            shear_functional(&layout, &constants, e, &pt, &mut f);
            add_gram(&mut out, pt.weight * constants.shear_coef, &f);
        }
    }
    Ok(out)
}

/// Writes the nonzero entries as `row col value` triplets after a
/// `# acl-matrix v1 <name> <nrows> <ncols>` header line.
pub fn write_matrix_triplets<W: Write>(
    out: &mut W,
    name: &str,
    mat: &DMatrix<f64>,
) -> std::io::Result<()> {
    writeln!(
        out,
        "# acl-matrix v1 {} {} {}",
        name,
        mat.nrows(),
        mat.ncols()
    )?;
    for j in 0..mat.ncols() {
        for i in 0..mat.nrows() {
            let v = mat[(i, j)];
            if v != 0.0 {
                writeln!(out, "{} {} {:.16e}", i, j, v)?;
            }
        }
    }
    Ok(())
}
