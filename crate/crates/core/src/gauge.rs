//! External potentials, Coulomb gauge fixing and curl inversion on Ω̃.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::calculus::{
    curl, curl_adjoint, divergence, gradient, hole_flux, hole_vertex_count, CellField, ComplexField,
    NodeField, VectorField,
};
use crate::domain::{Domain, Region, VertexClass, NONE};
use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, BandCholesky, BandMatrix};

/// Relative residual for the Poisson solves.
pub const POISSON_TOL: f64 = 1e-12;
pub const POISSON_MAX_ITER: usize = 100_000;

/// Named applied-field profiles. Fluxes are in units of 2π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldProfile {
    Zero,
    /// `H ≡ strength` on Ω̃.
    UniformEverywhere { strength: f64 },
    /// Uniform field inside each listed hole, normalized so the discrete flux
    /// `(1/2π)∫_hole H` equals the given value exactly.
    UniformInHole { fluxes: Vec<f64> },
    /// `H = strength` for `inner_radius <= |x - center| <= outer_radius`.
    AnnularRing {
        center: [f64; 2],
        inner_radius: f64,
        outer_radius: f64,
        strength: f64,
    },
    /// Explicit values at every grid vertex.
    CustomGrid { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalField {
    pub profile: FieldProfile,
    /// `H_e` at the grid vertices; only Ω̃-interior vertices enter the model.
    pub values: NodeField,
}

impl ExternalField {
    pub fn sample(profile: &FieldProfile, d: &Domain) -> Result<Self> {
        let mut values = NodeField::zeros(d);
        match profile {
            FieldProfile::Zero => {}
            FieldProfile::UniformEverywhere { strength } => {
                values.values.iter_mut().for_each(|v| *v = *strength);
            }
            FieldProfile::UniformInHole { fluxes } => {
                if fluxes.len() > d.hole_count() {
                    return Err(Error::Invalid(format!(
                        "{} hole fluxes given for {} holes",
                        fluxes.len(),
                        d.hole_count()
                    )));
                }
                for (k, flux) in fluxes.iter().enumerate() {
                    let count = hole_vertex_count(d, k);
                    let strength = 2.0 * PI * flux / (count as f64 * d.cell_weight());
                    for &v in d.interior_vertices() {
                        if d.vertex_class(v) == VertexClass::Hole(k) {
                            values.values[v] = strength;
                        }
                    }
                }
            }
            FieldProfile::AnnularRing {
                center,
                inner_radius,
                outer_radius,
                strength,
            } => {
                for (v, x) in values.values.iter_mut().enumerate() {
                    let p = d.vertex_position(v);
                    let r = (p[0] - center[0]).hypot(p[1] - center[1]);
                    if r >= *inner_radius && r <= *outer_radius {
                        *x = *strength;
                    }
                }
            }
            FieldProfile::CustomGrid { values: given } => {
                if given.len() != d.n_vertices() {
                    return Err(Error::Invalid(format!(
                        "custom field has {} values, grid has {} vertices",
                        given.len(),
                        d.n_vertices()
                    )));
                }
                values.values.clone_from(given);
            }
        }
        if values.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("external field has non-finite values".into()));
        }
        Ok(Self {
            profile: profile.clone(),
            values,
        })
    }

    /// `∫_{Ω̃} H_e²`
    pub fn sq_integral(&self, d: &Domain) -> f64 {
        self.values.interior_sq_integral(d)
    }

    /// Largest `|H_e|` over vertices whose four cells lie in Ω.
    pub fn max_in_omega(&self, d: &Domain) -> f64 {
        d.interior_vertices()
            .iter()
            .filter(|&&v| d.vertex_class(v) == VertexClass::OmegaInterior)
            .map(|&v| self.values.values[v].abs())
            .fold(0.0, f64::max)
    }
}

/// Five-point Dirichlet Laplacian `−Δ_D` on the Ω̃-interior vertices
/// (compact ordering of [`Domain::interior_vertices`]).
#[derive(Clone, Debug)]
pub struct DirichletLaplacian {
    pub matrix: BandMatrix<f64>,
    chol: BandCholesky<f64>,
}

impl DirichletLaplacian {
    pub fn new(d: &Domain) -> Result<Self> {
        let matrix = dirichlet_matrix(d);
        let chol = matrix.cholesky()?;
        Ok(Self { matrix, chol })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.chol.solve(b)
    }
}

pub fn dirichlet_matrix(d: &Domain) -> BandMatrix<f64> {
    let iv = d.interior_vertices();
    let h2 = d.h * d.h;
    let w = d.nx + 1;
    let mut trip = Vec::with_capacity(5 * iv.len());
    for (k, &v) in iv.iter().enumerate() {
        trip.push((k, k, 4.0 / h2));
        for n in [v - 1, v + 1, v - w, v + w] {
            let m = d.interior_index(n);
            if m != NONE {
                trip.push((k, m, -1.0 / h2));
            }
        }
    }
    BandMatrix::from_triplets(iv.len(), &trip)
}

/// Compact interior-vertex vector from a node field.
pub fn gather_interior(d: &Domain, f: &NodeField) -> Vec<f64> {
    d.interior_vertices().iter().map(|&v| f.values[v]).collect()
}

/// Node field that is zero off the Ω̃-interior vertices.
pub fn scatter_interior(d: &Domain, x: &[f64]) -> NodeField {
    let mut f = NodeField::zeros(d);
    for (&v, &val) in d.interior_vertices().iter().zip(x) {
        f.values[v] = val;
    }
    f
}

/// Solves `−Δ_D ψ = b` on the Ω̃-interior vertices by conjugate gradients.
pub fn dirichlet_solve_cg(d: &Domain, b: &NodeField, tol: f64) -> Result<NodeField> {
    let m = dirichlet_matrix(d);
    let rhs = gather_interior(d, b);
    let mut x = vec![0.0; rhs.len()];
    type NoPc = fn(&[f64], &mut [f64]);
    type NoProj = fn(&mut [f64]);
    let out = conjugate_gradient(
        |p: &[f64], y: &mut [f64]| y.copy_from_slice(&m.matvec(p)),
        None::<NoPc>,
        None::<NoProj>,
        &rhs,
        &mut x,
        tol,
        POISSON_MAX_ITER,
    );
    if !out.converged {
        return Err(Error::NonConvergence {
            solver: "Dirichlet Poisson CG",
            iterations: out.iterations,
            residual: out.final_residual(),
            history: out.history,
        });
    }
    Ok(scatter_interior(d, &x))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugeData {
    pub a_e: VectorField,
    pub h_e: NodeField,
    /// stream function with `A_e = rot* ψ`
    pub psi: NodeField,
    /// `(1/2π)∫_{hole} H_e` per hole
    pub hole_fluxes: Vec<f64>,
    /// `(1/2π)∮ A_e·dl` around each hole, from the discrete curl of `A_e`
    pub hole_circulations: Vec<f64>,
    /// max |div A_e| over Ω̃ cells
    pub div_residual: f64,
    /// max |A_e·ν| over ∂Ω̃ faces
    pub normal_residual: f64,
}

impl GaugeData {
    /// Gauge data without field (`A_e = 0`).
    pub fn zero(d: &Domain) -> Self {
        Self {
            a_e: VectorField::zeros(d),
            h_e: NodeField::zeros(d),
            psi: NodeField::zeros(d),
            hole_fluxes: vec![0.0; d.hole_count()],
            hole_circulations: vec![0.0; d.hole_count()],
            div_residual: 0.0,
            normal_residual: 0.0,
        }
    }

    /// `(A_e + ∇θ)`; the matching order parameter transform is [`gauge_transform_u`].
    pub fn transformed(&self, d: &Domain, theta: &CellField) -> Self {
        let mut out = self.clone();
        out.a_e = &self.a_e + &gradient(d, theta);
        out
    }
}

/// `u e^{iθ}`
pub fn gauge_transform_u(d: &Domain, u: &ComplexField, theta: &CellField) -> ComplexField {
    ComplexField {
        values: u
            .values
            .iter()
            .zip(d.omega_cells())
            .map(|(v, &c)| v * Complex64::from_polar(1.0, theta.values[c]))
            .collect(),
    }
}

fn hole_circulations(d: &Domain, a: &VectorField) -> Vec<f64> {
    let r = curl(d, a);
    (0..d.hole_count())
        .map(|k| hole_flux(d, &r, k).expect("hole id in range"))
        .collect()
}

fn coulomb_residuals(d: &Domain, a: &VectorField, region: Region) -> (f64, f64) {
    let dv = divergence(d, a);
    let div = (0..d.n_cells())
        .filter(|&c| d.in_region(c, region))
        .map(|c| dv.values[c].abs())
        .fold(0.0, f64::max);
    let normal = d
        .region_boundary_faces(region)
        .iter()
        .map(|f| a.values[f.face].abs())
        .fold(0.0, f64::max);
    (div, normal)
}

/// `A_e = rot* ψ` with `−Δ_D ψ = H_e` on Ω̃, so that `rot A_e = H_e` there.
pub fn external_potential(field: &ExternalField, d: &Domain) -> Result<GaugeData> {
    let psi = dirichlet_solve_cg(d, &field.values.restrict_to_interior(d), POISSON_TOL)?;
    let a_e = curl_adjoint(d, &psi);
    let (div_residual, normal_residual) = coulomb_residuals(d, &a_e, Region::OmegaTilde);
    let hole_fluxes = (0..d.hole_count())
        .map(|k| hole_flux(d, &field.values, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(GaugeData {
        hole_circulations: hole_circulations(d, &a_e),
        a_e,
        h_e: field.values.clone(),
        psi,
        hole_fluxes,
        div_residual,
        normal_residual,
    })
}

/// Coulomb projection on `region` (Ω or Ω̃): the normal component is removed on
/// the region boundary and a Neumann problem `Δθ = −div A` fixes the divergence.
/// Faces outside the region are zeroed.
pub fn coulomb_project(a: &VectorField, d: &Domain, region: Region) -> Result<VectorField> {
    let cells: Vec<usize> = (0..d.n_cells()).filter(|&c| d.in_region(c, region)).collect();
    let mut index = vec![NONE; d.n_cells()];
    for (k, &c) in cells.iter().enumerate() {
        index[c] = k;
    }
    let inner_face = |f: usize| {
        let (lo, hi) = d.face_cells(f);
        matches!((lo, hi), (Some(a), Some(b)) if index[a] != NONE && index[b] != NONE)
    };
    let mut base = a.clone();
    for f in 0..d.n_faces() {
        if !inner_face(f) {
            base.values[f] = 0.0;
        }
    }
    // rhs = div(base) on region cells; operator = Neumann Laplacian −div grad
    let dv = divergence(d, &base);
    let rhs: Vec<f64> = cells.iter().map(|&c| dv.values[c]).collect();
    let h2 = d.h * d.h;
    let neighbors: Vec<Vec<usize>> = cells
        .iter()
        .map(|&c| {
            let (i, j) = (c % d.nx, c / d.nx);
            let mut n = Vec::with_capacity(4);
            if i > 0 {
                n.push(c - 1);
            }
            if i + 1 < d.nx {
                n.push(c + 1);
            }
            if j > 0 {
                n.push(c - d.nx);
            }
            if j + 1 < d.ny {
                n.push(c + d.nx);
            }
            n.into_iter().map(|m| index[m]).filter(|&m| m != NONE).collect()
        })
        .collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        for (k, nb) in neighbors.iter().enumerate() {
            let mut s = 0.0;
            for &m in nb {
                s += x[k] - x[m];
            }
            y[k] = s / h2;
        }
    };
    let mean_free = |v: &mut [f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
    };
    type NoPc = fn(&[f64], &mut [f64]);
    let mut theta = vec![0.0; cells.len()];
    let mut rhs = rhs;
    mean_free(&mut rhs);
    let out = conjugate_gradient(
        apply,
        None::<NoPc>,
        Some(mean_free),
        &rhs,
        &mut theta,
        1e-12,
        POISSON_MAX_ITER,
    );
    if !out.converged && out.final_residual() > 1e-10 {
        return Err(Error::NonConvergence {
            solver: "Neumann Poisson CG",
            iterations: out.iterations,
            residual: out.final_residual(),
            history: out.history,
        });
    }
    // −div grad θ = div base  ⇒  div(base + grad θ) = 0
    let mut t = CellField::zeros(d);
    for (k, &c) in cells.iter().enumerate() {
        t.values[c] = theta[k];
    }
    let g = gradient(d, &t);
    let mut outv = base;
    for f in 0..d.n_faces() {
        if inner_face(f) {
            outv.values[f] += g.values[f];
        }
    }
    Ok(outv)
}

/// Transversal gauge about the disk `D(center, radius)`:
/// `a(x) = g(x) (−(y − c_y), x − c_x)` with `g(x) = ∫₀¹ s b(c + s(x − c)) ds`.
/// `b` is interpolated bilinearly from the vertices. With `check_support`,
/// any nonzero vertex value inside the disk is rejected.
pub fn transversal_gauge(
    b: &NodeField,
    d: &Domain,
    center: [f64; 2],
    radius: f64,
    check_support: bool,
) -> Result<VectorField> {
    if check_support {
        for v in 0..d.n_vertices() {
            let p = d.vertex_position(v);
            if (p[0] - center[0]).hypot(p[1] - center[1]) < radius && b.values[v] != 0.0 {
                return Err(Error::Invalid(format!(
                    "field is nonzero at ({:.4}, {:.4}) inside the gauge disk",
                    p[0], p[1]
                )));
            }
        }
    }
    let (nodes, weights) = gauss_legendre_unit(48);
    let interp = |p: [f64; 2]| -> f64 {
        let fx = ((p[0] - d.origin[0]) / d.h).clamp(0.0, d.nx as f64);
        let fy = ((p[1] - d.origin[1]) / d.h).clamp(0.0, d.ny as f64);
        let i = (fx.floor() as usize).min(d.nx - 1);
        let j = (fy.floor() as usize).min(d.ny - 1);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let f = |a: usize, c: usize| b.values[d.vertex(a, c)];
        (1.0 - tx) * (1.0 - ty) * f(i, j)
            + tx * (1.0 - ty) * f(i + 1, j)
            + (1.0 - tx) * ty * f(i, j + 1)
            + tx * ty * f(i + 1, j + 1)
    };
    let nxf = d.n_xfaces();
    let values = (0..d.n_faces())
        .map(|f| {
            let p = d.face_midpoint(f);
            let r = [p[0] - center[0], p[1] - center[1]];
            let g: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&s, &w)| w * s * interp([center[0] + s * r[0], center[1] + s * r[1]]))
                .sum();
            if f < nxf {
                -r[1] * g
            } else {
                r[0] * g
            }
        })
        .collect();
    Ok(VectorField { values })
}

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        // Newton on P_n starting from the Chebyshev-like guess
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Solves `rot ã = b`, `div ã = 0`, `ã·ν = 0` on Ω̃ as `ã = rot* ψ`, `−Δ_D ψ = b`.
pub fn curl_inverse(b: &NodeField, d: &Domain) -> Result<VectorField> {
    let psi = dirichlet_solve_cg(d, &b.restrict_to_interior(d), POISSON_TOL)?;
    Ok(curl_adjoint(d, &psi))
}
