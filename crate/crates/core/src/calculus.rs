//! Staggered discrete calculus and link variables.
//!
//! Scalars live at cell centers ([`CellField`], [`ComplexField`]), vector
//! components on faces ([`VectorField`]) and curls at vertices ([`NodeField`]).
//! All inner products carry the weight `h²` per entry.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use crate::domain::{Domain, VertexClass};
use crate::error::{Error, Result};

/// Order parameter sampled on the Ω cells, in [`Domain::omega_cells`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexField {
    pub values: Vec<Complex64>,
}

/// Face-based vector field on the whole grid (x-faces, then y-faces).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub values: Vec<f64>,
}

/// Scalar field on grid vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeField {
    pub values: Vec<f64>,
}

/// Scalar field on all grid cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellField {
    pub values: Vec<f64>,
}

impl ComplexField {
    pub fn zeros(d: &Domain) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); d.n_omega()],
        }
    }

    pub fn from_fn(d: &Domain, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        Self {
            values: (0..d.n_omega()).map(|k| f(d.omega_center(k))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `h² Σ conj(self) other`
    pub fn inner(&self, other: &Self, d: &Domain) -> Complex64 {
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * d.cell_weight()
    }

    pub fn norm(&self, d: &Domain) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * d.cell_weight()).sqrt()
    }

    /// `h² Σ |u|⁴`
    pub fn quartic(&self, d: &Domain) -> f64 {
        self.values.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() * d.cell_weight()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn axpy(&mut self, a: Complex64, x: &Self) {
        for (y, x) in self.values.iter_mut().zip(&x.values) {
            *y += a * x;
        }
    }

    /// Normalizes to unit weighted L² norm.
    pub fn normalized(&self, d: &Domain) -> Self {
        let n = self.norm(d);
        self.scale(Complex64::new(1.0 / n, 0.0))
    }
}

impl Add for &ComplexField {
    type Output = ComplexField;
    fn add(self, o: &ComplexField) -> ComplexField {
        ComplexField {
            values: self.values.iter().zip(&o.values).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexField {
    type Output = ComplexField;
    fn sub(self, o: &ComplexField) -> ComplexField {
        ComplexField {
            values: self.values.iter().zip(&o.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<f64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, s: f64) -> ComplexField {
        ComplexField {
            values: self.values.iter().map(|a| a * s).collect(),
        }
    }
}

impl Neg for &ComplexField {
    type Output = ComplexField;
    fn neg(self) -> ComplexField {
        self * -1.0
    }
}

macro_rules! real_field {
    ($t:ident) => {
        impl $t {
            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            /// `h² Σ self·other`
            pub fn inner(&self, other: &Self, d: &Domain) -> f64 {
                self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
                    * d.cell_weight()
            }

            pub fn norm(&self, d: &Domain) -> f64 {
                self.inner(self, d).sqrt()
            }

            pub fn max_abs(&self) -> f64 {
                self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
            }

            pub fn scale(&self, s: f64) -> Self {
                Self {
                    values: self.values.iter().map(|v| v * s).collect(),
                }
            }

            pub fn axpy(&mut self, a: f64, x: &Self) {
                for (y, x) in self.values.iter_mut().zip(&x.values) {
                    *y += a * x;
                }
            }
        }

        impl Add for &$t {
            type Output = $t;
            fn add(self, o: &$t) -> $t {
                $t {
                    values: self.values.iter().zip(&o.values).map(|(a, b)| a + b).collect(),
                }
            }
        }

        impl Sub for &$t {
            type Output = $t;
            fn sub(self, o: &$t) -> $t {
                $t {
                    values: self.values.iter().zip(&o.values).map(|(a, b)| a - b).collect(),
                }
            }
        }
    };
}

real_field!(VectorField);
real_field!(NodeField);
real_field!(CellField);

impl VectorField {
    pub fn zeros(d: &Domain) -> Self {
        Self {
            values: vec![0.0; d.n_faces()],
        }
    }

    /// Samples the x-component at x-face midpoints and the y-component at y-face midpoints.
    pub fn from_fn(d: &Domain, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let nxf = d.n_xfaces();
        Self {
            values: (0..d.n_faces())
                .map(|k| {
                    let v = f(d.face_midpoint(k));
                    if k < nxf {
                        v[0]
                    } else {
                        v[1]
                    }
                })
                .collect(),
        }
    }

    /// Zeroes every face not strictly inside the Ω̃ cell set
    /// (faces on ∂Ω̃ carry the normal component and are cleared too).
    pub fn restrict_to_filled(&self, d: &Domain) -> Self {
        let mut out = self.clone();
        for (f, v) in out.values.iter_mut().enumerate() {
            let (a, b) = d.face_cells(f);
            let inside = |c: Option<usize>| c.is_some_and(|c| d.in_region(c, crate::domain::Region::OmegaTilde));
            if !(inside(a) && inside(b)) {
                *v = 0.0;
            }
        }
        out
    }
}

impl NodeField {
    pub fn zeros(d: &Domain) -> Self {
        Self {
            values: vec![0.0; d.n_vertices()],
        }
    }

    pub fn from_fn(d: &Domain, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            values: (0..d.n_vertices()).map(|v| f(d.vertex_position(v))).collect(),
        }
    }

    /// Keeps only the vertices interior to Ω̃.
    pub fn restrict_to_interior(&self, d: &Domain) -> Self {
        let mut out = self.clone();
        for (v, x) in out.values.iter_mut().enumerate() {
            if d.vertex_class(v) == VertexClass::Boundary {
                *x = 0.0;
            }
        }
        out
    }

    /// `h² Σ_{Ω̃-interior vertices} f²`
    pub fn interior_sq_integral(&self, d: &Domain) -> f64 {
        d.interior_vertices()
            .iter()
            .map(|&v| self.values[v] * self.values[v])
            .sum::<f64>()
            * d.cell_weight()
    }
}

impl CellField {
    pub fn zeros(d: &Domain) -> Self {
        Self {
            values: vec![0.0; d.n_cells()],
        }
    }

    pub fn from_fn(d: &Domain, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            values: (0..d.n_cells()).map(|c| f(d.cell_center(c))).collect(),
        }
    }
}

/// Discrete `rot A = ∂₁A₂ − ∂₂A₁` at every vertex; faces off the grid count as zero.
pub fn curl(d: &Domain, a: &VectorField) -> NodeField {
    let (nx, ny, h) = (d.nx, d.ny, d.h);
    let mut out = vec![0.0; d.n_vertices()];
    for j in 0..=ny {
        for i in 0..=nx {
            let ay_r = if i < nx { a.values[d.yface(i, j)] } else { 0.0 };
            let ay_l = if i > 0 { a.values[d.yface(i - 1, j)] } else { 0.0 };
            let ax_t = if j < ny { a.values[d.xface(i, j)] } else { 0.0 };
            let ax_b = if j > 0 { a.values[d.xface(i, j - 1)] } else { 0.0 };
            out[d.vertex(i, j)] = (ay_r - ay_l - ax_t + ax_b) / h;
        }
    }
    NodeField { values: out }
}

/// `rot* f = (∂₂f, −∂₁f)`, the exact adjoint of [`curl`].
pub fn curl_adjoint(d: &Domain, f: &NodeField) -> VectorField {
    let (nx, ny, h) = (d.nx, d.ny, d.h);
    let mut out = vec![0.0; d.n_faces()];
    for j in 0..ny {
        for i in 0..=nx {
            out[d.xface(i, j)] = (f.values[d.vertex(i, j + 1)] - f.values[d.vertex(i, j)]) / h;
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            out[d.yface(i, j)] = -(f.values[d.vertex(i + 1, j)] - f.values[d.vertex(i, j)]) / h;
        }
    }
    VectorField { values: out }
}

/// Cell divergence of a face field.
pub fn divergence(d: &Domain, a: &VectorField) -> CellField {
    let (nx, ny, h) = (d.nx, d.ny, d.h);
    let mut out = vec![0.0; d.n_cells()];
    for j in 0..ny {
        for i in 0..nx {
            out[d.cell(i, j)] = (a.values[d.xface(i + 1, j)] - a.values[d.xface(i, j)]
                + a.values[d.yface(i, j + 1)]
                - a.values[d.yface(i, j)])
                / h;
        }
    }
    CellField { values: out }
}

/// Face gradient of a cell field; faces on the edge of the grid get zero.
pub fn gradient(d: &Domain, t: &CellField) -> VectorField {
    let (nx, ny, h) = (d.nx, d.ny, d.h);
    let mut out = vec![0.0; d.n_faces()];
    for j in 0..ny {
        for i in 1..nx {
            out[d.xface(i, j)] = (t.values[d.cell(i, j)] - t.values[d.cell(i - 1, j)]) / h;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            out[d.yface(i, j)] = (t.values[d.cell(i, j)] - t.values[d.cell(i, j - 1)]) / h;
        }
    }
    VectorField { values: out }
}

/// Unit phase per Ω edge (see [`Domain::edges`]): `U = exp(−i ∫_edge A·dl)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPhases {
    pub values: Vec<Complex64>,
}

impl LinkPhases {
    /// Midpoint rule: the face value of `A` times `h`.
    pub fn from_potential(d: &Domain, a: &VectorField) -> Self {
        Self {
            values: d
                .edges()
                .iter()
                .map(|e| Complex64::from_polar(1.0, -d.h * a.values[e.face]))
                .collect(),
        }
    }

    /// From exact edge integrals `integral(tail_center, head_center)`.
    pub fn from_edge_integrals(d: &Domain, integral: impl Fn([f64; 2], [f64; 2]) -> f64) -> Self {
        Self {
            values: d
                .edges()
                .iter()
                .map(|e| {
                    Complex64::from_polar(1.0, -integral(d.omega_center(e.tail), d.omega_center(e.head)))
                })
                .collect(),
        }
    }

    /// Product of link phases around the plaquette of every vertex whose four
    /// cells lie in Ω, as `(vertex, product)`.
    pub fn plaquettes(&self, d: &Domain) -> Vec<(usize, Complex64)> {
        let mut out = Vec::new();
        for j in 1..d.ny {
            for i in 1..d.nx {
                let v = d.vertex(i, j);
                if d.vertex_class(v) != VertexClass::OmegaInterior {
                    continue;
                }
                let u = |f: usize| self.values[d.edge_at_face(f)];
                let p = u(d.xface(i, j - 1)) * u(d.yface(i, j)) * u(d.xface(i, j)).conj()
                    * u(d.yface(i - 1, j)).conj();
                out.push((v, p));
            }
        }
        out
    }
}

/// `(U u_head − u_tail)/h` on every Ω edge.
pub fn covariant_derivative(d: &Domain, u: &ComplexField, links: &LinkPhases) -> Vec<Complex64> {
    d.edges()
        .iter()
        .zip(&links.values)
        .map(|(e, l)| (l * u.values[e.head] - u.values[e.tail]) / d.h)
        .collect()
}

/// Discrete `∫_Ω |(∇ − iA)u|²`.
pub fn kinetic_energy(d: &Domain, u: &ComplexField, links: &LinkPhases) -> f64 {
    d.edges()
        .iter()
        .zip(&links.values)
        .map(|(e, l)| (l * u.values[e.head] - u.values[e.tail]).norm_sqr())
        .sum()
}

/// `(1/2π) ∫_{hole} H` with vertex quadrature over the hole's vertices.
pub fn hole_flux(d: &Domain, field: &NodeField, hole: usize) -> Result<f64> {
    if hole >= d.hole_count() {
        return Err(Error::Invalid(format!("unknown hole id {hole}")));
    }
    let s: f64 = d
        .interior_vertices()
        .iter()
        .filter(|&&v| d.vertex_class(v) == VertexClass::Hole(hole))
        .map(|&v| field.values[v])
        .sum();
    Ok(s * d.cell_weight() / (2.0 * PI))
}

/// Number of vertices attributed to a hole by [`hole_flux`].
pub fn hole_vertex_count(d: &Domain, hole: usize) -> usize {
    d.interior_vertices()
        .iter()
        .filter(|&&v| d.vertex_class(v) == VertexClass::Hole(hole))
        .count()
}
