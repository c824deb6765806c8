//! The Ginzburg-Landau energy, its Euler-Lagrange residual and Hessian,
//! energy minimization and a-priori bound checks.
//!
//! Discrete energy of a state `(u, A_e + a)`:
//! `h² Σ_Ω λ(−|u|² + ½|u|⁴) + Σ_edges |U u_head − u_tail|² + (κ²/λ) h² Σ_{Ω̃} (rot a)²`.
//! The L²-gradient is `2 (r_u, (κ²/λ) r_a)`.

mod minimize;

pub use minimize::{
    minimize, minimize_multistart, neumann_matrix, MinimizeOptions, MinimizeOutcome, Minimizer, MultiStart, StartKind,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{curl, curl_adjoint, ComplexField, LinkPhases, VectorField};
use crate::domain::{Domain, Region, VertexClass};
use crate::error::{Error, Result};
use crate::gauge::GaugeData;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GLParameters {
    pub lambda: f64,
    pub kappa: f64,
}

impl GLParameters {
    pub fn new(lambda: f64, kappa: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Invalid(format!("lambda must be positive, got {lambda}")));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::Invalid(format!("kappa must be positive, got {kappa}")));
        }
        Ok(Self { lambda, kappa })
    }

    /// `κ²/λ`, the weight of the field energy.
    pub fn field_weight(&self) -> f64 {
        self.kappa * self.kappa / self.lambda
    }
}

/// Order parameter on Ω and perturbation `a` of the external potential (`A = A_e + a`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GLState {
    pub u: ComplexField,
    pub a: VectorField,
}

impl GLState {
    pub fn normal(d: &Domain) -> Self {
        Self {
            u: ComplexField::zeros(d),
            a: VectorField::zeros(d),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub potential: f64,
    pub kinetic: f64,
    pub field: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.potential + self.kinetic + self.field
    }
}

/// Domain plus reference gauge: everything the functional needs besides the state.
#[derive(Clone, Copy, Debug)]
pub struct Model<'a> {
    pub d: &'a Domain,
    pub gauge: &'a GaugeData,
}

impl<'a> Model<'a> {
    pub fn new(d: &'a Domain, gauge: &'a GaugeData) -> Self {
        Self { d, gauge }
    }

    pub fn links(&self, a: &VectorField) -> LinkPhases {
        LinkPhases::from_potential(self.d, &(&self.gauge.a_e + a))
    }

    pub fn energy_parts(&self, s: &GLState, p: GLParameters) -> EnergyParts {
        let d = self.d;
        let w = d.cell_weight();
        let potential = s
            .u
            .values
            .iter()
            .map(|v| {
                let m = v.norm_sqr();
                p.lambda * (-m + 0.5 * m * m)
            })
            .sum::<f64>()
            * w;
        let links = self.links(&s.a);
        let kinetic = crate::calculus::kinetic_energy(d, &s.u, &links);
        let field = p.field_weight() * curl(d, &s.a).interior_sq_integral(d);
        EnergyParts {
            potential,
            kinetic,
            field,
        }
    }

    pub fn energy(&self, s: &GLState, p: GLParameters) -> f64 {
        self.energy_parts(s, p).total()
    }

    /// `(r_u, r_a)` with `r_u = −Δ_A u + λ(|u|² − 1)u` and
    /// `r_a = rot*(rot a) − (λ/κ²) J(u, A)`.
    pub fn el_residual(&self, s: &GLState, p: GLParameters) -> (ComplexField, VectorField) {
        let links = self.links(&s.a);
        (self.r_u(&s.u, &links, p.lambda), self.r_a(s, &links, p))
    }

    fn r_u(&self, u: &ComplexField, links: &LinkPhases, lambda: f64) -> ComplexField {
        let d = self.d;
        let s = 1.0 / (d.h * d.h);
        let mut r: Vec<Complex64> = u
            .values
            .iter()
            .map(|v| v * (lambda * (v.norm_sqr() - 1.0)))
            .collect();
        for (e, l) in d.edges().iter().zip(&links.values) {
            let (t, hd) = (u.values[e.tail], u.values[e.head]);
            r[e.tail] += (t - l * hd) * s;
            r[e.head] += (hd - l.conj() * t) * s;
        }
        ComplexField { values: r }
    }

    fn r_a(&self, s: &GLState, links: &LinkPhases, p: GLParameters) -> VectorField {
        let d = self.d;
        let la = field_operator(d, &s.a);
        let j = supercurrent(d, &s.u, links);
        let c = p.lambda / (p.kappa * p.kappa);
        VectorField {
            values: la.values.iter().zip(&j.values).map(|(x, y)| x - c * y).collect(),
        }
    }

    /// Linearization of [`Model::el_residual`] at `s` along `(du, da)`.
    pub fn hessian_apply(
        &self,
        s: &GLState,
        p: GLParameters,
        du: &ComplexField,
        da: &VectorField,
    ) -> (ComplexField, VectorField) {
        let d = self.d;
        let links = self.links(&s.a);
        let hinv2 = 1.0 / (d.h * d.h);
        let i = Complex64::new(0.0, 1.0);
        let lam = p.lambda;
        let mut ru: Vec<Complex64> = s
            .u
            .values
            .iter()
            .zip(&du.values)
            .map(|(u, du)| du * (lam * (u.norm_sqr() - 1.0)) + u * (2.0 * lam * (u.conj() * du).re))
            .collect();
        let mut dj = VectorField::zeros(d);
        for (e, l) in d.edges().iter().zip(&links.values) {
            let (t, hd) = (s.u.values[e.tail], s.u.values[e.head]);
            let (dt, dh) = (du.values[e.tail], du.values[e.head]);
            let b = da.values[e.face] * d.h;
            ru[e.tail] += (dt - l * dh + i * b * l * hd) * hinv2;
            ru[e.head] += (dh - l.conj() * dt - i * b * l.conj() * t) * hinv2;
            let z = t.conj() * l * hd;
            dj.values[e.face] = ((dt.conj() * l * hd + t.conj() * l * dh).im - b * z.re) / d.h;
        }
        let la = field_operator(d, da);
        let c = lam / (p.kappa * p.kappa);
        (
            ComplexField { values: ru },
            VectorField {
                values: la.values.iter().zip(&dj.values).map(|(x, y)| x - c * y).collect(),
            },
        )
    }

    /// `T_u[b] = d/dt (−Δ_{A_e + a + t b}) u` at `t = 0`.
    pub fn potential_derivative(&self, u: &ComplexField, a: &VectorField, b: &VectorField) -> ComplexField {
        let d = self.d;
        let links = self.links(a);
        let i = Complex64::new(0.0, 1.0);
        let mut out = vec![Complex64::new(0.0, 0.0); d.n_omega()];
        for (e, l) in d.edges().iter().zip(&links.values) {
            let bf = b.values[e.face] / d.h;
            out[e.tail] += i * bf * l * u.values[e.head];
            out[e.head] -= i * bf * l.conj() * u.values[e.tail];
        }
        ComplexField { values: out }
    }

    /// `2 Re⟨δ', r_u⟩ + 2(κ²/λ)⟨δa', r_a⟩`: the pairing that turns residuals into energy derivatives.
    pub fn pairing(
        &self,
        p: GLParameters,
        ru: &ComplexField,
        ra: &VectorField,
        du: &ComplexField,
        da: &VectorField,
    ) -> f64 {
        2.0 * (du.inner(ru, self.d).re + p.field_weight() * da.inner(ra, self.d))
    }

    pub fn check_bounds(&self, s: &GLState, p: GLParameters) -> SolutionReport {
        check_bounds(self, s, p)
    }
}

/// `L a = rot*(rot a)` with the curl restricted to Ω̃-interior vertices.
pub fn field_operator(d: &Domain, a: &VectorField) -> VectorField {
    curl_adjoint(d, &curl(d, a).restrict_to_interior(d))
}

/// `J = Im(ū (∇ − iA) u)` on the faces crossed by Ω edges, zero elsewhere.
pub fn supercurrent(d: &Domain, u: &ComplexField, links: &LinkPhases) -> VectorField {
    let mut j = VectorField::zeros(d);
    for (e, l) in d.edges().iter().zip(&links.values) {
        j.values[e.face] = (u.values[e.tail].conj() * l * u.values[e.head]).im / d.h;
    }
    j
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub quantity: f64,
    /// `None` when only a raw ratio is reported
    pub bound: Option<f64>,
    /// `None` when the check does not apply or has no computable bound
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub energy: f64,
    pub el_residual_norms: (f64, f64),
    pub max_modulus: f64,
    pub bound_checks: Vec<BoundCheck>,
    /// mean `rot a` over each hole
    pub hole_field_constants: Vec<f64>,
}

impl SolutionReport {
    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.bound_checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.bound_checks.iter().all(|c| c.pass != Some(false))
    }
}

fn check_bounds(m: &Model, s: &GLState, p: GLParameters) -> SolutionReport {
    let d = m.d;
    let parts = m.energy_parts(s, p);
    let energy = parts.total();
    let (ru, ra) = m.el_residual(s, p);
    let area = d.area(Region::Omega).expect("Ω exists");
    let max_modulus = s.u.max_abs();
    let (lam, kap) = (p.lambda, p.kappa);
    let rot_a = curl(d, &s.a);
    let rot_sq = rot_a.interior_sq_integral(d);
    let tol = 1e-8 * lam * area;
    let mut checks = vec![BoundCheck {
        name: "max_modulus".into(),
        quantity: max_modulus,
        bound: Some(1.0 + 1e-6),
        pass: Some(max_modulus <= 1.0 + 1e-6),
    }];
    let field = parts.field;
    let x2_bound = 0.5 * lam * area;
    checks.push(BoundCheck {
        name: "field_energy".into(),
        quantity: field,
        bound: Some(x2_bound),
        pass: (energy <= 0.0).then_some(field <= x2_bound + tol),
    });
    let la = field_operator(d, &s.a);
    let la_norm = la.norm(d);
    let b4 = area.sqrt() * lam.powf(1.5) / (kap * kap);
    checks.push(BoundCheck {
        name: "La_norm".into(),
        quantity: la_norm,
        bound: Some(b4),
        pass: Some(la_norm <= b4 * (1.0 + 1e-6) + 1e-10),
    });
    let sup_a = s.a.max_abs();
    checks.push(BoundCheck {
        name: "sup_a_over_La".into(),
        quantity: if la_norm > 0.0 { sup_a / la_norm } else { 0.0 },
        bound: None,
        pass: None,
    });
    let a_norm = s.a.norm(d);
    let rot_norm = rot_sq.sqrt();
    checks.push(BoundCheck {
        name: "H1_a_over_rot_a".into(),
        quantity: if rot_norm > 0.0 {
            (a_norm * a_norm + rot_sq).sqrt() / rot_norm
        } else {
            0.0
        },
        bound: None,
        pass: None,
    });
    let identity = -0.5 * lam * s.u.quartic(d) + p.field_weight() * rot_sq;
    checks.push(BoundCheck {
        name: "energy_identity_gap".into(),
        quantity: (energy - identity).abs() / energy.abs().max(identity.abs()).max(1e-300),
        bound: None,
        pass: None,
    });
    let u2 = s.u.norm(d).powi(2);
    checks.push(BoundCheck {
        name: "lambda_u2_over_area".into(),
        quantity: lam * u2 / area,
        bound: None,
        pass: None,
    });
    let hole_field_constants = (0..d.hole_count())
        .map(|k| {
            let vs: Vec<f64> = d
                .interior_vertices()
                .iter()
                .filter(|&&v| d.vertex_class(v) == VertexClass::Hole(k))
                .map(|&v| rot_a.values[v])
                .collect();
            vs.iter().sum::<f64>() / vs.len().max(1) as f64
        })
        .collect();
    SolutionReport {
        energy,
        el_residual_norms: (ru.norm(d), ra.norm(d)),
        max_modulus,
        bound_checks: checks,
        hole_field_constants,
    }
}

/// `ψ` (on Ω̃-interior vertices, compact) with `rot* ψ` the Coulomb-slice part of `a`.
pub fn stream_function(d: &Domain, lap: &crate::gauge::DirichletLaplacian, a: &VectorField) -> Vec<f64> {
    let r = curl(d, a);
    lap.solve(&crate::gauge::gather_interior(d, &r))
}

/// `rot* ψ` for compact interior-vertex `ψ`.
pub fn from_stream_function(d: &Domain, psi: &[f64]) -> VectorField {
    curl_adjoint(d, &crate::gauge::scatter_interior(d, psi))
}
