//! Expansion data of the branch bifurcating from the normal state at `λ₁`,
//! Newton continuation of that branch and strict-stability verdicts.
//!
//! Along the branch `u = αu₁ + α³u₃ + …`, `a = α²a₂ + …`, `λ = λ₁ + c(κ)α² + …` with
//! `a₂ = (λ₁/κ²) L⁻¹J₁`, `c(κ) = λ₁(I₀ − 2K₀/κ²)`, `I₀ = ∫|u₁|⁴` and `K₀ = ⟨L⁻¹J₁, J₁⟩`.

mod continuation;
mod stability;

pub use continuation::{quadratic_fit, trace_branch, Branch, BranchSample, BranchSolver, ContinuationOptions};
pub use stability::{strict_stability, StabilityOptions, StabilityReport, Verdict};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{curl, ComplexField, VectorField};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::functional::{from_stream_function, GLState, Model};
use crate::gauge::{gather_interior, DirichletLaplacian, GaugeData};
use crate::linalg::conjugate_gradient;
use crate::spectra::{assemble, MagneticOperator, Spectrum};

const RESOLVENT_TOL: f64 = 1e-13;
const RESOLVENT_MAX_ITER: usize = 20_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BifurcationCoefficients {
    pub lambda1: f64,
    pub kappa: f64,
    pub u1: ComplexField,
    pub i0: f64,
    pub j1: VectorField,
    /// `L⁻¹J₁`
    pub b2: VectorField,
    /// `(λ₁/κ²) b₂`
    pub a2: VectorField,
    /// `⟨b₂, J₁⟩`
    pub k0: f64,
    /// `−½ Re⟨u₁, T_{u₁}[b₂]⟩`, the same quantity through the potential derivative
    pub k0_alt: f64,
    pub c_kappa: f64,
    pub kappa_c: f64,
    /// third-order corrector, orthogonal to `u₁`
    pub u3: ComplexField,
}

impl BifurcationCoefficients {
    pub fn c_at(&self, kappa: f64) -> f64 {
        self.lambda1 * (self.i0 - 2.0 * self.k0 / (kappa * kappa))
    }

    /// Relative disagreement of the two `K₀` formulas.
    pub fn k0_mismatch(&self) -> f64 {
        (self.k0 - self.k0_alt).abs() / self.k0.abs().max(self.k0_alt.abs()).max(f64::MIN_POSITIVE)
    }

    /// Third-order predictor `(αu₁ + α³u₃, α²a₂)` and `λ₁ + cα²`.
    pub fn predictor(&self, alpha: f64) -> (GLState, f64) {
        let a3 = alpha * alpha * alpha;
        let mut u = &self.u1 * alpha;
        u.axpy(Complex64::new(a3, 0.0), &self.u3);
        let state = GLState {
            u,
            a: self.a2.scale(alpha * alpha),
        };
        (state, self.lambda1 + self.c_kappa * alpha * alpha)
    }
}

/// `J = Im(ū (∇ − iA_e) u)` on the faces crossed by Ω edges.
pub fn supercurrent(d: &Domain, gauge: &GaugeData, u: &ComplexField) -> VectorField {
    let links = crate::calculus::LinkPhases::from_potential(d, &gauge.a_e);
    crate::functional::supercurrent(d, u, &links)
}

/// `L⁻¹J` in the Coulomb slice, for `J` divergence free with no normal flux:
/// `rot*(−Δ_D)⁻² rot J`.
pub fn field_inverse(d: &Domain, lap: &DirichletLaplacian, j: &VectorField) -> VectorField {
    let r = gather_interior(d, &curl(d, j));
    let chi = lap.solve(&r);
    let psi = lap.solve(&chi);
    from_stream_function(d, &psi)
}

/// Reduced resolvent `R₀f`: the solution of `(H − λ₁)w = P⊥f` with `w ⊥ u₁`.
pub fn reduced_resolvent(op: &MagneticOperator, lambda1: f64, u1: &ComplexField, f: &ComplexField) -> Result<ComplexField> {
    let q = u1.values.clone();
    let qq: f64 = q.iter().map(|z| z.norm_sqr()).sum();
    let project = move |x: &mut [Complex64]| {
        let c: Complex64 = q.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>() / qq;
        for (x, a) in x.iter_mut().zip(&q) {
            *x -= c * a;
        }
    };
    let mut b = f.values.clone();
    project(&mut b);
    let chol = op.to_band(1e-2 * lambda1.max(1.0)).cholesky()?;
    let mut x = vec![Complex64::new(0.0, 0.0); b.len()];
    let out = conjugate_gradient(
        |p: &[Complex64], y: &mut [Complex64]| {
            op.apply_into(p, y);
            for (y, p) in y.iter_mut().zip(p) {
                *y -= p * lambda1;
            }
        },
        Some(|r: &[Complex64], z: &mut [Complex64]| {
            z.copy_from_slice(r);
            chol.solve_in_place(z);
        }),
        Some(project.clone()),
        &b,
        &mut x,
        RESOLVENT_TOL,
        RESOLVENT_MAX_ITER,
    );
    if !out.converged && out.final_residual() > 1e-9 {
        return Err(Error::NonConvergence {
            solver: "reduced resolvent CG",
            iterations: out.iterations,
            residual: out.final_residual(),
            history: out.history,
        });
    }
    project(&mut x);
    Ok(ComplexField { values: x })
}

/// Expansion coefficients at `λ₁` for the given `κ`. Refuses a degenerate ground state.
pub fn coefficients(model: Model, spectrum: &Spectrum, kappa: f64) -> Result<BifurcationCoefficients> {
    spectrum.require_simple()?;
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::Invalid(format!("kappa must be positive, got {kappa}")));
    }
    let d = model.d;
    let lap = DirichletLaplacian::new(d)?;
    let lambda1 = spectrum.lambda1;
    let u1 = spectrum.u1.normalized(d);
    let i0 = u1.quartic(d);
    if i0 <= 0.0 {
        return Err(Error::Numerical("∫|u₁|⁴ vanished".into()));
    }
    let j1 = supercurrent(d, model.gauge, &u1);
    let b2 = field_inverse(d, &lap, &j1);
    let k0 = b2.inner(&j1, d);
    let zero = VectorField::zeros(d);
    let k0_alt = -0.5 * u1.inner(&model.potential_derivative(&u1, &zero, &b2), d).re;
    let a2 = b2.scale(lambda1 / (kappa * kappa));
    let c_kappa = lambda1 * (i0 - 2.0 * k0 / (kappa * kappa));
    let kappa_c = (2.0 * k0.max(0.0) / i0).sqrt();
    let mut rhs = model.potential_derivative(&u1, &zero, &a2);
    for (r, u) in rhs.values.iter_mut().zip(&u1.values) {
        *r += u * (lambda1 * u.norm_sqr());
    }
    let op = assemble(model.gauge, d);
    let u3 = reduced_resolvent(&op, lambda1, &u1, &rhs)?;
    let u3 = &u3 * -1.0;
    Ok(BifurcationCoefficients {
        lambda1,
        kappa,
        u1,
        i0,
        j1,
        b2,
        a2,
        k0,
        k0_alt,
        c_kappa,
        kappa_c,
        u3,
    })
}

/// Leading quartic term `−α⁴(λ₁/2)(I₀ − 2K₀/κ²)` of the energy along the branch.
pub fn branch_energy(coeffs: &BifurcationCoefficients, alpha: f64, kappa: f64) -> f64 {
    -alpha.powi(4) * 0.5 * coeffs.c_at(kappa)
}

pub fn kappa_c(coeffs: &BifurcationCoefficients) -> Result<f64> {
    if coeffs.i0 <= 0.0 {
        return Err(Error::Numerical("I₀ must be positive".into()));
    }
    Ok((2.0 * coeffs.k0.max(0.0) / coeffs.i0).sqrt())
}
