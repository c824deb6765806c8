//! Newton continuation in the amplitude `α = ⟨u, u₁⟩`.
//!
//! Unknowns are `(Re u, Im u, ψ)` with `a = rot* ψ`, plus `λ`. The Jacobian is
//! recovered from Hessian products by colored probing and factored by banded LU,
//! unknowns interleaved by grid row. The `S¹` kernel `(iu, 0)` is removed by
//! freezing the phase of `δu` at the cell of largest modulus and adding a
//! multiplier column in its place; `λ` enters by bordering.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::BifurcationCoefficients;
use crate::calculus::{curl, ComplexField, VectorField};
use crate::domain::{Domain, NONE};
use crate::error::{Error, Result};
use crate::functional::{from_stream_function, stream_function, supercurrent, GLParameters, GLState, Model};
use crate::gauge::{gather_interior, DirichletLaplacian};
use crate::linalg::{BandLu, BandMatrix};

/// Probing period; couplings reach at most two grid steps.
const PERIOD: usize = 5;
const REACH: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationOptions {
    /// absolute tolerance on `(‖r_u‖² + ‖r_a‖²)^{1/2}`
    pub newton_tol: f64,
    pub max_newton: usize,
    pub alpha_max: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton: 30,
            alpha_max: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchSample {
    pub alpha: f64,
    pub lambda: f64,
    pub state: GLState,
    pub energy: f64,
    pub newton_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Branch {
    pub lambda1: f64,
    pub kappa: f64,
    /// predicted quadratic coefficient `c(κ)`
    pub c_kappa: f64,
    pub samples: Vec<BranchSample>,
    /// intercept of `(λ(α) − λ₁)/α²` regressed on `α²`
    pub fit: Option<f64>,
    /// Newton failed at the last sample and the remaining amplitudes were skipped
    pub truncated: bool,
}

impl Branch {
    pub fn fit_error(&self) -> Option<f64> {
        self.fit.map(|f| (f - self.c_kappa).abs() / self.c_kappa.abs().max(f64::MIN_POSITIVE))
    }
}

/// Least-squares intercept of `(λ − λ₁)/α²` against `α²`.
pub fn quadratic_fit(lambda1: f64, samples: &[BranchSample]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.converged && s.alpha != 0.0)
        .map(|s| {
            let a2 = s.alpha * s.alpha;
            (a2, (s.lambda - lambda1) / a2)
        })
        .collect();
    if pts.is_empty() {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-12 * mx * mx {
        return Some(my);
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(my - sxy / sxx * mx)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Re,
    Im,
    Psi,
}

/// Position of each unknown in the interleaved ordering.
struct Layout {
    re: Vec<usize>,
    im: Vec<usize>,
    psi: Vec<usize>,
    /// `(kind, i, j, compact index)` per position
    coords: Vec<(Kind, usize, usize, usize)>,
}

impl Layout {
    fn new(d: &Domain, with_field: bool) -> Self {
        let mut re = vec![NONE; d.n_omega()];
        let mut im = vec![NONE; d.n_omega()];
        let mut psi = vec![NONE; if with_field { d.interior_vertices().len() } else { 0 }];
        let mut coords = Vec::new();
        for j in 0..=d.ny {
            for i in 0..=d.nx {
                if i < d.nx && j < d.ny {
                    let k = d.omega_index(d.cell(i, j));
                    if k != NONE {
                        re[k] = coords.len();
                        coords.push((Kind::Re, i, j, k));
                        im[k] = coords.len();
                        coords.push((Kind::Im, i, j, k));
                    }
                }
                if with_field {
                    let m = d.interior_index(d.vertex(i, j));
                    if m != NONE {
                        psi[m] = coords.len();
                        coords.push((Kind::Psi, i, j, m));
                    }
                }
            }
        }
        Self { re, im, psi, coords }
    }

    fn len(&self) -> usize {
        self.coords.len()
    }

    /// Position of the unknown of `kind` at grid point `(i, j)`, if any.
    fn at(&self, d: &Domain, kind: Kind, i: usize, j: usize) -> Option<usize> {
        match kind {
            Kind::Re | Kind::Im => {
                if i >= d.nx || j >= d.ny {
                    return None;
                }
                let k = d.omega_index(d.cell(i, j));
                (k != NONE).then(|| if kind == Kind::Re { self.re[k] } else { self.im[k] })
            }
            Kind::Psi => {
                if self.psi.is_empty() || i > d.nx || j > d.ny {
                    return None;
                }
                let m = d.interior_index(d.vertex(i, j));
                (m != NONE).then(|| self.psi[m])
            }
        }
    }
}

type Projection<'a> = Box<dyn Fn(&ComplexField) -> ComplexField + 'a>;

/// Newton solver for the amplitude-constrained GL system at fixed `κ`.
pub struct BranchSolver<'a> {
    model: Model<'a>,
    kappa: f64,
    u1: ComplexField,
    lap: Option<DirichletLaplacian>,
    layout: Layout,
    opts: ContinuationOptions,
    project: Option<Projection<'a>>,
}

impl<'a> BranchSolver<'a> {
    /// `with_field = false` freezes `a = 0` and drops the field equation.
    pub fn new(model: Model<'a>, u1: &ComplexField, kappa: f64, with_field: bool, opts: ContinuationOptions) -> Result<Self> {
        let d = model.d;
        let lap = if with_field { Some(DirichletLaplacian::new(d)?) } else { None };
        Ok(Self {
            model,
            kappa,
            u1: u1.normalized(d),
            lap,
            layout: Layout::new(d, with_field),
            opts,
            project: None,
        })
    }

    /// Applies `f` to every Newton iterate.
    pub fn with_projection(mut self, f: impl Fn(&ComplexField) -> ComplexField + 'a) -> Self {
        self.project = Some(Box::new(f));
        self
    }

    fn params(&self, lambda: f64) -> GLParameters {
        GLParameters {
            lambda,
            kappa: self.kappa,
        }
    }

    fn state(&self, u: &ComplexField, psi: &[f64]) -> GLState {
        GLState {
            u: u.clone(),
            a: match self.lap {
                Some(_) => from_stream_function(self.model.d, psi),
                None => VectorField::zeros(self.model.d),
            },
        }
    }

    fn scatter(&self, du: &ComplexField, fa: &VectorField) -> Vec<f64> {
        let l = &self.layout;
        let mut out = vec![0.0; l.len()];
        for (k, z) in du.values.iter().enumerate() {
            out[l.re[k]] = z.re;
            out[l.im[k]] = z.im;
        }
        if !l.psi.is_empty() {
            let r = gather_interior(self.model.d, &curl(self.model.d, fa));
            for (m, v) in r.into_iter().enumerate() {
                out[l.psi[m]] = v;
            }
        }
        out
    }

    /// `(F, ∂F/∂λ, ‖(r_u, r_a)‖)`.
    fn residual(&self, s: &GLState, lambda: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let d = self.model.d;
        let p = self.params(lambda);
        let (ru, ra) = self.model.el_residual(s, p);
        let ra = if self.lap.is_some() { ra } else { VectorField::zeros(d) };
        let norm = (ru.norm(d).powi(2) + ra.norm(d).powi(2)).sqrt();
        let f = self.scatter(&ru, &ra);
        let du = ComplexField {
            values: s.u.values.iter().map(|u| u * (u.norm_sqr() - 1.0)).collect(),
        };
        let dj = if self.lap.is_some() {
            supercurrent(d, &s.u, &self.model.links(&s.a)).scale(-1.0 / (self.kappa * self.kappa))
        } else {
            VectorField::zeros(d)
        };
        (f, self.scatter(&du, &dj), norm)
    }

    /// Jacobian with the `Im` column of cell `pivot` (rotated by `e`) replaced by the multiplier column.
    fn jacobian(&self, s: &GLState, lambda: f64, pivot: usize, e: Complex64) -> Result<BandLu<f64>> {
        let d = self.model.d;
        let l = &self.layout;
        let p = self.params(lambda);
        let kinds: &[Kind] = if l.psi.is_empty() {
            &[Kind::Re, Kind::Im]
        } else {
            &[Kind::Re, Kind::Im, Kind::Psi]
        };
        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        let (pre, pim) = (l.re[pivot], l.im[pivot]);
        let mut col_re = Vec::new();
        let mut col_im = Vec::new();
        for &kind in kinds {
            for ci in 0..PERIOD {
                for cj in 0..PERIOD {
                    let mut du = ComplexField::zeros(d);
                    let mut dpsi = vec![0.0; l.psi.len()];
                    let mut any = false;
                    for &(k, i, j, idx) in &l.coords {
                        if k != kind || i % PERIOD != ci || j % PERIOD != cj {
                            continue;
                        }
                        any = true;
                        match k {
                            Kind::Re => du.values[idx].re = 1.0,
                            Kind::Im => du.values[idx].im = 1.0,
                            Kind::Psi => dpsi[idx] = 1.0,
                        }
                    }
                    if !any {
                        continue;
                    }
                    let da = if l.psi.is_empty() {
                        VectorField::zeros(d)
                    } else {
                        from_stream_function(d, &dpsi)
                    };
                    let (hu, ha) = self.model.hessian_apply(s, p, &du, &da);
                    let ha = if l.psi.is_empty() { VectorField::zeros(d) } else { ha };
                    let out = self.scatter(&hu, &ha);
                    for (row, &v) in out.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let (_, ri, rj, _) = l.coords[row];
                        // the only grid index of color `c` within reach of `r`
                        let pick = |r: usize, c: usize| (r + REACH).checked_sub((r + REACH + PERIOD - c) % PERIOD);
                        let (Some(i), Some(j)) = (pick(ri, ci), pick(rj, cj)) else {
                            continue;
                        };
                        let Some(col) = l.at(d, kind, i, j) else {
                            continue;
                        };
                        if col == pre {
                            col_re.push((row, v));
                        } else if col == pim {
                            col_im.push((row, v));
                        } else {
                            trip.push((row, col, v));
                        }
                    }
                }
            }
        }
        // δu at the pivot is e·x; its Im slot carries the multiplier of i·e
        for (row, v) in col_re {
            trip.push((row, pre, e.re * v));
        }
        for (row, v) in col_im {
            trip.push((row, pre, e.im * v));
        }
        trip.push((pre, pim, -e.im));
        trip.push((pim, pim, e.re));
        BandMatrix::from_triplets(l.len(), &trip).lu()
    }

    fn split(&self, z: &[f64], pivot: usize, e: Complex64) -> (ComplexField, Vec<f64>) {
        let l = &self.layout;
        let mut du: Vec<Complex64> = l.re.iter().zip(&l.im).map(|(&r, &i)| Complex64::new(z[r], z[i])).collect();
        du[pivot] = e * z[l.re[pivot]];
        let dpsi = l.psi.iter().map(|&q| z[q]).collect();
        (ComplexField { values: du }, dpsi)
    }

    /// Newton solve of `EL = 0`, `Re⟨u₁, u⟩ = α`, `Im⟨u₁, u⟩ = 0` from `(guess, lambda)`.
    pub fn solve(&self, alpha: f64, guess: &GLState, lambda: f64) -> BranchSample {
        let d = self.model.d;
        if alpha == 0.0 {
            return BranchSample {
                alpha,
                lambda,
                state: GLState::normal(d),
                energy: 0.0,
                newton_residual: 0.0,
                iterations: 0,
                converged: true,
            };
        }
        let mut u = guess.u.clone();
        let mut psi = match &self.lap {
            Some(lap) => stream_function(d, lap, &guess.a),
            None => Vec::new(),
        };
        let mut lam = lambda;
        let mut iterations = 0;
        loop {
            let s = self.state(&u, &psi);
            let (f, fl, res) = self.residual(&s, lam);
            let converged = res <= self.opts.newton_tol;
            if converged || !res.is_finite() || iterations >= self.opts.max_newton {
                let energy = self.model.energy(&s, self.params(lam));
                return BranchSample {
                    alpha,
                    lambda: lam,
                    state: s,
                    energy,
                    newton_residual: res,
                    iterations,
                    converged,
                };
            }
            iterations += 1;
            let pivot = (0..u.len())
                .max_by(|&a, &b| u.values[a].norm_sqr().total_cmp(&u.values[b].norm_sqr()))
                .unwrap_or(0);
            let e = u.values[pivot] / u.values[pivot].norm().max(f64::MIN_POSITIVE);
            let lu = match self.jacobian(&s, lam, pivot, e) {
                Ok(lu) => lu,
                Err(_) => {
                    iterations = self.opts.max_newton;
                    continue;
                }
            };
            let z1 = lu.solve(&f.iter().map(|v| -v).collect::<Vec<_>>());
            let z2 = lu.solve(&fl.iter().map(|v| -v).collect::<Vec<_>>());
            let (du1, dp1) = self.split(&z1, pivot, e);
            let (du2, dp2) = self.split(&z2, pivot, e);
            let amp = |v: &ComplexField| self.u1.inner(v, d).re;
            let denom = amp(&du2);
            let dl = if denom.abs() > f64::MIN_POSITIVE {
                (alpha - amp(&u) - amp(&du1)) / denom
            } else {
                0.0
            };
            u.axpy(Complex64::new(1.0, 0.0), &du1);
            u.axpy(Complex64::new(dl, 0.0), &du2);
            for (p, (a, b)) in psi.iter_mut().zip(dp1.iter().zip(&dp2)) {
                *p += a + dl * b;
            }
            lam += dl;
            if let Some(proj) = &self.project {
                u = proj(&u);
            }
            let z = self.u1.inner(&u, d);
            if z.norm() > 0.0 {
                let rot = z.conj() / z.norm() * alpha.signum();
                u = u.scale(rot);
            }
        }
    }
}

/// Traces the branch at the amplitudes `alphas`, each Newton solve started
/// from the third-order predictor. Stops at the first failed solve.
pub fn trace_branch(model: Model, coeffs: &BifurcationCoefficients, alphas: &[f64], opts: ContinuationOptions) -> Result<Branch> {
    if let Some(a) = alphas.iter().find(|a| !a.is_finite() || a.abs() > opts.alpha_max) {
        return Err(Error::Invalid(format!("amplitude {a} outside [-{m}, {m}]", m = opts.alpha_max)));
    }
    let solver = BranchSolver::new(model, &coeffs.u1, coeffs.kappa, true, opts)?;
    let mut samples = Vec::with_capacity(alphas.len());
    let mut truncated = false;
    for &alpha in alphas {
        let (guess, lambda) = coeffs.predictor(alpha);
        let s = if alpha == 0.0 {
            solver.solve(0.0, &guess, coeffs.lambda1)
        } else {
            solver.solve(alpha, &guess, lambda)
        };
        let ok = s.converged;
        samples.push(s);
        if !ok {
            truncated = true;
            break;
        }
    }
    Ok(Branch {
        lambda1: coeffs.lambda1,
        kappa: coeffs.kappa,
        c_kappa: coeffs.c_kappa,
        fit: quadratic_fit(coeffs.lambda1, &samples),
        samples,
        truncated,
    })
}
