//! Neumann magnetic Laplacian and its lowest eigenpairs.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{ComplexField, LinkPhases, VectorField};
use crate::domain::{Domain, Edge};
use crate::error::{Error, Result};
use crate::gauge::{ExternalField, GaugeData};
use crate::linalg::{BandCholesky, BandMatrix};

/// Relative gap below which the ground state is declared degenerate.
pub const GAP_TOL: f64 = 1e-6;

/// `−Δ_A = −(∇ − iA)²` on the Ω cells with natural (zero covariant flux)
/// boundary faces, as a link-variable stencil.
#[derive(Clone, Debug)]
pub struct MagneticOperator {
    edges: Vec<Edge>,
    pub links: LinkPhases,
    n: usize,
    h: f64,
}

impl MagneticOperator {
    pub fn from_potential(d: &Domain, a: &VectorField) -> Self {
        Self::from_links(d, LinkPhases::from_potential(d, a))
    }

    pub fn from_links(d: &Domain, links: LinkPhases) -> Self {
        Self {
            edges: d.edges().to_vec(),
            links,
            n: d.n_omega(),
            h: d.h,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn apply_into(&self, u: &[Complex64], y: &mut [Complex64]) {
        let s = 1.0 / (self.h * self.h);
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (e, l) in self.edges.iter().zip(&self.links.values) {
            let (t, hd) = (u[e.tail], u[e.head]);
            y[e.tail] += (t - l * hd) * s;
            y[e.head] += (hd - l.conj() * t) * s;
        }
    }

    pub fn apply(&self, u: &ComplexField) -> ComplexField {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        self.apply_into(&u.values, &mut y);
        ComplexField { values: y }
    }

    /// `H + shift·I` as a Hermitian band matrix.
    pub fn to_band(&self, shift: f64) -> BandMatrix<Complex64> {
        let s = 1.0 / (self.h * self.h);
        let mut trip = Vec::with_capacity(self.n + 4 * self.edges.len());
        for k in 0..self.n {
            trip.push((k, k, Complex64::new(shift, 0.0)));
        }
        for (e, l) in self.edges.iter().zip(&self.links.values) {
            trip.push((e.tail, e.tail, Complex64::new(s, 0.0)));
            trip.push((e.head, e.head, Complex64::new(s, 0.0)));
            trip.push((e.tail, e.head, -l * s));
            trip.push((e.head, e.tail, -l.conj() * s));
        }
        BandMatrix::from_triplets(self.n, &trip)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let s = 1.0 / (self.h * self.h);
        let mut m = DMatrix::zeros(self.n, self.n);
        for (e, l) in self.edges.iter().zip(&self.links.values) {
            m[(e.tail, e.tail)] += Complex64::new(s, 0.0);
            m[(e.head, e.head)] += Complex64::new(s, 0.0);
            m[(e.tail, e.head)] -= l * s;
            m[(e.head, e.tail)] -= l.conj() * s;
        }
        m
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    pub lambda1: f64,
    /// normalized ground state, phase fixed so its largest entry is real positive
    pub u1: ComplexField,
    pub lambda2: f64,
    pub gap: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<ComplexField>,
    /// `‖(H − λ)u‖ / max(1, λ)` per pair, unit weighted norm
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

impl Spectrum {
    pub fn relative_gap(&self) -> f64 {
        self.gap / self.lambda1.max(1.0)
    }

    pub fn is_simple(&self) -> bool {
        self.relative_gap() > GAP_TOL
    }

    pub fn require_simple(&self) -> Result<()> {
        if self.is_simple() {
            Ok(())
        } else {
            Err(Error::Degenerate {
                gap: self.relative_gap(),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub shift: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 2000,
            shift: 1e-2,
            seed: 0,
        }
    }
}

pub fn assemble(gauge: &GaugeData, d: &Domain) -> MagneticOperator {
    MagneticOperator::from_potential(d, &gauge.a_e)
}

pub fn ground_state(op: &MagneticOperator, d: &Domain, k: usize) -> Result<Spectrum> {
    ground_state_with(op, d, k, EigenOptions::default())
}

fn orthonormalize(vs: &mut Vec<Vec<Complex64>>) {
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(vs.len());
    for v in vs.drain(..) {
        let mut v = v;
        for _ in 0..2 {
            for q in &out {
                let c: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= c * y;
                }
            }
        }
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-300 {
            v.iter_mut().for_each(|x| *x /= n);
            out.push(v);
        }
    }
    *vs = out;
}

/// Lowest `k` eigenpairs by shift-and-invert block subspace iteration with
/// Rayleigh-Ritz, the shifted operator factored by banded Cholesky.
pub fn ground_state_with(op: &MagneticOperator, d: &Domain, k: usize, opts: EigenOptions) -> Result<Spectrum> {
    if k < 2 {
        return Err(Error::Invalid("at least two eigenpairs are required".into()));
    }
    let n = op.dim();
    if k > n {
        return Err(Error::Invalid(format!("{k} eigenpairs requested from a {n}-dimensional operator")));
    }
    let m = (k + 4).min(n);
    let chol: BandCholesky<Complex64> = op.to_band(opts.shift).cholesky()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<Complex64>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect()
        })
        .collect();
    orthonormalize(&mut x);
    let mut hx = vec![Complex64::new(0.0, 0.0); n];
    let mut theta = vec![0.0; m];
    let mut res = vec![f64::INFINITY; m];
    for it in 1..=opts.max_iter {
        let mut y: Vec<Vec<Complex64>> = x.iter().map(|v| chol.solve(v)).collect();
        orthonormalize(&mut y);
        let b = y.len();
        let hy: Vec<Vec<Complex64>> = y
            .iter()
            .map(|v| {
                op.apply_into(v, &mut hx);
                hx.clone()
            })
            .collect();
        let mut a = DMatrix::<Complex64>::zeros(b, b);
        for i in 0..b {
            for j in 0..b {
                a[(i, j)] = y[i].iter().zip(&hy[j]).map(|(p, q)| p.conj() * q).sum();
            }
        }
        let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
        let mut newx = Vec::with_capacity(b);
        let mut newhx = Vec::with_capacity(b);
        theta = Vec::with_capacity(b);
        for &c in &order {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            let mut w = vec![Complex64::new(0.0, 0.0); n];
            for r in 0..b {
                let coef = eig.eigenvectors[(r, c)];
                for t in 0..n {
                    v[t] += coef * y[r][t];
                    w[t] += coef * hy[r][t];
                }
            }
            theta.push(eig.eigenvalues[c]);
            newx.push(v);
            newhx.push(w);
        }
        res = (0..b)
            .map(|j| {
                let r: f64 = newhx[j]
                    .iter()
                    .zip(&newx[j])
                    .map(|(p, q)| (p - q * theta[j]).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                r / theta[j].abs().max(1.0)
            })
            .collect();
        x = newx;
        if res[..k].iter().all(|&r| r <= opts.tol) {
            return Ok(finish(d, x, theta, res, k, it));
        }
    }
    Err(Error::NonConvergence {
        solver: "shift-invert subspace iteration",
        iterations: opts.max_iter,
        residual: res[..k].iter().cloned().fold(0.0, f64::max),
        history: res[..k].to_vec(),
    })
}

fn fix_phase(v: &mut [Complex64]) {
    let mut best = 0;
    let mut bm = -1.0;
    for (i, z) in v.iter().enumerate() {
        // tie-break towards the first index among (numerically) equal maxima
        if z.norm() > bm * (1.0 + 1e-9) {
            bm = z.norm();
            best = i;
        }
    }
    if bm > 0.0 {
        let ph = v[best].conj() / bm;
        v.iter_mut().for_each(|z| *z *= ph);
    }
}

fn finish(d: &Domain, x: Vec<Vec<Complex64>>, theta: Vec<f64>, res: Vec<f64>, k: usize, it: usize) -> Spectrum {
    let scale = 1.0 / d.h;
    let eigenvectors: Vec<ComplexField> = x
        .into_iter()
        .take(k)
        .map(|mut v| {
            fix_phase(&mut v);
            ComplexField {
                values: v.into_iter().map(|z| z * scale).collect(),
            }
        })
        .collect();
    Spectrum {
        lambda1: theta[0],
        u1: eigenvectors[0].clone(),
        lambda2: theta[1],
        gap: theta[1] - theta[0],
        eigenvalues: theta[..k].to_vec(),
        eigenvectors,
        residuals: res[..k].to_vec(),
        iterations: it,
    }
}

/// All eigenvalues by dense Hermitian diagonalization (test oracle; small grids only).
pub fn dense_eigenvalues(op: &MagneticOperator) -> Vec<f64> {
    let eig = SymmetricEigen::new(op.to_dense());
    let mut v: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxVerdict {
    pub positive: bool,
    pub reason: String,
}

/// Predicts `λ⁽¹⁾ > 0`: true iff the field is nonzero in Ω or some hole
/// circulation `(1/2π)∮ A_e` is not an integer (within 1e-6).
pub fn flux_criterion(gauge: &GaugeData, field: &ExternalField, d: &Domain) -> FluxVerdict {
    if field.max_in_omega(d) > 1e-12 {
        return FluxVerdict {
            positive: true,
            reason: "field in Ω".into(),
        };
    }
    for (k, c) in gauge.hole_circulations.iter().enumerate() {
        if (c - c.round()).abs() > 1e-6 {
            return FluxVerdict {
                positive: true,
                reason: format!("non-integer circulation {c:.6} around hole_{k}"),
            };
        }
    }
    FluxVerdict {
        positive: false,
        reason: "no field in Ω and integer circulation around every hole".into(),
    }
}
