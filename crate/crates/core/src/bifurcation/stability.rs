//! Lowest Hessian eigenvalues in the Coulomb slice and the strict-stability verdict.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{curl, ComplexField};
use crate::error::{Error, Result};
use crate::functional::{from_stream_function, neumann_matrix, GLParameters, GLState, Model};
use crate::gauge::{gather_interior, DirichletLaplacian};
use crate::linalg::lobpcg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    StrictlyStable,
    Unstable,
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityOptions {
    /// number of eigenvalues computed
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// largest EL residual accepted as a critical point
    pub critical_tol: f64,
    pub seed: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            k: 4,
            tol: 1e-9,
            max_iter: 3000,
            critical_tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    /// lowest eigenvalues of the Hessian in the `L²` metric, ascending
    pub eigenvalues: Vec<f64>,
    /// eigenvalue attributed to the phase direction `(iu, 0)`
    pub phase_eigenvalue: Option<f64>,
    pub stab_tol: f64,
    pub el_residual: f64,
    pub converged: bool,
}

/// Verdict on a critical point from the `k` lowest eigenvalues of the Hessian,
/// with `stab_tol = 1e-6 λ₁`.
pub fn strict_stability(
    model: Model,
    state: &GLState,
    p: GLParameters,
    lambda1: f64,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    let d = model.d;
    let (ru, ra) = model.el_residual(state, p);
    let el_residual = (ru.norm(d).powi(2) + ra.norm(d).powi(2)).sqrt();
    if el_residual > opts.critical_tol {
        return Err(Error::Invalid(format!(
            "not a critical point: EL residual {el_residual:.3e} exceeds {:.1e}",
            opts.critical_tol
        )));
    }
    let n = d.n_omega();
    let lap = DirichletLaplacian::new(d)?;
    let m = lap.dim();
    let neumann = neumann_matrix(d, 1.0).cholesky()?;
    let w = p.field_weight();
    let unpack = |x: &[f64]| {
        let du = ComplexField {
            values: (0..n).map(|k| Complex64::new(x[k], x[n + k])).collect(),
        };
        (du, from_stream_function(d, &x[2 * n..]))
    };
    let apply_a = |x: &[f64]| {
        let (du, da) = unpack(x);
        let (hu, ha) = model.hessian_apply(state, p, &du, &da);
        let mut out: Vec<f64> = hu.values.iter().map(|z| z.re).collect();
        out.extend(hu.values.iter().map(|z| z.im));
        out.extend(gather_interior(d, &curl(d, &ha)).into_iter().map(|v| w * v));
        out
    };
    let apply_b = |x: &[f64]| {
        let mut out = x[..2 * n].to_vec();
        out.extend(lap.apply(&x[2 * n..]).into_iter().map(|v| w * v));
        out
    };
    let precond = |r: &[f64]| {
        let mut out = neumann.solve(&r[..n]);
        out.extend(neumann.solve(&r[n..2 * n]));
        let psi = lap.solve(&lap.solve(&r[2 * n..]));
        out.extend(psi.into_iter().map(|v| v / w));
        out
    };

    let umax = state.u.max_abs();
    let phase: Option<Vec<f64>> = (umax > 0.0).then(|| {
        let mut v: Vec<f64> = state.u.values.iter().map(|z| -z.im).collect();
        v.extend(state.u.values.iter().map(|z| z.re));
        v.extend(std::iter::repeat_n(0.0, m));
        v
    });
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let block = opts.k + 3;
    let mut x0: Vec<Vec<f64>> = Vec::with_capacity(block);
    if let Some(v) = &phase {
        x0.push(v.clone());
        let mut amp: Vec<f64> = state.u.values.iter().map(|z| z.re).collect();
        amp.extend(state.u.values.iter().map(|z| z.im));
        amp.extend(std::iter::repeat_n(0.0, m));
        x0.push(amp);
    }
    while x0.len() < block {
        x0.push((0..2 * n + m).map(|_| rng.random::<f64>() - 0.5).collect());
    }
    let out = lobpcg(apply_a, apply_b, precond, x0, opts.k, opts.tol, opts.max_iter);
    let k = opts.k.min(out.eigenvalues.len());
    let eigenvalues = out.eigenvalues[..k].to_vec();

    let phase_index = phase.as_ref().and_then(|v| {
        let bv = apply_b(v);
        let vv: f64 = v.iter().zip(&bv).map(|(a, b)| a * b).sum();
        (0..k)
            .map(|j| {
                let x = &out.eigenvectors[j];
                let bx = apply_b(x);
                let xx: f64 = x.iter().zip(&bx).map(|(a, b)| a * b).sum();
                let c: f64 = x.iter().zip(&bv).map(|(a, b)| a * b).sum();
                (j, c.abs() / (xx * vv).sqrt())
            })
            .filter(|&(_, o)| o > 0.5)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
    });
    let stab_tol = 1e-6 * lambda1;
    let phase_eigenvalue = phase_index.map(|j| eigenvalues[j]);
    let others = (0..k).filter(|&j| Some(j) != phase_index).map(|j| eigenvalues[j]);
    let min_other = others.fold(f64::INFINITY, f64::min);
    let verdict = if min_other < -stab_tol || phase_eigenvalue.is_some_and(|v| v < -stab_tol) {
        Verdict::Unstable
    } else if min_other > stab_tol && phase_eigenvalue.is_none_or(|v| v.abs() <= stab_tol) {
        Verdict::StrictlyStable
    } else {
        Verdict::Marginal
    };
    Ok(StabilityReport {
        verdict,
        eigenvalues,
        phase_eigenvalue,
        stab_tol,
        el_residual,
        converged: out.converged,
    })
}
