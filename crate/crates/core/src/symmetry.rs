//! Half-flux symmetry: the phase `e^{iφ}` with `dφ = 2A_e`, the antilinear
//! involution `K u = e^{−iφ} ū`, the branch traced inside the `K`-real subspace
//! and the nodal set of `K`-real states.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bifurcation::{coefficients, quadratic_fit, Branch, BranchSolver, ContinuationOptions};
use crate::calculus::ComplexField;
use crate::domain::{betti, components, BoundaryId, Domain, VertexClass, NONE};
use crate::error::{Error, Result};
use crate::functional::Model;
use crate::gauge::GaugeData;
use crate::spectra::Spectrum;

/// Tolerance on `H_e` at vertices surrounded by Ω.
pub const FIELD_TOL: f64 = 1e-10;
/// Tolerance on the distance of each hole flux to `Z + ½`.
pub const FLUX_TOL: f64 = 1e-6;
pub const LOOP_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HalfFluxPhase {
    /// `e^{iφ}` per Ω cell
    pub phase_factor: Vec<Complex64>,
    /// `φ` integrated along the spanning tree
    pub phi: Vec<f64>,
    /// integer `k_e` with `φ_head − φ_tail + 2hA_e = 2πk_e`, per edge
    pub winding: Vec<i64>,
    /// largest deviation of `φ_head − φ_tail + 2hA_e` from `2πZ`
    pub loop_defect: f64,
}

fn wrap(x: f64) -> f64 {
    x - TAU * (x / TAU).round()
}

/// Builds `φ` on a breadth-first spanning tree of the Ω cell graph.
pub fn half_flux_phase(gauge: &GaugeData, d: &Domain) -> Result<HalfFluxPhase> {
    for v in 0..d.n_vertices() {
        if d.vertex_class(v) == VertexClass::OmegaInterior && gauge.h_e.values[v].abs() > FIELD_TOL {
            let p = d.vertex_position(v);
            return Err(Error::HalfFlux(format!(
                "external field {:.3e} inside Ω at ({:.3}, {:.3})",
                gauge.h_e.values[v], p[0], p[1]
            )));
        }
    }
    for (k, &flux) in gauge.hole_circulations.iter().enumerate() {
        if (flux - flux.floor() - 0.5).abs() > FLUX_TOL {
            return Err(Error::HalfFlux(format!("hole_{k} carries flux {flux:.6}, not in Z + 1/2")));
        }
    }
    let n = d.n_omega();
    let edges = d.edges();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, e) in edges.iter().enumerate() {
        adj[e.tail].push((e.head, k));
        adj[e.head].push((e.tail, k));
    }
    let mut phi = vec![f64::NAN; n];
    let increment = |k: usize| -2.0 * d.h * gauge.a_e.values[edges[k].face];
    phi[0] = 0.0;
    let mut queue = VecDeque::from([0]);
    while let Some(c) = queue.pop_front() {
        for &(nb, k) in &adj[c] {
            if phi[nb].is_nan() {
                let dphi = increment(k);
                phi[nb] = if edges[k].tail == c { phi[c] + dphi } else { phi[c] - dphi };
                queue.push_back(nb);
            }
        }
    }
    let mut loop_defect: f64 = 0.0;
    let winding = (0..edges.len())
        .map(|k| {
            let e = edges[k];
            let mismatch = phi[e.head] - phi[e.tail] - increment(k);
            loop_defect = loop_defect.max(wrap(mismatch).abs());
            (mismatch / TAU).round() as i64
        })
        .collect();
    if loop_defect > LOOP_TOL {
        return Err(Error::HalfFlux(format!("phase not single valued: loop defect {loop_defect:.3e}")));
    }
    Ok(HalfFluxPhase {
        phase_factor: phi.iter().map(|&p| Complex64::from_polar(1.0, p)).collect(),
        phi,
        winding,
        loop_defect,
    })
}

impl HalfFluxPhase {
    /// `K u = e^{−iφ} ū`
    pub fn apply(&self, u: &ComplexField) -> ComplexField {
        ComplexField {
            values: u.values.iter().zip(&self.phase_factor).map(|(u, p)| p.conj() * u.conj()).collect(),
        }
    }

    /// `(u + Ku)/2`; fails when `u` is (nearly) `K`-imaginary.
    pub fn project_real(&self, u: &ComplexField) -> Result<ComplexField> {
        let p = &(u + &self.apply(u)) * 0.5;
        let (np, nu) = (norm(&p), norm(u));
        if np <= 1e-8 * nu || nu == 0.0 {
            return Err(Error::HalfFlux(format!(
                "projection onto K-real fields vanishes (|P u|/|u| = {:.1e}); rotate u by i",
                np / nu.max(f64::MIN_POSITIVE)
            )));
        }
        Ok(p)
    }

    /// Real representative `w = Re(e^{iφ/2} u)` of a `K`-real field.
    pub fn lift(&self, u: &ComplexField) -> Vec<f64> {
        u.values
            .iter()
            .zip(&self.phi)
            .map(|(u, &p)| (Complex64::from_polar(1.0, 0.5 * p) * u).re)
            .collect()
    }
}

fn norm(u: &ComplexField) -> f64 {
    u.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn k_apply(u: &ComplexField, phase: &HalfFluxPhase) -> ComplexField {
    phase.apply(u)
}

pub fn project_k_real(u: &ComplexField, phase: &HalfFluxPhase) -> Result<ComplexField> {
    phase.project_real(u)
}

/// Normalized `K`-real ground state.
pub fn k_real_ground_state(spectrum: &Spectrum, phase: &HalfFluxPhase, d: &Domain) -> Result<ComplexField> {
    let u = match phase.project_real(&spectrum.u1) {
        Ok(u) => u,
        Err(_) => phase.project_real(&spectrum.u1.scale(Complex64::new(0.0, 1.0)))?,
    };
    Ok(u.normalized(d))
}

/// Branch of the reduced equation `−Δ_{A_e}u + λ(|u|² − 1)u = 0` (field frozen at `A_e`)
/// inside the `K`-real subspace.
pub fn reduced_branch(
    model: Model,
    spectrum: &Spectrum,
    phase: &HalfFluxPhase,
    kappa: f64,
    alphas: &[f64],
    opts: ContinuationOptions,
) -> Result<Branch> {
    if let Some(a) = alphas.iter().find(|a| !a.is_finite() || a.abs() > opts.alpha_max) {
        return Err(Error::Invalid(format!("amplitude {a} outside [-{m}, {m}]", m = opts.alpha_max)));
    }
    let d = model.d;
    let u1 = k_real_ground_state(spectrum, phase, d)?;
    let mut sp = spectrum.clone();
    sp.u1 = u1.clone();
    let coeffs = coefficients(model, &sp, kappa)?;
    let u3 = phase.project_real(&coeffs.u3).unwrap_or_else(|_| ComplexField::zeros(d));
    let c = spectrum.lambda1 * coeffs.i0;
    let solver = BranchSolver::new(model, &u1, kappa, false, opts)?
        .with_projection(|u: &ComplexField| phase.project_real(u).unwrap_or_else(|_| u.clone()));
    let mut samples = Vec::with_capacity(alphas.len());
    let mut truncated = false;
    for &alpha in alphas {
        let mut u = &u1 * alpha;
        u.axpy(Complex64::new(alpha.powi(3), 0.0), &u3);
        let guess = crate::functional::GLState {
            u,
            a: crate::calculus::VectorField::zeros(d),
        };
        let s = solver.solve(alpha, &guess, spectrum.lambda1 + c * alpha * alpha);
        let ok = s.converged;
        samples.push(s);
        if !ok {
            truncated = true;
            break;
        }
    }
    Ok(Branch {
        lambda1: spectrum.lambda1,
        kappa,
        c_kappa: c,
        fit: quadratic_fit(spectrum.lambda1, &samples),
        samples,
        truncated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalReport {
    pub epsilon: f64,
    /// grid indices of the zero cells
    pub zero_cells: Vec<usize>,
    pub curve_components: usize,
    /// boundaries reached by each component
    pub touches: Vec<Vec<BoundaryId>>,
    /// Ω without the zero cells has first Betti number zero
    pub slits: bool,
}

/// Zero set of a `K`-real field: cells with `|u| < ε max|u|` at which the lifted
/// real representative changes sign (the smaller side of each sign change).
pub fn nodal_set(u: &ComplexField, d: &Domain, phase: &HalfFluxPhase, epsilon: f64) -> Result<NodalReport> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Invalid(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    let w = phase.lift(u);
    let cutoff = epsilon * u.max_abs();
    let mut zero = vec![false; d.n_cells()];
    for (e, &k) in d.edges().iter().zip(&phase.winding) {
        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        if w[e.tail] * w[e.head] * sign >= 0.0 {
            continue;
        }
        let c = if w[e.tail].abs() <= w[e.head].abs() { e.tail } else { e.head };
        if u.values[c].norm() < cutoff {
            zero[d.omega_cells()[c]] = true;
        }
    }
    let (comp, count) = components(d.nx, d.ny, &zero, true);

    // Ω cells carrying a boundary face, per boundary
    let ids = d.boundary_ids();
    let mut near: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ids.len()];
    for bf in d.boundary_faces() {
        let b = ids.iter().position(|&x| x == bf.boundary).unwrap_or(0);
        let (c0, c1) = d.face_cells(bf.face);
        for c in [c0, c1].into_iter().flatten() {
            if d.omega_index(c) != NONE {
                near[b].insert(c);
            }
        }
    }
    let mut touches: Vec<BTreeSet<BoundaryId>> = vec![BTreeSet::new(); count];
    for c in 0..d.n_cells() {
        if !zero[c] {
            continue;
        }
        let (i, j) = ((c % d.nx) as i64, (c / d.nx) as i64);
        for di in -1..=1 {
            for dj in -1..=1 {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= d.nx as i64 || b >= d.ny as i64 {
                    continue;
                }
                let nb = d.cell(a as usize, b as usize);
                for (k, set) in near.iter().enumerate() {
                    if set.contains(&nb) {
                        touches[comp[c]].insert(ids[k]);
                    }
                }
            }
        }
    }
    let rest: Vec<bool> = (0..d.n_cells()).map(|c| d.omega_index(c) != NONE && !zero[c]).collect();
    let (_, b1) = betti(d.nx, d.ny, &rest);
    Ok(NodalReport {
        epsilon,
        zero_cells: (0..d.n_cells()).filter(|&c| zero[c]).collect(),
        curve_components: count,
        touches: touches.into_iter().map(|s| s.into_iter().collect()).collect(),
        slits: b1 == 0,
    })
}

/// Angle of `x` seen from `center`, in `(−π, π]`.
pub fn polar_angle(x: [f64; 2], center: [f64; 2]) -> f64 {
    let a = (x[1] - center[1]).atan2(x[0] - center[0]);
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}
