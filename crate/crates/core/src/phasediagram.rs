//! The threshold `λ₀^opt(κ)` below which the normal state `(0, A_e)` is the global
//! minimizer, its bounds, and conversion from physical to dimensionless parameters.
//!
//! Global optimality is decided by the fixed multi-start portfolio of
//! [`minimize_multistart`]; verdicts are only as good as that portfolio.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{curl, kinetic_energy, ComplexField, LinkPhases, NodeField, VectorField};
use crate::domain::{Domain, Region};
use crate::error::{Error, Result};
use crate::functional::{minimize_multistart, GLParameters, GLState, MinimizeOptions, Minimizer, Model};
use crate::spectra::Spectrum;

/// `λ₁` at or below this is treated as zero.
pub const LAMBDA1_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseOptions {
    /// bracket width relative to `λ₁`
    pub tol: f64,
    pub max_probes: usize,
    /// energies below `−energy_tol_factor·λ|Ω|` count as condensed
    pub energy_tol_factor: f64,
    pub minimize: MinimizeOptions,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            tol: 2e-3,
            max_probes: 20,
            energy_tol_factor: 1e-9,
            minimize: MinimizeOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NormalOptimal,
    Condensed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub params: GLParameters,
    pub energy_tol: f64,
    /// `G(1, 0)`: constant order parameter with the field expelled
    pub competitor_energy: f64,
    pub competitor_beats_normal: bool,
    pub best_energy: f64,
    pub best_start: String,
    pub verdict: Verdict,
    pub all_converged: bool,
    pub witness: GLState,
}

/// One probe of the bisection, without its witness state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub lambda: f64,
    pub best_energy: f64,
    pub verdict: Verdict,
    pub all_converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub kappa: f64,
    pub lambda1: f64,
    pub lambda_opt: f64,
    /// normal state optimal at `bracket.0`, not at `bracket.1` (or `bracket.1 = λ₁`)
    pub bracket: (f64, f64),
    pub tol: f64,
    pub probes: Vec<Probe>,
    /// some minimization failed, or the probe budget ran out before the tolerance
    pub flagged: bool,
    /// `√(|Ω| / 2∫_{Ω̃}H_e²)`
    pub lower_ratio: f64,
    /// `√(2∫_{Ω̃}H_e² / |Ω|)`: above `κ` times this ratio the competitor `(1, 0)` beats the normal state
    pub competitor_ratio: f64,
}

impl PhasePoint {
    /// No probe below `λ₁` found a condensed state.
    pub fn saturated(&self) -> bool {
        self.bracket.1 >= self.lambda1
    }

    pub fn within_spectral_bound(&self) -> bool {
        self.lambda_opt <= self.lambda1 + self.tol && self.lambda_opt > 0.0
    }

    /// `λ₀^opt/κ ≥ √(|Ω|/2∫H²) − tol`
    pub fn satisfies_lower_bound(&self) -> bool {
        self.bracket.1 / self.kappa >= self.lower_ratio - self.tol / self.kappa
    }

    /// `λ₀^opt/κ ≤ √(2∫H²/|Ω|) + tol`
    pub fn satisfies_competitor_bound(&self) -> bool {
        self.bracket.0 / self.kappa <= self.competitor_ratio + self.tol / self.kappa
    }
}

fn field_ratios(model: &Model) -> Result<(f64, f64)> {
    let area = model.d.area(Region::Omega)?;
    let h2 = model.gauge.h_e.interior_sq_integral(model.d);
    if h2 <= 0.0 {
        return Ok((f64::INFINITY, 0.0));
    }
    Ok(((area / (2.0 * h2)).sqrt(), (2.0 * h2 / area).sqrt()))
}

/// Competitor `(1, 0)` against the multi-start minimizer at fixed `(λ, κ)`.
pub fn normal_vs_condensed_probe(
    minimizer: &Minimizer,
    p: GLParameters,
    u1: Option<&ComplexField>,
    warm: Option<&GLState>,
    opts: &PhaseOptions,
) -> Result<ProbeOutcome> {
    let model = minimizer.model;
    let d = model.d;
    let area = d.area(Region::Omega)?;
    let energy_tol = opts.energy_tol_factor * p.lambda * area;
    let competitor = GLState {
        u: ComplexField {
            values: vec![num_complex::Complex64::new(1.0, 0.0); d.n_omega()],
        },
        a: model.gauge.a_e.scale(-1.0),
    };
    let competitor_energy = model.energy(&competitor, p);
    let ms = minimize_multistart(minimizer, p, u1, &opts.minimize);
    let mut all_converged = ms.all_converged();
    let mut best_energy = ms.best().report.energy;
    let mut best_start = format!("{:?}", ms.runs[ms.best].0);
    let mut witness = ms.best().state.clone();
    if let Some(w) = warm {
        let o = minimizer.run(p, w, &opts.minimize);
        all_converged &= o.converged;
        if o.report.energy < best_energy {
            best_energy = o.report.energy;
            best_start = "Warm".into();
            witness = o.state;
        }
    }
    if competitor_energy < best_energy {
        best_energy = competitor_energy;
        best_start = "CompetitorUnrelaxed".into();
        witness = competitor;
    }
    let verdict = if best_energy < -energy_tol {
        Verdict::Condensed
    } else {
        Verdict::NormalOptimal
    };
    Ok(ProbeOutcome {
        params: p,
        energy_tol,
        competitor_energy,
        competitor_beats_normal: competitor_energy < -energy_tol,
        best_energy,
        best_start,
        verdict,
        all_converged,
        witness,
    })
}

/// Bisection for `λ₀^opt(κ)` on `(0, λ₁]`.
pub fn lambda_opt(model: Model, spectrum: &Spectrum, kappa: f64, opts: &PhaseOptions) -> Result<PhasePoint> {
    let lambda1 = spectrum.lambda1;
    if lambda1 <= LAMBDA1_FLOOR {
        return Err(Error::Invalid(format!(
            "lambda_opt needs λ₁ > 0, got {lambda1:e}: the normal state is never a minimizer"
        )));
    }
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::Invalid(format!("kappa must be positive, got {kappa}")));
    }
    let (lower_ratio, competitor_ratio) = field_ratios(&model)?;
    let minimizer = Minimizer::new(model)?;
    let tol = opts.tol * lambda1;
    let (mut lo, mut hi) = (0.0, lambda1);
    let mut warm: Option<GLState> = None;
    let mut probes = Vec::new();
    while hi - lo > tol && probes.len() < opts.max_probes {
        let mid = 0.5 * (lo + hi);
        let p = GLParameters::new(mid, kappa)?;
        let out = normal_vs_condensed_probe(&minimizer, p, Some(&spectrum.u1), warm.as_ref(), opts)?;
        probes.push(Probe {
            lambda: mid,
            best_energy: out.best_energy,
            verdict: out.verdict,
            all_converged: out.all_converged,
        });
        match out.verdict {
            Verdict::NormalOptimal => lo = mid,
            Verdict::Condensed => {
                hi = mid;
                warm = Some(out.witness);
            }
        }
    }
    let flagged = hi - lo > tol
        || probes
            .iter()
            .any(|p| p.verdict == Verdict::NormalOptimal && !p.all_converged);
    Ok(PhasePoint {
        kappa,
        lambda1,
        lambda_opt: 0.5 * (lo + hi),
        bracket: (lo, hi),
        tol,
        probes,
        flagged,
        lower_ratio,
        competitor_ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub lambda1: f64,
    /// `√(2K₀/I₀)` from the bifurcation coefficients, when available
    pub kappa_c: Option<f64>,
    /// sorted by `κ`
    pub points: Vec<PhasePoint>,
}

impl PhaseDiagram {
    /// `λ₀^opt` non-decreasing in `κ` within the bracket tolerance.
    pub fn monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[0].bracket.0 <= w[1].bracket.1 + w[0].tol.max(w[1].tol))
    }

    /// Smallest sweep `κ` from which every point is saturated.
    pub fn saturation_kappa(&self) -> Option<f64> {
        let first = self.points.iter().rposition(|p| !p.saturated()).map_or(0, |i| i + 1);
        self.points.get(first).map(|p| p.kappa)
    }

    /// `|κ_sat − κ_c| / κ_c`
    pub fn saturation_mismatch(&self) -> Option<f64> {
        Some((self.saturation_kappa()? - self.kappa_c?).abs() / self.kappa_c?)
    }

    pub fn flagged(&self) -> bool {
        self.points.iter().any(|p| p.flagged)
    }
}

/// `λ₀^opt` over a `κ` sweep, points in parallel.
pub fn sweep(model: Model, spectrum: &Spectrum, kappas: &[f64], kappa_c: Option<f64>, opts: &PhaseOptions) -> Result<PhaseDiagram> {
    let mut kappas = kappas.to_vec();
    kappas.sort_by(f64::total_cmp);
    let points = kappas
        .par_iter()
        .map(|&k| lambda_opt(model, spectrum, k, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagram {
        lambda1: spectrum.lambda1,
        kappa_c,
        points,
    })
}

/// Physical Ginzburg–Landau constants in any consistent unit system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParameters {
    /// condensation coefficient, negative below `T_c`
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub e: f64,
    pub c_light: f64,
    pub hbar: f64,
    /// amplitude of the applied field
    pub h_tilde: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledParameters {
    /// `4m|a|/ℏ²`
    pub lambda: f64,
    /// `(mc/(eℏ))(b/8π)^{1/2}`
    pub kappa: f64,
    /// `κ` for which the physical energy equals `energy_scale · G_{λ,κ}` term by term
    pub kappa_consistent: f64,
    /// `2e/(ℏc)`
    pub field_scale: f64,
    /// `field_scale · h_tilde`
    pub h_e: f64,
    /// `|a|ℏ²/(4mb)`
    pub energy_scale: f64,
    /// `√(|a|/b)`, the amplitude of `ũ` for `|u| = 1`
    pub order_scale: f64,
}

pub fn scaling_convert(phys: &PhysicalParameters) -> Result<ScaledParameters> {
    let PhysicalParameters {
        a,
        b,
        m,
        e,
        c_light,
        hbar,
        h_tilde,
    } = *phys;
    let mut bad = Vec::new();
    if !(a < 0.0 && a.is_finite()) {
        bad.push(format!("a = {a} (must be negative)"));
    }
    for (name, v) in [("b", b), ("m", m), ("e", e), ("c_light", c_light), ("hbar", hbar)] {
        if !(v > 0.0 && v.is_finite()) {
            bad.push(format!("{name} = {v} (must be positive)"));
        }
    }
    if !h_tilde.is_finite() {
        bad.push(format!("h_tilde = {h_tilde}"));
    }
    if !bad.is_empty() {
        return Err(Error::Invalid(format!("physical parameters: {}", bad.join(", "))));
    }
    let kappa = m * c_light / (e * hbar) * (b / (8.0 * std::f64::consts::PI)).sqrt();
    let field_scale = 2.0 * e / (hbar * c_light);
    Ok(ScaledParameters {
        lambda: 4.0 * m * a.abs() / (hbar * hbar),
        kappa,
        kappa_consistent: 2.0 * kappa,
        field_scale,
        h_e: field_scale * h_tilde,
        energy_scale: a.abs() * hbar * hbar / (4.0 * m * b),
        order_scale: (a.abs() / b).sqrt(),
    })
}

/// `(ũ, Ã, H̃)` in physical units for a dimensionless state.
pub fn to_physical(model: &Model, s: &ScaledParameters, state: &GLState) -> (ComplexField, VectorField, NodeField) {
    let u = &state.u * s.order_scale;
    let a = (&model.gauge.a_e + &state.a).scale(1.0 / s.field_scale);
    let h = model.gauge.h_e.scale(1.0 / s.field_scale);
    (u, a, h)
}

/// `∫(1/8π)|rot Ã − H̃|² + ∫ (ℏ²/4m)|(∇ − i(2e/ℏc)Ã)ũ|² + ∫(a|ũ|² + (b/2)|ũ|⁴)` on the grid.
pub fn physical_energy(d: &Domain, phys: &PhysicalParameters, u: &ComplexField, a: &VectorField, h: &NodeField) -> f64 {
    let q = 2.0 * phys.e / (phys.hbar * phys.c_light);
    let w = d.cell_weight();
    let potential: f64 = u
        .values
        .iter()
        .map(|z| {
            let m = z.norm_sqr();
            phys.a * m + 0.5 * phys.b * m * m
        })
        .sum::<f64>()
        * w;
    let links = LinkPhases::from_potential(d, &a.scale(q));
    let kinetic = phys.hbar * phys.hbar / (4.0 * phys.m) * kinetic_energy(d, u, &links);
    let field = (&curl(d, a) - h).interior_sq_integral(d) / (8.0 * std::f64::consts::PI);
    potential + kinetic + field
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HatScaling {
    /// `x = length_scale · x̂`, `length_scale = κ/√λ`
    pub length_scale: f64,
    pub diameter: f64,
    pub area: f64,
    /// `κ²/λ`
    pub field_factor: f64,
    pub max_field: f64,
}

/// Bookkeeping for the `κ²`-normalized functional on `Ω̂ = (√λ/κ)Ω`; the diameter is
/// measured between boundary face midpoints.
pub fn hat_rescale(p: GLParameters, d: &Domain, gauge_h_max: f64) -> Result<HatScaling> {
    let pts: Vec<[f64; 2]> = d.boundary_faces().iter().map(|b| d.face_midpoint(b.face)).collect();
    let diameter = pts
        .iter()
        .flat_map(|a| pts.iter().map(move |b| (a[0] - b[0]).hypot(a[1] - b[1])))
        .fold(0.0, f64::max);
    let length_scale = p.kappa / p.lambda.sqrt();
    let field_factor = p.kappa * p.kappa / p.lambda;
    Ok(HatScaling {
        length_scale,
        diameter: diameter / length_scale,
        area: d.area(Region::Omega)? / (length_scale * length_scale),
        field_factor,
        max_field: field_factor * gauge_h_max,
    })
}
