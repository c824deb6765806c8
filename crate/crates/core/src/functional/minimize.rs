//! Preconditioned nonlinear conjugate gradients in `(u, ψ)`, with `a = rot* ψ`
//! so every iterate stays in the Coulomb slice.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{from_stream_function, stream_function, GLParameters, GLState, Model, SolutionReport};
use crate::calculus::{curl, ComplexField, VectorField};
use crate::domain::{Domain, Region};
use crate::error::Result;
use crate::gauge::{gather_interior, DirichletLaplacian};
use crate::linalg::{BandCholesky, BandMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimizeOptions {
    /// residual tolerance relative to the initial residual (floored at `1e-2 λ |Ω|^{1/2}`)
    pub tol: f64,
    pub max_iter: usize,
    /// seed of the random start
    pub seed: u64,
    /// amplitude of the `±α u₁` starts
    pub alpha_seed: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            seed: 0,
            alpha_seed: 0.3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartKind {
    Normal,
    /// `u ≡ 1`, `a = 0`
    Constant,
    /// `u ≡ 1`, `A = 0` (i.e. `a = −A_e`)
    Competitor,
    EigenPlus,
    EigenMinus,
    Random,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimizeOutcome {
    pub state: GLState,
    pub report: SolutionReport,
    pub converged: bool,
    pub iterations: usize,
    pub energy_trace: Vec<f64>,
    /// final residual relative to the convergence scale
    pub relative_residual: f64,
}

/// Real `−Δ_N + shift` on the Ω cells.
pub fn neumann_matrix(d: &Domain, shift: f64) -> BandMatrix<f64> {
    let s = 1.0 / (d.h * d.h);
    let mut trip = Vec::with_capacity(d.n_omega() + 4 * d.edges().len());
    for k in 0..d.n_omega() {
        trip.push((k, k, shift));
    }
    for e in d.edges() {
        trip.push((e.tail, e.tail, s));
        trip.push((e.head, e.head, s));
        trip.push((e.tail, e.head, -s));
        trip.push((e.head, e.tail, -s));
    }
    BandMatrix::from_triplets(d.n_omega(), &trip)
}

struct Eval {
    energy: f64,
    ru: Vec<Complex64>,
    /// `rot r_a` on the Ω̃-interior vertices
    fpsi: Vec<f64>,
}

#[derive(Clone)]
struct Point {
    u: Vec<Complex64>,
    psi: Vec<f64>,
}

impl Point {
    fn moved(&self, t: f64, dir: &Point) -> Point {
        Point {
            u: self.u.iter().zip(&dir.u).map(|(a, b)| a + b * t).collect(),
            psi: self.psi.iter().zip(&dir.psi).map(|(a, b)| a + b * t).collect(),
        }
    }
}

/// Reusable minimizer: holds the factored preconditioners of one model.
pub struct Minimizer<'a> {
    pub model: Model<'a>,
    neumann: BandCholesky<f64>,
    lap: DirichletLaplacian,
}

impl<'a> Minimizer<'a> {
    pub fn new(model: Model<'a>) -> Result<Self> {
        let neumann = neumann_matrix(model.d, 1.0).cholesky()?;
        let lap = DirichletLaplacian::new(model.d)?;
        Ok(Self { model, neumann, lap })
    }

    pub fn laplacian(&self) -> &DirichletLaplacian {
        &self.lap
    }

    fn state(&self, x: &Point) -> GLState {
        GLState {
            u: ComplexField { values: x.u.clone() },
            a: from_stream_function(self.model.d, &x.psi),
        }
    }

    fn eval(&self, x: &Point, p: GLParameters) -> Eval {
        let s = self.state(x);
        let energy = self.model.energy(&s, p);
        let (ru, ra) = self.model.el_residual(&s, p);
        let fpsi = gather_interior(self.model.d, &curl(self.model.d, &ra));
        Eval {
            energy,
            ru: ru.values,
            fpsi,
        }
    }

    /// `⟨∇E, dir⟩`
    fn slope(&self, ev: &Eval, dir: &Point, p: GLParameters) -> f64 {
        let h2 = self.model.d.cell_weight();
        let su: f64 = ev.ru.iter().zip(&dir.u).map(|(r, v)| (r.conj() * v).re).sum();
        let sp: f64 = ev.fpsi.iter().zip(&dir.psi).map(|(r, v)| r * v).sum();
        2.0 * h2 * (su + p.field_weight() * sp)
    }

    /// `M⁻¹∇E` and the residual norm `(‖r_u‖² + ‖P r_a‖²)^{1/2}`.
    fn precondition(&self, ev: &Eval) -> (Point, f64) {
        let re: Vec<f64> = ev.ru.iter().map(|z| z.re).collect();
        let im: Vec<f64> = ev.ru.iter().map(|z| z.im).collect();
        let pr = self.neumann.solve(&re);
        let pi = self.neumann.solve(&im);
        let phi = self.lap.solve(&ev.fpsi);
        let psi = self.lap.solve(&phi);
        let h2 = self.model.d.cell_weight();
        let nu: f64 = ev.ru.iter().map(|z| z.norm_sqr()).sum::<f64>() * h2;
        let na: f64 = phi.iter().zip(&ev.fpsi).map(|(a, b)| a * b).sum::<f64>() * h2;
        let u = pr.into_iter().zip(pi).map(|(a, b)| Complex64::new(a, b)).collect();
        (Point { u, psi }, (nu + na.max(0.0)).sqrt())
    }

    fn dot(&self, ev: &Eval, q: &Point, p: GLParameters) -> f64 {
        self.slope(ev, q, p)
    }

    pub fn run(&self, p: GLParameters, init: &GLState, opts: &MinimizeOptions) -> MinimizeOutcome {
        let d = self.model.d;
        let area = d.area(Region::Omega).expect("Ω exists");
        let mut x = Point {
            u: init.u.values.clone(),
            psi: stream_function(d, &self.lap, &init.a),
        };
        let mut ev = self.eval(&x, p);
        let (mut pg, mut res) = self.precondition(&ev);
        let scale = res.max(1e-2 * p.lambda * area.sqrt());
        let target = opts.tol * scale;
        let mut trace = vec![ev.energy];
        let mut dir = Point {
            u: pg.u.iter().map(|z| -z).collect(),
            psi: pg.psi.iter().map(|z| -z).collect(),
        };
        let mut gp_old = self.dot(&ev, &pg, p);
        let mut iterations = 0;
        let mut converged = res <= target;
        let mut failures = 0;
        while !converged && iterations < opts.max_iter {
            iterations += 1;
            let mut d0 = self.slope(&ev, &dir, p);
            if d0 >= 0.0 {
                dir = Point {
                    u: pg.u.iter().map(|z| -z).collect(),
                    psi: pg.psi.iter().map(|z| -z).collect(),
                };
                d0 = self.slope(&ev, &dir, p);
            }
            match self.line_search(&x, &ev, &dir, d0, p) {
                Some((t, nev)) => {
                    failures = 0;
                    x = x.moved(t, &dir);
                    ev = nev;
                }
                None => {
                    failures += 1;
                    if failures >= 2 {
                        break;
                    }
                    // restart along the preconditioned gradient
                    dir = Point {
                        u: pg.u.iter().map(|z| -z).collect(),
                        psi: pg.psi.iter().map(|z| -z).collect(),
                    };
                    continue;
                }
            }
            trace.push(ev.energy);
            let (npg, nres) = self.precondition(&ev);
            res = nres;
            if res <= target {
                converged = true;
                break;
            }
            // Polak-Ribière+, in the preconditioned metric
            let gp_new = self.dot(&ev, &npg, p);
            let diff = Point {
                u: npg.u.iter().zip(&pg.u).map(|(a, b)| a - b).collect(),
                psi: npg.psi.iter().zip(&pg.psi).map(|(a, b)| a - b).collect(),
            };
            let beta = (self.dot(&ev, &diff, p) / gp_old).max(0.0);
            gp_old = gp_new;
            pg = npg;
            dir = Point {
                u: pg.u.iter().zip(&dir.u).map(|(g, v)| -g + v * beta).collect(),
                psi: pg.psi.iter().zip(&dir.psi).map(|(g, v)| -g + v * beta).collect(),
            };
        }
        let state = self.state(&x);
        let report = self.model.check_bounds(&state, p);
        MinimizeOutcome {
            state,
            report,
            converged,
            iterations,
            energy_trace: trace,
            relative_residual: res / scale,
        }
    }

    /// Strong-Wolfe line search driven by the directional derivative:
    /// expansion until bracketed, then safeguarded secant steps on the slope.
    fn line_search(&self, x: &Point, ev0: &Eval, dir: &Point, d0: f64, p: GLParameters) -> Option<(f64, Eval)> {
        const C1: f64 = 1e-4;
        const C2: f64 = 0.1;
        let e0 = ev0.energy;
        let slack = 1e-14 * e0.abs();
        let (mut lo, mut dlo) = (0.0, d0);
        // upper end and its slope (NaN when the energy test failed there)
        let mut hi: Option<(f64, f64)> = None;
        let mut t = 1.0;
        let mut best: Option<(f64, Eval)> = None;
        for _ in 0..60 {
            let ev = self.eval(&x.moved(t, dir), p);
            let dt = self.slope(&ev, dir, p);
            // near convergence energy differences drown in roundoff and only the slope is informative
            let armijo = ev.energy <= e0 + C1 * t * d0 + slack;
            let approx = ev.energy <= e0 + 1e-12 * e0.abs() && dt <= (1.0 - 2.0 * C1) * d0.abs();
            if !ev.energy.is_finite() || !(armijo || approx) {
                hi = Some((t, f64::NAN));
            } else {
                if dt.abs() <= C2 * d0.abs() {
                    return Some((t, ev));
                }
                if dt > 0.0 {
                    hi = Some((t, dt));
                } else {
                    lo = t;
                    dlo = dt;
                }
                if best.as_ref().is_none_or(|b| ev.energy < b.1.energy) {
                    best = Some((t, ev));
                }
            }
            t = match hi {
                None => t * 3.0,
                Some((th, dh)) => {
                    let width = th - lo;
                    if width <= 1e-13 * th {
                        break;
                    }
                    if dh.is_finite() {
                        let s = lo - dlo * width / (dh - dlo);
                        s.clamp(lo + 0.1 * width, th - 0.1 * width)
                    } else {
                        lo + 0.5 * width
                    }
                }
            };
        }
        best
    }
}

pub fn minimize(model: Model, p: GLParameters, init: &GLState, opts: &MinimizeOptions) -> Result<MinimizeOutcome> {
    Ok(Minimizer::new(model)?.run(p, init, opts))
}

/// Initial state for one of the standard starts.
pub fn start_state(model: &Model, kind: StartKind, u1: Option<&ComplexField>, opts: &MinimizeOptions) -> GLState {
    let d = model.d;
    let one = ComplexField {
        values: vec![Complex64::new(1.0, 0.0); d.n_omega()],
    };
    match kind {
        StartKind::Normal => GLState::normal(d),
        StartKind::Constant => GLState {
            u: one,
            a: VectorField::zeros(d),
        },
        StartKind::Competitor => GLState {
            u: one,
            a: model.gauge.a_e.scale(-1.0),
        },
        StartKind::EigenPlus | StartKind::EigenMinus => {
            let s = if kind == StartKind::EigenPlus { 1.0 } else { -1.0 };
            let u = match u1 {
                Some(u1) => u1 * (s * opts.alpha_seed),
                None => &one * (s * opts.alpha_seed),
            };
            GLState {
                u,
                a: VectorField::zeros(d),
            }
        }
        StartKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            GLState {
                u: ComplexField {
                    values: (0..d.n_omega())
                        .map(|_| {
                            let r = rng.random::<f64>();
                            let th = rng.random::<f64>() * std::f64::consts::TAU;
                            Complex64::from_polar(r, th)
                        })
                        .collect(),
                },
                a: VectorField::zeros(d),
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiStart {
    pub runs: Vec<(StartKind, MinimizeOutcome)>,
    /// index into `runs` of the lowest energy
    pub best: usize,
}

impl MultiStart {
    pub fn best(&self) -> &MinimizeOutcome {
        &self.runs[self.best].1
    }

    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|(_, o)| o.converged)
    }
}

pub const STANDARD_STARTS: [StartKind; 6] = [
    StartKind::Normal,
    StartKind::Constant,
    StartKind::Competitor,
    StartKind::EigenPlus,
    StartKind::EigenMinus,
    StartKind::Random,
];

/// Runs the standard start portfolio and keeps the lowest energy.
pub fn minimize_multistart(
    minimizer: &Minimizer,
    p: GLParameters,
    u1: Option<&ComplexField>,
    opts: &MinimizeOptions,
) -> MultiStart {
    let runs: Vec<(StartKind, MinimizeOutcome)> = STANDARD_STARTS
        .iter()
        .map(|&k| {
            let init = start_state(&minimizer.model, k, u1, opts);
            (k, minimizer.run(p, &init, opts))
        })
        .collect();
    let best = (0..runs.len())
        .min_by(|&a, &b| runs[a].1.report.energy.total_cmp(&runs[b].1.report.energy))
        .expect("non-empty portfolio");
    MultiStart { runs, best }
}
