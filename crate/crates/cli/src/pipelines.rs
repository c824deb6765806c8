use gllab_core::bifurcation::{coefficients, strict_stability, trace_branch, Branch};
use gllab_core::domain::{Domain, Region};
use gllab_core::functional::{minimize_multistart, GLParameters, GLState, Minimizer, Model};
use gllab_core::gauge::{external_potential, ExternalField, GaugeData};
use gllab_core::phasediagram::{hat_rescale, physical_energy, scaling_convert, sweep, to_physical};
use gllab_core::spectra::{assemble, dense_eigenvalues, flux_criterion, ground_state_with, Spectrum};
use gllab_core::symmetry::{half_flux_phase, nodal_set, reduced_branch};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Pipeline, RunConfig};
use crate::error::CliError;
use crate::output::Run;

const PORTFOLIO_NOTE: &str = "global-minimality verdicts rest on a fixed multi-start portfolio \
    (normal, constant, field-expelling competitor, ±α u1, random) and are approximate";

struct Scenario {
    d: Domain,
    field: ExternalField,
    g: GaugeData,
}

impl Scenario {
    fn model(&self) -> Model<'_> {
        Model::new(&self.d, &self.g)
    }
}

fn scenario(run: &mut Run, cfg: &RunConfig) -> Result<Scenario, CliError> {
    let (spec, profile) = (cfg.domain.as_ref().unwrap(), cfg.field.as_ref().unwrap());
    let d = run.stage("domain", || Domain::build(spec))?;
    let field = run.stage("field", || ExternalField::sample(profile, &d))?;
    let g = run.stage("gauge", || external_potential(&field, &d))?;
    run.scalar("h", d.h);
    run.scalar("omega_cells", d.n_omega() as f64);
    run.scalar("area", d.area(Region::Omega).unwrap_or(f64::NAN));
    run.scalar("field_sq_integral", field.sq_integral(&d));
    for (k, c) in g.hole_circulations.iter().enumerate() {
        run.scalar(format!("hole_{k}_circulation"), *c);
    }
    Ok(Scenario { d, field, g })
}

fn spectrum(run: &mut Run, cfg: &RunConfig, s: &Scenario, k: usize) -> Result<Spectrum, CliError> {
    let sp = run.stage("eigen", || ground_state_with(&assemble(&s.g, &s.d), &s.d, k, cfg.eigen))?;
    run.scalar("lambda1", sp.lambda1);
    run.scalar("lambda2", sp.lambda2);
    run.scalar("gap", sp.gap);
    Ok(sp)
}

pub fn run(cfg: &RunConfig, threads: usize) -> Result<crate::output::RunManifest, CliError> {
    cfg.validate()?;
    let mut run = Run::new(cfg, threads)?;
    match cfg.pipeline {
        Pipeline::Eigen => eigen(&mut run, cfg)?,
        Pipeline::Minimize => minimize(&mut run, cfg)?,
        Pipeline::Branch => branch(&mut run, cfg)?,
        Pipeline::ReducedBranch => reduced(&mut run, cfg)?,
        Pipeline::Nodal => nodal(&mut run, cfg)?,
        Pipeline::PhaseDiagram => phase_diagram(&mut run, cfg)?,
        Pipeline::Check => check(&mut run, cfg)?,
        Pipeline::Convert => convert(&mut run, cfg)?,
    }
    run.finish()
}

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    eigenvalue: f64,
    residual: f64,
}

fn eigen(run: &mut Run, cfg: &RunConfig) -> Result<(), CliError> {
    let s = scenario(run, cfg)?;
    let sp = spectrum(run, cfg, &s, cfg.parameters.eigenpairs.unwrap_or(4))?;
    run.scalar("relative_gap", sp.relative_gap());
    run.verdict("simple", sp.is_simple())?;
    run.verdict("flux_criterion", flux_criterion(&s.g, &s.field, &s.d))?;
    let rows: Vec<EigenRow> = (0..sp.eigenvalues.len())
        .map(|k| EigenRow {
            index: k,
            eigenvalue: sp.eigenvalues[k],
            residual: sp.residuals[k],
        })
        .collect();
    run.csv("eigenvalues.csv", rows)?;
    run.field("u1.csv", &s.d, &sp.u1)
}

#[derive(Serialize)]
struct StartRow {
    start: String,
    energy: f64,
    iterations: usize,
    converged: bool,
    relative_residual: f64,
    max_modulus: f64,
}

fn minimize(run: &mut Run, cfg: &RunConfig) -> Result<(), CliError> {
    let s = scenario(run, cfg)?;
    let sp = spectrum(run, cfg, &s, 2)?;
    let p = GLParameters::new(cfg.parameters.lambda.unwrap(), cfg.parameters.kappa.unwrap())
        .map_err(|source| CliError::Stage { stage: "parameters", source })?;
    let ms = run.stage("minimize", || {
        Ok(minimize_multistart(&Minimizer::new(s.model())?, p, Some(&sp.u1), &cfg.minimize))
    })?;
    let best = ms.best();
    run.scalar("energy", best.report.energy);
    run.scalar("max_modulus", best.report.max_modulus);
    run.scalar("residual_u", best.report.el_residual_norms.0);
    run.scalar("residual_a", best.report.el_residual_norms.1);
    let area = s.d.area(Region::Omega).unwrap_or(1.0);
    let condensed = best.report.energy < -1e-9 * p.lambda * area;
    run.verdict("global_minimizer", if condensed { "condensed" } else { "normal" })?;
    run.verdict("best_start", format!("{:?}", ms.runs[ms.best].0))?;
    run.verdict("bound_checks", &best.report.bound_checks)?;
    run.note(PORTFOLIO_NOTE);
    if !ms.all_converged() {
        run.flag("minimize: some starts did not converge");
    }
    let rows: Vec<StartRow> = ms
        .runs
        .iter()
        .map(|(k, o)| StartRow {
            start: format!("{k:?}"),
            energy: o.report.energy,
            iterations: o.iterations,
            converged: o.converged,
            relative_residual: o.relative_residual,
            max_modulus: o.report.max_modulus,
        })
        .collect();
    run.csv("starts.csv", rows)?;
    run.field("u.csv", &s.d, &best.state.u)
}

#[derive(Serialize)]
struct BranchRow {
    alpha: f64,
    lambda: f64,
    energy: f64,
    newton_residual: f64,
    iterations: usize,
    converged: bool,
}

fn emit_branch(run: &mut Run, cfg: &RunConfig, s: &Scenario, br: &Branch, lambda1: f64) -> Result<(), CliError> {
    run.scalar("c_kappa", br.c_kappa);
    if let Some(f) = br.fit {
        run.scalar("fitted_c", f);
    }
    if let Some(e) = br.fit_error() {
        run.scalar("fit_error", e);
    }
    for x in &br.samples {
        run.scalar(format!("lambda_alpha_{}", x.alpha), x.lambda);
        run.scalar(format!("energy_alpha_{}", x.alpha), x.energy);
    }
    if br.truncated {
        run.flag("branch: Newton failed, branch truncated");
    }
    let rows: Vec<BranchRow> = br
        .samples
        .iter()
        .map(|x| BranchRow {
            alpha: x.alpha,
            lambda: x.lambda,
            energy: x.energy,
            newton_residual: x.newton_residual,
            iterations: x.iterations,
            converged: x.converged,
        })
        .collect();
    run.csv("branch.csv", rows)?;
    if cfg.parameters.stability {
        let kappa = cfg.parameters.kappa.unwrap();
        for x in br.samples.iter().filter(|x| x.converged && x.alpha != 0.0) {
            let p = GLParameters::new(x.lambda, kappa).map_err(|source| CliError::Stage { stage: "stability", source })?;
            let rep = run.stage("stability", || strict_stability(s.model(), &x.state, p, lambda1, &cfg.stability))?;
            if !rep.converged {
                run.flag(format!("stability: eigensolver did not converge at alpha {}", x.alpha));
            }
            run.verdict(format!("stability_alpha_{}", x.alpha), &rep)?;
        }
    }
    Ok(())
}

fn branch(run: &mut Run, cfg: &RunConfig) -> Result<(), CliError> {
    let s = scenario(run, cfg)?;
    let sp = spectrum(run, cfg, &s, 2)?;
    let kappa = cfg.parameters.kappa.unwrap();
    let c = run.stage("coefficients", || coefficients(s.model(), &sp, kappa))?;
    run.scalar("i0", c.i0);
    run.scalar("k0", c.k0);
    run.scalar("k0_alt", c.k0_alt);
    run.scalar("kappa_c", c.kappa_c);
    let br = run.stage("continuation", || trace_branch(s.model(), &c, &cfg.parameters.alphas, cfg.continuation))?;
    emit_branch(run, cfg, &s, &br, sp.lambda1)?;
    if let Some(x) = br.samples.iter().rev().find(|x| x.converged) {
        run.field("u_branch.csv", &s.d, &x.state.u)?;
    }
    Ok(())
}

fn reduced(run: &mut Run, cfg: &RunConfig) -> Result<(), CliError> {
    let s = scenario(run, cfg)?;
    let sp = spectrum(run, cfg, &s, 2)?;
    let ph = run.stage("half-flux phase", || half_flux_phase(&s.g, &s.d))?;
    run.scalar("loop_defect", ph.loop_defect);
    let kappa = cfg.parameters.kappa.unwrap();
    let br = run.stage("continuation", || {
        reduced_branch(s.model(), &sp, &ph, kappa, &cfg.parameters.alphas, cfg.continuation)
    })?;
    emit_branch(run, cfg, &s, &br, sp.lambda1)?;
    if let Some(x) = br.samples.iter().rev().find(|x| x.converged) {
        run.field("u_branch.csv", &s.d, &x.state.u)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct NodalRow {
    epsilon: f64,
    i: usize,
    j: usize,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct NodalSummary {
    epsilon: f64,
    zero_cells: usize,
    components: usize,
    slits: bool,
    touches: String,
}

fn nodal(run: &mut Run, cfg: &RunConfig) -> Result<(), CliError> {
    let s = scenario(run, cfg)?;
    let sp = spectrum(run, cfg, &s, 2)?;
    let ph = run.stage("half-flux phase", || half_flux_phase(&s.g, &s.d))?;
    let alpha = cfg.parameters.alpha.unwrap();
    let kappa = cfg.parameters.kappa.unwrap();
    let br = run.stage("continuation", || reduced_branch(s.model(), &sp, &ph, kappa, &[alpha], cfg.continuation))?;
    let x = &br.samples[0];
    if !x.converged {
        run.flag("nodal: reduced-branch state did not converge");
    }
    run.scalar("lambda", x.lambda);
    let mut cells = Vec::new();
    let mut summary = Vec::new();
    for &eps in &cfg.parameters.epsilons {
        let r = run.stage("nodal", || nodal_set(&x.state.u, &s.d, &ph, eps))?;
        for &c in &r.zero_cells {
            let p = s.d.cell_center(c);
            cells.push(NodalRow {
                epsilon: eps,
                i: c % s.d.nx,
                j: c / s.d.nx,
                x: p[0],
                y: p[1],
            });
        }
        summary.push(NodalSummary {
            epsilon: eps,
            zero_cells: r.zero_cells.len(),
            components: r.curve_components,
            slits: r.slits,
            touches: r
                .touches
                .iter()
                .map(|t| t.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("+"))
                .collect::<Vec<_>>()
                .join(";"),
        });
        run.verdict(format!("nodal_epsilon_{eps}"), &r)?;
    }
    let stable = summary
        .windows(2)
        .all(|w| w[0].components == w[1].components && w[0].slits == w[1].slits && w[0].touches == w[1].touches);
    run.verdict("stable_over_epsilon", stable)?;
    run.note("slits means the first Betti number of Ω minus the zero cells vanishes");
    run.csv("nodal_cells.csv", cells)?;
    run.csv("nodal_summary.csv", summary)?;
    run.field("u.csv", &s.d, &x.state.u)
}

#[derive(Serialize)]
struct PhaseRow {
    kappa: f64,
    lambda_lo: f64,
    lambda_hi: f64,
    lambda1: f64,
    kappa_c: f64,
}

fn phase_diagram(run: &mut Run, cfg: &RunConfig) -> Result<(), CliError> {
    let s = scenario(run, cfg)?;
    let sp = spectrum(run, cfg, &s, 2)?;
    let kappa_c = coefficients(s.model(), &sp, 1.0).ok().map(|c| c.kappa_c);
    let pd = run.stage("phase diagram", || sweep(s.model(), &sp, &cfg.parameters.kappas, kappa_c, &cfg.phase))?;
    if let Some(k) = kappa_c {
        run.scalar("kappa_c", k);
    }
    if let Some(k) = pd.saturation_kappa() {
        run.scalar("saturation_kappa", k);
    }
    if let Some(m) = pd.saturation_mismatch() {
        run.scalar("saturation_mismatch", m);
    }
    for p in &pd.points {
        run.scalar(format!("lambda_opt_kappa_{}", p.kappa), p.lambda_opt);
    }
    run.verdict("monotone", pd.monotone())?;
    run.verdict("points", &pd.points)?;
    run.note(PORTFOLIO_NOTE);
    if pd.flagged() {
        run.flag("phase diagram: a bracket is unconverged or rests on unconverged minimizations");
    }
    let rows: Vec<PhaseRow> = pd
        .points
        .iter()
        .map(|p| PhaseRow {
            kappa: p.kappa,
            lambda_lo: p.bracket.0,
            lambda_hi: p.bracket.1,
            lambda1: p.lambda1,
            kappa_c: kappa_c.unwrap_or(f64::NAN),
        })
        .collect();
    run.csv("phase_diagram.csv", rows)
}

#[derive(Serialize)]
struct CheckRow {
    name: &'static str,
    value: f64,
    bound: f64,
    pass: bool,
}

fn check(run: &mut Run, cfg: &RunConfig) -> Result<(), CliError> {
    let s = scenario(run, cfg)?;
    let sp = spectrum(run, cfg, &s, 2)?;
    let m = s.model();
    let d = &s.d;
    let p = GLParameters::new(cfg.parameters.lambda.unwrap(), cfg.parameters.kappa.unwrap())
        .map_err(|source| CliError::Stage { stage: "parameters", source })?;
    let area = d.area(Region::Omega).unwrap_or(f64::NAN);
    let mut rows = Vec::new();
    let mut push = |name, value: f64, bound: f64| rows.push(CheckRow { name, value, bound, pass: value <= bound });

    push("gauge_divergence", s.g.div_residual, 1e-8);
    push("gauge_normal_flux", s.g.normal_residual, 1e-8);
    push("normal_energy", m.energy(&GLState::normal(d), p).abs(), 1e-12);
    let competitor = GLState {
        u: gllab_core::calculus::ComplexField {
            values: vec![num_complex::Complex64::new(1.0, 0.0); d.n_omega()],
        },
        a: s.g.a_e.scale(-1.0),
    };
    let expect = -0.5 * p.lambda * area + p.field_weight() * s.field.sq_integral(d);
    let got = m.energy(&competitor, p);
    push("constant_state_energy", (got - expect).abs() / expect.abs().max(1e-300), 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut random = |scale: f64| GLState {
        u: gllab_core::calculus::ComplexField {
            values: (0..d.n_omega())
                .map(|_| num_complex::Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale)
                .collect(),
        },
        a: gllab_core::calculus::VectorField {
            values: (0..d.n_faces()).map(|_| (rng.random::<f64>() - 0.5) * scale).collect(),
        },
    };
    let state = random(1.0);
    let (ru, ra) = m.el_residual(&state, p);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let dir = random(1.0);
        let t = 1e-5;
        let shift = |t: f64| GLState {
            u: &state.u + &(&dir.u * t),
            a: &state.a + &dir.a.scale(t),
        };
        let fd = (m.energy(&shift(t), p) - m.energy(&shift(-t), p)) / (2.0 * t);
        let an = m.pairing(p, &ru, &ra, &dir.u, &dir.a);
        worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
    }
    push("gradient_fd", worst, 1e-6);
    if d.n_omega() <= 1000 {
        let dense = dense_eigenvalues(&assemble(&s.g, d));
        push("eigen_vs_dense", (sp.lambda1 - dense[0]).abs() / dense[0].abs().max(1.0), 1e-9);
    }
    let fc = flux_criterion(&s.g, &s.field, d);
    push(
        "flux_criterion_consistent",
        if fc.positive == (sp.lambda1 > 1e-10) { 0.0 } else { 1.0 },
        0.0,
    );
    for r in rows.iter().filter(|r| !r.pass) {
        run.flag(format!("check {} failed: {:e} > {:e}", r.name, r.value, r.bound));
    }
    for r in &rows {
        run.scalar(r.name, r.value);
    }
    run.csv("checks.csv", rows)
}

fn convert(run: &mut Run, cfg: &RunConfig) -> Result<(), CliError> {
    let phys = cfg.physical.as_ref().unwrap();
    let sc = run.stage("convert", || scaling_convert(phys))?;
    run.scalar("lambda", sc.lambda);
    run.scalar("kappa", sc.kappa);
    run.scalar("kappa_consistent", sc.kappa_consistent);
    run.scalar("field_scale", sc.field_scale);
    run.scalar("h_e", sc.h_e);
    run.scalar("energy_scale", sc.energy_scale);
    run.note("kappa follows (mc/(e hbar))(b/8 pi)^(1/2); the physical energy equals energy_scale * G only with kappa_consistent");
    if let (Some(spec), Some(profile)) = (&cfg.domain, &cfg.field) {
        let d = run.stage("domain", || Domain::build(spec))?;
        let field = run.stage("field", || ExternalField::sample(profile, &d))?;
        let g = run.stage("gauge", || external_potential(&field, &d))?;
        let p = GLParameters::new(sc.lambda, sc.kappa).map_err(|source| CliError::Stage { stage: "convert", source })?;
        let hat = run.stage("hat rescale", || hat_rescale(p, &d, field.max_in_omega(&d)))?;
        run.scalar("hat_length_scale", hat.length_scale);
        run.scalar("hat_diameter", hat.diameter);
        run.scalar("hat_area", hat.area);
        run.scalar("hat_field_factor", hat.field_factor);
        let m = Model::new(&d, &g);
        let state = GLState {
            u: gllab_core::calculus::ComplexField::from_fn(&d, |x| num_complex::Complex64::new(0.8, 0.3 * x[0])),
            a: gllab_core::calculus::VectorField::zeros(&d),
        };
        let (u, a, h) = to_physical(&m, &sc, &state);
        let f = physical_energy(&d, phys, &u, &a, &h);
        let pc = GLParameters::new(sc.lambda, sc.kappa_consistent)
            .map_err(|source| CliError::Stage { stage: "convert", source })?;
        let gval = sc.energy_scale * m.energy(&state, pc);
        run.scalar("energy_roundtrip_error", (f - gval).abs() / f.abs().max(gval.abs()).max(1e-300));
    }
    Ok(())
}
