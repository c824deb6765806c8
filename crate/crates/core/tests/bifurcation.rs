mod common;

use common::{half_flux, uniform_disk, Scenario};
use gllab_core::bifurcation::{
    branch_energy, coefficients, kappa_c, strict_stability, supercurrent, trace_branch, ContinuationOptions,
    StabilityOptions, Verdict,
};
use gllab_core::calculus::ComplexField;
use gllab_core::domain::DomainSpec;
use gllab_core::functional::{GLParameters, GLState, Model};
use gllab_core::gauge::FieldProfile;
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn current_of_real_field_without_potential_vanishes() {
    let s = Scenario::new(DomainSpec::unit_square(16), FieldProfile::Zero);
    let u = ComplexField::from_fn(&s.d, |x| Complex64::new(1.0 + x[0] * x[1], 0.0));
    assert_eq!(supercurrent(&s.d, &s.g, &u).max_abs(), 0.0);
}

#[test]
fn current_of_plane_wave() {
    let s = Scenario::new(DomainSpec::unit_square(64), FieldProfile::Zero);
    let k = 3.0;
    let u = ComplexField::from_fn(&s.d, |x| Complex64::from_polar(1.0, k * x[0]));
    let j = supercurrent(&s.d, &s.g, &u);
    let d = &s.d;
    for e in d.edges() {
        let mid = d.face_midpoint(e.face);
        let horizontal = d.cell_center(d.omega_cells()[e.head])[0] > d.cell_center(d.omega_cells()[e.tail])[0];
        let expect = if horizontal { k } else { 0.0 };
        assert!((j.values[e.face] - expect).abs() < k * k * k * d.h * d.h, "{mid:?}");
    }
}

#[test]
fn half_flux_ground_state_carries_no_current() {
    let s = half_flux(32);
    let sp = s.spectrum();
    let m = Model::new(&s.d, &s.g);
    let c1 = coefficients(m, &sp, 1.0).unwrap();
    assert!(c1.j1.norm(&s.d) <= 1e-6);
    assert!(c1.k0 <= 1e-10 && c1.k0 >= -1e-12);
    assert!(kappa_c(&c1).unwrap() <= 1e-5);
    let expect = sp.lambda1 * c1.i0;
    for kappa in [0.1, 1.0, 10.0] {
        let c = coefficients(m, &sp, kappa).unwrap();
        assert!((c.c_kappa - expect).abs() <= 1e-10 * expect);
    }
}

#[test]
fn k0_positive_on_simply_connected_disk() {
    let s = uniform_disk(32);
    let sp = s.spectrum();
    assert!(sp.lambda1 > 0.0);
    let c = coefficients(Model::new(&s.d, &s.g), &sp, 1.0).unwrap();
    assert!(c.k0 > 0.0);
    assert!(c.k0_mismatch() < 1e-8, "{} vs {}", c.k0, c.k0_alt);
    assert!(c.u1.inner(&c.u3, &s.d).norm() < 1e-10);
}

#[test]
fn kappa_c_is_the_sign_change_of_branch_energy() {
    let s = uniform_disk(24);
    let c = coefficients(Model::new(&s.d, &s.g), &s.spectrum(), 1.0).unwrap();
    let kc = kappa_c(&c).unwrap();
    assert_eq!(branch_energy(&c, 0.0, 1.0), 0.0);
    let (mut lo, mut hi) = (1e-3, 10.0);
    assert!(branch_energy(&c, 0.1, lo) > 0.0 && branch_energy(&c, 0.1, hi) < 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if branch_energy(&c, 0.1, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - kc).abs() < 1e-10 * kc);

    let mut half = c.clone();
    half.k0 = 0.5 * half.i0;
    assert!((kappa_c(&half).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn predictor_residual_is_fourth_order() {
    for s in [half_flux(24), uniform_disk(24)] {
        let sp = s.spectrum();
        let m = Model::new(&s.d, &s.g);
        let c = coefficients(m, &sp, 0.7).unwrap();
        let res = |alpha: f64| {
            let (st, lam) = c.predictor(alpha);
            let (ru, ra) = m.el_residual(&st, GLParameters::new(lam, 0.7).unwrap());
            (ru.norm(&s.d).powi(2) + ra.norm(&s.d).powi(2)).sqrt()
        };
        let slope = (res(0.2) / res(0.02)).log10();
        assert!(slope >= 3.5, "{slope}");
    }
}

#[test]
fn traced_branch_matches_expansion() {
    let s = half_flux(24);
    let sp = s.spectrum();
    let m = Model::new(&s.d, &s.g);
    let c = coefficients(m, &sp, 1.0).unwrap();
    let br = trace_branch(m, &c, &[0.0, 0.05, 0.1, 0.2, -0.05, -0.1, -0.2], ContinuationOptions::default()).unwrap();
    assert!(!br.truncated);
    assert!(br.samples.iter().all(|x| x.converged && x.newton_residual <= 1e-8));
    assert_eq!(br.samples[0].state.u.max_abs(), 0.0);
    assert_eq!(br.samples[0].lambda, sp.lambda1);
    for x in &br.samples {
        let z = c.u1.inner(&x.state.u, &s.d);
        assert!((z.re - x.alpha).abs() < 1e-12 && z.im.abs() < 1e-12);
    }
    for k in 1..4 {
        let (p, n) = (&br.samples[k], &br.samples[k + 3]);
        assert!((p.lambda - n.lambda).abs() <= 1e-8);
        assert!((&p.state.u + &n.state.u).norm(&s.d) <= 1e-6);
    }
    assert!(br.fit_error().unwrap() < 0.05);
    // energy ratio to the quartic term tends to one
    let ratios: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&a| {
            let x = br.samples.iter().find(|x| x.alpha == a).unwrap();
            x.energy / branch_energy(&c, a, 1.0)
        })
        .collect();
    assert!((ratios[2] - 1.0).abs() < 0.1);
    assert!((ratios[2] - 1.0).abs() <= (ratios[0] - 1.0).abs());
}

#[test]
fn rejects_amplitudes_beyond_limit() {
    let s = half_flux(16);
    let m = Model::new(&s.d, &s.g);
    let c = coefficients(m, &s.spectrum(), 1.0).unwrap();
    assert!(trace_branch(m, &c, &[0.9], ContinuationOptions::default()).is_err());
}

#[test]
fn branch_energy_sign_follows_kappa_c() {
    let s = uniform_disk(24);
    let sp = s.spectrum();
    let m = Model::new(&s.d, &s.g);
    let kc = coefficients(m, &sp, 1.0).unwrap().kappa_c;
    for (mult, negative) in [(0.5, false), (2.0, true)] {
        let kappa = mult * kc;
        let c = coefficients(m, &sp, kappa).unwrap();
        let br = trace_branch(m, &c, &[0.05], ContinuationOptions::default()).unwrap();
        let e = br.samples[0].energy;
        assert_eq!(e < 0.0, negative, "κ = {kappa}: {e}");
        assert_eq!(branch_energy(&c, 0.05, kappa) < 0.0, negative);
    }
}

#[test]
fn stability_verdicts() {
    let s = uniform_disk(24);
    let sp = s.spectrum();
    let m = Model::new(&s.d, &s.g);
    let opts = StabilityOptions::default();
    let normal = GLState::normal(&s.d);
    let below = strict_stability(m, &normal, GLParameters::new(0.5 * sp.lambda1, 1.0).unwrap(), sp.lambda1, &opts).unwrap();
    assert_eq!(below.verdict, Verdict::StrictlyStable);
    let above = strict_stability(m, &normal, GLParameters::new(1.2 * sp.lambda1, 1.0).unwrap(), sp.lambda1, &opts).unwrap();
    assert_eq!(above.verdict, Verdict::Unstable);

    let kc = coefficients(m, &sp, 1.0).unwrap().kappa_c;
    for (mult, verdict) in [(2.0, Verdict::StrictlyStable), (0.5, Verdict::Unstable)] {
        let kappa = mult * kc;
        let c = coefficients(m, &sp, kappa).unwrap();
        let br = trace_branch(m, &c, &[0.1], ContinuationOptions::default()).unwrap();
        let x = &br.samples[0];
        let r = strict_stability(m, &x.state, GLParameters::new(x.lambda, kappa).unwrap(), sp.lambda1, &opts).unwrap();
        assert_eq!(r.verdict, verdict, "{r:?}");
        assert!(r.phase_eigenvalue.unwrap().abs() <= r.stab_tol);
    }

    let junk = GLState {
        u: ComplexField::from_fn(&s.d, |x| Complex64::new(x[0], 0.3)),
        a: normal.a.clone(),
    };
    assert!(strict_stability(m, &junk, GLParameters::new(1.0, 1.0).unwrap(), sp.lambda1, &opts).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn coefficients_ignore_the_phase_of_u1(theta in 0.0f64..std::f64::consts::TAU) {
        let s = uniform_disk(16);
        let sp = s.spectrum();
        let m = Model::new(&s.d, &s.g);
        let c = coefficients(m, &sp, 0.8).unwrap();
        let mut rotated = sp.clone();
        rotated.u1 = sp.u1.scale(Complex64::from_polar(1.0, theta));
        let r = coefficients(m, &rotated, 0.8).unwrap();
        prop_assert!((c.i0 - r.i0).abs() <= 1e-13 * c.i0);
        prop_assert!((c.k0 - r.k0).abs() <= 1e-12 * c.k0);
        prop_assert!((c.c_kappa - r.c_kappa).abs() <= 1e-12 * c.c_kappa.abs());
        prop_assert!((c.kappa_c - r.kappa_c).abs() <= 1e-12 * c.kappa_c);
    }
}
