use gllab_core::calculus::{curl, CellField, ComplexField, VectorField};
use gllab_core::domain::{Domain, DomainSpec, Region, VertexClass};
use gllab_core::functional::{minimize, GLParameters, GLState, MinimizeOptions, Model};
use gllab_core::gauge::{external_potential, gauge_transform_u, ExternalField, FieldProfile, GaugeData};
use gllab_core::spectra::{assemble, ground_state};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(spec: DomainSpec, profile: FieldProfile) -> (Domain, GaugeData) {
    let d = Domain::build(&spec).unwrap();
    let f = ExternalField::sample(&profile, &d).unwrap();
    let g = external_potential(&f, &d).unwrap();
    (d, g)
}

fn half_flux() -> (Domain, GaugeData) {
    setup(
        DomainSpec::disk_with_hole(1.0, [0.2, 0.1], 0.3, 24),
        FieldProfile::UniformInHole { fluxes: vec![0.5] },
    )
}

fn uniform_square() -> (Domain, GaugeData) {
    setup(DomainSpec::unit_square(16), FieldProfile::UniformEverywhere { strength: 3.0 })
}

fn random_state(d: &Domain, rng: &mut ChaCha8Rng, amp: f64) -> GLState {
    let u = ComplexField {
        values: (0..d.n_omega())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * (2.0 * amp))
            .collect(),
    };
    let a = VectorField {
        values: (0..d.n_faces()).map(|_| (rng.random::<f64>() - 0.5) * amp).collect(),
    };
    GLState { u, a }
}

fn shifted(s: &GLState, t: f64, du: &ComplexField, da: &VectorField) -> GLState {
    GLState {
        u: &s.u + &(du * t),
        a: &s.a + &da.scale(t),
    }
}

/// Energy written cell by cell from the total potential, without the link machinery.
fn reference_energy(d: &Domain, g: &GaugeData, s: &GLState, p: GLParameters) -> f64 {
    let h = d.h;
    let mut e = 0.0;
    for (k, &c) in d.omega_cells().iter().enumerate() {
        let m = s.u.values[k].norm_sqr();
        e += h * h * p.lambda * (0.5 * m * m - m);
        let (i, j) = (c % d.nx, c / d.nx);
        let right = (i + 1 < d.nx).then(|| c + 1).map(|n| d.omega_index(n)).filter(|&n| n != usize::MAX);
        let up = (j + 1 < d.ny).then(|| c + d.nx).map(|n| d.omega_index(n)).filter(|&n| n != usize::MAX);
        if let Some(r) = right {
            let f = d.xface(i + 1, j);
            let phase = Complex64::from_polar(1.0, -h * (g.a_e.values[f] + s.a.values[f]));
            e += (phase * s.u.values[r] - s.u.values[k]).norm_sqr();
        }
        if let Some(t) = up {
            let f = d.yface(i, j + 1);
            let phase = Complex64::from_polar(1.0, -h * (g.a_e.values[f] + s.a.values[f]));
            e += (phase * s.u.values[t] - s.u.values[k]).norm_sqr();
        }
    }
    for j in 0..=d.ny {
        for i in 0..=d.nx {
            let v = d.vertex(i, j);
            if d.vertex_class(v) == VertexClass::Boundary {
                continue;
            }
            let ax = |ii: usize, jj: usize| if jj < d.ny { s.a.values[d.xface(ii, jj)] } else { 0.0 };
            let ay = |ii: usize, jj: usize| if ii < d.nx { s.a.values[d.yface(ii, jj)] } else { 0.0 };
            let below = if j > 0 { ax(i, j - 1) } else { 0.0 };
            let above = ax(i, j);
            let left = if i > 0 { ay(i - 1, j) } else { 0.0 };
            let right = ay(i, j);
            let rot = (right - left - above + below) / h;
            e += p.field_weight() * h * h * rot * rot;
        }
    }
    e
}

#[test]
fn normal_state_has_zero_energy_and_residual() {
    let (d, g) = half_flux();
    let m = Model::new(&d, &g);
    let p = GLParameters::new(2.0, 1.0).unwrap();
    let s = GLState::normal(&d);
    assert_eq!(m.energy(&s, p), 0.0);
    let (ru, ra) = m.el_residual(&s, p);
    assert_eq!(ru.max_abs(), 0.0);
    assert_eq!(ra.max_abs(), 0.0);
    let r = m.check_bounds(&s, p);
    assert_eq!(r.max_modulus, 0.0);
    assert!(r.all_pass());
}

#[test]
fn constant_state_on_square_without_field() {
    let (d, g) = setup(DomainSpec::unit_square(16), FieldProfile::Zero);
    let m = Model::new(&d, &g);
    let s = GLState {
        u: ComplexField {
            values: vec![Complex64::new(1.0, 0.0); d.n_omega()],
        },
        a: VectorField::zeros(&d),
    };
    for kappa in [0.1, 1.0, 7.0] {
        let e = m.energy(&s, GLParameters::new(2.0, kappa).unwrap());
        assert!((e + 1.0).abs() < 1e-13, "{e}");
    }
}

#[test]
fn energy_matches_cellwise_quadrature() {
    for (d, g) in [half_flux(), uniform_square()] {
        let m = Model::new(&d, &g);
        let p = GLParameters::new(7.0, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let s = random_state(&d, &mut rng, 1.0);
            let e = m.energy(&s, p);
            let r = reference_energy(&d, &g, &s, p);
            assert!((e - r).abs() <= 1e-12 * r.abs().max(1.0), "{e} vs {r}");
        }
    }
}

#[test]
fn residual_is_the_energy_gradient() {
    let (d, g) = half_flux();
    let m = Model::new(&d, &g);
    let p = GLParameters::new(12.0, 0.8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = random_state(&d, &mut rng, 1.0);
    let (ru, ra) = m.el_residual(&s, p);
    let t = 1e-5;
    for _ in 0..20 {
        let dir = random_state(&d, &mut rng, 1.0);
        let fd = (m.energy(&shifted(&s, t, &dir.u, &dir.a), p) - m.energy(&shifted(&s, -t, &dir.u, &dir.a), p)) / (2.0 * t);
        let an = m.pairing(p, &ru, &ra, &dir.u, &dir.a);
        assert!((fd - an).abs() < 1e-6 * an.abs().max(1e-3), "{fd} vs {an}");
    }
}

#[test]
fn hessian_is_symmetric_and_linearizes_the_residual() {
    let (d, g) = uniform_square();
    let m = Model::new(&d, &g);
    let p = GLParameters::new(20.0, 1.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = random_state(&d, &mut rng, 1.0);
    let x = random_state(&d, &mut rng, 1.0);
    let y = random_state(&d, &mut rng, 1.0);
    let (hxu, hxa) = m.hessian_apply(&s, p, &x.u, &x.a);
    let (hyu, hya) = m.hessian_apply(&s, p, &y.u, &y.a);
    let a = m.pairing(p, &hxu, &hxa, &y.u, &y.a);
    let b = m.pairing(p, &hyu, &hya, &x.u, &x.a);
    assert!((a - b).abs() < 1e-10 * a.abs().max(b.abs()), "{a} vs {b}");

    let t = 1e-6;
    let (pu, pa) = m.el_residual(&shifted(&s, t, &x.u, &x.a), p);
    let (mu, ma) = m.el_residual(&shifted(&s, -t, &x.u, &x.a), p);
    let fdu = &(&pu - &mu) * (0.5 / t);
    let fda = (&pa - &ma).scale(0.5 / t);
    assert!((&fdu - &hxu).norm(&d) < 1e-6 * hxu.norm(&d));
    assert!((&fda - &hxa).norm(&d) < 1e-6 * hxa.norm(&d));
}

#[test]
fn hessian_at_normal_state_is_shifted_magnetic_operator() {
    let (d, g) = half_flux();
    let m = Model::new(&d, &g);
    let op = assemble(&g, &d);
    let sp = ground_state(&op, &d, 2).unwrap();
    let p = GLParameters::new(30.0, 2.0).unwrap();
    let (hu, ha) = m.hessian_apply(&GLState::normal(&d), p, &sp.u1, &VectorField::zeros(&d));
    let expect = &sp.u1 * (sp.lambda1 - p.lambda);
    assert!((&hu - &expect).norm(&d) < 1e-8 * expect.norm(&d));
    assert_eq!(ha.max_abs(), 0.0);
}

#[test]
fn potential_derivative_pairs_with_current() {
    let (d, g) = uniform_square();
    let m = Model::new(&d, &g);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = random_state(&d, &mut rng, 1.0);
    let b = random_state(&d, &mut rng, 1.0).a;
    let t = m.potential_derivative(&s.u, &s.a, &b);
    let j = gllab_core::functional::supercurrent(&d, &s.u, &m.links(&s.a));
    let lhs = s.u.inner(&t, &d).re;
    let rhs = -2.0 * b.inner(&j, &d);
    assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
}

#[test]
fn minimizer_finds_constant_modulus_without_field() {
    let (d, g) = setup(DomainSpec::disk([0.0, 0.0], 1.0, 24), FieldProfile::Zero);
    let p = GLParameters::new(5.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let init = random_state(&d, &mut rng, 0.5);
    let out = minimize(Model::new(&d, &g), p, &init, &MinimizeOptions::default()).unwrap();
    assert!(out.converged);
    let area = d.area(Region::Omega).unwrap();
    assert!((out.report.energy + 0.5 * p.lambda * area).abs() < 1e-8 * p.lambda * area);
    let dev = out.state.u.values.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-6, "{dev}");
    assert!(out.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
}

#[test]
fn minimizer_below_and_above_first_eigenvalue() {
    let (d, g) = half_flux();
    let op = assemble(&g, &d);
    let sp = ground_state(&op, &d, 2).unwrap();
    let m = Model::new(&d, &g);
    let opts = MinimizeOptions::default();

    let below = GLParameters::new(0.9 * sp.lambda1, 1.0).unwrap();
    let init = GLState {
        u: &sp.u1 * 0.3,
        a: VectorField::zeros(&d),
    };
    let out = minimize(m, below, &init, &opts).unwrap();
    assert!(out.converged);
    assert!(out.report.energy.abs() < 1e-10, "{}", out.report.energy);

    let above = GLParameters::new(1.05 * sp.lambda1, 5.0).unwrap();
    let out = minimize(m, above, &init, &opts).unwrap();
    assert!(out.converged);
    assert!(out.report.energy < 0.0);
    let r = &out.report;
    assert!(r.all_pass(), "{:?}", r.bound_checks);
    assert!(r.check("energy_identity_gap").unwrap().quantity < 1e-6);
    assert!(r.max_modulus <= 1.0 + 1e-6);
    // at convergence the field is the Coulomb-slice stream of the current
    let (ru, ra) = m.el_residual(&out.state, above);
    assert!(ru.norm(&d) < 1e-5 && ra.norm(&d) < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn energy_is_gauge_invariant(seed in 0u64..1000, k in -3i32..=3) {
        let (d, g) = uniform_square();
        let m = Model::new(&d, &g);
        let p = GLParameters::new(4.0, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&d, &mut rng, 1.0);
        let theta = CellField::from_fn(&d, |x| k as f64 * x[0] * x[1] + (3.0 * x[1]).sin());
        let g2 = g.transformed(&d, &theta);
        let m2 = Model::new(&d, &g2);
        let s2 = GLState { u: gauge_transform_u(&d, &s.u, &theta), a: s.a.clone() };
        let (e1, e2) = (m.energy(&s, p), m2.energy(&s2, p));
        prop_assert!((e1 - e2).abs() < 1e-12 * e1.abs().max(1.0));
    }

    #[test]
    fn field_term_sees_only_rot(seed in 0u64..1000) {
        let (d, g) = half_flux();
        let m = Model::new(&d, &g);
        let p = GLParameters::new(4.0, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = GLState { u: ComplexField::zeros(&d), a: random_state(&d, &mut rng, 1.0).a };
        let rot = curl(&d, &s.a).interior_sq_integral(&d);
        prop_assert!((m.energy(&s, p) - p.field_weight() * rot).abs() < 1e-12 * rot.max(1.0));
    }
}
