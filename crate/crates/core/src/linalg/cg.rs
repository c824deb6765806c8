use super::{axpy, dot, norm, Scalar};

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub iterations: usize,
    pub converged: bool,
    /// relative residual after each iteration (entry 0 is the initial one)
    pub history: Vec<f64>,
}

impl CgOutcome {
    pub fn final_residual(&self) -> f64 {
        *self.history.last().unwrap_or(&0.0)
    }
}

/// Preconditioned conjugate gradients for a Hermitian positive (semi)definite
/// operator. `project`, when given, is applied to the residual and the
/// preconditioned residual; it keeps iterates orthogonal to a known null space.
///
/// `x` holds the initial guess on entry and the solution on exit.
#[allow(clippy::too_many_arguments)]
pub fn conjugate_gradient<T, A, M, P>(
    mut apply: A,
    mut precond: Option<M>,
    mut project: Option<P>,
    b: &[T],
    x: &mut [T],
    rel_tol: f64,
    max_iter: usize,
) -> CgOutcome
where
    T: Scalar,
    A: FnMut(&[T], &mut [T]),
    M: FnMut(&[T], &mut [T]),
    P: FnMut(&mut [T]),
{
    let n = b.len();
    let mut r = vec![T::default(); n];
    let mut ap = vec![T::default(); n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    if let Some(p) = project.as_mut() {
        p(&mut r);
    }
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut history = vec![norm(&r) / bnorm];
    if history[0] <= rel_tol {
        return CgOutcome {
            iterations: 0,
            converged: true,
            history,
        };
    }
    let mut z = vec![T::default(); n];
    let precondition = |r: &[T], z: &mut [T], pc: &mut Option<M>, pj: &mut Option<P>| {
        match pc.as_mut() {
            Some(m) => m(r, z),
            None => z.copy_from_slice(r),
        }
        if let Some(p) = pj.as_mut() {
            p(z);
        }
    };
    precondition(&r, &mut z, &mut precond, &mut project);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re();
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap).re();
        if pap <= 0.0 || !pap.is_finite() {
            return CgOutcome {
                iterations: it,
                converged: false,
                history,
            };
        }
        let alpha = rz / pap;
        axpy(T::from_real(alpha), &p, x);
        axpy(T::from_real(-alpha), &ap, &mut r);
        if let Some(pj) = project.as_mut() {
            pj(&mut r);
        }
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if rel <= rel_tol {
            return CgOutcome {
                iterations: it,
                converged: true,
                history,
            };
        }
        precondition(&r, &mut z, &mut precond, &mut project);
        let rz_new = dot(&r, &z).re();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + p[i].scale(beta);
        }
    }
    CgOutcome {
        iterations: max_iter,
        converged: false,
        history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type NoPc = fn(&[f64], &mut [f64]);
    type NoProj = fn(&mut [f64]);

    #[test]
    fn solves_1d_dirichlet_laplacian() {
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 2.0 * x[i] - l - r;
            }
        };
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let out = conjugate_gradient(apply, None::<NoPc>, None::<NoProj>, &b, &mut x, 1e-12, 500);
        assert!(out.converged);
        // exact solution x_i = (i+1)(n-i)/2
        for (i, xi) in x.iter().enumerate() {
            let exact = ((i + 1) * (n - i)) as f64 / 2.0;
            assert!((xi - exact).abs() < 1e-8 * exact);
        }
    }

    #[test]
    fn singular_neumann_with_projection() {
        let n = 20;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut s = 0.0;
                if i > 0 {
                    s += x[i] - x[i - 1];
                }
                if i + 1 < n {
                    s += x[i] - x[i + 1];
                }
                y[i] = s;
            }
        };
        let mean_free = |v: &mut [f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= m);
        };
        let mut b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        mean_free(&mut b);
        let mut x = vec![0.0; n];
        let out = conjugate_gradient(apply, None::<NoPc>, Some(mean_free), &b, &mut x, 1e-12, 500);
        assert!(out.converged, "{:?}", out.history.last());
        let mut y = vec![0.0; n];
        apply(&x, &mut y);
        let err: f64 = y.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }
}
