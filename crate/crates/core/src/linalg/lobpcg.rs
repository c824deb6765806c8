use nalgebra::{DMatrix, SymmetricEigen};

#[derive(Clone, Debug)]
pub struct LobpcgOutcome {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dotr(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn nrm(x: &[f64]) -> f64 {
    dotr(x, x).sqrt()
}

/// Rayleigh-Ritz on the span of `basis`: returns Ritz values ascending and the
/// coefficient vectors. Directions with negligible `B`-norm are dropped.
fn rayleigh_ritz(ab: &[Vec<f64>], bb: &[Vec<f64>], basis: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let s = basis.len();
    let mut ga = DMatrix::zeros(s, s);
    let mut gb = DMatrix::zeros(s, s);
    for i in 0..s {
        for j in i..s {
            let a = 0.5 * (dotr(&basis[i], &ab[j]) + dotr(&basis[j], &ab[i]));
            let b = 0.5 * (dotr(&basis[i], &bb[j]) + dotr(&basis[j], &bb[i]));
            ga[(i, j)] = a;
            ga[(j, i)] = a;
            gb[(i, j)] = b;
            gb[(j, i)] = b;
        }
    }
    let eb = SymmetricEigen::new(gb);
    let dmax = eb.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..s)
        .filter(|&i| eb.eigenvalues[i] > 1e-13 * dmax)
        .collect();
    let mut v = DMatrix::zeros(s, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let f = 1.0 / eb.eigenvalues[i].sqrt();
        for r in 0..s {
            v[(r, c)] = eb.eigenvectors[(r, i)] * f;
        }
    }
    let reduced = v.transpose() * &ga * &v;
    let reduced = 0.5 * (&reduced + reduced.transpose());
    let ea = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..keep.len()).collect();
    order.sort_by(|&a, &b| ea.eigenvalues[a].total_cmp(&ea.eigenvalues[b]));
    let vals: Vec<f64> = order.iter().map(|&i| ea.eigenvalues[i]).collect();
    let mut coef = DMatrix::zeros(s, order.len());
    let full = &v * &ea.eigenvectors;
    for (c, &i) in order.iter().enumerate() {
        coef.set_column(c, &full.column(i));
    }
    (vals, coef)
}

fn combine(basis: &[Vec<f64>], coef: &DMatrix<f64>, col: usize, skip_first: usize) -> Vec<f64> {
    let n = basis[0].len();
    let mut out = vec![0.0; n];
    for (r, b) in basis.iter().enumerate().skip(skip_first) {
        let c = coef[(r, col)];
        if c != 0.0 {
            for (o, v) in out.iter_mut().zip(b) {
                *o += c * v;
            }
        }
    }
    out
}

/// Smallest eigenpairs of the symmetric pencil `A x = mu B x` (`B` positive
/// definite) by locally optimal block preconditioned conjugate gradients.
///
/// The block size is `x0.len()`; convergence is declared when the first
/// `want` relative residuals `|A x - mu B x| / ((|mu| + a) |B x|)` are below `tol`,
/// where `a` is the largest Ritz value magnitude seen so far (an estimate of the
/// spread of the pencil, so that eigenvalues near zero are judged on an absolute scale).
pub fn lobpcg<A, B, T>(
    mut apply_a: A,
    mut apply_b: B,
    mut precond: T,
    x0: Vec<Vec<f64>>,
    want: usize,
    tol: f64,
    max_iter: usize,
) -> LobpcgOutcome
where
    A: FnMut(&[f64]) -> Vec<f64>,
    B: FnMut(&[f64]) -> Vec<f64>,
    T: FnMut(&[f64]) -> Vec<f64>,
{
    let m = x0.len();
    assert!(want <= m && m > 0);
    let mut x = x0;
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut vals = vec![0.0; m];
    let mut res = vec![f64::INFINITY; m];
    let mut spread: f64 = 0.0;

    // initial Rayleigh-Ritz
    {
        let ax: Vec<_> = x.iter().map(|v| apply_a(v)).collect();
        let bx: Vec<_> = x.iter().map(|v| apply_b(v)).collect();
        let (rv, coef) = rayleigh_ritz(&ax, &bx, &x);
        spread = rv.iter().fold(spread, |s, v| s.max(v.abs()));
        let cols = coef.ncols().min(m);
        let newx: Vec<_> = (0..cols).map(|c| combine(&x, &coef, c, 0)).collect();
        x = newx;
        vals[..cols].copy_from_slice(&rv[..cols]);
    }

    for it in 1..=max_iter {
        let ax: Vec<_> = x.iter().map(|v| apply_a(v)).collect();
        let bx: Vec<_> = x.iter().map(|v| apply_b(v)).collect();
        let mut w = Vec::with_capacity(m);
        for j in 0..x.len() {
            let r: Vec<f64> = ax[j]
                .iter()
                .zip(&bx[j])
                .map(|(a, b)| a - vals[j] * b)
                .collect();
            let denom = (vals[j].abs() + spread) * nrm(&bx[j]);
            res[j] = nrm(&r) / denom.max(f64::MIN_POSITIVE);
            if res[j] > tol * 1e-2 {
                w.push(precond(&r));
            }
        }
        if res[..want].iter().all(|&r| r <= tol) {
            return LobpcgOutcome {
                eigenvalues: vals[..x.len()].to_vec(),
                eigenvectors: x,
                residuals: res,
                iterations: it,
                converged: true,
            };
        }
        let mut basis: Vec<Vec<f64>> = x.clone();
        basis.extend(w);
        let nx_plus_w = basis.len();
        basis.extend(p.iter().cloned());
        // normalize basis vectors for a better conditioned Gram matrix
        for b in basis.iter_mut() {
            let s = nrm(b);
            if s > 0.0 {
                b.iter_mut().for_each(|v| *v /= s);
            }
        }
        let ab: Vec<_> = basis.iter().map(|v| apply_a(v)).collect();
        let bb: Vec<_> = basis.iter().map(|v| apply_b(v)).collect();
        let (rv, coef) = rayleigh_ritz(&ab, &bb, &basis);
        spread = rv.iter().fold(spread, |s, v| s.max(v.abs()));
        let cols = coef.ncols().min(m);
        let nx = x.len();
        let newx: Vec<_> = (0..cols).map(|c| combine(&basis, &coef, c, 0)).collect();
        p = if nx_plus_w > nx || !p.is_empty() {
            (0..cols).map(|c| combine(&basis, &coef, c, nx)).collect()
        } else {
            Vec::new()
        };
        p.retain(|v| nrm(v) > 0.0);
        x = newx;
        vals = rv[..cols].to_vec();
        vals.resize(m, 0.0);
    }
    LobpcgOutcome {
        eigenvalues: vals[..x.len()].to_vec(),
        eigenvectors: x,
        residuals: res,
        iterations: max_iter,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_lowest_of_diagonal_pencil() {
        let n = 200;
        let a: Vec<f64> = (0..n).map(|i| (i as f64) - 3.5).collect();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i % 7) as f64)).collect();
        let x0: Vec<Vec<f64>> = (0..5)
            .map(|k| (0..n).map(|i| ((i * (k + 3)) as f64).sin() + 0.1).collect())
            .collect();
        let out = lobpcg(
            |x| x.iter().zip(&a).map(|(v, d)| v * d).collect(),
            |x| x.iter().zip(&b).map(|(v, d)| v * d).collect(),
            |r| r.iter().zip(&b).map(|(v, d)| v / d).collect(),
            x0,
            3,
            1e-10,
            500,
        );
        assert!(out.converged);
        let mut exact: Vec<f64> = (0..n).map(|i| a[i] / b[i]).collect();
        exact.sort_by(f64::total_cmp);
        for k in 0..3 {
            assert!((out.eigenvalues[k] - exact[k]).abs() < 1e-8, "{k}: {} vs {}", out.eigenvalues[k], exact[k]);
        }
    }
}
