//! Restarted, right-preconditioned GMRES for the matrix-free Newton solves.

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) struct GmresOutcome {
    pub solution: Vec<f64>,
    #[allow(dead_code)]
    pub relative_residual: f64,
}

/// Solves `A x = b` with `A` applied through `apply` and the right
/// preconditioner `M^{-1}` applied through `precond`.
pub(crate) fn gmres(
    apply: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    restart: usize,
    max_cycles: usize,
) -> GmresOutcome {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return GmresOutcome {
            solution: x,
            relative_residual: 0.0,
        };
    }
    let mut r = b.to_vec();
    let mut tmp = vec![0.0; n];
    let mut rel = 1.0;

    for _ in 0..max_cycles {
        let beta = norm(&r);
        rel = beta / b_norm;
        if rel <= tol {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut used = 0;

        for j in 0..restart {
            precond(&basis[j], &mut tmp);
            let mut w = vec![0.0; n];
            apply(&tmp, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let h = dot(&w, v);
                hess[i][j] = h;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= h * vk;
                }
            }
            let h_next = norm(&w);
            hess[j + 1][j] = h_next;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let denom = hess[j][j].hypot(hess[j + 1][j]);
            if denom == 0.0 {
                used = j;
                break;
            }
            cs[j] = hess[j][j] / denom;
            sn[j] = hess[j + 1][j] / denom;
            hess[j][j] = denom;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            rel = g[j + 1].abs() / b_norm;
            if rel <= tol || h_next == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = ((i + 1)..used).map(|k| hess[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        let mut z = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (zk, vk) in z.iter_mut().zip(v) {
                *zk += yi * vk;
            }
        }
        precond(&z, &mut tmp);
        for (xk, tk) in x.iter_mut().zip(&tmp) {
            *xk += tk;
        }
        apply(&x, &mut tmp);
        for ((rk, bk), ak) in r.iter_mut().zip(b).zip(&tmp) {
            *rk = bk - ak;
        }
        rel = norm(&r) / b_norm;
        if rel <= tol {
            break;
        }
    }
    GmresOutcome {
        solution: x,
        relative_residual: rel,
    }
}
