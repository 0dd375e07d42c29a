#![allow(dead_code)]

pub fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

pub fn assert_rel(got: f64, want: f64, tol: f64, what: &str) {
    let e = rel_err(got, want);
    assert!(e <= tol, "{what}: got {got:e}, want {want:e}, rel err {e:e} > {tol:e}");
}

/// `n` points log-spaced on `[lo, hi]`.
pub fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Returns `false` if `a + jitter I` has no Cholesky factor.
pub fn cholesky_ok(a: &[Vec<f64>], jitter: f64) -> bool {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = l[i][..j].iter().zip(&l[j][..j]).map(|(x, y)| x * y).sum();
            let s = a[i][j] + if i == j { jitter } else { 0.0 } - dot;
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}
