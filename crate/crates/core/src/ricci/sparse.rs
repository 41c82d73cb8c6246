//! Compressed sparse rows and a Jacobi-preconditioned conjugate gradient.

#[derive(Debug, Clone)]
pub(crate) struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Assemble from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut t = Vec::with_capacity(2 * self.vals.len());
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let half = 0.5 * self.vals[k];
                t.push((r, self.cols[k], half));
                t.push((self.cols[k], r, half));
            }
        }
        Self::from_triplets(self.n, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum CgOutcome {
    Converged { iterations: usize },
    /// Hit the iteration cap; the partial solution is still a descent step.
    Stopped { iterations: usize },
    /// `pᵀAp ≤ 0`: the matrix is not positive definite along some direction.
    Indefinite,
}

/// Solve `A x = b` for symmetric positive definite `A`, starting from zero.
pub(crate) fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> (Vec<f64>, CgOutcome) {
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return (x, CgOutcome::Converged { iterations: 0 });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 0..max_iters {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return (x, CgOutcome::Indefinite);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * b_norm {
            return (x, CgOutcome::Converged { iterations: it + 1 });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, CgOutcome::Stopped { iterations: max_iters })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 0.5)]);
        assert_eq!(m.get(1, 0), 1.5);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(0, 1), 0.0);
        let s = m.symmetrized();
        assert_eq!(s.get(0, 1), 0.75);
        assert_eq!(s.get(1, 0), 0.75);
    }

    #[test]
    fn solves_tridiagonal() {
        let n = 50;
        let a = laplacian_1d(n);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x_true, &mut b);
        let (x, outcome) = conjugate_gradient(&a, &b, 1e-12, 1000);
        assert!(matches!(outcome, CgOutcome::Converged { .. }));
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn detects_indefinite() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        let (_, outcome) = conjugate_gradient(&a, &[0.0, 1.0], 1e-12, 10);
        assert_eq!(outcome, CgOutcome::Indefinite);
    }
}
