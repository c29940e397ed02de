//! Symmetric sparse matrices in CSR form, incomplete Cholesky and PCG.

/// CSR matrix storing both triangles, columns sorted within each row.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    diag: Vec<usize>,
}

impl Csr {
    /// Pattern from per-row column lists; values start at zero.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Csr {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, mut r) in rows.into_iter().enumerate() {
            r.push(i);
            r.sort_unstable();
            r.dedup();
            diag.push(cols.len() + r.iter().position(|&c| c == i).unwrap_or(0));
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Csr { n, ncols: n, row_ptr, cols, vals, diag }
    }

    /// Wraps assembled CSR arrays with sorted columns. For square matrices
    /// every diagonal entry must be present.
    pub fn from_raw(n: usize, ncols: usize, row_ptr: Vec<usize>, cols: Vec<usize>, vals: Vec<f64>) -> Csr {
        let diag = if n == ncols {
            (0..n)
                .map(|i| {
                    let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
                    lo + cols[lo..hi].binary_search(&i).expect("missing diagonal entry")
                })
                .collect()
        } else {
            Vec::new()
        };
        Csr { n, ncols, row_ptr, cols, vals, diag }
    }

    /// Position of entry (i, j) in `vals`, if present.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn clear(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.diag.iter().map(|&k| self.vals[k]).collect()
    }

    pub fn add_to_diagonal(&mut self, d: &[f64]) {
        for (k, x) in self.diag.iter().zip(d) {
            self.vals[*k] += x;
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }
}

/// Zero-fill incomplete Cholesky factor L (lower triangle, row storage) with
/// A ≈ L Lᵀ.
#[derive(Debug, Clone)]
pub struct Ic0 {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Ic0 {
    /// Factors A + shift·diag(A), retrying with growing shifts when a pivot
    /// fails. Returns the factor and the shift used.
    pub fn new(a: &Csr) -> (Ic0, f64) {
        let mut shift = 0.0;
        loop {
            if let Some(f) = Ic0::try_factor(a, shift) {
                return (f, shift);
            }
            shift = if shift == 0.0 { 1e-3 } else { shift * 4.0 };
        }
    }

    fn try_factor(a: &Csr, shift: f64) -> Option<Ic0> {
        let n = a.n;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[k];
                if j > i {
                    break;
                }
                cols.push(j);
                vals.push(if j == i { a.vals[k] * (1.0 + shift) } else { a.vals[k] });
            }
            row_ptr.push(cols.len());
        }
        for i in 0..n {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            for p in lo..hi {
                let j = cols[p];
                // Σ_{k<j} L_ik L_jk over the common sparsity.
                let (mut a_ptr, mut b_ptr) = (lo, row_ptr[j]);
                let b_end = row_ptr[j + 1];
                let mut s = 0.0;
                while a_ptr < p && b_ptr < b_end {
                    let (ca, cb) = (cols[a_ptr], cols[b_ptr]);
                    if cb >= j {
                        break;
                    }
                    match ca.cmp(&cb) {
                        std::cmp::Ordering::Less => a_ptr += 1,
                        std::cmp::Ordering::Greater => b_ptr += 1,
                        std::cmp::Ordering::Equal => {
                            s += vals[a_ptr] * vals[b_ptr];
                            a_ptr += 1;
                            b_ptr += 1;
                        }
                    }
                }
                if j == i {
                    let d = vals[p] - s;
                    if !(d > 0.0 && d.is_finite()) {
                        return None;
                    }
                    vals[p] = d.sqrt();
                } else {
                    vals[p] = (vals[p] - s) / vals[b_end - 1];
                }
            }
        }
        Some(Ic0 { row_ptr, cols, vals })
    }

    /// z = (L Lᵀ)⁻¹ r.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = r[i];
            for k in lo..hi - 1 {
                s -= self.vals[k] * z[self.cols[k]];
            }
            z[i] = s / self.vals[hi - 1];
        }
        for i in (0..n).rev() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            z[i] /= self.vals[hi - 1];
            let zi = z[i];
            for k in lo..hi - 1 {
                z[self.cols[k]] -= self.vals[k] * zi;
            }
        }
    }
}

/// Approximate inverse applied inside PCG; must be symmetric positive
/// definite.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

impl Preconditioner for Ic0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        Ic0::apply(self, r, z)
    }
}

impl Preconditioner for super::amg::Amg {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        super::amg::Amg::apply(self, r, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients for A x = b from x = 0. Stops when
/// ‖b − Ax‖ ≤ tol·‖b‖, on breakdown, or after `max_iter` iterations.
pub fn pcg<P: Preconditioner + ?Sized>(a: &Csr, pre: &P, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> PcgOutcome {
    let n = a.n;
    x.iter_mut().for_each(|v| *v = 0.0);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return PcgOutcome { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 0..max_iter {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return PcgOutcome { iterations: it, relative_residual: rel, converged: false };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return PcgOutcome { iterations: it + 1, relative_residual: rel, converged: true };
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    PcgOutcome { iterations: max_iter, relative_residual: rel, converged: false }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Reverse Cuthill–McKee order of a symmetric adjacency structure.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (adj[i].len(), i));
    for &start in &by_degree {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let head = order.len();
        order.push(start);
        let mut q = head;
        while q < order.len() {
            let v = order[q];
            q += 1;
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            nb.sort_by_key(|&w| (adj[w].len(), w));
            for w in nb {
                seen[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Csr {
        let rows = (0..n)
            .map(|i| {
                let mut r = Vec::new();
                if i > 0 {
                    r.push(i - 1);
                }
                if i + 1 < n {
                    r.push(i + 1);
                }
                r
            })
            .collect();
        let mut a = Csr::from_pattern(rows);
        for i in 0..n {
            let d = a.find(i, i).unwrap();
            a.vals[d] = 2.0;
            if i > 0 {
                let k = a.find(i, i - 1).unwrap();
                a.vals[k] = -1.0;
            }
            if i + 1 < n {
                let k = a.find(i, i + 1).unwrap();
                a.vals[k] = -1.0;
            }
        }
        a
    }

    #[test]
    fn ic0_is_exact_for_tridiagonal() {
        // A tridiagonal matrix has no fill, so IC(0) is the Cholesky factor
        // and PCG converges in one step.
        let a = laplacian_1d(50);
        let (pre, shift) = Ic0::new(&a);
        assert_eq!(shift, 0.0);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; 50];
        let out = pcg(&a, &pre, &b, &mut x, 1e-12, 10);
        assert!(out.converged && out.iterations <= 2);
        let mut ax = vec![0.0; 50];
        a.mul_vec(&x, &mut ax);
        assert!(ax.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-10));
    }

    fn laplacian_2d(n: usize) -> Csr {
        let id = |i: usize, j: usize| i * n + j;
        let rows = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let mut r = Vec::new();
                if i > 0 {
                    r.push(id(i - 1, j));
                }
                if i + 1 < n {
                    r.push(id(i + 1, j));
                }
                if j > 0 {
                    r.push(id(i, j - 1));
                }
                if j + 1 < n {
                    r.push(id(i, j + 1));
                }
                r
            })
            .collect();
        let mut a = Csr::from_pattern(rows);
        for k in 0..n * n {
            for p in a.row_ptr[k]..a.row_ptr[k + 1] {
                a.vals[p] = if a.cols[p] == k { 4.0 } else { -1.0 };
            }
        }
        a
    }

    #[test]
    fn amg_preconditioner_converges_fast_and_agrees_with_ic0() {
        let a = laplacian_2d(120);
        let n = a.n;
        let b: Vec<f64> = (0..n).map(|i| ((i * 37) % 101) as f64 / 101.0 - 0.4).collect();
        let amg = super::super::amg::Amg::new(&a).unwrap();
        assert!(amg.num_levels() >= 3);
        let mut x = vec![0.0; n];
        let out = pcg(&a, &amg, &b, &mut x, 1e-10, 200);
        assert!(out.converged && out.iterations < 40, "{out:?}");
        let (ic, _) = Ic0::new(&a);
        let mut y = vec![0.0; n];
        assert!(pcg(&a, &ic, &b, &mut y, 1e-10, 2000).converged);
        let diff = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-7 * scale);
        let mut ax = vec![0.0; n];
        a.mul_vec(&x, &mut ax);
        let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&r) <= 1e-10 * norm(&b) * 1.0001);
    }

    #[test]
    fn rcm_is_a_permutation() {
        let adj = vec![vec![3], vec![2, 3], vec![1], vec![0, 1], vec![]];
        let mut o = reverse_cuthill_mckee(&adj);
        o.sort_unstable();
        assert_eq!(o, vec![0, 1, 2, 3, 4]);
    }
}
