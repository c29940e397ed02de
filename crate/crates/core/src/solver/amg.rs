//! Smoothed-aggregation algebraic multigrid, used as a symmetric V-cycle
//! preconditioner for conjugate gradients.

use super::sparse::Csr;

const STRENGTH: f64 = 0.08;
const COARSEST: usize = 400;
const MAX_LEVELS: usize = 25;

#[derive(Debug, Clone)]
struct Level {
    a: Csr,
    /// Prolongation to this level from the next coarser one.
    p: Option<Csr>,
    r: Option<Csr>,
    diag: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Amg {
    levels: Vec<Level>,
    coarse: DenseCholesky,
}

impl Amg {
    pub fn new(a: &Csr) -> Option<Amg> {
        let mut levels = Vec::new();
        let mut cur = a.clone();
        while cur.n > COARSEST && levels.len() < MAX_LEVELS {
            let diag = cur.diagonal();
            if diag.iter().any(|d| !(*d > 0.0)) {
                return None;
            }
            let agg = aggregate(&cur, &diag);
            let n_coarse = agg.iter().copied().max().map_or(0, |m| m + 1);
            if n_coarse == 0 || n_coarse as f64 > 0.8 * cur.n as f64 {
                break;
            }
            let p = smoothed_prolongator(&cur, &diag, &agg, n_coarse);
            let r = transpose(&p);
            let coarse = multiply(&multiply(&r, &cur), &p);
            levels.push(Level { a: cur, p: Some(p), r: Some(r), diag });
            cur = coarse;
        }
        let coarse = DenseCholesky::new(&cur)?;
        let diag = cur.diagonal();
        levels.push(Level { a: cur, p: None, r: None, diag });
        Some(Amg { levels, coarse })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// z = V-cycle approximation of A⁻¹ r.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let lev = &self.levels[l];
        if l + 1 == self.levels.len() {
            self.coarse.solve(b, x);
            return;
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        gauss_seidel(&lev.a, &lev.diag, b, x, true);
        let mut res = vec![0.0; lev.a.n];
        lev.a.mul_vec(x, &mut res);
        res.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
        let rmat = lev.r.as_ref().expect("restriction on non-coarse level");
        let mut bc = vec![0.0; rmat.n];
        rmat.mul_vec(&res, &mut bc);
        let mut xc = vec![0.0; rmat.n];
        self.cycle(l + 1, &bc, &mut xc);
        let pmat = lev.p.as_ref().expect("prolongation on non-coarse level");
        let mut corr = vec![0.0; lev.a.n];
        pmat.mul_vec(&xc, &mut corr);
        x.iter_mut().zip(&corr).for_each(|(x, c)| *x += c);
        gauss_seidel(&lev.a, &lev.diag, b, x, false);
    }
}

fn gauss_seidel(a: &Csr, diag: &[f64], b: &[f64], x: &mut [f64], forward: bool) {
    let sweep = |i: usize, x: &mut [f64]| {
        let mut s = b[i];
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.cols[k];
            if j != i {
                s -= a.vals[k] * x[j];
            }
        }
        x[i] = s / diag[i];
    };
    if forward {
        (0..a.n).for_each(|i| sweep(i, x));
    } else {
        (0..a.n).rev().for_each(|i| sweep(i, x));
    }
}

/// Greedy aggregation on the strong-connection graph.
fn aggregate(a: &Csr, diag: &[f64]) -> Vec<usize> {
    let n = a.n;
    let strong = |i: usize| {
        (a.row_ptr[i]..a.row_ptr[i + 1]).filter_map(move |k| {
            let j = a.cols[k];
            (j != i && a.vals[k].abs() >= STRENGTH * (diag[i] * diag[j]).sqrt()).then_some(j)
        })
    };
    let mut agg = vec![usize::MAX; n];
    let mut count = 0;
    for i in 0..n {
        if agg[i] != usize::MAX || strong(i).any(|j| agg[j] != usize::MAX) {
            continue;
        }
        agg[i] = count;
        for j in strong(i) {
            agg[j] = count;
        }
        count += 1;
    }
    for i in 0..n {
        if agg[i] == usize::MAX {
            if let Some(j) = strong(i).find(|&j| agg[j] != usize::MAX) {
                agg[i] = agg[j];
            }
        }
    }
    for v in agg.iter_mut() {
        if *v == usize::MAX {
            *v = count;
            count += 1;
        }
    }
    agg
}

/// P = (I − ω D⁻¹A) P̂ with P̂ the aggregate indicator and ω = 4/(3ρ(D⁻¹A)).
fn smoothed_prolongator(a: &Csr, diag: &[f64], agg: &[usize], n_coarse: usize) -> Csr {
    let omega = 4.0 / (3.0 * spectral_radius(a, diag));
    let n = a.n;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    let mut acc: Vec<(usize, f64)> = Vec::new();
    for i in 0..n {
        acc.clear();
        acc.push((agg[i], 1.0));
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            acc.push((agg[a.cols[k]], -omega * a.vals[k] / diag[i]));
        }
        acc.sort_unstable_by_key(|e| e.0);
        let mut last = usize::MAX;
        for &(c, v) in &acc {
            if c == last {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                last = c;
            }
        }
        row_ptr.push(cols.len());
    }
    Csr::from_raw(n, n_coarse, row_ptr, cols, vals)
}

fn spectral_radius(a: &Csr, diag: &[f64]) -> f64 {
    let n = a.n;
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut y = vec![0.0; n];
    let mut rho = 1.0;
    for _ in 0..15 {
        a.mul_vec(&x, &mut y);
        y.iter_mut().zip(diag).for_each(|(v, d)| *v /= d);
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        rho = ny / nx;
        std::mem::swap(&mut x, &mut y);
    }
    // Power iteration approaches ρ from below.
    1.1 * rho
}

fn transpose(m: &Csr) -> Csr {
    let mut counts = vec![0usize; m.ncols + 1];
    for &c in &m.cols {
        counts[c + 1] += 1;
    }
    for i in 0..m.ncols {
        counts[i + 1] += counts[i];
    }
    let row_ptr = counts.clone();
    let mut next = counts;
    let mut cols = vec![0; m.cols.len()];
    let mut vals = vec![0.0; m.vals.len()];
    for i in 0..m.n {
        for k in m.row_ptr[i]..m.row_ptr[i + 1] {
            let c = m.cols[k];
            cols[next[c]] = i;
            vals[next[c]] = m.vals[k];
            next[c] += 1;
        }
    }
    Csr::from_raw(m.ncols, m.n, row_ptr, cols, vals)
}

fn multiply(a: &Csr, b: &Csr) -> Csr {
    let mut row_ptr = Vec::with_capacity(a.n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    let mut marker = vec![usize::MAX; b.ncols];
    let mut acc = vec![0.0; b.ncols];
    let mut touched = Vec::new();
    for i in 0..a.n {
        touched.clear();
        for ka in a.row_ptr[i]..a.row_ptr[i + 1] {
            let (j, va) = (a.cols[ka], a.vals[ka]);
            for kb in b.row_ptr[j]..b.row_ptr[j + 1] {
                let c = b.cols[kb];
                if marker[c] != i {
                    marker[c] = i;
                    acc[c] = 0.0;
                    touched.push(c);
                }
                acc[c] += va * b.vals[kb];
            }
        }
        touched.sort_unstable();
        for &c in &touched {
            cols.push(c);
            vals.push(acc[c]);
        }
        row_ptr.push(cols.len());
    }
    Csr::from_raw(a.n, b.ncols, row_ptr, cols, vals)
}

#[derive(Debug, Clone)]
struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    fn new(a: &Csr) -> Option<DenseCholesky> {
        let n = a.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                l[i * n + a.cols[k]] = a.vals[k];
            }
        }
        for j in 0..n {
            let mut d = l[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = l[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Some(DenseCholesky { n, l })
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
    }
}
