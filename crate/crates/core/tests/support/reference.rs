//! Straight-line learners written from the update formulas alone.
//!
//! Nothing here calls into the library's learners, ternarizer, QR or
//! solvers. Matrices are plain nalgebra containers; every step is spelled
//! out with loops.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct Trace {
    pub objectives: Vec<f64>,
}

impl Trace {
    pub fn last(&self) -> f64 {
        *self.objectives.last().unwrap()
    }
}

/// Top-`s` magnitudes kept as signs; earlier index wins ties.
pub fn tern(v: &[f64], s: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    let mut taken = vec![false; v.len()];
    for _ in 0..s.min(v.len()) {
        let mut best: Option<usize> = None;
        for i in 0..v.len() {
            if taken[i] {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) if v[i].abs() > v[b].abs() => best = Some(i),
                _ => {}
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        if v[b] > 0.0 {
            out[b] = 1.0;
        } else if v[b] < 0.0 {
            out[b] = -1.0;
        }
    }
    out
}

fn tern_columns(m: &DMatrix<f64>, s: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        let col: Vec<f64> = (0..m.nrows()).map(|i| m[(i, j)]).collect();
        for (i, v) in tern(&col, s).into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

/// Classical Gram–Schmidt on a fresh ChaCha8 Gaussian draw, column-major.
pub fn init_projection(d: usize, l: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DMatrix::zeros(d, l);
    for j in 0..l {
        for i in 0..d {
            g[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    let mut q: DMatrix<f64> = DMatrix::zeros(d, l);
    for j in 0..l {
        let mut v: Vec<f64> = (0..d).map(|i| g[(i, j)]).collect();
        for k in 0..j {
            let dot: f64 = (0..d).map(|i| q[(i, k)] * g[(i, j)]).sum();
            for i in 0..d {
                v[i] -= dot * q[(i, k)];
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for i in 0..d {
            q[(i, j)] = v[i] / n;
        }
    }
    q
}

/// Polar factor `C (CᵀC)^{-1/2}` through a symmetric eigendecomposition,
/// or `None` when `C` is (nearly) rank deficient.
pub fn polar_eigen(c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = (c.transpose() * c).symmetric_eigen();
    let l = c.ncols();
    let top = eig.eigenvalues.max();
    let mut inv_sqrt = DMatrix::zeros(l, l);
    for k in 0..l {
        let lam = eig.eigenvalues[k];
        if lam <= 1e-8 * top.max(1.0) {
            return None;
        }
        let vk = eig.eigenvectors.column(k);
        inv_sqrt += (vk * vk.transpose()) / lam.sqrt();
    }
    Some(c * inv_sqrt)
}

/// Polar factor from a thin SVD. When the cross matrix is rank deficient the
/// completion of `U` is not unique and only an SVD reproduces the same one;
/// otherwise the result is checked against the eigendecomposition route.
pub fn polar(c: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = c.clone().try_svd(true, true, f64::EPSILON, 0).unwrap();
    let mut u = svd.u.unwrap();
    let smax = svd.singular_values.max();
    let tol = smax.max(1.0) * c.nrows() as f64 * f64::EPSILON;
    for k in 0..u.ncols() {
        if svd.singular_values[k] <= tol {
            let first = u.column(k).iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(0.0);
            if first < 0.0 {
                u.column_mut(k).neg_mut();
            }
        }
    }
    let w = u * svd.v_t.unwrap();
    if let Some(other) = polar_eigen(c) {
        assert!((&w - other).norm() < 1e-8, "polar factor routes disagree");
    }
    w
}

/// Gaussian elimination with partial pivoting.
pub fn solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[(r, col)].abs() > m[(piv, col)].abs() {
                piv = r;
            }
        }
        m.swap_rows(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[(r, col)] / m[(col, col)];
            for c in col..n {
                m[(r, c)] -= f * m[(col, c)];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= m[(r, c)] * x[c];
        }
        x[r] = acc / m[(r, r)];
    }
    x
}

fn stop(prev: f64, obj: f64, rel_tol: f64) -> bool {
    if obj > prev * (1.0 + 1e-9) {
        return false;
    }
    let rel = if prev > 0.0 { (prev - obj) / prev } else { 0.0 };
    rel < rel_tol
}

fn fro2(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Contiguous groups of `m` over `n` columns.
fn groups(n: usize, m: usize) -> Vec<Vec<usize>> {
    (0..n).collect::<Vec<_>>().chunks(m).map(|c| c.to_vec()).collect()
}

pub struct AoeSetup {
    pub l: usize,
    pub s: usize,
    pub xi: f64,
    pub m: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

pub fn aoe(x: &DMatrix<f64>, p: &AoeSetup) -> Trace {
    let n = x.ncols();
    let gs = groups(n, p.m);
    let objective = |w: &DMatrix<f64>, e: &DMatrix<f64>, r: &DMatrix<f64>| {
        let mut f = fro2(&(e - w.transpose() * x));
        for (g, members) in gs.iter().enumerate() {
            for &i in members {
                f += p.xi * (e.column(i) - r.column(g)).norm_squared();
            }
        }
        f
    };
    let r_step = |e: &DMatrix<f64>| {
        let mut r = DMatrix::zeros(p.l, gs.len());
        for (g, members) in gs.iter().enumerate() {
            let mut sum = vec![0.0; p.l];
            for &i in members {
                for k in 0..p.l {
                    sum[k] += e[(k, i)];
                }
            }
            for (k, v) in tern(&sum, p.s).into_iter().enumerate() {
                r[(k, g)] = v;
            }
        }
        r
    };

    let mut w = init_projection(x.nrows(), p.l, p.seed);
    let mut e = tern_columns(&(w.transpose() * x), p.s);
    let mut r = r_step(&e);
    let mut prev = objective(&w, &e, &r);
    let mut trace = vec![prev];
    for _ in 0..p.max_iters {
        w = polar(&(x * e.transpose()));
        let proj = w.transpose() * x;
        for (g, members) in gs.iter().enumerate() {
            for &i in members {
                let arg: Vec<f64> = (0..p.l).map(|k| proj[(k, i)] + p.xi * r[(k, g)]).collect();
                for (k, v) in tern(&arg, p.s).into_iter().enumerate() {
                    e[(k, i)] = v;
                }
            }
        }
        r = r_step(&e);
        let obj = objective(&w, &e, &r);
        trace.push(obj);
        if stop(prev, obj, p.rel_tol) {
            break;
        }
        prev = obj;
    }
    Trace { objectives: trace }
}

pub struct EoaSetup {
    pub l: usize,
    pub s: usize,
    pub gamma: f64,
    pub eta: f64,
    pub m: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

pub fn eoa(x: &DMatrix<f64>, p: &EoaSetup) -> Trace {
    let (d, n) = x.shape();
    let gs = groups(n, p.m);
    let xg: Vec<DMatrix<f64>> = gs.iter().map(|m| x.select_columns(m)).collect();
    let objective = |w: &DMatrix<f64>, a: &DMatrix<f64>, r: &DMatrix<f64>| {
        let mut f = fro2(&(r - w.transpose() * a));
        for (g, x_g) in xg.iter().enumerate() {
            let a_g = a.column(g);
            let mut sim = 0.0;
            for i in 0..x_g.ncols() {
                let dot: f64 = (0..d).map(|k| x_g[(k, i)] * a_g[k]).sum();
                sim += (dot - 1.0).powi(2);
            }
            f += p.gamma * (sim + p.eta * a_g.norm_squared());
        }
        f
    };

    // ridge start: (X_g X_gᵀ + ηI) a = X_g 1
    let mut a = DMatrix::zeros(d, gs.len());
    for (g, x_g) in xg.iter().enumerate() {
        let mut sys = x_g * x_g.transpose();
        for k in 0..d {
            sys[(k, k)] += p.eta;
        }
        let rhs: Vec<f64> = (0..d).map(|k| x_g.row(k).sum()).collect();
        for (k, v) in solve(&sys, &rhs).into_iter().enumerate() {
            a[(k, g)] = v;
        }
    }
    let mut w = init_projection(d, p.l, p.seed);
    let mut r = tern_columns(&(w.transpose() * &a), p.s);
    let mut prev = objective(&w, &a, &r);
    let mut trace = vec![prev];
    for _ in 0..p.max_iters {
        w = polar(&(&a * r.transpose()));
        let wwt = &w * w.transpose();
        for (g, x_g) in xg.iter().enumerate() {
            let mut sys = &wwt + (x_g * x_g.transpose()) * p.gamma;
            for k in 0..d {
                sys[(k, k)] += p.gamma * p.eta;
            }
            let wr = &w * r.column(g);
            let rhs: Vec<f64> = (0..d).map(|k| wr[k] + p.gamma * x_g.row(k).sum()).collect();
            for (k, v) in solve(&sys, &rhs).into_iter().enumerate() {
                a[(k, g)] = v;
            }
        }
        r = tern_columns(&(w.transpose() * &a), p.s);
        let obj = objective(&w, &a, &r);
        trace.push(obj);
        if stop(prev, obj, p.rel_tol) {
            break;
        }
        prev = obj;
    }
    Trace { objectives: trace }
}
