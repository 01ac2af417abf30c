//! Lowest eigenpairs of the Hermitian pencil `Kx = λMx`.
//!
//! Shift-invert Lanczos on `(K - σM)⁻¹M` in the `M` inner product, with full
//! reorthogonalization and thick restarts that keep the leading Ritz vectors.
//! The shifted matrix is factored as `LDLᴴ` in envelope (skyline) storage after a
//! reverse Cuthill–McKee reordering; its inertia certifies that `σ` lies below the
//! whole spectrum, so the largest Ritz values are the lowest eigenvalues.

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::strip::OperatorPair;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const MAX_SHIFT_RETRIES: usize = 3;
const MAX_SHIFT_LOWERINGS: usize = 12;

/// `0.9 Θ₀ b' B`, the default shift.
pub fn default_shift(theta0: f64, b_prime: f64, b: f64) -> f64 {
    0.9 * theta0 * b_prime * b
}

/// Reverse Cuthill–McKee permutation: `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let degree: Vec<usize> = (0..n).map(|i| a.pattern(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |start: usize| -> (usize, usize) {
        // (eccentricity, last node of the deepest level)
        let mut depth = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        depth[start] = 0;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            if depth[v] > depth[last] || (depth[v] == depth[last] && degree[v] < degree[last]) {
                last = v;
            }
            for &w in a.pattern(v) {
                if depth[w] == usize::MAX {
                    depth[w] = depth[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (depth[last], last)
    };
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start
        let mut start = seed;
        let mut ecc = bfs_levels(start).0;
        for _ in 0..8 {
            let (_, far) = bfs_levels(start);
            let e = bfs_levels(far).0;
            if e <= ecc {
                break;
            }
            ecc = e;
            start = far;
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = a.pattern(v).iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Stored off-diagonal envelope of `A` under `perm`.
pub fn envelope_size(a: &CsrMatrix, perm: &[usize]) -> usize {
    let n = a.nrows();
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut first: Vec<usize> = (0..n).collect();
    for old in 0..n {
        let i = inv[old];
        for &c in a.pattern(old) {
            let j = inv[c];
            let (lo, hi) = if j < i { (j, i) } else { (i, j) };
            first[hi] = first[hi].min(lo);
        }
    }
    (0..n).map(|i| i - first[i]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorStats {
    pub dim: usize,
    /// Stored off-diagonal entries of `L`.
    pub envelope: usize,
    pub max_bandwidth: usize,
    pub negative_pivots: usize,
    pub seconds: f64,
}

/// `P A Pᵀ = L D Lᴴ` with `L` stored row by row over its envelope.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    lower: Vec<Complex64>,
    diag: Vec<f64>,
    stats: FactorStats,
}

impl LdlFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Self::with_ordering(a, rcm_ordering(a))
    }

    pub fn with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let clock = Instant::now();
        let n = a.nrows();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for &c in a.pattern(old) {
                let j = inv[c];
                if j < i {
                    first[i] = first[i].min(j);
                } else {
                    first[j] = first[j].min(i);
                }
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i]);
        }
        let mut lower = vec![ZERO; offset[n]];
        let mut diag = vec![0.0; n];
        let scale = a.max_abs();
        for old in 0..n {
            let i = inv[old];
            for (c, v) in a.row(old) {
                let j = inv[c];
                if j < i {
                    lower[offset[i] + j - first[i]] = v;
                } else if j == i {
                    diag[i] = v.re;
                }
            }
        }
        // Crout: row i holds W_ij = L_ij D_j while it is being formed
        for i in 0..n {
            let fi = first[i];
            let (done, row_i) = lower.split_at_mut(offset[i]);
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let rj = &done[offset[j] + lo - fj..offset[j] + j - fj];
                let ri = &row_i[lo - fi..j - fi];
                let dot: Complex64 = ri.iter().zip(rj).map(|(w, l)| w * l.conj()).sum();
                row_i[j - fi] -= dot;
            }
            let mut d = diag[i];
            for j in fi..i {
                let w = row_i[j - fi];
                let l = w / diag[j];
                d -= (w * l.conj()).re;
                row_i[j - fi] = l;
            }
            if !d.is_finite() || d.abs() <= 1e-11 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Factorization { pivot: i, retries: 0 });
            }
            diag[i] = d;
        }
        let stats = FactorStats {
            dim: n,
            envelope: offset[n],
            max_bandwidth: (0..n).map(|i| i - first[i]).max().unwrap_or(0),
            negative_pivots: diag.iter().filter(|d| **d < 0.0).count(),
            seconds: clock.elapsed().as_secs_f64(),
        };
        Ok(Self { perm, first, offset, lower, diag, stats })
    }

    pub fn stats(&self) -> FactorStats {
        self.stats
    }

    /// Number of negative eigenvalues of the factored matrix.
    pub fn negative_pivots(&self) -> usize {
        self.stats.negative_pivots
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.diag.len();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            let dot: Complex64 = row.iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] -= dot;
        }
        for (xi, d) in x.iter_mut().zip(&self.diag) {
            *xi /= d;
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = x[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            for (xk, l) in x[fi..i].iter_mut().zip(row) {
                *xk -= l.conj() * xi;
            }
        }
        let mut out = vec![ZERO; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigOptions {
    pub nev: usize,
    /// Bound on `‖Kx - λMx‖ / (|λ| ‖Mx‖)`.
    pub tol: f64,
    pub shift: f64,
    pub seed: u64,
    /// Largest Krylov basis before a restart.
    pub krylov: usize,
    pub max_restarts: usize,
    #[serde(skip)]
    pub start: Option<Vec<Complex64>>,
}

impl EigOptions {
    pub fn new(nev: usize, tol: f64, shift: f64) -> Self {
        Self { nev, tol, shift, seed: 0x5eed, krylov: 40, max_restarts: 400, start: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_start(mut self, start: Vec<Complex64>) -> Self {
        self.start = Some(start);
        self
    }
}

/// Serializable part of [`EigResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigMeta {
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub shift: f64,
    pub shift_retries: usize,
    /// Applications of `(K - σM)⁻¹M`.
    pub iterations: usize,
    pub restarts: usize,
    pub factorization: FactorStats,
    /// Lowest Ritz value after each restart.
    pub history: Vec<f64>,
    pub monotone: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct EigResult {
    pub values: Vec<f64>,
    /// `M`-orthonormal eigenvectors.
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub meta: EigMeta,
}

impl EigResult {
    pub fn lambda1(&self) -> f64 {
        self.values[0]
    }
}

/// Factors `K - σM`, lowering `σ` until the factor has no negative pivots and
/// nudging it when a pivot breaks down.
fn shifted_factor(
    k: &CsrMatrix,
    m: &CsrMatrix,
    shift: f64,
    hint: Option<Vec<usize>>,
) -> Result<(LdlFactor, f64, usize)> {
    let mut sigma = shift;
    let mut retries = 0;
    let mut lowerings = 0;
    let pattern = k.add_scaled(Complex64::new(1.0, 0.0), m);
    let mut perm = rcm_ordering(&pattern);
    if let Some(h) = hint {
        if envelope_size(&pattern, &h) < envelope_size(&pattern, &perm) {
            perm = h;
        }
    }
    loop {
        let a = k.add_scaled(Complex64::new(-sigma, 0.0), m);
        match LdlFactor::with_ordering(&a, perm.clone()) {
            Ok(f) if f.negative_pivots() == 0 => return Ok((f, sigma, retries)),
            Ok(f) => {
                lowerings += 1;
                if lowerings > MAX_SHIFT_LOWERINGS {
                    return Err(Error::NoConvergence { what: "lowering the shift below the spectrum".into(), iterations: lowerings });
                }
                log::debug!("shift {sigma} lies above {} eigenvalues, lowering", f.negative_pivots());
                sigma -= 0.25 * sigma.abs().max(1.0);
            }
            Err(Error::Factorization { pivot, .. }) => {
                retries += 1;
                if retries > MAX_SHIFT_RETRIES {
                    return Err(Error::Factorization { pivot, retries: retries - 1 });
                }
                log::debug!("factorization breakdown at pivot {pivot}, perturbing shift");
                sigma -= 1e-3 * retries as f64 * sigma.abs().max(1.0);
            }
            Err(e) => return Err(e),
        }
    }
}

fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `Σ_j V_j c_j`
fn combine(basis: &[Vec<Complex64>], coeff: impl Fn(usize) -> Complex64, n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; n];
    for (j, v) in basis.iter().enumerate() {
        let c = coeff(j);
        if c != ZERO {
            axpy(c, v, &mut out);
        }
    }
    out
}

pub fn lowest_pairs(op: &OperatorPair, opts: &EigOptions) -> Result<EigResult> {
    solve_with_ordering(&op.k, &op.m, opts, Some(op.fold_ordering()))
}

pub fn solve_pencil(k: &CsrMatrix, m: &CsrMatrix, opts: &EigOptions) -> Result<EigResult> {
    solve_with_ordering(k, m, opts, None)
}

/// As [`solve_pencil`], trying `hint` against reverse Cuthill–McKee and
/// keeping the ordering with the smaller envelope.
pub fn solve_with_ordering(
    k: &CsrMatrix,
    m: &CsrMatrix,
    opts: &EigOptions,
    hint: Option<Vec<usize>>,
) -> Result<EigResult> {
    let clock = Instant::now();
    let n = k.nrows();
    let nev = opts.nev;
    if nev == 0 || nev > 8 || !(opts.tol >= 1e-12) {
        return Err(Error::InvalidInput(format!("need 1 ≤ nev ≤ 8 and tol ≥ 1e-12, got {nev}, {}", opts.tol)));
    }
    if n < nev + 2 || m.nrows() != n {
        return Err(Error::InvalidInput(format!("pencil of dimension {n} is too small for {nev} pairs")));
    }
    let (factor, sigma, shift_retries) = shifted_factor(k, m, opts.shift, hint)?;
    let kmax = opts.krylov.clamp(nev + 8, n);
    let keep = (kmax / 2).max(nev + 2).min(kmax - 2);

    let apply = |x: &[Complex64]| factor.solve(&m.mul_vec(x));

    let mut start = match &opts.start {
        Some(s) if s.len() == n => s.clone(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
        }
    };
    if let Some(s) = &opts.start {
        // a small random admixture keeps every eigendirection reachable
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let scale = 1e-3 * (dot(s, s).re / n as f64).sqrt();
        for v in start.iter_mut() {
            *v += scale * Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
    }

    let mut v: Vec<Vec<Complex64>> = Vec::with_capacity(kmax + 1);
    let mut mv: Vec<Vec<Complex64>> = Vec::with_capacity(kmax + 1);
    let mut w: Vec<Vec<Complex64>> = Vec::with_capacity(kmax);
    let normalize = |x: Vec<Complex64>| -> Option<(Vec<Complex64>, Vec<Complex64>)> {
        let mx = m.mul_vec(&x);
        let nrm = dot(&x, &mx).re.sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return None;
        }
        let s = 1.0 / nrm;
        Some((x.iter().map(|c| c * s).collect(), mx.iter().map(|c| c * s).collect()))
    };
    let (v0, mv0) = normalize(start).ok_or_else(|| Error::InvalidInput("zero start vector".into()))?;
    v.push(v0);
    mv.push(mv0);

    let mut iterations = 0;
    let mut history: Vec<f64> = Vec::new();
    let mut restarts = 0;
    loop {
        // expand to kmax vectors with W = Op V
        let mut exhausted = false;
        while w.len() < kmax {
            let mut x = apply(v.last().unwrap());
            iterations += 1;
            let before = dot(&x, &m.mul_vec(&x)).re.sqrt();
            w.push(x.clone());
            for _ in 0..2 {
                for (vj, mvj) in v.iter().zip(&mv) {
                    let c = dot(mvj, &x);
                    axpy(-c, vj, &mut x);
                }
            }
            let mx = m.mul_vec(&x);
            let after = dot(&x, &mx).re.sqrt();
            if !(after > 1e-12 * before) {
                exhausted = true;
                break;
            }
            v.push(x.iter().map(|z| z / after).collect());
            mv.push(mx.iter().map(|z| z / after).collect());
        }
        let p = w.len();
        let mut h = DMatrix::<Complex64>::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                h[(i, j)] = dot(&mv[i], &w[j]);
            }
        }
        let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let mut idx: Vec<usize> = (0..p).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let theta: Vec<f64> = idx.iter().map(|&c| eig.eigenvalues[c]).collect();
        let y = |r: usize, c: usize| eig.eigenvectors[(r, idx[c])];
        let lambda: Vec<f64> = theta.iter().map(|t| sigma + 1.0 / t).collect();
        history.push(lambda[0]);

        // explicit residuals of the wanted pairs
        let mut vectors = Vec::with_capacity(nev);
        let mut residuals = Vec::with_capacity(nev);
        for c in 0..nev.min(p) {
            let x = combine(&v[..p], |r| y(r, c), n);
            let mx = combine(&mv[..p], |r| y(r, c), n);
            let kx = k.mul_vec(&x);
            let num: f64 = kx.iter().zip(&mx).map(|(a, b)| (a - lambda[c] * b).norm_sqr()).sum::<f64>().sqrt();
            let den = lambda[c].abs() * mx.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            residuals.push(num / den);
            vectors.push(x);
        }
        let converged = p >= nev && residuals.iter().all(|r| *r <= opts.tol);
        if converged || exhausted || restarts >= opts.max_restarts {
            if !converged {
                if exhausted && p >= nev {
                    log::debug!("Krylov space exhausted at dimension {p}");
                } else {
                    return Err(Error::NoConvergence { what: "shift-invert Lanczos".into(), iterations });
                }
            }
            let monotone = history.windows(2).all(|h| h[1] <= h[0] + 1e-12 * h[0].abs());
            let mut order: Vec<usize> = (0..nev.min(p)).collect();
            order.sort_by(|&a, &b| lambda[a].total_cmp(&lambda[b]));
            let values: Vec<f64> = order.iter().map(|&c| lambda[c]).collect();
            let residuals: Vec<f64> = order.iter().map(|&c| residuals[c]).collect();
            let vectors: Vec<Vec<Complex64>> = order.iter().map(|&c| vectors[c].clone()).collect();
            let meta = EigMeta {
                values: values.clone(),
                residuals: residuals.clone(),
                shift: sigma,
                shift_retries,
                iterations,
                restarts,
                factorization: factor.stats(),
                history,
                monotone,
                seconds: clock.elapsed().as_secs_f64(),
            };
            return Ok(EigResult { values, vectors, residuals, meta });
        }

        // thick restart: leading Ritz vectors plus the continuation vector
        restarts += 1;
        let next_v = v.pop().unwrap();
        let next_mv = mv.pop().unwrap();
        let nv: Vec<Vec<Complex64>> = (0..keep).map(|c| combine(&v, |r| y(r, c), n)).collect();
        let nmv: Vec<Vec<Complex64>> = (0..keep).map(|c| combine(&mv, |r| y(r, c), n)).collect();
        let nw: Vec<Vec<Complex64>> = (0..keep).map(|c| combine(&w, |r| y(r, c), n)).collect();
        v = nv;
        mv = nmv;
        w = nw;
        v.push(next_v);
        mv.push(next_mv);
    }
}

/// Dense reference solution of the pencil for small problems.
pub fn dense_pencil(k: &CsrMatrix, m: &CsrMatrix) -> Vec<f64> {
    let n = k.nrows();
    let kd = DMatrix::from_fn(n, n, |i, j| k.get(i, j));
    let md = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
    let chol = md.cholesky().expect("mass matrix must be positive definite");
    let linv = chol.l().try_inverse().expect("invertible Cholesky factor");
    let c = &linv * kd * linv.adjoint();
    let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
    let mut vals: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}
