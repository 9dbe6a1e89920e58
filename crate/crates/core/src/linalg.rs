//! Dense-band linear algebra for the 5-point operators: Cholesky and LDLᵀ
//! factorizations (the latter with Sylvester inertia counts), a symmetric
//! band matvec, a cyclic Jacobi eigensolver for small dense matrices, and
//! shift-invert Lanczos with full reorthogonalization for the smallest
//! eigenvalues of large symmetric band matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Symmetric band matrix, lower storage: `data[d * n + j] = A[j + d, j]`
/// for diagonals d = 0..=bw.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub n: usize,
    pub bw: usize,
    pub data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> BandMatrix {
        BandMatrix {
            n,
            bw,
            data: vec![0.0; (bw + 1) * n],
        }
    }

    #[inline]
    pub fn get(&self, d: usize, j: usize) -> f64 {
        self.data[d * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, d: usize, j: usize, v: f64) {
        self.data[d * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, d: usize, j: usize, v: f64) {
        self.data[d * self.n + j] += v;
    }

    /// Copy with `s` added to the diagonal.
    pub fn shifted(&self, s: f64) -> BandMatrix {
        let mut out = self.clone();
        for j in 0..self.n {
            out.data[j] += s;
        }
        out
    }

    /// y = A·x for the full symmetric matrix.
    pub fn symv(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        y[..n].fill(0.0);
        for j in 0..n {
            let xj = x[j];
            y[j] += self.data[j] * xj;
            let dmax = self.bw.min(n - 1 - j);
            for d in 1..=dmax {
                let a = self.data[d * n + j];
                y[j + d] += a * xj;
                y[j] += a * x[j + d];
            }
        }
    }

    /// Max |row sum| estimate of the matrix norm.
    pub fn norm_inf_estimate(&self) -> f64 {
        let n = self.n;
        let mut rowsum = vec![0.0_f64; n];
        for j in 0..n {
            rowsum[j] += self.data[j].abs();
            let dmax = self.bw.min(n - 1 - j);
            for d in 1..=dmax {
                let a = self.data[d * n + j].abs();
                rowsum[j] += a;
                rowsum[j + d] += a;
            }
        }
        rowsum.into_iter().fold(0.0, f64::max)
    }
}

/// Band Cholesky factor L with A = LLᵀ (same band layout).
pub struct BandCholesky {
    l: BandMatrix,
}

pub fn band_cholesky(a: &BandMatrix) -> Result<BandCholesky> {
    let n = a.n;
    let bw = a.bw;
    let mut l = a.clone();
    for j in 0..n {
        let kmin = j.saturating_sub(bw);
        let mut diag = l.data[j];
        for k in kmin..j {
            let v = l.data[(j - k) * n + k];
            diag -= v * v;
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::Param(format!(
                "matrix is not positive definite (pivot {diag:.3e} at column {j})"
            )));
        }
        let dj = diag.sqrt();
        l.data[j] = dj;
        let imax = (j + bw).min(n - 1);
        for i in j + 1..=imax {
            let kmin = kmin.max(i.saturating_sub(bw));
            let mut s = l.data[(i - j) * n + j];
            for k in kmin..j {
                s -= l.data[(i - k) * n + k] * l.data[(j - k) * n + k];
            }
            l.data[(i - j) * n + j] = s / dj;
        }
    }
    Ok(BandCholesky { l })
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.l.n;
        let bw = self.l.bw;
        x[..n].copy_from_slice(&b[..n]);
        // forward L y = b
        for i in 0..n {
            let kmin = i.saturating_sub(bw);
            let mut s = x[i];
            for k in kmin..i {
                s -= self.l.data[(i - k) * n + k] * x[k];
            }
            x[i] = s / self.l.data[i];
        }
        // backward Lᵀ x = y
        for i in (0..n).rev() {
            let imax = (i + bw).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=imax {
                s -= self.l.data[(k - i) * n + i] * x[k];
            }
            x[i] = s / self.l.data[i];
        }
    }
}

/// Unit-lower band LDLᵀ factorization; D may be indefinite.
pub struct BandLdlt {
    l: BandMatrix, // row 0 holds D, rows 1..=bw hold unit-lower L
    pub negative_pivots: usize,
    pub near_zero_pivots: usize,
}

pub fn band_ldlt(a: &BandMatrix) -> Result<BandLdlt> {
    let n = a.n;
    let bw = a.bw;
    let mut l = a.clone();
    let scale = a.norm_inf_estimate().max(f64::MIN_POSITIVE);
    let tiny = 1e-13 * scale;
    let mut negative = 0usize;
    let mut near_zero = 0usize;
    // work buffer for d[k] * l[j, k]
    let mut w = vec![0.0_f64; bw + 1];
    for j in 0..n {
        let kmin = j.saturating_sub(bw);
        let mut dj = l.data[j];
        for k in kmin..j {
            let ljk = l.data[(j - k) * n + k];
            let v = ljk * l.data[k]; // d[k] * l[j,k]
            w[j - k] = v;
            dj -= v * ljk;
        }
        if !dj.is_finite() {
            return Err(Error::Param(format!("LDLᵀ breakdown at column {j}")));
        }
        if dj.abs() <= tiny {
            near_zero += 1;
        } else if dj < 0.0 {
            negative += 1;
        }
        l.data[j] = dj;
        let imax = (j + bw).min(n - 1);
        for i in j + 1..=imax {
            let kmin2 = kmin.max(i.saturating_sub(bw));
            let mut s = l.data[(i - j) * n + j];
            for k in kmin2..j {
                s -= l.data[(i - k) * n + k] * w[j - k];
            }
            let denom = if dj.abs() <= tiny { tiny.copysign(if dj < 0.0 { -1.0 } else { 1.0 }) } else { dj };
            l.data[(i - j) * n + j] = s / denom;
        }
    }
    Ok(BandLdlt {
        l,
        negative_pivots: negative,
        near_zero_pivots: near_zero,
    })
}

impl BandLdlt {
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.l.n;
        let bw = self.l.bw;
        x[..n].copy_from_slice(&b[..n]);
        for i in 0..n {
            let kmin = i.saturating_sub(bw);
            let mut s = x[i];
            for k in kmin..i {
                s -= self.l.data[(i - k) * n + k] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.l.data[i];
        }
        for i in (0..n).rev() {
            let imax = (i + bw).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=imax {
                s -= self.l.data[(k - i) * n + i] * x[k];
            }
            x[i] = s;
        }
    }
}

/// Sylvester inertia of A − shift·I: number of eigenvalues below `shift`
/// (and the count of pivots too close to zero to classify).
pub fn inertia_below(a: &BandMatrix, shift: f64) -> Result<(usize, usize)> {
    let mut jitter = 0.0;
    let scale = a.norm_inf_estimate().max(1.0);
    for _ in 0..4 {
        let f = band_ldlt(&a.shifted(-(shift + jitter)))?;
        if f.near_zero_pivots == 0 {
            return Ok((f.negative_pivots, 0));
        }
        if jitter == 0.0 {
            jitter = 1e-11 * scale;
        } else {
            jitter *= 16.0;
        }
    }
    let f = band_ldlt(&a.shifted(-shift))?;
    Ok((f.negative_pivots, f.near_zero_pivots))
}

/// Eigendecomposition of a small dense symmetric matrix by cyclic Jacobi.
/// Returns eigenvalues ascending with matching eigenvectors (columns).
pub fn jacobi_eigh(a_flat: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a_flat.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let idx = |i: usize, j: usize| i * n + j;
    for _sweep in 0..60 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[idx(i, j)] * a[idx(i, j)];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + frob(&a, n)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[idx(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[idx(p, p)];
                let aqq = a[idx(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[idx(k.min(p), k.max(p))];
                    let akq = a[idx(k.min(q), k.max(q))];
                    if k != p && k != q {
                        a[idx(k.min(p), k.max(p))] = c * akp - s * akq;
                        a[idx(k.min(q), k.max(q))] = s * akp + c * akq;
                    }
                }
                let new_pp = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                let new_qq = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                a[idx(p, p)] = new_pp;
                a[idx(q, q)] = new_qq;
                a[idx(p, q)] = 0.0;
                for k in 0..n {
                    let vkp = v[idx(k, p)];
                    let vkq = v[idx(k, q)];
                    v[idx(k, p)] = c * vkp - s * vkq;
                    v[idx(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[idx(i, i)].partial_cmp(&a[idx(j, j)]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[idx(i, i)]).collect();
    let mut vecs = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + col] = v[idx(k, src)];
        }
    }
    (vals, vecs)
}

fn frob(a: &[f64], n: usize) -> f64 {
    a.iter().take(n * n).map(|v| v * v).sum::<f64>().sqrt()
}

/// Abstract symmetric operator for Lanczos.
pub trait LinearOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub struct BandOp<'a>(pub &'a BandMatrix);

impl LinearOp for BandOp<'_> {
    fn dim(&self) -> usize {
        self.0.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.symv(x, y);
    }
}

struct ShiftInvertOp<'a> {
    factor: &'a BandCholesky,
    n: usize,
}

impl LinearOp for ShiftInvertOp<'_> {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.factor.solve(x, y);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lanczos with full reorthogonalization; returns the tridiagonal (alpha,
/// beta) and the orthonormal basis built so far.
struct LanczosState {
    alphas: Vec<f64>,
    betas: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

fn lanczos_run(
    op: &dyn LinearOp,
    steps: usize,
    seed: u64,
) -> LanczosState {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nq = norm2(&q);
    q.iter_mut().for_each(|v| *v /= nq);
    let mut state = LanczosState {
        alphas: Vec::new(),
        betas: Vec::new(),
        basis: vec![q],
    };
    let mut w = vec![0.0; n];
    for j in 0..steps.min(n) {
        op.apply(&state.basis[j], &mut w);
        let alpha = dot(&w, &state.basis[j]);
        state.alphas.push(alpha);
        // w ← w − α q_j − β q_{j−1}, then full reorthogonalization (twice)
        for _ in 0..2 {
            for q in &state.basis {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let beta = norm2(&w);
        if j + 1 == steps.min(n) {
            break;
        }
        if beta < 1e-13 {
            // invariant subspace found; restart with a random direction
            let mut fresh: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for q in &state.basis {
                let c = dot(&fresh, q);
                for (fi, qi) in fresh.iter_mut().zip(q) {
                    *fi -= c * qi;
                }
            }
            let nf = norm2(&fresh);
            if nf < 1e-300 {
                break;
            }
            fresh.iter_mut().for_each(|v| *v /= nf);
            state.betas.push(0.0);
            state.basis.push(fresh);
        } else {
            state.betas.push(beta);
            let next: Vec<f64> = w.iter().map(|v| v / beta).collect();
            state.basis.push(next);
        }
    }
    state
}

/// Eigen-pairs of the tridiagonal via dense Jacobi.
fn tridiag_eigh(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = alphas.len();
    let mut t = vec![0.0; k * k];
    for i in 0..k {
        t[i * k + i] = alphas[i];
        if i + 1 < k {
            t[i * k + i + 1] = betas[i];
            t[(i + 1) * k + i] = betas[i];
        }
    }
    jacobi_eigh(&t, k)
}

/// Rough extreme-eigenvalue estimates from a short plain Lanczos run.
pub fn extreme_estimates(a: &BandMatrix, steps: usize, seed: u64) -> (f64, f64) {
    let op = BandOp(a);
    let st = lanczos_run(&op, steps.min(a.n), seed);
    let (vals, _) = tridiag_eigh(&st.alphas, &st.betas);
    (vals[0], vals[vals.len() - 1])
}

pub struct EigPairs {
    pub values: Vec<f64>,
    /// Row-major: vectors[i] is the i-th eigenvector (length n).
    pub vectors: Vec<Vec<f64>>,
    pub worst_residual: f64,
}

/// k smallest eigenpairs of the symmetric band matrix by shift-invert
/// Lanczos with full reorthogonalization.  Residual target is
/// ‖Ax − μx‖ ≤ tol·max(1, |μ|) per pair.
pub fn smallest_eigenpairs(a: &BandMatrix, k: usize, tol: f64, seed: u64) -> Result<EigPairs> {
    let n = a.n;
    if k == 0 || k > n {
        return Err(Error::Param(format!("requested {k} eigenpairs of a {n}-dim matrix")));
    }
    let mut last_err = None;
    for (round, dim) in [4 * k + 80, 4 * k + 180, 340].into_iter().enumerate() {
        match smallest_eigenpairs_with_dim(a, k, tol, seed.wrapping_add(round as u64), dim.min(n)) {
            Ok(pairs) => return Ok(pairs),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

fn smallest_eigenpairs_with_dim(
    a: &BandMatrix,
    k: usize,
    tol: f64,
    seed: u64,
    max_dim: usize,
) -> Result<EigPairs> {
    let n = a.n;
    let (lo, hi) = extreme_estimates(a, 60.min(n), seed ^ 0xA5A5);
    let spread = (hi - lo).max(1e-9 * (1.0 + hi.abs() + lo.abs()));
    let mut sigma = lo - 0.05 * spread;
    let mut factor = None;
    let mut step = 0.05 * spread;
    for _ in 0..60 {
        match band_cholesky(&a.shifted(-sigma)) {
            Ok(f) => {
                factor = Some(f);
                break;
            }
            Err(_) => {
                sigma -= step;
                step *= 2.0;
            }
        }
    }
    let factor = factor.ok_or_else(|| Error::Param("could not find a definite shift".into()))?;

    let op = ShiftInvertOp { factor: &factor, n };
    let st = lanczos_run(&op, max_dim, seed);
    let (tvals, tvecs) = tridiag_eigh(&st.alphas, &st.betas);
    let kk = st.alphas.len();
    // largest θ of the inverse ↔ smallest μ of A
    let take = k.min(kk);
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    for idx in 0..take {
        let col = kk - 1 - idx; // descending θ
        let theta = tvals[col];
        let mu = sigma + 1.0 / theta;
        let mut x = vec![0.0; n];
        for (j, q) in st.basis.iter().enumerate().take(kk) {
            let c = tvecs[j * kk + col];
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi += c * qi;
            }
        }
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        values.push(mu);
        vectors.push(x);
    }
    // order ascending in μ
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut vectors: Vec<Vec<f64>> = order.iter().map(|&i| vectors[i].clone()).collect();

    // verify residuals; polish stragglers by inverse iteration at their own shift
    let mut w = vec![0.0; n];
    let mut worst = 0.0_f64;
    for i in 0..values.len() {
        for _attempt in 0..3 {
            a.symv(&vectors[i], &mut w);
            let mu = dot(&w, &vectors[i]);
            values[i] = mu;
            let res = {
                let mut r2 = 0.0;
                for (wi, xi) in w.iter().zip(&vectors[i]) {
                    let d = wi - mu * xi;
                    r2 += d * d;
                }
                r2.sqrt()
            };
            if res <= tol * mu.abs().max(1.0) {
                worst = worst.max(res / mu.abs().max(1.0));
                break;
            }
            // inverse-iteration polish
            let shift = mu - res.max(1e-10 * mu.abs().max(1.0));
            if let Ok(f) = band_ldlt(&a.shifted(-shift)) {
                let xin = vectors[i].clone();
                f.solve(&xin, &mut vectors[i]);
                let nx = norm2(&vectors[i]);
                if nx.is_finite() && nx > 0.0 {
                    vectors[i].iter_mut().for_each(|v| *v /= nx);
                }
            }
            a.symv(&vectors[i], &mut w);
            let mu2 = dot(&w, &vectors[i]);
            let res2 = {
                let mut r2 = 0.0;
                for (wi, xi) in w.iter().zip(&vectors[i]) {
                    let d = wi - mu2 * xi;
                    r2 += d * d;
                }
                r2.sqrt()
            };
            values[i] = mu2;
            worst = worst.max(res2 / mu2.abs().max(1.0));
            if res2 <= tol * mu2.abs().max(1.0) {
                break;
            }
        }
    }
    // restore mutual orthogonality lost to per-pair polishing
    for i in 0..vectors.len() {
        for j in 0..i {
            let (head, tail) = vectors.split_at_mut(i);
            let c = dot(&tail[0], &head[j]);
            for (vi, vj) in tail[0].iter_mut().zip(&head[j]) {
                *vi -= c * vj;
            }
        }
        let nv = norm2(&vectors[i]);
        if nv > 0.0 {
            vectors[i].iter_mut().for_each(|v| *v /= nv);
        }
    }
    // final residual audit (Rayleigh values of the possibly re-orthogonalized vectors)
    let mut failed = 0usize;
    let mut worst_rel = 0.0_f64;
    for i in 0..values.len() {
        a.symv(&vectors[i], &mut w);
        let mu = dot(&w, &vectors[i]);
        values[i] = mu;
        let mut r2 = 0.0;
        for (wi, xi) in w.iter().zip(&vectors[i]) {
            let d = wi - mu * xi;
            r2 += d * d;
        }
        let rel = r2.sqrt() / mu.abs().max(1.0);
        worst_rel = worst_rel.max(rel);
        if rel > tol {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Error::EigenNonConvergence {
            worst_residual: worst_rel,
            wanted: k,
        });
    }
    let _ = worst;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let vectors: Vec<Vec<f64>> = order.iter().map(|&i| vectors[i].clone()).collect();
    Ok(EigPairs {
        values,
        vectors,
        worst_residual: worst_rel,
    })
}
