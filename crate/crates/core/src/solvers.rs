//! Matrix-free iterative solvers for the periodic cell problems.
//!
//! All solvers operate on flat `f64` slices through operator callbacks, keep
//! the iterates inside a caller-chosen subspace via a `deflate` callback
//! (mean removal for torus scalars, a spectral projection for solenoidal
//! solves), and report iterations, final relative residual and wall time.
//! Reductions use the deterministic chunked summation of [`crate::par`], so
//! iteration histories do not depend on thread count.

use std::time::{Duration, Instant};

use crate::fft::TorusFft;
use crate::lattice::{ScalarField, TorusGrid};
use crate::par;

/// Outcome of one linear solve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub wall_ms: f64,
}

impl SolveReport {
    fn new(iterations: usize, residual: f64, converged: bool, start: Instant) -> Self {
        SolveReport {
            iterations,
            residual,
            converged,
            wall_ms: duration_ms(start.elapsed()),
        }
    }
}

fn duration_ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    /// Right-hand side violates the zero-mean precondition.
    NonZeroMeanRhs { mean: f64 },
    /// Requested tolerance or iteration budget is not positive.
    BadOptions(String),
}

impl std::fmt::Display for SolverError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverError::NonZeroMeanRhs { mean } => {
                write!(f, "right-hand side has nonzero mean {mean:e}")
            }
            SolverError::BadOptions(msg) => write!(f, "bad solver options: {msg}"),
        }
    }
}

impl std::error::Error for SolverError {}

/// Solver controls. The default iteration budget used for cell problems is
/// `50·N` per solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Relative residual target `‖Ax − b‖ ≤ tol·‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl SolveOptions {
    pub fn for_grid(grid: TorusGrid) -> Self {
        SolveOptions { tol: 1e-10, max_iter: 50 * grid.n() }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0) {
            return Err(SolverError::BadOptions(format!("tol = {}", self.tol)));
        }
        Ok(())
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 5000 }
    }
}

fn norm2(x: &[f64]) -> f64 {
    par::det_dot(x, x).max(0.0).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Preconditioned conjugate gradient on a subspace.
///
/// `apply_a` must be symmetric positive definite on the subspace fixed by
/// `deflate`; `x0` seeds the iteration (zero when absent). The returned
/// iterate satisfies `‖A x − b‖ ≤ tol·‖b‖` on convergence.
pub fn cg<A, P, D>(
    apply_a: A,
    b: &[f64],
    deflate: D,
    precond: Option<P>,
    x0: Option<&[f64]>,
    opts: SolveOptions,
) -> Result<(Vec<f64>, SolveReport), SolverError>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
    D: Fn(&mut [f64]),
{
    cg_observed(apply_a, b, deflate, precond, x0, opts, |_, _| {})
}

/// [`cg`] with a per-iteration observer `(iteration, iterate)`, used by tests
/// to track the energy functional.
pub fn cg_observed<A, P, D, O>(
    apply_a: A,
    b: &[f64],
    deflate: D,
    precond: Option<P>,
    x0: Option<&[f64]>,
    opts: SolveOptions,
    mut observe: O,
) -> Result<(Vec<f64>, SolveReport), SolverError>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
    D: Fn(&mut [f64]),
    O: FnMut(usize, &[f64]),
{
    opts.validate()?;
    let start = Instant::now();
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveReport::new(0, 0.0, true, start)));
    }

    let mut x = match x0 {
        Some(g) => {
            let mut x = g.to_vec();
            deflate(&mut x);
            x
        }
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    let mut q = vec![0.0; n];
    apply_a(&x, &mut q);
    for i in 0..n {
        r[i] = b[i] - q[i];
    }
    deflate(&mut r);

    let mut z = vec![0.0; n];
    let apply_m = |r: &[f64], z: &mut [f64]| match &precond {
        Some(m) => m(r, z),
        None => z.copy_from_slice(r),
    };
    apply_m(&r, &mut z);
    deflate(&mut z);
    let mut p = z.clone();
    let mut rz = par::det_dot(&r, &z);
    let mut residual = norm2(&r) / bnorm;

    let mut iterations = 0;
    while residual > opts.tol && iterations < opts.max_iter {
        apply_a(&p, &mut q);
        deflate(&mut q);
        let pq = par::det_dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            break; // operator not positive on this direction; bail with current iterate
        }
        let alpha = rz / pq;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &q);
        deflate(&mut r);
        iterations += 1;
        observe(iterations, &x);
        residual = norm2(&r) / bnorm;
        if residual <= opts.tol {
            break;
        }
        apply_m(&r, &mut z);
        deflate(&mut z);
        let rz_next = par::det_dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let converged = residual <= opts.tol;
    Ok((x, SolveReport::new(iterations, residual, converged, start)))
}

/// Restarted GMRES, right-preconditioned; residual-minimizing on each cycle.
///
/// `apply_a` needs a positive definite symmetric part on the deflated
/// subspace. `restart` is the Krylov depth per cycle (30 by default through
/// [`gmres`]); `opts.max_iter` caps total operator applications.
pub fn gmres_restarted<A, P, D>(
    apply_a: A,
    b: &[f64],
    deflate: D,
    precond: Option<P>,
    x0: Option<&[f64]>,
    restart: usize,
    opts: SolveOptions,
) -> Result<(Vec<f64>, SolveReport), SolverError>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
    D: Fn(&mut [f64]),
{
    opts.validate()?;
    let start = Instant::now();
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveReport::new(0, 0.0, true, start)));
    }
    let m = restart.max(1).min(n);

    let apply_m = |v: &[f64], out: &mut [f64]| match &precond {
        Some(p) => p(v, out),
        None => out.copy_from_slice(v),
    };

    let mut x = match x0 {
        Some(g) => {
            let mut x = g.to_vec();
            deflate(&mut x);
            x
        }
        None => vec![0.0; n],
    };
    let mut total_iters = 0usize;
    let mut residual;

    let mut work = vec![0.0; n];
    'outer: loop {
        // r0 = b − A x
        apply_a(&x, &mut work);
        let mut r0 = vec![0.0; n];
        for i in 0..n {
            r0[i] = b[i] - work[i];
        }
        deflate(&mut r0);
        let beta = norm2(&r0);
        residual = beta / bnorm;
        if residual <= opts.tol || total_iters >= opts.max_iter {
            break;
        }

        // Arnoldi with modified Gram-Schmidt on A·M⁻¹.
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r0.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0f64; m]; m + 1]; // h[row][col]
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k_used = 0usize;

        for k in 0..m {
            apply_m(&basis[k], &mut work);
            deflate(&mut work);
            let mut w = vec![0.0; n];
            apply_a(&work, &mut w);
            deflate(&mut w);
            for (row, base) in basis.iter().enumerate() {
                let hik = par::det_dot(&w, base);
                h[row][k] = hik;
                axpy(&mut w, -hik, base);
            }
            let hk1 = norm2(&w);
            h[k + 1][k] = hk1;

            // apply accumulated Givens rotations to the new column
            for row in 0..k {
                let temp = cs[row] * h[row][k] + sn[row] * h[row + 1][k];
                h[row + 1][k] = -sn[row] * h[row][k] + cs[row] * h[row + 1][k];
                h[row][k] = temp;
            }
            let denom = (h[k][k] * h[k][k] + hk1 * hk1).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = hk1 / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];

            total_iters += 1;
            k_used = k + 1;
            residual = g[k + 1].abs() / bnorm;
            if hk1 == 0.0 || residual <= opts.tol || total_iters >= opts.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }

        if k_used == 0 {
            break 'outer; // no progress possible
        }
        // back-substitute y from the triangularized system
        let mut y = vec![0.0f64; k_used];
        for row in (0..k_used).rev() {
            let mut acc = g[row];
            for col in (row + 1)..k_used {
                acc -= h[row][col] * y[col];
            }
            y[row] = acc / h[row][row];
        }
        // x += M⁻¹ (V_k y)
        let mut update = vec![0.0; n];
        for (col, yk) in y.iter().enumerate() {
            axpy(&mut update, *yk, &basis[col]);
        }
        apply_m(&update.clone(), &mut update);
        deflate(&mut update);
        axpy(&mut x, 1.0, &update);

        if total_iters >= opts.max_iter {
            break;
        }
    }

    // true residual
    apply_a(&x, &mut work);
    let mut r = vec![0.0; n];
    for i in 0..n {
        r[i] = b[i] - work[i];
    }
    deflate(&mut r);
    residual = norm2(&r) / bnorm;
    let converged = residual <= opts.tol;
    Ok((x, SolveReport::new(total_iters, residual, converged, start)))
}

/// GMRES with the default restart depth.
pub fn gmres<A, P, D>(
    apply_a: A,
    b: &[f64],
    deflate: D,
    precond: Option<P>,
    opts: SolveOptions,
) -> Result<(Vec<f64>, SolveReport), SolverError>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
    D: Fn(&mut [f64]),
{
    gmres_restarted(apply_a, b, deflate, precond, None, 30, opts)
}

/// Weighted least squares by conjugate gradient on the normal equations:
/// minimizes `‖B u − target‖²_W` and returns `(argmin, min value, report)`.
/// The value is the plain `Σ`-weighted square (callers apply any `N^{-d}`
/// normalization). `weight` must apply a uniformly positive definite metric.
pub fn least_squares_minimize<B, Bt, W, D>(
    apply_b: B,
    apply_bt: Bt,
    weight: W,
    target: &[f64],
    udim: usize,
    deflate: D,
    opts: SolveOptions,
) -> Result<(Vec<f64>, f64, SolveReport), SolverError>
where
    B: Fn(&[f64], &mut [f64]),
    Bt: Fn(&[f64], &mut [f64]),
    W: Fn(&[f64], &mut [f64]),
    D: Fn(&mut [f64]),
{
    let vdim = target.len();
    let mut wt = vec![0.0; vdim];
    weight(target, &mut wt);
    let mut rhs = vec![0.0; udim];
    apply_bt(&wt, &mut rhs);
    deflate(&mut rhs);

    let mut bu = vec![0.0; vdim];
    let mut wbu = vec![0.0; vdim];
    let apply_normal = |u: &[f64], out: &mut [f64]| {
        // out = Bᵀ W B u — scratch through RefCell-free reborrow
        let mut bu_local = vec![0.0; vdim];
        let mut wbu_local = vec![0.0; vdim];
        apply_b(u, &mut bu_local);
        weight(&bu_local, &mut wbu_local);
        apply_bt(&wbu_local, out);
    };

    let (u, report) = cg(apply_normal, &rhs, &deflate, None::<fn(&[f64], &mut [f64])>, None, opts)?;

    // objective at the minimizer
    apply_b(&u, &mut bu);
    let mut resid = vec![0.0; vdim];
    for i in 0..vdim {
        resid[i] = bu[i] - target[i];
    }
    weight(&resid, &mut wbu);
    let value = par::det_dot(&resid, &wbu).max(0.0);
    Ok((u, value, report))
}

/// Exact inverse of the constant-coefficient operator whose Fourier
/// multiplier is `symbol`, with vanishing-multiplier modes annihilated.
/// Instantiated with the lattice Laplacian symbol `Σ_j |g_j(k)|²` this is the
/// discrete Poisson preconditioner.
pub struct SpectralPreconditioner {
    fft: TorusFft,
    inv_symbol: Vec<f64>,
}

impl SpectralPreconditioner {
    pub fn from_symbol(grid: TorusGrid, symbol: &[f64]) -> Self {
        let cutoff = 1e-12 * symbol.iter().cloned().fold(0.0, f64::max);
        let inv_symbol =
            symbol.iter().map(|&s| if s > cutoff { 1.0 / s } else { 0.0 }).collect();
        SpectralPreconditioner { fft: TorusFft::new(grid), inv_symbol }
    }

    /// Poisson preconditioner: inverse of `∇*∇` with the zero mode removed.
    pub fn laplace(grid: TorusGrid) -> Self {
        let symbol = crate::fft::ModeSymbol::edge_gradient(grid).laplacian_symbol();
        Self::from_symbol(grid, &symbol)
    }

    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        let mut spec = self.fft.forward(f);
        for (z, inv) in spec.iter_mut().zip(&self.inv_symbol) {
            *z *= *inv;
        }
        out.copy_from_slice(&self.fft.inverse_real(spec));
    }

    /// Typed wrapper for torus scalars.
    pub fn apply_scalar(&self, f: &ScalarField) -> ScalarField {
        let mut out = vec![0.0; f.values().len()];
        self.apply(f.values(), &mut out);
        ScalarField::from_values(f.grid(), out).expect("finite preconditioner output")
    }
}

/// Convenience: mean removal, the deflation used by torus scalar solves.
pub fn remove_mean(x: &mut [f64]) {
    let mean = par::det_sum(x) / x.len() as f64;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

/// Reject right-hand sides with nonzero mean (relative to their norm).
pub fn check_zero_mean(b: &[f64]) -> Result<(), SolverError> {
    let mean = par::det_sum(b) / b.len() as f64;
    let scale = norm2(b) / (b.len() as f64).sqrt();
    if scale > 0.0 && mean.abs() > 1e-10 * scale.max(1.0) {
        return Err(SolverError::NonZeroMeanRhs { mean });
    }
    Ok(())
}

/// CG specialization for zero-mean torus scalars: symmetric positive definite
/// `apply_a`, zero-mean `b`, mean removal every iteration.
pub fn cg_solve_scalar<A>(
    apply_a: A,
    b: &ScalarField,
    precond: Option<&SpectralPreconditioner>,
    opts: SolveOptions,
) -> Result<(ScalarField, SolveReport), SolverError>
where
    A: Fn(&ScalarField) -> ScalarField,
{
    check_zero_mean(b.values())?;
    let grid = b.grid();
    let apply = |x: &[f64], out: &mut [f64]| {
        let xf = ScalarField::from_values(grid, x.to_vec()).expect("finite iterate");
        out.copy_from_slice(apply_a(&xf).values());
    };
    let (x, report) = cg(
        apply,
        b.values(),
        remove_mean,
        precond.map(|p| move |f: &[f64], out: &mut [f64]| p.apply(f, out)),
        None,
        opts,
    )?;
    Ok((ScalarField::from_values(grid, x).expect("finite solution"), report))
}

/// GMRES specialization for zero-mean torus scalars (non-symmetric operators
/// with positive definite symmetric part).
pub fn krylov_nonsym_solve_scalar<A>(
    apply_a: A,
    b: &ScalarField,
    precond: Option<&SpectralPreconditioner>,
    opts: SolveOptions,
) -> Result<(ScalarField, SolveReport), SolverError>
where
    A: Fn(&ScalarField) -> ScalarField,
{
    check_zero_mean(b.values())?;
    let grid = b.grid();
    let apply = |x: &[f64], out: &mut [f64]| {
        let xf = ScalarField::from_values(grid, x.to_vec()).expect("finite iterate");
        out.copy_from_slice(apply_a(&xf).values());
    };
    let (x, report) = gmres_restarted(
        apply,
        b.values(),
        remove_mean,
        precond.map(|p| move |f: &[f64], out: &mut [f64]| p.apply(f, out)),
        None,
        30,
        opts,
    )?;
    Ok((ScalarField::from_values(grid, x).expect("finite solution"), report))
}
