//! Grids, field containers and discrete calculus on the torus `T^d_N`.
//!
//! Sites are the points of `{0,…,N−1}^d` with all coordinate arithmetic
//! modulo `N`, stored in lexicographic order (axis 0 slowest, axis `d−1`
//! fastest). A [`VectorField`] carries one value per directed edge: component
//! `i` at site `x` lives on the edge `x → x+e_i`. Inner products carry the
//! intensive normalization `N^{-d}`, so energies are comparable across `N`.
//!
//! Discrete operators:
//! - gradient: `(∇f)_i(x) = f(x+e_i) − f(x)`
//! - its adjoint under the normalized inner products:
//!   `(∇*v)(x) = Σ_i (v_i(x−e_i) − v_i(x))`
//! - divergence of a skew matrix field, taken with the backward difference
//!   `(div H)_i(x) = Σ_j (H_{ij}(x) − H_{ij}(x−e_j))`, the convention adjoint
//!   to the forward gradient; it satisfies `∇* ∘ div ≡ 0` identically and so
//!   `div H` is orthogonal to every gradient field.

mod io;

pub use io::{read_field, write_csv_dump, write_field, FieldPayload, IoError};

use crate::par;

/// Errors raised by grid and field constructors and by binary operations.
#[derive(Debug, Clone, PartialEq)]
pub enum LatticeError {
    /// Dimension outside the supported range 1..=3.
    BadDimension(usize),
    /// Side length below 2.
    BadSide(usize),
    /// Value buffer length does not match the grid.
    BadLength { expected: usize, got: usize },
    /// A non-finite value was supplied.
    NonFinite,
    /// Two operands live on different grids.
    GridMismatch,
    /// A matrix field violates the skew-symmetry requirement.
    NotSkew { max_violation: f64 },
}

impl std::fmt::Display for LatticeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LatticeError::BadDimension(d) => write!(f, "dimension {d} not in 1..=3"),
            LatticeError::BadSide(n) => write!(f, "side length {n} below 2"),
            LatticeError::BadLength { expected, got } => {
                write!(f, "value buffer length {got}, expected {expected}")
            }
            LatticeError::NonFinite => write!(f, "non-finite value in field"),
            LatticeError::GridMismatch => write!(f, "operands live on different grids"),
            LatticeError::NotSkew { max_violation } => {
                write!(f, "matrix field is not skew (max |H_ij + H_ji| = {max_violation:e})")
            }
        }
    }
}

impl std::error::Error for LatticeError {}

/// The torus `T^d_N`: dimension `d` (1..=3) and side `N` (≥ 2).
///
/// Site index of `(x_1,…,x_d)` is `x_1·N^{d−1} + … + x_d` (lexicographic).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    d: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(d: usize, n: usize) -> Result<Self, LatticeError> {
        if !(1..=3).contains(&d) {
            return Err(LatticeError::BadDimension(d));
        }
        if n < 2 {
            return Err(LatticeError::BadSide(n));
        }
        Ok(TorusGrid { d, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total site count `N^d`.
    pub fn sites(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Stride of `axis` in the flat index.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    /// Flat index of a coordinate tuple; coordinates wrap modulo `N`.
    pub fn site_index(&self, coords: &[i64]) -> usize {
        debug_assert_eq!(coords.len(), self.d);
        let n = self.n as i64;
        let mut idx = 0usize;
        for &c in coords {
            idx = idx * self.n + c.rem_euclid(n) as usize;
        }
        idx
    }

    /// Coordinates of a flat index, written into `out[..d]`.
    pub fn coords(&self, index: usize, out: &mut [i64]) {
        let mut rest = index;
        for axis in (0..self.d).rev() {
            out[axis] = (rest % self.n) as i64;
            rest /= self.n;
        }
    }

    /// Index of the site shifted by `by` steps along `axis`, wrapping.
    pub fn shifted(&self, index: usize, axis: usize, by: i64) -> usize {
        let stride = self.stride(axis);
        let n = self.n;
        let c = (index / stride) % n;
        let c2 = (c as i64 + by).rem_euclid(n as i64) as usize;
        index + c2 * stride - c * stride
    }
}

fn check_values(values: &[f64], expected: usize) -> Result<(), LatticeError> {
    if values.len() != expected {
        return Err(LatticeError::BadLength { expected, got: values.len() });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LatticeError::NonFinite);
    }
    Ok(())
}

/// One real value per site.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: TorusGrid) -> Self {
        ScalarField { grid, values: vec![0.0; grid.sites()] }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self, LatticeError> {
        check_values(&values, grid.sites())?;
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[i64]) -> f64 + Sync) -> Self {
        let d = grid.d();
        let mut values = vec![0.0; grid.sites()];
        par::fill_indexed(&mut values, |site| {
            let mut c = [0i64; 3];
            grid.coords(site, &mut c[..d]);
            f(&c[..d])
        });
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Site average.
    pub fn mean(&self) -> f64 {
        par::det_sum(&self.values) / self.grid.sites() as f64
    }

    /// Normalized inner product `N^{-d} Σ_x f(x) g(x)`.
    pub fn inner(&self, other: &ScalarField) -> Result<f64, LatticeError> {
        if self.grid != other.grid {
            return Err(LatticeError::GridMismatch);
        }
        Ok(par::det_dot(&self.values, &other.values) / self.grid.sites() as f64)
    }

    pub fn norm(&self) -> f64 {
        par::det_dot(&self.values, &self.values).max(0.0).sqrt() / (self.grid.sites() as f64).sqrt()
    }

    /// Field translated by `k`: output at `x` equals input at `x+k`.
    pub fn shift(&self, k: &[i64]) -> ScalarField {
        let grid = self.grid;
        let d = grid.d();
        let mut out = vec![0.0; grid.sites()];
        par::fill_indexed(&mut out, |site| {
            let mut c = [0i64; 3];
            grid.coords(site, &mut c[..d]);
            for (a, kk) in c[..d].iter_mut().zip(k) {
                *a += kk;
            }
            self.values[grid.site_index(&c[..d])]
        });
        ScalarField { grid, values: out }
    }
}

/// `d` real values per site; component `i` at `x` lives on the edge `x → x+e_i`.
/// Storage is component-major: plane `i` holds all sites for component `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: TorusGrid) -> Self {
        VectorField { grid, values: vec![0.0; grid.d() * grid.sites()] }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self, LatticeError> {
        check_values(&values, grid.d() * grid.sites())?;
        Ok(VectorField { grid, values })
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(usize, &[i64]) -> f64 + Sync) -> Self {
        let d = grid.d();
        let sites = grid.sites();
        let mut values = vec![0.0; d * sites];
        par::fill_indexed(&mut values, |flat| {
            let comp = flat / sites;
            let site = flat % sites;
            let mut c = [0i64; 3];
            grid.coords(site, &mut c[..d]);
            f(comp, &c[..d])
        });
        VectorField { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let sites = self.grid.sites();
        &self.values[i * sites..(i + 1) * sites]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        let sites = self.grid.sites();
        &mut self.values[i * sites..(i + 1) * sites]
    }

    pub fn get(&self, comp: usize, site: usize) -> f64 {
        self.values[comp * self.grid.sites() + site]
    }

    pub fn set(&mut self, comp: usize, site: usize, v: f64) {
        let sites = self.grid.sites();
        self.values[comp * sites + site] = v;
    }

    /// Per-component site averages.
    pub fn component_means(&self) -> Vec<f64> {
        let sites = self.grid.sites() as f64;
        (0..self.grid.d()).map(|i| par::det_sum(self.component(i)) / sites).collect()
    }

    /// `⟨u,v⟩ = Σ_i N^{-d} Σ_x u_i(x) v_i(x)`.
    pub fn inner(&self, other: &VectorField) -> Result<f64, LatticeError> {
        if self.grid != other.grid {
            return Err(LatticeError::GridMismatch);
        }
        Ok(par::det_dot(&self.values, &other.values) / self.grid.sites() as f64)
    }

    pub fn norm(&self) -> f64 {
        (par::det_dot(&self.values, &self.values) / self.grid.sites() as f64).max(0.0).sqrt()
    }

    pub fn shift(&self, k: &[i64]) -> VectorField {
        let grid = self.grid;
        let d = grid.d();
        let sites = grid.sites();
        let mut out = vec![0.0; d * sites];
        par::fill_indexed(&mut out, |flat| {
            let comp = flat / sites;
            let site = flat % sites;
            let mut c = [0i64; 3];
            grid.coords(site, &mut c[..d]);
            for (a, kk) in c[..d].iter_mut().zip(k) {
                *a += kk;
            }
            self.values[comp * sites + grid.site_index(&c[..d])]
        });
        VectorField { grid, values: out }
    }

    /// In-place `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }
}

/// Skew-symmetric `d×d` matrix per site, stored as the upper triangle
/// (pairs `(i,j)` with `i<j` in lexicographic order); `H_{ji} = −H_{ij}`
/// holds structurally and the diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrixField {
    grid: TorusGrid,
    values: Vec<f64>, // pair-major: pair plane p holds all sites
}

/// Upper-triangle pairs `(i,j)`, `i<j`, in lexicographic order.
pub fn skew_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            out.push((i, j));
        }
    }
    out
}

impl SkewMatrixField {
    pub fn zeros(grid: TorusGrid) -> Self {
        let pairs = grid.d() * (grid.d() - 1) / 2;
        SkewMatrixField { grid, values: vec![0.0; pairs * grid.sites()] }
    }

    /// Build from full per-site `d×d` entries (component-major over row-major
    /// `(i,j)`); rejects inputs that are not exactly skew.
    pub fn from_full(grid: TorusGrid, full: &[f64]) -> Result<Self, LatticeError> {
        let d = grid.d();
        let sites = grid.sites();
        check_values(full, d * d * sites)?;
        let mut max_violation = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for x in 0..sites {
                    let a = full[(i * d + j) * sites + x];
                    let b = full[(j * d + i) * sites + x];
                    max_violation = max_violation.max((a + b).abs());
                }
            }
        }
        if max_violation > 0.0 {
            return Err(LatticeError::NotSkew { max_violation });
        }
        let mut out = SkewMatrixField::zeros(grid);
        for (p, (i, j)) in skew_pairs(d).into_iter().enumerate() {
            let src = &full[(i * d + j) * sites..(i * d + j + 1) * sites];
            out.values[p * sites..(p + 1) * sites].copy_from_slice(src);
        }
        Ok(out)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn pair_count(&self) -> usize {
        self.grid.d() * (self.grid.d() - 1) / 2
    }

    pub fn pair_plane(&self, p: usize) -> &[f64] {
        let sites = self.grid.sites();
        &self.values[p * sites..(p + 1) * sites]
    }

    pub fn pair_plane_mut(&mut self, p: usize) -> &mut [f64] {
        let sites = self.grid.sites();
        &mut self.values[p * sites..(p + 1) * sites]
    }

    /// Entry `H_{ij}(site)` with the sign implied by skewness.
    pub fn get(&self, i: usize, j: usize, site: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let d = self.grid.d();
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        // pair index of (a,b), a<b, in lexicographic order
        let p = a * d - a * (a + 1) / 2 + (b - a - 1);
        sign * self.values[p * self.grid.sites() + site]
    }

    pub fn set_upper(&mut self, i: usize, j: usize, site: usize, v: f64) {
        assert!(i < j, "set_upper expects i < j");
        let d = self.grid.d();
        let p = i * d - i * (i + 1) / 2 + (j - i - 1);
        let sites = self.grid.sites();
        self.values[p * sites + site] = v;
    }

    /// Frobenius norm with the `N^{-d}` normalization, counting both
    /// triangles (`Σ_{i≠j}` as in the full-matrix norm).
    pub fn norm(&self) -> f64 {
        (2.0 * par::det_dot(&self.values, &self.values) / self.grid.sites() as f64).max(0.0).sqrt()
    }
}

/// General `d×d` matrix per site (cell): used for symmetric coefficient
/// matrices `A(x)` and skew stream matrices `E(x)` of the continuous-operator
/// discretization. Component-major over row-major `(i,j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl MatrixField {
    pub fn zeros(grid: TorusGrid) -> Self {
        MatrixField { grid, values: vec![0.0; grid.d() * grid.d() * grid.sites()] }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self, LatticeError> {
        check_values(&values, grid.d() * grid.d() * grid.sites())?;
        Ok(MatrixField { grid, values })
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(usize, usize, &[i64]) -> f64 + Sync) -> Self {
        let d = grid.d();
        let sites = grid.sites();
        let mut values = vec![0.0; d * d * sites];
        par::fill_indexed(&mut values, |flat| {
            let comp = flat / sites;
            let site = flat % sites;
            let mut c = [0i64; 3];
            grid.coords(site, &mut c[..d]);
            f(comp / d, comp % d, &c[..d])
        });
        MatrixField { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize, site: usize) -> f64 {
        let d = self.grid.d();
        self.values[(i * d + j) * self.grid.sites() + site]
    }

    pub fn set(&mut self, i: usize, j: usize, site: usize, v: f64) {
        let d = self.grid.d();
        let sites = self.grid.sites();
        self.values[(i * d + j) * sites + site] = v;
    }

    /// Matrix at one site, row-major.
    pub fn at_site(&self, site: usize, out: &mut [f64]) {
        let d = self.grid.d();
        let sites = self.grid.sites();
        for c in 0..d * d {
            out[c] = self.values[c * sites + site];
        }
    }

    /// Site average, row-major.
    pub fn mean_matrix(&self) -> Vec<f64> {
        let d = self.grid.d();
        let sites = self.grid.sites() as f64;
        (0..d * d)
            .map(|c| {
                par::det_sum(&self.values[c * self.grid.sites()..(c + 1) * self.grid.sites()])
                    / sites
            })
            .collect()
    }

    /// Maximum over sites of `|M_ij + M_ji|`; zero for exactly skew fields.
    pub fn max_skew_violation(&self) -> f64 {
        let d = self.grid.d();
        let sites = self.grid.sites();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for x in 0..sites {
                    let s = self.values[(i * d + j) * sites + x] + self.values[(j * d + i) * sites + x];
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }

    /// Maximum over sites of `|M_ij − M_ji|`; zero for exactly symmetric fields.
    pub fn max_symmetry_violation(&self) -> f64 {
        let d = self.grid.d();
        let sites = self.grid.sites();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for x in 0..sites {
                    let s = self.values[(i * d + j) * sites + x] - self.values[(j * d + i) * sites + x];
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }
}

/// Forward-difference gradient: `(∇f)_i(x) = f(x+e_i) − f(x)`.
pub fn grad(f: &ScalarField) -> VectorField {
    let grid = f.grid();
    let d = grid.d();
    let sites = grid.sites();
    let fv = f.values();
    let mut out = vec![0.0; d * sites];
    par::fill_indexed(&mut out, |flat| {
        let comp = flat / sites;
        let site = flat % sites;
        fv[grid.shifted(site, comp, 1)] - fv[site]
    });
    VectorField { grid, values: out }
}

/// Adjoint of [`grad`] under the normalized inner products:
/// `(∇*v)(x) = Σ_i (v_i(x−e_i) − v_i(x))`, so `⟨∇f, v⟩ = ⟨f, ∇*v⟩`.
pub fn grad_adjoint(v: &VectorField) -> ScalarField {
    let grid = v.grid();
    let d = grid.d();
    let sites = grid.sites();
    let mut out = vec![0.0; sites];
    par::fill_indexed(&mut out, |site| {
        let mut acc = 0.0;
        for i in 0..d {
            let plane = v.component(i);
            acc += plane[grid.shifted(site, i, -1)] - plane[site];
        }
        acc
    });
    ScalarField { grid, values: out }
}

/// Divergence of a skew matrix field, backward difference:
/// `(div H)_i(x) = Σ_j (H_{ij}(x) − H_{ij}(x−e_j))`.
///
/// This is the convention adjoint to the forward gradient: `∇*(div H) = 0`
/// identically, hence `div H ⟂ {∇f}` and `div H` has zero mean.
pub fn skew_div(h: &SkewMatrixField) -> VectorField {
    let grid = h.grid();
    let d = grid.d();
    let sites = grid.sites();
    let mut out = vec![0.0; d * sites];
    par::fill_indexed(&mut out, |flat| {
        let i = flat / sites;
        let site = flat % sites;
        let mut acc = 0.0;
        for j in 0..d {
            if j == i {
                continue;
            }
            acc += h.get(i, j, site) - h.get(i, j, grid.shifted(site, j, -1));
        }
        acc
    });
    VectorField { grid, values: out }
}

/// Pointwise product `(w ⊙ v)_i(x) = w_i(x) v_i(x)`.
pub fn hadamard(w: &VectorField, v: &VectorField) -> Result<VectorField, LatticeError> {
    if w.grid() != v.grid() {
        return Err(LatticeError::GridMismatch);
    }
    let mut out = v.clone();
    for (o, a) in out.values.iter_mut().zip(&w.values) {
        *o *= a;
    }
    Ok(out)
}
