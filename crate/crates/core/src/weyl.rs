//! Orthogonal decomposition of vector fields on the torus.
//!
//! `L²(T^d_N)` splits orthogonally into the zero-mean gradient fields, the
//! zero-mean divergences of skew matrix fields, and the constants. The split
//! is computed spectrally: for every nonzero wavevector `k` the Fourier
//! coefficient vector is projected onto the complex direction
//! `g_j(k) = e^{2πi k_j/N} − 1` (the symbol of the forward gradient); the
//! solenoidal part is the remainder and the zero mode carries the mean. Since
//! `g(k) ≠ 0` for all `k ≠ 0`, the split is defined everywhere with no
//! tie-breaking, and the projections are exact constant-coefficient
//! operations at machine precision.
//!
//! Recovery operations invert the split: `scalar_potential` divides by the
//! gradient symbol (a discrete Poisson solve), `stream_matrix` returns the
//! least-norm skew `H` with `div H = v`.

use std::io::Write;

use crate::fft::{ModeSymbol, SpectralSplitter, TorusFft, C64};
use crate::lattice::{skew_pairs, ScalarField, SkewMatrixField, TorusGrid, VectorField};
use crate::media::{self, MediaError, MediumSpec, Seed};

/// Tolerances used by the recovery operations and invariant checks.
#[derive(Debug, Clone, Copy)]
pub struct WeylOptions {
    /// Relative orthogonality tolerance for diagnostics.
    pub ortho_tol: f64,
    /// Relative residual above which recovery inputs are rejected.
    pub residual_tol: f64,
}

impl Default for WeylOptions {
    fn default() -> Self {
        WeylOptions { ortho_tol: 1e-12, residual_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeylError {
    /// Input to `scalar_potential` has a non-potential residual above tolerance.
    NotPotential { residual_rel: f64, tol: f64 },
    /// Input to `stream_matrix` has a non-solenoidal residual above tolerance.
    NotSolenoidal { residual_rel: f64, tol: f64 },
    Media(MediaError),
}

impl std::fmt::Display for WeylError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeylError::NotPotential { residual_rel, tol } => write!(
                f,
                "field is not potential: relative solenoidal+mean residual {residual_rel:e} exceeds {tol:e}"
            ),
            WeylError::NotSolenoidal { residual_rel, tol } => write!(
                f,
                "field is not solenoidal: relative potential+mean residual {residual_rel:e} exceeds {tol:e}"
            ),
            WeylError::Media(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for WeylError {}

impl From<MediaError> for WeylError {
    fn from(e: MediaError) -> Self {
        WeylError::Media(e)
    }
}

/// The orthogonal split `v = mean + potential + solenoidal`.
#[derive(Debug, Clone)]
pub struct WeylSplit {
    pub mean: Vec<f64>,
    pub potential: VectorField,
    pub solenoidal: VectorField,
}

impl WeylSplit {
    /// Reassemble `mean + potential + solenoidal`.
    pub fn reconstruct(&self) -> VectorField {
        let grid = self.potential.grid();
        let mut out = self.potential.clone();
        out.axpy(1.0, &self.solenoidal);
        for i in 0..grid.d() {
            let m = self.mean[i];
            for v in out.component_mut(i) {
                *v += m;
            }
        }
        out
    }

    /// `sqrt(|mean|² + ‖pot‖² + ‖sol‖²)` — equals `‖v‖` by Parseval.
    pub fn parseval_norm(&self) -> f64 {
        let m2: f64 = self.mean.iter().map(|m| m * m).sum();
        (m2 + self.potential.norm().powi(2) + self.solenoidal.norm().powi(2)).sqrt()
    }
}

fn edge_splitter(grid: TorusGrid) -> SpectralSplitter {
    SpectralSplitter::new(TorusFft::new(grid), ModeSymbol::edge_gradient(grid))
}

fn planes_of(v: &VectorField) -> Vec<&[f64]> {
    (0..v.grid().d()).map(|i| v.component(i)).collect()
}

fn field_from_planes(grid: TorusGrid, planes: Vec<Vec<f64>>) -> VectorField {
    let mut values = Vec::with_capacity(grid.d() * grid.sites());
    for p in planes {
        values.extend_from_slice(&p);
    }
    VectorField::from_values(grid, values).expect("spectral output is finite")
}

/// Unique orthogonal split of `v` into mean, potential and solenoidal parts.
pub fn decompose(v: &VectorField) -> WeylSplit {
    let grid = v.grid();
    let splitter = edge_splitter(grid);
    let spectrum = splitter.analyze(&planes_of(v));
    let (mean, pot_spec, sol_spec) = splitter.split(&spectrum);
    if grid.d() == 1 {
        // On a circle every zero-mean field is a gradient; make that exact.
        let mut pot = v.clone();
        for val in pot.component_mut(0) {
            *val -= mean[0];
        }
        return WeylSplit { mean, potential: pot, solenoidal: VectorField::zeros(grid) };
    }
    let potential = field_from_planes(grid, splitter.synthesize(pot_spec));
    let solenoidal = field_from_planes(grid, splitter.synthesize(sol_spec));
    WeylSplit { mean, potential, solenoidal }
}

/// Orthogonal projection onto the zero-mean gradient space.
pub fn project_potential(v: &VectorField) -> VectorField {
    decompose(v).potential
}

/// Orthogonal projection onto the zero-mean solenoidal space.
pub fn project_solenoidal(v: &VectorField) -> VectorField {
    decompose(v).solenoidal
}

/// Zero-mean scalar `f` with `∇f = v` (spectral division by the gradient
/// symbol). Rejects inputs whose non-potential residual exceeds tolerance.
pub fn scalar_potential(v: &VectorField, opts: WeylOptions) -> Result<ScalarField, WeylError> {
    let grid = v.grid();
    let splitter = edge_splitter(grid);
    let spectrum = splitter.analyze(&planes_of(v));
    let pot_spec = splitter.potential_spectrum(&spectrum);
    let f = ScalarField::from_values(grid, splitter.fft().inverse_real(pot_spec))
        .expect("spectral output is finite");
    let vnorm = v.norm();
    if vnorm > 0.0 {
        let mut diff = crate::lattice::grad(&f);
        diff.axpy(-1.0, v);
        let residual_rel = diff.norm() / vnorm;
        if residual_rel > opts.residual_tol {
            return Err(WeylError::NotPotential { residual_rel, tol: opts.residual_tol });
        }
    }
    Ok(f)
}

/// Least-norm skew `H` with `div H = v` (backward-difference divergence).
/// Per mode the minimal-Frobenius solution is
/// `Ĥ_ij = (g_i v̂_j − v̂_i g_j)/|g|²`. Rejects non-solenoidal inputs.
pub fn stream_matrix(v: &VectorField, opts: WeylOptions) -> Result<SkewMatrixField, WeylError> {
    let grid = v.grid();
    let d = grid.d();
    let sites = grid.sites();
    let vnorm = v.norm();

    let splitter = edge_splitter(grid);
    let spectrum = splitter.analyze(&planes_of(v));
    let (mean, pot_spec, _) = splitter.split(&spectrum);
    if vnorm > 0.0 {
        let pot_norm = field_from_planes(grid, splitter.synthesize(pot_spec)).norm();
        let mean2: f64 = mean.iter().map(|m| m * m).sum();
        let residual_rel = (pot_norm * pot_norm + mean2).sqrt() / vnorm;
        if residual_rel > opts.residual_tol {
            return Err(WeylError::NotSolenoidal { residual_rel, tol: opts.residual_tol });
        }
    }

    let mut h = SkewMatrixField::zeros(grid);
    if d == 1 {
        return Ok(h);
    }
    let sym = splitter.symbol();
    for (p, (i, j)) in skew_pairs(d).into_iter().enumerate() {
        let mut plane = vec![C64::new(0.0, 0.0); sites];
        for (m, slot) in plane.iter_mut().enumerate().skip(1) {
            let g2 = sym.norm2(m);
            let gi = sym.component(i, m);
            let gj = sym.component(j, m);
            *slot = (gi * spectrum.planes[j][m] - spectrum.planes[i][m] * gj) / g2;
        }
        let real = splitter.fft().inverse_real(plane);
        h.pair_plane_mut(p).copy_from_slice(&real);
    }
    Ok(h)
}

/// Which known field type a defect experiment probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectKind {
    Potential,
    Solenoidal,
}

impl DefectKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DefectKind::Potential => "pot",
            DefectKind::Solenoidal => "sol",
        }
    }
}

/// One point of a decomposition-stability curve.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DefectPoint {
    pub n: usize,
    pub defect_abs: f64,
    pub defect_rel: f64,
    pub field_norm: f64,
}

/// Projection defect of periodized known-type stationary fields.
///
/// For each `N` the sampler produces `Π_N ξ` for a stationary field that is
/// purely potential (resp. solenoidal) before periodization; the defect is
/// `‖Π_N ξ − project(Π_N ξ)‖`, the quantity that vanishes as `N → ∞`.
pub fn decomposition_defect(
    spec: &MediumSpec,
    kind: DefectKind,
    seed: Seed,
    d: usize,
    n_list: &[usize],
) -> Result<Vec<DefectPoint>, WeylError> {
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        out.push(defect_point(spec, kind, seed, d, n)?);
    }
    Ok(out)
}

/// Single-`N` defect measurement.
pub fn defect_point(
    spec: &MediumSpec,
    kind: DefectKind,
    seed: Seed,
    d: usize,
    n: usize,
) -> Result<DefectPoint, WeylError> {
    let grid = TorusGrid::new(d, n).map_err(MediaError::from)?;
    let field = match kind {
        DefectKind::Potential => media::sample_known_potential(spec, seed, grid)?,
        DefectKind::Solenoidal => media::sample_known_solenoidal(spec, seed, grid)?,
    };
    Ok(defect_of(&field, kind, n))
}

/// Defect of an already-sampled periodized field.
pub fn defect_of(field: &VectorField, kind: DefectKind, n: usize) -> DefectPoint {
    let split = decompose(field);
    let projected = match kind {
        DefectKind::Potential => &split.potential,
        DefectKind::Solenoidal => &split.solenoidal,
    };
    let mut diff = field.clone();
    diff.axpy(-1.0, projected);
    let field_norm = field.norm();
    let defect_abs = diff.norm();
    let defect_rel = if field_norm > 0.0 { defect_abs / field_norm } else { 0.0 };
    DefectPoint { n, defect_abs, defect_rel, field_norm }
}

/// CSV emission: columns `N,defect_abs,defect_rel,field_norm,seed`.
pub fn write_defect_csv<W: Write>(
    w: &mut W,
    points: &[DefectPoint],
    seed: Seed,
) -> std::io::Result<()> {
    writeln!(w, "N,defect_abs,defect_rel,field_norm,seed")?;
    for p in points {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e},{}",
            p.n, p.defect_abs, p.defect_rel, p.field_norm, seed.realization
        )?;
    }
    Ok(())
}
