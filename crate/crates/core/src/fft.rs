//! Multi-dimensional FFT on the torus and spectral mode utilities.
//!
//! Transforms are unnormalized forward (`Σ_x f(x) e^{-2πi k·x/N}`) and the
//! inverse divides by `N^d`. `forward`/`inverse_real` operate on one plane of
//! `N^d` values in the lattice's lexicographic layout. Real output is
//! produced by dropping the imaginary dust of the inverse transform, which
//! for Hermitian-symmetric spectra equals enforcing the symmetry explicitly.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::lattice::TorusGrid;

pub type C64 = Complex<f64>;

/// Planned FFTs for one grid, reusable across calls.
pub struct TorusFft {
    grid: TorusGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl TorusFft {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n());
        let inv = planner.plan_fft_inverse(grid.n());
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        TorusFft { grid, fwd, inv, scratch_len }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    fn transform_axes(&self, data: &mut [C64], forward: bool) {
        let n = self.grid.n();
        let d = self.grid.d();
        let plan = if forward { &self.fwd } else { &self.inv };
        let mut line = vec![C64::new(0.0, 0.0); n];
        let mut scratch = vec![C64::new(0.0, 0.0); self.scratch_len];
        for axis in 0..d {
            let stride = self.grid.stride(axis);
            // Lines along `axis`: iterate over all sites with coordinate 0 on
            // that axis, walk the line by stride.
            let sites = self.grid.sites();
            let mut start = 0usize;
            let mut visited = 0usize;
            let lines = sites / n;
            // Enumerate line starts: indices whose `axis` coordinate is 0.
            while visited < lines {
                // skip indices whose axis coordinate is nonzero
                if (start / stride) % n == 0 {
                    for (t, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + t * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (t, slot) in line.iter().enumerate() {
                        data[start + t * stride] = *slot;
                    }
                    visited += 1;
                }
                start += 1;
            }
        }
    }

    /// Forward transform of one real plane.
    pub fn forward(&self, plane: &[f64]) -> Vec<C64> {
        let mut data: Vec<C64> = plane.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.transform_axes(&mut data, true);
        data
    }

    /// Inverse transform, returning the real part scaled by `N^{-d}`.
    pub fn inverse_real(&self, mut spectrum: Vec<C64>) -> Vec<f64> {
        self.transform_axes(&mut spectrum, false);
        let scale = 1.0 / self.grid.sites() as f64;
        spectrum.into_iter().map(|z| z.re * scale).collect()
    }
}

/// Per-axis unit phases `e^{2πi k/N}` for `k = 0..N`, exact at the quarter
/// angles so that structural symbol zeros (e.g. `1 + e^{iπ}`) are exact.
pub fn unit_phases(n: usize) -> Vec<C64> {
    (0..n)
        .map(|k| {
            if 4 * k % n == 0 {
                match 4 * k / n {
                    0 => return C64::new(1.0, 0.0),
                    1 => return C64::new(0.0, 1.0),
                    2 => return C64::new(-1.0, 0.0),
                    3 => return C64::new(0.0, -1.0),
                    _ => {}
                }
            }
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            C64::new(t.cos(), t.sin())
        })
        .collect()
}

/// A per-mode complex direction `s(k) ∈ C^d` together with its squared norm.
/// Encodes the symbol of a first-order difference operator: `s_j(k)` is the
/// factor multiplying `f̂(k)` in component `j` of the transformed field.
pub struct ModeSymbol {
    grid: TorusGrid,
    /// component-major: `sym[j * sites + m]`
    sym: Vec<C64>,
    /// `Σ_j |s_j(k)|²` per mode
    norm2: Vec<f64>,
    /// modes below this are structural zeros of the symbol
    kernel_cutoff: f64,
}

impl ModeSymbol {
    /// Symbol of the edge (forward-difference) gradient:
    /// `g_j(k) = e^{2πi k_j/N} − 1`.
    pub fn edge_gradient(grid: TorusGrid) -> Self {
        let phases = unit_phases(grid.n());
        Self::from_axis_symbol(grid, |kj_phase, _| kj_phase - C64::new(1.0, 0.0), &phases)
    }

    /// Symbol of the cell (multilinear, midpoint) gradient:
    /// `G_j(k) = (e^{2πi k_j/N} − 1) · Π_{m≠j} (1 + e^{2πi k_m/N}) / 2^{d−1}`.
    pub fn cell_gradient(grid: TorusGrid) -> Self {
        let n = grid.n();
        let d = grid.d();
        let phases = unit_phases(n);
        let sites = grid.sites();
        let mut sym = vec![C64::new(0.0, 0.0); d * sites];
        let mut norm2 = vec![0.0; sites];
        let scale = 1.0 / (1u64 << (d - 1)) as f64;
        let mut coords = [0i64; 3];
        for m in 0..sites {
            grid.coords(m, &mut coords[..d]);
            for j in 0..d {
                let mut v = phases[coords[j] as usize] - C64::new(1.0, 0.0);
                for (axis, &c) in coords[..d].iter().enumerate() {
                    if axis != j {
                        v *= C64::new(1.0, 0.0) + phases[c as usize];
                    }
                }
                v *= scale;
                sym[j * sites + m] = v;
                norm2[m] += v.norm_sqr();
            }
        }
        Self::finish(grid, sym, norm2)
    }

    fn from_axis_symbol(
        grid: TorusGrid,
        f: impl Fn(C64, usize) -> C64,
        phases: &[C64],
    ) -> Self {
        let d = grid.d();
        let sites = grid.sites();
        let mut sym = vec![C64::new(0.0, 0.0); d * sites];
        let mut norm2 = vec![0.0; sites];
        let mut coords = [0i64; 3];
        for m in 0..sites {
            grid.coords(m, &mut coords[..d]);
            for j in 0..d {
                let v = f(phases[coords[j] as usize], j);
                sym[j * sites + m] = v;
                norm2[m] += v.norm_sqr();
            }
        }
        Self::finish(grid, sym, norm2)
    }

    fn finish(grid: TorusGrid, sym: Vec<C64>, norm2: Vec<f64>) -> Self {
        let max = norm2.iter().cloned().fold(0.0, f64::max);
        ModeSymbol { grid, sym, norm2, kernel_cutoff: 1e-20 * max }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn component(&self, j: usize, mode: usize) -> C64 {
        self.sym[j * self.grid.sites() + mode]
    }

    pub fn norm2(&self, mode: usize) -> f64 {
        self.norm2[mode]
    }

    /// Whether the symbol vanishes structurally at this mode.
    pub fn is_kernel(&self, mode: usize) -> bool {
        self.norm2[mode] <= self.kernel_cutoff
    }

    /// Modes (other than 0) where the symbol vanishes. Empty for the edge
    /// gradient; the cell gradient has them on even grids (checkerboards).
    pub fn kernel_modes(&self) -> Vec<usize> {
        (1..self.grid.sites()).filter(|&m| self.is_kernel(m)).collect()
    }

    /// Real nonnegative symbol of the associated Laplacian `Σ_j |s_j(k)|²`,
    /// i.e. the Fourier multiplier of (adjoint ∘ gradient).
    pub fn laplacian_symbol(&self) -> Vec<f64> {
        self.norm2.clone()
    }
}

/// Spectral splitter for `d`-component fields against a first-order symbol.
///
/// For every nonzero mode the coefficient vector is split into its projection
/// onto the complex direction `s(k)` (the "gradient-like" part) and the
/// orthogonal remainder; the zero mode is assigned to the constant part.
pub struct SpectralSplitter {
    fft: TorusFft,
    symbol: ModeSymbol,
}

/// Plane-wise spectra of a `d`-component field.
pub struct FieldSpectrum {
    pub planes: Vec<Vec<C64>>,
}

impl SpectralSplitter {
    pub fn new(fft: TorusFft, symbol: ModeSymbol) -> Self {
        assert_eq!(fft.grid(), symbol.grid());
        SpectralSplitter { fft, symbol }
    }

    pub fn grid(&self) -> TorusGrid {
        self.fft.grid()
    }

    pub fn fft(&self) -> &TorusFft {
        &self.fft
    }

    pub fn symbol(&self) -> &ModeSymbol {
        &self.symbol
    }

    pub fn analyze(&self, planes: &[&[f64]]) -> FieldSpectrum {
        FieldSpectrum { planes: planes.iter().map(|p| self.fft.forward(p)).collect() }
    }

    pub fn synthesize(&self, spectrum: FieldSpectrum) -> Vec<Vec<f64>> {
        spectrum.planes.into_iter().map(|p| self.fft.inverse_real(p)).collect()
    }

    /// Split spectra into (mean vector, gradient-direction part, remainder).
    ///
    /// Modes where the symbol vanishes (other than 0) go entirely to the
    /// remainder: they are orthogonal to every gradient.
    pub fn split(&self, spectrum: &FieldSpectrum) -> (Vec<f64>, FieldSpectrum, FieldSpectrum) {
        let grid = self.grid();
        let d = grid.d();
        let sites = grid.sites();
        let mean: Vec<f64> =
            (0..d).map(|j| spectrum.planes[j][0].re / sites as f64).collect();
        let zero = C64::new(0.0, 0.0);
        let mut grad_part = vec![vec![zero; sites]; d];
        let mut rest_part = vec![vec![zero; sites]; d];
        for m in 1..sites {
            let n2 = self.symbol.norm2(m);
            if self.symbol.is_kernel(m) {
                for j in 0..d {
                    rest_part[j][m] = spectrum.planes[j][m];
                }
                continue;
            }
            // alpha = s(k)^* · v̂(k) / |s(k)|²  (Hermitian projection onto s)
            let mut alpha = zero;
            for j in 0..d {
                alpha += self.symbol.component(j, m).conj() * spectrum.planes[j][m];
            }
            alpha /= n2;
            for j in 0..d {
                let g = alpha * self.symbol.component(j, m);
                grad_part[j][m] = g;
                rest_part[j][m] = spectrum.planes[j][m] - g;
            }
        }
        (mean, FieldSpectrum { planes: grad_part }, FieldSpectrum { planes: rest_part })
    }

    /// Scalar potential spectrum: `f̂(k) = s(k)^* · v̂(k) / |s(k)|²`, zero at
    /// the zero mode and at symbol-kernel modes.
    pub fn potential_spectrum(&self, spectrum: &FieldSpectrum) -> Vec<C64> {
        let grid = self.grid();
        let d = grid.d();
        let sites = grid.sites();
        let zero = C64::new(0.0, 0.0);
        let mut out = vec![zero; sites];
        for m in 1..sites {
            let n2 = self.symbol.norm2(m);
            if self.symbol.is_kernel(m) {
                continue;
            }
            let mut alpha = zero;
            for j in 0..d {
                alpha += self.symbol.component(j, m).conj() * spectrum.planes[j][m];
            }
            out[m] = alpha / n2;
        }
        out
    }
}
