//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper here produces bit-identical results whether the `parallel`
//! feature is enabled or not: reductions are chunked with a fixed chunk size
//! and the per-chunk partials are combined in chunk order, so the floating
//! point summation order never depends on thread count or scheduling.

/// Fixed reduction chunk size. Part of the determinism contract: changing it
/// changes summation order and therefore the low bits of reductions.
pub const CHUNK: usize = 4096;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Deterministic sum of a slice.
pub fn det_sum(xs: &[f64]) -> f64 {
    let partials: Vec<f64> = {
        #[cfg(feature = "parallel")]
        {
            xs.par_chunks(CHUNK).map(|c| c.iter().sum()).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            xs.chunks(CHUNK).map(|c| c.iter().sum()).collect()
        }
    };
    partials.iter().sum()
}

/// Deterministic dot product of two equal-length slices.
pub fn det_dot(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let partials: Vec<f64> = {
        #[cfg(feature = "parallel")]
        {
            xs.par_chunks(CHUNK)
                .zip(ys.par_chunks(CHUNK))
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            xs.chunks(CHUNK)
                .zip(ys.chunks(CHUNK))
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
                .collect()
        }
    };
    partials.iter().sum()
}

/// Fill `out[i] = f(base + i)` for a chunk starting at global index `base`.
/// Runs chunks in parallel when the feature is on; each chunk is disjoint so
/// the result is independent of scheduling.
pub fn fill_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync,
{
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
            let base = ci * CHUNK;
            for (i, v) in chunk.iter_mut().enumerate() {
                *v = f(base + i);
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, v) in out.iter_mut().enumerate() {
            *v = f(i);
        }
    }
}

/// Map a range of indices to values, collecting in index order.
pub fn map_indices<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}
