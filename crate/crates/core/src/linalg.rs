//! Small dense `d×d` helpers (`d ≤ 3`), row-major storage.

/// Matrix-vector product.
pub fn mat_vec(d: usize, m: &[f64], x: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += m[i * d + j] * x[j];
        }
        out[i] = acc;
    }
}

/// Matrix product `a·b`.
pub fn mat_mul(d: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += a[i * d + k] * b[k * d + j];
            }
            out[i * d + j] = acc;
        }
    }
    out
}

pub fn transpose(d: usize, m: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = m[i * d + j];
        }
    }
    out
}

pub fn identity(d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        out[i * d + i] = 1.0;
    }
    out
}

/// Symmetric part `(m + mᵀ)/2`.
pub fn sym_part(d: usize, m: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = 0.5 * (m[i * d + j] + m[j * d + i]);
        }
    }
    out
}

pub fn det(d: usize, m: &[f64]) -> f64 {
    match d {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => panic!("det: d must be 1..=3"),
    }
}

/// Inverse by cofactors. Returns `None` when the determinant is zero.
pub fn inverse(d: usize, m: &[f64]) -> Option<Vec<f64>> {
    let dt = det(d, m);
    if dt == 0.0 || !dt.is_finite() {
        return None;
    }
    let inv = match d {
        1 => vec![1.0 / dt],
        2 => vec![m[3] / dt, -m[1] / dt, -m[2] / dt, m[0] / dt],
        3 => {
            let c = |i: usize, j: usize| m[i * 3 + j];
            let mut out = vec![0.0; 9];
            out[0] = (c(1, 1) * c(2, 2) - c(1, 2) * c(2, 1)) / dt;
            out[1] = (c(0, 2) * c(2, 1) - c(0, 1) * c(2, 2)) / dt;
            out[2] = (c(0, 1) * c(1, 2) - c(0, 2) * c(1, 1)) / dt;
            out[3] = (c(1, 2) * c(2, 0) - c(1, 0) * c(2, 2)) / dt;
            out[4] = (c(0, 0) * c(2, 2) - c(0, 2) * c(2, 0)) / dt;
            out[5] = (c(0, 2) * c(1, 0) - c(0, 0) * c(1, 2)) / dt;
            out[6] = (c(1, 0) * c(2, 1) - c(1, 1) * c(2, 0)) / dt;
            out[7] = (c(0, 1) * c(2, 0) - c(0, 0) * c(2, 1)) / dt;
            out[8] = (c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0)) / dt;
            out
        }
        _ => panic!("inverse: d must be 1..=3"),
    };
    Some(inv)
}

/// Eigenvalues of a symmetric matrix, ascending. Closed forms for d ≤ 3
/// (trigonometric method for d = 3).
pub fn sym_eigenvalues(d: usize, m: &[f64]) -> Vec<f64> {
    match d {
        1 => vec![m[0]],
        2 => {
            let tr = m[0] + m[3];
            let diff = m[0] - m[3];
            let disc = (diff * diff / 4.0 + m[1] * m[1]).max(0.0).sqrt();
            vec![tr / 2.0 - disc, tr / 2.0 + disc]
        }
        3 => {
            let a = m;
            let p1 = a[1] * a[1] + a[2] * a[2] + a[5] * a[5];
            if p1 == 0.0 {
                let mut eigs = vec![a[0], a[4], a[8]];
                eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
                return eigs;
            }
            let q = (a[0] + a[4] + a[8]) / 3.0;
            let p2 = (a[0] - q).powi(2) + (a[4] - q).powi(2) + (a[8] - q).powi(2) + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            let mut b = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    b[i * 3 + j] = (a[i * 3 + j] - if i == j { q } else { 0.0 }) / p;
                }
            }
            let r = (det(3, &b) / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            let e1 = q + 2.0 * p * phi.cos();
            let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
            let e2 = 3.0 * q - e1 - e3;
            let mut eigs = vec![e1, e2, e3];
            eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
            eigs
        }
        _ => panic!("sym_eigenvalues: d must be 1..=3"),
    }
}

/// `max_ij |a_ij − b_ij|`.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
