//! Stationary ergodic random-medium generators and periodization.
//!
//! A medium is a stationary random field on the infinite lattice `Z^d`,
//! realized through a counter-based pure pseudo-random function: the value at
//! absolute site `x` and channel `c` is `mix(seed, realization, family, c, x)`
//! — a pure function, so fields are translation-consistent (the value at `x`
//! never depends on the window size) and trivially parallel. Periodization
//! onto `T^d_N` reads the window `[0,N)^d` and wraps.
//!
//! Every generated conductance lies in `[1/c, c]` for the spec's contrast
//! bound `c ≥ 1`; symmetric matrix samples are diagonal with spectrum in the
//! same interval, skew samples have entries centered at zero and bounded by
//! `(c − 1/c)/2`.

use crate::config::{ConfigError, Section};
use crate::lattice::{grad, MatrixField, ScalarField, SkewMatrixField, TorusGrid, VectorField};
use crate::{lattice, par};

/// Master seed plus realization index; `(seed, realization, site, channel)`
/// determine every sampled value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed {
    pub master: u64,
    pub realization: u64,
}

impl Seed {
    pub fn new(master: u64) -> Self {
        Seed { master, realization: 0 }
    }

    /// Seed of realization `r` of an ensemble: pure function of `(master, r)`.
    pub fn realization(master: u64, r: u64) -> Self {
        Seed { master, realization: r }
    }

    /// The single word all site values derive from: `mix(master, realization)`.
    pub fn stream_id(&self) -> u64 {
        mix64(self.master ^ self.realization.wrapping_mul(PHI64))
    }
}

const PHI64: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Field families keep independent streams for the different sampled objects.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Family {
    Conductance = 1,
    MatrixDiag = 2,
    MatrixSkew = 3,
    PotentialScalar = 4,
    StreamMatrix = 5,
}

/// Mean of the base noise over the box `|s|_∞ ≤ r` centered at `x`.
fn box_average(seed: Seed, family: Family, channel: u64, x: &[i64], radius: usize) -> f64 {
    let r = radius as i64;
    let d = x.len();
    let mut acc = 0.0;
    let mut count = 0usize;
    let mut offs = [-r, -r, -r];
    loop {
        let mut y = [0i64; 3];
        for i in 0..d {
            y[i] = x[i] + offs[i];
        }
        acc += unif(seed, family, channel, &y[..d]);
        count += 1;
        let mut axis = 0;
        while axis < d {
            offs[axis] += 1;
            if offs[axis] <= r {
                break;
            }
            offs[axis] = -r;
            axis += 1;
        }
        if axis == d {
            break;
        }
    }
    acc / count as f64
}

/// Uniform value in `[0,1)` at absolute site `x` (any `Z^d` point).
fn unif(seed: Seed, family: Family, channel: u64, x: &[i64]) -> f64 {
    let mut h = seed.stream_id() ^ PHI64;
    h = mix64(h ^ (family as u64).wrapping_add(0x1000));
    h = mix64(h ^ channel.wrapping_mul(0xA24B_AED4_963E_E407));
    for &c in x {
        h = mix64(h ^ (c as u64).wrapping_mul(PHI64));
    }
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The supported stationary medium laws.
#[derive(Debug, Clone, PartialEq)]
pub enum MediumKind {
    /// One value per direction, constant in space.
    Constant { values: Vec<f64> },
    /// Layered along `axis`: per-layer, per-direction values, repeating.
    Laminate { axis: usize, profile: Vec<Vec<f64>> },
    /// Site/channel-independent two-point law: `t_high` with probability `p`.
    IidTwoPhase { t_low: f64, t_high: f64, p: f64 },
    /// Site/channel-independent uniform law on `[lo, hi]`.
    IidUniform { lo: f64, hi: f64 },
    /// Box average of iid noise over `|s|_∞ ≤ radius`, affinely mapped to
    /// `[1/c, c]` and clamped. Finite correlation range = `radius`.
    MovingAverage { radius: usize },
    /// Deterministic periodic table: `table[(site mod period) * channels + c]`,
    /// layers in lexicographic order over the period box.
    DeterministicPeriodic { period: Vec<usize>, table: Vec<f64> },
}

/// A medium law together with its global contrast bound `c ≥ 1`: every
/// generated conductance lies in `[1/c, c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumSpec {
    pub kind: MediumKind,
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MediaError {
    BadContrast(f64),
    ValueOutOfBounds { value: f64, lo: f64, hi: f64 },
    BadProbability(f64),
    BadAxis { axis: usize, d: usize },
    EmptyProfile,
    BadTable { expected: usize, got: usize },
    RadiusTooLarge { radius: usize, n: usize },
    KindMismatch(&'static str),
    Lattice(lattice::LatticeError),
}

impl std::fmt::Display for MediaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MediaError::BadContrast(c) => write!(f, "contrast bound {c} must be finite and ≥ 1"),
            MediaError::ValueOutOfBounds { value, lo, hi } => {
                write!(f, "medium value {value} outside [{lo}, {hi}]")
            }
            MediaError::BadProbability(p) => write!(f, "probability {p} not in [0,1]"),
            MediaError::BadAxis { axis, d } => write!(f, "laminate axis {axis} not below d={d}"),
            MediaError::EmptyProfile => write!(f, "laminate profile must have at least one layer"),
            MediaError::BadTable { expected, got } => {
                write!(f, "periodic table has {got} values, expected {expected}")
            }
            MediaError::RadiusTooLarge { radius, n } => {
                write!(f, "stencil radius {radius} must stay below N/4 = {}", n / 4)
            }
            MediaError::KindMismatch(what) => write!(f, "medium kind unsupported here: {what}"),
            MediaError::Lattice(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for MediaError {}

impl From<lattice::LatticeError> for MediaError {
    fn from(e: lattice::LatticeError) -> Self {
        MediaError::Lattice(e)
    }
}

impl MediumSpec {
    pub fn new(kind: MediumKind, contrast: f64) -> Result<Self, MediaError> {
        if !(contrast.is_finite() && contrast >= 1.0) {
            return Err(MediaError::BadContrast(contrast));
        }
        let spec = MediumSpec { kind, contrast };
        spec.validate()?;
        Ok(spec)
    }

    pub fn lo(&self) -> f64 {
        1.0 / self.contrast
    }

    pub fn hi(&self) -> f64 {
        self.contrast
    }

    fn check_value(&self, v: f64) -> Result<(), MediaError> {
        let (lo, hi) = (self.lo(), self.hi());
        // tiny headroom for decimal config values like 0.5 with c = 2
        if !v.is_finite() || v < lo - 1e-12 || v > hi + 1e-12 {
            return Err(MediaError::ValueOutOfBounds { value: v, lo, hi });
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), MediaError> {
        match &self.kind {
            MediumKind::Constant { values } => {
                for &v in values {
                    self.check_value(v)?;
                }
            }
            MediumKind::Laminate { profile, .. } => {
                if profile.is_empty() {
                    return Err(MediaError::EmptyProfile);
                }
                for layer in profile {
                    for &v in layer {
                        self.check_value(v)?;
                    }
                }
            }
            MediumKind::IidTwoPhase { t_low, t_high, p } => {
                self.check_value(*t_low)?;
                self.check_value(*t_high)?;
                if !(0.0..=1.0).contains(p) {
                    return Err(MediaError::BadProbability(*p));
                }
            }
            MediumKind::IidUniform { lo, hi } => {
                self.check_value(*lo)?;
                self.check_value(*hi)?;
                if lo > hi {
                    return Err(MediaError::ValueOutOfBounds { value: *lo, lo: *hi, hi: *hi });
                }
            }
            MediumKind::MovingAverage { .. } => {}
            MediumKind::DeterministicPeriodic { period, table } => {
                if period.is_empty() || period.iter().any(|&p| p == 0) {
                    return Err(MediaError::BadTable { expected: 1, got: 0 });
                }
                for &v in table {
                    self.check_value(v)?;
                }
            }
        }
        Ok(())
    }

    /// Stationary value at absolute site `x` (any point of `Z^d`), channel `c`.
    /// Channels index directions (conductances, diagonal matrix entries) or
    /// skew pairs; `family` separates the independent streams.
    pub(crate) fn value_at(&self, seed: Seed, family: Family, channel: u64, x: &[i64]) -> f64 {
        match &self.kind {
            MediumKind::Constant { values } => values[channel as usize % values.len()],
            MediumKind::Laminate { axis, profile } => {
                let layer = x[*axis].rem_euclid(profile.len() as i64) as usize;
                let row = &profile[layer];
                row[channel as usize % row.len()]
            }
            MediumKind::IidTwoPhase { t_low, t_high, p } => {
                if unif(seed, family, channel, x) < *p {
                    *t_high
                } else {
                    *t_low
                }
            }
            MediumKind::IidUniform { lo, hi } => lo + (hi - lo) * unif(seed, family, channel, x),
            MediumKind::MovingAverage { radius } => {
                let raw = box_average(seed, family, channel, x, *radius);
                let (lo, hi) = (self.lo(), self.hi());
                (lo + (hi - lo) * raw).clamp(lo, hi)
            }
            MediumKind::DeterministicPeriodic { period, table } => {
                let d = x.len();
                let channels = table.len() / period.iter().product::<usize>();
                let mut idx = 0usize;
                for axis in 0..d {
                    let p = period[axis.min(period.len() - 1)];
                    idx = idx * p + x[axis].rem_euclid(p as i64) as usize;
                }
                table[idx * channels + channel as usize % channels]
            }
        }
    }

    /// Unnormalized zero-mean noise used by the known-potential and
    /// known-solenoidal constructions; requires finite range.
    fn centered_noise(&self, seed: Seed, family: Family, channel: u64, x: &[i64]) -> f64 {
        match &self.kind {
            MediumKind::MovingAverage { radius } => {
                box_average(seed, family, channel, x, *radius) - 0.5
            }
            _ => unif(seed, family, channel, x) - 0.5,
        }
    }

    fn require_finite_range(&self, grid: TorusGrid) -> Result<usize, MediaError> {
        match &self.kind {
            MediumKind::MovingAverage { radius } => {
                if *radius * 4 >= grid.n() {
                    Err(MediaError::RadiusTooLarge { radius: *radius, n: grid.n() })
                } else {
                    Ok(*radius)
                }
            }
            _ => Err(MediaError::KindMismatch("known-type fields need a moving_average medium")),
        }
    }

    /// Short deterministic digest of the spec for labeling outputs.
    pub fn digest(&self) -> String {
        let text = format!("{:?}|{}", self.kind, self.contrast);
        let mut h = 0xCBF2_9CE4_8422_2325u64;
        for b in text.bytes() {
            h = mix64(h ^ b as u64);
        }
        format!("{h:016x}")
    }
}

/// Per-site, per-direction jump rates: a [`VectorField`] whose values are all
/// positive and inside the spec's `[1/c, c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeConductanceField {
    field: VectorField,
    lo: f64,
    hi: f64,
}

impl EdgeConductanceField {
    pub fn new(field: VectorField, lo: f64, hi: f64) -> Result<Self, MediaError> {
        for &v in field.values() {
            if !v.is_finite() || v < lo - 1e-12 || v > hi + 1e-12 {
                return Err(MediaError::ValueOutOfBounds { value: v, lo, hi });
            }
        }
        Ok(EdgeConductanceField { field, lo, hi })
    }

    pub fn vector(&self) -> &VectorField {
        &self.field
    }

    pub fn grid(&self) -> TorusGrid {
        self.field.grid()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Field of reciprocals `1/ξ_i(x)`.
    pub fn reciprocal(&self) -> EdgeConductanceField {
        let grid = self.field.grid();
        let values = self.field.values().iter().map(|v| 1.0 / v).collect();
        EdgeConductanceField {
            field: VectorField::from_values(grid, values).expect("finite reciprocals"),
            lo: 1.0 / self.hi,
            hi: 1.0 / self.lo,
        }
    }
}

/// Matrix-field kinds produced by [`sample_matrix_field`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Symmetric,
    Skew,
}

/// Periodized bond configuration `Π_N ξ(·,η)`: values are read from the
/// stationary field on the window `[0,N)^d` and wrapped.
pub fn sample_conductances(
    spec: &MediumSpec,
    seed: Seed,
    grid: TorusGrid,
) -> Result<EdgeConductanceField, MediaError> {
    spec.validate()?;
    let d = grid.d();
    let field = VectorField::from_fn(grid, |comp, x| {
        spec.value_at(seed, Family::Conductance, comp as u64, &x[..d])
    });
    EdgeConductanceField::new(field, spec.lo(), spec.hi())
}

/// Periodized per-cell matrix samples. Symmetric kind: diagonal matrices with
/// the per-direction channel values (spectrum inside `[1/c, c]`). Skew kind:
/// independent upper-triangle channels, each the channel value recentred at
/// the midpoint of `[1/c, c]`, so `|E_ij| ≤ (c − 1/c)/2`.
pub fn sample_matrix_field(
    spec: &MediumSpec,
    seed: Seed,
    grid: TorusGrid,
    kind: MatrixKind,
) -> Result<MatrixField, MediaError> {
    spec.validate()?;
    let d = grid.d();
    let mid = 0.5 * (spec.lo() + spec.hi());
    let field = match kind {
        MatrixKind::Symmetric => MatrixField::from_fn(grid, |i, j, x| {
            if i == j {
                spec.value_at(seed, Family::MatrixDiag, i as u64, &x[..d])
            } else {
                0.0
            }
        }),
        MatrixKind::Skew => MatrixField::from_fn(grid, |i, j, x| {
            if i == j {
                return 0.0;
            }
            let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
            let channel = (a * d + b) as u64;
            sign * (spec.value_at(seed, Family::MatrixSkew, channel, &x[..d]) - mid)
        }),
    };
    Ok(field)
}

/// Windowed stationary scalar `u` used by [`sample_known_potential`]; exposed
/// so tests can compare the torus gradient of the window against the
/// periodized infinite-lattice gradient.
pub fn known_potential_primitive(
    spec: &MediumSpec,
    seed: Seed,
    grid: TorusGrid,
) -> Result<ScalarField, MediaError> {
    spec.require_finite_range(grid)?;
    let d = grid.d();
    Ok(ScalarField::from_fn(grid, |x| {
        spec.centered_noise(seed, Family::PotentialScalar, 0, &x[..d])
    }))
}

/// `Π_N(∇u)` for a stationary finite-range scalar `u`: the gradient is taken
/// on the infinite lattice, then the window is wrapped. The result is the
/// periodization of a potential stationary field — generally *not* an element
/// of the torus gradient space, which is exactly the defect being measured.
pub fn sample_known_potential(
    spec: &MediumSpec,
    seed: Seed,
    grid: TorusGrid,
) -> Result<VectorField, MediaError> {
    spec.require_finite_range(grid)?;
    let d = grid.d();
    Ok(VectorField::from_fn(grid, |comp, x| {
        let mut xp = [0i64; 3];
        xp[..d].copy_from_slice(&x[..d]);
        xp[comp] += 1; // absolute neighbor, no wrap
        spec.centered_noise(seed, Family::PotentialScalar, 0, &xp[..d])
            - spec.centered_noise(seed, Family::PotentialScalar, 0, &x[..d])
    }))
}

/// `Π_N(div H)` for a stationary finite-range skew matrix `H`, with the
/// backward-difference divergence evaluated on the infinite lattice.
pub fn sample_known_solenoidal(
    spec: &MediumSpec,
    seed: Seed,
    grid: TorusGrid,
) -> Result<VectorField, MediaError> {
    spec.require_finite_range(grid)?;
    let d = grid.d();
    if d == 1 {
        return Ok(VectorField::zeros(grid));
    }
    let h = |i: usize, j: usize, x: &[i64]| -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let channel = (a * d + b) as u64;
        sign * spec.centered_noise(seed, Family::StreamMatrix, channel, x)
    };
    Ok(VectorField::from_fn(grid, |i, x| {
        let mut acc = 0.0;
        for j in 0..d {
            if j == i {
                continue;
            }
            let mut xm = [0i64; 3];
            xm[..d].copy_from_slice(&x[..d]);
            xm[j] -= 1;
            acc += h(i, j, &x[..d]) - h(i, j, &xm[..d]);
        }
        acc
    }))
}

/// Windowed stationary skew matrix paired with [`sample_known_solenoidal`].
pub fn known_solenoidal_stream(
    spec: &MediumSpec,
    seed: Seed,
    grid: TorusGrid,
) -> Result<SkewMatrixField, MediaError> {
    spec.require_finite_range(grid)?;
    let d = grid.d();
    let mut out = SkewMatrixField::zeros(grid);
    for (p, (i, j)) in lattice::skew_pairs(d).into_iter().enumerate() {
        let channel = (i * d + j) as u64;
        let plane = out.pair_plane_mut(p);
        par::fill_indexed(plane, |site| {
            let mut x = [0i64; 3];
            grid.coords(site, &mut x[..d]);
            spec.centered_noise(seed, Family::StreamMatrix, channel, &x[..d])
        });
    }
    Ok(out)
}

/// Partition exponents of the Birkhoff quality diagnostic. The mean condition
/// runs over boundary subcubes of the `M^mean_exponent`-partition, the second
/// moment over the `M^second_moment_exponent`-partition.
#[derive(Debug, Clone, Copy)]
pub struct BirkhoffParams {
    pub mean_exponent: u32,
    pub second_moment_exponent: u32,
}

impl Default for BirkhoffParams {
    fn default() -> Self {
        BirkhoffParams { mean_exponent: 2, second_moment_exponent: 1 }
    }
}

/// Largest admissible `M ≤ N` such that over all boundary subcubes `B` of the
/// `M²`-partition of the window the scaled mean condition `M·|avg_B v| ≤ 1`
/// holds, and over all boundary subcubes of the `M`-partition
/// `avg_B |v|² ≤ 2·second_moment_ref`. Returns 1 if no `M ≥ 2` qualifies.
///
/// Lattice adaptation: integrals become sums over the lattice points of each
/// subcube, volumes become point counts, and only resolvable partitions are
/// admissible — `M` qualifies only when every partition has cube side ≥ 1
/// lattice spacing (`M² ≤ N` for the default exponents). Beyond that
/// resolution the continuum condition degenerates to a per-site supremum
/// that no longer measures averaging.
pub fn birkhoff_quality(v: &VectorField, second_moment_ref: f64) -> usize {
    birkhoff_quality_with(v, second_moment_ref, BirkhoffParams::default())
}

pub fn birkhoff_quality_with(
    v: &VectorField,
    second_moment_ref: f64,
    params: BirkhoffParams,
) -> usize {
    assert!(second_moment_ref > 0.0, "second moment reference must be positive");
    let n = v.grid().n();
    for m in (2..=n).rev() {
        let mean_parts = (m as u64).saturating_pow(params.mean_exponent);
        let sm_parts = (m as u64).saturating_pow(params.second_moment_exponent);
        if mean_parts > n as u64 || sm_parts > n as u64 {
            continue;
        }
        if boundary_mean_ok(v, mean_parts as usize, m as f64)
            && boundary_second_moment_ok(v, sm_parts as usize, 2.0 * second_moment_ref)
        {
            return m;
        }
    }
    1
}

/// Subcube index along one axis for the `parts`-partition of `[0,N)`.
#[inline]
fn cube_of(x: i64, parts: usize, n: usize) -> usize {
    (((x as u128) * parts as u128) / n as u128) as usize
}

/// Boundary cube family, intersected with the lattice: the cubes that contain
/// sites of the outermost layers. When `parts` does not divide `N` the cube
/// of index `parts−1` can be empty; the covering family then ends at the cube
/// holding coordinate `N−1`.
fn is_boundary_cube(cube: &[usize], last: usize) -> bool {
    cube.iter().any(|&c| c == 0 || c == last)
}

fn boundary_mean_ok(v: &VectorField, parts: usize, scale_m: f64) -> bool {
    let grid = v.grid();
    let d = grid.d();
    let last = cube_of(grid.n() as i64 - 1, parts, grid.n());
    let mut sums: std::collections::HashMap<[usize; 3], ([f64; 3], usize)> =
        std::collections::HashMap::new();
    let mut coords = [0i64; 3];
    for site in 0..grid.sites() {
        grid.coords(site, &mut coords[..d]);
        let mut cube = [0usize; 3];
        for axis in 0..d {
            cube[axis] = cube_of(coords[axis], parts, grid.n());
        }
        if !is_boundary_cube(&cube[..d], last) {
            continue;
        }
        let entry = sums.entry(cube).or_insert(([0.0; 3], 0));
        for i in 0..d {
            entry.0[i] += v.get(i, site);
        }
        entry.1 += 1;
    }
    for (avg, count) in sums.values() {
        let c = *count as f64;
        let norm2: f64 = avg[..d].iter().map(|s| (s / c) * (s / c)).sum();
        if scale_m * norm2.sqrt() > 1.0 {
            return false;
        }
    }
    true
}

fn boundary_second_moment_ok(v: &VectorField, parts: usize, bound: f64) -> bool {
    let grid = v.grid();
    let d = grid.d();
    let last = cube_of(grid.n() as i64 - 1, parts, grid.n());
    let mut sums: std::collections::HashMap<[usize; 3], (f64, usize)> =
        std::collections::HashMap::new();
    let mut coords = [0i64; 3];
    for site in 0..grid.sites() {
        grid.coords(site, &mut coords[..d]);
        let mut cube = [0usize; 3];
        for axis in 0..d {
            cube[axis] = cube_of(coords[axis], parts, grid.n());
        }
        if !is_boundary_cube(&cube[..d], last) {
            continue;
        }
        let entry = sums.entry(cube).or_insert((0.0, 0));
        let mut s = 0.0;
        for i in 0..d {
            let val = v.get(i, site);
            s += val * val;
        }
        entry.0 += s;
        entry.1 += 1;
    }
    sums.values().all(|(sum, count)| sum / *count as f64 <= bound)
}

/// Torus gradient of the windowed primitive — the "wrong" gradient whose
/// mismatch with [`sample_known_potential`] is confined to the boundary layer.
pub fn windowed_gradient(
    spec: &MediumSpec,
    seed: Seed,
    grid: TorusGrid,
) -> Result<VectorField, MediaError> {
    Ok(grad(&known_potential_primitive(spec, seed, grid)?))
}

impl MediumSpec {
    /// Parse a `[medium]` config section. Keys: `kind`, `contrast`, plus the
    /// kind's own keys (`values`; `axis` and `profile`; `t_low`/`t_high`/`p`;
    /// `lo`/`hi`; `radius`; `period`/`table`). The laminate profile separates
    /// layers with `;` and per-direction values with `,`.
    pub fn from_section(section: &Section) -> Result<MediumSpec, ConfigError> {
        let kind_name = section.require("kind")?;
        let contrast: f64 = section.parse_or("contrast", 1.0)?;
        let kind = match kind_name {
            "constant" => MediumKind::Constant { values: section.parse_list("values")? },
            "laminate" => {
                let axis: usize = section.parse("axis")?;
                let raw = section.require("profile")?;
                let mut profile = Vec::new();
                for layer in raw.split(';') {
                    let row: Result<Vec<f64>, _> = layer
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            s.parse::<f64>().map_err(|_| ConfigError::BadValue {
                                section: section.name.clone(),
                                key: "profile".into(),
                                value: s.into(),
                            })
                        })
                        .collect();
                    profile.push(row?);
                }
                MediumKind::Laminate { axis, profile }
            }
            "iid_two_phase" => MediumKind::IidTwoPhase {
                t_low: section.parse("t_low")?,
                t_high: section.parse("t_high")?,
                p: section.parse("p")?,
            },
            "iid_uniform" => {
                MediumKind::IidUniform { lo: section.parse("lo")?, hi: section.parse("hi")? }
            }
            "moving_average" => MediumKind::MovingAverage { radius: section.parse_or("radius", 2)? },
            "deterministic_periodic" => MediumKind::DeterministicPeriodic {
                period: section.parse_list("period")?,
                table: section.parse_list("table")?,
            },
            other => {
                return Err(ConfigError::BadValue {
                    section: section.name.clone(),
                    key: "kind".into(),
                    value: other.into(),
                })
            }
        };
        MediumSpec::new(kind, contrast)
            .map_err(|e| ConfigError::Invalid(format!("[{}]: {e}", section.name)))
    }
}
