//! Factorization-method indicators: spectral systems of far-field matrices,
//! test vectors `h^(z,p)` and the indicator `W(z)` on sampling grids.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::farfield_data::{fmt_f64, write_atomic, Case, DirectionSet, FarFieldMatrix, Scaling};
use crate::forward::{CMatrix, CVector};
use crate::kernels::ElasticMedium;

/// Components with `λ_j ≤ DEFAULT_FLOOR · λ_max` are dropped from the Picard sum.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// How the spectral values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMode {
    /// Singular values and right singular vectors.
    Svd,
    /// Eigensystem of `F^# = |Re F| + |Im F|`.
    FSharp,
    /// Singular values passed through `|Re η| + |Im η|`, as printed for the
    /// non-normal cases. Numerically the same as [`SpectralMode::Svd`].
    SvdReIm,
}

impl SpectralMode {
    pub fn name(&self) -> &'static str {
        match self {
            SpectralMode::Svd => "svd",
            SpectralMode::FSharp => "fsharp",
            SpectralMode::SvdReIm => "svd-reim",
        }
    }

    /// Default mode per case: `svd` for the normal FF operator, `fsharp` otherwise.
    pub fn default_for(case: Case) -> Self {
        match case {
            Case::FF => SpectralMode::Svd,
            Case::PP | Case::SS | Case::LA => SpectralMode::FSharp,
        }
    }
}

impl fmt::Display for SpectralMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpectralMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svd" => Ok(SpectralMode::Svd),
            "fsharp" | "f#" => Ok(SpectralMode::FSharp),
            "svd-reim" | "svd_reim" => Ok(SpectralMode::SvdReIm),
            _ => Err(Error::Invalid(format!(
                "unknown spectral mode `{s}` (expected svd, fsharp or svd-reim)"
            ))),
        }
    }
}

/// Inner product in which the matrix is decomposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// `(ω/k_p, ω/k_s)`-weighted inner product of the Herglotz kernel space,
    /// in which the FF operator is normal.
    Energy,
    /// Plain Euclidean inner product on the matrix as stored.
    Plain,
}

impl Weighting {
    pub fn name(&self) -> &'static str {
        match self {
            Weighting::Energy => "energy",
            Weighting::Plain => "plain",
        }
    }
}

impl FromStr for Weighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "energy" => Ok(Weighting::Energy),
            "plain" => Ok(Weighting::Plain),
            _ => Err(Error::Invalid(format!(
                "unknown weighting `{s}` (expected energy or plain)"
            ))),
        }
    }
}

/// Spectral values `λ_j ≥ 0` (descending) with the unitary basis whose adjoint
/// maps a test vector to its Picard coefficients.
#[derive(Debug, Clone)]
pub struct SpectralSystem {
    pub mode: SpectralMode,
    pub values: Vec<f64>,
    pub basis: CMatrix,
    /// Row scaling applied to test vectors before projection.
    pub row_scale: Option<DVector<f64>>,
}

/// `|A| = U |D| U*` for Hermitian `A`.
pub fn hermitian_abs(a: &CMatrix) -> CMatrix {
    let eig = a.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|v| Complex64::new(v.abs(), 0.0));
    let u = &eig.eigenvectors;
    u * CMatrix::from_diagonal(&d) * u.adjoint()
}

/// `|Re F| + |Im F|` with `Re F = (F + F*)/2`, `Im F = (F − F*)/(2i)`.
pub fn fsharp(f: &CMatrix) -> CMatrix {
    let fh = f.adjoint();
    let re = (f + &fh).unscale(2.0);
    let im = (f - &fh).map(|z| z / Complex64::new(0.0, 2.0));
    let mut out = hermitian_abs(&re) + hermitian_abs(&im);
    // symmetrize away rounding so the eigen solver sees an exactly Hermitian matrix
    let adj = out.adjoint();
    out = (&out + adj).unscale(2.0);
    out
}

/// Decomposes a bare square matrix.
pub fn decompose_matrix(f: &CMatrix, mode: SpectralMode) -> Result<SpectralSystem> {
    if !f.is_square() || f.nrows() == 0 {
        return Err(Error::Invalid(format!(
            "expected a nonempty square matrix, got {}×{}",
            f.nrows(),
            f.ncols()
        )));
    }
    if f.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let (values, basis) = match mode {
        SpectralMode::Svd | SpectralMode::SvdReIm => {
            let svd = f.clone().try_svd(false, true, f64::EPSILON, 10_000).ok_or_else(|| {
                Error::Numerical(format!("SVD did not converge ({}×{} matrix)", f.nrows(), f.ncols()))
            })?;
            let v_t = svd
                .v_t
                .ok_or_else(|| Error::Numerical("SVD returned no right singular vectors".into()))?;
            let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
            let values = if mode == SpectralMode::SvdReIm {
                sv.iter()
                    .map(|&s| Complex64::new(s, 0.0))
                    .map(|e| e.re.abs() + e.im.abs())
                    .collect()
            } else {
                sv
            };
            (values, v_t.adjoint())
        }
        SpectralMode::FSharp => {
            let eig = fsharp(f).symmetric_eigen();
            (eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect(), eig.eigenvectors)
        }
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted = order.iter().map(|&i| values[i]).collect();
    let basis = CMatrix::from_fn(basis.nrows(), basis.ncols(), |r, c| basis[(r, order[c])]);
    Ok(SpectralSystem {
        mode,
        values: sorted,
        basis,
        row_scale: None,
    })
}

/// Row scale `√(ω/k_m)` of the energy inner product for a matrix layout.
pub fn energy_scale(medium: &ElasticMedium, case: Case, n: usize) -> DVector<f64> {
    let dp = (medium.omega / medium.kp).sqrt();
    let ds = (medium.omega / medium.ks).sqrt();
    DVector::from_fn(case.dim(n), |i, _| match case {
        Case::PP => dp,
        Case::SS => ds,
        Case::FF | Case::LA => {
            if i < n {
                dp
            } else {
                ds
            }
        }
    })
}

/// Decomposes a far-field matrix carrying the quadrature and energy prefactors.
pub fn decompose(m: &FarFieldMatrix, mode: SpectralMode, weighting: Weighting) -> Result<SpectralSystem> {
    if m.scaling != Scaling::Scaled {
        return Err(Error::Invalid(
            "factorization expects the scaled far-field matrix".into(),
        ));
    }
    match weighting {
        Weighting::Plain => decompose_matrix(&m.entries, mode),
        Weighting::Energy => {
            let d = energy_scale(&m.medium, m.case, m.directions.n);
            let f = CMatrix::from_fn(m.entries.nrows(), m.entries.ncols(), |r, c| {
                m.entries[(r, c)] * (d[r] / d[c])
            });
            let mut sys = decompose_matrix(&f, mode)?;
            sys.row_scale = Some(d);
            Ok(sys)
        }
    }
}

impl SpectralSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Picard coefficients `ρ = B* (D h)`.
    pub fn coefficients(&self, h: &CVector) -> Result<CVector> {
        if h.len() != self.dim() {
            return Err(Error::Invalid(format!(
                "test vector has length {}, system has {}",
                h.len(),
                self.dim()
            )));
        }
        let scaled = match &self.row_scale {
            Some(d) => CVector::from_fn(h.len(), |i, _| h[i] * d[i]),
            None => h.clone(),
        };
        Ok(self.basis.ad_mul(&scaled))
    }

    /// Number of components above `floor · λ_max`.
    pub fn retained(&self, floor: f64) -> usize {
        let cut = floor * self.values.first().copied().unwrap_or(0.0);
        self.values.iter().take_while(|&&v| v > cut && v > 0.0).count()
    }
}

/// Sampling point, polarization and test vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TestVector {
    pub z: [f64; 2],
    pub p: [f64; 2],
    pub case: Case,
    pub entries: CVector,
}

/// P and S amplitudes of the test vector: `e^{iπ/4}/((λ+2μ)√(8πk_p))` and
/// `e^{iπ/4}/(μ√(8πk_s))`.
fn test_amplitudes(medium: &ElasticMedium) -> (Complex64, Complex64) {
    let lp = medium.lambda + 2.0 * medium.mu;
    (
        Complex64::from_polar(1.0 / (lp * (8.0 * PI * medium.kp).sqrt()), PI / 4.0),
        Complex64::from_polar(1.0 / (medium.mu * (8.0 * PI * medium.ks).sqrt()), PI / 4.0),
    )
}

/// Test vector `h^(z,p)`: the far-field pair of `Γ(·, z) p` sampled at the
/// directions of `case`.
pub fn build_test_vector(
    medium: &ElasticMedium,
    directions: &DirectionSet,
    case: Case,
    z: [f64; 2],
    p: [f64; 2],
) -> Result<TestVector> {
    if ((p[0].hypot(p[1])) - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid(format!("polarization {p:?} is not a unit vector")));
    }
    let n = directions.n;
    let (ap, as_) = test_amplitudes(medium);
    let mut h = CVector::zeros(case.dim(n));
    for k in 0..n {
        let d = directions.direction(k);
        let dz = d[0] * z[0] + d[1] * z[1];
        let hp = ap * Complex64::from_polar(1.0, -medium.kp * dz) * (d[0] * p[0] + d[1] * p[1]);
        let hs = as_ * Complex64::from_polar(1.0, -medium.ks * dz) * (-d[1] * p[0] + d[0] * p[1]);
        match case {
            Case::PP => h[k] = hp,
            Case::SS => h[k] = hs,
            Case::FF | Case::LA => {
                h[k] = hp;
                h[k + n] = hs;
            }
        }
    }
    Ok(TestVector { z, p, case, entries: h })
}

/// `W = [Σ_j |ρ_j|² / λ_j]^{-1}` over the components with `λ_j > floor · λ_max`.
pub fn indicator(sys: &SpectralSystem, h: &CVector, floor: f64) -> Result<f64> {
    let rho = sys.coefficients(h)?;
    picard_indicator(&sys.values, &rho, floor)
}

fn picard_indicator(values: &[f64], rho: &CVector, floor: f64) -> Result<f64> {
    let cut = floor * values.first().copied().unwrap_or(0.0);
    let mut sum = 0.0;
    let mut kept = 0;
    for (j, &l) in values.iter().enumerate() {
        if l > cut && l > 0.0 {
            sum += rho[j].norm_sqr() / l;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::Numerical(
            "degenerate spectrum: no component above the floor".into(),
        ));
    }
    Ok(1.0 / sum)
}

/// Rectangular sampling grid, stored row-major with `x` varying fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub nx: usize,
    pub y0: f64,
    pub y1: f64,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x: (f64, f64), nx: usize, y: (f64, f64), ny: usize) -> Result<Self> {
        let g = GridSpec {
            x0: x.0,
            x1: x.1,
            nx,
            y0: y.0,
            y1: y.1,
            ny,
        };
        g.validate()?;
        Ok(g)
    }

    /// `[−a, a]²` with `n × n` points.
    pub fn square(a: f64, n: usize) -> Result<Self> {
        Self::new((-a, a), n, (-a, a), n)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x0, self.x1, self.y0, self.y1].iter().all(|v| v.is_finite());
        if !finite || self.nx == 0 || self.ny == 0 {
            return Err(Error::Invalid("grid needs finite ranges and positive counts".into()));
        }
        if (self.nx > 1 && self.x1 <= self.x0) || (self.ny > 1 && self.y1 <= self.y0) {
            return Err(Error::Invalid("grid ranges must be increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn coord(a: f64, b: f64, n: usize, i: usize) -> f64 {
        if n == 1 {
            a
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        }
    }

    /// Point number `i` (row `i / nx`, column `i % nx`).
    pub fn point(&self, i: usize) -> [f64; 2] {
        [
            Self::coord(self.x0, self.x1, self.nx, i % self.nx),
            Self::coord(self.y0, self.y1, self.ny, i / self.nx),
        ]
    }
}

/// How the indicators of several polarizations are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    /// Exactly one polarization, reported as is.
    Single,
    /// `Σ_α W_α(z) / max_z W_α(z)`.
    SumNormalized,
}

impl Combine {
    pub fn name(&self) -> &'static str {
        match self {
            Combine::Single => "single",
            Combine::SumNormalized => "sum-normalized",
        }
    }
}

impl FromStr for Combine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(Combine::Single),
            "sum-normalized" | "sum_normalized" | "sum" => Ok(Combine::SumNormalized),
            _ => Err(Error::Invalid(format!(
                "unknown combine rule `{s}` (expected single or sum-normalized)"
            ))),
        }
    }
}

/// Indicator values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorGrid {
    pub grid: GridSpec,
    pub case: Case,
    /// Polarization angles `α`, `p = (cos α, sin α)`.
    pub polarizations: Vec<f64>,
    pub combine: Combine,
    /// `W_α` per polarization, each in grid order.
    pub per_polarization: Vec<Vec<f64>>,
    /// Combined indicator in grid order.
    pub values: Vec<f64>,
}

/// Evaluates `W_α(z)` for every grid point and polarization and combines them.
pub fn indicator_grid(
    matrix: &FarFieldMatrix,
    sys: &SpectralSystem,
    grid: &GridSpec,
    polarizations: &[f64],
    combine: Combine,
    floor: f64,
) -> Result<IndicatorGrid> {
    grid.validate()?;
    if polarizations.is_empty() {
        return Err(Error::Invalid("polarization list is empty".into()));
    }
    if combine == Combine::Single && polarizations.len() != 1 {
        return Err(Error::Invalid(format!(
            "combine rule `single` needs exactly one polarization, got {}",
            polarizations.len()
        )));
    }
    if sys.dim() != matrix.entries.nrows() {
        return Err(Error::Invalid("spectral system does not match the matrix".into()));
    }
    let medium = &matrix.medium;
    let dirs = &matrix.directions;
    // h is linear in p, so two projections per point serve every polarization.
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let z = grid.point(i);
            let r1 = sys.coefficients(&build_test_vector(medium, dirs, matrix.case, z, [1.0, 0.0])?.entries)?;
            let r2 = sys.coefficients(&build_test_vector(medium, dirs, matrix.case, z, [0.0, 1.0])?.entries)?;
            polarizations
                .iter()
                .map(|&a| picard_indicator(&sys.values, &(r1.scale(a.cos()) + r2.scale(a.sin())), floor))
                .collect()
        })
        .collect::<Result<_>>()?;
    let per: Vec<Vec<f64>> = (0..polarizations.len())
        .map(|a| rows.iter().map(|r| r[a]).collect())
        .collect();
    if per.iter().flatten().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Numerical("indicator produced non-finite values".into()));
    }
    let values = combine_indicators(&per, combine)?;
    Ok(IndicatorGrid {
        grid: *grid,
        case: matrix.case,
        polarizations: polarizations.to_vec(),
        combine,
        per_polarization: per,
        values,
    })
}

/// Applies a combine rule to per-polarization indicator fields.
pub fn combine_indicators(per: &[Vec<f64>], combine: Combine) -> Result<Vec<f64>> {
    let first = per
        .first()
        .ok_or_else(|| Error::Invalid("no indicator fields to combine".into()))?;
    match combine {
        Combine::Single => {
            if per.len() != 1 {
                return Err(Error::Invalid("combine rule `single` needs exactly one field".into()));
            }
            Ok(first.clone())
        }
        Combine::SumNormalized => {
            let mut out = vec![0.0; first.len()];
            for w in per {
                if w.len() != out.len() {
                    return Err(Error::Invalid("indicator fields differ in length".into()));
                }
                let max = w.iter().copied().fold(0.0, f64::max);
                if max > 0.0 {
                    for (o, v) in out.iter_mut().zip(w) {
                        *o += v / max;
                    }
                }
            }
            Ok(out)
        }
    }
}

/// CSV text: `# key=value` manifest lines, the grid description, then `x,y,W`.
pub fn indicator_csv(ind: &IndicatorGrid, manifest: &[(String, String)]) -> String {
    let g = &ind.grid;
    let mut s = String::new();
    for (k, v) in manifest {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s.push_str(&format!("# case={}\n", ind.case));
    s.push_str(&format!("# combine={}\n", ind.combine.name()));
    let pol: Vec<String> = ind.polarizations.iter().map(|a| fmt_f64(*a)).collect();
    s.push_str(&format!("# polarizations={}\n", pol.join(",")));
    s.push_str(&format!(
        "# grid_x={},{},{}\n# grid_y={},{},{}\n",
        fmt_f64(g.x0),
        fmt_f64(g.x1),
        g.nx,
        fmt_f64(g.y0),
        fmt_f64(g.y1),
        g.ny
    ));
    s.push_str("x,y,W\n");
    for (i, w) in ind.values.iter().enumerate() {
        let [x, y] = g.point(i);
        s.push_str(&format!("{},{},{:.16e}\n", fmt_f64(x), fmt_f64(y), w));
    }
    s
}

pub fn write_indicator_csv(path: &Path, ind: &IndicatorGrid, manifest: &[(String, String)]) -> Result<()> {
    write_atomic(path, indicator_csv(ind, manifest).as_bytes())
}

/// Indicator values read back from CSV, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorTable {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    /// `# key=value` lines in file order.
    pub manifest: Vec<(String, String)>,
}

pub fn parse_indicator_csv(text: &str) -> Result<IndicatorTable> {
    let perr = |line: usize, m: String| Error::Parse { line, message: m };
    let mut manifest = Vec::new();
    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    let mut header_seen = false;
    for (i, l) in text.lines().enumerate() {
        let ln = i + 1;
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                manifest.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if !header_seen {
            if l.replace(' ', "") != "x,y,W" {
                return Err(perr(ln, format!("expected header `x,y,W`, got `{l}`")));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 3 {
            return Err(perr(ln, format!("expected 3 fields, got {}", f.len())));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| perr(ln, format!("bad number `{s}`")))
        };
        let (x, y, w) = (num(f[0])?, num(f[1])?, num(f[2])?);
        if !w.is_finite() {
            return Err(perr(ln, "non-finite indicator value".into()));
        }
        points.push((x, y, w));
    }
    if points.is_empty() {
        return Err(perr(text.lines().count().max(1), "no data rows".into()));
    }
    let count = |key: &str| {
        manifest
            .iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.rsplit(',').next())
            .and_then(|n| n.trim().parse::<usize>().ok())
    };
    let (nx, ny) = match (count("grid_x"), count("grid_y")) {
        (Some(nx), Some(ny)) => (nx, ny),
        _ => {
            // rows share y; the first row ends where y first changes
            let y0 = points[0].1;
            let nx = points.iter().take_while(|p| p.1 == y0).count();
            (nx, points.len() / nx)
        }
    };
    if nx * ny != points.len() {
        return Err(perr(
            text.lines().count(),
            format!("{} rows do not fill a {nx}×{ny} grid", points.len()),
        ));
    }
    Ok(IndicatorTable {
        nx,
        ny,
        values: points.into_iter().map(|p| p.2).collect(),
        manifest,
    })
}
