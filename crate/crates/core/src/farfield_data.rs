//! Far-field matrices for the FF, PP, SS and limited-aperture cases, the
//! relative noise model and the text dataset format.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{CMatrix, IncidentField, ScatteringSolver};
use crate::geometry::{BoundaryCurve, NodeSet};
use crate::kernels::{Branch, ElasticMedium};

pub const DATASET_VERSION: &str = "1";
const MAGIC: &str = "# elastocavity far-field dataset";

/// Which incident and measured wave types enter the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// Both incident types, both far-field parts: `2N × 2N`.
    FF,
    /// P incidence, P part: `N × N`.
    PP,
    /// S incidence, S part: `N × N`.
    SS,
    /// FF on a limited aperture.
    LA,
}

impl Case {
    pub fn name(&self) -> &'static str {
        match self {
            Case::FF => "FF",
            Case::PP => "PP",
            Case::SS => "SS",
            Case::LA => "LA",
        }
    }

    /// Number of matrix rows (and columns) for `n` directions.
    pub fn dim(&self, n: usize) -> usize {
        match self {
            Case::FF | Case::LA => 2 * n,
            Case::PP | Case::SS => n,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FF" => Ok(Case::FF),
            "PP" => Ok(Case::PP),
            "SS" => Ok(Case::SS),
            "LA" => Ok(Case::LA),
            _ => Err(Error::Invalid(format!(
                "unknown case `{s}` (expected FF, PP, SS or LA)"
            ))),
        }
    }
}

/// `N` directions `θ_j = a + (b − a) j / N`, `j = 1..N`, with quadrature
/// weight `(b − a)/N`. The full aperture is `[0, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionSet {
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl DirectionSet {
    pub fn full(n: usize) -> Result<Self> {
        Self::aperture(n, 0.0, 2.0 * PI)
    }

    pub fn aperture(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("direction count must be positive".into()));
        }
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a && b <= 2.0 * PI + 1e-12) {
            return Err(Error::Invalid(format!(
                "aperture [{a}, {b}] must be a nonempty subinterval of [0, 2π]"
            )));
        }
        Ok(DirectionSet { n, a, b })
    }

    pub fn is_full(&self) -> bool {
        self.a == 0.0 && (self.b - 2.0 * PI).abs() < 1e-12
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn angle(&self, j: usize) -> f64 {
        self.a + (self.b - self.a) * (j + 1) as f64 / self.n as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.angle(j)).collect()
    }

    pub fn direction(&self, j: usize) -> [f64; 2] {
        let t = self.angle(j);
        [t.cos(), t.sin()]
    }

    pub fn weight(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }
}

/// Whether the prefactors `w e^{−iπ/4} √(k_m′/ω)` are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// Raw far-field patterns.
    Raw,
    /// Patterns times `w e^{−iπ/4} √(k_m′/ω)`, `w` the direction weight.
    Scaled,
}

/// Dense far-field matrix with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldMatrix {
    pub case: Case,
    pub entries: CMatrix,
    pub medium: ElasticMedium,
    pub directions: DirectionSet,
    pub scaling: Scaling,
    /// Human-readable description of the scatterers.
    pub geometry: String,
    /// Boundary nodes per curve used by the forward solver.
    pub nodes: usize,
    pub delta: f64,
    pub seed: u64,
    /// Frobenius norm of the noise actually added.
    pub noise_norm: f64,
}

/// Far-field patterns of all incidences: `patterns[branch][j]` holds the
/// pairs `(up, us)` observed at every `d_k`.
type Patterns = Vec<Vec<(Complex64, Complex64)>>;

fn incidence_patterns(solver: &ScatteringSolver, dirs: &DirectionSet, branch: Branch) -> Result<Patterns> {
    (0..dirs.n)
        .into_par_iter()
        .map(|j| {
            let trace = solver.solve(&IncidentField::plane(branch, dirs.direction(j)))?;
            let ff = solver.farfield(&trace);
            Ok((0..dirs.n)
                .map(|k| {
                    let p = ff.eval(dirs.direction(k));
                    (p.up, p.us)
                })
                .collect())
        })
        .collect()
}

/// `w e^{−iπ/4} √(k/ω)`
fn column_weight(medium: &ElasticMedium, dirs: &DirectionSet, branch: Branch) -> Complex64 {
    Complex64::from_polar(
        dirs.weight() * (medium.wavenumber(branch) / medium.omega).sqrt(),
        -PI / 4.0,
    )
}

/// Describes a list of curves, e.g. `circle(1.0;center=0.0,0.0;scale=1.0)`.
pub fn describe_geometry(curves: &[BoundaryCurve]) -> String {
    curves.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("+")
}

/// Scaled far-field matrix for one case.
pub fn synthesize(
    medium: &ElasticMedium,
    curves: &[BoundaryCurve],
    nodes: NodeSet,
    directions: &DirectionSet,
    case: Case,
) -> Result<FarFieldMatrix> {
    let solver = ScatteringSolver::new(medium, curves, nodes)?;
    synthesize_with(&solver, directions, case)
}

/// As [`synthesize`] with an already factorized solver.
pub fn synthesize_with(solver: &ScatteringSolver, directions: &DirectionSet, case: Case) -> Result<FarFieldMatrix> {
    if matches!(case, Case::FF) && !directions.is_full() {
        return Err(Error::Invalid(
            "FF case needs the full aperture; use LA for a limited one".into(),
        ));
    }
    let medium = solver.medium();
    let n = directions.n;
    let need_p = case != Case::SS;
    let need_s = case != Case::PP;
    let pp = if need_p {
        incidence_patterns(solver, directions, Branch::P)?
    } else {
        Vec::new()
    };
    let ss = if need_s {
        incidence_patterns(solver, directions, Branch::S)?
    } else {
        Vec::new()
    };
    let wp = column_weight(medium, directions, Branch::P);
    let ws = column_weight(medium, directions, Branch::S);
    let dim = case.dim(n);
    let mut entries = CMatrix::zeros(dim, dim);
    for j in 0..n {
        for k in 0..n {
            match case {
                Case::PP => entries[(k, j)] = wp * pp[j][k].0,
                Case::SS => entries[(k, j)] = ws * ss[j][k].1,
                Case::FF | Case::LA => {
                    entries[(k, j)] = wp * pp[j][k].0;
                    entries[(k + n, j)] = wp * pp[j][k].1;
                    entries[(k, j + n)] = ws * ss[j][k].0;
                    entries[(k + n, j + n)] = ws * ss[j][k].1;
                }
            }
        }
    }
    Ok(FarFieldMatrix {
        case,
        entries,
        medium: *medium,
        directions: *directions,
        scaling: Scaling::Scaled,
        geometry: describe_geometry(&solver.boundary().curves),
        nodes: solver.boundary().nodes.len(),
        delta: 0.0,
        seed: 0,
        noise_norm: 0.0,
    })
}

impl FarFieldMatrix {
    /// The same data with the prefactors divided out.
    pub fn unscaled(&self) -> FarFieldMatrix {
        if self.scaling == Scaling::Raw {
            return self.clone();
        }
        let n = self.directions.n;
        let wp = column_weight(&self.medium, &self.directions, Branch::P);
        let ws = column_weight(&self.medium, &self.directions, Branch::S);
        let mut out = self.clone();
        for j in 0..self.entries.ncols() {
            let w = match self.case {
                Case::PP => wp,
                Case::SS => ws,
                Case::FF | Case::LA => {
                    if j < n {
                        wp
                    } else {
                        ws
                    }
                }
            };
            for k in 0..self.entries.nrows() {
                out.entries[(k, j)] = self.entries[(k, j)] / w;
            }
        }
        out.scaling = Scaling::Raw;
        out
    }

    /// Block `(m, m′)` of an FF or LA matrix, `m` the measured part and
    /// `m′` the incident type.
    pub fn block(&self, measured: Branch, incident: Branch) -> Result<CMatrix> {
        if !matches!(self.case, Case::FF | Case::LA) {
            return Err(Error::Invalid(format!(
                "{} matrix has no 2×2 block structure",
                self.case
            )));
        }
        let n = self.directions.n;
        let r = if measured == Branch::P { 0 } else { n };
        let c = if incident == Branch::P { 0 } else { n };
        Ok(self.entries.view((r, c), (n, n)).into_owned())
    }
}

/// Standard normal variates from a ChaCha20 stream: `u = (x >> 11) 2^−53`
/// per 64-bit draw and `√(−2 ln(1 − u₁)) cos(2π u₂)` per pair of draws.
pub struct NormalStream {
    rng: ChaCha20Rng,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

/// `F^δ = F + δ ‖F‖_F (R₁ + i R₂)/‖R₁ + i R₂‖_F`, with `R₁` then `R₂`
/// drawn row by row from [`NormalStream`].
pub fn add_noise(matrix: &FarFieldMatrix, delta: f64, seed: u64) -> Result<FarFieldMatrix> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Invalid(format!(
            "noise level must be finite and >= 0, got {delta}"
        )));
    }
    let mut out = matrix.clone();
    out.delta = delta;
    out.seed = seed;
    if delta == 0.0 {
        out.noise_norm = 0.0;
        return Ok(out);
    }
    let (rows, cols) = matrix.entries.shape();
    let mut stream = NormalStream::new(seed);
    let mut re = vec![0.0; rows * cols];
    let mut im = vec![0.0; rows * cols];
    for v in re.iter_mut().chain(im.iter_mut()) {
        *v = stream.next_normal();
    }
    let rnorm = re.iter().chain(&im).map(|x| x * x).sum::<f64>().sqrt();
    let scale = delta * matrix.entries.norm() / rnorm;
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            out.entries[(r, c)] += Complex64::new(re[k], im[k]) * scale;
        }
    }
    out.noise_norm = (&out.entries - &matrix.entries).norm();
    Ok(out)
}

fn scaling_name(s: Scaling) -> &'static str {
    match s {
        Scaling::Raw => "raw",
        Scaling::Scaled => "scaled",
    }
}

/// Canonical text for a float: the shortest decimal that parses back exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Serializes the dataset (header, then one `re im` pair per line, row-major).
pub fn dataset_to_string(m: &FarFieldMatrix) -> String {
    let (rows, cols) = m.entries.shape();
    let mut s = String::with_capacity(48 * rows * cols + 512);
    s.push_str(MAGIC);
    s.push('\n');
    let mut kv = |k: &str, v: String| {
        s.push_str(k);
        s.push('=');
        s.push_str(&v);
        s.push('\n');
    };
    kv("version", DATASET_VERSION.into());
    kv("case", m.case.name().into());
    kv("N", m.directions.n.to_string());
    kv("aperture_a", fmt_f64(m.directions.a));
    kv("aperture_b", fmt_f64(m.directions.b));
    kv("lambda", fmt_f64(m.medium.lambda));
    kv("mu", fmt_f64(m.medium.mu));
    kv("omega", fmt_f64(m.medium.omega));
    kv("geometry", m.geometry.clone());
    kv("nodes", m.nodes.to_string());
    kv("scaling", scaling_name(m.scaling).into());
    kv("delta", fmt_f64(m.delta));
    kv("seed", m.seed.to_string());
    kv("noise_norm", fmt_f64(m.noise_norm));
    kv("norm", "frobenius".into());
    kv("rows", rows.to_string());
    kv("cols", cols.to_string());
    s.push_str("data\n");
    for r in 0..rows {
        for c in 0..cols {
            let z = m.entries[(r, c)];
            s.push_str(&format!("{:.16e} {:.16e}\n", z.re, z.im));
        }
    }
    s
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn save_dataset(path: &Path, m: &FarFieldMatrix) -> Result<()> {
    write_atomic(path, dataset_to_string(m).as_bytes())
}

pub fn load_dataset(path: &Path) -> Result<FarFieldMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_dataset(text: &str) -> Result<FarFieldMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((i, _)) => return Err(parse_err(i, "missing dataset header line")),
        None => return Err(parse_err(1, "empty file")),
    }
    let mut header = std::collections::BTreeMap::new();
    let mut data_line = None;
    for (i, l) in lines.by_ref() {
        if l == "data" {
            data_line = Some(i);
            break;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| parse_err(i, format!("expected key=value, got `{l}`")))?;
        header.insert(k.trim().to_string(), (i, v.trim().to_string()));
    }
    let data_line = data_line.ok_or_else(|| parse_err(text.lines().count(), "missing `data` section"))?;
    let get = |k: &str| -> Result<(usize, String)> {
        header
            .get(k)
            .cloned()
            .ok_or_else(|| parse_err(data_line, format!("header lacks `{k}`")))
    };
    let (_, version) = get("version")?;
    if version != DATASET_VERSION {
        return Err(Error::Version {
            found: version,
            expected: DATASET_VERSION.into(),
        });
    }
    fn num<T: FromStr>(entry: (usize, String), k: &str) -> Result<T> {
        entry
            .1
            .parse()
            .map_err(|_| parse_err(entry.0, format!("bad value `{}` for `{k}`", entry.1)))
    }
    let case: Case = {
        let e = get("case")?;
        e.1.parse().map_err(|_| parse_err(e.0, format!("bad case `{}`", e.1)))?
    };
    let n: usize = num(get("N")?, "N")?;
    let a: f64 = num(get("aperture_a")?, "aperture_a")?;
    let b: f64 = num(get("aperture_b")?, "aperture_b")?;
    let lambda: f64 = num(get("lambda")?, "lambda")?;
    let mu: f64 = num(get("mu")?, "mu")?;
    let omega: f64 = num(get("omega")?, "omega")?;
    let nodes: usize = num(get("nodes")?, "nodes")?;
    let delta: f64 = num(get("delta")?, "delta")?;
    let seed: u64 = num(get("seed")?, "seed")?;
    let noise_norm: f64 = num(get("noise_norm")?, "noise_norm")?;
    let rows: usize = num(get("rows")?, "rows")?;
    let cols: usize = num(get("cols")?, "cols")?;
    let scaling = match get("scaling")?.1.as_str() {
        "raw" => Scaling::Raw,
        "scaled" => Scaling::Scaled,
        other => return Err(parse_err(get("scaling")?.0, format!("bad scaling `{other}`"))),
    };
    let geometry = get("geometry")?.1;
    if rows != case.dim(n) || cols != rows {
        return Err(parse_err(
            data_line,
            format!("{rows}×{cols} does not match case {case} with N = {n}"),
        ));
    }
    let medium = ElasticMedium::new(lambda, mu, omega).map_err(|e| parse_err(data_line, e.to_string()))?;
    let directions = DirectionSet::aperture(n, a, b).map_err(|e| parse_err(data_line, e.to_string()))?;
    let mut entries = CMatrix::zeros(rows, cols);
    let mut count = 0;
    let mut last = data_line;
    for (i, l) in lines {
        last = i;
        if l.trim().is_empty() {
            continue;
        }
        if count == rows * cols {
            return Err(parse_err(i, "more entries than rows × cols"));
        }
        let mut it = l.split_whitespace();
        let mut part = || -> Result<f64> {
            it.next()
                .ok_or_else(|| parse_err(i, "expected `re im`"))?
                .parse()
                .map_err(|_| parse_err(i, format!("bad number in `{l}`")))
        };
        let re = part()?;
        let im = part()?;
        entries[(count / cols, count % cols)] = Complex64::new(re, im);
        count += 1;
    }
    if count != rows * cols {
        return Err(parse_err(
            last + 1,
            format!("truncated data: {count} of {} entries", rows * cols),
        ));
    }
    Ok(FarFieldMatrix {
        case,
        entries,
        medium,
        directions,
        scaling,
        geometry,
        nodes,
        delta,
        seed,
        noise_norm,
    })
}

/// `‖F F* − F* F‖_F / ‖F‖_F²`
pub fn normality_defect(f: &CMatrix) -> f64 {
    let fh = f.adjoint();
    let n = f.norm();
    (f * &fh - &fh * f).norm() / (n * n)
}

/// Diagonal similarity `D F D⁻¹` with `D = diag(√(ω/k_p) I, √(ω/k_s) I)`,
/// which turns the weighted inner product of the pattern space into the
/// Euclidean one.
pub fn weighted_form(m: &FarFieldMatrix) -> CMatrix {
    let n = m.directions.n;
    let dp = (m.medium.omega / m.medium.kp).sqrt();
    let ds = (m.medium.omega / m.medium.ks).sqrt();
    let d = |i: usize| match m.case {
        Case::PP => dp,
        Case::SS => ds,
        Case::FF | Case::LA => {
            if i < n {
                dp
            } else {
                ds
            }
        }
    };
    CMatrix::from_fn(m.entries.nrows(), m.entries.ncols(), |r, c| {
        m.entries[(r, c)] * (d(r) / d(c))
    })
}
