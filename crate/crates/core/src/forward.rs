//! Exterior Neumann scattering by one or more cavities.
//!
//! The unknown is the boundary trace `u` of the total field, found from
//! `(½I − K) u = u^i` with `K` the double-layer operator. On each curve the
//! kernel is split into
//!
//! * the static Cauchy part `−A ∂_τ ln|x − y| E`, integrated by parts and
//!   evaluated with logarithmic weights on the spectral derivative of `u`,
//! * the static remainder, smooth with an explicit diagonal limit,
//! * the dynamic-minus-static difference, log-singular, with
//!   Kussmaul–Martensen weights on its `ln(4 sin²)` part.
//!
//! Kernels between different curves are smooth and use the trapezoidal rule.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Vector2, LU};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{sample, BoundaryCurve, CurveSample, NodeSet, Point};
use crate::kernels::{fundamental_gradient_with, perp, traction, vec2, Branch, CVec2, ElasticMedium, GammaTable};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
/// Relative residual above which a solve is reported as failed.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Condition estimates above this are reported as near-eigenvalue warnings.
pub const CONDITION_WARN: f64 = 1e12;

/// Incident wave.
#[derive(Debug, Clone, PartialEq)]
pub enum IncidentField {
    /// `d e^{i k_p x·d}`
    PlaneP { d: Point },
    /// `d^⊥ e^{i k_s x·d}`
    PlaneS { d: Point },
    /// The radiating field `Γ(·, z) p`. Solving with it gives the exterior
    /// Neumann solution carrying the same traction, which is `Γ(·, z) p`
    /// itself when `z` lies inside the cavity.
    PointSource { z: Point, p: Point },
    /// `e^{−iπ/4} Σ w [√(k_p/ω) d e^{i k_p x·d} g_p(d) + √(k_s/ω) d^⊥ e^{i k_s x·d} g_s(d)]`
    /// over directions `(cos θ_j, sin θ_j)` with uniform weight `w`.
    Herglotz {
        angles: Vec<f64>,
        weight: f64,
        gp: Vec<Complex64>,
        gs: Vec<Complex64>,
    },
}

impl IncidentField {
    pub fn plane(branch: Branch, d: Point) -> Self {
        match branch {
            Branch::P => IncidentField::PlaneP { d },
            Branch::S => IncidentField::PlaneS { d },
        }
    }

    /// Herglotz incidence over `n` equispaced directions `θ_j = 2πj/n`, `j = 1..n`.
    pub fn herglotz_uniform(gp: Vec<Complex64>, gs: Vec<Complex64>) -> Result<Self> {
        let n = gp.len();
        if n == 0 || gs.len() != n {
            return Err(Error::Invalid(format!(
                "Herglotz kernel needs matching nonempty parts, got {} and {}",
                n,
                gs.len()
            )));
        }
        let angles = (1..=n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        Ok(IncidentField::Herglotz {
            angles,
            weight: 2.0 * PI / n as f64,
            gp,
            gs,
        })
    }

    fn validate(&self) -> Result<()> {
        let unit = |v: Point, what: &str| {
            if ((v[0].hypot(v[1])) - 1.0).abs() > 1e-12 {
                Err(Error::Invalid(format!("{what} {v:?} is not a unit vector")))
            } else {
                Ok(())
            }
        };
        match self {
            IncidentField::PlaneP { d } | IncidentField::PlaneS { d } => unit(*d, "direction"),
            IncidentField::PointSource { z, p } => {
                if !(z[0].is_finite() && z[1].is_finite()) {
                    return Err(Error::Invalid("source point must be finite".into()));
                }
                unit(*p, "polarization")
            }
            IncidentField::Herglotz { angles, weight, gp, gs } => {
                if angles.len() != gp.len() || angles.len() != gs.len() {
                    return Err(Error::Invalid(format!(
                        "Herglotz kernel sizes differ: {} directions, {} p-values, {} s-values",
                        angles.len(),
                        gp.len(),
                        gs.len()
                    )));
                }
                let finite = gp.iter().chain(gs).all(|c| c.re.is_finite() && c.im.is_finite());
                if !finite || !weight.is_finite() {
                    return Err(Error::Invalid("Herglotz kernel must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Field value at `x`.
    pub fn value(&self, medium: &ElasticMedium, x: Point) -> CVec2 {
        let xv = vec2(x);
        match self {
            IncidentField::PlaneP { d } => {
                let d = vec2(*d);
                complex_vec(d) * Complex64::from_polar(1.0, medium.kp * xv.dot(&d))
            }
            IncidentField::PlaneS { d } => {
                let d = vec2(*d);
                complex_vec(perp(d)) * Complex64::from_polar(1.0, medium.ks * xv.dot(&d))
            }
            IncidentField::PointSource { z, p } => {
                let t = GammaTable::new(medium);
                let r = xv - vec2(*z);
                let v = r.norm();
                let g = t.values(v);
                let pv = vec2(*p);
                let proj = r.dot(&pv) / (v * v);
                complex_vec(pv) * g[0] + complex_vec(r) * (g[4] * proj)
            }
            IncidentField::Herglotz { angles, weight, gp, gs } => {
                let (wp, ws) = herglotz_weights(medium, *weight);
                let mut out = CVec2::zeros();
                for ((&th, &a), &b) in angles.iter().zip(gp).zip(gs) {
                    let d = Vector2::new(th.cos(), th.sin());
                    let ep = Complex64::from_polar(1.0, medium.kp * xv.dot(&d));
                    let es = Complex64::from_polar(1.0, medium.ks * xv.dot(&d));
                    out += complex_vec(d) * (wp * ep * a) + complex_vec(perp(d)) * (ws * es * b);
                }
                out
            }
        }
    }

    /// Traction `T_ν` of the field at `x` with unit normal `nu`.
    pub fn traction(&self, medium: &ElasticMedium, x: Point, nu: Point) -> CVec2 {
        let xv = vec2(x);
        let n = vec2(nu);
        let (l, m) = (medium.lambda, medium.mu);
        let plane = |pol: Vector2<f64>, d: Vector2<f64>, k: f64, amp: Complex64| {
            let e = Complex64::from_polar(1.0, k * xv.dot(&d)) * amp;
            let g = (pol * d.transpose()).map(|v| I * k * v * e);
            traction(l, m, &g, &n)
        };
        match self {
            IncidentField::PlaneP { d } => {
                let d = vec2(*d);
                plane(d, d, medium.kp, Complex64::new(1.0, 0.0))
            }
            IncidentField::PlaneS { d } => {
                let d = vec2(*d);
                plane(perp(d), d, medium.ks, Complex64::new(1.0, 0.0))
            }
            IncidentField::PointSource { z, p } => {
                let t = GammaTable::new(medium);
                let r = xv - vec2(*z);
                let v = r.norm();
                let g = t.values(v);
                let grad = fundamental_gradient_with(&g, &r, v, 0) * Complex64::from(p[0])
                    + fundamental_gradient_with(&g, &r, v, 1) * Complex64::from(p[1]);
                traction(l, m, &grad, &n)
            }
            IncidentField::Herglotz { angles, weight, gp, gs } => {
                let (wp, ws) = herglotz_weights(medium, *weight);
                let mut out = CVec2::zeros();
                for ((&th, &a), &b) in angles.iter().zip(gp).zip(gs) {
                    let d = Vector2::new(th.cos(), th.sin());
                    out += plane(d, d, medium.kp, wp * a) + plane(perp(d), d, medium.ks, ws * b);
                }
                out
            }
        }
    }

    fn radiating(&self) -> bool {
        matches!(self, IncidentField::PointSource { .. })
    }
}

/// `(e^{−iπ/4} √(k_p/ω) w, e^{−iπ/4} √(k_s/ω) w)`
fn herglotz_weights(medium: &ElasticMedium, weight: f64) -> (Complex64, Complex64) {
    let phase = Complex64::from_polar(weight, -PI / 4.0);
    (
        phase * (medium.kp / medium.omega).sqrt(),
        phase * (medium.ks / medium.omega).sqrt(),
    )
}

fn complex_vec(v: Vector2<f64>) -> CVec2 {
    v.map(|e| Complex64::new(e, 0.0))
}

/// Far-field pair in direction `xhat`: `u^∞ = up xhat + us xhat^⊥`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldPair {
    pub up: Complex64,
    pub us: Complex64,
    pub xhat: Point,
}

impl FarFieldPair {
    pub fn vector(&self) -> CVec2 {
        let x = vec2(self.xhat);
        complex_vec(x) * self.up + complex_vec(perp(x)) * self.us
    }
}

/// Sampled boundary of all scatterers, curve after curve.
#[derive(Debug, Clone)]
pub struct Boundary {
    pub curves: Vec<BoundaryCurve>,
    pub nodes: NodeSet,
    pub samples: Vec<CurveSample>,
}

impl Boundary {
    pub fn new(curves: &[BoundaryCurve], nodes: NodeSet) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::Invalid("at least one boundary curve is required".into()));
        }
        let mut samples = Vec::with_capacity(curves.len() * nodes.len());
        for c in curves {
            samples.extend(sample(c, &nodes)?);
        }
        Ok(Boundary {
            curves: curves.to_vec(),
            nodes,
            samples,
        })
    }

    /// Number of unknowns, two per node.
    pub fn dim(&self) -> usize {
        2 * self.samples.len()
    }

    fn curve_of(&self, p: usize) -> usize {
        p / self.nodes.len()
    }
}

/// Boundary trace of a field together with its traction. For plane-wave and
/// Herglotz incidence `values` holds the total field and `traction` is
/// `None` (the cavity is traction free). For a point source it holds the
/// radiating field and its traction.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub values: CVector,
    pub traction: Option<CVector>,
}

impl BoundaryTrace {
    pub fn node(&self, p: usize) -> CVec2 {
        CVec2::new(self.values[2 * p], self.values[2 * p + 1])
    }
}

/// `R_j(t_i)` for `j − i = d`: weights for `∫ ln(4 sin²((t−τ)/2)) f(τ) dτ`.
fn km_weights(n: usize) -> Vec<f64> {
    let h = n / 2;
    let nf = n as f64;
    (0..n)
        .map(|d| {
            let t = 2.0 * PI * d as f64 / nf;
            let mut s = 0.0;
            for m in 1..h {
                s += (m as f64 * t).cos() / m as f64;
            }
            -4.0 * PI / nf * s - 4.0 * PI / (nf * nf) * (h as f64 * t).cos()
        })
        .collect()
}

/// Spectral differentiation matrix on `n` equispaced periodic nodes.
fn diff_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let d = i as i64 - j as i64;
            let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (PI * d as f64 / nf).tan()
        }
    })
}

fn log_sin(ti: f64, tj: f64) -> f64 {
    let s = (0.5 * (ti - tj)).sin();
    (4.0 * s * s).ln()
}

/// Per-curve quadrature data shared by the self blocks.
struct SelfQuadrature {
    km: Vec<f64>,
    w: f64,
}

impl SelfQuadrature {
    fn new(n: usize) -> Self {
        SelfQuadrature {
            km: km_weights(n),
            w: 2.0 * PI / n as f64,
        }
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        let n = self.km.len();
        self.km[(j + n - i) % n]
    }
}

/// `A_c (L D)`, the Cauchy part of the static kernel on one curve, as a scalar
/// matrix to be multiplied by `E = [[0, 1], [−1, 0]]`.
fn cauchy_block(samples: &[CurveSample], q: &SelfQuadrature, a_c: f64) -> DMatrix<f64> {
    let n = samples.len();
    let l = DMatrix::from_fn(n, n, |i, j| {
        let ell = if i == j {
            samples[i].jac.ln()
        } else {
            let r = vec2(samples[j].x) - vec2(samples[i].x);
            r.norm().ln() - 0.5 * log_sin(samples[i].t, samples[j].t)
        };
        0.5 * q.r(i, j) + q.w * ell
    });
    (l * diff_matrix(n)) * a_c
}

fn to_c(m: &nalgebra::Matrix2<f64>) -> nalgebra::Matrix2<Complex64> {
    m.map(|e| Complex64::new(e, 0.0))
}

/// Discrete double-layer operator `K` on the boundary, as a `2P × 2P` matrix
/// with unknowns ordered `(u_1(x_0), u_2(x_0), u_1(x_1), …)`.
pub fn double_layer_matrix(medium: &ElasticMedium, boundary: &Boundary) -> CMatrix {
    let table = GammaTable::new(medium);
    let n = boundary.nodes.len();
    let q = SelfQuadrature::new(n);
    let (l, m) = (medium.lambda, medium.mu);
    let c = medium.static_log_coefficient();
    let s2 = medium.static_projector_coefficient();
    let a_c = m / (2.0 * PI * (l + 2.0 * m));
    let cauchy: Vec<DMatrix<f64>> = (0..boundary.curves.len())
        .map(|b| cauchy_block(&boundary.samples[b * n..(b + 1) * n], &q, a_c))
        .collect();
    let total = boundary.samples.len();
    let rows: Vec<Vec<nalgebra::Matrix2<Complex64>>> = (0..total)
        .into_par_iter()
        .map(|p| {
            let a = boundary.curve_of(p);
            let i = p % n;
            let sx = &boundary.samples[p];
            let x = vec2(sx.x);
            (0..total)
                .map(|qi| {
                    let b = boundary.curve_of(qi);
                    let j = qi % n;
                    let sy = &boundary.samples[qi];
                    let y = vec2(sy.x);
                    let ny = vec2(sy.nu);
                    let r = y - x;
                    if a != b {
                        let v = r.norm();
                        let g = table.values(v);
                        let k = crate::kernels::m20(l, m, &r, &ny).map(|e| g[5] * e)
                            + crate::kernels::m11(l, m, &r, &ny).map(|e| g[2] * e)
                            + crate::kernels::m21(l, m, &r, &ny).map(|e| g[6] * e);
                        return k.transpose() * Complex64::from(sy.jac * q.w);
                    }
                    let ce = cauchy[a][(i, j)];
                    let cauchy_part = nalgebra::Matrix2::new(0.0, ce, -ce, 0.0);
                    if i == j {
                        let curv = -vec2(sy.nu).dot(&vec2(sy.ddx)) / (2.0 * sy.jac * sy.jac);
                        let tau = vec2(sy.tau);
                        let smooth = (nalgebra::Matrix2::identity() * (s2 - c) - tau * tau.transpose() * (4.0 * s2))
                            * (m * curv * sy.jac * q.w);
                        return to_c(&(smooth + cauchy_part));
                    }
                    let v = r.norm();
                    let proj = r * r.transpose() / (v * v);
                    let smooth = (nalgebra::Matrix2::identity() * (s2 - c) - proj * (4.0 * s2))
                        * (m * ny.dot(&r) / (v * v) * sy.jac * q.w);
                    let splits = table.split_all(v);
                    let mats = [
                        (5usize, crate::kernels::m20(l, m, &r, &ny)),
                        (2, crate::kernels::m11(l, m, &r, &ny)),
                        (6, crate::kernels::m21(l, m, &r, &ny)),
                    ];
                    let ell = v.ln() - 0.5 * log_sin(sx.t, sy.t);
                    let mut xi_part = nalgebra::Matrix2::<f64>::zeros();
                    let mut rest = nalgebra::Matrix2::<Complex64>::zeros();
                    for (slot, mat) in mats {
                        let s = splits[slot];
                        xi_part += mat * s.xi;
                        rest += to_c(&mat) * (s.chi + s.xi * ell / PI);
                    }
                    let dynamic = to_c(&xi_part.transpose()) * Complex64::from(q.r(i, j) * sy.jac / (2.0 * PI))
                        + rest.transpose() * Complex64::from(q.w * sy.jac);
                    dynamic + to_c(&(smooth + cauchy_part))
                })
                .collect()
        })
        .collect();
    let dim = 2 * total;
    let mut out = CMatrix::zeros(dim, dim);
    for (p, row) in rows.iter().enumerate() {
        for (qi, blk) in row.iter().enumerate() {
            for u in 0..2 {
                for w in 0..2 {
                    out[(2 * p + u, 2 * qi + w)] = blk[(u, w)];
                }
            }
        }
    }
    out
}

/// Discrete single-layer operator `S` with kernel `Γ(x, y)`.
pub fn single_layer_matrix(medium: &ElasticMedium, boundary: &Boundary) -> CMatrix {
    let table = GammaTable::new(medium);
    let n = boundary.nodes.len();
    let q = SelfQuadrature::new(n);
    let total = boundary.samples.len();
    let limit = table.split_all(0.0);
    let rows: Vec<Vec<nalgebra::Matrix2<Complex64>>> = (0..total)
        .into_par_iter()
        .map(|p| {
            let a = boundary.curve_of(p);
            let i = p % n;
            let sx = &boundary.samples[p];
            let x = vec2(sx.x);
            (0..total)
                .map(|qi| {
                    let b = boundary.curve_of(qi);
                    let j = qi % n;
                    let sy = &boundary.samples[qi];
                    let r = vec2(sy.x) - x;
                    let id = nalgebra::Matrix2::<f64>::identity();
                    if a != b {
                        let v = r.norm();
                        let g = table.values(v);
                        let proj = r * r.transpose() / (v * v);
                        return (to_c(&id) * g[0] + to_c(&proj) * g[4]) * Complex64::from(sy.jac * q.w);
                    }
                    if i == j {
                        let tau = vec2(sy.tau);
                        let (s1, s2) = (limit[0], limit[4]);
                        let log_part = id * (s1.xi * (q.r(i, i) / (2.0 * PI) + q.w * sy.jac.ln() / PI));
                        let smooth = to_c(&id) * s1.chi + to_c(&(tau * tau.transpose())) * s2.chi;
                        return (to_c(&log_part) + smooth * Complex64::from(q.w)) * Complex64::from(sy.jac);
                    }
                    let v = r.norm();
                    let proj = r * r.transpose() / (v * v);
                    let sp = table.split_all(v);
                    let (s1, s2) = (sp[0], sp[4]);
                    let xi = id * s1.xi + proj * s2.xi;
                    let ell = v.ln() - 0.5 * log_sin(sx.t, sy.t);
                    let smooth = to_c(&id) * s1.chi + to_c(&proj) * s2.chi;
                    (to_c(&xi) * Complex64::from(q.r(i, j) / (2.0 * PI) + q.w * ell / PI)
                        + smooth * Complex64::from(q.w))
                        * Complex64::from(sy.jac)
                })
                .collect()
        })
        .collect();
    let dim = 2 * total;
    let mut out = CMatrix::zeros(dim, dim);
    for (p, row) in rows.iter().enumerate() {
        for (qi, blk) in row.iter().enumerate() {
            for u in 0..2 {
                for w in 0..2 {
                    out[(2 * p + u, 2 * qi + w)] = blk[(u, w)];
                }
            }
        }
    }
    out
}

/// System matrix `½I − K` of the direct boundary integral equation.
pub fn assemble_system(medium: &ElasticMedium, curves: &[BoundaryCurve], nodes: NodeSet) -> Result<CMatrix> {
    let boundary = Boundary::new(curves, nodes)?;
    Ok(system_matrix(medium, &boundary))
}

fn system_matrix(medium: &ElasticMedium, boundary: &Boundary) -> CMatrix {
    let mut a = -double_layer_matrix(medium, boundary);
    for d in 0..a.nrows() {
        a[(d, d)] += Complex64::new(0.5, 0.0);
    }
    a
}

fn norm1(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Factorized system for repeated solves with one geometry and medium.
pub struct ScatteringSolver {
    medium: ElasticMedium,
    boundary: Boundary,
    matrix: CMatrix,
    lu: LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    l_factor: CMatrix,
    u_factor: CMatrix,
    single_layer: OnceLock<CMatrix>,
    condition: f64,
}

impl std::fmt::Debug for ScatteringSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScatteringSolver")
            .field("medium", &self.medium)
            .field("curves", &self.boundary.curves)
            .field("nodes", &self.boundary.nodes.len())
            .field("condition", &self.condition)
            .finish()
    }
}

impl ScatteringSolver {
    pub fn new(medium: &ElasticMedium, curves: &[BoundaryCurve], nodes: NodeSet) -> Result<Self> {
        let boundary = Boundary::new(curves, nodes)?;
        let matrix = system_matrix(medium, &boundary);
        if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Numerical("system matrix has non-finite entries".into()));
        }
        let lu = matrix.clone().lu();
        let u_factor = lu.u();
        if u_factor.diagonal().iter().any(|z| z.norm() == 0.0) {
            return Err(Error::Singular(
                "system matrix is singular (ω² may be a Neumann eigenvalue)".into(),
            ));
        }
        let l_factor = lu.l();
        let mut solver = ScatteringSolver {
            medium: *medium,
            boundary,
            matrix,
            lu,
            l_factor,
            u_factor,
            single_layer: OnceLock::new(),
            condition: f64::NAN,
        };
        solver.condition = norm1(&solver.matrix) * solver.inverse_norm1_estimate();
        Ok(solver)
    }

    pub fn medium(&self) -> &ElasticMedium {
        &self.medium
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Estimated 1-norm condition number of the system matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Warning text when the condition estimate exceeds [`CONDITION_WARN`].
    pub fn warning(&self) -> Option<String> {
        (self.condition > CONDITION_WARN).then(|| {
            format!(
                "condition estimate {:.3e} exceeds {CONDITION_WARN:e}: ω may be close to a Neumann eigenvalue",
                self.condition
            )
        })
    }

    fn solve_adjoint(&self, b: &CVector) -> CVector {
        // P A = L U, so A* x = b is U* y = b, L* w = y, x = Pᵀ w
        let y = self
            .u_factor
            .adjoint()
            .solve_lower_triangular(b)
            .expect("nonzero pivots");
        let mut w = self
            .l_factor
            .adjoint()
            .solve_upper_triangular(&y)
            .expect("unit diagonal");
        self.lu.p().inv_permute_rows(&mut w);
        w
    }

    /// Hager's estimate of `‖A⁻¹‖₁`.
    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut x = CVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        let mut last = usize::MAX;
        for _ in 0..5 {
            let y = match self.lu.solve(&x) {
                Some(y) => y,
                None => return f64::INFINITY,
            };
            est = y.iter().map(|z| z.norm()).sum::<f64>();
            let xi = y.map(|z| {
                if z.norm() > 0.0 {
                    z / z.norm()
                } else {
                    Complex64::new(1.0, 0.0)
                }
            });
            let z = self.solve_adjoint(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(k, v)| (k, v.norm()))
                .fold((0, -1.0), |acc, e| if e.1 > acc.1 { e } else { acc });
            let ztx = z.dotc(&x).re;
            if zmax <= ztx || jmax == last {
                break;
            }
            last = jmax;
            x = CVector::zeros(n);
            x[jmax] = Complex64::new(1.0, 0.0);
        }
        est
    }

    /// Solve `(½I − K) u = f` with a residual check.
    pub fn solve_rhs(&self, rhs: &CVector) -> Result<CVector> {
        if rhs.len() != self.matrix.nrows() {
            return Err(Error::Invalid(format!(
                "right-hand side has length {}, expected {}",
                rhs.len(),
                self.matrix.nrows()
            )));
        }
        let u = self
            .lu
            .solve(rhs)
            .ok_or_else(|| Error::Singular("LU solve failed".into()))?;
        let bn = rhs.norm();
        if bn > 0.0 {
            let res = (&self.matrix * &u - rhs).norm() / bn;
            if !(res <= RESIDUAL_TOL) {
                return Err(Error::Numerical(format!(
                    "relative residual {res:.3e} exceeds {RESIDUAL_TOL:e} (condition estimate {:.3e}; ω may be near a Neumann eigenvalue)",
                    self.condition
                )));
            }
        }
        Ok(u)
    }

    fn incident_trace(&self, incident: &IncidentField) -> CVector {
        let mut f = CVector::zeros(self.boundary.dim());
        for (p, s) in self.boundary.samples.iter().enumerate() {
            let v = incident.value(&self.medium, s.x);
            f[2 * p] = v[0];
            f[2 * p + 1] = v[1];
        }
        f
    }

    fn incident_traction(&self, incident: &IncidentField) -> CVector {
        let mut f = CVector::zeros(self.boundary.dim());
        for (p, s) in self.boundary.samples.iter().enumerate() {
            let v = incident.traction(&self.medium, s.x, s.nu);
            f[2 * p] = v[0];
            f[2 * p + 1] = v[1];
        }
        f
    }

    /// The discrete single-layer operator, built on first use.
    pub fn single_layer(&self) -> &CMatrix {
        self.single_layer
            .get_or_init(|| single_layer_matrix(&self.medium, &self.boundary))
    }

    /// Radiating solution with prescribed boundary traction `h`:
    /// `(½I − K) v = −S h`.
    pub fn solve_neumann(&self, h: &CVector) -> Result<BoundaryTrace> {
        let rhs = -(self.single_layer() * h);
        let values = self.solve_rhs(&rhs)?;
        Ok(BoundaryTrace {
            values,
            traction: Some(h.clone()),
        })
    }

    pub fn solve(&self, incident: &IncidentField) -> Result<BoundaryTrace> {
        incident.validate()?;
        if incident.radiating() {
            let h = self.incident_traction(incident);
            return self.solve_neumann(&h);
        }
        let values = self.solve_rhs(&self.incident_trace(incident))?;
        Ok(BoundaryTrace { values, traction: None })
    }

    pub fn farfield(&self, trace: &BoundaryTrace) -> FarFieldEvaluator {
        FarFieldEvaluator::new(&self.medium, &self.boundary, trace.clone())
    }
}

/// Far-field pattern of a boundary trace, `DL^∞[u] − SL^∞[T u]`.
#[derive(Debug, Clone)]
pub struct FarFieldEvaluator {
    medium: ElasticMedium,
    points: Vec<Vector2<f64>>,
    normals: Vec<Vector2<f64>>,
    weights: Vec<f64>,
    trace: BoundaryTrace,
}

impl FarFieldEvaluator {
    pub fn new(medium: &ElasticMedium, boundary: &Boundary, trace: BoundaryTrace) -> Self {
        let w = boundary.nodes.weight();
        FarFieldEvaluator {
            medium: *medium,
            points: boundary.samples.iter().map(|s| vec2(s.x)).collect(),
            normals: boundary.samples.iter().map(|s| vec2(s.nu)).collect(),
            weights: boundary.samples.iter().map(|s| s.jac * w).collect(),
            trace,
        }
    }

    pub fn trace(&self) -> &BoundaryTrace {
        &self.trace
    }

    /// Far-field pair at the unit direction `xhat`.
    pub fn eval(&self, xhat: Point) -> FarFieldPair {
        let m = &self.medium;
        let x = vec2(xhat);
        let xp = perp(x);
        let dl_p = Complex64::from_polar((m.kp / (8.0 * PI)).sqrt() / (m.lambda + 2.0 * m.mu), -PI / 4.0);
        let dl_s = Complex64::from_polar((m.ks / (8.0 * PI)).sqrt(), -PI / 4.0);
        let sl_p = Complex64::from_polar(1.0 / ((m.lambda + 2.0 * m.mu) * (8.0 * PI * m.kp).sqrt()), PI / 4.0);
        let sl_s = Complex64::from_polar(1.0 / (m.mu * (8.0 * PI * m.ks).sqrt()), PI / 4.0);
        let mut up = Complex64::new(0.0, 0.0);
        let mut us = Complex64::new(0.0, 0.0);
        for (k, ((y, n), &w)) in self.points.iter().zip(&self.normals).zip(&self.weights).enumerate() {
            let phi = CVec2::new(self.trace.values[2 * k], self.trace.values[2 * k + 1]);
            let ep = Complex64::from_polar(w, -m.kp * x.dot(y));
            let es = Complex64::from_polar(w, -m.ks * x.dot(y));
            let nx = n.dot(&x);
            let x_phi = phi[0] * x[0] + phi[1] * x[1];
            let xp_phi = phi[0] * xp[0] + phi[1] * xp[1];
            let n_phi = phi[0] * n[0] + phi[1] * n[1];
            up += dl_p * ep * (x_phi * (2.0 * m.mu * nx) + n_phi * m.lambda);
            us += dl_s * es * (xp_phi * nx + x_phi * n.dot(&xp));
            if let Some(h) = &self.trace.traction {
                let g = CVec2::new(h[2 * k], h[2 * k + 1]);
                up -= sl_p * ep * (g[0] * x[0] + g[1] * x[1]);
                us -= sl_s * es * (g[0] * xp[0] + g[1] * xp[1]);
            }
        }
        FarFieldPair { up, us, xhat }
    }

    pub fn eval_angle(&self, theta: f64) -> FarFieldPair {
        self.eval([theta.cos(), theta.sin()])
    }
}

/// One-shot solve: trace of the total field (or of the radiating field for a
/// point source).
pub fn solve_scattering(
    medium: &ElasticMedium,
    curves: &[BoundaryCurve],
    nodes: NodeSet,
    incident: &IncidentField,
) -> Result<BoundaryTrace> {
    ScatteringSolver::new(medium, curves, nodes)?.solve(incident)
}

/// Far-field evaluator for a trace on the given boundary.
pub fn farfield_from_trace(
    medium: &ElasticMedium,
    curves: &[BoundaryCurve],
    nodes: NodeSet,
    trace: &BoundaryTrace,
) -> Result<FarFieldEvaluator> {
    let boundary = Boundary::new(curves, nodes)?;
    if trace.values.len() != boundary.dim() {
        return Err(Error::Invalid(format!(
            "trace has length {}, boundary needs {}",
            trace.values.len(),
            boundary.dim()
        )));
    }
    Ok(FarFieldEvaluator::new(medium, &boundary, trace.clone()))
}

/// Far field of the scattered wave for plane-wave incidence in direction `d`.
pub fn scatter_plane_wave(
    medium: &ElasticMedium,
    curves: &[BoundaryCurve],
    nodes: NodeSet,
    branch: Branch,
    d: Point,
) -> Result<FarFieldEvaluator> {
    let solver = ScatteringSolver::new(medium, curves, nodes)?;
    let trace = solver.solve(&IncidentField::plane(branch, d))?;
    Ok(solver.farfield(&trace))
}

/// Far field of the scattered wave for Herglotz incidence with kernel
/// `(gp, gs)` on `θ_j = 2πj/N`, `j = 1..N`.
pub fn scatter_herglotz(
    medium: &ElasticMedium,
    curves: &[BoundaryCurve],
    nodes: NodeSet,
    gp: &[Complex64],
    gs: &[Complex64],
) -> Result<FarFieldEvaluator> {
    let incident = IncidentField::herglotz_uniform(gp.to_vec(), gs.to_vec())?;
    let solver = ScatteringSolver::new(medium, curves, nodes)?;
    let trace = solver.solve(&incident)?;
    Ok(solver.farfield(&trace))
}
