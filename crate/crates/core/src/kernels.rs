//! Kupradze fundamental tensor, its static limit, far-field tensors, tractions
//! and the coefficient splits used by the singular quadratures.
//!
//! The scalar coefficients `γ_j^(k)` are sums of terms `c k^a Z_n(k v) v^{-b}`
//! with `Z_n` a Hankel function of order `n` and `k` either wavenumber. The
//! term lists are generated symbolically from `γ_1`, `γ_2` (derivative rules
//! for `Z_0`, `Z_1` and powers of `v`) so one table drives direct evaluation,
//! the logarithmic coefficient `ξ` and the smooth remainder `χ`.
//!
//! For `k_max v <= 2` the split is taken from exact Laurent series
//! (powers of `v`, poles dropped analytically); above that the direct Hankel
//! formulas are used.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::specfun::{cylinder01, EULER_GAMMA};

pub type Tensor2 = Matrix2<Complex64>;
pub type CVec2 = Vector2<Complex64>;
pub type RMat2 = Matrix2<f64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const SERIES_TERMS: usize = 24;
/// Series are used while `k_max v` stays below this.
const SERIES_LIMIT: f64 = 2.0;

/// Lamé constants, frequency and the derived wavenumbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticMedium {
    pub lambda: f64,
    pub mu: f64,
    pub omega: f64,
    pub kp: f64,
    pub ks: f64,
}

impl ElasticMedium {
    /// Requires `mu > 0`, `lambda + 2 mu > 0` and `omega > 0`. A medium with
    /// `lambda + mu <= 0` is accepted; see [`ElasticMedium::warnings`].
    pub fn new(lambda: f64, mu: f64, omega: f64) -> Result<Self> {
        let finite = lambda.is_finite() && mu.is_finite() && omega.is_finite();
        if !finite || mu <= 0.0 || lambda + 2.0 * mu <= 0.0 || omega <= 0.0 {
            return Err(Error::Invalid(format!(
                "need mu > 0, lambda + 2 mu > 0, omega > 0 (lambda={lambda}, mu={mu}, omega={omega})"
            )));
        }
        Ok(ElasticMedium {
            lambda,
            mu,
            omega,
            kp: omega / (lambda + 2.0 * mu).sqrt(),
            ks: omega / mu.sqrt(),
        })
    }

    /// Like [`ElasticMedium::new`] but also rejects `lambda + mu <= 0`.
    pub fn strict(lambda: f64, mu: f64, omega: f64) -> Result<Self> {
        let m = Self::new(lambda, mu, omega)?;
        if lambda + mu <= 0.0 {
            return Err(Error::Invalid(format!(
                "strict mode requires lambda + mu > 0 (lambda={lambda}, mu={mu})"
            )));
        }
        Ok(m)
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.lambda + self.mu <= 0.0 {
            w.push(format!(
                "lambda + mu = {} <= 0: outside the standard strong-ellipticity assumption",
                self.lambda + self.mu
            ));
        }
        w
    }

    pub fn wavenumber(&self, branch: Branch) -> f64 {
        match branch {
            Branch::P => self.kp,
            Branch::S => self.ks,
        }
    }

    /// `(λ+3μ) / (4πμ(λ+2μ))`, the coefficient of `ln(1/v) I` in the static tensor.
    pub fn static_log_coefficient(&self) -> f64 {
        (self.lambda + 3.0 * self.mu) / (4.0 * PI * self.mu * (self.lambda + 2.0 * self.mu))
    }

    /// `(λ+μ) / (4πμ(λ+2μ))`, the coefficient of `J` in the static tensor.
    pub fn static_projector_coefficient(&self) -> f64 {
        (self.lambda + self.mu) / (4.0 * PI * self.mu * (self.lambda + 2.0 * self.mu))
    }
}

/// Compressional or shear part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    P,
    S,
}

/// Which derived coefficient of `γ_j`: the function itself, `γ/v²` (k = 0),
/// `γ'/v` (k = 1) or `γ''` (k = 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coeff {
    Value,
    K0,
    K1,
    K2,
}

impl Coeff {
    pub fn from_k(k: u32) -> Result<Self> {
        match k {
            0 => Ok(Coeff::K0),
            1 => Ok(Coeff::K1),
            2 => Ok(Coeff::K2),
            _ => Err(Error::Invalid(format!("k must be 0, 1 or 2, got {k}"))),
        }
    }

    fn slot(self) -> usize {
        match self {
            Coeff::Value => 0,
            Coeff::K0 => 1,
            Coeff::K1 => 2,
            Coeff::K2 => 3,
        }
    }
}

fn check_j(j: u32) -> Result<()> {
    if j == 1 || j == 2 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("j must be 1 or 2, got {j}")))
    }
}

/// `c · k^a · Z_n(k v) · v^{-b}` with `k = k_s` when `shear`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    coef: f64,
    shear: bool,
    order: u8,
    a: i32,
    b: i32,
}

fn base_terms(j: u32) -> Vec<Term> {
    let t = |coef, shear, order, a, b| Term {
        coef,
        shear,
        order,
        a,
        b,
    };
    if j == 1 {
        vec![t(1.0, true, 0, 2, 0), t(-1.0, true, 1, 1, 1), t(1.0, false, 1, 1, 1)]
    } else {
        vec![
            t(2.0, true, 1, 1, 1),
            t(-1.0, true, 0, 2, 0),
            t(-2.0, false, 1, 1, 1),
            t(1.0, false, 0, 2, 0),
        ]
    }
}

/// d/dv of a term list: `Z_0' = -k Z_1`, `Z_1' = k Z_0 - Z_1/v`.
fn differentiate(terms: &[Term]) -> Vec<Term> {
    let mut out = Vec::new();
    for t in terms {
        if t.order == 0 {
            out.push(Term {
                coef: -t.coef,
                order: 1,
                a: t.a + 1,
                ..*t
            });
        } else {
            out.push(Term {
                coef: t.coef,
                order: 0,
                a: t.a + 1,
                ..*t
            });
            out.push(Term {
                coef: -t.coef,
                b: t.b + 1,
                ..*t
            });
        }
        if t.b != 0 {
            out.push(Term {
                coef: -(t.b as f64) * t.coef,
                b: t.b + 1,
                ..*t
            });
        }
    }
    merge(out)
}

fn merge(terms: Vec<Term>) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::new();
    for t in terms {
        if let Some(e) = out
            .iter_mut()
            .find(|e| e.shear == t.shear && e.order == t.order && e.a == t.a && e.b == t.b)
        {
            e.coef += t.coef;
        } else {
            out.push(t);
        }
    }
    out.retain(|t| t.coef != 0.0);
    out
}

fn shift(terms: &[Term], db: i32) -> Vec<Term> {
    terms.iter().map(|t| Term { b: t.b + db, ..*t }).collect()
}

fn terms_for(j: u32, kind: Coeff) -> Vec<Term> {
    let base = base_terms(j);
    match kind {
        Coeff::Value => base,
        Coeff::K0 => shift(&base, 2),
        Coeff::K1 => shift(&differentiate(&base), 1),
        Coeff::K2 => differentiate(&differentiate(&base)),
    }
}

/// Log/smooth split of one coefficient at one separation:
/// `γ(v) = (1/π) ln v · xi + chi + strong / v²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSplit {
    pub j: u32,
    pub kind: Coeff,
    pub v: f64,
    pub xi: f64,
    pub chi: Complex64,
    pub strong: f64,
}

impl KernelSplit {
    /// Reassembles `γ(v)`; only meaningful for `v > 0`.
    pub fn value(&self) -> Complex64 {
        let v = self.v;
        self.chi + (v.ln() / PI) * self.xi + self.strong / (v * v)
    }
}

#[derive(Debug, Clone)]
struct CoeffFn {
    j: u32,
    kind: Coeff,
    terms: Vec<Term>,
    /// Coefficients of `v^{2m}` in `xi`.
    xi_series: Vec<f64>,
    /// Coefficients of `v^{2m}` in the smooth part of `chi`.
    chi_series: Vec<Complex64>,
    /// Raw Laurent coefficients of `v^{-2}` from the series (checked in tests).
    xi_pole: f64,
    chi_pole: Complex64,
    chi_higher_poles: Complex64,
    strong: f64,
}

/// Precomputed coefficient functions for one medium.
#[derive(Debug, Clone)]
pub struct GammaTable {
    medium: ElasticMedium,
    funcs: Vec<CoeffFn>,
}

/// Coefficients of `v^p` for `J_n(kv)` and `Ỹ_n(kv) = Y_n(kv) - (2/π) ln v J_n(kv)`,
/// `p` from `-1` to `2 SERIES_TERMS + 1`, stored at index `p + 1`.
fn bessel_laurent(order: u8, k: f64) -> (Vec<f64>, Vec<f64>) {
    let len = 2 * SERIES_TERMS + 3;
    let mut jc = vec![0.0; len];
    let mut yc = vec![0.0; len];
    let half = 0.5 * k;
    let lk = half.ln();
    let two_pi = 2.0 / PI;
    if order == 0 {
        let mut term = 1.0; // (-1)^m (k/2)^{2m} / (m!)^2
        let mut h = 0.0;
        for m in 0..SERIES_TERMS {
            if m > 0 {
                let mf = m as f64;
                term *= -half * half / (mf * mf);
                h += 1.0 / mf;
            }
            let idx = 2 * m + 1;
            jc[idx] = term;
            yc[idx] = two_pi * (lk + EULER_GAMMA) * term - two_pi * h * term;
        }
    } else {
        let mut term = half; // (-1)^m (k/2)^{2m+1} / (m! (m+1)!)
        let mut h = 0.0;
        for m in 0..SERIES_TERMS {
            let mf = m as f64;
            if m > 0 {
                term *= -half * half / (mf * (mf + 1.0));
                h += 1.0 / mf;
            }
            let idx = 2 * m + 2;
            jc[idx] = term;
            let psi_sum = 2.0 * h + 1.0 / (mf + 1.0) - 2.0 * EULER_GAMMA;
            yc[idx] = two_pi * lk * term - psi_sum * term / PI;
        }
        yc[0] = -two_pi / k;
    }
    (jc, yc)
}

impl CoeffFn {
    fn new(medium: &ElasticMedium, j: u32, kind: Coeff) -> Self {
        let terms = terms_for(j, kind);
        let w2 = medium.omega * medium.omega;
        // Laurent coefficient of v^p stored at p + OFF.
        const OFF: i32 = 8;
        let len = (2 * SERIES_TERMS + 12) as i32;
        let mut xi = vec![0.0f64; len as usize];
        let mut chi = vec![Complex64::new(0.0, 0.0); len as usize];
        for t in &terms {
            let k = if t.shear { medium.ks } else { medium.kp };
            let ka = t.coef * k.powi(t.a);
            let (jc, yc) = bessel_laurent(t.order, k);
            for (idx, (&jv, &yv)) in jc.iter().zip(&yc).enumerate() {
                let p = idx as i32 - 1 - t.b;
                let slot = p + OFF;
                if slot < 0 || slot >= len {
                    continue;
                }
                let s = slot as usize;
                xi[s] += -ka * jv / (2.0 * w2);
                chi[s] += (I * ka * jv - ka * yv) / (4.0 * w2);
            }
        }
        let at = |p: i32| (p + OFF) as usize;
        let xi_series: Vec<f64> = (0..SERIES_TERMS).map(|m| xi[at(2 * m as i32)]).collect();
        let chi_series: Vec<Complex64> = (0..SERIES_TERMS).map(|m| chi[at(2 * m as i32)]).collect();
        let chi_higher_poles = (-OFF..-2).map(|p| chi[at(p)]).sum();
        let kp2 = medium.kp * medium.kp;
        let ks2 = medium.ks * medium.ks;
        let strong = match (j, kind) {
            (2, Coeff::K0) => (ks2 - kp2) / (4.0 * PI * w2),
            (1, Coeff::K1) => -(kp2 + ks2) / (4.0 * PI * w2),
            (1, Coeff::K2) => (kp2 + ks2) / (4.0 * PI * w2),
            _ => 0.0,
        };
        CoeffFn {
            j,
            kind,
            terms,
            xi_series,
            chi_series,
            xi_pole: xi[at(-2)],
            chi_pole: chi[at(-2)],
            chi_higher_poles,
            strong,
        }
    }

    fn direct(&self, medium: &ElasticMedium, v: f64, cp: &Cyl, cs: &Cyl) -> (Complex64, f64) {
        let w2 = medium.omega * medium.omega;
        let mut g = Complex64::new(0.0, 0.0);
        let mut x = 0.0;
        for t in &self.terms {
            let (k, c) = if t.shear { (medium.ks, cs) } else { (medium.kp, cp) };
            let f = t.coef * k.powi(t.a) * v.powi(-t.b);
            let (jn, yn) = if t.order == 0 { (c.0, c.2) } else { (c.1, c.3) };
            g += f * Complex64::new(jn, yn);
            x += f * jn;
        }
        (g * I / (4.0 * w2), -x / (2.0 * w2))
    }

    fn series(&self, v: f64) -> (f64, Complex64) {
        let v2 = v * v;
        let mut xi = 0.0;
        let mut chi = Complex64::new(0.0, 0.0);
        for m in (0..SERIES_TERMS).rev() {
            xi = xi * v2 + self.xi_series[m];
            chi = chi * v2 + self.chi_series[m];
        }
        (xi, chi)
    }
}

type Cyl = (f64, f64, f64, f64);

fn cyl(x: f64) -> Cyl {
    let c = cylinder01(x);
    (c.j0, c.j1, c.y0, c.y1)
}

impl GammaTable {
    pub fn new(medium: &ElasticMedium) -> Self {
        let mut funcs = Vec::with_capacity(8);
        for j in [1, 2] {
            for kind in [Coeff::Value, Coeff::K0, Coeff::K1, Coeff::K2] {
                funcs.push(CoeffFn::new(medium, j, kind));
            }
        }
        GammaTable { medium: *medium, funcs }
    }

    pub fn medium(&self) -> &ElasticMedium {
        &self.medium
    }

    fn func(&self, j: u32, kind: Coeff) -> &CoeffFn {
        &self.funcs[(j as usize - 1) * 4 + kind.slot()]
    }

    fn uses_series(&self, v: f64) -> bool {
        self.medium.kp.max(self.medium.ks) * v <= SERIES_LIMIT
    }

    /// Direct Hankel evaluation of `γ_j` or one of its derived coefficients.
    pub fn gamma(&self, j: u32, kind: Coeff, v: f64) -> Complex64 {
        let (cp, cs) = (cyl(self.medium.kp * v), cyl(self.medium.ks * v));
        self.func(j, kind).direct(&self.medium, v, &cp, &cs).0
    }

    /// All eight coefficients (`j = 1, 2` × `Value, K0, K1, K2`) at once.
    pub fn gamma_all(&self, v: f64) -> [Complex64; 8] {
        let (cp, cs) = (cyl(self.medium.kp * v), cyl(self.medium.ks * v));
        let mut out = [Complex64::new(0.0, 0.0); 8];
        for (o, f) in out.iter_mut().zip(&self.funcs) {
            *o = f.direct(&self.medium, v, &cp, &cs).0;
        }
        out
    }

    /// Log/smooth split at `v >= 0`. At `v = 0` the limiting constants are
    /// returned. `(1, K0)` is only ever multiplied by a zero matrix; its split
    /// is the `(1, Value)` split divided by `v²` and is not finite at `v = 0`.
    pub fn split(&self, j: u32, kind: Coeff, v: f64) -> KernelSplit {
        if j == 1 && kind == Coeff::K0 {
            let base = self.split(1, Coeff::Value, v);
            let v2 = v * v;
            return KernelSplit {
                kind,
                xi: base.xi / v2,
                chi: base.chi / v2,
                ..base
            };
        }
        let f = self.func(j, kind);
        let (xi, chi) = if self.uses_series(v) {
            f.series(v)
        } else {
            let (cp, cs) = (cyl(self.medium.kp * v), cyl(self.medium.ks * v));
            let (g, xi) = f.direct(&self.medium, v, &cp, &cs);
            (xi, g - (v.ln() / PI) * xi - f.strong / (v * v))
        };
        KernelSplit {
            j,
            kind,
            v,
            xi,
            chi,
            strong: f.strong,
        }
    }

    /// All eight coefficients, from the split where `k_max v` is small (no
    /// cancellation) and from the direct formulas elsewhere.
    pub fn values(&self, v: f64) -> [Complex64; 8] {
        if self.uses_series(v) {
            self.split_all(v).map(|s| s.value())
        } else {
            self.gamma_all(v)
        }
    }

    /// Splits of all eight coefficients at one separation, sharing the
    /// Bessel evaluations.
    pub fn split_all(&self, v: f64) -> [KernelSplit; 8] {
        let series = self.uses_series(v);
        let cyls = if series {
            None
        } else {
            Some((cyl(self.medium.kp * v), cyl(self.medium.ks * v)))
        };
        let ln_v = v.ln();
        let mut out = [KernelSplit {
            j: 1,
            kind: Coeff::Value,
            v,
            xi: 0.0,
            chi: Complex64::new(0.0, 0.0),
            strong: 0.0,
        }; 8];
        for (o, f) in out.iter_mut().zip(&self.funcs) {
            if f.j == 1 && f.kind == Coeff::K0 {
                continue;
            }
            let (xi, chi) = match &cyls {
                None => f.series(v),
                Some((cp, cs)) => {
                    let (g, xi) = f.direct(&self.medium, v, cp, cs);
                    (xi, g - (ln_v / PI) * xi - f.strong / (v * v))
                }
            };
            *o = KernelSplit {
                j: f.j,
                kind: f.kind,
                v,
                xi,
                chi,
                strong: f.strong,
            };
        }
        let base = out[0];
        let v2 = v * v;
        out[1] = KernelSplit {
            kind: Coeff::K0,
            xi: base.xi / v2,
            chi: base.chi / v2,
            ..base
        };
        out
    }

    /// Raw `v^{-2}` Laurent coefficients `(xi, chi)` and the summed higher
    /// poles of `chi`, as accumulated from the series. Analytically the `xi`
    /// pole and the higher `chi` poles vanish and the `chi` pole equals
    /// [`KernelSplit::strong`].
    pub fn series_poles(&self, j: u32, kind: Coeff) -> (f64, Complex64, Complex64) {
        let f = self.func(j, kind);
        (f.xi_pole, f.chi_pole, f.chi_higher_poles)
    }
}

/// `γ_j^(k)(v)` by the direct Hankel formulas.
pub fn gamma_coeff(medium: &ElasticMedium, j: u32, k: u32, v: f64) -> Result<Complex64> {
    check_j(j)?;
    let kind = Coeff::from_k(k)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("gamma_coeff needs v > 0, got {v}")));
    }
    Ok(GammaTable::new(medium).gamma(j, kind, v))
}

/// `(ξ_j^(k), χ_j^(k) without the strong term, strong-term coefficient)`.
pub fn split_coeff(medium: &ElasticMedium, j: u32, k: u32, v: f64) -> Result<KernelSplit> {
    check_j(j)?;
    let kind = Coeff::from_k(k)?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("split_coeff needs v >= 0, got {v}")));
    }
    Ok(GammaTable::new(medium).split(j, kind, v))
}

/// Static counterpart `γ_{0,j}` or its derived coefficient.
pub fn static_coeff(medium: &ElasticMedium, j: u32, kind: Coeff, v: f64) -> f64 {
    let c = medium.static_log_coefficient();
    let s = medium.static_projector_coefficient();
    match (j, kind) {
        (1, Coeff::Value) => -c * v.ln(),
        (1, Coeff::K0) => -c * v.ln() / (v * v),
        (1, Coeff::K1) => -c / (v * v),
        (1, Coeff::K2) => c / (v * v),
        (_, Coeff::Value) => s,
        (_, Coeff::K0) => s / (v * v),
        _ => 0.0,
    }
}

pub(crate) fn vec2(p: Point) -> Vector2<f64> {
    Vector2::new(p[0], p[1])
}

pub(crate) fn perp(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v[1], v[0])
}

fn separation(x: Point, y: Point) -> Result<(Vector2<f64>, f64)> {
    let r = vec2(x) - vec2(y);
    let v = r.norm();
    if !(v > 0.0) {
        return Err(Error::Singular(format!("coincident points {x:?}")));
    }
    Ok((r, v))
}

fn projector(r: &Vector2<f64>, v: f64) -> RMat2 {
    r * r.transpose() / (v * v)
}

fn complex(m: &RMat2) -> Tensor2 {
    m.map(|e| Complex64::new(e, 0.0))
}

/// `Γ(x, y) = γ_1 I + γ_2 J(x − y)`.
pub fn fundamental(medium: &ElasticMedium, x: Point, y: Point) -> Result<Tensor2> {
    let (r, v) = separation(x, y)?;
    let t = GammaTable::new(medium);
    Ok(fundamental_with(&t, &r, v))
}

pub(crate) fn fundamental_with(t: &GammaTable, r: &Vector2<f64>, v: f64) -> Tensor2 {
    let g = t.gamma_all(v);
    Tensor2::identity() * g[0] + complex(&projector(r, v)) * g[4]
}

/// Kelvin tensor `(λ+3μ)/(4πμ(λ+2μ)) [ln(1/v) I + (λ+μ)/(λ+3μ) J]`.
pub fn fundamental_static(medium: &ElasticMedium, x: Point, y: Point) -> Result<Tensor2> {
    let (r, v) = separation(x, y)?;
    let c = medium.static_log_coefficient();
    let s = medium.static_projector_coefficient();
    Ok(complex(&(RMat2::identity() * (-c * v.ln()) + projector(&r, v) * s)))
}

/// Far-field tensor of `Γ(·, y)` in direction `xhat`.
pub fn farfield_tensor(medium: &ElasticMedium, xhat: Point, y: Point, branch: Branch) -> Result<Tensor2> {
    let d = vec2(xhat);
    if (d.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid(format!("direction {xhat:?} is not a unit vector")));
    }
    let (amp, dir) = farfield_factor(medium, d, vec2(y), branch);
    Ok(complex(&(dir * dir.transpose())) * amp)
}

/// Scalar prefactor and polarization of the far-field tensor.
pub(crate) fn farfield_factor(
    medium: &ElasticMedium,
    xhat: Vector2<f64>,
    y: Vector2<f64>,
    branch: Branch,
) -> (Complex64, Vector2<f64>) {
    let (k, modulus, dir) = match branch {
        Branch::P => (medium.kp, medium.lambda + 2.0 * medium.mu, xhat),
        Branch::S => (medium.ks, medium.mu, perp(xhat)),
    };
    let phase = Complex64::from_polar(1.0, PI / 4.0 - k * xhat.dot(&y));
    (phase / (modulus * (8.0 * PI * k).sqrt()), dir)
}

/// `T_ν v = 2μ ∂v/∂ν + λ ν div v − μ ν^⊥ div^⊥ v` from the Jacobian
/// `G_ij = ∂v_i/∂x_j`.
pub fn traction_of_field(medium: &ElasticMedium, jacobian: &Tensor2, nu: Point) -> Result<CVec2> {
    let n = vec2(nu);
    if (n.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Invalid(format!("normal {nu:?} is not a unit vector")));
    }
    Ok(traction(medium.lambda, medium.mu, jacobian, &n))
}

pub(crate) fn traction(lambda: f64, mu: f64, g: &Tensor2, n: &Vector2<f64>) -> CVec2 {
    let nc = n.map(|e| Complex64::new(e, 0.0));
    let np = perp(*n).map(|e| Complex64::new(e, 0.0));
    let div = g[(0, 0)] + g[(1, 1)];
    let curl = g[(1, 0)] - g[(0, 1)];
    (g * nc).scale(2.0 * mu) + nc * (div * lambda) - np * (curl * mu)
}

fn real_traction(lambda: f64, mu: f64, g: &RMat2, n: &Vector2<f64>) -> Vector2<f64> {
    let div = g[(0, 0)] + g[(1, 1)];
    let curl = g[(1, 0)] - g[(0, 1)];
    g * n * (2.0 * mu) + n * (div * lambda) - perp(*n) * (curl * mu)
}

/// `M_1^(1)(x, y) = λ ν rᵀ + μ r νᵀ + μ (ν·r) I` with `r = x − y`, `ν = ν(x)`.
pub(crate) fn m11(lambda: f64, mu: f64, r: &Vector2<f64>, n: &Vector2<f64>) -> RMat2 {
    n * r.transpose() * lambda + r * n.transpose() * mu + RMat2::identity() * (mu * n.dot(r))
}

/// `M_2^(0)(x, y) = (λ+2μ) ν rᵀ + μ r νᵀ + μ (ν·r)(I − 4J)`.
pub(crate) fn m20(lambda: f64, mu: f64, r: &Vector2<f64>, n: &Vector2<f64>) -> RMat2 {
    let v2 = r.norm_squared();
    let proj = if v2 > 0.0 {
        r * r.transpose() / v2
    } else {
        RMat2::zeros()
    };
    n * r.transpose() * (lambda + 2.0 * mu)
        + r * n.transpose() * mu
        + (RMat2::identity() - proj * 4.0) * (mu * n.dot(r))
}

pub(crate) fn m21(lambda: f64, mu: f64, r: &Vector2<f64>, n: &Vector2<f64>) -> RMat2 {
    let v2 = r.norm_squared();
    if v2 == 0.0 {
        return RMat2::zeros();
    }
    m11(lambda, mu, r, n) * (r * r.transpose() / v2)
}

/// The geometric matrices `M_j^(k)(x, y)` of the traction decomposition
/// `T_ν(x) Γ(x, y) = Σ γ_j^(k) M_j^(k)(x, y)`, for `k ∈ {0, 1}`. All of them
/// vanish at `x = y`, which is returned as their continuous extension.
pub fn kernel_matrix_m(medium: &ElasticMedium, j: u32, k: u32, x: Point, y: Point, nu_x: Point) -> Result<RMat2> {
    check_j(j)?;
    let r = vec2(x) - vec2(y);
    let n = vec2(nu_x);
    let (l, m) = (medium.lambda, medium.mu);
    match (j, k) {
        (1, 0) => Ok(RMat2::zeros()),
        (2, 0) => Ok(m20(l, m, &r, &n)),
        (1, 1) => Ok(m11(l, m, &r, &n)),
        (2, 1) => Ok(m21(l, m, &r, &n)),
        _ => Err(Error::Invalid(format!(
            "M_j^(k) is defined for k = 0, 1 only, got k = {k}"
        ))),
    }
}

/// Forward-mode value with gradient in `x`.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: [f64; 2],
}

impl Dual {
    fn constant(v: f64) -> Self {
        Dual { v, d: [0.0; 2] }
    }
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: [self.d[0] + o.d[0], self.d[1] + o.d[1]],
        }
    }
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: [self.d[0] - o.d[0], self.d[1] - o.d[1]],
        }
    }
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: [self.d[0] * o.v + self.v * o.d[0], self.d[1] * o.v + self.v * o.d[1]],
        }
    }
    fn scale(self, s: f64) -> Dual {
        Dual {
            v: self.v * s,
            d: [self.d[0] * s, self.d[1] * s],
        }
    }
    fn recip(self) -> Dual {
        let iv = 1.0 / self.v;
        Dual {
            v: iv,
            d: [-self.d[0] * iv * iv, -self.d[1] * iv * iv],
        }
    }
}

type DualMat = [[Dual; 2]; 2];

/// `M(y, x)ᵀ` as a function of `x` for `(j, k)` in the K-kernel set.
fn m_yx_transposed(lambda: f64, mu: f64, j: u32, k: u32, x: Point, y: Point, nu_y: Point) -> DualMat {
    let xs = [Dual { v: x[0], d: [1.0, 0.0] }, Dual { v: x[1], d: [0.0, 1.0] }];
    // r = y − x, normal at y.
    let r = [Dual::constant(y[0]).sub(xs[0]), Dual::constant(y[1]).sub(xs[1])];
    let n = nu_y;
    let ndotr = r[0].scale(n[0]).add(r[1].scale(n[1]));
    let v2 = r[0].mul(r[0]).add(r[1].mul(r[1]));
    let inv = v2.recip();
    let proj = |a: usize, b: usize| r[a].mul(r[b]).mul(inv);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let m11 = |a: usize, b: usize| {
        r[b].scale(lambda * n[a])
            .add(r[a].scale(mu * n[b]))
            .add(ndotr.scale(mu * delta(a, b)))
    };
    let mut out = [[Dual::constant(0.0); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            // entry (a, b) of M(y, x)
            let e = match (j, k) {
                (2, 0) => r[b].scale((lambda + 2.0 * mu) * n[a]).add(r[a].scale(mu * n[b])).add(
                    ndotr
                        .mul(Dual::constant(delta(a, b)).sub(proj(a, b).scale(4.0)))
                        .scale(mu),
                ),
                (1, 1) => m11(a, b),
                (2, 1) => m11(a, 0).mul(proj(0, b)).add(m11(a, 1).mul(proj(1, b))),
                _ => Dual::constant(0.0),
            };
            out[b][a] = e;
        }
    }
    out
}

fn traction_of_dual(lambda: f64, mu: f64, a: &DualMat, n: &Vector2<f64>) -> RMat2 {
    let mut out = RMat2::zeros();
    for c in 0..2 {
        let g = RMat2::new(a[0][c].d[0], a[0][c].d[1], a[1][c].d[0], a[1][c].d[1]);
        let t = real_traction(lambda, mu, &g, n);
        out[(0, c)] = t[0];
        out[(1, c)] = t[1];
    }
    out
}

fn dual_value(a: &DualMat) -> RMat2 {
    RMat2::new(a[0][0].v, a[0][1].v, a[1][0].v, a[1][1].v)
}

/// The geometric matrices `N_j^(k)(x, y)` of the hypersingular decomposition
/// `T_ν(x)[T_ν(y) Γ(x, y)]ᵀ = Σ γ_j^(k) N_j^(k)(x, y)`.
pub fn kernel_matrix_n(
    medium: &ElasticMedium,
    j: u32,
    k: u32,
    x: Point,
    y: Point,
    nu_x: Point,
    nu_y: Point,
) -> Result<RMat2> {
    check_j(j)?;
    Coeff::from_k(k)?;
    let (rxy, v) = separation(x, y)?;
    let (l, m) = (medium.lambda, medium.mu);
    let nx = vec2(nu_x);
    let ny = vec2(nu_y);
    let v2 = v * v;
    let mxy = m11(l, m, &rxy, &nx);
    let m_t = |jj, kk| m_yx_transposed(l, m, jj, kk, x, y, nu_y);
    let out = match (j, k) {
        (1, 0) => RMat2::zeros(),
        (2, 0) => {
            let a = m_t(2, 0);
            traction_of_dual(l, m, &a, &nx) - mxy * dual_value(&a) * (2.0 / v2)
        }
        (1, 1) => {
            let a = m_t(1, 1);
            traction_of_dual(l, m, &a, &nx) - mxy * dual_value(&a) / v2
        }
        (1, 2) => mxy * m11(l, m, &(-rxy), &ny).transpose() / v2,
        (2, 1) => {
            let a = m_t(2, 1);
            let b = m20(l, m, &(-rxy), &ny).transpose();
            traction_of_dual(l, m, &a, &nx) - mxy * dual_value(&a) / v2 + mxy * b / v2
        }
        (2, 2) => mxy * m21(l, m, &(-rxy), &ny).transpose() / v2,
        _ => unreachable!(),
    };
    Ok(out)
}

/// Boundary-operator kernels whose dynamic-minus-static difference is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    /// `T_ν(x) Γ(x, y)`
    KPrime,
    /// `[T_ν(y) Γ(x, y)]ᵀ`
    K,
    /// `T_ν(x) [T_ν(y) Γ(x, y)]ᵀ`
    N,
}

/// Dynamic kernel minus its static counterpart. Each coefficient difference is
/// formed from the log/smooth split so no strong cancellation is carried out
/// numerically.
pub fn difference_kernel(
    op: Operator,
    medium: &ElasticMedium,
    x: Point,
    y: Point,
    nu_x: Point,
    nu_y: Point,
) -> Result<Tensor2> {
    let (_, v) = separation(x, y)?;
    let table = GammaTable::new(medium);
    let diff = |j: u32, kind: Coeff| -> Complex64 {
        let s = table.split(j, kind, v);
        let strong0 = match (j, kind) {
            (2, Coeff::K0) => medium.static_projector_coefficient(),
            (1, Coeff::K1) => -medium.static_log_coefficient(),
            (1, Coeff::K2) => medium.static_log_coefficient(),
            _ => 0.0,
        };
        s.chi + (v.ln() / PI) * s.xi + (s.strong - strong0) / (v * v)
    };
    let mut out = Tensor2::zeros();
    let pairs: &[(u32, u32)] = match op {
        Operator::KPrime | Operator::K => &[(2, 0), (1, 1), (2, 1)],
        Operator::N => &[(2, 0), (1, 1), (2, 1), (1, 2), (2, 2)],
    };
    for &(j, k) in pairs {
        let kind = Coeff::from_k(k)?;
        let mat = match op {
            Operator::KPrime => kernel_matrix_m(medium, j, k, x, y, nu_x)?,
            Operator::K => kernel_matrix_m(medium, j, k, y, x, nu_y)?.transpose(),
            Operator::N => kernel_matrix_n(medium, j, k, x, y, nu_x, nu_y)?,
        };
        out += complex(&mat) * diff(j, kind);
    }
    Ok(out)
}

/// Full dynamic kernel of one of the three operators, by the direct formulas.
pub fn operator_kernel(
    op: Operator,
    medium: &ElasticMedium,
    x: Point,
    y: Point,
    nu_x: Point,
    nu_y: Point,
) -> Result<Tensor2> {
    let (_, v) = separation(x, y)?;
    let table = GammaTable::new(medium);
    let mut out = Tensor2::zeros();
    let pairs: &[(u32, u32)] = match op {
        Operator::KPrime | Operator::K => &[(2, 0), (1, 1), (2, 1)],
        Operator::N => &[(2, 0), (1, 1), (2, 1), (1, 2), (2, 2)],
    };
    for &(j, k) in pairs {
        let g = table.gamma(j, Coeff::from_k(k)?, v);
        let mat = match op {
            Operator::KPrime => kernel_matrix_m(medium, j, k, x, y, nu_x)?,
            Operator::K => kernel_matrix_m(medium, j, k, y, x, nu_y)?.transpose(),
            Operator::N => kernel_matrix_n(medium, j, k, x, y, nu_x, nu_y)?,
        };
        out += complex(&mat) * g;
    }
    Ok(out)
}

/// Jacobian `∂/∂x` of the column field `x ↦ Γ(x, y) e_col`.
pub fn fundamental_gradient(medium: &ElasticMedium, x: Point, y: Point, col: usize) -> Result<Tensor2> {
    let (r, v) = separation(x, y)?;
    let t = GammaTable::new(medium);
    let g = t.gamma_all(v);
    Ok(fundamental_gradient_with(&g, &r, v, col))
}

/// `∂_m [γ_1 δ_ic + γ_2 r_i r_c / v²]` using `γ' = v γ^(1)`.
pub(crate) fn fundamental_gradient_with(g: &[Complex64; 8], r: &Vector2<f64>, v: f64, col: usize) -> Tensor2 {
    let (g1p, g2p) = (g[2] * v, g[6] * v);
    let g2 = g[4];
    let v2 = v * v;
    let mut out = Tensor2::zeros();
    for i in 0..2 {
        for m in 0..2 {
            let dic = if i == col { 1.0 } else { 0.0 };
            let dim = if i == m { 1.0 } else { 0.0 };
            let dcm = if col == m { 1.0 } else { 0.0 };
            let proj = r[i] * r[col] / v2;
            let dproj = (dim * r[col] + r[i] * dcm) / v2 - 2.0 * r[i] * r[col] * r[m] / (v2 * v2);
            out[(i, m)] = g1p * (dic * r[m] / v) + g2p * (proj * r[m] / v) + g2 * dproj;
        }
    }
    out
}
