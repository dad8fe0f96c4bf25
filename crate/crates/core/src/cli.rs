//! Batch runner: scenario configs and presets, the synthesize → noise →
//! decompose → indicator pipeline, PGM rendering and the command line.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::factorization::{
    decompose, indicator_grid, parse_indicator_csv, write_indicator_csv, Combine, GridSpec, IndicatorGrid,
    SpectralMode, Weighting, DEFAULT_FLOOR,
};
use crate::farfield_data::{
    add_noise, fmt_f64, save_dataset, synthesize_with, write_atomic, Case, DirectionSet, DATASET_VERSION,
};
use crate::forward::ScatteringSolver;
use crate::geometry::{make_preset, BoundaryCurve, NodeSet};
use crate::kernels::ElasticMedium;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "ELASTOCAVITY_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// One cavity of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererSpec {
    pub shape: String,
    pub params: Vec<f64>,
    pub center: [f64; 2],
    pub scale: f64,
}

impl ScattererSpec {
    pub fn new(shape: &str, params: &[f64], center: [f64; 2], scale: f64) -> Self {
        ScattererSpec {
            shape: shape.into(),
            params: params.to_vec(),
            center,
            scale,
        }
    }

    pub fn curve(&self) -> Result<BoundaryCurve> {
        make_preset(&self.shape, &self.params, self.center, self.scale)
    }
}

/// Everything a run needs, validated before any computation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub lambda: f64,
    pub mu: f64,
    pub omega: f64,
    pub scatterers: Vec<ScattererSpec>,
    pub case: Case,
    pub directions: usize,
    pub nodes: usize,
    pub delta: f64,
    pub seed: u64,
    /// Observation arc; `None` is the full circle.
    pub aperture: Option<(f64, f64)>,
    pub polarizations: Vec<f64>,
    pub combine: Combine,
    /// `None` picks the per-case default.
    pub mode: Option<SpectralMode>,
    pub weighting: Weighting,
    pub floor: f64,
    pub grid: GridSpec,
    pub output_dir: PathBuf,
    pub pgm: bool,
    /// Treat an ill-conditioned system as a failure.
    pub strict: bool,
}

const FOUR_POLARIZATIONS: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];

impl ScenarioConfig {
    /// Defaults: 128 nodes, 64 directions, 10 % noise, the four
    /// polarization angles combined, the `[−3, 3]²` grid with 101 × 101 points.
    pub fn base(name: &str, lambda: f64, mu: f64, omega: f64, scatterers: Vec<ScattererSpec>, case: Case) -> Self {
        ScenarioConfig {
            name: name.into(),
            lambda,
            mu,
            omega,
            scatterers,
            case,
            directions: 64,
            nodes: 128,
            delta: 0.1,
            seed: 1,
            aperture: None,
            polarizations: FOUR_POLARIZATIONS.to_vec(),
            combine: Combine::SumNormalized,
            mode: None,
            weighting: Weighting::Energy,
            floor: DEFAULT_FLOOR,
            grid: GridSpec {
                x0: -3.0,
                x1: 3.0,
                nx: 101,
                y0: -3.0,
                y1: 3.0,
                ny: 101,
            },
            output_dir: PathBuf::from("out"),
            pgm: true,
            strict: false,
        }
    }

    pub fn spectral_mode(&self) -> SpectralMode {
        self.mode.unwrap_or_else(|| SpectralMode::default_for(self.case))
    }

    pub fn direction_set(&self) -> Result<DirectionSet> {
        match self.aperture {
            None => DirectionSet::full(self.directions),
            Some((a, b)) => DirectionSet::aperture(self.directions, a, b),
        }
    }

    pub fn medium(&self) -> Result<ElasticMedium> {
        ElasticMedium::new(self.lambda, self.mu, self.omega)
    }

    pub fn curves(&self) -> Result<Vec<BoundaryCurve>> {
        self.scatterers.iter().map(|s| s.curve()).collect()
    }

    /// Checks every field and names the first offending one.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| {
            Err(Error::Config {
                field: field.into(),
                message,
            })
        };
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name", format!("`{}` is not a usable file stem", self.name));
        }
        if let Err(e) = self.medium() {
            return bad("medium", e.to_string());
        }
        if self.scatterers.is_empty() {
            return bad("scatterer", "at least one scatterer is required".into());
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            if let Err(e) = s.curve() {
                return bad(&format!("scatterer[{i}]"), e.to_string());
            }
        }
        if self.directions == 0 {
            return bad("data.directions", "must be positive".into());
        }
        if let Err(e) = NodeSet::new(self.nodes) {
            return bad("data.nodes", e.to_string());
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("data.delta", format!("must be finite and >= 0, got {}", self.delta));
        }
        if let Err(e) = self.direction_set() {
            return bad("data.aperture", e.to_string());
        }
        if self.case == Case::FF
            && self
                .aperture
                .is_some_and(|(a, b)| a != 0.0 || (b - 2.0 * PI).abs() > 1e-12)
        {
            return bad(
                "data.case",
                "FF needs the full aperture; use LA for a limited one".into(),
            );
        }
        if self.polarizations.is_empty() || self.polarizations.iter().any(|a| !a.is_finite()) {
            return bad("inversion.polarizations", "need at least one finite angle".into());
        }
        if self.combine == Combine::Single && self.polarizations.len() != 1 {
            return bad("inversion.combine", "`single` needs exactly one polarization".into());
        }
        if !(self.floor >= 0.0 && self.floor < 1.0) {
            return bad("inversion.floor", format!("must lie in [0, 1), got {}", self.floor));
        }
        if let Err(e) = self.grid.validate() {
            return bad("grid", e.to_string());
        }
        Ok(())
    }

    /// Full config echo in the config grammar.
    pub fn to_toml(&self) -> String {
        let f = |x: f64| fmt_f64(x);
        let list = |v: &[f64]| format!("[{}]", v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(", "));
        let mut s = String::new();
        let _ = writeln!(s, "name = {:?}", self.name);
        let _ = writeln!(
            s,
            "\n[medium]\nlambda = {}\nmu = {}\nomega = {}",
            f(self.lambda),
            f(self.mu),
            f(self.omega)
        );
        for sc in &self.scatterers {
            let _ = writeln!(
                s,
                "\n[[scatterer]]\nshape = {:?}\nparams = {}\ncenter = {}\nscale = {}",
                sc.shape,
                list(&sc.params),
                list(&sc.center),
                f(sc.scale)
            );
        }
        let _ = writeln!(
            s,
            "\n[data]\ncase = {:?}\ndirections = {}\nnodes = {}\ndelta = {}\nseed = {}",
            self.case.name(),
            self.directions,
            self.nodes,
            f(self.delta),
            self.seed
        );
        if let Some((a, b)) = self.aperture {
            let _ = writeln!(s, "aperture = {}", list(&[a, b]));
        }
        let _ = writeln!(s, "\n[inversion]");
        if let Some(m) = self.mode {
            let _ = writeln!(s, "mode = {:?}", m.name());
        }
        let _ = writeln!(
            s,
            "weighting = {:?}\npolarizations = {}\ncombine = {:?}\nfloor = {}",
            self.weighting.name(),
            list(&self.polarizations),
            self.combine.name(),
            f(self.floor)
        );
        let g = &self.grid;
        let _ = writeln!(
            s,
            "\n[grid]\nx = {}\ny = {}\nnx = {}\nny = {}",
            list(&[g.x0, g.x1]),
            list(&[g.y0, g.y1]),
            g.nx,
            g.ny
        );
        let _ = writeln!(
            s,
            "\n[output]\ndir = {:?}\npgm = {}\nstrict = {}",
            self.output_dir.to_string_lossy(),
            self.pgm,
            self.strict
        );
        s
    }
}

/// A named, reproducible scenario.
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    build: fn(&'static str) -> ScenarioConfig,
}

impl Preset {
    pub fn config(&self) -> ScenarioConfig {
        (self.build)(self.name)
    }
}

fn rr() -> ScattererSpec {
    ScattererSpec::new("rounded_rectangle", &[], [0.0, 0.0], 1.0)
}

fn fig1(name: &'static str, case: Case) -> ScenarioConfig {
    ScenarioConfig::base(name, 1.0, 1.0, 8.0 * PI, vec![rr()], case)
}

fn pear(name: &'static str, lambda: f64) -> ScenarioConfig {
    ScenarioConfig::base(
        name,
        lambda,
        1.0,
        5.0 * PI,
        vec![ScattererSpec::new("pear", &[], [0.0, 0.0], 1.0)],
        Case::FF,
    )
}

fn sweep(name: &'static str, k: f64) -> ScenarioConfig {
    ScenarioConfig::base(name, 1.0, 1.0, k * PI, vec![rr()], Case::SS)
}

fn two(name: &'static str, c1: [f64; 2], c2: [f64; 2], half: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::base(
        name,
        5.0,
        5.0,
        9.0 * PI,
        vec![
            ScattererSpec::new("ellipse", &[1.5, 1.0], c1, 1.0),
            ScattererSpec::new("rounded_rectangle", &[], c2, 1.0),
        ],
        Case::FF,
    );
    c.grid = GridSpec {
        x0: -half,
        x1: half,
        nx: 101,
        y0: -half,
        y1: half,
        ny: 101,
    };
    c
}

fn multiscale(name: &'static str, small: ScattererSpec, omega: f64) -> ScenarioConfig {
    let pear = ScattererSpec::new("pear", &[0.5, 0.2], [6.0, 0.0], 1.0);
    let mut c = ScenarioConfig::base(name, 5.0, 5.0, omega, vec![small, pear], Case::FF);
    c.grid = GridSpec {
        x0: -8.0,
        x1: 8.0,
        nx: 201,
        y0: -8.0,
        y1: 8.0,
        ny: 201,
    };
    c
}

fn limited(name: &'static str, q: usize) -> ScenarioConfig {
    let mut c = ScenarioConfig::base(
        name,
        2.0,
        1.0,
        3.0 * PI,
        vec![ScattererSpec::new("kite", &[], [0.0, 0.0], 1.0)],
        Case::LA,
    );
    let a = q as f64 * PI / 2.0;
    c.aperture = Some((a, a + PI / 2.0));
    c
}

/// All presets in listing order.
pub fn presets() -> Vec<Preset> {
    macro_rules! p {
        ($name:expr, $desc:expr, $f:expr) => {
            Preset {
                name: $name,
                description: $desc,
                build: $f,
            }
        };
    }
    vec![
        p!(
            "fig1-ff",
            "rounded rectangle, λ=μ=1, ω=8π, FF, 4 polarizations",
            |n| fig1(n, Case::FF)
        ),
        p!(
            "fig1-pp",
            "rounded rectangle, λ=μ=1, ω=8π, PP, 4 polarizations",
            |n| fig1(n, Case::PP)
        ),
        p!(
            "fig1-ss",
            "rounded rectangle, λ=μ=1, ω=8π, SS, 4 polarizations",
            |n| fig1(n, Case::SS)
        ),
        p!("pear-lambda1", "pear, λ=1, μ=1, ω=5π, FF", |n| pear(n, 1.0)),
        p!("pear-lambda-1", "pear, λ=-1, μ=1, ω=5π (k_p = k_s), FF", |n| pear(
            n, -1.0
        )),
        p!("pear-lambda-1.5", "pear, λ=-1.5, μ=1, ω=5π (k_p > k_s), FF", |n| {
            pear(n, -1.5)
        }),
        p!("rr-omega2", "rounded rectangle, λ=μ=1, ω=2π, SS", |n| sweep(n, 2.0)),
        p!("rr-omega4", "rounded rectangle, λ=μ=1, ω=4π, SS", |n| sweep(n, 4.0)),
        p!("rr-omega5", "rounded rectangle, λ=μ=1, ω=5π, SS", |n| sweep(n, 5.0)),
        p!("rr-omega7", "rounded rectangle, λ=μ=1, ω=7π, SS", |n| sweep(n, 7.0)),
        p!("rr-omega8", "rounded rectangle, λ=μ=1, ω=8π, SS", |n| sweep(n, 8.0)),
        p!("rr-omega9", "rounded rectangle, λ=μ=1, ω=9π, SS", |n| sweep(n, 9.0)),
        p!(
            "two-scatterer-far",
            "ellipse at (-3,2) + rounded rectangle at (2,1), λ=μ=5, ω=9π, grid [-6,6]²",
            |n| { two(n, [-3.0, 2.0], [2.0, 1.0], 6.0) }
        ),
        p!(
            "two-scatterer-close",
            "ellipse at (-1.5,1) + rounded rectangle at (1.5,-1), λ=μ=5, ω=9π, grid [-6,6]²",
            |n| { two(n, [-1.5, 1.0], [1.5, -1.0], 6.0) }
        ),
        p!(
            "multiscale-ex1",
            "3× rounded rectangle at (-2,0) + pear(0.5,0.2) at (6,0), λ=μ=5, ω=6π, grid [-8,8]²",
            |n| {
                multiscale(
                    n,
                    ScattererSpec::new("rounded_rectangle", &[], [-2.0, 0.0], 3.0),
                    6.0 * PI,
                )
            }
        ),
        p!(
            "multiscale-ex2",
            "circle r=0.1 at (-2,0) + pear(0.5,0.2) at (6,0), λ=μ=5, ω=12π, grid [-8,8]²",
            |n| { multiscale(n, ScattererSpec::new("circle", &[0.1], [-2.0, 0.0], 1.0), 12.0 * PI) }
        ),
        p!("limited-q1", "kite, λ=2, μ=1, ω=3π, LA on (0, π/2)", |n| limited(
            n, 0
        )),
        p!("limited-q2", "kite, λ=2, μ=1, ω=3π, LA on (π/2, π)", |n| limited(
            n, 1
        )),
        p!("limited-q3", "kite, λ=2, μ=1, ω=3π, LA on (π, 3π/2)", |n| limited(
            n, 2
        )),
        p!("limited-q4", "kite, λ=2, μ=1, ω=3π, LA on (3π/2, 2π)", |n| {
            limited(n, 3)
        }),
    ]
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    presets().into_iter().find(|p| p.name == name).map(|p| p.config())
}

/// Preset table: name, case, aperture, description.
pub fn list_presets() -> String {
    let mut s = String::new();
    for p in presets() {
        let c = p.config();
        let ap = match c.aperture {
            Some((a, b)) => format!("({}, {})", angle_text(a), angle_text(b)),
            None => "full".into(),
        };
        let _ = writeln!(s, "{:<22} {:<3} {:<14} {}", p.name, c.case.name(), ap, p.description);
    }
    s
}

fn angle_text(a: f64) -> String {
    let k = a / (PI / 2.0);
    match k.round() as i64 {
        0 if a == 0.0 => "0".into(),
        1 => "π/2".into(),
        2 => "π".into(),
        3 => "3π/2".into(),
        4 => "2π".into(),
        _ => fmt_f64(a),
    }
}

/// Evaluates `3`, `-2.5`, `pi`, `8*pi`, `3*pi/4`, `pi/2` and similar
/// products and quotients of numbers and `pi`.
pub fn eval_number(expr: &str) -> Option<f64> {
    let s: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(&s)),
    };
    let mut acc = 1.0;
    let mut op = '*';
    let mut start = 0;
    let bytes: Vec<char> = body.chars().collect();
    for i in 0..=bytes.len() {
        let at_end = i == bytes.len();
        if at_end || bytes[i] == '*' || bytes[i] == '/' {
            let tok: String = bytes[start..i].iter().collect();
            let v = match tok.as_str() {
                "pi" | "π" | "PI" => PI,
                t => t.parse::<f64>().ok()?,
            };
            acc = if op == '*' { acc * v } else { acc / v };
            if !at_end {
                op = bytes[i];
            }
            start = i + 1;
        }
    }
    let v = if neg { -acc } else { acc };
    v.is_finite().then_some(v)
}

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn num(v: &Value, field: &str) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => eval_number(s).ok_or_else(|| cfg_err(field, format!("cannot evaluate `{s}`"))),
        other => Err(cfg_err(field, format!("expected a number, got {}", other.type_str()))),
    }
}

fn uint(v: &Value, field: &str) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        other => Err(cfg_err(field, format!("expected a nonnegative integer, got {other}"))),
    }
}

fn string<'a>(v: &'a Value, field: &str) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| cfg_err(field, format!("expected a string, got {}", v.type_str())))
}

fn boolean(v: &Value, field: &str) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| cfg_err(field, format!("expected true or false, got {}", v.type_str())))
}

fn numbers(v: &Value, field: &str, len: Option<usize>) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| cfg_err(field, format!("expected an array, got {}", v.type_str())))?;
    if let Some(n) = len {
        if arr.len() != n {
            return Err(cfg_err(field, format!("expected {n} values, got {}", arr.len())));
        }
    }
    arr.iter()
        .enumerate()
        .map(|(i, x)| num(x, &format!("{field}[{i}]")))
        .collect()
}

fn pair(v: &Value, field: &str) -> Result<(f64, f64)> {
    let p = numbers(v, field, Some(2))?;
    Ok((p[0], p[1]))
}

fn section<'a>(root: &'a Table, name: &str) -> Result<Option<&'a Table>> {
    match root.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(cfg_err(name, "expected a [section]")),
    }
}

fn check_keys(t: &Table, section: &str, allowed: &[&str]) -> Result<()> {
    for k in t.keys() {
        if !allowed.contains(&k.as_str()) {
            let field = if section.is_empty() {
                k.clone()
            } else {
                format!("{section}.{k}")
            };
            return Err(cfg_err(
                &field,
                format!("unknown key (expected one of: {})", allowed.join(", ")),
            ));
        }
    }
    Ok(())
}

/// Parses a config. A top-level `preset = "..."` starts from that preset and
/// the sections override it; otherwise `[medium]` and `[[scatterer]]` are
/// required. A `[run]` table (as in manifests) is ignored.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| cfg_err("config", e.message().to_string()))?;
    check_keys(
        &root,
        "",
        &[
            "preset",
            "name",
            "medium",
            "scatterer",
            "data",
            "inversion",
            "grid",
            "output",
            "run",
        ],
    )?;
    let mut c = match root.get("preset") {
        Some(v) => {
            let name = string(v, "preset")?;
            preset(name).ok_or_else(|| cfg_err("preset", format!("unknown preset `{name}` (see `presets`)")))?
        }
        None => {
            if root.get("medium").is_none() {
                return Err(cfg_err("medium", "missing [medium] section"));
            }
            if root.get("scatterer").is_none() {
                return Err(cfg_err("scatterer", "missing [[scatterer]] entries"));
            }
            ScenarioConfig::base("run", 1.0, 1.0, 1.0, Vec::new(), Case::FF)
        }
    };
    if let Some(v) = root.get("name") {
        c.name = string(v, "name")?.to_string();
    }
    if let Some(m) = section(&root, "medium")? {
        check_keys(m, "medium", &["lambda", "mu", "omega"])?;
        for (key, slot) in [("lambda", &mut c.lambda), ("mu", &mut c.mu), ("omega", &mut c.omega)] {
            if let Some(v) = m.get(key) {
                *slot = num(v, &format!("medium.{key}"))?;
            }
        }
    }
    if let Some(v) = root.get("scatterer") {
        let arr = v
            .as_array()
            .ok_or_else(|| cfg_err("scatterer", "use [[scatterer]] tables"))?;
        c.scatterers.clear();
        for (i, s) in arr.iter().enumerate() {
            let field = format!("scatterer[{i}]");
            let t = s.as_table().ok_or_else(|| cfg_err(&field, "expected a table"))?;
            check_keys(t, &field, &["shape", "params", "center", "scale"])?;
            let shape = string(
                t.get("shape").ok_or_else(|| cfg_err(&field, "missing `shape`"))?,
                &format!("{field}.shape"),
            )?;
            let params = match t.get("params") {
                Some(v) => numbers(v, &format!("{field}.params"), None)?,
                None => Vec::new(),
            };
            let center = match t.get("center") {
                Some(v) => {
                    let (x, y) = pair(v, &format!("{field}.center"))?;
                    [x, y]
                }
                None => [0.0, 0.0],
            };
            let scale = match t.get("scale") {
                Some(v) => num(v, &format!("{field}.scale"))?,
                None => 1.0,
            };
            c.scatterers.push(ScattererSpec {
                shape: shape.into(),
                params,
                center,
                scale,
            });
        }
    }
    if let Some(d) = section(&root, "data")? {
        check_keys(d, "data", &["case", "directions", "nodes", "delta", "seed", "aperture"])?;
        if let Some(v) = d.get("case") {
            c.case = string(v, "data.case")?
                .parse()
                .map_err(|e: Error| cfg_err("data.case", e.to_string()))?;
        }
        if let Some(v) = d.get("directions") {
            c.directions = uint(v, "data.directions")? as usize;
        }
        if let Some(v) = d.get("nodes") {
            c.nodes = uint(v, "data.nodes")? as usize;
        }
        if let Some(v) = d.get("delta") {
            c.delta = num(v, "data.delta")?;
        }
        if let Some(v) = d.get("seed") {
            c.seed = uint(v, "data.seed")?;
        }
        if let Some(v) = d.get("aperture") {
            c.aperture = Some(pair(v, "data.aperture")?);
        }
    }
    if let Some(s) = section(&root, "inversion")? {
        check_keys(
            s,
            "inversion",
            &["mode", "weighting", "polarizations", "combine", "floor"],
        )?;
        if let Some(v) = s.get("mode") {
            let m = string(v, "inversion.mode")?;
            c.mode = Some(m.parse().map_err(|e: Error| cfg_err("inversion.mode", e.to_string()))?);
        }
        if let Some(v) = s.get("weighting") {
            let w = string(v, "inversion.weighting")?;
            c.weighting = w
                .parse()
                .map_err(|e: Error| cfg_err("inversion.weighting", e.to_string()))?;
        }
        if let Some(v) = s.get("polarizations") {
            c.polarizations = numbers(v, "inversion.polarizations", None)?;
        }
        if let Some(v) = s.get("combine") {
            let r = string(v, "inversion.combine")?;
            c.combine = r
                .parse()
                .map_err(|e: Error| cfg_err("inversion.combine", e.to_string()))?;
        }
        if let Some(v) = s.get("floor") {
            c.floor = num(v, "inversion.floor")?;
        }
    }
    if let Some(g) = section(&root, "grid")? {
        check_keys(g, "grid", &["x", "y", "nx", "ny"])?;
        if let Some(v) = g.get("x") {
            (c.grid.x0, c.grid.x1) = pair(v, "grid.x")?;
        }
        if let Some(v) = g.get("y") {
            (c.grid.y0, c.grid.y1) = pair(v, "grid.y")?;
        }
        if let Some(v) = g.get("nx") {
            c.grid.nx = uint(v, "grid.nx")? as usize;
        }
        if let Some(v) = g.get("ny") {
            c.grid.ny = uint(v, "grid.ny")? as usize;
        }
    }
    if let Some(o) = section(&root, "output")? {
        check_keys(o, "output", &["dir", "pgm", "strict"])?;
        if let Some(v) = o.get("dir") {
            c.output_dir = PathBuf::from(string(v, "output.dir")?);
        }
        if let Some(v) = o.get("pgm") {
            c.pgm = boolean(v, "output.pgm")?;
        }
        if let Some(v) = o.get("strict") {
            c.strict = boolean(v, "output.strict")?;
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Paths and diagnostics of a finished run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub dataset: PathBuf,
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub pgm: Option<PathBuf>,
    pub warnings: Vec<String>,
    pub indicator: IndicatorGrid,
}

fn csv_manifest(c: &ScenarioConfig) -> Vec<(String, String)> {
    let mut m = vec![
        ("name".to_string(), c.name.clone()),
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ("lambda".into(), fmt_f64(c.lambda)),
        ("mu".into(), fmt_f64(c.mu)),
        ("omega".into(), fmt_f64(c.omega)),
        ("N".into(), c.directions.to_string()),
        ("nodes".into(), c.nodes.to_string()),
        ("delta".into(), fmt_f64(c.delta)),
        ("seed".into(), c.seed.to_string()),
        ("mode".into(), c.spectral_mode().name().into()),
        ("weighting".into(), c.weighting.name().into()),
        ("floor".into(), fmt_f64(c.floor)),
    ];
    if let Some((a, b)) = c.aperture {
        m.push(("aperture".into(), format!("{},{}", fmt_f64(a), fmt_f64(b))));
    }
    m
}

/// Runs the full pipeline and writes dataset, indicator CSV, optional PGM and
/// the manifest (last) into the output directory.
pub fn run(c: &ScenarioConfig) -> Result<RunReport> {
    c.validate()?;
    let start = Instant::now();
    let medium = c.medium()?;
    let mut warnings = medium.warnings();
    let curves = c.curves()?;
    let dirs = c.direction_set()?;
    let solver = ScatteringSolver::new(&medium, &curves, NodeSet::new(c.nodes)?)?;
    if let Some(w) = solver.warning() {
        if c.strict {
            return Err(Error::Numerical(w));
        }
        warnings.push(w);
    }
    let clean = synthesize_with(&solver, &dirs, c.case)?;
    let data = add_noise(&clean, c.delta, c.seed)?;
    let sys = decompose(&data, c.spectral_mode(), c.weighting)?;
    let ind = indicator_grid(&data, &sys, &c.grid, &c.polarizations, c.combine, c.floor)?;
    let retained = sys.retained(c.floor);

    std::fs::create_dir_all(&c.output_dir).map_err(|e| Error::io(&c.output_dir, e))?;
    let path = |ext: &str| c.output_dir.join(format!("{}.{ext}", c.name));
    let dataset = path("dat");
    save_dataset(&dataset, &data)?;
    let csv = path("csv");
    write_indicator_csv(&csv, &ind, &csv_manifest(c))?;
    let pgm = if c.pgm {
        let p = path("pgm");
        write_atomic(&p, &pgm_bytes(&ind.values, ind.grid.nx, ind.grid.ny)?)?;
        Some(p)
    } else {
        None
    };
    let manifest = path("manifest.toml");
    let mut text = c.to_toml();
    let _ = writeln!(
        text,
        "\n[run]\nversion = {:?}\ndataset_version = {:?}\nspectral_mode = {:?}\nwall_seconds = {}\nspectral_floor = {}\nretained_components = {}\ncondition_estimate = {}\nwarnings = [{}]",
        env!("CARGO_PKG_VERSION"),
        DATASET_VERSION,
        c.spectral_mode().name(),
        fmt_f64(start.elapsed().as_secs_f64()),
        fmt_f64(c.floor),
        retained,
        fmt_f64(solver.condition()),
        warnings.iter().map(|w| format!("{w:?}")).collect::<Vec<_>>().join(", ")
    );
    write_atomic(&manifest, text.as_bytes())?;
    Ok(RunReport {
        dataset,
        csv,
        manifest,
        pgm,
        warnings,
        indicator: ind,
    })
}

/// Binary PGM (`P5`, maxval 255) of a row-major grid whose first row is the
/// lowest `y`; the image is written top row first, so it is flipped. Values
/// map linearly from `[min, max]` to `[0, 255]`; a constant grid is all 255.
pub fn pgm_bytes(values: &[f64], nx: usize, ny: usize) -> Result<Vec<u8>> {
    if nx == 0 || ny == 0 || values.len() != nx * ny {
        return Err(Error::Invalid(format!(
            "{} values do not form a {nx}×{ny} image",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("cannot render non-finite values".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    for row in (0..ny).rev() {
        for v in &values[row * nx..(row + 1) * nx] {
            let px = if max > min {
                (255.0 * (v - min) / (max - min)).round() as u8
            } else {
                255
            };
            out.push(px);
        }
    }
    Ok(out)
}

/// Width, height and pixel bytes of a binary PGM produced by [`pgm_bytes`].
pub fn read_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |m: &str| Error::Parse {
        line: 1,
        message: m.into(),
    };
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let s = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if s == i {
            return Err(bad("truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[s..i]).into_owned());
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("not a binary 8-bit PGM"));
    }
    let w: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let h: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    let data = bytes.get(i + 1..).unwrap_or_default().to_vec();
    if data.len() != w * h {
        return Err(bad("pixel count does not match the header"));
    }
    Ok((w, h, data))
}

/// Renders an indicator CSV to a PGM file.
pub fn render(csv: &Path, pgm: &Path) -> Result<(usize, usize)> {
    let text = std::fs::read_to_string(csv).map_err(|e| Error::io(csv, e))?;
    let t = parse_indicator_csv(&text)?;
    write_atomic(pgm, &pgm_bytes(&t.values, t.nx, t.ny)?)?;
    Ok((t.nx, t.ny))
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Invalid(_) | Error::Parse { .. } | Error::Version { .. } => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        Error::Domain(_)
        | Error::Singular(_)
        | Error::DegenerateCurve(_)
        | Error::Indeterminate { .. }
        | Error::Numerical(_) => EXIT_NUMERIC,
    }
}

/// Sizes the global thread pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| cfg_err(THREADS_ENV, format!("expected a positive integer, got `{raw}`")))?;
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}

#[derive(Parser, Debug)]
#[command(
    name = "elastocavity",
    version,
    about = "Elastic cavity scattering and factorization-method imaging"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario config (dataset, indicator CSV, PGM, manifest).
    Run { config: PathBuf },
    /// Render an indicator CSV as a binary PGM.
    Render { csv: PathBuf, pgm: PathBuf },
    /// List the built-in scenario presets.
    Presets,
}

/// Entry point used by the binary; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    let result = match cli.command {
        Command::Presets => {
            print!("{}", list_presets());
            Ok(())
        }
        Command::Render { csv, pgm } => render(&csv, &pgm).map(|(w, h)| println!("wrote {} ({w}×{h})", pgm.display())),
        Command::Run { config } => load_config(&config).and_then(|c| run(&c)).map(|r| {
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            println!("dataset  {}", r.dataset.display());
            println!("csv      {}", r.csv.display());
            if let Some(p) = &r.pgm {
                println!("pgm      {}", p.display());
            }
            println!("manifest {}", r.manifest.display());
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
