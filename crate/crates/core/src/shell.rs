//! Command-line front end: `key=value` run configuration, dispatch to the
//! pipelines, and the JSON/CSV artifacts they produce.
//!
//! A configuration document is one `key=value` pair per line. Blank lines and
//! lines starting with `#` are skipped, and a repeated key overrides the
//! earlier one. [`render`] writes every key, so `parse_config(&render(c))`
//! reproduces `c`.

use std::fmt::Write as _;
use std::io;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::fockspace::{self, Tensor};
use crate::hfcore::{self, AtomConfig, GridParams, ScfParams};
use crate::pseudopot;
use crate::quasiparticle::{self as qp, CMatrix, SelfEnergyModel};
use crate::radial::{self, MIN_OPERATOR_POINTS};
use crate::relspectrum;

pub const EXIT_OK: i32 = 0;
/// A verification harness found a violated identity.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

/// Largest momentum mesh accepted for `qp`; every sweep point inverts a
/// dense matrix of this order.
pub const MAX_K_POINTS: usize = 1024;

/// Cyclic-identity residuals below this count as exact.
pub const CYCLIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Scf,
    Pseudo,
    Qp,
    Spectrum,
    Verify,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Scf,
        Command::Pseudo,
        Command::Qp,
        Command::Spectrum,
        Command::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Scf => "scf",
            Command::Pseudo => "pseudo",
            Command::Qp => "qp",
            Command::Spectrum => "spectrum",
            Command::Verify => "verify",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// A `(n, l)` level such as `2s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Level {
    pub n: usize,
    pub l: usize,
}

impl Level {
    pub fn label(&self) -> String {
        radial::shell_label(self.n, self.l)
    }

    fn parse(s: &str) -> Option<Self> {
        let letter = s.chars().last()?;
        let l = radial::l_from_letter(letter)?;
        let n: usize = s[..s.len() - letter.len_utf8()].parse().ok()?;
        (n >= 1 && l < n).then_some(Level { n, l })
    }
}

/// Self-energy model as written in a config: `zero`, `constant_shift:c` or
/// `polynomial:c0,c1,...`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SigmaSpec {
    Zero,
    ConstantShift(f64),
    Polynomial(Vec<f64>),
}

impl SigmaSpec {
    pub fn model(&self) -> SelfEnergyModel {
        match self {
            SigmaSpec::Zero => SelfEnergyModel::Zero,
            SigmaSpec::ConstantShift(c) => SelfEnergyModel::ConstantShift(*c),
            SigmaSpec::Polynomial(c) => SelfEnergyModel::DiagonalPolynomial { coeffs: c.clone() },
        }
    }

    fn render(&self) -> String {
        match self {
            SigmaSpec::Zero => "zero".into(),
            SigmaSpec::ConstantShift(c) => format!("constant_shift:{c:?}"),
            SigmaSpec::Polynomial(c) => format!("polynomial:{}", join_f64(c)),
        }
    }
}

/// Quasiparticle run: band `ε(k) = eps0 + k²/(2 band_mass)` on a momentum
/// mesh, dressed by `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpConfig {
    pub sigma: SigmaSpec,
    pub eps0: f64,
    pub band_mass: f64,
    pub k_points: usize,
    pub k_max: f64,
    pub eta: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub e_steps: usize,
    pub particles: usize,
    pub offset_c: f64,
    pub light_threshold: f64,
}

impl Default for QpConfig {
    fn default() -> Self {
        QpConfig {
            sigma: SigmaSpec::Zero,
            eps0: 0.0,
            band_mass: 1.0,
            k_points: qp::DEFAULT_K_POINTS,
            k_max: qp::DEFAULT_K_MAX,
            eta: qp::DEFAULT_ETA,
            e_min: -1.0,
            e_max: 3.0,
            e_steps: 201,
            particles: 1,
            offset_c: 0.0,
            light_threshold: qp::DEFAULT_LIGHT_THRESHOLD,
        }
    }
}

/// Grid of the boson series; every `(n, k, gamma)` combination is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumConfig {
    pub m: f64,
    pub gamma: Vec<f64>,
    pub n: Vec<i64>,
    pub k: Vec<i64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            m: 1.0,
            gamma: vec![0.1],
            n: vec![1],
            k: vec![1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyTarget {
    Fock,
    Cyclic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VerifyConfig {
    pub target: VerifyTarget,
    pub modes: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            target: VerifyTarget::Fock,
            modes: 4,
            trials: 100,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub format: OutputFormat,
    /// `None` writes to standard output.
    pub path: Option<String>,
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub atom: AtomConfig,
    /// Valence level for `pseudo`; defaults to the last listed shell.
    pub valence: Option<Level>,
    /// Orbital written by `scf` in CSV mode; defaults to the first shell.
    pub orbital: Option<Level>,
    pub qp: QpConfig,
    pub spectrum: SpectrumConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Defaults for every section, hydrogen as the atom.
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            atom: AtomConfig {
                z: 1.0,
                shells: vec![hfcore::Shell::new(1, 0, 1.0)],
                grid: GridParams::default(),
                scf: ScfParams::default(),
            },
            valence: None,
            orbital: None,
            qp: QpConfig::default(),
            spectrum: SpectrumConfig::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig {
                format: OutputFormat::Json,
                path: None,
            },
        }
    }

    /// Cross-field checks that single keys cannot see.
    pub fn validate(&self) -> Result<()> {
        self.atom.validate()?;
        for (key, level) in [("valence", self.valence), ("orbital", self.orbital)] {
            if let Some(v) = level {
                if !self.atom.shells.iter().any(|s| s.n == v.n && s.l == v.l) {
                    return Err(Error::param(key, format!("{} is not among the configured shells", v.label())));
                }
            }
        }
        let q = &self.qp;
        if q.e_min > q.e_max {
            return Err(Error::param("e_max", format!("must not be below e_min = {}", q.e_min)));
        }
        if self.command == Command::Verify && self.output.format == OutputFormat::Csv {
            return Err(Error::param("format", "verify writes JSON only"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

const ATOM_KEYS: &[&str] = &[
    "z",
    "shells",
    "r_min",
    "r_max",
    "points",
    "max_iter",
    "mixing",
    "tol_energy",
    "tol_orbital",
];

const RUN_KEYS: &[&str] = &[
    "command",
    "valence",
    "orbital",
    "sigma",
    "eps0",
    "band_mass",
    "k_points",
    "k_max",
    "eta",
    "e_min",
    "e_max",
    "e_steps",
    "particles",
    "offset_c",
    "light_threshold",
    "m",
    "gamma",
    "n",
    "k",
    "target",
    "modes",
    "trials",
    "seed",
    "format",
    "out",
];

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
    /// One-based column where the value starts.
    column: usize,
}

fn scan(text: &str, allowed: &dyn Fn(&str) -> bool, first_line: usize) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = first_line + i;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indent = raw.chars().count() - trimmed.chars().count();
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(Error::Syntax {
                line,
                column: raw.trim_end().chars().count() + 1,
                message: "expected `key=value`".into(),
            });
        };
        let key = key.trim_end();
        if key.is_empty() {
            return Err(Error::Syntax {
                line,
                column: indent + 1,
                message: "empty key".into(),
            });
        }
        if !allowed(key) {
            return Err(Error::Syntax {
                line,
                column: indent + 1,
                message: format!("unknown key `{key}`"),
            });
        }
        let before_value = indent + trimmed.split_once('=').map(|(k, _)| k.chars().count()).unwrap_or(0) + 1;
        let lead = value.chars().count() - value.trim_start().chars().count();
        out.push(Entry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line,
            column: before_value + lead + 1,
        });
    }
    Ok(out)
}

fn value_error(e: &Entry, what: &str) -> Error {
    Error::Syntax {
        line: e.line,
        column: e.column,
        message: format!("`{}`: expected {what}, got `{}`", e.key, e.value),
    }
}

fn parse_f64(e: &Entry) -> Result<f64> {
    e.value.parse::<f64>().map_err(|_| value_error(e, "a number"))
}

fn parse_usize(e: &Entry) -> Result<usize> {
    e.value.parse::<usize>().map_err(|_| value_error(e, "a non-negative integer"))
}

fn parse_f64_list(e: &Entry) -> Result<Vec<f64>> {
    let v: Vec<f64> = e
        .value
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| value_error(e, "a comma-separated list of numbers"))?;
    Ok(v)
}

/// `1,2,5` or the inclusive range `1..4`.
fn parse_i64_list(e: &Entry) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for part in e.value.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once("..") {
            let a: i64 = a.trim().parse().map_err(|_| value_error(e, "an integer range `a..b`"))?;
            let b: i64 = b.trim().parse().map_err(|_| value_error(e, "an integer range `a..b`"))?;
            if b < a {
                return Err(Error::param(e.key.clone(), format!("empty range {a}..{b}")));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| value_error(e, "a comma-separated list of integers"))?);
        }
    }
    Ok(out)
}

fn positive(key: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::param(key, format!("must be positive, got {x}")))
    }
}

fn finite(key: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::param(key, format!("must be finite, got {x}")))
    }
}

fn at_least(key: &str, x: usize, min: usize) -> Result<usize> {
    if x >= min {
        Ok(x)
    } else {
        Err(Error::param(key, format!("must be at least {min}, got {x}")))
    }
}

fn apply_atom_entry(atom: &mut AtomConfig, e: &Entry) -> Result<()> {
    let k = e.key.as_str();
    match k {
        "z" => atom.z = positive(k, parse_f64(e)?)?,
        "shells" => atom.shells = hfcore::parse_shells(&e.value)?,
        "r_min" => {
            atom.grid.r_min = if e.value == "auto" {
                None
            } else {
                Some(positive(k, parse_f64(e)?)?)
            }
        }
        "r_max" => atom.grid.r_max = positive(k, parse_f64(e)?)?,
        "points" => atom.grid.points = at_least(k, parse_usize(e)?, MIN_OPERATOR_POINTS)?,
        "max_iter" => atom.scf.max_iter = at_least(k, parse_usize(e)?, 1)?,
        "mixing" => {
            let a = parse_f64(e)?;
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::param(k, format!("must lie in (0, 1], got {a}")));
            }
            atom.scf.mixing = a;
        }
        "tol_energy" => atom.scf.tol_energy = positive(k, parse_f64(e)?)?,
        "tol_orbital" => atom.scf.tol_orbital = positive(k, parse_f64(e)?)?,
        _ => return Err(Error::Internal(format!("unhandled atom key {k}"))),
    }
    Ok(())
}

fn parse_level(e: &Entry) -> Result<Level> {
    Level::parse(&e.value).ok_or_else(|| Error::param(e.key.clone(), format!("`{}` is not a level like 2s", e.value)))
}

fn parse_sigma(e: &Entry) -> Result<SigmaSpec> {
    let (kind, params) = match e.value.split_once(':') {
        Some((k, p)) => (k.trim(), Some(p)),
        None => (e.value.as_str(), None),
    };
    let numbers = |p: Option<&str>| -> Result<Vec<f64>> {
        let p = p.ok_or_else(|| Error::param("sigma", format!("`{kind}` needs parameters after `:`")))?;
        let sub = Entry {
            value: p.trim().to_string(),
            ..e.clone()
        };
        let v = parse_f64_list(&sub)?;
        for x in &v {
            finite("sigma", *x)?;
        }
        Ok(v)
    };
    match kind {
        "zero" if params.is_none() => Ok(SigmaSpec::Zero),
        "constant_shift" => {
            let v = numbers(params)?;
            if v.len() != 1 {
                return Err(Error::param("sigma", "constant_shift takes exactly one value"));
            }
            Ok(SigmaSpec::ConstantShift(v[0]))
        }
        "polynomial" => Ok(SigmaSpec::Polynomial(numbers(params)?)),
        _ => Err(Error::param(
            "sigma",
            format!("`{}`: expected zero, constant_shift:<c> or polynomial:<c0,c1,..>", e.value),
        )),
    }
}

fn apply_run_entry(cfg: &mut RunConfig, e: &Entry) -> Result<()> {
    let k = e.key.as_str();
    if ATOM_KEYS.contains(&k) {
        return apply_atom_entry(&mut cfg.atom, e);
    }
    let q = &mut cfg.qp;
    let s = &mut cfg.spectrum;
    let v = &mut cfg.verify;
    match k {
        "command" => {
            cfg.command = Command::from_name(&e.value)
                .ok_or_else(|| Error::param(k, format!("unknown command `{}`", e.value)))?
        }
        "valence" => cfg.valence = Some(parse_level(e)?),
        "orbital" => cfg.orbital = Some(parse_level(e)?),
        "sigma" => q.sigma = parse_sigma(e)?,
        "eps0" => q.eps0 = finite(k, parse_f64(e)?)?,
        "band_mass" => {
            let m = finite(k, parse_f64(e)?)?;
            if m == 0.0 {
                return Err(Error::param(k, "must be non-zero"));
            }
            q.band_mass = m;
        }
        "k_points" => {
            let n = at_least(k, parse_usize(e)?, 1)?;
            if n > MAX_K_POINTS {
                return Err(Error::param(k, format!("at most {MAX_K_POINTS}, got {n}")));
            }
            q.k_points = n;
        }
        "k_max" => {
            let x = finite(k, parse_f64(e)?)?;
            if x < 0.0 {
                return Err(Error::param(k, "must be non-negative"));
            }
            q.k_max = x;
        }
        "eta" => {
            let x = finite(k, parse_f64(e)?)?;
            if x < 0.0 {
                return Err(Error::param(k, "must be non-negative"));
            }
            q.eta = x;
        }
        "e_min" => q.e_min = finite(k, parse_f64(e)?)?,
        "e_max" => q.e_max = finite(k, parse_f64(e)?)?,
        "e_steps" => q.e_steps = at_least(k, parse_usize(e)?, 1)?,
        "particles" => q.particles = at_least(k, parse_usize(e)?, 1)?,
        "offset_c" => q.offset_c = finite(k, parse_f64(e)?)?,
        "light_threshold" => q.light_threshold = positive(k, parse_f64(e)?)?,
        "m" => s.m = finite(k, parse_f64(e)?)?,
        "gamma" => {
            let g = parse_f64_list(e)?;
            for x in &g {
                if !(*x >= 0.0 && x.is_finite()) {
                    return Err(Error::param(k, format!("must be non-negative, got {x}")));
                }
            }
            s.gamma = g;
        }
        "n" => {
            let n = parse_i64_list(e)?;
            if let Some(bad) = n.iter().find(|x| **x < 1) {
                return Err(Error::param(k, format!("principal quantum number must be >= 1, got {bad}")));
            }
            s.n = n;
        }
        "k" => {
            let ks = parse_i64_list(e)?;
            if ks.contains(&0) {
                return Err(Error::param(k, "k = 0 is outside the domain"));
            }
            s.k = ks;
        }
        "target" => {
            v.target = match e.value.as_str() {
                "fock" => VerifyTarget::Fock,
                "cyclic" => VerifyTarget::Cyclic,
                other => return Err(Error::param(k, format!("unknown target `{other}` (fock, cyclic)"))),
            }
        }
        "modes" => {
            let m = at_least(k, parse_usize(e)?, 1)?;
            if m > fockspace::ENUMERATION_CAP {
                return Err(Error::param(k, format!("at most {}, got {m}", fockspace::ENUMERATION_CAP)));
            }
            v.modes = m;
        }
        "trials" => v.trials = at_least(k, parse_usize(e)?, 1)?,
        "seed" => v.seed = e.value.parse().map_err(|_| value_error(e, "an unsigned integer"))?,
        "format" => {
            cfg.output.format = match e.value.as_str() {
                "json" => OutputFormat::Json,
                "csv" => OutputFormat::Csv,
                other => return Err(Error::param(k, format!("unknown format `{other}` (json, csv)"))),
            }
        }
        "out" => {
            if e.value.is_empty() {
                return Err(Error::param(k, "empty path"));
            }
            cfg.output.path = Some(e.value.clone());
        }
        _ => return Err(Error::Internal(format!("unhandled key {k}"))),
    }
    Ok(())
}

fn build(entries: &[Entry]) -> Result<RunConfig> {
    if !entries.iter().any(|e| e.key == "command") {
        return Err(Error::MissingCommand);
    }
    let mut cfg = RunConfig::new(Command::Scf);
    for e in entries {
        apply_run_entry(&mut cfg, e)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn is_run_key(k: &str) -> bool {
    ATOM_KEYS.contains(&k) || RUN_KEYS.contains(&k)
}

/// Parses a full run configuration. A `command` line is required.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    build(&scan(text, &is_run_key, 1)?)
}

/// Parses a document holding atom keys only (`z`, `shells`, grid and SCF
/// settings) into a validated [`AtomConfig`].
pub fn parse_atom_config(text: &str) -> Result<AtomConfig> {
    let entries = scan(text, &|k| ATOM_KEYS.contains(&k), 1)?;
    if !entries.iter().any(|e| e.key == "z") {
        return Err(Error::param("z", "missing"));
    }
    if !entries.iter().any(|e| e.key == "shells") {
        return Err(Error::param("shells", "missing"));
    }
    let mut atom = RunConfig::new(Command::Scf).atom;
    for e in &entries {
        apply_atom_entry(&mut atom, e)?;
    }
    atom.validate()?;
    Ok(atom)
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn join_i64(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Writes every key of `cfg`, one per line, in a fixed order.
pub fn render(cfg: &RunConfig) -> String {
    let a = &cfg.atom;
    let q = &cfg.qp;
    let s = &cfg.spectrum;
    let v = &cfg.verify;
    let mut out = String::new();
    let mut kv = |k: &str, val: String| {
        let _ = writeln!(out, "{k}={val}");
    };
    kv("command", cfg.command.name().into());
    kv("z", format!("{:?}", a.z));
    kv("shells", hfcore::format_shells(&a.shells));
    kv("r_min", a.grid.r_min.map_or("auto".into(), |r| format!("{r:?}")));
    kv("r_max", format!("{:?}", a.grid.r_max));
    kv("points", a.grid.points.to_string());
    kv("max_iter", a.scf.max_iter.to_string());
    kv("mixing", format!("{:?}", a.scf.mixing));
    kv("tol_energy", format!("{:?}", a.scf.tol_energy));
    kv("tol_orbital", format!("{:?}", a.scf.tol_orbital));
    if let Some(l) = cfg.valence {
        kv("valence", l.label());
    }
    if let Some(l) = cfg.orbital {
        kv("orbital", l.label());
    }
    kv("sigma", q.sigma.render());
    kv("eps0", format!("{:?}", q.eps0));
    kv("band_mass", format!("{:?}", q.band_mass));
    kv("k_points", q.k_points.to_string());
    kv("k_max", format!("{:?}", q.k_max));
    kv("eta", format!("{:?}", q.eta));
    kv("e_min", format!("{:?}", q.e_min));
    kv("e_max", format!("{:?}", q.e_max));
    kv("e_steps", q.e_steps.to_string());
    kv("particles", q.particles.to_string());
    kv("offset_c", format!("{:?}", q.offset_c));
    kv("light_threshold", format!("{:?}", q.light_threshold));
    kv("m", format!("{:?}", s.m));
    kv("gamma", join_f64(&s.gamma));
    kv("n", join_i64(&s.n));
    kv("k", join_i64(&s.k));
    kv(
        "target",
        match v.target {
            VerifyTarget::Fock => "fock".into(),
            VerifyTarget::Cyclic => "cyclic".into(),
        },
    );
    kv("modes", v.modes.to_string());
    kv("trials", v.trials.to_string());
    kv("seed", v.seed.to_string());
    kv(
        "format",
        match cfg.output.format {
            OutputFormat::Json => "json".into(),
            OutputFormat::Csv => "csv".into(),
        },
    );
    if let Some(p) = &cfg.output.path {
        kv("out", p.clone());
    }
    out
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

/// Pretty printer that writes every float with 17 significant digits.
struct FixedFloat(PrettyFormatter<'static>);

impl Formatter for FixedFloat {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with struct field order kept and floats as `{:.16e}`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloat(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Internal(format!("json: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'static str,
    config: &'a RunConfig,
    result: T,
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// What a run produced. `artifact` is JSON or CSV according to the config;
/// `report` is a one-line human summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: i32,
    pub artifact: Option<String>,
    pub report: String,
}

impl Outcome {
    fn failed(e: &Error) -> Self {
        Outcome {
            status: exit_code(e),
            artifact: None,
            report: format!("error: {e}"),
        }
    }
}

/// `2` for numerical non-convergence, `3` for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_DOMAIN,
    }
}

/// Runs the pipeline named by `cfg.command`.
pub fn dispatch(cfg: &RunConfig) -> Outcome {
    let res = cfg.validate().and_then(|_| match cfg.command {
        Command::Scf => run_scf(cfg),
        Command::Pseudo => run_pseudo(cfg),
        Command::Qp => run_qp(cfg),
        Command::Spectrum => run_spectrum(cfg),
        Command::Verify => run_verify(cfg),
    });
    res.unwrap_or_else(|e| Outcome::failed(&e))
}

fn envelope<T: Serialize>(cfg: &RunConfig, result: T) -> Result<String> {
    to_json(&Envelope {
        command: cfg.command.name(),
        config: cfg,
        result,
    })
}

fn r_u_csv(r: &[f64], u: &[f64]) -> String {
    let mut s = String::from("r,u\n");
    for (r, u) in r.iter().zip(u) {
        let _ = writeln!(s, "{r:.16e},{u:.16e}");
    }
    s
}

fn run_scf(cfg: &RunConfig) -> Result<Outcome> {
    let st = hfcore::scf_run(&cfg.atom)?;
    let artifact = match cfg.output.format {
        OutputFormat::Json => envelope(cfg, st.summary())?,
        OutputFormat::Csv => {
            let want = cfg.orbital.unwrap_or(Level {
                n: cfg.atom.shells[0].n,
                l: cfg.atom.shells[0].l,
            });
            let i = st
                .shell_index(want.n, want.l)
                .ok_or_else(|| Error::param("orbital", format!("{} not solved", want.label())))?;
            radial::orbital_csv(&st.orbitals[i], &st.grid)?
        }
    };
    let eig: Vec<String> = st
        .orbitals
        .iter()
        .zip(&st.eigenvalues)
        .map(|(o, e)| format!("eps_{} = {e:.8}", o.label()))
        .collect();
    let report = format!(
        "E = {:.10} hartree after {} iterations ({}); {}",
        st.total_energy,
        st.iterations,
        if st.converged { "converged" } else { "NOT converged" },
        eig.join(", ")
    );
    Ok(Outcome {
        status: if st.converged { EXIT_OK } else { EXIT_NO_CONVERGENCE },
        artifact: Some(artifact),
        report,
    })
}

fn run_pseudo(cfg: &RunConfig) -> Result<Outcome> {
    let last = cfg.atom.shells.last().ok_or_else(|| Error::param("shells", "empty"))?;
    let v = cfg.valence.unwrap_or(Level { n: last.n, l: last.l });
    let st = hfcore::scf_solve(&cfg.atom)?;
    let pk = pseudopot::pk_solve(&st, (v.n, v.l))?;
    let artifact = match cfg.output.format {
        OutputFormat::Json => envelope(cfg, pk.report())?,
        OutputFormat::Csv => r_u_csv(st.grid.points(), &pk.u),
    };
    Ok(Outcome {
        status: EXIT_OK,
        artifact: Some(artifact),
        report: format!(
            "{}: all-electron {:.10}, pseudo {:.10}, {} nodes",
            v.label(),
            pk.eigenvalue_allelectron,
            pk.eigenvalue,
            pk.node_count
        ),
    })
}

#[derive(Serialize)]
struct QpResult {
    mass_operator: qp::MassOperator,
    pair_quantities: qp::PairQuantities,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn run_qp(cfg: &RunConfig) -> Result<Outcome> {
    let q = &cfg.qp;
    let k = qp::momentum_grid(q.k_points, q.k_max)?;
    let sigma = q.sigma.model();
    let h = CMatrix::from_diagonal(&qp::CVector::from_iterator(
        k.len(),
        k.iter().map(|&x| Complex64::new(q.eps0 + x * x / (2.0 * q.band_mass), 0.0)),
    ));
    let mass = qp::mass_operator_eigen(&sigma, &k)?;
    let pair = qp::pair_quantities_with(mass.delta_m0, q.eps0, q.particles, q.offset_c, q.light_threshold)?;
    let report = format!(
        "dM(0) = {:.6e}, gap = {:.6e}, regime {:?}",
        pair.delta_m0, pair.gap, pair.regime
    );
    let artifact = match cfg.output.format {
        OutputFormat::Json => envelope(
            cfg,
            QpResult {
                mass_operator: mass,
                pair_quantities: pair,
            },
        )?,
        OutputFormat::Csv => {
            let energies = linspace(q.e_min, q.e_max, q.e_steps);
            qp::sweep_csv(&qp::resolvent_sweep_on(&h, &sigma, &k, &energies, q.eta)?)
        }
    };
    Ok(Outcome {
        status: EXIT_OK,
        artifact: Some(artifact),
        report,
    })
}

fn run_spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let s = &cfg.spectrum;
    let rows = relspectrum::sweep(s.m, &s.gamma, &s.n, &s.k)?;
    let artifact = match cfg.output.format {
        OutputFormat::Json => envelope(cfg, &rows)?,
        OutputFormat::Csv => relspectrum::sweep_csv(&rows),
    };
    Ok(Outcome {
        status: EXIT_OK,
        artifact: Some(artifact),
        report: format!("{} spectrum rows", rows.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub target: VerifyTarget,
    pub passed: bool,
    /// Largest anticommutator norm or cyclic residual seen.
    pub worst: f64,
    pub checks: usize,
    pub report: String,
}

/// Anticommutators on `modes` modes, or `trials` random antisymmetrized
/// tensors with `n ∈ {2,3,4}`, `dim ∈ {4,5}` checked at every split index.
pub fn verify(v: &VerifyConfig) -> Result<VerifyReport> {
    match v.target {
        VerifyTarget::Fock => {
            let t = fockspace::anticommutator_table(v.modes)?;
            let worst = t.max_entry().abs();
            let passed = t.is_exact();
            Ok(VerifyReport {
                target: v.target,
                passed,
                worst,
                checks: 3 * v.modes * v.modes,
                report: if passed {
                    "all anticommutators exact".into()
                } else {
                    format!("anticommutator deviation {worst:e}")
                },
            })
        }
        VerifyTarget::Cyclic => {
            let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
            let mut worst: f64 = 0.0;
            let mut ok = 0;
            for _ in 0..v.trials {
                let n = rng.gen_range(2..=4);
                let dim = rng.gen_range(4..=5);
                let t = random_tensor(&mut rng, n, dim)?;
                let a = fockspace::antisymmetrize(&t)?;
                let mut trial: f64 = 0.0;
                for k in 1..n {
                    trial = trial.max(fockspace::cyclic_residual(&a, k)?);
                }
                worst = worst.max(trial);
                if trial < CYCLIC_TOL {
                    ok += 1;
                }
            }
            let passed = ok == v.trials;
            Ok(VerifyReport {
                target: v.target,
                passed,
                worst,
                checks: v.trials,
                report: format!("cyclic residual below {CYCLIC_TOL:e} in {ok}/{} trials (worst {worst:e})", v.trials),
            })
        }
    }
}

/// Tensor with independent amplitudes uniform in the unit square.
pub fn random_tensor<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Result<Tensor> {
    let len = dim.pow(n as u32);
    let amps = (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    Tensor::from_amplitudes(n, dim, amps)
}

fn run_verify(cfg: &RunConfig) -> Result<Outcome> {
    let r = verify(&cfg.verify)?;
    Ok(Outcome {
        status: if r.passed { EXIT_OK } else { EXIT_CHECK_FAILED },
        report: r.report.clone(),
        artifact: Some(envelope(cfg, r)?),
    })
}

// ---------------------------------------------------------------------------
// CLI
// ---------------------------------------------------------------------------

pub const USAGE: &str = "usage: polar-scf <scf|pseudo|qp|spectrum|verify> [target] \
[--config FILE] [--out PATH] [--key value | key=value ...]";

/// Builds the run configuration from command-line arguments (program name
/// excluded). Settings apply in the order: config file, command and target,
/// then overrides left to right.
pub fn config_from_args(args: &[String]) -> Result<RunConfig> {
    let mut file_text = String::new();
    let mut overrides: Vec<String> = Vec::new();
    let mut positional: Vec<String> = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        if let Some(flag) = a.strip_prefix("--") {
            let (key, value) = match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    i += 1;
                    let v = args
                        .get(i)
                        .ok_or_else(|| Error::param(flag, "flag needs a value"))?;
                    (flag.to_string(), v.clone())
                }
            };
            if key == "config" {
                file_text = std::fs::read_to_string(&value)
                    .map_err(|e| Error::Io(format!("{value}: {e}")))?;
            } else {
                overrides.push(format!("{key}={value}"));
            }
        } else if a.contains('=') {
            overrides.push(a.clone());
        } else {
            positional.push(a.clone());
        }
        i += 1;
    }
    let mut head = Vec::new();
    match positional.as_slice() {
        [] => {}
        [cmd] => head.push(format!("command={cmd}")),
        [cmd, target] if cmd == "verify" => {
            head.push(format!("command={cmd}"));
            head.push(format!("target={target}"));
        }
        _ => return Err(Error::param("command", format!("unexpected arguments {positional:?}"))),
    }
    let mut entries = scan(&file_text, &is_run_key, 1)?;
    // Argument-supplied settings are numbered after the file's lines.
    let after = file_text.lines().count() + 1;
    entries.extend(scan(&head.join("\n"), &is_run_key, after)?);
    entries.extend(scan(&overrides.join("\n"), &is_run_key, after + head.len())?);
    build(&entries)
}

/// Writes `out` where `cfg` asks. A CSV written to a file gets a sidecar
/// `<path>.config` holding the resolved configuration.
pub fn write_outcome(cfg: &RunConfig, out: &Outcome) -> Result<()> {
    let Some(body) = &out.artifact else {
        return Ok(());
    };
    match &cfg.output.path {
        Some(p) => {
            std::fs::write(p, body)?;
            if cfg.output.format == OutputFormat::Csv {
                std::fs::write(format!("{p}.config"), render(cfg))?;
            }
        }
        None => print!("{body}"),
    }
    Ok(())
}

/// Full command-line run; returns the process exit code.
pub fn run_cli(args: &[String]) -> i32 {
    if args.is_empty() || args.iter().any(|a| a == "--help" || a == "-h") {
        eprintln!("{USAGE}");
        return if args.is_empty() { EXIT_DOMAIN } else { EXIT_OK };
    }
    let cfg = match config_from_args(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::MissingCommand) {
                eprintln!("{USAGE}");
            }
            return exit_code(&e);
        }
    };
    let out = dispatch(&cfg);
    if let Err(e) = write_outcome(&cfg, &out) {
        eprintln!("error: {e}");
        return EXIT_DOMAIN;
    }
    eprintln!("{}", out.report);
    out.status
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_document() {
        let a = parse_atom_config("z=2\nshells=1s:2").unwrap();
        assert_eq!(a.z, 2.0);
        assert_eq!(a.shells, vec![hfcore::Shell::new(1, 0, 2.0)]);
        assert_eq!(a.grid, GridParams::default());
    }

    #[test]
    fn zero_charge_names_z() {
        let e = parse_config("command=scf\nz=0").unwrap_err();
        assert!(matches!(e, Error::Parameter { ref name, .. } if name == "z"), "{e}");
        let e = parse_atom_config("z=0\nshells=1s:1").unwrap_err();
        assert!(matches!(e, Error::Parameter { ref name, .. } if name == "z"), "{e}");
    }

    #[test]
    fn empty_document_has_no_command() {
        assert_eq!(parse_config(""), Err(Error::MissingCommand));
        assert_eq!(parse_config("# nothing\n\n"), Err(Error::MissingCommand));
        assert_eq!(Error::MissingCommand.to_string(), "missing command");
    }

    #[test]
    fn unknown_key_reports_position() {
        let e = parse_config("command=scf\n\n  zz=3\n").unwrap_err();
        assert_eq!(
            e,
            Error::Syntax {
                line: 3,
                column: 3,
                message: "unknown key `zz`".into()
            }
        );
        let e = parse_config("command=scf\nz 2").unwrap_err();
        assert!(matches!(e, Error::Syntax { line: 2, column: 4, .. }), "{e:?}");
        let e = parse_config("command=scf\nz= abc").unwrap_err();
        assert!(matches!(e, Error::Syntax { line: 2, column: 4, .. }), "{e:?}");
    }

    #[test]
    fn later_keys_override() {
        let c = parse_config("command=scf\nz=2\nshells=1s:2\nz=3\nshells=1s:2,2s:1\ncommand=spectrum").unwrap();
        assert_eq!(c.command, Command::Spectrum);
        assert_eq!(c.atom.z, 3.0);
    }

    #[test]
    fn domain_errors_name_keys() {
        for (doc, key) in [
            ("command=scf\nmixing=0", "mixing"),
            ("command=spectrum\nk=1,0", "k"),
            ("command=spectrum\nn=0..2", "n"),
            ("command=qp\nsigma=cubic", "sigma"),
            ("command=verify\nmodes=9", "modes"),
            ("command=scf\nshells=1s:3", "occupation"),
            ("command=pseudo\nvalence=3s", "valence"),
            ("command=verify\nformat=csv", "format"),
        ] {
            let e = parse_config(doc).unwrap_err();
            assert!(matches!(e, Error::Parameter { ref name, .. } if name == key), "{doc}: {e}");
        }
    }

    #[test]
    fn render_round_trip_of_defaults() {
        for c in Command::ALL {
            let cfg = RunConfig::new(c);
            assert_eq!(parse_config(&render(&cfg)).unwrap(), cfg);
        }
    }

    #[test]
    fn ranges_and_lists() {
        let c = parse_config("command=spectrum\nn=1..3,7\nk=-2,1\ngamma=0,0.05,0.1").unwrap();
        assert_eq!(c.spectrum.n, vec![1, 2, 3, 7]);
        assert_eq!(c.spectrum.k, vec![-2, 1]);
        assert_eq!(c.spectrum.gamma, vec![0.0, 0.05, 0.1]);
    }

    #[test]
    fn cli_arguments() {
        let args: Vec<String> = ["verify", "fock", "--modes", "4"].iter().map(|s| s.to_string()).collect();
        let c = config_from_args(&args).unwrap();
        assert_eq!(c.command, Command::Verify);
        assert_eq!(c.verify.target, VerifyTarget::Fock);
        assert_eq!(c.verify.modes, 4);
        let args: Vec<String> = ["spectrum", "gamma=0.2", "--format=csv"].iter().map(|s| s.to_string()).collect();
        let c = config_from_args(&args).unwrap();
        assert_eq!(c.spectrum.gamma, vec![0.2]);
        assert_eq!(c.output.format, OutputFormat::Csv);
        assert_eq!(config_from_args(&["z=2".to_string()]), Err(Error::MissingCommand));
    }

    #[test]
    fn verify_fock_is_exact() {
        let mut cfg = RunConfig::new(Command::Verify);
        cfg.verify.modes = 4;
        let out = dispatch(&cfg);
        assert_eq!(out.status, EXIT_OK);
        assert_eq!(out.report, "all anticommutators exact");
        assert!(out.artifact.unwrap().contains("\"passed\": true"));
    }

    #[test]
    fn spectrum_csv_row() {
        let mut cfg = parse_config("command=spectrum\nm=1\ngamma=0.1\nn=1\nk=1\nformat=csv").unwrap();
        let out = dispatch(&cfg);
        assert_eq!(out.status, EXIT_OK);
        let csv = out.artifact.unwrap();
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert!((row[6].parse::<f64>().unwrap() - 0.494987625).abs() < 1e-12);
        cfg.output.format = OutputFormat::Json;
        assert!(dispatch(&cfg).artifact.unwrap().starts_with("{\n  \"command\": \"spectrum\""));
    }

    #[test]
    fn failures_map_to_exit_codes() {
        let mut cfg = RunConfig::new(Command::Spectrum);
        cfg.spectrum.k = vec![0];
        let out = dispatch(&cfg);
        assert_eq!(out.status, EXIT_DOMAIN);
        assert!(out.artifact.is_none());
        let mut cfg = RunConfig::new(Command::Scf);
        cfg.atom.z = 2.0;
        cfg.atom.shells = vec![hfcore::Shell::new(1, 0, 2.0)];
        cfg.atom.grid.points = 400;
        cfg.atom.scf.max_iter = 2;
        let out = dispatch(&cfg);
        assert_eq!(out.status, EXIT_NO_CONVERGENCE);
        assert!(out.artifact.unwrap().contains("\"converged\": false"));
    }

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json(&vec![0.1f64, -2.0]).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("-2.0000000000000000e0"), "{s}");
        let v: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(v, vec![0.1, -2.0]);
    }
}
