//! Line-oriented `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::background::{build_background, BackgroundFlow};
use crate::error::{Error, Result};
use crate::friction::FrictionModel;
use crate::geometry::{build_grid, ChannelGeometry, GapProfile, MappedGrid};
use crate::solver::SolverConfig;

const MAX_MODE: usize = 64;
/// Fraction of the CFL limit used when `dt` is derived.
pub const CFL_SAFETY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Zero,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitSection {
    pub kind: InitKind,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackgroundSection {
    pub u0: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisSection {
    pub l: f64,
    pub dt_sample: f64,
    pub ensemble: usize,
    pub t_burn: f64,
    pub seed: Option<u64>,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    pub out: Option<String>,
    pub checkpoint_final: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub geometry: ChannelGeometry,
    pub background: BackgroundSection,
    pub friction: FrictionModel,
    pub solver: SolverConfig,
    pub init: InitSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

/// Keys that must appear in every config.
pub const MANDATORY_KEYS: [&str; 9] = ["L", "h.mean", "Nq", "Ns", "U0", "k", "delta", "nu", "T_end"];

const SCALAR_KEYS: [&str; 27] = [
    "L",
    "h.mean",
    "Nq",
    "Ns",
    "U0",
    "alpha",
    "k",
    "delta",
    "eps_floor",
    "nu",
    "dt",
    "cfl",
    "proj_tol",
    "picard_tol",
    "picard_max",
    "T_end",
    "snapshot_dt",
    "init.kind",
    "init.amplitude",
    "l",
    "dt_sample",
    "ensemble",
    "t_burn",
    "seed",
    "eta",
    "out",
    "checkpoint_final",
];

struct Entry {
    line: usize,
    value: String,
}

struct Table {
    scalars: BTreeMap<String, Entry>,
    cos: BTreeMap<usize, (usize, f64)>,
    sin: BTreeMap<usize, (usize, f64)>,
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn mode_key(key: &str, line: usize) -> Result<Option<(bool, usize)>> {
    let (is_cos, rest) = if let Some(r) = key.strip_prefix("h.cos[") {
        (true, r)
    } else if let Some(r) = key.strip_prefix("h.sin[") {
        (false, r)
    } else {
        return Ok(None);
    };
    let idx = rest
        .strip_suffix(']')
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|k| (1..=MAX_MODE).contains(k))
        .ok_or_else(|| bad(line, format!("`{key}`: mode index must be an integer in 1..={MAX_MODE}")))?;
    Ok(Some((is_cos, idx)))
}

fn tokenize(text: &str) -> Result<Table> {
    let mut t = Table {
        scalars: BTreeMap::new(),
        cos: BTreeMap::new(),
        sin: BTreeMap::new(),
    };
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| bad(line, format!("expected `key = value`, got `{body}`")))?;
        let (key, value) = (k.trim(), v.trim());
        if value.is_empty() {
            return Err(bad(line, format!("`{key}` has no value")));
        }
        if let Some((is_cos, idx)) = mode_key(key, line)? {
            let x = parse_f64(key, value, line)?;
            let map = if is_cos { &mut t.cos } else { &mut t.sin };
            if map.insert(idx, (line, x)).is_some() {
                return Err(bad(line, format!("duplicate key `{key}`")));
            }
            continue;
        }
        if !SCALAR_KEYS.contains(&key) {
            return Err(bad(line, format!("unknown key `{key}`")));
        }
        let prev = t.scalars.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
            },
        );
        if prev.is_some() {
            return Err(bad(line, format!("duplicate key `{key}`")));
        }
    }
    Ok(t)
}

fn parse_f64(key: &str, value: &str, line: usize) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(line, format!("`{key}` expects a finite number, got `{value}`")))
}

impl Table {
    fn line(&self, key: &str) -> usize {
        self.scalars.get(key).map_or(0, |e| e.line)
    }

    fn f64_or(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.scalars.get(key) {
            Some(e) => parse_f64(key, &e.value, e.line),
            None => default.ok_or_else(|| Error::ConfigMissing(format!("missing mandatory key `{key}`"))),
        }
    }

    fn usize_or(&self, key: &str, default: Option<usize>) -> Result<usize> {
        match self.scalars.get(key) {
            Some(e) => e
                .value
                .parse::<usize>()
                .map_err(|_| bad(e.line, format!("`{key}` expects a non-negative integer, got `{}`", e.value))),
            None => default.ok_or_else(|| Error::ConfigMissing(format!("missing mandatory key `{key}`"))),
        }
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let v = self.f64_or(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(bad(self.line(key), format!("`{key}` must be positive, got {v}")))
        }
    }

    fn non_negative(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let v = self.f64_or(key, default)?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(bad(self.line(key), format!("`{key}` must be non-negative, got {v}")))
        }
    }

    fn modes(map: &BTreeMap<usize, (usize, f64)>) -> Vec<f64> {
        let n = map.keys().next_back().copied().unwrap_or(0);
        (1..=n).map(|k| map.get(&k).map_or(0.0, |e| e.1)).collect()
    }
}

fn is_multiple(span: f64, step: f64) -> bool {
    let r = span / step;
    (r - r.round()).abs() <= 1e-9 * r.abs().max(1.0)
}

/// Parse and validate a config, materializing every default.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let t = tokenize(text)?;
    let period = t.positive("L", None)?;
    let mean = t.positive("h.mean", None)?;
    let nq = t.usize_or("Nq", None)?;
    let ns = t.usize_or("Ns", None)?;
    let gap = GapProfile {
        mean,
        cos: Table::modes(&t.cos),
        sin: Table::modes(&t.sin),
    };
    let geometry = ChannelGeometry::new(period, gap, nq, ns).map_err(|e| bad(t.line("Nq"), e.to_string()))?;
    let u0 = t.f64_or("U0", None)?;
    let alpha = t.f64_or("alpha", Some(0.5))?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(bad(t.line("alpha"), format!("`alpha` must lie in (0, 1], got {alpha}")));
    }
    let background = BackgroundSection { u0, alpha };
    let k = t.non_negative("k", None)?;
    let delta = t.f64_or("delta", None)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(bad(t.line("delta"), format!("`delta` must lie in (0, 1], got {delta}")));
    }
    let eps_floor = t.positive("eps_floor", Some(1e-6))?;
    let friction = FrictionModel { k, delta, eps_floor };

    let nu = t.positive("nu", None)?;
    let cfl = t.positive("cfl", Some(0.5))?;
    let t_end = t.non_negative("T_end", None)?;
    let snapshot_dt = t.positive("snapshot_dt", Some(0.1))?;
    let init_kind = match t.scalars.get("init.kind") {
        None => InitKind::Zero,
        Some(e) => match e.value.as_str() {
            "zero" => InitKind::Zero,
            "random" => InitKind::Random,
            other => return Err(bad(e.line, format!("`init.kind` expects zero or random, got `{other}`"))),
        },
    };
    let amplitude = t.non_negative("init.amplitude", Some(1.0))?;
    let seed = match t.scalars.get("seed") {
        None => None,
        Some(e) => Some(
            e.value
                .parse::<u64>()
                .map_err(|_| bad(e.line, format!("`seed` expects an unsigned integer, got `{}`", e.value)))?,
        ),
    };
    if init_kind == InitKind::Random && seed.is_none() {
        return Err(Error::ConfigMissing("`seed` is mandatory when `init.kind = random`".into()));
    }
    let dt = match t.scalars.get("dt") {
        Some(_) => t.positive("dt", None)?,
        None => {
            let grid = build_grid(&geometry).map_err(|e| bad(0, e.to_string()))?;
            let speed = u0.abs() + amplitude;
            let target = if speed > 0.0 {
                CFL_SAFETY * cfl * grid.min_spacing() / speed
            } else {
                snapshot_dt
            };
            snapshot_dt / (snapshot_dt / target).ceil()
        }
    };
    if !is_multiple(snapshot_dt, dt) {
        return Err(bad(t.line("snapshot_dt"), format!("`snapshot_dt` = {snapshot_dt} is not a multiple of dt = {dt}")));
    }
    if !is_multiple(t_end, snapshot_dt) {
        return Err(bad(t.line("T_end"), format!("`T_end` = {t_end} is not a multiple of snapshot_dt = {snapshot_dt}")));
    }
    let solver = SolverConfig {
        nu,
        dt,
        cfl,
        proj_tol: t.positive("proj_tol", Some(1e-10))?,
        picard_tol: t.positive("picard_tol", Some(1e-10))?,
        picard_max: t.usize_or("picard_max", Some(100))?,
        t_end,
        snapshot_dt,
    };
    solver.validate().map_err(|e| bad(t.line("picard_max"), e.to_string()))?;

    let dt_sample = t.positive("dt_sample", Some(snapshot_dt))?;
    if !is_multiple(dt_sample, snapshot_dt) {
        return Err(bad(t.line("dt_sample"), format!("`dt_sample` = {dt_sample} is not a multiple of snapshot_dt = {snapshot_dt}")));
    }
    let l = t.positive("l", Some(1.0))?;
    if !is_multiple(l, dt_sample) {
        return Err(bad(t.line("l"), format!("`l` = {l} is not a multiple of dt_sample = {dt_sample}")));
    }
    let analysis = AnalysisSection {
        l,
        dt_sample,
        ensemble: t.usize_or("ensemble", Some(50))?,
        t_burn: t.non_negative("t_burn", Some(0.0))?,
        seed,
        eta: t.positive("eta", Some(0.5))?,
    };
    let checkpoint_final = match t.scalars.get("checkpoint_final") {
        None => true,
        Some(e) => e
            .value
            .parse::<bool>()
            .map_err(|_| bad(e.line, format!("`checkpoint_final` expects true or false, got `{}`", e.value)))?,
    };
    let output = OutputSection {
        out: t.scalars.get("out").map(|e| e.value.clone()),
        checkpoint_final,
    };
    Ok(RunConfig {
        geometry,
        background,
        friction,
        solver,
        init: InitSection { kind: init_kind, amplitude },
        analysis,
        output,
    })
}

impl RunConfig {
    /// Canonical text with every key spelled out; reparses to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = &self.geometry;
        let _ = writeln!(s, "L = {:?}", g.period);
        let _ = writeln!(s, "h.mean = {:?}", g.gap.mean);
        for (k, c) in g.gap.cos.iter().enumerate() {
            let _ = writeln!(s, "h.cos[{}] = {:?}", k + 1, c);
        }
        for (k, c) in g.gap.sin.iter().enumerate() {
            let _ = writeln!(s, "h.sin[{}] = {:?}", k + 1, c);
        }
        let _ = writeln!(s, "Nq = {}", g.nq);
        let _ = writeln!(s, "Ns = {}", g.ns);
        let _ = writeln!(s, "U0 = {:?}", self.background.u0);
        let _ = writeln!(s, "alpha = {:?}", self.background.alpha);
        let f = &self.friction;
        let _ = writeln!(s, "k = {:?}\ndelta = {:?}\neps_floor = {:?}", f.k, f.delta, f.eps_floor);
        let c = &self.solver;
        let _ = writeln!(s, "nu = {:?}\ndt = {:?}\ncfl = {:?}", c.nu, c.dt, c.cfl);
        let _ = writeln!(s, "proj_tol = {:?}\npicard_tol = {:?}\npicard_max = {}", c.proj_tol, c.picard_tol, c.picard_max);
        let _ = writeln!(s, "T_end = {:?}\nsnapshot_dt = {:?}", c.t_end, c.snapshot_dt);
        let kind = match self.init.kind {
            InitKind::Zero => "zero",
            InitKind::Random => "random",
        };
        let _ = writeln!(s, "init.kind = {kind}\ninit.amplitude = {:?}", self.init.amplitude);
        let a = &self.analysis;
        let _ = writeln!(s, "l = {:?}\ndt_sample = {:?}\nensemble = {}", a.l, a.dt_sample, a.ensemble);
        let _ = writeln!(s, "t_burn = {:?}", a.t_burn);
        if let Some(seed) = a.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        let _ = writeln!(s, "eta = {:?}", a.eta);
        if let Some(out) = &self.output.out {
            let _ = writeln!(s, "out = {out}");
        }
        let _ = writeln!(s, "checkpoint_final = {}", self.output.checkpoint_final);
        s
    }

    pub fn grid(&self) -> Result<MappedGrid> {
        build_grid(&self.geometry)
    }

    pub fn background_flow(&self, grid: &MappedGrid) -> Result<BackgroundFlow> {
        build_background(self.background.u0, self.background.alpha, grid, self.solver.nu)
    }

    /// The seed, or an error naming the operation that needed it.
    pub fn require_seed(&self, what: &str) -> Result<u64> {
        self.analysis
            .seed
            .ok_or_else(|| Error::ConfigMissing(format!("`seed` is mandatory for {what}")))
    }
}
