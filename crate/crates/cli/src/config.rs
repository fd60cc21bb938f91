//! `key = value` run configuration grouped under bracketed sections.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use evolve_surf::{Diffusion, Preset, Rect};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceConfig {
    pub preset: Preset,
    pub domain: Rect,
    /// Final time `T`.
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionConfig {
    Constant { value: f64 },
    Bump { base: f64, amplitude: f64 },
}

impl DiffusionConfig {
    pub fn build(&self) -> Diffusion {
        match *self {
            DiffusionConfig::Constant { value } => Diffusion::constant(value),
            DiffusionConfig::Bump { base, amplitude } => Diffusion::bump(base, amplitude),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n1: usize,
    pub n2: usize,
    /// Step for finite-difference chart derivatives.
    pub h_fd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    pub dt: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Direct,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mode: SolverMode,
    pub tol: f64,
    pub max_iter: usize,
    pub probes: usize,
    pub margin: f64,
    pub seed: u64,
    pub mms_levels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub stride: usize,
    pub dump_matrices: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub surface: SurfaceConfig,
    pub diffusion: DiffusionConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

const SECTIONS: [&str; 6] = ["surface", "diffusion", "grid", "time", "solver", "output"];

fn known_keys(section: &str) -> &'static [&'static str] {
    match section {
        "surface" => &["preset", "gamma", "epsilon", "omega", "speed", "domain", "T"],
        "diffusion" => &["preset", "value", "base", "amplitude"],
        "grid" => &["n1", "n2", "h_fd"],
        "time" => &["dt", "theta"],
        "solver" => &["mode", "tol", "max_iter", "probes", "margin", "seed", "mms_levels"],
        "output" => &["directory", "stride", "dump_matrices"],
        _ => &[],
    }
}

struct Entries {
    map: BTreeMap<(String, String), (usize, String)>,
}

impl Entries {
    fn raw(&self, section: &str, key: &str) -> Option<(usize, &str)> {
        self.map.get(&(section.to_string(), key.to_string())).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str, what: &str) -> Result<Option<(usize, T)>, ConfigError> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(|x| Some((line, x)))
                .map_err(|_| err(Some(line), key, format!("expected {what}, got \"{v}\""))),
        }
    }

    fn number(&self, section: &str, key: &str, default: f64) -> Result<(Option<usize>, f64), ConfigError> {
        match self.parse::<f64>(section, key, "a number")? {
            Some((l, v)) if v.is_finite() => Ok((Some(l), v)),
            Some((l, _)) => Err(err(Some(l), key, "must be finite")),
            None => Ok((None, default)),
        }
    }

    fn required_number(&self, section: &str, key: &str) -> Result<(Option<usize>, f64), ConfigError> {
        if self.raw(section, key).is_none() {
            return Err(err(None, key, format!("missing required key in [{section}]")));
        }
        self.number(section, key, 0.0)
    }

    fn count(&self, section: &str, key: &str, default: Option<usize>) -> Result<(Option<usize>, usize), ConfigError> {
        match self.parse::<usize>(section, key, "a non-negative integer")? {
            Some((l, v)) => Ok((Some(l), v)),
            None => match default {
                Some(d) => Ok((None, d)),
                None => Err(err(None, key, format!("missing required key in [{section}]"))),
            },
        }
    }
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = None;
    for (i, c) in line.char_indices() {
        match (c, in_quote) {
            ('"' | '\'', None) => in_quote = Some(c),
            (c2, Some(q)) if c2 == q => in_quote = None,
            ('#' | ';', None) => return &line[..i],
            _ => {}
        }
    }
    line
}

fn lex(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(Some(line_no), line, "malformed section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(err(Some(line_no), name, "unknown section"));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(Some(line_no), line, "expected \"key = value\""))?;
        let key = key.trim();
        let sec = section
            .as_deref()
            .ok_or_else(|| err(Some(line_no), key, "key appears before any section header"))?;
        if !known_keys(sec).contains(&key) {
            return Err(err(Some(line_no), key, format!("unknown key in [{sec}]")));
        }
        let prev = map.insert((sec.to_string(), key.to_string()), (line_no, unquote(value).to_string()));
        if let Some((first, _)) = prev {
            return Err(err(Some(line_no), key, format!("duplicate key (first set on line {first})")));
        }
    }
    Ok(Entries { map })
}

fn positive(line: Option<usize>, key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(err(line, key, format!("must be positive, got {v}")))
    }
}

/// Parses and validates a configuration, filling defaults for optional keys.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let e = lex(text)?;

    let (pl, preset_name) = e
        .raw("surface", "preset")
        .ok_or_else(|| err(None, "preset", "missing required key in [surface]"))?;
    let (_, gamma) = e.number("surface", "gamma", 1.0)?;
    let (_, epsilon) = e.number("surface", "epsilon", 0.05)?;
    let (_, omega) = e.number("surface", "omega", 1.0)?;
    let (_, speed) = e.number("surface", "speed", 1.0)?;
    let preset = match preset_name {
        "flat_static" => Preset::FlatStatic,
        "isotropic_scaling" => Preset::IsotropicScaling { gamma },
        "graph_oscillation" => Preset::GraphOscillation { epsilon, omega },
        "translating_patch" => Preset::TranslatingPatch { speed },
        other => return Err(err(Some(pl), "preset", format!("unknown surface preset \"{other}\""))),
    };
    let domain = match e.raw("surface", "domain") {
        None => Rect::unit(),
        Some((line, v)) => {
            let parts: Vec<f64> = v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| err(Some(line), "domain", "expected four numbers \"x_min, x_max, y_min, y_max\""))?;
            if parts.len() != 4 {
                return Err(err(Some(line), "domain", "expected four numbers \"x_min, x_max, y_min, y_max\""));
            }
            Rect::new(parts[0], parts[1], parts[2], parts[3]).map_err(|x| err(Some(line), "domain", x.to_string()))?
        }
    };
    let (tl, horizon) = e.required_number("surface", "T")?;
    let horizon = positive(tl, "T", horizon)?;

    let diffusion = match e.raw("diffusion", "preset").map(|(l, v)| (l, v.to_string())) {
        None => {
            let (l, value) = e.number("diffusion", "value", 1.0)?;
            DiffusionConfig::Constant { value: positive(l, "value", value)? }
        }
        Some((l, name)) => match name.as_str() {
            "constant" => {
                let (l, value) = e.number("diffusion", "value", 1.0)?;
                DiffusionConfig::Constant { value: positive(l, "value", value)? }
            }
            "bump" => {
                let (bl, base) = e.number("diffusion", "base", 1.0)?;
                let (al, amplitude) = e.number("diffusion", "amplitude", 0.1)?;
                let base = positive(bl, "base", base)?;
                if base + amplitude.min(0.0) <= 0.0 {
                    return Err(err(al, "amplitude", "diffusion coefficient must stay positive"));
                }
                DiffusionConfig::Bump { base, amplitude }
            }
            other => return Err(err(Some(l), "preset", format!("unknown diffusion preset \"{other}\""))),
        },
    };

    let (l1, n1) = e.count("grid", "n1", None)?;
    let (l2, n2) = e.count("grid", "n2", None)?;
    for (l, k, n) in [(l1, "n1", n1), (l2, "n2", n2)] {
        if n < 3 {
            return Err(err(l, k, format!("must be at least 3, got {n}")));
        }
    }
    let (hl, h_fd) = e.number("grid", "h_fd", 1e-5)?;
    let h_fd = positive(hl, "h_fd", h_fd)?;

    let (dl, dt) = e.required_number("time", "dt")?;
    let dt = positive(dl, "dt", dt)?;
    let (thl, theta) = e.number("time", "theta", 0.5)?;
    if !(0.5..=1.0).contains(&theta) {
        return Err(err(thl, "theta", format!("theta must lie in [0.5, 1], got {theta}")));
    }

    let mode = match e.raw("solver", "mode") {
        None | Some((_, "direct")) => SolverMode::Direct,
        Some((_, "picard")) => SolverMode::Picard,
        Some((l, other)) => return Err(err(Some(l), "mode", format!("unknown solver mode \"{other}\""))),
    };
    let (tol_l, tol) = e.number("solver", "tol", 1e-8)?;
    let tol = positive(tol_l, "tol", tol)?;
    let (ml, max_iter) = e.count("solver", "max_iter", Some(50))?;
    if max_iter == 0 {
        return Err(err(ml, "max_iter", "must be at least 1"));
    }
    let (pl, probes) = e.count("solver", "probes", Some(16))?;
    if probes == 0 {
        return Err(err(pl, "probes", "must be at least 1"));
    }
    let (mgl, margin) = e.number("solver", "margin", 0.05)?;
    if !(0.0..1.0).contains(&margin) {
        return Err(err(mgl, "margin", format!("must lie in [0, 1), got {margin}")));
    }
    let seed = e.parse::<u64>("solver", "seed", "a non-negative integer")?.map_or(42, |(_, v)| v);
    let (lvl, mms_levels) = e.count("solver", "mms_levels", Some(3))?;
    if mms_levels < 3 {
        return Err(err(lvl, "mms_levels", format!("order fits need at least 3 levels, got {mms_levels}")));
    }

    let directory = PathBuf::from(e.raw("output", "directory").map_or("out", |(_, v)| v));
    let (sl, stride) = e.count("output", "stride", Some(10))?;
    if stride == 0 {
        return Err(err(sl, "stride", "snapshot stride must be positive"));
    }
    let dump_matrices = e.parse::<bool>("output", "dump_matrices", "true or false")?.is_some_and(|(_, v)| v);

    Ok(RunConfig {
        surface: SurfaceConfig { preset, domain, horizon },
        diffusion,
        grid: GridConfig { n1, n2, h_fd },
        time: TimeConfig { dt, theta },
        solver: SolverConfig { mode, tol, max_iter, probes, margin, seed, mms_levels },
        output: OutputConfig { directory, stride, dump_matrices },
    })
}

impl RunConfig {
    /// Text form accepted by [`parse_config`]; parsing it reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[surface]");
        let _ = writeln!(s, "preset = {}", self.surface.preset.name());
        match self.surface.preset {
            Preset::FlatStatic => {}
            Preset::IsotropicScaling { gamma } => {
                let _ = writeln!(s, "gamma = {gamma:?}");
            }
            Preset::GraphOscillation { epsilon, omega } => {
                let _ = writeln!(s, "epsilon = {epsilon:?}\nomega = {omega:?}");
            }
            Preset::TranslatingPatch { speed } => {
                let _ = writeln!(s, "speed = {speed:?}");
            }
        }
        let d = self.surface.domain;
        let _ = writeln!(s, "domain = {:?}, {:?}, {:?}, {:?}", d.x_min, d.x_max, d.y_min, d.y_max);
        let _ = writeln!(s, "T = {:?}\n", self.surface.horizon);
        let _ = writeln!(s, "[diffusion]");
        match self.diffusion {
            DiffusionConfig::Constant { value } => {
                let _ = writeln!(s, "preset = constant\nvalue = {value:?}\n");
            }
            DiffusionConfig::Bump { base, amplitude } => {
                let _ = writeln!(s, "preset = bump\nbase = {base:?}\namplitude = {amplitude:?}\n");
            }
        }
        let _ = writeln!(s, "[grid]\nn1 = {}\nn2 = {}\nh_fd = {:?}\n", self.grid.n1, self.grid.n2, self.grid.h_fd);
        let _ = writeln!(s, "[time]\ndt = {:?}\ntheta = {:?}\n", self.time.dt, self.time.theta);
        let mode = match self.solver.mode {
            SolverMode::Direct => "direct",
            SolverMode::Picard => "picard",
        };
        let sv = &self.solver;
        let _ = writeln!(
            s,
            "[solver]\nmode = {mode}\ntol = {:?}\nmax_iter = {}\nprobes = {}\nmargin = {:?}\nseed = {}\nmms_levels = {}\n",
            sv.tol, sv.max_iter, sv.probes, sv.margin, sv.seed, sv.mms_levels
        );
        let _ = writeln!(
            s,
            "[output]\ndirectory = \"{}\"\nstride = {}\ndump_matrices = {}",
            self.output.directory.display(),
            self.output.stride,
            self.output.dump_matrices
        );
        s
    }
}
