//! Scenario files: an INI-style description of one operator — domain grid,
//! time parameters, the map family, the q/s fields, run controls, and output
//! paths. The only nontrivial values are expressions, handled by [`crate::expr`].

use crate::expr::{self, Expr, Var};
use crate::family::Homotopy;
use crate::operator::Space;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("config error at line {line}, [{section}] {key}: {msg}")]
pub struct ConfigError {
    pub section: String,
    pub key: String,
    pub line: usize,
    pub msg: String,
}

fn cfg_err(section: &str, key: &str, line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError {
        section: section.into(),
        key: key.into(),
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapsSpec {
    /// One expression in (t, x).
    Direct(Expr),
    /// Base maps in x, interpolated by the homotopy.
    Bases { bases: Vec<Expr>, h: Homotopy },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamSpec {
    /// One expression in (t, x).
    Formula(Expr),
    /// Per-map expressions in x, extended with the maps' homotopy; `double`
    /// multiplies the first and last by 2 (endpoint compensation under a
    /// step homotopy).
    Bases { bases: Vec<Expr>, double: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub enum F0 {
    Zero,
    One,
    Formula(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub n_x: usize,
    /// Left grid offset: solutions live on [a + delta, b].
    pub delta: f64,
    /// Number of base maps; the time axis is [1, n].
    pub n: usize,
    pub n_t: usize,
    pub maps: MapsSpec,
    pub q: ParamSpec,
    pub s: ParamSpec,
    pub space: Space,
    pub tol: f64,
    pub k_max: usize,
    pub f0: F0,
    pub csv: Option<String>,
    pub svg: Option<String>,
    pub report: Option<String>,
}

const SECTIONS: [&str; 7] = ["domain", "time", "maps", "q", "s", "run", "output"];

fn key_allowed(section: &str, key: &str) -> bool {
    let base_list = key.strip_prefix("base").is_some_and(|d| {
        !d.is_empty() && d.bytes().all(|c| c.is_ascii_digit())
    });
    match section {
        "domain" => matches!(key, "a" | "b" | "nx" | "delta"),
        "time" => matches!(key, "n" | "nt"),
        "maps" => matches!(key, "expr" | "homotopy") || base_list,
        "q" | "s" => matches!(key, "expr" | "double") || base_list,
        "run" => matches!(key, "space" | "tol" | "kmax" | "f0"),
        "output" => matches!(key, "csv" | "svg" | "report"),
        _ => false,
    }
}

struct Cfg {
    entries: BTreeMap<(String, String), (String, usize)>,
}

impl Cfg {
    fn scan(text: &str) -> Result<Cfg, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        let mut seen_sections: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(cfg_err("", "", line_no, "unterminated [section] header"));
                };
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(cfg_err(name, "", line_no, "unknown section"));
                }
                if seen_sections.iter().any(|s| s == name) {
                    return Err(cfg_err(name, "", line_no, "duplicate section"));
                }
                seen_sections.push(name.to_string());
                section = Some(name.to_string());
                continue;
            }
            let Some(sec) = section.clone() else {
                return Err(cfg_err("", "", line_no, "key before any [section] header"));
            };
            let Some((k, v)) = line.split_once('=') else {
                return Err(cfg_err(&sec, "", line_no, "expected `key = value`"));
            };
            let (k, v) = (k.trim(), v.trim());
            if !key_allowed(&sec, k) {
                return Err(cfg_err(&sec, k, line_no, "unknown key for this section"));
            }
            if entries
                .insert((sec.clone(), k.to_string()), (v.to_string(), line_no))
                .is_some()
            {
                return Err(cfg_err(&sec, k, line_no, "duplicate key"));
            }
        }
        Ok(Cfg { entries })
    }

    fn get(&self, section: &str, key: &str) -> Option<(&str, usize)> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|(v, l)| (v.as_str(), *l))
    }

    fn f64_opt(&self, section: &str, key: &str) -> Result<Option<(f64, usize)>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some((v, line)) => {
                let x: f64 = v
                    .parse()
                    .map_err(|_| cfg_err(section, key, line, format!("not a number: {v}")))?;
                if !x.is_finite() {
                    return Err(cfg_err(section, key, line, "must be finite"));
                }
                Ok(Some((x, line)))
            }
        }
    }

    fn f64_req(&self, section: &str, key: &str) -> Result<(f64, usize), ConfigError> {
        self.f64_opt(section, key)?
            .ok_or_else(|| cfg_err(section, key, 0, "missing mandatory key"))
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<(usize, usize), ConfigError> {
        match self.get(section, key) {
            None => Ok((default, 0)),
            Some((v, line)) => {
                let x: usize = v
                    .parse()
                    .map_err(|_| cfg_err(section, key, line, format!("not a positive integer: {v}")))?;
                Ok((x, line))
            }
        }
    }

    fn expr_at(&self, section: &str, key: &str, v: &str, line: usize) -> Result<Expr, ConfigError> {
        expr::parse(v).map_err(|e| cfg_err(section, key, line, e.to_string()))
    }

    /// Contiguous `base1 .. baseN` expressions, or None when no base key is
    /// present.
    fn bases(&self, section: &str) -> Result<Option<Vec<(Expr, usize)>>, ConfigError> {
        let mut found: Vec<(usize, &str, usize)> = Vec::new();
        for ((sec, key), (v, line)) in &self.entries {
            if sec == section {
                if let Some(d) = key.strip_prefix("base") {
                    if let Ok(i) = d.parse::<usize>() {
                        found.push((i, v.as_str(), *line));
                    }
                }
            }
        }
        if found.is_empty() {
            return Ok(None);
        }
        found.sort_by_key(|(i, _, _)| *i);
        for (pos, (i, _, line)) in found.iter().enumerate() {
            if *i != pos + 1 {
                return Err(cfg_err(
                    section,
                    &format!("base{i}"),
                    *line,
                    format!("base maps must be numbered 1..{} without gaps", found.len()),
                ));
            }
        }
        let mut out = Vec::with_capacity(found.len());
        for (i, v, line) in found {
            let e = self.expr_at(section, &format!("base{i}"), v, line)?;
            if expr::contains_var(&e, Var::T) {
                return Err(cfg_err(
                    section,
                    &format!("base{i}"),
                    line,
                    "base expressions may only use x",
                ));
            }
            out.push((e, line));
        }
        Ok(Some(out))
    }
}

fn parse_homotopy(section: &str, v: &str, line: usize) -> Result<Homotopy, ConfigError> {
    let v = v.trim();
    let (head, rest) = match v.split_once(char::is_whitespace) {
        Some((h, r)) => (h, r.trim()),
        None => (v, ""),
    };
    let h = match head {
        "identity" if rest.is_empty() => Homotopy::Identity,
        "step" => {
            let theta: f64 = rest
                .parse()
                .map_err(|_| cfg_err(section, "homotopy", line, format!("step needs a threshold, got `{rest}`")))?;
            Homotopy::Step(theta)
        }
        "ramp" => {
            let k: u32 = rest
                .parse()
                .map_err(|_| cfg_err(section, "homotopy", line, format!("ramp needs an integer steepness, got `{rest}`")))?;
            Homotopy::Ramp(k)
        }
        "custom" => {
            let e = expr::parse(rest).map_err(|e| cfg_err(section, "homotopy", line, e.to_string()))?;
            Homotopy::Custom(e)
        }
        _ => {
            return Err(cfg_err(
                section,
                "homotopy",
                line,
                format!("expected identity | step <theta> | ramp <k> | custom <expr>, got `{v}`"),
            ))
        }
    };
    h.validate()
        .map_err(|e| cfg_err(section, "homotopy", line, e.to_string()))?;
    Ok(h)
}

fn parse_param(cfg: &Cfg, section: &str) -> Result<ParamSpec, ConfigError> {
    let expr = cfg.get(section, "expr");
    let bases = cfg.bases(section)?;
    let double = cfg.get(section, "double");
    match (expr, bases) {
        (Some(_), Some(_)) => Err(cfg_err(section, "expr", 0, "give either expr or base lists, not both")),
        (Some((v, line)), None) => {
            if let Some((_, dline)) = double {
                return Err(cfg_err(section, "double", dline, "double applies to base lists only"));
            }
            Ok(ParamSpec::Formula(cfg.expr_at(section, "expr", v, line)?))
        }
        (None, Some(bases)) => {
            let double = match double {
                None => false,
                Some((v, dline)) => match v {
                    "true" => true,
                    "false" => false,
                    _ => return Err(cfg_err(section, "double", dline, "expected true or false")),
                },
            };
            Ok(ParamSpec::Bases {
                bases: bases.into_iter().map(|(e, _)| e).collect(),
                double,
            })
        }
        (None, None) => Err(cfg_err(section, "", 0, "section needs expr or base lists")),
    }
}

fn parse_space(v: &str, line: usize) -> Result<Space, ConfigError> {
    let v = v.trim();
    if v == "sup" {
        return Ok(Space::Sup);
    }
    let p = v
        .strip_prefix("lp")
        .map(|r| r.trim().trim_start_matches('(').trim_end_matches(')').trim())
        .and_then(|r| r.parse::<f64>().ok());
    match p {
        Some(p) if p >= 1.0 => Ok(Space::Lp(p)),
        _ => Err(cfg_err(
            "run",
            "space",
            line,
            format!("expected sup or lp <p> with p >= 1, got `{v}`"),
        )),
    }
}

pub fn parse_config(text: &str, name: &str) -> Result<Scenario, ConfigError> {
    let cfg = Cfg::scan(text)?;

    let (a, _) = cfg.f64_req("domain", "a")?;
    let (b, b_line) = cfg.f64_req("domain", "b")?;
    if !(a < b) {
        return Err(cfg_err("domain", "b", b_line, format!("need a < b, got [{a}, {b}]")));
    }
    let (n_x, nx_line) = cfg.usize_or("domain", "nx", 1025)?;
    if n_x < 2 {
        return Err(cfg_err("domain", "nx", nx_line, "need at least 2 grid points"));
    }
    let (delta, d_line) = cfg.f64_opt("domain", "delta")?.unwrap_or((0.0, 0));
    if delta < 0.0 || delta >= (b - a) / n_x as f64 {
        return Err(cfg_err(
            "domain",
            "delta",
            d_line,
            format!("delta must lie in [0, (b-a)/nx) = [0, {})", (b - a) / n_x as f64),
        ));
    }

    // maps
    let maps_expr = cfg.get("maps", "expr");
    let maps_bases = cfg.bases("maps")?;
    let homotopy = cfg.get("maps", "homotopy");
    let maps = match (maps_expr, maps_bases) {
        (Some(_), Some(_)) => {
            return Err(cfg_err("maps", "expr", 0, "give either expr or base maps, not both"))
        }
        (Some((v, line)), None) => {
            if let Some((_, hline)) = homotopy {
                return Err(cfg_err("maps", "homotopy", hline, "homotopy applies to base maps only"));
            }
            MapsSpec::Direct(cfg.expr_at("maps", "expr", v, line)?)
        }
        (None, Some(bases)) => {
            let h = match homotopy {
                None => Homotopy::Identity,
                Some((v, line)) => parse_homotopy("maps", v, line)?,
            };
            MapsSpec::Bases {
                bases: bases.into_iter().map(|(e, _)| e).collect(),
                h,
            }
        }
        (None, None) => return Err(cfg_err("maps", "", 0, "missing [maps] section or its keys")),
    };

    // time axis
    let default_n = match &maps {
        MapsSpec::Bases { bases, .. } => bases.len(),
        MapsSpec::Direct(_) => 0,
    };
    let (n, n_line) = cfg.usize_or("time", "n", default_n)?;
    if n < 2 {
        let msg = if matches!(maps, MapsSpec::Direct(_)) && cfg.get("time", "n").is_none() {
            "n is mandatory for direct map expressions".to_string()
        } else {
            format!("need n >= 2, got {n}")
        };
        return Err(cfg_err("time", "n", n_line, msg));
    }
    if let MapsSpec::Bases { bases, .. } = &maps {
        if bases.len() != n {
            return Err(cfg_err(
                "time",
                "n",
                n_line,
                format!("n = {n} but [maps] lists {} bases", bases.len()),
            ));
        }
    }
    let (n_t, nt_line) = cfg.usize_or("time", "nt", 512)?;
    if n_t < 2 || n_t % (2 * (n - 1)) != 0 {
        return Err(cfg_err(
            "time",
            "nt",
            nt_line,
            format!("nt = {n_t} must be a positive multiple of 2 (n-1) = {}", 2 * (n - 1)),
        ));
    }

    // q and s
    let q = parse_param(&cfg, "q")?;
    let s = parse_param(&cfg, "s")?;
    for (sec, p) in [("q", &q), ("s", &s)] {
        if let ParamSpec::Bases { bases, .. } = p {
            if matches!(maps, MapsSpec::Direct(_)) {
                return Err(cfg_err(sec, "", 0, "base lists need [maps] base maps (shared homotopy)"));
            }
            if bases.len() != n {
                return Err(cfg_err(
                    sec,
                    "",
                    0,
                    format!("{} base entries but n = {n}", bases.len()),
                ));
            }
        }
    }

    // run controls
    let space = match cfg.get("run", "space") {
        None => Space::Sup,
        Some((v, line)) => parse_space(v, line)?,
    };
    let (tol, tol_line) = cfg.f64_opt("run", "tol")?.unwrap_or((1e-6, 0));
    if !(tol > 0.0) {
        return Err(cfg_err("run", "tol", tol_line, "tolerance must be positive"));
    }
    let (k_max, k_line) = cfg.usize_or("run", "kmax", 50)?;
    if k_max == 0 {
        return Err(cfg_err("run", "kmax", k_line, "need at least one iteration"));
    }
    let f0 = match cfg.get("run", "f0") {
        None => F0::Zero,
        Some((v, line)) => {
            let v = v.trim();
            if v == "zero" {
                F0::Zero
            } else if v == "one" {
                F0::One
            } else if let Some(rest) = v.strip_prefix("expr") {
                let e = cfg.expr_at("run", "f0", rest.trim(), line)?;
                if expr::contains_var(&e, Var::T) {
                    return Err(cfg_err("run", "f0", line, "start function may only use x"));
                }
                F0::Formula(e)
            } else {
                return Err(cfg_err("run", "f0", line, format!("expected zero | one | expr <e>, got `{v}`")));
            }
        }
    };

    let path = |key: &str| cfg.get("output", key).map(|(v, _)| v.to_string());

    Ok(Scenario {
        name: name.to_string(),
        a,
        b,
        n_x,
        delta,
        n,
        n_t,
        maps,
        q,
        s,
        space,
        tol,
        k_max,
        f0,
        csv: path("csv"),
        svg: path("svg"),
        report: path("report"),
    })
}

fn write_homotopy(out: &mut String, h: &Homotopy) {
    match h {
        Homotopy::Identity => out.push_str("homotopy = identity\n"),
        Homotopy::Step(theta) => {
            let _ = writeln!(out, "homotopy = step {theta}");
        }
        Homotopy::Ramp(k) => {
            let _ = writeln!(out, "homotopy = ramp {k}");
        }
        Homotopy::Custom(e) => {
            let _ = writeln!(out, "homotopy = custom {}", expr::pretty(e));
        }
    }
}

fn write_param(out: &mut String, section: &str, p: &ParamSpec) {
    let _ = writeln!(out, "[{section}]");
    match p {
        ParamSpec::Formula(e) => {
            let _ = writeln!(out, "expr = {}", expr::pretty(e));
        }
        ParamSpec::Bases { bases, double } => {
            for (i, e) in bases.iter().enumerate() {
                let _ = writeln!(out, "base{} = {}", i + 1, expr::pretty(e));
            }
            let _ = writeln!(out, "double = {double}");
        }
    }
    out.push('\n');
}

/// Canonical writer; `parse_config(dump(s), &s.name)` reproduces `s`.
pub fn dump(s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[domain]\na = {}\nb = {}\nnx = {}\ndelta = {}\n", s.a, s.b, s.n_x, s.delta);
    let _ = writeln!(out, "[time]\nn = {}\nnt = {}\n", s.n, s.n_t);
    out.push_str("[maps]\n");
    match &s.maps {
        MapsSpec::Direct(e) => {
            let _ = writeln!(out, "expr = {}", expr::pretty(e));
        }
        MapsSpec::Bases { bases, h } => {
            for (i, e) in bases.iter().enumerate() {
                let _ = writeln!(out, "base{} = {}", i + 1, expr::pretty(e));
            }
            write_homotopy(&mut out, h);
        }
    }
    out.push('\n');
    write_param(&mut out, "q", &s.q);
    write_param(&mut out, "s", &s.s);
    out.push_str("[run]\n");
    match s.space {
        Space::Sup => out.push_str("space = sup\n"),
        Space::Lp(p) => {
            let _ = writeln!(out, "space = lp {p}");
        }
    }
    let _ = writeln!(out, "tol = {}\nkmax = {}", s.tol, s.k_max);
    match &s.f0 {
        F0::Zero => out.push_str("f0 = zero\n"),
        F0::One => out.push_str("f0 = one\n"),
        F0::Formula(e) => {
            let _ = writeln!(out, "f0 = expr {}", expr::pretty(e));
        }
    }
    if s.csv.is_some() || s.svg.is_some() || s.report.is_some() {
        out.push_str("\n[output]\n");
        for (key, v) in [("csv", &s.csv), ("svg", &s.svg), ("report", &s.report)] {
            if let Some(v) = v {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
    }
    out
}

// --- builtin scenarios ------------------------------------------------------

pub const BUILTIN_NAMES: [&str; 7] = [
    "exa1",
    "exa2",
    "parabola",
    "takagi",
    "lp-spike",
    "noninjective-demo",
    "nonuniform-demo",
];

pub fn builtin_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "exa1" => EXA1,
        "exa2" => EXA2,
        "parabola" => PARABOLA,
        "takagi" => TAKAGI,
        "lp-spike" => LP_SPIKE,
        "noninjective-demo" => NONINJECTIVE_DEMO,
        "nonuniform-demo" => NONUNIFORM_DEMO,
        _ => return None,
    })
}

pub fn builtin(name: &str) -> Option<Scenario> {
    let text = builtin_text(name)?;
    Some(parse_config(text, name).expect("builtin scenario text is valid"))
}

const EXA1: &str = "\
# Offset jumps along the moving threshold 2 - t; the fixed point is
# discontinuous at 1/2.
[domain]
a = 0
b = 1
nx = 1025

[time]
n = 2
nt = 512

[maps]
base1 = x/2
base2 = x/2 + 1/2
homotopy = identity

[q]
expr = ge(x, 2 - t)

[s]
expr = 1/2*x*(t - 1)

[run]
space = sup
tol = 1e-6
kmax = 50
f0 = zero

[output]
csv = exa1.csv
svg = exa1.svg
report = exa1-report.json
";

const EXA2: &str = "\
# Same family as exa1 with a smooth offset; the fixed point is continuous.
[domain]
a = 0
b = 1
nx = 1025

[time]
n = 2
nt = 512

[maps]
base1 = x/2
base2 = x/2 + 1/2
homotopy = identity

[q]
expr = 2*x*(t - 1)

[s]
expr = 1/2*x*(t - 1)

[run]
space = sup
tol = 1e-6
kmax = 50
f0 = zero

[output]
csv = exa2.csv
svg = exa2.svg
report = exa2-report.json
";

const PARABOLA: &str = "\
# Endpoint-doubled step extension whose fixed point is 2*x*(1 - x).
[domain]
a = 0
b = 1
nx = 1025

[time]
n = 2
nt = 512

[maps]
base1 = x/2
base2 = x/2 + 1/2
homotopy = step 0.5

[q]
base1 = x/2
base2 = 1/2 - x/2
double = true

[s]
base1 = 1/4
base2 = 1/4
double = true

[run]
space = sup
tol = 1e-6
kmax = 50
f0 = zero

[output]
csv = parabola.csv
svg = parabola.svg
report = parabola-report.json
";

const TAKAGI: &str = "\
# The parabola scenario with scalings raised to 1/2 before doubling; the
# fixed point is the blancmange curve.
[domain]
a = 0
b = 1
nx = 1025

[time]
n = 2
nt = 512

[maps]
base1 = x/2
base2 = x/2 + 1/2
homotopy = step 0.5

[q]
base1 = x/2
base2 = 1/2 - x/2
double = true

[s]
base1 = 1/2
base2 = 1/2
double = true

[run]
space = sup
tol = 1e-6
kmax = 50
f0 = zero

[output]
csv = takagi.csv
svg = takagi.svg
report = takagi-report.json
";

const LP_SPIKE: &str = "\
# Integrable singularity 1/sqrt(x) kept off the grid by a left offset;
# contraction is certified in L1, not in sup norm.  nx is chosen with an
# odd cell count so the two halving branches resample disjoint grid
# parities: each interpolation spike then feeds exactly one branch and
# discrete L1 residuals keep the 3/4 contraction rate.
[domain]
a = 0
b = 1
nx = 1024
delta = 1e-6

[time]
n = 2
nt = 512

[maps]
base1 = x/2
base2 = x/2 + 1/2
homotopy = step 0.5

[q]
expr = 1/sqrt(x)

[s]
expr = 3/2

[run]
space = lp 1
tol = 1e-4
kmax = 50
f0 = zero

[output]
csv = lp-spike.csv
svg = lp-spike.svg
report = lp-spike-report.json
";

const NONINJECTIVE_DEMO: &str = "\
# Blending an increasing and a decreasing map: l(t, .) fails to be injective
# exactly for t in (4/3, 2), two thirds of the time axis.
[domain]
a = 0
b = 1
nx = 513

[time]
n = 2
nt = 512

[maps]
base1 = x/2
base2 = 1 - x^2/2
homotopy = identity

[q]
expr = x*(2 - t)/4

[s]
expr = 1/4

[run]
space = sup
tol = 1e-6
kmax = 50
f0 = zero

[output]
csv = noninjective-demo.csv
svg = noninjective-demo.svg
report = noninjective-demo-report.json
";

const NONUNIFORM_DEMO: &str = "\
# Step-partition family with zero offset and unit scaling. Ramp approximants
# of the operator converge pointwise but not uniformly over inputs.
[domain]
a = 0
b = 1
nx = 1025

[time]
n = 2
nt = 512

[maps]
base1 = x/2
base2 = x/2 + 1/2
homotopy = step 0.5

[q]
base1 = 0
base2 = 0

[s]
base1 = 1
base2 = 1

[run]
space = sup
tol = 1e-6
kmax = 50
f0 = zero

[output]
csv = nonuniform-demo.csv
svg = nonuniform-demo.svg
report = nonuniform-demo-report.json
";
