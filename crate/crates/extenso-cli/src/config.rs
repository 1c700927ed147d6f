//! Config files for check suites: a flat, line-oriented `key = value`
//! format with sections.
//!
//! ```text
//! # comment — '#' discards the rest of the line
//! name = ideal-gas            # top-level keys come before any section
//! system = ideal_gas          # ideal_gas | van_der_waals | custom
//! variables = U V N           # custom systems only
//! equation = N*R*ln(...)      # custom systems only
//! dimension = 3               # optional; must match the variable count
//!
//! [constants]                 # name = value, available in all expressions
//! R = 1
//!
//! [domain]                    # custom systems; per-variable open bounds
//! U = 0 inf                   # default is (0, inf) per variable
//!
//! [form NAME]                 # extra differential forms; keys are
//! U = 1                       # variable lists ("U" → dU, "U V" → dU∧dV)
//! V = U/V                     # in declaration order, strictly increasing
//!
//! [field NAME]                # extra vector fields; one key per variable
//! U = U
//!
//! [check NAME]                # a check descriptor; see `CheckKind`
//! kind = extensive_function
//! tol = 1e-10
//! box = 1:1.4 1:1.4 1:1.4     # per-variable lo:hi sampling bounds
//! count = 50
//! seed = 7
//! ```
//!
//! Reserved names: forms `theta` (heat) and `epsilon` (work), field `rho`
//! (the radial scaling field) refer to the system's built-in objects.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use extenso_core::diffcalc::{DomainBox, ScalarField};
use extenso_core::exterior::{KForm, MultiIndex, VectorField};
use extenso_core::models::ThermoSystem;

/// A config-file problem; `line` is 1-based when the offending line is known.
#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub msg: String,
}

impl ConfigError {
    fn at(line: usize, msg: impl Into<String>) -> ConfigError {
        ConfigError {
            line: Some(line),
            msg: msg.into(),
        }
    }

    fn global(msg: impl Into<String>) -> ConfigError {
        ConfigError {
            line: None,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.msg),
            None => write!(f, "{}", self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// `L_ρ f = f` plus literal-scaling defects for the entropy (or `expr`).
    ExtensiveFunction,
    /// `L_ρ ω = ω` for a 1-form.
    FormExtensive,
    /// `ω ∧ dω = 0`.
    Integrability,
    /// `|ω(ρ)| ≥ min_abs` on the sample.
    Transversal,
    /// `ω(ρ) = 0` to `tol` on the sample.
    VanishingContraction,
    /// `|ε ∧ dε| ≤ tol`: work admits an integrating factor.
    ConservativeWork,
    /// `|ε ∧ dε| ≥ min_abs`: work is genuinely non-integrable.
    NonconservativeWork,
    /// Measure `|ε ∧ dε|` and report the range; never fails on its own.
    WorkWedge,
    /// vdW-preset only: jet-computed wedge coefficient vs the closed form.
    WorkReference,
    /// Integrate `θ/θ(ρ)` from `from` to `to` and compare with the direct
    /// entropy evaluation to `rel_tol`.
    EntropyRecovery,
    /// Flow-pullback vs `eᵗ·ω` at `point` for each `t` in `times`.
    ScalingLaw,
    /// `expr = k·S` for a single constant k over the sample box.
    ConformalFactor,
}

impl CheckKind {
    fn parse(s: &str) -> Option<CheckKind> {
        Some(match s {
            "extensive_function" => CheckKind::ExtensiveFunction,
            "form_extensive" => CheckKind::FormExtensive,
            "integrability" => CheckKind::Integrability,
            "transversal" => CheckKind::Transversal,
            "vanishing_contraction" => CheckKind::VanishingContraction,
            "conservative_work" => CheckKind::ConservativeWork,
            "nonconservative_work" => CheckKind::NonconservativeWork,
            "work_wedge" => CheckKind::WorkWedge,
            "work_reference" => CheckKind::WorkReference,
            "entropy_recovery" => CheckKind::EntropyRecovery,
            "scaling_law" => CheckKind::ScalingLaw,
            "conformal_factor" => CheckKind::ConformalFactor,
            _ => return None,
        })
    }
}

/// One fully validated check descriptor.
#[derive(Clone)]
pub struct CheckSpec {
    pub name: String,
    pub kind: CheckKind,
    pub tol: f64,
    pub rel_tol: f64,
    pub min_abs: f64,
    pub sample_box: Option<DomainBox>,
    pub count: usize,
    pub seed: u64,
    pub form: String,
    pub expr: Option<ScalarField>,
    pub from: Option<Vec<f64>>,
    pub to: Option<Vec<f64>>,
    pub point: Option<Vec<f64>>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    IdealGas,
    VanDerWaals,
    Custom,
}

/// A config file after parsing, validation, and construction of every
/// expression-backed object.
pub struct Loaded {
    pub name: String,
    pub kind: SystemKind,
    pub system: ThermoSystem,
    pub forms: BTreeMap<String, KForm>,
    pub fields: BTreeMap<String, VectorField>,
    pub checks: Vec<CheckSpec>,
}

// ---------------------------------------------------------------------------
// Raw line structure
// ---------------------------------------------------------------------------

struct RawSection {
    kind: String,
    arg: Option<String>,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

struct Raw {
    toplevel: Vec<(String, String, usize)>,
    sections: Vec<RawSection>,
}

fn parse_lines(text: &str) -> Result<Raw, ConfigError> {
    let mut raw = Raw {
        toplevel: Vec::new(),
        sections: Vec::new(),
    };
    for (i, full) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = match full.find('#') {
            Some(pos) => &full[..pos],
            None => full,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(lineno, "unterminated section header"))?
                .trim();
            let (kind, arg) = match inner.split_once(char::is_whitespace) {
                Some((k, a)) => (k.to_string(), Some(a.trim().to_string())),
                None => (inner.to_string(), None),
            };
            if kind.is_empty() {
                return Err(ConfigError::at(lineno, "empty section header"));
            }
            raw.sections.push(RawSection {
                kind,
                arg,
                line: lineno,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ConfigError::at(lineno, format!("expected 'key = value', got '{line}'"))
        })?;
        let entry = (key.trim().to_string(), value.trim().to_string(), lineno);
        if entry.0.is_empty() {
            return Err(ConfigError::at(lineno, "empty key"));
        }
        match raw.sections.last_mut() {
            Some(section) => section.entries.push(entry),
            None => raw.toplevel.push(entry),
        }
    }
    Ok(raw)
}

// ---------------------------------------------------------------------------
// Scalar value parsers
// ---------------------------------------------------------------------------

fn parse_number(v: &str, line: usize, key: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .map_err(|_| ConfigError::at(line, format!("key '{key}': expected a number, got '{v}'")))
}

fn parse_bound(v: &str, line: usize, key: &str) -> Result<f64, ConfigError> {
    match v {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => parse_number(v, line, key),
    }
}

fn parse_point(v: &str, n: usize, line: usize, key: &str) -> Result<Vec<f64>, ConfigError> {
    let coords: Result<Vec<f64>, _> = v
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect();
    let coords = coords.map_err(|_| {
        ConfigError::at(
            line,
            format!("key '{key}': expected comma-separated coordinates, got '{v}'"),
        )
    })?;
    if coords.len() != n {
        return Err(ConfigError::at(
            line,
            format!(
                "key '{key}': expected {n} coordinates, got {}",
                coords.len()
            ),
        ));
    }
    Ok(coords)
}

fn parse_box(v: &str, n: usize, line: usize) -> Result<DomainBox, ConfigError> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in v.split_whitespace() {
        let (a, b) = part.split_once(':').ok_or_else(|| {
            ConfigError::at(line, format!("key 'box': expected 'lo:hi', got '{part}'"))
        })?;
        lo.push(parse_bound(a, line, "box")?);
        hi.push(parse_bound(b, line, "box")?);
    }
    if lo.len() != n {
        return Err(ConfigError::at(
            line,
            format!("key 'box': expected {n} lo:hi pairs, got {}", lo.len()),
        ));
    }
    DomainBox::new(lo, hi).map_err(|e| ConfigError::at(line, format!("key 'box': {e}")))
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

pub fn load_config(path: &Path) -> Result<Loaded, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::global(format!("cannot read {}: {e}", path.display())))?;
    load_str(&text, path)
}

pub fn load_str(text: &str, path: &Path) -> Result<Loaded, ConfigError> {
    let raw = parse_lines(text)?;

    let mut name = None;
    let mut system_kind = None;
    let mut variables: Option<(Vec<String>, usize)> = None;
    let mut equation: Option<(String, usize)> = None;
    let mut dimension: Option<(usize, usize)> = None;
    for (key, value, line) in &raw.toplevel {
        match key.as_str() {
            "name" => name = Some(value.clone()),
            "system" => {
                system_kind = Some(match value.as_str() {
                    "ideal_gas" => SystemKind::IdealGas,
                    "van_der_waals" => SystemKind::VanDerWaals,
                    "custom" => SystemKind::Custom,
                    other => {
                        return Err(ConfigError::at(
                            *line,
                            format!("unknown system '{other}' (ideal_gas | van_der_waals | custom)"),
                        ))
                    }
                })
            }
            "variables" => {
                let names: Vec<String> =
                    value.split_whitespace().map(|s| s.to_string()).collect();
                variables = Some((names, *line));
            }
            "equation" => equation = Some((value.clone(), *line)),
            "dimension" => {
                let d = value.parse::<usize>().map_err(|_| {
                    ConfigError::at(*line, format!("dimension must be an integer, got '{value}'"))
                })?;
                dimension = Some((d, *line));
            }
            other => {
                return Err(ConfigError::at(
                    *line,
                    format!("unknown top-level key '{other}'"),
                ))
            }
        }
    }
    let kind = system_kind.ok_or_else(|| {
        ConfigError::global("missing top-level key 'system' (ideal_gas | van_der_waals | custom)")
    })?;
    let name = name
        .or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
        })
        .unwrap_or_else(|| "unnamed".into());

    // constants first — every other expression may reference them
    let mut constants: BTreeMap<String, f64> = BTreeMap::new();
    for section in raw.sections.iter().filter(|s| s.kind == "constants") {
        if section.arg.is_some() {
            return Err(ConfigError::at(section.line, "[constants] takes no name"));
        }
        for (key, value, line) in &section.entries {
            let v = parse_number(value, *line, key)?;
            if constants.insert(key.clone(), v).is_some() {
                return Err(ConfigError::at(*line, format!("constant '{key}' redefined")));
            }
        }
    }

    let require_const = |name: &str| -> Result<f64, ConfigError> {
        constants.get(name).copied().ok_or_else(|| {
            ConfigError::global(format!(
                "system preset needs constant '{name}' in [constants]"
            ))
        })
    };

    let system = match kind {
        SystemKind::IdealGas => {
            if equation.is_some() || variables.is_some() {
                return Err(ConfigError::global(
                    "preset systems define their own variables and equation; remove those keys",
                ));
            }
            ThermoSystem::ideal_gas(
                require_const("c")?,
                require_const("K1")?,
                require_const("R")?,
            )
            .map_err(|e| ConfigError::global(format!("ideal gas construction: {e}")))?
        }
        SystemKind::VanDerWaals => {
            if equation.is_some() || variables.is_some() {
                return Err(ConfigError::global(
                    "preset systems define their own variables and equation; remove those keys",
                ));
            }
            ThermoSystem::van_der_waals(
                require_const("a")?,
                require_const("b")?,
                require_const("c")?,
                require_const("K2")?,
                require_const("R")?,
            )
            .map_err(|e| ConfigError::global(format!("van der Waals construction: {e}")))?
        }
        SystemKind::Custom => {
            let (vars, _vline) = variables
                .ok_or_else(|| ConfigError::global("custom systems need 'variables'"))?;
            let (eq, eline) =
                equation.ok_or_else(|| ConfigError::global("custom systems need 'equation'"))?;
            if let Some((d, dline)) = dimension {
                if d != vars.len() {
                    return Err(ConfigError::at(
                        dline,
                        format!("dimension {d} does not match {} variables", vars.len()),
                    ));
                }
            }
            let n = vars.len();
            let mut lo = vec![0.0; n];
            let mut hi = vec![f64::INFINITY; n];
            for section in raw.sections.iter().filter(|s| s.kind == "domain") {
                for (key, value, line) in &section.entries {
                    let i = vars.iter().position(|v| v == key).ok_or_else(|| {
                        ConfigError::at(*line, format!("unknown variable '{key}' in [domain]"))
                    })?;
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 2 {
                        return Err(ConfigError::at(
                            *line,
                            format!("domain bounds for '{key}' must be 'lo hi'"),
                        ));
                    }
                    lo[i] = parse_bound(parts[0], *line, key)?;
                    hi[i] = parse_bound(parts[1], *line, key)?;
                }
            }
            let domain = DomainBox::new(lo, hi)
                .map_err(|e| ConfigError::global(format!("[domain]: {e}")))?;
            let var_refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
            let entropy = ScalarField::parse(&eq, &var_refs, &constants, domain)
                .map_err(|e| ConfigError::at(eline, format!("equation: {e}")))?;
            ThermoSystem::from_fundamental(&var_refs, entropy, constants.clone())
                .map_err(|e| ConfigError::global(format!("system construction: {e}")))?
        }
    };

    if kind != SystemKind::Custom && raw.sections.iter().any(|s| s.kind == "domain") {
        return Err(ConfigError::global(
            "[domain] applies to custom systems only; presets carry their own domain",
        ));
    }

    let n = system.dim();
    let vars: Vec<String> = system.names().to_vec();
    let var_refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    let ambient = system.domain().clone();
    let parse_field_expr = |src: &str, line: usize, key: &str| -> Result<ScalarField, ConfigError> {
        ScalarField::parse(src, &var_refs, &constants, ambient.clone())
            .map_err(|e| ConfigError::at(line, format!("key '{key}': {e}")))
    };

    let mut forms: BTreeMap<String, KForm> = BTreeMap::new();
    for section in raw.sections.iter().filter(|s| s.kind == "form") {
        let fname = section
            .arg
            .clone()
            .ok_or_else(|| ConfigError::at(section.line, "[form] needs a name: [form NAME]"))?;
        if fname == "theta" || fname == "epsilon" {
            return Err(ConfigError::at(
                section.line,
                format!("form name '{fname}' is reserved for the system's built-in forms"),
            ));
        }
        let mut degree = None;
        let mut entries = Vec::new();
        for (key, value, line) in &section.entries {
            let mut indices = Vec::new();
            for word in key.split_whitespace() {
                let i = vars.iter().position(|v| v == word).ok_or_else(|| {
                    ConfigError::at(*line, format!("unknown variable '{word}' in form index"))
                })?;
                indices.push(i);
            }
            let idx = MultiIndex::new(indices).map_err(|e| {
                ConfigError::at(
                    *line,
                    format!("form index '{key}' must list distinct variables in declaration order: {e}"),
                )
            })?;
            match degree {
                None => degree = Some(idx.degree()),
                Some(k) if k != idx.degree() => {
                    return Err(ConfigError::at(
                        *line,
                        format!("form '{fname}' mixes degrees {k} and {}", idx.degree()),
                    ))
                }
                _ => {}
            }
            entries.push((idx, parse_field_expr(value, *line, key)?));
        }
        let k = degree
            .ok_or_else(|| ConfigError::at(section.line, format!("form '{fname}' is empty")))?;
        let form = KForm::from_coeffs(n, k, entries)
            .map_err(|e| ConfigError::at(section.line, format!("form '{fname}': {e}")))?;
        if forms.insert(fname.clone(), form).is_some() {
            return Err(ConfigError::at(
                section.line,
                format!("form '{fname}' redefined"),
            ));
        }
    }

    let mut fields: BTreeMap<String, VectorField> = BTreeMap::new();
    for section in raw.sections.iter().filter(|s| s.kind == "field") {
        let fname = section
            .arg
            .clone()
            .ok_or_else(|| ConfigError::at(section.line, "[field] needs a name: [field NAME]"))?;
        if fname == "rho" {
            return Err(ConfigError::at(
                section.line,
                "field name 'rho' is reserved for the radial scaling field",
            ));
        }
        let mut components: Vec<Option<ScalarField>> = vec![None; n];
        for (key, value, line) in &section.entries {
            let i = vars.iter().position(|v| v == key).ok_or_else(|| {
                ConfigError::at(*line, format!("unknown variable '{key}' in [field {fname}]"))
            })?;
            if components[i].is_some() {
                return Err(ConfigError::at(
                    *line,
                    format!("component '{key}' of field '{fname}' redefined"),
                ));
            }
            components[i] = Some(parse_field_expr(value, *line, key)?);
        }
        let complete: Result<Vec<ScalarField>, ConfigError> = components
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| {
                    ConfigError::at(
                        section.line,
                        format!("field '{fname}' is missing component '{}'", vars[i]),
                    )
                })
            })
            .collect();
        let field = VectorField::new(complete?)
            .map_err(|e| ConfigError::at(section.line, format!("field '{fname}': {e}")))?;
        if fields.insert(fname.clone(), field).is_some() {
            return Err(ConfigError::at(
                section.line,
                format!("field '{fname}' redefined"),
            ));
        }
    }

    // checks last: they may reference forms and fields
    let mut checks: Vec<CheckSpec> = Vec::new();
    for (order, section) in raw
        .sections
        .iter()
        .filter(|s| s.kind == "check")
        .enumerate()
    {
        let cname = section
            .arg
            .clone()
            .ok_or_else(|| ConfigError::at(section.line, "[check] needs a name: [check NAME]"))?;
        if checks.iter().any(|c| c.name == cname) {
            return Err(ConfigError::at(
                section.line,
                format!("check '{cname}' redefined"),
            ));
        }
        let mut kind = None;
        let mut tol = None;
        let mut rel_tol = None;
        let mut min_abs = None;
        let mut sample_box = None;
        let mut count = 50usize;
        let mut seed = 0xE7u64 + order as u64;
        let mut form = "theta".to_string();
        let mut expr = None;
        let mut from = None;
        let mut to = None;
        let mut point = None;
        let mut times = Vec::new();
        for (key, value, line) in &section.entries {
            match key.as_str() {
                "kind" => {
                    kind = Some(CheckKind::parse(value).ok_or_else(|| {
                        ConfigError::at(*line, format!("unknown check kind '{value}'"))
                    })?)
                }
                "tol" => {
                    let v = parse_number(value, *line, key)?;
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(ConfigError::at(
                            *line,
                            format!("tol must be positive and finite, got {value}"),
                        ));
                    }
                    tol = Some(v);
                }
                "rel_tol" => {
                    let v = parse_number(value, *line, key)?;
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(ConfigError::at(
                            *line,
                            format!("rel_tol must be positive and finite, got {value}"),
                        ));
                    }
                    rel_tol = Some(v);
                }
                "min_abs" => {
                    let v = parse_number(value, *line, key)?;
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(ConfigError::at(
                            *line,
                            format!("min_abs must be positive and finite, got {value}"),
                        ));
                    }
                    min_abs = Some(v);
                }
                "box" => sample_box = Some(parse_box(value, n, *line)?),
                "count" => {
                    count = value.parse::<usize>().map_err(|_| {
                        ConfigError::at(*line, format!("count must be an integer, got '{value}'"))
                    })?
                }
                "seed" => {
                    seed = value.parse::<u64>().map_err(|_| {
                        ConfigError::at(*line, format!("seed must be an integer, got '{value}'"))
                    })?
                }
                "form" => form = value.clone(),
                "expr" => expr = Some(parse_field_expr(value, *line, key)?),
                "from" => from = Some(parse_point(value, n, *line, key)?),
                "to" => to = Some(parse_point(value, n, *line, key)?),
                "point" => point = Some(parse_point(value, n, *line, key)?),
                "times" => {
                    times = value
                        .split_whitespace()
                        .map(|t| parse_number(t, *line, key))
                        .collect::<Result<Vec<f64>, ConfigError>>()?
                }
                other => {
                    return Err(ConfigError::at(
                        *line,
                        format!("unknown key '{other}' in [check {cname}]"),
                    ))
                }
            }
        }
        let kind = kind.ok_or_else(|| {
            ConfigError::at(section.line, format!("check '{cname}' is missing 'kind'"))
        })?;

        let missing = |key: &str| {
            ConfigError::at(
                section.line,
                format!("check '{cname}' ({kind:?}) requires key '{key}'"),
            )
        };
        use CheckKind::*;
        let needs_box = matches!(
            kind,
            ExtensiveFunction
                | FormExtensive
                | Integrability
                | Transversal
                | VanishingContraction
                | ConservativeWork
                | NonconservativeWork
                | WorkWedge
                | ConformalFactor
        );
        if needs_box && sample_box.is_none() {
            return Err(missing("box"));
        }
        let needs_tol = matches!(
            kind,
            ExtensiveFunction
                | FormExtensive
                | Integrability
                | VanishingContraction
                | ConservativeWork
                | ScalingLaw
                | ConformalFactor
        );
        if needs_tol && tol.is_none() {
            return Err(missing("tol"));
        }
        if matches!(kind, Transversal | NonconservativeWork) && min_abs.is_none() {
            return Err(missing("min_abs"));
        }
        if kind == EntropyRecovery {
            if from.is_none() {
                return Err(missing("from"));
            }
            if to.is_none() {
                return Err(missing("to"));
            }
        }
        if kind == ScalingLaw {
            if point.is_none() {
                return Err(missing("point"));
            }
            if times.is_empty() {
                return Err(missing("times"));
            }
        }
        if kind == WorkReference && point.is_none() {
            return Err(missing("point"));
        }
        if kind == ConformalFactor && expr.is_none() {
            return Err(missing("expr"));
        }
        if form != "theta" && form != "epsilon" && !forms.contains_key(&form) {
            return Err(ConfigError::at(
                section.line,
                format!("check '{cname}' references undefined form '{form}'"),
            ));
        }

        checks.push(CheckSpec {
            name: cname,
            kind,
            tol: tol.unwrap_or(1e-8),
            rel_tol: rel_tol.unwrap_or(1e-6),
            min_abs: min_abs.unwrap_or(0.0),
            sample_box,
            count,
            seed,
            form,
            expr,
            from,
            to,
            point,
            times,
        });
    }

    for section in &raw.sections {
        if !matches!(section.kind.as_str(), "constants" | "domain" | "form" | "field" | "check") {
            return Err(ConfigError::at(
                section.line,
                format!("unknown section '[{}]'", section.kind),
            ));
        }
    }

    Ok(Loaded {
        name,
        kind,
        system,
        forms,
        fields,
        checks,
    })
}

/// Minimal glob matching: `*` is any substring, `?` any single character.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let mut dp = vec![vec![false; t.len() + 1]; p.len() + 1];
    dp[0][0] = true;
    for i in 1..=p.len() {
        if p[i - 1] == '*' {
            dp[i][0] = dp[i - 1][0];
        }
        for j in 1..=t.len() {
            dp[i][j] = match p[i - 1] {
                '*' => dp[i - 1][j] || dp[i][j - 1],
                '?' => dp[i - 1][j - 1],
                c => dp[i - 1][j - 1] && c == t[j - 1],
            };
        }
    }
    dp[p.len()][t.len()]
}
