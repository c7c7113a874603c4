//! Flat `key = value` run configuration with dotted keys.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use flatquant::lattice::LatticeBasis;
use flatquant::spaceform::{make_space_form, CellParams, Family, SpaceFormSpec};
use flatquant::{FourierFunction, C64};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Every key the configuration may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "spaceform.family",
    "spaceform.lengths",
    "spaceform.gamma",
    "t",
    "base",
    "kernel.x",
    "kernel.tol",
    "check.tol",
    "quad.cell_nodes",
    "quad.gauss_nodes",
    "function.f",
    "function.g",
    "transform.points",
    "repro.space",
    "repro.degree",
    "repro.points",
    "repro.strip",
    "repro.seed",
    "repro.kernel_nodes",
    "invariance.samples",
    "propagator.z_t",
    "propagator.z_0",
    "propagator.time",
    "propagator.n_list",
    "propagator.engine",
    "propagator.gauss_nodes",
    "geometry.metric",
    "geometry.q",
    "geometry.p",
    "geometry.richardson",
];

/// Parsed configuration. Getters fall back to defaults and record the value
/// they resolved so the report can echo it.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    raw: BTreeMap<String, String>,
    resolved: std::cell::RefCell<BTreeMap<String, String>>,
}

fn bad(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(bad(&format!("line {}", lineno + 1), "expected `key = value`"));
            };
            let key = key.trim();
            if !is_known(key) {
                return Err(bad(key, "unknown key"));
            }
            if raw.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(bad(key, "given more than once"));
            }
        }
        Ok(Self {
            raw,
            resolved: Default::default(),
        })
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw.contains_key(key)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.raw.insert(key.to_string(), value);
    }

    /// sha256 of the canonical `key = value` listing of the supplied entries.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.raw {
            h.update(format!("{k} = {v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }

    fn record(&self, key: &str, value: String) {
        self.resolved.borrow_mut().insert(key.to_string(), value);
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.raw.get(key).map(String::as_str)
    }

    pub fn string(&self, key: &str, default: &str) -> String {
        let v = self.text(key).unwrap_or(default).to_string();
        self.record(key, v.clone());
        v
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = match self.text(key) {
            Some(s) => parse_f64(key, s)?,
            None => default,
        };
        if !v.is_finite() {
            return Err(bad(key, "must be finite"));
        }
        self.record(key, format!("{v:.16e}"));
        Ok(v)
    }

    pub fn positive(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.f64(key, default)?;
        if v <= 0.0 {
            return Err(bad(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        let v = match self.text(key) {
            Some(s) => s
                .parse::<usize>()
                .map_err(|_| bad(key, format!("expected a non-negative integer, got `{s}`")))?,
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool, CliError> {
        let v = match self.text(key) {
            Some("true") => true,
            Some("false") => false,
            Some(s) => return Err(bad(key, format!("expected true or false, got `{s}`"))),
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let v = match self.text(key) {
            Some(s) => parse_list(key, s)?,
            None => default.to_vec(),
        };
        self.record(key, join(&v));
        Ok(v)
    }

    /// `re im` pairs, one complex number per pair.
    pub fn complex_list(&self, key: &str, default: &[C64]) -> Result<Vec<C64>, CliError> {
        let v = match self.text(key) {
            Some(s) => {
                let xs = parse_list(key, s)?;
                if xs.len() % 2 != 0 {
                    return Err(bad(key, "expected `re im` pairs"));
                }
                xs.chunks(2).map(|c| C64::new(c[0], c[1])).collect()
            }
            None => default.to_vec(),
        };
        let flat: Vec<f64> = v.iter().flat_map(|c| [c.re, c.im]).collect();
        self.record(key, join(&flat));
        Ok(v)
    }

    pub fn space_form(&self) -> Result<SpaceFormSpec, CliError> {
        let family: Family = self
            .string("spaceform.family", "circle")
            .parse()
            .map_err(|e: flatquant::Error| bad("spaceform.family", e.to_string()))?;
        let mut params = CellParams {
            lengths: self.list("spaceform.lengths", &default_lengths(family))?,
            ..CellParams::default()
        };
        if self.text("spaceform.gamma").is_some() {
            params.gamma = Some(self.f64("spaceform.gamma", 0.0)?);
        }
        let rows: Vec<(String, &str)> = self
            .raw
            .iter()
            .filter(|(k, _)| k.starts_with("lattice.basis.row"))
            .map(|(k, v)| (k.clone(), v.as_str()))
            .collect();
        if !rows.is_empty() {
            let mut parsed = Vec::with_capacity(rows.len());
            for i in 0..rows.len() {
                let key = format!("lattice.basis.row{i}");
                let Some((_, s)) = rows.iter().find(|(k, _)| *k == key) else {
                    return Err(bad(&key, "basis rows must be numbered from 0 without gaps"));
                };
                let row = parse_list(&key, s)?;
                self.record(&key, join(&row));
                parsed.push(row);
            }
            let basis = LatticeBasis::from_rows(&parsed).map_err(|e| bad("lattice.basis.row0", e.to_string()))?;
            params.basis = Some(basis);
        }
        make_space_form(family, &params).map_err(|e| bad("spaceform.family", e.to_string()))
    }

    /// Terms `i₁ … iₙ : re im`, separated by `;`.
    pub fn function(&self, key: &str, spec: &SpaceFormSpec, default: &str) -> Result<FourierFunction, CliError> {
        let text = self.string(key, default);
        let mut terms = Vec::new();
        for term in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let Some((idx, coef)) = term.split_once(':') else {
                return Err(bad(key, format!("term `{term}` lacks `:`")));
            };
            let idx: Vec<i64> = idx
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad(key, format!("bad index `{s}`"))))
                .collect::<Result<_, _>>()?;
            if idx.len() != spec.dim {
                return Err(bad(key, format!("index `{term}` has {} entries, dimension is {}", idx.len(), spec.dim)));
            }
            let c = parse_list(key, coef)?;
            if c.len() != 2 {
                return Err(bad(key, format!("coefficient in `{term}` must be `re im`")));
            }
            terms.push((idx, C64::new(c[0], c[1])));
        }
        FourierFunction::from_terms(spec.reciprocal(), terms).map_err(|e| bad(key, e.to_string()))
    }

    /// Points of `dim` complex coordinates (`re im` per coordinate), separated by `;`.
    pub fn points(&self, key: &str, dim: usize, default: &str) -> Result<Vec<Vec<C64>>, CliError> {
        let text = self.string(key, default);
        let mut out = Vec::new();
        for p in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let xs = parse_list(key, p)?;
            if xs.len() != 2 * dim {
                return Err(bad(key, format!("point `{p}` needs {} numbers", 2 * dim)));
            }
            out.push(xs.chunks(2).map(|c| C64::new(c[0], c[1])).collect());
        }
        Ok(out)
    }
}

fn is_known(key: &str) -> bool {
    KNOWN_KEYS.contains(&key)
        || key
            .strip_prefix("lattice.basis.row")
            .is_some_and(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()))
}

fn default_lengths(family: Family) -> Vec<f64> {
    match family {
        Family::Circle => vec![2.0 * PI],
        Family::Torus(n) => vec![2.0 * PI; n],
        Family::G3 | Family::G4 | Family::G5 => vec![2.0, 2.0, 3.0],
        Family::G1 | Family::G2 | Family::G6 => vec![2.0, 2.5, 3.0],
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    let s = s.trim();
    match s {
        "pi" => Ok(PI),
        "2pi" => Ok(2.0 * PI),
        _ => s.parse().map_err(|_| bad(key, format!("expected a number, got `{s}`"))),
    }
}

/// Numbers separated by whitespace or commas.
fn parse_list(key: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| parse_f64(key, t))
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")
}
