//! Flat key = value experiment configs with repeated-key lists.
//!
//! The format is deliberately trivial: one `key = value` per line, `#`
//! comments, repeated keys append to a list, values are whitespace-separated
//! tokens. A `format = 1` key gates compatibility. The config hash (FNV-1a
//! over the raw file bytes) rides along into every output for provenance.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use zerocurrents_core::ensembles::{Automorphism, DensityWeight, EnsembleFamily};
use zerocurrents_core::metrics::{fnv1a, LimitCurrent, Psi0};
use zerocurrents_core::space::ModelSpace;

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.into(),
    }
}

/// One bundle sequence declaration (index k).
#[derive(Debug, Clone)]
pub struct SequenceDecl {
    /// Bidegrees per p; CP1 uses the first entry.
    pub degrees: Vec<[u32; 2]>,
    /// Perturbation coefficient per p.
    pub taus: Vec<f64>,
    pub psi0: Psi0,
    /// Curvature-convergence rate a_k.
    pub a_rate: f64,
    /// Explicit A schedule, or None for the curvature-mass default.
    pub scales: Option<Vec<f64>>,
    pub limit: LimitCurrent,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub space: ModelSpace,
    pub m: usize,
    pub p_list: Vec<u32>,
    pub sequences: Vec<SequenceDecl>,
    pub c0: f64,
    pub ensemble: EnsembleFamily,
    pub samples: usize,
    pub resolution: usize,
    pub dict: String,
    pub seed: u64,
    pub c4: f64,
    pub growth_b: f64,
    pub log_samples: bool,
    pub plotdata: bool,
    /// Pure-FS control twin alongside the perturbed family in rate outputs.
    pub control_row: bool,
    pub config_hash: u64,
}

struct Raw {
    entries: BTreeMap<String, Vec<String>>,
}

impl Raw {
    fn one(&self, key: &str) -> Result<&str, ConfigError> {
        match self.entries.get(key) {
            Some(v) if v.len() == 1 => Ok(&v[0]),
            Some(_) => Err(err(key, "expected a single value, got a list")),
            None => Err(err(key, "missing")),
        }
    }

    fn one_or(&self, key: &str, default: &str) -> String {
        match self.entries.get(key) {
            Some(v) if v.len() == 1 => v[0].clone(),
            _ => default.to_string(),
        }
    }

    fn list(&self, key: &str) -> Result<&[String], ConfigError> {
        self.entries
            .get(key)
            .map(|v| v.as_slice())
            .ok_or_else(|| err(key, "missing"))
    }
}

fn parse_u32(key: &str, s: &str) -> Result<u32, ConfigError> {
    s.parse().map_err(|_| err(key, format!("`{s}` is not an unsigned integer")))
}

fn parse_f64(key: &str, s: &str) -> Result<f64, ConfigError> {
    s.parse().map_err(|_| err(key, format!("`{s}` is not a number")))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(&format!("line {}", lineno + 1), "expected key = value"))?;
        entries
            .entry(k.trim().to_string())
            .or_default()
            .push(v.trim().to_string());
    }
    let raw = Raw { entries };

    let format = parse_u32("format", raw.one("format")?)?;
    if format != 1 {
        return Err(err("format", format!("unsupported format {format}, expected 1")));
    }
    let name = raw.one_or("name", "experiment");
    let space = match raw.one("space")? {
        "cp1" => ModelSpace::Cp1,
        "cp1xcp1" => ModelSpace::Cp1xCp1,
        other => return Err(err("space", format!("unknown space `{other}`"))),
    };
    let m: usize = raw
        .one("m")?
        .parse()
        .map_err(|_| err("m", "not an integer"))?;
    if m == 0 || m > space.dim() {
        return Err(err("m", format!("m = {m} invalid on {}", space.tag())));
    }

    let p_list: Vec<u32> = raw
        .list("p")?
        .iter()
        .map(|s| parse_u32("p", s))
        .collect::<Result<_, _>>()?;
    if p_list.is_empty() {
        return Err(err("p", "empty schedule"));
    }
    for w in p_list.windows(2) {
        if w[1] <= w[0] {
            return Err(err("p", "schedule must be strictly increasing"));
        }
    }

    let mut sequences = Vec::with_capacity(m);
    for k in 1..=m {
        let degk = format!("deg{k}");
        let deg_raw = raw.list(&degk)?;
        if deg_raw.len() != p_list.len() {
            return Err(err(
                &degk,
                format!(
                    "has {} entries but `p` has {}; schedules must align",
                    deg_raw.len(),
                    p_list.len()
                ),
            ));
        }
        let mut degrees = Vec::with_capacity(deg_raw.len());
        for s in deg_raw {
            let toks: Vec<&str> = s.split_whitespace().collect();
            let need = space.factors();
            if toks.len() != need {
                return Err(err(&degk, format!("entry `{s}` needs {need} degree(s)")));
            }
            let mut d = [0u32; 2];
            for (i, t) in toks.iter().enumerate() {
                d[i] = parse_u32(&degk, t)?;
            }
            degrees.push(d);
        }

        let tauk = format!("tau{k}");
        let taus: Vec<f64> = match raw.entries.get(&tauk) {
            None => vec![0.0; p_list.len()],
            Some(v) if v.len() == 1 => vec![parse_f64(&tauk, &v[0])?; p_list.len()],
            Some(v) if v.len() == p_list.len() => v
                .iter()
                .map(|s| parse_f64(&tauk, s))
                .collect::<Result<_, _>>()?,
            Some(v) => {
                return Err(err(
                    &tauk,
                    format!("has {} entries but `p` has {}", v.len(), p_list.len()),
                ))
            }
        };

        let psik = format!("psi0_{k}");
        let psi0 = match raw.one_or(&psik, "zero").as_str() {
            "zero" => Psi0::Zero,
            s if s.starts_with("cap") => {
                let amp = parse_f64(&psik, s.strip_prefix("cap").unwrap().trim())?;
                Psi0::Cap { amp }
            }
            s if s.starts_with("equator_x") => {
                let amp = parse_f64(&psik, s.strip_prefix("equator_x").unwrap().trim())?;
                Psi0::EquatorX { amp, factor: 0 }
            }
            other => return Err(err(&psik, format!("unknown potential `{other}`"))),
        };

        let ak = format!("a{k}");
        let a_rate = parse_f64(&ak, &raw.one_or(&ak, "1.0"))?;

        let scalek = format!("A{k}");
        let scales = match raw.entries.get(&scalek) {
            None => None,
            Some(v) if v.len() == 1 && v[0] == "auto" => None,
            Some(v) if v.len() == p_list.len() => Some(
                v.iter()
                    .map(|s| parse_f64(&scalek, s))
                    .collect::<Result<Vec<f64>, _>>()?,
            ),
            Some(v) => {
                return Err(err(
                    &scalek,
                    format!("has {} entries but `p` has {}", v.len(), p_list.len()),
                ))
            }
        };

        let limk = format!("limit{k}");
        let lim_str = raw.one_or(&limk, "fs 1.0");
        let limit = parse_limit(&limk, &lim_str)?;

        sequences.push(SequenceDecl {
            degrees,
            taus,
            psi0,
            a_rate,
            scales,
            limit,
        });
    }

    let c0 = parse_f64("C0", &raw.one_or("C0", "1.0"))?;
    let ensemble = match raw.one_or("ensemble", "fs").as_str() {
        "fs" => EnsembleFamily::Fs,
        s if s.starts_with("autopull") => {
            let factor = parse_f64("ensemble", s.strip_prefix("autopull").unwrap().trim())?;
            EnsembleFamily::Autopull {
                g: Automorphism::DiagFirst { factor },
            }
        }
        s if s.starts_with("density") => {
            let height = parse_f64("ensemble", s.strip_prefix("density").unwrap().trim())?;
            EnsembleFamily::Density {
                w: DensityWeight::AxisBump { height },
            }
        }
        other => return Err(err("ensemble", format!("unknown family `{other}`"))),
    };

    let samples: usize = raw
        .one_or("samples", "1000")
        .parse()
        .map_err(|_| err("samples", "not an integer"))?;
    if samples == 0 {
        return Err(err("samples", "must be at least 1"));
    }
    let resolution: usize = raw
        .one_or("resolution", "256")
        .parse()
        .map_err(|_| err("resolution", "not an integer"))?;
    if resolution < zerocurrents_core::grid::MIN_RESOLUTION {
        return Err(err(
            "resolution",
            format!("below minimum {}", zerocurrents_core::grid::MIN_RESOLUTION),
        ));
    }
    let dict = raw.one_or(
        "dict",
        match space {
            ModelSpace::Cp1 => "cp1_default",
            ModelSpace::Cp1xCp1 => "cp1xcp1_default",
        },
    );
    let seed: u64 = raw
        .one_or("seed", "1")
        .parse()
        .map_err(|_| err("seed", "not an integer"))?;
    let c4 = parse_f64("c4", &raw.one_or("c4", "0.02"))?;
    let growth_b = parse_f64("growth_b", &raw.one_or("growth_b", "0.5"))?;
    let log_samples = raw.one_or("log_samples", "false") == "true";
    let plotdata = raw.one_or("plotdata", "false") == "true";
    let control_row = raw.one_or("control_row", "false") == "true";

    Ok(ExperimentConfig {
        name,
        space,
        m,
        p_list,
        sequences,
        c0,
        ensemble,
        samples,
        resolution,
        dict,
        seed,
        c4,
        growth_b,
        log_samples,
        plotdata,
        control_row,
        config_hash: 0,
    })
}

fn parse_limit(field: &str, s: &str) -> Result<LimitCurrent, ConfigError> {
    // grammar: "fs <w1> [<w2>] [cap <c1> [<c2>]]"
    let toks: Vec<&str> = s.split_whitespace().collect();
    let mut fs = [0.0f64; 2];
    let mut cap = [0.0f64; 2];
    let mut i = 0usize;
    let mut target: Option<bool> = None; // true = fs, false = cap
    let mut fs_n = 0;
    let mut cap_n = 0;
    while i < toks.len() {
        match toks[i] {
            "fs" => target = Some(true),
            "cap" => target = Some(false),
            t => {
                let v = parse_f64(field, t)?;
                match target {
                    Some(true) => {
                        if fs_n >= 2 {
                            return Err(err(field, "too many fs coefficients"));
                        }
                        fs[fs_n] = v;
                        fs_n += 1;
                    }
                    Some(false) => {
                        if cap_n >= 2 {
                            return Err(err(field, "too many cap coefficients"));
                        }
                        cap[cap_n] = v;
                        cap_n += 1;
                    }
                    None => return Err(err(field, "coefficient before fs/cap tag")),
                }
            }
        }
        i += 1;
    }
    Ok(LimitCurrent { fs, cap })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let bytes = std::fs::read(path)
        .map_err(|e| err("config", format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| err("config", "not valid UTF-8"))?;
    let mut cfg = parse_config(&text)?;
    cfg.config_hash = fnv1a(0xcbf29ce484222325, &bytes);
    Ok(cfg)
}
