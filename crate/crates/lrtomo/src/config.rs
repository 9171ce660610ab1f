//! Experiment settings: command-line flags layered over an optional flat
//! `key = value` file, layered over per-command defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Tr,
    Lsqr,
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tr" => Ok(SolverKind::Tr),
            "lsqr" => Ok(SolverKind::Lsqr),
            other => Err(format!("unknown solver `{other}` (expected tr or lsqr)")),
        }
    }
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Tr => "tr",
            SolverKind::Lsqr => "lsqr",
        }
    }
}

/// Every setting is optional at this layer; `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub phantom: Option<String>,
    pub size: Option<usize>,
    pub angles: Option<Vec<usize>>,
    pub beamlets: Option<usize>,
    pub solver: Option<SolverKind>,
    pub ranks: Option<Vec<usize>>,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
    pub eps: Option<f64>,
    pub max_iters: Option<usize>,
    pub lsqr_iters: Option<usize>,
    pub atol: Option<f64>,
    pub noise: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: Overrides) -> Overrides {
        Overrides {
            phantom: self.phantom.or(lower.phantom),
            size: self.size.or(lower.size),
            angles: self.angles.or(lower.angles),
            beamlets: self.beamlets.or(lower.beamlets),
            solver: self.solver.or(lower.solver),
            ranks: self.ranks.or(lower.ranks),
            lambda: self.lambda.or(lower.lambda),
            rho: self.rho.or(lower.rho),
            eps: self.eps.or(lower.eps),
            max_iters: self.max_iters.or(lower.max_iters),
            lsqr_iters: self.lsqr_iters.or(lower.lsqr_iters),
            atol: self.atol.or(lower.atol),
            noise: self.noise.or(lower.noise),
            seed: self.seed.or(lower.seed),
            out: self.out.or(lower.out),
        }
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| format!("bad list element `{t}`")))
        .collect()
}

/// Parses `key = value` lines; `#` starts a comment. Keys match the long
/// flag names (`K`, `max-iters`, ...); lists are comma-separated.
pub fn parse_config(text: &str) -> Result<Overrides, String> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", n + 1))?;
        map.insert(k.trim().to_owned(), (n + 1, v.trim().to_owned()));
    }
    let mut o = Overrides::default();
    for (key, (line, v)) in map {
        let bad = |e: String| format!("config line {line} ({key}): {e}");
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("bad number `{v}`")));
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad integer `{v}`")));
        match key.as_str() {
            "phantom" => o.phantom = Some(v),
            "K" => o.size = Some(int(&v)?),
            "angles" => o.angles = Some(parse_list(&v).map_err(bad)?),
            "beamlets" => o.beamlets = Some(int(&v)?),
            "solver" => o.solver = Some(v.parse().map_err(bad)?),
            "rank" => o.ranks = Some(parse_list(&v).map_err(bad)?),
            "lambda" => o.lambda = Some(num(&v)?),
            "rho" => o.rho = Some(num(&v)?),
            "eps" => o.eps = Some(num(&v)?),
            "max-iters" => o.max_iters = Some(int(&v)?),
            "lsqr-iters" => o.lsqr_iters = Some(int(&v)?),
            "atol" => o.atol = Some(num(&v)?),
            "noise" => o.noise = Some(parse_list(&v).map_err(bad)?),
            "seed" => o.seed = Some(v.parse().map_err(|_| bad(format!("bad seed `{v}`")))?),
            "out" => o.out = Some(PathBuf::from(v)),
            _ => return Err(format!("config line {line}: unknown key `{key}`")),
        }
    }
    Ok(o)
}

pub fn load_config(path: &Path) -> Result<Overrides, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text)
}
