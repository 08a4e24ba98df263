use std::collections::BTreeMap;
use std::path::Path;

use jacobi_renorm::jacobi::JacobiWindow;
use jacobi_renorm::renorm::BranchVector;
use jacobi_renorm::{HyperbolicPoly, PolySpec};
use serde::{Deserialize, Serialize};

/// Smallest tolerance a configuration may request.
pub const MIN_TOLERANCE: f64 = 100.0 * f64::EPSILON;

/// Configuration or usage problem (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<jacobi_renorm::Error> for ConfigError {
    fn from(e: jacobi_renorm::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("recurrence", 1e-9),
        ("renorm_equation", 1e-7),
        ("polynomial_form", 1e-8),
        ("re0", 1e-8),
        ("sigma", 1e-9),
        ("dual_branch", 1e-8),
        ("contraction_slack", 0.02),
        ("balanced_deviation", 1e-5),
        ("ruelle_deviation", 1e-4),
        ("ruelle_eigen", 1e-9),
        ("moment_consistency", 1e-9),
        ("moment_stability", 1e-10),
        ("balanced_identity", 1e-10),
        ("zero_diagonal", 1e-10),
        ("factorization", 1e-9),
        ("factor_swap", 1e-10),
        ("positivity", 1e-10),
        ("lipschitz_cv", 0.5),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SeedSpec {
    Constant {
        p: f64,
        q: f64,
    },
    Periodic {
        p: Vec<f64>,
        q: Vec<f64>,
    },
    /// `index,p,q` rows; tails are truncated.
    Csv {
        path: String,
    },
}

impl SeedSpec {
    /// The seed on `−half..=half`, with spectral interval `[−1, 1]` when it fits there.
    pub fn build(&self, half: i64) -> Result<JacobiWindow, ConfigError> {
        let w = match self {
            SeedSpec::Constant { p, q } => JacobiWindow::constant(*p, *q, -half, half)?,
            SeedSpec::Periodic { p, q } => JacobiWindow::periodic(p.clone(), q.clone(), -half, half)?,
            SeedSpec::Csv { path } => {
                let f = std::fs::File::open(path).map_err(|e| ConfigError(format!("{path}: {e}")))?;
                JacobiWindow::read_csv(f)?
            }
        };
        let (lo, hi) = w.spectral_interval();
        Ok(if lo >= -1.0 && hi <= 1.0 { w.with_spectral_interval(-1.0, 1.0) } else { w })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub depth: usize,
    pub n_coeffs: usize,
    pub ruelle: bool,
    pub ruelle_depth: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { depth: 12, n_coeffs: 32, ruelle: false, ruelle_depth: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DarbouxConfig {
    pub rho: f64,
    pub pairs: usize,
    pub sweep: Vec<f64>,
    /// Perturbation size of the random pairs.
    pub h: f64,
}

impl Default for DarbouxConfig {
    fn default() -> Self {
        DarbouxConfig { rho: 12.0, pairs: 6, sweep: vec![12.0, 15.0, 20.0, 30.0], h: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub poly: PolySpec,
    /// `T_1, T_2, …` for towers; overrides `poly` in `iterate`.
    pub tower: Option<Vec<PolySpec>>,
    pub branch: String,
    /// Per-step signs `ε_m` (quadratic towers only).
    pub eps: Option<Vec<i8>>,
    pub seed_matrix: SeedSpec,
    pub steps: usize,
    /// Number of stored sites.
    pub window: usize,
    pub force: bool,
    pub tolerances: BTreeMap<String, f64>,
    pub oracle: OracleConfig,
    pub darboux: DarbouxConfig,
    pub rng_seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            poly: PolySpec::Quadratic { rho: 12.0 },
            tower: None,
            branch: "-".into(),
            eps: None,
            seed_matrix: SeedSpec::Constant { p: 0.5, q: 0.0 },
            steps: 8,
            window: 1024,
            force: false,
            tolerances: BTreeMap::new(),
            oracle: OracleConfig::default(),
            darboux: DarbouxConfig::default(),
            rng_seed: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// Schema checks; `with_branch` also checks the branch length against the degree.
    pub fn validate(&self, with_branch: bool) -> Result<(), ConfigError> {
        let known = default_tolerances();
        for (k, v) in &self.tolerances {
            if !known.contains_key(k) {
                return Err(ConfigError(format!("unknown tolerance {k:?}")));
            }
            if !(v.is_finite() && *v >= MIN_TOLERANCE) {
                return Err(ConfigError(format!(
                    "tolerance {k} = {v:e} is below 100·eps ({MIN_TOLERANCE:e})"
                )));
            }
        }
        if self.window < 64 {
            return Err(ConfigError(format!("window {} is too small (minimum 64)", self.window)));
        }
        let t = self.poly.build()?;
        if with_branch {
            self.branch_vector(&t)?;
        }
        if let Some(eps) = &self.eps {
            if eps.is_empty() || eps.iter().any(|&e| e != 1 && e != -1) {
                return Err(ConfigError("eps entries must be ±1".into()));
            }
        }
        Ok(())
    }

    /// Branch vector checked against `d − 1`.
    pub fn branch_vector(&self, t: &HyperbolicPoly) -> Result<BranchVector, ConfigError> {
        let b: BranchVector = self.branch.parse()?;
        let want = t.degree() - 1;
        if b.len() != want {
            return Err(ConfigError(format!(
                "branch {:?} has length {}, degree {} needs {want}",
                self.branch,
                b.len(),
                t.degree()
            )));
        }
        Ok(b)
    }

    /// Effective tolerance: configured or default value times `scale`.
    pub fn tol(&self, name: &str, scale: f64) -> f64 {
        let base = self.tolerances.get(name).copied().unwrap_or_else(|| default_tolerances()[name]);
        base * scale
    }

    pub fn half_window(&self) -> i64 {
        (self.window / 2) as i64
    }
}

/// `quadratic:ρ`, `chebyshev:n:ε`, `coeffs:c0,c1,…`, or a JSON object.
pub fn parse_poly(s: &str) -> Result<PolySpec, ConfigError> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| ConfigError(format!("polynomial {s:?}: {e}")));
    }
    let bad = || ConfigError(format!("cannot parse polynomial {s:?}"));
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
    let mut parts = s.splitn(2, ':');
    let kind = parts.next().unwrap_or("");
    let rest = parts.next().ok_or_else(bad)?;
    match kind {
        "quadratic" => Ok(PolySpec::Quadratic { rho: num(rest)? }),
        "chebyshev" => {
            let (n, eps) = rest.split_once(':').ok_or_else(bad)?;
            Ok(PolySpec::Chebyshev { n: n.trim().parse().map_err(|_| bad())?, eps: num(eps)? })
        }
        "coeffs" => Ok(PolySpec::Coeffs { c: rest.split(',').map(num).collect::<Result<_, _>>()? }),
        _ => Err(bad()),
    }
}

pub fn parse_sweep(s: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| ConfigError(format!("bad sweep entry {x:?}"))))
        .collect()
}
