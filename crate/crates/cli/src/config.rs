//! Run configuration: a TOML file with nested sections, every key optional.

use std::path::{Path, PathBuf};

use pxlap_core::degiorgi::CertifyParams;
use pxlap_core::multisolve::SolverParams;
use pxlap_core::{ExponentSpec, Grid};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// worker threads for sweeps, 0 for one per core
    pub workers: usize,
    pub grid: GridConfig,
    pub exponents: ExponentConfig,
    pub nonlinearity: NonlinearityConfig,
    pub lambda: LambdaConfig,
    pub mu: MuConfig,
    pub k_grid: KGridConfig,
    pub solver: SolverConfig,
    pub certify: CertifyConfig,
    pub local_min: LocalMinConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 20240917,
            output_dir: PathBuf::from("pxlap-out"),
            workers: 0,
            grid: GridConfig::default(),
            exponents: ExponentConfig::default(),
            nonlinearity: NonlinearityConfig::default(),
            lambda: LambdaConfig::default(),
            mu: MuConfig::default(),
            k_grid: KGridConfig::default(),
            solver: SolverConfig::default(),
            certify: CertifyConfig::default(),
            local_min: LocalMinConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0], nodes: vec![48, 48] }
    }
}

/// A number, an expression in `x1..x3`, or one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExponentValue {
    Constant(f64),
    Expression(String),
    Nodal(Vec<f64>),
}

impl ExponentValue {
    pub fn spec(&self) -> ExponentSpec {
        match self {
            ExponentValue::Constant(c) => ExponentSpec::Constant(*c),
            ExponentValue::Expression(s) => ExponentSpec::Expression(s.clone()),
            ExponentValue::Nodal(v) => ExponentSpec::Nodal(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentConfig {
    pub p: ExponentValue,
    pub q: ExponentValue,
    /// required positive gap in `inf (q − p*)`
    pub margin: f64,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        ExponentConfig {
            p: ExponentValue::Expression("1.5 + 0.3*x1".into()),
            q: ExponentValue::Constant(20.0),
            margin: pxlap_core::exponents::DEFAULT_EXPONENT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearityKind {
    /// `a s³ / (1 + |s|^c)`
    RationalCubic,
    /// `a s`
    Linear,
    Zero,
    /// `expression` in `s` and `x1..x3`
    Expression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: NonlinearityKind,
    pub amplitude: f64,
    pub c: f64,
    pub expression: String,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        NonlinearityConfig { kind: NonlinearityKind::RationalCubic, amplitude: 1.0, c: 2.8, expression: String::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaConfig {
    /// explicit λ for `solve`; must exceed 1/θ̂
    pub value: Option<f64>,
    /// `solve` uses `factor/θ̂` when `value` is absent
    pub factor: f64,
    /// sweep interval `[a, b] ⊂ (1/θ̂, ∞)`; overrides `sweep_factors`
    pub interval: Option<[f64; 2]>,
    pub samples: usize,
    /// sweep values as multiples of 1/θ̂
    pub sweep_factors: Vec<f64>,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        LambdaConfig { value: None, factor: 2.0, interval: None, samples: 3, sweep_factors: vec![1.5, 2.0, 2.5] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuConfig {
    /// upper cap applied to δ₁
    pub cap: f64,
    /// explicit μ for `solve`; certification is not guaranteed above δ
    pub value: Option<f64>,
    /// `solve` uses `fraction·δ` when `value` is absent
    pub fraction: f64,
    /// sweep values as multiples of δ
    pub sweep_fractions: Vec<f64>,
}

impl Default for MuConfig {
    fn default() -> Self {
        MuConfig { cap: 1e-3, value: None, fraction: 1.0, sweep_fractions: vec![0.0, 0.5, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KGridConfig {
    /// explicit increasing grid starting at 2 or above; overrides `ratio`/`count`
    pub values: Vec<f64>,
    pub ratio: f64,
    pub count: usize,
}

impl Default for KGridConfig {
    fn default() -> Self {
        KGridConfig { values: Vec::new(), ratio: 1.25, count: 80 }
    }
}

impl KGridConfig {
    pub fn grid(&self) -> Vec<f64> {
        if self.values.is_empty() {
            pxlap_core::degiorgi::default_k_grid(self.ratio, self.count)
        } else {
            self.values.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iter: usize,
    pub contraction: f64,
    pub sufficient_decrease: f64,
    pub lbfgs_memory: usize,
    pub multistart: usize,
    pub path_nodes: usize,
    pub string_iterations: usize,
    pub distinct_threshold: f64,
    pub eps_reg: f64,
    pub eps_reg_alt: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolverParams::default();
        SolverConfig {
            tolerance: p.tolerance,
            max_iter: p.max_iter,
            contraction: p.contraction,
            sufficient_decrease: p.sufficient_decrease,
            lbfgs_memory: p.lbfgs_memory,
            multistart: p.multistart,
            path_nodes: p.path_nodes,
            string_iterations: p.string_iterations,
            distinct_threshold: p.distinct_threshold,
            eps_reg: p.eps_reg,
            eps_reg_alt: p.eps_reg_alt,
        }
    }
}

impl SolverConfig {
    pub fn params(&self, seed: u64) -> SolverParams {
        SolverParams {
            tolerance: self.tolerance,
            max_iter: self.max_iter,
            contraction: self.contraction,
            sufficient_decrease: self.sufficient_decrease,
            lbfgs_memory: self.lbfgs_memory,
            multistart: self.multistart,
            path_nodes: self.path_nodes,
            string_iterations: self.string_iterations,
            distinct_threshold: self.distinct_threshold,
            eps_reg: self.eps_reg,
            eps_reg_alt: self.eps_reg_alt,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    /// ball radius `R ∈ (0, 1]`
    pub radius: f64,
    pub i_max: usize,
    /// primary ball center, domain center when empty
    pub center: Vec<f64>,
    pub covering: bool,
    pub tol_disc: f64,
    pub caccioppoli_samples: usize,
    /// random fields added to the embedding-constant family
    pub sobolev_samples: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        let p = CertifyParams::default();
        CertifyConfig {
            radius: p.radius,
            i_max: p.i_max,
            center: Vec::new(),
            covering: p.covering,
            tol_disc: pxlap_core::degiorgi::DEFAULT_TOL_DISC,
            caccioppoli_samples: 5,
            sobolev_samples: 32,
        }
    }
}

impl CertifyConfig {
    pub fn params(&self) -> CertifyParams {
        CertifyParams {
            radius: self.radius,
            i_max: self.i_max,
            center: if self.center.is_empty() { None } else { Some(self.center.clone()) },
            covering: self.covering,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalMinConfig {
    /// decreasing Sobolev-norm radii
    pub radii: Vec<f64>,
    pub samples: usize,
}

impl Default for LocalMinConfig {
    fn default() -> Self {
        LocalMinConfig { radii: vec![1e-1, 1e-2, 1e-3], samples: 64 }
    }
}

impl RunConfig {
    pub fn from_toml(src: &str) -> Result<Self, CliError> {
        toml::from_str(src).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key.path=value` overrides; values are parsed as TOML and fall
    /// back to plain strings.
    pub fn with_overrides(&self, sets: &[String]) -> Result<Self, CliError> {
        if sets.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Value::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        for s in sets {
            let (key, raw) =
                s.split_once('=').ok_or_else(|| CliError::Config(format!("override '{s}' is not key=value")))?;
            let value = parse_value(raw.trim());
            set_path(&mut root, key.trim(), value)?;
        }
        root.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(&self.grid.lower, &self.grid.upper, &self.grid.nodes)?)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cur.as_table_mut().ok_or_else(|| CliError::Config(format!("'{key}' does not name a table")))?;
        if i + 1 == parts.len() {
            table.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = table.entry((*part).to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(CliError::Config(format!("empty override key '{key}'")))
}

/// One documented key of the reference page.
struct KeyDoc {
    key: &'static str,
    doc: &'static str,
}

const KEY_DOCS: &[KeyDoc] = &[
    KeyDoc { key: "seed", doc: "seed for multistart fields, ring directions and diagnostics" },
    KeyDoc { key: "output_dir", doc: "directory receiving fields, traces and reports" },
    KeyDoc { key: "workers", doc: "sweep worker threads, 0 uses one per core" },
    KeyDoc { key: "grid.lower", doc: "lower box corner, one entry per dimension (1 to 3)" },
    KeyDoc { key: "grid.upper", doc: "upper box corner" },
    KeyDoc { key: "grid.nodes", doc: "nodes per axis including the boundary layer, at least 3" },
    KeyDoc { key: "exponents.p", doc: "p(x): a number, an expression in x1..x3, or one value per node" },
    KeyDoc { key: "exponents.q", doc: "q(x), same forms as p; must satisfy inf(q - p*) > margin" },
    KeyDoc { key: "exponents.margin", doc: "required gap in inf(q - p*)" },
    KeyDoc { key: "nonlinearity.kind", doc: "rational-cubic, linear, zero or expression" },
    KeyDoc { key: "nonlinearity.amplitude", doc: "prefactor a of the built-in models" },
    KeyDoc { key: "nonlinearity.c", doc: "exponent c of a s^3/(1+|s|^c)" },
    KeyDoc { key: "nonlinearity.expression", doc: "f(x, s) for kind = expression, in s and x1..x3" },
    KeyDoc { key: "lambda.value", doc: "explicit lambda for solve; must exceed 1/theta" },
    KeyDoc { key: "lambda.factor", doc: "solve uses factor/theta when value is unset" },
    KeyDoc { key: "lambda.interval", doc: "sweep interval [a, b] inside (1/theta, inf); overrides sweep_factors" },
    KeyDoc { key: "lambda.samples", doc: "number of evenly spaced samples of the interval" },
    KeyDoc { key: "lambda.sweep_factors", doc: "sweep lambdas as multiples of 1/theta" },
    KeyDoc { key: "mu.cap", doc: "cap applied to delta_1" },
    KeyDoc { key: "mu.value", doc: "explicit mu for solve; no certification guarantee above delta" },
    KeyDoc { key: "mu.fraction", doc: "solve uses fraction*delta when value is unset" },
    KeyDoc { key: "mu.sweep_fractions", doc: "sweep mus as multiples of delta" },
    KeyDoc { key: "k_grid.values", doc: "explicit increasing K grid starting at 2 or above" },
    KeyDoc { key: "k_grid.ratio", doc: "geometric ratio of the default grid 2, 2r, 2r^2, ..." },
    KeyDoc { key: "k_grid.count", doc: "length of the default grid" },
    KeyDoc { key: "solver.tolerance", doc: "residual sup norm at which descent and saddle search stop" },
    KeyDoc { key: "solver.max_iter", doc: "L-BFGS iteration cap per descent" },
    KeyDoc { key: "solver.contraction", doc: "backtracking factor in (0, 1)" },
    KeyDoc { key: "solver.sufficient_decrease", doc: "Armijo constant" },
    KeyDoc { key: "solver.lbfgs_memory", doc: "stored correction pairs" },
    KeyDoc { key: "solver.multistart", doc: "initial fields for the global minimizer, witness included" },
    KeyDoc { key: "solver.path_nodes", doc: "images on the elastic string" },
    KeyDoc { key: "solver.string_iterations", doc: "relaxation sweeps of the string" },
    KeyDoc { key: "solver.distinct_threshold", doc: "L2 distinctness threshold, times |domain|^(1/2)" },
    KeyDoc { key: "solver.eps_reg", doc: "gradient regularization in the p(x)-energy" },
    KeyDoc { key: "solver.eps_reg_alt", doc: "second regularization for the sensitivity report" },
    KeyDoc { key: "certify.radius", doc: "ball radius R in (0, 1]; covering balls shrink near the boundary" },
    KeyDoc { key: "certify.i_max", doc: "last index of the level-set sequence" },
    KeyDoc { key: "certify.center", doc: "primary ball center, domain center when empty" },
    KeyDoc { key: "certify.covering", doc: "certify one ball per interior node" },
    KeyDoc { key: "certify.tol_disc", doc: "relative slack of the Caccioppoli comparison" },
    KeyDoc { key: "certify.caccioppoli_samples", doc: "random (l, t, s) triples checked on the minimizer" },
    KeyDoc { key: "certify.sobolev_samples", doc: "random fields in the embedding-constant family" },
    KeyDoc { key: "local_min.radii", doc: "decreasing Sobolev-norm rings around zero" },
    KeyDoc { key: "local_min.samples", doc: "random directions per ring" },
];

fn lookup<'a>(v: &'a toml::Value, key: &str) -> Option<&'a toml::Value> {
    key.split('.').try_fold(v, |cur, part| cur.get(part))
}

/// Markdown table of every key with its default.
pub fn reference_page() -> String {
    let defaults = toml::Value::try_from(RunConfig::default()).expect("config serializes");
    let mut out = String::from("# Configuration reference\n\n");
    out.push_str("Generated by `pxlap defaults --reference`. Every key is optional; ");
    out.push_str("`--set key=value` on the command line overrides the file.\n\n");
    out.push_str("| key | default | meaning |\n|---|---|---|\n");
    for d in KEY_DOCS {
        let dv = lookup(&defaults, d.key).map_or_else(|| "unset".to_string(), |v| format!("`{v}`"));
        out.push_str(&format!("| `{}` | {} | {} |\n", d.key, dv, d.doc));
    }
    out.push_str("\n## Defaults as TOML\n\n```toml\n");
    out.push_str(&RunConfig::default().to_toml());
    out.push_str("```\n");
    out
}

/// Keys present in the default config but missing from the reference table.
pub fn undocumented_keys() -> Vec<String> {
    fn walk(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
        if let Some(t) = v.as_table() {
            for (k, sub) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                if sub.is_table() {
                    walk(&key, sub, out);
                } else {
                    out.push(key);
                }
            }
        }
    }
    let defaults = toml::Value::try_from(RunConfig::default()).expect("config serializes");
    let mut keys = Vec::new();
    walk("", &defaults, &mut keys);
    keys.retain(|k| !KEY_DOCS.iter().any(|d| d.key == k));
    keys
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn overrides_replace_nested_keys() {
        let c = RunConfig::default()
            .with_overrides(&["solver.tolerance=1e-6".into(), "exponents.p=1.7".into(), "grid.nodes=[9, 9]".into()])
            .unwrap();
        assert_eq!(c.solver.tolerance, 1e-6);
        assert_eq!(c.exponents.p, ExponentValue::Constant(1.7));
        assert_eq!(c.grid.nodes, vec![9, 9]);
        let e = RunConfig::default().with_overrides(&["solver.bogus=1".into()]);
        assert!(matches!(e, Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[grid]\nnodez = [3]\n").is_err());
    }

    #[test]
    fn every_key_is_documented() {
        // lambda.value, lambda.interval and mu.value default to unset and are absent
        assert!(undocumented_keys().is_empty(), "{:?}", undocumented_keys());
    }
}
