//! Run configuration: JSON parsing with strict key checking, per-problem
//! defaults, validation with field-path messages, and dot-path overrides
//! from the command line.

use crate::gpc::GpcBasis;
use crate::problems::opinion::OpinionConfig;
use crate::problems::swarming::SwarmingConfig;
use crate::problems::MassLaw;
use crate::quadrature::{QuadKind, QuadRule};
use crate::stepping::PositivityMode;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("override '{0}' is not of the form key.path=value")]
    BadOverride(String),
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Opinion,
    Advected,
    Swarming2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Euler,
    Rk4,
    SemiImplicit1,
    SemiImplicit2,
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::Rk4 => "rk4",
            SchemeKind::SemiImplicit1 => "semi_implicit1",
            SchemeKind::SemiImplicit2 => "semi_implicit2",
        }
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self, SchemeKind::Euler | SchemeKind::Rk4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureKind {
    Nc2,
    Nc4,
    Nc6,
    Gauss,
}

impl QuadratureKind {
    pub fn all() -> [QuadratureKind; 4] {
        [Self::Nc2, Self::Nc4, Self::Nc6, Self::Gauss]
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Nc2 => "2",
            Self::Nc4 => "4",
            Self::Nc6 => "6",
            Self::Gauss => "G",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "2" | "nc2" => Some(Self::Nc2),
            "4" | "nc4" => Some(Self::Nc4),
            "6" | "nc6" => Some(Self::Nc6),
            "G" | "g" | "gauss" => Some(Self::Gauss),
            _ => None,
        }
    }
}

/// How the step size is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtPolicy {
    /// The explicit positivity bound, scaled by `safety`.
    ExplicitBound,
    /// The semi-implicit positivity bound, scaled by `safety`.
    SemiimplicitBound,
    /// `dt = value * dv`.
    Cfl,
    /// `dt = value`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtConfig {
    pub policy: DtPolicy,
    /// CFL number or fixed step, depending on the policy.
    #[serde(default)]
    pub value: Option<f64>,
    /// Multiplier applied to bound-based policies.
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_safety() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub v_min: Option<f64>,
    #[serde(default)]
    pub v_max: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GpcConfig {
    /// Expansion order M; defaults to 5.
    #[serde(default)]
    pub order: Option<usize>,
    /// Gauss node count in the random variable; defaults to 2 (M + 1).
    #[serde(default)]
    pub n_theta: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    #[serde(default)]
    pub kind: Option<QuadratureKind>,
    /// Node count for the Gauss rule.
    #[serde(default = "default_gauss_nodes")]
    pub gauss_nodes: usize,
}

fn default_gauss_nodes() -> usize {
    8
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            kind: None,
            gauss_nodes: default_gauss_nodes(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MassLawConfig {
    #[serde(default)]
    pub base: Option<f64>,
    #[serde(default)]
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OpinionParams {
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub u_g: Option<f64>,
    #[serde(default)]
    pub sigma_g2: Option<f64>,
    #[serde(default)]
    pub bimodal: Option<bool>,
    #[serde(default)]
    pub u_bar: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub sigma02: Option<f64>,
    #[serde(default)]
    pub rho: MassLawConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AdvectedParams {
    /// Advection speed of the background.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// CFL number of the background advection step.
    #[serde(default)]
    pub cfl: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SwarmingParams {
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default)]
    pub mu_x: Option<f64>,
    #[serde(default)]
    pub mu_y: Option<f64>,
    #[serde(default)]
    pub sigma_x: Option<f64>,
    #[serde(default)]
    pub sigma_y: Option<f64>,
    #[serde(default)]
    pub sigma02: Option<f64>,
    #[serde(default)]
    pub rho: MassLawConfig,
}

/// Raw configuration as written by the user; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub gpc: GpcConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub scheme: Option<SchemeKind>,
    #[serde(default)]
    pub dt: Option<DtConfig>,
    #[serde(default)]
    pub final_time: Option<f64>,
    /// Output cadence in steps; snapshots and series rows are also written at
    /// the first and last step.
    #[serde(default)]
    pub output_every: Option<usize>,
    #[serde(default)]
    pub opinion: OpinionParams,
    #[serde(default)]
    pub advected: AdvectedParams,
    #[serde(default)]
    pub swarming: SwarmingParams,
}

/// Fully resolved configuration: every field concrete and validated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub problem: ProblemKind,
    pub v_min: f64,
    pub v_max: f64,
    pub n: usize,
    pub order: usize,
    pub n_theta: usize,
    pub quadrature: QuadratureKind,
    pub gauss_nodes: usize,
    pub scheme: SchemeKind,
    pub dt: DtConfig,
    pub final_time: f64,
    pub output_every: usize,
    pub opinion: OpinionConfig,
    pub advected_alpha: f64,
    pub advected_cfl: f64,
    pub swarming: SwarmingConfig,
}

impl Resolved {
    pub fn quad_rule(&self) -> QuadRule {
        build_rule(self.quadrature, self.gauss_nodes)
    }

    pub fn basis(&self) -> GpcBasis {
        GpcBasis::new(self.order, self.n_theta).expect("validated at resolution")
    }

    pub fn positivity_mode(&self) -> PositivityMode {
        match self.dt.policy {
            DtPolicy::ExplicitBound => PositivityMode::Explicit,
            DtPolicy::SemiimplicitBound => PositivityMode::SemiImplicit,
            DtPolicy::Cfl | DtPolicy::Fixed => PositivityMode::Manual,
        }
    }
}

pub fn build_rule(kind: QuadratureKind, gauss_nodes: usize) -> QuadRule {
    let quad_kind = match kind {
        QuadratureKind::Nc2 => QuadKind::NC2,
        QuadratureKind::Nc4 => QuadKind::NC4,
        QuadratureKind::Nc6 => QuadKind::NC6,
        QuadratureKind::Gauss => QuadKind::GaussLegendre(gauss_nodes),
    };
    QuadRule::new(quad_kind).expect("node count validated at resolution")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Parse a file and apply `key.path=value` overrides before validation.
    pub fn from_file_with_overrides(
        path: &Path,
        overrides: &[String],
    ) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut value: serde_json::Value = serde_json::from_str(&text)?;
        for entry in overrides {
            apply_override(&mut value, entry)?;
        }
        Ok(serde_json::from_value(value)?)
    }

    /// Fill defaults (per problem where they differ) and validate every
    /// invariant, reporting the offending field path.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let problem = self.problem;
        let (v_min, v_max, n_default) = match problem {
            ProblemKind::Opinion | ProblemKind::Advected => (-1.0, 1.0, 41),
            ProblemKind::Swarming2d => (-4.0, 4.0, 51),
        };
        let v_min = self.grid.v_min.unwrap_or(v_min);
        let v_max = self.grid.v_max.unwrap_or(v_max);
        let n = self.grid.n.unwrap_or(n_default);
        if !(v_max > v_min) {
            return Err(invalid("grid.v_max", "must exceed grid.v_min"));
        }
        if n < 2 {
            return Err(invalid(
                "grid.n",
                format!("needs at least 2 cells, got {n}"),
            ));
        }

        let order = self.gpc.order.unwrap_or(5);
        let n_theta = self.gpc.n_theta.unwrap_or(2 * (order + 1));
        if n_theta < order + 1 {
            return Err(invalid(
                "gpc.n_theta",
                format!(
                    "needs at least order + 1 = {} nodes, got {n_theta}",
                    order + 1
                ),
            ));
        }

        let quadrature = self.quadrature.kind.unwrap_or(QuadratureKind::Gauss);
        let gauss_nodes = self.quadrature.gauss_nodes;
        if gauss_nodes == 0 {
            return Err(invalid("quadrature.gauss_nodes", "must be positive"));
        }

        let scheme = self.scheme.unwrap_or(match problem {
            ProblemKind::Opinion => SchemeKind::Rk4,
            ProblemKind::Advected | ProblemKind::Swarming2d => SchemeKind::SemiImplicit2,
        });

        let advected_alpha_early = self.advected.alpha.unwrap_or(0.05);
        let advected_cfl_early = self.advected.cfl.unwrap_or(0.5);
        let dt = self.dt.unwrap_or(match problem {
            ProblemKind::Opinion => DtConfig {
                policy: DtPolicy::ExplicitBound,
                value: None,
                safety: 1.0,
            },
            // the background advection runs at Courant number
            // `alpha dt / dv = cfl`, i.e. dt = cfl dv / alpha
            ProblemKind::Advected => DtConfig {
                policy: DtPolicy::Cfl,
                value: Some(advected_cfl_early / advected_alpha_early),
                safety: 1.0,
            },
            ProblemKind::Swarming2d => DtConfig {
                policy: DtPolicy::SemiimplicitBound,
                value: None,
                safety: 0.99,
            },
        });
        match dt.policy {
            DtPolicy::Cfl | DtPolicy::Fixed => {
                let v = dt
                    .value
                    .ok_or_else(|| invalid("dt.value", "required for cfl/fixed step policies"))?;
                if !(v > 0.0) {
                    return Err(invalid("dt.value", format!("must be positive, got {v}")));
                }
            }
            _ => {
                if !(dt.safety > 0.0) {
                    return Err(invalid("dt.safety", "must be positive"));
                }
            }
        }

        let final_time = self.final_time.unwrap_or(match problem {
            ProblemKind::Opinion => 25.0,
            ProblemKind::Advected => 20.0,
            ProblemKind::Swarming2d => 100.0,
        });
        if !(final_time > 0.0) {
            return Err(invalid(
                "final_time",
                format!("must be positive, got {final_time}"),
            ));
        }
        let output_every = self.output_every.unwrap_or(100).max(1);

        // opinion parameters serve both 1D problems; only the defaults differ
        let (u_bar_d, u_g_d, delta_d) = match problem {
            ProblemKind::Advected => (0.5, -0.5, 1.0),
            _ => (0.25, 0.25, 2.0),
        };
        let op = &self.opinion;
        let opinion = OpinionConfig {
            sigma2: op.sigma2.unwrap_or(0.2),
            delta: op.delta.unwrap_or(delta_d),
            u_g: op.u_g.unwrap_or(u_g_d),
            sigma_g2: op.sigma_g2.unwrap_or(0.01),
            bimodal: op.bimodal.unwrap_or(false),
            u_bar: op.u_bar.unwrap_or(u_bar_d),
            kappa: op.kappa.unwrap_or(0.25),
            sigma02: op.sigma02.unwrap_or(0.05),
            rho: MassLaw {
                base: op.rho.base.unwrap_or(1.0),
                slope: op.rho.slope.unwrap_or(0.5),
            },
        };
        if matches!(problem, ProblemKind::Opinion | ProblemKind::Advected) {
            if !(opinion.sigma2 > 0.0) {
                return Err(invalid(
                    "opinion.sigma2",
                    format!("must be positive, got {}", opinion.sigma2),
                ));
            }
            if !(opinion.sigma_g2 > 0.0) {
                return Err(invalid(
                    "opinion.sigma_g2",
                    format!("must be positive, got {}", opinion.sigma_g2),
                ));
            }
            if !(opinion.sigma02 > 0.0) {
                return Err(invalid(
                    "opinion.sigma02",
                    format!("must be positive, got {}", opinion.sigma02),
                ));
            }
            if !(opinion.delta > 0.0) {
                return Err(invalid(
                    "opinion.delta",
                    format!("must be positive, got {}", opinion.delta),
                ));
            }
            if !(opinion.u_g > v_min && opinion.u_g < v_max) {
                return Err(invalid(
                    "opinion.u_g",
                    format!("must lie inside the domain, got {}", opinion.u_g),
                ));
            }
            if opinion.rho.validate().is_err() {
                return Err(invalid(
                    "opinion.rho",
                    format!(
                        "mass law must stay positive: base {} slope {}",
                        opinion.rho.base, opinion.rho.slope
                    ),
                ));
            }
        }

        let advected_alpha = self.advected.alpha.unwrap_or(0.05);
        let advected_cfl = self.advected.cfl.unwrap_or(0.5);
        if matches!(problem, ProblemKind::Advected) {
            if !(advected_alpha > 0.0) {
                return Err(invalid(
                    "advected.alpha",
                    format!("must be positive, got {advected_alpha}"),
                ));
            }
            if !(advected_cfl > 0.0 && advected_cfl <= 1.0) {
                return Err(invalid(
                    "advected.cfl",
                    format!("must lie in (0, 1], got {advected_cfl}"),
                ));
            }
        }

        let sw = &self.swarming;
        let swarming = SwarmingConfig {
            alpha: sw.alpha.unwrap_or(1.0),
            d: sw.d.unwrap_or(0.2),
            mu_x: sw.mu_x.unwrap_or(0.0),
            mu_y: sw.mu_y.unwrap_or(0.0),
            sigma_x: sw.sigma_x.unwrap_or(0.5),
            sigma_y: sw.sigma_y.unwrap_or(0.5),
            sigma02: sw.sigma02.unwrap_or(0.5),
            rho: MassLaw {
                base: sw.rho.base.unwrap_or(1.0),
                slope: sw.rho.slope.unwrap_or(0.5),
            },
        };
        if matches!(problem, ProblemKind::Swarming2d) {
            if !(swarming.alpha > 0.0) {
                return Err(invalid(
                    "swarming.alpha",
                    format!("must be positive, got {}", swarming.alpha),
                ));
            }
            if !(swarming.d > 0.0) {
                return Err(invalid(
                    "swarming.d",
                    format!("must be positive, got {}", swarming.d),
                ));
            }
            if !(swarming.sigma_x > 0.0 && swarming.sigma_y > 0.0) {
                return Err(invalid("swarming.sigma_x", "spreads must be positive"));
            }
            if !(swarming.sigma02 > 0.0) {
                return Err(invalid("swarming.sigma02", "must be positive"));
            }
            if swarming.rho.validate().is_err() {
                return Err(invalid("swarming.rho", "mass law must stay positive"));
            }
        }

        Ok(Resolved {
            problem,
            v_min,
            v_max,
            n,
            order,
            n_theta,
            quadrature,
            gauss_nodes,
            scheme,
            dt,
            final_time,
            output_every,
            opinion,
            advected_alpha,
            advected_cfl,
            swarming,
        })
    }
}

/// Apply one `key.path=value` override to a JSON tree; the value is parsed
/// as JSON when possible and falls back to a string.
pub fn apply_override(root: &mut serde_json::Value, entry: &str) -> Result<(), ConfigError> {
    let trimmed = entry.trim_start_matches("--");
    let (path, raw) = trimmed
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(entry.to_string()))?;
    if path.is_empty() {
        return Err(ConfigError::BadOverride(entry.to_string()));
    }
    let value: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| ConfigError::BadOverride(entry.to_string()))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Ok(())
}

// the metadata echo needs the problem configs serializable
impl Serialize for MassLaw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("MassLaw", 2)?;
        st.serialize_field("base", &self.base)?;
        st.serialize_field("slope", &self.slope)?;
        st.end()
    }
}

impl Serialize for OpinionConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("OpinionConfig", 9)?;
        st.serialize_field("sigma2", &self.sigma2)?;
        st.serialize_field("delta", &self.delta)?;
        st.serialize_field("u_g", &self.u_g)?;
        st.serialize_field("sigma_g2", &self.sigma_g2)?;
        st.serialize_field("bimodal", &self.bimodal)?;
        st.serialize_field("u_bar", &self.u_bar)?;
        st.serialize_field("kappa", &self.kappa)?;
        st.serialize_field("sigma02", &self.sigma02)?;
        st.serialize_field("rho", &self.rho)?;
        st.end()
    }
}

impl Serialize for SwarmingConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SwarmingConfig", 8)?;
        st.serialize_field("alpha", &self.alpha)?;
        st.serialize_field("d", &self.d)?;
        st.serialize_field("mu_x", &self.mu_x)?;
        st.serialize_field("mu_y", &self.mu_y)?;
        st.serialize_field("sigma_x", &self.sigma_x)?;
        st.serialize_field("sigma_y", &self.sigma_y)?;
        st.serialize_field("sigma02", &self.sigma02)?;
        st.serialize_field("rho", &self.rho)?;
        st.end()
    }
}
