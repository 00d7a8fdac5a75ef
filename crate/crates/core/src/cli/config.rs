//! Experiment configuration: a single JSON document, schema-validated, with
//! command-line overrides applied on top.

use super::{CliError, CliResult};
use crate::model::ModelParams;
use crate::util::fnv1a;
use serde::{Deserialize, Serialize};

/// Model parameters as they appear in a config file. Either `eps` or `mu`
/// may be given; supplying both inconsistently is a validation error.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub gamma: f64,
    pub delta: f64,
    pub xi_a: f64,
    pub xi_b: f64,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

impl ParamsConfig {
    pub fn resolve(&self) -> CliResult<ModelParams> {
        let eps = match (self.eps, self.mu) {
            (Some(eps), None) => eps,
            (None, Some(mu)) => mu * self.sigma,
            (Some(eps), Some(mu)) => {
                let derived = mu * self.sigma;
                if (eps - derived).abs() > 1e-12 * eps.abs().max(derived.abs()).max(1e-300) {
                    return Err(CliError::Validation {
                        path: "params.eps/params.mu".into(),
                        message: format!(
                            "inconsistent: eps = {eps}, mu * sigma = {derived}"
                        ),
                    });
                }
                eps
            }
            (None, None) => {
                return Err(CliError::Validation {
                    path: "params.eps".into(),
                    message: "one of eps or mu is required".into(),
                })
            }
        };
        ModelParams::new(self.gamma, self.delta, self.xi_a, self.xi_b, self.sigma, eps).map_err(
            |e| CliError::Validation {
                path: "params".into(),
                message: e.to_string(),
            },
        )
    }
}

/// `(sigma, eps)` grid for the parameter-plane classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub n_sigma: usize,
    pub n_eps: usize,
    /// Slow-manifold existence threshold for the `eps = mu0 sigma` boundary.
    #[serde(default = "default_mu0")]
    pub mu0: f64,
}

fn default_mu0() -> f64 {
    1.0
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            sigma_min: 1e-3,
            sigma_max: 1e-1,
            eps_min: 1e-6,
            eps_max: 1e-1,
            n_sigma: 30,
            n_eps: 30,
            mu0: default_mu0(),
        }
    }
}

/// Circle in the `(xi_a, xi_b)` plane for equilibrium continuation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleConfig {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "default_circle_samples")]
    pub samples: usize,
}

fn default_circle_samples() -> usize {
    720
}

/// A full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ParamsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circle: Option<CircleConfig>,
    /// Return-map seed points `p_b0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pb0: Option<Vec<f64>>,
}

impl ExperimentConfig {
    /// Reference configuration: the parameter values every bundled recipe
    /// starts from.
    pub fn reference() -> Self {
        Self {
            params: ParamsConfig {
                gamma: 2.0,
                delta: 3.0,
                xi_a: 1.3536,
                xi_b: 2.3536,
                sigma: 1e-2,
                eps: Some(5e-3),
                mu: None,
            },
            initial: Some(vec![0.0, 0.0, 0.5, 0.5]),
            t_end: None,
            tol: Some(1e-9),
            grid: None,
            circle: Some(CircleConfig {
                center: [1.0, 2.0],
                radius: 0.5,
                samples: 720,
            }),
            pb0: Some(vec![1.1, 1.5, 2.0, 5.0]),
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Validation {
            path: "config".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<ModelParams> {
        let p = self.params.resolve()?;
        if let Some(initial) = &self.initial {
            if initial.len() != 4 && initial.len() != 2 {
                return Err(CliError::Validation {
                    path: "initial".into(),
                    message: format!("expected 2 or 4 components, got {}", initial.len()),
                });
            }
            if initial.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(CliError::Validation {
                    path: "initial".into(),
                    message: "components must be finite and nonnegative".into(),
                });
            }
        }
        if let Some(tol) = self.tol {
            if !(1e-12..=1e-6).contains(&tol) {
                return Err(CliError::Validation {
                    path: "tol".into(),
                    message: format!("tolerance {tol} outside [1e-12, 1e-6]"),
                });
            }
        }
        if let Some(c) = &self.circle {
            if !(c.radius > 0.0 && c.samples >= 8) {
                return Err(CliError::Validation {
                    path: "circle".into(),
                    message: "radius must be positive and samples >= 8".into(),
                });
            }
        }
        if let Some(g) = &self.grid {
            if !(g.sigma_min > 0.0 && g.sigma_max > g.sigma_min && g.eps_min > 0.0
                && g.eps_max > g.eps_min
                && g.n_sigma >= 2
                && g.n_eps >= 2)
            {
                return Err(CliError::Validation {
                    path: "grid".into(),
                    message: "grid bounds must be positive and ordered with >= 2 points".into(),
                });
            }
        }
        Ok(p)
    }

    /// Stable hash of the canonical JSON rendering, for provenance lines.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(canon.as_bytes()))
    }

    pub fn tolerance(&self) -> f64 {
        self.tol.unwrap_or(1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_mu_consistency() {
        let mut c = ExperimentConfig::reference();
        c.params.mu = Some(0.5);
        // eps = 5e-3 = 0.5 * 1e-2: consistent.
        assert!(c.validate().is_ok());
        c.params.mu = Some(0.7);
        let err = c.validate().unwrap_err();
        assert!(matches!(err, CliError::Validation { ref path, .. } if path.contains("eps")));
    }

    #[test]
    fn mu_only_derives_eps() {
        let mut c = ExperimentConfig::reference();
        c.params.eps = None;
        c.params.mu = Some(0.5);
        let p = c.validate().unwrap();
        assert!((p.eps - 5e-3).abs() < 1e-18);
    }

    #[test]
    fn validation_errors_carry_field_paths() {
        let mut c = ExperimentConfig::reference();
        c.params.eps = None;
        c.params.mu = None;
        assert!(matches!(
            c.validate().unwrap_err(),
            CliError::Validation { ref path, .. } if path == "params.eps"
        ));

        let mut c = ExperimentConfig::reference();
        c.tol = Some(1.0);
        assert!(matches!(
            c.validate().unwrap_err(),
            CliError::Validation { ref path, .. } if path == "tol"
        ));

        let mut c = ExperimentConfig::reference();
        c.initial = Some(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            c.validate().unwrap_err(),
            CliError::Validation { ref path, .. } if path == "initial"
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"params": {}, "bogus": 1}"#).unwrap_err();
        assert!(matches!(err, CliError::Validation { .. }));
    }

    #[test]
    fn hash_is_stable_under_round_trip() {
        let c = ExperimentConfig::reference();
        let json = serde_json::to_string(&c).unwrap();
        let c2 = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(c.hash(), c2.hash());
    }
}
