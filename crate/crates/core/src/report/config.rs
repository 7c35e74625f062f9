use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::{discretize, DiscreteOperator, Family, Potential, ProblemSpec};
use crate::grid::{make_grid, Bounds, Grid};
use crate::positivity::{Tolerances, DEFAULT_SEED};

use super::CliError;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<PathBuf>,
    pub heatmap: Option<PathBuf>,
    pub row_mass_csv: Option<PathBuf>,
    pub unit_load_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: Family,
    /// `[a, b]` or `[a, b, c, d]`; defaults to the unit interval or square.
    #[serde(default)]
    pub bounds: Option<Vec<f64>>,
    pub n: usize,
    /// Second axis count in 2D; defaults to `n`.
    #[serde(default)]
    pub ny: Option<usize>,
    #[serde(default)]
    pub ladder: Option<Vec<usize>>,
    #[serde(default)]
    pub potential: Potential,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn new(family: Family, n: usize) -> Self {
        RunConfig {
            family,
            bounds: None,
            n,
            ny: None,
            ladder: None,
            potential: Potential::Zero,
            tolerances: Tolerances::default(),
            seed: DEFAULT_SEED,
            outputs: Outputs::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Tolerances with the run seed applied.
    pub fn resolved_tolerances(&self) -> Tolerances {
        Tolerances {
            seed: self.seed,
            ..self.tolerances
        }
    }

    pub fn bounds(&self) -> Result<Bounds, CliError> {
        match &self.bounds {
            Some(v) => {
                let b = Bounds::from_slice(v).map_err(|e| CliError::Config(e.to_string()))?;
                if b.dimension() != self.family.dimension() {
                    return Err(CliError::Config(format!(
                        "{} needs {} bounds, got {}",
                        self.family,
                        2 * self.family.dimension(),
                        v.len()
                    )));
                }
                Ok(b)
            }
            None if self.family.dimension() == 1 => Ok(Bounds::Interval { a: 0.0, b: 1.0 }),
            None => Ok(Bounds::Rectangle {
                a: 0.0,
                b: 1.0,
                c: 0.0,
                d: 1.0,
            }),
        }
    }

    pub fn counts(&self) -> Vec<usize> {
        if self.family.dimension() == 1 {
            vec![self.n]
        } else {
            vec![self.n, self.ny.unwrap_or(self.n)]
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.bounds()?;
        if self.family.dimension() == 1 && self.ny.is_some() {
            return Err(CliError::Config(format!("ny is only valid for 2D families, not {}", self.family)));
        }
        if let Some(ladder) = &self.ladder {
            if ladder.is_empty() {
                return Err(CliError::Config("ladder must not be empty".into()));
            }
            if ladder.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::Config(format!("ladder must be strictly increasing: {ladder:?}")));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("nonneg_rel", t.nonneg_rel),
            ("form_rel", t.form_rel),
            ("sym", t.sym),
            ("sing", t.sing),
            ("eig_tol", t.eig_tol),
            ("weighted_eig_tol", t.weighted_eig_tol),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Config(format!("tolerance {name} must be finite and >= 0, got {v}")));
            }
        }
        self.problem_with(self.grid()?, self.potential.clone())?;
        Ok(())
    }

    pub fn grid_with(&self, counts: &[usize]) -> Result<Arc<Grid>, CliError> {
        make_grid(self.family.dimension(), self.bounds()?, counts).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Arc<Grid>, CliError> {
        self.grid_with(&self.counts())
    }

    pub fn problem_with(&self, grid: Arc<Grid>, potential: Potential) -> Result<ProblemSpec, CliError> {
        ProblemSpec::new(self.family, potential, grid).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn operator_with(&self, grid: Arc<Grid>, potential: Potential) -> Result<Arc<DiscreteOperator>, CliError> {
        let spec = self.problem_with(grid, potential)?;
        Ok(Arc::new(discretize(&spec).map_err(|e| CliError::Config(e.to_string()))?))
    }

    pub fn operator(&self) -> Result<Arc<DiscreteOperator>, CliError> {
        self.operator_with(self.grid()?, self.potential.clone())
    }
}

/// Parses `constant:V` or `gaussian-bump:A,X[,Y],W`.
pub fn parse_potential(text: &str) -> Result<Potential, CliError> {
    let bad = || CliError::Config(format!("invalid potential '{text}'"));
    let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
    let numbers = rest
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| bad())?;
    match (kind.trim(), numbers.as_slice()) {
        ("constant", [v]) => Ok(Potential::Constant { value: *v }),
        ("gaussian-bump", [amp, center @ .., width]) if (1..=2).contains(&center.len()) => {
            Ok(Potential::GaussianBump {
                amplitude: *amp,
                center: center.to_vec(),
                width: *width,
            })
        }
        _ => Err(bad()),
    }
}

/// Parses a comma-separated list.
pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<T>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Config(format!("invalid {what} '{text}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::from_toml_str(
            r#"
family = "fourth-order-1d"
n = 49
bounds = [0.0, 2.0]
seed = 7

[potential]
kind = "constant"
value = 12.5

[tolerances]
nonneg_rel = 1e-7
"#,
        )
        .unwrap();
        assert_eq!(c.family, Family::FourthOrder1D);
        assert_eq!(c.potential, Potential::Constant { value: 12.5 });
        assert_eq!(c.resolved_tolerances().seed, 7);
        assert_eq!(c.resolved_tolerances().nonneg_rel, 1e-7);
        assert_eq!(c.tolerances.form_rel, Tolerances::default().form_rel);
    }

    #[test]
    fn malformed_config_reports_position() {
        let e = RunConfig::from_toml_str("family = \"fourth-order-1d\"\nn = = 3\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        let e = RunConfig::from_toml_str("family = \"fourth-order-1d\"\nn = 9\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }

    #[test]
    fn rejects_bad_ladders_and_grids() {
        let mut c = RunConfig::new(Family::SecondOrder1D, 9);
        c.ladder = Some(vec![49, 49, 99]);
        assert!(c.validate().is_err());
        c.ladder = Some(vec![49, 99]);
        assert!(c.validate().is_ok());
        let c = RunConfig::new(Family::SixthOrder1D, 4);
        assert!(c.validate().is_err());
        let mut c = RunConfig::new(Family::Laplace2D, 9);
        c.bounds = Some(vec![0.0, 1.0]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn potential_specs() {
        assert_eq!(parse_potential("constant:3").unwrap(), Potential::Constant { value: 3.0 });
        assert_eq!(
            parse_potential("gaussian-bump:2,0.5,0.1").unwrap(),
            Potential::GaussianBump {
                amplitude: 2.0,
                center: vec![0.5],
                width: 0.1
            }
        );
        assert!(parse_potential("gaussian-bump:2,0.5,0.5,0.5,0.1").is_err());
        assert!(parse_potential("linear:1").is_err());
        assert!(parse_potential("constant:x").is_err());
    }
}
