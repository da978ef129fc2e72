//! Run configuration read from TOML.
//!
//! Every key is optional; an empty file gives the unit disk with the
//! Laplacian (`p = 2`, `alpha = 0`) at `h = 1/64`.
//!
//! ```toml
//! h = 0.015625
//! seed = 7
//! pipeline = "torsion"
//!
//! [domain]
//! shape = "polygon"
//! vertices = [[0.0, 0.0], [1.2, 0.1], [1.0, 0.9], [0.15, 0.7]]
//!
//! [operator]
//! p = "inf"
//! alpha = 2.0
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::certify::DEFECT_TOLERANCE;
use crate::domain::{ConvexDomain, Grid};
use crate::eigen::EigenConfig;
use crate::error::{Error, Result};
use crate::operator::{Exponent, OperatorParams};
use crate::solver::SchemeConfig;

/// `(p, alpha)`; the dimension comes from the domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub p: Exponent,
    pub alpha: f64,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec { p: Exponent::Finite(2.0), alpha: 0.0 }
    }
}

impl OperatorSpec {
    pub fn params(&self, n: usize) -> Result<OperatorParams> {
        OperatorParams::new(self.p, self.alpha, n)
    }
}

/// Which certification the `certify` command re-runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Power concavity of a torsion field.
    #[default]
    Torsion,
    /// Log concavity of an eigenfield.
    Eigen,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    /// Passing requires the relative defect to be strictly below this.
    pub defect_tolerance: f64,
    pub hopf_samples: usize,
    /// Hopf radii in units of `h`; radii beyond half the inradius are dropped.
    pub hopf_radii: Vec<f64>,
    pub midpoint_pairs: usize,
    /// Fixed boundary layer for the second transformed residual.
    pub residual_layer: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig { defect_tolerance: DEFECT_TOLERANCE, hopf_samples: 16, hopf_radii: vec![4.0, 8.0, 16.0], midpoint_pairs: 2000, residual_layer: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub samples: usize,
    /// Dimensions `n` to check the axioms in.
    pub dims: Vec<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { samples: 1000, dims: vec![1, 2, 3] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    pub k: f64,
    pub offset: f64,
    /// Radius of the ball the residual points are drawn from.
    pub radius: f64,
    pub points: usize,
    pub profile_rows: usize,
    /// Interior ball radii for the Hopf bound table.
    pub hopf_radii: Vec<f64>,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig { k: 1.0, offset: 0.0, radius: 1.0, points: 1000, profile_rows: 21, hopf_radii: vec![0.25, 0.5, 1.0, 2.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: ConvexDomain,
    pub operator: OperatorSpec,
    pub h: f64,
    pub scheme: SchemeConfig,
    pub eigen: EigenConfig,
    pub pipeline: Pipeline,
    pub certify: CertifyConfig,
    pub verify: VerifyConfig,
    pub barrier: BarrierConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: ConvexDomain::disk([0.0, 0.0], 1.0).expect("unit disk is valid"),
            operator: OperatorSpec::default(),
            h: 1.0 / 64.0,
            scheme: SchemeConfig::default(),
            eigen: EigenConfig::default(),
            pipeline: Pipeline::default(),
            certify: CertifyConfig::default(),
            verify: VerifyConfig::default(),
            barrier: BarrierConfig::default(),
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Parses and validates TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Operator parameters in the domain's dimension.
    pub fn params(&self) -> Result<OperatorParams> {
        self.operator.params(self.domain.dim())
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(Grid::new(&self.domain, self.h)?))
    }

    /// Re-checks every module invariant, reporting failures as config errors.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.params().map_err(wrap)?;
        self.scheme.validate().map_err(wrap)?;
        self.eigen.validate().map_err(wrap)?;
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!("h = {} must be finite and > 0", self.h)));
        }
        let inradius = self.domain.inradius();
        if !(self.h < inradius / 4.0) {
            return Err(wrap(Error::GridTooCoarse { h: self.h, inradius }));
        }
        let c = &self.certify;
        if !(c.defect_tolerance >= 0.0) {
            return Err(Error::Config(format!("defect_tolerance {} must be >= 0", c.defect_tolerance)));
        }
        if c.hopf_samples == 0 || c.hopf_radii.iter().any(|&r| !(r >= 2.0)) {
            return Err(Error::Config("hopf_samples must be >= 1 and hopf_radii (in units of h) >= 2".into()));
        }
        if !(c.residual_layer >= 0.0) {
            return Err(Error::Config(format!("residual_layer {} must be >= 0", c.residual_layer)));
        }
        if self.verify.samples == 0 || self.verify.dims.is_empty() || self.verify.dims.contains(&0) {
            return Err(Error::Config("verify needs samples >= 1 and dimensions >= 1".into()));
        }
        let b = &self.barrier;
        if !(b.k >= 0.0 && b.k.is_finite() && b.offset.is_finite() && b.radius > 0.0) || b.hopf_radii.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Config("barrier needs k >= 0, a finite offset and positive radii".into()));
        }
        if b.points == 0 || b.profile_rows < 2 {
            return Err(Error::Config("barrier needs points >= 1 and profile_rows >= 2".into()));
        }
        Ok(())
    }
}
