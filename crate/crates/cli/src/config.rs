//! TOML experiment configuration. Every table rejects unknown keys.

use magflow::builtin::SystemSpec;
use magflow::examples::{BumpParams, BurnsConfig, ProfileParams};
use magflow::flow::FlowSettings;
use magflow::hyperbolic::hypercycle_start;
use magflow::stability::CertificateSettings;
use serde::{Deserialize, Serialize};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: u32,
    pub seed: Option<u64>,
    pub simulate: Option<Simulate>,
    pub mls_scaling: Option<MlsScaling>,
    pub psl_conjugacy: Option<PslConjugacy>,
    pub burns_build: Option<BurnsBuild>,
    pub anosov_cert: Option<AnosovCert>,
    pub magnetic_length: Option<MagneticLength>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulate {
    pub system: SystemSpec,
    /// `[x, y, angle]`.
    pub start: [f64; 3],
    pub flow: FlowSettings,
    /// Output sampling step.
    pub dt: f64,
}

impl Default for Simulate {
    fn default() -> Self {
        let b = 0.5;
        let st = hypercycle_start(b);
        Self {
            system: SystemSpec::half_plane(b),
            start: [st.point.x, st.point.y, st.angle],
            flow: FlowSettings::with_horizon(2.0 / (1.0 - b * b).sqrt()),
            dt: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlsScaling {
    pub ells: Vec<f64>,
    pub bs: Vec<f64>,
    /// Largest accepted `|period - ℓ/√(1-b²)|`.
    pub tolerance: f64,
}

impl Default for MlsScaling {
    fn default() -> Self {
        Self {
            ells: vec![1.0, 2.0, 3.7],
            bs: vec![0.0, 0.3, 0.5, 0.9],
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PslConjugacy {
    pub draws: usize,
    pub b_max: f64,
    pub t_max: f64,
    pub tolerance: f64,
}

impl Default for PslConjugacy {
    fn default() -> Self {
        Self {
            draws: 100,
            b_max: 0.99,
            t_max: 5.0,
            tolerance: 1e-11,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurnsBuild {
    pub profile: ProfileParams,
    pub bump: BumpParams,
    pub s_range: (f64, f64),
}

impl Default for BurnsBuild {
    fn default() -> Self {
        let d = BurnsConfig::default();
        Self {
            profile: d.profile,
            bump: d.bump,
            s_range: d.s_range,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertTarget {
    /// The validated exact Anosov example.
    Burns,
    /// Any system from `[anosov_cert.system]`.
    System,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnosovCert {
    pub target: CertTarget,
    pub certificate: CertificateSettings,
    pub burns: BurnsBuild,
    pub band_cap: f64,
    pub reversal_samples: usize,
    pub system: Option<SystemSpec>,
}

impl Default for AnosovCert {
    fn default() -> Self {
        let d = BurnsConfig::default();
        Self {
            target: CertTarget::Burns,
            certificate: d.certificate,
            burns: BurnsBuild::default(),
            band_cap: d.band_cap,
            reversal_samples: d.reversal_samples,
            system: None,
        }
    }
}

impl AnosovCert {
    pub fn burns_config(&self) -> BurnsConfig {
        BurnsConfig {
            profile: self.burns.profile,
            bump: self.burns.bump,
            s_range: self.burns.s_range,
            certificate: self.certificate.clone(),
            band_cap: self.band_cap,
            reversal_samples: self.reversal_samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagneticLength {
    pub ell: f64,
    pub b: f64,
    pub count: usize,
    pub max_amplitude: f64,
    /// Accepted deficit below the reference length.
    pub tolerance: f64,
}

impl Default for MagneticLength {
    fn default() -> Self {
        Self {
            ell: 2.0,
            b: 0.5,
            count: 200,
            max_amplitude: 0.05,
            tolerance: 1e-9,
        }
    }
}
