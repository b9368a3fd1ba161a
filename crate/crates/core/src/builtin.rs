//! Named chart and intensity families, constructible from configuration.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::examples::{BumpIntensity, BumpParams, BurnsProfile, ProfileParams, VProfile};
use crate::geom::{
    Chart, ConformalChart, Flat, FlatProfile, HalfPlane, MagneticIntensity, MagneticSystem, Rect, RevolutionChart,
    Sphere, TanhProfile,
};
use crate::hyperbolic::HALF_PLANE_DOMAIN;

/// `[x_min, x_max, y_min, y_max]`.
pub type Bounds = [f64; 4];

fn rect(b: Bounds) -> Rect {
    Rect::new(b[0], b[1], b[2], b[3])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChartSpec {
    /// `y⁻²(dx² + dy²)`; the default domain is [`HALF_PLANE_DOMAIN`].
    HalfPlane { domain: Option<Bounds> },
    Flat { domain: Bounds },
    /// Unit sphere, stereographic.
    Sphere { domain: Bounds },
    /// `ds² + dθ²`.
    FlatCylinder { s_range: (f64, f64) },
    /// `ds² + cosh²s dθ²`.
    TanhCylinder { s_range: (f64, f64) },
    /// The metric `g_v` of the exact Anosov example.
    Burns { s_range: (f64, f64), profile: ProfileParams },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IntensitySpec {
    Constant { b: f64 },
    /// `b₊`, or `b₋ = -b₊` when `negated`.
    BurnsBump {
        bump: BumpParams,
        #[serde(default)]
        negated: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub chart: ChartSpec,
    pub intensity: IntensitySpec,
}

impl ChartSpec {
    pub fn build(&self) -> Result<Chart> {
        Ok(match self {
            ChartSpec::HalfPlane { domain } => Chart::Conformal(ConformalChart::new(
                Arc::new(HalfPlane),
                domain.map(rect).unwrap_or(HALF_PLANE_DOMAIN),
            )?),
            ChartSpec::Flat { domain } => Chart::Conformal(ConformalChart::new(Arc::new(Flat), rect(*domain))?),
            ChartSpec::Sphere { domain } => Chart::Conformal(ConformalChart::new(Arc::new(Sphere), rect(*domain))?),
            ChartSpec::FlatCylinder { s_range } => {
                Chart::Revolution(RevolutionChart::new(Arc::new(FlatProfile), *s_range)?)
            }
            ChartSpec::TanhCylinder { s_range } => {
                Chart::Revolution(RevolutionChart::new(Arc::new(TanhProfile), *s_range)?)
            }
            ChartSpec::Burns { s_range, profile } => Chart::Revolution(RevolutionChart::new(
                Arc::new(VProfile(Arc::new(BurnsProfile::new(*profile)))),
                *s_range,
            )?),
        })
    }
}

impl IntensitySpec {
    pub fn build(&self) -> MagneticIntensity {
        match self {
            IntensitySpec::Constant { b } => MagneticIntensity::constant(*b),
            IntensitySpec::BurnsBump { bump, negated } => {
                let i = MagneticIntensity::new(Arc::new(BumpIntensity::new(*bump)));
                if *negated {
                    i.negated()
                } else {
                    i
                }
            }
        }
    }
}

impl SystemSpec {
    /// Constant `b` on the half-plane.
    pub fn half_plane(b: f64) -> Self {
        Self {
            chart: ChartSpec::HalfPlane { domain: None },
            intensity: IntensitySpec::Constant { b },
        }
    }

    pub fn build(&self) -> Result<MagneticSystem> {
        MagneticSystem::new(self.chart.build()?, self.intensity.build())
    }
}
