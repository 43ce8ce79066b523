//! External potentials `V`, `W` with analytic value, gradient and Hessian.
//!
//! Every potential is shifted by a nonnegative offset so that it is
//! nonnegative on the computational domain. A constant shift only changes
//! the global phase of the evolved fields, never their moduli.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scenario-file description of a potential, e.g. `{"kind": "harmonic", "omega": 1.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant { level: f64 },
    /// `omega^2 x^2 / 2`
    Harmonic { omega: f64 },
    /// `amplitude * exp(-(x - center)^2 / (2 width^2))`
    GaussianBump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `amplitude * cos(wavevector * x)`
    Cosine { amplitude: f64, wavevector: f64 },
}

impl PotentialSpec {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            PotentialSpec::Constant { level } => level.is_finite(),
            PotentialSpec::Harmonic { omega } => omega.is_finite(),
            PotentialSpec::GaussianBump {
                amplitude,
                center,
                width,
            } => amplitude.is_finite() && center.is_finite() && width.is_finite() && width > 0.0,
            PotentialSpec::Cosine {
                amplitude,
                wavevector,
            } => amplitude.is_finite() && wavevector.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid potential parameters: {self:?}")))
        }
    }

    fn raw_value(&self, x: f64) -> f64 {
        match *self {
            PotentialSpec::Constant { level } => level,
            PotentialSpec::Harmonic { omega } => 0.5 * omega * omega * x * x,
            PotentialSpec::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let u = (x - center) / width;
                amplitude * (-0.5 * u * u).exp()
            }
            PotentialSpec::Cosine {
                amplitude,
                wavevector,
            } => amplitude * (wavevector * x).cos(),
        }
    }

    /// Infimum of the raw value over `[-half_length, half_length]`.
    fn infimum_on(&self, half_length: f64) -> f64 {
        match *self {
            PotentialSpec::Constant { level } => level,
            PotentialSpec::Harmonic { .. } => 0.0,
            PotentialSpec::GaussianBump {
                amplitude, center, ..
            } => {
                if amplitude < 0.0 {
                    self.raw_value(center.clamp(-half_length, half_length))
                } else {
                    self.raw_value(-half_length).min(self.raw_value(half_length))
                }
            }
            PotentialSpec::Cosine {
                amplitude,
                wavevector,
            } => {
                if amplitude <= 0.0 {
                    amplitude
                } else if wavevector.abs() * half_length >= std::f64::consts::PI {
                    -amplitude
                } else {
                    self.raw_value(half_length)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    spec: PotentialSpec,
    offset: f64,
}

impl Potential {
    /// Builds the potential with the offset `mu = max(0, -inf V)` taken over `[-L, L]`.
    pub fn new(spec: PotentialSpec, half_length: f64) -> Result<Self> {
        spec.validate()?;
        if !(half_length > 0.0) {
            return Err(Error::Config("domain half-length must be positive".into()));
        }
        let offset = (-spec.infimum_on(half_length)).max(0.0);
        Ok(Self { spec, offset })
    }

    pub fn constant(level: f64, half_length: f64) -> Result<Self> {
        Self::new(PotentialSpec::Constant { level }, half_length)
    }

    pub fn harmonic(omega: f64, half_length: f64) -> Result<Self> {
        Self::new(PotentialSpec::Harmonic { omega }, half_length)
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Returns a copy with an extra constant added on top of the offset.
    pub fn shifted_by(&self, c: f64) -> Self {
        Self {
            spec: self.spec,
            offset: self.offset + c,
        }
    }

    /// Harmonic potentials are unbounded; the others are bounded with all derivatives.
    pub fn is_globally_bounded(&self) -> bool {
        !matches!(self.spec, PotentialSpec::Harmonic { .. })
    }

    pub fn is_constant(&self) -> bool {
        match self.spec {
            PotentialSpec::Constant { .. } => true,
            PotentialSpec::Harmonic { omega } => omega == 0.0,
            PotentialSpec::GaussianBump { amplitude, .. } => amplitude == 0.0,
            PotentialSpec::Cosine {
                amplitude,
                wavevector,
            } => amplitude == 0.0 || wavevector == 0.0,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.spec.raw_value(x) + self.offset
    }

    pub fn grad(&self, x: f64) -> f64 {
        match self.spec {
            PotentialSpec::Constant { .. } => 0.0,
            PotentialSpec::Harmonic { omega } => omega * omega * x,
            PotentialSpec::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let u = (x - center) / width;
                -amplitude * u / width * (-0.5 * u * u).exp()
            }
            PotentialSpec::Cosine {
                amplitude,
                wavevector,
            } => -amplitude * wavevector * (wavevector * x).sin(),
        }
    }

    pub fn hessian(&self, x: f64) -> f64 {
        match self.spec {
            PotentialSpec::Constant { .. } => 0.0,
            PotentialSpec::Harmonic { omega } => omega * omega,
            PotentialSpec::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let u = (x - center) / width;
                amplitude * (u * u - 1.0) / (width * width) * (-0.5 * u * u).exp()
            }
            PotentialSpec::Cosine {
                amplitude,
                wavevector,
            } => -amplitude * wavevector * wavevector * (wavevector * x).cos(),
        }
    }
}
