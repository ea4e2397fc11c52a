//! Deterministic synthetic test images.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Plane-wave sinusoid whose intensity varies along `angle_deg`.
    OrientedFringe,
    /// Sinusoid of the distance from the image centre.
    ConcentricRings,
    /// Vertical bands of constant intensity, `period` pixels wide.
    StepWedge,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oriented-fringe" | "fringe" => Ok(SyntheticKind::OrientedFringe),
            "concentric-rings" | "rings" => Ok(SyntheticKind::ConcentricRings),
            "step-wedge" | "wedge" => Ok(SyntheticKind::StepWedge),
            other => Err(Error::invalid(format!("unknown synthetic image '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticImageSpec {
    pub kind: SyntheticKind,
    pub width: usize,
    pub height: usize,
    /// Direction of intensity variation for fringes, degrees from +x
    /// towards +y (rows).
    pub angle_deg: f64,
    pub period: f64,
    pub amplitude: f64,
    pub offset: f64,
}

impl SyntheticImageSpec {
    pub fn fringe(size: usize, angle_deg: f64, period: f64) -> Self {
        Self {
            kind: SyntheticKind::OrientedFringe,
            width: size,
            height: size,
            angle_deg,
            period,
            amplitude: 100.0,
            offset: 128.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("synthetic image size must be positive"));
        }
        if !(self.period >= 4.0) {
            return Err(Error::invalid(format!(
                "period must be at least 4 px, got {}",
                self.period
            )));
        }
        if !self.angle_deg.is_finite() || !(self.amplitude >= 0.0) {
            return Err(Error::invalid("angle must be finite and amplitude non-negative"));
        }
        if !(self.offset - self.amplitude >= 0.0 && self.offset + self.amplitude <= 255.0) {
            return Err(Error::invalid(format!(
                "offset {} +/- amplitude {} leaves 0..=255",
                self.offset, self.amplitude
            )));
        }
        Ok(())
    }
}

pub fn generate(spec: &SyntheticImageSpec) -> Result<GrayImage> {
    spec.validate()?;
    let SyntheticImageSpec {
        width,
        height,
        period,
        amplitude,
        offset,
        ..
    } = *spec;
    let img = match spec.kind {
        SyntheticKind::OrientedFringe => {
            let (s, c) = spec.angle_deg.to_radians().sin_cos();
            GrayImage::from_fn(width, height, |x, y| {
                offset + amplitude * (2.0 * PI * (x as f64 * c + y as f64 * s) / period).sin()
            })
        }
        SyntheticKind::ConcentricRings => {
            let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
            GrayImage::from_fn(width, height, |x, y| {
                let r = (x as f64 - cx).hypot(y as f64 - cy);
                offset + amplitude * (2.0 * PI * r / period).sin()
            })
        }
        SyntheticKind::StepWedge => {
            let bands = (width as f64 / period).ceil().max(2.0);
            GrayImage::from_fn(width, height, |x, _| {
                let band = (x as f64 / period).floor();
                offset - amplitude + 2.0 * amplitude * band / (bands - 1.0)
            })
        }
    };
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fringe_reference_pixels() {
        let img = generate(&SyntheticImageSpec::fringe(16, 0.0, 8.0)).unwrap();
        assert_eq!(img.get(0, 0), 128.0);
        assert_eq!(img.get(2, 0), 228.0);
        assert_eq!(img.get(2, 9), 228.0);
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = SyntheticImageSpec::fringe(40, 33.0, 11.0);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn other_kinds_stay_in_range() {
        for kind in [SyntheticKind::ConcentricRings, SyntheticKind::StepWedge] {
            let spec = SyntheticImageSpec {
                kind,
                ..SyntheticImageSpec::fringe(33, 0.0, 6.0)
            };
            let img = generate(&spec).unwrap();
            assert!(img.pixels().iter().all(|v| (28.0..=228.0).contains(v)));
        }
        let wedge = generate(&SyntheticImageSpec {
            kind: SyntheticKind::StepWedge,
            ..SyntheticImageSpec::fringe(8, 0.0, 4.0)
        })
        .unwrap();
        assert_eq!(wedge.get(0, 0), 28.0);
        assert_eq!(wedge.get(7, 3), 228.0);
    }

    #[test]
    fn invalid_specs() {
        let base = SyntheticImageSpec::fringe(8, 0.0, 8.0);
        assert!(generate(&SyntheticImageSpec { period: 3.0, ..base }).is_err());
        assert!(generate(&SyntheticImageSpec {
            amplitude: 200.0,
            ..base
        })
        .is_err());
        assert!(generate(&SyntheticImageSpec { width: 0, ..base }).is_err());
        assert_eq!(
            "rings".parse::<SyntheticKind>().unwrap(),
            SyntheticKind::ConcentricRings
        );
        assert!("zebra".parse::<SyntheticKind>().is_err());
    }
}
