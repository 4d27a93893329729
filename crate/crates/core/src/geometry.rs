//! Deterministic link geometry: self-blockage sectors, the pedestrian
//! blocking region and the angle of arrival along the sidewalk trajectory.
//!
//! Angles are radians throughout. The azimuth of a [`SphericalAoA`] is
//! measured in the body frame of the user: the reference axis points from
//! the handset toward the user's torso, so `theta = 0` is directly behind
//! the user and `theta = ±π` is straight ahead. The elevation `phi` is the
//! zenith angle of the AP as seen from the handset.

use std::f64::consts::PI;

use crate::error::{HbbError, Result};

/// Dimensions of the user, the pedestrians, the handset and the AP mast.
///
/// All lengths are meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyGeometry {
    /// Width of the user's torso. Zero disables the horizontal self-blocking
    /// sector.
    pub user_width: f64,
    pub user_height: f64,
    /// Horizontal distance between handset and torso.
    pub handset_distance: f64,
    pub handset_height: f64,
    /// Diameter of a pedestrian cylinder.
    pub pedestrian_width: f64,
    pub pedestrian_height: f64,
    pub ap_height: f64,
}

impl BodyGeometry {
    /// Reference body and deployment dimensions.
    pub const REFERENCE: BodyGeometry = BodyGeometry {
        user_width: 0.3,
        user_height: 1.7,
        handset_distance: 0.15,
        handset_height: 1.5,
        pedestrian_width: 0.3,
        pedestrian_height: 1.7,
        ap_height: 3.0,
    };

    pub fn new(
        user_width: f64,
        user_height: f64,
        handset_distance: f64,
        handset_height: f64,
        pedestrian_width: f64,
        pedestrian_height: f64,
        ap_height: f64,
    ) -> Result<Self> {
        let geom = BodyGeometry {
            user_width,
            user_height,
            handset_distance,
            handset_height,
            pedestrian_width,
            pedestrian_height,
            ap_height,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Homogeneous body size for user and pedestrians: both share `width` and
    /// `height`, and the handset is held at `1.5 / 1.7` of the body height.
    pub fn with_body_size(self, width: f64, height: f64) -> Result<Self> {
        let geom = BodyGeometry {
            user_width: width,
            pedestrian_width: width,
            user_height: height,
            pedestrian_height: height,
            handset_height: height * 1.5 / 1.7,
            ..self
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("user_height", self.user_height),
            ("handset_distance", self.handset_distance),
            ("handset_height", self.handset_height),
            ("pedestrian_width", self.pedestrian_width),
            ("pedestrian_height", self.pedestrian_height),
            ("ap_height", self.ap_height),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(HbbError::domain(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if !(self.user_width.is_finite() && self.user_width >= 0.0) {
            return Err(HbbError::domain(format!(
                "user_width must be finite and >= 0, got {}",
                self.user_width
            )));
        }
        if self.handset_height >= self.user_height {
            return Err(HbbError::domain(format!(
                "handset_height ({}) must be below user_height ({})",
                self.handset_height, self.user_height
            )));
        }
        if self.handset_height >= self.ap_height {
            return Err(HbbError::domain(format!(
                "handset_height ({}) must be below ap_height ({})",
                self.handset_height, self.ap_height
            )));
        }
        if self.handset_height >= self.pedestrian_height {
            return Err(HbbError::domain(format!(
                "handset_height ({}) must be below pedestrian_height ({})",
                self.handset_height, self.pedestrian_height
            )));
        }
        Ok(())
    }

    /// Self-blocking sectors of this geometry.
    pub fn sectors(&self) -> SelfBlockSectors {
        SelfBlockSectors {
            half_width: (self.user_width / (2.0 * self.handset_distance)).atan(),
            elevation_threshold: (self.handset_distance / (self.user_height - self.handset_height))
                .atan(),
        }
    }

    /// Vertical drop from the AP to the handset.
    pub fn ap_drop(&self) -> f64 {
        self.ap_height - self.handset_height
    }

    /// Fraction of the horizontal UE-AP distance over which a pedestrian can
    /// intercept the line of sight.
    pub fn blocking_slope(&self) -> f64 {
        (self.pedestrian_height - self.handset_height) / self.ap_drop()
    }
}

impl Default for BodyGeometry {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// Angle of arrival of the AP signal at the handset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalAoA {
    /// Body-frame azimuth in `(-π, π]`.
    pub theta: f64,
    /// Zenith angle in `[0, π/2]`.
    pub phi: f64,
    /// Handset-to-AP distance.
    pub r: f64,
}

impl SphericalAoA {
    /// AoA of an AP located `forward` meters ahead of the handset (along the
    /// direction the user faces), `lateral` meters to the side and `drop`
    /// meters above it.
    pub fn from_offset(forward: f64, lateral: f64, drop: f64) -> Self {
        let d_2d = forward.hypot(lateral);
        SphericalAoA {
            theta: lateral.atan2(-forward),
            phi: d_2d.atan2(drop),
            r: d_2d.hypot(drop),
        }
    }

    /// Horizontal handset-to-AP distance for an AP `drop` meters above.
    pub fn horizontal_distance(&self, drop: f64) -> f64 {
        drop * self.phi.tan()
    }
}

/// Horizontal and vertical self-blocking sectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfBlockSectors {
    /// Half of the horizontal sector width, `θ_b / 2`.
    pub half_width: f64,
    /// Elevation threshold `φ_b`; the body blocks zenith angles above it.
    pub elevation_threshold: f64,
}

impl SelfBlockSectors {
    pub fn contains(&self, aoa: &SphericalAoA) -> bool {
        aoa.theta.abs() < self.half_width && aoa.phi > self.elevation_threshold
    }
}

/// Straight sidewalk traversal through an `length × width` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidewalkCell {
    pub length: f64,
    pub width: f64,
    /// Walking speed in m/s.
    pub speed: f64,
}

impl SidewalkCell {
    pub fn new(length: f64, width: f64, speed: f64) -> Result<Self> {
        let cell = SidewalkCell {
            length,
            width,
            speed,
        };
        cell.validate()?;
        Ok(cell)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("length", self.length),
            ("width", self.width),
            ("speed", self.speed),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(HbbError::domain(format!(
                    "cell {name} must be finite and > 0, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Distance walked from the cell entrance at the start of frame `index`.
    pub fn position(&self, index: usize, frame_len: f64) -> f64 {
        self.speed * index as f64 * frame_len
    }
}

/// Width `θ_b` of the horizontal self-blocking sector.
pub fn horizontal_sector_width(user_width: f64, handset_distance: f64) -> Result<f64> {
    if !(user_width >= 0.0 && user_width.is_finite()) {
        return Err(HbbError::domain(format!(
            "user width must be finite and >= 0, got {user_width}"
        )));
    }
    if !(handset_distance > 0.0 && handset_distance.is_finite()) {
        return Err(HbbError::domain(format!(
            "handset distance must be finite and > 0, got {handset_distance}"
        )));
    }
    Ok(2.0 * (user_width / (2.0 * handset_distance)).atan())
}

/// Elevation threshold `φ_b` of the vertical self-blocking sector.
pub fn vertical_sector_threshold(
    handset_distance: f64,
    user_height: f64,
    handset_height: f64,
) -> Result<f64> {
    if !(handset_distance > 0.0 && handset_distance.is_finite()) {
        return Err(HbbError::domain(format!(
            "handset distance must be finite and > 0, got {handset_distance}"
        )));
    }
    if !(user_height > handset_height && user_height.is_finite()) {
        return Err(HbbError::domain(format!(
            "vertical sector undefined: user height {user_height} <= handset height {handset_height}"
        )));
    }
    Ok((handset_distance / (user_height - handset_height)).atan())
}

/// Whether the user's own body occludes the AP.
pub fn is_self_blocked(aoa: &SphericalAoA, geom: &BodyGeometry) -> bool {
    geom.sectors().contains(aoa)
}

fn check_distance(d_2d: f64) -> Result<()> {
    if d_2d >= 0.0 && d_2d.is_finite() {
        Ok(())
    } else {
        Err(HbbError::domain(format!(
            "horizontal distance must be finite and >= 0, got {d_2d}"
        )))
    }
}

/// Length of the ground strip whose pedestrians intercept the 3D line of
/// sight, for a handset `d_2d` meters (horizontally) from the AP.
pub fn blocking_region_length(d_2d: f64, geom: &BodyGeometry) -> Result<f64> {
    check_distance(d_2d)?;
    Ok(geom.blocking_slope() * d_2d + geom.pedestrian_width / 2.0)
}

/// Blocking-strip length of the planar model, which ignores the elevation
/// of the link and counts the whole horizontal path.
pub fn blocking_region_length_2d(d_2d: f64, geom: &BodyGeometry) -> Result<f64> {
    check_distance(d_2d)?;
    Ok(d_2d + geom.pedestrian_width / 2.0)
}

/// Azimuth of the AP measured from the walking direction at frame `index`,
/// using a quadrant-correct arctangent. Sweeps from near zero at the cell
/// entrance through `π/2` abeam the AP toward `π` at the exit.
pub fn path_azimuth(index: usize, cell: &SidewalkCell, frame_len: f64) -> f64 {
    let travelled = cell.position(index, frame_len);
    cell.width.atan2(cell.length - 2.0 * travelled)
}

/// AoA at the start of frame `index` for a user walking along the middle
/// axis of the cell, with the AP at the midpoint of one long edge.
pub fn aoa_of_frame(
    index: usize,
    cell: &SidewalkCell,
    geom: &BodyGeometry,
    frame_len: f64,
) -> Result<SphericalAoA> {
    let travelled = cell.position(index, frame_len);
    if travelled > cell.length * (1.0 + 1e-12) {
        return Err(HbbError::Range(format!(
            "frame {index} lies {travelled} m into a {} m cell",
            cell.length
        )));
    }
    let forward = cell.length / 2.0 - travelled;
    let lateral = cell.width / 2.0;
    let drop = geom.ap_drop();
    // Same construction as `from_offset`, expressed through the path azimuth
    // so the body-frame angle is exactly `π - path_azimuth`.
    let theta = PI - path_azimuth(index, cell, frame_len);
    let phi = forward.hypot(lateral).atan2(drop);
    let d_2d = drop * phi.tan();
    Ok(SphericalAoA {
        theta,
        phi,
        r: d_2d.hypot(drop),
    })
}
