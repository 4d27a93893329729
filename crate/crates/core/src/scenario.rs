//! Single-user sidewalk study.
//!
//! A user walks at constant speed along the middle axis of an `L × D` cell.
//! The AP sits on a pole at the midpoint of one long edge. Each TDD frame is
//! evaluated at the user's position at the start of the frame; the user
//! becomes self-blocked once past the AP and stays so until leaving the cell.

use rayon::prelude::*;

use crate::error::{HbbError, Result};
use crate::geometry::{aoa_of_frame, BodyGeometry, SidewalkCell, SphericalAoA};
use crate::numeric::floor_tolerant;
use crate::stochastics::{
    blockage_free_series, frame_arrival_prob, frame_arrival_rate, FrameStructure,
    PedestrianProcess, Persistence,
};

/// Which form of the expected downlink-time sum to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DlTimeMode {
    /// `M · Σ_{i<M} P̆_i · T1`, including the leading frame-count factor.
    #[default]
    Literal,
    /// `Σ_{i<M} P̆_i · T1`.
    Sum,
}

impl DlTimeMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DlTimeMode::Literal => "literal",
            DlTimeMode::Sum => "sum",
        }
    }
}

impl std::str::FromStr for DlTimeMode {
    type Err = HbbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(DlTimeMode::Literal),
            "sum" => Ok(DlTimeMode::Sum),
            other => Err(HbbError::domain(format!(
                "unknown downlink-time mode `{other}` (expected `literal` or `sum`)"
            ))),
        }
    }
}

/// Model switches that are not physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub persistence: Persistence,
    pub dl_time_mode: DlTimeMode,
    /// Grid spacing (m) for the self-blocking area integration.
    pub grid_resolution: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            persistence: Persistence::Clamped,
            dl_time_mode: DlTimeMode::Literal,
            grid_resolution: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidewalkScenario {
    pub cell: SidewalkCell,
    pub geom: BodyGeometry,
    pub process: PedestrianProcess,
    pub frame: FrameStructure,
    pub options: ModelOptions,
}

/// Per-frame state along the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub index: usize,
    /// Start of the frame, seconds after cell entry.
    pub time: f64,
    /// Body-frame azimuth of the AP.
    pub theta: f64,
    /// Zenith angle of the AP.
    pub phi: f64,
    pub d_2d: f64,
    /// Blockage arrival rate, 1/s.
    pub rate: f64,
    pub p_arrival: f64,
    pub p_free: f64,
    pub self_blocked: bool,
}

/// Expected effective downlink time together with how it was computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlTime {
    pub seconds: f64,
    pub mode: DlTimeMode,
    /// Number of frames summed, i.e. the frames before self-blockage.
    pub frames: usize,
}

/// Human-body blockage losses in dB. Infinite values mark total outage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbbLoss {
    pub pedestrian_db: f64,
    pub self_db: f64,
    pub total_db: f64,
}

impl HbbLoss {
    pub fn is_total_outage(&self) -> bool {
        self.total_db.is_infinite()
    }
}

fn loss_db(success_fraction: f64) -> f64 {
    if success_fraction <= 0.0 {
        f64::INFINITY
    } else {
        // -0.0 when nothing is lost
        (-10.0 * success_fraction.log10()).max(0.0)
    }
}

impl SidewalkScenario {
    /// Reference sidewalk: 15 m × 2 m cell, 3 km/h, 5 ms frames.
    pub fn reference(lambda0: f64) -> Self {
        SidewalkScenario {
            cell: SidewalkCell {
                length: 15.0,
                width: 2.0,
                speed: 3.0 / 3.6,
            },
            geom: BodyGeometry::REFERENCE,
            process: PedestrianProcess::with_density(lambda0),
            frame: FrameStructure::default(),
            options: ModelOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cell.validate()?;
        self.geom.validate()?;
        self.process.validate()?;
        self.frame.validate()?;
        let step = self.cell.speed * self.frame.len();
        if !(step < self.cell.length / 10.0 && step.is_finite()) {
            return Err(HbbError::domain(format!(
                "user moves {step} m per frame; needs less than a tenth of the {} m cell",
                self.cell.length
            )));
        }
        let res = self.options.grid_resolution;
        if !(res > 0.0 && res <= self.cell.length.min(self.cell.width) / 100.0) {
            return Err(HbbError::domain(format!(
                "grid resolution {res} m must be > 0 and at most 1% of the shorter cell side"
            )));
        }
        Ok(())
    }

    pub fn frame_len(&self) -> f64 {
        self.frame.len()
    }

    /// Frames spent in the cell, `⌊L / (vT)⌋`.
    pub fn frame_count(&self) -> usize {
        floor_tolerant(self.cell.length / (self.cell.speed * self.frame_len())) as usize
    }

    pub fn aoa(&self, index: usize) -> Result<SphericalAoA> {
        aoa_of_frame(index, &self.cell, &self.geom, self.frame_len())
    }

    /// Index of the first self-blocked frame, or the frame count when the
    /// user never enters the self-blocking region.
    pub fn frames_before_self_block(&self) -> Result<usize> {
        let sectors = self.geom.sectors();
        for i in 0..self.frame_count() {
            if sectors.contains(&self.aoa(i)?) {
                return Ok(i);
            }
        }
        Ok(self.frame_count())
    }

    /// AoA at which the user first becomes self-blocked.
    pub fn self_block_entry(&self) -> Result<Option<SphericalAoA>> {
        let m = self.frames_before_self_block()?;
        if m < self.frame_count() {
            self.aoa(m).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Arrival rate for every frame of the traversal.
    pub fn rate_profile(&self) -> Result<Vec<f64>> {
        (0..self.frame_count())
            .map(|i| frame_arrival_rate(self.aoa(i)?.phi, self.process.lambda0, &self.geom))
            .collect()
    }

    pub fn frame_series(&self) -> Result<Vec<FrameRecord>> {
        self.validate()?;
        let t = self.frame_len();
        let sectors = self.geom.sectors();
        let aoas = (0..self.frame_count())
            .map(|i| self.aoa(i))
            .collect::<Result<Vec<_>>>()?;
        let rates = aoas
            .iter()
            .map(|a| frame_arrival_rate(a.phi, self.process.lambda0, &self.geom))
            .collect::<Result<Vec<_>>>()?;
        let free = blockage_free_series(&rates, t, &self.process, self.options.persistence)?;
        let drop = self.geom.ap_drop();
        Ok(aoas
            .iter()
            .zip(&rates)
            .zip(&free)
            .enumerate()
            .map(|(i, ((aoa, &rate), &p_free))| FrameRecord {
                index: i,
                time: i as f64 * t,
                theta: aoa.theta,
                phi: aoa.phi,
                d_2d: aoa.horizontal_distance(drop),
                rate,
                p_arrival: frame_arrival_prob(rate, t),
                p_free,
                self_blocked: sectors.contains(aoa),
            })
            .collect())
    }

    /// Expected effective downlink time during the stay in the cell.
    pub fn expected_dl_time(&self) -> Result<DlTime> {
        let series = self.frame_series()?;
        let m = self.frames_before_self_block()?;
        Ok(self.dl_time_from(&series, m))
    }

    fn dl_time_from(&self, series: &[FrameRecord], m: usize) -> DlTime {
        let sum: f64 = series[..m].iter().map(|r| r.p_free).sum::<f64>() * self.frame.downlink;
        let seconds = match self.options.dl_time_mode {
            DlTimeMode::Literal => m as f64 * sum,
            DlTimeMode::Sum => sum,
        };
        DlTime {
            seconds,
            mode: self.options.dl_time_mode,
            frames: m,
        }
    }

    /// Share of the cell area in which a user facing the walking direction
    /// is self-blocked, integrated with cell-centered samples spaced
    /// `resolution` meters apart.
    pub fn self_blockage_area_fraction(&self, resolution: f64) -> Result<f64> {
        let (length, width) = (self.cell.length, self.cell.width);
        if !(resolution > 0.0 && resolution <= length.min(width) / 100.0) {
            return Err(HbbError::domain(format!(
                "grid resolution {resolution} m must be > 0 and at most 1% of the shorter cell side"
            )));
        }
        let nx = (length / resolution - 1e-9).ceil() as usize;
        let ny = (width / resolution - 1e-9).ceil() as usize;
        let (dx, dy) = (length / nx as f64, width / ny as f64);
        let sectors = self.geom.sectors();
        if sectors.half_width == 0.0 {
            return Ok(0.0);
        }
        let drop = self.geom.ap_drop();
        let blocked: usize = (0..ny)
            .into_par_iter()
            .map(|iy| {
                let lateral = width - (iy as f64 + 0.5) * dy;
                (0..nx)
                    .filter(|&ix| {
                        let forward = length / 2.0 - (ix as f64 + 0.5) * dx;
                        sectors.contains(&SphericalAoA::from_offset(forward, lateral, drop))
                    })
                    .count()
            })
            .sum();
        Ok(blocked as f64 / (nx * ny) as f64)
    }

    pub fn hbb_loss_db(&self) -> Result<HbbLoss> {
        Ok(self.evaluate()?.loss)
    }

    /// Frame series, downlink time and losses in one pass.
    pub fn evaluate(&self) -> Result<Evaluation> {
        let series = self.frame_series()?;
        let m = self.frames_before_self_block()?;
        let dl_time = self.dl_time_from(&series, m);
        let area = self.self_blockage_area_fraction(self.options.grid_resolution)?;
        // Frames after self-blockage entry are dominated by the body and
        // excluded from the pedestrian average.
        let mean_p_free = if m == 0 {
            f64::NAN
        } else {
            series[..m].iter().map(|r| r.p_free).sum::<f64>() / m as f64
        };
        let pedestrian_db = if m == 0 {
            f64::INFINITY
        } else {
            loss_db(mean_p_free)
        };
        let self_db = loss_db(1.0 - area);
        Ok(Evaluation {
            frames_before_self_block: m,
            dl_time,
            self_block_area_fraction: area,
            mean_p_free,
            loss: HbbLoss {
                pedestrian_db,
                self_db,
                total_db: pedestrian_db + self_db,
            },
            series,
        })
    }
}

/// Everything derived from one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub series: Vec<FrameRecord>,
    pub frames_before_self_block: usize,
    pub dl_time: DlTime,
    pub self_block_area_fraction: f64,
    /// Mean blockage-free probability over frames before self-blockage.
    pub mean_p_free: f64,
    pub loss: HbbLoss,
}

/// Frame count before self-blockage from a stated entry azimuth `entry_theta`
/// (radians, measured behind the user): `⌊(L + D cot θ) / (2vT)⌋`.
pub fn entry_angle_frame_count(cell: &SidewalkCell, frame_len: f64, entry_theta: f64) -> usize {
    let entry = cell.length + cell.width / entry_theta.tan();
    floor_tolerant(entry / (2.0 * cell.speed * frame_len)) as usize
}

/// One parameter setting in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepPoint {
    /// Frame length `T` in seconds; guard and uplink slots stay fixed.
    FrameLength(f64),
    Lambda0(f64),
    ApHeight(f64),
    /// Common body width and height of user and pedestrians.
    BodySize {
        width: f64,
        height: f64,
    },
}

impl SweepPoint {
    pub fn apply(&self, base: &SidewalkScenario) -> Result<SidewalkScenario> {
        let mut s = *base;
        match *self {
            SweepPoint::FrameLength(t) => s.frame = s.frame.with_length(t)?,
            SweepPoint::Lambda0(l) => s.process.lambda0 = l,
            SweepPoint::ApHeight(h) => s.geom.ap_height = h,
            SweepPoint::BodySize { width, height } => {
                s.geom = s.geom.with_body_size(width, height)?
            }
        }
        s.validate()?;
        Ok(s)
    }
}

/// Which variant of the scenario a sweep row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepCase {
    Scenario,
    /// Same setting without any pedestrians.
    NoPedestrians,
    /// Neither pedestrians nor self-blockage.
    NoBlockage,
}

impl SweepCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepCase::Scenario => "scenario",
            SweepCase::NoPedestrians => "no_pedestrians",
            SweepCase::NoBlockage => "no_hbb",
        }
    }

    fn adjust(&self, s: &mut SidewalkScenario) {
        match self {
            SweepCase::Scenario => {}
            SweepCase::NoPedestrians => s.process.lambda0 = 0.0,
            SweepCase::NoBlockage => {
                s.process.lambda0 = 0.0;
                s.geom.user_width = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMetrics {
    pub dl_time: DlTime,
    pub loss: HbbLoss,
    pub mean_p_free: f64,
    pub frames_before_self_block: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub case: SweepCase,
    pub point: SweepPoint,
    /// Metrics, or why the point was rejected.
    pub outcome: std::result::Result<SweepMetrics, String>,
}

/// Re-evaluates `base` at every point. Invalid points yield a flagged row
/// instead of aborting. With `reference_cases`, every point is followed by
/// its no-pedestrian and no-blockage counterparts.
pub fn sweep(
    base: &SidewalkScenario,
    points: &[SweepPoint],
    reference_cases: bool,
) -> Vec<SweepRow> {
    let cases: &[SweepCase] = if reference_cases {
        &[
            SweepCase::Scenario,
            SweepCase::NoPedestrians,
            SweepCase::NoBlockage,
        ]
    } else {
        &[SweepCase::Scenario]
    };
    let jobs: Vec<(SweepPoint, SweepCase)> = points
        .iter()
        .flat_map(|p| cases.iter().map(move |c| (*p, *c)))
        .collect();
    jobs.into_par_iter()
        .map(|(point, case)| {
            let outcome = point
                .apply(base)
                .and_then(|mut s| {
                    case.adjust(&mut s);
                    s.evaluate()
                })
                .map(|e| SweepMetrics {
                    dl_time: e.dl_time,
                    loss: e.loss,
                    mean_p_free: e.mean_p_free,
                    frames_before_self_block: e.frames_before_self_block,
                })
                .map_err(|e| e.to_string());
            SweepRow {
                case,
                point,
                outcome,
            }
        })
        .collect()
}
