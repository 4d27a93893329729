//! Scenario configuration files.
//!
//! A configuration is a TOML document whose keys are the dotted names below,
//! written either as tables (`[geometry]` / `w_u = 0.3`) or as dotted keys
//! (`geometry.w_u = 0.3`). Every key is optional and defaults to the
//! reference scenario. Unknown keys are rejected by their full dotted name.
//!
//! | key | unit |
//! |-----|------|
//! | `geometry.{w_u,h_u,d,h_d,w_p,h_p,ap_height}` | m |
//! | `cell.{length,width}` | m |
//! | `cell.speed_kmh` | km/h |
//! | `process.lambda0` | 1/(m² s) |
//! | `process.{tau_min,tau_max}` | s |
//! | `frame.{t1_ms,t2_ms,t3_ms}` | ms |
//! | `options.eq8_clamp` | bool |
//! | `options.eq13_mode` | `"literal"` or `"sum"` |
//! | `options.grid_resolution_m` | m |

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HbbError, Result};
use crate::geometry::{BodyGeometry, SidewalkCell};
use crate::scenario::{DlTimeMode, ModelOptions, SidewalkScenario};
use crate::stochastics::{FrameStructure, PedestrianProcess, Persistence};

const KMH: f64 = 1.0 / 3.6;
const MS: f64 = 1e-3;

/// External form of a [`SidewalkScenario`], in the units of the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub w_u: f64,
    pub h_u: f64,
    pub d: f64,
    pub h_d: f64,
    pub w_p: f64,
    pub h_p: f64,
    pub ap_height: f64,
    pub length: f64,
    pub width: f64,
    pub speed_kmh: f64,
    pub lambda0: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub t3_ms: f64,
    pub eq8_clamp: bool,
    pub eq13_mode: DlTimeMode,
    pub grid_resolution_m: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let g = BodyGeometry::REFERENCE;
        ScenarioConfig {
            w_u: g.user_width,
            h_u: g.user_height,
            d: g.handset_distance,
            h_d: g.handset_height,
            w_p: g.pedestrian_width,
            h_p: g.pedestrian_height,
            ap_height: g.ap_height,
            length: 15.0,
            width: 2.0,
            speed_kmh: 3.0,
            lambda0: PedestrianProcess::BUSY,
            tau_min: 0.5,
            tau_max: 2.0,
            t1_ms: 4.8,
            t2_ms: 0.1,
            t3_ms: 0.1,
            eq8_clamp: true,
            eq13_mode: DlTimeMode::Literal,
            grid_resolution_m: 0.01,
        }
    }
}

enum Slot<'a> {
    Num(&'a mut f64),
    Bool(&'a mut bool),
    Mode(&'a mut DlTimeMode),
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            HbbError::config("<document>", e.message().to_string())
        })?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);

        let mut cfg = ScenarioConfig::default();
        for (key, value) in entries {
            let slot = cfg
                .slot(&key)
                .ok_or_else(|| HbbError::config(&key, "unknown key"))?;
            match slot {
                Slot::Num(dst) => {
                    *dst = match value {
                        toml::Value::Float(f) => *f,
                        toml::Value::Integer(i) => *i as f64,
                        other => {
                            return Err(HbbError::config(
                                &key,
                                format!("expected a number, got {}", other.type_str()),
                            ))
                        }
                    }
                }
                Slot::Bool(dst) => {
                    *dst = value.as_bool().ok_or_else(|| {
                        HbbError::config(
                            &key,
                            format!("expected a boolean, got {}", value.type_str()),
                        )
                    })?
                }
                Slot::Mode(dst) => {
                    let s = value.as_str().ok_or_else(|| {
                        HbbError::config(
                            &key,
                            format!("expected a string, got {}", value.type_str()),
                        )
                    })?;
                    *dst = s
                        .parse()
                        .map_err(|_| HbbError::config(&key, "expected \"literal\" or \"sum\""))?;
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn slot(&mut self, key: &str) -> Option<Slot<'_>> {
        Some(match key {
            "geometry.w_u" => Slot::Num(&mut self.w_u),
            "geometry.h_u" => Slot::Num(&mut self.h_u),
            "geometry.d" => Slot::Num(&mut self.d),
            "geometry.h_d" => Slot::Num(&mut self.h_d),
            "geometry.w_p" => Slot::Num(&mut self.w_p),
            "geometry.h_p" => Slot::Num(&mut self.h_p),
            "geometry.ap_height" => Slot::Num(&mut self.ap_height),
            "cell.length" => Slot::Num(&mut self.length),
            "cell.width" => Slot::Num(&mut self.width),
            "cell.speed_kmh" => Slot::Num(&mut self.speed_kmh),
            "process.lambda0" => Slot::Num(&mut self.lambda0),
            "process.tau_min" => Slot::Num(&mut self.tau_min),
            "process.tau_max" => Slot::Num(&mut self.tau_max),
            "frame.t1_ms" => Slot::Num(&mut self.t1_ms),
            "frame.t2_ms" => Slot::Num(&mut self.t2_ms),
            "frame.t3_ms" => Slot::Num(&mut self.t3_ms),
            "options.eq8_clamp" => Slot::Bool(&mut self.eq8_clamp),
            "options.eq13_mode" => Slot::Mode(&mut self.eq13_mode),
            "options.grid_resolution_m" => Slot::Num(&mut self.grid_resolution_m),
            _ => return None,
        })
    }

    /// Checks every invariant, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("geometry.h_u", self.h_u),
            ("geometry.d", self.d),
            ("geometry.h_d", self.h_d),
            ("geometry.w_p", self.w_p),
            ("geometry.h_p", self.h_p),
            ("geometry.ap_height", self.ap_height),
            ("cell.length", self.length),
            ("cell.width", self.width),
            ("cell.speed_kmh", self.speed_kmh),
            ("process.tau_min", self.tau_min),
            ("process.tau_max", self.tau_max),
            ("frame.t1_ms", self.t1_ms),
            ("frame.t2_ms", self.t2_ms),
            ("frame.t3_ms", self.t3_ms),
            ("options.grid_resolution_m", self.grid_resolution_m),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(HbbError::config(
                    key,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        for (key, v) in [
            ("geometry.w_u", self.w_u),
            ("process.lambda0", self.lambda0),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(HbbError::config(
                    key,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        let below = [
            ("geometry.h_d", self.h_d, "geometry.h_u", self.h_u),
            ("geometry.h_d", self.h_d, "geometry.h_p", self.h_p),
            (
                "geometry.h_d",
                self.h_d,
                "geometry.ap_height",
                self.ap_height,
            ),
            (
                "process.tau_min",
                self.tau_min,
                "process.tau_max",
                self.tau_max,
            ),
        ];
        for (key, v, other, bound) in below {
            if v >= bound {
                return Err(HbbError::config(
                    key,
                    format!("must be below {other} ({bound}), got {v}"),
                ));
            }
        }
        let step = self.speed_kmh * KMH * (self.t1_ms + self.t2_ms + self.t3_ms) * MS;
        if step >= self.length / 10.0 {
            return Err(HbbError::config(
                "cell.speed_kmh",
                format!("user moves {step} m per frame; needs less than a tenth of cell.length"),
            ));
        }
        if self.grid_resolution_m > self.length.min(self.width) / 100.0 {
            return Err(HbbError::config(
                "options.grid_resolution_m",
                "must be at most 1% of the shorter cell side",
            ));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<SidewalkScenario> {
        self.validate()?;
        let s = SidewalkScenario {
            cell: SidewalkCell {
                length: self.length,
                width: self.width,
                speed: self.speed_kmh * KMH,
            },
            geom: BodyGeometry {
                user_width: self.w_u,
                user_height: self.h_u,
                handset_distance: self.d,
                handset_height: self.h_d,
                pedestrian_width: self.w_p,
                pedestrian_height: self.h_p,
                ap_height: self.ap_height,
            },
            process: PedestrianProcess {
                lambda0: self.lambda0,
                tau_min: self.tau_min,
                tau_max: self.tau_max,
            },
            frame: FrameStructure {
                downlink: self.t1_ms * MS,
                guard: self.t2_ms * MS,
                uplink: self.t3_ms * MS,
            },
            options: ModelOptions {
                persistence: if self.eq8_clamp {
                    Persistence::Clamped
                } else {
                    Persistence::Literal
                },
                dl_time_mode: self.eq13_mode,
                grid_resolution: self.grid_resolution_m,
            },
        };
        s.validate()
            .map_err(|e| HbbError::config("<scenario>", e.to_string()))?;
        Ok(s)
    }

    /// Complete TOML form; parses back to an identical configuration.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let num = |x: f64| format!("{x:?}");
        let sections: [(&str, Vec<(&str, String)>); 5] = [
            (
                "geometry",
                vec![
                    ("w_u", num(self.w_u)),
                    ("h_u", num(self.h_u)),
                    ("d", num(self.d)),
                    ("h_d", num(self.h_d)),
                    ("w_p", num(self.w_p)),
                    ("h_p", num(self.h_p)),
                    ("ap_height", num(self.ap_height)),
                ],
            ),
            (
                "cell",
                vec![
                    ("length", num(self.length)),
                    ("width", num(self.width)),
                    ("speed_kmh", num(self.speed_kmh)),
                ],
            ),
            (
                "process",
                vec![
                    ("lambda0", num(self.lambda0)),
                    ("tau_min", num(self.tau_min)),
                    ("tau_max", num(self.tau_max)),
                ],
            ),
            (
                "frame",
                vec![
                    ("t1_ms", num(self.t1_ms)),
                    ("t2_ms", num(self.t2_ms)),
                    ("t3_ms", num(self.t3_ms)),
                ],
            ),
            (
                "options",
                vec![
                    ("eq8_clamp", self.eq8_clamp.to_string()),
                    ("eq13_mode", format!("\"{}\"", self.eq13_mode.as_str())),
                    ("grid_resolution_m", num(self.grid_resolution_m)),
                ],
            ),
        ];
        for (i, (name, keys)) in sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (k, v) in keys {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }
}

fn flatten<'a>(prefix: &str, table: &'a toml::Table, out: &mut Vec<(String, &'a toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            _ => out.push((key, v)),
        }
    }
}
