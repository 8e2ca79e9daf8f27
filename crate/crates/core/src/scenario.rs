//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! lanes 4
//! car A lane 2 pos 10 size 5
//! car B lane 0 pos 12 size 5 claim 1
//! variant live
//! const t_w 2
//! horizon 100
//! ```

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::acta::{LcpConstants, Variant};
use crate::checker::{GuardMode, ModelConfig};
use crate::mlsl::fast;
use crate::traffic::{CarId, CarState, LaneId, LaneSet, TrafficSnapshot, MAX_LANES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarSpec {
    pub name: String,
    pub lane: u32,
    pub pos: i64,
    pub size: i64,
    pub claim: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub lanes: u32,
    pub cars: Vec<CarSpec>,
    pub variant: Variant,
    pub constants: LcpConstants,
    /// Explicit horizon; `None` means one that covers every car.
    pub horizon: Option<i64>,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.starts_with("Observer")
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut lanes = None;
        let mut cars: Vec<CarSpec> = Vec::new();
        let mut variant = None;
        let mut constants = LcpConstants::default();
        let mut horizon = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ScenarioError::Parse { line: i + 1, message };
            let words: Vec<&str> = line.split_whitespace().collect();
            let int = |w: &str, what: &str| {
                w.parse::<i64>().map_err(|_| err(format!("{what} must be an integer, got `{w}`")))
            };
            let nat = |w: &str, what: &str| {
                w.parse::<u32>().map_err(|_| err(format!("{what} must be a non-negative integer, got `{w}`")))
            };
            match words.as_slice() {
                ["lanes", k] => {
                    if lanes.is_some() {
                        return Err(err("`lanes` given twice".into()));
                    }
                    lanes = Some(nat(k, "lane count")?);
                }
                ["car", name, rest @ ..] => {
                    if !valid_name(name) {
                        return Err(err(format!("`{name}` is not a valid car name")));
                    }
                    if cars.iter().any(|c| c.name == *name) {
                        return Err(err(format!("car `{name}` defined twice")));
                    }
                    let mut lane = None;
                    let mut pos = None;
                    let mut size = None;
                    let mut claim = None;
                    let mut it = rest.chunks(2);
                    for pair in &mut it {
                        match pair {
                            ["lane", v] => lane = Some(nat(v, "lane")?),
                            ["pos", v] => pos = Some(int(v, "pos")?),
                            ["size", v] => size = Some(int(v, "size")?),
                            ["claim", v] => claim = Some(nat(v, "claim")?),
                            [k, _] => return Err(err(format!("unknown car field `{k}`"))),
                            [k] => return Err(err(format!("car field `{k}` needs a value"))),
                            _ => unreachable!(),
                        }
                    }
                    let missing = |f: &str| err(format!("car `{name}` needs `{f}`"));
                    cars.push(CarSpec {
                        name: name.to_string(),
                        lane: lane.ok_or_else(|| missing("lane"))?,
                        pos: pos.ok_or_else(|| missing("pos"))?,
                        size: size.ok_or_else(|| missing("size"))?,
                        claim,
                    });
                }
                ["variant", v] => variant = Some(v.parse::<Variant>().map_err(err)?),
                ["const", name, v] => {
                    let value = nat(v, "constant")?;
                    if !constants.set(name, value) {
                        return Err(err(format!(
                            "unknown constant `{name}` (expected one of {})",
                            LcpConstants::NAMES.join(", ")
                        )));
                    }
                }
                ["horizon", h] => horizon = Some(int(h, "horizon")?),
                _ => return Err(err(format!("cannot read `{line}`"))),
            }
        }
        let sc = Scenario {
            lanes: lanes.ok_or_else(|| ScenarioError::Invalid("missing `lanes`".into()))?,
            cars,
            variant: variant.unwrap_or(Variant::Live),
            constants,
            horizon,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Scenario::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if self.lanes == 0 || self.lanes as usize > MAX_LANES {
            return invalid(format!("lane count must be in 1..={MAX_LANES}"));
        }
        if self.cars.is_empty() {
            return invalid("no cars".into());
        }
        for c in &self.cars {
            if c.lane >= self.lanes {
                return invalid(format!("car {} is on lane {}, beyond the road", c.name, c.lane));
            }
            if c.size <= 0 {
                return invalid(format!("car {} must have a positive size", c.name));
            }
            if let Some(k) = c.claim {
                if k >= self.lanes || k.abs_diff(c.lane) != 1 {
                    return invalid(format!("car {} claims lane {k}, which is not next to lane {}", c.name, c.lane));
                }
            }
        }
        if let Some(h) = self.horizon {
            if h <= 0 {
                return invalid("horizon must be positive".into());
            }
        }
        self.constants.validate().map_err(ScenarioError::Invalid)?;
        let ts = self.snapshot();
        for (i, a) in self.cars.iter().enumerate() {
            if !fast::cc(&ts, CarId(i as u32)).expect("car exists") {
                let other = self
                    .cars
                    .iter()
                    .enumerate()
                    .find(|&(j, _)| {
                        j != i && {
                            let (x, y) = (&ts.cars[i], &ts.cars[j]);
                            fast::intersect(fast::Occupancy::res(x), fast::Occupancy::res(y))
                        }
                    })
                    .map(|(_, b)| b.name.as_str())
                    .unwrap_or("another car");
                return invalid(format!("initial cc violated: {} and {other} overlap", a.name));
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> TrafficSnapshot {
        let cars = self
            .cars
            .iter()
            .map(|c| {
                let mut st = CarState::new(LaneId(c.lane), c.pos, c.size);
                if let Some(k) = c.claim {
                    st.clm = LaneSet::single(LaneId(k));
                }
                st
            })
            .collect();
        TrafficSnapshot { lane_count: self.lanes, cars }
    }

    pub fn names(&self) -> Vec<String> {
        self.cars.iter().map(|c| c.name.clone()).collect()
    }

    pub fn car_id(&self, name: &str) -> Option<CarId> {
        self.cars.iter().position(|c| c.name == name).map(|i| CarId(i as u32))
    }

    /// The explicit horizon, or the smallest one under which every car sees
    /// every other car.
    pub fn horizon(&self) -> i64 {
        self.horizon.unwrap_or_else(|| self.snapshot().covering_horizon())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            constants: self.constants,
            horizon: self.horizon(),
            guard_mode: GuardMode::Auto,
        }
    }

    /// Writes the scenario back in the file format; parsing the result gives
    /// an equal scenario.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lanes {}", self.lanes);
        for c in &self.cars {
            let _ = write!(out, "car {} lane {} pos {} size {}", c.name, c.lane, c.pos, c.size);
            if let Some(k) = c.claim {
                let _ = write!(out, " claim {k}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "variant {}", self.variant);
        for name in LcpConstants::NAMES {
            let _ = writeln!(out, "const {name} {}", self.constants.get(name).expect("known constant"));
        }
        if let Some(h) = self.horizon {
            let _ = writeln!(out, "horizon {h}");
        }
        out
    }
}
