//! JSONL episode traces: one header object, then one step-record object per
//! line. Traces are the interchange format between simulation, metrics,
//! calibration replay, and rendering.

use crate::crowd::scenario::ScenarioConfig;
use crate::geom::Vec2;
use crate::metrics::danger_check;
use crate::world::{Event, WorldState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub policy: String,
    /// Hash of the resolved scenario config JSON.
    pub config_hash: String,
    /// Full spawn state; radii and goals for rendering and replay.
    pub start: WorldState,
}

/// State after one transition, with the signals attached to that transition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub action: Vec2,
    pub robot_pos: Vec2,
    pub robot_vel: Vec2,
    pub human_pos: Vec<Vec2>,
    pub human_vel: Vec<Vec2>,
    pub event: Event,
    pub reward: f64,
    pub cost: f64,
    pub intrusion: f64,
    /// Queried uncertainty radii at this state, h-major with stride K.
    pub uncertainty: Vec<f64>,
    /// Robot intrudes into ground-truth future human positions (set by
    /// `annotate_danger`).
    pub danger: bool,
    /// Minimal distance to the offending future positions, when flagged.
    pub min_distance: Option<f64>,
    pub human_contact: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed trace line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
    #[error("trace has no header line")]
    MissingHeader,
}

pub fn scenario_hash(cfg: &ScenarioConfig) -> String {
    let json = serde_json::to_string(cfg).expect("scenario serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    format!("{:x}", hasher.finalize())
}

impl EpisodeTrace {
    /// Terminal event of the episode.
    pub fn outcome(&self) -> Event {
        self.steps.last().map_or(Event::Running, |s| s.event)
    }

    /// Wall-clock duration in simulated seconds.
    pub fn sim_seconds(&self) -> f64 {
        self.steps.len() as f64 * self.header.scenario.dt
    }

    /// Total robot path length.
    pub fn path_length(&self) -> f64 {
        let mut prev = self.header.start.robot.position;
        let mut total = 0.0;
        for s in &self.steps {
            total += s.robot_pos.distance(prev);
            prev = s.robot_pos;
        }
        total
    }

    /// Fills the per-step danger flags by checking the robot position against
    /// the ground-truth human positions over the next `window` steps.
    pub fn annotate_danger(&mut self, window: usize) {
        let r_ego = self.header.start.robot.radius;
        let radii: Vec<f64> = self.header.start.humans.iter().map(|h| h.radius).collect();
        for i in 0..self.steps.len() {
            let future: Vec<&[Vec2]> = self.steps[i + 1..]
                .iter()
                .take(window)
                .map(|s| s.human_pos.as_slice())
                .collect();
            let (flag, min_dist) = danger_check(self.steps[i].robot_pos, &future, r_ego, &radii);
            self.steps[i].danger = flag;
            self.steps[i].min_distance = min_dist;
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        let header = serde_json::to_string(&self.header)
            .map_err(|source| TraceError::Malformed { line: 1, source })?;
        writeln!(w, "{header}")?;
        for (i, step) in self.steps.iter().enumerate() {
            let line = serde_json::to_string(step)
                .map_err(|source| TraceError::Malformed { line: i + 2, source })?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<EpisodeTrace, TraceError> {
        let mut lines = r.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => {
                let line = line?;
                serde_json::from_str(&line)
                    .map_err(|source| TraceError::Malformed { line: 1, source })?
            }
            None => return Err(TraceError::MissingHeader),
        };
        let mut steps = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            steps.push(
                serde_json::from_str(&line)
                    .map_err(|source| TraceError::Malformed { line: i + 1, source })?,
            );
        }
        Ok(EpisodeTrace { header, steps })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), TraceError> {
        let file = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }

    pub fn load(path: &std::path::Path) -> Result<EpisodeTrace, TraceError> {
        let file = std::fs::File::open(path)?;
        EpisodeTrace::read_jsonl(std::io::BufReader::new(file))
    }
}
