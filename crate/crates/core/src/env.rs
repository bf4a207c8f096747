//! Episode loop: a problem, a representation and a change budget.
//!
//! An episode starts from a randomly sampled level. Each step applies one
//! action; value-altering edits are re-scored and rewarded, everything else
//! yields zero reward. The episode ends when the goal is met, when the change
//! budget `ceil(change_percentage * width * height)` is spent, or when the step
//! limit is reached, checked in that order. The goal is never granted at reset.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, io_err, Error, Result};
use crate::level::{sample_start_level, Level, OneHot, ProblemKind};
use crate::problems::{ProblemConfig, Stats};
use crate::representations::{LocationMode, RepKind, RepState};
use crate::rng::Rng;

const LEVEL_STREAM: u64 = 0;
const REP_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvConfig {
    pub problem: ProblemConfig,
    pub rep: RepKind,
    pub change_percentage: f64,
    /// `None` picks the representation default.
    pub max_steps: Option<usize>,
    pub seed: u64,
    pub narrow_location_mode: LocationMode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvConfigDoc {
    problem: serde_json::Value,
    rep: RepKind,
    change_percentage: Option<f64>,
    max_steps: Option<usize>,
    seed: Option<u64>,
    narrow_location_mode: Option<LocationMode>,
}

impl EnvConfig {
    pub const TRAINING_CHANGE_PERCENTAGE: f64 = 0.2;

    pub fn new(problem: ProblemConfig, rep: RepKind) -> Self {
        EnvConfig {
            problem,
            rep,
            change_percentage: Self::TRAINING_CHANGE_PERCENTAGE,
            max_steps: None,
            seed: 0,
            narrow_location_mode: LocationMode::Random,
        }
    }

    pub fn for_problem(kind: ProblemKind, rep: RepKind) -> Self {
        Self::new(ProblemConfig::new(kind), rep)
    }

    pub fn with_change_percentage(mut self, pct: f64) -> Self {
        self.change_percentage = pct;
        self
    }

    pub fn with_location_mode(mut self, mode: LocationMode) -> Self {
        self.narrow_location_mode = mode;
        self
    }

    /// `problem` may be a problem name or a problem configuration object.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: EnvConfigDoc = serde_json::from_str(text)?;
        let problem = match doc.problem {
            serde_json::Value::String(name) => ProblemConfig::new(name.parse()?),
            obj @ serde_json::Value::Object(_) => ProblemConfig::from_json(&obj.to_string())?,
            other => return Err(invalid(format!("'problem' must be a name or an object, got {other}"))),
        };
        let mut cfg = EnvConfig::new(problem, doc.rep);
        if let Some(p) = doc.change_percentage {
            cfg.change_percentage = p;
        }
        cfg.max_steps = doc.max_steps;
        cfg.seed = doc.seed.unwrap_or(0);
        if let Some(m) = doc.narrow_location_mode {
            cfg.narrow_location_mode = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if !(0.0..=1.0).contains(&self.change_percentage) {
            return Err(invalid(format!(
                "change_percentage {} outside [0, 1]",
                self.change_percentage
            )));
        }
        if self.max_steps == Some(0) {
            return Err(invalid("max_steps must be at least 1"));
        }
        Ok(())
    }

    pub fn area(&self) -> usize {
        self.problem.width * self.problem.height
    }

    /// Number of value-altering edits allowed per episode.
    pub fn max_changes(&self) -> usize {
        // The epsilon keeps products like 0.3 * 10 = 3.0000000000000004 from rounding up.
        (self.change_percentage * self.area() as f64 - 1e-9).ceil().max(0.0) as usize
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps.unwrap_or(match self.rep {
            RepKind::Narrow | RepKind::Wide => self.area(),
            RepKind::Turtle => 4 * self.area(),
        })
    }

    pub fn num_actions(&self) -> usize {
        crate::representations::action_space_size(
            self.rep,
            self.problem.width,
            self.problem.height,
            self.problem.num_tiles(),
        )
    }

    pub fn observation_shape(&self) -> (usize, usize, usize) {
        crate::representations::observation_shape(
            self.rep,
            self.problem.width,
            self.problem.height,
            self.problem.num_tiles(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    Running,
    Goal,
    Budget,
    StepLimit,
}

#[derive(Clone, Debug)]
pub struct EpisodeState {
    pub start_level: Level,
    pub level: Level,
    pub rep_state: RepState,
    pub initial_stats: Stats,
    pub current_stats: Stats,
    pub changes_made: usize,
    pub steps_taken: usize,
    pub done_reason: DoneReason,
}

impl EpisodeState {
    pub fn done(&self) -> bool {
        self.done_reason != DoneReason::Running
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepInfo {
    pub changes_made: usize,
    pub steps_taken: usize,
    pub stats: Stats,
    pub done_reason: DoneReason,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: OneHot,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One environment instance. Single-threaded; run one per thread for rollouts.
#[derive(Clone, Debug)]
pub struct Env {
    config: EnvConfig,
    episode: EpisodeState,
}

impl Env {
    /// Builds the environment and resets it with `config.seed`.
    pub fn new(config: EnvConfig) -> Result<Self> {
        let seed = config.seed;
        Ok(Self::reset_with(config, seed)?.0)
    }

    /// Fresh environment and its first observation.
    pub fn reset_with(config: EnvConfig, seed: u64) -> Result<(Self, OneHot)> {
        config.validate()?;
        let episode = Self::start(&config, seed)?;
        let env = Env { config, episode };
        let obs = env.observe()?;
        Ok((env, obs))
    }

    pub fn reset(&mut self, seed: u64) -> Result<OneHot> {
        self.episode = Self::start(&self.config, seed)?;
        self.observe()
    }

    fn start(config: &EnvConfig, seed: u64) -> Result<EpisodeState> {
        let master = Rng::new(seed);
        let p = &config.problem;
        let level = sample_start_level(&p.alphabet, p.width, p.height, &mut master.child(LEVEL_STREAM))?;
        let rep_state = RepState::new(
            config.rep,
            p.width,
            p.height,
            p.num_tiles(),
            config.narrow_location_mode,
            master.child(REP_STREAM),
        );
        let stats = p.compute_stats(&level)?;
        Ok(EpisodeState {
            start_level: level.clone(),
            level,
            rep_state,
            initial_stats: stats.clone(),
            current_stats: stats,
            changes_made: 0,
            steps_taken: 0,
            done_reason: DoneReason::Running,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn episode(&self) -> &EpisodeState {
        &self.episode
    }

    pub fn observe(&self) -> Result<OneHot> {
        self.episode.rep_state.observe(&self.episode.level)
    }

    pub fn potential(&self) -> f64 {
        self.config.problem.potential(&self.episode.current_stats)
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        let ep = &mut self.episode;
        if ep.done() {
            return Err(Error::EpisodeFinished);
        }
        let problem = &self.config.problem;
        let max_changes = self.config.max_changes();

        // Only reachable with a zero budget: the write is dropped.
        let spent = ep.changes_made >= max_changes;
        let prev = spent.then(|| ep.level.clone());
        let mut edit = ep.rep_state.apply_action(&mut ep.level, action)?;
        if let Some(prev) = prev.filter(|_| edit.changed) {
            ep.level = prev;
            edit.changed = false;
        }

        let mut reward = 0.0;
        if edit.changed {
            let stats = problem.compute_stats(&ep.level)?;
            reward = problem.reward(&ep.current_stats, &stats);
            ep.current_stats = stats;
            ep.changes_made += 1;
        }
        ep.steps_taken += 1;

        ep.done_reason = if problem.is_goal(&ep.current_stats, &ep.initial_stats) {
            DoneReason::Goal
        } else if ep.changes_made >= max_changes {
            DoneReason::Budget
        } else if ep.steps_taken >= self.config.max_steps() {
            DoneReason::StepLimit
        } else {
            DoneReason::Running
        };

        Ok(StepResult {
            observation: ep.rep_state.observe(&ep.level)?,
            reward,
            done: ep.done(),
            info: StepInfo {
                changes_made: ep.changes_made,
                steps_taken: ep.steps_taken,
                stats: ep.current_stats.clone(),
                done_reason: ep.done_reason,
            },
        })
    }
}
