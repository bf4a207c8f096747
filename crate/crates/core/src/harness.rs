//! Batch evaluation across change budgets, level dumps and diversity.
//!
//! Episode `i` of an evaluation is reset with `derive_seed(seed, i)` for every
//! budget and every policy, so all rows compare policies on the same start
//! layouts and a deterministic policy replays the same trajectory prefix as
//! the budget grows.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Policy;
use crate::env::{DoneReason, Env, EnvConfig, EpisodeState};
use crate::error::{invalid, io_err, Result};
use crate::level::{serialize_level, Level, OneHot, ProblemKind, TileId};
use crate::problems::Stats;
use crate::representations::{encode_wide, RepKind};
use crate::rng::{derive_seed, Rng};

const POLICY_STREAM: u64 = 0xACE;

/// `0:1:0.1`-style grid, inclusive of the end point.
pub fn parse_pct_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| invalid(format!("bad number '{s}' in grid '{text}'")));
    let grid: Vec<f64> = match parts.as_slice() {
        [list] => list.split(',').map(num).collect::<Result<_>>()?,
        [start, end, step] => {
            let (a, b, s) = (num(start)?, num(end)?, num(step)?);
            if s.is_nan() || s <= 0.0 || b < a {
                return Err(invalid(format!("grid '{text}' needs start <= end and a positive step")));
            }
            let n = ((b - a) / s + 1e-9).floor() as usize;
            // Round to suppress accumulated float noise like 0.30000000000000004.
            (0..=n).map(|i| ((a + i as f64 * s) * 1e9).round() / 1e9).collect()
        }
        _ => return Err(invalid(format!("grid '{text}' must be start:end:step or a comma list"))),
    };
    if grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid(format!("grid '{text}' leaves [0, 1]")));
    }
    Ok(grid)
}

pub fn default_pct_grid() -> Vec<f64> {
    parse_pct_grid("0:1:0.1").expect("valid grid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub policy: String,
    pub pct: f64,
    pub index: usize,
    pub start_hash: u64,
    pub success: bool,
    pub start_solved: bool,
    pub changes_made: usize,
    pub changed_fraction: f64,
    pub steps: usize,
    pub done_reason: DoneReason,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub policy: String,
    pub pct: f64,
    pub n: usize,
    pub success_rate: f64,
    pub mean_changed: f64,
    pub std_changed: f64,
    pub start_solved: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub episodes: Vec<EpisodeRecord>,
}

impl EvalReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| crate::error::Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn rows_for<'a>(&'a self, policy: &'a str) -> impl Iterator<Item = &'a EvalRow> + 'a {
        self.rows.iter().filter(move |r| r.policy == policy)
    }
}

fn level_hash(level: &Level) -> u64 {
    let mut h = DefaultHasher::new();
    level.hash(&mut h);
    h.finish()
}

/// Final state of one episode run to completion.
pub struct Rollout {
    pub env: Env,
    pub success: bool,
}

/// Runs one episode from `seed` until it ends.
pub fn run_episode(policy: &dyn Policy, config: EnvConfig, seed: u64) -> Result<Rollout> {
    let (mut env, mut obs) = Env::reset_with(config, seed)?;
    let mut rng = Rng::new(derive_seed(seed, POLICY_STREAM));
    loop {
        let action = policy.act(&obs, env.episode(), &mut rng)?;
        let r = env.step(action)?;
        if r.done {
            let success = r.info.done_reason == DoneReason::Goal;
            return Ok(Rollout { env, success });
        }
        obs = r.observation;
    }
}

fn check_policy_shape(policy: &dyn Policy, config: &EnvConfig) -> Result<()> {
    // Probe once so shape mismatches surface before the sweep.
    let (env, obs) = Env::reset_with(config.clone(), 0)?;
    let a = policy.act(&obs, env.episode(), &mut Rng::new(0))?;
    if a >= config.num_actions() {
        return Err(invalid(format!(
            "policy '{}' chose action {a} outside the {}-action space",
            policy.name(),
            config.num_actions()
        )));
    }
    Ok(())
}

/// Success and change statistics for every `(policy, pct)` pair on
/// `n_levels` shared start layouts.
pub fn evaluate(
    policies: &[&dyn Policy],
    env_config: &EnvConfig,
    pct_grid: &[f64],
    n_levels: usize,
    seed: u64,
) -> Result<EvalReport> {
    if n_levels == 0 {
        return Err(invalid("n_levels must be at least 1"));
    }
    if pct_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("change percentages must lie in [0, 1]"));
    }
    env_config.validate()?;
    for p in policies {
        check_policy_shape(*p, env_config)?;
    }

    let jobs: Vec<(usize, usize, usize)> = (0..policies.len())
        .flat_map(|p| (0..pct_grid.len()).flat_map(move |g| (0..n_levels).map(move |i| (p, g, i))))
        .collect();
    let episodes = jobs
        .par_iter()
        .map(|&(p, g, i)| {
            let policy = policies[p];
            let pct = pct_grid[g];
            let cfg = env_config.clone().with_change_percentage(pct);
            let area = cfg.area() as f64;
            let rollout = run_episode(policy, cfg, derive_seed(seed, i as u64))?;
            let ep = rollout.env.episode();
            let problem = &rollout.env.config().problem;
            Ok(EpisodeRecord {
                policy: policy.name(),
                pct,
                index: i,
                start_hash: level_hash(&ep.start_level),
                success: rollout.success,
                start_solved: problem.is_goal(&ep.initial_stats, &ep.initial_stats),
                changes_made: ep.changes_made,
                changed_fraction: ep.changes_made as f64 / area,
                steps: ep.steps_taken,
                done_reason: ep.done_reason,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = episodes
        .chunks(n_levels)
        .map(|chunk| {
            let n = chunk.len() as f64;
            let mean = chunk.iter().map(|e| e.changed_fraction).sum::<f64>() / n;
            let var = chunk.iter().map(|e| (e.changed_fraction - mean).powi(2)).sum::<f64>() / n;
            EvalRow {
                policy: chunk[0].policy.clone(),
                pct: chunk[0].pct,
                n: chunk.len(),
                success_rate: chunk.iter().filter(|e| e.success).count() as f64 / n,
                mean_changed: mean,
                std_changed: var.sqrt(),
                start_solved: chunk.iter().filter(|e| e.start_solved).count(),
            }
        })
        .collect();
    Ok(EvalReport { rows, episodes })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedLevel {
    pub index: usize,
    pub start_file: String,
    pub final_file: String,
    pub success: bool,
    pub changed_fraction: f64,
    pub changes_made: usize,
    pub hamming_fraction: f64,
    pub done_reason: DoneReason,
    pub final_stats: Stats,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub problem: Option<ProblemKind>,
    pub rep: Option<RepKind>,
    pub pct: f64,
    pub levels: Vec<GeneratedLevel>,
}

/// Runs `n` episodes and writes `start_<i>.json`, `final_<i>.json` and
/// `summary.json` into `out_dir`. Writes nothing when `n` is 0.
pub fn generate(
    policy: &dyn Policy,
    env_config: &EnvConfig,
    pct: f64,
    n: usize,
    out_dir: &Path,
    seed: u64,
) -> Result<GenerateSummary> {
    let cfg = env_config.clone().with_change_percentage(pct);
    cfg.validate()?;
    let mut summary = GenerateSummary {
        pct,
        ..Default::default()
    };
    if n == 0 {
        return Ok(summary);
    }
    summary.problem = Some(cfg.problem.kind);
    summary.rep = Some(cfg.rep);
    check_policy_shape(policy, &cfg)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let rollouts = (0..n)
        .into_par_iter()
        .map(|i| run_episode(policy, cfg.clone(), derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let kind = cfg.problem.kind;
    let area = cfg.area() as f64;
    for (i, r) in rollouts.iter().enumerate() {
        let ep = r.env.episode();
        let start_file = format!("start_{i}.json");
        let final_file = format!("final_{i}.json");
        for (name, level) in [(&start_file, &ep.start_level), (&final_file, &ep.level)] {
            let path = out_dir.join(name);
            std::fs::write(&path, serialize_level(level, kind)).map_err(io_err(&path))?;
        }
        summary.levels.push(GeneratedLevel {
            index: i,
            start_file,
            final_file,
            success: r.success,
            changed_fraction: ep.changes_made as f64 / area,
            changes_made: ep.changes_made,
            hamming_fraction: ep.level.hamming(&ep.start_level) as f64 / area,
            done_reason: ep.done_reason,
            final_stats: ep.current_stats.clone(),
        });
    }
    let path = out_dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(io_err(&path))?;
    Ok(summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diversity {
    pub mean_hamming: f64,
    pub duplicates: usize,
}

/// Mean pairwise fraction of differing cells and the number of identical pairs.
pub fn diversity(levels: &[Level]) -> Result<Diversity> {
    if let Some(first) = levels.first() {
        if levels.iter().any(|l| l.width() != first.width() || l.height() != first.height()) {
            return Err(invalid("levels differ in size"));
        }
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    let mut duplicates = 0;
    for (i, a) in levels.iter().enumerate() {
        for b in &levels[i + 1..] {
            let d = a.hamming(b);
            total += d as f64 / a.area() as f64;
            pairs += 1;
            if d == 0 {
                duplicates += 1;
            }
        }
    }
    Ok(Diversity {
        mean_hamming: if pairs == 0 { 0.0 } else { total / pairs as f64 },
        duplicates,
    })
}

/// Binary-problem maze: open even rows joined by one gap per odd row,
/// alternating between the right and left edge.
pub fn serpentine(width: usize, height: usize) -> Result<Level> {
    let mut level = Level::new(width, height, TileId::EMPTY)?;
    for y in (1..height).step_by(2) {
        let gap = if y + 1 == height {
            None
        } else if (y / 2) % 2 == 0 {
            Some(width - 1)
        } else {
            Some(0)
        };
        for x in 0..width {
            if Some(x) != gap {
                level.set(x, y, TileId::SOLID);
            }
        }
    }
    Ok(level)
}

/// Scripted Binary designer that rewrites the level into [`serpentine`].
pub struct SerpentineBuilder {
    target: Level,
    rep: RepKind,
}

impl SerpentineBuilder {
    pub fn new(config: &EnvConfig) -> Result<Self> {
        if config.problem.kind != ProblemKind::Binary {
            return Err(invalid("the serpentine builder only designs binary levels"));
        }
        Ok(SerpentineBuilder {
            target: serpentine(config.problem.width, config.problem.height)?,
            rep: config.rep,
        })
    }
}

impl Policy for SerpentineBuilder {
    fn name(&self) -> String {
        "serpentine".into()
    }

    fn act(&self, _obs: &OneHot, episode: &EpisodeState, _rng: &mut Rng) -> Result<usize> {
        let level = &episode.level;
        let w = level.width();
        let wrong = |i: usize| level.cells()[i] != self.target.cells()[i];
        Ok(match self.rep {
            RepKind::Narrow => {
                let (x, y) = episode.rep_state.loc;
                let i = level.index(x, y);
                if wrong(i) {
                    self.target.cells()[i].index() + 1
                } else {
                    0
                }
            }
            RepKind::Wide => match (0..level.area()).find(|&i| wrong(i)) {
                Some(i) => encode_wide(i % w, i / w, self.target.cells()[i], w, 2),
                None => encode_wide(0, 0, level.get(0, 0), w, 2),
            },
            RepKind::Turtle => {
                let (x, y) = episode.rep_state.loc;
                let here = level.index(x, y);
                if wrong(here) {
                    return Ok(4 + self.target.cells()[here].index());
                }
                let nearest = (0..level.area())
                    .filter(|&i| wrong(i))
                    .min_by_key(|&i| (i % w).abs_diff(x) + (i / w).abs_diff(y));
                match nearest {
                    None => 0,
                    Some(i) => {
                        let (tx, ty) = (i % w, i / w);
                        if ty < y {
                            0
                        } else if ty > y {
                            1
                        } else if tx < x {
                            2
                        } else {
                            3
                        }
                    }
                }
            }
        })
    }
}
