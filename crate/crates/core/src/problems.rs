//! Per-problem level statistics, reward and goal tests.
//!
//! Every statistic carries a target range. A level's distance to a range is
//! how far the measured value sits outside it, and the step reward is the
//! weighted decrease of those distances. Episode return therefore telescopes
//! to `potential(start) - potential(end)`.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    count_regions, longest_shortest_path, nearest_enemy_distance, solve_sokoban, zelda_solution_length, TileSet,
    DEFAULT_NODE_LIMIT,
};
use crate::error::{invalid, io_err, Result};
use crate::level::{sokoban, zelda, Level, ProblemKind, TileAlphabet, TileId};

/// Value recorded for a statistic that could not be measured.
pub const SENTINEL: i64 = -1;

pub mod stat {
    pub const REGIONS: &str = "regions";
    pub const PATH_LENGTH: &str = "path_length";
    pub const PLAYERS: &str = "players";
    pub const KEYS: &str = "keys";
    pub const DOORS: &str = "doors";
    pub const ENEMIES: &str = "enemies";
    pub const NEAREST_ENEMY: &str = "nearest_enemy";
    pub const CRATES: &str = "crates";
    pub const TARGETS: &str = "targets";
    pub const CRATE_TARGET_DIFF: &str = "crate_target_diff";
    pub const SOLUTION_LENGTH: &str = "solution_length";
}

thread_local! {
    static SOLVER_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Sokoban solver invocations made by [`ProblemConfig::compute_stats`] on this thread.
pub fn solver_calls() -> u64 {
    SOLVER_CALLS.with(Cell::get)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatTarget {
    pub name: String,
    pub lo: f64,
    /// `None` is an open upper end.
    pub hi: Option<f64>,
    pub weight: f64,
    /// Distance charged when the statistic holds [`SENTINEL`].
    #[serde(default)]
    pub sentinel_distance: f64,
}

impl StatTarget {
    pub fn new(name: &str, lo: f64, hi: Option<f64>, weight: f64) -> Self {
        StatTarget {
            name: name.to_string(),
            lo,
            hi,
            weight,
            sentinel_distance: 0.0,
        }
    }

    pub fn with_sentinel(mut self, distance: f64) -> Self {
        self.sentinel_distance = distance;
        self
    }

    pub fn distance(&self, value: i64) -> f64 {
        if value == SENTINEL {
            return self.sentinel_distance;
        }
        let v = value as f64;
        let above = self.hi.map_or(0.0, |hi| v - hi);
        0f64.max(self.lo - v).max(above)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.weight.is_finite() && self.sentinel_distance.is_finite()) {
            return Err(invalid(format!("target '{}' has non-finite fields", self.name)));
        }
        if self.hi.is_some_and(|hi| hi < self.lo) || self.weight < 0.0 {
            return Err(invalid(format!("target '{}' needs lo <= hi and weight >= 0", self.name)));
        }
        Ok(())
    }
}

/// Measured statistics keyed by name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Stats(pub BTreeMap<String, i64>);

impl Stats {
    pub fn get(&self, name: &str) -> i64 {
        self.0.get(name).copied().unwrap_or(SENTINEL)
    }

    fn set(&mut self, name: &str, value: i64) {
        self.0.insert(name.to_string(), value);
    }

    fn set_opt(&mut self, name: &str, value: Option<usize>) {
        self.set(name, value.map_or(SENTINEL, |v| v as i64));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalThresholds {
    /// Binary: required growth of the longest path over the episode start, in tiles.
    pub path_gain: i64,
    /// Zelda: minimum player-key-door moves.
    pub min_path: i64,
    /// Zelda: minimum moves from player to the nearest enemy.
    pub min_enemy_distance: i64,
    /// Sokoban: minimum solution moves.
    pub min_solution: i64,
}

impl Default for GoalThresholds {
    fn default() -> Self {
        GoalThresholds {
            path_gain: 20,
            min_path: 16,
            min_enemy_distance: 4,
            min_solution: 18,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub alphabet: TileAlphabet,
    pub width: usize,
    pub height: usize,
    pub targets: Vec<StatTarget>,
    pub goal: GoalThresholds,
    pub node_limit: usize,
}

/// Partial configuration document; absent fields take the problem defaults.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemConfigDoc {
    kind: ProblemKind,
    width: Option<usize>,
    height: Option<usize>,
    start_probs: Option<Vec<f64>>,
    targets: Option<Vec<StatTarget>>,
    goal: Option<GoalThresholds>,
    node_limit: Option<usize>,
}

impl ProblemConfig {
    pub fn default_size(kind: ProblemKind) -> (usize, usize) {
        match kind {
            ProblemKind::Binary => (14, 14),
            ProblemKind::Zelda => (11, 7),
            ProblemKind::Sokoban => (5, 5),
        }
    }

    pub fn new(kind: ProblemKind) -> Self {
        let (w, h) = Self::default_size(kind);
        Self::with_size(kind, w, h)
    }

    pub fn with_size(kind: ProblemKind, width: usize, height: usize) -> Self {
        ProblemConfig {
            kind,
            alphabet: kind.alphabet(),
            width,
            height,
            targets: default_targets(kind, width, height),
            goal: GoalThresholds::default(),
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProblemConfigDoc = serde_json::from_str(text)?;
        let (dw, dh) = Self::default_size(doc.kind);
        let mut cfg = Self::with_size(doc.kind, doc.width.unwrap_or(dw), doc.height.unwrap_or(dh));
        if let Some(p) = doc.start_probs {
            cfg.alphabet = cfg.alphabet.with_start_probs(p)?;
        }
        if let Some(t) = doc.targets {
            cfg.targets = t;
        }
        if let Some(g) = doc.goal {
            cfg.goal = g;
        }
        if let Some(n) = doc.node_limit {
            cfg.node_limit = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn validate(&self) -> Result<()> {
        self.alphabet.validate()?;
        if self.alphabet.problem != self.kind {
            return Err(invalid("alphabet belongs to a different problem"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(invalid("problem dimensions must be positive"));
        }
        let g = &self.goal;
        if g.path_gain <= 0 || g.min_path <= 0 || g.min_enemy_distance <= 0 || g.min_solution <= 0 || self.node_limit == 0
        {
            return Err(invalid("goal thresholds and node limit must be positive"));
        }
        self.targets.iter().try_for_each(StatTarget::validate)
    }

    pub fn num_tiles(&self) -> usize {
        self.alphabet.len()
    }

    /// Tiles counted as open space for region and path statistics.
    pub fn passable(&self) -> TileSet {
        match self.kind {
            ProblemKind::Binary => TileSet::of(&[TileId::EMPTY]),
            ProblemKind::Zelda | ProblemKind::Sokoban => TileSet::non_solid(),
        }
    }

    pub fn compute_stats(&self, level: &Level) -> Result<Stats> {
        if level.width() != self.width || level.height() != self.height {
            return Err(invalid(format!(
                "level is {}x{}, problem expects {}x{}",
                level.width(),
                level.height(),
                self.width,
                self.height
            )));
        }
        level
            .check_tiles(self.num_tiles())
            .map_err(|e| invalid(format!("level does not match the {} alphabet: {e}", self.kind)))?;

        let mut s = Stats::default();
        let regions = count_regions(level, self.passable());
        s.set(stat::REGIONS, regions.region_count as i64);
        match self.kind {
            ProblemKind::Binary => {
                s.set(stat::PATH_LENGTH, longest_shortest_path(level, self.passable()) as i64);
            }
            ProblemKind::Zelda => {
                let players = level.count(zelda::PLAYER);
                let keys = level.count(zelda::KEY);
                let doors = level.count(zelda::DOOR);
                s.set(stat::PLAYERS, players as i64);
                s.set(stat::KEYS, keys as i64);
                s.set(stat::DOORS, doors as i64);
                s.set(stat::ENEMIES, level.count(zelda::ENEMY) as i64);
                let nearest = if players == 1 { nearest_enemy_distance(level)? } else { None };
                s.set_opt(stat::NEAREST_ENEMY, nearest);
                let path = if players == 1 && keys == 1 && doors == 1 {
                    zelda_solution_length(level)?
                } else {
                    None
                };
                s.set_opt(stat::PATH_LENGTH, path);
            }
            ProblemKind::Sokoban => {
                let players = level.count(sokoban::PLAYER);
                let crates = level.count(sokoban::CRATE);
                let targets = level.count(sokoban::TARGET);
                s.set(stat::PLAYERS, players as i64);
                s.set(stat::CRATES, crates as i64);
                s.set(stat::TARGETS, targets as i64);
                s.set(stat::CRATE_TARGET_DIFF, crates.abs_diff(targets) as i64);
                let solvable_shape = players == 1 && crates == targets && crates >= 1 && {
                    let labels = &regions.label_grid;
                    let mut items = [sokoban::PLAYER, sokoban::CRATE, sokoban::TARGET]
                        .into_iter()
                        .flat_map(|t| level.positions(t))
                        .map(|(x, y)| labels[level.index(x, y)]);
                    let first = items.next();
                    items.all(|l| Some(l) == first)
                };
                let solution = if solvable_shape {
                    SOLVER_CALLS.with(|c| c.set(c.get() + 1));
                    solve_sokoban(level, self.node_limit)?.map(|s| s.length)
                } else {
                    None
                };
                s.set_opt(stat::SOLUTION_LENGTH, solution);
            }
        }
        Ok(s)
    }

    /// Weighted distance of `stats` from every target range.
    pub fn potential(&self, stats: &Stats) -> f64 {
        self.targets.iter().map(|t| t.weight * t.distance(stats.get(&t.name))).sum()
    }

    pub fn reward(&self, old: &Stats, new: &Stats) -> f64 {
        self.targets
            .iter()
            .map(|t| t.weight * (t.distance(old.get(&t.name)) - t.distance(new.get(&t.name))))
            .sum()
    }

    pub fn is_goal(&self, stats: &Stats, initial: &Stats) -> bool {
        let g = &self.goal;
        let get = |name| stats.get(name);
        match self.kind {
            ProblemKind::Binary => {
                get(stat::REGIONS) == 1 && get(stat::PATH_LENGTH) >= initial.get(stat::PATH_LENGTH) + g.path_gain
            }
            ProblemKind::Zelda => {
                let nearest = get(stat::NEAREST_ENEMY);
                get(stat::PLAYERS) == 1
                    && get(stat::KEYS) == 1
                    && get(stat::DOORS) == 1
                    && get(stat::PATH_LENGTH) >= g.min_path
                    && (get(stat::ENEMIES) == 0 || nearest == SENTINEL || nearest >= g.min_enemy_distance)
            }
            ProblemKind::Sokoban => {
                get(stat::PLAYERS) == 1
                    && get(stat::CRATES) >= 1
                    && get(stat::CRATES) == get(stat::TARGETS)
                    && get(stat::SOLUTION_LENGTH) >= g.min_solution
            }
        }
    }
}

fn default_targets(kind: ProblemKind, width: usize, height: usize) -> Vec<StatTarget> {
    let area = (width * height) as f64;
    let g = GoalThresholds::default();
    let count = |name| StatTarget::new(name, 1.0, Some(1.0), 3.0);
    let regions = StatTarget::new(stat::REGIONS, 1.0, Some(1.0), 5.0);
    match kind {
        // Longest path has no natural ceiling: aim at the area so every gain pays.
        ProblemKind::Binary => vec![regions, StatTarget::new(stat::PATH_LENGTH, area, None, 1.0)],
        ProblemKind::Zelda => vec![
            count(stat::PLAYERS),
            count(stat::KEYS),
            count(stat::DOORS),
            regions,
            StatTarget::new(stat::NEAREST_ENEMY, g.min_enemy_distance as f64, None, 1.0),
            StatTarget::new(stat::PATH_LENGTH, g.min_path as f64, None, 1.0).with_sentinel(area),
        ],
        ProblemKind::Sokoban => vec![
            count(stat::PLAYERS),
            StatTarget::new(stat::CRATES, 1.0, None, 3.0),
            StatTarget::new(stat::TARGETS, 1.0, None, 3.0),
            StatTarget::new(stat::CRATE_TARGET_DIFF, 0.0, Some(0.0), 3.0),
            regions,
            StatTarget::new(stat::SOLUTION_LENGTH, g.min_solution as f64, None, 1.0).with_sentinel(area),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::sample_start_level;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn stats(pairs: &[(&str, i64)]) -> Stats {
        Stats(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    #[test]
    fn binary_all_empty_stats() {
        let p = ProblemConfig::new(ProblemKind::Binary);
        let s = p.compute_stats(&Level::new(14, 14, TileId::EMPTY).unwrap()).unwrap();
        assert_eq!(s.get(stat::REGIONS), 1);
        assert_eq!(s.get(stat::PATH_LENGTH), 27);
    }

    #[test]
    fn zelda_without_player_short_circuits() {
        let p = ProblemConfig::new(ProblemKind::Zelda);
        let mut l = Level::new(11, 7, TileId::EMPTY).unwrap();
        l.set(0, 0, zelda::KEY);
        l.set(5, 5, zelda::DOOR);
        let s = p.compute_stats(&l).unwrap();
        assert_eq!(s.get(stat::PLAYERS), 0);
        assert_eq!(s.get(stat::PATH_LENGTH), SENTINEL);
        assert_eq!(s.get(stat::NEAREST_ENEMY), SENTINEL);
    }

    #[test]
    fn sokoban_single_push_solution() {
        let p = ProblemConfig::with_size(ProblemKind::Sokoban, 4, 1);
        let l = Level::from_rows(&p.alphabet, &["@$*#"]).unwrap();
        let s = p.compute_stats(&l).unwrap();
        assert_eq!(s.get(stat::SOLUTION_LENGTH), 1);
    }

    #[test]
    fn sokoban_split_regions_skip_solver() {
        let p = ProblemConfig::with_size(ProblemKind::Sokoban, 4, 1);
        let l = Level::from_rows(&p.alphabet, &["@$#*"]).unwrap();
        let before = solver_calls();
        let s = p.compute_stats(&l).unwrap();
        assert_eq!(solver_calls(), before);
        assert_eq!(s.get(stat::SOLUTION_LENGTH), SENTINEL);
    }

    #[test]
    fn mismatched_level_rejected() {
        let p = ProblemConfig::new(ProblemKind::Binary);
        assert!(p.compute_stats(&Level::new(3, 3, TileId::EMPTY).unwrap()).is_err());
        let z = Level::new(14, 14, zelda::ENEMY).unwrap();
        assert!(p.compute_stats(&z).is_err());
    }

    #[test]
    fn reward_examples() {
        let binary = ProblemConfig::new(ProblemKind::Binary);
        let a = stats(&[(stat::REGIONS, 3), (stat::PATH_LENGTH, 10)]);
        let b = stats(&[(stat::REGIONS, 1), (stat::PATH_LENGTH, 10)]);
        assert_eq!(binary.reward(&a, &a), 0.0);
        assert_eq!(binary.reward(&a, &b), 10.0);

        let zelda = ProblemConfig::new(ProblemKind::Zelda);
        let mut old = zelda.compute_stats(&Level::new(11, 7, TileId::EMPTY).unwrap()).unwrap();
        let mut new = old.clone();
        old.set(stat::PLAYERS, 0);
        new.set(stat::PLAYERS, 2);
        assert_eq!(zelda.reward(&old, &new), 0.0);
    }

    #[test]
    fn sentinel_distance_applies() {
        let t = StatTarget::new("x", 16.0, None, 1.0).with_sentinel(77.0);
        assert_eq!(t.distance(SENTINEL), 77.0);
        assert_eq!(t.distance(10), 6.0);
        assert_eq!(t.distance(40), 0.0);
        let two_sided = StatTarget::new("y", 1.0, Some(1.0), 3.0);
        assert_eq!(two_sided.distance(0), two_sided.distance(2));
    }

    #[test]
    fn goal_examples() {
        let binary = ProblemConfig::new(ProblemKind::Binary);
        let init = stats(&[(stat::REGIONS, 4), (stat::PATH_LENGTH, 12)]);
        assert!(binary.is_goal(&stats(&[(stat::REGIONS, 1), (stat::PATH_LENGTH, 32)]), &init));
        assert!(!binary.is_goal(&stats(&[(stat::REGIONS, 1), (stat::PATH_LENGTH, 31)]), &init));
        assert!(!binary.is_goal(&stats(&[(stat::REGIONS, 2), (stat::PATH_LENGTH, 40)]), &init));

        let zelda = ProblemConfig::new(ProblemKind::Zelda);
        let z = |path, enemies, nearest| {
            stats(&[
                (stat::PLAYERS, 1),
                (stat::KEYS, 1),
                (stat::DOORS, 1),
                (stat::PATH_LENGTH, path),
                (stat::ENEMIES, enemies),
                (stat::NEAREST_ENEMY, nearest),
            ])
        };
        let none = Stats::default();
        assert!(!zelda.is_goal(&z(15, 0, SENTINEL), &none));
        assert!(zelda.is_goal(&z(16, 0, SENTINEL), &none));
        assert!(!zelda.is_goal(&z(16, 1, 3), &none));
        assert!(zelda.is_goal(&z(16, 1, 4), &none));

        let soko = ProblemConfig::new(ProblemKind::Sokoban);
        let s = |sol| {
            stats(&[
                (stat::PLAYERS, 1),
                (stat::CRATES, 2),
                (stat::TARGETS, 2),
                (stat::SOLUTION_LENGTH, sol),
            ])
        };
        assert!(!soko.is_goal(&s(SENTINEL), &none));
        assert!(!soko.is_goal(&s(17), &none));
        assert!(soko.is_goal(&s(18), &none));
    }

    #[test]
    fn config_document_overrides_defaults() {
        let cfg = ProblemConfig::from_json(r#"{"kind":"binary","width":8,"height":8,"goal":{"path_gain":10,"min_path":16,"min_enemy_distance":4,"min_solution":18}}"#).unwrap();
        assert_eq!((cfg.width, cfg.height), (8, 8));
        assert_eq!(cfg.goal.path_gain, 10);
        assert_eq!(cfg.targets[1].lo, 64.0);
        assert!(ProblemConfig::from_json(r#"{"kind":"binary","width":0}"#).is_err());
        assert!(ProblemConfig::from_json(r#"{"kind":"binary","bogus":1}"#).is_err());
        let round = serde_json::to_string(&ProblemConfig::new(ProblemKind::Zelda)).unwrap();
        let back: ProblemConfig = serde_json::from_str(&round).unwrap();
        assert_eq!(back, ProblemConfig::new(ProblemKind::Zelda));
    }

    fn arb_stats_pair(kind: ProblemKind) -> impl Strategy<Value = (Stats, Stats)> {
        let names: Vec<String> = ProblemConfig::new(kind).targets.iter().map(|t| t.name.clone()).collect();
        let n = names.len();
        (
            proptest::collection::vec(-1i64..60, n),
            proptest::collection::vec(-1i64..60, n),
        )
            .prop_map(move |(a, b)| {
                let mk = |v: Vec<i64>| Stats(names.iter().cloned().zip(v).collect());
                (mk(a), mk(b))
            })
    }

    proptest! {
        #[test]
        fn reward_is_antisymmetric((a, b) in arb_stats_pair(ProblemKind::Zelda)) {
            let p = ProblemConfig::new(ProblemKind::Zelda);
            prop_assert_eq!(p.reward(&a, &b), -p.reward(&b, &a));
            prop_assert_eq!(p.reward(&a, &a), 0.0);
        }

        #[test]
        fn reward_matches_potential_difference((a, b) in arb_stats_pair(ProblemKind::Sokoban)) {
            let p = ProblemConfig::new(ProblemKind::Sokoban);
            let direct = p.potential(&a) - p.potential(&b);
            prop_assert!((p.reward(&a, &b) - direct).abs() < 1e-9);
        }

        #[test]
        fn binary_goal_implies_region_target_met(seed in any::<u64>()) {
            let p = ProblemConfig::with_size(ProblemKind::Binary, 6, 6);
            let l = sample_start_level(&p.alphabet, 6, 6, &mut Rng::new(seed)).unwrap();
            let s = p.compute_stats(&l).unwrap();
            let zero = Stats(s.0.keys().map(|k| (k.clone(), 0)).collect());
            if p.is_goal(&s, &zero) {
                prop_assert_eq!(p.targets[0].distance(s.get(stat::REGIONS)), 0.0);
            }
        }
    }
}
