//! Node-capped Sokoban solver.
//!
//! Breadth-first search runs first and yields a move-optimal solution when it
//! finishes inside its node budget. If the budget runs out, A* with the
//! nearest-target Manhattan heuristic gets a fresh budget of the same size.
//! Children whose pushed crate lands in a non-target corner are pruned.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::level::{sokoban, Level, TileId};

pub const DEFAULT_NODE_LIMIT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn delta(self) -> (i64, i64) {
        match self {
            Move::Up => (0, -1),
            Move::Down => (0, 1),
            Move::Left => (-1, 0),
            Move::Right => (1, 0),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Move::Up => 'U',
            Move::Down => 'D',
            Move::Left => 'L',
            Move::Right => 'R',
        }
    }
}

pub fn moves_to_string(moves: &[Move]) -> String {
    moves.iter().map(|m| m.letter()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchPhase {
    Bfs,
    AStar,
}

impl fmt::Display for SearchPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchPhase::Bfs => "bfs",
            SearchPhase::AStar => "astar",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SokobanSolution {
    pub moves: Vec<Move>,
    pub length: usize,
    /// Expansions across both phases.
    pub nodes_expanded: usize,
    pub phase: SearchPhase,
}

/// Result of a capped search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Solved(SokobanSolution),
    /// The reachable state space holds no goal.
    Unsolvable { nodes_expanded: usize },
    /// Both phases ran out of budget.
    Exhausted { nodes_expanded: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct State {
    player: u16,
    crates: Box<[u16]>,
}

/// Static board plus initial dynamic state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SokobanPuzzle {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    is_target: Vec<bool>,
    targets: Vec<usize>,
    player: usize,
    crates: Vec<usize>,
}

impl SokobanPuzzle {
    /// Board from explicit parts; cell indices are row-major.
    pub fn new(
        width: usize,
        height: usize,
        walls: Vec<bool>,
        player: usize,
        mut crates: Vec<usize>,
        mut targets: Vec<usize>,
    ) -> Result<Self> {
        let n = width * height;
        if n == 0 || walls.len() != n || n > u16::MAX as usize {
            return Err(invalid("sokoban board has inconsistent dimensions"));
        }
        crates.sort_unstable();
        targets.sort_unstable();
        let dup = |v: &[usize]| v.windows(2).any(|w| w[0] == w[1]);
        if crates.is_empty() || crates.len() != targets.len() || dup(&crates) || dup(&targets) {
            return Err(invalid(format!(
                "need equal, non-zero numbers of distinct crates and targets (got {} and {})",
                crates.len(),
                targets.len()
            )));
        }
        let cells = crates.iter().chain(&targets).chain(std::iter::once(&player));
        if cells.clone().any(|&c| c >= n) || cells.clone().any(|&c| walls[c]) {
            return Err(invalid("player, crates and targets must sit on open cells"));
        }
        if crates.contains(&player) {
            return Err(invalid("player overlaps a crate"));
        }
        let mut is_target = vec![false; n];
        for &t in &targets {
            is_target[t] = true;
        }
        Ok(SokobanPuzzle {
            width,
            height,
            walls,
            is_target,
            targets,
            player,
            crates,
        })
    }

    /// Requires exactly one player and as many crates as targets (at least one).
    pub fn from_level(level: &Level) -> Result<Self> {
        let players: Vec<usize> = indices(level, sokoban::PLAYER);
        if players.len() != 1 {
            return Err(invalid(format!("expected exactly one player, found {}", players.len())));
        }
        let walls = level.cells().iter().map(|&t| t == TileId::SOLID).collect();
        SokobanPuzzle::new(
            level.width(),
            level.height(),
            walls,
            players[0],
            indices(level, sokoban::CRATE),
            indices(level, sokoban::TARGET),
        )
    }

    fn start(&self) -> State {
        State {
            player: self.player as u16,
            crates: self.crates.iter().map(|&c| c as u16).collect(),
        }
    }

    fn step_from(&self, idx: usize, mv: Move) -> Option<usize> {
        let (dx, dy) = mv.delta();
        let x = (idx % self.width) as i64 + dx;
        let y = (idx / self.width) as i64 + dy;
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        let n = y as usize * self.width + x as usize;
        (!self.walls[n]).then_some(n)
    }

    fn is_wall(&self, idx: usize, mv: Move) -> bool {
        self.step_from(idx, mv).is_none()
    }

    fn dead_corner(&self, idx: usize) -> bool {
        !self.is_target[idx]
            && (self.is_wall(idx, Move::Up) || self.is_wall(idx, Move::Down))
            && (self.is_wall(idx, Move::Left) || self.is_wall(idx, Move::Right))
    }

    fn is_goal(&self, s: &State) -> bool {
        s.crates.iter().all(|&c| self.is_target[c as usize])
    }

    /// Successor after a move; `None` when blocked. The flag reports a push.
    fn successor(&self, s: &State, mv: Move) -> Option<(State, bool)> {
        let next = self.step_from(s.player as usize, mv)?;
        match s.crates.binary_search(&(next as u16)) {
            Err(_) => Some((
                State {
                    player: next as u16,
                    crates: s.crates.clone(),
                },
                false,
            )),
            Ok(k) => {
                let beyond = self.step_from(next, mv)?;
                if s.crates.binary_search(&(beyond as u16)).is_ok() {
                    return None;
                }
                let mut crates = s.crates.to_vec();
                crates[k] = beyond as u16;
                crates.sort_unstable();
                Some((
                    State {
                        player: next as u16,
                        crates: crates.into_boxed_slice(),
                    },
                    true,
                ))
            }
        }
    }

    fn heuristic(&self, s: &State) -> usize {
        s.crates
            .iter()
            .map(|&c| {
                let (cx, cy) = (c as usize % self.width, c as usize / self.width);
                self.targets
                    .iter()
                    .map(|&t| (t % self.width).abs_diff(cx) + (t / self.width).abs_diff(cy))
                    .min()
                    .unwrap_or(0)
            })
            .sum()
    }

    /// Applies `moves` from the start state; true when every crate ends on a target.
    pub fn replay(&self, moves: &[Move]) -> bool {
        let mut s = self.start();
        for &mv in moves {
            match self.successor(&s, mv) {
                Some((next, _)) => s = next,
                None => return false,
            }
        }
        self.is_goal(&s)
    }

    pub fn search(&self, node_limit: usize) -> SearchOutcome {
        let root = self.start();
        if self.is_goal(&root) {
            return SearchOutcome::Solved(SokobanSolution {
                moves: Vec::new(),
                length: 0,
                nodes_expanded: 0,
                phase: SearchPhase::Bfs,
            });
        }
        if root.crates.iter().any(|&c| self.dead_corner(c as usize)) {
            return SearchOutcome::Unsolvable { nodes_expanded: 0 };
        }
        let bfs_nodes = match self.bfs(&root, node_limit) {
            Phase::Found(moves, nodes) => return solved(moves, nodes, SearchPhase::Bfs),
            Phase::Empty(nodes) => return SearchOutcome::Unsolvable { nodes_expanded: nodes },
            Phase::OutOfBudget(nodes) => nodes,
        };
        match self.astar(&root, node_limit) {
            Phase::Found(moves, nodes) => solved(moves, bfs_nodes + nodes, SearchPhase::AStar),
            Phase::Empty(nodes) => SearchOutcome::Unsolvable {
                nodes_expanded: bfs_nodes + nodes,
            },
            Phase::OutOfBudget(nodes) => SearchOutcome::Exhausted {
                nodes_expanded: bfs_nodes + nodes,
            },
        }
    }

    pub fn solve(&self, node_limit: usize) -> Option<SokobanSolution> {
        match self.search(node_limit) {
            SearchOutcome::Solved(s) => Some(s),
            _ => None,
        }
    }

    fn children(&self, s: &State) -> impl Iterator<Item = (Move, State)> + '_ {
        let s = s.clone();
        Move::ALL.into_iter().filter_map(move |mv| {
            let (next, pushed) = self.successor(&s, mv)?;
            if pushed {
                // The pushed crate sits one step beyond the player.
                let moved = self.step_from(next.player as usize, mv)?;
                if self.dead_corner(moved) {
                    return None;
                }
            }
            Some((mv, next))
        })
    }

    fn bfs(&self, root: &State, node_limit: usize) -> Phase {
        let mut tree = SearchTree::new(root.clone());
        let mut queue = VecDeque::from([0u32]);
        let mut expanded = 0;
        while let Some(id) = queue.pop_front() {
            if expanded >= node_limit {
                return Phase::OutOfBudget(expanded);
            }
            expanded += 1;
            let state = tree.nodes[id as usize].state.clone();
            for (mv, child) in self.children(&state) {
                if tree.seen.contains_key(&child) {
                    continue;
                }
                let goal = self.is_goal(&child);
                let cid = tree.push(child, id, mv, 0);
                if goal {
                    return Phase::Found(tree.path(cid), expanded);
                }
                queue.push_back(cid);
            }
        }
        Phase::Empty(expanded)
    }

    fn astar(&self, root: &State, node_limit: usize) -> Phase {
        let mut tree = SearchTree::new(root.clone());
        let mut closed = vec![false];
        let mut open = BinaryHeap::new();
        let mut tie = 0u64;
        open.push(Reverse((self.heuristic(root), tie, 0u32)));
        let mut expanded = 0;
        while let Some(Reverse((_, _, id))) = open.pop() {
            if closed[id as usize] {
                continue;
            }
            let node = &tree.nodes[id as usize];
            let (state, g) = (node.state.clone(), node.g);
            if self.is_goal(&state) {
                return Phase::Found(tree.path(id), expanded);
            }
            if expanded >= node_limit {
                return Phase::OutOfBudget(expanded);
            }
            expanded += 1;
            closed[id as usize] = true;
            for (mv, child) in self.children(&state) {
                let g2 = g + 1;
                let h = self.heuristic(&child);
                let cid = match tree.seen.get(&child) {
                    Some(&cid) if tree.nodes[cid as usize].g <= g2 || closed[cid as usize] => continue,
                    Some(&cid) => {
                        let n = &mut tree.nodes[cid as usize];
                        n.g = g2;
                        n.parent = id;
                        n.mv = Some(mv);
                        cid
                    }
                    None => {
                        closed.push(false);
                        tree.push(child, id, mv, g2)
                    }
                };
                tie += 1;
                open.push(Reverse((g2 + h, tie, cid)));
            }
        }
        Phase::Empty(expanded)
    }
}

fn indices(level: &Level, tile: TileId) -> Vec<usize> {
    level
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t == tile)
        .map(|(i, _)| i)
        .collect()
}

fn solved(moves: Vec<Move>, nodes_expanded: usize, phase: SearchPhase) -> SearchOutcome {
    SearchOutcome::Solved(SokobanSolution {
        length: moves.len(),
        moves,
        nodes_expanded,
        phase,
    })
}

enum Phase {
    Found(Vec<Move>, usize),
    Empty(usize),
    OutOfBudget(usize),
}

struct Node {
    state: State,
    parent: u32,
    mv: Option<Move>,
    g: usize,
}

struct SearchTree {
    nodes: Vec<Node>,
    seen: HashMap<State, u32>,
}

impl SearchTree {
    fn new(root: State) -> Self {
        let mut seen = HashMap::new();
        seen.insert(root.clone(), 0);
        SearchTree {
            nodes: vec![Node {
                state: root,
                parent: 0,
                mv: None,
                g: 0,
            }],
            seen,
        }
    }

    fn push(&mut self, state: State, parent: u32, mv: Move, g: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.seen.insert(state.clone(), id);
        self.nodes.push(Node {
            state,
            parent,
            mv: Some(mv),
            g,
        });
        id
    }

    fn path(&self, mut id: u32) -> Vec<Move> {
        let mut moves = Vec::new();
        while let Some(mv) = self.nodes[id as usize].mv {
            moves.push(mv);
            id = self.nodes[id as usize].parent;
        }
        moves.reverse();
        moves
    }
}

/// Solves a Sokoban level under `node_limit` expansions per phase.
pub fn solve_sokoban(level: &Level, node_limit: usize) -> Result<Option<SokobanSolution>> {
    Ok(SokobanPuzzle::from_level(level)?.solve(node_limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::ProblemKind;

    fn level(rows: &[&str]) -> Level {
        Level::from_rows(&ProblemKind::Sokoban.alphabet(), rows).unwrap()
    }

    #[test]
    fn single_push() {
        let sol = solve_sokoban(&level(&["@$*#"]), DEFAULT_NODE_LIMIT).unwrap().unwrap();
        assert_eq!(sol.moves, vec![Move::Right]);
        assert_eq!(sol.length, 1);
        assert_eq!(sol.phase, SearchPhase::Bfs);
    }

    #[test]
    fn already_solved_is_length_zero() {
        // Crate on its target cannot be drawn with one tile per cell.
        let p = SokobanPuzzle::new(3, 1, vec![false; 3], 0, vec![2], vec![2]).unwrap();
        let sol = p.solve(10).unwrap();
        assert_eq!(sol.length, 0);
        assert!(p.replay(&[]));
    }

    #[test]
    fn corner_crate_is_unsolvable() {
        let l = level(&[
            "$..", //
            "...",
            ".@*",
        ]);
        let p = SokobanPuzzle::from_level(&l).unwrap();
        assert_eq!(p.search(DEFAULT_NODE_LIMIT), SearchOutcome::Unsolvable { nodes_expanded: 0 });
    }

    #[test]
    fn exhausted_space_is_unsolvable() {
        // Crate against the top wall can never leave row 0.
        let l = level(&[
            ".$.", //
            "...",
            "@*.",
        ]);
        let p = SokobanPuzzle::from_level(&l).unwrap();
        assert!(matches!(p.search(DEFAULT_NODE_LIMIT), SearchOutcome::Unsolvable { .. }));
    }

    #[test]
    fn tiny_budget_falls_back_then_exhausts() {
        let l = level(&[
            "@....", //
            ".$...",
            ".....",
            "...*.",
        ]);
        let p = SokobanPuzzle::from_level(&l).unwrap();
        let full = p.solve(DEFAULT_NODE_LIMIT).unwrap();
        assert!(p.replay(&full.moves));
        assert!(matches!(p.search(1), SearchOutcome::Exhausted { nodes_expanded: 2 }));
    }

    #[test]
    fn astar_phase_finds_optimal_when_bfs_budget_small() {
        let l = level(&[
            "@....", //
            ".$...",
            ".....",
            "...*.",
        ]);
        let p = SokobanPuzzle::from_level(&l).unwrap();
        let bfs = p.solve(DEFAULT_NODE_LIMIT).unwrap();
        assert_eq!(bfs.phase, SearchPhase::Bfs);
        let mut found = None;
        for budget in 2..bfs.nodes_expanded {
            if let Some(s) = p.solve(budget) {
                if s.phase == SearchPhase::AStar {
                    found = Some(s);
                    break;
                }
            }
        }
        let astar = found.expect("A* solves within its budget before BFS does");
        assert_eq!(astar.length, bfs.length);
        assert!(p.replay(&astar.moves));
    }

    #[test]
    fn precondition_errors() {
        assert!(solve_sokoban(&level(&["$*.."]), 100).is_err());
        assert!(solve_sokoban(&level(&["@$$*"]), 100).is_err());
        assert!(solve_sokoban(&level(&["@@$*"]), 100).is_err());
        assert!(solve_sokoban(&level(&["@..."]), 100).is_err());
    }

    #[test]
    fn move_letters() {
        assert_eq!(moves_to_string(&Move::ALL), "UDLR");
    }
}
