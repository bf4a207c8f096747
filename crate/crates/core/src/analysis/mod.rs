//! Search oracles over tile grids: connected regions, grid diameter,
//! point-to-point distances, Zelda reachability and Sokoban solving.

mod paths;
mod regions;
pub mod sokoban;

pub use paths::{longest_shortest_path, nearest_enemy_distance, shortest_path_moves, zelda_solution_length};
pub use regions::{count_regions, RegionReport};
pub use sokoban::{solve_sokoban, Move, SearchPhase, SokobanPuzzle, SokobanSolution, DEFAULT_NODE_LIMIT};

use crate::level::{Level, TileId};

/// Set of tile ids, stored as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct TileSet(u64);

impl TileSet {
    pub fn of(tiles: &[TileId]) -> Self {
        TileSet(tiles.iter().fold(0, |m, t| m | (1 << t.0)))
    }

    /// Every tile except solid.
    pub fn non_solid() -> Self {
        TileSet(!(1 << TileId::SOLID.0))
    }

    pub fn contains(self, t: TileId) -> bool {
        t.0 < 64 && self.0 & (1 << t.0) != 0
    }

    pub fn insert(&mut self, t: TileId) {
        self.0 |= 1 << t.0;
    }
}

/// Row-major passability mask.
pub(crate) fn passable_mask(level: &Level, passable: TileSet) -> Vec<bool> {
    level.cells().iter().map(|&t| passable.contains(t)).collect()
}

/// 4-neighbours of a cell index, in the order up, down, left, right.
pub(crate) fn neighbours(width: usize, height: usize, idx: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (idx % width, idx / width);
    let up = (y > 0).then(|| idx - width);
    let down = (y + 1 < height).then(|| idx + width);
    let left = (x > 0).then(|| idx - 1);
    let right = (x + 1 < width).then(|| idx + 1);
    [up, down, left, right].into_iter().flatten()
}
