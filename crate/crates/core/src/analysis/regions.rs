use std::collections::VecDeque;

use super::{neighbours, passable_mask, TileSet};
use crate::level::Level;

/// 4-connected components of passable cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionReport {
    pub region_count: usize,
    /// Row-major region ids; 0 marks an impassable cell, regions are numbered from 1.
    pub label_grid: Vec<u32>,
}

impl RegionReport {
    pub fn label(&self, level: &Level, x: usize, y: usize) -> u32 {
        self.label_grid[level.index(x, y)]
    }
}

pub fn count_regions(level: &Level, passable: TileSet) -> RegionReport {
    let (w, h) = (level.width(), level.height());
    let open = passable_mask(level, passable);
    let mut labels = vec![0u32; open.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..open.len() {
        if !open[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            for n in neighbours(w, h, c) {
                if open[n] && labels[n] == 0 {
                    labels[n] = next;
                    queue.push_back(n);
                }
            }
        }
    }
    RegionReport {
        region_count: next as usize,
        label_grid: labels,
    }
}
