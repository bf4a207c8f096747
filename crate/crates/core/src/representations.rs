//! Narrow, turtle and wide action interfaces over a tile grid.
//!
//! * Narrow: the environment picks the cell; the agent chooses no-op (0) or
//!   tile `t` (action `t + 1`).
//! * Turtle: actions 0..4 move the cursor up/down/left/right (clamped at the
//!   edges), action `4 + t` writes tile `t` under the cursor.
//! * Wide: one flat action encodes `(x, y, tile)`.
//!
//! Narrow and turtle observations are translated so the cursor cell sits at
//! the centre of a map twice the level size; cells outside the level carry an
//! extra pad channel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::level::{encode_one_hot, Level, OneHot, TileId};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepKind {
    Narrow,
    Turtle,
    Wide,
}

impl RepKind {
    pub const ALL: [RepKind; 3] = [RepKind::Narrow, RepKind::Turtle, RepKind::Wide];

    pub fn name(self) -> &'static str {
        match self {
            RepKind::Narrow => "narrow",
            RepKind::Turtle => "turtle",
            RepKind::Wide => "wide",
        }
    }
}

impl fmt::Display for RepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "narrow" => Ok(RepKind::Narrow),
            "turtle" => Ok(RepKind::Turtle),
            "wide" => Ok(RepKind::Wide),
            other => Err(invalid(format!("unknown representation '{other}'"))),
        }
    }
}

/// How the narrow representation picks its next cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationMode {
    /// Uniformly random cell every step (training).
    #[default]
    Random,
    /// Row-major sweep from a random starting cell (inference).
    Scan,
}

const TURTLE_MOVES: usize = 4;

pub fn action_space_size(kind: RepKind, width: usize, height: usize, n_tiles: usize) -> usize {
    match kind {
        RepKind::Narrow => n_tiles + 1,
        RepKind::Turtle => n_tiles + TURTLE_MOVES,
        RepKind::Wide => width * height * n_tiles,
    }
}

/// Observation tensor shape `(rows, cols, channels)`.
pub fn observation_shape(kind: RepKind, width: usize, height: usize, n_tiles: usize) -> (usize, usize, usize) {
    match kind {
        RepKind::Wide => (height, width, n_tiles),
        RepKind::Narrow | RepKind::Turtle => (2 * height, 2 * width, n_tiles + 1),
    }
}

pub fn decode_wide(action: usize, width: usize, height: usize, n_tiles: usize) -> Result<(usize, usize, TileId)> {
    let size = width * height * n_tiles;
    if action >= size {
        return Err(invalid(format!("wide action {action} outside [0, {size})")));
    }
    let tile = action % n_tiles;
    let cell = action / n_tiles;
    Ok((cell % width, cell / width, TileId(tile as u8)))
}

pub fn encode_wide(x: usize, y: usize, tile: TileId, width: usize, n_tiles: usize) -> usize {
    (y * width + x) * n_tiles + tile.index()
}

#[derive(Clone, Debug)]
pub struct RepState {
    pub kind: RepKind,
    /// Cursor `(x, y)`; fixed at the origin for wide.
    pub loc: (usize, usize),
    pub mode: LocationMode,
    width: usize,
    height: usize,
    n_tiles: usize,
    rng: Rng,
}

/// What one action did to the level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edit {
    pub changed: bool,
    /// Cell written, if the action was a write.
    pub cell: Option<(usize, usize)>,
}

impl RepState {
    /// Cursor starts at a random cell for narrow and turtle.
    pub fn new(kind: RepKind, width: usize, height: usize, n_tiles: usize, mode: LocationMode, mut rng: Rng) -> Self {
        let loc = match kind {
            RepKind::Wide => (0, 0),
            RepKind::Narrow | RepKind::Turtle => {
                let c = rng.below(width * height);
                (c % width, c / width)
            }
        };
        RepState {
            kind,
            loc,
            mode,
            width,
            height,
            n_tiles,
            rng,
        }
    }

    pub fn action_space_size(&self) -> usize {
        action_space_size(self.kind, self.width, self.height, self.n_tiles)
    }

    pub fn observation_shape(&self) -> (usize, usize, usize) {
        observation_shape(self.kind, self.width, self.height, self.n_tiles)
    }

    /// Applies `action` to `level` in place.
    pub fn apply_action(&mut self, level: &mut Level, action: usize) -> Result<Edit> {
        let size = self.action_space_size();
        if action >= size {
            return Err(invalid(format!("{} action {action} outside [0, {size})", self.kind)));
        }
        if level.width() != self.width || level.height() != self.height {
            return Err(invalid("level dimensions differ from the representation's"));
        }
        let edit = match self.kind {
            RepKind::Narrow => {
                let edit = if action == 0 {
                    Edit { changed: false, cell: None }
                } else {
                    write(level, self.loc, TileId((action - 1) as u8))
                };
                self.advance();
                edit
            }
            RepKind::Turtle => {
                if action < TURTLE_MOVES {
                    let (x, y) = self.loc;
                    self.loc = match action {
                        0 => (x, y.saturating_sub(1)),
                        1 => (x, (y + 1).min(self.height - 1)),
                        2 => (x.saturating_sub(1), y),
                        _ => ((x + 1).min(self.width - 1), y),
                    };
                    Edit { changed: false, cell: None }
                } else {
                    write(level, self.loc, TileId((action - TURTLE_MOVES) as u8))
                }
            }
            RepKind::Wide => {
                let (x, y, t) = decode_wide(action, self.width, self.height, self.n_tiles)?;
                write(level, (x, y), t)
            }
        };
        Ok(edit)
    }

    fn advance(&mut self) {
        let area = self.width * self.height;
        let next = match self.mode {
            LocationMode::Random => self.rng.below(area),
            LocationMode::Scan => (self.loc.1 * self.width + self.loc.0 + 1) % area,
        };
        self.loc = (next % self.width, next / self.width);
    }

    pub fn observe(&self, level: &Level) -> Result<OneHot> {
        match self.kind {
            RepKind::Wide => encode_one_hot(level, self.n_tiles),
            RepKind::Narrow | RepKind::Turtle => translated(level, self.loc, self.n_tiles),
        }
    }
}

fn write(level: &mut Level, (x, y): (usize, usize), tile: TileId) -> Edit {
    let changed = level.get(x, y) != tile;
    level.set(x, y, tile);
    Edit {
        changed,
        cell: Some((x, y)),
    }
}

/// Map of size `2h x 2w` with source cell `(x, y)` at `(x + w - lx, y + h - ly)`.
pub fn translated(level: &Level, loc: (usize, usize), n_tiles: usize) -> Result<OneHot> {
    level.check_tiles(n_tiles)?;
    let (w, h) = (level.width(), level.height());
    let (lx, ly) = loc;
    if lx >= w || ly >= h {
        return Err(invalid(format!("location ({lx},{ly}) outside {w}x{h} level")));
    }
    let pad = n_tiles;
    let mut out = OneHot::zeros(2 * h, 2 * w, n_tiles + 1);
    for row in 0..2 * h {
        for col in 0..2 * w {
            let sx = col as i64 - w as i64 + lx as i64;
            let sy = row as i64 - h as i64 + ly as i64;
            let channel = if level.in_bounds(sx, sy) {
                level.get(sx as usize, sy as usize).index()
            } else {
                pad
            };
            out.set_hot(row, col, channel);
        }
    }
    Ok(out)
}
