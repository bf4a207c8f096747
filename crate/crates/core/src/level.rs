//! Tile grids, per-problem tile alphabets, start-level sampling, one-hot
//! encoding, the JSON level format, and ASCII rendering.
//!
//! Cells are stored row-major. Coordinates are `(x, y)` = `(col, row)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::Rng;

/// Index into a problem's tile alphabet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TileId(pub u8);

impl TileId {
    pub const EMPTY: TileId = TileId(0);
    pub const SOLID: TileId = TileId(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub mod zelda {
    use super::TileId;
    pub const PLAYER: TileId = TileId(2);
    pub const KEY: TileId = TileId(3);
    pub const DOOR: TileId = TileId(4);
    pub const ENEMY: TileId = TileId(5);
}

pub mod sokoban {
    use super::TileId;
    pub const PLAYER: TileId = TileId(2);
    pub const CRATE: TileId = TileId(3);
    pub const TARGET: TileId = TileId(4);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Binary,
    Zelda,
    Sokoban,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::Binary, ProblemKind::Zelda, ProblemKind::Sokoban];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Binary => "binary",
            ProblemKind::Zelda => "zelda",
            ProblemKind::Sokoban => "sokoban",
        }
    }

    pub fn alphabet(self) -> TileAlphabet {
        TileAlphabet::default_for(self)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(ProblemKind::Binary),
            "zelda" => Ok(ProblemKind::Zelda),
            "sokoban" => Ok(ProblemKind::Sokoban),
            other => Err(invalid(format!("unknown problem '{other}'"))),
        }
    }
}

/// Tile names, glyphs and start-sampling probabilities for one problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileAlphabet {
    pub problem: ProblemKind,
    pub names: Vec<String>,
    pub glyphs: Vec<char>,
    pub start_probs: Vec<f64>,
}

impl TileAlphabet {
    pub fn default_for(problem: ProblemKind) -> Self {
        let (names, glyphs, probs): (&[&str], &[char], &[f64]) = match problem {
            ProblemKind::Binary => (&["empty", "solid"], &['.', '#'], &[0.5, 0.5]),
            ProblemKind::Zelda => (
                &["empty", "solid", "player", "key", "door", "enemy"],
                &['.', '#', '@', '+', 'D', 'e'],
                &[0.58, 0.3, 0.02, 0.02, 0.02, 0.06],
            ),
            ProblemKind::Sokoban => (
                &["empty", "solid", "player", "crate", "target"],
                &['.', '#', '@', '$', '*'],
                &[0.45, 0.4, 0.05, 0.05, 0.05],
            ),
        };
        TileAlphabet {
            problem,
            names: names.iter().map(|s| s.to_string()).collect(),
            glyphs: glyphs.to_vec(),
            start_probs: probs.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn with_start_probs(mut self, probs: Vec<f64>) -> Result<Self> {
        self.start_probs = probs;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.names.len();
        if n < 2 || self.names[0] != "empty" || self.names[1] != "solid" {
            return Err(invalid("alphabet must start with 'empty', 'solid'"));
        }
        if self.glyphs.len() != n || self.start_probs.len() != n {
            return Err(invalid("alphabet names, glyphs and probabilities differ in length"));
        }
        if n > u8::MAX as usize {
            return Err(invalid("too many tile types"));
        }
        if self.start_probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("start probabilities must be finite and non-negative"));
        }
        let total: f64 = self.start_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("start probabilities sum to {total}, expected 1")));
        }
        let mut seen = self.glyphs.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != n {
            return Err(invalid("glyphs must be distinct"));
        }
        Ok(())
    }

    pub fn glyph(&self, tile: TileId) -> char {
        self.glyphs[tile.index()]
    }
}

/// Rectangular tile grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Level {
    width: usize,
    height: usize,
    cells: Vec<TileId>,
}

impl Level {
    pub fn new(width: usize, height: usize, fill: TileId) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!("level dimensions must be positive, got {width}x{height}")));
        }
        Ok(Level {
            width,
            height,
            cells: vec![fill; width * height],
        })
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<TileId>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!("level dimensions must be positive, got {width}x{height}")));
        }
        if cells.len() != width * height {
            return Err(invalid(format!(
                "{width}x{height} level needs {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(Level { width, height, cells })
    }

    /// Parses rows of glyphs (one string per row) against an alphabet.
    pub fn from_rows(alphabet: &TileAlphabet, rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut cells = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(invalid(format!("row {y} has a different width")));
            }
            for c in row.chars() {
                let t = alphabet
                    .glyphs
                    .iter()
                    .position(|&g| g == c)
                    .ok_or_else(|| invalid(format!("unknown glyph '{c}' in row {y}")))?;
                cells.push(TileId(t as u8));
            }
        }
        Level::from_cells(width, height, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn area(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[TileId] {
        &self.cells
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn get(&self, x: usize, y: usize) -> TileId {
        self.cells[self.index(x, y)]
    }

    pub fn set(&mut self, x: usize, y: usize, tile: TileId) {
        let i = self.index(x, y);
        self.cells[i] = tile;
    }

    pub fn count(&self, tile: TileId) -> usize {
        self.cells.iter().filter(|&&t| t == tile).count()
    }

    pub fn positions(&self, tile: TileId) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(move |(_, &t)| t == tile)
            .map(|(i, _)| self.coords(i))
    }

    /// Number of cells holding a different tile.
    pub fn hamming(&self, other: &Level) -> usize {
        self.cells.iter().zip(&other.cells).filter(|(a, b)| a != b).count()
    }

    pub fn check_tiles(&self, num_tile_types: usize) -> Result<()> {
        match self.cells.iter().position(|t| t.index() >= num_tile_types) {
            Some(i) => {
                let (x, y) = self.coords(i);
                Err(Error::Invariant(format!(
                    "cell ({x},{y}) holds tile {} but only {num_tile_types} tile types exist",
                    self.cells[i].0
                )))
            }
            None => Ok(()),
        }
    }
}

/// Draws every cell i.i.d. from the alphabet's start distribution.
pub fn sample_start_level(alphabet: &TileAlphabet, width: usize, height: usize, rng: &mut Rng) -> Result<Level> {
    alphabet.validate()?;
    let mut level = Level::new(width, height, TileId::EMPTY)?;
    for cell in level.cells.iter_mut() {
        *cell = TileId(rng.categorical(&alphabet.start_probs) as u8);
    }
    Ok(level)
}

/// Dense `height x width x channels` tensor of 0/1 entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneHot {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl OneHot {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        OneHot {
            height,
            width,
            channels,
            data: vec![0; height * width * channels],
        }
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> u8 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    pub fn set_hot(&mut self, row: usize, col: usize, channel: usize) {
        self.data[(row * self.width + col) * self.channels + channel] = 1;
    }

    /// Channel that is hot at `(row, col)`.
    pub fn active(&self, row: usize, col: usize) -> Option<usize> {
        let base = (row * self.width + col) * self.channels;
        self.data[base..base + self.channels].iter().position(|&v| v == 1)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

pub fn encode_one_hot(level: &Level, num_tile_types: usize) -> Result<OneHot> {
    level.check_tiles(num_tile_types)?;
    let mut out = OneHot::zeros(level.height, level.width, num_tile_types);
    for (i, t) in level.cells.iter().enumerate() {
        out.data[i * num_tile_types + t.index()] = 1;
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct LevelDocument {
    problem: String,
    width: usize,
    height: usize,
    cells: Vec<i64>,
}

pub fn serialize_level(level: &Level, problem: ProblemKind) -> String {
    let doc = LevelDocument {
        problem: problem.name().to_string(),
        width: level.width,
        height: level.height,
        cells: level.cells.iter().map(|t| t.0 as i64).collect(),
    };
    serde_json::to_string(&doc).expect("level document serializes")
}

pub fn deserialize_level(text: &str) -> Result<(ProblemKind, Level)> {
    let doc: LevelDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let problem: ProblemKind = doc.problem.parse().map_err(|_| Error::Parse {
        context: "field 'problem'".into(),
        message: format!("unknown problem '{}'", doc.problem),
    })?;
    if doc.width == 0 || doc.height == 0 {
        return Err(Error::Parse {
            context: "fields 'width'/'height'".into(),
            message: format!("dimensions must be positive, got {}x{}", doc.width, doc.height),
        });
    }
    if doc.cells.len() != doc.width * doc.height {
        return Err(Error::Parse {
            context: "field 'cells'".into(),
            message: format!(
                "{}x{} level needs {} cells, got {}",
                doc.width,
                doc.height,
                doc.width * doc.height,
                doc.cells.len()
            ),
        });
    }
    let n = problem.alphabet().len() as i64;
    let mut cells = Vec::with_capacity(doc.cells.len());
    for (i, &v) in doc.cells.iter().enumerate() {
        if v < 0 || v >= n {
            return Err(Error::Parse {
                context: format!("field 'cells' index {i}"),
                message: format!("tile {v} out of range for {problem} (0..{n})"),
            });
        }
        cells.push(TileId(v as u8));
    }
    let level = Level::from_cells(doc.width, doc.height, cells)?;
    Ok((problem, level))
}

pub fn render_ascii(level: &Level, alphabet: &TileAlphabet) -> String {
    let mut out = String::with_capacity(level.area() + level.height);
    for (y, row) in level.cells.chunks(level.width).enumerate() {
        if y > 0 {
            out.push('\n');
        }
        out.extend(row.iter().map(|&t| alphabet.glyph(t)));
    }
    out
}
