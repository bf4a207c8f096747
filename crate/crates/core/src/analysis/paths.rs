use super::{neighbours, passable_mask, TileSet};
use crate::error::{invalid, Result};
use crate::level::{zelda, Level, TileId};

const UNREACHED: u32 = u32::MAX;

/// Reusable breadth-first search over a fixed passability mask.
pub(crate) struct Bfs {
    width: usize,
    height: usize,
    open: Vec<bool>,
    dist: Vec<u32>,
    queue: Vec<usize>,
}

impl Bfs {
    pub(crate) fn new(level: &Level, passable: TileSet) -> Self {
        let open = passable_mask(level, passable);
        let n = open.len();
        Bfs {
            width: level.width(),
            height: level.height(),
            open,
            dist: vec![UNREACHED; n],
            queue: Vec::with_capacity(n),
        }
    }

    /// Fills move distances from `source`; returns the farthest distance reached.
    pub(crate) fn run(&mut self, source: usize) -> u32 {
        self.dist.fill(UNREACHED);
        self.queue.clear();
        self.dist[source] = 0;
        self.queue.push(source);
        let mut head = 0;
        let mut far = 0;
        while head < self.queue.len() {
            let c = self.queue[head];
            head += 1;
            let d = self.dist[c] + 1;
            for n in neighbours(self.width, self.height, c) {
                if self.open[n] && self.dist[n] == UNREACHED {
                    self.dist[n] = d;
                    far = d;
                    self.queue.push(n);
                }
            }
        }
        far
    }

    pub(crate) fn distance(&self, idx: usize) -> Option<usize> {
        (self.dist[idx] != UNREACHED).then_some(self.dist[idx] as usize)
    }
}

/// Grid diameter in tiles on the path (both endpoints counted).
///
/// Two adjacent cells give 2, a lone cell gives 1, no passable cell gives 0.
pub fn longest_shortest_path(level: &Level, passable: TileSet) -> usize {
    let mut bfs = Bfs::new(level, passable);
    let mut best = 0;
    for source in 0..level.area() {
        if bfs.open[source] {
            best = best.max(bfs.run(source) as usize + 1);
        }
    }
    best
}

/// Move count of a shortest 4-connected path, or `None` when unreachable or
/// either endpoint is impassable.
pub fn shortest_path_moves(
    level: &Level,
    from: (usize, usize),
    to: (usize, usize),
    passable: TileSet,
) -> Result<Option<usize>> {
    for (x, y) in [from, to] {
        if x >= level.width() || y >= level.height() {
            return Err(invalid(format!(
                "({x},{y}) outside {}x{} level",
                level.width(),
                level.height()
            )));
        }
    }
    let (s, t) = (level.index(from.0, from.1), level.index(to.0, to.1));
    if !passable.contains(level.cells()[s]) || !passable.contains(level.cells()[t]) {
        return Ok(None);
    }
    let mut bfs = Bfs::new(level, passable);
    bfs.run(s);
    Ok(bfs.distance(t))
}

fn unique(level: &Level, tile: TileId, name: &str) -> Result<(usize, usize)> {
    let mut it = level.positions(tile);
    match (it.next(), it.next()) {
        (Some(p), None) => Ok(p),
        _ => Err(invalid(format!(
            "expected exactly one {name}, found {}",
            level.count(tile)
        ))),
    }
}

/// Player-to-key plus key-to-door moves. Only solid tiles block movement.
pub fn zelda_solution_length(level: &Level) -> Result<Option<usize>> {
    let player = unique(level, zelda::PLAYER, "player")?;
    let key = unique(level, zelda::KEY, "key")?;
    let door = unique(level, zelda::DOOR, "door")?;
    let mut bfs = Bfs::new(level, TileSet::non_solid());
    bfs.run(level.index(key.0, key.1));
    let to_key = bfs.distance(level.index(player.0, player.1));
    let to_door = bfs.distance(level.index(door.0, door.1));
    Ok(to_key.zip(to_door).map(|(a, b)| a + b))
}

/// Moves from the player to the closest reachable enemy.
pub fn nearest_enemy_distance(level: &Level) -> Result<Option<usize>> {
    let player = unique(level, zelda::PLAYER, "player")?;
    let mut bfs = Bfs::new(level, TileSet::non_solid());
    bfs.run(level.index(player.0, player.1));
    Ok(level
        .positions(zelda::ENEMY)
        .filter_map(|(x, y)| bfs.distance(level.index(x, y)))
        .min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::ProblemKind;

    fn binary(rows: &[&str]) -> Level {
        Level::from_rows(&ProblemKind::Binary.alphabet(), rows).unwrap()
    }

    fn zelda_level(rows: &[&str]) -> Level {
        Level::from_rows(&ProblemKind::Zelda.alphabet(), rows).unwrap()
    }

    const EMPTY: fn() -> TileSet = || TileSet::of(&[TileId::EMPTY]);

    #[test]
    fn serpentine_scores_fifty_four() {
        let maze = binary(&[
            "..........",
            "#########.",
            "..........",
            ".#########",
            "..........",
            "#########.",
            "..........",
            ".#########",
            "..........",
            "##########",
        ]);
        assert_eq!(maze.count(TileId::EMPTY), 54);
        assert_eq!(longest_shortest_path(&maze, EMPTY()), 54);
    }

    #[test]
    fn open_square_diameter() {
        for n in 1..=10 {
            let l = Level::new(n, n, TileId::EMPTY).unwrap();
            assert_eq!(longest_shortest_path(&l, EMPTY()), 2 * n - 1);
        }
        let solid = Level::new(3, 3, TileId::SOLID).unwrap();
        assert_eq!(longest_shortest_path(&solid, EMPTY()), 0);
        assert_eq!(longest_shortest_path(&binary(&["#.#"]), EMPTY()), 1);
        assert_eq!(longest_shortest_path(&binary(&["..#"]), EMPTY()), 2);
    }

    #[test]
    fn point_to_point() {
        let corridor = binary(&["....."]);
        assert_eq!(shortest_path_moves(&corridor, (2, 0), (2, 0), EMPTY()).unwrap(), Some(0));
        assert_eq!(shortest_path_moves(&corridor, (0, 0), (4, 0), EMPTY()).unwrap(), Some(4));
        let split = binary(&["..#.."]);
        assert_eq!(shortest_path_moves(&split, (0, 0), (4, 0), EMPTY()).unwrap(), None);
        assert_eq!(shortest_path_moves(&split, (2, 0), (2, 0), EMPTY()).unwrap(), None);
        assert!(shortest_path_moves(&split, (0, 0), (5, 0), EMPTY()).is_err());
    }

    #[test]
    fn zelda_legs() {
        assert_eq!(zelda_solution_length(&zelda_level(&["@.+.D"])).unwrap(), Some(4));
        assert_eq!(zelda_solution_length(&zelda_level(&["@#+.D"])).unwrap(), None);
        // Enemies do not block the route.
        assert_eq!(zelda_solution_length(&zelda_level(&["@e+eD"])).unwrap(), Some(4));
        assert!(zelda_solution_length(&zelda_level(&["@.+.."])).is_err());
        assert!(zelda_solution_length(&zelda_level(&["@@+.D"])).is_err());
    }

    #[test]
    fn enemy_distance() {
        assert_eq!(nearest_enemy_distance(&zelda_level(&["@e..."])).unwrap(), Some(1));
        assert_eq!(nearest_enemy_distance(&zelda_level(&["@...."])).unwrap(), None);
        assert_eq!(nearest_enemy_distance(&zelda_level(&["@#e.."])).unwrap(), None);
        // Enemies 2 and 5 moves away.
        assert_eq!(nearest_enemy_distance(&zelda_level(&["e.@....e"])).unwrap(), Some(2));
        assert_eq!(nearest_enemy_distance(&zelda_level(&["#.@....e"])).unwrap(), Some(5));
        assert!(nearest_enemy_distance(&zelda_level(&["....e"])).is_err());
    }
}
