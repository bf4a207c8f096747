mod common;

use common::*;
use pcgrl::analysis::{
    count_regions, longest_shortest_path, nearest_enemy_distance, solve_sokoban, zelda_solution_length, SearchPhase,
    SokobanPuzzle, TileSet, DEFAULT_NODE_LIMIT,
};
use pcgrl::level::{zelda, Level};
use pcgrl::problems::ProblemConfig;
use pcgrl::{ProblemKind, Rng, TileId};

#[test]
fn diameter_matches_floyd_warshall() {
    let mut rng = Rng::new(7);
    for kind in [ProblemKind::Binary, ProblemKind::Zelda] {
        let cfg = ProblemConfig::with_size(kind, 7, 6);
        let passable = cfg.passable();
        for _ in 0..150 {
            let level = random_level(&cfg.alphabet, 7, 6, &mut rng);
            let expected = floyd_warshall_diameter(&level, |t| passable.contains(t));
            assert_eq!(longest_shortest_path(&level, passable), expected, "{level:?}");
        }
    }
}

#[test]
fn regions_match_union_find() {
    let mut rng = Rng::new(8);
    for kind in ProblemKind::ALL {
        let cfg = ProblemConfig::with_size(kind, 9, 7);
        let passable = cfg.passable();
        for _ in 0..200 {
            let level = random_level(&cfg.alphabet, 9, 7, &mut rng);
            let report = count_regions(&level, passable);
            assert_eq!(report.region_count, union_find_regions(&level, |t| passable.contains(t)));
            // Labels agree with adjacency: neighbouring passable cells share a label.
            for y in 0..7 {
                for x in 0..8 {
                    if passable.contains(level.get(x, y)) && passable.contains(level.get(x + 1, y)) {
                        assert_eq!(report.label(&level, x, y), report.label(&level, x + 1, y));
                    }
                }
            }
        }
    }
}

fn plant_zelda(rng: &mut Rng) -> Level {
    let cfg = ProblemConfig::new(ProblemKind::Zelda);
    let (w, h) = (cfg.width, cfg.height);
    let mut level = random_level(&cfg.alphabet, w, h, rng);
    for y in 0..h {
        for x in 0..w {
            let t = level.get(x, y);
            if t == zelda::PLAYER || t == zelda::KEY || t == zelda::DOOR {
                level.set(x, y, TileId::EMPTY);
            }
        }
    }
    let mut cells: Vec<usize> = (0..w * h).collect();
    for tile in [zelda::PLAYER, zelda::KEY, zelda::DOOR] {
        let i = cells.swap_remove(rng.below(cells.len()));
        level.set(i % w, i / w, tile);
    }
    level
}

#[test]
fn zelda_legs_match_bfs() {
    let mut rng = Rng::new(9);
    let mut reachable = 0;
    for _ in 0..30 {
        let level = plant_zelda(&mut rng);
        let (p, k, d) = (
            find_one(&level, zelda::PLAYER),
            find_one(&level, zelda::KEY),
            find_one(&level, zelda::DOOR),
        );
        let expected = match (bfs_moves(&level, p, k), bfs_moves(&level, k, d)) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        reachable += expected.is_some() as usize;
        assert_eq!(zelda_solution_length(&level).unwrap(), expected);
    }
    assert!(reachable > 0);
}

#[test]
fn nearest_enemy_matches_bfs() {
    let mut rng = Rng::new(10);
    for _ in 0..100 {
        let level = plant_zelda(&mut rng);
        let p = find_one(&level, zelda::PLAYER);
        let expected = level
            .positions(zelda::ENEMY)
            .filter_map(|(x, y)| bfs_moves(&level, p, (x, y)))
            .min();
        assert_eq!(nearest_enemy_distance(&level).unwrap(), expected);
    }
}

#[test]
fn sokoban_matches_exhaustive_search() {
    let mut rng = Rng::new(11);
    let mut solved = 0;
    for _ in 0..300 {
        let level = random_sokoban(4, 4, &mut rng);
        let expected = exhaustive_sokoban(&level);
        let got = solve_sokoban(&level, DEFAULT_NODE_LIMIT).unwrap();
        match (&got, expected) {
            (Some(sol), Some(len)) => {
                assert_eq!(sol.phase, SearchPhase::Bfs);
                assert_eq!(sol.length, len);
                assert!(SokobanPuzzle::from_level(&level).unwrap().replay(&sol.moves));
                solved += 1;
            }
            (None, None) => {}
            _ => panic!("solver {got:?} vs oracle {expected:?} on {level:?}"),
        }
    }
    assert!(solved > 20, "only {solved} solvable boards");
}

#[test]
fn astar_fallback_solutions_replay() {
    let mut rng = Rng::new(12);
    let mut astar = 0;
    for _ in 0..400 {
        let level = random_sokoban(5, 5, &mut rng);
        let Some(opt) = exhaustive_sokoban(&level) else { continue };
        // A tight budget forces most searches past the breadth-first phase.
        if let Some(sol) = solve_sokoban(&level, 100).unwrap() {
            assert!(SokobanPuzzle::from_level(&level).unwrap().replay(&sol.moves));
            assert!(sol.length >= opt);
            if sol.phase == SearchPhase::Bfs {
                assert_eq!(sol.length, opt);
            } else {
                astar += 1;
            }
        }
    }
    assert!(astar > 0);
}

#[test]
fn passable_sets() {
    let binary = ProblemConfig::new(ProblemKind::Binary).passable();
    assert_eq!(binary, TileSet::of(&[TileId::EMPTY]));
    let z = ProblemConfig::new(ProblemKind::Zelda).passable();
    assert!(z.contains(zelda::ENEMY) && !z.contains(TileId::SOLID));
}

