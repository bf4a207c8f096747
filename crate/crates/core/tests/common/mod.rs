//! Independent reference implementations used to cross-check the library.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use ndarray::Array2;
use pcgrl::agents::{log_softmax, ppo_loss, ActorCritic, Architecture, LossCoefficients};
use pcgrl::level::{sokoban, Level, TileAlphabet};
use pcgrl::{ProblemKind, Rng, TileId};

/// Player position and sorted crate positions.
type SokobanState = ((i64, i64), Vec<(i64, i64)>);

/// All-pairs shortest paths; returns the largest finite distance plus one
/// (path length counted in tiles), or 0 when nothing is passable.
pub fn floyd_warshall_diameter(level: &Level, passable: impl Fn(TileId) -> bool) -> usize {
    let cells: Vec<(usize, usize)> = (0..level.height())
        .flat_map(|y| (0..level.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| passable(level.get(x, y)))
        .collect();
    let n = cells.len();
    if n == 0 {
        return 0;
    }
    const INF: usize = usize::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            let (a, b) = (cells[i], cells[j]);
            if a.0.abs_diff(b.0) + a.1.abs_diff(b.1) == 1 {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d.iter().flatten().filter(|&&v| v < INF).max().unwrap() + 1
}

/// Connected components of passable cells via union-find.
pub fn union_find_regions(level: &Level, passable: impl Fn(TileId) -> bool) -> usize {
    let (w, h) = (level.width(), level.height());
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let open = |x: usize, y: usize| passable(level.get(x, y));
    for y in 0..h {
        for x in 0..w {
            if !open(x, y) {
                continue;
            }
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if nx < w && ny < h && open(nx, ny) {
                    let (a, b) = (find(&mut parent, y * w + x), find(&mut parent, ny * w + nx));
                    parent[a] = b;
                }
            }
        }
    }
    (0..w * h)
        .filter(|&i| open(i % w, i / w) && find(&mut parent, i) == i)
        .count()
}

/// Plain BFS move count between two cells over non-solid tiles.
pub fn bfs_moves(level: &Level, from: (usize, usize), to: (usize, usize)) -> Option<usize> {
    let (w, h) = (level.width(), level.height());
    let mut dist = vec![usize::MAX; w * h];
    let mut q = VecDeque::new();
    dist[from.1 * w + from.0] = 0;
    q.push_back(from);
    while let Some((x, y)) = q.pop_front() {
        if (x, y) == to {
            return Some(dist[y * w + x]);
        }
        let d = dist[y * w + x];
        let steps = [(0i64, -1i64), (0, 1), (-1, 0), (1, 0)];
        for (dx, dy) in steps {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if level.get(nx, ny) != TileId::SOLID && dist[ny * w + nx] == usize::MAX {
                dist[ny * w + nx] = d + 1;
                q.push_back((nx, ny));
            }
        }
    }
    None
}

pub fn find_one(level: &Level, tile: TileId) -> (usize, usize) {
    let mut found = None;
    for y in 0..level.height() {
        for x in 0..level.width() {
            if level.get(x, y) == tile {
                assert!(found.is_none(), "tile {tile:?} appears twice");
                found = Some((x, y));
            }
        }
    }
    found.expect("tile present")
}

/// Unbounded breadth-first search over (player, crate set) with no pruning.
/// Returns the optimal move count, or `None` once every reachable state is seen.
pub fn exhaustive_sokoban(level: &Level) -> Option<usize> {
    let (w, h) = (level.width() as i64, level.height() as i64);
    let at = |x: i64, y: i64| level.get(x as usize, y as usize);
    let mut player = None;
    let mut crates = Vec::new();
    let mut targets = Vec::new();
    for y in 0..h {
        for x in 0..w {
            match at(x, y) {
                t if t == sokoban::PLAYER => player = Some((x, y)),
                t if t == sokoban::CRATE => crates.push((x, y)),
                t if t == sokoban::TARGET => targets.push((x, y)),
                _ => {}
            }
        }
    }
    targets.sort();
    crates.sort();
    let start = (player.unwrap(), crates);
    let mut seen: HashMap<SokobanState, usize> = HashMap::new();
    let mut q = VecDeque::new();
    seen.insert(start.clone(), 0);
    q.push_back(start);
    while let Some(state) = q.pop_front() {
        let d = seen[&state];
        if state.1 == targets {
            return Some(d);
        }
        let ((px, py), crates) = state;
        for (dx, dy) in [(0, -1), (0, 1), (-1, 0), (1, 0)] {
            let (nx, ny) = (px + dx, py + dy);
            let free = |x: i64, y: i64, cs: &[(i64, i64)]| {
                x >= 0 && y >= 0 && x < w && y < h && at(x, y) != TileId::SOLID && !cs.contains(&(x, y))
            };
            let mut next = crates.clone();
            if let Some(ci) = crates.iter().position(|&c| c == (nx, ny)) {
                if !free(nx + dx, ny + dy, &crates) {
                    continue;
                }
                next[ci] = (nx + dx, ny + dy);
                next.sort();
            } else if !free(nx, ny, &crates) {
                continue;
            }
            let key = ((nx, ny), next);
            if !seen.contains_key(&key) {
                seen.insert(key.clone(), d + 1);
                q.push_back(key);
            }
        }
    }
    None
}

/// Random small Sokoban board: walls with probability 0.15 and then one
/// player plus 1-2 crate/target pairs on distinct open cells.
pub fn random_sokoban(width: usize, height: usize, rng: &mut Rng) -> Level {
    loop {
        let mut level = Level::new(width, height, TileId::EMPTY).unwrap();
        for y in 0..height {
            for x in 0..width {
                if rng.unit() < 0.15 {
                    level.set(x, y, TileId::SOLID);
                }
            }
        }
        let mut open: Vec<(usize, usize)> = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .filter(|&(x, y)| level.get(x, y) == TileId::EMPTY)
            .collect();
        let pairs = 1 + rng.below(2);
        if open.len() < 1 + 2 * pairs {
            continue;
        }
        let mut take = |rng: &mut Rng| open.swap_remove(rng.below(open.len()));
        let (x, y) = take(rng);
        level.set(x, y, sokoban::PLAYER);
        for _ in 0..pairs {
            let (x, y) = take(rng);
            level.set(x, y, sokoban::CRATE);
            let (x, y) = take(rng);
            level.set(x, y, sokoban::TARGET);
        }
        return level;
    }
}

pub fn random_level(alphabet: &TileAlphabet, w: usize, h: usize, rng: &mut Rng) -> Level {
    pcgrl::level::sample_start_level(alphabet, w, h, rng).unwrap()
}

pub fn alphabet(kind: ProblemKind) -> TileAlphabet {
    kind.alphabet()
}

pub struct Case {
    pub net: ActorCritic,
    pub obs: Array2<f64>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub coef: LossCoefficients,
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = Rng::new(seed);
    let arch = Architecture {
        obs_dim: 3 + rng.below(5),
        hidden_dim: 2 + rng.below(6),
        trunk_layers: 1 + rng.below(3),
        n_actions: 2 + rng.below(4),
    };
    let net = ActorCritic::random(arch, 0.8, &mut rng);
    let batch = 1 + rng.below(8);
    let obs = Array2::from_shape_fn((batch, arch.obs_dim), |_| rng.normal());
    let logits = net.forward_batch(obs.view()).unwrap().logits;
    let actions: Vec<usize> = (0..batch).map(|_| rng.below(arch.n_actions)).collect();
    // Perturb the behaviour log-probs so ratios land on both sides of the clip range.
    let old_log_probs = (0..batch)
        .map(|i| log_softmax(&logits.row(i).to_vec())[actions[i]] + 0.3 * rng.normal())
        .collect();
    Case {
        net,
        obs,
        actions,
        old_log_probs,
        advantages: (0..batch).map(|_| rng.normal()).collect(),
        returns: (0..batch).map(|_| rng.normal()).collect(),
        coef: LossCoefficients {
            clip_eps: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.05,
        },
    }
}

pub fn case_loss(c: &Case, net: &ActorCritic) -> f64 {
    ppo_loss(net, c.obs.view(), &c.actions, &c.old_log_probs, &c.advantages, &c.returns, &c.coef)
        .unwrap()
        .0
        .loss
}

pub struct GradientReport {
    pub checked: usize,
    pub failures: Vec<String>,
}

/// Compares every analytic partial derivative of the PPO loss with a
/// central difference: |a - n| <= 1e-4 max(|a|, |n|) + 1e-6.
pub fn gradient_check(c: &Case) -> GradientReport {
    let h = 1e-6;
    let (_, grads) =
        ppo_loss(&c.net, c.obs.view(), &c.actions, &c.old_log_probs, &c.advantages, &c.returns, &c.coef).unwrap();
    let mut report = GradientReport {
        checked: 0,
        failures: Vec::new(),
    };
    for (k, &a) in grads.values().enumerate() {
        let mut plus = c.net.clone();
        *plus.values_mut().nth(k).unwrap() += h;
        let mut minus = c.net.clone();
        *minus.values_mut().nth(k).unwrap() -= h;
        let numeric = (case_loss(c, &plus) - case_loss(c, &minus)) / (2.0 * h);
        if (a - numeric).abs() > 1e-4 * a.abs().max(numeric.abs()) + 1e-6 {
            report.failures.push(format!("param {k}: analytic {a} numeric {numeric}"));
        }
        report.checked += 1;
    }
    report
}
