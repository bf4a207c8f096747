use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use pcgrl::agents::{flatten, ActorCritic, TrainerConfig};
use pcgrl::env::{Env, EnvConfig};
use pcgrl::{ProblemKind, RepKind, Rng};

fn stepping(c: &mut Criterion) {
    for (kind, rep) in [
        (ProblemKind::Binary, RepKind::Narrow),
        (ProblemKind::Zelda, RepKind::Turtle),
        (ProblemKind::Sokoban, RepKind::Wide),
    ] {
        let cfg = EnvConfig::for_problem(kind, rep).with_change_percentage(1.0);
        let n = cfg.num_actions();
        c.bench_function(&format!("episode/{kind}-{rep}"), |b| {
            b.iter_batched(
                || (Env::reset_with(cfg.clone(), 9).unwrap().0, Rng::new(3)),
                |(mut env, mut rng)| {
                    while !env.step(rng.below(n)).unwrap().done {}
                    env
                },
                BatchSize::SmallInput,
            )
        });
    }
}

fn forward(c: &mut Criterion) {
    let cfg = EnvConfig::for_problem(ProblemKind::Binary, RepKind::Narrow);
    let arch = TrainerConfig::default().architecture(&cfg);
    let net = ActorCritic::new(arch, &mut Rng::new(0));
    let (env, obs) = Env::reset_with(cfg, 1).unwrap();
    let x = flatten(&obs);
    drop(env);
    c.bench_function("policy_forward/binary14-narrow", |b| {
        b.iter(|| net.policy_forward(black_box(&x)).unwrap())
    });
}

criterion_group!(benches, stepping, forward);
criterion_main!(benches);
