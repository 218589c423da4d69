//! Explosion frequencies for birth–death chains at several budgets.
//!
//! cargo run --release -p escape-lab --example explosion_pilot -- [beta] [n] [seed]

use std::ops::ControlFlow;
use std::time::Instant;

use escape_lab::ctmc::{par_map, run_chain, stream_rng, JumpTables, Status};
use escape_lab::families::{generate, FamilySpec};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let beta: f64 = args.first().map_or(2.0, |s| s.parse().expect("beta"));
    let n: usize = args.get(1).map_or(1000, |s| s.parse().expect("n"));
    let seed: u64 = args.get(2).map_or(20_240_917, |s| s.parse().expect("seed"));
    let mu = if beta > 0.0 { 0.4 } else { 1.0 };
    let fg = generate(&FamilySpec::birth_death(beta, 0.0, 100_000).with_mu(mu)).expect("family");
    let tables = JumpTables::new(&fg.graph);
    let root = fg.graph.index_of(fg.root).expect("root");
    for budget in [10_000u64, 100_000, 1_000_000] {
        let clock = Instant::now();
        let runs = par_map(n, |i| {
            let mut rng = stream_rng(seed, i as u64);
            run_chain(&tables, root, 100.0, budget, &mut rng, |_, _| ControlFlow::Continue(()))
        });
        let count = |s: Status| runs.iter().filter(|r| r.status == s).count();
        let mean_jumps = runs.iter().map(|r| r.jumps as f64).sum::<f64>() / n as f64;
        let mean_time = runs.iter().map(|r| r.end_time).sum::<f64>() / n as f64;
        println!(
            "beta={beta} budget={budget}: exploded={} exhausted={} horizon={} left={} mean_jumps={mean_jumps:.0} mean_time={mean_time:.4} ({:.1}s)",
            count(Status::Exploded),
            count(Status::BudgetExhausted),
            count(Status::HorizonReached),
            count(Status::LeftTruncation),
            clock.elapsed().as_secs_f64()
        );
    }
}
