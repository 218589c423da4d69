use std::collections::BTreeMap;
use std::ops::ControlFlow;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use escape_lab::ctmc::{run_intervals, stream_rng, JumpTables, Status};
use escape_lab::families::{generate, FamilySpec, RateForm, VolumeClass};
use escape_lab::graph::{build_graph, shortest_path_metric_from, AdaptedWeight, VertexId, WeightedGraph};
use escape_lab::modify::{subdivide, SubdivisionPlan};
use escape_lab::rate::{RateFunction, SyntheticProfile};

fn random_graph(seed: u64, n: u64) -> (WeightedGraph, AdaptedWeight) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let o = VertexId::Original;
    let mut edges = BTreeMap::new();
    for i in 1..n {
        edges.insert((rng.random_range(0..i), i), rng.random_range(0.1..5.0));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < 0.3 {
                edges.entry((i, j)).or_insert_with(|| rng.random_range(0.1..5.0));
            }
        }
    }
    let edges: Vec<_> = edges.into_iter().map(|((a, b), w)| (o(a), o(b), w)).collect();
    let mu: BTreeMap<_, _> = (0..n).map(|i| (o(i), rng.random_range(0.5..5.0))).collect();
    let g = build_graph(&edges, &mu).unwrap();
    let sigma = AdaptedWeight::from_fn(&g, |_, _, _| rng.random_range(0.01..1.0));
    (g, sigma)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_triangle_inequality(seed in any::<u64>(), n in 2u64..12) {
        let (g, sigma) = random_graph(seed, n);
        let d: Vec<Vec<f64>> = (0..g.len())
            .map(|s| {
                let m = shortest_path_metric_from(&g, &sigma, s, f64::INFINITY);
                (0..g.len()).map(|y| m.at(y)).collect()
            })
            .collect();
        for a in 0..g.len() {
            prop_assert_eq!(d[a][a], 0.0);
            for b in 0..g.len() {
                prop_assert!((d[a][b] - d[b][a]).abs() <= 1e-12);
                for c in 0..g.len() {
                    prop_assert!(d[a][c] <= d[a][b] + d[b][c] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn psi_is_increasing_and_inverts(degree in 1.0f64..4.0, c in 0.2f64..3.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let profile = SyntheticProfile::for_class(VolumeClass::Polynomial { degree }, f64::INFINITY).unwrap();
        let rate = RateFunction::new(Arc::new(profile), c, 16.0, 4096.0).unwrap();
        let (r1, r2) = (16.0 + u * 4000.0, 16.0 + v * 4000.0);
        let (p1, p2) = (rate.psi(r1).unwrap(), rate.psi(r2).unwrap());
        if r1 < r2 {
            prop_assert!(p1 < p2);
        }
        let back = rate.inverse(p1).unwrap();
        prop_assert!((back - r1).abs() <= 1e-8 * r1, "{} -> {} -> {}", r1, p1, back);
    }

    #[test]
    fn required_constant_is_minimal(d in 1.0f64..1e6, t in 1.5f64..1e3, which in 0usize..5) {
        let form = [
            RateForm::SqrtTLogT,
            RateForm::Power { exponent: 1.0, log_exponent: 0.5 },
            RateForm::ExpPower { exponent: 0.5 },
            RateForm::Exp,
            RateForm::DoubleExp,
        ][which];
        let c = form.required_constant(d, t);
        prop_assert!(c >= 0.0);
        prop_assert!(d <= form.eval(c, t) * (1.0 + 1e-9));
        if c > 1e-9 {
            prop_assert!(form.eval(c * (1.0 - 1e-6), t) < d);
        }
    }

    #[test]
    fn holding_intervals_tile_the_run(seed in any::<u64>(), n in 2u32..5, horizon in 0.5f64..20.0) {
        let fg = generate(&FamilySpec::lattice(1, 0.0, 0.0, 40)).unwrap();
        let m = subdivide(&fg.graph, &fg.sigma, &SubdivisionPlan::uniform(&fg.graph, n).unwrap()).unwrap();
        let tables = JumpTables::new(&m.graph);
        let start = m.graph.index_of(fg.root).unwrap();
        let mask = m.original_mask();
        let mut rng = stream_rng(seed, 0);
        let (mut last, mut occupied) = (0.0, 0.0);
        let mut ok = true;
        let run = run_intervals(&tables, start, horizon, 1_000_000, &mut rng, |s, e, x| {
            ok &= s == last && e >= s;
            last = e;
            if mask[x] {
                occupied += e - s;
            }
            ControlFlow::Continue(())
        });
        prop_assert!(ok);
        prop_assert_eq!(last, run.end_time);
        if run.status == Status::HorizonReached {
            prop_assert_eq!(run.end_time, horizon);
        }
        prop_assert!(occupied >= 0.0 && occupied <= run.end_time * (1.0 + 1e-12));
    }
}
