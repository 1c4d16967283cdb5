mod common;

use common::{random_values, setup};
use dms_core::gradient::Slot;
use dms_core::oracle::{d0_unionfind, reduce_matrix};
use dms_core::pipeline::{assemble, critical_counts, pair_all};
use dms_core::{PipelineOptions, ProcessingOrder, SimplexId};
use proptest::prelude::*;

fn check_matching(s: &common::Setup) {
    for d in 0..=3u8 {
        for i in 0..s.grid.simplex_count(d) as u32 {
            let id = SimplexId::new(d, i);
            match s.grad.get(id) {
                Slot::Unset => panic!("{id} left unset"),
                Slot::Critical => {}
                Slot::Up(c) => assert_eq!(s.grad.get(SimplexId::new(d + 1, c)), Slot::Down(i)),
                Slot::Down(f) => assert_eq!(s.grad.get(SimplexId::new(d - 1, f)), Slot::Up(i)),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn diagram_matches_matrix_oracle(
        nx in 1usize..6, ny in 1usize..6, nz in 1usize..5,
        seed: u64, levels in prop::option::of(1u32..5),
    ) {
        let dims = [nx, ny, nz];
        let n = dims.iter().product();
        let s = setup(dims, random_values(n, seed, levels));
        let pairs = pair_all(&s.grid, &s.order, &s.grad, &PipelineOptions::default()).unwrap();
        let dms = assemble(&s.grid, &s.order, &s.values, &s.grad, &pairs);
        let oracle = reduce_matrix(&s.grid, &s.order, &s.values).unwrap();
        prop_assert_eq!(dms.signature(), oracle.signature());
        let d0: Vec<_> = oracle.signature().into_iter().filter(|x| x.0 == 0).collect();
        prop_assert_eq!(d0_unionfind(&s.grid, &s.order, &s.values).signature(), d0);
    }

    #[test]
    fn topological_invariants(
        nx in 1usize..7, ny in 1usize..7, nz in 1usize..6,
        seed: u64, levels in prop::option::of(1u32..4),
    ) {
        let dims = [nx, ny, nz];
        let n = dims.iter().product();
        let s = setup(dims, random_values(n, seed, levels));
        check_matching(&s);
        let c = critical_counts(&s.grid, &s.grad);
        prop_assert_eq!(c[0] as i64 - c[1] as i64 + c[2] as i64 - c[3] as i64, 1);
        let pairs = pair_all(&s.grid, &s.order, &s.grad, &PipelineOptions::default()).unwrap();
        let d = assemble(&s.grid, &s.order, &s.values, &s.grad, &pairs);
        prop_assert_eq!(d.essential_counts(), [1, 0, 0, 0]);
        prop_assert_eq!(d.check_invariants(), None);
        // every critical simplex appears exactly once in the diagram
        prop_assert_eq!(2 * d.pairs.len() + d.essential.len(), c.iter().sum::<usize>());
    }

    #[test]
    fn processing_order_does_not_matter(seed: u64, shuffle: u64) {
        let s = setup([5, 5, 4], random_values(100, seed, None));
        let a = pair_all(&s.grid, &s.order, &s.grad, &PipelineOptions::default()).unwrap();
        let opts = PipelineOptions { processing: ProcessingOrder::Shuffled(shuffle) };
        let b = pair_all(&s.grid, &s.order, &s.grad, &opts).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn all_equal_cube_has_one_critical_vertex() {
    let s = setup([2, 2, 2], vec![3.0; 8]);
    assert_eq!(critical_counts(&s.grid, &s.grad), [1, 0, 0, 0]);
    assert!(s.grad.is_critical(SimplexId::new(0, 0)));
    let d = dms_core::compute_diagram(s.grid.shape(), &s.values, &Default::default()).unwrap();
    assert!(d.pairs.is_empty());
    assert_eq!(d.essential_counts(), [1, 0, 0, 0]);
}

#[test]
fn ramp_has_only_the_minimum() {
    let g = dms_core::TriangulatedGrid::new(dms_core::GridShape::new(3, 3, 3)).unwrap();
    let values: Vec<f64> = (0..27)
        .map(|v| {
            let p = g.vertex_coords(v);
            (p[0] + 2 * p[1] + 4 * p[2]) as f64
        })
        .collect();
    let s = setup([3, 3, 3], values);
    assert_eq!(critical_counts(&s.grid, &s.grad), [1, 0, 0, 0]);
}

#[test]
fn interior_bump_is_one_maximum_paired_on_the_dual_side() {
    let g = dms_core::TriangulatedGrid::new(dms_core::GridShape::new(5, 5, 5)).unwrap();
    let values: Vec<f64> = (0..125)
        .map(|v| {
            let p = g.vertex_coords(v);
            let r2: i64 = p.iter().map(|&c| (c as i64 - 2).pow(2)).sum();
            -(r2 as f64) + 0.01 * v as f64
        })
        .collect();
    let s = setup([5, 5, 5], values);
    let pairs = pair_all(&s.grid, &s.order, &s.grad, &PipelineOptions::default()).unwrap();
    let d = assemble(&s.grid, &s.order, &s.values, &s.grad, &pairs);
    let oracle = reduce_matrix(&s.grid, &s.order, &s.values).unwrap();
    assert_eq!(d.signature(), oracle.signature());
    assert_eq!(d.essential_counts(), [1, 0, 0, 0]);
    // the bump's peak is the only maximum that matters; every D2 pair comes from the dual stage
    assert_eq!(pairs.max_side.len(), d.finite_counts()[2]);
}

#[test]
fn seeded_oracle_sweep() {
    for dims in [[4, 4, 4], [6, 5, 4], [16, 16, 1]] {
        let n = dims.iter().product();
        for seed in 0..10u64 {
            let s = setup(dims, random_values(n, seed, None));
            let pairs = pair_all(&s.grid, &s.order, &s.grad, &PipelineOptions::default()).unwrap();
            let d = assemble(&s.grid, &s.order, &s.values, &s.grad, &pairs);
            let o = reduce_matrix(&s.grid, &s.order, &s.values).unwrap();
            assert_eq!(d.signature(), o.signature(), "{dims:?} seed {seed}");
        }
    }
}
