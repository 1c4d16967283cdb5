//! Shared-memory parallel gradient and single-node driver.

use std::thread;

use dms_core::gradient::{Gradient, LowerStar};
use dms_core::order::GlobalOrder;
use dms_core::pipeline::{assemble, pair_all};
use dms_core::{GridShape, PersistenceDiagram, PipelineOptions, TriangulatedGrid};

use crate::Error;

/// Lower-star gradient of every vertex accepted by `keep`, split into
/// contiguous vertex ranges over `workers` threads.
pub fn gradient(
    grid: &TriangulatedGrid,
    order: &[u32],
    workers: usize,
    keep: impl Fn(u32) -> bool + Sync,
) -> Gradient {
    let g = Gradient::new(grid);
    let n = grid.vertex_count() as usize;
    let w = workers.clamp(1, n.max(1));
    let run = |lo: usize, hi: usize| {
        let mut ls = LowerStar::new();
        for v in lo as u32..hi as u32 {
            if keep(v) {
                ls.process(grid, order, v, |s, slot| g.set_shared(s, slot));
            }
        }
    };
    if w == 1 {
        run(0, n);
    } else {
        thread::scope(|s| {
            for k in 0..w {
                let run = &run;
                s.spawn(move || run(k * n / w, (k + 1) * n / w));
            }
        });
    }
    g
}

/// Sequential pairing on a gradient computed with `workers` threads.
pub fn compute_diagram_parallel(
    shape: GridShape,
    values: &[f64],
    workers: usize,
    opts: &PipelineOptions,
) -> Result<PersistenceDiagram, Error> {
    let grid = TriangulatedGrid::new(shape).map_err(dms_core::Error::from)?;
    if values.len() as u64 != shape.vertex_count() {
        return Err(dms_core::Error::FieldSize { shape, expected: shape.vertex_count(), got: values.len() }.into());
    }
    let order = GlobalOrder::sequential(values)?.order;
    let grad = gradient(&grid, &order, workers, |_| true);
    let pairs = pair_all(&grid, &order, &grad, opts)?;
    Ok(assemble(&grid, &order, values, &grad, &pairs))
}
