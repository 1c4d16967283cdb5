#![allow(dead_code)]

use dms_core::gradient::{compute_gradient, Gradient};
use dms_core::order::GlobalOrder;
use dms_core::{GridShape, TriangulatedGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_values(n: usize, seed: u64, levels: Option<u32>) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| match levels {
            Some(l) => rng.gen_range(0..l) as f64,
            None => rng.gen::<f64>(),
        })
        .collect()
}

pub struct Setup {
    pub grid: TriangulatedGrid,
    pub order: Vec<u32>,
    pub values: Vec<f64>,
    pub grad: Gradient,
}

pub fn setup(dims: [usize; 3], values: Vec<f64>) -> Setup {
    let grid = TriangulatedGrid::new(GridShape { dims }).unwrap();
    let order = GlobalOrder::sequential(&values).unwrap().order;
    let grad = compute_gradient(&grid, &order, |_| true);
    Setup { grid, order, values, grad }
}
