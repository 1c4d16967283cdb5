//! Synthetic scalar fields.

use dms_core::GridShape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// `x + nx * (y + ny * z)`: one minimum, nothing else.
    Elevation,
    /// Smooth sum of sines with many extrema.
    Wavelet,
    /// Uniform noise in `[0, 1)`.
    Random(u64),
    /// Two paraboloid wells, exactly two minima when `nx >= 4`.
    TwoBump,
}

impl std::str::FromStr for FieldKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "elevation" => Ok(FieldKind::Elevation),
            "wavelet" => Ok(FieldKind::Wavelet),
            "two-bump" => Ok(FieldKind::TwoBump),
            _ => match s.strip_prefix("random") {
                Some("") => Ok(FieldKind::Random(0)),
                Some(rest) => rest
                    .strip_prefix(':')
                    .and_then(|n| n.parse().ok())
                    .map(FieldKind::Random)
                    .ok_or_else(|| format!("bad random seed in {s:?}")),
                None => Err(format!("unknown field kind {s:?}")),
            },
        }
    }
}

fn coords(shape: GridShape) -> impl Iterator<Item = [f64; 3]> {
    let [nx, ny, nz] = shape.dims;
    (0..nz).flat_map(move |z| (0..ny).flat_map(move |y| (0..nx).map(move |x| [x as f64, y as f64, z as f64])))
}

pub fn generate(kind: FieldKind, shape: GridShape) -> Vec<f64> {
    let [nx, ny, nz] = shape.dims.map(|d| d as f64);
    match kind {
        FieldKind::Elevation => coords(shape).map(|[x, y, z]| x + nx * (y + ny * z)).collect(),
        FieldKind::Wavelet => coords(shape)
            .map(|[x, y, z]| {
                60.0 * (0.7 * x).sin() * (0.9 * y).cos() + 30.0 * (1.3 * z + 0.4 * x).sin() + 10.0 * (0.5 * (x + y + z)).cos()
            })
            .collect(),
        FieldKind::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..shape.vertex_count()).map(|_| rng.gen::<f64>()).collect()
        }
        FieldKind::TwoBump => {
            let c = |fx: f64| [(fx * nx).floor(), ((ny - 1.0) / 2.0).floor(), ((nz - 1.0) / 2.0).floor()];
            let (a, b) = (c(0.25), c(0.75));
            let d2 = |p: [f64; 3], q: [f64; 3]| (0..3).map(|i| (p[i] - q[i]).powi(2)).sum::<f64>();
            coords(shape).map(|p| d2(p, a).min(d2(p, b) + 0.5)).collect()
        }
    }
}
