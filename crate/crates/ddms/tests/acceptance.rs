//! Acceptance gate: one PASS/FAIL line per criterion.

mod common;

use std::time::{Duration, Instant};

use ddms::cli::run_dms;
use ddms::distributed::{compute_diagram_distributed, DistConfig, Mode};
use ddms::fields::{generate, FieldKind};
use ddms::io::diagram_csv;
use dms_core::gradient::compute_gradient;
use dms_core::oracle::reduce_matrix;
use dms_core::pipeline::critical_counts;
use dms_core::{GlobalOrder, GridShape, PersistenceDiagram, TriangulatedGrid};

const SHAPES: [[usize; 3]; 4] = [[4, 4, 4], [6, 5, 4], [9, 9, 5], [16, 16, 1]];
const FIELDS_PER_SHAPE: u64 = 50;
const DELIVERY_SEEDS: u64 = 10;

fn field_seed(shape: usize, i: u64) -> u64 {
    1000 * shape as u64 + i
}

fn layouts(dims: [usize; 3]) -> [[usize; 3]; 4] {
    if dims[2] == 1 {
        [[1, 1, 1], [2, 1, 1], [2, 2, 1], [4, 2, 1]]
    } else {
        [[1, 1, 1], [2, 1, 1], [2, 2, 1], [2, 2, 2]]
    }
}

/// Collects failures of one criterion; keeps the first few messages.
#[derive(Default)]
struct Tally {
    runs: usize,
    failures: Vec<String>,
    failed: usize,
}

impl Tally {
    fn check(&mut self, r: Result<(), String>) {
        self.runs += 1;
        if let Err(e) = r {
            self.failed += 1;
            if self.failures.len() < 5 {
                self.failures.push(e);
            }
        }
    }

    fn report(&self, name: &str, took: Duration, budget: Option<Duration>, extra: &str) -> bool {
        let in_time = budget.is_none_or(|b| took < b);
        let pass = self.failed == 0 && in_time;
        let budget = budget.map(|b| format!(" budget {}s", b.as_secs())).unwrap_or_default();
        println!(
            "{} {name}: {} runs, {} failed, {:.1}s{budget}{extra}",
            if pass { "PASS" } else { "FAIL" },
            self.runs,
            self.failed,
            took.as_secs_f64()
        );
        for f in &self.failures {
            println!("    {f}");
        }
        pass
    }
}

/// Invariants of a sequential run: the matching, critical counts and the diagram.
fn invariants(shape: GridShape, values: &[f64], d: &PersistenceDiagram) -> Result<[usize; 4], String> {
    let grid = TriangulatedGrid::new(shape).map_err(|e| e.to_string())?;
    let order = GlobalOrder::sequential(values).map_err(|e| e.to_string())?.order;
    let grad = compute_gradient(&grid, &order, |_| true);
    grad.validate(&grid, &order).map_err(|e| format!("matching: {e}"))?;
    let crit = critical_counts(&grid, &grad);
    diagram_invariants(shape, &crit, d)?;
    Ok(crit)
}

fn diagram_invariants(shape: GridShape, crit: &[usize; 4], d: &PersistenceDiagram) -> Result<(), String> {
    let euler = crit[0] as i64 - crit[1] as i64 + crit[2] as i64 - crit[3] as i64;
    if euler != 1 {
        return Err(format!("{:?}: Euler characteristic {euler} from {crit:?}", shape.dims));
    }
    if d.essential_counts() != [1, 0, 0, 0] {
        return Err(format!("{:?}: essential classes {:?}", shape.dims, d.essential_counts()));
    }
    if let Some(e) = d.check_invariants() {
        return Err(format!("{:?}: {e}", shape.dims));
    }
    // every critical simplex is a birth, a death or essential
    let f = d.finite_counts();
    let e = d.essential_counts();
    for dim in 0..4 {
        let deaths = if dim > 0 { f[dim - 1] } else { 0 };
        if f[dim] + deaths + e[dim] != crit[dim] {
            return Err(format!("{:?}: dim {dim} has {} critical simplices, diagram uses {}", shape.dims, crit[dim], f[dim] + deaths + e[dim]));
        }
    }
    Ok(())
}

/// Runs `f` twice and records whether both CSV files are identical.
fn twice(det: &mut Tally, label: &str, mut f: impl FnMut() -> Result<PersistenceDiagram, String>) -> Result<PersistenceDiagram, String> {
    let a = f()?;
    let b = f();
    det.check(match b {
        Ok(b) if diagram_csv(&a) == diagram_csv(&b) => Ok(()),
        Ok(_) => Err(format!("{label}: repeated run wrote a different file")),
        Err(e) => Err(format!("{label}: repeated run failed: {e}")),
    });
    Ok(a)
}

fn distributed(shape: GridShape, values: &[f64], cfg: &DistConfig, inv: &mut Tally) -> Result<PersistenceDiagram, String> {
    let out = compute_diagram_distributed(shape, values, cfg).map_err(|e| e.to_string())?;
    let mut crit = [0usize; 4];
    for r in &out.ranks {
        for (c, ids) in crit.iter_mut().zip(&r.critical) {
            *c += ids.len();
        }
    }
    inv.check(diagram_invariants(shape, &crit, &out.diagram));
    Ok(out.diagram)
}

fn main() {
    let start = Instant::now();
    let mut det = Tally::default();
    let mut inv = Tally::default();
    let mut results = Vec::new();

    // 1. sequential engine against the matrix oracle
    let t = Instant::now();
    let mut c1 = Tally::default();
    let mut sequential: Vec<(GridShape, Vec<f64>, PersistenceDiagram)> = Vec::new();
    let mut det_time = Duration::ZERO;
    for (si, dims) in SHAPES.iter().enumerate() {
        let shape = GridShape { dims: *dims };
        for i in 0..FIELDS_PER_SHAPE {
            let values = generate(FieldKind::Random(field_seed(si, i)), shape);
            let label = format!("dms {dims:?} field {i}");
            let dms = run_dms(shape, &values).map(|r| r.diagram).map_err(|e| e.to_string());
            let r = dms.and_then(|d| {
                let grid = TriangulatedGrid::new(shape).map_err(|e| e.to_string())?;
                let order = GlobalOrder::sequential(&values).map_err(|e| e.to_string())?.order;
                let oracle = reduce_matrix(&grid, &order, &values).map_err(|e| e.to_string())?;
                inv.check(invariants(shape, &values, &d).map(|_| ()));
                let tr = Instant::now();
                let again = twice(&mut det, &label, || run_dms(shape, &values).map(|r| r.diagram).map_err(|e| e.to_string()));
                det_time += tr.elapsed();
                if again.as_ref().ok() != Some(&d) {
                    return Err(format!("{label}: rerun differs"));
                }
                let ok = d.signature() == oracle.signature();
                sequential.push((shape, values.clone(), d));
                if ok { Ok(()) } else { Err(format!("{label}: differs from the matrix oracle")) }
            });
            c1.check(r);
        }
    }
    let took = t.elapsed().saturating_sub(det_time);
    results.push(c1.report("1 oracle equivalence", took, Some(Duration::from_secs(60)), ""));

    // 2. distributed against sequential
    let t = Instant::now();
    let mut det_time = Duration::ZERO;
    let mut c2 = Tally::default();
    for (shape, values, want) in &sequential {
        for splits in layouts(shape.dims) {
            for seed in 0..DELIVERY_SEEDS {
                for mode in [Mode::Round, Mode::Eager] {
                    for anticipation in [true, false] {
                        let cfg = DistConfig { splits, seed, mode, anticipation, workers: 2, ..Default::default() };
                        let label = format!("ddms {:?} {splits:?} seed {seed} {mode:?} anticipation {anticipation}", shape.dims);
                        let tr = Instant::now();
                        let got = twice(&mut det, &label, || distributed(*shape, values, &cfg, &mut inv));
                        det_time += tr.elapsed() / 2;
                        let r = got.and_then(|got| if &got == want { Ok(()) } else { Err(format!("{label}: differs from dms")) });
                        c2.check(r);
                    }
                }
            }
        }
    }
    let took = t.elapsed().saturating_sub(det_time);
    results.push(c2.report("2 distributed exactness", took, Some(Duration::from_secs(600)), ""));

    // 3. fixtures
    let t = Instant::now();
    let mut c3 = Tally::default();
    for (name, r) in common::all() {
        c3.check(r.map_err(|e| format!("{name}: {e}")));
    }
    results.push(c3.report("3 fixture fidelity", t.elapsed(), None, ""));

    // 4. elevation has a single class
    let shape = GridShape::new(64, 64, 64);
    let elevation = generate(FieldKind::Elevation, shape);
    let t = Instant::now();
    let mut det_time = Duration::ZERO;
    let mut c4 = Tally::default();
    for ranks in [1, 2, 4, 8] {
        let label = format!("elevation on {ranks} ranks");
        let r = ddms::cli::default_splits(ranks, shape).map_err(|e| e.to_string()).and_then(|splits| {
            let cfg = DistConfig { splits, ..Default::default() };
            let tr = Instant::now();
            let d = twice(&mut det, &label, || distributed(shape, &elevation, &cfg, &mut inv))?;
            det_time += tr.elapsed() / 2;
            let (f, e) = (d.finite_counts(), d.essential_counts());
            if f == [0; 4] && e.iter().sum::<usize>() == 1 { Ok(()) } else { Err(format!("{label}: finite {f:?}, essential {e:?}")) }
        });
        c4.check(r);
    }
    results.push(c4.report("4 elevation single class", t.elapsed().saturating_sub(det_time), Some(Duration::from_secs(30)), ""));

    // 6. output sensitivity of the saddle-saddle stage
    let t = Instant::now();
    let mut c6 = Tally::default();
    let random = generate(FieldKind::Random(64), shape);
    let d1 = |values: &[f64], inv: &mut Tally, det: &mut Tally, label: &str| -> Result<f64, String> {
        let mut time = 0.0;
        twice(det, label, || {
            let r = run_dms(shape, values).map_err(|e| e.to_string())?;
            time = r.stats.timings.iter().find(|(n, _)| n == "d1").map(|(_, s)| *s).unwrap_or(0.0);
            Ok(r.diagram)
        })
        .and_then(|d| invariants(shape, values, &d).map(|_| ()))
        .inspect_err(|e| inv.check(Err(e.clone())))?;
        inv.check(Ok(()));
        Ok(time)
    };
    let mut extra = String::new();
    c6.check(d1(&random, &mut inv, &mut det, "random 64^3").and_then(|tr| {
        let te = d1(&elevation, &mut inv, &mut det, "elevation 64^3")?;
        extra = format!(", d1 random {tr:.4}s elevation {te:.4}s");
        if tr >= 10.0 * te { Ok(()) } else { Err(format!("ratio {:.2} below 10", tr / te)) }
    }));
    results.push(c6.report("6 output sensitivity", t.elapsed(), None, &extra));

    // 7. per-rank simplex state on four ranks
    let t = Instant::now();
    let mut c7 = Tally::default();
    let big = GridShape::new(128, 128, 64);
    let values = generate(FieldKind::Random(128), big);
    let peak = |splits: [usize; 3], det: &mut Tally| -> Result<(usize, PersistenceDiagram), String> {
        let cfg = DistConfig { splits, mode: Mode::Eager, workers: 4, ..Default::default() };
        let mut peak = 0;
        let d = twice(det, &format!("128x128x64 on {splits:?}"), || {
            let out = compute_diagram_distributed(big, &values, &cfg).map_err(|e| e.to_string())?;
            peak = out.ranks.iter().map(|r| r.stats.peak_simplex_state).max().unwrap_or(0);
            Ok(out.diagram)
        })?;
        Ok((peak, d))
    };
    let mut extra = String::new();
    c7.check(peak([1, 1, 1], &mut det).and_then(|(one, d1)| {
        let (four, d4) = peak([2, 2, 1], &mut det)?;
        let ratio = four as f64 / one as f64;
        extra = format!(", peak {four} vs {one} (ratio {ratio:.3})");
        if d1 != d4 {
            return Err("four-rank diagram differs from the one-rank diagram".into());
        }
        if ratio <= 0.6 { Ok(()) } else { Err(format!("ratio {ratio:.3} above 0.6")) }
    }));
    results.push(c7.report("7 memory scaling", t.elapsed(), None, &extra));

    // 5 and 8 accumulate over every run above
    results.push(inv.report("5 topological invariants", Duration::ZERO, None, ""));
    results.push(det.report("8 determinism", Duration::ZERO, None, ""));

    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed in {:.0}s", results.len(), start.elapsed().as_secs_f64());
    if passed != results.len() {
        std::process::exit(1);
    }
}
