//! Mirror symmetry of the cantilever about its mid-height line.

use adjrom::{cantilever, Objective, Problem, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NX: usize = 8;
const NY: usize = 4;

fn mirror(b: &[f64]) -> Vec<f64> {
    (0..NX * NY)
        .map(|e| {
            let (ex, ey) = (e % NX, e / NX);
            b[(NY - 1 - ey) * NX + ex]
        })
        .collect()
}

fn problem(objective: Objective) -> Problem {
    let mut p = cantilever(NX, NY).unwrap();
    p.grid = TimeGrid::new(15, 0.05).unwrap();
    if !matches!(objective, Objective::SquaredTargetDisplacement { .. }) {
        p.objective = objective;
    }
    p
}

fn objectives() -> [Objective; 3] {
    [
        Objective::MeanDynamicCompliance,
        Objective::MeanStrainEnergy,
        Objective::SquaredTargetDisplacement { target: 0 },
    ]
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn element_numbering_is_row_major() {
    let p = cantilever(NX, NY).unwrap();
    let [x, y] = p.mesh.element_center(NX + 3);
    assert!((x - 3.5 * 4.0 / NX as f64).abs() < 1e-12);
    assert!((y - 1.5 * 2.0 / NY as f64).abs() < 1e-12);
}

#[test]
fn symmetric_density_gives_symmetric_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let half: Vec<f64> = (0..NX * NY).map(|_| rng.random_range(0.2..0.8)).collect();
    let b: Vec<f64> = half
        .iter()
        .zip(mirror(&half))
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    for obj in objectives() {
        let p = problem(obj);
        let (_, g) = p.gradient(&b).unwrap();
        let diff: Vec<f64> = g.iter().zip(mirror(&g)).map(|(x, y)| x - y).collect();
        assert!(max_abs(&diff) <= 1e-10 * max_abs(&g), "{obj:?}");
    }
}

#[test]
fn mirrored_design_mirrors_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let b: Vec<f64> = (0..NX * NY).map(|_| rng.random_range(0.2..0.8)).collect();
    for obj in objectives() {
        let p = problem(obj);
        let (f, g) = p.gradient(&b).unwrap();
        let (fm, gm) = p.gradient(&mirror(&b)).unwrap();
        assert!((f - fm).abs() <= 1e-10 * f.abs(), "{obj:?}");
        let diff: Vec<f64> = mirror(&g).iter().zip(&gm).map(|(x, y)| x - y).collect();
        assert!(max_abs(&diff) <= 1e-10 * max_abs(&g), "{obj:?}");
    }
}
