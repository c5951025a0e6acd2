use adjrom::{building, cantilever, support, HhtParams, Objective, Problem, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_rel_error(p: &Problem, b: &[f64], probes: &[usize], h: f64) -> f64 {
    let (_, g) = p.gradient(b).unwrap();
    let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    probes
        .iter()
        .map(|&e| {
            let mut bp = b.to_vec();
            bp[e] += h;
            let mut bm = b.to_vec();
            bm[e] -= h;
            let fd = (p.evaluate(&bp).unwrap() - p.evaluate(&bm).unwrap()) / (2.0 * h);
            (fd - g[e]).abs() / fd.abs().max(1e-6 * scale)
        })
        .fold(0.0, f64::max)
}

fn random_design(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.2..0.8)).collect()
}

#[test]
fn cantilever_all_objectives_coarse_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut p = cantilever(8, 4).unwrap();
    p.grid = TimeGrid::new(5, 0.05).unwrap();
    let b = random_design(p.n_elements(), &mut rng);
    let probes: Vec<usize> = (0..6)
        .map(|_| rng.random_range(0..p.n_elements()))
        .collect();
    let target = match p.objective {
        Objective::SquaredTargetDisplacement { target } => target,
        _ => unreachable!(),
    };
    for obj in [
        Objective::MeanDynamicCompliance,
        Objective::MeanStrainEnergy,
        Objective::SquaredTargetDisplacement { target },
    ] {
        p.objective = obj;
        let err = max_rel_error(&p, &b, &probes, 1e-6);
        println!("{obj:?}: {err:e}");
        assert!(err < 1e-5, "{obj:?}: {err:e}");
    }
}

#[test]
fn ground_motion_building_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut p = building(4, 10).unwrap();
    p.grid = TimeGrid::new(12, 1.2).unwrap();
    let b = random_design(p.n_elements(), &mut rng);
    let probes: Vec<usize> = (0..6)
        .map(|_| rng.random_range(0..p.n_elements()))
        .collect();
    for obj in [
        Objective::MeanStrainEnergy,
        Objective::MeanDynamicCompliance,
    ] {
        p.objective = obj;
        let err = max_rel_error(&p, &b, &probes, 1e-6);
        println!("{obj:?}: {err:e}");
        assert!(err < 1e-5, "{obj:?}: {err:e}");
    }
}

#[test]
fn filtered_support_with_large_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut p = support(6, 6).unwrap().with_filter(1.2).unwrap();
    p.grid = TimeGrid::new(8, 0.02).unwrap();
    p.hht = HhtParams::from_alpha(1.0 / 3.0).unwrap();
    let b = random_design(p.n_elements(), &mut rng);
    let probes: Vec<usize> = (0..6)
        .map(|_| rng.random_range(0..p.n_elements()))
        .collect();
    let err = max_rel_error(&p, &b, &probes, 1e-6);
    assert!(err < 1e-5, "{err:e}");
}
