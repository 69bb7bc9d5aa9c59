//! Randomized property oracles over the graph/field/analysis layers,
//! exposed both to the CLI and to the test suite.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::analysis::{disagreement, v_functional, v_tilde};
use crate::dynamics::PlantParams;
use crate::field::{AgentField, Grid};
use crate::graph::{centering, laplacian, lemma2_residuals, spectrum, Topology};
use crate::protocols::SlidingGains;

/// Outcome of one randomized property check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn result(name: &'static str, worst: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        pass: worst >= -tol,
        detail: format!("worst residual {worst:.3e} (slack {tol:.1e})"),
    }
}

/// Random connected topology: a random spanning tree plus extra edges.
pub fn random_connected_topology(rng: &mut ChaCha8Rng, max_agents: usize) -> Topology {
    let n = rng.gen_range(3..=max_agents.max(3));
    let mut edges = Vec::new();
    for v in 2..=n {
        let u = rng.gen_range(1..v);
        edges.push((u, v));
    }
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let u = rng.gen_range(1..=n);
        let v = rng.gen_range(1..=n);
        if u != v && !edges.contains(&(u.min(v), u.max(v))) && !edges.contains(&(u.max(v), u.min(v)))
        {
            edges.push((u, v));
        }
    }
    Topology::new(n, &edges).expect("spanning tree construction is connected")
}

fn random_zero_sum(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let x = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
    let mean = x.mean();
    x.map(|v| v - mean)
}

fn random_field(rng: &mut ChaCha8Rng, agents: usize, grid: Grid) -> AgentField {
    let modes: Vec<(f64, f64, f64)> = (0..agents * 3)
        .map(|_| {
            (
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.0..4.0_f64).round(),
                rng.gen_range(-2.0..2.0),
            )
        })
        .collect();
    AgentField::sample_profile(grid, agents, move |i, s| {
        let base = &modes[(i - 1) * 3..i * 3];
        base.iter()
            .map(|(amp, freq, off)| amp * (freq * PI * s).cos() + off / 3.0)
            .sum()
    })
}

/// Structural Laplacian checks: symmetry, zero row sums, degree diagonal,
/// eigenvalue sum equal to the trace, nonnegative spectrum with positive
/// algebraic connectivity.
pub fn check_laplacian_structure(seed: u64, cases: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..cases {
        let topo = random_connected_topology(&mut rng, 12);
        let lap = laplacian(&topo);
        let m = lap.entries();
        let n = topo.agent_count();
        let degrees = topo.degrees();
        for i in 0..n {
            worst = worst.min(-(m.row(i).sum()).abs());
            worst = worst.min(-((m[(i, i)] - degrees[i] as f64).abs()));
            for j in 0..n {
                worst = worst.min(-((m[(i, j)] - m[(j, i)]).abs()));
            }
        }
        let spec = spectrum(&lap).expect("eigensolver converges on small graphs");
        let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
        let eig_sum: f64 = spec.eigenvalues().iter().sum();
        worst = worst.min(-((eig_sum - trace).abs()) / trace.max(1.0));
        worst = worst.min(spec.eigenvalues()[0].min(0.0));
        worst = worst.min(spec.lambda2() - 1e-6);
    }
    result("laplacian_structure", worst, 1e-9)
}

/// Spectral inequality residuals on random zero-sum vectors.
pub fn check_spectral_inequalities(seed: u64, cases: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..cases {
        let topo = random_connected_topology(&mut rng, 12);
        let lap = laplacian(&topo);
        let spec = spectrum(&lap).expect("eigensolver converges on small graphs");
        for _ in 0..8 {
            let x = random_zero_sum(&mut rng, topo.agent_count());
            let res = lemma2_residuals(&lap, &spec, &x).expect("constructed zero-sum");
            worst = worst.min(res.min() / x.norm_squared().max(1.0));
        }
    }
    result("spectral_inequalities", worst, 1e-8)
}

/// Norm axioms of the discrete Sobolev norms on random trigonometric
/// fields: homogeneity, triangle inequality, order monotonicity.
pub fn check_field_norms(seed: u64, cases: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(30).expect("valid grid");
    let mut worst = f64::INFINITY;
    for _ in 0..cases {
        let agents = rng.gen_range(1..=6);
        let f = random_field(&mut rng, agents, grid);
        let g = random_field(&mut rng, agents, grid);
        let c: f64 = rng.gen_range(-4.0..4.0);
        let mut sum = AgentField::zeros(agents, grid);
        *sum.values_mut() = f.values() + g.values();
        let mut scaled = AgentField::zeros(agents, grid);
        *scaled.values_mut() = f.values() * c;
        for r in 0..=2 {
            let nf = f.h_norm(r).expect("valid order");
            let ng = g.h_norm(r).expect("valid order");
            let scale = (nf + ng).max(1.0);
            worst = worst.min((nf + ng - sum.h_norm(r).unwrap()) / scale);
            worst =
                worst.min(-((scaled.h_norm(r).unwrap() - c.abs() * nf).abs()) / scale);
            if r > 0 {
                worst = worst.min((f.h_norm(r).unwrap() - f.h_norm(r - 1).unwrap()) / scale);
            }
        }
    }
    result("field_norms", worst, 1e-9)
}

/// Boundary-trace estimate residual on random fields.
pub fn check_trace_estimate(seed: u64, cases: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(30).expect("valid grid");
    let mut worst = f64::INFINITY;
    for _ in 0..cases {
        let agents = rng.gen_range(1..=6);
        let f = random_field(&mut rng, agents, grid);
        for side in [crate::field::Side::Left, crate::field::Side::Right] {
            let res = f.lemma1_residual(side).expect("valid field");
            worst = worst.min(res / f.h_norm_squared(1).unwrap().max(1.0));
        }
    }
    result("trace_estimate", worst, 1e-9)
}

/// Sandwich `alpha1 V~ <= V <= alpha2 V~` on random disagreement pairs.
pub fn check_functional_sandwich(seed: u64, cases: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(30).expect("valid grid");
    let gains = SlidingGains {
        a: 40.0,
        b: 20.0,
        w1: 5.0,
        w2: 5.0,
        w3: 5.0,
    };
    let params = PlantParams { diffusivity: 1.0 };
    let mut worst = f64::INFINITY;
    for _ in 0..cases {
        let topo = random_connected_topology(&mut rng, 10);
        let n = topo.agent_count();
        let lap = laplacian(&topo);
        let spec = spectrum(&lap).expect("eigensolver converges on small graphs");
        let alpha1 = (spec.lambda2() / (n as f64).sqrt()).min(spec.lambda2() * spec.lambda2());
        let alpha2 = lap
            .induced_one_norm()
            .max(spec.lambda_n() * spec.lambda_n())
            .max(spec.lambda_n());
        let cent = centering(n);
        for _ in 0..4 {
            let q = random_field(&mut rng, n, grid);
            let z = random_field(&mut rng, n, grid);
            let d = disagreement(&q, &z, &cent);
            let v = v_functional(&d, &lap, &gains, &params);
            let vt = v_tilde(&d, &gains, &params);
            let scale = vt.max(1.0);
            worst = worst.min((v - alpha1 * vt) / scale);
            worst = worst.min((alpha2 * vt - v) / scale);
        }
    }
    result("functional_sandwich", worst, 1e-8)
}

/// Runs every property oracle with derived sub-seeds.
pub fn run_all(seed: u64, cases: usize) -> Vec<CheckResult> {
    vec![
        check_laplacian_structure(seed, cases),
        check_spectral_inequalities(seed.wrapping_add(1), cases),
        check_field_norms(seed.wrapping_add(2), cases),
        check_trace_estimate(seed.wrapping_add(3), cases),
        check_functional_sandwich(seed.wrapping_add(4), cases),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_oracles_pass() {
        for r in run_all(2024, 20) {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn random_topologies_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            // Topology::new validates connectivity internally
            let topo = random_connected_topology(&mut rng, 9);
            assert!(topo.agent_count() >= 3);
        }
    }
}
