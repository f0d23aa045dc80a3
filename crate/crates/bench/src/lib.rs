//! Seeded inputs shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shanks_core::problems::{clustered_pagerank_fixture, random_linear_problem, LinearProblem, PageRankProblem};
use shanks_core::window::SequenceWindow;
use shanks_core::FixedPointProblem;

/// Random linear iteration of dimension `p` with spectral radius 0.9.
pub fn linear_problem(p: usize, seed: u64) -> LinearProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_linear_problem(p, 0.9, &mut rng).expect("valid parameters")
}

/// The first `len` Picard iterates of `problem`.
pub fn picard_window(problem: &dyn FixedPointProblem, len: usize) -> SequenceWindow {
    let mut vs = vec![problem.initial_guess()];
    while vs.len() < len {
        let next = problem.evaluate(vs.last().expect("non-empty")).expect("evaluation succeeds");
        vs.push(next);
    }
    SequenceWindow::from_vectors(&vs).expect("finite iterates")
}

/// Clustered PageRank instance with `n` nodes and damping 0.99.
pub fn pagerank(n: usize) -> PageRankProblem {
    let (s, u0) = clustered_pagerank_fixture(n, 10, 4, 2024).expect("valid fixture");
    PageRankProblem::new(s, 0.99, u0).expect("stochastic start")
}
