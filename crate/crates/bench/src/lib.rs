//! Fixtures shared by the benchmarks.

use qlattice::lattice::level_size;
use qlattice::problem::{generate_unstructured, Problem};
use qlattice::simulator::LevelState;

/// A normalized state at `level` with no special structure.
pub fn spread_state(n: usize, level: usize) -> LevelState<f64> {
    let len = level_size(n, level);
    let raw: Vec<f64> = (0..len)
        .map(|j| ((j as f64 + 1.0) * 0.618_033_988_75).sin())
        .collect();
    let scale = raw.iter().map(|x| x * x).sum::<f64>().sqrt().recip();
    LevelState {
        n,
        level,
        amplitudes: raw.into_iter().map(|x| x * scale).collect(),
    }
}

/// Unstructured instance near the hardest density.
pub fn hard_instance(n: usize) -> Problem {
    generate_unstructured(n, 2.0, 1).expect("beta 2 is feasible for even N >= 6")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_state_is_normalized() {
        let s = spread_state(10, 3);
        assert_eq!(s.amplitudes.len(), 120);
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }
}
