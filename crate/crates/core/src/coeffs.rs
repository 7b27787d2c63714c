//! The problem-independent level map.
//!
//! The column-orthonormal matrix closest (in Frobenius norm) to the 0/1
//! superset map from level `i` to level `i + 1` has entries that depend only
//! on the overlap of the row and column sets, `U[r][β] = a[|r ∩ β|]`. The
//! `i + 1` values `a_0..a_i` are found here by Newton iteration on the
//! column orthonormality conditions, which only involve overlap-class counts.
//! A dense SVD construction is kept alongside as an oracle for small `N`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::amplitude::Amplitude;
use crate::error::{Error, Result};
use crate::lattice::{self, choose_signed, level_mask_vec, level_size, MAX_ITEMS};

/// Residual target for the coefficient solve.
pub const SOLVE_TOLERANCE: f64 = 1e-12;
/// Newton iteration cap per start.
pub const MAX_ITERATIONS: usize = 200;
/// Largest number of rows or columns [`build_dense_map`] will materialize.
pub const DENSE_SIDE_LIMIT: usize = 20_000;
const DENSE_ENTRY_LIMIT: usize = 1 << 27;

/// Coefficients `a_0..a_i` of the map from level `i` to `i + 1` over `n` items.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapCoefficients {
    pub n: usize,
    pub level: usize,
    pub a: Vec<f64>,
    /// Largest absolute residual of the orthonormality equations at `a`.
    pub max_residual: f64,
}

impl MapCoefficients {
    /// Entry of the map between sets overlapping in `k` items.
    #[inline]
    pub fn entry(&self, k: usize) -> f64 {
        self.a[k]
    }

    /// Squared Frobenius distance to the 0/1 superset matrix, per source column.
    pub fn distance_to_superset_map(&self) -> f64 {
        superset_distance(self.n, self.level, &self.a)
    }
}

/// Number of level-`(i+1)` sets overlapping a fixed level-`i` set in exactly `k` items.
pub fn overlap_count_nk(n: usize, i: usize, k: usize) -> u64 {
    let (n, i, k) = (n as i64, i as i64, k as i64);
    choose_signed(i, k) * choose_signed(n - i, i + 1 - k)
}

/// Number of level-`(i+1)` sets `r` with `|r ∩ β| = j` and `|r ∩ α| = k`, for
/// two level-`i` sets with `|α ∩ β| = p`.
pub fn pair_overlap_count(n: usize, i: usize, p: usize, j: usize, k: usize) -> u64 {
    let (n, i, p, j, k) = (n as i64, i as i64, p as i64, j as i64, k as i64);
    // x counts members of r shared by both α and β.
    (0..=p)
        .map(|x| {
            choose_signed(i - p, k - x)
                * choose_signed(p, x)
                * choose_signed(i - p, j - x)
                * choose_signed(n - 2 * i + p, i + 1 - j - k + x)
        })
        .sum()
}

fn check_mappable(n: usize, i: usize) -> Result<()> {
    if n > MAX_ITEMS || i + 1 > n.saturating_sub(i) {
        return Err(Error::LevelNotMappable { n, level: i });
    }
    Ok(())
}

/// The quadratic system `aᵀ Q_e a = c_e`: one normalization equation followed
/// by one orthogonality equation per overlap `p < i`.
struct OrthonormalitySystem {
    forms: Vec<DMatrix<f64>>,
    targets: Vec<f64>,
}

impl OrthonormalitySystem {
    fn new(n: usize, i: usize) -> Self {
        let dim = i + 1;
        let mut forms = Vec::with_capacity(dim);
        let mut targets = Vec::with_capacity(dim);
        forms.push(DMatrix::from_fn(dim, dim, |j, k| {
            if j == k {
                overlap_count_nk(n, i, k) as f64
            } else {
                0.0
            }
        }));
        targets.push(1.0);
        for p in 0..i {
            forms.push(DMatrix::from_fn(dim, dim, |j, k| {
                pair_overlap_count(n, i, p, j, k) as f64
            }));
            targets.push(0.0);
        }
        OrthonormalitySystem { forms, targets }
    }

    fn residuals(&self, a: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.forms.len(),
            self.forms
                .iter()
                .zip(&self.targets)
                .map(|(q, t)| a.dot(&(q * a)) - t),
        )
    }

    fn jacobian(&self, a: &DVector<f64>) -> DMatrix<f64> {
        let dim = a.len();
        let mut jac = DMatrix::zeros(self.forms.len(), dim);
        for (e, q) in self.forms.iter().enumerate() {
            // Forms are symmetric, so the gradient of aᵀQa is 2Qa.
            let g = q * a * 2.0;
            jac.set_row(e, &g.transpose());
        }
        jac
    }
}

/// Residuals of the orthonormality equations at `a`, evaluated directly from
/// the overlap counts: entry 0 is `Σ n_k a_k² − 1`, entry `p + 1` is
/// `Σ_{j,k} n_jk^(p) a_j a_k`.
pub fn equation_residuals(n: usize, i: usize, a: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), i + 1, "expected {} coefficients", i + 1);
    let mut out = Vec::with_capacity(i + 1);
    out.push(
        (0..=i)
            .map(|k| overlap_count_nk(n, i, k) as f64 * a[k] * a[k])
            .sum::<f64>()
            - 1.0,
    );
    for p in 0..i {
        let mut s = 0.0;
        for j in 0..=i {
            for k in 0..=i {
                s += pair_overlap_count(n, i, p, j, k) as f64 * a[j] * a[k];
            }
        }
        out.push(s);
    }
    out
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn superset_distance(n: usize, i: usize, a: &[f64]) -> f64 {
    (0..=i)
        .map(|k| {
            let target = if k == i { 1.0 } else { 0.0 };
            overlap_count_nk(n, i, k) as f64 * (a[k] - target).powi(2)
        })
        .sum()
}

/// Damped Newton from `start`; returns the converged point and its residual.
fn newton(system: &OrthonormalitySystem, start: DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let mut a = start;
    let mut res = max_abs(system.residuals(&a).iter().copied());
    for _ in 0..MAX_ITERATIONS {
        if res <= SOLVE_TOLERANCE {
            return Some((a, res));
        }
        let f = system.residuals(&a);
        let step = system.jacobian(&a).lu().solve(&(-f))?;
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &a + &step * damping;
            let trial_res = max_abs(system.residuals(&trial).iter().copied());
            if trial_res < res {
                a = trial;
                res = trial_res;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (res <= SOLVE_TOLERANCE).then_some((a, res))
}

/// Solves for the coefficients of the level-`i` map closest to the superset map.
///
/// Several Newton starts are tried around the normalized superset map
/// (`a_i = 1/√(n − i)`, others zero); among the converged roots the one with
/// the smallest Frobenius distance to the superset map is returned.
pub fn solve_coefficients(n: usize, i: usize) -> Result<MapCoefficients> {
    check_mappable(n, i)?;
    let dim = i + 1;
    let system = OrthonormalitySystem::new(n, i);

    let ideal = 1.0 / ((n - i) as f64).sqrt();
    let mut starts = Vec::new();
    for spread in [0.0f64, 0.15, 0.4] {
        // Alternating-sign guesses scaled like the normalized b values.
        starts.push(DVector::from_fn(dim, |k, _| {
            let depth = (i - k) as i32;
            let nk = overlap_count_nk(n, i, k) as f64;
            if depth == 0 {
                ideal
            } else {
                (-1f64).powi(depth) * spread.powi(depth) / nk.sqrt()
            }
        }));
    }

    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut worst_residual = f64::INFINITY;
    for start in starts {
        let Some((a, res)) = newton(&system, start) else {
            continue;
        };
        worst_residual = worst_residual.min(res);
        let a: Vec<f64> = a.iter().copied().collect();
        let dist = superset_distance(n, i, &a);
        if best.as_ref().is_none_or(|(_, d, _)| dist < *d - 1e-12) {
            best = Some((a, dist, res));
        }
    }

    let (a, _, _) = best.ok_or(Error::NoConvergence {
        n,
        level: i,
        residual: worst_residual,
    })?;
    let max_residual = max_abs(equation_residuals(n, i, &a));
    Ok(MapCoefficients {
        n,
        level: i,
        a,
        max_residual,
    })
}

type CoefficientCache = RwLock<HashMap<(usize, usize), Arc<MapCoefficients>>>;

/// Process-wide cache of solved coefficients.
pub fn cached_coefficients(n: usize, i: usize) -> Result<Arc<MapCoefficients>> {
    static CACHE: OnceLock<CoefficientCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(c) = cache
        .read()
        .expect("coefficient cache poisoned")
        .get(&(n, i))
    {
        return Ok(Arc::clone(c));
    }
    let solved = Arc::new(solve_coefficients(n, i)?);
    let mut w = cache.write().expect("coefficient cache poisoned");
    Ok(Arc::clone(w.entry((n, i)).or_insert(solved)))
}

/// Scaled values `b_k = (−1)^k a_{i−k} √n_{i−k}`.
pub fn scaled_b(coeffs: &MapCoefficients) -> Vec<f64> {
    let i = coeffs.level;
    (0..=i)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let nk = overlap_count_nk(coeffs.n, i, i - k) as f64;
            sign * coeffs.a[i - k] * nk.sqrt()
        })
        .collect()
}

/// A level map stored as a dense matrix; rows are level-`(i+1)` sets and
/// columns level-`i` sets, both in rank order.
#[derive(Clone, Debug)]
pub struct DenseLevelMap {
    pub n: usize,
    pub level: usize,
    pub entries: DMatrix<f64>,
}

impl DenseLevelMap {
    /// `max |UᵀU − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.entries.transpose() * &self.entries;
        let id = DMatrix::<f64>::identity(gram.nrows(), gram.ncols());
        (gram - id).amax()
    }

    pub fn apply<T: Amplitude>(&self, psi: &[T]) -> Vec<T> {
        assert_eq!(psi.len(), self.entries.ncols());
        (0..self.entries.nrows())
            .map(|r| {
                let mut acc = T::ZERO;
                for (c, &x) in psi.iter().enumerate() {
                    acc += x * self.entries[(r, c)];
                }
                acc
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &DenseLevelMap) -> f64 {
        (&self.entries - &other.entries).amax()
    }
}

fn check_dense(rows: usize, cols: usize) -> Result<()> {
    if rows > DENSE_SIDE_LIMIT || cols > DENSE_SIDE_LIMIT || rows * cols > DENSE_ENTRY_LIMIT {
        return Err(Error::DenseTooLarge {
            rows,
            cols,
            limit: DENSE_SIDE_LIMIT,
        });
    }
    Ok(())
}

/// Materializes `U[r][β] = a[|r ∩ β|]`.
pub fn build_dense_map(coeffs: &MapCoefficients) -> Result<DenseLevelMap> {
    let (n, i) = (coeffs.n, coeffs.level);
    let rows = level_size(n, i + 1);
    let cols = level_size(n, i);
    check_dense(rows, cols)?;
    let targets = level_mask_vec(n, i + 1);
    let sources = level_mask_vec(n, i);
    let entries = DMatrix::from_fn(rows, cols, |r, c| {
        coeffs.a[(targets[r] & sources[c]).count_ones() as usize]
    });
    Ok(DenseLevelMap {
        n,
        level: i,
        entries,
    })
}

/// The 0/1 superset matrix: entry 1 iff the column set is contained in the row set.
pub fn superset_matrix(n: usize, i: usize) -> Result<DMatrix<f64>> {
    let rows = level_size(n, i + 1);
    let cols = level_size(n, i);
    check_dense(rows, cols)?;
    let targets = level_mask_vec(n, i + 1);
    let sources = level_mask_vec(n, i);
    Ok(DMatrix::from_fn(rows, cols, |r, c| {
        if sources[c] & targets[r] == sources[c] {
            1.0
        } else {
            0.0
        }
    }))
}

/// Closest column-orthonormal matrix to the superset map via a dense SVD,
/// `M = A Λ B  ⇒  U = A B`.
pub fn svd_closest_unitary(n: usize, i: usize) -> Result<DenseLevelMap> {
    check_mappable(n, i)?;
    let m = superset_matrix(n, i)?;
    let svd = m.svd(true, true);
    let max_sv = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * max_sv {
        return Err(Error::RankDeficient { n, level: i });
    }
    let left = svd.u.expect("left singular vectors requested");
    let right = svd.v_t.expect("right singular vectors requested");
    Ok(DenseLevelMap {
        n,
        level: i,
        entries: left * right,
    })
}

/// Reads the overlap-class value of every entry of a dense map. Returns `None`
/// if two entries in the same overlap class differ by more than `tol`.
pub fn classify_by_overlap(map: &DenseLevelMap, tol: f64) -> Option<Vec<f64>> {
    let (n, i) = (map.n, map.level);
    let targets = level_mask_vec(n, i + 1);
    let sources = level_mask_vec(n, i);
    let mut values: Vec<Option<f64>> = vec![None; i + 1];
    for (r, &t) in targets.iter().enumerate() {
        for (c, &s) in sources.iter().enumerate() {
            let k = lattice::overlap(
                lattice::ItemSet::from_bits(t),
                lattice::ItemSet::from_bits(s),
            );
            let v = map.entries[(r, c)];
            match values[k] {
                None => values[k] = Some(v),
                Some(prev) if (prev - v).abs() > tol => return None,
                Some(_) => {}
            }
        }
    }
    values.into_iter().collect()
}
