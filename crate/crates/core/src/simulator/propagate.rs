//! Level-to-level propagation `ψ'_r = Σ_α a[|r ∩ α|] ψ_α`.
//!
//! [`propagate_direct`] evaluates the double sum over (target, source) pairs.
//! [`propagate_moments`] rewrites the map in the binomial basis,
//! `a_k = Σ_t c_t C(k, t)`, so that
//!
//! ```text
//! ψ'_r = Σ_t c_t Σ_{T ⊆ r, |T| = t} D_t(T),   D_t(T) = Σ_{α ⊇ T} ψ_α,
//! ```
//!
//! and evaluates both inner sums with one-item-at-a-time cascades down and
//! back up the lattice. The cost drops from `N_i · N_{i+1}` to roughly
//! `N · Σ_{t ≤ i+1} N_t`.

use rayon::prelude::*;

use crate::amplitude::Amplitude;
use crate::lattice::{choose, level_mask_vec, level_size};

/// Propagation strategy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Propagator {
    /// Double loop over all (target, source) pairs.
    Direct,
    /// Subset-sum cascades in the binomial basis.
    Moments,
    /// Direct for small levels, moments otherwise.
    #[default]
    Auto,
}

/// Above this many (target, source) pairs `Auto` switches to the cascade.
pub const AUTO_DIRECT_PAIR_LIMIT: usize = 1 << 24;

impl Propagator {
    pub(crate) fn resolve(self, n: usize, level: usize) -> Propagator {
        match self {
            Propagator::Auto => {
                if level_size(n, level) * level_size(n, level + 1) <= AUTO_DIRECT_PAIR_LIMIT {
                    Propagator::Direct
                } else {
                    Propagator::Moments
                }
            }
            other => other,
        }
    }
}

const PAR_CHUNK: usize = 256;

fn coefficient_table(a: &[f64]) -> [f64; 32] {
    let mut t = [0.0; 32];
    t[..a.len()].copy_from_slice(a);
    t
}

pub(crate) fn propagate_direct<T: Amplitude>(
    n: usize,
    level: usize,
    psi: &[T],
    a: &[f64],
) -> Vec<T> {
    let sources: Vec<(u32, T)> = level_mask_vec(n, level)
        .into_iter()
        .zip(psi.iter().copied())
        .filter(|&(_, x)| x != T::ZERO)
        .collect();
    let table = coefficient_table(a);
    let targets = level_mask_vec(n, level + 1);
    let mut out = vec![T::ZERO; targets.len()];
    out.par_chunks_mut(PAR_CHUNK)
        .zip(targets.par_chunks(PAR_CHUNK))
        .for_each(|(out, targets)| {
            for (o, &r) in out.iter_mut().zip(targets) {
                let mut acc = T::ZERO;
                for &(m, x) in &sources {
                    // Overlaps never exceed the source level, which is < 16.
                    acc += x * table[((r & m).count_ones() & 31) as usize];
                }
                *o = acc;
            }
        });
    out
}

/// Differences of `a` in the binomial basis: `c_t = Σ_k (−1)^(t−k) C(t, k) a_k`.
pub fn binomial_moments(a: &[f64]) -> Vec<f64> {
    (0..a.len())
        .map(|t| {
            (0..=t)
                .map(|k| {
                    let sign = if (t - k) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * choose(t, k) as f64 * a[k]
                })
                .sum()
        })
        .collect()
}

/// `out(R) = Σ_{x ∈ R} input(R \ x)` for every `R` at the level of `masks`.
pub(crate) fn sum_over_subsets<T: Amplitude>(masks: &[u32], input: &[T]) -> Vec<T> {
    let mut out = vec![T::ZERO; masks.len()];
    out.par_chunks_mut(PAR_CHUNK)
        .zip(masks.par_chunks(PAR_CHUNK))
        .for_each(|(out, masks)| {
            let mut members = [0usize; 32];
            for (o, &r) in out.iter_mut().zip(masks) {
                let s = collect_members(r, &mut members);
                // Removing member m keeps the colex terms below it and shifts
                // the ones above down by one position.
                let mut suffix = 0usize;
                let mut suffix_at = [0usize; 32];
                for j in (0..s).rev() {
                    suffix_at[j] = suffix;
                    suffix += choose(members[j], j);
                }
                let mut prefix = 0usize;
                let mut acc = T::ZERO;
                for j in 0..s {
                    acc += input[prefix + suffix_at[j]];
                    prefix += choose(members[j], j + 1);
                }
                *o = acc;
            }
        });
    out
}

/// `out(T) = Σ_{x ∉ T, x < n} input(T ∪ x)` for every `T` at the level of `masks`.
pub(crate) fn sum_over_supersets<T: Amplitude>(n: usize, masks: &[u32], input: &[T]) -> Vec<T> {
    let mut out = vec![T::ZERO; masks.len()];
    out.par_chunks_mut(PAR_CHUNK)
        .zip(masks.par_chunks(PAR_CHUNK))
        .for_each(|(out, masks)| {
            let mut members = [0usize; 32];
            for (o, &t) in out.iter_mut().zip(masks) {
                let s = collect_members(t, &mut members);
                // Inserting x after the first m members keeps their terms,
                // adds C(x, m + 1) and shifts the rest up by one position.
                let mut suffix_at = [0usize; 33];
                for j in (0..s).rev() {
                    suffix_at[j] = suffix_at[j + 1] + choose(members[j], j + 2);
                }
                let mut prefix = 0usize;
                let mut m = 0usize;
                let mut acc = T::ZERO;
                for x in 0..n {
                    if m < s && members[m] == x {
                        prefix += choose(x, m + 1);
                        m += 1;
                        continue;
                    }
                    acc += input[prefix + choose(x, m + 1) + suffix_at[m]];
                }
                *o = acc;
            }
        });
    out
}

#[inline]
fn collect_members(mut bits: u32, members: &mut [usize; 32]) -> usize {
    let mut s = 0;
    while bits != 0 {
        members[s] = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        s += 1;
    }
    s
}

fn scale<T: Amplitude>(v: &mut [T], factor: f64) {
    for x in v {
        *x = *x * factor;
    }
}

pub(crate) fn propagate_moments<T: Amplitude>(
    n: usize,
    level: usize,
    psi: &[T],
    a: &[f64],
) -> Vec<T> {
    let i = level;
    let c = binomial_moments(a);
    let masks: Vec<Vec<u32>> = (0..=i + 1).map(|t| level_mask_vec(n, t)).collect();

    // down[t](T) = Σ_{α ⊇ T} ψ_α; each α is reached through i − t one-item steps.
    let mut down: Vec<Vec<T>> = vec![Vec::new(); i + 1];
    down[i] = psi.to_vec();
    for t in (0..i).rev() {
        let mut d = sum_over_supersets(n, &masks[t], &down[t + 1]);
        scale(&mut d, 1.0 / (i - t) as f64);
        down[t] = d;
    }

    // Horner-style climb: each up-step to level s divides by (i + 2 − s) so
    // that the path multiplicity (i + 1 − t)! of a level-t term cancels.
    let mut w: Vec<T> = down[0].iter().map(|&x| x * c[0]).collect();
    for s in 1..=i {
        let mut next = sum_over_subsets(&masks[s], &w);
        let inv = 1.0 / (i + 2 - s) as f64;
        for (x, &d) in next.iter_mut().zip(&down[s]) {
            *x = *x * inv + d * c[s];
        }
        w = next;
    }
    sum_over_subsets(&masks[i + 1], &w)
}
