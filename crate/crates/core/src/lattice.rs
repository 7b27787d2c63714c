//! Subset lattice over `N ≤ 32` items.
//!
//! Sets are bit masks (bit `k - 1` holds item `k`). Within a level, sets are
//! ordered colexicographically, which for fixed-size sets coincides with the
//! numeric order of their masks. That makes rank/unrank a sum of binomials and
//! lets [`enumerate_level`] walk a level with Gosper's hack.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported item count.
pub const MAX_ITEMS: usize = 32;

const PASCAL_ROWS: usize = MAX_ITEMS + 1;

const fn pascal() -> [[u64; PASCAL_ROWS]; PASCAL_ROWS] {
    let mut t = [[0u64; PASCAL_ROWS]; PASCAL_ROWS];
    let mut n = 0;
    while n < PASCAL_ROWS {
        t[n][0] = 1;
        let mut k = 1;
        while k <= n {
            t[n][k] = t[n - 1][k - 1] + t[n - 1][k];
            k += 1;
        }
        n += 1;
    }
    t
}

static PASCAL: [[u64; PASCAL_ROWS]; PASCAL_ROWS] = pascal();

/// Exact binomial coefficient `C(n, k)`, zero outside `0 ≤ k ≤ n`.
///
/// Overflow of `u64` is reported rather than wrapped.
pub fn binomial(n: u64, k: i64) -> Result<u64> {
    if k < 0 || k as u64 > n {
        return Ok(0);
    }
    let k = (k as u64).min(n - k as u64);
    if (n as usize) < PASCAL_ROWS {
        return Ok(PASCAL[n as usize][k as usize]);
    }
    // Each partial product is itself a binomial, so the division is exact.
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc
            .checked_mul((n - j) as u128)
            .ok_or(Error::BinomialOverflow { n, k })?
            / (j + 1) as u128;
    }
    u64::try_from(acc).map_err(|_| Error::BinomialOverflow { n, k })
}

/// Table lookup for the small binomials used in hot loops (`n ≤ 32`).
#[inline]
pub(crate) fn choose(n: usize, k: usize) -> usize {
    if k > n {
        0
    } else {
        PASCAL[n][k] as usize
    }
}

/// Binomial over signed arguments, zero whenever either argument is out of range.
pub(crate) fn choose_signed(n: i64, k: i64) -> u64 {
    if n < 0 || k < 0 || k > n {
        0
    } else {
        binomial(n as u64, k).expect("binomial of lattice-sized arguments")
    }
}

/// Number of sets at level `i` of the lattice over `n` items, `C(n, i)`.
pub fn level_size(n: usize, i: usize) -> usize {
    assert!(n <= MAX_ITEMS, "item count {n} exceeds {MAX_ITEMS}");
    choose(n, i)
}

/// A subset of the items `1..=N`.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemSet(u32);

impl ItemSet {
    pub const EMPTY: ItemSet = ItemSet(0);

    pub const fn from_bits(bits: u32) -> Self {
        ItemSet(bits)
    }

    /// Builds a set from 1-based item labels.
    pub fn from_items<I: IntoIterator<Item = usize>>(items: I) -> Result<Self> {
        let mut bits = 0u32;
        for item in items {
            if item == 0 || item > MAX_ITEMS {
                return Err(Error::ItemOutOfRange { item, n: MAX_ITEMS });
            }
            bits |= 1 << (item - 1);
        }
        Ok(ItemSet(bits))
    }

    #[inline]
    pub const fn bits(self) -> u32 {
        self.0
    }

    /// Number of members, which is also the lattice level of the set.
    #[inline]
    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub const fn contains(self, item: usize) -> bool {
        item >= 1 && item <= MAX_ITEMS && self.0 & (1 << (item - 1)) != 0
    }

    #[inline]
    pub const fn is_subset_of(self, other: ItemSet) -> bool {
        self.0 & other.0 == self.0
    }

    #[inline]
    pub const fn with(self, item: usize) -> ItemSet {
        ItemSet(self.0 | (1 << (item - 1)))
    }

    #[inline]
    pub const fn without(self, item: usize) -> ItemSet {
        ItemSet(self.0 & !(1 << (item - 1)))
    }

    /// Largest member, or `None` for the empty set.
    pub const fn max_item(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(32 - self.0.leading_zeros() as usize)
        }
    }

    /// True when every member lies in `1..=n`.
    pub const fn fits(self, n: usize) -> bool {
        n >= MAX_ITEMS || self.0 >> n == 0
    }

    /// Members in increasing order, 1-based.
    pub fn items(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(tz + 1)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.items().collect()
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (j, item) in self.items().enumerate() {
            if j > 0 {
                f.write_str(",")?;
            }
            write!(f, "{item}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for ItemSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.items())
    }
}

impl<'de> Deserialize<'de> for ItemSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(deserializer)?;
        ItemSet::from_items(items).map_err(serde::de::Error::custom)
    }
}

/// Position of a set within its level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LevelIndex {
    pub level: usize,
    pub rank: usize,
}

/// Colexicographic rank: `Σ_j C(c_j, j)` over the 0-based members `c_1 < c_2 < …`.
#[inline]
pub fn rank_of_bits(mut bits: u32) -> usize {
    let mut rank = 0;
    let mut j = 1;
    while bits != 0 {
        let c = bits.trailing_zeros() as usize;
        rank += choose(c, j);
        bits &= bits - 1;
        j += 1;
    }
    rank
}

pub fn rank_set(s: ItemSet) -> LevelIndex {
    LevelIndex {
        level: s.len(),
        rank: rank_of_bits(s.bits()),
    }
}

/// Inverse of [`rank_set`] for sets over `n` items.
pub fn unrank(idx: LevelIndex, n: usize) -> Result<ItemSet> {
    if n > MAX_ITEMS || idx.level > n || idx.rank >= level_size(n, idx.level) {
        return Err(Error::RankOutOfRange {
            n,
            level: idx.level,
            rank: idx.rank,
        });
    }
    let mut rank = idx.rank;
    let mut bits = 0u32;
    let mut upper = n;
    for j in (1..=idx.level).rev() {
        // Largest c with C(c, j) ≤ rank.
        let mut c = upper - 1;
        while choose(c, j) > rank {
            c -= 1;
        }
        rank -= choose(c, j);
        bits |= 1 << c;
        upper = c;
    }
    Ok(ItemSet(bits))
}

/// `|a ∩ b|`.
#[inline]
pub fn overlap(a: ItemSet, b: ItemSet) -> usize {
    (a.0 & b.0).count_ones() as usize
}

/// Iterator over the masks of level `i`, in rank order.
#[derive(Clone, Debug)]
pub struct LevelMasks {
    next: Option<u64>,
    limit: u64,
}

impl Iterator for LevelMasks {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        let cur = self.next?;
        if cur >= self.limit {
            self.next = None;
            return None;
        }
        self.next = if cur == 0 {
            None
        } else {
            // Gosper's hack: next larger integer with the same popcount.
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            Some((((r ^ cur) >> 2) / c) | r)
        };
        Some(cur as u32)
    }
}

pub fn level_masks(n: usize, i: usize) -> LevelMasks {
    assert!(n <= MAX_ITEMS, "item count {n} exceeds {MAX_ITEMS}");
    let limit = 1u64 << n;
    LevelMasks {
        next: (i <= n).then(|| (1u64 << i) - 1),
        limit: if i == 0 { 1 } else { limit },
    }
}

/// All `C(n, i)` sets of size `i`, in rank order.
pub fn enumerate_level(n: usize, i: usize) -> Vec<ItemSet> {
    level_masks(n, i).map(ItemSet).collect()
}

pub(crate) fn level_mask_vec(n: usize, i: usize) -> Vec<u32> {
    let mut v = Vec::with_capacity(level_size(n, i));
    v.extend(level_masks(n, i));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[usize]) -> ItemSet {
        ItemSet::from_items(items.iter().copied()).unwrap()
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2).unwrap(), 6);
        assert_eq!(binomial(4, 1).unwrap(), 4);
        assert_eq!(binomial(16, 8).unwrap(), 12870);
        assert_eq!(binomial(5, -1).unwrap(), 0);
        assert_eq!(binomial(5, 6).unwrap(), 0);
        assert_eq!(binomial(0, 0).unwrap(), 1);
        assert!(binomial(100, 50)
            .unwrap_err()
            .to_string()
            .contains("overflow"));
        assert_eq!(binomial(62, 31).unwrap(), 465428353255261088);
        assert_eq!(binomial(120, 2).unwrap(), 7140);
    }

    #[test]
    fn pascal_rule() {
        for n in 1..=20u64 {
            for k in 1..n as i64 {
                assert_eq!(
                    binomial(n, k).unwrap(),
                    binomial(n - 1, k - 1).unwrap() + binomial(n - 1, k).unwrap()
                );
            }
        }
    }

    #[test]
    fn level_sizes() {
        assert_eq!(level_size(4, 0), 1);
        assert_eq!(level_size(3, 2), 3);
        assert_eq!(level_size(10, 5), 252);
    }

    #[test]
    fn rank_basics() {
        assert_eq!(rank_set(ItemSet::EMPTY), LevelIndex { level: 0, rank: 0 });
        assert_eq!(rank_set(set(&[1])), LevelIndex { level: 1, rank: 0 });
        assert_eq!(
            unrank(LevelIndex { level: 0, rank: 0 }, 4).unwrap(),
            ItemSet::EMPTY
        );
        assert_eq!(
            unrank(LevelIndex { level: 2, rank: 0 }, 4).unwrap(),
            set(&[1, 2])
        );
        assert_eq!(
            unrank(LevelIndex { level: 2, rank: 1 }, 4).unwrap(),
            set(&[1, 3])
        );
        assert_eq!(
            unrank(LevelIndex { level: 2, rank: 2 }, 4).unwrap(),
            set(&[2, 3])
        );
        assert!(unrank(LevelIndex { level: 2, rank: 6 }, 4).is_err());
        assert!(unrank(LevelIndex { level: 5, rank: 0 }, 4).is_err());
    }

    #[test]
    fn roundtrip_n6_level3() {
        let sets = enumerate_level(6, 3);
        assert_eq!(sets.len(), 20);
        for s in &sets {
            assert_eq!(unrank(rank_set(*s), 6).unwrap(), *s);
        }
    }

    #[test]
    fn roundtrip_n7_level2() {
        for r in 0..21 {
            let idx = LevelIndex { level: 2, rank: r };
            assert_eq!(rank_set(unrank(idx, 7).unwrap()), idx);
        }
    }

    #[test]
    fn exhaustive_bijection_up_to_10() {
        for n in 0..=10 {
            for i in 0..=n {
                let sets = enumerate_level(n, i);
                assert_eq!(sets.len(), level_size(n, i));
                for (r, s) in sets.iter().enumerate() {
                    assert_eq!(s.len(), i);
                    assert!(s.fits(n));
                    assert_eq!(rank_set(*s), LevelIndex { level: i, rank: r });
                    assert_eq!(unrank(LevelIndex { level: i, rank: r }, n).unwrap(), *s);
                }
            }
        }
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(
            enumerate_level(3, 2),
            vec![set(&[1, 2]), set(&[1, 3]), set(&[2, 3])]
        );
        assert_eq!(enumerate_level(4, 0), vec![ItemSet::EMPTY]);
        assert_eq!(enumerate_level(3, 4), vec![]);
        assert_eq!(enumerate_level(32, 32).len(), 1);
        assert_eq!(enumerate_level(32, 31).len(), 32);
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap(set(&[1, 2]), set(&[1, 3])), 1);
        assert_eq!(overlap(set(&[1, 2]), set(&[3, 4])), 0);
        let s = set(&[2, 5, 7]);
        assert_eq!(overlap(s, s), 3);
    }

    #[test]
    fn itemset_display_and_serde() {
        let s = set(&[3, 1, 7]);
        assert_eq!(s.to_string(), "{1,3,7}");
        assert_eq!(serde_json::to_string(&s).unwrap(), "[1,3,7]");
        let back: ItemSet = serde_json::from_str("[7,3,1]").unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<ItemSet>("[0]").is_err());
        assert_eq!(s.max_item(), Some(7));
        assert_eq!(ItemSet::EMPTY.max_item(), None);
    }

    proptest! {
        #[test]
        fn overlap_symmetric_and_bounded(a in any::<u32>(), b in any::<u32>()) {
            let (a, b) = (ItemSet::from_bits(a), ItemSet::from_bits(b));
            prop_assert_eq!(overlap(a, b), overlap(b, a));
            prop_assert!(overlap(a, b) <= a.len().min(b.len()));
        }

        #[test]
        fn rank_roundtrip_any_set(bits in any::<u32>()) {
            let s = ItemSet::from_bits(bits);
            prop_assert_eq!(unrank(rank_set(s), 32).unwrap(), s);
        }
    }
}
