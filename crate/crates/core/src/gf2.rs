//! Dense square linear systems over GF(2) with rows packed into `u64` words.

/// Inverse of a square GF(2) matrix of size `dim <= 64`, rows packed little-endian
/// (bit `j` of `rows[i]` is entry `(i, j)`). Returns `None` if singular.
pub fn invert(rows: &[u64]) -> Option<Vec<u64>> {
    let dim = rows.len();
    assert!(dim <= 64, "GF(2) systems are limited to 64 unknowns");
    // Low word: working matrix; high word: accumulated inverse.
    let mut aug: Vec<u128> = rows
        .iter()
        .enumerate()
        .map(|(i, &r)| (r as u128) | (1u128 << (64 + i)))
        .collect();
    for col in 0..dim {
        let pivot = (col..dim).find(|&r| (aug[r] >> col) & 1 == 1)?;
        aug.swap(col, pivot);
        let p = aug[col];
        for (r, row) in aug.iter_mut().enumerate() {
            if r != col && (*row >> col) & 1 == 1 {
                *row ^= p;
            }
        }
    }
    Some(aug.iter().map(|r| (r >> 64) as u64).collect())
}

/// `inverse · rhs` where `rhs` is a packed column vector.
#[inline]
pub fn apply(inverse: &[u64], rhs: u64) -> u64 {
    inverse
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, row)| acc | (((row & rhs).count_ones() as u64 & 1) << i))
}

/// Rank of a set of packed row vectors.
pub fn rank(rows: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::new();
    for &r in rows {
        let mut v = r;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}
