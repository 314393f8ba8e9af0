use num_bigint::BigUint;

use super::{PlaneTree, TreeError};

/// Largest size accepted by [`enumerate_plane_trees`] (`C_11 = 58786` trees).
pub const MAX_ENUMERATION_SIZE: usize = 12;

/// Catalan number `C_k = binom(2k, k) / (k + 1)`, exactly.
pub fn catalan(k: u32) -> BigUint {
    // C_{j+1} = C_j * 2(2j + 1) / (j + 2), each step an exact division.
    let mut c = BigUint::from(1u32);
    for j in 0..k {
        c = c * (2 * (2 * u64::from(j) + 1)) / (u64::from(j) + 2);
    }
    c
}

/// All `C_{n-1}` plane trees with `n` vertices, in lexicographic order of
/// their preorder child-count sequences.
pub fn enumerate_plane_trees(n: usize) -> Result<Vec<PlaneTree>, TreeError> {
    if n == 0 {
        return Err(TreeError::EmptyTree);
    }
    if n > MAX_ENUMERATION_SIZE {
        return Err(TreeError::SizeTooLarge { n });
    }
    let mut out = Vec::new();
    let mut code = Vec::with_capacity(n);
    extend(n, 1, &mut code, &mut out);
    Ok(out)
}

/// `open` is the number of child slots still to be filled.
fn extend(n: usize, open: usize, code: &mut Vec<usize>, out: &mut Vec<PlaneTree>) {
    let placed = code.len();
    if placed == n {
        if open == 0 {
            out.push(PlaneTree::from_child_counts(code).expect("valid by construction"));
        }
        return;
    }
    if open == 0 {
        return;
    }
    let remaining = n - placed - 1;
    // After this vertex, `open - 1 + k` slots must be filled by `remaining`
    // vertices, and must stay positive unless this is the last vertex.
    for k in 0..=remaining {
        let next = open - 1 + k;
        if next > remaining || (next == 0 && remaining > 0) {
            continue;
        }
        code.push(k);
        extend(n, next, code, out);
        code.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalan_values() {
        let expected: [u64; 8] = [1, 1, 2, 5, 14, 42, 132, 429];
        for (k, &c) in expected.iter().enumerate() {
            assert_eq!(catalan(k as u32), BigUint::from(c));
        }
        // binom(60, 30) / 31
        assert_eq!(catalan(30).to_string(), "3814986502092304");
        assert_eq!(catalan(100).to_string().len(), 57);
    }

    #[test]
    fn enumeration_counts_match_catalan() {
        for n in 1..=9 {
            let trees = enumerate_plane_trees(n).unwrap();
            assert_eq!(BigUint::from(trees.len()), catalan(n as u32 - 1), "n = {n}");
        }
    }

    #[test]
    fn enumeration_is_sorted_and_distinct() {
        let codes: Vec<_> = enumerate_plane_trees(7).unwrap().iter().map(|t| t.child_counts()).collect();
        assert!(codes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn enumeration_guard() {
        assert_eq!(enumerate_plane_trees(13), Err(TreeError::SizeTooLarge { n: 13 }));
        assert_eq!(enumerate_plane_trees(0), Err(TreeError::EmptyTree));
        assert_eq!(enumerate_plane_trees(1).unwrap(), vec![PlaneTree::singleton()]);
    }
}
