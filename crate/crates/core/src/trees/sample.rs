use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use super::{PlaneTree, TreeError};

/// Default vertex cap for Galton-Watson sampling.
pub const DEFAULT_SIZE_CAP: usize = 10_000_000;

/// One Geom(1/2) draw, `P(k) = 2^{-(k+1)}`: the number of trailing zero bits
/// of uniform random words.
pub fn geom_half<R: RngCore + ?Sized>(rng: &mut R) -> usize {
    let mut acc = 0;
    loop {
        let word = rng.next_u64();
        if word != 0 {
            return acc + word.trailing_zeros() as usize;
        }
        acc += 64;
    }
}

/// Samples a Galton-Watson tree with Geom(1/2) offspring.
///
/// The tree is critical, hence almost surely finite but with infinite mean
/// size; growth beyond `size_cap` vertices aborts with
/// [`TreeError::CapExceeded`].
pub fn sample_ggw<R: RngCore + ?Sized>(rng: &mut R, size_cap: usize) -> Result<PlaneTree, TreeError> {
    let counts = sample_ggw_counts(rng, size_cap)?;
    PlaneTree::from_child_counts(&counts)
}

/// Preorder child counts of a Geom(1/2) Galton-Watson tree.
pub(crate) fn sample_ggw_counts<R: RngCore + ?Sized>(
    rng: &mut R,
    size_cap: usize,
) -> Result<Vec<usize>, TreeError> {
    assert!(size_cap >= 1, "size_cap must be positive");
    let mut counts = Vec::new();
    let mut open: usize = 1;
    while open > 0 {
        if counts.len() == size_cap {
            return Err(TreeError::CapExceeded { cap: size_cap });
        }
        let k = geom_half(rng);
        counts.push(k);
        open = open - 1 + k;
    }
    Ok(counts)
}

/// Uniformly random plane tree with `n` vertices, in O(n).
///
/// A uniform arrangement of `n - 1` up-steps and `n` down-steps is rotated
/// to start just after the first global minimum of its partial sums (cycle
/// lemma); the rotated word `U^{k_1} D U^{k_2} D ... U^{k_n} D` is the
/// Lukasiewicz code with child counts `k_1, ..., k_n`. Each tree corresponds
/// to exactly `2n - 1` words, so the result is uniform over all
/// `C_{n-1}` trees.
pub fn sample_uniform_plane_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PlaneTree, TreeError> {
    if n == 0 {
        return Err(TreeError::EmptyTree);
    }
    let len = 2 * n - 1;
    let mut up = vec![false; len];
    up[..n - 1].fill(true);
    up.shuffle(rng);

    let mut height: i64 = 0;
    let mut min = 0;
    let mut argmin = 0;
    for (i, &u) in up.iter().enumerate() {
        height += if u { 1 } else { -1 };
        if height < min {
            min = height;
            argmin = i;
        }
    }
    let start = (argmin + 1) % len;

    let mut counts = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..len {
        if up[(start + i) % len] {
            k += 1;
        } else {
            counts.push(k);
            k = 0;
        }
    }
    PlaneTree::from_child_counts(&counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    /// Replays a fixed list of words.
    struct Scripted(Vec<u64>, usize);

    impl RngCore for Scripted {
        fn next_u32(&mut self) -> u32 {
            self.next_u64() as u32
        }
        fn next_u64(&mut self) -> u64 {
            let w = self.0[self.1 % self.0.len()];
            self.1 += 1;
            w
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            for b in dst {
                *b = self.next_u64() as u8;
            }
        }
    }

    #[test]
    fn odd_word_gives_leaf_root() {
        let mut rng = Scripted(vec![1], 0);
        assert_eq!(sample_ggw(&mut rng, 10).unwrap(), PlaneTree::singleton());
    }

    #[test]
    fn scripted_counts() {
        // draws 2, 0, 1, 0
        let mut rng = Scripted(vec![0b100, 1, 0b10, 1], 0);
        let t = sample_ggw(&mut rng, 10).unwrap();
        assert_eq!(t.to_string(), "2 0 1 0");
    }

    #[test]
    fn zero_words_extend_the_count() {
        let mut rng = Scripted(vec![0, 0b1000], 0);
        assert_eq!(geom_half(&mut rng), 67);
    }

    #[test]
    fn cap_is_reported() {
        // every vertex has two children: never terminates
        let mut rng = Scripted(vec![0b100], 0);
        assert_eq!(sample_ggw(&mut rng, 50), Err(TreeError::CapExceeded { cap: 50 }));
    }

    #[test]
    fn uniform_sampler_sizes() {
        let mut rng = trial_rng(1, 0);
        assert_eq!(sample_uniform_plane_tree(1, &mut rng).unwrap(), PlaneTree::singleton());
        for n in [2, 3, 10, 1000] {
            let t = sample_uniform_plane_tree(n, &mut rng).unwrap();
            assert_eq!(t.len(), n);
            assert!((1..n).all(|v| t.parent(v).unwrap() < v));
        }
        assert_eq!(sample_uniform_plane_tree(0, &mut rng), Err(TreeError::EmptyTree));
    }
}
