#![allow(dead_code)]

use std::collections::HashMap;

use plane_parking::PlaneTree;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Rearranges `v` into the next lexicographic permutation; false after the
/// last one.
pub fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot has a successor");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Every multiset of exactly `k` elements of `0..n`, as a sorted vector.
pub fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            go(n, k, v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Pearson chi-square p-value of observed counts against equal cell
/// probabilities over `cells`, each key of `cells` counted once.
pub fn uniform_chi_square_p(counts: &HashMap<PlaneTree, u64>, cells: &[PlaneTree], samples: u64) -> f64 {
    let expected = samples as f64 / cells.len() as f64;
    let stat: f64 = cells
        .iter()
        .map(|t| {
            let o = *counts.get(t).unwrap_or(&0) as f64;
            (o - expected).powi(2) / expected
        })
        .sum();
    ChiSquared::new((cells.len() - 1) as f64).unwrap().sf(stat)
}
