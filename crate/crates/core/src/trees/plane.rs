use std::fmt;
use std::str::FromStr;

use super::TreeError;

const NO_PARENT: usize = usize::MAX;

/// A rooted plane tree with vertices numbered in depth-first preorder.
///
/// Vertex 0 is the root and `parent(i) < i` for every other vertex. Children
/// are stored contiguously (CSR layout) in their plane order. Because the
/// numbering is canonical, two trees are equal exactly when their preorder
/// child-count sequences are equal, which is what the derived `PartialEq`
/// compares.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PlaneTree {
    parent: Vec<usize>,
    child_start: Vec<usize>,
    child_list: Vec<usize>,
}

impl PlaneTree {
    /// The single-vertex tree.
    pub fn singleton() -> Self {
        Self { parent: vec![NO_PARENT], child_start: vec![0, 0], child_list: Vec::new() }
    }

    /// Decodes a preorder child-count (Lukasiewicz) sequence.
    pub fn from_child_counts(counts: &[usize]) -> Result<Self, TreeError> {
        let n = counts.len();
        if n == 0 {
            return Err(TreeError::EmptyTree);
        }
        let mut parent = vec![NO_PARENT; n];
        // (vertex, children still to be attached)
        let mut open: Vec<(usize, usize)> = Vec::new();
        for (v, &k) in counts.iter().enumerate() {
            if v > 0 {
                let Some(top) = open.last_mut() else {
                    return Err(TreeError::InvalidCode(format!(
                        "sequence closes after {v} vertices but has {n}"
                    )));
                };
                parent[v] = top.0;
                top.1 -= 1;
                if top.1 == 0 {
                    open.pop();
                }
            }
            if k > 0 {
                open.push((v, k));
            }
        }
        if !open.is_empty() {
            return Err(TreeError::InvalidCode("sequence ends with unfilled child slots".into()));
        }

        let mut child_start = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for &k in counts {
            child_start.push(acc);
            acc += k;
        }
        child_start.push(acc);
        let mut cursor = child_start.clone();
        let mut child_list = vec![0; n - 1];
        for (v, &p) in parent.iter().enumerate().skip(1) {
            child_list[cursor[p]] = v;
            cursor[p] += 1;
        }
        Ok(Self { parent, child_start, child_list })
    }

    /// Builds a tree from an arbitrary parent map (`None` marks the root).
    ///
    /// Children are ordered by their index in `parents`; the result is
    /// renumbered into preorder.
    pub fn from_parents(parents: &[Option<usize>]) -> Result<Self, TreeError> {
        let n = parents.len();
        if n == 0 {
            return Err(TreeError::EmptyTree);
        }
        let mut children = vec![Vec::new(); n];
        let mut root = None;
        for (v, p) in parents.iter().enumerate() {
            match *p {
                None if root.is_none() => root = Some(v),
                None => return Err(TreeError::InvalidCode("more than one root".into())),
                Some(p) if p >= n || p == v => {
                    return Err(TreeError::InvalidCode(format!("bad parent {p} for vertex {v}")))
                }
                Some(p) => children[p].push(v),
            }
        }
        let root = root.ok_or_else(|| TreeError::InvalidCode("no root".into()))?;
        let mut counts = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            counts.push(children[v].len());
            stack.extend(children[v].iter().rev().copied());
        }
        if counts.len() != n {
            // Vertices on a cycle are unreachable from the root.
            return Err(TreeError::InvalidCode("parent map is not connected".into()));
        }
        Self::from_child_counts(&counts)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    /// Always false: a plane tree has at least its root.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        match self.parent[v] {
            NO_PARENT => None,
            p => Some(p),
        }
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.child_list[self.child_start[v]..self.child_start[v + 1]]
    }

    pub fn child_count(&self, v: usize) -> usize {
        self.child_start[v + 1] - self.child_start[v]
    }

    /// Preorder child-count sequence; a bijective code for the tree.
    pub fn child_counts(&self) -> Vec<usize> {
        (0..self.len()).map(|v| self.child_count(v)).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.child_list.len()
    }
}

/// Space-separated preorder child counts, e.g. `2 0 1 0`.
impl fmt::Display for PlaneTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in 0..self.len() {
            if v > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", self.child_count(v))?;
        }
        Ok(())
    }
}

impl FromStr for PlaneTree {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let counts = s
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| TreeError::InvalidCode(format!("bad token {t:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_child_counts(&counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_small_tree() {
        let t: PlaneTree = "2 0 1 0".parse().unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.children(0), &[1, 2]);
        assert_eq!(t.children(2), &[3]);
        assert_eq!(t.parent(3), Some(2));
        assert_eq!(t.parent(0), None);
        assert_eq!(t.edge_count(), 3);
        assert_eq!(t.to_string(), "2 0 1 0");
    }

    #[test]
    fn rejects_invalid_codes() {
        assert_eq!(PlaneTree::from_child_counts(&[]), Err(TreeError::EmptyTree));
        assert!(PlaneTree::from_child_counts(&[0, 0]).is_err());
        assert!(PlaneTree::from_child_counts(&[2, 0]).is_err());
        assert!(PlaneTree::from_child_counts(&[1, 1]).is_err());
        assert!("1 x".parse::<PlaneTree>().is_err());
    }

    #[test]
    fn from_parents_renumbers_into_preorder() {
        // 0 -> {1, 2}, 1 -> {3}; preorder is 0 1 3 2.
        let t = PlaneTree::from_parents(&[None, Some(0), Some(0), Some(1)]).unwrap();
        assert_eq!(t.child_counts(), vec![2, 1, 0, 0]);
        assert!(PlaneTree::from_parents(&[None, Some(2), Some(1)]).is_err());
        assert!(PlaneTree::from_parents(&[None, None]).is_err());
    }

    #[test]
    fn singleton() {
        let t = PlaneTree::singleton();
        assert_eq!(t, PlaneTree::from_child_counts(&[0]).unwrap());
        assert_eq!(t.to_string(), "0");
    }
}
