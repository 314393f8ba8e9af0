use super::{PlaneTree, TreeError};

/// A binary tree: every vertex has an optional left and an optional right
/// child.
///
/// Vertex labels are arbitrary; equality compares shapes only (preorder
/// sequence of which children are present).
#[derive(Clone, Debug)]
pub struct BinaryTree {
    root: Option<usize>,
    left: Vec<Option<usize>>,
    right: Vec<Option<usize>>,
}

impl BinaryTree {
    pub fn empty() -> Self {
        Self { root: None, left: Vec::new(), right: Vec::new() }
    }

    /// Validates that the child maps form a single tree rooted at `root`
    /// covering every vertex.
    pub fn new(root: Option<usize>, left: Vec<Option<usize>>, right: Vec<Option<usize>>) -> Result<Self, TreeError> {
        let n = left.len();
        if right.len() != n {
            return Err(TreeError::InvalidBinary("left and right maps differ in length".into()));
        }
        let Some(root) = root else {
            return if n == 0 {
                Ok(Self::empty())
            } else {
                Err(TreeError::InvalidBinary("vertices without a root".into()))
            };
        };
        if root >= n {
            return Err(TreeError::InvalidBinary(format!("root {root} out of range")));
        }
        let mut seen = vec![false; n];
        seen[root] = true;
        for c in left.iter().chain(right.iter()).flatten() {
            if *c >= n {
                return Err(TreeError::InvalidBinary(format!("child {c} out of range")));
            }
            if seen[*c] {
                return Err(TreeError::InvalidBinary(format!("vertex {c} has two parents or is the root")));
            }
            seen[*c] = true;
        }
        // Parents are unique and the root has none, so the only remaining
        // defects (missing links, cycles) show up as unreachable vertices.
        let tree = Self { root: Some(root), left, right };
        if tree.preorder().len() != n {
            return Err(TreeError::InvalidBinary("not connected".into()));
        }
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn left(&self, v: usize) -> Option<usize> {
        self.left[v]
    }

    pub fn right(&self, v: usize) -> Option<usize> {
        self.right[v]
    }

    /// Vertices in preorder (vertex, left subtree, right subtree).
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack: Vec<usize> = self.root.into_iter().collect();
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.right[v]);
            stack.extend(self.left[v]);
        }
        out
    }

    /// Preorder sequence of `(has_left, has_right)`; a bijective shape code.
    pub fn shape_code(&self) -> Vec<(bool, bool)> {
        self.preorder().into_iter().map(|v| (self.left[v].is_some(), self.right[v].is_some())).collect()
    }

    /// Same shape, relabelled in preorder.
    pub fn canonical(&self) -> Self {
        let order = self.preorder();
        let mut label = vec![0; self.len()];
        for (i, &v) in order.iter().enumerate() {
            label[v] = i;
        }
        let left = order.iter().map(|&v| self.left[v].map(|c| label[c])).collect();
        let right = order.iter().map(|&v| self.right[v].map(|c| label[c])).collect();
        Self { root: self.root.map(|_| 0), left, right }
    }
}

impl PartialEq for BinaryTree {
    fn eq(&self, other: &Self) -> bool {
        self.shape_code() == other.shape_code()
    }
}

impl Eq for BinaryTree {}

/// The rotation correspondence from plane trees with `n` vertices to binary
/// trees with `n - 1` vertices.
///
/// Each non-root vertex keeps the edge to its first child, which becomes its
/// left child; its next sibling becomes its right child. The root is removed
/// and its first child becomes the binary root. Plane vertex `v >= 1` maps to
/// binary vertex `v - 1`, which is already a preorder labelling.
pub fn rotation_to_binary(t: &PlaneTree) -> BinaryTree {
    let m = t.len() - 1;
    let mut left = vec![None; m];
    let mut right = vec![None; m];
    for v in 0..t.len() {
        let kids = t.children(v);
        if v > 0 {
            left[v - 1] = kids.first().map(|c| c - 1);
        }
        for pair in kids.windows(2) {
            right[pair[0] - 1] = Some(pair[1] - 1);
        }
    }
    let root = t.children(0).first().map(|c| c - 1);
    BinaryTree { root, left, right }
}

/// Inverse of [`rotation_to_binary`].
pub fn rotation_from_binary(b: &BinaryTree) -> PlaneTree {
    // Plane children of a binary vertex u: left(u) followed by its chain of
    // right links. The plane root's children: the binary root and its chain.
    fn chain(b: &BinaryTree, first: Option<usize>) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = first;
        while let Some(c) = cur {
            out.push(c);
            cur = b.right[c];
        }
        out
    }

    let mut counts = Vec::with_capacity(b.len() + 1);
    // Stack entries are plane vertices; None is the plane root.
    let mut stack: Vec<Option<usize>> = vec![None];
    while let Some(v) = stack.pop() {
        let kids = match v {
            None => chain(b, b.root),
            Some(u) => chain(b, b.left[u]),
        };
        counts.push(kids.len());
        stack.extend(kids.into_iter().rev().map(Some));
    }
    PlaneTree::from_child_counts(&counts).expect("rotation preimage is a valid plane tree")
}
