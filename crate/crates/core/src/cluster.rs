//! Point sets, axis-aligned cells and the adaptive cluster tree.
//!
//! Nodes are numbered in postorder (children before parents, the root is the
//! last node). Every node owns a contiguous range of the postorder
//! permutation for both the row (target) and column (source) points, so a
//! node's index set is `perm[range]`.

use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::Serialize;

use crate::error::{Result, SmashError};

/// Which side of the kernel matrix a point set feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Role {
    /// Row points `X`.
    Target,
    /// Column points `Y`.
    Source,
}

/// A finite set of `dim`-dimensional points stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    role: Role,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>, role: Role) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(SmashError::invalid(format!("point dimension {dim} not in 1..=3")));
        }
        if coords.len() % dim != 0 {
            return Err(SmashError::invalid("coordinate count is not a multiple of the dimension"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(SmashError::invalid("non-finite point coordinate"));
        }
        Ok(PointSet { dim, coords, role })
    }

    pub fn from_points(points: &[Vec<f64>], role: Role) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(1);
        if points.iter().any(|p| p.len() != dim) {
            return Err(SmashError::invalid("points have inconsistent dimensions"));
        }
        Self::new(dim, points.iter().flatten().copied().collect(), role)
    }

    pub fn from_1d(xs: &[f64], role: Role) -> Result<Self> {
        Self::new(1, xs.to_vec(), role)
    }

    /// Reads one point per line; columns separated by whitespace or commas.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn load(path: impl AsRef<Path>, role: Role) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, role)
    }

    pub fn parse(text: &str, role: Role) -> Result<Self> {
        let mut dim = None;
        let mut coords = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut count = 0;
            for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                let v: f64 = tok.parse().map_err(|_| {
                    SmashError::Format(format!("line {}: cannot parse `{tok}`", lineno + 1))
                })?;
                coords.push(v);
                count += 1;
            }
            match dim {
                None => dim = Some(count),
                Some(d) if d != count => {
                    return Err(SmashError::Format(format!(
                        "line {}: expected {d} columns, found {count}",
                        lineno + 1
                    )))
                }
                _ => {}
            }
        }
        Self::new(dim.unwrap_or(1), coords, role)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

/// Axis-aligned cell. Its center and half-diagonal play the role of the
/// center and radius in the separation test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        BoundingBox { lo, hi }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        BoundingBox::new(vec![lo], vec![hi])
    }

    /// Tight box around every point of all given sets.
    pub fn enclosing<'a>(sets: impl IntoIterator<Item = &'a PointSet>) -> Option<Self> {
        let mut out: Option<BoundingBox> = None;
        for set in sets {
            for p in set.iter() {
                match out.as_mut() {
                    None => out = Some(BoundingBox::new(p.to_vec(), p.to_vec())),
                    Some(b) => {
                        for (k, &c) in p.iter().enumerate() {
                            b.lo[k] = b.lo[k].min(c);
                            b.hi[k] = b.hi[k].max(c);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn radius(&self) -> f64 {
        0.5 * self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().enumerate().all(|(k, &c)| c >= self.lo[k] && c <= self.hi[k])
    }

    pub fn split(&self, axis: usize) -> (BoundingBox, BoundingBox, f64) {
        let mid = 0.5 * (self.lo[axis] + self.hi[axis]);
        let mut lower = self.clone();
        let mut upper = self.clone();
        lower.hi[axis] = mid;
        upper.lo[axis] = mid;
        (lower, upper, mid)
    }
}

pub fn center_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.center()
        .iter()
        .zip(b.center())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `δa + δb ≤ τ |a − b|`.
pub fn well_separated(a: &BoundingBox, b: &BoundingBox, tau: f64) -> bool {
    let dist = center_distance(a, b);
    dist > 0.0 && a.radius() + b.radius() <= tau * dist
}

/// Validated separation ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationParams {
    tau: f64,
}

impl SeparationParams {
    pub const MAX_TAU: f64 = 0.7;

    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(SmashError::invalid(format!("separation ratio {tau} not in (0, 1)")));
        }
        Ok(SeparationParams { tau })
    }

    /// Same as [`SeparationParams::new`] but also enforces `τ ≤ 0.7`.
    pub fn capped(tau: f64) -> Result<Self> {
        if tau > Self::MAX_TAU {
            return Err(SmashError::invalid(format!("separation ratio {tau} exceeds {}", Self::MAX_TAU)));
        }
        Self::new(tau)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// How a cell is split when it holds too many points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branching {
    /// Bisect one axis per level, cycling through the axes (binary tree).
    Alternating,
    /// Bisect every axis at once (`2^d` children).
    Full,
}

impl fmt::Display for Branching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branching::Alternating => f.write_str("alternating"),
            Branching::Full => f.write_str("full"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub level: usize,
    pub bbox: BoundingBox,
    /// Positions in the row postorder permutation.
    pub rows: Range<usize>,
    /// Positions in the column postorder permutation.
    pub cols: Range<usize>,
}

impl ClusterNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    nodes: Vec<ClusterNode>,
    levels: Vec<Vec<usize>>,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
    leaf_capacity: usize,
    branching: Branching,
    dim: usize,
}

struct Builder<'a> {
    rows: &'a PointSet,
    cols: &'a PointSet,
    capacity: usize,
    branching: Branching,
    nodes: Vec<ClusterNode>,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
}

const MAX_DEPTH: usize = 64;

impl Builder<'_> {
    fn tight_extent_is_zero(&self, rows: &[usize], cols: &[usize]) -> bool {
        let first = rows
            .first()
            .map(|&i| self.rows.point(i))
            .or_else(|| cols.first().map(|&j| self.cols.point(j)));
        let Some(first) = first else { return true };
        rows.iter().all(|&i| self.rows.point(i) == first)
            && cols.iter().all(|&j| self.cols.point(j) == first)
    }

    /// Returns the id of the subtree root.
    fn build(&mut self, bbox: BoundingBox, rows: Vec<usize>, cols: Vec<usize>, level: usize) -> usize {
        let row_start = self.row_perm.len();
        let col_start = self.col_perm.len();
        let mut children = Vec::new();
        let split = rows.len().max(cols.len()) > self.capacity
            && level < MAX_DEPTH
            && !self.tight_extent_is_zero(&rows, &cols);
        if split {
            let d = bbox.dim();
            let parts: Vec<(BoundingBox, Vec<usize>, Vec<usize>)> = match self.branching {
                Branching::Alternating => {
                    let axis = (level - 1) % d;
                    let (lower, upper, mid) = bbox.split(axis);
                    let (rl, ru): (Vec<_>, Vec<_>) = rows.iter().partition(|&&i| self.rows.point(i)[axis] <= mid);
                    let (cl, cu): (Vec<_>, Vec<_>) = cols.iter().partition(|&&j| self.cols.point(j)[axis] <= mid);
                    vec![(lower, rl, cl), (upper, ru, cu)]
                }
                Branching::Full => {
                    let mids = bbox.center();
                    let code = |p: &[f64]| -> usize {
                        (0..d).fold(0, |acc, k| acc | (usize::from(p[k] > mids[k]) << (d - 1 - k)))
                    };
                    let mut parts: Vec<(BoundingBox, Vec<usize>, Vec<usize>)> = (0..1usize << d)
                        .map(|c| {
                            let mut b = bbox.clone();
                            for k in 0..d {
                                if c >> (d - 1 - k) & 1 == 1 {
                                    b.lo[k] = mids[k];
                                } else {
                                    b.hi[k] = mids[k];
                                }
                            }
                            (b, Vec::new(), Vec::new())
                        })
                        .collect();
                    for &i in &rows {
                        parts[code(self.rows.point(i))].1.push(i);
                    }
                    for &j in &cols {
                        parts[code(self.cols.point(j))].2.push(j);
                    }
                    parts
                }
            };
            for (b, r, c) in parts {
                if r.is_empty() && c.is_empty() {
                    continue;
                }
                children.push(self.build(b, r, c, level + 1));
            }
        } else {
            self.row_perm.extend_from_slice(&rows);
            self.col_perm.extend_from_slice(&cols);
        }
        let id = self.nodes.len();
        for &c in &children {
            self.nodes[c].parent = Some(id);
        }
        self.nodes.push(ClusterNode {
            id,
            parent: None,
            children,
            level,
            bbox,
            rows: row_start..self.row_perm.len(),
            cols: col_start..self.col_perm.len(),
        });
        id
    }
}

impl ClusterTree {
    /// Builds the tree over the tight bounding box of both point sets.
    pub fn build(rows: &PointSet, cols: &PointSet, leaf_capacity: usize, branching: Branching) -> Result<Self> {
        let domain = BoundingBox::enclosing([rows, cols])
            .ok_or_else(|| SmashError::invalid("empty point set"))?;
        Self::build_in(rows, cols, leaf_capacity, branching, domain)
    }

    /// Builds the tree over an explicit root domain, which must contain every point.
    pub fn build_in(
        rows: &PointSet,
        cols: &PointSet,
        leaf_capacity: usize,
        branching: Branching,
        domain: BoundingBox,
    ) -> Result<Self> {
        if rows.is_empty() || cols.is_empty() {
            return Err(SmashError::invalid("empty point set"));
        }
        if leaf_capacity == 0 {
            return Err(SmashError::invalid("leaf capacity must be positive"));
        }
        if rows.dim() != cols.dim() || domain.dim() != rows.dim() {
            return Err(SmashError::invalid("row, column and domain dimensions differ"));
        }
        if rows.iter().chain(cols.iter()).any(|p| !domain.contains(p)) {
            return Err(SmashError::invalid("domain does not contain every point"));
        }
        let mut b = Builder {
            rows,
            cols,
            capacity: leaf_capacity,
            branching,
            nodes: Vec::new(),
            row_perm: Vec::with_capacity(rows.len()),
            col_perm: Vec::with_capacity(cols.len()),
        };
        b.build(domain, (0..rows.len()).collect(), (0..cols.len()).collect(), 1);
        Ok(Self::assemble(b.nodes, b.row_perm, b.col_perm, leaf_capacity, branching, rows.dim()))
    }

    fn assemble(
        nodes: Vec<ClusterNode>,
        row_perm: Vec<usize>,
        col_perm: Vec<usize>,
        leaf_capacity: usize,
        branching: Branching,
        dim: usize,
    ) -> Self {
        let depth = nodes.iter().map(|n| n.level).max().unwrap_or(1);
        let mut levels = vec![Vec::new(); depth];
        // Preorder walk from the root gives left-to-right order within each level.
        let mut stack = vec![nodes.len() - 1];
        while let Some(i) = stack.pop() {
            levels[nodes[i].level - 1].push(i);
            stack.extend(nodes[i].children.iter().rev());
        }
        ClusterTree { nodes, levels, row_perm, col_perm, leaf_capacity, branching, dim }
    }

    /// Rebuilds a tree from stored topology, checking that it is a postordered
    /// tree whose index ranges nest and whose permutations are complete.
    pub fn from_parts(
        nodes: Vec<ClusterNode>,
        row_perm: Vec<usize>,
        col_perm: Vec<usize>,
        leaf_capacity: usize,
        branching: Branching,
        dim: usize,
    ) -> Result<Self> {
        let bad = |msg: String| Err(SmashError::Format(msg));
        let n = nodes.len();
        if n == 0 {
            return bad("tree has no nodes".into());
        }
        for perm in [&row_perm, &col_perm] {
            let mut seen = vec![false; perm.len()];
            for &p in perm.iter() {
                if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                    return bad("index permutation is not a permutation".into());
                }
            }
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i || node.bbox.dim() != dim || node.level == 0 {
                return bad(format!("node {i} is malformed"));
            }
            if node.rows.end > row_perm.len() || node.cols.end > col_perm.len() {
                return bad(format!("node {i} ranges exceed the permutation"));
            }
            match node.parent {
                None if i + 1 != n => return bad(format!("node {i} has no parent")),
                Some(p) if p <= i || p >= n || !nodes[p].children.contains(&i) => {
                    return bad(format!("node {i} has an inconsistent parent"))
                }
                _ => {}
            }
            let (mut r, mut c) = (node.rows.start, node.cols.start);
            for &ch in &node.children {
                let child = nodes.get(ch).filter(|_| ch < i).ok_or_else(|| SmashError::Format(format!("node {i} child {ch}")))?;
                if child.parent != Some(i) || child.level != node.level + 1 || child.rows.start != r || child.cols.start != c {
                    return bad(format!("child {ch} of node {i} does not nest"));
                }
                r = child.rows.end;
                c = child.cols.end;
            }
            if !node.children.is_empty() && (r != node.rows.end || c != node.cols.end) {
                return bad(format!("children of node {i} do not cover it"));
            }
        }
        let root = &nodes[n - 1];
        if root.level != 1 || root.rows != (0..row_perm.len()) || root.cols != (0..col_perm.len()) {
            return bad("root does not own every index".into());
        }
        Ok(Self::assemble(nodes, row_perm, col_perm, leaf_capacity, branching, dim))
    }

    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &ClusterNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of levels `L` (the root is level 1).
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Node ids at `level` (1-based), left to right.
    pub fn level(&self, level: usize) -> &[usize] {
        &self.levels[level - 1]
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn branching(&self) -> Branching {
        self.branching
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn num_rows(&self) -> usize {
        self.row_perm.len()
    }

    pub fn num_cols(&self) -> usize {
        self.col_perm.len()
    }

    /// Postorder position → original row index.
    pub fn row_perm(&self) -> &[usize] {
        &self.row_perm
    }

    pub fn col_perm(&self) -> &[usize] {
        &self.col_perm
    }

    /// Original row indices owned by node `i`.
    pub fn row_indices(&self, i: usize) -> &[usize] {
        &self.row_perm[self.nodes[i].rows.clone()]
    }

    pub fn col_indices(&self, i: usize) -> &[usize] {
        &self.col_perm[self.nodes[i].cols.clone()]
    }

    pub fn siblings(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let parent = self.nodes[i].parent;
        parent
            .into_iter()
            .flat_map(move |p| self.nodes[p].children.iter().copied())
            .filter(move |&k| k != i)
    }

    pub fn is_ancestor(&self, anc: usize, mut node: usize) -> bool {
        while let Some(p) = self.nodes[node].parent {
            if p == anc {
                return true;
            }
            node = p;
        }
        false
    }

    /// Every nonleaf has `2^d` children (or 2 for alternating trees) and all
    /// leaves sit on the same level.
    pub fn is_perfect(&self) -> bool {
        let arity = match self.branching {
            Branching::Alternating => 2,
            Branching::Full => 1 << self.dim,
        };
        let depth = self.num_levels();
        self.nodes
            .iter()
            .all(|n| if n.is_leaf() { n.level == depth } else { n.children.len() == arity })
    }

    pub fn max_children(&self) -> usize {
        self.nodes.iter().map(|n| n.children.len()).max().unwrap_or(0)
    }

    pub fn separated(&self, i: usize, j: usize, tau: f64) -> bool {
        well_separated(&self.nodes[i].bbox, &self.nodes[j].bbox, tau)
    }

    /// Nearfield sets `N_i` for every node, computed top down.
    ///
    /// `N_i` collects the siblings of `i`, the children of members of
    /// `N_parent`, and the leaves in `N_parent` whose cells are not well
    /// separated from the cell of `i`. The root has an empty set. Members
    /// are sorted by node id.
    pub fn nearfield_sets(&self, tau: f64) -> Vec<Vec<usize>> {
        let mut near: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for level in self.levels.iter().skip(1) {
            for &i in level {
                let p = self.nodes[i].parent.expect("nonroot node has a parent");
                let mut set: Vec<usize> = self.siblings(i).filter(|&k| !self.separated(i, k, tau)).collect();
                for &m in &near[p] {
                    let mnode = &self.nodes[m];
                    if mnode.is_leaf() {
                        if !self.separated(i, m, tau) {
                            set.push(m);
                        }
                    } else {
                        set.extend(mnode.children.iter().copied().filter(|&k| !self.separated(i, k, tau)));
                    }
                }
                set.sort_unstable();
                set.dedup();
                near[i] = set;
            }
        }
        near
    }

    pub fn nearfield_set(&self, i: usize, tau: f64) -> Result<Vec<usize>> {
        if i >= self.nodes.len() {
            return Err(SmashError::invalid(format!("node {i} not in tree")));
        }
        Ok(self.nearfield_sets(tau).swap_remove(i))
    }

    /// Debug dump: node id, level, cell and index ranges.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Dump<'a> {
            levels: usize,
            leaf_capacity: usize,
            branching: Branching,
            nodes: &'a [ClusterNode],
        }
        Ok(serde_json::to_string_pretty(&Dump {
            levels: self.num_levels(),
            leaf_capacity: self.leaf_capacity,
            branching: self.branching,
            nodes: &self.nodes,
        })?)
    }
}

/// Which hierarchical format the block partition is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Structure {
    Hss,
    H2,
}

impl std::str::FromStr for Structure {
    type Err = SmashError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hss" => Ok(Structure::Hss),
            "h2" => Ok(Structure::H2),
            other => Err(SmashError::Unknown { kind: "structure", name: other.to_string() }),
        }
    }
}

/// Admissible leaves (compressed couplings) and inadmissible leaves (dense
/// nearfield blocks). Together they tile the matrix exactly once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LeafSets {
    pub admissible: Vec<(usize, usize)>,
    pub inadmissible: Vec<(usize, usize)>,
}

pub fn leaf_sets(tree: &ClusterTree, tau: f64, structure: Structure) -> Result<LeafSets> {
    let mut sets = LeafSets::default();
    match structure {
        Structure::Hss => {
            if tree.max_children() > 2 {
                return Err(SmashError::Unsupported("HSS leaf sets need a binary tree".into()));
            }
            for node in tree.nodes() {
                for &a in &node.children {
                    for &b in &node.children {
                        if a != b {
                            sets.admissible.push((a, b));
                        }
                    }
                }
                if node.is_leaf() {
                    sets.inadmissible.push((node.id, node.id));
                }
            }
        }
        Structure::H2 => {
            let root = tree.root();
            let mut stack = vec![(root, root)];
            while let Some((i, j)) = stack.pop() {
                let (ni, nj) = (tree.node(i), tree.node(j));
                if i != root && tree.separated(i, j, tau) {
                    sets.admissible.push((i, j));
                } else if ni.is_leaf() && nj.is_leaf() {
                    sets.inadmissible.push((i, j));
                } else if ni.is_leaf() {
                    stack.extend(nj.children.iter().map(|&c| (i, c)));
                } else if nj.is_leaf() {
                    stack.extend(ni.children.iter().map(|&c| (c, j)));
                } else {
                    for &a in &ni.children {
                        stack.extend(nj.children.iter().map(|&b| (a, b)));
                    }
                }
            }
            sets.admissible.sort_unstable();
            sets.inadmissible.sort_unstable();
        }
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::from_1d(xs, Role::Target).unwrap()
    }

    #[test]
    fn eight_points_split_into_four_pairs() {
        let xs: Vec<f64> = (0..8).map(|k| (k as f64 + 0.5) / 8.0).collect();
        let p = line(&xs);
        let tree = ClusterTree::build_in(&p, &p, 3, Branching::Alternating, BoundingBox::interval(0.0, 1.0)).unwrap();
        assert_eq!(tree.num_levels(), 3);
        let leaves: Vec<_> = tree.leaves().collect();
        assert_eq!(leaves.len(), 4);
        for &l in &leaves {
            assert_eq!(tree.row_indices(l).len(), 2);
        }
        // postorder: leaves of the left subtree first, root last
        assert_eq!(tree.root(), tree.len() - 1);
        assert_eq!(tree.row_perm(), &[0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn capacity_exceeding_n_gives_single_node() {
        let xs: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let p = line(&xs);
        let tree = ClusterTree::build(&p, &p, 50, Branching::Alternating).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.num_levels(), 1);
        assert!(tree.node(tree.root()).is_leaf());
    }

    #[test]
    fn empty_half_is_discarded() {
        let xs: Vec<f64> = (0..8).map(|k| 0.5 * k as f64 / 8.0).collect();
        let p = line(&xs);
        let tree = ClusterTree::build_in(&p, &p, 2, Branching::Alternating, BoundingBox::interval(0.0, 1.0)).unwrap();
        let root = tree.node(tree.root());
        assert_eq!(root.children.len(), 1, "upper half [0.5, 1] holds no point");
        let child = tree.node(root.children[0]);
        assert_eq!(child.level, 2);
        assert_eq!(child.bbox, BoundingBox::interval(0.0, 0.5));
        for leaf in tree.leaves() {
            assert!(tree.row_indices(leaf).len() <= 2);
        }
    }

    #[test]
    fn errors_on_bad_input() {
        let p = line(&[0.0, 1.0]);
        let empty = line(&[]);
        assert!(ClusterTree::build(&empty, &p, 2, Branching::Full).is_err());
        assert!(ClusterTree::build(&p, &p, 0, Branching::Full).is_err());
    }

    #[test]
    fn separation_examples() {
        let a = BoundingBox::interval(0.0, 1.0);
        let b = BoundingBox::interval(2.0, 3.0);
        assert!(well_separated(&a, &b, 0.5));
        assert!(!well_separated(&a, &a, 0.5));
        assert!(!well_separated(&a, &BoundingBox::interval(1.0, 2.0), 0.5));
    }

    #[test]
    fn root_has_empty_nearfield_and_children_see_their_sibling() {
        let xs: Vec<f64> = (0..64).map(|k| (k as f64 + 0.5) / 64.0).collect();
        let p = line(&xs);
        let tree = ClusterTree::build(&p, &p, 4, Branching::Alternating).unwrap();
        let near = tree.nearfield_sets(0.5);
        assert!(near[tree.root()].is_empty());
        let kids = &tree.node(tree.root()).children;
        assert_eq!(near[kids[0]], vec![kids[1]]);
        assert_eq!(near[kids[1]], vec![kids[0]]);
        for (i, set) in near.iter().enumerate() {
            if i != tree.root() {
                assert!(set.len() <= 2, "node {i} has {} nearfield nodes", set.len());
            }
        }
    }

    #[test]
    fn hss_leaf_sets_are_siblings_and_diagonal() {
        let xs: Vec<f64> = (0..32).map(|k| k as f64).collect();
        let p = line(&xs);
        let tree = ClusterTree::build(&p, &p, 4, Branching::Alternating).unwrap();
        let sets = leaf_sets(&tree, 0.6, Structure::Hss).unwrap();
        for &(i, j) in &sets.admissible {
            assert_eq!(tree.node(i).parent, tree.node(j).parent);
            assert_ne!(i, j);
        }
        assert_eq!(sets.inadmissible.len(), tree.leaves().count());
        assert!(sets.inadmissible.iter().all(|&(i, j)| i == j && tree.node(i).is_leaf()));
    }

    #[test]
    fn two_adjacent_leaves_have_no_admissible_pair() {
        let p = line(&[0.1, 0.2, 0.8, 0.9]);
        let tree = ClusterTree::build(&p, &p, 2, Branching::Full).unwrap();
        assert_eq!(tree.num_levels(), 2);
        let sets = leaf_sets(&tree, 0.5, Structure::H2).unwrap();
        assert!(sets.admissible.is_empty());
        assert_eq!(sets.inadmissible.len(), 4);
    }

    #[test]
    fn hss_sets_reject_quadtrees() {
        let pts: Vec<Vec<f64>> = (0..64).map(|k| vec![(k % 8) as f64, (k / 8) as f64]).collect();
        let p = PointSet::from_points(&pts, Role::Target).unwrap();
        let tree = ClusterTree::build(&p, &p, 4, Branching::Full).unwrap();
        assert!(leaf_sets(&tree, 0.6, Structure::Hss).is_err());
    }

    #[test]
    fn parse_points_with_mixed_separators() {
        let p = PointSet::parse("# header\n0.0, 1.0\n2 3\n\n4.5\t-1\n", Role::Source).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.len(), 3);
        assert_eq!(p.point(2), &[4.5, -1.0]);
        assert!(PointSet::parse("1 2\n3\n", Role::Source).is_err());
    }

    #[test]
    fn json_dump_mentions_every_node() {
        let p = line(&[0.0, 0.3, 0.6, 0.9]);
        let tree = ClusterTree::build(&p, &p, 1, Branching::Alternating).unwrap();
        let v: serde_json::Value = serde_json::from_str(&tree.to_json().unwrap()).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), tree.len());
    }
}
