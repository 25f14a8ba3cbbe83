use serde::{Deserialize, Serialize};

use crate::embed::AffinityMatrix;
use crate::{Error, Result};

/// One agglomeration step. `left < right`; ids below `n_leaves` are leaves,
/// id `n_leaves + i` is the cluster created by merge `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64, usize)", into = "(usize, usize, f64, usize)")]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

impl From<(usize, usize, f64, usize)> for Merge {
    fn from((left, right, height, size): (usize, usize, f64, usize)) -> Self {
        Self {
            left,
            right,
            height,
            size,
        }
    }
}

impl From<Merge> for (usize, usize, f64, usize) {
    fn from(m: Merge) -> Self {
        (m.left, m.right, m.height, m.size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Check the structural invariants: `n - 1` merges, children created
    /// before use and used once, consistent sizes, finite non-negative
    /// heights.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_leaves;
        let err = |msg: String| Err(Error::invalid("dendrogram", msg));
        if n == 0 {
            return err("no leaves".into());
        }
        if self.merges.len() != n - 1 {
            return err(format!("{} merges for {n} leaves", self.merges.len()));
        }
        let mut size = vec![1usize; n];
        size.resize(2 * n - 1, 0);
        let mut used = vec![false; 2 * n - 1];
        for (i, m) in self.merges.iter().enumerate() {
            let id = n + i;
            if m.left >= m.right || m.right >= id {
                return err(format!("merge {i} has invalid children ({}, {})", m.left, m.right));
            }
            if used[m.left] || used[m.right] {
                return err(format!("merge {i} reuses a child"));
            }
            if !m.height.is_finite() || m.height < 0.0 {
                return err(format!("merge {i} has height {}", m.height));
            }
            if m.size != size[m.left] + size[m.right] {
                return err(format!("merge {i} has size {} instead of {}", m.size, size[m.left] + size[m.right]));
            }
            used[m.left] = true;
            used[m.right] = true;
            size[id] = m.size;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Dendrogram = serde_json::from_str(text)?;
        d.validate()?;
        Ok(d)
    }

    /// Merge heights are non-decreasing in merge order.
    pub fn is_monotone(&self) -> bool {
        self.merges.windows(2).all(|w| w[0].height <= w[1].height)
    }
}

/// Linkage rules accepted by configuration. Only average linkage is built.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
    Ward,
}

pub fn linkage(a: &AffinityMatrix, method: Linkage) -> Result<Dendrogram> {
    match method {
        Linkage::Average => average_linkage(a),
        other => Err(Error::Config(format!("{other:?} linkage is not supported; use average"))),
    }
}

/// Pair ordering key: distance, then the (smaller id, larger id) pair.
#[derive(Debug, Clone, Copy)]
struct Key {
    dist: f64,
    lo: usize,
    hi: usize,
}

impl Key {
    fn new(dist: f64, a: usize, b: usize) -> Self {
        Self {
            dist,
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    fn less(&self, other: &Key) -> bool {
        self.dist < other.dist
            || (self.dist == other.dist && (self.lo, self.hi) < (other.lo, other.hi))
    }
}

/// UPGMA agglomeration over a dissimilarity matrix.
///
/// Each step merges the active pair with the smallest distance (ties: the
/// lexicographically smallest cluster-id pair) and updates
/// `d(u∪v, w) = (|u| d(u,w) + |v| d(v,w)) / (|u| + |v|)`. Every slot caches
/// its nearest active partner, so a step costs O(n) plus a rescan of the
/// slots whose partner disappeared.
pub fn average_linkage(a: &AffinityMatrix) -> Result<Dendrogram> {
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("affinity matrix", "average linkage needs at least 2 points"));
    }
    let mut d: Vec<f64> = a.matrix().iter().copied().collect();
    let at = |i: usize, j: usize| i * n + j;
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut active = vec![true; n];
    // nearest[i] = (key, partner slot)
    let mut nearest: Vec<Option<(Key, usize)>> = vec![None; n];

    let scan = |i: usize, d: &[f64], ids: &[usize], active: &[bool]| -> Option<(Key, usize)> {
        let mut best: Option<(Key, usize)> = None;
        for j in 0..n {
            if j == i || !active[j] {
                continue;
            }
            let k = Key::new(d[i * n + j], ids[i], ids[j]);
            if best.as_ref().is_none_or(|(b, _)| k.less(b)) {
                best = Some((k, j));
            }
        }
        best
    };
    for i in 0..n {
        nearest[i] = scan(i, &d, &ids, &active);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let (mut best, mut bi) = (None::<Key>, usize::MAX);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            if let Some((k, _)) = nearest[i] {
                if best.as_ref().is_none_or(|b| k.less(b)) {
                    best = Some(k);
                    bi = i;
                }
            }
        }
        let key = best.expect("at least two active clusters");
        let bj = nearest[bi].expect("partner").1;
        let (i, j) = (bi.min(bj), bi.max(bj));

        let (si, sj) = (sizes[i] as f64, sizes[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let v = (si * d[at(i, k)] + sj * d[at(j, k)]) / (si + sj);
            d[at(i, k)] = v;
            d[at(k, i)] = v;
        }
        let new_id = n + step;
        merges.push(Merge {
            left: key.lo,
            right: key.hi,
            height: key.dist,
            size: sizes[i] + sizes[j],
        });
        active[j] = false;
        nearest[j] = None;
        ids[i] = new_id;
        sizes[i] += sizes[j];

        nearest[i] = scan(i, &d, &ids, &active);
        for k in 0..n {
            if !active[k] || k == i {
                continue;
            }
            match nearest[k] {
                Some((_, p)) if p == i || p == j => nearest[k] = scan(k, &d, &ids, &active),
                Some((cur, _)) => {
                    let cand = Key::new(d[at(k, i)], ids[k], ids[i]);
                    if cand.less(&cur) {
                        nearest[k] = Some((cand, i));
                    }
                }
                None => nearest[k] = scan(k, &d, &ids, &active),
            }
        }
    }
    Ok(Dendrogram { n_leaves: n, merges })
}

/// Flat clustering from applying every merge whose height is below `t`.
///
/// Cluster ids are contiguous from 0 and ordered by each cluster's smallest
/// leaf index.
pub fn cut(d: &Dendrogram, t: f64) -> Vec<usize> {
    let n = d.n_leaves;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut rep = Vec::with_capacity(d.merges.len());
    for m in &d.merges {
        let leaf = |id: usize, rep: &[usize]| if id < n { id } else { rep[id - n] };
        let (a, b) = (leaf(m.left, &rep), leaf(m.right, &rep));
        rep.push(a.min(b));
        if m.height < t {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[i] = label[r];
    }
    out
}

/// Number of distinct cluster ids in an assignment.
pub fn cluster_count(assignment: &[usize]) -> usize {
    let mut seen: Vec<usize> = assignment.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}
