//! Fill-reducing ordering by recursive level-structure bisection.
//!
//! Each subgraph is split at the middle level of a breadth-first level
//! structure rooted at a pseudo-peripheral node; the level set is the
//! separator and is numbered after both halves.

const LEAF_SIZE: usize = 16;
const UNSEEN: u32 = u32::MAX;

/// Returns `perm` with `perm[new] = old` for the graph given as CSR adjacency
/// (self loops are ignored).
pub fn nested_dissection(adj_ptr: &[usize], adj: &[usize]) -> Vec<usize> {
    let n = adj_ptr.len().saturating_sub(1);
    let mut ctx = Ctx {
        adj_ptr,
        adj,
        owner: vec![0; n],
        seen: vec![UNSEEN; n],
        next_tag: 1,
        stamp: 0,
    };
    let mut out = Vec::with_capacity(n);
    ctx.dissect((0..n).collect(), &mut out);
    debug_assert_eq!(out.len(), n);
    out
}

struct Ctx<'a> {
    adj_ptr: &'a [usize],
    adj: &'a [usize],
    owner: Vec<u32>,
    seen: Vec<u32>,
    next_tag: u32,
    stamp: u32,
}

impl Ctx<'_> {
    fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.adj_ptr[v]..self.adj_ptr[v + 1]]
    }

    fn degree_in(&self, v: usize, tag: u32) -> usize {
        self.neighbors(v)
            .iter()
            .filter(|&&w| w != v && self.owner[w] == tag)
            .count()
    }

    /// Level structure of the component of `root` among nodes owned by `tag`.
    fn levels(&mut self, root: usize, tag: u32) -> Vec<Vec<usize>> {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == UNSEEN {
            self.seen.fill(0);
            self.stamp = 1;
        }
        let stamp = self.stamp;
        self.seen[root] = stamp;
        let mut levels = vec![vec![root]];
        loop {
            let mut next = Vec::new();
            for &v in levels.last().unwrap() {
                for k in self.adj_ptr[v]..self.adj_ptr[v + 1] {
                    let w = self.adj[k];
                    if self.owner[w] == tag && self.seen[w] != stamp {
                        self.seen[w] = stamp;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                return levels;
            }
            levels.push(next);
        }
    }

    fn pseudo_peripheral(&mut self, start: usize, tag: u32) -> Vec<Vec<usize>> {
        let mut levels = self.levels(start, tag);
        for _ in 0..8 {
            let last = levels.last().unwrap();
            let candidate = *last
                .iter()
                .min_by_key(|&&v| self.degree_in(v, tag))
                .unwrap();
            let trial = self.levels(candidate, tag);
            if trial.len() > levels.len() {
                levels = trial;
            } else {
                break;
            }
        }
        levels
    }

    fn dissect(&mut self, nodes: Vec<usize>, out: &mut Vec<usize>) {
        if nodes.len() <= LEAF_SIZE {
            out.extend(nodes);
            return;
        }
        let tag = self.next_tag;
        self.next_tag += 1;
        for &v in &nodes {
            self.owner[v] = tag;
        }
        let levels = self.pseudo_peripheral(nodes[0], tag);
        let reached: usize = levels.iter().map(Vec::len).sum();
        if reached < nodes.len() {
            // disconnected: order the reached component and the rest separately
            let stamp = self.stamp;
            let (comp, rest): (Vec<usize>, Vec<usize>) =
                nodes.into_iter().partition(|&v| self.seen[v] == stamp);
            self.dissect(comp, out);
            self.dissect(rest, out);
            return;
        }
        if levels.len() < 3 {
            out.extend(nodes);
            return;
        }

        let half = nodes.len() / 2;
        let mut acc = 0;
        let mut mid = 1;
        for (i, level) in levels.iter().enumerate() {
            acc += level.len();
            if acc >= half {
                mid = i;
                break;
            }
        }
        let mid = mid.clamp(1, levels.len() - 2);

        // separator nodes without a neighbour on the far side join the near half
        let far_tag = self.next_tag;
        self.next_tag += 1;
        for level in &levels[mid + 1..] {
            for &v in level {
                self.owner[v] = far_tag;
            }
        }
        let mut near: Vec<usize> = levels[..mid].iter().flatten().copied().collect();
        let mut separator = Vec::new();
        for &v in &levels[mid] {
            if self.neighbors(v).iter().any(|&w| self.owner[w] == far_tag) {
                separator.push(v);
            } else {
                near.push(v);
            }
        }
        let far: Vec<usize> = levels[mid + 1..].iter().flatten().copied().collect();
        self.dissect(near, out);
        self.dissect(far, out);
        out.extend(separator);
    }
}
