//! Set partitions of [r], crossing detection, and cactus cycle profiles.
//!
//! A partition is stored as a restricted-growth string: `block_of[i]` is the
//! block index of element i, and block indices first appear in increasing
//! order, so each partition has exactly one encoding. For a non-crossing
//! partition the moment engine needs the cycle structure of the graph on
//! blocks whose r edges join consecutive elements of [r] cyclically; that
//! graph is a cactus, so its biconnected components are single cycles.

use super::MomentsError;

/// Hard enumeration cap: Bell(12) ≈ 4.2M partitions.
pub const MAX_ORDER_HARD: usize = 12;
/// Default cap used by CLI-level identity sweeps.
pub const DEFAULT_ORDER_CAP: usize = 10;

/// A set partition of [r] into t blocks, in restricted-growth form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    r: usize,
    block_of: Vec<usize>,
    t: usize,
}

impl Partition {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn block_count(&self) -> usize {
        self.t
    }

    pub fn block_of(&self) -> &[usize] {
        &self.block_of
    }

    /// Blocks as sorted element lists (0-based elements).
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.t];
        for (i, &b) in self.block_of.iter().enumerate() {
            out[b].push(i);
        }
        out
    }
}

/// Cycle structure of G(π): `cycle_lengths` is empty for crossing partitions
/// and sums to r otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleProfile {
    pub is_noncrossing: bool,
    pub cycle_lengths: Vec<usize>,
}

/// Visit every restricted-growth string of length r, passing the assignment
/// and its block count. Enumeration order is lexicographic in the string.
pub fn for_each_partition(
    r: usize,
    mut f: impl FnMut(&[usize], usize),
) -> Result<(), MomentsError> {
    if r == 0 || r > MAX_ORDER_HARD {
        return Err(MomentsError::CapExceeded(r));
    }
    let mut a = vec![0usize; r];
    // max_prefix[i] = max(a[0..=i]), maintained during the walk.
    let mut max_prefix = vec![0usize; r];
    loop {
        f(&a, max_prefix[r - 1] + 1);
        // Lexicographic successor: bump the rightmost position that can grow.
        let mut i = r;
        loop {
            if i == 1 {
                return Ok(());
            }
            i -= 1;
            if a[i] <= max_prefix[i - 1] {
                a[i] += 1;
                max_prefix[i] = max_prefix[i - 1].max(a[i]);
                for j in i + 1..r {
                    a[j] = 0;
                    max_prefix[j] = max_prefix[i];
                }
                break;
            }
        }
    }
}

/// All partitions of [r] into exactly t blocks; |Π(r,t)| is the Stirling
/// number S(r,t).
pub fn enumerate_partitions(r: usize, t: usize) -> Result<Vec<Partition>, MomentsError> {
    if t == 0 || t > r {
        return Err(MomentsError::Invalid(format!(
            "block count t = {t} outside 1..={r}"
        )));
    }
    let mut out = Vec::new();
    for_each_partition(r, |a, blocks| {
        if blocks == t {
            out.push(Partition {
                r,
                block_of: a.to_vec(),
                t,
            });
        }
    })?;
    Ok(out)
}

/// Non-crossing test in one left-to-right scan: maintain a stack of open
/// blocks; popping past a block that still has elements to the right means
/// some a₁ < b₁ < a₂ < b₂ pattern exists.
pub(crate) fn is_noncrossing(block_of: &[usize], t: usize) -> bool {
    let mut last = vec![0usize; t];
    for (i, &b) in block_of.iter().enumerate() {
        last[b] = i;
    }
    let mut seen = vec![false; t];
    let mut stack: Vec<usize> = Vec::with_capacity(t);
    for (i, &b) in block_of.iter().enumerate() {
        if !seen[b] {
            seen[b] = true;
            stack.push(b);
        } else {
            while let Some(&top) = stack.last() {
                if top == b {
                    break;
                }
                if last[top] > i {
                    return false;
                }
                stack.pop();
            }
            if stack.last() != Some(&b) {
                return false;
            }
        }
        if last[b] == i {
            stack.pop();
        }
    }
    true
}

/// Literal quadruple test (a₁ < b₁ < a₂ < b₂ across two blocks), used to
/// cross-check the linear scan on small r.
#[cfg(test)]
pub(crate) fn is_noncrossing_brute(block_of: &[usize]) -> bool {
    let r = block_of.len();
    for a1 in 0..r {
        for b1 in a1 + 1..r {
            if block_of[b1] == block_of[a1] {
                continue;
            }
            for a2 in b1 + 1..r {
                if block_of[a2] != block_of[a1] {
                    continue;
                }
                for b2 in a2 + 1..r {
                    if block_of[b2] == block_of[b1] {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Classify a partition: crossing partitions get an empty profile; for
/// non-crossing ones the cyclic consecutive-element multigraph on blocks is
/// decomposed into its cycles.
pub fn classify(pi: &Partition) -> CycleProfile {
    classify_assignment(&pi.block_of, pi.t)
}

pub(crate) fn classify_assignment(block_of: &[usize], t: usize) -> CycleProfile {
    if !is_noncrossing(block_of, t) {
        return CycleProfile {
            is_noncrossing: false,
            cycle_lengths: Vec::new(),
        };
    }
    let r = block_of.len();
    // Edges of G(π): i → i+1 cyclically, as block pairs. Self-loops are
    // length-1 cycles on their own; the rest go to the biconnected split.
    let mut lengths = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(r);
    for i in 0..r {
        let (a, b) = (block_of[i], block_of[(i + 1) % r]);
        if a == b {
            lengths.push(1);
        } else {
            edges.push((a, b));
        }
    }
    for component in biconnected_edge_components(t, &edges) {
        // Cactus invariant: every component is a single cycle, so its edge
        // count equals its vertex count.
        let mut verts: Vec<usize> = component
            .iter()
            .flat_map(|&e| [edges[e].0, edges[e].1])
            .collect();
        verts.sort_unstable();
        verts.dedup();
        assert_eq!(
            verts.len(),
            component.len(),
            "non-cycle biconnected component in G(π) for {block_of:?}"
        );
        lengths.push(component.len());
    }
    let total: usize = lengths.iter().sum();
    assert_eq!(total, r, "cycle lengths must sum to r for {block_of:?}");
    lengths.sort_unstable();
    CycleProfile {
        is_noncrossing: true,
        cycle_lengths: lengths,
    }
}

/// Biconnected components of a multigraph, as lists of edge indices.
/// Parallel edges are distinct edges (a parallel pair forms a 2-cycle), so
/// the DFS tracks the parent edge by index, not by endpoint.
fn biconnected_edge_components(vcount: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); vcount];
    for (idx, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, idx));
        adj[b].push((a, idx));
    }
    let mut disc = vec![usize::MAX; vcount];
    let mut low = vec![0usize; vcount];
    let mut timer = 0usize;
    let mut edge_stack: Vec<usize> = Vec::new();
    let mut components = Vec::new();

    // Iterative DFS; each frame remembers its position in the adjacency list.
    struct Frame {
        v: usize,
        parent_edge: usize,
        next: usize,
    }
    for start in 0..vcount {
        if disc[start] != usize::MAX || adj[start].is_empty() {
            continue;
        }
        disc[start] = timer;
        low[start] = timer;
        timer += 1;
        let mut stack = vec![Frame {
            v: start,
            parent_edge: usize::MAX,
            next: 0,
        }];
        while let Some(frame) = stack.last_mut() {
            let v = frame.v;
            if frame.next < adj[v].len() {
                let (to, eidx) = adj[v][frame.next];
                frame.next += 1;
                if eidx == frame.parent_edge {
                    continue;
                }
                if disc[to] == usize::MAX {
                    edge_stack.push(eidx);
                    disc[to] = timer;
                    low[to] = timer;
                    timer += 1;
                    stack.push(Frame {
                        v: to,
                        parent_edge: eidx,
                        next: 0,
                    });
                } else if disc[to] < disc[v] {
                    edge_stack.push(eidx);
                    low[v] = low[v].min(disc[to]);
                }
            } else {
                let parent_edge = frame.parent_edge;
                stack.pop();
                if let Some(pframe) = stack.last() {
                    let pv = pframe.v;
                    low[pv] = low[pv].min(low[v]);
                    if low[v] >= disc[pv] {
                        // v's subtree plus the parent edge closes a component.
                        let mut comp = Vec::new();
                        while let Some(&e) = edge_stack.last() {
                            if e == parent_edge {
                                break;
                            }
                            comp.push(edge_stack.pop().unwrap());
                        }
                        comp.push(edge_stack.pop().expect("parent edge on stack"));
                        components.push(comp);
                    }
                }
            }
        }
    }
    components
}
