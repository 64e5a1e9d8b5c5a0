//! Undirected multigraph helpers: bridge finding and connectivity.
//!
//! Edges are addressed by index so parallel branches stay distinct; a bridge
//! search never treats the second of two parallel edges as the tree edge back
//! to the parent.

/// Adjacency view over `node_count` nodes and an edge list, with a mask
/// selecting which edges are present.
#[derive(Debug, Clone)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); node_count];
        for (id, &(a, b)) in edges.iter().enumerate() {
            adjacency[a].push((b, id));
            adjacency[b].push((a, id));
        }
        Graph {
            node_count,
            edges,
            adjacency,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, id: usize) -> (usize, usize) {
        self.edges[id]
    }

    /// Bridges among the enabled edges, ascending by edge id.
    ///
    /// Iterative Tarjan low-link search, linear in nodes plus edges. Works on
    /// disconnected graphs too (every component is searched).
    pub fn bridges(&self, enabled: &[bool]) -> Vec<usize> {
        debug_assert_eq!(enabled.len(), self.edges.len());
        let n = self.node_count;
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0usize;
        let mut out = Vec::new();
        // (node, edge used to enter it, next adjacency position)
        let mut stack: Vec<(usize, usize, usize)> = Vec::new();

        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            stack.push((root, usize::MAX, 0));
            while let Some(&mut (v, parent_edge, ref mut pos)) = stack.last_mut() {
                if *pos < self.adjacency[v].len() {
                    let (w, e) = self.adjacency[v][*pos];
                    *pos += 1;
                    if !enabled[e] || e == parent_edge {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, e, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(u, _, _)) = stack.last() {
                        low[u] = low[u].min(low[v]);
                        if low[v] > disc[u] {
                            out.push(parent_edge);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Component label per node over the enabled edges.
    pub fn components(&self, enabled: &[bool]) -> Vec<usize> {
        let mut uf = UnionFind::new(self.node_count);
        for (id, &(a, b)) in self.edges.iter().enumerate() {
            if enabled[id] {
                uf.union(a, b);
            }
        }
        (0..self.node_count).map(|v| uf.find(v)).collect()
    }

    pub fn is_connected(&self, enabled: &[bool]) -> bool {
        if self.node_count == 0 {
            return true;
        }
        let labels = self.components(enabled);
        labels.iter().all(|&l| l == labels[0])
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all(g: &Graph) -> Vec<bool> {
        vec![true; g.edge_count()]
    }

    #[test]
    fn triangle_has_no_bridges() {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)]);
        assert!(g.bridges(&all(&g)).is_empty());
    }

    #[test]
    fn path_edges_are_all_bridges() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)]);
        assert_eq!(g.bridges(&all(&g)), vec![0, 1]);
    }

    #[test]
    fn parallel_edges_are_not_bridges() {
        let g = Graph::new(3, vec![(0, 1), (0, 1), (1, 2)]);
        assert_eq!(g.bridges(&all(&g)), vec![2]);
        // disabling one of the parallel pair turns the other into a bridge
        assert_eq!(g.bridges(&[false, true, true]), vec![1, 2]);
    }

    fn brute_force_bridges(g: &Graph, enabled: &[bool]) -> Vec<usize> {
        let base = g.components(enabled);
        let base_count = {
            let mut l = base.clone();
            l.sort_unstable();
            l.dedup();
            l.len()
        };
        (0..g.edge_count())
            .filter(|&e| enabled[e])
            .filter(|&e| {
                let mut m = enabled.to_vec();
                m[e] = false;
                let mut l = g.components(&m);
                l.sort_unstable();
                l.dedup();
                l.len() > base_count
            })
            .collect()
    }

    proptest! {
        #[test]
        fn bridges_match_brute_force(
            n in 2usize..30,
            raw in prop::collection::vec((0usize..30, 0usize..30), 0..60),
        ) {
            let edges: Vec<_> = raw
                .into_iter()
                .map(|(a, b)| (a % n, b % n))
                .filter(|(a, b)| a != b)
                .collect();
            let g = Graph::new(n, edges);
            let enabled = all(&g);
            prop_assert_eq!(g.bridges(&enabled), brute_force_bridges(&g, &enabled));
        }
    }
}
