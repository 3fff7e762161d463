//! Directed-graph machinery over coordinate supports: transitive closure,
//! exit checks, shortest paths, and extraction of a full subgraph without
//! exit from a transitive digraph.

use crate::error::CoreError;

/// Finite digraph on vertices `0..m`, self-loops allowed. The edge set is
/// stored densely, so it is set-like by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportDigraph {
    m: usize,
    adj: Vec<bool>,
}

impl SupportDigraph {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            adj: vec![false; m * m],
        }
    }

    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self, CoreError> {
        let mut g = Self::new(m);
        for &(i, j) in edges {
            if i >= m || j >= m {
                return Err(CoreError::InvalidArgument(format!(
                    "edge ({i}, {j}) out of range for {m} vertices"
                )));
            }
            g.add_edge(i, j);
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.m
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        self.adj[i * self.m + j] = true;
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.m + j]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.m {
            for j in 0..self.m {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&e| e).count()
    }

    pub fn out_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.m).filter(|&j| self.has_edge(i, j)).collect()
    }

    /// Smallest transitive supergraph: edge `(i, j)` iff a nonempty directed
    /// path `i → … → j` exists. Warshall-style.
    pub fn transitive_closure(&self) -> Self {
        let mut g = self.clone();
        for k in 0..g.m {
            for i in 0..g.m {
                if g.has_edge(i, k) {
                    for j in 0..g.m {
                        if g.has_edge(k, j) {
                            g.add_edge(i, j);
                        }
                    }
                }
            }
        }
        g
    }

    pub fn is_transitive(&self) -> bool {
        *self == self.transitive_closure()
    }

    /// `Ok(())` when every vertex has an out-edge; a self-loop counts, since
    /// a vertex supported only on its own index must still be admissible.
    /// `Err(v)` reports the first vertex without one.
    pub fn every_vertex_has_exit(&self) -> Result<(), usize> {
        for i in 0..self.m {
            if !(0..self.m).any(|j| self.has_edge(i, j)) {
                return Err(i);
            }
        }
        Ok(())
    }

    /// Vertices reachable from `start` by paths of length ≥ 1.
    pub fn reachable_from(&self, start: usize) -> Vec<usize> {
        let mut seen = vec![false; self.m];
        let mut queue: Vec<usize> = self.out_neighbors(start);
        for &v in &queue {
            seen[v] = true;
        }
        while let Some(v) = queue.pop() {
            for w in self.out_neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push(w);
                }
            }
        }
        (0..self.m).filter(|&v| seen[v]).collect()
    }

    /// Shortest path (BFS) from `source` to any vertex of `targets`;
    /// a source already inside `targets` yields the single-vertex path.
    pub fn path_to_targets(&self, source: usize, targets: &[usize]) -> Option<Vec<usize>> {
        let is_target = {
            let mut mask = vec![false; self.m];
            for &t in targets {
                mask[t] = true;
            }
            mask
        };
        if is_target[source] {
            return Some(vec![source]);
        }
        let mut pred = vec![usize::MAX; self.m];
        let mut queue = std::collections::VecDeque::new();
        pred[source] = source;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for w in self.out_neighbors(v) {
                if pred[w] != usize::MAX {
                    continue;
                }
                pred[w] = v;
                if is_target[w] {
                    let mut path = vec![w];
                    let mut cur = w;
                    while cur != source {
                        cur = pred[cur];
                        path.push(cur);
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(w);
            }
        }
        None
    }

    /// Strongly connected components in Tarjan order (reverse topological).
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        struct State {
            index: usize,
            idx: Vec<Option<usize>>,
            low: Vec<usize>,
            stack: Vec<usize>,
            on_stack: Vec<bool>,
            comps: Vec<Vec<usize>>,
        }
        fn connect(v: usize, g: &SupportDigraph, st: &mut State) {
            st.idx[v] = Some(st.index);
            st.low[v] = st.index;
            st.index += 1;
            st.stack.push(v);
            st.on_stack[v] = true;
            for w in g.out_neighbors(v) {
                if st.idx[w].is_none() {
                    connect(w, g, st);
                    st.low[v] = st.low[v].min(st.low[w]);
                } else if st.on_stack[w] {
                    st.low[v] = st.low[v].min(st.idx[w].unwrap());
                }
            }
            if st.low[v] == st.idx[v].unwrap() {
                let mut comp = Vec::new();
                loop {
                    let w = st.stack.pop().expect("tarjan stack underflow");
                    st.on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                st.comps.push(comp);
            }
        }
        let mut st = State {
            index: 0,
            idx: vec![None; self.m],
            low: vec![0; self.m],
            stack: Vec::new(),
            on_stack: vec![false; self.m],
            comps: Vec::new(),
        };
        for v in 0..self.m {
            if st.idx[v].is_none() {
                connect(v, self, &mut st);
            }
        }
        st.comps
    }

    /// Full subgraph without exit of a transitive, out-degree-positive
    /// digraph: all ordered pairs inside the returned set (diagonal
    /// included) are edges and no edge leaves the set.
    ///
    /// Realized as a sink strongly connected component; among several sinks
    /// the one with the smallest vertex index wins, making the output
    /// deterministic.
    pub fn terminal_full_subgraph(&self) -> Result<Vec<usize>, CoreError> {
        if !self.is_transitive() {
            return Err(CoreError::PreconditionViolation(
                "graph is not transitive".into(),
            ));
        }
        if let Err(v) = self.every_vertex_has_exit() {
            return Err(CoreError::PreconditionViolation(format!(
                "vertex {v} has no out-edge"
            )));
        }
        let comps = self.strongly_connected_components();
        let mut best: Option<&Vec<usize>> = None;
        for comp in &comps {
            let is_sink = comp.iter().all(|&v| {
                self.out_neighbors(v)
                    .iter()
                    .all(|w| comp.binary_search(w).is_ok())
            });
            if is_sink && best.is_none_or(|b| comp[0] < b[0]) {
                best = Some(comp);
            }
        }
        let w = best
            .ok_or_else(|| {
                CoreError::RankInconsistency("no sink component in a finite digraph".into())
            })?
            .clone();
        for &i in &w {
            for &j in &w {
                if !self.has_edge(i, j) {
                    return Err(CoreError::RankInconsistency(format!(
                        "sink component is not full: missing edge ({i}, {j})"
                    )));
                }
            }
        }
        Ok(w)
    }

    /// Plain-text dot export, one `i -> j;` line per edge (1-based labels).
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph support {\n");
        for i in 0..self.m {
            out.push_str(&format!("  {};\n", i + 1));
        }
        for (i, j) in self.edges() {
            out.push_str(&format!("  {} -> {};\n", i + 1, j + 1));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force over all vertex subsets: full (diagonal included) and
    /// without exit. Oracle for `terminal_full_subgraph`.
    pub(crate) fn brute_force_terminal_sets(g: &SupportDigraph) -> Vec<Vec<usize>> {
        let m = g.vertex_count();
        let mut found = Vec::new();
        for mask in 1u32..(1 << m) {
            let set: Vec<usize> = (0..m).filter(|&v| mask & (1 << v) != 0).collect();
            let full = set.iter().all(|&i| set.iter().all(|&j| g.has_edge(i, j)));
            let no_exit = set
                .iter()
                .all(|&i| (0..m).all(|j| !g.has_edge(i, j) || set.contains(&j)));
            if full && no_exit {
                found.push(set);
            }
        }
        found
    }

    #[test]
    fn closure_adds_composite_edges() {
        let g = SupportDigraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let c = g.transitive_closure();
        assert!(c.has_edge(0, 2));
        assert_eq!(c.edge_count(), 3);
    }

    #[test]
    fn closure_of_cycle_adds_loops() {
        let g = SupportDigraph::from_edges(2, &[(0, 1), (1, 0)]).unwrap();
        let c = g.transitive_closure();
        assert!(c.has_edge(0, 0) && c.has_edge(1, 1));
    }

    #[test]
    fn closure_is_a_fixed_point_on_transitive_graphs() {
        let g = SupportDigraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(g.transitive_closure(), g);
    }

    #[test]
    fn exit_check_accepts_loops_and_reports_violators() {
        let g = SupportDigraph::from_edges(2, &[(0, 1), (1, 0)]).unwrap();
        assert!(g.every_vertex_has_exit().is_ok());
        let lonely = SupportDigraph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(lonely.every_vertex_has_exit(), Err(1));
        let self_loop = SupportDigraph::from_edges(1, &[(0, 0)]).unwrap();
        assert!(self_loop.every_vertex_has_exit().is_ok());
    }

    #[test]
    fn terminal_subgraph_of_chain_into_cycle() {
        let g = SupportDigraph::from_edges(3, &[(0, 1), (1, 2), (2, 1)])
            .unwrap()
            .transitive_closure();
        let w = g.terminal_full_subgraph().unwrap();
        assert_eq!(w, vec![1, 2]);
        let oracle = brute_force_terminal_sets(&g);
        assert!(oracle.contains(&w));
    }

    #[test]
    fn terminal_subgraph_of_complete_graph_is_everything() {
        let mut g = SupportDigraph::new(3);
        for i in 0..3 {
            for j in 0..3 {
                g.add_edge(i, j);
            }
        }
        assert_eq!(g.terminal_full_subgraph().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn terminal_subgraph_of_singleton_loop() {
        let g = SupportDigraph::from_edges(1, &[(0, 0)]).unwrap();
        assert_eq!(g.terminal_full_subgraph().unwrap(), vec![0]);
    }

    #[test]
    fn terminal_subgraph_rejects_broken_preconditions() {
        let not_transitive = SupportDigraph::from_edges(3, &[(0, 1), (1, 2), (2, 2)]).unwrap();
        assert!(not_transitive.terminal_full_subgraph().is_err());
        let no_exit = SupportDigraph::from_edges(2, &[(0, 0)]).unwrap();
        assert!(no_exit.terminal_full_subgraph().is_err());
    }

    #[test]
    fn paths_follow_bfs_shortest_routes() {
        let g = SupportDigraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.path_to_targets(0, &[2]), Some(vec![0, 1, 2]));
        assert_eq!(g.path_to_targets(1, &[1]), Some(vec![1]));
        assert_eq!(g.path_to_targets(2, &[0]), None);
    }

    #[test]
    fn dot_export_lists_each_edge() {
        let g = SupportDigraph::from_edges(2, &[(0, 1), (1, 1)]).unwrap();
        let dot = g.to_dot();
        assert!(dot.contains("1 -> 2;"));
        assert!(dot.contains("2 -> 2;"));
    }

    #[test]
    fn exhaustive_small_graphs_match_brute_force() {
        // all digraphs on up to 4 vertices that satisfy the preconditions
        for m in 1..=4usize {
            let cells = m * m;
            for mask in 0u32..(1 << cells) {
                let mut g = SupportDigraph::new(m);
                for c in 0..cells {
                    if mask & (1 << c) != 0 {
                        g.add_edge(c / m, c % m);
                    }
                }
                if !g.is_transitive() || g.every_vertex_has_exit().is_err() {
                    continue;
                }
                let w = g.terminal_full_subgraph().unwrap();
                let oracle = brute_force_terminal_sets(&g);
                assert!(!oracle.is_empty());
                let min_choice = oracle.iter().min_by_key(|s| s[0]).unwrap();
                assert_eq!(&w, min_choice, "graph mask {mask} on {m} vertices");
            }
        }
    }

    fn arb_digraph(max_m: usize) -> impl Strategy<Value = SupportDigraph> {
        (1..=max_m).prop_flat_map(|m| {
            proptest::collection::vec(any::<bool>(), m * m).prop_map(move |cells| {
                let mut g = SupportDigraph::new(m);
                for (c, &on) in cells.iter().enumerate() {
                    if on {
                        g.add_edge(c / m, c % m);
                    }
                }
                g
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn closure_is_idempotent_and_monotone(g in arb_digraph(8)) {
            let c = g.transitive_closure();
            prop_assert_eq!(c.transitive_closure(), c.clone());
            for (i, j) in g.edges() {
                prop_assert!(c.has_edge(i, j));
            }
        }

        #[test]
        fn random_closures_match_brute_force(g in arb_digraph(8)) {
            // force positive out-degree, then close
            let mut g = g;
            let m = g.vertex_count();
            for v in 0..m {
                if g.out_neighbors(v).is_empty() {
                    g.add_edge(v, (v + 1) % m.max(1));
                }
            }
            let c = g.transitive_closure();
            prop_assume!(c.every_vertex_has_exit().is_ok());
            let w = c.terminal_full_subgraph().unwrap();
            for &i in &w {
                for &j in &w {
                    prop_assert!(c.has_edge(i, j));
                }
                for j in 0..m {
                    if !w.contains(&j) {
                        prop_assert!(!c.has_edge(i, j));
                    }
                }
            }
            let oracle = brute_force_terminal_sets(&c);
            prop_assert!(oracle.contains(&w));
        }

        #[test]
        fn sccs_of_transitive_graphs_with_edges_are_full(g in arb_digraph(6)) {
            let c = g.transitive_closure();
            for comp in c.strongly_connected_components() {
                let has_edge = comp.iter().any(|&i| comp.iter().any(|&j| c.has_edge(i, j)));
                if has_edge {
                    for &i in &comp {
                        for &j in &comp {
                            prop_assert!(c.has_edge(i, j));
                        }
                    }
                }
            }
        }
    }
}
