use std::collections::HashMap;

use petgraph::algo::is_isomorphic;
use petgraph::graph::UnGraph;

use super::graph::Graph;

fn to_petgraph(g: &Graph) -> UnGraph<(), ()> {
    let edges: Vec<(u32, u32)> = g
        .edges()
        .into_iter()
        .map(|(u, v)| (u as u32, v as u32))
        .collect();
    let mut pg = UnGraph::<(), ()>::from_edges(&edges);
    while pg.node_count() < g.n() {
        pg.add_node(());
    }
    pg
}

/// Isomorphism invariant used to bucket candidates before the exact check.
fn invariant(g: &Graph) -> (usize, Vec<(usize, Vec<usize>)>) {
    let mut profile: Vec<(usize, Vec<usize>)> = (0..g.n())
        .map(|v| {
            let mut nd: Vec<usize> = g.neighbors(v).iter().map(|&w| g.degree(w)).collect();
            nd.sort_unstable();
            (g.degree(v), nd)
        })
        .collect();
    profile.sort();
    (g.num_edges(), profile)
}

/// All connected graphs on `1..=max_n` vertices up to isomorphism, with
/// maximum degree at most `max_degree` when given. Ordered by vertex count.
pub fn connected_graphs(max_n: usize, max_degree: Option<usize>) -> Vec<Graph> {
    let bound = max_degree.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    if max_n == 0 {
        return out;
    }
    let mut level = vec![Graph::empty(1)];
    out.extend(level.iter().cloned());
    for n in 2..=max_n {
        // every connected graph has a vertex whose removal keeps it
        // connected, so extending level n−1 reaches all of level n
        let mut buckets: HashMap<_, Vec<(Graph, UnGraph<(), ()>)>> = HashMap::new();
        let mut next = Vec::new();
        for g in &level {
            let prev = n - 1;
            for mask in 1u32..(1 << prev) {
                let nbrs: Vec<usize> = (0..prev).filter(|&v| mask >> v & 1 == 1).collect();
                if nbrs.len() > bound || nbrs.iter().any(|&v| g.degree(v) >= bound) {
                    continue;
                }
                let candidate = g.with_vertex(&nbrs);
                let bucket = buckets.entry(invariant(&candidate)).or_default();
                let pg = to_petgraph(&candidate);
                if bucket.iter().any(|(_, other)| is_isomorphic(&pg, other)) {
                    continue;
                }
                bucket.push((candidate.clone(), pg));
                next.push(candidate);
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}
