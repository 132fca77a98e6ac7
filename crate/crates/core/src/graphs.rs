//! Undirected simple graphs, seeded generators, normalized adjacency and
//! hop-distance neighborhoods.

use std::collections::{BTreeSet, VecDeque};

use log::warn;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SparseMatrix};
use crate::rng::{self, stream};

/// Undirected simple graph in compressed neighbor-list form.
///
/// Neighbor lists are sorted; the structure is symmetric and loop-free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

/// Counts of edges discarded while building a graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub duplicates: usize,
    pub self_loops: usize,
}

impl Graph {
    /// Builds a graph from unordered pairs. Duplicates and self-loops are
    /// dropped and counted.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<(Graph, IngestStats)> {
        let mut stats = IngestStats::default();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (u, v) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(Error::InvalidNode { node, n });
                }
            }
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            if !adj[u].insert(v) {
                stats.duplicates += 1;
                continue;
            }
            adj[v].insert(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for set in adj {
            neighbors.extend(set);
            offsets.push(neighbors.len());
        }
        Ok((
            Graph {
                n,
                offsets,
                neighbors,
            },
            stats,
        ))
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| (u, v))
        })
    }

    pub fn check_node(&self, u: usize) -> Result<()> {
        if u >= self.n {
            Err(Error::InvalidNode { node: u, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Edge-list text: header `n m`, then one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edge_count());
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.n
            )));
        }
        Graph::from_edges(self.n, self.edges().map(|(u, v)| (perm[u], perm[v]))).map(|(g, _)| g)
    }

    /// Combinatorial Laplacian `D - A`.
    pub fn laplacian(&self) -> Matrix {
        let mut l = Matrix::zeros(self.n, self.n);
        for u in 0..self.n {
            l[(u, u)] = self.degree(u) as f64;
            for &v in self.neighbors(u) {
                l[(u, v)] = -1.0;
            }
        }
        l
    }
}

/// Path graph `0 - 1 - ... - (n-1)`.
pub fn build_line(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidSize(
            "line graph needs at least one node".into(),
        ));
    }
    Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).map(|(g, _)| g)
}

/// Cycle on `n >= 3` nodes.
pub fn build_cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidSize(
            "cycle needs at least three nodes".into(),
        ));
    }
    Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).map(|(g, _)| g)
}

/// `h × w` four-neighbor lattice with row-major ids.
pub fn build_grid2d(h: usize, w: usize) -> Result<Graph> {
    if h == 0 || w == 0 {
        return Err(Error::InvalidSize(format!(
            "grid {h}x{w} has a zero dimension"
        )));
    }
    let mut edges = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let u = r * w + c;
            if c + 1 < w {
                edges.push((u, u + 1));
            }
            if r + 1 < h {
                edges.push((u, u + w));
            }
        }
    }
    Graph::from_edges(h * w, edges).map(|(g, _)| g)
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "{name} = {p} is not a probability"
        )));
    }
    Ok(())
}

/// G(n, p): every pair independently with probability `p`.
pub fn build_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_probability("p", p)?;
    if n == 0 {
        return Err(Error::InvalidSize("graph needs at least one node".into()));
    }
    build_sbm(&[n], p, p, seed)
}

/// Stochastic block model. Blocks are consecutive id ranges in the order
/// given; pairs are visited in lexicographic order, one uniform draw each.
pub fn build_sbm(block_sizes: &[usize], p_intra: f64, p_inter: f64, seed: u64) -> Result<Graph> {
    if block_sizes.is_empty() {
        return Err(Error::InvalidArgument("block list is empty".into()));
    }
    if block_sizes.contains(&0) {
        return Err(Error::InvalidSize("blocks must be nonempty".into()));
    }
    check_probability("p_intra", p_intra)?;
    check_probability("p_inter", p_inter)?;
    let block: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = block.len();
    let mut rng = rng::seeded(seed, stream::GRAPH);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block[u] == block[v] {
                p_intra
            } else {
                p_inter
            };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).map(|(g, _)| g)
}

/// Result of parsing an edge list.
#[derive(Clone, Debug)]
pub struct ParsedEdgeList {
    pub graph: Graph,
    pub stats: IngestStats,
}

/// Parses the edge-list format: a header line `n m`, then `m` lines `u v`
/// with 0-based ids. Blank lines and `#` comments are ignored.
pub fn from_edge_list(text: &str) -> Result<ParsedEdgeList> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let parse_pair = |lineno: usize, line: &str| -> Result<(i64, i64)> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected two fields, found {}", fields.len()),
            });
        }
        let num = |s: &str| {
            s.parse::<i64>().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("`{s}`: {e}"),
            })
        };
        Ok((num(fields[0])?, num(fields[1])?))
    };

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing `n m` header".into(),
    })?;
    let (n, m) = parse_pair(hline, header)?;
    if n <= 0 || m < 0 {
        return Err(Error::Parse {
            line: hline,
            message: format!("invalid header `{n} {m}`"),
        });
    }
    let n = n as usize;
    let mut edges = Vec::with_capacity(m as usize);
    let mut last_line = hline;
    for (lineno, line) in lines {
        let (u, v) = parse_pair(lineno, line)?;
        for id in [u, v] {
            if id < 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("negative node id {id}"),
                });
            }
            if id as usize >= n {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("node id {id} out of range for {n} nodes"),
                });
            }
        }
        edges.push((u as usize, v as usize));
        last_line = lineno;
    }
    if edges.len() != m as usize {
        return Err(Error::Parse {
            line: last_line,
            message: format!("header announces {m} edges, found {}", edges.len()),
        });
    }
    let (graph, stats) = Graph::from_edges(n, edges)?;
    if stats.duplicates + stats.self_loops > 0 {
        warn!(
            "edge list: dropped {} duplicate and {} self-loop edges",
            stats.duplicates, stats.self_loops
        );
    }
    Ok(ParsedEdgeList { graph, stats })
}

fn inv_sqrt_degrees(g: &Graph, self_loops: bool) -> Vec<f64> {
    (0..g.node_count())
        .map(|u| {
            let d = g.degree(u) + usize::from(self_loops);
            if d == 0 {
                0.0
            } else {
                1.0 / (d as f64).sqrt()
            }
        })
        .collect()
}

/// Symmetric normalized adjacency `D^{-1/2} A D^{-1/2}`, or with self-loops
/// `D̃^{-1/2} (A + I) D̃^{-1/2}`. Zero-degree entries of `D^{-1/2}` are 0.
pub fn sym_norm_adjacency(g: &Graph, self_loops: bool) -> Result<Matrix> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::InvalidSize("empty graph".into()));
    }
    let dinv = inv_sqrt_degrees(g, self_loops);
    let mut a = Matrix::zeros(n, n);
    for (u, v) in g.edges() {
        let w = dinv[u] * dinv[v];
        a[(u, v)] = w;
        a[(v, u)] = w;
    }
    if self_loops {
        for u in 0..n {
            a[(u, u)] = dinv[u] * dinv[u];
        }
    }
    Ok(a)
}

/// Sparse form of [`sym_norm_adjacency`].
pub fn sym_norm_adjacency_sparse(g: &Graph, self_loops: bool) -> Result<SparseMatrix> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::InvalidSize("empty graph".into()));
    }
    let dinv = inv_sqrt_degrees(g, self_loops);
    let rows = (0..n)
        .map(|u| {
            let mut row: Vec<(usize, f64)> = g
                .neighbors(u)
                .iter()
                .map(|&v| (v, dinv[u] * dinv[v]))
                .collect();
            if self_loops {
                row.push((u, dinv[u] * dinv[u]));
                row.sort_by_key(|&(v, _)| v);
            }
            row
        })
        .collect();
    Ok(SparseMatrix::from_rows(n, rows))
}

/// Hop distances from `u`; `None` for unreachable nodes.
pub fn bfs_distances(g: &Graph, u: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    dist[u] = Some(0);
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        let dx = dist[x].unwrap_or(0);
        for &y in g.neighbors(x) {
            if dist[y].is_none() {
                dist[y] = Some(dx + 1);
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Shells `N_1(u), ..., N_kmax(u)`: sorted node lists at hop distance exactly
/// `r`. The source itself is never included.
pub fn khop_shells(g: &Graph, u: usize, kmax: usize) -> Result<Vec<Vec<usize>>> {
    g.check_node(u)?;
    let mut shells = vec![Vec::new(); kmax];
    for (v, d) in bfs_distances(g, u).into_iter().enumerate() {
        if let Some(d) = d {
            if d >= 1 && d <= kmax {
                shells[d - 1].push(v);
            }
        }
    }
    Ok(shells)
}

/// `N̄_k(u)`: nodes within `1..=k` hops of `u`, excluding `u`.
pub fn khop_neighborhood(g: &Graph, u: usize, k: usize) -> Result<Vec<usize>> {
    let mut all: Vec<usize> = khop_shells(g, u, k)?.into_iter().flatten().collect();
    all.sort_unstable();
    Ok(all)
}

/// Connected-component label per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub labels: Vec<usize>,
    pub count: usize,
}

impl ComponentLabeling {
    /// Node lists per component, ordered by label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (u, &c) in self.labels.iter().enumerate() {
            out[c].push(u);
        }
        out
    }
}

/// Labels components in order of their smallest node id.
pub fn connected_components(g: &Graph) -> ComponentLabeling {
    let n = g.node_count();
    let mut labels = vec![usize::MAX; n];
    let mut count = 0;
    for s in 0..n {
        if labels[s] != usize::MAX {
            continue;
        }
        labels[s] = count;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for &y in g.neighbors(x) {
                if labels[y] == usize::MAX {
                    labels[y] = count;
                    stack.push(y);
                }
            }
        }
        count += 1;
    }
    ComponentLabeling { labels, count }
}

/// Adds one node linked to every existing node; the new node gets id `n`.
pub fn with_virtual_node(g: &Graph) -> Graph {
    let n = g.node_count();
    let edges = g.edges().chain((0..n).map(|u| (u, n)));
    Graph::from_edges(n + 1, edges.collect::<Vec<_>>())
        .map(|(g, _)| g)
        .expect("augmented edges are in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigen;

    #[test]
    fn line_shapes() {
        let g = build_line(3).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        let g1 = build_line(1).unwrap();
        assert_eq!((g1.node_count(), g1.edge_count()), (1, 0));
        assert!(matches!(build_line(0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn line_diameter() {
        let g = build_line(100).unwrap();
        assert_eq!(bfs_distances(&g, 0)[99], Some(99));
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(build_grid2d(1, 5).unwrap(), build_line(5).unwrap());
        let sq = build_grid2d(2, 2).unwrap();
        assert_eq!((sq.node_count(), sq.edge_count()), (4, 4));
        assert!(sq.neighbors(0).len() == 2 && sq.neighbors(3).len() == 2);
        assert_eq!(build_grid2d(3, 3).unwrap().degree(4), 4);
        assert!(build_grid2d(0, 3).is_err());
    }

    #[test]
    fn erdos_renyi_extremes() {
        assert_eq!(build_erdos_renyi(100, 0.0, 7).unwrap().edge_count(), 0);
        assert_eq!(build_erdos_renyi(100, 1.0, 7).unwrap().edge_count(), 4950);
        assert!(build_erdos_renyi(10, 1.5, 7).is_err());
        assert!(build_erdos_renyi(10, -0.1, 7).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            build_erdos_renyi(60, 0.2, 11).unwrap(),
            build_erdos_renyi(60, 0.2, 11).unwrap()
        );
        assert_ne!(
            build_erdos_renyi(60, 0.2, 11).unwrap(),
            build_erdos_renyi(60, 0.2, 12).unwrap()
        );
        assert_eq!(
            build_sbm(&[30, 30], 0.5, 0.1, 3).unwrap(),
            build_sbm(&[30, 30], 0.5, 0.1, 3).unwrap()
        );
    }

    #[test]
    fn sbm_extremes_give_disjoint_cliques() {
        let g = build_sbm(&[50, 50], 1.0, 0.0, 1).unwrap();
        assert_eq!(g.edge_count(), 2 * 50 * 49 / 2);
        assert_eq!(connected_components(&g).count, 2);
        assert!(build_sbm(&[], 0.5, 0.5, 1).is_err());
    }

    #[test]
    fn single_block_sbm_matches_erdos_renyi() {
        assert_eq!(
            build_sbm(&[40], 0.3, 0.9, 5).unwrap(),
            build_erdos_renyi(40, 0.3, 5).unwrap()
        );
    }

    #[test]
    fn edge_list_parsing() {
        let p = from_edge_list("3 2\n0 1\n1 2").unwrap();
        assert_eq!(p.graph, build_line(3).unwrap());

        let p = from_edge_list("2 2\n0 1\n1 0").unwrap();
        assert_eq!(p.graph.edge_count(), 1);
        assert_eq!(p.stats.duplicates, 1);

        let p = from_edge_list("# header next\n3 2\n0 0 # loop\n1 2\n").unwrap();
        assert_eq!(p.stats.self_loops, 1);
        assert_eq!(p.graph.edge_count(), 1);

        assert!(matches!(
            from_edge_list("2 1\n0 5"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            from_edge_list("2 1\n0 -1"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            from_edge_list("2 1\n0 x"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            from_edge_list("2 2\n0 1"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(from_edge_list(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = build_erdos_renyi(30, 0.2, 9).unwrap();
        assert_eq!(from_edge_list(&g.to_edge_list()).unwrap().graph, g);
    }

    #[test]
    fn normalized_adjacency_entries() {
        let g = build_line(3).unwrap();
        let a = sym_norm_adjacency(&g, false).unwrap();
        assert!((a[(0, 1)] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let k2 = build_line(2).unwrap();
        let a = sym_norm_adjacency(&k2, true).unwrap();
        for v in a.as_slice() {
            assert!((v - 0.5).abs() < 1e-15);
        }

        let iso = Graph::from_edges(3, [(0, 1)]).unwrap().0;
        let a = sym_norm_adjacency(&iso, false).unwrap();
        assert!(a.row(2).iter().all(|&x| x == 0.0));
        let a = sym_norm_adjacency(&iso, true).unwrap();
        assert_eq!(a.row(2), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn sparse_adjacency_matches_dense() {
        let g = build_sbm(&[10, 15], 0.5, 0.1, 2).unwrap();
        for loops in [false, true] {
            let d = sym_norm_adjacency(&g, loops).unwrap();
            let s = sym_norm_adjacency_sparse(&g, loops).unwrap();
            assert_eq!(s.to_dense(), d);
        }
    }

    #[test]
    fn normalized_adjacency_spectrum() {
        for seed in 0..5 {
            let g = build_erdos_renyi(30, 0.15, seed).unwrap();
            let a = sym_norm_adjacency(&g, false).unwrap();
            assert_eq!(a.max_asymmetry(), 0.0);
            let e = sym_eigen(&a, 1e-14).unwrap();
            assert!(e
                .eigenvalues
                .iter()
                .all(|&l| (-1.0 - 1e-10..=1.0 + 1e-10).contains(&l)));
            let a = sym_norm_adjacency(&g, true).unwrap();
            let e = sym_eigen(&a, 1e-14).unwrap();
            assert!(e.eigenvalues.iter().all(|&l| l > -1.0 && l <= 1.0 + 1e-10));
        }
    }

    #[test]
    fn shells_on_line() {
        let g = build_line(9).unwrap();
        let s = khop_shells(&g, 4, 2).unwrap();
        assert_eq!(s, vec![vec![3, 5], vec![2, 6]]);
        assert_eq!(khop_neighborhood(&g, 4, 2).unwrap().len(), 4);
        assert!(matches!(
            khop_shells(&g, 9, 2),
            Err(Error::InvalidNode { .. })
        ));
    }

    #[test]
    fn shells_stop_at_component() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (3, 4)]).unwrap().0;
        let s = khop_shells(&g, 0, 4).unwrap();
        assert_eq!(s, vec![vec![1], vec![2], vec![], vec![]]);
    }

    #[test]
    fn components() {
        assert_eq!(connected_components(&build_line(5).unwrap()).count, 1);
        let two = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap().0;
        assert_eq!(connected_components(&two).count, 2);
        let empty = Graph::from_edges(6, []).unwrap().0;
        assert_eq!(connected_components(&empty).count, 6);
    }

    #[test]
    fn virtual_node_links_everything() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap().0;
        let vn = with_virtual_node(&g);
        assert_eq!(vn.node_count(), 5);
        assert_eq!(vn.degree(4), 4);
        assert_eq!(connected_components(&vn).count, 1);
    }
}
