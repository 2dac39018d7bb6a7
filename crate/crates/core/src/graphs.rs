//! MaxCut instances: construction, random regular generation, isomorphism
//! deduplication, edge weighting, edge-list persistence and the exhaustive
//! ground-truth solver.
//!
//! Bit convention used throughout the crate: bit `j` of a basis-state index
//! is the partition label of vertex (qubit) `j`, so qubit 0 is the least
//! significant bit.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_capacity, Error, Result};

/// Largest instance the exhaustive MaxCut solver accepts.
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Largest vertex count for exhaustive regular-graph enumeration.
pub const ENUMERATION_LIMIT: usize = 12;

const MAX_GENERATION_ATTEMPTS: usize = 200_000;

/// Weighted undirected edge with `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// A simple weighted undirected graph defining a MaxCut instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Builds a graph, normalizing each edge to `u < v`.
    ///
    /// Rejects self-loops, duplicate edges, out-of-range endpoints and
    /// non-positive or non-finite weights.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(format!("graph needs at least 2 vertices, got {n}")));
        }
        if n > 64 {
            return Err(Error::Capacity { what: "graph", limit: 64, n });
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(Error::param(format!("self-loop on vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::param(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::param(format!("edge ({a}, {b}) has non-positive weight {w}")));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((u, v)) {
                return Err(Error::param(format!("duplicate edge ({u}, {v})")));
            }
            out.push(Edge { u, v, weight: w });
        }
        Ok(Graph { n, edges: out })
    }

    /// Unit-weight graph from an edge list.
    pub fn unweighted(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Graph::new(n, edges.iter().map(|&(u, v)| (u, v, 1.0)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        Graph::unweighted(n, &edges)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).map(|u| (u, (u + 1) % n)).collect();
        Graph::unweighted(n, &edges)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// True when every weight is exactly 1.
    pub fn is_unweighted(&self) -> bool {
        self.edges.iter().all(|e| e.weight == 1.0)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    /// Adjacency as one bitmask per vertex.
    pub fn adjacency_masks(&self) -> Vec<u64> {
        let mut adj = vec![0u64; self.n];
        for e in &self.edges {
            adj[e.u] |= 1 << e.v;
            adj[e.v] |= 1 << e.u;
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency_masks();
        let mut seen = 1u64;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            let mut fresh = adj[u] & !seen;
            seen |= fresh;
            while fresh != 0 {
                let v = fresh.trailing_zeros() as usize;
                fresh &= fresh - 1;
                queue.push_back(v);
            }
        }
        seen.count_ones() as usize == self.n
    }

    /// Applies the vertex map `v -> perm[v]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::param("permutation length differs from vertex count"));
        }
        let mut check = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut check[p], true) {
                return Err(Error::param("not a permutation"));
            }
        }
        Graph::new(
            self.n,
            self.edges.iter().map(|e| (perm[e.u], perm[e.v], e.weight)),
        )
    }

    /// Sum of weights of edges crossing the partition encoded by `z`.
    pub fn cut_value(&self, z: &Bitstring) -> Result<f64> {
        if z.len() != self.n {
            return Err(Error::param(format!(
                "bitstring length {} differs from vertex count {}",
                z.len(),
                self.n
            )));
        }
        Ok(self.cut_value_index(z.index()))
    }

    /// Cut value for a basis-state index (bit `j` = side of vertex `j`).
    #[inline]
    pub fn cut_value_index(&self, z: usize) -> f64 {
        self.edges
            .iter()
            .filter(|e| ((z >> e.u) ^ (z >> e.v)) & 1 == 1)
            .map(|e| e.weight)
            .sum()
    }

    /// Serializes to the edge-list text format (`n <count>` header, then
    /// `j k w` per line). Weights use shortest round-trip formatting.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n {}\n", self.n);
        for e in &self.edges {
            s.push_str(&format!("{} {} {}\n", e.u, e.v, e.weight));
        }
        s
    }

    /// Parses the edge-list format. Blank lines and `#` comments are skipped;
    /// a missing weight defaults to 1.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if n.is_none() {
                if fields.len() != 2 || fields[0] != "n" {
                    return Err(parse_err(format!("expected header `n <count>`, got `{line}`")));
                }
                let count = fields[1]
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("bad vertex count: {e}")))?;
                n = Some(count);
                continue;
            }
            if !(2..=3).contains(&fields.len()) {
                return Err(parse_err(format!("expected `j k [w]`, got `{line}`")));
            }
            let j = fields[0]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad vertex: {e}")))?;
            let k = fields[1]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad vertex: {e}")))?;
            let w = match fields.get(2) {
                Some(f) => f
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("bad weight: {e}")))?,
                None => 1.0,
            };
            edges.push((j, k, w));
        }
        let n = n.ok_or(Error::Parse { line: 0, message: "missing header".into() })?;
        Graph::new(n, edges)
    }

    /// SHA-256 of the canonical edge-list text, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_edge_list().as_bytes()))
    }
}

/// An `n`-bit partition label. Text form lists vertex 0 first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring {
    len: usize,
    bits: usize,
}

impl Bitstring {
    pub fn new(len: usize, bits: usize) -> Result<Self> {
        if len > 63 || bits >> len != 0 {
            return Err(Error::param(format!("{bits:#b} does not fit in {len} bits")));
        }
        Ok(Bitstring { len, bits })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Basis-state index.
    #[inline]
    pub fn index(&self) -> usize {
        self.bits
    }

    #[inline]
    pub fn bit(&self, j: usize) -> bool {
        (self.bits >> j) & 1 == 1
    }

    pub fn complement(&self) -> Self {
        Bitstring { len: self.len, bits: !self.bits & ((1 << self.len) - 1) }
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = 0usize;
        for (j, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << j,
                other => return Err(Error::param(format!("invalid bit character {other:?}"))),
            }
        }
        Bitstring::new(s.chars().count(), bits)
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.len {
            f.write_str(if self.bit(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Exact MaxCut optimum of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxCutSolution {
    pub n: usize,
    pub max_cut_value: f64,
    /// Optimal basis-state indices, ascending. Closed under complement.
    pub optimal_bitstrings: Vec<usize>,
    /// `-max_cut_value`, the minimum of the problem diagonal.
    pub min_energy: f64,
}

impl MaxCutSolution {
    pub fn is_optimal(&self, z: usize) -> bool {
        self.optimal_bitstrings.binary_search(&z).is_ok()
    }
}

/// Exhaustive MaxCut over `2^(n-1)` partitions, pinning vertex `n-1` to side 0.
///
/// Partitions are walked in Gray-code order so each step costs one vertex's
/// degree. Weighted ties are resolved with a relative tolerance of `1e-12`.
pub fn brute_force_maxcut(graph: &Graph) -> Result<MaxCutSolution> {
    let n = graph.n();
    check_capacity("brute-force MaxCut", n, BRUTE_FORCE_LIMIT)?;
    let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in graph.edges() {
        nbrs[e.u].push((e.v, e.weight));
        nbrs[e.v].push((e.u, e.weight));
    }
    let half = 1usize << (n - 1);
    let mut cuts = Vec::with_capacity(half);
    let mut z = 0usize;
    let mut cut = 0.0f64;
    cuts.push((0usize, 0.0f64));
    for step in 1..half {
        let flip = step.trailing_zeros() as usize;
        let side = (z >> flip) & 1;
        for &(u, w) in &nbrs[flip] {
            if (z >> u) & 1 == side {
                cut += w;
            } else {
                cut -= w;
            }
        }
        z ^= 1 << flip;
        cuts.push((z, cut));
    }
    let best = cuts.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * best.abs().max(1.0);
    let full = (1usize << n) - 1;
    let mut optimal: Vec<usize> = cuts
        .iter()
        .filter(|c| c.1 >= best - tol)
        .flat_map(|c| [c.0, c.0 ^ full])
        .collect();
    optimal.sort_unstable();
    // Recompute the maximum directly to remove Gray-code accumulation error.
    let max_cut_value = optimal
        .iter()
        .map(|&z| graph.cut_value_index(z))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MaxCutSolution { n, max_cut_value, optimal_bitstrings: optimal, min_energy: -max_cut_value })
}

/// Samples a simple connected `d`-regular graph with the pairing model,
/// resampling the whole matching on loops, multi-edges or disconnection.
pub fn generate_connected_regular_graph(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if n < 4 || d == 0 || d >= n || (n * d) % 2 != 0 {
        return Err(Error::param(format!("no connected simple {d}-regular graph sampler for n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<usize> = (0..n * d).map(|p| p / d).collect();
    'attempt: for _ in 0..MAX_GENERATION_ATTEMPTS {
        points.shuffle(&mut rng);
        let mut adj = vec![0u64; n];
        let mut edges = Vec::with_capacity(n * d / 2);
        for pair in points.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || adj[a] >> b & 1 == 1 {
                continue 'attempt;
            }
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        let g = Graph::unweighted(n, &edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Generation(format!(
        "no simple connected {d}-regular graph on {n} vertices after {MAX_GENERATION_ATTEMPTS} attempts"
    )))
}

/// Enumerates connected simple `d`-regular graphs on `n` vertices with vertex
/// 0 adjacent to `1..=d`. Every isomorphism class appears at least once.
pub fn enumerate_connected_regular_graphs(n: usize, d: usize) -> Result<Vec<Graph>> {
    if n < 2 || d == 0 || d >= n || (n * d) % 2 != 0 {
        return Err(Error::param(format!("no simple {d}-regular graph on {n} vertices")));
    }
    check_capacity("regular-graph enumeration", n, ENUMERATION_LIMIT)?;

    struct Search {
        n: usize,
        d: usize,
        adj: Vec<u64>,
        out: Vec<Graph>,
    }

    impl Search {
        fn remaining(&self, v: usize) -> usize {
            self.d - self.adj[v].count_ones() as usize
        }

        fn fill(&mut self, v: usize) {
            if v == self.n {
                let edges: Vec<(usize, usize)> = (0..self.n)
                    .flat_map(|u| {
                        let adj = self.adj[u];
                        (u + 1..self.n).filter(move |&w| adj >> w & 1 == 1).map(move |w| (u, w))
                    })
                    .collect();
                let g = Graph::unweighted(self.n, &edges).expect("enumeration builds simple graphs");
                if g.is_connected() {
                    self.out.push(g);
                }
                return;
            }
            let need = self.remaining(v);
            let candidates: Vec<usize> =
                (v + 1..self.n).filter(|&w| self.remaining(w) > 0).collect();
            if candidates.len() < need {
                return;
            }
            let mut chosen = Vec::with_capacity(need);
            self.choose(v, &candidates, 0, need, &mut chosen);
        }

        fn choose(&mut self, v: usize, cands: &[usize], from: usize, need: usize, chosen: &mut Vec<usize>) {
            if need == 0 {
                for &w in chosen.iter() {
                    self.adj[v] |= 1 << w;
                    self.adj[w] |= 1 << v;
                }
                self.fill(v + 1);
                for &w in chosen.iter() {
                    self.adj[v] &= !(1 << w);
                    self.adj[w] &= !(1 << v);
                }
                return;
            }
            for i in from..cands.len() {
                if cands.len() - i < need {
                    break;
                }
                chosen.push(cands[i]);
                self.choose(v, cands, i + 1, need - 1, chosen);
                chosen.pop();
            }
        }
    }

    let mut search = Search { n, d, adj: vec![0; n], out: Vec::new() };
    for w in 1..=d {
        search.adj[0] |= 1 << w;
        search.adj[w] |= 1 << 0;
    }
    search.fill(1);
    Ok(search.out)
}

/// Isomorphism-invariant summary used to prefilter exact checks.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint {
    degrees: Vec<usize>,
    triangles: Vec<usize>,
    spectrum: Vec<i64>,
}

fn triangle_counts(adj: &[u64]) -> Vec<usize> {
    (0..adj.len())
        .map(|v| {
            let mut nb = adj[v];
            let mut t = 0;
            while nb != 0 {
                let u = nb.trailing_zeros() as usize;
                nb &= nb - 1;
                t += (adj[u] & adj[v]).count_ones() as usize;
            }
            t / 2
        })
        .collect()
}

/// Degree sequence, per-vertex triangle counts and adjacency spectrum
/// (rounded to 1e-6), each sorted. Edge weights are ignored.
pub fn fingerprint(graph: &Graph) -> Fingerprint {
    let n = graph.n();
    let adj = graph.adjacency_masks();
    let mut degrees = graph.degrees();
    degrees.sort_unstable();
    let mut triangles = triangle_counts(&adj);
    triangles.sort_unstable();
    let m = DMatrix::<f64>::from_fn(n, n, |i, j| if adj[i] >> j & 1 == 1 { 1.0 } else { 0.0 });
    let mut spectrum: Vec<i64> = m
        .symmetric_eigenvalues()
        .iter()
        .map(|&x: &f64| (x * 1e6).round() as i64)
        .collect();
    spectrum.sort_unstable();
    Fingerprint { degrees, triangles, spectrum }
}

/// Exact isomorphism test by backtracking, ignoring weights.
pub fn are_isomorphic(a: &Graph, b: &Graph) -> bool {
    if a.n() != b.n() || a.edges().len() != b.edges().len() {
        return false;
    }
    let n = a.n();
    let (adj_a, adj_b) = (a.adjacency_masks(), b.adjacency_masks());
    let (tri_a, tri_b) = (triangle_counts(&adj_a), triangle_counts(&adj_b));
    let key = |adj: &[u64], tri: &[usize], v: usize| (adj[v].count_ones(), tri[v]);

    // Visit `a` in BFS order so each new vertex is constrained by mapped neighbours.
    let mut order = Vec::with_capacity(n);
    let mut placed = 0u64;
    for start in 0..n {
        if placed >> start & 1 == 1 {
            continue;
        }
        placed |= 1 << start;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nb = adj_a[u] & !placed;
            placed |= nb;
            while nb != 0 {
                let v = nb.trailing_zeros() as usize;
                nb &= nb - 1;
                queue.push_back(v);
            }
        }
    }

    fn extend(
        depth: usize,
        order: &[usize],
        map: &mut [usize],
        used: &mut u64,
        ok: &dyn Fn(usize, usize, &[usize]) -> bool,
        n: usize,
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let v = order[depth];
        for cand in 0..n {
            if *used >> cand & 1 == 1 || !ok(v, cand, map) {
                continue;
            }
            map[v] = cand;
            *used |= 1 << cand;
            if extend(depth + 1, order, map, used, ok, n) {
                return true;
            }
            *used &= !(1 << cand);
            map[v] = usize::MAX;
        }
        false
    }

    let ok = |v: usize, cand: usize, map: &[usize]| -> bool {
        if key(&adj_a, &tri_a, v) != key(&adj_b, &tri_b, cand) {
            return false;
        }
        (0..n).all(|u| {
            let mu = map[u];
            mu == usize::MAX || ((adj_a[v] >> u) & 1) == ((adj_b[cand] >> mu) & 1)
        })
    };
    let mut map = vec![usize::MAX; n];
    let mut used = 0u64;
    extend(0, &order, &mut map, &mut used, &ok, n)
}

/// Keeps the first representative of each isomorphism class, in input order.
pub fn dedupe_nonisomorphic(graphs: &[Graph]) -> Result<Vec<Graph>> {
    let Some(first) = graphs.first() else {
        return Ok(Vec::new());
    };
    if graphs.iter().any(|g| g.n() != first.n()) {
        return Err(Error::param("dedupe requires graphs with equal vertex counts"));
    }
    let mut classes: Vec<(Fingerprint, Graph)> = Vec::new();
    for g in graphs {
        let fp = fingerprint(g);
        let dup = classes
            .iter()
            .any(|(cfp, rep)| *cfp == fp && are_isomorphic(rep, g));
        if !dup {
            classes.push((fp, g.clone()));
        }
    }
    Ok(classes.into_iter().map(|(_, g)| g).collect())
}

/// One representative per isomorphism class of connected `d`-regular graphs
/// on `n` vertices.
pub fn nonisomorphic_regular_graphs(n: usize, d: usize) -> Result<Vec<Graph>> {
    dedupe_nonisomorphic(&enumerate_connected_regular_graphs(n, d)?)
}

/// Replaces every weight with an independent draw from `(0, 1]`.
pub fn assign_uniform_weights(graph: &Graph, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = graph
        .edges()
        .iter()
        .map(|e| Edge { weight: 1.0 - rng.random::<f64>(), ..*e })
        .collect();
    Graph { n: graph.n, edges }
}
