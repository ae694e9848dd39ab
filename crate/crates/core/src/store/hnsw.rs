//! Hierarchical navigable small-world graph over unit vectors.
//!
//! Nodes are inserted in entry order and levels are drawn from a seeded
//! ChaCha stream, so a fixed seed reproduces the same graph. Neighbour
//! lists are pruned with the diversity heuristic; layer 0 keeps up to `2m`
//! links, upper layers up to `m`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::HnswParams;
use crate::model::dot;

const MAX_LEVEL: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored {
    sim: f64,
    node: u32,
}

impl Eq for Scored {}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim
            .total_cmp(&other.sim)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HnswStats {
    pub nodes: usize,
    pub max_level: usize,
    pub nodes_per_level: Vec<usize>,
    pub mean_degree_layer0: f64,
}

#[derive(Debug)]
pub struct HnswGraph {
    params: HnswParams,
    dim: usize,
    /// `links[node][layer]` for layers `0..=level(node)`.
    links: Vec<Vec<Vec<u32>>>,
    entry_point: u32,
    max_level: usize,
}

struct Visited {
    bits: Vec<u64>,
}

impl Visited {
    fn new(n: usize) -> Self {
        Self {
            bits: vec![0; n.div_ceil(64)],
        }
    }

    /// Returns true if `i` was not yet visited.
    fn insert(&mut self, i: u32) -> bool {
        let (w, b) = ((i / 64) as usize, i % 64);
        let fresh = self.bits[w] & (1 << b) == 0;
        self.bits[w] |= 1 << b;
        fresh
    }
}

impl HnswGraph {
    pub(super) fn build(vectors: &[f32], dim: usize, params: HnswParams) -> Self {
        let n = vectors.len() / dim;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let level_mult = 1.0 / (params.m as f64).ln();

        let mut graph = Self {
            params,
            dim,
            links: Vec::with_capacity(n),
            entry_point: 0,
            max_level: 0,
        };
        for node in 0..n {
            let u: f64 = 1.0 - rng.random::<f64>();
            let level = ((-u.ln() * level_mult).floor() as usize).min(MAX_LEVEL);
            graph.insert(vectors, node as u32, level);
        }
        graph
    }

    fn row<'a>(&self, vectors: &'a [f32], node: u32) -> &'a [f32] {
        let start = node as usize * self.dim;
        &vectors[start..start + self.dim]
    }

    fn sim(&self, vectors: &[f32], a: u32, q: &[f32]) -> f64 {
        dot(self.row(vectors, a), q)
    }

    fn max_links(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.params.m
        } else {
            self.params.m
        }
    }

    fn insert(&mut self, vectors: &[f32], node: u32, level: usize) {
        self.links.push(vec![Vec::new(); level + 1]);
        if node == 0 {
            self.entry_point = 0;
            self.max_level = level;
            return;
        }
        let q = self.row(vectors, node).to_vec();
        let n = self.links.len();

        let mut ep = Scored {
            sim: self.sim(vectors, self.entry_point, &q),
            node: self.entry_point,
        };
        for layer in (level + 1..=self.max_level).rev() {
            ep = self.greedy(vectors, &q, ep, layer);
        }

        let mut entry = vec![ep];
        for layer in (0..=level.min(self.max_level)).rev() {
            let mut visited = Visited::new(n);
            let found = self.search_layer(
                vectors,
                &q,
                &entry,
                self.params.ef_construction,
                layer,
                &mut visited,
            );
            let chosen = self.select_neighbors(vectors, &found, self.params.m);
            self.links[node as usize][layer] = chosen.iter().map(|s| s.node).collect();

            for s in &chosen {
                self.connect(vectors, s.node, node, layer);
            }
            entry = found;
        }

        if level > self.max_level {
            self.max_level = level;
            self.entry_point = node;
        }
    }

    /// Add `new` to `target`'s links, re-pruning if the list overflows.
    fn connect(&mut self, vectors: &[f32], target: u32, new: u32, layer: usize) {
        let cap = self.max_links(layer);
        if self.links[target as usize][layer].len() < cap {
            self.links[target as usize][layer].push(new);
            return;
        }
        let base = self.row(vectors, target);
        let mut cands: Vec<Scored> = self.links[target as usize][layer]
            .iter()
            .chain(std::iter::once(&new))
            .map(|&c| Scored {
                sim: dot(self.row(vectors, c), base),
                node: c,
            })
            .collect();
        cands.sort_by(|a, b| b.cmp(a));
        let kept = self.select_neighbors(vectors, &cands, cap);
        self.links[target as usize][layer] = kept.into_iter().map(|s| s.node).collect();
    }

    /// Diversity heuristic: keep a candidate only if it is closer to the
    /// base than to every neighbour already kept. `cands` must be sorted
    /// best first.
    fn select_neighbors(&self, vectors: &[f32], cands: &[Scored], m: usize) -> Vec<Scored> {
        let mut kept: Vec<Scored> = Vec::with_capacity(m);
        let mut pruned = Vec::new();
        for &c in cands {
            if kept.len() >= m {
                break;
            }
            let row = self.row(vectors, c.node);
            let diverse = kept
                .iter()
                .all(|k| dot(row, self.row(vectors, k.node)) < c.sim);
            if diverse {
                kept.push(c);
            } else {
                pruned.push(c);
            }
        }
        let room = m - kept.len();
        kept.extend(pruned.into_iter().take(room));
        kept
    }

    fn greedy(&self, vectors: &[f32], q: &[f32], mut best: Scored, layer: usize) -> Scored {
        loop {
            let mut improved = false;
            for &nb in &self.links[best.node as usize][layer] {
                let s = Scored {
                    sim: self.sim(vectors, nb, q),
                    node: nb,
                };
                if s > best {
                    best = s;
                    improved = true;
                }
            }
            if !improved {
                return best;
            }
        }
    }

    /// Beam search on one layer. Returns up to `ef` nodes, best first.
    fn search_layer(
        &self,
        vectors: &[f32],
        q: &[f32],
        entry: &[Scored],
        ef: usize,
        layer: usize,
        visited: &mut Visited,
    ) -> Vec<Scored> {
        let mut candidates: BinaryHeap<Scored> = BinaryHeap::new();
        let mut results: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        for &e in entry {
            if visited.insert(e.node) {
                candidates.push(e);
                results.push(Reverse(e));
                if results.len() > ef {
                    results.pop();
                }
            }
        }

        while let Some(c) = candidates.pop() {
            let worst = results.peek().map(|r| r.0);
            if let Some(w) = worst {
                if c < w && results.len() >= ef {
                    break;
                }
            }
            for &nb in &self.links[c.node as usize][layer] {
                if !visited.insert(nb) {
                    continue;
                }
                let s = Scored {
                    sim: self.sim(vectors, nb, q),
                    node: nb,
                };
                let admit = results.len() < ef || results.peek().is_some_and(|w| s > w.0);
                if admit {
                    candidates.push(s);
                    results.push(Reverse(s));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }

        let mut out: Vec<Scored> = results.into_iter().map(|r| r.0).collect();
        out.sort_by(|a, b| b.cmp(a));
        out
    }

    pub(super) fn search(&self, vectors: &[f32], q: &[f32], k: usize) -> Vec<(usize, f64)> {
        if self.links.is_empty() {
            return Vec::new();
        }
        let mut ep = Scored {
            sim: self.sim(vectors, self.entry_point, q),
            node: self.entry_point,
        };
        for layer in (1..=self.max_level).rev() {
            ep = self.greedy(vectors, q, ep, layer);
        }
        let ef = self.params.ef_search.max(k);
        let mut visited = Visited::new(self.links.len());
        self.search_layer(vectors, q, &[ep], ef, 0, &mut visited)
            .into_iter()
            .map(|s| (s.node as usize, s.sim))
            .collect()
    }

    pub fn stats(&self) -> HnswStats {
        let mut per_level = vec![0usize; self.max_level + 1];
        for node in &self.links {
            for slot in per_level.iter_mut().take(node.len()) {
                *slot += 1;
            }
        }
        let degree_sum: usize = self.links.iter().map(|l| l[0].len()).sum();
        HnswStats {
            nodes: self.links.len(),
            max_level: self.max_level,
            nodes_per_level: per_level,
            mean_degree_layer0: degree_sum as f64 / self.links.len().max(1) as f64,
        }
    }
}
