//! Isolation forest.
//!
//! Construction consumes a single ChaCha8 stream seeded with the fit seed,
//! tree by tree:
//!
//! 1. draw the subsample with `rand::seq::index::sample(n, ψ)`;
//! 2. grow depth-first, left child before right. At a node holding more
//!    than one point and shallower than `ceil(log2 ψ)`, draw candidate
//!    features uniformly without replacement (`random_range` over the
//!    remaining list, then `swap_remove`) until one is non-constant in the
//!    node, then draw `u = random::<f64>()` and split at
//!    `min + u·(max - min)`; points `<= split` go left. A node with no
//!    non-constant feature becomes a leaf.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::check_dim;
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_9;

/// Average path length of an unsuccessful binary-search-tree lookup among
/// `n` points: `2·H(n-1) - 2(n-1)/n`, `H(i) ≈ ln i + γ`; zero for n ≤ 1.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let nf = n as f64;
    2.0 * ((nf - 1.0).ln() + EULER_GAMMA) - 2.0 * (nf - 1.0) / nf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

/// Nodes in depth-first order; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
}

impl IsolationTree {
    /// Edges from the root to the leaf reached by `h`, plus `c(size)` for
    /// the points left unresolved in that leaf.
    pub fn path_length(&self, h: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0usize;
        loop {
            match &self.nodes[node] {
                Node::Leaf { size } => return depth as f64 + average_path_length(*size),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if h[*feature] <= *threshold { *left } else { *right };
                    depth += 1;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IForestModel {
    pub trees: Vec<IsolationTree>,
    pub subsample_size: usize,
    pub c_norm: f64,
    pub dim: usize,
}

pub const DEFAULT_TREES: usize = 100;
pub const DEFAULT_SUBSAMPLE: usize = 256;

struct Builder<'a, R: AsRef<[f64]>> {
    data: &'a [R],
    dim: usize,
    max_depth: usize,
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<Node>,
    candidates: Vec<usize>,
}

impl<R: AsRef<[f64]>> Builder<'_, R> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { size: idx.len() });
        if idx.len() <= 1 || depth >= self.max_depth {
            return me;
        }
        self.candidates.clear();
        self.candidates.extend(0..self.dim);
        let mut chosen = None;
        while !self.candidates.is_empty() {
            let k = self.rng.random_range(0..self.candidates.len());
            let f = self.candidates.swap_remove(k);
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.data[i].as_ref()[f];
                (lo.min(v), hi.max(v))
            });
            if hi > lo {
                chosen = Some((f, lo, hi));
                break;
            }
        }
        let Some((feature, lo, hi)) = chosen else {
            return me;
        };
        let u: f64 = self.rng.random();
        let mut threshold = lo + u * (hi - lo);
        if threshold >= hi {
            threshold = lo;
        }
        // Partition in place: <= threshold first.
        let mut split = 0;
        for j in 0..idx.len() {
            if self.data[idx[j]].as_ref()[feature] <= threshold {
                idx.swap(split, j);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

/// Height limit `ceil(log2 ψ)`.
pub fn max_depth_for(subsample: usize) -> usize {
    (subsample.max(2) as f64).log2().ceil() as usize
}

pub fn fit_iforest<R: AsRef<[f64]>>(
    data: &[R],
    n_trees: usize,
    subsample: usize,
    seed: u64,
) -> Result<IForestModel> {
    if data.len() < 2 {
        return Err(Error::Fit(format!(
            "isolation forest needs at least 2 samples, got {}",
            data.len()
        )));
    }
    if n_trees == 0 || subsample < 2 {
        return Err(Error::config("isolation forest needs >= 1 tree and subsample >= 2"));
    }
    let dim = data[0].as_ref().len();
    if let Some(bad) = data.iter().find(|r| r.as_ref().len() != dim) {
        return Err(Error::Shape(format!(
            "mixed dimensions {dim} and {}",
            bad.as_ref().len()
        )));
    }
    let psi = subsample.min(data.len());
    let max_depth = max_depth_for(psi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let mut idx = index::sample(&mut rng, data.len(), psi).into_vec();
        let mut b = Builder {
            data,
            dim,
            max_depth,
            rng: &mut rng,
            nodes: Vec::new(),
            candidates: Vec::with_capacity(dim),
        };
        b.grow(&mut idx, 0);
        trees.push(IsolationTree { nodes: b.nodes });
    }
    Ok(IForestModel {
        trees,
        subsample_size: psi,
        c_norm: average_path_length(psi),
        dim,
    })
}

impl IForestModel {
    pub fn mean_path_length(&self, h: &[f64]) -> Result<f64> {
        check_dim(self.dim, h.len())?;
        let total: f64 = self.trees.iter().map(|t| t.path_length(h)).sum();
        Ok(total / self.trees.len() as f64)
    }

    /// `2^(-E[L(h)] / c(ψ))`, in (0, 1]; larger is more anomalous.
    pub fn score(&self, h: &[f64]) -> Result<f64> {
        Ok(score_from_path_length(self.mean_path_length(h)?, self.c_norm))
    }
}

pub fn score_from_path_length(mean_path: f64, c_norm: f64) -> f64 {
    (-mean_path / c_norm).exp2()
}
