//! Random forest of Gini CART trees on bootstrap samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes in construction order; the root is node 0. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    y: &'a [bool],
    mtry: usize,
    max_depth: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn best_split(&self, sample: &[usize], features: &[usize]) -> Option<(usize, f64, f64)> {
        let total = sample.len();
        let total_pos = sample.iter().filter(|&&i| self.y[i]).count();
        let parent = gini(total_pos, total);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = sample.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let mut left_pos = 0;
            for k in 0..total - 1 {
                left_pos += usize::from(self.y[order[k]]);
                let here = self.rows[order[k]][f];
                let next = self.rows[order[k + 1]][f];
                if here == next {
                    continue;
                }
                let nl = k + 1;
                let nr = total - nl;
                let impurity = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(total_pos - left_pos, nr)) / total as f64;
                let gain = parent - impurity;
                if gain > 1e-12 && best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((f, here + (next - here) / 2.0, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, sample: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let pos = sample.iter().filter(|&&i| self.y[i]).count();
        let value = pos as f64 / sample.len() as f64;
        self.nodes.push(Node::Leaf { value });
        if depth >= self.max_depth || pos == 0 || pos == sample.len() || sample.len() < 2 {
            return id;
        }
        let p = self.rows[0].len();
        let features: Vec<usize> = rand::seq::index::sample(rng, p, self.mtry.min(p)).into_vec();
        let Some((feature, threshold, _)) = self.best_split(&sample, &features) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = sample.iter().partition(|&&i| self.rows[i][feature] <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl ForestModel {
    /// Tree `t` draws its bootstrap sample and feature subsets from a stream
    /// derived from `(seed, t)`, so the result does not depend on scheduling.
    pub fn fit(rows: &[Vec<f64>], y: &[bool], params: ForestParams, seed: u64) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mtry = ((p as f64).sqrt().ceil() as usize).max(1);
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut b = Builder {
                    rows,
                    y,
                    mtry,
                    max_depth: params.max_depth,
                    nodes: Vec::new(),
                };
                b.grow(sample, 0, &mut rng);
                Tree { nodes: b.nodes }
            })
            .collect();
        ForestModel { trees }
    }

    /// Mean positive fraction over the trees' leaves.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}
