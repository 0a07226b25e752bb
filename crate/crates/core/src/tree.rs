//! Weighted least-squares regression trees shared by the booster and the
//! regression forest.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Value of the leaf that `x` falls into. Values at or below a threshold
    /// go left.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_id(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_id returns a leaf"),
        }
    }

    /// Index into `nodes` of the leaf that `x` falls into.
    pub fn leaf_id(&self, x: &[f64]) -> usize {
        let mut id = 0usize;
        loop {
            match &self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Replaces each leaf value with `value(rows)` over the rows of `x`
    /// routed to it. Leaves that receive no rows keep their value.
    pub fn refit_leaves<L: Fn(&[usize]) -> f64>(&mut self, x: &[Vec<f64>], value: L) {
        let mut members = vec![Vec::new(); self.nodes.len()];
        for (i, row) in x.iter().enumerate() {
            members[self.leaf_id(row)].push(i);
        }
        for (node, rows) in self.nodes.iter_mut().zip(members) {
            if let Node::Leaf { value: v } = node {
                if !rows.is_empty() {
                    *v = value(&rows);
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// Column-major covariates.
pub struct Columns<'a> {
    pub cols: &'a [Vec<f64>],
}

impl Columns<'_> {
    pub fn n_features(&self) -> usize {
        self.cols.len()
    }
}

/// Transposes row vectors into columns.
pub fn to_columns(rows: &[Vec<f64>], p: usize) -> Vec<Vec<f64>> {
    (0..p)
        .map(|k| rows.iter().map(|r| r[k]).collect())
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct GrowParams {
    pub max_depth: usize,
    /// Minimum total case weight in each child of a split.
    pub min_leaf_weight: f64,
    /// Features tried per node; `None` tries all of them.
    pub max_features: Option<usize>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Grows a tree that splits on weighted squared error of `target`. The
/// leaf value is computed by `leaf_value` from the rows reaching the leaf.
pub fn grow<R, L>(
    columns: &Columns<'_>,
    target: &[f64],
    weight: &[f64],
    rows: Vec<usize>,
    params: GrowParams,
    leaf_value: &L,
    rng: &mut R,
) -> RegressionTree
where
    R: Rng + ?Sized,
    L: Fn(&[usize]) -> f64,
{
    let mut nodes = Vec::new();
    let mut scratch = Vec::with_capacity(rows.len());
    grow_node(
        columns,
        target,
        weight,
        rows,
        0,
        params,
        leaf_value,
        rng,
        &mut nodes,
        &mut scratch,
    );
    RegressionTree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow_node<R, L>(
    columns: &Columns<'_>,
    target: &[f64],
    weight: &[f64],
    rows: Vec<usize>,
    depth: usize,
    params: GrowParams,
    leaf_value: &L,
    rng: &mut R,
    nodes: &mut Vec<Node>,
    scratch: &mut Vec<(f64, usize)>,
) -> u32
where
    R: Rng + ?Sized,
    L: Fn(&[usize]) -> f64,
{
    let id = nodes.len() as u32;
    let total_w: f64 = rows.iter().map(|&i| weight[i]).sum();
    let split = if depth < params.max_depth && total_w >= 2.0 * params.min_leaf_weight {
        best_split(columns, target, weight, &rows, params, rng, scratch)
    } else {
        None
    };
    let Some(split) = split else {
        nodes.push(Node::Leaf {
            value: leaf_value(&rows),
        });
        return id;
    };

    let col = &columns.cols[split.feature];
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&i| col[i] <= split.threshold);
    nodes.push(Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = grow_node(
        columns, target, weight, left_rows, depth + 1, params, leaf_value, rng, nodes, scratch,
    );
    let right = grow_node(
        columns, target, weight, right_rows, depth + 1, params, leaf_value, rng, nodes, scratch,
    );
    if let Node::Split {
        left: l, right: r, ..
    } = &mut nodes[id as usize]
    {
        *l = left;
        *r = right;
    }
    id
}

fn best_split<R: Rng + ?Sized>(
    columns: &Columns<'_>,
    target: &[f64],
    weight: &[f64],
    rows: &[usize],
    params: GrowParams,
    rng: &mut R,
    scratch: &mut Vec<(f64, usize)>,
) -> Option<Candidate> {
    let p = columns.n_features();
    let features: Vec<usize> = match params.max_features {
        Some(k) if k < p => {
            let mut f = sample(rng, p, k).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..p).collect(),
    };

    let total_w: f64 = rows.iter().map(|&i| weight[i]).sum();
    let total_s: f64 = rows.iter().map(|&i| weight[i] * target[i]).sum();
    let parent = total_s * total_s / total_w;

    let mut best: Option<Candidate> = None;
    for f in features {
        let col = &columns.cols[f];
        scratch.clear();
        scratch.extend(rows.iter().map(|&i| (col[i], i)));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if scratch[0].0 == scratch[scratch.len() - 1].0 {
            continue;
        }
        let mut wl = 0.0;
        let mut sl = 0.0;
        for k in 0..scratch.len() - 1 {
            let (v, i) = scratch[k];
            wl += weight[i];
            sl += weight[i] * target[i];
            let next = scratch[k + 1].0;
            if v == next {
                continue;
            }
            let wr = total_w - wl;
            if wl < params.min_leaf_weight || wr < params.min_leaf_weight {
                continue;
            }
            let sr = total_s - sl;
            let gain = sl * sl / wl + sr * sr / wr - parent;
            // Near-ties keep the earlier candidate so that rounding noise in
            // the sums (weights versus replicated rows) cannot flip a split.
            if gain > 1e-12 * total_w
                && best
                    .as_ref()
                    .is_none_or(|b| gain > b.gain + 1e-9 * b.gain.abs())
            {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(Candidate {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_leaf<'a>(target: &'a [f64], weight: &'a [f64]) -> impl Fn(&[usize]) -> f64 + 'a {
        move |rows: &[usize]| {
            let w: f64 = rows.iter().map(|&i| weight[i]).sum();
            rows.iter().map(|&i| weight[i] * target[i]).sum::<f64>() / w
        }
    }

    #[test]
    fn step_function_is_recovered() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v < 20.0 { 1.0 } else { 5.0 }).collect();
        let w = vec![1.0; 40];
        let cols = vec![x];
        let params = GrowParams {
            max_depth: 3,
            min_leaf_weight: 1.0,
            max_features: None,
        };
        let tree = grow(
            &Columns { cols: &cols },
            &y,
            &w,
            (0..40).collect(),
            params,
            &mean_leaf(&y, &w),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(tree.predict(&[3.0]), 1.0);
        assert_eq!(tree.predict(&[19.4]), 1.0);
        assert_eq!(tree.predict(&[19.6]), 5.0);
        assert_eq!(tree.predict(&[1e9]), 5.0);
        assert_eq!(tree.n_leaves(), 2);
    }

    #[test]
    fn constant_feature_gives_single_leaf() {
        let cols = vec![vec![2.0; 30]];
        let y: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let w = vec![1.0; 30];
        let params = GrowParams {
            max_depth: 5,
            min_leaf_weight: 1.0,
            max_features: None,
        };
        let tree = grow(
            &Columns { cols: &cols },
            &y,
            &w,
            (0..30).collect(),
            params,
            &mean_leaf(&y, &w),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict(&[100.0]), 14.5);
    }

    #[test]
    fn min_leaf_weight_is_respected() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let w = vec![1.0; 20];
        let cols = vec![x];
        let params = GrowParams {
            max_depth: 10,
            min_leaf_weight: 5.0,
            max_features: None,
        };
        let tree = grow(
            &Columns { cols: &cols },
            &y,
            &w,
            (0..20).collect(),
            params,
            &mean_leaf(&y, &w),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(tree.n_leaves() <= 4);
        assert!(tree.depth() <= 2);
    }
}
