use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const TREE_DEPTH: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        class: u8,
    },
    /// Rows with `x[column] <= threshold` go left.
    Split {
        column: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn predict_row(&self, row: &[f64]) -> u8 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { class } => return *class,
                Node::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => node = if row[*column] <= *threshold { left } else { right },
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub root: Node,
    pub max_depth: usize,
    pub width: usize,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Majority class; ties go to 0.
fn majority(indices: &[usize], y: &[u8]) -> u8 {
    let pos = indices.iter().filter(|&&i| y[i] == 1).count();
    u8::from(2 * pos > indices.len())
}

struct BestSplit {
    column: usize,
    threshold: f64,
    impurity: f64,
}

/// Lowest weighted child impurity over all columns and midpoints between
/// consecutive distinct values. Strict improvement is required to replace
/// the incumbent, so ties keep the lower column and lower threshold.
fn best_split(x: &Matrix, y: &[u8], indices: &[usize]) -> Option<BestSplit> {
    let n = indices.len();
    let total_pos = indices.iter().filter(|&&i| y[i] == 1).count();
    let mut best: Option<BestSplit> = None;
    let mut sorted: Vec<(f64, u8)> = Vec::with_capacity(n);
    for column in 0..x.cols() {
        sorted.clear();
        sorted.extend(indices.iter().map(|&i| (x.get(i, column), y[i])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0;
        for k in 0..n - 1 {
            left_pos += usize::from(sorted[k].1);
            if sorted[k].0 == sorted[k + 1].0 {
                continue;
            }
            let left_n = k + 1;
            let right_n = n - left_n;
            let impurity = (left_n as f64 * gini(left_pos, left_n)
                + right_n as f64 * gini(total_pos - left_pos, right_n))
                / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                best = Some(BestSplit {
                    column,
                    threshold: 0.5 * (sorted[k].0 + sorted[k + 1].0),
                    impurity,
                });
            }
        }
    }
    best
}

fn grow(x: &Matrix, y: &[u8], indices: &[usize], depth_left: usize) -> Node {
    let pos = indices.iter().filter(|&&i| y[i] == 1).count();
    let leaf = Node::Leaf {
        class: majority(indices, y),
    };
    if depth_left == 0 || pos == 0 || pos == indices.len() {
        return leaf;
    }
    let Some(split) = best_split(x, y, indices) else {
        return leaf;
    };
    if split.impurity >= gini(pos, indices.len()) {
        return leaf;
    }
    let (l, r): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| x.get(i, split.column) <= split.threshold);
    Node::Split {
        column: split.column,
        threshold: split.threshold,
        left: Box::new(grow(x, y, &l, depth_left - 1)),
        right: Box::new(grow(x, y, &r, depth_left - 1)),
    }
}

/// Greedy Gini-impurity tree.
pub fn train_decision_tree(x: &Matrix, y: &[u8], max_depth: usize) -> Result<DecisionTreeModel> {
    if y.len() != x.rows() {
        return Err(Error::dims("tree labels", x.rows(), y.len()));
    }
    if x.rows() == 0 {
        return Err(Error::Degenerate("tree needs at least one row".into()));
    }
    let indices: Vec<usize> = (0..x.rows()).collect();
    Ok(DecisionTreeModel {
        root: grow(x, y, &indices, max_depth),
        max_depth,
        width: x.cols(),
    })
}

impl DecisionTreeModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        if x.cols() != self.width {
            return Err(Error::dims("tree input width", self.width, x.cols()));
        }
        Ok(x.row_iter().map(|r| self.root.predict_row(r)).collect())
    }
}
