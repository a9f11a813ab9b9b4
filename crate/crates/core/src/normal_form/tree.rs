//! Ordered 5-ary trees of generation `J`, index functions on them and the
//! cumulative-phase regions that split each generation.

use serde::{Deserialize, Serialize};

use super::NormalFormError;

pub const J_MAX: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub parent: Option<usize>,
    /// Position 1..=5 among the parent's children.
    pub child_slot: u8,
    pub children: Option<[usize; 5]>,
}

/// A generation-`J` tree. Node 0 is the root; `parent_order[j]` is the `(j+1)`-th parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub parent_order: Vec<usize>,
}

impl Tree {
    pub fn root() -> Tree {
        let mut t = Tree {
            nodes: vec![Node {
                parent: None,
                child_slot: 0,
                children: None,
            }],
            parent_order: Vec::new(),
        };
        t.expand(0);
        t
    }

    pub fn generation(&self) -> usize {
        self.parent_order.len()
    }

    fn expand(&mut self, at: usize) {
        assert!(self.nodes[at].children.is_none(), "node already has children");
        let base = self.nodes.len();
        for l in 0..5 {
            self.nodes.push(Node {
                parent: Some(at),
                child_slot: (l + 1) as u8,
                children: None,
            });
        }
        self.nodes[at].children = Some([base, base + 1, base + 2, base + 3, base + 4]);
        self.parent_order.push(at);
    }

    /// Leaves that may still become parents: odd children without children.
    pub fn open_leaves(&self) -> Vec<usize> {
        self.parent_order
            .iter()
            .flat_map(|&p| {
                let ch = self.nodes[p].children.expect("parent has children");
                [ch[0], ch[2], ch[4]]
            })
            .filter(|&c| self.nodes[c].children.is_none())
            .collect()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&a| self.nodes[a].children.is_none()).collect()
    }

    /// Leaves in even child positions (the gauge-weight slots).
    pub fn even_leaves(&self) -> Vec<usize> {
        self.leaves()
            .into_iter()
            .filter(|&a| self.nodes[a].child_slot % 2 == 0)
            .collect()
    }

    pub fn odd_leaves(&self) -> Vec<usize> {
        self.leaves()
            .into_iter()
            .filter(|&a| self.nodes[a].child_slot % 2 == 1)
            .collect()
    }

    /// `a >= b`: `b` lies in the subtree of `a`.
    pub fn dominates(&self, a: usize, b: usize) -> bool {
        let mut x = Some(b);
        while let Some(y) = x {
            if y == a {
                return true;
            }
            x = self.nodes[y].parent;
        }
        false
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let j = self.generation();
        if self.nodes.len() != 5 * j + 1 {
            return Err(format!("{} nodes for generation {j}", self.nodes.len()));
        }
        if self.nodes.iter().filter(|n| n.parent.is_none()).count() != 1 {
            return Err("root is not unique".into());
        }
        let internal = self.nodes.iter().filter(|n| n.children.is_some()).count();
        if internal != j || self.leaves().len() != 4 * j + 1 {
            return Err("parent or leaf count".into());
        }
        if self.even_leaves().len() != 2 * j || self.odd_leaves().len() != 2 * j + 1 {
            return Err("leaf split".into());
        }
        for n in &self.nodes {
            if let Some(ch) = n.children {
                if self.nodes[ch[1]].children.is_some() || self.nodes[ch[3]].children.is_some() {
                    return Err("even child has children".into());
                }
            }
        }
        for (j1, &a) in self.parent_order.iter().enumerate() {
            for (j2, &b) in self.parent_order.iter().enumerate() {
                if a != b && self.dominates(a, b) && j1 > j2 {
                    return Err("parent numbering not monotone".into());
                }
            }
        }
        Ok(())
    }
}

/// All numbered trees of generation `J`; there are `prod_{j<=J} (2j - 1)` of them.
pub fn enumerate_trees(j: usize) -> Result<Vec<Tree>, NormalFormError> {
    if j == 0 || j > J_MAX {
        return Err(NormalFormError::GenerationTooLarge(j));
    }
    let mut level = vec![Tree::root()];
    for _ in 1..j {
        let mut next = Vec::new();
        for t in &level {
            for leaf in t.open_leaves() {
                let mut u = t.clone();
                u.expand(leaf);
                next.push(u);
            }
        }
        level = next;
    }
    Ok(level)
}

pub fn tree_count(j: usize) -> usize {
    (1..=j).map(|k| 2 * k - 1).product()
}

/// `#U(J) = 7^J #T(J)`.
pub fn labelled_count(j: usize) -> usize {
    7usize.pow(j as u32) * tree_count(j)
}

/// Frequencies on every node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexFunction {
    pub n: Vec<i64>,
}

impl IndexFunction {
    pub fn check(&self, tree: &Tree) -> Result<(), NormalFormError> {
        for (a, node) in tree.nodes.iter().enumerate() {
            if let Some(ch) = node.children {
                let sum: i64 = ch.iter().map(|&c| self.n[c]).sum();
                if sum != self.n[a] {
                    return Err(NormalFormError::ConstraintViolated { n: self.n[a], sum });
                }
            }
        }
        Ok(())
    }

    /// `Phi_j` of every parent in numbering order.
    pub fn phases(&self, tree: &Tree) -> Vec<i64> {
        tree.parent_order
            .iter()
            .map(|&p| {
                let ch = tree.nodes[p].children.expect("parent");
                super::multiplier::phi(self.n[p], self.n[ch[0]], self.n[ch[2]], self.n[ch[4]])
            })
            .collect()
    }
}

/// Membership of `(mu_1, ..., mu_J)` in the resonant region of generation `J`.
pub fn in_resonant(mu: &[i64], m: f64) -> bool {
    let j = mu.len();
    assert!(j >= 1);
    let cum = cumulative(mu);
    if j == 1 {
        return (cum[0].abs() as f64) <= m;
    }
    if (mu[0].abs() as f64) <= m {
        return false;
    }
    for k in 1..j - 1 {
        if cum[k].abs() <= 2 * cum[k - 1].abs() {
            return false;
        }
    }
    cum[j - 1].abs() <= 2 * cum[j - 2].abs()
}

pub fn in_nonresonant(mu: &[i64], m: f64) -> bool {
    let j = mu.len();
    assert!(j >= 1);
    let cum = cumulative(mu);
    if (mu[0].abs() as f64) <= m {
        return false;
    }
    (1..j).all(|k| cum[k].abs() > 2 * cum[k - 1].abs())
}

pub fn cumulative(mu: &[i64]) -> Vec<i64> {
    mu.iter()
        .scan(0i64, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}
