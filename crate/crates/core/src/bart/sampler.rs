//! One MCMC chain over a sum of trees on the standardized outcome.
//!
//! Each tree keeps a row-to-leaf map so every pass over the training rows is
//! a sequential scan.

use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::{BartControls, CNode};
use crate::seed::Rng;

const NONE: u32 = u32::MAX;

/// Training data reduced to cutpoint bins: `bins[j][r]` counts the cutpoints
/// of column `j` that are `<= x[r][j]`, so `x < cuts[j][c]` iff `bins <= c`.
pub(crate) struct Prepared {
    pub bins: Vec<Vec<u32>>,
    pub cuts: Vec<Vec<f64>>,
    /// Standardized outcome.
    pub y: Vec<f64>,
}

impl Prepared {
    fn n(&self) -> usize {
        self.y.len()
    }
}

#[derive(Clone, Debug)]
struct TNode {
    parent: u32,
    left: u32,
    right: u32,
    var: u32,
    cut: u32,
    mu: f64,
    /// Residual sum and row count; current on leaves during a tree update.
    sum: f64,
    cnt: u32,
    alive: bool,
}

impl TNode {
    fn leaf(parent: u32) -> Self {
        TNode {
            parent,
            left: NONE,
            right: NONE,
            var: 0,
            cut: 0,
            mu: 0.0,
            sum: 0.0,
            cnt: 0,
            alive: true,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Tree {
    nodes: Vec<TNode>,
    free: Vec<u32>,
    /// Leaf node id of every training row.
    leaf_of: Vec<u16>,
}

impl Tree {
    fn root(n: usize, mu: f64) -> Self {
        let mut root = TNode::leaf(NONE);
        root.mu = mu;
        Tree {
            nodes: vec![root],
            free: Vec::new(),
            leaf_of: vec![0; n],
        }
    }

    fn root_only(&self) -> bool {
        self.nodes[0].left == NONE
    }

    fn is_leaf(&self, i: u32) -> bool {
        self.nodes[i as usize].left == NONE
    }

    fn alloc(&mut self, node: TNode) -> u32 {
        match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                i
            }
            None => {
                self.nodes.push(node);
                let id = self.nodes.len() - 1;
                assert!(id < usize::from(u16::MAX), "tree exceeds node capacity");
                id as u32
            }
        }
    }

    fn release(&mut self, i: u32) {
        self.nodes[i as usize].alive = false;
        self.free.push(i);
    }

    fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.alive)
            .map(|(i, _)| i as u32)
    }

    pub(crate) fn leaves(&self) -> Vec<u32> {
        self.ids().filter(|&i| self.is_leaf(i)).collect()
    }

    fn internals(&self) -> Vec<u32> {
        self.ids().filter(|&i| !self.is_leaf(i)).collect()
    }

    /// Internal nodes whose children are both leaves.
    fn nogs(&self) -> Vec<u32> {
        self.ids()
            .filter(|&i| {
                let n = &self.nodes[i as usize];
                n.left != NONE && self.is_leaf(n.left) && self.is_leaf(n.right)
            })
            .collect()
    }

    fn depth_of(&self, mut i: u32) -> usize {
        let mut d = 0;
        while self.nodes[i as usize].parent != NONE {
            i = self.nodes[i as usize].parent;
            d += 1;
        }
        d
    }

    #[cfg(test)]
    pub(crate) fn depth(&self) -> usize {
        self.leaves().into_iter().map(|l| self.depth_of(l)).max().unwrap_or(0)
    }

    #[cfg(test)]
    pub(crate) fn n_leaves(&self) -> usize {
        self.leaves().len()
    }

    /// Half-open cut index ranges `[lo, hi)` still available below node `i`.
    fn ranges(&self, i: u32, ncuts: &[u32]) -> (Vec<u32>, Vec<u32>) {
        let mut lo = vec![0u32; ncuts.len()];
        let mut hi = ncuts.to_vec();
        let mut child = i;
        let mut cur = self.nodes[i as usize].parent;
        while cur != NONE {
            let n = &self.nodes[cur as usize];
            let v = n.var as usize;
            if n.left == child {
                hi[v] = hi[v].min(n.cut);
            } else {
                lo[v] = lo[v].max(n.cut + 1);
            }
            child = cur;
            cur = n.parent;
        }
        (lo, hi)
    }

    fn has_rules(&self, i: u32, ncuts: &[u32]) -> bool {
        let (lo, hi) = self.ranges(i, ncuts);
        lo.iter().zip(&hi).any(|(a, b)| a < b)
    }

    fn leaves_under(&self, i: u32, out: &mut Vec<u32>) {
        if self.is_leaf(i) {
            out.push(i);
        } else {
            let n = &self.nodes[i as usize];
            let (l, r) = (n.left, n.right);
            self.leaves_under(l, out);
            self.leaves_under(r, out);
        }
    }

    #[inline]
    fn route(&self, mut i: u32, row: usize, bins: &[Vec<u32>]) -> u32 {
        loop {
            let n = &self.nodes[i as usize];
            if n.left == NONE {
                return i;
            }
            i = if bins[n.var as usize][row] <= n.cut { n.left } else { n.right };
        }
    }

    /// Compact copy with thresholds in column units, preorder from the root.
    pub(crate) fn compact(&self, cuts: &[Vec<f64>], out: &mut Vec<CNode>) {
        fn go(t: &Tree, i: u32, cuts: &[Vec<f64>], out: &mut Vec<CNode>) -> u32 {
            let id = out.len() as u32;
            let n = &t.nodes[i as usize];
            if n.left == NONE {
                out.push(CNode::leaf(n.mu));
            } else {
                out.push(CNode::leaf(0.0));
                let l = go(t, n.left, cuts, out);
                let r = go(t, n.right, cuts, out);
                out[id as usize] = CNode {
                    var: n.var,
                    threshold: cuts[n.var as usize][n.cut as usize],
                    left: l - id,
                    right: r - id,
                    mu: 0.0,
                };
            }
            id
        }
        go(self, 0, cuts, out);
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Move {
    Grow,
    Prune,
    Change,
    Swap,
}

pub(crate) struct Chain<'a> {
    data: &'a Prepared,
    ctl: &'a BartControls,
    ncuts: Vec<u32>,
    pub(crate) trees: Vec<Tree>,
    /// Sum of all tree outputs per training row.
    pub(crate) allfit: Vec<f64>,
    /// Partial residual of the tree being updated.
    resid: Vec<f64>,
    pub(crate) sigma2: f64,
    tau2: f64,
    nu_lambda: f64,
    rng: Rng,
    pub(crate) proposed: [u64; 4],
    pub(crate) accepted: [u64; 4],
    /// Tentative leaf ids while a change or swap is evaluated.
    tmp_leaf: Vec<u16>,
}

impl<'a> Chain<'a> {
    pub(crate) fn new(data: &'a Prepared, ctl: &'a BartControls, sigma_hat: f64, lambda: f64, rng: Rng) -> Self {
        let n = data.n();
        let m = ctl.trees;
        let ybar = data.y.iter().sum::<f64>() / n as f64;
        let mu0 = ybar / m as f64;
        let tau = 0.5 / (ctl.k * (m as f64).sqrt());
        Chain {
            data,
            ctl,
            ncuts: data.cuts.iter().map(|c| c.len() as u32).collect(),
            trees: (0..m).map(|_| Tree::root(n, mu0)).collect(),
            allfit: vec![mu0 * m as f64; n],
            resid: vec![0.0; n],
            sigma2: sigma_hat * sigma_hat,
            tau2: tau * tau,
            nu_lambda: ctl.nu * lambda,
            rng,
            proposed: [0; 4],
            accepted: [0; 4],
            tmp_leaf: vec![0; n],
        }
    }

    fn p_split(&self, depth: usize, navail: usize) -> f64 {
        if navail == 0 {
            0.0
        } else {
            self.ctl.alpha * (1.0 + depth as f64).powf(-self.ctl.beta)
        }
    }

    /// Log prior of the subtree at `i` given ancestor ranges; `None` if some
    /// split uses a cut outside its available range.
    fn log_prior(&self, t: &Tree, i: u32, lo: &mut [u32], hi: &mut [u32], depth: usize) -> Option<f64> {
        let navail = lo.iter().zip(hi.iter()).filter(|(l, h)| l < h).count();
        let ps = self.p_split(depth, navail);
        let n = &t.nodes[i as usize];
        if n.left == NONE {
            return Some((1.0 - ps).ln());
        }
        let v = n.var as usize;
        if !(lo[v] <= n.cut && n.cut < hi[v]) {
            return None;
        }
        let own = ps.ln() - (navail as f64).ln() - f64::from(hi[v] - lo[v]).ln();
        let saved = hi[v];
        hi[v] = n.cut;
        let l = self.log_prior(t, n.left, lo, hi, depth + 1);
        hi[v] = saved;
        let saved = lo[v];
        lo[v] = n.cut + 1;
        let r = self.log_prior(t, n.right, lo, hi, depth + 1);
        lo[v] = saved;
        Some(own + l? + r?)
    }

    fn subtree_prior(&self, t: &Tree, i: u32) -> Option<f64> {
        let (mut lo, mut hi) = t.ranges(i, &self.ncuts);
        self.log_prior(t, i, &mut lo, &mut hi, t.depth_of(i))
    }

    /// Integrated log likelihood of one leaf, up to terms common to all trees.
    fn leaf_ll(&self, n: u32, sum: f64) -> f64 {
        if self.ctl.prior_only {
            return 0.0;
        }
        let s2 = self.sigma2;
        let v = s2 + f64::from(n) * self.tau2;
        0.5 * (s2 / v).ln() + self.tau2 * sum * sum / (2.0 * s2 * v)
    }

    fn too_small(&self, n: u32) -> bool {
        !self.ctl.prior_only && (n as usize) < self.ctl.min_leaf
    }

    fn available(lo: &[u32], hi: &[u32]) -> Vec<usize> {
        (0..lo.len()).filter(|&j| lo[j] < hi[j]).collect()
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        log_ratio >= 0.0 || self.rng.random::<f64>().ln() < log_ratio
    }

    fn choose<T: Copy>(&mut self, xs: &[T]) -> T {
        xs[self.rng.random_range(0..xs.len())]
    }

    /// One full sweep: every tree gets an MH move and new leaf values, then
    /// sigma is redrawn.
    pub(crate) fn step(&mut self) {
        for t in 0..self.trees.len() {
            self.update_tree(t);
        }
        if !self.ctl.prior_only {
            self.draw_sigma();
        }
    }

    fn update_tree(&mut self, t: usize) {
        let mut tree = std::mem::take(&mut self.trees[t]);
        for node in &mut tree.nodes {
            node.sum = 0.0;
            node.cnt = 0;
        }
        for ((r, &leaf), (&y, &f)) in self
            .resid
            .iter_mut()
            .zip(&tree.leaf_of)
            .zip(self.data.y.iter().zip(&self.allfit))
        {
            let node = &mut tree.nodes[leaf as usize];
            *r = y - f + node.mu;
            node.sum += *r;
            node.cnt += 1;
        }
        let mv = if tree.root_only() {
            Move::Grow
        } else {
            let u: f64 = self.rng.random();
            if u < 0.25 {
                Move::Grow
            } else if u < 0.5 {
                Move::Prune
            } else if u < 0.9 {
                Move::Change
            } else {
                Move::Swap
            }
        };
        let k = mv as usize;
        self.proposed[k] += 1;
        let ok = match mv {
            Move::Grow => self.grow(&mut tree),
            Move::Prune => self.prune(&mut tree),
            Move::Change => self.change(&mut tree),
            Move::Swap => self.swap(&mut tree),
        };
        if ok {
            self.accepted[k] += 1;
        }
        self.draw_leaves(&mut tree);
        self.trees[t] = tree;
    }

    fn move_prob(t: &Tree, mv: Move) -> f64 {
        match (t.root_only(), mv) {
            (true, Move::Grow) => 1.0,
            (true, _) => 0.0,
            (false, Move::Grow) | (false, Move::Prune) => 0.25,
            (false, Move::Change) => 0.4,
            (false, Move::Swap) => 0.1,
        }
    }

    fn grow(&mut self, tree: &mut Tree) -> bool {
        let q_fwd_move = Self::move_prob(tree, Move::Grow);
        let growable: Vec<u32> = tree
            .leaves()
            .into_iter()
            .filter(|&l| tree.has_rules(l, &self.ncuts))
            .collect();
        if growable.is_empty() {
            return false;
        }
        let leaf = self.choose(&growable);
        let (lo, hi) = tree.ranges(leaf, &self.ncuts);
        let vars = Self::available(&lo, &hi);
        let v = self.choose(&vars);
        let cut = self.rng.random_range(lo[v]..hi[v]);

        let bins = &self.data.bins[v];
        let target = leaf as u16;
        let (mut nl, mut sl) = (0u32, 0.0);
        for ((&l, &b), &r) in tree.leaf_of.iter().zip(bins).zip(&self.resid) {
            if l == target && b <= cut {
                nl += 1;
                sl += r;
            }
        }
        let (n, s) = (tree.nodes[leaf as usize].cnt, tree.nodes[leaf as usize].sum);
        let (nr, sr) = (n - nl, s - sl);
        if self.too_small(nl) || self.too_small(nr) {
            return false;
        }
        let d_ll = self.leaf_ll(nl, sl) + self.leaf_ll(nr, sr) - self.leaf_ll(n, s);

        let lp_before = self.subtree_prior(tree, leaf).expect("current tree is valid");
        // Build the proposal in place; undone on rejection.
        let lnode = tree.alloc(TNode::leaf(leaf));
        let rnode = tree.alloc(TNode::leaf(leaf));
        {
            let node = &mut tree.nodes[leaf as usize];
            node.left = lnode;
            node.right = rnode;
            node.var = v as u32;
            node.cut = cut;
        }
        let lp_after = self.subtree_prior(tree, leaf).expect("grow uses an available rule");
        let n_nog_after = tree.nogs().len();
        let q_fwd = q_fwd_move.ln()
            - (growable.len() as f64).ln()
            - (vars.len() as f64).ln()
            - f64::from(hi[v] - lo[v]).ln();
        let q_rev = 0.25f64.ln() - (n_nog_after as f64).ln();
        let log_ratio = d_ll + lp_after - lp_before + q_rev - q_fwd;
        if self.accept(log_ratio) {
            let (lu, ru) = (lnode as u16, rnode as u16);
            for (l, &b) in tree.leaf_of.iter_mut().zip(bins) {
                if *l == target {
                    *l = if b <= cut { lu } else { ru };
                }
            }
            let ln = &mut tree.nodes[lnode as usize];
            (ln.sum, ln.cnt) = (sl, nl);
            let rn = &mut tree.nodes[rnode as usize];
            (rn.sum, rn.cnt) = (sr, nr);
            true
        } else {
            tree.release(rnode);
            tree.release(lnode);
            let node = &mut tree.nodes[leaf as usize];
            node.left = NONE;
            node.right = NONE;
            false
        }
    }

    fn prune(&mut self, tree: &mut Tree) -> bool {
        let nogs = tree.nogs();
        if nogs.is_empty() {
            return false;
        }
        let node = self.choose(&nogs);
        let (l, r) = (tree.nodes[node as usize].left, tree.nodes[node as usize].right);
        let (nl, sl) = (tree.nodes[l as usize].cnt, tree.nodes[l as usize].sum);
        let (nr, sr) = (tree.nodes[r as usize].cnt, tree.nodes[r as usize].sum);
        let d_ll = self.leaf_ll(nl + nr, sl + sr) - self.leaf_ll(nl, sl) - self.leaf_ll(nr, sr);

        let lp_before = self.subtree_prior(tree, node).expect("current tree is valid");
        let q_fwd = Self::move_prob(tree, Move::Prune).ln() - (nogs.len() as f64).ln();
        let var = tree.nodes[node as usize].var as usize;
        // Detach the children to score the pruned tree.
        tree.nodes[node as usize].left = NONE;
        tree.nodes[node as usize].right = NONE;
        tree.nodes[l as usize].alive = false;
        tree.nodes[r as usize].alive = false;
        let lp_after = self.subtree_prior(tree, node).expect("a leaf is always valid");
        // Reverse: grow this leaf with the same rule in the pruned tree.
        let n_growable = tree
            .leaves()
            .into_iter()
            .filter(|&x| tree.has_rules(x, &self.ncuts))
            .count();
        let (lo, hi) = tree.ranges(node, &self.ncuts);
        let nvars = Self::available(&lo, &hi).len();
        let q_rev = Self::move_prob(tree, Move::Grow).ln()
            - (n_growable as f64).ln()
            - (nvars as f64).ln()
            - f64::from(hi[var] - lo[var]).ln();
        let log_ratio = d_ll + lp_after - lp_before + q_rev - q_fwd;
        tree.nodes[l as usize].alive = true;
        tree.nodes[r as usize].alive = true;
        if self.accept(log_ratio) {
            let (lu, ru, nu) = (l as u16, r as u16, node as u16);
            for x in &mut tree.leaf_of {
                if *x == lu || *x == ru {
                    *x = nu;
                }
            }
            let p = &mut tree.nodes[node as usize];
            (p.sum, p.cnt) = (sl + sr, nl + nr);
            tree.release(r);
            tree.release(l);
            true
        } else {
            tree.nodes[node as usize].left = l;
            tree.nodes[node as usize].right = r;
            false
        }
    }

    /// Re-route the rows under `top` after its rules changed. Returns the
    /// likelihood change and the new `(sum, count)` of each subtree leaf, or
    /// `None` when a leaf falls below the minimum size. Tentative leaf ids
    /// are left in `tmp_leaf`.
    fn reroute(&mut self, tree: &Tree, top: u32, leaves: &[u32]) -> Option<(f64, Vec<(f64, u32)>)> {
        let mut slot = vec![usize::MAX; tree.nodes.len()];
        for (k, &l) in leaves.iter().enumerate() {
            slot[l as usize] = k;
        }
        let mut stats = vec![(0.0, 0u32); leaves.len()];
        let bins = &self.data.bins;
        for (row, ((&leaf, tmp), &r)) in tree
            .leaf_of
            .iter()
            .zip(self.tmp_leaf.iter_mut())
            .zip(&self.resid)
            .enumerate()
        {
            if slot[leaf as usize] != usize::MAX {
                let dest = tree.route(top, row, bins);
                *tmp = dest as u16;
                let s = &mut stats[slot[dest as usize]];
                s.0 += r;
                s.1 += 1;
            }
        }
        let mut d_ll = 0.0;
        for (&l, &(sum, cnt)) in leaves.iter().zip(&stats) {
            if self.too_small(cnt) {
                return None;
            }
            let old = &tree.nodes[l as usize];
            d_ll += self.leaf_ll(cnt, sum) - self.leaf_ll(old.cnt, old.sum);
        }
        Some((d_ll, stats))
    }

    /// Adopt the tentative assignment computed by `reroute`.
    fn commit_reroute(&self, tree: &mut Tree, leaves: &[u32], stats: &[(f64, u32)]) {
        let mut under = vec![false; tree.nodes.len()];
        for &l in leaves {
            under[l as usize] = true;
        }
        for (leaf, &tmp) in tree.leaf_of.iter_mut().zip(&self.tmp_leaf) {
            if under[*leaf as usize] {
                *leaf = tmp;
            }
        }
        for (&l, &(sum, cnt)) in leaves.iter().zip(stats) {
            let node = &mut tree.nodes[l as usize];
            (node.sum, node.cnt) = (sum, cnt);
        }
    }

    fn change(&mut self, tree: &mut Tree) -> bool {
        let internals = tree.internals();
        if internals.is_empty() {
            return false;
        }
        let node = self.choose(&internals);
        let (lo, hi) = tree.ranges(node, &self.ncuts);
        let vars = Self::available(&lo, &hi);
        let v = self.choose(&vars);
        let cut = self.rng.random_range(lo[v]..hi[v]);
        let (old_v, old_cut) = (tree.nodes[node as usize].var, tree.nodes[node as usize].cut);
        let lp_before = self.subtree_prior(tree, node).expect("current tree is valid");
        tree.nodes[node as usize].var = v as u32;
        tree.nodes[node as usize].cut = cut;
        let restore = |tree: &mut Tree| {
            tree.nodes[node as usize].var = old_v;
            tree.nodes[node as usize].cut = old_cut;
        };
        let Some(lp_after) = self.subtree_prior(tree, node) else {
            restore(tree);
            return false;
        };
        let mut leaves = Vec::new();
        tree.leaves_under(node, &mut leaves);
        let Some((d_ll, stats)) = self.reroute(tree, node, &leaves) else {
            restore(tree);
            return false;
        };
        let q_ratio = f64::from(hi[v] - lo[v]).ln() - f64::from(hi[old_v as usize] - lo[old_v as usize]).ln();
        if self.accept(d_ll + lp_after - lp_before + q_ratio) {
            self.commit_reroute(tree, &leaves, &stats);
            true
        } else {
            restore(tree);
            false
        }
    }

    fn swap(&mut self, tree: &mut Tree) -> bool {
        let pairs: Vec<(u32, u32)> = tree
            .internals()
            .into_iter()
            .flat_map(|i| {
                let n = &tree.nodes[i as usize];
                [n.left, n.right].into_iter().filter(|&c| !tree.is_leaf(c)).map(move |c| (i, c))
            })
            .collect();
        if pairs.is_empty() {
            return false;
        }
        let (parent, child) = self.choose(&pairs);
        let rule = |t: &Tree, i: u32| (t.nodes[i as usize].var, t.nodes[i as usize].cut);
        let (pl, pr) = (tree.nodes[parent as usize].left, tree.nodes[parent as usize].right);
        let sibling = if pl == child { pr } else { pl };
        let prule = rule(tree, parent);
        let crule = rule(tree, child);
        let both = !tree.is_leaf(sibling) && rule(tree, sibling) == crule;
        let set = |t: &mut Tree, i: u32, r: (u32, u32)| {
            t.nodes[i as usize].var = r.0;
            t.nodes[i as usize].cut = r.1;
        };
        let lp_before = self.subtree_prior(tree, parent).expect("current tree is valid");
        set(tree, parent, crule);
        set(tree, child, prule);
        if both {
            set(tree, sibling, prule);
        }
        let undo = |t: &mut Tree| {
            set(t, parent, prule);
            set(t, child, crule);
            if both {
                set(t, sibling, crule);
            }
        };
        let Some(lp_after) = self.subtree_prior(tree, parent) else {
            undo(tree);
            return false;
        };
        let mut leaves = Vec::new();
        tree.leaves_under(parent, &mut leaves);
        let Some((d_ll, stats)) = self.reroute(tree, parent, &leaves) else {
            undo(tree);
            return false;
        };
        if self.accept(d_ll + lp_after - lp_before) {
            self.commit_reroute(tree, &leaves, &stats);
            true
        } else {
            undo(tree);
            false
        }
    }

    fn draw_leaves(&mut self, tree: &mut Tree) {
        for leaf in tree.leaves() {
            let z: f64 = self.rng.sample(StandardNormal);
            let node = &mut tree.nodes[leaf as usize];
            node.mu = if self.ctl.prior_only {
                z * self.tau2.sqrt()
            } else {
                let prec = f64::from(node.cnt) / self.sigma2 + 1.0 / self.tau2;
                node.sum / self.sigma2 / prec + z / prec.sqrt()
            };
        }
        let nodes = &tree.nodes;
        for ((f, &leaf), (&y, &r)) in self
            .allfit
            .iter_mut()
            .zip(&tree.leaf_of)
            .zip(self.data.y.iter().zip(&self.resid))
        {
            *f = y - r + nodes[leaf as usize].mu;
        }
    }

    fn draw_sigma(&mut self) {
        let n = self.data.n();
        let ssr: f64 = self
            .data
            .y
            .iter()
            .zip(&self.allfit)
            .map(|(y, f)| (y - f) * (y - f))
            .sum();
        let chi = ChiSquared::new(self.ctl.nu + n as f64).expect("positive degrees of freedom");
        self.sigma2 = (self.nu_lambda + ssr) / chi.sample(&mut self.rng);
    }

    /// Sum of tree outputs recomputed by routing every row from the root.
    #[cfg(test)]
    pub(crate) fn recompute_fit(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.data.n()];
        for t in &self.trees {
            for (row, v) in f.iter_mut().enumerate() {
                *v += t.nodes[t.route(0, row, &self.data.bins) as usize].mu;
            }
        }
        f
    }

    /// Every row's recorded leaf is a live leaf and the one it routes to.
    #[cfg(test)]
    pub(crate) fn routes_agree(&self) -> bool {
        self.trees.iter().all(|t| {
            t.leaf_of.iter().enumerate().all(|(row, &l)| {
                let l = u32::from(l);
                t.nodes[l as usize].alive && t.is_leaf(l) && t.route(0, row, &self.data.bins) == l
            })
        })
    }
}
