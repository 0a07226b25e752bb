//! Primal network simplex for the transportation problem on a complete
//! bipartite graph.
//!
//! Follows the LEMON formulation: an artificial root joined to every node
//! gives the initial strongly feasible spanning tree, the tree is stored as
//! parent/thread/successor arrays, and entering arcs are chosen by block
//! search pricing. Supplies and demands are integral so the optimal flows
//! are exact integers.

const STATE_UPPER: i8 = -1;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;

const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

const NONE: usize = usize::MAX;
const INF: i64 = i64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Nonzero flows `(source, sink, amount)`, sorted by source then sink.
    pub flows: Vec<(usize, usize, i64)>,
    /// Sum of `cost * flow`.
    pub total_cost: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimplexError {
    Unbalanced { supply: i64, demand: i64 },
    Unbounded,
    Infeasible,
}

/// Minimizes `sum cost[i*n + j] * flow[i][j]` subject to row sums
/// `supply[i]` and column sums `demand[j]`, flows nonnegative.
pub fn solve_transportation(
    supply: &[i64],
    demand: &[i64],
    cost: &[f64],
) -> Result<FlowSolution, SimplexError> {
    let total_supply: i64 = supply.iter().sum();
    let total_demand: i64 = demand.iter().sum();
    if total_supply != total_demand || supply.iter().chain(demand).any(|&v| v < 0) {
        return Err(SimplexError::Unbalanced {
            supply: total_supply,
            demand: total_demand,
        });
    }
    assert_eq!(cost.len(), supply.len() * demand.len());
    let mut ns = NetworkSimplex::new(supply, demand, cost);
    ns.run()?;
    Ok(ns.solution())
}

struct NetworkSimplex<'a> {
    m: usize,
    n: usize,
    node_num: usize,
    arc_num: usize,

    cost: &'a [f64],
    art_source: Vec<usize>,
    art_target: Vec<usize>,
    art_cost: Vec<f64>,

    flow: Vec<i64>,
    state: Vec<i8>,

    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pred_dir: Vec<i8>,
    dirty_revs: Vec<usize>,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,

    next_arc: usize,
    block_size: usize,
    eps: f64,
    pivots: usize,
}

impl<'a> NetworkSimplex<'a> {
    fn new(supply: &[i64], demand: &[i64], cost: &'a [f64]) -> Self {
        let m = supply.len();
        let n = demand.len();
        let node_num = m + n;
        let arc_num = m * n;
        let root = node_num;
        let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let art = (max_cost + 1.0) * node_num as f64;

        let mut s = Self {
            m,
            n,
            node_num,
            arc_num,
            cost,
            art_source: vec![0; node_num],
            art_target: vec![0; node_num],
            art_cost: vec![0.0; node_num],
            flow: vec![0; arc_num + node_num],
            state: vec![STATE_LOWER; arc_num + node_num],
            pi: vec![0.0; node_num + 1],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            pred_dir: vec![0; node_num + 1],
            dirty_revs: Vec::new(),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0,
            next_arc: 0,
            block_size: ((arc_num as f64).sqrt().ceil() as usize).max(10),
            // Potentials carry the artificial cost, so rounding scales with it.
            eps: 1e-13 * art,
            pivots: 0,
        };

        s.parent[root] = NONE;
        s.pred[root] = NONE;
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        s.pi[root] = 0.0;

        for u in 0..node_num {
            let e = arc_num + u;
            let b = if u < m { supply[u] } else { -demand[u - m] };
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            if b >= 0 {
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0.0;
                s.art_source[u] = u;
                s.art_target[u] = root;
                s.flow[e] = b;
                s.art_cost[u] = 0.0;
            } else {
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art;
                s.art_source[u] = root;
                s.art_target[u] = u;
                s.flow[e] = -b;
                s.art_cost[u] = art;
            }
        }
        s
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.n
        } else {
            self.art_source[e - self.arc_num]
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.m + e % self.n
        } else {
            self.art_target[e - self.arc_num]
        }
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            self.cost[e]
        } else {
            self.art_cost[e - self.arc_num]
        }
    }

    fn run(&mut self) -> Result<(), SimplexError> {
        while self.find_entering_arc() {
            self.find_join_node();
            if !self.find_leaving_arc() || self.delta == INF {
                return Err(SimplexError::Unbounded);
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            self.pivots += 1;
        }
        if (self.arc_num..self.arc_num + self.node_num).any(|e| self.flow[e] != 0) {
            return Err(SimplexError::Infeasible);
        }
        Ok(())
    }

    /// Block search pricing over the real arcs.
    fn find_entering_arc(&mut self) -> bool {
        if self.arc_num == 0 {
            return false;
        }
        let (m, n) = (self.m, self.n);
        let mut best = -self.eps;
        let mut found = NONE;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        let mut i = e / n;
        let mut j = e % n;
        for _ in 0..self.arc_num {
            let st = self.state[e];
            if st != STATE_TREE {
                let c = st as f64 * (self.cost[e] + self.pi[i] - self.pi[m + j]);
                if c < best {
                    best = c;
                    found = e;
                }
            }
            e += 1;
            j += 1;
            if j == n {
                j = 0;
                i += 1;
            }
            if e == self.arc_num {
                e = 0;
                i = 0;
                j = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found != NONE {
                    self.in_arc = found;
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if found != NONE {
            self.in_arc = found;
            self.next_arc = e;
            true
        } else {
            false
        }
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = if self.state[self.in_arc] == STATE_LOWER {
            (self.source(self.in_arc), self.target(self.in_arc))
        } else {
            (self.target(self.in_arc), self.source(self.in_arc))
        };
        // Every arc is uncapacitated.
        self.delta = INF;
        let mut result = 0;

        let mut u = first;
        while u != self.join {
            let d = if self.pred_dir[u] == DIR_UP {
                self.flow[self.pred[u]]
            } else {
                INF
            };
            if d < self.delta {
                self.delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let d = if self.pred_dir[u] == DIR_DOWN {
                self.flow[self.pred[u]]
            } else {
                INF
            };
            if d <= self.delta {
                self.delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }

        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self) {
        if self.delta > 0 {
            let val = self.state[self.in_arc] as i64 * self.delta;
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.state[out] = if self.flow[out] == 0 {
            STATE_LOWER
        } else {
            STATE_UPPER
        };
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;

        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            // When old_rev_thread == v_in, join and v_out coincide.
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // Reverse the stem between u_in and u_out.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // Shift pred, pred_dir, succ_num and last_succ along the stem.
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc += self.succ_num[u];
                tmp_sc -= self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };
            self.succ_num[u_in] = old_succ_num;
        }

        // last_succ from v_in towards the root.
        let up_limit_out = if self.last_succ[join] == v_in {
            join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        // last_succ from v_out towards the root.
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in]
            - self.pred_dir[u_in] as f64 * self.arc_cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn solution(&self) -> FlowSolution {
        let mut flows = Vec::new();
        let mut total_cost = 0.0;
        for e in 0..self.arc_num {
            let f = self.flow[e];
            if f != 0 {
                flows.push((e / self.n, e % self.n, f));
                total_cost += f as f64 * self.cost[e];
            }
        }
        FlowSolution {
            flows,
            total_cost,
            pivots: self.pivots,
        }
    }
}
