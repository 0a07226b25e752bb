//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum of `(1/n) sum ||x_i - y_sigma(i)||^2` over all permutations.
/// For equal sizes some optimal plan is a permutation (Birkhoff).
pub fn brute_force_assignment(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    fn rec(k: usize, x: &[Vec<f64>], y: &[Vec<f64>], used: &mut [bool], acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if k == x.len() {
            *best = acc;
            return;
        }
        for j in 0..y.len() {
            if !used[j] {
                used[j] = true;
                rec(k + 1, x, y, used, acc + sq(&x[k], &y[j]), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, x, y, &mut vec![false; y.len()], 0.0, &mut best);
    best / x.len() as f64
}

/// Min-cost flow by successive shortest paths (Bellman-Ford on the residual
/// graph). Supplies `n` per source and `m` per sink; returns the optimal
/// objective of the uniform-marginal Kantorovich problem.
pub fn ssp_transport_objective(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let (m, n) = (x.len(), y.len());
    let s = m + n;
    let t = s + 1;
    let nodes = t + 1;
    // Edge list with paired reverse edges.
    let mut to = Vec::new();
    let mut cap: Vec<i64> = Vec::new();
    let mut cost = Vec::new();
    let mut adj = vec![Vec::new(); nodes];
    let mut add = |u: usize, v: usize, c: i64, w: f64, adj: &mut Vec<Vec<usize>>| {
        adj[u].push(to.len());
        to.push(v);
        cap.push(c);
        cost.push(w);
        adj[v].push(to.len());
        to.push(u);
        cap.push(0);
        cost.push(-w);
    };
    for i in 0..m {
        add(s, i, n as i64, 0.0, &mut adj);
    }
    for j in 0..n {
        add(m + j, t, m as i64, 0.0, &mut adj);
    }
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            add(i, m + j, i64::MAX / 4, sq(xi, yj), &mut adj);
        }
    }
    let total = (m * n) as i64;
    let mut flowed = 0i64;
    let mut objective = 0.0;
    while flowed < total {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        dist[s] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &adj[u] {
                    if cap[e] > 0 && dist[u] + cost[e] < dist[to[e]] - 1e-12 {
                        dist[to[e]] = dist[u] + cost[e];
                        prev[to[e]] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        assert!(dist[t].is_finite(), "oracle: no augmenting path");
        let mut push = total - flowed;
        let mut v = t;
        while v != s {
            let e = prev[v];
            push = push.min(cap[e]);
            v = to[e ^ 1];
        }
        let mut v = t;
        while v != s {
            let e = prev[v];
            cap[e] -= push;
            cap[e ^ 1] += push;
            objective += push as f64 * cost[e];
            v = to[e ^ 1];
        }
        flowed += push;
    }
    objective / total as f64
}

/// A random coupling with uniform marginals: Sinkhorn scaling of a
/// positive random matrix, iterated to convergence.
pub fn random_feasible_coupling(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<Vec<f64>> {
    let mut g: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(0.01..1.0)).collect())
        .collect();
    for _ in 0..2000 {
        for row in g.iter_mut() {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v *= (1.0 / m as f64) / s);
        }
        for j in 0..n {
            let s: f64 = g.iter().map(|r| r[j]).sum();
            g.iter_mut().for_each(|r| r[j] *= (1.0 / n as f64) / s);
        }
    }
    g
}

pub fn plan_cost(g: &[Vec<f64>], x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let mut c = 0.0;
    for (i, row) in g.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            c += v * sq(&x[i], &y[j]);
        }
    }
    c
}

/// Logistic regression by iteratively reweighted least squares.
/// Returns coefficients and their standard errors.
pub fn irls_logistic(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    let mut cov = vec![vec![0.0; p]; p];
    for _ in 0..50 {
        let mut h = vec![vec![0.0; p]; p];
        let mut g = vec![0.0; p];
        for (xi, &yi) in x.iter().zip(y) {
            let eta: f64 = xi.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            let w = mu * (1.0 - mu);
            for a in 0..p {
                g[a] += xi[a] * (yi - mu);
                for b in 0..p {
                    h[a][b] += w * xi[a] * xi[b];
                }
            }
        }
        cov = invert(&h);
        let step: Vec<f64> = (0..p).map(|a| (0..p).map(|b| cov[a][b] * g[b]).sum()).collect();
        let size = step.iter().map(|v| v.abs()).fold(0.0, f64::max);
        beta.iter_mut().zip(&step).for_each(|(b, s)| *b += s);
        if size < 1e-10 {
            break;
        }
    }
    let se = (0..p).map(|a| cov[a][a].sqrt()).collect();
    (beta, se)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    let pivot_row = m[c].clone();
                    m[r].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}
