//! Slow, direct reference implementations. They share no code with the
//! solver crates and serve as test oracles for them. Matrices are row-major
//! `Vec<Vec<f64>>`.

pub type Rows = Vec<Vec<f64>>;

/// `C(i, j) = Σ_k [(j, k) observed] (M(i, k) − B(j, k))²` by explicit loops.
pub fn pair_cost(mhat: &Rows, data: &Rows, observed: &[Vec<bool>]) -> Rows {
    let n = mhat.len();
    let mut c = vec![vec![0.0; n]; n];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, cij) in row.iter_mut().enumerate() {
            for k in 0..mhat[i].len() {
                if observed[j][k] {
                    *cij += (mhat[i][k] - data[j][k]).powi(2);
                }
            }
        }
    }
    c
}

/// `Σα + Σβ − ε Σ_ij exp((α_i + β_j − C_ij)/ε)` without any stabilization.
pub fn dual_value(c: &Rows, alpha: &[f64], beta: &[f64], eps: f64) -> f64 {
    let mut mass = 0.0;
    for (i, row) in c.iter().enumerate() {
        for (j, &cij) in row.iter().enumerate() {
            mass += ((alpha[i] + beta[j] - cij) / eps).exp();
        }
    }
    alpha.iter().sum::<f64>() + beta.iter().sum::<f64>() - eps * mass
}

/// Matrix-scaling Sinkhorn on `K = exp(−C/ε)` with unit marginals; returns
/// the plan `diag(u) K diag(v)`.
pub fn scaling_sinkhorn(c: &Rows, eps: f64, sweeps: usize) -> Rows {
    let n = c.len();
    let k: Rows = c.iter().map(|r| r.iter().map(|&x| (-x / eps).exp()).collect()).collect();
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; n];
    for _ in 0..sweeps {
        for i in 0..n {
            u[i] = 1.0 / (0..n).map(|j| k[i][j] * v[j]).sum::<f64>();
        }
        for j in 0..n {
            v[j] = 1.0 / (0..n).map(|i| k[i][j] * u[i]).sum::<f64>();
        }
    }
    (0..n).map(|i| (0..n).map(|j| u[i] * k[i][j] * v[j]).collect()).collect()
}

/// Minimum of `Σ_i C(i, p(i))` over all permutations, enumerated with
/// Heap's algorithm. Ties keep the first permutation reached.
pub fn exhaustive_assignment(c: &Rows) -> (Vec<usize>, f64) {
    let n = c.len();
    let total = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| c[i][j]).sum::<f64>();
    let mut p: Vec<usize> = (0..n).collect();
    let mut best = (p.clone(), total(&p));
    let mut stack = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(stack[i], i);
            }
            let t = total(&p);
            if t < best.1 {
                best = (p.clone(), t);
            }
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    best
}

/// Central difference `(f(x + h e_k) − f(x − h e_k)) / 2h` for every coordinate.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            y[k] = x[k] + h;
            let up = f(&y);
            y[k] = x[k] - h;
            let down = f(&y);
            y[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Pearson correlation of average ranks.
pub fn rank_correlation(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let below = v.iter().filter(|&&b| b < a).count() as f64;
                let equal = v.iter().filter(|&&b| b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for k in 0..x.len() {
        sxy += (rx[k] - mx) * (ry[k] - my);
        sxx += (rx[k] - mx).powi(2);
        syy += (ry[k] - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}
