//! Exhaustive posterior over record partitions for tiny instances.
//!
//! The field parameters are integrated out analytically: each field
//! contributes `sum_{y,z} B(mu + c) / B(mu) * B(a + Z, b + n - Z) / B(a, b)`,
//! and a partition with `k` clusters carries `n! / (n - k)!` labelings.
//! [`quadrature_pair_probabilities`] integrates the same quantities on a grid
//! instead, for two-level fields.

use statrs::function::gamma::ln_gamma;

pub struct Instance {
    /// File index of every record.
    pub files: Vec<usize>,
    /// `records[r][l]`
    pub records: Vec<Vec<u32>>,
    pub levels: Vec<u32>,
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub dedup: bool,
}

fn ln_beta_fn(alpha: &[f64]) -> f64 {
    alpha.iter().map(|&x| ln_gamma(x)).sum::<f64>() - ln_gamma(alpha.iter().sum())
}

/// All set partitions of `0..n` as restricted growth strings.
pub fn partitions(n: usize) -> Vec<Vec<u32>> {
    fn rec(cur: &mut Vec<u32>, max: u32, n: usize, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in 0..=max + 1 {
            cur.push(v);
            rec(cur, max.max(v), n, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut cur = vec![0];
    rec(&mut cur, 0, n, &mut out);
    out
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Marginal log weight of one field under a partition with `k` clusters.
fn field_log_weight(inst: &Instance, part: &[u32], k: usize, l: usize) -> f64 {
    let m = inst.levels[l] as usize;
    let n = part.len();
    let mu = vec![inst.mu; m];
    let base_theta = ln_beta_fn(&mu);
    let base_beta = ln_beta_fn(&[inst.a, inst.b]);
    let mut total = f64::NEG_INFINITY;
    let mut y = vec![0usize; k];
    loop {
        // cells that match their latent may be distorted or not
        let matching: Vec<usize> = (0..n).filter(|&r| inst.records[r][l] as usize == y[part[r] as usize]).collect();
        for mask in 0u64..(1 << matching.len()) {
            let mut counts = vec![0.0; m];
            for &v in &y {
                counts[v] += 1.0;
            }
            let mut z = 0usize;
            for r in 0..n {
                let pos = matching.iter().position(|&q| q == r);
                let distorted = match pos {
                    Some(i) => mask >> i & 1 == 1,
                    None => true,
                };
                if distorted {
                    z += 1;
                    counts[inst.records[r][l] as usize] += 1.0;
                }
            }
            let alpha: Vec<f64> = mu.iter().zip(&counts).map(|(a, c)| a + c).collect();
            let w = ln_beta_fn(&alpha) - base_theta
                + if inst.b.is_infinite() {
                    if z == 0 { 0.0 } else { f64::NEG_INFINITY }
                } else {
                    ln_beta_fn(&[inst.a + z as f64, inst.b + (n - z) as f64]) - base_beta
                };
            total = log_add(total, w);
        }
        // next y assignment
        let mut i = 0;
        while i < k {
            y[i] += 1;
            if y[i] < m {
                break;
            }
            y[i] = 0;
            i += 1;
        }
        if i == k {
            break;
        }
    }
    total
}

/// Normalized posterior over the (restricted growth string) partitions.
pub fn posterior(inst: &Instance) -> Vec<(Vec<u32>, f64)> {
    let n = inst.records.len();
    let mut out = Vec::new();
    for part in partitions(n) {
        let k = *part.iter().max().unwrap() as usize + 1;
        if !inst.dedup {
            let mut ok = true;
            for r in 0..n {
                for q in r + 1..n {
                    if part[r] == part[q] && inst.files[r] == inst.files[q] {
                        ok = false;
                    }
                }
            }
            if !ok {
                continue;
            }
        }
        let labels: f64 = (0..k).map(|i| ((n - i) as f64).ln()).sum();
        let w: f64 = labels + (0..inst.levels.len()).map(|l| field_log_weight(inst, &part, k, l)).sum::<f64>();
        out.push((part, w));
    }
    let max = out.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = out.iter().map(|p| (p.1 - max).exp()).sum();
    out.into_iter().map(|(p, w)| (p, (w - max).exp() / z)).collect()
}

/// `P(records r and q share a latent)` for every pair `r < q`.
pub fn pair_probabilities(inst: &Instance) -> Vec<((usize, usize), f64)> {
    let post = posterior(inst);
    let n = inst.records.len();
    let mut out = Vec::new();
    for r in 0..n {
        for q in r + 1..n {
            let p = post.iter().filter(|(part, _)| part[r] == part[q]).map(|x| x.1).sum();
            out.push(((r, q), p));
        }
    }
    out
}

/// Same as [`pair_probabilities`] but with `theta` and `beta` integrated by
/// the midpoint rule on a `grid x grid` mesh. Every field must have two levels.
pub fn quadrature_pair_probabilities(inst: &Instance, grid: usize) -> Vec<((usize, usize), f64)> {
    assert!(inst.levels.iter().all(|&m| m == 2));
    let n = inst.records.len();
    let h = 1.0 / grid as f64;
    let nodes: Vec<f64> = (0..grid).map(|i| (i as f64 + 0.5) * h).collect();
    let ln_prior_theta = |t: f64| (inst.mu - 1.0) * (t.ln() + (1.0 - t).ln()) - ln_beta_fn(&[inst.mu, inst.mu]);
    let ln_prior_beta =
        |b: f64| (inst.a - 1.0) * b.ln() + (inst.b - 1.0) * (1.0 - b).ln() - ln_beta_fn(&[inst.a, inst.b]);
    let mut post = Vec::new();
    for part in partitions(n) {
        let k = *part.iter().max().unwrap() as usize + 1;
        if !inst.dedup
            && (0..n).any(|r| (r + 1..n).any(|q| part[r] == part[q] && inst.files[r] == inst.files[q]))
        {
            continue;
        }
        let mut w: f64 = (0..k).map(|i| ((n - i) as f64).ln()).sum();
        for l in 0..inst.levels.len() {
            let mut integral = 0.0;
            for &t in &nodes {
                let theta = [t, 1.0 - t];
                for &b in &nodes {
                    // clusters are independent given theta and beta; sum y per cluster
                    let mut like = 1.0;
                    for c in 0..k as u32 {
                        let mut s = 0.0;
                        for v in 0..2 {
                            let mut term = theta[v];
                            for r in (0..n).filter(|&r| part[r] == c) {
                                let x = inst.records[r][l] as usize;
                                term *= (1.0 - b) * (x == v) as u8 as f64 + b * theta[x];
                            }
                            s += term;
                        }
                        like *= s;
                    }
                    integral += like * (ln_prior_theta(t) + ln_prior_beta(b)).exp() * h * h;
                }
            }
            w += integral.ln();
        }
        post.push((part, w));
    }
    let max = post.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = post.iter().map(|p| (p.1 - max).exp()).sum();
    let mut out = Vec::new();
    for r in 0..n {
        for q in r + 1..n {
            let p = post.iter().filter(|(part, _)| part[r] == part[q]).map(|x| (x.1 - max).exp() / z).sum();
            out.push(((r, q), p));
        }
    }
    out
}
