//! Small numeric helpers shared across modules.

/// Index-ordered pairwise summation. The result depends only on the order
/// of `values`, never on how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n if n <= 8 => values.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Number of count vectors of length `cells` summing to `total`
/// (stars and bars), saturating at `u128::MAX`.
pub fn composition_count(total: usize, cells: usize) -> u128 {
    if cells == 0 {
        return u128::from(total == 0);
    }
    // C(total + cells - 1, cells - 1)
    let n = (total + cells - 1) as u128;
    let k = (cells - 1).min(total) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Enumerates all count vectors of length `cells` summing to `total`, in
/// lexicographically decreasing order of the leading cells.
pub fn compositions(total: usize, cells: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; cells];
    fn rec(pos: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let cells = cur.len();
        if pos + 1 == cells {
            cur[pos] = left as u32;
            out.push(cur.clone());
            return;
        }
        for c in (0..=left).rev() {
            cur[pos] = c as u32;
            rec(pos + 1, left - c, cur, out);
        }
    }
    if cells > 0 {
        rec(0, total, &mut cur, &mut out);
    }
    out
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
