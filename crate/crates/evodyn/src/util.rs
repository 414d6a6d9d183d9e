//! Small numeric helpers shared across modules.

/// Neumaier compensated sum. Keeps validation of near-unit mass honest for
/// supports with thousands of points.
pub fn comp_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comp_sum_recovers_unit_mass() {
        let n = 4001;
        let w = vec![1.0 / n as f64; n];
        assert!((comp_sum(&w) - 1.0).abs() < 1e-14);
    }
}
