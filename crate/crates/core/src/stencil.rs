//! Finite-difference weights on arbitrary node sets and trapezoidal quadrature.

use crate::Real;

/// Fornberg's recursion: weights `w[d][k]` such that
/// `f^{(d)}(x0) ≈ Σ_k w[d][k] f(nodes[k])` for `d = 0..=max_order`.
pub fn fd_weights<T: Real>(x0: T, nodes: &[T], max_order: usize) -> Vec<Vec<T>> {
    let n = nodes.len();
    assert!(n > max_order, "need more nodes than the derivative order");
    let mut c = vec![vec![T::zero(); n]; max_order + 1];
    c[0][0] = T::one();
    let mut c1 = T::one();
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    let kk = T::from_usize_lossy(k);
                    c[k][i] = c1 * (kk * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                let kk = T::from_usize_lossy(k);
                c[k][j] = (c4 * c[k][j] - kk * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Applies derivative weights in difference form, `Σ_k w_k (f_k - f_ref)`,
/// which vanishes exactly on constants.
pub fn apply_difference<T: Real>(weights: &[T], values: &[T], reference: T) -> T {
    weights.iter().zip(values).fold(T::zero(), |acc, (&w, &v)| acc + w * (v - reference))
}

/// Composite trapezoid weights on a (possibly non-uniform) node list.
pub fn trapezoid_weights<T: Real>(nodes: &[T]) -> Vec<T> {
    let n = nodes.len();
    let mut w = vec![T::zero(); n];
    for k in 0..n.saturating_sub(1) {
        let h = nodes[k + 1] - nodes[k];
        w[k] += T::half() * h;
        w[k + 1] += T::half() * h;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_weights_on_uniform_grid() {
        let w = fd_weights(0.0f64, &[-1.0, 0.0, 1.0], 2);
        assert!((w[1][0] + 0.5).abs() < 1e-15 && (w[1][2] - 0.5).abs() < 1e-15);
        assert!((w[2][0] - 1.0).abs() < 1e-15 && (w[2][1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn one_sided_three_point() {
        let w = fd_weights(0.0f64, &[0.0, 1.0, 2.0], 1);
        assert!((w[1][0] + 1.5).abs() < 1e-15);
        assert!((w[1][1] - 2.0).abs() < 1e-15);
        assert!((w[1][2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn nonuniform_weights_exact_on_quadratics() {
        let nodes = [0.0f64, 0.3, 0.45, 1.0];
        let w = fd_weights(0.3, &nodes, 2);
        let f: Vec<f64> = nodes.iter().map(|x| 1.0 + 2.0 * x + 3.0 * x * x).collect();
        let d1: f64 = w[1].iter().zip(&f).map(|(a, b)| a * b).sum();
        let d2: f64 = w[2].iter().zip(&f).map(|(a, b)| a * b).sum();
        assert!((d1 - (2.0 + 6.0 * 0.3)).abs() < 1e-12);
        assert!((d2 - 6.0).abs() < 1e-12);
    }
}
