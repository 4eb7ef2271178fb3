use crate::Real;

/// `(x + y - √(ε² + (x-y)²) + ε) / 2`, within `[min, min + ε/2]`.
pub fn smooth_min_pair<T: Real>(x: T, y: T, eps: T) -> T {
    let d = x - y;
    T::half() * (x + y - (eps * eps + d * d).sqrt() + eps)
}

/// `∂/∂x` of [`smooth_min_pair`].
pub fn smooth_min_pair_dx<T: Real>(x: T, y: T, eps: T) -> T {
    let d = x - y;
    T::half() * (T::one() - d / (eps * eps + d * d).sqrt())
}

/// n-ary smoothed minimum by recursive averaging:
/// `min_ε(x₁..xₙ) = (1/n) Σᵢ min_ε(min_ε(x₁..x̂ᵢ..xₙ), xᵢ)`.
/// Symmetric, `≥ min` and `≤ min + (n-1)ε/2`. Cost grows like `n!`.
pub fn smooth_min<T: Real>(values: &[T], eps: T) -> T {
    match values.len() {
        0 => T::infinity(),
        1 => values[0],
        2 => smooth_min_pair(values[0], values[1], eps),
        n => {
            let mut rest = Vec::with_capacity(n - 1);
            let mut sum = T::zero();
            for i in 0..n {
                rest.clear();
                rest.extend(values.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v));
                sum += smooth_min_pair(smooth_min(&rest, eps), values[i], eps);
            }
            sum / T::from_usize_lossy(n)
        }
    }
}
