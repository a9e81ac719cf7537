use super::Tensor;

/// Central finite-difference gradient of `f` at `x`:
/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every element.
pub fn finite_difference_gradient<F>(mut f: F, x: &Tensor, h: f64) -> Tensor
where
    F: FnMut(&Tensor) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = x.clone();
    probe.clear_grad();
    let mut grad = vec![0.0; x.len()];
    for (i, slot) in grad.iter_mut().enumerate() {
        let orig = probe.values()[i];
        probe.values_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.values_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.values_mut()[i] = orig;
        *slot = (plus - minus) / (2.0 * h);
    }
    Tensor::new(x.shape().to_vec(), grad).expect("same shape as input")
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_has_all_ones_gradient() {
        let x = Tensor::new(vec![2, 2], vec![0.3, -1.0, 4.0, 2.0]).unwrap();
        let g = finite_difference_gradient(|t| t.values().iter().sum(), &x, 1e-5);
        for v in g.values() {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn half_squared_norm_has_identity_gradient() {
        let x = Tensor::new(vec![3], vec![0.5, -2.0, 3.0]).unwrap();
        let g = finite_difference_gradient(
            |t| 0.5 * t.values().iter().map(|v| v * v).sum::<f64>(),
            &x,
            1e-4,
        );
        for (gv, xv) in g.values().iter().zip(x.values()) {
            assert!((gv - xv).abs() < 1e-8);
        }
    }
}
