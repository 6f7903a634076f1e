use ndarray::Array2;

/// Mean Huber loss and its gradient w.r.t. `pred`. Elementwise
/// `0.5 e^2` for `|e| <= delta`, else `delta (|e| - 0.5 delta)`; the
/// per-element gradient is `clamp(e, -delta, delta)` divided by the element
/// count.
pub fn huber_loss(pred: &Array2<f64>, target: &Array2<f64>, delta: f64) -> (f64, Array2<f64>) {
    assert_eq!(pred.dim(), target.dim(), "huber loss shape mismatch");
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(pred.dim());
    for ((g, &p), &t) in grad.iter_mut().zip(pred.iter()).zip(target.iter()) {
        let e = p - t;
        if e.abs() <= delta {
            loss += 0.5 * e * e;
            *g = e / n;
        } else {
            loss += delta * (e.abs() - 0.5 * delta);
            *g = e.clamp(-delta, delta) / n;
        }
    }
    (loss / n, grad)
}
