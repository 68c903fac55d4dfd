use slotgraph::optimizer::{minimize_fn, OptimizerConfig};
fn main() {
    let mut f = |x: &[f64], grad: &mut [f64]| -> f64 {
        let (a, b) = (x[0], x[1]);
        grad[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        grad[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    };
    let result = minimize_fn(
        &mut f,
        vec![-1.2, 1.0],
        &OptimizerConfig { max_iterations: 500, grad_tolerance: 1e-8, ..OptimizerConfig::default() },
        None,
    ).unwrap();
    println!("stop={:?} iters={} x={:?} obj={}", result.stop, result.iterations, result.x, result.objective);
}
