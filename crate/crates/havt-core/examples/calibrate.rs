use havt_core::tensor::{matmul, matmul_a_bt};
use std::time::Instant;

fn main() {
    for &(m, k, n) in &[(256usize, 256usize, 256usize), (1024, 81, 16), (784, 128, 128), (109, 128, 128)] {
        let a: Vec<f64> = (0..m * k).map(|i| (i % 17) as f64 * 0.1).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i % 13) as f64 * 0.1).collect();
        let iters = ((2e8 / (m * k * n) as f64).max(1.0) as usize).min(500);
        let t = Instant::now();
        let mut sink = 0.0;
        for _ in 0..iters {
            let c = matmul(&a, &b, m, k, n);
            sink += c[0];
        }
        let dt = t.elapsed().as_secs_f64();
        let gf = 2.0 * (m * k * n * iters) as f64 / dt / 1e9;
        println!("matmul {m}x{k}x{n}: {gf:.2} GFLOP/s ({iters} iters, sink {sink:.1})");

        let bt: Vec<f64> = (0..n * k).map(|i| (i % 11) as f64 * 0.1).collect();
        let t = Instant::now();
        for _ in 0..iters {
            let c = matmul_a_bt(&a, &bt, m, k, n);
            sink += c[0];
        }
        let dt = t.elapsed().as_secs_f64();
        let gf = 2.0 * (m * k * n * iters) as f64 / dt / 1e9;
        println!("  a_bt {m}x{k}x{n}: {gf:.2} GFLOP/s (sink {sink:.1})");
    }
}
