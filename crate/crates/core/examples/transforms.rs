//! Delay-Doppler <-> time mapping and the variance transforms.
//!
//! cargo run --example transforms

use num_complex::Complex64;
use otfs_core::transforms::{variance_dd_to_time, variance_time_to_dd, DdTransform, FrameGeometry};

fn main() -> otfs_core::Result<()> {
    let geom = FrameGeometry::new(4, 3)?;
    let t = DdTransform::new(geom);

    // A single delay-Doppler impulse spreads over every block of its lane.
    let mut x = vec![Complex64::new(0.0, 0.0); geom.len()];
    x[geom.index(1, 2)] = Complex64::new(1.0, 0.0);
    let s = t.dd_to_time(&x)?;
    println!("impulse at block 1, lane 2 -> time samples:");
    for i in 0..geom.n {
        let row: Vec<String> = (0..geom.m).map(|m| format!("{:+.3}{:+.3}j", s[geom.index(i, m)].re, s[geom.index(i, m)].im)).collect();
        println!("  block {i}: {}", row.join("  "));
    }

    let back = t.time_to_dd(&s)?;
    let err = back.iter().zip(&x).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("round-trip max error {err:.2e}");

    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    println!("||x|| = {:.6}, ||s|| = {:.6}", norm(&x), norm(&s));

    // Diagonal variances are averaged over the blocks of each lane.
    let var: Vec<f64> = (0..geom.len()).map(|k| 0.1 * (k % 5) as f64).collect();
    let dd = variance_time_to_dd(&var, geom)?;
    let td = variance_dd_to_time(&dd, geom)?;
    println!("lane means: {:?}", &dd[..geom.m]);
    println!("sum preserved: {:.6} -> {:.6}", var.iter().sum::<f64>(), td.iter().sum::<f64>());
    Ok(())
}
