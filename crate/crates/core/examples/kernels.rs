//! Encoder reference math: RoPE, slice sampling, prompt mixing and the
//! projector gradient check, followed by the full self-test.
//!
//! cargo run -p crb-core --example kernels

use crb_core::kernels::{gradient_check, mix_prompts, rope_2d, sample_slices, selftest, Gelu, RopeConfig};

fn main() {
    let cfg = RopeConfig::new(8);
    let v = [1.0, 0.0, 0.5, -0.5, 0.25, 0.0, 0.0, 1.0];
    let r = rope_2d(&v, (3, 5), &cfg).unwrap();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    println!("2D RoPE at (3, 5): |v|={:.6} |Rv|={:.6}", norm(&v), norm(&r));

    println!("slices of a 192-slice scan: {:?}", &sample_slices(192, 96)[..8]);

    let ids: Vec<u32> = (0..10).collect();
    for (id, variant) in mix_prompts(&ids, (1, 4), 7) {
        print!("{id}:{variant:?} ");
    }
    println!();

    println!("projector gradient rel. error {:.2e}", gradient_check(1, (3, 5, 4, 6), 1e-5, Gelu::Exact));
    for c in selftest(7) {
        println!("{} {:<40} {:.2e} <= {:.0e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.observed, c.tolerance);
    }
}
