//! Kruskal-Wallis across four arms, then Holm-adjusted Mann-Whitney
//! comparisons against the first arm, plus a Spearman correlation.
//!
//! cargo run -p crb-core --example rank_stats

use crb_core::stats::{compare_against, spearman, MwuOptions};

fn main() {
    let names = ["AI", "Novice", "Intermediate", "Senior"];
    let groups = vec![
        vec![2.0, 3.0, 2.0, 1.0, 2.0, 3.0, 2.0, 2.0],
        vec![4.0, 3.0, 4.0, 4.0, 3.0, 4.0, 2.0, 4.0],
        vec![3.0, 2.0, 3.0, 3.0, 4.0, 2.0, 3.0, 3.0],
        vec![1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 4.0, 1.0],
    ];
    let cmp = compare_against(&groups, 0, MwuOptions::default()).unwrap();
    let o = &cmp.overall;
    println!("Kruskal-Wallis H={:.3} df={} p={:.4}", o.statistic, o.df.unwrap(), o.p_value.unwrap());
    for (i, r) in &cmp.pairwise {
        println!(
            "  AI vs {:<12} U={:>5.1} p={:.4} holm={:.4}",
            names[*i],
            r.statistic,
            r.p_value.unwrap(),
            r.p_adjusted.unwrap()
        );
    }
    let rho = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
    println!("Spearman rho={:.3}", rho.statistic);
}
