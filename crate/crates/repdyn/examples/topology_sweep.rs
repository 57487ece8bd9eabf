//! Vietoris-Rips persistence on the Yin-Yang data itself. The class-0
//! region has the class-2 dot punched out of it, so its point cloud carries
//! a genuine 1-cycle; the dot cloud is two far-apart blobs, so its beta0
//! curve holds at 2 over a wide scale band before merging to 1.
//!
//! Run with: `cargo run --release --example topology_sweep`

use repdyn::datasets::{gen_yinyang, YinYangSpec};
use repdyn::linalg::Mat;
use repdyn::topology::{betti_curve, subsample_maxmin, vr_persistence, PointCloud};

fn class_cloud(features: &Mat<f32>, labels: &[usize], class: usize) -> PointCloud {
    let idx: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == class)
        .map(|(i, _)| i)
        .collect();
    PointCloud::new(features.select_rows(&idx).to_f64(), None).expect("cloud")
}

fn main() {
    let data = gen_yinyang(&YinYangSpec::new(3000, 7));
    let grid: Vec<f64> = (1..=12).map(|t| 0.05 * t as f64).collect();

    for class in 0..3 {
        let cloud = class_cloud(&data.features, &data.labels, class);
        // Maxmin landmarks keep the coarse shape with far fewer points.
        let landmarks = subsample_maxmin(&cloud, 150, 1).expect("landmarks");
        let pairs = vr_persistence(&landmarks, 0.7, 1).expect("persistence");

        let b0 = betti_curve(&pairs, 0, &grid).expect("beta0");
        let b1 = betti_curve(&pairs, 1, &grid).expect("beta1");
        println!("class {class} ({} points, 150 landmarks)", cloud.len());
        println!("  eps    {}", grid.iter().map(|e| format!("{e:>5.2}")).collect::<Vec<_>>().join(" "));
        println!("  beta0  {}", b0.counts.iter().map(|c| format!("{c:>5}")).collect::<Vec<_>>().join(" "));
        println!("  beta1  {}", b1.counts.iter().map(|c| format!("{c:>5}")).collect::<Vec<_>>().join(" "));

        let mut cycles: Vec<_> = pairs
            .iter()
            .filter(|p| p.dim == 1 && p.death.is_finite())
            .collect();
        cycles.sort_by(|a, b| {
            (b.death - b.birth)
                .partial_cmp(&(a.death - a.birth))
                .unwrap()
        });
        match cycles.first() {
            Some(p) => println!(
                "  most persistent 1-cycle: birth {:.3}, death {:.3} (persistence {:.3})\n",
                p.birth,
                p.death,
                p.death - p.birth
            ),
            None => println!("  no finite 1-cycles in range\n"),
        }
    }
}
