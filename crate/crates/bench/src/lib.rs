//! Shared fixtures for the benchmarks.

use mcx_core::{IetSpec, Point, SystemDescriptor};

/// Golden-ratio conjugate.
pub const GOLDEN: f64 = 0.618_033_988_749_894_8;

pub fn typical_iet() -> SystemDescriptor {
    SystemDescriptor::iet(IetSpec::new(vec![0.2398, 0.4721, 0.2881], &[3, 2, 1]).expect("valid lengths"))
}

pub fn shear_kick() -> SystemDescriptor {
    SystemDescriptor::casati_prosen(GOLDEN, std::f64::consts::SQRT_2 - 1.0)
}

/// Seeded sample of the system's invariant measure.
pub fn sample(sys: &SystemDescriptor, m: usize) -> Vec<Point> {
    sys.sample_measure(m, 17).expect("sampling a built-in measure")
}

/// Points on a thin ellipse, for hull and caliper kernels.
pub fn ellipse_cloud(k: usize) -> Vec<[f64; 2]> {
    (0..k)
        .map(|i| {
            let t = i as f64 * 2.399_963;
            let r = (i % 7) as f64 / 7.0;
            [r * t.cos(), 0.05 * r * t.sin()]
        })
        .collect()
}
