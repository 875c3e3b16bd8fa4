//! Library metrics against the reference implementations.

use nircolor::data::ImageTensor;
use nircolor::eval;
use nircolor::losses;

use super::{oracle_ae, oracle_ms_ssim, oracle_psnr, oracle_ssim, perturbed, rng, uniform};

pub struct MetricError {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
}

/// Worst absolute deviation of each metric over `pairs` random 64x64 RGB pairs.
pub fn metric_oracle_errors(pairs: usize, seed: u64) -> Vec<MetricError> {
    let mut r = rng(seed);
    let mut worst = [0.0f64; 4];
    for i in 0..pairs {
        let a = uniform(&mut r, [1, 3, 64, 64], 0.0, 1.0);
        // Alternate independent and correlated pairs.
        let b = if i % 2 == 0 {
            uniform(&mut r, [1, 3, 64, 64], 0.0, 1.0)
        } else {
            perturbed(&mut r, &a, 0.15)
        };
        let (ia, ib) = (
            ImageTensor::from_tensor(a.clone()).unwrap(),
            ImageTensor::from_tensor(b.clone()).unwrap(),
        );
        let dev = [
            eval::psnr(&ia, &ib).unwrap() - oracle_psnr(a.data(), b.data()),
            eval::ssim(&ia, &ib).unwrap() - oracle_ssim(a.data(), b.data(), 3, 64, 64),
            losses::ms_ssim_value(&a, &b).unwrap() - oracle_ms_ssim(&a, &b),
            eval::angular_error(&ia, &ib).unwrap() - oracle_ae(a.data(), b.data(), 64 * 64),
        ];
        for (w, d) in worst.iter_mut().zip(dev) {
            *w = w.max(d.abs());
        }
    }
    vec![
        MetricError {
            name: "psnr",
            worst: worst[0],
            tolerance: 1e-6,
        },
        MetricError {
            name: "ssim",
            worst: worst[1],
            tolerance: 1e-4,
        },
        MetricError {
            name: "ms_ssim",
            worst: worst[2],
            tolerance: 1e-4,
        },
        MetricError {
            name: "angular_error",
            worst: worst[3],
            tolerance: 1e-6,
        },
    ]
}
