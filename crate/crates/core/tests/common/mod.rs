#![allow(dead_code)]

use std::f64::consts::PI;

use ellipgen::generator::Generator;
use ellipgen::grid::UniformGrid;

/// `e^{-pi t}`: the Gaussian generator normalized with `b = 1`, any dimension.
pub fn normalized_gaussian(d: usize) -> Generator {
    Generator::from_fn(d, UniformGrid::default_generator(), |t| (-PI * t).exp()).unwrap()
}

/// `[0, t_max]` at the default step.
pub fn grid_to(t_max: f64) -> UniformGrid {
    UniformGrid::new(0.0, 0.005, (t_max / 0.005).round() as usize + 1).unwrap()
}

/// `e^{-t/2} / (2 pi)^{d/2}`, the standard normal generator, on `[0, t_max]`.
pub fn standard_gaussian_to(d: usize, t_max: f64) -> Generator {
    let c = (2.0 * PI).powf(-(d as f64) / 2.0);
    Generator::from_fn(d, grid_to(t_max), move |t| c * (-t / 2.0).exp()).unwrap()
}

/// The standard normal generator on `[0, 30]`, where its tail is below `e^{-15}`.
pub fn standard_gaussian(d: usize) -> Generator {
    standard_gaussian_to(d, 30.0)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut stat) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        stat = stat.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    (stat, kolmogorov_survival((en + 0.12 + 0.11 / en) * stat))
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as i64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * x * x).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
