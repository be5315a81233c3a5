//! Synthetic samples on the graph of a known smooth map `high = g(low)`.

use cgl_core::lattice::WaveVector;
use cgl_core::mane::{InertialForm, LiftSettings};
use cgl_core::spectral::{GridSpec, SpectralField};
use rand::Rng;

use super::{c, rng};

/// Two real parameters on the `λ ≤ 1` modes, a smooth graph above them.
pub fn graph_point(grid: GridSpec, s: f64, t: f64) -> SpectralField {
    let mut f = SpectralField::zeros(grid);
    f.set(WaveVector::new(0, 0, 0), c(s, 0.0)).unwrap();
    f.set(WaveVector::new(1, 0, 0), c(t, 0.0)).unwrap();
    f.set(WaveVector::new(1, 1, 0), c((s + t).sin(), s.cos() * t)).unwrap();
    f.set(WaveVector::new(1, 1, 1), c((0.5 * s).exp() * t * t, 0.0)).unwrap();
    f
}

/// Largest lift error over fixed interior queries for a `p × p` sample.
pub fn graph_lift_error(p: usize) -> f64 {
    let grid = GridSpec::new(4).unwrap();
    let axis = |i: usize| -1.0 + 2.0 * i as f64 / (p - 1) as f64;
    let points = (0..p)
        .flat_map(|i| (0..p).map(move |j| (axis(i), axis(j))))
        .map(|(s, t)| graph_point(grid, s, t))
        .collect();
    let form = InertialForm::new(points, 1, LiftSettings::default()).unwrap();
    let mut r = rng(17);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (s, t) = (r.gen_range(-0.8..0.8), r.gen_range(-0.8..0.8));
        let truth = graph_point(grid, s, t);
        let lifted = form.lift(&truth.project_low(1)).unwrap();
        assert!(!lifted.extrapolated);
        worst = worst.max((&lifted.field - &truth).l2_norm());
    }
    worst
}
