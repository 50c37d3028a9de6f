#![allow(dead_code)]

use epipinn::nn::{loss_gradient, Network, Objective};

pub const FD_STEP: f64 = 1e-6;

/// Worst relative error between the analytic gradient and central
/// differences over every parameter. Gradients whose magnitude is below
/// `floor` are compared in absolute terms against `floor`.
pub fn worst_fd_error<O: Objective + ?Sized>(net: &Network, times: &[f64], obj: &O, floor: f64) -> f64 {
    let analytic = loss_gradient(net, times, obj).unwrap().gradient.flat();
    let base = net.flat_params();
    assert_eq!(analytic.len(), base.len());
    let mut probe = net.clone();
    let mut loss_at = |params: &[f64]| {
        probe.set_flat_params(params).unwrap();
        loss_gradient(&probe, times, obj).unwrap().loss
    };
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + FD_STEP;
        let up = loss_at(&p);
        p[k] = base[k] - FD_STEP;
        let down = loss_at(&p);
        let fd = (up - down) / (2.0 * FD_STEP);
        let scale = analytic[k].abs().max(fd.abs()).max(floor);
        worst = worst.max((analytic[k] - fd).abs() / scale);
    }
    worst
}

/// Evenly spaced points on [0, 1].
pub fn unit_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}
