#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use thermoform::{GridSpec, Potential};

pub fn grid(m: usize) -> Arc<GridSpec> {
    Arc::new(GridSpec::gaussian(m).unwrap())
}

/// Principal eigentriple of a symmetric range-2 potential from a dense
/// eigen-solve of `√w_i e^{A(a_i, a_j)} √w_j`.
pub struct DenseTriple {
    pub lambda: f64,
    pub second: f64,
    pub psi: Vec<f64>,
    pub rho: Vec<f64>,
}

pub fn dense_symmetric(grid: &GridSpec, p: &Potential) -> DenseTriple {
    let m = grid.size();
    let a = grid.nodes();
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let e = DMatrix::from_fn(m, m, |i, j| p.eval(&[a[i], a[j]]).exp());
    let s = DMatrix::from_fn(m, m, |i, j| sw[i] * e[(i, j)] * sw[j]);
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let lambda = eig.eigenvalues[order[0]];
    let second = eig.eigenvalues[order[1]].abs().max(eig.eigenvalues[order[m - 1]].abs());
    let mut v: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    // ψ = E D^{1/2} v / λ avoids dividing by the floored tail weights.
    let mut psi: Vec<f64> = (0..m)
        .map(|s| (0..m).map(|t| e[(t, s)] * sw[t] * v[t]).sum::<f64>() / lambda)
        .collect();
    let mut rho: Vec<f64> = psi.iter().zip(grid.weights()).map(|(p, w)| p * w).collect();
    let mass: f64 = rho.iter().sum();
    rho.iter_mut().for_each(|r| *r /= mass);
    let pairing: f64 = psi.iter().zip(&rho).map(|(p, r)| p * r).sum();
    psi.iter_mut().for_each(|p| *p /= pairing);
    DenseTriple {
        lambda,
        second,
        psi,
        rho,
    }
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Prints and returns the outcome of an acceptance criterion.
pub fn report(id: u32, title: &str, passed: bool, detail: &str) -> bool {
    println!(
        "criterion {id:>2} [{}] {title}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    passed
}
