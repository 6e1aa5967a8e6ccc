//! Dense diagonalization of L_{h,P} in the Fourier basis e^{2πikx}, |k| ≤ M.
//!
//! In that basis `H[k, k′] = (2πhk + P)² δ_{kk′} + V̂(k − k′)`, the exact
//! matrix of the operator restricted to the truncated span.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{BlochError, Result};
use crate::potential::PeriodicPotential;

pub const MAX_CUTOFF: usize = 4096;

/// Number of eigenvalues around the target considered for selection.
pub const CANDIDATE_WINDOW: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugedOperatorSpec {
    pub potential: PeriodicPotential,
    pub h: f64,
    pub p: f64,
    /// M: modes k = −M..=M.
    pub cutoff: usize,
}

impl GaugedOperatorSpec {
    pub fn new(potential: PeriodicPotential, h: f64, p: f64, cutoff: usize) -> Self {
        GaugedOperatorSpec {
            potential,
            h,
            p,
            cutoff,
        }
    }

    /// Cutoff rule `max(16, 4·scale/(2πh))`.
    pub fn resolving_cutoff(scale: f64, h: f64) -> usize {
        ((4.0 * scale / (2.0 * PI * h)).ceil() as usize).max(16)
    }

    pub fn dimension(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn mode(&self, index: usize) -> i64 {
        index as i64 - self.cutoff as i64
    }
}

/// Assembles the Hermitian matrix of L_{h,P}.
pub fn build_matrix(spec: &GaugedOperatorSpec) -> Result<DMatrix<Complex64>> {
    if spec.cutoff > MAX_CUTOFF {
        return Err(BlochError::CutoffTooLarge(spec.cutoff));
    }
    if !(spec.h > 0.0) {
        return Err(BlochError::InvalidInput("h must be positive".into()));
    }
    let dim = spec.dimension();
    let degree = spec.potential.degree() as i64;
    let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for i in 0..dim {
        let k = spec.mode(i);
        let kinetic = (2.0 * PI * spec.h * k as f64 + spec.p).powi(2);
        for m in -degree..=degree {
            let j = i as i64 - m;
            if j < 0 || j >= dim as i64 {
                continue;
            }
            h[(i, j as usize)] += spec.potential.exp_coeff(m);
        }
        h[(i, i)] += Complex64::new(kinetic, 0.0);
    }
    if h != h.adjoint() {
        return Err(BlochError::NonHermitianDetected);
    }
    Ok(h)
}

/// Full spectrum with eigenvectors (columns), eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub spec: GaugedOperatorSpec,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<Complex64>,
}

impl Spectrum {
    pub fn coeffs(&self, index: usize) -> DVector<Complex64> {
        self.eigenvectors.column(index).into_owned()
    }

    /// Indices of the `count` eigenvalues nearest `target`, nearest first.
    pub fn nearest(&self, target: f64, count: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| {
            (self.eigenvalues[a] - target)
                .abs()
                .total_cmp(&(self.eigenvalues[b] - target).abs())
                .then(a.cmp(&b))
        });
        idx.truncate(count);
        idx
    }

    /// ψ(x_j) = Σ_k c_k e^{2πikx_j} on `grid_size` points.
    pub fn wavefunction(&self, index: usize, grid_size: usize) -> Result<Vec<Complex64>> {
        synthesize(&self.spec, self.eigenvectors.column(index).iter().cloned(), grid_size)
    }
}

fn synthesize<I: Iterator<Item = Complex64>>(spec: &GaugedOperatorSpec, coeffs: I, grid_size: usize) -> Result<Vec<Complex64>> {
    if grid_size < spec.dimension() {
        return Err(BlochError::GridTooCoarse {
            grid_size,
            required: spec.dimension(),
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); grid_size];
    for (i, c) in coeffs.enumerate() {
        let k = spec.mode(i);
        buf[k.rem_euclid(grid_size as i64) as usize] = c;
    }
    FftPlanner::<f64>::new().plan_fft_inverse(grid_size).process(&mut buf);
    Ok(buf)
}

/// Makes the first coefficient above 1e-8 of the column maximum real positive.
fn canonicalize_phase(v: &mut DMatrix<Complex64>, col: usize) {
    let column = v.column(col);
    let max = column.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if let Some(anchor) = column.iter().find(|c| c.norm() > 1e-8 * max).cloned() {
        let rot = anchor.conj() / anchor.norm();
        v.column_mut(col).iter_mut().for_each(|c| *c *= rot);
    }
}

/// Assembles and diagonalizes L_{h,P}.
pub fn build_and_diagonalize(spec: &GaugedOperatorSpec) -> Result<Spectrum> {
    let matrix = build_matrix(spec)?;
    let dim = matrix.nrows();
    let eig = matrix.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (new, &old) in order.iter().enumerate() {
        eigenvectors.set_column(new, &eig.eigenvectors.column(old));
        canonicalize_phase(&mut eigenvectors, new);
    }
    Ok(Spectrum {
        spec: spec.clone(),
        eigenvalues,
        eigenvectors,
    })
}

/// A selected eigenpair with its density on the evaluation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochCandidate {
    pub index: usize,
    pub eigenvalue: f64,
    pub target: f64,
    pub coeffs: Vec<Complex64>,
    /// |ψ|², unit mean on the grid.
    pub density: Vec<f64>,
    /// min |ψ| and max |ψ| of the unit-norm eigenfunction.
    pub min_amplitude: f64,
    pub max_amplitude: f64,
}

impl BlochCandidate {
    pub fn target_distance(&self) -> f64 {
        (self.eigenvalue - self.target).abs()
    }
}

fn candidate(spectrum: &Spectrum, index: usize, target: f64, grid_size: usize) -> Result<BlochCandidate> {
    let psi = spectrum.wavefunction(index, grid_size)?;
    let mut density: Vec<f64> = psi.iter().map(|p| p.norm_sqr()).collect();
    let mass = density.iter().sum::<f64>() / grid_size as f64;
    density.iter_mut().for_each(|d| *d /= mass);
    let min_amplitude = density.iter().cloned().fold(f64::INFINITY, f64::min).sqrt();
    let max_amplitude = density.iter().cloned().fold(0.0, f64::max).sqrt();
    Ok(BlochCandidate {
        index,
        eigenvalue: spectrum.eigenvalues[index],
        target,
        coeffs: spectrum.coeffs(index).iter().cloned().collect(),
        density,
        min_amplitude,
        max_amplitude,
    })
}

/// Picks the Bloch eigenpair near `e_target`.
///
/// Among the [`CANDIDATE_WINDOW`] eigenvalues nearest the target, those whose
/// amplitude vanishes somewhere (min |ψ| < 1e-6 max |ψ|) are discarded. The
/// nearest survivor is returned; survivors whose eigenvalues agree with it to
/// 1e-9 (a near-degenerate pair whose eigenvectors mix) are ranked by min |ψ|.
pub fn select_bloch_candidate(spectrum: &Spectrum, e_target: f64, grid_size: usize) -> Result<BlochCandidate> {
    let mut survivors = Vec::new();
    for index in spectrum.nearest(e_target, CANDIDATE_WINDOW) {
        let c = candidate(spectrum, index, e_target, grid_size)?;
        if c.min_amplitude >= 1e-6 * c.max_amplitude {
            survivors.push(c);
        }
    }
    let nearest = survivors
        .first()
        .map(|c| c.target_distance())
        .ok_or(BlochError::NoBlochCandidate { target: e_target })?;
    let scale = e_target.abs().max(1.0);
    survivors
        .into_iter()
        .filter(|c| c.target_distance() <= nearest + 1e-9 * scale)
        .max_by(|a, b| a.min_amplitude.total_cmp(&b.min_amplitude).then(b.index.cmp(&a.index)))
        .ok_or(BlochError::NoBlochCandidate { target: e_target })
}

/// Density of the lowest eigenpair, unit mean on the grid.
pub fn ground_state_density(spec: &GaugedOperatorSpec, grid_size: usize) -> Result<Vec<f64>> {
    let spectrum = build_and_diagonalize(spec)?;
    let psi = spectrum.wavefunction(0, grid_size)?;
    let mut density: Vec<f64> = psi.iter().map(|p| p.norm_sqr()).collect();
    let mass = density.iter().sum::<f64>() / grid_size as f64;
    density.iter_mut().for_each(|d| *d /= mass);
    Ok(density)
}
