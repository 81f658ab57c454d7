//! Integrators for `ε ∂_t u = εΔu - W'(u)/ε`, deterministic and with
//! mollified additive noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functionals::{energy_slice, Epsilon, SpaceTimePath};
use crate::mesh::{self, Boundary, Grid, ScalarField};
use crate::potential::QuarticWell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    /// Implicit Laplacian, explicit `W'`.
    #[default]
    SemiImplicit,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub eps: Epsilon,
    pub dt: f64,
    pub scheme: Scheme,
    pub steps: usize,
    /// Keep every `record_every`-th state in [`run_flow`]'s path.
    pub record_every: usize,
}

impl FlowConfig {
    /// Validates the step against `grid`; the explicit scheme needs
    /// `dt ≤ h²/(2d)`.
    pub fn new(grid: &Grid, eps: Epsilon, dt: f64, scheme: Scheme, steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("time step must be positive and finite"));
        }
        if steps == 0 {
            return Err(Error::invalid("at least one step is required"));
        }
        if scheme == Scheme::Explicit {
            let h = grid.min_spacing();
            let bound = h * h / (2.0 * grid.dim() as f64);
            if dt > bound {
                return Err(Error::invalid(format!(
                    "explicit time step {dt} exceeds the diffusion bound {bound}"
                )));
            }
        }
        Ok(FlowConfig {
            eps,
            dt,
            scheme,
            steps,
            record_every: 1,
        })
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }
}

/// Conjugate gradients for `(I - dt Δ) x = b`, run on the symmetric form
/// `Ω(I - dt Δ)` with a Jacobi preconditioner. Each iteration makes three
/// passes over the grid.
pub(crate) fn solve_shifted_laplacian(grid: &Grid, dt: f64, b: &[f64], iterate: usize) -> Result<Vec<f64>> {
    const RTOL: f64 = 1e-13;
    let n = grid.len();
    let weights = grid.weights();
    let inv_weights: Vec<f64> = weights.iter().map(|w| 1.0 / w).collect();
    let diag_shift: f64 = grid.spacing().iter().map(|h| 2.0 / (h * h)).sum::<f64>() * dt;
    let precond = 1.0 / (1.0 + diag_shift);
    let [cx, cy] = [
        dt / (grid.spacing()[0] * grid.spacing()[0]),
        if grid.dim() == 2 {
            dt / (grid.spacing()[1] * grid.spacing()[1])
        } else {
            0.0
        },
    ];
    // out = Ω(I - dt Δ)x, returning x·out
    let apply = |x: &[f64], out: &mut [f64]| {
        let mut dot = 0.0;
        grid.for_each_stencil(|k, [xl, xh, yl, yh]| {
            let c = x[k];
            let v = weights[k] * (c - cx * (x[xl] - 2.0 * c + x[xh]) - cy * (x[yl] - 2.0 * c + x[yh]));
            out[k] = v;
            dot += c * v;
        });
        dot
    };
    // one explicit diffusion step is a good guess for smooth right-hand sides
    let mut x = vec![0.0; n];
    grid.for_each_stencil(|k, [xl, xh, yl, yh]| {
        let c = b[k];
        x[k] = c + cx * (b[xl] - 2.0 * c + b[xh]) + cy * (b[yl] - 2.0 * c + b[yh]);
    });
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = (0..n).map(|k| weights[k] * b[k] - ax[k]).collect();
    let bnorm = libm::sqrt((0..n).map(|k| weights[k] * b[k] * b[k]).sum::<f64>()).max(f64::MIN_POSITIVE);
    let mut res = libm::sqrt(r.iter().zip(&inv_weights).map(|(v, iw)| v * v * iw).sum::<f64>());
    // the preconditioner is Ω^{-1}/(1 + shift), so z = r·precond/w
    let mut p: Vec<f64> = (0..n).map(|k| r[k] * inv_weights[k] * precond).collect();
    let mut rz: f64 = r.iter().zip(&p).map(|(a, b)| a * b).sum();
    let max_iter = 10 * n + 100;
    for _ in 0..max_iter {
        if res <= RTOL * bnorm {
            return Ok(x);
        }
        let pap = apply(&p, &mut ax);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        let (mut rz_new, mut res2) = (0.0, 0.0);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ax[k];
            let rw = r[k] * inv_weights[k];
            rz_new += r[k] * rw * precond;
            res2 += r[k] * rw;
        }
        res = libm::sqrt(res2);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = r[k] * inv_weights[k] * precond + beta * p[k];
        }
    }
    if res <= RTOL * bnorm {
        return Ok(x);
    }
    Err(Error::numerical(
        iterate,
        format!("linear solve did not converge, relative residual {:e}", res / bnorm),
    ))
}

fn step_values(grid: &Grid, u: &[f64], cfg: &FlowConfig, iterate: usize) -> Result<Vec<f64>> {
    let well = QuarticWell;
    let e2 = cfg.eps.get() * cfg.eps.get();
    let dt = cfg.dt;
    let next = match cfg.scheme {
        Scheme::SemiImplicit => {
            let b: Vec<f64> = u.iter().map(|&v| v - dt * well.derivative(v) / e2).collect();
            solve_shifted_laplacian(grid, dt, &b, iterate)?
        }
        Scheme::Explicit => {
            let mut lap = vec![0.0; u.len()];
            mesh::laplacian_into(grid, u, &mut lap);
            u.iter()
                .zip(&lap)
                .map(|(&v, l)| v + dt * (l - well.derivative(v) / e2))
                .collect()
        }
    };
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(iterate, "flow produced non-finite values"));
    }
    Ok(next)
}

/// Advances the deterministic Allen-Cahn flow by one step of `cfg.dt`.
pub fn flow_step(u: &ScalarField, cfg: &FlowConfig) -> Result<ScalarField> {
    let grid = *u.grid();
    Ok(ScalarField::from_raw(grid, step_values(&grid, u.values(), cfg, 0)?))
}

/// Runs `cfg.steps` steps from `u0`. For the semi-implicit scheme every step
/// is checked to dissipate energy up to `1e-10 E(u0)`.
pub fn run_flow(u0: &ScalarField, cfg: &FlowConfig) -> Result<SpaceTimePath> {
    let check = cfg.scheme == Scheme::SemiImplicit;
    run_with(u0, cfg, check, |grid, u, step| step_values(grid, u, cfg, step))
}

fn run_with(
    u0: &ScalarField,
    cfg: &FlowConfig,
    check_energy: bool,
    mut advance: impl FnMut(&Grid, &[f64], usize) -> Result<Vec<f64>>,
) -> Result<SpaceTimePath> {
    let grid = *u0.grid();
    let eps = cfg.eps.get();
    let e0 = energy_slice(&grid, u0.values(), eps);
    let tol = 1e-10 * e0;
    let mut times = vec![0.0];
    let mut values = u0.values().to_vec();
    let mut u = u0.values().to_vec();
    let mut e_prev = e0;
    for step in 1..=cfg.steps {
        u = advance(&grid, &u, step)?;
        if check_energy {
            let e = energy_slice(&grid, &u, eps);
            if e > e_prev + tol {
                return Err(Error::numerical(
                    step,
                    format!("energy increased from {e_prev} to {e}; reduce the time step"),
                ));
            }
            e_prev = e;
        }
        if step % cfg.record_every == 0 || step == cfg.steps {
            times.push(step as f64 * cfg.dt);
            values.extend_from_slice(&u);
        }
    }
    Ok(SpaceTimePath::from_raw(grid, times, values))
}

/// Temperature, mollification length and seed of the additive noise.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(grid: &Grid, gamma: f64, lambda: f64, seed: u64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid("noise temperature must be nonnegative"));
        }
        if !(lambda.is_finite() && lambda >= grid.min_spacing()) {
            return Err(Error::invalid("mollification length must be at least the grid spacing"));
        }
        Ok(NoiseConfig { gamma, lambda, seed })
    }
}

/// Truncated Gaussian of width `λ`, cut at `4λ` and renormalized per node to
/// unit mass under the grid quadrature. Separable across axes.
#[derive(Debug, Clone)]
pub struct Mollifier {
    grid: Grid,
    axes: Vec<AxisKernel>,
}

#[derive(Debug, Clone)]
struct AxisKernel {
    half_width: usize,
    /// `taps[i]` holds `(j, K(i, j))` for node `i` on this axis.
    taps: Vec<Vec<(usize, f64)>>,
    /// `Σ_j K(i, j)² ω_j` per node.
    autocorr: Vec<f64>,
}

impl AxisKernel {
    fn new(grid: &Grid, axis: usize, lambda: f64) -> Self {
        let n = grid.counts()[axis];
        let h = grid.spacing()[axis];
        let wanted = libm::ceil(4.0 * lambda / h) as usize;
        let half_width = match grid.bc() {
            Boundary::Neumann => wanted.min(n - 1),
            Boundary::Periodic => wanted.min((n - 1) / 2),
        };
        let axis_weight = |j: usize| match grid.bc() {
            Boundary::Neumann if j == 0 || j + 1 == n => 0.5 * h,
            _ => h,
        };
        let mut taps = Vec::with_capacity(n);
        let mut autocorr = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(2 * half_width + 1);
            for off in -(half_width as isize)..=(half_width as isize) {
                let j = i as isize + off;
                let j = match grid.bc() {
                    Boundary::Neumann if j < 0 || j >= n as isize => continue,
                    Boundary::Neumann => j as usize,
                    Boundary::Periodic => j.rem_euclid(n as isize) as usize,
                };
                let d = off as f64 * h / lambda;
                row.push((j, libm::exp(-0.5 * d * d)));
            }
            let mass: f64 = row.iter().map(|&(j, g)| g * axis_weight(j)).sum();
            row.iter_mut().for_each(|t| t.1 /= mass);
            autocorr.push(row.iter().map(|&(j, k)| k * k * axis_weight(j)).sum());
            taps.push(row);
        }
        AxisKernel {
            half_width,
            taps,
            autocorr,
        }
    }
}

impl Mollifier {
    pub fn new(grid: &Grid, lambda: f64) -> Self {
        Mollifier {
            grid: *grid,
            axes: (0..grid.dim()).map(|a| AxisKernel::new(grid, a, lambda)).collect(),
        }
    }

    /// Truncation half-width in nodes along `axis`.
    pub fn half_width(&self, axis: usize) -> usize {
        self.axes[axis].half_width
    }

    /// Discrete autocorrelation `K(k, k) = Σ_j K(k, j)² ω_j`, the variance of
    /// the mollified noise at node `k`.
    pub fn autocorrelation(&self, k: usize) -> f64 {
        let [i, j] = self.grid.unravel(k);
        let mut v = self.axes[0].autocorr[i];
        if self.grid.dim() == 2 {
            v *= self.axes[1].autocorr[j];
        }
        v
    }

    /// `η_k = Σ_j K(k, j) ω_j ξ_j` for discrete white noise `ξ_j ~ N(0, 1/ω_j)`,
    /// given standard normals `z_j = √ω_j ξ_j`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let grid = &self.grid;
        let src: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(k, v)| libm::sqrt(grid.weight(k)) * v)
            .collect();
        let mut out = vec![0.0; grid.len()];
        for k in 0..grid.len() {
            let [i, j] = grid.unravel(k);
            out[k] = self.axes[0].taps[i]
                .iter()
                .map(|&(ii, w)| w * src[grid.index(ii, j)])
                .sum();
        }
        if grid.dim() == 2 {
            let tmp = out.clone();
            for k in 0..grid.len() {
                let [i, j] = grid.unravel(k);
                out[k] = self.axes[1].taps[j]
                    .iter()
                    .map(|&(jj, w)| w * tmp[grid.index(i, jj)])
                    .sum();
            }
        }
        out
    }
}

/// Standard normals keyed by `(seed, step, node)`: ChaCha8 with the step as
/// stream id and four 32-bit words per node, turned into one Box-Muller draw.
pub fn standard_normals(seed: u64, step: u64, first_node: usize, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng.set_word_pos(4 * first_node as u128);
    (0..count)
        .map(|_| {
            let a = rng.next_u64();
            let b = rng.next_u64();
            // (0, 1] and [0, 1)
            let u1 = ((a >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
            let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
        })
        .collect()
}

/// Noise increment `(1/ε) √(2γ dt) η_λ` of one Euler-Maruyama step.
pub fn noise_increment(
    grid: &Grid,
    cfg: &FlowConfig,
    noise: &NoiseConfig,
    mollifier: &Mollifier,
    step: u64,
) -> Vec<f64> {
    let z = standard_normals(noise.seed, step, 0, grid.len());
    let scale = libm::sqrt(2.0 * noise.gamma * cfg.dt) / cfg.eps.get();
    let mut eta = mollifier.apply(&z);
    eta.iter_mut().for_each(|v| *v *= scale);
    eta
}

/// One Euler-Maruyama step of the noisy flow. With `gamma == 0` this is
/// exactly [`flow_step`].
pub fn stochastic_step(u: &ScalarField, cfg: &FlowConfig, noise: &NoiseConfig, step: u64) -> Result<ScalarField> {
    let next = flow_step(u, cfg)?;
    if noise.gamma == 0.0 {
        return Ok(next);
    }
    let grid = *u.grid();
    let mollifier = Mollifier::new(&grid, noise.lambda);
    let inc = noise_increment(&grid, cfg, noise, &mollifier, step);
    let values = next.values().iter().zip(&inc).map(|(a, b)| a + b).collect();
    Ok(ScalarField::from_raw(grid, values))
}

/// Noisy trajectory; step `s` (1-based) draws its noise from counter `s`.
pub fn run_stochastic(u0: &ScalarField, cfg: &FlowConfig, noise: &NoiseConfig) -> Result<SpaceTimePath> {
    let grid = *u0.grid();
    let mollifier = Mollifier::new(&grid, noise.lambda);
    // energy may rise under noise, so no dissipation check
    run_with(u0, cfg, false, |grid, u, step| {
        let mut next = step_values(grid, u, cfg, step)?;
        if noise.gamma != 0.0 {
            let inc = noise_increment(grid, cfg, noise, &mollifier, step as u64);
            next.iter_mut().zip(&inc).for_each(|(a, b)| *a += b);
        }
        Ok(next)
    })
}

/// `E_ε` of every snapshot.
pub fn energy_trace(path: &SpaceTimePath, eps: Epsilon) -> Vec<f64> {
    (0..path.snapshot_count())
        .map(|m| energy_slice(path.grid(), path.snapshot(m), eps.get()))
        .collect()
}
