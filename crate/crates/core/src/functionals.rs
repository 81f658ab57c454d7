//! Diffuse energies and the space-time action.
//!
//! The discrete action of a path `u_0, …, u_M` on times `t_0 < … < t_M` is
//!
//! ```text
//! S = Σ_m Δt_m Σ_k ω_k (√ε (u_{m+1} - u_m)_k / Δt_m + w(u_θ)_k / √ε)²
//! ```
//!
//! with quadrature weights `ω_k`, the midpoint state `u_θ = (u_m + u_{m+1}) / 2`
//! and the interval chemical potential
//!
//! ```text
//! w = -εΔu_θ + (W(u_{m+1}) - W(u_m)) / ((u_{m+1} - u_m) ε)
//! ```
//!
//! which reduces to `-εΔu + W'(u)/ε` for a constant path. The gradient energy
//! uses the edge-based Dirichlet form, so the cross term of the action
//! telescopes exactly to `2 (E(u_M) - E(u_0))` and every discrete path pays at
//! least four times its energy climb. Evaluating `W'` at `u_θ` instead lets
//! coarse time steps jump over nucleation barriers at a fraction of the cost.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mesh::{self, Grid, ScalarField};
use crate::potential::QuarticWell;

/// Midpoint weight of the time discretization.
pub const THETA: f64 = 0.5;

/// Interface-width parameter `ε > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "f64", into = "f64"))]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(eps: f64) -> Result<Self> {
        if eps.is_finite() && eps > 0.0 {
            Ok(Epsilon(eps))
        } else {
            Err(Error::invalid("epsilon must be positive and finite"))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// True when `ε < 2h` on the finest axis of `grid`.
    pub fn is_under_resolved(self, grid: &Grid) -> bool {
        self.0 < 2.0 * grid.min_spacing()
    }
}

impl TryFrom<f64> for Epsilon {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Epsilon::new(v)
    }
}

impl From<Epsilon> for f64 {
    fn from(e: Epsilon) -> f64 {
        e.0
    }
}

/// A discrete trajectory: snapshots on a shared grid at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimePath {
    grid: Grid,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SpaceTimePath {
    /// `values` holds the snapshots back to back, `times.len()` of them.
    pub fn new(grid: Grid, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::invalid("a path needs at least two snapshots"));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("path times must be finite and strictly increasing"));
        }
        if values.len() != times.len() * grid.len() {
            return Err(Error::invalid("path value count does not match grid and times"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("path values must be finite"));
        }
        Ok(SpaceTimePath { grid, times, values })
    }

    pub fn from_snapshots(times: Vec<f64>, snapshots: &[ScalarField]) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| Error::invalid("a path needs at least two snapshots"))?;
        let grid = *first.grid();
        if snapshots.iter().any(|s| *s.grid() != grid) {
            return Err(Error::invalid("snapshots live on different grids"));
        }
        if times.len() != snapshots.len() {
            return Err(Error::invalid("one time per snapshot is required"));
        }
        let values = snapshots.iter().flat_map(|s| s.values().iter().copied()).collect();
        Self::new(grid, times, values)
    }

    /// Uniform times `0, T/M, …, T` filled by `f(t, x, y)`.
    pub fn from_fn(grid: Grid, t_end: f64, intervals: usize, mut f: impl FnMut(f64, f64, f64) -> f64) -> Result<Self> {
        if intervals == 0 || !(t_end > 0.0) {
            return Err(Error::invalid("need at least one interval over a positive span"));
        }
        let times = uniform_times(t_end, intervals);
        let mut values = Vec::with_capacity(times.len() * grid.len());
        for &t in &times {
            for k in 0..grid.len() {
                let [x, y] = grid.coords(k);
                values.push(f(t, x, y));
            }
        }
        Self::new(grid, times, values)
    }

    pub(crate) fn from_raw(grid: Grid, times: Vec<f64>, values: Vec<f64>) -> Self {
        SpaceTimePath { grid, times, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of time intervals `M`.
    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn snapshot_count(&self) -> usize {
        self.times.len()
    }

    pub fn snapshot(&self, m: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[m * n..(m + 1) * n]
    }

    pub fn snapshot_field(&self, m: usize) -> ScalarField {
        ScalarField::from_raw(self.grid, self.snapshot(m).to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }
}

pub(crate) fn uniform_times(t_end: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|m| {
            if m == intervals {
                t_end
            } else {
                t_end * m as f64 / intervals as f64
            }
        })
        .collect()
}

/// Term-by-term decomposition of the action.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActionBreakdown {
    pub total: f64,
    /// `∫∫ ε (∂_t u)²`
    pub kinetic: f64,
    /// `∫∫ w² / ε`
    pub curvature: f64,
    /// `2 ∫∫ ∂_t u · w`
    pub cross: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
}

#[inline]
pub(crate) fn chemical_potential_into(grid: &Grid, u: &[f64], eps: f64, lap: &mut [f64], out: &mut [f64]) {
    mesh::laplacian_into(grid, u, lap);
    let well = QuarticWell;
    let inv = 1.0 / eps;
    for ((o, &l), &v) in out.iter_mut().zip(lap.iter()).zip(u) {
        *o = -eps * l + inv * well.derivative(v);
    }
}

fn interval_potential_into(
    grid: &Grid,
    u0: &[f64],
    u1: &[f64],
    mid: &[f64],
    eps: f64,
    lap: &mut [f64],
    out: &mut [f64],
) {
    mesh::laplacian_into(grid, mid, lap);
    let well = QuarticWell;
    let inv = 1.0 / eps;
    for k in 0..out.len() {
        out[k] = -eps * lap[k] + inv * well.slope(u0[k], u1[k]);
    }
}

fn energy_density_into(grid: &Grid, u: &[f64], eps: f64, out: &mut [f64], sign: f64) {
    mesh::grad_sq_into(grid, u, out);
    let well = QuarticWell;
    for (o, &v) in out.iter_mut().zip(u) {
        *o = 0.5 * eps * *o + sign * well.value(v) / eps;
    }
}

pub(crate) fn energy_slice(grid: &Grid, u: &[f64], eps: f64) -> f64 {
    let mut d = vec![0.0; grid.len()];
    energy_density_into(grid, u, eps, &mut d, 1.0);
    mesh::integrate_slice(grid, &d)
}

/// `w_ε = -εΔu + W'(u)/ε`.
pub fn chemical_potential(u: &ScalarField, eps: Epsilon) -> ScalarField {
    let grid = *u.grid();
    let mut lap = vec![0.0; grid.len()];
    let mut out = vec![0.0; grid.len()];
    chemical_potential_into(&grid, u.values(), eps.get(), &mut lap, &mut out);
    ScalarField::from_raw(grid, out)
}

/// `E_ε(u) = ∫ ε|∇u|²/2 + W(u)/ε`.
pub fn energy(u: &ScalarField, eps: Epsilon) -> f64 {
    energy_slice(u.grid(), u.values(), eps.get())
}

/// Density of `μ_ε^t`: `ε|∇u|²/2 + W(u)/ε` per node.
pub fn energy_density(u: &ScalarField, eps: Epsilon) -> ScalarField {
    let grid = *u.grid();
    let mut d = vec![0.0; grid.len()];
    energy_density_into(&grid, u.values(), eps.get(), &mut d, 1.0);
    ScalarField::from_raw(grid, d)
}

/// Density of the discrepancy `ξ_ε`: `ε|∇u|²/2 - W(u)/ε` per node.
pub fn discrepancy_density(u: &ScalarField, eps: Epsilon) -> ScalarField {
    let grid = *u.grid();
    let mut d = vec![0.0; grid.len()];
    energy_density_into(&grid, u.values(), eps.get(), &mut d, -1.0);
    ScalarField::from_raw(grid, d)
}

/// Diffuse Willmore term `∫ w_ε² / ε`.
pub fn willmore_term(u: &ScalarField, eps: Epsilon) -> f64 {
    let w = chemical_potential(u, eps);
    let e = eps.get();
    mesh::integrate_slice(u.grid(), &w.values().iter().map(|v| v * v / e).collect::<Vec<_>>())
}

/// Per-interval scratch: time derivative, midpoint state and the interval
/// chemical potential.
pub(crate) struct IntervalState {
    pub ut: Vec<f64>,
    pub mid: Vec<f64>,
    pub w: Vec<f64>,
    lap: Vec<f64>,
}

impl IntervalState {
    pub fn new(n: usize) -> Self {
        IntervalState {
            ut: vec![0.0; n],
            mid: vec![0.0; n],
            w: vec![0.0; n],
            lap: vec![0.0; n],
        }
    }

    pub fn load(&mut self, grid: &Grid, u0: &[f64], u1: &[f64], dt: f64, eps: f64) {
        for k in 0..u0.len() {
            self.ut[k] = (u1[k] - u0[k]) / dt;
            self.mid[k] = (1.0 - THETA) * u0[k] + THETA * u1[k];
        }
        interval_potential_into(grid, u0, u1, &self.mid, eps, &mut self.lap, &mut self.w);
    }
}

pub fn action(path: &SpaceTimePath, eps: Epsilon) -> ActionBreakdown {
    let grid = path.grid;
    let e = eps.get();
    let se = libm::sqrt(e);
    let weights = grid.weights();
    let mut st = IntervalState::new(grid.len());
    let mut b = ActionBreakdown::default();
    for m in 0..path.intervals() {
        let dt = path.times[m + 1] - path.times[m];
        st.load(&grid, path.snapshot(m), path.snapshot(m + 1), dt, e);
        let (mut tot, mut kin, mut cur, mut cr) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..grid.len() {
            let (ut, w, om) = (st.ut[k], st.w[k], weights[k]);
            let r = se * ut + w / se;
            tot += om * r * r;
            kin += om * e * ut * ut;
            cur += om * w * w / e;
            cr += om * 2.0 * ut * w;
        }
        b.total += dt * tot;
        b.kinetic += dt * kin;
        b.curvature += dt * cur;
        b.cross += dt * cr;
    }
    b.energy_initial = energy_slice(&grid, path.snapshot(0), e);
    b.energy_final = energy_slice(&grid, path.snapshot(path.intervals()), e);
    b
}

/// Scratch buffers for repeated action/gradient evaluations on one grid.
pub(crate) struct ActionWorkspace {
    grid: Grid,
    weights: Vec<f64>,
    st: IntervalState,
    residual: Vec<f64>,
    jr: Vec<f64>,
}

impl ActionWorkspace {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.len();
        ActionWorkspace {
            grid: *grid,
            weights: grid.weights(),
            st: IntervalState::new(n),
            residual: vec![0.0; n],
            jr: vec![0.0; n],
        }
    }

    /// Action of raw path values; when `grad` is given it receives the exact
    /// partial derivatives with respect to every node value (endpoint
    /// snapshots get zero).
    pub fn eval(&mut self, times: &[f64], values: &[f64], eps: f64, mut grad: Option<&mut [f64]>) -> f64 {
        let grid = &self.grid;
        let n = grid.len();
        let se = libm::sqrt(eps);
        let well = QuarticWell;
        let (weights, st, gr, jr) = (&self.weights, &mut self.st, &mut self.residual, &mut self.jr);
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let intervals = times.len() - 1;
        let mut total = 0.0;
        for m in 0..intervals {
            let dt = times[m + 1] - times[m];
            let (u0, u1) = (&values[m * n..(m + 1) * n], &values[(m + 1) * n..(m + 2) * n]);
            st.load(grid, u0, u1, dt, eps);
            let mut acc = 0.0;
            for k in 0..n {
                let r = se * st.ut[k] + st.w[k] / se;
                acc += weights[k] * r * r;
                gr[k] = r;
            }
            total += dt * acc;
            let Some(g) = grad.as_deref_mut() else { continue };
            // ∂w/∂u_m = -(1-θ)εΔ + ∂_a slope / ε and likewise for u_{m+1};
            // the weighted Laplacian is symmetric so only Δr is needed.
            mesh::laplacian_into(grid, gr, jr);
            for k in 0..n {
                let c = 2.0 * dt * weights[k];
                let dkin = c * se / dt * gr[k];
                let lap = -eps * jr[k];
                if m > 0 {
                    let j0 = (1.0 - THETA) * lap + well.slope_partial(u0[k], u1[k]) * gr[k] / eps;
                    g[m * n + k] += -dkin + c / se * j0;
                }
                if m + 1 < intervals {
                    let j1 = THETA * lap + well.slope_partial(u1[k], u0[k]) * gr[k] / eps;
                    g[(m + 1) * n + k] += dkin + c / se * j1;
                }
            }
        }
        total
    }

    /// `S(x + α d) - S(x)` evaluated from the increments, so the difference
    /// keeps its relative accuracy when it is far below the rounding level of
    /// `S(x)`. `step` holds `α d` for every node value; endpoints must be zero.
    pub fn eval_difference(&mut self, times: &[f64], values: &[f64], step: &[f64], eps: f64) -> f64 {
        let grid = &self.grid;
        let n = grid.len();
        let se = libm::sqrt(eps);
        let weights = &self.weights;
        let IntervalState { ut, mid, w, lap } = &mut self.st;
        let dmid = &mut self.residual;
        let dlap = &mut self.jr;
        let mut total = 0.0;
        for m in 0..times.len() - 1 {
            let dt = times[m + 1] - times[m];
            let (u0, u1) = (&values[m * n..(m + 1) * n], &values[(m + 1) * n..(m + 2) * n]);
            let (d0, d1) = (&step[m * n..(m + 1) * n], &step[(m + 1) * n..(m + 2) * n]);
            for k in 0..n {
                ut[k] = (u1[k] - u0[k]) / dt;
                mid[k] = (1.0 - THETA) * u0[k] + THETA * u1[k];
                dmid[k] = (1.0 - THETA) * d0[k] + THETA * d1[k];
            }
            interval_potential_into(grid, u0, u1, mid, eps, lap, w);
            mesh::laplacian_into(grid, dmid, dlap);
            let mut acc = 0.0;
            for k in 0..n {
                // slope(a + da, b + db) - slope(a, b) without cancellation,
                // using slope = s (q - 2) / 4 with s = a + b, q = a² + b²
                let (a, b, da, db) = (u0[k], u1[k], d0[k], d1[k]);
                let ds = da + db;
                let dq = da * (2.0 * a + da) + db * (2.0 * b + db);
                let q_new = a * a + b * b + dq;
                let dslope = 0.25 * (ds * (q_new - 2.0) + (a + b) * dq);
                let dw = -eps * dlap[k] + dslope / eps;
                let r = se * ut[k] + w[k] / se;
                let dr = se * (d1[k] - d0[k]) / dt + dw / se;
                acc += weights[k] * dr * (2.0 * r + dr);
            }
            total += dt * acc;
        }
        total
    }
}

/// Exact gradient of the discrete action with respect to every node value.
/// Endpoint snapshots are held fixed and carry zero gradient.
pub fn action_gradient(path: &SpaceTimePath, eps: Epsilon) -> SpaceTimePath {
    let mut g = vec![0.0; path.values.len()];
    ActionWorkspace::new(&path.grid).eval(&path.times, &path.values, eps.get(), Some(&mut g));
    SpaceTimePath::from_raw(path.grid, path.times.clone(), g)
}

/// Pointwise density of `α_ε` on each interval: `(√ε ∂_t u + w/√ε)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDensity {
    pub grid: Grid,
    /// Interval lengths `Δt_m`.
    pub durations: Vec<f64>,
    /// One field per interval.
    pub intervals: Vec<Vec<f64>>,
}

impl ActionDensity {
    /// `Σ_m Δt_m ∫ density_m`; reproduces [`action`]'s total.
    pub fn integrate(&self) -> f64 {
        self.intervals
            .iter()
            .zip(&self.durations)
            .map(|(d, dt)| dt * mesh::integrate_slice(&self.grid, d))
            .sum()
    }
}

pub fn action_density(path: &SpaceTimePath, eps: Epsilon) -> ActionDensity {
    let grid = path.grid;
    let e = eps.get();
    let se = libm::sqrt(e);
    let mut st = IntervalState::new(grid.len());
    let mut durations = Vec::with_capacity(path.intervals());
    let mut intervals = Vec::with_capacity(path.intervals());
    for m in 0..path.intervals() {
        let dt = path.times[m + 1] - path.times[m];
        st.load(&grid, path.snapshot(m), path.snapshot(m + 1), dt, e);
        intervals.push(
            st.ut
                .iter()
                .zip(&st.w)
                .map(|(ut, w)| {
                    let r = se * ut + w / se;
                    r * r
                })
                .collect(),
        );
        durations.push(dt);
    }
    ActionDensity {
        grid,
        durations,
        intervals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Boundary;
    use crate::potential::{optimal_profile, SURFACE_TENSION};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn eps(v: f64) -> Epsilon {
        Epsilon::new(v).unwrap()
    }

    fn tanh_front(grid: Grid, e: f64, center: f64) -> ScalarField {
        ScalarField::from_fn(grid, |x, _| optimal_profile((x - center) / e)).unwrap()
    }

    #[test]
    fn epsilon_validation() {
        assert!(Epsilon::new(0.0).is_err());
        assert!(Epsilon::new(-1.0).is_err());
        assert!(Epsilon::new(f64::NAN).is_err());
        let g = Grid::line(0.0, 1.0, 11, Boundary::Neumann).unwrap();
        assert!(eps(0.1).is_under_resolved(&g));
        assert!(!eps(0.25).is_under_resolved(&g));
    }

    #[test]
    fn path_validation() {
        let g = Grid::line(0.0, 1.0, 5, Boundary::Neumann).unwrap();
        assert!(SpaceTimePath::new(g, vec![0.0], vec![0.0; 5]).is_err());
        assert!(SpaceTimePath::new(g, vec![0.0, 0.0], vec![0.0; 10]).is_err());
        assert!(SpaceTimePath::new(g, vec![0.0, 1.0], vec![0.0; 9]).is_err());
        let g2 = Grid::line(0.0, 2.0, 5, Boundary::Neumann).unwrap();
        let err = SpaceTimePath::from_snapshots(
            vec![0.0, 1.0],
            &[ScalarField::constant(g, 0.0), ScalarField::constant(g2, 0.0)],
        );
        assert!(err.is_err());
    }

    #[test]
    fn chemical_potential_examples() {
        let g = Grid::line(0.0, 1.0, 21, Boundary::Neumann).unwrap();
        let w = chemical_potential(&ScalarField::constant(g, 1.0), eps(0.1));
        assert!(w.values().iter().all(|&v| v == 0.0));
        let w = chemical_potential(&ScalarField::constant(g, 0.5), eps(0.1));
        for &v in w.values() {
            assert_abs_diff_eq!(v, -3.75, epsilon = 1e-12);
        }
        let e = 0.02;
        let g = Grid::line(-1.0, 2.0, 8001, Boundary::Neumann).unwrap();
        let w = chemical_potential(&tanh_front(g, e, 0.0), eps(e));
        assert!(w.max_abs() < 1e-3, "{}", w.max_abs());
    }

    #[test]
    fn energy_examples() {
        let g = Grid::line(0.0, 2.0, 11, Boundary::Neumann).unwrap();
        assert_eq!(energy(&ScalarField::constant(g, -1.0), eps(0.3)), 0.0);
        assert_abs_diff_eq!(energy(&ScalarField::constant(g, 0.0), eps(0.5)), 1.0, epsilon = 1e-14);

        let e = 0.02;
        let g = Grid::line(-1.0, 2.0, 4000, Boundary::Neumann).unwrap();
        let u = tanh_front(g, e, 0.0);
        assert_abs_diff_eq!(energy(&u, eps(e)), SURFACE_TENSION, epsilon = 1e-3);
        assert_abs_diff_eq!(
            integrate_field(&energy_density(&u, eps(e))),
            energy(&u, eps(e)),
            epsilon = 1e-12
        );
    }

    fn integrate_field(f: &ScalarField) -> f64 {
        mesh::integrate(f)
    }

    #[test]
    fn energy_density_peak_matches_profile() {
        let e = 0.02;
        let g = Grid::line(-1.0, 2.0, 4001, Boundary::Neumann).unwrap();
        let u = tanh_front(g, e, 0.0);
        let d = energy_density(&u, eps(e));
        // closed form (1/(2ε)) sech⁴(x / (√2 ε)) at the interface node x = 0
        let peak = d.values().iter().cloned().fold(0.0, f64::max);
        let expected = 1.0 / (2.0 * e);
        assert!((peak - expected).abs() / expected < 1e-3, "{peak} vs {expected}");
        assert_abs_diff_eq!(d[2000], peak, epsilon = 0.0);
        assert!(energy_density(&ScalarField::constant(g, 1.0), eps(e))
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn discrepancy_examples() {
        let g = Grid::line(0.0, 1.0, 9, Boundary::Neumann).unwrap();
        let xi = discrepancy_density(&ScalarField::constant(g, 0.0), eps(1.0));
        assert!(xi.values().iter().all(|&v| v == -0.25));

        let e = 0.02;
        let g = Grid::line(-1.0, 2.0, 4001, Boundary::Neumann).unwrap();
        let u = tanh_front(g, e, 0.0);
        let xi = discrepancy_density(&u, eps(e));
        let mu = energy_density(&u, eps(e));
        assert!(xi.max_abs() / mu.max_abs() < 1e-3);
        let abs = xi.map(f64::abs);
        assert!(mesh::integrate(&abs) / energy(&u, eps(e)) < 1e-3);
    }

    #[test]
    fn willmore_examples() {
        let g = Grid::line(0.0, 1.0, 11, Boundary::Neumann).unwrap();
        assert_eq!(willmore_term(&ScalarField::constant(g, 1.0), eps(0.1)), 0.0);
        assert_eq!(willmore_term(&ScalarField::constant(g, -1.0), eps(0.1)), 0.0);
        let e = 0.02;
        let g = Grid::line(-1.0, 2.0, 4001, Boundary::Neumann).unwrap();
        assert!(willmore_term(&tanh_front(g, e, 0.0), eps(e)) < 1e-4);
    }

    #[test]
    fn willmore_of_circle_extrapolates_to_curve_integral() {
        let r = 0.3;
        let value = |e: f64| {
            let n = 320;
            let g = Grid::square([-0.5, -0.5], [1.0, 1.0], [n, n], Boundary::Neumann).unwrap();
            let u = ScalarField::from_fn(g, |x, y| optimal_profile((r - libm::hypot(x, y)) / e)).unwrap();
            willmore_term(&u, eps(e))
        };
        let coarse = value(r / 10.0);
        let fine = value(r / 20.0);
        let extrapolated = 2.0 * fine - coarse;
        let expected = SURFACE_TENSION * 2.0 * core::f64::consts::PI * r / (r * r);
        assert!(
            (extrapolated - expected).abs() / expected < 0.03,
            "{coarse} {fine} {extrapolated} {expected}"
        );
    }

    fn random_path(seed: u64, n: usize, intervals: usize) -> SpaceTimePath {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = Grid::line(0.0, 1.0, n, Boundary::Neumann).unwrap();
        let times: Vec<f64> = (0..=intervals)
            .map(|m| 0.1 * m as f64 + 0.01 * (m * m) as f64)
            .collect();
        let values = (0..(intervals + 1) * n)
            .map(|_| (rng.next_u64() as f64 / u64::MAX as f64) * 2.4 - 1.2)
            .collect();
        SpaceTimePath::new(g, times, values).unwrap()
    }

    #[test]
    fn constant_path_has_zero_action() {
        let g = Grid::line(0.0, 1.0, 11, Boundary::Neumann).unwrap();
        let p = SpaceTimePath::from_fn(g, 1.0, 4, |_, _, _| 1.0).unwrap();
        let a = action(&p, eps(0.1));
        assert_eq!(a.total, 0.0);
        assert_eq!(
            action_gradient(&p, eps(0.1))
                .values()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs())),
            0.0
        );
    }

    #[test]
    fn traveling_front_action() {
        // S = c0 v² T for u(t, x) = q((x - x0 - v t)/ε)
        let (e, v, t_end) = (0.02, 0.5, 1.0);
        let g = Grid::line(-1.0, 2.0, 2001, Boundary::Neumann).unwrap();
        let p = SpaceTimePath::from_fn(g, t_end, 400, |t, x, _| optimal_profile((x + 0.25 - v * t) / e)).unwrap();
        let a = action(&p, eps(e));
        let expected = SURFACE_TENSION * v * v * t_end;
        assert_abs_diff_eq!(expected, 0.2357, epsilon = 1e-4);
        assert!((a.total - expected).abs() < 0.02 * expected, "{}", a.total);
        let d = action_density(&p, eps(e));
        assert_abs_diff_eq!(d.integrate(), a.total, epsilon = 1e-12 * a.total);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = random_path(7, 31, 8);
        let e = eps(0.1);
        let g = action_gradient(&p, e);
        let n = p.grid().len();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for idx in n..p.values().len() - n {
            let mut plus = p.values().to_vec();
            let mut minus = p.values().to_vec();
            plus[idx] += h;
            minus[idx] -= h;
            let sp = action(&SpaceTimePath::new(*p.grid(), p.times().to_vec(), plus).unwrap(), e).total;
            let sm = action(&SpaceTimePath::new(*p.grid(), p.times().to_vec(), minus).unwrap(), e).total;
            let fd = (sp - sm) / (2.0 * h);
            let rel = (fd - g.values()[idx]).abs() / g.values()[idx].abs().max(1e-3);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
        assert!(g.snapshot(0).iter().chain(g.snapshot(8)).all(|&v| v == 0.0));
    }

    #[test]
    fn increment_evaluation_matches_direct_difference() {
        let p = random_path(11, 17, 6);
        let q = random_path(12, 17, 6);
        let n = 17;
        let mut step: Vec<f64> = q.values().iter().map(|v| 0.3 * v).collect();
        step[..n].iter_mut().for_each(|v| *v = 0.0);
        let len = step.len();
        step[len - n..].iter_mut().for_each(|v| *v = 0.0);
        let moved: Vec<f64> = p.values().iter().zip(&step).map(|(a, b)| a + b).collect();
        let e = 0.1;
        let mut ws = ActionWorkspace::new(p.grid());
        let direct = ws.eval(p.times(), &moved, e, None) - ws.eval(p.times(), p.values(), e, None);
        let incr = ws.eval_difference(p.times(), p.values(), &step, e);
        assert!((direct - incr).abs() <= 1e-10 * direct.abs());
    }

    #[test]
    fn gradient_is_nonlinear() {
        let p = random_path(3, 15, 4);
        let e = eps(0.2);
        let doubled = SpaceTimePath::new(
            *p.grid(),
            p.times().to_vec(),
            p.values().iter().map(|v| 2.0 * v).collect(),
        )
        .unwrap();
        let g1 = action_gradient(&p, e);
        let g2 = action_gradient(&doubled, e);
        let differs = g1
            .values()
            .iter()
            .zip(g2.values())
            .any(|(a, b)| (2.0 * a - b).abs() > 1e-6 * (1.0 + b.abs()));
        assert!(differs);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn breakdown_is_consistent(seed in any::<u64>()) {
            let p = random_path(seed, 13, 5);
            let e = eps(0.15);
            let a = action(&p, e);
            prop_assert!(a.total >= 0.0);
            let parts = a.kinetic + a.curvature + a.cross;
            prop_assert!((a.total - parts).abs() <= 1e-10 * a.total.max(1.0));
            let d = action_density(&p, e);
            prop_assert!((d.integrate() - a.total).abs() <= 1e-12 * a.total.max(1.0));
        }
    }
}
