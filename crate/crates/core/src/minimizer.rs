//! Minimum-action paths with fixed endpoint snapshots.
//!
//! Limited-memory BFGS directions (two-loop recursion) on the raw discrete
//! action, globalized by an Armijo backtracking line search.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::functionals::{action, ActionBreakdown, ActionWorkspace, Epsilon, SpaceTimePath};
use crate::mesh::Grid;
use crate::potential::optimal_profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InitialPathKind {
    /// Spatially uniform `u = -1 + 2t/T`.
    LinearRamp,
    /// A tanh bubble growing linearly from the domain center.
    NucleationBubble,
    /// A front entering from the lower-x boundary at constant speed.
    BoundaryFront,
}

impl FromStr for InitialPathKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_ramp" => Ok(Self::LinearRamp),
            "nucleation_bubble" => Ok(Self::NucleationBubble),
            "boundary_front" => Ok(Self::BoundaryFront),
            other => Err(Error::invalid(format!("unknown initial path kind `{other}`"))),
        }
    }
}

/// Switching ansatz from `u ≡ -1` at `times[0]` to `u ≡ 1` at the last time.
pub fn initial_path(kind: InitialPathKind, grid: &Grid, times: Vec<f64>, eps: Epsilon) -> Result<SpaceTimePath> {
    if times.len() < 2 {
        return Err(Error::invalid("a path needs at least two snapshots"));
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    if !(span > 0.0) {
        return Err(Error::invalid("times must span a positive interval"));
    }
    let e = eps.get();
    let last = times.len() - 1;
    let mut center = grid.center();
    // off-center by h/2 so descent does not park on the symmetric saddle
    for (a, c) in center.iter_mut().enumerate().take(grid.dim()) {
        *c += 0.5 * grid.spacing()[a];
    }
    let reach = {
        let mut r2 = 0.0;
        for a in 0..grid.dim() {
            let half = 0.5 * grid.extents()[a] + grid.spacing()[a];
            r2 += half * half;
        }
        libm::sqrt(r2) + 3.0 * e
    };
    let x_start = grid.origin()[0] - 3.0 * e;
    let x_end = grid.origin()[0] + grid.extents()[0] + 3.0 * e;
    let mut values = Vec::with_capacity(times.len() * grid.len());
    for (m, &t) in times.iter().enumerate() {
        let s = (t - t0) / span;
        for k in 0..grid.len() {
            let [x, y] = grid.coords(k);
            let v = if m == 0 {
                -1.0
            } else if m == last {
                1.0
            } else {
                match kind {
                    InitialPathKind::LinearRamp => -1.0 + 2.0 * s,
                    InitialPathKind::NucleationBubble => {
                        let dist = libm::hypot(x - center[0], if grid.dim() == 2 { y - center[1] } else { 0.0 });
                        optimal_profile((s * reach - dist) / e)
                    }
                    InitialPathKind::BoundaryFront => {
                        let front = x_start + s * (x_end - x_start);
                        optimal_profile((front - x) / e)
                    }
                }
            };
            values.push(v);
        }
    }
    SpaceTimePath::new(*grid, times, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StepRule {
    /// Always try the initial step; a step that raises the action is
    /// rejected and the step size halved.
    Fixed,
    #[default]
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct MinimizeConfig {
    pub max_iterations: usize,
    /// Stop once the max-norm of the action gradient drops below this.
    pub gradient_tolerance: f64,
    pub step_rule: StepRule,
    /// Max-norm of the first trial step along a steepest-descent direction.
    pub initial_step: f64,
    /// Stored correction pairs; 0 gives plain gradient descent.
    pub history: usize,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            max_iterations: 10_000,
            gradient_tolerance: 1e-6,
            step_rule: StepRule::Backtracking,
            initial_step: 0.1,
            history: 10,
        }
    }
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance.is_finite() && self.gradient_tolerance > 0.0) {
            return Err(Error::invalid("gradient_tolerance must be positive"));
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(Error::invalid("initial_step must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Termination {
    Converged,
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MinimizerReport {
    pub iterations: usize,
    pub breakdown: ActionBreakdown,
    /// Gradient max-norm at every accepted iterate.
    pub gradient_trace: Vec<f64>,
    /// Action at every accepted iterate; non-increasing.
    pub action_trace: Vec<f64>,
    pub termination: Termination,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const STALL_WINDOW: usize = 50;
const STALL_RTOL: f64 = 1e-15;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// `-H g` via the two-loop recursion.
fn lbfgs_direction(g: &[f64], hist: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for p in hist.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        q.iter_mut().zip(&p.y).for_each(|(q, y)| *q -= a * y);
        alphas.push(a);
    }
    if let Some(p) = hist.back() {
        let gamma = dot(&p.s, &p.y) / dot(&p.y, &p.y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (p, a) in hist.iter().zip(alphas.iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        q.iter_mut().zip(&p.s).for_each(|(q, s)| *q += (a - b) * s);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes the discrete action over all interior snapshots of `path0`;
/// the first and last snapshots stay bitwise unchanged.
pub fn minimize_action(
    path0: &SpaceTimePath,
    eps: Epsilon,
    cfg: &MinimizeConfig,
) -> Result<(SpaceTimePath, MinimizerReport)> {
    cfg.validate()?;
    let grid = *path0.grid();
    let times = path0.times().to_vec();
    let n = grid.len();
    let e = eps.get();
    let total_len = path0.values().len();
    // optimization variables: snapshots 1..M-1
    let (lo, hi) = (n, total_len - n);
    let mut ws = ActionWorkspace::new(&grid);
    let mut x = path0.values().to_vec();
    let mut full_grad = vec![0.0; total_len];

    let mut f = ws.eval(&times, &x, e, Some(&mut full_grad));
    let mut g = full_grad[lo..hi].to_vec();
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(0, "non-finite action or gradient at the initial path"));
    }

    let mut hist: VecDeque<Pair> = VecDeque::with_capacity(cfg.history);
    let mut action_trace = vec![f];
    let mut gradient_trace = vec![max_abs(&g)];
    let mut step_scale = cfg.initial_step;
    let mut stall = 0;
    let mut iterations = 0;
    let mut trial = x.clone();
    let mut step = vec![0.0; total_len];

    let termination = loop {
        let gnorm = max_abs(&g);
        if gnorm < cfg.gradient_tolerance {
            break Termination::Converged;
        }
        if iterations >= cfg.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let mut d = if cfg.history > 0 {
            lbfgs_direction(&g, &hist)
        } else {
            g.iter().map(|v| -v).collect()
        };
        let mut slope = dot(&g, &d);
        if hist.is_empty() || !(slope < 0.0) {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            let dn = max_abs(&d);
            d.iter_mut().for_each(|v| *v *= step_scale / dn);
            slope = dot(&g, &d);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        let halvings = match cfg.step_rule {
            StepRule::Backtracking => MAX_HALVINGS,
            StepRule::Fixed => 0,
        };
        for _ in 0..=halvings {
            for (s, dv) in step[lo..hi].iter_mut().zip(&d) {
                *s = alpha * dv;
            }
            let diff = ws.eval_difference(&times, &x, &step, e);
            let ok = match cfg.step_rule {
                StepRule::Backtracking => diff.is_finite() && diff <= ARMIJO * alpha * slope,
                StepRule::Fixed => diff.is_finite() && diff < 0.0,
            };
            if ok {
                accepted = Some(diff);
                break;
            }
            alpha *= 0.5;
        }

        let Some(diff) = accepted else {
            if cfg.step_rule == StepRule::Fixed {
                step_scale *= 0.5;
                hist.clear();
                continue;
            }
            if hist.is_empty() {
                break Termination::Stalled;
            }
            hist.clear();
            continue;
        };
        let f_new = f + diff;
        for ((t, xv), s) in trial[lo..hi].iter_mut().zip(&x[lo..hi]).zip(&step[lo..hi]) {
            *t = xv + s;
        }

        let f_check = ws.eval(&times, &trial, e, Some(&mut full_grad));
        let g_new = &full_grad[lo..hi];
        if !f_check.is_finite() || g_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(iterations, "non-finite action or gradient"));
        }
        if cfg.history > 0 {
            let s: Vec<f64> = trial[lo..hi].iter().zip(&x[lo..hi]).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-16 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) {
                if hist.len() == cfg.history {
                    hist.pop_front();
                }
                hist.push_back(Pair { s, y, rho: 1.0 / sy });
            }
        }
        let decrease = -diff / f.abs().max(f64::MIN_POSITIVE);
        stall = if decrease < STALL_RTOL { stall + 1 } else { 0 };
        core::mem::swap(&mut x, &mut trial);
        g.copy_from_slice(g_new);
        f = f_new;
        action_trace.push(f);
        gradient_trace.push(max_abs(&g));
        if stall >= STALL_WINDOW {
            break Termination::Stalled;
        }
    };

    let path = SpaceTimePath::new(grid, times, x)?;
    let breakdown = action(&path, eps);
    let report = MinimizerReport {
        iterations,
        breakdown,
        gradient_trace,
        action_trace,
        termination,
    };
    Ok((path, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Boundary;

    fn eps(v: f64) -> Epsilon {
        Epsilon::new(v).unwrap()
    }

    fn times(t_end: f64, m: usize) -> Vec<f64> {
        crate::functionals::uniform_times(t_end, m)
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "boundary_front".parse::<InitialPathKind>().unwrap(),
            InitialPathKind::BoundaryFront
        );
        assert!(matches!(
            "spiral".parse::<InitialPathKind>(),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn initial_path_endpoints() {
        let g = Grid::square([0.0, 0.0], [1.0, 1.0], [21, 21], Boundary::Neumann).unwrap();
        for kind in [
            InitialPathKind::LinearRamp,
            InitialPathKind::NucleationBubble,
            InitialPathKind::BoundaryFront,
        ] {
            let p = initial_path(kind, &g, times(2.0, 8), eps(0.05)).unwrap();
            assert!(p.snapshot(0).iter().all(|&v| v == -1.0));
            assert!(p.snapshot(8).iter().all(|&v| v == 1.0));
        }
        let p = initial_path(InitialPathKind::NucleationBubble, &g, times(2.0, 8), eps(0.05)).unwrap();
        assert!(p.snapshot(4)[g.index(10, 10)] > 0.0);
        let p = initial_path(InitialPathKind::LinearRamp, &g, times(2.0, 8), eps(0.05)).unwrap();
        assert!(p.snapshot(2).iter().all(|&v| (v + 0.5).abs() < 1e-15));
    }

    #[test]
    fn critical_path_is_returned_unchanged() {
        let g = Grid::line(0.0, 1.0, 11, Boundary::Neumann).unwrap();
        let p = SpaceTimePath::from_fn(g, 1.0, 4, |_, _, _| 1.0).unwrap();
        let (q, report) = minimize_action(&p, eps(0.1), &MinimizeConfig::default()).unwrap();
        assert_eq!(q, p);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.termination, Termination::Converged);
    }

    #[test]
    fn zero_budget_returns_start() {
        let g = Grid::line(0.0, 1.0, 11, Boundary::Neumann).unwrap();
        let p = initial_path(InitialPathKind::LinearRamp, &g, times(1.0, 4), eps(0.1)).unwrap();
        let cfg = MinimizeConfig {
            max_iterations: 0,
            ..Default::default()
        };
        let (q, report) = minimize_action(&p, eps(0.1), &cfg).unwrap();
        assert_eq!(q, p);
        assert_eq!(report.termination, Termination::MaxIterations);
    }

    #[test]
    fn descent_and_endpoint_preservation() {
        let g = Grid::line(0.0, 1.0, 21, Boundary::Neumann).unwrap();
        let e = eps(0.05);
        let p = initial_path(InitialPathKind::LinearRamp, &g, times(4.0, 16), e).unwrap();
        for rule in [StepRule::Backtracking, StepRule::Fixed] {
            let cfg = MinimizeConfig {
                max_iterations: 200,
                step_rule: rule,
                ..Default::default()
            };
            let (q, report) = minimize_action(&p, e, &cfg).unwrap();
            assert!(report.breakdown.total < action(&p, e).total);
            assert!(report
                .action_trace
                .windows(2)
                .all(|w| w[1] < w[0] || (rule == StepRule::Fixed && w[1] <= w[0])));
            let n = g.len();
            let last = q.values().len() - n;
            assert!(q.values()[..n]
                .iter()
                .zip(&p.values()[..n])
                .all(|(a, b)| a.to_bits() == b.to_bits()));
            assert!(q.values()[last..]
                .iter()
                .zip(&p.values()[last..])
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn converged_report_has_small_gradient() {
        let g = Grid::line(0.0, 1.0, 11, Boundary::Neumann).unwrap();
        let e = eps(0.2);
        let p = initial_path(InitialPathKind::LinearRamp, &g, times(1.0, 6), e).unwrap();
        let cfg = MinimizeConfig {
            gradient_tolerance: 1e-6,
            ..Default::default()
        };
        let (q, report) = minimize_action(&p, e, &cfg).unwrap();
        assert_eq!(report.termination, Termination::Converged);
        let grad = crate::functionals::action_gradient(&q, e);
        assert!(grad.values().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn invalid_config_rejected() {
        let g = Grid::line(0.0, 1.0, 11, Boundary::Neumann).unwrap();
        let p = initial_path(InitialPathKind::LinearRamp, &g, times(1.0, 4), eps(0.1)).unwrap();
        let cfg = MinimizeConfig {
            gradient_tolerance: 0.0,
            ..Default::default()
        };
        assert!(minimize_action(&p, eps(0.1), &cfg).is_err());
    }
}
