//! Brute-force optimizers for reduced front schedules, used as reference
//! values for the diffuse minimizer.

use alloc::vec;
use alloc::vec::Vec;

use super::{reduced_action_1d, FrontTrajectory, MassEvent, ReducedBreakdown, ReducedEvolution, TWO_PI};
use crate::error::{Error, Result};
use crate::potential::SURFACE_TENSION;

/// Best reduced switching found by [`switching_1d`].
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingOptimum {
    pub breakdown: ReducedBreakdown,
    pub evolution: ReducedEvolution,
}

/// Minimizes the reduced action of switching `[0, length]` from the phase
/// `-1` to the phase `+1` on `[0, t_end]` over front schedules on a
/// space-time lattice with `time_steps` intervals and `cells` spatial cells.
///
/// Two families are searched exhaustively: one front entering through
/// either boundary (one unit of created mass) and an interior nucleation of
/// two fronts that sweep to the two boundaries (two units). Each front moves
/// between any lattice nodes in each step; a front that reaches its
/// boundary stays there at no cost. The best schedule is returned as an
/// evolution and rescored with [`reduced_action_1d`].
pub fn switching_1d(length: f64, t_end: f64, time_steps: usize, cells: usize) -> Result<SwitchingOptimum> {
    if !(length.is_finite() && length > 0.0 && t_end.is_finite() && t_end > 0.0) {
        return Err(Error::invalid("switching oracle needs a positive length and duration"));
    }
    if time_steps == 0 || cells == 0 {
        return Err(Error::invalid("switching oracle needs a nonempty lattice"));
    }
    let dt = t_end / time_steps as f64;
    let dx = length / cells as f64;
    let xs: Vec<f64> = (0..=cells)
        .map(|j| if j == cells { length } else { j as f64 * dx })
        .collect();
    let to_left = CostToGo::new(&xs, time_steps, dt, 0);
    let to_right = CostToGo::new(&xs, time_steps, dt, cells);

    // (cost, start step, start node, interior nucleation?)
    let mut best = (f64::INFINITY, 0, 0, false);
    for i in 0..time_steps {
        let entry_left = 4.0 * SURFACE_TENSION + to_right.value(i, 0);
        let entry_right = 4.0 * SURFACE_TENSION + to_left.value(i, cells);
        if entry_left < best.0 {
            best = (entry_left, i, 0, false);
        }
        if entry_right < best.0 {
            best = (entry_right, i, cells, false);
        }
        for j in 1..cells {
            let c = 8.0 * SURFACE_TENSION + to_left.value(i, j) + to_right.value(i, j);
            if c < best.0 {
                best = (c, i, j, true);
            }
        }
    }

    let (_, i0, j0, interior) = best;
    let t0 = i0 as f64 * dt;
    let times: Vec<f64> = (i0..=time_steps)
        .map(|i| if i == time_steps { t_end } else { i as f64 * dt })
        .collect();
    let mut fronts = Vec::new();
    if interior || j0 != cells {
        fronts.push(FrontTrajectory::point(
            times.clone(),
            to_right.schedule(i0, j0, &xs),
            1,
        )?);
    }
    if interior || j0 == cells {
        fronts.push(FrontTrajectory::point(times.clone(), to_left.schedule(i0, j0, &xs), 1)?);
    }
    let created = fronts.len() as f64;
    let evolution = ReducedEvolution::new(
        0.0,
        t_end,
        fronts,
        vec![MassEvent {
            time: t0,
            mass: created,
        }],
        Vec::new(),
    )?;
    let breakdown = reduced_action_1d(&evolution)?;
    Ok(SwitchingOptimum { breakdown, evolution })
}

/// Optimal cost for one point front to reach `target` by the final step,
/// tabulated backwards over the lattice.
struct CostToGo {
    nodes: usize,
    value: Vec<f64>,
    next: Vec<usize>,
}

impl CostToGo {
    fn new(xs: &[f64], steps: usize, dt: f64, target: usize) -> Self {
        let nodes = xs.len();
        let mut value = vec![f64::INFINITY; (steps + 1) * nodes];
        let mut next = vec![target; steps * nodes];
        value[steps * nodes + target] = 0.0;
        for i in (0..steps).rev() {
            for j in 0..nodes {
                let mut best = (f64::INFINITY, target);
                for l in 0..nodes {
                    let after = value[(i + 1) * nodes + l];
                    if after.is_infinite() {
                        continue;
                    }
                    let d = xs[l] - xs[j];
                    let c = SURFACE_TENSION * d * d / dt + after;
                    if c < best.0 {
                        best = (c, l);
                    }
                }
                value[i * nodes + j] = best.0;
                next[i * nodes + j] = best.1;
            }
        }
        CostToGo { nodes, value, next }
    }

    fn value(&self, step: usize, node: usize) -> f64 {
        self.value[step * self.nodes + node]
    }

    fn schedule(&self, step: usize, node: usize, xs: &[f64]) -> Vec<f64> {
        let steps = self.next.len() / self.nodes;
        let mut out = vec![xs[node]];
        let mut j = node;
        for i in step..steps {
            j = self.next[i * self.nodes + j];
            out.push(xs[j]);
        }
        out
    }
}

/// Minimum over lattice schedules of the reduced cost of a single circle of
/// multiplicity one growing from a point at time 0 to `radius` at `t_end`.
///
/// The state is `s = r²` on `levels + 1` equally spaced values in
/// `[0, radius²]` (any level may follow any other), time has `time_steps`
/// equal intervals, and each step is charged with the exact cost of the
/// linear-in-`s` segment. Creation at radius 0 is free.
pub fn circle_growth(radius: f64, t_end: f64, time_steps: usize, levels: usize) -> Result<f64> {
    if !(radius.is_finite() && radius > 0.0 && t_end.is_finite() && t_end > 0.0) {
        return Err(Error::invalid("circle oracle needs a positive radius and duration"));
    }
    if time_steps < 2 || levels == 0 {
        return Err(Error::invalid("circle oracle needs at least two steps and one level"));
    }
    let dt = t_end / time_steps as f64;
    let s_max = radius * radius;
    let rs: Vec<f64> = (0..=levels)
        .map(|l| libm::sqrt(s_max * l as f64 / levels as f64))
        .collect();
    let seg = |a: usize, b: usize| {
        let ds = (rs[b] * rs[b] - rs[a] * rs[a]) / dt;
        let c = 0.5 * ds + 1.0;
        SURFACE_TENSION * TWO_PI * c * c * 2.0 * dt / (rs[a] + rs[b])
    };
    // after the first step the radius must stay positive
    let mut cost: Vec<f64> = (0..=levels)
        .map(|l| if l == 0 { f64::INFINITY } else { seg(0, l) })
        .collect();
    let mut fresh = vec![0.0; levels + 1];
    for i in 1..time_steps {
        let last = i + 1 == time_steps;
        for (b, out) in fresh.iter_mut().enumerate() {
            *out = if b == 0 || (last && b != levels) {
                f64::INFINITY
            } else {
                (1..=levels).map(|a| cost[a] + seg(a, b)).fold(f64::INFINITY, f64::min)
            };
        }
        core::mem::swap(&mut cost, &mut fresh);
    }
    Ok(cost[levels])
}

/// Stationary schedule of `∫ 2π r (ṙ + 1/r)² dt` for a circle growing from a
/// point to `radius` over `[0, t_end]`, sampled at `samples + 1` equal times.
///
/// In `s = r²` the conserved quantity of the Euler-Lagrange equation gives
/// `ṡ = 2 √(1 + C √s)`; the constant `C` is fixed by the travel time. Such a
/// monotone schedule exists for `t_end < 4 radius² / 3`.
pub fn optimal_growth_schedule(radius: f64, t_end: f64, samples: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(radius.is_finite() && radius > 0.0 && t_end.is_finite() && t_end > 0.0) || samples == 0 {
        return Err(Error::invalid(
            "growth schedule needs a positive radius, duration and sample count",
        ));
    }
    if t_end >= 4.0 * radius * radius / 3.0 {
        return Err(Error::invalid("no monotone growth schedule for t_end >= 4 r^2 / 3"));
    }
    // Time to reach s from 0 in the variable v = √s:
    //   t(v) = ∫_0^v σ dσ / √(1 + C σ).
    let travel = |c: f64, v: f64| -> f64 {
        let x = c * v;
        if x.abs() < 1e-2 {
            // binomial series of (1 + x)^(-1/2), integrated term by term
            let (mut term, mut sum) = (1.0, 0.0);
            for k in 0..10 {
                sum += term / (k as f64 + 2.0);
                term *= -x * (2.0 * k as f64 + 1.0) / (2.0 * k as f64 + 2.0);
            }
            return v * v * sum;
        }
        let q = libm::sqrt(1.0 + x);
        2.0 * ((q * q * q - 1.0) / 3.0 - (q - 1.0)) / (c * c)
    };
    // travel time decreases in C; bracket C in (-1/radius, ∞)
    let mut lo = -1.0 / radius;
    let mut hi = 1.0;
    while travel(hi, radius) > t_end {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if travel(mid, radius) > t_end {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let times: Vec<f64> = (0..=samples).map(|i| t_end * i as f64 / samples as f64).collect();
    let radii = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i == 0 {
                return 0.0;
            }
            if i == samples {
                return radius;
            }
            let (mut a, mut b) = (0.0, radius);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if travel(c, m) < t {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        })
        .collect();
    Ok((times, radii))
}
