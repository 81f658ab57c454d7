//! Sharp-interface observables of a diffuse path: velocity and mean
//! curvature surrogates, equipartition, zero level sets, tube multiplicity,
//! the lower-bound gap and nucleation detection.
//!
//! Interval quantities are evaluated on the midpoint state of each
//! interval, with the same time difference and chemical potential that
//! enter the action, so the action density splits exactly into an
//! interface part and a remainder where `∇u` vanishes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::functionals::{energy_slice, Epsilon, IntervalState, SpaceTimePath};
use crate::mesh::{self, Grid, ScalarField};
use crate::potential::{QuarticWell, SURFACE_TENSION};
use crate::reduced::{FrontTrajectory, MassEvent, ReducedEvolution};

mod contour;

pub use contour::{contour_2d, crossings_1d, Polyline};

/// Relative size of the gradient-norm mask threshold.
pub const MASK_RELATIVE: f64 = 1e-8;

/// Total-energy increase between consecutive snapshots, in units of `c0`,
/// above which a nucleation candidate is reported.
pub const NUCLEATION_JUMP: f64 = 0.5;

/// Observables on one interval, one entry per node.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalObservables {
    pub t_start: f64,
    pub dt: f64,
    /// `v_ε = -(∂_t u / |∇u|) ∇u / |∇u|`; the second component is 0 in 1D.
    pub velocity: Vec<[f64; 2]>,
    /// `H_ε = w ∇u / (ε |∇u|²)`.
    pub curvature: Vec<[f64; 2]>,
    /// `V = -∂_t u / |∇u|`.
    pub normal_velocity: Vec<f64>,
    /// `H_n = w / (ε |∇u|)`.
    pub normal_curvature: Vec<f64>,
    /// `|∇u|` of the midpoint state (centered differences).
    pub gradient_norm: Vec<f64>,
    /// Nodes with `|∇u| ≤ δ`; all vector observables are zero there.
    pub masked: Vec<bool>,
    /// Pointwise action density `(√ε ∂_t u + w/√ε)²`.
    pub action_density: Vec<f64>,
    /// Midpoint state.
    pub state: Vec<f64>,
}

/// Observables for every interval of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffuseObservables {
    pub grid: Grid,
    pub intervals: Vec<IntervalObservables>,
}

/// Observables of interval `m` of `path`.
pub fn interval_observables(path: &SpaceTimePath, eps: Epsilon, m: usize) -> IntervalObservables {
    let grid = *path.grid();
    let n = grid.len();
    let e = eps.get();
    let se = libm::sqrt(e);
    let t = path.times();
    let dt = t[m + 1] - t[m];
    let mut st = IntervalState::new(n);
    st.load(&grid, path.snapshot(m), path.snapshot(m + 1), dt, e);

    let mut grad = [vec![0.0; n], vec![0.0; n]];
    for (axis, g) in grad.iter_mut().enumerate().take(grid.dim()) {
        mesh::gradient_axis_into(&grid, &st.mid, axis, g);
    }
    let gradient_norm: Vec<f64> = (0..n)
        .map(|k| libm::sqrt(grad[0][k] * grad[0][k] + grad[1][k] * grad[1][k]))
        .collect();
    let delta = MASK_RELATIVE * gradient_norm.iter().fold(0.0, |a: f64, &b| a.max(b));

    let mut obs = IntervalObservables {
        t_start: t[m],
        dt,
        velocity: vec![[0.0; 2]; n],
        curvature: vec![[0.0; 2]; n],
        normal_velocity: vec![0.0; n],
        normal_curvature: vec![0.0; n],
        gradient_norm,
        masked: vec![true; n],
        action_density: vec![0.0; n],
        state: Vec::new(),
    };
    for k in 0..n {
        let r = se * st.ut[k] + st.w[k] / se;
        obs.action_density[k] = r * r;
        let g = obs.gradient_norm[k];
        if g <= delta || g == 0.0 {
            continue;
        }
        obs.masked[k] = false;
        let normal = [grad[0][k] / g, grad[1][k] / g];
        let v = -st.ut[k] / g;
        let h = st.w[k] / (e * g);
        obs.normal_velocity[k] = v;
        obs.normal_curvature[k] = h;
        obs.velocity[k] = [v * normal[0], v * normal[1]];
        obs.curvature[k] = [h * normal[0], h * normal[1]];
    }
    obs.state = core::mem::take(&mut st.mid);
    obs
}

pub fn diffuse_observables(path: &SpaceTimePath, eps: Epsilon) -> DiffuseObservables {
    DiffuseObservables {
        grid: *path.grid(),
        intervals: (0..path.intervals())
            .map(|m| interval_observables(path, eps, m))
            .collect(),
    }
}

/// `v_ε` on every interval.
pub fn diffuse_velocity(path: &SpaceTimePath, eps: Epsilon) -> Vec<Vec<[f64; 2]>> {
    diffuse_observables(path, eps)
        .intervals
        .into_iter()
        .map(|o| o.velocity)
        .collect()
}

/// `H_ε` on every interval.
pub fn diffuse_curvature(path: &SpaceTimePath, eps: Epsilon) -> Vec<Vec<[f64; 2]>> {
    diffuse_observables(path, eps)
        .intervals
        .into_iter()
        .map(|o| o.curvature)
        .collect()
}

/// Smallest energy used as a denominator in [`equipartition_residual`].
pub const ENERGY_FLOOR: f64 = 1e-30;

/// `∫ |ξ_ε| / E_ε`, in `[0, 1]`; 0 for exact equipartition.
pub fn equipartition_residual(u: &ScalarField, eps: Epsilon) -> f64 {
    let xi = crate::functionals::discrepancy_density(u, eps);
    let abs: Vec<f64> = xi.values().iter().map(|v| v.abs()).collect();
    mesh::integrate_slice(u.grid(), &abs) / crate::functionals::energy(u, eps).max(ENERGY_FLOOR)
}

/// A connected piece of the zero level set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Locus {
    /// A crossing in 1D.
    Point(f64),
    /// A level-set curve in 2D.
    Curve(Polyline),
}

impl Locus {
    /// 1 for a point, the arc length for a curve.
    pub fn measure(&self, grid: &Grid) -> f64 {
        match self {
            Locus::Point(_) => 1.0,
            Locus::Curve(c) => c.length(grid),
        }
    }

    /// Distance from `x` to the locus.
    pub fn distance(&self, grid: &Grid, x: [f64; 2]) -> f64 {
        match self {
            Locus::Point(p) => contour::displacement(grid, [*p, 0.0], [x[0], 0.0])[0].abs(),
            Locus::Curve(c) => {
                let n = c.vertices.len();
                if n == 1 {
                    return contour::norm(contour::displacement(grid, c.vertices[0], x));
                }
                let count = if c.closed { n } else { n - 1 };
                (0..count)
                    .map(|i| segment_distance(grid, c.vertices[i], c.vertices[(i + 1) % n], x))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

fn segment_distance(grid: &Grid, a: [f64; 2], b: [f64; 2], x: [f64; 2]) -> f64 {
    let ab = contour::displacement(grid, a, b);
    let ax = contour::displacement(grid, a, x);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 {
        ((ax[0] * ab[0] + ax[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    contour::norm([ax[0] - s * ab[0], ax[1] - s * ab[1]])
}

/// Calls `hit` for every node within `r` of the segment `[a, b]`, scanning
/// only the index window around it.
fn nodes_near(grid: &Grid, a: [f64; 2], b: [f64; 2], r: f64, hit: &mut impl FnMut(usize)) {
    let periodic = grid.bc() == crate::mesh::Boundary::Periodic;
    let mut range = [(0i64, 0i64); 2];
    for (axis, range) in range.iter_mut().enumerate().take(grid.dim()) {
        let (o, h) = (grid.origin()[axis], grid.spacing()[axis]);
        let lo = libm::floor((a[axis].min(b[axis]) - r - o) / h) as i64;
        let hi = libm::ceil((a[axis].max(b[axis]) + r - o) / h) as i64;
        let n = grid.counts()[axis] as i64;
        *range = if periodic {
            (lo, hi.min(lo + n - 1))
        } else {
            (lo.max(0), hi.min(n - 1))
        };
    }
    let wrap = |i: i64, axis: usize| {
        let n = grid.counts()[axis] as i64;
        i.rem_euclid(n) as usize
    };
    for j in range[1].0..=range[1].1 {
        for i in range[0].0..=range[0].1 {
            let k = grid.index(wrap(i, 0), if grid.dim() == 2 { wrap(j, 1) } else { 0 });
            if segment_distance(grid, a, b, grid.coords(k)) <= r {
                hit(k);
            }
        }
    }
}

/// Zero level set of `u`: crossings in 1D, marching-squares curves in 2D.
pub fn extract_interface(u: &ScalarField) -> Vec<Locus> {
    let grid = u.grid();
    if grid.dim() == 1 {
        crossings_1d(grid, u.values()).into_iter().map(Locus::Point).collect()
    } else {
        contour_2d(grid, u.values()).into_iter().map(Locus::Curve).collect()
    }
}

/// Tube estimate of the multiplicity of one or more loci that share a tube.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TubeMultiplicity {
    /// Indices into the locus list that share this tube.
    pub loci: Vec<usize>,
    pub multiplicity: f64,
    /// Energy of `u` inside the tube.
    pub tube_energy: f64,
    /// Measure attributed to the tube: the mean measure of its loci.
    pub measure: f64,
    /// Set when tubes of distinct loci overlapped and were merged.
    pub ambiguous: bool,
}

/// Energy inside the tube of radius `tube_radius` around each locus,
/// divided by `c0` times the locus measure. Loci whose tubes overlap are
/// merged into one tube, reported with the `ambiguous` flag; the merged
/// measure is the mean of the members, so two fronts collapsing onto one
/// interface count as multiplicity 2.
pub fn multiplicity(u: &ScalarField, eps: Epsilon, loci: &[Locus], tube_radius: f64) -> Result<Vec<TubeMultiplicity>> {
    if !(tube_radius.is_finite() && tube_radius > 0.0) {
        return Err(Error::invalid("tube radius must be positive"));
    }
    let grid = *u.grid();
    let n = grid.len();
    if loci.is_empty() {
        return Ok(Vec::new());
    }
    // nearest locus within the tube, per node
    let mut owner: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (l, locus) in loci.iter().enumerate() {
        let mut hit = |k: usize| {
            if owner[k].last() != Some(&l) {
                owner[k].push(l);
            }
        };
        match locus {
            Locus::Point(p) => nodes_near(&grid, [*p, 0.0], [*p, 0.0], tube_radius, &mut hit),
            Locus::Curve(c) => {
                let nv = c.vertices.len();
                let count = if c.closed || nv == 1 { nv } else { nv - 1 };
                for i in 0..count {
                    nodes_near(&grid, c.vertices[i], c.vertices[(i + 1) % nv], tube_radius, &mut hit);
                }
            }
        }
    }
    // union-find over loci sharing a node
    let mut parent: Vec<usize> = (0..loci.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for o in &owner {
        for w in o.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let density = crate::functionals::energy_density(u, eps);
    let mut groups: Vec<(usize, TubeMultiplicity)> = Vec::new();
    for l in 0..loci.len() {
        let root = find(&mut parent, l);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, g)) => g.loci.push(l),
            None => groups.push((
                root,
                TubeMultiplicity {
                    loci: vec![l],
                    multiplicity: 0.0,
                    tube_energy: 0.0,
                    measure: 0.0,
                    ambiguous: false,
                },
            )),
        }
    }
    for (root, g) in groups.iter_mut() {
        g.tube_energy = owner
            .iter()
            .enumerate()
            .filter(|(_, o)| o.first().is_some_and(|&l| find(&mut parent, l) == *root))
            .map(|(k, _)| grid.weight(k) * density[k])
            .sum();
        g.measure = g.loci.iter().map(|&l| loci[l].measure(&grid)).sum::<f64>() / g.loci.len() as f64;
        g.multiplicity = g.tube_energy / (SURFACE_TENSION * g.measure);
        g.ambiguous = g.loci.len() > 1;
    }
    Ok(groups.into_iter().map(|(_, g)| g).collect())
}

/// Interface of one snapshot with per-tube multiplicities.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterfaceSnapshot {
    pub time: f64,
    pub loci: Vec<Locus>,
    pub tubes: Vec<TubeMultiplicity>,
}

/// Interfaces of every snapshot of a path.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterfaceTrack {
    pub tube_radius: f64,
    pub snapshots: Vec<InterfaceSnapshot>,
}

pub fn interface_snapshot(u: &ScalarField, eps: Epsilon, time: f64, tube_radius: f64) -> Result<InterfaceSnapshot> {
    let loci = extract_interface(u);
    let tubes = multiplicity(u, eps, &loci, tube_radius)?;
    Ok(InterfaceSnapshot { time, loci, tubes })
}

pub fn track_interfaces(path: &SpaceTimePath, eps: Epsilon, tube_radius: f64) -> Result<InterfaceTrack> {
    let snapshots = (0..path.snapshot_count())
        .map(|m| interface_snapshot(&path.snapshot_field(m), eps, path.times()[m], tube_radius))
        .collect::<Result<_>>()?;
    Ok(InterfaceTrack { tube_radius, snapshots })
}

/// Lower-bound comparison of the action with its interface part.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LowerBoundGap {
    /// `lhs - rhs`; equals the action carried where `∇u` vanishes.
    pub gap: f64,
    /// The discrete action.
    pub lhs: f64,
    /// `Σ Δt ∫ ε|∇u|² |v_ε - H_ε|²` off the mask.
    pub rhs: f64,
}

/// Per-interval rates (`lhs`, `rhs` and `gap` divided by `Δt`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapRate {
    pub t: f64,
    pub lhs_rate: f64,
    pub rhs_rate: f64,
    pub gap_rate: f64,
}

fn interval_gap(grid: &Grid, obs: &IntervalObservables, eps: f64) -> GapRate {
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for k in 0..grid.len() {
        let w = grid.weight(k);
        lhs += w * obs.action_density[k];
        if !obs.masked[k] {
            let g = obs.gradient_norm[k];
            let dv = [
                obs.velocity[k][0] - obs.curvature[k][0],
                obs.velocity[k][1] - obs.curvature[k][1],
            ];
            rhs += w * eps * g * g * (dv[0] * dv[0] + dv[1] * dv[1]);
        }
    }
    GapRate {
        t: obs.t_start,
        lhs_rate: lhs,
        rhs_rate: rhs,
        gap_rate: lhs - rhs,
    }
}

pub fn gap_rates(path: &SpaceTimePath, eps: Epsilon) -> Vec<GapRate> {
    let grid = *path.grid();
    (0..path.intervals())
        .map(|m| interval_gap(&grid, &interval_observables(path, eps, m), eps.get()))
        .collect()
}

pub fn lower_bound_gap(path: &SpaceTimePath, eps: Epsilon) -> LowerBoundGap {
    let t = path.times();
    let mut out = LowerBoundGap::default();
    for (m, r) in gap_rates(path, eps).iter().enumerate() {
        let dt = t[m + 1] - t[m];
        out.lhs += dt * r.lhs_rate;
        out.rhs += dt * r.rhs_rate;
    }
    out.gap = out.lhs - out.rhs;
    out
}

/// A jump of total energy between consecutive snapshots.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NucleationCandidate {
    /// Index of the snapshot after the jump.
    pub snapshot: usize,
    pub time: f64,
    pub energy_jump: f64,
}

/// Snapshots whose total energy exceeds the previous one by more than
/// `NUCLEATION_JUMP · c0`.
pub fn detect_nucleations(path: &SpaceTimePath, eps: Epsilon) -> Vec<NucleationCandidate> {
    let grid = *path.grid();
    let energies: Vec<f64> = (0..path.snapshot_count())
        .map(|m| energy_slice(&grid, path.snapshot(m), eps.get()))
        .collect();
    energies
        .windows(2)
        .enumerate()
        .filter(|(_, e)| e[1] - e[0] > NUCLEATION_JUMP * SURFACE_TENSION)
        .map(|(m, e)| NucleationCandidate {
            snapshot: m + 1,
            time: path.times()[m + 1],
            energy_jump: e[1] - e[0],
        })
        .collect()
}

/// Order-preserving matching of crossings between two snapshots that
/// minimizes total displacement plus `skip` per unmatched crossing.
fn align(prev: &[f64], next: &[f64], skip: f64) -> Vec<(Option<usize>, Option<usize>)> {
    let (a, b) = (prev.len(), next.len());
    let mut cost = vec![0.0; (a + 1) * (b + 1)];
    let at = |i: usize, j: usize| i * (b + 1) + j;
    for i in 0..=a {
        for j in 0..=b {
            if i == 0 && j == 0 {
                continue;
            }
            let mut c = f64::INFINITY;
            if i > 0 {
                c = c.min(cost[at(i - 1, j)] + skip);
            }
            if j > 0 {
                c = c.min(cost[at(i, j - 1)] + skip);
            }
            if i > 0 && j > 0 {
                c = c.min(cost[at(i - 1, j - 1)] + (prev[i - 1] - next[j - 1]).abs());
            }
            cost[at(i, j)] = c;
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (a, b);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && cost[at(i, j)] == cost[at(i - 1, j - 1)] + (prev[i - 1] - next[j - 1]).abs() {
            out.push((Some(i - 1), Some(j - 1)));
            i -= 1;
            j -= 1;
        } else if i > 0 && cost[at(i, j)] == cost[at(i - 1, j)] + skip {
            out.push((Some(i - 1), None));
            i -= 1;
        } else {
            out.push((None, Some(j - 1)));
            j -= 1;
        }
    }
    out.reverse();
    out
}

/// Point-front evolution read off the zero crossings of a 1D path.
///
/// Crossings of consecutive snapshots are matched in order. A crossing
/// without a predecessor starts a front with a nucleation of mass 1 at its
/// first snapshot; a front without a successor ends with an annihilation
/// at the first snapshot where it is missing, holding its last position
/// until then. Annihilations that would coincide with a nucleation are
/// moved just before it.
pub fn extract_reduced_1d(path: &SpaceTimePath) -> Result<ReducedEvolution> {
    let grid = *path.grid();
    if grid.dim() != 1 {
        return Err(Error::invalid("front extraction needs a 1D path"));
    }
    let t = path.times();
    let last = path.snapshot_count() - 1;
    let skip = grid.extents()[0];
    struct Open {
        times: Vec<f64>,
        xs: Vec<f64>,
    }
    let mut open: Vec<Open> = Vec::new();
    let mut done: Vec<(Open, Option<f64>)> = Vec::new();
    let mut births: Vec<f64> = Vec::new();
    let mut prev: Vec<f64> = Vec::new();
    for m in 0..=last {
        let now = crossings_1d(&grid, path.snapshot(m));
        let mut next_open: Vec<Open> = Vec::new();
        let mut slots: Vec<Option<Open>> = open.drain(..).map(Some).collect();
        for (p, q) in align(&prev, &now, skip) {
            match (p, q) {
                (Some(i), Some(j)) => {
                    let mut f = slots[i].take().expect("each predecessor matched once");
                    f.times.push(t[m]);
                    f.xs.push(now[j]);
                    next_open.push(f);
                }
                (Some(i), None) => {
                    let f = slots[i].take().expect("each predecessor matched once");
                    done.push((f, Some(t[m])));
                }
                (None, Some(j)) => {
                    if m > 0 {
                        births.push(t[m]);
                    }
                    next_open.push(Open {
                        times: vec![t[m]],
                        xs: vec![now[j]],
                    });
                }
                (None, None) => {}
            }
        }
        open = next_open;
        prev = now;
    }
    done.extend(open.into_iter().map(|f| (f, None)));

    let births_at = |time: f64| births.iter().filter(|&&b| b == time).count();
    let mut fronts = Vec::new();
    let mut annihilations: Vec<MassEvent> = Vec::new();
    for (mut f, death) in done {
        if let Some(td) = death {
            let before = f.times[f.times.len() - 1];
            let td = if births_at(td) > 0 {
                before + 0.5 * (td - before)
            } else {
                td
            };
            f.times.push(td);
            let x = f.xs[f.xs.len() - 1];
            f.xs.push(x);
            match annihilations.iter_mut().find(|a| a.time == td) {
                Some(a) => a.mass += 1.0,
                None => annihilations.push(MassEvent { time: td, mass: 1.0 }),
            }
        }
        fronts.push(FrontTrajectory::point(f.times, f.xs, 1)?);
    }
    let mut nucleations: Vec<MassEvent> = Vec::new();
    for b in births {
        match nucleations.iter_mut().find(|n| n.time == b) {
            Some(n) => n.mass += 1.0,
            None => nucleations.push(MassEvent { time: b, mass: 1.0 }),
        }
    }
    ReducedEvolution::new(t[0], t[last], fronts, nucleations, annihilations)
}

/// One term of the velocity pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairingTerm {
    /// Cosine mode numbers along x and y.
    pub mode: [usize; 2],
    /// `|Σ Δt ∫ (∂_t η + ∇η · v_ε) dμ_ε|` divided by `max |η|`.
    pub value: f64,
}

/// Discrete transport pairing of the energy measure with `v_ε` for the
/// test functions `η = sin(π (t - t0)/T) cos(jπ(x - x0)/Lx) cos(kπ(y - y0)/Ly)`,
/// `0 ≤ j, k ≤ max_mode`. For an evolution that moves with velocity `v_ε`
/// these stay bounded as the path is refined.
pub fn velocity_pairing(path: &SpaceTimePath, eps: Epsilon, max_mode: usize) -> Vec<PairingTerm> {
    let grid = *path.grid();
    let e = eps.get();
    let t = path.times();
    let (t0, span) = (t[0], path.duration());
    let pi = core::f64::consts::PI;
    let well = QuarticWell;
    let ky_max = if grid.dim() == 2 { max_mode } else { 0 };
    let modes: Vec<[usize; 2]> = (0..=max_mode).flat_map(|j| (0..=ky_max).map(move |k| [j, k])).collect();
    let mut sums = vec![0.0; modes.len()];
    let mut grad_sq = vec![0.0; grid.len()];
    for m in 0..path.intervals() {
        let obs = interval_observables(path, eps, m);
        mesh::grad_sq_into(&grid, &obs.state, &mut grad_sq);
        let tm = obs.t_start + 0.5 * obs.dt - t0;
        let (zeta, dzeta) = (libm::sin(pi * tm / span), pi / span * libm::cos(pi * tm / span));
        for k in 0..grid.len() {
            let mu = grid.weight(k) * (0.5 * e * grad_sq[k] + well.value(obs.state[k]) / e);
            let x = grid.coords(k);
            for (s, mode) in sums.iter_mut().zip(&modes) {
                let mut psi = 1.0;
                let mut dpsi = [0.0; 2];
                let mut parts = [1.0; 2];
                let mut dparts = [0.0; 2];
                for axis in 0..grid.dim() {
                    let l = grid.extents()[axis];
                    let a = pi * mode[axis] as f64 / l;
                    let xi = x[axis] - grid.origin()[axis];
                    parts[axis] = libm::cos(a * xi);
                    dparts[axis] = -a * libm::sin(a * xi);
                }
                psi *= parts[0] * parts[1];
                dpsi[0] = dparts[0] * parts[1];
                dpsi[1] = parts[0] * dparts[1];
                let v = obs.velocity[k];
                *s += obs.dt * mu * (dzeta * psi + zeta * (dpsi[0] * v[0] + dpsi[1] * v[1]));
            }
        }
    }
    modes
        .into_iter()
        .zip(sums)
        .map(|(mode, s)| PairingTerm { mode, value: s.abs() })
        .collect()
}
