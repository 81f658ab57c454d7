//! Sharp-interface reduced action for point fronts in one dimension and
//! circles in two dimensions, including nucleation costs.
//!
//! Masses are counted in units of `c0 · length`: a point front of
//! multiplicity `θ` carries mass `θ`, a circle of radius `r` carries
//! `θ · 2πr`. Every created unit of mass costs `4 c0` in the action, so
//! opening a new phase interval in the interior of a 1D domain (two points)
//! costs `8 c0`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::potential::SURFACE_TENSION;

pub mod oracle;

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// Geometry of a front.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum FrontShape {
    /// A point in 1D; positions are coordinates.
    #[cfg_attr(feature = "serde", serde(rename = "point_1d"))]
    Point1d,
    /// A circle in 2D; positions are radii.
    #[cfg_attr(feature = "serde", serde(rename = "circle_2d"))]
    Circle2d { center: [f64; 2] },
}

/// A single front sampled at increasing times. It is alive between its
/// first and last sample.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawTrajectory", into = "RawTrajectory"))]
pub struct FrontTrajectory {
    shape: FrontShape,
    times: Vec<f64>,
    positions: Vec<f64>,
    multiplicity: u32,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct RawTrajectory {
    pub shape: FrontShape,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub multiplicity: u32,
}

#[cfg(feature = "serde")]
fn one() -> u32 {
    1
}

impl TryFrom<RawTrajectory> for FrontTrajectory {
    type Error = Error;
    fn try_from(r: RawTrajectory) -> Result<Self> {
        FrontTrajectory::new(r.shape, r.times, r.positions, r.multiplicity)
    }
}

impl From<FrontTrajectory> for RawTrajectory {
    fn from(f: FrontTrajectory) -> Self {
        RawTrajectory {
            shape: f.shape,
            times: f.times,
            positions: f.positions,
            multiplicity: f.multiplicity,
        }
    }
}

impl FrontTrajectory {
    /// Circles may have radius zero only at their first or last sample.
    pub fn new(shape: FrontShape, times: Vec<f64>, positions: Vec<f64>, multiplicity: u32) -> Result<Self> {
        if times.is_empty() || times.len() != positions.len() {
            return Err(Error::invalid("a front needs matching, non-empty times and positions"));
        }
        if times.iter().chain(&positions).any(|v| !v.is_finite()) {
            return Err(Error::invalid("front samples must be finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("front sample times must be strictly increasing"));
        }
        if multiplicity == 0 {
            return Err(Error::invalid("front multiplicity must be at least 1"));
        }
        if let FrontShape::Circle2d { center } = shape {
            if center.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("circle center must be finite"));
            }
            if positions.iter().any(|&r| r < 0.0) {
                return Err(Error::invalid("circle radius must be nonnegative"));
            }
            let n = positions.len();
            if n > 2 && positions[1..n - 1].contains(&0.0) {
                return Err(Error::invalid("circle radius vanishes at an interior sample"));
            }
            if n == 2 && positions[0] == 0.0 && positions[1] == 0.0 {
                return Err(Error::invalid("circle radius vanishes on a whole segment"));
            }
        }
        Ok(FrontTrajectory {
            shape,
            times,
            positions,
            multiplicity,
        })
    }

    pub fn point(times: Vec<f64>, positions: Vec<f64>, multiplicity: u32) -> Result<Self> {
        Self::new(FrontShape::Point1d, times, positions, multiplicity)
    }

    pub fn circle(center: [f64; 2], times: Vec<f64>, radii: Vec<f64>, multiplicity: u32) -> Result<Self> {
        Self::new(FrontShape::Circle2d { center }, times, radii, multiplicity)
    }

    pub fn shape(&self) -> FrontShape {
        self.shape
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn multiplicity(&self) -> u32 {
        self.multiplicity
    }

    pub fn birth(&self) -> f64 {
        self.times[0]
    }

    pub fn death(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    fn mass_at(&self, i: usize) -> f64 {
        let theta = f64::from(self.multiplicity);
        match self.shape {
            FrontShape::Point1d => theta,
            FrontShape::Circle2d { .. } => theta * TWO_PI * self.positions[i],
        }
    }

    /// Mass when the front appears.
    pub fn initial_mass(&self) -> f64 {
        self.mass_at(0)
    }

    /// Mass when the front disappears.
    pub fn final_mass(&self) -> f64 {
        self.mass_at(self.times.len() - 1)
    }

    /// `θ c0 Σ (Δx)² / Δt`: the exact kinetic cost of the piecewise-linear
    /// interpolation of the samples.
    fn point_propagation(&self) -> f64 {
        let sum: f64 = self
            .times
            .windows(2)
            .zip(self.positions.windows(2))
            .map(|(t, x)| {
                let dx = x[1] - x[0];
                dx * dx / (t[1] - t[0])
            })
            .sum();
        f64::from(self.multiplicity) * SURFACE_TENSION * sum
    }

    /// `θ c0 ∫ 2πr (ṙ + 1/r)² dt` with `r²` interpolated linearly between
    /// samples. With `s = r²` the integrand is `2π (ṡ/2 + 1)² / √s`, which
    /// integrates in closed form on each segment; mean curvature flow
    /// (`ṡ = -2`) has exactly zero cost.
    fn circle_propagation(&self) -> f64 {
        let sum: f64 = self
            .times
            .windows(2)
            .zip(self.positions.windows(2))
            .map(|(t, r)| {
                let dt = t[1] - t[0];
                let ds = (r[1] * r[1] - r[0] * r[0]) / dt;
                let a = 0.5 * ds + 1.0;
                TWO_PI * a * a * 2.0 * dt / (r[0] + r[1])
            })
            .sum();
        f64::from(self.multiplicity) * SURFACE_TENSION * sum
    }
}

/// A jump of total front mass at a single time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct MassEvent {
    pub time: f64,
    /// Mass created or destroyed, in units of `c0 · length`.
    pub mass: f64,
}

/// Fronts on a time window together with their creation and destruction
/// events.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawEvolution", into = "RawEvolution"))]
pub struct ReducedEvolution {
    t_start: f64,
    t_end: f64,
    fronts: Vec<FrontTrajectory>,
    nucleations: Vec<MassEvent>,
    annihilations: Vec<MassEvent>,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct RawEvolution {
    pub t_start: f64,
    pub t_end: f64,
    pub fronts: Vec<FrontTrajectory>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub nucleations: Vec<MassEvent>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub annihilations: Vec<MassEvent>,
}

impl TryFrom<RawEvolution> for ReducedEvolution {
    type Error = Error;
    fn try_from(r: RawEvolution) -> Result<Self> {
        ReducedEvolution::new(r.t_start, r.t_end, r.fronts, r.nucleations, r.annihilations)
    }
}

impl From<ReducedEvolution> for RawEvolution {
    fn from(e: ReducedEvolution) -> Self {
        RawEvolution {
            t_start: e.t_start,
            t_end: e.t_end,
            fronts: e.fronts,
            nucleations: e.nucleations,
            annihilations: e.annihilations,
        }
    }
}

impl ReducedEvolution {
    /// Validates that every front lives inside `[t_start, t_end]`, that a
    /// front appearing after `t_start` with positive mass has a nucleation
    /// at its birth, that a front vanishing before `t_end` with positive
    /// mass has an annihilation at its death, and that no instant carries
    /// both kinds of event. Split such an instant into two events at
    /// distinct times.
    pub fn new(
        t_start: f64,
        t_end: f64,
        fronts: Vec<FrontTrajectory>,
        nucleations: Vec<MassEvent>,
        annihilations: Vec<MassEvent>,
    ) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(Error::invalid("evolution window must be finite with t_end > t_start"));
        }
        let inside = |t: f64| t >= t_start && t <= t_end;
        for ev in nucleations.iter().chain(&annihilations) {
            if !inside(ev.time) {
                return Err(Error::invalid("event time outside the evolution window"));
            }
            if !(ev.mass.is_finite() && ev.mass > 0.0) {
                return Err(Error::invalid("event mass must be positive and finite"));
            }
        }
        if nucleations
            .iter()
            .any(|n| annihilations.iter().any(|a| a.time == n.time))
        {
            return Err(Error::invalid(
                "creation and destruction at the same instant; split into separate events",
            ));
        }
        for f in &fronts {
            if !inside(f.birth()) || !inside(f.death()) {
                return Err(Error::invalid("front samples outside the evolution window"));
            }
            if f.birth() > t_start && f.initial_mass() > 0.0 && !nucleations.iter().any(|n| n.time == f.birth()) {
                return Err(Error::invalid("front appears without a nucleation event"));
            }
            if f.death() < t_end && f.final_mass() > 0.0 && !annihilations.iter().any(|a| a.time == f.death()) {
                return Err(Error::invalid("front disappears without an annihilation event"));
            }
        }
        Ok(ReducedEvolution {
            t_start,
            t_end,
            fronts,
            nucleations,
            annihilations,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn fronts(&self) -> &[FrontTrajectory] {
        &self.fronts
    }

    pub fn nucleations(&self) -> &[MassEvent] {
        &self.nucleations
    }

    pub fn annihilations(&self) -> &[MassEvent] {
        &self.annihilations
    }

    /// Sum of front masses alive at `t`, right-continuous in `t`.
    pub fn total_mass(&self, t: f64) -> f64 {
        self.fronts
            .iter()
            .filter(|f| f.birth() <= t && (t < f.death() || (t == f.death() && t == self.t_end)))
            .map(|f| {
                let i = f.times.partition_point(|&s| s <= t) - 1;
                let n = f.times.len();
                if i + 1 == n {
                    f.mass_at(i)
                } else {
                    let w = (t - f.times[i]) / (f.times[i + 1] - f.times[i]);
                    (1.0 - w) * f.mass_at(i) + w * f.mass_at(i + 1)
                }
            })
            .sum()
    }
}

/// Propagation and nucleation parts of a reduced action.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReducedBreakdown {
    pub propagation: f64,
    pub nucleation: f64,
    pub total: f64,
}

impl ReducedBreakdown {
    fn new(propagation: f64, nucleation: f64) -> Self {
        // empty f64 sums are -0.0; report +0.0
        let (propagation, nucleation) = (propagation + 0.0, nucleation + 0.0);
        ReducedBreakdown {
            propagation,
            nucleation,
            total: propagation + nucleation,
        }
    }
}

/// Sum of created masses in energy units, `c0 · Σ mass`.
pub fn nucleation_cost(ev: &ReducedEvolution) -> f64 {
    SURFACE_TENSION * ev.nucleations.iter().map(|n| n.mass).sum::<f64>()
}

/// Reduced action of point fronts: `Σ θ c0 ∫ ẋ² dt + 4 · nucleation_cost`.
pub fn reduced_action_1d(ev: &ReducedEvolution) -> Result<ReducedBreakdown> {
    if ev.fronts.iter().any(|f| f.shape != FrontShape::Point1d) {
        return Err(Error::invalid("1D reduced action needs point fronts"));
    }
    let propagation = ev.fronts.iter().map(FrontTrajectory::point_propagation).sum();
    Ok(ReducedBreakdown::new(propagation, 4.0 * nucleation_cost(ev)))
}

/// Reduced action of circles: `Σ θ c0 ∫ 2πr (ṙ + 1/r)² dt + 4 · nucleation_cost`.
/// Outward motion is positive and the scalar curvature is `-1/r`, so
/// shrinking by mean curvature flow costs nothing.
pub fn reduced_action_circle(ev: &ReducedEvolution) -> Result<ReducedBreakdown> {
    if ev
        .fronts
        .iter()
        .any(|f| !matches!(f.shape, FrontShape::Circle2d { .. }))
    {
        return Err(Error::invalid("circle reduced action needs circle fronts"));
    }
    let propagation = ev.fronts.iter().map(FrontTrajectory::circle_propagation).sum();
    Ok(ReducedBreakdown::new(propagation, 4.0 * nucleation_cost(ev)))
}

/// Comparison of a phase evolution with a measure evolution that hides a
/// double-density front.
///
/// In the phase picture a phase interval closes at `x1` at time `t1` and a
/// new one opens at `x2` at time `t2`, which pays a full interior
/// nucleation. In the measure picture the two fronts merge into one front
/// of multiplicity 2 that travels in a straight line from `x1` to `x2` and
/// splits again, without any jump of mass. Only the parts on `[t1, t2]`
/// that differ are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HiddenBoundaryComparison {
    pub action_u: f64,
    pub action_mu: f64,
    pub difference: f64,
    /// `x2 - x1 < 4 √(t2 - t1)`, the threshold as usually stated.
    pub threshold_satisfied: bool,
    /// `(x2 - x1)² < 4 (t2 - t1)`, the exact condition for `difference > 0`.
    pub break_even_satisfied: bool,
}

pub fn example_hidden_boundary(x1: f64, x2: f64, t1: f64, t2: f64) -> Result<HiddenBoundaryComparison> {
    if ![x1, x2, t1, t2].iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("hidden boundary arguments must be finite"));
    }
    if t2 <= t1 {
        return Err(Error::invalid("hidden boundary needs t2 > t1"));
    }
    let opened = alloc::vec![
        FrontTrajectory::point(alloc::vec![t2], alloc::vec![x2], 1)?,
        FrontTrajectory::point(alloc::vec![t2], alloc::vec![x2], 1)?,
    ];
    let phase = ReducedEvolution::new(
        t1,
        t2,
        opened,
        alloc::vec![MassEvent { time: t2, mass: 2.0 }],
        Vec::new(),
    )?;
    let hidden = FrontTrajectory::point(alloc::vec![t1, t2], alloc::vec![x1, x2], 2)?;
    let measure = ReducedEvolution::new(t1, t2, alloc::vec![hidden], Vec::new(), Vec::new())?;
    let action_u = reduced_action_1d(&phase)?.total;
    let action_mu = reduced_action_1d(&measure)?.total;
    let dx = x2 - x1;
    Ok(HiddenBoundaryComparison {
        action_u,
        action_mu,
        difference: action_u - action_mu,
        threshold_satisfied: dx < 4.0 * libm::sqrt(t2 - t1),
        break_even_satisfied: dx * dx < 4.0 * (t2 - t1),
    })
}
