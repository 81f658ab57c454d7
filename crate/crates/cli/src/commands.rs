//! The five subcommands.

use std::path::Path;

use ac_action::diagnostics::{self, InterfaceTrack, IntervalObservables, Locus};
use ac_action::dynamics::{run_flow, run_stochastic, FlowConfig};
use ac_action::functionals::{action, energy};
use ac_action::minimizer::{initial_path, minimize_action};
use ac_action::reduced::{self, oracle, FrontShape, ReducedBreakdown, ReducedEvolution};
use ac_action::{ActionBreakdown, Boundary, Epsilon, Grid, ScalarField, SpaceTimePath};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{keyed, CommandKind, RunConfig};
use crate::container;
use crate::error::{CliError, CliResult};
use crate::output::{cell, to_json_string, write_csv, write_json};
use crate::Context;

/// Lattice of the reduced switching oracle reported next to 1D minima.
const ORACLE_TIME_STEPS: usize = 40;
const ORACLE_CELLS: usize = 40;

/// Interface summary of one snapshot.
struct InterfaceRow {
    loci: usize,
    measure: f64,
    radius: Option<f64>,
}

fn interface_row(u: &ScalarField) -> InterfaceRow {
    let grid = u.grid();
    let loci = diagnostics::extract_interface(u);
    let measure = loci.iter().map(|l| l.measure(grid)).fold(0.0, |a, b| a + b);
    let radius = match loci.as_slice() {
        [Locus::Curve(c)] if c.closed => Some((c.enclosed_area(grid).abs() / std::f64::consts::PI).sqrt()),
        _ => None,
    };
    InterfaceRow {
        loci: loci.len(),
        measure,
        radius,
    }
}

fn measure_unit(grid: &Grid) -> &'static str {
    if grid.dim() == 1 {
        "measure [count]"
    } else {
        "measure [length]"
    }
}

#[derive(Serialize)]
struct SimulateMetadata<'a> {
    crate_version: &'static str,
    config: &'a RunConfig,
    seed: u64,
    stochastic: bool,
    steps: usize,
    dt: f64,
    record_every: usize,
    snapshots: usize,
    final_time: f64,
    final_energy: f64,
}

pub fn simulate(ctx: &Context) -> CliResult<()> {
    let cfg = ctx.config()?;
    cfg.check_command(CommandKind::Simulate)?;
    let grid = cfg.grid()?;
    let eps = cfg.eps(None)?;
    let time = cfg.time()?;
    let flow = cfg.flow()?;
    if !(flow.dt.is_finite() && flow.dt > 0.0) {
        return Err(CliError::config("key `flow.dt`: must be positive"));
    }
    let steps = (time.t_end / flow.dt).round().max(1.0) as usize;
    let record_every = time.record_every.unwrap_or(1);
    let fc = keyed("flow", FlowConfig::new(&grid, eps, flow.dt, flow.scheme, steps))?.with_record_every(record_every);
    let u0 = cfg.initial_field(grid, eps)?;
    let seed = ctx.seed();
    let noise = cfg.noise(&grid, seed)?;
    let out = ctx.output_dir()?;

    ctx.note(format!(
        "simulate: {steps} steps of {} on {} nodes",
        flow.dt,
        grid.len()
    ));
    let path = match &noise {
        Some(n) => run_stochastic(&u0, &fc, n)?,
        None => run_flow(&u0, &fc)?,
    };
    container::write_path(&out.join("path.bin"), &path)?;

    let rows: Vec<(f64, f64, InterfaceRow)> = (0..path.snapshot_count())
        .into_par_iter()
        .map(|m| {
            let u = path.snapshot_field(m);
            (
                energy(&u, eps),
                diagnostics::equipartition_residual(&u, eps),
                interface_row(&u),
            )
        })
        .collect();
    let times = path.times();
    write_csv(
        &out.join("energy.csv"),
        &["t [time]", "energy [energy]", "equipartition_residual [1]"],
        rows.iter()
            .zip(times)
            .map(|((e, xi, _), t)| vec![t.to_string(), e.to_string(), xi.to_string()]),
    )?;
    write_csv(
        &out.join("interface.csv"),
        &["t [time]", "loci [count]", measure_unit(&grid), "radius [length]"],
        rows.iter()
            .zip(times)
            .map(|((_, _, r), t)| vec![t.to_string(), r.loci.to_string(), r.measure.to_string(), cell(r.radius)]),
    )?;
    let last = path.snapshot_count() - 1;
    container::write_field_csv(&out.join("final.csv"), &path.snapshot_field(last))?;
    write_json(
        &out.join("metadata.json"),
        &SimulateMetadata {
            crate_version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            seed,
            stochastic: noise.is_some(),
            steps,
            dt: flow.dt,
            record_every,
            snapshots: path.snapshot_count(),
            final_time: times[last],
            final_energy: rows[last].0,
        },
    )?;
    ctx.note(format!("simulate: wrote {}", out.display()));
    Ok(())
}

/// Maps a `-1 → +1` ansatz affinely onto other endpoint states.
fn retarget(p: SpaceTimePath, start: f64, end: f64) -> CliResult<SpaceTimePath> {
    if start == -1.0 && end == 1.0 {
        return Ok(p);
    }
    let values = p
        .values()
        .iter()
        .map(|u| start + (end - start) * 0.5 * (u + 1.0))
        .collect();
    Ok(SpaceTimePath::new(*p.grid(), p.times().to_vec(), values)?)
}

#[derive(Serialize)]
struct OracleComparison {
    lattice: [usize; 2],
    breakdown: ReducedBreakdown,
    relative_difference: f64,
}

#[derive(Serialize)]
struct ActionReport {
    initial: ActionBreakdown,
    #[serde(rename = "final")]
    final_: ActionBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    reduced_oracle: Option<OracleComparison>,
}

pub fn minimize(ctx: &Context) -> CliResult<()> {
    let cfg = ctx.config()?;
    cfg.check_command(CommandKind::Minimize)?;
    let grid = cfg.grid()?;
    let eps = cfg.eps(None)?;
    let time = cfg.time()?;
    let slices = time
        .slices
        .filter(|&m| m >= 1)
        .ok_or_else(|| CliError::config("key `time.slices`: required, at least 1"))?;
    let spec = cfg.path_spec()?;
    let mcfg = cfg.minimizer()?;
    let out = ctx.output_dir()?;

    let times: Vec<f64> = (0..=slices).map(|i| time.t_end * i as f64 / slices as f64).collect();
    let p0 = retarget(
        keyed("path", initial_path(spec.kind, &grid, times, eps))?,
        spec.start,
        spec.end,
    )?;
    let initial = action(&p0, eps);
    ctx.note(format!(
        "minimize: {} nodes x {} slices, initial action {}",
        grid.len(),
        slices + 1,
        initial.total
    ));
    let (p, report) = minimize_action(&p0, eps, &mcfg)?;
    ctx.note(format!(
        "minimize: {:?} after {} iterations, action {}",
        report.termination, report.iterations, report.breakdown.total
    ));
    let reduced_oracle = if spec.switching && grid.dim() == 1 && grid.bc() == Boundary::Neumann {
        let opt = oracle::switching_1d(grid.extents()[0], time.t_end, ORACLE_TIME_STEPS, ORACLE_CELLS)?;
        Some(OracleComparison {
            lattice: [ORACLE_TIME_STEPS, ORACLE_CELLS],
            relative_difference: (report.breakdown.total - opt.breakdown.total) / opt.breakdown.total,
            breakdown: opt.breakdown,
        })
    } else {
        None
    };
    container::write_path(&out.join("path.bin"), &p)?;
    write_json(&out.join("report.json"), &report)?;
    write_json(
        &out.join("action.json"),
        &ActionReport {
            initial,
            final_: report.breakdown,
            reduced_oracle,
        },
    )?;
    Ok(())
}

fn resolve_eps(ctx: &Context, flag: Option<f64>, cmd: CommandKind) -> CliResult<Epsilon> {
    match &ctx.config {
        Some(cfg) => {
            cfg.check_command(cmd)?;
            cfg.eps(flag)
        }
        None => {
            let v = flag.ok_or_else(|| CliError::config("eps is required: pass --eps or set key `eps`"))?;
            keyed("eps", Epsilon::new(v))
        }
    }
}

fn tube_radius(ctx: &Context, eps: Epsilon) -> CliResult<f64> {
    match &ctx.config {
        Some(cfg) => cfg.tube_radius(eps),
        None => Ok(5.0 * eps.get()),
    }
}

fn track(path: &SpaceTimePath, eps: Epsilon, tube: f64) -> CliResult<InterfaceTrack> {
    let snapshots = (0..path.snapshot_count())
        .into_par_iter()
        .map(|m| diagnostics::interface_snapshot(&path.snapshot_field(m), eps, path.times()[m], tube))
        .collect::<ac_action::Result<Vec<_>>>()?;
    Ok(InterfaceTrack {
        tube_radius: tube,
        snapshots,
    })
}

/// Mean of `values` over unmasked nodes, weighted by `|∇u|²` and the
/// quadrature, so the average concentrates on the interface.
fn interface_mean(grid: &Grid, obs: &IntervalObservables, values: &[f64]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..grid.len() {
        if obs.masked[k] {
            continue;
        }
        let w = grid.weight(k) * obs.gradient_norm[k] * obs.gradient_norm[k];
        num += w * values[k];
        den += w;
    }
    (den > 0.0).then(|| num / den)
}

#[derive(Serialize)]
struct LowerBoundReport {
    lhs: f64,
    rhs: f64,
    gap: f64,
    nucleations: Vec<diagnostics::NucleationCandidate>,
}

/// Multiplicities at or above this value are flagged as hidden boundaries.
const HIDDEN_BOUNDARY_FLAG: f64 = 1.5;

pub fn diagnose(ctx: &Context, path_file: &Path, eps_flag: Option<f64>) -> CliResult<()> {
    let eps = resolve_eps(ctx, eps_flag, CommandKind::Diagnose)?;
    let path = container::read_path(path_file)?;
    let tube = tube_radius(ctx, eps)?;
    let out = ctx.output_dir()?;
    let grid = *path.grid();
    ctx.note(format!(
        "diagnose: {} snapshots on {} nodes",
        path.snapshot_count(),
        grid.len()
    ));

    let obs: Vec<IntervalObservables> = (0..path.intervals())
        .into_par_iter()
        .map(|m| diagnostics::interval_observables(&path, eps, m))
        .collect();
    let mid = |o: &IntervalObservables| o.t_start + 0.5 * o.dt;
    container::write_fields(
        &out.join("observables.bin"),
        &grid,
        obs.iter().flat_map(|o| {
            let t = mid(o);
            [
                (t, "state", o.state.as_slice()),
                (t, "normal_velocity", o.normal_velocity.as_slice()),
                (t, "normal_curvature", o.normal_curvature.as_slice()),
                (t, "gradient_norm", o.gradient_norm.as_slice()),
                (t, "action_density", o.action_density.as_slice()),
            ]
        }),
    )?;
    write_csv(
        &out.join("summary.csv"),
        &[
            "t [time]",
            "velocity [length/time]",
            "curvature [1/length]",
            "equipartition_residual [1]",
            "action_rate [energy]",
        ],
        obs.iter()
            .map(|o| {
                let state = ScalarField::new(grid, o.state.clone())?;
                let residual = diagnostics::equipartition_residual(&state, eps);
                let rate = ac_action::mesh::integrate_slice(&grid, &o.action_density);
                Ok(vec![
                    mid(o).to_string(),
                    cell(interface_mean(&grid, o, &o.normal_velocity)),
                    cell(interface_mean(&grid, o, &o.normal_curvature)),
                    residual.to_string(),
                    rate.to_string(),
                ])
            })
            .collect::<CliResult<Vec<_>>>()?,
    )?;

    let interfaces = track(&path, eps, tube)?;
    write_csv(
        &out.join("multiplicity.csv"),
        &[
            "t [time]",
            "loci [count]",
            "max_multiplicity [1]",
            "hidden_boundary [flag]",
            "ambiguous [flag]",
        ],
        interfaces.snapshots.iter().map(|s| {
            let max = s
                .tubes
                .iter()
                .map(|t| t.multiplicity)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
            let flagged = max.is_some_and(|m| m >= HIDDEN_BOUNDARY_FLAG);
            let ambiguous = s.tubes.iter().any(|t| t.ambiguous);
            vec![
                s.time.to_string(),
                s.loci.len().to_string(),
                cell(max),
                u8::from(flagged).to_string(),
                u8::from(ambiguous).to_string(),
            ]
        }),
    )?;
    write_json(&out.join("interface.json"), &interfaces)?;

    write_csv(
        &out.join("gap.csv"),
        &[
            "t [time]",
            "lhs_rate [energy/time]",
            "rhs_rate [energy/time]",
            "gap_rate [energy/time]",
        ],
        diagnostics::gap_rates(&path, eps).iter().map(|g| {
            vec![
                g.t.to_string(),
                g.lhs_rate.to_string(),
                g.rhs_rate.to_string(),
                g.gap_rate.to_string(),
            ]
        }),
    )?;
    let bound = diagnostics::lower_bound_gap(&path, eps);
    write_json(
        &out.join("lower_bound.json"),
        &LowerBoundReport {
            lhs: bound.lhs,
            rhs: bound.rhs,
            gap: bound.gap,
            nucleations: diagnostics::detect_nucleations(&path, eps),
        },
    )?;
    ctx.note(format!("diagnose: wrote {}", out.display()));
    Ok(())
}

/// A single evolution, or a phase evolution paired with a measure evolution.
pub enum EvolutionDoc {
    Single(ReducedEvolution),
    Pair { u: ReducedEvolution, mu: ReducedEvolution },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDoc {
    u: ReducedEvolution,
    mu: ReducedEvolution,
}

pub fn read_evolution(file: &Path) -> CliResult<EvolutionDoc> {
    let text = std::fs::read_to_string(file).map_err(|e| CliError::io(file, e))?;
    let keyed_err = |e: serde_path_to_error::Error<serde_json::Error>| {
        CliError::config(format!("{}: key `{}`: {}", file.display(), e.path(), e.inner()))
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", file.display())))?;
    if value.get("u").is_some() || value.get("mu").is_some() {
        let pair: PairDoc = serde_path_to_error::deserialize(value).map_err(keyed_err)?;
        Ok(EvolutionDoc::Pair { u: pair.u, mu: pair.mu })
    } else {
        serde_path_to_error::deserialize(value)
            .map(EvolutionDoc::Single)
            .map_err(keyed_err)
    }
}

/// Picks the 1D or circle functional from the front shapes.
pub fn reduced_breakdown(ev: &ReducedEvolution) -> CliResult<ReducedBreakdown> {
    let points = ev.fronts().iter().filter(|f| f.shape() == FrontShape::Point1d).count();
    if points == ev.fronts().len() {
        Ok(reduced::reduced_action_1d(ev)?)
    } else if points == 0 {
        Ok(reduced::reduced_action_circle(ev)?)
    } else {
        Err(CliError::config("evolution mixes point_1d and circle_2d fronts"))
    }
}

#[derive(Serialize)]
struct PairReport {
    u: ReducedBreakdown,
    mu: ReducedBreakdown,
    /// `S(u) - S(μ)`.
    difference: f64,
}

fn emit(ctx: &Context, name: &str, value: &impl Serialize) -> CliResult<()> {
    println!("{}", to_json_string(value));
    if ctx.output_dir_opt().is_some() {
        write_json(&ctx.output_dir()?.join(name), value)?;
    }
    Ok(())
}

pub fn reduced(ctx: &Context, file: &Path) -> CliResult<()> {
    if let Some(cfg) = &ctx.config {
        cfg.check_command(CommandKind::Reduced)?;
    }
    match read_evolution(file)? {
        EvolutionDoc::Single(ev) => emit(ctx, "reduced.json", &reduced_breakdown(&ev)?),
        EvolutionDoc::Pair { u, mu } => {
            let (u, mu) = (reduced_breakdown(&u)?, reduced_breakdown(&mu)?);
            emit(
                ctx,
                "reduced.json",
                &PairReport {
                    difference: u.total - mu.total,
                    u,
                    mu,
                },
            )
        }
    }
}

#[derive(Serialize)]
struct InterfaceReportRow {
    t: f64,
    loci: usize,
    multiplicities: Vec<f64>,
    /// `Σ θ · measure` over tubes.
    weighted_measure: f64,
}

#[derive(Serialize)]
struct CompareReport {
    diffuse: ActionBreakdown,
    reduced: ReducedBreakdown,
    /// `S_ε(path) - S(evolution)`.
    difference: f64,
    relative_difference: f64,
    extracted: bool,
    interfaces: Vec<InterfaceReportRow>,
}

pub fn compare(ctx: &Context, path_file: &Path, evolution: Option<&Path>, eps_flag: Option<f64>) -> CliResult<()> {
    let eps = resolve_eps(ctx, eps_flag, CommandKind::Compare)?;
    let path = container::read_path(path_file)?;
    let (ev, extracted) = match evolution {
        Some(f) => match read_evolution(f)? {
            EvolutionDoc::Single(ev) => (ev, false),
            EvolutionDoc::Pair { .. } => {
                return Err(CliError::config(format!(
                    "{}: compare needs a single evolution, not a u/mu pair",
                    f.display()
                )))
            }
        },
        None if path.grid().dim() == 1 => (diagnostics::extract_reduced_1d(&path)?, true),
        None => return Err(CliError::config("an evolution file is required for 2D paths")),
    };
    let diffuse = action(&path, eps);
    let red = reduced_breakdown(&ev)?;
    let interfaces = track(&path, eps, tube_radius(ctx, eps)?)?;
    let grid = *path.grid();
    let rows = interfaces
        .snapshots
        .iter()
        .map(|s| InterfaceReportRow {
            t: s.time,
            loci: s.loci.len(),
            multiplicities: s.tubes.iter().map(|t| t.multiplicity).collect(),
            weighted_measure: s
                .tubes
                .iter()
                .map(|t| t.multiplicity * t.loci.iter().map(|&i| s.loci[i].measure(&grid)).sum::<f64>())
                .fold(0.0, |a, b| a + b),
        })
        .collect();
    let difference = diffuse.total - red.total;
    emit(
        ctx,
        "compare.json",
        &CompareReport {
            diffuse,
            reduced: red,
            difference,
            relative_difference: difference / red.total.abs().max(f64::MIN_POSITIVE),
            extracted,
            interfaces: rows,
        },
    )
}
