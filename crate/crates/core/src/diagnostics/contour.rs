//! Zero level sets: linear-interpolated crossings in 1D and marching
//! squares in 2D.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::mesh::{Boundary, Grid};

/// A polygonal curve through the zero level set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Polyline {
    pub vertices: Vec<[f64; 2]>,
    /// True when the last vertex connects back to the first.
    pub closed: bool,
}

/// Displacement `b - a`, using the nearest periodic image on periodic grids.
pub(crate) fn displacement(grid: &Grid, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let mut d = [b[0] - a[0], b[1] - a[1]];
    if grid.bc() == Boundary::Periodic {
        for (axis, d) in d.iter_mut().enumerate().take(grid.dim()) {
            let period = grid.extents()[axis];
            *d -= period * libm::round(*d / period);
        }
    }
    d
}

impl Polyline {
    /// Arc length; periodic grids use the nearest image for each edge.
    pub fn length(&self, grid: &Grid) -> f64 {
        self.edges().map(|(a, b)| norm(displacement(grid, a, b))).sum()
    }

    /// Signed area enclosed by a closed curve (shoelace formula on the
    /// unwrapped vertices); zero for open curves.
    pub fn enclosed_area(&self, grid: &Grid) -> f64 {
        if !self.closed || self.vertices.is_empty() {
            return 0.0;
        }
        let mut p = self.vertices[0];
        let mut area = 0.0;
        for (a, b) in self.edges() {
            let d = displacement(grid, a, b);
            let q = [p[0] + d[0], p[1] + d[1]];
            area += p[0] * q[1] - q[0] * p[1];
            p = q;
        }
        0.5 * area
    }

    fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        let count = if self.closed { n } else { n.saturating_sub(1) };
        (0..count).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

#[inline]
pub(crate) fn norm(d: [f64; 2]) -> f64 {
    libm::sqrt(d[0] * d[0] + d[1] * d[1])
}

/// Zero crossings of a 1D field, by linear interpolation between nodes.
/// A node that is exactly zero counts once.
pub fn crossings_1d(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let n = grid.counts()[0];
    let h = grid.spacing()[0];
    let cells = match grid.bc() {
        Boundary::Neumann => n - 1,
        Boundary::Periodic => n,
    };
    let mut out = Vec::new();
    for i in 0..cells {
        let (a, b) = (u[i], u[(i + 1) % n]);
        let x = grid.axis_coord(0, i);
        if a == 0.0 {
            out.push(x);
        } else if a * b < 0.0 {
            out.push(x + h * a / (a - b));
        }
    }
    if grid.bc() == Boundary::Neumann && u[n - 1] == 0.0 {
        out.push(grid.axis_coord(0, n - 1));
    }
    out
}

/// Marching squares on a 2D field. Saddle cells are resolved with the cell
/// average. Periodic grids include the cells that wrap around.
pub fn contour_2d(grid: &Grid, u: &[f64]) -> Vec<Polyline> {
    let [nx, ny] = [grid.counts()[0], grid.counts()[1]];
    let periodic = grid.bc() == Boundary::Periodic;
    let (cx, cy) = if periodic { (nx, ny) } else { (nx - 1, ny - 1) };
    let [hx, hy] = [grid.spacing()[0], grid.spacing()[1]];
    let node = |i: usize, j: usize| (i % nx) + nx * (j % ny);
    // edge ids: 2k for the x-edge from node k, 2k+1 for the y-edge
    let xedge = |i: usize, j: usize| 2 * node(i, j);
    let yedge = |i: usize, j: usize| 2 * node(i, j) + 1;
    let inside = |v: f64| v > 0.0;

    let mut points: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
    let mut segments: Vec<[usize; 2]> = Vec::new();
    for j in 0..cy {
        for i in 0..cx {
            let v = [
                u[node(i, j)],
                u[node(i + 1, j)],
                u[node(i + 1, j + 1)],
                u[node(i, j + 1)],
            ];
            let case = (inside(v[0]) as u8)
                | (inside(v[1]) as u8) << 1
                | (inside(v[2]) as u8) << 2
                | (inside(v[3]) as u8) << 3;
            if case == 0 || case == 15 {
                continue;
            }
            let (x0, y0) = (grid.axis_coord(0, i), grid.axis_coord(1, j));
            let frac = |a: f64, b: f64| a / (a - b);
            // bottom, right, top, left
            let ids = [xedge(i, j), yedge(i + 1, j), xedge(i, j + 1), yedge(i, j)];
            let mut put = |e: usize| {
                let id = ids[e];
                points.entry(id).or_insert_with(|| match e {
                    0 => [x0 + hx * frac(v[0], v[1]), y0],
                    1 => [x0 + hx, y0 + hy * frac(v[1], v[2])],
                    2 => [x0 + hx * frac(v[3], v[2]), y0 + hy],
                    _ => [x0, y0 + hy * frac(v[0], v[3])],
                });
                id
            };
            let center_inside = inside(0.25 * (v[0] + v[1] + v[2] + v[3]));
            let pairs: &[[usize; 2]] = match case {
                1 | 14 => &[[3, 0]],
                2 | 13 => &[[0, 1]],
                3 | 12 => &[[3, 1]],
                4 | 11 => &[[1, 2]],
                6 | 9 => &[[0, 2]],
                7 | 8 => &[[3, 2]],
                5 if center_inside => &[[3, 2], [0, 1]],
                5 => &[[3, 0], [1, 2]],
                10 if center_inside => &[[3, 0], [1, 2]],
                _ => &[[3, 2], [0, 1]],
            };
            for &[a, b] in pairs {
                segments.push([put(a), put(b)]);
            }
        }
    }
    stitch(&points, &segments)
}

fn stitch(points: &BTreeMap<usize, [f64; 2]>, segments: &[[usize; 2]]) -> Vec<Polyline> {
    let mut at: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (s, seg) in segments.iter().enumerate() {
        for &e in seg {
            at.entry(e).or_default().push(s);
        }
    }
    let mut used = vec![false; segments.len()];
    let other = |s: usize, e: usize| {
        if segments[s][0] == e {
            segments[s][1]
        } else {
            segments[s][0]
        }
    };
    let next_unused = |e: usize, used: &[bool]| at[&e].iter().copied().find(|&s| !used[s]);
    let mut out = Vec::new();
    // open chains first, starting from their ends, then the remaining loops
    let ends: Vec<usize> = at.iter().filter(|(_, v)| v.len() == 1).map(|(&e, _)| e).collect();
    let starts = ends.into_iter().chain(segments.iter().map(|s| s[0]));
    for start in starts {
        let Some(first) = next_unused(start, &used) else {
            continue;
        };
        let mut chain = vec![start];
        let mut e = start;
        let mut s = first;
        loop {
            used[s] = true;
            e = other(s, e);
            if e == start {
                break;
            }
            chain.push(e);
            match next_unused(e, &used) {
                Some(n) => s = n,
                None => break,
            }
        }
        let closed = e == start;
        out.push(Polyline {
            vertices: chain.iter().map(|id| points[id]).collect(),
            closed,
        });
    }
    out
}
