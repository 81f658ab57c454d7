//! Uniform 1D/2D node grids, finite-difference operators and quadrature.
//!
//! Nodes are stored with the x index fastest: `k = i + nx * j`.
//! Neumann boundaries use mirrored ghost nodes (`u[-1] = u[1]`), which makes
//! the trapezoid-weighted Laplacian self-adjoint and gives exact discrete
//! summation by parts against [`dirichlet_form`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Boundary {
    Neumann,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    origin: [f64; 2],
    extents: [f64; 2],
    counts: [usize; 2],
    spacing: [f64; 2],
    bc: Boundary,
}

impl Grid {
    /// `origin`, `extents` and `counts` must have `dim` entries.
    pub fn new(origin: &[f64], extents: &[f64], counts: &[usize], bc: Boundary) -> Result<Self> {
        let dim = counts.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid("grid dimension must be 1 or 2"));
        }
        if origin.len() != dim || extents.len() != dim {
            return Err(Error::invalid("origin, extents and counts must have equal length"));
        }
        let mut g = Grid {
            dim,
            origin: [0.0; 2],
            extents: [0.0; 2],
            counts: [1; 2],
            spacing: [0.0; 2],
            bc,
        };
        for a in 0..dim {
            if counts[a] < 3 {
                return Err(Error::invalid("every axis needs at least 3 nodes"));
            }
            if !(extents[a].is_finite() && extents[a] > 0.0) || !origin[a].is_finite() {
                return Err(Error::invalid("grid extents must be positive and finite"));
            }
            g.origin[a] = origin[a];
            g.extents[a] = extents[a];
            g.counts[a] = counts[a];
            g.spacing[a] = match bc {
                Boundary::Neumann => extents[a] / (counts[a] - 1) as f64,
                Boundary::Periodic => extents[a] / counts[a] as f64,
            };
        }
        Ok(g)
    }

    pub fn line(origin: f64, length: f64, n: usize, bc: Boundary) -> Result<Self> {
        Self::new(&[origin], &[length], &[n], bc)
    }

    pub fn square(origin: [f64; 2], extents: [f64; 2], counts: [usize; 2], bc: Boundary) -> Result<Self> {
        Self::new(&origin, &extents, &counts, bc)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bc(&self) -> Boundary {
        self.bc
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical measure of the domain.
    pub fn volume(&self) -> f64 {
        self.extents().iter().product()
    }

    /// Axis indices of node `k`.
    #[inline]
    pub fn unravel(&self, k: usize) -> [usize; 2] {
        [k % self.counts[0], k / self.counts[0]]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.counts[0] * j
    }

    #[inline]
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing[axis]
    }

    /// Physical coordinates of node `k` (second entry is 0 in 1D).
    pub fn coords(&self, k: usize) -> [f64; 2] {
        let [i, j] = self.unravel(k);
        let y = if self.dim == 2 { self.axis_coord(1, j) } else { 0.0 };
        [self.axis_coord(0, i), y]
    }

    /// Center of the domain.
    pub fn center(&self) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (a, c) in c.iter_mut().enumerate().take(self.dim) {
            *c = match self.bc {
                Boundary::Neumann => self.origin[a] + 0.5 * self.extents[a],
                Boundary::Periodic => self.origin[a] + 0.5 * (self.extents[a] - self.spacing[a]),
            };
        }
        c
    }

    /// Index of the lower neighbor along an axis of length `n`.
    #[inline]
    fn lower(&self, i: usize, n: usize) -> usize {
        if i > 0 {
            i - 1
        } else {
            match self.bc {
                Boundary::Neumann => 1,
                Boundary::Periodic => n - 1,
            }
        }
    }

    #[inline]
    fn upper(&self, i: usize, n: usize) -> usize {
        if i + 1 < n {
            i + 1
        } else {
            match self.bc {
                Boundary::Neumann => n - 2,
                Boundary::Periodic => 0,
            }
        }
    }

    /// Calls `visit(k, [x_lo, x_hi, y_lo, y_hi])` for every node in storage
    /// order. In 1D the `y` entries are `k`.
    #[inline]
    pub(crate) fn for_each_stencil(&self, mut visit: impl FnMut(usize, [usize; 4])) {
        let nx = self.counts[0];
        let ny = if self.dim == 2 { self.counts[1] } else { 1 };
        for j in 0..ny {
            let row = nx * j;
            let (yl, yh) = if self.dim == 2 {
                (nx * self.lower(j, ny), nx * self.upper(j, ny))
            } else {
                (row, row)
            };
            for i in 0..nx {
                let (il, ih) = (self.lower(i, nx), self.upper(i, nx));
                visit(row + i, [row + il, row + ih, yl + i, yh + i]);
            }
        }
    }

    /// Neighbor node indices `(lower, upper)` of `k` along `axis`.
    #[inline]
    pub fn neighbors(&self, k: usize, axis: usize) -> (usize, usize) {
        let [i, j] = self.unravel(k);
        if axis == 0 {
            let n = self.counts[0];
            (self.index(self.lower(i, n), j), self.index(self.upper(i, n), j))
        } else {
            let n = self.counts[1];
            (self.index(i, self.lower(j, n)), self.index(i, self.upper(j, n)))
        }
    }

    fn axis_weight(&self, axis: usize, i: usize) -> f64 {
        let h = self.spacing[axis];
        match self.bc {
            Boundary::Neumann if i == 0 || i + 1 == self.counts[axis] => 0.5 * h,
            _ => h,
        }
    }

    /// Quadrature weight of node `k`: trapezoid (Neumann) or rectangle (periodic).
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        let [i, j] = self.unravel(k);
        let wx = self.axis_weight(0, i);
        if self.dim == 2 {
            wx * self.axis_weight(1, j)
        } else {
            wx
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        let nx = self.counts[0];
        let ny = if self.dim == 2 { self.counts[1] } else { 1 };
        let wx: Vec<f64> = (0..nx).map(|i| self.axis_weight(0, i)).collect();
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let wy = if self.dim == 2 { self.axis_weight(1, j) } else { 1.0 };
            out.extend(wx.iter().map(|w| w * wy));
        }
        out
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if n == self.len() {
            Ok(())
        } else {
            Err(Error::invalid("value count does not match grid node count"))
        }
    }
}

/// Node values on a [`Grid`]. All values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(ScalarField { grid, values })
    }

    /// Unchecked constructor for values produced by the crate's own operators.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every node (`y = 0` in 1D).
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.coords(k);
                f(x, y)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl core::ops::Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

/// Centered differences along `axis`, written into `out`.
pub fn gradient_axis_into(grid: &Grid, f: &[f64], axis: usize, out: &mut [f64]) {
    let inv = 0.5 / grid.spacing[axis];
    for (k, o) in out.iter_mut().enumerate() {
        let (lo, hi) = grid.neighbors(k, axis);
        *o = (f[hi] - f[lo]) * inv;
    }
}

/// Standard 3/5-point Laplacian, written into `out`.
pub fn laplacian_into(grid: &Grid, f: &[f64], out: &mut [f64]) {
    let [ix, iy] = [
        1.0 / (grid.spacing[0] * grid.spacing[0]),
        1.0 / (grid.spacing[1] * grid.spacing[1]),
    ];
    grid.for_each_stencil(|k, [xl, xh, yl, yh]| {
        let c = f[k];
        let mut acc = (f[xl] - 2.0 * c + f[xh]) * ix;
        if grid.dim == 2 {
            acc += (f[yl] - 2.0 * c + f[yh]) * iy;
        }
        out[k] = acc;
    });
}

/// Nodal squared gradient built from the two adjacent one-sided differences
/// per axis, `½((D⁺f)² + (D⁻f)²)`. Its weighted sum is the edge-based
/// Dirichlet energy, so `integrate(grad_sq(f)) = dirichlet_form(f, f)`.
pub fn grad_sq_into(grid: &Grid, f: &[f64], out: &mut [f64]) {
    let [ix, iy] = [1.0 / grid.spacing[0], 1.0 / grid.spacing[1]];
    let half_sq = |lo: f64, c: f64, hi: f64, inv: f64| {
        let dp = (hi - c) * inv;
        let dm = (c - lo) * inv;
        0.5 * (dp * dp + dm * dm)
    };
    grid.for_each_stencil(|k, [xl, xh, yl, yh]| {
        let c = f[k];
        let mut acc = half_sq(f[xl], c, f[xh], ix);
        if grid.dim == 2 {
            acc += half_sq(f[yl], c, f[yh], iy);
        }
        out[k] = acc;
    });
}

/// Weighted sum `Σ w_k f_k`.
pub fn integrate_slice(grid: &Grid, f: &[f64]) -> f64 {
    let nx = grid.counts[0];
    f.chunks_exact(nx)
        .enumerate()
        .map(|(j, row)| {
            let wy = if grid.dim == 2 { grid.axis_weight(1, j) } else { 1.0 };
            let inner: f64 = row[1..nx - 1].iter().sum::<f64>() * grid.spacing[0];
            let ends = grid.axis_weight(0, 0) * row[0] + grid.axis_weight(0, nx - 1) * row[nx - 1];
            wy * (inner + ends)
        })
        .sum()
}

/// One field per axis.
pub fn gradient(f: &ScalarField) -> Vec<ScalarField> {
    let grid = f.grid;
    (0..grid.dim)
        .map(|axis| {
            let mut out = vec![0.0; grid.len()];
            gradient_axis_into(&grid, &f.values, axis, &mut out);
            ScalarField::from_raw(grid, out)
        })
        .collect()
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    let mut out = vec![0.0; f.grid.len()];
    laplacian_into(&f.grid, &f.values, &mut out);
    ScalarField::from_raw(f.grid, out)
}

pub fn integrate(f: &ScalarField) -> f64 {
    integrate_slice(&f.grid, &f.values)
}

/// Edge-based bilinear form `Σ_k w_k Σ_axis ½(D⁺f D⁺g + D⁻f D⁻g)`.
pub fn dirichlet_form(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::invalid("fields live on different grids"));
    }
    let grid = &f.grid;
    let (a, b) = (&f.values, &g.values);
    let mut total = 0.0;
    for k in 0..grid.len() {
        let mut acc = 0.0;
        for axis in 0..grid.dim {
            let (lo, hi) = grid.neighbors(k, axis);
            let h2 = grid.spacing[axis] * grid.spacing[axis];
            acc += 0.5 * ((a[hi] - a[k]) * (b[hi] - b[k]) + (a[k] - a[lo]) * (b[k] - b[lo])) / h2;
        }
        total += grid.weight(k) * acc;
    }
    Ok(total)
}
