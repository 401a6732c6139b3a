//! Box-domain discretization, discrete fields and the second-order
//! difference operators every other module is built on.
//!
//! Cells are stored row-major with the first axis fastest. Two velocity
//! layouts are supported:
//!
//! * collocated: every component lives at cell centres,
//! * staggered (MAC): component `j` lives on the face between cell `c` and
//!   its forward neighbour along axis `j`, i.e. face index `c` sits at
//!   `center(c) + h_j/2 e_j`.
//!
//! On walls the last face along each axis is the boundary face; it carries
//! no degree of freedom and is treated as zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcMode {
    /// No-slip velocity, homogeneous Neumann director, no-flux heat.
    Walls,
    Periodic,
}

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dims: usize,
    extent: [f64; 3],
    resolution: [usize; 3],
    spacing: [f64; 3],
    bc: BcMode,
    staggered: bool,
}

/// Builds a grid; `extent` and `resolution` must have the same length (2 or 3).
pub fn build_grid(
    extent: &[f64],
    resolution: &[usize],
    bc_mode: BcMode,
    staggering: bool,
) -> Result<Grid> {
    Grid::new(extent, resolution, bc_mode, staggering)
}

impl Grid {
    pub fn new(extent: &[f64], resolution: &[usize], bc: BcMode, staggered: bool) -> Result<Self> {
        let dims = extent.len();
        if !(2..=3).contains(&dims) {
            return Err(Error::InvalidGrid(format!("dims must be 2 or 3, got {dims}")));
        }
        if resolution.len() != dims {
            return Err(Error::InvalidGrid(format!(
                "extent has {dims} axes but resolution has {}",
                resolution.len()
            )));
        }
        let mut ext = [1.0; 3];
        let mut res = [1usize; 3];
        let mut h = [1.0; 3];
        for a in 0..dims {
            if !(extent[a] > 0.0 && extent[a].is_finite()) {
                return Err(Error::InvalidGrid(format!("extent[{a}] = {} must be positive", extent[a])));
            }
            if resolution[a] < 4 {
                return Err(Error::InvalidGrid(format!(
                    "resolution[{a}] = {} is below the minimum of 4",
                    resolution[a]
                )));
            }
            ext[a] = extent[a];
            res[a] = resolution[a];
            h[a] = extent[a] / resolution[a] as f64;
        }
        Ok(Grid {
            dims,
            extent: ext,
            resolution: res,
            spacing: h,
            bc,
            staggered,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }
    pub fn extent(&self) -> &[f64] {
        &self.extent[..self.dims]
    }
    pub fn resolution(&self) -> &[usize] {
        &self.resolution[..self.dims]
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dims]
    }
    pub fn bc_mode(&self) -> BcMode {
        self.bc
    }
    pub fn is_periodic(&self) -> bool {
        self.bc == BcMode::Periodic
    }
    pub fn staggered(&self) -> bool {
        self.staggered
    }

    /// Same geometry with a different velocity layout flag.
    pub fn with_staggering(&self, staggered: bool) -> Grid {
        Grid { staggered, ..*self }
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dims].iter().product()
    }
    pub fn volume(&self) -> f64 {
        self.extent[..self.dims].iter().product()
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.resolution[0] * (c[1] + self.resolution[1] * c[2])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n0 = self.resolution[0];
        let n1 = self.resolution[1];
        [idx % n0, (idx / n0) % n1, idx / (n0 * n1)]
    }

    /// Cell centre, `(i + 1/2) h` per axis (third coordinate 0 in 2D).
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dims {
            x[a] = (c[a] as f64 + 0.5) * self.spacing[a];
        }
        x
    }

    /// Centre of the forward face of cell `idx` along `axis`.
    pub fn face_center(&self, axis: usize, idx: usize) -> [f64; 3] {
        let mut x = self.center(idx);
        x[axis] += 0.5 * self.spacing[axis];
        x
    }

    /// Whether the forward face of `idx` along `axis` is a wall face.
    #[inline]
    pub fn is_wall_face(&self, axis: usize, idx: usize) -> bool {
        self.bc == BcMode::Walls && self.coords(idx)[axis] + 1 == self.resolution[axis]
    }

    /// Neighbouring cell along `axis`; `None` when it lies outside a walled box.
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut c = self.coords(idx);
        let n = self.resolution[axis];
        if forward {
            if c[axis] + 1 == n {
                match self.bc {
                    BcMode::Walls => return None,
                    BcMode::Periodic => c[axis] = 0,
                }
            } else {
                c[axis] += 1;
            }
        } else if c[axis] == 0 {
            match self.bc {
                BcMode::Walls => return None,
                BcMode::Periodic => c[axis] = n - 1,
            }
        } else {
            c[axis] -= 1;
        }
        Some(self.index(c))
    }

    /// Neighbour table for fast stencil loops.
    pub fn neighbors(&self) -> Neighbors {
        let n = self.len();
        let mut fwd = vec![vec![NONE; n]; self.dims];
        let mut bwd = vec![vec![NONE; n]; self.dims];
        for a in 0..self.dims {
            for c in 0..n {
                fwd[a][c] = self.neighbor(c, a, true).unwrap_or(NONE);
                bwd[a][c] = self.neighbor(c, a, false).unwrap_or(NONE);
            }
        }
        Neighbors { fwd, bwd }
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::FieldMismatch("fields live on different grids".into()));
        }
        Ok(())
    }
}

/// Precomputed neighbour indices.
#[derive(Clone, Debug)]
pub struct Neighbors {
    fwd: Vec<Vec<usize>>,
    bwd: Vec<Vec<usize>>,
}

impl Neighbors {
    #[inline]
    pub fn fwd(&self, axis: usize, idx: usize) -> Option<usize> {
        let v = self.fwd[axis][idx];
        (v != NONE).then_some(v)
    }
    #[inline]
    pub fn bwd(&self, axis: usize, idx: usize) -> Option<usize> {
        let v = self.bwd[axis][idx];
        (v != NONE).then_some(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        ScalarField {
            grid: *grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::FieldMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField { grid: *grid, values })
    }

    /// Samples `f` at cell centres.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|c| f(grid.center(c))).collect();
        ScalarField { grid: *grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
    staggered: bool,
}

impl VectorField {
    pub fn zeros(grid: &Grid, staggered: bool) -> Self {
        VectorField {
            grid: *grid,
            comps: vec![vec![0.0; grid.len()]; grid.dims()],
            staggered,
        }
    }

    pub fn from_components(grid: &Grid, comps: Vec<Vec<f64>>, staggered: bool) -> Result<Self> {
        if comps.len() != grid.dims() {
            return Err(Error::FieldMismatch(format!(
                "vector field needs {} components, got {}",
                grid.dims(),
                comps.len()
            )));
        }
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::FieldMismatch("component length differs from cell count".into()));
        }
        Ok(VectorField {
            grid: *grid,
            comps,
            staggered,
        })
    }

    /// Samples `f` at cell centres, or at face centres when `staggered`.
    /// Normal components on wall faces are pinned to zero.
    pub fn from_fn(grid: &Grid, staggered: bool, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut v = VectorField::zeros(grid, staggered);
        for a in 0..grid.dims() {
            for c in 0..grid.len() {
                v.comps[a][c] = if staggered {
                    if grid.is_wall_face(a, c) {
                        0.0
                    } else {
                        f(grid.face_center(a, c))[a]
                    }
                } else {
                    f(grid.center(c))[a]
                };
            }
        }
        v
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn staggered(&self) -> bool {
        self.staggered
    }
    pub fn dims(&self) -> usize {
        self.comps.len()
    }
    pub fn comp(&self, a: usize) -> &[f64] {
        &self.comps[a]
    }
    pub fn comp_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.comps[a]
    }
    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &VectorField) -> VectorField {
        let mut out = self.clone();
        for (a, comp) in out.comps.iter_mut().enumerate() {
            for (x, y) in comp.iter_mut().zip(&other.comps[a]) {
                *x += s * y;
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> VectorField {
        let mut out = self.clone();
        out.comps.iter_mut().flatten().for_each(|x| *x *= s);
        out
    }

    /// Cell-centred average of a staggered field (identity when collocated).
    pub fn to_cell_centers(&self) -> VectorField {
        if !self.staggered {
            return self.clone();
        }
        let g = self.grid;
        let mut out = VectorField::zeros(&g, false);
        for a in 0..g.dims() {
            for c in 0..g.len() {
                let right = face_value(&g, &self.comps[a], a, c);
                let left = g.neighbor(c, a, false).map_or(0.0, |b| face_value(&g, &self.comps[a], a, b));
                out.comps[a][c] = 0.5 * (left + right);
            }
        }
        out
    }

    /// Pointwise `|v|^2` at cell centres. For staggered fields the square of
    /// each face value is split evenly between the two adjacent cells so the
    /// integral equals `<v, v>` exactly.
    pub fn cell_norm_sq(&self) -> ScalarField {
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        for a in 0..g.dims() {
            let comp = &self.comps[a];
            for c in 0..g.len() {
                if self.staggered {
                    let r = face_value(&g, comp, a, c);
                    let l = g.neighbor(c, a, false).map_or(0.0, |b| face_value(&g, comp, a, b));
                    out[c] += 0.5 * (r * r + l * l);
                } else {
                    out[c] += comp[c] * comp[c];
                }
            }
        }
        ScalarField { grid: g, values: out }
    }
}

#[inline]
pub(crate) fn face_value(g: &Grid, comp: &[f64], axis: usize, idx: usize) -> f64 {
    if g.is_wall_face(axis, idx) {
        0.0
    } else {
        comp[idx]
    }
}

/// The director always has three components, whatever the grid dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectorField {
    grid: Grid,
    comps: [Vec<f64>; 3],
}

impl DirectorField {
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let n = grid.len();
        let mut comps = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for c in 0..n {
            let v = f(grid.center(c));
            for k in 0..3 {
                comps[k][c] = v[k];
            }
        }
        DirectorField { grid: *grid, comps }
    }

    pub fn constant(grid: &Grid, d: [f64; 3]) -> Self {
        Self::from_fn(grid, |_| d)
    }

    pub fn from_components(grid: &Grid, comps: [Vec<f64>; 3]) -> Result<Self> {
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::FieldMismatch("director component length differs from cell count".into()));
        }
        Ok(DirectorField { grid: *grid, comps })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn comp(&self, k: usize) -> &[f64] {
        &self.comps[k]
    }
    pub fn comp_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.comps[k]
    }
    pub fn components(&self) -> &[Vec<f64>; 3] {
        &self.comps
    }

    #[inline]
    pub fn at(&self, c: usize) -> [f64; 3] {
        [self.comps[0][c], self.comps[1][c], self.comps[2][c]]
    }

    #[inline]
    pub fn set(&mut self, c: usize, d: [f64; 3]) {
        for k in 0..3 {
            self.comps[k][c] = d[k];
        }
    }

    pub fn norm(&self) -> ScalarField {
        let values = (0..self.grid.len()).map(|c| norm3(self.at(c))).collect();
        ScalarField { grid: self.grid, values }
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len()).map(|c| norm3(self.at(c))).fold(0.0, f64::max)
    }

    pub fn min_third(&self) -> f64 {
        self.comps[2].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &DirectorField) -> f64 {
        (0..3)
            .flat_map(|k| self.comps[k].iter().zip(&other.comps[k]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

#[inline]
pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Cell-centred rank-2 field; entry `(i, k)` is stored at `comps[i * cols + k]`.
/// For director gradients `(i, k) = d_i d^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    grid: Grid,
    rows: usize,
    cols: usize,
    comps: Vec<Vec<f64>>,
}

impl TensorField {
    pub fn zeros(grid: &Grid, rows: usize, cols: usize) -> Self {
        TensorField {
            grid: *grid,
            rows,
            cols,
            comps: vec![vec![0.0; grid.len()]; rows * cols],
        }
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn entry(&self, i: usize, k: usize) -> &[f64] {
        &self.comps[i * self.cols + k]
    }
    pub fn entry_mut(&mut self, i: usize, k: usize) -> &mut [f64] {
        &mut self.comps[i * self.cols + k]
    }
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Any field the difference operators accept or return.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
    Director(DirectorField),
    Tensor(TensorField),
}

impl Field {
    fn rank_name(&self) -> &'static str {
        match self {
            Field::Scalar(_) => "scalar",
            Field::Vector(_) => "vector",
            Field::Director(_) => "director",
            Field::Tensor(_) => "tensor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffKind {
    Gradient,
    Divergence,
    Laplacian,
    DirectorGradientTensor,
}

/// Dispatching front end over the individual operators.
pub fn diff_op(kind: DiffKind, field: &Field) -> Result<Field> {
    let mismatch = |op| Error::RankMismatch {
        op,
        rank: field.rank_name(),
    };
    match (kind, field) {
        (DiffKind::Gradient, Field::Scalar(s)) => Ok(Field::Vector(gradient(s))),
        (DiffKind::Gradient, Field::Director(d)) => Ok(Field::Tensor(director_gradient(d))),
        (DiffKind::Gradient, _) => Err(mismatch("gradient")),
        (DiffKind::Divergence, Field::Vector(v)) => Ok(Field::Scalar(divergence(v))),
        (DiffKind::Divergence, _) => Err(mismatch("divergence")),
        (DiffKind::Laplacian, Field::Scalar(s)) => Ok(Field::Scalar(laplacian(s))),
        (DiffKind::Laplacian, Field::Director(d)) => Ok(Field::Director(director_laplacian(d))),
        (DiffKind::Laplacian, _) => Err(mismatch("laplacian")),
        (DiffKind::DirectorGradientTensor, Field::Director(d)) => Ok(Field::Tensor(director_gradient(d))),
        (DiffKind::DirectorGradientTensor, _) => Err(mismatch("director gradient")),
    }
}

/// Gradient of a cell-centred scalar. On a staggered grid this is the
/// forward difference onto faces (zero on wall faces); on a collocated grid
/// the central difference with even reflection at walls.
pub fn gradient(s: &ScalarField) -> VectorField {
    let g = s.grid;
    if g.staggered {
        staggered_gradient(s)
    } else {
        central_gradient(s)
    }
}

pub fn staggered_gradient(s: &ScalarField) -> VectorField {
    let g = s.grid;
    let mut out = VectorField::zeros(&g, true);
    for a in 0..g.dims {
        let h = g.spacing[a];
        for c in 0..g.len() {
            out.comps[a][c] = match g.neighbor(c, a, true) {
                Some(f) => (s.values[f] - s.values[c]) / h,
                None => 0.0,
            };
        }
    }
    out
}

pub fn central_gradient(s: &ScalarField) -> VectorField {
    let g = s.grid;
    let mut out = VectorField::zeros(&g, false);
    for a in 0..g.dims {
        let h = g.spacing[a];
        for c in 0..g.len() {
            let f = g.neighbor(c, a, true).map_or(s.values[c], |i| s.values[i]);
            let b = g.neighbor(c, a, false).map_or(s.values[c], |i| s.values[i]);
            out.comps[a][c] = (f - b) / (2.0 * h);
        }
    }
    out
}

/// Divergence to cell centres. Staggered fields use the backward difference
/// of face values; collocated fields use central differences with odd
/// (no-slip) reflection at walls.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let mut out = vec![0.0; g.len()];
    for a in 0..g.dims {
        let h = g.spacing[a];
        let comp = &v.comps[a];
        for c in 0..g.len() {
            out[c] += if v.staggered {
                let r = face_value(&g, comp, a, c);
                let l = g.neighbor(c, a, false).map_or(0.0, |b| face_value(&g, comp, a, b));
                (r - l) / h
            } else {
                let f = g.neighbor(c, a, true).map_or(-comp[c], |i| comp[i]);
                let b = g.neighbor(c, a, false).map_or(-comp[c], |i| comp[i]);
                (f - b) / (2.0 * h)
            };
        }
    }
    ScalarField { grid: g, values: out }
}

/// Compact `2 dims + 1` point Laplacian with homogeneous Neumann closure at walls.
pub fn laplacian(s: &ScalarField) -> ScalarField {
    let g = s.grid;
    ScalarField {
        grid: g,
        values: laplacian_values(&g, &s.values),
    }
}

pub(crate) fn laplacian_values(g: &Grid, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    for a in 0..g.dims {
        let ih2 = 1.0 / (g.spacing[a] * g.spacing[a]);
        for c in 0..g.len() {
            let f = g.neighbor(c, a, true).map_or(v[c], |i| v[i]);
            let b = g.neighbor(c, a, false).map_or(v[c], |i| v[i]);
            out[c] += (f - 2.0 * v[c] + b) * ih2;
        }
    }
    out
}

pub fn director_laplacian(d: &DirectorField) -> DirectorField {
    let g = d.grid;
    DirectorField {
        grid: g,
        comps: [
            laplacian_values(&g, &d.comps[0]),
            laplacian_values(&g, &d.comps[1]),
            laplacian_values(&g, &d.comps[2]),
        ],
    }
}

/// `d_i d^k` at cell centres by central differences (even reflection at walls).
pub fn director_gradient(d: &DirectorField) -> TensorField {
    let g = d.grid;
    let mut out = TensorField::zeros(&g, g.dims, 3);
    for a in 0..g.dims {
        let h = g.spacing[a];
        for k in 0..3 {
            let comp = &d.comps[k];
            let dst = out.entry_mut(a, k);
            for c in 0..g.len() {
                let f = g.neighbor(c, a, true).map_or(comp[c], |i| comp[i]);
                let b = g.neighbor(c, a, false).map_or(comp[c], |i| comp[i]);
                dst[c] = (f - b) / (2.0 * h);
            }
        }
    }
    out
}

/// `|grad d|^2` at cell centres from face differences, each face's squared
/// difference split evenly between its two cells. Summed against the cell
/// volume this is exactly the Dirichlet energy whose variation is the
/// compact Laplacian.
pub fn director_grad_sq(d: &DirectorField) -> ScalarField {
    let g = d.grid;
    let mut out = vec![0.0; g.len()];
    for a in 0..g.dims {
        let ih = 1.0 / g.spacing[a];
        for k in 0..3 {
            let comp = &d.comps[k];
            for c in 0..g.len() {
                if let Some(f) = g.neighbor(c, a, true) {
                    let q = (comp[f] - comp[c]) * ih;
                    out[c] += 0.5 * q * q;
                    out[f] += 0.5 * q * q;
                }
            }
        }
    }
    ScalarField { grid: g, values: out }
}

/// Midpoint quadrature.
pub fn integrate(s: &ScalarField) -> f64 {
    s.values.iter().sum::<f64>() * s.grid.cell_volume()
}

/// Discrete L2 pairing; both operands must share grid, rank and layout.
pub fn inner_product(a: &Field, b: &Field) -> Result<f64> {
    match (a, b) {
        (Field::Scalar(x), Field::Scalar(y)) => scalar_inner(x, y),
        (Field::Vector(x), Field::Vector(y)) => vector_inner(x, y),
        (Field::Director(x), Field::Director(y)) => {
            x.grid.check_same(&y.grid)?;
            let s: f64 = (0..3)
                .map(|k| x.comps[k].iter().zip(&y.comps[k]).map(|(p, q)| p * q).sum::<f64>())
                .sum();
            Ok(s * x.grid.cell_volume())
        }
        _ => Err(Error::FieldMismatch(format!(
            "cannot pair a {} field with a {} field",
            a.rank_name(),
            b.rank_name()
        ))),
    }
}

pub fn scalar_inner(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum::<f64>() * a.grid.cell_volume())
}

pub fn vector_inner(a: &VectorField, b: &VectorField) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    if a.staggered != b.staggered {
        return Err(Error::FieldMismatch("staggered and collocated fields cannot be paired".into()));
    }
    let mut s = 0.0;
    for k in 0..a.comps.len() {
        for c in 0..a.grid.len() {
            if a.staggered && a.grid.is_wall_face(k, c) {
                continue;
            }
            s += a.comps[k][c] * b.comps[k][c];
        }
    }
    Ok(s * a.grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn periodic2(n: usize, staggered: bool) -> Grid {
        Grid::new(&[2.0 * PI, 2.0 * PI], &[n, n], BcMode::Periodic, staggered).unwrap()
    }

    #[test]
    fn spacing_is_extent_over_resolution() {
        let g = build_grid(&[1.0, 1.0], &[8, 8], BcMode::Walls, true).unwrap();
        assert_eq!(g.spacing(), &[0.125, 0.125]);
        let g = periodic2(16, false);
        assert!((g.spacing()[0] - PI / 8.0).abs() < 1e-15);
        assert!((g.spacing()[1] - PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(build_grid(&[1.0, 1.0], &[2, 2], BcMode::Walls, true).is_err());
        assert!(build_grid(&[1.0], &[8], BcMode::Walls, true).is_err());
        assert!(build_grid(&[1.0; 4], &[8; 4], BcMode::Walls, true).is_err());
        assert!(build_grid(&[1.0, -1.0], &[8, 8], BcMode::Walls, true).is_err());
    }

    #[test]
    fn cell_centres_are_offset_by_half_a_cell() {
        let g = build_grid(&[1.0, 2.0], &[4, 8], BcMode::Walls, true).unwrap();
        let x = g.center(g.index([1, 3, 0]));
        assert!((x[0] - 0.375).abs() < 1e-15);
        assert!((x[1] - 0.875).abs() < 1e-15);
    }

    #[test]
    fn linear_field_has_zero_interior_laplacian() {
        let g = build_grid(&[1.0, 1.0], &[8, 8], BcMode::Walls, false).unwrap();
        let t = ScalarField::from_fn(&g, |x| 3.0 * x[0] + 2.0 * x[1]);
        let l = laplacian(&t);
        for c in 0..g.len() {
            let [i, j, _] = g.coords(c);
            if i > 0 && j > 0 && i < 7 && j < 7 {
                assert!(l.values()[c].abs() < 1e-11);
            }
        }
    }

    #[test]
    fn rotation_is_divergence_free() {
        for staggered in [false, true] {
            let g = periodic2(16, staggered);
            let u = VectorField::from_fn(&g, staggered, |x| [x[1], -x[0], 0.0]);
            assert!(divergence(&u).max_abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_sine_converges_at_second_order() {
        let err = |n: usize, staggered: bool| {
            let g = periodic2(n, staggered);
            let s = ScalarField::from_fn(&g, |x| x[0].sin());
            let gr = gradient(&s);
            (0..g.len())
                .map(|c| {
                    let x = if staggered { g.face_center(0, c) } else { g.center(c) };
                    (gr.comp(0)[c] - x[0].cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        for staggered in [false, true] {
            let ratio = err(16, staggered) / err(32, staggered);
            assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn divergence_of_gradient_is_the_laplacian_on_staggered_grids() {
        for bc in [BcMode::Periodic, BcMode::Walls] {
            let g = Grid::new(&[1.0, 2.0, 1.5], &[6, 5, 4], bc, true).unwrap();
            let s = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin() * x[1] * x[1] + x[2].cos());
            let a = divergence(&gradient(&s));
            let b = laplacian(&s);
            for c in 0..g.len() {
                assert!((a.values()[c] - b.values()[c]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quadrature_values() {
        let g = build_grid(&[1.0, 1.0], &[8, 8], BcMode::Walls, true).unwrap();
        assert!((integrate(&ScalarField::constant(&g, 1.0)) - 1.0).abs() < 1e-14);
        let g = build_grid(&[2.0, 3.0], &[8, 8], BcMode::Walls, true).unwrap();
        assert!((integrate(&ScalarField::constant(&g, 1.0)) - 6.0).abs() < 1e-13);
        for n in [8, 12, 32] {
            let g = build_grid(&[2.0 * PI, 1.0], &[n, 4], BcMode::Periodic, true).unwrap();
            let s = ScalarField::from_fn(&g, |x| x[0].sin().powi(2));
            assert!((integrate(&s) - PI).abs() < 1e-13);
        }
    }

    #[test]
    fn inner_products() {
        let g = build_grid(&[1.0, 1.0], &[8, 8], BcMode::Walls, false).unwrap();
        let one = Field::Scalar(ScalarField::constant(&g, 1.0));
        assert!((inner_product(&one, &one).unwrap() - 1.0).abs() < 1e-14);

        let gp = build_grid(&[2.0 * PI, 1.0], &[16, 4], BcMode::Periodic, false).unwrap();
        let s = Field::Scalar(ScalarField::from_fn(&gp, |x| x[0].sin()));
        let c = Field::Scalar(ScalarField::from_fn(&gp, |x| x[0].cos()));
        assert!(inner_product(&s, &c).unwrap().abs() < 1e-14);

        // midpoint rule for x^2 + y^2 on the unit square: 2/3 - h^2/6
        let u = Field::Vector(VectorField::from_fn(&g, false, |x| [x[1], -x[0], 0.0]));
        let uu = inner_product(&u, &u).unwrap();
        let h = 0.125;
        assert!((uu - (2.0 / 3.0 - h * h / 6.0)).abs() < 1e-13);
        assert!((uu - 2.0 / 3.0).abs() < 3e-3);
    }

    #[test]
    fn mismatched_operands_are_rejected() {
        let g = build_grid(&[1.0, 1.0], &[8, 8], BcMode::Walls, false).unwrap();
        let g2 = build_grid(&[1.0, 1.0], &[16, 16], BcMode::Walls, false).unwrap();
        let a = Field::Scalar(ScalarField::constant(&g, 1.0));
        let b = Field::Scalar(ScalarField::constant(&g2, 1.0));
        assert!(inner_product(&a, &b).is_err());
        assert!(diff_op(DiffKind::Divergence, &a).is_err());
        let v = Field::Vector(VectorField::zeros(&g, false));
        assert!(diff_op(DiffKind::Laplacian, &v).is_err());
        assert!(inner_product(&a, &v).is_err());
    }

    #[test]
    fn summation_by_parts_on_walls() {
        let g = Grid::new(&[1.0, 1.3], &[7, 9], BcMode::Walls, true).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * x[0]).cos() + x[1] * x[0]);
        let v = VectorField::from_fn(&g, true, |x| [x[1].sin() + x[0], x[0] * x[0], 0.0]);
        let lhs = vector_inner(&gradient(&f), &v).unwrap();
        let rhs = scalar_inner(&f, &divergence(&v)).unwrap();
        assert!((lhs + rhs).abs() < 1e-12);
    }

    #[test]
    fn staggered_norm_density_integrates_to_inner_product() {
        let g = Grid::new(&[1.0, 1.0], &[8, 8], BcMode::Walls, true).unwrap();
        let v = VectorField::from_fn(&g, true, |x| [x[1].sin(), x[0] * x[1], 0.0]);
        let a = integrate(&v.cell_norm_sq());
        let b = vector_inner(&v, &v).unwrap();
        assert!((a - b).abs() < 1e-14);
    }
}
