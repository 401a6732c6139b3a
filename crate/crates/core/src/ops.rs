//! Staggered-grid operators shared by the solvers, the Galerkin module and
//! the audits: viscous diffusion, convection, the elastic force and its
//! adjoint, the director transport.
//!
//! All of them are written so that the discrete analogues of the
//! integration-by-parts identities behind the energy balance hold exactly:
//!
//! * `<u, V(mu) u> = -integral(viscous_density(u))`,
//! * `<v, C(w) v> = 0` whenever `w` is discretely divergence free,
//! * `<w, elastic_force(d, m)> = -<transport(w) d, m>`.

use crate::grid::{DirectorField, Grid, ScalarField, VectorField};

pub(crate) const NONE: usize = usize::MAX;

/// Flat neighbour and wall tables for hot loops.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub grid: Grid,
    pub n: usize,
    pub dims: usize,
    pub h: [f64; 3],
    pub fwd: [Vec<usize>; 3],
    pub bwd: [Vec<usize>; 3],
    /// `wall[a][c]`: the forward face of `c` along `a` is a wall face.
    pub wall: [Vec<bool>; 3],
}

impl Stencil {
    pub fn new(grid: &Grid) -> Stencil {
        let n = grid.len();
        let dims = grid.dims();
        let mut fwd = [vec![NONE; n], vec![NONE; n], vec![NONE; n]];
        let mut bwd = [vec![NONE; n], vec![NONE; n], vec![NONE; n]];
        let mut wall = [vec![false; n], vec![false; n], vec![false; n]];
        for a in 0..dims {
            for c in 0..n {
                fwd[a][c] = grid.neighbor(c, a, true).unwrap_or(NONE);
                bwd[a][c] = grid.neighbor(c, a, false).unwrap_or(NONE);
                wall[a][c] = grid.is_wall_face(a, c);
            }
        }
        let mut h = [1.0; 3];
        h[..dims].copy_from_slice(grid.spacing());
        Stencil {
            grid: *grid,
            n,
            dims,
            h,
            fwd,
            bwd,
            wall,
        }
    }

    /// Face value of a staggered component, zero on wall faces and for a
    /// missing (outside) face index.
    #[inline]
    pub fn face(&self, comp: &[f64], a: usize, c: usize) -> f64 {
        if c == NONE || self.wall[a][c] {
            0.0
        } else {
            comp[c]
        }
    }

    /// Backward face of cell `c` along `a` (the forward face of its backward
    /// neighbour), or zero at a wall.
    #[inline]
    pub fn face_bwd(&self, comp: &[f64], a: usize, c: usize) -> f64 {
        self.face(comp, a, self.bwd[a][c])
    }

    /// Whether face `(a, c)` carries a degree of freedom.
    #[inline]
    pub fn is_dof(&self, a: usize, c: usize) -> bool {
        !self.wall[a][c]
    }
}

/// Implicit viscous operator `V(mu) u = div(mu grad u)` acting on each
/// staggered component separately, with no-slip closure on walls.
#[derive(Clone, Debug)]
pub struct ViscousOp {
    st: Stencil,
    mu_cell: Vec<f64>,
    /// `mu_edge[j][l][c]`: viscosity on the edge between face `(j, c)` and
    /// face `(j, fwd_l c)`, or on the wall edge above `c` when `fwd_l c` is
    /// outside. Only meaningful for `l != j`.
    mu_edge: [[Vec<f64>; 3]; 3],
    /// Viscosity on the wall edge below `c` (only set where `bwd_l c` is outside).
    mu_edge_low: [[Vec<f64>; 3]; 3],
}

fn empty3() -> [Vec<f64>; 3] {
    [Vec::new(), Vec::new(), Vec::new()]
}

impl ViscousOp {
    pub fn new(st: &Stencil, mu_cell: &[f64]) -> ViscousOp {
        let n = st.n;
        let mut mu_edge = [empty3(), empty3(), empty3()];
        let mut mu_edge_low = [empty3(), empty3(), empty3()];
        for j in 0..st.dims {
            for l in 0..st.dims {
                if l == j {
                    continue;
                }
                let mut e = vec![0.0; n];
                let mut lo = vec![0.0; n];
                for c in 0..n {
                    if !st.is_dof(j, c) {
                        continue;
                    }
                    let cj = st.fwd[j][c];
                    let pair = 0.5 * (mu_cell[c] + mu_cell[cj]);
                    let p = st.fwd[l][c];
                    e[c] = if p == NONE {
                        pair
                    } else {
                        0.25 * (mu_cell[c] + mu_cell[cj] + mu_cell[p] + mu_cell[st.fwd[j][p]])
                    };
                    if st.bwd[l][c] == NONE {
                        lo[c] = pair;
                    }
                }
                mu_edge[j][l] = e;
                mu_edge_low[j][l] = lo;
            }
        }
        ViscousOp {
            st: st.clone(),
            mu_cell: mu_cell.to_vec(),
            mu_edge,
            mu_edge_low,
        }
    }

    pub fn stencil(&self) -> &Stencil {
        &self.st
    }

    /// `out = V x` for component `j`; wall faces get zero.
    pub fn apply(&self, j: usize, x: &[f64], out: &mut [f64]) {
        let st = &self.st;
        out.iter_mut().for_each(|v| *v = 0.0);
        let hj = st.h[j];
        let ih2 = 1.0 / (hj * hj);
        // normal derivative at cell centres
        for c in 0..st.n {
            let right = st.face(x, j, c);
            let b = st.bwd[j][c];
            let left = st.face(x, j, b);
            let flux = self.mu_cell[c] * (right - left) * ih2;
            if st.is_dof(j, c) {
                out[c] -= flux;
            }
            if b != NONE && st.is_dof(j, b) {
                out[b] += flux;
            }
        }
        for l in 0..st.dims {
            if l == j {
                continue;
            }
            let ih2 = 1.0 / (st.h[l] * st.h[l]);
            let me = &self.mu_edge[j][l];
            let ml = &self.mu_edge_low[j][l];
            for c in 0..st.n {
                if !st.is_dof(j, c) {
                    continue;
                }
                let p = st.fwd[l][c];
                if p == NONE {
                    out[c] -= 2.0 * me[c] * x[c] * ih2;
                } else {
                    let flux = me[c] * (x[p] - x[c]) * ih2;
                    out[c] += flux;
                    out[p] -= flux;
                }
                if st.bwd[l][c] == NONE {
                    out[c] -= 2.0 * ml[c] * x[c] * ih2;
                }
            }
        }
    }

    /// Diagonal of `V` for component `j` (zero on wall faces).
    pub fn diagonal(&self, j: usize) -> Vec<f64> {
        let st = &self.st;
        let mut d = vec![0.0; st.n];
        let ih2 = 1.0 / (st.h[j] * st.h[j]);
        for c in 0..st.n {
            if !st.is_dof(j, c) {
                continue;
            }
            d[c] -= (self.mu_cell[c] + self.mu_cell[st.fwd[j][c]]) * ih2;
            for l in 0..st.dims {
                if l == j {
                    continue;
                }
                let ih2 = 1.0 / (st.h[l] * st.h[l]);
                let p = st.fwd[l][c];
                d[c] -= if p == NONE { 2.0 } else { 1.0 } * self.mu_edge[j][l][c] * ih2;
                let b = st.bwd[l][c];
                if b == NONE {
                    d[c] -= 2.0 * self.mu_edge_low[j][l][c] * ih2;
                } else {
                    d[c] -= self.mu_edge[j][l][b] * ih2;
                }
            }
        }
        d
    }

    pub fn apply_field(&self, u: &VectorField) -> VectorField {
        let mut out = VectorField::zeros(u.grid(), true);
        for j in 0..self.st.dims {
            self.apply(j, u.comp(j), out.comp_mut(j));
        }
        out
    }

    /// Cell density of `mu |grad u|^2`: each squared difference quotient is
    /// attributed to the cells its control volume overlaps, so that the
    /// integral equals `-<u, V u>`.
    pub fn density(&self, u: &VectorField) -> Vec<f64> {
        let st = &self.st;
        let mut out = vec![0.0; st.n];
        for j in 0..st.dims {
            let x = u.comp(j);
            let ih = 1.0 / st.h[j];
            for c in 0..st.n {
                let q = (st.face(x, j, c) - st.face_bwd(x, j, c)) * ih;
                out[c] += self.mu_cell[c] * q * q;
            }
            for l in 0..st.dims {
                if l == j {
                    continue;
                }
                let ih = 1.0 / st.h[l];
                for c in 0..st.n {
                    if !st.is_dof(j, c) {
                        continue;
                    }
                    let cj = st.fwd[j][c];
                    let p = st.fwd[l][c];
                    if p == NONE {
                        let q = 2.0 * x[c] * ih;
                        let e = 0.25 * self.mu_edge[j][l][c] * q * q;
                        out[c] += e;
                        out[cj] += e;
                    } else {
                        let q = (x[p] - x[c]) * ih;
                        let e = 0.25 * self.mu_edge[j][l][c] * q * q;
                        out[c] += e;
                        out[cj] += e;
                        out[p] += e;
                        out[st.fwd[j][p]] += e;
                    }
                    if st.bwd[l][c] == NONE {
                        let q = 2.0 * x[c] * ih;
                        let e = 0.25 * self.mu_edge_low[j][l][c] * q * q;
                        out[c] += e;
                        out[cj] += e;
                    }
                }
            }
        }
        out
    }
}

/// Cell density of `mu(theta) |grad u|^2` for a staggered velocity.
pub fn viscous_density(u: &VectorField, mu_cell: &[f64]) -> ScalarField {
    let st = Stencil::new(u.grid());
    let op = ViscousOp::new(&st, mu_cell);
    ScalarField::from_values(u.grid(), op.density(u)).expect("cell count")
}

/// Conservative central convection `C(w) v ~ div(w v)` on the staggered grid.
/// Skew adjoint whenever `w` is discretely divergence free.
pub fn convect(st: &Stencil, w: &VectorField, v: &VectorField) -> VectorField {
    let mut out = VectorField::zeros(&st.grid, true);
    for j in 0..st.dims {
        let vj = v.comp(j);
        let dst = out.comp_mut(j);
        for c in 0..st.n {
            if !st.is_dof(j, c) {
                continue;
            }
            let vc = vj[c];
            let mut acc = 0.0;
            for l in 0..st.dims {
                let wl = w.comp(l);
                let ih = 1.0 / st.h[l];
                if l == j {
                    let f = st.fwd[j][c];
                    let wp = 0.5 * (wl[c] + st.face(wl, j, f));
                    let wm = 0.5 * (wl[c] + st.face_bwd(wl, j, c));
                    let vp = st.face(vj, j, f);
                    let vm = st.face_bwd(vj, j, c);
                    acc += (wp * (vc + vp) - wm * (vc + vm)) * 0.5 * ih;
                } else {
                    let cj = st.fwd[j][c];
                    let wp = 0.5 * (st.face(wl, l, c) + st.face(wl, l, cj));
                    let vp = st.face(vj, j, st.fwd[l][c]);
                    let b = st.bwd[l][c];
                    let (wm, vm) = if b == NONE {
                        (0.0, 0.0)
                    } else {
                        (0.5 * (st.face(wl, l, b) + st.face(wl, l, st.fwd[j][b])), vj[b])
                    };
                    acc += (wp * (vc + vp) - wm * (vc + vm)) * 0.5 * ih;
                }
            }
            dst[c] = acc;
        }
    }
    out
}

/// Elastic body force `-(grad d)^T m` on velocity faces, with `m` the
/// director chemical potential at cell centres.
pub fn elastic_force(st: &Stencil, d: &DirectorField, m: &DirectorField) -> VectorField {
    let mut out = VectorField::zeros(&st.grid, true);
    for j in 0..st.dims {
        let ih = 1.0 / st.h[j];
        let dst = out.comp_mut(j);
        for c in 0..st.n {
            if !st.is_dof(j, c) {
                continue;
            }
            let f = st.fwd[j][c];
            let mut s = 0.0;
            for k in 0..3 {
                let dk = d.comp(k);
                let mk = m.comp(k);
                s += (dk[f] - dk[c]) * ih * 0.5 * (mk[c] + mk[f]);
            }
            dst[c] = -s;
        }
    }
    out
}

/// `(w . grad) x` at cell centres for one cell-centred scalar component,
/// averaging the one-sided differences weighted by the adjacent face velocities.
pub fn transport(st: &Stencil, w: &VectorField, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for a in 0..st.dims {
        let wa = w.comp(a);
        let half_ih = 0.5 / st.h[a];
        for c in 0..st.n {
            let f = st.fwd[a][c];
            let b = st.bwd[a][c];
            let mut s = 0.0;
            if f != NONE {
                s += st.face(wa, a, c) * (x[f] - x[c]);
            }
            if b != NONE {
                s += st.face(wa, a, b) * (x[c] - x[b]);
            }
            out[c] += s * half_ih;
        }
    }
}

/// Director transport `(w . grad) d` componentwise.
pub fn director_transport(st: &Stencil, w: &VectorField, d: &DirectorField) -> DirectorField {
    let mut out = DirectorField::constant(&st.grid, [0.0; 3]);
    for k in 0..3 {
        transport(st, w, d.comp(k), out.comp_mut(k));
    }
    out
}

/// Compact Laplacian of a cell-centred array with Neumann closure at walls.
pub fn laplacian(st: &Stencil, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for a in 0..st.dims {
        let ih2 = 1.0 / (st.h[a] * st.h[a]);
        for c in 0..st.n {
            let f = st.fwd[a][c];
            if f != NONE {
                let q = (x[f] - x[c]) * ih2;
                out[c] += q;
                out[f] -= q;
            }
        }
    }
}

/// Diagonal of [`laplacian`].
pub fn laplacian_diagonal(st: &Stencil) -> Vec<f64> {
    let mut d = vec![0.0; st.n];
    for a in 0..st.dims {
        let ih2 = 1.0 / (st.h[a] * st.h[a]);
        for c in 0..st.n {
            if st.fwd[a][c] != NONE {
                d[c] -= ih2;
            }
            if st.bwd[a][c] != NONE {
                d[c] -= ih2;
            }
        }
    }
    d
}

/// Staggered gradient of a cell-centred array onto velocity faces.
pub fn face_gradient(st: &Stencil, x: &[f64]) -> VectorField {
    let mut out = VectorField::zeros(&st.grid, true);
    for a in 0..st.dims {
        let ih = 1.0 / st.h[a];
        let dst = out.comp_mut(a);
        for c in 0..st.n {
            let f = st.fwd[a][c];
            if f != NONE {
                dst[c] = (x[f] - x[c]) * ih;
            }
        }
    }
    out
}

/// Backward-difference divergence of a staggered field.
pub fn face_divergence(st: &Stencil, u: &VectorField) -> Vec<f64> {
    let mut out = vec![0.0; st.n];
    for a in 0..st.dims {
        let ih = 1.0 / st.h[a];
        let comp = u.comp(a);
        for c in 0..st.n {
            out[c] += (st.face(comp, a, c) - st.face_bwd(comp, a, c)) * ih;
        }
    }
    out
}

/// Largest cell Peclet number `|w| h / 2` of a velocity against unit diffusion.
pub fn cell_peclet(st: &Stencil, w: &VectorField) -> f64 {
    let mut m = 0.0f64;
    for a in 0..st.dims {
        let wa = w.comp(a);
        for c in 0..st.n {
            m = m.max(st.face(wa, a, c).abs() * st.h[a] * 0.5);
        }
    }
    m
}
