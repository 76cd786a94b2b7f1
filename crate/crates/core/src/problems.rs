//! Model problems on uniform grids of the unit square/cube (and a 2D beam),
//! with Dirichlet unknowns eliminated.
//!
//! Unknowns are numbered lexicographically with `x` fastest. For scalar kinds
//! `n` is the number of unknowns per direction, so the mesh width is
//! `h = 1 / (n + 1)` (finite differences and nodal elements) or `h = 1 / n`
//! (cell-centred upwind transport).

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::interpolation::CandidateSet;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Poisson1d,
    Poisson2d,
    Poisson3d,
    Aniso3d,
    RotatedAniso2d,
    RecircFlow,
    UpwindTransport,
    Elasticity2d,
}

impl ProblemKind {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, ProblemKind::RecircFlow | ProblemKind::UpwindTransport)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowField {
    /// `b = (cos 2pi/7, sin 2pi/7)`.
    Constant,
    /// `b = (y, x)`.
    YX,
    /// `b = (y, cos(pi x / 2))`.
    YCos,
    /// `b = (1, 0)`.
    East,
}

impl FlowField {
    pub fn eval(self, x: f64, y: f64) -> [f64; 2] {
        match self {
            FlowField::Constant => [(2.0 * PI / 7.0).cos(), (2.0 * PI / 7.0).sin()],
            FlowField::YX => [y, x],
            FlowField::YCos => [y, (PI * x / 2.0).cos()],
            FlowField::East => [1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Constant,
    /// Square in square: `1e4` on `[0.25, 0.75]^2`, `1e-4` elsewhere.
    Sns,
    /// `1e-4` for `x < 0.5`, `1e4` otherwise.
    Split,
    Zero,
}

impl Material {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        let inside = |t: f64| (0.25..=0.75).contains(&t);
        match self {
            Material::Constant => 1.0,
            Material::Sns => {
                if inside(x) && inside(y) {
                    1e4
                } else {
                    1e-4
                }
            }
            Material::Split => {
                if x < 0.5 {
                    1e-4
                } else {
                    1e4
                }
            }
            Material::Zero => 0.0,
        }
    }
}

/// The double-glazing wind `b = (2y(1 - x^2), -2x(1 - y^2))`.
pub fn double_glazing_wind(x: f64, y: f64) -> [f64; 2] {
    [2.0 * y * (1.0 - x * x), -2.0 * x * (1.0 - y * y)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Unknowns per direction (scalar kinds) or cells along the beam.
    pub n: usize,
    /// Cells across the beam (elasticity only).
    pub ny: usize,
    /// Anisotropy or diffusion coefficient; `None` takes the kind's default
    /// (0.001 for the anisotropic kinds, 0.005 for recirculating flow).
    pub eps: Option<f64>,
    /// Rotation angle in radians.
    pub psi: f64,
    /// Poisson ratio.
    pub nu: f64,
    /// Young's modulus.
    pub young: f64,
    pub flow: FlowField,
    pub material: Material,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Poisson2d,
            n: 32,
            ny: 8,
            eps: None,
            psi: 0.0,
            nu: 0.3,
            young: 1.0,
            flow: FlowField::Constant,
            material: Material::Constant,
        }
    }
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, n: usize) -> Self {
        Self {
            kind,
            n,
            ..Self::default()
        }
    }

    pub fn eps_value(&self) -> f64 {
        self.eps.unwrap_or(match self.kind {
            ProblemKind::RecircFlow => 0.005,
            ProblemKind::Aniso3d | ProblemKind::RotatedAniso2d => 0.001,
            _ => 1.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return invalid(format!("n must be at least 2, got {}", self.n));
        }
        let eps = self.eps_value();
        if !(eps >= 0.0) {
            return invalid(format!("eps must be non-negative, got {eps}"));
        }
        if !(0.0..PI).contains(&self.psi) {
            return invalid(format!("psi {} outside [0, pi)", self.psi));
        }
        if !(0.0..0.5).contains(&self.nu) {
            return invalid(format!("nu {} outside [0, 0.5)", self.nu));
        }
        match self.kind {
            ProblemKind::RecircFlow if eps == 0.0 => invalid("recirculating flow needs eps > 0"),
            ProblemKind::Elasticity2d if self.ny < 1 || !(self.young > 0.0) => {
                invalid("elasticity needs ny >= 1 and a positive Young's modulus")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub a: SparseMatrix,
    pub b: CandidateSet,
    /// Left candidates for the non-symmetric kinds.
    pub b_hat: Option<CandidateSet>,
    /// Right-hand side consistent with the boundary data (unit source).
    pub rhs: Vec<f64>,
}

pub fn generate(spec: &ProblemSpec) -> Result<Problem> {
    spec.validate()?;
    let n = spec.n;
    let eps = spec.eps_value();
    let (a, rhs) = match spec.kind {
        ProblemKind::Poisson1d => fd_diffusion(&[n], &[1.0]),
        ProblemKind::Poisson2d => fd_diffusion(&[n, n], &[1.0, 1.0]),
        ProblemKind::Poisson3d => fd_diffusion(&[n, n, n], &[1.0, 1.0, 1.0]),
        ProblemKind::Aniso3d => fd_diffusion(&[n, n, n], &[1.0, 1.0, eps]),
        ProblemKind::RotatedAniso2d => {
            let full = rotated_aniso_full(n, eps, spec.psi);
            let keep = interior_nodes(n + 2, n + 2);
            let h2 = 1.0 / ((n + 1) * (n + 1)) as f64;
            (restrict_square(&full, &keep)?, vec![h2; n * n])
        }
        ProblemKind::RecircFlow => recirc_flow(n, eps)?,
        ProblemKind::UpwindTransport => upwind_transport(n, spec.flow, spec.material)?,
        ProblemKind::Elasticity2d => {
            let (a, coords) = elasticity_reduced(spec.n, spec.ny, spec.young, spec.nu)?;
            let b = rigid_body_modes(&coords);
            let mut rhs = vec![0.0; a.n_rows()];
            for (k, c) in coords.iter().enumerate() {
                // downward load on the free end
                if (c[0] - spec.n as f64 / spec.ny as f64).abs() < 1e-12 {
                    rhs[2 * k + 1] = -0.01;
                }
            }
            return Ok(Problem {
                a,
                b,
                b_hat: None,
                rhs,
            });
        }
    };
    let ones = CandidateSet::from_element(a.n_rows(), 1, 1.0);
    let b_hat = (!spec.kind.is_symmetric()).then(|| ones.clone());
    Ok(Problem {
        a,
        b: ones,
        b_hat,
        rhs,
    })
}

/// Half-grid Reynolds number `|b| h / (2 eps)`.
pub fn half_grid_reynolds(b_magnitude: f64, h: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    Ok(b_magnitude * h / (2.0 * eps))
}

/// Central finite differences of `-sum_d k_d u_{x_d x_d}` on the interior of
/// a uniform grid with `dims[d]` unknowns along direction `d`, scaled by
/// `h^{-2}` (`h = 1 / (dims[0] + 1)`). Returns the matrix and a unit source.
fn fd_diffusion(dims: &[usize], k: &[f64]) -> (SparseMatrix, Vec<f64>) {
    let n: usize = dims.iter().product();
    let h = 1.0 / (dims[0] + 1) as f64;
    let s = 1.0 / (h * h);
    let mut strides = vec![1; dims.len()];
    for d in 1..dims.len() {
        strides[d] = strides[d - 1] * dims[d - 1];
    }
    let mut trip = Vec::with_capacity(n * (2 * dims.len() + 1));
    for idx in 0..n {
        let mut diag = 0.0;
        for d in 0..dims.len() {
            let c = (idx / strides[d]) % dims[d];
            diag += 2.0 * k[d] * s;
            if c > 0 {
                trip.push((idx, idx - strides[d], -k[d] * s));
            }
            if c + 1 < dims[d] {
                trip.push((idx, idx + strides[d], -k[d] * s));
            }
        }
        trip.push((idx, idx, diag));
    }
    let a = SparseMatrix::from_triplets(n, n, &trip).expect("indices in range");
    (a, vec![1.0; n])
}

/// Indices of the interior nodes of an `nx x ny` node grid.
fn interior_nodes(nx: usize, ny: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity((nx - 2) * (ny - 2));
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            out.push(j * nx + i);
        }
    }
    out
}

/// `A[keep, keep]`.
fn restrict_square(a: &SparseMatrix, keep: &[usize]) -> Result<SparseMatrix> {
    let mut map = vec![usize::MAX; a.n_rows()];
    for (k, &i) in keep.iter().enumerate() {
        map[i] = k;
    }
    let mut trip = Vec::new();
    for (k, &i) in keep.iter().enumerate() {
        for (j, v) in a.row_iter(i) {
            if map[j] != usize::MAX {
                trip.push((k, map[j], v));
            }
        }
    }
    SparseMatrix::from_triplets(keep.len(), keep.len(), &trip)
}

/// Bilinear-element stiffness of `-div(Q^T D Q grad u)` on the full
/// `(n + 2)^2` node grid of the unit square (boundary nodes included).
pub fn rotated_aniso_full(n: usize, eps: f64, psi: f64) -> SparseMatrix {
    let (c, s) = (psi.cos(), psi.sin());
    let q = Matrix2::new(c, -s, s, c);
    let d = Matrix2::new(1.0, 0.0, 0.0, eps);
    let k = q.transpose() * d * q;
    let ke = q1_stiffness(&k);
    let nn = n + 2;
    let mut trip = Vec::with_capacity((nn - 1) * (nn - 1) * 16);
    for ej in 0..nn - 1 {
        for ei in 0..nn - 1 {
            let nodes = [ej * nn + ei, ej * nn + ei + 1, (ej + 1) * nn + ei + 1, (ej + 1) * nn + ei];
            for a in 0..4 {
                for b in 0..4 {
                    trip.push((nodes[a], nodes[b], ke[(a, b)]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(nn * nn, nn * nn, &trip).expect("indices in range")
}

/// Element matrix of `int grad(phi_b)^T K grad(phi_a)` on a square bilinear
/// element (independent of the element size in 2D), by 2x2 Gauss quadrature.
/// Local nodes run counter-clockwise from the lower-left corner.
fn q1_stiffness(k: &Matrix2<f64>) -> DMatrix<f64> {
    let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let g = 1.0 / 3f64.sqrt();
    let mut ke = DMatrix::zeros(4, 4);
    for &xi in &[-g, g] {
        for &eta in &[-g, g] {
            // gradients w.r.t. physical coordinates on a unit-size element:
            // d/dx = 2 d/dxi for size h = 1; the h-scaling cancels in 2D
            let grads: Vec<[f64; 2]> = corners
                .iter()
                .map(|&(cx, cy)| [cx * (1.0 + cy * eta) / 2.0, cy * (1.0 + cx * xi) / 2.0])
                .collect();
            // weight 1 per point times Jacobian 1/4
            for a in 0..4 {
                for b in 0..4 {
                    let ga = grads[a];
                    let gb = grads[b];
                    let v = ga[0] * (k[(0, 0)] * gb[0] + k[(0, 1)] * gb[1])
                        + ga[1] * (k[(1, 0)] * gb[0] + k[(1, 1)] * gb[1]);
                    ke[(a, b)] += 0.25 * v;
                }
            }
        }
    }
    ke
}

/// Triangles of the structured split of an `nx x ny` cell grid (node grid
/// `(nx + 1) x (ny + 1)`), each cell cut along its south-west/north-east
/// diagonal. Vertices are counter-clockwise.
fn triangles(nx: usize, ny: usize) -> Vec<[usize; 3]> {
    let w = nx + 1;
    let mut out = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let sw = j * w + i;
            let (se, ne, nw) = (sw + 1, sw + w + 1, sw + w);
            out.push([sw, se, ne]);
            out.push([sw, ne, nw]);
        }
    }
    out
}

/// Gradients of the three barycentric functions and the area.
fn p1_gradients(p: &[[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = det / 2.0;
    let mut g = [[0.0; 2]; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        g[a] = [(p[b][1] - p[c][1]) / det, (p[c][0] - p[b][0]) / det];
    }
    (g, area)
}

/// Linear-triangle Galerkin discretization of `-eps lap u + b . grad u` with
/// the double-glazing wind on the full node grid (boundary included). The
/// convection term uses the edge-midpoint rule.
pub fn recirc_flow_full(n: usize, eps: f64) -> SparseMatrix {
    let nn = n + 2;
    let h = 1.0 / (n + 1) as f64;
    let xy = |k: usize| [(k % nn) as f64 * h, (k / nn) as f64 * h];
    let mut trip = Vec::new();
    for t in triangles(nn - 1, nn - 1) {
        let p = [xy(t[0]), xy(t[1]), xy(t[2])];
        let (g, area) = p1_gradients(&p);
        // edge midpoints; barycentric values are 1/2 on the two end nodes
        let mids = [(0, 1), (1, 2), (2, 0)];
        for a in 0..3 {
            for b in 0..3 {
                let mut v = eps * area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                for &(e0, e1) in &mids {
                    let phi_a = if a == e0 || a == e1 { 0.5 } else { 0.0 };
                    if phi_a == 0.0 {
                        continue;
                    }
                    let m = [(p[e0][0] + p[e1][0]) / 2.0, (p[e0][1] + p[e1][1]) / 2.0];
                    let w = double_glazing_wind(m[0], m[1]);
                    v += area / 3.0 * phi_a * (w[0] * g[b][0] + w[1] * g[b][1]);
                }
                trip.push((t[a], t[b], v));
            }
        }
    }
    SparseMatrix::from_triplets(nn * nn, nn * nn, &trip).expect("indices in range")
}

fn recirc_flow(n: usize, eps: f64) -> Result<(SparseMatrix, Vec<f64>)> {
    let nn = n + 2;
    let full = recirc_flow_full(n, eps);
    let keep = interior_nodes(nn, nn);
    let a = restrict_square(&full, &keep)?;
    // u = 1 on the east side, 0 elsewhere on the boundary; no source
    let mut rhs = vec![0.0; keep.len()];
    for (k, &i) in keep.iter().enumerate() {
        for (j, v) in full.row_iter(i) {
            if j % nn == nn - 1 {
                rhs[k] -= v;
            }
        }
    }
    Ok((a, rhs))
}

/// First-order upwind differences of `b . grad u + c u` on `n x n` cells;
/// unknowns at cell centres, inflow values (`x = 0` or `y = 0`) eliminated
/// as zero and unit source.
fn upwind_transport(n: usize, flow: FlowField, material: Material) -> Result<(SparseMatrix, Vec<f64>)> {
    let h = 1.0 / n as f64;
    let mut trip = Vec::with_capacity(3 * n * n);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let b = flow.eval(x, y);
            let mut diag = material.eval(x, y);
            diag += (b[0].abs() + b[1].abs()) / h;
            // upwind neighbour in x
            if b[0] > 0.0 && i > 0 {
                trip.push((row, row - 1, -b[0] / h));
            } else if b[0] < 0.0 && i + 1 < n {
                trip.push((row, row + 1, b[0] / h));
            }
            if b[1] > 0.0 && j > 0 {
                trip.push((row, row - n, -b[1] / h));
            } else if b[1] < 0.0 && j + 1 < n {
                trip.push((row, row + n, b[1] / h));
            }
            trip.push((row, row, diag));
        }
    }
    let a = SparseMatrix::from_triplets(n * n, n * n, &trip)?;
    Ok((a, vec![1.0; n * n]))
}

/// Lame parameters `(lambda, mu)` from Young's modulus and Poisson ratio.
pub fn lame(young: f64, nu: f64) -> (f64, f64) {
    (
        young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        young / (2.0 * (1.0 + nu)),
    )
}

/// Plane-strain linear-triangle stiffness of the beam `[0, nx/ny] x [0, 1]`
/// meshed with `nx x ny` square cells, before any boundary condition. DOFs
/// are interleaved `(u_x, u_y)` per node; also returns the node coordinates.
pub fn elasticity_full(nx: usize, ny: usize, young: f64, nu: f64) -> (SparseMatrix, Vec<[f64; 2]>) {
    let (lam, mu) = lame(young, nu);
    let h = 1.0 / ny as f64;
    let w = nx + 1;
    let coords: Vec<[f64; 2]> = (0..w * (ny + 1))
        .map(|k| [(k % w) as f64 * h, (k / w) as f64 * h])
        .collect();
    let dmat = [[lam + 2.0 * mu, lam, 0.0], [lam, lam + 2.0 * mu, 0.0], [0.0, 0.0, mu]];
    let mut trip = Vec::new();
    for t in triangles(nx, ny) {
        let p = [coords[t[0]], coords[t[1]], coords[t[2]]];
        let (g, area) = p1_gradients(&p);
        // strain-displacement matrix, engineering shear strain
        let mut bm = [[0.0; 6]; 3];
        for a in 0..3 {
            bm[0][2 * a] = g[a][0];
            bm[1][2 * a + 1] = g[a][1];
            bm[2][2 * a] = g[a][1];
            bm[2][2 * a + 1] = g[a][0];
        }
        for r in 0..6 {
            for c in 0..6 {
                let mut v = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        v += bm[k][r] * dmat[k][l] * bm[l][c];
                    }
                }
                trip.push((2 * t[r / 2] + r % 2, 2 * t[c / 2] + c % 2, area * v));
            }
        }
    }
    let nd = 2 * coords.len();
    let a = SparseMatrix::from_triplets(nd, nd, &trip).expect("indices in range");
    (a, coords)
}

/// The beam with its `x = 0` end clamped; block size 2. Returns the reduced
/// matrix and the coordinates of the free nodes.
fn elasticity_reduced(nx: usize, ny: usize, young: f64, nu: f64) -> Result<(SparseMatrix, Vec<[f64; 2]>)> {
    let (full, coords) = elasticity_full(nx, ny, young, nu);
    let free: Vec<usize> = (0..coords.len()).filter(|&k| k % (nx + 1) != 0).collect();
    let keep: Vec<usize> = free.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
    let a = restrict_square(&full, &keep)?.with_block_size(2)?;
    Ok((a, free.iter().map(|&k| coords[k]).collect()))
}

/// Two translations and the infinitesimal rotation `(-y, x)`.
pub fn rigid_body_modes(coords: &[[f64; 2]]) -> CandidateSet {
    let mut b = CandidateSet::zeros(2 * coords.len(), 3);
    for (k, c) in coords.iter().enumerate() {
        b[(2 * k, 0)] = 1.0;
        b[(2 * k + 1, 1)] = 1.0;
        b[(2 * k, 2)] = -c[1];
        b[(2 * k + 1, 2)] = c[0];
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson1d_stencil() {
        let p = generate(&ProblemSpec::new(ProblemKind::Poisson1d, 8)).unwrap();
        let s = 81.0;
        assert_eq!(p.a.get(3, 3), 2.0 * s);
        assert_eq!(p.a.get(3, 2), -s);
        assert_eq!(p.a.get(3, 4), -s);
        assert_eq!(p.a.nnz(), 8 + 2 * 7);
        assert!(p.b_hat.is_none());
    }

    #[test]
    fn isotropic_q1_stencil() {
        let mut spec = ProblemSpec::new(ProblemKind::RotatedAniso2d, 5);
        spec.eps = Some(1.0);
        let a = generate(&spec).unwrap().a;
        let c = 2 * 5 + 2;
        assert!((a.get(c, c) - 8.0 / 3.0).abs() < 1e-14);
        for d in [1usize, 4, 5, 6] {
            assert!((a.get(c, c - d) + 1.0 / 3.0).abs() < 1e-14, "offset {d}");
            assert!((a.get(c, c + d) + 1.0 / 3.0).abs() < 1e-14, "offset {d}");
        }
    }

    #[test]
    fn materials_and_flows() {
        assert_eq!(Material::Split.eval(0.4, 0.9), 1e-4);
        assert_eq!(Material::Sns.eval(0.5, 0.5), 1e4);
        assert_eq!(FlowField::YX.eval(0.3, 0.7), [0.7, 0.3]);
    }

    #[test]
    fn reynolds() {
        assert!((half_grid_reynolds(1.0, 0.01, 0.005).unwrap() - 1.0).abs() < 1e-15);
        assert!((half_grid_reynolds(2.0, 1.0 / 160.0, 0.005).unwrap() - 1.25).abs() < 1e-15);
        assert!(half_grid_reynolds(1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn upwind_east_flow_is_lower_triangular() {
        let mut spec = ProblemSpec::new(ProblemKind::UpwindTransport, 6);
        spec.flow = FlowField::East;
        spec.material = Material::Zero;
        let a = generate(&spec).unwrap().a;
        for i in 0..a.n_rows() {
            assert!(a.row(i).0.iter().all(|&j| j <= i));
        }
    }

    #[test]
    fn rigid_modes_in_kernel_of_unconstrained_beam() {
        let (a, coords) = elasticity_full(8, 2, 1.0, 0.3);
        let b = rigid_body_modes(&coords);
        for l in 0..3 {
            let v: Vec<f64> = b.column(l).iter().copied().collect();
            let av = a.spmv(&v).unwrap();
            assert!(av.iter().all(|x| x.abs() < 1e-10 * a.max_abs()), "mode {l}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = ProblemSpec::new(ProblemKind::RotatedAniso2d, 7);
        spec.psi = PI / 5.0;
        assert_eq!(generate(&spec).unwrap().a, generate(&spec).unwrap().a);
    }
}
