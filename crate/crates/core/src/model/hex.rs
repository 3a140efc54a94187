//! Structured trilinear hexahedral (8-node) mesh assembly.
//!
//! Isoparametric elements on an axis-aligned grid, 2×2×2 Gauss integration,
//! isotropic linear elasticity, consistent mass. Because the grid is uniform
//! the element matrices are computed once and stamped for every element;
//! the global matrices are exactly symmetric by construction.

use nalgebra::{DMatrix, SMatrix};

use crate::error::{Error, Result};

use super::{LoadSet, SecondOrderModel};

/// Local corner coordinates of the reference hexahedron.
const CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

type Matrix24 = SMatrix<f64, 24, 24>;

/// Element stiffness and consistent mass for a box element `hx × hy × hz`.
fn element_matrices(h: [f64; 3], e: f64, nu: f64, rho: f64) -> (Matrix24, Matrix24) {
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    // isotropic elasticity in Voigt order (xx, yy, zz, xy, yz, zx)
    let mut c = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lambda;
        }
        c[(i, i)] = lambda + 2.0 * mu;
        c[(i + 3, i + 3)] = mu;
    }

    let det_j = h[0] * h[1] * h[2] / 8.0;
    let g = 1.0 / 3.0f64.sqrt();
    let mut ke = Matrix24::zeros();
    let mut me = Matrix24::zeros();
    for &gx in &[-g, g] {
        for &gy in &[-g, g] {
            for &gz in &[-g, g] {
                let mut shape = [0.0f64; 8];
                let mut dndx = [[0.0f64; 3]; 8];
                for (a, corner) in CORNERS.iter().enumerate() {
                    let f = [
                        0.5 * (1.0 + corner[0] * gx),
                        0.5 * (1.0 + corner[1] * gy),
                        0.5 * (1.0 + corner[2] * gz),
                    ];
                    shape[a] = f[0] * f[1] * f[2];
                    // d/dx_i = d/dxi_i * (2 / h_i) on the axis-aligned grid
                    dndx[a][0] = 0.5 * corner[0] * f[1] * f[2] * 2.0 / h[0];
                    dndx[a][1] = f[0] * 0.5 * corner[1] * f[2] * 2.0 / h[1];
                    dndx[a][2] = f[0] * f[1] * 0.5 * corner[2] * 2.0 / h[2];
                }
                let mut b = SMatrix::<f64, 6, 24>::zeros();
                for a in 0..8 {
                    let (dx, dy, dz) = (dndx[a][0], dndx[a][1], dndx[a][2]);
                    b[(0, 3 * a)] = dx;
                    b[(1, 3 * a + 1)] = dy;
                    b[(2, 3 * a + 2)] = dz;
                    b[(3, 3 * a)] = dy;
                    b[(3, 3 * a + 1)] = dx;
                    b[(4, 3 * a + 1)] = dz;
                    b[(4, 3 * a + 2)] = dy;
                    b[(5, 3 * a)] = dz;
                    b[(5, 3 * a + 2)] = dx;
                }
                ke += b.transpose() * c * b * det_j;
                for a in 0..8 {
                    for bn in 0..8 {
                        let mab = rho * shape[a] * shape[bn] * det_j;
                        for dof in 0..3 {
                            me[(3 * a + dof, 3 * bn + dof)] += mab;
                        }
                    }
                }
            }
        }
    }
    // mirror the upper triangle so the element matrices are bitwise symmetric
    for mat in [&mut ke, &mut me] {
        for i in 0..24 {
            for j in (i + 1)..24 {
                mat[(j, i)] = mat[(i, j)];
            }
        }
    }
    (ke, me)
}

pub fn assemble_hex8(
    n: [usize; 3],
    dims: [f64; 3],
    density: f64,
    youngs_modulus: f64,
    poisson: f64,
) -> Result<SecondOrderModel> {
    if n.iter().any(|&c| c < 1) {
        return Err(Error::InvalidSpec("hex8: element counts must be >= 1".into()));
    }
    if dims.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidSpec("hex8: dimensions must be > 0".into()));
    }
    if !(density > 0.0) || !(youngs_modulus > 0.0) {
        return Err(Error::InvalidSpec(
            "hex8: density and Young's modulus must be > 0".into(),
        ));
    }
    if !(0.0..0.5).contains(&poisson) {
        return Err(Error::InvalidSpec("hex8: Poisson ratio must be in [0, 0.5)".into()));
    }

    let h = [
        dims[0] / n[0] as f64,
        dims[1] / n[1] as f64,
        dims[2] / n[2] as f64,
    ];
    let (ke, me) = element_matrices(h, youngs_modulus, poisson, density);

    let nodes = [(n[0] + 1), (n[1] + 1), (n[2] + 1)];
    let n_nodes = nodes[0] * nodes[1] * nodes[2];
    let n_dofs = 3 * n_nodes;
    let node_id = |ix: usize, iy: usize, iz: usize| ix + nodes[0] * (iy + nodes[1] * iz);

    let mut k = DMatrix::zeros(n_dofs, n_dofs);
    let mut m = DMatrix::zeros(n_dofs, n_dofs);
    for iz in 0..n[2] {
        for iy in 0..n[1] {
            for ix in 0..n[0] {
                let mut conn = [0usize; 8];
                for (a, corner) in CORNERS.iter().enumerate() {
                    let dx = if corner[0] > 0.0 { 1 } else { 0 };
                    let dy = if corner[1] > 0.0 { 1 } else { 0 };
                    let dz = if corner[2] > 0.0 { 1 } else { 0 };
                    conn[a] = node_id(ix + dx, iy + dy, iz + dz);
                }
                for a in 0..8 {
                    for bn in 0..8 {
                        for da in 0..3 {
                            for db in 0..3 {
                                let gi = 3 * conn[a] + da;
                                let gj = 3 * conn[bn] + db;
                                k[(gi, gj)] += ke[(3 * a + da, 3 * bn + db)];
                                m[(gi, gj)] += me[(3 * a + da, 3 * bn + db)];
                            }
                        }
                    }
                }
            }
        }
    }

    let mut coords = vec![[0.0f64; 3]; n_nodes];
    for iz in 0..nodes[2] {
        for iy in 0..nodes[1] {
            for ix in 0..nodes[0] {
                coords[node_id(ix, iy, iz)] = [ix as f64 * h[0], iy as f64 * h[1], iz as f64 * h[2]];
            }
        }
    }
    let dof_map: Vec<(usize, usize)> = (0..n_dofs).map(|d| (d / 3, d % 3)).collect();

    Ok(SecondOrderModel {
        k,
        m,
        d: DMatrix::zeros(n_dofs, n_dofs),
        boundary_dofs: Vec::new(),
        node_coords: coords,
        dof_map,
        load: LoadSet::none(),
    })
}
