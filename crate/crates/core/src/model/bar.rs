//! Uniform 1D bar assembly with linear shape functions.
//!
//! Element matrices for an element of length `h` and unit cross-section:
//! `K_e = (E/h)·[[1,−1],[−1,1]]`, consistent mass `M_e = (ρh/6)·[[2,1],[1,2]]`.
//! Node 0 (the contact end) is the boundary DOF.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::{LoadSet, SecondOrderModel};

pub fn assemble_bar1d(
    n_elems: usize,
    length: f64,
    density: f64,
    youngs_modulus: f64,
) -> Result<SecondOrderModel> {
    if n_elems < 1 {
        return Err(Error::InvalidSpec("bar1d: element count must be >= 1".into()));
    }
    if !(length > 0.0) || !(density > 0.0) || !(youngs_modulus > 0.0) {
        return Err(Error::InvalidSpec(
            "bar1d: length, density and Young's modulus must be > 0".into(),
        ));
    }
    let n = n_elems + 1;
    let h = length / n_elems as f64;
    let ke = youngs_modulus / h;
    let me = density * h / 6.0;

    let mut k = DMatrix::zeros(n, n);
    let mut m = DMatrix::zeros(n, n);
    for e in 0..n_elems {
        k[(e, e)] += ke;
        k[(e + 1, e + 1)] += ke;
        k[(e, e + 1)] -= ke;
        k[(e + 1, e)] -= ke;
        m[(e, e)] += 2.0 * me;
        m[(e + 1, e + 1)] += 2.0 * me;
        m[(e, e + 1)] += me;
        m[(e + 1, e)] += me;
    }

    let node_coords: Vec<[f64; 3]> = (0..n).map(|i| [i as f64 * h, 0.0, 0.0]).collect();
    let dof_map: Vec<(usize, usize)> = (0..n).map(|i| (i, 0)).collect();

    Ok(SecondOrderModel {
        k,
        m,
        d: DMatrix::zeros(n, n),
        boundary_dofs: vec![0],
        node_coords,
        dof_map,
        load: LoadSet::none(),
    })
}
