use alloc::vec;
use alloc::vec::Vec;

use super::mesh::{element_geometry, MeshP1};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Reference P1 mass matrix entry divided by the element volume.
#[inline]
pub(crate) fn mass_weight(dim: usize, i: usize, j: usize) -> f64 {
    let denom = ((dim + 1) * (dim + 2)) as f64;
    if i == j {
        2.0 / denom
    } else {
        1.0 / denom
    }
}

#[inline]
pub(crate) fn grad_dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Element loop over the shared mesh pattern. `local` is the row-major
/// `(d+1) x (d+1)` element matrix, zeroed before each call.
pub(crate) fn assemble_elementwise(
    mesh: &MeshP1,
    mut element: impl FnMut(usize, f64, &[[f64; 3]; 4], &mut [f64]),
) -> Result<CsrMatrix> {
    let mut out = mesh.pattern().clone();
    let k = mesh.nodes_per_element();
    let mut local = vec![0.0; k * k];
    for e in 0..mesh.num_elements() {
        let (vol, grads) = element_geometry(mesh, e);
        if vol <= 0.0 {
            return Err(Error::DegenerateElement(e));
        }
        local.iter_mut().for_each(|v| *v = 0.0);
        element(e, vol, &grads, &mut local);
        let values = out.values_mut();
        for (slot, v) in mesh.element_slots(e).iter().zip(&local) {
            values[*slot] += v;
        }
    }
    Ok(out)
}

/// Consistent P1 mass matrix.
pub fn assemble_mass(mesh: &MeshP1) -> Result<CsrMatrix> {
    let k = mesh.nodes_per_element();
    let d = mesh.dim();
    assemble_elementwise(mesh, |_, vol, _, local| {
        for i in 0..k {
            for j in 0..k {
                local[i * k + j] = vol * mass_weight(d, i, j);
            }
        }
    })
}

/// Galerkin matrix of the Laplacian without boundary treatment.
pub fn assemble_laplacian(mesh: &MeshP1) -> Result<CsrMatrix> {
    let k = mesh.nodes_per_element();
    assemble_elementwise(mesh, |_, vol, grads, local| {
        for i in 0..k {
            for j in 0..k {
                local[i * k + j] = vol * grad_dot(&grads[i], &grads[j]);
            }
        }
    })
}

/// Laplacian with Dirichlet rows and columns replaced by identity ones.
pub fn assemble_stiffness(mesh: &MeshP1) -> Result<CsrMatrix> {
    let mut k = assemble_laplacian(mesh)?;
    apply_dirichlet(mesh, &mut k, true);
    Ok(k)
}

/// Zeroes boundary rows (and, if `columns`, boundary columns) keeping the
/// pattern; boundary diagonal entries become one.
pub(crate) fn apply_dirichlet(mesh: &MeshP1, a: &mut CsrMatrix, columns: bool) {
    let offsets: Vec<usize> = a.row_offsets().to_vec();
    let cols: Vec<usize> = a.col_indices().to_vec();
    let values = a.values_mut();
    for i in 0..mesh.num_nodes() {
        let row_bnd = mesh.is_boundary(i);
        for p in offsets[i]..offsets[i + 1] {
            let j = cols[p];
            if row_bnd {
                values[p] = if i == j { 1.0 } else { 0.0 };
            } else if columns && mesh.is_boundary(j) {
                values[p] = 0.0;
            }
        }
    }
}

/// Zeroes the boundary rows only (diagonal included).
pub(crate) fn zero_boundary_rows(mesh: &MeshP1, a: &mut CsrMatrix) {
    let offsets: Vec<usize> = a.row_offsets().to_vec();
    let values = a.values_mut();
    for i in 0..mesh.num_nodes() {
        if mesh.is_boundary(i) {
            for v in &mut values[offsets[i]..offsets[i + 1]] {
                *v = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_mesh;
    use crate::linalg::jacobi_eigensolver;

    #[test]
    fn mass_partition_of_unity() {
        for (d, n) in [(2, 4), (3, 3)] {
            let m = assemble_mass(&build_mesh(d, n).unwrap()).unwrap();
            let total: f64 = m.values().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(m.asymmetry() < 1e-16);
        }
    }

    #[test]
    fn reference_triangle_entries() {
        // the first triangle of the N = 2 mesh is a right triangle with legs 1/2;
        // scaling to legs 1 multiplies mass by 4 and leaves stiffness unchanged
        let mesh = build_mesh(2, 2).unwrap();
        let mut mass = None;
        let _ = assemble_elementwise(&mesh, |e, vol, grads, _| {
            if e == 0 {
                mass = Some(4.0 * vol * mass_weight(2, 0, 0));
                let k: Vec<f64> = (0..3)
                    .flat_map(|i| (0..3).map(move |j| (i, j)))
                    .map(|(i, j)| vol * grad_dot(&grads[i], &grads[j]))
                    .collect();
                // vertices (0,0), (h,0), (h,h): right angle at the second vertex
                let want = [0.5, -0.5, 0.0, -0.5, 1.0, -0.5, 0.0, -0.5, 0.5];
                for (a, b) in k.iter().zip(want) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        });
        assert!((mass.unwrap() - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let mesh = build_mesh(2, 5).unwrap();
        let k = assemble_laplacian(&mesh).unwrap();
        let r = k.spmv(&vec![1.0; mesh.num_nodes()]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn stiffness_is_spd_on_n8() {
        let mesh = build_mesh(2, 8).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        assert!(k.asymmetry() == 0.0);
        let eig = jacobi_eigensolver(&k.to_dense()).unwrap();
        assert!(eig[0] > 0.0);
    }
}
