use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Structured simplicial mesh of the unit square (d = 2) or cube (d = 3).
///
/// Nodes are numbered lexicographically with x running fastest. Each square
/// cell is split along its (0,0)-(1,1) diagonal; each cube cell into the six
/// Kuhn tetrahedra sharing the main diagonal. That choice makes the mesh for
/// `N` an exact refinement of the mesh for `N / 2`.
#[derive(Debug, Clone)]
pub struct MeshP1 {
    dim: usize,
    n: usize,
    coords: Vec<f64>,
    elements: Vec<usize>,
    boundary: Vec<bool>,
    // node-to-node sparsity pattern and, for every element, the value slot of
    // each local (row, col) pair in that pattern
    pattern: CsrMatrix,
    slots: Vec<usize>,
}

pub fn build_mesh(dim: usize, n: usize) -> Result<MeshP1> {
    MeshP1::new(dim, n)
}

impl MeshP1 {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(alloc::format!(
                "mesh dimension must be 2 or 3, got {dim}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(alloc::format!(
                "need at least 2 elements per side, got {n}"
            )));
        }
        let side = n + 1;
        let num_nodes = side.pow(dim as u32);
        let h = 1.0 / n as f64;

        let mut coords = Vec::with_capacity(num_nodes * dim);
        let mut boundary = Vec::with_capacity(num_nodes);
        for v in 0..num_nodes {
            let idx = grid_index(v, side, dim);
            for &c in &idx[..dim] {
                coords.push(c as f64 * h);
            }
            boundary.push(idx[..dim].iter().any(|&c| c == 0 || c == n));
        }

        let mut elements = Vec::new();
        if dim == 2 {
            for j in 0..n {
                for i in 0..n {
                    let v = |di: usize, dj: usize| (i + di) + (j + dj) * side;
                    elements.extend_from_slice(&[v(0, 0), v(1, 0), v(1, 1)]);
                    elements.extend_from_slice(&[v(0, 0), v(1, 1), v(0, 1)]);
                }
            }
        } else {
            const PERMS: [([usize; 3], bool); 6] = [
                ([0, 1, 2], true),
                ([0, 2, 1], false),
                ([1, 0, 2], false),
                ([1, 2, 0], true),
                ([2, 0, 1], true),
                ([2, 1, 0], false),
            ];
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        for (perm, even) in PERMS {
                            let mut c = [i, j, k];
                            let mut tet = [0usize; 4];
                            tet[0] = c[0] + c[1] * side + c[2] * side * side;
                            for (s, &axis) in perm.iter().enumerate() {
                                c[axis] += 1;
                                tet[s + 1] = c[0] + c[1] * side + c[2] * side * side;
                            }
                            if !even {
                                tet.swap(2, 3);
                            }
                            elements.extend_from_slice(&tet);
                        }
                    }
                }
            }
        }

        let mut mesh = Self {
            dim,
            n,
            coords,
            elements,
            boundary,
            pattern: CsrMatrix::zeros(0, 0),
            slots: Vec::new(),
        };
        for e in 0..mesh.num_elements() {
            if mesh.signed_volume(e) <= 0.0 {
                return Err(Error::DegenerateElement(e));
            }
        }
        mesh.build_pattern();
        Ok(mesh)
    }

    fn build_pattern(&mut self) {
        let nn = self.num_nodes();
        let k = self.dim + 1;
        let mut t = Vec::with_capacity(self.num_elements() * k * k);
        for e in 0..self.num_elements() {
            for &a in self.element(e) {
                for &b in self.element(e) {
                    t.push((a, b, 0.0));
                }
            }
        }
        let pattern = CsrMatrix::from_triplets(nn, nn, &t).expect("mesh indices in range");
        let mut slots = Vec::with_capacity(t.len());
        for e in 0..self.num_elements() {
            for &a in self.element(e) {
                let (cols, _) = pattern.row(a);
                for &b in self.element(e) {
                    let off = cols.binary_search(&b).expect("pattern contains element pair");
                    slots.push(pattern.row_offsets()[a] + off);
                }
            }
        }
        self.pattern = pattern;
        self.slots = slots;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Elements per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_nodes(&self) -> usize {
        self.boundary.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn nodes_per_element(&self) -> usize {
        self.dim + 1
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.elements[e * k..(e + 1) * k]
    }

    pub fn coord(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn num_boundary_nodes(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }

    /// Grid index of node `v` (unused trailing components are zero).
    pub fn grid_index(&self, v: usize) -> [usize; 3] {
        grid_index(v, self.n + 1, self.dim)
    }

    /// Unknowns of the full optimality system: q, u and y on every node.
    pub fn total_dofs(&self) -> usize {
        3 * self.num_nodes()
    }

    pub fn signed_volume(&self, e: usize) -> f64 {
        element_geometry(self, e).0
    }

    /// Empty node-to-node sparsity pattern shared by all assembled matrices.
    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    /// Value slots in [`Self::pattern`] for element `e`, local row-major.
    pub(crate) fn element_slots(&self, e: usize) -> &[usize] {
        let k = (self.dim + 1) * (self.dim + 1);
        &self.slots[e * k..(e + 1) * k]
    }
}

fn grid_index(v: usize, side: usize, dim: usize) -> [usize; 3] {
    let mut idx = [0usize; 3];
    let mut rest = v;
    for c in idx.iter_mut().take(dim) {
        *c = rest % side;
        rest /= side;
    }
    idx
}

/// Signed volume and barycentric gradients of element `e`.
pub(crate) fn element_geometry(mesh: &MeshP1, e: usize) -> (f64, [[f64; 3]; 4]) {
    let d = mesh.dim();
    let nodes = mesh.element(e);
    let x0 = mesh.coord(nodes[0]);
    let mut jac = [[0.0; 3]; 3];
    for k in 0..d {
        let xk = mesh.coord(nodes[k + 1]);
        for r in 0..d {
            jac[r][k] = xk[r] - x0[r];
        }
    }
    let mut grads = [[0.0; 3]; 4];
    if d == 2 {
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        // rows of J^{-1}
        grads[1] = [jac[1][1] / det, -jac[0][1] / det, 0.0];
        grads[2] = [-jac[1][0] / det, jac[0][0] / det, 0.0];
        grads[0] = [-grads[1][0] - grads[2][0], -grads[1][1] - grads[2][1], 0.0];
        (det / 2.0, grads)
    } else {
        let m = jac;
        let cof = |r: usize, c: usize| {
            let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
            let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
            m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
        };
        let det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
        // (J^{-1})[k][r] = cof(r, k) / det
        for k in 0..3 {
            for r in 0..3 {
                grads[k + 1][r] = cof(r, k) / det;
            }
        }
        for r in 0..3 {
            grads[0][r] = -(grads[1][r] + grads[2][r] + grads[3][r]);
        }
        (det / 6.0, grads)
    }
}

/// Evaluates `f` at every node.
pub fn interpolate(mesh: &MeshP1, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..mesh.num_nodes()).map(|v| f(mesh.coord(v))).collect()
}

/// Linear interpolation of a nodal field from the mesh with `N / 2` elements
/// per side onto the mesh with `N`.
pub fn prolongate_nodal(coarse: &MeshP1, fine: &MeshP1, v: &[f64]) -> Result<Vec<f64>> {
    if coarse.dim() != fine.dim() || fine.n() != 2 * coarse.n() {
        return Err(Error::InvalidArgument(alloc::format!(
            "mesh with N={} is not a refinement of N={}",
            fine.n(),
            coarse.n()
        )));
    }
    crate::error::check_len(coarse.num_nodes(), v.len())?;
    let mut out = vec![0.0; fine.num_nodes()];
    for (f, o) in out.iter_mut().enumerate() {
        let (a, b) = coarse_parents(coarse, fine, f);
        *o = 0.5 * (v[a] + v[b]);
    }
    Ok(out)
}

/// The two coarse nodes whose midpoint is fine node `f` (equal when `f` is a
/// coarse node itself).
pub(crate) fn coarse_parents(coarse: &MeshP1, fine: &MeshP1, f: usize) -> (usize, usize) {
    let g = fine.grid_index(f);
    let side = coarse.n() + 1;
    let mut a = 0;
    let mut b = 0;
    let mut stride = 1;
    for &gc in g.iter().take(fine.dim()) {
        let lo = gc / 2;
        a += lo * stride;
        b += (lo + gc % 2) * stride;
        stride *= side;
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_2d() {
        let m = build_mesh(2, 2).unwrap();
        assert_eq!(m.num_nodes(), 9);
        assert_eq!(m.num_elements(), 8);
        assert_eq!(m.num_boundary_nodes(), 8);
        assert!(!m.is_boundary(4));
    }

    #[test]
    fn benchmark_dof_counts() {
        assert_eq!(3 * 321 * 321, 309_123);
        assert_eq!(build_mesh(3, 20).unwrap().total_dofs(), 27_783);
    }

    #[test]
    fn volumes_sum_to_one() {
        for (d, n) in [(2, 3), (3, 2)] {
            let m = build_mesh(d, n).unwrap();
            let total: f64 = (0..m.num_elements()).map(|e| m.signed_volume(e)).sum();
            assert!((total - 1.0).abs() < 1e-13);
            assert!((0..m.num_elements()).all(|e| m.signed_volume(e) > 0.0));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_mesh(2, 1).is_err());
        assert!(build_mesh(4, 4).is_err());
    }

    #[test]
    fn interpolation_of_x() {
        let m = build_mesh(2, 2).unwrap();
        assert_eq!(interpolate(&m, |x| x[0]), [0.0, 0.5, 1.0, 0.0, 0.5, 1.0, 0.0, 0.5, 1.0]);
        assert!(interpolate(&m, |_| f64::INFINITY).iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn prolongation_reproduces_linear_functions() {
        for d in [2, 3] {
            let c = build_mesh(d, 2).unwrap();
            let f = build_mesh(d, 4).unwrap();
            let lin = |x: &[f64]| 1.0 + x.iter().enumerate().map(|(i, v)| (i + 2) as f64 * v).sum::<f64>();
            let p = prolongate_nodal(&c, &f, &interpolate(&c, lin)).unwrap();
            let want = interpolate(&f, lin);
            for (a, b) in p.iter().zip(&want) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
