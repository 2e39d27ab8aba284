//! Periodic quadratic (P2) finite elements on a uniform mesh of [0, 1].
//!
//! Element `K` spans `[K h, (K + 1) h]` and carries three nodes: left end,
//! midpoint, right end. Geometric node `j` sits at `t = j h / 2`; the last
//! geometric node is identified with node 0, leaving `2 n_elements` unknown
//! nodes per state component.

use std::io::Write;

use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::linalg::DenseMatrix;
use crate::quadrature::{GAUSS3_POINTS, GAUSS3_WEIGHTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mesh {
    n_elements: usize,
}

impl Mesh {
    pub fn new(n_elements: usize) -> Result<Self> {
        if n_elements < 2 {
            return Err(Error::invalid(format!(
                "a periodic mesh needs at least 2 elements, got {n_elements}"
            )));
        }
        Ok(Self { n_elements })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn element_length(&self) -> f64 {
        1.0 / self.n_elements as f64
    }

    /// Endpoints plus midpoints, counting both t = 0 and t = 1.
    pub fn n_geometric_nodes(&self) -> usize {
        2 * self.n_elements + 1
    }

    /// Unknown nodes after the periodic identification.
    pub fn n_unknown_nodes(&self) -> usize {
        2 * self.n_elements
    }

    /// Abscissa of geometric node `j` in `0..=2 n_elements`.
    pub fn node_abscissa(&self, j: usize) -> f64 {
        j as f64 / self.n_unknown_nodes() as f64
    }

    /// Unknown-node index of a local node of an element (0-based element).
    pub fn global_index(&self, element: usize, local: LocalNode) -> usize {
        (2 * element + local.offset()) % self.n_unknown_nodes()
    }

    /// Element containing `t` and the reference coordinate inside it.
    /// `t = 1` maps to the right end of the last element.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(format!("abscissa t = {t} outside [0, 1]")));
        }
        let scaled = t * self.n_elements as f64;
        let element = (scaled.floor() as usize).min(self.n_elements - 1);
        Ok((element, scaled - element as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalNode {
    Left,
    Mid,
    Right,
}

impl LocalNode {
    pub const ALL: [LocalNode; 3] = [LocalNode::Left, LocalNode::Mid, LocalNode::Right];

    fn offset(self) -> usize {
        match self {
            LocalNode::Left => 0,
            LocalNode::Mid => 1,
            LocalNode::Right => 2,
        }
    }

    /// 1-based local index.
    pub fn index(self) -> usize {
        self.offset() + 1
    }
}

/// Value and reference-coordinate derivative of a local shape function.
pub fn basis_eval(local: LocalNode, s: f64) -> (f64, f64) {
    match local {
        LocalNode::Left => (2.0 * (s - 0.5) * (s - 1.0), 4.0 * s - 3.0),
        LocalNode::Mid => (4.0 * s * (1.0 - s), 4.0 - 8.0 * s),
        LocalNode::Right => (2.0 * s * (s - 0.5), 4.0 * s - 1.0),
    }
}

/// Shape function data at the Gauss points. The mesh is uniform, so one
/// reference table serves every element.
#[derive(Debug, Clone)]
pub struct QuadratureCache {
    mesh: Mesh,
    /// Physical weights (reference weight times element length).
    pub weights: [f64; 3],
    /// `psi[i][q]`: local shape function `i` at Gauss point `q`.
    pub psi: [[f64; 3]; 3],
    /// Physical derivatives `d psi_i / dt` at Gauss point `q`.
    pub dpsi: [[f64; 3]; 3],
}

impl QuadratureCache {
    pub fn new(mesh: Mesh) -> Self {
        let h = mesh.element_length();
        let mut psi = [[0.0; 3]; 3];
        let mut dpsi = [[0.0; 3]; 3];
        for (i, local) in LocalNode::ALL.iter().enumerate() {
            for (q, &s) in GAUSS3_POINTS.iter().enumerate() {
                let (v, d) = basis_eval(*local, s);
                psi[i][q] = v;
                dpsi[i][q] = d / h;
            }
        }
        Self {
            mesh,
            weights: GAUSS3_WEIGHTS.map(|w| w * h),
            psi,
            dpsi,
        }
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    /// Physical abscissa of Gauss point `q` in `element`.
    pub fn abscissa(&self, element: usize, q: usize) -> f64 {
        (element as f64 + GAUSS3_POINTS[q]) * self.mesh.element_length()
    }

    /// Unknown-node indices of the three local nodes of `element`.
    pub fn nodes(&self, element: usize) -> [usize; 3] {
        LocalNode::ALL.map(|l| self.mesh.global_index(element, l))
    }
}

/// Nodal values of a vector-valued periodic P2 function, node-major:
/// component `c` of unknown node `j` is `values[j * dim + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGridFunction {
    mesh: Mesh,
    dim: usize,
    values: Vec<f64>,
}

impl PeriodicGridFunction {
    pub fn new(mesh: Mesh, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != dim * mesh.n_unknown_nodes() {
            return Err(Error::invalid(format!(
                "grid function needs {} values ({} nodes x {dim} components), got {}",
                dim * mesh.n_unknown_nodes(),
                mesh.n_unknown_nodes(),
                values.len()
            )));
        }
        Ok(Self { mesh, dim, values })
    }

    pub fn zeros(mesh: Mesh, dim: usize) -> Self {
        Self {
            mesh,
            dim,
            values: vec![0.0; dim * mesh.n_unknown_nodes()],
        }
    }

    /// Every node holds `u`.
    pub fn constant(mesh: Mesh, u: &[f64]) -> Self {
        Self {
            mesh,
            dim: u.len(),
            values: u.repeat(mesh.n_unknown_nodes()),
        }
    }

    /// Samples `f` at the unknown nodes.
    pub fn from_fn<F: FnMut(f64) -> Vec<f64>>(mesh: Mesh, dim: usize, mut f: F) -> Result<Self> {
        let mut values = Vec::with_capacity(dim * mesh.n_unknown_nodes());
        for j in 0..mesh.n_unknown_nodes() {
            let v = f(mesh.node_abscissa(j));
            if v.len() != dim {
                return Err(Error::invalid(format!("sampler returned {} components, expected {dim}", v.len())));
            }
            values.extend(v);
        }
        Ok(Self { mesh, dim, values })
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_unknown_nodes()
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

    pub fn node(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// Nodal values of one component.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Self { values, ..self.clone() }
    }

    /// `(self - other) / scale`.
    pub fn divided_difference(&self, other: &Self, scale: f64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(x, y)| (x - y) / scale).collect();
        Self { values, ..self.clone() }
    }

    /// Value at reference coordinate `s` of `element`.
    pub fn eval_local(&self, element: usize, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for local in LocalNode::ALL {
            let (psi, _) = basis_eval(local, s);
            let node = self.node(self.mesh.global_index(element, local));
            for (o, x) in out.iter_mut().zip(node) {
                *o += psi * x;
            }
        }
        out
    }

    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>> {
        let (element, s) = self.mesh.locate(t)?;
        Ok(self.eval_local(element, s))
    }

    pub fn derivative(&self, t: f64) -> Result<Vec<f64>> {
        let (element, s) = self.mesh.locate(t)?;
        let h = self.mesh.element_length();
        let mut out = vec![0.0; self.dim];
        for local in LocalNode::ALL {
            let (_, dpsi) = basis_eval(local, s);
            let node = self.node(self.mesh.global_index(element, local));
            for (o, x) in out.iter_mut().zip(node) {
                *o += dpsi / h * x;
            }
        }
        Ok(out)
    }

    /// Values at the three Gauss points of `element`, `[q][c]` flattened q-major.
    pub fn at_gauss_points(&self, cache: &QuadratureCache, element: usize) -> [Vec<f64>; 3] {
        self.combine_at_gauss(cache, element, &cache.psi)
    }

    /// Time derivatives at the Gauss points of `element`.
    pub fn derivative_at_gauss_points(&self, cache: &QuadratureCache, element: usize) -> [Vec<f64>; 3] {
        self.combine_at_gauss(cache, element, &cache.dpsi)
    }

    fn combine_at_gauss(&self, cache: &QuadratureCache, element: usize, table: &[[f64; 3]; 3]) -> [Vec<f64>; 3] {
        let nodes = cache.nodes(element);
        std::array::from_fn(|q| {
            let mut out = vec![0.0; self.dim];
            for (i, &j) in nodes.iter().enumerate() {
                let w = table[i][q];
                for (o, x) in out.iter_mut().zip(self.node(j)) {
                    *o += w * x;
                }
            }
            out
        })
    }

    /// `int_0^1 <self, other> dt` by 3-point Gauss.
    pub fn l2_inner(&self, other: &Self, cache: &QuadratureCache) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.mesh.n_elements() {
            let a = self.at_gauss_points(cache, k);
            let b = other.at_gauss_points(cache, k);
            for q in 0..3 {
                acc += cache.weights[q] * a[q].iter().zip(&b[q]).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        acc
    }

    /// `int_0^1 <self, d other / dt> dt` by 3-point Gauss.
    pub fn derivative_pairing(&self, other: &Self, cache: &QuadratureCache) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.mesh.n_elements() {
            let a = self.at_gauss_points(cache, k);
            let b = other.derivative_at_gauss_points(cache, k);
            for q in 0..3 {
                acc += cache.weights[q] * a[q].iter().zip(&b[q]).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        acc
    }

    /// CSV rows `node,t,<components>`, including the aliased node at t = 1.
    pub fn write_csv<W: Write>(&self, out: &mut W, names: &[&str]) -> std::io::Result<()> {
        write!(out, "node,t")?;
        for name in names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for j in 0..self.mesh.n_geometric_nodes() {
            write!(out, "{j},{}", fmt_sig(self.mesh.node_abscissa(j)))?;
            for x in self.node(j % self.n_nodes()) {
                write!(out, ",{}", fmt_sig(*x))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Matrix `A[l][j] = int_0^1 psi_j (d psi_l / dt) dt` over the unknown nodes.
pub fn assemble_bilinear_advection(mesh: Mesh) -> DenseMatrix {
    let cache = QuadratureCache::new(mesh);
    let n = mesh.n_unknown_nodes();
    let mut a = DenseMatrix::zeros(n, n);
    for k in 0..mesh.n_elements() {
        let nodes = cache.nodes(k);
        for (l, &gl) in nodes.iter().enumerate() {
            for (i, &gi) in nodes.iter().enumerate() {
                let mut v = 0.0;
                for q in 0..3 {
                    v += cache.weights[q] * cache.psi[i][q] * cache.dpsi[l][q];
                }
                a[(gl, gi)] += v;
            }
        }
    }
    a
}

/// Load vector `int_0^1 f_c(t) psi_l(t) dt`, node-major like a grid function.
pub fn assemble_load<F, E>(mesh: Mesh, dim: usize, mut f: F) -> std::result::Result<Vec<f64>, E>
where
    F: FnMut(f64) -> std::result::Result<Vec<f64>, E>,
{
    let cache = QuadratureCache::new(mesh);
    let mut load = vec![0.0; dim * mesh.n_unknown_nodes()];
    for k in 0..mesh.n_elements() {
        let nodes = cache.nodes(k);
        for q in 0..3 {
            let fq = f(cache.abscissa(k, q))?;
            for (l, &gl) in nodes.iter().enumerate() {
                let w = cache.weights[q] * cache.psi[l][q];
                for (c, x) in fq.iter().enumerate().take(dim) {
                    load[gl * dim + c] += w * x;
                }
            }
        }
    }
    Ok(load)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn two_element_mesh() {
        let mesh = Mesh::new(2).unwrap();
        let nodes: Vec<f64> = (0..mesh.n_geometric_nodes()).map(|j| mesh.node_abscissa(j)).collect();
        assert_eq!(nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(mesh.global_index(1, LocalNode::Right), 0);
        assert!(Mesh::new(1).is_err());
    }

    #[test]
    fn twenty_elements_count() {
        let mesh = Mesh::new(20).unwrap();
        assert_eq!(mesh.n_geometric_nodes(), 41);
        assert_eq!(mesh.n_unknown_nodes(), 40);
    }

    #[test]
    fn adjacent_elements_share_nodes() {
        for n in 2..30 {
            let mesh = Mesh::new(n).unwrap();
            for k in 0..n {
                assert_eq!(
                    mesh.global_index(k, LocalNode::Right),
                    mesh.global_index((k + 1) % n, LocalNode::Left)
                );
            }
        }
    }

    #[test]
    fn lagrange_and_partition_of_unity() {
        let at = |l, s| basis_eval(l, s).0;
        assert_eq!(at(LocalNode::Left, 0.0), 1.0);
        assert_eq!(at(LocalNode::Mid, 0.5), 1.0);
        assert_eq!(at(LocalNode::Right, 1.0), 1.0);
        assert_eq!(at(LocalNode::Left, 0.5), 0.0);
        assert_eq!(at(LocalNode::Left, 1.0), 0.0);
        assert_eq!(at(LocalNode::Mid, 0.0), 0.0);
        assert_eq!(at(LocalNode::Mid, 1.0), 0.0);
        assert_eq!(at(LocalNode::Right, 0.0), 0.0);
        assert_eq!(at(LocalNode::Right, 0.5), 0.0);
        for s in [0.1, 0.37, 0.9] {
            let sum: f64 = LocalNode::ALL.iter().map(|&l| at(l, s)).sum();
            assert!((sum - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn basis_derivatives_match_finite_differences() {
        let h = 1e-6;
        for l in LocalNode::ALL {
            for s in [0.05, 0.3, 0.5, 0.77, 0.95] {
                let fd = (basis_eval(l, s + h).0 - basis_eval(l, s - h).0) / (2.0 * h);
                assert!((fd - basis_eval(l, s).1).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn cache_weights_and_partition() {
        let cache = QuadratureCache::new(Mesh::new(7).unwrap());
        assert!((cache.weights.iter().sum::<f64>() - 1.0 / 7.0).abs() < 1e-16);
        for q in 0..3 {
            let s: f64 = (0..3).map(|i| cache.psi[i][q]).sum();
            assert!((s - 1.0).abs() < 1e-15);
            let d: f64 = (0..3).map(|i| cache.dpsi[i][q]).sum();
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_endpoints_and_constants() {
        let mesh = Mesh::new(5).unwrap();
        let g = PeriodicGridFunction::constant(mesh, &[2.5, -1.0]);
        for t in [0.0, 0.13, 0.5, 0.999, 1.0] {
            let v = g.interpolate(t).unwrap();
            assert!((v[0] - 2.5).abs() < 1e-15 && (v[1] + 1.0).abs() < 1e-15);
        }
        let g = PeriodicGridFunction::from_fn(mesh, 1, |t| vec![(2.0 * PI * t).sin()]).unwrap();
        assert_eq!(g.interpolate(0.0).unwrap(), g.interpolate(1.0).unwrap());
        assert!(g.interpolate(1.0 + 1e-12).is_err());
        assert!(g.interpolate(-1e-12).is_err());
    }

    #[test]
    fn quadratic_reproduced_on_element() {
        let mesh = Mesh::new(4).unwrap();
        // element 1 spans [0.25, 0.5]; set its three nodes from a quadratic
        let p = |t: f64| 3.0 * t * t - t + 0.5;
        let mut g = PeriodicGridFunction::zeros(mesh, 1);
        for j in 2..=4 {
            g.values_mut()[j] = p(mesh.node_abscissa(j));
        }
        for s in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let t = 0.25 + 0.25 * s;
            assert!((g.interpolate(t).unwrap()[0] - p(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn advection_two_element_hand_computed() {
        // element block B[l][i] = int psi_i psi_l' ds on the reference element
        // (independent of element length):
        //   [[-1/2, -2/3,  1/6],
        //    [ 2/3,    0, -2/3],
        //    [-1/6,  2/3,  1/2]]
        let b = [[-0.5, -2.0 / 3.0, 1.0 / 6.0], [2.0 / 3.0, 0.0, -2.0 / 3.0], [-1.0 / 6.0, 2.0 / 3.0, 0.5]];
        let mut expected = [[0.0; 4]; 4];
        for idx in [[0usize, 1, 2], [2, 3, 0]] {
            for l in 0..3 {
                for i in 0..3 {
                    expected[idx[l]][idx[i]] += b[l][i];
                }
            }
        }
        let a = assemble_bilinear_advection(Mesh::new(2).unwrap());
        for l in 0..4 {
            for j in 0..4 {
                assert!((a[(l, j)] - expected[l][j]).abs() < 1e-14, "({l},{j})");
            }
        }
    }

    #[test]
    fn advection_is_skew_and_kills_constants() {
        for n in [2, 3, 8, 20] {
            let a = assemble_bilinear_advection(Mesh::new(n).unwrap());
            let m = a.rows();
            for i in 0..m {
                let row: f64 = (0..m).map(|j| a[(i, j)]).sum();
                assert!(row.abs() < 1e-13);
                for j in 0..m {
                    assert!((a[(i, j)] + a[(j, i)]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn load_of_unit_function() {
        let mesh = Mesh::new(5).unwrap();
        let load = assemble_load(mesh, 2, |_| Ok::<_, Error>(vec![1.0, 0.0])).unwrap();
        let h = 0.2;
        for j in 0..mesh.n_unknown_nodes() {
            // endpoints collect 1/6 from two elements, midpoints 4/6 from one
            let expected = if j % 2 == 0 { h / 3.0 } else { 4.0 * h / 6.0 };
            assert!((load[2 * j] - expected).abs() < 1e-15);
            assert_eq!(load[2 * j + 1], 0.0);
        }
    }

    #[test]
    fn load_of_quartic_is_exact() {
        let mesh = Mesh::new(3).unwrap();
        let f = |t: f64| t.powi(4) - 2.0 * t + 1.0;
        let load = assemble_load(mesh, 1, |t| Ok::<_, Error>(vec![f(t)])).unwrap();
        // psi_l is quadratic: integrand degree 6 would not be exact, so test the
        // total against int f = 1/5 - 1 + 1 (sum of psi is one)
        let total: f64 = load.iter().sum();
        assert!((total - 0.2).abs() < 1e-14);
        // degree-4 integrand against the midpoint basis of element 0
        let g = |t: f64| t * t;
        let load = assemble_load(mesh, 1, |t| Ok::<_, Error>(vec![g(t)])).unwrap();
        let h: f64 = 1.0 / 3.0;
        // int_0^h t^2 * 4 (t/h)(1 - t/h) dt = 4 (h^3/4 - h^3/5) = h^3/5
        assert!((load[1] - h.powi(3) / 5.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_error_is_third_order() {
        let err = |n: usize| {
            let mesh = Mesh::new(n).unwrap();
            let g = PeriodicGridFunction::from_fn(mesh, 1, |t| vec![(2.0 * PI * t).sin()]).unwrap();
            // fine composite quadrature of the squared error
            let m = 4000;
            let mut acc = 0.0;
            for i in 0..m {
                let t = (i as f64 + 0.5) / m as f64;
                let e = g.interpolate(t).unwrap()[0] - (2.0 * PI * t).sin();
                acc += e * e / m as f64;
            }
            acc.sqrt()
        };
        let e: Vec<f64> = [5, 10, 20, 40].iter().map(|&n| err(n)).collect();
        for w in e.windows(2) {
            assert!(w[0] / w[1] >= 7.5, "ratios {e:?}");
        }
    }

    #[test]
    fn pairing_of_sine_cosine_vanishes() {
        let mesh = Mesh::new(20).unwrap();
        let cache = QuadratureCache::new(mesh);
        let g = PeriodicGridFunction::from_fn(mesh, 2, |t| {
            vec![(2.0 * PI * t).sin(), (2.0 * PI * t).cos()]
        })
        .unwrap();
        assert!(g.derivative_pairing(&g, &cache).abs() < 1e-12);
    }
}
