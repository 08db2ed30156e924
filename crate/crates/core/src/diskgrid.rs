//! Discrete maps `Δ_r → ℝ^{2n}` on a Cartesian lattice clipped to the disk.
//!
//! Nodes sit at `((j − c)h, (k − c)h)` with `c = (N − 1)/2` and `h = 2r/(N − 1)`,
//! kept when `|z| ≤ r`. Membership and the interior mask are decided in integer
//! lattice units, so grids of different radius but equal `N` have identical
//! node sets and a node-for-node correspondence under `z ↦ z·r'/r`.
//!
//! Derivatives use centered differences on the interior mask
//! (`|z| ≤ r − 2h`) and one-sided differences elsewhere. The complex
//! derivatives are taken per complex component with `i` realized as `Jst`:
//! `∂/∂z = (∂x − Jst ∂y)/2`, `∂/∂z̄ = (∂x + Jst ∂y)/2`.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `∂f ≈ Σ coef[k]·f(node[k])`; unused slots carry a zero coefficient.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    node: [u32; 3],
    coef: [f64; 3],
}

/// Lattice nodes of the closed disk `|z| ≤ r`.
#[derive(Debug)]
pub struct DiskGrid {
    r: f64,
    n_axis: usize,
    h: f64,
    nodes: Vec<Complex64>,
    lattice: Vec<(u32, u32)>,
    index: Vec<Option<u32>>,
    interior: Vec<bool>,
    origin: usize,
    dx: Vec<Stencil>,
    dy: Vec<Stencil>,
}

/// Builds the grid of `n_axis` lattice points per axis on `Δ_r`.
pub fn make_grid(r: f64, n_axis: usize) -> Result<Arc<DiskGrid>> {
    DiskGrid::new(r, n_axis).map(Arc::new)
}

impl DiskGrid {
    pub fn new(r: f64, n_axis: usize) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidGrid(format!("radius must be positive and finite, got {r}")));
        }
        if n_axis % 2 == 0 || n_axis < 3 {
            return Err(Error::InvalidGrid(format!("node count per axis must be odd and ≥ 3, got {n_axis}")));
        }
        let c = (n_axis - 1) / 2;
        let h = 2.0 * r / (n_axis - 1) as f64;
        let ci = c as i64;
        let inside = |j: i64, k: i64| (j - ci).pow(2) + (k - ci).pow(2) <= ci * ci;
        let interior_at = |j: i64, k: i64| ci >= 2 && (j - ci).pow(2) + (k - ci).pow(2) <= (ci - 2).pow(2);

        let mut nodes = Vec::new();
        let mut lattice = Vec::new();
        let mut index = vec![None; n_axis * n_axis];
        let mut interior = Vec::new();
        for j in 0..n_axis {
            for k in 0..n_axis {
                let (ji, ki) = (j as i64, k as i64);
                if inside(ji, ki) {
                    index[j * n_axis + k] = Some(nodes.len() as u32);
                    nodes.push(Complex64::new((ji - ci) as f64 * h, (ki - ci) as f64 * h));
                    lattice.push((j as u32, k as u32));
                    interior.push(interior_at(ji, ki));
                }
            }
        }
        let origin = index[c * n_axis + c].expect("origin is always a node") as usize;
        let mut grid = DiskGrid { r, n_axis, h, nodes, lattice, index, interior, origin, dx: Vec::new(), dy: Vec::new() };
        grid.dx = (0..grid.len()).map(|i| grid.stencil(i, true)).collect();
        grid.dy = (0..grid.len()).map(|i| grid.stencil(i, false)).collect();
        Ok(grid)
    }

    fn at(&self, j: i64, k: i64) -> Option<usize> {
        let n = self.n_axis as i64;
        if j < 0 || k < 0 || j >= n || k >= n {
            return None;
        }
        self.index[(j * n + k) as usize].map(|i| i as usize)
    }

    fn own_stencil(&self, node: usize, along_x: bool) -> Option<Stencil> {
        let (j, k) = self.lattice[node];
        let (j, k) = (j as i64, k as i64);
        let step = |s: i64| if along_x { self.at(j + s, k) } else { self.at(j, k + s) };
        let me = node as u32;
        let h = self.h;
        if self.interior[node] {
            if let (Some(f), Some(b)) = (step(1), step(-1)) {
                return Some(Stencil { node: [f as u32, b as u32, me], coef: [0.5 / h, -0.5 / h, 0.0] });
            }
        }
        // one-sided, preferring the side facing the centre
        let c = ((self.n_axis - 1) / 2) as i64;
        let toward = if (if along_x { j } else { k }) > c { -1 } else { 1 };
        for s in [toward, -toward] {
            if let (Some(a), Some(b)) = (step(s), step(2 * s)) {
                let sf = s as f64;
                return Some(Stencil { node: [me, a as u32, b as u32], coef: [-1.5 * sf / h, 2.0 * sf / h, -0.5 * sf / h] });
            }
        }
        for s in [toward, -toward] {
            if let Some(a) = step(s) {
                let sf = s as f64;
                return Some(Stencil { node: [me, a as u32, me], coef: [-sf / h, sf / h, 0.0] });
            }
        }
        None
    }

    // Nodes on the rim with no neighbour along an axis borrow the stencil of the
    // nearest node toward the centre along the other axis.
    fn stencil(&self, node: usize, along_x: bool) -> Stencil {
        let mut cur = node;
        loop {
            if let Some(s) = self.own_stencil(cur, along_x) {
                return s;
            }
            let (j, k) = self.lattice[cur];
            let c = ((self.n_axis - 1) / 2) as i64;
            let (j, k) = (j as i64, k as i64);
            let next = if along_x { self.at(j, k - (k - c).signum()) } else { self.at(j - (j - c).signum(), k) };
            cur = next.expect("walking toward the centre stays on the grid");
        }
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn n_axis(&self) -> usize {
        self.n_axis
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Complex64 {
        self.nodes[i]
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior[i]
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.interior[i])
    }

    /// Lattice coordinates `(j, k)` of a node.
    pub fn lattice_coords(&self, i: usize) -> (usize, usize) {
        let (j, k) = self.lattice[i];
        (j as usize, k as usize)
    }

    /// Node at lattice coordinates, if retained.
    pub fn node_at(&self, j: i64, k: i64) -> Option<usize> {
        self.at(j, k)
    }

    /// Difference stencil used for `∂x` (or `∂y`) at a node, as
    /// `(node, coefficient)` pairs.
    pub fn stencil_at(&self, node: usize, along_x: bool) -> [(usize, f64); 3] {
        let s = if along_x { self.dx[node] } else { self.dy[node] };
        [0, 1, 2].map(|k| (s.node[k] as usize, s.coef[k]))
    }

    /// Same radius and resolution.
    pub fn same_as(&self, other: &DiskGrid) -> bool {
        self.n_axis == other.n_axis && self.r == other.r
    }

    fn fractional(&self, z: Complex64) -> (f64, f64) {
        let c = ((self.n_axis - 1) / 2) as f64;
        let snap = |v: f64| if (v - v.round()).abs() < 1e-11 { v.round() } else { v };
        (snap(z.re / self.h + c), snap(z.im / self.h + c))
    }
}

/// A map from a disk grid into `ℝ^dim`, stored node-major.
#[derive(Debug, Clone)]
pub struct DiskMap {
    grid: Arc<DiskGrid>,
    dim: usize,
    values: Vec<f64>,
}

impl DiskMap {
    pub fn zeros(grid: Arc<DiskGrid>, dim: usize) -> Self {
        let values = vec![0.0; grid.len() * dim];
        Self { grid, dim, values }
    }

    pub fn constant(grid: Arc<DiskGrid>, p: &[f64]) -> Self {
        let values = (0..grid.len()).flat_map(|_| p.iter().copied()).collect();
        Self { grid, dim: p.len(), values }
    }

    pub fn from_values(grid: Arc<DiskGrid>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * dim {
            return Err(Error::DimensionMismatch { expected: grid.len() * dim, got: values.len() });
        }
        Ok(Self { grid, dim, values })
    }

    pub fn from_fn<F: Fn(Complex64) -> Vec<f64>>(grid: Arc<DiskGrid>, dim: usize, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for &z in grid.nodes() {
            let v = f(z);
            assert_eq!(v.len(), dim, "from_fn closure returned the wrong dimension");
            values.extend_from_slice(&v);
        }
        Self { grid, dim, values }
    }

    /// Builds a map from its complex components.
    pub fn from_complex_fn<F: Fn(Complex64) -> Vec<Complex64>>(grid: Arc<DiskGrid>, n: usize, f: F) -> Self {
        Self::from_fn(grid, 2 * n, |z| {
            let c = f(z);
            c.iter().flat_map(|w| [w.re, w.im]).collect()
        })
    }

    pub fn grid(&self) -> &Arc<DiskGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn value_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn at_origin(&self) -> &[f64] {
        self.value(self.grid.origin())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn scaled(&self, a: f64) -> DiskMap {
        DiskMap { grid: self.grid.clone(), dim: self.dim, values: self.values.iter().map(|x| a * x).collect() }
    }

    /// Applies `f` to every value vector.
    pub fn map_values<F: Fn(&[f64]) -> Vec<f64>>(&self, f: F) -> DiskMap {
        let mut values = Vec::with_capacity(self.values.len());
        let mut dim = self.dim;
        for v in self.values.chunks_exact(self.dim) {
            let w = f(v);
            dim = w.len();
            values.extend_from_slice(&w);
        }
        DiskMap { grid: self.grid.clone(), dim, values }
    }

    fn check_compatible(&self, other: &DiskMap) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }

    /// `max_z ‖self(z) − other(z)‖` over all nodes.
    pub fn sup_distance(&self, other: &DiskMap) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .values
            .chunks_exact(self.dim)
            .zip(other.values.chunks_exact(self.dim))
            .map(|(a, b)| norm(a.iter().zip(b).map(|(x, y)| x - y)))
            .fold(0.0, f64::max))
    }

    /// `max_z ‖self(z)‖` over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.chunks_exact(self.dim).map(|a| norm(a.iter().copied())).fold(0.0, f64::max)
    }

    /// `max ‖self(z)‖` over the interior mask.
    pub fn interior_sup_norm(&self) -> f64 {
        self.grid.interior_nodes().map(|i| norm(self.value(i).iter().copied())).fold(0.0, f64::max)
    }

    fn apply_stencil(&self, s: Stencil, out: &mut [f64]) {
        let [a, b, c] = s.node.map(|i| i as usize * self.dim);
        let [wa, wb, wc] = s.coef;
        for k in 0..self.dim {
            out[k] = wa * self.values[a + k] + wb * self.values[b + k] + wc * self.values[c + k];
        }
    }

    pub fn dx_at(&self, node: usize, out: &mut [f64]) {
        self.apply_stencil(self.grid.dx[node], out);
    }

    pub fn dy_at(&self, node: usize, out: &mut [f64]) {
        self.apply_stencil(self.grid.dy[node], out);
    }

    /// `∂/∂z` at one node.
    pub fn dz_at(&self, node: usize, out: &mut [f64]) {
        wirtinger_at(self, node, out, false)
    }

    /// `∂/∂z̄` at one node.
    pub fn dzbar_at(&self, node: usize, out: &mut [f64]) {
        wirtinger_at(self, node, out, true)
    }

    /// `|f'(z)| = ‖∂f/∂x‖` at one node.
    pub fn derivative_norm_at(&self, node: usize) -> f64 {
        let mut buf = vec![0.0; self.dim];
        self.dx_at(node, &mut buf);
        norm(buf.iter().copied())
    }

    fn pointwise<F: Fn(&DiskMap, usize, &mut [f64])>(&self, f: F) -> DiskMap {
        let mut values = vec![0.0; self.values.len()];
        for (i, out) in values.chunks_exact_mut(self.dim).enumerate() {
            f(self, i, out);
        }
        DiskMap { grid: self.grid.clone(), dim: self.dim, values }
    }

    pub fn d_dx(&self) -> DiskMap {
        self.pointwise(|u, i, out| u.dx_at(i, out))
    }

    pub fn d_dy(&self) -> DiskMap {
        self.pointwise(|u, i, out| u.dy_at(i, out))
    }

    pub fn to_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["x".to_string(), "y".to_string()];
        header.extend((0..self.dim).map(|c| format!("v{c}")));
        wr.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for (i, z) in self.grid.nodes().iter().enumerate() {
            let mut rec = vec![crate::report::fmt_f64(z.re), crate::report::fmt_f64(z.im)];
            rec.extend(self.value(i).iter().map(|&v| crate::report::fmt_f64(v)));
            wr.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_envelope(&self) -> DiskMapEnvelope {
        DiskMapEnvelope {
            grid: GridMeta { r: self.grid.r, n_axis: self.grid.n_axis, h: self.grid.h, node_count: self.grid.len() },
            interpolation: "bilinear".into(),
            dim: self.dim,
            nodes: self
                .grid
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    let mut row = vec![z.re, z.im];
                    row.extend_from_slice(self.value(i));
                    row
                })
                .collect(),
        }
    }

    pub fn from_envelope(env: &DiskMapEnvelope) -> Result<DiskMap> {
        let grid = make_grid(env.grid.r, env.grid.n_axis)?;
        if env.nodes.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: env.nodes.len() });
        }
        let mut values = Vec::with_capacity(grid.len() * env.dim);
        for (row, z) in env.nodes.iter().zip(grid.nodes()) {
            if row.len() != env.dim + 2 || (row[0] - z.re).abs() > 1e-12 || (row[1] - z.im).abs() > 1e-12 {
                return Err(Error::Config("disk map node rows do not match the grid".into()));
            }
            values.extend_from_slice(&row[2..]);
        }
        DiskMap::from_values(grid, env.dim, values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub r: f64,
    pub n_axis: usize,
    pub h: f64,
    pub node_count: usize,
}

/// JSON form of a [`DiskMap`]: one row `[x, y, v_0, …]` per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskMapEnvelope {
    pub grid: GridMeta,
    pub interpolation: String,
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
}

pub(crate) fn norm<I: Iterator<Item = f64>>(it: I) -> f64 {
    it.map(|x| x * x).sum::<f64>().sqrt()
}

fn wirtinger_at(u: &DiskMap, node: usize, out: &mut [f64], conj: bool) {
    let d = u.dim;
    let mut ux = vec![0.0; d];
    let mut uy = vec![0.0; d];
    u.dx_at(node, &mut ux);
    u.dy_at(node, &mut uy);
    for k in 0..d / 2 {
        let (a, b) = (ux[2 * k], ux[2 * k + 1]);
        let (c, e) = (uy[2 * k], uy[2 * k + 1]);
        // Jst (c, e) = (−e, c)
        if conj {
            out[2 * k] = 0.5 * (a - e);
            out[2 * k + 1] = 0.5 * (b + c);
        } else {
            out[2 * k] = 0.5 * (a + e);
            out[2 * k + 1] = 0.5 * (b - c);
        }
    }
}

/// `∂u/∂z` at every node.
pub fn d_dz(u: &DiskMap) -> DiskMap {
    u.pointwise(|u, i, out| u.dz_at(i, out))
}

/// `∂u/∂z̄` at every node.
pub fn d_dzbar(u: &DiskMap) -> DiskMap {
    u.pointwise(|u, i, out| u.dzbar_at(i, out))
}

fn bilinear_cell(u: &DiskMap, j0: i64, k0: i64, tx: f64, ty: f64) -> Option<Vec<f64>> {
    let g = &u.grid;
    let c00 = g.at(j0, k0)?;
    let c10 = g.at(j0 + 1, k0)?;
    let c01 = g.at(j0, k0 + 1)?;
    let c11 = g.at(j0 + 1, k0 + 1)?;
    let w = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
    let mut out = vec![0.0; u.dim];
    for (node, wt) in [c00, c10, c01, c11].into_iter().zip(w) {
        if wt != 0.0 {
            for (o, v) in out.iter_mut().zip(u.value(node)) {
                *o += wt * v;
            }
        }
    }
    Some(out)
}

/// Bilinear interpolation from the four surrounding nodes; needs `|z| ≤ r − h`.
pub fn eval_interp(u: &DiskMap, z: Complex64) -> Result<Vec<f64>> {
    let g = &u.grid;
    if z.norm() > g.r - g.h + 1e-12 || !z.norm().is_finite() {
        return Err(Error::OutsideInterpolationRange((z.re, z.im)));
    }
    let (fx, fy) = g.fractional(z);
    let last = (g.n_axis - 2) as i64;
    let j0 = (fx.floor() as i64).clamp(0, last);
    let k0 = (fy.floor() as i64).clamp(0, last);
    bilinear_cell(u, j0, k0, fx - j0 as f64, fy - k0 as f64).ok_or(Error::OutsideInterpolationRange((z.re, z.im)))
}

/// Bilinear evaluation that, near the rim, extends the nearest complete cell.
///
/// Exact for affine maps anywhere in the closed disk.
pub fn eval_extended(u: &DiskMap, z: Complex64) -> Result<Vec<f64>> {
    if let Ok(v) = eval_interp(u, z) {
        return Ok(v);
    }
    let g = &u.grid;
    if z.norm() > g.r * (1.0 + 1e-9) {
        return Err(Error::OutsideInterpolationRange((z.re, z.im)));
    }
    let (fx, fy) = g.fractional(z);
    let last = (g.n_axis - 2) as i64;
    let (mut j0, mut k0) = ((fx.floor() as i64).clamp(0, last), (fy.floor() as i64).clamp(0, last));
    let c = ((g.n_axis - 1) / 2) as i64;
    // step the cell toward the centre until all four corners exist
    for _ in 0..g.n_axis {
        if let Some(v) = bilinear_cell(u, j0, k0, fx - j0 as f64, fy - k0 as f64) {
            return Ok(v);
        }
        let (dj, dk) = ((j0 as f64 + 0.5) - c as f64, (k0 as f64 + 0.5) - c as f64);
        if dj.abs() >= dk.abs() {
            j0 -= dj.signum() as i64;
        } else {
            k0 -= dk.signum() as i64;
        }
    }
    Err(Error::OutsideInterpolationRange((z.re, z.im)))
}

/// Tensor-product cubic Lagrange interpolation on the 4×4 surrounding nodes,
/// exact for polynomials of degree ≤ 3 in each variable. Falls back to
/// [`eval_extended`] where the stencil is incomplete.
pub fn eval_cubic(u: &DiskMap, z: Complex64) -> Result<Vec<f64>> {
    let g = &u.grid;
    let (fx, fy) = g.fractional(z);
    let last = (g.n_axis - 2) as i64;
    let j0 = (fx.floor() as i64).clamp(0, last);
    let k0 = (fy.floor() as i64).clamp(0, last);
    let (tx, ty) = (fx - j0 as f64, fy - k0 as f64);
    let lagrange = |t: f64| {
        [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ]
    };
    let (wx, wy) = (lagrange(tx), lagrange(ty));
    let mut out = vec![0.0; u.dim];
    for (a, wa) in wx.iter().enumerate() {
        for (b, wb) in wy.iter().enumerate() {
            let Some(node) = g.at(j0 - 1 + a as i64, k0 - 1 + b as i64) else {
                return eval_extended(u, z);
            };
            let w = wa * wb;
            for (o, v) in out.iter_mut().zip(u.value(node)) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

fn check_inside(z: Complex64, r: f64) -> Result<()> {
    if z.norm() < r {
        Ok(())
    } else {
        Err(Error::OutsideDisk { point: (z.re, z.im), radius: r })
    }
}

/// Distance of the Poincaré metric on `Δ_r`: `arctanh(r|a − b| / |r² − ā b|)`.
pub fn poincare_distance(a: Complex64, b: Complex64, r: f64) -> Result<f64> {
    check_inside(a, r)?;
    check_inside(b, r)?;
    if a == b {
        return Ok(0.0);
    }
    let ratio = r * (a - b).norm() / (r * r - a.conj() * b).norm();
    Ok(ratio.min(1.0).atanh())
}

/// The involutive automorphism of `Δ_r` exchanging `0` and `z0`,
/// `L(z) = r²(z0 − z)/(r² − z̄0 z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusAutomorphism {
    pub z0: Complex64,
    pub r: f64,
}

pub fn mobius_swap(z0: Complex64, r: f64) -> Result<MobiusAutomorphism> {
    check_inside(z0, r)?;
    Ok(MobiusAutomorphism { z0, r })
}

impl MobiusAutomorphism {
    pub fn apply(&self, z: Complex64) -> Complex64 {
        let r2 = self.r * self.r;
        r2 * (self.z0 - z) / (r2 - self.z0.conj() * z)
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let r2 = self.r * self.r;
        let den = r2 - self.z0.conj() * z;
        -r2 * (r2 - self.z0.norm_sqr()) / (den * den)
    }
}

/// Poincaré weight `(r² − |z|²)/r²` of `Δ_r`.
pub fn poincare_weight(z: Complex64, r: f64) -> f64 {
    (r * r - z.norm_sqr()) / (r * r)
}

/// `max |f'(z)|(r² − |z|²)/r²` over the interior mask and the node attaining it.
///
/// Ties go to the smallest `|z|`, then to the lexicographically first node.
pub fn sup_poincare_derivative(f: &DiskMap) -> (f64, usize) {
    let g = f.grid();
    let mut best = (0.0_f64, g.origin());
    let mut first = true;
    for i in g.interior_nodes() {
        let z = g.node(i);
        let s = f.derivative_norm_at(i) * poincare_weight(z, g.radius());
        let better = first
            || s > best.0
            || (s == best.0 && z.norm_sqr() < g.node(best.1).norm_sqr());
        if better {
            best = (s, i);
            first = false;
        }
    }
    best
}
