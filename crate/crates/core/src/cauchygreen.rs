//! The solid Cauchy transform on `Δ_r`,
//! `(Pφ)(z) = (1/π) ∫_Δ φ(ζ)/(z − ζ) dA(ζ)`, normalized so that `∂̄ ∘ P = Id`.
//!
//! Each node owns the square cell of side `h` centred on it, and on the cell
//! `φ` is replaced by its first-order Taylor polynomial
//! `φ(c) + ∂φ(c)(ζ − c) + ∂̄φ(c) conj(ζ − c)`, with the derivatives taken from
//! the grid's difference stencils. For cells inside the disk the integrals of
//! `1` and `conj(ζ − c)` against the kernel depend only on the lattice offset,
//! so they live in two tables of size `(2N − 1)²` (the `ζ − c` term reduces
//! to the first):
//!
//! * offsets within two cells are integrated exactly (both vanish for the self
//!   cell by symmetry);
//! * farther offsets use the multipole expansion of the square, starting with
//!   the midpoint rule `h²/(π(z − ζ_c))`.
//!
//! Cells crossing the circle, including those of lattice points just outside
//! the disk, are clipped to it and integrated on their exact geometry:
//! Gauss–Legendre in `x` with the `y` integral in closed form, expanded in
//! multipole moments for distant targets. Their Taylor polynomial is taken at
//! the clipped cell's centroid, with value and derivatives interpolated from
//! nearby nodes. The per-cell weights form two dense `regions × nodes` blocks.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::diskgrid::{d_dz, d_dzbar, norm, DiskGrid, DiskMap};
use crate::error::{Error, Result};

/// Offsets with `max(|dj|, |dk|) ≤ NEAR_CELLS` use the exact cell integral.
pub const NEAR_CELLS: i64 = 2;
const MOMENTS: usize = 25;
// Targets closer than this multiple of a region's radius are integrated directly.
const MULTIPOLE_RATIO: f64 = 2.5;
const GL_PANELS: usize = 4;
const GRADED_CUTS: i32 = 30;

const GL_X: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_8,
    0.755_404_408_355_003,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL_W: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_095,
];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub struct CGOperator {
    grid: Arc<DiskGrid>,
    width: usize,
    // offset tables for `∫ dA/(z − ζ)` and `∫ conj(ζ − c)/(z − ζ) dA`, stored in
    // reverse so that a lattice row of sources reads them forwards
    w_re: Vec<f64>,
    w_im: Vec<f64>,
    c_re: Vec<f64>,
    c_im: Vec<f64>,
    // transpose of the gradient stencils: (node, ∂ coefficient, ∂̄ coefficient)
    grad_terms: Vec<Vec<(usize, Complex64, Complex64)>>,
    // 1 for nodes whose cell lies inside the disk, 0 for clipped cells
    bulk: Vec<f64>,
    area: Vec<f64>,
    // (first node, j, first k, count) per lattice row
    rows: Vec<(usize, usize, usize, usize)>,
    regions: Vec<RegionData>,
    // (region, term) pairs in which each node appears
    node_terms: Vec<Vec<(usize, usize)>>,
    // target-major dense blocks: [target * regions.len() + region]
    w0: Vec<Complex64>,
    w2: Vec<Complex64>,
}

/// A clipped cell as seen by the operator. On the cell
/// `φ(ζ) ≈ φ_R + a_R (ζ − ĉ) + b_R conj(ζ − ĉ)` with `ĉ` its centroid, where
/// `(φ_R, a_R, b_R) = Σ coef · φ(node)`.
#[derive(Debug, Clone)]
struct RegionData {
    centroid: Complex64,
    // conj(ĉ − cell centre)
    shift_conj: Complex64,
    // area / π
    mass: f64,
    terms: Vec<(usize, [Complex64; 3])>,
}

// Antiderivatives with ∂x∂y F = x/(x²+y²) and ∂x∂y G = y/(x²+y²).
fn f_anti(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    let log_term = if y == 0.0 { 0.0 } else { 0.5 * y * r2.ln() };
    let atan_term = if x == 0.0 { 0.0 } else { x * (y / x).atan() };
    log_term - y + atan_term
}

fn g_anti(x: f64, y: f64) -> f64 {
    f_anti(y, x)
}

/// `∫∫_{[x1,x2]×[y1,y2]} dA(w)/w` in closed form.
pub fn rectangle_integral(x1: f64, x2: f64, y1: f64, y2: f64) -> Complex64 {
    let corners = |f: fn(f64, f64) -> f64| f(x2, y2) - f(x1, y2) - f(x2, y1) + f(x1, y1);
    Complex64::new(corners(f_anti), -corners(g_anti))
}

/// Exact `(1/π) ∫_cell dA(w)/w` for the square of side `h` centred at `d`.
pub fn exact_cell_weight(d: Complex64, h: f64) -> Complex64 {
    if d == ZERO {
        return ZERO;
    }
    let half = 0.5 * h;
    rectangle_integral(d.re - half, d.re + half, d.im - half, d.im + half) / PI
}

/// Midpoint weight `h²/(π d)`.
pub fn midpoint_cell_weight(d: Complex64, h: f64) -> Complex64 {
    h * h / (PI * d)
}

/// A vertical segment `{x} × [lo, hi]` carrying quadrature weight `w` in `x`.
#[derive(Debug, Clone, Copy)]
struct Strip {
    x: f64,
    w: f64,
    lo: f64,
    hi: f64,
}

fn gauss_panels(a: f64, b: f64, panels: usize, mut push: impl FnMut(f64, f64)) {
    let step = (b - a) / panels as f64;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * step;
        let half = 0.5 * step;
        for (x, w) in GL_X.iter().zip(GL_W) {
            push(mid - half * x, half * w);
            push(mid + half * x, half * w);
        }
    }
}

/// Strips covering `[x1,x2]×[y1,y2] ∩ {|ζ| ≤ r}` (or its complement in the
/// rectangle when `inside` is false). With a `focus`, the panels are graded
/// geometrically toward that abscissa, where the integrand may be singular.
fn clipped_strips(x1: f64, x2: f64, y1: f64, y2: f64, r: f64, inside: bool, focus: Option<f64>) -> Vec<Strip> {
    let mut cuts = vec![x1, x2];
    if let Some(xf) = focus {
        cuts.push(xf);
        for k in 1..=GRADED_CUTS {
            let d = (x2 - x1) * 0.5f64.powi(k);
            cuts.extend([xf - d, xf + d]);
        }
    }
    for y in [y1, y2] {
        if y.abs() < r {
            let s = (r * r - y * y).sqrt();
            cuts.extend([-s, s]);
        }
    }
    cuts.extend([-r, r]);
    cuts.retain(|&x| x >= x1 && x <= x2);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();

    let half_chord = |x: f64| (r * r - x * x).max(0.0).sqrt();
    let intervals = |x: f64| -> Vec<(f64, f64)> {
        let s = half_chord(x);
        if inside {
            let (lo, hi) = (y1.max(-s), y2.min(s));
            if hi > lo { vec![(lo, hi)] } else { vec![] }
        } else if x.abs() >= r {
            vec![(y1, y2)]
        } else {
            [(y1, y2.min(-s)), (y1.max(s), y2)].into_iter().filter(|(lo, hi)| hi > lo).collect()
        }
    };

    let mut strips = Vec::new();
    for win in cuts.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b <= a || intervals(0.5 * (a + b)).is_empty() {
            continue;
        }
        // the chord has a square-root endpoint at x = ±r; x = ±r ∓ u² smooths it
        let mut push = |x: f64, w: f64| {
            for (lo, hi) in intervals(x) {
                strips.push(Strip { x, w, lo, hi });
            }
        };
        let panels = if b - a > 0.25 * (x2 - x1) { GL_PANELS } else { 1 };
        if b == r || a == -r {
            let (edge, sign, far) = if b == r { (r, -1.0, a) } else { (-r, 1.0, b) };
            gauss_panels(0.0, (far - edge).abs().sqrt(), panels, |u, w| push(edge + sign * u * u, 2.0 * u * w));
        } else {
            gauss_panels(a, b, panels, &mut push);
        }
    }
    strips
}

/// `(1/π) ∫ dA/(z − ζ)` and `(1/π) ∫ conj(ζ − c)/(z − ζ) dA` over the strips.
fn strip_weights(strips: &[Strip], z: Complex64, c: Complex64) -> (Complex64, Complex64) {
    let (mut w0, mut v) = (ZERO, ZERO);
    for s in strips {
        // with u = z − ζ along the segment (which avoids 0):
        // ∫ dy/u = i·ln u,  ∫ conj(u)/u dy = 2i·Re(u)·ln u − y
        let alpha = z.re - s.x;
        let top = Complex64::new(alpha, z.im - s.hi);
        let bottom = Complex64::new(alpha, z.im - s.lo);
        let log = (top / bottom).ln();
        w0 += s.w * Complex64::i() * log;
        v += s.w * (Complex64::new(0.0, 2.0 * alpha) * log - (s.hi - s.lo));
    }
    let w0 = w0 / PI;
    (w0, (z - c).conj() * w0 - v / PI)
}

/// `m_k = (1/π) ∫ (ζ − c)^k dA` and `n_k = (1/π) ∫ conj(ζ − c)(ζ − c)^k dA`.
fn strip_moments(strips: &[Strip], c: Complex64) -> ([Complex64; MOMENTS], [Complex64; MOMENTS]) {
    let mut m = [ZERO; MOMENTS];
    let mut n = [ZERO; MOMENTS];
    for s in strips {
        let x = s.x - c.re;
        let top = Complex64::new(x, s.hi - c.im);
        let bottom = Complex64::new(x, s.lo - c.im);
        let (mut pt, mut pb) = (top, bottom);
        for k in 0..MOMENTS {
            // ∫ w^k dY = w^{k+1}/(i(k+1)) and conj(w) = 2X − w
            let first = (pt - pb) / Complex64::new(0.0, (k + 1) as f64);
            let (nt, nb) = (pt * top, pb * bottom);
            let second = (nt - nb) / Complex64::new(0.0, (k + 2) as f64);
            m[k] += s.w * first;
            n[k] += s.w * (2.0 * x * first - second);
            pt = nt;
            pb = nb;
        }
    }
    (m.map(|v| v / PI), n.map(|v| v / PI))
}

fn multipole(m: &[Complex64; MOMENTS], d: Complex64) -> Complex64 {
    let t = d.inv();
    m.iter().rev().fold(ZERO, |acc, &mk| (acc + mk) * t)
}
struct Region {
    centre: Complex64,
    // retained node whose own cell this is
    owner: Option<usize>,
    strips: Vec<Strip>,
    // part of the owner's cell outside the disk
    outside: Vec<Strip>,
    data: RegionData,
}

/// Clipped cells: retained nodes whose cell crosses the circle, and lattice
/// points outside the disk whose cell still overlaps it.
fn boundary_regions(grid: &DiskGrid) -> Vec<Region> {
    let n = grid.n_axis() as i64;
    let c = (n - 1) / 2;
    let (h, r) = (grid.spacing(), grid.radius());
    let half = 0.5 * h;
    let mut regions = Vec::new();
    for j in 0..n {
        for k in 0..n {
            let z = Complex64::new((j - c) as f64 * h, (k - c) as f64 * h);
            let far = (z.re.abs() + half).hypot(z.im.abs() + half);
            let near = (z.re.abs() - half).max(0.0).hypot((z.im.abs() - half).max(0.0));
            if far <= r || near >= r {
                continue;
            }
            let owner = grid.node_at(j, k);
            let strips = clipped_strips(z.re - half, z.re + half, z.im - half, z.im + half, r, true, None);
            let outside = match owner {
                Some(_) => clipped_strips(z.re - half, z.re + half, z.im - half, z.im + half, r, false, Some(z.re)),
                None => Vec::new(),
            };
            let (m, _) = strip_moments(&strips, z);
            let centroid = z + m[1] / m[0];
            let data = RegionData {
                centroid,
                shift_conj: (centroid - z).conj(),
                mass: m[0].re,
                terms: taylor_terms(grid, &centroid_split(grid, centroid)),
            };
            regions.push(Region { centre: z, owner, strips, outside, data });
        }
    }
    regions
}

/// Weights on the nearest node and one neighbour per axis that interpolate
/// linear functions exactly at `p`.
fn centroid_split(grid: &DiskGrid, p: Complex64) -> Vec<(usize, f64)> {
    let h = grid.spacing();
    let c = ((grid.n_axis() - 1) / 2) as i64;
    let (pj, pk) = ((p.re / h).round() as i64 + c, (p.im / h).round() as i64 + c);
    let base = (-2..=2)
        .flat_map(|dj| (-2..=2).map(move |dk| (pj + dj, pk + dk)))
        .filter_map(|(a, b)| grid.node_at(a, b).map(|i| (i, a, b)))
        .min_by(|x, y| (grid.node(x.0) - p).norm().total_cmp(&(grid.node(y.0) - p).norm()).then(x.0.cmp(&y.0)))
        .expect("a clipped cell has a retained node nearby");
    let (s0, j0, k0) = base;
    let delta = (p - grid.node(s0)) / h;
    let mut split = vec![(s0, 1.0)];
    for (offset, along_x) in [(delta.re, true), (delta.im, false)] {
        if offset == 0.0 {
            continue;
        }
        let step = |sgn: i64| if along_x { grid.node_at(j0 + sgn, k0) } else { grid.node_at(j0, k0 + sgn) };
        let sgn = offset.signum() as i64;
        let pick = step(sgn).map(|i| (i, offset.abs())).or_else(|| step(-sgn).map(|i| (i, -offset.abs())));
        if let Some((i, a)) = pick {
            split[0].1 -= a;
            split.push((i, a));
        }
    }
    split
}

/// Coefficients of `(φ, ∂φ, ∂̄φ)` at a point from interpolation weights on
/// nodes, using the grid's difference stencils for the derivatives.
fn taylor_terms(grid: &DiskGrid, split: &[(usize, f64)]) -> Vec<(usize, [Complex64; 3])> {
    let mut acc: BTreeMap<usize, [Complex64; 3]> = BTreeMap::new();
    for &(t, alpha) in split {
        acc.entry(t).or_insert([ZERO; 3])[0] += alpha;
        // ∂ = (∂x − i∂y)/2, ∂̄ = (∂x + i∂y)/2
        for (along_x, dir) in [(true, Complex64::new(1.0, 0.0)), (false, Complex64::i())] {
            for (node, coef) in grid.stencil_at(t, along_x) {
                let c = 0.5 * alpha * coef;
                let e = acc.entry(node).or_insert([ZERO; 3]);
                e[1] += c * dir.conj();
                e[2] += c * dir;
            }
        }
    }
    acc.into_iter().collect()
}

const CACHE_SLOTS: usize = 3;
static CACHE: Mutex<Vec<Arc<CGOperator>>> = Mutex::new(Vec::new());

/// The operator for `grid`, built once per `(r, N)` and shared. Operators for
/// equal `(r, N)` are identical, so sharing never changes results.
pub fn cg_shared(grid: &Arc<DiskGrid>) -> Arc<CGOperator> {
    let mut cache = CACHE.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(pos) = cache.iter().position(|op| op.grid.same_as(grid)) {
        let op = cache.remove(pos);
        cache.push(op.clone());
        return op;
    }
    let op = Arc::new(cg_build(grid));
    if cache.len() == CACHE_SLOTS {
        cache.remove(0);
    }
    cache.push(op.clone());
    op
}

/// Precomputes the offset tables and the clipped-cell blocks for `grid`.
pub fn cg_build(grid: &Arc<DiskGrid>) -> CGOperator {
    let n = grid.n_axis();
    let width = 2 * n - 1;
    let h = grid.spacing();
    let half = 0.5 * h;
    let off = (n - 1) as i64;
    let square = clipped_strips(-half, half, -half, half, f64::INFINITY, true, None);
    let (sq_m, sq_n) = strip_moments(&square, ZERO);
    let tables: Vec<(Complex64, Complex64)> = (0..width * width)
        .into_par_iter()
        .rev()
        .map(|idx| {
            let dj = (idx / width) as i64 - off;
            let dk = (idx % width) as i64 - off;
            let d = Complex64::new(dj as f64 * h, dk as f64 * h);
            if dj == 0 && dk == 0 {
                (ZERO, ZERO)
            } else if dj.abs().max(dk.abs()) <= NEAR_CELLS {
                let (_, conj) = strip_weights(&square, d, ZERO);
                (exact_cell_weight(d, h), conj)
            } else {
                (multipole(&sq_m, d), multipole(&sq_n, d))
            }
        })
        .collect();
    let w_re = tables.iter().map(|t| t.0.re).collect();
    let w_im = tables.iter().map(|t| t.0.im).collect();
    let c_re = tables.iter().map(|t| t.1.re).collect();
    let c_im = tables.iter().map(|t| t.1.im).collect();

    let mut grad_terms: Vec<Vec<(usize, Complex64, Complex64)>> = vec![Vec::new(); grid.len()];
    for t in 0..grid.len() {
        // ∂ = (∂x − i∂y)/2, ∂̄ = (∂x + i∂y)/2
        for (along_x, dir) in [(true, Complex64::new(1.0, 0.0)), (false, Complex64::i())] {
            for (node, coef) in grid.stencil_at(t, along_x) {
                if coef != 0.0 {
                    grad_terms[node].push((t, 0.5 * coef * dir.conj(), 0.5 * coef * dir));
                }
            }
        }
    }

    let mut rows = Vec::new();
    let mut start = 0;
    while start < grid.len() {
        let (j, k0) = grid.lattice_coords(start);
        let mut end = start;
        while end < grid.len() && grid.lattice_coords(end).0 == j {
            end += 1;
        }
        rows.push((start, j, k0, end - start));
        start = end;
    }

    let regions = boundary_regions(grid);
    let m = grid.len();
    let mut bulk = vec![1.0; m];
    let mut area = vec![1.0; m];
    let mut node_terms: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
    for o in regions.iter().filter_map(|reg| reg.owner) {
        bulk[o] = 0.0;
        area[o] = 0.0;
    }
    for (slot, reg) in regions.iter().enumerate() {
        for (t, &(i, coef)) in reg.data.terms.iter().enumerate() {
            node_terms[i].push((slot, t));
            area[i] += coef[0].re * reg.data.mass * PI / (h * h);
        }
    }
    let radius = 0.5 * h * std::f64::consts::SQRT_2;
    let columns: Vec<Vec<(Complex64, Complex64)>> = regions
        .par_iter()
        .map(|reg| {
            let (mm, nn) = strip_moments(&reg.strips, reg.centre);
            grid.nodes()
                .iter()
                .enumerate()
                .map(|(i, &z)| {
                    let d = z - reg.centre;
                    if Some(i) == reg.owner {
                        // the symmetric full cell contributes nothing to either integral
                        let (a, b) = strip_weights(&reg.outside, z, reg.centre);
                        (-a, -b)
                    } else if d.norm() >= MULTIPOLE_RATIO * radius {
                        (multipole(&mm, d), multipole(&nn, d))
                    } else {
                        strip_weights(&reg.strips, z, reg.centre)
                    }
                })
                .collect()
        })
        .collect();
    let nr = regions.len();
    let mut w0 = vec![ZERO; m * nr];
    let mut w2 = vec![ZERO; m * nr];
    for (slot, col) in columns.iter().enumerate() {
        for (i, &(a, b)) in col.iter().enumerate() {
            w0[i * nr + slot] = a;
            w2[i * nr + slot] = b;
        }
    }
    let regions = regions.into_iter().map(|r| r.data).collect();
    CGOperator { grid: grid.clone(), width, w_re, w_im, c_re, c_im, grad_terms, bulk, area, rows, regions, node_terms, w0, w2 }
}

impl CGOperator {
    pub fn grid(&self) -> &Arc<DiskGrid> {
        &self.grid
    }

    // index into the reversed tables of the source at lattice (j, 0) seen from `target`
    fn row_offset(&self, target: usize, j: usize) -> usize {
        let n = self.grid.n_axis();
        let (tj, tk) = self.grid.lattice_coords(target);
        let base = (tj + n - 1) * self.width + tk + n - 1;
        self.width * self.width - 1 - base + j * self.width
    }

    // table entries for the cell of `source` seen from `target`
    fn cell_weights(&self, target: usize, source: usize) -> (Complex64, Complex64) {
        let (j, k) = self.grid.lattice_coords(source);
        let o = self.row_offset(target, j) + k;
        (Complex64::new(self.w_re[o], self.w_im[o]), Complex64::new(self.c_re[o], self.c_im[o]))
    }

    /// Weight of source node `source` in the row of `target`.
    pub fn weight(&self, target: usize, source: usize) -> Complex64 {
        let z = self.grid.node(target);
        let h2 = self.grid.spacing().powi(2) / PI;
        let mut w = self.cell_weights(target, source).0 * self.bulk[source];
        for &(t, ca, cb) in &self.grad_terms[source] {
            let (w0, w2) = self.cell_weights(target, t);
            w += self.bulk[t] * (ca * ((z - self.grid.node(t)) * w0 - h2) + cb * w2);
        }
        let nr = self.regions.len();
        for &(slot, t) in &self.node_terms[source] {
            let reg = &self.regions[slot];
            let [cv, ca, cb] = reg.terms[t].1;
            let (w0, w2) = (self.w0[target * nr + slot], self.w2[target * nr + slot]);
            w += w0 * (cv + ca * (z - reg.centroid) - cb * reg.shift_conj) + w2 * cb - ca * reg.mass;
        }
        w
    }

    /// Table weight `(1/π) ∫_cell dA/(z − ζ)` of a full cell whose centre sits at
    /// lattice offset `(dj, dk)` = target − source.
    pub fn offset_weight(&self, dj: i64, dk: i64) -> Complex64 {
        let n = self.grid.n_axis() as i64;
        let o = self.width * self.width - 1 - ((dj + n - 1) as usize * self.width + (dk + n - 1) as usize);
        Complex64::new(self.w_re[o], self.w_im[o])
    }

    /// Area attributed to `node`, in units of `h²`.
    pub fn area_fraction(&self, node: usize) -> f64 {
        self.area[node]
    }

    /// Number of clipped cells integrated on the exact disk geometry.
    pub fn clipped_cells(&self) -> usize {
        self.regions.len()
    }

    /// `max_i Σ_j |w_ij|`, the exact sup-norm gain of the discrete operator.
    pub fn sup_gain(&self) -> f64 {
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| (0..self.grid.len()).map(|s| self.weight(i, s).norm()).sum::<f64>())
            .reduce(|| 0.0, f64::max)
    }
}

// Σ k·v over split real/imaginary slices, in four independent lanes.
fn dot(kr: &[f64], ki: &[f64], vr: &[f64], vi: &[f64]) -> Complex64 {
    let (mut re, mut im) = ([0.0; 4], [0.0; 4]);
    let chunks = kr.len() / 4 * 4;
    for (((a, b), c), d) in
        kr[..chunks].chunks_exact(4).zip(ki[..chunks].chunks_exact(4)).zip(vr[..chunks].chunks_exact(4)).zip(vi[..chunks].chunks_exact(4))
    {
        for l in 0..4 {
            re[l] += a[l] * c[l] - b[l] * d[l];
            im[l] += a[l] * d[l] + b[l] * c[l];
        }
    }
    let mut out = Complex64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3]));
    for l in chunks..kr.len() {
        out += Complex64::new(kr[l], ki[l]) * Complex64::new(vr[l], vi[l]);
    }
    out
}

struct Split {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Split {
    fn new(values: impl Iterator<Item = Complex64>) -> Self {
        let (re, im) = values.map(|v| (v.re, v.im)).unzip();
        Split { re, im }
    }
}

/// Applies `P` to each complex component of `phi`.
pub fn cg_apply(op: &CGOperator, phi: &DiskMap) -> Result<DiskMap> {
    if !op.grid.same_as(phi.grid()) {
        return Err(Error::GridMismatch);
    }
    let m = op.grid.len();
    let nc = phi.dim() / 2;
    let nr = op.regions.len();
    let h2 = op.grid.spacing().powi(2) / PI;
    let (dz, dzbar) = (d_dz(phi), d_dzbar(phi));
    let comp = |u: &DiskMap, c: usize, s: usize| {
        let v = u.value(s);
        Complex64::new(v[2 * c], v[2 * c + 1])
    };

    struct Sources {
        value: Split,
        slope: Split,
        conj_slope: Split,
        constant: Complex64,
        // per region: coefficient of w0, of z·w0, of w2, and the constant
        edge: Vec<[Complex64; 4]>,
    }
    let sources: Vec<Sources> = (0..nc)
        .map(|c| {
            let b = &op.bulk;
            let nodes = op.grid.nodes();
            let edge = op
                .regions
                .iter()
                .map(|reg| {
                    let mut t = [ZERO; 3];
                    for &(s, coef) in &reg.terms {
                        let v = comp(phi, c, s);
                        for (acc, k) in t.iter_mut().zip(coef) {
                            *acc += k * v;
                        }
                    }
                    let [val, a, bb] = t;
                    [val - a * reg.centroid - bb * reg.shift_conj, a, bb, a * reg.mass]
                })
                .collect();
            Sources {
                value: Split::new((0..m).map(|s| (comp(phi, c, s) - nodes[s] * comp(&dz, c, s)) * b[s])),
                slope: Split::new((0..m).map(|s| comp(&dz, c, s) * b[s])),
                conj_slope: Split::new((0..m).map(|s| comp(&dzbar, c, s) * b[s])),
                constant: (0..m).map(|s| comp(&dz, c, s) * b[s]).sum::<Complex64>() * h2,
                edge,
            }
        })
        .collect();

    let mut out = vec![0.0; m * phi.dim()];
    out.par_chunks_mut(phi.dim()).enumerate().for_each(|(i, row)| {
        let z = op.grid.node(i);
        let (w0, w2) = (&op.w0[i * nr..(i + 1) * nr], &op.w2[i * nr..(i + 1) * nr]);
        for (c, src) in sources.iter().enumerate() {
            let (mut sv, mut sa, mut sb) = (ZERO, ZERO, ZERO);
            for &(start, j, k0, count) in &op.rows {
                let o = op.row_offset(i, j) + k0;
                let (wr, wi) = (&op.w_re[o..o + count], &op.w_im[o..o + count]);
                let (cr, ci) = (&op.c_re[o..o + count], &op.c_im[o..o + count]);
                let r = start..start + count;
                sv += dot(wr, wi, &src.value.re[r.clone()], &src.value.im[r.clone()]);
                sa += dot(wr, wi, &src.slope.re[r.clone()], &src.slope.im[r.clone()]);
                sb += dot(cr, ci, &src.conj_slope.re[r.clone()], &src.conj_slope.im[r]);
            }
            let mut acc = sv + z * sa + sb - src.constant;
            let (mut s0, mut s1, mut s2, mut s3) = (ZERO, ZERO, ZERO, ZERO);
            for ((a, b), e) in w0.iter().zip(w2).zip(&src.edge) {
                s0 += a * e[0];
                s1 += a * e[1];
                s2 += b * e[2];
                s3 += e[3];
            }
            acc += s0 + z * s1 + s2 - s3;
            row[2 * c] = acc.re;
            row[2 * c + 1] = acc.im;
        }
    });
    DiskMap::from_values(phi.grid().clone(), phi.dim(), out)
}

/// `max ‖∂̄(Pφ) − φ‖` over the interior mask.
pub fn cg_residual(op: &CGOperator, phi: &DiskMap) -> Result<f64> {
    let p = cg_apply(op, phi)?;
    let dbar = d_dzbar(&p);
    Ok(op
        .grid
        .interior_nodes()
        .map(|i| norm(dbar.value(i).iter().zip(phi.value(i)).map(|(a, b)| a - b)))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diskgrid::make_grid;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn at(u: &DiskMap, i: usize) -> Complex64 {
        c(u.value(i)[0], u.value(i)[1])
    }

    /// Tensor Gauss–Legendre (16 points per axis) on `sub × sub` subcells of the
    /// cell of side `h` centred at `d`, integrating `f(w)` with `w = z − ζ`.
    fn gauss_cell(d: Complex64, h: f64, sub: usize, f: impl Fn(Complex64) -> Complex64) -> Complex64 {
        let hs = h / sub as f64;
        let mut acc = c(0.0, 0.0);
        for a in 0..sub {
            for b in 0..sub {
                let cx = d.re - 0.5 * h + (a as f64 + 0.5) * hs;
                let cy = d.im - 0.5 * h + (b as f64 + 0.5) * hs;
                for (xi, wi) in GL_X.iter().flat_map(|&x| [x, -x]).zip(GL_W.iter().flat_map(|&w| [w, w])) {
                    for (yj, wj) in GL_X.iter().flat_map(|&y| [y, -y]).zip(GL_W.iter().flat_map(|&w| [w, w])) {
                        let w = c(cx + 0.5 * hs * xi, cy + 0.5 * hs * yj);
                        acc += wi * wj * 0.25 * hs * hs * f(w);
                    }
                }
            }
        }
        acc / PI
    }

    #[test]
    fn exact_cell_integral_matches_gauss_oracle() {
        let h = 0.1;
        for &(dj, dk) in &[(1, 0), (0, 1), (1, 1), (2, -1), (-2, 2), (5, 3)] {
            let d = c(dj as f64 * h, dk as f64 * h);
            let exact = exact_cell_weight(d, h);
            let oracle = gauss_cell(d, h, 8, |w| w.inv());
            assert!((exact - oracle).norm() < 1e-12 * (1.0 + oracle.norm()), "{dj},{dk}: {exact} vs {oracle}");
        }
    }

    #[test]
    fn self_cell_weight_vanishes() {
        assert_eq!(exact_cell_weight(c(0.0, 0.0), 0.05), c(0.0, 0.0));
        assert!(rectangle_integral(-0.025, 0.025, -0.025, 0.025).norm() < 1e-15);
        let op = cg_build(&make_grid(1.0, 17).unwrap());
        assert_eq!(op.offset_weight(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn far_midpoint_weight_is_within_h_squared_of_exact() {
        let h = 1.0 / 32.0;
        for &(dj, dk) in &[(3, 0), (4, 4), (10, -7), (30, 2)] {
            let d = c(dj as f64 * h, dk as f64 * h);
            let mid = midpoint_cell_weight(d, h);
            let oracle = gauss_cell(d, h, 2, |w| w.inv());
            let rel = (mid - oracle).norm() / oracle.norm();
            // the square has no second moment; the first correction is h⁴/(60 d⁴)
            let bound = (h / d.norm()).powi(2) / 12.0;
            assert!(rel <= bound, "{dj},{dk}: rel {rel} bound {bound}");
        }
    }

    #[test]
    fn offset_tables_match_gauss_oracle() {
        let g = make_grid(1.0, 65).unwrap();
        let h = g.spacing();
        let op = cg_build(&g);
        for &(dj, dk) in &[(1, 0), (-1, 2), (2, 2), (3, 0), (4, -3), (17, 9), (-30, 1)] {
            let d = c(dj as f64 * h, dk as f64 * h);
            let oracle = gauss_cell(d, h, 4, |w| w.inv());
            let got = op.offset_weight(dj, dk);
            assert!((got - oracle).norm() < 1e-12 * oracle.norm(), "{dj},{dk}: {got} vs {oracle}");
            // conj(ζ − c) with ζ − c = d − w
            let (_, conj) = op.cell_weights(g.origin(), g.node_at(32 - dj, 32 - dk).unwrap());
            let oracle = gauss_cell(d, h, 4, |w| (d - w).conj() / w);
            assert!((conj - oracle).norm() < 1e-10 * oracle.norm(), "{dj},{dk}: {conj} vs {oracle}");
        }
    }

    #[test]
    fn zero_maps_to_zero_and_rows_match_constant() {
        let g = make_grid(1.0, 33).unwrap();
        let op = cg_build(&g);
        let zero = DiskMap::zeros(g.clone(), 2);
        let p0 = cg_apply(&op, &zero).unwrap();
        assert!(p0.values().iter().all(|&x| x == 0.0));
        assert_eq!(cg_residual(&op, &zero).unwrap(), 0.0);

        let phi = DiskMap::from_complex_fn(g.clone(), 1, |z| vec![c(1.0, 0.5) + z * z.conj() - z * z * z]);
        let p = cg_apply(&op, &phi).unwrap();
        for i in (0..g.len()).step_by(29) {
            let row: Complex64 = (0..g.len()).map(|j| op.weight(i, j) * at(&phi, j)).sum();
            assert!((row - at(&p, i)).norm() < 1e-12, "{row} vs {}", at(&p, i));
        }
    }

    #[test]
    fn affine_inputs_are_transformed_exactly() {
        // P1 = z̄, Pz = |z|² − r², Pz̄ = z̄²/2 on the closed disk
        for (r, n) in [(1.0, 33), (0.5, 65), (1.0, 9)] {
            let g = make_grid(r, n).unwrap();
            let op = cg_build(&g);
            let cases: [(fn(Complex64) -> Complex64, Box<dyn Fn(Complex64) -> Complex64>); 3] = [
                (|_| c(1.0, 0.0), Box::new(|z: Complex64| z.conj())),
                (|z| z, Box::new(move |z: Complex64| c(z.norm_sqr() - r * r, 0.0))),
                (|z| z.conj(), Box::new(|z: Complex64| 0.5 * z.conj() * z.conj())),
            ];
            for (k, (phi, expected)) in cases.iter().enumerate() {
                let p = cg_apply(&op, &DiskMap::from_complex_fn(g.clone(), 1, |z| vec![phi(z)])).unwrap();
                let err = (0..g.len()).map(|i| (at(&p, i) - expected(g.node(i))).norm()).fold(0.0, f64::max);
                assert!(err < 1e-12, "r={r} N={n} case {k}: {err}");
            }
        }
    }

    #[test]
    fn residual_converges_for_quadratic_inputs() {
        let quads: [fn(Complex64) -> Complex64; 3] = [|z| z * z, |z| z.conj() * z.conj(), |z| c(z.norm_sqr(), 0.0)];
        let mut prev = [f64::INFINITY; 3];
        for n in [17, 33, 65] {
            let g = make_grid(1.0, n).unwrap();
            let op = cg_build(&g);
            for (k, f) in quads.iter().enumerate() {
                let res = cg_residual(&op, &DiskMap::from_complex_fn(g.clone(), 1, |z| vec![f(z)])).unwrap();
                // order ≥ 1 when the spacing halves
                assert!(res <= 0.5 * prev[k], "N={n} case {k}: {res} vs {}", prev[k]);
                prev[k] = res;
            }
        }
        assert!(prev.iter().all(|&r| r < 1e-3));
    }

    #[test]
    fn apply_is_linear_and_rejects_foreign_grids() {
        let g = make_grid(1.0, 17).unwrap();
        let op = cg_build(&g);
        let phi = DiskMap::from_complex_fn(g.clone(), 2, |z| vec![z * z, c(1.0, 0.0) - z.conj()]);
        let psi = DiskMap::from_complex_fn(g.clone(), 2, |z| vec![z.conj(), z.exp()]);
        let (a, b) = (0.7, -1.9);
        let combo = DiskMap::from_values(
            g.clone(),
            4,
            phi.values().iter().zip(psi.values()).map(|(x, y)| a * x + b * y).collect(),
        )
        .unwrap();
        let lhs = cg_apply(&op, &combo).unwrap();
        let (pp, ps) = (cg_apply(&op, &phi).unwrap(), cg_apply(&op, &psi).unwrap());
        for ((l, x), y) in lhs.values().iter().zip(pp.values()).zip(ps.values()) {
            assert!((l - (a * x + b * y)).abs() < 1e-12);
        }
        let other = make_grid(1.0, 19).unwrap();
        assert!(matches!(cg_apply(&op, &DiskMap::zeros(other, 2)), Err(Error::GridMismatch)));
    }

    #[test]
    fn clipped_cells_cover_the_disk() {
        let g = make_grid(1.0, 33).unwrap();
        let op = cg_build(&g);
        let total: f64 = (0..g.len()).map(|i| op.area_fraction(i)).sum::<f64>() * g.spacing().powi(2);
        assert!((total - PI).abs() < 1e-12, "{total}");
    }

    #[test]
    fn sup_gain_bounds_observed_gain() {
        let g = make_grid(1.0, 33).unwrap();
        let op = cg_build(&g);
        let gain = op.sup_gain();
        // continuum value: sup_z (1/π)∫_Δ dA/|z − ζ| = 2 at z = 0
        assert!(gain > 1.5, "gain {gain}");
        let phi = DiskMap::from_complex_fn(g.clone(), 1, |z| vec![Complex64::from_polar(1.0, 3.0 * z.arg())]);
        let out = cg_apply(&op, &phi).unwrap();
        assert!(out.sup_norm() <= gain * phi.sup_norm() + 1e-12);
    }
}
