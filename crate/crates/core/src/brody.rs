//! Brody reparametrization, rescaling of blowing-up disks and extraction of a
//! candidate entire curve on a fixed window.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diskgrid::{eval_cubic, make_grid, mobius_swap, poincare_weight, sup_poincare_derivative, DiskGrid, DiskMap};
use crate::error::{Error, Result};
use crate::solver::{cr_residual, derivative_disk, SolverConfig};
use crate::structure::StructureField;

const COARSE_SAMPLES: usize = 64;
const BISECTION_TOL: f64 = 1e-6;
// the hypothesis |f'(0)| ≥ c is checked with this relative slack
const HYPOTHESIS_SLACK: f64 = 1e-9;
const CONSECUTIVE: usize = 3;

#[derive(Debug, Clone)]
pub struct ReparamResult {
    pub f_tilde: DiskMap,
    pub t0: f64,
    /// Peak of the weighted derivative of `f_{t0}` moved to the origin, if
    /// recentering happened.
    pub z0: Option<Complex64>,
    pub s_at_0: f64,
    pub s_sup: f64,
    pub tol_brody: f64,
}

impl ReparamResult {
    pub fn satisfies_normalization(&self, c: f64) -> bool {
        (self.s_sup - self.s_at_0).abs() <= self.tol_brody && (self.s_at_0 - c).abs() <= self.tol_brody
    }
}

/// Tolerance for the two normalization equalities on a grid of spacing `h`.
pub fn tol_brody(grid: &DiskGrid) -> f64 {
    (0.05 * grid.spacing()).max(1e-3)
}

fn derivative_at_origin(f: &DiskMap) -> f64 {
    f.derivative_norm_at(f.grid().origin())
}

/// `‖f‖_{C²(Δ_{r/2m})} / ‖f‖_∞`, with derivatives up to second order taken by
/// the grid's difference stencils. Infinite when `f` vanishes.
pub fn c2_ratio(f: &DiskMap, m: usize) -> f64 {
    let grid = f.grid();
    let inner = grid.radius() / (2 * m.max(1)) as f64;
    let (fx, fy) = (f.d_dx(), f.d_dy());
    let maps = [f.clone(), fx.d_dx(), fx.d_dy(), fy.d_dy(), fx, fy];
    let mut c2: f64 = 0.0;
    for i in (0..grid.len()).filter(|&i| grid.node(i).norm() <= inner + 1e-12 * grid.radius()) {
        for map in &maps {
            c2 = c2.max(map.value(i).iter().map(|x| x * x).sum::<f64>().sqrt());
        }
    }
    let sup = f.sup_norm();
    if sup == 0.0 {
        f64::INFINITY
    } else {
        c2 / sup
    }
}

/// `z ↦ f(t·z)` resampled on the grid of `f`.
fn dilate(f: &DiskMap, t: f64) -> Result<DiskMap> {
    let grid = f.grid();
    let mut values = Vec::with_capacity(grid.len() * f.dim());
    for &z in grid.nodes() {
        values.extend(eval_cubic(f, z * t)?);
    }
    DiskMap::from_values(grid.clone(), f.dim(), values)
}

/// `s(t) = sup |f_t'(z)|(r² − |z|²)/r²` over the interior mask, `f_t(z) = f(tz)`.
pub fn scaling_sup(f: &DiskMap, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParams(format!("scaling parameter must lie in [0, 1], got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(sup_poincare_derivative(f).0);
    }
    Ok(sup_poincare_derivative(&dilate(f, t)?).0)
}

/// Finds the smallest `t0` with `s(t0) = c` and moves the point where the
/// weighted derivative of `f_{t0}` peaks to the origin.
pub fn brody_reparametrize(f: &DiskMap, c: f64) -> Result<ReparamResult> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParams(format!("c must be positive, got {c}")));
    }
    let grid = f.grid();
    let d0 = derivative_at_origin(f);
    if d0 < c * (1.0 - HYPOTHESIS_SLACK) {
        return Err(Error::HypothesisViolated { derivative: d0, c });
    }
    let tol = tol_brody(grid);

    // s(1) ≥ |f'(0)| ≥ c, so the last sample always qualifies
    let mut lo = 0.0;
    let mut hi = 1.0;
    for i in 1..COARSE_SAMPLES {
        let t = i as f64 / COARSE_SAMPLES as f64;
        if scaling_sup(f, t)? >= c {
            hi = t;
            break;
        }
        lo = t;
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if scaling_sup(f, mid)? >= c {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t0 = hi;

    let f_t0 = if t0 == 1.0 { f.clone() } else { dilate(f, t0)? };
    let (_, peak) = sup_poincare_derivative(&f_t0);
    let (f_tilde, z0) = if peak == grid.origin() {
        (f_t0, None)
    } else {
        let z0 = refine_peak(&f_t0, peak);
        let swap = mobius_swap(z0, grid.radius())?;
        // f̃(z) = f(t0·L(z)), evaluated on the source data directly
        let mut values = Vec::with_capacity(grid.len() * f.dim());
        for &z in grid.nodes() {
            values.extend(eval_cubic(f, swap.apply(z) * t0)?);
        }
        (DiskMap::from_values(grid.clone(), f.dim(), values)?, Some(z0))
    };
    let s_at_0 = derivative_at_origin(&f_tilde);
    let s_sup = sup_poincare_derivative(&f_tilde).0;
    Ok(ReparamResult { f_tilde, t0, z0, s_at_0, s_sup, tol_brody: tol })
}

/// Weighted derivative `|f'(z)|(r² − |z|²)/r²` at a node.
fn weighted_derivative(f: &DiskMap, node: usize) -> f64 {
    let g = f.grid();
    f.derivative_norm_at(node) * poincare_weight(g.node(node), g.radius())
}

/// Moves a peak node of the weighted derivative to the stationary point of
/// the quadratic through its 3×3 neighbourhood, when that quadratic is
/// concave and the point stays within one cell. Otherwise keeps the node.
pub fn refine_peak(f: &DiskMap, node: usize) -> Complex64 {
    let g = f.grid();
    let z = g.node(node);
    let (j, k) = g.lattice_coords(node);
    let (j, k) = (j as i64, k as i64);
    let mut s = [[0.0; 3]; 3];
    for (a, row) in s.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            match g.node_at(j + a as i64 - 1, k + b as i64 - 1) {
                Some(i) if g.is_interior(i) => *v = weighted_derivative(f, i),
                _ => return z,
            }
        }
    }
    let gx = 0.5 * (s[2][1] - s[0][1]);
    let gy = 0.5 * (s[1][2] - s[1][0]);
    let hxx = s[2][1] - 2.0 * s[1][1] + s[0][1];
    let hyy = s[1][2] - 2.0 * s[1][1] + s[1][0];
    let hxy = 0.25 * (s[2][2] - s[2][0] - s[0][2] + s[0][0]);
    let det = hxx * hyy - hxy * hxy;
    if !(hxx < 0.0 && det > 0.0) {
        return z;
    }
    let dx = -(hyy * gx - hxy * gy) / det;
    let dy = -(hxx * gy - hxy * gx) / det;
    if dx.abs() > 1.0 || dy.abs() > 1.0 {
        return z;
    }
    z + Complex64::new(dx, dy) * g.spacing()
}

/// `g(z) = f(z/r)` on `Δ_r` with `r = |f'(0)|`, so that `|g'(0)| = 1`.
///
/// The grid of `g` is the grid of `f` scaled by `r`; nodes correspond one to
/// one, so no interpolation is involved.
pub fn rescale_step(j: &StructureField, f: &DiskMap) -> Result<DiskMap> {
    if f.dim() != j.dim() {
        return Err(Error::DimensionMismatch { expected: j.dim(), got: f.dim() });
    }
    let r = derivative_at_origin(f);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::ZeroDerivative);
    }
    let grid = make_grid(f.grid().radius() * r, f.grid().n_axis())?;
    DiskMap::from_values(grid, f.dim(), f.values().to_vec())
}

/// Built-in families of disks with growing derivative at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `f_n(z) = p + n·z·ν` with `ν` read as a complex vector.
    Dilation { p: Vec<f64>, nu: Vec<f64> },
    /// `f_n = derivative_disk(J, p, λ_n·ν)`.
    DerivativeLadder { p: Vec<f64>, nu: Vec<f64>, lambdas: Vec<f64> },
}

impl FamilySpec {
    pub fn disk(&self, j: &StructureField, n: usize, cfg: &SolverConfig, grid: &Arc<DiskGrid>) -> Result<DiskMap> {
        match self {
            FamilySpec::Dilation { p, nu } => {
                check_vectors(j, p, nu)?;
                let scale = n as f64;
                Ok(DiskMap::from_complex_fn(grid.clone(), p.len() / 2, |z| {
                    p.chunks_exact(2)
                        .zip(nu.chunks_exact(2))
                        .map(|(a, b)| Complex64::new(a[0], a[1]) + z * scale * Complex64::new(b[0], b[1]))
                        .collect()
                }))
            }
            FamilySpec::DerivativeLadder { p, nu, lambdas } => {
                check_vectors(j, p, nu)?;
                let lambda = *lambdas
                    .get(n - 1)
                    .ok_or_else(|| Error::Config(format!("λ schedule has no entry for step {n}")))?;
                let w: Vec<f64> = nu.iter().map(|x| lambda * x).collect();
                Ok(derivative_disk(j, p, &w, cfg, grid)?.v)
            }
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            FamilySpec::Dilation { .. } => None,
            FamilySpec::DerivativeLadder { lambdas, .. } => Some(lambdas.len()),
        }
    }
}

fn check_vectors(j: &StructureField, p: &[f64], nu: &[f64]) -> Result<()> {
    for x in [p, nu] {
        if x.len() != j.dim() {
            return Err(Error::DimensionMismatch { expected: j.dim(), got: x.len() });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractOptions {
    /// Radius `R` of the comparison window.
    pub window: f64,
    pub tol: f64,
    pub n_max: usize,
    /// Nodes per axis of the family's disks and of the window.
    pub nodes: usize,
    pub cfg: SolverConfig,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { window: 2.0, tol: 1e-10, n_max: 6, nodes: 65, cfg: SolverConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub n: usize,
    /// Measured `|f_n'(0)|`, the radius of the rescaled disk.
    pub r_n: f64,
    pub t0: f64,
    pub recentered: bool,
    /// Point of the rescaled disk moved to the origin.
    pub z0: Option<[f64; 2]>,
    pub s_sup: f64,
    pub s_at_0: f64,
    /// Sup distance to the previous window; absent until two windows exist.
    pub delta: Option<f64>,
    /// `c2_ratio(g_n, m)` for `m = 1, 2`, a diagnostic only.
    pub c2_ratios: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct LineCandidate {
    pub samples: DiskMap,
    pub derivative_at_0: f64,
    pub cr_residual: f64,
    pub converged: bool,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RescalingReport {
    pub steps: Vec<StepRecord>,
    pub final_candidate: Option<LineCandidate>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateRecord {
    pub window: f64,
    pub derivative_at_0: f64,
    pub cr_residual: f64,
    pub converged: bool,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescalingRecord {
    pub steps: Vec<StepRecord>,
    pub converged: bool,
    pub candidate: Option<CandidateRecord>,
}

impl RescalingReport {
    pub fn record(&self) -> RescalingRecord {
        RescalingRecord {
            steps: self.steps.clone(),
            converged: self.converged,
            candidate: self.final_candidate.as_ref().map(|c| CandidateRecord {
                window: c.samples.grid().radius(),
                derivative_at_0: c.derivative_at_0,
                cr_residual: c.cr_residual,
                converged: c.converged,
                delta: c.delta,
            }),
        }
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.delta).collect()
    }
}

fn window_distance(j: &StructureField, a: &DiskMap, b: &DiskMap) -> Result<f64> {
    let domain = j.domain();
    let mut worst: f64 = 0.0;
    for i in 0..a.grid().len() {
        let d = domain.displacement(b.value(i), a.value(i));
        worst = worst.max(d.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    if a.grid().len() != b.grid().len() {
        return Err(Error::GridMismatch);
    }
    Ok(worst)
}

/// Rescales each disk of the family to unit derivative, normalizes it with
/// `c = 1`, restricts it to `Δ_R` and stops once three consecutive windows
/// move by less than `tol`.
pub fn extract_line(j: &StructureField, family: &FamilySpec, opts: &ExtractOptions) -> Result<RescalingReport> {
    opts.cfg.validate()?;
    if !(opts.window > 0.0 && opts.tol > 0.0) || opts.n_max == 0 {
        return Err(Error::Config("window, tol and n_max must be positive".into()));
    }
    let n_max = family.len().map_or(opts.n_max, |len| len.min(opts.n_max));
    let unit = make_grid(1.0, opts.nodes)?;
    let window = make_grid(opts.window, opts.nodes)?;
    let mut steps = Vec::new();
    let mut previous: Option<DiskMap> = None;
    let mut candidate = None;
    let mut streak = 0;
    let mut converged = false;

    for n in 1..=n_max {
        let f = family.disk(j, n, &opts.cfg, &unit)?;
        let r_n = derivative_at_origin(&f);
        let g = rescale_step(j, &f)?;
        let reparam = brody_reparametrize(&g, 1.0)?;
        let mut record = StepRecord {
            n,
            r_n,
            t0: reparam.t0,
            recentered: reparam.z0.is_some(),
            z0: reparam.z0.map(|z| [z.re, z.im]),
            s_sup: reparam.s_sup,
            s_at_0: reparam.s_at_0,
            delta: None,
            c2_ratios: [c2_ratio(&g, 1), c2_ratio(&g, 2)],
        };
        if g.grid().radius() >= opts.window {
            let mut values = Vec::with_capacity(window.len() * j.dim());
            for &z in window.nodes() {
                values.extend(eval_cubic(&reparam.f_tilde, z)?);
            }
            let samples = DiskMap::from_values(window.clone(), j.dim(), values)?;
            if let Some(prev) = &previous {
                let delta = window_distance(j, prev, &samples)?;
                record.delta = Some(delta);
                streak = if delta < opts.tol { streak + 1 } else { 0 };
                converged = streak >= CONSECUTIVE;
            }
            candidate = Some((samples.clone(), record.delta));
            previous = Some(samples);
        }
        steps.push(record);
        if converged {
            break;
        }
    }

    let final_candidate = match candidate {
        Some((samples, delta)) => Some(LineCandidate {
            derivative_at_0: derivative_at_origin(&samples),
            cr_residual: cr_residual(j, &samples)?,
            samples,
            converged,
            delta,
        }),
        None => None,
    };
    Ok(RescalingReport { steps, final_candidate, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{gallery, GalleryParams};

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn poly(n_axis: usize, f: impl Fn(Complex64) -> Complex64) -> DiskMap {
        DiskMap::from_complex_fn(make_grid(1.0, n_axis).unwrap(), 1, |z| vec![f(z)])
    }

    // sup over a dense polar scan of the closed unit disk
    fn dense_sup(t: f64, deriv: impl Fn(Complex64) -> f64) -> f64 {
        let mut best: f64 = 0.0;
        for a in 0..256 {
            let theta = a as f64 * std::f64::consts::TAU / 256.0;
            for k in 0..=2000 {
                let rho = k as f64 / 2000.0;
                let z = Complex64::from_polar(rho, theta);
                best = best.max(t * deriv(z * t) * (1.0 - rho * rho));
            }
        }
        best
    }

    #[test]
    fn c2_ratio_of_quadratics() {
        // z²: the second x-derivative is 2 everywhere and sup |z²| = 1
        let sq = poly(33, |z| z * z);
        assert!((c2_ratio(&sq, 1) - 2.0).abs() < 1e-12);
        assert!((c2_ratio(&sq, 2) - 2.0).abs() < 1e-12);
        // z: the first derivatives have norm 1 and sup |z| = 1
        assert!((c2_ratio(&poly(33, |z| z), 1) - 1.0).abs() < 1e-12);
        assert_eq!(c2_ratio(&poly(9, |_| c(0.0, 0.0)), 1), f64::INFINITY);
    }

    #[test]
    fn scaling_sup_known_values() {
        let id = poly(65, |z| z);
        assert_eq!(scaling_sup(&id, 0.0).unwrap(), 0.0);
        assert!((scaling_sup(&id, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let sq = poly(129, |z| z * z);
        let oracle = dense_sup(1.0, |z| 2.0 * z.norm());
        assert!((oracle - 4.0 / (3.0 * 3f64.sqrt())).abs() < 1e-6);
        assert!((scaling_sup(&sq, 1.0).unwrap() - oracle).abs() < 1e-3);
        let half = dense_sup(0.5, |z| 2.0 * z.norm());
        assert!((scaling_sup(&sq, 0.5).unwrap() - half).abs() < 1e-3);
        assert!(scaling_sup(&sq, 1.5).is_err());
    }

    #[test]
    fn identity_is_already_normalized() {
        let id = poly(33, |z| z);
        let res = brody_reparametrize(&id, 1.0).unwrap();
        assert_eq!(res.t0, 1.0);
        assert!(res.z0.is_none());
        assert_eq!(res.f_tilde.values(), id.values());
    }

    #[test]
    fn doubled_identity_shrinks_to_half() {
        let f = poly(33, |z| 2.0 * z);
        let res = brody_reparametrize(&f, 1.0).unwrap();
        assert!((res.t0 - 0.5).abs() < 2e-6);
        assert!(res.z0.is_none());
        assert!(res.satisfies_normalization(1.0));
    }

    #[test]
    fn hypothesis_is_checked() {
        let f = poly(33, |z| 0.5 * z);
        assert!(matches!(brody_reparametrize(&f, 1.0), Err(Error::HypothesisViolated { .. })));
    }

    #[test]
    fn quadratic_recenters_in_the_interior() {
        let f = poly(129, |z| z + z * z);
        let res = brody_reparametrize(&f, 0.5).unwrap();
        let z0 = res.z0.expect("peak is away from the origin");
        // peak of t0·|1 + 2t0·z|(1 − |z|²) lies on the positive axis
        let t0 = res.t0;
        let rho = (-1.0 + (1.0 + 12.0 * t0 * t0).sqrt()) / (6.0 * t0);
        assert!((z0 - c(rho, 0.0)).norm() < 2e-3, "{z0} vs {rho}");
        assert!((res.s_sup - res.s_at_0).abs() < 1e-3, "{} vs {}", res.s_sup, res.s_at_0);
        assert!((res.s_at_0 - 0.5).abs() < 1e-3, "{}", res.s_at_0);

        // smallest t with s(t) ≥ 1/2 from a dense scan of the analytic s
        let deriv = |z: Complex64| (1.0 + 2.0 * z).norm();
        let mut t = 0.0;
        while dense_sup(t, deriv) < 0.5 {
            t += 1e-3;
        }
        assert!((res.t0 - t).abs() < 3e-3, "{} vs {t}", res.t0);
    }

    #[test]
    fn mobius_invariance_of_the_weighted_sup() {
        let f = poly(129, |z| z + z * z);
        let t0 = 0.4;
        let ft = dilate(&f, t0).unwrap();
        let swap = mobius_swap(c(0.3, 0.2), 1.0).unwrap();
        let composed = DiskMap::from_fn(ft.grid().clone(), 2, |z| eval_cubic(&f, swap.apply(z) * t0).unwrap());
        let (a, b) = (sup_poincare_derivative(&ft).0, sup_poincare_derivative(&composed).0);
        assert!((a - b).abs() < 2e-3, "{a} vs {b}");
    }

    #[test]
    fn rescaling_inverts_dilation() {
        let j = gallery("standard", &GalleryParams::default()).unwrap();
        let f = poly(33, |z| 5.0 * z);
        let g = rescale_step(&j, &f).unwrap();
        assert!((g.grid().radius() - 5.0).abs() < 1e-12);
        assert!((derivative_at_origin(&g) - 1.0).abs() < 1e-12);
        for (i, &z) in g.grid().nodes().iter().enumerate() {
            assert!((g.value(i)[0] - z.re).abs() < 1e-12 && (g.value(i)[1] - z.im).abs() < 1e-12);
        }
        let flat = DiskMap::constant(make_grid(1.0, 9).unwrap(), &[0.0, 0.0]);
        assert_eq!(rescale_step(&j, &flat).unwrap_err(), Error::ZeroDerivative);
    }

    #[test]
    fn dilation_family_yields_the_affine_line() {
        let family = FamilySpec::Dilation { p: vec![0.25, 0.5], nu: vec![1.0, 0.0] };
        let opts = ExtractOptions { nodes: 33, ..ExtractOptions::default() };
        for name in ["torus-flat", "standard"] {
            let j = gallery(name, &GalleryParams::default()).unwrap();
            let report = extract_line(&j, &family, &opts).unwrap();
            assert!(report.converged, "{name}");
            assert!(report.steps[2].delta.unwrap() < 1e-10);
            let line = report.final_candidate.unwrap();
            assert!((line.derivative_at_0 - 1.0).abs() < 1e-6);
            assert!(line.cr_residual < 1e-10);
            for (i, &z) in line.samples.grid().nodes().iter().enumerate() {
                let v = line.samples.value(i);
                assert!((v[0] - 0.25 - z.re).abs() < 1e-10 && (v[1] - 0.5 - z.im).abs() < 1e-10);
            }
        }
    }
}
