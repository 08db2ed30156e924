//! J-holomorphic disks from the fixed-point form of the Cauchy–Riemann equation.
//!
//! A map `v = εu` is J-holomorphic iff `∂̄v = q_J(v)·∂v`. Writing
//! `u = h + P(q_J(εu)·∂u)` with `h` holomorphic turns this into a fixed point
//! problem that contracts for small `ε`. Interpolation problems (prescribed
//! values, or value and derivative at 0) are solved by adjusting the affine
//! seed `h` with a Broyden iteration started from the identity Jacobian.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cauchygreen::{cg_apply, cg_shared};
use crate::diskgrid::{d_dz, eval_interp, norm, DiskGrid, DiskMap};
use crate::error::{Error, Result};
use crate::structure::{q_matrix, StructureField};

/// Iterate norms are compared across this many steps when watching for blow-up.
pub const DIVERGENCE_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub tol_fixpoint: f64,
    pub max_iter: usize,
    pub tol_newton: f64,
    pub max_newton: usize,
    pub fd_step: f64,
    /// Number of times `epsilon` may be halved after a divergent solve.
    pub continuation: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 0.1,
            tol_fixpoint: 1e-10,
            max_iter: 100,
            tol_newton: 1e-8,
            max_newton: 20,
            fd_step: 1e-6,
            continuation: 4,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("solver {what}")));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(&format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        for (name, v) in [("tol_fixpoint", self.tol_fixpoint), ("tol_newton", self.tol_newton), ("fd_step", self.fd_step)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_iter == 0 || self.max_newton == 0 {
            return bad("iteration limits must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DiskSolution {
    /// The unscaled fixed point.
    pub u: DiskMap,
    /// The disk itself, `v = ε·u`.
    pub v: DiskMap,
    pub residual: f64,
    pub iterations: usize,
    pub epsilon_used: f64,
    /// `sup‖u^{k+1} − u^k‖` for every Picard step of the final solve.
    pub step_history: Vec<f64>,
    /// Quasi-Newton steps taken by interpolating solvers (0 for plain solves).
    pub newton_steps: usize,
}

impl DiskSolution {
    /// Largest ratio of successive Picard steps from the third step on, if any.
    pub fn contraction_ratio(&self) -> Option<f64> {
        contraction_ratio(&self.step_history)
    }

    pub fn grid(&self) -> &Arc<DiskGrid> {
        self.v.grid()
    }
}

pub(crate) fn contraction_ratio(steps: &[f64]) -> Option<f64> {
    steps
        .windows(2)
        .skip(1)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .reduce(f64::max)
}

/// `q_J(v(z))·∂v(z)` at every node for `v = ε·u`.
fn beltrami_term(j: &StructureField, u: &DiskMap, epsilon: f64) -> Result<DiskMap> {
    let grid = u.grid();
    let dim = u.dim();
    let du = d_dz(u);
    let mut values = vec![0.0; grid.len() * dim];
    let mut point = vec![0.0; dim];
    for (i, out) in values.chunks_exact_mut(dim).enumerate() {
        for (p, x) in point.iter_mut().zip(u.value(i)) {
            *p = epsilon * x;
        }
        let q = q_matrix(j, &point).map_err(|e| e.at_node(grid.node(i)))?;
        let d = DVector::from_column_slice(du.value(i));
        out.copy_from_slice((q * d).as_slice());
    }
    DiskMap::from_values(grid.clone(), dim, values)
}

fn check_dims(j: &StructureField, h: &DiskMap) -> Result<()> {
    if h.dim() != j.dim() {
        return Err(Error::DimensionMismatch { expected: j.dim(), got: h.dim() });
    }
    Ok(())
}

/// Iterates `u ← h + P(q_J(εu)·∂u)` from `u = h` until the sup-norm step falls
/// below `cfg.tol_fixpoint`.
pub fn picard_solve(j: &StructureField, cfg: &SolverConfig, h: &DiskMap) -> Result<DiskSolution> {
    cfg.validate()?;
    check_dims(j, h)?;
    let op = cg_shared(h.grid());
    let h_norm = h.sup_norm();
    let mut u = h.clone();
    let mut norms = vec![h_norm];
    let mut steps = Vec::new();
    loop {
        let phi = beltrami_term(j, &u, cfg.epsilon)?;
        let correction = cg_apply(&op, &phi)?;
        let next = DiskMap::from_values(
            h.grid().clone(),
            h.dim(),
            h.values().iter().zip(correction.values()).map(|(a, b)| a + b).collect(),
        )?;
        let step = next.sup_distance(&u)?;
        steps.push(step);
        u = next;
        let iterations = steps.len();
        if !u.all_finite() || !step.is_finite() {
            return Err(Error::Diverged { iterations, last_step: step });
        }
        norms.push(u.sup_norm());
        if step < cfg.tol_fixpoint {
            break;
        }
        if iterations >= DIVERGENCE_WINDOW {
            let (now, then) = (norms[iterations], norms[iterations - DIVERGENCE_WINDOW]);
            if now > 2.0 * then && now > 2.0 * h_norm {
                return Err(Error::Diverged { iterations, last_step: step });
            }
        }
        if iterations >= cfg.max_iter {
            return Err(Error::Diverged { iterations, last_step: step });
        }
    }
    let v = u.scaled(cfg.epsilon);
    let residual = cr_residual(j, &v)?;
    Ok(DiskSolution { u, v, residual, iterations: steps.len(), epsilon_used: cfg.epsilon, step_history: steps, newton_steps: 0 })
}

/// `sup ‖∂̄v − q_J(v)·∂v‖` over the interior mask.
pub fn cr_residual(j: &StructureField, v: &DiskMap) -> Result<f64> {
    check_dims(j, v)?;
    let grid = v.grid();
    let dim = v.dim();
    let (mut dz, mut dzbar) = (vec![0.0; dim], vec![0.0; dim]);
    let mut worst: f64 = 0.0;
    for i in grid.interior_nodes() {
        v.dz_at(i, &mut dz);
        v.dzbar_at(i, &mut dzbar);
        let q = q_matrix(j, v.value(i)).map_err(|e| e.at_node(grid.node(i)))?;
        let qd = q * DVector::from_column_slice(&dz);
        worst = worst.max(norm(dzbar.iter().zip(qd.iter()).map(|(a, b)| a - b)));
    }
    Ok(worst)
}

fn complex_affine(grid: &Arc<DiskGrid>, p: &[f64], w: &[f64]) -> DiskMap {
    let n = p.len() / 2;
    DiskMap::from_complex_fn(grid.clone(), n, |z| {
        (0..n)
            .map(|k| Complex64::new(p[2 * k], p[2 * k + 1]) + z * Complex64::new(w[2 * k], w[2 * k + 1]))
            .collect()
    })
}

fn check_point(name: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() || p.len() % 2 != 0 || p.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams(format!("{name} must be a finite vector of even length")));
    }
    Ok(())
}

/// The affine disk `h(z) = p + (z/t)(q − p)`, with `h(0) = p` and `h(t) = q`.
pub fn affine_target(p: &[f64], q: &[f64], t: f64, grid: &Arc<DiskGrid>) -> Result<DiskMap> {
    check_point("p", p)?;
    check_point("q", q)?;
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParams(format!("interpolation node t must lie in (0, 1), got {t}")));
    }
    // barycentric form, so that h(t) = q holds exactly at a node z = t
    let n = p.len() / 2;
    let pc: Vec<Complex64> = (0..n).map(|k| Complex64::new(p[2 * k], p[2 * k + 1])).collect();
    let qc: Vec<Complex64> = (0..n).map(|k| Complex64::new(q[2 * k], q[2 * k + 1])).collect();
    Ok(DiskMap::from_complex_fn(grid.clone(), n, |z| {
        let a = z / t;
        pc.iter().zip(&qc).map(|(&pk, &qk)| if pk == qk { pk } else { pk * (1.0 - a) + qk * a }).collect()
    }))
}

// One interpolation problem: unknown seed parameters x, observed data g(x),
// solved for g(x) = target/ε.
trait SeedProblem {
    fn seed(&self, x: &[f64], grid: &Arc<DiskGrid>) -> Result<DiskMap>;
    fn observe(&self, u: &DiskMap) -> Result<Vec<f64>>;
    fn target(&self) -> &[f64];
}

struct TwoPoint {
    t: f64,
    target: Vec<f64>,
}

impl SeedProblem for TwoPoint {
    fn seed(&self, x: &[f64], grid: &Arc<DiskGrid>) -> Result<DiskMap> {
        let d = x.len() / 2;
        affine_target(&x[..d], &x[d..], self.t, grid)
    }

    fn observe(&self, u: &DiskMap) -> Result<Vec<f64>> {
        let mut out = eval_interp(u, Complex64::new(0.0, 0.0))?;
        out.extend(eval_interp(u, Complex64::new(self.t, 0.0))?);
        Ok(out)
    }

    fn target(&self) -> &[f64] {
        &self.target
    }
}

struct ValueAndSlope {
    target: Vec<f64>,
}

impl SeedProblem for ValueAndSlope {
    fn seed(&self, x: &[f64], grid: &Arc<DiskGrid>) -> Result<DiskMap> {
        let d = x.len() / 2;
        Ok(complex_affine(grid, &x[..d], &x[d..]))
    }

    fn observe(&self, u: &DiskMap) -> Result<Vec<f64>> {
        let o = u.grid().origin();
        let mut out = u.value(o).to_vec();
        let mut dz = vec![0.0; u.dim()];
        u.dz_at(o, &mut dz);
        out.extend(dz);
        Ok(out)
    }

    fn target(&self) -> &[f64] {
        &self.target
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// Broyden iteration at fixed ε. The mismatch is reported in physical units, ε·|g − target/ε|.
fn match_seed(
    j: &StructureField,
    cfg: &SolverConfig,
    grid: &Arc<DiskGrid>,
    problem: &dyn SeedProblem,
) -> Result<DiskSolution> {
    let eps = cfg.epsilon;
    let scale = if eps > 0.0 { 1.0 / eps } else { 1.0 };
    let goal: Vec<f64> = problem.target().iter().map(|x| x * scale).collect();
    let physical = if eps > 0.0 { eps } else { 1.0 };
    let m = goal.len();

    let evaluate = |x: &[f64]| -> Result<(DiskSolution, DVector<f64>)> {
        let sol = picard_solve(j, cfg, &problem.seed(x, grid)?)?;
        let g = problem.observe(&sol.u)?;
        let f = DVector::from_iterator(m, g.iter().zip(&goal).map(|(a, b)| a - b));
        Ok((sol, f))
    };

    let mut x = DVector::from_column_slice(&goal);
    let (mut sol, mut f) = evaluate(x.as_slice())?;
    let mut jac = DMatrix::<f64>::identity(m, m);
    let mut steps = 0;
    loop {
        let mismatch = physical * sup(f.as_slice());
        if mismatch < cfg.tol_newton {
            sol.newton_steps = steps;
            return Ok(sol);
        }
        if steps >= cfg.max_newton {
            return Err(Error::NewtonFailed { steps, mismatch });
        }
        let s = match jac.clone().lu().solve(&(-&f)) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => return Err(Error::NewtonFailed { steps, mismatch }),
        };
        let x_new = &x + &s;
        let (sol_new, f_new) = evaluate(x_new.as_slice())?;
        steps += 1;
        if sup(f_new.as_slice()) >= sup(f.as_slice()) {
            // the secant model stopped helping: rebuild the Jacobian by finite differences
            jac = finite_difference_jacobian(&evaluate, &x, &f, cfg.fd_step * (1.0 + sup(x.as_slice())))?;
            continue;
        }
        let y = &f_new - &f;
        let ss = s.dot(&s);
        if ss > 0.0 {
            jac += (&y - &jac * &s) * s.transpose() / ss;
        }
        x = x_new;
        f = f_new;
        sol = sol_new;
    }
}

fn finite_difference_jacobian(
    evaluate: &dyn Fn(&[f64]) -> Result<(DiskSolution, DVector<f64>)>,
    x: &DVector<f64>,
    f: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    let m = x.len();
    let mut jac = DMatrix::zeros(m, m);
    for c in 0..m {
        let mut xp = x.clone();
        xp[c] += step;
        let (_, fp) = evaluate(xp.as_slice())?;
        jac.set_column(c, &((fp - f) / step));
    }
    Ok(jac)
}

// Runs `solve` at cfg.epsilon, halving it after each divergence.
fn with_continuation(cfg: &SolverConfig, solve: impl Fn(&SolverConfig) -> Result<DiskSolution>) -> Result<DiskSolution> {
    cfg.validate()?;
    let mut c = *cfg;
    let mut halvings = 0;
    loop {
        match solve(&c) {
            Err(Error::Diverged { .. }) if halvings < cfg.continuation => {
                c.epsilon *= 0.5;
                halvings += 1;
            }
            other => return other,
        }
    }
}

fn constant_disk(j: &StructureField, cfg: &SolverConfig, grid: &Arc<DiskGrid>, p: &[f64]) -> Result<DiskSolution> {
    let v = DiskMap::constant(grid.clone(), p);
    let u = if cfg.epsilon > 0.0 { v.scaled(1.0 / cfg.epsilon) } else { v.clone() };
    let residual = cr_residual(j, &v)?;
    Ok(DiskSolution { u, v, residual, iterations: 0, epsilon_used: cfg.epsilon, step_history: Vec::new(), newton_steps: 0 })
}

/// A J-holomorphic disk with `v(0) = p0` and `v(t) = q0`.
pub fn two_point_disk(
    j: &StructureField,
    p0: &[f64],
    q0: &[f64],
    t: f64,
    cfg: &SolverConfig,
    grid: &Arc<DiskGrid>,
) -> Result<DiskSolution> {
    check_point("p0", p0)?;
    check_point("q0", q0)?;
    if p0.len() != j.dim() || q0.len() != j.dim() {
        let got = if p0.len() != j.dim() { p0.len() } else { q0.len() };
        return Err(Error::DimensionMismatch { expected: j.dim(), got });
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParams(format!("interpolation node t must lie in (0, 1), got {t}")));
    }
    if p0 == q0 {
        cfg.validate()?;
        return constant_disk(j, cfg, grid, p0);
    }
    let target = [p0, q0].concat();
    with_continuation(cfg, |c| match_seed(j, c, grid, &TwoPoint { t, target: target.clone() }))
}

/// A J-holomorphic disk with `v(0) = p` and `∂v(0) = w`.
pub fn derivative_disk(
    j: &StructureField,
    p: &[f64],
    w: &[f64],
    cfg: &SolverConfig,
    grid: &Arc<DiskGrid>,
) -> Result<DiskSolution> {
    check_point("p", p)?;
    check_point("w", w)?;
    if p.len() != j.dim() || w.len() != j.dim() {
        let got = if p.len() != j.dim() { p.len() } else { w.len() };
        return Err(Error::DimensionMismatch { expected: j.dim(), got });
    }
    if w.iter().all(|&x| x == 0.0) {
        cfg.validate()?;
        return constant_disk(j, cfg, grid, p);
    }
    let target = [p, w].concat();
    with_continuation(cfg, |c| match_seed(j, c, grid, &ValueAndSlope { target: target.clone() }))
}

/// Endpoint errors `(‖v(0) − p0‖, ‖v(t) − q0‖)` of a disk.
pub fn endpoint_errors(v: &DiskMap, p0: &[f64], q0: &[f64], t: f64) -> Result<(f64, f64)> {
    let a = eval_interp(v, Complex64::new(0.0, 0.0))?;
    let b = eval_interp(v, Complex64::new(t, 0.0))?;
    Ok((norm(a.iter().zip(p0).map(|(x, y)| x - y)), norm(b.iter().zip(q0).map(|(x, y)| x - y))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diskgrid::make_grid;
    use crate::structure::{gallery, GalleryParams};

    fn structure(name: &str, epsilon: f64) -> StructureField {
        gallery(name, &GalleryParams { epsilon, ..GalleryParams::default() }).unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = SolverConfig::default();
        assert_eq!((cfg.epsilon, cfg.tol_fixpoint, cfg.tol_newton), (0.1, 1e-10, 1e-8));
        assert!(cfg.validate().is_ok());
        assert!(cfg.with_epsilon(1.5).validate().is_err());
        assert!(SolverConfig { fd_step: 0.0, ..cfg }.validate().is_err());
        let parsed: SolverConfig = serde_json::from_str(r#"{"epsilon": 0.05}"#).unwrap();
        assert_eq!(parsed, cfg.with_epsilon(0.05));
        assert!(serde_json::from_str::<SolverConfig>(r#"{"epsilom": 0.05}"#).is_err());
    }

    #[test]
    fn affine_target_interpolates() {
        let g = make_grid(1.0, 17).unwrap();
        let (p, q) = ([0.3, -0.2], [-0.1, 0.4]);
        let h = affine_target(&p, &q, 0.5, &g).unwrap();
        // h(z) = p + 2z(q − p)
        for i in 0..g.len() {
            let z = g.node(i);
            let expect = Complex64::new(p[0], p[1]) + 2.0 * z * Complex64::new(q[0] - p[0], q[1] - p[1]);
            assert!((h.value(i)[0] - expect.re).abs() < 1e-15 && (h.value(i)[1] - expect.im).abs() < 1e-15, "{i}");
        }
        assert_eq!(eval_interp(&h, Complex64::new(0.5, 0.0)).unwrap(), q.to_vec());
        let flat = affine_target(&p, &p, 0.3, &g).unwrap();
        assert!(flat.values().chunks(2).all(|v| v == p));
        assert!(affine_target(&p, &q, 1.0, &g).is_err());

        let g = make_grid(1.0, 21).unwrap();
        let h = affine_target(&p, &q, 0.1, &g).unwrap();
        assert_eq!(eval_interp(&h, Complex64::new(0.1, 0.0)).unwrap(), q.to_vec());
    }

    #[test]
    fn zero_epsilon_returns_target_in_one_iteration() {
        let j = structure("conjugated", 0.1);
        let g = make_grid(1.0, 17).unwrap();
        let h = affine_target(&[0.5, 0.1], &[-0.3, 0.2], 0.5, &g).unwrap();
        let sol = picard_solve(&j, &SolverConfig::default().with_epsilon(0.0), &h).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.u.values(), h.values());
    }

    #[test]
    fn standard_structure_is_the_identity_on_targets() {
        let j = structure("standard", 0.0);
        let g = make_grid(1.0, 17).unwrap();
        let h = affine_target(&[0.5, 0.1], &[-0.3, 0.2], 0.25, &g).unwrap();
        for eps in [0.0, 0.1, 0.5] {
            let sol = picard_solve(&j, &SolverConfig::default().with_epsilon(eps), &h).unwrap();
            assert!(sol.u.sup_distance(&h).unwrap() < 1e-12);
            assert_eq!(sol.v.values(), sol.u.scaled(eps).values());
        }
    }

    #[test]
    fn residual_of_simple_maps() {
        let j = structure("standard", 0.0);
        let g = make_grid(1.0, 17).unwrap();
        let z = DiskMap::from_complex_fn(g.clone(), 1, |z| vec![z]);
        assert!(cr_residual(&j, &z).unwrap() < 1e-14);
        let zbar = DiskMap::from_complex_fn(g.clone(), 1, |z| vec![z.conj()]);
        assert!((cr_residual(&j, &zbar).unwrap() - 1.0).abs() < 1e-14);
        let wrong = DiskMap::zeros(g, 4);
        assert!(matches!(cr_residual(&j, &wrong), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn singular_points_report_the_node() {
        let minus = StructureField::constant(
            crate::structure::ComplexConvention::new(1).unwrap(),
            crate::structure::DomainDescriptor::chart_ball(2, 1.0).unwrap(),
            -crate::structure::ComplexConvention::new(1).unwrap().jst(),
        );
        let g = make_grid(1.0, 9).unwrap();
        let v = DiskMap::from_complex_fn(g, 1, |z| vec![z]);
        match cr_residual(&minus, &v) {
            Err(Error::Singular { node: Some(_), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conjugated_solve_contracts_and_has_small_residual() {
        let j = structure("conjugated", 0.1);
        let g = make_grid(1.0, 33).unwrap();
        let cfg = SolverConfig::default().with_epsilon(0.05);
        let h = affine_target(&[0.6, -0.3], &[-0.2, 0.5], 0.5, &g).unwrap();
        let sol = picard_solve(&j, &cfg, &h).unwrap();
        assert!(sol.iterations < 50, "{}", sol.iterations);
        assert!(sol.contraction_ratio().unwrap() <= 0.9);
        assert!(sol.residual < 1e-3, "{}", sol.residual);
        // the solve is not trivial
        assert!(sol.u.sup_distance(&h).unwrap() > 1e-4);
    }

    #[test]
    fn standard_two_point_disk_is_affine() {
        let j = structure("standard", 0.0);
        let g = make_grid(1.0, 17).unwrap();
        let (p, q) = ([0.2, -0.7], [0.4, 0.1]);
        let sol = two_point_disk(&j, &p, &q, 0.25, &SolverConfig::default(), &g).unwrap();
        assert_eq!(sol.newton_steps, 0);
        let h = affine_target(&p, &q, 0.25, &g).unwrap();
        assert!(sol.v.sup_distance(&h).unwrap() < 1e-12);

        let zero = two_point_disk(&j, &[0.0, 0.0], &[0.0, 0.0], 0.5, &SolverConfig::default(), &g).unwrap();
        assert!(zero.v.values().iter().all(|&x| x == 0.0));
        assert_eq!(zero.residual, 0.0);
    }

    #[test]
    fn conjugated_two_point_disk_hits_endpoints() {
        let j = structure("conjugated", 0.1);
        let g = make_grid(1.0, 33).unwrap();
        let (p, q) = ([0.0, 0.0], [0.1, 0.0]);
        let sol = two_point_disk(&j, &p, &q, 0.5, &SolverConfig::default(), &g).unwrap();
        let (e0, e1) = endpoint_errors(&sol.v, &p, &q, 0.5).unwrap();
        assert!(e0 < 1e-6 && e1 < 1e-6, "{e0} {e1}");
        assert!(sol.residual < 1e-3);
    }

    #[test]
    fn derivative_disks() {
        let g = make_grid(1.0, 33).unwrap();
        let std = structure("standard", 0.0);
        let (p, w) = ([0.1, 0.2], [0.3, -0.1]);
        let sol = derivative_disk(&std, &p, &w, &SolverConfig::default(), &g).unwrap();
        let affine = complex_affine(&g, &p, &w);
        assert!(sol.v.sup_distance(&affine).unwrap() < 1e-12);

        let flat = derivative_disk(&std, &p, &[0.0, 0.0], &SolverConfig::default(), &g).unwrap();
        assert!(flat.v.values().chunks(2).all(|v| v == p));

        let j = structure("conjugated", 0.1);
        let w = [0.12, 0.16];
        let sol = derivative_disk(&j, &[0.05, 0.0], &w, &SolverConfig::default(), &g).unwrap();
        let mut dz = vec![0.0; 2];
        sol.v.dz_at(g.origin(), &mut dz);
        assert!((dz[0] - w[0]).abs() < 1e-6 && (dz[1] - w[1]).abs() < 1e-6, "{dz:?}");
        assert!((sol.v.at_origin()[0] - 0.05).abs() < 1e-6);
    }

    #[test]
    fn contraction_ratio_skips_the_first_step() {
        assert_eq!(contraction_ratio(&[1.0, 2.0, 1.0, 0.8]), Some(0.8));
        assert_eq!(contraction_ratio(&[1.0]), None);
    }
}
