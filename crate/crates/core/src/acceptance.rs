//! The acceptance suite behind `jdisk selftest` and the `acceptance` test.
//!
//! Criteria 1 to 9 run in process. Determinism of the selftest report itself
//! (criterion 10) needs two runs of the binary and lives in the test.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::brody::{brody_reparametrize, extract_line, scaling_sup, ExtractOptions, FamilySpec};
use crate::cauchygreen::{cg_apply, cg_residual, cg_shared};
use crate::diskgrid::{make_grid, DiskMap};
use crate::error::{Error, Result};
use crate::kobayashi::{
    chain_cost, derivative_bound, estimate_distance, pushforward_chain, BoundOptions, ComplexLinear, DistanceOptions,
    Translation,
};
use crate::solver::{affine_target, endpoint_errors, picard_solve, two_point_disk, SolverConfig};
use crate::structure::{gallery, q_matrix, DomainDescriptor, GalleryParams, StructureField};

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "structure algebra"),
    (2, "Cauchy-Green residual"),
    (3, "integrable reduction"),
    (4, "non-integrable solve"),
    (5, "plane distance collapses"),
    (6, "distance decreasing"),
    (7, "derivative bound indicator"),
    (8, "reparametrization equalities"),
    (9, "line extraction"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub metrics: BTreeMap<String, f64>,
    pub failures: Vec<String>,
}

impl CriterionResult {
    /// One table line, `PASS  3 integrable reduction`.
    pub fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!("{status} {:>2} {}", self.id, self.title);
        if !self.failures.is_empty() {
            s.push_str(&format!(" ({})", self.failures.join("; ")));
        }
        s
    }
}

// Collects metrics and failed checks for one criterion.
struct Probe {
    metrics: BTreeMap<String, f64>,
    failures: Vec<String>,
}

impl Probe {
    fn new() -> Self {
        Self { metrics: BTreeMap::new(), failures: Vec::new() }
    }

    fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    // `value < bound`, recorded as a metric
    fn below(&mut self, name: &str, value: f64, bound: f64) {
        self.metric(name, value);
        self.check(value < bound, format!("{name} = {value:.3e} not below {bound:.1e}"));
    }
}

fn structure(name: &str, n: usize, epsilon: f64) -> Result<StructureField> {
    gallery(name, &GalleryParams { n, epsilon, ..GalleryParams::default() })
}

fn unit_ball() -> DomainDescriptor {
    DomainDescriptor::ChartBall { center: vec![0.0, 0.0], radius: 1.0 }
}

/// Empirical orders `log2(e_k / e_{k+1})` for a sequence of halving spacings.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

pub fn run_criterion(id: u8, seed: u64) -> CriterionResult {
    let title = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1).to_string();
    let mut probe = Probe::new();
    let outcome = match id {
        1 => structure_algebra(&mut probe, seed),
        2 => cauchy_green(&mut probe),
        3 => integrable_reduction(&mut probe, seed),
        4 => non_integrable(&mut probe),
        5 => plane_distance(&mut probe, seed),
        6 => distance_decreasing(&mut probe),
        7 => derivative_indicator(&mut probe),
        8 => reparametrization(&mut probe),
        9 => line_extraction(&mut probe),
        _ => Err(Error::Config(format!("no acceptance criterion {id}"))),
    };
    if let Err(e) = outcome {
        probe.failures.push(format!("error: {e}"));
    }
    CriterionResult { id, title, pass: probe.failures.is_empty(), metrics: probe.metrics, failures: probe.failures }
}

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|(id, _)| run_criterion(*id, seed)).collect()
}

fn structure_algebra(probe: &mut Probe, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut square: f64 = 0.0;
    let mut equivalence: f64 = 0.0;
    let mut q_standard: f64 = 0.0;
    for n in [1, 2] {
        for (name, eps) in [("standard", 0.0), ("conjugated", 0.05), ("conjugated", 0.1)] {
            let j = structure(name, n, eps)?;
            let conv = j.convention();
            let jst = conv.jst();
            let d = j.dim();
            let points = j.domain().sample_points(d, 1000, &mut rng);
            let dirs = DomainDescriptor::chart_ball(d, 1.0)?.sample_points(d, 1000, &mut rng);
            for (p, a) in points.iter().zip(&dirs) {
                let m = j.eval(p);
                let id = nalgebra::DMatrix::<f64>::identity(d, d);
                square = square.max((&m * &m + &id).amax());
                let q = q_matrix(&j, p)?;
                if name == "standard" {
                    q_standard = q_standard.max(q.amax());
                }
                let a = DVector::from_column_slice(a);
                // u_y = J u_x  ⟹  ∂̄u = q ∂u
                let uy = &m * &a;
                let dz = (&a - &jst * &uy) * 0.5;
                let dzbar = (&a + &jst * &uy) * 0.5;
                equivalence = equivalence.max((&dzbar - &q * &dz).amax());
                // ∂̄u = q ∂u  ⟹  u_y = J u_x, taking ∂u = a
                let dzbar = &q * &a;
                let ux = &a + &dzbar;
                let uy = &jst * (&a - &dzbar);
                equivalence = equivalence.max((&uy - &m * &ux).amax());
            }
        }
    }
    probe.below("max |J² + Id|", square, 1e-12);
    probe.metric("max |q_standard|", q_standard);
    probe.check(q_standard == 0.0, "q_matrix of the standard structure is not exactly zero");
    probe.below("equivalence residual", equivalence, 1e-10);
    Ok(())
}

fn cauchy_green(probe: &mut Probe) -> Result<()> {
    let sizes = [33, 65, 129];
    type Phi = fn(Complex64) -> Complex64;
    let cases: [(&str, Phi, bool); 6] = [
        ("1", |_| Complex64::new(1.0, 0.0), true),
        ("Re z", |z| Complex64::new(z.re, 0.0), true),
        ("z", |z| z, true),
        ("z^2", |z| z * z, false),
        ("conj(z)^2", |z| z.conj() * z.conj(), false),
        ("|z|^2", |z| Complex64::new(z.norm_sqr(), 0.0), false),
    ];
    let mut errors = vec![Vec::new(); cases.len()];
    let mut zbar_error = 0.0;
    for &n in &sizes {
        let grid = make_grid(1.0, n)?;
        let op = cg_shared(&grid);
        for (k, (_, phi, _)) in cases.iter().enumerate() {
            let map = DiskMap::from_complex_fn(grid.clone(), 1, |z| vec![phi(z)]);
            errors[k].push(cg_residual(&op, &map)?);
        }
        if n == 129 {
            let p1 = cg_apply(&op, &DiskMap::constant(grid.clone(), &[1.0, 0.0]))?;
            zbar_error = grid
                .interior_nodes()
                .map(|i| {
                    let z = grid.node(i);
                    let v = p1.value(i);
                    Complex64::new(v[0] - z.re, v[1] + z.im).norm()
                })
                .fold(0.0, f64::max);
        }
    }
    // an exact residual has no order; below this it counts as converged
    const EXACT: f64 = 1e-12;
    for ((name, _, required_small), errs) in cases.iter().zip(&errors) {
        for (n, e) in sizes.iter().zip(errs) {
            probe.metric(format!("residual {name} N={n}"), *e);
        }
        let ords = orders(errs);
        for (i, o) in ords.iter().enumerate() {
            probe.metric(format!("order {name} {}-{}", sizes[i], sizes[i + 1]), *o);
        }
        if *required_small {
            probe.check(errs[1] < 5e-2, format!("residual {name} at N=65 is {:.3e}", errs[1]));
        }
        let converged = errs.iter().all(|e| *e < EXACT);
        let ordered = ords.iter().all(|o| *o >= 1.0);
        probe.check(converged || ordered, format!("residual {name} neither exact nor first order: {}", list(errs)));
    }
    probe.below("sup |P1 - conj(z)| N=129", zbar_error, 5e-2);
    Ok(())
}

fn integrable_reduction(probe: &mut Probe, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
    let j = structure("standard", 1, 0.0)?;
    let grid = make_grid(1.0, 33)?;
    let cfg = SolverConfig::default();
    let points = unit_ball().sample_points(2, 40, &mut rng);
    let (mut shape, mut ends): (f64, f64) = (0.0, 0.0);
    for pair in points.chunks_exact(2) {
        let (p, q) = (&pair[0], &pair[1]);
        for t in [0.5, 0.25] {
            let sol = two_point_disk(&j, p, q, t, &cfg, &grid)?;
            let h = affine_target(p, q, t, &grid)?;
            shape = shape.max(sol.v.sup_distance(&h)?);
            let (e0, e1) = endpoint_errors(&sol.v, p, q, t)?;
            ends = ends.max(e0).max(e1);
        }
    }
    probe.below("sup |v - h|", shape, 1e-12);
    probe.below("endpoint error", ends, 1e-12);
    Ok(())
}

fn non_integrable(probe: &mut Probe) -> Result<()> {
    let j = structure("conjugated", 1, 0.1)?;
    let cfg = SolverConfig::default().with_epsilon(0.05);
    let (p, q) = ([0.6, -0.3], [-0.2, 0.5]);
    let mut residuals = Vec::new();
    for n in [33, 65, 129] {
        let grid = make_grid(1.0, n)?;
        let sol = picard_solve(&j, &cfg, &affine_target(&p, &q, 0.5, &grid)?)?;
        probe.metric(format!("cr residual N={n}"), sol.residual);
        residuals.push(sol.residual);
        if n == 65 {
            probe.metric("iterations N=65", sol.iterations as f64);
            probe.check(sol.iterations <= 50, format!("{} Picard iterations", sol.iterations));
            let ratio = sol.contraction_ratio().unwrap_or(0.0);
            probe.metric("contraction ratio N=65", ratio);
            probe.check(ratio <= 0.9, format!("contraction ratio {ratio:.3}"));
            probe.check(sol.residual < 1e-3, format!("cr residual {:.3e} at N=65", sol.residual));
        }
    }
    for (i, o) in orders(&residuals).iter().enumerate() {
        probe.metric(format!("residual order step {}", i + 1), *o);
        probe.check(*o >= 1.0, format!("residual order {o:.2} below 1"));
    }
    let grid = make_grid(1.0, 65)?;
    let (p0, q0) = ([0.0, 0.0], [0.1, 0.0]);
    let sol = two_point_disk(&j, &p0, &q0, 0.5, &cfg, &grid)?;
    let (e0, e1) = endpoint_errors(&sol.v, &p0, &q0, 0.5)?;
    probe.below("two-point endpoint error", e0.max(e1), 1e-6);
    Ok(())
}

fn plane_distance(probe: &mut Probe, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 5);
    let j = structure("standard", 1, 0.0)?;
    let ladders: [&[f64]; 3] = [&[0.5, 0.9], &[0.2, 0.5, 0.9], &[0.05, 0.1, 0.2, 0.5, 0.9]];
    let bound = 0.05f64.atanh() + 1e-9;
    let points = unit_ball().sample_points(2, 6, &mut rng);
    let mut worst: f64 = 0.0;
    for pair in points.chunks_exact(2) {
        let mut last = f64::INFINITY;
        for ts in ladders {
            let opts = DistanceOptions { k_max: 2, t_grid: ts.to_vec(), nodes: 17, ..DistanceOptions::default() };
            let est = estimate_distance(&j, &unit_ball(), &pair[0], &pair[1], &opts)?;
            probe.check(est.upper <= last, format!("upper rose from {last} to {} when refining t_grid", est.upper));
            last = est.upper;
        }
        worst = worst.max(last);
    }
    probe.metric("arctanh(0.05)", 0.05f64.atanh());
    probe.metric("max upper", worst);
    probe.check(worst <= bound, format!("upper {worst} exceeds arctanh(0.05)"));
    Ok(())
}

fn distance_decreasing(probe: &mut Probe) -> Result<()> {
    let opts = DistanceOptions { k_max: 2, t_grid: vec![0.3, 0.6], nodes: 33, ..DistanceOptions::default() };
    let mut cost_gap: f64 = 0.0;
    let mut residual: f64 = 0.0;

    let torus = DomainDescriptor::FlatTorus;
    let flat = structure("torus-flat", 1, 0.0)?;
    let est = estimate_distance(&flat, &torus, &[0.1, 0.2], &[0.6, 0.9], &opts)?;
    let image = pushforward_chain(&est.best_chain, &Translation(vec![0.37, -0.21]), &flat, &torus, 1e-3)?;
    cost_gap = cost_gap.max((chain_cost(&image)? - chain_cost(&est.best_chain)?).abs());
    residual = image.links.iter().fold(residual, |m, l| m.max(l.disk.residual));

    let standard = structure("standard", 1, 0.0)?;
    let wide = DomainDescriptor::chart_ball(2, 2.0)?;
    let est = estimate_distance(&standard, &unit_ball(), &[0.1, -0.2], &[-0.3, 0.25], &opts)?;
    let map = ComplexLinear::scalar(1, Complex64::new(1.5, 0.5));
    let image = pushforward_chain(&est.best_chain, &map, &standard.clone().with_domain(wide.clone()), &wide, 1e-3)?;
    cost_gap = cost_gap.max((chain_cost(&image)? - chain_cost(&est.best_chain)?).abs());
    residual = image.links.iter().fold(residual, |m, l| m.max(l.disk.residual));

    probe.metric("cost change", cost_gap);
    probe.check(cost_gap <= 1e-15, format!("cost changed by {cost_gap:.3e}"));
    probe.below("composed residual", residual, 1e-3);
    Ok(())
}

fn derivative_indicator(probe: &mut Probe) -> Result<()> {
    let standard = structure("standard", 1, 0.0)?;
    let opts = BoundOptions { nodes: 33, ..BoundOptions::default() };
    let report = derivative_bound(&standard, &unit_ball(), &[0.0, 0.0], &[0.6, 0.8], &opts)?;
    probe.metric("unit ball bound", report.lower_bound);
    probe.check((report.lower_bound - 1.0).abs() <= 0.05, format!("unit ball bound {}", report.lower_bound));
    probe.check(!report.unbounded_suspected, "unit ball flagged unbounded");

    let flat = structure("torus-flat", 1, 0.0)?;
    let opts = BoundOptions { lambda_max: 1e3, nodes: 33, ..BoundOptions::default() };
    let report = derivative_bound(&flat, &DomainDescriptor::FlatTorus, &[0.3, 0.7], &[0.6, 0.8], &opts)?;
    probe.metric("torus bound", report.lower_bound);
    probe.check(report.lower_bound == 1e3 && report.unbounded_suspected, "torus did not reach λ_max = 1e3");
    Ok(())
}

fn reparametrization(probe: &mut Probe) -> Result<()> {
    let grid = make_grid(1.0, 129)?;
    let f = DiskMap::from_complex_fn(grid.clone(), 1, |z| vec![z + z * z]);
    let res = brody_reparametrize(&f, 0.5)?;
    probe.metric("t0", res.t0);
    probe.check(res.z0.is_some(), "no recentering happened");
    probe.below("|s_sup - |f'(0)||", (res.s_sup - res.s_at_0).abs(), 1e-3);
    probe.below("||f'(0)| - c|", (res.s_at_0 - 0.5).abs(), 1e-3);
    let square = DiskMap::from_complex_fn(grid, 1, |z| vec![z * z]);
    let s = scaling_sup(&square, 1.0)?;
    probe.below("|s(1) - 4/(3 sqrt 3)|", (s - 4.0 / (3.0 * 3f64.sqrt())).abs(), 1e-3);
    Ok(())
}

fn line_extraction(probe: &mut Probe) -> Result<()> {
    let flat = structure("torus-flat", 1, 0.0)?;
    let family = FamilySpec::Dilation { p: vec![0.25, 0.5], nu: vec![1.0, 0.0] };
    let opts = ExtractOptions { window: 2.0, tol: 1e-10, n_max: 6, nodes: 33, ..ExtractOptions::default() };
    let report = extract_line(&flat, &family, &opts)?;
    let delta3 = report.steps.get(2).and_then(|s| s.delta).unwrap_or(f64::INFINITY);
    probe.below("flat delta at step 3", delta3, 1e-10);
    probe.check(report.converged, "flat pipeline did not converge");
    let line = report.final_candidate.as_ref().ok_or(Error::Config("no window reached".into()))?;
    probe.below("flat |g'(0)| - 1", (line.derivative_at_0 - 1.0).abs(), 1e-6);
    probe.below("flat cr residual", line.cr_residual, 1e-10);
    let affine = line
        .samples
        .grid()
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let v = line.samples.value(i);
            (v[0] - 0.25 - z.re).abs().max((v[1] - 0.5 - z.im).abs())
        })
        .fold(0.0, f64::max);
    probe.below("flat distance to affine line", affine, 1e-10);

    let perturbed = structure("torus-perturbed", 1, 0.05)?;
    let family = FamilySpec::DerivativeLadder { p: vec![0.3, 0.2], nu: vec![1.0, 0.0], lambdas: vec![2.0, 3.0, 4.0, 5.0, 6.0] };
    let opts = ExtractOptions { window: 1.5, tol: 1e-10, n_max: 5, nodes: 97, ..ExtractOptions::default() };
    let report = extract_line(&perturbed, &family, &opts)?;
    let line = report.final_candidate.as_ref().ok_or(Error::Config("no window reached".into()))?;
    probe.below("perturbed |g'(0)| - 1", (line.derivative_at_0 - 1.0).abs(), 1e-2);
    probe.below("perturbed cr residual", line.cr_residual, 1e-2);
    let deltas = report.deltas();
    for (i, d) in deltas.iter().enumerate() {
        probe.metric(format!("perturbed delta {}", i + 1), *d);
    }
    probe.check(deltas.len() >= 2, "fewer than two deltas");
    probe.check(deltas.windows(2).all(|w| w[1] < w[0]), format!("deltas not decreasing: {}", list(&deltas)));
    Ok(())
}
