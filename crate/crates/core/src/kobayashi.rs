//! Disk chains, upper bounds on the Kobayashi pseudo-distance and the
//! derivative-supremum probe.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diskgrid::{eval_interp, make_grid, poincare_distance, DiskMap};
use crate::error::{Error, Result};
use crate::solver::{cr_residual, derivative_disk, two_point_disk, DiskSolution, SolverConfig};
use crate::structure::{DomainDescriptor, StructureField};

/// One holomorphic disk `f` of a chain with `f(a) = from` and `f(b) = to`.
#[derive(Debug, Clone)]
pub struct ChainLink {
    pub disk: Arc<DiskSolution>,
    pub a: Complex64,
    pub b: Complex64,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub cost: f64,
}

impl ChainLink {
    pub fn new(disk: Arc<DiskSolution>, a: Complex64, b: Complex64, from: Vec<f64>, to: Vec<f64>) -> Result<Self> {
        let cost = poincare_distance(a, b, 1.0)?;
        Ok(Self { disk, a, b, from, to, cost })
    }

    fn reversed(&self) -> Self {
        Self {
            disk: self.disk.clone(),
            a: self.b,
            b: self.a,
            from: self.to.clone(),
            to: self.from.clone(),
            cost: self.cost,
        }
    }
}

/// Waypoints `p_0, …, p_k` joined by `k` links.
#[derive(Debug, Clone)]
pub struct Chain {
    pub links: Vec<ChainLink>,
    pub waypoints: Vec<Vec<f64>>,
    pub domain: DomainDescriptor,
    /// Endpoint matching tolerance, in the sup norm.
    pub tol: f64,
}

impl Chain {
    /// The chain with no links from `p` to itself.
    pub fn empty(p: Vec<f64>, domain: DomainDescriptor, tol: f64) -> Self {
        Self { links: Vec::new(), waypoints: vec![p], domain, tol }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn start(&self) -> &[f64] {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &[f64] {
        self.waypoints.last().expect("a chain has at least one waypoint")
    }

    /// The same disks traversed backwards, with `a` and `b` swapped.
    pub fn reversed(&self) -> Self {
        Self {
            links: self.links.iter().rev().map(ChainLink::reversed).collect(),
            waypoints: self.waypoints.iter().rev().cloned().collect(),
            domain: self.domain.clone(),
            tol: self.tol,
        }
    }

    /// `self` followed by `other`; the end of `self` must be the start of `other`.
    pub fn concat(&self, other: &Chain) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::InvalidChain("chains live on different domains".into()));
        }
        let gap = sup_gap(&self.domain, self.end(), other.start());
        let tol = self.tol.max(other.tol);
        if gap > tol {
            return Err(Error::InvalidChain(format!("chains do not meet (gap {gap:.3e})")));
        }
        let mut waypoints = self.waypoints.clone();
        waypoints.extend(other.waypoints.iter().skip(1).cloned());
        let mut links = self.links.clone();
        links.extend(other.links.iter().cloned());
        Ok(Self { links, waypoints, domain: self.domain.clone(), tol })
    }

    pub fn record(&self) -> ChainRecord {
        ChainRecord {
            total_cost: self.links.iter().map(|l| l.cost).sum(),
            waypoints: self.waypoints.clone(),
            links: self
                .links
                .iter()
                .map(|l| LinkRecord {
                    a: [l.a.re, l.a.im],
                    b: [l.b.re, l.b.im],
                    from: l.from.clone(),
                    to: l.to.clone(),
                    cost: l.cost,
                    residual: l.disk.residual,
                    epsilon_used: l.disk.epsilon_used,
                    iterations: l.disk.iterations,
                    newton_steps: l.disk.newton_steps,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkRecord {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub cost: f64,
    pub residual: f64,
    pub epsilon_used: f64,
    pub iterations: usize,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainRecord {
    pub total_cost: f64,
    pub waypoints: Vec<Vec<f64>>,
    pub links: Vec<LinkRecord>,
}

fn sup_gap(domain: &DomainDescriptor, p: &[f64], q: &[f64]) -> f64 {
    if p.len() != q.len() {
        return f64::INFINITY;
    }
    domain.displacement(p, q).iter().fold(0.0, |m, d| m.max(d.abs()))
}

/// Total Poincaré cost of a chain after checking that it is connected and
/// that every disk passes through its declared endpoints.
pub fn chain_cost(c: &Chain) -> Result<f64> {
    if c.waypoints.len() != c.links.len() + 1 {
        return Err(Error::InvalidChain(format!(
            "{} links need {} waypoints, got {}",
            c.links.len(),
            c.links.len() + 1,
            c.waypoints.len()
        )));
    }
    let mut total = 0.0;
    for (i, link) in c.links.iter().enumerate() {
        let checks = [
            ("start", &link.from, &c.waypoints[i]),
            ("end", &link.to, &c.waypoints[i + 1]),
        ];
        for (which, declared, waypoint) in checks {
            let gap = sup_gap(&c.domain, declared, waypoint);
            if gap > c.tol {
                return Err(Error::InvalidChain(format!("link {i} {which} misses its waypoint by {gap:.3e}")));
            }
        }
        for (which, z, declared) in [("a", link.a, &link.from), ("b", link.b, &link.to)] {
            let value = eval_interp(&link.disk.v, z)
                .map_err(|e| Error::InvalidChain(format!("link {i}: cannot evaluate at {which}: {e}")))?;
            let gap = sup_gap(&c.domain, &value, declared);
            if gap > c.tol {
                return Err(Error::InvalidChain(format!("link {i}: disk at {which} misses its endpoint by {gap:.3e}")));
            }
        }
        let cost = poincare_distance(link.a, link.b, 1.0)?;
        if cost != link.cost {
            return Err(Error::InvalidChain(format!("link {i} declares cost {} but ρ(a, b) = {cost}", link.cost)));
        }
        total += cost;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceOptions {
    pub k_max: usize,
    pub t_grid: Vec<f64>,
    /// Nodes per axis of the unit-disk grid used for every link.
    pub nodes: usize,
    pub cfg: SolverConfig,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self { k_max: 3, t_grid: vec![0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9], nodes: 33, cfg: SolverConfig::default() }
    }
}

impl DistanceOptions {
    fn sorted_t_grid(&self) -> Result<Vec<f64>> {
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if self.t_grid.is_empty() {
            return Err(Error::Config("t_grid is empty".into()));
        }
        if let Some(t) = self.t_grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Config(format!("t_grid values must lie in (0, 1), got {t}")));
        }
        let mut ts = self.t_grid.clone();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        Ok(ts)
    }
}

/// One link attempt of the search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchEntry {
    pub k: usize,
    pub link: usize,
    pub t: f64,
    /// `arctanh(t)` if the disk was found.
    pub cost: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DistanceEstimate {
    pub upper: f64,
    pub best_chain: Chain,
    pub search_log: Vec<SearchEntry>,
}

impl DistanceEstimate {
    pub fn record(&self) -> DistanceRecord {
        DistanceRecord { upper: self.upper, best_chain: self.best_chain.record(), search_log: self.search_log.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRecord {
    pub upper: f64,
    pub best_chain: ChainRecord,
    pub search_log: Vec<SearchEntry>,
}

/// `k + 1` equally spaced points from `p` along the shortest representative of `q`.
fn waypoints(domain: &DomainDescriptor, p: &[f64], q: &[f64], k: usize) -> Vec<Vec<f64>> {
    let d = domain.displacement(p, q);
    (0..=k)
        .map(|i| {
            if i == k && !domain.is_torus() {
                return q.to_vec();
            }
            let s = i as f64 / k as f64;
            p.iter().zip(&d).map(|(x, dx)| x + s * dx).collect()
        })
        .collect()
}

/// Cheapest chain found over `k = 1..=k_max` straight-segment waypoints, each
/// link using the smallest `t` in the grid for which a disk exists.
pub fn estimate_distance(
    j: &StructureField,
    domain: &DomainDescriptor,
    p: &[f64],
    q: &[f64],
    opts: &DistanceOptions,
) -> Result<DistanceEstimate> {
    let ts = opts.sorted_t_grid()?;
    opts.cfg.validate()?;
    for (name, x) in [("p", p), ("q", q)] {
        if x.len() != j.dim() {
            return Err(Error::DimensionMismatch { expected: j.dim(), got: x.len() });
        }
        if !domain.contains(x) {
            return Err(Error::InvalidParams(format!("{name} = {x:?} is outside the domain")));
        }
    }
    let tol = opts.cfg.tol_newton;
    if sup_gap(domain, p, q) == 0.0 {
        return Ok(DistanceEstimate { upper: 0.0, best_chain: Chain::empty(p.to_vec(), domain.clone(), tol), search_log: Vec::new() });
    }
    let grid = make_grid(1.0, opts.nodes)?;
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, f64, Chain)> = None;

    for k in 1..=opts.k_max {
        let points = waypoints(domain, p, q, k);
        let mut links = Vec::with_capacity(k);
        for i in 0..k {
            let (from, to) = (&points[i], &points[i + 1]);
            let mut found = None;
            for &t in &ts {
                match two_point_disk(j, from, to, t, &opts.cfg, &grid) {
                    Ok(sol) => {
                        let link =
                            ChainLink::new(Arc::new(sol), Complex64::new(0.0, 0.0), Complex64::new(t, 0.0), from.clone(), to.clone())?;
                        log.push(SearchEntry { k, link: i, t, cost: Some(link.cost), error: None });
                        found = Some((t, link));
                        break;
                    }
                    Err(e) if e.is_solver_error() => {
                        log.push(SearchEntry { k, link: i, t, cost: None, error: Some(e.kind().to_string()) });
                    }
                    Err(e) => return Err(e),
                }
            }
            match found {
                Some(l) => links.push(l),
                None => break,
            }
        }
        if links.len() < k {
            continue;
        }
        let t_max = links.iter().map(|(t, _)| *t).fold(0.0, f64::max);
        let chain = Chain { links: links.into_iter().map(|(_, l)| l).collect(), waypoints: points, domain: domain.clone(), tol };
        let cost = chain_cost(&chain)?;
        let better = match &best {
            None => true,
            Some((c, bk, bt, _)) => (cost, k, t_max).partial_cmp(&(*c, *bk, *bt)) == Some(std::cmp::Ordering::Less),
        };
        if better {
            best = Some((cost, k, t_max, chain));
        }
    }
    match best {
        Some((upper, _, _, best_chain)) => Ok(DistanceEstimate { upper, best_chain, search_log: log }),
        None => Err(Error::NoChainFound { k_max: opts.k_max }),
    }
}

/// A map between chart domains, assumed holomorphic for the relevant structures.
pub trait HolomorphicMap: Send + Sync {
    fn apply(&self, p: &[f64]) -> Vec<f64>;
}

pub struct Identity;

impl HolomorphicMap for Identity {
    fn apply(&self, p: &[f64]) -> Vec<f64> {
        p.to_vec()
    }
}

pub struct Translation(pub Vec<f64>);

impl HolomorphicMap for Translation {
    fn apply(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.0).map(|(x, d)| x + d).collect()
    }
}

/// `z ↦ A z` for a complex `n × n` matrix acting on interleaved coordinates.
pub struct ComplexLinear(pub DMatrix<Complex64>);

impl ComplexLinear {
    pub fn scalar(n: usize, c: Complex64) -> Self {
        Self(DMatrix::from_diagonal_element(n, n, c))
    }
}

impl HolomorphicMap for ComplexLinear {
    fn apply(&self, p: &[f64]) -> Vec<f64> {
        let z = DVector::from_iterator(p.len() / 2, p.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])));
        (&self.0 * z).iter().flat_map(|w| [w.re, w.im]).collect()
    }
}

/// Composes every link with `f`. Parameters and costs are kept; each composed
/// disk must satisfy the target structure's equation to within `tol`.
pub fn pushforward_chain(
    c: &Chain,
    f: &dyn HolomorphicMap,
    j_target: &StructureField,
    target_domain: &DomainDescriptor,
    tol: f64,
) -> Result<Chain> {
    let mut links = Vec::with_capacity(c.links.len());
    for (i, link) in c.links.iter().enumerate() {
        let src = &link.disk.v;
        let dim = j_target.dim();
        let mut values = Vec::with_capacity(src.grid().len() * dim);
        for node in 0..src.grid().len() {
            let image = f.apply(src.value(node));
            if image.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: image.len() });
            }
            values.extend(image);
        }
        let v = DiskMap::from_values(src.grid().clone(), dim, values)?;
        let residual = cr_residual(j_target, &v)?;
        if !(residual <= tol) {
            return Err(Error::NotHolomorphicMap { link: i, residual, tol });
        }
        let eps = link.disk.epsilon_used;
        let u = if eps > 0.0 { v.scaled(1.0 / eps) } else { v.clone() };
        let disk = DiskSolution { u, v, residual, ..(*link.disk).clone() };
        links.push(ChainLink {
            disk: Arc::new(disk),
            a: link.a,
            b: link.b,
            from: f.apply(&link.from),
            to: f.apply(&link.to),
            cost: link.cost,
        });
    }
    Ok(Chain {
        links,
        waypoints: c.waypoints.iter().map(|w| f.apply(w)).collect(),
        domain: target_domain.clone(),
        tol: c.tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundOptions {
    pub lambda_max: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub tol: f64,
    pub nodes: usize,
    pub cfg: SolverConfig,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self { lambda_max: 10.0, tol: 1e-3, nodes: 33, cfg: SolverConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundProbe {
    pub lambda: f64,
    pub feasible: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// Largest `λ` for which a disk with `∂v(0) = λν` was found inside the domain.
    pub lower_bound: f64,
    pub unbounded_suspected: bool,
    pub probes: Vec<BoundProbe>,
}

/// Bisects for the largest derivative `λ` along `ν` at `p` that a disk in the
/// domain can realise. The result bounds the derivative supremum from below.
pub fn derivative_bound(
    j: &StructureField,
    domain: &DomainDescriptor,
    p: &[f64],
    nu: &[f64],
    opts: &BoundOptions,
) -> Result<BoundReport> {
    opts.cfg.validate()?;
    if !(opts.lambda_max > 0.0 && opts.lambda_max.is_finite()) || !(opts.tol > 0.0) {
        return Err(Error::Config("lambda_max and tol must be positive".into()));
    }
    for x in [p, nu] {
        if x.len() != j.dim() {
            return Err(Error::DimensionMismatch { expected: j.dim(), got: x.len() });
        }
    }
    if !domain.contains(p) {
        return Err(Error::InvalidParams(format!("p = {p:?} is outside the domain")));
    }
    let norm = nu.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParams(format!("ν must have unit norm, got {norm}")));
    }
    let grid = make_grid(1.0, opts.nodes)?;
    let mut probes = Vec::new();
    let mut probe = |lambda: f64| -> Result<bool> {
        let w: Vec<f64> = nu.iter().map(|x| lambda * x).collect();
        let reason = match derivative_disk(j, p, &w, &opts.cfg, &grid) {
            Ok(sol) => {
                let v = &sol.v;
                match (0..grid.len()).find(|&i| !domain.contains(v.value(i))) {
                    None => None,
                    Some(i) => {
                        let z = grid.node(i);
                        Some(format!("leaves the domain at node ({}, {})", z.re, z.im))
                    }
                }
            }
            Err(e) if e.is_solver_error() => Some(e.kind().to_string()),
            Err(e) => return Err(e),
        };
        let feasible = reason.is_none();
        probes.push(BoundProbe { lambda, feasible, reason });
        Ok(feasible)
    };

    if probe(opts.lambda_max)? {
        return Ok(BoundReport { lower_bound: opts.lambda_max, unbounded_suspected: true, probes });
    }
    let (mut lo, mut hi) = (0.0, opts.lambda_max);
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BoundReport { lower_bound: lo, unbounded_suspected: false, probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{gallery, GalleryParams};

    fn structure(name: &str, epsilon: f64) -> StructureField {
        gallery(name, &GalleryParams { epsilon, ..GalleryParams::default() }).unwrap()
    }

    fn opts(t_grid: &[f64], k_max: usize) -> DistanceOptions {
        DistanceOptions { k_max, t_grid: t_grid.to_vec(), nodes: 17, ..DistanceOptions::default() }
    }

    fn ball() -> DomainDescriptor {
        DomainDescriptor::chart_ball(2, 1.0).unwrap()
    }

    #[test]
    fn single_link_cost_is_the_poincare_distance() {
        let j = structure("standard", 0.0);
        let est = estimate_distance(&j, &ball(), &[0.0, 0.0], &[0.3, 0.1], &opts(&[0.5], 1)).unwrap();
        let oracle = poincare_distance(Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0), 1.0).unwrap();
        assert_eq!(chain_cost(&est.best_chain).unwrap(), oracle);
        assert!((oracle - 0.5493061443340549).abs() < 1e-15);

        let twice = est.best_chain.concat(&est.best_chain);
        assert!(twice.is_err(), "second chain does not start where the first ends");
        let back = est.best_chain.reversed();
        let doubled = est.best_chain.concat(&back).unwrap();
        assert_eq!(chain_cost(&doubled).unwrap(), 2.0 * oracle);
    }

    #[test]
    fn empty_chain_and_equal_points() {
        let j = structure("standard", 0.0);
        let est = estimate_distance(&j, &ball(), &[0.2, 0.2], &[0.2, 0.2], &DistanceOptions::default()).unwrap();
        assert_eq!(est.upper, 0.0);
        assert!(est.best_chain.is_empty());
        assert_eq!(chain_cost(&est.best_chain).unwrap(), 0.0);
    }

    #[test]
    fn broken_chains_are_rejected() {
        let j = structure("standard", 0.0);
        let est = estimate_distance(&j, &ball(), &[0.0, 0.0], &[0.3, 0.0], &opts(&[0.5], 2)).unwrap();
        let mut c = est.best_chain.clone();
        c.waypoints[1][0] += 1e-3;
        assert!(matches!(chain_cost(&c), Err(Error::InvalidChain(_))));
        let mut c = est.best_chain.clone();
        c.links[0].b = Complex64::new(0.4, 0.0);
        assert!(matches!(chain_cost(&c), Err(Error::InvalidChain(_))));
        let mut c = est.best_chain.clone();
        c.waypoints.pop();
        assert!(matches!(chain_cost(&c), Err(Error::InvalidChain(_))));
    }

    #[test]
    fn standard_plane_distance_collapses_and_refinement_is_monotone() {
        let j = structure("standard", 0.0);
        let (p, q) = ([0.1, -0.2], [-0.3, 0.4]);
        let coarse = estimate_distance(&j, &ball(), &p, &q, &opts(&[0.5, 0.9], 1)).unwrap();
        let fine = estimate_distance(&j, &ball(), &p, &q, &opts(&[0.05, 0.1, 0.5, 0.9], 1)).unwrap();
        let deeper = estimate_distance(&j, &ball(), &p, &q, &opts(&[0.05, 0.1, 0.5, 0.9], 3)).unwrap();
        assert!(fine.upper <= 0.05f64.atanh() + 1e-9);
        assert!(fine.upper <= coarse.upper && deeper.upper <= fine.upper);
        assert_eq!(deeper.best_chain.len(), 1, "ties prefer fewer links");
    }

    #[test]
    fn torus_uses_the_shortest_representative() {
        let j = structure("torus-flat", 0.0);
        let torus = DomainDescriptor::FlatTorus;
        let est = estimate_distance(&j, &torus, &[0.1, 0.0], &[0.9, 0.0], &opts(&[0.1], 2)).unwrap();
        assert!((est.best_chain.end()[0] - -0.1).abs() < 1e-15);
        assert!(chain_cost(&est.best_chain).is_ok());
        assert!(est.upper <= 0.1f64.atanh() + 1e-12);
    }

    #[test]
    fn reversed_and_concatenated_chains_stay_valid() {
        let j = structure("conjugated", 0.1);
        let o = opts(&[0.3, 0.6], 2);
        let (p, q, r) = ([0.0, 0.0], [0.2, 0.1], [0.1, 0.3]);
        let pq = estimate_distance(&j, &ball(), &p, &q, &o).unwrap();
        let qr = estimate_distance(&j, &ball(), &q, &r, &o).unwrap();
        let back = pq.best_chain.reversed();
        assert_eq!(chain_cost(&back).unwrap(), pq.upper);
        let joined = pq.best_chain.concat(&qr.best_chain).unwrap();
        assert_eq!(chain_cost(&joined).unwrap(), pq.upper + qr.upper);
    }

    #[test]
    fn pushforward_keeps_costs() {
        let j = structure("standard", 0.0);
        let est = estimate_distance(&j, &ball(), &[0.0, 0.0], &[0.2, 0.1], &opts(&[0.3], 2)).unwrap();
        let same = pushforward_chain(&est.best_chain, &Identity, &j, &ball(), 1e-10).unwrap();
        assert_eq!(chain_cost(&same).unwrap(), est.upper);

        let big = DomainDescriptor::chart_ball(2, 2.0).unwrap();
        let doubled = ComplexLinear::scalar(1, Complex64::new(2.0, 0.0));
        let image = pushforward_chain(&est.best_chain, &doubled, &j.clone().with_domain(big.clone()), &big, 1e-10).unwrap();
        assert_eq!(chain_cost(&image).unwrap(), est.upper);
        assert!(image.links.iter().all(|l| l.disk.residual < 1e-10));
        assert_eq!(image.end(), &[0.4, 0.2][..]);
    }

    #[test]
    fn antiholomorphic_map_is_caught() {
        struct Conjugate;
        impl HolomorphicMap for Conjugate {
            fn apply(&self, p: &[f64]) -> Vec<f64> {
                vec![p[0], -p[1]]
            }
        }
        let j = structure("standard", 0.0);
        let est = estimate_distance(&j, &ball(), &[0.0, 0.0], &[0.2, 0.1], &opts(&[0.3], 1)).unwrap();
        let err = pushforward_chain(&est.best_chain, &Conjugate, &j, &ball(), 1e-6).unwrap_err();
        assert!(matches!(err, Error::NotHolomorphicMap { link: 0, .. }));
    }

    #[test]
    fn unit_ball_derivative_bound_is_one() {
        let j = structure("standard", 0.0);
        let o = BoundOptions { nodes: 17, ..BoundOptions::default() };
        let report = derivative_bound(&j, &ball(), &[0.0, 0.0], &[0.6, 0.8], &o).unwrap();
        assert!((report.lower_bound - 1.0).abs() < 0.05, "{}", report.lower_bound);
        assert!(!report.unbounded_suspected);
        assert!(report.probes.first().is_some_and(|p| p.lambda == 10.0 && !p.feasible));
    }

    #[test]
    fn flat_torus_derivative_is_unbounded() {
        let j = structure("torus-flat", 0.0);
        let o = BoundOptions { lambda_max: 1e3, nodes: 17, ..BoundOptions::default() };
        let report = derivative_bound(&j, &DomainDescriptor::FlatTorus, &[0.3, 0.7], &[1.0, 0.0], &o).unwrap();
        assert!(report.unbounded_suspected);
        assert_eq!(report.lower_bound, 1e3);
        assert!(derivative_bound(&j, &DomainDescriptor::FlatTorus, &[0.0, 0.0], &[1.0, 1.0], &o).is_err());
    }
}
