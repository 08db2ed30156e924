//! Almost complex structures on chart balls and flat tori.
//!
//! A structure is a point-dependent real `2n × 2n` matrix field `J` with
//! `J² = −Id`. Coordinates are interleaved `(x_1, y_1, …, x_n, y_n)`, so the
//! standard structure `Jst` is block diagonal with blocks `[[0, −1], [1, 0]]`
//! and acts on `ℝ^{2n}` exactly as multiplication by `i` acts on `ℂ^n`.
//!
//! Non-integrable examples are manufactured by conjugation,
//! `J(p) = S(p) Jst S(p)⁻¹` with `S = Id + εB(p)`, which keeps `J² = −Id`
//! exact up to rounding.

use std::f64::consts::PI;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on `‖J(p)² + Id‖_∞` for a field to count as valid.
pub const TOL_STRUCTURE: f64 = 1e-10;
/// Default cap on the 1-norm condition number of `Jst + J(v)`.
pub const CONDITION_CAP: f64 = 1e8;

/// Complex dimension and the fixed interleaved real coordinate order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexConvention {
    n: usize,
}

impl ComplexConvention {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("complex dimension must be positive".into()));
        }
        Ok(Self { n })
    }

    /// Complex dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Real dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn jst(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for k in 0..self.n {
            m[(2 * k, 2 * k + 1)] = -1.0;
            m[(2 * k + 1, 2 * k)] = 1.0;
        }
        m
    }

    /// `Jst · v`, i.e. multiplication by `i` on each complex component.
    pub fn apply_jst(&self, v: &[f64], out: &mut [f64]) {
        for k in 0..self.n {
            let (x, y) = (v[2 * k], v[2 * k + 1]);
            out[2 * k] = -y;
            out[2 * k + 1] = x;
        }
    }

    pub fn to_complex(&self, v: &[f64]) -> Vec<Complex64> {
        v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
    }

    pub fn from_complex(&self, c: &[Complex64]) -> Vec<f64> {
        c.iter().flat_map(|z| [z.re, z.im]).collect()
    }
}

/// Where a structure lives and which metric measures it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainDescriptor {
    /// Euclidean ball in a single chart.
    ChartBall { center: Vec<f64>, radius: f64 },
    /// `ℝ^{2n} / ℤ^{2n}` with the flat metric, represented in the universal cover.
    FlatTorus,
}

impl DomainDescriptor {
    pub fn chart_ball(dim: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParams(format!("chart radius must be positive, got {radius}")));
        }
        Ok(DomainDescriptor::ChartBall { center: vec![0.0; dim], radius })
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, DomainDescriptor::FlatTorus)
    }

    /// Membership with a small absolute slack on the chart boundary.
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            DomainDescriptor::ChartBall { center, radius } => {
                let d2: f64 = p.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() <= radius + 1e-12
            }
            DomainDescriptor::FlatTorus => p.iter().all(|x| x.is_finite()),
        }
    }

    /// Shortest displacement from `p` to `q` (on the torus: modulo `ℤ^{2n}`).
    pub fn displacement(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        let raw = q.iter().zip(p).map(|(a, b)| a - b);
        match self {
            DomainDescriptor::ChartBall { .. } => raw.collect(),
            DomainDescriptor::FlatTorus => raw.map(|d| d - d.round()).collect(),
        }
    }

    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        self.displacement(p, q).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// Draws `count` points uniformly from the domain (torus: unit cube).
    pub fn sample_points<R: Rng>(&self, dim: usize, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| match self {
                DomainDescriptor::ChartBall { center, radius } => loop {
                    let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    if p.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                        break p.iter().zip(center).map(|(x, c)| c + radius * x).collect();
                    }
                },
                DomainDescriptor::FlatTorus => (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect(),
            })
            .collect()
    }
}

type JEval = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// A point-dependent almost complex structure on a chart or torus.
#[derive(Clone)]
pub struct StructureField {
    convention: ComplexConvention,
    domain: DomainDescriptor,
    label: String,
    eval: Arc<JEval>,
}

impl fmt::Debug for StructureField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StructureField")
            .field("label", &self.label)
            .field("n", &self.convention.n())
            .field("domain", &self.domain)
            .finish()
    }
}

impl StructureField {
    pub fn new<F>(convention: ComplexConvention, domain: DomainDescriptor, label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self { convention, domain, label: label.into(), eval: Arc::new(eval) }
    }

    /// The same matrix at every point. Not necessarily a valid structure.
    pub fn constant(convention: ComplexConvention, domain: DomainDescriptor, m: DMatrix<f64>) -> Self {
        Self::new(convention, domain, "constant", move |_| m.clone())
    }

    pub fn convention(&self) -> ComplexConvention {
        self.convention
    }

    pub fn domain(&self) -> &DomainDescriptor {
        &self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.convention.dim()
    }

    pub fn eval(&self, p: &[f64]) -> DMatrix<f64> {
        (self.eval)(p)
    }

    /// Same field on a different domain descriptor.
    pub fn with_domain(mut self, domain: DomainDescriptor) -> Self {
        self.domain = domain;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub tol: f64,
    /// max over valid samples of `‖J(p)² + Id‖_∞`
    pub max_residual: f64,
    /// max over valid samples of `cond_1(Jst + J(p))`; infinite when singular somewhere
    pub max_condition: f64,
    pub invalid_samples: Vec<usize>,
    pub pass: bool,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Checks `J² = −Id` over `samples` and reports the conditioning of `Jst + J`.
pub fn validate_structure(j: &StructureField, samples: &[Vec<f64>], tol: f64) -> ValidationReport {
    let d = j.dim();
    let jst = j.convention.jst();
    let id = DMatrix::<f64>::identity(d, d);
    let mut max_residual = 0.0_f64;
    let mut max_condition = 0.0_f64;
    let mut invalid = Vec::new();
    for (idx, p) in samples.iter().enumerate() {
        let value = catch_unwind(AssertUnwindSafe(|| j.eval(p)));
        let m = match value {
            Ok(m) if m.nrows() == d && m.ncols() == d && m.iter().all(|x| x.is_finite()) => m,
            _ => {
                invalid.push(idx);
                continue;
            }
        };
        max_residual = max_residual.max(max_abs(&(&m * &m + &id)));
        let a = &jst + &m;
        let cond = match a.clone().try_inverse() {
            Some(inv) => norm1(&a) * norm1(&inv),
            None => f64::INFINITY,
        };
        max_condition = max_condition.max(cond);
    }
    ValidationReport {
        samples: samples.len(),
        tol,
        max_residual,
        max_condition,
        pass: invalid.is_empty() && max_residual <= tol,
        invalid_samples: invalid,
    }
}

/// Complex dilatation `(Jst + J(v))⁻¹ (Jst − J(v))` with the default condition cap.
pub fn q_matrix(j: &StructureField, v: &[f64]) -> Result<DMatrix<f64>> {
    q_matrix_with_cap(j, v, CONDITION_CAP)
}

pub fn q_matrix_with_cap(j: &StructureField, v: &[f64], cap: f64) -> Result<DMatrix<f64>> {
    let jv = j.eval(v);
    dilatation(&j.convention.jst(), &jv, v, cap)
}

pub(crate) fn dilatation(jst: &DMatrix<f64>, jv: &DMatrix<f64>, v: &[f64], cap: f64) -> Result<DMatrix<f64>> {
    let a = jst + jv;
    let singular = |condition| Error::Singular { point: v.to_vec(), condition, node: None };
    let inv = a.clone().try_inverse().ok_or_else(|| singular(f64::INFINITY))?;
    let cond = norm1(&a) * norm1(&inv);
    if !cond.is_finite() || cond > cap {
        return Err(singular(cond));
    }
    Ok(inv * (jst - jv))
}

/// Shape of the conjugating field `B(p)`; every shape vanishes at the origin,
/// so gallery structures satisfy `J(0) = Jst`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    #[default]
    Sin,
    CosShear,
}

impl Perturbation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sin" => Ok(Perturbation::Sin),
            "cos-shear" => Ok(Perturbation::CosShear),
            other => Err(Error::InvalidParams(format!("unknown perturbation shape `{other}`"))),
        }
    }

    // Integer frequencies in {-1, 0, 1}; integers keep the torus variant 1-periodic.
    fn weight(i: usize, j: usize, k: usize) -> f64 {
        ((1 + i + 2 * j + k * (j + 2)) % 3) as f64 - 1.0
    }

    /// `B(p)`. On the torus the phase is `2π⟨m, p mod 1⟩` and the amplitude `1/2π`,
    /// which keeps `|∇B|` of order one.
    pub fn field(&self, p: &[f64], periodic: bool) -> DMatrix<f64> {
        let d = p.len();
        let reduced: Vec<f64> = if periodic { p.iter().map(|x| x.rem_euclid(1.0)).collect() } else { p.to_vec() };
        let (freq, amp) = if periodic { (2.0 * PI, 1.0 / (2.0 * PI)) } else { (1.0, 1.0) };
        DMatrix::from_fn(d, d, |i, j| {
            let phase = freq * (0..d).map(|k| Self::weight(i, j, k) * reduced[k]).sum::<f64>();
            match self {
                Perturbation::Sin => amp * phase.sin(),
                Perturbation::CosShear if i < j => amp * (1.0 - phase.cos()),
                Perturbation::CosShear => 0.0,
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryParams {
    pub n: usize,
    pub epsilon: f64,
    pub perturbation: Perturbation,
    /// Chart-ball radius for the chart variants.
    pub radius: f64,
}

impl Default for GalleryParams {
    fn default() -> Self {
        Self { n: 1, epsilon: 0.0, perturbation: Perturbation::Sin, radius: 1.0 }
    }
}

pub const GALLERY_NAMES: [&str; 4] = ["standard", "conjugated", "torus-flat", "torus-perturbed"];

/// Builds a named gallery structure and validates it on a lattice.
pub fn gallery(name: &str, params: &GalleryParams) -> Result<StructureField> {
    let conv = ComplexConvention::new(params.n)?;
    let d = conv.dim();
    if !params.epsilon.is_finite() || params.epsilon < 0.0 {
        return Err(Error::InvalidParams(format!("epsilon must be finite and ≥ 0, got {}", params.epsilon)));
    }
    let chart = || DomainDescriptor::chart_ball(d, params.radius);
    let field = match name {
        "standard" => {
            let jst = conv.jst();
            StructureField::new(conv, chart()?, "standard", move |_| jst.clone())
        }
        "torus-flat" => {
            let jst = conv.jst();
            StructureField::new(conv, DomainDescriptor::FlatTorus, "torus-flat", move |_| jst.clone())
        }
        "conjugated" => {
            let domain = chart()?;
            check_conjugator(&domain, d, params, false)?;
            conjugated(conv, domain, params, false)
        }
        "torus-perturbed" => {
            check_conjugator(&DomainDescriptor::FlatTorus, d, params, true)?;
            conjugated(conv, DomainDescriptor::FlatTorus, params, true)
        }
        other => return Err(Error::UnknownName(other.to_string())),
    };
    check_gallery(&field, params)?;
    Ok(field)
}

fn conjugated(conv: ComplexConvention, domain: DomainDescriptor, params: &GalleryParams, periodic: bool) -> StructureField {
    let jst = conv.jst();
    let d = conv.dim();
    let eps = params.epsilon;
    let shape = params.perturbation;
    let label = if periodic { "torus-perturbed" } else { "conjugated" };
    StructureField::new(conv, domain, label, move |p| {
        let s = DMatrix::<f64>::identity(d, d) + shape.field(p, periodic) * eps;
        let sj = &s * &jst;
        match s.try_inverse() {
            Some(inv) => sj * inv,
            // surfaces as an invalid sample during validation
            None => DMatrix::from_element(d, d, f64::NAN),
        }
    })
}

fn lattice_points(domain: &DomainDescriptor, d: usize, per_axis: usize) -> Vec<Vec<f64>> {
    let total = per_axis.pow(d as u32);
    (0..total)
        .filter_map(|mut idx| {
            let mut p = Vec::with_capacity(d);
            for _ in 0..d {
                let a = (idx % per_axis) as f64 / (per_axis - 1) as f64;
                idx /= per_axis;
                p.push(a);
            }
            match domain {
                DomainDescriptor::FlatTorus => Some(p),
                DomainDescriptor::ChartBall { center, radius } => {
                    let q: Vec<f64> = p.iter().zip(center).map(|(a, c)| c + radius * (2.0 * a - 1.0)).collect();
                    domain.contains(&q).then_some(q)
                }
            }
        })
        .collect()
}

/// `det S = 1` at the origin, so a non-positive determinant anywhere on the
/// lattice means `Id + εB` became singular in between.
fn check_conjugator(domain: &DomainDescriptor, d: usize, params: &GalleryParams, periodic: bool) -> Result<()> {
    let per_axis = if d <= 2 { 9 } else { 5 };
    for p in lattice_points(domain, d, per_axis) {
        let s = DMatrix::<f64>::identity(d, d) + params.perturbation.field(&p, periodic) * params.epsilon;
        let det = s.determinant();
        let cond = s.clone().try_inverse().map(|inv| norm1(&s) * norm1(&inv)).unwrap_or(f64::INFINITY);
        if !(det > 0.0) || cond > CONDITION_CAP {
            return Err(Error::InvalidParams(format!(
                "Id + εB(p) is singular near {p:?} (det {det:.3e}, ε = {})",
                params.epsilon
            )));
        }
    }
    Ok(())
}

fn check_gallery(field: &StructureField, params: &GalleryParams) -> Result<()> {
    let d = field.dim();
    let per_axis = if d <= 2 { 9 } else { 5 };
    let samples = lattice_points(field.domain(), d, per_axis);
    let report = validate_structure(field, &samples, TOL_STRUCTURE);
    if !report.invalid_samples.is_empty() {
        return Err(Error::InvalidParams(format!(
            "Id + εB(p) is singular at {} lattice points (ε = {})",
            report.invalid_samples.len(),
            params.epsilon
        )));
    }
    if !report.pass {
        return Err(Error::InvalidParams(format!("J² + Id residual {:.3e} on validation lattice", report.max_residual)));
    }
    Ok(())
}

/// Serializable gallery reference as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub name: String,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default = "unit")]
    pub radius: f64,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

impl StructureSpec {
    pub fn named(name: &str) -> Self {
        Self { name: name.to_string(), n: 1, epsilon: 0.0, perturbation: Perturbation::Sin, radius: 1.0 }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn build(&self) -> Result<StructureField> {
        gallery(
            &self.name,
            &GalleryParams { n: self.n, epsilon: self.epsilon, perturbation: self.perturbation, radius: self.radius },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn conv(n: usize) -> ComplexConvention {
        ComplexConvention::new(n).unwrap()
    }

    #[test]
    fn jst_squares_to_minus_identity_exactly() {
        for n in 1..=3 {
            let j = conv(n).jst();
            let sq = &j * &j;
            assert_eq!(sq, -DMatrix::<f64>::identity(2 * n, 2 * n));
        }
    }

    #[test]
    fn jst_is_multiplication_by_i() {
        let c = conv(2);
        let v = [0.3, -1.2, 2.5, 0.7];
        let mut out = [0.0; 4];
        c.apply_jst(&v, &mut out);
        let expected: Vec<Complex64> = c.to_complex(&v).iter().map(|z| z * Complex64::i()).collect();
        assert_eq!(c.to_complex(&out), expected);
        let mv = c.jst() * nalgebra::DVector::from_column_slice(&v);
        assert_eq!(mv.as_slice(), &out);
    }

    #[test]
    fn standard_and_identity_fields() {
        let c = conv(1);
        let dom = DomainDescriptor::chart_ball(2, 1.0).unwrap();
        let samples = dom.sample_points(2, 50, &mut ChaCha8Rng::seed_from_u64(1));
        let std = gallery("standard", &GalleryParams::default()).unwrap();
        let rep = validate_structure(&std, &samples, TOL_STRUCTURE);
        assert!(rep.pass);
        assert_eq!(rep.max_residual, 0.0);

        let id = StructureField::constant(c, dom, DMatrix::identity(2, 2));
        let rep = validate_structure(&id, &samples, TOL_STRUCTURE);
        assert!(!rep.pass);
        assert_eq!(rep.max_residual, 2.0);
    }

    #[test]
    fn failing_evaluation_is_reported_not_raised() {
        let c = conv(1);
        let dom = DomainDescriptor::FlatTorus;
        let j = StructureField::new(c, dom, "broken", |p| {
            if p[0] > 0.5 {
                DMatrix::from_element(2, 2, f64::NAN)
            } else {
                ComplexConvention::new(1).unwrap().jst()
            }
        });
        let rep = validate_structure(&j, &[vec![0.1, 0.0], vec![0.9, 0.0]], TOL_STRUCTURE);
        assert_eq!(rep.invalid_samples, vec![1]);
        assert!(!rep.pass);
    }

    #[test]
    fn conjugated_matches_direct_multiplication() {
        let params = GalleryParams { n: 2, epsilon: 0.1, ..Default::default() };
        let j = gallery("conjugated", &params).unwrap();
        let p = [0.3, -0.2, 0.5, 0.1];
        let s = DMatrix::<f64>::identity(4, 4) + Perturbation::Sin.field(&p, false) * 0.1;
        let oracle = &s * conv(2).jst() * s.clone().try_inverse().unwrap();
        assert!(max_abs(&(j.eval(&p) - oracle)) < 1e-14);
        let sq = j.eval(&p) * j.eval(&p) + DMatrix::<f64>::identity(4, 4);
        assert!(max_abs(&sq) < 1e-12);
    }

    #[test]
    fn q_matrix_zero_for_standard_and_singular_for_minus_jst() {
        let std = gallery("standard", &GalleryParams::default()).unwrap();
        let q = q_matrix(&std, &[0.4, -0.3]).unwrap();
        assert!(q.iter().all(|&x| x == 0.0));

        let c = conv(1);
        let minus = StructureField::constant(c, DomainDescriptor::FlatTorus, -c.jst());
        assert!(matches!(q_matrix(&minus, &[0.0, 0.0]), Err(Error::Singular { .. })));
    }

    #[test]
    fn q_matrix_matches_dense_solve_oracle() {
        let j = gallery("conjugated", &GalleryParams { n: 1, epsilon: 0.1, ..Default::default() }).unwrap();
        let v = [0.7, -0.4];
        let jv = j.eval(&v);
        let jst = conv(1).jst();
        // column-by-column solve of (Jst + J) X = (Jst − J)
        let a = &jst + &jv;
        let b = &jst - &jv;
        let lu = a.lu();
        let mut oracle = DMatrix::zeros(2, 2);
        for c in 0..2 {
            let col = lu.solve(&b.column(c).into_owned()).unwrap();
            oracle.set_column(c, &col);
        }
        let q = q_matrix(&j, &v).unwrap();
        assert!(max_abs(&(q - oracle)) < 1e-12);
    }

    #[test]
    fn conjugated_with_zero_epsilon_is_standard() {
        let j = gallery("conjugated", &GalleryParams { n: 2, epsilon: 0.0, ..Default::default() }).unwrap();
        let jst = conv(2).jst();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in j.domain().sample_points(4, 20, &mut rng) {
            assert_eq!(j.eval(&p), jst);
        }
    }

    #[test]
    fn torus_perturbed_is_periodic() {
        let params = GalleryParams { n: 1, epsilon: 0.05, ..Default::default() };
        let j = gallery("torus-perturbed", &params).unwrap();
        // dyadic samples: p + e_k is exact in floating point, so reduction is exact too
        for &(x, y) in &[(0.125, 0.375), (0.5, 0.25), (0.8125, 0.0625)] {
            let base = j.eval(&[x, y]);
            assert_eq!(base, j.eval(&[x + 1.0, y]));
            assert_eq!(base, j.eval(&[x, y - 1.0]));
            assert_eq!(base, j.eval(&[x + 3.0, y + 2.0]));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in DomainDescriptor::FlatTorus.sample_points(2, 50, &mut rng) {
            let shifted = [p[0] + 1.0, p[1]];
            assert!(max_abs(&(j.eval(&p) - j.eval(&shifted))) < 1e-13);
        }
    }

    #[test]
    fn unknown_gallery_name_and_bad_params() {
        assert!(matches!(gallery("hyperbolic", &GalleryParams::default()), Err(Error::UnknownName(_))));
        let huge = GalleryParams { epsilon: 50.0, radius: 3.0, ..Default::default() };
        assert!(matches!(gallery("conjugated", &huge), Err(Error::InvalidParams(_))));
        assert!(matches!(gallery("standard", &GalleryParams { n: 0, ..Default::default() }), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn q_vanishes_iff_j_is_standard() {
        let j = gallery("conjugated", &GalleryParams { n: 1, epsilon: 0.1, ..Default::default() }).unwrap();
        let jst = conv(1).jst();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in j.domain().sample_points(2, 100, &mut rng).into_iter().chain([vec![0.0, 0.0]]) {
            let q = q_matrix(&j, &p).unwrap();
            let q_zero = q.iter().all(|&x| x == 0.0);
            let j_std = j.eval(&p) == jst;
            assert_eq!(q_zero, j_std, "at {p:?}");
        }
    }

    #[test]
    fn torus_displacement_takes_shortest_representative() {
        let t = DomainDescriptor::FlatTorus;
        let d = t.displacement(&[0.1, 0.9], &[0.95, 0.05]);
        assert!((d[0] + 0.15).abs() < 1e-12 && (d[1] - 0.15).abs() < 1e-12);
        assert!(t.distance(&[0.0, 0.0], &[3.0, -2.0]) < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn gallery_fields_square_to_minus_identity(
            eps in 0.0..0.2f64, n in 1usize..=2, periodic in proptest::bool::ANY,
            raw in proptest::collection::vec(-0.6..0.6f64, 4)
        ) {
            let name = if periodic { "torus-perturbed" } else { "conjugated" };
            let j = gallery(name, &GalleryParams { n, epsilon: eps, ..Default::default() }).unwrap();
            let p = &raw[..2 * n];
            let m = j.eval(p);
            let err = (&m * &m + DMatrix::<f64>::identity(2 * n, 2 * n)).amax();
            proptest::prop_assert!(err < 1e-12, "J² + Id = {err}");
            let q = q_matrix(&j, p).unwrap();
            let jst = conv(n).jst();
            let lhs = (&jst + &m) * q;
            proptest::prop_assert!((lhs - (&jst - &m)).amax() < 1e-12);
        }

        #[test]
        fn torus_structure_is_lattice_periodic(
            eps in 0.0..0.2f64, p in proptest::collection::vec(-2.0..2.0f64, 2), shift in (-3i32..=3, -3i32..=3)
        ) {
            let j = gallery("torus-perturbed", &GalleryParams { n: 1, epsilon: eps, ..Default::default() }).unwrap();
            let moved = [p[0] + f64::from(shift.0), p[1] + f64::from(shift.1)];
            proptest::prop_assert!((j.eval(&p) - j.eval(&moved)).amax() < 1e-12);
        }
    }
}
