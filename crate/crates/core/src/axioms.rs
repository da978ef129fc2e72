//! Randomized property checkers for the structural assumptions (A1)-(A5) and
//! the two matrix facts built on them.
//!
//! Every checker draws from a seeded ChaCha stream, evaluates the identity or
//! inequality on each sample and keeps the worst violation. Violations are
//! measured after dividing by `max(1, |terms|)`, so inputs of unit scale are
//! compared in absolute terms.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{eval_f, eval_f_upper, OperatorParams, SymMatrix};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axiom {
    /// Linearity in the Hessian.
    A1,
    /// Two-sided eigenvalue bounds.
    A2,
    /// Homogeneity of degree alpha in the gradient.
    A3,
    /// Rotation invariance.
    A4,
    /// Concavity of `A -> F^*(q, A^-1)`.
    A5,
    /// `F(q, X) <= F(q, Y)` whenever `X >= Y`.
    DegenerateEllipticity,
}

impl Axiom {
    pub const ALL: [Axiom; 6] = [
        Axiom::A1,
        Axiom::A2,
        Axiom::A3,
        Axiom::A4,
        Axiom::A5,
        Axiom::DegenerateEllipticity,
    ];
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axiom::A1 => "A1",
            Axiom::A2 => "A2",
            Axiom::A3 => "A3",
            Axiom::A4 => "A4",
            Axiom::A5 => "A5",
            Axiom::DegenerateEllipticity => "degenerate-ellipticity",
        };
        f.write_str(s)
    }
}

impl FromStr for Axiom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A1" => Ok(Axiom::A1),
            "A2" => Ok(Axiom::A2),
            "A3" => Ok(Axiom::A3),
            "A4" => Ok(Axiom::A4),
            "A5" => Ok(Axiom::A5),
            "DEGENERATE-ELLIPTICITY" | "DE" => Ok(Axiom::DegenerateEllipticity),
            _ => Err(Error::UnknownAxiom(s.to_string())),
        }
    }
}

/// The sample at which the worst violation occurred.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub q: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// Scalars and secondary matrices, flattened row-major.
    pub aux: Vec<f64>,
}

/// Intervals of `c_min` and `c_max` values consistent with every (A2) sample.
///
/// For this operator family both intervals shrink onto `c_F` as the sample
/// count grows; a valid pair `c_min <= c_max` exists iff they overlap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedBounds {
    pub c_min: (f64, f64),
    pub c_max: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub axiom: String,
    pub samples: usize,
    pub worst_violation: f64,
    pub witness: Witness,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fitted_bounds: Option<FittedBounds>,
}

struct Tracker {
    worst: f64,
    witness: Witness,
    seen: bool,
}

impl Tracker {
    fn new() -> Self {
        Tracker { worst: 0.0, witness: Witness::default(), seen: false }
    }

    fn offer(&mut self, violation: f64, witness: impl FnOnce() -> Witness) {
        let v = if violation.is_nan() { f64::INFINITY } else { violation.max(0.0) };
        if v > self.worst || !self.seen {
            self.worst = self.worst.max(v);
            self.witness = witness();
            self.seen = true;
        }
    }

    fn finish(self, name: String, samples: usize) -> AxiomReport {
        AxiomReport {
            axiom: name,
            samples,
            worst_violation: self.worst,
            witness: self.witness,
            tolerance: DEFAULT_TOLERANCE,
            passed: self.worst <= DEFAULT_TOLERANCE,
            fitted_bounds: None,
        }
    }
}

fn scaled(diff: f64, terms: &[f64]) -> f64 {
    let scale = terms.iter().fold(1.0_f64, |m, t| m.max(t.abs()));
    diff / scale
}

/// Seeded sampler for vectors and matrices.
pub struct Sampler {
    rng: ChaCha8Rng,
    n: usize,
}

impl Sampler {
    pub fn new(n: usize, seed: u64) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), n }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    /// Entries uniform in `[-1, 1]`, redrawn until nonzero.
    pub fn vector(&mut self) -> Vec<f64> {
        loop {
            let q: Vec<f64> = (0..self.n).map(|_| self.rng.random_range(-1.0..=1.0)).collect();
            if q.iter().map(|v| v * v).sum::<f64>() > 1e-8 {
                return q;
            }
        }
    }

    fn square(&mut self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |_, _| self.rng.random_range(-1.0..=1.0))
    }

    /// `G + G^T` with uniform entries.
    pub fn symmetric(&mut self) -> SymMatrix {
        let g = self.square();
        SymMatrix::symmetrize(&(&g + g.transpose()))
    }

    /// `G^T G + 1e-3 Id`.
    pub fn positive_definite(&mut self) -> SymMatrix {
        let g = self.square();
        let m = g.transpose() * &g + DMatrix::identity(self.n, self.n) * 1e-3;
        SymMatrix::symmetrize(&m)
    }

    /// Orthogonal factor of a random square matrix.
    pub fn orthogonal(&mut self) -> DMatrix<f64> {
        loop {
            let g = self.square();
            if g.determinant().abs() > 1e-3 {
                return g.qr().q();
            }
        }
    }
}

fn witness(q: &[f64], x: &SymMatrix, aux: Vec<f64>) -> Witness {
    Witness { q: q.to_vec(), x: x.to_rows(), aux }
}

fn flat(m: &SymMatrix) -> Vec<f64> {
    m.to_rows().concat()
}

fn require_samples(sample_count: usize) -> Result<()> {
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample_count must be >= 1".into()));
    }
    Ok(())
}

/// Checks one axiom on `sample_count` random samples.
pub fn check_axiom(
    params: &OperatorParams,
    axiom: Axiom,
    sample_count: usize,
    seed: u64,
) -> Result<AxiomReport> {
    params.validate()?;
    require_samples(sample_count)?;
    let mut s = Sampler::new(params.n, seed);
    let mut t = Tracker::new();
    let mut feasible_min = (f64::NEG_INFINITY, f64::INFINITY);
    let mut feasible_max = (f64::NEG_INFINITY, f64::INFINITY);

    for _ in 0..sample_count {
        let q = s.vector();
        match axiom {
            Axiom::A1 => {
                let (x, y) = (s.symmetric(), s.symmetric());
                let (a, b) = (s.uniform(-2.0, 2.0), s.uniform(-2.0, 2.0));
                let lhs = eval_f(params, &q, &SymMatrix::combine(a, &x, b, &y))?;
                let (fx, fy) = (eval_f(params, &q, &x)?, eval_f(params, &q, &y)?);
                let rhs = a * fx + b * fy;
                let v = scaled((lhs - rhs).abs(), &[lhs, a * fx, b * fy]);
                t.offer(v, || {
                    let mut aux = vec![a, b];
                    aux.extend(flat(&y));
                    witness(&q, &x, aux)
                });
            }
            Axiom::A2 => {
                let x = s.symmetric();
                let qa = q.iter().map(|v| v * v).sum::<f64>().sqrt().powf(params.alpha);
                let minus_f = -eval_f(params, &q, &x)?;
                let ev = x.eigenvalues();
                let (lmin, lmax) = (ev[0], ev[ev.len() - 1]);
                let cf = params.c_f();
                let lower = cf * qa * lmin - minus_f;
                let upper = minus_f - cf * qa * lmax;
                let v = scaled(lower.max(upper), &[minus_f, cf * qa * lmin, cf * qa * lmax]);
                t.offer(v, || witness(&q, &x, vec![lmin, lmax]));
                // feasible sets for c in  c*qa*lmin <= -F  and  -F <= c*qa*lmax
                narrow(&mut feasible_min, minus_f, qa * lmin, true);
                narrow(&mut feasible_max, minus_f, qa * lmax, false);
            }
            Axiom::A3 => {
                let x = s.symmetric();
                let mut lambda = 0.0;
                while lambda == 0.0 {
                    lambda = s.uniform(-2.0, 2.0);
                }
                let scaled_q: Vec<f64> = q.iter().map(|v| lambda * v).collect();
                let lhs = eval_f(params, &scaled_q, &x)?;
                let rhs = lambda.abs().powf(params.alpha) * eval_f(params, &q, &x)?;
                t.offer(scaled((lhs - rhs).abs(), &[lhs, rhs]), || witness(&q, &x, vec![lambda]));
            }
            Axiom::A4 => {
                let x = s.symmetric();
                let rot = s.orthogonal();
                let qv = nalgebra::DVector::from_column_slice(&q);
                let rq: Vec<f64> = (rot.transpose() * qv).iter().copied().collect();
                let lhs = eval_f(params, &q, &x)?;
                let rhs = eval_f(params, &rq, &x.conjugate(&rot))?;
                t.offer(scaled((lhs - rhs).abs(), &[lhs, rhs]), || {
                    witness(&q, &x, rot.transpose().iter().copied().collect())
                });
            }
            Axiom::A5 => {
                let (a1, a2) = (s.positive_definite(), s.positive_definite());
                let mu = s.uniform(0.0, 1.0);
                let mix = SymMatrix::combine(mu, &a1, 1.0 - mu, &a2);
                let lhs = eval_f_upper(params, &q, &mix.inverse_pd()?)?;
                let f1 = eval_f_upper(params, &q, &a1.inverse_pd()?)?;
                let f2 = eval_f_upper(params, &q, &a2.inverse_pd()?)?;
                let rhs = mu * f1 + (1.0 - mu) * f2;
                t.offer(scaled(rhs - lhs, &[lhs, f1, f2]), || {
                    let mut aux = vec![mu];
                    aux.extend(flat(&a2));
                    witness(&q, &a1, aux)
                });
            }
            Axiom::DegenerateEllipticity => {
                let y = s.symmetric();
                let gap = s.positive_definite();
                let x = SymMatrix::combine(1.0, &y, 1.0, &gap);
                let (fx, fy) = (eval_f(params, &q, &x)?, eval_f(params, &q, &y)?);
                t.offer(scaled(fx - fy, &[fx, fy]), || witness(&q, &x, flat(&y)));
            }
        }
    }

    let mut report = t.finish(axiom.to_string(), sample_count);
    if axiom == Axiom::A2 {
        let overlap_lo = feasible_min.0.max(feasible_max.0);
        let overlap_hi = feasible_min.1.min(feasible_max.1);
        let gap = overlap_lo - overlap_hi;
        if gap > DEFAULT_TOLERANCE || !(feasible_min.1 > 0.0) {
            report.worst_violation = report.worst_violation.max(gap.max(f64::EPSILON));
            report.passed = false;
        }
        report.fitted_bounds = Some(FittedBounds { c_min: feasible_min, c_max: feasible_max });
    }
    Ok(report)
}

/// Intersects the feasible interval for `c` with the constraint
/// `c*coef <= value` (lower side) or `value <= c*coef` (upper side).
fn narrow(interval: &mut (f64, f64), value: f64, coef: f64, lower_side: bool) {
    if coef.abs() < 1e-12 {
        return;
    }
    let ratio = value / coef;
    // lower side: c*coef <= value ; upper side: c*coef >= value
    let c_below = (coef > 0.0) == lower_side;
    if c_below {
        interval.1 = interval.1.min(ratio);
    } else {
        interval.0 = interval.0.max(ratio);
    }
}

/// Convexity of `(q, A) -> <q, A^-1 q>` on positive definite `A`.
pub fn check_quadratic_form_convexity(n: usize, sample_count: usize, seed: u64) -> Result<AxiomReport> {
    require_samples(sample_count)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let mut s = Sampler::new(n, seed);
    let mut t = Tracker::new();
    for _ in 0..sample_count {
        let (q1, q2) = (s.vector(), s.vector());
        let (a1, a2) = (s.positive_definite(), s.positive_definite());
        let tt = s.uniform(0.0, 1.0);
        let v = quadratic_form_gap(&q1, &a1, &q2, &a2, tt)?;
        t.offer(v, || {
            let mut aux = vec![tt];
            aux.extend(&q2);
            aux.extend(flat(&a2));
            witness(&q1, &a1, aux)
        });
    }
    Ok(t.finish("quadratic-form-convexity".into(), sample_count))
}

/// Scaled violation of the convexity inequality for one sample; positive
/// means the inequality fails.
pub fn quadratic_form_gap(q1: &[f64], a1: &SymMatrix, q2: &[f64], a2: &SymMatrix, t: f64) -> Result<f64> {
    let qm: Vec<f64> = q1.iter().zip(q2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
    let am = SymMatrix::combine(t, a1, 1.0 - t, a2);
    let lhs = am.inverse_pd()?.quad(&qm);
    let r1 = a1.inverse_pd()?.quad(q1);
    let r2 = a2.inverse_pd()?.quad(q2);
    let rhs = t * r1 + (1.0 - t) * r2;
    Ok(scaled(lhs - rhs, &[lhs, r1, r2]))
}

/// Concavity of `A -> 1 / (-F^*(q, A^-1))` on positive definite `A`.
pub fn check_reciprocal_concavity(params: &OperatorParams, sample_count: usize, seed: u64) -> Result<AxiomReport> {
    params.validate()?;
    require_samples(sample_count)?;
    let mut s = Sampler::new(params.n, seed);
    let mut t = Tracker::new();
    for _ in 0..sample_count {
        let q = s.vector();
        let (a1, a2) = (s.positive_definite(), s.positive_definite());
        let mu = s.uniform(0.0, 1.0);
        let v = reciprocal_gap(params, &q, &a1, &a2, mu)?;
        t.offer(v, || {
            let mut aux = vec![mu];
            aux.extend(flat(&a2));
            witness(&q, &a1, aux)
        });
    }
    Ok(t.finish("reciprocal-concavity".into(), sample_count))
}

/// Scaled violation of reciprocal concavity for one sample.
pub fn reciprocal_gap(params: &OperatorParams, q: &[f64], a1: &SymMatrix, a2: &SymMatrix, mu: f64) -> Result<f64> {
    let recip = |a: &SymMatrix| -> Result<f64> { Ok(1.0 / -eval_f_upper(params, q, &a.inverse_pd()?)?) };
    let lhs = recip(&SymMatrix::combine(mu, a1, 1.0 - mu, a2))?;
    let (r1, r2) = (recip(a1)?, recip(a2)?);
    let rhs = mu * r1 + (1.0 - mu) * r2;
    Ok(scaled(rhs - lhs, &[lhs, r1, r2]))
}

/// Runs every checker for one parameter triple.
pub fn check_all(params: &OperatorParams, sample_count: usize, seed: u64) -> Result<Vec<AxiomReport>> {
    let mut out = Vec::new();
    for (k, axiom) in Axiom::ALL.into_iter().enumerate() {
        out.push(check_axiom(params, axiom, sample_count, seed.wrapping_add(k as u64))?);
    }
    out.push(check_quadratic_form_convexity(params.n, sample_count, seed.wrapping_add(100))?);
    out.push(check_reciprocal_concavity(params, sample_count, seed.wrapping_add(101))?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{eval_f_at_zero, Side};

    #[test]
    fn named_examples() {
        let p3 = OperatorParams::finite(3.0, 1.0, 2).unwrap();
        assert!(check_axiom(&p3, Axiom::A3, 1000, 1).unwrap().worst_violation <= 1e-9);
        let p2 = OperatorParams::finite(2.0, 0.0, 2).unwrap();
        assert!(check_axiom(&p2, Axiom::A4, 1000, 2).unwrap().worst_violation <= 1e-9);
        let p4 = OperatorParams::finite(4.0, 2.0, 2).unwrap();
        assert!(check_axiom(&p4, Axiom::A5, 1000, 3).unwrap().worst_violation <= 1e-9);
    }

    #[test]
    fn a2_fit_brackets_c_f() {
        let params = OperatorParams::finite(3.0, 1.0, 3).unwrap();
        let r = check_axiom(&params, Axiom::A2, 500, 9).unwrap();
        assert!(r.passed, "{r:?}");
        let fit = r.fitted_bounds.unwrap();
        let cf = params.c_f();
        assert!(fit.c_min.1 > 0.0);
        assert!(fit.c_min.0 <= cf + 1e-9 && cf <= fit.c_min.1 + 1e-9);
        assert!(fit.c_max.0 <= cf + 1e-9 && cf <= fit.c_max.1 + 1e-9);
    }

    #[test]
    fn unknown_axiom_and_zero_samples() {
        assert!(matches!("A7".parse::<Axiom>(), Err(Error::UnknownAxiom(_))));
        let p = OperatorParams::finite(2.0, 0.0, 2).unwrap();
        assert!(check_axiom(&p, Axiom::A1, 0, 0).is_err());
    }

    #[test]
    fn quadratic_form_endpoints() {
        let mut s = Sampler::new(2, 5);
        let (q1, q2) = (s.vector(), s.vector());
        let (a1, a2) = (s.positive_definite(), s.positive_definite());
        assert!(quadratic_form_gap(&q1, &a1, &q2, &a2, 0.0).unwrap().abs() < 1e-12);
        assert!(quadratic_form_gap(&q1, &a1, &q1, &a1, 0.37).unwrap().abs() < 1e-12);
        let r = check_quadratic_form_convexity(2, 1000, 11).unwrap();
        assert!(r.worst_violation <= 1e-9);
    }

    #[test]
    fn reciprocal_endpoints() {
        let params = OperatorParams::finite(3.0, 1.0, 2).unwrap();
        let mut s = Sampler::new(2, 6);
        let q = s.vector();
        let (a1, a2) = (s.positive_definite(), s.positive_definite());
        assert!(reciprocal_gap(&params, &q, &a1, &a2, 1.0).unwrap().abs() < 1e-12);
        assert!(reciprocal_gap(&params, &q, &a1, &a1, 0.4).unwrap().abs() < 1e-12);
        assert!(check_reciprocal_concavity(&params, 1000, 3).unwrap().worst_violation <= 1e-9);
    }

    #[test]
    fn upper_envelope_breaks_concavity_at_zero_gradient() {
        // At q = 0, alpha = 0, p = inf: -F^*(0, A^-1) = 1/lambda_max(A), and
        // A -> lambda_max(A) is convex rather than concave.
        let params = OperatorParams::infinity(0.0, 2).unwrap();
        let a1 = SymMatrix::diag(&[2.0, 1.0]);
        let a2 = SymMatrix::diag(&[1.0, 2.0]);
        let gap = reciprocal_gap(&params, &[0.0, 0.0], &a1, &a2, 0.5).unwrap();
        assert!(gap > 0.1, "gap {gap}");
        let mid = SymMatrix::combine(0.5, &a1, 0.5, &a2).inverse_pd().unwrap();
        let lhs = eval_f_at_zero(&params, &mid, Side::Upper).unwrap();
        let rhs = 0.5 * eval_f_at_zero(&params, &a1.inverse_pd().unwrap(), Side::Upper).unwrap()
            + 0.5 * eval_f_at_zero(&params, &a2.inverse_pd().unwrap(), Side::Upper).unwrap();
        assert!(lhs < rhs);
    }

    #[test]
    fn report_json_shape() {
        let p = OperatorParams::finite(2.0, 0.0, 2).unwrap();
        let r = check_axiom(&p, Axiom::A1, 10, 0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["axiom", "samples", "worst_violation", "witness"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["axiom"], "A1");
    }
}
