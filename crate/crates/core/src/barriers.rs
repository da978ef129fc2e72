//! Radial comparison functions.
//!
//! The torsion barrier
//!
//! ```text
//! Phi(x) = a - (alpha+1)/(alpha+2) * ((alpha+1) K / D)^(1/(alpha+1)) * |x - x0|^((alpha+2)/(alpha+1))
//! ```
//!
//! with `D = c_F + alpha (c_F - c_Q)` solves `F(grad Phi, D^2 Phi) = K` away
//! from `x0`, and `Psi = exp(Phi)` is a supersolution-side barrier for the
//! eigenvalue equation. Both come with exact derivatives so residuals can be
//! checked at machine precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{eval_f_upper, OperatorParams, SymMatrix};
use crate::solver::GridField;

/// Center, offset, constant `K` and operator of a radial barrier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub center: Vec<f64>,
    pub offset: f64,
    pub k: f64,
    pub params: OperatorParams,
    denominator: f64,
}

/// Value, gradient and Hessian at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymMatrix,
}

impl BarrierSpec {
    pub fn new(params: OperatorParams, center: Vec<f64>, offset: f64, k: f64) -> Result<Self> {
        params.validate()?;
        if center.len() != params.n {
            return Err(Error::DimensionMismatch { expected: params.n, got: center.len() });
        }
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!("barrier constant K = {k} must be >= 0")));
        }
        let denominator = params.barrier_denominator();
        if !(denominator > 0.0) {
            return Err(Error::InvalidParams(format!("c_F + alpha (c_F - c_Q) = {denominator} must be > 0")));
        }
        Ok(BarrierSpec { center, offset, k, params, denominator })
    }

    /// `c_F + alpha (c_F - c_Q)`.
    pub fn denominator(&self) -> f64 {
        self.denominator
    }

    /// Radial exponent `(alpha+2)/(alpha+1)`.
    pub fn exponent(&self) -> f64 {
        (self.params.alpha + 2.0) / (self.params.alpha + 1.0)
    }

    /// `((alpha+1) K / D)^(1/(alpha+1))`, the magnitude of `phi'(r) / r^(1/(alpha+1))`.
    fn slope_scale(&self) -> f64 {
        let a1 = self.params.alpha + 1.0;
        (a1 * self.k / self.denominator).powf(1.0 / a1)
    }

    /// Coefficient in front of `r^((alpha+2)/(alpha+1))`.
    pub fn coefficient(&self) -> f64 {
        self.params.concavity_exponent() * self.slope_scale()
    }

    fn radius(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.params.n {
            return Err(Error::DimensionMismatch { expected: self.params.n, got: x.len() });
        }
        Ok(x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    /// Radial profile `phi(r)` and its first two derivatives.
    pub fn profile(&self, r: f64) -> (f64, f64, f64) {
        let a1 = self.params.alpha + 1.0;
        let s = self.slope_scale();
        let value = self.offset - self.coefficient() * r.powf(self.exponent());
        if s == 0.0 {
            return (value, 0.0, 0.0);
        }
        let d1 = -s * r.powf(1.0 / a1);
        let d2 = -s / a1 * r.powf(1.0 / a1 - 1.0);
        (value, d1, d2)
    }

    /// Value of `Phi` at `x`; defined everywhere.
    pub fn torsion_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.profile(self.radius(x)?).0)
    }
}

fn radial_jet(spec: &BarrierSpec, x: &[f64]) -> Result<Jet> {
    let r = spec.radius(x)?;
    let n = spec.params.n;
    if spec.k == 0.0 {
        return Ok(Jet { value: spec.offset, gradient: vec![0.0; n], hessian: SymMatrix::zeros(n) });
    }
    if r == 0.0 {
        return Err(Error::AtCenter);
    }
    let (value, d1, d2) = spec.profile(r);
    let e: Vec<f64> = x.iter().zip(&spec.center).map(|(a, b)| (a - b) / r).collect();
    let gradient = e.iter().map(|v| d1 * v).collect();
    // D^2 phi = phi'' e(x)e + (phi'/r)(Id - e(x)e)
    let ee = SymMatrix::outer(&e);
    let proj = SymMatrix::combine(1.0, &SymMatrix::identity(n), -1.0, &ee);
    let hessian = SymMatrix::combine(d2, &ee, d1 / r, &proj);
    Ok(Jet { value, gradient, hessian })
}

/// `Phi` with exact derivatives. Derivatives do not exist at the center when `K > 0`.
pub fn torsion_barrier(spec: &BarrierSpec, x: &[f64]) -> Result<Jet> {
    radial_jet(spec, x)
}

/// `F(grad Phi, D^2 Phi) - K`; vanishes identically.
pub fn torsion_barrier_residual(spec: &BarrierSpec, x: &[f64]) -> Result<f64> {
    let jet = torsion_barrier(spec, x)?;
    Ok(eval_f_upper(&spec.params, &jet.gradient, &jet.hessian)? - spec.k)
}

/// `Psi = exp(Phi)` with chain-rule derivatives.
pub fn eigen_barrier(spec: &BarrierSpec, x: &[f64]) -> Result<Jet> {
    let phi = radial_jet(spec, x)?;
    let psi = phi.value.exp();
    let gradient = phi.gradient.iter().map(|g| psi * g).collect();
    let gg = SymMatrix::outer(&phi.gradient);
    let hessian = SymMatrix::combine(psi, &phi.hessian, psi, &gg);
    Ok(Jet { value: psi, gradient, hessian })
}

/// `F(grad Psi, D^2 Psi) - K |Psi|^alpha Psi`, which is `<= 0`.
///
/// By homogeneity the left side equals `Psi^(alpha+1) (K - c_Q |Phi'|^(alpha+2))`.
pub fn eigen_barrier_residual(spec: &BarrierSpec, x: &[f64]) -> Result<f64> {
    let jet = eigen_barrier(spec, x)?;
    let f = eval_f_upper(&spec.params, &jet.gradient, &jet.hessian)?;
    Ok(f - spec.k * jet.value.abs().powf(spec.params.alpha) * jet.value)
}

/// Torsion solution on the ball `B_R(0)`: the `K = 1` barrier shifted to vanish at `|x| = R`.
pub fn exact_ball_torsion(params: &OperatorParams, radius: f64, x: &[f64]) -> Result<f64> {
    let r = ball_radius(params, radius, x)?;
    let spec = ball_spec(params, radius)?;
    Ok(spec.profile(r).0)
}

/// `(u(r), u'(r), u''(r))` of the ball torsion solution.
pub fn exact_ball_torsion_profile(params: &OperatorParams, radius: f64, r: f64) -> Result<(f64, f64, f64)> {
    if !(r >= 0.0) || r > radius * (1.0 + 1e-12) {
        return Err(Error::OutsideBall { radius });
    }
    Ok(ball_spec(params, radius)?.profile(r))
}

/// Barrier spec whose profile is the ball torsion solution.
pub fn ball_spec(params: &OperatorParams, radius: f64) -> Result<BarrierSpec> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius {radius} must be > 0")));
    }
    let mut spec = BarrierSpec::new(*params, vec![0.0; params.n], 0.0, 1.0)?;
    spec.offset = spec.coefficient() * radius.powf(spec.exponent());
    Ok(spec)
}

fn ball_radius(params: &OperatorParams, radius: f64, x: &[f64]) -> Result<f64> {
    if x.len() != params.n {
        return Err(Error::DimensionMismatch { expected: params.n, got: x.len() });
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r > radius * (1.0 + 1e-12) {
        return Err(Error::OutsideBall { radius });
    }
    Ok(r.min(radius))
}

/// Certified upper bound for the inward difference quotient at a boundary
/// minimum of a supersolution of `F = f`:
/// `-((alpha+1) eps inf_f R / D)^(1/(alpha+1)) * cos_angle`.
pub fn hopf_bound(params: &OperatorParams, radius: f64, eps: f64, inf_f: f64, cos_angle: f64) -> Result<f64> {
    params.validate()?;
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("interior ball radius {radius} must be > 0")));
    }
    if !(inf_f > 0.0) {
        return Err(Error::InvalidArgument(format!("inf f = {inf_f} must be > 0")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must lie in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&cos_angle) {
        return Err(Error::InvalidArgument(format!("cos_angle = {cos_angle} must lie in [0, 1]")));
    }
    let a1 = params.alpha + 1.0;
    let base = a1 * eps * inf_f * radius / params.barrier_denominator();
    Ok(-base.powf(1.0 / a1) * cos_angle)
}

/// One row of a barrier profile export.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub r: f64,
    pub value: f64,
    pub gradient_norm: f64,
    pub residual: f64,
}

/// Samples the torsion barrier (or its exponential) along the first axis.
pub fn barrier_profile(spec: &BarrierSpec, radii: &[f64], exponential: bool) -> Result<Vec<ProfileRow>> {
    radii
        .iter()
        .map(|&r| {
            let mut x = spec.center.clone();
            x[0] += r;
            let (jet, residual) = if exponential {
                (eigen_barrier(spec, &x)?, eigen_barrier_residual(spec, &x)?)
            } else {
                (torsion_barrier(spec, &x)?, torsion_barrier_residual(spec, &x)?)
            };
            let gradient_norm = jet.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
            Ok(ProfileRow { r, value: jet.value, gradient_norm, residual })
        })
        .collect()
}

/// Default comparison tolerance: `1e-10 sup|u|` for analytic fields and
/// `2h sup|u|` for solver fields, which carry `O(h)` truncation error.
pub fn comparison_tolerance(u: &GridField, analytic: bool) -> f64 {
    let scale = u.sup().max(-u.inf()).max(f64::MIN_POSITIVE);
    if analytic {
        1e-10 * scale
    } else {
        2.0 * u.grid().h() * scale
    }
}

/// Checks `u >= Phi` on a node set `U` given that it holds on the discrete
/// boundary of `U` and at the node nearest the barrier center.
///
/// The discrete boundary is the nodes of `U` with an axis neighbor outside
/// `U` (including cut arms). Returns the lattice coordinates of the remaining
/// nodes where `u < Phi - tol`; if the precondition fails, the error lists the
/// offending boundary nodes instead.
pub fn comparison_check(u: &GridField, spec: &BarrierSpec, set: &[usize], tol: f64) -> Result<Vec<(usize, usize)>> {
    let grid = u.grid();
    if spec.params.n != 2 && !(spec.params.n == 1 && grid.dim() == 1) {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: spec.params.n });
    }
    let mut member = vec![false; grid.node_count()];
    for &k in set {
        if k >= grid.node_count() || !grid.class(k).is_inside() {
            return Err(Error::NotInterior(grid.coords(k.min(grid.node_count() - 1))));
        }
        member[k] = true;
    }
    let coords = |k: usize| -> Vec<f64> { grid.point(k)[..spec.params.n].to_vec() };
    let phi = |k: usize| spec.torsion_value(&coords(k));
    let axes = if grid.dim() == 1 { 2 } else { 4 };
    let on_edge = |k: usize| grid.arms(k)[..axes].iter().any(|a| a.node.is_none_or(|n| !member[n]));
    let center = set.iter().copied().min_by(|&a, &b| {
        let d = |k: usize| coords(k).iter().zip(&spec.center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>();
        d(a).total_cmp(&d(b))
    });
    let mut failed = Vec::new();
    let mut violations = Vec::new();
    for &k in set {
        let below = u.get(k) < phi(k)? - tol;
        if on_edge(k) || Some(k) == center {
            if below {
                failed.push(grid.coords(k));
            }
        } else if below {
            violations.push(grid.coords(k));
        }
    }
    if !failed.is_empty() {
        return Err(Error::ComparisonPrecondition(failed));
    }
    Ok(violations)
}
