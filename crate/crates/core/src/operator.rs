//! The operator family `F(q, X) = -|q|^alpha * Delta_p^N`, written in terms of
//! the gradient `q` and the Hessian `X`:
//!
//! ```text
//! F(q, X) = -|q|^alpha * [ (p-2)/p * <q, X q>/|q|^2 + (1/p) * tr X ]
//! ```
//!
//! `p = inf` is carried as a tag and every coefficient uses the limits
//! `(p-2)/p -> 1`, `1/p -> 0`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exponent `p` of the normalized p-Laplacian, `p` in `[2, inf]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    /// Weight `(p-2)/p` of the aligned second derivative.
    pub fn directional_weight(self) -> f64 {
        match self {
            Exponent::Finite(p) => (p - 2.0) / p,
            Exponent::Infinity => 1.0,
        }
    }

    /// Weight `1/p` of the trace term.
    pub fn trace_weight(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" | "∞" => Ok(Exponent::Infinity),
            other => other
                .parse::<f64>()
                .map(|p| {
                    if p.is_infinite() && p > 0.0 {
                        Exponent::Infinity
                    } else {
                        Exponent::Finite(p)
                    }
                })
                .map_err(|_| Error::InvalidParams(format!("cannot parse p = `{s}`"))),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(Exponent::Finite(p)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// The pair `(p, alpha)` together with the space dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    pub p: Exponent,
    pub alpha: f64,
    pub n: usize,
}

impl OperatorParams {
    pub fn new(p: Exponent, alpha: f64, n: usize) -> Result<Self> {
        let params = OperatorParams { p, alpha, n };
        params.validate()?;
        Ok(params)
    }

    /// Shorthand for finite `p`.
    pub fn finite(p: f64, alpha: f64, n: usize) -> Result<Self> {
        Self::new(Exponent::Finite(p), alpha, n)
    }

    pub fn infinity(alpha: f64, n: usize) -> Result<Self> {
        Self::new(Exponent::Infinity, alpha, n)
    }

    pub fn validate(&self) -> Result<()> {
        if let Exponent::Finite(p) = self.p {
            if !(p >= 2.0) || !p.is_finite() {
                return Err(Error::InvalidParams(format!("p = {p} must lie in [2, inf]")));
            }
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParams(format!("alpha = {} must be >= 0", self.alpha)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParams("dimension n must be >= 1".into()));
        }
        Ok(())
    }

    /// Same `(p, alpha)` in another dimension.
    pub fn with_dim(self, n: usize) -> Self {
        OperatorParams { n, ..self }
    }

    /// `c_F = (n + p - 2)/p`, the constant with `F(q, Id) = -c_F |q|^alpha`.
    pub fn c_f(&self) -> f64 {
        self.p.directional_weight() + self.n as f64 * self.p.trace_weight()
    }

    /// `c_Q = (p - 1)/p`, the constant with `F(q, q⊗q) = -c_Q |q|^(alpha+2)`.
    pub fn c_q(&self) -> f64 {
        self.p.directional_weight() + self.p.trace_weight()
    }

    /// `c_F + alpha (c_F - c_Q)`, shared by every barrier formula.
    pub fn barrier_denominator(&self) -> f64 {
        let cf = self.c_f();
        cf + self.alpha * (cf - self.c_q())
    }

    /// Power-concavity exponent `(alpha+1)/(alpha+2)`.
    pub fn concavity_exponent(&self) -> f64 {
        (self.alpha + 1.0) / (self.alpha + 2.0)
    }
}

/// Real symmetric `n x n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn diag(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    /// `q ⊗ q`.
    pub fn outer(q: &[f64]) -> Self {
        let n = q.len();
        SymMatrix(DMatrix::from_fn(n, n, |i, j| q[i] * q[j]))
    }

    /// Row-major square input; rejected unless exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("matrix rows must form a square".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        let asym = (&m - m.transpose()).abs().max();
        if asym != 0.0 {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(SymMatrix(m))
    }

    /// `(M + M^T)/2`.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        let s = (m + m.transpose()) * 0.5;
        // round-off in the average can leave 1-ulp asymmetry
        let n = s.nrows();
        SymMatrix(DMatrix::from_fn(n, n, |i, j| if i <= j { s[(i, j)] } else { s[(j, i)] }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect()).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `<q, X q>`.
    pub fn quad(&self, q: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += q[i] * self.0[(i, j)] * q[j];
            }
        }
        s
    }

    pub fn scale(&self, a: f64) -> Self {
        SymMatrix(&self.0 * a)
    }

    /// `a X + b Y`.
    pub fn combine(a: f64, x: &SymMatrix, b: f64, y: &SymMatrix) -> Self {
        SymMatrix::symmetrize(&(&x.0 * a + &y.0 * b))
    }

    /// `Q^T X Q`.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> Self {
        SymMatrix::symmetrize(&(q.transpose() * &self.0 * q))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues().last().expect("non-empty matrix")
    }

    /// Inverse of a positive definite matrix.
    pub fn inverse_pd(&self) -> Result<Self> {
        let chol = self.0.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(SymMatrix::symmetrize(&chol.inverse()))
    }
}

/// Which semicontinuous envelope to take at `q = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

fn norm(q: &[f64]) -> f64 {
    q.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_dims(params: &OperatorParams, q_len: Option<usize>, x: &SymMatrix) -> Result<()> {
    if let Some(len) = q_len {
        if len != params.n {
            return Err(Error::DimensionMismatch { expected: params.n, got: len });
        }
    }
    if x.dim() != params.n {
        return Err(Error::DimensionMismatch { expected: params.n, got: x.dim() });
    }
    Ok(())
}

/// `F(q, X)` for `q != 0`.
pub fn eval_f(params: &OperatorParams, q: &[f64], x: &SymMatrix) -> Result<f64> {
    check_dims(params, Some(q.len()), x)?;
    let qn = norm(q);
    if qn == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let aligned = x.quad(q) / (qn * qn);
    let bracket = params.p.directional_weight() * aligned + params.p.trace_weight() * x.trace();
    Ok(-qn.powf(params.alpha) * bracket)
}

/// `F_*(0, X)` or `F^*(0, X)`.
///
/// For `alpha > 0` both envelopes vanish. For `alpha = 0` the aligned term is
/// extremized over unit directions, which picks `lambda_max` for the lower
/// envelope and `lambda_min` for the upper one.
pub fn eval_f_at_zero(params: &OperatorParams, x: &SymMatrix, side: Side) -> Result<f64> {
    check_dims(params, None, x)?;
    if params.alpha > 0.0 {
        return Ok(0.0);
    }
    let lambda = match side {
        Side::Lower => x.lambda_max(),
        Side::Upper => x.lambda_min(),
    };
    Ok(-(params.p.directional_weight() * lambda + params.p.trace_weight() * x.trace()))
}

/// Upper envelope `F^*(q, X)`, valid for every `q` including zero.
pub fn eval_f_upper(params: &OperatorParams, q: &[f64], x: &SymMatrix) -> Result<f64> {
    if norm(q) == 0.0 {
        check_dims(params, Some(q.len()), x)?;
        eval_f_at_zero(params, x, Side::Upper)
    } else {
        eval_f(params, q, x)
    }
}

/// `c_F` extracted through `eval_f` at the given nonzero `q`.
pub fn c_f_from_eval(params: &OperatorParams, q: &[f64]) -> Result<f64> {
    let f = eval_f(params, q, &SymMatrix::identity(params.n))?;
    Ok(-f / norm(q).powf(params.alpha))
}

/// `c_Q` extracted through `eval_f` at the given nonzero `q`.
pub fn c_q_from_eval(params: &OperatorParams, q: &[f64]) -> Result<f64> {
    let f = eval_f(params, q, &SymMatrix::outer(q))?;
    Ok(-f / norm(q).powf(params.alpha + 2.0))
}

/// Closed-form `c_F`.
pub fn c_f(params: &OperatorParams) -> f64 {
    params.c_f()
}

/// Closed-form `c_Q`.
pub fn c_q(params: &OperatorParams) -> f64 {
    params.c_q()
}
