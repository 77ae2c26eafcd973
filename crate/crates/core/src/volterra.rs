//! Discretized added-mass and added-damping error operators.
//!
//! In the nondimensional step variable `s = t / tau`, one Dirichlet-Neumann
//! iteration of the linearized leaky piston maps the displacement error by
//!
//! ```text
//! eps_k = (alpha_m L_m + alpha_d L_d) eps_{k-1}
//! [L_m e](s) = e(s) - int_0^s omega sin(omega (s - z)) e(z) dz
//! [L_d e](s) = -int_0^s cos(omega (s - z)) e(z) dz
//! ```
//!
//! Both operators are Volterra operators. They are sampled on a uniform grid
//! over `[0, 1]` with composite trapezoid quadrature on the same nodes, which
//! turns each of them into a dense lower-triangular matrix.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::output;
use crate::scalar::Scalar;
use crate::stencil;

/// Default grid resolution for figure reproduction.
pub const DEFAULT_NODES: usize = 257;

#[derive(Debug, Error)]
pub enum VolterraError {
    #[error("grid size mismatch: operator has {expected} nodes, function has {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("grid function needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("grid function value at node {index} is not finite")]
    NonFinite { index: usize },
    #[error("omega must be finite and >= 0, got {0}")]
    InvalidOmega(f64),
    #[error("zero initial error")]
    ZeroInitialError,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Samples of a function at the nodes `s_i = i / (n - 1)` of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(values: Vec<T>) -> Result<Self, VolterraError> {
        if values.len() < 2 {
            return Err(VolterraError::TooFewNodes {
                min: 2,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VolterraError::NonFinite { index });
        }
        Ok(GridFunction { values })
    }

    /// Samples `f` at `n` uniform nodes.
    pub fn from_fn(n: usize, f: impl Fn(T) -> T) -> Result<Self, VolterraError> {
        Self::new((0..n).map(|i| f(node(i, n))).collect())
    }

    pub fn zeros(n: usize) -> Result<Self, VolterraError> {
        Self::new(vec![T::zero(); n])
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Grid spacing `1 / (n - 1)`.
    pub fn spacing(&self) -> T {
        T::one() / T::count(self.n() - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = T> + '_ {
        let n = self.n();
        (0..n).map(move |i| node(i, n))
    }

    pub fn scaled(&self, c: T) -> Self {
        GridFunction {
            values: self.values.iter().map(|&v| c * v).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: T, other: &Self, b: T) -> Result<Self, VolterraError> {
        if other.n() != self.n() {
            return Err(VolterraError::SizeMismatch {
                expected: self.n(),
                got: other.n(),
            });
        }
        Ok(GridFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| (x - y).abs())
            .fold(T::zero(), T::max)
    }

    /// Writes two-column CSV `s,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), VolterraError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["s", "value"])?;
        for (s, v) in self.nodes().zip(&self.values) {
            wtr.write_record([s.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), VolterraError> {
        self.write_csv(output::create(path)?)
    }
}

fn node<T: Scalar>(i: usize, n: usize) -> T {
    T::count(i) / T::count(n - 1)
}

/// Kernel frequency and grid resolution of the operator pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConfig<T> {
    pub omega: T,
    pub n: usize,
}

impl<T: Scalar> OperatorConfig<T> {
    pub fn new(omega: T, n: usize) -> Result<Self, VolterraError> {
        if !(omega.is_finite() && omega >= T::zero()) {
            return Err(VolterraError::InvalidOmega(omega.to_f64_lossy()));
        }
        if n < 2 {
            return Err(VolterraError::TooFewNodes { min: 2, got: n });
        }
        Ok(OperatorConfig { omega, n })
    }
}

impl<T: Scalar> Default for OperatorConfig<T> {
    fn default() -> Self {
        OperatorConfig {
            omega: T::one(),
            n: DEFAULT_NODES,
        }
    }
}

/// Dense lower-triangular matrix stored row by row (row `i` has `i + 1` entries).
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> LowerTriangular<T> {
    fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        LowerTriangular { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.row(i)[j]
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        debug_assert_eq!(self.n, other.n);
        LowerTriangular {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn apply(&self, eps: &GridFunction<T>) -> Result<GridFunction<T>, VolterraError> {
        if eps.n() != self.n {
            return Err(VolterraError::SizeMismatch {
                expected: self.n,
                got: eps.n(),
            });
        }
        let x = eps.values();
        let values = (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &v)| a * v).sum())
            .collect();
        Ok(GridFunction { values })
    }
}

/// Trapezoid weight of node `j` in the integral over `[s_0, s_i]`, without the spacing.
fn trapezoid_weight<T: Scalar>(i: usize, j: usize) -> T {
    if i == 0 {
        T::zero()
    } else if j == 0 || j == i {
        T::lit(0.5)
    } else {
        T::one()
    }
}

/// Materialized `L_m` and `L_d` for one [`OperatorConfig`].
#[derive(Debug, Clone)]
pub struct VolterraOperators<T> {
    config: OperatorConfig<T>,
    lm: LowerTriangular<T>,
    ld: LowerTriangular<T>,
}

impl<T: Scalar> VolterraOperators<T> {
    pub fn new(config: OperatorConfig<T>) -> Self {
        let n = config.n;
        let omega = config.omega;
        let h = T::one() / T::count(n - 1);
        let lag = |i: usize, j: usize| T::count(i - j) * h;
        let ld = LowerTriangular::from_fn(n, |i, j| {
            -h * trapezoid_weight::<T>(i, j) * (omega * lag(i, j)).cos()
        });
        let lm = LowerTriangular::from_fn(n, |i, j| {
            let identity = if i == j { T::one() } else { T::zero() };
            identity - h * trapezoid_weight::<T>(i, j) * omega * (omega * lag(i, j)).sin()
        });
        VolterraOperators { config, lm, ld }
    }

    pub fn config(&self) -> &OperatorConfig<T> {
        &self.config
    }

    pub fn lm(&self) -> &LowerTriangular<T> {
        &self.lm
    }

    pub fn ld(&self) -> &LowerTriangular<T> {
        &self.ld
    }

    pub fn apply_ld(&self, eps: &GridFunction<T>) -> Result<GridFunction<T>, VolterraError> {
        self.ld.apply(eps)
    }

    pub fn apply_lm(&self, eps: &GridFunction<T>) -> Result<GridFunction<T>, VolterraError> {
        self.lm.apply(eps)
    }

    /// Matrix of `alpha_m L_m + alpha_d L_d`.
    pub fn mixture(&self, alpha_m: T, alpha_d: T) -> LowerTriangular<T> {
        self.lm.combine(alpha_m, &self.ld, alpha_d)
    }

    /// `[eps_0, ..., eps_k]` with `eps_j = (alpha_m L_m + alpha_d L_d) eps_{j-1}`.
    pub fn apply_mixture(
        &self,
        alpha_m: T,
        alpha_d: T,
        eps: &GridFunction<T>,
        k: usize,
    ) -> Result<Vec<GridFunction<T>>, VolterraError> {
        let op = self.mixture(alpha_m, alpha_d);
        iterate(&op, eps, k)
    }

    /// `||eps_j||_H1 / ||eps_0||_H1` for `j = 0..=k`.
    pub fn norm_history(
        &self,
        alpha_m: T,
        alpha_d: T,
        eps0: &GridFunction<T>,
        k: usize,
    ) -> Result<Vec<T>, VolterraError> {
        let iterates = self.apply_mixture(alpha_m, alpha_d, eps0, k)?;
        norm_ratios(&iterates)
    }

    /// `||L_m L_d eps - L_d L_m eps||_H1`.
    pub fn commutator_norm(&self, eps: &GridFunction<T>) -> Result<T, VolterraError> {
        let md = self.lm.apply(&self.ld.apply(eps)?)?;
        let dm = self.ld.apply(&self.lm.apply(eps)?)?;
        h1_norm(&md.axpby(T::one(), &dm, -T::one())?)
    }

    /// `r_k = (||L_d^k eps0|| / ||eps0||)^(1/k)` for `k = 1..=k_max`.
    pub fn quasi_nilpotency_estimate(
        &self,
        eps0: &GridFunction<T>,
        k_max: usize,
    ) -> Result<Vec<T>, VolterraError> {
        let iterates = iterate(&self.ld, eps0, k_max)?;
        let ratios = norm_ratios(&iterates)?;
        Ok(ratios
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &r)| r.powf(T::one() / T::count(k)))
            .collect())
    }
}

fn iterate<T: Scalar>(
    op: &LowerTriangular<T>,
    eps: &GridFunction<T>,
    k: usize,
) -> Result<Vec<GridFunction<T>>, VolterraError> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(eps.clone());
    for j in 0..k {
        let next = op.apply(&out[j])?;
        out.push(next);
    }
    Ok(out)
}

fn norm_ratios<T: Scalar>(iterates: &[GridFunction<T>]) -> Result<Vec<T>, VolterraError> {
    let base = h1_norm(&iterates[0])?;
    if base == T::zero() {
        return Err(VolterraError::ZeroInitialError);
    }
    let mut out = Vec::with_capacity(iterates.len());
    out.push(T::one());
    for eps in &iterates[1..] {
        out.push(h1_norm(eps)? / base);
    }
    Ok(out)
}

/// Discrete `H^1(0,1)` norm: trapezoid integrals of `eps^2` and `eps'^2`, with
/// `eps'` from second-order finite differences.
pub fn h1_norm<T: Scalar>(eps: &GridFunction<T>) -> Result<T, VolterraError> {
    if eps.n() < 3 {
        return Err(VolterraError::TooFewNodes {
            min: 3,
            got: eps.n(),
        });
    }
    let h = eps.spacing();
    let deriv = stencil::first_derivative(eps.values(), h);
    let sq: Vec<T> = eps
        .values()
        .iter()
        .zip(&deriv)
        .map(|(&v, &d)| v * v + d * d)
        .collect();
    Ok(stencil::trapezoid(&sq, h).sqrt())
}

pub fn apply_ld<T: Scalar>(
    cfg: OperatorConfig<T>,
    eps: &GridFunction<T>,
) -> Result<GridFunction<T>, VolterraError> {
    check_size(&cfg, eps)?;
    VolterraOperators::new(cfg).apply_ld(eps)
}

pub fn apply_lm<T: Scalar>(
    cfg: OperatorConfig<T>,
    eps: &GridFunction<T>,
) -> Result<GridFunction<T>, VolterraError> {
    check_size(&cfg, eps)?;
    VolterraOperators::new(cfg).apply_lm(eps)
}

pub fn apply_mixture<T: Scalar>(
    cfg: OperatorConfig<T>,
    alpha_m: T,
    alpha_d: T,
    eps: &GridFunction<T>,
    k: usize,
) -> Result<Vec<GridFunction<T>>, VolterraError> {
    check_size(&cfg, eps)?;
    VolterraOperators::new(cfg).apply_mixture(alpha_m, alpha_d, eps, k)
}

pub fn norm_history<T: Scalar>(
    cfg: OperatorConfig<T>,
    alpha_m: T,
    alpha_d: T,
    eps0: &GridFunction<T>,
    k: usize,
) -> Result<Vec<T>, VolterraError> {
    check_size(&cfg, eps0)?;
    VolterraOperators::new(cfg).norm_history(alpha_m, alpha_d, eps0, k)
}

pub fn commutator_norm<T: Scalar>(
    cfg: OperatorConfig<T>,
    eps: &GridFunction<T>,
) -> Result<T, VolterraError> {
    check_size(&cfg, eps)?;
    VolterraOperators::new(cfg).commutator_norm(eps)
}

pub fn quasi_nilpotency_estimate<T: Scalar>(
    cfg: OperatorConfig<T>,
    eps0: &GridFunction<T>,
    k_max: usize,
) -> Result<Vec<T>, VolterraError> {
    check_size(&cfg, eps0)?;
    VolterraOperators::new(cfg).quasi_nilpotency_estimate(eps0, k_max)
}

fn check_size<T: Scalar>(
    cfg: &OperatorConfig<T>,
    eps: &GridFunction<T>,
) -> Result<(), VolterraError> {
    if cfg.n != eps.n() {
        return Err(VolterraError::SizeMismatch {
            expected: cfg.n,
            got: eps.n(),
        });
    }
    Ok(())
}

/// Writes `k,ratio` rows.
pub fn write_norm_history<T: Scalar, W: Write>(ratios: &[T], w: W) -> Result<(), VolterraError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["k", "ratio"])?;
    for (k, r) in ratios.iter().enumerate() {
        wtr.write_record([k.to_string(), r.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
