//! Free-energy potentials, mobility and viscosity laws, and sample-based
//! checks of the structural assumptions the control theory relies on.

use crate::error::{ChnsError, Result};
use crate::scalar::{count, lit, Real};

/// Bulk free-energy density `F`.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialModel<T> {
    /// `F(s) = (1 - s^2)^2 / 4`.
    DoubleWell,
    /// `F(s) = theta/2 [(1+s)ln(1+s) + (1-s)ln(1-s)] + theta_c/2 (1 - s^2)`,
    /// evaluated after clamping `s` to `[-1 + delta_min, 1 - delta_min]`.
    Logarithmic { theta: T, theta_c: T, delta_min: T },
    /// `F(s) = sum_k c_k s^k`.
    Polynomial { coefficients: Vec<T> },
}

/// Result of a potential evaluation; `clamped` is set when a logarithmic
/// argument was moved onto the admissible interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialValue<T> {
    pub value: T,
    pub clamped: bool,
}

/// Evaluates `F^(order)(s)` for `order` in `0..=3`.
pub fn potential_eval<T: Real>(model: &PotentialModel<T>, s: T, order: usize) -> Result<PotentialValue<T>> {
    if s.is_nan() {
        return Err(ChnsError::InvalidArgument("potential argument is NaN".into()));
    }
    if order > 3 {
        return Err(ChnsError::InvalidArgument(format!(
            "potential derivative order must be 0..=3, got {order}"
        )));
    }
    Ok(model.eval(s, order))
}

impl<T: Real> PotentialModel<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialModel::DoubleWell => Ok(()),
            PotentialModel::Logarithmic {
                theta,
                theta_c,
                delta_min,
            } => {
                if !(*theta > T::zero()) || *theta_c < T::zero() {
                    return Err(ChnsError::InvalidArgument(format!(
                        "logarithmic potential needs theta > 0 and theta_c >= 0, got {theta}, {theta_c}"
                    )));
                }
                if !(*delta_min > T::zero() && *delta_min < lit(0.1)) {
                    return Err(ChnsError::InvalidArgument(format!(
                        "logarithmic clamp margin must lie in (0, 0.1), got {delta_min}"
                    )));
                }
                Ok(())
            }
            PotentialModel::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(ChnsError::InvalidArgument(
                        "polynomial potential needs finite coefficients".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Admissible argument interval, if the potential is singular.
    pub fn clamp_interval(&self) -> Option<(T, T)> {
        match self {
            PotentialModel::Logarithmic { delta_min, .. } => Some((-T::one() + *delta_min, T::one() - *delta_min)),
            _ => None,
        }
    }

    /// Growth exponent `r` declared for `|F''(s)| <= C0 (1 + |s|^r)`.
    pub fn growth_exponent(&self) -> Option<T> {
        match self {
            PotentialModel::DoubleWell => Some(lit(2.0)),
            PotentialModel::Polynomial { coefficients } => {
                let deg = coefficients.len().saturating_sub(1);
                Some(count::<T>(deg.saturating_sub(2)))
            }
            PotentialModel::Logarithmic { .. } => None,
        }
    }

    pub fn eval(&self, s: T, order: usize) -> PotentialValue<T> {
        match self {
            PotentialModel::DoubleWell => {
                let one = T::one();
                let value = match order {
                    0 => (one - s * s) * (one - s * s) * lit(0.25),
                    1 => s * s * s - s,
                    2 => lit::<T>(3.0) * s * s - one,
                    _ => lit::<T>(6.0) * s,
                };
                PotentialValue { value, clamped: false }
            }
            PotentialModel::Logarithmic {
                theta,
                theta_c,
                delta_min,
            } => {
                let one = T::one();
                let hi = one - *delta_min;
                let clamped = s > hi || s < -hi;
                let r = s.max(-hi).min(hi);
                let half = lit::<T>(0.5);
                let value = match order {
                    0 => {
                        *theta * half * ((one + r) * (one + r).ln() + (one - r) * (one - r).ln())
                            + *theta_c * half * (one - r * r)
                    }
                    1 => *theta * half * ((one + r) / (one - r)).ln() - *theta_c * r,
                    2 => *theta / (one - r * r) - *theta_c,
                    _ => lit::<T>(2.0) * *theta * r / ((one - r * r) * (one - r * r)),
                };
                PotentialValue { value, clamped }
            }
            PotentialModel::Polynomial { coefficients } => {
                // Horner on the order-th derivative coefficients
                let mut acc = T::zero();
                for (k, &c) in coefficients.iter().enumerate().rev() {
                    if k < order {
                        break;
                    }
                    let mut factor = T::one();
                    for q in 0..order {
                        factor *= count::<T>(k - q);
                    }
                    acc = acc * s + c * factor;
                }
                PotentialValue {
                    value: acc,
                    clamped: false,
                }
            }
        }
    }

    /// Convex part's second derivative `F1''` in the decomposition
    /// `F = F1 - theta0/2 s^2` (logarithmic kind only).
    pub fn convex_part_second_derivative(&self, s: T) -> Option<T> {
        match self {
            PotentialModel::Logarithmic { theta, delta_min, .. } => {
                let hi = T::one() - *delta_min;
                let r = s.max(-hi).min(hi);
                Some(*theta / (T::one() - r * r))
            }
            _ => None,
        }
    }
}

/// Coefficient law used for mobility and viscosity.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientLaw<T> {
    Constant(T),
    /// `(minus + plus)/2 + (plus - minus)/2 * tanh(s / width)`.
    TanhBlend {
        minus: T,
        plus: T,
        width: T,
    },
}

impl<T: Real> CoefficientLaw<T> {
    pub fn eval(&self, s: T) -> T {
        match self {
            CoefficientLaw::Constant(c) => *c,
            CoefficientLaw::TanhBlend { minus, plus, width } => {
                let half = lit::<T>(0.5);
                half * (*minus + *plus) + half * (*plus - *minus) * (s / *width).tanh()
            }
        }
    }
    pub fn deriv(&self, s: T) -> T {
        match self {
            CoefficientLaw::Constant(_) => T::zero(),
            CoefficientLaw::TanhBlend { minus, plus, width } => {
                let th = (s / *width).tanh();
                lit::<T>(0.5) * (*plus - *minus) / *width * (T::one() - th * th)
            }
        }
    }
    pub fn is_constant(&self) -> bool {
        matches!(self, CoefficientLaw::Constant(_))
    }
    /// Declared bounds `(lower, upper)`.
    pub fn bounds(&self) -> (T, T) {
        match self {
            CoefficientLaw::Constant(c) => (*c, *c),
            CoefficientLaw::TanhBlend { minus, plus, .. } => (minus.min(*plus), minus.max(*plus)),
        }
    }
    /// Midpoint of the declared bounds, used as the implicit reference.
    pub fn reference(&self) -> T {
        let (a, b) = self.bounds();
        lit::<T>(0.5) * (a + b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialModel<T> {
    pub mobility: CoefficientLaw<T>,
    pub viscosity: CoefficientLaw<T>,
}

impl<T: Real> MaterialModel<T> {
    pub fn constant(m: T, eta: T) -> Self {
        Self {
            mobility: CoefficientLaw::Constant(m),
            viscosity: CoefficientLaw::Constant(eta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, law) in [("mobility", &self.mobility), ("viscosity", &self.viscosity)] {
            let (lo, _) = law.bounds();
            if !(lo > T::zero()) {
                return Err(ChnsError::InvalidArgument(format!(
                    "{name} lower bound must be positive, got {lo}"
                )));
            }
            if let CoefficientLaw::TanhBlend { width, .. } = law {
                if !(*width > T::zero()) {
                    return Err(ChnsError::InvalidArgument(format!(
                        "{name} blend width must be positive"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct ValidationReport<T> {
    pub mobility_range: (T, T),
    pub viscosity_range: (T, T),
    pub f2_range: (T, T),
    /// Sampled `sup |F''| / (1 + |s|^r)` for the declared `r`.
    pub growth_constant: Option<T>,
    /// Log-log slope of `|F''|` over the upper half of `|s|`.
    pub fitted_growth_exponent: Option<T>,
    /// Sampled minimum of `F1''` (logarithmic kind).
    pub alpha0: Option<T>,
    pub checks: Vec<AssumptionCheck>,
}

impl<T: Real> ValidationReport<T> {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Samples the coefficient laws and the potential on `s_range` and reports
/// which structural assumptions hold there.
pub fn validate_assumptions<T: Real>(
    material: &MaterialModel<T>,
    potential: &PotentialModel<T>,
    s_range: (T, T),
    samples: usize,
) -> ValidationReport<T> {
    let samples = samples.max(100);
    let (a, b) = s_range;
    let pts: Vec<T> = (0..samples)
        .map(|k| a + (b - a) * count::<T>(k) / count::<T>(samples - 1))
        .collect();
    let range_of = |f: &dyn Fn(T) -> T| {
        pts.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &s| {
            let v = f(s);
            (lo.min(v), hi.max(v))
        })
    };
    let m_range = range_of(&|s| material.mobility.eval(s));
    let eta_range = range_of(&|s| material.viscosity.eval(s));
    let f2_range = range_of(&|s| potential.eval(s, 2).value);
    let mut checks = Vec::new();

    let (m0, m1) = material.mobility.bounds();
    let (e0, e1) = material.viscosity.bounds();
    let slack = lit::<T>(1e-12);
    let a1 = m_range.0 > T::zero()
        && eta_range.0 > T::zero()
        && m_range.0 >= m0 - slack
        && m_range.1 <= m1 + slack
        && eta_range.0 >= e0 - slack
        && eta_range.1 <= e1 + slack;
    checks.push(AssumptionCheck {
        name: "A1",
        pass: a1,
        detail: format!(
            "m in [{}, {}], eta in [{}, {}]",
            m_range.0, m_range.1, eta_range.0, eta_range.1
        ),
    });

    let mut growth_constant = None;
    let mut fitted = None;
    let mut alpha0 = None;
    match potential.growth_exponent() {
        Some(r) => {
            let nonneg = pts.iter().all(|&s| potential.eval(s, 0).value >= -slack);
            let c0 = pts
                .iter()
                .map(|&s| potential.eval(s, 2).value.abs() / (T::one() + s.abs().powf(r)))
                .fold(T::zero(), |m, v| m.max(v));
            let c0_3 = pts
                .iter()
                .map(|&s| potential.eval(s, 3).value.abs() / (T::one() + s.abs().powf((r - T::one()).max(T::zero()))))
                .fold(T::zero(), |m, v| m.max(v));
            growth_constant = Some(c0);
            let smax = a.abs().max(b.abs());
            if smax > T::zero() {
                let s1 = smax * lit(0.5);
                let f1 = T::one() + potential.eval(s1, 2).value.abs();
                let f2 = T::one() + potential.eval(smax, 2).value.abs();
                fitted = Some((f2 / f1).ln() / lit::<T>(2.0).ln());
            }
            let within = fitted.is_none_or(|p| p <= r + lit(0.75));
            checks.push(AssumptionCheck {
                name: "A2",
                pass: nonneg && c0.is_finite() && within,
                detail: format!("F >= 0: {nonneg}; C0 ~ {c0}; fitted exponent {fitted:?} vs r = {r}"),
            });
            checks.push(AssumptionCheck {
                name: "A4",
                pass: c0_3.is_finite(),
                detail: format!("sup |F'''|/(1+|s|^(r-1)) ~ {c0_3}"),
            });
        }
        None => {
            // F1'' is even and increasing in |s|: the point nearest 0 is the minimizer
            let nearest_zero = T::zero().max(a).min(b);
            let f1pp: Vec<T> = pts
                .iter()
                .chain(std::iter::once(&nearest_zero))
                .filter_map(|&s| potential.convex_part_second_derivative(s))
                .collect();
            let a0 = f1pp.iter().fold(T::infinity(), |m, &v| m.min(v));
            alpha0 = Some(a0);
            checks.push(AssumptionCheck {
                name: "H1",
                pass: a0 > T::zero(),
                detail: format!("min F1'' = {a0}"),
            });
            let h2 = pts
                .iter()
                .map(|&s| {
                    let f1 = potential.convex_part_second_derivative(s).unwrap_or(T::one());
                    let fp = potential.eval(s, 1).value.abs();
                    f1.max(T::one()).ln() / (T::one() + fp)
                })
                .fold(T::zero(), |m, v| m.max(v));
            checks.push(AssumptionCheck {
                name: "H2",
                pass: h2.is_finite(),
                detail: format!("sup ln F1'' / (1 + |F'|) = {h2}"),
            });
        }
    }

    ValidationReport {
        mobility_range: m_range,
        viscosity_range: eta_range,
        f2_range,
        growth_constant,
        fitted_growth_exponent: fitted,
        alpha0,
        checks,
    }
}

/// Smallest `S` with `S >= max |F''| / 2` over `s_range` (intersected with
/// the clamp interval for singular potentials).
pub fn stabilization_constant<T: Real>(potential: &PotentialModel<T>, s_range: (T, T)) -> Result<T> {
    let (mut a, mut b) = s_range;
    if !(a <= b) {
        return Err(ChnsError::InvalidArgument(format!(
            "empty stabilization range [{a}, {b}]"
        )));
    }
    if let Some((lo, hi)) = potential.clamp_interval() {
        a = a.max(lo);
        b = b.min(hi);
        if a > b {
            return Err(ChnsError::InvalidArgument(
                "stabilization range misses the admissible interval".into(),
            ));
        }
    }
    let half = lit::<T>(0.5);
    let f2 = |s: T| potential.eval(s, 2).value.abs();
    let s = match potential {
        // |F''| is even and monotone in |s| away from 0 for both closed forms
        PotentialModel::DoubleWell | PotentialModel::Logarithmic { .. } => {
            let mut m = f2(a).max(f2(b));
            if a <= T::zero() && b >= T::zero() {
                m = m.max(f2(T::zero()));
            }
            m * half
        }
        PotentialModel::Polynomial { .. } => {
            let n = 1000usize;
            let m = (0..=n)
                .map(|k| f2(a + (b - a) * count::<T>(k) / count::<T>(n)))
                .fold(T::zero(), |m, v| m.max(v));
            m * half * lit(1.1)
        }
    };
    Ok(s)
}
