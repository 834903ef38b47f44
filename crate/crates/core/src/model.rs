//! Utility models.
//!
//! A left agent values right agent `j` at `left_utility(r_j, s)` where `r_j`
//! is `j`'s public rating and `s` the left agent's private score for `j`; the
//! right side is symmetric with `right_utility`. Both functions must be
//! strictly increasing in each argument.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::Side;

pub type UtilityFn = fn(f64, f64) -> f64;

/// A user-supplied monotone utility pair with declared derivative bounds.
///
/// The declaration is trusted; [`check_monotone`] can spot-check it.
#[derive(Clone, Copy)]
pub struct CustomUtility {
    pub name: &'static str,
    pub left: UtilityFn,
    pub right: UtilityFn,
    /// Lower bound on (d/dr) / (d/ds).
    pub rho: f64,
    /// Upper bound on d/dr.
    pub mu: f64,
}

impl fmt::Debug for CustomUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomUtility")
            .field("name", &self.name)
            .field("rho", &self.rho)
            .field("mu", &self.mu)
            .finish()
    }
}

impl PartialEq for CustomUtility {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.rho == other.rho && self.mu == other.mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityModel {
    /// `λ·rating + (1−λ)·score` on both sides.
    Linear { lambda: f64 },
    Custom(CustomUtility),
}

fn product_utility(r: f64, s: f64) -> f64 {
    (0.5 + r) * (0.5 + s) / 2.25
}

/// `(0.5 + r)(0.5 + s) / 2.25`: maps the unit square onto [1/9, 1], with
/// d/dr ≤ 2/3 and ratio (0.5 + s)/(0.5 + r) ≥ 1/3.
pub const PRODUCT: CustomUtility = CustomUtility {
    name: "product",
    left: product_utility,
    right: product_utility,
    rho: 1.0 / 3.0,
    mu: 2.0 / 3.0,
};

impl UtilityModel {
    pub fn linear(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(invalid("lambda", format!("{lambda} is outside (0, 1)")));
        }
        Ok(UtilityModel::Linear { lambda })
    }

    /// Looks up a registered model by id. `lambda` is only used by `linear`.
    pub fn builtin(id: &str, lambda: f64) -> Result<Self> {
        match id {
            "linear" => Self::linear(lambda),
            "product" => Ok(UtilityModel::Custom(PRODUCT)),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            UtilityModel::Linear { .. } => "linear",
            UtilityModel::Custom(c) => c.name,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            UtilityModel::Linear { lambda } => Some(*lambda),
            UtilityModel::Custom(_) => None,
        }
    }

    #[inline]
    pub fn left_utility(&self, rating: f64, score: f64) -> f64 {
        match self {
            UtilityModel::Linear { lambda } => lambda * rating + (1.0 - lambda) * score,
            UtilityModel::Custom(c) => (c.left)(rating, score),
        }
    }

    #[inline]
    pub fn right_utility(&self, rating: f64, score: f64) -> f64 {
        match self {
            UtilityModel::Linear { lambda } => lambda * rating + (1.0 - lambda) * score,
            UtilityModel::Custom(c) => (c.right)(rating, score),
        }
    }

    /// Utility of an agent on `side` for a partner with `rating`, given the
    /// agent's private `score` for that partner.
    #[inline]
    pub fn utility(&self, side: Side, rating: f64, score: f64) -> f64 {
        match side {
            Side::Left => self.left_utility(rating, score),
            Side::Right => self.right_utility(rating, score),
        }
    }

    /// `(ρ, μ)`. The linear model implies `ρ = λ/(1−λ)`, `μ = λ`.
    pub fn derivative_bounds(&self) -> DerivativeBounds {
        match self {
            UtilityModel::Linear { lambda } => DerivativeBounds {
                rho: lambda / (1.0 - lambda),
                mu: *lambda,
            },
            UtilityModel::Custom(c) => DerivativeBounds { rho: c.rho, mu: c.mu },
        }
    }

    /// Utility with perfect private score, extended linearly below rating 0
    /// with slope `μ`, as needed by truncation thresholds.
    pub fn extended_top_utility(&self, side: Side, rating: f64) -> f64 {
        if rating >= 0.0 {
            return self.utility(side, rating, 1.0);
        }
        match self {
            UtilityModel::Linear { lambda } => lambda * rating + (1.0 - lambda),
            UtilityModel::Custom(c) => self.utility(side, 0.0, 1.0) + c.mu * rating,
        }
    }

    pub(crate) fn to_descriptor(self) -> ModelDescriptor {
        ModelDescriptor { id: self.id().to_string(), lambda: self.lambda() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub rho: f64,
    pub mu: f64,
}

/// Serializable model identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub id: String,
    pub lambda: Option<f64>,
}

impl ModelDescriptor {
    pub fn resolve(&self) -> Result<UtilityModel> {
        UtilityModel::builtin(&self.id, self.lambda.unwrap_or(0.5))
    }
}

/// Finite-difference sign check of strict monotonicity on a `steps × steps`
/// grid over `[r_lo, r_hi] × [0, 1]`. Returns the first offending point.
pub fn check_monotone(
    model: &UtilityModel,
    side: Side,
    r_lo: f64,
    r_hi: f64,
    steps: usize,
) -> std::result::Result<(), (f64, f64)> {
    let steps = steps.max(2);
    let rs = |k: usize| r_lo + (r_hi - r_lo) * k as f64 / (steps - 1) as f64;
    let ss = |k: usize| k as f64 / (steps - 1) as f64;
    for a in 0..steps {
        for b in 0..steps {
            let (r, s) = (rs(a), ss(b));
            let u = model.utility(side, r, s);
            if a + 1 < steps && model.utility(side, rs(a + 1), s) <= u {
                return Err((r, s));
            }
            if b + 1 < steps && model.utility(side, r, ss(b + 1)) <= u {
                return Err((r, s));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_evaluation() {
        let m = UtilityModel::linear(0.5).unwrap();
        assert_eq!(m.left_utility(1.0, 1.0), 1.0);
        let m = UtilityModel::linear(0.8).unwrap();
        assert!((m.left_utility(0.5, 0.25) - 0.45).abs() < 1e-12);
        assert!((m.right_utility(0.5, 0.25) - 0.45).abs() < 1e-12);
    }

    #[test]
    fn lambda_range_is_enforced() {
        assert!(UtilityModel::linear(0.0).is_err());
        assert!(UtilityModel::linear(1.0).is_err());
        assert!(UtilityModel::linear(f64::NAN).is_err());
    }

    #[test]
    fn linear_implied_bounds() {
        let b = UtilityModel::linear(0.8).unwrap().derivative_bounds();
        assert!((b.mu - 0.8).abs() < 1e-12);
        assert!((b.rho - 4.0).abs() < 1e-12);
    }

    #[test]
    fn registered_models_are_monotone_on_grid() {
        for model in [UtilityModel::linear(0.3).unwrap(), UtilityModel::linear(0.8).unwrap(), UtilityModel::Custom(PRODUCT)] {
            for side in [Side::Left, Side::Right] {
                assert_eq!(check_monotone(&model, side, 0.0, 1.0, 50), Ok(()), "{}", model.id());
            }
        }
    }

    #[test]
    fn product_declaration_holds_on_grid() {
        // forward differences against the declared (rho, mu)
        let h = 1e-6;
        for a in 0..50 {
            for b in 0..50 {
                let (r, s) = (a as f64 / 49.0, b as f64 / 49.0);
                let dr = (product_utility(r + h, s) - product_utility(r, s)) / h;
                let ds = (product_utility(r, s + h) - product_utility(r, s)) / h;
                assert!(dr <= PRODUCT.mu + 1e-5);
                assert!(dr / ds >= PRODUCT.rho - 1e-5);
            }
        }
    }

    #[test]
    fn non_monotone_function_is_caught() {
        fn bad(r: f64, s: f64) -> f64 {
            r - (s - 0.5).abs()
        }
        let m = UtilityModel::Custom(CustomUtility { name: "bad", left: bad, right: bad, rho: 1.0, mu: 1.0 });
        assert!(check_monotone(&m, Side::Left, 0.0, 1.0, 50).is_err());
    }

    #[test]
    fn extension_below_zero_is_continuous() {
        let m = UtilityModel::linear(0.8).unwrap();
        assert!((m.extended_top_utility(Side::Left, -0.25) - (0.2 - 0.2)).abs() < 1e-12);
        let p = UtilityModel::Custom(PRODUCT);
        let at0 = p.extended_top_utility(Side::Left, 0.0);
        assert!((p.extended_top_utility(Side::Left, -1e-9) - at0).abs() < 1e-8);
    }

    #[test]
    fn builtin_lookup() {
        assert_eq!(UtilityModel::builtin("linear", 0.8).unwrap(), UtilityModel::Linear { lambda: 0.8 });
        assert_eq!(UtilityModel::builtin("product", 0.0).unwrap().id(), "product");
        assert!(matches!(UtilityModel::builtin("nope", 0.5), Err(Error::UnknownModel(_))));
    }
}
