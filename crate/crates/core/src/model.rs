//! Economic parameters and claim-size laws.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Premium rate, claim intensity, discount rate and dividend ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub premium_rate: f64,
    pub claim_intensity: f64,
    pub discount_rate: f64,
    pub dividend_ceiling: f64,
}

/// Cdf sampled on a uniform grid starting at zero, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    step: f64,
    values: Vec<f64>,
}

impl CdfTable {
    /// Builds a table from `(x, F(x))` pairs. Abscissae must start at zero and
    /// be uniformly spaced; the cdf must start at zero, be non-decreasing and
    /// reach one (within `1e-6`) at the last abscissa.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, ModelError> {
        if pairs.len() < 2 {
            return Err(ModelError::InvalidDistribution("table needs at least two rows".into()));
        }
        if pairs[0].0.abs() > 1e-12 {
            return Err(ModelError::InvalidDistribution("table must start at x = 0".into()));
        }
        let step = pairs[1].0 - pairs[0].0;
        if !(step > 0.0) {
            return Err(ModelError::InvalidDistribution("abscissae must increase".into()));
        }
        for (i, &(x, _)) in pairs.iter().enumerate() {
            if (x - i as f64 * step).abs() > 1e-6 * step.max(1.0) {
                return Err(ModelError::InvalidDistribution("abscissae must be uniformly spaced".into()));
            }
        }
        let values: Vec<f64> = pairs.iter().map(|&(_, f)| f).collect();
        Self::from_uniform(step, values)
    }

    pub fn from_uniform(step: f64, values: Vec<f64>) -> Result<Self, ModelError> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(ModelError::InvalidDistribution("table step must be positive".into()));
        }
        if values.len() < 2 {
            return Err(ModelError::InvalidDistribution("table needs at least two rows".into()));
        }
        if values.iter().any(|f| !f.is_finite() || *f < 0.0 || *f > 1.0 + 1e-12) {
            return Err(ModelError::InvalidDistribution("cdf values must lie in [0, 1]".into()));
        }
        if values[0].abs() > 1e-12 {
            return Err(ModelError::InvalidDistribution("cdf must vanish at zero".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(ModelError::InvalidDistribution("cdf must be non-decreasing".into()));
        }
        if 1.0 - values[values.len() - 1] > 1e-6 {
            return Err(ModelError::InvalidDistribution("cdf must reach 1 at the end of the table".into()));
        }
        Ok(Self { step, values })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Right end of the tabulated support.
    pub fn support_end(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let pos = x / self.step;
        let i = libm::floor(pos) as usize;
        if i + 1 >= self.values.len() {
            return 1.0;
        }
        let t = pos - i as f64;
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    fn max_slope(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]) / self.step).fold(0.0, f64::max)
    }

    fn mgf(&self, s: f64) -> f64 {
        // The interpolated cdf has a constant density on every cell.
        let h = self.step;
        self.values
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let density = (w[1] - w[0]) / h;
                let a = i as f64 * h;
                if s == 0.0 {
                    density * h
                } else {
                    density * libm::exp(s * a) * libm::expm1(s * h) / s
                }
            })
            .sum()
    }

    fn mean(&self) -> f64 {
        // E[U] = ∫ (1 - F); exact for the piecewise-linear interpolant.
        self.values.windows(2).map(|w| self.step * (1.0 - 0.5 * (w[0] + w[1]))).sum()
    }
}

/// Claim-size law.
#[derive(Debug, Clone, PartialEq)]
pub enum ClaimDistribution {
    /// `F(x) = 1 - exp(-rate x)`.
    Exponential {
        rate: f64,
    },
    /// Gamma with shape 2 and rate 1: `F(x) = 1 - exp(-x)(1 + x)`.
    Erlang2,
    Tabulated(CdfTable),
}

impl ClaimDistribution {
    pub fn exponential(rate: f64) -> Self {
        ClaimDistribution::Exponential { rate }
    }

    /// Cumulative distribution function; zero for negative arguments.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            ClaimDistribution::Exponential { rate } => -libm::expm1(-rate * x),
            ClaimDistribution::Erlang2 => {
                let tail = libm::exp(-x) * (1.0 + x);
                (1.0 - tail).max(0.0)
            }
            ClaimDistribution::Tabulated(t) => t.eval(x),
        }
    }

    /// Tail mass `1 - F(x)`, accurate in the far tail for parametric laws.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self {
            ClaimDistribution::Exponential { rate } => libm::exp(-rate * x),
            ClaimDistribution::Erlang2 => libm::exp(-x) * (1.0 + x),
            ClaimDistribution::Tabulated(t) => 1.0 - t.eval(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ClaimDistribution::Exponential { rate } => 1.0 / rate,
            ClaimDistribution::Erlang2 => 2.0,
            ClaimDistribution::Tabulated(t) => t.mean(),
        }
    }

    /// `E[e^{sU}]`, infinite where it diverges.
    pub fn mgf(&self, s: f64) -> f64 {
        match self {
            ClaimDistribution::Exponential { rate } => {
                if s < *rate {
                    rate / (rate - s)
                } else {
                    f64::INFINITY
                }
            }
            ClaimDistribution::Erlang2 => {
                if s < 1.0 {
                    1.0 / ((1.0 - s) * (1.0 - s))
                } else {
                    f64::INFINITY
                }
            }
            ClaimDistribution::Tabulated(t) => t.mgf(s),
        }
    }

    /// Global Lipschitz constant of the cdf, i.e. the supremum of the density
    /// (maximum slope for tables).
    pub fn lipschitz_constant(&self) -> f64 {
        match self {
            ClaimDistribution::Exponential { rate } => *rate,
            ClaimDistribution::Erlang2 => libm::exp(-1.0),
            ClaimDistribution::Tabulated(t) => t.max_slope(),
        }
    }

    /// Smallest `x` with `1 - F(x) < tail`, found by doubling and bisection.
    pub fn tail_point(&self, tail: f64) -> f64 {
        if let ClaimDistribution::Tabulated(t) = self {
            // Beyond the table the cdf is 1.
            let mut hi = t.support_end();
            let mut lo = 0.0;
            if self.survival(lo) < tail {
                return 0.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if self.survival(mid) < tail {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
        let mut hi = self.mean().max(1e-3);
        while self.survival(hi) >= tail {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.survival(mid) < tail {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    fn check(&self) -> Result<(), ModelError> {
        match self {
            ClaimDistribution::Exponential { rate } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(ModelError::NegativeParameter { name: "claim_distribution.rate", value: *rate });
                }
            }
            ClaimDistribution::Erlang2 => {}
            ClaimDistribution::Tabulated(t) => {
                if !(t.mean() > 0.0) {
                    return Err(ModelError::InvalidDistribution("claim mean must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Parameters that passed [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel {
    params: ModelParams,
    dist: ClaimDistribution,
    loading_ratio: f64,
}

impl ValidatedModel {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn distribution(&self) -> &ClaimDistribution {
        &self.dist
    }

    /// `p / (β E[U])`, strictly above one.
    pub fn loading_ratio(&self) -> f64 {
        self.loading_ratio
    }

    pub fn premium(&self) -> f64 {
        self.params.premium_rate
    }

    pub fn intensity(&self) -> f64 {
        self.params.claim_intensity
    }

    pub fn discount(&self) -> f64 {
        self.params.discount_rate
    }

    pub fn ceiling(&self) -> f64 {
        self.params.dividend_ceiling
    }

    /// Decay rate `θ > 0` of `c/q - v(x)` for the value `v` of paying `c`
    /// forever, i.e. the root of `(c - p) θ - (q + β) + β E[e^{θU}] = 0`.
    /// The left side is convex and equals `-q` at zero, so the root is unique
    /// on the half line where the transform is finite.
    pub fn far_field_decay(&self, c: f64) -> f64 {
        let (p, q, beta) = (self.premium(), self.discount(), self.intensity());
        let g = |t: f64| {
            let m = self.dist.mgf(t);
            if m.is_finite() {
                (c - p) * t - (q + beta) + beta * m
            } else {
                f64::INFINITY
            }
        };
        let mut hi = 1e-6;
        while g(hi) < 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Discounted value of paying the ceiling forever, `c̄ / q`.
    pub fn value_bound(&self) -> f64 {
        self.params.dividend_ceiling / self.params.discount_rate
    }
}

/// Checks positivity of all parameters and the safety loading `p > β E[U]`.
pub fn validate_model(params: ModelParams, dist: ClaimDistribution) -> Result<ValidatedModel, ModelError> {
    let fields = [
        ("premium_rate", params.premium_rate),
        ("claim_intensity", params.claim_intensity),
        ("discount_rate", params.discount_rate),
        ("dividend_ceiling", params.dividend_ceiling),
    ];
    for (name, value) in fields {
        if !(value > 0.0) || !value.is_finite() {
            return Err(ModelError::NegativeParameter { name, value });
        }
    }
    dist.check()?;
    let expected_claims = params.claim_intensity * dist.mean();
    if params.premium_rate <= expected_claims {
        return Err(ModelError::SafetyLoadingViolated { premium: params.premium_rate, expected_claims });
    }
    Ok(ValidatedModel { params, loading_ratio: params.premium_rate / expected_claims, dist })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    NegativeParameter { name: &'static str, value: f64 },
    SafetyLoadingViolated { premium: f64, expected_claims: f64 },
    InvalidDistribution(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::NegativeParameter { name, value } => {
                write!(f, "parameter `{name}` must be positive and finite, got {value}")
            }
            ModelError::SafetyLoadingViolated { premium, expected_claims } => write!(
                f,
                "safety loading violated: premium {premium} <= expected claims per unit time {expected_claims}"
            ),
            ModelError::InvalidDistribution(msg) => write!(f, "invalid claim distribution: {msg}"),
        }
    }
}

impl core::error::Error for ModelError {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ex1() -> ModelParams {
        ModelParams { premium_rate: 2.3, claim_intensity: 4.0, discount_rate: 0.1, dividend_ceiling: 1.72 }
    }

    #[test]
    fn example_one_is_valid() {
        let m = validate_model(ex1(), ClaimDistribution::exponential(2.0)).unwrap();
        assert!((m.loading_ratio() - 1.15).abs() < 1e-12);
    }

    #[test]
    fn thin_loading_is_rejected() {
        let p = ModelParams { premium_rate: 1.9, dividend_ceiling: 1.0, ..ex1() };
        let err = validate_model(p, ClaimDistribution::exponential(2.0)).unwrap_err();
        assert!(matches!(err, ModelError::SafetyLoadingViolated { .. }));
    }

    #[test]
    fn example_four_is_valid() {
        let p = ModelParams { premium_rate: 21.4, claim_intensity: 10.0, discount_rate: 0.1, dividend_ceiling: 16.5 };
        let m = validate_model(p, ClaimDistribution::Erlang2).unwrap();
        assert!((m.loading_ratio() - 1.07).abs() < 1e-12);
    }

    #[test]
    fn far_field_decay_matches_the_characteristic_roots() {
        let m = validate_model(ex1(), ClaimDistribution::exponential(2.0)).unwrap();
        assert!((m.far_field_decay(1.72) - 0.0671380).abs() < 1e-6);
        assert!((m.far_field_decay(4.6) - 0.0231299).abs() < 1e-6);
    }

    #[test]
    fn tabulated_transform_agrees_with_the_exponential_one() {
        let step = 0.001;
        let values = (0..40_000).map(|i| 1.0 - libm::exp(-2.0 * i as f64 * step)).collect();
        let table = ClaimDistribution::Tabulated(CdfTable::from_uniform(step, values).unwrap());
        assert!((table.mgf(0.5) - 4.0 / 3.0).abs() < 1e-6, "{}", table.mgf(0.5));
    }

    #[test]
    fn negative_discount_names_the_field() {
        let p = ModelParams { discount_rate: -0.1, ..ex1() };
        match validate_model(p, ClaimDistribution::exponential(2.0)) {
            Err(ModelError::NegativeParameter { name, .. }) => assert_eq!(name, "discount_rate"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cdf_values() {
        let e = ClaimDistribution::exponential(2.0);
        assert_eq!(e.cdf(0.0), 0.0);
        assert_eq!(e.cdf(-1.0), 0.0);
        assert!((e.cdf(0.5) - 0.632_120_558_828_557_7).abs() < 1e-14);
        assert!((ClaimDistribution::Erlang2.cdf(1.0) - (1.0 - 2.0 * libm::exp(-1.0))).abs() < 1e-14);
    }

    #[test]
    fn means() {
        assert_eq!(ClaimDistribution::exponential(2.0).mean(), 0.5);
        assert_eq!(ClaimDistribution::Erlang2.mean(), 2.0);
    }

    #[test]
    fn tabulated_exponential_mean() {
        let step = 1e-3;
        let values: Vec<f64> = (0..=20_000).map(|i| -libm::expm1(-2.0 * i as f64 * step)).collect();
        let t = ClaimDistribution::Tabulated(CdfTable::from_uniform(step, values).unwrap());
        assert!((t.mean() - 0.5).abs() < 1e-4);
        assert!((t.lipschitz_constant() - 2.0).abs() < 1e-2);
        assert!((t.cdf(0.5) - 0.632_120_558_828_557_7).abs() < 1e-6);
    }

    #[test]
    fn bad_tables_are_rejected() {
        assert!(CdfTable::from_uniform(0.1, vec![0.0, 0.5, 0.4, 1.0]).is_err());
        assert!(CdfTable::from_uniform(0.1, vec![0.1, 0.5, 1.0]).is_err());
        assert!(CdfTable::from_uniform(0.1, vec![0.0, 0.5, 0.9]).is_err());
        assert!(CdfTable::from_pairs(&[(0.0, 0.0), (0.1, 0.5), (0.3, 1.0)]).is_err());
    }

    #[test]
    fn tail_points() {
        let x = ClaimDistribution::exponential(2.0).tail_point(1e-8);
        assert!((x - 1e8f64.ln() / 2.0).abs() < 1e-9);
        let y = ClaimDistribution::Erlang2.tail_point(1e-8);
        assert!(ClaimDistribution::Erlang2.survival(y) < 1e-8);
        assert!(ClaimDistribution::Erlang2.survival(y - 1e-6) >= 1e-8);
    }
}
