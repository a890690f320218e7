use thiserror::Error;

/// Items of the standing assumption a claim/model pair must satisfy before
/// the Fourier–Laplace decomposition is well defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionItem {
    /// The reference variance clock ρ^S is strictly increasing.
    StrictlyIncreasingClock,
    /// The real support of the payoff measure is bounded.
    BoundedSupport,
    /// Support points and their unit shift in s lie in the moment domain.
    SupportInDomain,
    /// The cumulant density is bounded on the doubled support.
    BoundedCumulantDensity,
}

impl AssumptionItem {
    pub fn number(self) -> u8 {
        match self {
            AssumptionItem::StrictlyIncreasingClock => 1,
            AssumptionItem::BoundedSupport => 2,
            AssumptionItem::SupportInDomain => 3,
            AssumptionItem::BoundedCumulantDensity => 4,
        }
    }
}

impl std::fmt::Display for AssumptionItem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let text = match self {
            AssumptionItem::StrictlyIncreasingClock => "rho^S strictly increasing",
            AssumptionItem::BoundedSupport => "real support I0 bounded",
            AssumptionItem::SupportInDomain => "I0 and I0+(0,1) inside the moment domain",
            AssumptionItem::BoundedCumulantDensity => "dkappa/drho^S bounded on 2*I0",
        };
        write!(f, "standing assumption item {} ({text})", self.number())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("assumption violated, {item}: {detail}")]
    Assumption { item: AssumptionItem, detail: String },

    #[error("quadrature did not converge: residual {residual:.3e} above tolerance {tolerance:.3e} after {panels} panels")]
    NotConverged {
        residual: f64,
        tolerance: f64,
        panels: usize,
    },

    #[error("quadrature failed at {location}: {source}")]
    At {
        location: String,
        #[source]
        source: Box<Error>,
    },

    #[error("imaginary residue {residue:.3e} of a real claim exceeds {limit:.1e}")]
    ImaginaryResidue { residue: f64, limit: f64 },

    #[error("degenerate volatility: |sigma_S|^2 = {value:.3e}")]
    DegenerateVolatility { value: f64 },

    #[error("explicit scheme unstable: CFL number {number:.3} exceeds {limit}")]
    Cfl { number: f64, limit: f64 },

    #[error("coefficients outside the supported PDE regimes: {0}")]
    Regime(String),

    #[error("model digest mismatch: ensemble {ensemble}, decomposition {decomposition}")]
    ModelMismatch {
        ensemble: String,
        decomposition: String,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at(self, location: impl Into<String>) -> Self {
        Error::At {
            location: location.into(),
            source: Box::new(self),
        }
    }

    /// The assumption item behind this error, looking through location wrappers.
    pub fn assumption_item(&self) -> Option<AssumptionItem> {
        match self {
            Error::Assumption { item, .. } => Some(*item),
            Error::At { source, .. } => source.assumption_item(),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
