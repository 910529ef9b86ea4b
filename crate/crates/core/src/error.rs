use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The measured moment is larger than the planar force can produce at the bumper radius.
    #[error("degenerate wrench: (Mz/r)^2 exceeds Fx^2 + Fy^2 by {excess:.3e}")]
    DegenerateWrench { excess: f64 },

    #[error("contact angle {gamma:.4} rad is beyond the invertible range of the bumper Jacobian")]
    SingularConfiguration { gamma: f64 },

    #[error("position is inside planner-visible obstacle {index} (Gamma = {gamma_fn:.6})")]
    InsideObstacle { index: usize, gamma_fn: f64 },

    #[error("trace contains no contact samples")]
    NoContact,

    #[error("scenario error: {0}")]
    Scenario(String),
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: reason.to_string(),
        })
    }
}
