use crate::error::CoreError;

/// Numerical thresholds shared by every decision the crate takes.
///
/// All comparisons in the crate are relative where a natural scale exists:
/// `zero` is measured against the scale of the matrix or basis under
/// inspection, `rank` is the relative singular-value cutoff for subspace
/// rank decisions, `member` bounds subspace-membership residuals, `verify`
/// bounds the final algebra-equality residual of a certificate, and
/// `unitary` bounds `‖U*U − I‖_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceConfig {
    pub zero: f64,
    pub member: f64,
    pub rank: f64,
    pub verify: f64,
    pub unitary: f64,
}

impl ToleranceConfig {
    /// Derives the whole bundle from a single master tolerance.
    ///
    /// `verify` and `member` equal the master value, `zero` and `rank` are a
    /// decade tighter, `unitary` two decades tighter.
    pub fn from_master(master: f64) -> Result<Self, CoreError> {
        if !master.is_finite() || master <= 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "master tolerance must be a positive finite number, got {master}"
            )));
        }
        Ok(Self {
            zero: master / 10.0,
            member: master,
            rank: master / 10.0,
            verify: master,
            unitary: master / 100.0,
        })
    }

    /// Checks positivity of every threshold and that the support threshold
    /// stays above the floating-point noise floor for dimension `n`.
    pub fn validate(&self, n: usize) -> Result<(), CoreError> {
        for (name, value) in [
            ("zero", self.zero),
            ("member", self.member),
            ("rank", self.rank),
            ("verify", self.verify),
            ("unitary", self.unitary),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(CoreError::InvalidArgument(format!(
                    "tolerance `{name}` must be positive and finite, got {value}"
                )));
            }
        }
        let floor = f64::EPSILON * n as f64;
        if self.zero < floor {
            return Err(CoreError::InvalidArgument(format!(
                "tolerance `zero` = {:.3e} is below the noise floor {:.3e} for dimension {n}",
                self.zero, floor
            )));
        }
        Ok(())
    }
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self::from_master(1e-8).expect("default master tolerance is valid")
    }
}
