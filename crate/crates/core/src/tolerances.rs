//! Numerical tolerances shared by state validation and the QFI engine.

/// Validation and truncation thresholds.
///
/// Every check in the crate pulls its threshold from here instead of using
/// ad-hoc literals, so a single record documents what "valid" means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Maximum entrywise deviation |A - A^dagger| accepted as Hermitian.
    pub hermiticity: f64,
    /// Eigenvalues below `-psd_floor` fail the positivity check.
    pub psd_floor: f64,
    /// Accepted deviation of the total trace from its nominal value.
    pub trace: f64,
    /// Accepted deviation of a pure-state norm from 1.
    pub norm: f64,
    /// Eigenvalue-pair floor of the SLD sum: pairs with
    /// `lambda_i + lambda_j` below this are skipped and their probability
    /// mass is reported as `truncation_mass`.
    pub sld_pair_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-12,
            psd_floor: 1e-10,
            trace: 1e-10,
            norm: 1e-12,
            sld_pair_floor: 1e-12,
        }
    }
}
