//! Frequency-domain model of a signal-recycled Michelson interferometer at a
//! dark fringe, reduced to an equivalent two-mode Mach-Zehnder.
//!
//! Mirror motion at signal frequency `f` scatters carrier light into
//! sidebands; the signal-recycling mirror amplifies the sideband amplitudes
//! by `g(f)`. The three coupled modes (carrier, upper and lower sideband)
//! reduce to a single Mach-Zehnder phase `phi = 2 sqrt(2) g epsilon` between
//! the carrier and the symmetric sideband combination, with
//! `epsilon = h l omega_0 / (2 c)` for strain `h`. From there, the
//! coherent-plus-squeezed-vacuum (CSV) readout noise and the loss-limited
//! quantum bound are expressed as strain-normalized spectral densities.

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64;
use std::f64::consts::{PI, SQRT_2};

use crate::constants::{REDUCED_PLANCK, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// Largest `|g epsilon|` treated as safely within the first-order (single
/// sideband pair) regime.
pub const SMALL_SIGNAL_LIMIT: f64 = 1e-3;

/// Physical parameters of the modeled interferometer.
///
/// `power_p` is the power at the beam splitter after any input rescaling;
/// `eta` is the overall input-output power transfer (equal for both arms);
/// `detuning_z` must stay 0: the signal-recycling cavity is tuned to the
/// carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerConfig {
    /// Carrier wavelength, m.
    pub lambda0: f64,
    /// Arm length, m.
    pub arm_length_l: f64,
    /// Light power at the beam splitter, W.
    pub power_p: f64,
    /// Power transmissivity of the signal-recycling mirror.
    pub mirror_transmissivity_t: f64,
    /// Input-output power transfer coefficient; `1 - eta` is the loss.
    pub eta: f64,
    /// In-coupling efficiency used when rescaling a measured power.
    pub eta_in: f64,
    /// Squeezing parameter of the vacuum squeezed input.
    pub squeezing_r: f64,
    /// Signal-recycling mirror detuning, m. Fixed to 0.
    pub detuning_z: f64,
}

impl InterferometerConfig {
    /// The GEO 600 reference parameter set: 1064 nm carrier, 1200 m arms,
    /// 3.7 kW at the beam splitter, T = 1.9%, eta = 0.62, 10 dB squeezing.
    pub fn geo600() -> Self {
        Self {
            lambda0: 1064e-9,
            arm_length_l: 1200.0,
            power_p: 3.7e3,
            mirror_transmissivity_t: 0.019,
            eta: 0.62,
            eta_in: 0.73,
            squeezing_r: squeezing_db_to_r(10.0),
            detuning_z: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda0", self.lambda0),
            ("arm_length_l", self.arm_length_l),
            ("power_p", self.power_p),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    range: "(0, inf)",
                });
            }
        }
        if !(self.mirror_transmissivity_t > 0.0 && self.mirror_transmissivity_t <= 1.0) {
            return Err(Error::OutOfRange {
                name: "mirror_transmissivity_t",
                value: self.mirror_transmissivity_t,
                range: "(0, 1]",
            });
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::OutOfRange {
                name: "eta",
                value: self.eta,
                range: "(0, 1)",
            });
        }
        if !(self.eta_in > 0.0 && self.eta_in <= 1.0) {
            return Err(Error::OutOfRange {
                name: "eta_in",
                value: self.eta_in,
                range: "(0, 1]",
            });
        }
        if !(self.squeezing_r >= 0.0) {
            return Err(Error::OutOfRange {
                name: "squeezing_r",
                value: self.squeezing_r,
                range: "[0, inf)",
            });
        }
        if self.detuning_z != 0.0 {
            return Err(Error::OutOfRange {
                name: "detuning_z",
                value: self.detuning_z,
                range: "{0} (tuned recycling only)",
            });
        }
        Ok(())
    }

    /// Carrier angular frequency `2 pi c / lambda0`, rad/s.
    pub fn omega0(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.lambda0
    }
}

/// One point of a strain-normalized noise spectral density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainPoint {
    pub frequency_hz: f64,
    /// Strain noise spectral density, 1/sqrt(Hz).
    pub delta_h: f64,
}

/// Sideband amplification factor of the signal-recycling cavity,
/// `g = sqrt(T / (2 - T - 2 sqrt(1-T) cos(2 Omega l / c)))`.
///
/// Evaluated through the cancellation-free form
/// `2 - T - 2u cos x = (1 - u)^2 + 2u(1 - cos x)` with `u = sqrt(1-T)`,
/// which is exact and stays accurate for small `x`.
pub fn amplification_factor(frequency_hz: f64, config: &InterferometerConfig) -> f64 {
    let t = config.mirror_transmissivity_t;
    let x = 2.0 * (2.0 * PI * frequency_hz) * config.arm_length_l / SPEED_OF_LIGHT;
    let u = (1.0 - t).sqrt();
    let denom = (1.0 - u).powi(2) + 2.0 * u * (1.0 - x.cos());
    assert!(denom > 0.0, "amplification denominator must be positive for T in (0, 1]");
    (t / denom).sqrt()
}

/// First-order transfer matrix between the carrier and the two sideband
/// modes, in the mode order `(a0, b+, b-)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix3 {
    entries: Matrix3<Complex64>,
}

impl TransferMatrix3 {
    pub fn entries(&self) -> &Matrix3<Complex64> {
        &self.entries
    }

    /// The off-diagonal coupling `g epsilon` (entry (0, 1)).
    pub fn g_epsilon(&self) -> f64 {
        self.entries[(0, 1)].re
    }

    /// True when `|g epsilon|` is small enough for the first-order model.
    pub fn small_signal(&self) -> bool {
        self.g_epsilon().abs() <= SMALL_SIGNAL_LIMIT
    }

    /// Largest entrywise deviation of `U U^dagger` from the identity;
    /// O((g epsilon)^2) by construction.
    ///
    /// The diagonal is accumulated as `sum_{k != i} |U[i,k]|^2 +
    /// (|U[i,i]|^2 - 1)` so the tiny defect is not swallowed by rounding
    /// against the leading 1.
    pub fn unitarity_defect(&self) -> f64 {
        let u = &self.entries;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dev = if i == j {
                    let mut acc = u[(i, i)].norm_sqr() - 1.0;
                    for k in 0..3 {
                        if k != i {
                            acc += u[(i, k)].norm_sqr();
                        }
                    }
                    acc.abs()
                } else {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..3 {
                        acc += u[(i, k)] * u[(j, k)].conj();
                    }
                    acc.norm()
                };
                worst = worst.max(dev);
            }
        }
        worst
    }
}

/// Builds the first-order three-mode transfer matrix
/// rows `(1, ge, ge)`, `(-ge, 1, 0)`, `(-ge, 0, 1)` with `ge = g epsilon`.
pub fn three_mode_transfer(epsilon: f64, g: f64) -> TransferMatrix3 {
    let ge = g * epsilon;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let c = Complex64::new(ge, 0.0);
    let entries = Matrix3::new(one, c, c, -c, one, zero, -c, zero, one);
    TransferMatrix3 { entries }
}

/// The three-mode transfer matrix reduced to the equivalent Mach-Zehnder on
/// `(a0, b_s)` with `b_s = (b- + b+)/sqrt(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MzReduction {
    /// `[[1, sqrt(2) g eps], [-sqrt(2) g eps, 1]]`.
    pub matrix: Matrix2<Complex64>,
    /// True when the antisymmetric sideband mode decouples to the identity
    /// within 1e-14 under the numeric basis change.
    pub decoupled: bool,
}

impl MzReduction {
    /// The equivalent Mach-Zehnder phase `2 sqrt(2) g epsilon` encoded by the
    /// reduced matrix.
    pub fn phase(&self) -> f64 {
        2.0 * self.matrix[(0, 1)].re
    }
}

/// Changes basis to `(a0, b_s, b_a)` and extracts the 2x2 Mach-Zehnder block.
/// The input must have the exact first-order structure produced by
/// [`three_mode_transfer`]; anything else is rejected.
pub fn reduce_to_mz(u: &TransferMatrix3) -> Result<MzReduction> {
    let m = &u.entries;
    let ge = m[(0, 1)];
    let tol = 1e-12 * (1.0 + ge.norm());
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let expected = [
        [one, ge, ge],
        [-ge, one, zero],
        [-ge, zero, one],
    ];
    for (i, row) in expected.iter().enumerate() {
        for (j, want) in row.iter().enumerate() {
            if (m[(i, j)] - want).norm() > tol || m[(i, j)].im != 0.0 {
                return Err(Error::StructureMismatch(format!(
                    "entry ({i}, {j}) = {} does not fit the first-order form",
                    m[(i, j)]
                )));
            }
        }
    }

    // numeric basis change V U V^T with rows (a0, b_s, b_a)
    let r = 1.0 / SQRT_2;
    let v = Matrix3::new(
        one,
        zero,
        zero,
        zero,
        Complex64::new(r, 0.0),
        Complex64::new(r, 0.0),
        zero,
        Complex64::new(-r, 0.0),
        Complex64::new(r, 0.0),
    );
    let rotated = v * m * v.transpose();
    let mut decoupled = true;
    for j in 0..3 {
        let want_row = if j == 2 { one } else { zero };
        if (rotated[(2, j)] - want_row).norm() >= 1e-14 {
            decoupled = false;
        }
        let want_col = if j == 2 { one } else { zero };
        if (rotated[(j, 2)] - want_col).norm() >= 1e-14 {
            decoupled = false;
        }
    }

    let s = Complex64::new(SQRT_2 * ge.re, 0.0);
    let matrix = Matrix2::new(one, s, -s, one);
    debug_assert!((rotated[(0, 1)] - s).norm() <= 1e-15 * (1.0 + s.norm()));
    Ok(MzReduction { matrix, decoupled })
}

/// Equivalent Mach-Zehnder phase produced by a strain `h` at the given signal
/// frequency: `phi = sqrt(2) g h l omega_0 / c`.
pub fn phase_from_strain(h: f64, frequency_hz: f64, config: &InterferometerConfig) -> f64 {
    let g = amplification_factor(frequency_hz, config);
    SQRT_2 * g * h * config.arm_length_l * config.omega0() / SPEED_OF_LIGHT
}

/// Inverse of [`phase_from_strain`].
pub fn strain_from_phase(phi: f64, frequency_hz: f64, config: &InterferometerConfig) -> f64 {
    let g = amplification_factor(frequency_hz, config);
    phi * SPEED_OF_LIGHT / (SQRT_2 * g * config.arm_length_l * config.omega0())
}

/// Photons per second delivered by a light source of the given power:
/// `P / (hbar omega_0)`.
pub fn photon_flux(power_w: f64, lambda0: f64) -> f64 {
    let omega0 = 2.0 * PI * SPEED_OF_LIGHT / lambda0;
    power_w / (REDUCED_PLANCK * omega0)
}

/// Rescales a measured beam-splitter power to the loss-free circulating
/// power, `P = P_measured / eta_in`.
pub fn rescale_power(measured_power_w: f64, eta_in: f64) -> Result<f64> {
    if !(eta_in > 0.0 && eta_in <= 1.0) {
        return Err(Error::OutOfRange {
            name: "eta_in",
            value: eta_in,
            range: "(0, 1]",
        });
    }
    Ok(measured_power_w / eta_in)
}

/// Phase uncertainty of the CSV readout (output-power measurement):
/// `sqrt((1 - eta + eta e^{-2r}) / (eta |alpha|^2))`.
///
/// The closed form assumes the coherent beam dominates the squeezed one; use
/// [`csv_validity_ok`] to check that regime.
pub fn csv_phase_uncertainty(alpha_sq: f64, r: f64, eta: f64) -> Result<f64> {
    if !(alpha_sq > 0.0) {
        return Err(Error::OutOfRange {
            name: "alpha_sq",
            value: alpha_sq,
            range: "(0, inf)",
        });
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            range: "(0, 1]",
        });
    }
    if !(r >= 0.0) {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            range: "[0, inf)",
        });
    }
    Ok(((1.0 - eta + eta * (-2.0 * r).exp()) / (eta * alpha_sq)).sqrt())
}

/// True when the coherent amplitude dominates the squeezed photons strongly
/// enough (`|alpha|^2 > 10 sinh^2 r`) for the CSV closed form.
pub fn csv_validity_ok(alpha_sq: f64, r: f64) -> bool {
    alpha_sq > 10.0 * r.sinh().powi(2)
}

/// CSV strain-normalized noise spectral density, Eq.-(5)-style:
/// `delta_h = (1/(l g)) sqrt(c hbar lambda0 / (4 pi P))
///            sqrt((1 - eta + eta e^{-2r}) / eta)`.
pub fn csv_strain_density(frequency_hz: f64, config: &InterferometerConfig) -> StrainPoint {
    let g = amplification_factor(frequency_hz, config);
    let prefactor = (SPEED_OF_LIGHT * REDUCED_PLANCK * config.lambda0
        / (4.0 * PI * config.power_p))
        .sqrt()
        / (config.arm_length_l * g);
    let noise =
        ((1.0 - config.eta + config.eta * (-2.0 * config.squeezing_r).exp()) / config.eta).sqrt();
    StrainPoint {
        frequency_hz,
        delta_h: prefactor * noise,
    }
}

/// Loss-limited quantum bound on the strain spectral density, the `r -> inf`
/// limit of [`csv_strain_density`]:
/// `delta_h = (1/(l g)) sqrt(c hbar lambda0 / (4 pi P)) sqrt((1-eta)/eta)`.
pub fn fundamental_strain_density(
    frequency_hz: f64,
    config: &InterferometerConfig,
) -> Result<StrainPoint> {
    if !(config.eta > 0.0 && config.eta < 1.0) {
        return Err(Error::OutOfRange {
            name: "eta",
            value: config.eta,
            range: "(0, 1)",
        });
    }
    let g = amplification_factor(frequency_hz, config);
    let prefactor = (SPEED_OF_LIGHT * REDUCED_PLANCK * config.lambda0
        / (4.0 * PI * config.power_p))
        .sqrt()
        / (config.arm_length_l * g);
    let noise = ((1.0 - config.eta) / config.eta).sqrt();
    Ok(StrainPoint {
        frequency_hz,
        delta_h: prefactor * noise,
    })
}

/// Squeezing parameter for a dB value: `e^{-2r} = 10^{-db/10}`.
pub fn squeezing_db_to_r(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

/// Inverse of [`squeezing_db_to_r`].
pub fn squeezing_r_to_db(r: f64) -> f64 {
    20.0 * r / std::f64::consts::LN_10
}
