//! Plane-stress elasticity and the exponential mixed-mode cohesive law.
//!
//! The cohesive law is radial: the traction vector is parallel to the opening
//! vector `zeta = (zeta_n, zeta_t)` and its magnitude follows a linear rise to
//! `f_t` at `zeta_0`, then exponential softening governed by the fracture
//! energy. Unloading and reloading below the historical maximum opening follow
//! the secant to the origin.

use nalgebra::{Matrix2, Matrix3, Vector2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MaterialError {
    #[error("Young's modulus must be positive, got {0}")]
    YoungsModulus(f64),
    #[error("Poisson ratio must lie in [0, 0.5), got {0}")]
    PoissonRatio(f64),
    #[error("tensile strength must be positive, got {0}")]
    TensileStrength(f64),
    #[error("fracture energy must be positive, got {0}")]
    FractureEnergy(f64),
}

/// Isotropic linear elasticity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elasticity {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

impl Elasticity {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self, MaterialError> {
        if !(youngs_modulus > 0.0 && youngs_modulus.is_finite()) {
            return Err(MaterialError::YoungsModulus(youngs_modulus));
        }
        if !(0.0..0.5).contains(&poisson_ratio) {
            return Err(MaterialError::PoissonRatio(poisson_ratio));
        }
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
        })
    }
}

/// Plane-stress constitutive matrix in Voigt order `(eps_x, eps_y, gamma_xy)`.
pub fn elasticity_matrix(el: &Elasticity) -> Matrix3<f64> {
    let e = el.youngs_modulus;
    let nu = el.poisson_ratio;
    let s = e / (1.0 - nu * nu);
    Matrix3::new(
        s,
        s * nu,
        0.0,
        s * nu,
        s,
        0.0,
        0.0,
        0.0,
        s * (1.0 - nu) / 2.0,
    )
}

/// Exponential traction-separation law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohesiveLaw {
    tensile_strength: f64,
    fracture_energy: f64,
}

impl CohesiveLaw {
    /// Ratio of the threshold energy to the full fracture energy.
    pub const THRESHOLD_RATIO: f64 = 0.01;

    pub fn new(tensile_strength: f64, fracture_energy: f64) -> Result<Self, MaterialError> {
        if !(tensile_strength > 0.0 && tensile_strength.is_finite()) {
            return Err(MaterialError::TensileStrength(tensile_strength));
        }
        if !(fracture_energy > 0.0 && fracture_energy.is_finite()) {
            return Err(MaterialError::FractureEnergy(fracture_energy));
        }
        Ok(Self {
            tensile_strength,
            fracture_energy,
        })
    }

    /// `f_t`
    pub fn tensile_strength(&self) -> f64 {
        self.tensile_strength
    }

    /// `G_f`
    pub fn fracture_energy(&self) -> f64 {
        self.fracture_energy
    }

    /// `G_f0 = 0.01 G_f`, the energy below the linear rise.
    pub fn threshold_energy(&self) -> f64 {
        Self::THRESHOLD_RATIO * self.fracture_energy
    }

    /// `zeta_0 = 2 G_f0 / f_t`
    pub fn threshold_opening(&self) -> f64 {
        2.0 * self.threshold_energy() / self.tensile_strength
    }

    /// Energy released on the softening branch, `G_f - G_f0`.
    pub fn softening_energy(&self) -> f64 {
        self.fracture_energy - self.threshold_energy()
    }

    /// Slope of the linear rise, `f_t / zeta_0`.
    pub fn initial_stiffness(&self) -> f64 {
        self.tensile_strength / self.threshold_opening()
    }

    /// Softening envelope for `zeta_eq > zeta_0`.
    pub fn envelope(&self, zeta_eq: f64) -> f64 {
        let ft = self.tensile_strength;
        ft * (-ft * (zeta_eq - self.threshold_opening()) / self.softening_energy()).exp()
    }

    /// Slope of the softening branch right after the peak, `-f_t^2 / (G_f - G_f0)`.
    pub fn initial_softening_slope(&self) -> f64 {
        -self.tensile_strength.powi(2) / self.softening_energy()
    }
}

/// Maximum equivalent opening reached at a committed step and its traction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackHistory {
    pub zeta_max: f64,
    pub traction_max: f64,
}

impl CrackHistory {
    /// History after committing a converged opening. Openings at or below
    /// `zeta_0` never create history.
    pub fn committed(
        law: &CohesiveLaw,
        previous: Option<CrackHistory>,
        zeta: Vector2<f64>,
    ) -> Option<CrackHistory> {
        let zeta_eq = zeta.norm();
        match previous {
            Some(h) if h.zeta_max >= zeta_eq => Some(h),
            _ if zeta_eq > law.threshold_opening() => Some(CrackHistory {
                zeta_max: zeta_eq,
                traction_max: law.envelope(zeta_eq),
            }),
            other => other,
        }
    }
}

/// Branch of the traction-separation law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Linear rise, `zeta_eq <= zeta_0`, no history.
    Rise,
    /// Exponential softening envelope.
    Softening,
    /// Secant unloading/reloading below the historical maximum.
    Unloading,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TractionState {
    pub zeta: Vector2<f64>,
    pub traction: Vector2<f64>,
    pub regime: Regime,
}

impl TractionState {
    pub fn zeta_eq(&self) -> f64 {
        self.zeta.norm()
    }

    pub fn traction_eq(&self) -> f64 {
        self.traction.norm()
    }
}

fn regime(zeta_eq: f64, law: &CohesiveLaw, history: Option<&CrackHistory>) -> Regime {
    match history {
        Some(h) if zeta_eq < h.zeta_max => Regime::Unloading,
        Some(_) => Regime::Softening,
        None if zeta_eq <= law.threshold_opening() => Regime::Rise,
        None => Regime::Softening,
    }
}

/// Evaluates the radial traction for the opening `zeta`.
pub fn traction(
    zeta: Vector2<f64>,
    law: &CohesiveLaw,
    history: Option<&CrackHistory>,
) -> TractionState {
    let zeta_eq = zeta.norm();
    let regime = regime(zeta_eq, law, history);
    let secant = match regime {
        Regime::Rise => law.initial_stiffness(),
        Regime::Unloading => {
            let h = history.expect("unloading requires history");
            h.traction_max / h.zeta_max
        }
        Regime::Softening => law.envelope(zeta_eq) / zeta_eq,
    };
    TractionState {
        zeta,
        traction: zeta * secant,
        regime,
    }
}

/// Consistent tangent `D = dT/dzeta`.
pub fn tangent(zeta: Vector2<f64>, law: &CohesiveLaw, history: Option<&CrackHistory>) -> Matrix2<f64> {
    let zeta_eq = zeta.norm();
    match regime(zeta_eq, law, history) {
        Regime::Rise => Matrix2::identity() * law.initial_stiffness(),
        Regime::Unloading => {
            let h = history.expect("unloading requires history");
            Matrix2::identity() * (h.traction_max / h.zeta_max)
        }
        Regime::Softening => {
            let t_eq = law.envelope(zeta_eq);
            let rate = law.tensile_strength() / law.softening_energy();
            let (zn, zt) = (zeta[0], zeta[1]);
            let cross = zn * zt / zeta_eq + rate * zn * zt;
            let scale = -t_eq / (zeta_eq * zeta_eq);
            Matrix2::new(
                zn * zn / zeta_eq + rate * zn * zn - zeta_eq,
                cross,
                cross,
                zt * zt / zeta_eq + rate * zt * zt - zeta_eq,
            ) * scale
        }
    }
}

/// Energy per unit crack area dissipated when loading along the envelope to
/// `zeta_max`, net of the energy recoverable on the secant.
pub fn envelope_dissipation(law: &CohesiveLaw, zeta_max: f64) -> f64 {
    let z0 = law.threshold_opening();
    if zeta_max <= z0 {
        return 0.0;
    }
    let t_max = law.envelope(zeta_max);
    let decay = t_max / law.tensile_strength();
    law.threshold_energy() + law.softening_energy() * (1.0 - decay) - 0.5 * t_max * zeta_max
}
