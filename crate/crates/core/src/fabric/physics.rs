use serde::{Deserialize, Serialize};

/// Which Bell states a successful optical BSM can herald.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeraldBells {
    /// Ψ+ and Ψ- only (linear optics).
    #[default]
    PsiOnly,
    All,
}

/// Physical-layer parameters. Every field has a documented default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub attenuation_db_per_km: f64,
    pub speed_m_per_s: f64,
    /// Photon preparation/emission time per attempt.
    pub t_prep_ns: u64,
    pub optical_bsm_efficiency: f64,
    pub detector_efficiency: f64,
    pub herald_bells: HeraldBells,
    pub swap_success_prob: f64,
    pub swap_duration_ns: u64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            attenuation_db_per_km: 0.2,
            speed_m_per_s: 2.0e8,
            t_prep_ns: DEFAULT_T_PREP_NS,
            optical_bsm_efficiency: 0.5,
            detector_efficiency: 1.0,
            herald_bells: HeraldBells::PsiOnly,
            swap_success_prob: 1.0,
            swap_duration_ns: 10_000,
        }
    }
}

/// Calibrated so an uncontended 50-pair request over two 5 km spokes takes
/// about 15 ms.
pub const DEFAULT_T_PREP_NS: u64 = 9_000;

impl PhysicsConfig {
    pub fn delay_ns(&self, km: f64) -> u64 {
        (km * 1000.0 / self.speed_m_per_s * 1e9).round() as u64
    }

    /// Probability a photon survives `km` of fibre and is detected.
    pub fn transmissivity(&self, km: f64) -> f64 {
        10f64.powf(-self.attenuation_db_per_km * km / 10.0) * self.detector_efficiency
    }

    pub fn p_attempt(&self, km_a: f64, km_b: f64) -> f64 {
        (self.optical_bsm_efficiency * self.transmissivity(km_a) * self.transmissivity(km_b))
            .clamp(0.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} must be in [0, 1], got {v}"))
            }
        };
        prob("optical_bsm_efficiency", self.optical_bsm_efficiency)?;
        prob("detector_efficiency", self.detector_efficiency)?;
        prob("swap_success_prob", self.swap_success_prob)?;
        if !self.speed_m_per_s.is_finite() || self.speed_m_per_s <= 0.0 {
            return Err("speed_m_per_s must be positive".into());
        }
        if !self.attenuation_db_per_km.is_finite() || self.attenuation_db_per_km < 0.0 {
            return Err("attenuation_db_per_km must be nonnegative".into());
        }
        Ok(())
    }
}
