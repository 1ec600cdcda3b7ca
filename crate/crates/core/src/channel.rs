//! Power bookkeeping and the additive channel `y = sqrt(Pv) v + j e^{i phi} + n`.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::complex_gaussian;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub jnr_db: f64,
    /// Complex noise variance per sample.
    pub sigma2: f64,
    /// Coherent jammers arrive with zero phase offset.
    pub coherent: bool,
}

impl ChannelConfig {
    pub fn new(snr_db: f64, jnr_db: f64) -> Self {
        ChannelConfig {
            snr_db,
            jnr_db,
            sigma2: 1.0,
            coherent: false,
        }
    }

    pub fn coherent(mut self, coherent: bool) -> Self {
        self.coherent = coherent;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return invalid(format!("noise variance must be positive, got {}", self.sigma2));
        }
        if !self.snr_db.is_finite() || self.jnr_db.is_nan() {
            return invalid("SNR must be finite and JNR a number");
        }
        Ok(())
    }

    pub fn p_v(&self) -> f64 {
        db_to_linear(self.snr_db) * self.sigma2
    }

    /// Average jammer power; `-inf` dB switches the jammer off.
    pub fn p_j(&self) -> f64 {
        db_to_linear(self.jnr_db) * self.sigma2
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn powers_from_db(cfg: &ChannelConfig) -> (f64, f64) {
    (cfg.p_v(), cfg.p_j())
}

/// Combine a unit-power victim waveform with an already scaled jammer
/// waveform and complex AWGN. A non-coherent jammer gets one uniform phase
/// per call.
pub fn apply_channel<R: Rng + ?Sized>(
    victim: &[C64],
    jammer: &[C64],
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<Vec<C64>> {
    if victim.len() != jammer.len() {
        return invalid(format!(
            "victim has {} samples, jammer {}",
            victim.len(),
            jammer.len()
        ));
    }
    cfg.validate()?;
    let phase = if cfg.coherent {
        C64::new(1.0, 0.0)
    } else {
        C64::from_polar(1.0, rng.random::<f64>() * TAU)
    };
    let amp = cfg.p_v().sqrt();
    Ok(victim
        .iter()
        .zip(jammer)
        .map(|(&v, &j)| amp * v + j * phase + complex_gaussian(rng, cfg.sigma2))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    #[test]
    fn db_conversions() {
        let c = ChannelConfig::new(10.0, 0.0);
        assert!((c.p_v() - 10.0).abs() < 1e-12);
        assert!((c.p_j() - 1.0).abs() < 1e-12);
        let (pv, pj) = powers_from_db(&ChannelConfig::new(15.0, 10.0));
        assert!((pv - 31.622776601683793).abs() < 1e-9);
        assert!((pj - 10.0).abs() < 1e-9);
        assert_eq!(ChannelConfig::new(0.0, f64::NEG_INFINITY).p_j(), 0.0);
        assert!((linear_to_db(db_to_linear(7.2)) - 7.2).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_and_bad_sigma() {
        let mut rng = SimRng::seed_from_u64(0);
        let c = ChannelConfig::new(0.0, 0.0);
        assert!(apply_channel(&[C64::default(); 3], &[C64::default(); 2], &c, &mut rng).is_err());
        let bad = ChannelConfig { sigma2: 0.0, ..c };
        assert!(apply_channel(&[C64::default()], &[C64::default()], &bad, &mut rng).is_err());
    }

    #[test]
    fn vanishing_noise_passes_scaled_victim() {
        let mut rng = SimRng::seed_from_u64(1);
        // Pv stays at 1 while the noise floor vanishes
        let cfg = ChannelConfig {
            sigma2: 1e-12,
            ..ChannelConfig::new(120.0, 0.0)
        };
        let v: Vec<C64> = (0..64).map(|i| C64::from_polar(1.0, i as f64)).collect();
        let y = apply_channel(&v, &vec![C64::default(); 64], &cfg, &mut rng).unwrap();
        let amp = cfg.p_v().sqrt();
        for (a, b) in y.iter().zip(&v) {
            assert!((a - amp * b).norm() < 1e-4 * amp);
        }
    }

    #[test]
    fn noise_only_variance() {
        let mut rng = SimRng::seed_from_u64(2);
        let cfg = ChannelConfig {
            sigma2: 2.5,
            ..ChannelConfig::new(0.0, 0.0)
        };
        let z = vec![C64::default(); 100_000];
        let y = apply_channel(&z, &z, &cfg, &mut rng).unwrap();
        let var = y.iter().map(|s| s.norm_sqr()).sum::<f64>() / y.len() as f64;
        assert!((var / 2.5 - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn measured_snr_matches_setting() {
        let mut rng = SimRng::seed_from_u64(3);
        let cfg = ChannelConfig::new(13.0, 0.0);
        let n = 100_000;
        let v: Vec<C64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let y = apply_channel(&v, &vec![C64::default(); n], &cfg, &mut rng).unwrap();
        let amp = cfg.p_v().sqrt();
        let sig: f64 = v.iter().map(|s| (amp * s).norm_sqr()).sum();
        let noise: f64 = y.iter().zip(&v).map(|(a, b)| (a - amp * b).norm_sqr()).sum();
        assert!((linear_to_db(sig / noise) - 13.0).abs() < 0.2);
    }

    #[test]
    fn coherent_jammer_is_phase_free_and_linear() {
        let cfg = ChannelConfig::new(5.0, 0.0).coherent(true);
        let v: Vec<C64> = (0..32).map(|i| C64::new(i as f64, -1.0)).collect();
        let j: Vec<C64> = (0..32).map(|i| C64::new(0.5, i as f64 * 0.1)).collect();
        let z = vec![C64::default(); 32];
        let with = apply_channel(&v, &j, &cfg, &mut SimRng::seed_from_u64(4)).unwrap();
        let without = apply_channel(&v, &z, &cfg, &mut SimRng::seed_from_u64(4)).unwrap();
        for ((a, b), jj) in with.iter().zip(&without).zip(&j) {
            assert!((a - (b + jj)).norm() < 1e-12);
        }
    }

    #[test]
    fn non_coherent_phase_rotates_jammer() {
        let cfg = ChannelConfig {
            sigma2: 1e-12,
            ..ChannelConfig::new(0.0, 0.0)
        };
        let z = vec![C64::default(); 4];
        let j = vec![C64::new(1.0, 0.0); 4];
        let mut rng = SimRng::seed_from_u64(5);
        let y = apply_channel(&z, &j, &cfg, &mut rng).unwrap();
        // one phase per call: all samples rotate together
        for s in &y {
            assert!((s.norm() - 1.0).abs() < 1e-4);
            assert!((s - y[0]).norm() < 1e-4);
        }
    }
}
