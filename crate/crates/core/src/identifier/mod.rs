//! Attacker identification: pick which background vehicles should attack.

pub mod dsl;
pub mod features;

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use dsl::{eval_program, load_program, parse_program, save_program, ProgramRecord, ScoreProgram};
pub use features::{extract_features, Feature, FeatureVector};

use crate::error::IdentifyError;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticParams {
    pub g: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for KineticParams {
    fn default() -> Self {
        Self {
            g: 1.0,
            k1: 1.0,
            k2: 0.05,
        }
    }
}

/// Simplified kinetic-field risk: decays with distance, amplified by speed
/// directed at the ego.
pub fn kinetic_field_score(fv: &FeatureVector, p: KineticParams) -> f64 {
    p.g / fv.dist.max(0.5).powf(p.k1) * (p.k2 * fv.speed * fv.heading_align).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdentifierMethod {
    Random { seed: u64 },
    MinTtc,
    KineticField(KineticParams),
    Program(ScoreProgram),
}

impl IdentifierMethod {
    pub fn name(&self) -> &'static str {
        match self {
            IdentifierMethod::Random { .. } => "random",
            IdentifierMethod::MinTtc => "min_ttc",
            IdentifierMethod::KineticField(_) => "kinetic_field",
            IdentifierMethod::Program(_) => "program",
        }
    }

    pub fn validate(&self) -> Result<(), IdentifyError> {
        if let IdentifierMethod::KineticField(p) = self {
            if !(p.g > 0.0 && p.k1 > 0.0 && p.k2 > 0.0) {
                return Err(IdentifyError::InvalidParams(format!(
                    "kinetic field parameters must be positive, got G={} k1={} k2={}",
                    p.g, p.k1, p.k2
                )));
            }
        }
        Ok(())
    }
}

/// All background vehicles ordered from most to least preferred attacker,
/// with the score that ordered them (ttc for MinTTC, draw index for Random).
pub fn rank(scenario: &Scenario, method: &IdentifierMethod) -> Result<Vec<(u32, f64)>, IdentifyError> {
    method.validate()?;
    if let IdentifierMethod::Random { seed } = method {
        let mut ids = scenario.background_ids();
        ids.sort_unstable();
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(scenario.id.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
        ids.shuffle(&mut rng);
        return Ok(ids.into_iter().enumerate().map(|(i, id)| (id, i as f64)).collect());
    }
    let feats = extract_features(scenario);
    let mut scored: Vec<(u32, f64)> = feats
        .iter()
        .map(|(id, fv)| {
            let s = match method {
                IdentifierMethod::MinTtc => fv.ttc,
                IdentifierMethod::KineticField(p) => kinetic_field_score(fv, *p),
                IdentifierMethod::Program(p) => p.eval(fv),
                IdentifierMethod::Random { .. } => unreachable!(),
            };
            (*id, s)
        })
        .collect();
    let ascending = matches!(method, IdentifierMethod::MinTtc);
    scored.sort_by(|a, b| {
        let by_score = if ascending { a.1.total_cmp(&b.1) } else { b.1.total_cmp(&a.1) };
        match by_score {
            Ordering::Equal => a.0.cmp(&b.0),
            o => o,
        }
    });
    Ok(scored)
}

/// The `n` preferred attackers; ties go to the lower vehicle id.
pub fn identify(scenario: &Scenario, method: &IdentifierMethod, n: usize) -> Result<Vec<u32>, IdentifyError> {
    let m = scenario.background.len();
    if n == 0 || n > m {
        return Err(IdentifyError::TooFewVehicles {
            requested: n,
            available: m,
        });
    }
    Ok(rank(scenario, method)?.into_iter().take(n).map(|(id, _)| id).collect())
}
