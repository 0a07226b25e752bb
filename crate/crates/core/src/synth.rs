//! Two-group synthetic populations with a known, group-blind outcome model.
//!
//! Baseline covariates have right-skewed gamma marginals tied together by a
//! shared gamma factor. Comparison covariates are a fresh baseline draw plus
//! a location shift. Every record carries `Y*`, drawn from one logistic
//! model that ignores group. The observed `Y` equals `Y*` for the baseline
//! group; for the comparison group the log-odds gain `observation_bias`
//! before the same uniform is compared, so `Y >= Y*` and a zero bias gives
//! `Y = Y*` exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{Dataset, Group, Record};

/// Per-feature marginal template: name, offset, gamma shape, gamma scale,
/// loading on the shared factor.
const TEMPLATES: [(&str, f64, f64, f64, f64); 4] = [
    ("age", 18.0, 2.0, 5.0, 0.0),
    ("priors", 0.0, 1.2, 4.0, 2.0),
    ("violent_priors", 0.0, 1.0, 3.0, 1.5),
    ("charges", 1.0, 1.5, 3.0, 1.0),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_per_group: usize,
    pub d: usize,
    /// Location shift added to comparison covariates, length `d`.
    pub shift: Vec<f64>,
    /// Log-odds slopes of the outcome model, length `d`.
    pub outcome_coefficients: Vec<f64>,
    pub intercept: f64,
    /// Added to the comparison group's log-odds of an observed positive.
    pub observation_bias: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_group: 4000,
            d: 4,
            shift: vec![-3.0, 3.0, 1.5, 1.5],
            outcome_coefficients: vec![-0.08, 0.12, 0.2, 0.1],
            intercept: -2.5,
            observation_bias: 0.5,
            seed: 2024,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.n_per_group == 0 {
            return bad("n_per_group must be at least 1".into());
        }
        if self.shift.len() != self.d {
            return bad(format!("shift has {} entries, d = {}", self.shift.len(), self.d));
        }
        if self.outcome_coefficients.len() != self.d {
            return bad(format!(
                "outcome_coefficients has {} entries, d = {}",
                self.outcome_coefficients.len(),
                self.d
            ));
        }
        if !(self.observation_bias >= 0.0 && self.observation_bias.is_finite()) {
            return bad("observation_bias must be finite and nonnegative".into());
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.shift) || !finite(&self.outcome_coefficients) || !self.intercept.is_finite() {
            return bad("shift, coefficients and intercept must be finite".into());
        }
        Ok(())
    }

    /// The same population without shift or observation bias.
    pub fn exchangeable(self) -> Self {
        Self {
            shift: vec![0.0; self.d],
            observation_bias: 0.0,
            ..self
        }
    }

    /// Group-blind log-odds of `Y* = 1`.
    pub fn log_odds(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .outcome_coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    /// Probability of an observed positive for a record of `group`.
    pub fn observed_probability(&self, x: &[f64], group: Group) -> f64 {
        let bias = match group {
            Group::Baseline => 0.0,
            Group::Comparison => self.observation_bias,
        };
        logistic(self.log_odds(x) + bias)
    }
}

pub fn feature_names(d: usize) -> Vec<String> {
    (0..d)
        .map(|k| match TEMPLATES.get(k) {
            Some(t) => t.0.to_string(),
            None => format!("x{}", k + 1),
        })
        .collect()
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

struct Sampler {
    marginals: Vec<(f64, Gamma<f64>, f64)>,
    factor: Gamma<f64>,
}

impl Sampler {
    fn new(d: usize) -> Self {
        let marginals = (0..d)
            .map(|k| {
                let (_, offset, shape, scale, load) = TEMPLATES[k % TEMPLATES.len()];
                (offset, Gamma::new(shape, scale).expect("valid gamma"), load)
            })
            .collect();
        Self {
            marginals,
            factor: Gamma::new(1.0, 1.0).expect("valid gamma"),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let common = self.factor.sample(rng);
        self.marginals
            .iter()
            .map(|(offset, g, load)| offset + g.sample(rng) + load * common)
            .collect()
    }
}

/// Baseline records first, then comparison records; `Y*` on every row.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sampler = Sampler::new(config.d);
    let mut records = Vec::with_capacity(2 * config.n_per_group);
    for group in Group::ALL {
        for _ in 0..config.n_per_group {
            let mut x = sampler.draw(&mut rng);
            if group == Group::Comparison {
                for (v, s) in x.iter_mut().zip(&config.shift) {
                    *v += s;
                }
            }
            let u: f64 = rng.random();
            let y_star = u8::from(u < logistic(config.log_odds(&x)));
            let y = u8::from(u < config.observed_probability(&x, group));
            let mut r = Record::new(x, group, Some(y));
            r.counterfactual_outcome = Some(y_star);
            records.push(r);
        }
    }
    Dataset::new(feature_names(config.d), records, config.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::filter_group;

    #[test]
    fn sizes_and_oracle_labels() {
        let cfg = SynthConfig {
            n_per_group: 300,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        assert_eq!(data.count_group(Group::Baseline), 300);
        assert_eq!(data.count_group(Group::Comparison), 300);
        assert!(data.records.iter().all(|r| r.counterfactual_outcome.is_some()));
        assert_eq!(data.feature_names, ["age", "priors", "violent_priors", "charges"]);
        assert_eq!(generate(&cfg).unwrap(), data);
    }

    #[test]
    fn observed_equals_oracle_without_bias() {
        let cfg = SynthConfig {
            n_per_group: 500,
            observation_bias: 0.0,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        assert!(data.records.iter().all(|r| r.outcome == r.counterfactual_outcome));
    }

    #[test]
    fn bias_only_adds_positives() {
        let data = generate(&SynthConfig::default()).unwrap();
        for r in &data.records {
            assert!(r.outcome >= r.counterfactual_outcome);
            if r.group == Group::Baseline {
                assert_eq!(r.outcome, r.counterfactual_outcome);
            }
        }
    }

    #[test]
    fn comparison_base_rate_matches_formula() {
        let cfg = SynthConfig::default();
        let data = generate(&cfg).unwrap();
        let base = filter_group(&data, Group::Baseline).base_rate().unwrap();
        let comp = filter_group(&data, Group::Comparison);
        let rate = comp.base_rate().unwrap();
        assert!(rate > base, "{rate} vs {base}");
        let expected = comp
            .records
            .iter()
            .map(|r| cfg.observed_probability(&r.covariates, Group::Comparison))
            .sum::<f64>()
            / comp.len() as f64;
        assert!((rate - expected).abs() <= 0.01, "{rate} vs {expected}");
    }

    #[test]
    fn marginals_are_right_skewed() {
        let data = generate(&SynthConfig::default()).unwrap();
        let base = filter_group(&data, Group::Baseline);
        for k in 0..base.n_features() {
            let mut v = base.column(k);
            v.sort_by(f64::total_cmp);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let median = v[v.len() / 2];
            assert!(mean > median, "feature {k}: mean {mean} median {median}");
        }
    }

    #[test]
    fn higher_dimensions_and_validation() {
        let cfg = SynthConfig {
            n_per_group: 10,
            d: 6,
            shift: vec![0.0; 6],
            outcome_coefficients: vec![0.1; 6],
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        assert_eq!(data.feature_names[5], "x6");
        let bad = SynthConfig {
            d: 3,
            ..SynthConfig::default()
        };
        assert!(matches!(generate(&bad), Err(Error::InvalidConfig(_))));
        let bad = SynthConfig {
            observation_bias: -1.0,
            ..SynthConfig::default()
        };
        assert!(generate(&bad).is_err());
    }
}
