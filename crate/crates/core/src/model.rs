//! Epidemiological states, model parameters, running costs and the
//! closed-form quantities every solver shares.
//!
//! The agent moves on the graph
//!
//! ```text
//!   S --(eta + lambda_sa * beta_t * u_t)--> A --lambda_ai--> I --lambda_id--> D
//!                                           |                |
//!                                           +--lambda_ar-->  R <--lambda_ir--+
//! ```
//!
//! Cost accumulation stops when the agent hits `R` or `D`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Epidemiological state of a single agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EpiState {
    S,
    A,
    I,
    R,
    D,
}

impl EpiState {
    pub const ALL: [EpiState; 5] = [EpiState::S, EpiState::A, EpiState::I, EpiState::R, EpiState::D];

    pub fn index(self) -> usize {
        match self {
            EpiState::S => 0,
            EpiState::A => 1,
            EpiState::I => 2,
            EpiState::R => 3,
            EpiState::D => 4,
        }
    }

    /// `R` and `D` end the cost accumulation.
    pub fn is_terminal(self) -> bool {
        matches!(self, EpiState::R | EpiState::D)
    }

    pub fn is_infected(self) -> bool {
        matches!(self, EpiState::A | EpiState::I)
    }
}

/// Per-attribute overrides of the transition rates out of `A` and `I`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_ai: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_ar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_ir: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_id: Option<f64>,
}

/// One agent type `theta` with its population share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attribute {
    pub id: String,
    pub prob: f64,
    #[serde(default)]
    pub overrides: RateOverrides,
}

fn one() -> f64 {
    1.0
}

fn zero() -> f64 {
    0.0
}

/// All rates, cost constants, discount and terminal values of the model.
///
/// Rates are per unit time. `alpha` is the economic reward per unit time of
/// being active, `phi_r`/`phi_d` the terminal values on recovery and death.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub lambda_sa: f64,
    pub lambda_ai: f64,
    pub lambda_ar: f64,
    pub lambda_ir: f64,
    pub lambda_id: f64,
    pub eta: f64,
    pub gamma: f64,
    pub alpha: f64,
    #[serde(default = "one")]
    pub c_h_i: f64,
    #[serde(default = "zero")]
    pub c_h_a: f64,
    #[serde(default = "one")]
    pub c_a: f64,
    pub phi_r: f64,
    pub phi_d: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<Attribute>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            lambda_sa: 0.6,
            lambda_ai: 0.2,
            lambda_ar: 0.1,
            lambda_ir: 0.1,
            lambda_id: 0.02,
            eta: 0.01,
            gamma: 0.01,
            alpha: 0.9,
            c_h_i: 1.0,
            c_h_a: 0.0,
            c_a: 1.0,
            phi_r: 0.0,
            phi_d: 50.0,
            attributes: Vec::new(),
        }
    }
}

/// Parameters of a single attribute class after applying its overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeParams {
    pub id: String,
    pub prob: f64,
    pub params: ModelParams,
}

impl ModelParams {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let params: ModelParams = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("lambda_sa", self.lambda_sa),
            ("lambda_ai", self.lambda_ai),
            ("lambda_ar", self.lambda_ar),
            ("lambda_ir", self.lambda_ir),
            ("lambda_id", self.lambda_id),
        ];
        for (name, value) in rates {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::invalid(name, format!("rate must be finite and >= 0, got {value}")));
            }
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", format!("must be > 0, got {}", self.eta)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be > 0, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha", format!("must lie in [0, 1), got {}", self.alpha)));
        }
        for (name, value) in [
            ("c_h_i", self.c_h_i),
            ("c_h_a", self.c_h_a),
            ("c_a", self.c_a),
            ("phi_r", self.phi_r),
            ("phi_d", self.phi_d),
        ] {
            if !value.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if !self.attributes.is_empty() {
            let mut total = 0.0;
            for attr in &self.attributes {
                if !(attr.prob >= 0.0 && attr.prob <= 1.0) {
                    return Err(Error::invalid(
                        format!("attributes[{}].prob", attr.id),
                        format!("must lie in [0, 1], got {}", attr.prob),
                    ));
                }
                total += attr.prob;
                let o = &attr.overrides;
                for (name, value) in [
                    ("lambda_ai", o.lambda_ai),
                    ("lambda_ar", o.lambda_ar),
                    ("lambda_ir", o.lambda_ir),
                    ("lambda_id", o.lambda_id),
                ] {
                    if let Some(v) = value {
                        if !v.is_finite() || v < 0.0 {
                            return Err(Error::invalid(
                                format!("attributes[{}].overrides.{name}", attr.id),
                                format!("rate must be finite and >= 0, got {v}"),
                            ));
                        }
                    }
                }
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("attributes", format!("probabilities sum to {total}, expected 1")));
            }
        }
        Ok(())
    }

    /// Resolved parameter set for each attribute class. A parameter set
    /// without attributes is a single class `default` with probability one.
    pub fn resolved_attributes(&self) -> Vec<AttributeParams> {
        let mut base = self.clone();
        base.attributes.clear();
        if self.attributes.is_empty() {
            return vec![AttributeParams { id: "default".to_string(), prob: 1.0, params: base }];
        }
        self.attributes
            .iter()
            .map(|attr| {
                let mut params = base.clone();
                let o = &attr.overrides;
                if let Some(v) = o.lambda_ai {
                    params.lambda_ai = v;
                }
                if let Some(v) = o.lambda_ar {
                    params.lambda_ar = v;
                }
                if let Some(v) = o.lambda_ir {
                    params.lambda_ir = v;
                }
                if let Some(v) = o.lambda_id {
                    params.lambda_id = v;
                }
                AttributeParams { id: attr.id.clone(), prob: attr.prob, params }
            })
            .collect()
    }

    /// Total exit rate out of `A`.
    pub fn exit_rate_a(&self) -> f64 {
        self.lambda_ai + self.lambda_ar
    }

    /// Total exit rate out of `I`.
    pub fn exit_rate_i(&self) -> f64 {
        self.lambda_ir + self.lambda_id
    }
}

/// Health cost, altruistic cost and activity reward per state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTable {
    pub health: [f64; 3],
    pub altruistic: [f64; 3],
    pub reward: [f64; 3],
}

impl CostTable {
    pub fn from_params(params: &ModelParams) -> Self {
        Self {
            health: [0.0, params.c_h_a, params.c_h_i],
            altruistic: [0.0, params.c_a, params.c_a],
            reward: [params.alpha; 3],
        }
    }

    /// `c(x, u) = c_h(x) + (c_a(x) - r(x)) u`.
    pub fn cost(&self, x: EpiState, u: f64) -> Result<f64> {
        let k = match x {
            EpiState::R | EpiState::D => return Err(Error::StoppedState(x)),
            other => other.index(),
        };
        Ok(self.health[k] + (self.altruistic[k] - self.reward[k]) * u)
    }

    /// Slope of the running cost in `u`.
    pub fn activity_slope(&self, x: EpiState) -> f64 {
        match x {
            EpiState::R | EpiState::D => 0.0,
            other => self.altruistic[other.index()] - self.reward[other.index()],
        }
    }

    pub fn health_cost(&self, x: EpiState) -> f64 {
        match x {
            EpiState::R | EpiState::D => 0.0,
            other => self.health[other.index()],
        }
    }
}

/// Value of a symptomatic agent, who isolates until recovery or death.
pub fn phi_bar_i(params: &ModelParams) -> Result<f64> {
    let denom = params.gamma + params.lambda_ir + params.lambda_id;
    if denom <= 0.0 {
        return Err(Error::Degenerate("phi_bar_i"));
    }
    Ok((params.c_h_i + params.lambda_ir * params.phi_r + params.lambda_id * params.phi_d) / denom)
}

/// Value of a fully informed asymptomatic agent, who isolates.
pub fn phi_bar_a(params: &ModelParams) -> Result<f64> {
    let denom = params.gamma + params.lambda_ai + params.lambda_ar;
    if denom <= 0.0 {
        return Err(Error::Degenerate("phi_bar_a"));
    }
    let phi_i = phi_bar_i(params)?;
    Ok((params.c_h_a + params.lambda_ai * phi_i + params.lambda_ar * params.phi_r) / denom)
}

pub fn running_cost(x: EpiState, u: f64, params: &ModelParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::invalid("u", format!("activity must lie in [0, 1], got {u}")));
    }
    CostTable::from_params(params).cost(x, u)
}

/// Basic reproduction number `lambda_sa / (lambda_ai + lambda_ar)`.
pub fn r_nought(params: &ModelParams) -> Result<f64> {
    let denom = params.exit_rate_a();
    if denom <= 0.0 {
        return Err(Error::Degenerate("r_nought"));
    }
    Ok(params.lambda_sa / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn phi_bar_i_examples() {
        let p = ModelParams::default();
        assert!(close(phi_bar_i(&p).unwrap(), 2.0 / 0.13, 1e-12));

        let p = ModelParams { c_h_i: 0.0, lambda_id: 0.0, phi_r: 0.0, ..ModelParams::default() };
        assert_eq!(phi_bar_i(&p).unwrap(), 0.0);

        let p = ModelParams {
            c_h_i: 1.0,
            lambda_ir: 0.0,
            lambda_id: 0.0,
            gamma: 1.0,
            phi_d: 1234.0,
            ..ModelParams::default()
        };
        assert_eq!(phi_bar_i(&p).unwrap(), 1.0);
    }

    #[test]
    fn phi_bar_a_examples() {
        let p = ModelParams::default();
        let expected = 0.2 * (2.0 / 0.13) / 0.31;
        assert!(close(phi_bar_a(&p).unwrap(), expected, 1e-12));

        let p = ModelParams { lambda_ai: 0.0, lambda_ar: 0.0, c_h_a: 0.0, ..ModelParams::default() };
        assert_eq!(phi_bar_a(&p).unwrap(), 0.0);

        // Immediate recovery pins the value to phi_r.
        let p = ModelParams { lambda_ar: 1e6, phi_r: 0.5, ..ModelParams::default() };
        assert!(close(phi_bar_a(&p).unwrap(), 0.5, 1e-5));
    }

    #[test]
    fn phi_bar_a_without_recovery_edge() {
        let p = ModelParams { lambda_ar: 0.0, ..ModelParams::default() };
        let phi_i = phi_bar_i(&p).unwrap();
        let expected = p.lambda_ai * phi_i / (p.gamma + p.lambda_ai);
        assert!(close(phi_bar_a(&p).unwrap(), expected, 1e-12));
    }

    #[test]
    fn running_cost_table() {
        let p = ModelParams::default();
        assert!(close(running_cost(EpiState::S, 1.0, &p).unwrap(), -0.9, 1e-15));
        assert_eq!(running_cost(EpiState::A, 0.0, &p).unwrap(), 0.0);
        assert!(close(running_cost(EpiState::I, 1.0, &p).unwrap(), 1.1, 1e-15));
        assert!(matches!(running_cost(EpiState::R, 0.5, &p), Err(Error::StoppedState(EpiState::R))));
        assert!(running_cost(EpiState::D, 0.0, &p).is_err());
        assert!(running_cost(EpiState::S, 1.5, &p).is_err());
    }

    #[test]
    fn running_cost_slope_negative_only_for_susceptible() {
        let table = CostTable::from_params(&ModelParams::default());
        assert!(table.activity_slope(EpiState::S) < 0.0);
        assert!(table.activity_slope(EpiState::A) > 0.0);
        assert!(table.activity_slope(EpiState::I) > 0.0);
    }

    #[test]
    fn r_nought_examples() {
        let mut p = ModelParams::default();
        assert!(close(r_nought(&p).unwrap(), 2.0, 1e-12));
        p.lambda_sa = 0.3;
        assert!(close(r_nought(&p).unwrap(), 1.0, 1e-12));
        p.lambda_sa = 0.0;
        assert_eq!(r_nought(&p).unwrap(), 0.0);
        p.lambda_ai = 0.0;
        p.lambda_ar = 0.0;
        assert!(r_nought(&p).is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let d = ModelParams::default;
        assert!(ModelParams { alpha: 1.0, ..d() }.validate().is_err());
        assert!(ModelParams { eta: 0.0, ..d() }.validate().is_err());
        assert!(ModelParams { lambda_ir: -0.1, ..d() }.validate().is_err());
        let mut p = ModelParams {
            attributes: vec![
                Attribute { id: "young".into(), prob: 0.5, overrides: RateOverrides::default() },
                Attribute { id: "old".into(), prob: 0.4, overrides: RateOverrides::default() },
            ],
            ..d()
        };
        assert!(p.validate().is_err());
        p.attributes[1].prob = 0.5;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn json_field_names_and_unknown_fields() {
        let text = r#"{
            "lambda_sa": 0.6, "lambda_ai": 0.2, "lambda_ar": 0.1,
            "lambda_ir": 0.1, "lambda_id": 0.02, "eta": 0.01, "gamma": 0.01,
            "alpha": 0.9, "phi_r": 0.0, "phi_d": 50.0,
            "attributes": [
                {"id": "young", "prob": 0.7, "overrides": {"lambda_id": 0.005}},
                {"id": "old", "prob": 0.3, "overrides": {"lambda_id": 0.05, "lambda_ir": 0.07}}
            ]
        }"#;
        let p = ModelParams::from_json_str(text).unwrap();
        let classes = p.resolved_attributes();
        assert_eq!(classes.len(), 2);
        assert_eq!(classes[1].params.lambda_ir, 0.07);
        assert_eq!(classes[1].params.lambda_sa, 0.6);
        assert_eq!(classes[0].params.lambda_id, 0.005);

        let typo = text.replace("lambda_sa", "lambda_as");
        assert!(ModelParams::from_json_str(&typo).is_err());
        let bad_override = text.replace("\"lambda_ir\": 0.07", "\"alpha\": 0.5");
        assert!(ModelParams::from_json_str(&bad_override).is_err());
    }
}
