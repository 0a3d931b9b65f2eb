//! Evaluation harness: routing consistency over paraphrased seeds, rating
//! aggregation with confidence intervals, and scripted robustness checks.

pub mod consistency;
pub mod fixtures;
pub mod ratings;
pub mod robustness;

use std::path::Path;
use std::time::Duration;

pub use consistency::{expand_seeds, run_consistency, CorpusEntry, RoutingReport, SeedPrompt};
pub use ratings::{aggregate_ratings, read_ratings_csv, t_quantile_975, RatingRecord, RatingsReport};
pub use robustness::{load_scripts, run_robustness, RobustnessReport, ScenarioCategory, ScenarioScript};

use crate::service::{DescriptionInput, Orchestrator, ServiceError, TurnRequest, Upload};
use crate::types::Turn;

pub const SHIPPED_SEEDS: &str = include_str!("../../data/seeds.json");

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("target unreachable: {0}")]
    Unreachable(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl From<ServiceError> for EvalError {
    fn from(e: ServiceError) -> Self {
        EvalError::Unreachable(e.to_string())
    }
}

/// Something turns can be posted to: the in-process orchestrator or a
/// running service.
pub trait Target {
    fn new_session(&self) -> Result<String, EvalError>;
    fn post(&self, session: &str, req: TurnRequest) -> Result<Turn, EvalError>;
}

impl Target for Orchestrator {
    fn new_session(&self) -> Result<String, EvalError> {
        Ok(self.create_session(None)?.session_id)
    }

    fn post(&self, session: &str, req: TurnRequest) -> Result<Turn, EvalError> {
        Ok(self.post_turn(session, req)?)
    }
}

/// A service reached over its HTTP API.
pub struct HttpTarget {
    base: String,
    client: reqwest::blocking::Client,
}

impl HttpTarget {
    pub fn new(base: &str) -> Result<Self, EvalError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| EvalError::Unreachable(e.to_string()))?;
        Ok(HttpTarget {
            base: base.trim_end_matches('/').to_string(),
            client,
        })
    }
}

#[derive(serde::Deserialize)]
struct Created {
    session_id: String,
}

impl Target for HttpTarget {
    fn new_session(&self) -> Result<String, EvalError> {
        let resp = self
            .client
            .post(format!("{}/sessions", self.base))
            .json(&serde_json::json!({}))
            .send()
            .map_err(|e| EvalError::Unreachable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(EvalError::Unreachable(format!("POST /sessions answered {}", resp.status())));
        }
        let c: Created = resp.json().map_err(|e| EvalError::Unreachable(e.to_string()))?;
        Ok(c.session_id)
    }

    fn post(&self, session: &str, req: TurnRequest) -> Result<Turn, EvalError> {
        use reqwest::blocking::multipart::{Form, Part};
        let mut form = Form::new();
        form = match req.description {
            DescriptionInput::Text(t) => form.text("description", t),
            DescriptionInput::Audio(b) => form.part("description_audio", Part::bytes(b).file_name("description.wav")),
        };
        for Upload { name, bytes } in req.uploads {
            form = form.part("file", Part::bytes(bytes).file_name(name));
        }
        let resp = self
            .client
            .post(format!("{}/sessions/{session}/turns", self.base))
            .multipart(form)
            .send()
            .map_err(|e| EvalError::Unreachable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(EvalError::Unreachable(format!("POST turns answered {}", resp.status())));
        }
        resp.json().map_err(|e| EvalError::Unreachable(e.to_string()))
    }
}

/// Builds a turn request, loading each upload entry relative to `base`.
pub fn request_with_uploads(query: &str, uploads: &[String], base: &Path) -> Result<TurnRequest, EvalError> {
    let mut req = TurnRequest::text(query);
    for u in uploads {
        let (name, bytes) = fixtures::load_upload(u, base).map_err(|e| EvalError::Invalid(e.message))?;
        req.uploads.push(Upload { name, bytes });
    }
    Ok(req)
}
