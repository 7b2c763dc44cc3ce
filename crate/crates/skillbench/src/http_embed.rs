//! Client for embedding servers speaking
//! `POST /embed {"texts": [...]}` → `{"vectors": [[...]], "dim": D, "normalized": bool}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use skillbench_core::{EmbedError, Embedder, EmbedderDescriptor, EmbeddingVector};

#[derive(Debug, Serialize)]
pub struct EmbedRequest<'a> {
    pub texts: &'a [&'a str],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
    pub normalized: bool,
}

const BODY_LIMIT: u64 = 512 << 20;

pub struct HttpEmbedder {
    url: String,
    agent: ureq::Agent,
    descriptor: EmbedderDescriptor,
}

impl HttpEmbedder {
    /// Probes the server once to learn its dimension and normalization.
    pub fn connect(
        base_url: &str,
        name: &str,
        version: &str,
        timeout: Duration,
    ) -> Result<Self, EmbedError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        let url = format!("{}/embed", base_url.trim_end_matches('/'));
        let probe = call(&agent, &url, &["probe"])?;
        let e = Self {
            url,
            agent,
            descriptor: EmbedderDescriptor {
                name: name.to_string(),
                dim: probe.dim,
                normalized: probe.normalized,
                version: version.to_string(),
            },
        };
        e.check(&probe, 1)?;
        Ok(e)
    }

    fn check(&self, r: &EmbedResponse, expected: usize) -> Result<(), EmbedError> {
        if r.vectors.len() != expected {
            return Err(EmbedError::CountMismatch {
                expected,
                found: r.vectors.len(),
            });
        }
        if r.dim != self.descriptor.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.descriptor.dim,
                found: r.dim,
            });
        }
        if r.normalized != self.descriptor.normalized {
            return Err(EmbedError::Unavailable(format!(
                "server changed its normalized flag to {}",
                r.normalized
            )));
        }
        Ok(())
    }
}

fn call(agent: &ureq::Agent, url: &str, texts: &[&str]) -> Result<EmbedResponse, EmbedError> {
    let unavailable = |e: ureq::Error| EmbedError::Unavailable(format!("{url}: {e}"));
    let mut resp = agent
        .post(url)
        .send_json(EmbedRequest { texts })
        .map_err(unavailable)?;
    resp.body_mut()
        .with_config()
        .limit(BODY_LIMIT)
        .read_json()
        .map_err(unavailable)
}

impl Embedder for HttpEmbedder {
    fn descriptor(&self) -> &EmbedderDescriptor {
        &self.descriptor
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let r = call(&self.agent, &self.url, texts)?;
        self.check(&r, texts.len())?;
        r.vectors.into_iter().map(EmbeddingVector::new).collect()
    }
}
