//! Oracle wire protocol, version 1: one JSON object per line.

use natrank_core::oracle::{PredictionRecord, Proposition, VariantRef};
use serde::{Deserialize, Serialize};

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub window: Vec<String>,
    pub k: usize,
    pub embeddings: bool,
    pub v: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireProposition {
    pub token: String,
    pub confidence: f64,
}

/// A reply: either propositions or an error, always tagged with the id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propositions: Option<Vec<WireProposition>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emb_orig: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emb_pred: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub v: u32,
}

impl Response {
    pub fn error(id: impl Into<String>, msg: impl Into<String>) -> Self {
        Response {
            id: id.into(),
            propositions: None,
            emb_orig: None,
            emb_pred: None,
            error: Some(msg.into()),
            note: None,
            v: VERSION,
        }
    }

    pub fn from_record(id: impl Into<String>, r: &PredictionRecord) -> Self {
        Response {
            id: id.into(),
            propositions: Some(
                r.propositions
                    .iter()
                    .map(|p| WireProposition {
                        token: p.token.clone(),
                        confidence: p.confidence,
                    })
                    .collect(),
            ),
            emb_orig: r.embedding_original.clone(),
            emb_pred: r.embedding_predicted.clone(),
            error: None,
            note: None,
            v: VERSION,
        }
    }
}

/// What went wrong with one reply.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplyError {
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("oracle error for request {id}: {msg}")]
    Oracle { id: String, msg: String },
    #[error("malformed response for request {id}: {msg}")]
    Malformed { id: String, msg: String },
}

/// Checks a reply against its request and turns it into a record.
pub fn to_record(req: &Request, resp: Response, variant_ref: VariantRef) -> Result<PredictionRecord, ReplyError> {
    if resp.v != VERSION {
        return Err(ReplyError::Version(resp.v));
    }
    let malformed = |msg: String| ReplyError::Malformed {
        id: resp.id.clone(),
        msg,
    };
    if let Some(msg) = resp.error.clone() {
        return Err(ReplyError::Oracle { id: resp.id, msg });
    }
    let props = resp
        .propositions
        .clone()
        .ok_or_else(|| malformed("no propositions".into()))?;
    // A small vocabulary may offer fewer than k.
    if props.is_empty() || props.len() > req.k {
        return Err(malformed(format!("expected 1..={} propositions, got {}", req.k, props.len())));
    }
    if req.embeddings != resp.emb_orig.is_some() || req.embeddings != resp.emb_pred.is_some() {
        return Err(malformed(if req.embeddings {
            "embeddings requested but missing".into()
        } else {
            "embeddings sent but not requested".into()
        }));
    }
    let record = PredictionRecord {
        variant_ref,
        propositions: props
            .into_iter()
            .map(|p| Proposition {
                token: p.token,
                confidence: p.confidence,
            })
            .collect(),
        embedding_original: resp.emb_orig.clone(),
        embedding_predicted: resp.emb_pred.clone(),
    };
    record.validate().map_err(|e| malformed(e.to_string()))?;
    Ok(record)
}

/// Parses one line, accepting only objects that carry an id and a version.
pub fn parse_response(line: &str) -> Result<Response, String> {
    serde_json::from_str(line).map_err(|e| format!("unparseable response {line:?}: {e}"))
}
