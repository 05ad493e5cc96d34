//! One-line JSON messages shared by the subprocess and HTTP transports.
//!
//! Request: `{"id":<n>,"h":H,"w":W,"c":C,"pixels":"<base64 of raw row-major bytes>"}`
//! Reply:   `{"id":<n>,"probs":[...]}` or `{"id":<n>,"error":"..."}`

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use pixattack_core::oracle::{SUM_TOLERANCE};
use pixattack_core::{Image, OracleError, OracleResponse};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Request {
    id: u64,
    h: usize,
    w: usize,
    c: usize,
    pixels: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Reply {
    id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Request line without the trailing newline.
pub fn encode_request(id: u64, image: &Image) -> String {
    let req = Request {
        id,
        h: image.height(),
        w: image.width(),
        c: image.channels(),
        pixels: STANDARD.encode(image.data()),
    };
    serde_json::to_string(&req).expect("request serialization cannot fail")
}

/// Server side of [`encode_request`].
pub fn decode_request(line: &str) -> Result<(u64, Image), OracleError> {
    let req: Request = serde_json::from_str(line.trim_end()).map_err(malformed)?;
    let data = STANDARD
        .decode(req.pixels.as_bytes())
        .map_err(|e| OracleError::Malformed(format!("pixels: {e}")))?;
    let img = Image::new(req.h, req.w, req.c, data).map_err(|e| OracleError::Malformed(e.to_string()))?;
    Ok((req.id, img))
}

pub fn encode_reply(id: u64, probabilities: &[f64]) -> String {
    let reply = Reply {
        id,
        probs: Some(probabilities.to_vec()),
        error: None,
    };
    serde_json::to_string(&reply).expect("reply serialization cannot fail")
}

pub fn encode_error_reply(id: u64, message: &str) -> String {
    let reply = Reply {
        id,
        probs: None,
        error: Some(message.to_string()),
    };
    serde_json::to_string(&reply).expect("reply serialization cannot fail")
}

fn malformed(e: serde_json::Error) -> OracleError {
    if e.is_eof() {
        OracleError::Malformed(format!("truncated message: {e}"))
    } else {
        OracleError::Malformed(e.to_string())
    }
}

/// Parses a reply and checks it answers request `expected_id`.
///
/// Vectors summing to 1 within the strict tolerance are kept verbatim;
/// small drift (up to 1e-3) is renormalized; anything else is rejected.
pub fn decode_reply(line: &str, expected_id: u64) -> Result<OracleResponse, OracleError> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Err(OracleError::Malformed("truncated message: empty reply".into()));
    }
    let reply: Reply = serde_json::from_str(line).map_err(malformed)?;
    if reply.id != expected_id {
        return Err(OracleError::IdMismatch {
            expected: expected_id,
            found: reply.id,
        });
    }
    if let Some(message) = reply.error {
        return Err(OracleError::Remote(message));
    }
    let probs = reply
        .probs
        .ok_or_else(|| OracleError::Malformed("reply has neither `probs` nor `error`".into()))?;
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() <= SUM_TOLERANCE {
        OracleResponse::new(probs)
    } else {
        OracleResponse::renormalized(probs)
    }
}
