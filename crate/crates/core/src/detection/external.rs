//! Client for an instruction-driven detection service.
//!
//! Wire protocol: `POST {endpoint}/detect` with a JSON body
//! `{"image": <base64 PNG>, "prompt": <text>}`; the reply is a JSON array of
//! `{"bbox": [x0, y0, x1, y1], "score": s}` in pixel coordinates with the
//! origin at the top-left corner.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::Detection;
use crate::imaging::CsiImage;
use crate::{Error, Result};

/// Placeholder instruction used when no prompt is configured.
pub const DEFAULT_PROMPT: &str = "bright spot";

#[derive(Debug, Serialize)]
pub(crate) struct WireRequest<'a> {
    pub image: String,
    pub prompt: &'a str,
}

#[derive(Debug, Deserialize)]
pub(crate) struct WireBox {
    pub bbox: Vec<f64>,
    pub score: f64,
}

/// Connection settings for the detection service.
#[derive(Debug, Clone)]
pub struct ExternalDetector {
    pub endpoint: String,
    pub prompt: String,
    pub timeout: Duration,
    /// Upper bound on concurrent in-flight requests in [`detect_external_batch`].
    pub max_in_flight: usize,
}

impl ExternalDetector {
    pub fn new(endpoint: impl Into<String>) -> Self {
        ExternalDetector {
            endpoint: endpoint.into(),
            prompt: DEFAULT_PROMPT.to_string(),
            timeout: Duration::from_secs(10),
            max_in_flight: 4,
        }
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/detect") {
            base.to_string()
        } else {
            format!("{base}/detect")
        }
    }

    pub fn detect(&self, image: &CsiImage) -> Result<Vec<Detection>> {
        detect_external(image, &self.prompt, &self.endpoint, self.timeout)
    }

    pub fn detect_batch(&self, images: &[CsiImage]) -> Vec<Result<Vec<Detection>>> {
        detect_external_batch(images, self)
    }
}

/// Submits one image and prompt to the service and parses the returned boxes.
///
/// Transport problems, unparsable replies and empty detection sets map to
/// [`Error::Transport`], [`Error::MalformedResponse`] and
/// [`Error::EmptyDetections`] respectively.
pub fn detect_external(image: &CsiImage, prompt: &str, endpoint: &str, timeout: Duration) -> Result<Vec<Detection>> {
    let cfg = ExternalDetector {
        endpoint: endpoint.to_string(),
        prompt: prompt.to_string(),
        timeout,
        max_in_flight: 1,
    };
    let png = image.to_png()?;
    let body = WireRequest {
        image: base64::engine::general_purpose::STANDARD.encode(png),
        prompt,
    };
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut resp = agent
        .post(&cfg.url())
        .send_json(&body)
        .map_err(|e| Error::Transport(e.to_string()))?;
    let status = resp.status();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| Error::Transport(e.to_string()))?;
    if !status.is_success() {
        return Err(Error::Transport(format!("HTTP {}: {}", status.as_u16(), text.trim())));
    }
    parse_response(&text, image.width, image.height)
}

pub(crate) fn parse_response(text: &str, width: usize, height: usize) -> Result<Vec<Detection>> {
    let boxes: Vec<WireBox> = serde_json::from_str(text).map_err(|e| Error::MalformedResponse(e.to_string()))?;
    if boxes.is_empty() {
        return Err(Error::EmptyDetections);
    }
    let mut out = Vec::with_capacity(boxes.len());
    for (i, b) in boxes.iter().enumerate() {
        let bbox: [f64; 4] = b
            .bbox
            .as_slice()
            .try_into()
            .map_err(|_| Error::MalformedResponse(format!("box {i} has {} coordinates", b.bbox.len())))?;
        if bbox.iter().any(|v| !v.is_finite()) || !b.score.is_finite() {
            return Err(Error::MalformedResponse(format!("box {i} has non-finite values")));
        }
        if bbox[2] < bbox[0] || bbox[3] < bbox[1] {
            return Err(Error::MalformedResponse(format!("box {i} has inverted corners")));
        }
        let det = Detection::from_box(bbox, b.score.clamp(0.0, 1.0));
        if !det.in_bounds(width, height) {
            return Err(Error::MalformedResponse(format!(
                "box {i} centre ({}, {}) outside the {width}x{height} image",
                det.center_w, det.center_h
            )));
        }
        out.push(det);
    }
    // Stable: equal scores keep the service's order.
    out.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    Ok(out)
}

/// Runs many requests with at most `cfg.max_in_flight` outstanding at once.
/// Output `i` always belongs to `images[i]`, whatever order replies arrive in.
pub fn detect_external_batch(images: &[CsiImage], cfg: &ExternalDetector) -> Vec<Result<Vec<Detection>>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<Vec<Detection>>>>> = images.iter().map(|_| Mutex::new(None)).collect();
    let workers = cfg.max_in_flight.max(1).min(images.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let id = next.fetch_add(1, Ordering::Relaxed);
                let Some(img) = images.get(id) else { break };
                let r = detect_external(img, &cfg.prompt, &cfg.endpoint, cfg.timeout);
                *slots[id].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .unwrap_or_else(|| Err(Error::Transport("request never completed".into())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_sorts_by_score() {
        let d = parse_response(r#"[{"bbox":[0,0,2,2],"score":0.4},{"bbox":[4,4,6,6],"score":0.8}]"#, 10, 10).unwrap();
        assert_eq!(d[0].confidence, 0.8);
        assert_eq!((d[1].center_w, d[1].center_h), (1.0, 1.0));
    }

    #[test]
    fn parse_errors_are_distinct() {
        assert!(matches!(parse_response("[]", 4, 4), Err(Error::EmptyDetections)));
        assert!(matches!(parse_response("{", 4, 4), Err(Error::MalformedResponse(_))));
        assert!(matches!(
            parse_response(r#"[{"bbox":[0,0,2],"score":1}]"#, 4, 4),
            Err(Error::MalformedResponse(_))
        ));
        assert!(matches!(
            parse_response(r#"[{"bbox":[10,10,20,20],"score":1}]"#, 4, 4),
            Err(Error::MalformedResponse(_))
        ));
    }

    #[test]
    fn url_joining() {
        assert_eq!(ExternalDetector::new("http://h:1").url(), "http://h:1/detect");
        assert_eq!(ExternalDetector::new("http://h:1/").url(), "http://h:1/detect");
        assert_eq!(ExternalDetector::new("http://h:1/detect").url(), "http://h:1/detect");
    }
}
