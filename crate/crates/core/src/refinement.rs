//! Refinement backends: `generated = D(mixed)` at a given translation strength.
//!
//! Three backends share the [`Refiner`] trait:
//!
//! - [`IdentityRefiner`] returns the mixed image unchanged, isolating the
//!   mixing stage.
//! - [`NoiseStubRefiner`] applies only the forward (noising) half of img2img:
//!   `x = sqrt(a) * x0 + sqrt(1 - a) * eps` with `a` the cumulative alpha at
//!   step `floor(s * T)`. No denoising is simulated, so strength effects stay
//!   observable and deterministic.
//! - [`RemoteRefiner`] posts the image to an HTTP refinement service, which
//!   runs the fine-tuned diffusion model (including the backward process).
//!
//! Wire contract of the service:
//!
//! ```text
//! POST {endpoint}/refine  {"image_png_b64", "prompt", "strength", "seed"}
//!   200 {"image_png_b64"} | 4xx {"error"} | 5xx
//! GET  {endpoint}/health  200 {"mode": "stub" | "model", ...}
//! ```

use std::io::Cursor;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::Image;

/// Default number of diffusion steps `T`.
pub const DEFAULT_TOTAL_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;
/// Default cap on concurrent requests to a remote service.
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

// floor(s * T) is taken after adding this, so 0.7 * 1000 lands on 700.
const STEP_SLACK: f64 = 1e-9;
const MAX_RESPONSE_BYTES: u64 = 512 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("invalid refine request: {0}")]
    InvalidRequest(String),
    #[error("request to {endpoint} timed out")]
    Timeout { endpoint: String },
    #[error("transport error talking to {endpoint}: {reason}")]
    Transport { endpoint: String, reason: String },
    #[error("service returned status {status}: {message}")]
    Status { status: u16, message: String },
    #[error("malformed service response: {0}")]
    MalformedResponse(String),
    #[error("service returned {got_width}x{got_height}x{got_channels}, expected {width}x{height}x{channels}")]
    DimensionMismatch {
        width: usize,
        height: usize,
        channels: usize,
        got_width: usize,
        got_height: usize,
        got_channels: usize,
    },
}

impl RefineError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            RefineError::InvalidRequest(_) => "invalid_request",
            RefineError::Timeout { .. } => "timeout",
            RefineError::Transport { .. } => "transport",
            RefineError::Status { .. } => "status",
            RefineError::MalformedResponse(_) => "malformed_response",
            RefineError::DimensionMismatch { .. } => "dimension_mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    /// Learned class identifier rendered as text, e.g. `<class_17>`.
    pub class_token: String,
    /// Coarse category word, e.g. `bird`.
    pub metaclass: String,
}

impl PromptSpec {
    pub fn new(class_token: impl Into<String>, metaclass: impl Into<String>) -> Self {
        Self {
            class_token: class_token.into(),
            metaclass: metaclass.into(),
        }
    }

    pub fn render(&self) -> String {
        format!("a photo of a {} {}", self.class_token, self.metaclass)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineRequest {
    pub image: Image,
    pub prompt: PromptSpec,
    pub strength: f64,
    pub seed: u64,
}

impl RefineRequest {
    pub fn new(image: Image, prompt: PromptSpec, strength: f64, seed: u64) -> Result<Self, RefineError> {
        validate_strength(strength)?;
        Ok(Self {
            image,
            prompt,
            strength,
            seed,
        })
    }
}

fn validate_strength(strength: f64) -> Result<(), RefineError> {
    if (0.0..=1.0).contains(&strength) {
        Ok(())
    } else {
        Err(RefineError::InvalidRequest(format!(
            "strength {strength} outside [0, 1]"
        )))
    }
}

/// Linear beta schedule and its cumulative alpha products.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(DEFAULT_TOTAL_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
    }
}

impl NoiseSchedule {
    /// `total_steps` betas spaced linearly from `beta_start` to `beta_end`.
    pub fn linear(total_steps: usize, beta_start: f64, beta_end: f64) -> Self {
        assert!(total_steps >= 1, "schedule needs at least one step");
        assert!(
            0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0,
            "betas must satisfy 0 < start <= end < 1"
        );
        let betas: Vec<f64> = if total_steps == 1 {
            vec![beta_start]
        } else {
            let step = (beta_end - beta_start) / (total_steps - 1) as f64;
            (0..total_steps)
                .map(|t| beta_start + step * t as f64)
                .collect()
        };
        let alpha_bars = betas
            .iter()
            .scan(1.0, |acc, beta| {
                *acc *= 1.0 - beta;
                Some(*acc)
            })
            .collect();
        Self { betas, alpha_bars }
    }

    pub fn total_steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `alpha_bars()[t - 1]` is the cumulative product through step `t`.
    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// Cumulative alpha after `step` noising steps; step 0 is 1.
    pub fn alpha_bar(&self, step: usize) -> f64 {
        match step {
            0 => 1.0,
            s => self.alpha_bars[s.min(self.total_steps()) - 1],
        }
    }

    /// `floor(strength * T)`.
    pub fn steps_for_strength(&self, strength: f64) -> usize {
        let strength = strength.clamp(0.0, 1.0);
        ((strength * self.total_steps() as f64 + STEP_SLACK).floor() as usize)
            .min(self.total_steps())
    }
}

/// Forward-noised image before re-quantization, in [-1, 1] units.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisedSamples {
    pub steps: usize,
    pub alpha_bar: f64,
    /// Interleaved like the source image's data.
    pub values: Vec<f64>,
}

pub fn to_unit_range(v: u8) -> f64 {
    f64::from(v) / 127.5 - 1.0
}

pub fn from_unit_range(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// Continuous forward-noising result; see [`forward_noise`].
pub fn forward_noise_samples(
    img: &Image,
    strength: f64,
    schedule: &NoiseSchedule,
    seed: u64,
) -> NoisedSamples {
    let steps = schedule.steps_for_strength(strength);
    let alpha_bar = schedule.alpha_bar(steps);
    if steps == 0 {
        return NoisedSamples {
            steps,
            alpha_bar,
            values: img.data().iter().map(|&v| to_unit_range(v)).collect(),
        };
    }
    let signal = alpha_bar.sqrt();
    let noise = (1.0 - alpha_bar).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = img
        .data()
        .iter()
        .map(|&v| {
            let eps: f64 = StandardNormal.sample(&mut rng);
            signal * to_unit_range(v) + noise * eps
        })
        .collect();
    NoisedSamples {
        steps,
        alpha_bar,
        values,
    }
}

/// Noises `img` up to step `floor(strength * T)` and re-quantizes to 8 bits.
/// Strength 0 returns the input unchanged.
pub fn forward_noise(img: &Image, strength: f64, schedule: &NoiseSchedule, seed: u64) -> Image {
    let noised = forward_noise_samples(img, strength, schedule, seed);
    if noised.steps == 0 {
        return img.clone();
    }
    let data = noised.values.into_iter().map(from_unit_range).collect();
    Image::new(img.width(), img.height(), img.channels(), data)
        .expect("noising preserves the image shape")
}

/// A refinement backend. Implementations are shared across pipeline workers.
pub trait Refiner: Send + Sync {
    fn refine(&self, req: &RefineRequest) -> Result<Image, RefineError>;

    /// Short label for logs and reports.
    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRefiner;

impl Refiner for IdentityRefiner {
    fn refine(&self, req: &RefineRequest) -> Result<Image, RefineError> {
        Ok(refine_identity(req))
    }

    fn name(&self) -> &'static str {
        "identity"
    }
}

pub fn refine_identity(req: &RefineRequest) -> Image {
    req.image.clone()
}

#[derive(Debug, Clone, Default)]
pub struct NoiseStubRefiner {
    pub schedule: NoiseSchedule,
}

impl Refiner for NoiseStubRefiner {
    fn refine(&self, req: &RefineRequest) -> Result<Image, RefineError> {
        validate_strength(req.strength)?;
        Ok(refine_noise_stub(req, &self.schedule))
    }

    fn name(&self) -> &'static str {
        "noise"
    }
}

pub fn refine_noise_stub(req: &RefineRequest, schedule: &NoiseSchedule) -> Image {
    forward_noise(&req.image, req.strength, schedule, req.seed)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RefineBody {
    pub image_png_b64: String,
    pub prompt: String,
    pub strength: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RefineReply {
    pub image_png_b64: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorReply {
    pub error: String,
}

/// Body of `GET /health`. Backends may report extra provenance fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthInfo {
    pub mode: String,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// PNG-encodes an image in memory and wraps it in base64.
pub fn encode_png_b64(img: &Image) -> Result<String, RefineError> {
    let color = match img.channels() {
        1 => image::ExtendedColorType::L8,
        _ => image::ExtendedColorType::Rgb8,
    };
    let mut bytes = Vec::new();
    image::ImageEncoder::write_image(
        image::codecs::png::PngEncoder::new(&mut bytes),
        img.data(),
        img.width() as u32,
        img.height() as u32,
        color,
    )
    .map_err(|e| RefineError::InvalidRequest(format!("png encode: {e}")))?;
    Ok(BASE64.encode(bytes))
}

/// Inverse of [`encode_png_b64`]; alpha is dropped, gray stays gray.
pub fn decode_png_b64(text: &str) -> Result<Image, RefineError> {
    let bytes = BASE64
        .decode(text.trim())
        .map_err(|e| RefineError::MalformedResponse(format!("base64: {e}")))?;
    let dynamic = image::ImageReader::with_format(Cursor::new(bytes), image::ImageFormat::Png)
        .decode()
        .map_err(|e| RefineError::MalformedResponse(format!("png decode: {e}")))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let built = match dynamic.color().channel_count() {
        1 | 2 => Image::new(w, h, 1, dynamic.to_luma8().into_raw()),
        _ => Image::new(w, h, 3, dynamic.to_rgb8().into_raw()),
    };
    built.map_err(|e| RefineError::MalformedResponse(e.to_string()))
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct InFlight {
    active: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            active: Mutex::new(0),
            freed: Condvar::new(),
            limit: limit.max(1),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().expect("in-flight lock poisoned");
        while *active >= self.limit {
            active = self.freed.wait(active).expect("in-flight lock poisoned");
        }
        *active += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().expect("in-flight lock poisoned");
        *active -= 1;
        self.0.freed.notify_one();
    }
}

/// Client for the HTTP refinement service.
#[derive(Debug)]
pub struct RemoteRefiner {
    endpoint: String,
    agent: ureq::Agent,
    in_flight: InFlight,
}

impl RemoteRefiner {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self::with_max_in_flight(endpoint, timeout, DEFAULT_MAX_IN_FLIGHT)
    }

    pub fn with_max_in_flight(endpoint: impl Into<String>, timeout: Duration, max_in_flight: usize) -> Self {
        let endpoint = endpoint.into().trim_end_matches('/').to_string();
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint,
            agent,
            in_flight: InFlight::new(max_in_flight),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn transport_error(&self, err: ureq::Error) -> RefineError {
        match err {
            ureq::Error::Timeout(_) => RefineError::Timeout {
                endpoint: self.endpoint.clone(),
            },
            other => RefineError::Transport {
                endpoint: self.endpoint.clone(),
                reason: other.to_string(),
            },
        }
    }

    fn read_body(&self, response: &mut ureq::http::Response<ureq::Body>) -> Result<String, RefineError> {
        response
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_string()
            .map_err(|e| self.transport_error(e))
    }

    pub fn health(&self) -> Result<HealthInfo, RefineError> {
        let _permit = self.in_flight.acquire();
        let mut response = self
            .agent
            .get(format!("{}/health", self.endpoint))
            .call()
            .map_err(|e| self.transport_error(e))?;
        let status = response.status().as_u16();
        let body = self.read_body(&mut response)?;
        if status != 200 {
            return Err(RefineError::Status {
                status,
                message: body,
            });
        }
        serde_json::from_str(&body).map_err(|e| RefineError::MalformedResponse(e.to_string()))
    }
}

impl Refiner for RemoteRefiner {
    fn refine(&self, req: &RefineRequest) -> Result<Image, RefineError> {
        refine_remote(req, self)
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}

/// Sends `req` to the service behind `client` and validates the reply's shape.
pub fn refine_remote(req: &RefineRequest, client: &RemoteRefiner) -> Result<Image, RefineError> {
    validate_strength(req.strength)?;
    let body = serde_json::to_string(&RefineBody {
        image_png_b64: encode_png_b64(&req.image)?,
        prompt: req.prompt.render(),
        strength: req.strength,
        seed: req.seed,
    })
    .map_err(|e| RefineError::InvalidRequest(e.to_string()))?;

    let _permit = client.in_flight.acquire();
    let mut response = client
        .agent
        .post(format!("{}/refine", client.endpoint))
        .header("content-type", "application/json")
        .send(body)
        .map_err(|e| client.transport_error(e))?;
    let status = response.status().as_u16();
    let text = client.read_body(&mut response)?;
    if status != 200 {
        let message = serde_json::from_str::<ErrorReply>(&text)
            .map(|r| r.error)
            .unwrap_or(text);
        return Err(RefineError::Status { status, message });
    }
    let reply: RefineReply =
        serde_json::from_str(&text).map_err(|e| RefineError::MalformedResponse(e.to_string()))?;
    let mut image = decode_png_b64(&reply.image_png_b64)?;
    if image.width() != req.image.width() || image.height() != req.image.height() {
        return Err(RefineError::DimensionMismatch {
            width: req.image.width(),
            height: req.image.height(),
            channels: req.image.channels(),
            got_width: image.width(),
            got_height: image.height(),
            got_channels: image.channels(),
        });
    }
    if image.channels() != req.image.channels() {
        image = image
            .with_channels(req.image.channels())
            .map_err(|e| RefineError::MalformedResponse(e.to_string()))?;
    }
    Ok(image)
}
