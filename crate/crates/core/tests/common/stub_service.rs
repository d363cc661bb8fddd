//! In-process HTTP service speaking the refinement wire contract, for tests.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgdmix::refinement::{decode_png_b64, encode_png_b64, ErrorReply, RefineBody, RefineReply};
use sgdmix::Image;
use tiny_http::{Header, Method, Response, Server};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    /// Strength 0 echoes the input bytes; otherwise seeded +-8 perturbation.
    Stub,
    /// Returns a 1x1 image.
    WrongDimensions,
    /// Always 500.
    BackendFailure,
    /// 200 with a body that is not JSON.
    Garbage,
    /// Sleeps before answering like `Stub`.
    Slow(u64),
}

pub struct StubService {
    pub endpoint: String,
    pub max_concurrent: Arc<AtomicUsize>,
    pub requests: Arc<AtomicUsize>,
    server: Arc<Server>,
}

impl Drop for StubService {
    fn drop(&mut self) {
        self.server.unblock();
    }
}

fn json(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body)
        .with_status_code(status)
        .with_header(Header::from_bytes("Content-Type", "application/json").unwrap())
}

fn perturb(img: &Image, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| (i16::from(v) + rng.random_range(-8i16..=8)).clamp(0, 255) as u8)
        .collect();
    Image::new(img.width(), img.height(), img.channels(), data).unwrap()
}

fn handle_refine(body: &str, behavior: Behavior) -> (u16, String) {
    let req: RefineBody = match serde_json::from_str(body) {
        Ok(req) => req,
        Err(e) => return (400, serde_json::to_string(&ErrorReply { error: e.to_string() }).unwrap()),
    };
    if !(0.0..=1.0).contains(&req.strength) {
        let error = format!("strength {} outside [0, 1]", req.strength);
        return (400, serde_json::to_string(&ErrorReply { error }).unwrap());
    }
    let img = match decode_png_b64(&req.image_png_b64) {
        Ok(img) => img,
        Err(e) => return (422, serde_json::to_string(&ErrorReply { error: e.to_string() }).unwrap()),
    };
    let reply = match behavior {
        Behavior::BackendFailure => return (500, "backend exploded".into()),
        Behavior::Garbage => return (200, "<html>not json</html>".into()),
        Behavior::WrongDimensions => encode_png_b64(&Image::filled(1, 1, &[0, 0, 0]).unwrap()).unwrap(),
        Behavior::Stub | Behavior::Slow(_) => {
            if let Behavior::Slow(ms) = behavior {
                thread::sleep(Duration::from_millis(ms));
            }
            if req.strength == 0.0 {
                req.image_png_b64
            } else {
                encode_png_b64(&perturb(&img, req.seed)).unwrap()
            }
        }
    };
    (200, serde_json::to_string(&RefineReply { image_png_b64: reply }).unwrap())
}

pub fn spawn(behavior: Behavior) -> StubService {
    let server = Arc::new(Server::http("127.0.0.1:0").unwrap());
    let port = server.server_addr().to_ip().unwrap().port();
    let max_concurrent = Arc::new(AtomicUsize::new(0));
    let requests = Arc::new(AtomicUsize::new(0));
    let active = Arc::new(AtomicUsize::new(0));
    {
        let server = Arc::clone(&server);
        let max_concurrent = Arc::clone(&max_concurrent);
        let requests = Arc::clone(&requests);
        thread::spawn(move || {
            for mut request in server.incoming_requests() {
                let max_concurrent = Arc::clone(&max_concurrent);
                let requests = Arc::clone(&requests);
                let active = Arc::clone(&active);
                thread::spawn(move || {
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    max_concurrent.fetch_max(now, Ordering::SeqCst);
                    requests.fetch_add(1, Ordering::SeqCst);
                    let mut body = String::new();
                    let _ = request.as_reader().read_to_string(&mut body);
                    let (status, text) = match (request.method(), request.url()) {
                        (Method::Get, "/health") => (200, r#"{"mode":"stub","denoise_steps":0,"guidance_scale":0.0}"#.to_string()),
                        (_, "/health") => (405, r#"{"error":"method not allowed"}"#.to_string()),
                        (Method::Post, "/refine") => handle_refine(&body, behavior),
                        _ => (404, r#"{"error":"not found"}"#.to_string()),
                    };
                    active.fetch_sub(1, Ordering::SeqCst);
                    let _ = request.respond(json(status, text));
                });
            }
        });
    }
    StubService {
        endpoint: format!("http://127.0.0.1:{port}"),
        max_concurrent,
        requests,
        server,
    }
}
