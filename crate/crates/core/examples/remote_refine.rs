//! Talking to a refinement service. Starts a tiny local stand-in that echoes
//! the image at strength 0 and inverts it otherwise, unless an endpoint is
//! given.
//!
//! cargo run --example remote_refine [-- http://host:port]

use std::time::Duration;

use sgdmix::refinement::{decode_png_b64, encode_png_b64, RefineBody, RefineReply};
use sgdmix::{Image, PromptSpec, RefineRequest, Refiner, RemoteRefiner};

fn serve_locally() -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", server.server_addr());
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            let _ = req.as_reader().read_to_string(&mut body);
            let reply = match req.url() {
                "/health" => r#"{"mode":"example"}"#.to_string(),
                _ => {
                    let body: RefineBody = serde_json::from_str(&body).unwrap();
                    let img = decode_png_b64(&body.image_png_b64).unwrap();
                    let out = if body.strength == 0.0 {
                        img
                    } else {
                        let data = img.data().iter().map(|v| 255 - v).collect();
                        Image::new(img.width(), img.height(), img.channels(), data).unwrap()
                    };
                    serde_json::to_string(&RefineReply { image_png_b64: encode_png_b64(&out).unwrap() }).unwrap()
                }
            };
            let _ = req.respond(tiny_http::Response::from_string(reply));
        }
    });
    endpoint
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let endpoint = std::env::args().nth(1).unwrap_or_else(serve_locally);
    let client = RemoteRefiner::new(&endpoint, Duration::from_secs(30));
    println!("{endpoint}: mode {}", client.health()?.mode);

    let img = Image::filled(16, 16, &[10, 120, 240])?;
    let prompt = PromptSpec::new("<class_3>", "bird");
    println!("prompt: {}", prompt.render());
    for strength in [0.0, 0.7] {
        let out = client.refine(&RefineRequest::new(img.clone(), prompt.clone(), strength, 1)?)?;
        println!("strength {strength}: first pixel {:?} -> {:?}", img.pixel(0, 0), out.pixel(0, 0));
    }
    Ok(())
}
