mod common;

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::time::Instant;

use common::{random_image, rel_err};
use illusion_core::patching::{sample_patch, PatchRect};
use illusion_core::raster::Image;
use illusion_core::scoring::wire::{LoraStepRequest, RunRegistration, WireTensor};
use illusion_core::scoring::{
    l2_score, procedural_score, score_checked, supersampled_l2_score, L2Provider, ProceduralProvider, RemoteConfig,
    RemoteScorer, ScoreError, ScoreProvider, ScoreRequest, StubServer, TargetImageSpec,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn request<S: illusion_core::Scalar>(patch: Image<S>, rect: PatchRect, full: usize) -> ScoreRequest<S> {
    ScoreRequest {
        run_id: "r".into(),
        view_id: 0,
        prompt_id: 0,
        step: 3,
        timestep: 0.4,
        patch,
        patch_rect: rect,
        full_resolution: full,
    }
}

/// `w |patch - crop|^2 / n`, straight from the definition.
fn l2_loss(patch: &Image<f64>, target: &Image<f64>, rect: &PatchRect, w: f64) -> f64 {
    let n = (patch.width * patch.height) as f64;
    let mut sum = 0.0;
    for y in 0..patch.height {
        for x in 0..patch.width {
            let (p, t) = (patch.get(x, y), target.get(rect.x0 + x, rect.y0 + y));
            sum += (0..3).map(|c| (p[c] - t[c]).powi(2)).sum::<f64>();
        }
    }
    w * sum / n
}

#[test]
fn l2_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let full = 40;
    let target: Image<f64> = random_image(&mut rng, full, full, 0.0, 1.0);
    let spec = TargetImageSpec { target: target.clone(), weight: 0.7 };
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let rect = sample_patch(full, full, 8, &mut rng).unwrap();
        let patch: Image<f64> = random_image(&mut rng, 8, 8, 0.0, 1.0);
        let resp = l2_score(&spec, &request(patch.clone(), rect, full)).unwrap();
        let (x, y, c) = (rng.random_range(0..8), rng.random_range(0..8), rng.random_range(0..3));
        let eps = 1e-4;
        let mut plus = patch.clone();
        let mut minus = patch.clone();
        let mut v = plus.get(x, y);
        v[c] += eps;
        plus.set(x, y, v);
        let mut v = minus.get(x, y);
        v[c] -= eps;
        minus.set(x, y, v);
        // quadratic loss: central differences are exact up to rounding
        let fd = (l2_loss(&plus, &target, &rect, 0.7) - l2_loss(&minus, &target, &rect, 0.7)) / (2.0 * eps);
        worst = worst.max(rel_err(resp.pixel_gradient.get(x, y)[c], fd));
        let reported = resp.diagnostics["loss"];
        assert!(rel_err(reported, l2_loss(&patch, &target, &rect, 0.7)) < 1e-12);
    }
    assert!(worst < 1e-6, "worst relative error {worst:e}");
}

#[test]
fn supersampling_a_linear_target_gives_the_footprint_average() {
    // f(u, v) = a + b u + c v in pixel units, stored at pixel centers i + 0.5
    let full = 32;
    let (a, b, c) = (0.1, 0.02, 0.01);
    let f = |u: f64, v: f64| a + b * u + c * v;
    let target = Image::<f64>::from_fn(full, full, |x, y| [f(x as f64 + 0.5, y as f64 + 0.5); 3]);
    let spec = TargetImageSpec { target, weight: 1.0 };
    let rect = PatchRect { x0: 9, y0: 5, size: 8 };
    let patch = Image::<f64>::filled(8, 8, [0.5; 3]);
    let resp = supersampled_l2_score(&spec, &request(patch, rect, full), 4).unwrap();
    let n = 64.0;
    let mut worst = 0.0f64;
    for y in 0..8 {
        for x in 0..8 {
            // average of f over [x0+x, x0+x+1] x [y0+y, y0+y+1], integrated by hand
            let (u0, v0) = ((rect.x0 + x) as f64, (rect.y0 + y) as f64);
            let avg = a + b * (u0 + 0.5) + c * (v0 + 0.5);
            let expected = 2.0 * (0.5 - avg) / n;
            worst = worst.max((resp.pixel_gradient.get(x, y)[0] - expected).abs() / expected.abs());
        }
    }
    assert!(worst < 1e-3, "worst relative error {worst:e}");
}

#[test]
fn procedural_is_l2_against_a_constant_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let color = [0.2, 0.9, 0.4];
    let rect = PatchRect { x0: 3, y0: 1, size: 8 };
    let patch: Image<f64> = random_image(&mut rng, 8, 8, 0.0, 1.0);
    let req = request(patch, rect, 16);
    let a = procedural_score(color, &req);
    let b = l2_score(&TargetImageSpec { target: Image::filled(16, 16, color), weight: 1.0 }, &req).unwrap();
    assert_eq!(a.pixel_gradient, b.pixel_gradient);
}

fn providers(full: usize, rng: &mut ChaCha8Rng) -> Vec<Box<dyn ScoreProvider<f64>>> {
    let target: Image<f64> = random_image(rng, full, full, 0.0, 1.0);
    let spec = TargetImageSpec { target, weight: 1.3 };
    vec![
        Box::new(L2Provider::single(0, spec.clone())),
        Box::new(L2Provider::single(0, spec).with_supersampling(5)),
        Box::new(ProceduralProvider { color: [0.3, 0.3, 0.8] }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn provider_output_matches_patch_shape(seed in any::<u64>(), size in 1usize..24, extra in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let full = size + extra;
        let rect = sample_patch(full, full, size, &mut rng).unwrap();
        let req = request(random_image::<f64, _>(&mut rng, size, size, -0.5, 1.5), rect, full);
        let before = req.clone();
        for mut p in providers(full, &mut rng) {
            let resp = score_checked(&mut p, &req).unwrap();
            prop_assert_eq!((resp.pixel_gradient.width, resp.pixel_gradient.height), (size, size));
            prop_assert!(resp.pixel_gradient.is_finite());
            prop_assert_eq!(&req, &before);
        }
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().new_agent()
}

fn post(url: &str, body: &Value) -> (u16, Value) {
    let mut resp = agent().post(url).send_json(body).unwrap();
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_json().unwrap_or(Value::Null))
}

fn registration(run_id: &str) -> Value {
    serde_json::to_value(RunRegistration {
        run_id: run_id.into(),
        prompts: vec![],
        guidance_scale: 7.5,
        lora_rank: 4,
        lora_learning_rate: 1e-4,
    })
    .unwrap()
}

fn score_body(run_id: &str, side: usize) -> Value {
    json!({
        "run_id": run_id,
        "view_id": 0,
        "prompt_id": 0,
        "step": 0,
        "timestep": 0.5,
        "patch": WireTensor::from_image(&Image::<f32>::filled(side, side, [0.5; 3])),
        "patch_rect": { "x0": 0, "y0": 0, "size": side },
        "full_resolution": side,
    })
}

#[test]
fn stub_protocol_contract() {
    let stub = StubServer::new(Box::new(ProceduralProvider { color: [0.1f32, 0.2, 0.3] }))
        .with_model_id("stub-model")
        .spawn(([127, 0, 0, 1], 0).into())
        .unwrap();
    let url = stub.url();

    let mut health = agent().get(format!("{url}/health")).call().unwrap();
    assert_eq!(health.status().as_u16(), 200);
    let health: Value = health.body_mut().read_json().unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["model_id"], "stub-model");

    let (status, body) = post(&format!("{url}/score"), &score_body("a", 8));
    assert_eq!(status, 404);
    assert_eq!(body["error"]["code"], "unknown_run");

    assert_eq!(post(&format!("{url}/register"), &registration("a")).0, 200);
    let (status, body) = post(&format!("{url}/register"), &registration("a"));
    assert_eq!((status, body["error"]["code"].as_str()), (409, Some("duplicate_run")));

    let (status, body) = post(&format!("{url}/score"), &score_body("a", 8));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["pixel_gradient"]["shape"], json!([8, 8, 3]));

    let (status, body) = post(&format!("{url}/score"), &score_body("a", 12));
    assert_eq!((status, body["error"]["code"].as_str()), (400, Some("bad_patch")));

    let (status, _) = post(&format!("{url}/score"), &json!({"run_id": "a"}));
    assert_eq!(status, 400);

    for expected in 1..=3u64 {
        let step = LoraStepRequest {
            run_id: "a".into(),
            patch: WireTensor::from_image(&Image::<f32>::zeros(8, 8)),
            prompt_id: 0,
            t: 0.3,
        };
        let (status, body) = post(&format!("{url}/lora_step"), &serde_json::to_value(step).unwrap());
        assert_eq!(status, 200);
        assert_eq!(body["step_count"], expected);
    }
    let (status, _) = post(
        &format!("{url}/lora_step"),
        &json!({"run_id": "nobody", "patch": WireTensor::from_image(&Image::<f32>::zeros(8, 8)), "prompt_id": 0, "t": 0.3}),
    );
    assert_eq!(status, 404);
    stub.shutdown();
}

#[test]
fn remote_client_matches_local_provider() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let target: Image<f32> = random_image(&mut rng, 48, 48, 0.0, 1.0);
    let spec = TargetImageSpec { target, weight: 1.0 };
    let stub = StubServer::new(Box::new(L2Provider::single(0, spec.clone()))).spawn(([127, 0, 0, 1], 0).into()).unwrap();
    let mut client = RemoteScorer::new(RemoteConfig { url: stub.url(), ..RemoteConfig::default() });
    for step in 0..10 {
        let rect = sample_patch(64, 64, 16, &mut rng).unwrap();
        let mut req = request(random_image::<f32, _>(&mut rng, 16, 16, 0.0, 1.0), rect, 64);
        req.step = step;
        let remote = ScoreProvider::<f32>::score(&mut client, &req).unwrap();
        let local = l2_score(&spec, &req).unwrap();
        assert_eq!(remote.pixel_gradient, local.pixel_gradient);
    }
    // a second run id registers on its own
    let mut req = request(Image::<f32>::zeros(8, 8), PatchRect::full(8), 8);
    req.run_id = "other".into();
    assert!(ScoreProvider::<f32>::score(&mut client, &req).is_ok());
}

/// Answers every request with `body` and a 200.
fn canned_server(body: String) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
            let mut sink = vec![0; len];
            let _ = reader.read_exact(&mut sink);
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    format!("http://{addr}")
}

#[test]
fn wrong_shape_from_server_is_a_validation_error() {
    let body = json!({
        "ok": true,
        "pixel_gradient": WireTensor::from_image(&Image::<f32>::zeros(4, 4)),
        "diagnostics": {},
    });
    let url = canned_server(body.to_string());
    let mut client = RemoteScorer::new(RemoteConfig { url, lora_steps: false, ..RemoteConfig::default() });
    let req = request(Image::<f32>::zeros(8, 8), PatchRect::full(8), 8);
    match ScoreProvider::<f32>::score(&mut client, &req) {
        Err(ScoreError::Validation(msg)) => assert!(msg.contains("4x4"), "{msg}"),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn unreachable_server_fails_after_three_attempts() {
    // bind then drop to get a port nothing listens on
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut client = RemoteScorer::new(RemoteConfig {
        url: format!("http://127.0.0.1:{port}"),
        ..RemoteConfig::default()
    });
    let req = request(Image::<f32>::zeros(8, 8), PatchRect::full(8), 8);
    let start = Instant::now();
    match ScoreProvider::<f32>::score(&mut client, &req) {
        Err(ScoreError::Unavailable(msg)) => assert!(msg.contains("after 3 attempts"), "{msg}"),
        other => panic!("expected unavailable, got {other:?}"),
    }
    // backoff of 200 ms then 400 ms between the three attempts
    assert!(start.elapsed().as_millis() >= 600);
}

#[test]
fn l2_provider_routes_by_view() {
    let mut targets = HashMap::new();
    targets.insert(2, TargetImageSpec { target: Image::<f64>::filled(8, 8, [1.0; 3]), weight: 1.0 });
    let mut p = L2Provider::new(targets);
    let mut req = request(Image::<f64>::zeros(8, 8), PatchRect::full(8), 8);
    req.view_id = 2;
    let g = p.score(&req).unwrap().pixel_gradient;
    assert!((g.get(0, 0)[0] + 2.0 / 64.0).abs() < 1e-15);
    req.view_id = 1;
    assert!(p.score(&req).is_err());
}
