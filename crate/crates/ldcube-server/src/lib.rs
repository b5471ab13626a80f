//! JSON-over-HTTP model server speaking a minimal UM-Bridge-compatible
//! subset: POST /Evaluate plus GET /GetInputSizes and /GetOutputSizes.
//!
//! The server exists so the client and CLI can be exercised against a
//! real HTTP boundary. Hosted models must be pure; requests are handled
//! concurrently and one request evaluates exactly one input point.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Json, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use ldcube_core::beam::{beam_problem, BeamConfig};
use ldcube_core::integrands::Integrand;
use ldcube_core::{Error, Result};

/// A named forward model served over HTTP. The protocol carries one
/// input vector and one output vector per request.
#[derive(Clone)]
pub struct HostedModel {
    pub name: String,
    pub input_size: usize,
    integrand: Arc<dyn Integrand>,
}

impl HostedModel {
    pub fn new(name: &str, input_size: usize, integrand: Arc<dyn Integrand>) -> Self {
        HostedModel {
            name: name.to_string(),
            input_size,
            integrand,
        }
    }

    /// The cantilevered beam: three log-stiffness constants in, the
    /// deflection at the N nodes out.
    pub fn beam(config: BeamConfig) -> Self {
        let problem = beam_problem(config);
        HostedModel {
            name: "beam".to_string(),
            input_size: problem.dimension,
            integrand: problem.integrand,
        }
    }

    pub fn output_size(&self) -> usize {
        self.integrand.output_dim()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    /// Artificial per-request delay before evaluation, for timing
    /// experiments that emulate a slow forward model.
    pub delay: Option<Duration>,
}

struct AppState {
    models: HashMap<String, HostedModel>,
    delay: Option<Duration>,
}

#[derive(Deserialize)]
struct EvaluateRequest {
    name: String,
    input: Vec<Vec<f64>>,
    #[serde(default)]
    #[allow(dead_code)]
    config: serde_json::Value,
}

#[derive(Serialize)]
struct EvaluateResponse {
    output: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct NameRequest {
    name: Option<String>,
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

fn bad_request(message: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(ErrorBody { error: message })).into_response()
}

fn lookup<'a>(
    state: &'a AppState,
    body: &Bytes,
) -> std::result::Result<&'a HostedModel, Response> {
    let requested = if body.is_empty() {
        None
    } else {
        serde_json::from_slice::<NameRequest>(body)
            .map_err(|e| bad_request(format!("malformed request body: {e}")))?
            .name
    };
    let name = match requested {
        Some(name) => name,
        // An omitted name is unambiguous when exactly one model is up.
        None if state.models.len() == 1 => {
            state.models.keys().next().cloned().expect("one model")
        }
        None => {
            return Err(bad_request(format!(
                "request names no model and {} are hosted",
                state.models.len()
            )))
        }
    };
    state
        .models
        .get(&name)
        .ok_or_else(|| bad_request(format!("unknown model {name:?}")))
}

async fn evaluate(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let request: EvaluateRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(format!("malformed request body: {e}")),
    };
    let Some(model) = state.models.get(&request.name) else {
        return bad_request(format!("unknown model {:?}", request.name));
    };
    if request.input.len() != 1 || request.input[0].len() != model.input_size {
        return bad_request(format!(
            "model {:?} takes one input vector of size {}",
            request.name, model.input_size
        ));
    }
    if let Some(delay) = state.delay {
        tokio::time::sleep(delay).await;
    }
    match model.integrand.evaluate_row(&request.input[0]) {
        Ok(row) => Json(EvaluateResponse { output: vec![row] }).into_response(),
        Err(e) => bad_request(format!("evaluation failed: {e}")),
    }
}

async fn get_input_sizes(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    match lookup(&state, &body) {
        Ok(model) => Json(serde_json::json!({ "inputSizes": [model.input_size] })).into_response(),
        Err(response) => response,
    }
}

async fn get_output_sizes(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    match lookup(&state, &body) {
        Ok(model) => {
            Json(serde_json::json!({ "outputSizes": [model.output_size()] })).into_response()
        }
        Err(response) => response,
    }
}

/// A running server. Dropping the handle shuts the server down; call
/// `shutdown` to do so explicitly and wait for the runtime to finish.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    join: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

/// Starts the server on the given address (port 0 picks a free port)
/// and returns once it accepts connections. The server runs on its own
/// runtime in a background thread.
pub fn serve_models(
    models: Vec<HostedModel>,
    addr: SocketAddr,
    options: ServerOptions,
) -> Result<ServerHandle> {
    if models.is_empty() {
        return Err(Error::InvalidConfig("no models to serve".to_string()));
    }
    let mut by_name = HashMap::new();
    for model in models {
        if by_name.insert(model.name.clone(), model).is_some() {
            return Err(Error::InvalidConfig(
                "duplicate model names in one server".to_string(),
            ));
        }
    }
    let state = Arc::new(AppState {
        models: by_name,
        delay: options.delay,
    });
    let app = Router::new()
        .route("/Evaluate", post(evaluate))
        .route("/GetInputSizes", get(get_input_sizes))
        .route("/GetOutputSizes", get(get_output_sizes))
        .with_state(state);

    let (ready_tx, ready_rx) = mpsc::channel::<std::result::Result<SocketAddr, String>>();
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let join = std::thread::spawn(move || {
        let runtime = match tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
        {
            Ok(rt) => rt,
            Err(e) => {
                let _ = ready_tx.send(Err(format!("runtime: {e}")));
                return;
            }
        };
        runtime.block_on(async move {
            let listener = match tokio::net::TcpListener::bind(addr).await {
                Ok(l) => l,
                Err(e) => {
                    let _ = ready_tx.send(Err(format!("bind {addr}: {e}")));
                    return;
                }
            };
            let local = listener.local_addr().expect("bound socket has an address");
            let _ = ready_tx.send(Ok(local));
            let served = axum::serve(listener, app).with_graceful_shutdown(async {
                let _ = stop_rx.await;
            });
            if let Err(e) = served.await {
                eprintln!("model server stopped: {e}");
            }
        });
    });
    match ready_rx.recv() {
        Ok(Ok(local)) => Ok(ServerHandle {
            addr: local,
            stop: Some(stop_tx),
            join: Some(join),
        }),
        Ok(Err(message)) => {
            let _ = join.join();
            Err(Error::Transport(message))
        }
        Err(_) => {
            let _ = join.join();
            Err(Error::Transport("server thread died during startup".to_string()))
        }
    }
}

/// Serves on 127.0.0.1 with an ephemeral port.
pub fn serve_loopback(models: Vec<HostedModel>, options: ServerOptions) -> Result<ServerHandle> {
    serve_models(models, SocketAddr::from(([127, 0, 0, 1], 0)), options)
}
