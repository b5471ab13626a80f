//! Blocking client for ldcube model servers.
//!
//! The wire protocol carries one input point per request, so batch
//! evaluation is client-side concurrency: a bounded pool of worker
//! threads claims input rows, issues requests, and writes results back
//! into their original positions. Completion order never affects output
//! order.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use ndarray::Array2;
use serde::Deserialize;

use ldcube_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Additional attempts after the first failure.
    pub count: u32,
    /// Sleep before retry k is backoff * k.
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            count: 2,
            backoff: Duration::from_millis(100),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub model_name: String,
    pub timeout: Duration,
    pub max_concurrent_requests: usize,
    pub retry: RetryPolicy,
}

impl ModelEndpoint {
    pub fn new(base_url: &str, model_name: &str) -> Self {
        ModelEndpoint {
            base_url: base_url.trim_end_matches('/').to_string(),
            model_name: model_name.to_string(),
            timeout: Duration::from_secs(30),
            max_concurrent_requests: 4,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.max_concurrent_requests = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_concurrent_requests < 1 {
            return Err(Error::InvalidConfig(
                "max_concurrent_requests must be at least 1".to_string(),
            ));
        }
        if self.timeout.is_zero() {
            return Err(Error::InvalidConfig("timeout must be positive".to_string()));
        }
        Ok(())
    }

    fn client(&self) -> Result<reqwest::blocking::Client> {
        reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| Error::Transport(format!("building HTTP client: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelInfo {
    pub input_sizes: Vec<usize>,
    pub output_sizes: Vec<usize>,
}

impl ModelInfo {
    pub fn input_dimension(&self) -> usize {
        self.input_sizes.iter().sum()
    }

    pub fn output_dimension(&self) -> usize {
        self.output_sizes.iter().sum()
    }
}

fn excerpt(text: &str) -> String {
    let flat = text.trim().replace('\n', " ");
    if flat.len() > 200 {
        format!("{}...", &flat[..200])
    } else {
        flat
    }
}

fn get_sizes(
    client: &reqwest::blocking::Client,
    endpoint: &ModelEndpoint,
    route: &str,
    key: &str,
) -> Result<Vec<usize>> {
    let url = format!("{}/{route}", endpoint.base_url);
    let response = client
        .get(&url)
        .json(&serde_json::json!({ "name": endpoint.model_name }))
        .send()
        .map_err(|e| Error::Transport(format!("GET {url}: {e}")))?;
    let status = response.status();
    let text = response
        .text()
        .map_err(|e| Error::Transport(format!("GET {url}: {e}")))?;
    if !status.is_success() {
        return Err(Error::Protocol(format!(
            "GET {url} returned {status}: {}",
            excerpt(&text)
        )));
    }
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Protocol(format!("GET {url}: invalid JSON ({e}): {}", excerpt(&text))))?;
    let sizes = value.get(key).ok_or_else(|| {
        Error::Protocol(format!(
            "GET {url}: response is missing {key:?}: {}",
            excerpt(&text)
        ))
    })?;
    let sizes: Vec<usize> = serde_json::from_value(sizes.clone())
        .map_err(|e| Error::Protocol(format!("GET {url}: bad {key:?} ({e})")))?;
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::Protocol(format!("GET {url}: zero entry in {key:?}")));
    }
    Ok(sizes)
}

/// Fetches the model's declared input and output sizes.
pub fn fetch_info(endpoint: &ModelEndpoint) -> Result<ModelInfo> {
    endpoint.validate()?;
    let client = endpoint.client()?;
    Ok(ModelInfo {
        input_sizes: get_sizes(&client, endpoint, "GetInputSizes", "inputSizes")?,
        output_sizes: get_sizes(&client, endpoint, "GetOutputSizes", "outputSizes")?,
    })
}

#[derive(Deserialize)]
struct EvaluateResponse {
    output: Vec<Vec<f64>>,
}

fn evaluate_one(
    client: &reqwest::blocking::Client,
    endpoint: &ModelEndpoint,
    input: &[f64],
    output_dim: usize,
) -> Result<Vec<f64>> {
    let url = format!("{}/Evaluate", endpoint.base_url);
    let body = serde_json::json!({
        "name": endpoint.model_name,
        "input": [input],
        "config": {}
    });
    let mut attempt = 0;
    loop {
        attempt += 1;
        let outcome = (|| -> Result<Vec<f64>> {
            let response = client
                .post(&url)
                .json(&body)
                .send()
                .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
            let status = response.status();
            let text = response
                .text()
                .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
            if !status.is_success() {
                return Err(Error::Protocol(format!(
                    "POST {url} returned {status}: {}",
                    excerpt(&text)
                )));
            }
            let parsed: EvaluateResponse = serde_json::from_str(&text).map_err(|e| {
                Error::Protocol(format!("POST {url}: bad response ({e}): {}", excerpt(&text)))
            })?;
            let row: Vec<f64> = parsed.output.into_iter().flatten().collect();
            if row.len() != output_dim {
                return Err(Error::Protocol(format!(
                    "POST {url}: expected {output_dim} output values, got {}",
                    row.len()
                )));
            }
            Ok(row)
        })();
        match outcome {
            Ok(row) => return Ok(row),
            Err(_) if attempt <= endpoint.retry.count => {
                std::thread::sleep(endpoint.retry.backoff * attempt);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Evaluates every input row remotely, one request per row, with up to
/// `max_concurrent_requests` requests in flight. Output row i always
/// corresponds to input row i; the first row that still fails after
/// retries aborts the whole batch.
pub fn evaluate_remote(endpoint: &ModelEndpoint, inputs: &Array2<f64>) -> Result<Array2<f64>> {
    endpoint.validate()?;
    let n = inputs.nrows();
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let info = fetch_info(endpoint)?;
    if inputs.ncols() != info.input_dimension() {
        return Err(Error::DimensionMismatch {
            context: format!("inputs for model {:?}", endpoint.model_name),
            expected: info.input_dimension(),
            actual: inputs.ncols(),
        });
    }
    let q = info.output_dimension();
    let client = endpoint.client()?;
    let next_row = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let rows: Vec<Mutex<Vec<f64>>> = (0..n).map(|_| Mutex::new(Vec::new())).collect();

    let workers = endpoint.max_concurrent_requests.min(n);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::SeqCst) {
                    return;
                }
                let i = next_row.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    return;
                }
                let input = inputs.row(i);
                let input = input.as_slice().expect("contiguous row");
                match evaluate_one(&client, endpoint, input, q) {
                    Ok(row) => *rows[i].lock().expect("row lock") = row,
                    Err(e) => {
                        let mut slot = first_error.lock().expect("error lock");
                        if slot.is_none() {
                            *slot = Some(Error::Transport(format!("input row {i}: {e}")));
                        }
                        failed.store(true, Ordering::SeqCst);
                        return;
                    }
                }
            });
        }
    });

    if let Some(e) = first_error.into_inner().expect("error lock") {
        return Err(e);
    }
    let mut output = Array2::zeros((n, q));
    for (i, row) in rows.into_iter().enumerate() {
        let row = row.into_inner().expect("row lock");
        for (j, v) in row.into_iter().enumerate() {
            output[(i, j)] = v;
        }
    }
    Ok(output)
}
