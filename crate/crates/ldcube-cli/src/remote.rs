//! Integrand backed by a remote model server.

use ndarray::Array2;

use ldcube_client::{evaluate_remote, fetch_info, ModelEndpoint, ModelInfo};
use ldcube_core::integrands::Integrand;
use ldcube_core::Result;

pub struct RemoteIntegrand {
    endpoint: ModelEndpoint,
    info: ModelInfo,
}

impl RemoteIntegrand {
    /// Performs the handshake so dimension errors surface before any
    /// evaluation starts.
    pub fn connect(endpoint: ModelEndpoint) -> Result<Self> {
        let info = fetch_info(&endpoint)?;
        Ok(RemoteIntegrand { endpoint, info })
    }

    pub fn input_dimension(&self) -> usize {
        self.info.input_dimension()
    }
}

impl Integrand for RemoteIntegrand {
    fn output_dim(&self) -> usize {
        self.info.output_dimension()
    }

    fn evaluate_row(&self, sample: &[f64]) -> Result<Vec<f64>> {
        let mut inputs = Array2::zeros((1, sample.len()));
        for (j, &v) in sample.iter().enumerate() {
            inputs[(0, j)] = v;
        }
        let output = evaluate_remote(&self.endpoint, &inputs)?;
        Ok(output.row(0).to_vec())
    }

    fn evaluate_batch(&self, samples: &Array2<f64>) -> Result<Array2<f64>> {
        evaluate_remote(&self.endpoint, samples)
    }
}
