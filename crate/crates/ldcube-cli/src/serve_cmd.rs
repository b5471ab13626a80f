//! cmd_serve: host bundled forward models over HTTP until interrupted.

use std::net::{IpAddr, SocketAddr};
use std::time::Duration;

use clap::Args;

use ldcube_core::beam::BeamConfig;
use ldcube_server::{serve_models, HostedModel, ServerOptions};

use crate::CliError;

#[derive(Args)]
pub struct ServeArgs {
    /// Model to host (bundled: beam)
    #[arg(long, default_value = "beam")]
    pub model: String,

    /// Interface to bind
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,

    /// Port to bind (0 picks a free port)
    #[arg(long, default_value_t = 4242)]
    pub port: u16,

    /// Artificial per-request delay in milliseconds
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,

    /// Constant beam load q0
    #[arg(long)]
    pub load: Option<f64>,

    /// Number of beam grid nodes
    #[arg(long)]
    pub nodes: Option<usize>,
}

pub fn run(args: ServeArgs) -> Result<(), CliError> {
    if args.model != "beam" {
        return Err(CliError::usage(format!(
            "unknown model {:?} (bundled models: beam)",
            args.model
        )));
    }
    let mut config = BeamConfig::default();
    if let Some(q0) = args.load {
        config = config.with_load(q0);
    }
    if let Some(nodes) = args.nodes {
        config.nodes = nodes;
    }
    config
        .validate()
        .map_err(|e| CliError::usage(format!("{e}")))?;

    let ip: IpAddr = args
        .host
        .parse()
        .map_err(|_| CliError::usage(format!("invalid host address {:?}", args.host)))?;
    let addr = SocketAddr::new(ip, args.port);
    let options = ServerOptions {
        delay: (args.delay_ms > 0).then(|| Duration::from_millis(args.delay_ms)),
    };
    let handle = serve_models(vec![HostedModel::beam(config)], addr, options)
        .map_err(|e| CliError::evaluation(format!("{e}")))?;
    eprintln!("listening on {} (model beam, input 3)", handle.base_url());

    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::evaluation(format!("cannot start signal listener: {e}")))?;
    runtime
        .block_on(tokio::signal::ctrl_c())
        .map_err(|e| CliError::evaluation(format!("cannot wait for interrupt: {e}")))?;
    // Best-effort: whoever read the address line may be gone by now.
    use std::io::Write;
    let _ = writeln!(std::io::stderr(), "interrupt received, shutting down");
    handle.shutdown();
    Ok(())
}
