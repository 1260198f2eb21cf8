//! Command-line interface of the `zts` binary.

use crate::config::ServiceConfig;
use crate::eval::{eval_in_process, eval_remote, render_human, EvalOutput};
use crate::harness::{compare_reports, run_scenarios, write_reports, LatencyReport, ScenarioFile, Target};
use crate::http::{ClientTransport, Endpoint};
use crate::node::{build_pdp, start_pdp, start_store};
use crate::tls::{self, DevPki, Identity};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::net::SocketAddr;
use std::path::PathBuf;
use zts_core::pdp::ErrorCode;

#[derive(Debug, Parser)]
#[command(name = "zts", version, about = "Score-based zero trust decision point, attribute store and load harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenarios of a scenario file against a decision point.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        target: SocketAddr,
        /// Directory for report files and plot.csv.
        #[arg(long, default_value = "reports")]
        out: PathBuf,
        #[command(flatten)]
        client: ClientArgs,
    },
    /// Compare two report files.
    Compare { a: PathBuf, b: PathBuf },
    /// Decide one request and print the decision with its trace.
    Eval {
        /// JSON request document.
        request: PathBuf,
        /// Remote decision point; in-process (from --config) when absent.
        #[arg(long)]
        target: Option<SocketAddr>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        client: ClientArgs,
    },
    /// Serve the decision point.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Serve the network attribute store.
    Store {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a development PKI (CA, server, and pep/pdp/admin clients).
    Pki {
        #[arg(long, default_value = "pki")]
        out: PathBuf,
    },
}

/// How the harness authenticates to a target.
#[derive(Debug, Clone, Args)]
pub struct ClientArgs {
    /// CA certificate that issued the target's certificate.
    #[arg(long)]
    pub ca: Option<PathBuf>,
    /// Enforcement-point client certificate and key.
    #[arg(long)]
    pub cert: Option<PathBuf>,
    #[arg(long)]
    pub key: Option<PathBuf>,
    /// Admin client certificate and key; defaults to --cert/--key.
    #[arg(long)]
    pub admin_cert: Option<PathBuf>,
    #[arg(long)]
    pub admin_key: Option<PathBuf>,
    /// Name the target's certificate must carry.
    #[arg(long, default_value = "localhost")]
    pub server_name: String,
}

impl ClientArgs {
    pub fn target(&self, addr: SocketAddr) -> Result<Target> {
        let ca_path = self.ca.as_ref().context("--ca is required")?;
        let ca = std::fs::read_to_string(ca_path).with_context(|| format!("reading {}", ca_path.display()))?;
        let pep = Identity::load(
            self.cert.as_ref().context("--cert is required")?,
            self.key.as_ref().context("--key is required")?,
        )?;
        let admin = match (&self.admin_cert, &self.admin_key) {
            (Some(c), Some(k)) => Identity::load(c, k)?,
            (None, None) => pep.clone(),
            _ => bail!("--admin-cert and --admin-key must be given together"),
        };
        let endpoint = |id: &Identity| -> Result<Endpoint> {
            Ok(Endpoint { addr, transport: ClientTransport::tls(tls::client_config(&ca, Some(id))?, &self.server_name)? })
        };
        Ok(Target { pep: endpoint(&pep)?, admin: endpoint(&admin)? })
    }
}

/// Exit status of a finished command.
pub type ExitCode = i32;

pub async fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { scenario, target, out, client } => {
            let file = ScenarioFile::load(&scenario)?;
            let seed = file.load_seed()?;
            let target = client.target(target)?;
            let scenarios = file.all();
            let reports = run_scenarios(&scenarios, &target, &seed, |r| {
                println!(
                    "{:<44} samples={:<7} errors={:<4} p25={:>9.1}us median={:>9.1}us p75={:>9.1}us",
                    r.scenario.name, r.samples, r.errors, r.p25_us, r.median_us, r.p75_us
                );
            })
            .await?;
            for path in write_reports(&out, &reports)? {
                println!("wrote {}", path.display());
            }
            let errors: usize = reports.iter().map(|r| r.errors).sum();
            Ok(if errors == 0 { 0 } else { 1 })
        }
        Command::Compare { a, b } => {
            let c = compare_reports(&LatencyReport::load(a)?, &LatencyReport::load(b)?)?;
            println!("{c}");
            Ok(0)
        }
        Command::Eval { request, target, config, client } => {
            let body = std::fs::read(&request).with_context(|| format!("reading {}", request.display()))?;
            let out: EvalOutput = match target {
                Some(addr) => eval_remote(&client.target(addr)?, body.into()).await?,
                None => {
                    let cfg = ServiceConfig::load(config.as_deref())?;
                    eval_in_process(&*build_pdp(&cfg).await?, &body).await
                }
            };
            print!("{}", render_human(&out));
            println!("{}", out.to_json());
            Ok(if out.response.error_code == Some(ErrorCode::MalformedRequest) { 2 } else { 0 })
        }
        Command::Serve { config } => {
            let cfg = ServiceConfig::load(config.as_deref())?;
            let (pdp, handle) = start_pdp(&cfg).await?;
            eprintln!("decision point listening on {} ({} policies)", handle.addr, pdp.policies().list().len());
            tokio::signal::ctrl_c().await?;
            handle.shutdown();
            Ok(0)
        }
        Command::Store { config } => {
            let cfg = ServiceConfig::load(config.as_deref())?;
            let (store, handle) = start_store(&cfg).await?;
            eprintln!("attribute store listening on {} ({} entries)", handle.addr, store.health().entries);
            tokio::signal::ctrl_c().await?;
            handle.shutdown();
            Ok(0)
        }
        Command::Pki { out } => {
            DevPki::generate()?.write_to(&out)?;
            println!("wrote development PKI to {}", out.display());
            Ok(0)
        }
    }
}
