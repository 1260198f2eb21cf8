//! Assembling and starting services: from a [`ServiceConfig`], or as a
//! self-contained local stack with a generated PKI.

use crate::config::{Deployment, PipBackend, ServiceConfig, Transport};
use crate::http::{ClientTransport, Endpoint, ServerHandle, ServerTransport};
use crate::service::PdpService;
use crate::store::{RemoteStore, StoreService};
use crate::tls::{self, DevPki};
use anyhow::{Context, Result};
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;
use zts_core::pip::BackingStore;
use zts_core::{default_catalog, Catalog, CacheMode, Engines, MemoryStore, Pdp, PdpConfig, PipStore, PolicyStore, SeedData};

fn load_catalog(cfg: &ServiceConfig) -> Result<Arc<Catalog>> {
    let catalog = match &cfg.pdp.catalog {
        Some(path) => Catalog::load(path)?,
        None => default_catalog()?,
    };
    Ok(Arc::new(catalog))
}

fn load_seed(cfg: &ServiceConfig) -> Result<Option<SeedData>> {
    cfg.pip.seed.as_ref().map(SeedData::load).transpose().context("loading seed data")
}

/// Builds the decision point described by `cfg`. With a remote backend the
/// store's seed digest is read once at startup and reported in health.
pub async fn build_pdp(cfg: &ServiceConfig) -> Result<Arc<Pdp>> {
    let catalog = load_catalog(cfg)?;
    let policies = match &cfg.pdp.policies {
        Some(path) => PolicyStore::load(catalog, path)?,
        None => PolicyStore::new(catalog),
    };
    let (backing, seed_hash): (Arc<dyn BackingStore>, Option<String>) = match cfg.pip.backend {
        PipBackend::Memory => {
            let seed = load_seed(cfg)?;
            let mut mem = seed.as_ref().map(MemoryStore::from_seed).unwrap_or_default();
            if cfg.pip.latency_ms > 0 {
                mem = mem.with_latency(Duration::from_millis(cfg.pip.latency_ms));
            }
            (Arc::new(mem), seed.map(|s| s.digest()))
        }
        PipBackend::Remote => {
            let addr = cfg.pip.remote.context("pip.remote is required")?;
            let remote = RemoteStore::new(cfg.endpoint(addr)?);
            let health = remote.health().await.with_context(|| format!("attribute store at {addr} unreachable"))?;
            (Arc::new(remote), health.seed_hash)
        }
    };
    let pip = PipStore::new(backing, cfg.pdp.cache_mode);
    let config = PdpConfig { attribute_timeout: cfg.attribute_timeout(), audit_capacity: cfg.pdp.audit_capacity };
    let mut pdp = Pdp::new(Arc::new(policies), Arc::new(pip), config).with_engines(Engines::only(&cfg.pdp.engines));
    if let Some(hash) = seed_hash {
        pdp = pdp.with_seed_hash(hash);
    }
    Ok(Arc::new(pdp))
}

/// Starts the decision point service on `cfg.bind`.
pub async fn start_pdp(cfg: &ServiceConfig) -> Result<(Arc<Pdp>, ServerHandle)> {
    cfg.validate()?;
    let pdp = build_pdp(cfg).await?;
    let handle = PdpService::new(pdp.clone()).serve(cfg.bind, cfg.server_transport()?).await?;
    Ok((pdp, handle))
}

/// Starts the attribute store service on `cfg.store.bind`.
pub async fn start_store(cfg: &ServiceConfig) -> Result<(Arc<StoreService>, ServerHandle)> {
    if cfg.transport == Transport::Plaintext {
        anyhow::bail!("the network attribute store always requires mtls transport");
    }
    let seed = load_seed(cfg)?.unwrap_or_default();
    let service = Arc::new(StoreService::from_seed(&seed));
    let handle = service.clone().serve(cfg.store.bind, cfg.server_transport()?).await?;
    Ok((service, handle))
}

/// Options for [`LocalStack::start`].
#[derive(Debug)]
pub struct StackOptions {
    pub seed: SeedData,
    pub policies: PolicyStore,
    pub cache_mode: CacheMode,
    pub pdp: PdpConfig,
    /// Artificial latency added by the attribute store per batch.
    pub store_latency: Option<Duration>,
    /// `InProcess` embeds the store; `Distributed` runs it as a separate
    /// mTLS service on its own port.
    pub deployment: Deployment,
}

impl StackOptions {
    pub fn new(seed: SeedData, policies: PolicyStore) -> Self {
        Self {
            seed,
            policies,
            cache_mode: CacheMode::Warm,
            pdp: PdpConfig::default(),
            store_latency: None,
            deployment: Deployment::Distributed,
        }
    }
}

/// A decision point (and, when distributed, an attribute store) on loopback
/// ports, secured by a freshly generated PKI.
pub struct LocalStack {
    pub pki: DevPki,
    pub pdp: Arc<Pdp>,
    pub pdp_addr: SocketAddr,
    pub store: Option<Arc<StoreService>>,
    store_handle: Option<ServerHandle>,
    handles: Vec<ServerHandle>,
}

impl LocalStack {
    pub async fn start(opts: StackOptions) -> Result<Self> {
        let pki = DevPki::generate()?;
        let loopback: SocketAddr = "127.0.0.1:0".parse().unwrap();
        let server_tls = |pki: &DevPki| -> Result<ServerTransport> {
            Ok(ServerTransport::Tls {
                config: tls::server_config(&pki.ca_pem, &pki.server)?,
                admin_names: vec!["admin".into()],
            })
        };
        let mut memory = MemoryStore::from_seed(&opts.seed);
        if let Some(latency) = opts.store_latency {
            memory = memory.with_latency(latency);
        }
        let memory = Arc::new(memory);
        let (backing, store, store_handle): (Arc<dyn BackingStore>, _, _) = match opts.deployment {
            Deployment::InProcess => (memory, None, None),
            Deployment::Distributed => {
                let service = Arc::new(StoreService::new(memory, Some(opts.seed.digest())));
                let handle = service.clone().serve(loopback, server_tls(&pki)?).await?;
                let identity = pki.client("pdp").context("pdp identity")?;
                let endpoint = Endpoint {
                    addr: handle.addr,
                    transport: ClientTransport::tls(tls::client_config(&pki.ca_pem, Some(identity))?, "localhost")?,
                };
                (Arc::new(RemoteStore::new(endpoint)) as Arc<dyn BackingStore>, Some(service), Some(handle))
            }
        };
        let pip = PipStore::new(backing, opts.cache_mode);
        let pdp = Arc::new(
            Pdp::new(Arc::new(opts.policies), Arc::new(pip), opts.pdp).with_seed_hash(opts.seed.digest()),
        );
        let handle = PdpService::new(pdp.clone()).serve(loopback, server_tls(&pki)?).await?;
        let pdp_addr = handle.addr;
        Ok(Self { pki, pdp, pdp_addr, store, store_handle, handles: vec![handle] })
    }

    /// Endpoint of the decision point as seen by a client presenting the
    /// named development identity (`pep`, `pdp`, `admin`), or none.
    pub fn endpoint(&self, identity: Option<&str>) -> Result<Endpoint> {
        let id = identity.map(|n| self.pki.client(n).with_context(|| format!("no identity `{n}`"))).transpose()?;
        Ok(Endpoint {
            addr: self.pdp_addr,
            transport: ClientTransport::tls(tls::client_config(&self.pki.ca_pem, id)?, "localhost")?,
        })
    }

    /// Stops accepting attribute store connections, leaving the decision
    /// point running. Returns false when the stack has no network store.
    pub fn shutdown_store(&self) -> bool {
        self.store_handle.as_ref().map(ServerHandle::shutdown).is_some()
    }

    pub fn shutdown(&self) {
        self.shutdown_store();
        for h in &self.handles {
            h.shutdown();
        }
    }
}

impl Drop for LocalStack {
    fn drop(&mut self) {
        self.shutdown();
    }
}
