//! Service configuration: a TOML file plus `ZTS_*` environment overrides.
//!
//! ```toml
//! bind = "127.0.0.1:8443"
//! deployment = "distributed"        # or "in_process"
//! transport = "mtls"                # "plaintext" only with deployment = "in_process"
//!
//! [tls]
//! ca = "pki/ca.pem"
//! cert = "pki/server.pem"
//! key = "pki/server.key"
//! admin_names = ["admin"]
//!
//! [pdp]
//! policies = "policies.toml"
//! cache_mode = "warm"
//! attribute_timeout_ms = 2000
//! engines = ["additive", "subjective_logic"]
//!
//! [pip]
//! backend = "remote"                # or "memory"
//! seed = "seed.toml"
//! remote = "127.0.0.1:8444"
//!
//! [store]
//! bind = "127.0.0.1:8444"
//! ```
//!
//! Relative paths resolve against the configuration file's directory.

use crate::http::{ClientTransport, Endpoint, ServerTransport};
use crate::tls::{self, Identity};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;
use zts_core::{Algorithm, CacheMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deployment {
    /// Attribute store embedded in the decision point process.
    InProcess,
    /// Attribute store reached over the network.
    #[default]
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    #[default]
    Mtls,
    Plaintext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipBackend {
    #[default]
    Memory,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TlsSection {
    pub ca: Option<PathBuf>,
    pub cert: Option<PathBuf>,
    pub key: Option<PathBuf>,
    pub admin_names: Vec<String>,
    /// Name expected in the certificate of services this process connects to.
    pub server_name: String,
}

impl Default for TlsSection {
    fn default() -> Self {
        Self { ca: None, cert: None, key: None, admin_names: default_admin_names(), server_name: default_server_name() }
    }
}

fn default_admin_names() -> Vec<String> {
    vec!["admin".into()]
}

fn default_server_name() -> String {
    "localhost".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdpSection {
    /// Custom catalog file; the shipped default catalog when absent.
    pub catalog: Option<PathBuf>,
    pub policies: Option<PathBuf>,
    pub cache_mode: CacheMode,
    pub attribute_timeout_ms: u64,
    pub audit_capacity: usize,
    pub engines: Vec<Algorithm>,
}

impl Default for PdpSection {
    fn default() -> Self {
        Self {
            catalog: None,
            policies: None,
            cache_mode: CacheMode::Warm,
            attribute_timeout_ms: 2000,
            audit_capacity: 10_000,
            engines: Algorithm::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipSection {
    pub backend: PipBackend,
    pub seed: Option<PathBuf>,
    pub remote: Option<SocketAddr>,
    /// Artificial per-batch latency of the embedded store.
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoreSection {
    pub bind: SocketAddr,
}

impl Default for StoreSection {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8444".parse().unwrap() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub deployment: Deployment,
    pub transport: Transport,
    pub tls: TlsSection,
    pub pdp: PdpSection,
    pub pip: PipSection,
    pub store: StoreSection,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8443".parse().unwrap(),
            deployment: Deployment::default(),
            transport: Transport::default(),
            tls: TlsSection::default(),
            pdp: PdpSection::default(),
            pip: PipSection::default(),
            store: StoreSection::default(),
        }
    }
}

fn parse_env<T: std::str::FromStr>(name: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| anyhow::anyhow!("environment variable {name}: {e}"))
}

fn parse_word<T: serde::de::DeserializeOwned>(name: &str, raw: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(raw.to_owned()))
        .with_context(|| format!("environment variable {name}: unexpected value `{raw}`"))
}

impl ServiceConfig {
    pub fn from_toml_str(src: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(src).context("parsing configuration")?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Loads a file (or defaults when `path` is `None`) and applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let src = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::from_toml_str(&src, p.parent().unwrap_or(Path::new(".")))?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.tls.ca);
        fix(&mut self.tls.cert);
        fix(&mut self.tls.key);
        fix(&mut self.pdp.catalog);
        fix(&mut self.pdp.policies);
        fix(&mut self.pip.seed);
    }

    /// Applies overrides: `ZTS_BIND`, `ZTS_DEPLOYMENT`, `ZTS_TRANSPORT`,
    /// `ZTS_TLS_CA`, `ZTS_TLS_CERT`, `ZTS_TLS_KEY`, `ZTS_ADMIN_NAMES`
    /// (comma separated), `ZTS_CATALOG`, `ZTS_POLICIES`, `ZTS_CACHE_MODE`,
    /// `ZTS_ATTRIBUTE_TIMEOUT_MS`, `ZTS_ENGINES` (comma separated),
    /// `ZTS_PIP_BACKEND`, `ZTS_SEED`, `ZTS_PIP_REMOTE`, `ZTS_STORE_BIND`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        let list = |raw: &str| raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect::<Vec<_>>();
        if let Some(v) = lookup("ZTS_BIND") {
            self.bind = parse_env("ZTS_BIND", &v)?;
        }
        if let Some(v) = lookup("ZTS_DEPLOYMENT") {
            self.deployment = parse_word("ZTS_DEPLOYMENT", &v)?;
        }
        if let Some(v) = lookup("ZTS_TRANSPORT") {
            self.transport = parse_word("ZTS_TRANSPORT", &v)?;
        }
        if let Some(v) = lookup("ZTS_TLS_CA") {
            self.tls.ca = Some(v.into());
        }
        if let Some(v) = lookup("ZTS_TLS_CERT") {
            self.tls.cert = Some(v.into());
        }
        if let Some(v) = lookup("ZTS_TLS_KEY") {
            self.tls.key = Some(v.into());
        }
        if let Some(v) = lookup("ZTS_ADMIN_NAMES") {
            self.tls.admin_names = list(&v);
        }
        if let Some(v) = lookup("ZTS_CATALOG") {
            self.pdp.catalog = Some(v.into());
        }
        if let Some(v) = lookup("ZTS_POLICIES") {
            self.pdp.policies = Some(v.into());
        }
        if let Some(v) = lookup("ZTS_CACHE_MODE") {
            self.pdp.cache_mode = parse_env("ZTS_CACHE_MODE", &v)?;
        }
        if let Some(v) = lookup("ZTS_ATTRIBUTE_TIMEOUT_MS") {
            self.pdp.attribute_timeout_ms = parse_env("ZTS_ATTRIBUTE_TIMEOUT_MS", &v)?;
        }
        if let Some(v) = lookup("ZTS_ENGINES") {
            self.pdp.engines = list(&v).iter().map(|w| parse_word("ZTS_ENGINES", w)).collect::<Result<_>>()?;
        }
        if let Some(v) = lookup("ZTS_PIP_BACKEND") {
            self.pip.backend = parse_word("ZTS_PIP_BACKEND", &v)?;
        }
        if let Some(v) = lookup("ZTS_SEED") {
            self.pip.seed = Some(v.into());
        }
        if let Some(v) = lookup("ZTS_PIP_REMOTE") {
            self.pip.remote = Some(parse_env("ZTS_PIP_REMOTE", &v)?);
        }
        if let Some(v) = lookup("ZTS_STORE_BIND") {
            self.store.bind = parse_env("ZTS_STORE_BIND", &v)?;
        }
        Ok(())
    }

    /// Rejects combinations that would weaken transport security.
    pub fn validate(&self) -> Result<()> {
        if self.transport == Transport::Plaintext && self.deployment != Deployment::InProcess {
            bail!("plaintext transport is only available with deployment = \"in_process\"");
        }
        if self.transport == Transport::Plaintext && !self.bind.ip().is_loopback() {
            bail!("plaintext transport may only bind a loopback address");
        }
        if self.deployment == Deployment::InProcess && self.pip.backend == PipBackend::Remote {
            bail!("deployment = \"in_process\" requires pip.backend = \"memory\"");
        }
        if self.pip.backend == PipBackend::Remote && self.pip.remote.is_none() {
            bail!("pip.backend = \"remote\" requires pip.remote");
        }
        if self.pdp.engines.is_empty() {
            bail!("pdp.engines must enable at least one algorithm");
        }
        Ok(())
    }

    fn ca_pem(&self) -> Result<String> {
        let ca = self.tls.ca.as_ref().context("tls.ca is required for mtls transport")?;
        std::fs::read_to_string(ca).with_context(|| format!("reading {}", ca.display()))
    }

    fn identity(&self) -> Result<Identity> {
        let cert = self.tls.cert.as_ref().context("tls.cert is required for mtls transport")?;
        let key = self.tls.key.as_ref().context("tls.key is required for mtls transport")?;
        Identity::load(cert, key)
    }

    pub fn server_transport(&self) -> Result<ServerTransport> {
        match self.transport {
            Transport::Plaintext => Ok(ServerTransport::Plaintext),
            Transport::Mtls => Ok(ServerTransport::Tls {
                config: tls::server_config(&self.ca_pem()?, &self.identity()?)?,
                admin_names: self.tls.admin_names.clone(),
            }),
        }
    }

    /// How this process connects to `addr` (e.g. the attribute store).
    pub fn endpoint(&self, addr: SocketAddr) -> Result<Endpoint> {
        let transport = match self.transport {
            Transport::Plaintext => ClientTransport::Plaintext,
            Transport::Mtls => {
                let id = self.identity()?;
                ClientTransport::tls(tls::client_config(&self.ca_pem()?, Some(&id))?, &self.tls.server_name)?
            }
        };
        Ok(Endpoint { addr, transport })
    }

    pub fn attribute_timeout(&self) -> Duration {
        Duration::from_millis(self.pdp.attribute_timeout_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_apply() {
        let mut cfg = ServiceConfig::default();
        let env = |k: &str| match k {
            "ZTS_BIND" => Some("127.0.0.1:9000".to_owned()),
            "ZTS_CACHE_MODE" => Some("cold".to_owned()),
            "ZTS_ENGINES" => Some("additive".to_owned()),
            "ZTS_DEPLOYMENT" => Some("in_process".to_owned()),
            _ => None,
        };
        cfg.apply_env(env).unwrap();
        assert_eq!(cfg.bind.port(), 9000);
        assert_eq!(cfg.pdp.cache_mode, CacheMode::Cold);
        assert_eq!(cfg.pdp.engines, vec![Algorithm::Additive]);
        assert_eq!(cfg.deployment, Deployment::InProcess);
        assert!(cfg.apply_env(|k| (k == "ZTS_TRANSPORT").then(|| "carrier-pigeon".to_owned())).is_err());
    }

    #[test]
    fn plaintext_refused_outside_in_process() {
        let cfg = ServiceConfig { transport: Transport::Plaintext, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ServiceConfig { deployment: Deployment::InProcess, ..cfg };
        cfg.validate().unwrap();
        let cfg = ServiceConfig { bind: "0.0.0.0:8443".parse().unwrap(), ..cfg };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let cfg = ServiceConfig::from_toml_str("[tls]\nca = \"pki/ca.pem\"\n", Path::new("/etc/zts")).unwrap();
        assert_eq!(cfg.tls.ca.unwrap(), PathBuf::from("/etc/zts/pki/ca.pem"));
    }
}
