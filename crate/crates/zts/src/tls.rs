//! Mutual TLS: development PKI generation, rustls configurations and peer
//! identity extraction.
//!
//! Every service endpoint requires a client certificate issued by the
//! configured CA. The peer's certificate common name is its identity; admin
//! operations are allowed for names in the configured admin list.

use anyhow::{anyhow, Context, Result};
use rcgen::{BasicConstraints, CertificateParams, DnType, ExtendedKeyUsagePurpose, IsCa, KeyPair, KeyUsagePurpose};
use rustls::pki_types::{CertificateDer, PrivateKeyDer, ServerName};
use rustls::server::WebPkiClientVerifier;
use rustls::{ClientConfig, RootCertStore, ServerConfig};
use std::path::Path;
use std::sync::Arc;

/// Names of the leaf certificates in a development PKI.
pub const SERVER_NAME: &str = "zts-server";
pub const CLIENT_NAMES: [&str; 3] = ["pep", "pdp", "admin"];

fn provider() -> Arc<rustls::crypto::CryptoProvider> {
    Arc::new(rustls::crypto::ring::default_provider())
}

/// A certificate chain and its private key, PEM encoded.
#[derive(Clone)]
pub struct Identity {
    pub cert_pem: String,
    pub key_pem: String,
}

impl std::fmt::Debug for Identity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Identity").field("key_pem", &"<redacted>").finish_non_exhaustive()
    }
}

impl Identity {
    pub fn load(cert: impl AsRef<Path>, key: impl AsRef<Path>) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
        Ok(Self { cert_pem: read(cert.as_ref())?, key_pem: read(key.as_ref())? })
    }

    fn chain(&self) -> Result<Vec<CertificateDer<'static>>> {
        parse_certs(&self.cert_pem)
    }

    fn key(&self) -> Result<PrivateKeyDer<'static>> {
        rustls_pemfile::private_key(&mut self.key_pem.as_bytes())
            .context("parsing private key")?
            .ok_or_else(|| anyhow!("no private key in PEM"))
    }
}

fn parse_certs(pem: &str) -> Result<Vec<CertificateDer<'static>>> {
    let certs = rustls_pemfile::certs(&mut pem.as_bytes()).collect::<Result<Vec<_>, _>>().context("parsing certificates")?;
    if certs.is_empty() {
        return Err(anyhow!("no certificate in PEM"));
    }
    Ok(certs)
}

fn roots(ca_pem: &str) -> Result<RootCertStore> {
    let mut roots = RootCertStore::empty();
    for cert in parse_certs(ca_pem)? {
        roots.add(cert).context("adding CA certificate")?;
    }
    Ok(roots)
}

/// A CA plus one server identity and the client identities `pep`, `pdp` and `admin`.
#[derive(Debug, Clone)]
pub struct DevPki {
    pub ca_pem: String,
    pub server: Identity,
    pub clients: Vec<(String, Identity)>,
}

impl DevPki {
    /// Generates a fresh PKI. The server certificate is valid for
    /// `localhost` and `127.0.0.1`.
    pub fn generate() -> Result<Self> {
        let ca_key = KeyPair::generate()?;
        let mut ca_params = CertificateParams::new(Vec::<String>::new())?;
        ca_params.distinguished_name.push(DnType::CommonName, "zts development CA");
        ca_params.is_ca = IsCa::Ca(BasicConstraints::Unconstrained);
        ca_params.key_usages = vec![KeyUsagePurpose::KeyCertSign, KeyUsagePurpose::CrlSign];
        let ca = ca_params.self_signed(&ca_key)?;

        let leaf = |name: &str, sans: Vec<String>, server: bool| -> Result<Identity> {
            let key = KeyPair::generate()?;
            let mut params = CertificateParams::new(sans)?;
            params.distinguished_name.push(DnType::CommonName, name);
            params.key_usages = vec![KeyUsagePurpose::DigitalSignature];
            // The server identity also authenticates services to each other
            // (decision point to attribute store), hence both usages.
            params.extended_key_usages = if server {
                vec![ExtendedKeyUsagePurpose::ServerAuth, ExtendedKeyUsagePurpose::ClientAuth]
            } else {
                vec![ExtendedKeyUsagePurpose::ClientAuth]
            };
            let cert = params.signed_by(&key, &ca, &ca_key)?;
            Ok(Identity { cert_pem: cert.pem(), key_pem: key.serialize_pem() })
        };
        let server = leaf(SERVER_NAME, vec!["localhost".into(), "127.0.0.1".into()], true)?;
        let clients = CLIENT_NAMES
            .iter()
            .map(|n| Ok((n.to_string(), leaf(n, Vec::new(), false)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ca_pem: ca.pem(), server, clients })
    }

    pub fn client(&self, name: &str) -> Option<&Identity> {
        self.clients.iter().find(|(n, _)| n == name).map(|(_, id)| id)
    }

    /// Writes `ca.pem`, `server.pem`/`server.key` and `<client>.pem`/`<client>.key`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let write = |name: &str, body: &str| {
            std::fs::write(dir.join(name), body).with_context(|| format!("writing {}", dir.join(name).display()))
        };
        write("ca.pem", &self.ca_pem)?;
        write("server.pem", &self.server.cert_pem)?;
        write("server.key", &self.server.key_pem)?;
        for (name, id) in &self.clients {
            write(&format!("{name}.pem"), &id.cert_pem)?;
            write(&format!("{name}.key"), &id.key_pem)?;
        }
        Ok(())
    }
}

/// Server configuration requiring client certificates issued by `ca_pem`.
pub fn server_config(ca_pem: &str, identity: &Identity) -> Result<Arc<ServerConfig>> {
    let verifier = WebPkiClientVerifier::builder_with_provider(Arc::new(roots(ca_pem)?), provider())
        .build()
        .context("building client verifier")?;
    let mut config = ServerConfig::builder_with_provider(provider())
        .with_safe_default_protocol_versions()?
        .with_client_cert_verifier(verifier)
        .with_single_cert(identity.chain()?, identity.key()?)
        .context("loading server certificate")?;
    config.alpn_protocols = vec![b"http/1.1".to_vec()];
    Ok(Arc::new(config))
}

/// Client configuration trusting `ca_pem`, presenting `identity` if given.
pub fn client_config(ca_pem: &str, identity: Option<&Identity>) -> Result<Arc<ClientConfig>> {
    let builder = ClientConfig::builder_with_provider(provider())
        .with_safe_default_protocol_versions()?
        .with_root_certificates(roots(ca_pem)?);
    let mut config = match identity {
        Some(id) => builder.with_client_auth_cert(id.chain()?, id.key()?).context("loading client certificate")?,
        None => builder.with_no_client_auth(),
    };
    config.alpn_protocols = vec![b"http/1.1".to_vec()];
    Ok(Arc::new(config))
}

pub fn server_name(host: &str) -> Result<ServerName<'static>> {
    ServerName::try_from(host.to_owned()).map_err(|e| anyhow!("invalid server name `{host}`: {e}"))
}

/// Common name of the first certificate in a verified peer chain.
pub fn peer_common_name(chain: Option<&[CertificateDer<'_>]>) -> Option<String> {
    let leaf = chain?.first()?;
    let (_, cert) = x509_parser::parse_x509_certificate(leaf.as_ref()).ok()?;
    let cn = cert.subject().iter_common_name().next()?.as_str().ok()?.to_owned();
    Some(cn)
}
