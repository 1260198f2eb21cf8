//! HTTP/1.1 over mutual TLS: a small accept loop for services and a
//! single-connection client.

use crate::tls::{self, peer_common_name};
use anyhow::{anyhow, Context as _, Result};
use bytes::Bytes;
use http_body_util::{BodyExt, Full, Limited};
use hyper::body::Incoming;
use hyper::client::conn::http1::SendRequest;
use hyper::header::{CONTENT_TYPE, HOST};
use hyper::service::service_fn;
use hyper::{Method, Request, Response, StatusCode};
use hyper_util::rt::TokioIo;
use rustls::pki_types::ServerName;
use rustls::{ClientConfig, ServerConfig};
use std::future::Future;
use std::net::SocketAddr;
use std::pin::Pin;
use std::sync::Arc;
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;
use tokio_rustls::{TlsAcceptor, TlsConnector};

/// Largest request or response body accepted.
pub const MAX_BODY_BYTES: usize = 1 << 20;

/// Who is on the other end of a connection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Peer {
    pub addr: SocketAddr,
    /// Certificate common name; `None` on a plaintext connection.
    pub name: Option<String>,
    pub admin: bool,
}

/// A fully read request.
#[derive(Debug)]
pub struct HttpRequest {
    pub method: Method,
    pub path: String,
    pub body: Bytes,
}

pub type HttpResponse = Response<Full<Bytes>>;
pub type BoxFuture = Pin<Box<dyn Future<Output = HttpResponse> + Send>>;
/// Routes one request.
pub type Handler = Arc<dyn Fn(HttpRequest, Peer) -> BoxFuture + Send + Sync>;

pub fn text(status: StatusCode, body: impl Into<String>) -> HttpResponse {
    let mut resp = Response::new(Full::new(Bytes::from(body.into())));
    *resp.status_mut() = status;
    resp.headers_mut().insert(CONTENT_TYPE, "text/plain; charset=utf-8".parse().unwrap());
    resp
}

pub fn json<T: serde::Serialize>(status: StatusCode, body: &T) -> HttpResponse {
    match serde_json::to_vec(body) {
        Ok(bytes) => {
            let mut resp = Response::new(Full::new(Bytes::from(bytes)));
            *resp.status_mut() = status;
            resp.headers_mut().insert(CONTENT_TYPE, "application/json".parse().unwrap());
            resp
        }
        Err(e) => text(StatusCode::INTERNAL_SERVER_ERROR, format!("serialization failed: {e}")),
    }
}

/// `{"error": message}` with the given status.
pub fn error(status: StatusCode, message: impl std::fmt::Display) -> HttpResponse {
    json(status, &serde_json::json!({ "error": message.to_string() }))
}

/// Server-side transport: mutual TLS, or plaintext for in-process use only.
#[derive(Clone)]
pub enum ServerTransport {
    Tls { config: Arc<ServerConfig>, admin_names: Vec<String> },
    Plaintext,
}

/// A running listener. Dropping the handle does not stop it; call [`ServerHandle::shutdown`].
#[derive(Debug)]
pub struct ServerHandle {
    pub addr: SocketAddr,
    task: JoinHandle<()>,
}

impl ServerHandle {
    pub fn shutdown(&self) {
        self.task.abort();
    }

    /// Resolves when the accept loop ends.
    pub async fn wait(self) {
        let _ = self.task.await;
    }
}

/// Binds `addr` and serves every connection with `handler`.
pub async fn serve(addr: SocketAddr, transport: ServerTransport, handler: Handler) -> Result<ServerHandle> {
    let listener = TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    let addr = listener.local_addr()?;
    let task = tokio::spawn(async move {
        loop {
            let Ok((stream, remote)) = listener.accept().await else { continue };
            let _ = stream.set_nodelay(true);
            let transport = transport.clone();
            let handler = handler.clone();
            tokio::spawn(async move {
                match transport {
                    ServerTransport::Plaintext => {
                        let peer = Peer { addr: remote, name: None, admin: true };
                        serve_connection(TokioIo::new(stream), peer, handler).await;
                    }
                    ServerTransport::Tls { config, admin_names } => {
                        // Handshake failures (no or untrusted client certificate)
                        // close the connection before any request is read.
                        let Ok(tls) = TlsAcceptor::from(config).accept(stream).await else { return };
                        let name = peer_common_name(tls.get_ref().1.peer_certificates());
                        let admin = name.as_ref().is_some_and(|n| admin_names.iter().any(|a| a == n));
                        let peer = Peer { addr: remote, name, admin };
                        serve_connection(TokioIo::new(tls), peer, handler).await;
                    }
                }
            });
        }
    });
    Ok(ServerHandle { addr, task })
}

async fn serve_connection<IO>(io: TokioIo<IO>, peer: Peer, handler: Handler)
where
    IO: tokio::io::AsyncRead + tokio::io::AsyncWrite + Unpin + Send + 'static,
{
    let service = service_fn(move |req: Request<Incoming>| {
        let handler = handler.clone();
        let peer = peer.clone();
        async move {
            let method = req.method().clone();
            let path = req.uri().path().to_owned();
            let body = match Limited::new(req.into_body(), MAX_BODY_BYTES).collect().await {
                Ok(b) => b.to_bytes(),
                Err(_) => return Ok::<_, hyper::Error>(error(StatusCode::PAYLOAD_TOO_LARGE, "request body too large or unreadable")),
            };
            Ok(handler(HttpRequest { method, path, body }, peer).await)
        }
    });
    let _ = hyper::server::conn::http1::Builder::new().serve_connection(io, service).await;
}

/// Client-side transport settings for one target.
#[derive(Clone)]
pub enum ClientTransport {
    Tls { config: Arc<ClientConfig>, server_name: ServerName<'static> },
    Plaintext,
}

impl ClientTransport {
    pub fn tls(config: Arc<ClientConfig>, server_name: &str) -> Result<Self> {
        Ok(ClientTransport::Tls { config, server_name: tls::server_name(server_name)? })
    }
}

/// Where a service listens and how to reach it.
#[derive(Clone)]
pub struct Endpoint {
    pub addr: SocketAddr,
    pub transport: ClientTransport,
}

impl std::fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mode = match self.transport {
            ClientTransport::Tls { .. } => "mtls",
            ClientTransport::Plaintext => "plaintext",
        };
        write!(f, "Endpoint({} via {mode})", self.addr)
    }
}

/// One keep-alive HTTP/1.1 connection; requests are sequential.
pub struct Connection {
    send: SendRequest<Full<Bytes>>,
    host: String,
}

impl Connection {
    pub async fn open(endpoint: &Endpoint) -> Result<Self> {
        let stream = TcpStream::connect(endpoint.addr).await.with_context(|| format!("connecting to {}", endpoint.addr))?;
        stream.set_nodelay(true)?;
        let host = endpoint.addr.to_string();
        let send = match &endpoint.transport {
            ClientTransport::Plaintext => handshake(TokioIo::new(stream)).await?,
            ClientTransport::Tls { config, server_name } => {
                let tls = TlsConnector::from(config.clone())
                    .connect(server_name.clone(), stream)
                    .await
                    .context("TLS handshake")?;
                handshake(TokioIo::new(tls)).await?
            }
        };
        Ok(Self { send, host })
    }

    pub fn is_closed(&self) -> bool {
        self.send.is_closed()
    }

    /// Sends one request and reads the full response.
    pub async fn request(&mut self, method: Method, path: &str, body: Option<Bytes>) -> Result<(StatusCode, Bytes)> {
        self.send.ready().await.context("connection closed")?;
        let has_body = body.is_some();
        let mut builder = Request::builder().method(method).uri(path).header(HOST, &self.host);
        if has_body {
            builder = builder.header(CONTENT_TYPE, "application/json");
        }
        let req = builder.body(Full::new(body.unwrap_or_default()))?;
        let resp = self.send.send_request(req).await.context("sending request")?;
        let status = resp.status();
        let body = Limited::new(resp.into_body(), MAX_BODY_BYTES)
            .collect()
            .await
            .map_err(|e| anyhow!("reading response: {e}"))?
            .to_bytes();
        Ok((status, body))
    }

    pub async fn get(&mut self, path: &str) -> Result<(StatusCode, Bytes)> {
        self.request(Method::GET, path, None).await
    }

    pub async fn post_json<T: serde::Serialize + ?Sized>(&mut self, path: &str, body: &T) -> Result<(StatusCode, Bytes)> {
        self.request(Method::POST, path, Some(Bytes::from(serde_json::to_vec(body)?))).await
    }
}

async fn handshake<IO>(io: TokioIo<IO>) -> Result<SendRequest<Full<Bytes>>>
where
    IO: tokio::io::AsyncRead + tokio::io::AsyncWrite + Unpin + Send + 'static,
{
    let (send, conn) = hyper::client::conn::http1::handshake(io).await.context("HTTP handshake")?;
    tokio::spawn(async move {
        let _ = conn.await;
    });
    Ok(send)
}

/// Decodes a JSON body, or reports the status and body text on failure.
pub fn decode<T: serde::de::DeserializeOwned>(status: StatusCode, body: &[u8]) -> Result<T> {
    if !status.is_success() {
        return Err(anyhow!("HTTP {status}: {}", String::from_utf8_lossy(body)));
    }
    serde_json::from_slice(body).with_context(|| format!("decoding response: {}", String::from_utf8_lossy(body)))
}
