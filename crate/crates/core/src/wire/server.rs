//! TCP endpoint: one task per connection, query execution on the blocking pool.

use super::protocol::{BackendMessage, ErrorFields, FrontendDecoder, FrontendMessage};
use super::session::{AuthConfig, Session};
use crate::sqlfe::Engine;
use bytes::BytesMut;
use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicI32, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio::task::JoinSet;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("could not bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Default)]
struct Shared {
    next_pid: AtomicI32,
    /// pid -> secret key of live sessions, for CancelRequest lookups.
    keys: Mutex<HashMap<i32, i32>>,
}

pub struct Server {
    listener: TcpListener,
    engine: Arc<Engine>,
    auth: Arc<AuthConfig>,
    shutdown_deadline: Duration,
    shared: Arc<Shared>,
}

impl Server {
    pub async fn bind(
        addr: &str,
        engine: Arc<Engine>,
        auth: AuthConfig,
        shutdown_deadline: Duration,
    ) -> Result<Server, ServerError> {
        let listener = TcpListener::bind(addr).await.map_err(|source| ServerError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        Ok(Server {
            listener,
            engine,
            auth: Arc::new(auth),
            shutdown_deadline,
            shared: Arc::new(Shared {
                next_pid: AtomicI32::new(1000),
                ..Shared::default()
            }),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` flips to true. Idle sessions are told to
    /// terminate; busy ones finish their current query, up to the deadline.
    pub async fn run(self, mut shutdown: watch::Receiver<bool>) -> Result<(), ServerError> {
        let mut tasks = JoinSet::new();
        loop {
            tokio::select! {
                accepted = self.listener.accept() => {
                    let (stream, peer) = match accepted {
                        Ok(a) => a,
                        Err(e) => {
                            log::warn!("accept failed: {e}");
                            continue;
                        }
                    };
                    let _ = stream.set_nodelay(true);
                    let pid = self.shared.next_pid.fetch_add(1, Ordering::Relaxed);
                    let secret = rand::random::<i32>();
                    let session = Session::new(self.engine.clone(), self.auth.clone(), pid, secret);
                    let shared = self.shared.clone();
                    let rx = shutdown.clone();
                    tasks.spawn(async move {
                        log::debug!("session {pid}: connected from {peer}");
                        shared.keys.lock().unwrap_or_else(|e| e.into_inner()).insert(pid, secret);
                        if let Err(e) = connection(stream, session, rx, &shared).await {
                            log::debug!("session {pid}: {e}");
                        }
                        shared.keys.lock().unwrap_or_else(|e| e.into_inner()).remove(&pid);
                        log::debug!("session {pid}: closed");
                    });
                }
                _ = shutdown.changed() => break,
                Some(_) = tasks.join_next(), if !tasks.is_empty() => {}
            }
            if *shutdown.borrow() {
                break;
            }
        }
        drop(self.listener);
        let drain = async { while tasks.join_next().await.is_some() {} };
        if tokio::time::timeout(self.shutdown_deadline, drain).await.is_err() {
            log::warn!("shutdown deadline passed; aborting {} sessions", tasks.len());
            tasks.abort_all();
        }
        Ok(())
    }
}

async fn connection(
    mut stream: TcpStream,
    mut session: Session,
    mut shutdown: watch::Receiver<bool>,
    shared: &Shared,
) -> std::io::Result<()> {
    let mut decoder = FrontendDecoder::new();
    let mut inbuf = BytesMut::with_capacity(8192);
    let mut outbuf = BytesMut::with_capacity(8192);
    loop {
        if *shutdown.borrow() {
            return terminate(&mut stream, &mut outbuf).await;
        }
        tokio::select! {
            n = stream.read_buf(&mut inbuf) => {
                if n? == 0 {
                    return Ok(());
                }
            }
            changed = shutdown.changed() => {
                if changed.is_err() {
                    return terminate(&mut stream, &mut outbuf).await;
                }
                continue;
            }
        }
        loop {
            let msg = match decoder.decode(&mut inbuf) {
                Ok(Some(m)) => m,
                Ok(None) => break,
                Err(e) => {
                    BackendMessage::ErrorResponse(ErrorFields {
                        severity: "FATAL".into(),
                        code: "08P01".into(),
                        message: format!("invalid message framing: {e}"),
                    })
                    .encode(&mut outbuf);
                    stream.write_all(&outbuf).await?;
                    return Ok(());
                }
            };
            if let FrontendMessage::CancelRequest { process_id, secret_key } = &msg {
                let known = shared.keys.lock().unwrap_or_else(|e| e.into_inner()).get(process_id) == Some(secret_key);
                log::info!(
                    "cancel request for session {process_id} (known: {known}); running batches are not interrupted"
                );
            }
            let needs_engine = matches!(
                msg,
                FrontendMessage::Query(_)
                    | FrontendMessage::Parse { .. }
                    | FrontendMessage::Describe { .. }
                    | FrontendMessage::Execute { .. }
            );
            let response = if needs_engine {
                let (s, r) = tokio::task::spawn_blocking(move || {
                    let r = session.handle(msg);
                    (session, r)
                })
                .await
                .map_err(std::io::Error::other)?;
                session = s;
                r
            } else {
                session.handle(msg)
            };
            for m in &response.messages {
                m.encode(&mut outbuf);
            }
            if response.close {
                stream.write_all(&outbuf).await?;
                let _ = stream.shutdown().await;
                return Ok(());
            }
        }
        if !outbuf.is_empty() {
            stream.write_all(&outbuf).await?;
            outbuf.clear();
        }
    }
}

async fn terminate(stream: &mut TcpStream, outbuf: &mut BytesMut) -> std::io::Result<()> {
    BackendMessage::ErrorResponse(ErrorFields {
        severity: "FATAL".into(),
        code: "57P01".into(),
        message: "terminating connection due to administrator command".into(),
    })
    .encode(outbuf);
    stream.write_all(outbuf).await?;
    let _ = stream.shutdown().await;
    Ok(())
}

/// A server running on its own runtime thread. Dropping the handle shuts it down.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: watch::Sender<bool>,
    thread: Option<std::thread::JoinHandle<Result<(), ServerError>>>,
}

impl ServerHandle {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(
        addr: &str,
        engine: Arc<Engine>,
        auth: AuthConfig,
        shutdown_deadline: Duration,
    ) -> Result<ServerHandle, ServerError> {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let server = rt.block_on(Server::bind(addr, engine, auth, shutdown_deadline))?;
        let local = server.local_addr()?;
        let (stop, rx) = watch::channel(false);
        let thread = std::thread::Builder::new()
            .name("spatial3d-server".into())
            .spawn(move || rt.block_on(server.run(rx)))?;
        Ok(ServerHandle {
            addr: local,
            stop,
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Signals shutdown and waits for the server to exit.
    pub fn shutdown(mut self) -> Result<(), ServerError> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> Result<(), ServerError> {
        let _ = self.stop.send(true);
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked").into())),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}
