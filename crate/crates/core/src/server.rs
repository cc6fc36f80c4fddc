//! Live session endpoint.
//!
//! One simulation per server. Each connection is sniffed: a request starting
//! with `GET ` is upgraded to a WebSocket and speaks text frames, anything
//! else is treated as newline-delimited JSON over plain TCP. All connections
//! feed one command queue into the simulation thread and receive the same
//! state and event frames. The simulation runs in real time while at least
//! one client is connected and pauses when the last one leaves.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, info, warn};
use tungstenite::Message;

use crate::error::{Error, Result};
use crate::live::{run_interactive, InteractiveOptions, Pacing, SessionCommand, SessionInput};
use crate::protocol::{ClientMessage, ServerMessage};
use crate::sim::SimConfig;

const POLL: Duration = Duration::from_millis(10);
const SNIFF_TIMEOUT: Duration = Duration::from_millis(200);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub sim: SimConfig,
    pub tick_hz: f64,
    /// Simulated seconds per wall second.
    pub speed: f64,
}

impl ServerConfig {
    pub fn new(addr: SocketAddr, sim: SimConfig) -> Self {
        Self {
            addr,
            sim,
            tick_hz: 50.0,
            speed: 1.0,
        }
    }
}

#[derive(Default)]
struct Hub {
    hello: Option<Arc<str>>,
    next_id: u64,
    subscribers: Vec<(u64, Sender<Arc<str>>)>,
}

struct Shared {
    hub: Mutex<Hub>,
    stop: AtomicBool,
}

impl Shared {
    fn hub(&self) -> std::sync::MutexGuard<'_, Hub> {
        self.hub.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Running server. Dropping it does not stop it; call [`shutdown`].
///
/// [`shutdown`]: ServerHandle::shutdown
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    inputs: Sender<SessionInput>,
    acceptor: JoinHandle<()>,
    sim: JoinHandle<Result<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, ends the simulation and waits for both threads.
    pub fn shutdown(self) -> Result<()> {
        self.shared.stop.store(true, Ordering::SeqCst);
        let _ = self.inputs.send(SessionInput::Shutdown);
        let _ = self.acceptor.join();
        self.sim
            .join()
            .unwrap_or_else(|_| Err(Error::Format("simulation thread panicked".into())))
    }

    /// Blocks until the simulation thread ends.
    pub fn wait(self) -> Result<()> {
        let result = self
            .sim
            .join()
            .unwrap_or_else(|_| Err(Error::Format("simulation thread panicked".into())));
        self.shared.stop.store(true, Ordering::SeqCst);
        let _ = self.acceptor.join();
        result
    }
}

/// Binds the endpoint and starts serving. A busy port surfaces as an
/// [`Error::Io`] of kind `AddrInUse`.
pub fn start(config: ServerConfig) -> Result<ServerHandle> {
    // Validate before binding so a bad config never opens a socket.
    crate::live::LiveSession::new(&config.sim, config.tick_hz)?;
    let listener = TcpListener::bind(config.addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    info!("live session endpoint listening on {addr}");

    let shared = Arc::new(Shared {
        hub: Mutex::new(Hub::default()),
        stop: AtomicBool::new(false),
    });
    let (inputs, rx) = mpsc::channel();

    let sim = {
        let shared = Arc::clone(&shared);
        let options = InteractiveOptions {
            tick_hz: config.tick_hz,
            pacing: Pacing::Realtime { speed: config.speed },
            stop_after: None,
            start_paused: true,
            record: false,
        };
        let sim_config = config.sim.clone();
        thread::spawn(move || {
            run_interactive(&sim_config, options, rx, |msg| {
                let text: Arc<str> = msg.to_json().into();
                let mut hub = shared.hub();
                if matches!(msg, ServerMessage::Hello(_)) {
                    hub.hello = Some(text);
                } else {
                    hub.subscribers.retain(|(_, tx)| tx.send(Arc::clone(&text)).is_ok());
                }
                !shared.stop.load(Ordering::Relaxed)
            })
            .map(|_| ())
        })
    };

    let acceptor = {
        let shared = Arc::clone(&shared);
        let inputs = inputs.clone();
        thread::spawn(move || accept_loop(listener, shared, inputs))
    };

    Ok(ServerHandle {
        addr,
        shared,
        inputs,
        acceptor,
        sim,
    })
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, inputs: Sender<SessionInput>) {
    while !shared.stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                debug!("connection from {peer}");
                let shared = Arc::clone(&shared);
                let inputs = inputs.clone();
                thread::spawn(move || {
                    if let Err(e) = serve_connection(stream, &shared, &inputs) {
                        debug!("connection {peer} ended: {e}");
                    }
                });
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

fn serve_connection(stream: TcpStream, shared: &Shared, inputs: &Sender<SessionInput>) -> Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    // A WebSocket client speaks first; a silent client is taken as NDJSON.
    stream.set_read_timeout(Some(SNIFF_TIMEOUT))?;
    let mut head = [0u8; 4];
    let is_websocket = loop {
        match stream.peek(&mut head) {
            Ok(0) => return Ok(()),
            Ok(n) if n == head.len() || !b"GET ".starts_with(&head[..n]) => break &head[..n] == b"GET ",
            Ok(_) => thread::sleep(POLL),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => break false,
            Err(e) => return Err(e.into()),
        }
    };
    stream.set_read_timeout(None)?;

    let (tx, rx) = mpsc::channel::<Arc<str>>();
    let first = {
        let mut hub = shared.hub();
        if let Some(hello) = &hub.hello {
            let _ = tx.send(Arc::clone(hello));
        }
        let id = hub.next_id;
        hub.next_id += 1;
        hub.subscribers.push((id, tx.clone()));
        (id, hub.subscribers.len() == 1)
    };
    let (id, only_client) = first;
    if only_client {
        let _ = inputs.send(SessionInput::Command(SessionCommand::Resume));
    }

    let result = if is_websocket {
        serve_websocket(stream, shared, inputs, &tx, &rx)
    } else {
        serve_ndjson(stream, shared, inputs, &tx, &rx)
    };

    let mut hub = shared.hub();
    hub.subscribers.retain(|(i, _)| *i != id);
    if hub.subscribers.is_empty() {
        let _ = inputs.send(SessionInput::Command(SessionCommand::Pause));
    }
    result
}

/// Forwards one client text to the session, or answers the sender alone
/// with an error frame.
fn dispatch(text: &str, inputs: &Sender<SessionInput>, own: &Sender<Arc<str>>) {
    if text.trim().is_empty() {
        return;
    }
    match ClientMessage::parse(text) {
        Ok(msg) => {
            let _ = inputs.send(SessionInput::Command(msg.into()));
        }
        Err(message) => {
            let _ = own.send(ServerMessage::Error { message }.to_json().into());
        }
    }
}

fn serve_websocket(
    stream: TcpStream,
    shared: &Shared,
    inputs: &Sender<SessionInput>,
    own: &Sender<Arc<str>>,
    outgoing: &Receiver<Arc<str>>,
) -> Result<()> {
    let mut ws = tungstenite::accept(stream).map_err(|e| Error::Format(format!("websocket handshake: {e}")))?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let ws_err = |e: tungstenite::Error| Error::Format(format!("websocket: {e}"));
    loop {
        if shared.stop.load(Ordering::Relaxed) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        while let Ok(text) = outgoing.try_recv() {
            ws.write(Message::Text(text.to_string())).map_err(ws_err)?;
        }
        ws.flush().map_err(ws_err)?;
        match ws.read() {
            Ok(Message::Text(text)) => dispatch(&text, inputs, own),
            Ok(Message::Binary(_)) => {
                let _ = own.send(
                    ServerMessage::Error {
                        message: "binary frames are not supported".into(),
                    }
                    .to_json()
                    .into(),
                );
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                return Ok(())
            }
            Err(e) => return Err(ws_err(e)),
        }
    }
}

fn serve_ndjson(
    stream: TcpStream,
    shared: &Shared,
    inputs: &Sender<SessionInput>,
    own: &Sender<Arc<str>>,
    outgoing: &Receiver<Arc<str>>,
) -> Result<()> {
    let reader_done = Arc::new(AtomicBool::new(false));
    let reader = {
        let stream = stream.try_clone()?;
        let inputs = inputs.clone();
        let own = own.clone();
        let done = Arc::clone(&reader_done);
        thread::spawn(move || {
            for line in BufReader::new(stream).lines() {
                match line {
                    Ok(line) => dispatch(&line, &inputs, &own),
                    Err(_) => break,
                }
            }
            done.store(true, Ordering::SeqCst);
        })
    };
    let mut writer = std::io::BufWriter::new(&stream);
    let result = loop {
        if shared.stop.load(Ordering::Relaxed) || reader_done.load(Ordering::SeqCst) {
            break Ok(());
        }
        match outgoing.recv_timeout(POLL) {
            Ok(text) => {
                let mut write = || -> std::io::Result<()> {
                    writer.write_all(text.as_bytes())?;
                    writer.write_all(b"\n")?;
                    while let Ok(more) = outgoing.try_recv() {
                        writer.write_all(more.as_bytes())?;
                        writer.write_all(b"\n")?;
                    }
                    writer.flush()
                };
                if let Err(e) = write() {
                    break Err(e.into());
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break Ok(()),
        }
    };
    drop(writer);
    let _ = stream.shutdown(Shutdown::Both);
    let _ = reader.join();
    result
}
