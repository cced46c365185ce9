//! WebSocket front end. One task owns the `Session`; connection tasks talk
//! to it only through an event queue.
//!
//! Endpoints:
//! - `GET /session/{id}/attach?role=participant|dm|rn` upgrades to a WebSocket
//!   carrying one JSON envelope per text frame.
//! - `GET /ui/{role}` serves `<ui_dir>/<role>.html` when a UI directory is set.
//!
//! A wizard closing its socket with code 4000 closes the session.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;

use super::{AttachError, Session, SessionState, SessionSummary};
use crate::protocol::{encode, Channel, Envelope, Payload, Role};

/// WebSocket close code a wizard uses to end the session.
pub const CLOSE_SESSION_CODE: u16 = 4000;

enum Event {
    Attach {
        role: Role,
        outbox: super::Outbox,
        reply: oneshot::Sender<Result<(), AttachError>>,
    },
    Frame {
        role: Role,
        bytes: Vec<u8>,
    },
    Detach {
        role: Role,
    },
    Close {
        role: Role,
    },
}

#[derive(Clone)]
struct App {
    session_id: String,
    events: mpsc::UnboundedSender<Event>,
    ui_dir: Option<PathBuf>,
}

/// A session being served. Dropping it does not stop the server; call
/// `shutdown` or let a wizard close the session.
pub struct RunningServer {
    addr: SocketAddr,
    session_id: String,
    log_path: PathBuf,
    events: mpsc::UnboundedSender<Event>,
    actor: JoinHandle<SessionSummary>,
    http: JoinHandle<()>,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn log_path(&self) -> &std::path::Path {
        &self.log_path
    }

    pub fn attach_url(&self, role: Role) -> String {
        format!("ws://{}/session/{}/attach?role={}", self.addr, self.session_id, role)
    }

    /// Close the session from the server side and wait for it to finish.
    pub async fn shutdown(self) -> SessionSummary {
        self.closer().close();
        self.wait().await
    }

    pub fn closer(&self) -> Closer {
        Closer(self.events.clone())
    }

    /// Wait until the session is closed.
    pub async fn wait(self) -> SessionSummary {
        let summary = self.actor.await.expect("session task panicked");
        let _ = self.http.await;
        summary
    }
}

/// Handle that closes a served session from outside.
#[derive(Clone)]
pub struct Closer(mpsc::UnboundedSender<Event>);

impl Closer {
    pub fn close(&self) {
        let _ = self.0.send(Event::Close { role: Role::Server });
    }
}

/// Serve `session` on `listener` until it is closed.
pub async fn serve(session: Session, listener: TcpListener, ui_dir: Option<PathBuf>) -> std::io::Result<RunningServer> {
    let addr = listener.local_addr()?;
    let session_id = session.id().to_string();
    let log_path = session.log_path().to_path_buf();
    let (events, rx) = mpsc::unbounded_channel();
    let (done_tx, done_rx) = oneshot::channel::<()>();

    let actor = tokio::spawn(run_session(session, rx, done_tx));

    let app = Router::new()
        .route("/session/{id}/attach", get(attach))
        .route("/ui/{role}", get(ui_page))
        .with_state(App {
            session_id: session_id.clone(),
            events: events.clone(),
            ui_dir,
        });
    let http = tokio::spawn(async move {
        let shutdown = async {
            let _ = done_rx.await;
        };
        if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
            log::error!("http server: {e}");
        }
    });

    Ok(RunningServer {
        addr,
        session_id,
        log_path,
        events,
        actor,
        http,
    })
}

async fn run_session(
    mut session: Session,
    mut rx: mpsc::UnboundedReceiver<Event>,
    done: oneshot::Sender<()>,
) -> SessionSummary {
    let mut ticker = tokio::time::interval(Duration::from_millis(session.tick_ms()));
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            biased;
            event = rx.recv() => match event {
                Some(Event::Attach { role, outbox, reply }) => {
                    let _ = reply.send(session.attach(role, outbox));
                }
                Some(Event::Frame { role, bytes }) => session.handle_frame(role, &bytes),
                Some(Event::Detach { role }) => session.detach(role),
                Some(Event::Close { role }) => {
                    session.close(role);
                }
                None => break,
            },
            _ = ticker.tick() => session.tick(),
        }
        if session.state() == SessionState::Closed {
            break;
        }
    }
    let summary = session.close(Role::Server);
    log::info!("session {} closed; log at {}", session.id(), session.log_path().display());
    let _ = done.send(());
    summary
}

#[derive(Deserialize)]
struct AttachQuery {
    role: Option<String>,
}

async fn attach(
    Path(id): Path<String>,
    Query(query): Query<AttachQuery>,
    State(app): State<App>,
    ws: WebSocketUpgrade,
) -> Response {
    if id != app.session_id {
        return (StatusCode::NOT_FOUND, format!("unknown session {id}")).into_response();
    }
    let role = match query.role.as_deref().map(str::parse::<Role>) {
        Some(Ok(role)) if role.is_human() => role,
        Some(_) => return (StatusCode::BAD_REQUEST, "role must be participant, dm or rn").into_response(),
        None => return (StatusCode::BAD_REQUEST, "missing role").into_response(),
    };
    ws.on_upgrade(move |socket| connection(socket, role, app))
}

async fn ui_page(Path(role): Path<String>, State(app): State<App>) -> Response {
    let Ok(role) = role.parse::<Role>() else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let Some(dir) = app.ui_dir else {
        return (StatusCode::NOT_FOUND, "no ui directory configured").into_response();
    };
    match tokio::fs::read_to_string(dir.join(format!("{role}.html"))).await {
        Ok(page) => Html(page).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn connection(socket: WebSocket, role: Role, app: App) {
    let (mut sink, mut stream) = socket.split();
    let (outbox, mut inbox) = mpsc::unbounded_channel::<Envelope>();
    let (reply_tx, reply_rx) = oneshot::channel();
    let attach = Event::Attach {
        role,
        outbox,
        reply: reply_tx,
    };
    if app.events.send(attach).is_err() {
        let _ = sink.send(close_message(1001, "session ended")).await;
        return;
    }
    match reply_rx.await {
        Ok(Ok(())) => {}
        Ok(Err(e)) => {
            let refusal = Envelope::new(
                app.session_id.clone(),
                Role::Server,
                Channel::ServerCtrl,
                Payload::error(e.code(), e.to_string()),
            );
            let _ = sink.send(text_message(&refusal)).await;
            let _ = sink.send(close_message(1008, e.code())).await;
            return;
        }
        Err(_) => {
            let _ = sink.send(close_message(1001, "session ended")).await;
            return;
        }
    }

    loop {
        tokio::select! {
            out = inbox.recv() => match out {
                Some(env) => {
                    if sink.send(text_message(&env)).await.is_err() {
                        let _ = app.events.send(Event::Detach { role });
                        break;
                    }
                }
                None => {
                    let _ = sink.send(close_message(1000, "session closed")).await;
                    break;
                }
            },
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let _ = app.events.send(Event::Frame { role, bytes: text.as_bytes().to_vec() });
                }
                Some(Ok(Message::Binary(bytes))) => {
                    let _ = app.events.send(Event::Frame { role, bytes: bytes.to_vec() });
                }
                Some(Ok(Message::Close(frame))) => {
                    let closes_session = role.is_wizard()
                        && frame.as_ref().is_some_and(|f| f.code == CLOSE_SESSION_CODE);
                    let event = if closes_session { Event::Close { role } } else { Event::Detach { role } };
                    let _ = app.events.send(event);
                    break;
                }
                Some(Ok(_)) => {}
                Some(Err(_)) | None => {
                    let _ = app.events.send(Event::Detach { role });
                    break;
                }
            },
        }
    }
}

fn text_message(env: &Envelope) -> Message {
    let text = String::from_utf8(encode(env)).expect("encoded frames are UTF-8");
    Message::Text(text.into())
}

fn close_message(code: u16, reason: &str) -> Message {
    Message::Close(Some(CloseFrame {
        code,
        reason: reason.to_string().into(),
    }))
}
