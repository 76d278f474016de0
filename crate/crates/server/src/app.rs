//! HTTP and WebSocket front end. Each session owns one tick task while a game
//! runs; sockets only touch the session through its mutex.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use forage_core::SimConfig;
use futures_util::{SinkExt, StreamExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;
use tokio::time::MissedTickBehavior;

use crate::protocol::{ClientMessage, ServerMessage};
use crate::schedule::{build_schedule, enumerate_conditions, parse_schedule, ScheduleEntry, ScheduledGame};
use crate::session::{GameLog, Session, SessionState};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub port: u16,
    /// Base seed; a session created without its own seed uses `seed ^ k` for the k-th session.
    pub seed: u64,
    /// Fixed game sequence for every session instead of a seeded one.
    pub schedule: Option<Vec<ScheduledGame>>,
    /// Completed game logs are also written here.
    pub log_dir: Option<PathBuf>,
    pub template: SimConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            port: 8080,
            seed: 0,
            schedule: None,
            log_dir: None,
            template: SimConfig::default(),
        }
    }
}

impl ServerConfig {
    pub fn load_schedule(&mut self, path: &std::path::Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        self.schedule = Some(parse_schedule(&text)?);
        Ok(())
    }
}

type Outbox = mpsc::UnboundedSender<String>;

struct SessionHandle {
    session: Mutex<Session>,
    clients: Mutex<Clients>,
}

#[derive(Default)]
struct Clients {
    participants: HashMap<u32, Outbox>,
    operators: Vec<Outbox>,
}

impl Clients {
    fn broadcast(&mut self, text: &str) {
        for tx in self.participants.values() {
            let _ = tx.send(text.to_string());
        }
        self.operators.retain(|tx| tx.send(text.to_string()).is_ok());
    }
}

impl SessionHandle {
    fn clients(&self) -> std::sync::MutexGuard<'_, Clients> {
        self.clients.lock().expect("client table poisoned")
    }

    fn session(&self) -> std::sync::MutexGuard<'_, Session> {
        self.session.lock().expect("session poisoned")
    }
}

pub struct AppState {
    config: ServerConfig,
    deployments: AtomicUsize,
    sessions: Mutex<HashMap<String, Arc<SessionHandle>>>,
}

impl AppState {
    fn get(&self, id: &str) -> Option<Arc<SessionHandle>> {
        self.sessions.lock().expect("session table poisoned").get(id).cloned()
    }
}

pub fn router(config: ServerConfig) -> Router {
    let state = Arc::new(AppState {
        config,
        deployments: AtomicUsize::new(0),
        sessions: Mutex::new(HashMap::new()),
    });
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_status))
        .route("/sessions/{id}/schedule", get(get_schedule))
        .route("/sessions/{id}/ws", get(ws_upgrade))
        .route("/sessions/{id}/logs", get(list_logs))
        .route("/sessions/{id}/logs/{index}", get(get_log))
        .with_state(state)
}

/// Binds `0.0.0.0:port` and serves until the process is stopped.
pub async fn serve(config: ServerConfig) -> std::io::Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(config)).await
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct CreateSession {
    pub seed: Option<u64>,
    pub schedule: Option<Vec<ScheduleEntry>>,
    pub config: Option<SimConfig>,
}

#[derive(Debug, Serialize)]
struct SessionInfo {
    id: String,
    seed: u64,
    state: SessionState,
    current_game: usize,
    schedule: Vec<ScheduledGame>,
    roster: Vec<crate::session::Participant>,
}

impl SessionInfo {
    fn of(s: &Session) -> SessionInfo {
        SessionInfo {
            id: s.id.clone(),
            seed: s.seed,
            state: s.state(),
            current_game: s.current_game(),
            schedule: s.schedule().to_vec(),
            roster: s.roster().cloned().collect(),
        }
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn create_session(State(app): State<Arc<AppState>>, body: Option<Json<CreateSession>>) -> Response {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let template = req.config.unwrap_or_else(|| app.config.template.clone());
    if let Err(e) = forage_core::validate_config(template.clone()) {
        return error(StatusCode::BAD_REQUEST, e.to_string());
    }
    let rotation = app.deployments.fetch_add(1, Ordering::SeqCst);
    let seed = req.seed.unwrap_or(app.config.seed ^ rotation as u64);
    let schedule = match req.schedule {
        Some(entries) => {
            let mut games = Vec::with_capacity(entries.len());
            for e in entries {
                match e.condition.parse() {
                    Ok(condition) => games.push(ScheduledGame {
                        condition,
                        switch_time: e.switch_time,
                    }),
                    Err(err) => return error(StatusCode::BAD_REQUEST, format!("{err}")),
                }
            }
            games
        }
        None => match &app.config.schedule {
            Some(s) => s.clone(),
            None => build_schedule(
                &enumerate_conditions(),
                &template.switch_time_choices,
                rotation,
                &mut ChaCha8Rng::seed_from_u64(seed),
            ),
        },
    };
    if schedule.is_empty() {
        return error(StatusCode::BAD_REQUEST, "empty schedule");
    }
    let id = format!("s{rotation}");
    let session = Session::new(id.clone(), seed, template, schedule);
    let info = SessionInfo::of(&session);
    app.sessions.lock().expect("session table poisoned").insert(
        id,
        Arc::new(SessionHandle {
            session: Mutex::new(session),
            clients: Mutex::new(Clients::default()),
        }),
    );
    (StatusCode::CREATED, Json(info)).into_response()
}

async fn session_status(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match app.get(&id) {
        Some(h) => Json(SessionInfo::of(&h.session())).into_response(),
        None => error(StatusCode::NOT_FOUND, "no such session"),
    }
}

async fn get_schedule(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match app.get(&id) {
        Some(h) => Json(h.session().schedule().to_vec()).into_response(),
        None => error(StatusCode::NOT_FOUND, "no such session"),
    }
}

async fn list_logs(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let Some(h) = app.get(&id) else {
        return error(StatusCode::NOT_FOUND, "no such session");
    };
    let session = h.session();
    match session.export_logs() {
        Ok(logs) => Json(logs.to_vec()).into_response(),
        Err(e) => error(StatusCode::CONFLICT, e.to_string()),
    }
}

async fn get_log(State(app): State<Arc<AppState>>, Path((id, index)): Path<(String, usize)>) -> Response {
    let Some(h) = app.get(&id) else {
        return error(StatusCode::NOT_FOUND, "no such session");
    };
    let session = h.session();
    match session.logs().iter().find(|l| l.index == index) {
        Some(l) => ([(header::CONTENT_TYPE, "application/x-ndjson")], l.bytes.clone()).into_response(),
        None => error(StatusCode::NOT_FOUND, "no such log"),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Role {
    Operator,
    #[default]
    Participant,
}

#[derive(Debug, Default, Deserialize)]
struct WsQuery {
    #[serde(default)]
    role: Role,
}

async fn ws_upgrade(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<WsQuery>,
    ws: WebSocketUpgrade,
) -> Response {
    let Some(handle) = app.get(&id) else {
        return error(StatusCode::NOT_FOUND, "no such session");
    };
    ws.on_upgrade(move |socket| client_loop(app, handle, q.role, socket))
}

async fn client_loop(app: Arc<AppState>, handle: Arc<SessionHandle>, role: Role, socket: WebSocket) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    if role == Role::Operator {
        handle.clients().operators.push(tx.clone());
    }
    let mut me: Option<u32> = None;
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = match serde_json::from_str::<ClientMessage>(&text) {
            Ok(m) => handle_message(&app, &handle, role, &mut me, &tx, m),
            Err(e) => Some(ServerMessage::error(format!("bad message: {e}"))),
        };
        if let Some(r) = reply {
            let _ = tx.send(r.to_text());
        }
    }
    if let Some(id) = me {
        handle.clients().participants.remove(&id);
        handle.session().disconnect(id);
    }
    drop(tx);
    let _ = writer.await;
}

fn handle_message(
    app: &Arc<AppState>,
    handle: &Arc<SessionHandle>,
    role: Role,
    me: &mut Option<u32>,
    tx: &Outbox,
    msg: ClientMessage,
) -> Option<ServerMessage> {
    match (role, msg) {
        (Role::Participant, ClientMessage::Join { name }) => {
            if me.is_some() {
                return Some(ServerMessage::error("already joined"));
            }
            let joined = handle.session().join(&name);
            match joined {
                Ok(p) => {
                    handle.clients().participants.insert(p.id, tx.clone());
                    *me = Some(p.id);
                    let grid = &app.config.template;
                    Some(ServerMessage::Joined {
                        id: p.id,
                        icon: p.icon,
                        width: grid.world_width as i32,
                        height: grid.world_height as i32,
                    })
                }
                Err(e) => Some(ServerMessage::error(e.to_string())),
            }
        }
        (Role::Participant, ClientMessage::Input { dir, .. }) => {
            let Some(id) = *me else {
                return Some(ServerMessage::error("join first"));
            };
            handle
                .session()
                .ingest_input(id, dir)
                .err()
                .map(|e| ServerMessage::error(e.to_string()))
        }
        (Role::Operator, ClientMessage::StartGame) => {
            let started = handle.session().start_game();
            match started {
                Ok((start, first)) => {
                    let tick_seconds = handle.session().tick_seconds();
                    deliver(handle, Some(&start), &first.views);
                    tokio::spawn(drive_game(app.clone(), handle.clone(), tick_seconds));
                    None
                }
                Err(e) => Some(ServerMessage::error(e.to_string())),
            }
        }
        (Role::Operator, ClientMessage::Abort) => {
            let over = handle.session().abort();
            if let Some(over) = over {
                handle.clients().broadcast(&over.to_text());
                let partial = handle.session().logs().last().cloned();
                if let (Some(dir), Some(log)) = (&app.config.log_dir, partial) {
                    tokio::spawn(persist(dir.clone(), log));
                }
            }
            None
        }
        (Role::Operator, _) => Some(ServerMessage::error("operators may only send start_game or abort")),
        (Role::Participant, _) => Some(ServerMessage::error("operator command")),
    }
}

fn deliver(handle: &SessionHandle, broadcast: Option<&ServerMessage>, views: &[(u32, ServerMessage)]) {
    let mut clients = handle.clients();
    if let Some(b) = broadcast {
        clients.broadcast(&b.to_text());
    }
    for (pid, view) in views {
        if let Some(tx) = clients.participants.get(pid) {
            let _ = tx.send(view.to_text());
        }
    }
}

/// Fixed-cadence tick loop. Late ticks are run back to back to catch up, so
/// the mean interval stays at `tick_seconds`.
async fn drive_game(app: Arc<AppState>, handle: Arc<SessionHandle>, tick_seconds: f64) {
    let period = Duration::from_secs_f64(tick_seconds);
    let mut interval = tokio::time::interval_at(tokio::time::Instant::now() + period, period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
    loop {
        interval.tick().await;
        let out = {
            let mut s = handle.session();
            if s.state() != SessionState::Running {
                // aborted
                return;
            }
            match s.advance() {
                Ok(out) => out,
                Err(e) => {
                    tracing::error!("session {}: {e}", s.id);
                    let over = s.abort();
                    drop(s);
                    if let Some(over) = over {
                        handle.clients().broadcast(&over.to_text());
                    }
                    return;
                }
            }
        };
        deliver(&handle, None, &out.views);
        if let Some(over) = out.game_over {
            handle.clients().broadcast(&over.to_text());
            let last = handle.session().logs().last().cloned();
            if let (Some(dir), Some(log)) = (&app.config.log_dir, last) {
                persist(dir.clone(), log).await;
            }
            return;
        }
    }
}

async fn persist(dir: PathBuf, log: GameLog) {
    let path = dir.join(format!("{}.jsonl", log.name));
    let result = async {
        tokio::fs::create_dir_all(&dir).await?;
        tokio::fs::write(&path, &log.bytes).await
    }
    .await;
    match result {
        Ok(()) => tracing::info!("wrote {}", path.display()),
        Err(e) => tracing::error!("could not write {}: {e}", path.display()),
    }
}
