//! TCP service: one connection per session, one JSON message per line.

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use affect_core::engine::{Engine, EngineConfig};
use affect_core::model::ModelSet;
use affect_core::signal::SampleBlock;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};

use crate::error::{OrchestratorError, Result};
use crate::protocol::{Envelope, Message, Mode};
use crate::responses::ResponseDb;
use crate::session::{Session, SessionConfig};

pub struct ServerConfig {
    pub default_mode: Mode,
    pub seed: u64,
    pub shuffle_topics: bool,
    pub db: Arc<ResponseDb>,
    /// With models, clients may stream `Samples` and the server recognises emotions itself.
    pub engine: Option<(EngineConfig, Arc<ModelSet>)>,
}

impl ServerConfig {
    pub fn new(default_mode: Mode, db: ResponseDb) -> Self {
        Self {
            default_mode,
            seed: 0,
            shuffle_topics: false,
            db: Arc::new(db),
            engine: None,
        }
    }
}

/// Accepts connections until the listener fails.
pub async fn serve(listener: TcpListener, config: Arc<ServerConfig>) -> std::io::Result<()> {
    let active: Arc<Mutex<HashSet<String>>> = Arc::default();
    loop {
        let (stream, peer) = listener.accept().await?;
        let config = Arc::clone(&config);
        let active = Arc::clone(&active);
        tokio::spawn(async move {
            if let Err(e) = handle_connection(stream, config, active).await {
                log::warn!("connection from {peer} ended with error: {e}");
            }
        });
    }
}

fn error_reply(session: &str, t: f64, e: &OrchestratorError) -> Envelope {
    let code = match e {
        OrchestratorError::Protocol(_) => "protocol",
        OrchestratorError::Core(_) => "engine",
        _ => "internal",
    };
    Envelope::new(
        session,
        t,
        Message::Error {
            code: code.into(),
            message: e.to_string(),
        },
    )
}

/// Removes the session id from the active set when the connection ends.
struct Registration {
    id: String,
    active: Arc<Mutex<HashSet<String>>>,
}

impl Drop for Registration {
    fn drop(&mut self) {
        self.active.lock().unwrap().remove(&self.id);
    }
}

struct Connection {
    session: Session,
    engine: Option<Engine>,
}

impl Connection {
    /// Replies to one client envelope. Samples feed the server-side engine,
    /// whose events are forwarded and then applied to the session.
    fn on_message(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        let Message::Samples {
            kind,
            start_time,
            sample_rate,
            channels,
            data,
        } = &env.message
        else {
            return self.session.handle(env);
        };
        if env.session != self.session.id() {
            return Err(OrchestratorError::protocol(format!("unknown session `{}`", env.session)));
        }
        let engine = self
            .engine
            .as_mut()
            .ok_or_else(|| OrchestratorError::protocol("this server has no models; send EmotionEvent instead of Samples"))?;
        let block = SampleBlock::new(*kind, *start_time, *sample_rate, channels.clone(), data.clone())?;
        engine.ingest(block)?;
        let mut out = Vec::new();
        let Some(wm) = engine.watermark() else {
            return Ok(out);
        };
        for event in engine.advance_to(wm)? {
            let t = event.window.end.max(self.session.state().last_t);
            let forwarded = Envelope::new(self.session.id(), t, Message::EmotionEvent { event });
            let replies = self.session.handle(&forwarded)?;
            out.push(forwarded);
            out.extend(replies);
        }
        Ok(out)
    }
}

pub async fn handle_connection(stream: TcpStream, config: Arc<ServerConfig>, active: Arc<Mutex<HashSet<String>>>) -> Result<()> {
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    let io = |e: std::io::Error| OrchestratorError::Io(e.to_string());
    let mut conn: Option<(Connection, Registration)> = None;

    while let Some(line) = lines.next_line().await.map_err(io)? {
        if line.trim().is_empty() {
            continue;
        }
        let replies: Vec<Envelope> = match (Envelope::from_line(&line), conn.as_mut()) {
            (Err(e), c) => {
                let (id, t) = c.map_or((String::new(), 0.0), |(c, _)| (c.session.id().to_string(), c.session.state().last_t.max(0.0)));
                vec![error_reply(&id, t, &e)]
            }
            (Ok(env), None) => match &env.message {
                Message::Hello { mode } => {
                    let fresh = active.lock().unwrap().insert(env.session.clone());
                    if !fresh {
                        vec![error_reply(
                            &env.session,
                            env.t,
                            &OrchestratorError::protocol(format!("session `{}` is already connected", env.session)),
                        )]
                    } else {
                        let session_cfg = SessionConfig {
                            mode: mode.unwrap_or(config.default_mode),
                            seed: config.seed,
                            shuffle_topics: config.shuffle_topics,
                            topics: None,
                        };
                        let registration = Registration {
                            id: env.session.clone(),
                            active: Arc::clone(&active),
                        };
                        let session = Session::new(env.session.clone(), &session_cfg, Arc::clone(&config.db))?;
                        let engine = match &config.engine {
                            Some((cfg, models)) => Some(Engine::new(cfg.clone(), Arc::clone(models))?),
                            None => None,
                        };
                        let welcome = Envelope::new(
                            env.session.clone(),
                            env.t,
                            Message::Welcome {
                                mode: session_cfg.mode,
                                topics: session.topics().to_vec(),
                            },
                        );
                        conn = Some((Connection { session, engine }, registration));
                        vec![welcome]
                    }
                }
                other => vec![error_reply(
                    &env.session,
                    env.t,
                    &OrchestratorError::protocol(format!("expected Hello, got {}", other.type_name())),
                )],
            },
            (Ok(env), Some((c, _))) => match c.on_message(&env) {
                Ok(r) => r,
                Err(e) => vec![error_reply(c.session.id(), c.session.state().last_t.max(env.t), &e)],
            },
        };
        let mut buf = String::new();
        for r in &replies {
            buf.push_str(&r.to_line());
            buf.push('\n');
        }
        write.write_all(buf.as_bytes()).await.map_err(io)?;
        let done = conn
            .as_ref()
            .is_some_and(|(c, _)| c.session.state().phase == crate::session::Phase::Done);
        if done {
            break;
        }
    }
    write.shutdown().await.map_err(io)?;
    Ok(())
}
