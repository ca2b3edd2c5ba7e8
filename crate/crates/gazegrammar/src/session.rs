//! One live pipeline plus its message handling. Synchronous; the server wraps
//! it in an actor and replay drives it directly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use gazegrammar_core::geometry::GazePixel;
use gazegrammar_core::intent::GazeSample;
use gazegrammar_core::pipeline::{Pipeline, SceneSnapshot};
use serde::Serialize;

use crate::config::Config;
use crate::protocol::{
    error_reply, ClientEnvelope, ClientMessage, Envelope, OpenSession, ServerEnvelope, ServerMessage,
    SessionOpened,
};

/// Where an outgoing message goes: back to the sender or to every subscriber.
#[derive(Debug, Clone, PartialEq)]
pub enum Outgoing {
    Reply(ServerEnvelope),
    Broadcast(ServerEnvelope),
}

impl Outgoing {
    pub fn envelope(&self) -> &ServerEnvelope {
        match self {
            Outgoing::Reply(e) | Outgoing::Broadcast(e) => e,
        }
    }
}

#[derive(Serialize)]
struct LogLine<'a, T> {
    dir: &'a str,
    msg: &'a T,
}

/// Writes `{"dir":"in"|"out","msg":...}` lines, flushed per line.
pub struct SessionLog {
    w: BufWriter<File>,
}

impl SessionLog {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            w: BufWriter::new(File::create(path)?),
        })
    }

    fn line<T: Serialize>(&mut self, dir: &str, msg: &T) {
        let text = serde_json::to_string(&LogLine { dir, msg }).expect("serializable");
        // A failing log must not take the session down.
        if let Err(e) = writeln!(self.w, "{text}").and_then(|_| self.w.flush()) {
            tracing::warn!("session log write failed: {e}");
        }
    }
}

pub struct Session {
    id: String,
    pipeline: Pipeline,
    log: Option<SessionLog>,
}

pub struct Opened {
    pub session: Session,
    /// The open message with scene and config filled in, as recorded.
    pub resolved: OpenSession,
    pub outputs: Vec<Outgoing>,
}

/// Fill in the scene, config and time scale an open message left out.
/// `time_scale` overrides whatever the message carries.
pub fn resolve_open(open: &OpenSession, base: &Config, time_scale: Option<f64>) -> Result<OpenSession, ServerMessage> {
    let time_scale = time_scale.or(open.time_scale).unwrap_or(1.0);
    if !(time_scale.is_finite() && time_scale >= 0.0) {
        return Err(error_reply("bad_config", "time_scale must be finite and non-negative"));
    }
    let mut config = open.config.clone().unwrap_or_else(|| base.clone());
    let scene = match &open.scene {
        Some(doc) => doc.clone(),
        None => config
            .scene_document()
            .map_err(|e| error_reply("bad_config", e))?,
    };
    config.scene = None;
    Ok(OpenSession {
        scene: Some(scene),
        config: Some(config),
        time_scale: Some(time_scale),
    })
}

impl Session {
    pub fn open(
        id: &str,
        seq: Option<u64>,
        open: &OpenSession,
        base: &Config,
        time_scale: Option<f64>,
        log: Option<SessionLog>,
    ) -> Result<Opened, ServerMessage> {
        let resolved = resolve_open(open, base, time_scale)?;
        let config = resolved.config.as_ref().expect("resolved");
        let scene_doc = resolved.scene.clone().expect("resolved");
        let r = config
            .resolve_with_scene(scene_doc)
            .map_err(|e| error_reply("bad_config", e))?;
        let mut pcfg = r.pipeline;
        pcfg.time_scale = resolved.time_scale.expect("resolved");
        let mut pipeline = Pipeline::new(r.scene, pcfg).map_err(|e| error_reply(e.code(), e))?;
        let events = pipeline.open_events().map_err(|e| error_reply(e.code(), e))?;
        let mut session = Session {
            id: id.to_string(),
            pipeline,
            log,
        };
        let in_env = Envelope::new(ClientMessage::OpenSession(resolved.clone())).with_seq(seq);
        if let Some(log) = session.log.as_mut() {
            log.line("in", &in_env);
        }
        let mut outputs = vec![Outgoing::Reply(
            Envelope::new(ServerMessage::SessionOpened(SessionOpened {
                session_id: id.to_string(),
                fsm_state: session.pipeline.fsm_state(),
            }))
            .with_seq(seq)
            .with_session(id),
        )];
        outputs.extend(events.into_iter().map(|ev| session.event(ev)));
        session.record(&outputs);
        Ok(Opened {
            session,
            resolved,
            outputs,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn snapshot(&self) -> Result<SceneSnapshot, ServerMessage> {
        self.pipeline.snapshot().map_err(|e| error_reply(e.code(), e))
    }

    fn event(&self, ev: gazegrammar_core::pipeline::SessionEvent) -> Outgoing {
        Outgoing::Broadcast(
            Envelope::new(ServerMessage::Event(ev.clone()))
                .with_seq(Some(ev.seq))
                .with_session(&self.id),
        )
    }

    fn reply(&self, seq: Option<u64>, body: ServerMessage) -> Outgoing {
        Outgoing::Reply(Envelope::new(body).with_seq(seq).with_session(&self.id))
    }

    fn record(&mut self, outputs: &[Outgoing]) {
        if let Some(log) = self.log.as_mut() {
            for o in outputs {
                log.line("out", o.envelope());
            }
        }
    }

    /// Handle one client message addressed to this session.
    pub fn handle(&mut self, env: &ClientEnvelope) -> Vec<Outgoing> {
        if let Some(log) = self.log.as_mut() {
            log.line("in", env);
        }
        let out = self.dispatch(env);
        self.record(&out);
        out
    }

    fn dispatch(&mut self, env: &ClientEnvelope) -> Vec<Outgoing> {
        let seq = env.seq;
        if let Some(id) = env.body.session_id() {
            if id != self.id {
                return vec![self.reply(seq, error_reply("unknown_session", format!("no session `{id}`")))];
            }
        }
        let result = match &env.body {
            ClientMessage::OpenSession(_) => {
                return vec![self.reply(seq, error_reply("bad_message", "session already open"))];
            }
            ClientMessage::Subscribe(_) => return vec![self.reply(seq, ServerMessage::Ack {})],
            ClientMessage::IngestGaze(g) => {
                let s = &g.sample;
                let sample = GazeSample {
                    t: s.t,
                    pixel: GazePixel {
                        px: s.px,
                        py: s.py,
                        depth_m: s.depth_m,
                    },
                    head_pose: s.head_pose.unwrap_or(self.pipeline.config().head_pose),
                };
                self.pipeline.ingest(&sample)
            }
            ClientMessage::Inject(i) => self.pipeline.inject(&i.command),
        };
        match result {
            Ok(events) => {
                let mut out: Vec<Outgoing> = events.into_iter().map(|ev| self.event(ev)).collect();
                out.push(self.reply(seq, ServerMessage::Ack {}));
                out
            }
            Err(e) => {
                let ev = self.pipeline.error_event(&e);
                vec![self.event(ev), self.reply(seq, error_reply(e.code(), &e))]
            }
        }
    }
}
