use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;

use serde_json::{json, Value};

use crate::env::protocol::{WireAction, PROTOCOL_VERSION};
use crate::env::{Env, Policy};
use crate::error::{Error, Result};
use crate::model::{Action, Scenario};

/// Blocking newline-delimited JSON client.
pub struct LineClient {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    buf: String,
}

impl LineClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self::from_parts(Box::new(reader), Box::new(stream)))
    }

    pub fn from_parts(reader: Box<dyn BufRead + Send>, writer: Box<dyn Write + Send>) -> Self {
        Self {
            reader,
            writer,
            buf: String::new(),
        }
    }

    /// Sends one request and returns the raw reply, successful or not.
    pub fn request(&mut self, request: &Value) -> Result<Value> {
        let mut line = serde_json::to_string(request)?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        self.buf.clear();
        if self.reader.read_line(&mut self.buf)? == 0 {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "connection closed before reply",
            )));
        }
        Ok(serde_json::from_str(self.buf.trim_end())?)
    }

    /// Like [`request`](Self::request) but turns `"ok": false` into an error.
    pub fn call(&mut self, request: &Value) -> Result<Value> {
        let reply = self.request(request)?;
        if reply.get("ok") == Some(&Value::Bool(true)) {
            Ok(reply)
        } else {
            let code = reply.get("code").and_then(Value::as_str).unwrap_or("unknown");
            let message = reply.get("message").and_then(Value::as_str).unwrap_or("");
            Err(Error::Policy(format!("{code}: {message}")))
        }
    }
}

/// Policy answered by an external process through `act` requests.
///
/// Before the first decision on a scenario the client sends it with
/// `load_scenario`; each decision then sends the action history, the
/// current vehicle and the mask, and expects `{"ok": true, "action": a}`.
pub struct RemotePolicy {
    client: LineClient,
    session: String,
    loaded: Option<usize>,
    episodes: u64,
}

impl RemotePolicy {
    pub fn new(client: LineClient, session: impl Into<String>) -> Self {
        Self {
            client,
            session: session.into(),
            loaded: None,
            episodes: 0,
        }
    }

    fn ensure_loaded(&mut self, scenario: &Arc<Scenario<f64>>) -> Result<()> {
        let key = Arc::as_ptr(scenario) as usize;
        if self.loaded != Some(key) {
            self.client.call(&json!({
                "v": PROTOCOL_VERSION,
                "type": "load_scenario",
                "session": self.session,
                "scenario_id": "policy",
                "scenario": scenario.to_file(),
            }))?;
            self.loaded = Some(key);
        }
        Ok(())
    }
}

impl Policy<f64> for RemotePolicy {
    fn select(&mut self, env: &Env<f64>, mask: &[bool]) -> Result<Action> {
        self.ensure_loaded(env.scenario())?;
        let state = env.state();
        if state.actions().is_empty() {
            self.episodes += 1;
        }
        let history: Vec<(i64, i64)> = state.actions().iter().map(|a| a.to_pair()).collect();
        let reply = self.client.call(&json!({
            "v": PROTOCOL_VERSION,
            "type": "act",
            "session": self.session,
            "episode": format!("solve-{}", self.episodes),
            "scenario_id": "policy",
            "step": history.len(),
            "vehicle": state.current_vehicle(),
            "history": history,
            "mask": mask,
        }))?;
        let action = reply
            .get("action")
            .cloned()
            .ok_or_else(|| Error::Policy("act reply has no `action`".into()))?;
        let action: WireAction = serde_json::from_value(action)?;
        action.resolve(env.graph().num_lines())
    }
}
