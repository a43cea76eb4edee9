//! Newline-delimited JSON protocol for driving episodes remotely.
//!
//! Each request is one JSON object on one line; each reply is one line.
//! Every request names its `session`; episode-level requests also name
//! their `episode`. Replies echo `type`, `session` and any request `id`,
//! and carry `"ok": true` or `"ok": false` with an error `code`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::env::Env;
use crate::error::Error;
use crate::model::{Action, Entrance, Plan, Scenario, ScenarioFile};
use crate::objectives::{evaluate_plan, FuelConvention, Objective, RewardConfig};

pub const PROTOCOL_VERSION: u32 = 1;

/// An action on the wire: a flattened index or a `[node, entrance]` pair
/// with node `-1` for the separator.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum WireAction {
    Index(usize),
    Pair(i64, i64),
}

impl WireAction {
    pub fn resolve(self, num_lines: usize) -> Result<Action, Error> {
        let bad = |reason: &str| Error::IllegalAction {
            action: format!("{self:?}"),
            reason: reason.to_string(),
        };
        match self {
            WireAction::Index(i) => Action::from_index(i, num_lines).ok_or_else(|| bad("index outside the action space")),
            WireAction::Pair(-1, _) => Ok(Action::Separator),
            WireAction::Pair(node, e) => {
                let line = usize::try_from(node).map_err(|_| bad("negative node"))?;
                let e = usize::try_from(e).ok().and_then(Entrance::from_index).ok_or_else(|| bad("entrance must be 0 or 1"))?;
                if line >= num_lines {
                    return Err(bad("unknown line"));
                }
                Ok(Action::visit(line, e))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
struct StepItem {
    episode: String,
    action: WireAction,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Request {
    Hello,
    LoadScenario {
        scenario_id: Option<String>,
        scenario: Option<Box<ScenarioFile<f64>>>,
        path: Option<String>,
    },
    Reset {
        episode: String,
        scenario_id: Option<String>,
        reward: Option<RewardConfig>,
        objective: Option<Objective>,
        #[serde(default = "yes")]
        include_graph: bool,
    },
    Step {
        episode: Option<String>,
        action: Option<WireAction>,
        steps: Option<Vec<StepItem>>,
        #[serde(default = "yes")]
        include_mask: bool,
    },
    Evaluate {
        episode: Option<String>,
        scenario_id: Option<String>,
        plan: Option<Vec<(i64, i64)>>,
        fuel_convention: Option<FuelConvention>,
    },
    Close {
        episode: Option<String>,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct Envelope {
    v: Option<u32>,
    session: Option<String>,
    #[serde(flatten)]
    request: Request,
}

/// A protocol failure: stable code plus human-readable message.
#[derive(Clone, Debug, PartialEq)]
pub struct Fault {
    pub code: &'static str,
    pub message: String,
}

impl Fault {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Fault {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::IllegalAction { .. } => "illegal_action",
            Error::EpisodeDone => "episode_done",
            Error::EpisodeNotDone => "episode_not_done",
            Error::Unknown { .. } => "not_found",
            Error::Version { .. } => "unsupported_version",
            Error::InvalidPlan(_) => "invalid_plan",
            Error::MalformedGraph(_) | Error::InvalidVehicle { .. } | Error::Disconnected(_) => "invalid_scenario",
            Error::Json(_) => "bad_request",
            Error::File { .. } | Error::Io(_) => "io",
            _ => "internal",
        };
        Fault::new(code, e.to_string())
    }
}

type Shared<T> = Arc<Mutex<T>>;

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Default)]
struct Session {
    scenarios: Mutex<HashMap<String, Arc<Scenario<f64>>>>,
    episodes: Mutex<HashMap<String, Shared<Env<f64>>>>,
}

impl Session {
    fn scenario(&self, id: Option<&str>) -> Result<(String, Arc<Scenario<f64>>), Fault> {
        let scenarios = lock(&self.scenarios);
        let found = match id {
            Some(id) => scenarios.get_key_value(id),
            None if scenarios.len() == 1 => scenarios.iter().next(),
            None => scenarios.get_key_value("default"),
        };
        found
            .map(|(k, v)| (k.clone(), v.clone()))
            .ok_or_else(|| Fault::new("not_found", format!("unknown scenario `{}`", id.unwrap_or("default"))))
    }

    fn episode(&self, id: &str) -> Result<Shared<Env<f64>>, Fault> {
        lock(&self.episodes)
            .get(id)
            .cloned()
            .ok_or_else(|| Fault::new("not_found", format!("unknown episode `{id}`")))
    }
}

/// Holds every session; shared by all connections.
pub struct Hub {
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    max_sessions: usize,
}

impl Hub {
    pub fn new(max_sessions: usize) -> Self {
        Self {
            sessions: Mutex::new(HashMap::new()),
            max_sessions,
        }
    }

    pub fn session_count(&self) -> usize {
        lock(&self.sessions).len()
    }

    fn session(&self, id: &str, create: bool) -> Result<Arc<Session>, Fault> {
        let mut sessions = lock(&self.sessions);
        if let Some(s) = sessions.get(id) {
            return Ok(s.clone());
        }
        if !create {
            return Err(Fault::new("not_found", format!("unknown session `{id}`")));
        }
        if sessions.len() >= self.max_sessions {
            return Err(Fault::new(
                "too_many_sessions",
                format!("session limit of {} reached", self.max_sessions),
            ));
        }
        let s = Arc::new(Session::default());
        sessions.insert(id.to_string(), s.clone());
        Ok(s)
    }

    /// Handles one request line and returns the reply line, without the
    /// trailing newline.
    pub fn handle_line(&self, line: &str) -> String {
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return error_reply(&Map::new(), &Fault::new("bad_request", e.to_string())).to_string(),
        };
        self.handle(value).to_string()
    }

    pub fn handle(&self, value: Value) -> Value {
        let mut echo = Map::new();
        if let Some(obj) = value.as_object() {
            for key in ["type", "session", "id"] {
                if let Some(v) = obj.get(key) {
                    echo.insert(key.to_string(), v.clone());
                }
            }
        }
        let envelope: Envelope = match serde_json::from_value(value) {
            Ok(e) => e,
            Err(e) => return error_reply(&echo, &Fault::new("bad_request", e.to_string())),
        };
        match self.dispatch(envelope) {
            Ok(Value::Object(body)) => {
                let mut reply = echo;
                reply.insert("ok".into(), Value::Bool(true));
                reply.extend(body);
                Value::Object(reply)
            }
            Ok(other) => other,
            Err(f) => error_reply(&echo, &f),
        }
    }

    fn dispatch(&self, env: Envelope) -> Result<Value, Fault> {
        if let Some(v) = env.v {
            if v != PROTOCOL_VERSION {
                return Err(Fault::new(
                    "unsupported_version",
                    format!("protocol version {v} is not supported (server speaks {PROTOCOL_VERSION})"),
                ));
            }
        }
        let session_id = || {
            env.session
                .as_deref()
                .ok_or_else(|| Fault::new("bad_request", "missing `session`"))
        };
        match env.request {
            Request::Hello => Ok(json!({
                "version": PROTOCOL_VERSION,
                "server": "edvrp",
                "max_sessions": self.max_sessions,
                "messages": ["hello", "load_scenario", "reset", "step", "evaluate", "close"],
            })),
            Request::LoadScenario { scenario_id, scenario, path } => {
                let session = self.session(session_id()?, true)?;
                let scenario = match (scenario, path) {
                    (Some(file), None) => Scenario::from_file(*file)?,
                    (None, Some(path)) => Scenario::load(Path::new(&path))?,
                    _ => return Err(Fault::new("bad_request", "give exactly one of `scenario` or `path`")),
                };
                let id = scenario_id.unwrap_or_else(|| "default".into());
                let reply = json!({
                    "scenario_id": id,
                    "num_lines": scenario.graph.num_lines(),
                    "num_vehicles": scenario.graph.num_vehicles(),
                    "mode": scenario.graph.mode(),
                });
                lock(&session.scenarios).insert(id, Arc::new(scenario));
                Ok(reply)
            }
            Request::Reset {
                episode,
                scenario_id,
                reward,
                objective,
                include_graph,
            } => {
                let session = self.session(session_id()?, true)?;
                let (sid, scenario) = session.scenario(scenario_id.as_deref())?;
                let config = match (reward, objective) {
                    (Some(r), _) => r,
                    (None, Some(o)) => RewardConfig::new(o),
                    (None, None) => RewardConfig::default(),
                };
                let slot = lock(&session.episodes).get(&episode).cloned();
                let slot = match slot {
                    Some(slot) => {
                        let mut e = lock(&slot);
                        let step = e.global_step();
                        *e = Env::new(scenario.clone(), config);
                        e.set_global_step(step);
                        drop(e);
                        slot
                    }
                    None => {
                        let slot = Arc::new(Mutex::new(Env::new(scenario.clone(), config)));
                        lock(&session.episodes).insert(episode.clone(), slot.clone());
                        slot
                    }
                };
                let env = lock(&slot);
                let g = env.graph();
                let mut reply = json!({
                    "episode": episode,
                    "scenario_id": sid,
                    "num_lines": g.num_lines(),
                    "num_vehicles": g.num_vehicles(),
                    "mode": g.mode(),
                    "episode_length": env.episode_length(),
                    "global_step": env.global_step(),
                    "mask": env.mask(),
                    "done": env.is_done(),
                });
                if include_graph {
                    let file = scenario.to_file();
                    let obj = reply.as_object_mut().unwrap();
                    obj.insert("nodes".into(), json!(file.nodes));
                    obj.insert("edges".into(), json!(file.edges));
                    obj.insert("vehicles".into(), json!(file.vehicles));
                    obj.insert("pins".into(), json!(file.pins));
                    if let Some(p) = file.line_plots {
                        obj.insert("line_plots".into(), json!(p));
                    }
                }
                Ok(reply)
            }
            Request::Step {
                episode,
                action,
                steps,
                include_mask,
            } => {
                let session = self.session(session_id()?, false)?;
                match (episode, action, steps) {
                    (Some(ep), Some(a), None) => step_one(&session, &ep, a, include_mask),
                    (None, None, Some(items)) => {
                        let results: Vec<Value> = items
                            .into_iter()
                            .map(|item| match step_one(&session, &item.episode, item.action, include_mask) {
                                Ok(Value::Object(mut body)) => {
                                    body.insert("ok".into(), Value::Bool(true));
                                    Value::Object(body)
                                }
                                Ok(v) => v,
                                Err(f) => json!({"ok": false, "episode": item.episode, "code": f.code, "message": f.message}),
                            })
                            .collect();
                        Ok(json!({ "results": results }))
                    }
                    _ => Err(Fault::new(
                        "bad_request",
                        "step needs `episode` and `action`, or a `steps` batch",
                    )),
                }
            }
            Request::Evaluate {
                episode,
                scenario_id,
                plan,
                fuel_convention,
            } => {
                let session = self.session(session_id()?, false)?;
                match (episode, plan) {
                    (Some(ep), None) => {
                        let slot = session.episode(&ep)?;
                        let env = lock(&slot);
                        let objectives = match fuel_convention {
                            Some(c) => env.state().objectives(&env.scenario().vehicles, c)?,
                            None => env.objectives()?,
                        };
                        Ok(json!({
                            "episode": ep,
                            "plan": env.state().plan().to_pairs(),
                            "objectives": objectives,
                            "reward_sums": env.state().reward_sums(),
                        }))
                    }
                    (None, Some(pairs)) => {
                        let (_, scenario) = session.scenario(scenario_id.as_deref())?;
                        let plan = Plan::from_pairs(&pairs)?;
                        let objectives = evaluate_plan(
                            &scenario.graph,
                            &scenario.vehicles,
                            &plan,
                            fuel_convention.unwrap_or_default(),
                        )?;
                        Ok(json!({ "plan": pairs, "objectives": objectives }))
                    }
                    _ => Err(Fault::new("bad_request", "evaluate needs `episode` or `plan`")),
                }
            }
            Request::Close { episode } => {
                let id = session_id()?;
                match episode {
                    Some(ep) => {
                        let session = self.session(id, false)?;
                        let removed = lock(&session.episodes).remove(&ep).is_some();
                        if !removed {
                            return Err(Fault::new("not_found", format!("unknown episode `{ep}`")));
                        }
                        Ok(json!({ "episode": ep, "closed": "episode" }))
                    }
                    None => {
                        if lock(&self.sessions).remove(id).is_none() {
                            return Err(Fault::new("not_found", format!("unknown session `{id}`")));
                        }
                        Ok(json!({ "closed": "session" }))
                    }
                }
            }
        }
    }
}

fn step_one(session: &Session, episode: &str, action: WireAction, include_mask: bool) -> Result<Value, Fault> {
    let slot = session.episode(episode)?;
    let mut env = lock(&slot);
    let action = action.resolve(env.graph().num_lines())?;
    let step = env.step(action)?;
    let mut reply = json!({
        "episode": episode,
        "rewards": step.rewards,
        "reward": step.combined,
        "done": step.done,
        "vehicle": env.state().current_vehicle(),
        "step": env.state().actions().len(),
    });
    if include_mask {
        reply.as_object_mut().unwrap().insert("mask".into(), json!(step.mask));
    }
    Ok(reply)
}

fn error_reply(echo: &Map<String, Value>, fault: &Fault) -> Value {
    let mut reply = echo.clone();
    reply.insert("ok".into(), Value::Bool(false));
    reply.insert("code".into(), Value::String(fault.code.into()));
    reply.insert("message".into(), Value::String(fault.message.clone()));
    Value::Object(reply)
}
