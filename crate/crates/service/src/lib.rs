//! HTTP service over a trained checkpoint.
//!
//! Endpoints: `GET /health`, `GET /model/info`, `POST /infer` and
//! `GET /front?samples=N[&expert=ID|all][&component=ID]`. Every response
//! carries the checkpoint format `version`. Until a checkpoint is loaded all
//! endpoints answer 503.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, OnceLock, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use hyperfront::hypernet::param_count;
use hyperfront::metrics::med;
use hyperfront::problems::{FrontOracle, Problem};
use hyperfront::train::{front_sweep, Checkpoint, Inference, Mode, TrainError, CHECKPOINT_VERSION};

/// Request-level failures, each mapped to one status code.
#[derive(Debug, Error)]
pub enum ApiError {
    #[error("checkpoint is still loading")]
    Loading,
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Loading => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<TrainError> for ApiError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Component { .. } | TrainError::Scalarize(_) | TrainError::Problem(_) => {
                ApiError::Unprocessable(e.to_string())
            }
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "version": CHECKPOINT_VERSION, "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

struct Loaded {
    ck: Checkpoint,
    problem: Problem,
    oracle: OnceLock<FrontOracle>,
    /// Oracle targets keyed by preference and anchor rounded to 1e-3.
    targets: RwLock<HashMap<Vec<i64>, Vec<f64>>>,
}

/// Shared, read-mostly service state.
#[derive(Clone, Default)]
pub struct ServiceState {
    inner: Arc<OnceLock<Loaded>>,
}

impl ServiceState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_checkpoint(ck: Checkpoint) -> Self {
        let s = Self::new();
        s.load(ck);
        s
    }

    /// Installs the checkpoint; later calls are ignored.
    pub fn load(&self, ck: Checkpoint) {
        let problem = ck.config.problem();
        let _ = self.inner.set(Loaded { ck, problem, oracle: OnceLock::new(), targets: RwLock::new(HashMap::new()) });
    }

    pub fn is_loaded(&self) -> bool {
        self.inner.get().is_some()
    }

    /// Answers one inference request exactly as `POST /infer` would.
    pub fn answer(&self, req: &InferRequest) -> Result<InferResponse, ApiError> {
        self.loaded()?.run(req)
    }

    fn loaded(&self) -> Result<&Loaded, ApiError> {
        self.inner.get().ok_or(ApiError::Loading)
    }
}

pub fn router(state: ServiceState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/model/info", get(info))
        .route("/infer", post(infer))
        .route("/front", get(front))
        .with_state(state)
}

/// Binds and serves until the process is stopped.
pub async fn serve(state: ServiceState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

async fn health(State(state): State<ServiceState>) -> Response {
    if state.is_loaded() {
        Json(json!({ "version": CHECKPOINT_VERSION, "status": "ok" })).into_response()
    } else {
        ApiError::Loading.into_response()
    }
}

async fn info(State(state): State<ServiceState>) -> Result<Json<Value>, ApiError> {
    let l = state.loaded()?;
    let c = &l.ck.config;
    let per_model = param_count(&c.arch);
    Ok(Json(json!({
        "version": l.ck.format_version,
        "problem": c.problem,
        "mode": c.mode,
        "kind": c.arch.kind,
        "m": c.arch.m,
        "n": c.arch.n,
        "d": c.arch.d,
        "e": c.arch.e,
        "k": c.arch.k,
        "activation": c.arch.activation,
        "constraint": c.arch.constraint,
        "anchors": c.anchors,
        "param_count": per_model,
        "models": l.ck.models.len(),
        "total_params": per_model * l.ck.models.len(),
        "seed": l.ck.seed,
        "iterations": c.iterations,
        "alpha": c.alpha,
        "lr": c.lr,
    })))
}

/// Parsed `/infer` body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferRequest {
    pub r: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_id: Option<usize>,
    /// Attach the oracle target and its distance to `f`.
    #[serde(default)]
    pub target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferResponse {
    pub version: u32,
    pub r: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub expert_id: Option<usize>,
    pub component: usize,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub chebyshev: f64,
    pub argmax: usize,
    pub feasible: bool,
    pub lower_ok: Vec<bool>,
    pub upper_ok: Vec<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub med_point_error: Option<f64>,
}

fn number_list(v: &Value, field: &str) -> Result<Vec<f64>, String> {
    let arr = v.as_array().ok_or_else(|| format!("{field} must be a list of numbers"))?;
    arr.iter()
        .map(|x| x.as_f64().filter(|f| f.is_finite()).ok_or_else(|| format!("{field} must contain finite numbers")))
        .collect()
}

/// Validates the raw body. Malformed `r` is a 400; length mismatches are
/// checked later against the model.
pub fn parse_infer_request(body: &[u8]) -> Result<InferRequest, ApiError> {
    let v: Value = serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid JSON: {e}")))?;
    let obj = v.as_object().ok_or_else(|| ApiError::BadRequest("body must be a JSON object".into()))?;
    let r = number_list(obj.get("r").ok_or_else(|| ApiError::BadRequest("missing r".into()))?, "r")
        .map_err(ApiError::BadRequest)?;
    if r.iter().any(|&x| x < 0.0) {
        return Err(ApiError::BadRequest(format!("r must be non-negative, got {r:?}")));
    }
    if !(r.iter().sum::<f64>() > 0.0) {
        return Err(ApiError::BadRequest("r must have a positive sum".into()));
    }
    let opt_list = |field: &str| -> Result<Option<Vec<f64>>, ApiError> {
        match obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(x) => number_list(x, field).map(Some).map_err(ApiError::Unprocessable),
        }
    };
    let expert_id = match obj.get("expert_id") {
        None | Some(Value::Null) => None,
        Some(x) => Some(
            x.as_u64()
                .ok_or_else(|| ApiError::Unprocessable("expert_id must be a non-negative integer".into()))?
                as usize,
        ),
    };
    let target = obj.get("target").and_then(Value::as_bool).unwrap_or(false);
    Ok(InferRequest { r, a: opt_list("a")?, b: opt_list("b")?, expert_id, target })
}

impl Loaded {
    fn run(&self, req: &InferRequest) -> Result<InferResponse, ApiError> {
        let m = self.problem.m;
        for (name, v) in [("r", Some(&req.r)), ("a", req.a.as_ref()), ("b", req.b.as_ref())] {
            if let Some(v) = v.filter(|v| v.len() != m) {
                return Err(ApiError::Unprocessable(format!("{name} has {} components, model expects {m}", v.len())));
            }
        }
        let components = self.ck.components();
        let component = match (self.ck.config.mode, req.expert_id) {
            (Mode::Moe, Some(id)) if id >= components => {
                return Err(ApiError::Unprocessable(format!("expert_id {id} out of range for {components} experts")))
            }
            (Mode::Moe, Some(id)) => id,
            (_, Some(_)) => {
                return Err(ApiError::Conflict(format!("expert_id given for a {} checkpoint", self.ck.config.mode)))
            }
            (Mode::Moe, None) if components > 1 && req.a.is_none() => {
                return Err(ApiError::Unprocessable("expert_id or a is required for a moe checkpoint".into()))
            }
            (_, None) => req.a.as_deref().map_or(0, |a| self.ck.component_for_anchor(a)),
        };
        let inf = self.ck.infer(&self.problem, component, &req.r, req.a.as_deref(), req.b.as_deref())?;
        // never trust the cached path: recompute F at the returned x
        let f = self.problem.evaluate(&inf.x).map_err(|e| ApiError::Internal(e.to_string()))?;
        let (target, med_point_error) = if req.target {
            let t = self.target(&inf.r, &inf.a)?;
            let err = med(std::slice::from_ref(&t), std::slice::from_ref(&f)).map_err(|e| ApiError::Internal(e.to_string()))?;
            (Some(t), Some(err))
        } else {
            (None, None)
        };
        let Inference { r, a, b, expert_id, component, x, chebyshev, argmax, feasibility, .. } = inf;
        Ok(InferResponse {
            version: self.ck.format_version,
            r,
            a,
            b,
            expert_id,
            component,
            x,
            f,
            chebyshev,
            argmax,
            feasible: feasibility.feasible,
            lower_ok: feasibility.lower_ok,
            upper_ok: feasibility.upper_ok,
            target,
            med_point_error,
        })
    }

    fn target(&self, r: &[f64], a: &[f64]) -> Result<Vec<f64>, ApiError> {
        let key: Vec<i64> = r.iter().chain(a).map(|v| (v * 1e3).round() as i64).collect();
        if let Some(t) = self.targets.read().expect("cache lock").get(&key) {
            return Ok(t.clone());
        }
        let oracle = self.oracle.get_or_init(|| FrontOracle::new(&self.problem));
        let t = oracle.optimum(r, a).map_err(|e| ApiError::Unprocessable(e.to_string()))?.objectives;
        self.targets.write().expect("cache lock").insert(key, t.clone());
        Ok(t)
    }
}

async fn infer(State(state): State<ServiceState>, body: Bytes) -> Result<Json<InferResponse>, ApiError> {
    state.loaded()?;
    let req = parse_infer_request(&body)?;
    Ok(Json(state.answer(&req)?))
}

#[derive(Debug, Deserialize)]
pub struct FrontParams {
    pub samples: Option<String>,
    pub expert: Option<String>,
    pub component: Option<String>,
}

fn parse_index(s: &str, what: &str) -> Result<usize, ApiError> {
    s.parse().map_err(|_| ApiError::BadRequest(format!("{what} must be a non-negative integer, got {s:?}")))
}

async fn front(State(state): State<ServiceState>, Query(q): Query<FrontParams>) -> Result<Json<Value>, ApiError> {
    let l = state.loaded()?;
    let samples = parse_index(q.samples.as_deref().unwrap_or("100"), "samples")?;
    if samples == 0 {
        return Err(ApiError::BadRequest("samples must be at least 1".into()));
    }
    let count = l.ck.components();
    let pick = |s: &str, what: &str| -> Result<Vec<usize>, ApiError> {
        if s == "all" {
            return Ok((0..count).collect());
        }
        let i = parse_index(s, what)?;
        if i >= count {
            return Err(ApiError::Unprocessable(format!("{what} {i} out of range for {count}")));
        }
        Ok(vec![i])
    };
    let components = match (l.ck.config.mode, q.expert.as_deref(), q.component.as_deref()) {
        (Mode::Moe, Some(e), _) => pick(e, "expert")?,
        (Mode::Moe, None, _) if count > 1 => {
            return Err(ApiError::Unprocessable("moe checkpoints need expert=ID or expert=all".into()))
        }
        (_, Some(_), _) => return Err(ApiError::Conflict("expert given for a non-moe checkpoint".into())),
        (_, None, Some(c)) => pick(c, "component")?,
        (_, None, None) => (0..count).collect(),
    };
    let points = front_sweep(&l.ck, &l.problem, samples, &components)?;
    let points: Vec<Value> = points
        .into_iter()
        .map(|p| {
            json!({
                "component": p.component,
                "r": p.r,
                "x": p.x,
                "f": p.f,
                "feasible": p.feasibility.feasible,
            })
        })
        .collect();
    Ok(Json(json!({
        "version": l.ck.format_version,
        "samples": samples,
        "components": components,
        "points": points,
    })))
}
