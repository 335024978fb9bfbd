//! Read-only HTTP API consumed by the dashboard.
//!
//! | Endpoint | Response |
//! |---|---|
//! | `GET /cities` | `[{name, lat, lon, radius_km}]` in registry order |
//! | `GET /alerts` | full [`AlertSnapshot`] |
//! | `GET /alerts?city=X` | `{computed_at, city, syndromes: [6 × {syndrome, score, band, trend, current_count}]}` |
//! | `GET /series?city=X&syndrome=S&granularity=G&days=N` | `{city, syndrome, granularity, start, end, points: [[bucket_start, count]]}` |
//! | `GET /messages?city=X&syndrome=S&hour=H&limit=L` | `{city, syndrome, hour, messages: [Message]}` newest first |
//!
//! Times are RFC 3339 UTC. "Now" is the `computed_at` of the latest alert
//! snapshot, so replayed history is served relative to its own clock.
//! `granularity` defaults to `hourly`, `days` to 7 (max 366), `hour` to the
//! last complete hour, `limit` to 20 (max 500). Errors are
//! `{"error": "..."}` with status 400 for bad parameters and 404 for an
//! unknown city.

use std::sync::{Arc, RwLock};

use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use syndromic_core::geo::{City, CityRegistry};
use syndromic_core::pipeline::Message;
use syndromic_core::store::{truncate_to_hour, CountSeries, CountStore, Granularity};
use syndromic_core::Syndrome;

use crate::scheduler::{AlertSnapshot, CityAlerts};

pub const MAX_DAYS: i64 = 366;
pub const MAX_LIMIT: usize = 500;

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<CityRegistry>,
    pub store: Arc<dyn CountStore>,
    pub alerts: Arc<RwLock<AlertSnapshot>>,
}

impl AppState {
    fn snapshot(&self) -> AlertSnapshot {
        self.alerts.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn now(&self) -> DateTime<Utc> {
        self.alerts.read().unwrap_or_else(|e| e.into_inner()).computed_at
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/cities", get(cities))
        .route("/alerts", get(alerts))
        .route("/series", get(series))
        .route("/messages", get(messages))
        .layer(axum::middleware::map_response(allow_any_origin))
        .with_state(state)
}

async fn allow_any_origin(mut res: Response) -> Response {
    res.headers_mut()
        .insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    res
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn known_city<'a>(state: &'a AppState, name: Option<&str>) -> Result<&'a City, ApiError> {
    let name = name.ok_or_else(|| ApiError::bad_request("missing `city`"))?;
    state
        .registry
        .get(name)
        .ok_or_else(|| ApiError::not_found(format!("unknown city `{name}`")))
}

fn syndrome_param(raw: Option<&str>) -> Result<Syndrome, ApiError> {
    raw.ok_or_else(|| ApiError::bad_request("missing `syndrome`"))?
        .parse()
        .map_err(|e: syndromic_core::Error| ApiError::bad_request(e.to_string()))
}

fn number<T: std::str::FromStr>(name: &str, raw: Option<&str>, default: T) -> Result<T, ApiError> {
    match raw {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| ApiError::bad_request(format!("`{name}` must be a non-negative integer"))),
    }
}

async fn cities(State(state): State<AppState>) -> Json<Vec<City>> {
    Json(state.registry.cities().to_vec())
}

#[derive(Debug, Deserialize)]
struct AlertsQuery {
    city: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CityAlertsResponse {
    pub computed_at: DateTime<Utc>,
    #[serde(flatten)]
    pub alerts: CityAlerts,
}

async fn alerts(State(state): State<AppState>, Query(q): Query<AlertsQuery>) -> Result<Response, ApiError> {
    let snapshot = state.snapshot();
    let Some(name) = q.city else {
        return Ok(Json(snapshot).into_response());
    };
    let city = known_city(&state, Some(&name))?;
    let alerts = snapshot
        .city(&city.name)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("no alerts computed for `{name}`")))?;
    Ok(Json(CityAlertsResponse {
        computed_at: snapshot.computed_at,
        alerts,
    })
    .into_response())
}

#[derive(Debug, Deserialize)]
struct SeriesQuery {
    city: Option<String>,
    syndrome: Option<String>,
    granularity: Option<String>,
    days: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesResponse {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    #[serde(flatten)]
    pub series: CountSeries,
}

async fn series(State(state): State<AppState>, Query(q): Query<SeriesQuery>) -> ApiResult<SeriesResponse> {
    let city = known_city(&state, q.city.as_deref())?;
    let syndrome = syndrome_param(q.syndrome.as_deref())?;
    let granularity: Granularity = q
        .granularity
        .as_deref()
        .unwrap_or("hourly")
        .parse()
        .map_err(|e: syndromic_core::Error| ApiError::bad_request(e.to_string()))?;
    let days: i64 = number("days", q.days.as_deref(), 7)?;
    if !(1..=MAX_DAYS).contains(&days) {
        return Err(ApiError::bad_request(format!("`days` must be in 1..={MAX_DAYS}")));
    }
    let end = state.now();
    let start = end - Duration::days(days);
    let series = state
        .store
        .series(&city.name, syndrome, start, end, granularity)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(SeriesResponse { start, end, series }))
}

#[derive(Debug, Deserialize)]
struct MessagesQuery {
    city: Option<String>,
    syndrome: Option<String>,
    hour: Option<String>,
    limit: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessagesResponse {
    pub city: String,
    pub syndrome: Syndrome,
    pub hour: DateTime<Utc>,
    pub messages: Vec<Message>,
}

async fn messages(State(state): State<AppState>, Query(q): Query<MessagesQuery>) -> ApiResult<MessagesResponse> {
    let city = known_city(&state, q.city.as_deref())?;
    let syndrome = syndrome_param(q.syndrome.as_deref())?;
    let hour = match q.hour.as_deref() {
        None => state.now() - Duration::hours(1),
        Some(raw) => DateTime::parse_from_rfc3339(raw)
            .map_err(|e| ApiError::bad_request(format!("`hour`: {e}")))?
            .with_timezone(&Utc),
    };
    let hour = truncate_to_hour(hour);
    let limit: usize = number("limit", q.limit.as_deref(), 20)?;
    if !(1..=MAX_LIMIT).contains(&limit) {
        return Err(ApiError::bad_request(format!("`limit` must be in 1..={MAX_LIMIT}")));
    }
    let messages = state
        .store
        .messages(&city.name, syndrome, hour, hour + Duration::hours(1), limit)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(MessagesResponse {
        city: city.name.clone(),
        syndrome,
        hour,
        messages,
    }))
}
