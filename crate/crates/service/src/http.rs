//! JSON-over-HTTP binding of [`App`].

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use intentrank_svg::{Granularity, SummaryOptions};
use serde::{Deserialize, Serialize};

use crate::app::{App, AutoSelectRequest, SearchRequest};
use crate::error::ServiceError;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(ErrorBody { error: self.code().into(), message: self.to_string() })).into_response()
    }
}

type Shared = Arc<App>;

async fn blocking<T, F>(app: Shared, f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce(&App) -> Result<T, ServiceError> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&app)).await {
        Ok(Ok(v)) => Json(v).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(join) => ServiceError::Store(format!("worker failed: {join}")).into_response(),
    }
}

#[derive(Debug, Deserialize)]
pub struct ParseBody {
    pub query: String,
}

#[derive(Debug, Default, Deserialize)]
pub struct RecordIds {
    #[serde(default)]
    pub record_ids: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
pub struct SummarizeBody {
    #[serde(default)]
    pub granularity: Granularity,
}

#[derive(Debug, Deserialize)]
pub struct ShowBody {
    pub node_id: String,
    #[serde(default)]
    pub document_hash: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct StitchBody {
    #[serde(default)]
    pub edits: BTreeMap<String, String>,
    #[serde(default)]
    pub document_hash: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct ProposeBody {
    pub message: String,
}

#[derive(Debug, Default, Deserialize)]
pub struct ReindexBody {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Commits {
    committed: Vec<String>,
}

pub fn router(app: Shared) -> Router {
    Router::new()
        .route("/healthz", get(|State(app): State<Shared>| async move { Json(app.health()) }))
        .route(
            "/parse",
            post(|State(app): State<Shared>, Json(b): Json<ParseBody>| async move {
                blocking(app, move |a| a.parse(&b.query)).await
            }),
        )
        .route(
            "/search",
            post(|State(app): State<Shared>, Json(req): Json<SearchRequest>| async move {
                blocking(app, move |a| a.search(&req)).await
            }),
        )
        .route(
            "/sessions/{id}",
            get(|State(app): State<Shared>, Path(id): Path<String>| async move { blocking(app, move |a| a.session(&id)).await }),
        )
        .route(
            "/sessions/{id}/commits",
            get(|State(app): State<Shared>, Path(id): Path<String>| async move {
                blocking(app, move |a| a.commits(&id).map(|committed| Commits { committed })).await
            })
            .post(|State(app): State<Shared>, Path(id): Path<String>, Json(b): Json<RecordIds>| async move {
                blocking(app, move |a| a.commit(&id, &b.record_ids).map(|committed| Commits { committed })).await
            })
            .delete(|State(app): State<Shared>, Path(id): Path<String>, Json(b): Json<RecordIds>| async move {
                blocking(app, move |a| a.remove(&id, &b.record_ids).map(|committed| Commits { committed })).await
            }),
        )
        .route(
            "/sessions/{id}/auto-select",
            post(|State(app): State<Shared>, Path(id): Path<String>, Json(b): Json<AutoSelectRequest>| async move {
                blocking(app, move |a| a.auto_select(&id, &b)).await
            }),
        )
        .route(
            "/sessions/{id}/svg/{record}/summarize",
            post(
                |State(app): State<Shared>, Path((id, record)): Path<(String, String)>, Json(b): Json<SummarizeBody>| async move {
                    blocking(app, move |a| a.svg_summarize(&id, &record, SummaryOptions { granularity: b.granularity })).await
                },
            ),
        )
        .route(
            "/sessions/{id}/svg/{record}/show",
            post(|State(app): State<Shared>, Path((id, record)): Path<(String, String)>, Json(b): Json<ShowBody>| async move {
                blocking(app, move |a| a.svg_show(&id, &record, &b.node_id, b.document_hash.as_deref())).await
            }),
        )
        .route(
            "/sessions/{id}/svg/{record}/stitch",
            post(|State(app): State<Shared>, Path((id, record)): Path<(String, String)>, Json(b): Json<StitchBody>| async move {
                blocking(app, move |a| a.svg_stitch(&id, &record, &b.edits, b.document_hash.as_deref())).await
            }),
        )
        .route(
            "/sessions/{id}/svg/{record}/propose",
            post(|State(app): State<Shared>, Path((id, record)): Path<(String, String)>, Json(b): Json<ProposeBody>| async move {
                blocking(app, move |a| a.svg_propose(&id, &record, &b.message)).await
            }),
        )
        .route(
            "/sessions/{id}/svg/{record}/versions",
            get(|State(app): State<Shared>, Path((id, record)): Path<(String, String)>| async move {
                blocking(app, move |a| a.svg_versions(&id, &record)).await
            }),
        )
        .route(
            "/sessions/{id}/svg/{record}/versions/{version}",
            get(|State(app): State<Shared>, Path((id, record, version)): Path<(String, String, u32)>| async move {
                let res = tokio::task::spawn_blocking(move || app.svg_version_text(&id, &record, version)).await;
                match res {
                    Ok(Ok(text)) => ([(header::CONTENT_TYPE, "image/svg+xml")], text).into_response(),
                    Ok(Err(e)) => e.into_response(),
                    Err(join) => ServiceError::Store(format!("worker failed: {join}")).into_response(),
                }
            }),
        )
        .route(
            "/admin/reindex",
            post(|State(app): State<Shared>, Json(b): Json<ReindexBody>| async move {
                blocking(app, move |a| a.reindex(b.dir.as_deref())).await
            }),
        )
        .with_state(app)
}

/// Serves until ctrl-c.
pub async fn serve(app: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
