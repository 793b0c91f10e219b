use intentrank_core::model::SpecError;
use intentrank_core::query::QueryError;
use intentrank_core::scoring::embedder::EmbedError;
use intentrank_core::scoring::index::IndexError;
use intentrank_core::scoring::rank::RankError;
use intentrank_svg::SvgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("invalid session id `{0}`")]
    InvalidSessionId(String),
    #[error("session `{0}` has no current spec to edit")]
    NoCurrentSpec(String),
    #[error("unknown record id `{0}`")]
    UnknownRecordId(String),
    #[error("commit cap of {cap} exceeded")]
    CommitCapExceeded { cap: usize },
    #[error("record `{0}` is not committed in this session")]
    NotCommitted(String),
    #[error("record `{0}` has no SVG source")]
    NoSvgSource(String),
    #[error("no candidates to select from")]
    EmptyCandidates,
    #[error("no edit backend configured")]
    NoEditBackend,
    #[error("edit backend: {0}")]
    EditBackend(String),
    #[error(transparent)]
    Parser(#[from] QueryError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Svg(#[from] SvgError),
    #[error("session store: {0}")]
    Store(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::InvalidSessionId(_) => "invalid_session_id",
            ServiceError::NoCurrentSpec(_) => "no_current_spec",
            ServiceError::UnknownRecordId(_) => "unknown_record_id",
            ServiceError::CommitCapExceeded { .. } => "commit_cap_exceeded",
            ServiceError::NotCommitted(_) => "not_committed",
            ServiceError::NoSvgSource(_) => "no_svg_source",
            ServiceError::EmptyCandidates => "empty_candidates",
            ServiceError::NoEditBackend => "no_edit_backend",
            ServiceError::EditBackend(_) => "edit_backend",
            ServiceError::Parser(QueryError::EmptyQuery) => "empty_query",
            ServiceError::Parser(_) => "parser_failure",
            ServiceError::Spec(e) => e.code(),
            ServiceError::Embed(_) => "embedder_failure",
            ServiceError::Rank(RankError::EmptySnapshot) => "empty_snapshot",
            ServiceError::Rank(_) => "rank_error",
            ServiceError::Index(_) => "index_error",
            ServiceError::Svg(e) => match e {
                SvgError::MalformedDocument(_) => "malformed_document",
                SvgError::UnknownNodeId(_) => "unknown_node_id",
                SvgError::UnknownPlaceholder(_) => "unknown_placeholder",
                SvgError::NestedEditConflict { .. } => "nested_edit_conflict",
                SvgError::MalformedReplacement { .. } => "malformed_replacement",
                SvgError::Vault(_) => "vault_error",
            },
            ServiceError::Store(_) => "store_error",
            ServiceError::Io(_) => "io_error",
        }
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::UnknownRecordId(_) | ServiceError::NoSvgSource(_) => 404,
            ServiceError::CommitCapExceeded { .. } | ServiceError::NotCommitted(_) | ServiceError::NoCurrentSpec(_) => {
                409
            }
            ServiceError::NoEditBackend | ServiceError::Rank(RankError::EmptySnapshot) => 503,
            ServiceError::Parser(QueryError::BackendUnavailable { .. }) => 503,
            ServiceError::EditBackend(_) | ServiceError::Embed(_) => 502,
            ServiceError::Store(_) | ServiceError::Io(_) | ServiceError::Index(_) => 500,
            ServiceError::Parser(QueryError::KeywordTable(_) | QueryError::Config(_)) => 500,
            _ => 400,
        }
    }
}
