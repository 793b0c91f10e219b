//! Facet-conditioned scoring: the embedder boundary, projection heads,
//! index snapshots and weighted-fusion ranking.

pub mod embedder;
pub mod heads;
pub mod index;
pub mod rank;

pub use embedder::{embed_query_facets, Embedder, EmbedderConfig, FixtureEmbedder, StaticEmbedder};
pub use heads::{project_image, FacetHeads, MlpHead};
pub use index::{build_index, IndexSnapshot, IngestRecord, StagedRecord};
pub use rank::{facet_similarity, fuse_scores, rank_corpus, RankOptions};
