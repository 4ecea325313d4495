//! Hybrid research-paper recommendation.
//!
//! Two candidate streams are computed per paper and fused into one ranked list:
//!
//! * co-citation candidates ([`cocitation`]): papers that are cited together with the
//!   source by a common citing paper, scored through a logistic map of the count;
//! * content candidates ([`recommend::ContentIndex`]): nearest neighbors by cosine
//!   similarity of TF-IDF weighted word-vector paper embeddings ([`embedding`]),
//!   restricted to the source's spherical k-means cluster ([`clustering`]).
//!
//! [`eval`] scores graded recommendation lists with P@K and exponential-gain nDCG.

pub mod clustering;
pub mod cocitation;
pub mod corpus;
pub mod embedding;
pub mod eval;
mod io_util;
pub mod recommend;
pub mod synth;
pub mod vector;

pub use clustering::{ClusterModel, ClusterParams, SearchPartition};
pub use cocitation::{CoCitationCounter, CoCitationList};
pub use corpus::{CitationIndex, Corpus, PaperId, PaperRecord, StatsReport, Topic};
pub use embedding::{EmbeddingStore, TfIdfModel, TrainingParams, WordEmbeddings};
pub use recommend::{ContentIndex, MergeParams, Provenance, Recommendation};
