//! Finite-scale versions of the constructions: the telescope graph, the
//! union `Γ_u` of bounded-degree graphs, Morita interleaving, limits of
//! embeddings into a group, and gluing of local kernels.

mod gamma;
mod glue;
mod limit;
mod morita;
mod telescope;

use serde::{Deserialize, Serialize};

pub use gamma::{connected_cubic_classes, gamma_u, GammaComponent, GammaU, SmallGraph, GAMMA_MAX_VERTICES};
pub use glue::{glue_local_kernel, GlueBlock, GlueBlockDoc, GlueDoc, GlueReport};
pub use limit::{limit_embedding, LimitEmbedding, PointMap, DEFAULT_MIN_TAIL};
pub use morita::{morita_conjugation_check, morita_interleave, ConjugationReport, InterleaveReport, Surjection};
pub use telescope::{telescope_check, telescope_graph, GraphDoc, TelescopeGraph, TelescopeReport, Vertex};

/// A map given by parallel lists of domain ids and value ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDoc {
    pub domain: Vec<String>,
    pub values: Vec<String>,
}

/// `{"maps": [{"domain": [..], "values": [..]}, ..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFamilyDoc {
    pub maps: Vec<MapDoc>,
}
