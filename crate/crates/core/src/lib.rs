//! Exact combinatorics of moduli spaces of weighted pointed stable curves of
//! genus zero: chamber analysis of the weight space, enumeration of boundary
//! strata by their dual trees, the additive relations between strata, and the
//! resulting Chow/homology groups computed by integer Smith normal form.

pub mod export;
pub mod labels;
pub mod oracles;
pub mod presentation;
pub mod relations;
pub mod strata;
pub mod trees;
pub mod verify;
pub mod weights;

pub use labels::LabelSet;
pub use oracles::{
    betti_from_point_count, eulerian_numbers, point_count_polynomial, CountPolynomial, OracleError,
};
pub use presentation::{
    chow_groups, chow_groups_from_table, poincare_polynomial, smith_normal_form,
    verify_presentation, ChowPresentation, DimensionGroup, IntegerMatrix, PresentationChecks,
    SmithForm,
};
pub use relations::{
    all_relations, insert_edge, principal_relation, InsertOutcome, Pairing, RelationError,
    RelationMutation, RelationSource, RelationVector, UnstableSide,
};
pub use strata::{enumerate_strata, stratum_euler_characteristic, StrataError, StrataTable};
pub use trees::{ATree, CanonicalKey, FiberKind, FlagId, Mark, TreeError, VertexId, VertexKey};
pub use verify::{run_verify, VerifyConfig, VerifyOutcome};
pub use weights::{
    chamber_signature_of, format_rational, parse_rational, rat, vertex_weight_structure,
    ChamberSignature, Rational, WeightDatum, WeightError, WeightFamily,
};
