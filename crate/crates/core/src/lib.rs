//! Toolchain for a BEV-grid scene language: LLMSLI object layouts and
//! LLMSLB building shells are parsed, compiled to yaw-only oriented boxes,
//! checked for collisions, support and bounds, and used to synthesize
//! compiler-verified training corpora.

pub mod compiler;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod export;
pub mod geometry;
pub mod grid;
pub mod llmslb;
pub mod llmsli;
pub mod relation;
pub mod syntax;
pub mod validator;
pub mod vocab;

pub use compiler::{
    anchor_sublayout, compile_building, compile_placement, compile_scene, compose_frames, CompileError, CompileOptions,
    CompiledScene, Opening, OpeningKind, Placement,
};
pub use error::{GeometryError, GridError, LookupError};
pub use eval::{evaluate_check, evaluate_cumulative, evaluate_drfr, AtomicCheck, CheckKind, Checklist, DrfrResult, EvalError};
pub use export::{export_scene, import_json, ExportError, ExportFormat};
pub use geometry::{box_corners, normalize_yaw, OrientedBox, Vec3};
pub use grid::{grid_dimensions, GridSpec};
pub use llmslb::{check_closure, parse_llmslb, parse_llmslb_bytes, print_llmslb, BuildingProgram, ClosureDiagnostic, StructSymbol};
pub use llmsli::{parse_llmsli, parse_llmsli_bytes, print_llmsli, program_stats, SceneProgram};
pub use syntax::{CellSpec, Face, GridBlock, ParseError, SublayoutRef};
pub use relation::{relation_holds, relation_satisfied, Relation};
pub use validator::{
    check_bounds, check_collisions, check_support, collision_rate, obb_intersect, validate, CollisionDiagnostic,
    Envelope, ValidateOptions, ValidationReport,
};
pub use vocab::{Category, Key, VocabEntry, Vocabulary};
