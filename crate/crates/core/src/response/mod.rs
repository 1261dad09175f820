//! Parsing teacher ranking responses, repairing defective orders, merging
//! sliding windows and summarising teacher misbehaviour.

mod behavior;
mod extract;
mod parse;
mod repair;

pub use behavior::{analyze_behavior, round_to, BehaviorStats, DefectKind, DefectRecord, QueryDefects};
pub use extract::extract_json;
pub use parse::{parse_ranking_response, ParsedResponse, ReasonedRanking, ResponseDefects};
pub use repair::{merge_windows, repair_order, WindowRanking};
