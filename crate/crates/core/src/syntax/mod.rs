mod formula;
mod normalize;
mod parse;
mod print;
mod term;

pub use formula::{ad_guard, is_active_domain, relativize, CmpOp, Formula, Kind, Quant};
pub use normalize::{normalize, normalize_bodies, NormalizeError, NormalizedFormula};
pub use parse::{parse, parse_term, parse_with, ParseError};
pub use term::{LinearTerm, Value, Var};
