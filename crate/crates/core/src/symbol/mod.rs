//! Matrix symbols, characteristic polynomial/adjugate, and the block Sylvester
//! reduction.

pub mod charpoly;
pub mod expr;
pub mod reduce;
pub mod system;

pub use charpoly::{
    adjugate_poly, adjugate_symbol, char_poly, eval_char_poly, faddeev_leverrier, lower_order_matrix,
    symbol_at, SymbolAt, TauPolyMatrix, C64,
};
pub use expr::{CoeffExpr, ExprError, Side};
pub use reduce::{companion_block, japanese, to_block_sylvester, ReducedAt, ReducedSystem};
pub use system::{SystemDoc, SystemError, SystemSpec, Which};
