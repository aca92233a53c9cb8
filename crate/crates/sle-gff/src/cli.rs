//! placeholder
pub fn entry() -> i32 { 0 }
