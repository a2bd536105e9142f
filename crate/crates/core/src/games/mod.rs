pub mod cards;
pub mod lottery;
